# load packages
import argparse
import contextlib
import json
import sys
import numpy as np
import pandas as pd
from importlib.metadata import PackageNotFoundError, version
from typing import Optional, Tuple
from waistPy.config import Config
from waistPy.waist import Waist
from waistPy.helpers import WaistError, NotConvergedError, check_positive_int, configHash
from waistPy.measures import MeasureSpec, measureFromDict
from waistPy.convex_geometry import bodyFromDict
from waistPy.maps import getMap
from waistPy.monotone_transport import transportCenter, lipschitzAudit, monotonicityAudit, maResidual
from waistPy.waist_experiments import counterexamplePreset, CURVE_COLUMNS
from waistPy.pancake_partition import partitionTable
from waistPy.manifold_tubes import getManifold, croftonDegree, voronoiDisintegrationProbe

SUBCOMMANDS = ["tube", "pancake", "transport", "waist", "counterexample", "manifold", "demo"]
FIELDS = {
    "subcommand", "preset", "measure", "body", "map", "manifold", "check", "ambient", "n", "k", "scales", "y",
    "y_candidates", "metric", "t_grid", "samples", "seed", "threads", "out", "format", "depth", "R", "method",
    "resolution",
}
CHECKS = ["tube", "degree", "hopf", "crofton", "voronoi"]
DEFAULT_T = {
    "tube": (0.0, np.pi / 2), "waist": (0.0, 2.0), "counterexample": (0.0, 1.0), "manifold": (0.05, np.pi / 2),
    "demo": (0.25, 2.0),
}


######
#
# These presets reproduce the standard experiments with one flag
#
######


def _halfspace(normal: list, offset: float) -> dict:
    return {"normal": normal, "offset": offset}


PRESETS = {
    "tube-sphere": {"subcommand": "tube", "ambient": "sphere", "n": 2, "k": 1,
                    "t_grid": {"min": 0.0, "max": np.pi / 2, "count": 64}},
    "tube-cp": {"subcommand": "tube", "ambient": "cp", "n": 2, "k": 1,
                "t_grid": {"min": 0.0, "max": np.pi / 2, "count": 64}},
    "tube-gauss": {"subcommand": "tube", "ambient": "euclidean", "k": 2, "scales": [1.0, 1.0],
                   "t_grid": {"min": 0.0, "max": 3.0, "count": 64}},
    "delta-sphere": {"subcommand": "counterexample", "preset": "delta-sphere"},
    "ball-wedge": {"subcommand": "counterexample", "preset": "ball-wedge"},
    "sphere-orthogonal": {"subcommand": "counterexample", "preset": "sphere-orthogonal"},
    "equator": {"subcommand": "waist", "measure": {"dim": 3, "kind": "sphere", "radius": 1.0}, "map": "x1",
                "metric": "geodesic", "t_grid": {"min": 0.05, "max": 1.5, "count": 30}},
    "odd-cubic": {"subcommand": "waist", "measure": {"dim": 3, "kind": "sphere", "radius": 1.0}, "map": "odd-cubic",
                  "metric": "geodesic", "t_grid": [0.2, 0.5, 1.0]},
    "cube-slab": {"subcommand": "waist", "map": "linear", "k": 1, "t_grid": [0.25, 0.5, 0.75, 1.0],
                  "body": {"dim": 2, "radius": 1.5, "halfspaces": [
                      _halfspace([1.0, 0.0], 1.0), _halfspace([-1.0, 0.0], 1.0),
                      _halfspace([0.0, 1.0], 1.0), _halfspace([0.0, -1.0], 1.0)]}},
    "demo": {"subcommand": "demo", "scales": [1.0, 2.0], "map": "wavy", "depth": 2, "R": 6.0,
             "t_grid": [0.25, 0.5, 1.0, 2.0]},
    "cp-line": {"subcommand": "manifold", "manifold": "cp-line", "check": "degree", "t_grid": [0.2, 0.4, 0.6]},
    "cp-conic": {"subcommand": "manifold", "manifold": "cp-conic", "check": "degree", "t_grid": [0.2, 0.4, 0.6]},
    "transport-halfline": {"subcommand": "transport", "measure": {"dim": 1, "kind": "gaussian", "scales": [0.5]},
                           "body": {"dim": 1, "radius": 40.0, "halfspaces": [_halfspace([1.0], 0.0)]}},
    "transport-slab": {"subcommand": "transport", "measure": {"dim": 2, "kind": "gaussian", "scales": [0.5, 0.5]},
                       "body": {"dim": 2, "radius": 12.0, "halfspaces": [
                           _halfspace([0.0, 1.0], 0.5), _halfspace([0.0, -1.0], 0.5)]},
                       "method": "grid", "resolution": 128},
    "pancake-disk": {"subcommand": "pancake", "measure": {"dim": 2, "kind": "ball", "radius": 1.0}, "R": 1.0,
                     "depth": 3, "k": 1},
}


######
#
# This class holds a validated experiment configuration
#
######


class ExperimentConfig:
    def __init__(self, fields: dict):
        """
        Initializes an ExperimentConfig object, rejecting unknown fields before any computation.

        Args:
            fields (dict): Merged preset, file and flag values.
        """
        # check arguments
        unknown = set(fields) - FIELDS
        if unknown:
            raise WaistError(f"Unknown fields in config: {sorted(unknown)}.")
        if fields.get("subcommand") not in SUBCOMMANDS:
            raise WaistError(f"Field 'subcommand' must be one of {SUBCOMMANDS}.")
        if fields.get("format", "csv") not in ["csv", "json"]:
            raise WaistError("Field 'format' must be 'csv' or 'json'.")
        for name in ["samples", "threads", "n", "resolution"]:
            if name in fields:
                check_positive_int(fields[name], name)
        for name in ["seed", "k", "depth"]:
            if name in fields and (isinstance(fields[name], bool) or not isinstance(fields[name], int)
                                   or fields[name] < 0):
                raise WaistError(f"Field '{name}' must be a nonnegative integer.")
        if "check" in fields and fields["check"] not in CHECKS:
            raise WaistError(f"Field 'check' must be one of {CHECKS}.")
        self.fields = dict(fields)

    @property
    def subcommand(self) -> str:
        return self.fields["subcommand"]

    def get(self, key: str, default=None):
        return self.fields.get(key, default)

    def tGrid(self, default: Tuple[float, float], points: int) -> np.ndarray:
        grid = self.fields.get("t_grid")
        if isinstance(grid, list):
            values = np.asarray(grid, dtype=float)
        elif grid is None or isinstance(grid, dict):
            grid = grid or {}
            unknown = set(grid) - {"min", "max", "count"}
            if unknown:
                raise WaistError(f"Unknown fields in 't_grid': {sorted(unknown)}.")
            count = check_positive_int(grid.get("count", points), "t_grid.count")
            values = np.linspace(grid.get("min", default[0]), grid.get("max", default[1]), count)
        else:
            raise WaistError("Field 't_grid' must be a list or an object with 'min', 'max' and 'count'.")
        if values.ndim != 1 or values.shape[0] == 0 or np.any(~np.isfinite(values)):
            raise WaistError("Field 't_grid' must hold finite numbers.")
        return values

    def to_dict(self) -> dict:
        return {key: self.fields[key] for key in sorted(self.fields) if key not in ["out", "format"]}


######
#
# This function builds the argument parser, argument errors exit with status 1
#
######


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise WaistError(message)


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a comma separated list of numbers")


def buildParser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with an experiment configuration")
    common.add_argument("--preset", help=f"one of {sorted(PRESETS)}")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--out", help="output path, stdout if omitted")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--threads", type=int)
    common.add_argument("--ambient", choices=["euclidean", "sphere", "cp"])
    common.add_argument("--n", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--tmin", type=float)
    common.add_argument("--tmax", type=float)
    common.add_argument("--points", type=int)
    common.add_argument("--scales", type=_floats)
    common.add_argument("--map")
    common.add_argument("--manifold")
    common.add_argument("--check", choices=CHECKS)
    common.add_argument("--y", type=_floats)
    common.add_argument("--metric", choices=["euclidean", "geodesic"])
    common.add_argument("--depth", type=int)
    common.add_argument("--R", type=float)
    common.add_argument("--method")
    common.add_argument("--resolution", type=int)

    parser = _Parser(prog="waistpy", description="Waist inequality experiments.")
    commands = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        commands.add_parser(name, parents=[common])
    return parser


def _load_config(path: str) -> dict:
    try:
        with open(path) as handle:
            data = json.load(handle)
    except OSError as e:
        raise WaistError(f"Config file '{path}' cannot be read: {e.strerror}.")
    except json.JSONDecodeError as e:
        raise WaistError(f"Config file '{path}' is not valid JSON: {e.msg} at line {e.lineno} column {e.colno}.")
    if not isinstance(data, dict):
        raise WaistError(f"Config file '{path}' must hold a JSON object.")
    return data


def experimentFromArgs(args: argparse.Namespace) -> ExperimentConfig:
    # preset < config file < flags
    data = _load_config(args.config) if args.config else {}
    flags = {
        key: value for key, value in vars(args).items()
        if value is not None and key not in ["config", "tmin", "tmax", "points"]
    }
    preset = flags.get("preset", data.get("preset"))
    base = {}
    if preset is not None:
        if preset not in PRESETS:
            raise WaistError(f"Field 'preset' must be one of {sorted(PRESETS)}.")
        base = dict(PRESETS[preset])
        if base["subcommand"] != args.subcommand:
            raise WaistError(f"Preset '{preset}' belongs to subcommand '{base['subcommand']}'.")
    if data.get("subcommand", args.subcommand) != args.subcommand:
        raise WaistError(f"Config file subcommand '{data['subcommand']}' does not match '{args.subcommand}'.")
    fields = {**base, **data, **flags}

    # flags refine the t grid
    t_flags = {"min": args.tmin, "max": args.tmax, "count": args.points}
    t_flags = {key: value for key, value in t_flags.items() if value is not None}
    if t_flags:
        grid = fields.get("t_grid")
        fields["t_grid"] = {**(grid if isinstance(grid, dict) else {}), **t_flags}
    return ExperimentConfig(fields)


######
#
# These functions run one subcommand and return (table, result, status)
#
######


def _measure(experiment: ExperimentConfig, default: Optional[MeasureSpec] = None) -> MeasureSpec:
    if experiment.get("measure") is None:
        if default is None:
            raise WaistError("Field 'measure' is required.")
        return default
    return measureFromDict(experiment.get("measure"))


def _body(experiment: ExperimentConfig):
    if experiment.get("body") is None:
        raise WaistError("Field 'body' is required.")
    if not isinstance(experiment.get("body"), dict):
        raise WaistError("Field 'body' must be a JSON object.")
    return bodyFromDict(experiment.get("body"))


def _run_tube(experiment: ExperimentConfig, waist: Waist):
    ambient = experiment.get("ambient", "sphere")
    k = experiment.get("k")
    if k is None:
        raise WaistError("Field 'k' is required.")
    default = DEFAULT_T["tube"] if ambient != "euclidean" else (0.0, 3.0)
    t = experiment.tGrid(default, waist.config.T_GRID_POINTS)
    spec = _measure(experiment) if experiment.get("measure") is not None else None
    n = experiment.get("n", spec.dim if spec is not None else None)
    if n is None and ambient != "euclidean":
        raise WaistError("Field 'n' is required.")
    table = waist.tubeTable(ambient, n, k, t, experiment.get("scales"), spec)
    return table, {"ambient": ambient, "n": n, "k": k}, 0


def _run_pancake(experiment: ExperimentConfig, waist: Waist):
    spec = _measure(experiment, MeasureSpec.uniformBall(2))
    k = experiment.get("k", 1)
    result, frames = waist.randomPartition(spec, experiment.get("R", 1.0), k, experiment.get("depth", 3))
    report = waist.verifyPancake(result, k, spec, frames)
    table = partitionTable(result, k)
    payload = {"partition": result.to_dict(), "passes": report.passes, "max_delta": float(table["delta"].max())}
    return table, payload, 0


def _run_transport(experiment: ExperimentConfig, waist: Waist):
    spec = _measure(experiment)
    if spec.kind != "gaussian":
        raise WaistError("Field 'measure.kind' must be 'gaussian' for transport.")
    transport = waist.solveMonotoneTransport(spec, _body(experiment), experiment.get("method", "auto"))
    pairs = min(waist.config.SAMPLES, 10 ** 5)
    residual = maResidual(transport)
    residual.pop("residuals")
    payload = {
        "method": transport.method,
        "center": transportCenter(transport).tolist(),
        "lipschitz": lipschitzAudit(transport, pairs, waist.config.SEED),
        "monotonicity": monotonicityAudit(transport, pairs, waist.config.SEED),
        "ma_residual": residual,
        "diagnostics": transport.diagnostics,
    }
    rows = [{"quantity": f"center_{i + 1}", "value": v} for i, v in enumerate(payload["center"])]
    rows += [{"quantity": name, "value": payload[name]} for name in ["lipschitz", "monotonicity"]]
    rows += [{"quantity": "ma_mean", "value": residual["mean"]}, {"quantity": "ma_max", "value": residual["max"]}]
    return pd.DataFrame(rows), payload, 0


def _run_waist(experiment: ExperimentConfig, waist: Waist):
    name = experiment.get("map", "linear")
    k = experiment.get("k", 1)
    y = experiment.get("y")
    if experiment.get("body") is not None:
        body = _body(experiment)
        spec = _measure(experiment) if experiment.get("measure") is not None else None
        f = getMap(name, body.dim, k)
        table = waist.normNeighborhoodCheck(body, f, experiment.tGrid((0.0, 1.0), waist.config.T_GRID_POINTS), y,
                                            spec)
    else:
        spec = _measure(experiment)
        f = getMap(name, spec.dim, k)
        y = np.zeros(f.k) if y is None else y
        table = waist.waistCurve(spec, f, y, experiment.tGrid(DEFAULT_T["waist"], waist.config.T_GRID_POINTS),
                                 experiment.get("metric", "euclidean"))
    return table[CURVE_COLUMNS], {"map": f.name, "attrs": dict(table.attrs)}, 0


def _run_counterexample(experiment: ExperimentConfig, waist: Waist):
    if experiment.get("measure") is None:
        if experiment.get("preset") is None:
            raise WaistError("Field 'preset' or 'measure' is required.")
        setup = counterexamplePreset(experiment.get("preset"))
    else:
        spec = _measure(experiment)
        setup = {"spec": spec, "map": getMap(experiment.get("map", "linear"), spec.dim, experiment.get("k", 1))}
    spec, f = setup["spec"], setup["map"]
    y_candidates = experiment.get("y_candidates", setup.get("y_candidates", [np.zeros(f.k).tolist()]))
    t = experiment.tGrid(DEFAULT_T["counterexample"], waist.config.T_GRID_POINTS) \
        if experiment.get("t_grid") is not None or "t_grid" not in setup else np.asarray(setup["t_grid"])
    verdict = waist.counterexampleCertify(spec, f, t, y_candidates, experiment.get("metric", setup.get("metric",
                                                                                                       "euclidean")))
    tables = []
    for key, curve in verdict.curves.items():
        curve = curve[CURVE_COLUMNS].copy()
        curve.insert(0, "y", key)
        tables.append(curve)
    status = 2 if verdict.status == "inconclusive" else 0
    return pd.concat(tables, ignore_index=True), verdict.to_dict(), status


def _run_manifold(experiment: ExperimentConfig, waist: Waist):
    if experiment.get("manifold") is None:
        raise WaistError("Field 'manifold' is required.")
    manifold = getManifold(experiment.get("manifold"))
    check = experiment.get("check", "tube")
    t = experiment.tGrid(DEFAULT_T["manifold"], waist.config.T_GRID_POINTS)
    seed = waist.config.SEED
    if check == "tube":
        table = waist.tubeFractionMC(manifold, t)
    elif check == "degree":
        table = waist.degreeBoundCheck(manifold, t)
    elif check == "hopf":
        table = pd.DataFrame([waist.hopfConsistency(manifold, value) for value in t])
    elif check == "crofton":
        table = pd.DataFrame([croftonDegree(manifold, seed=seed)])
    else:
        table = voronoiDisintegrationProbe(manifold, count=waist.config.SAMPLES, seed=seed)
    status = 2 if "verdict" in table and np.any(table["verdict"] == "inconclusive") else 0
    return table, {"manifold": manifold.to_dict(), "check": check}, status


def _run_demo(experiment: ExperimentConfig, waist: Waist):
    scales = experiment.get("scales", [1.0, 2.0])
    f = getMap(experiment.get("map", "wavy"), len(scales), 1)
    result = waist.theoremDemo(scales, f, experiment.get("depth", 2), experiment.get("R", 6.0),
                               experiment.tGrid(DEFAULT_T["demo"], 4))
    status = 0 if result.converged and result.passes else 2
    return result.curve[CURVE_COLUMNS], result.to_dict(), status


RUNNERS = {
    "tube": _run_tube,
    "pancake": _run_pancake,
    "transport": _run_transport,
    "waist": _run_waist,
    "counterexample": _run_counterexample,
    "manifold": _run_manifold,
    "demo": _run_demo,
}


######
#
# These functions write tables with a metadata header
#
######


def _versions() -> dict:
    versions = {}
    for name in ["waistPy", "numpy", "pandas", "scipy", "cvxpy", "POT"]:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _clean(value):
    # json safe copies of numpy values, nan becomes null
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return None if not np.isfinite(value) else float(value)
    return value


def render(experiment: ExperimentConfig, table: pd.DataFrame, result: dict) -> str:
    metadata = {
        "subcommand": experiment.subcommand,
        "config_hash": configHash(experiment.to_dict()),
        "seed": experiment.get("seed", 0),
        "versions": _versions(),
        "config": experiment.to_dict(),
    }
    if experiment.get("format", "csv") == "json":
        document = {"metadata": metadata, "result": result, "rows": table.to_dict(orient="records")}
        return json.dumps(_clean(document), sort_keys=True, indent=2) + "\n"
    header = "".join(f"# {key}: {json.dumps(_clean(metadata[key]), sort_keys=True)}\n" for key in metadata)
    return header + table.to_csv(index=False, lineterminator="\n")


######
#
# This function is the console entry point
#
######


def run(experiment: ExperimentConfig) -> int:
    config = Config(
        samples=experiment.get("samples", 10 ** 6),
        seed=experiment.get("seed", 0),
        threads=experiment.get("threads", 1),
        transport_resolution=experiment.get("resolution", 128),
    )
    waist = Waist(config)
    out = experiment.get("out")

    # notices go to stderr when the table goes to stdout
    notices = sys.stderr if out is None else sys.stdout
    with contextlib.redirect_stdout(notices):
        table, result, status = RUNNERS[experiment.subcommand](experiment, waist)

    text = render(experiment, table, result)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as handle:
            handle.write(text)
    return status


def main(argv: Optional[list] = None) -> int:
    try:
        args = buildParser().parse_args(argv)
        return run(experimentFromArgs(args))
    except NotConvergedError as e:
        print(f"waistpy: not converged: {e}", file=sys.stderr)
        return 2
    except WaistError as e:
        print(f"waistpy: error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"waistpy: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
