# load packages
import numpy as np
import pandas as pd
from typing import Dict, List, Optional
from waistPy.convex_geometry import ConvexBody, gauge
from waistPy.helpers import WaistError, check_positive_int
from waistPy.maps import (
    TestMap, fiberDistance, fiberProjection, linearMap, radialMap, sphereOrthogonalMap, radiusWedgeMap
)
from waistPy.measures import MeasureSpec, mapChunks, sampleBody
from waistPy.monotone_transport import solveMonotoneTransport, transportCenter
from waistPy.pancake_partition import CutTree, equalizeF, subspaceSequence
from waistPy.tube_volumes import QUAD_TOL, modelTube, pancakenessBound

FAILURE_LIMIT = 1e-3
CURVE_COLUMNS = ["t", "lhs", "lhs_stderr", "rhs", "margin", "failures"]


######
#
# This function counts fiber distances below every t of a grid, chunk by chunk
#
######


def _check_grid(t_grid) -> np.ndarray:
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t_grid.ndim != 1 or t_grid.shape[0] == 0 or np.any(~np.isfinite(t_grid)) or np.any(t_grid < 0):
        raise WaistError("Argument 't_grid' must hold finite nonnegative numbers.")
    return t_grid


def _check_metric(spec: MeasureSpec, metric: str) -> None:
    if metric not in ["euclidean", "geodesic"]:
        raise WaistError("Argument 'metric' must be 'euclidean' or 'geodesic'.")
    if metric == "geodesic" and (spec.kind != "sphere" or spec.radius != 1.0):
        raise WaistError("Argument 'metric' may only be 'geodesic' for the uniform unit sphere.")


def _tube_counts(
        spec: MeasureSpec, f: TestMap, y: np.ndarray, t_grid: np.ndarray, count: int, seed: int, metric: str,
        starts: int, iterations: int, threads: int, chunk: int
):
    # atoms are counted exactly
    atom_part = np.zeros(t_grid.shape[0])
    for point, mass in spec.atoms:
        distance, ok = fiberDistance(f, point[None, :], y, metric, starts, iterations, seed)
        if ok[0]:
            atom_part += mass * (distance[0] <= t_grid)

    # continuous part by sampling
    continuous = spec.continuousMass
    if continuous <= 0:
        return atom_part, np.zeros_like(atom_part), np.zeros_like(atom_part), 0.0

    def per_chunk(points: np.ndarray):
        distance, ok = fiberDistance(f, points, y, metric, starts, iterations, seed)
        hits = np.count_nonzero(distance[:, None] <= t_grid[None, :], axis=0)
        return hits, int(np.count_nonzero(~ok))

    chunks = mapChunks(spec, per_chunk, count, seed, threads=threads, chunk=chunk, continuous_only=True)
    p = sum(c[0] for c in chunks) / count
    failures = sum(c[1] for c in chunks) / count
    return atom_part, continuous * p, continuous * np.sqrt(p * (1 - p) / count), failures


######
#
# This function returns the Monte Carlo measure of the t-neighborhood of a fiber
#
######


def fiberTubeMeasure(
        spec: MeasureSpec, f: TestMap, y, t: float, count: int = 10 ** 6, seed: int = 0, metric: str = "euclidean",
        starts: int = 8, iterations: int = 100, threads: int = 1, chunk: int = 2 ** 16
) -> tuple:
    """
    Returns (estimate, stderr) of mu(f^{-1}(y) + t).

    Optimization based distances are upper bounds, so the estimate never exceeds the true measure.
    """
    curve = waistCurve(spec, f, y, [t], count, seed, metric, starts, iterations, threads, chunk, model=False)
    return float(curve["lhs"].iloc[0]), float(curve["lhs_stderr"].iloc[0])


######
#
# This function compares measured fiber neighborhoods with the model bound over a grid of t
#
######


def waistCurve(
        spec: MeasureSpec, f: TestMap, y, t_grid, count: int = 10 ** 6, seed: int = 0, metric: str = "euclidean",
        starts: int = 8, iterations: int = 100, threads: int = 1, chunk: int = 2 ** 16, model: bool = True,
        tol: float = QUAD_TOL
) -> pd.DataFrame:
    # check arguments
    if spec.dim != f.n:
        raise WaistError(f"Argument 'f' must be defined on R^{spec.dim}.")
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != f.k:
        raise WaistError(f"Argument 'y' must have {f.k} entries.")
    t_grid = _check_grid(t_grid)
    count = check_positive_int(count, "count")
    _check_metric(spec, metric)

    # measure neighborhoods
    atom_part, continuous, stderr, failures = _tube_counts(
        spec, f, y, t_grid, count, seed, metric, starts, iterations, threads, chunk
    )
    if failures > FAILURE_LIMIT:
        print(f"Distance solves failed for {100 * failures:.2f}% of the samples, "
              f"the estimates are lower bounds.")

    # compare with the model
    lhs = atom_part + continuous
    rhs = modelTube(spec, f.k, t_grid, metric, tol) if model else np.full(t_grid.shape[0], np.nan)
    result = pd.DataFrame({
        "t": t_grid,
        "lhs": lhs,
        "lhs_stderr": stderr,
        "rhs": rhs,
        "margin": lhs - rhs,
        "failures": failures,
    })
    result.attrs = {"y": y.tolist(), "map": f.name, "metric": metric, "seed": seed, "count": count}

    # return result
    return result


######
#
# This class describes the verdict of a counterexample certification
#
######


class Verdict:
    def __init__(self, status: str, witnesses: List[dict], curves: Dict[str, pd.DataFrame], sigmas: float):
        self.status = status
        self.witnesses = witnesses
        self.curves = curves
        self.sigmas = sigmas

    def to_dict(self) -> dict:
        return {"status": self.status, "sigmas": self.sigmas, "witnesses": self.witnesses}

    def __repr__(self):
        return f"Verdict(status='{self.status}', witnesses={len(self.witnesses)})"


def _y_key(y: np.ndarray) -> str:
    return ",".join(f"{v:g}" for v in y)


######
#
# This function decides whether a map violates the waist inequality for every candidate y
#
######


def counterexampleCertify(
        spec: MeasureSpec, f: TestMap, t_grid, y_candidates, count: int = 10 ** 6, seed: int = 0,
        metric: str = "euclidean", sigmas: float = 3.0, starts: int = 8, iterations: int = 100, threads: int = 1,
        chunk: int = 2 ** 16
) -> Verdict:
    """
    Returns "violated" when every candidate y has a t with rhs - lhs above sigmas standard errors,
    "satisfied" when some y has no such t and all its distance solves succeeded, else "inconclusive".
    """
    # check arguments
    candidates = [np.asarray(y, dtype=float).reshape(-1) for y in y_candidates]
    if not candidates:
        raise WaistError("Argument 'y_candidates' must not be empty.")
    if f.distanceMethod != "analytic":
        print(f"Map '{f.name}' has no analytic fiber distance, a violation cannot be certified.")

    # evaluate every candidate
    curves = {}
    witnesses = []
    violated = []
    satisfied = []
    for y in candidates:
        curve = waistCurve(spec, f, y, t_grid, count, seed, metric, starts, iterations, threads, chunk)
        curves[_y_key(y)] = curve
        deficit = curve["rhs"].values - curve["lhs"].values
        stderr = curve["lhs_stderr"].values
        hit = deficit > sigmas * stderr + 1e-12
        exact = f.analyticDistance(np.zeros((1, f.n)), y, metric) is not None
        if np.any(hit) and exact:
            index = int(np.argmax(np.where(hit, deficit, -np.inf)))
            witnesses.append({
                "y": y.tolist(),
                "t": float(curve["t"].iloc[index]),
                "margin": float(deficit[index]),
                "stderr": float(stderr[index]),
                "sigmas": float(deficit[index] / stderr[index]) if stderr[index] > 0 else None,
                "closed_form": bool(stderr[index] == 0),
            })
            violated.append(True)
        else:
            violated.append(False)
        satisfied.append(not np.any(hit) and curve["failures"].iloc[0] <= FAILURE_LIMIT)

    # combine
    if all(violated):
        status = "violated"
    elif any(satisfied):
        status = "satisfied"
    else:
        status = "inconclusive"
    return Verdict(status, witnesses, curves, sigmas)


######
#
# This function returns the counterexample presets as (spec, map, y candidates, t grid, metric)
#
######


def counterexamplePreset(name: str) -> dict:
    if name == "delta-sphere":
        return {
            "spec": MeasureSpec.atomSphereMix(2, 0.5, 1.0), "map": radialMap(2),
            "y_candidates": [[0.0], [1.0]], "t_grid": [0.5], "metric": "euclidean",
        }
    if name == "sphere-orthogonal":
        return {
            "spec": MeasureSpec.uniformSphere(3), "map": sphereOrthogonalMap(3),
            "y_candidates": [[1.0]], "t_grid": [0.02, 0.05, 0.1], "metric": "euclidean",
        }
    if name == "ball-wedge":
        return {
            "spec": MeasureSpec.uniformBall(3), "map": radiusWedgeMap(3, 2),
            "y_candidates": [[0.0, 0.0], [0.5, 0.0], [-0.5, 0.0]], "t_grid": [0.1, 0.2, 0.3, 0.5],
            "metric": "euclidean",
        }
    if name == "linear-control":
        return {
            "spec": MeasureSpec.gaussianAniso([0.5, 0.5, 0.5]), "map": linearMap(3, 1),
            "y_candidates": [[0.0]], "t_grid": [0.25, 0.5, 1.0], "metric": "euclidean",
        }
    raise WaistError("Argument 'preset' must be one of ['ball-wedge', 'delta-sphere', 'linear-control', "
                     "'sphere-orthogonal'].")


######
#
# This class holds the outcome of the pancake demonstration of the gaussian waist inequality
#
######


class DemoResult:
    def __init__(self, y_found: np.ndarray, curve: pd.DataFrame, tree: CutTree, passes: bool, delta: float):
        self.y_found = y_found
        self.curve = curve
        self.tree = tree
        self.passes = passes
        self.delta = delta

    @property
    def converged(self) -> bool:
        return self.tree.converged

    def to_dict(self) -> dict:
        return {
            "y_found": self.y_found.tolist(),
            "converged": self.converged,
            "spread": self.tree.spread,
            "passes": self.passes,
            "delta_bound": self.delta,
            "tree": self.tree.to_dict(),
        }


######
#
# This function runs the pancake argument end to end and measures the waist at the common center value
#
######


def theoremDemo(
        scales: list, f: TestMap, depth: int, R: float, t_grid, seed: int = 0, count: int = 10 ** 5,
        search_resolution: int = 16, search_eps: float = 0.1, search_iterations: int = 300, budget: int = 400,
        starts: int = 8, spread_target: float = 1e-3, eps: float = 0.1, tolerance: float = 0.01,
        distance_starts: int = 8, threads: int = 1
) -> DemoResult:
    """
    Equalizes f(center) over the leaves of a pancake tree and measures gamma(f^{-1}(y) + t) at the common value.

    Args:
        scales (list): Gaussian scales a_i.
        f (TestMap): Map R^n -> R with n <= 3.
        depth (int): Tree depth I, N = 2^I <= 16.
        R (float): Radius of the ball that is partitioned.
        t_grid (array): Radii of the waist curve.
        seed (int): Seed of frames, searches and samples.
        count (int): Samples of the waist curve.
        search_resolution (int): Grid resolution of the transports inside the search.
        search_eps (float): Fixed regularization of the transports inside the search.
        search_iterations (int): Sinkhorn iterations of the transports inside the search.
        budget (int): Evaluation budget of the direction search.
        starts (int): Random starts of the direction search.
        spread_target (float): Target spread of f(center) over the leaves.
        eps (float): Gradient precision whose pancakeness bound is reported.
        tolerance (float): Solver tolerance added to the Monte Carlo noise when judging margins.
        distance_starts (int): Starts of the fiber distance solves.
        threads (int): Sampling threads.
    """
    # check arguments
    spec = MeasureSpec.gaussianAniso(scales)
    n = spec.dim
    if f.n != n or f.k != 1:
        raise WaistError(f"Argument 'f' must map R^{n} to R.")
    if n > 3:
        raise WaistError("Argument 'scales' must have at most 3 entries.")

    # functional on pieces
    def F(body: ConvexBody) -> np.ndarray:
        transport = solveMonotoneTransport(
            spec, body, resolution=search_resolution, tv_target=1.0, eps_start=search_eps, eps_floor=search_eps,
            iterations=search_iterations
        )
        return f.evaluate(transportCenter(transport))[0]

    # equalize
    frames = subspaceSequence(n, 1, depth, seed) if n > 1 else []
    tree = equalizeF(spec, R, F, depth, frames, seed=seed, budget=budget, starts=starts, spread_target=spread_target)
    y_found = np.mean(tree.F_values, axis=0)

    # measure the waist at the common value
    curve = waistCurve(spec, f, y_found, t_grid, count, seed, starts=distance_starts, threads=threads)
    passes = bool(np.all(curve["margin"] >= -(3 * curve["lhs_stderr"] + tolerance)))
    if not passes:
        print("Waist curve at the equalized value falls below the model bound beyond the tolerance.")
    return DemoResult(y_found, curve, tree, passes, pancakenessBound(eps, R))


######
#
# This function checks mu(f^{-1}(y) + tK) >= t^k mu(K) with neighborhoods in the gauge of K
#
######


def normNeighborhoodCheck(
        body: ConvexBody, f: TestMap, t_grid, count: int = 10 ** 5, seed: int = 0, y=None,
        spec: Optional[MeasureSpec] = None, starts: int = 8
) -> pd.DataFrame:
    """
    Args:
        body (ConvexBody): Centrally symmetric body K containing the origin in its interior.
        f (TestMap): Map R^n -> R^k, y = 0 is used for odd maps when y is omitted.
        t_grid (array): Radii in [0, 1].
        count (int): Samples from the measure restricted to K.
        seed (int): Sampling seed.
        y (array): Fiber value.
        spec (MeasureSpec): Centrally symmetric log-concave measure restricted to K, uniform if omitted.
        starts (int): Starts of the projection solves.
    """
    # check arguments
    t_grid = _check_grid(t_grid)
    if np.any(t_grid > 1):
        raise WaistError("Argument 't_grid' must lie in [0, 1].")
    if f.n != body.dim:
        raise WaistError(f"Argument 'f' must be defined on R^{body.dim}.")
    if y is None:
        if not f.odd:
            raise WaistError("Argument 'y' must be given for maps that are not odd.")
        y = np.zeros(f.k)
    y = np.asarray(y, dtype=float).reshape(-1)
    if spec is None:
        spec = MeasureSpec.uniformBall(body.dim, body.radius)
    if not spec.isCentrallySymmetric:
        raise WaistError("Argument 'spec' must be centrally symmetric.")

    # nearest fiber points give upper bounds of the gauge distance
    points = sampleBody(spec, body, count, seed).points
    nearest, ok = fiberProjection(f, points, y, starts=starts, seed=seed)
    distance = np.where(ok, gauge(body, points - nearest), np.inf)
    hits = np.count_nonzero(distance[:, None] <= t_grid[None, :] + 1e-12, axis=0)
    p = hits / count
    failures = float(np.mean(~ok))
    if failures > FAILURE_LIMIT:
        print(f"Projection solves failed for {100 * failures:.2f}% of the samples, the estimates are lower bounds.")

    # return curve
    rhs = t_grid ** f.k
    result = pd.DataFrame({
        "t": t_grid,
        "lhs": p,
        "lhs_stderr": np.sqrt(p * (1 - p) / count),
        "rhs": rhs,
        "margin": p - rhs,
        "failures": failures,
    })
    result.attrs = {"y": y.tolist(), "map": f.name, "metric": "gauge", "seed": seed, "count": count}
    return result
