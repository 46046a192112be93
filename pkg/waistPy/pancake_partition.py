# load packages
import numpy as np
import pandas as pd
from scipy.optimize import minimize
from typing import Callable, List, Optional
from waistPy.helpers import (
    WaistError, DegenerateError, NotConvergedError, generator, check_positive_int, orthonormalComplement
)
from waistPy.measures import MeasureSpec, sampleBody
from waistPy.convex_geometry import (
    ConvexBody, equalMeasureCut, bodyMeasure, directionalWidth, johnEllipsoid, pancakeDeficiency, flatDistanceBound
)
from waistPy.tube_volumes import pancakeRatioBound

MAX_LEAVES = 16
PENALTY = 1e6


######
#
# These classes hold a hierarchy of equal measure cuts and the resulting partition
#
######


class CutTree:
    def __init__(
            self, depth: int, directions: np.ndarray, offsets: np.ndarray, frames: List[np.ndarray],
            spread: float = 0.0, converged: bool = True, evaluations: int = 0, F_values: Optional[np.ndarray] = None,
            partition: Optional["PartitionResult"] = None
    ):
        """
        Initializes a CutTree object.

        Args:
            depth (int): Depth I, the tree has N = 2^I leaves and N - 1 internal nodes.
            directions (array): (N - 1, n) unit cut normals in breadth first order.
            offsets (array): (N - 1,) resolved cut offsets.
            frames (list): Per level (n, n - k - 1) orthonormal frames of L_i.
            spread (float): Max pairwise distance of the functional values on the leaves.
            converged (bool): Whether the spread reached the declared target.
            evaluations (int): Number of functional evaluations spent.
            F_values (array): (N, k) functional values of the leaves.
            partition (PartitionResult): Partition induced by the directions.
        """
        self.depth = depth
        self.directions = np.asarray(directions, dtype=float)
        self.offsets = np.asarray(offsets, dtype=float)
        self.frames = frames
        self.spread = spread
        self.converged = converged
        self.evaluations = evaluations
        self.F_values = F_values
        self.partition = partition

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "directions": self.directions.tolist(),
            "offsets": self.offsets.tolist(),
            "spread": float(self.spread),
            "converged": bool(self.converged),
            "evaluations": int(self.evaluations),
            "F_values": None if self.F_values is None else np.asarray(self.F_values).tolist(),
        }


class PartitionResult:
    def __init__(self, bodies: List[ConvexBody], masses: np.ndarray, directions: np.ndarray, offsets: np.ndarray):
        """
        Initializes a PartitionResult object.

        Args:
            bodies (list): All 2N - 1 bodies of the tree in breadth first order, the last N are the leaves.
            masses (array): Leaf masses as fractions of mu(B(R)).
            directions (array): Cut normals per internal node.
            offsets (array): Cut offsets per internal node.
        """
        self.bodies = bodies
        self.masses = masses
        self.directions = directions
        self.offsets = offsets
        self.F_values = None
        self.spread = None

    @property
    def leaves(self) -> List[ConvexBody]:
        return self.bodies[len(self.bodies) // 2:]

    @property
    def depth(self) -> int:
        return int(np.log2(len(self.leaves)))

    def to_dict(self) -> dict:
        return {
            "directions": np.asarray(self.directions).tolist(),
            "offsets": np.asarray(self.offsets).tolist(),
            "masses": np.asarray(self.masses).tolist(),
            "F_values": None if self.F_values is None else np.asarray(self.F_values).tolist(),
            "spread": None if self.spread is None else float(self.spread),
        }


######
#
# This function returns a sequence of uniformly distributed (n - k - 1)-dimensional frames
#
######


def subspaceSequence(n: int, k: int, count: int, seed: int) -> List[np.ndarray]:
    # check arguments
    n = check_positive_int(n, "n")
    if k < 1 or k >= n:
        raise WaistError("Argument 'k' must satisfy 1 <= k < n.")

    frames = []
    for level in range(count):
        if n - k - 1 == 0:
            frames.append(np.zeros((n, 0)))
            continue

        # qr of a gaussian matrix, signs fixed so the frame is haar distributed
        gaussian = generator(seed, level).standard_normal((n, n - k - 1))
        q, r = np.linalg.qr(gaussian)
        frames.append(q * np.sign(np.diag(r)))

    # return frames
    return frames


def randomTreeDirections(n: int, k: int, depth: int, seed: int, frames: Optional[List[np.ndarray]] = None) -> np.ndarray:
    """
    Returns 2^depth - 1 node directions, each uniform on the unit sphere of its level's L_i^perp.
    """
    frames = subspaceSequence(n, k, depth, seed) if frames is None else frames
    rng = generator(seed, depth + 1)
    directions = []
    for node in range(2 ** depth - 1):
        basis = orthonormalComplement(frames[int(np.floor(np.log2(node + 1)))], n)
        u = basis @ rng.standard_normal(basis.shape[1])
        directions.append(u / np.linalg.norm(u))
    return np.array(directions).reshape(-1, n)


######
#
# This function cuts B(R) recursively into 2^I parts of equal measure
#
######


def buildPartition(
        spec: MeasureSpec, R: float, tree_directions, tol: float = 1e-6, count: int = 2 ** 18, seed: int = 0
) -> PartitionResult:
    # check arguments
    directions = np.asarray(tree_directions, dtype=float).reshape(-1, spec.dim)
    leaves = directions.shape[0] + 1
    if leaves & (leaves - 1):
        raise WaistError("Argument 'tree_directions' must hold 2^I - 1 directions.")

    # cut level by level
    root = ConvexBody.ball(spec.dim, R)
    bodies = [root]
    offsets = np.zeros(directions.shape[0])
    for node, u in enumerate(directions):
        body = bodies[node]
        c = equalMeasureCut(body, spec, u, 0.5, tol=tol, count=count, seed=seed)
        offsets[node] = c
        unit = u / np.linalg.norm(u)
        bodies += [body.withHalfspace(unit, c), body.withHalfspace(-unit, -c)]

    # measure leaves relative to B(R)
    total = bodyMeasure(root, spec, count=count, seed=seed)
    if total <= 0:
        raise DegenerateError("Ball B(R) has zero measure.")
    result = PartitionResult(bodies, np.zeros(0), directions, offsets)
    result.masses = np.array([bodyMeasure(leaf, spec, count=count, seed=seed) for leaf in result.leaves]) / total

    # return result
    return result


######
#
# This function searches cut directions that equalize a functional over the leaves
#
######


def _body_key(body: ConvexBody, tol: float) -> tuple:
    values = np.concatenate([body.normals.ravel(), body.offsets])
    return (body.dim, body.radius) + tuple(np.round(values / tol).astype(np.int64).tolist())


def _spread(values: np.ndarray) -> float:
    if values.shape[0] < 2:
        return 0.0
    gaps = values[:, None, :] - values[None, :, :]
    return float(np.max(np.linalg.norm(gaps, axis=2)))


def equalizeF(
        spec: MeasureSpec, R: float, F: Callable[[ConvexBody], np.ndarray], depth: int, frames: List[np.ndarray],
        seed: int = 0, budget: int = 10 ** 4, starts: int = 64, spread_target: float = 1e-3, tol: float = 1e-6,
        cache_tolerance: float = 1e-9, refine: int = 4
) -> CutTree:
    """
    Numerically finds tree directions with equal F on all leaves.

    Args:
        spec (MeasureSpec): Measure being partitioned.
        R (float): Radius of the root ball.
        F (callable): Continuous functional from bodies to k-vectors.
        depth (int): Tree depth I, N = 2^I <= 16.
        frames (list): Frames L_i per level, as returned by subspaceSequence.
        seed (int): Seed of the random starts.
        budget (int): Maximum number of objective evaluations.
        starts (int): Number of random starts screened before refinement.
        spread_target (float): Spread at which the search stops.
        tol (float): Relative mass tolerance of the cuts.
        cache_tolerance (float): Rounding of half-spaces in the F cache key.
        refine (int): Number of best starts refined with Nelder-Mead.

    Returns:
        CutTree: Best directions found, flagged when the spread target was not reached.
    """
    # check arguments
    n = spec.dim
    N = 2 ** depth
    if N > MAX_LEAVES:
        raise WaistError(f"Argument 'depth' must give at most {MAX_LEAVES} leaves.")
    if len(frames) < depth:
        raise WaistError("Argument 'frames' must hold one frame per level.")

    if depth == 0:
        leaf = ConvexBody.ball(n, R)
        value = np.atleast_1d(np.asarray(F(leaf), dtype=float))
        return CutTree(0, np.zeros((0, n)), np.zeros(0), list(frames), 0.0, True, 1, value[None, :])

    # bases of L_i^perp, directions are parameterized on their unit spheres
    bases = [orthonormalComplement(frames[level], n) for level in range(depth)]
    levels = [int(np.floor(np.log2(node + 1))) for node in range(N - 1)]
    width = bases[0].shape[1]
    circle = width == 2

    def directions_of(params: np.ndarray) -> np.ndarray:
        if circle:
            z = np.stack([np.cos(params), np.sin(params)], axis=1)
        else:
            z = params.reshape(N - 1, width)
        u = np.stack([bases[levels[node]] @ z[node] for node in range(N - 1)])
        return u / np.linalg.norm(u, axis=1, keepdims=True)

    # cached functional
    cache = {}
    state = {"evaluations": 0, "best": (np.inf, None, None, None)}

    def F_cached(body: ConvexBody) -> np.ndarray:
        key = _body_key(body, cache_tolerance)
        if key not in cache:
            cache[key] = np.atleast_1d(np.asarray(F(body), dtype=float))
        return cache[key]

    def objective(params: np.ndarray) -> float:
        state["evaluations"] += 1
        u = directions_of(np.asarray(params, dtype=float))
        try:
            partition = buildPartition(spec, R, u, tol=tol, seed=seed)
        except (DegenerateError, NotConvergedError):
            return PENALTY
        values = np.stack([F_cached(leaf) for leaf in partition.leaves])
        value = float(np.sum((values - values.mean(axis=0)) ** 2))
        if value < state["best"][0]:
            state["best"] = (value, u, partition, values)
        return value

    # screen random starts
    rng = generator(seed, 0)
    if circle:
        candidates = rng.uniform(0, 2 * np.pi, (starts, N - 1))
    else:
        candidates = rng.standard_normal((starts, (N - 1) * width))
    scores = []
    for params in candidates:
        scores.append(objective(params))
        if state["best"][3] is not None and _spread(state["best"][3]) <= spread_target:
            break

    # refine the best starts
    order = np.argsort(scores)[:refine]
    for rank, index in enumerate(order):
        best_values = state["best"][3]
        if best_values is not None and _spread(best_values) <= spread_target:
            break
        remaining = budget - state["evaluations"]
        if remaining <= 0:
            break
        minimize(
            objective, candidates[index], method="Nelder-Mead",
            options={"maxfev": max(1, remaining // (len(order) - rank)), "xatol": 1e-10,
                     "fatol": 1e-3 * spread_target ** 2}
        )

    # assemble tree
    _, u, partition, values = state["best"]
    if partition is None:
        raise NotConvergedError("Equalization found no valid partition.", best=None)
    spread = _spread(values)
    converged = spread <= spread_target
    if not converged:
        print(f"Equalization did not converge: spread {spread:.3e} above target {spread_target:.1e}, "
              f"best directions are returned.")
    partition.F_values = values
    partition.spread = spread
    return CutTree(
        depth, u, partition.offsets, list(frames[:depth]), spread, converged, state["evaluations"], values, partition
    )


######
#
# This function reports pancake deficiencies of the leaves and audits widths along every chain
#
######


def _density_ratio(spec: MeasureSpec, body: ConvexBody) -> float:
    # lower bound of min / max of the density over the body
    if spec.kind == "ball":
        return 1.0 if body.radius <= spec.radius else 0.0
    if spec.kind == "gaussian":
        return float(np.exp(-np.max(spec.scales) * body.radius ** 2))
    if spec.kind == "radial":
        radii = np.linspace(0, body.radius if spec.support_radius is None else min(body.radius, spec.support_radius), 512)
        rho = np.array([float(np.asarray(spec.rho(r), dtype=float)) for r in radii])
        return float(rho.min() / rho.max()) if rho.max() > 0 else 0.0
    return 0.0


def _frame_basis(u: np.ndarray, frame: Optional[np.ndarray], n: int) -> np.ndarray:
    # orthonormal basis of L^perp whose first vector is the cut normal
    span = orthonormalComplement(frame, n) if frame is not None else np.eye(n)
    z = span.T @ u
    q, _ = np.linalg.qr(np.column_stack([z, np.eye(span.shape[1])]))
    return span @ q[:, :span.shape[1]] * np.sign(q[:, 0] @ z)


def _projected_volume(body: ConvexBody, basis: np.ndarray, count: int) -> float:
    # product of the top semiaxes of the john ellipsoid projected onto span(basis)
    semiaxes = np.linalg.svd(basis.T @ johnEllipsoid(body).shape, compute_uv=False)
    return float(np.prod(semiaxes[:count]))


class PancakeReport:
    def __init__(self, leaves: pd.DataFrame, audit: pd.DataFrame):
        self.leaves = leaves
        self.audit = audit

    @property
    def passes(self) -> bool:
        return bool(self.audit.empty or self.audit["passes"].all())


def verifyPancake(
        result: PartitionResult, flat_dim: int, spec: Optional[MeasureSpec] = None,
        frames: Optional[List[np.ndarray]] = None, audit: bool = True, angle: float = np.pi / 12, tol: float = 1e-6
) -> PancakeReport:
    """
    Reports per leaf pancake deficiencies and audits the width and volume decrease of every cut.

    Args:
        result (PartitionResult): Partition to verify.
        flat_dim (int): Dimension of the flats the leaves are compared to.
        spec (MeasureSpec): Partitioned measure, needed for the density ratio of the audit.
        frames (list): Frames L_i per level; without frames L_i^perp is all of R^n.
        audit (bool): Whether to run the width audit.
        angle (float): Cuts whose normal is farther than this from L_i^perp are not audited.
        tol (float): Slack added to the audited bounds.
    """
    n = result.bodies[0].dim

    # per leaf deficiency
    rows = []
    for index, leaf in enumerate(result.leaves):
        delta, flat = pancakeDeficiency(leaf, flat_dim)
        bound = flatDistanceBound(leaf, flat)
        rows.append({
            "leaf": index,
            "mass": float(result.masses[index]) if len(result.masses) else np.nan,
            "delta": delta,
            "distance_bound": bound,
            "verified": bool(bound <= delta + tol),
        })
    leaves = pd.DataFrame(rows, columns=["leaf", "mass", "delta", "distance_bound", "verified"])

    # width audit along every chain, one row per cut child
    audits = []
    if audit:
        count = min(flat_dim + 1, n)
        for child in range(1, len(result.bodies)):
            parent = (child - 1) // 2
            level = int(np.floor(np.log2(parent + 1)))
            u = result.directions[parent]
            frame = frames[level] if frames is not None else None
            basis = _frame_basis(u, frame, n)
            off_angle = float(np.arccos(np.clip(np.linalg.norm(basis.T @ u), -1, 1)))
            if off_angle > angle:
                continue
            ratio_mM = _density_ratio(spec, result.bodies[parent]) if spec is not None else 0.0
            c_mu = ratio_mM * (1 - 2.0 ** (-n))
            certified = (1 - ratio_mM / 2) ** (1 / n)
            width_parent = directionalWidth(result.bodies[parent], basis[:, 0])
            width_child = directionalWidth(result.bodies[child], basis[:, 0])
            width_ratio = width_child / width_parent

            # volume of the projection onto L^perp from the john ellipsoids
            volume_ratio = (_projected_volume(result.bodies[child], basis, count)
                            / _projected_volume(result.bodies[parent], basis, count))
            audits.append({
                "node": child,
                "level": level,
                "width_parent": width_parent,
                "width_child": width_child,
                "width_ratio": width_ratio,
                "bound": certified,
                "rough_bound": 1 - c_mu / 2,
                "volume_ratio": volume_ratio,
                "volume_rough_bound": 1 - (c_mu / 2) ** count,
                "passes": bool(width_ratio <= certified + tol),
            })
    columns = ["node", "level", "width_parent", "width_child", "width_ratio", "bound", "rough_bound",
               "volume_ratio", "volume_rough_bound", "passes"]
    report = PancakeReport(leaves, pd.DataFrame(audits, columns=columns))
    if not report.passes:
        print("Width audit flagged cuts whose decrease exceeded the certified bound.")
    return report


######
#
# This function tabulates a partition
#
######


def partitionTable(result: PartitionResult, flat_dim: Optional[int] = None) -> pd.DataFrame:
    rows = []
    for index, leaf in enumerate(result.leaves):
        row = {"leaf": index, "mass": float(result.masses[index])}
        if result.F_values is not None:
            for j, value in enumerate(np.atleast_1d(result.F_values[index])):
                row[f"F{j + 1}"] = float(value)
        if flat_dim is not None:
            row["delta"] = pancakeDeficiency(leaf, flat_dim)[0]
        rows.append(row)
    return pd.DataFrame(rows)


######
#
# This function compares per pancake tube ratios with the bound tube(t - eps) - eps
#
######


def pancakeRatioCheck(
        result: PartitionResult, spec: MeasureSpec, centers, k: int, t: float, eps: float,
        count: int = 10 ** 4, seed: int = 0
) -> pd.DataFrame:
    """
    Estimates gamma(nu_t(c(P)) cap P) / gamma(P) per leaf, nu_t being the t-neighborhood of the
    (n - k)-flat of the leaf moved to pass through its center.
    """
    if spec.kind != "gaussian":
        raise WaistError("Argument 'spec' must be a gaussian spec.")
    centers = np.asarray(centers, dtype=float).reshape(len(result.leaves), spec.dim)
    bound = pancakeRatioBound(spec.scales, k, t, eps)

    rows = []
    for index, leaf in enumerate(result.leaves):
        _, flat = pancakeDeficiency(leaf, spec.dim - k)
        flat.base = centers[index]
        points = sampleBody(spec, leaf, count, seed + index).points
        p = float(np.mean(flat.distance(points) <= t))
        stderr = float(np.sqrt(p * (1 - p) / count))
        rows.append({"leaf": index, "ratio": p, "stderr": stderr, "bound": bound, "holds": bool(p >= bound - 3 * stderr)})
    return pd.DataFrame(rows, columns=["leaf", "ratio", "stderr", "bound", "holds"])
