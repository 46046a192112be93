# load packages
import numpy as np
import ot
import pandas as pd
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gammaincc, logsumexp, ndtr, ndtri
from typing import List, Optional, Tuple, Union
from waistPy.convex_geometry import ConvexBody, boundingBox, bodyMeasure
from waistPy.helpers import (
    WaistError, DegenerateError, NotConvergedError, generator, as_points, check_positive_int, check_nonnegative
)
from waistPy.measures import MeasureSpec

METHODS = ["auto", "product", "grid"]
PRODUCT_TV = 1e-6
MASS_FLOOR = 1e-9
SOURCE_SIGMAS = 5.0
TABLE_SIGMAS = 8.0
TABLE_NODES = 4097
POT_GRID_LIMIT = 256
MAX_GRID_RESOLUTION = {1: 4096, 2: 256, 3: 48}


######
#
# This class holds a convex potential U with grad U = T
#
######


class Potential:
    def __init__(self, dim: int, axes: Optional[List[np.ndarray]] = None, values: Optional[np.ndarray] = None,
                 tables: Optional[List[Tuple[np.ndarray, np.ndarray]]] = None):
        """
        Initializes a Potential object from grid values or from per coordinate tables.

        Args:
            dim (int): Ambient dimension n.
            axes (list): Grid axes of a grid potential.
            values (array): Convex grid values of a grid potential.
            tables (list): (x, U_i(x)) tables of a product potential U = sum U_i(x_i).
        """
        self.dim = dim
        self.axes = axes
        self.values = values
        self.tables = tables
        self._interpolator = None
        if axes is not None:
            self._interpolator = RegularGridInterpolator(axes, values, method="linear", bounds_error=False, fill_value=None)

    @property
    def isProduct(self) -> bool:
        return self.tables is not None

    @property
    def box(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.isProduct:
            return np.array([t[0][0] for t in self.tables]), np.array([t[0][-1] for t in self.tables])
        return np.array([a[0] for a in self.axes]), np.array([a[-1] for a in self.axes])

    def __call__(self, x) -> np.ndarray:
        points = as_points(x, self.dim)
        lower, upper = self.box
        points = np.clip(points, lower, upper)
        if self.isProduct:
            return sum(np.interp(points[:, i], grid, u) for i, (grid, u) in enumerate(self.tables))
        return self._interpolator(points)

    def gridValues(self, resolution: int = 129) -> Tuple[List[np.ndarray], np.ndarray]:
        """
        Returns axes and row-major values of the potential on a regular grid.
        """
        if not self.isProduct:
            return self.axes, self.values
        axes = [np.linspace(grid[0], grid[-1], resolution) for grid, _ in self.tables]
        values = np.zeros([resolution] * self.dim)
        for i, (grid, u) in enumerate(self.tables):
            shape = [1] * self.dim
            shape[i] = resolution
            values = values + np.interp(axes[i], grid, u).reshape(shape)
        return axes, values

    def midpointGap(self, count: int = 10 ** 4, seed: int = 0) -> float:
        """
        Returns the largest violation of U((x+y)/2) <= (U(x)+U(y))/2 over random pairs of the box.
        """
        lower, upper = self.box
        rng = generator(seed, 1)
        x = rng.uniform(lower, upper, (count, self.dim))
        y = rng.uniform(lower, upper, (count, self.dim))
        return float(np.max(self((x + y) / 2) - (self(x) + self(y)) / 2))

    def gradientGap(self, field: np.ndarray) -> float:
        """
        Returns the largest difference between finite differences of grid values and a map field on the grid.
        """
        axes, values = self.gridValues()
        gradients = np.gradient(values, *axes) if self.dim > 1 else [np.gradient(values, axes[0])]
        interior = tuple(slice(1, -1) for _ in range(self.dim))
        return float(max(np.max(np.abs(g[interior] - field[interior + (i,)])) for i, g in enumerate(gradients)))


######
#
# This class describes the monotone transport of a Gaussian onto its normalized restriction to a convex body
#
######


class TransportMap:
    def __init__(self, scales: np.ndarray, body: ConvexBody, evaluate, potential: Potential, method: str,
                 mass: float, cell: float, diagnostics: dict, shift: Optional[np.ndarray] = None, field=None):
        self.scales = np.asarray(scales, dtype=float)
        self.body = body
        self._evaluate = evaluate
        self.potential = potential
        self.method = method
        self.mass = mass
        self.cell = cell
        self.diagnostics = dict(diagnostics)
        self.shift = np.zeros(body.dim) if shift is None else np.asarray(shift, dtype=float)
        self.field = field

    @property
    def dim(self) -> int:
        return self.body.dim

    def evaluate(self, x) -> np.ndarray:
        points = as_points(x, self.dim)
        return self._evaluate(points) + self.shift

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)

    def translated(self, v) -> "TransportMap":
        """
        Returns the map onto the body translated by v, which is T + v.
        """
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.shape[0] != self.dim:
            raise WaistError(f"Argument 'v' must have {self.dim} entries.")
        return TransportMap(self.scales, self.body, self._evaluate, self.potential, self.method, self.mass,
                            self.cell, self.diagnostics, self.shift + v, self.field)

    def targetContains(self, y, tol: float) -> np.ndarray:
        return self.body.contains(np.atleast_2d(y) - self.shift, tol=tol)

    def boundaryDistance(self, y) -> np.ndarray:
        """
        Returns a lower bound on the distance of image points to the body boundary, negative outside.
        """
        y = np.atleast_2d(y) - self.shift
        distance = self.body.radius - np.linalg.norm(y, axis=1)
        if self.body.normals.shape[0]:
            distance = np.minimum(distance, np.min(self.body.offsets - y @ self.body.normals.T, axis=1))
        return distance

    def __repr__(self):
        return f"TransportMap(dim={self.dim}, method='{self.method}', mass={self.mass:.6g})"


######
#
# These functions decide which solver applies
#
######


def _source_scales(source) -> np.ndarray:
    if isinstance(source, MeasureSpec):
        if source.kind != "gaussian":
            raise WaistError("Argument 'source' must be a Gaussian spec.")
        return source.scales
    scales = np.asarray(source, dtype=float).reshape(-1)
    if scales.shape[0] == 0 or not np.all(np.isfinite(scales)) or np.any(scales <= 0):
        raise WaistError("Argument 'source' must contain strictly positive scales.")
    return scales


def _product_limits(body: ConvexBody) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    # axis aligned normals only
    n = body.dim
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    for u, c in body.halfspaces:
        axis = int(np.argmax(np.abs(u)))
        if np.sum(np.abs(u) > 1e-12) != 1:
            return None
        if u[axis] > 0:
            upper[axis] = min(upper[axis], c)
        else:
            lower[axis] = max(lower[axis], -c)
    return lower, upper


def _product_mass(scales: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    sigma = 1 / np.sqrt(2 * scales)
    return float(np.prod(ndtr(upper / sigma) - ndtr(lower / sigma)))


def _ball_negligible(scales: np.ndarray, radius: float, mass: float) -> bool:
    # gaussian mass outside B(R) is at most the chi-square tail of the smallest scale
    tail = gammaincc(scales.shape[0] / 2, np.min(scales) * radius ** 2)
    return tail <= PRODUCT_TV * 1e-4 * mass


######
#
# This function returns the 1-D monotone map of N(0, sigma^2) onto its restriction to [lo, hi]
#
######


def _interval_map(x: np.ndarray, sigma: float, lo: float, hi: float) -> np.ndarray:
    if lo > 0:
        # mirrored form keeps far right intervals accurate
        return -_interval_map(-x, sigma, -hi, -lo)
    if lo == -np.inf and hi == np.inf:
        return np.array(x, dtype=float)
    p_lo = ndtr(lo / sigma)
    p_hi = ndtr(hi / sigma)
    return sigma * ndtri(p_lo + ndtr(x / sigma) * (p_hi - p_lo))


def _product_tv(evaluate_axis, sigma: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    # dyadic discrepancy as on the grid path, cell masses factor over the axes
    p_cells = np.ones(1)
    q_cells = np.ones(1)
    for i, s in enumerate(sigma):
        mid = (max(lower[i], -SOURCE_SIGMAS * s) + min(upper[i], SOURCE_SIGMAS * s)) / 2
        mid = float(np.clip(mid, lower[i], upper[i]))
        x = np.linspace(-SOURCE_SIGMAS * s, SOURCE_SIGMAS * s, TABLE_NODES)
        weights = np.exp(-0.5 * (x / s) ** 2)
        p = float(np.sum(weights[evaluate_axis(x, i) >= mid]) / np.sum(weights))
        if lower[i] > 0:
            q = (ndtr(-mid / s) - ndtr(-upper[i] / s)) / (ndtr(-lower[i] / s) - ndtr(-upper[i] / s))
        else:
            q = (ndtr(upper[i] / s) - ndtr(mid / s)) / (ndtr(upper[i] / s) - ndtr(lower[i] / s))
        p_cells = np.outer(p_cells, [1 - p, p]).ravel()
        q_cells = np.outer(q_cells, [1 - q, q]).ravel()
    return float(0.5 * np.sum(np.abs(p_cells - q_cells)))


def _product_solve(scales: np.ndarray, body: ConvexBody, lower: np.ndarray, upper: np.ndarray,
                   mass: float) -> TransportMap:
    n = scales.shape[0]
    sigma = 1 / np.sqrt(2 * scales)

    def evaluate_axis(x: np.ndarray, i: int) -> np.ndarray:
        return _interval_map(x, sigma[i], lower[i], upper[i])

    def evaluate(points: np.ndarray) -> np.ndarray:
        return np.column_stack([evaluate_axis(points[:, i], i) for i in range(n)])

    # potential tables U_i(x) = integral of T_i from 0
    tables = []
    for i in range(n):
        grid = np.linspace(-TABLE_SIGMAS * sigma[i], TABLE_SIGMAS * sigma[i], TABLE_NODES)
        values = cumulative_trapezoid(evaluate_axis(grid, i), grid, initial=0)
        tables.append((grid, values - np.interp(0.0, grid, values)))

    tv = _product_tv(evaluate_axis, sigma, lower, upper)
    diagnostics = {"method": "product", "tv": tv, "mass": mass, "lower": lower.tolist(), "upper": upper.tolist()}
    return TransportMap(scales, body, evaluate, Potential(n, tables=tables), "product", mass, 1e-6, diagnostics)


######
#
# These functions run log-domain Sinkhorn on product grids with separable costs
#
######


def _lse_contract(h: np.ndarray, kernels: List[np.ndarray]) -> np.ndarray:
    """
    Returns log sum_y exp(h(y) + sum_i K_i[x_i, y_i]) for every x, one axis at a time.
    """
    out = h
    with np.errstate(divide="ignore", invalid="ignore"):
        for axis, kernel in enumerate(kernels):
            moved = np.moveaxis(out, axis, -1)
            moved = logsumexp(moved[..., None, :] + kernel, axis=-1)
            out = np.moveaxis(moved, -1, axis)
    return out


def _log_gaussian_grid(axes: List[np.ndarray], scales: np.ndarray) -> np.ndarray:
    n = len(axes)
    out = np.zeros([a.shape[0] for a in axes])
    for i, a in enumerate(axes):
        shape = [1] * n
        shape[i] = a.shape[0]
        out = out - scales[i] * a.reshape(shape) ** 2
    return out


def _coverage(body: ConvexBody, axes: List[np.ndarray]) -> np.ndarray:
    """
    Returns the soft fraction of each grid cell inside the body, a linear ramp across each constraint.
    """
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    h = np.array([a[1] - a[0] if a.shape[0] > 1 else 1.0 for a in axes])
    coverage = np.clip(0.5 + (body.radius - np.linalg.norm(mesh, axis=-1)) / np.linalg.norm(h), 0, 1)
    for u, c in body.halfspaces:
        ramp = np.sum(np.abs(u) * h)
        coverage = coverage * np.clip(0.5 + (c - mesh @ u) / ramp, 0, 1)
    return coverage


def _pot_solve(log_a: np.ndarray, log_b: np.ndarray, src_axes, tgt_axes, eps: float, iterations: int):
    # small grids go through the dense log-domain solver
    xs = np.stack(np.meshgrid(*src_axes, indexing="ij"), axis=-1).reshape(-1, len(src_axes))
    ys = np.stack(np.meshgrid(*tgt_axes, indexing="ij"), axis=-1).reshape(-1, len(tgt_axes))
    b = np.exp(log_b.ravel())
    keep = b > 0
    M = 0.5 * ot.dist(xs, ys[keep], metric="sqeuclidean")
    plan = ot.sinkhorn(np.exp(log_a.ravel()), b[keep], M, eps, method="sinkhorn_log",
                       numItermax=iterations, stopThr=1e-9, warn=False)
    rows = plan.sum(axis=1)
    field = (plan @ ys[keep]) / np.where(rows > 0, rows, 1.0)[:, None]
    error = float(np.sum(np.abs(rows - np.exp(log_a.ravel()))))
    return field.reshape(log_a.shape + (len(src_axes),)), error


def _sinkhorn(log_a, log_b, costs, eps, f, g, iterations, tol):
    src_kernels = [-c / eps for c in costs]
    tgt_kernels = [-c.T / eps for c in costs]
    error = np.inf
    for step in range(iterations):
        f = -eps * _lse_contract(log_b + g / eps, src_kernels)
        g = -eps * _lse_contract(log_a + f / eps, tgt_kernels)
        if step % 10 == 0:
            rows = log_a + f / eps + _lse_contract(log_b + g / eps, src_kernels)
            error = float(np.sum(np.abs(np.exp(rows) - np.exp(log_a))))
            if error < tol:
                break
    return f, g, error


def _barycentric(log_b, g, costs, eps, tgt_axes) -> np.ndarray:
    n = len(tgt_axes)
    kernels = [-c / eps for c in costs]
    h = log_b + g / eps
    base = _lse_contract(h, kernels)
    field = np.empty(base.shape + (n,))
    for i, axis in enumerate(tgt_axes):
        # shifted coordinates are positive so their logarithm exists
        offset = axis[0] - 1.0
        shape = [1] * n
        shape[i] = axis.shape[0]
        field[..., i] = np.exp(_lse_contract(h + np.log(axis - offset).reshape(shape), kernels) - base) + offset
    return field


def _dyadic_tv(field, log_a, log_b, tgt_axes, lower, upper) -> float:
    n = len(tgt_axes)
    mid = (lower + upper) / 2
    cells = np.zeros(log_a.shape, dtype=int)
    for i in range(n):
        cells += (field[..., i] >= mid[i]).astype(int) << i
    mesh = np.stack(np.meshgrid(*tgt_axes, indexing="ij"), axis=-1)
    target_cells = np.zeros(log_b.shape, dtype=int)
    for i in range(n):
        target_cells += (mesh[..., i] >= mid[i]).astype(int) << i
    p = np.bincount(cells.ravel(), weights=np.exp(log_a).ravel(), minlength=2 ** n)
    q = np.bincount(target_cells.ravel(), weights=np.exp(log_b).ravel(), minlength=2 ** n)
    return float(0.5 * np.sum(np.abs(p - q)))


######
#
# This function integrates the map field along axis paths and convexifies the result
#
######


def _legendre(values: np.ndarray, axes: List[np.ndarray], slopes: List[np.ndarray]) -> np.ndarray:
    # separable discrete transform: max over x of <x, p> - U(x), one axis at a time
    out = -values
    for i, (x, p) in enumerate(zip(axes, slopes)):
        moved = np.moveaxis(out, i, -1)
        moved = np.max(moved[..., None, :] + np.outer(p, x), axis=-1)
        out = np.moveaxis(moved, -1, i)
    return out


def _grid_potential(field: np.ndarray, axes: List[np.ndarray]) -> np.ndarray:
    n = len(axes)
    values = np.zeros(field.shape[:-1])
    for i in range(n):
        index = tuple(slice(None) if j <= i else slice(0, 1) for j in range(n))
        values = values + cumulative_trapezoid(field[..., i][index], axes[i], axis=i, initial=0)

    # double legendre transform over the slope box spanned by the field
    slopes = [np.linspace(np.min(field[..., i]), np.max(field[..., i]), axes[i].shape[0]) for i in range(n)]
    conjugate = _legendre(values, axes, slopes)
    convex = _legendre(conjugate, slopes, axes)
    return convex - convex[tuple(a.shape[0] // 2 for a in axes)]


def _grid_solve(scales: np.ndarray, body: ConvexBody, resolution: int, tv_target: float, eps_floor: float,
                iterations: int, eps_start: float = 1.0) -> TransportMap:
    n = scales.shape[0]
    limit = MAX_GRID_RESOLUTION[n]
    if resolution > limit:
        print(f"Grid resolution {resolution} exceeds the limit for n = {n}, using {limit} instead.")
        resolution = limit
    sigma = 1 / np.sqrt(2 * scales)

    # source grid covers +-5 sigma, target grid the part of the body inside it
    src_axes = [np.linspace(-SOURCE_SIGMAS * s, SOURCE_SIGMAS * s, resolution) for s in sigma]
    lower, upper = boundingBox(body)
    lower = np.maximum(lower, -SOURCE_SIGMAS * sigma)
    upper = np.minimum(upper, SOURCE_SIGMAS * sigma)
    if np.any(upper - lower <= 1e-9):
        raise DegenerateError("Body is degenerate: it misses the bulk of the Gaussian.")
    tgt_axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(lower, upper)]

    # normalized log weights
    log_a = _log_gaussian_grid(src_axes, scales)
    log_a = log_a - logsumexp(log_a)
    with np.errstate(divide="ignore"):
        log_b = np.log(_coverage(body, tgt_axes)) + _log_gaussian_grid(tgt_axes, scales)
    if not np.any(np.isfinite(log_b)):
        raise DegenerateError("Body is degenerate: no grid cell lies inside.")
    log_b = log_b - logsumexp(log_b)
    costs = [0.5 * (x[:, None] - y[None, :]) ** 2 for x, y in zip(src_axes, tgt_axes)]

    # anneal the regularization
    h = min(a[1] - a[0] for a in tgt_axes)
    f = np.zeros(log_a.shape)
    g = np.zeros(log_b.shape)
    eps = eps_start
    history = []
    use_pot = resolution ** n <= POT_GRID_LIMIT
    while True:
        if use_pot:
            field, error = _pot_solve(log_a, log_b, src_axes, tgt_axes, eps, iterations)
        else:
            f, g, error = _sinkhorn(log_a, log_b, costs, eps, f, g, iterations, tol=1e-3 * tv_target)
            field = _barycentric(log_b, g, costs, eps, tgt_axes)
        tv = _dyadic_tv(field, log_a, log_b, tgt_axes, lower, upper)
        history.append({"epsilon": eps, "tv": tv, "marginal_error": error})
        if (tv <= tv_target and eps <= max(eps_floor, 2 * h * h)) or eps / 2 < eps_floor:
            break
        eps = eps / 2

    diagnostics = {
        "method": "grid", "tv": tv, "epsilon": eps, "marginal_error": error, "resolution": resolution,
        "history": history, "lower": lower.tolist(), "upper": upper.tolist()
    }
    if tv > tv_target:
        raise NotConvergedError(
            f"Transport did not reach the discrepancy target {tv_target}, achieved {tv:.4g}.",
            best=tv, diagnostics=diagnostics
        )

    # map by interpolation of the barycentric field
    interpolator = RegularGridInterpolator(src_axes, field, method="linear", bounds_error=False, fill_value=None)
    box_lo = np.array([a[0] for a in src_axes])
    box_hi = np.array([a[-1] for a in src_axes])

    def evaluate(points: np.ndarray) -> np.ndarray:
        return interpolator(np.clip(points, box_lo, box_hi))

    potential = Potential(n, axes=src_axes, values=_grid_potential(field, src_axes))
    diagnostics["potential_midpoint_gap"] = potential.midpointGap(count=2000)

    # grid estimate of the body mass for n = 3
    if n <= 2:
        mass = bodyMeasure(body, MeasureSpec.gaussianAniso(scales))
    else:
        volume = np.prod([a[1] - a[0] for a in tgt_axes]) * np.prod(np.sqrt(scales / np.pi))
        with np.errstate(divide="ignore"):
            mass = float(np.sum(_coverage(body, tgt_axes) * np.exp(_log_gaussian_grid(tgt_axes, scales))) * volume)
    cell = float(max(a[1] - a[0] for a in tgt_axes))
    return TransportMap(scales, body, evaluate, potential, "grid", mass, cell, diagnostics, field=field)


######
#
# This function returns the monotone transport of a Gaussian onto its normalized restriction to a body
#
######


def solveMonotoneTransport(
        source: Union[MeasureSpec, list], body: ConvexBody, resolution: int = 128, method: str = "auto",
        shift=None, tv_target: float = 0.02, eps_floor: float = 1e-3, iterations: int = 2000, eps_start: float = 1.0
) -> TransportMap:
    """
    Solves for the gradient of a convex function pushing the Gaussian exp(-sum a_i x_i^2) onto its restriction to the body.

    Args:
        source: Gaussian spec or its scales.
        body (ConvexBody): Target body, a nonempty interior is required.
        resolution (int): Grid points per axis of the grid solver.
        method (str): "product" for coordinatewise inversion, "grid" for entropic transport, "auto" to choose.
        shift: Optional translation v, the target is the restriction translated by v.
        tv_target (float): Discrepancy target of the grid solver.
        eps_floor (float): Smallest regularization of the grid solver.
        iterations (int): Sinkhorn iterations per regularization level.
        eps_start (float): First regularization of the grid solver, halved down to eps_floor.

    Returns:
        TransportMap
    """
    # check arguments
    scales = _source_scales(source)
    n = scales.shape[0]
    if not isinstance(body, ConvexBody) or body.dim != n:
        raise WaistError(f"Argument 'body' must be a ConvexBody of dimension {n}.")
    if method not in METHODS:
        raise WaistError(f"Argument 'method' must be one of {METHODS}.")
    resolution = check_positive_int(resolution, "resolution")
    if resolution < 4:
        raise WaistError("Argument 'resolution' must be at least 4.")
    tv_target = check_nonnegative(tv_target, "tv_target")
    if not body.hasInterior():
        raise DegenerateError("Body is degenerate: empty interior.")

    # pick solver
    limits = _product_limits(body)
    product_ok = False
    if limits is not None:
        mass = _product_mass(scales, *limits)
        product_ok = mass > 0 and _ball_negligible(scales, body.radius, mass)
    if method == "product" and not product_ok:
        raise WaistError("Argument 'body' must be an axis aligned box with negligible ball truncation for method 'product'.")
    if method == "product" or (method == "auto" and product_ok):
        if mass < MASS_FLOOR:
            raise DegenerateError(f"Body is degenerate: Gaussian mass {mass:.3g} is below {MASS_FLOOR}.")
        result = _product_solve(scales, body, limits[0], limits[1], mass)
    else:
        if n > 3:
            raise WaistError("Argument 'body' must be an axis aligned box when n > 3, grid solves support n <= 3.")
        result = _grid_solve(scales, body, resolution, tv_target, eps_floor, iterations, eps_start)
        if result.mass < MASS_FLOOR:
            raise DegenerateError(f"Body is degenerate: Gaussian mass {result.mass:.3g} is below {MASS_FLOOR}.")

    # translate if requested
    if shift is not None:
        result = result.translated(shift)
    return result


######
#
# These functions read off and audit a solved map
#
######


def transportCenter(transport: TransportMap) -> np.ndarray:
    return transport.evaluate(np.zeros(transport.dim))[0]


def _audit_pairs(transport: TransportMap, pair_count: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    rng = generator(seed, 0)
    sigma = 1 / np.sqrt(2 * transport.scales)
    far = pair_count // 2
    near = pair_count - far

    # grid maps are audited inside the grid box
    limit = (SOURCE_SIGMAS - 0.5) * sigma if transport.method == "grid" else np.full(transport.dim, np.inf)
    x = np.clip(rng.standard_normal((pair_count, transport.dim)) * sigma, -limit, limit)
    y = np.clip(rng.standard_normal((far, transport.dim)) * sigma, -limit, limit)
    step = 3 * transport.cell if transport.method == "grid" else 1e-3
    y = np.vstack([y, np.clip(x[far:] + step * rng.standard_normal((near, transport.dim)), -limit, limit)])
    return x, y


def lipschitzAudit(transport: TransportMap, pair_count: int = 10 ** 5, seed: int = 0) -> float:
    """
    Returns the largest ratio |T(x) - T(y)| / |x - y| over source distributed pairs.
    """
    pair_count = check_positive_int(pair_count, "pair_count")
    x, y = _audit_pairs(transport, pair_count, seed)
    distance = np.linalg.norm(x - y, axis=1)
    keep = distance > 1e-12
    if not np.any(keep):
        return 0.0
    ratio = np.linalg.norm(transport.evaluate(x[keep]) - transport.evaluate(y[keep]), axis=1) / distance[keep]
    return float(np.max(ratio))


def monotonicityAudit(transport: TransportMap, pair_count: int = 10 ** 5, seed: int = 0) -> float:
    # smallest value of <T(x) - T(y), x - y>
    pair_count = check_positive_int(pair_count, "pair_count")
    x, y = _audit_pairs(transport, pair_count, seed)
    return float(np.min(np.sum((transport.evaluate(x) - transport.evaluate(y)) * (x - y), axis=1)))


def caffarelliEligible(source, body: ConvexBody, target_scales=None) -> bool:
    """
    Returns whether D^2 P - D^2 Q is positive semidefinite for the Gaussian source Q and the
    target density exp(-P) restricted to the body, which makes the monotone map 1-Lipschitz.
    """
    scales = _source_scales(source)
    target = scales if target_scales is None else _source_scales(target_scales)
    if target.shape[0] != scales.shape[0] or body.dim != scales.shape[0]:
        raise WaistError("Arguments 'source', 'body' and 'target_scales' must have the same dimension.")
    return bool(np.all(target - scales >= -1e-12))


######
#
# This function returns Monge-Ampere residuals ln det D^2 U - P(grad U) + Q on test points
#
######


def maResidual(transport: TransportMap, points=None, step: Optional[float] = None) -> dict:
    n = transport.dim
    sigma = 1 / np.sqrt(2 * transport.scales)

    # default test points cover +-2 sigma
    if points is None:
        side = [np.linspace(-2 * s, 2 * s, 21) for s in sigma]
        points = np.stack(np.meshgrid(*side, indexing="ij"), axis=-1).reshape(-1, n)
    points = as_points(points, n)
    if step is None:
        step = transport.cell if transport.method == "grid" else 1e-4

    # central difference jacobian, symmetrized
    image = transport.evaluate(points)
    jacobian = np.empty((points.shape[0], n, n))
    for j in range(n):
        offset = np.zeros(n)
        offset[j] = step
        jacobian[:, :, j] = (transport.evaluate(points + offset) - transport.evaluate(points - offset)) / (2 * step)
    hessian = (jacobian + np.transpose(jacobian, (0, 2, 1))) / 2
    sign, logdet = np.linalg.slogdet(hessian)

    # exclude points mapped within one cell of the boundary
    margin = transport.cell if transport.method == "grid" else 1e-6
    excluded = (transport.boundaryDistance(image) < margin) | (sign <= 0)
    centered = image - transport.shift
    residual = logdet - ((centered ** 2) @ transport.scales + np.log(transport.mass)) + (points ** 2) @ transport.scales
    kept = np.abs(residual[~excluded])
    return {
        "max": float(np.max(kept)) if kept.size else float("nan"),
        "mean": float(np.mean(kept)) if kept.size else float("nan"),
        "count": int(kept.size),
        "excluded": int(np.count_nonzero(excluded)),
        "residuals": np.where(excluded, np.nan, residual),
    }


######
#
# This function compares the second order coefficient of t -> ln det(D0 + D1 t + D2 t^2) with its closed form
#
######


def logdetExpansionCheck(delta0, delta1, delta2, h: float = 1e-2) -> Tuple[float, float]:
    # check arguments
    d0 = np.atleast_2d(np.asarray(delta0, dtype=float))
    d1 = np.atleast_2d(np.asarray(delta1, dtype=float))
    d2 = np.atleast_2d(np.asarray(delta2, dtype=float))
    if not (d0.shape == d1.shape == d2.shape) or d0.shape[0] != d0.shape[1]:
        raise WaistError("Arguments 'delta0', 'delta1' and 'delta2' must be square matrices of the same size.")
    if not np.allclose(d0, d0.T):
        raise WaistError("Argument 'delta0' must be symmetric.")
    try:
        np.linalg.cholesky(d0)
    except np.linalg.LinAlgError:
        raise WaistError("Argument 'delta0' must be positive definite.")

    def phi(t: float) -> float:
        sign, value = np.linalg.slogdet(d0 + d1 * t + d2 * t * t)
        return value

    def coefficient(step: float) -> float:
        return (phi(step) - 2 * phi(0.0) + phi(-step)) / (2 * step * step)

    # richardson extrapolation of the central second difference
    fd = (4 * coefficient(h / 2) - coefficient(h)) / 3

    # closed form tr B - tr(A^2) / 2
    w, v = np.linalg.eigh(d0)
    root = v @ np.diag(w ** -0.5) @ v.T
    A = root @ d1 @ root
    B = root @ d2 @ root
    formula = float(np.trace(B) - 0.5 * np.trace(A @ A))
    return float(fd), formula


######
#
# This function checks the 1-D gradient estimate |V' - U'| < eps from |V - U| < eps^2 / 2 and 0 <= U'', V'' <= 1
#
######


def gradientGapCheck(U, V, eps: float, grid) -> dict:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    eps = check_nonnegative(eps, "eps")
    u = U(grid) if callable(U) else np.asarray(U, dtype=float)
    v = V(grid) if callable(V) else np.asarray(V, dtype=float)
    if u.shape != grid.shape or v.shape != grid.shape:
        raise WaistError("Arguments 'U' and 'V' must match the grid.")

    # hypotheses on the grid
    h = np.diff(grid)
    tol = 1e-6
    second = [np.diff(np.diff(w) / h) / ((h[1:] + h[:-1]) / 2) for w in (u, v)]
    convex = all(np.all(s >= -tol) and np.all(s <= 1 + tol) for s in second)
    close = bool(np.max(np.abs(v - u)) < eps ** 2 / 2)

    # the estimate holds at points with room eps on both sides
    interior = (grid >= grid[0] + eps) & (grid <= grid[-1] - eps)
    gap = np.abs(np.gradient(v, grid) - np.gradient(u, grid))
    max_gap = float(np.max(gap[interior])) if np.any(interior) else 0.0
    return {"hypotheses": bool(convex and close), "max_gap": max_gap, "bound": eps, "holds": max_gap < eps + 1e-6}


######
#
# These functions measure how far the center moves under perturbations of the offsets
#
######


def centerStability(body: ConvexBody, eps: float, source, deltas=None, resolution: int = 128,
                    method: str = "auto") -> float:
    eps = check_nonnegative(eps, "eps")
    deltas = eps if deltas is None else np.asarray(deltas, dtype=float)
    if np.any(np.abs(deltas) > eps + 1e-15):
        raise WaistError("Argument 'deltas' must not exceed 'eps' in absolute value.")
    perturbed = body.perturb(deltas)
    if not perturbed.hasInterior():
        raise DegenerateError("Perturbed body is degenerate: empty interior.")
    before = transportCenter(solveMonotoneTransport(source, body, resolution=resolution, method=method))
    after = transportCenter(solveMonotoneTransport(source, perturbed, resolution=resolution, method=method))
    return float(np.linalg.norm(after - before))


def centerStabilitySchedule(body: ConvexBody, schedule: list, source, resolution: int = 128,
                            method: str = "auto") -> pd.DataFrame:
    rows = [
        {"eps": eps, "displacement": centerStability(body, eps, source, resolution=resolution, method=method)}
        for eps in schedule
    ]
    result = pd.DataFrame(rows, columns=["eps", "displacement"])
    result["decreasing"] = result["displacement"].diff().fillna(-1.0) <= 1e-12
    return result


######
#
# These functions write and read potentials as binary grids: dims, box, row-major values
#
######


def exportPotential(transport: TransportMap, path: str, resolution: int = 129) -> None:
    axes, values = transport.potential.gridValues(resolution)
    dims = np.array([len(axes)] + [a.shape[0] for a in axes], dtype="<i4")
    box = np.array([[a[0], a[-1]] for a in axes], dtype="<f8")
    with open(path, "wb") as handle:
        dims.tofile(handle)
        box.tofile(handle)
        np.ascontiguousarray(values, dtype="<f8").tofile(handle)


def readPotential(path: str) -> Tuple[List[np.ndarray], np.ndarray]:
    with open(path, "rb") as handle:
        n = int(np.fromfile(handle, dtype="<i4", count=1)[0])
        dims = np.fromfile(handle, dtype="<i4", count=n)
        box = np.fromfile(handle, dtype="<f8", count=2 * n).reshape(n, 2)
        values = np.fromfile(handle, dtype="<f8").reshape(tuple(dims))
    axes = [np.linspace(lo, hi, d) for (lo, hi), d in zip(box, dims)]
    return axes, values
