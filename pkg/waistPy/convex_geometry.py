# load packages
import threading
import cvxpy as cp
import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import erf, erfc
from typing import List, Optional, Tuple
from waistPy.helpers import (
    WaistError, DegenerateError, NotConvergedError, check_unit, generator, as_points, ballVolume, normalize_rows
)
from waistPy.measures import MeasureSpec, mapChunks, density

UNIT_TOL = 1e-12
INTERIOR_TOL = 1e-9


######
#
# This class describes a convex body as an intersection of half-spaces <u, x> <= c with the ball B(R)
#
######


class ConvexBody:
    def __init__(self, dim: int, radius: float, normals=None, offsets=None):
        """
        Initializes a ConvexBody object.

        Args:
            dim (int): Ambient dimension n.
            radius (float): Bounding radius R, the body always lies in B(R).
            normals (array): (m, n) array of unit normals u_j.
            offsets (array): (m,) array of offsets c_j.
        """
        if radius is None or not np.isfinite(radius) or radius <= 0:
            raise WaistError("Argument 'radius' must be a positive number.")
        self.dim = int(dim)
        self.radius = float(radius)
        self.normals = np.zeros((0, self.dim)) if normals is None else np.asarray(normals, dtype=float).reshape(-1, self.dim)
        self.offsets = np.zeros(0) if offsets is None else np.asarray(offsets, dtype=float).reshape(-1)
        if self.normals.shape[0] != self.offsets.shape[0]:
            raise WaistError("Arguments 'normals' and 'offsets' must have the same length.")
        if np.any(np.abs(np.linalg.norm(self.normals, axis=1) - 1) > UNIT_TOL):
            raise WaistError("Argument 'normals' must contain unit vectors.")

        # solver state, created on first use
        self._support = None
        self._lock = threading.Lock()
        self._interior = None

    @classmethod
    def ball(cls, dim: int, radius: float = 1.0) -> "ConvexBody":
        return cls(dim, radius)

    @classmethod
    def box(cls, lower, upper, radius: float) -> "ConvexBody":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = lower.shape[0]
        normals = np.concatenate([np.eye(n), -np.eye(n)])
        offsets = np.concatenate([upper, -lower])
        return cls(n, radius, normals, offsets)

    @property
    def halfspaces(self) -> List[Tuple[np.ndarray, float]]:
        return [(u, c) for u, c in zip(self.normals, self.offsets)]

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        points = np.atleast_2d(points)
        inside = np.linalg.norm(points, axis=1) <= self.radius + tol
        if self.normals.shape[0]:
            inside &= np.all(points @ self.normals.T <= self.offsets + tol, axis=1)
        return inside

    def withHalfspace(self, u, c: float) -> "ConvexBody":
        u = check_unit(u, "u", self.dim, tol=1e-10)
        return ConvexBody(
            self.dim, self.radius, np.vstack([self.normals, u / np.linalg.norm(u)]), np.append(self.offsets, c)
        )

    def perturb(self, deltas) -> "ConvexBody":
        deltas = np.broadcast_to(np.asarray(deltas, dtype=float), self.offsets.shape)
        return ConvexBody(self.dim, self.radius, self.normals, self.offsets + deltas)

    def hasInterior(self) -> bool:
        if self._interior is None:
            self._interior = chebyshevRadius(self) > INTERIOR_TOL
        return self._interior

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "radius": self.radius,
            "halfspaces": [{"normal": [float(v) for v in u], "offset": float(c)} for u, c in self.halfspaces],
        }

    def __repr__(self):
        return f"ConvexBody(dim={self.dim}, radius={self.radius}, halfspaces={self.normals.shape[0]})"


def bodyFromDict(d: dict) -> ConvexBody:
    unknown = set(d) - {"dim", "radius", "halfspaces"}
    if unknown:
        raise WaistError(f"Unknown fields in 'body': {sorted(unknown)}.")
    if "dim" not in d or "radius" not in d:
        raise WaistError("Fields 'body.dim' and 'body.radius' are required.")
    halfspaces = d.get("halfspaces", [])
    normals = np.array([h["normal"] for h in halfspaces], dtype=float).reshape(-1, d["dim"])
    offsets = np.array([h["offset"] for h in halfspaces], dtype=float)

    # json normals are normalized on read
    norms = np.linalg.norm(normals, axis=1)
    return ConvexBody(d["dim"], d["radius"], normals / norms[:, None], offsets / norms)


######
#
# These classes describe ellipsoids and affine flats
#
######


class Ellipsoid:
    def __init__(self, center, shape):
        """
        Initializes an Ellipsoid object {shape @ v + center : |v| <= 1}.

        Args:
            center (array): Center d.
            shape (array): Symmetric positive semidefinite matrix B.
        """
        self.center = np.asarray(center, dtype=float)
        self.shape = (np.asarray(shape, dtype=float) + np.asarray(shape, dtype=float).T) / 2
        values, vectors = np.linalg.eigh(self.shape)
        order = np.argsort(values)[::-1]
        self.semiaxes = np.clip(values[order], 0, None)
        self.axes = vectors[:, order]
        self.sandwich_verified = None

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        local = (np.atleast_2d(points) - self.center) @ self.axes
        scaled = local / np.where(self.semiaxes > 0, self.semiaxes, np.inf)
        return np.linalg.norm(scaled, axis=1) <= 1 + tol

    def support(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(u @ self.center + np.linalg.norm(self.shape @ u))


class AffineFlat:
    def __init__(self, base, basis):
        """
        Initializes an AffineFlat object base + span(basis columns).
        """
        self.base = np.asarray(base, dtype=float)
        self.basis = np.asarray(basis, dtype=float).reshape(self.base.shape[0], -1)
        if self.basis.shape[1] and np.max(np.abs(self.basis.T @ self.basis - np.eye(self.basis.shape[1]))) > 1e-10:
            raise WaistError("Argument 'basis' must be orthonormal.")

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def distance(self, points) -> np.ndarray:
        offset = np.atleast_2d(points) - self.base
        along = offset @ self.basis @ self.basis.T
        return np.linalg.norm(offset - along, axis=1)


######
#
# These functions evaluate support functions, widths and gauges
#
######


def supportFunction(body: ConvexBody, u) -> float:
    """
    Returns h(u) = max <u, x> over the body, solved as a second order cone program.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    with body._lock:
        if body._support is None:
            x = cp.Variable(body.dim)
            direction = cp.Parameter(body.dim)
            constraints = [cp.norm(x, 2) <= body.radius]
            if body.normals.shape[0]:
                constraints.append(body.normals @ x <= body.offsets)
            body._support = (cp.Problem(cp.Maximize(direction @ x), constraints), direction)
        problem, direction = body._support
        direction.value = u
        problem.solve()
        if problem.status not in ["optimal", "optimal_inaccurate"]:
            raise DegenerateError("Body is empty.")
        return float(problem.value)


def directionalWidth(body: ConvexBody, u) -> float:
    u = check_unit(u, "u", body.dim, tol=1e-10)
    return max(0.0, supportFunction(body, u) + supportFunction(body, -u))


def boundingBox(body: ConvexBody) -> Tuple[np.ndarray, np.ndarray]:
    eye = np.eye(body.dim)
    upper = np.array([supportFunction(body, e) for e in eye])
    lower = np.array([-supportFunction(body, -e) for e in eye])
    return lower, upper


def chebyshevRadius(body: ConvexBody) -> float:
    # largest ball inside the body
    x = cp.Variable(body.dim)
    r = cp.Variable()
    constraints = [cp.norm(x, 2) + r <= body.radius, r >= 0]
    if body.normals.shape[0]:
        constraints.append(body.normals @ x + r <= body.offsets)
    problem = cp.Problem(cp.Maximize(r), constraints)
    problem.solve()
    if problem.status not in ["optimal", "optimal_inaccurate"]:
        return 0.0
    return float(r.value)


def gauge(body: ConvexBody, x) -> np.ndarray:
    """
    Returns the Minkowski functional of a centrally symmetric body containing the origin in its interior.
    """
    points = as_points(x, body.dim)
    if np.any(body.offsets <= 0):
        raise WaistError("Argument 'body' must contain the origin in its interior.")
    values = np.linalg.norm(points, axis=1) / body.radius
    if body.normals.shape[0]:
        values = np.maximum(values, np.max(points @ body.normals.T / body.offsets, axis=1))
    return values


def randomPolytope(dim: int, facets: int, seed: int, radius: float = 1.0) -> ConvexBody:
    rng = generator(seed, 0)
    normals = normalize_rows(rng.standard_normal((facets, dim)))
    offsets = radius * rng.uniform(0.2, 1.0, facets)
    return ConvexBody(dim, radius, normals, offsets)


######
#
# These functions integrate a spec over a body along chords orthogonal to a direction
#
######


def _erf_diff(x: float, y: float) -> float:
    # erf(y) - erf(x) without cancellation in the tails
    if x > 0 and y > 0:
        return erfc(x) - erfc(y)
    if x < 0 and y < 0:
        return erfc(-y) - erfc(-x)
    return erf(y) - erf(x)


def _chord(body: ConvexBody, spec: MeasureSpec, u: np.ndarray, w: np.ndarray, s: float) -> Tuple[float, float]:
    lo, hi = -np.inf, np.inf
    if body.normals.shape[0]:
        alpha = body.normals @ u
        beta = body.normals @ w
        rhs = body.offsets - alpha * s
        flat = np.abs(beta) <= 1e-14
        if np.any(rhs[flat] < 0):
            return 0.0, 0.0
        if np.any(beta > 1e-14):
            hi = np.min(rhs[beta > 1e-14] / beta[beta > 1e-14])
        if np.any(beta < -1e-14):
            lo = np.max(rhs[beta < -1e-14] / beta[beta < -1e-14])
    radius = body.radius if spec.supportRadius is None else min(body.radius, spec.supportRadius)
    if s * s >= radius * radius:
        return 0.0, 0.0
    half = np.sqrt(radius * radius - s * s)
    return max(lo, -half), min(hi, half)


def _chord_mass(body: ConvexBody, spec: MeasureSpec, u: np.ndarray, w: np.ndarray, s: float) -> float:
    lo, hi = _chord(body, spec, u, w, s)
    if hi <= lo:
        return 0.0
    if spec.kind == "gaussian":
        a = spec.scales
        A = float(a @ (w * w))
        B = float(s * (a @ (u * w)))
        C = float(s * s * (a @ (u * u)))
        scale = np.prod(np.sqrt(a / np.pi))
        root = np.sqrt(A)
        return float(
            scale * np.exp(-(C - B * B / A)) * np.sqrt(np.pi) / (2 * root)
            * _erf_diff(root * (lo + B / A), root * (hi + B / A))
        )
    if spec.kind == "ball":
        return (hi - lo) / ballVolume(2, spec.radius)
    return quad(lambda tau: density(spec, s * u + tau * w)[0], lo, hi, limit=100)[0]


def _breakpoints(body: ConvexBody, u: np.ndarray) -> np.ndarray:
    # projections of vertices where the active constraints change
    candidates = []
    m = body.normals.shape[0]
    for i in range(m):
        a, c = body.normals[i], body.offsets[i]
        if abs(c) < body.radius:
            tangent = np.array([-a[1], a[0]])
            half = np.sqrt(body.radius ** 2 - c ** 2)
            candidates += [c * a + half * tangent, c * a - half * tangent]
        for j in range(i + 1, m):
            matrix = np.array([body.normals[i], body.normals[j]])
            if abs(np.linalg.det(matrix)) > 1e-12:
                candidates.append(np.linalg.solve(matrix, np.array([c, body.offsets[j]])))
    if not candidates:
        return np.zeros(0)
    candidates = np.array(candidates)
    candidates = candidates[body.contains(candidates, tol=1e-9)]
    return np.unique(candidates @ u)


def _cumulative(body: ConvexBody, spec: MeasureSpec, u: np.ndarray, lo: float, tol: float):
    if body.dim == 1:
        def mass(c):
            return quad(lambda s: density(spec, np.array([s * u[0]]))[0], lo, c, epsabs=tol, limit=200)[0] if c > lo else 0.0
        return mass

    w = np.array([-u[1], u[0]])
    breaks = _breakpoints(body, u)

    def mass(c):
        if c <= lo:
            return 0.0
        inner = breaks[(breaks > lo) & (breaks < c)][:50]
        return quad(
            lambda s: _chord_mass(body, spec, u, w, s), lo, c,
            points=inner if inner.shape[0] else None, epsabs=tol, epsrel=1e-10, limit=400
        )[0]
    return mass


def _weighted_projections(body: ConvexBody, spec: MeasureSpec, u: np.ndarray, count: int, seed: int):
    # fixed seed Monte Carlo sample of the restricted spec, projected on u
    chunks = mapChunks(
        spec, lambda points: points[body.contains(points)] @ u, count, seed, continuous_only=True
    )
    values = np.concatenate(chunks)
    weights = np.full(values.shape[0], spec.continuousMass / count)
    for point, mass in spec.atoms:
        if body.contains(point[None, :])[0]:
            values = np.append(values, point @ u)
            weights = np.append(weights, mass)
    return values, weights


def _quadrature_ready(body: ConvexBody, spec: MeasureSpec) -> bool:
    return spec.isAbsolutelyContinuous and body.dim <= 2


def bodyMeasure(body: ConvexBody, spec: MeasureSpec, count: int = 2 ** 18, seed: int = 0, tol: float = 1e-12) -> float:
    """
    Returns the normalized spec mass of the body.
    """
    if spec.dim != body.dim:
        raise WaistError("Arguments 'body' and 'spec' must have the same dimension.")
    u = np.eye(body.dim)[0]
    lo = -supportFunction(body, -u)
    hi = supportFunction(body, u)
    if _quadrature_ready(body, spec):
        return _cumulative(body, spec, u, lo, tol)(hi)
    _, weights = _weighted_projections(body, spec, u, count, seed)
    return float(np.sum(weights))


######
#
# This function returns the offset c such that the half-space <u, x> <= c holds a given fraction of the body
#
######


def equalMeasureCut(
        body: ConvexBody, spec: MeasureSpec, direction, fraction: float = 0.5, tol: float = 1e-6,
        count: int = 2 ** 18, seed: int = 0
) -> float:
    # check arguments
    u = check_unit(direction, "direction", body.dim, tol=1e-10)
    if not 0 < fraction < 1:
        raise WaistError("Argument 'fraction' must lie in (0, 1).")
    if spec.dim != body.dim:
        raise WaistError("Arguments 'body' and 'spec' must have the same dimension.")

    # range of the projection
    lo = -supportFunction(body, -u)
    hi = supportFunction(body, u)

    # quadrature for absolutely continuous specs in the plane
    if _quadrature_ready(body, spec):
        total = _cumulative(body, spec, u, lo, 1e-14)(hi)
        if total <= 1e-12:
            raise DegenerateError("Body is degenerate: zero measure.")
        mass = _cumulative(body, spec, u, lo, 1e-3 * tol * total)
        target = fraction * total
        try:
            c, info = brentq(
                lambda v: mass(v) - target, lo, hi, xtol=1e-13, maxiter=200, full_output=True, disp=False
            )
        except ValueError:
            raise DegenerateError("Body is degenerate: the cut function has no sign change.")
        if not info.converged or abs(mass(c) - target) > tol * total:
            raise NotConvergedError("Equal measure cut did not converge.", best=(lo, hi))
        return float(c)

    # fixed seed monte carlo quantile otherwise
    values, weights = _weighted_projections(body, spec, u, count, seed)
    total = np.sum(weights)
    if total <= 1e-12 or values.shape[0] < 2:
        raise DegenerateError("Body is degenerate: zero measure.")
    order = np.argsort(values, kind="stable")
    cumulative = np.cumsum(weights[order])
    index = int(np.searchsorted(cumulative, fraction * total))
    return float(values[order][min(index, values.shape[0] - 1)])


######
#
# This function returns the maximum volume inscribed ellipsoid of a body
#
######


def johnEllipsoid(body: ConvexBody) -> Ellipsoid:
    n = body.dim
    B = cp.Variable((n, n), PSD=True)
    d = cp.Variable(n)
    lam = cp.Variable(nonneg=True)

    # ellipsoid inside every half-space
    constraints = []
    if body.normals.shape[0]:
        constraints.append(cp.norm(body.normals @ B, 2, axis=1) + body.normals @ d <= body.offsets)

    # ellipsoid inside B(R), s-lemma in schur complement form
    R2 = body.radius ** 2
    lmi = cp.bmat([
        [lam * np.eye(n), np.zeros((n, 1)), B],
        [np.zeros((1, n)), cp.reshape(R2 - lam, (1, 1), order="F"), cp.reshape(d, (1, n), order="F")],
        [B, cp.reshape(d, (n, 1), order="F"), np.eye(n)],
    ])
    constraints.append(lmi >> 0)

    # solve
    problem = cp.Problem(cp.Maximize(cp.log_det(B)), constraints)
    problem.solve()
    if problem.status not in ["optimal", "optimal_inaccurate"] or B.value is None:
        raise DegenerateError("Body is degenerate: no inscribed ellipsoid.")
    ellipsoid = Ellipsoid(d.value, B.value)
    if ellipsoid.semiaxes[-1] <= INTERIOR_TOL:
        raise DegenerateError("Body is degenerate: empty interior.")

    # verify body within the n-dilate on facet normals and axes
    directions = np.vstack([body.normals, ellipsoid.axes.T, -ellipsoid.axes.T])
    dilate = Ellipsoid(ellipsoid.center, n * ellipsoid.shape)
    ellipsoid.sandwich_verified = all(
        supportFunction(body, v) <= dilate.support(v) + 1e-6 for v in directions
    )
    return ellipsoid


######
#
# These functions return the pancake deficiency of a body and certified distances to a flat
#
######


def flatDistanceBound(body: ConvexBody, flat: AffineFlat) -> float:
    """
    Upper bound of max dist(x, flat) over the body from support functions along the normal directions of the flat.
    """
    normal = np.linalg.svd(flat.basis, full_matrices=True)[0][:, flat.dim:] if flat.dim else np.eye(body.dim)
    total = 0.0
    for v in normal.T:
        offset = v @ flat.base
        total += max(supportFunction(body, v) - offset, supportFunction(body, -v) + offset, 0.0) ** 2
    return float(np.sqrt(total))


def pancakeDeficiency(body: ConvexBody, k: int) -> Tuple[float, AffineFlat]:
    """
    Returns the smallest certified delta such that the body lies in the delta-neighborhood of a k-flat.

    The flat is spanned by the top k John axes. Delta is the smaller of the John bound n * a_{k+1}
    and the support function bound of flatDistanceBound.
    """
    if k < 0 or k >= body.dim:
        raise WaistError("Argument 'k' must satisfy 0 <= k < n.")

    # john ellipsoid, the body lies in its n-dilate
    ellipsoid = johnEllipsoid(body)
    flat = AffineFlat(ellipsoid.center, ellipsoid.axes[:, :k])
    john = body.dim * float(ellipsoid.semiaxes[k])

    # measured gaps along the normals of the flat
    measured = flatDistanceBound(body, flat)
    return min(john, measured), flat


######
#
# This function returns the voronoi cell of a site inside an ambient body
#
######


def voronoiCell(site, sites, ambient: ConvexBody) -> ConvexBody:
    site = np.asarray(site, dtype=float)
    sites = as_points(sites, ambient.dim, "sites")

    # check arguments
    if np.unique(np.round(sites, 12), axis=0).shape[0] != sites.shape[0]:
        raise WaistError("Argument 'sites' must not contain duplicates.")
    if not np.any(np.all(np.isclose(sites, site, atol=1e-12), axis=1)):
        raise WaistError("Argument 'site' must be one of 'sites'.")

    # bisector half-spaces |x - s| <= |x - s'|
    cell = ambient
    for other in sites:
        gap = other - site
        distance = np.linalg.norm(gap)
        if distance <= 1e-12:
            continue
        cell = cell.withHalfspace(gap / distance, (other @ other - site @ site) / (2 * distance))
    return cell
