# load packages
import numpy as np
import pandas as pd
from math import factorial
from typing import Callable, Dict, List, Optional, Sequence, Tuple
from waistPy.helpers import (
    WaistError, generator, runChunks, check_positive_int, normalize_rows, constrainedProjection
)
from waistPy.tube_volumes import sphericalTubeFraction, cpTubeFraction

AMBIENTS = ["sphere", "cp"]
METHODS = ["auto", "analytic", "chart", "algebraic"]
FAILURE_LIMIT = 1e-3
SIGMAS = 3.0
VARIETY_TOL = 1e-9
VARIETY_LINES = 128
CHART_CLOUD = 256
CHART_STEP = 1e-6
CURVATURE_STEP = 1e-4
CHART_TOL = 1e-7
SMOOTH_TOL = 1e-6
BLOCK = 4096


######
#
# This class holds a homogeneous polynomial over C^{n+1} as exponent rows and coefficients
#
######


class Polynomial:
    def __init__(self, terms: Dict[Tuple[int, ...], complex]):
        # check arguments
        if not terms:
            raise WaistError("Argument 'terms' must hold at least one monomial.")
        exponents = np.array(list(terms.keys()), dtype=int)
        if exponents.ndim != 2 or np.any(exponents < 0):
            raise WaistError("Argument 'terms' must map tuples of nonnegative exponents to coefficients.")
        degrees = exponents.sum(axis=1)
        if np.any(degrees != degrees[0]):
            raise WaistError("Argument 'terms' must describe a homogeneous polynomial.")

        self.exponents = exponents
        self.coefficients = np.array(list(terms.values()), dtype=complex)
        self.variables = exponents.shape[1]
        self.degree = int(degrees[0])

        # partial derivatives as (exponents, coefficients) per variable
        self._partials = []
        for j in range(self.variables):
            keep = exponents[:, j] > 0
            shifted = exponents[keep].copy()
            shifted[:, j] -= 1
            self._partials.append((shifted, self.coefficients[keep] * exponents[keep, j]))

    @staticmethod
    def _monomials(z: np.ndarray, exponents: np.ndarray) -> np.ndarray:
        values = np.ones((z.shape[0], exponents.shape[0]), dtype=complex)
        for j in range(exponents.shape[1]):
            for power in range(1, int(exponents[:, j].max(initial=0)) + 1):
                values *= np.where(exponents[:, j] >= power, z[:, j, None], 1.0)
        return values

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        return self._monomials(z, self.exponents) @ self.coefficients

    def gradient(self, z: np.ndarray) -> np.ndarray:
        columns = [
            self._monomials(z, shifted) @ coefficients if coefficients.size else np.zeros(z.shape[0], dtype=complex)
            for shifted, coefficients in self._partials
        ]
        return np.stack(columns, axis=1)

    def to_dict(self) -> dict:
        return {
            "terms": [
                [row.tolist(), float(c.real), float(c.imag)] for row, c in zip(self.exponents, self.coefficients)
            ]
        }


def polynomialFromDict(data: dict) -> Polynomial:
    try:
        return Polynomial({tuple(int(e) for e in row): complex(re, im) for row, re, im in data["terms"]})
    except (KeyError, TypeError, ValueError):
        raise WaistError("Argument 'data' must hold 'terms' as [exponents, re, im] triples.")


######
#
# These functions switch between C^{n+1} and its real form [Re z, Im z]
#
######


def _to_real(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag], axis=1)


def _to_complex(v: np.ndarray) -> np.ndarray:
    half = v.shape[1] // 2
    return v[:, :half] + 1j * v[:, half:]


######
#
# This class describes a submanifold of the round sphere S^n or of CP^n
#
######


class EmbeddedManifold:
    """
    Submanifold X of S^n (real dimension dim) or CP^n (complex dimension dim).

    Args:
        name (str): Label used in reports.
        ambient (str): 'sphere' or 'cp'.
        n (int): Dimension of the ambient S^n or CP^n.
        dim (int): Dimension of X, real for spheres and complex for CP^n.
        chart (callable): Maps (m, p) parameters to (m, n + 1) unit vectors.
        domain (list): (lo, hi) per chart parameter.
        periodic (list): Periodic flag per chart parameter.
        polynomials (list): Homogeneous polynomials cutting X out of CP^n, or out of S^{2n+1} for Hopf lifts.
        distance (callable): Closed form geodesic distance of (m, .) ambient points to X.
        signed_distance (callable): Signed normal displacement, only for hypersurfaces of S^n.
        sampler (callable): Draws points of X as sampler(rng, count).
        critical (bool): X is a known volume-critical submanifold.
        lift_of (EmbeddedManifold): Base of a Hopf lift.
    """

    def __init__(
            self,
            name: str,
            ambient: str,
            n: int,
            dim: int,
            chart: Optional[Callable[[np.ndarray], np.ndarray]] = None,
            domain: Optional[Sequence[Tuple[float, float]]] = None,
            periodic: Optional[Sequence[bool]] = None,
            polynomials: Optional[List[Polynomial]] = None,
            distance: Optional[Callable[[np.ndarray], np.ndarray]] = None,
            signed_distance: Optional[Callable[[np.ndarray], np.ndarray]] = None,
            sampler: Optional[Callable] = None,
            critical: bool = False,
            lift_of: Optional["EmbeddedManifold"] = None
    ):
        # check arguments
        if ambient not in AMBIENTS:
            raise WaistError(f"Argument 'ambient' must be one of {AMBIENTS}.")
        n = check_positive_int(n, "n")
        if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 0 or dim > n:
            raise WaistError("Argument 'dim' must be an integer in [0, n].")
        if chart is None and polynomials is None and distance is None:
            raise WaistError("Argument 'chart', 'polynomials' or 'distance' must be given.")
        if ambient == "cp" and polynomials is None:
            raise WaistError("Argument 'polynomials' must be given for submanifolds of CP^n.")
        variables = (n + 1) if ambient == "cp" else (n + 1) // 2
        if polynomials is not None and any(p.variables != variables for p in polynomials):
            raise WaistError(f"Argument 'polynomials' must use {variables} variables.")

        self.name = name
        self.ambient = ambient
        self.n = n
        self.dim = int(dim)
        self.chart = chart
        self.domain = np.array(domain, dtype=float).reshape(-1, 2) if domain is not None else None
        self.periodic = np.array(periodic if periodic is not None else [False] * len(self.domain), dtype=bool) \
            if self.domain is not None else None
        self.polynomials = list(polynomials) if polynomials is not None else None
        self.distance = distance
        self.signed_distance = signed_distance
        self.sampler = sampler
        self.critical = critical
        self.lift_of = lift_of

        # chart images must lie on the unit sphere
        if chart is not None:
            if self.domain is None:
                raise WaistError("Argument 'domain' must be given with a chart.")
            images = chart(self._chart_params(generator(0, 0), 16))
            if images.shape[1] != n + 1 or np.max(np.abs(np.linalg.norm(images, axis=1) - 1)) > 1e-10:
                raise WaistError(f"Argument 'chart' must map into the unit sphere of R^{n + 1}.")

    @property
    def degree(self) -> Optional[int]:
        if self.ambient != "cp":
            return None
        return int(np.prod([p.degree for p in self.polynomials])) if self.polynomials else 1

    @property
    def isAlgebraic(self) -> bool:
        return self.polynomials is not None

    @property
    def distanceMethod(self) -> str:
        if self.distance is not None:
            return "analytic"
        if self.chart is not None:
            return "chart"
        return "algebraic"

    def _chart_params(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo, hi = self.domain[:, 0], self.domain[:, 1]
        return lo + (hi - lo) * rng.random((count, self.domain.shape[0]))

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        """
        Returns count points of X, not necessarily uniform in its volume.
        """
        rng = generator(seed, 4)
        if self.sampler is not None:
            return self.sampler(rng, count)
        if self.chart is not None:
            return self.chart(self._chart_params(rng, count))
        points = _variety_cloud(self.polynomials, self._variables, max(1, count // max(1, self.degree or 1)), rng)
        points = points[:count]
        return points if self.ambient == "cp" else _to_real(points)

    @property
    def _variables(self) -> int:
        return self.n + 1 if self.ambient == "cp" else (self.n + 1) // 2

    def sampleAmbient(self, count: int, seed: int = 0, stream: int = 0) -> np.ndarray:
        # uniform on S^n, or the Fubini-Study measure through normalized complex gaussians
        rng = generator(seed, stream)
        if self.ambient == "sphere":
            return normalize_rows(rng.standard_normal((count, self.n + 1)))
        return _to_complex(normalize_rows(rng.standard_normal((count, 2 * (self.n + 1)))))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ambient": self.ambient,
            "n": self.n,
            "dim": self.dim,
            "degree": self.degree,
            "method": self.distanceMethod,
            "critical": self.critical,
            "polynomials": [p.to_dict() for p in self.polynomials] if self.polynomials is not None else None,
        }

    def __repr__(self):
        return f"EmbeddedManifold(name='{self.name}', ambient='{self.ambient}', n={self.n}, dim={self.dim})"


######
#
# These functions seed variety solves with points of X found on random lines
#
######


def _line_sections(polynomial: Polynomial, variables: int, lines: int, rng: np.random.Generator):
    """
    Restricts F to lines a + s b through gaussian a, b and solves the univariate restriction.

    Returns the unit intersection points and the number of verified distinct intersections per line.
    """
    d = polynomial.degree
    a = rng.standard_normal((lines, variables)) + 1j * rng.standard_normal((lines, variables))
    b = rng.standard_normal((lines, variables)) + 1j * rng.standard_normal((lines, variables))

    # coefficients of p(s) = F(a + s b) from its values at roots of unity
    nodes = np.exp(2j * np.pi * np.arange(d + 1) / (d + 1))
    values = polynomial.evaluate((a[:, None, :] + nodes[None, :, None] * b[:, None, :]).reshape(-1, variables))
    coefficients = np.fft.fft(values.reshape(lines, d + 1), axis=1) / (d + 1)

    points = []
    counts = np.zeros(lines, dtype=int)
    for i in range(lines):
        roots = np.roots(coefficients[i, ::-1])
        if roots.size == 0:
            continue
        found = normalize_rows(a[i] + roots[:, None] * b[i])
        residual = np.abs(polynomial.evaluate(found))
        scale = np.maximum(np.linalg.norm(polynomial.gradient(found), axis=1), 1e-300)
        verified = residual / scale <= 1e-8
        overlap = np.abs(found @ found.conj().T)
        distinct = np.array([not np.any(verified[:j] & (overlap[j, :j] > 1 - 1e-10)) for j in range(len(found))])
        counts[i] = int(np.count_nonzero(verified & distinct))
        points.append(found[verified])
    points = np.concatenate(points) if points else np.zeros((0, variables), dtype=complex)
    return points, counts


def _variety_cloud(polynomials: List[Polynomial], variables: int, lines: int, rng: np.random.Generator) -> np.ndarray:
    if not polynomials:
        return _to_complex(normalize_rows(rng.standard_normal((lines, 2 * variables))))
    if len(polynomials) == 1:
        return _line_sections(polynomials[0], variables, lines, rng)[0]

    # intersections of several hypersurfaces: project random points
    start = normalize_rows(rng.standard_normal((8 * lines, 2 * variables)))
    residual = _variety_residual(polynomials)
    projected = constrainedProjection(start, start, residual)
    ok = np.max(np.abs(residual(projected)[0]), axis=1) <= VARIETY_TOL
    if not np.any(ok):
        raise WaistError("Argument 'polynomials' must have common zeros on the sphere.")
    return _to_complex(normalize_rows(projected[ok]))


def _variety_residual(polynomials: List[Polynomial]) -> Callable:
    def residual(v: np.ndarray):
        w = _to_complex(v)
        rows, jacobian = [], []
        for polynomial in polynomials:
            value = polynomial.evaluate(w)
            grad = polynomial.gradient(w)
            # holomorphic: dF/dx = F', dF/dy = i F'
            rows += [value.real, value.imag]
            jacobian += [
                np.concatenate([grad.real, -grad.imag], axis=1),
                np.concatenate([grad.imag, grad.real], axis=1),
            ]
        rows.append(np.sum(v ** 2, axis=1) - 1)
        jacobian.append(2 * v)
        return np.stack(rows, axis=1), np.stack(jacobian, axis=1)
    return residual


def _nearest_starts(z: np.ndarray, cloud: np.ndarray, starts: int) -> np.ndarray:
    # largest |<z, w>| in blocks of rows
    starts = min(starts, cloud.shape[0])
    index = np.empty((z.shape[0], starts), dtype=int)
    for begin in range(0, z.shape[0], BLOCK):
        overlap = np.abs(z[begin:begin + BLOCK] @ cloud.conj().T)
        index[begin:begin + BLOCK] = np.argpartition(-overlap, starts - 1, axis=1)[:, :starts]
    return index


######
#
# These functions bound geodesic distances to X from above
#
######


def _variety_distance(
        manifold: EmbeddedManifold, z: np.ndarray, starts: int, iterations: int, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    m, variables = z.shape
    if not manifold.polynomials:
        return np.zeros(m), np.ones(m, dtype=bool)

    # phase aligned starts from the cloud
    cloud = _variety_cloud(manifold.polynomials, variables, VARIETY_LINES, generator(seed, 5))
    w0 = cloud[_nearest_starts(z, cloud, starts)]
    overlap = np.einsum("mn,msn->ms", z, w0.conj())
    w0 = w0 * np.exp(1j * np.angle(overlap))[..., None]
    count = w0.shape[1]

    # nearest points of the circle invariant lift
    residual = _variety_residual(manifold.polynomials)
    target = _to_real(np.repeat(z, count, axis=0))
    v = constrainedProjection(target, _to_real(w0.reshape(-1, variables)), residual, iterations)
    ok = np.max(np.abs(residual(v)[0]), axis=1) <= VARIETY_TOL

    # fubini-study distance, or the sphere distance for lifts
    inner = np.sum(_to_complex(target) * _to_complex(normalize_rows(v)).conj(), axis=1)
    value = inner.real if manifold.ambient == "sphere" else np.abs(inner)
    distance = np.where(ok, np.arccos(np.clip(value, -1.0, 1.0)), np.inf).reshape(m, count).min(axis=1)
    return distance, np.isfinite(distance)


def _chart_jacobian(chart: Callable, params: np.ndarray) -> np.ndarray:
    columns = []
    for j in range(params.shape[1]):
        step = np.zeros(params.shape[1])
        step[j] = CHART_STEP
        columns.append((chart(params + step) - chart(params - step)) / (2 * CHART_STEP))
    return np.stack(columns, axis=2)


def _chart_curvature(chart: Callable, params: np.ndarray, r: np.ndarray) -> np.ndarray:
    # sum_d r_d * hess chart_d, central differences of the jacobian
    dim = params.shape[1]
    out = np.empty((params.shape[0], dim, dim))
    for j in range(dim):
        step = np.zeros(dim)
        step[j] = CURVATURE_STEP
        dJ = (_chart_jacobian(chart, params + step) - _chart_jacobian(chart, params - step)) / (2 * CURVATURE_STEP)
        out[:, :, j] = np.einsum("mdp,md->mp", dJ, r)
    return (out + np.transpose(out, (0, 2, 1))) / 2


def _chart_stationarity(manifold: EmbeddedManifold, params: np.ndarray, target: np.ndarray) -> np.ndarray:
    # norm of the projected gradient of |chart(p) - x|^2 / 2
    r = manifold.chart(params) - target
    gradient = np.einsum("mdp,md->mp", _chart_jacobian(manifold.chart, params), r)
    lo, hi = manifold.domain[:, 0], manifold.domain[:, 1]
    blocked = ~manifold.periodic & (((params <= lo) & (gradient > 0)) | ((params >= hi) & (gradient < 0)))
    return np.linalg.norm(np.where(blocked, 0.0, gradient), axis=1)


def _chart_distance(
        manifold: EmbeddedManifold, x: np.ndarray, starts: int, iterations: int, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    m = x.shape[0]

    # starts from the nearest cloud parameters
    cloud = manifold._chart_params(generator(seed, 6), CHART_CLOUD)
    index = _nearest_starts(x, manifold.chart(cloud), starts)
    count = index.shape[1]
    params = cloud[index].reshape(m * count, -1)
    target = np.repeat(x, count, axis=0)

    # newton on |chart(p) - x|^2 / 2, gauss-newton where the hessian is not positive, every iterate stays on X
    lo, hi = manifold.domain[:, 0], manifold.domain[:, 1]
    eye = np.eye(params.shape[1])
    for _ in range(iterations):
        r = manifold.chart(params) - target
        J = _chart_jacobian(manifold.chart, params)
        gram = np.einsum("mdp,mdq->mpq", J, J) + 1e-12 * eye
        hessian = gram + _chart_curvature(manifold.chart, params, r)
        newton = np.linalg.eigvalsh(hessian)[:, 0] > 1e-10
        system = np.where(newton[:, None, None], hessian, gram)
        step = -np.linalg.solve(system, np.einsum("mdp,md->mp", J, r)[..., None])[..., 0]
        size = np.linalg.norm(step, axis=1)
        step = step * np.minimum(1.0, 0.5 / np.where(size > 0, size, 1.0))[:, None]
        params = params + step
        params = np.where(manifold.periodic, lo + np.mod(params - lo, hi - lo), np.clip(params, lo, hi))
        if np.max(size) <= 1e-12:
            break

    # best start per point, failed when it is not stationary
    chord = np.linalg.norm(manifold.chart(params) - target, axis=1).reshape(m, count)
    best = np.argmin(chord, axis=1)
    converged = (_chart_stationarity(manifold, params, target) <= CHART_TOL).reshape(m, count)
    distance = 2 * np.arcsin(np.minimum(1.0, chord[np.arange(m), best] / 2))
    return distance, converged[np.arange(m), best]


def _check_ambient_points(manifold: EmbeddedManifold, points) -> np.ndarray:
    points = np.asarray(points)
    if points.ndim == 1:
        points = points[None, :]
    if manifold.ambient == "cp":
        points = points.astype(complex)
        if points.shape[1] != manifold.n + 1 or np.any(np.linalg.norm(points, axis=1) == 0):
            raise WaistError(f"Argument 'points' must be nonzero vectors of C^{manifold.n + 1}.")
        return points / np.linalg.norm(points, axis=1)[:, None]
    points = points.astype(float)
    if points.shape[1] != manifold.n + 1 or np.max(np.abs(np.linalg.norm(points, axis=1) - 1)) > 1e-8:
        raise WaistError(f"Argument 'points' must lie on the unit sphere of R^{manifold.n + 1}.")
    return points


def geodesicDistanceTo(
        manifold: EmbeddedManifold, points, method: str = "auto", starts: int = 16, iterations: int = 100,
        seed: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns (distance, ok). Distances are upper bounds, failed solves are +inf with ok False.

    Args:
        manifold (EmbeddedManifold): Submanifold X.
        points (array): Points of S^n, or representatives in C^{n+1} of points of CP^n.
        method (str): 'auto', 'analytic', 'chart' or 'algebraic'.
        starts (int): Multi-start count.
        iterations (int): Iteration cap of the local solves.
        seed (int): Seed of the start clouds.
    """
    # check arguments
    if method not in METHODS:
        raise WaistError(f"Argument 'method' must be one of {METHODS}.")
    starts = check_positive_int(starts, "starts")
    points = _check_ambient_points(manifold, points)
    if method == "auto":
        method = manifold.distanceMethod
    if method == "analytic" and manifold.distance is None:
        raise WaistError(f"Manifold '{manifold.name}' has no closed form distance.")
    if method == "chart" and manifold.chart is None:
        raise WaistError(f"Manifold '{manifold.name}' has no chart.")
    if method == "algebraic" and manifold.polynomials is None:
        raise WaistError(f"Manifold '{manifold.name}' has no polynomials.")

    # solve
    if method == "analytic":
        return np.asarray(manifold.distance(points), dtype=float), np.ones(points.shape[0], dtype=bool)
    if method == "chart":
        return _chart_distance(manifold, points, starts, iterations, seed)
    z = points if manifold.ambient == "cp" else _to_complex(points)
    return _variety_distance(manifold, z, starts, iterations, seed)


######
#
# This function returns the circle invariant preimage of X under the Hopf map S^{2n+1} -> CP^n
#
######


def hopfLift(manifold: EmbeddedManifold) -> EmbeddedManifold:
    if manifold.ambient != "cp":
        raise WaistError("Argument 'manifold' must be a submanifold of CP^n.")
    n = 2 * manifold.n + 1
    # real points of S^{2n+1} use the layout [Re z, Im z]
    return EmbeddedManifold(
        f"hopf({manifold.name})", "sphere", n, min(2 * manifold.dim + 1, n), polynomials=manifold.polynomials,
        critical=True, lift_of=manifold,
    )


######
#
# These functions return the model bounds of the tube fractions
#
######


def _lower_model(manifold: EmbeddedManifold, t: np.ndarray) -> np.ndarray:
    if manifold.dim >= manifold.n:
        return np.ones_like(t)
    if manifold.ambient == "cp":
        return cpTubeFraction(manifold.n, manifold.dim, t)
    return sphericalTubeFraction(manifold.n, manifold.dim, t)


def _upper_model(manifold: EmbeddedManifold, t: np.ndarray, degree: Optional[int] = None) -> np.ndarray:
    degree = degree if degree is not None else manifold.degree
    if manifold.ambient != "cp" or degree is None:
        return np.full(t.shape[0], np.nan)
    return np.minimum(1.0, degree * _lower_model(manifold, t))


def _check_t(t) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.ndim != 1 or t.shape[0] == 0 or np.any(~(t > 0)) or np.any(t > np.pi / 2 + 1e-12):
        raise WaistError("Argument 't' must lie in (0, pi/2].")
    return t


######
#
# This function estimates the fraction of the ambient covered by the t-neighborhood of X
#
######


def tubeFractionMC(
        manifold: EmbeddedManifold, t, count: int = 10 ** 6, seed: int = 0, method: str = "auto", starts: int = 16,
        iterations: int = 100, threads: int = 1, chunk: int = 2 ** 16, degree: Optional[int] = None
) -> pd.DataFrame:
    """
    Returns one row per t with columns t, estimate, stderr, lower, upper, failures, verdict.

    The verdict is 'below-lower' or 'above-upper' when a model bound is missed by more than 3 stderr plus the
    failure fraction, 'inconclusive' when more than 0.1% of the distance solves failed, else 'ok'.
    """
    # check arguments
    t = _check_t(t)
    count = check_positive_int(count, "count")

    # count hits chunk by chunk, chunk i samples stream i
    def per_chunk(stream: int, size: int):
        points = manifold.sampleAmbient(size, seed, stream)
        distance, ok = geodesicDistanceTo(manifold, points, method, starts, iterations, seed)
        return np.count_nonzero(distance[:, None] <= t[None, :], axis=0), int(np.count_nonzero(~ok))

    chunks = runChunks(per_chunk, count, chunk, threads)
    estimate = sum(c[0] for c in chunks) / count
    failures = sum(c[1] for c in chunks) / count
    stderr = np.sqrt(estimate * (1 - estimate) / count)

    # compare with the models
    lower = _lower_model(manifold, t)
    upper = _upper_model(manifold, t, degree)
    verdict = np.where(estimate + SIGMAS * stderr + failures < lower - 1e-12, "below-lower", "ok")
    verdict = np.where(estimate - SIGMAS * stderr > upper + 1e-12, "above-upper", verdict)
    if failures > FAILURE_LIMIT:
        print(f"Distance solves failed for {100 * failures:.2f}% of the samples, the estimates are inconclusive.")
        verdict = np.full(t.shape[0], "inconclusive")

    # return result
    result = pd.DataFrame({
        "t": t,
        "estimate": estimate,
        "stderr": stderr,
        "lower": lower,
        "upper": upper,
        "failures": failures,
        "verdict": verdict,
    })
    result.attrs = {"manifold": manifold.name, "ambient": manifold.ambient, "seed": seed, "count": count}
    return result


######
#
# These functions probe the algebraic representation
#
######


def smoothnessProbe(manifold: EmbeddedManifold, count: int = 200, seed: int = 0) -> float:
    """
    Returns the smallest singular value of the complex Jacobian of the polynomials over sampled points of X.
    """
    if not manifold.isAlgebraic:
        raise WaistError("Argument 'manifold' must be algebraic.")
    if not manifold.polynomials:
        return np.inf
    points = _variety_cloud(manifold.polynomials, manifold._variables, count, generator(seed, 7))
    jacobian = np.stack([p.gradient(points) for p in manifold.polynomials], axis=1)
    return float(np.min(np.linalg.svd(jacobian, compute_uv=False)[:, -1]))


def circleInvarianceProbe(manifold: EmbeddedManifold, count: int = 100, seed: int = 0, starts: int = 16) -> dict:
    """
    Rotates solutions and ambient points by random phases e^{i theta} and reports the largest changes.
    """
    if not manifold.isAlgebraic:
        raise WaistError("Argument 'manifold' must be algebraic.")
    base = manifold.lift_of if manifold.lift_of is not None else manifold
    rng = generator(seed, 8)

    # rotated solutions stay solutions
    residual = 0.0
    if base.polynomials:
        solutions = _variety_cloud(base.polynomials, base._variables, count, rng)[:count]
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi, (solutions.shape[0], 1)))
        residual = max(float(np.max(np.abs(p.evaluate(phase * solutions)))) for p in base.polynomials)

    # distances do not see the phase
    z = _to_complex(normalize_rows(rng.standard_normal((count, 2 * base._variables))))
    phase = np.exp(1j * rng.uniform(0, 2 * np.pi, (count, 1)))
    first, ok_first = _variety_distance(base, z, starts, 100, seed)
    second, ok_second = _variety_distance(base, phase * z, starts, 100, seed)
    both = ok_first & ok_second
    deviation = float(np.max(np.abs(first[both] - second[both]), initial=0.0))
    return {
        "residual": residual,
        "distance": deviation,
        "checked": int(np.count_nonzero(both)),
        "passes": bool(residual <= 1e-8 and deviation <= 1e-8),
    }


######
#
# This function estimates the degree of a hypersurface by counting intersections with random lines
#
######


def croftonDegree(
        manifold: EmbeddedManifold, lines: int = 2000, seed: int = 0, t: Optional[float] = None,
        count: int = 2 * 10 ** 5, starts: int = 16
) -> dict:
    """
    Returns the mean number of verified intersections with unitarily random lines, the 2k-volume
    mean * vol(CP^k) = mean * pi^k / k!, and optionally the tube ratio mu(X + t) / mu(CP^k + t) at a small t.
    """
    # check arguments
    if manifold.ambient != "cp" or manifold.polynomials is None or len(manifold.polynomials) != 1:
        raise WaistError("Argument 'manifold' must be a hypersurface of CP^n.")
    lines = check_positive_int(lines, "lines")

    # count intersections
    _, counts = _line_sections(manifold.polynomials[0], manifold.n + 1, lines, generator(seed, 9))
    mean = float(np.mean(counts))
    k = manifold.dim
    result = {
        "degree": manifold.degree,
        "mean_intersections": mean,
        "stderr": float(np.std(counts) / np.sqrt(lines)),
        "volume": mean * np.pi ** k / factorial(k),
    }

    # leading order of the tube volume is proportional to the 2k-volume
    if t is not None:
        estimate = tubeFractionMC(manifold, t, count, seed, starts=starts)
        model = float(_lower_model(manifold, np.array([t]))[0])
        result["tube_ratio"] = float(estimate["estimate"].iloc[0] / model)
        result["tube_ratio_stderr"] = float(estimate["stderr"].iloc[0] / model)
    return result


######
#
# This function compares the tube fractions of X in CP^n and of its Hopf lift in S^{2n+1}
#
######


def hopfConsistency(
        manifold: EmbeddedManifold, t: float, count: int = 10 ** 5, seed: int = 0, starts: int = 16,
        threads: int = 1, chunk: int = 2 ** 16
) -> dict:
    # lifted samples come from an independent seed
    base = tubeFractionMC(manifold, t, count, seed, starts=starts, threads=threads, chunk=chunk)
    lifted = tubeFractionMC(hopfLift(manifold), t, count, seed + 1, method="algebraic", starts=starts,
                            threads=threads, chunk=chunk)
    cp, cp_stderr = float(base["estimate"].iloc[0]), float(base["stderr"].iloc[0])
    sphere, sphere_stderr = float(lifted["estimate"].iloc[0]), float(lifted["stderr"].iloc[0])
    combined = float(np.hypot(cp_stderr, sphere_stderr))
    return {
        "t": float(t),
        "cp": cp,
        "cp_stderr": cp_stderr,
        "sphere": sphere,
        "sphere_stderr": sphere_stderr,
        "difference": sphere - cp,
        "combined_stderr": combined,
        "consistent": bool(abs(sphere - cp) <= SIGMAS * combined + 1e-12),
    }


######
#
# This function checks lower and degree upper bounds of an algebraic X over a grid of t
#
######


def degreeBoundCheck(
        manifold: EmbeddedManifold, t_grid, count: int = 10 ** 6, seed: int = 0, degree: Optional[int] = None,
        starts: int = 16, threads: int = 1, chunk: int = 2 ** 16
) -> pd.DataFrame:
    # check arguments
    if manifold.ambient != "cp" or not manifold.isAlgebraic:
        raise WaistError("Argument 'manifold' must be an algebraic submanifold of CP^n.")
    if degree is not None:
        degree = check_positive_int(degree, "degree")

    # bounds only hold for smooth X
    smallest = smoothnessProbe(manifold, seed=seed)
    result = tubeFractionMC(manifold, t_grid, count, seed, starts=starts, threads=threads, chunk=chunk,
                            degree=degree)
    if smallest <= SMOOTH_TOL:
        print(f"Manifold '{manifold.name}' looks singular (smallest singular value {smallest:.2e}).")
        result["verdict"] = "inconclusive"
    result["within"] = result["verdict"] == "ok"
    result.attrs["smoothness"] = smallest
    return result


######
#
# This function classifies ambient samples into geodesic voronoi cells of sites on X
#
######


def _sites(manifold: EmbeddedManifold, count: int, seed: int) -> np.ndarray:
    # evenly spaced along closed curves
    if manifold.chart is not None and manifold.domain.shape[0] == 1 and manifold.periodic[0]:
        lo, hi = manifold.domain[0]
        return manifold.chart((lo + (hi - lo) * np.arange(count) / count)[:, None])
    return manifold.sample(count, seed)


def voronoiDisintegrationProbe(
        manifold: EmbeddedManifold, site_count: int = 8, count: int = 10 ** 5, seed: int = 0, bins: int = 5,
        min_samples: int = 1000
) -> pd.DataFrame:
    """
    Returns one row per cell with its mass, stderr, sample count and the mode bin of the signed normal
    displacement over [-pi/2, pi/2]. Cells are widened by halving the sites while one holds fewer than
    min_samples samples.
    """
    # check arguments
    if manifold.ambient != "sphere" or manifold.signed_distance is None:
        raise WaistError("Argument 'manifold' must be a hypersurface of S^n with a signed distance.")
    site_count = check_positive_int(site_count, "site_count")
    bins = check_positive_int(bins, "bins")
    points = manifold.sampleAmbient(check_positive_int(count, "count"), seed)
    displacement = np.clip(manifold.signed_distance(points), -np.pi / 2, np.pi / 2)
    edges = np.linspace(-np.pi / 2, np.pi / 2, bins + 1)

    # nearest site by geodesic distance
    while True:
        sites = _sites(manifold, site_count, seed)
        cell = np.argmax(points @ sites.T, axis=1)
        sizes = np.bincount(cell, minlength=sites.shape[0])
        if sizes.min() >= min_samples:
            break
        if site_count == 1:
            raise WaistError(f"Argument 'count' must provide at least {min_samples} samples per cell.")
        site_count //= 2
        print(f"Voronoi cells hold fewer than {min_samples} samples, widening to {site_count} sites.")

    # per cell histograms
    rows = []
    for i in range(sites.shape[0]):
        inside = cell == i
        histogram = np.histogram(displacement[inside], bins=edges)[0]
        mass = float(np.mean(inside))
        mode = int(np.argmax(histogram))
        rows.append({
            "cell": i,
            "mass": mass,
            "stderr": float(np.sqrt(mass * (1 - mass) / count)),
            "samples": int(sizes[i]),
            "mode_bin": mode,
            "centered": mode == bins // 2,
        })
    result = pd.DataFrame(rows)
    result.attrs = {"manifold": manifold.name, "sites": sites.tolist(), "bins": bins, "seed": seed}
    return result


######
#
# These functions build the test manifolds
#
######


def greatSubsphere(n: int, k: int) -> EmbeddedManifold:
    """
    Great S^k spanned by the first k + 1 coordinates of S^n.
    """
    if k < 1 or k >= n:
        raise WaistError("Argument 'k' must satisfy 1 <= k < n.")
    chart, domain, periodic = None, None, None
    if k == 1:
        def chart(p):
            out = np.zeros((p.shape[0], n + 1))
            out[:, 0], out[:, 1] = np.cos(p[:, 0]), np.sin(p[:, 0])
            return out
        domain, periodic = [(0.0, 2 * np.pi)], [True]

    def sampler(rng, count):
        out = np.zeros((count, n + 1))
        out[:, :k + 1] = normalize_rows(rng.standard_normal((count, k + 1)))
        return out

    return EmbeddedManifold(
        f"great-s{k}-s{n}", "sphere", n, k, chart=chart, domain=domain, periodic=periodic,
        distance=lambda x: np.arccos(np.minimum(1.0, np.linalg.norm(x[:, :k + 1], axis=1))),
        signed_distance=(lambda x: np.arcsin(np.clip(x[:, n], -1, 1))) if k == n - 1 else None,
        sampler=sampler, critical=True,
    )


def equator() -> EmbeddedManifold:
    manifold = greatSubsphere(2, 1)
    manifold.name = "equator"
    return manifold


def latitudeCircle(latitude: float = np.pi / 6) -> EmbeddedManifold:
    if not 0 <= latitude < np.pi / 2:
        raise WaistError("Argument 'latitude' must lie in [0, pi/2).")

    def chart(p):
        return np.column_stack([
            np.cos(latitude) * np.cos(p[:, 0]), np.cos(latitude) * np.sin(p[:, 0]),
            np.full(p.shape[0], np.sin(latitude)),
        ])

    def signed(x):
        return np.arcsin(np.clip(x[:, 2], -1, 1)) - latitude

    return EmbeddedManifold(
        "latitude", "sphere", 2, 1, chart=chart, domain=[(0.0, 2 * np.pi)], periodic=[True],
        distance=lambda x: np.abs(signed(x)), signed_distance=signed, critical=latitude == 0,
    )


def cliffordTorus() -> EmbeddedManifold:
    """
    {|z1| = |z2| = 1/sqrt(2)} in S^3, with z1 = x1 + i x2 and z2 = x3 + i x4.
    """
    def chart(p):
        return np.column_stack([np.cos(p[:, 0]), np.sin(p[:, 0]), np.cos(p[:, 1]), np.sin(p[:, 1])]) / np.sqrt(2)

    def signed(x):
        return np.arctan2(np.linalg.norm(x[:, 2:], axis=1), np.linalg.norm(x[:, :2], axis=1)) - np.pi / 4

    return EmbeddedManifold(
        "clifford-torus", "sphere", 3, 2, chart=chart, domain=[(0.0, 2 * np.pi)] * 2, periodic=[True, True],
        distance=lambda x: np.abs(signed(x)), signed_distance=signed, critical=True,
    )


def _coordinate(variables: int, index: int) -> Polynomial:
    return Polynomial({tuple(int(j == index) for j in range(variables)): 1.0})


def cpHyperplane(n: int = 2, index: int = 1) -> EmbeddedManifold:
    """
    The hyperplane {z_index = 0} of CP^n, coordinates counted from 0. For n = 1 this is a point.
    """
    n = check_positive_int(n, "n")
    if not 0 <= index <= n:
        raise WaistError("Argument 'index' must lie in [0, n].")
    return EmbeddedManifold(
        "cp-point" if n == 1 else "cp-line" if n == 2 else f"cp-hyperplane-{n}", "cp", n, n - 1,
        polynomials=[_coordinate(n + 1, index)],
        distance=lambda z: np.arcsin(np.minimum(1.0, np.abs(z[:, index]) / np.linalg.norm(z, axis=1))),
    )


def cpWhole(n: int = 1) -> EmbeddedManifold:
    return EmbeddedManifold(f"cp{n}", "cp", n, n, polynomials=[])


def conic() -> EmbeddedManifold:
    """
    Smooth conic z0 z2 = z1^2 in CP^2.
    """
    return EmbeddedManifold("cp-conic", "cp", 2, 1, polynomials=[Polynomial({(1, 0, 1): 1.0, (0, 2, 0): -1.0})])


def fermatCurve(degree: int = 4) -> EmbeddedManifold:
    degree = check_positive_int(degree, "degree")
    terms = {tuple(degree * int(j == i) for j in range(3)): 1.0 for i in range(3)}
    return EmbeddedManifold(f"fermat-{degree}", "cp", 2, 1, polynomials=[Polynomial(terms)])


def builtinManifolds() -> Dict[str, EmbeddedManifold]:
    return {
        "equator": equator(),
        "great-circle-s3": greatSubsphere(3, 1),
        "latitude": latitudeCircle(),
        "clifford-torus": cliffordTorus(),
        "cp-line": cpHyperplane(2, 1),
        "cp-point": cpHyperplane(1, 1),
        "cp-conic": conic(),
        "fermat-quartic": fermatCurve(4),
        "cp1": cpWhole(1),
    }


def getManifold(name: str) -> EmbeddedManifold:
    manifolds = builtinManifolds()
    if name not in manifolds:
        raise WaistError(f"Argument 'manifold' must be one of {sorted(manifolds)}.")
    return manifolds[name]
