# load packages
import hashlib
import json
import numpy as np
from concurrent.futures import ThreadPoolExecutor
from scipy.linalg import null_space
from scipy.special import gamma
from typing import Callable, List, Optional


######
#
# These classes define the errors raised by the package
#
######


class WaistError(Exception):
    """
    Base error for invalid input. The message always names the offending argument.
    """


class DegenerateError(WaistError):
    """
    Raised for bodies or measures with empty interior or zero mass.
    """


class NonNormalizableError(WaistError):
    """
    Raised for radial densities whose total mass is not finite and positive.
    """


class NotConvergedError(WaistError):
    def __init__(self, message: str, best=None, diagnostics: Optional[dict] = None):
        """
        Initializes a NotConvergedError object.

        Args:
            message (str): Human readable description of the failure.
            best: The best value, bracket or spread reached before giving up.
            diagnostics (dict): Solver specific details.
        """
        super().__init__(message)
        self.best = best
        self.diagnostics = diagnostics or {}


######
#
# This function returns a counter based generator keyed by seed and stream id
#
######


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    # philox keys are 128 bit, the low word holds the seed and the high word the stream
    key = (int(seed) % 2 ** 64) + ((int(stream) % 2 ** 64) << 64)
    return np.random.Generator(np.random.Philox(key=key))


######
#
# This function evaluates a function on consecutive chunks of a sample budget
#
######


def runChunks(fn: Callable[[int, int], object], count: int, chunk: int = 2 ** 16, threads: int = 1) -> List:
    """
    Calls fn(stream, size) for every chunk of the budget and returns the results in stream order.

    Chunk i always uses stream i, so the result does not depend on the number of threads.
    """
    # split budget
    sizes = [min(chunk, count - start) for start in range(0, count, chunk)]

    # evaluate sequentially if only one worker is requested
    if threads <= 1 or len(sizes) <= 1:
        return [fn(stream, size) for stream, size in enumerate(sizes)]

    # map preserves the order of the streams
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda args: fn(*args), enumerate(sizes)))


######
#
# These functions validate arguments
#
######


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise WaistError(f"Argument '{name}' must be a positive integer.")
    return int(value)


def check_nonnegative(value, name: str) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise WaistError(f"Argument '{name}' must be a real number.")
    if not np.isfinite(value) or value < 0:
        raise WaistError(f"Argument '{name}' must be a finite nonnegative number.")
    return value


def check_unit(vector, name: str, dim: Optional[int] = None, tol: float = 1e-12) -> np.ndarray:
    vector = np.asarray(vector, dtype=float).reshape(-1)
    if dim is not None and vector.shape[0] != dim:
        raise WaistError(f"Argument '{name}' must have {dim} entries.")
    norm = np.linalg.norm(vector)
    if not np.isfinite(norm) or norm == 0:
        raise WaistError(f"Argument '{name}' must be a nonzero finite vector.")
    if abs(norm - 1) > tol:
        raise WaistError(f"Argument '{name}' must be a unit vector.")
    return vector


def as_points(x, dim: int, name: str = "x") -> np.ndarray:
    points = np.atleast_2d(np.asarray(x, dtype=float))
    if points.shape[1] != dim:
        raise WaistError(f"Argument '{name}' must have {dim} coordinates per point.")
    if not np.all(np.isfinite(points)):
        raise WaistError(f"Argument '{name}' must be finite.")
    return points


######
#
# These functions handle small linear algebra chores shared by several modules
#
######


def normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / np.where(norms == 0, 1.0, norms)


def orthonormalComplement(frame: np.ndarray, dim: int) -> np.ndarray:
    """
    Returns an orthonormal basis (as columns) of the orthogonal complement of the span of the frame columns.
    """
    frame = np.asarray(frame, dtype=float).reshape(dim, -1)
    if frame.shape[1] == 0:
        return np.eye(dim)
    return null_space(frame.T)


######
#
# This function returns a stable hash of a json serializable configuration
#
######


def configHash(config: dict) -> str:
    payload = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


######
#
# These functions return volumes of unit spheres and balls (S^0 consists of two points)
#
######


def sphereVolume(m: int) -> float:
    return float(2 * np.pi ** ((m + 1) / 2) / gamma((m + 1) / 2))


def ballVolume(n: int, radius: float = 1.0) -> float:
    return float(np.pi ** (n / 2) * radius ** n / gamma(n / 2 + 1))


######
#
# This function projects target points onto a constraint set r(w) = 0 with Gauss-Newton steps
#
######


def constrainedProjection(
        target: np.ndarray, start: np.ndarray, residual: Callable, iterations: int = 100, step_cap: float = 1.0
) -> np.ndarray:
    """
    Iterates w <- x - J^T (J J^T)^{-1} (r(w) + J (x - w)) from the starts, only on rows that still move.

    Args:
        target (array): (m, d) points x being projected.
        start (array): (m, d) starting points.
        residual (callable): Maps (m', d) points to (r, J) with shapes (m', c) and (m', c, d).
        iterations (int): Iteration cap.
        step_cap (float): Largest step length.

    Returns:
        array: (m, d) final iterates, callers decide convergence from their residuals.
    """
    z = np.array(start, dtype=float, copy=True)
    active = np.arange(z.shape[0])
    for _ in range(iterations):
        if active.size == 0:
            break
        w = z[active]
        x = target[active]
        r, J = residual(w)
        rhs = r + np.einsum("mcd,md->mc", J, x - w)
        gram = np.einsum("mcd,med->mce", J, J) + 1e-12 * np.eye(J.shape[1])
        lam = np.linalg.solve(gram, rhs[..., None])[..., 0]
        step = x - np.einsum("mcd,mc->md", J, lam) - w
        size = np.linalg.norm(step, axis=1)
        step = step * np.minimum(1.0, step_cap / np.where(size > 0, size, 1.0))[:, None]
        z[active] = w + step
        active = active[size > 1e-12]
    return z
