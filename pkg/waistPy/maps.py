# load packages
import numpy as np
from typing import Callable, Dict, Optional, Tuple
from waistPy.helpers import WaistError, generator, as_points, check_positive_int, normalize_rows, constrainedProjection

ORTHOGONAL_ANGLE = np.deg2rad(65.0)
WEDGE_ANGLE = 0.05
STEP_CAP = 1.0
FIBER_TOL = 1e-9
JACOBIAN_STEP = 1e-6


######
#
# This class describes a continuous test map f: R^n -> R^k together with what is known about its fibers
#
######


class TestMap:
    # keeps pytest from collecting the class
    __test__ = False

    def __init__(
            self,
            name: str,
            n: int,
            k: int,
            evaluate: Callable[[np.ndarray], np.ndarray],
            jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
            fiber_distance: Optional[Callable[[np.ndarray, np.ndarray], Optional[np.ndarray]]] = None,
            fiber_projection: Optional[Callable[[np.ndarray, np.ndarray], Optional[np.ndarray]]] = None,
            sphere_distance: Optional[Callable[[np.ndarray, np.ndarray], Optional[np.ndarray]]] = None,
            odd: bool = False,
            degree: Optional[int] = None,
            description: str = ""
    ):
        """
        Initializes a TestMap object.

        Args:
            name (str): Name used by presets and the cli.
            n (int): Source dimension.
            k (int): Target dimension.
            evaluate (callable): Vectorized map (m, n) -> (m, k).
            jacobian (callable): Vectorized jacobian (m, n) -> (m, k, n), central differences if omitted.
            fiber_distance (callable): Exact Euclidean distance to f^{-1}(y), returns None where no formula applies.
            fiber_projection (callable): Nearest fiber points, returns None where no formula applies.
            sphere_distance (callable): Exact geodesic distance on the unit sphere to f^{-1}(y).
            odd (bool): Whether f(-x) = -f(x).
            degree (int): Homogeneity degree d with f(lambda x) = lambda^d f(x), if any.
            description (str): Closed form of the map.
        """
        self.name = name
        self.n = check_positive_int(n, "n")
        self.k = check_positive_int(k, "k")
        self._evaluate = evaluate
        self._jacobian = jacobian
        self.fiber_distance = fiber_distance
        self.fiber_projection = fiber_projection
        self.sphere_distance = sphere_distance
        self.odd = odd
        self.degree = degree
        self.description = description

    def evaluate(self, x) -> np.ndarray:
        points = as_points(x, self.n)
        return np.asarray(self._evaluate(points), dtype=float).reshape(points.shape[0], self.k)

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)

    def jacobian(self, x) -> np.ndarray:
        points = as_points(x, self.n)
        if self._jacobian is not None:
            return np.asarray(self._jacobian(points), dtype=float).reshape(points.shape[0], self.k, self.n)
        columns = []
        for j in range(self.n):
            offset = np.zeros(self.n)
            offset[j] = JACOBIAN_STEP
            columns.append((self.evaluate(points + offset) - self.evaluate(points - offset)) / (2 * JACOBIAN_STEP))
        return np.stack(columns, axis=2)

    @property
    def distanceMethod(self) -> str:
        return "analytic" if self.fiber_distance is not None else "optimization"

    def analyticDistance(self, x: np.ndarray, y: np.ndarray, metric: str = "euclidean") -> Optional[np.ndarray]:
        if metric == "geodesic":
            return None if self.sphere_distance is None else self.sphere_distance(x, y)
        return None if self.fiber_distance is None else self.fiber_distance(x, y)

    def __repr__(self):
        return f"TestMap(name='{self.name}', n={self.n}, k={self.k})"


######
#
# This function projects points onto a fiber with a multi-start Gauss-Newton iteration
#
######


def projectToFiber(
        f: TestMap, x, y, starts: int = 8, iterations: int = 100, seed: int = 0, on_sphere: bool = False
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Returns (distances, nearest points, ok flags). Every converged start lies on the fiber, so the
    distance is an upper bound of the true one; samples without a converged start get distance inf.

    Args:
        f (TestMap): Map whose fiber is searched.
        x (array): (m, n) points.
        y (array): Fiber value, k entries.
        starts (int): Starts per point, the first one is the point itself.
        iterations (int): Iteration cap per start.
        seed (int): Seed of the perturbed starts.
        on_sphere (bool): Restrict the fiber to the unit sphere and return geodesic distances.
    """
    # check arguments
    points = as_points(x, f.n)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != f.k:
        raise WaistError(f"Argument 'y' must have {f.k} entries.")
    starts = check_positive_int(starts, "starts")
    m, n = points.shape

    # starts are the point and perturbations of it
    rng = generator(seed, 2)
    noise = np.concatenate([np.zeros((1, m, n)), 0.5 * rng.standard_normal((starts - 1, m, n))])
    z = (points[None, :, :] + noise).reshape(-1, n)
    if on_sphere:
        z = normalize_rows(z)
    target = np.tile(points, (starts, 1))

    def residual(w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r = f.evaluate(w) - y
        J = f.jacobian(w)
        if on_sphere:
            r = np.column_stack([r, np.sum(w ** 2, axis=1) - 1])
            J = np.concatenate([J, 2 * w[:, None, :]], axis=1)
        return r, J

    # linearized projection of the point onto the constraint set
    z = constrainedProjection(target, z, residual, iterations, STEP_CAP)

    # distances of converged starts
    r, _ = residual(z)
    ok = np.max(np.abs(r), axis=1) <= FIBER_TOL * (1 + np.max(np.abs(y)))
    chord = np.linalg.norm(z - target, axis=1)
    distance = 2 * np.arcsin(np.minimum(1.0, chord / 2)) if on_sphere else chord
    distance = np.where(ok, distance, np.inf).reshape(starts, m)
    best = np.argmin(distance, axis=0)
    nearest = z.reshape(starts, m, n)[best, np.arange(m)]
    return distance[best, np.arange(m)], nearest, np.isfinite(distance[best, np.arange(m)])


def fiberDistance(
        f: TestMap, x, y, metric: str = "euclidean", starts: int = 8, iterations: int = 100, seed: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns (distances, ok flags) to f^{-1}(y), exact where the map knows a formula.
    """
    if metric not in ["euclidean", "geodesic"]:
        raise WaistError("Argument 'metric' must be 'euclidean' or 'geodesic'.")
    points = as_points(x, f.n)
    y = np.asarray(y, dtype=float).reshape(-1)
    exact = f.analyticDistance(points, y, metric)
    if exact is not None:
        return exact, np.ones(points.shape[0], dtype=bool)
    distance, _, ok = projectToFiber(f, points, y, starts, iterations, seed, on_sphere=metric == "geodesic")
    return distance, ok


def fiberProjection(f: TestMap, x, y, starts: int = 8, iterations: int = 100, seed: int = 0):
    points = as_points(x, f.n)
    y = np.asarray(y, dtype=float).reshape(-1)
    if f.fiber_projection is not None:
        nearest = f.fiber_projection(points, y)
        if nearest is not None:
            return nearest, np.ones(points.shape[0], dtype=bool)
    _, nearest, ok = projectToFiber(f, points, y, starts, iterations, seed)
    return nearest, ok


######
#
# These functions build the linear and coordinate maps
#
######


def linearMap(n: int, k: int) -> TestMap:
    if k < 1 or k > n:
        raise WaistError("Argument 'k' must satisfy 1 <= k <= n.")

    def projection(x, y):
        out = x.copy()
        out[:, n - k:] = y
        return out

    return TestMap(
        "linear", n, k, lambda x: x[:, n - k:],
        jacobian=lambda x: np.broadcast_to(np.eye(n)[n - k:], (x.shape[0], k, n)),
        fiber_distance=lambda x, y: np.linalg.norm(x[:, n - k:] - y, axis=1),
        fiber_projection=projection,
        odd=True, degree=1, description="x -> (x_{n-k+1}, ..., x_n)"
    )


def coordinateMap(n: int) -> TestMap:
    def sphere_distance(x, y):
        if abs(y[0]) > 1:
            return np.full(x.shape[0], np.inf)
        return np.abs(np.arcsin(np.clip(x[:, 0], -1, 1)) - np.arcsin(y[0]))

    def projection(x, y):
        out = x.copy()
        out[:, 0] = y[0]
        return out

    return TestMap(
        "x1", n, 1, lambda x: x[:, :1],
        jacobian=lambda x: np.broadcast_to(np.eye(n)[:1], (x.shape[0], 1, n)),
        fiber_distance=lambda x, y: np.abs(x[:, 0] - y[0]),
        fiber_projection=projection,
        sphere_distance=sphere_distance,
        odd=True, degree=1, description="x -> x_1"
    )


def radialMap(n: int) -> TestMap:
    def distance(x, y):
        if y[0] < 0:
            return np.full(x.shape[0], np.inf)
        return np.abs(np.linalg.norm(x, axis=1) - y[0])

    def projection(x, y):
        directions = normalize_rows(x)
        directions[np.linalg.norm(x, axis=1) == 0] = np.eye(n)[0]
        return y[0] * directions

    return TestMap(
        "radial", n, 1, lambda x: np.linalg.norm(x, axis=1)[:, None],
        fiber_distance=distance, fiber_projection=projection, degree=1, description="x -> |x|"
    )


######
#
# These functions build smooth odd maps without closed form fibers
#
######


def oddCubicMap(n: int, eps: float = 0.1) -> TestMap:
    if n < 2:
        raise WaistError("Argument 'n' must be at least 2.")

    def jacobian(x):
        J = np.zeros((x.shape[0], 1, n))
        J[:, 0, 0] = 1.0
        J[:, 0, 1] = 3 * eps * x[:, 1] ** 2
        return J

    return TestMap(
        "odd-cubic", n, 1, lambda x: (x[:, 0] + eps * x[:, 1] ** 3)[:, None], jacobian=jacobian, odd=True,
        description=f"x -> x_1 + {eps} x_2^3"
    )


def wavyMap(n: int, amplitude: float = 0.3) -> TestMap:
    if n < 2:
        raise WaistError("Argument 'n' must be at least 2.")

    def jacobian(x):
        J = np.zeros((x.shape[0], 1, n))
        J[:, 0, 0] = 1.0
        J[:, 0, 1] = amplitude * np.cos(x[:, 1])
        return J

    return TestMap(
        "wavy", n, 1, lambda x: (x[:, 0] + amplitude * np.sin(x[:, 1]))[:, None], jacobian=jacobian, odd=True,
        description=f"x -> x_1 + {amplitude} sin(x_2)"
    )


######
#
# This function builds the k = 1 map whose level set f = 1 meets the unit sphere orthogonally
#
######


def _meridian(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # coordinates in the half-plane spanned by the pole e_1 and the point
    axial = x[:, 0]
    radial = np.linalg.norm(x[:, 1:], axis=1)
    return axial, radial


def _polar_angle(x: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(x, axis=1)
    return np.arccos(np.clip(x[:, 0] / np.where(r > 0, r, 1.0), -1, 1))


def sphereOrthogonalMap(n: int, theta1: float = ORTHOGONAL_ANGLE) -> TestMap:
    """
    Returns f(x) = min(|x - p|, 1 + |x| (theta(x) - theta1)) with p = e_1 and theta the angle to p.

    The level set f = 1 is the arc of the unit circle around p seen from the origin at angles
    theta >= theta1 together with the cone theta = theta1 outside that circle. The cone meets the
    unit sphere orthogonally along the circle theta = theta1 (theta1 > 60 degrees keeps the unit
    sphere outside the arc).
    """
    if n < 2:
        raise WaistError("Argument 'n' must be at least 2.")
    if not np.pi / 3 < theta1 < np.pi / 2:
        raise WaistError("Argument 'theta1' must lie in (pi/3, pi/2).")
    p = np.eye(n)[0]
    ray = np.array([np.cos(theta1), np.sin(theta1)])
    ray_start = 2 * np.cos(theta1)

    def evaluate(x):
        g = np.linalg.norm(x - p, axis=1)
        h = 1 + np.linalg.norm(x, axis=1) * (_polar_angle(x) - theta1)
        return np.minimum(g, h)[:, None]

    def distance(x, y):
        if y[0] != 1.0:
            return None
        a, rho = _meridian(x)
        q = np.column_stack([a, rho])

        # arc of the circle around (1, 0) for center angles in [2 theta1, pi]
        psi = np.arctan2(rho, a - 1)
        on_arc = psi >= 2 * theta1
        arc_ends = np.array([[1 + np.cos(2 * theta1), np.sin(2 * theta1)], [0.0, 0.0]])
        to_ends = np.min(np.linalg.norm(q[:, None, :] - arc_ends[None, :, :], axis=2), axis=1)
        arc = np.where(on_arc, np.abs(np.hypot(a - 1, rho) - 1), to_ends)

        # cone ray starting on the circle
        s = q @ ray
        ray_distance = np.where(
            s >= ray_start, np.abs(a * ray[1] - rho * ray[0]), np.linalg.norm(q - ray_start * ray, axis=1)
        )
        return np.minimum(arc, ray_distance)

    return TestMap(
        "sphere-orthogonal", n, 1, evaluate, fiber_distance=distance,
        description=f"x -> min(|x - e_1|, 1 + |x| (angle(x, e_1) - {theta1:.6f}))"
    )


######
#
# This function builds the k >= 2 map whose zero fiber is a thin wedge around a radius segment
#
######


def radiusWedgeMap(n: int, k: int, beta: float = WEDGE_ANGLE) -> TestMap:
    """
    Returns f = (x_1, ..., x_{k-1}, |z| max(0, phi - beta)) with z = (x_k, ..., x_n) and phi the angle
    between z and the first axis of z. The zero fiber is the cone of half-angle beta around that axis
    inside the slice x_1 = ... = x_{k-1} = 0.
    """
    if k < 2 or k >= n:
        raise WaistError("Argument 'k' must satisfy 2 <= k < n.")
    if not 0 < beta < np.pi / 2:
        raise WaistError("Argument 'beta' must lie in (0, pi/2).")

    def angle(z):
        r = np.linalg.norm(z, axis=1)
        return np.arccos(np.clip(z[:, 0] / np.where(r > 0, r, 1.0), -1, 1)), r

    def evaluate(x):
        phi, r = angle(x[:, k - 1:])
        return np.column_stack([x[:, :k - 1], r * np.maximum(0.0, phi - beta)])

    def cone_distance(z):
        phi, r = angle(z)
        gap = phi - beta
        return np.where(gap <= 0, 0.0, np.where(gap < np.pi / 2, r * np.sin(np.clip(gap, 0, None)), r))

    def distance(x, y):
        if y[-1] != 0:
            return None
        return np.sqrt(np.sum((x[:, :k - 1] - y[:k - 1]) ** 2, axis=1) + cone_distance(x[:, k - 1:]) ** 2)

    def projection(x, y):
        if y[-1] != 0:
            return None
        z = x[:, k - 1:]
        phi, r = angle(z)
        gap = phi - beta

        # rotate z towards the axis inside the plane of the axis and z
        axis = np.eye(z.shape[1])[0]
        side = normalize_rows(z - z[:, :1] * axis)
        side[np.linalg.norm(side, axis=1) == 0] = np.eye(z.shape[1])[min(1, z.shape[1] - 1)]
        edge = np.cos(beta) * axis + np.sin(beta) * side
        length = np.where(gap < np.pi / 2, r * np.cos(np.clip(gap, 0, None)), 0.0)
        nearest = np.where((gap <= 0)[:, None], z, length[:, None] * edge)
        return np.column_stack([np.broadcast_to(y[:k - 1], (x.shape[0], k - 1)), nearest])

    return TestMap(
        "radius-wedge", n, k, evaluate, fiber_distance=distance, fiber_projection=projection, degree=1,
        description=f"x -> (x_1..x_{k - 1}, |z| max(0, angle(z, axis) - {beta}))"
    )


######
#
# These functions build homogeneous holomorphic maps C^2 -> C written on R^4
#
######


def _complex_pair(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return x[:, 0] + 1j * x[:, 1], x[:, 2] + 1j * x[:, 3]


def productMap() -> TestMap:
    def evaluate(x):
        z1, z2 = _complex_pair(x)
        w = z1 * z2
        return np.column_stack([w.real, w.imag])

    def distance(x, y):
        if np.any(y != 0):
            return None
        z1, z2 = _complex_pair(x)
        return np.minimum(np.abs(z1), np.abs(z2))

    def projection(x, y):
        if np.any(y != 0):
            return None
        z1, z2 = _complex_pair(x)
        out = x.copy()
        first = np.abs(z1) <= np.abs(z2)
        out[first, :2] = 0.0
        out[~first, 2:] = 0.0
        return out

    return TestMap(
        "z1z2", 4, 2, evaluate, fiber_distance=distance, fiber_projection=projection, degree=2,
        description="(z_1, z_2) -> z_1 z_2"
    )


def fermatMap() -> TestMap:
    def evaluate(x):
        z1, z2 = _complex_pair(x)
        w = z1 ** 2 + z2 ** 2
        return np.column_stack([w.real, w.imag])

    def distance(x, y):
        if np.any(y != 0):
            return None
        z1, z2 = _complex_pair(x)
        return np.minimum(np.abs(z1 - 1j * z2), np.abs(z1 + 1j * z2)) / np.sqrt(2)

    return TestMap(
        "fermat", 4, 2, evaluate, fiber_distance=distance, degree=2, description="(z_1, z_2) -> z_1^2 + z_2^2"
    )


######
#
# This function returns the built-in test maps keyed by name
#
######


def builtinMaps(n: int = 3, k: int = 2) -> Dict[str, TestMap]:
    maps = {
        "linear": linearMap(n, 1),
        "x1": coordinateMap(n),
        "radial": radialMap(n),
        "odd-cubic": oddCubicMap(n),
        "wavy": wavyMap(n),
        "sphere-orthogonal": sphereOrthogonalMap(n),
        "z1z2": productMap(),
        "fermat": fermatMap(),
    }
    if 2 <= k < n:
        maps["linear-k"] = linearMap(n, k)
        maps["radius-wedge"] = radiusWedgeMap(n, k)
    return maps


def getMap(name: str, n: int, k: int = 1) -> TestMap:
    factories = {
        "linear": lambda: linearMap(n, k),
        "x1": lambda: coordinateMap(n),
        "radial": lambda: radialMap(n),
        "odd-cubic": lambda: oddCubicMap(n),
        "wavy": lambda: wavyMap(n),
        "sphere-orthogonal": lambda: sphereOrthogonalMap(n),
        "radius-wedge": lambda: radiusWedgeMap(n, k),
        "z1z2": productMap,
        "fermat": fermatMap,
    }
    if name not in factories:
        raise WaistError(f"Argument 'map' must be one of {sorted(factories)}.")
    return factories[name]()


######
#
# These functions probe the structural properties a map claims
#
######


def oddnessProbe(f: TestMap, count: int = 100, seed: int = 0) -> float:
    x = generator(seed, 3).standard_normal((count, f.n))
    return float(np.max(np.abs(f.evaluate(-x) + f.evaluate(x))))


def homogeneityProbe(f: TestMap, count: int = 100, seed: int = 0) -> float:
    if f.degree is None:
        raise WaistError("Argument 'f' must declare a homogeneity degree.")
    rng = generator(seed, 4)
    x = rng.standard_normal((count, f.n))
    lam = rng.uniform(0.1, 3.0, count)
    expected = lam[:, None] ** f.degree * f.evaluate(x)
    return float(np.max(np.abs(f.evaluate(lam[:, None] * x) - expected) / (1 + np.abs(expected))))


def orthogonalityProbe(f: TestMap, count: int = 64, seed: int = 0, theta1: float = ORTHOGONAL_ANGLE) -> float:
    """
    Returns the largest |cos| of the angle between grad f and the sphere normal on the circle theta = theta1.
    """
    rng = generator(seed, 5)
    side = rng.standard_normal((count, f.n))
    side[:, 0] = 0.0
    side = normalize_rows(side)
    x = np.cos(theta1) * np.eye(f.n)[0] + np.sin(theta1) * side
    g = f.jacobian(x)[:, 0, :]
    return float(np.max(np.abs(np.sum(g * x, axis=1)) / np.linalg.norm(g, axis=1)))


def poleReachProbe(f: TestMap, y, starts: int = 8, seed: int = 0) -> float:
    # largest distance from the poles +-e_i to the fiber
    poles = np.concatenate([np.eye(f.n), -np.eye(f.n)])
    distance, ok = fiberDistance(f, poles, y, starts=starts, seed=seed)
    return float(np.max(np.where(ok, distance, np.inf)))
