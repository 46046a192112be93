# load packages
import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.special import gammainc
from typing import Callable, List, Optional, Tuple
from waistPy.helpers import (
    WaistError, NonNormalizableError, DegenerateError, generator, runChunks, check_positive_int,
    as_points, normalize_rows, sphereVolume, ballVolume
)

KINDS = ["gaussian", "ball", "sphere", "radial", "atom-sphere"]

# radial profiles available from json, each maps its parameters to a vectorized rho
RADIAL_PROFILES = {
    "uniform": lambda p: (lambda r: np.ones_like(np.asarray(r, dtype=float))),
    "gaussian": lambda p: (lambda r: np.exp(-float(p.get("a", 1.0)) * np.asarray(r, dtype=float) ** 2)),
    "power": lambda p: (lambda r: np.asarray(r, dtype=float) ** float(p.get("p", 1.0))),
    "linear": lambda p: (lambda r: np.clip(1 - np.asarray(r, dtype=float) / float(p.get("scale", 1.0)), 0, None)),
}

TABLE_NODES = 1024
TAIL_MASS = 1e-10


######
#
# This class describes one of the finite Borel measures used throughout the package
#
######


class MeasureSpec:
    def __init__(
            self,
            dim: int,
            kind: str,
            scales: Optional[list] = None,
            radius: Optional[float] = None,
            rho: Optional[Callable] = None,
            support_radius: Optional[float] = None,
            atom_mass: float = 0.0,
            profile: Optional[dict] = None
    ):
        """
        Initializes a MeasureSpec object. Prefer the classmethod constructors.

        Args:
            dim (int): Ambient dimension n.
            kind (str): One of "gaussian", "ball", "sphere", "radial" or "atom-sphere".
            scales (list): Gaussian scales a_i of the density exp(-sum a_i x_i^2).
            radius (float): Radius of the uniform ball or sphere (also the sphere of the atom mixture).
            rho (callable): Radial profile r -> rho(r) >= 0 of a radial density.
            support_radius (float): Support radius of a radial density, None for unbounded support.
            atom_mass (float): Mass of the atom at the origin of an atom-sphere mixture.
            profile (dict): Named radial profile, used when the spec is built from json.
        """
        self.dim = check_positive_int(dim, "dim")
        if kind not in KINDS:
            raise WaistError(f"Argument 'kind' must be one of {KINDS}.")
        self.kind = kind
        self.scales = None
        self.radius = None
        self.rho = None
        self.support_radius = None
        self.atom_mass = 0.0
        self.profile = None

        # validate variant parameters
        if kind == "gaussian":
            scales = np.asarray(scales, dtype=float).reshape(-1)
            if scales.shape[0] != self.dim:
                raise WaistError(f"Argument 'scales' must have {self.dim} entries.")
            if not np.all(np.isfinite(scales)) or np.any(scales <= 0):
                raise WaistError("Argument 'scales' must contain strictly positive numbers.")
            self.scales = scales
        elif kind in ["ball", "sphere", "atom-sphere"]:
            if radius is None or not np.isfinite(radius) or radius <= 0:
                raise WaistError("Argument 'radius' must be a positive number.")
            self.radius = float(radius)
            if kind == "atom-sphere":
                if not 0 <= atom_mass <= 1:
                    raise WaistError("Argument 'atom_mass' must lie in [0, 1].")
                self.atom_mass = float(atom_mass)
        else:
            if profile is not None:
                if profile.get("name") not in RADIAL_PROFILES:
                    raise WaistError(f"Argument 'profile' must name one of {list(RADIAL_PROFILES)}.")
                self.profile = dict(profile)
                rho = RADIAL_PROFILES[profile["name"]](profile)
            if rho is None or not callable(rho):
                raise WaistError("Argument 'rho' must be a callable radial profile.")
            if support_radius is not None and (not np.isfinite(support_radius) or support_radius <= 0):
                raise WaistError("Argument 'support_radius' must be a positive number or None.")
            self.rho = rho
            self.support_radius = None if support_radius is None else float(support_radius)

        # lazily computed radial normalizer and inverse cdf table
        self._normalizer = None
        self._table = None

    @classmethod
    def gaussianAniso(cls, scales: list) -> "MeasureSpec":
        scales = list(np.asarray(scales, dtype=float).reshape(-1))
        return cls(len(scales), "gaussian", scales=scales)

    @classmethod
    def uniformBall(cls, dim: int, radius: float = 1.0) -> "MeasureSpec":
        return cls(dim, "ball", radius=radius)

    @classmethod
    def uniformSphere(cls, dim: int, radius: float = 1.0) -> "MeasureSpec":
        return cls(dim, "sphere", radius=radius)

    @classmethod
    def radialDensity(
            cls, dim: int, rho: Optional[Callable] = None, support_radius: Optional[float] = None,
            profile: Optional[dict] = None
    ) -> "MeasureSpec":
        return cls(dim, "radial", rho=rho, support_radius=support_radius, profile=profile)

    @classmethod
    def atomSphereMix(cls, dim: int, atom_mass: float = 0.5, radius: float = 1.0) -> "MeasureSpec":
        return cls(dim, "atom-sphere", radius=radius, atom_mass=atom_mass)

    def __repr__(self):
        return f"MeasureSpec({self.to_dict()})"

    @property
    def atoms(self) -> List[Tuple[np.ndarray, float]]:
        if self.kind == "atom-sphere" and self.atom_mass > 0:
            return [(np.zeros(self.dim), self.atom_mass)]
        return []

    @property
    def continuousMass(self) -> float:
        return 1.0 - sum(mass for _, mass in self.atoms)

    @property
    def isAbsolutelyContinuous(self) -> bool:
        return self.kind in ["gaussian", "ball", "radial"]

    @property
    def isRadial(self) -> bool:
        if self.kind == "gaussian":
            return bool(np.all(self.scales == self.scales[0]))
        return True

    @property
    def isCentrallySymmetric(self) -> bool:
        # every variant is centered at the origin
        return True

    @property
    def supportRadius(self) -> Optional[float]:
        if self.kind == "radial":
            return self.support_radius
        return self.radius

    def to_dict(self) -> dict:
        """
        Returns the json schema representation of the spec.
        """
        d = {"dim": self.dim, "kind": self.kind}
        if self.kind == "gaussian":
            d["scales"] = [float(a) for a in self.scales]
        elif self.kind == "radial":
            if self.profile is None:
                raise WaistError("Radial densities with a python callable cannot be serialized.")
            d["profile"] = self.profile
            d["support_radius"] = self.support_radius
        else:
            d["radius"] = self.radius
            if self.kind == "atom-sphere":
                d["atom_mass"] = self.atom_mass
        return d

    ######
    #
    # radial helpers: normalizer and inverse cdf table of the radius
    #
    ######

    def _radial_weight(self, r: float) -> float:
        return float(np.asarray(self.rho(r), dtype=float)) * r ** (self.dim - 1)

    def radialNormalizer(self) -> float:
        """
        Returns Z = vol(S^{n-1}) * int rho(r) r^{n-1} dr for radial densities.
        """
        if self._normalizer is None:
            upper = np.inf if self.support_radius is None else self.support_radius
            result = quad(self._radial_weight, 0, upper, limit=200, full_output=1)

            # quad appends a warning message when the integral does not settle
            if len(result) > 3 or not np.isfinite(result[0]) or result[0] <= 0:
                raise NonNormalizableError("Radial density is non-normalizable.")
            self._normalizer = sphereVolume(self.dim - 1) * result[0]
        return self._normalizer

    def _cutoff(self) -> float:
        if self.support_radius is not None:
            return self.support_radius
        total = self.radialNormalizer() / sphereVolume(self.dim - 1)
        r = 1.0
        for _ in range(60):
            tail = quad(self._radial_weight, r, np.inf, limit=200)[0]
            if tail <= TAIL_MASS * total:
                return r
            r *= 2
        raise NonNormalizableError("Radial density is non-normalizable.")

    def radiusQuantile(self, u: np.ndarray) -> np.ndarray:
        """
        Returns the inverse radius cdf of a radial density, interpolated on a monotone table.
        """
        if self._table is None:
            cutoff = self._cutoff()
            nodes = np.linspace(0, cutoff, TABLE_NODES)
            panels = [quad(self._radial_weight, a, b, limit=100)[0] for a, b in zip(nodes[:-1], nodes[1:])]
            cdf = np.concatenate([[0.0], np.cumsum(panels)])
            if cdf[-1] <= 0:
                raise NonNormalizableError("Radial density is non-normalizable.")
            cdf = cdf / cdf[-1]

            # keep strictly increasing nodes for the inverse table
            keep = np.concatenate([[True], np.diff(cdf) > 0])
            self._table = PchipInterpolator(cdf[keep], nodes[keep], extrapolate=False)
        return self._table(np.clip(u, 0, 1))


######
#
# This class holds a reproducible batch of samples
#
######


class SampleBatch:
    def __init__(self, points: np.ndarray, seed: int, weights: Optional[np.ndarray] = None):
        self.points = points
        self.weights = weights
        self.seed = seed
        self.count = points.shape[0]


######
#
# This function returns the density of the absolutely continuous part of a spec and its atoms
#
######


def density(spec: MeasureSpec, x) -> Tuple[object, List[Tuple[np.ndarray, float]]]:
    # check arguments
    points = as_points(x, spec.dim)
    r = np.linalg.norm(points, axis=1)

    # evaluate density of the absolutely continuous part
    if spec.kind == "gaussian":
        values = np.prod(np.sqrt(spec.scales / np.pi)) * np.exp(-(points ** 2) @ spec.scales)
    elif spec.kind == "ball":
        values = np.where(r <= spec.radius, 1 / ballVolume(spec.dim, spec.radius), 0.0)
    elif spec.kind == "radial":
        inside = np.ones_like(r, dtype=bool) if spec.support_radius is None else r <= spec.support_radius
        rho = np.array([float(np.asarray(spec.rho(v), dtype=float)) for v in r])
        values = np.where(inside, rho / spec.radialNormalizer(), 0.0)
    else:
        values = np.zeros_like(r)

    # return scalar for a single point
    if np.ndim(x) == 1:
        return float(values[0]), spec.atoms
    return values, spec.atoms


######
#
# This function returns the analytic cdf of |X| for radial specs
#
######


def radialCdf(spec: MeasureSpec, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if not spec.isRadial:
        raise WaistError("Argument 'spec' must be radial.")
    if spec.kind == "gaussian":
        return gammainc(spec.dim / 2, spec.scales[0] * r ** 2)
    if spec.kind == "ball":
        return np.clip(r / spec.radius, 0, 1) ** spec.dim
    if spec.kind == "sphere":
        return np.where(r >= spec.radius, 1.0, 0.0)
    if spec.kind == "atom-sphere":
        return np.where(r >= spec.radius, 1.0, np.where(r >= 0, spec.atom_mass, 0.0))

    # radial density: integrate the shell weights
    scale = sphereVolume(spec.dim - 1) / spec.radialNormalizer()
    upper = np.inf if spec.support_radius is None else spec.support_radius
    values = [scale * quad(spec._radial_weight, 0, min(v, upper), limit=200)[0] if v > 0 else 0.0
              for v in np.atleast_1d(r)]
    return np.clip(np.array(values).reshape(r.shape), 0, 1)


######
#
# These functions draw samples from a spec with one counter based stream per chunk
#
######


def _draw(spec: MeasureSpec, rng: np.random.Generator, size: int, continuous_only: bool = False) -> np.ndarray:
    n = spec.dim
    if spec.kind == "gaussian":
        return rng.standard_normal((size, n)) / np.sqrt(2 * spec.scales)

    # all other variants are radial: uniform direction times radius
    directions = normalize_rows(rng.standard_normal((size, n)))
    if spec.kind == "ball":
        radii = spec.radius * rng.random(size) ** (1 / n)
    elif spec.kind == "sphere":
        radii = np.full(size, spec.radius)
    elif spec.kind == "radial":
        radii = spec.radiusQuantile(rng.random(size))
    else:
        radii = np.full(size, spec.radius)
        if not continuous_only:
            radii = np.where(rng.random(size) < spec.atom_mass, 0.0, radii)
    return directions * radii[:, None]


def mapChunks(
        spec: MeasureSpec, fn: Callable[[np.ndarray], object], count: int, seed: int, threads: int = 1,
        chunk: int = 2 ** 16, continuous_only: bool = False
) -> List:
    """
    Draws count samples chunk by chunk and returns fn(points) for each chunk in stream order.
    """
    count = check_positive_int(count, "count")
    if spec.kind == "radial":
        # build the table once before any worker touches it
        spec.radiusQuantile(np.array([0.5]))
    return runChunks(
        lambda stream, size: fn(_draw(spec, generator(seed, stream), size, continuous_only)),
        count, chunk=chunk, threads=threads
    )


def sampleMeasure(spec: MeasureSpec, count: int, seed: int, threads: int = 1, chunk: int = 2 ** 16) -> SampleBatch:
    # draw chunks
    chunks = mapChunks(spec, lambda points: points, count, seed, threads=threads, chunk=chunk)

    # return batch
    return SampleBatch(np.concatenate(chunks, axis=0), seed=seed)


def sampleBody(
        spec: MeasureSpec, body, count: int, seed: int, chunk: int = 2 ** 16, max_rounds: int = 1000
) -> SampleBatch:
    """
    Rejection samples spec restricted to a body exposing contains(points).
    """
    count = check_positive_int(count, "count")
    collected = []
    found = 0
    for stream in range(max_rounds):
        points = _draw(spec, generator(seed, stream), chunk)
        points = points[body.contains(points)]
        collected.append(points)
        found += points.shape[0]
        if found >= count:
            return SampleBatch(np.concatenate(collected, axis=0)[:count], seed=seed)
    raise DegenerateError("Body is degenerate: rejection sampling found too few points inside.")


######
#
# This function returns the Monte Carlo measure of a set given by a vectorized predicate
#
######


def mcMeasure(
        spec: MeasureSpec, inside: Callable[[np.ndarray], np.ndarray], count: int = 10 ** 6, seed: int = 0,
        threads: int = 1, chunk: int = 2 ** 16
) -> Tuple[float, float]:
    # count atoms exactly
    atom_part = 0.0
    for point, mass in spec.atoms:
        if bool(np.asarray(inside(point[None, :])).reshape(-1)[0]):
            atom_part += mass

    # sample the continuous part only
    continuous = spec.continuousMass
    if continuous <= 0:
        return atom_part, 0.0
    hits = mapChunks(
        spec, lambda points: int(np.count_nonzero(inside(points))), count, seed,
        threads=threads, chunk=chunk, continuous_only=True
    )
    p = sum(hits) / count

    # return estimate and binomial standard error of the sampled part
    return atom_part + continuous * p, continuous * np.sqrt(p * (1 - p) / count)


######
#
# These functions convert specs from and to the json schema
#
######


def measureFromDict(d: dict) -> MeasureSpec:
    if not isinstance(d, dict):
        raise WaistError("Argument 'measure' must be a json object.")
    allowed = {
        "gaussian": {"dim", "kind", "scales"},
        "ball": {"dim", "kind", "radius"},
        "sphere": {"dim", "kind", "radius"},
        "radial": {"dim", "kind", "profile", "support_radius"},
        "atom-sphere": {"dim", "kind", "radius", "atom_mass"},
    }
    kind = d.get("kind")
    if kind not in allowed:
        raise WaistError(f"Field 'measure.kind' must be one of {KINDS}.")
    unknown = set(d) - allowed[kind]
    if unknown:
        raise WaistError(f"Unknown fields in 'measure': {sorted(unknown)}.")
    if "dim" not in d:
        raise WaistError("Field 'measure.dim' is required.")
    if kind == "gaussian":
        spec = MeasureSpec.gaussianAniso(d.get("scales", []))
        if spec.dim != d["dim"]:
            raise WaistError("Field 'measure.scales' must have 'dim' entries.")
        return spec
    if kind == "radial":
        return MeasureSpec.radialDensity(d["dim"], profile=d.get("profile"), support_radius=d.get("support_radius"))
    return MeasureSpec(d["dim"], kind, radius=d.get("radius", 1.0), atom_mass=d.get("atom_mass", 0.0))


def measureToDict(spec: MeasureSpec) -> dict:
    return spec.to_dict()
