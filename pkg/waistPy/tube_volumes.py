# load packages
import itertools
import numpy as np
import pandas as pd
from scipy.integrate import quad, dblquad
from scipy.special import erf, gammainc, gamma, betainc
from typing import Union
from waistPy.helpers import WaistError, check_nonnegative, check_positive_int, sphereVolume
from waistPy.measures import MeasureSpec

QUAD_TOL = 1e-10


######
#
# This function returns the normalized Gaussian mass of the Euclidean t-ball in R^k with axis scales a_i
#
######


def gaussianSubspaceTube(
        scales: list, t: Union[float, np.ndarray], tol: float = QUAD_TOL
) -> Union[float, np.ndarray]:
    """
    Returns int_{|y| <= t} exp(-sum a_i y_i^2) dy / int_{R^k} exp(-sum a_i y_i^2) dy.

    This is the measure of the t-neighborhood of the coordinate subspace complementary to the given scales.

    Args:
        scales (list): Scales a_1..a_k of the k normal coordinates, k = 0 gives 1.
        t (float or array): Nonnegative radius or grid of radii.
        tol (float): Absolute tolerance of the quadratures.

    Returns:
        float or array: Fraction in [0, 1] for every t.
    """
    # check arguments
    scales = np.asarray(scales, dtype=float).reshape(-1)
    if np.any(~np.isfinite(scales)) or np.any(scales <= 0):
        raise WaistError("Argument 'scales' must contain strictly positive numbers.")
    t_values = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~np.isfinite(t_values)) or np.any(t_values < 0):
        raise WaistError("Argument 't' must be nonnegative.")

    k = scales.shape[0]
    if k == 0:
        values = np.ones_like(t_values)
    elif k == 1:
        values = erf(np.sqrt(scales[0]) * t_values)
    elif np.all(scales == scales[0]):
        # radial reduction: |y|^2 is gamma distributed
        values = gammainc(k / 2, scales[0] * t_values ** 2)
    elif k <= 3:
        values = np.array([_direct_tube(scales, v, tol) for v in t_values])
    else:
        values = np.array([_imhof_tube(scales, v, tol) for v in t_values])

    values = np.clip(values, 0, 1)
    if np.ndim(t) == 0:
        return float(values[0])
    return values


def _direct_tube(scales: np.ndarray, t: float, tol: float = QUAD_TOL) -> float:
    if t == 0:
        return 0.0
    k = scales.shape[0]
    prefactor = np.prod(np.sqrt(scales)) / np.pi ** (k / 2) * gamma(k / 2) / 2

    # integrate the radial closed form over the unit sphere of directions
    def radial(q):
        return gammainc(k / 2, q * t ** 2) * q ** (-k / 2)

    if k == 2:
        # four symmetric quadrants
        value = 4 * quad(
            lambda phi: radial(scales[0] * np.cos(phi) ** 2 + scales[1] * np.sin(phi) ** 2),
            0, np.pi / 2, epsabs=tol, epsrel=1e-12, limit=200
        )[0]
    else:
        # eight symmetric octants
        value = 8 * dblquad(
            lambda phi, theta: np.sin(theta) * radial(
                np.sin(theta) ** 2 * (scales[0] * np.cos(phi) ** 2 + scales[1] * np.sin(phi) ** 2)
                + scales[2] * np.cos(theta) ** 2
            ),
            0, np.pi / 2, 0, np.pi / 2, epsabs=tol, epsrel=1e-12
        )[0]
    return float(prefactor * value)


def _imhof_tube(scales: np.ndarray, t: float, tol: float = QUAD_TOL) -> float:
    # y_i ~ N(0, 1/(2 a_i)), so |y|^2 is a weighted sum of chi-square variables
    if t == 0:
        return 0.0
    weights = 1 / (2 * scales)
    x = t ** 2
    split = 1 / np.max(weights)

    def phase(u):
        return 0.5 * np.sum(np.arctan(weights * u))

    def envelope(u):
        return 1 / (u * np.prod((1 + (weights * u) ** 2) ** 0.25))

    def integrand(u):
        if u == 0:
            return 0.5 * (np.sum(weights) - x)
        return np.sin(phase(u) - 0.5 * x * u) * envelope(u)

    # smooth head on [0, split], the oscillating tail as two fourier integrals with frequency x / 2
    head = quad(integrand, 0, split, epsabs=tol / 10, epsrel=1e-12, limit=400)[0]
    tail = quad(
        lambda u: np.sin(phase(u)) * envelope(u), split, np.inf, weight="cos", wvar=0.5 * x,
        epsabs=tol / 10, limlst=200
    )[0]
    tail -= quad(
        lambda u: np.cos(phase(u)) * envelope(u), split, np.inf, weight="sin", wvar=0.5 * x,
        epsabs=tol / 10, limlst=200
    )[0]
    return float(0.5 - (head + tail) / np.pi)


######
#
# This function returns vol(S^k + t) / vol(S^n) for the standard great subsphere S^k of S^n
#
######


def sphericalTubeFraction(n: int, k: int, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    # check arguments
    n = check_positive_int(n, "n")
    if k < 0 or k >= n:
        raise WaistError("Argument 'k' must satisfy 0 <= k < n.")
    t_values = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_values < 0) or np.any(t_values > np.pi + 1e-12):
        raise WaistError("Argument 't' must lie in [0, pi].")

    # substituting s = sin^2 turns the slice integral into a regularized incomplete beta function
    clipped = np.minimum(t_values, np.pi / 2)
    values = betainc((n - k) / 2, (k + 1) / 2, np.sin(clipped) ** 2)
    values = np.where(t_values >= np.pi / 2, 1.0, values)

    if np.ndim(t) == 0:
        return float(values[0])
    return values


def sphericalTubeIntegral(n: int, k: int, t: float) -> float:
    """
    Quadrature form vol(S^k) vol(S^{n-k-1}) int_0^t cos^k sin^{n-k-1} / vol(S^n), used to cross-check the closed form.
    """
    t = min(t, np.pi / 2)
    integral = quad(lambda s: np.cos(s) ** k * np.sin(s) ** (n - k - 1), 0, t, epsabs=1e-13, epsrel=1e-12)[0]
    return sphereVolume(k) * sphereVolume(n - k - 1) * integral / sphereVolume(n)


######
#
# This function returns vol(CP^k + t) / vol(CP^n) in the Fubini-Study metric
#
######


def cpTubeFraction(n: int, k: int, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    n = check_positive_int(n, "n")
    if k < 0 or k >= n:
        raise WaistError("Argument 'k' must satisfy 0 <= k < n.")

    # hopf fibers have equal length, so the fraction equals the one of S^{2k+1} in S^{2n+1}
    return sphericalTubeFraction(2 * n + 1, 2 * k + 1, t)


######
#
# This function returns mu(R^m + t) for a radial measure by slicing it into spherical shells
#
######


def radialSubspaceTube(
        spec: MeasureSpec, core_dim: int, t: Union[float, np.ndarray], tol: float = QUAD_TOL
) -> Union[float, np.ndarray]:
    """
    Returns the measure of the Euclidean t-neighborhood of a linear subspace R^m for a radial spec.

    Args:
        spec (MeasureSpec): Radial spec (ball, sphere, radial density, atom-sphere or isotropic gaussian).
        core_dim (int): Dimension m = n - k of the core subspace, 0 <= m < n.
        t (float or array): Nonnegative Euclidean radius or grid.
        tol (float): Absolute tolerance of the quadratures.
    """
    # check arguments
    if not spec.isRadial:
        raise WaistError("Argument 'spec' must be radial.")
    n = spec.dim
    if core_dim < 0 or core_dim >= n:
        raise WaistError("Argument 'core_dim' must satisfy 0 <= core_dim < n.")
    t_values = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_values < 0):
        raise WaistError("Argument 't' must be nonnegative.")

    # isotropic gaussians reduce to the gaussian tube of the normal coordinates
    if spec.kind == "gaussian":
        values = np.atleast_1d(gaussianSubspaceTube(spec.scales[: n - core_dim], t_values, tol))
    else:
        values = np.array([_radial_tube(spec, core_dim, v, tol) for v in t_values])

    values = np.clip(values, 0, 1)
    if np.ndim(t) == 0:
        return float(values[0])
    return values


def _shell_fraction(n: int, core_dim: int, r: float, t: float) -> float:
    # fraction of the sphere of radius r within Euclidean distance t of R^m
    if r <= t:
        return 1.0
    if core_dim == 0:
        return 0.0
    return sphericalTubeFraction(n - 1, core_dim - 1, float(np.arcsin(t / r)))


def _radial_tube(spec: MeasureSpec, core_dim: int, t: float, tol: float = QUAD_TOL) -> float:
    n = spec.dim
    if spec.kind == "sphere":
        return _shell_fraction(n, core_dim, spec.radius, t)
    if spec.kind == "atom-sphere":
        return spec.atom_mass + (1 - spec.atom_mass) * _shell_fraction(n, core_dim, spec.radius, t)
    if spec.kind == "ball":
        # radius density n r^{n-1} / R^n, the inner ball is fully inside
        R = spec.radius
        inner = min(t, R)
        value = (inner / R) ** n
        if t < R:
            value += quad(
                lambda r: n * r ** (n - 1) / R ** n * _shell_fraction(n, core_dim, r, t),
                t, R, epsabs=tol, limit=200
            )[0]
        return value

    # general radial density
    scale = sphereVolume(n - 1) / spec.radialNormalizer()
    upper = np.inf if spec.support_radius is None else spec.support_radius
    inner_upper = min(t, upper)
    value = scale * quad(spec._radial_weight, 0, inner_upper, epsabs=tol, limit=200)[0] if t > 0 else 0.0
    if t < upper:
        value += scale * quad(
            lambda r: spec._radial_weight(r) * _shell_fraction(n, core_dim, r, t),
            t, upper, epsabs=tol, limit=200
        )[0]
    return value


######
#
# This function returns the model tube of a spec, picking the model set for its class
#
######


def modelScales(spec: MeasureSpec, k: int) -> np.ndarray:
    """
    Returns the k smallest gaussian scales, the normal directions of the widest coordinate subspace R^{n-k}.
    """
    return np.sort(spec.scales)[:k]


def modelTube(
        spec: MeasureSpec, k: int, t: np.ndarray, metric: str = "euclidean", tol: float = QUAD_TOL
) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if metric == "geodesic":
        if spec.kind != "sphere":
            raise WaistError("Argument 'metric' may only be 'geodesic' for uniform sphere specs.")
        # S^{n-1-k} inside S^{n-1}
        return np.atleast_1d(sphericalTubeFraction(spec.dim - 1, spec.dim - 1 - k, np.minimum(t, np.pi)))
    if spec.kind == "gaussian":
        return np.atleast_1d(gaussianSubspaceTube(modelScales(spec, k), t, tol))
    return np.atleast_1d(radialSubspaceTube(spec, spec.dim - k, t, tol))


######
#
# This function returns a table of tube fractions for the tube subcommand
#
######


def tubeTable(
        ambient: str, n: int, k: int, t_grid: np.ndarray, scales: list = None, spec: MeasureSpec = None,
        tol: float = QUAD_TOL
) -> pd.DataFrame:
    # compute fractions
    if ambient == "sphere":
        fraction = sphericalTubeFraction(n, k, t_grid)
    elif ambient == "cp":
        fraction = cpTubeFraction(n, k, t_grid)
    elif ambient == "euclidean":
        if spec is not None:
            fraction = radialSubspaceTube(spec, spec.dim - k, t_grid, tol) if spec.kind != "gaussian" \
                else gaussianSubspaceTube(modelScales(spec, k), t_grid, tol)
        else:
            fraction = gaussianSubspaceTube(scales if scales is not None else [1.0] * k, t_grid, tol)
    else:
        raise WaistError("Argument 'ambient' must be one of 'euclidean', 'sphere' or 'cp'.")

    # return dataframe
    return pd.DataFrame({"t": np.asarray(t_grid, dtype=float), "fraction": np.atleast_1d(fraction)})


######
#
# This function checks that every k-subset of sorted scales dominates the smallest scales tube
#
######


def restrictionDominationCheck(scales: list, k: int, t_grid: np.ndarray) -> pd.DataFrame:
    scales = np.sort(np.asarray(scales, dtype=float))[::-1]
    k = check_positive_int(k, "k")
    if k > scales.shape[0]:
        raise WaistError("Argument 'k' must not exceed the number of scales.")

    # model tube of the k smallest scales a_{n-k+1}..a_n
    model = np.atleast_1d(gaussianSubspaceTube(scales[-k:], t_grid))

    # compare every subset
    rows = []
    for subset in itertools.combinations(range(scales.shape[0]), k):
        tube = np.atleast_1d(gaussianSubspaceTube(scales[list(subset)], t_grid))
        for t, value, bound in zip(np.atleast_1d(t_grid), tube, model):
            rows.append({
                "subset": ",".join(str(i) for i in subset),
                "t": float(t),
                "tube": float(value),
                "model": float(bound),
                "holds": bool(value >= bound - 1e-10),
            })

    # return dataframe
    return pd.DataFrame(rows, columns=["subset", "t", "tube", "model", "holds"])


######
#
# These functions return the pancakeness parameter bound and the per pancake ratio bound
#
######


def pancakenessBound(eps: float, R: float) -> float:
    """
    Returns delta = eps^2 / (4 (R + eps)), the closeness that keeps pancake gradients within eps.
    """
    eps = check_nonnegative(eps, "eps")
    R = check_nonnegative(R, "R")
    return eps ** 2 / (4 * (R + eps))


def pancakeRatioBound(scales: list, k: int, t: float, eps: float) -> float:
    """
    Returns tube(t - eps) - eps, the lower bound of gamma(nu_t(c(P)) cap P) / gamma(P) for a delta-pancake.
    """
    scales = np.sort(np.asarray(scales, dtype=float))[:k]
    return float(gaussianSubspaceTube(scales, max(0.0, t - eps)) - eps)
