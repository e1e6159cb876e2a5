"""Kerr-de Sitter geometry in Boyer-Lindquist and horizon-penetrating charts.

Conventions
-----------
Signature is (+, -, -, -): a vector X is timelike when g(X, X) > 0.
Coordinates are ordered (t, r, theta, phi) in the Boyer-Lindquist chart and
(t_+, r, theta, phi_+) in the horizon-penetrating ("Kerr-star") chart.  The
two charts share (r, theta); the time and azimuth differ by radial functions,

    t_+ = t - F_t(r),   phi_+ = phi - F_phi(r),

whose derivatives are pinned near the horizons so that the metric components
stay finite across r = r_- and r = r_+.

The radial horizon function is the quartic

    Delta_r(r) = (r^2 + a^2) (1 - Lambda r^2 / 3) - 2 M0 r,

positive on the domain of outer communications r_- < r < r_+.  The chart
transition is parametrized by a smooth switch S(r) that equals -1 on a collar
around r_-, +1 on a collar around r_+, and interpolates in between:

    F_t'(r)   = (1 + alpha) (r^2 + a^2) S(r) / Delta_r - q0 S(r),
    F_phi'(r) = (1 + alpha) a S(r) / Delta_r.

With q0 = 0 this is the plain horizon-penetrating chart (level sets of t_+
are null on the collars).  A small q0 > 0 tilts the time slices so that every
{t_+ = const} surface is spacelike on the whole extended domain, which is
what the time evolution needs; the tilt is certified numerically when the
chart is built.

All component evaluators broadcast over numpy arrays of (r, theta).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class NotAdmissible(ValueError):
    """Parameters do not produce a black hole/cosmological horizon pair."""


class OutOfChart(ValueError):
    """Point lies outside the validity range of the requested chart."""


class SingularMetric(np.linalg.LinAlgError):
    """Metric inversion failed the conditioning check."""


class ZeroVector(ValueError):
    """Causal classification of the zero vector is undefined."""


class NotProportional(RuntimeError):
    """The horizon acceleration is not parallel to the generator."""


BOYER_LINDQUIST = "boyer_lindquist"
KERR_STAR = "kerr_star"


# ---------------------------------------------------------------------------
# Parameters and horizons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BlackHoleParams:
    """Physical configuration of the hole plus chart extension widths.

    Parameters
    ----------
    m0 : float
        Mass in geometric units, > 0.
    lam : float
        Cosmological constant.  Two positive simple roots of Delta_r exist
        only for lam > 0 (and not too large); admissibility is checked by
        :func:`find_horizons`.
    a : float
        Rotation parameter (dimension of length).
    delta : float or None
        Half-width of the horizon extension: the extended domain is
        [r_- - delta, r_+ + delta].  ``None`` selects 0.05 (r_+ - r_-).
    epsilon : float or None
        Width of the collars on which the chart transition is exactly the
        horizon-regular one.  ``None`` selects 0.05 (r_+ - r_-).
    """

    m0: float = 1.0
    lam: float = 0.06
    a: float = 0.0
    delta: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if not self.m0 > 0:
            raise NotAdmissible(f"mass must be positive, got {self.m0}")
        if self.delta is not None and not self.delta > 0:
            raise NotAdmissible(f"delta must be positive, got {self.delta}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise NotAdmissible(f"epsilon must be positive, got {self.epsilon}")

    @property
    def alpha(self) -> float:
        """Angular deformation alpha = Lambda a^2 / 3 (exact)."""
        return self.lam * self.a ** 2 / 3.0


@dataclass(frozen=True)
class HorizonGeometry:
    """Horizon radii, slopes of Delta_r there, and surface gravities."""

    r_minus: float
    r_plus: float
    d_delta_r_minus: float
    d_delta_r_plus: float
    kappa_minus: float
    kappa_plus: float


def delta_r_coefficients(params: BlackHoleParams) -> np.ndarray:
    """Coefficients of Delta_r in increasing powers of r (length 5)."""
    a2 = params.a ** 2
    return np.array([
        a2,
        -2.0 * params.m0,
        1.0 - params.lam * a2 / 3.0,
        0.0,
        -params.lam / 3.0,
    ])


def delta_r(params: BlackHoleParams, r):
    """Evaluate Delta_r(r) = (r^2 + a^2)(1 - Lambda r^2/3) - 2 M0 r."""
    r = np.asarray(r, dtype=float)
    return (r ** 2 + params.a ** 2) * (1.0 - params.lam * r ** 2 / 3.0) \
        - 2.0 * params.m0 * r


def delta_r_prime(params: BlackHoleParams, r):
    """Radial derivative of Delta_r."""
    r = np.asarray(r, dtype=float)
    return 2.0 * r * (1.0 - params.lam * r ** 2 / 3.0) \
        - 2.0 * params.lam * r * (r ** 2 + params.a ** 2) / 3.0 \
        - 2.0 * params.m0


def delta_theta(params: BlackHoleParams, theta):
    """Delta_theta = 1 + alpha cos^2(theta)."""
    return 1.0 + params.alpha * np.cos(np.asarray(theta, dtype=float)) ** 2


def rho_squared(params: BlackHoleParams, r, theta):
    """rho^2 = r^2 + a^2 cos^2(theta)."""
    r = np.asarray(r, dtype=float)
    return r ** 2 + params.a ** 2 * np.cos(np.asarray(theta, dtype=float)) ** 2


def _polish_root(params: BlackHoleParams, r0: float, tol: float = 1e-14) -> float:
    """Newton-polish a root of Delta_r starting from r0."""
    r = float(r0)
    for _ in range(100):
        f = float(delta_r(params, r))
        fp = float(delta_r_prime(params, r))
        if fp == 0.0:
            break
        step = f / fp
        r -= step
        if abs(step) <= tol * max(abs(r), 1.0):
            break
    return r


@lru_cache(maxsize=256)
def find_horizons(params: BlackHoleParams) -> HorizonGeometry:
    """Locate the event and cosmological horizons r_- < r_+.

    The two largest positive simple roots of Delta_r bracketing a region of
    positivity are selected; Delta_r must be positive between them with
    Delta_r'(r_-) > 0 and Delta_r'(r_+) < 0.

    Raises
    ------
    NotAdmissible
        If no such pair exists (e.g. Lambda <= 0, or the degenerate/naked
        cases where roots merge or disappear).
    """
    if params.lam <= 0.0:
        raise NotAdmissible(
            "Delta_r has a single positive root for Lambda <= 0; "
            "no cosmological horizon")
    coeffs = delta_r_coefficients(params)
    roots = np.polynomial.polynomial.polyroots(coeffs)
    real = roots[np.abs(roots.imag) < 1e-9 * max(1.0, np.abs(roots).max())].real
    positive = np.sort(real[real > 0.0])
    if positive.size < 2:
        raise NotAdmissible(
            f"Delta_r has {positive.size} positive real root(s); need two")
    r_minus = _polish_root(params, positive[-2])
    r_plus = _polish_root(params, positive[-1])
    if not (0.0 < r_minus < r_plus):
        raise NotAdmissible("horizon roots are not ordered and positive")
    mid = 0.5 * (r_minus + r_plus)
    if not delta_r(params, mid) > 0.0:
        raise NotAdmissible("Delta_r is not positive between the candidate roots")
    dm = float(delta_r_prime(params, r_minus))
    dp = float(delta_r_prime(params, r_plus))
    if not (dm > 0.0 and dp < 0.0):
        raise NotAdmissible(
            f"degenerate horizons: Delta_r'(r_-)={dm:.3e}, Delta_r'(r_+)={dp:.3e}")
    kappa_minus, kappa_plus = surface_gravity_from_slopes(params, r_minus, r_plus)
    return HorizonGeometry(
        r_minus=r_minus,
        r_plus=r_plus,
        d_delta_r_minus=dm,
        d_delta_r_plus=dp,
        kappa_minus=kappa_minus,
        kappa_plus=kappa_plus,
    )


def surface_gravity_from_slopes(params: BlackHoleParams,
                                r_minus: float, r_plus: float) -> tuple[float, float]:
    """Surface gravities from the slopes of Delta_r at the horizons.

    kappa = |Delta_r'(r_h)| / (2 (1 + alpha) (r_h^2 + a^2)).  This closed form
    is cross-validated against the covariant-derivative route in
    :func:`surface_gravity`.
    """
    w = 1.0 + params.alpha
    km = abs(float(delta_r_prime(params, r_minus))) / (2.0 * w * (r_minus ** 2 + params.a ** 2))
    kp = abs(float(delta_r_prime(params, r_plus))) / (2.0 * w * (r_plus ** 2 + params.a ** 2))
    return km, kp


def resolve_extension(params: BlackHoleParams) -> BlackHoleParams:
    """Fill in default delta/epsilon and validate them against the horizons."""
    hor = find_horizons(params)
    width = hor.r_plus - hor.r_minus
    delta = params.delta if params.delta is not None else 0.05 * width
    epsilon = params.epsilon if params.epsilon is not None else 0.05 * width
    for name, value in (("delta", delta), ("epsilon", epsilon)):
        if not 0.0 < value < width / 8.0:
            raise NotAdmissible(
                f"{name}={value:.6g} outside (0, (r_+ - r_-)/8) = (0, {width / 8.0:.6g})")
    if params.delta == delta and params.epsilon == epsilon:
        return params
    return BlackHoleParams(m0=params.m0, lam=params.lam, a=params.a,
                           delta=delta, epsilon=epsilon)


# ---------------------------------------------------------------------------
# Points and metric containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpacetimePoint:
    """A point tagged with the chart its coordinates refer to."""

    chart: str
    t: float
    r: float
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if self.chart not in (BOYER_LINDQUIST, KERR_STAR):
            raise ValueError(f"unknown chart {self.chart!r}")
        if not 0.0 < self.theta < math.pi:
            raise OutOfChart(f"theta={self.theta} outside (0, pi)")


@dataclass(frozen=True)
class Metric4:
    """Pointwise 4x4 symmetric metric (or inverse metric) with chart tag."""

    g: np.ndarray
    chart: str
    point: SpacetimePoint | None = None
    contravariant: bool = False

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (4, 4):
            raise ValueError(f"metric must be 4x4, got shape {g.shape}")
        object.__setattr__(self, "g", g)


class CausalClass(enum.Enum):
    TIMELIKE = "timelike"
    NULL = "null"
    SPACELIKE = "spacelike"


# ---------------------------------------------------------------------------
# Chart transition
# ---------------------------------------------------------------------------

def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, exp-flat at both ends."""
    x = np.asarray(x, dtype=float)
    lo = x <= 0.0
    hi = x >= 1.0
    xm = np.clip(x, 1e-12, 1.0 - 1e-12)
    with np.errstate(over="ignore"):
        b0 = np.exp(-1.0 / xm)
        b1 = np.exp(-1.0 / (1.0 - xm))
    out = b0 / (b0 + b1)
    out = np.where(lo, 0.0, np.where(hi, 1.0, out))
    return out


@dataclass(frozen=True)
class ChartTransition:
    """Radial transition functions defining the horizon-penetrating chart.

    ``time_shift`` is the bounded correction q0 subtracted from F_t' (times
    S(r)); the geometric chart uses q0 = 0, the evolution chart uses a small
    positive value so that the t_+ level sets are spacelike everywhere.
    """

    params: BlackHoleParams
    r_minus: float
    r_plus: float
    epsilon: float
    time_shift: float = 0.0

    @property
    def band(self) -> tuple[float, float]:
        """Open interval on which S(r) interpolates between -1 and +1."""
        return (self.r_minus + self.epsilon, self.r_plus - self.epsilon)

    def switch(self, r):
        """S(r): -1 on the inner collar, +1 on the outer collar, smooth."""
        lo, hi = self.band
        return -1.0 + 2.0 * _smooth_step((np.asarray(r, dtype=float) - lo) / (hi - lo))

    def regular_ratio(self, r):
        """(S(r)^2 - 1) / Delta_r, extended by zero outside the band.

        Smooth on the whole extended domain because S^2 - 1 vanishes
        identically on the collars where Delta_r has its zeros.
        """
        r = np.asarray(r, dtype=float)
        s = self.switch(r)
        out = np.zeros_like(s)
        mask = np.abs(s) < 1.0
        if np.any(mask):
            out[mask] = (s[mask] ** 2 - 1.0) / delta_r(self.params, r[mask])
        return out

    def f_t_prime(self, r):
        """F_t'(r) including the time-shift correction.  Diverges at r_pm."""
        r = np.asarray(r, dtype=float)
        s = self.switch(r)
        w = 1.0 + self.params.alpha
        return w * (r ** 2 + self.params.a ** 2) * s / delta_r(self.params, r) \
            - self.time_shift * s

    def f_t_prime_pinned(self, r):
        """The horizon-pinned part of F_t' (no time shift)."""
        r = np.asarray(r, dtype=float)
        w = 1.0 + self.params.alpha
        return w * (r ** 2 + self.params.a ** 2) * self.switch(r) / delta_r(self.params, r)

    def f_phi_prime(self, r):
        """F_phi'(r).  Identically zero when a = 0."""
        r = np.asarray(r, dtype=float)
        w = 1.0 + self.params.alpha
        return w * self.params.a * self.switch(r) / delta_r(self.params, r)

    def time_offset(self, r, r_ref: float | None = None):
        """Integral of the time-shift part, G(r) = q0 * int S, from r_ref.

        This is the offset between the geometric (q0 = 0) and shifted time
        coordinates; bounded and smooth on the whole extended domain.
        """
        from scipy.integrate import quad
        if r_ref is None:
            r_ref = 0.5 * (self.r_minus + self.r_plus)
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.array([
            quad(lambda s: self.time_shift * self.switch(s), r_ref, ri,
                 limit=200)[0]
            for ri in r_arr
        ])
        return out if np.ndim(r) else float(out[0])


def transition_functions(params: BlackHoleParams,
                         time_shift: float = 0.0) -> ChartTransition:
    """Build the chart transition for the given parameters.

    With ``time_shift=0`` the collar conditions hold exactly:
    F_t' = +-(1+alpha)(r^2+a^2)/Delta_r and F_phi' = +-(1+alpha) a/Delta_r
    for |r - r_pm| < epsilon.  A positive ``time_shift`` subtracts
    q0 * S(r) from F_t', which is what makes the time slices spacelike.
    """
    params = resolve_extension(params)
    hor = find_horizons(params)
    return ChartTransition(
        params=params,
        r_minus=hor.r_minus,
        r_plus=hor.r_plus,
        epsilon=params.epsilon,
        time_shift=time_shift,
    )


# ---------------------------------------------------------------------------
# Metric components (vectorized over r, theta)
# ---------------------------------------------------------------------------

def metric_bl_components(params: BlackHoleParams, r, theta) -> np.ndarray:
    """Boyer-Lindquist components, shape (..., 4, 4).  Valid for Delta_r > 0."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    r, theta = np.broadcast_arrays(r, theta)
    a = params.a
    w = 1.0 + params.alpha
    dr = delta_r(params, r)
    dth = delta_theta(params, theta)
    rho2 = rho_squared(params, r, theta)
    sin2 = np.sin(theta) ** 2
    g = np.zeros(r.shape + (4, 4))
    g[..., 0, 0] = (dr - dth * a ** 2 * sin2) / (w ** 2 * rho2)
    g[..., 0, 3] = a * sin2 * (dth * (r ** 2 + a ** 2) - dr) / (w ** 2 * rho2)
    g[..., 3, 0] = g[..., 0, 3]
    g[..., 1, 1] = -rho2 / dr
    g[..., 2, 2] = -rho2 / dth
    g[..., 3, 3] = (dr * a ** 2 * sin2 ** 2
                    - dth * sin2 * (r ** 2 + a ** 2) ** 2) / (w ** 2 * rho2)
    return g


def metric_star_components(params: BlackHoleParams, r, theta,
                           transition: ChartTransition) -> np.ndarray:
    """Horizon-penetrating components, shape (..., 4, 4).

    Every entry is written in a form that is manifestly finite at
    Delta_r = 0, so the evaluation is valid on the whole extended domain.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    r, theta = np.broadcast_arrays(r, theta)
    a = params.a
    w = 1.0 + params.alpha
    q0 = transition.time_shift
    dr = delta_r(params, r)
    dth = delta_theta(params, theta)
    rho2 = rho_squared(params, r, theta)
    sin2 = np.sin(theta) ** 2
    s = transition.switch(r)
    e = transition.regular_ratio(r)

    g = np.zeros(r.shape + (4, 4))
    g[..., 0, 0] = (dr - dth * a ** 2 * sin2) / (w ** 2 * rho2)
    g[..., 0, 3] = a * sin2 * (dth * (r ** 2 + a ** 2) - dr) / (w ** 2 * rho2)
    g[..., 3, 0] = g[..., 0, 3]
    g[..., 2, 2] = -rho2 / dth
    g[..., 3, 3] = (dr * a ** 2 * sin2 ** 2
                    - dth * sin2 * (r ** 2 + a ** 2) ** 2) / (w ** 2 * rho2)
    # Cross terms with dr: the divergent parts of F' cancel analytically.
    c_reg = s / w - dr * q0 * s / (w ** 2 * rho2)
    g[..., 0, 1] = dth * sin2 * a ** 2 * q0 * s / (w ** 2 * rho2) + c_reg
    g[..., 1, 0] = g[..., 0, 1]
    g[..., 1, 3] = -dth * sin2 * (r ** 2 + a ** 2) * a * q0 * s / (w ** 2 * rho2) \
        - a * sin2 * c_reg
    g[..., 3, 1] = g[..., 1, 3]
    g[..., 1, 1] = rho2 * e - 2.0 * q0 * s ** 2 / w \
        + dr * q0 ** 2 * s ** 2 / (w ** 2 * rho2) \
        - dth * sin2 * a ** 2 * q0 ** 2 * s ** 2 / (w ** 2 * rho2)
    return g


def metric_star_pushforward(params: BlackHoleParams, r, theta,
                            transition: ChartTransition) -> np.ndarray:
    """Kerr-star components via the raw Jacobian pushforward of the BL metric.

    Only valid strictly inside (r_-, r_+) where the BL chart exists; used to
    cross-check :func:`metric_star_components` on the overlap.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    r, theta = np.broadcast_arrays(r, theta)
    g_bl = metric_bl_components(params, r, theta)
    jac = np.zeros(r.shape + (4, 4))
    for i in range(4):
        jac[..., i, i] = 1.0
    jac[..., 0, 1] = transition.f_t_prime(r)
    jac[..., 3, 1] = transition.f_phi_prime(r)
    return np.einsum("...ma,...mn,...nb->...ab", jac, g_bl, jac)


def volume_weight(params: BlackHoleParams, r, theta):
    """sqrt|det g| = rho^2 sin(theta) / (1 + alpha)^2, valid in both charts."""
    return rho_squared(params, r, theta) * np.sin(np.asarray(theta, dtype=float)) \
        / (1.0 + params.alpha) ** 2


# ---------------------------------------------------------------------------
# Point-wise public operations
# ---------------------------------------------------------------------------

def metric_bl(params: BlackHoleParams, point: SpacetimePoint) -> Metric4:
    """Metric in the Boyer-Lindquist chart at a point with r in (r_-, r_+)."""
    if point.chart != BOYER_LINDQUIST:
        raise OutOfChart("point is not in the Boyer-Lindquist chart")
    hor = find_horizons(params)
    if not hor.r_minus < point.r < hor.r_plus:
        raise OutOfChart(
            f"r={point.r} outside ({hor.r_minus:.6g}, {hor.r_plus:.6g})")
    g = metric_bl_components(params, point.r, point.theta)
    return Metric4(g=g, chart=BOYER_LINDQUIST, point=point)


def metric_star(params: BlackHoleParams, point: SpacetimePoint,
                transition: ChartTransition | None = None) -> Metric4:
    """Metric in the Kerr-star chart on the extended domain M_delta."""
    if point.chart != KERR_STAR:
        raise OutOfChart("point is not in the Kerr-star chart")
    if transition is None:
        transition = transition_functions(params)
    params = transition.params
    delta = params.delta
    lo, hi = transition.r_minus - delta, transition.r_plus + delta
    if not lo <= point.r <= hi:
        raise OutOfChart(f"r={point.r} outside [{lo:.6g}, {hi:.6g}]")
    g = metric_star_components(params, point.r, point.theta, transition)
    return Metric4(g=g, chart=KERR_STAR, point=point)


def inverse_metric(metric: Metric4) -> Metric4:
    """Invert the metric; the product g . g^{-1} is checked against identity."""
    g = metric.g
    det = np.linalg.det(g)
    if abs(det) < 1e-300:
        raise SingularMetric("metric determinant vanishes")
    ginv = np.linalg.inv(g)
    residual = np.abs(g @ ginv - np.eye(4)).max()
    if residual > 1e-12 * max(1.0, np.abs(ginv).max() * np.abs(g).max()):
        raise SingularMetric(f"inversion residual {residual:.3e} too large")
    return Metric4(g=ginv, chart=metric.chart, point=metric.point,
                   contravariant=not metric.contravariant)


def sqrt_det(metric: Metric4) -> float:
    """sqrt(|det g|) of a covariant metric."""
    return float(np.sqrt(abs(np.linalg.det(metric.g))))


def causal_character(metric: Metric4, x, tol: float = 1e-10) -> CausalClass:
    """Classify a tangent vector by the sign of g(X, X).

    The null band is |g(X,X)| <= tol * ||X||^2 * ||g||, which makes the
    classification invariant under rescaling of X.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise ValueError("tangent vector must have 4 components")
    norm2 = float(x @ x)
    if norm2 == 0.0:
        raise ZeroVector("cannot classify the zero vector")
    q = float(x @ metric.g @ x)
    scale = norm2 * float(np.linalg.norm(metric.g, 2))
    if abs(q) <= tol * scale:
        return CausalClass.NULL
    return CausalClass.TIMELIKE if q > 0.0 else CausalClass.SPACELIKE


def ergosphere_indicator(params: BlackHoleParams, r, theta):
    """g(d_t, d_t) = (Delta_r - a^2 Delta_theta sin^2 theta) / ((1+alpha)^2 rho^2).

    Negative values mark the ergoregion; the sign change surfaces lie O(a)
    close (in r) to the horizons.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return (delta_r(params, r)
            - params.a ** 2 * delta_theta(params, theta) * np.sin(theta) ** 2) \
        / ((1.0 + params.alpha) ** 2 * rho_squared(params, r, theta))


# ---------------------------------------------------------------------------
# Christoffel symbols and surface gravity
# ---------------------------------------------------------------------------

_FD4_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])
_FD4_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0


def metric_derivatives(components, r, theta, h: float = 1e-3) -> np.ndarray:
    """d g_{mu nu} / d x^lam for a stationary axisymmetric component function.

    Parameters
    ----------
    components : callable
        ``components(r, theta) -> (..., 4, 4)`` array of metric components.
    h : float
        Fourth-order central-difference step (same in r and theta).

    Returns
    -------
    ndarray of shape (..., 4, 4, 4): derivative index last;
    entries for d/dt and d/dphi are identically zero.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    r, theta = np.broadcast_arrays(r, theta)
    dg = np.zeros(r.shape + (4, 4, 4))
    for off, wgt in zip(_FD4_OFFSETS, _FD4_WEIGHTS):
        dg[..., 1] += wgt * components(r + off * h, theta)
        dg[..., 2] += wgt * components(r, theta + off * h)
    dg /= h
    return dg


def christoffel_from_components(components, r, theta, h: float = 1e-3) -> np.ndarray:
    """Gamma^mu_{nu sigma} for a stationary axisymmetric metric provider.

    Derivatives of the metric are fourth-order central differences in
    (r, theta); the t and phi derivatives vanish structurally.
    """
    g = components(r, theta)
    ginv = np.linalg.inv(g)
    dg = metric_derivatives(components, r, theta, h=h)
    # Gamma^m_{ns} = 1/2 g^{ml} (d_n g_{ls} + d_s g_{ln} - d_l g_{ns})
    term = np.einsum("...lsn->...lns", dg) + np.einsum("...lns->...lns", dg) \
        - np.einsum("...nsl->...lns", dg)
    return 0.5 * np.einsum("...ml,...lns->...mns", ginv, term)


def christoffel(params: BlackHoleParams, point: SpacetimePoint,
                transition: ChartTransition | None = None,
                h: float = 1e-3) -> np.ndarray:
    """Christoffel symbols of the Kerr-de Sitter metric at a point."""
    if point.chart == BOYER_LINDQUIST:
        comps = lambda rr, th: metric_bl_components(params, rr, th)
    else:
        trans = transition if transition is not None else transition_functions(params)
        comps = lambda rr, th: metric_star_components(trans.params, rr, th, trans)
    return christoffel_from_components(comps, point.r, point.theta, h=h)


def horizon_generator(params: BlackHoleParams, r_h: float) -> np.ndarray:
    """Components of the stationary null generator at a horizon.

    ell = d_t + Omega_h d_phi with Omega_h = a / (r_h^2 + a^2); at a = 0
    this is just d_t.
    """
    omega_h = params.a / (r_h ** 2 + params.a ** 2)
    return np.array([1.0, 0.0, 0.0, omega_h])


def surface_gravity(params: BlackHoleParams, theta: float = 1.3,
                    rel_tol: float = 1e-6) -> tuple[float, float]:
    """Surface gravities (kappa_-, kappa_+) from the covariant derivative.

    At each horizon, nabla_ell ell is computed from Christoffel symbols in
    the horizon-penetrating chart (ell is the stationary generator, equal to
    d_t at a = 0) and verified to be parallel to ell; the proportionality
    constant is kappa.

    Raises
    ------
    NotProportional
        If the non-parallel residual exceeds ``rel_tol`` (a metric or
        Christoffel bug, not a physical configuration).
    """
    params = resolve_extension(params)
    hor = find_horizons(params)
    trans = transition_functions(params)
    comps = lambda rr, th: metric_star_components(params, rr, th, trans)
    kappas = []
    for r_h in (hor.r_minus, hor.r_plus):
        gamma = christoffel_from_components(comps, r_h, theta)
        ell = horizon_generator(params, r_h)
        acc = np.einsum("mns,n,s->m", gamma, ell, ell)
        kappa = float(acc @ ell) / float(ell @ ell)
        residual = np.linalg.norm(acc - kappa * ell)
        if residual > rel_tol * max(abs(kappa), np.linalg.norm(acc)):
            raise NotProportional(
                f"acceleration not parallel to the generator at r={r_h:.6g}: "
                f"residual {residual:.3e} vs kappa {kappa:.3e}")
        if not kappa > 0.0:
            raise NotProportional(f"kappa={kappa:.3e} not positive at r={r_h:.6g}")
        kappas.append(kappa)
    return kappas[0], kappas[1]


# ---------------------------------------------------------------------------
# Slice certification for the evolution chart
# ---------------------------------------------------------------------------

def certify_spacelike_slices(params: BlackHoleParams, transition: ChartTransition,
                             n_r: int = 400, n_theta: int = 9) -> float:
    """Check g^{-1}(dt_+, dt_+) > 0 on a dense sample of the extended domain.

    Returns the minimum of g^{tt} over the sample; raises ``NotAdmissible``
    if the slices fail to be spacelike anywhere (the time_shift is too small
    or too large for these parameters).
    """
    params = transition.params
    delta = params.delta
    r = np.linspace(transition.r_minus - delta, transition.r_plus + delta, n_r)
    theta = np.linspace(0.05, math.pi - 0.05, n_theta)
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    g = metric_star_components(params, rr, tt, transition)
    gtt = np.linalg.inv(g)[..., 0, 0]
    g_min = float(gtt.min())
    if g_min <= 0.0:
        i = np.unravel_index(np.argmin(gtt), gtt.shape)
        raise NotAdmissible(
            f"time slices not spacelike: g^tt={g_min:.3e} at "
            f"r={rr[i]:.6g}, theta={tt[i]:.4g} (time_shift={transition.time_shift})")
    return g_min


def evolution_transition(params: BlackHoleParams,
                         time_shift: float = 0.5) -> ChartTransition:
    """Chart transition with spacelike time slices, certified at construction."""
    trans = transition_functions(params, time_shift=time_shift)
    certify_spacelike_slices(params, trans)
    return trans
