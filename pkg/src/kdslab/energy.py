"""Energy currents, deformation tensors, and the red-shift multiplier field.

The machinery here is the multiplier-method toolbox for the wave equation:
the stress-energy tensor T_{grad u}(X, Y), the current J_X(u) defined by
g(J_X, Y) = T(X, Y), the deformation tensor

    K^X = 1/2 L_X g - 1/4 Tr(g^{-1} L_X g) g,

and the pointwise divergence identity

    Div J_X(u) = (Xu) Box_g u + K^X(grad u, grad u),

all verified numerically in the test suite.  The red-shift multiplier is a
stationary timelike field defined on the two collars M_delta \\ K_{2delta}
around the horizons whose deformation tensor is negative definite; rather
than asserting a formula, :func:`certify_redshift` checks the defining
properties on a dense sample and reports margins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spacetime import (
    KERR_STAR,
    BlackHoleParams,
    ChartTransition,
    Metric4,
    find_horizons,
    metric_star_components,
    resolve_extension,
    transition_functions,
    volume_weight,
)


class CertificationFailed(RuntimeError):
    """Red-shift field certification found a violating sample point."""


# ---------------------------------------------------------------------------
# Vector fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorFieldSpec:
    """Stationary axisymmetric vector field X^mu(r, theta).

    Stationarity is structural: the component functions take no time
    argument, so [X, d_t] = 0 by construction.

    Parameters
    ----------
    chart : str
        Chart the components refer to.
    components : callable
        ``components(r, theta) -> (..., 4)``.
    derivatives : callable or None
        ``derivatives(r, theta) -> (..., 4, 2)`` holding (d/dr, d/dtheta) of
        each component.  ``None`` selects a finite-difference fallback.
    name : str
        Human-readable tag used in reports.
    """

    chart: str
    components: Callable
    derivatives: Callable | None = None
    name: str = ""

    def eval(self, r, theta) -> np.ndarray:
        return np.asarray(self.components(r, theta), dtype=float)

    def eval_derivatives(self, r, theta, h: float = 1e-5) -> np.ndarray:
        if self.derivatives is not None:
            return np.asarray(self.derivatives(r, theta), dtype=float)
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        d = np.empty(np.broadcast(r, theta).shape + (4, 2))
        d[..., 0] = (self.eval(r + h, theta) - self.eval(r - h, theta)) / (2 * h)
        d[..., 1] = (self.eval(r, theta + h) - self.eval(r, theta - h)) / (2 * h)
        return d


def killing_t(chart: str = KERR_STAR) -> VectorFieldSpec:
    """The stationarity Killing field d_t."""
    def comp(r, theta):
        shape = np.broadcast(np.asarray(r), np.asarray(theta)).shape
        out = np.zeros(shape + (4,))
        out[..., 0] = 1.0
        return out

    def deriv(r, theta):
        shape = np.broadcast(np.asarray(r), np.asarray(theta)).shape
        return np.zeros(shape + (4, 2))

    return VectorFieldSpec(chart=chart, components=comp, derivatives=deriv,
                           name="d_t")


def killing_phi(chart: str = KERR_STAR) -> VectorFieldSpec:
    """The axisymmetry Killing field d_phi."""
    def comp(r, theta):
        shape = np.broadcast(np.asarray(r), np.asarray(theta)).shape
        out = np.zeros(shape + (4,))
        out[..., 3] = 1.0
        return out

    def deriv(r, theta):
        shape = np.broadcast(np.asarray(r), np.asarray(theta)).shape
        return np.zeros(shape + (4, 2))

    return VectorFieldSpec(chart=chart, components=comp, derivatives=deriv,
                           name="d_phi")


# ---------------------------------------------------------------------------
# Stress-energy and currents (pointwise)
# ---------------------------------------------------------------------------

def stress_energy(metric: Metric4, du, x, y) -> float:
    """T_{grad u}(X, Y) = (Xu)(Yu) - 1/2 g(grad u, grad u) g(X, Y)."""
    du = np.asarray(du, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = metric.g
    ginv = np.linalg.inv(g)
    xu = float(x @ du)
    yu = float(y @ du)
    grad2 = float(du @ ginv @ du)
    return xu * yu - 0.5 * grad2 * float(x @ g @ y)


def current_j(metric: Metric4, du, x) -> np.ndarray:
    """The current J_X(u) with g(J_X, Y) = T_{grad u}(X, Y) for all Y.

    J = (Xu) grad u - 1/2 g(grad u, grad u) X.
    """
    du = np.asarray(du, dtype=float)
    x = np.asarray(x, dtype=float)
    ginv = np.linalg.inv(metric.g)
    grad_u = ginv @ du
    xu = float(x @ du)
    grad2 = float(du @ grad_u)
    return xu * grad_u - 0.5 * grad2 * x


# ---------------------------------------------------------------------------
# Lie derivative and deformation tensor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeformationTensor:
    """K^X and the Lie derivative it was assembled from, at one point."""

    k: np.ndarray
    lie: np.ndarray
    point_r: float
    point_theta: float

    def trace_defect(self, ginv: np.ndarray) -> float:
        """|Tr(g^{-1} K) + 1/2 Tr(g^{-1} L_X g)| consistency of the two tensors."""
        tr_k = float(np.einsum("ab,ab->", ginv, self.k))
        tr_l = float(np.einsum("ab,ab->", ginv, self.lie))
        return abs(tr_k + 0.5 * tr_l)


def lie_derivative_metric(components, x_field: VectorFieldSpec, r, theta,
                          h: float = 1e-3) -> np.ndarray:
    """(L_X g)_{mn} = X^s d_s g_{mn} + g_{sn} d_m X^s + g_{ms} d_n X^s.

    ``components(r, theta) -> (..., 4, 4)`` supplies the metric; both the
    metric and the field are stationary and axisymmetric, so only r and
    theta derivatives contribute.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    shape = np.broadcast(r, theta).shape
    g = components(r, theta)
    xv = x_field.eval(r, theta)
    dxv = x_field.eval_derivatives(r, theta)

    # 4th-order central differences of the metric in (r, theta).
    offsets = np.array([-2.0, -1.0, 1.0, 2.0])
    weights = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    dg = np.zeros(shape + (4, 4, 4))
    for off, wgt in zip(offsets, weights):
        dg[..., 1] += wgt * components(r + off * h, theta)
        dg[..., 2] += wgt * components(r, theta + off * h)
    dg /= h

    # dX[..., m, s] = d_m X^s; rows m = t, phi vanish by stationarity.
    dx = np.zeros(shape + (4, 4))
    dx[..., 1, :] = dxv[..., :, 0]
    dx[..., 2, :] = dxv[..., :, 1]

    lie = np.einsum("...s,...mns->...mn", xv, dg)
    lie += np.einsum("...sn,...ms->...mn", g, dx)
    lie += np.einsum("...ms,...ns->...mn", g, dx)
    return lie


def deformation(components, x_field: VectorFieldSpec, r, theta,
                h: float = 1e-3) -> DeformationTensor:
    """Assemble K^X = 1/2 L_X g - 1/4 Tr(g^{-1} L_X g) g at a point."""
    lie = lie_derivative_metric(components, x_field, r, theta, h=h)
    g = components(r, theta)
    ginv = np.linalg.inv(g)
    trace = np.einsum("...ab,...ab->...", ginv, lie)
    k = 0.5 * lie - 0.25 * trace[..., None, None] * g
    return DeformationTensor(k=k, lie=lie, point_r=float(np.mean(r)),
                             point_theta=float(np.mean(theta)))


def deformation_components(components, x_field: VectorFieldSpec, r, theta,
                           h: float = 1e-3) -> np.ndarray:
    """Vectorized K^X(r, theta) without the wrapper dataclass."""
    lie = lie_derivative_metric(components, x_field, r, theta, h=h)
    g = components(r, theta)
    ginv = np.linalg.inv(g)
    trace = np.einsum("...ab,...ab->...", ginv, lie)
    return 0.5 * lie - 0.25 * trace[..., None, None] * g


def orthonormal_frame(g: np.ndarray) -> np.ndarray:
    """Columns of the result are a g-orthonormal frame (eigenvector scaling).

    For signature (1,3) the frame satisfies g(e_a, e_b) = diag(+1,-1,-1,-1)
    up to ordering of the spacelike legs.
    """
    evals, evecs = np.linalg.eigh(g)
    if np.any(np.abs(evals) < 1e-300):
        raise np.linalg.LinAlgError("degenerate metric; no orthonormal frame")
    order = np.argsort(-evals, axis=-1)  # timelike (positive) eigenvalue first
    evals = np.take_along_axis(evals, order, axis=-1)
    evecs = np.take_along_axis(evecs, order[..., None, :], axis=-1)
    return evecs / np.sqrt(np.abs(evals))[..., None, :]


def negdef_check(k: np.ndarray, g: np.ndarray, tol: float = 1e-8) -> bool:
    """True iff the quadratic form V -> K(V, V) is negative definite.

    Eigenvalues are taken in a g-orthonormal frame so the threshold ``tol``
    is meaningful independently of coordinate scalings.
    """
    return bool(max_frame_eigenvalue(k, g) < -tol)


def max_frame_eigenvalue(k: np.ndarray, g: np.ndarray):
    """Largest eigenvalue of K in a g-orthonormal frame (vectorized)."""
    frame = orthonormal_frame(g)
    k_frame = np.einsum("...ia,...ij,...jb->...ab", frame, k, frame)
    k_frame = 0.5 * (k_frame + np.swapaxes(k_frame, -1, -2))
    return np.linalg.eigvalsh(k_frame)[..., -1]


# ---------------------------------------------------------------------------
# Red-shift multiplier field
# ---------------------------------------------------------------------------

def redshift_field(params: BlackHoleParams,
                   sigma0: float = 2.5,
                   sigma1: float | None = None,
                   slope: float = 0.5,
                   zero_time_gradient: bool = False) -> VectorFieldSpec:
    """Stationary multiplier X = X_t(r) d_t + X_r(r) d_r on the two collars.

    With xi the inward distance from the nearest horizon (xi = r_+ - r on the
    outer collar, r - r_- on the inner one, negative beyond the horizons):

        X_t = 1 + sigma0 xi + sigma1 xi^3,
        X_r = sign (1 + slope xi),      sign = +1 at r_+, -1 at r_-.

    This realizes X_t(r_pm) = 1, X_r(r_pm) = +-1, d_r X_t of sign -+ with
    magnitude sigma0 at the horizons (growing inward), and d_r X_r < 0.  The
    cubic term strengthens the time gradient deep in the collar where the
    bare horizon value is no longer sufficient.  Admissibility is decided by
    :func:`certify_redshift`, not by these formulas.

    ``zero_time_gradient=True`` zeroes d_r X_t (sigma0 = sigma1 = 0); this is
    the negative control under which certification must fail.
    """
    hor = find_horizons(params)
    r_minus, r_plus = hor.r_minus, hor.r_plus
    r_mid = 0.5 * (r_minus + r_plus)
    params = resolve_extension(params)
    if sigma1 is None:
        sigma1 = 0.87 * sigma0 / (2.0 * params.delta) ** 2
    if zero_time_gradient:
        sigma0 = sigma1 = 0.0

    def _xi_sign(r):
        r = np.asarray(r, dtype=float)
        outer = r > r_mid
        xi = np.where(outer, r_plus - r, r - r_minus)
        sign = np.where(outer, 1.0, -1.0)
        return xi, sign

    def comp(r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        shape = np.broadcast(r, theta).shape
        xi, sign = _xi_sign(np.broadcast_to(r, shape))
        out = np.zeros(shape + (4,))
        out[..., 0] = 1.0 + sigma0 * xi + sigma1 * xi ** 3
        out[..., 1] = sign * (1.0 + slope * xi)
        return out

    def deriv(r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        shape = np.broadcast(r, theta).shape
        xi, sign = _xi_sign(np.broadcast_to(r, shape))
        dxi = -sign  # d xi / d r
        out = np.zeros(shape + (4, 2))
        out[..., 0, 0] = (sigma0 + 3.0 * sigma1 * xi ** 2) * dxi
        out[..., 1, 0] = sign * slope * dxi
        return out

    label = "redshift(sigma0=%g, sigma1=%g, slope=%g)" % (sigma0, sigma1, slope)
    return VectorFieldSpec(chart=KERR_STAR, components=comp, derivatives=deriv,
                           name=label)


@dataclass(frozen=True)
class CertificationReport:
    """Outcome of the red-shift certification sweep."""

    passed: bool
    n_samples: int
    min_timelike: float
    min_dt: float
    min_dr_signed: float
    max_k_eigenvalue: float
    trace_defect_max: float
    field_name: str
    failure: str | None = None
    failure_point: tuple[float, float] | None = None

    def to_record(self) -> dict:
        return {
            "passed": self.passed,
            "n_samples": self.n_samples,
            "min_timelike": self.min_timelike,
            "min_dt": self.min_dt,
            "min_dr_signed": self.min_dr_signed,
            "max_k_eigenvalue": self.max_k_eigenvalue,
            "trace_defect_max": self.trace_defect_max,
            "field": self.field_name,
            "failure": self.failure,
            "failure_point": self.failure_point,
        }


def collar_sample(params: BlackHoleParams, n_samples: int,
                  seed: int | None = 0) -> tuple[np.ndarray, np.ndarray]:
    """Sample points (r, theta) covering M_delta \\ K_{2delta}.

    Deterministic stratified sampling: a uniform grid over the two radial
    collars crossed with an offset theta grid, jittered within cells when a
    seed is given.
    """
    params = resolve_extension(params)
    hor = find_horizons(params)
    delta = params.delta
    per_side = n_samples // 2
    n_theta = max(8, int(np.sqrt(per_side / 4)))
    n_r = max(8, per_side // n_theta)
    rng = np.random.default_rng(seed)
    rs, ths = [], []
    for lo, hi in ((hor.r_minus - delta, hor.r_minus + 2 * delta),
                   (hor.r_plus - 2 * delta, hor.r_plus + delta)):
        r_edges = np.linspace(lo, hi, n_r + 1)
        t_edges = np.linspace(0.0, np.pi, n_theta + 1)
        r_cells = 0.5 * (r_edges[:-1] + r_edges[1:])
        t_cells = 0.5 * (t_edges[:-1] + t_edges[1:])
        rr, tt = np.meshgrid(r_cells, t_cells, indexing="ij")
        if seed is not None:
            rr = rr + (rng.random(rr.shape) - 0.5) * (r_edges[1] - r_edges[0])
            tt = tt + (rng.random(tt.shape) - 0.5) * 0.9 * (t_edges[1] - t_edges[0])
        rs.append(rr.ravel())
        ths.append(tt.ravel())
    return np.concatenate(rs), np.concatenate(ths)


def certify_redshift(params: BlackHoleParams,
                     x_field: VectorFieldSpec | None = None,
                     n_samples: int = 10_000,
                     seed: int | None = 0,
                     eig_tol: float = 1e-8,
                     raise_on_failure: bool = True) -> CertificationReport:
    """Certify the red-shift field properties on M_delta \\ K_{2delta}.

    Checks at every sample point: X timelike, dt_+(X) > 0, +-dr(X) > 0 on
    the respective collar, and K^X negative definite (all orthonormal-frame
    eigenvalues below -``eig_tol``).

    Raises
    ------
    CertificationFailed
        On the first violated property (with the violating point), unless
        ``raise_on_failure`` is False.
    """
    params = resolve_extension(params)
    if x_field is None:
        x_field = redshift_field(params)
    trans = transition_functions(params)
    comps = lambda rr, th: metric_star_components(params, rr, th, trans)
    r, theta = collar_sample(params, n_samples, seed=seed)
    r_mid = 0.5 * (trans.r_minus + trans.r_plus)

    g = comps(r, theta)
    xv = x_field.eval(r, theta)
    timelike = np.einsum("...a,...ab,...b->...", xv, g, xv)
    dt_x = xv[..., 0]
    side = np.where(r > r_mid, 1.0, -1.0)
    dr_signed = side * xv[..., 1]

    lie = lie_derivative_metric(comps, x_field, r, theta)
    ginv = np.linalg.inv(g)
    trace = np.einsum("...ab,...ab->...", ginv, lie)
    k = 0.5 * lie - 0.25 * trace[..., None, None] * g
    max_eig = max_frame_eigenvalue(k, g)
    tr_defect = np.abs(np.einsum("...ab,...ab->...", ginv, k) + 0.5 * trace)

    checks = (
        ("timelike", timelike, lambda v: v > 0.0),
        ("dt_positive", dt_x, lambda v: v > 0.0),
        ("dr_signed", dr_signed, lambda v: v > 0.0),
        ("k_negative_definite", -max_eig, lambda v: v > eig_tol),
    )
    failure = None
    failure_point = None
    for name, values, ok in checks:
        bad = ~ok(values)
        if np.any(bad):
            i = int(np.argmax(bad))
            failure = name
            failure_point = (float(r[i]), float(theta[i]))
            break

    report = CertificationReport(
        passed=failure is None,
        n_samples=int(r.size),
        min_timelike=float(timelike.min()),
        min_dt=float(dt_x.min()),
        min_dr_signed=float(dr_signed.min()),
        max_k_eigenvalue=float(max_eig.max()),
        trace_defect_max=float(tr_defect.max()),
        field_name=x_field.name,
        failure=failure,
        failure_point=failure_point,
    )
    if failure is not None and raise_on_failure:
        raise CertificationFailed(
            f"{failure} violated at r={failure_point[0]:.6g}, "
            f"theta={failure_point[1]:.4g} ({x_field.name})")
    return report


# ---------------------------------------------------------------------------
# Divergence identity and flux integrals for analytic test functions
# ---------------------------------------------------------------------------

def _gradient_fd(u, t, r, theta, phi, h):
    """Second-order centered 4-gradient of a scalar callable u(t,r,theta,phi)."""
    return np.array([
        (u(t + h, r, theta, phi) - u(t - h, r, theta, phi)) / (2 * h),
        (u(t, r + h, theta, phi) - u(t, r - h, theta, phi)) / (2 * h),
        (u(t, r, theta + h, phi) - u(t, r, theta - h, phi)) / (2 * h),
        (u(t, r, theta, phi + h) - u(t, r, theta, phi - h)) / (2 * h),
    ])


def _box_g_fd(components, weight, u, t, r, theta, phi, h):
    """Discrete Box_g u = w^{-1} d_mu (w g^{mu nu} d_nu u), centered, step h."""
    def flux(tt, rr, th, ph):
        g = components(rr, th)
        ginv = np.linalg.inv(g)
        du = _gradient_fd(u, tt, rr, th, ph, h)
        return weight(rr, th) * (ginv @ du)

    coords = (t, r, theta, phi)
    out = 0.0
    for mu in range(4):
        up = list(coords)
        dn = list(coords)
        up[mu] += h
        dn[mu] -= h
        out += (flux(*up)[mu] - flux(*dn)[mu]) / (2 * h)
    return out / weight(r, theta)


def divergence_identity_residual(components, weight, x_field: VectorFieldSpec,
                                 u, t: float, r: float, theta: float,
                                 phi: float = 0.0, h: float = 1e-2) -> float:
    """|Div J_X(u) - (Xu) Box_g u - K^X(grad u, grad u)| at one point.

    Every piece is discretized with centered differences at step ``h``; the
    residual contracts at O(h^2) for smooth data.
    """
    def current(tt, rr, th, ph):
        g = components(rr, th)
        ginv = np.linalg.inv(g)
        du = _gradient_fd(u, tt, rr, th, ph, h)
        grad_u = ginv @ du
        xv = x_field.eval(rr, th)
        return (xv @ du) * grad_u - 0.5 * (du @ grad_u) * xv

    coords = (t, r, theta, phi)
    div_j = 0.0
    for mu in range(4):
        up = list(coords)
        dn = list(coords)
        up[mu] += h
        dn[mu] -= h
        wj_up = weight(up[1], up[2]) * current(*up)[mu]
        wj_dn = weight(dn[1], dn[2]) * current(*dn)[mu]
        div_j += (wj_up - wj_dn) / (2 * h)
    div_j /= weight(r, theta)

    du = _gradient_fd(u, t, r, theta, phi, h)
    xv = x_field.eval(r, theta)
    xu = float(xv @ du)
    box_u = _box_g_fd(components, weight, u, t, r, theta, phi, h)

    g = components(r, theta)
    ginv = np.linalg.inv(g)
    grad_u = ginv @ du
    k = deformation_components(components, x_field, r, theta, h=h)
    k_term = float(grad_u @ k @ grad_u)
    return abs(div_j - xu * box_u - k_term)


def flux_integral(components, weight, x_field: VectorFieldSpec, u,
                  surface: tuple, h: float = 1e-3,
                  n_quad: tuple[int, int] = (48, 48),
                  t_range: tuple[float, float] = (0.0, 1.0)) -> float:
    """Flux of J_X(u) through a coordinate surface.

    The flux is computed as the coordinate-normal contraction
    int J^{mu_N} w dSigma, which stays finite on null surfaces (the unit
    normal convention degenerates there); on non-null surfaces this equals
    the unit-normal flux.

    Parameters
    ----------
    surface : tuple
        ``("t", T, (r_lo, r_hi))`` for a time slice restricted to a radial
        window, ``("r", r0, orientation)`` for a radius level set with
        orientation +1 (outward in +r) or -1, and u evaluated over
        ``t_range``.
    u : callable
        Analytic test function ``u(t, r, theta, phi)``.
    """
    kind = surface[0]
    nodes_a, wts_a = np.polynomial.legendre.leggauss(n_quad[0])
    nodes_b, wts_b = np.polynomial.legendre.leggauss(n_quad[1])

    def current_at(t, r, theta, phi):
        g = components(r, theta)
        ginv = np.linalg.inv(g)
        du = _gradient_fd(u, t, r, theta, phi, h)
        grad_u = ginv @ du
        xv = x_field.eval(r, theta)
        return (xv @ du) * grad_u - 0.5 * (du @ grad_u) * xv

    total = 0.0
    if kind == "t":
        _, t0, (r_lo, r_hi) = surface
        r_q = 0.5 * (r_hi - r_lo) * nodes_a + 0.5 * (r_hi + r_lo)
        w_r = 0.5 * (r_hi - r_lo) * wts_a
        th_q = 0.5 * np.pi * nodes_b + 0.5 * np.pi
        w_th = 0.5 * np.pi * wts_b
        for ri, wri in zip(r_q, w_r):
            for ti, wti in zip(th_q, w_th):
                j = current_at(t0, ri, ti, 0.0)
                total += wri * wti * j[0] * weight(ri, ti)
        return 2.0 * np.pi * total
    if kind == "r":
        _, r0, orientation = surface
        t_lo, t_hi = t_range
        t_q = 0.5 * (t_hi - t_lo) * nodes_a + 0.5 * (t_hi + t_lo)
        w_t = 0.5 * (t_hi - t_lo) * wts_a
        th_q = 0.5 * np.pi * nodes_b + 0.5 * np.pi
        w_th = 0.5 * np.pi * wts_b
        for ti, wti in zip(t_q, w_t):
            for hi, whi in zip(th_q, w_th):
                j = current_at(ti, r0, hi, 0.0)
                total += wti * whi * j[1] * weight(r0, hi)
        return 2.0 * np.pi * orientation * total
    raise ValueError(f"unsupported surface {surface!r}")


def divergence_theorem_defect(components, weight, vector_fn,
                              box: tuple, n: int = 24) -> tuple[float, float, float]:
    """Interior integral of Div V versus total boundary flux on a 4-box.

    ``vector_fn(t, r, theta, phi) -> (..., 4)`` is an arbitrary smooth field
    (vectorized over coordinate arrays); the box is
    ((t0,t1), (r0,r1), (th0,th1), (ph0,ph1)).  Returns (interior, boundary,
    |interior - boundary|); both integrals use midpoint quadrature and
    centered differences, so the defect is O(h^2).
    """
    ranges = box
    widths = np.array([hi - lo for lo, hi in ranges])
    grids = [np.linspace(lo, hi, n + 1) for lo, hi in ranges]
    mids = [0.5 * (gg[:-1] + gg[1:]) for gg in grids]
    hs = widths / n

    def w_vec(t, r, th, ph):
        return np.asarray(weight(r, th))[..., None] * np.asarray(vector_fn(t, r, th, ph))

    cell_vol = float(np.prod(hs))
    tm, rm, thm, phm = np.meshgrid(*mids, indexing="ij")
    interior = 0.0
    for mu, hmu in enumerate(hs):
        up = [tm, rm, thm, phm]
        dn = [tm.copy(), rm.copy(), thm.copy(), phm.copy()]
        up = [c.copy() for c in up]
        up[mu] += 0.5 * hmu
        dn[mu] -= 0.5 * hmu
        f_up = w_vec(*up)[..., mu]
        f_dn = w_vec(*dn)[..., mu]
        interior += float(np.sum(f_up - f_dn)) / hmu * cell_vol

    boundary = 0.0
    for mu in range(4):
        other = [i for i in range(4) if i != mu]
        mg = np.meshgrid(*[mids[i] for i in other], indexing="ij")
        area = float(np.prod([hs[i] for i in other]))
        for side, coord in ((1.0, ranges[mu][1]), (-1.0, ranges[mu][0])):
            pts: list = [None] * 4
            for idx, i in enumerate(other):
                pts[i] = mg[idx]
            pts[mu] = np.full(mg[0].shape, coord)
            vals = w_vec(*pts)[..., mu]
            boundary += side * float(np.sum(vals)) * area
    return interior, boundary, abs(interior - boundary)
