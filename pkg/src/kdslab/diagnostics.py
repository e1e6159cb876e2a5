"""Late-time constants, decay-rate fits, weighted norms, and flux budgets.

These are the measured quantities of the decay story: the constant

    Pi0[f] = (1+alpha) / (4 pi (r_+^2 + r_-^2 + 2a^2)) * int_M f dVol

to which m = 0 forward solutions converge, exponential fit rates of the
ringdown, discrete e^{nu t}-weighted Sobolev norms, and the divergence
budget of the damped current on the truncated domain (whose closure defect
measures discretization error, order >= 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .spacetime import (
    BlackHoleParams,
    find_horizons,
    resolve_extension,
)


class InsufficientData(ValueError):
    """Not enough usable samples for a fit."""


# ---------------------------------------------------------------------------
# The late-time constant
# ---------------------------------------------------------------------------

def pi0(params: BlackHoleParams, source) -> float:
    """Late-time constant of the forward solution for a given source.

    The integral runs over the domain of outer communications M (r between
    the horizons), not the extended domain: support outside (r_-, r_+) does
    not contribute.  Azimuthal modes with m != 0 integrate to zero over phi.

    ``source`` is a :class:`kdslab.solver.SourceSpec`; its mode coefficient
    is integrated with the invariant volume weight rho^2 sin(theta) /
    (1+alpha)^2.
    """
    params = resolve_extension(params)
    hor = find_horizons(params)
    if source.m != 0:
        return 0.0
    w = 1.0 + params.alpha
    t_int = quad(lambda t: float(source.time_envelope(t)),
                 source.t_on, source.t_off, limit=200)[0]
    r_lo = max(hor.r_minus, source.r_center - source.r_width)
    r_hi = min(hor.r_plus, source.r_center + source.r_width)
    if r_hi <= r_lo:
        return 0.0

    def r_part(r, cos2):
        return float(source.radial_profile(r)) * (r ** 2 + params.a ** 2 * cos2)

    # int b(r) p(th) (r^2 + a^2 cos^2 th) sin th dr dth                (exact split)
    r2_int = quad(lambda r: float(source.radial_profile(r)) * r ** 2,
                  r_lo, r_hi, limit=200)[0]
    r0_int = quad(lambda r: float(source.radial_profile(r)),
                  r_lo, r_hi, limit=200)[0]
    th1_int = quad(lambda th: float(source.angular_profile(th)) * math.sin(th),
                   0.0, math.pi, limit=200)[0]
    th_cos2_int = quad(lambda th: float(source.angular_profile(th))
                       * math.cos(th) ** 2 * math.sin(th),
                       0.0, math.pi, limit=200)[0]
    spatial = r2_int * th1_int + params.a ** 2 * r0_int * th_cos2_int
    integral = source.amplitude * t_int * spatial * 2.0 * math.pi / w ** 2
    return float(w / (4.0 * math.pi * (hor.r_plus ** 2 + hor.r_minus ** 2
                                       + 2.0 * params.a ** 2)) * integral)


# ---------------------------------------------------------------------------
# Decay-rate fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    """Result of a log-linear exponential fit."""

    nu: float
    amplitude: float
    t_start: float
    t_end: float
    residual: float
    good: bool
    oscillatory: bool
    period: float | None = None
    n_points: int = 0

    def to_record(self) -> dict:
        return {
            "nu_fit": self.nu,
            "amplitude": self.amplitude,
            "window": [self.t_start, self.t_end],
            "log_residual": self.residual,
            "good": self.good,
            "oscillatory": self.oscillatory,
            "period": self.period,
            "n_points": self.n_points,
        }


def _envelope(times: np.ndarray, values: np.ndarray):
    """Strict local maxima of |values| (the ringdown envelope)."""
    mags = np.abs(values)
    idx = np.nonzero((mags[1:-1] > mags[:-2]) & (mags[1:-1] >= mags[2:]))[0] + 1
    return times[idx], mags[idx]


def decay_fit(times, values, c: float = 0.0, t_min: float | None = None,
              t_max: float | None = None, floor: float = 1e-13,
              residual_cap: float = 0.1) -> DecayFit:
    """Fit |values - c| ~ A e^{-nu t} on [t_min, t_max].

    Oscillatory signals are fit on their envelope (local maxima); smooth
    monotone signals on all samples.  The fit refuses (good=False) when the
    log-space RMS residual exceeds ``residual_cap`` or when a detectable
    oscillation leaves fewer than three periods in the window.

    Raises
    ------
    InsufficientData
        Fewer than four usable points after masking.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values)
    y = np.abs(values - c)
    mask = y > floor
    if t_min is not None:
        mask &= times >= t_min
    if t_max is not None:
        mask &= times <= t_max
    t_use, y_use = times[mask], y[mask]
    if t_use.size < 4:
        raise InsufficientData(
            f"only {t_use.size} samples above the floor in the window")

    t_pk, y_pk = _envelope(t_use, y_use)
    oscillatory = t_pk.size >= 5
    period = None
    if oscillatory:
        spacing = np.diff(t_pk)
        period = 2.0 * float(np.median(spacing))
        t_fit, y_fit = t_pk, y_pk
    else:
        t_fit, y_fit = t_use, y_use
    if t_fit.size < 4:
        t_fit, y_fit = t_use, y_use
        oscillatory = False

    coeffs = np.polyfit(t_fit, np.log(y_fit), 1)
    fit_res = float(np.sqrt(np.mean(
        (np.log(y_fit) - np.polyval(coeffs, t_fit)) ** 2)))
    nu = -float(coeffs[0])
    good = fit_res <= residual_cap
    if oscillatory and period is not None:
        if (t_fit[-1] - t_fit[0]) < 3.0 * period:
            good = False
    return DecayFit(
        nu=nu,
        amplitude=float(np.exp(coeffs[1])),
        t_start=float(t_fit[0]),
        t_end=float(t_fit[-1]),
        residual=fit_res,
        good=good,
        oscillatory=oscillatory,
        period=period,
        n_points=int(t_fit.size),
    )


# ---------------------------------------------------------------------------
# Weighted Sobolev norms of recorded runs
# ---------------------------------------------------------------------------

def weighted_norm(run, s: int, nu: float, region: str = "all") -> float:
    """Discrete e^{nu t}-weighted H^s norm over the recorded snapshots.

    Derivatives are the solver's stencils: time derivatives use the stored
    v (and snapshot differences for the second order), space derivatives are
    centered differences.  ``region`` is "all" (the full grid) or "core"
    (strictly between the horizons-plus-delta, mirroring a cutoff to the
    compact core).

    ``run`` is a :class:`kdslab.solver.RunResult`.
    """
    if s not in (0, 1, 2):
        raise ValueError("s must be 0, 1, or 2")
    grid = run.grid
    h_r, h_t = grid.h_r, grid.h_theta
    times = run.snapshot_times
    if times.size < 3:
        raise InsufficientData("need at least three snapshots")

    if region == "core" and "core_range" in run.meta:
        lo, hi = run.meta["core_range"]
        mask = (grid.r[:, None] >= lo) & (grid.r[:, None] <= hi)
    else:
        mask = np.ones((grid.r.size, 1), dtype=bool)

    from .spacetime import volume_weight
    if run.provider_name == "minkowski":
        w = np.ones(grid.shape)
    else:
        w = volume_weight(run.meta["params"], grid.r[:, None],
                          grid.theta[None, :]) \
            if "params" in run.meta else np.ones(grid.shape)

    def spatial_derivs(q):
        out = [np.gradient(q, h_r, axis=0, edge_order=2),
               np.gradient(q, h_t, axis=1, edge_order=2)]
        return out

    # trapezoid in r (endpoint nodes carry half weight); the offset theta
    # grid is already a midpoint rule
    r_weight = np.ones((grid.r.size, 1))
    r_weight[0, 0] = r_weight[-1, 0] = 0.5

    total = 0.0
    dt_snap = float(times[1] - times[0])
    for i, t in enumerate(times):
        u, v = run.snapshots[i]
        terms = [u]
        if s >= 1:
            terms.append(v)
            terms.extend(spatial_derivs(u))
        if s >= 2:
            if 0 < i < times.size - 1:
                vdot = (run.snapshots[i + 1][1] - run.snapshots[i - 1][1]) \
                    / (times[i + 1] - times[i - 1])
            elif i == 0:
                vdot = (run.snapshots[1][1] - v) / (times[1] - times[0])
            else:
                vdot = (v - run.snapshots[i - 1][1]) / (times[i] - times[i - 1])
            terms.append(vdot)
            terms.extend(spatial_derivs(v))
            dr_u, dt_u = spatial_derivs(u)
            terms.extend(spatial_derivs(dr_u))
            terms.append(np.gradient(dt_u, h_t, axis=1, edge_order=2))
        dens = sum(np.abs(term) ** 2 for term in terms) * w * mask * r_weight
        slab = float(np.sum(dens)) * h_r * h_t * 2.0 * math.pi
        weight_t = 0.5 if i in (0, times.size - 1) else 1.0
        total += weight_t * dt_snap * math.exp(2.0 * nu * t) * slab
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# Divergence budgets on truncated spacetime regions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluxBudget:
    """Divergence-theorem budget for V = e^{2 nu t} chi J_X(u)."""

    interior: float
    cap_final: float
    cap_initial: float
    side_outer: float
    side_inner: float
    defect: float
    pieces: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {
            "interior": self.interior,
            "cap_final": self.cap_final,
            "cap_initial": self.cap_initial,
            "side_outer": self.side_outer,
            "side_inner": self.side_inner,
            "closure_defect": self.defect,
        }
        rec.update(self.pieces)
        return rec


def budget_report(params: BlackHoleParams, run, nu: float = 0.0,
                  strength_chi: bool = True) -> FluxBudget:
    """Assemble the divergence budget of the damped red-shift current.

    The region is the recorded time range times the whole grid; V =
    e^{2 nu t} chi(r) J_X(u) with X the red-shift multiplier (transported to
    the run's chart) and chi the collar cutoff (1 outside K_delta, 0 near
    K_{2 delta}).  The boundary total is

        [cap at t_end] - [cap at t_start] + [outer side] - [inner side],

    each a coordinate-normal flux; the interior integral uses the pointwise
    divergence identity Div J_X = (Xu) Box u + K^X(grad u, grad u) plus the
    chi and e^{2 nu t} gradient terms.  The closure defect contracts at the
    discretization order.
    """
    from .energy import deformation_components, redshift_field
    from .solver import KerrStarProvider, ModeSolver, gradient_covector

    params = resolve_extension(params)
    hor = find_horizons(params)
    grid = run.grid
    provider = KerrStarProvider(params, time_shift=run.meta.get("time_shift", 0.5))
    solver = ModeSolver(provider, grid, run.m)
    trans = provider.transition
    delta = params.delta

    x_geo = redshift_field(params)
    r_col = grid.r[:, None]
    th_col = grid.theta[None, :]
    xv = x_geo.eval(r_col, th_col) * np.ones(grid.shape + (1,))
    q0 = trans.time_shift
    s_prof = trans.switch(grid.r)[:, None] * np.ones(grid.shape)
    x_solver = np.zeros(grid.shape + (4,))
    x_solver[..., 0] = xv[..., 0] + q0 * s_prof * xv[..., 1]
    x_solver[..., 1] = xv[..., 1]

    # chi: 1 outside K_delta, 0 inside K_{2delta}-ish (same ramp as the
    # damping support); chi' by finite differences of the smooth profile.
    from .solver import _bump

    def chi_of_r(r):
        r = np.asarray(r, dtype=float)
        ramp_out = np.where(r >= hor.r_plus - delta, 1.0,
                            _bump((r - (hor.r_plus - delta)) / delta))
        ramp_in = np.where(r <= hor.r_minus + delta, 1.0,
                           _bump((r - (hor.r_minus + delta)) / delta))
        return np.where(r > 0.5 * (hor.r_minus + hor.r_plus), ramp_out, ramp_in)

    if strength_chi:
        chi = chi_of_r(grid.r)
        h_fd = 1e-5
        chi_prime = (chi_of_r(grid.r + h_fd) - chi_of_r(grid.r - h_fd)) / (2 * h_fd)
    else:
        chi = np.ones_like(grid.r)
        chi_prime = np.zeros_like(grid.r)
    chi2 = chi[:, None] * np.ones(grid.shape)
    chip2 = chi_prime[:, None] * np.ones(grid.shape)

    comps = lambda rr, th: provider.components(rr, th)
    k_tensor = deformation_components(comps, _shifted_field(x_geo, trans),
                                      r_col * np.ones(grid.shape),
                                      th_col * np.ones(grid.shape))

    ginv = np.zeros(grid.shape + (4, 4))
    ginv[..., 0, 0] = solver.gtt
    ginv[..., 0, 1] = ginv[..., 1, 0] = solver.gtr
    ginv[..., 0, 3] = ginv[..., 3, 0] = solver.gtp
    ginv[..., 1, 1] = solver.grr
    ginv[..., 1, 3] = ginv[..., 3, 1] = solver.grp
    ginv[..., 2, 2] = solver.gthth
    ginv[..., 3, 3] = solver.gpp

    source_spec = run.meta.get("source", None)

    def currents(u, v, t):
        du = np.stack(gradient_covector(solver, u, v), axis=-1)
        grad = np.einsum("...ab,...b->...a", ginv, du)
        xu = np.einsum("...a,...a->...", x_solver, du)
        grad2 = np.real(np.einsum("...a,...a->...", np.conj(du), grad))
        j = np.real(xu[..., None] * np.conj(grad)) \
            - 0.5 * grad2[..., None] * x_solver
        if source_spec is not None:
            f = source_spec.spatial(grid) * source_spec.time_envelope(t)
        else:
            f = np.zeros_like(u)
        xu_f = np.real(xu * np.conj(f))
        kterm = np.real(np.einsum("...a,...ab,...b->...",
                                  np.conj(grad), k_tensor, grad))
        return j, xu_f, kterm

    hh = grid.h_r * grid.h_theta * 2.0 * math.pi
    times = run.snapshot_times
    caps, sides_out, sides_in, divs = [], [], [], []
    for i, t in enumerate(times):
        u, v = run.snapshots[i]
        j, xu_f, kterm = currents(u, v, t)
        eterm = math.exp(2.0 * nu * t)
        caps.append(eterm * float(np.sum(chi2 * j[..., 0] * solver.w)) * hh)
        sides_out.append(eterm * float(np.sum(
            chi[-1] * j[-1, :, 1] * solver.w[-1]))
            * grid.h_theta * 2.0 * math.pi)
        sides_in.append(eterm * float(np.sum(
            chi[0] * j[0, :, 1] * solver.w[0]))
            * grid.h_theta * 2.0 * math.pi)
        div_density = eterm * (2.0 * nu * chi2 * j[..., 0]
                               + chip2 * j[..., 1]
                               + chi2 * (xu_f + kterm))
        divs.append(float(np.sum(div_density * solver.w)) * hh)

    dt_snap = np.diff(times)
    trap = lambda arr: float(np.sum(0.5 * (np.asarray(arr)[1:]
                                           + np.asarray(arr)[:-1]) * dt_snap))
    interior = trap(divs)
    side_outer = trap(sides_out)
    side_inner = trap(sides_in)
    boundary = caps[-1] - caps[0] + side_outer - side_inner
    return FluxBudget(
        interior=interior,
        cap_final=caps[-1],
        cap_initial=caps[0],
        side_outer=side_outer,
        side_inner=side_inner,
        defect=abs(interior - boundary),
        pieces={"caps": caps, "n_snapshots": len(caps)},
    )


def _shifted_field(x_geo, trans):
    """Red-shift field components transported to the shifted chart."""
    from .energy import VectorFieldSpec

    q0 = trans.time_shift

    def comp(r, theta):
        xv = x_geo.eval(r, theta)
        s = trans.switch(np.asarray(r, dtype=float))
        out = np.array(xv, copy=True)
        out[..., 0] = xv[..., 0] + q0 * s * xv[..., 1]
        return out

    def deriv(r, theta):
        dxv = x_geo.eval_derivatives(r, theta)
        xv = x_geo.eval(r, theta)
        r = np.asarray(r, dtype=float)
        s = trans.switch(r)
        h = 1e-6
        ds = (trans.switch(r + h) - trans.switch(r - h)) / (2 * h)
        out = np.array(dxv, copy=True)
        out[..., 0, 0] = dxv[..., 0, 0] + q0 * (ds * xv[..., 1]
                                                + s * dxv[..., 1, 0])
        return out

    return VectorFieldSpec(chart=x_geo.chart, components=comp,
                           derivatives=deriv, name=x_geo.name + "+shift")


# ---------------------------------------------------------------------------
# Convergence studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    """Observed Richardson orders for a scenario across resolutions."""

    resolutions: list
    observables: dict
    orders: dict
    expected: dict
    passed: bool
    failures: list

    def to_record(self) -> dict:
        return {
            "resolutions": list(self.resolutions),
            "observables": {key: list(val) for key, val in self.observables.items()},
            "orders": self.orders,
            "expected": self.expected,
            "passed": self.passed,
            "failures": self.failures,
        }


def convergence_runner(scenario, resolutions, expected_orders: dict,
                       order_tol: float = 0.35) -> ConvergenceReport:
    """Run a scenario at >= 3 resolutions and measure observed orders.

    ``scenario(resolution) -> dict`` maps a resolution to scalar
    observables.  For each observable named in ``expected_orders`` the
    Richardson triple order log2(|q1-q2|/|q2-q3|) is computed from the last
    three resolutions (which must halve the step); the report fails if any
    observed order misses its expectation by more than ``order_tol``.
    """
    if len(resolutions) < 3:
        raise ValueError("need at least three resolutions")
    results = [scenario(res) for res in resolutions]
    names = results[0].keys()
    observables = {name: [res[name] for res in results] for name in names}
    orders = {}
    failures = []
    for name, target in expected_orders.items():
        q1, q2, q3 = observables[name][-3], observables[name][-2], observables[name][-1]
        num, den = abs(q1 - q2), abs(q2 - q3)
        if den == 0:
            orders[name] = float("inf")
            continue
        order = math.log2(num / den)
        orders[name] = order
        if abs(order - target) > order_tol:
            failures.append(
                f"{name}: observed order {order:.2f}, expected {target:.2f}")
    return ConvergenceReport(
        resolutions=list(resolutions),
        observables=observables,
        orders=orders,
        expected=dict(expected_orders),
        passed=not failures,
        failures=failures,
    )
