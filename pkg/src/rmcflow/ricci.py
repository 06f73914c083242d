"""Volume-normalized Ricci flow for warped-product spheres.

The flow dg/dt = -2 Ric + (2 rbar / (n+1)) g reduces on the profile pair
(b, phi) to

    db/dt   = b   * (rbar/(n+1) - n K_rad)
    dphi/dt = phi * (rbar/(n+1) - K_rad - (n-1) K_orb)

which is the same reduction as the familiar db/dt = n (phi_ss / phi) b +
rbar b / (n+1) form, but expressed through the curvature eigenvalues.
Writing it this way makes a grid-constant curvature field a discretely
exact fixed point: on a round profile the right side is the profile times
a number that vanishes to rounding, with no stencil remainder.

Time stepping is classical four-stage Runge-Kutta with the mean scalar
curvature recomputed at every stage, under an explicit parabolic step-size
limit dt <= cfl_factor * (min arclength spacing)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .errors import PoleSingularity, StepRejected
from .stencils import LD
from .warped import (
    AmbientMetric, ProfileSampler, curvature, curvature_gradients,
    volume_and_diameter,
)

__all__ = [
    "AmbientFlowSeries", "DELTA_GRID", "c0_candidates", "cfl_limit",
    "decay_fit", "nrf_rhs", "nrf_step", "regauge_arclength", "run_nrf",
]

# exponents delta0 for the sup |Rm_0|^2 R^(delta0 - 2) candidate constants
DELTA_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

AMBIENT_CSV_HEADER = "t,rbar,maxE,maxGradRm,V,diam"


def nrf_rhs(metric, curv=None):
    """Right side of the normalized flow. Returns (rhs_b, rhs_phi, curv).

    Passing a precomputed curvature of the same metric avoids the repeated
    evaluation when the caller already has it (the integrator reuses the
    end-of-step curvature as the next first stage).
    """
    if curv is None:
        curv = curvature(metric)
    coef = curv.rbar / LD(metric.n + 1)
    rhs_b = metric.b * (coef - metric.n * curv.k_rad)
    rhs_phi = metric.phi * (coef - curv.ric_orb)
    return rhs_b, rhs_phi, curv


def cfl_limit(metric, cfl_factor=0.2):
    """Largest admissible explicit step for the current profile."""
    ds_min = float(np.min(metric.b)) * float(metric.dx)
    return cfl_factor * ds_min * ds_min


def regauge_arclength(metric, points=None):
    """Reparametrize the radial coordinate to uniform arclength density.

    The flow preserves b only up to the pointwise normalization term, so
    long runs can concentrate meridian arclength.  Regauging interpolates
    phi onto the parameter in which s is linear and sets b to the constant
    total length, leaving the geometry unchanged up to the interpolation
    error of the degree-7 local polynomials (float64, so a regauged run
    gives up the extended-precision flatness of the grid fixed point).
    The uniformizing map comes from a Simpson arclength on an 8x refined
    intermediate grid inverted by a cubic spline, so its error sits well
    below the working truncation error; on a metric whose b is already
    uniform the map is the identity and phi passes through unchanged.

    Anything expressed in the old chart must move with it.  points, if
    given, is an array of old radial coordinates (e.g. hypersurface
    nodes); the return value is then (metric, mapped_points) where
    mapped_points = s(points)/L are the same physical points in the new
    chart.
    """
    m1 = metric.num_nodes
    refine = 8
    x_dense = np.linspace(0.0, 1.0, refine * (m1 - 1) + 1)
    b_samp = ProfileSampler(np.asarray(metric.b, dtype=float),
                            float(metric.dx), "even")
    b_dense, _, _ = b_samp(x_dense)
    s_dense = cumulative_simpson(b_dense, x=x_dense, initial=0.0)
    total = s_dense[-1]
    target_s = np.linspace(0.0, total, m1)
    x_of_s = CubicSpline(s_dense, x_dense)(target_s)
    x_of_s[0], x_of_s[-1] = 0.0, 1.0
    x_grid = np.asarray(metric.x, dtype=float)
    near = np.abs(x_of_s - x_grid) < 1e-9 * float(metric.dx)
    x_of_s[near] = x_grid[near]
    phi_samp = ProfileSampler(np.asarray(metric.phi, dtype=float),
                              float(metric.dx), "odd")
    phi_new, _, _ = phi_samp(x_of_s)
    phi_new[0], phi_new[-1] = 0.0, 0.0
    b_new = np.full(m1, LD(total))
    out = AmbientMetric(metric.n, b_new, phi_new)
    if points is None:
        return out
    s_of_x = CubicSpline(x_dense, s_dense)
    mapped = np.clip(s_of_x(np.asarray(points, dtype=float)) / total,
                     0.0, 1.0)
    return out, mapped


def nrf_step(metric, dt, cfl_factor=0.2, curv=None):
    """One classical RK4 step of the normalized flow.

    Rejects the step (StepRejected) when dt exceeds the parabolic limit,
    when the profile loses interior positivity, or when a pole slope
    defect |phi_s -+ 1| beyond 0.1 shows the sphere no longer closes
    smoothly enough to trust the discretization.  The poles of phi are
    re-clamped to exact zero afterwards; they stay there to rounding
    anyway because dphi/dt is proportional to phi.
    """
    limit = cfl_limit(metric, cfl_factor)
    if dt > limit * (1.0 + 1e-12):
        raise StepRejected(
            f"dt = {dt:.6e} exceeds the parabolic limit {limit:.6e}")
    dtl = LD(dt)
    n = metric.n

    def rhs(b, phi, pre=None):
        return nrf_rhs(AmbientMetric(n=n, b=b, phi=phi), curv=pre)

    try:
        k1b, k1p, _ = rhs(metric.b, metric.phi, pre=curv)
        k2b, k2p, _ = rhs(metric.b + 0.5 * dtl * k1b,
                          metric.phi + 0.5 * dtl * k1p)
        k3b, k3p, _ = rhs(metric.b + 0.5 * dtl * k2b,
                          metric.phi + 0.5 * dtl * k2p)
        k4b, k4p, _ = rhs(metric.b + dtl * k3b, metric.phi + dtl * k3p)
    except PoleSingularity as exc:
        raise StepRejected(str(exc)) from exc
    sixth = dtl / LD(6)
    b = metric.b + sixth * (k1b + 2 * k2b + 2 * k3b + k4b)
    phi = metric.phi + sixth * (k1p + 2 * k2p + 2 * k3p + k4p)
    phi[0] = LD(0)
    phi[-1] = LD(0)
    return AmbientMetric(n=n, b=b, phi=phi)


def c0_candidates(curv, deltas=DELTA_GRID):
    """sup over the grid of |Rm_0|^2 R^(delta - 2) for each exponent.

    |Rm_0|^2 is the traceless curvature norm.  Exponents are keyed by
    their one-decimal value.  Non-positive scalar curvature anywhere makes
    every candidate infinite (the weight is undefined there).
    """
    tr = curv.traceless_rm2()
    scal = curv.scal
    out = {}
    if np.any(scal <= 0):
        for d in deltas:
            out[round(float(d), 1)] = math.inf
        return out
    for d in deltas:
        weight = scal ** LD(float(d) - 2.0)
        out[round(float(d), 1)] = float(np.max(tr * weight))
    return out


@dataclass
class AmbientFlowSeries:
    """Sampled monitors of one normalized-flow run."""

    n: int
    times: list = field(default_factory=list)
    rbar: list = field(default_factory=list)
    max_e: list = field(default_factory=list)
    max_grad_rm: list = field(default_factory=list)
    vol: list = field(default_factory=list)
    diam: list = field(default_factory=list)
    c0: dict = field(default_factory=dict)        # delta -> list of sups
    steps: int = 0
    min_rbar_step: float = 0.0   # most negative per-step rbar increment
    vol_drift: float = 0.0       # max relative volume deviation from start
    snapshots: list = field(default_factory=list)  # (t, AmbientMetric)

    def write_csv(self, path):
        lines = [AMBIENT_CSV_HEADER]
        for i in range(len(self.times)):
            row = (self.times[i], self.rbar[i], self.max_e[i],
                   self.max_grad_rm[i], self.vol[i], self.diam[i])
            lines.append(",".join(f"{v:.15g}" for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    def write_c0_csv(self, path):
        deltas = sorted(self.c0)
        header = "t," + ",".join(f"c0_{d:g}" for d in deltas)
        lines = [header]
        for i in range(len(self.times)):
            row = [self.times[i]] + [self.c0[d][i] for d in deltas]
            lines.append(",".join(f"{v:.15g}" for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def run_nrf(metric, horizon, cfl_factor=0.2, stride=50, e_floor=None,
            snapshot_times=(), keep_initial_snapshot=False):
    """Evolve a metric by the normalized flow and sample its monitors.

    Ends at the horizon, or earlier once the closeness monitor maxE drops
    below e_floor.  Monitors are sampled every `stride` steps and at the
    final time.  snapshot_times forces the integrator to land on those
    times exactly (the step is clipped) and stores a metric copy at each;
    the clipping keeps snapshot times matched across resolutions, which
    the refinement studies rely on.

    maxE measures distance to the round metric of the same mean scalar
    curvature, |Rm - Rm_round(rbar / (n(n+1)))| in sup norm.
    """
    g = metric.copy()
    n = g.n
    series = AmbientFlowSeries(n=n)
    events = sorted(set(float(tt) for tt in snapshot_times))
    for tt in events:
        if tt <= 0.0 or tt > horizon * (1.0 + 1e-12):
            raise ValueError(f"snapshot time {tt} outside (0, horizon]")
    if keep_initial_snapshot:
        series.snapshots.append((0.0, g.copy()))

    curv = curvature(g)
    vol0 = float(curv.vol)
    prev_rbar = float(curv.rbar)
    min_inc = math.inf
    last_recorded = -1

    def record(t, g, curv):
        _, _, grad_rm2 = curvature_gradients(g, curv)
        kref = curv.rbar / LD(n * (n + 1))
        series.times.append(float(t))
        series.rbar.append(float(curv.rbar))
        series.max_e.append(float(np.sqrt(np.max(curv.e2(kref)))))
        series.max_grad_rm.append(float(np.sqrt(np.max(grad_rm2))))
        vol, diam = volume_and_diameter(g)
        series.vol.append(vol)
        series.diam.append(diam)
        for d, val in c0_candidates(curv).items():
            series.c0.setdefault(d, []).append(val)

    record(0.0, g, curv)
    last_recorded = 0

    t = 0.0
    ev_i = 0
    step = 0
    stop = False
    while t < horizon * (1.0 - 1e-15) and not stop:
        dt = cfl_limit(g, cfl_factor)
        bound = horizon
        if ev_i < len(events):
            bound = min(bound, events[ev_i])
        landed = False
        if t + dt >= bound * (1.0 - 1e-15):
            dt = bound - t
            landed = True
        g = nrf_step(g, dt, cfl_factor=cfl_factor, curv=curv)
        t = bound if landed else t + dt
        step += 1
        curv = curvature(g)

        rb = float(curv.rbar)
        min_inc = min(min_inc, rb - prev_rbar)
        prev_rbar = rb
        drift = abs(float(curv.vol) - vol0) / vol0
        series.vol_drift = max(series.vol_drift, drift)

        if landed and ev_i < len(events) and bound == events[ev_i]:
            series.snapshots.append((t, g.copy()))
            ev_i += 1

        at_end = t >= horizon * (1.0 - 1e-15)
        if step % stride == 0 or at_end:
            record(t, g, curv)
            last_recorded = step
            if e_floor is not None and series.max_e[-1] < e_floor:
                stop = True

    if last_recorded != step:
        record(t, g, curv)
    series.steps = step
    series.min_rbar_step = 0.0 if math.isinf(min_inc) else min_inc
    return series


def decay_fit(times, values, tail=1.0):
    """Exponential decay rate by least squares on log values.

    Fits log v = c - rate * t over the final `tail` fraction of the
    samples and returns (rate, r2).  Requires at least 10 samples in the
    window, all strictly positive; a series that is not positive has no
    log-linear description and raises ValueError.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-d of equal length")
    if not 0.0 < tail <= 1.0:
        raise ValueError("tail must be in (0, 1]")
    start = int(round(len(t) * (1.0 - tail)))
    t = t[start:]
    v = v[start:]
    if len(t) < 10:
        raise ValueError("decay fit needs at least 10 samples")
    if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
        raise ValueError("decay fit needs strictly positive finite values")
    y = np.log(v)
    coeffs, residuals, _, _ = np.linalg.lstsq(
        np.column_stack([t, np.ones_like(t)]), y, rcond=None)
    slope = coeffs[0]
    fit = t * slope + coeffs[1]
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot <= 1e-28:
        r2 = 1.0 if ss_res <= 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return -float(slope), r2
