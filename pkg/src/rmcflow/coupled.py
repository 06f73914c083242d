"""Coupled evolution: normalized ambient flow plus mean-curvature flow.

One coupled step is first-order operator splitting: the ambient metric
advances by the volume-normalized flow, then the hypersurface advances
by -H nu measured against the updated metric.  The hypersurface keeps
its own (x, alpha) coordinates, so no transport of curve data is needed
when the metric changes.

The run loop owns the adaptive step size (the tighter of the two
parabolic limits), detects extinction of the hypersurface, and can
redistribute curve nodes when the induced spacing degrades.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import StepRejected
from .hypersurface import (
    PinchingParams,
    ProfileCurve,
    mcf_cfl_limit,
    mcf_step,
    mcf_step_auto,
    resample,
    shape,
    spacing_ratio,
)
from .ricci import cfl_limit, nrf_step, regauge_arclength
from .stencils import LD
from .warped import AmbientMetric, AmbientSampler, curvature

__all__ = [
    "COUPLED_CSV_HEADER", "ClassifyThresholds", "CoupledSeries", "FlowState",
    "SHRINK", "TOTALLY_GEODESIC", "UNDETERMINED", "classify_outcome",
    "coupled_step", "run_coupled",
]

COUPLED_CSV_HEADER = ("t,Hmax,Hmin,maxA2,maxTraceless,maxP,maxFsigma,"
                      "maxGradH2,minSectional,maxE_ambient,rbar")

SHRINK = "ShrinkToRoundPoint"
TOTALLY_GEODESIC = "TotallyGeodesicLimit"
UNDETERMINED = "Undetermined"

# fraction by which the joint step stays inside both parabolic limits,
# absorbing the drift of the curve limit across the ambient sub-step
DT_SAFETY = 0.995


@dataclass
class FlowState:
    """Metric, hypersurface, clock, and pinching constants of one run."""

    metric: AmbientMetric
    curve: ProfileCurve
    t: float = 0.0
    params: PinchingParams = None

    def __post_init__(self):
        if self.params is None:
            self.params = PinchingParams(n=self.metric.n)
        if self.params.n != self.metric.n:
            raise ValueError("params.n must match the ambient dimension")

    def copy(self):
        return FlowState(self.metric.copy(), self.curve.copy(), self.t,
                         self.params)


@dataclass
class ClassifyThresholds:
    """Desk-scale proxies for the two limiting behaviours."""

    h_blowup: float = 50.0
    roundness: float = 0.05
    geodesic: float = 0.02
    sustain_fraction: float = 0.2
    min_samples: int = 8


@dataclass
class CoupledSeries:
    """Sampled monitors of one coupled run."""

    n: int
    times: list = field(default_factory=list)
    hmax: list = field(default_factory=list)
    hmin: list = field(default_factory=list)
    max_a2: list = field(default_factory=list)
    max_traceless: list = field(default_factory=list)
    max_p: list = field(default_factory=list)
    max_f_sigma: list = field(default_factory=list)
    max_grad_h2: list = field(default_factory=list)
    min_sectional: list = field(default_factory=list)
    max_e_ambient: list = field(default_factory=list)
    rbar: list = field(default_factory=list)
    steps: int = 0
    extinct: bool = False
    extinction_time: float = None
    resample_count: int = 0
    resample_times: list = field(default_factory=list)
    regauge_count: int = 0
    regauge_times: list = field(default_factory=list)
    min_rbar_step: float = 0.0
    vol_drift: float = 0.0
    frozen_ambient: bool = False
    final_state: FlowState = None
    snapshots: list = field(default_factory=list)  # (t, FlowState)

    def write_csv(self, path):
        lines = [COUPLED_CSV_HEADER]
        for i in range(len(self.times)):
            row = (self.times[i], self.hmax[i], self.hmin[i], self.max_a2[i],
                   self.max_traceless[i], self.max_p[i], self.max_f_sigma[i],
                   self.max_grad_h2[i], self.min_sectional[i],
                   self.max_e_ambient[i], self.rbar[i])
            lines.append(",".join(f"{v:.15g}" for v in row))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def coupled_step(state, dt, cfl_factor=0.2, freeze_ambient=False, curv=None):
    """Advance metric then curve by the same dt; returns a new FlowState.

    A rejection from either sub-step is re-raised tagged with the failing
    sub-system so callers can tell a metric CFL violation from a curve
    degeneration."""
    if freeze_ambient:
        metric2 = state.metric
    else:
        try:
            metric2 = nrf_step(state.metric, dt, cfl_factor=cfl_factor,
                               curv=curv)
        except StepRejected as exc:
            raise StepRejected(f"ambient: {exc}") from exc
    try:
        curve2 = mcf_step(state.curve, metric2, dt, cfl_factor=cfl_factor)
    except StepRejected as exc:
        raise StepRejected(f"hypersurface: {exc}") from exc
    return FlowState(metric2, curve2, state.t + dt, state.params)


def run_coupled(state, horizon, cfl_factor=0.2, stride=50,
                freeze_ambient=False, rho_stop=0.02, spacing_limit=2.0,
                dt_max=None, snapshot_times=(), keep_initial_snapshot=False,
                regauge_every=None):
    """Evolve the coupled system and sample the monitor columns.

    The step size is DT_SAFETY times the tighter of the ambient and curve
    parabolic limits (optionally capped by dt_max, e.g. for refinement
    studies), clipped to land exactly on snapshot times and the horizon.
    The run ends at the horizon or at extinction, detected when the
    largest orbit radius of the hypersurface falls to rho_stop; the
    extinction time is then extrapolated by the shrinking-sphere law
    rho^2 ~ 2n (T - t).  spacing_limit = None disables node
    redistribution (verification runs need an unchanged parametrization).
    regauge_every applies the arclength regauge to the ambient grid every
    that many steps (unfrozen runs only); times are logged so residual
    windows can avoid them, like resamples.
    """
    st = state.copy()
    n = st.metric.n
    series = CoupledSeries(n=n, frozen_ambient=freeze_ambient)
    events = sorted(set(float(tt) for tt in snapshot_times))
    for tt in events:
        if tt <= st.t or tt > horizon * (1.0 + 1e-12):
            raise ValueError(f"snapshot time {tt} outside (t0, horizon]")
    if keep_initial_snapshot:
        series.snapshots.append((st.t, st.copy()))

    curv = curvature(st.metric)
    samp = AmbientSampler(st.metric, curv)
    vol0 = float(curv.vol)
    prev_rbar = float(curv.rbar)
    min_inc = math.inf

    def quick_rho_max(curve):
        phi = samp.metric_fields(curve.x)[2]
        return float(np.max(phi * np.sin(curve.alpha)))

    def record(t, rep, curv):
        kref = curv.rbar / LD(n * (n + 1))
        series.times.append(float(t))
        series.hmax.append(rep.hmax)
        series.hmin.append(rep.hmin)
        series.max_a2.append(rep.max_a2)
        series.max_traceless.append(rep.max_traceless)
        series.max_p.append(rep.max_p)
        series.max_f_sigma.append(rep.max_f_sigma)
        series.max_grad_h2.append(rep.max_grad_h2)
        series.min_sectional.append(rep.min_sectional_value)
        series.max_e_ambient.append(float(np.sqrt(np.max(curv.e2(kref)))))
        series.rbar.append(float(curv.rbar))
        return rep

    rep = shape(st.curve, samp, st.params)
    record(st.t, rep, curv)
    rho_max = float(np.max(rep.rho))
    recorded_at = st.t

    ev_i = 0
    step = 0
    while st.t < horizon * (1.0 - 1e-15):
        bound = horizon
        if ev_i < len(events):
            bound = min(bound, events[ev_i])
        cap = bound - st.t
        if dt_max is not None:
            cap = min(cap, dt_max)
        if freeze_ambient:
            # single-frame fast path: the curve limit is the only
            # constraint, so the frame serves both the bound and the step
            curve2, dt = mcf_step_auto(st.curve, samp, cfl_factor,
                                       dt_cap=cap)
            st = FlowState(st.metric, curve2, st.t + dt, st.params)
        else:
            # inlined coupled step so the post-step curvature is computed
            # once and shared by the curve sampler, the monitors, and the
            # first stage of the next ambient step
            dt = DT_SAFETY * min(cfl_limit(st.metric, cfl_factor),
                                 mcf_cfl_limit(st.curve, samp, cfl_factor))
            dt = min(dt, cap)
            try:
                metric2 = nrf_step(st.metric, dt, cfl_factor=cfl_factor,
                                   curv=curv)
            except StepRejected as exc:
                raise StepRejected(f"ambient: {exc}") from exc
            curv = curvature(metric2)
            samp = AmbientSampler(metric2, curv)
            try:
                curve2 = mcf_step(st.curve, samp, dt, cfl_factor=cfl_factor)
            except StepRejected as exc:
                raise StepRejected(f"hypersurface: {exc}") from exc
            st = FlowState(metric2, curve2, st.t + dt, st.params)
            rb = float(curv.rbar)
            min_inc = min(min_inc, rb - prev_rbar)
            prev_rbar = rb
            drift = abs(float(curv.vol) - vol0) / vol0
            series.vol_drift = max(series.vol_drift, drift)
        landed = st.t + 0.5 * dt >= bound and dt >= cap * (1.0 - 1e-12)
        if landed:
            st.t = bound
        step += 1

        if landed and ev_i < len(events) and bound == events[ev_i]:
            series.snapshots.append((st.t, st.copy()))
            ev_i += 1

        at_end = st.t >= horizon * (1.0 - 1e-15)
        if rho_max < 6.0 * rho_stop:
            rho_max = quick_rho_max(st.curve)
        if step % stride == 0 or at_end or rho_max <= rho_stop:
            rep = shape(st.curve, samp, st.params)
            rho_max = float(np.max(rep.rho))
            if step % stride == 0 or at_end:
                record(st.t, rep, curv)
                recorded_at = st.t
            if rho_max <= rho_stop:
                series.extinct = True
                series.extinction_time = st.t + rho_max * rho_max / (2.0 * n)
                if recorded_at != st.t:
                    record(st.t, rep, curv)
                    recorded_at = st.t
                break
            if spacing_limit is not None and step % stride == 0:
                if spacing_ratio(st.curve, samp) > spacing_limit:
                    st = FlowState(st.metric, resample(st.curve, samp),
                                   st.t, st.params)
                    series.resample_count += 1
                    series.resample_times.append(st.t)

        if (regauge_every is not None and not freeze_ambient and not at_end
                and step % regauge_every == 0):
            # the curve is stored in ambient coordinates, so it has to be
            # carried through the chart change with the metric
            metric3, x_new = regauge_arclength(st.metric, points=st.curve.x)
            curve3 = ProfileCurve(x_new, st.curve.alpha.copy(),
                                  st.curve.topology)
            st = FlowState(metric3, curve3, st.t, st.params)
            curv = curvature(metric3)
            samp = AmbientSampler(metric3, curv)
            prev_rbar = float(curv.rbar)
            series.regauge_count += 1
            series.regauge_times.append(st.t)

    if recorded_at != st.t:
        rep = shape(st.curve, samp, st.params)
        record(st.t, rep, curv)
    series.steps = step
    series.min_rbar_step = 0.0 if math.isinf(min_inc) else min_inc
    series.final_state = st
    return series


def classify_outcome(series, thresholds=None):
    """Sort a finished run into the two limiting behaviours.

    Shrink-to-round-point: sup |H| passed the blow-up threshold and the
    scale-free roundness ratio n*traceless/H^2 is small at the final
    sample.  Totally-geodesic limit: |H| and |A| sit below the geodesic
    threshold for an unbroken final stretch covering at least
    sustain_fraction of the run.  Anything else, including series too
    short to judge, is Undetermined."""
    th = thresholds or ClassifyThresholds()
    m = len(series.times)
    if m < th.min_samples:
        return UNDETERMINED

    h_abs = [max(abs(series.hmax[i]), abs(series.hmin[i])) for i in range(m)]
    if max(h_abs) >= th.h_blowup:
        h_fin = h_abs[-1]
        if h_fin > 0.0:
            ratio = series.n * series.max_traceless[-1] / (h_fin * h_fin)
            if ratio <= th.roundness:
                return SHRINK

    t0, t1 = series.times[0], series.times[-1]
    if t1 <= t0:
        return UNDETERMINED
    geo = [max(h_abs[i], math.sqrt(max(series.max_a2[i], 0.0)))
           <= th.geodesic for i in range(m)]
    if geo[-1]:
        i = m - 1
        while i > 0 and geo[i - 1]:
            i -= 1
        if (t1 - series.times[i]) >= th.sustain_fraction * (t1 - t0):
            return TOTALLY_GEODESIC
    return UNDETERMINED
