"""Independent checks of the evolution identities along computed flows.

The flow code integrates the coupled system; this module re-derives the
time derivatives it should satisfy and measures the defect.  Residuals
compare a centered time difference of stored snapshots against the
claimed right-hand side, built from ambient curvature contracted through
the frame adapted to the hypersurface (e0 the unit normal, e1 the profile
tangent, the rest orbit directions).  For a warped ambient every needed
contraction reduces to closed forms in the two curvature eigenvalues,
their radial derivatives, and the frame components; those closed forms
are certified against the brute-force coordinate oracle in the tests.

Conventions: sectional curvature is R(U,V,U,V) for orthonormal U,V; the
normal is nu = (t2, -t1) in the orthonormal quotient frame, matching the
shape report.  rbar denotes the volume-averaged scalar curvature that
drives the normalized ambient flow.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .hypersurface import _curve_frame, _as_sampler, shape
from .stencils import GHOST, LD, diff1, extend
from .warped import curvature

__all__ = [
    "CheckRow", "ReactionTerms", "VerificationReport", "convergence_order",
    "frame_contractions", "inequality_margins", "kato_constants",
    "reaction_terms", "residual_A2", "residual_H",
    "residual_scalar_curvature", "residual_simons",
]

# curve nodes dropped at each end of a residual field: the axis values of
# the curvatures come from even extrapolation, which is accurate for the
# fields themselves but one order worse once differentiated twice
EDGE = 2

# grid rows dropped around each ambient pole: the reconstructed curvature
# there is pole-anchored (l'Hopital value plus flux integral), accurate
# pointwise but not node-smooth, so second derivatives of it do not
# converge within one stencil width of the anchor
EDGE_POLE = 8


# ------------------------------------------------- adapted-frame algebra

def frame_contractions(n, krad, korb, krad_s, korb_s, log_phi_s, t1, t2):
    """Ambient curvature contractions through the adapted frame.

    Inputs are per-node arrays: the two sectional eigenvalues, their
    arclength derivatives, phi_s/phi, and the tangent components of the
    profile curve in the orthonormal quotient frame.  The normal is
    (t2, -t1).  Orbit directions are curvature-equivalent, so one
    representative value covers each index range.

    Returns a dict with Ricci components (r00, r11, r01, ric_orb),
    sectional values of the mixed planes (sec_0i0i, sec_1i1i; the
    (nu, tangent) plane has sectional krad), the normal derivative of
    Ricci (d_r00) and of the normal-normal curvature block contracted
    per principal direction (t_prof, t_orb), the tangential divergence
    pieces of the curvature (c_prof, c_orb) and of Ricci (dric_prof,
    dric_orb).
    """
    nu1, nu2 = t2, -t1
    kd = krad - korb
    kds = krad_s - korb_s
    c = log_phi_s
    cross = nu2 * t1 + nu1 * t2          # = t2^2 - t1^2

    ric_orb = krad + (n - 1) * korb
    r00 = krad + (n - 1) * (krad * nu1 ** 2 + korb * nu2 ** 2)
    r11 = krad + (n - 1) * (krad * t1 ** 2 + korb * t2 ** 2)
    r01 = (n - 1) * kd * nu1 * t1
    sec_0i0i = korb + kd * nu1 ** 2
    sec_1i1i = korb + kd * t1 ** 2

    d_r00 = (nu1 * (krad_s + (n - 1) * korb_s + (n - 1) * kds * nu1 ** 2)
             + 2 * (n - 1) * kd * c * nu2 ** 2 * nu1)
    t_prof = krad_s * nu1
    t_orb = korb_s * nu1 + kds * nu1 ** 3 + 2 * kd * c * nu1 * nu2 ** 2
    c_prof = -(n - 1) * kd * c * t2 * (nu1 * t2 - t1 * nu2)
    c_orb = (-kds * t1 ** 2 * nu1 - kd * c * t2 * cross
             - (n - 2) * kd * c * nu1)
    dric_prof = (n - 1) * (kds * t1 ** 2 * nu1 + kd * c * t2 * cross)
    dric_orb = (n - 1) * kd * c * nu1

    return {
        "r00": r00, "r11": r11, "r01": r01, "ric_orb": ric_orb,
        "sec_0i0i": sec_0i0i, "sec_1i1i": sec_1i1i,
        "d_r00": d_r00, "t_prof": t_prof, "t_orb": t_orb,
        "c_prof": c_prof, "c_orb": c_orb,
        "dric_prof": dric_prof, "dric_orb": dric_orb,
        "krad": krad, "korb": korb,
    }


def _state_contractions(curve, samp, rep):
    krad, korb, krad_s, korb_s = samp.curvature_fields(curve.x)
    b, _, phi, phi_x, _ = samp.metric_fields(curve.x)
    log_phi_s = (phi_x / b) / phi
    return frame_contractions(samp.n, krad, korb, krad_s, korb_s,
                              log_phi_s, rep.t1, rep.t2)


@dataclass
class ReactionTerms:
    """Per-node ambient reaction terms of the coupled evolution equations.

    u feeds the mean-curvature equation, v the squared-norm equation;
    p_contract is the curvature-weighted principal-gap term and z the
    algebraic excess H tr(A^3) - |A|^4 (both vanish on umbilic points).
    """

    u: np.ndarray
    v: np.ndarray
    p_contract: np.ndarray
    z: np.ndarray


def reaction_terms(curve, ambient, params=None, report=None, rbar=None):
    """Reaction terms of the coupled system along a profile curve.

    rbar (the volume-averaged ambient scalar curvature) is recomputed
    from the ambient when not supplied.  report may pass a precomputed
    shape report for the same curve and ambient.
    """
    samp = _as_sampler(ambient)
    rep = report if report is not None else shape(curve, samp, params)
    if rbar is None:
        rbar = float(samp.curv.rbar)
    n = samp.n
    fc = _state_contractions(curve, samp, rep)
    kp, ko = rep.kappa_prof, rep.kappa_orb
    h, a2 = rep.h, rep.a2

    ric_h = fc["r11"] * kp + (n - 1) * fc["ric_orb"] * ko
    ric_h2 = fc["r11"] * kp ** 2 + (n - 1) * fc["ric_orb"] * ko ** 2
    d_block = kp * fc["t_prof"] + (n - 1) * ko * fc["t_orb"]

    u = 2.0 * ric_h - rbar * h / (n + 1) - fc["d_r00"]
    p_contract = -2.0 * (n - 1) * (kp - ko) ** 2 * fc["sec_1i1i"]
    v = (2.0 * p_contract + 4.0 * ric_h2 - 2.0 * rbar * a2 / (n + 1)
         - 2.0 * d_block)
    z = h * (kp ** 3 + (n - 1) * ko ** 3) - a2 ** 2
    return ReactionTerms(u=u, v=v, p_contract=p_contract, z=z)


def _static_u(fc, rep):
    """Reaction term of the mean-curvature equation in a frozen ambient."""
    return fc["r00"] * rep.h


def _static_v(fc, rep, n):
    """Frozen-ambient counterpart of v: the time-independent terms of the
    squared-norm evolution, obtained from the Simons identity and the
    normal variation of the second fundamental form."""
    kp, ko = rep.kappa_prof, rep.kappa_orb
    m_prof = (n - 1) * fc["sec_1i1i"]
    m_orb = fc["sec_1i1i"] + (n - 2) * fc["korb"]
    sum4 = m_prof * kp ** 2 + (n - 1) * m_orb * ko ** 2
    sum5 = (2 * (n - 1) * fc["sec_1i1i"] * kp * ko
            + (n - 1) * (n - 2) * fc["korb"] * ko ** 2)
    c_block = kp * fc["c_prof"] + (n - 1) * ko * fc["c_orb"]
    dric_block = kp * fc["dric_prof"] + (n - 1) * ko * fc["dric_orb"]
    return (2.0 * fc["r00"] * rep.a2 - 4.0 * sum4 + 4.0 * sum5
            - 2.0 * c_block - 2.0 * dric_block)


# ------------------------------------------------ derivatives along data

def _centered_dt(f0, f1, f2, h0, h1):
    """Second-order time derivative at the middle of three samples with
    spacings h0 = t1-t0 and h1 = t2-t1."""
    a = -h1 / (h0 * (h0 + h1))
    c = h0 / (h1 * (h0 + h1))
    b = -(a + c)
    return a * f0 + b * f1 + c * f2


def _profile_derivatives(f, speed, du):
    """f_s and f_ss along the profile for a field even about the axis."""
    p1 = len(f)
    f_u = diff1(extend(f, "even", GHOST), p1, du)
    f_s = f_u / speed
    f_su = diff1(extend(f_s, "odd", GHOST), p1, du)
    return f_s, f_su / speed


def _log_rho_s(curve, fr):
    sin_a = np.sin(curve.alpha)
    cos_a = np.cos(curve.alpha)
    rho = fr["phi"] * sin_a
    rho_u = fr["phi_x"] * fr["x_u"] * sin_a + fr["phi"] * cos_a * fr["a_u"]
    out = np.zeros_like(rho)
    out[1:-1] = rho_u[1:-1] / (rho[1:-1] * fr["speed"][1:-1])
    return out


def _induced_laplacian(f, n, speed, log_rho_s, du):
    """Laplacian of a rotation-invariant field on the hypersurface:
    f_ss + (n-1)(rho_s/rho) f_s, with the smooth axis limit n f_ss."""
    f_s, f_ss = _profile_derivatives(f, speed, du)
    lap = f_ss + (n - 1) * log_rho_s * f_s
    lap[0] = n * f_ss[0]
    lap[-1] = n * f_ss[-1]
    return lap, f_s, f_ss


def _ambient_laplacian(f, metric, curv):
    """Warped-manifold Laplacian of an even grid field:
    f_ss + n (phi_s/phi) f_s, with the pole limit (n+1) f_ss."""
    m1 = metric.num_nodes
    dx = metric.dx
    f_x = diff1(extend(f, "even", GHOST), m1, dx)
    f_s = f_x / metric.b
    f_sx = diff1(extend(f_s, "odd", GHOST), m1, dx)
    f_ss = f_sx / metric.b
    lap = f_ss.copy()
    lap[1:-1] += metric.n * (curv.phi_s[1:-1] / metric.phi[1:-1]) * f_s[1:-1]
    lap[0] += metric.n * f_ss[0]
    lap[-1] += metric.n * f_ss[-1]
    return lap


# ------------------------------------------------------------- residuals

def _snapshot_triple(snapshots, index, kind):
    if len(snapshots) < 3:
        raise ValueError(f"{kind} residual needs at least three snapshots")
    if index < 1 or index > len(snapshots) - 2:
        raise ValueError(
            f"sample {index} is a boundary snapshot: the centered time "
            "difference needs a neighbor on each side")
    (t0, s0), (t1, s1), (t2, s2) = snapshots[index - 1:index + 2]
    h0, h1 = t1 - t0, t2 - t1
    if h0 <= 0.0 or h1 <= 0.0:
        raise ValueError("snapshot times are not strictly increasing")
    return (t0, s0), (t1, s1), (t2, s2), h0, h1


def residual_scalar_curvature(run, index):
    """Defect of the scalar-curvature evolution under the normalized flow.

    run is an ambient flow series (or any series whose snapshots hold
    metrics, or coupled states, at sample times); index selects the
    center snapshot.  Returns |dR/dt - (lap R + 2|Ric|^2 - 2 rbar R/(n+1))|
    per grid node as float64, with EDGE_POLE rows dropped at each pole.
    Boundary samples are rejected.
    """
    (t0, g0), (_, g1), (t2, g2), h0, h1 = _snapshot_triple(
        run.snapshots, index, "scalar-curvature")
    _reject_disturbed_window(run, t0, t2)
    metrics = [g.metric if hasattr(g, "metric") else g for g in (g0, g1, g2)]
    if len({m.num_nodes for m in metrics}) != 1:
        raise ValueError("snapshots use different grids")
    curvs = [curvature(m) for m in metrics]
    lhs = _centered_dt(curvs[0].scal, curvs[1].scal, curvs[2].scal,
                       LD(h0), LD(h1))
    c1 = curvs[1]
    n = metrics[1].n
    rhs = (_ambient_laplacian(c1.scal, metrics[1], c1)
           + 2.0 * c1.ric2() - (LD(2) / LD(n + 1)) * c1.rbar * c1.scal)
    return np.abs(np.asarray(lhs - rhs, dtype=float))[EDGE_POLE:-EDGE_POLE]


def _reject_disturbed_window(run, t0, t2):
    for rt in getattr(run, "resample_times", ()):
        if t0 <= rt <= t2:
            raise ValueError(
                "node redistribution occurred inside the residual window; "
                "rerun with spacing_limit=None or move the window")
    for rt in getattr(run, "regauge_times", ()):
        if t0 <= rt <= t2:
            raise ValueError(
                "ambient regauge occurred inside the residual window; "
                "rerun without regauging or move the window")


def _coupled_triple(run, index):
    (t0, s0), (t1, s1), (t2, s2), h0, h1 = _snapshot_triple(
        run.snapshots, index, "coupled")
    _reject_disturbed_window(run, t0, t2)
    if len({s.curve.num_nodes for s in (s0, s1, s2)}) != 1:
        raise ValueError("snapshots use different curve resolutions")
    return (s0, s1, s2), h0, h1


def _middle_geometry(state):
    samp = _as_sampler(state.metric)
    rep = shape(state.curve, samp, state.params)
    fr = _curve_frame(state.curve, samp)
    return samp, rep, fr


def residual_H(run, index):
    """Defect of the mean-curvature evolution equation.

    For unfrozen runs the right side is lap H + |A|^2 H + u with u the
    coupled reaction term; frozen-ambient runs use the static form
    lap H + (|A|^2 + Ric(nu,nu)) H.  The residual is reported on
    interior profile nodes (EDGE nodes dropped at each end).
    """
    (s0, s1, s2), h0, h1 = _coupled_triple(run, index)
    rep0 = shape(s0.curve, s0.metric, s0.params)
    rep2 = shape(s2.curve, s2.metric, s2.params)
    samp, rep1, fr = _middle_geometry(s1)
    dh = _centered_dt(rep0.h, rep1.h, rep2.h, h0, h1)
    lap, _, _ = _induced_laplacian(rep1.h, samp.n, fr["speed"],
                                   _log_rho_s(s1.curve, fr), s1.curve.du)
    if getattr(run, "frozen_ambient", False):
        fc = _state_contractions(s1.curve, samp, rep1)
        rhs = lap + (rep1.a2 + fc["r00"]) * rep1.h
    else:
        rt = reaction_terms(s1.curve, samp, s1.params, report=rep1)
        rhs = lap + rep1.a2 * rep1.h + rt.u
    return np.abs(dh - rhs)[EDGE:-EDGE]


def residual_A2(run, index):
    """Defect of the evolution equation for |A|^2, analogous to
    residual_H; the gradient term uses the report's |grad A|^2 field."""
    (s0, s1, s2), h0, h1 = _coupled_triple(run, index)
    rep0 = shape(s0.curve, s0.metric, s0.params)
    rep2 = shape(s2.curve, s2.metric, s2.params)
    samp, rep1, fr = _middle_geometry(s1)
    da = _centered_dt(rep0.a2, rep1.a2, rep2.a2, h0, h1)
    lap, _, _ = _induced_laplacian(rep1.a2, samp.n, fr["speed"],
                                   _log_rho_s(s1.curve, fr), s1.curve.du)
    base = lap - 2.0 * rep1.grad_a2 + 2.0 * rep1.a2 ** 2
    if getattr(run, "frozen_ambient", False):
        fc = _state_contractions(s1.curve, samp, rep1)
        rhs = base + _static_v(fc, rep1, samp.n)
    else:
        rt = reaction_terms(s1.curve, samp, s1.params, report=rep1)
        rhs = base + rt.v
    return np.abs(da - rhs)[EDGE:-EDGE]


def residual_simons(state):
    """Defect of the Simons identity relating lap |A|^2 to the Hessian
    of H, |grad A|^2, and ambient curvature terms.

    Purely spatial: needs a single coupled state, no time differencing.
    Endpoint nodes are excluded; differentiating the extrapolated axis
    curvatures twice is too noisy there.
    """
    samp, rep, fr = _middle_geometry(state)
    n = samp.n
    curve = state.curve
    log_rho_s = _log_rho_s(curve, fr)
    lap_a2, _, _ = _induced_laplacian(rep.a2, n, fr["speed"], log_rho_s,
                                      curve.du)
    h_s, h_ss = _profile_derivatives(rep.h, fr["speed"], curve.du)
    orb_hess = log_rho_s * h_s
    orb_hess[0], orb_hess[-1] = h_ss[0], h_ss[-1]
    kp, ko = rep.kappa_prof, rep.kappa_orb
    hess_h = kp * h_ss + (n - 1) * ko * orb_hess

    fc = _state_contractions(curve, samp, rep)
    z = rep.h * (kp ** 3 + (n - 1) * ko ** 3) - rep.a2 ** 2
    h_r0i0j = kp * fc["krad"] + (n - 1) * ko * fc["sec_0i0i"]
    m_prof = (n - 1) * fc["sec_1i1i"]
    m_orb = fc["sec_1i1i"] + (n - 2) * fc["korb"]
    sum4 = m_prof * kp ** 2 + (n - 1) * m_orb * ko ** 2
    sum5 = (2 * (n - 1) * fc["sec_1i1i"] * kp * ko
            + (n - 1) * (n - 2) * fc["korb"] * ko ** 2)
    c_block = kp * fc["c_prof"] + (n - 1) * ko * fc["c_orb"]
    dric_block = kp * fc["dric_prof"] + (n - 1) * ko * fc["dric_orb"]

    rhs = (2.0 * hess_h + 2.0 * rep.grad_a2 + 2.0 * z
           + 2.0 * rep.h * h_r0i0j - 2.0 * fc["r00"] * rep.a2
           + 4.0 * sum4 - 4.0 * sum5 + 2.0 * c_block + 2.0 * dric_block)
    return np.abs(lap_a2 - rhs)[EDGE:-EDGE]


# ------------------------------------------------------- inequality suite

def kato_constants(n):
    """(gradient coefficient, Ricci-vector coefficient) of the refined
    Kato inequality |grad A|^2 >= c1 |grad H|^2 - c2 |S|^2."""
    eta = 1.0 / 2 ** 5 if n == 2 else 1.0 / (8 * (n + 2))
    c1 = 3.0 / (n + 2) - eta
    c2 = (2.0 / (n + 2)) * ((2.0 / (n + 2)) / eta - n / (n - 1.0))
    return c1, c2


def inequality_margins(state, report=None, rbar=None):
    """Pointwise margins of the monitored inequalities at one state.

    Returns a dict of floats, each nonnegative when the corresponding
    inequality holds: kato (refined Kato bound with the ambient Ricci
    vector term), gauss (intrinsic sectional curvature above
    (H^2+1)/(8n^2)), rbar_low / rbar_high (averaged scalar curvature
    inside the pinching band n(n+1)(1 -/+ eps0)).
    """
    samp = _as_sampler(state.metric)
    n = samp.n
    rep = report if report is not None else shape(state.curve, samp,
                                                  state.params)
    if rbar is None:
        rbar = float(samp.curv.rbar)
    fc = _state_contractions(state.curve, samp, rep)
    c1, c2 = kato_constants(n)
    kato = rep.grad_a2 - c1 * rep.grad_h2 + c2 * fc["r01"] ** 2
    gauss = rep.min_sectional - (rep.h ** 2 + 1.0) / (8.0 * n * n)
    band = n * (n + 1)
    eps0 = state.params.eps0
    return {
        "kato": float(np.min(kato)),
        "gauss": float(np.min(gauss)),
        "rbar_low": rbar - band * (1.0 - eps0),
        "rbar_high": band * (1.0 + eps0) - rbar,
    }


# --------------------------------------------------- report and ordering

def convergence_order(name, resolutions, residuals):
    """Richardson order estimate from max residuals at doubling resolutions.

    Needs at least three resolutions, each double the previous.  Returns
    the mean log2 ratio of successive residuals, or None when the
    sequence is not monotonically decreasing (no convergence to report).
    name only labels the error messages.
    """
    if len(resolutions) < 3:
        raise ValueError(f"{name}: need at least three resolutions")
    if len(residuals) != len(resolutions):
        raise ValueError(f"{name}: one residual per resolution required")
    for lo, hi in zip(resolutions, resolutions[1:]):
        if hi != 2 * lo:
            raise ValueError(
                f"{name}: resolutions must double ({lo} -> {hi})")
    if any(r <= 0.0 for r in residuals):
        raise ValueError(f"{name}: residuals must be positive")
    if any(b >= a for a, b in zip(residuals, residuals[1:])):
        return None
    ratios = [math.log2(a / b) for a, b in zip(residuals, residuals[1:])]
    return sum(ratios) / len(ratios)


@dataclass
class CheckRow:
    """One verification result: a residual magnitude, an optional
    observed convergence order (None when not applicable, nan when the
    refinement did not converge), and the pass flag."""

    check: str
    max_residual: float
    order: float = None
    passed: bool = True

    def _order_text(self):
        if self.order is None:
            return "-"
        if math.isnan(self.order):
            return "no convergence"
        return f"{self.order:.3g}"


@dataclass
class VerificationReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def add(self, check, max_residual, order=None, passed=True):
        self.rows.append(CheckRow(check, float(max_residual), order, passed))

    def table(self):
        lines = ["check,maxResidual,order,pass"]
        for r in self.rows:
            lines.append(f"{r.check},{r.max_residual:.6g},"
                         f"{r._order_text()},{'pass' if r.passed else 'FAIL'}")
        return "\n".join(lines)

    def write_csv(self, path):
        lines = ["check,maxResidual,order,pass"]
        for r in self.rows:
            order = "" if r.order is None else (
                "nan" if math.isnan(r.order) else f"{r.order:.15g}")
            lines.append(f"{r.check},{r.max_residual:.15g},{order},"
                         f"{int(r.passed)}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
