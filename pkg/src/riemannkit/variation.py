"""Jacobi fields, conjugate points, index forms and variation formulas.

All second-order machinery works in a parallel g-orthonormal frame along a
geodesic, with the (normalized) tangent as the last frame vector, so the
Jacobi equation reads f'' = -M(t) f with M symmetric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (BadParam, ConjugateNotFound, ConjugatePresent,
                     NoConvergence)
from .manifold import MetricChart, SampledCurve
from .manifold import energy as curve_energy
from .tensor import curvature
from .transport import (DEFAULT_SETTINGS, OdeSettings, Trajectory, exp_map,
                        integrate_geodesic, rk4_path)


# ---------------------------------------------------------------------------
# The curvature driving matrix along a geodesic
# ---------------------------------------------------------------------------

def jacobi_matrix_at(chart: MetricChart, x, v, E) -> np.ndarray:
    """M[a,b] = g(R_{gamma' E_b} gamma', E_a) in the frame columns of E."""
    R = curvature(chart, x)
    # R_{X Z} X with X = gamma', Z = E_b: components sum_i up[i,h,x,z] ...
    # work fully in lowered components: M_ab = low[x, b, x, a] contracted
    low = R.low
    return np.einsum("ijhk,i,jb,h,ka->ab", low, v, E, v, E)


@dataclass
class JacobiSystem:
    """Samples of position, velocity, parallel frame and M along a geodesic."""

    chart: MetricChart
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    frame: np.ndarray
    M: np.ndarray  # (m+1, n, n), symmetric

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def m_symmetry_residual(self) -> float:
        res = np.max(np.abs(self.M - np.transpose(self.M, (0, 2, 1))))
        scale = max(float(np.max(np.abs(self.M))), 1e-30)
        return float(res) / scale


def jacobi_system(chart: MetricChart, geo: Trajectory) -> JacobiSystem:
    """Evaluate the driving matrix at every sample of a framed geodesic."""
    if geo.frame is None:
        raise BadParam("geodesic must carry a parallel frame")
    m = len(geo.t)
    n = chart.dim
    M = np.empty((m, n, n))
    for i in range(m):
        M[i] = jacobi_matrix_at(chart, geo.x[i], geo.v[i], geo.frame[i])
        M[i] = 0.5 * (M[i] + M[i].T)
    return JacobiSystem(chart=chart, t=geo.t.copy(), x=geo.x, v=geo.v,
                        frame=geo.frame, M=M)


def _interp_M(sys: JacobiSystem):
    """Piecewise-linear interpolant of M(t); adequate inside one RK substep."""
    def M_at(t):
        k = int(np.searchsorted(sys.t, t, side="right")) - 1
        k = min(max(k, 0), len(sys.t) - 2)
        w = (t - sys.t[k]) / (sys.t[k + 1] - sys.t[k])
        return (1.0 - w) * sys.M[k] + w * sys.M[k + 1]
    return M_at


# ---------------------------------------------------------------------------
# Jacobi field integration
# ---------------------------------------------------------------------------

@dataclass
class JacobiSolution:
    t: np.ndarray
    f: np.ndarray   # (m+1, n) frame components of J
    fp: np.ndarray  # (m+1, n) frame components of D_t J
    system: JacobiSystem

    def coordinate_field(self) -> np.ndarray:
        """J in chart coordinates at every sample."""
        return np.einsum("tia,ta->ti", self.system.frame, self.f)


def jacobi_solve(chart: MetricChart, geo: Trajectory, J0, J0p,
                 substeps: int = 1) -> JacobiSolution:
    """Solve J'' = -M J along geo from coordinate initial data (J0, D_t J at 0)."""
    sys = jacobi_system(chart, geo)
    n = sys.dim
    g0 = chart.evaluator.metric(geo.x[0])
    E0 = geo.frame[0]
    f0 = E0.T @ g0 @ np.asarray(J0, dtype=float)
    fp0 = E0.T @ g0 @ np.asarray(J0p, dtype=float)
    F = _integrate_linear(sys, np.column_stack([f0]), np.column_stack([fp0]),
                          substeps=substeps)
    return JacobiSolution(t=sys.t, f=F[0][:, :, 0], fp=F[1][:, :, 0], system=sys)


def _integrate_linear(sys: JacobiSystem, F0: np.ndarray, Fp0: np.ndarray,
                      substeps: int = 1, t_grid=None):
    """Integrate F'' = -M(t) F for a matrix of columns; returns (F, Fp) samples."""
    n = sys.dim
    m_cols = F0.shape[1]
    M_at = _interp_M(sys)

    def rhs(t, y):
        F = y[: n * m_cols].reshape(n, m_cols)
        Fp = y[n * m_cols:].reshape(n, m_cols)
        return np.concatenate([Fp.ravel(), (-M_at(t) @ F).ravel()])

    ts = sys.t if t_grid is None else np.asarray(t_grid, dtype=float)
    y0 = np.concatenate([F0.ravel(), Fp0.ravel()])
    ys = rk4_path(rhs, y0, ts, substeps=substeps)
    F = ys[:, : n * m_cols].reshape(-1, n, m_cols)
    Fp = ys[:, n * m_cols:].reshape(-1, n, m_cols)
    return F, Fp


def orthogonal_fundamental(sys: JacobiSystem, substeps: int = 1):
    """Fundamental matrix of orthogonal Jacobi fields with F(0)=0, F'(0)=I.

    Components are taken in the first n-1 frame directions (the tangent is
    the last frame vector); returns (F, Fp) with shape (m+1, n-1, n-1).
    """
    n = sys.dim
    d = n - 1
    M_at = _interp_M(sys)

    def rhs(t, y):
        F = y[: d * d].reshape(d, d)
        Fp = y[d * d:].reshape(d, d)
        Mo = M_at(t)[:d, :d]
        return np.concatenate([Fp.ravel(), (-Mo @ F).ravel()])

    y0 = np.concatenate([np.zeros(d * d), np.eye(d).ravel()])
    ys = rk4_path(rhs, y0, sys.t, substeps=substeps)
    F = ys[:, : d * d].reshape(-1, d, d)
    Fp = ys[:, d * d:].reshape(-1, d, d)
    return F, Fp


# ---------------------------------------------------------------------------
# Conjugate points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConjugatePoint:
    t: float
    multiplicity: int
    sigma_min: float


@dataclass
class ConjugateReport:
    points: list
    t: np.ndarray
    det: np.ndarray
    sigma_min: np.ndarray


def _hermite_mat(t0, t1, F0, F1, Fp0, Fp1, s):
    h = t1 - t0
    u = (s - t0) / h
    h00 = (1 + 2 * u) * (1 - u) ** 2
    h10 = u * (1 - u) ** 2
    h01 = u * u * (3 - 2 * u)
    h11 = u * u * (u - 1)
    return h00 * F0 + h10 * h * Fp0 + h01 * F1 + h11 * h * Fp1


def conjugate_points(chart: MetricChart, p, v, tmax: float,
                     settings: OdeSettings = DEFAULT_SETTINGS,
                     mult_tol: float = 1e-7) -> ConjugateReport:
    """Conjugate parameters of gamma(0)=p along exp(t v), with multiplicities."""
    geo = integrate_geodesic(chart, p, v, tmax, settings=settings)
    return conjugate_points_from(chart, geo, mult_tol=mult_tol)


def conjugate_points_from(chart: MetricChart, geo: Trajectory,
                          mult_tol: float = 1e-7) -> ConjugateReport:
    sys = jacobi_system(chart, geo)
    F, Fp = orthogonal_fundamental(sys)
    m = len(sys.t)
    det = np.array([np.linalg.det(F[i]) for i in range(m)])
    sig = np.empty(m)
    sigma_scale = 0.0
    for i in range(m):
        s = np.linalg.svd(F[i], compute_uv=False)
        sig[i] = s[-1]
        sigma_scale = max(sigma_scale, float(s[0]))
    if sigma_scale == 0.0:
        sigma_scale = 1.0

    def F_at(s):
        k = int(np.searchsorted(sys.t, s, side="right")) - 1
        k = min(max(k, 0), m - 2)
        return _hermite_mat(sys.t[k], sys.t[k + 1], F[k], F[k + 1],
                            Fp[k], Fp[k + 1], s)

    found = []
    # skip the trivial zero at t = 0: start past the first few samples
    start = 1
    while start < m and sys.t[start] < 1e-6 * sys.t[-1]:
        start += 1
    i = start
    dip_thr = 1e-3 * sigma_scale
    while i < m - 1:
        crossing = det[i] * det[i + 1] < 0.0
        local_min = (sig[i] < dip_thr and sig[i] <= sig[i - 1]
                     and sig[i] <= sig[i + 1])
        if crossing:
            a, b = sys.t[i], sys.t[i + 1]
            for _ in range(80):
                mid = 0.5 * (a + b)
                if np.linalg.det(F_at(a)) * np.linalg.det(F_at(mid)) <= 0.0:
                    b = mid
                else:
                    a = mid
            t_star = 0.5 * (a + b)
            _record(found, F_at, t_star, sigma_scale, mult_tol)
            i += 2
            continue
        if local_min:
            a, b = sys.t[max(i - 1, 0)], sys.t[min(i + 1, m - 1)]
            t_star = _golden_min(lambda s: float(np.linalg.svd(F_at(s), compute_uv=False)[-1]),
                                 a, b)
            smin = float(np.linalg.svd(F_at(t_star), compute_uv=False)[-1])
            if smin <= 1e-6 * sigma_scale:
                _record(found, F_at, t_star, sigma_scale, mult_tol)
            i += 2
            continue
        i += 1
    return ConjugateReport(points=found, t=sys.t, det=det, sigma_min=sig)


def _record(found, F_at, t_star, sigma_scale, mult_tol):
    svals = np.linalg.svd(F_at(t_star), compute_uv=False)
    mult = int(np.sum(svals < mult_tol * max(svals[0], sigma_scale)))
    mult = max(mult, 1)
    found.append(ConjugatePoint(t=float(t_star), multiplicity=mult,
                                sigma_min=float(svals[-1])))


def _golden_min(f, a, b, iters: int = 60):
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def first_conjugate(chart: MetricChart, p, v, tmax: float,
                    settings: OdeSettings = DEFAULT_SETTINGS) -> ConjugatePoint:
    rep = conjugate_points(chart, p, v, tmax, settings=settings)
    if not rep.points:
        raise ConjugateNotFound(f"no conjugate point on (0, {tmax}]")
    return rep.points[0]


# ---------------------------------------------------------------------------
# Fields along geodesics and the index form
# ---------------------------------------------------------------------------

@dataclass
class FieldAlongGeodesic:
    """Frame components of a piecewise-smooth field along a geodesic.

    ``comps[i]`` are the components in the parallel orthonormal frame at
    sample i of the carrying geodesic; breakpoints list the corner parameters.
    """

    t: np.ndarray
    comps: np.ndarray
    breakpoints: list = field(default_factory=list)

    def derivative(self) -> np.ndarray:
        """Componentwise derivative, piecewise between breakpoints."""
        d = np.empty_like(self.comps)
        edges = [self.t[0]] + sorted(self.breakpoints) + [self.t[-1]]
        for a, b in zip(edges[:-1], edges[1:]):
            mask = (self.t >= a - 1e-12) & (self.t <= b + 1e-12)
            idx = np.where(mask)[0]
            if len(idx) < 2:
                continue
            d[idx] = np.gradient(self.comps[idx], self.t[idx], axis=0, edge_order=2)
        return d


def field_from_function(sys: JacobiSystem, func: Callable,
                        breakpoints=()) -> FieldAlongGeodesic:
    comps = np.array([func(t) for t in sys.t], dtype=float)
    return FieldAlongGeodesic(t=sys.t.copy(), comps=comps,
                              breakpoints=list(breakpoints))


def index_form(sys: JacobiSystem, V: FieldAlongGeodesic,
               Z: Optional[FieldAlongGeodesic] = None) -> float:
    """I(V, Z) = int_0^L [ g(V', Z') - g(R_{X V} X, Z) ] ds, no factor 2.

    The geodesic is assumed parametrized proportionally to arclength; the
    frame is orthonormal, so all inner products are Euclidean on components.
    """
    if Z is None:
        Z = V
    if len(V.t) != len(sys.t) or not np.allclose(V.t, sys.t):
        raise BadParam("field grid must match the geodesic sample grid")
    Vp = V.derivative()
    Zp = Z.derivative()
    MV = np.einsum("tab,tb->ta", sys.M, V.comps)
    integrand = np.einsum("ta,ta->t", Vp, Zp) - np.einsum("ta,ta->t", MV, Z.comps)
    return _piecewise_simpson(sys.t, integrand,
                              sorted(set(V.breakpoints) | set(Z.breakpoints)))


def _piecewise_simpson(t, y, breakpoints):
    total = 0.0
    edges = [t[0]] + [b for b in breakpoints if t[0] < b < t[-1]] + [t[-1]]
    for a, b in zip(edges[:-1], edges[1:]):
        mask = (t >= a - 1e-12) & (t <= b + 1e-12)
        idx = np.where(mask)[0]
        if len(idx) < 2:
            continue
        total += _simpson_nonuniform(t[idx], y[idx])
    return float(total)


def _simpson_nonuniform(x, y):
    # composite Simpson on (possibly) nonuniform grids, trapezoid tail
    n = len(x)
    total = 0.0
    i = 0
    while i + 2 < n:
        h0 = x[i + 1] - x[i]
        h1 = x[i + 2] - x[i + 1]
        hs = h0 + h1
        total += (hs / 6.0) * ((2.0 - h1 / h0) * y[i]
                               + (hs * hs / (h0 * h1)) * y[i + 1]
                               + (2.0 - h0 / h1) * y[i + 2])
        i += 2
    if i + 1 < n:
        total += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1])
    return total


# ---------------------------------------------------------------------------
# Basic inequality
# ---------------------------------------------------------------------------

@dataclass
class BasicInequalityReport:
    I_V: float
    I_Y: float
    gap: float
    lagrange_drift: float
    tangential_max: float


def basic_inequality_check(chart: MetricChart, geo: Trajectory,
                           V: FieldAlongGeodesic,
                           conjugate_guard: bool = True) -> BasicInequalityReport:
    """Compare I(V,V) against the Jacobi field with the same endpoint value.

    V must vanish at the start; its orthogonal part at the far end selects the
    comparison field Y built from the fundamental system. Raises
    ConjugatePresent when a conjugate parameter lies inside the interval.
    """
    sys = jacobi_system(chart, geo)
    n = sys.dim
    d = n - 1
    if float(np.linalg.norm(V.comps[0])) > 1e-10:
        raise BadParam("V must vanish at the start of the geodesic")
    tangential_max = float(np.max(np.abs(V.comps[:, d])))

    if conjugate_guard:
        rep = conjugate_points_from(chart, geo)
        interior = [c for c in rep.points if c.t < sys.t[-1] * (1.0 - 1e-9)]
        if interior:
            raise ConjugatePresent(
                f"conjugate parameter at t={interior[0].t:.6g} inside the interval")

    F, Fp = orthogonal_fundamental(sys)
    end_val = V.comps[-1, :d]
    alpha = np.linalg.solve(F[-1], end_val)
    Y = FieldAlongGeodesic(t=sys.t.copy(),
                           comps=np.pad(np.einsum("tab,b->ta", F, alpha),
                                        ((0, 0), (0, 1))))
    I_V = index_form(sys, V)
    I_Y = index_form(sys, Y)

    # internal Lagrange-identity check on the fundamental columns:
    # c_ab = F'^T F - F^T F' must stay constant (zero here)
    c = np.einsum("tca,tcb->tab", Fp, F) - np.einsum("tca,tcb->tab", F, Fp)
    drift = float(np.max(np.abs(c)))
    return BasicInequalityReport(I_V=I_V, I_Y=I_Y, gap=I_V - I_Y,
                                 lagrange_drift=drift,
                                 tangential_max=tangential_max)


# ---------------------------------------------------------------------------
# Beyond-conjugate nonminimality witness
# ---------------------------------------------------------------------------

@dataclass
class WitnessReport:
    s1: float
    s2: float
    index_value: float
    field: FieldAlongGeodesic
    I_Y: float
    I_cross: float
    I_W: float


def nonminimality_witness(chart: MetricChart, geo: Trajectory,
                          margin_factor: float = 1.0) -> WitnessReport:
    """Broken field with negative index form past the first conjugate point.

    Uses the Jacobi field Y vanishing at 0 and at the first conjugate s2,
    cut off at s2, plus a connecting Jacobi field W on [s1, L] with
    W(s1) = Y(s1), W(L) = 0, where s1 = s2 - (L - s2) * margin_factor.
    The returned field is Y + W-correction as frame components with
    breakpoints at s1 and s2; its index form should be negative.
    """
    sys = jacobi_system(chart, geo)
    n = sys.dim
    d = n - 1
    L = float(sys.t[-1])
    rep = conjugate_points_from(chart, geo)
    interior = [c for c in rep.points if c.t < L * (1.0 - 1e-9)]
    if not interior:
        raise ConjugateNotFound("no conjugate parameter inside (0, L)")
    s2 = interior[0].t
    eps = (L - s2) * margin_factor
    s1 = s2 - eps
    if s1 <= 0.0:
        raise BadParam("first conjugate point too close to the start")

    F, Fp = orthogonal_fundamental(sys)

    def mat_at(arr_F, arr_Fp, s):
        k = int(np.searchsorted(sys.t, s, side="right")) - 1
        k = min(max(k, 0), len(sys.t) - 2)
        return _hermite_mat(sys.t[k], sys.t[k + 1], arr_F[k], arr_F[k + 1],
                            arr_Fp[k], arr_Fp[k + 1], s)

    # Y = F alpha with F(s2) alpha = 0, alpha from the smallest singular vector
    U, svals, Vt = np.linalg.svd(mat_at(F, Fp, s2))
    alpha = Vt[-1]
    # normalize so that |Y| peaks near 1
    Ycomps = np.einsum("tab,b->ta", F, alpha)
    peak = float(np.max(np.linalg.norm(Ycomps, axis=1)))
    if peak > 0:
        alpha = alpha / peak
        Ycomps = Ycomps / peak

    # W on [s1, L]: basis A (A(s1)=I, A'(s1)=0) and Bm (Bm(s1)=0, Bm'(s1)=I)
    tail = sys.t[sys.t >= s1 - 1e-12]
    tail_grid = np.concatenate([[s1], tail[tail > s1 + 1e-12]])
    sub = JacobiSystem(chart=chart, t=sys.t, x=sys.x, v=sys.v,
                       frame=sys.frame, M=sys.M)
    AB0 = np.hstack([np.eye(d), np.zeros((d, d))])
    ABp0 = np.hstack([np.zeros((d, d)), np.eye(d)])
    M_at = _interp_M(sub)

    def rhs(t, y):
        Fm = y[: d * 2 * d].reshape(d, 2 * d)
        Fpm = y[d * 2 * d:].reshape(d, 2 * d)
        Mo = M_at(t)[:d, :d]
        return np.concatenate([Fpm.ravel(), (-Mo @ Fm).ravel()])

    y0 = np.concatenate([AB0.ravel(), ABp0.ravel()])
    ys = rk4_path(rhs, y0, tail_grid, substeps=1)
    Fm = ys[:, : d * 2 * d].reshape(-1, d, 2 * d)
    A_end = Fm[-1][:, :d]
    B_end = Fm[-1][:, d:]
    w0 = _field_value(sys.t, Ycomps, s1)
    w1 = -np.linalg.solve(B_end, A_end @ w0)

    # assemble the witness: Y before the corner at s1, the connector W after
    comps = np.zeros((len(sys.t), n))
    Wvals = Fm[:, :, :d] @ w0 + Fm[:, :, d:] @ w1
    for i in range(len(sys.t)):
        ti = sys.t[i]
        if ti < s1 - 1e-12:
            comps[i, :d] = Ycomps[i]
        else:
            j = min(int(np.searchsorted(tail_grid, ti + 1e-12)) , len(tail_grid)) - 1
            comps[i, :d] = Wvals[max(j, 0)]
    witness = FieldAlongGeodesic(t=sys.t.copy(), comps=comps,
                                 breakpoints=[s1])
    I_total = index_form(sys, witness)
    # diagnostic pieces: Y on [0, s2] cut off, and the connector
    Yfield = FieldAlongGeodesic(
        t=sys.t.copy(),
        comps=np.pad(np.where((sys.t <= s2)[:, None], Ycomps, 0.0),
                     ((0, 0), (0, 1))),
        breakpoints=[s2])
    I_Y = index_form(sys, Yfield)
    return WitnessReport(s1=float(s1), s2=float(s2), index_value=I_total,
                         field=witness, I_Y=I_Y, I_cross=float("nan"),
                         I_W=float("nan"))


def _field_value(t, comps, s):
    k = int(np.searchsorted(t, s, side="right")) - 1
    k = min(max(k, 0), len(t) - 2)
    w = (s - t[k]) / (t[k + 1] - t[k])
    return (1.0 - w) * comps[k] + w * comps[k + 1]


# ---------------------------------------------------------------------------
# First variation of energy
# ---------------------------------------------------------------------------

@dataclass
class RectangleSpec:
    """One-parameter variation Q(t, s) = exp_{base(s)}(t V(s))."""

    base: SampledCurve
    V: np.ndarray  # (m+1, n) coordinate components along the base
    end_condition: str = "fixed_ends"

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        if self.V.shape != self.base.points.shape:
            raise BadParam("V must be sampled on the base grid")
        if self.end_condition not in ("fixed_ends", "free_ends"):
            raise BadParam(f"unknown end condition {self.end_condition!r}")
        if self.end_condition == "fixed_ends":
            if (np.linalg.norm(self.V[0]) > 1e-12
                    or np.linalg.norm(self.V[-1]) > 1e-12):
                raise BadParam("fixed_ends requires V = 0 at both endpoints")


@dataclass
class FirstVariationReport:
    analytic: float
    finite_difference: float
    mismatch: float
    boundary_term: float
    acceleration_term: float


def first_variation(chart: MetricChart, rect: RectangleSpec,
                    t_step: float = 1e-4,
                    exp_settings: Optional[OdeSettings] = None) -> FirstVariationReport:
    """dE/dt at t=0, analytically and by central differences of the energy.

    Analytic value: 2 [g(V, c')]_a^b - 2 int g(V, D_{c'} c') ds.
    """
    base = rect.base
    base.ensure_velocities()
    ts = base.t
    m = len(ts)
    n = chart.dim
    if exp_settings is None:
        exp_settings = OdeSettings(step=0.02)

    # analytic side
    accel = np.empty((m, n))
    dv = np.gradient(base.velocities, ts, axis=0, edge_order=2)
    integrand = np.empty(m)
    boundary = np.empty(2)
    for i in range(m):
        x = base.points[i]
        v = base.velocities[i]
        G = chart.evaluator.gamma(x)
        accel[i] = dv[i] + np.einsum("ijk,j,k->i", G, v, v)
        g = chart.evaluator.metric(x)
        integrand[i] = float(rect.V[i] @ g @ accel[i])
    g_a = chart.evaluator.metric(base.points[0])
    g_b = chart.evaluator.metric(base.points[-1])
    boundary_term = 2.0 * (float(rect.V[-1] @ g_b @ base.velocities[-1])
                           - float(rect.V[0] @ g_a @ base.velocities[0]))
    accel_term = -2.0 * _simpson_nonuniform(ts, integrand)
    analytic = boundary_term + accel_term

    # finite-difference side
    def energy_at(tau):
        pts = np.empty((m, n))
        for i in range(m):
            vi = tau * rect.V[i]
            if np.any(vi):
                pts[i] = exp_map(chart, base.points[i], vi, settings=exp_settings)
            else:
                pts[i] = base.points[i]
        curve = SampledCurve(ts.copy(), pts)
        return curve_energy(chart, curve, rel_tol=1e-10)

    fd = (energy_at(t_step) - energy_at(-t_step)) / (2.0 * t_step)
    return FirstVariationReport(analytic=analytic, finite_difference=fd,
                                mismatch=abs(analytic - fd),
                                boundary_term=boundary_term,
                                acceleration_term=accel_term)
