"""Riccati comparison, Sturm/Rauch/Myers checks, volume comparison.

The scalar Riccati equation f' = -f^2 - H(t) is integrated through poles by
switching to the reciprocal variable w = 1/f, whose equation w' = 1 + H w^2
is smooth across a pole (w crosses zero there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (BadParam, ConjugateNotFound, DomainExit,
                     InputOrderViolated, StepFault)
from .manifold import MetricChart, metric_at
from .tensor import (curvature, jacobi_driving_batch, orthonormal_frame,
                     ricci, sectional)
from .transport import (DEFAULT_SETTINGS, OdeSettings, Trajectory,
                        initial_frame, integrate_geodesic)
from .variation import (conjugate_points_from, jacobi_system,
                        orthogonal_fundamental)


# ---------------------------------------------------------------------------
# Curvature profiles
# ---------------------------------------------------------------------------

@dataclass
class CurvatureProfile:
    """Scalar driving term H(t) for the comparison ODEs."""

    H: Callable
    label: str = ""

    @staticmethod
    def constant(K: float) -> "CurvatureProfile":
        return CurvatureProfile(H=lambda t: K, label=f"const({K})")

    @staticmethod
    def from_sectional(chart: MetricChart, geo: Trajectory,
                       direction: int = 0) -> "CurvatureProfile":
        """Sectional curvature of span(gamma', E_direction) along a geodesic."""
        if geo.frame is None:
            raise BadParam("geodesic must carry a parallel frame")
        ts = geo.t
        vals = np.empty(len(ts))
        for i in range(len(ts)):
            R = curvature(chart, geo.x[i])
            g = chart.evaluator.metric(geo.x[i])
            vals[i] = sectional(R, g, geo.v[i], geo.frame[i][:, direction])
        def H(t):
            return float(np.interp(t, ts, vals))
        return CurvatureProfile(H=H, label=f"sectional@{chart.label}")

    def __call__(self, t: float) -> float:
        return float(self.H(t))


def _as_profile(H) -> CurvatureProfile:
    if isinstance(H, CurvatureProfile):
        return H
    if callable(H):
        return CurvatureProfile(H=H)
    return CurvatureProfile.constant(float(H))


# ---------------------------------------------------------------------------
# Riccati integration with pole passage
# ---------------------------------------------------------------------------

@dataclass
class RiccatiTrace:
    """Solution samples split into segments separated by poles."""

    t: np.ndarray
    f: np.ndarray           # +/- inf at masked pole neighborhoods is avoided:
    valid: np.ndarray       # mask of samples where |f| is finite and recorded
    poles: list             # pole parameters in increasing order
    f0: float
    tmax: float
    step: float

    def segments(self):
        """Yield (t_array, f_array) pieces between consecutive poles."""
        edges = [self.t[0] - 1.0] + list(self.poles) + [self.t[-1] + 1.0]
        for a, b in zip(edges[:-1], edges[1:]):
            mask = self.valid & (self.t > a) & (self.t < b)
            if np.any(mask):
                yield self.t[mask], self.f[mask]

    def first_pole(self) -> Optional[float]:
        return self.poles[0] if self.poles else None

    def to_csv(self, path: str):
        with open(path, "w") as fh:
            fh.write("t,f\n")
            for ti, fi, ok in zip(self.t, self.f, self.valid):
                if ok:
                    fh.write(f"{ti:.17g},{fi:.17g}\n")


_F_SWITCH = 2.0   # switch to w = 1/f when |f| exceeds this
_W_SWITCH = 2.0   # switch back to f when |w| exceeds this (|f| < 1/2)
_F_RECORD = 1e8   # samples with |f| above this are masked out


def riccati_solve(H, f0: float, tmax: float, step: float = 1e-3) -> RiccatiTrace:
    """Integrate f' = -f^2 - H(t) on [0, tmax], passing through poles.

    ``f0`` may be ``math.inf`` for the blowup initial condition f(0+) = +inf,
    started on the asymptote f = 1/t - H(0) t / 3 at t = 1e-6.
    """
    prof = _as_profile(H)
    if tmax <= 0 or step <= 0:
        raise BadParam("tmax and step must be positive")
    ts = np.arange(0.0, tmax + 0.5 * step, step)
    ts[-1] = min(ts[-1], tmax)
    m = len(ts)
    f_out = np.full(m, np.nan)
    valid = np.zeros(m, dtype=bool)
    poles = []

    if math.isinf(f0):
        t = 1e-6
        y = 1.0 / t - prof(0.0) * t / 3.0
        mode = "f"
        f_out[0] = math.inf
    else:
        t = 0.0
        y = float(f0)
        mode = "f"
        f_out[0] = y
        valid[0] = True
    if mode == "f" and abs(y) > _F_SWITCH:
        y, mode = 1.0 / y, "w"

    def rhs(mode, t, y):
        if mode == "f":
            return -y * y - prof(t)
        return 1.0 + prof(t) * y * y

    def rk4(mode, t, y, h):
        k1 = rhs(mode, t, y)
        k2 = rhs(mode, t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(mode, t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(mode, t + h, y + h * k3)
        return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    for i in range(1, m):
        target = ts[i]
        # integrate from current (t, y) to target, possibly in sub-pieces
        while t < target - 1e-15:
            h = target - t
            y_new = rk4(mode, t, y, h)
            if mode == "w" and y * y_new < 0.0:
                # pole inside the step: locate the zero of w by bisection
                a, b, ya = t, t + h, y
                for _ in range(60):
                    mid = 0.5 * (a + b)
                    ym = rk4(mode, a, ya, mid - a)
                    if ya * ym <= 0.0:
                        b = mid
                    else:
                        a, ya = mid, ym
                poles.append(0.5 * (a + b))
            t, y = t + h, y_new
            if mode == "f" and abs(y) > _F_SWITCH:
                y, mode = 1.0 / y, "w"
            elif mode == "w" and abs(y) > _W_SWITCH:
                y, mode = 1.0 / y, "f"
        fval = y if mode == "f" else (1.0 / y if y != 0.0 else math.inf)
        if abs(fval) <= _F_RECORD:
            f_out[i] = fval
            valid[i] = True
    return RiccatiTrace(t=ts, f=f_out, valid=valid, poles=poles,
                        f0=f0, tmax=tmax, step=step)


# ---------------------------------------------------------------------------
# Scalar comparison checks
# ---------------------------------------------------------------------------

def compare_driving(H, K, f0: float, tmax: float, step: float = 1e-3,
                    tol: float = 1e-8) -> dict:
    """With H >= K and equal initial values, check f_H <= f_K and pole order."""
    profH, profK = _as_profile(H), _as_profile(K)
    grid = np.linspace(0.0, tmax, 257)
    gap = np.array([profH(t) - profK(t) for t in grid])
    if np.min(gap) < -1e-12:
        raise InputOrderViolated(
            f"H < K at t={grid[int(np.argmin(gap))]:.6g} (gap {np.min(gap):.3g})")
    trH = riccati_solve(profH, f0, tmax, step)
    trK = riccati_solve(profK, f0, tmax, step)
    pH, pK = trH.first_pole(), trK.first_pole()
    stop = pH if pH is not None else tmax + 1.0
    mask = trH.valid & trK.valid & (trH.t < stop - step)
    diff = trH.f[mask] - trK.f[mask]
    worst = float(np.max(diff)) if len(diff) else 0.0
    ordered = worst <= tol
    pole_ordered = True
    if pH is not None and pK is not None:
        pole_ordered = pH <= pK + tol
    return {"ordered": ordered, "max_violation": worst,
            "pole_H": pH, "pole_K": pK, "pole_ordered": pole_ordered,
            "trace_H": trH, "trace_K": trK}


def value_compare(H, f0: float, g0: float, tmax: float, step: float = 1e-3,
                  tol: float = 1e-8) -> dict:
    """Same driving term, ordered initial values: f stays below g."""
    if not f0 <= g0:
        raise InputOrderViolated("need f0 <= g0")
    trF = riccati_solve(H, f0, tmax, step)
    trG = riccati_solve(H, g0, tmax, step)
    pF = trF.first_pole()
    stop = pF if pF is not None else tmax + 1.0
    mask = trF.valid & trG.valid & (trF.t < stop - step)
    diff = trF.f[mask] - trG.f[mask]
    worst = float(np.max(diff)) if len(diff) else 0.0
    return {"ordered": worst <= tol, "max_violation": worst,
            "trace_f": trF, "trace_g": trG}


def sturm_check(H, K, tmax: float, step: float = 1e-3, tol: float = 1e-8) -> dict:
    """First zeros of j'' = -H j and k'' = -K k with unit-slope starts.

    With H >= K, the H-zero must come first (vacuous when k has no zero).
    """
    profH, profK = _as_profile(H), _as_profile(K)
    grid = np.linspace(0.0, tmax, 257)
    gap = np.array([profH(t) - profK(t) for t in grid])
    if np.min(gap) < -1e-12:
        raise InputOrderViolated("H < K somewhere on the interval")
    zH = _first_zero(profH, tmax, step)
    zK = _first_zero(profK, tmax, step)
    if zK is None:
        verdict = True
    elif zH is None:
        verdict = False
    else:
        verdict = zH <= zK + tol
    return {"zero_H": zH, "zero_K": zK, "ordered": verdict}


def _first_zero(prof: CurvatureProfile, tmax: float, step: float) -> Optional[float]:
    def rhs(t, y):
        return np.array([y[1], -prof(t) * y[0]])

    t, y = 0.0, np.array([0.0, 1.0])
    prev_t, prev_y = t, y.copy()
    while t < tmax - 1e-15:
        h = min(step, tmax - t)
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        ynew = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if t > 0 and y[0] * ynew[0] < 0.0:
            # cubic Hermite root inside the step
            a, b = t, t + h
            fa, fb = y[0], ynew[0]
            da, db = y[1], ynew[1]
            lo, hi = a, b
            flo = fa
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                fm = _hermite_scalar(a, b, fa, fb, da, db, mid)
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            return 0.5 * (lo + hi)
        t, y = t + h, ynew
    return None


def _hermite_scalar(t0, t1, p0, p1, v0, v1, s):
    h = t1 - t0
    u = (s - t0) / h
    h00 = (1 + 2 * u) * (1 - u) ** 2
    h10 = u * (1 - u) ** 2
    h01 = u * u * (3 - 2 * u)
    h11 = u * u * (u - 1)
    return h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1


# ---------------------------------------------------------------------------
# Rauch ratio
# ---------------------------------------------------------------------------

def rauch_ratio(chart_lo: MetricChart, p_lo, v_lo,
                chart_hi: MetricChart, p_hi, v_hi, tmax: float,
                settings: OdeSettings = DEFAULT_SETTINGS,
                direction: int = 0, tol: float = 1e-8) -> dict:
    """Ratio |J_lo|^2 / |J_hi|^2 for Jacobi fields with matched initial slope.

    ``chart_lo`` must have sectional curvature <= that of ``chart_hi`` along
    the compared geodesics (checked by sampling, else InputOrderViolated);
    the ratio is then nondecreasing and the lo-field dominates.
    """
    geo_lo = integrate_geodesic(chart_lo, p_lo, v_lo, tmax, settings=settings)
    geo_hi = integrate_geodesic(chart_hi, p_hi, v_hi, tmax, settings=settings)
    sys_lo = jacobi_system(chart_lo, geo_lo)
    sys_hi = jacobi_system(chart_hi, geo_hi)
    # sample the driving curvatures in the chosen direction
    k_lo = np.array([sys_lo.M[i][direction, direction] for i in range(len(sys_lo.t))])
    k_hi = np.array([sys_hi.M[i][direction, direction] for i in range(len(sys_hi.t))])
    if np.min(k_hi - k_lo) < -1e-9:
        raise InputOrderViolated("curvature order violated along the geodesics")
    F_lo, _ = orthogonal_fundamental(sys_lo)
    F_hi, _ = orthogonal_fundamental(sys_hi)
    j_lo = F_lo[:, :, direction]
    j_hi = F_hi[:, :, direction]
    norm_lo = np.einsum("ta,ta->t", j_lo, j_lo)
    norm_hi = np.einsum("ta,ta->t", j_hi, j_hi)
    start = max(1, int(0.01 * len(sys_lo.t)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = norm_lo[start:] / norm_hi[start:]
    ts = sys_lo.t[start:]
    finite = np.isfinite(ratio)
    ratio, ts = ratio[finite], ts[finite]
    steps = np.diff(ratio)
    monotone = bool(len(steps) == 0 or float(np.min(steps)) >= -tol * max(1.0, float(np.max(np.abs(ratio)))))
    dominated = bool(np.all(norm_lo[start:][finite] >= norm_hi[start:][finite] - tol))
    return {"t": ts, "ratio": ratio, "monotone": monotone,
            "dominates": dominated}


# ---------------------------------------------------------------------------
# Myers diameter check
# ---------------------------------------------------------------------------

def myers_check(chart: MetricChart, p, v, c: float, margin: float = 0.1,
                settings: OdeSettings = DEFAULT_SETTINGS) -> dict:
    """Under Ric >= (n-1) c g (sampled), find a conjugate point by pi/sqrt(c).

    ``v`` should be unit speed; the geodesic is integrated slightly past the
    bound so the bisection can bracket the conjugate parameter.
    """
    if c <= 0:
        raise BadParam("myers_check needs a positive Ricci lower bound c")
    n = chart.dim
    bound = math.pi / math.sqrt(c)
    geo = integrate_geodesic(chart, p, v, bound + margin, settings=settings)
    # Ricci hypothesis, sampled along the geodesic
    worst = math.inf
    for i in range(0, len(geo.t), max(1, len(geo.t) // 64)):
        md = metric_at(chart, geo.x[i])
        ric = ricci(curvature(chart, geo.x[i]), md.g).ric
        evals = np.linalg.eigvalsh(np.linalg.solve(md.g, ric))
        worst = min(worst, float(np.min(evals)))
    if worst < (n - 1) * c - 1e-9:
        raise InputOrderViolated(
            f"Ric lower bound violated: min eigenvalue {worst:.6g} < (n-1)c")
    rep = conjugate_points_from(chart, geo)
    if not rep.points:
        raise ConjugateNotFound("no conjugate parameter found within the bound")
    t_star = rep.points[0].t
    return {"bound": bound, "t_conjugate": t_star,
            "within_bound": t_star <= bound + 1e-4,
            "ric_min_eigenvalue": worst}


# ---------------------------------------------------------------------------
# Volume comparison
# ---------------------------------------------------------------------------

def _sphere_directions(n: int, count: int) -> np.ndarray:
    if n == 2:
        th = 2.0 * math.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    if n == 3:
        # Fibonacci lattice on S^2
        i = np.arange(count) + 0.5
        phi = math.pi * (3.0 - math.sqrt(5.0)) * i
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    raise BadParam("direction sweeps support n = 2 and n = 3 only")


def _unit_sphere_area(n: int) -> float:
    # area of S^{n-1}
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def s_K(r: float, K: float) -> float:
    """Solution of s'' = -K s with s(0)=0, s'(0)=1."""
    if K > 0:
        rk = math.sqrt(K)
        return math.sin(rk * r) / rk
    if K < 0:
        rk = math.sqrt(-K)
        return math.sinh(rk * r) / rk
    return r


def _batched_sphere_sweep(chart: MetricChart, p, r: float, n_dirs: int,
                          step: float, radii=None, jobs: int = 1):
    """Jacobian determinants det(d exp) transversal factor at radius r.

    Integrates geodesics plus orthogonal Jacobi matrices for all directions
    at once; returns det values per direction at each requested radius.
    With jobs > 1 the direction list is split into contiguous index chunks
    processed on a thread pool; chunk results concatenate in index order, so
    the output is independent of the job count.
    """
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        bounds = np.linspace(0, n_dirs, jobs + 1).astype(int)
        slices = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(
                lambda ab: _batched_sphere_sweep_single(chart, p, r, n_dirs,
                                                        step, radii, ab),
                slices))
        out = {}
        for key in parts[0]:
            out[key] = np.concatenate([part[key] for part in parts])
        return out
    return _batched_sphere_sweep_single(chart, p, r, n_dirs, step, radii, None)


def _batched_sphere_sweep_single(chart, p, r, n_dirs, step, radii, dir_slice):
    p = np.asarray(p, dtype=float)
    n = chart.dim
    d = n - 1
    md = metric_at(chart, p)
    B = orthonormal_frame(md.g)
    dirs = _sphere_directions(n, n_dirs)  # (N, n) Euclidean units
    if dir_slice is not None:
        dirs = dirs[dir_slice[0]:dir_slice[1]]
    N = len(dirs)
    V0 = dirs @ B.T  # rows: coordinate components of unit-speed starts

    # frames adapted per direction: columns = B rotated so last is the ray
    E0 = np.empty((N, n, n))
    for b in range(N):
        E0[b] = initial_frame(chart, p, V0[b])

    radii = sorted(radii or [r])
    X = np.tile(p, (N, 1))
    V = V0.copy()
    E = E0.copy()
    F = np.zeros((N, d, d))
    Fp = np.broadcast_to(np.eye(d), (N, d, d)).copy()

    ev = chart.evaluator

    def rhs(state):
        X, V, E, F, Fp = state
        Eo = E[:, :, :d]
        G, M = jacobi_driving_batch(chart, X, V, Eo)
        A = -np.einsum("bijk,bj,bk->bi", G, V, V)
        dE = -np.einsum("bijk,bj,bka->bia", G, V, E)
        dF = Fp
        dFp = -np.einsum("bpq,bqs->bps", M, F)
        return A, dE, dF, dFp

    def step_state(state, h):
        X, V, E, F, Fp = state

        def deriv(s):
            A, dE, dF, dFp = rhs(s)
            return (s[1], A, dE, dF, dFp)

        k1 = deriv(state)
        s2 = tuple(a + 0.5 * h * b for a, b in zip(state, k1))
        k2 = deriv(s2)
        s3 = tuple(a + 0.5 * h * b for a, b in zip(state, k2))
        k3 = deriv(s3)
        s4 = tuple(a + h * b for a, b in zip(state, k3))
        k4 = deriv(s4)
        return tuple(a + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
                     for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4))

    state = (X, V, E, F, Fp)
    t = 0.0
    out = {}
    for target in radii:
        n_steps = max(1, int(math.ceil((target - t) / step - 1e-12)))
        h = (target - t) / n_steps
        for _ in range(n_steps):
            state = step_state(state, h)
            t += h
            if not np.all(np.isfinite(state[0])):
                raise DomainExit("direction sweep left the chart", t_exit=t)
            for b in range(0, N, max(1, N // 8)):
                if not chart.contains(state[0][b]):
                    raise DomainExit("direction sweep left the chart",
                                     t_exit=t, point=state[0][b])
        out[target] = np.linalg.det(state[3])
    return out


def volume_compare(chart: MetricChart, p, r: float, Kref: float,
                   directions: Optional[int] = None, step: float = 1e-2,
                   ric_samples: int = 32, seed: int = 0, jobs: int = 1) -> dict:
    """Geodesic-sphere area versus the constant-curvature reference.

    Requires Ric >= (n-1) Kref g at seeded sample points (else
    InputOrderViolated). Reports the area ratio and a pointwise verdict on
    the Jacobian determinants.
    """
    p = np.asarray(p, dtype=float)
    n = chart.dim
    if directions is None:
        directions = 512 if n == 2 else 2048
    if r <= 0:
        raise BadParam("radius must be positive")
    # sampled Ricci hypothesis near p
    rng = np.random.default_rng(seed)
    worst = math.inf
    for k in range(ric_samples):
        q = p if k == 0 else p + rng.uniform(-r, r, n)
        if not chart.contains(q):
            continue
        md = metric_at(chart, q)
        ric = ricci(curvature(chart, q), md.g).ric
        evals = np.linalg.eigvalsh(np.linalg.solve(md.g, ric))
        worst = min(worst, float(np.min(evals)))
    if worst < (n - 1) * Kref - 1e-9:
        raise InputOrderViolated(
            f"Ric >= (n-1) Kref fails near p: min eigenvalue {worst:.6g}")

    dets = _batched_sphere_sweep(chart, p, r, directions, step, jobs=jobs)[r]
    if np.min(dets) <= 0.0:
        raise BadParam("radius reaches past a conjugate point (det <= 0)")
    omega = _unit_sphere_area(n)
    area = float(np.mean(dets)) * omega
    ref_det = s_K(r, Kref) ** (n - 1)
    reference = ref_det * omega
    ratio = area / reference
    pointwise = bool(np.all(dets <= ref_det + 1e-8 * max(1.0, ref_det)))
    return {"area": area, "reference": reference, "ratio": ratio,
            "ratio_at_most_one": ratio <= 1.0 + 1e-10,
            "pointwise": pointwise, "dets": dets,
            "ric_min_eigenvalue": worst, "directions": directions}


def scalar_expansion_fit(chart: MetricChart, p, radii=(0.2, 0.1, 0.05),
                         directions: Optional[int] = None,
                         step: float = 2e-3, jobs: int = 1) -> dict:
    """Fit the r^2 deficit of geodesic-sphere area against scalar curvature.

    area(r) / (r^{n-1} Omega) = 1 - a r^2 + O(r^4) with a = S / (6 n);
    Richardson extrapolation over the two finest radius pairs removes the
    r^2 error in the fitted coefficient.
    """
    p = np.asarray(p, dtype=float)
    n = chart.dim
    if directions is None:
        directions = 512 if n == 2 else 2048
    radii = sorted(radii, reverse=True)
    dets = _batched_sphere_sweep(chart, p, radii[-1], directions, step,
                                 radii=radii, jobs=jobs)
    coeffs = {}
    for rr in radii:
        ratio = float(np.mean(dets[rr])) / rr ** (n - 1)
        coeffs[rr] = (1.0 - ratio) / rr**2
    a_vals = [coeffs[rr] for rr in radii]
    rich = (4.0 * a_vals[-1] - a_vals[-2]) / 3.0
    md = metric_at(chart, p)
    S = ricci(curvature(chart, p), md.g).scalar
    predicted = S / (6.0 * n)
    return {"fitted": rich, "raw": coeffs, "scalar": S,
            "predicted": predicted,
            "mismatch": abs(rich - predicted)}
