"""Surfaces of revolution: profiles, Clairaut constant, barriers, Delta-theta.

An arclength profile (f, h) of the axis distance and height yields the chart
(u, theta) with ds^2 = du^2 + f(u)^2 dtheta^2; non-arclength profiles are
re-parametrized numerically before chart construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import expr
from .errors import (BadParam, BadProfile, BarrierNotTransversal, DomainExit)
from .manifold import MetricChart, MetricEvaluator


# ---------------------------------------------------------------------------
# Smooth scalar functions of u with two derivatives
# ---------------------------------------------------------------------------

class SmoothFunc:
    """Wraps an expression AST (or raw callables) as u -> (value, d1, d2)."""

    def __init__(self, source, label=""):
        self.label = label
        if isinstance(source, str):
            self.ast = expr.parse(source, ["u"])
            self.source = source
            self._call = None
        elif callable(source):
            self.ast = None
            self.source = None
            self._call = source
        else:  # assume a parsed AST node
            self.ast = source
            self.source = expr.to_source(source)
            self._call = None

    def __call__(self, u: float):
        if self._call is not None:
            return self._call(float(u))
        d = expr.eval2(self.ast, np.array([float(u)]))
        return d.value, float(d.grad[0]), float(d.hess[0, 0])

    def value(self, u: float) -> float:
        return self(u)[0]


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

@dataclass
class Profile:
    f: SmoothFunc
    h: SmoothFunc
    u_range: tuple
    arclength: bool = True
    label: str = ""
    periodic: Optional[float] = None  # period in u (torus); None otherwise

    def __post_init__(self):
        if not isinstance(self.f, SmoothFunc):
            self.f = SmoothFunc(self.f, "f")
        if not isinstance(self.h, SmoothFunc):
            self.h = SmoothFunc(self.h, "h")
        a, b = self.u_range
        if not (b > a):
            raise BadProfile("u_range must be a nonempty interval")

    def sample_u(self, count: int = 512) -> np.ndarray:
        a, b = self.u_range
        pad = 1e-9 * (b - a)
        return np.linspace(a + pad, b - pad, count)

    def validate(self, samples: int = 512, arc_tol: float = 1e-9):
        for u in self.sample_u(samples):
            fv, f1, f2 = self.f(u)
            if not (fv > 0.0):
                raise BadProfile(f"f(u) must stay positive; f({u:.6g}) = {fv:.6g}")
            if self.arclength:
                hv, h1, h2 = self.h(u)
                res = abs(f1 * f1 + h1 * h1 - 1.0)
                if res > arc_tol:
                    raise BadProfile(
                        f"profile not by arclength: |f'^2+h'^2-1| = {res:.3g} at u={u:.6g}")
        return self

    def gauss_curvature(self, u: float) -> float:
        fv, _, f2 = self.f(u)
        return -f2 / fv


def profile_from_definition(doc: dict) -> Profile:
    prof = Profile(f=doc["f"], h=doc["h"], u_range=tuple(doc["u_range"]),
                   arclength=bool(doc.get("arclength", True)),
                   label=doc.get("label", "profile"))
    return prof.validate()


def load_profile(path: str) -> Profile:
    with open(path) as fh:
        return profile_from_definition(json.load(fh))


def reparametrize_arclength(profile: Profile, grid: int = 8193) -> Profile:
    """Numerically re-parametrize a profile by arclength.

    Uses cumulative quadrature of the speed and a monotone inverse refined by
    Newton at evaluation time, so f and its derivatives keep AST accuracy.
    """
    a, b = profile.u_range
    us = np.linspace(a, b, grid)

    def speed(u):
        _, f1, _ = profile.f(u)
        _, h1, _ = profile.h(u)
        return math.hypot(f1, h1)

    sp = np.array([speed(u) for u in us])
    if np.min(sp) <= 1e-12:
        raise BadProfile("profile speed vanishes; cannot re-parametrize")
    s = np.concatenate([[0.0], cumulative_trapezoid(sp, us)])
    inv = CubicSpline(s, us)
    total = float(s[-1])

    def u_of_s(sv: float) -> float:
        u = float(inv(min(max(sv, 0.0), total)))
        for _ in range(3):  # Newton polish on s(u) - sv
            si = float(np.interp(u, us, s))
            u = u - (si - sv) / speed(u)
            u = min(max(u, a), b)
        return u

    def chain(base: SmoothFunc):
        def call(sv):
            u = u_of_s(sv)
            v, d1, d2 = base(u)
            _, f1, _ = profile.f(u)
            _, h1, _ = profile.h(u)
            _, _, f2 = profile.f(u)
            _, _, h2 = profile.h(u)
            sig = math.hypot(f1, h1)
            up = 1.0 / sig
            sig1 = (f1 * f2 + h1 * h2) / sig
            upp = -sig1 * up**3
            return v, d1 * up, d2 * up * up + d1 * upp
        return SmoothFunc(call, base.label)

    return Profile(f=chain(profile.f), h=chain(profile.h),
                   u_range=(0.0, total), arclength=True,
                   label=profile.label + "@arclength",
                   periodic=profile.periodic)


# ---------------------------------------------------------------------------
# Chart construction
# ---------------------------------------------------------------------------

class SurfRevEvaluator(MetricEvaluator):
    """ds^2 = du^2 + f(u)^2 dtheta^2 on the (u, theta) chart."""

    def __init__(self, ffun: SmoothFunc):
        self.dim = 2
        self.ffun = ffun

    def stack(self, x):
        fv, f1, f2 = self.ffun(x[0])
        g = np.array([[1.0, 0.0], [0.0, fv * fv]])
        dg = np.zeros((2, 2, 2))
        dg[0, 1, 1] = 2.0 * fv * f1
        d2g = np.zeros((2, 2, 2, 2))
        d2g[0, 0, 1, 1] = 2.0 * (f1 * f1 + fv * f2)
        return g, dg, d2g

    def first_order(self, x):
        fv, f1, _ = self.ffun(x[0])
        g = np.array([[1.0, 0.0], [0.0, fv * fv]])
        dg = np.zeros((2, 2, 2))
        dg[0, 1, 1] = 2.0 * fv * f1
        return g, dg

    def gamma(self, x):
        fv, f1, _ = self.ffun(x[0])
        G = np.zeros((2, 2, 2))
        G[0, 1, 1] = -fv * f1
        G[1, 0, 1] = G[1, 1, 0] = f1 / fv
        return G


def surface_of_revolution(profile: Profile) -> MetricChart:
    if not profile.arclength:
        profile = reparametrize_arclength(profile)
    profile.validate()
    a, b = profile.u_range
    if profile.periodic is not None:
        domain = None
        low = np.array([a, -math.pi])
        high = np.array([b, math.pi])
    else:
        pad = 1e-12 * (b - a)
        domain = lambda p: (a + pad) < p[0] < (b - pad)
        low = np.array([a + 0.05 * (b - a), -math.pi])
        high = np.array([b - 0.05 * (b - a), math.pi])
    chart = MetricChart(
        dim=2, coords=["u", "theta"],
        evaluator=SurfRevEvaluator(profile.f),
        label=f"surfrev({profile.label or 'profile'})",
        domain=domain, sample_box=(low, high),
        source={"surfrev": {"f": profile.f.source, "h": profile.h.source,
                            "u_range": list(profile.u_range),
                            "arclength": profile.arclength}})
    chart.profile = profile
    return chart


def torus_chart(R: float, r: float) -> MetricChart:
    """Donut torus: f(u) = R + r cos(u/r), h(u) = r sin(u/r), arclength in u."""
    if not (R > r > 0):
        raise BadParam("torus: need R > r > 0")

    def fcall(u):
        c, s = math.cos(u / r), math.sin(u / r)
        return R + r * c, -s, -c / r

    def hcall(u):
        c, s = math.cos(u / r), math.sin(u / r)
        return r * s, c, -s / r

    ffun = SmoothFunc(fcall, "f")
    hfun = SmoothFunc(hcall, "h")
    ffun.source = f"{R!r} + {r!r}*cos(u/{r!r})"
    hfun.source = f"{r!r}*sin(u/{r!r})"
    prof = Profile(
        f=ffun, h=hfun,
        u_range=(-math.pi * r, math.pi * r),
        arclength=True, label=f"torus({R},{r})",
        periodic=2.0 * math.pi * r)
    prof.validate()
    chart = surface_of_revolution(prof)
    chart.label = f"torus({R},{r})"
    chart.source = {"builtin": "torus", "params": {"R": R, "r": r}}
    return chart


# ---------------------------------------------------------------------------
# Clairaut constant
# ---------------------------------------------------------------------------

def _profile_of(chart: MetricChart) -> Profile:
    prof = getattr(chart, "profile", None)
    if prof is None:
        raise BadParam("chart was not built by surface_of_revolution")
    return prof


def clairaut_constant(chart: MetricChart, traj) -> dict:
    """Samples of c(t) = f(u)^2 theta' along a trajectory, with drift."""
    prof = _profile_of(chart)
    c = np.array([prof.f.value(traj.x[i, 0]) ** 2 * traj.v[i, 1]
                  for i in range(len(traj.t))])
    return {"t": traj.t.copy(), "c": c, "c0": float(c[0]),
            "drift": float(np.max(np.abs(c - c[0])))}


# ---------------------------------------------------------------------------
# Barriers
# ---------------------------------------------------------------------------

CRITICAL_TOL = 1e-8


def barriers(profile: Profile, c: float, grid: int = 2048,
             tol: float = 1e-10) -> list:
    """All roots of f(u) = |c| in u_range, tagged by the f' dichotomy."""
    target = abs(c)
    us = profile.sample_u(grid)
    phi = np.array([profile.f.value(u) - target for u in us])
    roots = []
    for i in range(len(us) - 1):
        if phi[i] == 0.0:
            roots.append(us[i])
        elif phi[i] * phi[i + 1] < 0.0:
            roots.append(brentq(lambda u: profile.f.value(u) - target,
                                us[i], us[i + 1], xtol=tol))
    if phi[-1] == 0.0:
        roots.append(us[-1])
    # tangential touches at critical parallels produce no sign change
    d1 = np.array([profile.f(u)[1] for u in us])
    for i in range(len(us) - 1):
        if d1[i] * d1[i + 1] < 0.0:
            crit = brentq(lambda u: profile.f(u)[1], us[i], us[i + 1], xtol=tol)
            if abs(profile.f.value(crit) - target) < 1e-9:
                roots.append(crit)
    out = []
    for u0 in sorted(roots):
        if out and abs(u0 - out[-1]["u"]) < 10.0 * tol:
            continue
        slope = profile.f(u0)[1]
        tag = "parallel_geodesic" if abs(slope) < CRITICAL_TOL else "transversal"
        out.append({"u": float(u0), "tag": tag})
    return out


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def initial_velocity(profile: Profile, u0: float, phi0: float) -> np.ndarray:
    """Unit-speed start; phi0 is the angle measured from the meridian."""
    fv = profile.f.value(u0)
    return np.array([math.cos(phi0), math.sin(phi0) / fv])


def classify_geodesic(profile: Profile, init, confirm: bool = True,
                      confirm_T: float = 100.0, confirm_step: float = 5e-3) -> dict:
    """Barrier-based classification of the geodesic from (u0, theta0, phi0).

    phi0 = 0 points along the meridian; phi0 = pi/2 is tangent to the
    parallel through u0. Tags follow the turning behavior of u.
    """
    u0, theta0, phi0 = (float(init[0]), float(init[1]), float(init[2]))
    fv, f1, _ = profile.f(u0)
    c = fv * math.sin(phi0)
    report = {"c": float(c), "u0": u0, "phi0": phi0}

    if abs(math.sin(phi0)) < 1e-12:
        report["class"] = "meridian"
        report["barriers"] = []
        return report
    if abs(math.cos(phi0)) < 1e-12 and abs(f1) < CRITICAL_TOL:
        report["class"] = "parallel_geodesic"
        report["barriers"] = [{"u": u0, "tag": "parallel_geodesic"}]
        return report

    bars = barriers(profile, c)
    report["barriers"] = bars
    below = [b for b in bars if b["u"] < u0 - 1e-12]
    above = [b for b in bars if b["u"] > u0 + 1e-12]
    here = [b for b in bars if abs(b["u"] - u0) <= 1e-12]
    if here and abs(math.cos(phi0)) < 1e-12:
        # tangent to a noncritical parallel: u has a nondegenerate extremum here
        if here[0]["tag"] == "transversal":
            below = below + here
            above = here + above
    lower = below[-1] if below else None
    upper = above[0] if above else None

    if lower is None or upper is None:
        if profile.periodic is not None and not bars:
            report["class"] = "unbounded"
        else:
            report["class"] = "unbounded"
        verdict = report["class"]
    elif (lower["tag"] == "parallel_geodesic"
          or upper["tag"] == "parallel_geodesic"):
        report["class"] = "asymptotic_to_parallel"
    else:
        report["class"] = "oscillating"

    if confirm and report["class"] in ("oscillating", "asymptotic_to_parallel"):
        report["confirmation"] = _confirm_bounds(
            profile, (u0, theta0, phi0), lower, upper, confirm_T, confirm_step)
    if report["class"] == "oscillating":
        try:
            dth = delta_theta(profile, c)
            report["delta_theta"] = dth
            report["winding"] = rationality_flag(dth / (2.0 * math.pi))
        except BarrierNotTransversal:
            pass
    return report


def _confirm_bounds(profile, init, lower, upper, T, step) -> dict:
    chart = surface_of_revolution(profile)
    u0, theta0, phi0 = init
    v0 = initial_velocity(profile, u0, phi0)
    from .transport import OdeSettings, integrate_geodesic
    try:
        traj = integrate_geodesic(chart, np.array([u0, theta0]), v0, T,
                                  settings=OdeSettings(step=step),
                                  with_frame=False)
    except DomainExit as exc:
        return {"confirmed": False, "exit_t": exc.t_exit}
    u = traj.x[:, 0]
    lo = lower["u"] - 1e-6 if lower else -math.inf
    hi = upper["u"] + 1e-6 if upper else math.inf
    inside = bool(np.all((u >= lo) & (u <= hi)))
    theta_rate = traj.v[:, 1]
    monotone = bool(np.all(theta_rate > 0) or np.all(theta_rate < 0))
    return {"confirmed": inside, "u_min": float(np.min(u)),
            "u_max": float(np.max(u)), "theta_monotone": monotone}


def rationality_flag(x: float, max_den: int = 64, tol: float = 1e-6) -> dict:
    """Report the best small-denominator rational nearby; never asserts it."""
    frac = Fraction(x).limit_denominator(max_den)
    err = abs(x - float(frac))
    return {"value": x, "nearest": f"{frac.numerator}/{frac.denominator}",
            "distance": err, "within_window": err <= tol}


# ---------------------------------------------------------------------------
# Delta-theta between barriers
# ---------------------------------------------------------------------------

def _gauss_legendre(fn, a, b, nodes=96):
    x, w = np.polynomial.legendre.leggauss(nodes)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * float(sum(wi * fn(mid + half * xi) for xi, wi in zip(x, w)))


def delta_theta(profile: Profile, c: float, nodes: int = 96) -> float:
    """Angular advance between successive barrier collisions.

    Delta-theta = int_{u-}^{u+} c / (f sqrt(f^2 - c^2)) du with the
    inverse-square-root endpoint singularities removed by u = u_-+xi^2 /
    u_+-xi^2 substitutions on each half.
    """
    if c == 0.0:
        raise BadParam("delta_theta undefined for meridians (c = 0)")
    bars = barriers(profile, c)
    target = abs(c)
    pair = None
    for bl, bu in zip(bars[:-1], bars[1:]):
        mid = 0.5 * (bl["u"] + bu["u"])
        if profile.f.value(mid) > target:
            pair = (bl, bu)
            break
    if pair is None:
        raise BadParam("no barrier gap with f > |c| found")
    bl, bu = pair
    if bl["tag"] != "transversal" or bu["tag"] != "transversal":
        raise BarrierNotTransversal(
            "Delta-theta diverges at a critical (geodesic) parallel")
    um, up = bl["u"], bu["u"]
    mid = 0.5 * (um + up)

    def integrand(u):
        fv = profile.f.value(u)
        return target / (fv * math.sqrt(max(fv * fv - target * target, 0.0)))

    def left(xi):
        u = um + xi * xi
        return integrand(u) * 2.0 * xi

    def right(xi):
        u = up - xi * xi
        return integrand(u) * 2.0 * xi

    total = (_gauss_legendre(left, 0.0, math.sqrt(mid - um), nodes)
             + _gauss_legendre(right, 0.0, math.sqrt(up - mid), nodes))
    return math.copysign(total, c)


def delta_theta_measured(profile: Profile, c: float, step: float = 1e-3,
                         tmax: float = 50.0) -> float:
    """Delta-theta from an actual geodesic between consecutive u-turning points."""
    chart = surface_of_revolution(profile)
    # start at a point with f > |c|, moving with the prescribed Clairaut constant
    bars = barriers(profile, c)
    target = abs(c)
    pair = None
    for bl, bu in zip(bars[:-1], bars[1:]):
        mid = 0.5 * (bl["u"] + bu["u"])
        if profile.f.value(mid) > target:
            pair = (bl, bu)
            break
    if pair is None:
        raise BadParam("no barrier gap with f > |c| found")
    u0 = 0.5 * (pair[0]["u"] + pair[1]["u"])
    fv = profile.f.value(u0)
    sphi = c / fv
    phi0 = math.asin(min(max(sphi, -1.0), 1.0))
    from .transport import OdeSettings, integrate_geodesic
    traj = integrate_geodesic(chart, np.array([u0, 0.0]),
                              initial_velocity(profile, u0, phi0), tmax,
                              settings=OdeSettings(step=step), with_frame=False)
    du = traj.v[:, 0]
    turns = []
    for i in range(len(traj.t) - 1):
        if du[i] * du[i + 1] < 0.0:
            # linear time estimate of the turning parameter, then theta there
            w = du[i] / (du[i] - du[i + 1])
            t_turn = traj.t[i] + w * (traj.t[i + 1] - traj.t[i])
            turns.append(t_turn)
        if len(turns) == 2:
            break
    if len(turns) < 2:
        raise BadParam("geodesic produced fewer than two turning points")
    th = [float(traj.position(t)[1]) for t in turns]
    return th[1] - th[0]
