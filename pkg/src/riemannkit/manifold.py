"""Coordinate charts with metric coefficients, curve length, Finsler tools.

A chart is a single coordinate system; the builtin catalog provides the
constant-curvature model spaces and the torus used for validation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import expr
from .errors import BadParam, DomainExit, SingularMetric, UnknownBuiltin


# ---------------------------------------------------------------------------
# Metric evaluators
# ---------------------------------------------------------------------------

class MetricEvaluator:
    """Supplies g, its coordinate derivatives, and Christoffel symbols."""

    dim: int

    def stack(self, x: np.ndarray):
        """Return (g, dg, d2g); dg[k,i,j] = d_k g_ij, d2g[k,l,i,j] = d_k d_l g_ij."""
        raise NotImplementedError

    def metric(self, x: np.ndarray) -> np.ndarray:
        return self.stack(x)[0]

    def first_order(self, x: np.ndarray):
        """(g, dg) only; override where a cheaper path exists."""
        g, dg, _ = self.stack(x)
        return g, dg

    def gamma(self, x: np.ndarray) -> np.ndarray:
        """Levi-Civita Christoffel symbols Gamma[i,j,k] = Gamma^i_jk."""
        g, dg = self.first_order(x)
        g_inv = np.linalg.inv(g)
        return gamma_from_stack(g_inv, dg)

    def stack_batch(self, X: np.ndarray):
        """Vectorized stack over a batch of points; generic fallback loops."""
        X = np.asarray(X, dtype=float)
        N, n = X.shape
        g = np.empty((N, n, n))
        dg = np.empty((N, n, n, n))
        d2g = np.empty((N, n, n, n, n))
        for b in range(N):
            g[b], dg[b], d2g[b] = self.stack(X[b])
        return g, dg, d2g


def gamma_from_stack(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # Koszul formula for coordinate fields
    term = np.einsum("jmk->mjk", dg) + np.einsum("kmj->mjk", dg) - np.einsum("mjk->mjk", dg)
    return 0.5 * np.einsum("im,mjk->ijk", g_inv, term)


class EuclideanEvaluator(MetricEvaluator):
    def __init__(self, n: int):
        self.dim = n
        self._eye = np.eye(n)
        self._dg = np.zeros((n, n, n))
        self._d2g = np.zeros((n, n, n, n))

    def stack(self, x):
        return self._eye, self._dg, self._d2g

    def first_order(self, x):
        return self._eye, self._dg

    def gamma(self, x):
        n = self.dim
        return np.zeros((n, n, n))

    def stack_batch(self, X):
        N, n = np.asarray(X).shape
        return (np.broadcast_to(self._eye, (N, n, n)).copy(),
                np.zeros((N, n, n, n)), np.zeros((N, n, n, n, n)))


class ConformalEvaluator(MetricEvaluator):
    """g_ij = mu(|x|^2) * delta_ij for a smooth positive profile mu."""

    def __init__(self, n: int, mu: Callable, dmu: Callable, d2mu: Callable):
        self.dim = n
        self.mu = mu
        self.dmu = dmu
        self.d2mu = d2mu

    def stack(self, x):
        n = self.dim
        q = float(x @ x)
        m, m1, m2 = self.mu(q), self.dmu(q), self.d2mu(q)
        eye = np.eye(n)
        dg = (2.0 * m1) * np.einsum("k,ij->kij", x, eye)
        d2g = np.einsum("kl,ij->klij", 4.0 * m2 * np.outer(x, x) + 2.0 * m1 * eye, eye)
        return m * eye, dg, d2g

    def gamma(self, x):
        n = self.dim
        q = float(x @ x)
        # Gamma^i_jk = d_k phi delta_ij + d_j phi delta_ik - d_i phi delta_jk
        # with phi = (1/2) log mu
        dphi = (self.dmu(q) / self.mu(q)) * np.asarray(x, dtype=float)
        eye = np.eye(n)
        return (np.einsum("k,ij->ijk", dphi, eye)
                + np.einsum("j,ik->ijk", dphi, eye)
                - np.einsum("i,jk->ijk", dphi, eye))

    def stack_batch(self, X):
        X = np.asarray(X, dtype=float)
        N, n = X.shape
        q = np.einsum("bi,bi->b", X, X)
        m = np.array([self.mu(t) for t in q])
        m1 = np.array([self.dmu(t) for t in q])
        m2 = np.array([self.d2mu(t) for t in q])
        eye = np.eye(n)
        g = m[:, None, None] * eye
        dg = 2.0 * np.einsum("b,bk,ij->bkij", m1, X, eye)
        kern = (4.0 * np.einsum("b,bk,bl->bkl", m2, X, X)
                + 2.0 * np.einsum("b,kl->bkl", m1, eye))
        d2g = np.einsum("bkl,ij->bklij", kern, eye)
        return g, dg, d2g


class ExpressionEvaluator(MetricEvaluator):
    """Free-form metric whose coefficients are expression ASTs."""

    def __init__(self, asts, n: int):
        self.dim = n
        self.asts = asts  # n x n nested list of AST nodes

    def stack(self, x):
        n = self.dim
        g = np.zeros((n, n))
        dg = np.zeros((n, n, n))
        d2g = np.zeros((n, n, n, n))
        for i in range(n):
            for j in range(i, n):
                d = expr.eval2(self.asts[i][j], x)
                g[i, j] = g[j, i] = d.value
                dg[:, i, j] = dg[:, j, i] = d.grad
                d2g[:, :, i, j] = d2g[:, :, j, i] = d.hess
        return g, dg, d2g


# ---------------------------------------------------------------------------
# Chart
# ---------------------------------------------------------------------------

@dataclass
class MetricChart:
    dim: int
    coords: list
    evaluator: MetricEvaluator
    label: str = ""
    domain: Optional[Callable] = None  # point -> bool
    sample_box: Optional[tuple] = None  # (low, high) arrays for seeded sampling
    source: Optional[dict] = None  # JSON definition for --print-manifold echo

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(p)):
            return False
        if self.domain is None:
            return True
        return bool(self.domain(p))

    def require_inside(self, p):
        if not self.contains(p):
            raise DomainExit(f"point {np.asarray(p)} outside domain of chart '{self.label}'",
                             point=np.asarray(p, dtype=float))

    def sample_points(self, count: int, seed: int) -> np.ndarray:
        """Seeded random interior points, reproducible across runs."""
        rng = np.random.default_rng(seed)
        low, high = self.sample_box if self.sample_box is not None else (
            -np.ones(self.dim), np.ones(self.dim))
        low = np.asarray(low, dtype=float)
        high = np.asarray(high, dtype=float)
        points = []
        guard = 0
        while len(points) < count:
            p = rng.uniform(low, high)
            guard += 1
            if self.contains(p):
                points.append(p)
            if guard > 1000 * count:
                raise BadParam("sample_box rejection rate too high")
        return np.array(points)


@dataclass(frozen=True)
class MetricData:
    """Metric matrix with inverse and derivative stack at one point."""

    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray
    chol: np.ndarray


def metric_at(chart: MetricChart, p) -> MetricData:
    p = np.asarray(p, dtype=float)
    chart.require_inside(p)
    g, dg, d2g = chart.evaluator.stack(p)
    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise SingularMetric(f"metric not positive definite at {p}")
    g_inv = np.linalg.inv(g)
    return MetricData(g=g, g_inv=g_inv, dg=dg, d2g=d2g, chol=chol)


def inner(chart: MetricChart, p, v, w) -> float:
    g = chart.evaluator.metric(np.asarray(p, dtype=float))
    return float(np.asarray(v) @ g @ np.asarray(w))


def norm(chart: MetricChart, p, v) -> float:
    return math.sqrt(max(inner(chart, p, v, v), 0.0))


# ---------------------------------------------------------------------------
# Builtin catalog
# ---------------------------------------------------------------------------

def builtin(name: str, params: Optional[dict] = None) -> MetricChart:
    params = dict(params or {})
    if name == "euclidean":
        n = int(params.pop("n", 2))
        if n < 1:
            raise BadParam("euclidean: n must be >= 1")
        _reject_extra(name, params)
        return MetricChart(
            dim=n, coords=[f"x{i+1}" for i in range(n)],
            evaluator=EuclideanEvaluator(n), label=f"euclidean({n})",
            sample_box=(-2.0 * np.ones(n), 2.0 * np.ones(n)),
            source={"builtin": "euclidean", "params": {"n": n}})
    if name == "sphere_stereo":
        n = int(params.pop("n", 2))
        R = float(params.pop("R", 1.0))
        if R <= 0:
            raise BadParam("sphere_stereo: R must be positive")
        _reject_extra(name, params)
        R2 = R * R
        # mu(q) = (2 R^2 / (R^2 + q))^2
        ev = ConformalEvaluator(
            n,
            mu=lambda q: (2.0 * R2 / (R2 + q)) ** 2,
            dmu=lambda q: -2.0 * (2.0 * R2) ** 2 / (R2 + q) ** 3,
            d2mu=lambda q: 6.0 * (2.0 * R2) ** 2 / (R2 + q) ** 4,
        )
        # chart covers the sphere minus one pole; cap the radius so that
        # geodesics heading to the pole image exit cleanly
        cap2 = (1e6 * R) ** 2
        return MetricChart(
            dim=n, coords=[f"x{i+1}" for i in range(n)], evaluator=ev,
            label=f"sphere_stereo({n},R={R})",
            domain=lambda p: float(p @ p) < cap2,
            sample_box=(-2.0 * R * np.ones(n), 2.0 * R * np.ones(n)),
            source={"builtin": "sphere_stereo", "params": {"n": n, "R": R}})
    if name == "hyperbolic_ball":
        n = int(params.pop("n", 2))
        _reject_extra(name, params)
        ev = ConformalEvaluator(
            n,
            mu=lambda q: (2.0 / (1.0 - q)) ** 2,
            dmu=lambda q: 8.0 / (1.0 - q) ** 3,
            d2mu=lambda q: 24.0 / (1.0 - q) ** 4,
        )
        return MetricChart(
            dim=n, coords=[f"x{i+1}" for i in range(n)], evaluator=ev,
            label=f"hyperbolic_ball({n})",
            domain=lambda p: float(p @ p) < 1.0,
            sample_box=(-0.65 * np.ones(n), 0.65 * np.ones(n)),
            source={"builtin": "hyperbolic_ball", "params": {"n": n}})
    if name == "torus":
        R = float(params.pop("R", 2.0))
        r = float(params.pop("r", 1.0))
        _reject_extra(name, params)
        if not (R > r > 0):
            raise BadParam("torus: need R > r > 0")
        from . import surfrev
        return surfrev.torus_chart(R, r)
    raise UnknownBuiltin(f"no builtin chart named '{name}'")


def _reject_extra(name, params):
    if params:
        raise BadParam(f"{name}: unknown parameters {sorted(params)}")


# ---------------------------------------------------------------------------
# Manifold definition files
# ---------------------------------------------------------------------------

def chart_from_definition(doc: dict) -> MetricChart:
    """Build a chart from a manifold JSON document (builtin or free-form)."""
    if "builtin" in doc:
        return builtin(doc["builtin"], doc.get("params", {}))
    dim = int(doc["dim"])
    coords = list(doc["coords"])
    if len(coords) != dim:
        raise BadParam("coords length must equal dim")
    rows = doc["metric"]
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise BadParam("metric must be a dim x dim array of expressions")
    asts = [[expr.parse(rows[i][j], coords) for j in range(dim)] for i in range(dim)]
    domain = None
    if doc.get("domain"):
        dom_ast = expr.parse(doc["domain"], coords)
        domain = lambda p: expr.evaluate(dom_ast, p) > 0.0
    chart = MetricChart(
        dim=dim, coords=coords,
        evaluator=ExpressionEvaluator(asts, dim),
        label=doc.get("label", "custom"),
        domain=domain,
        sample_box=(-np.ones(dim), np.ones(dim)),
        source=dict(doc))
    _check_supplied_symmetry(chart, asts)
    return chart


def load_manifold(path: str) -> MetricChart:
    with open(path) as fh:
        return chart_from_definition(json.load(fh))


def _check_supplied_symmetry(chart: MetricChart, asts, seed: int = 20260823,
                             samples: int = 100, tol: float = 1e-12):
    n = chart.dim
    try:
        pts = chart.sample_points(samples, seed)
    except BadParam:
        return
    for p in pts:
        for i in range(n):
            for j in range(i + 1, n):
                a = expr.evaluate(asts[i][j], p)
                b = expr.evaluate(asts[j][i], p)
                scale = max(1.0, abs(a), abs(b))
                if abs(a - b) > tol * scale:
                    raise BadParam(
                        f"metric not symmetric: g[{i}][{j}] != g[{j}][{i}] at {p}")


# ---------------------------------------------------------------------------
# Sampled curves
# ---------------------------------------------------------------------------

@dataclass
class SampledCurve:
    t: np.ndarray
    points: np.ndarray
    velocities: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if np.any(np.diff(self.t) <= 0):
            raise BadParam("curve parameter grid must be strictly increasing")
        if self.velocities is not None:
            self.velocities = np.asarray(self.velocities, dtype=float)

    def ensure_velocities(self) -> np.ndarray:
        if self.velocities is None:
            self.velocities = np.gradient(self.points, self.t, axis=0, edge_order=2)
        return self.velocities

    def _segment(self, s: float) -> int:
        k = int(np.searchsorted(self.t, s, side="right")) - 1
        return min(max(k, 0), len(self.t) - 2)

    def position(self, s: float) -> np.ndarray:
        v = self.ensure_velocities()
        k = self._segment(s)
        return _hermite(self.t[k], self.t[k + 1], self.points[k], self.points[k + 1],
                        v[k], v[k + 1], s)

    def velocity(self, s: float) -> np.ndarray:
        v = self.ensure_velocities()
        k = self._segment(s)
        return _hermite_deriv(self.t[k], self.t[k + 1], self.points[k],
                              self.points[k + 1], v[k], v[k + 1], s)


def _hermite(t0, t1, p0, p1, v0, v1, s):
    h = t1 - t0
    u = (s - t0) / h
    h00 = (1 + 2 * u) * (1 - u) ** 2
    h10 = u * (1 - u) ** 2
    h01 = u * u * (3 - 2 * u)
    h11 = u * u * (u - 1)
    return h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1


def _hermite_deriv(t0, t1, p0, p1, v0, v1, s):
    h = t1 - t0
    u = (s - t0) / h
    d00 = 6 * u * (u - 1) / h
    d10 = (1 - u) * (1 - 3 * u)
    d01 = -6 * u * (u - 1) / h
    d11 = u * (3 * u - 2)
    return d00 * p0 + d10 * v0 + d01 * p1 + d11 * v1


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

def refine_simpson(f: Callable, a: float, b: float, rel_tol: float = 1e-8,
                   abs_floor: float = 1e-14, max_level: int = 16,
                   start_segments: int = 8) -> float:
    """Composite Simpson with dyadic refinement to a relative tolerance."""
    prev = None
    segments = start_segments
    for _ in range(max_level):
        ts = np.linspace(a, b, 2 * segments + 1)
        ys = np.array([f(t) for t in ts])
        h = (b - a) / (2 * segments)
        val = h / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum() + 2.0 * ys[2:-2:2].sum())
        if prev is not None:
            if abs(val - prev) <= max(rel_tol * abs(val), abs_floor):
                return val
        prev = val
        segments *= 2
    return prev


def curve_length(chart: MetricChart, curve: SampledCurve, rel_tol: float = 1e-8) -> float:
    """Length of a sampled curve by refined Simpson quadrature of the speed."""
    curve.ensure_velocities()

    def speed(s):
        x = curve.position(s)
        chart.require_inside(x)
        v = curve.velocity(s)
        g = chart.evaluator.metric(x)
        return math.sqrt(max(float(v @ g @ v), 0.0))

    n_seg = max(8, len(curve.t) - 1)
    return refine_simpson(speed, curve.t[0], curve.t[-1], rel_tol=rel_tol,
                          start_segments=n_seg)


def energy(chart: MetricChart, curve: SampledCurve, rel_tol: float = 1e-8) -> float:
    """Integral of g(velocity, velocity) over the parameter interval."""
    curve.ensure_velocities()

    def sq_speed(s):
        x = curve.position(s)
        chart.require_inside(x)
        v = curve.velocity(s)
        g = chart.evaluator.metric(x)
        return float(v @ g @ v)

    n_seg = max(8, len(curve.t) - 1)
    return refine_simpson(sq_speed, curve.t[0], curve.t[-1], rel_tol=rel_tol,
                          start_segments=n_seg)


def rectifiable_length(distance: Callable, curve: SampledCurve, depth: int) -> list:
    """Inscribed-polygon length sums under dyadic partition refinement.

    Returns one sum per depth 0..depth; the sequence is nondecreasing for any
    distance obeying the triangle inequality.
    """
    sums = []
    for k in range(depth + 1):
        params = np.linspace(curve.t[0], curve.t[-1], 2**k + 1)
        pts = [curve.position(s) for s in params]
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            total += float(distance(a, b))
        sums.append(total)
    return sums


# ---------------------------------------------------------------------------
# Finsler norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TangentVector:
    base: np.ndarray
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))


@dataclass
class FinslerNorm:
    dim: int
    L: Callable  # components -> nonnegative real
    label: str = ""
    homogeneity_checked: bool = False

    @staticmethod
    def euclidean(n: int) -> "FinslerNorm":
        return FinslerNorm(n, lambda v: float(np.linalg.norm(v)), "euclidean")

    @staticmethod
    def max_norm(n: int) -> "FinslerNorm":
        return FinslerNorm(n, lambda v: float(np.max(np.abs(v))), "max")

    @staticmethod
    def from_metric(chart: MetricChart, base) -> "FinslerNorm":
        g = chart.evaluator.metric(np.asarray(base, dtype=float))
        return FinslerNorm(chart.dim,
                           lambda v: math.sqrt(max(float(np.asarray(v) @ g @ np.asarray(v)), 0.0)),
                           f"sqrt-g@{chart.label}")

    def check_homogeneity(self, samples: int = 100, seed: int = 0, tol: float = 1e-9) -> float:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(samples):
            v = rng.uniform(-1.0, 1.0, self.dim)
            a = rng.uniform(-3.0, 3.0)
            worst = max(worst, abs(self.L(a * v) - abs(a) * self.L(v)))
        self.homogeneity_checked = worst <= tol
        return worst


@dataclass(frozen=True)
class ParallelogramReport:
    max_violation: float
    witness_v: np.ndarray
    witness_w: np.ndarray
    samples: int
    seed: int


def parallelogram_check(Lnorm: FinslerNorm, samples: int, seed: int) -> ParallelogramReport:
    """Evaluate L^2(v+w) + L^2(v-w) - 2L^2(v) - 2L^2(w) on random pairs."""
    if samples < 1:
        raise BadParam("samples must be >= 1")
    rng = np.random.default_rng(seed)
    worst = -1.0
    wv = ww = np.zeros(Lnorm.dim)
    for _ in range(samples):
        v = rng.uniform(-1.0, 1.0, Lnorm.dim)
        w = rng.uniform(-1.0, 1.0, Lnorm.dim)
        viol = abs(Lnorm.L(v + w) ** 2 + Lnorm.L(v - w) ** 2
                   - 2.0 * Lnorm.L(v) ** 2 - 2.0 * Lnorm.L(w) ** 2)
        if viol > worst:
            worst, wv, ww = viol, v, w
    return ParallelogramReport(worst, wv, ww, samples, seed)


def polarize(Lnorm: FinslerNorm, v: TangentVector, w: TangentVector) -> float:
    """Candidate inner product g(v, w) from the polarization identity."""
    if not np.allclose(v.base, w.base):
        raise BadParam("polarize: vectors must share a base point")
    a, b = v.components, w.components
    return 0.5 * (Lnorm.L(a + b) ** 2 - Lnorm.L(a) ** 2 - Lnorm.L(b) ** 2)
