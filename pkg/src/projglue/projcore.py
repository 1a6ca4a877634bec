"""Projective linear algebra on the sphere of rays.

A point of the sphere of rays is a nonzero vector of R^{d+1} up to positive
scaling, so ``v`` and ``-v`` are different points.  Convex bodies are stored
through their vertex rays plus an affine chart: a linear functional that is
positive on the closure of the body.  Everything metric (Hilbert distance,
supporting functionals, sampling) is evaluated in that chart.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Callable, Sequence

import numpy as np
import shapely
from scipy.linalg import null_space
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull, QhullError

from .errors import (
    BadParameter,
    CollinearityViolation,
    DegenerateQuadruple,
    EmptyInput,
    NotInClosure,
    NotOnBoundary,
    NotProperlyConvex,
    OutsideDomain,
)

DEFAULT_TOL = 1e-9


class IllConditionedWarning(RuntimeWarning):
    pass


def as_vector(x) -> np.ndarray:
    """Return the representative vector of a Ray or array-like."""
    if isinstance(x, Ray):
        return x.v
    return np.asarray(x, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class Ray:
    """Unit representative of a ray in R^{d+1}."""

    v: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.v, dtype=float).reshape(-1)
        n = float(np.linalg.norm(v))
        if not np.isfinite(n) or n == 0.0:
            raise BadParameter("a ray needs a finite nonzero vector")
        v = v / n
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.v.size - 1

    def __neg__(self) -> "Ray":
        return Ray(-self.v)

    def angle_to(self, other) -> float:
        w = as_vector(other)
        w = w / np.linalg.norm(w)
        return float(np.arccos(np.clip(self.v @ w, -1.0, 1.0)))

    def isclose(self, other, tol: float = DEFAULT_TOL) -> bool:
        w = as_vector(other)
        return bool(np.linalg.norm(self.v - w / np.linalg.norm(w)) <= tol)

    def __repr__(self) -> str:
        return f"Ray({np.array2string(self.v, precision=6)})"


def unit_rows(points) -> np.ndarray:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    n = np.linalg.norm(p, axis=1)
    if np.any(n == 0):
        raise BadParameter("zero vector among rays")
    return p / n[:, None]


@dataclass(frozen=True, eq=False)
class ProjMap:
    """Invertible linear map acting on rays, scaled so that |det| = 1."""

    m: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise BadParameter("a projective map needs a square matrix")
        det = np.linalg.det(m)
        if not np.isfinite(det) or abs(det) < 1e-300:
            raise BadParameter("singular matrix")
        m = m / abs(det) ** (1.0 / m.shape[0])
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def size(self) -> int:
        return self.m.shape[0]

    def __call__(self, x) -> Ray:
        return Ray(self.m @ as_vector(x))

    def __matmul__(self, other: "ProjMap") -> "ProjMap":
        return ProjMap(self.m @ other.m)

    def inverse(self) -> "ProjMap":
        return ProjMap(np.linalg.inv(self.m))

    def apply_rows(self, points) -> np.ndarray:
        return unit_rows(np.asarray(points, dtype=float) @ self.m.T)


# ---------------------------------------------------------------- charts


def chart_frame(phi) -> tuple[np.ndarray, np.ndarray]:
    """Unit chart functional and an orthonormal basis of its kernel.

    When the functional is the last coordinate the kernel basis is the standard
    one, so that chart coordinates are the usual affine coordinates.
    """
    phi = np.asarray(phi, dtype=float).reshape(-1)
    phi = phi / np.linalg.norm(phi)
    n = phi.size
    last = np.zeros(n)
    last[-1] = 1.0
    if np.allclose(phi, last, atol=1e-15):
        return last, np.eye(n)[:, :-1]
    return phi, null_space(phi[None, :])


def to_chart(points, phi, basis=None) -> np.ndarray:
    phi, u = chart_frame(phi) if basis is None else (phi, basis)
    p = np.atleast_2d(np.asarray(points, dtype=float))
    w = p @ phi
    if np.any(w <= 0):
        raise OutsideDomain("ray not in the open half-space of the chart")
    return (p @ u) / w[:, None]


def from_chart(y, phi, basis=None) -> np.ndarray:
    phi, u = chart_frame(phi) if basis is None else (phi, basis)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return y @ u.T + phi[None, :]


def find_chart(vertices, tol: float = DEFAULT_TOL) -> np.ndarray:
    """A functional strictly positive on every vertex ray (maximal margin)."""
    v = unit_rows(vertices)
    n = v.shape[1]
    # variables: phi (n), s ; maximise s with phi.v_i >= s, |phi_j| <= 1
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-v, np.ones((v.shape[0], 1))])
    b_ub = np.zeros(v.shape[0])
    bounds = [(-1.0, 1.0)] * n + [(None, 1.0)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0 or -res.fun <= tol:
        raise NotProperlyConvex("no affine chart contains all rays")
    phi = res.x[:n]
    return phi / np.linalg.norm(phi)


# ---------------------------------------------------------------- half-spaces


@dataclass(frozen=True, eq=False)
class Facets:
    """Facet data of a polytope in a fixed chart.

    ``normals @ y + offsets <= 0`` describes the body in chart coordinates,
    ``functionals @ x >= 0`` describes it on rays.
    """

    normals: np.ndarray
    offsets: np.ndarray
    functionals: np.ndarray
    members: tuple[frozenset, ...]


def chart_halfspaces(points: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Unit outward normals and offsets of the convex hull of chart points."""
    pts = np.atleast_2d(points)
    d = pts.shape[1]
    if d == 1:
        lo, hi = pts[:, 0].min(), pts[:, 0].max()
        return np.array([[-1.0], [1.0]]), np.array([lo, -hi])
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise BadParameter(f"degenerate polytope: {exc}") from None
    eq = hull.equations
    if d == 2:
        return eq[:, :2].copy(), eq[:, 2].copy()
    keep: list[np.ndarray] = []
    for row in eq:
        if not any(np.linalg.norm(row - k) < tol * 100 for k in keep):
            keep.append(row)
    eq = np.array(keep)
    return eq[:, :d].copy(), eq[:, d].copy()


# ---------------------------------------------------------------- bodies


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Properly convex body given by vertex rays and a chart.

    ``quadric`` optionally marks the body as the exact ellipsoid
    ``{x : x^T Q x < 0}`` on the chart side; the vertices are then only a
    sampling of its boundary and ``resolution`` records their angular step.
    Bodies that are sampled polygons of a smooth curve set ``resolution``
    without a quadric.
    """

    vertices: np.ndarray
    chart: np.ndarray
    quadric: np.ndarray | None = None
    resolution: float | None = None

    def __post_init__(self) -> None:
        v = unit_rows(self.vertices)
        phi, _ = chart_frame(self.chart)
        if np.any(v @ phi <= 0):
            raise NotProperlyConvex("chart functional not positive on all vertices")
        if self.quadric is None and np.linalg.matrix_rank(v, tol=1e-10) < v.shape[1]:
            raise BadParameter("vertices do not span the ambient dimension")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "chart", phi)
        if self.quadric is not None:
            object.__setattr__(self, "quadric", np.array(self.quadric, dtype=float))

    # constructors
    @classmethod
    def from_vertices(cls, vertices, chart=None, resolution: float | None = None) -> "ConvexBody":
        v = unit_rows(vertices)
        if chart is None:
            chart = find_chart(v)
        return cls(v, chart, resolution=resolution)

    @classmethod
    def from_chart_points(cls, points, resolution: float | None = None) -> "ConvexBody":
        """Body whose vertices are the given points of the standard affine chart."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        v = np.hstack([p, np.ones((p.shape[0], 1))])
        e = np.zeros(v.shape[1])
        e[-1] = 1.0
        return cls(v, e, resolution=resolution)

    @classmethod
    def klein_ball(cls, d: int, samples: int = 256) -> "ConvexBody":
        """The unit ball of the standard chart, stored exactly as a quadric."""
        q = np.eye(d + 1)
        q[-1, -1] = -1.0
        return cls(_sphere_samples(d, samples), np.eye(d + 1)[-1], quadric=q,
                   resolution=2 * np.pi / samples)

    @classmethod
    def sampled_disk(cls, n: int, radius: float = 1.0, center=(0.0, 0.0)) -> "ConvexBody":
        """Regular n-gon inscribed in a circle, flagged as a sampled smooth body."""
        t = 2 * np.pi * np.arange(n) / n
        pts = np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])
        return cls.from_chart_points(pts, resolution=2 * np.pi / n)

    # geometry
    @property
    def dim(self) -> int:
        return self.vertices.shape[1] - 1

    @cached_property
    def frame(self) -> tuple[np.ndarray, np.ndarray]:
        return chart_frame(self.chart)

    def chart_points(self, x=None) -> np.ndarray:
        phi, u = self.frame
        return to_chart(self.vertices if x is None else x, phi, u)

    def normalize(self, x) -> np.ndarray:
        """Representative of ``x`` on the chart hyperplane ``chart . x = 1``."""
        x = as_vector(x)
        w = x @ self.chart
        if w <= 0:
            raise OutsideDomain("ray on the wrong side of the chart")
        return x / w

    @cached_property
    def facets(self) -> Facets:
        phi, u = self.frame
        pts = self.chart_points()
        normals, offsets = chart_halfspaces(pts)
        functionals = -(normals @ u.T + offsets[:, None] * phi[None, :])
        scale = 1.0 + np.abs(pts).max()
        resid = pts @ normals.T + offsets[None, :]
        members = tuple(frozenset(np.nonzero(np.abs(resid[:, j]) <= 1e-9 * scale)[0].tolist())
                        for j in range(normals.shape[0]))
        return Facets(normals, offsets, functionals, members)

    @cached_property
    def barycenter(self) -> np.ndarray:
        """Chart barycenter of the vertices, returned as a chart-normalized vector."""
        phi, u = self.frame
        y = self.chart_points().mean(axis=0)
        return from_chart(y, phi, u)[0]

    def margins(self, x) -> np.ndarray:
        """Signed chart distances of ``x`` to the facet hyperplanes (positive inside)."""
        xh = self.normalize(x)
        f = self.facets
        phi, u = self.frame
        y = xh @ u
        return -(f.normals @ y + f.offsets)

    def quadric_value(self, x) -> float:
        xh = self.normalize(x)
        return float(xh @ self.quadric @ xh)

    def interior_margin(self, x) -> float:
        """Positive inside, zero on the boundary, negative outside."""
        if self.quadric is not None:
            return -self.quadric_value(x)
        return float(self.margins(x).min())

    def contains(self, x, tol: float = DEFAULT_TOL) -> bool:
        try:
            return self.interior_margin(x) >= -tol
        except OutsideDomain:
            return False

    def chord(self, xh: np.ndarray, u: np.ndarray) -> tuple[float, float]:
        """Parameters s_lo < 0 < s_hi where ``xh + s u`` leaves the body."""
        if self.quadric is not None:
            q = self.quadric
            a, b, c = u @ q @ u, u @ q @ xh, xh @ q @ xh
            if a <= 0:
                raise OutsideDomain("line does not cross the ellipsoid boundary twice")
            disc = np.sqrt(max(b * b - a * c, 0.0))
            qq = -(b + np.copysign(disc, b))
            r1, r2 = qq / a, c / qq
            return float(min(r1, r2)), float(max(r1, r2))
        f = self.facets
        a = f.functionals @ xh
        b = f.functionals @ u
        with np.errstate(divide="ignore", invalid="ignore"):
            r = -a / b
        hi = r[b < 0]
        lo = r[b > 0]
        return (float(lo.max()) if lo.size else -np.inf, float(hi.min()) if hi.size else np.inf)


def _sphere_samples(d: int, n: int) -> np.ndarray:
    """Deterministic sample of the boundary of the unit ball, as rays."""
    if d == 1:
        pts = np.array([[-1.0], [1.0]])
    elif d == 2:
        t = 2 * np.pi * np.arange(n) / n
        pts = np.column_stack([np.cos(t), np.sin(t)])
    else:
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(n, d))
        pts /= np.linalg.norm(pts, axis=1)[:, None]
    return np.hstack([pts, np.ones((pts.shape[0], 1))])


@dataclass(frozen=True, eq=False)
class Segment:
    """Minimal segment between two non-antipodal rays."""

    a: Ray
    b: Ray

    def __post_init__(self) -> None:
        if np.linalg.norm(self.a.v + self.b.v) < 1e-12:
            raise BadParameter("antipodal endpoints do not determine a segment")

    def point(self, t: float) -> Ray:
        return Ray((1 - t) * self.a.v + t * self.b.v)

    def contains(self, x, tol: float = DEFAULT_TOL) -> bool:
        w = as_vector(x)
        coef, *_ = np.linalg.lstsq(np.column_stack([self.a.v, self.b.v]), w, rcond=None)
        resid = np.linalg.norm(np.column_stack([self.a.v, self.b.v]) @ coef - w)
        return bool(resid <= tol * np.linalg.norm(w) and np.all(coef >= -tol))


# ---------------------------------------------------------------- invariants


def _det2(p: np.ndarray, q: np.ndarray) -> float:
    return float(p[0] * q[1] - p[1] * q[0])


def cross_ratio(a, x, y, b, tol: float = DEFAULT_TOL) -> float:
    """Cross-ratio [a, x, y, b], normalized so that [0, 1, t, inf] = t.

    The four arguments are vectors (or rays) spanning a 2-plane.
    """
    m = np.vstack([as_vector(a), as_vector(x), as_vector(y), as_vector(b)])
    if m.shape[1] == 2:
        c = m
    else:
        _, s, vt = np.linalg.svd(m)
        if s[2] > tol * s[0]:
            raise CollinearityViolation(f"rays span more than a line (sigma_3/sigma_1 = {s[2] / s[0]:.3g})")
        c = m @ vt[:2].T
    ca, cx, cy, cb = c
    norms = np.linalg.norm(c, axis=1)
    xa = _det2(cx, ca)
    by = _det2(cb, cy)
    if abs(xa) <= tol * norms[1] * norms[0] or abs(by) <= tol * norms[3] * norms[2]:
        raise DegenerateQuadruple("a coincides with x or y coincides with b")
    return _det2(cy, ca) * _det2(cb, cx) / (xa * by)


def hilbert_distance(body: ConvexBody, x, y, tol: float = DEFAULT_TOL) -> float:
    """Hilbert distance 0.5 log [a, x, y, b] inside ``body``."""
    for p in (x, y):
        try:
            inside = body.interior_margin(p) > tol
        except OutsideDomain:
            inside = False
        if not inside:
            raise OutsideDomain("point is not in the interior of the body")
    xh, yh = body.normalize(x), body.normalize(y)
    u = yh - xh
    if np.linalg.norm(u) <= 1e-15 * max(1.0, np.linalg.norm(xh)):
        return 0.0
    lo, hi = body.chord(xh, u)
    if np.isinf(lo) and np.isinf(hi):
        return 0.0
    if np.isinf(hi):
        excess = 1.0 / (-lo)
    elif np.isinf(lo):
        excess = 1.0 / (hi - 1.0)
    else:
        excess = (hi - lo) / ((-lo) * (hi - 1.0))
    return 0.5 * float(np.log1p(excess))


# ---------------------------------------------------------------- support


@dataclass(frozen=True, eq=False)
class SupportCertificate:
    functional: np.ndarray
    value_at_point: float
    min_on_vertices: float
    active_facets: tuple[int, ...]


def supporting_halfspace(body: ConvexBody, p, tol: float = DEFAULT_TOL) -> SupportCertificate | None:
    """Functional vanishing at ``p`` and nonnegative on ``body``; None if ``p`` is interior."""
    try:
        ph = body.normalize(p)
    except OutsideDomain:
        raise NotInClosure("point is on the far side of the chart") from None
    if body.quadric is not None:
        val = float(ph @ body.quadric @ ph)
        if val < -tol:
            return None
        if val > tol:
            raise NotInClosure(f"point outside the ellipsoid (form value {val:.3g})")
        phi = -(body.quadric @ ph)
        if phi @ body.barycenter < 0:
            phi = -phi
        active: tuple[int, ...] = ()
    else:
        m = body.margins(ph)
        if m.min() < -tol:
            raise NotInClosure(f"point outside the body by {-m.min():.3g}")
        idx = np.nonzero(m <= tol)[0]
        if idx.size == 0:
            return None
        phi = body.facets.functionals[idx].sum(axis=0)
        active = tuple(int(i) for i in idx)
    phi = phi - (phi @ ph) * body.chart / (body.chart @ ph)
    phi = phi / np.linalg.norm(phi)
    verts = body.vertices / (body.vertices @ body.chart)[:, None]
    return SupportCertificate(phi, float(phi @ ph), float((verts @ phi).min()), active)


@dataclass(frozen=True)
class C1Witness:
    spread: float
    tolerance: float
    normals: tuple[tuple[float, ...], ...]


def is_c1_point(body: ConvexBody, p, tol: float = DEFAULT_TOL) -> tuple[bool, C1Witness]:
    """Whether ``p`` has a unique supporting hyperplane.

    For polytopes the test is exact (one facet through ``p``).  For sampled
    smooth bodies the angular spread of the normal cone is compared with twice
    the sampling resolution.
    """
    ph = body.normalize(p)
    if body.quadric is not None:
        val = float(ph @ body.quadric @ ph)
        if val < -tol:
            raise NotOnBoundary("point is interior")
        if val > tol:
            raise NotInClosure("point is outside")
        n = body.quadric @ ph
        return True, C1Witness(0.0, 0.0, (tuple(n / np.linalg.norm(n)),))
    m = body.margins(ph)
    if m.min() < -tol:
        raise NotInClosure("point is outside")
    idx = np.nonzero(m <= tol)[0]
    if idx.size == 0:
        raise NotOnBoundary("point is interior")
    normals = body.facets.normals[idx]
    spread = 0.0
    for i in range(len(normals)):
        for j in range(i + 1, len(normals)):
            spread = max(spread, float(np.arccos(np.clip(normals[i] @ normals[j], -1, 1))))
    limit = 2.0 * body.resolution if body.resolution else 1e-9
    return spread <= limit, C1Witness(spread, limit, tuple(tuple(r) for r in normals))


# ---------------------------------------------------------------- spectra


@dataclass(frozen=True, eq=False)
class EigenPart:
    """One spectral component: a real eigenvalue or a complex-conjugate pair."""

    value: complex
    modulus: float
    multiplicity: int
    basis: np.ndarray
    kind: str
    angle: float

    @property
    def vector(self) -> np.ndarray:
        return self.basis[0]


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    for c in v:
        if abs(c) > 1e-12:
            return v if c > 0 else -v
    return v


def eigen_split(g, cluster_tol: float = 1e-6) -> list[EigenPart]:
    """Real spectral data of ``g`` sorted by decreasing modulus."""
    m = g.m if isinstance(g, ProjMap) else np.asarray(g, dtype=float)
    n = m.shape[0]
    w, vecs = np.linalg.eig(m)
    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > 1e10:
        warnings.warn(f"ill-conditioned eigenbasis (condition number {cond:.3g})",
                      IllConditionedWarning, stacklevel=2)
    scale = max(1.0, float(np.abs(m).max()))
    used = np.zeros(n, dtype=bool)
    parts: list[EigenPart] = []
    order = np.lexsort((w.imag, w.real))
    for i in order:
        if used[i]:
            continue
        close = np.nonzero(~used & (np.abs(w - w[i]) <= cluster_tol * max(1.0, abs(w[i]))))[0]
        used[close] = True
        lam = complex(np.mean(w[close]))
        mult = len(close)
        if abs(lam.imag) <= 1e-9 * max(1.0, abs(lam)):
            lam = complex(lam.real, 0.0)
            _, s, vt = np.linalg.svd(m - lam.real * np.eye(n))
            k = max(1, int(np.sum(s <= 1e-7 * scale)))
            k = min(k, mult)
            basis = vt[n - k:][::-1].copy()
            if k == 1:
                basis[0] = _sign_normalize(basis[0])
            parts.append(EigenPart(lam, abs(lam), mult, basis, "real", 0.0 if lam.real > 0 else np.pi))
        elif lam.imag > 0:
            v = vecs[:, i]
            q, _ = np.linalg.qr(np.column_stack([v.real, v.imag]))
            basis = np.array([_sign_normalize(q[:, 0]), q[:, 1]])
            parts.append(EigenPart(lam, abs(lam), mult, basis, "complex", float(np.angle(lam))))
    parts.sort(key=lambda p: -p.modulus)
    # deterministic tie-breaking among equal moduli
    out: list[EigenPart] = []
    k = 0
    while k < len(parts):
        j = k + 1
        while j < len(parts) and abs(parts[j].modulus - parts[k].modulus) <= 1e-9 * max(1.0, parts[k].modulus):
            j += 1
        group = sorted(parts[k:j], key=lambda p: tuple(-p.basis[0]))
        out.extend(group)
        k = j
    return out


# ---------------------------------------------------------------- distances between hulls


def _hull_optimal(v: np.ndarray, p: np.ndarray, x: np.ndarray) -> bool:
    """First-order test: ``x`` in the hull is nearest to ``p`` iff no vertex lies beyond it."""
    g = x - p
    tol = 1e-12 * (1.0 + np.abs(v).max()) ** 2
    return bool(np.all((v - x) @ g >= -tol))


def _hull_distance_exhaustive(v: np.ndarray, p: np.ndarray) -> float:
    best = np.inf
    dim = v.shape[1]
    for size in range(1, min(len(v), dim + 1) + 1):
        for idx in combinations(range(len(v)), size):
            s = v[list(idx)]
            base = s[0]
            if size == 1:
                best = min(best, float(np.linalg.norm(base - p)))
                continue
            e = (s[1:] - base).T
            coef, *_ = np.linalg.lstsq(e, p - base, rcond=None)
            if np.all(coef >= -1e-12) and coef.sum() <= 1 + 1e-12:
                best = min(best, float(np.linalg.norm(base + e @ coef - p)))
    return best


def hull_distance(point, points) -> float:
    """Euclidean distance from ``point`` to the convex hull of ``points``."""
    p = np.asarray(point, dtype=float)
    v = np.atleast_2d(np.asarray(points, dtype=float))
    scale = 1.0 + np.abs(v).max() + np.abs(p).max()
    w = 1e4 * scale
    a = np.vstack([v.T, w * np.ones((1, v.shape[0]))])
    b = np.concatenate([p, [w]])
    lam, _ = nnls(a, b, maxiter=50 * v.shape[0])
    support = np.nonzero(lam > 0)[0]
    if lam.sum() <= 0:
        return _hull_distance_exhaustive(v, p)
    best = lam / lam.sum()
    # polish on the support with the exact affine constraint
    if support.size:
        s = v[support]
        k = s.shape[0]
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = s @ s.T
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([s @ p, [1.0]])
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
        if np.all(sol >= -1e-12):
            cand = np.zeros_like(lam)
            cand[support] = np.clip(sol, 0, None)
            cand /= cand.sum()
            if np.linalg.norm(v.T @ cand - p) <= np.linalg.norm(v.T @ best - p):
                best = cand
    x = v.T @ best
    if _hull_optimal(v, p, x):
        return float(np.linalg.norm(x - p))
    # nnls occasionally stops at a non-optimal point; settle it exactly
    return _hull_distance_exhaustive(v, p)


def hausdorff_hulls(p_points, q_points) -> float:
    """Hausdorff distance between the convex hulls of two finite point sets."""
    p = np.atleast_2d(p_points)
    q = np.atleast_2d(q_points)
    d1 = max(hull_distance(x, q) for x in p)
    d2 = max(hull_distance(y, p) for y in q)
    return max(d1, d2)


# ---------------------------------------------------------------- sampling oracle


@dataclass(frozen=True)
class OracleResult:
    passed: bool
    samples: int
    counterexample: dict | None = None

    def to_dict(self) -> dict:
        return {"passed": self.passed, "samples": self.samples, "counterexample": self.counterexample}


@dataclass(frozen=True, eq=False)
class ChartPolytope:
    """A tile already expressed in chart coordinates.

    ``normals @ y + offsets <= 0`` inside (unit normals); for d = 2 the points
    are listed in cyclic order.
    """

    points: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    @classmethod
    def from_functionals(cls, rays, functionals, chart) -> "ChartPolytope":
        """Chart form of the cone cut out by ``functionals @ x >= 0`` with the given vertex rays."""
        phi, u = chart_frame(chart)
        f = np.atleast_2d(np.asarray(functionals, dtype=float))
        a = f @ u
        c = f @ phi
        nrm = np.linalg.norm(a, axis=1)
        return cls(to_chart(rays, phi, u), -a / nrm[:, None], -c / nrm)


def _as_chart_polytope(t, phi: np.ndarray, u: np.ndarray) -> ChartPolytope:
    if isinstance(t, ChartPolytope):
        return t
    p = to_chart(t.vertices, phi, u)
    nrm, off = chart_halfspaces(p)
    if p.shape[1] == 2:
        p = p[ConvexHull(p).vertices]
    return ChartPolytope(p, nrm, off)


def convexity_sample_oracle(tiles: Sequence[ConvexBody | ChartPolytope], samples: int, seed: int = 0,
                            tol: float = DEFAULT_TOL, chart=None, batch: int = 20000,
                            candidates: Callable[[int, int], Sequence[int]] | None = None) -> OracleResult:
    """Empirical convexity test of a union of tiles.

    Random pairs of points in distinct tiles are joined by segments, and each
    segment must be covered by the tiles (each inflated by ``tol``).
    ``chart`` is required when the tiles are given as chart polytopes.
    ``candidates(i, j)`` may restrict the tiles tested against a segment from
    tile i to tile j; coverage by a subset still proves coverage by the union.
    """
    if not tiles:
        raise EmptyInput("no tiles")
    if len(tiles) < 2 or samples <= 0:
        return OracleResult(True, 0)
    if chart is None:
        if isinstance(tiles[0], ChartPolytope):
            raise BadParameter("chart polytopes need an explicit chart")
        chart = tiles[0].chart
    phi, u = chart_frame(chart)
    polys = [_as_chart_polytope(t, phi, u) for t in tiles]
    pts = [p.points for p in polys]
    d = pts[0].shape[1]
    nf = max(p.normals.shape[0] for p in polys)
    nt = len(tiles)
    a_all = np.zeros((nt, nf, d))
    b_all = np.ones((nt, nf))
    for i, p in enumerate(polys):
        a_all[i, : p.normals.shape[0]] = p.normals
        b_all[i, : p.normals.shape[0]] = -p.offsets + tol
    nv = max(p.shape[0] for p in pts)
    verts = np.zeros((nt, nv, d))
    mask = np.zeros((nt, nv), dtype=bool)
    for i, p in enumerate(pts):
        verts[i, : p.shape[0]] = p
        mask[i, : p.shape[0]] = True
    lo_box = np.array([p.min(axis=0) for p in pts]) - tol
    hi_box = np.array([p.max(axis=0) for p in pts]) + tol

    rng = np.random.default_rng(seed)
    i_tile = rng.integers(0, nt, size=samples)
    j_tile = (i_tile + rng.integers(1, nt, size=samples)) % nt

    def sample_points(idx: np.ndarray) -> np.ndarray:
        wts = rng.exponential(size=(idx.size, nv)) * mask[idx]
        wts /= wts.sum(axis=1, keepdims=True)
        return np.einsum("sv,svd->sd", wts, verts[idx])

    start = sample_points(i_tile)
    end = sample_points(j_tile)

    tree = None
    if d == 2 and candidates is None:
        shapes = [shapely.Polygon(p).buffer(tol) for p in pts]
        tree = shapely.STRtree(shapes)

    for b0 in range(0, samples, batch):
        sl = slice(b0, min(samples, b0 + batch))
        p0, p1 = start[sl], end[sl]
        ns = p0.shape[0]
        if candidates is not None:
            lists = [np.asarray(candidates(int(i_tile[k]), int(j_tile[k])), dtype=int)
                     for k in range(sl.start, sl.stop)]
            seg_idx = np.repeat(np.arange(ns), [len(q) for q in lists])
            tile_idx = np.concatenate(lists)
        elif tree is not None:
            lines = shapely.linestrings(np.stack([p0, p1], axis=1))
            seg_idx, tile_idx = tree.query(lines, predicate="intersects")
        else:
            smin = np.minimum(p0, p1)
            smax = np.maximum(p0, p1)
            pairs = [np.nonzero(np.all(lo_box <= smax[s], axis=1) & np.all(hi_box >= smin[s], axis=1))[0]
                     for s in range(ns)]
            seg_idx = np.concatenate([np.full(len(q), s) for s, q in enumerate(pairs)]).astype(int)
            tile_idx = np.concatenate(pairs).astype(int)
        a = a_all[tile_idx]
        rhs = b_all[tile_idx] - np.einsum("kfd,kd->kf", a, p0[seg_idx])
        den = np.einsum("kfd,kd->kf", a, (p1 - p0)[seg_idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = rhs / den
        upper = np.where(den > 0, ratio, np.inf).min(axis=1)
        lower = np.where(den < 0, ratio, -np.inf).max(axis=1)
        blocked = np.any((den == 0) & (rhs < 0), axis=1)
        lo = np.clip(lower, 0.0, 1.0)
        hi = np.clip(upper, 0.0, 1.0)
        ok = (lo <= hi) & ~blocked & (upper >= 0) & (lower <= 1)
        seg_idx, lo, hi = seg_idx[ok], lo[ok], hi[ok]
        order = np.lexsort((lo, seg_idx))
        seg_idx, lo, hi = seg_idx[order], lo[order], hi[order]
        run = np.maximum.accumulate(hi + 2.0 * seg_idx) - 2.0 * seg_idx
        bad = np.zeros(ns, dtype=bool)
        covered = np.zeros(ns, dtype=bool)
        covered[seg_idx] = True
        bad |= ~covered
        first = np.ones(seg_idx.size, dtype=bool)
        first[1:] = seg_idx[1:] != seg_idx[:-1]
        bad[seg_idx[first & (lo > 0)]] = True
        gap = ~first
        gap[1:] &= lo[1:] > run[:-1]
        bad[seg_idx[gap]] = True
        last = np.ones(seg_idx.size, dtype=bool)
        last[:-1] = seg_idx[1:] != seg_idx[:-1]
        bad[seg_idx[last & (run < 1.0)]] = True
        if bad.any():
            s = int(np.nonzero(bad)[0][0])
            k = b0 + s
            return OracleResult(False, k + 1, {
                "start": [float(c) for c in p0[s]],
                "end": [float(c) for c in p1[s]],
                "tiles": [int(i_tile[k]), int(j_tile[k])],
            })
    return OracleResult(True, samples)
