"""Hyperbolic building blocks and the bulging calculus.

Coordinates follow the hyperboloid model with the form
<x, y> = x_1 y_1 + ... + x_d y_d - x_{d+1} y_{d+1}; the Klein model is the
affine chart x_{d+1} = 1.  Bulging along a hyperplane with polar point p
scales the hyperplane by mu^-1 and p by mu^d.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BadParameter,
    Infeasible,
    NotLorentz,
    NotRealizable,
    OffHyperboloid,
    OutsidePolytope,
    SubcriticalTrace,
)
from .projcore import ConvexBody, ProjMap, eigen_split
from .tubes import LiftedSL2, Tube, tube_from_frame

HYPERBOLOID_TOL = 1e-10


def lorentz(d: int) -> np.ndarray:
    j = np.eye(d + 1)
    j[-1, -1] = -1.0
    return j


def minkowski(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(x[:-1] @ y[:-1] - x[-1] * y[-1])


@dataclass(frozen=True, eq=False)
class HypPoint:
    x: np.ndarray

    def __post_init__(self) -> None:
        x = np.array(self.x, dtype=float).reshape(-1)
        if abs(minkowski(x, x) + 1.0) > HYPERBOLOID_TOL * max(1.0, x[-1] ** 2) or x[-1] <= 0:
            raise OffHyperboloid("point is not on the upper sheet of the hyperboloid")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @classmethod
    def from_klein(cls, y) -> "HypPoint":
        y = np.asarray(y, dtype=float)
        r2 = float(y @ y)
        if r2 >= 1:
            raise OffHyperboloid("Klein point outside the unit ball")
        return cls(np.append(y, 1.0) / np.sqrt(1.0 - r2))

    @property
    def klein(self) -> np.ndarray:
        return self.x[:-1] / self.x[-1]


def hyp_distance(p, q) -> float:
    """Hyperbolic distance arcosh(-<p, q>), evaluated stably."""
    p = p if isinstance(p, HypPoint) else HypPoint(p)
    q = q if isinstance(q, HypPoint) else HypPoint(q)
    diff = p.x - q.x
    chord2 = max(minkowski(diff, diff), 0.0)
    return float(2.0 * np.arcsinh(np.sqrt(chord2) / 2.0))


# ---------------------------------------------------------------- bulging


def bulge_matrix(mu: float, d: int, frame=None) -> np.ndarray:
    """diag(mu^-1 I_d, mu^d), optionally expressed in a frame.

    ``frame`` has the hyperplane basis as its first d columns and the polar
    as its last column.
    """
    if not mu > 0:
        raise BadParameter("bulging parameter must be positive")
    b = np.diag(np.concatenate([np.full(d, 1.0 / mu), [mu ** d]]))
    if frame is None:
        return b
    f = np.asarray(frame, dtype=float)
    return f @ b @ np.linalg.inv(f)


def bulge_along(functional, polar, mu: float) -> np.ndarray:
    """Bulging fixing the hyperplane ker(functional) and the polar point."""
    if not mu > 0:
        raise BadParameter("bulging parameter must be positive")
    n = np.asarray(functional, dtype=float)
    p = np.asarray(polar, dtype=float)
    d = n.size - 1
    s = n @ p
    if abs(s) < 1e-14 * np.linalg.norm(n) * np.linalg.norm(p):
        raise BadParameter("polar lies on its hyperplane")
    proj = np.outer(p, n) / s
    return (np.eye(d + 1) - proj) / mu + mu ** d * proj


def hyperbolic_polar(functional) -> np.ndarray:
    """Lorentz-dual point of the hyperplane, on the side where the functional is positive."""
    n = np.asarray(functional, dtype=float)
    p = lorentz(n.size - 1) @ n
    return p if n @ p > 0 else -p


def reflection(functional, polar) -> np.ndarray:
    """Linear reflection fixing the hyperplane and negating the polar."""
    n = np.asarray(functional, dtype=float)
    p = np.asarray(polar, dtype=float)
    return np.eye(n.size) - 2.0 * np.outer(p, n) / (n @ p)


def rotation2(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def big_rotation(theta: float, d: int) -> np.ndarray:
    """diag(I_{d-1}, r_theta)."""
    r = np.eye(d + 1)
    r[d - 1:, d - 1:] = rotation2(theta)
    return r


def small_bulge(mu: float) -> np.ndarray:
    return np.diag([1.0 / mu, mu])


# ---------------------------------------------------------------- corners


@dataclass(frozen=True)
class CornerSpec:
    theta: float
    mu: float
    mu_prime: float
    d: int = 3

    def __post_init__(self) -> None:
        if not 0 < self.theta < np.pi / 2:
            raise BadParameter("corner angle must lie in (0, pi/2)")
        if not (self.mu > 0 and self.mu_prime > 0):
            raise BadParameter("wall parameters must be positive")
        if self.d < 2:
            raise BadParameter("dimension must be at least 2")

    @property
    def nu(self) -> float:
        return self.mu ** ((self.d + 1) / 2)

    @property
    def nu_prime(self) -> float:
        return self.mu_prime ** ((self.d + 1) / 2)

    @classmethod
    def from_nu(cls, theta: float, nu: float, nu_prime: float, d: int = 3) -> "CornerSpec":
        e = 2.0 / (d + 1)
        return cls(theta, nu ** e, nu_prime ** e, d)


def meridian_holonomy(c: CornerSpec) -> np.ndarray:
    """R_theta B_mu R_theta B_mu'^-1."""
    r = big_rotation(c.theta, c.d)
    return r @ bulge_matrix(c.mu, c.d) @ r @ bulge_matrix(1.0 / c.mu_prime, c.d)


def angle_block(m: np.ndarray, d: int) -> np.ndarray:
    """Determinant-one version of the lower-right 2x2 block."""
    blk = np.asarray(m, dtype=float)[d - 1:, d - 1:]
    return blk / np.sqrt(abs(np.linalg.det(blk)))


def corner_trace(c: CornerSpec) -> float:
    co2, si2 = np.cos(c.theta) ** 2, np.sin(c.theta) ** 2
    ratio = c.nu / c.nu_prime
    prod = c.nu * c.nu_prime
    return float(co2 * (ratio + 1.0 / ratio) - si2 * (prod + 1.0 / prod))


@dataclass(frozen=True)
class IdentityReport:
    residuals: tuple[float, float]
    lhs: tuple[float, float]
    rhs: tuple[float, float]
    positive: bool

    @property
    def max_residual(self) -> float:
        return max(abs(r) for r in self.residuals)


def special_identity_check(c: CornerSpec) -> IdentityReport:
    """Evaluate r^2 - r t + 1 against sin^2(theta)(r^2 + 1 + r p + r/p) for both ratios.

    Residuals are relative to max(1, |lhs|, |rhs|).
    """
    t = corner_trace(c)
    p = c.nu * c.nu_prime
    si2 = np.sin(c.theta) ** 2
    lhs, rhs = [], []
    for r in (c.nu / c.nu_prime, c.nu_prime / c.nu):
        lhs.append(r * r - r * t + 1.0)
        rhs.append(si2 * (r * r + 1.0 + r * p + r / p))
    res = tuple(float((a - b) / max(1.0, abs(a), abs(b))) for a, b in zip(lhs, rhs))
    return IdentityReport(res, tuple(lhs), tuple(rhs), bool(min(lhs) > 0))


def lambda_from_trace(t: float, tol: float = 1e-9) -> float:
    if t < 2.0 - tol:
        raise SubcriticalTrace(f"trace {t:.12g} below 2", t - 2.0)
    h = max(t / 2.0, 1.0)
    return float(h + np.sqrt((h - 1.0) * (h + 1.0)))


def corner_lambda_mu(c: CornerSpec, tol: float = 1e-9) -> tuple[float, float]:
    """(lambda_C, mu_C) of a corner with trace at least 2."""
    lam = lambda_from_trace(corner_trace(c), tol)
    mu_c = max(c.mu / c.mu_prime, c.mu_prime / c.mu)
    return lam, float(mu_c)


def wall_holonomy_generators(base_generators, c: CornerSpec, tol: float = 1e-9) -> list[np.ndarray]:
    """Holonomy generators of the blown-up wall attached to corner ``c``."""
    d = c.d
    lam, mu_c = corner_lambda_mu(c, tol)
    form = lorentz(d - 2)
    out = []
    for gamma in base_generators:
        gm = np.asarray(gamma, dtype=float)
        if gm.shape != (d - 1, d - 1) or np.abs(gm.T @ form @ gm - form).max() > 1e-9:
            raise NotLorentz("base generator does not preserve the form of signature (d-2, 1)")
        m = np.eye(d + 1)
        m[: d - 1, : d - 1] = gm
        out.append(m)
    k = mu_c ** ((d - 1) / 2)
    diag = np.concatenate([np.full(d - 1, 1.0 / mu_c), [k * lam, k / lam]])
    m = np.diag(diag)
    if abs(corner_trace(c) - 2.0) <= tol:
        m[d - 1, d] = 1.0
    out.append(m)
    return out


def meridian_tube(c: CornerSpec) -> Tube:
    """Tube of the meridian holonomy (stratum already in standard position)."""
    m = meridian_holonomy(c)
    d = c.d
    mu_t = c.mu / c.mu_prime
    return Tube(d, mu_t, LiftedSL2(angle_block(m, d), 0), m[: d - 1, d - 1:])


# ---------------------------------------------------------------- parameter solver


@dataclass(frozen=True)
class ParamTriple:
    a: float
    b: float
    c: float
    eps: float | None = None

    def __post_init__(self) -> None:
        a, b, c = self.a, self.b, self.c
        wall = -2.0 + b * b / 2.0
        ok = a > 1 and b > 3 and c > 1 and c <= wall * (1 + 1e-15)
        if self.eps is not None:
            ok = ok and a < 1 + self.eps
        if not ok:
            raise OutsidePolytope(f"({a}, {b}, {c}) is outside the parameter polytope")

    @property
    def wall_margin(self) -> float:
        return -2.0 + self.b ** 2 / 2.0 - self.c


@dataclass(frozen=True)
class SolverResult:
    ell: float
    dval: float
    mu: float
    mu_prime: float
    trace: float
    lam: float
    s: float
    feasibility_margin: float
    chain_margins: tuple[float, float]


def solve_boundary_torus_params(p: ParamTriple, theta: float) -> SolverResult:
    """Wall parameters realising a boundary torus with eigenvalue data (a, b, c)."""
    if not 0 < theta < np.pi / 4:
        raise BadParameter("theta must lie in (0, pi/4)")
    a, b, c = p.a, p.b, p.c
    co2, si2 = np.cos(theta) ** 2, np.sin(theta) ** 2
    bb = b * b + 1.0 / (b * b)
    cc = c + 1.0 / c
    s = (co2 * bb - cc) / si2
    if not s > 2.0:
        raise Infeasible(f"no d > 1 (ratio {s:.12g} is not above 2)")
    half = s / 2.0
    d2 = half + np.sqrt((half - 1.0) * (half + 1.0))
    dval = float(np.sqrt(d2))
    mu = float(np.sqrt(b * dval))
    mu_p = float(np.sqrt(dval / b))
    spec = CornerSpec(theta, mu, mu_p, 3)
    t = corner_trace(spec)
    lam, _ = corner_lambda_mu(spec)
    chain = (float(0.5 * bb - 1.0 - cc), float(co2 * bb - 2.0 * si2 - (0.5 * bb - 1.0)))
    return SolverResult(float(2.0 * np.log(a)), dval, mu, mu_p, t, lam, float(s), float(s - 2.0), chain)


# name used by the published interface
solve_thm15_params = solve_boundary_torus_params


def boundary_torus_matrices(p: ParamTriple) -> tuple[np.ndarray, np.ndarray]:
    a, b, c = p.a, p.b, p.c
    return np.diag([a, 1.0 / a, 1.0, 1.0]), np.diag([1.0 / b, 1.0 / b, b * c, b / c])


# ---------------------------------------------------------------- planar examples


@dataclass(frozen=True, eq=False)
class GuidingResult:
    rho: np.ndarray
    passed: bool
    eigenvalues: tuple[float, ...]
    vertex_eigenvalue: float
    vertex_residual: float
    tube: Tube | None


def guiding_rho(theta: float, mu1: float, mu2: float, isometry=None) -> GuidingResult:
    """Holonomy of a bulged cone point of angle 2 theta in the plane.

    The configuration is two lines through the origin of the Klein disk at
    angle ``theta``; ``isometry`` (an element of O(2,1)) moves it elsewhere.
    """
    a = np.eye(3) if isometry is None else np.asarray(isometry, dtype=float)
    j = lorentz(2)
    if np.abs(a.T @ j @ a - j).max() > 1e-9:
        raise NotLorentz("isometry does not preserve the form")
    v = a @ np.array([0.0, 0.0, 1.0])
    ainv_t = np.linalg.inv(a).T
    n1 = ainv_t @ np.array([0.0, 1.0, 0.0])
    n2 = ainv_t @ np.array([-np.sin(theta), np.cos(theta), 0.0])
    b1 = bulge_along(n1, j @ n1, mu1)
    b2 = bulge_along(n2, j @ n2, mu2)
    rot = a @ np.block([[rotation2(2 * theta), np.zeros((2, 1))], [np.zeros((1, 2)), np.ones((1, 1))]]) @ np.linalg.inv(a)
    rho = b2 @ rot @ np.linalg.inv(b1)
    parts = eigen_split(rho)
    lam_v = mu1 / mu2
    resid = float(np.linalg.norm(rho @ v - lam_v * v) / np.linalg.norm(v))
    real = all(p.kind == "real" and p.multiplicity == 1 for p in parts) and len(parts) == 3
    vals = tuple(float(p.value.real) for p in parts)
    passed = bool(real and all(x > 0 for x in vals) and abs(min(vals) - lam_v) <= 1e-9 * max(1.0, max(vals))
                  and vals[0] > vals[1] * (1 + 1e-12) and vals[1] > vals[2] * (1 + 1e-12))
    tube = None
    if passed:
        other = [p.vector for p in parts[:2]]
        frame = np.column_stack([v] + other)
        tube = tube_from_frame(rho, frame)
    return GuidingResult(rho, passed, vals, lam_v, resid, tube)


@dataclass(frozen=True, eq=False)
class PolygonResult:
    body: ConvexBody
    klein_vertices: np.ndarray
    angles: tuple[float, ...]
    inradius: float
    corners: tuple[CornerSpec, ...]


def hyperbolic_polygon(angles, mus=None) -> PolygonResult:
    """Hyperbolic polygon with the given interior angles, circumscribed about a circle.

    Vertex i sits between sides i-1 and i; side i joins vertices i and i+1.
    """
    ang = np.asarray(angles, dtype=float)
    n = ang.size
    if n < 3 or np.any(ang <= 0) or np.any(ang >= np.pi / 2):
        raise NotRealizable("need at least three angles, each in (0, pi/2)")
    if ang.sum() >= (n - 2) * np.pi:
        raise NotRealizable("angle sum too large for a hyperbolic polygon")
    half = np.cos(ang / 2)

    def excess(r: float) -> float:
        return float(np.arcsin(half / np.cosh(r)).sum() - np.pi)

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2
    r = brentq(excess, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    phi = np.arcsin(half / np.cosh(r))
    dist = np.arccosh(1.0 / (np.tan(ang / 2) * np.tan(phi)))
    pos = np.cumsum(2 * phi) - phi
    pts = np.column_stack([np.tanh(dist) * np.cos(pos), np.tanh(dist) * np.sin(pos)])
    body = ConvexBody.from_chart_points(pts)
    mus = np.ones(n) if mus is None else np.asarray(mus, dtype=float)
    corners = tuple(CornerSpec(float(ang[i]), float(mus[i - 1]), float(mus[i]), 2) for i in range(n))
    return PolygonResult(body, pts, tuple(float(x) for x in ang), float(r), corners)


def interior_angles(klein_vertices) -> np.ndarray:
    """Measured interior angles of a Klein-model polygon, from hyperboloid tangent vectors."""
    pts = np.asarray(klein_vertices, dtype=float)
    n = len(pts)
    hyp = [HypPoint.from_klein(p).x for p in pts]
    out = []
    for i in range(n):
        x = hyp[i]
        dirs = []
        for y in (hyp[i - 1], hyp[(i + 1) % n]):
            t = y + minkowski(x, y) * x
            dirs.append(t / np.sqrt(minkowski(t, t)))
        out.append(float(np.arccos(np.clip(minkowski(*dirs), -1, 1))))
    return np.array(out)


def side_functional(v0, v1, inside) -> np.ndarray:
    n = np.cross(v0, v1)
    return n if n @ inside > 0 else -n


def quadrilateral_double_scene(angles=(np.pi / 5,) * 4, mus=(1.0, 1.0, 1.0, 1.0), depth: int = 3,
                               seed: int = 0, tolerance: float = 1e-9, chart="auto") -> dict:
    """Scene of the double of a hyperbolic quadrilateral with bulged sides.

    Block ``Q`` carries the bulging parameters, its mirror ``P`` carries 1, and
    each side of ``Q`` is glued to the same side of ``P`` by the hyperbolic
    reflection.  Corner ``v{i}`` is the vertex between sides i-1 and i.
    """
    poly = hyperbolic_polygon(angles)
    n = len(poly.angles)
    verts = np.hstack([poly.klein_vertices, np.ones((n, 1))])
    center = np.array([0.0, 0.0, 1.0])
    walls, pairings, corners = [], [], []
    for i in range(n):
        face = [i, (i + 1) % n]
        nrm = side_functional(verts[face[0]], verts[face[1]], center)
        polar = hyperbolic_polar(nrm)
        for blk, mu in (("Q", float(mus[i])), ("P", 1.0)):
            walls.append({"id": f"{blk}.s{i}", "block": blk, "face": face,
                          "polar": polar.tolist(), "mu": mu})
        pairings.append([f"Q.s{i}", f"P.s{i}", reflection(nrm, polar).tolist()])
    for i in range(n):
        corners.append({"id": f"v{i}", "angle": poly.angles[i],
                        "meridian_word": [f"Q.s{(i - 1) % n}", f"P.s{i}"]})
    return {
        "version": 1,
        "dimension": 2,
        "tolerance": tolerance,
        "seed": seed,
        "depth": depth,
        "chart": chart,
        "blocks": [{"id": "Q", "vertices": verts.tolist()}, {"id": "P", "vertices": verts.tolist()}],
        "walls": sorted(walls, key=lambda w: (w["block"] != "Q", w["id"])),
        "pairings": pairings,
        "corners": corners,
    }


def alternating_mu_for_trace(theta: float, target: float, d: int = 2) -> float:
    """Smallest m with corner trace >= target for adjacent sides m and 1/m."""
    co2, si2 = np.cos(theta) ** 2, np.sin(theta) ** 2
    s = (target + 2 * si2) / co2
    r = s / 2 + np.sqrt(s * s / 4 - 1)
    return float(r ** (1.0 / (d + 1)))


def fan_scene(g, stratum, seed_point, depth: int = 4, chart=None) -> dict:
    """Scene of a single periodic fan: block conv(stratum, w, g w) glued to itself by g."""
    g = np.asarray(g, dtype=float)
    s = np.atleast_2d(np.asarray(stratum, dtype=float))
    w = np.asarray(seed_point, dtype=float)
    gw = g @ w
    verts = np.vstack([s, w, gw])
    k = s.shape[0]
    scene = {
        "version": 1,
        "dimension": g.shape[0] - 1,
        "tolerance": 1e-9,
        "seed": 0,
        "depth": depth,
        "chart": "auto" if chart is None else list(chart),
        "blocks": [{"id": "F", "vertices": verts.tolist()}],
        "walls": [
            {"id": "F.in", "block": "F", "face": list(range(k)) + [k], "mu": 1.0},
            {"id": "F.out", "block": "F", "face": list(range(k)) + [k + 1], "mu": 1.0},
        ],
        "pairings": [["F.out", "F.in", g.tolist()]],
        "corners": [{"id": "c", "angle": None, "meridian_word": ["F.out"]}],
    }
    return scene
