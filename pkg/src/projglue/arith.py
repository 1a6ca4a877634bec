"""Desk-scale arithmetic hyperbolic geometry.

Lorentz forms x_1^2 + ... + x_d^2 - tau x_{d+1}^2, the pi/k rotation fixing
{x_1 = x_2 = 0}, exact sign checks of tau in Q(sqrt 2), planes orthogonal to
three hyperplanes, and the two inequalities behind a ping-pong argument:
an apex-angle bound for triangles with one ideal vertex and the
quasi-geodesic behaviour of broken geodesics with long pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy.linalg import null_space

from .errors import (
    BadConcatenation,
    BadParameter,
    DegenerateConfiguration,
    OffHyperboloid,
    UnsupportedField,
)
from .projcore import ProjMap

HYPERBOLOID_TOL = 1e-9


@dataclass(frozen=True)
class LorentzForm:
    d: int
    tau: float = 1.0

    def __post_init__(self) -> None:
        if self.d < 1 or not self.tau > 0:
            raise BadParameter("need d >= 1 and tau > 0")

    @property
    def matrix(self) -> np.ndarray:
        return np.diag([1.0] * self.d + [-float(self.tau)])

    def q(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x[:-1] @ x[:-1] - self.tau * x[-1] ** 2)

    def pair(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return float(x[:-1] @ y[:-1] - self.tau * x[-1] * y[-1])

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d + 1,) or x[-1] <= 0 or abs(self.q(x) + 1) > HYPERBOLOID_TOL * max(1.0, x @ x):
            raise OffHyperboloid("point is not on the upper sheet of q = -1")
        return x

    def point(self, y) -> np.ndarray:
        """Hyperboloid point above the spatial coordinates ``y``."""
        y = np.asarray(y, dtype=float)
        return np.append(y, np.sqrt((1.0 + y @ y) / self.tau))

    def signature(self, basis) -> tuple[int, int, int]:
        """(positive, negative, zero) counts of the form restricted to span(basis columns)."""
        b = np.atleast_2d(np.asarray(basis, dtype=float))
        gram = b.T @ self.matrix @ b
        ev = np.linalg.eigvalsh((gram + gram.T) / 2)
        scale = max(1.0, np.abs(ev).max())
        eps = 1e-10 * scale
        return int((ev > eps).sum()), int((ev < -eps).sum()), int((np.abs(ev) <= eps).sum())


def rotation_rho(k: int, d: int) -> ProjMap:
    """Rotation by pi/k in the (x_1, x_2)-plane, identity on the other coordinates."""
    if k < 2 or d < 2:
        raise BadParameter("need k >= 2 and d >= 2")
    c, s = np.cos(np.pi / k), np.sin(np.pi / k)
    m = np.eye(d + 1)
    m[:2, :2] = [[c, -s], [s, c]]
    return ProjMap(m)


def q_hyp_distance(form: LorentzForm, p, q) -> float:
    """Distance on the hyperboloid q = -1, via 2 asinh(sqrt(q(p - q)) / 2)."""
    p = form.check_point(p)
    q = form.check_point(q)
    return float(2.0 * np.arcsinh(np.sqrt(max(form.q(p - q), 0.0)) / 2.0))


# ---------------------------------------------------------------- Q(sqrt 2)


@dataclass(frozen=True)
class QuadSurd:
    """a + b sqrt(2) with rational a, b."""

    a: Fraction
    b: Fraction

    @classmethod
    def of(cls, value) -> "QuadSurd":
        if isinstance(value, QuadSurd):
            return value
        if isinstance(value, (tuple, list)):
            return cls(Fraction(value[0]), Fraction(value[1]))
        return cls(Fraction(value), Fraction(0))

    def conjugate(self) -> "QuadSurd":
        return QuadSurd(self.a, -self.b)

    def sign(self) -> int:
        """Exact sign of a + b sqrt 2."""
        a, b = self.a, self.b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return (b > 0) - (b < 0)
        if (a > 0) == (b > 0):
            return 1 if a > 0 else -1
        # opposite signs: compare a^2 with 2 b^2
        big = a * a - 2 * b * b
        if big == 0:
            return 0
        dominant = a if big > 0 else b
        return 1 if dominant > 0 else -1

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(2.0)

    def minimal_polynomial(self) -> tuple[Fraction, ...]:
        """Monic coefficients, highest degree first."""
        if self.b == 0:
            return (Fraction(1), -self.a)
        return (Fraction(1), -2 * self.a, self.a * self.a - 2 * self.b * self.b)

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.minimal_polynomial())


@dataclass(frozen=True)
class TauReport:
    k: int
    tau: QuadSurd
    embeddings: tuple[float, ...]
    signs: tuple[int, ...]
    minimal_polynomial: tuple[str, ...]
    integral: bool
    generates_field: bool
    rotation_in_field: bool
    passed: bool

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "tau": [str(self.tau.a), str(self.tau.b)],
            "embeddings": list(self.embeddings),
            "signs": list(self.signs),
            "minimal_polynomial": list(self.minimal_polynomial),
            "integral": self.integral,
            "generates_field": self.generates_field,
            "rotation_in_field": self.rotation_in_field,
            "passed": self.passed,
        }


def check_tau(k: int = 4, tau=(0, 1)) -> TauReport:
    """Sign pattern of tau under the two real embeddings of Q(sqrt 2).

    ``tau`` is ``(a, b)`` for a + b sqrt 2 (or a rational).  It passes when the
    identity embedding is positive and the conjugate one negative.
    """
    if k != 4:
        raise UnsupportedField("only k = 4, with the field Q(sqrt 2), is supported")
    t = QuadSurd.of(tau)
    conj = t.conjugate()
    signs = (t.sign(), conj.sign())
    poly = t.minimal_polynomial()
    # cos(pi/4) = sqrt(2)/2 lies in Q(sqrt 2), so the rotation is defined over the field
    cos_entry = QuadSurd(Fraction(0), Fraction(1, 2))
    rot_ok = bool(abs(float(cos_entry) - np.cos(np.pi / 4)) < 1e-15)
    gen = t.b != 0
    passed = signs == (1, -1) and gen
    return TauReport(k, t, (float(t), float(conj)), signs, tuple(str(c) for c in poly),
                     t.is_integral(), gen, rot_ok, passed)


def polynomial_root_signs(coeffs) -> tuple[int, int]:
    """(# positive roots, # negative roots) of a real-rooted monic quadratic with rational coefficients."""
    one, b, c = (Fraction(x) for x in coeffs)
    if one != 1:
        raise BadParameter("polynomial must be monic")
    disc = b * b - 4 * c
    if disc < 0:
        raise BadParameter("complex roots")
    # roots (-b +- sqrt(disc)) / 2 ; product c, sum -b
    if c < 0:
        return 1, 1
    if c == 0:
        return (1, 0) if -b > 0 else (0, 1) if -b < 0 else (0, 0)
    return (2, 0) if -b > 0 else (0, 2)


# ---------------------------------------------------------------- orthogonal plane


@dataclass(frozen=True, eq=False)
class OrthogonalPlane:
    basis: np.ndarray
    dual_points: np.ndarray
    signature: tuple[int, int, int]
    residuals: tuple[float, ...]


def orthogonal_plane(normals, form: LorentzForm) -> OrthogonalPlane | None:
    """2-plane of H^d meeting the three hyperplanes {n_i . x = 0} orthogonally.

    Returns None when the triple intersection is not positive definite
    (it then meets the closed hyperboloid cone) or the span is not of
    signature (2, 1).
    """
    n = np.atleast_2d(np.asarray(normals, dtype=float))
    if n.shape != (3, form.d + 1):
        raise BadParameter("need three hyperplane normals")
    qinv = np.linalg.inv(form.matrix)
    dual = n @ qinv.T
    if np.linalg.matrix_rank(dual, tol=1e-10) < 3:
        raise DegenerateConfiguration("dual points do not span a 3-dimensional subspace")
    inter = null_space(n, rcond=1e-12)
    if inter.shape[1]:
        pos, neg, zero = form.signature(inter)
        if neg or zero:
            return None
    basis, _ = np.linalg.qr(dual.T)
    sig = form.signature(basis)
    if sig != (2, 1, 0):
        return None
    # each dual point is the form-normal of its hyperplane; orthogonality residual per hyperplane
    res = []
    for i in range(3):
        v = dual[i] / np.linalg.norm(dual[i])
        res.append(float(np.linalg.norm(v - basis @ (basis.T @ v))))
    return OrthogonalPlane(basis, dual, sig, tuple(res))


def meeting_angle_defect(plane: OrthogonalPlane, normal, form: LorentzForm) -> float:
    """1 - |cos| of the angle between the plane and the hyperplane's normal at a common point.

    Zero exactly when the plane contains the hyperplane's normal direction
    there, i.e. when they meet orthogonally.
    """
    nrm = np.asarray(normal, dtype=float)
    b = plane.basis
    # timelike point of the plane on the hyperplane
    sub = null_space((nrm @ b)[None, :])
    gram = sub.T @ b.T @ form.matrix @ b @ sub
    ev, evec = np.linalg.eigh(gram)
    z = b @ sub @ evec[:, 0]
    if form.q(z) >= 0:
        raise DegenerateConfiguration("plane does not meet the hyperplane inside H^d")
    z = z / np.sqrt(-form.q(z))
    if z[-1] < 0:
        z = -z
    w = np.linalg.solve(form.matrix, nrm)
    w = w + form.pair(w, z) * z
    w = w / np.sqrt(form.q(w))
    # unit tangent of the plane at z orthogonal to the intersection line
    t_basis = np.column_stack([b[:, j] + form.pair(b[:, j], z) * z for j in range(3)])
    gram_t = t_basis.T @ form.matrix @ t_basis
    proj_coef = np.linalg.lstsq(gram_t, t_basis.T @ form.matrix @ w, rcond=None)[0]
    wp = t_basis @ proj_coef
    return float(1.0 - np.sqrt(max(form.q(wp), 0.0)))


# ---------------------------------------------------------------- ping-pong


@dataclass(frozen=True)
class PingPongConfig:
    k: int = 4
    d: int = 3
    R: float = 5.0

    def __post_init__(self) -> None:
        if self.k < 2 or self.d < 2 or not self.R > 0:
            raise BadParameter("need k >= 2, d >= 2, R > 0")

    def hyperplane(self, j: int) -> np.ndarray:
        """Normal covector of H_j = rho^j {x_1 = 0}."""
        rho = rotation_rho(self.k, self.d).m
        n = np.zeros(self.d + 1)
        n[0] = 1.0
        return n @ np.linalg.matrix_power(rho, -j)

    def sector(self, x) -> set[int]:
        """Indices j of the closed double sectors between H_j and H_{j+1} containing the ray x."""
        x = np.asarray(x, dtype=float)
        if np.hypot(x[0], x[1]) <= 1e-12 * max(1.0, np.linalg.norm(x)):
            return set(range(self.k))
        ang = np.arctan2(x[1], x[0]) % np.pi
        width = np.pi / self.k
        # H_j is the line at angle pi/2 + j pi/k in the (x1, x2)-plane
        rel = (ang - np.pi / 2) % np.pi
        out = set()
        for j in range(self.k):
            lo = j * width
            r = (rel - lo) % np.pi
            if r <= width + 1e-12 or r >= np.pi - 1e-12:
                out.add(j)
        return out


def angle_bound(D: float, k: int, steps: int) -> float:
    return float(2.0 / (np.cosh(D) * np.sin(steps * np.pi / k)))


@dataclass(frozen=True)
class PingPongReport:
    samples: int
    max_ratio: float
    max_ratio_exact: float
    violations: int
    bound_example: float

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.max_ratio <= 1.0

    def to_dict(self) -> dict:
        return {"samples": self.samples, "max_ratio": self.max_ratio, "max_ratio_exact": self.max_ratio_exact,
                "violations": self.violations, "bound_example": self.bound_example, "passed": self.passed}


def _unit_tangent(form: LorentzForm, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    t = v + form.pair(v, x) * x
    return t / np.sqrt(form.q(t))


def apex_angle(p: np.ndarray, q: np.ndarray, ideal: np.ndarray, form: LorentzForm) -> float:
    """Angle at p between the geodesics to q and to the ideal point along the null ray ``ideal``."""
    tq = _unit_tangent(form, p, q)
    tl = ideal + form.pair(ideal, p) * p
    tl = tl / np.sqrt(form.q(tl))
    return float(np.arccos(np.clip(form.pair(tq, tl), -1.0, 1.0)))


def pingpong_angle_bound(cfg: PingPongConfig, samples: int = 1000, seed: int = 0) -> PingPongReport:
    """Measure sin(apex angle) at p for triangles (p, q, ideal point) against 2 / (cosh R sin(m pi / k)).

    The ideal vertex is reached from q by a ray making angle m pi / k with
    [q, p], and d(p, q) >= R.  By homogeneity p is the base point; the
    direction to q, the ray at q and the distance are random.
    """
    form = LorentzForm(cfg.d, 1.0)
    rng = np.random.default_rng(seed)
    base = np.zeros(cfg.d + 1)
    base[-1] = 1.0
    worst = 0.0
    worst_exact = 0.0
    bad = 0
    for _ in range(samples):
        u = np.append(rng.normal(size=cfg.d), 0.0)
        u /= np.linalg.norm(u)
        dist = cfg.R + rng.exponential(2.0)
        ch, sh = np.cosh(dist), np.sinh(dist)
        q = ch * base + sh * u
        back = -(sh * base + ch * u)
        v = np.append(rng.normal(size=cfg.d), 0.0)
        v -= (v @ u) * u
        v /= np.linalg.norm(v)
        steps = int(rng.integers(1, cfg.k))
        b_angle = steps * np.pi / cfg.k
        w = np.cos(b_angle) * back + np.sin(b_angle) * v
        ideal = q + w
        # tangent at the base point toward the ideal point is its spatial part
        spatial = ideal[:-1]
        a = float(np.arctan2(np.linalg.norm(spatial - (spatial @ u[:-1]) * u[:-1]), spatial @ u[:-1]))
        ratio = np.sin(a) / angle_bound(cfg.R, cfg.k, steps)
        exact = np.sin(a) / angle_bound(dist, cfg.k, steps)
        worst = max(worst, ratio)
        worst_exact = max(worst_exact, exact)
        bad += int(ratio > 1.0)
    return PingPongReport(samples, float(worst), float(worst_exact), bad, angle_bound(cfg.R, cfg.k, 1))


# ---------------------------------------------------------------- quasi-geodesics


@dataclass(frozen=True)
class QuasiGeodesicReport:
    c_fit: float
    passed: bool
    c: float
    endpoint_distance: float
    path_length: float
    distances: np.ndarray


def _translation(length: float) -> np.ndarray:
    ch, sh = np.cosh(length), np.sinh(length)
    return np.array([[ch, 0.0, sh], [0.0, 1.0, 0.0], [sh, 0.0, ch]])


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def broken_geodesic_distances(lengths, angles, sides=None) -> np.ndarray:
    """Pairwise vertex distances of a planar broken geodesic.

    ``angles[i]`` is the interior angle at vertex i + 1 and ``sides[i]`` = +-1
    the side it turns to.  Distances come from relative products of
    isometries, so they stay accurate for long paths.
    """
    lengths = list(lengths)
    n = len(lengths)
    sides = [1 - 2 * (i % 2) for i in range(n - 1)] if sides is None else list(sides)
    steps = []
    for i in range(n):
        m = _translation(lengths[i])
        if i < n - 1:
            m = m @ _rotation(sides[i] * (np.pi - angles[i]))
        steps.append(m)
    dist = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        m = np.eye(3)
        for j in range(i + 1, n + 1):
            m = m @ steps[j - 1]
            # the translation part brings vertex j to the origin of frame i
            m_vertex = m if j == n else m @ np.linalg.inv(_rotation(sides[j - 1] * (np.pi - angles[j - 1])))
            ch = m_vertex[2, 2]
            dist[i, j] = dist[j, i] = float(np.arccosh(max(ch, 1.0)))
    return dist


def quasigeodesic_check(lengths, angles, R: float, theta: float, c: float = 2.0,
                        sides=None) -> QuasiGeodesicReport:
    """Fit the smallest c with d(x_i, x_j) >= L_ij / c - c over all vertex pairs of a broken geodesic."""
    lengths = [float(x) for x in lengths]
    angles = [float(x) for x in angles]
    if not lengths:
        raise BadConcatenation("need at least one segment")
    if len(angles) != len(lengths) - 1:
        raise BadConcatenation("need one angle per interior vertex")
    if min(lengths) < R:
        raise BadConcatenation(f"segment shorter than {R}")
    if angles and min(angles) < theta:
        raise BadConcatenation(f"angle below {theta}")
    if any(a > np.pi for a in angles):
        raise BadConcatenation("interior angles must not exceed pi")
    dist = broken_geodesic_distances(lengths, angles, sides)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    c_fit = 1.0
    ok = True
    for i, j in combinations(range(len(lengths) + 1), 2):
        big_l = cum[j] - cum[i]
        dd = dist[i, j]
        c_fit = max(c_fit, (-dd + np.sqrt(dd * dd + 4 * big_l)) / 2)
        ok = ok and dd >= big_l / c - c - 1e-12
    return QuasiGeodesicReport(float(c_fit), bool(ok), c, float(dist[0, -1]), float(cum[-1]), dist)


def zigzag(n: int, length: float, theta: float) -> tuple[list[float], list[float], list[int]]:
    """n pieces of equal length with interior angles theta, turning to alternating sides."""
    return [float(length)] * n, [float(theta)] * (n - 1), [1 - 2 * (i % 2) for i in range(n - 1)]
