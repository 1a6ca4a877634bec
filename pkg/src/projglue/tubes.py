"""Tubes around codimension-2 strata and their classification.

A tube generator in standard position fixes every ray of
span(e_1, ..., e_{d-1}) and has the block form

    [[mu^-1 I_{d-1}, C], [0, mu^{(d-1)/2} B]]

with B in SL2.  The 2x2 part acts on the circle of rays of the quotient
plane, and a lift of that action to the real line is encoded as a matrix plus
an integer ``lift_index``.  Index 0 is the lift obtained from the Iwasawa
decomposition B = k_phi (a n) with phi in (-pi, pi]: the rotation by phi
followed by the fixed-point-preserving lift of the upper triangular factor.
For tr B >= 2 that lift is the unique one with fixed points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadParameter,
    NormalFormFailure,
    NotInFixator,
    NotSpecial,
    NotUniformisable,
    TrivialAngle,
)
from .projcore import DEFAULT_TOL, ProjMap, Ray, eigen_split

TWO_PI = 2.0 * np.pi
PARABOLIC_BAND = 1e-9


def _wrap(a):
    """Wrap angles into [-pi, pi)."""
    return (np.asarray(a) + np.pi) % TWO_PI - np.pi


def iwasawa(m: np.ndarray) -> tuple[float, np.ndarray]:
    """Split an SL2 matrix as rotation(phi) @ upper, upper with positive diagonal."""
    q, r = np.linalg.qr(m)
    s = np.sign(np.diag(r))
    s[s == 0] = 1.0
    q = q * s[None, :]
    r = s[:, None] * r
    phi = float(np.arctan2(q[1, 0], q[0, 0]))
    if phi <= -np.pi:
        phi += TWO_PI
    return phi, r


@dataclass(frozen=True, eq=False)
class LiftedSL2:
    """An element of the universal cover of SL2 acting on the line of angles."""

    m: np.ndarray
    lift_index: int = 0

    def __post_init__(self) -> None:
        m = np.array(self.m, dtype=float)
        if m.shape != (2, 2):
            raise BadParameter("angle matrix must be 2x2")
        det = np.linalg.det(m)
        if det <= 0:
            raise BadParameter("angle matrix must have positive determinant")
        m = m / np.sqrt(det)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "lift_index", int(self.lift_index))

    @property
    def trace(self) -> float:
        return float(np.trace(self.m))

    @property
    def is_identity_matrix(self) -> bool:
        return bool(np.allclose(self.m, np.eye(2), atol=1e-12))

    def lift(self, x):
        """Value of the lifted circle map at angle(s) ``x``."""
        phi, r = iwasawa(self.m)
        x = np.asarray(x, dtype=float)
        c, s = np.cos(x), np.sin(x)
        img = np.arctan2(r[1, 1] * s, r[0, 0] * c + r[0, 1] * s)
        return x + _wrap(img - x) + phi + TWO_PI * self.lift_index

    def translation_number(self) -> float:
        """Asymptotic displacement of the lift (a conjugation invariant)."""
        tr = self.trace
        if tr >= 2.0 - PARABOLIC_BAND:
            disp = lifted_displacement(self, np.linspace(0, TWO_PI, 64, endpoint=False))
            return TWO_PI * round(float(np.median(disp)) / TWO_PI)
        if tr > -2.0:
            alpha = float(np.arccos(np.clip(tr / 2, -1, 1)))
            if self.m[1, 0] < 0:
                alpha = -alpha
        else:
            alpha = np.pi
        disp = lifted_displacement(self, np.linspace(0, TWO_PI, 256, endpoint=False))
        mid = 0.5 * (disp.min() + disp.max())
        return float(alpha + TWO_PI * round((mid - alpha) / TWO_PI))

    def with_matrix(self, m: np.ndarray, translation: float) -> "LiftedSL2":
        """Lift of ``m`` whose translation number is ``translation``."""
        base = LiftedSL2(m, 0)
        t0 = base.translation_number()
        return LiftedSL2(m, int(round((translation - t0) / TWO_PI)))

    def inverse(self) -> "LiftedSL2":
        return self.with_matrix(np.linalg.inv(self.m), -self.translation_number())

    def conjugate(self, p: np.ndarray) -> "LiftedSL2":
        """Conjugate by an orientation-preserving linear map ``p``."""
        p = np.asarray(p, dtype=float)
        if np.linalg.det(p) <= 0:
            raise BadParameter("conjugator must preserve orientation")
        return self.with_matrix(p @ self.m @ np.linalg.inv(p), self.translation_number())


def lifted_displacement(h: LiftedSL2, x) -> np.ndarray | float:
    """f(x) - x for the lift f encoded by ``h``."""
    x = np.asarray(x, dtype=float)
    out = h.lift(x) - x
    return float(out) if out.ndim == 0 else out


class AngleClass(enum.Enum):
    COMPLETE = "Complete"
    UNIFORMISABLE = "Uniformisable"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class AngleVerdict:
    verdict: AngleClass
    kind: str
    margin: float

    def __str__(self) -> str:
        return f"{self.verdict.value} ({self.kind})"


def angle_kind(h: LiftedSL2) -> str:
    tr = h.trace
    if np.allclose(h.m, np.eye(2), atol=1e-12) or np.allclose(h.m, -np.eye(2), atol=1e-12):
        return "central"
    if abs(tr - 2) < PARABOLIC_BAND or abs(tr + 2) < PARABOLIC_BAND:
        return "parabolic"
    if abs(tr) < 2:
        return "elliptic"
    return "hyperbolic"


def classify_sl2_angle(h: LiftedSL2) -> AngleVerdict:
    """Complete or uniformisable, with margin tr - 2."""
    if h.is_identity_matrix and h.lift_index == 0:
        raise TrivialAngle("identity angle")
    tr = h.trace
    kind = angle_kind(h)
    margin = tr - 2.0
    # a trace within rounding of 2 is an exact parabolic; beyond that the band is ambiguous
    rounding = 64 * np.finfo(float).eps * max(1.0, float(np.sum(h.m * h.m)))
    if abs(margin) <= rounding:
        margin = 0.0
    if h.is_identity_matrix or h.lift_index != 0 or tr < 2.0 - PARABOLIC_BAND:
        return AngleVerdict(AngleClass.COMPLETE, kind, margin)
    if abs(margin) < PARABOLIC_BAND and margin != 0.0:
        return AngleVerdict(AngleClass.INDETERMINATE, kind, margin)
    return AngleVerdict(AngleClass.UNIFORMISABLE, kind, margin)


# ---------------------------------------------------------------- tubes


@dataclass(frozen=True, eq=False)
class Tube:
    d: int
    mu: float
    angle: LiftedSL2
    C: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if self.d < 2:
            raise BadParameter("tubes need d >= 2")
        if not self.mu > 0:
            raise BadParameter("mu must be positive")
        c = np.zeros((self.d - 1, 2)) if self.C is None else np.array(self.C, dtype=float)
        if c.shape != (self.d - 1, 2):
            raise BadParameter(f"translation block must have shape {(self.d - 1, 2)}")
        c.setflags(write=False)
        object.__setattr__(self, "C", c)

    @property
    def matrix(self) -> np.ndarray:
        d, mu = self.d, self.mu
        g = np.zeros((d + 1, d + 1))
        g[: d - 1, : d - 1] = np.eye(d - 1) / mu
        g[: d - 1, d - 1:] = self.C
        g[d - 1:, d - 1:] = mu ** ((d - 1) / 2) * self.angle.m
        return g

    @property
    def generator(self) -> ProjMap:
        return ProjMap(self.matrix)

    def classify(self) -> AngleVerdict:
        return classify_sl2_angle(self.angle)

    def inverse(self) -> "Tube":
        inv = np.linalg.inv(self.matrix)
        t = tube_normal_form(inv, 0, allow_trivial=True)
        return Tube(self.d, t.mu, self.angle.inverse(), t.C)

    def to_dict(self) -> dict:
        return {
            "dimension": self.d,
            "mu": self.mu,
            "sl2": self.angle.m.tolist(),
            "lift_index": self.angle.lift_index,
            "C": self.C.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tube":
        c = np.asarray(data.get("C", []), dtype=float)
        d = int(data.get("dimension", c.shape[0] + 1 if c.size else 2))
        if c.size == 0:
            c = np.zeros((d - 1, 2))
        return cls(d, float(data["mu"]), LiftedSL2(np.asarray(data["sl2"], dtype=float),
                                                   int(data.get("lift_index", 0))), c)


def tube_normal_form(g, lift_index: int = 0, tol: float = 1e-9, allow_trivial: bool = False) -> Tube:
    """Read (mu, angle, C) off a generator fixing span(e_1..e_{d-1}) pointwise."""
    m = g.m if isinstance(g, ProjMap) else np.asarray(g, dtype=float)
    n = m.shape[0]
    d = n - 1
    if d < 2:
        raise BadParameter("need d >= 2")
    m = m / abs(np.linalg.det(m)) ** (1.0 / n)
    scale = np.abs(m).max()
    top = m[: d - 1, : d - 1]
    c0 = top[0, 0]
    if (np.abs(top - c0 * np.eye(d - 1)).max() > tol * scale
            or np.abs(m[d - 1:, : d - 1]).max() > tol * scale or c0 <= 0):
        raise NotInFixator("matrix does not fix the codimension-2 stratum pointwise")
    mu = 1.0 / c0
    block = m[d - 1:, d - 1:] / mu ** ((d - 1) / 2)
    if np.linalg.det(block) <= 0:
        raise NotInFixator("angle block reverses orientation")
    angle = LiftedSL2(block, lift_index)
    if angle.is_identity_matrix and lift_index == 0 and not allow_trivial:
        raise TrivialAngle("trivial angle")
    return Tube(d, mu, angle, m[: d - 1, d - 1:])


def tube_from_frame(g, frame: np.ndarray, lift_index: int = 0) -> Tube:
    """Tube of ``g`` after moving the stratum spanned by the first d-1 frame columns to standard position."""
    m = g.m if isinstance(g, ProjMap) else np.asarray(g, dtype=float)
    f = np.asarray(frame, dtype=float)
    if np.linalg.det(f) < 0:
        f = f.copy()
        f[:, -1] = -f[:, -1]
    return tube_normal_form(np.linalg.inv(f) @ m @ f, lift_index)


def special_margin(t: Tube) -> float:
    d, mu = t.d, t.mu
    return mu ** (d + 1) - mu ** ((d + 1) / 2) * t.angle.trace + 1.0


def is_special(t: Tube, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Special-tube test; returns (verdict, polynomial margin)."""
    v = t.classify()
    if v.verdict is AngleClass.COMPLETE:
        raise NotUniformisable(f"angle is {v}")
    margin = special_margin(t)
    return bool(margin > tol and t.mu > 1.0), float(margin)


def special_generator(t: Tube) -> ProjMap:
    """The generator among g, g^-1 that passes the special test."""
    ok, _ = is_special(t)
    if ok:
        return t.generator
    inv = t.inverse()
    ok_inv, _ = is_special(inv)
    if ok_inv:
        return inv.generator
    raise NotSpecial("neither the generator nor its inverse is special")


def special_tube(t: Tube) -> Tube:
    ok, _ = is_special(t)
    if ok:
        return t
    inv = t.inverse()
    if is_special(inv)[0]:
        return inv
    raise NotSpecial("neither the generator nor its inverse is special")


@dataclass(frozen=True, eq=False)
class BlowupData:
    kind: str
    x_plus: Ray
    x_minus: Ray | None
    stratum: np.ndarray
    plus_normal: np.ndarray
    minus_normal: np.ndarray
    change_of_basis: np.ndarray
    normal_form: np.ndarray
    generator: np.ndarray
    topology: str = "base x circle"

    @property
    def wall(self) -> np.ndarray:
        """Spanning rays of the boundary wall conv(stratum, x_plus)."""
        return np.vstack([self.stratum, self.x_plus.v])

    def in_plus_wall(self, x, tol: float = 1e-9) -> bool:
        v = np.asarray(x, dtype=float)
        return abs(self.plus_normal @ v) <= tol * np.linalg.norm(v)


def _hyperplane_normal(rows: np.ndarray) -> np.ndarray:
    _, _, vt = np.linalg.svd(rows)
    return vt[-1]


def blowup(t: Tube, side=None, tol: float = 1e-9) -> BlowupData:
    """Normal form and invariant walls of the special generator of ``t``.

    ``side`` optionally gives a ray in the sector; eigenvector signs are then
    chosen so that its quotient image lies between them.
    """
    st = special_tube(t)
    g = st.matrix
    d, mu = st.d, st.mu
    k = d - 1
    block = g[k:, k:]
    cblk = g[:k, k:]
    low = 1.0 / mu
    ev, evec = np.linalg.eig(block)
    if np.any(np.abs(ev.imag) > 1e-12):
        raise NormalFormFailure("complex spectrum on the angle block")
    ev = ev.real
    stratum = np.eye(d + 1)[:k]

    def lift_vec(w: np.ndarray, lam: float) -> np.ndarray:
        if abs(lam - low) < 1e-12:
            raise NormalFormFailure("angle eigenvalue collides with the stratum eigenvalue")
        top = cblk @ w / (lam - low)
        return np.concatenate([top, w])

    parabolic = abs(st.angle.trace - 2.0) < PARABOLIC_BAND
    if parabolic:
        lam = float(ev.mean())
        nil = block - lam * np.eye(2)
        if np.abs(nil).max() < 1e-12:
            raise NormalFormFailure("identity angle block")
        _, _, vt = np.linalg.svd(nil)
        w = vt[-1]
        if w[np.argmax(np.abs(w))] < 0:
            w = -w
        if side is not None:
            # attraction is read inside the sector: iterates of q drift along N q
            nq = nil @ np.asarray(side, dtype=float)[k:]
            if np.linalg.norm(nq) > 1e-12 and nq @ w < 0:
                w = -w
        vplus = lift_vec(w, lam)
        # generalized eigenvector u with (g - lam) u = vplus
        gen = np.linalg.lstsq(g - lam * np.eye(d + 1), vplus, rcond=None)[0]
        gen -= (gen @ vplus) / (vplus @ vplus) * vplus
        p = np.column_stack([np.eye(d + 1)[:, :k], vplus, gen])
        if abs(np.linalg.det(p)) < 1e-12:
            raise NormalFormFailure("singular change of basis")
        nf = np.linalg.inv(p) @ g @ p
        normal = _hyperplane_normal(np.vstack([stratum, vplus]))
        return BlowupData("parabolic", Ray(vplus), None, stratum, normal, normal, p, nf, g)
    order = np.argsort(-ev)
    lam_p, lam_m = ev[order[0]], ev[order[1]]
    w_p, w_m = evec[:, order[0]], evec[:, order[1]]
    if side is not None:
        q = np.asarray(side, dtype=float)[k:]
        coef = np.linalg.solve(np.column_stack([w_p, w_m]), q)
        w_p = w_p * np.sign(coef[0] or 1.0)
        w_m = w_m * np.sign(coef[1] or 1.0)
    else:
        if w_p[np.argmax(np.abs(w_p))] < 0:
            w_p = -w_p
        if np.linalg.det(np.column_stack([w_p, w_m])) < 0:
            w_m = -w_m
    vp, vm = lift_vec(w_p, lam_p), lift_vec(w_m, lam_m)
    p = np.column_stack([np.eye(d + 1)[:, :k], vp, vm])
    nf = np.linalg.inv(p) @ g @ p
    expect = np.diag(np.concatenate([np.full(k, low), [lam_p, lam_m]]))
    if np.abs(nf - expect).max() > 1e-7 * np.abs(g).max():
        raise NormalFormFailure("diagonalisation residual too large")
    return BlowupData(
        "hyperbolic", Ray(vp), Ray(vm), stratum,
        _hyperplane_normal(np.vstack([stratum, vp])),
        _hyperplane_normal(np.vstack([stratum, vm])),
        p, nf, g,
    )


def top_eigenvalue_on_block(t: Tube) -> bool:
    """True when the dominant eigenvalue of the generator lives on the angle block."""
    parts = eigen_split(t.matrix)
    v = parts[0].vector
    return bool(np.linalg.norm(v[t.d - 1:]) > 1e-9)
