"""Gluing kits: development of glued blocks, convexity certification and boundary cells.

A scene declares blocks (convex polytopes given by vertex rays), walls (faces
of blocks with optional polar points and bulging parameters), pairings and
corners.  A pairing ``[A, B, M]`` says that ``M`` carries block B's frame into
block A's frame, mapping face B onto face A with the interiors on opposite
sides.  Bulging parameters are applied on top of the pairing: crossing A
uses ``bulge_A(mu_B / mu_A) @ M`` and crossing B uses ``bulge_B(mu_A / mu_B) @ M^-1``.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, nnls
from scipy.spatial import HalfspaceIntersection

from .blocks import bulge_along
from .errors import (
    BadMeridian,
    FanDirection,
    NotCertified,
    OutsideDomain,
    SceneError,
    WallMismatch,
)
from .projcore import (
    DEFAULT_TOL,
    ChartPolytope,
    ConvexBody,
    chart_frame,
    chart_halfspaces,
    convexity_sample_oracle,
    cross_ratio,
    find_chart,
    from_chart,
    hausdorff_hulls,
    hilbert_distance,
    to_chart,
    unit_rows,
)

MATCH_TOL = 1e-7


def _match_index(ray: np.ndarray, rays: np.ndarray, tol: float = MATCH_TOL) -> int:
    if rays.shape[0] == 0:
        return -1
    err = np.linalg.norm(rays - ray[None, :], axis=1)
    k = int(np.argmin(err))
    return k if err[k] <= tol else -1


def _same_ray_set(a: np.ndarray, b: np.ndarray, tol: float = MATCH_TOL) -> bool:
    if a.shape != b.shape:
        return False
    return all(_match_index(x, b, tol) >= 0 for x in a) and all(_match_index(y, a, tol) >= 0 for y in b)


def _orient(m: np.ndarray) -> np.ndarray:
    """Scale a matrix to |det| = 1 keeping its sign (the action on rays is unchanged)."""
    return m / abs(np.linalg.det(m)) ** (1.0 / m.shape[0])


# ---------------------------------------------------------------- kit data


@dataclass(frozen=True, eq=False)
class Block:
    id: str
    vertices: np.ndarray
    walls: tuple[str, ...]

    @cached_property
    def body(self) -> ConvexBody:
        return ConvexBody.from_vertices(self.vertices)

    @cached_property
    def interior_point(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @cached_property
    def cyclic_order(self) -> np.ndarray:
        """Vertex indices in counter-clockwise order of the block's own chart (d = 2)."""
        p = self.body.chart_points()
        c = p.mean(axis=0)
        if p.shape[1] != 2:
            return np.arange(p.shape[0])
        order = np.argsort(np.arctan2(p[:, 1] - c[1], p[:, 0] - c[0]))
        if np.linalg.det(np.column_stack([self.body.frame[1], self.body.chart])) < 0:
            order = order[::-1]
        return order


@dataclass(frozen=True, eq=False)
class Wall:
    id: str
    block: str
    face: tuple[int, ...]
    functional: np.ndarray
    polar: np.ndarray | None
    mu: float


@dataclass(frozen=True, eq=False)
class Corner:
    id: str
    angle: float | None
    word: tuple[str, ...]


def _block_from_halfspaces(funcs: np.ndarray) -> np.ndarray:
    f = funcs / np.linalg.norm(funcs, axis=1, keepdims=True)
    phi, u = chart_frame(f.sum(axis=0))
    a = -(f @ u)
    b = -(f @ phi)
    # Chebyshev centre for an interior point
    nrm = np.linalg.norm(a, axis=1)
    n = u.shape[1]
    res = linprog(np.concatenate([np.zeros(n), [-1.0]]), A_ub=np.hstack([a, nrm[:, None]]), b_ub=-b,
                  bounds=[(None, None)] * n + [(0, 1)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-12:
        raise SceneError("half-spaces do not bound a properly convex block")
    hs = HalfspaceIntersection(np.hstack([a, b[:, None]]), res.x[:n])
    pts = hs.intersections
    keep: list[np.ndarray] = []
    for p in pts:
        if all(np.linalg.norm(p - q) > 1e-9 for q in keep):
            keep.append(p)
    return unit_rows(from_chart(np.array(keep), phi, u))


class GluingKit:
    """Blocks, walls, pairings and corners of a glued scene."""

    def __init__(self, dimension: int, blocks: dict[str, Block], walls: dict[str, Wall],
                 crossings: dict[str, tuple[str, np.ndarray]], corners: dict[str, Corner],
                 tolerance: float = DEFAULT_TOL, seed: int = 0, depth: int = 3, chart=None,
                 root: str | None = None, quadrics: dict[str, ConvexBody] | None = None):
        self.dimension = dimension
        self.blocks = blocks
        self.walls = walls
        self.crossings = crossings
        self.corners = corners
        self.tolerance = tolerance
        self.seed = seed
        self.depth = depth
        self.chart = None if chart is None else np.asarray(chart, dtype=float)
        self.root = root if root is not None else next(iter(blocks))
        self.quadrics = quadrics or {}

    # construction
    @classmethod
    def single(cls, body: ConvexBody, block_id: str = "B") -> "GluingKit":
        """Kit made of one block and no walls."""
        blk = Block(block_id, body.vertices, ())
        kit = cls(body.dim, {block_id: blk}, {}, {}, {}, chart=body.chart)
        if body.quadric is not None:
            kit.quadrics[block_id] = body
        return kit

    @classmethod
    def from_scene(cls, scene: dict) -> "GluingKit":
        try:
            d = int(scene["dimension"])
            tol = float(scene.get("tolerance", DEFAULT_TOL))
            seed = int(scene["seed"])
            depth = int(scene.get("depth", 3))
            chart = scene.get("chart", "auto")
            chart = None if chart in (None, "auto") else np.asarray(chart, dtype=float)
            blocks_raw = scene["blocks"]
            walls_raw = scene.get("walls", [])
            pairs_raw = scene.get("pairings", [])
            corners_raw = scene.get("corners", [])
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed scene: {exc}") from exc
        if d < 1:
            raise SceneError("dimension must be positive")
        if chart is not None and chart.shape != (d + 1,):
            raise SceneError("chart has the wrong length")

        verts: dict[str, np.ndarray] = {}
        order: list[str] = []
        for b in blocks_raw:
            bid = str(b["id"])
            if bid in verts:
                raise SceneError(f"duplicate block {bid}")
            if "vertices" in b:
                v = np.asarray(b["vertices"], dtype=float)
                if v.ndim != 2 or v.shape[1] != d + 1:
                    raise SceneError(f"block {bid}: vertices must have length {d + 1}")
                v = unit_rows(v)
            elif "halfspaces" in b:
                h = np.asarray(b["halfspaces"], dtype=float)
                if h.ndim != 2 or h.shape[1] != d + 1:
                    raise SceneError(f"block {bid}: half-spaces must have length {d + 1}")
                v = _block_from_halfspaces(h)
            else:
                raise SceneError(f"block {bid} needs vertices or halfspaces")
            if np.linalg.matrix_rank(v, tol=1e-10) < d + 1:
                raise SceneError(f"block {bid} is not full-dimensional")
            verts[bid] = v
            order.append(bid)

        walls: dict[str, Wall] = {}
        per_block: dict[str, list[str]] = {bid: [] for bid in order}
        for w in walls_raw:
            wid = str(w["id"])
            bid = str(w["block"])
            if wid in walls:
                raise SceneError(f"duplicate wall {wid}")
            if bid not in verts:
                raise SceneError(f"wall {wid} references unknown block {bid}")
            v = verts[bid]
            face = tuple(int(i) for i in w["face"])
            if not face or min(face) < 0 or max(face) >= v.shape[0]:
                raise SceneError(f"wall {wid}: face index out of range")
            fv = v[list(face)]
            if np.linalg.matrix_rank(fv, tol=1e-10) != d:
                raise SceneError(f"wall {wid}: face does not span a hyperplane")
            ns = null_space(fv, rcond=1e-10)
            if ns.shape[1] != 1:
                raise SceneError(f"wall {wid}: face does not span a hyperplane")
            n = ns[:, 0]
            vals = v @ n
            if vals.max() > 1e-9 and vals.min() < -1e-9:
                raise SceneError(f"wall {wid}: face is not a supporting face of {bid}")
            if vals.sum() < 0:
                n = -n
            polar = w.get("polar")
            polar = None if polar is None else np.asarray(polar, dtype=float)
            if polar is not None:
                if polar.shape != (d + 1,):
                    raise SceneError(f"wall {wid}: polar has the wrong length")
                if abs(polar @ n) <= 1e-12 * np.linalg.norm(polar):
                    raise SceneError(f"wall {wid}: polar lies on the wall")
            mu = float(w.get("mu", 1.0))
            if not mu > 0:
                raise SceneError(f"wall {wid}: mu must be positive")
            walls[wid] = Wall(wid, bid, face, n, polar, mu)
            per_block[bid].append(wid)

        blocks = {bid: Block(bid, verts[bid], tuple(per_block[bid])) for bid in order}

        crossings: dict[str, tuple[str, np.ndarray]] = {}
        for pr in pairs_raw:
            if len(pr) != 3:
                raise SceneError("pairings are [wallA, wallB, matrix]")
            a_id, b_id = str(pr[0]), str(pr[1])
            m = np.asarray(pr[2], dtype=float)
            for x in (a_id, b_id):
                if x not in walls:
                    raise SceneError(f"pairing references unknown wall {x}")
                if x in crossings:
                    raise SceneError(f"wall {x} is paired twice")
            if a_id == b_id:
                raise SceneError(f"wall {a_id} is paired with itself")
            if m.shape != (d + 1, d + 1) or abs(np.linalg.det(m)) < 1e-14:
                raise SceneError(f"pairing {a_id}-{b_id}: matrix must be invertible of size {d + 1}")
            wa, wb = walls[a_id], walls[b_id]
            fa = blocks[wa.block].vertices[list(wa.face)]
            fb = unit_rows(blocks[wb.block].vertices[list(wb.face)] @ m.T)
            if not _same_ray_set(fa, fb):
                raise WallMismatch(f"pairing {a_id}-{b_id}: faces do not match", (a_id, b_id))
            inner = m @ blocks[wb.block].interior_point
            if wa.functional @ inner >= 0:
                raise WallMismatch(f"pairing {a_id}-{b_id}: blocks on the same side", (a_id, b_id))
            if wa.polar is not None and wb.polar is not None:
                pb = m @ wb.polar
                if np.linalg.norm(np.cross(pb, wa.polar) if d == 2 else
                                  pb / np.linalg.norm(pb) - np.sign(pb @ wa.polar) * wa.polar / np.linalg.norm(wa.polar)) > 1e-7:
                    raise WallMismatch(f"pairing {a_id}-{b_id}: polars do not match", (a_id, b_id))
            ratio_a = wb.mu / wa.mu
            ratio_b = wa.mu / wb.mu
            ga = m.copy()
            gb = np.linalg.inv(m)
            if abs(ratio_a - 1.0) > 1e-15:
                if wa.polar is None or wb.polar is None:
                    raise SceneError(f"pairing {a_id}-{b_id}: bulging needs polar points")
                ga = bulge_along(wa.functional, wa.polar, ratio_a) @ ga
                gb = bulge_along(wb.functional, wb.polar, ratio_b) @ gb
            crossings[a_id] = (b_id, _orient(ga))
            crossings[b_id] = (a_id, _orient(gb))

        corners: dict[str, Corner] = {}
        for c in corners_raw:
            cid = str(c["id"])
            word = tuple(str(x) for x in c["meridian_word"])
            if not word:
                raise SceneError(f"corner {cid}: empty meridian word")
            for x in word:
                if x not in crossings:
                    raise SceneError(f"corner {cid}: wall {x} is not paired")
            ang = c.get("angle")
            corners[cid] = Corner(cid, None if ang is None else float(ang), word)

        root = scene.get("root", order[0])
        if root not in blocks:
            raise SceneError(f"unknown root block {root}")
        return cls(d, blocks, walls, crossings, corners, tol, seed, depth, chart, root)

    def crossing(self, wall_id: str) -> tuple[str, np.ndarray]:
        return self.crossings[wall_id]


# ---------------------------------------------------------------- development


@dataclass(frozen=True, eq=False)
class Tile:
    index: int
    block: str
    word: tuple[str, ...]
    matrix: np.ndarray
    vertices: np.ndarray
    parent: int | None
    entry_wall: str | None
    depth: int
    inverse: np.ndarray | None = None


class TileSet:
    """Depth-limited development of a kit, in breadth-first order."""

    def __init__(self, kit: GluingKit, tiles: list[Tile], neighbors: dict[tuple[int, str], int],
                 depth: int, chart: np.ndarray):
        self.kit = kit
        self.tiles = tiles
        self.neighbors = neighbors
        self.depth = depth
        self.chart = chart

    def __len__(self) -> int:
        return len(self.tiles)

    def body(self, i: int) -> ConvexBody:
        """Tile i as a convex body in the development chart."""
        t = self.tiles[i]
        q = self.kit.quadrics.get(t.block)
        if q is not None:
            return ConvexBody(t.vertices, self.chart, quadric=t.inverse.T @ q.quadric @ t.inverse,
                              resolution=q.resolution)
        return ConvexBody(t.vertices, self.chart)

    def tree_path(self, i: int, j: int) -> list[int]:
        """Tile indices on the tree path from tile i to tile j."""
        up, down = [i], [j]
        while up[-1] != down[-1]:
            a, b = self.tiles[up[-1]], self.tiles[down[-1]]
            if a.depth >= b.depth:
                up.append(a.parent)
            else:
                down.append(b.parent)
        return up + down[-2::-1]

    def all_vertices(self) -> np.ndarray:
        return np.vstack([t.vertices for t in self.tiles])

    def chart_polygons(self) -> list[np.ndarray]:
        """Tile outlines in chart coordinates (d = 2), in the cyclic order of their blocks."""
        phi, u = chart_frame(self.chart)
        return [to_chart(t.vertices[self.kit.blocks[t.block].cyclic_order], phi, u) for t in self.tiles]

    def chart_tiles(self) -> list[ChartPolytope]:
        """Tiles in chart coordinates with half-spaces pulled back from their blocks.

        Deep tiles are far too thin to rebuild their hulls numerically, so the
        facet functionals of the block are transported by the inverse holonomy.
        """
        out = []
        polys = self.chart_polygons() if self.kit.dimension == 2 else None
        for k, t in enumerate(self.tiles):
            funcs = self.kit.blocks[t.block].body.facets.functionals @ t.inverse
            cp = ChartPolytope.from_functionals(t.vertices, funcs, self.chart)
            if polys is not None:
                cp = ChartPolytope(polys[k], cp.normals, cp.offsets)
            out.append(cp)
        return out

    def to_json(self) -> dict:
        tiles = []
        for t in self.tiles:
            blk = self.kit.blocks[t.block]
            tiles.append({
                "index": t.index,
                "block": t.block,
                "depth": t.depth,
                "parent": t.parent,
                "word": list(t.word),
                "vertices": t.vertices.tolist(),
                "walls": {w: list(self.kit.walls[w].face) for w in blk.walls},
            })
        return {"depth": self.depth, "chart": self.chart.tolist(), "count": len(tiles), "tiles": tiles}


def develop(kit: GluingKit, depth: int | None = None, root: str | None = None,
            root_matrix=None) -> TileSet:
    """Breadth-first development of the tree of tiles up to ``depth`` crossings."""
    depth = kit.depth if depth is None else int(depth)
    if depth < 0:
        raise SceneError("depth must be non-negative")
    root = kit.root if root is None else root
    h0 = np.eye(kit.dimension + 1) if root_matrix is None else np.asarray(root_matrix, dtype=float)
    tiles = [Tile(0, root, (), h0, unit_rows(kit.blocks[root].vertices @ h0.T), None, None, 0,
                  np.linalg.inv(h0))]
    neighbors: dict[tuple[int, str], int] = {}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        t = tiles[i]
        if t.depth >= depth:
            continue
        for wid in kit.blocks[t.block].walls:
            if wid == t.entry_wall or wid not in kit.crossings:
                continue
            other, g = kit.crossing(wid)
            h = t.matrix @ g
            blk = kit.walls[other].block
            v = unit_rows(kit.blocks[blk].vertices @ h.T)
            mine = t.vertices[list(kit.walls[wid].face)]
            theirs = v[list(kit.walls[other].face)]
            if not _same_ray_set(mine, theirs, max(MATCH_TOL, 1e3 * kit.tolerance)):
                raise WallMismatch(f"developed faces disagree across {wid}", (t.word, wid))
            j = len(tiles)
            hinv = kit.crossing(other)[1] @ t.inverse
            tiles.append(Tile(j, blk, t.word + (wid,), h, v, i, other, t.depth + 1, hinv))
            neighbors[(i, wid)] = j
            neighbors[(j, other)] = i
            queue.append(j)
    if kit.chart is not None:
        chart = kit.chart / np.linalg.norm(kit.chart)
    else:
        chart = find_chart(np.vstack([t.vertices for t in tiles]))
    return TileSet(kit, tiles, neighbors, depth, chart)


def develop_path(kit: GluingKit, walls) -> list[Tile]:
    """Tiles along a single word of wall crossings starting at the root block."""
    h = np.eye(kit.dimension + 1)
    blk = kit.root
    out = [Tile(0, blk, (), h, unit_rows(kit.blocks[blk].vertices), None, None, 0)]
    for k, wid in enumerate(walls):
        if kit.walls[wid].block != blk:
            raise SceneError(f"wall {wid} is not a wall of block {blk}")
        other, g = kit.crossing(wid)
        h = h @ g
        blk = kit.walls[other].block
        out.append(Tile(k + 1, blk, out[-1].word + (wid,), h,
                        unit_rows(kit.blocks[blk].vertices @ h.T), k, other, k + 1))
    return out


# ---------------------------------------------------------------- wall condition


@dataclass(frozen=True)
class WallCheck:
    wall: str
    passed: bool
    margin: float
    witness: list[float] | None = None

    def to_dict(self) -> dict:
        return {"wall": self.wall, "passed": self.passed, "margin": self.margin, "witness": self.witness}


def _face_boundary_points(face: np.ndarray) -> list[np.ndarray]:
    """One point in the relative interior of every facet of a face (its endpoints for segments)."""
    k = face.shape[1] - 1
    if k == 1:
        return [f for f in face]
    phi = face.sum(axis=0)
    basis = null_space(null_space(face, rcond=1e-10).T, rcond=1e-10)
    sub = face @ basis
    sphi = phi @ basis
    normals, offsets = chart_halfspaces(to_chart(sub, sphi))
    pts = to_chart(sub, sphi)
    out = []
    for j in range(normals.shape[0]):
        res = np.abs(pts @ normals[j] + offsets[j])
        members = face[res <= 1e-9 * (1 + np.abs(pts).max())]
        m = members / (members @ phi)[:, None]
        out.append(m.mean(axis=0))
    return out


def support_lp(points: np.ndarray, p: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest mean value of a bounded functional vanishing at ``p`` and non-negative on ``points``."""
    v = unit_rows(points)
    n = v.shape[1]
    res = linprog(-v.sum(axis=0), A_ub=-v, b_ub=np.zeros(v.shape[0]), A_eq=p[None, :] / np.linalg.norm(p),
                  b_eq=[0.0], bounds=[(-1, 1)] * n, method="highs")
    if res.status != 0:
        return -np.inf, np.zeros(n)
    return float(-res.fun / v.shape[0]), res.x


def check_wall_condition(kit: GluingKit, wall_id: str, tol: float | None = None) -> WallCheck:
    """Look for a supporting half-space of the two adjacent tiles through each boundary point of the wall."""
    tol = kit.tolerance if tol is None else tol
    w = kit.walls[wall_id]
    if wall_id not in kit.crossings:
        raise SceneError(f"wall {wall_id} is not paired")
    other, g = kit.crossing(wall_id)
    dv = kit.blocks[w.block].vertices
    dw = unit_rows(kit.blocks[kit.walls[other].block].vertices @ g.T)
    union = np.vstack([dv, dw])
    face = dv[list(w.face)]
    worst = np.inf
    for p in _face_boundary_points(face):
        m, _ = support_lp(union, p)
        if m <= tol:
            return WallCheck(wall_id, False, float(m), [float(x) for x in p / np.linalg.norm(p)])
        worst = min(worst, m)
    return WallCheck(wall_id, True, float(worst))


# ---------------------------------------------------------------- corners


@dataclass(frozen=True, eq=False)
class Meridian:
    corner: str
    holonomy: np.ndarray
    period: list[tuple[str, np.ndarray]]
    stratum: np.ndarray
    appearances: frozenset


def meridian(kit: GluingKit, corner_id: str) -> Meridian:
    """Develop the tiles of one period of a corner's fan and its recurrence map."""
    c = kit.corners[corner_id]
    start = kit.walls[c.word[0]].block
    blk = start
    h = np.eye(kit.dimension + 1)
    period: list[tuple[str, np.ndarray]] = []
    for wid in c.word:
        if kit.walls[wid].block != blk:
            raise BadMeridian(f"corner {corner_id}: wall {wid} is not a wall of block {blk}")
        period.append((blk, h))
        other, g = kit.crossing(wid)
        h = h @ g
        blk = kit.walls[other].block
    if blk != start:
        raise BadMeridian(f"corner {corner_id}: meridian word does not close up")
    rays = [unit_rows(kit.blocks[b].vertices @ m.T) for b, m in period]
    ring = rays + [unit_rows(kit.blocks[start].vertices @ h.T),
                   unit_rows(kit.blocks[period[-1][0]].vertices @ (np.linalg.inv(h) @ period[-1][1]).T)]
    common = [x for x in rays[0] if all(_match_index(x, r) >= 0 for r in ring[1:])]
    d = kit.dimension
    if not common or np.linalg.matrix_rank(np.array(common), tol=1e-8) != d - 1:
        raise BadMeridian(f"corner {corner_id}: fan tiles do not share a codimension-2 face")
    s = np.array(common)
    basis = null_space(null_space(s, rcond=1e-8).T, rcond=1e-8)
    moved = (h @ basis)
    resid = np.linalg.norm(moved - basis @ (basis.T @ moved)) / np.linalg.norm(moved)
    if resid > 1e-7:
        raise BadMeridian(f"corner {corner_id}: corner span is not invariant (residual {resid:.3g})")
    app = set()
    for (b, _), r in zip(period, rays):
        idx = frozenset(_match_index(x, r) for x in s)
        app.add((b, idx))
    return Meridian(corner_id, h, period, s, frozenset(app))


def quotient_frame(stratum: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of the span of the stratum (d+1 x 2)."""
    return null_space(stratum, rcond=1e-8)


@dataclass(frozen=True)
class CornerCheck:
    corner: str
    passed: bool
    trace: float
    trace_margin: float
    eigenline_distance: float | None
    reason: str | None = None

    def to_dict(self) -> dict:
        return {"corner": self.corner, "passed": self.passed, "trace": self.trace,
                "trace_margin": self.trace_margin, "eigenline_distance": self.eigenline_distance,
                "reason": self.reason}


def _angular_interval(vectors: np.ndarray) -> tuple[float, float] | None:
    """Smallest arc (lo, hi) containing the directions, or None if they do not fit in an open half-circle."""
    ang = np.arctan2(vectors[:, 1], vectors[:, 0])
    a0 = ang[0]
    rel = (ang - a0 + np.pi) % (2 * np.pi) - np.pi
    lo, hi = rel.min(), rel.max()
    if hi - lo >= np.pi:
        return None
    # another reference may give a tighter arc if the first wrapped badly
    for ref in ang:
        r = (ang - ref + np.pi) % (2 * np.pi) - np.pi
        if r.max() - r.min() < hi - lo - 1e-15:
            a0, lo, hi = ref, r.min(), r.max()
    return float(a0 + lo), float(a0 + hi)


def quotient_data(g: np.ndarray, stratum: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    qb = quotient_frame(stratum)
    gq = qb.T @ g @ qb
    return qb, gq


def corner_check_from_period(name: str, g: np.ndarray, stratum: np.ndarray, tiles: list[np.ndarray],
                             tol: float = DEFAULT_TOL) -> CornerCheck:
    qb, gq = quotient_data(g, stratum)
    det = np.linalg.det(gq)
    if det <= 0:
        return CornerCheck(name, False, float("nan"), float("nan"), None, "orientation-reversing meridian")
    gn = gq / np.sqrt(det)
    tr = float(np.trace(gn))
    margin = tr - 2.0
    if np.abs(gn - np.eye(2)).max() <= 1e-10:
        return CornerCheck(name, False, tr, margin, None, "meridian acts trivially on the quotient")
    if margin < -tol:
        return CornerCheck(name, False, tr, margin, None, "meridian trace below 2")
    proj = []
    for v in tiles:
        p = v @ qb
        keep = np.linalg.norm(p, axis=1) > 1e-9
        proj.append(p[keep])
    arc = _angular_interval(np.vstack(proj))
    if arc is None:
        return CornerCheck(name, False, tr, margin, None, "fan period spans a half-circle")
    lo, hi = arc
    vals, vecs = np.linalg.eig(gn)
    dist = np.inf
    for k in range(2):
        if abs(vals[k].imag) > 1e-12:
            continue
        w = np.real(vecs[:, k])
        for sgn in (1.0, -1.0):
            a = np.arctan2(sgn * w[1], sgn * w[0])
            rel = (a - lo) % (2 * np.pi)
            width = hi - lo
            if rel <= width:
                signed = -min(rel, width - rel)
            else:
                signed = min(rel - width, 2 * np.pi - rel)
            dist = min(dist, signed)
    passed = dist > tol
    reason = None if passed else "fan period meets an eigenline"
    return CornerCheck(name, bool(passed), tr, margin, float(dist), reason)


def check_corner_condition(kit: GluingKit, corner_id: str, tol: float | None = None) -> CornerCheck:
    """Trace and eigenline criteria for the fan of tiles around a corner."""
    tol = kit.tolerance if tol is None else tol
    md = meridian(kit, corner_id)
    tiles = [unit_rows(kit.blocks[b].vertices @ m.T) for b, m in md.period]
    return corner_check_from_period(corner_id, md.holonomy, md.stratum, tiles, tol)


# ---------------------------------------------------------------- certification


def detect_ghost_strata(kit: GluingKit) -> list[dict]:
    """Codimension-2 wall intersections that no declared corner accounts for."""
    declared = set()
    for cid in kit.corners:
        try:
            declared |= meridian(kit, cid).appearances
        except BadMeridian:
            continue
    ghosts = []
    d = kit.dimension
    for bid, blk in kit.blocks.items():
        ws = blk.walls
        for i in range(len(ws)):
            for j in range(i + 1, len(ws)):
                inter = set(kit.walls[ws[i]].face) & set(kit.walls[ws[j]].face)
                if not inter:
                    continue
                if np.linalg.matrix_rank(blk.vertices[sorted(inter)], tol=1e-10) != d - 1:
                    continue
                if (bid, frozenset(inter)) not in declared:
                    ghosts.append({"block": bid, "walls": [ws[i], ws[j]], "vertices": sorted(inter)})
    return ghosts


@dataclass
class Certificate:
    passed: bool
    walls: list[WallCheck]
    corners: list[CornerCheck]
    ghosts: list[dict]
    oracle: dict | None
    depth: int
    failure: dict | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "depth": self.depth,
            "failure": self.failure,
            "walls": [w.to_dict() for w in self.walls],
            "corners": [c.to_dict() for c in self.corners],
            "ghost_strata": self.ghosts,
            "oracle": self.oracle,
        }


def certify_convexity(kit: GluingKit, depth: int | None = None, samples: int = 100_000,
                      seed: int | None = None, tileset: TileSet | None = None) -> Certificate:
    """Run the wall, corner and ghost-stratum checks, then the sampling oracle on the development."""
    depth = kit.depth if depth is None else depth
    seed = kit.seed if seed is None else seed
    walls = []
    seen = set()
    for wid in kit.walls:
        if wid in seen or wid not in kit.crossings:
            continue
        seen.add(wid)
        seen.add(kit.crossings[wid][0])
        walls.append(check_wall_condition(kit, wid))
    corners = [check_corner_condition(kit, cid) for cid in kit.corners]
    ghosts = detect_ghost_strata(kit)
    failure = None
    for w in walls:
        if not w.passed:
            failure = {"kind": "wall", "id": w.wall, "margin": w.margin, "witness": w.witness}
            break
    if failure is None:
        for c in corners:
            if not c.passed:
                failure = {"kind": "corner", "id": c.corner, "trace": c.trace,
                           "trace_margin": c.trace_margin, "reason": c.reason}
                break
    if failure is None and ghosts:
        failure = {"kind": "ghost", **ghosts[0]}
    oracle = None
    if failure is None and samples > 0:
        ts = tileset if tileset is not None else develop(kit, depth)
        res = convexity_sample_oracle(ts.chart_tiles(), samples, seed=seed, tol=kit.tolerance, chart=ts.chart,
                                      candidates=ts.tree_path)
        oracle = res.to_dict()
        oracle["tiles"] = len(ts)
        if not res.passed:
            failure = {"kind": "oracle", **res.counterexample}
    return Certificate(failure is None, walls, corners, ghosts, oracle, depth, failure)


# ---------------------------------------------------------------- cells at infinity


class CellKind(enum.Enum):
    FAN_CONE = "FanCone"
    TELESCOPE_POINT = "TelescopePoint"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True, eq=False)
class CellAtInfinity:
    kind: CellKind
    depth: int
    base: np.ndarray | None = None
    apex: np.ndarray | None = None
    hausdorff: float | None = None
    contraction: float | None = None
    limit: np.ndarray | None = None
    diameters: tuple[float, ...] = ()
    distances: tuple[float, ...] = ()
    containment: bool | None = None
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def cell(self) -> np.ndarray | None:
        """Rays spanning the cell (base and apex for fans)."""
        if self.kind is not CellKind.FAN_CONE:
            return None
        return self.base if self.apex is None else np.vstack([self.base, self.apex])


def _lift_eigvec(g: np.ndarray, qb: np.ndarray, lam: float, w: np.ndarray) -> np.ndarray:
    """Eigenvector of g with eigenvalue lam whose quotient image is w."""
    n = g.shape[0]
    sb = null_space(qb.T)
    # g (sb a + qb w) = lam (sb a + qb w), unknown a
    a_mat = (g - lam * np.eye(n)) @ sb
    rhs = -(g - lam * np.eye(n)) @ (qb @ w)
    a = np.linalg.lstsq(a_mat, rhs, rcond=None)[0]
    v = sb @ a + qb @ w
    return v / np.linalg.norm(v)


def fan_cell_from_period(g: np.ndarray, stratum: np.ndarray, tiles: list[np.ndarray],
                         iterations: int = 200, tol: float = 1e-6, chart=None,
                         developed: np.ndarray | None = None) -> CellAtInfinity:
    """Limit of g^n applied to the period tiles, compared with conv(stratum, top eigenray)."""
    g = np.asarray(g, dtype=float)
    s = unit_rows(stratum)
    qb, gq = quotient_data(g, s)
    det = np.linalg.det(gq)
    gn = gq / np.sqrt(abs(det))
    if np.abs(gn - np.eye(2)).max() <= 1e-10:
        return CellAtInfinity(CellKind.FAN_CONE, 0, base=s, apex=None, hausdorff=0.0)
    verts = unit_rows(np.vstack(tiles))
    proj = verts @ qb
    proj = proj[np.linalg.norm(proj, axis=1) > 1e-9]
    vals, vecs = np.linalg.eig(gq)
    if np.any(np.abs(vals.imag) > 1e-12):
        return CellAtInfinity(CellKind.UNDETERMINED, iterations, base=s)
    order = np.argsort(-np.abs(vals.real))
    lam_top = vals.real[order[0]]
    coef = np.linalg.solve(np.real(vecs), proj.T)
    signs = np.sign(coef.mean(axis=1))
    signs[signs == 0] = 1.0
    w_top = np.real(vecs[:, order[0]]) * signs[order[0]]
    w_low = np.real(vecs[:, order[1]]) * signs[order[1]]
    apex = _lift_eigvec(g, qb, lam_top, w_top)
    low = _lift_eigvec(g, qb, vals.real[order[1]], w_low)
    sb = null_space(qb.T)
    stratum_top = float(np.abs(np.linalg.eigvals(sb.T @ g @ sb)).max())
    if abs(lam_top) <= stratum_top * (1 + 1e-12):
        # the stratum dominates: this end of the fan closes up on the stratum
        apex = None
    target_rays = s if apex is None else np.vstack([s, apex])
    # stratum rays are eigenvectors of a weaker eigenvalue; iterating them would only amplify rounding
    moving = np.array([x for x in verts if _match_index(x, s) < 0])
    snaps = []
    cur = moving.copy()
    for n in range(1, iterations + 1):
        cur = unit_rows(cur @ g.T)
        if n % 10 == 0 or n == iterations:
            snaps.append(np.vstack([s, cur]))
    if chart is None:
        chart = find_chart(np.vstack([verts, target_rays] + snaps))
    phi, u = chart_frame(chart)
    target = to_chart(target_rays, phi, u)
    hist = []
    for snap in snaps:
        try:
            hist.append(hausdorff_hulls(to_chart(snap, phi, u), target))
        except OutsideDomain:
            hist.append(np.inf)
    hd = hist[-1] if hist else np.inf
    n_done = iterations
    contain = None
    if developed is not None and apex is not None:
        gens = np.vstack([s, apex, low]).T
        ok = True
        for x in unit_rows(developed):
            coef, r = nnls(gens, x)
            if r > 1e-8:
                ok = False
                break
        contain = ok
    kind = CellKind.FAN_CONE if hd <= tol else CellKind.UNDETERMINED
    return CellAtInfinity(kind, n_done, base=s, apex=apex, hausdorff=float(hd),
                          containment=contain, history=tuple(hist))


def fan_cell(kit: GluingKit, corner_id: str, iterations: int = 200, tol: float = 1e-6,
             tileset: TileSet | None = None, inverse: bool = False) -> CellAtInfinity:
    """Cell at infinity of a corner fan (forward direction of the meridian, or backward if ``inverse``)."""
    md = meridian(kit, corner_id)
    g = np.linalg.inv(md.holonomy) if inverse else md.holonomy
    tiles = [unit_rows(kit.blocks[b].vertices @ m.T) for b, m in md.period]
    dev = None if tileset is None else tileset.all_vertices()
    return fan_cell_from_period(g, md.stratum, tiles, iterations, tol, kit.chart, dev)


def _common_ray_count(tiles: list[Tile]) -> int:
    base = tiles[0].vertices
    return sum(1 for x in base if all(_match_index(x, t.vertices) >= 0 for t in tiles[1:]))


def _transport(rows: np.ndarray, mats) -> tuple[np.ndarray, np.ndarray]:
    """Apply matrices in sequence to row vectors, renormalizing at each step.

    Returns the unit results and the accumulated log of the norm growth.
    """
    v = np.atleast_2d(np.asarray(rows, dtype=float)).copy()
    logn = np.log(np.linalg.norm(v, axis=1))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for m in mats:
        v = v @ m.T
        nrm = np.linalg.norm(v, axis=1)
        logn += np.log(nrm)
        v /= nrm[:, None]
    return v, logn


def _segment_wall(x: np.ndarray, p: np.ndarray, functional: np.ndarray) -> np.ndarray:
    """Point of the segment [x, p] on ker(functional), for rays on opposite sides."""
    a, b = functional @ x, functional @ p
    return (-b) * x + a * p if a > 0 else b * x - a * p


def telescope_diagnostics(kit: GluingKit, walls, fan_window: int = 6) -> CellAtInfinity:
    """Track two segments from the root through a word of wall crossings.

    Every quantity at step n is computed in the frame of the n-th tile, with
    points moved there one crossing at a time, so the measurements survive
    far beyond the depth where the developed tiles become numerically flat.
    Reported: Hilbert distances between the two crossing points on each wall
    (inside the hull of the path tiles and their neighbours) and the angle
    each wall subtends at the root barycenter.
    """
    walls = list(walls)
    path = develop_path(kit, walls)
    n = len(path) - 1
    d = kit.dimension
    for k in range(fan_window, n + 2):
        if d >= 2 and _common_ray_count(path[k - fan_window:k]) >= d - 1:
            raise FanDirection("tile path keeps turning around one corner")
    if n < 3:
        return CellAtInfinity(CellKind.UNDETERMINED, n)
    fwd = [kit.crossing(w)[1] for w in walls]
    bwd = [kit.crossing(kit.crossing(w)[0])[1] for w in walls]
    blocks = [kit.blocks[t.block] for t in path]

    def to_frame(rows, k: int, j: int) -> np.ndarray:
        # frame k -> frame j: x_j = H_j^-1 H_k x_k
        mats = fwd[j:k][::-1] if k > j else bwd[k:j]
        return _transport(rows, mats)[0]

    clouds = []
    for k, t in enumerate(path):
        pts = [blocks[k].vertices]
        for wid in blocks[k].walls:
            if wid in kit.crossings:
                other, g = kit.crossing(wid)
                pts.append(kit.blocks[kit.walls[other].block].vertices @ g.T)
        clouds.append(unit_rows(np.vstack(pts)))
    x0 = blocks[0].vertices.mean(axis=0)
    lastv = blocks[n].vertices
    bary = lastv.mean(axis=0)
    p_pair = [(2 * bary + lastv[0]) / 3, (2 * bary + lastv[1]) / 3]

    dists = []
    for j in range(1, n + 1):
        cloud = np.vstack([to_frame(c, k, j) for k, c in enumerate(clouds)])
        hull = ConvexBody(cloud, find_chart(cloud))
        xj = to_frame(x0, 0, j)[0]
        fn = kit.walls[path[j].entry_wall].functional
        ys = [_segment_wall(xj, to_frame(p, n, j)[0], fn) for p in p_pair]
        dists.append(hilbert_distance(hull, ys[0], ys[1]))

    # angles subtended at the root barycenter, from exact wedge magnitudes
    phi = find_chart(np.vstack([clouds[0], x0]))
    xu = x0 / np.linalg.norm(x0)
    diams = []
    for j in range(1, n + 1):
        face = blocks[j].vertices[list(kit.walls[path[j].entry_wall].face)]
        mats = fwd[:j][::-1]
        units, logs = _transport(face, mats)
        xh = xu / (phi @ xu)
        best = 0.0
        for a in range(len(face)):
            for b in range(a + 1, len(face)):
                ua, ub = units[a], units[b]
                ah, bh = ua / (phi @ ua), ub / (phi @ ub)
                if d == 2:
                    w, logw = _transport(np.cross(face[a], face[b]), [np.linalg.inv(m).T for m in mats])
                    sin_ab = np.exp(logw[0] - logs[a] - logs[b])
                    vol = abs(xh @ w[0]) * sin_ab / ((phi @ ua) * (phi @ ub))
                    sin_x = vol / (np.linalg.norm(ah - xh) * np.linalg.norm(bh - xh))
                    ang = float(np.arcsin(min(sin_x, 1.0)))
                else:
                    va, vb = ah - xh, bh - xh
                    c = va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb))
                    ang = float(np.arccos(np.clip(c, -1, 1)))
                best = max(best, ang)
        diams.append(best)
    shrinking = all(b < a for a, b in zip(diams, diams[1:]))
    lam = float((diams[0] / diams[-1]) ** (1.0 / (n - 1))) if diams[-1] > 0 else np.inf
    kind = CellKind.TELESCOPE_POINT if shrinking and lam > 1 else CellKind.UNDETERMINED
    limit = path[-1].vertices.mean(axis=0)
    return CellAtInfinity(kind, n, contraction=lam, limit=limit / np.linalg.norm(limit),
                          diameters=tuple(diams), distances=tuple(dists))


def interval_hilbert(outer: tuple[float, float], u: float, v: float) -> float:
    a, b = outer
    cr = cross_ratio([a, 1.0], [u, 1.0], [v, 1.0], [b, 1.0])
    return 0.5 * abs(np.log(cr))


def interval_contraction(intervals, samples: int = 2000, seed: int = 0) -> list[dict]:
    """Contraction of the Hilbert metric along a chain of nested intervals.

    For each consecutive pair (outer, inner) the sup of d_outer / d_inner over
    sampled pairs of the inner interval is measured and compared with the
    closed form tanh(diam / 2), diam being the outer-metric diameter of the inner interval.
    """
    rng = np.random.default_rng(seed)
    out = []
    for outer, inner in zip(intervals, intervals[1:]):
        a, b = outer
        c, e = inner
        if not (a < c < e < b):
            raise SceneError("intervals must be strictly nested")
        diam = interval_hilbert(outer, c, e)
        u = c + (e - c) * rng.uniform(0.0, 1.0, size=(samples, 2))
        u = u[np.abs(u[:, 0] - u[:, 1]) > 1e-9 * (e - c)]
        ratio = max(interval_hilbert(outer, p, q) / interval_hilbert(inner, p, q) for p, q in u)
        bound = float(np.tanh(diam / 2.0))
        out.append({"measured": float(ratio), "bound": bound, "factor": float(1.0 / ratio),
                    "bound_factor": float(1.0 / bound)})
    return out


# ---------------------------------------------------------------- boundary classification


@dataclass
class BoundaryReport:
    samples: int
    depth: int
    counts: dict
    fan_orbits: list[str]
    witnesses: dict
    inherited: dict
    apex_notes: dict

    def to_dict(self) -> dict:
        return {"samples": self.samples, "depth": self.depth, "counts": self.counts,
                "fan_orbits": self.fan_orbits, "witnesses": self.witnesses,
                "inherited": self.inherited, "apex_notes": self.apex_notes}


def _block_facet_walls(kit: GluingKit, bid: str) -> list[str | None]:
    blk = kit.blocks[bid]
    fac = blk.body.facets
    out: list[str | None] = []
    for mem in fac.members:
        hit = None
        for wid in blk.walls:
            if set(kit.walls[wid].face) <= mem:
                hit = wid
                break
        out.append(hit)
    return out


def classify_boundary(kit: GluingKit, certificate: Certificate | None, depth: int | None = None,
                      samples: int = 4096, fan_window: int = 4, tileset: TileSet | None = None) -> BoundaryReport:
    """Sort sampled boundary directions (seen from the root) into inherited points, fan cells and telescopes."""
    if certificate is None or not certificate.passed:
        raise NotCertified("boundary classification needs a passing convexity certificate")
    depth = kit.depth if depth is None else depth
    ts = tileset if tileset is not None else develop(kit, depth)
    phi, u = chart_frame(ts.chart)
    d = kit.dimension
    facet_walls = {bid: _block_facet_walls(kit, bid) for bid in kit.blocks}
    block_funcs = {bid: kit.blocks[bid].body.facets.functionals for bid in kit.blocks}
    corner_of = {}
    for cid in kit.corners:
        for bid, idx in meridian(kit, cid).appearances:
            corner_of[(bid, idx)] = cid
    root = ts.body(0)
    x0 = root.barycenter / (root.barycenter @ phi)
    y0 = x0 @ u
    x0 = from_chart(y0, phi, u)[0]
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif d == 2:
        t = 2 * np.pi * (np.arange(samples) + 0.5) / samples
        dirs = np.column_stack([np.cos(t), np.sin(t)])
    else:
        rng = np.random.default_rng(kit.seed)
        dirs = rng.normal(size=(samples, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    counts = {"inherited": 0, "fan": 0, "telescope": 0}
    witnesses: dict[str, list] = {"inherited": [], "fan": [], "telescope": []}
    inherited = {"extremal": 0, "c1": 0}
    orbits: set[str] = set()
    inv = {}
    for dvec in dirs:
        du = u @ dvec
        cur = 0
        s_cur = 0.0
        path = [0]
        verdict = None
        while True:
            t = ts.tiles[cur]
            q = kit.quadrics.get(t.block)
            if q is not None:
                body = ts.body(cur)
                _, s_hi = body.chord(x0, du)
                verdict = ("inherited", x0 + s_hi * du, True, True)
                break
            if cur not in inv:
                inv[cur] = block_funcs[t.block] @ np.linalg.inv(t.matrix)
            f = inv[cur]
            a = f @ x0
            b = f @ du
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(b < 0, -a / b, np.inf)
            r = np.where(r > s_cur - 1e-12, r, np.inf)
            j = int(np.argmin(r))
            s_exit = float(r[j])
            wid = facet_walls[t.block][j]
            if wid is None:
                pt = x0 + s_exit * du
                on = sum(1 for jj in range(len(r)) if abs(r[jj] - s_exit) <= 1e-12 * (1 + abs(s_exit)))
                verdict = ("inherited", pt, False, on == 1)
                break
            nxt = ts.neighbors.get((cur, wid))
            if nxt is None:
                tail = [ts.tiles[i] for i in path[-fan_window:]]
                if len(tail) >= fan_window and _common_ray_count(tail) >= d - 1:
                    last = tail[-1]
                    common = [k for k, x in enumerate(last.vertices)
                              if all(_match_index(x, tt.vertices) >= 0 for tt in tail[:-1])]
                    cid = corner_of.get((last.block, frozenset(common)))
                    verdict = ("fan", x0 + s_exit * du, cid)
                else:
                    verdict = ("telescope", x0 + s_exit * du)
                break
            cur = nxt
            s_cur = s_exit
            path.append(cur)
        kind = verdict[0]
        counts[kind] += 1
        if kind == "inherited":
            inherited["extremal"] += int(verdict[2])
            inherited["c1"] += int(verdict[3])
        if kind == "fan" and verdict[2] is not None:
            orbits.add(verdict[2])
        if len(witnesses[kind]) < 3:
            witnesses[kind].append({"direction": [float(c) for c in dvec], "depth": len(path) - 1,
                                    "point": [float(c) for c in verdict[1] / np.linalg.norm(verdict[1])]})
    notes = {}
    cert_corners = {c.corner: c for c in certificate.corners}
    for cid in sorted(orbits):
        c = cert_corners.get(cid)
        lam_gt_1 = c is not None and c.trace_margin > kit.tolerance
        notes[cid] = {"flat_face": bool(lam_gt_1), "apex_c1": False if lam_gt_1 else None}
    return BoundaryReport(int(len(dirs)), depth, counts, sorted(orbits), witnesses, inherited, notes)
