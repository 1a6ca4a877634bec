"""Acceptance suite: one check per criterion, each reporting a PASS/FAIL line.

Run under pytest (lines are repeated in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import subprocess
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import klein_distance, solver_oracle  # noqa: E402
from projglue.arith import PingPongConfig, check_tau, pingpong_angle_bound, rotation_rho, LorentzForm  # noqa: E402
from projglue.blocks import (  # noqa: E402
    CornerSpec,
    ParamTriple,
    alternating_mu_for_trace,
    corner_lambda_mu,
    corner_trace,
    fan_scene,
    hyp_distance,
    meridian_tube,
    quadrilateral_double_scene,
    solve_boundary_torus_params,
    special_identity_check,
    wall_holonomy_generators,
)
from projglue.cli import render_svg  # noqa: E402
from projglue.gluekit import CellKind, GluingKit, certify_convexity, develop, fan_cell  # noqa: E402
from projglue.projcore import (  # noqa: E402
    ConvexBody,
    chart_frame,
    cross_ratio,
    hausdorff_hulls,
    hilbert_distance,
    to_chart,
    unit_rows,
)
from projglue.tubes import AngleClass, LiftedSL2, classify_sl2_angle, is_special, special_generator  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
RESULTS: dict[int, str] = {}
TITLES = {
    1: "cross-ratio and Hilbert metric suite",
    2: "tube classification table",
    3: "corner identity",
    4: "boundary-torus parameter solver",
    5: "convexity transition of the quadrilateral double",
    6: "fan-cell convergence",
    7: "special tube and wall holonomy consistency",
    8: "ping-pong bound",
    9: "CLI determinism",
}


def record(n: int, ok: bool, detail: str) -> bool:
    RESULTS[n] = f"{'PASS' if ok else 'FAIL'} criterion {n} ({TITLES[n]}): {detail}"
    print(RESULTS[n])
    return ok


def _inside(rng, pts, n):
    w = rng.dirichlet(np.ones(len(pts)), size=n)
    return np.hstack([w @ pts, np.ones((n, 1))])


def _random_sl2(rng):
    while True:
        p = rng.normal(size=(2, 2))
        det = np.linalg.det(p)
        if det > 0.1:
            return p / np.sqrt(det)


# ---------------------------------------------------------------- criteria


def criterion_1(out_dir: Path) -> bool:
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    ts = rng.uniform(-100, 100, 1000)
    norm_ok = all(cross_ratio([0.0, 1.0], [1.0, 1.0], [t, 1.0], [1.0, 0.0]) == t for t in ts)

    tri_bad = 0
    mono_bad = 0
    for _ in range(1000):
        outer_pts = rng.normal(size=(rng.integers(4, 9), 2))
        outer = ConvexBody.from_chart_points(outer_pts)
        centre = outer_pts.mean(axis=0)
        inner_pts = centre + rng.uniform(0.3, 0.9) * (outer.chart_points() - centre)
        inner = ConvexBody.from_chart_points(inner_pts)
        x, y, z = _inside(rng, inner.chart_points(), 3)
        dxy = hilbert_distance(outer, x, y)
        tri_bad += dxy > hilbert_distance(outer, x, z) + hilbert_distance(outer, z, y) + 1e-9
        mono_bad += hilbert_distance(inner, x, y) < dxy - 1e-12

    disk = ConvexBody.klein_ball(2)
    worst = 0.0
    for _ in range(1000):
        a, b = (v * rng.uniform(0, 0.95) / max(np.linalg.norm(v), 1e-12) for v in rng.normal(size=(2, 2)))
        got = hilbert_distance(disk, np.append(a, 1), np.append(b, 1))
        lift = [np.append(v, 1.0) / math.sqrt(1 - v @ v) for v in (a, b)]
        worst = max(worst, abs(got - hyp_distance(*lift)), abs(got - klein_distance(a, b)))
    elapsed = time.perf_counter() - start
    ok = norm_ok and tri_bad == 0 and mono_bad == 0 and worst < 1e-9 and elapsed < 5.0
    return record(1, ok, f"normalisation exact={norm_ok}, triangle violations {tri_bad}, "
                         f"monotonicity violations {mono_bad}, Klein vs hyperboloid {worst:.2e}, {elapsed:.2f} s")


def criterion_2(out_dir: Path) -> bool:
    rng = np.random.default_rng(202)
    wrong = {"elliptic": 0, "lift zero": 0, "wound": 0}
    for _ in range(100):
        conj = _random_sl2(rng)
        a = rng.uniform(0.05, math.pi - 0.05)
        rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        h = LiftedSL2(rot, int(rng.integers(-3, 4))).conjugate(conj)
        wrong["elliptic"] += classify_sl2_angle(h).verdict is not AngleClass.COMPLETE

        conj = _random_sl2(rng)
        lam = rng.uniform(1.01, 10)
        base = np.diag([lam, 1 / lam]) if rng.random() < 0.8 else np.array([[1.0, rng.uniform(0.5, 3)], [0, 1.0]])
        h = LiftedSL2(base, 0).conjugate(conj)
        wrong["lift zero"] += classify_sl2_angle(h).verdict is not AngleClass.UNIFORMISABLE

        conj = _random_sl2(rng)
        lift = int(rng.choice([-3, -2, -1, 1, 2, 3]))
        h = LiftedSL2(np.diag([lam, 1 / lam]), lift).conjugate(conj)
        wrong["wound"] += classify_sl2_angle(h).verdict is not AngleClass.COMPLETE
    ok = sum(wrong.values()) == 0
    return record(2, ok, "misclassifications " + ", ".join(f"{k} {v}/100" for k, v in wrong.items()))


def criterion_3(out_dir: Path) -> bool:
    rng = np.random.default_rng(303)
    worst = 0.0
    negative = 0
    for _ in range(10_000):
        theta = rng.uniform(0.01, math.pi / 2 - 0.01)
        nu, nu_p = np.exp(rng.uniform(-math.log(10), math.log(10), 2))
        rep = special_identity_check(CornerSpec.from_nu(theta, nu, nu_p))
        worst = max(worst, max(abs(a - b) for a, b in zip(rep.lhs, rep.rhs)))
        negative += not rep.positive
    worked = special_identity_check(CornerSpec.from_nu(math.pi / 4, 3.0, 1 / 3))
    worked_ok = abs(worked.lhs[0] - 50) < 1e-10 and abs(worked.rhs[0] - 50) < 1e-10
    ok = worst < 1e-10 and negative == 0 and worked_ok
    return record(3, ok, f"max |identity residual| {worst:.2e}, positivity violations {negative}, "
                         f"worked instance {worked.lhs[0]:.12g} = {worked.rhs[0]:.12g}")


def criterion_4(out_dir: Path) -> bool:
    theta = math.pi / 6
    worst = {"trace": 0.0, "ratio": 0.0, "product": 0.0, "lambda": 0.0}
    small_d = 0
    count = 0
    for a in np.linspace(1.001, 2.0, 10):
        for b in np.linspace(3.05, 8.0, 10):
            wall = -2 + b * b / 2
            for frac in np.linspace(0.02, 1.0, 10):
                c = 1 + frac * (wall - 1)
                res = solve_boundary_torus_params(ParamTriple(a, b, c), theta)
                count += 1
                small_d += not res.dval > 1
                worst["trace"] = max(worst["trace"], abs(res.trace - (c + 1 / c)))
                worst["ratio"] = max(worst["ratio"], abs(res.mu / res.mu_prime - b) / b)
                worst["product"] = max(worst["product"], abs(res.mu * res.mu_prime - res.dval) / res.dval)
                worst["lambda"] = max(worst["lambda"], abs(res.lam - c))
    res = solve_boundary_torus_params(ParamTriple(1.01, 4, 2), theta)
    ref = solver_oracle(1.01, 4, 2, theta)
    worked_ok = (abs(res.dval - ref["d"]) < 1e-10 and abs(res.dval - 6.1775) < 1e-4
                 and abs(res.mu - 4.9709) < 1e-4 and abs(res.mu_prime - 1.2427) < 1e-4
                 and abs(res.trace - 2.5) < 1e-10 and abs(res.lam - 2.0) < 1e-10)
    ok = (count == 1000 and small_d == 0 and worst["trace"] < 1e-10 and worst["ratio"] < 1e-12
          and worst["product"] < 1e-12 and worst["lambda"] < 1e-10 and worked_ok)
    return record(4, ok, f"{count} grid points, d <= 1 at {small_d}, "
                         + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
                         + f", worked d={res.dval:.4f} mu={res.mu:.4f} mu'={res.mu_prime:.4f} "
                           f"t={res.trace:.10g} lambda={res.lam:.10g}")


def criterion_5(out_dir: Path) -> bool:
    start = time.perf_counter()
    theta = math.pi / 5
    unbulged = GluingKit.from_scene(quadrilateral_double_scene(depth=3))
    ts_u = develop(unbulged, 3)
    cert_u = certify_convexity(unbulged, 3, samples=1000, tileset=ts_u)
    trace_u = cert_u.failure["trace"] if cert_u.failure else float("nan")
    unbulged_ok = (not cert_u.passed and cert_u.failure["kind"] == "corner"
                   and abs(trace_u - 2 * math.cos(2 * theta)) < 1e-12 and trace_u < 2)
    (out_dir / "unbulged.svg").write_text(render_svg(ts_u, "unit bulging"), encoding="utf-8")

    m = alternating_mu_for_trace(theta, 2.05)
    bulged = GluingKit.from_scene(quadrilateral_double_scene(mus=(m, 1 / m, m, 1 / m), depth=8))
    ts_b = develop(bulged, 8)
    cert_b = certify_convexity(bulged, 8, samples=100_000, tileset=ts_b)
    traces = [c.trace for c in cert_b.corners]
    (out_dir / "bulged.svg").write_text(render_svg(ts_b, "alternating bulging"), encoding="utf-8")
    elapsed = time.perf_counter() - start
    svgs = all((out_dir / f).stat().st_size > 0 for f in ("unbulged.svg", "bulged.svg"))
    bulged_ok = (cert_b.passed and min(traces) >= 2.05 - 1e-9 and cert_b.oracle["passed"]
                 and cert_b.oracle["samples"] == 100_000)
    ok = unbulged_ok and bulged_ok and svgs and elapsed < 60
    return record(5, ok, f"unbulged fails at corner with t={trace_u:.12g}; bulged passes={cert_b.passed} "
                         f"with min t={min(traces):.12g}, oracle {cert_b.oracle['samples']} samples over "
                         f"{len(ts_b)} tiles; SVGs in {out_dir}; {elapsed:.1f} s")


def criterion_6(out_dir: Path) -> bool:
    g = np.diag([0.5, 0.5, 3.0, 4 / 3])
    stratum = np.array([[1.0, 0.2, 0.0, 0.0], [0.2, 1.0, 0.0, 0.0]])
    kit = GluingKit.from_scene(fan_scene(g, stratum, [0.3, 0.2, 1, 1], depth=3, chart=(1, 1, 1, 1)))
    cell = fan_cell(kit, "c", iterations=200)
    phi, u = chart_frame([1, 1, 1, 1])
    target = np.vstack([unit_rows(stratum), [0, 0, 1, 0]])
    to_target = hausdorff_hulls(to_chart(cell.cell, phi, u), to_chart(target, phi, u))
    moved = hausdorff_hulls(to_chart(cell.cell, phi, u), to_chart(unit_rows(cell.cell @ g.T), phi, u))
    ok = cell.kind is CellKind.FAN_CONE and cell.hausdorff < 1e-6 and to_target < 1e-6 and moved < 1e-8
    return record(6, ok, f"iterated hull distance {cell.hausdorff:.2e} at n={cell.depth}, "
                         f"cell vs hull(stratum, e3) {to_target:.2e}, displacement under g {moved:.2e}")


def criterion_7(out_dir: Path) -> bool:
    rng = np.random.default_rng(707)
    n = 0
    not_special = 0
    worst = 0.0
    while n < 100:
        theta = rng.uniform(0.05, math.pi / 2 - 0.05)
        d = int(rng.choice([2, 3, 4]))
        nu, nu_p = np.exp(rng.uniform(-3, 3, 2))
        c = CornerSpec.from_nu(theta, nu, nu_p, d)
        if corner_trace(c) < 2 + 1e-6:
            continue
        n += 1
        tube = meridian_tube(c)
        special = is_special(tube)[0] or is_special(tube.inverse())[0]
        not_special += not special
        lam, mu_c = corner_lambda_mu(c)
        k = mu_c ** ((d - 1) / 2)
        want = np.sort(np.r_[np.full(d - 1, 1 / mu_c), [k * lam, k / lam]])
        wall = np.sort(np.linalg.eigvals(wall_holonomy_generators([], c)[-1]).real)
        merid = np.sort(np.linalg.eigvals(special_generator(tube).m).real)
        worst = max(worst, np.abs(wall - want).max(), np.abs(merid - want).max())
    ok = not_special == 0 and worst < 1e-9
    return record(7, ok, f"{n} corners with t >= 2, special tube failures {not_special}, "
                         f"eigenvalue multiset error {worst:.2e}")


def criterion_8(out_dir: Path) -> bool:
    reports = {d: pingpong_angle_bound(PingPongConfig(4, d, 5.0), 1000, seed=800 + d) for d in (3, 4)}
    residual = 0.0
    for d in (2, 3, 4):
        for tau in (1.0, math.sqrt(2)):
            q = LorentzForm(d, tau).matrix
            m = rotation_rho(4, d).m
            residual = max(residual, float(np.abs(m.T @ q @ m - q).max()))
    tau = check_tau(4)
    ok = all(r.passed for r in reports.values()) and residual < 1e-12 and tau.passed
    detail = ", ".join(f"H^{d}: max ratio {r.max_ratio:.3f}, violations {r.violations}" for d, r in reports.items())
    return record(8, ok, f"{detail}; rotation residual {residual:.1e}; tau signs {tau.signs}")


def _cli(*argv) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "projglue", *map(str, argv)], capture_output=True, check=False)


def criterion_9(out_dir: Path) -> bool:
    runs = {
        "develop": lambda o: ("develop", FIXTURES / "quad_bulged.json", "--depth", 4,
                              "--out", o / "tiles.json", "--svg", o / "tiles.svg"),
        "certify": lambda o: ("certify", FIXTURES / "quad_unbulged.json", "--samples", 2000,
                              "--out", o / "cert.json", "--svg", o / "cert.svg"),
        "certify-bulged": lambda o: ("certify", FIXTURES / "quad_bulged.json", "--depth", 4, "--samples", 5000,
                                     "--out", o / "cert_b.json"),
        "develop-fan": lambda o: ("develop", FIXTURES / "fan.json", "--out", o / "fan.json"),
        "scan": lambda o: ("scan", "--a", "1.01:1.5:4", "--b", "3:6:4", "--c", "1.1:5:4", "--out", o / "scan.csv"),
        "classify": lambda o: ("classify-tube", FIXTURES / "tube_special.json", "--out", o / "tube.json"),
    }
    differing = []
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "first", Path(tmp) / "second"]
        outputs = []
        for o in dirs:
            o.mkdir()
            codes = {name: _cli(*build(o)) for name, build in runs.items()}
            files = {p.name: p.read_bytes() for p in sorted(o.iterdir())}
            outputs.append(({k: (v.returncode, v.stdout.replace(bytes(o), b"")) for k, v in codes.items()}, files))
        for key in outputs[0][1]:
            if outputs[0][1][key] != outputs[1][1].get(key):
                differing.append(key)
        for key in outputs[0][0]:
            if outputs[0][0][key] != outputs[1][0][key]:
                differing.append(f"{key} stdout")
        n_files = len(outputs[0][1])
    ok = not differing and n_files == 8
    return record(9, ok, f"{len(runs)} commands run twice, {n_files} output files compared, "
                         f"differences: {differing or 'none'}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


# ---------------------------------------------------------------- pytest entry points


@pytest.fixture(scope="module")
def out_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.mark.parametrize("number", range(1, 10))
def test_acceptance(number, out_dir):
    assert CRITERIA[number - 1](out_dir), RESULTS.get(number)


if __name__ == "__main__":
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("acceptance_output")
    target.mkdir(parents=True, exist_ok=True)
    passed = [crit(target) for crit in CRITERIA]
    print(f"{sum(passed)}/{len(passed)} criteria passed")
    sys.exit(0 if all(passed) else 1)
