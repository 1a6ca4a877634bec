import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projglue.errors import NotInFixator, NotSpecial, NotUniformisable, TrivialAngle
from projglue.projcore import eigen_split
from projglue.tubes import (
    AngleClass,
    LiftedSL2,
    Tube,
    blowup,
    classify_sl2_angle,
    is_special,
    lifted_displacement,
    special_generator,
    top_eigenvalue_on_block,
    tube_normal_form,
)


def rot(a):
    return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])


def random_sl2(rng):
    while True:
        p = rng.normal(size=(2, 2))
        det = np.linalg.det(p)
        if det > 0.1:
            return p / np.sqrt(det)


# ---------------------------------------------------------------- lifts


def test_rotation_displacement_constant():
    x = np.linspace(0, 2 * np.pi, 17)
    assert np.allclose(lifted_displacement(LiftedSL2(rot(1.0)), x), 1.0)


def test_hyperbolic_displacement_at_fixed_rays():
    fixed = np.array([0, np.pi / 2, np.pi, 3 * np.pi / 2])
    assert np.allclose(lifted_displacement(LiftedSL2(np.diag([2, 0.5]), 0), fixed), 0, atol=1e-12)
    assert np.allclose(lifted_displacement(LiftedSL2(np.diag([2, 0.5]), 1), fixed), 2 * np.pi)


def test_uniformisable_lift_stays_below_half_turn():
    rng = np.random.default_rng(0)
    h = LiftedSL2(np.diag([3.0, 1 / 3]), 0)
    disp = lifted_displacement(h, rng.uniform(0, 2 * np.pi, 500))
    assert np.all(np.abs(disp) < np.pi)


# ---------------------------------------------------------------- classification


def test_classification_examples():
    assert classify_sl2_angle(LiftedSL2(rot(np.pi / 3), 0)).verdict is AngleClass.COMPLETE
    assert classify_sl2_angle(LiftedSL2(rot(np.pi / 3), 2)).verdict is AngleClass.COMPLETE
    v = classify_sl2_angle(LiftedSL2(np.diag([2, 0.5]), 0))
    assert v.verdict is AngleClass.UNIFORMISABLE and v.margin == pytest.approx(0.5)
    assert classify_sl2_angle(LiftedSL2(np.diag([2, 0.5]), 1)).verdict is AngleClass.COMPLETE
    with pytest.raises(TrivialAngle):
        classify_sl2_angle(LiftedSL2(np.eye(2), 0))


def test_parabolic_band_is_indeterminate():
    m = np.array([[1.0, 1.0], [0.0, 1.0]])
    assert classify_sl2_angle(LiftedSL2(m, 0)).verdict is AngleClass.UNIFORMISABLE
    near = np.array([[1 + 1e-11, 1.0], [1e-11, 1.0]])
    assert classify_sl2_angle(LiftedSL2(near, 0)).verdict is AngleClass.INDETERMINATE


@settings(max_examples=100)
@given(st.integers(0, 10**6), st.sampled_from(["elliptic", "hyperbolic"]), st.integers(-2, 2))
def test_classification_conjugation_invariant(seed, kind, lift):
    rng = np.random.default_rng(seed)
    base = rot(rng.uniform(0.1, 3.0)) if kind == "elliptic" else np.diag([l := rng.uniform(1.1, 5), 1 / l])
    h = LiftedSL2(base, lift)
    before = classify_sl2_angle(h).verdict
    after = classify_sl2_angle(h.conjugate(random_sl2(rng))).verdict
    assert before is after


# ---------------------------------------------------------------- special tubes


def test_special_margin_example():
    t = Tube(3, 3.0, LiftedSL2(np.diag([2, 0.5])))
    ok, margin = is_special(t)
    assert ok and margin == pytest.approx(59.5)


def test_unit_mu_is_never_special():
    ok, margin = is_special(Tube(3, 1.0, LiftedSL2(np.diag([1.5, 1 / 1.5]))))
    assert not ok and margin <= 0


def test_complete_tube_rejected():
    with pytest.raises(NotUniformisable):
        is_special(Tube(3, 2.0, LiftedSL2(rot(0.5))))


@settings(max_examples=100)
@given(st.integers(0, 10**6))
def test_generator_and_inverse_never_both_special(seed):
    rng = np.random.default_rng(seed)
    lam = rng.uniform(1.01, 4)
    t = Tube(3, rng.uniform(0.3, 4), LiftedSL2(np.diag([lam, 1 / lam])), rng.normal(size=(2, 2)))
    assert not (is_special(t)[0] and is_special(t.inverse())[0])


def test_special_generator_choice():
    t = Tube(3, 2.0, LiftedSL2(np.diag([1.5, 1 / 1.5])))
    g = special_generator(t)
    assert np.allclose(g.m, t.generator.m)
    assert np.allclose(special_generator(t.inverse()).m, g.m, atol=1e-12)
    assert top_eigenvalue_on_block(t)
    with pytest.raises(NotSpecial):
        special_generator(Tube(3, 1.0, LiftedSL2(np.diag([1.5, 1 / 1.5]))))


def test_special_generator_top_eigenvalue_on_block_random():
    rng = np.random.default_rng(4)
    for _ in range(50):
        lam = rng.uniform(1.05, 3)
        t = Tube(3, rng.uniform(1.5, 4), LiftedSL2(np.diag([lam, 1 / lam])), rng.normal(size=(2, 2)))
        if not is_special(t)[0]:
            continue
        top = eigen_split(special_generator(t).m)[0]
        assert np.linalg.norm(top.vector[2:]) > 1e-6


# ---------------------------------------------------------------- normal form and blowup


def test_normal_form_roundtrip_and_conjugation():
    rng = np.random.default_rng(5)
    c = rng.normal(size=(2, 2))
    t = Tube(3, 2.5, LiftedSL2(np.diag([1.7, 1 / 1.7])), c)
    back = tube_normal_form(t.matrix)
    assert back.mu == pytest.approx(2.5) and np.allclose(back.C, c) and np.allclose(back.angle.m, t.angle.m)
    p = np.eye(4)
    p[:2, 2:] = rng.normal(size=(2, 2))
    p[2:, 2:] = random_sl2(rng)
    conj = tube_normal_form(p @ t.matrix @ np.linalg.inv(p))
    assert conj.mu == pytest.approx(2.5)
    assert conj.angle.trace == pytest.approx(t.angle.trace)
    assert conj.classify().verdict is t.classify().verdict


def test_normal_form_errors():
    with pytest.raises(NotInFixator):
        tube_normal_form(np.random.default_rng(0).normal(size=(4, 4)))
    with pytest.raises(TrivialAngle):
        tube_normal_form(np.diag([0.5, 0.5, 2.0, 2.0]))


def test_blowup_diagonal_example():
    g = np.diag([0.5, 0.5, 3.0, 4 / 3])
    data = blowup(tube_normal_form(g))
    assert data.kind == "hyperbolic"
    assert data.x_plus.isclose([0, 0, 1, 0])
    assert data.in_plus_wall([1, 0, 0, 0]) and data.in_plus_wall([0, 0, 1, 0])
    assert not data.in_plus_wall([0, 0, 0, 1])


def test_blowup_parabolic():
    block = np.array([[1.0, 1.0], [0.0, 1.0]])
    data = blowup(Tube(3, 2.0, LiftedSL2(block)))
    assert data.kind == "parabolic"
    assert data.x_plus.isclose([0, 0, 1, 0])
    assert np.allclose(data.plus_normal, data.minus_normal)


def test_blowup_iterates_converge_to_top_ray():
    rng = np.random.default_rng(6)
    t = Tube(3, 2.0, LiftedSL2(np.diag([1.5, 1 / 1.5])), rng.normal(size=(2, 2)))
    data = blowup(t)
    g = data.generator / np.abs(data.generator).max()
    xs = rng.normal(size=(1000, 4))
    for _ in range(200):
        xs = xs @ g.T
        xs /= np.linalg.norm(xs, axis=1)[:, None]
    top = data.x_plus.v
    assert np.all(np.minimum(np.linalg.norm(xs - top, axis=1), np.linalg.norm(xs + top, axis=1)) < 1e-8)


@settings(max_examples=100)
@given(st.integers(0, 10**6), st.floats(0.1, 5))
def test_conjugated_parabolic_stays_uniformisable(seed, shear):
    rng = np.random.default_rng(seed)
    h = LiftedSL2(np.array([[1.0, shear], [0.0, 1.0]]), 0).conjugate(random_sl2(rng))
    assert classify_sl2_angle(h).verdict is AngleClass.UNIFORMISABLE
