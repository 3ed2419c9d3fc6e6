import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperfuse.hyperstate import BasisKet, State, StateError
from hyperfuse.kerr_probe import (
    HomodyneModel,
    KerrTap,
    OutcomeClass,
    apply_kerr_tap,
    bias_probe,
    discrimination_error,
    gaussian_curve,
    homodyne_project,
    homodyne_success_prob,
    peak_center,
)


def ket(modes, probe=()):
    return BasisKet.build([], modes, probe)


def test_kerr_tap_counts_photons():
    s = State({ket({("x", "H"): 2, ("y", "V"): 1}): 1.0})
    out = apply_kerr_tap(s, KerrTap.on(1, 3, ("x", "H")))
    ((k, _),) = list(out)
    assert k.probe == (6,)
    out = apply_kerr_tap(out, KerrTap.on(2, -1, "y"))
    ((k, _),) = list(out)
    assert k.probe == (6, -1)


def test_bias_shifts_every_ket():
    s = State({ket({("x", "H"): 1}, (1,)): 0.6, ket({("y", "H"): 1}, (-2,)): 0.8})
    assert sorted(k.probe for k, _ in bias_probe(s, 1, 4)) == [(2,), (5,)]


def test_projection_folds_sign_and_removes_probe():
    s = State(
        {
            ket({("x", "H"): 1}, (2,)): 0.6,
            ket({("y", "H"): 1}, (-2,)): 0.6,
            ket({("z", "H"): 1}, (0,)): math.sqrt(1 - 0.72),
        }
    )
    out = homodyne_project(s)
    assert set(out) == {OutcomeClass((0,)), OutcomeClass((2,))}
    br = out[OutcomeClass((2,))]
    assert br.probability == pytest.approx(0.72)
    assert all(k.probe == () for k, _ in br.state)
    assert br.state.norm() == pytest.approx(1.0)
    assert br.raw.norm_squared() == pytest.approx(0.72)


def test_projection_needs_normalized_input():
    with pytest.raises(StateError):
        homodyne_project(State({ket({("x", "H"): 1}, (1,)): 2.0}))


def oracle_p_suc(alpha, theta, gt, probes):
    x = mpmath.e ** (-gt / 2) * alpha * (1 - mpmath.cos(theta)) / mpmath.sqrt(2)
    return float((1 - mpmath.erfc(x) / 2) ** probes)


@given(st.floats(0, 5000), st.floats(0.001, 1.5), st.floats(0, 2), st.sampled_from([1, 3]))
def test_success_probability_matches_oracle(alpha, theta, gt, probes):
    got = homodyne_success_prob(HomodyneModel(alpha, theta, gt), probes)
    assert got == pytest.approx(oracle_p_suc(alpha, theta, gt, probes), abs=1e-14)


def test_success_probability_limits():
    assert homodyne_success_prob(HomodyneModel(1e6, 0.3, 0.0)) == pytest.approx(1.0)
    assert homodyne_success_prob(HomodyneModel(0.0, 0.3, 0.0)) == 0.5


@given(st.floats(0, 3000), st.floats(0.001, 1.5), st.floats(0, 2))
def test_three_probes_is_cube(alpha, theta, gt):
    m = HomodyneModel(alpha, theta, gt)
    assert abs(homodyne_success_prob(m, 3) - homodyne_success_prob(m, 1) ** 3) <= 1e-14


def test_model_validation():
    with pytest.raises(ValueError):
        HomodyneModel(-1, 0.1)
    with pytest.raises(ValueError):
        HomodyneModel(1, 0.0)
    with pytest.raises(ValueError):
        homodyne_success_prob(HomodyneModel(1, 0.1), 2)


def test_nine_peaks():
    alpha, theta = 2500.0, 0.01
    centers = [peak_center(alpha, k, theta) for k in range(9)]
    assert centers == [2 * alpha * math.cos(k * theta) for k in range(9)]
    assert all(a > b for a, b in zip(centers, centers[1:]))


def test_gaussian_is_unit_norm_and_peaked():
    xs = np.linspace(-40, 40, 40001)
    f = gaussian_curve(xs, 10.0, 0, 0.3)
    integrate = getattr(np, "trapezoid", None) or np.trapz
    assert integrate(f**2, xs) == pytest.approx(1.0, abs=1e-9)
    assert xs[np.argmax(f)] == pytest.approx(20.0, abs=1e-2)
    assert isinstance(gaussian_curve(1.0, 1.0, 1, 0.1), float)


def test_discrimination_error():
    assert discrimination_error(0.0, 0.3, 0, 1) == pytest.approx(0.5)
    errs = [discrimination_error(a, 0.3, 0, 1) for a in (1, 10, 100)]
    assert errs[0] > errs[1] > errs[2]
    d = abs(peak_center(50, 0, 0.3) - peak_center(50, 1, 0.3))
    assert discrimination_error(50, 0.3, 0, 1) == pytest.approx(float(mpmath.erfc(d / (2 * mpmath.sqrt(2))) / 2))
    with pytest.raises(ValueError):
        discrimination_error(1, 0.3, 2, 2)
