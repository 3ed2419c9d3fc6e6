import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperfuse.acceptance import random_sparse_state
from hyperfuse.hyperstate import BasisKet, Polarization, State
from hyperfuse.optics import (
    BsParams,
    PbsParams,
    PortError,
    apply_bs,
    apply_element,
    apply_hwp,
    apply_pbs,
    bs,
    dump_circuit,
    hwp,
    load_circuit,
    pbs,
    route,
    unitarity_check,
)

H, V = Polarization.H, Polarization.V
R2 = 1 / math.sqrt(2)


def ket(*modes):
    occ = {}
    for m in modes:
        occ[m] = occ.get(m, 0) + 1
    return BasisKet.build([], occ)


def single(*modes):
    return State({ket(*modes): 1.0})


def test_pbs_routes_h_through_and_v_across():
    s = apply_pbs(single(("x", "H")), "x", "y", "u", "v")
    assert s.terms == {ket(("u", "H")): 1.0}
    s = apply_pbs(single(("x", "V")), "x", "y", "u", "v")
    assert s.terms == {ket(("v", "V")): 1.0}
    s = apply_pbs(single(("y", "V")), "x", "y", "u", "v")
    assert s.terms == {ket(("u", "V")): 1.0}


def test_bs_single_photon():
    s = apply_bs(single(("x", "H")), "x", "y", "u", "v")
    assert s.amplitude(ket(("u", "H"))) == pytest.approx(R2)
    assert s.amplitude(ket(("v", "H"))) == pytest.approx(R2)
    s = apply_bs(single(("y", "V")), "x", "y", "u", "v")
    assert s.amplitude(ket(("v", "V"))) == pytest.approx(-R2)


def test_two_photon_bunching():
    # Indistinguishable photons on a balanced BS: (|2,0> - |0,2>)/sqrt2.
    s = apply_bs(single(("x", "H"), ("y", "H")), "x", "y", "u", "v")
    assert set(s.terms) == {ket(("u", "H"), ("u", "H")), ket(("v", "H"), ("v", "H"))}
    assert s.amplitude(ket(("u", "H"), ("u", "H"))) == pytest.approx(R2)
    assert s.amplitude(ket(("v", "H"), ("v", "H"))) == pytest.approx(-R2)


def test_distinguishable_photons_do_not_bunch():
    s = apply_bs(single(("x", "H"), ("y", "V")), "x", "y", "u", "v")
    assert len(s) == 4
    assert s.norm() == pytest.approx(1.0)


def test_hwp_is_hadamard():
    s = apply_hwp(single(("x", "V")), "x")
    assert s.amplitude(ket(("x", "H"))) == pytest.approx(R2)
    assert s.amplitude(ket(("x", "V"))) == pytest.approx(-R2)
    back = apply_hwp(s, "x")
    assert back.amplitude(ket(("x", "V"))) == pytest.approx(1.0)


def test_occupied_output_is_rejected():
    with pytest.raises(PortError):
        apply_element(single(("x", "H"), ("u", "H")), bs("x", "y", "u", "v"))


def test_bad_ports_rejected():
    with pytest.raises(PortError):
        bs("x", "x", "u", "v")
    with pytest.raises(PortError):
        hwp("a.b")


@given(
    st.floats(-0.2, 0.2),
    st.one_of(st.floats(0, 0.2), st.complex_numbers(max_magnitude=0.2, allow_nan=False, allow_infinity=False)),
    st.floats(-0.5, 0.5),
)
def test_imperfect_elements_are_unitary(theta_dev, r, eps):
    assert unitarity_check(pbs("x", "y", "u", "v", PbsParams(theta_dev, r))) <= 1e-12
    assert unitarity_check(bs("x", "y", "u", "v", BsParams(eps))) <= 1e-12


def test_imperfect_pbs_reduces_to_ideal():
    assert np.allclose(PbsParams(0, 0).rotation(), np.eye(2))
    assert np.allclose(BsParams(0).matrix(), R2 * np.array([[1, 1], [1, -1]]))


def test_pbs_rotation_closed_form():
    th, r = 0.03, 0.02
    c, s_, q = math.cos(th), math.sin(th), math.sqrt(r)
    want = np.array([[c - q * s_, s_ + q * c], [-(s_ + q * c), c - q * s_]]) / math.sqrt(1 + r)
    assert np.allclose(PbsParams(th, r).rotation(), want)


ELEMENTS = [
    pbs("x", "y", "x", "y", PbsParams(0.04, 0.01)),
    bs("x", "y", "x", "y", BsParams(0.1)),
    bs("u", "v", "v", "u"),
    hwp("u"),
    route({"u": "v", "v": "u"}),
]


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_norm_preserved_on_random_states(seed):
    s = random_sparse_state(np.random.default_rng(seed))
    for e in ELEMENTS:
        assert abs(apply_element(s, e).norm() - 1.0) <= 1e-12


def test_circuit_json_round_trip():
    elements = [pbs("b0", "a0", "a0'", "b0'", PbsParams(0.01, complex(0.01, 0.02))), bs("x", "y", "u", "v", BsParams(0.05)), hwp("u"), route({"p": "q"})]
    text = dump_circuit(elements)
    back = load_circuit(text)
    assert back == elements
    assert dump_circuit(back) == text
