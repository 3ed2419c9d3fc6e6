import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperfuse.hyperstate import (
    BasisKet,
    BlockStructure,
    Dof,
    ModeCollisionError,
    Party,
    Polarization,
    SpectatorConfig,
    State,
    StateError,
    UniverseMismatchError,
    apply_spectator_z,
    build_target_state,
    fidelity,
    infer_structure,
    inner_product,
    make_hyper_w,
    tensor,
)

A, B, C = Party.ALICE, Party.BOB, Party.CHARLIE


def w_state_oracle(n: int) -> dict[tuple[str, str, str, int], float]:
    """Hyper-W amplitudes written out by hand: (pol, spat, fusion pol, fusion port)."""
    k = n - 1
    pol = [("H" * k, "V")] + [("H" * i + "V" + "H" * (k - i - 1), "H") for i in range(k)]
    spat = [("0" * k, 1)] + [("0" * i + "1" + "0" * (k - i - 1), 0) for i in range(k)]
    return {(p, s, fp, port): 1.0 / n for (p, fp), (s, port) in itertools.product(pol, spat)}


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_hyper_w_matches_hand_expansion(n):
    s = make_hyper_w(n, A)
    assert len(s) == n * n
    got = {}
    for ket, amp in s:
        spect = ket.spectator(A)
        ((port, pol, count),) = ket.modes
        assert count == 1
        got[(spect.pol, spect.spat, pol.value, int(port[-1]))] = amp
    want = w_state_oracle(n)
    assert set(got) == set(want)
    for key, amp in want.items():
        assert abs(got[key] - amp) < 1e-15
    assert abs(s.norm() - 1) < 1e-14


def test_hyper_w_rejects_small_sizes():
    with pytest.raises(StateError):
        make_hyper_w(1, A)


def test_tensor_rejects_shared_party_and_ports():
    with pytest.raises(ModeCollisionError):
        tensor(make_hyper_w(2, A), make_hyper_w(3, A))


def test_inner_product_rejects_different_universes():
    with pytest.raises(UniverseMismatchError):
        inner_product(make_hyper_w(2, A), make_hyper_w(3, A))


def test_ket_validation():
    with pytest.raises(StateError):
        BasisKet((SpectatorConfig(B, "H", "0"), SpectatorConfig(A, "H", "0")))
    with pytest.raises(StateError):
        BasisKet.build([], {("a.0", "H"): 1})
    with pytest.raises(StateError):
        SpectatorConfig(A, "HX", "00")


ports = st.sampled_from(["a0", "a1", "b0'", "u1", "zz"])
pols = st.sampled_from(list(Polarization))


@st.composite
def kets(draw):
    parties = draw(st.lists(st.sampled_from([A, B, C]), unique=True, max_size=3))
    spect = []
    for p in sorted(parties):
        size = draw(st.integers(1, 3))
        spect.append(
            SpectatorConfig(p, draw(st.text("HV", min_size=size, max_size=size)), draw(st.text("01", min_size=size, max_size=size)))
        )
    occ = draw(st.dictionaries(st.tuples(ports, pols), st.integers(1, 3), max_size=3))
    probe = draw(st.lists(st.integers(-20, 20), max_size=3))
    return BasisKet.build(spect, occ, probe)


@given(kets())
def test_ket_key_round_trip(ket):
    back = BasisKet.from_key(ket.key())
    assert back == ket
    assert hash(back) == hash(ket)


@given(st.lists(st.tuples(kets(), st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)), max_size=5))
def test_state_json_round_trip(terms):
    s = State(terms)
    back = State.loads(s.dumps())
    assert set(back.terms) == set(s.terms)
    for k, a in s:
        assert back.amplitude(k) == a


@given(st.integers(2, 5), st.sampled_from([A, B]), st.sampled_from(list(Dof)))
def test_spectator_z_is_involution(n, party, dof):
    s = tensor(make_hyper_w(n, A), make_hyper_w(3, B))
    twice = apply_spectator_z(apply_spectator_z(s, party, dof), party, dof)
    assert twice.terms == s.terms


def test_spectator_z_flips_w_branch_sign():
    s = make_hyper_w(3, A)
    z = apply_spectator_z(s, A, Dof.P)
    for ket, amp in s:
        sign = -1 if ket.spectator(A).excitations(Dof.P) else 1
        assert z.amplitude(ket) == sign * amp


def test_target_success_state_is_product_of_big_w_states():
    n, m = 3, 4
    s = build_target_state("S", n, m)
    size = n + m - 2
    assert len(s) == size * size
    for ket, amp in s:
        assert abs(amp - 1 / size) < 1e-15
        assert sum(c.excitations(Dof.P) for c in ket.spectators) == 1
        assert sum(c.excitations(Dof.S) for c in ket.spectators) == 1


def test_target_failure_is_single_ket():
    s = build_target_state("F", 4, 3)
    ((ket, amp),) = list(s)
    assert amp == 1
    assert ket.spectator(A).pol == "HHH" and ket.spectator(B).spat == "00"


def test_target_double_recyclable_state():
    s = build_target_state("PRppss", 3, 3)
    assert len(s) == 16
    assert infer_structure(s) == BlockStructure.of(["A", "B"], ["A", "B"])


def test_unknown_target_raises():
    with pytest.raises(KeyError):
        build_target_state("nope", 2, 2)


@pytest.mark.parametrize("label", ["F", "S", "PSp", "PRpp_PSs", "PSp_PRss", "PRppss"])
def test_infer_structure_recovers_catalog(label):
    s = build_target_state(label, 3, 4)
    structure = infer_structure(s)
    assert fidelity(build_target_state(label, 3, 4), s) == pytest.approx(1.0)
    from hyperfuse.hyperstate import TWO_FUSION_TARGETS

    assert structure == TWO_FUSION_TARGETS[label]


def test_fidelity_ignores_global_phase():
    s = build_target_state("S", 2, 3)
    assert math.isclose(fidelity(s, s.scaled(1j)), 1.0, abs_tol=1e-12)
