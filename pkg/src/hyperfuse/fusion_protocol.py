"""Two- and three-party fusion pipelines with exact branch enumeration.

Both pipelines follow the same shape: build the product of hyper-W inputs,
imprint photon-number-dependent phases on coherent probes, split by the
absolute probe indices, interfere the fusion photons so that detection
erases which-party information, expand over detector coincidences, apply
the feed-forward correction and compare with the expected output.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import tables
from .hyperstate import (
    BasisKet,
    BlockStructure,
    Dof,
    Party,
    Polarization,
    SpectatorConfig,
    State,
    StateError,
    apply_spectator_z,
    build_structured_state,
    build_target_state,
    fidelity,
    infer_structure,
    make_hyper_w,
    target_catalog,
    tensor_all,
)
from .kerr_probe import (
    Branch,
    HomodyneModel,
    KerrTap,
    OutcomeClass,
    homodyne_project,
)
from .optics import (
    BsParams,
    ElementKind,
    OpticalElement,
    PbsParams,
    apply_element,
    bs,
    hwp,
    pbs,
)

H, V = Polarization.H, Polarization.V
A, B, C = Party.ALICE, Party.BOB, Party.CHARLIE
FID_TOL = 1e-10


class LookupMiss(LookupError):
    """A (class, pattern) pair the feed-forward table does not cover."""


# Feed-forward -----------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Correction:
    party: Party
    dof: Dof

    @property
    def code(self) -> str:
        return f"Z{self.dof.value}_{self.party.value}"

    @classmethod
    def parse(cls, code: str) -> "Correction":
        head, party = code.split("_")
        return cls(Party(party), Dof(head[1]))

    def __str__(self) -> str:
        return f"Z^{self.dof.value}_{self.party.title}"


FeedForward = frozenset[Correction]


def feedforward_from_codes(codes: Iterable[str]) -> FeedForward:
    return frozenset(Correction.parse(c) for c in codes)


def format_feedforward(ff: FeedForward) -> str:
    return ",".join(str(c) for c in sorted(ff)) or "None"


def apply_feedforward(s: State, ff: FeedForward) -> State:
    for c in sorted(ff):
        s = apply_spectator_z(s, c.party, c.dof)
    return s


# Configuration and reports ------------------------------------------------------


@dataclass(frozen=True)
class ProtocolConfig:
    """Sizes of the input states and optional element imperfections.

    ``pbs`` and ``bs`` map element names to parameters; missing names are
    ideal.  Two-fusion names are PBS1, PBS2, BS1 and BS2.  Three-fusion
    names are BS_A, BS_B and BS_C.
    """

    n: int
    m: int
    t: int | None = None
    pbs: Mapping[str, PbsParams] = field(default_factory=dict)
    bs: Mapping[str, BsParams] = field(default_factory=dict)
    homodyne: HomodyneModel | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        for v in (self.n, self.m) + ((self.t,) if self.t is not None else ()):
            if not isinstance(v, int) or isinstance(v, bool) or v < 2:
                raise ValueError(f"state sizes must be integers >= 2, got {v!r}")

    @property
    def three(self) -> bool:
        return self.t is not None

    @property
    def sizes(self) -> dict[Party, int]:
        out = {A: self.n, B: self.m}
        if self.t is not None:
            out[C] = self.t
        return out

    @classmethod
    def uniform(
        cls,
        n: int,
        m: int,
        t: int | None = None,
        pbs: PbsParams | None = None,
        bs: BsParams | None = None,
        **kw,
    ) -> "ProtocolConfig":
        """Config with the same imperfection on every PBS and every BS."""
        pbs_names = () if t is not None else ("PBS1", "PBS2")
        bs_names = ("BS_A", "BS_B", "BS_C") if t is not None else ("BS1", "BS2")
        return cls(
            n,
            m,
            t,
            {k: pbs for k in pbs_names} if pbs else {},
            {k: bs for k in bs_names} if bs else {},
            **kw,
        )


DetectorPattern = tuple[str, ...]


def sort_pattern(ids: Iterable[str]) -> DetectorPattern:
    return tuple(sorted(ids, key=lambda d: int(d[1:])))


@dataclass(frozen=True)
class FusionReport:
    scheme: int
    n: int
    m: int
    t: int | None
    cls: OutcomeClass
    pattern: DetectorPattern
    feedforward: FeedForward
    out_state: State
    probability: float
    label: str
    target: str
    fidelity: float

    def to_record(self) -> dict:
        return {
            "scheme": self.scheme,
            "n": self.n,
            "m": self.m,
            "t": self.t,
            "class": self.cls.value if self.scheme == 2 else list(self.cls.k_abs),
            "pattern": list(self.pattern),
            "feedforward": sorted(c.code for c in self.feedforward),
            "label": self.label,
            "target": self.target,
            "probability": self.probability,
            "fidelity": self.fidelity,
        }


# Shared stages -------------------------------------------------------------------


def input_state(cfg: ProtocolConfig) -> State:
    return tensor_all(make_hyper_w(k, p) for p, k in cfg.sizes.items())


def run_elements(s: State, elements: Iterable[OpticalElement]) -> State:
    for e in elements:
        s = apply_element(s, e)
    return s


def kerr(tap: KerrTap) -> OpticalElement:
    return OpticalElement(ElementKind.KERR, (), (), None, tap.to_record())


def probe_bias(probe_id: int, delta: int) -> OpticalElement:
    """Reference phase on a probe."""
    return OpticalElement(ElementKind.BIAS, (), (), None, {"probe_id": probe_id, "delta_k": delta})


def detector_expand(s: State, detectors: Mapping[tuple[str, Polarization], str]) -> dict[DetectorPattern, State]:
    """Group a post-optics state by detector coincidence.

    Returns the unnormalized spectator state per pattern.  Each ket's
    amplitude already carries the bosonic ``sqrt(n!)`` of its occupations,
    so squared norms are pattern probabilities.
    """
    groups: dict[DetectorPattern, list[tuple[BasisKet, complex]]] = {}
    for ket, amp in s:
        ids = []
        for port, pol, count in ket.modes:
            det = detectors.get((port, pol))
            if det is None:
                raise StateError(f"photon in undetected mode {port}.{pol.value}")
            ids.extend([det] * count)
        pattern = sort_pattern(ids)
        groups.setdefault(pattern, []).append((BasisKet._unchecked(ket.spectators, (), ket.probe), amp))
    return {p: State(terms, s.tol) for p, terms in sorted(groups.items(), key=lambda kv: _pattern_key(kv[0]))}


def _pattern_key(p: DetectorPattern) -> tuple[int, ...]:
    return tuple(int(d[1:]) for d in p)


def _structure_label(s: State, sizes: Mapping[Party, int], three: bool) -> tuple[str, State | None]:
    structure = infer_structure(s)
    if structure is None:
        return "unstructured", None
    spect = {p: k - 1 for p, k in sizes.items()}
    for label, entry in target_catalog(three).items():
        if entry == structure:
            ref = build_structured_state(spect, entry)
            return label, ref
    return structure.label(), build_structured_state(spect, structure)


def classify_outcome(out_state: State, n: int, m: int, t: int | None = None) -> str:
    """Catalog label of a corrected output, or a structural description.

    Structural labels read like ``P(AB)S(A)(B)``: parentheses group the
    parties that share one W excitation in that degree of freedom.
    """
    sizes = {A: n, B: m} | ({C: t} if t is not None else {})
    label, ref = _structure_label(out_state, sizes, t is not None)
    if ref is None or fidelity(ref, out_state) < 1 - FID_TOL:
        return "unstructured"
    return label


# Two-fusion ------------------------------------------------------------------------

TWO_FUSION_CLASS_LABELS = {
    0: "F",
    1: "PSp",
    2: "PRpp",
    3: "PSs",
    4: "S",
    5: "PRpp_PSs",
    6: "PRss",
    7: "PSp_PRss",
    8: "PRppss",
}

# Detector id for each (BS output port, polarization after the HWP).
TWO_FUSION_DETECTORS: dict[tuple[str, Polarization], str] = {
    ("u1", V): "D11",
    ("u1", H): "D12",
    ("l1", H): "D13",
    ("l1", V): "D14",
    ("l2", V): "D21",
    ("l2", H): "D22",
    ("u2", H): "D23",
    ("u2", V): "D24",
}

# Reference phase that makes every two-fusion class index non-negative.
TWO_FUSION_PROBE_BIAS = 4


def two_fusion_front(cfg: ProtocolConfig) -> list[OpticalElement]:
    """Mixing PBSs and Kerr taps up to the homodyne measurement.

    PBS1 mixes the port-0 arms and PBS2 the port-1 arms.  The output ``x'``
    collects V from Alice's arm and H from Bob's arm, so ``a_i'`` and
    ``b_i'`` each carry one photon exactly when the parties disagree in
    polarization.  The taps then give every input configuration the index
    ``#H + 3 * #(port 0) - 4`` summed over the two fusion photons.
    """
    p1 = cfg.pbs.get("PBS1")
    p2 = cfg.pbs.get("PBS2")
    return [
        pbs("b0", "a0", "a0'", "b0'", p1),
        pbs("b1", "a1", "a1'", "b1'", p2),
        # Whole-arm taps.
        kerr(KerrTap.on(1, +1, "a0'")),
        kerr(KerrTap.on(1, -1, "a1'")),
        # Polarization-resolved taps, each between a split/recombine PBS pair.
        kerr(KerrTap.on(1, +1, ("a0'", "V"))),
        kerr(KerrTap.on(1, -1, ("a1'", "H"))),
        kerr(KerrTap.on(1, +3, ("b0'", "H"))),
        kerr(KerrTap.on(1, -3, ("b1'", "V"))),
        probe_bias(1, TWO_FUSION_PROBE_BIAS),
    ]


def two_fusion_back(cfg: ProtocolConfig) -> list[OpticalElement]:
    """Interference and polarization erasure before detection."""
    return [
        bs("a0'", "b0'", "u1", "l1", cfg.bs.get("BS1")),
        bs("a1'", "b1'", "u2", "l2", cfg.bs.get("BS2")),
        hwp("u1"),
        hwp("l1"),
        hwp("u2"),
        hwp("l2"),
    ]


def two_fusion_circuit(cfg: ProtocolConfig) -> list[OpticalElement]:
    return two_fusion_front(cfg) + two_fusion_back(cfg)


def two_fusion_branches(cfg: ProtocolConfig) -> dict[OutcomeClass, Branch]:
    """Homodyne-conditioned states before the interference stage."""
    if cfg.three:
        raise ValueError("two-fusion config must not set t")
    return homodyne_project(run_elements(input_state(cfg), two_fusion_front(cfg)))


def _lookup_two(cls: OutcomeClass, pattern: DetectorPattern, table) -> FeedForward:
    k = cls.k_abs[0]
    table = tables.TWO_FUSION_FEEDFORWARD if table is None else table
    try:
        codes = table[k][tuple(pattern)]
    except KeyError:
        raise LookupMiss(f"pattern {pattern} unreachable in class {k}") from None
    return feedforward_from_codes(codes)


# Three-fusion ------------------------------------------------------------------------

THREE_PARTIES = (A, B, C)


def three_fusion_detector(party: Party, bs_out: int, pol: Polarization) -> str:
    """Detector id: four per party, numbered 1-4, 5-8 and 9-12."""
    local = {(0, H): 1, (0, V): 2, (1, V): 3, (1, H): 4}[(bs_out, pol)]
    return f"D{4 * THREE_PARTIES.index(party) + local}"


THREE_FUSION_DETECTORS: dict[tuple[str, Polarization], str] = {
    (f"{p.port_prefix}{'ul'[o]}", q): three_fusion_detector(p, o, q)
    for p in THREE_PARTIES
    for o in (0, 1)
    for q in (H, V)
}

# Local readout bits (spatial, polarization) of each detector within a party.
_DETECTOR_BITS = {1: (0, 0), 2: (0, 1), 3: (1, 1), 4: (1, 0)}


def three_fusion_taps() -> list[KerrTap]:
    """Kerr taps realising ``tables.THREE_FUSION_TAPS``.

    A party's fusion photon sits in one of four input modes, one per
    (polarization excited, spatial excited) setting.  Each probe kicks each
    mode by the tabulated amount; the ground mode (V in port 1) is never
    tapped.
    """
    taps = []
    for j, per_party in enumerate(tables.THREE_FUSION_TAPS, start=1):
        for party in THREE_PARTIES:
            for (p_exc, s_exc), delta in zip(((1, 0), (0, 1), (1, 1)), per_party[party.value]):
                if delta:
                    mode = (party.port(0 if s_exc else 1), "H" if p_exc else "V")
                    taps.append(KerrTap.on(j, delta, mode))
    return taps


def three_fusion_front(cfg: ProtocolConfig) -> list[OpticalElement]:
    out = [kerr(t) for t in three_fusion_taps()]
    out += [probe_bias(j, c) for j, c in enumerate(tables.THREE_FUSION_BIAS, start=1) if c]
    return out


def three_fusion_back(cfg: ProtocolConfig) -> list[OpticalElement]:
    """Polarization then spatial Hadamard on each party's own photon."""
    out = []
    for p in THREE_PARTIES:
        x0, x1 = p.port(0), p.port(1)
        out += [hwp(x0), hwp(x1)]
        out.append(bs(x0, x1, f"{p.port_prefix}u", f"{p.port_prefix}l", cfg.bs.get(f"BS_{p.value}")))
    return out


def three_fusion_circuit(cfg: ProtocolConfig) -> list[OpticalElement]:
    return three_fusion_front(cfg) + three_fusion_back(cfg)


def three_fusion_branches(cfg: ProtocolConfig) -> dict[OutcomeClass, Branch]:
    if not cfg.three:
        raise ValueError("three-fusion config needs t")
    return homodyne_project(run_elements(input_state(cfg), three_fusion_front(cfg)))


Config = tuple[frozenset[Party], frozenset[Party]]


def _all_configs() -> list[Config]:
    subsets = [frozenset(s) for r in range(4) for s in itertools.combinations(THREE_PARTIES, r)]
    return [(x, y) for x in subsets for y in subsets]


def config_indices(config: Config) -> tuple[int, ...]:
    """Signed probe indices of one excitation configuration.

    ``config`` is (parties with polarization excited, parties with spatial
    excited).  Every index is additive over parties.
    """
    pol, spat = config
    out = []
    for j, per_party in enumerate(tables.THREE_FUSION_TAPS):
        k = tables.THREE_FUSION_BIAS[j]
        for party in THREE_PARTIES:
            f10, f01, f11 = per_party[party.value]
            key = (party in pol, party in spat)
            k += {(False, False): 0, (True, False): f10, (False, True): f01, (True, True): f11}[key]
        out.append(k)
    return tuple(out)


def three_fusion_classes() -> dict[tuple[int, ...], tuple[Config, ...]]:
    """Configurations falling into each absolute probe-index class."""
    return dict(_three_fusion_classes(tables.THREE_FUSION_TAPS_KEY()))


@functools.lru_cache(maxsize=4)
def _three_fusion_classes(_key) -> tuple:
    out: dict[tuple[int, ...], list[Config]] = {}
    for cfg in _all_configs():
        key = tuple(abs(k) for k in config_indices(cfg))
        out.setdefault(key, []).append(cfg)
    return tuple((k, tuple(v)) for k, v in sorted(out.items()))


@functools.lru_cache(maxsize=256)
def _trivial_sets(configs: tuple[Config, ...]) -> list[frozenset[Correction]]:
    """Correction sets acting as a global sign on every listed configuration."""
    all_corr = [Correction(p, d) for p in THREE_PARTIES for d in Dof]
    out = []
    for r in range(len(all_corr) + 1):
        for subset in itertools.combinations(all_corr, r):
            parities = {
                sum(1 for c in subset if c.party in (cfg[0] if c.dof is Dof.P else cfg[1])) % 2
                for cfg in configs
            }
            if len(parities) == 1:
                out.append(frozenset(subset))
    return out


def _lookup_three(cls: OutcomeClass, pattern: DetectorPattern) -> FeedForward:
    configs = three_fusion_classes().get(cls.k_abs)
    if configs is None:
        raise LookupMiss(f"class {cls} is not produced by the three-fusion taps")
    if len(pattern) != 3:
        raise LookupMiss(f"pattern {pattern} does not have three clicks")
    raw = set()
    seen = set()
    for det in pattern:
        idx = int(det[1:])
        party = THREE_PARTIES[(idx - 1) // 4]
        if party in seen:
            raise LookupMiss(f"pattern {pattern} has two clicks for {party.title}")
        seen.add(party)
        s_bit, p_bit = _DETECTOR_BITS[(idx - 1) % 4 + 1]
        if p_bit:
            raw.add(Correction(party, Dof.P))
        if s_bit:
            raw.add(Correction(party, Dof.S))
    raw = frozenset(raw)
    candidates = [raw ^ t for t in _trivial_sets(configs)]
    return min(candidates, key=lambda ff: (len(ff), sorted(ff)))


def class_reference_state(configs: Sequence[Config], sizes: Mapping[Party, int]) -> State:
    """Expected spectator state for a set of merged configurations.

    Each configuration contributes the product of W states (excited
    parties) and ground states with its input-state weight; signs are all
    positive, which is what an ideal feed-forward restores.
    """
    total: dict[BasisKet, complex] = {}
    for pol, spat in configs:
        structure = BlockStructure(
            tuple(frozenset([p]) for p in sorted(pol)), tuple(frozenset([p]) for p in sorted(spat))
        )
        part = build_structured_state({p: k - 1 for p, k in sizes.items()}, structure)
        weight = 1.0
        for p, k in sizes.items():
            weight *= math.sqrt(k - 1) ** ((p in pol) + (p in spat)) / k
        for ket, amp in part:
            total[ket] = total.get(ket, 0) + weight * amp
    return State(total).normalize()


# Public entry points ---------------------------------------------------------------


def lookup_feedforward(
    cls: OutcomeClass | int | Sequence[int],
    pattern: Iterable[str],
    scheme: int | str,
    table: Mapping | None = None,
) -> FeedForward:
    """Corrections for a (class, detector pattern) pair.

    Two-fusion uses the frozen table (or ``table`` when given).  Three-fusion
    applies the local readout rule: a polarization Z on each party whose
    detector signals the V output of its HWP, a spatial Z on each party
    whose photon left the lower BS port, reduced by products that act as a
    global sign on the class.
    """
    if isinstance(cls, int):
        cls = OutcomeClass((cls,))
    elif not isinstance(cls, OutcomeClass):
        cls = OutcomeClass(tuple(cls))
    pattern = sort_pattern(pattern)
    scheme = int(str(scheme).replace("two", "2").replace("three", "3"))
    if scheme == 2:
        return _lookup_two(cls, pattern, table)
    if scheme == 3:
        return _lookup_three(cls, pattern)
    raise ValueError(f"unknown scheme {scheme!r}")


def _reports(
    cfg: ProtocolConfig,
    branches: Mapping[OutcomeClass, Branch],
    back: list[OpticalElement],
    detectors: Mapping,
    expected,
    lookup,
    strict: bool,
) -> list[FusionReport]:
    scheme = 3 if cfg.three else 2
    reports = []
    for cls, branch in branches.items():
        target_label, target = expected(cls)
        first: tuple[State, str] | None = None
        post = run_elements(branch.state, back)
        for pattern, sub in detector_expand(post, detectors).items():
            p_pat = sub.norm_squared()
            try:
                ff = lookup(cls, pattern)
            except LookupMiss:
                if strict:
                    raise
                ff = frozenset()
            out = apply_feedforward(sub.normalize(), ff)
            # Outputs within a class usually coincide; classify each distinct one once.
            if first is not None and fidelity(first[0], out) >= 1 - FID_TOL:
                label = first[1]
            else:
                label = classify_outcome(out, cfg.n, cfg.m, cfg.t)
                first = first or (out, label)
            reports.append(
                FusionReport(
                    scheme,
                    cfg.n,
                    cfg.m,
                    cfg.t,
                    cls,
                    pattern,
                    ff,
                    out,
                    branch.probability * p_pat,
                    label,
                    target_label,
                    fidelity(target, out),
                )
            )
    return reports


def run_two_fusion(
    cfg: ProtocolConfig, table: Mapping | None = None, strict: bool = True
) -> list[FusionReport]:
    """Every (class, pattern) branch of the two-party fusion, exactly.

    With ``strict`` a pattern missing from the feed-forward table raises
    :class:`LookupMiss`; otherwise it is reported uncorrected, which is how
    imperfect elements are evaluated.
    """
    branches = two_fusion_branches(cfg)

    def expected(cls):
        label = TWO_FUSION_CLASS_LABELS[cls.k_abs[0]]
        return label, build_target_state(label, cfg.n, cfg.m)

    return _reports(
        cfg,
        branches,
        two_fusion_back(cfg),
        TWO_FUSION_DETECTORS,
        expected,
        lambda c, p: _lookup_two(c, p, table),
        strict,
    )


def config_set_label(configs: Iterable[Config]) -> str:
    """Readable name for a merged set of excitation configurations."""

    def fmt(group: frozenset[Party]) -> str:
        return "".join(sorted(p.value for p in group)) or "-"

    return "mix[" + ";".join(sorted(f"P{fmt(p)}S{fmt(s)}" for p, s in configs)) + "]"


def three_fusion_expected(cls: OutcomeClass, sizes: Mapping[Party, int]) -> tuple[str, State]:
    """Label and reference state of a three-fusion class.

    Classes whose merged configurations do not form a W block structure
    get a ``mix[...]`` label listing the configurations.
    """
    configs = three_fusion_classes().get(cls.k_abs)
    if configs is None:
        raise LookupMiss(f"class {cls} is not produced by the three-fusion taps")
    ref = class_reference_state(configs, sizes)
    label, structured = _structure_label(ref, sizes, True)
    if structured is None or fidelity(structured, ref) < 1 - FID_TOL:
        label = config_set_label(configs)
    return label, ref


def run_three_fusion(cfg: ProtocolConfig, strict: bool = True) -> list[FusionReport]:
    """Every (class, pattern) branch of the three-party fusion, exactly."""
    branches = three_fusion_branches(cfg)
    return _reports(
        cfg,
        branches,
        three_fusion_back(cfg),
        THREE_FUSION_DETECTORS,
        lambda cls: three_fusion_expected(cls, cfg.sizes),
        _lookup_three,
        strict,
    )


def run_fusion(cfg: ProtocolConfig, **kw) -> list[FusionReport]:
    return run_three_fusion(cfg, **kw) if cfg.three else run_two_fusion(cfg, **kw)


def class_totals(reports: Iterable[FusionReport]) -> dict[OutcomeClass, float]:
    out: dict[OutcomeClass, float] = {}
    for r in reports:
        out[r.cls] = out.get(r.cls, 0.0) + r.probability
    return dict(sorted(out.items()))


# Closed forms -------------------------------------------------------------------------


def closed_form_probability(quantity: str, n: int, m: int, t: int | None = None) -> float:
    """Success (``S``), failure (``F``) or partial (``PS_PR``) probability.

    The partial probability is everything that is neither success nor
    failure.  Pass ``t`` for the three-party protocol.
    """
    for v in (n, m) + ((t,) if t is not None else ()):
        if v < 2:
            raise ValueError("sizes must be >= 2")
    if t is None:
        denom = (n * m) ** 2
        s = (n + m - 2) ** 2 / denom
        f = 1 / denom
    else:
        denom = (n * m * t) ** 2
        s = (n + m + t - 3) ** 2 / denom
        f = 1 / denom
    if quantity == "S":
        return s
    if quantity == "F":
        return f
    if quantity == "PS_PR":
        return 1.0 - s - f
    raise ValueError(f"unknown quantity {quantity!r}")


# Imperfections -------------------------------------------------------------------------


def fidelity_under_imperfection(cfg: ProtocolConfig) -> dict[OutcomeClass, float]:
    """Probability-weighted squared fidelity per class against the ideal target.

    Uncovered patterns (possible once elements are imperfect) are scored
    without correction.
    """
    reports = run_fusion(cfg, strict=False)
    totals = class_totals(reports)
    out: dict[OutcomeClass, float] = {}
    for r in reports:
        out[r.cls] = out.get(r.cls, 0.0) + r.probability * r.fidelity**2
    return {k: v / totals[k] for k, v in out.items() if totals[k] > 0}
