"""Sparse polarization-spatial states for hyper-W fusion.

A basis ket records three things: the logical settings of every spectator
photon (one polarization bit and one spatial bit each), the Fock occupations
of the apparatus modes that carry the fusion photons, and the integer phase
indices accumulated by the coherent probes.  A :class:`State` is an
immutable map from kets to complex amplitudes.
"""

from __future__ import annotations

import json
import functools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

PRUNE_TOL = 1e-14


class Polarization(str, Enum):
    """Photon polarization; H is logical 0 and V is logical 1."""

    H = "H"
    V = "V"

    @property
    def bit(self) -> int:
        return 0 if self is Polarization.H else 1


class SpatialBit(int, Enum):
    """Logical spatial qubit; port index 0 is logical 0."""

    ZERO = 0
    ONE = 1


class Party(str, Enum):
    ALICE = "A"
    BOB = "B"
    CHARLIE = "C"

    @property
    def port_prefix(self) -> str:
        return self.value.lower()

    def port(self, bit: int) -> str:
        """Apparatus input port carrying this party's fusion photon."""
        return f"{self.port_prefix}{bit}"

    @property
    def title(self) -> str:
        return {"A": "Alice", "B": "Bob", "C": "Charlie"}[self.value]


class Dof(str, Enum):
    """Degree of freedom addressed by a spectator correction."""

    P = "P"
    S = "S"


# Characters reserved by the canonical ket syntax.
_RESERVED = set("|,:=/. ")


class StateError(ValueError):
    """Raised for malformed states or incompatible state operations."""


class ModeCollisionError(StateError):
    pass


class UniverseMismatchError(StateError):
    pass


@dataclass(frozen=True, order=True)
class SpectatorConfig:
    """Logical settings of one party's spectator photons.

    ``pol`` is a string over ``HV`` and ``spat`` a string over ``01``, one
    character per spectator photon.
    """

    party: Party
    pol: str
    spat: str

    def __post_init__(self) -> None:
        if len(self.pol) != len(self.spat):
            raise StateError("pol and spat strings differ in length")
        if set(self.pol) - {"H", "V"} or set(self.spat) - {"0", "1"}:
            raise StateError(f"bad spectator strings {self.pol!r}/{self.spat!r}")

    @property
    def size(self) -> int:
        return len(self.pol)

    def excitations(self, dof: Dof) -> int:
        return self.pol.count("V") if dof is Dof.P else self.spat.count("1")

    def key(self) -> str:
        return f"{self.party.value}:{self.pol}/{self.spat}"

    @classmethod
    def from_key(cls, text: str) -> "SpectatorConfig":
        party, rest = text.split(":")
        pol, spat = rest.split("/")
        return cls(Party(party), pol, spat)


Mode = tuple[str, Polarization]


def _check_port(port: str) -> str:
    if not port or _RESERVED & set(port):
        raise StateError(f"invalid port label {port!r}")
    return port


@dataclass(frozen=True, eq=False)
class BasisKet:
    """One computational basis configuration.

    ``modes`` is a sorted tuple of ``(port, pol, count)`` with positive
    counts, which makes equal kets compare and hash equal.  ``probe`` holds
    the signed phase index of each probe register.
    """

    spectators: tuple[SpectatorConfig, ...] = ()
    modes: tuple[tuple[str, Polarization, int], ...] = ()
    probe: tuple[int, ...] = field(default=())

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, BasisKet):
            return NotImplemented
        return (
            hash(self) == hash(other)
            and self.modes == other.modes
            and self.probe == other.probe
            and self.spectators == other.spectators
        )

    def __lt__(self, other: "BasisKet") -> bool:
        return (self.spectators, self.modes, self.probe) < (other.spectators, other.modes, other.probe)

    def __hash__(self) -> int:
        return self._hash

    @classmethod
    def _unchecked(cls, spectators, modes, probe) -> "BasisKet":
        ket = object.__new__(cls)
        object.__setattr__(ket, "spectators", spectators)
        object.__setattr__(ket, "modes", modes)
        object.__setattr__(ket, "probe", probe)
        object.__setattr__(ket, "_hash", hash((spectators, modes, probe)))
        return ket

    def __post_init__(self) -> None:
        parties = [s.party for s in self.spectators]
        if parties != sorted(parties) or len(set(parties)) != len(parties):
            raise StateError("spectators must be sorted with unique parties")
        seen = [(p, q) for p, q, _ in self.modes]
        if seen != sorted(seen) or len(set(seen)) != len(seen):
            raise StateError("modes must be sorted and unique")
        for port, _, count in self.modes:
            _check_port(port)
            if count <= 0:
                raise StateError("mode counts must be positive")
        object.__setattr__(self, "_hash", hash((self.spectators, self.modes, self.probe)))

    @classmethod
    def build(
        cls,
        spectators: Iterable[SpectatorConfig] = (),
        occupations: Mapping[Mode, int] | Iterable[Mode] = (),
        probe: Sequence[int] = (),
    ) -> "BasisKet":
        """Build a ket from unsorted parts.

        ``occupations`` is either a mapping from mode to count or an
        iterable of modes, one entry per photon.
        """
        counts: dict[Mode, int] = defaultdict(int)
        if isinstance(occupations, Mapping):
            for mode, c in occupations.items():
                counts[(mode[0], Polarization(mode[1]))] += int(c)
        else:
            for port, pol in occupations:
                counts[(port, Polarization(pol))] += 1
        modes = tuple(sorted((p, q, c) for (p, q), c in counts.items() if c))
        for port, _, c in modes:
            _check_port(port)
            if c < 0:
                raise StateError("mode counts must be non-negative")
        spect = tuple(sorted(spectators, key=lambda s: s.party))
        if len({x.party for x in spect}) != len(spect):
            raise StateError("spectators must have unique parties")
        return cls._unchecked(spect, modes, tuple(int(k) for k in probe))

    @property
    def photon_count(self) -> int:
        return sum(c for _, _, c in self.modes)

    @property
    def parties(self) -> tuple[Party, ...]:
        return tuple(s.party for s in self.spectators)

    @property
    def ports(self) -> frozenset[str]:
        return frozenset(p for p, _, _ in self.modes)

    def occupation(self, port: str, pol: Polarization | str) -> int:
        pol = Polarization(pol)
        for p, q, c in self.modes:
            if p == port and q is pol:
                return c
        return 0

    def photons(self) -> list[Mode]:
        """Mode of each apparatus photon, repeated by occupation."""
        return [(p, q) for p, q, c in self.modes for _ in range(c)]

    def spectator(self, party: Party) -> SpectatorConfig:
        for s in self.spectators:
            if s.party is party:
                return s
        raise KeyError(party)

    def with_modes(self, modes: Mapping[Mode, int] | Iterable[Mode]) -> "BasisKet":
        return BasisKet.build(self.spectators, modes, self.probe)

    def with_probe(self, probe: Sequence[int]) -> "BasisKet":
        return BasisKet._unchecked(self.spectators, self.modes, tuple(int(k) for k in probe))

    def key(self) -> str:
        spect = ",".join(s.key() for s in self.spectators)
        modes = ",".join(f"{p}.{q.value}={c}" for p, q, c in self.modes)
        probe = ",".join(str(k) for k in self.probe)
        return f"{spect}|{modes}|{probe}"

    @classmethod
    def from_key(cls, text: str) -> "BasisKet":
        try:
            spect, modes, probe = text.split("|")
            spectators = [SpectatorConfig.from_key(s) for s in spect.split(",") if s]
            occ: dict[Mode, int] = {}
            for item in filter(None, modes.split(",")):
                mode, count = item.split("=")
                port, pol = mode.split(".")
                occ[(port, Polarization(pol))] = int(count)
            ks = [int(k) for k in probe.split(",") if k]
        except (ValueError, KeyError) as exc:
            raise StateError(f"malformed ket key {text!r}") from exc
        ket = cls.build(spectators, occ, ks)
        if ket.key() != text:
            raise StateError(f"non-canonical ket key {text!r}")
        return ket

    def __str__(self) -> str:
        return self.key()


class State:
    """Immutable sparse superposition of basis kets.

    Amplitudes with magnitude at or below ``tol`` are dropped on
    construction.
    """

    __slots__ = ("_terms", "tol", "_universe")

    def __init__(
        self,
        terms: Mapping[BasisKet, complex] | Iterable[tuple[BasisKet, complex]] = (),
        tol: float = PRUNE_TOL,
    ) -> None:
        acc: dict[BasisKet, complex] = defaultdict(complex)
        items = terms.items() if isinstance(terms, Mapping) else terms
        for ket, amp in items:
            acc[ket] += complex(amp)
        self._terms = {k: a for k, a in acc.items() if abs(a) > tol}
        self.tol = tol

    @classmethod
    def vacuum(cls) -> "State":
        return cls({BasisKet(): 1.0})

    @property
    def terms(self) -> Mapping[BasisKet, complex]:
        return MappingProxyType(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[BasisKet, complex]]:
        return iter(self._terms.items())

    def __contains__(self, ket: object) -> bool:
        return ket in self._terms

    def amplitude(self, ket: BasisKet) -> complex:
        return self._terms.get(ket, 0j)

    def norm_squared(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self._terms.values())

    def norm(self) -> float:
        return math.sqrt(self.norm_squared())

    def normalize(self) -> "State":
        nrm = self.norm()
        if nrm == 0.0:
            raise StateError("cannot normalize the zero state")
        return self.scaled(1.0 / nrm)

    def scaled(self, factor: complex) -> "State":
        return self._same_kets({k: a * factor for k, a in self._terms.items()})

    def _same_kets(self, terms: Mapping[BasisKet, complex]) -> "State":
        """New state over a subset of these kets; reuses the cached universe."""
        out = State(terms, self.tol)
        try:
            out._universe = self._universe
        except AttributeError:
            pass
        return out

    def map_kets(self, fn) -> "State":
        """Relabel every ket through ``fn``; colliding kets add coherently."""
        return State(((fn(k), a) for k, a in self._terms.items()), self.tol)

    def __add__(self, other: "State") -> "State":
        return State(list(self) + list(other), min(self.tol, other.tol))

    def __sub__(self, other: "State") -> "State":
        return self + other.scaled(-1.0)

    def __mul__(self, factor: complex) -> "State":
        return self.scaled(factor)

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, State):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(frozenset(self._terms.items()))

    def __repr__(self) -> str:
        return f"State({len(self)} terms, norm={self.norm():.6g})"

    def universe(self) -> tuple[tuple[tuple[Party, int], ...], int]:
        """Parties with their spectator counts, and the probe register width."""
        try:
            return self._universe
        except AttributeError:
            self._universe = self._compute_universe()
            return self._universe

    def _compute_universe(self) -> tuple[tuple[tuple[Party, int], ...], int]:
        sig = {(tuple((s.party, s.size) for s in k.spectators), len(k.probe)) for k in self._terms}
        if len(sig) > 1:
            raise StateError("state mixes kets from different universes")
        if not sig:
            return ((), 0)
        return sig.pop()

    def parties(self) -> tuple[Party, ...]:
        return tuple(p for p, _ in self.universe()[0])

    def apparatus_ports(self) -> frozenset[str]:
        out: set[str] = set()
        for k in self._terms:
            out |= k.ports
        return frozenset(out)

    def to_records(self) -> list[dict]:
        rows = [
            {"ket": k.key(), "re": a.real, "im": a.imag} for k, a in self._terms.items()
        ]
        return sorted(rows, key=lambda r: r["ket"])

    def dumps(self, indent: int | None = None) -> str:
        return json.dumps(self.to_records(), indent=indent)

    @classmethod
    def from_records(cls, rows: Iterable[Mapping]) -> "State":
        return cls((BasisKet.from_key(r["ket"]), complex(r["re"], r["im"])) for r in rows)

    @classmethod
    def loads(cls, text: str) -> "State":
        return cls.from_records(json.loads(text))


def _w_strings(size: int, ground: str, excited: str) -> list[str]:
    """All weight-one strings of length ``size``."""
    return [ground * i + excited + ground * (size - i - 1) for i in range(size)]


def make_hyper_w(n: int, party: Party) -> State:
    """Hyper-W state of ``n`` photons with the last photon at the apparatus.

    Each degree of freedom is a W state normalized on its own, so every one of
    the ``n**2`` product terms has amplitude ``1/n``.  In polarization the
    fusion photon is V when all spectators are H and H when the spectators
    hold the W excitation; spatially it sits in port 1 when all spectators
    are 0 and in port 0 when the spectators hold the excitation.
    """
    if not isinstance(n, int) or n < 2:
        raise StateError(f"hyper-W size must be an integer >= 2, got {n!r}")
    party = Party(party)
    k = n - 1
    amp = 1.0 / math.sqrt(n)
    pol_branches = [("H" * k, Polarization.V, amp)]
    pol_branches += [(s, Polarization.H, amp) for s in _w_strings(k, "H", "V")]
    spat_branches = [("0" * k, 1, amp)]
    spat_branches += [(s, 0, amp) for s in _w_strings(k, "0", "1")]
    terms = {}
    for (pol, fpol, a1), (spat, fport, a2) in product(pol_branches, spat_branches):
        ket = BasisKet.build(
            [SpectatorConfig(party, pol, spat)], {(party.port(fport), fpol): 1}
        )
        terms[ket] = a1 * a2
    return State(terms)


def _merge_kets(a: BasisKet, b: BasisKet) -> BasisKet:
    occ: dict[Mode, int] = {}
    for p, q, c in a.modes + b.modes:
        occ[(p, q)] = c
    return BasisKet.build(a.spectators + b.spectators, occ, a.probe + b.probe)


def tensor(a: State, b: State) -> State:
    """Tensor product of states with disjoint parties and apparatus modes."""
    pa, pb = set(a.parties()), set(b.parties())
    if pa & pb:
        raise ModeCollisionError(f"parties {sorted(p.value for p in pa & pb)} appear in both factors")
    shared = a.apparatus_ports() & b.apparatus_ports()
    if shared:
        raise ModeCollisionError(f"ports {sorted(shared)} appear in both factors")
    out = {}
    for ka, xa in a:
        for kb, xb in b:
            out[_merge_kets(ka, kb)] = xa * xb
    return State(out, min(a.tol, b.tol))


def tensor_all(states: Iterable[State]) -> State:
    acc = State.vacuum()
    for s in states:
        acc = tensor(acc, s)
    return acc


def inner_product(a: State, b: State) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    if a.universe() != b.universe() and len(a) and len(b):
        raise UniverseMismatchError(f"universes differ: {a.universe()} vs {b.universe()}")
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    total = 0j
    for ket, amp in small:
        other = large.amplitude(ket)
        if other:
            total += amp.conjugate() * other if small is a else other.conjugate() * amp
    return total


def fidelity(a: State, b: State) -> float:
    """Overlap magnitude ``|<a|b>|`` of the normalized states."""
    return abs(inner_product(a.normalize(), b.normalize()))


def apply_spectator_z(s: State, party: Party, dof: Dof | str) -> State:
    """Pauli-Z on every spectator of ``party`` in one degree of freedom."""
    party, dof = Party(party), Dof(dof)

    def sign(ket: BasisKet) -> int:
        return -1 if ket.spectator(party).excitations(dof) % 2 else 1

    return s._same_kets({k: a * sign(k) for k, a in s})


def strip_probe(s: State) -> State:
    return s.map_kets(lambda k: k.with_probe(()))


# Target construction -------------------------------------------------------

Blocks = tuple[frozenset[Party], ...]


def _blocks(spec: Iterable[Iterable[Party | str]]) -> Blocks:
    return tuple(frozenset(Party(p) for p in block) for block in spec)


@dataclass(frozen=True)
class BlockStructure:
    """Output pattern of a fusion branch.

    For each degree of freedom, every block is a set of parties whose
    spectators share one W excitation.  Parties outside every block are in
    the ground configuration.
    """

    pol: Blocks
    spat: Blocks

    @classmethod
    def of(cls, pol: Iterable[Iterable[str]], spat: Iterable[Iterable[str]]) -> "BlockStructure":
        return cls(_blocks(pol), _blocks(spat))

    def label(self) -> str:
        def fmt(blocks: Blocks) -> str:
            parts = sorted("".join(sorted(p.value for p in b)) for b in blocks)
            return "".join(f"({p})" for p in parts) or "-"

        return f"P{fmt(self.pol)}S{fmt(self.spat)}"

    def _canon(self) -> tuple:
        return (
            tuple(sorted(tuple(sorted(p.value for p in b)) for b in self.pol)),
            tuple(sorted(tuple(sorted(p.value for p in b)) for b in self.spat)),
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, BlockStructure) and self._canon() == other._canon()

    def __hash__(self) -> int:
        return hash(self._canon())


def _dof_assignments(sizes: Mapping[Party, int], blocks: Blocks, ground: str, excited: str):
    """Yield (per-party string map, amplitude) for one degree of freedom."""
    per_block = []
    for block in blocks:
        options = []
        for party in sorted(block):
            for s in _w_strings(sizes[party], ground, excited):
                options.append((party, s))
        per_block.append(options)
    amp = 1.0
    for options in per_block:
        amp /= math.sqrt(len(options))
    for choice in product(*per_block):
        strings = {p: ground * k for p, k in sizes.items()}
        for party, s in choice:
            strings[party] = s
        yield strings, amp


def build_structured_state(sizes: Mapping[Party | str, int], structure: BlockStructure) -> State:
    """Spectator-only state with the given W block structure.

    ``sizes`` maps each party to its number of surviving spectators.
    """
    key = tuple(sorted((Party(p), int(k)) for p, k in sizes.items()))
    return _structured(key, structure)


@functools.lru_cache(maxsize=512)
def _structured(key: tuple[tuple[Party, int], ...], structure: BlockStructure) -> State:
    sizes = dict(key)
    if any(k < 1 for k in sizes.values()):
        raise StateError("each party needs at least one spectator")
    for block in structure.pol + structure.spat:
        if not block or block - set(sizes):
            raise StateError(f"block {sorted(p.value for p in block)} names unknown parties")
    terms = {}
    for pol, a1 in _dof_assignments(sizes, structure.pol, "H", "V"):
        for spat, a2 in _dof_assignments(sizes, structure.spat, "0", "1"):
            ket = BasisKet.build(SpectatorConfig(p, pol[p], spat[p]) for p in sizes)
            terms[ket] = a1 * a2
    return State(terms)


_AB = ("A", "B")
TWO_FUSION_TARGETS: dict[str, BlockStructure] = {
    "F": BlockStructure.of([], []),
    "PSp": BlockStructure.of([_AB], []),
    "PRpp": BlockStructure.of(["A", "B"], []),
    "PSs": BlockStructure.of([], [_AB]),
    "S": BlockStructure.of([_AB], [_AB]),
    "PRpp_PSs": BlockStructure.of(["A", "B"], [_AB]),
    "PRss": BlockStructure.of([], ["A", "B"]),
    "PSp_PRss": BlockStructure.of([_AB], ["A", "B"]),
    "PRppss": BlockStructure.of(["A", "B"], ["A", "B"]),
}

_ABC = ("A", "B", "C")
THREE_FUSION_TARGETS: dict[str, BlockStructure] = {
    "F": BlockStructure.of([], []),
    "S": BlockStructure.of([_ABC], [_ABC]),
    "PSs": BlockStructure.of([], [_AB]),
    "PSs_PRs": BlockStructure.of([], [_AB, "C"]),
    "PRppp_PSs": BlockStructure.of(["A", "B", "C"], [_AB]),
    "PRppp_PSs_PRs": BlockStructure.of(["A", "B", "C"], [_AB, "C"]),
    "PSp_PRss": BlockStructure.of([_AB], ["B", "C"]),
    "PSp_PRsss": BlockStructure.of([_AB], ["A", "B", "C"]),
    "PSp_PRps": BlockStructure.of([_AB, "C"], ["B"]),
    "PSp_PRpss": BlockStructure.of([_AB, "C"], ["A", "B"]),
    "PSp_PRpss_bc": BlockStructure.of([_AB, "C"], ["B", "C"]),
}


def _sizes(n: int, m: int, t: int | None) -> dict[Party, int]:
    for v in (n, m) + ((t,) if t is not None else ()):
        if not isinstance(v, int) or v < 2:
            raise StateError(f"state sizes must be integers >= 2, got {v!r}")
    sizes = {Party.ALICE: n - 1, Party.BOB: m - 1}
    if t is not None:
        sizes[Party.CHARLIE] = t - 1
    return sizes


def target_catalog(three: bool) -> Mapping[str, BlockStructure]:
    return THREE_FUSION_TARGETS if three else TWO_FUSION_TARGETS


def build_target_state(kind: str, n: int, m: int, t: int | None = None) -> State:
    """Reference output state for a labelled fusion outcome.

    Two-fusion labels are used when ``t`` is None, three-fusion labels
    otherwise.
    """
    catalog = target_catalog(t is not None)
    if kind not in catalog:
        raise KeyError(f"unknown target kind {kind!r}; expected one of {sorted(catalog)}")
    return build_structured_state(_sizes(n, m, t), catalog[kind])


def infer_structure(s: State) -> BlockStructure | None:
    """Recover the W block structure of a spectator state, if it has one.

    Parties that are never excited together in any ket share a block.  The
    result is only a candidate; callers confirm it by fidelity.
    """
    if not len(s):
        return None
    parties = s.parties()
    blocks = {}
    for dof in Dof:
        excited: set[Party] = set()
        together: set[frozenset[Party]] = set()
        for ket, _ in s:
            hot = [c.party for c in ket.spectators if c.excitations(dof)]
            if any(c.excitations(dof) > 1 for c in ket.spectators):
                return None
            excited.update(hot)
            together.update(frozenset((x, y)) for x in hot for y in hot if x != y)
        # Components of the "never co-excited" graph.
        remaining = sorted(excited)
        found = []
        while remaining:
            seed = remaining.pop(0)
            block, frontier = {seed}, [seed]
            while frontier:
                x = frontier.pop()
                for y in list(remaining):
                    if frozenset((x, y)) not in together:
                        block.add(y)
                        remaining.remove(y)
                        frontier.append(y)
            found.append(frozenset(block))
        blocks[dof] = tuple(found)
    del parties
    return BlockStructure(blocks[Dof.P], blocks[Dof.S])
