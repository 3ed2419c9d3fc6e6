"""Linear-optical elements acting on apparatus mode occupations.

Every element is described by its single-photon map, a sparse matrix from
input modes ``(port, pol)`` to output modes.  Multi-photon kets are
transformed by expanding the product of creation operators, with the
usual ``sqrt(n!)`` factors for repeated modes.
"""

from __future__ import annotations

import cmath
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from itertools import product
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .hyperstate import BasisKet, Mode, Polarization, State, StateError, _check_port

H, V = Polarization.H, Polarization.V
SQRT1_2 = 1.0 / math.sqrt(2.0)


class PortError(StateError):
    """Unknown, malformed or colliding port labels."""


class ElementKind(str, Enum):
    PBS = "PBS"
    BS = "BS"
    HWP = "HWP"
    ROUTE = "Route"
    KERR = "Kerr"
    BIAS = "Bias"


@dataclass(frozen=True)
class PbsParams:
    """Mirror-mount deviation and extinction ratio of a PBS.

    ``r`` may be complex; the polarization map is normalized by
    ``1/sqrt(1 + |r|)`` which keeps it unitary for any value.
    """

    theta_dev: float = 0.0
    r: complex = 0.0

    def __post_init__(self) -> None:
        if isinstance(self.r, (int, float)) and self.r < 0:
            raise ValueError("extinction ratio must be non-negative")

    @property
    def ideal(self) -> bool:
        return self.theta_dev == 0 and self.r == 0

    def rotation(self) -> np.ndarray:
        """Columns are the images of H and V in the (H, V) basis."""
        c, s = math.cos(self.theta_dev), math.sin(self.theta_dev)
        sr = cmath.sqrt(self.r)
        src = sr.conjugate()
        norm = 1.0 / math.sqrt(1.0 + abs(self.r))
        return norm * np.array(
            [[c - sr * s, s + sr * c], [-(s + src * c), c - src * s]], dtype=complex
        )


@dataclass(frozen=True)
class BsParams:
    """Transmission-ratio imperfection of a nominally balanced BS."""

    epsilon: float = 0.0

    @property
    def ideal(self) -> bool:
        return self.epsilon == 0

    def matrix(self) -> np.ndarray:
        """Columns are the images of the two inputs over (out1, out2)."""
        e = self.epsilon
        if e == 0:
            return SQRT1_2 * np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex)
        norm = 1.0 / math.sqrt(e * e + 2 * e + 2)
        return norm * np.array([[1 + e, 1.0], [1.0, -(1 + e)]], dtype=complex)


ModeMap = dict[Mode, list[tuple[Mode, complex]]]


@dataclass(frozen=True)
class OpticalElement:
    """Immutable descriptor of one optical element.

    Port conventions: a PBS sends H at ``in1`` and V at ``in2`` to
    ``out1``, and the other two to ``out2``.  A BS sends ``in1`` to
    ``(out1 + out2)/sqrt2`` and ``in2`` to ``(out1 - out2)/sqrt2``.  An HWP
    acts on one port and may relabel it.  A route renames ports pairwise.
    """

    kind: ElementKind
    in_ports: tuple[str, ...]
    out_ports: tuple[str, ...]
    params: PbsParams | BsParams | None = None
    extra: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        kind = ElementKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "in_ports", tuple(self.in_ports))
        object.__setattr__(self, "out_ports", tuple(self.out_ports))
        for p in self.in_ports + self.out_ports:
            try:
                _check_port(p)
            except StateError as exc:
                raise PortError(str(exc)) from None
        arity = {ElementKind.PBS: 2, ElementKind.BS: 2, ElementKind.HWP: 1}
        if kind in arity:
            k = arity[kind]
            if len(self.in_ports) != k or len(self.out_ports) != k:
                raise PortError(f"{kind.value} needs {k} input and {k} output ports")
        if kind is ElementKind.ROUTE and len(self.in_ports) != len(self.out_ports):
            raise PortError("route needs matching port lists")
        if len(set(self.in_ports)) != len(self.in_ports):
            raise PortError(f"repeated input port in {self.in_ports}")
        if len(set(self.out_ports)) != len(self.out_ports):
            raise PortError(f"repeated output port in {self.out_ports}")
        if kind is ElementKind.PBS and self.params is None:
            object.__setattr__(self, "params", PbsParams())
        if kind is ElementKind.BS and self.params is None:
            object.__setattr__(self, "params", BsParams())

    def mode_map(self) -> ModeMap:
        """Single-photon action as a sparse input-to-output map."""
        kind = self.kind
        if kind is ElementKind.PBS:
            in1, in2 = self.in_ports
            out1, out2 = self.out_ports
            rot = self.params.rotation()
            # After the polarization rotation: H at in1 and V at in2 leave via out1.
            route = {(in1, H): out1, (in1, V): out2, (in2, H): out2, (in2, V): out1}
            out: ModeMap = {}
            for port in (in1, in2):
                for j, pol in enumerate((H, V)):
                    out[(port, pol)] = [
                        ((route[(port, q)], q), rot[i, j])
                        for i, q in enumerate((H, V))
                        if rot[i, j] != 0
                    ]
            return out
        if kind is ElementKind.BS:
            mat = self.params.matrix()
            out = {}
            for j, port in enumerate(self.in_ports):
                for pol in (H, V):
                    out[(port, pol)] = [
                        ((self.out_ports[i], pol), mat[i, j]) for i in range(2) if mat[i, j] != 0
                    ]
            return out
        if kind is ElementKind.HWP:
            (src,), (dst,) = self.in_ports, self.out_ports
            return {
                (src, H): [((dst, H), SQRT1_2), ((dst, V), SQRT1_2)],
                (src, V): [((dst, H), SQRT1_2), ((dst, V), -SQRT1_2)],
            }
        if kind is ElementKind.ROUTE:
            return {
                (a, pol): [((b, pol), 1.0)]
                for a, b in zip(self.in_ports, self.out_ports)
                for pol in (H, V)
            }
        raise ValueError(f"{kind.value} has no single-photon matrix")

    def matrix(self) -> tuple[np.ndarray, list[Mode], list[Mode]]:
        """Dense single-photon matrix with its row and column mode labels."""
        mmap = self.mode_map()
        cols = sorted(mmap)
        rows = sorted({m for images in mmap.values() for m, _ in images})
        index = {m: i for i, m in enumerate(rows)}
        mat = np.zeros((len(rows), len(cols)), dtype=complex)
        for j, m in enumerate(cols):
            for out, amp in mmap[m]:
                mat[index[out], j] += amp
        return mat, rows, cols

    def to_record(self) -> dict:
        rec: dict = {
            "kind": self.kind.value,
            "in_ports": list(self.in_ports),
            "out_ports": list(self.out_ports),
        }
        if isinstance(self.params, PbsParams):
            r = complex(self.params.r)
            rec["params"] = {
                "theta_dev": self.params.theta_dev,
                "r": r.real if r.imag == 0 else [r.real, r.imag],
            }
        elif isinstance(self.params, BsParams):
            rec["params"] = {"epsilon": self.params.epsilon}
        if self.extra:
            rec.update(self.extra)
        if self.kind in (ElementKind.KERR, ElementKind.BIAS):
            rec.pop("in_ports")
            rec.pop("out_ports")
        return rec


def unitarity_check(e: OpticalElement) -> float:
    """Largest deviation of the column Gram matrix from the identity."""
    mat, _, _ = e.matrix()
    gram = mat.conj().T @ mat
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def _expand(inside: Sequence[Mode], mmap: ModeMap) -> dict[tuple[Mode, ...], complex]:
    """Expand a product of creation operators into output monomials."""
    acc: dict[tuple[Mode, ...], complex] = defaultdict(complex)
    for choice in product(*(mmap[m] for m in inside)):
        coeff = 1.0 + 0j
        for _, a in choice:
            coeff *= a
        acc[tuple(sorted(m for m, _ in choice))] += coeff
    return acc


def _transform_modes(modes, mmap: ModeMap) -> list[tuple[tuple, complex]]:
    """Output occupations and coefficients for one input occupation tuple."""
    inside = tuple((p, q) for p, q, c in modes if (p, q) in mmap for _ in range(c))
    outside = Counter({(p, q): c for p, q, c in modes if (p, q) not in mmap})
    targets = {m for images in mmap.values() for m, _ in images}
    busy = [m for m in outside if m in targets]
    if busy:
        raise PortError(f"output mode {busy[0][0]}.{busy[0][1].value} is already occupied")
    in_norm = 1.0
    for c in Counter(inside).values():
        in_norm *= math.factorial(c)
    out_base = 1.0
    for c in outside.values():
        out_base *= math.factorial(c)
    result = []
    for monomial, coeff in _expand(inside, mmap).items():
        final = outside + Counter(monomial)
        fac = 1.0
        for c in final.values():
            fac *= math.factorial(c)
        new_modes = tuple(sorted((p, q, c) for (p, q), c in final.items()))
        result.append((new_modes, coeff * math.sqrt(fac / (in_norm * out_base))))
    return result


def transform(s: State, mmap: ModeMap) -> State:
    """Apply a single-photon mode map to every photon of every ket."""
    cache: dict[tuple, list] = {}
    out: dict[BasisKet, complex] = defaultdict(complex)
    for ket, amp in s:
        entry = cache.get(ket.modes)
        if entry is None:
            entry = cache[ket.modes] = _transform_modes(ket.modes, mmap)
        for new_modes, coeff in entry:
            out[BasisKet._unchecked(ket.spectators, new_modes, ket.probe)] += amp * coeff
    return State(out, s.tol)


def apply_element(s: State, e: OpticalElement) -> State:
    if e.kind is ElementKind.KERR:
        from .kerr_probe import KerrTap, apply_kerr_tap

        return apply_kerr_tap(s, KerrTap.from_record(e.extra))
    if e.kind is ElementKind.BIAS:
        from .kerr_probe import bias_probe

        return bias_probe(s, int(e.extra["probe_id"]), int(e.extra["delta_k"]))
    return transform(s, e.mode_map())


def pbs(in1: str, in2: str, out1: str, out2: str, params: PbsParams | None = None) -> OpticalElement:
    if in1 == in2:
        raise PortError("PBS inputs must differ")
    return OpticalElement(ElementKind.PBS, (in1, in2), (out1, out2), params or PbsParams())


def bs(in1: str, in2: str, out1: str, out2: str, params: BsParams | None = None) -> OpticalElement:
    if in1 == in2 or out1 == out2:
        raise PortError("BS ports collide")
    return OpticalElement(ElementKind.BS, (in1, in2), (out1, out2), params or BsParams())


def hwp(port: str, out: str | None = None) -> OpticalElement:
    return OpticalElement(ElementKind.HWP, (port,), (out or port,))


def route(mapping: Mapping[str, str]) -> OpticalElement:
    return OpticalElement(ElementKind.ROUTE, tuple(mapping), tuple(mapping.values()))


def apply_pbs(
    s: State, in1: str, in2: str, out1: str, out2: str, params: PbsParams | None = None
) -> State:
    """Polarizing beam splitter: transmits H, reflects V."""
    return apply_element(s, pbs(in1, in2, out1, out2, params))


def apply_bs(
    s: State, in1: str, in2: str, out1: str, out2: str, params: BsParams | None = None
) -> State:
    """Beam splitter acting on the spatial label only."""
    return apply_element(s, bs(in1, in2, out1, out2, params))


def apply_hwp(s: State, port: str, out: str | None = None) -> State:
    """Polarization Hadamard on every photon in ``port``."""
    return apply_element(s, hwp(port, out))


def apply_route(s: State, mapping: Mapping[str, str]) -> State:
    return apply_element(s, route(mapping))


# Circuit files --------------------------------------------------------------


def element_from_record(rec: Mapping) -> OpticalElement:
    kind = ElementKind(rec["kind"])
    params = rec.get("params") or {}
    if kind in (ElementKind.KERR, ElementKind.BIAS):
        extra = {k: rec[k] for k in ("probe_id", "modes", "delta_k") if k in rec}
        return OpticalElement(kind, (), (), None, extra)
    ins, outs = tuple(rec.get("in_ports", ())), tuple(rec.get("out_ports", ()))
    if kind is ElementKind.PBS:
        r = params.get("r", 0.0)
        if isinstance(r, (list, tuple)):
            r = complex(r[0], r[1])
        return OpticalElement(kind, ins, outs, PbsParams(float(params.get("theta_dev", 0.0)), r))
    if kind is ElementKind.BS:
        return OpticalElement(kind, ins, outs, BsParams(float(params.get("epsilon", 0.0))))
    return OpticalElement(kind, ins, outs)


def load_circuit(source: str | Path | Iterable[Mapping]) -> list[OpticalElement]:
    """Read a circuit from a JSON file path, JSON text or parsed records."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("[")):
        records = json.loads(Path(source).read_text(encoding="utf-8"))
    elif isinstance(source, str):
        records = json.loads(source)
    else:
        records = list(source)
    return [element_from_record(r) for r in records]


def dump_circuit(elements: Iterable[OpticalElement], indent: int | None = 2) -> str:
    return json.dumps([e.to_record() for e in elements], indent=indent)


def run_circuit(s: State, elements: Iterable[OpticalElement]) -> State:
    for e in elements:
        s = apply_element(s, e)
    return s
