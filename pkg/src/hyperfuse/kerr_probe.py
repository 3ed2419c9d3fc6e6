"""Cross-Kerr probe registers, homodyne class projection and error model.

Each coherent probe is tracked by an integer phase index ``k``: a photon
passing a Kerr tap of strength ``delta_k`` multiplies the probe by
``exp(i delta_k theta)``.  An X-quadrature measurement resolves
``alpha cos(k theta)`` and therefore only ``|k|``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .hyperstate import BasisKet, Polarization, State, StateError

NORM_TOL = 1e-10


@dataclass(frozen=True)
class KerrTap:
    """Conditional phase kick on one probe.

    ``modes`` lists ``(port, pol)`` pairs; a ``None`` polarization matches
    both polarizations of the port.
    """

    probe_id: int
    modes: frozenset[tuple[str, Polarization | None]]
    delta_k: int

    def __post_init__(self) -> None:
        if self.probe_id < 1:
            raise ValueError("probe ids start at 1")
        object.__setattr__(
            self,
            "modes",
            frozenset((p, None if q is None else Polarization(q)) for p, q in self.modes),
        )

    @classmethod
    def on(cls, probe_id: int, delta_k: int, *modes: str | tuple[str, str | None]) -> "KerrTap":
        """Shorthand: ``KerrTap.on(1, +3, ("b0", "H"), "a0")``."""
        norm = [(m, None) if isinstance(m, str) else (m[0], m[1]) for m in modes]
        return cls(probe_id, frozenset(norm), delta_k)

    def selector(self, port: str, pol: Polarization) -> bool:
        return (port, pol) in self.modes or (port, None) in self.modes

    def count(self, ket: BasisKet) -> int:
        return sum(c for p, q, c in ket.modes if self.selector(p, q))

    def to_record(self) -> dict:
        modes = sorted([p, None if q is None else q.value] for p, q in self.modes)
        return {"kind": "Kerr", "probe_id": self.probe_id, "modes": modes, "delta_k": self.delta_k}

    @classmethod
    def from_record(cls, rec: Mapping) -> "KerrTap":
        return cls(int(rec["probe_id"]), frozenset(tuple(m) for m in rec["modes"]), int(rec["delta_k"]))


def _bump(probe: Sequence[int], probe_id: int, delta: int) -> tuple[int, ...]:
    ks = list(probe) + [0] * max(0, probe_id - len(probe))
    ks[probe_id - 1] += delta
    return tuple(ks)


def apply_kerr_tap(s: State, tap: KerrTap) -> State:
    """Add ``delta_k`` times the matched photon number to the probe index."""

    def kick(ket: BasisKet) -> BasisKet:
        n = tap.count(ket)
        return ket.with_probe(_bump(ket.probe, tap.probe_id, tap.delta_k * n)) if n else ket

    return s.map_kets(kick)


def bias_probe(s: State, probe_id: int, delta: int) -> State:
    """Shift a probe index on every ket, i.e. a fixed reference phase."""
    return s.map_kets(lambda k: k.with_probe(_bump(k.probe, probe_id, delta)))


@dataclass(frozen=True, order=True)
class OutcomeClass:
    """Homodyne result: the tuple of absolute probe indices."""

    k_abs: tuple[int, ...]

    @property
    def value(self) -> int | tuple[int, ...]:
        return self.k_abs[0] if len(self.k_abs) == 1 else self.k_abs

    def __str__(self) -> str:
        return str(self.k_abs[0]) if len(self.k_abs) == 1 else "(" + ",".join(map(str, self.k_abs)) + ")"


@dataclass(frozen=True)
class Branch:
    """One homodyne class: renormalized state, its probability and raw state."""

    state: State
    probability: float
    raw: State


PhaseHook = Callable[[OutcomeClass, tuple[int, ...]], complex]


def homodyne_project(
    s: State,
    probe_ids: int | Sequence[int] | None = None,
    phase_hook: PhaseHook | None = None,
) -> dict[OutcomeClass, Branch]:
    """Split a normalized state by the absolute indices of some probes.

    ``probe_ids`` defaults to every probe register present.  Measured
    indices are removed from the returned kets.  ``phase_hook`` may return
    an extra phase per (class, signed indices) pair; by default none is
    applied.
    """
    if abs(s.norm() - 1.0) > NORM_TOL:
        raise StateError(f"homodyne projection needs a normalized state (norm {s.norm():.3g})")
    width = max((len(k.probe) for k, _ in s), default=0)
    if probe_ids is None:
        ids = list(range(1, width + 1))
    elif isinstance(probe_ids, int):
        ids = [probe_ids]
    else:
        ids = list(probe_ids)
    width = max([width, *ids]) if ids else width
    keep = [i for i in range(1, width + 1) if i not in ids]
    groups: dict[OutcomeClass, list[tuple[BasisKet, complex]]] = defaultdict(list)
    for ket, amp in s:
        ks = tuple(ket.probe) + (0,) * (width - len(ket.probe))
        signed = tuple(ks[i - 1] for i in ids)
        cls = OutcomeClass(tuple(abs(k) for k in signed))
        if phase_hook is not None:
            amp = amp * phase_hook(cls, signed)
        rest = tuple(ks[i - 1] for i in keep)
        groups[cls].append((ket.with_probe(rest), amp))
    out = {}
    for cls in sorted(groups):
        raw = State(groups[cls], s.tol)
        p = raw.norm_squared()
        if p == 0.0:
            continue
        out[cls] = Branch(raw.normalize(), p, raw)
    return out


# Error model ----------------------------------------------------------------


@dataclass(frozen=True)
class HomodyneModel:
    alpha: float
    theta: float
    gamma_t: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if not 0 < self.theta < math.pi / 2:
            raise ValueError("theta must lie in (0, pi/2)")
        if self.gamma_t < 0:
            raise ValueError("gamma_t must be non-negative")


def homodyne_success_prob(model: HomodyneModel, n_probes: int = 1) -> float:
    """Probability that every probe's class is read out correctly.

    The single-probe value is ``1 - erfc(x)/2`` with
    ``x = exp(-gamma_t/2) alpha (1 - cos theta) / sqrt(2)``; independent
    probes multiply.
    """
    if n_probes not in (1, 3):
        raise ValueError("n_probes must be 1 or 3")
    x = math.exp(-model.gamma_t / 2.0) * model.alpha * (1.0 - math.cos(model.theta)) / math.sqrt(2.0)
    p1 = 1.0 - 0.5 * math.erfc(x)
    return p1**n_probes


def peak_center(alpha: float, k: int, theta: float) -> float:
    return 2.0 * alpha * math.cos(k * theta)


def peak_gap(alpha: float, theta: float, k1: int, k2: int) -> float:
    return abs(peak_center(alpha, k1, theta) - peak_center(alpha, k2, theta))


def gaussian_curve(x, alpha: float, k: int, theta: float):
    """Homodyne distribution for class ``k``; accepts scalars or arrays."""
    c = peak_center(alpha, k, theta)
    val = (2.0 * math.pi) ** -0.25 * np.exp(-0.25 * (np.asarray(x, dtype=float) - c) ** 2)
    return float(val) if np.ndim(val) == 0 else val


def discrimination_error(alpha: float, theta: float, k1: int, k2: int) -> float:
    """Overlap error between two neighbouring class distributions."""
    if k1 == k2:
        raise ValueError("classes must differ")
    return 0.5 * math.erfc(peak_gap(alpha, theta, k1, k2) / (2.0 * math.sqrt(2.0)))


def curve_rows(alpha: float, theta: float, ks: Sequence[int], xs: Iterable[float]) -> list[list[float]]:
    """Rows ``[x, f_k1(x), f_k2(x), ...]`` for plotting."""
    xs = np.asarray(list(xs), dtype=float)
    cols = [gaussian_curve(xs, alpha, k, theta) for k in ks]
    return [[float(x), *(float(c[i]) for c in cols)] for i, x in enumerate(xs)]


def success_rows(
    alphas: Iterable[float], theta: float, gamma_t: float, n_probes: int
) -> list[list[float]]:
    return [
        [float(a), homodyne_success_prob(HomodyneModel(float(a), theta, gamma_t), n_probes)]
        for a in alphas
    ]
