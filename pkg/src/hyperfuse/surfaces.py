"""Closed-form probability grids and the CSV conventions used for output."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .fusion_protocol import closed_form_probability

QUANTITIES = ("S", "F", "PS_PR")
SIZE_LIMITS = (2, 64)


def fmt(x: float) -> str:
    """Fixed float formatting (12 significant digits) for diff-stable output."""
    return f"{x:.12g}"


@dataclass(frozen=True)
class SweepSpec:
    """Grid of input sizes for a closed-form probability surface."""

    quantity: str
    n_range: tuple[int, ...]
    m_range: tuple[int, ...]
    t_range: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.quantity not in QUANTITIES:
            raise ValueError(f"quantity must be one of {QUANTITIES}, got {self.quantity!r}")
        lo, hi = SIZE_LIMITS
        for name, rng in (("n", self.n_range), ("m", self.m_range), ("t", self.t_range or (lo,))):
            if not rng:
                raise ValueError(f"{name} range is empty")
            if any(not lo <= v <= hi for v in rng):
                raise ValueError(f"{name} range must lie within {lo}..{hi}")

    @property
    def header(self) -> list[str]:
        return ["n", "m", "t", "value"] if self.t_range else ["n", "m", "value"]


def parse_range(text: str) -> tuple[int, ...]:
    """``"2..10"`` or ``"2,4,6"`` or ``"5"`` to a tuple of integers."""
    text = text.strip()
    if ".." in text:
        lo, hi = (int(x) for x in text.split(".."))
        if hi < lo:
            raise ValueError(f"empty range {text!r}")
        return tuple(range(lo, hi + 1))
    return tuple(int(x) for x in text.split(","))


def sweep_rows(spec: SweepSpec) -> list[tuple]:
    """One row per grid point in lexicographic (n, m[, t]) order."""
    rows = []
    if spec.t_range:
        for n, m, t in itertools.product(spec.n_range, spec.m_range, spec.t_range):
            rows.append((n, m, t, closed_form_probability(spec.quantity, n, m, t)))
    else:
        for n, m in itertools.product(spec.n_range, spec.m_range):
            rows.append((n, m, closed_form_probability(spec.quantity, n, m)))
    return rows


def write_csv(header: Sequence[str], rows: Iterable[Sequence], fh: IO[str]) -> None:
    """CSV with CRLF line endings; floats use :func:`fmt`."""
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    write_csv(header, rows, buf)
    return buf.getvalue()
