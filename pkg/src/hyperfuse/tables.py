"""Reference coincidence tables and the frozen lookup data derived from them.

``REFERENCE_TWO_FUSION`` is a literal transcription of the reference
two-fusion feed-forward table: for each probe class, groups of detector
pairs with the correction listed for the group.  ``TWO_FUSION_ERRATA``
lists the entries that disagree with an exact simulation of the circuit,
and ``TWO_FUSION_FEEDFORWARD`` is the frozen lookup table actually used.
"""

from __future__ import annotations

from types import MappingProxyType

# Correction names: "ZP_A" is the polarization Z on Alice's spectators,
# "ZS_B" the spatial Z on Bob's, and so on.


def _pairs(text: str) -> tuple[tuple[str, ...], ...]:
    out = []
    for chunk in text.split(";"):
        ids = tuple(sorted(chunk.split(), key=lambda d: int(d[1:])))
        out.append(ids)
    return tuple(out)


# class -> list of (patterns, correction set) exactly as listed.
REFERENCE_TWO_FUSION: dict[int, list[tuple[tuple[tuple[str, ...], ...], frozenset[str]]]] = {
    0: [
        (_pairs("D23 D23; D23 D24; D24 D24; D23 D22; D23 D21; D21 D23; D22 D22; D22 D21; D21 D21"), frozenset()),
    ],
    1: [
        (_pairs("D23 D23; D24 D24; D22 D22"), frozenset()),
        (_pairs("D21 D21; D22 D23; D21 D24"), frozenset({"ZP_A"})),
    ],
    2: [
        (_pairs("D23 D23; D23 D24; D24 D24; D22 D22; D21 D22; D21 D21"), frozenset()),
    ],
    3: [
        (_pairs("D12 D23; D11 D23; D12 D24; D11 D24; D14 D22; D13 D21; D14 D21"), frozenset()),
        (
            _pairs("D13 D23; D14 D23; D13 D24; D14 D24; D12 D22; D11 D22; D12 D21; D11 D21; D13 D22"),
            frozenset({"ZS_A"}),
        ),
    ],
    4: [
        (_pairs("D12 D23; D11 D24; D13 D22; D14 D21"), frozenset()),
        (_pairs("D11 D23; D12 D24; D14 D22; D13 D21"), frozenset({"ZP_A", "ZS_A"})),
        (_pairs("D13 D23; D14 D24; D12 D22; D11 D21"), frozenset({"ZP_A"})),
        (_pairs("D14 D23; D13 D24; D11 D22; D12 D21"), frozenset({"ZS_A"})),
    ],
    5: [
        (_pairs("D12 D23; D11 D23; D12 D24; D11 D24; D13 D22; D14 D22; D13 D21; D14 D21"), frozenset()),
        (_pairs("D13 D23; D14 D23; D13 D24; D14 D24; D12 D22; D11 D22; D12 D21; D11 D21"), frozenset({"ZP_B"})),
    ],
    6: [
        (_pairs("D12 D12; D11 D12; D11 D11; D13 D13; D13 D14; D14 D14"), frozenset()),
    ],
    7: [
        (_pairs("D11 D11; D12 D12; D13 D13; D14 D14"), frozenset()),
        (_pairs("D12 D13; D11 D14"), frozenset({"ZP_A"})),
    ],
    8: [
        (_pairs("D12 D12; D11 D12; D11 D11; D13 D13; D13 D14; D14 D14"), frozenset()),
    ],
}

# Reference entries contradicted by exact simulation, with the reason.
TWO_FUSION_ERRATA: dict[tuple[int, tuple[str, ...]], str] = {
    (0, ("D22", "D23")): "unreachable: both photons leave one BS output (two-photon bunching)",
    (0, ("D21", "D23")): "unreachable: both photons leave one BS output (two-photon bunching)",
    (1, ("D21", "D21")): "needs no correction; the listed Z^P_Alice flips the W branch",
    (3, ("D13", "D22")): "needs no correction; the listed Z^S_Alice flips the W branch",
    (5, "*"): "group needs a spatial Z; the listed polarization Z on Bob leaves a sign error",
}

# Frozen two-fusion lookup: class -> {sorted detector pattern: corrections}.
# Generated once from the calibrated circuit and checked against the
# reference table (modulo TWO_FUSION_ERRATA) by the test suite.
_TWO_FUSION_FEEDFORWARD: dict[int, dict[tuple[str, str], frozenset[str]]] = {
    0: {
        ('D21', 'D21'): frozenset(),
        ('D21', 'D22'): frozenset(),
        ('D22', 'D22'): frozenset(),
        ('D23', 'D23'): frozenset(),
        ('D23', 'D24'): frozenset(),
        ('D24', 'D24'): frozenset(),
    },
    1: {
        ('D21', 'D21'): frozenset(),
        ('D21', 'D24'): frozenset({'ZP_A'}),
        ('D22', 'D22'): frozenset(),
        ('D22', 'D23'): frozenset({'ZP_A'}),
        ('D23', 'D23'): frozenset(),
        ('D24', 'D24'): frozenset(),
    },
    2: {
        ('D21', 'D21'): frozenset(),
        ('D21', 'D22'): frozenset(),
        ('D22', 'D22'): frozenset(),
        ('D23', 'D23'): frozenset(),
        ('D23', 'D24'): frozenset(),
        ('D24', 'D24'): frozenset(),
    },
    3: {
        ('D11', 'D21'): frozenset({'ZS_A'}),
        ('D11', 'D22'): frozenset({'ZS_A'}),
        ('D11', 'D23'): frozenset(),
        ('D11', 'D24'): frozenset(),
        ('D12', 'D21'): frozenset({'ZS_A'}),
        ('D12', 'D22'): frozenset({'ZS_A'}),
        ('D12', 'D23'): frozenset(),
        ('D12', 'D24'): frozenset(),
        ('D13', 'D21'): frozenset(),
        ('D13', 'D22'): frozenset(),
        ('D13', 'D23'): frozenset({'ZS_A'}),
        ('D13', 'D24'): frozenset({'ZS_A'}),
        ('D14', 'D21'): frozenset(),
        ('D14', 'D22'): frozenset(),
        ('D14', 'D23'): frozenset({'ZS_A'}),
        ('D14', 'D24'): frozenset({'ZS_A'}),
    },
    4: {
        ('D11', 'D21'): frozenset({'ZP_A'}),
        ('D11', 'D22'): frozenset({'ZS_A'}),
        ('D11', 'D23'): frozenset({'ZP_A', 'ZS_A'}),
        ('D11', 'D24'): frozenset(),
        ('D12', 'D21'): frozenset({'ZS_A'}),
        ('D12', 'D22'): frozenset({'ZP_A'}),
        ('D12', 'D23'): frozenset(),
        ('D12', 'D24'): frozenset({'ZP_A', 'ZS_A'}),
        ('D13', 'D21'): frozenset({'ZP_A', 'ZS_A'}),
        ('D13', 'D22'): frozenset(),
        ('D13', 'D23'): frozenset({'ZP_A'}),
        ('D13', 'D24'): frozenset({'ZS_A'}),
        ('D14', 'D21'): frozenset(),
        ('D14', 'D22'): frozenset({'ZP_A', 'ZS_A'}),
        ('D14', 'D23'): frozenset({'ZS_A'}),
        ('D14', 'D24'): frozenset({'ZP_A'}),
    },
    5: {
        ('D11', 'D21'): frozenset({'ZS_B'}),
        ('D11', 'D22'): frozenset({'ZS_B'}),
        ('D11', 'D23'): frozenset(),
        ('D11', 'D24'): frozenset(),
        ('D12', 'D21'): frozenset({'ZS_B'}),
        ('D12', 'D22'): frozenset({'ZS_B'}),
        ('D12', 'D23'): frozenset(),
        ('D12', 'D24'): frozenset(),
        ('D13', 'D21'): frozenset(),
        ('D13', 'D22'): frozenset(),
        ('D13', 'D23'): frozenset({'ZS_B'}),
        ('D13', 'D24'): frozenset({'ZS_B'}),
        ('D14', 'D21'): frozenset(),
        ('D14', 'D22'): frozenset(),
        ('D14', 'D23'): frozenset({'ZS_B'}),
        ('D14', 'D24'): frozenset({'ZS_B'}),
    },
    6: {
        ('D11', 'D11'): frozenset(),
        ('D11', 'D12'): frozenset(),
        ('D12', 'D12'): frozenset(),
        ('D13', 'D13'): frozenset(),
        ('D13', 'D14'): frozenset(),
        ('D14', 'D14'): frozenset(),
    },
    7: {
        ('D11', 'D11'): frozenset(),
        ('D11', 'D14'): frozenset({'ZP_A'}),
        ('D12', 'D12'): frozenset(),
        ('D12', 'D13'): frozenset({'ZP_A'}),
        ('D13', 'D13'): frozenset(),
        ('D14', 'D14'): frozenset(),
    },
    8: {
        ('D11', 'D11'): frozenset(),
        ('D11', 'D12'): frozenset(),
        ('D12', 'D12'): frozenset(),
        ('D13', 'D13'): frozenset(),
        ('D13', 'D14'): frozenset(),
        ('D14', 'D14'): frozenset(),
    },
}


def _freeze(table):
    return MappingProxyType({k: MappingProxyType(dict(v)) for k, v in table.items()})


TWO_FUSION_FEEDFORWARD = _freeze(_TWO_FUSION_FEEDFORWARD)

# Three-fusion Kerr taps.  For each probe, each party's fusion photon is
# kicked by (f10, f01, f11) when it carries (polarization excitation only,
# spatial excitation only, both); the ground mode is untapped.  The bias
# is the probe's reference phase.
THREE_FUSION_TAPS: tuple[dict[str, tuple[int, int, int]], ...] = (
    {"A": (2, -3, -1), "B": (2, -3, -1), "C": (2, 11, -1)},
    {"A": (6, -8, -10), "B": (-2, -8, -2), "C": (-2, -8, -2)},
    {"A": (1, -1, 0), "B": (1, -1, 0), "C": (1, -1, -2)},
)
THREE_FUSION_BIAS: tuple[int, int, int] = (-6, 6, 1)


def THREE_FUSION_TAPS_KEY() -> tuple:
    """Hashable snapshot of the tap table, used as a cache key."""
    return (
        tuple(tuple(sorted(d.items())) for d in THREE_FUSION_TAPS),
        tuple(THREE_FUSION_BIAS),
    )


# Reference three-fusion outcome list: label -> (absolute probe-index
# tuples, probability numerator as a function of (n, m, t)).  The
# denominator is always (n m t)^2.  Signed third-probe variants are folded.
REFERENCE_THREE_FUSION: dict[str, tuple[frozenset[tuple[int, int, int]], object]] = {
    "F": (frozenset({(6, 6, 1)}), lambda n, m, t: 1),
    "S": (frozenset({(7, 4, 0), (7, 4, 1), (7, 4, 2)}), lambda n, m, t: (n + m + t - 3) ** 2),
    "PSs": (frozenset({(9, 5, 0)}), lambda n, m, t: n + m - 2),
    "PSs_PRs": (frozenset({(12, 4, 0)}), lambda n, m, t: (n + m - 2) * (t - 1)),
    "PRppp_PSs": (frozenset({(3, 2, 0)}), lambda n, m, t: (n - 1) * (m - 1) * (t - 1) * (n + m - 2)),
    "PRppp_PSs_PRs": (
        frozenset({(6, 1, 0)}),
        lambda n, m, t: (n - 1) * (m - 1) * (t - 1) ** 2 * (n + m - 2),
    ),
    "PSp_PRss": (frozenset({(10, 3, 2)}), lambda n, m, t: (n + m - 2) * (m - 1) * (t - 1)),
    "PSp_PRsss": (frozenset({(12, 2, 1)}), lambda n, m, t: (n + m - 2) * (n - 1) * (m - 1) * (t - 1)),
    "PSp_PRps": (frozenset({(5, 3, 2)}), lambda n, m, t: (n + m - 2) * (t - 1) * (m - 1)),
    "PSp_PRpss": (frozenset({(8, 2, 1)}), lambda n, m, t: (n + m - 2) * (t - 1) * (n - 1) * (m - 1)),
    "PSp_PRpss_bc": (frozenset({(8, 2, 2)}), lambda n, m, t: (n + m - 2) * (t - 1) ** 2 * (m - 1)),
}


def feedforward_table_to_json(table=None) -> dict:
    """JSON-ready form: ``{"4": {"D12,D23": [], ...}, ...}``."""
    table = TWO_FUSION_FEEDFORWARD if table is None else table
    return {
        str(k): {",".join(p): sorted(codes) for p, codes in sorted(v.items())}
        for k, v in sorted(table.items())
    }


def feedforward_table_from_json(data: dict):
    """Inverse of :func:`feedforward_table_to_json`."""
    return _freeze(
        {
            int(k): {tuple(p.split(",")): frozenset(codes) for p, codes in v.items()}
            for k, v in data.items()
        }
    )
