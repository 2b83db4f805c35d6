"""Z-diagonal observables addressed by short string ids.

Ids use 1-based sites:

``Z5``         magnetisation of site 5
``ZZ3,5``      two-point product Z_3 Z_5
``kink4``      kink density (1 - Z_4 Z_5) / 2
``kink4:2k``   kink density restricted to bitstrings with exactly two kinks
``C3,5``       connected correlation, combined from ``ZZ3,5``, ``Z3`` and ``Z5``
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import z_signs


class EmptyPostselectionError(ValueError):
    """Post-selection left no probability mass."""


_PATTERNS = {
    "Z": re.compile(r"^Z(\d+)$"),
    "ZZ": re.compile(r"^ZZ(\d+),(\d+)$"),
    "kink": re.compile(r"^kink(\d+)(:2k)?$"),
    "C": re.compile(r"^C(\d+),(\d+)$"),
}


@lru_cache(maxsize=None)
def _signs(L: int) -> np.ndarray:
    s = z_signs(L)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=None)
def two_kink_mask(L: int) -> np.ndarray:
    """Boolean mask of basis states with exactly two domain walls."""
    s = _signs(L)
    walls = (s[:-1] != s[1:]).sum(axis=0)
    m = walls == 2
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class Observable:
    oid: str
    kind: str
    sites: tuple[int, ...]
    L: int
    postselect: bool = False

    @property
    def diagonal(self) -> np.ndarray:
        s = _signs(self.L)
        if self.kind == "Z":
            return s[self.sites[0]]
        if self.kind == "ZZ":
            return s[self.sites[0]] * s[self.sites[1]]
        i = self.sites[0]
        return 0.5 * (1.0 - s[i] * s[i + 1])

    @property
    def trace_term(self) -> float:
        """tr(O)/d, the value O takes on the maximally mixed state."""
        if self.kind == "ZZ" and self.sites[0] == self.sites[1]:
            return 1.0
        return 0.5 if self.kind == "kink" else 0.0

    @property
    def bounds(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.kind == "kink" else (-1.0, 1.0)

    def expectation(self, probs: np.ndarray) -> np.ndarray | float:
        """Expectation under Z-basis probabilities; accepts stacked rows."""
        probs = np.asarray(probs, dtype=float)
        d = self.diagonal
        if self.postselect:
            mask = two_kink_mask(self.L)
            norm = probs[..., mask].sum(axis=-1)
            if np.any(norm <= 0):
                raise EmptyPostselectionError(f"no two-kink weight for {self.oid}")
            val = probs[..., mask] @ d[mask] / norm
        else:
            val = probs @ d
        return float(val) if np.ndim(val) == 0 else val


def parse_observable(oid: str, L: int) -> Observable:
    for kind, pat in _PATTERNS.items():
        m = pat.match(oid)
        if not m:
            continue
        if kind == "C":
            raise ValueError(f"{oid} is a composite observable; use components()")
        sites = tuple(int(g) - 1 for g in m.groups() if g and g != ":2k")
        limit = L - 1 if kind == "kink" else L
        if any(s < 0 or s >= limit for s in sites):
            raise ValueError(f"observable {oid} out of range for L={L}")
        return Observable(oid, kind, sites, L, postselect=bool(kind == "kink" and m.group(2)))
    raise ValueError(f"cannot parse observable id {oid!r}")


def components(oid: str) -> tuple[str, ...]:
    """Primitive ids needed to evaluate ``oid``."""
    m = _PATTERNS["C"].match(oid)
    if m:
        i, j = m.groups()
        return (f"ZZ{i},{j}", f"Z{i}", f"Z{j}")
    return (oid,)


def combine(oid: str, values: dict[str, np.ndarray]) -> np.ndarray:
    """Evaluate ``oid`` from (separately mitigated) component values."""
    parts = components(oid)
    if len(parts) == 1:
        return np.asarray(values[oid])
    zz, zi, zj = (np.asarray(values[p]) for p in parts)
    return zz - zi * zj


@dataclass
class ObservableSeries:
    times: list[float]
    values: list[float]
    observableId: str
    provenance: str

    def __post_init__(self) -> None:
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.times, dtype=float), np.asarray(self.values, dtype=float)
