"""Ising chain parameters, product states and the exact-diagonalisation oracle.

Conventions used throughout the package:

* sites are 1-based in user-facing ids (``"Z5"``) and 0-based internally;
* the leftmost character of a bitstring is site 1, ``0`` is spin up;
* site ``q`` (0-based) lives on bit ``L - 1 - q`` of a basis-state index;
* open boundary, ``L - 1`` nearest-neighbour couplings; times in units of 1/J.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_DENSE_SITES = 14


class CapacityError(ValueError):
    """Raised when a dense construction would exceed the supported size."""


@dataclass(frozen=True)
class ModelParams:
    """Couplings of H = -J [sum Z_i Z_{i+1} + hX sum X_i + hZ sum Z_i]."""

    J: float = 1.0
    hX: float = 0.5
    hZ: float = 0.9
    L: int = 9

    def __post_init__(self) -> None:
        if self.L < 1:
            raise ValueError(f"chain length must be >= 1, got {self.L}")
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if self.hX < 0 or self.hZ < 0:
            raise ValueError("field strengths must be non-negative")

    def with_fields(self, hX: float | None = None, hZ: float | None = None) -> "ModelParams":
        return ModelParams(self.J, self.hX if hX is None else hX, self.hZ if hZ is None else hZ, self.L)


@dataclass(frozen=True)
class ProductState:
    """Z-basis product state; ``spins[q]`` is 0 for up and 1 for down."""

    spins: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(s not in (0, 1) for s in self.spins):
            raise ValueError("spins must be 0 (up) or 1 (down)")

    @property
    def L(self) -> int:
        return len(self.spins)

    @property
    def bitstring(self) -> str:
        return "".join(str(s) for s in self.spins)

    @property
    def index(self) -> int:
        """Basis-state index with site 1 as the most significant bit."""
        return int(self.bitstring, 2) if self.spins else 0

    @classmethod
    def from_bitstring(cls, bits: str) -> "ProductState":
        return cls(tuple(int(c) for c in bits))

    @classmethod
    def from_arrows(cls, arrows: str) -> "ProductState":
        """Parse ``"uuuudu"``-style or arrow strings."""
        table = {"u": 0, "↑": 0, "0": 0, "d": 1, "↓": 1, "1": 1}
        return cls(tuple(table[c] for c in arrows))

    @classmethod
    def all_up(cls, L: int) -> "ProductState":
        return cls((0,) * L)

    @classmethod
    def domain_wall(cls, L: int, i: int) -> "ProductState":
        """Single kink: sites 1..i up, the rest down."""
        if not 0 <= i <= L:
            raise ValueError("domain-wall position out of range")
        return cls((0,) * i + (1,) * (L - i))

    @classmethod
    def kink_pair(cls, L: int, i: int, n: int) -> "ProductState":
        """Two kinks enclosing ``n`` down spins on sites i+1..i+n.

        With L=9, ``kink_pair(9, 4, 1)`` is ``uuuuduuuu`` and
        ``kink_pair(9, 4, 2)`` is ``uuuudduuu``.
        """
        if n < 0 or i < 0 or i + n > L:
            raise ValueError(f"kink pair (i={i}, n={n}) does not fit in L={L}")
        return cls((0,) * i + (1,) * n + (0,) * (L - i - n))

    def flipped(self) -> "ProductState":
        return ProductState(tuple(1 - s for s in self.spins))

    def mirrored(self) -> "ProductState":
        return ProductState(self.spins[::-1])

    def statevector(self) -> np.ndarray:
        psi = np.zeros(2**self.L, dtype=complex)
        psi[self.index] = 1.0
        return psi


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    nSteps: int

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.nSteps < 0:
            raise ValueError("nSteps must be >= 0")

    @property
    def t(self) -> float:
        return self.dt * self.nSteps

    def times(self) -> np.ndarray:
        """Sample times 0, dt, ..., nSteps*dt."""
        return self.dt * np.arange(self.nSteps + 1)


def z_signs(L: int) -> np.ndarray:
    """Array ``s[q, b]`` with the eigenvalue of Z_q on basis state ``b``."""
    idx = np.arange(2**L)
    shifts = L - 1 - np.arange(L)
    bits = (idx[None, :] >> shifts[:, None]) & 1
    return 1.0 - 2.0 * bits


def build_hamiltonian(params: ModelParams) -> np.ndarray:
    """Dense Hamiltonian matrix of the open transverse-longitudinal Ising chain."""
    L = params.L
    if L > MAX_DENSE_SITES:
        raise CapacityError(f"dense Hamiltonian limited to L <= {MAX_DENSE_SITES}, got {L}")
    dim = 2**L
    s = z_signs(L)
    diag = params.hZ * s.sum(axis=0)
    for q in range(L - 1):
        diag = diag + s[q] * s[q + 1]
    H = np.diag(-params.J * diag).astype(complex)
    idx = np.arange(dim)
    for q in range(L):
        H[idx ^ (1 << (L - 1 - q)), idx] += -params.J * params.hX
    return H


@dataclass(frozen=True)
class Spectrum:
    energies: np.ndarray
    vectors: np.ndarray


def diagonalize(params: ModelParams) -> Spectrum:
    w, v = np.linalg.eigh(build_hamiltonian(params))
    return Spectrum(w, v)


def evolve_states(
    params: ModelParams,
    initial: ProductState,
    times: Sequence[float],
    spectrum: Spectrum | None = None,
) -> np.ndarray:
    """Exact states e^{-iHt}|psi0> for each requested time, shape (T, 2^L)."""
    if initial.L != params.L:
        raise ValueError("initial state length differs from chain length")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    spec = spectrum or diagonalize(params)
    coeffs = spec.vectors.conj().T @ initial.statevector()
    phases = np.exp(-1j * np.outer(times, spec.energies))
    return (phases * coeffs[None, :]) @ spec.vectors.T


def exact_probabilities(
    params: ModelParams, initial: ProductState, times: Sequence[float]
) -> np.ndarray:
    """Z-basis probabilities of the exactly evolved state, shape (T, 2^L)."""
    return np.abs(evolve_states(params, initial, times)) ** 2


def exact_evolve(
    params: ModelParams,
    initial: ProductState,
    times: Sequence[float],
    observables: Sequence[str] = (),
) -> dict:
    """Exact expectation values of Z-diagonal observables along the quench.

    Returns a mapping ``observable id -> ObservableSeries``.
    """
    from .observables import ObservableSeries, parse_observable

    probs = exact_probabilities(params, initial, times)
    out = {}
    for oid in observables:
        obs = parse_observable(oid, params.L)
        out[oid] = ObservableSeries(
            times=list(map(float, times)),
            values=[float(v) for v in obs.expectation(probs)],
            observableId=oid,
            provenance="exact",
        )
    return out
