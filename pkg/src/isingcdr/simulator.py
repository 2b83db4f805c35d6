"""Statevector and density-matrix simulation, shot sampling and estimators.

The density-matrix path compiles a circuit into a short program before
touching the state:

* runs of single-qubit gates on one qubit are fused into one 2x2 matrix;
* runs of CNOT / RZ / X gates are fused into one monomial (permutation times
  phase) operator;
* depolarising channels are deferred while the following gates act inside
  their support (a depolarising channel commutes with any unitary on its own
  qubits, and Pauli channels commute with each other), so the CNOT ladder of a
  folded bond collapses to a single channel of strength 1 - (1 - p)^k.

All of this is exact; it only changes the number of passes over the matrix.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .circuits import Circuit, Gate, fold_identity
from .model import CapacityError, ProductState
from .observables import ObservableSeries, parse_observable

MAX_STATEVECTOR_QUBITS = 14
MAX_DENSITY_QUBITS = 10
DEFAULT_SHOTS = 8192


@dataclass(frozen=True)
class NoiseModel:
    """Synthetic noise: per-gate depolarising channels plus readout flips.

    ``globalEps`` switches to the analytic mode where the whole circuit is
    followed by one global depolarising channel; with ``globalPerStep`` the
    channel strength composes per Trotter step, 1 - (1 - eps)^(level * nSteps).
    """

    p2: float = 0.0
    p1: float = 0.0
    readoutFlip: float = 0.0
    globalEps: float | None = None
    globalPerStep: bool = False

    def __post_init__(self) -> None:
        for name in ("p2", "p1", "readoutFlip"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.globalEps is not None:
            if not 0.0 <= self.globalEps <= 1.0:
                raise ValueError(f"globalEps must lie in [0, 1], got {self.globalEps}")
            if self.p1 or self.p2:
                raise ValueError("globalEps is exclusive with per-gate channels")

    @property
    def is_global(self) -> bool:
        return self.globalEps is not None

    @property
    def is_noiseless(self) -> bool:
        return not (self.p1 or self.p2 or self.readoutFlip or self.globalEps)

    def global_strength(self, circuit: Circuit) -> float:
        reps = circuit.meta.noiseLevel * (circuit.meta.nSteps if self.globalPerStep else 1)
        return 1.0 - (1.0 - self.globalEps) ** reps


# -- program compilation ---------------------------------------------------


def _bit(n: int, q: int) -> int:
    return n - 1 - q


def _monomial(g: Gate, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(src, phase) with (U psi)[i] = phase[i] * psi[src[i]]."""
    idx = np.arange(2**n, dtype=np.intp)
    if g.kind == "CNOT":
        c, t = (1 << _bit(n, q) for q in g.qubits)
        return np.where(idx & c, idx ^ t, idx), np.ones(2**n, dtype=complex)
    m = 1 << _bit(n, g.qubits[0])
    if g.kind == "X":
        return idx ^ m, np.ones(2**n, dtype=complex)
    half = 0.5 * g.angle
    return idx, np.where(idx & m, np.exp(1j * half), np.exp(-1j * half))


def _compose(first: tuple, second: tuple) -> tuple:
    src1, ph1 = first
    src2, ph2 = second
    return src1[src2], ph2 * ph1[src2]


def compile_program(circuit: Circuit, noise: NoiseModel | None = None) -> list[tuple]:
    """Fused op list: ("u1", bit, U), ("mono", src, phase), ("dep", bits, p)."""
    n = circuit.nQubits
    p1 = p2 = 0.0
    if noise is not None and not noise.is_global:
        p1, p2 = noise.p1, noise.p2
    program: list[list] = []
    pending: dict[frozenset, float] = {}

    def flush() -> None:
        for support in sorted(pending, key=sorted):
            keep = pending[support]
            bits = tuple(_bit(n, q) for q in sorted(support))
            program.append(["dep", bits, 1.0 - keep])
        pending.clear()

    for g in circuit.ops:
        qs = frozenset(g.qubits)
        if any(s & qs and not qs <= s for s in pending):
            flush()
        last = program[-1] if program else None
        if g.kind == "CNOT":
            mono = _monomial(g, n)
            if last is not None and last[0] == "mono":
                last[1], last[2] = _compose((last[1], last[2]), mono)
            else:
                program.append(["mono", *mono])
        elif last is not None and last[0] == "u1" and last[1] == _bit(n, g.qubits[0]):
            last[2] = g.matrix() @ last[2]
        elif last is not None and last[0] == "mono" and g.kind != "SX" and g.kind != "RX90":
            last[1], last[2] = _compose((last[1], last[2]), _monomial(g, n))
        else:
            program.append(["u1", _bit(n, g.qubits[0]), g.matrix()])
        p = p2 if g.kind == "CNOT" else p1
        if p > 0:
            pending[qs] = pending.get(qs, 1.0) * (1.0 - p)
    flush()
    return [tuple(op) for op in program]


# -- statevector -----------------------------------------------------------


def _check_size(n: int, limit: int) -> None:
    if n > limit:
        raise CapacityError(f"{n} qubits exceeds the supported maximum of {limit}")


def _apply_1q_statevector(m: np.ndarray, q: int, psi: np.ndarray, n: int) -> np.ndarray:
    t = np.tensordot(m, psi.reshape((2,) * n), axes=([1], [q]))
    return np.moveaxis(t, 0, q).reshape(-1)


def apply_gate_statevector(g: Gate, psi: np.ndarray, n: int) -> np.ndarray:
    """Gate-by-gate reference application (no fusion)."""
    if g.kind != "CNOT":
        return _apply_1q_statevector(g.matrix(), g.qubits[0], psi, n)
    c, tq = g.qubits
    t = psi.reshape((2,) * n).copy()
    sl = [slice(None)] * n
    sl[c] = 1
    axis = tq - (1 if tq > c else 0)
    t[tuple(sl)] = np.flip(t[tuple(sl)], axis=axis)
    return t.reshape(-1)


def apply_circuit_statevector(circuit: Circuit, psi: np.ndarray) -> np.ndarray:
    n = circuit.nQubits
    for g in circuit.ops:
        psi = apply_gate_statevector(g, psi, n)
    return psi


def _run_program_statevector(program: Iterable[tuple], psi: np.ndarray, n: int) -> np.ndarray:
    for op in program:
        if op[0] == "u1":
            bit, u = op[1], op[2]
            v = psi.reshape(-1, 2, 1 << bit)
            psi = np.einsum("ab,ibj->iaj", u, v).reshape(-1)
        elif op[0] == "mono":
            psi = op[2] * psi[op[1]]
    return psi


def run_exact(circuit: Circuit, initial: ProductState) -> np.ndarray:
    """Z-basis probabilities of the noiseless output state."""
    n = circuit.nQubits
    _check_size(n, MAX_STATEVECTOR_QUBITS)
    if initial.L != n:
        raise ValueError("initial state and circuit sizes differ")
    psi = _run_program_statevector(compile_program(circuit), initial.statevector(), n)
    probs = np.abs(psi) ** 2
    return probs / probs.sum()


# -- density matrix --------------------------------------------------------


def _initial_density(initial: ProductState) -> np.ndarray:
    dim = 2**initial.L
    rho = np.zeros((dim, dim), dtype=complex)
    rho[initial.index, initial.index] = 1.0
    return rho


def _run_program_density(program: Iterable[tuple], rho: np.ndarray) -> np.ndarray:
    k = kernels.impl
    scratch = np.empty_like(rho)
    for op in program:
        kind = op[0]
        if kind == "u1":
            k.dm_apply_1q(rho, np.ascontiguousarray(op[2]), op[1])
        elif kind == "mono":
            k.dm_apply_monomial(rho, op[1], op[2], scratch)
            rho, scratch = scratch, rho
        elif len(op[1]) == 1:
            k.dm_depolarize_1q(rho, op[1][0], op[2])
        else:
            k.dm_depolarize_2q(rho, op[1][0], op[1][1], op[2])
    return rho


def apply_readout_flips(probs: np.ndarray, flip: float) -> np.ndarray:
    """Independent classical bit flips on every measured qubit."""
    if flip == 0:
        return probs
    n = int(np.log2(probs.shape[-1]))
    lead = probs.shape[:-1]
    t = probs.reshape(lead + (2,) * n)
    for ax in range(len(lead), len(lead) + n):
        t = (1.0 - flip) * t + flip * np.flip(t, axis=ax)
    return t.reshape(probs.shape)


def _finish(rho: np.ndarray, noise: NoiseModel) -> np.ndarray:
    probs = np.clip(np.real(np.diagonal(rho)).copy(), 0.0, None)
    probs /= probs.sum()
    return apply_readout_flips(probs, noise.readoutFlip)


def run_density_matrix(circuit: Circuit, initial: ProductState, noise: NoiseModel) -> np.ndarray:
    """Final density matrix under per-gate channels (no readout)."""
    _check_size(circuit.nQubits, MAX_DENSITY_QUBITS)
    if initial.L != circuit.nQubits:
        raise ValueError("initial state and circuit sizes differ")
    return _run_program_density(compile_program(circuit, noise), _initial_density(initial))


def run_noisy(circuit: Circuit, initial: ProductState, noise: NoiseModel) -> np.ndarray:
    """Z-basis probabilities under ``noise`` (readout flips included)."""
    if noise.is_global:
        eps = noise.global_strength(circuit)
        probs = (1.0 - eps) * run_exact(circuit, initial) + eps / 2**circuit.nQubits
        return apply_readout_flips(probs, noise.readoutFlip)
    return _finish(run_density_matrix(circuit, initial, noise), noise)


def _common_prefix(circuits: Sequence[Circuit]) -> int:
    first = circuits[0].ops
    k = min(len(c.ops) for c in circuits)
    for c in circuits[1:]:
        ops = c.ops
        j = 0
        while j < k and ops[j] == first[j]:
            j += 1
        k = j
    return k


def run_noisy_many(
    circuits: Sequence[Circuit], initial: ProductState, noise: NoiseModel
) -> np.ndarray:
    """``run_noisy`` over many circuits, sharing the evolution of their common prefix."""
    if not circuits:
        return np.zeros((0, 2**initial.L))
    if noise.is_global or len(circuits) == 1:
        return np.stack([run_noisy(c, initial, noise) for c in circuits])
    n = circuits[0].nQubits
    _check_size(n, MAX_DENSITY_QUBITS)
    k = _common_prefix(circuits)
    head = Circuit(n, circuits[0].ops[:k], circuits[0].meta)
    rho0 = _run_program_density(compile_program(head, noise), _initial_density(initial))
    out = []
    for c in circuits:
        tail = Circuit(n, c.ops[k:], c.meta)
        rho = _run_program_density(compile_program(tail, noise), rho0.copy())
        out.append(_finish(rho, noise))
    return np.stack(out)


# -- trajectory oracle -----------------------------------------------------

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.diag([1.0 + 0j, -1.0]),
)


def sample_trajectories(
    circuit: Circuit, initial: ProductState, noise: NoiseModel, trajectories: int, seed: int
) -> np.ndarray:
    """Monte Carlo Pauli-trajectory estimate of ``run_noisy`` (cross-check only)."""
    if noise.is_global:
        raise ValueError("trajectory sampling covers per-gate channels only")
    rng = np.random.default_rng(seed)
    n = circuit.nQubits
    acc = np.zeros(2**n)
    for _ in range(trajectories):
        psi = initial.statevector()
        for g in circuit.ops:
            psi = apply_gate_statevector(g, psi, n)
            p = noise.p2 if g.kind == "CNOT" else noise.p1
            if p > 0 and rng.random() < p:
                for q in g.qubits:
                    psi = _apply_1q_statevector(_PAULIS[rng.integers(4)], q, psi, n)
        acc += np.abs(psi) ** 2
    return apply_readout_flips(acc / trajectories, noise.readoutFlip)


# -- shots and estimators --------------------------------------------------


@dataclass
class CountsTable:
    counts: dict[str, int]
    shots: int
    seed: int | None = None

    def __post_init__(self) -> None:
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to the shot total")
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be non-negative")

    @property
    def L(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def probabilities(self, L: int | None = None) -> np.ndarray:
        L = self.L if L is None else L
        out = np.zeros(2**L)
        for bits, c in self.counts.items():
            out[int(bits, 2)] = c
        return out / self.shots

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bitstring", "count"])
        for bits in sorted(self.counts):
            w.writerow([bits, self.counts[bits]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, seed: int | None = None) -> "CountsTable":
        rows = list(csv.reader(io.StringIO(text)))[1:]
        counts = {r[0]: int(r[1]) for r in rows if r}
        return cls(counts, sum(counts.values()), seed)


def sample_counts(distribution: np.ndarray, shots: int = DEFAULT_SHOTS, seed: int | None = None) -> CountsTable:
    """Multinomial Z-basis sample of ``shots`` measurements."""
    p = np.asarray(distribution, dtype=float)
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-8:
        raise ValueError("distribution must be non-negative and sum to 1")
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    L = int(round(np.log2(p.size)))
    if 2**L != p.size:
        raise ValueError("distribution length is not a power of two")
    draws = np.random.default_rng(seed).multinomial(shots, p)
    nz = np.flatnonzero(draws)
    return CountsTable({format(int(i), f"0{L}b"): int(draws[i]) for i in nz}, int(shots), seed)


def distribution_to_json(probs: np.ndarray) -> str:
    return json.dumps([float(x) for x in probs])


def _require(counts: CountsTable) -> None:
    if counts.shots <= 0 or not counts.counts:
        raise ValueError("empty counts table")


def estimate(counts: CountsTable, oid: str) -> float:
    _require(counts)
    return float(parse_observable(oid, counts.L).expectation(counts.probabilities()))


def estimate_magnetization(counts: CountsTable, site: int) -> float:
    return estimate(counts, f"Z{site}")


def estimate_zz(counts: CountsTable, i: int, j: int) -> float:
    return estimate(counts, f"ZZ{i},{j}")


def estimate_kink_density(counts: CountsTable, site: int, postselectTwoKink: bool = False) -> float:
    return estimate(counts, f"kink{site}" + (":2k" if postselectTwoKink else ""))


def connected_correlation(zz: float, mi: float, mj: float) -> float:
    return zz - mi * mj


# -- pipeline backend ------------------------------------------------------


@dataclass
class Backend:
    """Bundles the initial state, noise and shot budget used by a pipeline."""

    initial: ProductState
    noise: NoiseModel = field(default_factory=NoiseModel)
    shots: int | None = DEFAULT_SHOTS

    def exact(self, circuits: Sequence[Circuit]) -> np.ndarray:
        return np.stack([run_exact(c, self.initial) for c in circuits])

    def noisy(self, circuits: Sequence[Circuit], level: int = 1) -> np.ndarray:
        folded = [fold_identity(c, level) for c in circuits]
        return run_noisy_many(folded, self.initial, self.noise)

    def measure(self, distribution: np.ndarray, seed: int | None) -> np.ndarray:
        """Empirical distribution from ``shots`` samples (exact when shots is None)."""
        if self.shots is None:
            return np.asarray(distribution, dtype=float)
        return sample_counts(distribution, self.shots, seed).probabilities(self.initial.L)


def series_from_distributions(
    times: Sequence[float], probs: np.ndarray, oid: str, provenance: str
) -> ObservableSeries:
    obs = parse_observable(oid, int(np.log2(probs.shape[-1])))
    vals = obs.expectation(probs)
    return ObservableSeries(list(map(float, times)), [float(v) for v in np.atleast_1d(vals)], oid, provenance)
