"""Near-Clifford training circuits and the training sets built from them.

A non-Clifford RZ(theta) is substituted by RZ(n pi/2), which is S^n up to a
global phase. Which gates are substituted, and by which n, is drawn from
Gaussian weights in the phase-invariant distance between the two gates.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import Circuit, with_replacements
from .observables import parse_observable
from .seeding import derive_int, derive_rng
from .simulator import Backend


class EmptySelectionError(ValueError):
    """The circuit has no non-Clifford gate to choose from."""


@dataclass(frozen=True)
class SubstitutionPolicy:
    sigma: float = 0.5
    fractionReplaced: float = 0.5
    nonCliffordCap: int = 50
    method: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.fractionReplaced <= 1:
            raise ValueError("fractionReplaced must lie in (0, 1]")
        if self.nonCliffordCap < 0:
            raise ValueError("nonCliffordCap must be >= 0")
        if self.method not in (1, 2):
            raise ValueError("method must be 1 or 2")

    def target(self, nonClifford: int) -> int:
        """Number of gates left non-Clifford out of ``nonClifford``."""
        keep = math.floor(nonClifford * (1 - self.fractionReplaced) + 1e-12)
        return min(keep, self.nonCliffordCap)


def gate_distance(theta: float, n: int) -> float:
    """Phase-invariant Frobenius distance between RZ(theta) and S^n."""
    d2 = 4.0 - 4.0 * abs(math.cos((theta - n * math.pi / 2) / 2))
    return math.sqrt(max(d2, 0.0))


def _closeness(theta: float, sigma: float) -> np.ndarray:
    return np.array([math.exp(-gate_distance(theta, n) ** 2 / sigma**2) for n in range(4)])


def selection_weights(circuit: Circuit, sigma: float = 0.5) -> np.ndarray:
    """Normalised substitution weight of every non-Clifford gate, in op order."""
    idx = circuit.non_clifford_indices()
    if not idx:
        raise EmptySelectionError("circuit has no non-Clifford gates")
    w = np.array([_closeness(circuit.ops[k].angle, sigma).sum() for k in idx])
    return w / w.sum()


def replacement_probabilities(theta: float, sigma: float = 0.5) -> np.ndarray:
    w = _closeness(theta, sigma)
    return w / w.sum()


def replacement_choice(theta: float, rng: np.random.Generator, sigma: float = 0.5) -> int:
    return int(rng.choice(4, p=replacement_probabilities(theta, sigma)))


def _weighted_subset(rng: np.random.Generator, weights: np.ndarray, size: int) -> np.ndarray:
    if size == 0:
        return np.zeros(0, dtype=int)
    return rng.choice(weights.size, size=size, replace=False, p=weights / weights.sum())


def _replaced_positions(circuit: Circuit, policy: SubstitutionPolicy, rng: np.random.Generator) -> list[int]:
    idx = circuit.non_clifford_indices()
    n_replace = len(idx) - policy.target(len(idx))
    weights = selection_weights(circuit, policy.sigma)
    if policy.method == 1:
        return sorted(idx[k] for k in _weighted_subset(rng, weights, n_replace))

    # method 2: substitute from the deepest layer backwards; the layer that
    # straddles the target is split at random by selection weight
    layers = circuit.layers()
    by_layer: dict[int, list[int]] = {}
    for pos, k in enumerate(idx):
        by_layer.setdefault(layers[k], []).append(pos)
    chosen: list[int] = []
    for layer in sorted(by_layer, reverse=True):
        members = by_layer[layer]
        need = n_replace - len(chosen)
        if need <= 0:
            break
        if len(members) <= need:
            chosen += members
        else:
            picks = _weighted_subset(rng, weights[members], need)
            chosen += [members[p] for p in picks]
    return sorted(idx[p] for p in chosen)


def make_training_circuit(circuit: Circuit, policy: SubstitutionPolicy, circuitId: int = 0) -> Circuit:
    """Near-Clifford copy of ``circuit``; deterministic in (policy.seed, circuitId)."""
    if not circuit.non_clifford_indices():
        return circuit
    rng = derive_rng(policy.seed, "training-circuit", circuitId)
    positions = _replaced_positions(circuit, policy, rng)
    angles = {k: replacement_choice(circuit.ops[k].angle, rng, policy.sigma) * math.pi / 2 for k in positions}
    return with_replacements(circuit, angles)


@dataclass
class TrainingRecord:
    circuitId: int
    noisyValues: np.ndarray
    exactValue: float


@dataclass
class TrainingSet:
    records: list[TrainingRecord]
    noiseLevels: tuple[int, ...]
    observableId: str
    trainingSetId: str = ""

    def __post_init__(self) -> None:
        self.noiseLevels = tuple(int(c) for c in self.noiseLevels)
        for r in self.records:
            r.noisyValues = np.asarray(r.noisyValues, dtype=float)
            if r.noisyValues.shape != (len(self.noiseLevels),):
                raise ValueError(f"record {r.circuitId} has {r.noisyValues.size} values for {len(self.noiseLevels)} levels")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def x(self) -> np.ndarray:
        """Noisy values, shape (records, levels)."""
        return np.array([r.noisyValues for r in self.records]).reshape(len(self.records), len(self.noiseLevels))

    @property
    def y(self) -> np.ndarray:
        return np.array([r.exactValue for r in self.records], dtype=float)

    def level_column(self, level: int = 1) -> np.ndarray:
        return self.x[:, self.noiseLevels.index(level)]

    def subset(self, rows: Sequence[int]) -> "TrainingSet":
        return TrainingSet([self.records[i] for i in rows], self.noiseLevels, self.observableId, self.trainingSetId)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["circuitId", "level", "noisyValue", "exactValue", "observableId"])
        for r in self.records:
            for level, v in zip(self.noiseLevels, r.noisyValues):
                w.writerow([r.circuitId, level, repr(float(v)), repr(float(r.exactValue)), self.observableId])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrainingSet":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty training-set CSV")
        levels = tuple(dict.fromkeys(int(r["level"]) for r in rows))
        oid = rows[0]["observableId"]
        grouped: dict[int, dict] = {}
        for r in rows:
            g = grouped.setdefault(int(r["circuitId"]), {"exact": float(r["exactValue"]), "noisy": {}})
            g["noisy"][int(r["level"])] = float(r["noisyValue"])
        records = [
            TrainingRecord(cid, np.array([g["noisy"][c] for c in levels]), g["exact"]) for cid, g in grouped.items()
        ]
        return cls(records, levels, oid)


def make_training_sets(
    circuit: Circuit,
    policy: SubstitutionPolicy,
    backend: Backend,
    observables: Sequence[str],
    count: int = 50,
    noiseLevels: Sequence[int] = (1, 3),
) -> dict[str, TrainingSet]:
    """One training set per observable, all sharing the same ``count`` circuits.

    Every circuit is simulated once exactly and once per noise level; the
    noisy distributions are shot-sampled once (seeded by circuit and level).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    circuits = [make_training_circuit(circuit, policy, k) for k in range(count)]
    exact = backend.exact(circuits)
    noisy = {}
    for level in noiseLevels:
        dists = backend.noisy(circuits, level)
        noisy[level] = np.stack([
            backend.measure(d, derive_int(policy.seed, "training-shots", k, level)) for k, d in enumerate(dists)
        ])
    L = circuit.nQubits
    out = {}
    for oid in observables:
        obs = parse_observable(oid, L)
        y = np.atleast_1d(obs.expectation(exact))
        x = np.stack([np.atleast_1d(obs.expectation(noisy[c])) for c in noiseLevels], axis=1)
        records = [TrainingRecord(k, x[k], float(y[k])) for k in range(count)]
        out[oid] = TrainingSet(records, tuple(noiseLevels), oid, f"seed{policy.seed}-m{policy.method}")
    return out


def make_training_set(
    circuit: Circuit,
    policy: SubstitutionPolicy,
    backend: Backend,
    observable: str,
    count: int = 50,
    noiseLevels: Sequence[int] = (1, 3),
) -> TrainingSet:
    return make_training_sets(circuit, policy, backend, [observable], count, noiseLevels)[observable]


def dispersion(ts: TrainingSet, interestNoisy: float, interestExact: float) -> float:
    """Mean Euclidean distance of the level-1 (noisy, exact) pairs from the interest point."""
    if len(ts) == 0:
        raise ValueError("empty training set")
    x = ts.level_column(1)
    return float(np.mean(np.hypot(x - interestNoisy, ts.y - interestExact)))
