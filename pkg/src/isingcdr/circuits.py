"""Gate-level circuits: the Trotter-step builder, CNOT folding and statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
import numpy as np

from .model import ModelParams, TimeGrid

GATE_KINDS = ("RX90", "SX", "RZ", "X", "CNOT")
CLIFFORD_TOL = 1e-12

_RX90 = np.array([[1, -1j], [-1j, 1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def is_clifford_angle(theta: float, tol: float = CLIFFORD_TOL) -> bool:
    """True when theta is a multiple of pi/2 (mod 2 pi) within ``tol``."""
    r = math.remainder(theta, math.pi / 2)
    return abs(r) <= tol


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 2 if self.kind == "CNOT" else 1
        if len(self.qubits) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")
        if self.kind == "CNOT" and self.qubits[0] == self.qubits[1]:
            raise ValueError("CNOT control and target must differ")
        if (self.kind == "RZ") != (self.angle is not None):
            raise ValueError("only RZ carries an angle")

    @property
    def is_clifford(self) -> bool:
        return self.kind != "RZ" or is_clifford_angle(self.angle)

    @property
    def is_diagonal(self) -> bool:
        return self.kind == "RZ"

    def matrix(self) -> np.ndarray:
        """Single-qubit matrix; CNOT is handled as a permutation elsewhere."""
        if self.kind == "RZ":
            return rz_matrix(self.angle)
        if self.kind in ("RX90", "SX"):
            return _RX90
        if self.kind == "X":
            return _X
        raise ValueError("CNOT has no single-qubit matrix")

    def to_line(self) -> str:
        angle = "-" if self.angle is None else repr(float(self.angle))
        return " ".join([self.kind, angle, *map(str, self.qubits)])

    @classmethod
    def from_line(cls, line: str) -> "Gate":
        kind, angle, *qubits = line.split()
        return cls(kind, tuple(int(q) for q in qubits), None if angle == "-" else float(angle))


def RZ(q: int, theta: float) -> Gate:
    return Gate("RZ", (q,), float(theta))


def SX(q: int) -> Gate:
    return Gate("SX", (q,))


def CNOT(control: int, target: int) -> Gate:
    return Gate("CNOT", (control, target))


@dataclass(frozen=True)
class CircuitMeta:
    dt: float | None = None
    nSteps: int = 0
    noiseLevel: int = 1


@dataclass(frozen=True)
class Circuit:
    nQubits: int
    ops: tuple[Gate, ...] = ()
    meta: CircuitMeta = field(default_factory=CircuitMeta)

    def __post_init__(self) -> None:
        for g in self.ops:
            if any(q < 0 or q >= self.nQubits for q in g.qubits):
                raise ValueError(f"gate {g} outside register of {self.nQubits} qubits")

    def __len__(self) -> int:
        return len(self.ops)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.nQubits != self.nQubits:
            raise ValueError("register sizes differ")
        meta = replace(self.meta, nSteps=self.meta.nSteps + other.meta.nSteps)
        return Circuit(self.nQubits, self.ops + other.ops, meta)

    def layers(self) -> list[int]:
        """ASAP layer (1-based) of every gate under per-qubit ordering."""
        front = [0] * self.nQubits
        out = []
        for g in self.ops:
            layer = 1 + max(front[q] for q in g.qubits)
            for q in g.qubits:
                front[q] = layer
            out.append(layer)
        return out

    def depth(self) -> int:
        return max(self.layers(), default=0)

    def non_clifford_indices(self) -> list[int]:
        return [k for k, g in enumerate(self.ops) if not g.is_clifford]

    def to_text(self) -> str:
        m = self.meta
        head = f"# nQubits={self.nQubits} dt={m.dt!r} nSteps={m.nSteps} noiseLevel={m.noiseLevel}"
        return "\n".join([head, *(g.to_line() for g in self.ops)]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        head = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
        dt = None if head["dt"] == "None" else float(head["dt"])
        meta = CircuitMeta(dt, int(head["nSteps"]), int(head["noiseLevel"]))
        ops = tuple(Gate.from_line(ln) for ln in lines[1:] if not ln.startswith("#"))
        return cls(int(head["nQubits"]), ops, meta)


def _bond_layers(L: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    odd = [(q, q + 1) for q in range(0, L - 1, 2)]
    even = [(q, q + 1) for q in range(1, L - 1, 2)]
    return odd, even


def trotter_step(params: ModelParams, dt: float) -> Circuit:
    """One first-order Trotter step in the native gate set.

    Every qubit gets RZ(-2J hZ dt - pi/2) SX RZ(2J hX dt + pi) SX RZ(-pi/2),
    which is exp(iJ hX dt X) exp(iJ hZ dt Z) up to phase;
    every bond (q, q+1) gets CNOT(q+1 -> q) RZ_q(-2J dt) CNOT(q+1 -> q),
    first on bonds (1,2),(3,4),... then on (2,3),(4,5),...
    """
    L = params.L
    if L < 2:
        raise ValueError("the Trotter circuit needs at least two qubits")
    J = params.J
    ops: list[Gate] = []
    for q in range(L):
        ops += [
            RZ(q, -2 * J * params.hZ * dt - math.pi / 2),
            SX(q),
            RZ(q, 2 * J * params.hX * dt + math.pi),
            SX(q),
            RZ(q, -math.pi / 2),
        ]
    for layer in _bond_layers(L):
        for a, b in layer:
            ops += [CNOT(b, a), RZ(a, -2 * J * dt), CNOT(b, a)]
    return Circuit(L, tuple(ops), CircuitMeta(dt=dt, nSteps=1, noiseLevel=1))


def trotter_circuit(params: ModelParams, grid: TimeGrid) -> Circuit:
    step = trotter_step(params, grid.dt)
    return Circuit(
        params.L,
        step.ops * grid.nSteps,
        CircuitMeta(dt=grid.dt, nSteps=grid.nSteps, noiseLevel=1),
    )


def fold_identity(circuit: Circuit, level: int) -> Circuit:
    """Replace every CNOT by ``level`` consecutive copies (``level`` odd)."""
    if level < 1 or level % 2 == 0:
        raise ValueError(f"noise level must be an odd positive integer, got {level}")
    ops: list[Gate] = []
    for g in circuit.ops:
        ops.extend([g] * level if g.kind == "CNOT" else [g])
    meta = replace(circuit.meta, noiseLevel=circuit.meta.noiseLevel * level)
    return Circuit(circuit.nQubits, tuple(ops), meta)


@dataclass(frozen=True)
class CircuitStats:
    depth: int
    cnotCount: int
    nonCliffordCount: int


def circuit_stats(circuit: Circuit) -> CircuitStats:
    return CircuitStats(
        depth=circuit.depth(),
        cnotCount=sum(g.kind == "CNOT" for g in circuit.ops),
        nonCliffordCount=sum(not g.is_clifford for g in circuit.ops),
    )


def with_replacements(circuit: Circuit, angles: dict[int, float]) -> Circuit:
    """Copy of ``circuit`` with the RZ gates at the given op indices re-angled."""
    ops = list(circuit.ops)
    for k, theta in angles.items():
        g = ops[k]
        if g.kind != "RZ":
            raise ValueError(f"op {k} is {g.kind}, not RZ")
        ops[k] = RZ(g.qubits[0], theta)
    return Circuit(circuit.nQubits, tuple(ops), circuit.meta)


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of a small circuit (reference use only)."""
    from .simulator import apply_circuit_statevector

    dim = 2**circuit.nQubits
    cols = [apply_circuit_statevector(circuit, np.eye(dim, dtype=complex)[:, k]) for k in range(dim)]
    return np.stack(cols, axis=1)


def equal_up_to_phase(a: np.ndarray, b: np.ndarray) -> float:
    """Max deviation between ``a`` and ``b`` after removing the best global phase."""
    overlap = np.vdot(b, a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(a - phase * b)))

