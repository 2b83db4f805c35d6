from __future__ import annotations

from functools import reduce

import numpy as np
import pytest

from isingcdr.kernels import available_backends
from isingcdr.model import ModelParams

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.diag([1.0 + 0j, -1.0])


def site_op(o: np.ndarray, q: int, L: int) -> np.ndarray:
    """``o`` on site q (0-based, leftmost factor is site 0)."""
    return reduce(np.kron, [o if k == q else np.eye(2) for k in range(L)])


def kron_hamiltonian(p: ModelParams) -> np.ndarray:
    """Independent Kronecker-product construction used as an oracle."""
    L = p.L
    zz = sum((site_op(PAULI_Z, i, L) @ site_op(PAULI_Z, i + 1, L) for i in range(L - 1)), np.zeros((2**L, 2**L)))
    x = sum(site_op(PAULI_X, i, L) for i in range(L))
    z = sum(site_op(PAULI_Z, i, L) for i in range(L))
    return -p.J * (zz + p.hX * x + p.hZ * z)


@pytest.fixture(scope="session", params=sorted(available_backends()))
def kernel_module(request):
    return available_backends()[request.param]


@pytest.fixture
def fig1_params() -> ModelParams:
    return ModelParams(J=1.0, hX=0.5, hZ=0.9, L=9)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Print and keep one pass/fail line for the acceptance summary."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
