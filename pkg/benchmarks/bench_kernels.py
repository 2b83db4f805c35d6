"""Compare the compiled density-matrix kernels with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 6 8 9 10] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from isingcdr import kernels, simulator
from isingcdr.circuits import fold_identity, trotter_circuit
from isingcdr.model import ModelParams, ProductState, TimeGrid
from isingcdr.simulator import NoiseModel


def _random_density(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def kernel_cases(mod, n: int, rng: np.random.Generator) -> dict[str, callable]:
    rho = _random_density(n, rng)
    out = np.empty_like(rho)
    u = np.ascontiguousarray(np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0])
    src = rng.permutation(2**n).astype(np.intp)
    phase = np.exp(1j * rng.uniform(0, 2 * np.pi, 2**n))
    mid = n // 2
    return {
        "dm_apply_1q": lambda: [mod.dm_apply_1q(rho, u, b) for b in range(n)],
        "dm_apply_monomial": lambda: mod.dm_apply_monomial(rho, src, phase, out),
        "dm_depolarize_1q": lambda: [mod.dm_depolarize_1q(rho, b, 0.01) for b in range(n)],
        "dm_depolarize_2q": lambda: mod.dm_depolarize_2q(rho, mid, mid - 1, 0.01),
    }


def best_of(fn, repeat: int) -> float:
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def pipeline_time(mod, repeat: int) -> float:
    """One noisy L=9 run of a 2-step circuit folded to level 3."""
    circuit = fold_identity(trotter_circuit(ModelParams(hX=0.5, hZ=0.9, L=9), TimeGrid(0.5, 2)), 3)
    init = ProductState.all_up(9)
    noise = NoiseModel(p2=0.01, readoutFlip=0.02)
    saved = kernels.impl
    simulator.kernels.impl = mod
    try:
        return best_of(lambda: simulator.run_noisy(circuit, init, noise), repeat)
    finally:
        simulator.kernels.impl = saved


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[6, 8, 9, 10])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled core not built; only the numpy fallback is available")
    names = sorted(backends)
    print(f"{'kernel':<20}{'qubits':>7}" + "".join(f"{b + ' ms':>14}" for b in names) + f"{'speedup':>10}")
    for n in args.sizes:
        for kernel in kernels.KERNEL_NAMES:
            times = {}
            for b in names:
                case = kernel_cases(backends[b], n, np.random.default_rng(n))[kernel]
                times[b] = best_of(case, args.repeat)
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{kernel:<20}{n:>7}" + "".join(f"{1e3 * times[b]:>14.4f}" for b in names) + f"{speed:>9.1f}x")
    times = {b: pipeline_time(backends[b], args.repeat) for b in names}
    speed = times["python"] / times["cython"] if "cython" in times else float("nan")
    print(f"{'run_noisy L=9 c=3':<20}{9:>7}" + "".join(f"{1e3 * times[b]:>14.2f}" for b in names) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
