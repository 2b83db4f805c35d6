"""Pure-numpy versions of the density-matrix kernels in ``_kernels.pyx``."""

from __future__ import annotations

import numpy as np


def _split(dim: int, bit: int) -> tuple[int, int]:
    lo = 1 << bit
    return dim // (2 * lo), lo


def dm_apply_1q(rho: np.ndarray, u: np.ndarray, bit: int) -> np.ndarray:
    dim = rho.shape[0]
    hi, lo = _split(dim, bit)
    R = rho.reshape(hi, 2, lo, hi, 2, lo)
    R[...] = np.einsum("ab,ibjkcl,dc->iajkdl", u, R, u.conj(), optimize=True)
    return rho


def dm_apply_monomial(
    rho: np.ndarray, src: np.ndarray, phase: np.ndarray, out: np.ndarray
) -> np.ndarray:
    np.multiply(rho[np.ix_(src, src)], np.outer(phase, phase.conj()), out=out)
    return out


def dm_depolarize_1q(rho: np.ndarray, bit: int, p: float) -> np.ndarray:
    dim = rho.shape[0]
    hi, lo = _split(dim, bit)
    R = rho.reshape(hi, 2, lo, hi, 2, lo)
    reduced = R[:, 0, :, :, 0, :] + R[:, 1, :, :, 1, :]
    R *= 1.0 - p
    R[:, 0, :, :, 0, :] += 0.5 * p * reduced
    R[:, 1, :, :, 1, :] += 0.5 * p * reduced
    return rho


def dm_depolarize_2q(rho: np.ndarray, bit_a: int, bit_b: int, p: float) -> np.ndarray:
    dim = rho.shape[0]
    lo_bit, hi_bit = sorted((bit_a, bit_b))
    lo = 1 << lo_bit
    mid = 1 << (hi_bit - lo_bit - 1)
    top = dim // (4 * lo * mid)
    R = rho.reshape(top, 2, mid, 2, lo, top, 2, mid, 2, lo)
    reduced = sum(R[:, x, :, y, :, :, x, :, y, :] for x in (0, 1) for y in (0, 1))
    R *= 1.0 - p
    for x in (0, 1):
        for y in (0, 1):
            R[:, x, :, y, :, :, x, :, y, :] += 0.25 * p * reduced
    return rho
