"""Two-kink confinement spectrum and dominant-frequency extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .model import ModelParams
from .observables import ObservableSeries


@dataclass(frozen=True)
class TwoKinkSpectrum:
    k: float
    energies: np.ndarray
    params: ModelParams

    @property
    def frequencies(self) -> np.ndarray:
        return meson_frequencies(self)


def two_kink_matrix(params: ModelParams, k: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal V(n) = 2J hZ n (n = 1..L-1) and hopping 2J hX cos(k/2)."""
    if params.L < 3:
        raise ValueError("two-kink spectrum needs L >= 3")
    n = np.arange(1, params.L, dtype=float)
    diag = 2.0 * params.J * params.hZ * n
    off = np.full(params.L - 2, 2.0 * params.J * params.hX * math.cos(k / 2))
    return diag, off


def two_kink_spectrum(params: ModelParams, k: float = 0.0) -> TwoKinkSpectrum:
    diag, off = two_kink_matrix(params, k)
    w = eigh_tridiagonal(diag, off, eigvals_only=True)
    return TwoKinkSpectrum(k, np.sort(w), params)


def meson_frequencies(spectrum: TwoKinkSpectrum) -> np.ndarray:
    """omega_alpha = E_{alpha+1} - E_alpha over the sorted two-kink energies.

    The two-kink energies start at the lightest meson (alpha = 1), so the
    first entry is omega_1; omega_0 comes from the vacuum quench instead.
    """
    e = np.asarray(spectrum.energies)
    if e.size < 2:
        raise ValueError("need at least two energies")
    return np.diff(e)


def meson_masses(frequencies: Sequence[float], omega0: float | None = None) -> np.ndarray:
    """m_alpha = sum_{beta <= alpha} omega_beta.

    ``omega0`` is prepended when given; otherwise ``frequencies`` must already
    start with omega_0.
    """
    w = [float(x) for x in frequencies]
    if omega0 is not None:
        w = [float(omega0)] + w
    return np.cumsum(w) if w else np.zeros(0)


# -- damped cosine fit ------------------------------------------------------


@dataclass
class CosineFit:
    """a1 exp(-a2 t) cos(a3 t) + a4 t + a5 fitted on t <= tMax."""

    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    residual: float
    tMax: float
    converged: bool = True
    degenerate: bool = False
    candidates: list[float] = field(default_factory=list)
    candidateResiduals: list[float] = field(default_factory=list)

    @property
    def params(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3, self.a4, self.a5])

    @property
    def frequency(self) -> float:
        return self.a3


def damped_cosine(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    a1, a2, a3, a4, a5 = p
    return a1 * np.exp(-a2 * t) * np.cos(a3 * t) + a4 * t + a5


def _jacobian(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    a1, a2, a3, _, _ = p
    e = np.exp(-a2 * t)
    c = np.cos(a3 * t)
    s = np.sin(a3 * t)
    return np.column_stack([e * c, -a1 * t * e * c, -a1 * t * e * s, t, np.ones_like(t)])


def _levenberg_marquardt(
    p0: np.ndarray, t: np.ndarray, y: np.ndarray, max_iter: int = 500, tol: float = 1e-15
) -> tuple[np.ndarray, float, bool]:
    p = p0.astype(float).copy()
    r = y - damped_cosine(p, t)
    cost = float(r @ r)
    lam = 1e-3
    for _ in range(max_iter):
        Jm = _jacobian(p, t)
        A = Jm.T @ Jm
        g = Jm.T @ r
        improved = False
        while lam < 1e12:
            step = np.linalg.lstsq(A + lam * np.diag(np.diag(A) + 1e-12), g, rcond=None)[0]
            trial = p + step
            r_new = y - damped_cosine(trial, t)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                small = cost - cost_new <= tol * max(cost, 1e-300) or np.max(np.abs(step)) < 1e-14
                p, r, cost = trial, r_new, cost_new
                lam = max(lam / 10, 1e-12)
                improved = True
                if small:
                    return p, cost, True
                break
            lam *= 10
        if not improved:
            return p, cost, True
    return p, cost, False


def _fft_peaks(t: np.ndarray, y: np.ndarray, count: int = 3, pad: int = 8192) -> list[float]:
    """Angular frequencies of the largest periodogram peaks of an evenly sampled window."""
    dt = float(np.median(np.diff(t)))
    spec = np.abs(np.fft.rfft(y, n=max(pad, 8 * y.size)))
    omega = 2 * np.pi * np.fft.rfftfreq(max(pad, 8 * y.size), d=dt)
    interior = np.flatnonzero((spec[1:-1] > spec[:-2]) & (spec[1:-1] >= spec[2:])) + 1
    order = interior[np.argsort(spec[interior])[::-1]]
    peaks = [float(omega[i]) for i in order[:count]]
    return peaks or [float(omega[int(np.argmax(spec))])]


def _linear_part(t: np.ndarray, y: np.ndarray, w: float) -> tuple[np.ndarray, float]:
    """Least-squares (a1, a4, a5) and residual of the undamped model at frequency w."""
    design = np.column_stack([np.cos(w * t), t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    r = y - design @ coef
    return coef, float(r @ r)


def _scan_frequency(t: np.ndarray, y: np.ndarray, nyquist: float, points: int = 400) -> float:
    """Best undamped frequency on a grid; covers windows shorter than one period."""
    grid = np.linspace(nyquist / points, nyquist, points)
    return float(grid[int(np.argmin([_linear_part(t, y, w)[1] for w in grid]))])


def fit_damped_cosine(
    series: ObservableSeries | tuple[Sequence[float], Sequence[float]], tMax: float = 3.0
) -> CosineFit:
    """Single-frequency fit; multi-start from the top three periodogram peaks and a grid scan."""
    if isinstance(series, ObservableSeries):
        t, y = series.as_arrays()
    else:
        t, y = (np.asarray(a, dtype=float) for a in series)
    keep = t <= tMax + 1e-12
    t, y = t[keep], y[keep]
    if t.size < 6:
        raise ValueError(f"need at least 6 samples with t <= {tMax}, got {t.size}")
    trend = np.polyfit(t, y, 1)
    detrended = y - np.polyval(trend, t)
    scale = max(float(np.max(np.abs(y))), 1.0)
    if float(np.max(np.abs(detrended))) <= 1e-12 * scale:
        return CosineFit(0.0, 0.0, 0.0, float(trend[0]), float(trend[1]), 0.0, tMax,
                         converged=True, degenerate=True)

    nyquist = math.pi / float(np.min(np.diff(t)))
    candidates = _fft_peaks(t, detrended) + [_scan_frequency(t, y, nyquist)]
    fits = []
    with np.errstate(over="ignore", invalid="ignore"):
        for w0 in candidates:
            a1, a4, a5 = _linear_part(t, y, w0)[0]
            p, cost, ok = _levenberg_marquardt(np.array([a1, 0.0, w0, a4, a5]), t, y)
            fits.append((cost, abs(p[2]) <= nyquist, p, ok))
    # aliased solutions above the Nyquist frequency fit the samples but say nothing
    admissible = [f for f in fits if f[1]] or fits
    cost, _, p, ok = min(admissible, key=lambda f: f[0])
    a1, a2, a3, a4, a5 = (float(x) for x in p)
    if a3 < 0:
        a3 = -a3
    degenerate = abs(a1) <= 1e-9 * scale
    return CosineFit(a1, a2, a3, a4, a5, float(cost), tMax, converged=ok,
                     degenerate=degenerate, candidates=candidates,
                     candidateResiduals=[float(f[0]) if f[1] else math.inf for f in fits])


def spectrum_rows(params_list: Sequence[ModelParams], k: float = 0.0) -> list[dict]:
    """(hZ, alpha, E, omega, m) rows; omega/m of the last level are blank."""
    rows = []
    for params in params_list:
        spec = two_kink_spectrum(params, k)
        omegas = meson_frequencies(spec)
        for a, e in enumerate(spec.energies, start=1):
            rows.append({
                "hX": params.hX,
                "hZ": params.hZ,
                "alpha": a,
                "E": float(e),
                "omega": float(omegas[a - 1]) if a - 1 < omegas.size else None,
                "m": float(e - spec.energies[0]),
            })
    return rows
