"""Zero-noise extrapolation and the Clifford-data-regression family.

Every fit object has ``apply(noisy)``, where ``noisy`` holds the noisy values
of one circuit ordered like the training set's noise levels (a bare float is
accepted for single-level fits).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .seeding import derive_rng
from .training import TrainingSet


class SingularFitError(ValueError):
    """The training data do not determine the fit."""


class AmplificationOverflowError(ArithmeticError):
    """The inverted depolarising factor is too small to divide by."""


def _level_index(ts: TrainingSet, level: int) -> int:
    if level not in ts.noiseLevels:
        raise ValueError(f"level {level} not in training set levels {ts.noiseLevels}")
    return ts.noiseLevels.index(level)


# -- CDR ---------------------------------------------------------------------


@dataclass(frozen=True)
class CdrFit:
    a1: float
    a2: float
    levelIndex: int = 0

    def apply(self, noisy, clamp: tuple[float, float] | None = None) -> float:
        return apply_cdr(self, float(np.atleast_1d(noisy)[self.levelIndex]), clamp)


def ols_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Closed-form least-squares (slope, intercept)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise SingularFitError("a line needs at least two points")
    xm, ym = x.mean(), y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx <= 1e-28 * max(1.0, float(np.sum(x**2))):
        raise SingularFitError("all noisy training values coincide")
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    return slope, float(ym - slope * xm)


def fit_cdr(ts: TrainingSet, level: int = 1) -> CdrFit:
    k = _level_index(ts, level)
    a1, a2 = ols_line(ts.x[:, k], ts.y)
    return CdrFit(a1, a2, k)


def apply_cdr(fit: CdrFit, noisy: float, clamp: tuple[float, float] | None = None) -> float:
    """a1 * noisy + a2; ``clamp`` (off by default) bounds the result."""
    v = fit.a1 * noisy + fit.a2
    if clamp is not None:
        v = min(max(v, clamp[0]), clamp[1])
    return float(v)


# -- vnCDR -------------------------------------------------------------------


@dataclass(frozen=True)
class VnCdrFit:
    a: tuple[float, ...]
    b: float
    levelIndices: tuple[int, ...]
    minimumNorm: bool = False

    def apply(self, noisy, clamp: tuple[float, float] | None = None) -> float:
        x = np.atleast_1d(np.asarray(noisy, dtype=float))[list(self.levelIndices)]
        v = float(np.dot(self.a, x) + self.b)
        if clamp is not None:
            v = min(max(v, clamp[0]), clamp[1])
        return v


def fit_vncdr(ts: TrainingSet, levels: Sequence[int] | None = None) -> VnCdrFit:
    """Least squares on [x_1 .. x_n, 1]; rank-deficient designs get the minimum-norm solution.

    A design whose noisy vectors all coincide says nothing about the slope and
    raises ``SingularFitError``, as for CDR.
    """
    levels = tuple(ts.noiseLevels if levels is None else levels)
    idx = tuple(_level_index(ts, c) for c in levels)
    if len(ts) == 0:
        raise SingularFitError("empty training set")
    x = ts.x[:, list(idx)]
    if np.all(np.ptp(x, axis=0) <= 1e-14 * max(1.0, float(np.max(np.abs(x))))):
        raise SingularFitError("all noisy training vectors coincide")
    design = np.column_stack([x, np.ones(len(ts))])
    coef, _, rank, _ = np.linalg.lstsq(design, ts.y, rcond=None)
    return VnCdrFit(tuple(float(c) for c in coef[:-1]), float(coef[-1]), idx, bool(rank < design.shape[1]))


# -- ZNE ---------------------------------------------------------------------


def zne(values: Sequence[float], levels: Sequence[int]) -> float:
    """Intercept at c = 0 of the least-squares line through (level, value)."""
    if len(levels) < 2 or len(values) != len(levels):
        raise ValueError("zero-noise extrapolation needs values at >= 2 noise levels")
    _, intercept = ols_line(np.asarray(levels, dtype=float), np.asarray(values, dtype=float))
    return intercept


# -- pmCDR -------------------------------------------------------------------


@dataclass(frozen=True)
class PmCdrModel:
    eps1: float
    eps2: float
    alpha: float
    traceTerm: float = 0.0

    def apply(self, noisy, nSteps: int) -> float:
        return apply_pmcdr(self, float(np.atleast_1d(noisy)[0]), nSteps)


def fit_epsilon(ts: TrainingSet, traceTerm: float = 0.0, level: int = 1) -> float:
    """One-parameter fit of x = (1 - eps) y + eps c."""
    x = ts.x[:, _level_index(ts, level)]
    dy = ts.y - traceTerm
    denom = float(np.sum(dy**2))
    if denom == 0:
        raise SingularFitError("all exact training values equal the trace term")
    return float(np.sum((ts.y - x) * dy) / denom)


def fit_alpha(eps1: float, eps2: float) -> float:
    """alpha such that 1 - eps2 = (1 - eps1)^(2 alpha)."""
    if not (0 < eps1 < 1 and 0 < eps2 < 1):
        raise ValueError(f"eps1 and eps2 must lie in (0, 1), got {eps1}, {eps2}")
    return math.log1p(-eps2) / (2.0 * math.log1p(-eps1))


def fit_pmcdr(one_step: TrainingSet, two_step: TrainingSet, traceTerm: float = 0.0) -> PmCdrModel:
    e1 = fit_epsilon(one_step, traceTerm)
    e2 = fit_epsilon(two_step, traceTerm)
    return PmCdrModel(e1, e2, fit_alpha(e1, e2), traceTerm)


def apply_pmcdr(model: PmCdrModel, noisy: float, nSteps: int) -> float:
    """Invert x = (1 - eps_N) y + eps_N c with eps_N = 1 - (1 - eps1)^(alpha N)."""
    if model.eps1 == 0:
        return float(noisy)
    survive = (1.0 - model.eps1) ** (model.alpha * nSteps)
    if not survive > 1e-12:
        raise AmplificationOverflowError(f"1 - eps_N = {survive:.3g} at nSteps={nSteps}")
    epsN = 1.0 - survive
    return float((noisy - epsN * model.traceTerm) / survive)


# -- bootstrap ---------------------------------------------------------------

Fitter = Callable[[TrainingSet], object]

FITTERS: dict[str, Fitter] = {"cdr": fit_cdr, "vncdr": fit_vncdr}


def bootstrap_fits(
    ts: TrainingSet, fitter: Fitter | str, subsets: int = 200, subsetSize: int = 5, seed: int = 0
) -> list:
    """Fits on ``subsets`` random subsets; subsets whose fit is singular are dropped."""
    fitter = FITTERS[fitter] if isinstance(fitter, str) else fitter
    if len(ts) < subsetSize:
        raise ValueError(f"training set of {len(ts)} records is smaller than subsetSize={subsetSize}")
    fits = []
    for k in range(subsets):
        rows = derive_rng(seed, "bootstrap-subset", k).choice(len(ts), size=subsetSize, replace=False)
        try:
            fits.append(fitter(ts.subset(sorted(int(r) for r in rows))))
        except SingularFitError:
            continue
    if not fits:
        raise SingularFitError("every bootstrap subset was singular")
    return fits


def median_apply(fits: Sequence, noisy) -> float:
    return float(np.median([f.apply(noisy) for f in fits]))


def bootstrap_fit(
    ts: TrainingSet,
    fitter: Fitter | str,
    interest,
    subsets: int = 200,
    subsetSize: int = 5,
    seed: int = 0,
) -> float:
    """Median over subsets of the subset fit applied to ``interest``."""
    return median_apply(bootstrap_fits(ts, fitter, subsets, subsetSize, seed), interest)


# -- serialization -----------------------------------------------------------

_METHODS = {CdrFit: "cdr", VnCdrFit: "vncdr", PmCdrModel: "pmcdr"}


def fit_to_json(fit, trainingSetId: str = "", seed: int | None = None) -> str:
    params = asdict(fit)
    return json.dumps(
        {"method": _METHODS[type(fit)], "parameters": params, "trainingSetId": trainingSetId, "seed": seed},
        sort_keys=True,
    )


def fit_from_json(text: str):
    doc = json.loads(text)
    cls = {v: k for k, v in _METHODS.items()}[doc["method"]]
    params = doc["parameters"]
    for key in ("a", "levelIndices"):
        if key in params:
            params[key] = tuple(params[key])
    return cls(**params)
