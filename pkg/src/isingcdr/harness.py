"""Experiment orchestration: config, pipeline, error metric and result files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .circuits import Circuit, trotter_circuit
from .mitigation import (
    SingularFitError,
    bootstrap_fits,
    fit_cdr,
    fit_pmcdr,
    fit_vncdr,
    median_apply,
    zne,
)
from .model import ModelParams, ProductState, TimeGrid, exact_evolve
from .observables import ObservableSeries, combine, components, parse_observable
from .seeding import derive_int
from .simulator import DEFAULT_SHOTS, Backend, NoiseModel, run_exact
from .training import SubstitutionPolicy, TrainingSet, make_training_sets

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

METHODS = ("raw", "zne", "cdr", "vncdr", "pmcdr")


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


class UndefinedNormalizationError(ArithmeticError):
    """The reference series averages to zero."""


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    initial: ProductState
    grid: TimeGrid
    noise: NoiseModel = field(default_factory=NoiseModel)
    levels: tuple[int, ...] = (1, 3)
    shots: int | None = DEFAULT_SHOTS
    repeats: int = 6
    methods: tuple[str, ...] = METHODS
    policy: SubstitutionPolicy = field(default_factory=SubstitutionPolicy)
    observables: tuple[str, ...] = ("Z5",)
    masterSeed: int = 0
    trainingCount: int = 50
    bootstrapSubsets: int = 200
    bootstrapSize: int = 5
    firstStep: int = 1

    def __post_init__(self) -> None:
        levels = tuple(int(c) for c in self.levels)
        if list(levels) != sorted(set(levels)) or 1 not in levels:
            raise ConfigError(f"levels must be ascending, distinct and contain 1, got {levels}")
        if any(c < 1 or c % 2 == 0 for c in levels):
            raise ConfigError("levels must be odd positive integers")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.shots is not None and self.shots < 1:
            raise ConfigError("shots must be positive")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        if self.initial.L != self.model.L:
            raise ConfigError("initial state length differs from L")
        if not 0 <= self.firstStep <= self.grid.nSteps:
            raise ConfigError("firstStep must lie in [0, nSteps]")
        for oid in self.observables:
            for part in components(oid):
                try:
                    parse_observable(part, self.model.L)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "observables", tuple(self.observables))

    @property
    def steps(self) -> list[int]:
        return list(range(self.firstStep, self.grid.nSteps + 1))

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["initial"] = {"bitstring": self.initial.bitstring}
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()


def _initial_from(section: Any, L: int) -> ProductState:
    if isinstance(section, str):
        section = {"kind": section}
    kind = section.get("kind", "bitstring" if "bitstring" in section else "arrows" if "arrows" in section else None)
    if kind == "all_up":
        return ProductState.all_up(L)
    if kind == "kink_pair":
        return ProductState.kink_pair(L, int(section["i"]), int(section["n"]))
    if kind == "bitstring":
        return ProductState.from_bitstring(section["bitstring"])
    if kind == "arrows":
        return ProductState.from_arrows(section["arrows"])
    raise ConfigError(f"cannot build an initial state from {section!r}")


def config_from_mapping(doc: Mapping[str, Any]) -> ExperimentConfig:
    try:
        model = ModelParams(**doc.get("model", {}))
        initial = _initial_from(doc.get("initial", "all_up"), model.L)
        grid = TimeGrid(**doc["grid"])
        noise = NoiseModel(**doc.get("noise", {}))
        master = int(doc.get("masterSeed", 0))
        policy_doc = dict(doc.get("policy", {}))
        policy_doc.setdefault("seed", master)
        policy = SubstitutionPolicy(**policy_doc)
        shots = doc.get("shots", DEFAULT_SHOTS)
        if shots in ("exact", "none", 0):
            shots = None
        boot = doc.get("bootstrap", {})
        return ExperimentConfig(
            model=model,
            initial=initial,
            grid=grid,
            noise=noise,
            levels=tuple(doc.get("levels", (1, 3))),
            shots=shots,
            repeats=int(doc.get("repeats", 6)),
            methods=tuple(doc.get("methods", METHODS)),
            policy=policy,
            observables=tuple(doc.get("observables", ("Z5",))),
            masterSeed=master,
            trainingCount=int(doc.get("trainingCount", 50)),
            bootstrapSubsets=int(boot.get("subsets", 200)),
            bootstrapSize=int(boot.get("subsetSize", 5)),
            firstStep=int(doc.get("firstStep", 1)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return config_from_mapping(doc)


# -- report ------------------------------------------------------------------


@dataclass
class MethodResult:
    observableId: str
    method: str
    times: np.ndarray
    values: np.ndarray  # (times, repeats); NaN where the method failed
    failure: str | None = None

    @property
    def median(self) -> np.ndarray:
        return _nanquantile(self.values, 0.5)

    @property
    def q25(self) -> np.ndarray:
        return _nanquantile(self.values, 0.25)

    @property
    def q75(self) -> np.ndarray:
        return _nanquantile(self.values, 0.75)

    def series(self) -> ObservableSeries:
        return ObservableSeries(list(map(float, self.times)), list(map(float, self.median)), self.observableId, self.method)


def _nanquantile(values: np.ndarray, q: float) -> np.ndarray:
    out = np.full(values.shape[0], np.nan)
    ok = ~np.all(np.isnan(values), axis=1)
    if ok.any():
        out[ok] = np.nanquantile(values[ok], q, axis=1)
    return out


@dataclass
class RunReport:
    config: ExperimentConfig | None
    results: dict[tuple[str, str], MethodResult] = field(default_factory=dict)
    reference: dict[str, ObservableSeries] = field(default_factory=dict)
    exact: dict[str, ObservableSeries] = field(default_factory=dict)

    def error_table(self) -> dict[tuple[str, str], float]:
        out = {}
        for (oid, method), res in sorted(self.results.items()):
            if res.failure is None:
                out[(oid, method)] = mean_absolute_error(res.series(), self.reference[oid])
        return out


def mean_absolute_error(series: ObservableSeries, reference: ObservableSeries) -> float:
    """mean_t |(series - reference) / mean(reference)|."""
    t, v = series.as_arrays()
    tr, r = reference.as_arrays()
    if t.shape != tr.shape or not np.allclose(t, tr):
        raise ValueError("series and reference are on different time grids")
    scale = float(np.mean(r))
    if abs(scale) < 1e-15:
        raise UndefinedNormalizationError("reference series has zero mean")
    return float(np.mean(np.abs((v - r) / scale)))


# -- pipeline ----------------------------------------------------------------


class ExperimentError(RuntimeError):
    """A pipeline component failed; the message carries the step context."""


def _training_sets(
    config: ExperimentConfig, backend: Backend, circuit: Circuit, nSteps: int, primitives: Sequence[str]
) -> dict[str, TrainingSet]:
    policy = replace(config.policy, seed=derive_int(config.masterSeed, "training", nSteps, config.policy.seed))
    return make_training_sets(circuit, policy, backend, primitives, config.trainingCount, config.levels)


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Run every configured method at every time step; deterministic in ``masterSeed``."""
    L = config.model.L
    steps = config.steps
    times = np.array([config.grid.dt * n for n in steps])
    primitives = list(dict.fromkeys(p for oid in config.observables for p in components(oid)))
    prim_obs = {p: parse_observable(p, L) for p in primitives}
    backend = Backend(config.initial, config.noise, config.shots)
    wants = set(config.methods)
    needs_training = bool(wants & {"cdr", "vncdr", "pmcdr"})
    R = len(config.levels)

    raw = {p: np.full((len(steps), config.repeats, R), np.nan) for p in primitives}
    ref = {p: np.zeros(len(steps)) for p in primitives}
    mitigated = {(p, m): np.full((len(steps), config.repeats), np.nan) for p in primitives for m in METHODS}
    failures: dict[tuple[str, str], str] = {}
    training_cache: dict[int, dict[str, TrainingSet]] = {}

    def training(n: int) -> dict[str, TrainingSet]:
        if n not in training_cache:
            circ = trotter_circuit(config.model, TimeGrid(config.grid.dt, n))
            training_cache[n] = _training_sets(config, backend, circ, n, primitives)
        return training_cache[n]

    if "zne" in wants and R < 2:
        for p in primitives:
            failures[(p, "zne")] = "zne needs at least two noise levels"
    pm_models: dict[str, Any] = {}
    if "pmcdr" in wants:
        for p in primitives:
            try:
                pm_models[p] = fit_pmcdr(training(1)[p], training(2)[p], prim_obs[p].trace_term)
            except (SingularFitError, ValueError) as exc:
                failures[(p, "pmcdr")] = f"pmcdr fit failed: {exc}"

    for si, n in enumerate(steps):
        circuit = trotter_circuit(config.model, TimeGrid(config.grid.dt, n))
        exact_probs = run_exact(circuit, config.initial)
        for p in primitives:
            ref[p][si] = prim_obs[p].expectation(exact_probs)
        for li, c in enumerate(config.levels):
            try:
                dist = backend.noisy([circuit], c)[0]
            except Exception as exc:
                raise ExperimentError(f"noisy simulation failed at step {n}, level {c}: {exc}") from exc
            for r in range(config.repeats):
                probs = backend.measure(dist, derive_int(config.masterSeed, "interest-shots", n, c, r))
                for p in primitives:
                    raw[p][si, r, li] = prim_obs[p].expectation(probs)

        sets = training(n) if needs_training and n > 0 else {}
        for p in primitives:
            x = raw[p][si]
            mitigated[(p, "raw")][si] = x[:, 0]
            if "zne" in wants and R >= 2:
                mitigated[(p, "zne")][si] = [zne(x[r], config.levels) for r in range(config.repeats)]
            for method, fitter in (("cdr", fit_cdr), ("vncdr", fit_vncdr)):
                if method not in wants or (p, method) in failures:
                    continue
                if n == 0:
                    mitigated[(p, method)][si] = x[:, 0]
                    continue
                try:
                    fits = bootstrap_fits(
                        sets[p], fitter, config.bootstrapSubsets, config.bootstrapSize,
                        derive_int(config.masterSeed, f"bootstrap:{method}:{p}", n),
                    )
                except (SingularFitError, ValueError) as exc:
                    failures[(p, method)] = f"{method} failed at step {n}: {exc}"
                    continue
                mitigated[(p, method)][si] = [median_apply(fits, x[r]) for r in range(config.repeats)]
            if "pmcdr" in wants and p in pm_models:
                try:
                    mitigated[(p, "pmcdr")][si] = [pm_models[p].apply(x[r], n) for r in range(config.repeats)]
                except ArithmeticError as exc:
                    failures[(p, "pmcdr")] = f"pmcdr failed at step {n}: {exc}"

    report = RunReport(config)
    exact_series = exact_evolve(config.model, config.initial, times, observables=primitives)
    for oid in config.observables:
        parts = components(oid)
        report.reference[oid] = ObservableSeries(
            list(map(float, times)), [float(v) for v in combine(oid, {q: ref[q] for q in parts})], oid, "trotterExact"
        )
        report.exact[oid] = ObservableSeries(
            list(map(float, times)),
            [float(v) for v in combine(oid, {q: np.asarray(exact_series[q].values) for q in parts})],
            oid,
            "exact",
        )
        for method in config.methods:
            failed = next((failures[(q, method)] for q in parts if (q, method) in failures), None)
            vals = combine(oid, {q: mitigated[(q, method)] for q in parts})
            if failed is not None:
                vals = np.full_like(vals, np.nan)
            report.results[(oid, method)] = MethodResult(oid, method, times, vals, failed)
        if "raw" in config.methods:
            for li, c in enumerate(config.levels[1:], start=1):
                vals = combine(oid, {q: raw[q][:, :, li] for q in parts})
                report.results[(oid, f"raw({c})")] = MethodResult(oid, f"raw({c})", times, vals)
    return report


# -- output ------------------------------------------------------------------


def _fmt(v: float) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def _safe_name(oid: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in oid)


def observable_csv(report: RunReport, oid: str) -> str:
    repeats = report.config.repeats if report.config else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "method", "median", "q25", "q75", *[f"r{k}" for k in range(repeats)]])
    for name, series in (("trotterExact", report.reference.get(oid)), ("exact", report.exact.get(oid))):
        if series is None:
            continue
        for t, v in zip(series.times, series.values):
            w.writerow([_fmt(t), name, _fmt(v), _fmt(v), _fmt(v), *[""] * repeats])
    for (o, method), res in sorted(report.results.items()):
        if o != oid:
            continue
        med, lo, hi = res.median, res.q25, res.q75
        for k, t in enumerate(res.times):
            w.writerow([_fmt(t), method, _fmt(med[k]), _fmt(lo[k]), _fmt(hi[k]), *map(_fmt, res.values[k])])
    return buf.getvalue()


def manifest(report: RunReport) -> dict[str, Any]:
    cfg = report.config
    doc: dict[str, Any] = {"package": "isingcdr", "version": __version__, "numpy": np.__version__}
    if cfg is None:
        return doc
    doc.update(
        configHash=cfg.digest(),
        config=cfg.to_dict(),
        masterSeed=cfg.masterSeed,
        seedScheme="SeedSequence(masterSeed, spawn_key=(crc32(role), *indices))",
        files=[f"{_safe_name(oid)}.csv" for oid in cfg.observables],
        errors={f"{oid}/{m}": e for (oid, m), e in report.error_table().items()},
        failures={f"{oid}/{m}": r.failure for (oid, m), r in sorted(report.results.items()) if r.failure},
    )
    return doc


def emit(report: RunReport, outdir: str | os.PathLike | None = None, format: str = "csv") -> list[Path]:
    """Write one CSV per observable and ``manifest.json``; returns the paths written."""
    if format != "csv":
        raise ValueError(f"unsupported format {format!r}")
    out = Path(os.environ.get("ISINGCDR_OUTPUT_DIR") or outdir or "results")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if report.config is not None:
        for oid in report.config.observables:
            path = out / f"{_safe_name(oid)}.csv"
            path.write_text(observable_csv(report, oid))
            written.append(path)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest(report), sort_keys=True, indent=2, default=list) + "\n")
    written.append(path)
    return written
