"""Data generators for the simulation designs and the replication harness.

Designs:

* motivating(rho): y* = 1 + x + d + u, d = 1 + x + w + v, (u, v) bivariate
  normal with unit variances and correlation rho, x, w ~ N(0, 1).
* settings 1-5: y* = x + d + 0.6 v + e, d = x + 1.5 w + v with
  x ~ N(0, 1), w ~ N(1, 1) truncated to (0, inf) and the error laws below.
* weak(gamma_w): y* = d + 0.6 v + e, d = gamma_w w + v, w, v ~ N(0, 1).

Responses are censored at zero: y = max(0, y*).
"""

from __future__ import annotations

import csv
import functools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .diagnostics import inefficiency_factor
from .distributions import skewt_std_draws
from .model import CensoredDataset, Family, ModelSpec, PriorConfig, format_float
from .samplers.chain import ChainConfig, run_chain

SKEW_LOC = -0.430
SKEW_SHAPE = 0.980
SKEW_DF = 4.0
ALPHA_SKEW = 0.435
ETA = 0.6
E_SD = math.sqrt(1.0 - ETA**2)


@dataclass(frozen=True)
class SettingSpec:
    """A data-generating design. ``kind`` is "motivating", "setting" or "weak"."""

    kind: str
    setting: Optional[int] = None
    rho: Optional[float] = None
    gamma_w: Optional[float] = None
    n: int = 300

    def __post_init__(self):
        if self.n < 10:
            raise ValueError("n must be >= 10")
        if self.kind == "setting":
            if self.setting not in (1, 2, 3, 4, 5):
                raise ValueError(f"invalid setting {self.setting!r}; expected 1..5")
        elif self.kind == "motivating":
            if self.rho is None or not -1 < self.rho < 1:
                raise ValueError("motivating design needs rho in (-1, 1)")
        elif self.kind == "weak":
            if self.gamma_w is None or not math.isfinite(self.gamma_w):
                raise ValueError("weak design needs a finite gamma_w")
        else:
            raise ValueError(f"unknown design kind {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "setting":
            return f"setting{self.setting}"
        if self.kind == "motivating":
            return f"motivating_rho{self.rho:g}"
        return f"weak_gamma{self.gamma_w:g}"

    def generate(self, rng: np.random.Generator):
        if self.kind == "setting":
            return gen_setting(self.setting, self.n, rng)
        if self.kind == "motivating":
            return gen_motivating(self.rho, self.n, rng)
        return gen_weak(self.gamma_w, self.n, rng)


def parse_setting(text, n: int = 300, rho: Optional[float] = None,
                  gamma_w: Optional[float] = None) -> SettingSpec:
    """"1".."5", "motivating" (needs rho) or "weak" (needs gamma_w)."""
    text = str(text).strip().lower()
    if text in ("motivating", "motivation"):
        return SettingSpec("motivating", rho=0.0 if rho is None else rho, n=n)
    if text == "weak":
        return SettingSpec("weak", gamma_w=0.1 if gamma_w is None else gamma_w, n=n)
    try:
        k = int(text)
    except ValueError:
        raise ValueError(f"invalid setting {text!r}") from None
    return SettingSpec("setting", setting=k, n=n)


@dataclass(frozen=True)
class Truth:
    """Generating values; the intercept truth depends on the quantile level."""

    beta: tuple
    delta: float
    eta: float
    gamma: tuple
    alpha: float
    intercept_rule: str
    error_quantile: Callable = field(repr=False, compare=False, default=None)

    def at(self, p: float) -> dict:
        if not 0 < p < 1:
            raise ValueError("p must lie in (0, 1)")
        out = {f"beta{j}": float(b) for j, b in enumerate(self.beta)}
        out["beta0"] += float(self.error_quantile(p))
        out["delta"] = self.delta
        out["eta"] = self.eta
        for j, g in enumerate(self.gamma[:-1]):
            out[f"gamma{j}"] = float(g)
        out["gamma_w"] = float(self.gamma[-1])
        out["alpha"] = self.alpha
        return out

    def to_dict(self, ps: Sequence[float] = (0.1, 0.5)) -> dict:
        return {"beta": list(self.beta), "delta": self.delta, "eta": self.eta,
                "gamma": list(self.gamma), "alpha": self.alpha,
                "intercept_rule": self.intercept_rule,
                "quantile_coeffs": {format(p, "g"): self.at(p) for p in ps}}


def _scaled_normal_ppf(p, sd):
    return sd * stats.norm.ppf(p)


def _normal_q(sd):
    return functools.partial(_scaled_normal_ppf, sd=sd)


def _t6_q(p):
    return stats.t.ppf(p, 6)


def _trunc_w(n, rng):
    # N(1, 1) truncated to (0, inf)
    return stats.truncnorm.rvs(-1.0, np.inf, loc=1.0, scale=1.0, size=n, random_state=rng)


def gen_motivating(rho: float, n: int, rng: np.random.Generator):
    """Bivariate-normal design; truths are for the endogenous model
    (eta = rho, second-stage error sd sqrt(1 - rho^2))."""
    if not -1 < rho < 1:
        raise ValueError("rho must lie in (-1, 1)")
    x = rng.standard_normal(n)
    w = rng.standard_normal(n)
    v = rng.standard_normal(n)
    u = rho * v + math.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
    d = 1.0 + x + w + v
    ystar = 1.0 + x + d + u
    ds = CensoredDataset.from_arrays(np.maximum(0.0, ystar), np.column_stack([np.ones(n), x]), d, w)
    sd = math.sqrt(1.0 - rho * rho)
    truth = Truth((1.0, 1.0), 1.0, rho, (1.0, 1.0, 1.0), 0.5,
                  f"1 + {sd:.6g} * normal quantile(p)", _normal_q(sd))
    return ds, truth


def first_stage_errors(setting: int, w, rng: np.random.Generator):
    n = len(w)
    if setting == 1:
        return rng.standard_normal(n)
    if setting == 2:
        return rng.standard_t(4, n)
    if setting == 3:
        return SKEW_LOC + skewt_std_draws(SKEW_SHAPE, SKEW_DF, rng, n)
    if setting == 4:
        return (1.0 + 0.5 * w) * rng.standard_normal(n)
    if setting == 5:
        # location scaled with the spread so that the mode stays at zero
        return (1.0 + 0.5 * w) * (SKEW_LOC + skewt_std_draws(SKEW_SHAPE, SKEW_DF, rng, n))
    raise ValueError(f"invalid setting {setting!r}; expected 1..5")


def second_stage_errors(setting: int, n: int, rng: np.random.Generator):
    if setting in (1, 4):
        return E_SD * rng.standard_normal(n)
    if setting in (2, 3, 5):
        return rng.standard_t(6, n)
    raise ValueError(f"invalid setting {setting!r}; expected 1..5")


def true_quantile_coeffs(setting: int, p: float) -> dict:
    """Quantile-regression truths (beta0 shifted by the p-th error quantile)."""
    return _setting_truth(setting).at(p)


def _setting_truth(setting: int) -> Truth:
    if setting in (1, 4):
        q, rule = _normal_q(E_SD), f"{E_SD:g} * normal quantile(p)"
    elif setting in (2, 3, 5):
        q, rule = _t6_q, "t6 quantile(p)"
    else:
        raise ValueError(f"invalid setting {setting!r}; expected 1..5")
    alpha = ALPHA_SKEW if setting in (3, 5) else 0.5
    return Truth((0.0, 1.0), 1.0, ETA, (0.0, 1.0, 1.5), alpha, rule, q)


def gen_setting(setting: int, n: int = 300, rng: Optional[np.random.Generator] = None):
    truth = _setting_truth(setting)
    rng = np.random.default_rng() if rng is None else rng
    x = rng.standard_normal(n)
    w = _trunc_w(n, rng)
    v = first_stage_errors(setting, w, rng)
    e = second_stage_errors(setting, n, rng)
    d = x + 1.5 * w + v
    ystar = x + d + ETA * v + e
    ds = CensoredDataset.from_arrays(np.maximum(0.0, ystar), np.column_stack([np.ones(n), x]), d, w)
    return ds, truth


def gen_weak(gamma_w: float, n: int = 300, rng: Optional[np.random.Generator] = None):
    rng = np.random.default_rng() if rng is None else rng
    w = rng.standard_normal(n)
    v = rng.standard_normal(n)
    e = E_SD * rng.standard_normal(n)
    d = gamma_w * w + v
    ystar = d + ETA * v + e
    ds = CensoredDataset.from_arrays(np.maximum(0.0, ystar), np.ones((n, 1)), d, w)
    truth = Truth((0.0,), 1.0, ETA, (0.0, gamma_w), 0.5, f"{E_SD:g} * normal quantile(p)",
                  _normal_q(E_SD))
    return ds, truth


# ---------------------------------------------------------------- replication


@dataclass
class ReplicationRow:
    model: str
    p: float
    param: str
    truth: float
    bias: float
    rmse: float
    median_if: Optional[float]
    n_ok: int


@dataclass
class ReplicationReport:
    setting: str
    reps: int
    censoring_rate: float
    rows: list
    estimates: dict = field(repr=False)
    failures: list = field(default_factory=list)

    def row(self, model, p, param) -> ReplicationRow:
        for r in self.rows:
            if r.model == model and math.isclose(r.p, p) and r.param == param:
                return r
        raise KeyError((model, p, param))

    def to_dict(self) -> dict:
        return {"setting": self.setting, "reps": self.reps, "censoring_rate": self.censoring_rate,
                "rows": [asdict(r) for r in self.rows],
                "failures": [list(f) for f in self.failures]}

    def write_csv(self, path) -> None:
        cols = ["model", "p", "param", "truth", "bias", "rmse", "median_if", "n_ok", "censoring_rate"]
        lines = [cols]
        for r in self.rows:
            lines.append([r.model, format(r.p, "g"), r.param, format_float(r.truth),
                          format_float(r.bias), format_float(r.rmse),
                          "" if r.median_if is None else format_float(r.median_if),
                          str(r.n_ok), format_float(self.censoring_rate)])
        _atomic_write(path, lambda fh: csv.writer(fh, lineterminator="\n").writerows(lines))

    def write_json(self, path) -> None:
        _atomic_write(path, lambda fh: json.dump(self.to_dict(), fh, indent=2))


def _atomic_write(path, writer) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer(fh)
    tmp.replace(path)


def replication_seeds(seed: int, rep: int) -> tuple[np.random.Generator, int]:
    """Data generator and chain seed for one replication, both derived from ``seed``."""
    data_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, 0)))
    chain_seed = int(np.random.SeedSequence(seed, spawn_key=(rep, 1)).generate_state(1, np.uint64)[0])
    return data_rng, chain_seed


def _fit_replication(args):
    setting, models, ps, cfg, priors, rep, fitter = args
    data_rng, chain_seed = replication_seeds(cfg.seed, rep)
    ds, truth = setting.generate(data_rng)
    fit_cfg = replace(cfg, seed=chain_seed, chains=1)
    out, errors = {}, []
    for model in models:
        for p in ps:
            spec = ModelSpec(p, Family(model), priors)
            try:
                chain = fitter(spec, ds, fit_cfg)
            except Exception as exc:  # recorded, the harness continues
                errors.append((rep, model, p, f"{type(exc).__name__}: {exc}"))
                continue
            means = {}
            ifs = {}
            for j, name in enumerate(chain.names):
                col = np.asarray(chain.draws)[:, j]
                means[name] = float(col.mean())
                try:
                    ifs[name] = inefficiency_factor(col)
                except ValueError:
                    ifs[name] = None
            out[(model, p)] = (means, ifs)
    return rep, float(ds.censored.mean()), truth, out, errors


def replicate(setting: SettingSpec, models: Sequence, ps: Sequence[float], reps: int,
              cfg: ChainConfig, priors: Optional[PriorConfig] = None,
              fitter: Optional[Callable] = None, workers: Optional[int] = None,
              progress: Optional[Callable] = None) -> ReplicationReport:
    """Bias, RMSE and median IF of posterior means over ``reps`` generated datasets.

    ``fitter(spec, ds, cfg)`` must return an object with ``names`` and
    ``draws``; it defaults to a single chain of ``run_chain``. Failed fits are
    listed in ``report.failures`` as (replication, model, p, message).
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    models = [Family(m).value for m in models]
    ps = [float(p) for p in ps]
    priors = priors or PriorConfig()
    fitter = fitter or run_chain
    jobs = [(setting, models, ps, cfg, priors, r, fitter) for r in range(reps)]
    workers = 1 if workers is None else min(workers, reps, os.cpu_count() or 1)
    results = []
    if workers <= 1:
        for j in jobs:
            results.append(_fit_replication(j))
            if progress:
                progress(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for res in ex.map(_fit_replication, jobs):
                results.append(res)
                if progress:
                    progress(res)
    return _reduce(setting, reps, results)


def _reduce(setting, reps, results) -> ReplicationReport:
    failures = [f for res in results for f in res[4]]
    cens = float(np.mean([res[1] for res in results]))
    keys = []
    for res in results:
        for key in res[3]:
            if key not in keys:
                keys.append(key)
    rows, estimates = [], {}
    for model, p in keys:
        fits = [(res[2].at(p), res[3][(model, p)]) for res in results if (model, p) in res[3]]
        names = [n for n in fits[0][1][0] if n in fits[0][0]]
        est = {}
        for name in names:
            errs = np.array([means[name] - truth[name] for truth, (means, _) in fits])
            vals = [ifs[name] for _, (_, ifs) in fits if ifs.get(name) is not None]
            est[name] = np.array([means[name] for _, (means, _) in fits])
            bias = float(errs.mean())
            # guards the rounding case where all errors are equal
            rmse = max(float(np.sqrt(np.mean(errs**2))), abs(bias))
            rows.append(ReplicationRow(model, p, name, float(fits[0][0][name]), bias, rmse,
                                       float(np.median(vals)) if vals else None, len(fits)))
        estimates[(model, p)] = est
    return ReplicationReport(setting.label, reps, cens, rows, estimates, failures)
