"""Posterior summaries, inefficiency factors and Gelman-Rubin statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

MIN_IF_LENGTH = 50
MIN_GR_LENGTH = 100


def autocorrelation(x) -> np.ndarray:
    """Sample autocorrelations rho_0..rho_{n-1} (biased autocovariance, via FFT)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    if acov[0] <= 0:
        raise ValueError("series is constant")
    return acov / acov[0]


def inefficiency_factor(series) -> float:
    """1 + 2 sum of autocorrelations, truncated by Geyer's initial positive sequence.

    Paired sums rho_{2k} + rho_{2k+1} are accumulated while positive; the
    result is floored at zero.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < MIN_IF_LENGTH:
        raise ValueError(f"need a 1-d series of length >= {MIN_IF_LENGTH}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series has non-finite values")
    if np.ptp(x) == 0:
        raise ValueError("inefficiency factor undefined for a constant series")
    rho = autocorrelation(x)
    m = len(rho) // 2
    pairs = rho[: 2 * m : 2] + rho[1 : 2 * m : 2]
    nonpos = np.flatnonzero(pairs <= 0)
    stop = nonpos[0] if nonpos.size else m
    return max(0.0, float(-1.0 + 2.0 * pairs[:stop].sum()))


def gelman_rubin(chains: Sequence, confidence: float = 0.95) -> tuple[float, float]:
    """Potential scale reduction factor and its upper confidence bound.

    Uses the degrees-of-freedom corrected estimate and the F-based upper
    limit of the classic between/within variance comparison.
    """
    x = np.asarray([np.asarray(c, dtype=float) for c in chains])
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two chains of equal length")
    m, n = x.shape
    if n < MIN_GR_LENGTH:
        raise ValueError(f"chains must have length >= {MIN_GR_LENGTH}")
    s2 = x.var(axis=1, ddof=1)
    if np.any(s2 == 0):
        raise ValueError("degenerate chain with zero variance")
    xbar = x.mean(axis=1)
    w = s2.mean()
    b = n * xbar.var(ddof=1)
    muhat = xbar.mean()
    var_w = s2.var(ddof=1) / m
    var_b = 2.0 * b * b / (m - 1)
    cov = lambda a, c: float(np.cov(a, c, ddof=1)[0, 1])
    cov_wb = (n / m) * (cov(s2, xbar**2) - 2.0 * muhat * cov(s2, xbar))
    V = (n - 1) * w / n + (1 + 1 / m) * b / n
    var_V = ((n - 1) ** 2 * var_w + (1 + 1 / m) ** 2 * var_b
             + 2 * (n - 1) * (1 + 1 / m) * cov_wb) / n**2
    df_adj = (2 * V * V / var_V + 3) / (2 * V * V / var_V + 1) if var_V > 0 else 1.0
    r_fixed = (n - 1) / n
    r_random = (1 + 1 / m) * (1 / n) * (b / w)
    q = (1 + confidence) / 2
    if var_w > 0:
        fq = stats.f.ppf(q, m - 1, 2 * w * w / var_w)
    else:
        fq = stats.chi2.ppf(q, m - 1) / (m - 1)
    psrf = math.sqrt(df_adj * (r_fixed + r_random))
    upper = math.sqrt(df_adj * (r_fixed + fq * r_random))
    return psrf, upper


@dataclass
class ParamSummary:
    name: str
    mean: float
    lower: float
    upper: float
    inefficiency: Optional[float]
    psrf: Optional[float] = None
    psrf_upper: Optional[float] = None


@dataclass
class SummaryReport:
    params: list
    level: float
    n_draws: int
    n_chains: int

    def __getitem__(self, name) -> ParamSummary:
        for rec in self.params:
            if rec.name == name:
                return rec
        raise KeyError(name)

    @property
    def names(self) -> list:
        return [r.name for r in self.params]

    def to_dict(self) -> dict:
        return {"level": self.level, "n_draws": self.n_draws, "n_chains": self.n_chains,
                "params": [asdict(r) for r in self.params]}


def _safe_if(x) -> Optional[float]:
    try:
        return inefficiency_factor(x)
    except ValueError:
        return None


def summarize(chains, level: float = 0.95, names=None) -> SummaryReport:
    """Posterior mean, equal-tailed percentile interval and IF per column.

    ``chains`` is one draws matrix/Chain or a list of them; IFs are averaged
    over chains and PSRFs are added when there are at least two.
    """
    if hasattr(chains, "draws") or isinstance(chains, np.ndarray):
        chains = [chains]
    mats = []
    for c in chains:
        if hasattr(c, "draws"):
            names = names or list(c.names)
            mats.append(np.asarray(c.draws, dtype=float))
        else:
            mats.append(np.atleast_2d(np.asarray(c, dtype=float).T).T)
    if not mats or any(m.shape[0] == 0 for m in mats):
        raise ValueError("empty chain")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    ncol = mats[0].shape[1]
    names = names or [f"p{j}" for j in range(ncol)]
    pooled = np.vstack(mats)
    lo_q, hi_q = (1 - level) / 2, (1 + level) / 2
    records = []
    for j, name in enumerate(names):
        col = pooled[:, j]
        lo, hi = np.quantile(col, [lo_q, hi_q])
        ifs = [_safe_if(m[:, j]) for m in mats]
        ifs = [v for v in ifs if v is not None]
        rec = ParamSummary(name, float(col.mean()), float(lo), float(hi),
                           float(np.mean(ifs)) if ifs else None)
        if len(mats) >= 2 and len({m.shape[0] for m in mats}) == 1:
            try:
                rec.psrf, rec.psrf_upper = gelman_rubin([m[:, j] for m in mats])
            except ValueError:
                pass
        records.append(rec)
    return SummaryReport(records, level, pooled.shape[0], len(mats))
