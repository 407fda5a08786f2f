"""Data model: censored dataset, priors, model spec, chain state.

The second-stage design row is ``(x_i', d_i, v_i)`` with the control
variable ``v_i = d_i - z_i' gamma`` and ``z_i = (x_i', w_i)``. Responses are
left-censored at zero; data censored elsewhere must be shifted by the caller.
Data are used as given (no automatic rescaling), although the default DP base
measures assume roughly unit-scale first-stage errors.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np


class Family(str, enum.Enum):
    TQR = "tqr"
    AL = "al"
    SN = "sn"
    AEP = "aep"
    ALDP = "aldp"
    SNDP = "sndp"

    @property
    def endogenous(self) -> bool:
        return self is not Family.TQR

    @property
    def dp(self) -> bool:
        return self in (Family.ALDP, Family.SNDP)

    @property
    def al_kernel(self) -> bool:
        return self in (Family.AL, Family.ALDP)

    @property
    def sn_kernel(self) -> bool:
        return self in (Family.SN, Family.SNDP)


# DP base measures IG(c0, d0) per family when none is given
BASE_DEFAULTS = {Family.ALDP: (2.0, 0.5), Family.SNDP: (1.5, 1.5)}


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters. Scalar means/covariances broadcast to ``c * I``."""

    beta_mean: object = 0.0
    beta_cov: object = 100.0
    eta_mean: float = 0.0
    eta_var: float = 5.0
    gamma_mean: object = 0.0
    gamma_cov: object = 100.0
    sigma_shape: float = 0.1
    sigma_scale: float = 0.1
    phi_shape: float = 0.1
    phi_scale: float = 0.1
    base_shape: Optional[float] = None
    base_scale: Optional[float] = None
    a_shape: float = 2.0
    a_rate: float = 2.0
    zeta_mean: float = 1.0
    zeta_var: float = 1.0

    def __post_init__(self):
        for name in ("eta_var", "sigma_shape", "sigma_scale", "phi_shape", "phi_scale",
                     "a_shape", "a_rate", "zeta_var"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("base_shape", "base_scale"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("beta_cov", "gamma_cov"):
            cov = np.asarray(getattr(self, name), dtype=float)
            if cov.ndim == 0:
                if not cov > 0:
                    raise ValueError(f"{name} must be positive")
            else:
                if not np.allclose(cov, cov.T):
                    raise ValueError(f"{name} must be symmetric")
                if np.any(np.linalg.eigvalsh(cov) <= 0):
                    raise ValueError(f"{name} must be positive definite")

    def base(self, family: Family) -> tuple[float, float]:
        c0, d0 = BASE_DEFAULTS.get(family, (None, None))
        return (self.base_shape if self.base_shape is not None else c0,
                self.base_scale if self.base_scale is not None else d0)

    def beta_tilde_prior(self, dim: int, endogenous: bool = True):
        """Mean and covariance of (beta', delta, eta)' (eta omitted for TQR)."""
        nb = dim - 1 if endogenous else dim
        mean = _broadcast_mean(self.beta_mean, nb)
        cov = _broadcast_cov(self.beta_cov, nb)
        if not endogenous:
            return mean, cov
        m = np.append(mean, self.eta_mean)
        c = np.zeros((dim, dim))
        c[:nb, :nb] = cov
        c[nb, nb] = self.eta_var
        return m, c

    def gamma_prior(self, dim: int):
        return _broadcast_mean(self.gamma_mean, dim), _broadcast_cov(self.gamma_cov, dim)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            out[f.name] = np.asarray(val).tolist() if isinstance(val, np.ndarray) else val
        return out


def _broadcast_mean(val, dim):
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        return np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ValueError(f"prior mean has shape {arr.shape}, expected ({dim},)")
    return arr.copy()


def _broadcast_cov(val, dim):
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(dim)
    if arr.shape != (dim, dim):
        raise ValueError(f"prior covariance has shape {arr.shape}, expected ({dim}, {dim})")
    return arr.copy()


PRIOR_PRESETS = {
    "default": PriorConfig(),
    "alt1": PriorConfig(eta_var=25.0, sigma_shape=0.1, sigma_scale=0.1,
                        phi_shape=0.01, phi_scale=0.01),
    "alt2": PriorConfig(eta_var=100.0, sigma_shape=0.001, sigma_scale=0.001,
                        phi_shape=0.001, phi_scale=0.001),
}


def prior_preset(name: str, **overrides) -> PriorConfig:
    try:
        base = PRIOR_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown prior preset {name!r}") from None
    return replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class ModelSpec:
    p: float
    family: Family = Family.AL
    priors: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        object.__setattr__(self, "family", Family(self.family))


@dataclass(frozen=True)
class ThetaTau:
    theta: float
    tau2: float


def theta_tau(q: float) -> ThetaTau:
    """Location and scale constants of the normal-exponential AL mixture."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    return ThetaTau((1.0 - 2.0 * q) / (q * (1.0 - q)), 2.0 / (q * (1.0 - q)))


@dataclass(frozen=True)
class CensoredDataset:
    """Left-censored (at zero) responses with one endogenous regressor.

    ``X`` carries the intercept in column 0. ``w`` may be ``None`` for
    standard TQR fits, which need no instrument.
    """

    y: np.ndarray
    censored: np.ndarray
    X: np.ndarray
    d: np.ndarray
    w: Optional[np.ndarray] = None
    x_names: tuple = ("const",)

    @classmethod
    def from_arrays(cls, y, X, d, w=None, x_names=None):
        y = np.asarray(y, dtype=float)
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if x_names is None:
            x_names = ("const",) + tuple(f"x{j}" for j in range(1, X.shape[1]))
        return cls(y=y, censored=(y == 0), X=X, d=np.asarray(d, dtype=float),
                   w=None if w is None else np.asarray(w, dtype=float),
                   x_names=tuple(x_names))

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def Z(self) -> np.ndarray:
        if self.w is None:
            raise ValueError("dataset has no instrument column")
        return np.column_stack([self.X, self.w])

    def with_responses(self, y, d) -> "CensoredDataset":
        """Copy with new (y, d) and the same covariates; used by simulators."""
        y = np.asarray(y, dtype=float)
        return replace(self, y=y, censored=(y == 0), d=np.asarray(d, dtype=float))


def validate_dataset(ds: CensoredDataset) -> list[str]:
    """All invariant violations as messages; empty list means valid."""
    errors = []
    n = len(ds.y)
    lengths = {"censored": len(ds.censored), "X": ds.X.shape[0], "d": len(ds.d)}
    if ds.w is not None:
        lengths["w"] = len(ds.w)
    for name, m in lengths.items():
        if m != n:
            errors.append(f"length mismatch: {name} has {m} rows, y has {n}")
    if errors:
        return errors
    for arr, name in ((ds.y, "y"), (ds.d, "d"), (ds.X, "X")) + (
        ((ds.w, "w"),) if ds.w is not None else ()
    ):
        if not np.all(np.isfinite(arr)):
            errors.append(f"non-finite values in {name}")
    neg = np.flatnonzero(ds.y < 0)
    if neg.size:
        errors.append(f"negative response at index {int(neg[0])}")
    bad = np.flatnonzero(np.asarray(ds.censored, bool) != (ds.y == 0))
    if bad.size:
        errors.append(f"censor flag mismatch at index {int(bad[0])}")
    if ds.X.shape[1] == 0 or not np.all(ds.X[:, 0] == 1.0):
        errors.append("intercept column not constant")
    return errors


def assemble_design(x_i, d_i: float, z_i, gamma) -> np.ndarray:
    """Second-stage design row (x_i', d_i, d_i - z_i' gamma)'."""
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    z_i = np.atleast_1d(np.asarray(z_i, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    if z_i.shape[0] != x_i.shape[0] + 1:
        raise ValueError("z_i must be x_i with the instrument appended")
    if gamma.shape != z_i.shape:
        raise ValueError("gamma is not conformable with z_i")
    return np.concatenate([x_i, [d_i, d_i - z_i @ gamma]])


def design_matrix(ds: CensoredDataset, gamma=None) -> np.ndarray:
    """Stacked second-stage design; without ``gamma`` the TQR design (X, d)."""
    if gamma is None:
        return np.column_stack([ds.X, ds.d])
    return np.column_stack([ds.X, ds.d, ds.d - ds.Z @ gamma])


def predict_quantile(x_tilde, beta_tilde) -> float:
    """p-th quantile of the observed response: max(0, x~' beta~)."""
    x_tilde = np.asarray(x_tilde, dtype=float)
    beta_tilde = np.asarray(beta_tilde, dtype=float)
    if x_tilde.shape[-1] != beta_tilde.shape[-1]:
        raise ValueError("dimension mismatch")
    out = np.maximum(0.0, x_tilde @ beta_tilde)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ChainState:
    """Everything one chain carries between sweeps.

    First-stage blocks are ``None`` when the family does not use them.
    DP cluster labels are zero-based.
    """

    beta_tilde: np.ndarray
    sigma: float
    g: np.ndarray
    ystar: np.ndarray
    gamma: Optional[np.ndarray] = None
    alpha: float = 0.5
    phi: Optional[float] = None
    zeta1: Optional[float] = None
    zeta2: Optional[float] = None
    h: Optional[np.ndarray] = None
    u: Optional[np.ndarray] = None
    k_alloc: Optional[np.ndarray] = None
    omega: Optional[np.ndarray] = None
    phi_clusters: Optional[np.ndarray] = None
    a: Optional[float] = None

    def copy(self) -> "ChainState":
        return ChainState(**{
            k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in asdict_shallow(self).items()
        })

    def first_stage_scales(self) -> np.ndarray:
        """Per-observation first-stage scale (phi, or phi of the allocated cluster)."""
        if self.phi_clusters is not None:
            return self.phi_clusters[self.k_alloc]
        return np.full(len(self.ystar), self.phi)


def asdict_shallow(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


# ---------------------------------------------------------------- CSV I/O

REQUIRED = ("y", "d", "w")


class DatasetError(ValueError):
    """Dataset file is missing columns or violates the dataset invariants."""


def read_dataset_csv(path, require_instrument: bool = True) -> CensoredDataset:
    """Read ``y, d, w`` plus one column per non-intercept exogenous regressor.

    The intercept is synthesized; censoring is ``y == 0``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    needed = ("y", "d", "w") if require_instrument else ("y", "d")
    missing = [c for c in needed if c not in header]
    if missing:
        raise DatasetError(f"missing required column(s): {', '.join(missing)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(len(rows), len(header))
    except ValueError as exc:
        raise DatasetError(f"{path}: non-numeric value ({exc})") from None
    col = {h: data[:, j] for j, h in enumerate(header)}
    extra = [h for h in header if h not in REQUIRED]
    X = np.column_stack([np.ones(len(rows))] + [col[h] for h in extra])
    ds = CensoredDataset.from_arrays(
        col["y"], X, col["d"], col.get("w"), x_names=("const", *extra)
    )
    errors = validate_dataset(ds)
    if errors:
        raise DatasetError("; ".join(errors))
    return ds


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_dataset_csv(ds: CensoredDataset, path) -> None:
    header = ["y", "d"] + (["w"] if ds.w is not None else []) + list(ds.x_names[1:])
    cols = [ds.y, ds.d] + ([ds.w] if ds.w is not None else []) + [ds.X[:, j] for j in range(1, ds.k)]
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([format_float(v) for v in row])
    tmp.replace(path)


def ols(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(A, b, rcond=None)[0]
