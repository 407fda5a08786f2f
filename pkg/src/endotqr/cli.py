"""Command-line interface: fit, simulate, replicate, diagnose.

Exit codes: 0 success, 1 invalid configuration, 2 dataset or draws-file
problem, 3 sampler failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import gelman_rubin, inefficiency_factor, summarize
from .model import (
    DatasetError,
    Family,
    ModelSpec,
    PriorConfig,
    format_float,
    prior_preset,
    read_dataset_csv,
    write_dataset_csv,
)
from .samplers.chain import ChainConfig, SamplerError, run_chains
from .simstudy import parse_setting, replicate

EXIT_CONFIG, EXIT_DATA, EXIT_SAMPLER = 1, 2, 3

CHAIN_KEYS = {f.name for f in dataclasses.fields(ChainConfig)}
PRIOR_KEYS = {f.name for f in dataclasses.fields(PriorConfig)}
RUN_KEYS = {"model", "p", "data", "prior_preset", "models", "setting", "reps", "n", "rho",
            "gamma_w", "workers"}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _p_list(text) -> list:
    try:
        ps = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"invalid quantile list {text!r}") from None
    if not ps or any(not 0 < p < 1 for p in ps):
        raise ConfigError("quantile levels must lie in (0, 1)")
    return ps


def _atomic_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _write_json(path: Path, obj) -> None:
    _atomic_text(path, json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj).__name__)


def write_draws_csv(path: Path, names, draws) -> None:
    rows = [list(names)] + [[format_float(v) for v in row] for row in draws]
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    tmp.replace(path)


def read_draws_csv(path) -> tuple[list, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetError(f"{path}: {exc.strerror}") from None
    if not rows:
        raise DatasetError(f"{path}: empty draws file")
    names = rows[0]
    body = [r for r in rows[1:] if r]
    if any(len(r) != len(names) for r in body):
        raise DatasetError(f"{path}: ragged rows")
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(names))
    except ValueError:
        raise DatasetError(f"{path}: non-numeric entry") from None
    return names, data


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(cfg) - CHAIN_KEYS - PRIOR_KEYS - RUN_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for key, val in cfg.items():
        if isinstance(val, dict):
            raise ConfigError(f"config key {key!r} must not be nested")
    return cfg


def _resolve(args, flag_map: dict, defaults: dict) -> dict:
    """Built-in defaults < manifest < config file < command-line flags."""
    out = dict(defaults)
    manifest = getattr(args, "manifest", None)
    if manifest:
        try:
            data = json.loads(Path(manifest).read_text())
            out.update(data["config"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot read manifest {manifest}: {exc}") from None
    out.update(_load_config(args.config))
    for attr, key in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            out[key] = val
    return out


def _build_priors(cfg: dict) -> PriorConfig:
    overrides = {k: cfg[k] for k in PRIOR_KEYS if k in cfg and cfg[k] is not None}
    try:
        return prior_preset(cfg.get("prior_preset", "default"), **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _build_chain_cfg(cfg: dict) -> ChainConfig:
    try:
        return ChainConfig(**{k: int(cfg[k]) for k in CHAIN_KEYS if k in cfg})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _fresh_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------- fit

FIT_FLAGS = {"model": "model", "p": "p", "iters": "iterations", "burnin": "burn_in", "thin": "thin",
             "chains": "chains", "seed": "seed", "data": "data", "prior_preset": "prior_preset",
             "workers": "workers"}
FIT_DEFAULTS = {"model": "al", "p": "0.5", "iterations": 20000, "burn_in": 5000, "thin": 1,
                "chains": 1, "prior_preset": "default", "workers": 1}


def cmd_fit(args) -> int:
    started = _now()
    try:
        cfg = _resolve(args, FIT_FLAGS, FIT_DEFAULTS)
        try:
            family = Family(cfg["model"])
        except ValueError:
            raise ConfigError(f"unknown model {cfg['model']!r}") from None
        ps = _p_list(",".join(map(str, cfg["p"])) if isinstance(cfg["p"], list) else cfg["p"])
        if cfg.get("seed") is None:
            cfg["seed"] = _fresh_seed()
        priors = _build_priors(cfg)
        chain_cfg = _build_chain_cfg(cfg)
        if not cfg.get("data"):
            raise ConfigError("--data is required")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        ds = read_dataset_csv(cfg["data"], require_instrument=family.endogenous)
    except FileNotFoundError:
        print(f"error: dataset {cfg['data']} not found", file=sys.stderr)
        return EXIT_DATA
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    blocks, acceptance = [], {}
    for p in ps:
        spec = ModelSpec(p, family, priors)
        try:
            chains = run_chains(spec, ds, chain_cfg, workers=int(cfg.get("workers", 1)),
                                save_latents=args.save_latents)
        except SamplerError as exc:
            print(f"error: sampler failed at p={p:g}: {exc}", file=sys.stderr)
            return EXIT_SAMPLER
        for ch in chains:
            write_draws_csv(out / f"draws_{family.value}_p{p:g}_chain{ch.chain_index}.csv",
                            ch.names, ch.draws)
            if ch.latents:
                np.savez_compressed(out / f"latents_{family.value}_p{p:g}_chain{ch.chain_index}.npz",
                                    **ch.latents)
        acceptance[format(p, "g")] = [ch.acceptance for ch in chains]
        if chain_cfg.kept:
            report = summarize(chains).to_dict()
        else:
            report = None
        blocks.append({"p": p, "acceptance": acceptance[format(p, "g")], "summary": report})
        _print_block(family.value, p, report)
    _write_json(out / "summary.json", {"model": family.value, "data": str(cfg["data"]), "blocks": blocks})
    resolved = {k: v for k, v in cfg.items() if k not in PRIOR_KEYS}
    resolved["p"] = ps
    resolved["data"] = str(Path(cfg["data"]).resolve())
    resolved.update(priors.to_dict())
    resolved.update(dataclasses.asdict(chain_cfg))
    _write_json(out / "manifest.json", {
        "config": resolved, "seed": chain_cfg.seed, "version": __version__,
        "data_sha256": _sha256(cfg["data"]), "started": started, "finished": _now(),
        "acceptance": acceptance,
    })
    return 0


def _print_block(model, p, report):
    print(f"{model} p={p:g}")
    if report is None:
        print("  (no retained draws)")
        return
    for r in report["params"]:
        extra = ""
        if r["psrf"] is not None:
            extra = f"  psrf={r['psrf']:.3f} ({r['psrf_upper']:.3f})"
        ifv = "   n/a" if r["inefficiency"] is None else f"{r['inefficiency']:6.1f}"
        print(f"  {r['name']:>10s} {r['mean']:10.4f} [{r['lower']:9.4f}, {r['upper']:9.4f}] IF={ifv}{extra}")


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    try:
        setting = parse_setting(args.setting, n=args.n, rho=args.rho, gamma_w=args.gamma_w)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else _fresh_seed()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ds, truth = setting.generate(rng)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_dataset_csv(ds, path)
    truths = {"setting": setting.label, "n": setting.n, "seed": seed,
              "censoring_rate": float(ds.censored.mean()), **truth.to_dict()}
    _write_json(path.with_suffix(".truths.json"), truths)
    print(f"wrote {path} ({ds.n} rows, censoring rate {ds.censored.mean():.3f})")
    return 0


# ---------------------------------------------------------------- replicate

REP_FLAGS = {"models": "models", "p": "p", "reps": "reps", "iters": "iterations",
             "burnin": "burn_in", "thin": "thin", "seed": "seed", "prior_preset": "prior_preset",
             "workers": "workers", "n": "n"}
REP_DEFAULTS = {"models": "al", "p": "0.5", "reps": 20, "iterations": 20000, "burn_in": 5000,
                "thin": 1, "prior_preset": "default", "workers": 1, "n": 300}


def cmd_replicate(args) -> int:
    try:
        cfg = _resolve(args, REP_FLAGS, REP_DEFAULTS)
        models = cfg["models"].split(",") if isinstance(cfg["models"], str) else list(cfg["models"])
        try:
            models = [Family(m.strip()).value for m in models]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        ps = _p_list(cfg["p"])
        reps = int(cfg["reps"])
        if reps < 2:
            raise ConfigError("--reps must be >= 2")
        if cfg.get("seed") is None:
            cfg["seed"] = _fresh_seed()
        priors = _build_priors(cfg)
        chain_cfg = _build_chain_cfg({**cfg, "chains": 1})
        try:
            setting = parse_setting(args.setting, n=int(cfg["n"]), rho=args.rho, gamma_w=args.gamma_w)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(res):
        print(f"replication {res[0]} done", file=sys.stderr)

    report = replicate(setting, models, ps, reps, chain_cfg, priors,
                       workers=int(cfg.get("workers", 1)), progress=progress)
    if report.rows:
        report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    for r in report.rows:
        mif = "n/a" if r.median_if is None else f"{r.median_if:.1f}"
        print(f"{r.model:5s} p={r.p:<5g} {r.param:>8s} bias={r.bias:8.4f} rmse={r.rmse:7.4f} IF={mif}")
    print(f"mean censoring rate {report.censoring_rate:.3f}")
    for rep, model, p, msg in report.failures:
        print(f"failure: replication {rep} model {model} p={p:g}: {msg}", file=sys.stderr)
    return EXIT_SAMPLER if report.failures else 0


# ---------------------------------------------------------------- diagnose


def cmd_diagnose(args) -> int:
    try:
        loaded = [read_draws_csv(f) for f in args.draws]
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    names = loaded[0][0]
    if any(n != names for n, _ in loaded):
        print("error: draws files have different columns", file=sys.stderr)
        return EXIT_DATA
    mats = [m for _, m in loaded]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = {"files": [str(f) for f in args.draws], "params": []}
    equal = len({m.shape[0] for m in mats}) == 1
    for j, name in enumerate(names):
        rec = {"name": name, "inefficiency": []}
        for m in mats:
            try:
                rec["inefficiency"].append(inefficiency_factor(m[:, j]))
            except ValueError:
                rec["inefficiency"].append(None)
        if len(mats) >= 2 and equal:
            try:
                rec["psrf"], rec["psrf_upper"] = gelman_rubin([m[:, j] for m in mats])
            except ValueError:
                rec["psrf"] = rec["psrf_upper"] = None
        result["params"].append(rec)
        trace = [["chain", "iteration", "value"]] + [
            [str(c), str(t), format_float(v)] for c, m in enumerate(mats) for t, v in enumerate(m[:, j])]
        tmp = out / f"trace_{name}.csv.tmp"
        with open(tmp, "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(trace)
        tmp.replace(out / f"trace_{name}.csv")
        ifs = " ".join("n/a" if v is None else f"{v:.2f}" for v in rec["inefficiency"])
        gr = ""
        if rec.get("psrf") is not None:
            gr = f" psrf={rec['psrf']:.4f} upper={rec['psrf_upper']:.4f}"
        print(f"{name:>10s} IF={ifs}{gr}")
    _write_json(out / "diagnostics.json", result)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="endotqr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit a model at one or more quantile levels")
    fit.add_argument("--model", choices=[f.value for f in Family])
    fit.add_argument("--p", help="comma-separated quantile levels")
    fit.add_argument("--iters", type=int)
    fit.add_argument("--burnin", type=int)
    fit.add_argument("--thin", type=int)
    fit.add_argument("--chains", type=int)
    fit.add_argument("--seed", type=int)
    fit.add_argument("--data")
    fit.add_argument("--out", default=".")
    fit.add_argument("--prior-preset", dest="prior_preset", choices=["default", "alt1", "alt2"])
    fit.add_argument("--config", help="flat JSON object of config keys")
    fit.add_argument("--manifest", help="replay the configuration of a previous run")
    fit.add_argument("--workers", type=int, help="processes for parallel chains")
    fit.add_argument("--save-latents", dest="save_latents", action="store_true")
    fit.set_defaults(func=cmd_fit)

    sim = sub.add_parser("simulate", help="generate a simulated dataset")
    sim.add_argument("--setting", required=True, help="1-5, motivating or weak")
    sim.add_argument("--n", type=int, default=300)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--rho", type=float)
    sim.add_argument("--gamma-w", dest="gamma_w", type=float)
    sim.add_argument("--out", default="data.csv", help="dataset CSV path")
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("replicate", help="bias/RMSE over replicated datasets")
    rep.add_argument("--setting", required=True)
    rep.add_argument("--models")
    rep.add_argument("--p")
    rep.add_argument("--reps", type=int)
    rep.add_argument("--iters", type=int)
    rep.add_argument("--burnin", type=int)
    rep.add_argument("--thin", type=int)
    rep.add_argument("--seed", type=int)
    rep.add_argument("--n", type=int)
    rep.add_argument("--rho", type=float)
    rep.add_argument("--gamma-w", dest="gamma_w", type=float)
    rep.add_argument("--prior-preset", dest="prior_preset", choices=["default", "alt1", "alt2"])
    rep.add_argument("--config")
    rep.add_argument("--workers", type=int)
    rep.add_argument("--out", default=".")
    rep.set_defaults(func=cmd_replicate)

    dia = sub.add_parser("diagnose", help="IF, PSRF and trace data from draws files")
    dia.add_argument("draws", nargs="+")
    dia.add_argument("--out", default=".")
    dia.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not hasattr(args, "config"):
        args.config = None
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
