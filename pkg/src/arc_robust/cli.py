"""Command-line entry point: ``arc-robust {simulate,certify,theory,lemma-check}``.

Exit codes: 0 success, 2 configuration or usage error, 3 a checked bound
or invariant was violated.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .aggregation import AggregatorSpec, ClipKind
from .attacks import ALL_ATTACKS, AttackKind, AttackSpec, parse_attack
from .data import Dataset, idx_load, synth_generate
from .errors import ArcRobustError, ConfigError
from .lab import (
    CERTIFIED_BASES,
    SLACK,
    clip_inequality_check,
    empirical_kappa,
    heavy_tailed_set,
    random_clip_instance,
)
from .numkit import STREAM_DATA, STREAM_TEST_DATA, rng_stream
from .theory import (
    TheoryInputs,
    arc_bounds,
    breakdown_point,
    convergence_bound,
    kappa_bounds,
    lower_bound_error,
)
from .trainer import MetricsLog, StepRecord, TrainingConfig, max_grad_growth_check, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3
THREADS_ENV = "ARC_ROBUST_THREADS"

CSV_HEADER = (
    "step",
    "attack",
    "aggregator",
    "seed",
    "train_acc",
    "test_acc",
    "loss",
    "clip_threshold",
    "honest_mean_norm",
    "max_honest_grad_norm",
    "full_grad_norm",
)
_FLOAT_FIELDS = CSV_HEADER[4:]


# ---------------------------------------------------------------------------
# config file


def parse_config_text(text: str) -> dict:
    """Parse ``dotted.key = <JSON value>`` lines; ``#`` starts a comment line."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"duplicate key (first set on line {out[key][1]})", line=lineno, field=key)
        if not key or any(not part.replace("_", "").isalnum() for part in key.split(".")):
            raise ConfigError(f"bad key {key!r}", line=lineno)
        try:
            out[key] = (json.loads(value.strip()), lineno)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"value is not valid JSON ({exc.msg})", line=lineno, field=key) from None
    return out


_TRAIN_FIELDS = {
    "n": int,
    "f": int,
    "steps": int,
    "lr": float,
    "lr_decay_step": int,
    "lr_decay_factor": float,
    "momentum": float,
    "batch_size": int,
    "heterogeneity": str,
    "alpha": float,
    "init_scale": float,
    "model": str,
    "hidden": int,
    "l2_reg": float,
    "quad_dim": int,
    "quad_L": float,
    "quad_spread": float,
    "eval_every": int,
}

_DATA_FIELDS = {
    "data.kind": str,
    "data.K": int,
    "data.d_in": int,
    "data.per_class": int,
    "data.test_per_class": int,
    "data.spread": float,
    "data.separation": float,
    "data.offset": float,
    "data.train_images": str,
    "data.train_labels": str,
    "data.test_images": str,
    "data.test_labels": str,
}

_OTHER_FIELDS = {
    "aggregator": str,
    "attacks": object,
    "seeds": object,
    "threads": int,
    "attack.foe_grid": list,
    "attack.alie_grid": list,
    "attack.mimic_target": int,
    "emit.csv": bool,
    "emit.json": bool,
    "emit.plot_data": bool,
}

CONFIG_SCHEMA = {**_TRAIN_FIELDS, **_DATA_FIELDS, **_OTHER_FIELDS}


def config_schema_text() -> str:
    lines = ["config keys (one 'key = JSON value' per line):"]
    for k, t in CONFIG_SCHEMA.items():
        name = {object: "list|str", list: "list"}.get(t, t.__name__)
        lines.append(f"  {k:<22} {name}")
    return "\n".join(lines)


@dataclass(frozen=True)
class DataConfig:
    kind: str = "synthetic"
    K: int = 10
    d_in: int = 20
    per_class: int = 100
    test_per_class: int = 50
    spread: float = 0.25
    separation: float = 1.0
    offset: float = 0.0
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None


@dataclass(frozen=True)
class RunConfig:
    training: TrainingConfig
    attacks: tuple = ()
    seeds: tuple = (1,)
    data: DataConfig = field(default_factory=DataConfig)
    threads: int = 1
    emit_csv: bool = True
    emit_json: bool = True
    emit_plot_data: bool = False


def _coerce(key: str, value, kind, line: int):
    if kind is object:
        return value
    if kind is bool:
        if isinstance(value, bool):
            return value
    elif kind is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif kind is str:
        if isinstance(value, str):
            return value
    elif kind is list:
        if isinstance(value, list):
            return value
    raise ConfigError(f"expected {kind.__name__}, got {json.dumps(value)}", line=line, field=key)


def build_run_config(entries: dict) -> RunConfig:
    """Turn parsed ``{key: (value, line)}`` entries into a validated :class:`RunConfig`."""
    vals = {}
    for key, (value, line) in entries.items():
        if key not in CONFIG_SCHEMA:
            raise ConfigError("unknown key", line=line, field=key)
        vals[key] = _coerce(key, value, CONFIG_SCHEMA[key], line)

    def where(key):
        return entries[key][1] if key in entries else None

    # attacks
    raw_attacks = vals.get("attacks", [])
    if isinstance(raw_attacks, str):
        raw_attacks = [raw_attacks]
    if not isinstance(raw_attacks, list):
        raise ConfigError("expected a list of attack names or \"all\"", line=where("attacks"), field="attacks")
    kinds: list[AttackKind] = []
    for a in raw_attacks:
        if not isinstance(a, str):
            raise ConfigError(f"bad attack {json.dumps(a)}", line=where("attacks"), field="attacks")
        if a.lower() == "all":
            kinds.extend(ALL_ATTACKS)
        elif a.lower() == "none":
            continue
        else:
            try:
                kinds.append(parse_attack(a))
            except ValueError as exc:
                raise ConfigError(str(exc), line=where("attacks"), field="attacks") from None
    for key in ("attack.foe_grid", "attack.alie_grid"):
        if key in vals and not vals[key]:
            raise ConfigError("attack factor grid is empty", line=where(key), field=key)
    specs = []
    for kind in dict.fromkeys(kinds):
        kw = {}
        try:
            if kind is AttackKind.FOE and "attack.foe_grid" in vals:
                kw["tau_grid"] = tuple(float(t) for t in vals["attack.foe_grid"])
            if kind is AttackKind.ALIE and "attack.alie_grid" in vals:
                kw["tau_grid"] = tuple(float(t) for t in vals["attack.alie_grid"])
            if kind is AttackKind.MIMIC and "attack.mimic_target" in vals:
                kw["mimic_target"] = vals["attack.mimic_target"]
            specs.append(AttackSpec(kind, **kw))
        except (ArcRobustError, TypeError, ValueError) as exc:
            key = "attack.foe_grid" if kind is AttackKind.FOE else "attack.alie_grid"
            raise ConfigError(str(exc), line=where(key), field=key) from None

    seeds = vals.get("seeds", [1])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    if not isinstance(seeds, list) or not seeds or not all(
        isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds
    ):
        raise ConfigError("expected a non-empty list of non-negative integer seeds", line=where("seeds"), field="seeds")

    try:
        agg = AggregatorSpec.parse(vals.get("aggregator", "cwtm+nnm"))
    except ArcRobustError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], line=where("aggregator"), field="aggregator") from None

    train_kw = {k: vals[k] for k in _TRAIN_FIELDS if k in vals}
    first_attack = specs[0] if specs else None
    try:
        training = TrainingConfig(aggregator=agg, attack=first_attack, seed=seeds[0], **train_kw)
        for s in specs[1:]:
            replace(training, attack=s)
    except ConfigError as exc:
        key = exc.field if exc.field in CONFIG_SCHEMA else None
        raise ConfigError(exc.message, line=where(key) if key else None, field=exc.field) from None

    data_kw = {k.split(".", 1)[1]: v for k, v in vals.items() if k.startswith("data.")}
    data = DataConfig(**data_kw)
    if data.kind not in ("synthetic", "idx"):
        raise ConfigError("expected \"synthetic\" or \"idx\"", line=where("data.kind"), field="data.kind")
    if data.kind == "idx" and not (data.train_images and data.train_labels):
        raise ConfigError("idx data needs data.train_images and data.train_labels", field="data.kind", line=where("data.kind"))
    if data.kind == "synthetic" and (data.K < 2 or data.d_in < 1 or data.per_class < 1 or data.test_per_class < 0):
        raise ConfigError("synthetic data needs K >= 2, d_in >= 1, per_class >= 1", field="data.K", line=where("data.K"))

    threads = vals.get("threads", 1)
    if threads < 1:
        raise ConfigError("threads must be >= 1", line=where("threads"), field="threads")
    return RunConfig(
        training=training,
        attacks=tuple(specs),
        seeds=tuple(seeds),
        data=data,
        threads=threads,
        emit_csv=vals.get("emit.csv", True),
        emit_json=vals.get("emit.json", True),
        emit_plot_data=vals.get("emit.plot_data", False),
    )


def load_run_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return build_run_config(parse_config_text(text))


# ---------------------------------------------------------------------------
# metrics I/O


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_metrics(log: MetricsLog, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in log.records:
                w.writerow(
                    [r.step, log.attack, log.aggregator, log.seed]
                    + [_fmt(getattr(r, name)) for name in _FLOAT_FIELDS]
                )
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write metrics to {path}: {exc.strerror}") from None
    return path


def read_metrics(path) -> MetricsLog:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header")
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no data rows")
    first = body[0]
    log = MetricsLog(attack=first[1], aggregator=first[2], seed=int(first[3]))
    for row in body:
        floats = [None if s == "" else float(s) for s in row[4:]]
        log.records.append(StepRecord(int(row[0]), *floats))
    return log


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, dict):
        return {str(k): _json_safe(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    if isinstance(v, np.generic):
        return _json_safe(v.item())
    return v


def dumps(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# simulate


def load_datasets(data: DataConfig, seed: int) -> tuple[Dataset, Dataset | None]:
    if data.kind == "idx":
        train = idx_load(data.train_images, data.train_labels, data.K)
        test = None
        if data.test_images and data.test_labels:
            test = idx_load(data.test_images, data.test_labels, data.K)
        return train, test
    kw = dict(separation=data.separation, offset=data.offset)
    train = synth_generate(data.K, data.d_in, data.per_class, data.spread, rng_stream(seed, STREAM_DATA), **kw)
    test = None
    if data.test_per_class > 0:
        test = synth_generate(
            data.K, data.d_in, data.test_per_class, data.spread, rng_stream(seed, STREAM_TEST_DATA), **kw
        )
    return train, test


def run_jobs(rc: RunConfig, threads: int) -> list[MetricsLog]:
    """Run every (attack, seed) pair; results come back in job order."""
    attacks = rc.attacks or (None,)
    jobs = [(a, s) for a in attacks for s in rc.seeds]
    quadratic = rc.training.model == "quadratic"

    def one(job):
        attack, seed = job
        cfg = replace(rc.training, attack=attack, seed=seed)
        if quadratic:
            return run(cfg)
        train, test = load_datasets(rc.data, seed)
        return run(cfg, train, test)

    if threads <= 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, jobs))


def metrics_filename(log: MetricsLog) -> str:
    return f"metrics_{log.attack}_seed{log.seed}.csv"


def merged_summary(rc: RunConfig, logs: list[MetricsLog]) -> dict:
    per_seed = {}
    for seed in rc.seeds:
        runs = [lg for lg in logs if lg.seed == seed]
        accs = {lg.attack: lg.max_test_accuracy() for lg in runs}
        per_seed[str(seed)] = {
            "max_test_accuracy": accs,
            "worst_case_max_accuracy": min(accs.values()) if accs else None,
        }
    worst = [v["worst_case_max_accuracy"] for v in per_seed.values()]
    finite = [w for w in worst if w is not None and math.isfinite(w)]
    return {
        "aggregator": str(rc.training.aggregator),
        "attacks": [a.kind.value for a in rc.attacks] or ["none"],
        "seeds": list(rc.seeds),
        "runs": [lg.summary() for lg in logs],
        "per_seed": per_seed,
        "worst_case_max_accuracy": float(np.mean(finite)) if len(finite) == len(worst) else None,
    }


def simulate(rc: RunConfig, out_dir, threads: int) -> list[MetricsLog]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    logs = run_jobs(rc, threads)
    if rc.emit_csv:
        for lg in logs:
            write_metrics(lg, out / metrics_filename(lg))
    if rc.emit_json:
        (out / "summary.json").write_text(dumps(merged_summary(rc, logs)) + "\n")
    if rc.emit_plot_data:
        with (out / "curves.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["attack", "seed", "step", "test_acc", "clip_threshold"])
            for lg in logs:
                for r in lg.records:
                    w.writerow([lg.attack, lg.seed, r.step, _fmt(r.test_acc), _fmt(r.clip_threshold)])
    return logs


def _resolve_threads(cli_value: int | None, rc: RunConfig) -> int:
    env = os.environ.get(THREADS_ENV)
    if env is not None and env.strip():
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}", field=THREADS_ENV) from None
    else:
        n = cli_value if cli_value is not None else rc.threads
    if n < 1:
        raise ConfigError("thread count must be >= 1", field="threads")
    return n


def cmd_simulate(args) -> int:
    rc = load_run_config(args.config)
    threads = _resolve_threads(args.threads, rc)
    logs = simulate(rc, args.out, threads)
    print(dumps({"runs": len(logs), "out": str(args.out), "failed": sum(lg.failed for lg in logs)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# certify


def certified_bound(spec: AggregatorSpec, n: int, f: int):
    """Proven kappa bound for a pipeline, or None when none is known."""
    if not spec.use_nnm or spec.base.value not in CERTIFIED_BASES or spec.clip is ClipKind.STATIC:
        return None
    if spec.wlog_output_clip:
        return None
    k_low, k_nnm, inc = kappa_bounds(n, f)
    if spec.clip is ClipKind.ARC:
        if spec.clip_fraction_zeta != 2.0:
            return None
        return min(k_nnm + inc, 3.0 * k_nnm)
    return k_nnm


def cmd_certify(args) -> int:
    try:
        spec = AggregatorSpec.parse(args.agg)
    except ArcRobustError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], field="agg") from None
    n, f = args.n, args.f
    if not (0 <= f and 2 * f < n):
        raise ConfigError(f"need 0 <= f < n/2, got n={n}, f={f}", field="f")
    if args.dim < 1 or args.trials < 1:
        raise ConfigError("dim and trials must be positive", field="trials")
    if n > 20:
        raise ConfigError("certification enumerates subsets and supports n <= 20", field="n")
    bound = certified_bound(spec, n, f)
    gen = rng_stream(args.seed, 0).generator()
    worst, witness, violations = 0.0, [], []
    for t in range(args.trials):
        x = heavy_tailed_set(gen, n, args.dim)
        rep = empirical_kappa(spec, x, f)
        if rep.kappa_hat > worst or t == 0:
            worst, witness = rep.kappa_hat, list(rep.witness_subset)
        if bound is not None and rep.kappa_hat > bound + SLACK:
            violations.append({"trial": t, "kappa_hat": rep.kappa_hat, "witness": list(rep.witness_subset)})
    print(
        dumps(
            {
                "aggregator": str(spec),
                "n": n,
                "f": f,
                "dim": args.dim,
                "kappa_hat": worst,
                "bound": bound,
                "witness": witness,
                "trials": args.trials,
                "violations": len(violations),
                "violation_details": violations[:10],
            }
        )
    )
    return EXIT_VIOLATION if violations else EXIT_OK


# ---------------------------------------------------------------------------
# theory


def cmd_theory(args) -> int:
    out: dict = {}
    try:
        out["breakdown_point"] = breakdown_point(args.B)
    except ArcRobustError as exc:
        raise ConfigError(str(exc), field="B") from None
    if args.n is not None and args.f is not None:
        if args.G is not None:
            out["lower_bound_error"] = lower_bound_error(args.n, args.f, args.G, args.B)
        try:
            lo, up, inc = kappa_bounds(args.n, args.f)
            out["kappa_bounds"] = {"lower": lo, "nnm_upper": up, "arc_increment": inc}
        except ArcRobustError as exc:
            out["kappa_bounds"] = {"error": str(exc)}
        if args.G is not None:
            inputs = TheoryInputs(
                n=args.n,
                f=args.f,
                G=args.G,
                B=args.B,
                L=args.L,
                Delta_o=args.delta0,
                gamma=args.gamma,
                T=args.T,
                zeta_init=args.zeta,
                xi=args.xi,
                xi_o=args.xi0,
                rho=args.rho,
                upsilon=args.upsilon,
            )
            try:
                out["arc_bounds"] = arc_bounds(inputs)
            except ArcRobustError as exc:
                out["arc_bounds"] = {"error": str(exc)}
    if args.kappa is not None and args.G is not None and args.gamma is not None and args.T is not None:
        try:
            out["convergence_bound"] = convergence_bound(args.delta0, args.kappa, args.B, args.G, args.gamma, args.T)
        except ArcRobustError as exc:
            raise ConfigError(str(exc), field="gamma") from None
    print(dumps(out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# lemma-check


def _check_clause(which: str, args) -> dict:
    gen = rng_stream(args.seed, 0).generator()
    bad = []
    base = args.base if which == "b1" else None
    for t in range(args.trials):
        x, S, C, f = random_clip_instance(gen)
        rep = clip_inequality_check(x, S, C, base=base, f=f)
        clause = rep.clauses.get(which)
        if clause is not None and not clause.holds:
            bad.append({"trial": t, "lhs": clause.lhs, "rhs": clause.rhs})
    return {"which": which, "trials": args.trials, "violations": len(bad), "violation_details": bad[:10]}


def _check_c3(args) -> dict:
    agg = AggregatorSpec.parse(args.agg)
    if agg.clip is not ClipKind.ARC:
        raise ConfigError("growth check needs an ARC pipeline", field="agg")
    L = args.L
    results, bad = [], 0
    seeds = list(range(args.seed, args.seed + args.seeds))
    for s in seeds:
        cfg = TrainingConfig(
            n=args.n,
            f=args.f,
            steps=args.steps,
            lr=1.0 / (2.0 * L),
            momentum=0.0,
            batch_size=0,
            aggregator=agg,
            attack=AttackSpec.named(args.attack) if args.f > 0 else None,
            seed=s,
            model="quadratic",
            quad_dim=args.dim,
            quad_L=L,
        )
        rep = max_grad_growth_check(run(cfg))
        bad += not rep.passed
        results.append(
            {"seed": s, "passed": rep.passed, "max_ratio": rep.max_ratio, "bound": rep.bound,
             "first_violation_step": rep.first_violation_step}
        )
    return {"which": "c3", "aggregator": str(agg), "runs": results, "violations": bad}


def cmd_lemma_check(args) -> int:
    if args.trials < 1:
        raise ConfigError("trials must be positive", field="trials")
    try:
        report = _check_c3(args) if args.which == "c3" else _check_clause(args.which, args)
    except ConfigError:
        raise
    except ArcRobustError as exc:
        raise ConfigError(str(exc)) from None
    print(dumps(report))
    return EXIT_VIOLATION if report["violations"] else EXIT_OK


# ---------------------------------------------------------------------------
# dispatch


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arc-robust", description="Byzantine-robust aggregation with adaptive robust clipping.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run training experiments from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("certify", help="empirically certify an aggregator's robustness coefficient")
    c.add_argument("--agg", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--f", type=int, required=True)
    c.add_argument("--dim", type=int, default=4)
    c.add_argument("--trials", type=int, default=200)
    c.add_argument("--seed", type=int, default=1)
    c.set_defaults(func=cmd_certify)

    t = sub.add_parser("theory", help="evaluate closed-form bounds")
    t.add_argument("--n", type=int)
    t.add_argument("--f", type=int)
    t.add_argument("--G", type=float)
    t.add_argument("--B", type=float, required=True)
    t.add_argument("--L", type=float, default=1.0)
    t.add_argument("--delta0", type=float, default=1.0)
    t.add_argument("--zeta", type=float, default=1.0)
    t.add_argument("--xi", type=float, default=0.5)
    t.add_argument("--xi0", type=float, default=0.5)
    t.add_argument("--rho", type=float)
    t.add_argument("--upsilon", type=float)
    t.add_argument("--gamma", type=float)
    t.add_argument("--T", type=int)
    t.add_argument("--kappa", type=float)
    t.set_defaults(func=cmd_theory)

    lc = sub.add_parser("lemma-check", help="randomized check of a clipping or growth inequality")
    lc.add_argument("--which", choices=["b1", "b2", "b3", "b4", "c3"], required=True)
    lc.add_argument("--trials", type=int, default=1000)
    lc.add_argument("--seed", type=int, default=1)
    lc.add_argument("--base", choices=list(CERTIFIED_BASES), default="cwtm")
    lc.add_argument("--agg", default="cwtm+nnm+arc+wlog")
    lc.add_argument("--n", type=int, default=11)
    lc.add_argument("--f", type=int, default=1)
    lc.add_argument("--attack", default="FOE")
    lc.add_argument("--dim", type=int, default=10)
    lc.add_argument("--L", type=float, default=1.0)
    lc.add_argument("--steps", type=int, default=200)
    lc.add_argument("--seeds", type=int, default=5)
    lc.set_defaults(func=cmd_lemma_check)
    return p


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if args.command == "simulate":
            print(config_schema_text(), file=sys.stderr)
        return EXIT_CONFIG
    except ArcRobustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    raise SystemExit(dispatch())


if __name__ == "__main__":
    main()
