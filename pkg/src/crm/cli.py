"""``crm`` command line: run, sweep, ensemble and verify experiments.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 verification
failure (including a bound matrix that is not a pseudometric).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import analysis
from .discrepancy import make_bound
from .ensemble import ensemble_header, run_ensemble
from .errors import ConfigError, CRMError, NotPseudometricError
from .macro import EpsilonSchedule, Macro, run, write_json, write_trace_csv
from .process import (Observation, ProcessDescriptor, generate, ingest_csv, swapped_regimes,
                      symmetric_chain)
from .subroutine import ConversionSpec, LearnerSpec, default_hypotheses

log = logging.getLogger("crm")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VERIFY = 0, 2, 3, 4
PROCESS_ALIASES = {"markov": "markov_label", "regime": "regime_drift"}


@dataclass
class RunConfig:
    process: str = "markov"
    states: int = 2
    stay: float = 0.8
    transition: str | None = None
    start: int = 0
    class_probs: str | None = None
    feature_dim: int = 0
    separation: float = 2.0
    noise: float = 1.0
    period: int = 500
    csv: str | None = None
    label_col: str = "y"
    feature_cols: str = ""
    chunk_key: str | None = None
    steps: int = 1000
    bound: str = "markov-indicator"
    window: int = 5
    matrix: str | None = None
    no_penalty: bool = False
    subroutine: str = "gnb"
    lr: float = 0.1
    conversion: str = "last"
    delta: float = 0.05
    score_loss: str = "zero_one"
    epsilon: float | None = None
    schedule: str | None = None
    grid: str | None = None
    combiner: str = "ftl"
    eta: float | None = None
    sample: bool = False
    no_warm_start: bool = False
    seed: int = 0
    out: str | None = None
    summary: str | None = None
    out_dir: str = "."
    diagnostics: bool = False
    greedy: bool = False

    @classmethod
    def from_namespace(cls, ns) -> "RunConfig":
        return cls(**{f.name: getattr(ns, f.name) for f in fields(cls) if hasattr(ns, f.name)})

    def thresholds_set(self):
        return [name for name in ("epsilon", "schedule", "grid") if getattr(self, name) is not None]


def _floats(text, name):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--{name.replace('_', '-')}: expected comma-separated numbers, got {text!r}") from None


def parse_schedule(text) -> EpsilonSchedule:
    vals = _floats(text, "schedule")
    if not 1 <= len(vals) <= 2:
        raise ConfigError("--schedule takes EPS0 or EPS0,GAMMA")
    return EpsilonSchedule("decaying", *vals)


def parse_grid(text) -> list[float]:
    grid = _floats(text, "grid")
    if not grid:
        raise ConfigError("--grid is empty")
    return grid


def build_sequence(cfg: RunConfig):
    kind = PROCESS_ALIASES.get(cfg.process, cfg.process)
    K, d = cfg.states, cfg.feature_dim
    if kind == "csv":
        if not cfg.csv:
            raise ConfigError("--process csv needs --csv PATH")
        schema = {"label": cfg.label_col, "features": [c for c in cfg.feature_cols.split(",") if c]}
        seq = ingest_csv(cfg.csv, schema, cfg.chunk_key)
        return seq[: cfg.steps] if cfg.steps else seq
    params: dict = {"noise": cfg.noise}
    if cfg.class_probs:
        params["class_probs"] = _floats(cfg.class_probs, "class_probs")
    if kind == "markov_label":
        if cfg.transition:
            P = [_floats(row, "transition") for row in cfg.transition.split(";")]
        else:
            P = symmetric_chain(K, cfg.stay)
        params.update(transition=P, start=cfg.start)
        if d:
            params["encode_label"] = True
    elif kind == "iid":
        if d:
            params["means"] = cfg.separation * np.arange(K)[:, None] * np.ones((1, d))
    elif kind == "regime_drift":
        if K != 2:
            raise ConfigError("the regime process swaps two class means; use --states 2")
        params.update(means=swapped_regimes(cfg.separation, d), period=cfg.period)
    else:
        raise ConfigError(f"unknown process {cfg.process!r}")
    if cfg.steps <= 0:
        raise ConfigError("--steps must be positive")
    return generate(ProcessDescriptor(kind, params, K, d, cfg.seed), cfg.steps)


def feature_dim_of(seq):
    return seq[0].features.shape[0] if isinstance(seq[0], Observation) else seq[0].members[0].features.shape[0]


def build_macro(cfg: RunConfig, threshold, subroutine=None, n_features=0, matrix=None) -> Macro:
    bound = make_bound(cfg.bound, cfg.window, cfg.states, matrix=matrix, penalty=not cfg.no_penalty)
    learner = LearnerSpec(subroutine or cfg.subroutine, n_features, cfg.states, cfg.lr,
                          default_hypotheses(cfg.states))
    conversion = ConversionSpec(cfg.conversion, cfg.delta, cfg.score_loss)
    return Macro(bound, learner, threshold, conversion,
                 warm_start=not cfg.no_warm_start, diagnostics=cfg.diagnostics)


def _load_matrix(cfg):
    if cfg.bound not in ("matrix", "precomputed_matrix"):
        return None
    if not cfg.matrix:
        raise ConfigError("--bound matrix needs --matrix PATH")
    return analysis.load_matrix_csv(cfg.matrix)


def _emit(obj, path):
    if path:
        write_json(obj, path)
    else:
        json.dump(obj, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


def _metadata(cfg, **extra):
    meta = {"bound": cfg.bound, "subroutine": cfg.subroutine, "conversion": cfg.conversion,
            "seed": cfg.seed, "process": cfg.process}
    meta.update(extra)
    return meta


def cmd_run(cfg: RunConfig) -> int:
    chosen = cfg.thresholds_set()
    if chosen not in (["epsilon"], ["schedule"]):
        raise ConfigError("run needs exactly one of --epsilon or --schedule (use sweep/ensemble for --grid)")
    threshold = cfg.epsilon if cfg.epsilon is not None else parse_schedule(cfg.schedule)
    matrix = _load_matrix(cfg)
    seq = build_sequence(cfg)
    log.info("run: %d steps, bound=%s, subroutine=%s", len(seq), cfg.bound, cfg.subroutine)
    result = run(seq, build_macro(cfg, threshold, n_features=feature_dim_of(seq), matrix=matrix))
    result.summary.update(_metadata(cfg, threshold=cfg.epsilon, schedule=cfg.schedule))
    if cfg.out:
        write_trace_csv(result.traces, cfg.out)
    _emit(result.summary, cfg.summary)
    return EXIT_OK


def _grid_only(cfg, command):
    if cfg.thresholds_set() != ["grid"]:
        raise ConfigError(f"{command} needs --grid and no --epsilon/--schedule")
    return parse_grid(cfg.grid)


def cmd_sweep(cfg: RunConfig) -> int:
    grid = _grid_only(cfg, "sweep")
    subs = [s for s in cfg.subroutine.split(",") if s]
    matrix = _load_matrix(cfg)
    seq = build_sequence(cfg)
    d = feature_dim_of(seq)
    os.makedirs(cfg.out_dir, exist_ok=True)
    rates = {}
    for sub in subs:
        for i, eps in enumerate(grid):
            log.info("sweep: %s at threshold %g", sub, eps)
            result = run(seq, build_macro(cfg, eps, sub, d, matrix))
            result.summary.update(_metadata(cfg, threshold=eps, subroutine=sub))
            stem = os.path.join(cfg.out_dir, f"run_{i}_{sub}")
            write_trace_csv(result.traces, stem + ".csv")
            write_json(result.summary, stem + ".json")
            rates[(eps, sub)] = result.summary["error_rate"]
    analysis.write_error_table(rates, os.path.join(cfg.out_dir, "error_table.csv"))
    _emit({"thresholds": grid, "subroutines": subs,
           "error_rates": {f"{k[1]}@{k[0]!r}": v for k, v in rates.items()}}, cfg.summary)
    return EXIT_OK


def cmd_ensemble(cfg: RunConfig) -> int:
    grid = _grid_only(cfg, "ensemble")
    if cfg.combiner not in ("ftl", "ewa"):
        raise ConfigError("--combiner must be ftl or ewa")
    matrix = _load_matrix(cfg)
    seq = build_sequence(cfg)
    d = feature_dim_of(seq)
    members = [build_macro(cfg, eps, n_features=d, matrix=matrix) for eps in grid]
    result = run_ensemble(seq, members, cfg.combiner, cfg.eta, cfg.sample, cfg.seed, cfg.states)
    result.summary.update(_metadata(cfg))
    result.summary["member_summaries"] = [r.summary for r in result.members]
    if cfg.out:
        write_trace_csv(None, cfg.out, ensemble_header(cfg.combiner), result.rows())
    _emit(result.summary, cfg.summary)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.thresholds_set() != ["epsilon"]:
        raise ConfigError("verify needs a fixed --epsilon")
    matrix = _load_matrix(cfg)
    if matrix is not None:
        report = analysis.validate_pseudometric(matrix)
        if not report.valid:
            raise NotPseudometricError(report)
        cfg.steps = min(cfg.steps, matrix.shape[0]) if cfg.steps else matrix.shape[0]
    mode = "greedy" if cfg.greedy else "exact"
    if mode == "exact" and cfg.steps > analysis.EXACT_LIMIT:
        raise ConfigError(f"exact verification allows at most {analysis.EXACT_LIMIT} steps; pass --greedy")
    seq = build_sequence(cfg)
    macro = build_macro(cfg, cfg.epsilon, n_features=feature_dim_of(seq), matrix=matrix)
    result = run(seq, macro)
    D = macro.bound.matrix(len(seq), cfg.epsilon)
    check = analysis.verify_covering_sandwich(result.summary["pool_size"], D, cfg.epsilon, mode)
    _emit({**check.as_dict(), "epsilon": cfg.epsilon, "n": len(seq)}, cfg.summary)
    return EXIT_OK if check.passed else EXIT_VERIFY


def _add_common(p):
    g = p.add_argument_group("process")
    g.add_argument("--config", help="JSON file of RunConfig fields; flags override it")
    g.add_argument("--process", default="markov", choices=["markov", "iid", "regime", "csv"],
                   help="data source")
    g.add_argument("--states", type=int, default=2, help="number of classes K")
    g.add_argument("--stay", type=float, default=0.8, help="stay probability of the symmetric chain")
    g.add_argument("--transition", help="explicit transition matrix, rows ';'-separated")
    g.add_argument("--start", type=int, default=0, help="initial chain state")
    g.add_argument("--class-probs", help="comma-separated class probabilities (iid/regime)")
    g.add_argument("--feature-dim", type=int, default=0, help="feature dimension d")
    g.add_argument("--separation", type=float, default=2.0, help="distance between class means")
    g.add_argument("--noise", type=float, default=1.0, help="feature noise standard deviation")
    g.add_argument("--period", type=int, default=500, help="regime switch period")
    g.add_argument("--csv", help="input CSV for --process csv")
    g.add_argument("--label-col", default="y", help="label column of the CSV")
    g.add_argument("--feature-cols", default="", help="comma-separated feature columns of the CSV")
    g.add_argument("--chunk-key", help="CSV column grouping rows into one step")
    g.add_argument("--steps", type=int, default=1000, help="number of steps to generate")
    g.add_argument("--seed", type=int, default=0, help="random seed")

    g = p.add_argument_group("bound")
    g.add_argument("--bound", default="markov-indicator",
                   choices=["zero", "markov-indicator", "d1", "d2", "aligned", "matrix"],
                   help="discrepancy bound")
    g.add_argument("--window", type=int, default=5, help="history window length")
    g.add_argument("--matrix", help="CSV bound matrix for --bound matrix")
    g.add_argument("--no-penalty", action="store_true", default=False,
                   help="disable the missing-class penalty of the d1 bound")

    g = p.add_argument_group("subroutine")
    g.add_argument("--subroutine", default="gnb", help="gnb, sgd or erm (sweep: comma list)")
    g.add_argument("--lr", type=float, default=0.1, help="SGD learning rate")
    g.add_argument("--conversion", default="last", choices=["last", "averaging", "score"],
                   help="online-to-batch conversion")
    g.add_argument("--delta", type=float, default=0.05, help="confidence of the score conversion")
    g.add_argument("--score-loss", default="zero_one", choices=["zero_one", "logistic"],
                   help="loss used to score snapshots")
    g.add_argument("--no-warm-start", action="store_true", default=False,
                   help="start new subroutines from scratch")
    g.add_argument("--diagnostics", action="store_true", default=False,
                   help="retain per-subroutine update steps")

    g = p.add_argument_group("threshold")
    g.add_argument("--epsilon", type=float, default=None, help="fixed threshold")
    g.add_argument("--schedule", default=None, help="decaying threshold EPS0[,GAMMA] (gamma 0.25)")
    g.add_argument("--grid", default=None, help="comma-separated thresholds")
    g.add_argument("--combiner", default="ftl", choices=["ftl", "ewa"], help="ensemble combiner")
    g.add_argument("--eta", type=float, default=None,
                   help="EWA learning rate (default sqrt(8 ln K / n))")
    g.add_argument("--sample", action="store_true", default=False,
                   help="EWA samples one member instead of voting")

    g = p.add_argument_group("output")
    g.add_argument("--out", help="trace CSV path")
    g.add_argument("--summary", help="summary JSON path (stdout when omitted)")
    g.add_argument("--out-dir", default=".", help="directory for sweep outputs")
    g.add_argument("--greedy", action="store_true", default=False,
                   help="verify with greedy covers (upper side only)")


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "ensemble": cmd_ensemble, "verify": cmd_verify}
HELP = {
    "run": "one MACRO run with a fixed or decaying threshold",
    "sweep": "one run per threshold (and subroutine), plus an error table",
    "ensemble": "parallel runs over a threshold grid combined by FTL or EWA",
    "verify": "check the pool-size covering-number sandwich",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name],
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        _add_common(p)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    with open(known.config, encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise ConfigError("--config must hold a JSON object")
    names = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(config) - names)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for action in parser._subparsers._group_actions:
        for p in action.choices.values():
            p.set_defaults(**config)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        try:
            ns = parser.parse_args(argv)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[ns.command](RunConfig.from_namespace(ns))
    except NotPseudometricError as exc:
        print(f"crm: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (CRMError, json.JSONDecodeError) as exc:
        print(f"crm: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"crm: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
