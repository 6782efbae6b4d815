"""Command-line front end.

Subcommands: ``simulate``, ``fit``, ``test`` and ``reproduce``. Exit codes
are 0 on success, 2 for usage errors, 3 for data errors and 4 for numerical
failures. Every failure prints one ``error[<kind>]: <reason>`` line to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .dgp import PRESETS, DGPConfig, child_seed, gen_dataset, preset
from .fmtest import run_fm_vs_mefm_test
from .harness import TASKS, default_jobs, run_replications
from .model import fit_mefm
from .reproduce import TARGETS, run_target

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _theta(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"theta must lie in (0, 1), got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mefm", description="Main effects matrix factor model toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte Carlo replications of a simulation setting")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--setting", help=f"named setting: {', '.join(PRESETS)}")
    src.add_argument("--config", type=Path, help="key=value configuration file")
    s.add_argument("--p", type=_positive)
    s.add_argument("--q", type=_positive)
    s.add_argument("--T", type=_positive)
    s.add_argument("--tfactor", type=float, help="set T = round(tfactor * p * q)")
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config field")
    s.add_argument("--tasks", default="fit,ranks", help=f"comma-separated subset of {','.join(TASKS)}")
    s.add_argument("--theta", type=_theta, default=0.95)
    s.add_argument("--reps", type=_positive, default=100)
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--out", type=Path)
    s.add_argument("--export-series", type=Path, metavar="FILE", help="write replication 0's data as a series CSV")
    s.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")

    f = sub.add_parser("fit", help="fit the model to a series CSV")
    f.add_argument("--input", type=Path, required=True)
    f.add_argument("--kr", type=_positive)
    f.add_argument("--kc", type=_positive)
    f.add_argument("--auto-rank", action="store_true")
    f.add_argument("--out", type=Path, required=True)

    t = sub.add_parser("test", help="test whether a plain factor model suffices")
    t.add_argument("--input", type=Path, required=True)
    t.add_argument("--theta", type=_theta, default=0.95)
    t.add_argument("--kr", type=_positive)
    t.add_argument("--kc", type=_positive)
    t.add_argument("--out", type=Path, required=True)

    r = sub.add_parser("reproduce", help="desk-scale rerun of a published table or figure")
    r.add_argument("--target", required=True, choices=sorted(TARGETS))
    r.add_argument("--reps", type=_positive, default=100)
    r.add_argument("--seed", type=_seed, default=0)
    r.add_argument("--out", type=Path, required=True)
    return parser


# -- simulate ------------------------------------------------------------------


def resolve_config(args) -> DGPConfig:
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        overrides[key] = value
    for key in ("p", "q", "T"):
        if getattr(args, key) is not None:
            overrides[key] = str(getattr(args, key))

    if args.config is not None:
        base = DGPConfig.from_text(args.config.read_text(encoding="utf-8"))
    elif args.setting is not None:
        if args.setting not in PRESETS:
            raise UsageError(f"unknown setting {args.setting!r}")
        base = preset(args.setting)
    else:
        raise UsageError("one of --setting or --config is required")
    text = base.to_text() + "".join(f"{k}={v}\n" for k, v in overrides.items())
    cfg = DGPConfig.from_text(text)
    if args.tfactor is not None:
        cfg = cfg.replace(T=int(round(args.tfactor * cfg.p * cfg.q)))
    return cfg.replace(seed=args.seed)


def cmd_simulate(args) -> int:
    cfg = resolve_config(args)
    if args.dump_config:
        sys.stdout.write(cfg.to_text())
        return EXIT_OK
    if args.out is None:
        raise UsageError("--out is required")
    tasks = tuple(t.strip() for t in args.tasks.split(",") if t.strip())
    if not tasks or set(tasks) - set(TASKS):
        raise UsageError(f"--tasks must be a subset of {','.join(TASKS)}")

    name = args.setting or "custom"
    kwargs = {"theta": args.theta} if "test" in tasks else {}
    summary = run_replications(cfg, args.reps, tasks, args.seed, name=name, n_jobs=default_jobs(), **kwargs)

    out = args.out
    names = list(summary.metrics)
    rows = [
        {"setting": name, "rep": r, "seed": int(s), **{k: summary.metrics[k][r] for k in names}}
        for r, s in enumerate(summary.seeds)
    ]
    io.write_rows_csv(out / "metrics.csv", rows, ["setting", "rep", "seed", *names])

    agg = [
        {"setting": name, "metric": k, "n": int(np.count_nonzero(~np.isnan(summary.metrics[k]))), **v}
        for k, v in summary.aggregates.items()
    ]
    for (kr, kc), freq in summary.rank_frequencies.items():
        agg.append({"setting": name, "metric": f"freq_{kr}_{kc}", "n": summary.reps, "mean": freq})
    io.write_rows_csv(out / "aggregate.csv", agg, ["setting", "metric", "n", "mean", "sd", "median"])
    if summary.rank_frequencies:
        freq_rows = [{"kr": a, "kc": b, "frequency": f} for (a, b), f in summary.rank_frequencies.items()]
        io.write_rows_csv(out / "rank_frequencies.csv", freq_rows, ["kr", "kc", "frequency"])
    io.atomic_write_text(out / "config.txt", cfg.to_text())

    if args.export_series is not None:
        Y, _ = gen_dataset(cfg.replace(seed=child_seed(args.seed, 0)))
        io.write_series_csv(args.export_series, Y)
    print(f"{name}: {summary.reps} replications ({summary.failures} failed) written to {out}")
    return EXIT_OK if summary.reps > 0 else EXIT_NUMERIC


# -- fit / test --------------------------------------------------------------------


def _ranks(args) -> Optional[tuple[int, int]]:
    given = (args.kr is not None, args.kc is not None)
    if any(given) and not all(given):
        raise UsageError("--kr and --kc must be given together")
    if all(given) and getattr(args, "auto_rank", False):
        raise UsageError("--auto-rank conflicts with --kr/--kc")
    return (args.kr, args.kc) if all(given) else None


def cmd_fit(args) -> int:
    ranks = _ranks(args)
    Y = io.read_series_csv(args.input)
    T, p, q = Y.shape
    fit = fit_mefm(Y, *(ranks or ("auto", "auto")))
    out = args.out
    eff = fit.effects
    io.write_rows_csv(out / "mu.csv", ({"t": t + 1, "mu": eff.mu[t]} for t in range(T)), ["t", "mu"])
    io.write_rows_csv(
        out / "alpha.csv",
        ({"t": t + 1, "i": i + 1, "alpha": eff.alpha[t, i]} for t in range(T) for i in range(p)),
        ["t", "i", "alpha"],
    )
    io.write_rows_csv(
        out / "beta.csv",
        ({"t": t + 1, "j": j + 1, "beta": eff.beta[t, j]} for t in range(T) for j in range(q)),
        ["t", "j", "beta"],
    )
    for side, Q in (("r", fit.Qr), ("c", fit.Qc)):
        cols = [f"q{k + 1}" for k in range(Q.shape[1])]
        rows = ({"index": i + 1, **dict(zip(cols, Q[i]))} for i in range(Q.shape[0]))
        io.write_rows_csv(out / f"loadings_{side}.csv", rows, ["index", *cols])

    eig_rows = []
    if fit.rank_selection is not None:
        sel = fit.rank_selection
        for side, vals in (("row", sel.eigenvalues_row), ("column", sel.eigenvalues_col)):
            eig_rows.extend({"side": side, "index": k + 1, "eigenvalue": v} for k, v in enumerate(vals))
    else:
        for side, vals in (("row", fit.Dr), ("column", fit.Dc)):
            eig_rows.extend({"side": side, "index": k + 1, "eigenvalue": v} for k, v in enumerate(vals))
    io.write_rows_csv(out / "eigvals.csv", eig_rows, ["side", "index", "eigenvalue"])

    sq = fit.E**2
    res_rows = (
        {
            "t": t + 1,
            "residual_ss": float(sq[t].sum()),
            "max_row_ms": float(sq[t].sum(axis=1).max() / q),
            "max_col_ms": float(sq[t].sum(axis=0).max() / p),
        }
        for t in range(T)
    )
    io.write_rows_csv(out / "residual_summary.csv", res_rows, ["t", "residual_ss", "max_row_ms", "max_col_ms"])
    mode = "selected" if ranks is None else "given"
    print(f"kr={fit.kr} kc={fit.kc} ({mode})")
    return EXIT_OK


def cmd_test(args) -> int:
    ranks = _ranks(args)
    Y = io.read_series_csv(args.input)
    res = run_fm_vs_mefm_test(Y, theta=args.theta, ranks=ranks)
    rows = (
        {
            "t": t + 1,
            "x_alpha": res.x_alpha[t],
            "y_alpha": res.y_alpha[t],
            "x_beta": res.x_beta[t],
            "y_beta": res.y_beta[t],
        }
        for t in range(len(res.x_alpha))
    )
    io.write_rows_csv(args.out / "stats.csv", rows, ["t", "x_alpha", "y_alpha", "x_beta", "y_beta"])
    summary = {
        "theta": res.theta, "kr": res.kr, "kc": res.kc, "lr": res.lr, "lc": res.lc,
        "threshold_alpha": res.q_x_alpha, "threshold_beta": res.q_x_beta,
        "reject_alpha": res.reject_alpha, "reject_beta": res.reject_beta,
    }
    io.write_rows_csv(args.out / "summary.csv", [summary], list(summary))
    print(f"kr={res.kr} kc={res.kc} reject_alpha={res.reject_alpha:.4f} reject_beta={res.reject_beta:.4f}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    rows, note = run_target(args.target, args.reps, args.seed, n_jobs=default_jobs())
    io.write_rows_csv(args.out / f"{args.target}.csv", rows)
    io.atomic_write_text(args.out / "README.md", note)
    print(f"{args.target}: {len(rows)} rows written to {args.out}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "test": cmd_test, "reproduce": cmd_reproduce}


def _fail(kind: str, code: int, exc) -> int:
    reason = " ".join(str(exc).split()) or type(exc).__name__
    print(f"error[{kind}]: {reason}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail("numeric", EXIT_NUMERIC, exc)
    except io.SeriesFormatError as exc:
        return _fail("data", EXIT_DATA, exc)
    except (ValueError, KeyError, OSError) as exc:
        return _fail("data", EXIT_DATA, exc)


if __name__ == "__main__":
    sys.exit(main())
