"""Command-line driver.

Subcommands: ``train-phi`` fits the interpretability model from survey
data, ``evolve`` runs batches of seeded evolution experiments, ``compare``
builds the phi-versus-size comparison report from two run directories,
and ``gen-data`` materializes the synthetic benchmark CSVs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data_io import (
    DatasetError,
    SYNTHETIC_NAMES,
    apply_split,
    export_csv,
    generate_synthetic,
    load_bundled,
    load_csv,
    read_config_json,
    run_dir,
    split,
    standardize,
    write_config_json,
    write_trace_csv,
)
from .moea import EvolutionConfig, evolve
from .phi_features import DEFAULT_COEFFICIENTS, PhiCoefficients, load_coefficients
from .phi_trainer import (
    ANSWER_HEADER,
    SAMPLE_HEADER,
    bin_weights,
    coefficients_json,
    load_answers_csv,
    load_samples_csv,
    loo_cross_validate,
    prepare_samples,
)
from .stats_eval import (
    comparison_report,
    read_front_csv,
    select_tau,
    validation_front,
    write_front_csv,
)

PROFILES = {
    "paper": {"pop": 1000, "gens": 100, "runs": 50},
    "desk": {"pop": 500, "gens": 50, "runs": 10},
}


def _worker_budget(args) -> int:
    if args.workers is not None:
        return max(1, args.workers)
    env = os.environ.get("NSGP_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SystemExit(f"NSGP_WORKERS is not an integer: {env!r}")
    return 1


def _load_dataset(spec: str):
    if spec in SYNTHETIC_NAMES:
        return load_bundled(spec)
    return load_csv(spec)


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    names = SYNTHETIC_NAMES if args.name == "all" else (args.name,)
    for i, name in enumerate(names):
        ds = generate_synthetic(name, np.random.default_rng(args.seed + i))
        path = out / f"{name}.csv"
        export_csv(ds, path)
        print(f"wrote {path}  (N={ds.n_rows}, D={ds.n_features})")
    return 0


def cmd_train_phi(args) -> int:
    path = Path(args.answers)
    with open(path) as fh:
        header = [h.strip() for h in fh.readline().strip().split(",")]
    if header == ANSWER_HEADER:
        samples = prepare_samples(load_answers_csv(path))
    elif header == SAMPLE_HEADER:
        raw = load_samples_csv(path)
        ws = bin_weights(np.array([s.label for s in raw]))
        from dataclasses import replace

        samples = [replace(s, weight=float(w)) for s, w in zip(raw, ws)]
    else:
        raise SystemExit(
            f"{path}: header matches neither the answer nor the sample schema"
        )
    if not samples:
        raise SystemExit(f"{path}: no usable samples (all groups below 10 answers?)")

    weights = np.array([s.weight for s in samples])
    result = loo_cross_validate(samples, weights, seed=args.seed)
    payload = coefficients_json(result)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    print(f"samples: {len(samples)}")
    print(
        f"best hyper: alpha={result.best_hyper.alpha} "
        f"l1_ratio={result.best_hyper.l1_ratio}"
    )
    print(f"weighted R2 train={result.r2_train:.3f} test={result.r2_test:.3f}")
    print(f"weighted MAE: {result.mae:.1f} (percent points)")
    b, w_l, w_no, w_nao, w_naoc = result.coefficients
    print(
        f"model: {b:.1f} {w_l:+.2f}*l {w_no:+.2f}*n_o "
        f"{w_nao:+.2f}*n_nao {w_naoc:+.2f}*n_naoc"
    )
    print(f"wrote {out}")
    return 0


def _execute_run(payload: dict) -> dict:
    """One seeded run: split, standardize, evolve, archive. Used by the
    process pool, so everything in the payload must be picklable."""
    ds = _load_dataset(payload["dataset"])
    seed = payload["seed"]
    idx = split(ds.n_rows, seed)
    std, _ = standardize(ds, idx.train)
    X_tr, y_tr, X_val, y_val, X_te, y_te = apply_split(std, idx)

    coeffs = (
        PhiCoefficients(**payload["coeffs"])
        if payload["coeffs"]
        else DEFAULT_COEFFICIENTS
    )
    config = EvolutionConfig(
        pop_size=payload["pop"],
        generations=payload["gens"],
        mode=payload["mode"],
        seed=seed,
    )
    pop, trace = evolve(
        config, X_tr, y_tr, phi_coeffs=coeffs, n_workers=payload["eval_workers"]
    )
    front = validation_front(
        pop, X_val, y_val, X_te, y_te, float(y_tr.var()),
        phi_coeffs=coeffs, source_run=seed, mode=payload["mode"],
    )

    out = run_dir(payload["out"], ds.name, payload["mode"], seed)
    write_front_csv(front, out / "front.csv")
    write_trace_csv(trace, out / "trace.csv")
    selections = {
        str(tau): {
            "tree": m.tree_text,
            "err_train": m.err_train,
            "err_val": m.err_val,
            "err_test": m.err_test,
            "phi_objective": m.phi_obj,
            "l": m.features.l,
        }
        for tau in payload["taus"]
        for m in [select_tau(front, tau)]
    }
    write_config_json(
        {
            "version": __version__,
            "dataset": payload["dataset"],
            "mode": payload["mode"],
            "pop_size": payload["pop"],
            "generations": payload["gens"],
            "base_seed": payload["base_seed"],
            "seed": seed,
            "taus": list(payload["taus"]),
            "coefficients": coeffs.to_dict(),
            "workers": payload["workers"],
            "tau_selection": selections,
        },
        out / "config.json",
    )
    return {
        "seed": seed,
        "front_size": len(front),
        "best_train_nmse": min(m.err_train for m in front.members),
        "dir": str(out),
    }


def cmd_evolve(args) -> int:
    profile = PROFILES[args.profile]
    pop = args.pop if args.pop is not None else profile["pop"]
    gens = args.gens if args.gens is not None else profile["gens"]
    runs = args.runs if args.runs is not None else profile["runs"]
    taus = _parse_taus(args.tau)
    workers = _worker_budget(args)

    try:
        ds = _load_dataset(args.dataset)
    except (DatasetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    coeffs = load_coefficients(args.coeffs) if args.coeffs else None
    payloads = [
        {
            "dataset": args.dataset,
            "mode": args.mode,
            "pop": pop,
            "gens": gens,
            "seed": args.seed + r,
            "base_seed": args.seed,
            "taus": taus,
            "coeffs": coeffs.to_dict() if coeffs else None,
            "out": args.out,
            "workers": workers,
            # within-run evaluation threads only make sense when the budget
            # is not already spent on concurrent runs
            "eval_workers": workers if runs == 1 else 1,
        }
        for r in range(runs)
    ]

    print(
        f"dataset={ds.name} N={ds.n_rows} D={ds.n_features} mode={args.mode} "
        f"pop={pop} gens={gens} runs={runs} seed={args.seed} workers={workers}"
    )
    if workers > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute_run, payloads))
    else:
        results = [_execute_run(p) for p in payloads]
    for res in results:
        print(
            f"seed {res['seed']}: |F|={res['front_size']} "
            f"best train NMSE={res['best_train_nmse']:.4g} -> {res['dir']}"
        )
    return 0


def _parse_taus(text: str) -> list[int]:
    try:
        taus = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise SystemExit(f"bad tau list: {text!r}")
    if not taus or any(not 1 <= t <= 100 for t in taus):
        raise SystemExit(f"tau values must be in 1..100: {text!r}")
    return taus


def _load_run_dir(root: Path, mode: str) -> dict:
    fronts = {}
    for sub in sorted(root.iterdir()):
        front_path = sub / "front.csv"
        if not sub.is_dir() or not front_path.exists():
            continue
        cfg = read_config_json(sub / "config.json")
        seed = int(cfg["seed"])
        fronts[seed] = read_front_csv(front_path, source_run=seed, mode=mode)
    if not fronts:
        raise SystemExit(f"no run artifacts under {root}")
    return fronts


def cmd_compare(args) -> int:
    taus = _parse_taus(args.tau)
    fronts_phi = _load_run_dir(Path(args.phi), "phi")
    fronts_size = _load_run_dir(Path(args.size), "size")
    try:
        report = comparison_report(
            fronts_phi, fronts_size, taus, alpha=args.alpha, labels=("phi", "size")
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(f"paired runs: {report['n_runs']}   alpha={report['alpha']}")
    head = (
        f"{'tau':>4} | {'phi train':>10} {'phi test':>10} {'phi':>6} {'l':>4} {'|F|':>4}"
        f" | {'size train':>10} {'size test':>10} {'phi':>6} {'l':>4} {'|F|':>4}"
        f" | {'p_train':>8} {'p_test':>8}"
    )
    print(head)
    print("-" * len(head))
    for row in report["rows"]:
        a = row["phi"]
        b = row["size"]
        mark_tr = "*" if row["significant_train"] else " "
        mark_te = "*" if row["significant_test"] else " "
        print(
            f"{row['tau']:>4} | {a['median_train_nmse']:>10.3f} {a['median_test_nmse']:>10.3f}"
            f" {a['median_phi']:>6.1f} {a['median_l']:>4.0f} {a['median_front_size']:>4.0f}"
            f" | {b['median_train_nmse']:>10.3f} {b['median_test_nmse']:>10.3f}"
            f" {b['median_phi']:>6.1f} {b['median_l']:>4.0f} {b['median_front_size']:>4.0f}"
            f" | {row['p_train']:>7.4f}{mark_tr} {row['p_test']:>7.4f}{mark_te}"
        )
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsgp",
        description="Bi-objective symbolic regression with a learned interpretability objective",
    )
    parser.add_argument("--version", action="version", version=f"nsgp {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write the synthetic benchmark CSVs")
    p.add_argument("--name", default="all", choices=SYNTHETIC_NAMES + ("all",))
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default="data")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-phi", help="fit the interpretability model from survey data")
    p.add_argument("answers", help="answer CSV (per answer) or pre-merged sample CSV")
    p.add_argument("--out", default="phi_coefficients.json")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_phi)

    p = sub.add_parser("evolve", help="run seeded evolution experiments")
    p.add_argument("--dataset", required=True, help=f"CSV path or one of {SYNTHETIC_NAMES}")
    p.add_argument("--mode", choices=("phi", "size"), default="phi")
    p.add_argument("--profile", choices=tuple(PROFILES), default="paper")
    p.add_argument("--pop", type=int, default=None)
    p.add_argument("--gens", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tau", default="5,25,50")
    p.add_argument("--coeffs", default=None, help="coefficients JSON from train-phi")
    p.add_argument("--workers", type=int, default=None, help="fallback: NSGP_WORKERS")
    p.add_argument("--out", default="runs")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("compare", help="phi-versus-size report from two run directories")
    p.add_argument("--phi", required=True, help="directory of phi-mode runs")
    p.add_argument("--size", required=True, help="directory of size-mode runs")
    p.add_argument("--tau", default="5,25,50")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", default=None, help="report JSON path")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
