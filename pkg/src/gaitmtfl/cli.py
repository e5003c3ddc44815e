"""Command-line front end.

Subcommands: ``synth`` (generate synthetic data), ``extract`` (trials ->
feature CSV), ``train`` (feature CSV -> model JSON), ``grid-search``
(train with grid-tuned hyperparameters), ``evaluate`` (feature CSV ->
report files), ``report`` (model JSON -> importance files).

Every command writes a ``run.json`` manifest (full config + seed +
version) next to its outputs; identical flags and seed reproduce outputs
byte for byte on one machine. Exit codes: 0 success, 1 runtime/data
failure, 2 usage error (including unreadable inputs).
"""

import argparse
import json
import os
import pathlib
import sys

import numpy as np

from . import __version__
from .data import load_trial, read_subjects_csv, write_subjects_csv
from .errors import GaitError
from .evaluation import (
    CANONICAL_TASKS,
    DEFAULT_GRID,
    METHODS,
    MethodSpec,
    fit_method,
    grid_search,
    importance_report,
    leave_one_subject_out_eval,
    make_tasks,
    random_partition_eval,
)
from .features import FEATURE_NAMES, load_dataset, save_dataset
from .pipeline import ExtractionConfig, extract_many
from .reporting import render_json, write_eval_report, write_importance_report
from .solver import model_from_dict, model_to_dict
from .synth import SharingSpec, gen_cohort, gen_multitask

USAGE_EXIT = 2
FAILURE_EXIT = 1


def _write_run_manifest(target, command, args, extra=None):
    """Persist the reproducibility manifest for one command invocation."""
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {"command": command, "version": __version__, "config": config}
    if extra:
        manifest["result"] = extra
    target = pathlib.Path(target)
    if target.suffix:
        path = target.with_name(target.stem + ".run.json")
    else:
        target.mkdir(parents=True, exist_ok=True)
        path = target / "run.json"
    path.write_text(render_json(manifest), encoding="utf-8")


def _require_file(path, parser):
    if not pathlib.Path(path).is_file():
        parser.exit(USAGE_EXIT, f"error: input file not found: {path}\n")


def _method_spec_from_args(args, dataset=None, parser=None):
    """Resolve hyperparameters from flags, running the grid search if asked."""
    loss = args.loss if args.loss != "auto" else None
    if getattr(args, "grid", False):
        grid = tuple(float(v) for v in np.logspace(np.log10(args.grid_min), np.log10(args.grid_max), args.grid_points))
        spec, table = grid_search(
            dataset, CANONICAL_TASKS, args.method, grid=grid, inner_folds=args.folds, seed=args.seed, loss_kind=loss
        )
        return spec, table
    spec = MethodSpec(method=args.method, gamma1=args.gamma1, gamma2=args.gamma2, lam=args.lam, loss_kind=loss)
    return spec, None


def cmd_synth(args, parser):
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "cohort":
        counts = tuple(int(v) for v in args.groups.split(","))
        if len(counts) != 3:
            parser.exit(USAGE_EXIT, "error: --groups must be three comma-separated counts (PD,ST,H)\n")
        trials, subjects = gen_cohort(
            counts=counts,
            trials_per_subject=args.trials_per_subject,
            duration_s=args.duration,
            sampling_rate=args.rate,
            seed=args.seed,
        )
        trials_dir = out / "trials"
        trials_dir.mkdir(exist_ok=True)
        from .data import serialize_trial

        for trial in trials:
            with open(trials_dir / f"{trial.subject_id}__{trial.trial_id}.csv", "w", encoding="utf-8") as fh:
                serialize_trial(trial, fh)
        with open(out / "subjects.csv", "w", encoding="utf-8") as fh:
            write_subjects_csv(subjects, fh)
        _write_run_manifest(out, "synth", args, extra={"n_trials": len(trials), "n_subjects": len(subjects)})
        print(f"wrote {len(trials)} trials and {len(subjects)} subjects to {out}")
        return 0
    spec = SharingSpec(
        d=args.d,
        T=args.t,
        shared_support=tuple(range(args.shared)),
        private_supports=tuple(
            tuple(range(args.shared + t * args.private, args.shared + (t + 1) * args.private)) for t in range(args.t)
        ),
        noise_sd=args.noise_sd,
        n_per_task=args.n,
        seed=args.seed,
    )
    tasks, truth = gen_multitask(spec)
    for task in tasks:
        with open(out / f"{task.name}.csv", "w", encoding="utf-8") as fh:
            fh.write(",".join(f"f{j}" for j in range(args.d)) + ",y\n")
            for i in range(task.n_rows):
                fh.write(",".join(repr(float(v)) for v in task.X[i]) + f",{int(task.y[i])}\n")
    truth_doc = {
        "shared_support": list(truth.shared_support),
        "private_supports": [list(s) for s in truth.private_supports],
        "support_union": list(truth.support_union),
        "c_true": [float(v) for v in truth.c_true],
        "betas_true": [[float(v) for v in row] for row in truth.betas_true],
        "alphas_true": [[float(v) for v in row] for row in truth.alphas_true],
    }
    (out / "truth.json").write_text(render_json(truth_doc), encoding="utf-8")
    _write_run_manifest(out, "synth", args, extra={"tasks": [t.name for t in tasks]})
    print(f"wrote {len(tasks)} task files and truth.json to {out}")
    return 0


def cmd_extract(args, parser):
    trials_dir = pathlib.Path(args.trials)
    if not trials_dir.is_dir():
        parser.exit(USAGE_EXIT, f"error: trials directory not found: {args.trials}\n")
    _require_file(args.subjects, parser)
    with open(args.subjects, "r", encoding="utf-8", newline="") as fh:
        subjects = read_subjects_csv(fh)
    files = sorted(p for p in trials_dir.iterdir() if p.suffix.lower() in (".csv", ".jsonl"))
    trials = [load_trial(p, declared_rate=args.declared_rate) for p in files]
    config = ExtractionConfig(
        contact_threshold=args.threshold,
        hysteresis=args.hysteresis,
        k_min=args.k_min,
        k_max=args.k_max,
        n_restarts=args.restarts,
        min_cycles=args.min_cycles,
        seed=args.seed,
    )
    dataset, rejections = extract_many(trials, subjects, config, jobs=args.jobs)
    for trial_id, reason in rejections:
        print(f"rejected {trial_id}: {reason}", file=sys.stderr)
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        save_dataset(dataset, fh)
    _write_run_manifest(out, "extract", args, extra={"rows": dataset.n_rows, "rejected": len(rejections)})
    print(f"wrote {dataset.n_rows} feature rows to {out} ({len(rejections)} trials rejected)")
    return 0


def _train_bundle(args, dataset):
    spec, table = _method_spec_from_args(args, dataset)
    tasks = make_tasks(dataset, CANONICAL_TASKS)
    fitted = fit_method(spec, tasks, seed=args.seed, feature_names=dataset.feature_names)
    doc = {
        "method": spec.method,
        "seed": args.seed,
        "loss_kind": spec.effective_loss,
        "hyperparameters": spec.hyperparams(),
        "grid_table": table,
    }
    if fitted.mmtfl is not None:
        doc["model"] = model_to_dict(fitted.mmtfl)
    else:
        doc["models"] = [model_to_dict(m) for m in fitted.stl]
    return doc


def cmd_train(args, parser):
    _require_file(args.features, parser)
    with open(args.features, "r", encoding="utf-8", newline="") as fh:
        dataset = load_dataset(fh)
    doc = _train_bundle(args, dataset)
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(render_json(doc), encoding="utf-8")
    _write_run_manifest(out, "train", args, extra={"hyperparameters": doc["hyperparameters"]})
    print(f"trained {args.method} on {dataset.n_rows} rows -> {out}")
    return 0


def cmd_evaluate(args, parser):
    _require_file(args.features, parser)
    with open(args.features, "r", encoding="utf-8", newline="") as fh:
        dataset = load_dataset(fh)
    spec, _ = _method_spec_from_args(args, dataset)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.scheme == "loso":
        report = leave_one_subject_out_eval(dataset, CANONICAL_TASKS, spec)
        write_eval_report(report, out)
        summary = {"method": spec.method, "scheme": "leave_one_subject_out",
                   "all_tasks_auc": report.all_tasks_mean,
                   "per_task": {te.name: te.auc_mean for te in report.per_task}}
    else:
        ratios = [float(v) for v in args.ratios.split(",")]
        grid_rows = []
        for ratio in ratios:
            report = random_partition_eval(dataset, CANONICAL_TASKS, spec, ratio, repeats=args.repeats, seed=args.seed)
            write_eval_report(report, out / f"ratio_{ratio}")
            grid_rows.append({"ratio": ratio, "auc_mean": report.all_tasks_mean, "auc_sd": report.all_tasks_sd})
        summary = {"method": spec.method, "scheme": "random_partition", "repeats": args.repeats, "grid": grid_rows}
        lines = [f"# {spec.method}: all-task AUC by training ratio", ""]
        lines.append("| Ratio | AUC (mean ± sd) |")
        lines.append("| --- | --- |")
        for row in grid_rows:
            lines.append(f"| {row['ratio']} | {row['auc_mean']:.4f} ± {row['auc_sd']:.4f} |")
        (out / "summary.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "summary.json").write_text(render_json(summary), encoding="utf-8")
    _write_run_manifest(out, "evaluate", args, extra=None)
    print(f"evaluation written to {out}")
    return 0


def cmd_report(args, parser):
    _require_file(args.model, parser)
    doc = json.loads(pathlib.Path(args.model).read_text(encoding="utf-8"))
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if "model" in doc:
        models = [model_from_dict(doc["model"])]
    elif "models" in doc:
        models = [model_from_dict(m) for m in doc["models"]]
    else:
        models = [model_from_dict(doc)]
    merged = {"c": None, "alpha": {}}
    for model in models:
        rep = importance_report(model)
        if rep.get("c"):
            merged["c"] = rep["c"]
        merged["alpha"].update(rep["alpha"])
    written = write_importance_report(merged, out)
    _write_run_manifest(out, "report", args, extra={"files": written})
    print(f"importance report written to {out}")
    return 0


def _add_method_flags(p):
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--gamma1", type=float, default=1.0, help="beta-factor penalty weight (multi-task methods)")
    p.add_argument("--gamma2", type=float, default=1.0, help="shared-gate penalty weight (multi-task methods)")
    p.add_argument("--lam", type=float, default=1.0, help="penalty weight (single-task baselines)")
    p.add_argument("--loss", default="auto", choices=("auto", "logistic", "least_squares"),
                   help="auto: logistic for multi-task, least-squares for baselines")
    p.add_argument("--grid", action="store_true", help="pick hyperparameters by 3-fold CV grid search first")
    p.add_argument("--grid-points", type=int, default=7)
    p.add_argument("--grid-min", type=float, default=1e-3)
    p.add_argument("--grid-max", type=float, default=1e3)
    p.add_argument("--folds", type=int, default=3, help="inner CV folds for the grid search")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="gaitmtfl", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"gaitmtfl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate synthetic data")
    synth_sub = p_synth.add_subparsers(dest="kind", required=True)
    p_cohort = synth_sub.add_parser("cohort", help="synthetic GCF cohort (trial CSVs + subjects.csv)")
    p_cohort.add_argument("--groups", default="5,3,3", help="subjects per group: PD,ST,H")
    p_cohort.add_argument("--trials-per-subject", type=int, default=16)
    p_cohort.add_argument("--duration", type=float, default=15.0, help="trial length in seconds")
    p_cohort.add_argument("--rate", type=float, default=20.0, help="sampling rate in Hz")
    p_cohort.add_argument("--seed", type=int, default=0)
    p_cohort.add_argument("--out", required=True)
    p_cohort.set_defaults(func=cmd_synth, kind="cohort")
    p_mt = synth_sub.add_parser("multitask", help="feature-space multi-task dataset with known supports")
    p_mt.add_argument("--d", type=int, default=50)
    p_mt.add_argument("--t", type=int, default=3)
    p_mt.add_argument("--shared", type=int, default=10, help="shared support size")
    p_mt.add_argument("--private", type=int, default=2, help="private support size per task")
    p_mt.add_argument("--n", type=int, default=100, help="rows per task")
    p_mt.add_argument("--noise-sd", type=float, default=0.5)
    p_mt.add_argument("--seed", type=int, default=0)
    p_mt.add_argument("--out", required=True)
    p_mt.set_defaults(func=cmd_synth, kind="multitask")

    p_extract = sub.add_parser("extract", help="extract gait features from trial files")
    p_extract.add_argument("--trials", required=True, help="directory of <subject>__<trial>.csv files")
    p_extract.add_argument("--subjects", required=True, help="subjects CSV (id,group,body_weight,age)")
    p_extract.add_argument("--out", required=True, help="output feature CSV")
    p_extract.add_argument("--threshold", type=float, default=0.05)
    p_extract.add_argument("--hysteresis", type=float, default=0.01)
    p_extract.add_argument("--k-min", type=int, default=2)
    p_extract.add_argument("--k-max", type=int, default=12)
    p_extract.add_argument("--restarts", type=int, default=20)
    p_extract.add_argument("--min-cycles", type=int, default=3)
    p_extract.add_argument("--declared-rate", type=float, default=None)
    p_extract.add_argument("--seed", type=int, default=0)
    p_extract.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_extract.set_defaults(func=cmd_extract)

    p_train = sub.add_parser("train", help="train the three canonical tasks")
    p_train.add_argument("--features", required=True)
    p_train.add_argument("--out", required=True, help="output model JSON")
    _add_method_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_gs = sub.add_parser("grid-search", help="alias of train --grid")
    p_gs.add_argument("--features", required=True)
    p_gs.add_argument("--out", required=True)
    _add_method_flags(p_gs)
    p_gs.set_defaults(func=cmd_train, grid=True)

    p_eval = sub.add_parser("evaluate", help="run an evaluation scheme and write reports")
    p_eval.add_argument("--features", required=True)
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--scheme", required=True, choices=("random", "loso"))
    p_eval.add_argument("--ratios", default="0.16,0.20,0.25,0.33,0.50")
    p_eval.add_argument("--repeats", type=int, default=10)
    _add_method_flags(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_report = sub.add_parser("report", help="feature-importance report from a model JSON")
    p_report.add_argument("--model", required=True)
    p_report.add_argument("--out", required=True)
    p_report.add_argument("--seed", type=int, default=0)
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except GaitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
