"""Command line driver for the verification toolkit.

Subcommands: synth, preprocess, import-csv, split, train, run, report.
Every command prints one machine-readable ``#SUMMARY`` line on success.
Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ._rng import TAG_MODEL, TAG_RUN, mix
from .config import ExperimentConfig, load_config
from .dissimilarity import DevSet, gen_dev_set, gen_exploit_set
from .errors import ConfigError, DataError, NumericalError, SigstreamError
from .evaluation import aggregate_runs, windowed_metrics, write_eer_svg, write_report_csv
from .featurestore import (
    Dataset,
    generate_synthetic,
    import_csv,
    load_dataset,
    save_dataset,
    split_users,
)
from .linear_sgd import LinearSgdModel
from .plotting import render_eer_figure
from .preprocess import preprocess_image, read_pgm, write_pgm
from .rbf_svm import fit_smo
from .stream_engine import (
    build_stream,
    prequential_run,
    read_event_log,
    write_event_log,
)

ADAPTIVE_SGD = "adaptive_sgd"
STATIC_SVM = "static_svm"
STATIC_SGD = "static_sgd"


def _summary(command: str, **kv) -> None:
    parts = " ".join(f"{k}={v}" for k, v in kv.items())
    print(f"#SUMMARY command={command} {parts}".rstrip())


def _load_or_synthesize(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset:
        return load_dataset(cfg.dataset)
    return generate_synthetic(cfg.synth_config())


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    dataset = generate_synthetic(cfg.synth_config())
    save_dataset(dataset, args.output)
    _summary(
        "synth",
        path=args.output,
        records=len(dataset),
        writers=len(dataset.writers()),
        dim=dataset.dim,
        seed=cfg.synth_seed,
    )
    return 0


def cmd_import_csv(args: argparse.Namespace) -> int:
    dataset = import_csv(args.input)
    save_dataset(dataset, args.output)
    _summary("import-csv", input=args.input, output=args.output,
             records=len(dataset), dim=dataset.dim)
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    in_dir = Path(args.input_dir)
    out_dir = Path(args.output_dir)
    if not in_dir.is_dir():
        raise DataError(f"{in_dir} is not a directory")
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(in_dir.glob("*.pgm"))
    done = skipped = 0
    for path in files:
        try:
            img = read_pgm(path)
            processed, threshold = preprocess_image(img, args.canvas_w, args.canvas_h)
        except SigstreamError as exc:
            print(f"warning: skipping {path.name}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        write_pgm(processed, out_dir / path.name)
        print(f"{path.name}: otsu_threshold={threshold}")
        done += 1
    if not files:
        print(f"warning: no .pgm files in {in_dir}", file=sys.stderr)
    if files and done == 0:
        raise DataError(f"all {len(files)} files in {in_dir} failed preprocessing")
    _summary("preprocess", input=str(in_dir), output=str(out_dir),
             processed=done, skipped=skipped)
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    dataset = _load_or_synthesize(cfg)
    dev, exploit = split_users(dataset, cfg.split_config(cfg.master_seed))
    print("dev_users:", ",".join(str(u) for u in sorted(dev)))
    print("exploit_users:", ",".join(str(u) for u in sorted(exploit)))
    _summary("split", dev=len(dev), exploit=len(exploit), seed=cfg.master_seed)
    return 0


def _fit_models(
    cfg: ExperimentConfig, dev: DevSet, seed: int
) -> tuple[LinearSgdModel, object]:
    X = dev.features()
    y = dev.labels_pm1()
    sgd = LinearSgdModel(
        dev.dim,
        reg=cfg.sgd_reg,
        lr0=cfg.sgd_lr0,
        lr_t0=cfg.sgd_lr_t0 if cfg.sgd_lr_t0 > 0 else None,
    )
    sgd.fit_batch(X, y, epochs=cfg.sgd_epochs, seed=mix(seed, TAG_MODEL, 0))
    svm = fit_smo(
        X,
        y,
        C=cfg.svm_c,
        gamma=cfg.svm_gamma,
        tol=cfg.svm_tol,
        max_passes=cfg.svm_max_passes if cfg.svm_max_passes > 0 else None,
        seed=mix(seed, TAG_MODEL, 1),
    )
    return sgd, svm


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    dataset = _load_or_synthesize(cfg)
    split_cfg = cfg.split_config(cfg.master_seed)
    dev_users, _ = split_users(dataset, split_cfg)
    dev = gen_dev_set(dataset, dev_users, split_cfg)
    sgd, svm = _fit_models(cfg, dev, cfg.master_seed)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sgd_path = out_dir / "model_sgd.shwm"
    svm_path = out_dir / "model_svm.shkm"
    sgd.save(sgd_path)
    svm.save(svm_path)
    objective = sgd.objective(dev.features(), dev.labels_pm1())
    _summary(
        "train",
        samples=len(dev),
        sgd=str(sgd_path),
        svm=str(svm_path),
        sgd_objective=f"{objective:.6f}",
        svm_support_vectors=svm.support_vectors.shape[0],
    )
    return 0


def _run_systems(cfg: ExperimentConfig, dataset: Dataset, run_index: int):
    """One independent run: split, fit, stream, prequential passes."""
    seed = mix(cfg.master_seed, TAG_RUN, run_index)
    split_cfg = cfg.split_config(seed)
    dev_users, exploit_users = split_users(dataset, split_cfg)
    dev = gen_dev_set(dataset, dev_users, split_cfg)
    sgd, svm = _fit_models(cfg, dev, seed)
    exploit = gen_exploit_set(dataset, exploit_users, split_cfg)
    stream = build_stream(exploit, seed)
    stream_cfg = cfg.stream_config(seed)

    results = {
        ADAPTIVE_SGD: prequential_run(
            stream, exploit, sgd.clone(), stream_cfg,
            adapt=True, snapshot_retention=cfg.snapshots,
        ),
        STATIC_SVM: prequential_run(stream, exploit, svm, stream_cfg, adapt=False),
    }
    if cfg.static_sgd:
        results[STATIC_SGD] = prequential_run(
            stream, exploit, sgd.clone(), stream_cfg, adapt=False
        )
    return results


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    dataset = _load_or_synthesize(cfg)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    windows: dict[str, list] = {}
    for r in range(cfg.run_count):
        results = _run_systems(cfg, dataset, r)
        run_dir = out_dir / f"run_{r}"
        run_dir.mkdir(parents=True, exist_ok=True)
        for system, result in results.items():
            write_event_log(result.events, run_dir / f"events_{system}.csv")
            for version, snapshot in result.snapshots:
                snapshot.save(run_dir / f"model_{system}_v{version}.shwm")
            windows.setdefault(system, []).append(
                windowed_metrics(result.events, cfg.w_size, cfg.w_step)
            )

    aggregates = {}
    for system, runs in windows.items():
        agg = aggregate_runs(runs)
        aggregates[system] = agg
        write_report_csv(agg, out_dir / f"report_{system}.csv")
        if agg:
            write_eer_svg(agg, out_dir / f"report_{system}.svg",
                          title=f"EER by window: {system}")
    if any(aggregates.values()):
        render_eer_figure(aggregates, out_dir / "report.png")

    final = {}
    for system, agg in aggregates.items():
        final[system] = agg[-1].eer_skilled_mean if agg else float("nan")
    _summary(
        "run",
        runs=cfg.run_count,
        events_per_run=3 * cfg.exploit_user_count * cfg.claims_per_user,
        windows=len(next(iter(aggregates.values()), [])),
        **{f"final_eer_{k}": f"{v:.4f}" for k, v in sorted(final.items())},
        output=str(out_dir),
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    runs = []
    for path in args.logs:
        events = read_event_log(path)
        if not events:
            raise DataError(f"{path}: event log has no events")
        events.sort(key=lambda e: e.position)
        metrics = windowed_metrics(events, cfg.w_size, cfg.w_step)
        runs.append((path, metrics))
    counts = {len(m) for _, m in runs}
    if len(counts) != 1:
        offender = next(p for p, m in runs if len(m) != len(runs[0][1]))
        raise DataError(
            f"window counts differ across logs (e.g. {offender}); "
            f"aggregate needs equal-length runs"
        )
    agg = aggregate_runs([m for _, m in runs])
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report_csv(agg, out)
    if agg:
        write_eer_svg(agg, out.with_suffix(".svg"))
        render_eer_figure({"report": agg}, out.with_suffix(".png"))
    _summary("report", logs=len(runs), windows=len(agg), output=str(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigstream",
        description="Stream-based writer-independent signature verification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic feature dataset")
    p.add_argument("-c", "--config", help="experiment config file")
    p.add_argument("-o", "--output", default="dataset.shsv", help="output dataset path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="preprocess a directory of P5 PGM images")
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    p.add_argument("--canvas-w", type=int, default=1360, help="canvas width in pixels")
    p.add_argument("--canvas-h", type=int, default=952, help="canvas height in pixels")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("import-csv", help="convert a CSV feature table to the binary format")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_import_csv)

    p = sub.add_parser("split", help="show the development/exploitation user split")
    p.add_argument("-c", "--config", help="experiment config file")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="batch-train the classifiers and save checkpoints")
    p.add_argument("-c", "--config", help="experiment config file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="full prequential experiment with report output")
    p.add_argument("-c", "--config", help="experiment config file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="recompute a report from event logs")
    p.add_argument("logs", nargs="+", help="event log CSVs, one per run")
    p.add_argument("-c", "--config", help="experiment config file (window geometry)")
    p.add_argument("-o", "--output", default="report.csv", help="report CSV path")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
