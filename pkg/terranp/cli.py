"""
``terranp`` command line: generate, train, eval, bench and export-heatmap.

Every command builds its configuration from defaults, ``TERRANP_*``
environment variables, ``--config`` and ``--set section.key=value`` (in that
order, later wins) plus its own flags, and writes the resolved configuration
next to its outputs. Exit codes: 0 success, 1 usage, 2 data, 3 numeric.
"""
import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from terranp.autodiff.checkpoint import load_checkpoint, save_checkpoint
from terranp.bench import BENCH_HEADER, bench_attention
from terranp.bev.grid import ElevationGrid
from terranp.bev.io import read_grid_csv, write_grid_csv
from terranp.core import TerraNP
from terranp.core.configuration import CONFIG_FILE_NAME, Config, load_file, merge, parse_overrides
from terranp.core.exceptions import (
    EXIT_OK,
    DataError,
    NumericError,
    TerraNPError,
    TerraNPExecutionError,
    UsageError,
)
from terranp.core.processor import Processors
from terranp.imaging import PALETTES, write_heatmap, write_image
from terranp.init_terranp import load_baseline, load_dataset, load_runner
from terranp.metrics.report import (
    METRICS_CSV_HEADER,
    EvalReport,
    baseline_columns,
    baseline_header,
    wide_columns,
)
from terranp.model.scnp import SemanticNP
from terranp.model.training import train
from terranp.pipeline import iter_frame_inputs
from terranp.plugins.processors import LogProcessor, TrainingLogWriter
from terranp.plugins.runners import ThreadedRunner
from terranp.plugins.tasks import FrameEvaluation, evaluate_frame
from terranp.world.scenes import make_dataset

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "model.snpm"
REPORT_NAME = "report.csv"
METRICS_NAME = "metrics.csv"


class ArgumentParser(argparse.ArgumentParser):
    """Reports bad arguments as :obj:`UsageError` instead of exiting."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _flags(**sections: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    """Drops the flags that weren't given."""
    return {
        name: {k: v for k, v in values.items() if v is not None}
        for name, values in sections.items()
    }


def build_config(
    args: argparse.Namespace, flags: Optional[Dict[str, Dict[str, Any]]] = None
) -> Config:
    file_layer = load_file(args.config) if args.config else None
    return Config.from_dict(**merge(file_layer, parse_overrides(args.set or []), flags))


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise DataError(f"can't write {path}: {e}") from e
    return path


def cmd_generate(args: argparse.Namespace) -> int:
    config = build_config(args, _flags(world={"scenes": args.scenes, "frames": args.frames}))
    config.logging.configure()
    out = Path(args.out)
    dataset = make_dataset(args.seed, config, out)
    config.save(out.parent)
    print(f"generated {len(dataset.scenes)} scenes, {len(dataset)} frames -> {out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = build_config(
        args,
        _flags(
            train={
                "epochs": args.epochs,
                "seed": args.seed,
                "holdout": args.holdout,
                "no_semantics": True if args.no_semantics else None,
                "no_temporal": True if args.no_temporal else None,
            }
        ),
    )
    config.logging.configure()
    out = Path(args.out)
    config.save(out)

    dataset = load_dataset(args.data)
    train_set, _ = dataset.holdout(config.train.holdout)
    names = {f.name for f in train_set.frames}
    if not names:
        raise UsageError("no frames left to train on")
    inputs = list(iter_frame_inputs(dataset, config.train, only=names))

    model = SemanticNP(config.model, dataset.feature_dim, seed=config.train.seed)
    processors = Processors([TrainingLogWriter(out), LogProcessor()])
    try:
        summaries = train(model, inputs, config, processors)
    except NumericError:
        save_checkpoint(out / CHECKPOINT_NAME, model.state())
        raise
    save_checkpoint(out / CHECKPOINT_NAME, model.state())

    last = summaries[-1]
    print(
        f"trained {len(inputs)} frames for {len(summaries)} epochs, "
        f"final elbo {-last.last_loss:.6f}"
    )
    return EXIT_OK


def _eval_config(args: argparse.Namespace) -> Config:
    if not args.config:
        sibling = Path(args.model).parent / CONFIG_FILE_NAME
        if sibling.is_file():
            args.config = str(sibling)
    return build_config(
        args,
        _flags(
            eval={
                "samples": args.samples,
                "baseline": args.baseline,
                "workers": args.workers,
                "holdout": args.holdout,
            }
        ),
    )


def _write_heatmaps(directory: Path, evaluation: FrameEvaluation, gt: Any) -> None:
    name = evaluation.name
    write_heatmap(directory / f"{name}_mu.pgm", evaluation.mean)
    write_grid_csv(
        directory / f"{name}_mu.csv", ElevationGrid(evaluation.mean, np.isfinite(evaluation.mean))
    )
    write_heatmap(directory / f"{name}_sigma.pgm", evaluation.std)
    write_heatmap(directory / f"{name}_err.pgm", abs(evaluation.mean - gt))
    for k, sample in enumerate(evaluation.samples):
        write_heatmap(directory / f"{name}_sample{k}.pgm", sample)


def cmd_eval(args: argparse.Namespace) -> int:
    config = _eval_config(args)
    config.logging.configure()
    cfg = config.eval

    dataset = load_dataset(args.data)
    evalset = dataset.holdout(cfg.holdout)[1] if cfg.holdout else dataset
    names = {f.name for f in evalset.frames}
    if not names:
        raise UsageError("no frames to evaluate")
    inputs = {fi.name: fi for fi in iter_frame_inputs(dataset, config.train, only=names)}

    baseline = load_baseline(cfg.baseline, config) if cfg.baseline else None
    model = SemanticNP(config.model, dataset.feature_dim, seed=config.train.seed)
    model.load_state(load_checkpoint(args.model))
    runner = ThreadedRunner(num_workers=cfg.workers) if cfg.workers > 1 else load_runner(config)

    tnp = TerraNP(evalset, config, processors=Processors([LogProcessor()]), runner=runner)
    result = tnp.run(
        evaluate_frame,
        model=model,
        inputs=inputs,
        samples=cfg.samples,
        seed=config.train.seed,
        n_bins=cfg.n_bins,
        baseline=baseline,
        baseline_name=cfg.baseline,
    )
    evaluations: List[FrameEvaluation] = [
        r[0].result for r in result.values() if not r.failed
    ]
    if not evaluations:
        raise TerraNPExecutionError(result)

    report_dir = Path(args.report)
    config.save(report_dir)
    columns = wide_columns()
    if cfg.baseline:
        columns += baseline_header(cfg.baseline)
    reports = [e.report for e in evaluations]
    aggregate = EvalReport.merge(reports)
    rows = []
    for e in evaluations:
        rows.append({**e.report.wide(), **baseline_columns(cfg.baseline, e.baseline)})
    baselines = [e.baseline for e in evaluations if e.baseline is not None]
    rows.append(
        {
            **aggregate.wide(),
            **baseline_columns(cfg.baseline, EvalReport.merge(baselines) if baselines else None),
        }
    )
    _write_csv(
        report_dir / REPORT_NAME, columns, [[row.get(c, "") for c in columns] for row in rows]
    )
    _write_csv(report_dir / METRICS_NAME, METRICS_CSV_HEADER, aggregate.rows())

    if args.heatmaps:
        for e in evaluations:
            _write_heatmaps(Path(args.heatmaps), e, inputs[e.name].gt.values)

    logger.info("evaluated %d frames: %r", len(evaluations), aggregate)
    print(
        f"evaluated {len(evaluations)} frames, elevation mae "
        f"{aggregate.wide()['elevation_mae_total']}, nll {aggregate.wide()['nll']}, "
        f"ence {aggregate.wide()['ence']}"
    )
    if result.failed:
        raise TerraNPExecutionError(result)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = build_config(
        args,
        _flags(
            bench={
                "m": args.m,
                "n": args.n,
                "radius": args.radius,
                "k_max": args.kmax,
                "repeats": args.repeats,
            }
        ),
    )
    config.logging.configure()
    rows = bench_attention(config.bench, config.grid, seed=config.train.seed)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(BENCH_HEADER)
    writer.writerows(r.row() for r in rows)
    if args.out:
        out = Path(args.out)
        _write_csv(out, BENCH_HEADER, [r.row() for r in rows])
        config.save(out.parent)
    return EXIT_OK


def cmd_export_heatmap(args: argparse.Namespace) -> int:
    config = build_config(args)
    config.logging.configure()
    grid = read_grid_csv(args.grid_csv)
    path = write_image(args.out, grid, args.palette)
    print(f"wrote {grid.shape[1]}x{grid.shape[0]} image -> {path}")
    return EXIT_OK


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default="", help="configuration file (flat or YAML)")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one configuration key, may repeat",
    )


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="terranp", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=ArgumentParser)
    sub.required = True

    p = sub.add_parser("generate", help="generate a synthetic scene dataset")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenes", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--out", required=True, help="SCN1 file to write")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the model on a dataset")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="directory for checkpoint, log and config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--holdout", type=int, help="keep the last N frames out of training")
    p.add_argument("--no-semantics", action="store_true")
    p.add_argument("--no-temporal", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a trained model")
    _common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--report", required=True, help="directory for report.csv and metrics.csv")
    p.add_argument("--heatmaps", default="", help="directory for PGM heatmaps and mean grid CSVs")
    p.add_argument("--samples", type=int)
    p.add_argument("--baseline", help="registered baseline plugin, gp or nearest built in")
    p.add_argument("--workers", type=int)
    p.add_argument("--holdout", type=int, help="evaluate only the last N frames")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="compare ball-query and global attention cost")
    _common(p)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--kmax", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--out", default="", help="also write the table to this CSV file")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export-heatmap", help="render a grid CSV as PGM or PPM")
    _common(p)
    p.add_argument("--grid-csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--palette", choices=PALETTES, default="gray")
    p.set_defaults(func=cmd_export_heatmap)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return int(args.func(args))
    except TerraNPError as e:
        logger.error("%s", e)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
