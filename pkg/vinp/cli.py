"""Command-line entry point.

    vinp gen-data    build a procedural dataset and manifest
    vinp train       run the training schedule or one stage of it
    vinp complete    complete one voxel file (or OFF mesh) with a trained model
    vinp eval        score the held-out split
    vinp sweep       score the held-out split under increasing random deletion
    vinp interpolate decode blends of two shapes' latent codes
    vinp probe       linear separability of latent codes by category

Every run writes `config.txt` (effective configuration) and `run.txt`
(version, seed, command) into its output directory. Exit status: 0 success,
1 usage or configuration error, 2 data error, 3 numeric failure.
"""
import argparse
import logging
import os
import subprocess
import sys
from pathlib import Path

from vinp import __version__
from vinp.data.dataset import build_dataset, load_manifest
from vinp.enums import Command, FillMode, ReportFormat, Stage
from vinp.errors import (
    AlignmentError,
    ConfigError,
    ContractError,
    DatasetError,
    FormatError,
    MeshParseError,
    NumericError,
    StatsUninitializedError,
)
from vinp.eval.experiments import (
    evaluate_testset,
    interpolate_latent,
    linear_probe,
    noise_sweep,
    probe_features,
    shuffled_probe_baseline,
)
from vinp.eval.report import emit_report
from vinp.nets.hybrid import HybridModel, hybrid_forward
from vinp.train.config import TrainConfig, dump_config, parse_config
from vinp.train.log import TrainLog
from vinp.train.stages import STAGE_ORDER, run_schedule
from vinp.vox.align import pca_align
from vinp.vox.grid import VoxelGrid, binarize, read_grid, write_grid
from vinp.vox.mesh import read_mesh, voxelize_mesh
from vinp.vox.slices import write_slices

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

OUT_ENV = "VINP_OUT"
DEFAULT_OUT = "runs"

STAGE_CHOICES = ("all", "1", "1a", "1b", "2", "3", "ablation")


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"vinp: {message}\n")
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="vinp", description="Volumetric shape inpainting and upsampling.")
    parser.add_argument("--version", action="version", version=f"vinp {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="configuration override, repeatable")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--seed", type=int, help="shorthand for --set seed=N")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)
    sub.add_parser(Command.GEN_DATA.value, parents=[common], help="build a procedural dataset")

    p = sub.add_parser(Command.TRAIN.value, parents=[common], help="train the pipeline")
    p.add_argument("--data", required=True, help="dataset directory or manifest")
    p.add_argument("--model", help="existing model directory to continue from")
    p.add_argument("--stage", default="all", choices=STAGE_CHOICES)

    p = sub.add_parser(Command.COMPLETE.value, parents=[common], help="complete one shape")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="voxel file, or .off mesh")
    p.add_argument("--fill", default=FillMode.SOLID.value, choices=[m.value for m in FillMode])
    p.add_argument("--no-align", action="store_true", help="skip principal-axis alignment")
    p.add_argument("--slices", action="store_true", help="also dump high-resolution slices as PGM")

    for cmd, text in ((Command.EVAL, "score the test split"), (Command.SWEEP, "noise sweep on the test split")):
        p = sub.add_parser(cmd.value, parents=[common], help=text)
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--format", default=ReportFormat.TABLE.value, choices=[f.value for f in ReportFormat])

    p = sub.add_parser(Command.INTERPOLATE.value, parents=[common], help="latent interpolation")
    p.add_argument("--model", required=True)
    p.add_argument("--a", required=True, help="voxel file weighted by gamma")
    p.add_argument("--b", required=True, help="voxel file weighted by 1 - gamma")

    p = sub.add_parser(Command.PROBE.value, parents=[common], help="latent linear probe")
    p.add_argument("--model", required=True)
    return parser


def run_version() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return __version__
    described = out.stdout.strip()
    return f"{__version__}+{described}" if out.returncode == 0 and described else __version__


def prepare_run(args: argparse.Namespace) -> tuple[TrainConfig, Path]:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    config = parse_config(args.config, overrides)
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(config))
    (out / "run.txt").write_text(f"version={run_version()}\nseed={config.seed}\ncommand={args.command}\n")
    return config, out


def _stages(choice: str) -> list[Stage]:
    if choice == "all":
        return list(STAGE_ORDER)
    if choice == "1":
        return [Stage.STAGE_1A, Stage.STAGE_1B]
    return [Stage(choice)]


def _load_model(path: str, config: TrainConfig) -> HybridModel:
    model = HybridModel.load(path)
    return model.astype(config.dtype)


def _read_input(path: str, resolution: int, fill: FillMode) -> VoxelGrid:
    if Path(path).suffix.lower() == ".off":
        grid = voxelize_mesh(read_mesh(path), resolution, FillMode(fill))
    else:
        grid = read_grid(path)
    if grid.resolution != resolution:
        raise DatasetError(f"resolution {grid.resolution} does not match the model's {resolution}", path)
    if grid.count() == 0:
        raise DatasetError("input has no occupied voxels", path)
    return grid


def cmd_gen_data(args, config: TrainConfig, out: Path) -> int:
    build_dataset(out, config.n_samples, config.categories, config.d_l, config.d_h, config.corruption_spec(),
                  config.data_seed, config.split_seed)
    return EXIT_OK


def cmd_train(args, config: TrainConfig, out: Path) -> int:
    manifest = load_manifest(args.data)
    if args.model:
        model = _load_model(args.model, config)
    else:
        model = HybridModel.init(config.edgan_config(), config.lrcn_config(), config.seed, config.threshold,
                                 config.dtype)
    if model.edgan != config.edgan_config() or model.lrcn != config.lrcn_config():
        raise ConfigError("model architecture differs from the configured one", key="d_l")
    log = TrainLog()
    try:
        model, log = run_schedule(manifest, model, config, _stages(args.stage), log)
    finally:
        log.write(out / "train.jsonl")
    model.save(out / "model")
    return EXIT_OK


def cmd_complete(args, config: TrainConfig, out: Path) -> int:
    model = _load_model(args.model, config)
    grid = _read_input(args.input, model.edgan.d_l, args.fill)
    if not args.no_align:
        grid = pca_align(grid).grid
    result = hybrid_forward(grid, model)
    low = binarize(result.lowres, model.threshold, "complete:lowres")
    high = binarize(result.highres, model.threshold, "complete:highres")
    write_grid(out / "completed_low.vox", low)
    write_grid(out / "completed_high.vox", high)
    if args.slices:
        write_slices(out / "slices", result.highres)
    logging.info(f"vinp: completed {args.input}: {low.count()} low-res, {high.count()} high-res voxels")
    return EXIT_OK


def cmd_eval(args, config: TrainConfig, out: Path) -> int:
    model = _load_model(args.model, config)
    report = evaluate_testset(model, load_manifest(args.data).test)
    emit_report(report, args.format, out / ("report.csv" if args.format == ReportFormat.TABLE.value else "report.txt"))
    return EXIT_OK


def cmd_sweep(args, config: TrainConfig, out: Path) -> int:
    model = _load_model(args.model, config)
    report = noise_sweep(model, load_manifest(args.data).test, config.noise_fractions, config.seed)
    emit_report(report, args.format, out / ("sweep.csv" if args.format == ReportFormat.TABLE.value else "sweep.txt"))
    return EXIT_OK


def cmd_interpolate(args, config: TrainConfig, out: Path) -> int:
    model = _load_model(args.model, config)
    d = model.edgan.d_l
    grids = interpolate_latent(model, _read_input(args.a, d, FillMode.SOLID), _read_input(args.b, d, FillMode.SOLID),
                               config.gammas)
    for i, (gamma, grid) in enumerate(zip(config.gammas, grids)):
        write_grid(out / f"interp_{i:02d}_g{gamma:.3f}.vox", grid)
    return EXIT_OK


def cmd_probe(args, config: TrainConfig, out: Path) -> int:
    model = _load_model(args.model, config)
    features, labels = probe_features(model, config.categories, config.probe_per_category, config.probe_seed)
    result = linear_probe(features, labels, seed=config.probe_seed)
    baseline = shuffled_probe_baseline(features, labels, seed=config.probe_seed)
    text = (f"accuracy={result.accuracy:.6f}\ntrain_accuracy={result.train_accuracy:.6f}\n"
            f"shuffled_baseline={baseline:.6f}\nn_train={result.n_train}\nn_test={result.n_test}\n")
    (out / "probe.txt").write_text(text)
    logging.info(f"vinp: probe accuracy {result.accuracy:.3f} vs shuffled {baseline:.3f}")
    return EXIT_OK


COMMANDS = {
    Command.GEN_DATA: cmd_gen_data,
    Command.TRAIN: cmd_train,
    Command.COMPLETE: cmd_complete,
    Command.EVAL: cmd_eval,
    Command.SWEEP: cmd_sweep,
    Command.INTERPOLATE: cmd_interpolate,
    Command.PROBE: cmd_probe,
}


def run_command(args: argparse.Namespace) -> int:
    """Runs a parsed command and maps failures onto exit codes."""
    try:
        config, out = prepare_run(args)
        return COMMANDS[Command(args.command)](args, config, out)
    except (ConfigError, ContractError) as e:
        logging.error(str(e))
        return EXIT_USAGE
    except NumericError as e:
        logging.error(str(e))
        return EXIT_NUMERIC
    except (FormatError, DatasetError, MeshParseError, AlignmentError, StatsUninitializedError, OSError) as e:
        logging.error(str(e))
        return EXIT_DATA


def main(argv: list[str] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format="%(asctime)s %(levelname)s %(message)s")
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
