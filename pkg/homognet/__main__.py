"""Command line entry point for homognet."""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable

from pydantic import ValidationError

from homognet.bounds.bounds_service import bound_report
from homognet.config import get_global_config
from homognet.errors import ConfigError, HomogNetError
from homognet.experiments.data_service import generate
from homognet.experiments.experiment_models import (
    LIPSCHITZ_HEADER,
    RATE_HEADER,
    ExperimentConfig,
)
from homognet.experiments.experiment_service import (
    config_teacher,
    lipschitz_sweep,
    rate_sweep,
    sandwich_check,
)
from homognet.model.model_models import Dataset, FamilyKind
from homognet.polar.polar_service import compute_polar
from homognet.run_models import ErrorRecord, ModelFile, RunManifest
from homognet.trainer.trainer_service import meta_train
from homognet.utils.io_utils import write_csv, write_json
from homognet.utils.run_utils import new_run_id, package_versions, utc_now


_logger = logging.getLogger(__name__)

USAGE_EXIT = 2
FAILURE_EXIT = 1

TRACE_HEADER = ("iteration", "objective", "gradient_norm", "max_residual")
WIDTH_EVENT_HEADER = ("iteration", "width", "polar_value")

# flag destination -> dotted config key
_FLAG_KEYS = {
    "family": "family.kind",
    "temperature": "family.temperature",
    "m": "dims.m",
    "n": "dims.n",
    "T": "dims.T",
    "rank": "rank",
    "noise": "noise",
    "N": "N",
    "lam": "lam",
    "seed": "seed",
    "delta": "delta",
    "max_width": "train.max_width",
    "widths": "widths",
    "n_grid": "n_grid",
    "reps": "repetitions",
    "threads": "threads",
    "heldout": "heldout",
}


class _Parser(argparse.ArgumentParser):
    """Reports usage errors as ConfigError so they get a JSON error record."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def _int_list(value: str) -> list[int]:
    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers: {value}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config (dotted keys)")
    common.add_argument(
        "--family", choices=[kind.value for kind in FamilyKind], help="Model family"
    )
    common.add_argument("--m", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--T", type=int, help="Tokens per attention input")
    common.add_argument("--temperature", type=float, help="Attention temperature")
    common.add_argument("--rank", type=int, help="Teacher width r*")
    common.add_argument("--noise", type=float, help="Noise scale σ")
    common.add_argument("--N", type=int, help="Training samples")
    common.add_argument("--lambda", dest="lam", type=float, help="λ")
    common.add_argument("--seed", type=int, help="Overrides config and HOMOGNET_SEED")
    common.add_argument("--delta", type=float, help="Confidence δ")
    common.add_argument("--max-width", type=int, help="R_max")
    common.add_argument("--widths", type=_int_list, help="Lipschitz sweep widths")
    common.add_argument("--n-grid", type=_int_list, help="Rate sweep sample sizes")
    common.add_argument("--reps", type=int, help="Repetitions")
    common.add_argument("--threads", type=int, help="Worker thread cap")
    common.add_argument("--heldout", type=int, help="Held-out sample count M")
    common.add_argument("--model", type=Path, help="model.json from a train run")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--log-level", help="Logging level")

    parser = _Parser(
        prog="homognet",
        description=(
            "Train parallel positively homogeneous networks, certify global "
            "optimality and evaluate generalization bounds"
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("train", "Width-growing training with a polar certificate"),
        ("certify", "Polar certificate of a trained model"),
        ("bound", "Generalization bound report of a trained model"),
        ("sandwich", "Check a matrix sensing model against the convex oracle"),
        ("sweep-lipschitz", "Lipschitz bound across widths"),
        ("sweep-rate", "Held-out gap and bound across sample sizes"),
    ):
        commands.add_parser(name, parents=[common], help=help_text)
    return parser


def _unflatten(flat: dict[str, Any]) -> dict[str, Any]:
    nested: dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.split(".")
        target = nested
        for part in parts[:-1]:
            target = target.setdefault(part, {})
            if not isinstance(target, dict):
                raise ConfigError(f"config key {key} conflicts with a scalar entry")
        if isinstance(value, dict):
            value = _unflatten(value)
        target[parts[-1]] = value
    return nested


def _merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    result = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = _merge(result[key], value)
        else:
            result[key] = value
    return result


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}")
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read {path}: {e}")


def _load_model_file(path: Path | None) -> ModelFile:
    if path is None:
        raise ConfigError("this command needs --model")
    try:
        return ModelFile.model_validate(_read_json(path))
    except ValidationError as e:
        raise ConfigError(f"invalid model file {path}: {e}")


def resolve_config(args: argparse.Namespace, base: dict[str, Any]) -> ExperimentConfig:
    """Stored config, then the config file, then flags. The seed and thread
    count fall back to the global config."""
    merged = dict(base)
    if args.config is not None:
        data = _read_json(args.config)
        if not isinstance(data, dict):
            raise ConfigError(f"config {args.config} must hold a JSON object")
        merged = _merge(merged, _unflatten(data))
    flags = {
        key: getattr(args, dest)
        for dest, key in _FLAG_KEYS.items()
        if getattr(args, dest) is not None
    }
    merged = _merge(merged, _unflatten(flags))
    global_config = get_global_config()
    merged.setdefault("seed", global_config.seed)
    merged.setdefault("threads", global_config.threads)
    try:
        return ExperimentConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid run config: {e}")


def _configure_logging(level: str | None) -> None:
    name = (level or get_global_config().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=True,
    )


def _dataset(config: ExperimentConfig) -> Dataset:
    return generate(config.family, config_teacher(config), config.N, config.seed)


def _train(config: ExperimentConfig, out: Path, model_file: ModelFile | None):
    dataset = _dataset(config)
    model, cert, trace = meta_train(
        dataset,
        config.family,
        config.dims,
        config.lam,
        config.train,
        config.polar,
        seed=config.seed,
    )
    return [
        write_json(out / "model.json", ModelFile(config=config, model=model)),
        write_csv(
            out / "trace.csv",
            TRACE_HEADER,
            (
                (r.iteration, r.objective, r.gradient_norm, r.max_residual)
                for r in trace.iterates
            ),
        ),
        write_csv(
            out / "width_events.csv",
            WIDTH_EVENT_HEADER,
            ((e.iteration, e.width, e.polar_value) for e in trace.width_events),
        ),
        write_json(out / "certificate.json", cert),
    ], 0


def _certify(config: ExperimentConfig, out: Path, model_file: ModelFile):
    cert = compute_polar(_dataset(config), model_file.model, config.polar)
    return [write_json(out / "certificate.json", cert)], 0


def _bound(config: ExperimentConfig, out: Path, model_file: ModelFile):
    dataset = _dataset(config)
    cert = compute_polar(dataset, model_file.model, config.polar)
    report = bound_report(config.family, dataset, model_file.model, cert, config.delta)
    return [write_json(out / "bound.json", report)], 0


def _sandwich(config: ExperimentConfig, out: Path, model_file: ModelFile):
    report = sandwich_check(_dataset(config), model_file.model, config.lam)
    exit_code = 0 if report.passed else FAILURE_EXIT
    return [write_json(out / "sandwich.json", report)], exit_code


def _sweep_lipschitz(config: ExperimentConfig, out: Path, model_file: ModelFile | None):
    rows = lipschitz_sweep(config, config_teacher(config))
    path = write_csv(
        out / "lipschitz_sweep.csv", LIPSCHITZ_HEADER, (r.cells() for r in rows)
    )
    return [path], 0


def _sweep_rate(config: ExperimentConfig, out: Path, model_file: ModelFile | None):
    rows = rate_sweep(config, config_teacher(config))
    path = write_csv(out / "rate_sweep.csv", RATE_HEADER, (r.cells() for r in rows))
    return [path], 0


_COMMANDS: dict[str, tuple[Callable, bool]] = {
    "train": (_train, False),
    "certify": (_certify, True),
    "bound": (_bound, True),
    "sandwich": (_sandwich, True),
    "sweep-lipschitz": (_sweep_lipschitz, False),
    "sweep-rate": (_sweep_rate, False),
}


def _report_error(error: Exception, exit_code: int) -> int:
    record = ErrorRecord(
        error=type(error).__name__, message=str(error), exit_code=exit_code
    )
    print(json.dumps(record.model_dump(), sort_keys=True), file=sys.stderr)
    return exit_code


def run(argv: list[str] | None = None) -> int:
    started_at = utc_now()
    clock = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        _configure_logging(args.log_level)
        handler, needs_model = _COMMANDS[args.command]
        model_file = _load_model_file(args.model) if needs_model else None
        base = model_file.config.model_dump(mode="json") if model_file else {}
        config = resolve_config(args, base)
        out = args.out or get_global_config().output_dir
        outputs, exit_code = handler(config, out, model_file)
    except ConfigError as e:
        return _report_error(e, USAGE_EXIT)
    except HomogNetError as e:
        return _report_error(e, FAILURE_EXIT)

    manifest = RunManifest(
        run_id=new_run_id(),
        command=args.command,
        config=config,
        outputs=[str(path) for path in outputs],
        started_at=started_at,
        finished_at=utc_now(),
        wall_clock_seconds=time.perf_counter() - clock,
        versions=package_versions(),
        seed=config.seed,
    )
    write_json(out / "manifest.json", manifest)
    _logger.info(f"{args.command} finished in {manifest.wall_clock_seconds:.2f}s")
    return exit_code


def main() -> None:
    """Main entry point for the homognet command line."""
    sys.exit(run())


if __name__ == "__main__":
    main()
