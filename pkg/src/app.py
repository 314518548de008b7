"""
DigiWFS Unwrap - Command line

Entry point of the toolkit: simulate turbulence screens, wrap and corrupt
them, unwrap with any method, evaluate reconstructions and compare methods.

Subcommands:
    simulate   Ground truth, wrapped and noisy wrapped PGRID files
    wrap       Wrap a grid, optionally adding relative noise
    unwrap     Run one method on a wrapped grid
    evaluate   Score a reconstruction
    compare    Score a list of methods over files or simulated seeds

Exit codes: 0 success, 1 usage, 2 I/O, 3 numerical validation.
"""

import argparse
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from backend.errors import DWFSError, GridIOError, UsageError  # noqa: E402
from backend.metrics.evaluation import evaluate  # noqa: E402
from backend.optics.grid_io import load_grid, save_grid, write_bytes_atomic  # noqa: E402
from backend.optics.propagation import wrap_phase  # noqa: E402
from backend.pipeline.config import RunConfig, build_config  # noqa: E402
from backend.pipeline.heatmap import write_heatmap  # noqa: E402
from backend.pipeline.progress_tracker import CompareProgressTracker  # noqa: E402
from backend.pipeline.runner import (  # noqa: E402
    NOISE_SEED_OFFSET,
    Case,
    compare,
    format_table,
    run_method,
    simulate_case,
    simulated_cases,
)
from backend.simulation.screens import apply_noise  # noqa: E402

logger = logging.getLogger("dwfs")

# flag -> RunConfig field, for flags shared by several subcommands
CONFIG_FLAGS = {
    "n_sub": int, "oversample": int, "weighting": str, "c": float, "s": float, "start": str,
    "mod_radius": float, "mod_steps": int, "max_iters": int, "tol": float, "tip_tilt": bool, "seed": int,
    "noise": float, "n": int, "r0": float, "aperture": str, "diameter": int,
}


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports problems as UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def _default(name: str) -> Any:
    return RunConfig.model_fields[name].default


def _add_config_flags(parser: argparse.ArgumentParser, names: List[str]) -> None:
    for name in names:
        flag = "--" + name.replace("_", "-")
        kwargs: Dict[str, Any] = {"type": CONFIG_FLAGS[name], "default": None,
                                  "help": f"(default: {_default(name)})"}
        if name == "start":
            kwargs["choices"] = ["zero", "linear"]
            kwargs["help"] = "(default: linear for pyramid4, zero otherwise)"
        elif CONFIG_FLAGS[name] is bool:
            del kwargs["type"]
            kwargs["action"] = argparse.BooleanOptionalAction
            kwargs["help"] = f"Remove the mean tilt before Fourier-type sensing (default: {_default(name)})"
        parser.add_argument(flag, dest=name, **kwargs)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="key=value config file; flags win over it")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")


METHOD_FLAGS = ["n_sub", "oversample", "weighting", "c", "s", "start", "mod_radius", "mod_steps",
                "max_iters", "tol", "tip_tilt"]
SCREEN_FLAGS = ["seed", "noise", "n", "r0", "aperture", "diameter"]


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="dwfs", description="Phase unwrapping with digital wavefront sensors")
    sub = parser.add_subparsers(dest="command", parser_class=CliParser)

    p = sub.add_parser("simulate", help="Write truth, wrapped and noisy wrapped grids")
    _add_common(p)
    _add_config_flags(p, SCREEN_FLAGS)
    p.add_argument("--seeds", default=None, help="Comma-separated seeds (overrides --seed)")
    p.add_argument("--subharmonics", action="store_true", default=None, help="Add low-frequency subharmonics")
    p.add_argument("--output", required=True, help="Output directory")
    p.add_argument("--png", action="store_true", default=None, help="Also write PNG heatmaps")

    p = sub.add_parser("wrap", help="Wrap a grid, optionally adding noise")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--noise", type=float, default=0.0, help="Relative noise level (default: 0)")
    p.add_argument("--seed", type=int, default=None, help=f"(default: {_default('seed')})")

    p = sub.add_parser("unwrap", help="Unwrap a grid with one method")
    _add_common(p)
    p.add_argument("--input", default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--method", default=None, help=f"(default: {_default('method')})")
    p.add_argument("--png", action="store_true", default=None)
    _add_config_flags(p, METHOD_FLAGS)

    p = sub.add_parser("evaluate", help="Score a reconstruction")
    _add_common(p)
    p.add_argument("--input", required=True, help="Reconstruction")
    p.add_argument("--truth", default=None, help="Ground truth")
    p.add_argument("--wrapped", default=None, help="Wrapped data the reconstruction came from")
    p.add_argument("--output", default=None, help="Report path (default: stdout only)")

    p = sub.add_parser("compare", help="Compare methods")
    _add_common(p)
    p.add_argument("--method", action="append", default=None, dest="methods",
                   help="Method, optionally with @key=value overrides; repeat for several")
    p.add_argument("--truth", default=None)
    p.add_argument("--input", default=None, help="Wrapped input matching --truth")
    p.add_argument("--seeds", default=None, help="Comma-separated seeds to simulate instead of files")
    p.add_argument("--output", default=None, help="Directory for the table and per-cell grids")
    p.add_argument("--threads", type=int, default=None, help="Worker count (default: DWFS_THREADS)")
    p.add_argument("--subharmonics", action="store_true", default=None)
    _add_config_flags(p, METHOD_FLAGS + SCREEN_FLAGS)
    return parser


def _config_from(args: argparse.Namespace) -> RunConfig:
    overrides = {name: getattr(args, name) for name in list(CONFIG_FLAGS) + ["method", "png", "subharmonics",
                                                                                "input", "truth", "output"]
                 if getattr(args, name, None) is not None and name in RunConfig.model_fields}
    return build_config(args.config, overrides)


def _parse_seeds(text: str) -> List[int]:
    try:
        seeds = [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise UsageError(f"Seeds must be integers, got '{text}'", key="seeds") from e
    if not seeds:
        raise UsageError("Empty seed list", key="seeds")
    return seeds


def _write_lines(path: str, lines: List[str]) -> None:
    write_bytes_atomic(path, ("\n".join(lines) + "\n").encode("utf-8"))
    logger.info(f"Wrote {path}")


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config_from(args)
    seeds = _parse_seeds(args.seeds) if args.seeds else [config.seed]
    output = args.output
    manifest = [f"n={config.n}", f"r0={config.r0!r}", f"noise={config.noise!r}", f"aperture={config.aperture}",
                f"diameter={config.aperture_diameter}", f"subharmonics={str(config.subharmonics).lower()}",
                f"seeds={','.join(str(s) for s in seeds)}"]
    for seed in seeds:
        grids = dict(zip(("truth", "wrapped", "noisy"), simulate_case(config, seed)))
        for name, grid in grids.items():
            path = os.path.join(output, f"seed{seed}_{name}.pgrid")
            save_grid(grid, path)
            if config.png:
                write_heatmap(grid, os.path.splitext(path)[0] + ".png")
        manifest.append(f"seed{seed}=seed{seed}_truth.pgrid,seed{seed}_wrapped.pgrid,seed{seed}_noisy.pgrid;"
                        f"noise_seed={seed + NOISE_SEED_OFFSET}")
    _write_lines(os.path.join(output, "manifest.txt"), manifest)
    return 0


def cmd_wrap(args: argparse.Namespace) -> int:
    config = _config_from(args)
    source = load_grid(args.input)
    grid = wrap_phase(source)
    if args.noise:
        grid = apply_noise(grid, args.noise, config.seed, reference=source)
    save_grid(grid, args.output)
    return 0


def cmd_unwrap(args: argparse.Namespace) -> int:
    config = _config_from(args)
    if not config.input or not config.output:
        raise UsageError("unwrap needs --input and --output", key="input" if not config.input else "output")
    pw = load_grid(config.input)
    report = run_method(pw, config)
    save_grid(report.phase, config.output)
    base = os.path.splitext(config.output)[0]
    _write_lines(base + ".report.txt", report.to_lines())
    if config.png:
        write_heatmap(report.phase, base + ".png")
    logger.info(f"{config.method} took {report.runtime_ms:.1f} ms")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    if not args.truth and not args.wrapped:
        raise UsageError("evaluate needs --truth or --wrapped", key="truth")
    rec = load_grid(args.input)
    truth = load_grid(args.truth) if args.truth else None
    wrapped = load_grid(args.wrapped) if args.wrapped else None
    lines = evaluate(rec, truth, wrapped).to_lines()
    print("\n".join(lines))
    if args.output:
        _write_lines(args.output, lines)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    config = _config_from(args)
    methods = args.methods or []
    if not methods:
        raise UsageError("compare needs at least one --method", key="method")
    if args.seeds:
        cases = simulated_cases(config, _parse_seeds(args.seeds))
    elif args.truth:
        truth = load_grid(args.truth)
        wrapped = load_grid(args.input) if args.input else wrap_phase(truth)
        cases = [Case(os.path.splitext(os.path.basename(args.truth))[0], truth, wrapped)]
    else:
        raise UsageError("compare needs --seeds or --truth", key="truth")

    progress_dir = os.getenv("DWFS_PROGRESS_DIR")
    tracker = CompareProgressTracker(progress_dir) if progress_dir else None
    rows = compare(methods, cases, config, output_dir=args.output, threads=args.threads, tracker=tracker)
    table = format_table(rows)
    sys.stdout.write(table)
    if args.output:
        write_bytes_atomic(os.path.join(args.output, "compare.tsv"), table.encode("utf-8"))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "wrap": cmd_wrap,
    "unwrap": cmd_unwrap,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the command line.

    Args:
        argv (List[str], optional): Arguments, defaults to sys.argv[1:]

    Returns:
        int: Process exit code
    """
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(getattr(args, "verbose", False))
        if not args.command:
            raise UsageError("Missing subcommand; use one of " + ", ".join(COMMANDS))
        return COMMANDS[args.command](args)
    except DWFSError as e:
        configure_logging()
        key = f" [{e.key}]" if getattr(e, "key", None) else ""
        logger.error(f"{type(e).__name__}{key}: {str(e)}")
        return e.exit_code
    except OSError as e:
        configure_logging()
        logger.error(f"I/O error: {str(e)}")
        return GridIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())
