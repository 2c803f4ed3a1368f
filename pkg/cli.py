"""Command-line entry point: gen-data, train, impute, eval-essentiality and gradcheck."""

import os

from dotenv import load_dotenv

# Thread caps must be in the environment before numpy loads its BLAS.
load_dotenv()
_THREADS = os.getenv("COLLAGAN_THREADS")
if _THREADS:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(_var, _THREADS)

import argparse  # noqa: E402
import subprocess  # noqa: E402
import sys  # noqa: E402
from datetime import datetime  # noqa: E402
from pathlib import Path  # noqa: E402
from typing import Any, Dict, List, Optional  # noqa: E402

from datasets import generate_dataset, load_dataset, save_dataset  # noqa: E402
from models.config import DEFAULT_DOMAINS  # noqa: E402
from models.records import RunManifest  # noqa: E402
from networks import GeneratorNet  # noqa: E402
from pipeline import (  # noqa: E402
    EssentialityStage,
    GradCheckStage,
    ImputationStage,
    TrainerStage,
    load_checkpoint,
)
from pipeline.gradcheck_stage import DEFAULT_TOLERANCE  # noqa: E402
from utils.config_loader import default_seed, load_train_config  # noqa: E402
from utils.exceptions import CollaGANError, ConfigError, NumericError  # noqa: E402
from utils.logger import attach_file_handler, detach_handler, get_logger  # noqa: E402

__version__ = "0.1.0"

MANIFEST_FILE = "run_manifest.json"

logger = get_logger("cli")


def version_string() -> str:
    """``git describe`` of the working tree, or the package version outside a checkout."""
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, check=True, cwd=Path(__file__).resolve().parent,
        )
        return described.stdout.strip() or f"v{__version__}"
    except (OSError, subprocess.CalledProcessError):
        return f"v{__version__}"


# *** subcommands ***

def cmd_gen_data(args: argparse.Namespace, manifest: RunManifest) -> Dict[str, Any]:
    domains = args.domains.split(",") if args.domains else list(DEFAULT_DOMAINS)
    dataset = generate_dataset(args.subjects, args.slices, args.size, args.size, args.seed, domains)
    path = save_dataset(dataset, args.out)
    manifest.config = {"subjects": args.subjects, "slices": args.slices, "size": args.size, "domains": domains}
    manifest.outputs.append(str(path))
    return {"status": "success"}


def cmd_train(args: argparse.Namespace, manifest: RunManifest) -> Dict[str, Any]:
    dataset = load_dataset(args.data)
    n = len(dataset.domains)
    cfg = load_train_config(args.config, {
        "seed": args.seed,
        "steps": args.steps,
        "generator.n_domains": n,
        "discriminator.n_domains": n,
    })
    manifest.seed = cfg.seed
    manifest.config = cfg.model_dump(mode="json")
    result = TrainerStage().process({"dataset": dataset, "config": cfg, "out": args.out, "resume": args.resume})
    if result["status"] == "success":
        manifest.outputs += [result["checkpoint"], result["log_path"]]
    return result


def _restore_generator(checkpoint: str) -> Dict[str, Any]:
    state = load_checkpoint(checkpoint)
    logger.info(f"Loaded checkpoint {state['path']} (step {state['meta'].step})")
    return state


def cmd_impute(args: argparse.Namespace, manifest: RunManifest) -> Dict[str, Any]:
    state = _restore_generator(args.checkpoint)
    dataset = load_dataset(args.data)
    cfg = state["config"]
    manifest.seed = cfg.seed
    manifest.config = {"target_domain": args.target_domain, "split": args.split, "checkpoint": str(state["path"])}
    result = ImputationStage().process({
        "generator": state["generator"],
        "dataset": dataset,
        "target_domain": args.target_domain,
        "split": args.split,
        "out": args.out,
        "checkpoint": str(state["path"]),
        "untrained": GeneratorNet(cfg.generator, seed=cfg.seed),
        "dump_images": not args.no_images,
    })
    if result["status"] == "success":
        manifest.outputs += result["outputs"]
    return result


def cmd_eval_essentiality(args: argparse.Namespace, manifest: RunManifest) -> Dict[str, Any]:
    state = _restore_generator(args.checkpoint)
    dataset = load_dataset(args.data)
    manifest.seed = state["config"].seed
    manifest.config = {"split": args.split, "checkpoint": str(state["path"])}
    result = EssentialityStage().process({
        "generator": state["generator"],
        "dataset": dataset,
        "split": args.split,
        "out": args.out,
        "checkpoint": str(state["path"]),
    })
    if result["status"] == "success":
        manifest.outputs += result["outputs"]
    return result


def cmd_gradcheck(args: argparse.Namespace, manifest: RunManifest) -> Dict[str, Any]:
    manifest.config = {"tolerance": args.tolerance, "seeds": args.seeds}
    result = GradCheckStage().process({"seed": args.seed, "seeds": args.seeds, "tolerance": args.tolerance})
    if result["status"] == "failed":
        failure = NumericError(f"gradient check failed for {', '.join(result['failed'])}")
        result.update(error=str(failure), error_type=failure.category, exit_code=failure.exit_code)
    return result


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "impute": cmd_impute,
    "eval-essentiality": cmd_eval_essentiality,
    "gradcheck": cmd_gradcheck,
}


# *** parser ***

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collagan", description="Multi-domain image imputation on phantom data")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
        p.add_argument("--out", required=out_required, help="Output directory")
        p.add_argument("--log-file", default=None, help="Also write the log to this file inside --out")

    p = sub.add_parser("gen-data", help="Generate a synthetic phantom dataset")
    p.add_argument("--subjects", type=int, default=10)
    p.add_argument("--slices", type=int, default=28)
    p.add_argument("--size", type=int, default=32, help="Image height and width")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--domains", default=None, help="Comma-separated domain names")
    common(p)

    p = sub.add_parser("train", help="Train generator and discriminator")
    p.add_argument("--data", required=True, help="Dataset directory")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--resume", default=None, help="Checkpoint directory to continue from")
    common(p)

    p = sub.add_parser("impute", help="Impute held-out domains and score them")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target-domain", default="all", help="Domain name or 'all'")
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    p.add_argument("--no-images", action="store_true", help="Skip the PGM dumps")
    common(p)

    p = sub.add_parser("eval-essentiality", help="Leave-one-out domain substitution study")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test"])
    common(p)

    p = sub.add_parser("gradcheck", help="Finite-difference check of every primitive and loss")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--seeds", type=int, default=100, help="Random draws per case")
    p.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE)
    common(p, out_required=False)

    return parser


def write_manifest(manifest: RunManifest, out: Optional[str]) -> Optional[Path]:
    if not out:
        return None
    path = Path(out) / MANIFEST_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    return path


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit code (0 ok, 2 config, 3 data, 4 numeric)."""
    args = build_parser().parse_args(argv)
    handler = None
    manifest = RunManifest(subcommand=args.command, version=version_string())
    try:
        # train keeps None so a config-file seed is not overridden
        if args.command in ("gen-data", "gradcheck") and args.seed is None:
            args.seed = default_seed()
        manifest.seed = getattr(args, "seed", None)
        if args.log_file:
            if Path(args.log_file).is_absolute():
                raise ConfigError("--log-file must be a path inside --out")
            handler = attach_file_handler(Path(args.out or ".") / args.log_file)
        logger.info(f"collagan {manifest.version}: {args.command}")
        result = COMMANDS[args.command](args, manifest)
    except CollaGANError as exc:
        logger.error(f"{args.command} failed: {exc}")
        result = {"status": "error", "error": str(exc), "error_type": exc.category, "exit_code": exc.exit_code}

    exit_code = 0 if result.get("status") == "success" else int(result.get("exit_code", 1))
    manifest.status = "success" if exit_code == 0 else f"error:{result.get('error_type', 'internal')}"
    manifest.finished_at = datetime.now()
    write_manifest(manifest, getattr(args, "out", None))
    if exit_code:
        logger.error(f"exit {exit_code}: {result.get('error')}")
    if handler is not None:
        detach_handler(handler)
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
