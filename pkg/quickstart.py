"""Quick start script: run the whole imputation workflow on a tiny phantom dataset."""

import sys
from pathlib import Path

from models.config import DataConfig, DiscriminatorConfig, GeneratorConfig, TrainConfig
from pipeline import RunOrchestrator, run_gradcheck

OUT_DIR = Path("quickstart_output")


def tiny_configs(steps: int = 200):
    """Data and training configs small enough for a laptop CPU."""
    data = DataConfig(n_subjects=3, slices_per_subject=4, height=32, width=32, seed=0)
    n = len(data.domains)
    train = TrainConfig(
        steps=steps,
        batch_size=2,
        seed=0,
        generator=GeneratorConfig(n_domains=n, base_channels=4, levels=2),
        discriminator=DiscriminatorConfig(n_domains=n, base_channels=4),
        val_every=50,
        log_every=25,
        checkpoint_every=100,
    )
    return data, train


def check_gradients() -> bool:
    """Short finite-difference pass over every primitive and loss."""
    print("Checking gradients...")
    results = run_gradcheck(seed=0, seeds=3)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"❌ Gradient check failed: {', '.join(failed)}")
        return False
    print(f"✓ {len(results)} gradient checks passed")
    return True


def run_workflow() -> bool:
    print("\n" + "=" * 80)
    print("RUNNING TINY WORKFLOW")
    print("=" * 80 + "\n")

    data_cfg, train_cfg = tiny_configs()
    print(f"Subjects: {data_cfg.n_subjects}, slices: {data_cfg.slices_per_subject}, "
          f"size: {data_cfg.height}x{data_cfg.width}, steps: {train_cfg.steps}")
    print("\nProcessing... (this may take a few minutes)\n")

    results = RunOrchestrator().process({"data_config": data_cfg, "train_config": train_cfg, "out": OUT_DIR})
    if results.get("status") != "completed":
        print(f"❌ Workflow failed: {results.get('error', 'Unknown error')}")
        return False

    fit = results["train"]["fit"]
    report = results["impute"]["report"]
    table = results["essentiality"]["table"]

    print("=" * 80)
    print("RESULTS")
    print("=" * 80)
    initial = sum(fit.initial_val_nmse.values()) / max(len(fit.initial_val_nmse), 1)
    print(f"\nValidation NMSE: step 0 {initial:.4f} -> best {fit.best_val_nmse:.4f} (step {fit.best_step})")
    print("\nImputation (test split):")
    for a in report.aggregates:
        print(f"  {a.target_domain:<6} NMSE {a.nmse_mean:.4f}  SSIM {a.ssim_mean:.4f}  "
              f"mean-image NMSE {a.baseline_mean_image_nmse:.4f}")
    print("\nEssentiality (enhancing Dice):")
    for row in table.rows:
        print(f"  {row.label:<10} {row.enhancing_dice_mean:.4f}")

    checks = [
        ("validation NMSE improved", fit.best_val_nmse is not None and fit.best_val_nmse <= initial),
        ("one essentiality row per domain plus Original", len(table.rows) == len(data_cfg.domains) + 1),
    ]
    print()
    for label, ok in checks:
        print(f"{'✓' if ok else '❌'} {label}")
    print(f"\nProcessing Time: {results['total_processing_time']:.2f} seconds")
    print(f"Outputs: {OUT_DIR.resolve()}")
    return all(ok for _, ok in checks)


def main() -> int:
    """Main quick start function."""
    print("\n" + "=" * 80)
    print("COLLAGAN PHANTOM IMPUTATION - QUICK START")
    print("=" * 80 + "\n")

    if not check_gradients():
        return 1
    if not run_workflow():
        print("\n❌ Quick start did not pass all checks.")
        return 1

    print("\n" + "=" * 80)
    print("NEXT STEPS")
    print("=" * 80)
    print("\n1. Generate a larger dataset:")
    print("   python cli.py gen-data --subjects 10 --slices 28 --size 32 --out runs/data")
    print("\n2. Train:")
    print("   python cli.py train --data runs/data --steps 2000 --out runs/train")
    print("\n3. Evaluate:")
    print("   python cli.py impute --checkpoint runs/train --data runs/data --out runs/impute")
    print("   python cli.py eval-essentiality --checkpoint runs/train --data runs/data --out runs/study")
    print("\n" + "=" * 80 + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
