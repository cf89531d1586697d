"""Run every experiment config and print an accuracy/time table.

    python3 scripts/run_all_configs.py [--configs DIR] [--only optdigits]

Reports are written where each config says (results/ by default).
"""
import argparse
from pathlib import Path

from rlskit.experiment import run_experiment

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", type=Path, default=ROOT / "configs")
    ap.add_argument("--only", default="", help="substring filter on config names")
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    print(f"{'config':22s} {'accuracy':>9s} {'time (s)':>9s} {'lambda':>10s}")
    for cfg in sorted(args.configs.glob("*.json")):
        if args.only not in cfg.stem:
            continue
        r = run_experiment(cfg, threads=args.threads)
        lam = r.hyperparameters.get("lambda", float("nan"))
        print(f"{r.name:22s} {100 * r.performance['accuracy']:8.2f}% "
              f"{r.total_seconds:9.2f} {lam:10.2e}", flush=True)


if __name__ == "__main__":
    main()
