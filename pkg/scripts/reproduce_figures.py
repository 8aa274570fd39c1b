# scripts/reproduce_figures.py - 三组扫描实验批量运行脚本
import sys
import os

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import argparse
import asyncio
import logging
from pathlib import Path

from app.config import get_settings
from app.main import configure_logging
from app.schemas.experiment import ExperimentKind, ExperimentSpec
from app.schemas.scenario import ScenarioConfig
from app.services.experiment_service import experiment_service
from app.storage import result_store

settings = get_settings()
logger = logging.getLogger(__name__)


def figure_specs(trials: int, seed: int) -> dict:
    """Nt=64, L=1 的三组实验设置"""
    base = ScenarioConfig(num_tx=64, num_elements=128, num_pairs=10, paths_strong=1, seed=seed)
    return {
        "irs_elements": ExperimentSpec(
            kind=ExperimentKind.SWEEP_N,
            base=base,
            sweep_values=[8, 16, 32, 64, 128],
            pair_counts=[20, 40],
            trials=trials,
        ),
        "rank_g": ExperimentSpec(
            kind=ExperimentKind.SWEEP_RANK,
            base=base,
            sweep_values=[1, 2, 5, 10, 20, 30, 40, 50, 64],
            pair_counts=[10, 20, 30],
            trials=trials,
        ),
        "total_snr": ExperimentSpec(
            kind=ExperimentKind.SWEEP_SNR,
            base=base,
            sweep_values=[0.25, 0.5, 1.0, 1.5, 2.0],
            pair_counts=[10, 20],
            trials=trials,
        ),
        "total_snr_n64": ExperimentSpec(
            kind=ExperimentKind.SWEEP_SNR,
            base=base.with_updates(num_elements=64),
            sweep_values=[1.0],
            pair_counts=[20],
            trials=trials,
        ),
    }


async def run_all(output_dir: Path, trials: int, seed: int):
    for name, spec in figure_specs(trials, seed).items():
        logger.info(f"Running {name} ({spec.kind.value}, {trials} trials per point)")
        rows = await experiment_service.run(spec)
        path = await result_store.write_results(rows, output_dir / f"{name}.csv")
        print(f"✅ {name}: {len(rows)} rows -> {path}")


def main():
    parser = argparse.ArgumentParser(description="Run the IRS element, rank and total SNR sweeps")
    parser.add_argument("--output-dir", type=str, default=settings.OUTPUT_DIR)
    parser.add_argument("--trials", type=int, default=settings.DEFAULT_TRIALS)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()

    configure_logging(args.verbose)
    asyncio.run(run_all(Path(args.output_dir), args.trials, args.seed))


if __name__ == "__main__":
    main()
