#!/usr/bin/env python3
"""
Run the memory-time scaling experiment over a grid of temperatures.

Usage:
    python scripts/sweep.py --model B --case case1 --cutoff 2 --n 8 12 16 \
        --beta 2 3 4 --t-max 20
    python scripts/sweep.py --model C --case case3-singlet --length 3 --cutoff 2 \
        --n 6 8 10 --temperature 0.3 0.5 --t-max 40 --workers 3
"""

import argparse
import csv
import multiprocessing
import os
import sys
from pathlib import Path

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.config import settings
from app.physics.lindblad_sim import scaling_report
from app.utils.logger import get_logger

logger = get_logger("sweep")

HEADER = [
    "beta",
    "n",
    "memory_time",
    "extrapolated",
    "early_slope",
    "tail_fraction",
    "memory_exponent",
    "slope_exponent",
]


def sweep_point(job: dict) -> list[list]:
    """One temperature: the scaling report flattened to CSV rows."""
    report = scaling_report(
        job["model"],
        job["case"],
        job["ns"],
        job["beta"],
        job["cutoff"],
        job["times"],
        length=job["length"],
        level_max=job["level_max"],
        penalty=job["penalty"],
    )
    memory = report.memory_fit.exponent if report.memory_fit else None
    slope = report.slope_fit.exponent if report.slope_fit else None
    return [
        [
            job["beta"],
            p.n,
            p.memory_time,
            p.extrapolated,
            p.early_slope,
            p.tail_fraction,
            memory,
            slope,
        ]
        for p in report.points
    ]


def main():
    parser = argparse.ArgumentParser(
        description="Sweep the scaling experiment over temperatures",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--model", required=True, choices=["A", "B", "C"])
    parser.add_argument("--case", required=True)
    parser.add_argument("--cutoff", type=int, required=True)
    parser.add_argument("--n", type=int, nargs="+", required=True)
    grid = parser.add_mutually_exclusive_group(required=True)
    grid.add_argument("--beta", type=float, nargs="+", help="Inverse temperatures")
    grid.add_argument("--temperature", type=float, nargs="+", help="Temperatures")
    parser.add_argument("--t-max", type=float, required=True)
    parser.add_argument("--points", type=int, default=101)
    parser.add_argument("--length", type=int, default=None)
    parser.add_argument("--level-max", type=int, default=None)
    parser.add_argument("--penalty", type=float, default=None)
    parser.add_argument("--workers", type=int, default=settings.WORKERS)
    parser.add_argument(
        "--output", type=Path, default=Path(settings.OUTPUT_DIR) / "sweep.csv"
    )
    args = parser.parse_args()

    betas = args.beta or [1 / t for t in args.temperature]
    step = args.t_max / (args.points - 1)
    times = [k * step for k in range(args.points)]
    jobs = [
        dict(
            model=args.model,
            case=args.case,
            ns=sorted(args.n),
            beta=beta,
            cutoff=args.cutoff,
            times=times,
            length=args.length,
            level_max=args.level_max,
            penalty=args.penalty,
        )
        for beta in betas
    ]
    logger.info(f"Sweeping {len(jobs)} temperatures over N={sorted(args.n)}")
    if args.workers > 1 and len(jobs) > 1:
        with multiprocessing.Pool(min(args.workers, len(jobs))) as pool:
            results = pool.map(sweep_point, jobs)
    else:
        results = [sweep_point(job) for job in jobs]

    args.output.parent.mkdir(parents=True, exist_ok=True)
    with args.output.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(HEADER)
        for rows in results:
            writer.writerows(rows)
    print(f"Wrote {sum(len(r) for r in results)} rows to {args.output}")


if __name__ == "__main__":
    main()
