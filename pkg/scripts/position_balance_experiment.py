#!/usr/bin/env python3
"""Measure answer-position balance of the option shuffler over many seeded draws."""

import argparse

import numpy as np

from motioncurate.generate import ParsedQA, shuffle_choices


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--draws", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    item = ParsedQA(question="q?", options=("right", "w1", "w2", "w3"), correct_index=0)
    rng = np.random.default_rng(args.seed)
    counts = np.zeros(4, dtype=int)
    for _ in range(args.draws):
        counts[shuffle_choices(item, rng).correct_index] += 1

    print(f"{args.draws} shuffles, seed {args.seed}")
    for letter, count in zip("ABCD", counts):
        pct = 100.0 * count / args.draws
        bar = "#" * int(pct)
        print(f"  {letter}: {count:>7}  {pct:6.3f}%  {bar}")
    spread = counts.max() - counts.min()
    print(f"max-min spread: {spread} ({100.0 * spread / args.draws:.3f} points)")


if __name__ == "__main__":
    main()
