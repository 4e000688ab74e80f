#!/usr/bin/env python3
"""Write a demo workspace: two synthetic videos plus the mock-backend script."""

import argparse
from pathlib import Path

from motioncurate.demo import write_demo_workspace


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("root", type=Path, help="directory to populate")
    parser.add_argument(
        "--moving-camera",
        action="store_true",
        help="script the pose backend with heavy ego-motion so every video is excluded",
    )
    args = parser.parse_args()
    paths = write_demo_workspace(args.root, moving_camera=args.moving_camera)
    print(f"videos: {paths['videos']}")
    print(f"mock script: {paths['script']}")
    print()
    print("run the pipeline with:")
    print(f"  motioncurate curate {paths['videos']} --mock {paths['mocks']} "
          f"--out {Path(args.root) / 'out'} --seed 7")


if __name__ == "__main__":
    main()
