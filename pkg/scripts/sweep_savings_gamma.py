#!/usr/bin/env python3
"""Sweep the final-period risk-aversion coefficient of the savings demo and
tabulate how the optimal first decision responds to perfect information."""
import argparse
from pathlib import Path

from precaution.cli import main as cli_main

CONFIG = Path(__file__).resolve().parent / "configs" / "savings_demo.json"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="sweep_out")
    parser.add_argument("--values", default="1.3,1.7,2.0,2.5,3.0")
    args = parser.parse_args()
    return cli_main(
        [
            "sweep",
            "--config", str(CONFIG),
            "--out", args.out,
            "--param", "functions.u3.gamma",
            "--values", args.values,
        ]
    )


if __name__ == "__main__":
    raise SystemExit(main())
