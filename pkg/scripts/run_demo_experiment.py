#!/usr/bin/env python3
"""End-to-end demo experiment on the scripted fixtures.

Builds the fixtures, then runs the three headline analyses through the CLI:
category breakdown on the 50-scene set, a context-width sweep with the
masked reference, and the two-classifier adversarial cross matrix. Charts
land next to each run's summary.json.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path


def run(args):
    cmd = [sys.executable, "-m", "stcert.cli"] + [str(a) for a in args]
    print("+", " ".join(cmd[2:]))
    subprocess.run(cmd, check=True)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_runs", help="output directory")
    args = parser.parse_args()
    out = Path(args.out)
    fixtures = out / "fixtures"

    subprocess.run(
        [sys.executable, Path(__file__).with_name("make_demo_fixture.py"),
         "--out", str(fixtures)],
        check=True)

    demo_world = fixtures / "demo" / "world.json"
    run(["eval",
         "--images", fixtures / "demo" / "images",
         "--classifier", f"fake:{demo_world}",
         "--segmenter", f"fake:{demo_world}",
         "--dataset", "mixed_10",
         "--out", out / "eval"])
    run(["report", "--summary", out / "eval" / "summary.json",
         "--out", out / "eval"])

    sweep_world = fixtures / "sweep" / "world.json"
    run(["sweep",
         "--images", fixtures / "sweep" / "images",
         "--classifier", f"fake:{sweep_world}",
         "--segmenter", f"fake:{sweep_world}",
         "--dataset", "mixed_10",
         "--levels", "0,1,2,3,4,5",
         "--out", out / "sweep"])
    run(["report", "--summary", out / "sweep" / "summary.json",
         "--out", out / "sweep"])

    adv = fixtures / "adv"
    run(["cross",
         "--images", adv / "images",
         "--classifiers", f"fake:{adv / 'a.json'},fake:{adv / 'b.json'}",
         "--segmenter", f"fake:{adv / 'seg.json'}",
         "--adversarial",
         "--dataset", "mixed_10",
         "--out", out / "cross"])
    run(["report", "--summary", out / "cross" / "summary.json",
         "--out", out / "cross"])

    summary = json.loads((out / "eval" / "summary.json").read_text())
    report = summary["report"]
    print("\ncategory breakdown on the demo set:")
    for category, count in report["counts"].items():
        print(f"  {category:>11}: {count:3d}  ({report['rates'][category]:.2f})")
    print(f"  consistency: {report['consistency_rate']:.2f}")

    sweep = json.loads((out / "sweep" / "summary.json").read_text())
    print("\ncertified-correct rate vs context width:")
    for point in sweep["points"]:
        rate = point["report"]["rates"]["CertCorr"]
        print(f"  {point['label']:>4}: {rate:.2f}")

    cross = json.loads((out / "cross" / "summary.json").read_text())
    print("\nadversarial flag rate (rows = first, cols = second):")
    for name, row in zip(cross["names"], cross["matrix"]):
        cells = "  ".join(f"{entry['overall_success']:.2f}" for entry in row)
        print(f"  {name:>20}: {cells}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
