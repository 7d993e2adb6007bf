#!/usr/bin/env python3
"""Write the scripted demo fixtures to disk for CLI experiments.

Produces, under the output directory:
  demo/world.json + demo/images/      50 scenes covering all six categories
  sweep/world.json + sweep/images/    context-width flip scenes
  adv/{a,b,seg}.json + adv/images/    two-classifier repeat-error scenes
  demo/expected.json                  per-scene outcome/category ground truth
"""

import argparse
import json
from pathlib import Path

from stcert.backends import write_scene_tree
from stcert.fixtures import adversarial_worlds, demo_world, sweep_world
from stcert.taxonomy import default_taxonomy_path, load_taxonomy


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="fixtures", help="output directory")
    parser.add_argument("--taxonomy", default=str(default_taxonomy_path()))
    args = parser.parse_args()

    tax = load_taxonomy(args.taxonomy)
    out = Path(args.out)

    spec, expected = demo_world(tax)
    demo_dir = out / "demo"
    demo_dir.mkdir(parents=True, exist_ok=True)
    (demo_dir / "world.json").write_text(
        json.dumps(spec.to_dict(), indent=1, sort_keys=True))
    (demo_dir / "expected.json").write_text(json.dumps(
        {sid: {"outcome": e.outcome.value, "category": e.category.value}
         for sid, e in sorted(expected.items())},
        indent=1, sort_keys=True))
    write_scene_tree(spec, demo_dir / "images", tax)
    print(f"wrote {len(spec.scenes)} demo scenes to {demo_dir}")

    sweep = sweep_world(tax)
    sweep_dir = out / "sweep"
    sweep_dir.mkdir(parents=True, exist_ok=True)
    (sweep_dir / "world.json").write_text(
        json.dumps(sweep.to_dict(), indent=1, sort_keys=True))
    write_scene_tree(sweep, sweep_dir / "images", tax)
    print(f"wrote {len(sweep.scenes)} sweep scenes to {sweep_dir}")

    spec_a, spec_b, spec_seg = adversarial_worlds(tax)
    adv_dir = out / "adv"
    adv_dir.mkdir(parents=True, exist_ok=True)
    for name, world in [("a", spec_a), ("b", spec_b), ("seg", spec_seg)]:
        (adv_dir / f"{name}.json").write_text(
            json.dumps(world.to_dict(), indent=1, sort_keys=True))
    write_scene_tree(spec_seg, adv_dir / "images", tax)
    print(f"wrote {len(spec_seg.scenes)} adversarial scenes to {adv_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
