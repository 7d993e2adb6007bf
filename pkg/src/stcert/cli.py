"""Command-line surface: certify one image, evaluate datasets, sweep context
widths, cross classifier pairs, score adversarial sets, render reports.

Backend specs are strings: "fake:<world.json>" builds the deterministic
fake backends, "proc:<command>" attaches an external process speaking the
line protocol.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .backends import (
    BackendError,
    fake_classifier,
    fake_segmenter,
    load_fake_world,
    process_backend,
)
from .certifier import CertConfig, Outcome, certify
from .evaluation import (
    CATEGORIES,
    adversarial_summary,
    cross_matrix,
    cw_sweep,
    per_class_delta,
    run_dataset,
    similar_pairs,
    summarize,
    write_trial_log,
)
from .imageops import png_decode
from .taxonomy import TaxonomyError, default_taxonomy_path, load_taxonomy

EXIT_CERTIFIED = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_REJECTED = 3
EXIT_NOBOX = 4

_OUTCOME_EXIT = {
    Outcome.CERTIFIED: EXIT_CERTIFIED,
    Outcome.REJECTED: EXIT_REJECTED,
    Outcome.NO_BOX: EXIT_NOBOX,
}


# ---------------------------------------------------------------------------
# Backend spec strings
# ---------------------------------------------------------------------------

class SpecError(ValueError):
    pass


def build_backend(spec: str, role: str):
    """role is 'classifier' or 'segmenter'."""
    if spec.startswith("fake:"):
        world = load_fake_world(spec[len("fake:"):])
        return fake_classifier(world) if role == "classifier" else fake_segmenter(world)
    if spec.startswith("proc:"):
        backend = process_backend(spec[len("proc:"):])
        kind = backend.info().get("kind")
        if kind != role:
            raise SpecError(f"backend {spec!r} is a {kind}, expected a {role}")
        return backend
    raise SpecError(f"backend spec {spec!r} must start with 'fake:' or 'proc:'")


def _parse_rgb(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise SpecError(f"expected r,g,b, got {text!r}")
    return tuple(int(p) for p in parts)  # type: ignore[return-value]


def _config_from_args(args) -> CertConfig:
    return CertConfig(
        mode=args.mode,
        context_level=args.cw,
        target_size=args.target_size,
        blank=_parse_rgb(args.blank),
        box_threshold=args.box_threshold,
        text_threshold=args.text_threshold,
        superclass_fallback=not args.no_fallback,
        dataset=args.dataset,
    )


def _add_shared(parser: argparse.ArgumentParser, needs_out: bool = True):
    parser.add_argument("--taxonomy", default=str(default_taxonomy_path()),
                        help="taxonomy JSON file (default: shipped ImageNet file)")
    parser.add_argument("--dataset", required=True,
                        help="super-class dataset name, e.g. mixed_10")
    parser.add_argument("--segmenter", required=True, help="segmenter backend spec")
    parser.add_argument("--mode", choices=["masked", "cropped"], default="cropped")
    parser.add_argument("--cw", type=int, default=0, help="context width level 0..5")
    parser.add_argument("--blank", default="0,0,0",
                        help="masked-mode fill color as r,g,b")
    parser.add_argument("--box-threshold", type=float, default=0.30)
    parser.add_argument("--text-threshold", type=float, default=0.25)
    parser.add_argument("--target-size", type=int, default=224)
    parser.add_argument("--no-fallback", action="store_true",
                        help="disable the super-class fallback prompt")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    if needs_out:
        parser.add_argument("--out", required=True, help="output directory")


def _manifest(args, command: str, config: CertConfig, backends: dict) -> dict:
    return {
        "command": command,
        "config": config.to_dict(),
        "backends": backends,
        "taxonomy": str(args.taxonomy),
        "dataset": args.dataset,
        "seed": args.seed,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n",
                    encoding="utf-8")


# ---------------------------------------------------------------------------
# Deterministic SVG charts
# ---------------------------------------------------------------------------

_PALETTE = ["#4878d0", "#ee854a", "#6acc64", "#d65f5f", "#956cb4", "#8c613c"]


def bar_chart_svg(title: str, labels: list[str], values: list[float]) -> str:
    width, height = 640, 360
    left, bottom, top = 60, 50, 40
    plot_w, plot_h = width - left - 20, height - bottom - top
    vmax = max([*values, 1e-9])
    n = len(values)
    slot = plot_w / max(n, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" '
        f'y2="{top + plot_h}" stroke="black"/>',
    ]
    for i, (label, value) in enumerate(zip(labels, values)):
        bar_w = slot * 0.6
        x = left + slot * i + slot * 0.2
        h = plot_h * (value / vmax)
        y = top + plot_h - h
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
            f'height="{h:.2f}" fill="{color}"/>')
        parts.append(
            f'<text x="{x + bar_w / 2:.2f}" y="{y - 4:.2f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{value:.4f}</text>')
        parts.append(
            f'<text x="{x + bar_w / 2:.2f}" y="{top + plot_h + 16}" '
            f'text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_chart_svg(title: str, xlabels: list[str], values: list[float]) -> str:
    width, height = 640, 360
    left, bottom, top = 60, 50, 40
    plot_w, plot_h = width - left - 20, height - bottom - top
    vmax = max([*values, 1e-9])
    n = len(values)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width // 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" '
        f'y2="{top + plot_h}" stroke="black"/>',
    ]
    points = []
    for i, value in enumerate(values):
        x = left + (plot_w * (i + 0.5) / max(n, 1))
        y = top + plot_h * (1 - value / vmax)
        points.append((x, y))
    if len(points) > 1:
        path = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        parts.append(f'<polyline points="{path}" fill="none" '
                     f'stroke="{_PALETTE[0]}" stroke-width="2"/>')
    for (x, y), label, value in zip(points, xlabels, values):
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" '
                     f'fill="{_PALETTE[0]}"/>')
        parts.append(f'<text x="{x:.2f}" y="{y - 8:.2f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{value:.4f}</text>')
        parts.append(f'<text x="{x:.2f}" y="{top + plot_h + 16}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_certify(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    config = _config_from_args(args)
    first = build_backend(args.classifier, "classifier")
    second = first if args.classifier2 is None else build_backend(
        args.classifier2, "classifier")
    segmenter = build_backend(args.segmenter, "segmenter")
    image = png_decode(Path(args.image).read_bytes())
    verdict = certify(image, first, second, segmenter, taxonomy, config)
    print(json.dumps(verdict.to_dict(), sort_keys=True))
    return _OUTCOME_EXIT[verdict.outcome]


def _setup_run(args):
    taxonomy = load_taxonomy(args.taxonomy)
    if args.dataset not in taxonomy.datasets:
        raise SpecError(f"unknown dataset {args.dataset!r} in {args.taxonomy}")
    config = _config_from_args(args)
    first = build_backend(args.classifier, "classifier")
    second = first if args.classifier2 is None else build_backend(
        args.classifier2, "classifier")
    segmenter = build_backend(args.segmenter, "segmenter")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return taxonomy, config, first, second, segmenter, out


def cmd_eval(args, adversarial: bool = False) -> int:
    taxonomy, config, first, second, segmenter, out = _setup_run(args)
    records = run_dataset(args.images, args.dataset, first, second, segmenter,
                          taxonomy, config, seed=args.seed,
                          adversarial=adversarial, workers=args.workers)
    write_trial_log(records, out / "trials.jsonl")
    if adversarial:
        report = adversarial_summary(records)
        summary = {"kind": "adv", "report": report.to_dict()}
        rows = [["outcome", "count", "rate"]] + [
            [k, report.to_dict()["counts"][k],
             f"{report.to_dict()['counts'][k] / report.total if report.total else 0:.6f}"]
            for k in ("Rejected", "Certified", "NoBox")
        ]
        rows.append(["overall_success", "", f"{float(report.overall_success):.6f}"])
    else:
        report = summarize(records, args.dataset)
        pairs = similar_pairs(records, taxonomy, top_n=10)
        summary = {
            "kind": "eval",
            "report": report.to_dict(),
            "similar_pairs": [
                {"truth": t, "certified": p, "similarity": s} for t, p, s in pairs
            ],
        }
        rows = [["category", "count", "rate"]] + [
            [c, report.counts.get(c, 0), f"{float(report.rate(c)):.6f}"]
            for c in CATEGORIES
        ]
        rows.append(["consistency", "", f"{float(report.consistency_rate):.6f}"])
    _write_csv(out / "report.csv", rows)
    _write_json(out / "summary.json", summary)
    _write_json(out / "manifest.json", _manifest(
        args, "adv" if adversarial else "eval", config,
        {"classifier": args.classifier, "classifier2": args.classifier2,
         "segmenter": args.segmenter}))
    return 0


def cmd_adv(args) -> int:
    return cmd_eval(args, adversarial=True)


def cmd_sweep(args) -> int:
    taxonomy, config, first, second, segmenter, out = _setup_run(args)
    levels = [int(v) for v in args.levels.split(",")] if args.levels else []
    points = cw_sweep(args.images, args.dataset, first, second, segmenter,
                      taxonomy, config, levels, seed=args.seed,
                      workers=args.workers)
    _write_grouped_trials(out / "trials.jsonl",
                          [(p.label, p.records) for p in points])
    deltas = per_class_delta(points)
    summary = {
        "kind": "sweep",
        "points": [
            {
                "label": p.label,
                "report": p.report.to_dict(),
                "per_class": {str(cid): list(v) for cid, v in p.per_class.items()},
            }
            for p in points
        ],
        "per_class_delta": {
            label: {str(cid): d for cid, d in row.items()}
            for label, row in deltas.items()
        },
    }
    rows = [["label"] + CATEGORIES + ["consistency"]]
    for p in points:
        rows.append([p.label]
                    + [f"{float(p.report.rate(c)):.6f}" for c in CATEGORIES]
                    + [f"{float(p.report.consistency_rate):.6f}"])
    _write_csv(out / "report.csv", rows)
    _write_json(out / "summary.json", summary)
    _write_json(out / "manifest.json", _manifest(
        args, "sweep", config,
        {"classifier": args.classifier, "classifier2": args.classifier2,
         "segmenter": args.segmenter, "levels": levels}))
    return 0


def cmd_cross(args) -> int:
    taxonomy = load_taxonomy(args.taxonomy)
    if args.dataset not in taxonomy.datasets:
        raise SpecError(f"unknown dataset {args.dataset!r} in {args.taxonomy}")
    config = _config_from_args(args)
    specs = [s for s in args.classifiers.split(",") if s]
    classifiers = [build_backend(s, "classifier") for s in specs]
    segmenter = build_backend(args.segmenter, "segmenter")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sink: list = []
    matrix = cross_matrix(args.images, args.dataset, classifiers, segmenter,
                          taxonomy, config, adversarial=args.adversarial,
                          seed=args.seed, workers=args.workers,
                          record_sink=sink)
    _write_grouped_trials(out / "trials.jsonl",
                          [(f"{i}x{j}", records) for i, j, records in sink])
    names = [c.info().get("name", spec) for c, spec in zip(classifiers, specs)]
    headline = "overall_success" if args.adversarial else "consistency_rate"
    rows = [["first\\second"] + names]
    for name, row in zip(names, matrix):
        rows.append([name] + [
            f"{float(entry.overall_success if args.adversarial else entry.consistency_rate):.6f}"
            for entry in row
        ])
    _write_csv(out / "matrix.csv", rows)
    summary = {
        "kind": "cross",
        "adversarial": args.adversarial,
        "headline": headline,
        "names": names,
        "matrix": [[entry.to_dict() for entry in row] for row in matrix],
    }
    _write_json(out / "summary.json", summary)
    _write_json(out / "manifest.json", _manifest(
        args, "cross", config,
        {"classifiers": specs, "segmenter": args.segmenter,
         "adversarial": args.adversarial}))
    return 0


def cmd_report(args) -> int:
    summary = json.loads(Path(args.summary).read_text(encoding="utf-8"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kind = summary.get("kind")
    if kind == "eval":
        rates = summary["report"]["rates"]
        svg = bar_chart_svg("Category rates", CATEGORIES,
                            [rates[c] for c in CATEGORIES])
        (out / "categories.svg").write_text(svg, encoding="utf-8")
    elif kind == "adv":
        report = summary["report"]
        total = report["total"] or 1
        labels = ["Rejected", "Certified", "NoBox"]
        svg = bar_chart_svg("Adversarial outcome rates", labels,
                            [report["counts"][k] / total for k in labels])
        (out / "categories.svg").write_text(svg, encoding="utf-8")
    elif kind == "sweep":
        labels = [p["label"] for p in summary["points"]]
        for category in CATEGORIES:
            values = [p["report"]["rates"][category] for p in summary["points"]]
            svg = line_chart_svg(f"{category} vs context width", labels, values)
            (out / f"sweep_{category}.svg").write_text(svg, encoding="utf-8")
    elif kind == "cross":
        names = summary["names"]
        key = summary["headline"]
        for i, row in enumerate(summary["matrix"]):
            values = [entry[key] for entry in row]
            svg = bar_chart_svg(f"{key} (first = {names[i]})", names, values)
            (out / f"cross_{i}.svg").write_text(svg, encoding="utf-8")
    else:
        raise SpecError(f"summary {args.summary} has unknown kind {kind!r}")
    return 0


def _write_grouped_trials(path: Path, groups) -> None:
    """One JSON line per trial, grouped by run label (kept in each line)."""
    lines = []
    for label, records in groups:
        for record in sorted(records, key=lambda r: r.image_id):
            doc = record.to_dict()
            doc["run"] = label
            lines.append(json.dumps(doc, sort_keys=True, separators=(",", ":")))
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def _write_csv(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stcert",
        description="Second-thought certification of image classifier predictions")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="certify a single image")
    p.add_argument("--image", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--classifier2", default=None)
    _add_shared(p, needs_out=False)
    p.set_defaults(func=cmd_certify)

    for name, func, help_text in [
        ("eval", cmd_eval, "evaluate a class-folder image tree"),
        ("adv", cmd_adv, "score an adversarial image tree (outcomes only)"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--images", required=True)
        p.add_argument("--classifier", required=True)
        p.add_argument("--classifier2", default=None)
        _add_shared(p)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="context-width sweep with masked reference")
    p.add_argument("--images", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--classifier2", default=None)
    p.add_argument("--levels", default="0,1,2,3,4,5",
                   help="comma-separated context levels")
    _add_shared(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cross", help="all first/second classifier pairs")
    p.add_argument("--images", required=True)
    p.add_argument("--classifiers", required=True,
                   help="comma-separated backend specs")
    p.add_argument("--adversarial", action="store_true")
    _add_shared(p)
    p.set_defaults(func=cmd_cross)

    p = sub.add_parser("report", help="render SVG charts from a summary.json")
    p.add_argument("--summary", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, TaxonomyError, BackendError, FileNotFoundError,
            ValueError) as e:
        print(f"stcert: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
