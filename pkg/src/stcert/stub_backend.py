"""Reference child process for the backend line protocol.

Speaks newline-delimited JSON on stdin/stdout; one object per line.  Used
by the test suite to exercise the adapter and usable as a template for
wiring real models:

    stcert eval --classifier "proc:python3 -m stcert.stub_backend --kind classifier" ...

Failure-injection flags exist purely for testing the adapter's error
paths.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .imageops import BBox, rle_encode


def _detection_for(width: int, height: int) -> dict:
    import numpy as np

    box = BBox(width // 4, height // 4, max(width // 4 * 3, width // 4 + 1),
               max(height // 4 * 3, height // 4 + 1))
    mask = np.zeros((height, width), dtype=bool)
    mask[box.y0 : box.y1, box.x0 : box.x1] = True
    return {
        "box": box.to_list(),
        "mask_rle": rle_encode(mask),
        "mask_w": width,
        "mask_h": height,
        "score": 0.9,
    }


def _respond(request: dict, args) -> dict:
    op = request.get("op")
    rid = request.get("id")
    if args.fail_op and op == args.fail_op:
        return {"id": rid, "error": f"injected failure for op {op!r}"}
    if op == "info":
        return {
            "id": rid,
            "kind": args.kind,
            "name": f"stub-{args.kind}",
            "class_count": args.class_count,
            "thread_safe": True,
        }
    if op == "classify" and args.kind == "classifier":
        return {"id": rid, "class_id": args.class_id, "confidence": 0.9}
    if op == "ground" and args.kind == "segmenter":
        from base64 import b64decode

        from .imageops import png_decode

        image = png_decode(b64decode(request["image_png_b64"]))
        h, w = image.shape[:2]
        detections = [] if args.empty else [_detection_for(w, h)]
        return {"id": rid, "detections": detections}
    return {"id": rid, "error": f"unsupported op {op!r} for kind {args.kind!r}"}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", choices=["classifier", "segmenter"],
                        default="classifier")
    parser.add_argument("--class-id", type=int, default=0)
    parser.add_argument("--class-count", type=int, default=1000)
    parser.add_argument("--empty", action="store_true",
                        help="segmenter returns no detections")
    parser.add_argument("--fail-op", default=None,
                        help="answer this op with an error response")
    parser.add_argument("--sleep", type=float, default=0.0,
                        help="delay before each non-info response")
    parser.add_argument("--swap-pairs", action="store_true",
                        help="answer non-info requests two at a time, in "
                             "reverse arrival order")
    parser.add_argument("--malformed-after", type=int, default=-1,
                        help="emit a garbage line instead of the Nth response")
    args = parser.parse_args(argv)

    emitted = 0
    pending: list[dict] = []

    def emit(response: dict):
        nonlocal emitted
        if emitted == args.malformed_after:
            sys.stdout.write("this is not json\n")
        else:
            sys.stdout.write(json.dumps(response) + "\n")
        sys.stdout.flush()
        emitted += 1

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        if request.get("op") != "info" and args.sleep:
            time.sleep(args.sleep)
        if args.swap_pairs and request.get("op") != "info":
            pending.append(request)
            if len(pending) == 2:
                for queued in reversed(pending):
                    emit(_respond(queued, args))
                pending.clear()
            continue
        emit(_respond(request, args))
    for queued in reversed(pending):
        emit(_respond(queued, args))
    return 0


if __name__ == "__main__":
    sys.exit(main())
