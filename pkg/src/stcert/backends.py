"""Classifier and grounded-segmenter backends.

Three flavors:
  * deterministic fakes driven by a planted-rectangle world spec, used for
    all offline tests and fixtures;
  * an external-process adapter speaking newline-delimited JSON, used to
    attach real foundation models without bundling them;
  * whatever else implements the two small interface classes.
"""

from __future__ import annotations

import itertools
import json
import os
import shlex
import subprocess
import threading
from base64 import b64encode
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imageops import (
    BBox,
    as_image,
    png_encode,
    rle_decode,
    rle_encode,
    tight_bbox,
)

__all__ = [
    "BackendError",
    "Prediction",
    "Detection",
    "ClassifierBackend",
    "SegmenterBackend",
    "FakeObject",
    "FakeScene",
    "FakeWorldSpec",
    "load_fake_world",
    "fake_classifier",
    "fake_segmenter",
    "render_scene",
    "write_scene_tree",
    "process_backend",
    "DEFAULT_TIMEOUT_S",
    "TIMEOUT_ENV_VAR",
]

TIMEOUT_ENV_VAR = "STCERT_BACKEND_TIMEOUT_S"
DEFAULT_TIMEOUT_S = 120.0

DEFAULT_BOX_THRESHOLD = 0.30
DEFAULT_TEXT_THRESHOLD = 0.25


class BackendError(RuntimeError):
    """Backend failure: process death, protocol violation, or timeout."""


@dataclass(frozen=True)
class Prediction:
    class_id: int
    confidence: float


@dataclass
class Detection:
    box: BBox
    mask: np.ndarray  # (H, W) bool
    score: float


class ClassifierBackend:
    def classify(self, image) -> Prediction:
        raise NotImplementedError

    def info(self) -> dict:
        raise NotImplementedError


class SegmenterBackend:
    def ground(self, image, prompt: str,
               box_threshold: float = DEFAULT_BOX_THRESHOLD,
               text_threshold: float = DEFAULT_TEXT_THRESHOLD) -> list[Detection]:
        raise NotImplementedError

    def info(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Fake world
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FakeObject:
    class_id: int
    rect: BBox


@dataclass(frozen=True)
class FakeScene:
    scene_id: str
    truth: int
    objects: tuple[FakeObject, ...]


@dataclass
class FakeWorldSpec:
    """Planted-rectangle world: solid-color objects with known classes.

    Every planted class has a unique solid RGB color and a prompt
    vocabulary; classifiers and segmenters built from the same spec agree
    by construction, which makes end-to-end outcomes hand-computable.
    """

    name: str
    width: int
    height: int
    background_class: int
    background_color: tuple[int, int, int]
    colors: dict[int, tuple[int, int, int]]      # class_id -> RGB
    prompts: dict[int, tuple[str, ...]]          # class_id -> vocabulary
    scenes: tuple[FakeScene, ...] = ()
    class_count: int = 0

    def __post_init__(self):
        if self.class_count <= 0:
            self.class_count = max(
                [self.background_class, *self.colors.keys()], default=0) + 1
        seen = {}
        for cid, color in self.colors.items():
            if color in seen:
                raise ValueError(
                    f"color {color} assigned to classes {seen[color]} and {cid}")
            if color == self.background_color:
                raise ValueError(f"class {cid} uses the background color {color}")
            seen[color] = cid
        if set(self.prompts) != set(self.colors):
            raise ValueError("prompt vocabulary must cover exactly the planted classes")
        for scene in self.scenes:
            for obj in scene.objects:
                if obj.class_id not in self.colors:
                    raise ValueError(
                        f"scene {scene.scene_id}: unplanted class {obj.class_id}")
                if not obj.rect.within(self.width, self.height):
                    raise ValueError(
                        f"scene {scene.scene_id}: rect {obj.rect} out of bounds")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "image_size": [self.width, self.height],
            "background_class": self.background_class,
            "background_color": list(self.background_color),
            "class_count": self.class_count,
            "palette": [
                {
                    "class_id": cid,
                    "color": list(self.colors[cid]),
                    "prompts": list(self.prompts[cid]),
                }
                for cid in sorted(self.colors)
            ],
            "scenes": [
                {
                    "id": s.scene_id,
                    "truth": s.truth,
                    "objects": [
                        {"class_id": o.class_id, "rect": o.rect.to_list()}
                        for o in s.objects
                    ],
                }
                for s in self.scenes
            ],
        }

    @staticmethod
    def from_dict(doc: dict) -> "FakeWorldSpec":
        w, h = doc["image_size"]
        colors, prompts = {}, {}
        for entry in doc["palette"]:
            cid = entry["class_id"]
            colors[cid] = tuple(entry["color"])
            prompts[cid] = tuple(entry["prompts"])
        scenes = tuple(
            FakeScene(
                scene_id=s["id"],
                truth=s["truth"],
                objects=tuple(
                    FakeObject(o["class_id"], BBox(*o["rect"])) for o in s["objects"]
                ),
            )
            for s in doc.get("scenes", [])
        )
        return FakeWorldSpec(
            name=doc.get("name", "fake"),
            width=w,
            height=h,
            background_class=doc["background_class"],
            background_color=tuple(doc.get("background_color", (32, 32, 32))),
            colors=colors,
            prompts=prompts,
            scenes=scenes,
            class_count=doc.get("class_count", 0),
        )


def load_fake_world(path) -> FakeWorldSpec:
    return FakeWorldSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def render_scene(spec: FakeWorldSpec, scene: FakeScene) -> np.ndarray:
    """Rasterize a scene: background color, then objects painted in order."""
    img = np.empty((spec.height, spec.width, 3), dtype=np.uint8)
    img[:] = spec.background_color
    for obj in scene.objects:
        r = obj.rect
        img[r.y0 : r.y1, r.x0 : r.x1] = spec.colors[obj.class_id]
    return img


def write_scene_tree(spec: FakeWorldSpec, root, taxonomy) -> list[Path]:
    """Write all scenes as PNGs in the class-folder layout <root>/<synset>/."""
    root = Path(root)
    written = []
    for scene in spec.scenes:
        synset = taxonomy.by_id(scene.truth).synset
        directory = root / synset
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / f"{scene.scene_id}.png"
        path.write_bytes(png_encode(render_scene(spec, scene)))
        written.append(path)
    return written


class FakeClassifier(ClassifierBackend):
    """Predicts the dominant planted color's class, area-weighted.

    Ties go to the lowest class_id; an image with no planted color maps to
    the reserved background class. Confidence is the dominant color's
    fraction of the image area.
    """

    def __init__(self, spec: FakeWorldSpec):
        self.spec = spec

    def classify(self, image) -> Prediction:
        image = as_image(image)
        area = image.shape[0] * image.shape[1]
        best_id, best_count = self.spec.background_class, 0
        for cid in sorted(self.spec.colors):
            color = np.array(self.spec.colors[cid], dtype=np.uint8)
            count = int(np.count_nonzero((image == color).all(axis=-1)))
            if count > best_count:
                best_id, best_count = cid, count
        return Prediction(best_id, best_count / area)

    def info(self) -> dict:
        return {
            "kind": "classifier",
            "name": f"fake-classifier:{self.spec.name}",
            "class_count": self.spec.class_count,
            "thread_safe": True,
        }


class FakeSegmenter(SegmenterBackend):
    """Grounds a prompt to the planted rectangles whose class vocabulary
    contains it (exact lowercase match); masks are the exact rectangles."""

    def __init__(self, spec: FakeWorldSpec):
        self.spec = spec

    def ground(self, image, prompt,
               box_threshold=DEFAULT_BOX_THRESHOLD,
               text_threshold=DEFAULT_TEXT_THRESHOLD) -> list[Detection]:
        image = as_image(image)
        want = prompt.strip().lower()
        detections = []
        for cid in sorted(self.spec.colors):
            vocab = {p.lower() for p in self.spec.prompts[cid]}
            if want not in vocab:
                continue
            color = np.array(self.spec.colors[cid], dtype=np.uint8)
            present = (image == color).all(axis=-1)
            if not present.any():
                continue
            labels, n = ndimage.label(present)
            for k in range(1, n + 1):
                mask = labels == k
                detections.append(Detection(tight_bbox(mask), mask, 1.0))
        detections.sort(key=lambda d: d.box)
        return [d for d in detections if d.score >= box_threshold]

    def info(self) -> dict:
        return {
            "kind": "segmenter",
            "name": f"fake-segmenter:{self.spec.name}",
            "class_count": self.spec.class_count,
            "thread_safe": True,
        }


def fake_classifier(spec: FakeWorldSpec) -> FakeClassifier:
    return FakeClassifier(spec)


def fake_segmenter(spec: FakeWorldSpec) -> FakeSegmenter:
    return FakeSegmenter(spec)


# ---------------------------------------------------------------------------
# External-process adapter (newline-delimited JSON over stdin/stdout)
# ---------------------------------------------------------------------------

def resolve_timeout(timeout: float | None) -> float:
    if timeout is not None:
        return timeout
    env = os.environ.get(TIMEOUT_ENV_VAR)
    return float(env) if env else DEFAULT_TIMEOUT_S


class _ProcessClient:
    """Owns the child process; matches responses to requests by id, so a
    child may answer out of order or interleave pipelined requests."""

    def __init__(self, command: str, timeout: float | None = None):
        self.command = command
        self.timeout = resolve_timeout(timeout)
        try:
            self.proc = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as e:
            raise BackendError(f"failed to spawn {command!r}: {e}") from e
        self._ids = itertools.count()
        self._lock = threading.Lock()       # protects stdin writes + id draw
        self._cond = threading.Condition()
        self._responses: dict[int, dict] = {}
        self._dead: str | None = None
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        try:
            for line in self.proc.stdout:
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    rid = obj["id"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    self._fail(f"protocol violation: bad line from child: {line[:200]!r}")
                    return
                with self._cond:
                    self._responses[rid] = obj
                    self._cond.notify_all()
            self._fail("child closed stdout")
        except Exception as e:  # pragma: no cover - defensive
            self._fail(f"reader failed: {e}")

    def _fail(self, reason: str):
        with self._cond:
            if self._dead is None:
                self._dead = reason
            self._cond.notify_all()

    def request(self, payload: dict) -> dict:
        with self._lock:
            rid = next(self._ids)
            message = dict(payload, id=rid)
            if self._dead is not None:
                raise BackendError(f"{self.command!r}: {self._dead}")
            try:
                self.proc.stdin.write(json.dumps(message) + "\n")
                self.proc.stdin.flush()
            except (BrokenPipeError, ValueError, OSError) as e:
                raise BackendError(f"{self.command!r}: write failed: {e}") from e
        with self._cond:
            ok = self._cond.wait_for(
                lambda: rid in self._responses or self._dead is not None,
                timeout=self.timeout,
            )
            if rid in self._responses:
                response = self._responses.pop(rid)
            elif self._dead is not None:
                raise BackendError(f"{self.command!r}: {self._dead}")
            elif not ok:
                raise BackendError(
                    f"{self.command!r}: timed out after {self.timeout}s "
                    f"waiting for request {rid}")
            else:  # pragma: no cover
                raise BackendError(f"{self.command!r}: internal wait error")
        if "error" in response:
            raise BackendError(f"{self.command!r}: child error: {response['error']}")
        return response

    def close(self):
        try:
            if self.proc.stdin:
                self.proc.stdin.close()
        except OSError:
            pass
        try:
            self.proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self.proc.kill()


class ProcessClassifier(ClassifierBackend):
    def __init__(self, client: _ProcessClient, info: dict):
        self._client = client
        self._info = info

    def classify(self, image) -> Prediction:
        resp = self._client.request({
            "op": "classify",
            "image_png_b64": b64encode(png_encode(image)).decode("ascii"),
        })
        try:
            return Prediction(int(resp["class_id"]), float(resp["confidence"]))
        except (KeyError, TypeError, ValueError) as e:
            raise BackendError(f"malformed classify response: {resp}") from e

    def info(self) -> dict:
        return self._info

    def close(self):
        self._client.close()


class ProcessSegmenter(SegmenterBackend):
    def __init__(self, client: _ProcessClient, info: dict):
        self._client = client
        self._info = info

    def ground(self, image, prompt,
               box_threshold=DEFAULT_BOX_THRESHOLD,
               text_threshold=DEFAULT_TEXT_THRESHOLD) -> list[Detection]:
        resp = self._client.request({
            "op": "ground",
            "image_png_b64": b64encode(png_encode(image)).decode("ascii"),
            "prompt": prompt,
            "box_threshold": box_threshold,
            "text_threshold": text_threshold,
        })
        try:
            out = []
            for d in resp["detections"]:
                mask = rle_decode(d["mask_rle"], d["mask_w"], d["mask_h"])
                out.append(Detection(BBox(*d["box"]), mask, float(d["score"])))
            return out
        except (KeyError, TypeError, ValueError) as e:
            raise BackendError(f"malformed ground response: {resp}") from e

    def info(self) -> dict:
        return self._info

    def close(self):
        self._client.close()


def process_backend(command: str, timeout: float | None = None):
    """Spawn a child process speaking the line protocol and wrap it in the
    backend interface matching its advertised kind."""
    client = _ProcessClient(command, timeout)
    info = client.request({"op": "info"})
    kind = info.get("kind")
    meta = {
        "kind": kind,
        "name": info.get("name", command),
        "class_count": info.get("class_count", 0),
        "thread_safe": bool(info.get("thread_safe", False)),
    }
    if kind == "classifier":
        return ProcessClassifier(client, meta)
    if kind == "segmenter":
        return ProcessSegmenter(client, meta)
    client.close()
    raise BackendError(f"{command!r}: unknown backend kind {kind!r}")


def encode_detection(det: Detection) -> dict:
    """Detection -> wire dict (used by stub children and tests)."""
    h, w = det.mask.shape
    return {
        "box": det.box.to_list(),
        "mask_rle": rle_encode(det.mask),
        "mask_w": w,
        "mask_h": h,
        "score": det.score,
    }
