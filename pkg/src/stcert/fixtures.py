"""Scripted fake worlds with hand-derived expected outcomes.

Each builder plants solid-color rectangles so that every certification
verdict is forced by construction: the classifier sees dominant colors,
the segmenter matches prompts against a fixed vocabulary, and the crop or
mask geometry decides the second thought. The expected outcome per scene
is derived from that reasoning, independently of the pipeline code.
"""

from __future__ import annotations

from dataclasses import dataclass

from .backends import FakeObject, FakeScene, FakeWorldSpec
from .certifier import EvalCategory, Outcome
from .imageops import BBox
from .taxonomy import Taxonomy

__all__ = ["ExpectedScene", "demo_world", "sweep_world", "adversarial_worlds"]

SIZE = 64
BACKGROUND = (200, 200, 200)


@dataclass(frozen=True)
class ExpectedScene:
    outcome: Outcome
    category: EvalCategory


def _spread(i: int) -> BBox:
    # Deterministic 24x24 placement that stays inside the frame.
    x = 4 + (i * 7) % 24
    y = 4 + (i * 11) % 24
    return BBox(x, y, x + 24, y + 24)


def demo_world(taxonomy: Taxonomy) -> tuple[FakeWorldSpec, dict[str, ExpectedScene]]:
    """50-scene world covering all six evaluation categories (mixed_10).

    Scene roles and the reasoning that fixes their outcome:
      * consistent: one object whose lemma is in its own vocabulary; the
        ROI crop is solid that color, so the second thought repeats the
        original. Certified; truth matches -> CertCorr.
      * multi: two disconnected rectangles of the same class; two ROIs,
        both re-classified to the original. Certified, CertCorr.
      * intra: a german shepherd planted in a collie-labeled folder; both
        resolve to "dog". Certified, IntraError.
      * inter: a lion planted in a german-shepherd folder; feline vs dog.
        Certified, InterError.
      * nobox: husky vocabulary is empty and no vocabulary contains the
        fallback prompt "dog" over husky-only pixels. NoBox.
      * fallback: beagle vocabulary holds only "dog", so grounding succeeds
        on the second, super-class prompt. Certified, CertCorr.
      * miss: dominant tabby plus a small lion; "tabby" is (only) in the
        lion vocabulary, so the ROI is the lion and the second thought
        disagrees. Rejected; truth is the tabby -> Miss.
      * true_reject: same geometry, truth folder is the lion -> TrueReject.
    """
    ids = {
        name: taxonomy.by_lemma(name).class_id
        for name in ["German_shepherd", "collie", "canoe", "sports_car", "lion",
                     "Siberian_husky", "beagle", "tabby"]
    }
    colors = {
        ids["German_shepherd"]: (255, 0, 0),
        ids["canoe"]: (0, 255, 0),
        ids["sports_car"]: (0, 0, 255),
        ids["lion"]: (255, 255, 0),
        ids["Siberian_husky"]: (255, 0, 255),
        ids["beagle"]: (0, 255, 255),
        ids["tabby"]: (128, 64, 0),
    }
    prompts = {
        ids["German_shepherd"]: ("german shepherd",),
        ids["canoe"]: ("canoe",),
        ids["sports_car"]: ("sports car",),
        ids["lion"]: ("lion", "tabby"),
        ids["Siberian_husky"]: (),
        ids["beagle"]: ("dog",),
        ids["tabby"]: (),
    }

    scenes: list[FakeScene] = []
    expected: dict[str, ExpectedScene] = {}
    counter = 0

    def add(role, objects, truth, outcome, category):
        nonlocal counter
        scene_id = f"scene_{counter:03d}_{role}"
        counter += 1
        scenes.append(FakeScene(scene_id, truth, tuple(objects)))
        expected[scene_id] = ExpectedScene(outcome, category)

    for i, lemma in enumerate(
        ["German_shepherd"] * 4 + ["canoe"] * 4 + ["sports_car"] * 4
    ):
        cid = ids[lemma]
        add("consistent", [FakeObject(cid, _spread(i))], cid,
            Outcome.CERTIFIED, EvalCategory.CERT_CORR)
    for i in range(4):
        gs = ids["German_shepherd"]
        add("multi",
            [FakeObject(gs, BBox(4, 4, 20, 20)),
             FakeObject(gs, BBox(36 + i, 36, 52 + i, 52))],
            gs, Outcome.CERTIFIED, EvalCategory.CERT_CORR)
    for i in range(6):
        add("intra", [FakeObject(ids["German_shepherd"], _spread(i))],
            ids["collie"], Outcome.CERTIFIED, EvalCategory.INTRA_ERROR)
    for i in range(6):
        add("inter", [FakeObject(ids["lion"], _spread(i + 1))],
            ids["German_shepherd"], Outcome.CERTIFIED, EvalCategory.INTER_ERROR)
    for i in range(6):
        add("nobox", [FakeObject(ids["Siberian_husky"], _spread(i + 2))],
            ids["Siberian_husky"], Outcome.NO_BOX, EvalCategory.NO_BOX)
    for i in range(8):
        add("fallback", [FakeObject(ids["beagle"], _spread(i + 3))],
            ids["beagle"], Outcome.CERTIFIED, EvalCategory.CERT_CORR)
    for i in range(4):
        add("miss",
            [FakeObject(ids["tabby"], BBox(4, 4, 28, 28)),
             FakeObject(ids["lion"], BBox(40, 40 + i, 48, 48 + i))],
            ids["tabby"], Outcome.REJECTED, EvalCategory.MISS)
    for i in range(4):
        add("true_reject",
            [FakeObject(ids["tabby"], BBox(4, 4, 28, 28)),
             FakeObject(ids["lion"], BBox(40, 40 + i, 48, 48 + i))],
            ids["lion"], Outcome.REJECTED, EvalCategory.TRUE_REJECT)

    spec = FakeWorldSpec(
        name="demo50",
        width=SIZE,
        height=SIZE,
        background_class=max(c.class_id for c in taxonomy.classes) + 1,
        background_color=BACKGROUND,
        colors=colors,
        prompts=prompts,
        scenes=tuple(scenes),
    )
    assert len(scenes) == 50
    return spec, expected


def sweep_world(taxonomy: Taxonomy, n_scenes: int = 6) -> FakeWorldSpec:
    """Context-width fixture: the ROI crop flips from wrong to right as the
    box grows.

    The full frame is dominated by german-shepherd pixels (the truth), but
    the prompt "german shepherd" grounds to a small central lion rectangle
    (it sits in the lion vocabulary only). At tight crops the lion color
    dominates the secondary input and the trial is rejected; once the
    expanded box pulls in enough surrounding shepherd pixels the second
    thought flips to the original and the trial certifies. CertCorr is
    therefore non-decreasing in the context level, with the masked
    reference pinned at zero.
    """
    gs = taxonomy.by_lemma("German_shepherd").class_id
    lion = taxonomy.by_lemma("lion").class_id
    scenes = []
    for i in range(n_scenes):
        scenes.append(FakeScene(
            f"sweep_{i:02d}",
            gs,
            (
                FakeObject(gs, BBox(0, 0, SIZE, SIZE)),       # field
                FakeObject(lion, BBox(28, 28, 36, 36)),       # 8x8 center
            ),
        ))
    return FakeWorldSpec(
        name="sweep",
        width=SIZE,
        height=SIZE,
        background_class=max(c.class_id for c in taxonomy.classes) + 1,
        background_color=BACKGROUND,
        colors={gs: (255, 0, 0), lion: (255, 255, 0)},
        prompts={gs: (), lion: ("german shepherd", "lion")},
        scenes=tuple(scenes),
    )


def adversarial_worlds(taxonomy: Taxonomy, n_scenes: int = 8):
    """Repeat-error fixture for cross-classifier adversarial detection.

    One planted color that classifier A reads as "tench" and classifier B
    as "goldfish"; the segmenter grounds both lemmas onto the rectangle.
    A same-classifier pair therefore repeats its own error and certifies,
    while a mixed pair disagrees and rejects.

    Returns (classifier_spec_a, classifier_spec_b, segmenter_spec).
    """
    a = taxonomy.by_lemma("tench").class_id
    b = taxonomy.by_lemma("goldfish").class_id
    color = (90, 150, 210)
    scenes = tuple(
        FakeScene(f"adv_{i:02d}", a, (FakeObject(a, _spread(i)),))
        for i in range(n_scenes)
    )
    background = max(c.class_id for c in taxonomy.classes) + 1

    def world(name, class_id):
        # Scene objects are expressed in that world's own class id space.
        own_scenes = tuple(
            FakeScene(s.scene_id, s.truth,
                      tuple(FakeObject(class_id, o.rect) for o in s.objects))
            for s in scenes
        )
        return FakeWorldSpec(
            name=name,
            width=SIZE,
            height=SIZE,
            background_class=background,
            background_color=BACKGROUND,
            colors={class_id: color},
            prompts={class_id: ("tench", "goldfish")},
            scenes=own_scenes,
        )

    return world("adv-a", a), world("adv-b", b), world("adv-seg", a)
