import sys
import threading

import numpy as np
import pytest

from stcert.backends import (
    BackendError,
    BBox,
    FakeObject,
    FakeScene,
    FakeWorldSpec,
    fake_classifier,
    fake_segmenter,
    load_fake_world,
    process_backend,
    render_scene,
)
from stcert.imageops import tight_bbox

RED, GREEN = (255, 0, 0), (0, 255, 0)


def small_world(scenes=()):
    return FakeWorldSpec(
        name="w",
        width=16,
        height=16,
        background_class=30,
        background_color=(200, 200, 200),
        colors={7: RED, 9: GREEN},
        prompts={7: ("dog",), 9: ("dog", "cat")},
        scenes=tuple(scenes),
    )


def scene_image(objects):
    spec = small_world()
    return render_scene(spec, FakeScene("s", 7, tuple(objects)))


def test_fake_classifier_dominant_color():
    img = scene_image([FakeObject(7, BBox(0, 0, 4, 4))])
    pred = fake_classifier(small_world()).classify(img)
    assert pred.class_id == 7
    assert pred.confidence == 16 / 256


def test_fake_classifier_empty_scene_background():
    img = scene_image([])
    pred = fake_classifier(small_world()).classify(img)
    assert pred.class_id == 30
    assert pred.confidence == 0.0


def test_fake_classifier_tie_lowest_id():
    img = scene_image([FakeObject(7, BBox(0, 0, 4, 4)),
                       FakeObject(9, BBox(8, 8, 12, 12))])
    pred = fake_classifier(small_world()).classify(img)
    assert pred.class_id == 7


def test_fake_segmenter_single_match():
    img = scene_image([FakeObject(7, BBox(2, 3, 6, 9))])
    dets = fake_segmenter(small_world()).ground(img, "Cat ")
    assert dets == []
    dets = fake_segmenter(small_world()).ground(img, "dog")
    assert len(dets) == 1
    assert dets[0].box == BBox(2, 3, 6, 9)
    assert dets[0].score == 1.0


def test_fake_segmenter_two_matches():
    img = scene_image([FakeObject(7, BBox(0, 0, 4, 4)),
                       FakeObject(9, BBox(8, 8, 12, 12))])
    dets = fake_segmenter(small_world()).ground(img, "dog")
    assert len(dets) == 2
    assert {d.box for d in dets} == {BBox(0, 0, 4, 4), BBox(8, 8, 12, 12)}


def test_fake_segmenter_box_is_tight():
    img = scene_image([FakeObject(7, BBox(1, 1, 5, 7)),
                       FakeObject(7, BBox(9, 9, 14, 12))])
    for det in fake_segmenter(small_world()).ground(img, "dog"):
        assert det.box == tight_bbox(det.mask)
        assert det.mask.any()


def test_fake_backends_deterministic():
    img = scene_image([FakeObject(7, BBox(1, 1, 5, 7))])
    spec = small_world()
    a, b = fake_classifier(spec), fake_classifier(spec)
    assert a.classify(img) == b.classify(img)
    da = fake_segmenter(spec).ground(img, "dog")
    db = fake_segmenter(spec).ground(img, "dog")
    assert [d.box for d in da] == [d.box for d in db]


def test_world_spec_validation():
    with pytest.raises(ValueError, match="color"):
        FakeWorldSpec("w", 8, 8, 5, (0, 0, 0), {1: RED, 2: RED},
                      {1: (), 2: ()})
    with pytest.raises(ValueError, match="out of bounds"):
        FakeWorldSpec("w", 8, 8, 5, (0, 0, 0), {1: RED}, {1: ()},
                      scenes=(FakeScene("s", 1, (FakeObject(1, BBox(0, 0, 9, 4)),)),))


def test_world_spec_round_trip(tmp_path):
    spec = small_world([FakeScene("s0", 7, (FakeObject(7, BBox(0, 0, 4, 4)),))])
    path = tmp_path / "world.json"
    import json

    path.write_text(json.dumps(spec.to_dict()))
    again = load_fake_world(path)
    assert again.to_dict() == spec.to_dict()


# ---------------------------------------------------------------------------
# Process adapter
# ---------------------------------------------------------------------------

def stub(extra=""):
    return f"{sys.executable} -m stcert.stub_backend {extra}".strip()


@pytest.fixture
def image():
    return np.full((8, 8, 3), 10, np.uint8)


def test_process_info_handshake_classifier():
    backend = process_backend(stub("--kind classifier --class-id 3"))
    try:
        info = backend.info()
        assert info["kind"] == "classifier"
        assert info["name"] == "stub-classifier"
        assert info["thread_safe"] is True
    finally:
        backend.close()


def test_process_classify_round_trip(image):
    backend = process_backend(stub("--kind classifier --class-id 3"))
    try:
        pred = backend.classify(image)
        assert pred.class_id == 3
        assert pred.confidence == 0.9
    finally:
        backend.close()


def test_process_ground_round_trip(image):
    backend = process_backend(stub("--kind segmenter"))
    try:
        dets = backend.ground(image, "anything")
        assert len(dets) == 1
        assert dets[0].box == BBox(2, 2, 6, 6)
        assert dets[0].mask.shape == (8, 8)
        assert dets[0].mask.sum() == 16
    finally:
        backend.close()


def test_process_error_response(image):
    backend = process_backend(stub("--kind classifier --fail-op classify"))
    try:
        with pytest.raises(BackendError, match="injected failure"):
            backend.classify(image)
    finally:
        backend.close()


def test_process_malformed_line(image):
    # first response (info) is fine, second is garbage
    backend = process_backend(stub("--kind classifier --malformed-after 1"))
    try:
        with pytest.raises(BackendError, match="protocol violation"):
            backend.classify(image)
    finally:
        backend.close()


def test_process_timeout(image):
    backend = process_backend(stub("--kind classifier --sleep 5"), timeout=0.4)
    try:
        with pytest.raises(BackendError, match="timed out"):
            backend.classify(image)
    finally:
        backend.close()


def test_process_out_of_order_responses(image):
    """Child answers pipelined requests in reverse order; ids still match."""
    backend = process_backend(stub("--kind classifier --class-id 5 --swap-pairs"))
    results, errors = [], []

    def work():
        try:
            results.append(backend.classify(image).class_id)
        except BackendError as e:  # pragma: no cover
            errors.append(e)

    try:
        threads = [threading.Thread(target=work) for _ in range(2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=10)
        assert not errors
        assert results == [5, 5]
    finally:
        backend.close()


def test_process_spawn_failure():
    with pytest.raises(BackendError, match="spawn"):
        process_backend("/nonexistent-binary-xyz")


def test_process_unknown_kind():
    script = ("import sys,json; r=json.loads(sys.stdin.readline()); "
              "print(json.dumps({'id': r['id'], 'kind': 'oracle'}), flush=True); "
              "sys.stdin.read()")
    cmd = f'{sys.executable} -c "{script}"'
    with pytest.raises(BackendError, match="unknown backend kind"):
        process_backend(cmd)


def test_timeout_env_override(monkeypatch):
    from stcert.backends import resolve_timeout

    monkeypatch.setenv("STCERT_BACKEND_TIMEOUT_S", "7.5")
    assert resolve_timeout(None) == 7.5
    assert resolve_timeout(3.0) == 3.0
    monkeypatch.delenv("STCERT_BACKEND_TIMEOUT_S")
    assert resolve_timeout(None) == 120.0
