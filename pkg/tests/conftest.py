import numpy as np
import pytest

from stcert.backends import fake_classifier, fake_segmenter, write_scene_tree
from stcert.fixtures import demo_world
from stcert.taxonomy import default_taxonomy_path, load_taxonomy, taxonomy_from_dict

MINI_TAXONOMY = {
    "classes": [
        {"id": 0, "synset": "n0200", "lemma": "german_shepherd",
         "hypernyms": ["shepherd dog", "dog", "canine", "animal"]},
        {"id": 1, "synset": "n0201", "lemma": "husky",
         "hypernyms": ["sled dog", "dog", "canine", "animal"]},
        {"id": 2, "synset": "n0202", "lemma": "lion",
         "hypernyms": ["big cat", "feline", "animal"]},
        {"id": 3, "synset": "n0300", "lemma": "canoe",
         "hypernyms": ["boat", "vessel", "artifact"]},
        {"id": 4, "synset": "n0301", "lemma": "paddle",
         "hypernyms": ["implement", "artifact"]},
        {"id": 5, "synset": "n0302", "lemma": "kayak",
         "hypernyms": ["boat", "vessel", "artifact"]},
        {"id": 6, "synset": "n0400", "lemma": "hermit",
         "hypernyms": []},
    ],
    "datasets": {
        "toy": {"dog": [0, 1], "feline": [2], "boat": [3, 5]},
        "self": {"canoe": [3]},
    },
}


@pytest.fixture
def mini_taxonomy():
    return taxonomy_from_dict(MINI_TAXONOMY)


@pytest.fixture(scope="session")
def imagenet_taxonomy():
    return load_taxonomy(default_taxonomy_path())


@pytest.fixture(scope="session")
def demo(imagenet_taxonomy):
    """(world spec, expected per scene) for the scripted 50-scene fixture."""
    return demo_world(imagenet_taxonomy)


@pytest.fixture(scope="session")
def demo_backends(demo):
    spec, _ = demo
    return fake_classifier(spec), fake_segmenter(spec)


@pytest.fixture(scope="session")
def demo_tree(tmp_path_factory, demo, imagenet_taxonomy):
    """Demo scenes written out in the class-folder layout."""
    spec, _ = demo
    root = tmp_path_factory.mktemp("demo_tree")
    write_scene_tree(spec, root, imagenet_taxonomy)
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
