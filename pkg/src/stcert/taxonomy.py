"""Class hierarchy: fine-grained classes, hypernym chains, super-class datasets.

The taxonomy is loaded once from a static JSON file and is immutable
afterwards, so it is safe to share across worker threads.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

__all__ = [
    "ClassEntry",
    "DatasetSpec",
    "ErrorKind",
    "Taxonomy",
    "TaxonomyError",
    "load_taxonomy",
    "save_taxonomy",
    "default_taxonomy_path",
]

_DATA_DIR = Path(__file__).parent / "data"


class TaxonomyError(ValueError):
    """Malformed taxonomy file or an unresolvable class/dataset reference."""


class ErrorKind(str, Enum):
    CORRECT = "Correct"
    INTRA = "Intra"
    INTER = "Inter"


@dataclass(frozen=True)
class ClassEntry:
    class_id: int
    synset: str
    lemma: str
    hypernyms: tuple[str, ...]  # most specific first

    @property
    def prompt(self) -> str:
        """Lemma as used for grounding prompts: lowercase, no underscores."""
        return self.lemma.lower().replace("_", " ")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    superclasses: dict[str, frozenset[int]]  # super-class name -> member class ids


@dataclass
class Taxonomy:
    classes: list[ClassEntry]
    datasets: dict[str, DatasetSpec]
    _by_id: dict[int, ClassEntry] = field(init=False, repr=False)
    _by_synset: dict[str, ClassEntry] = field(init=False, repr=False)
    _by_lemma: dict[str, ClassEntry] = field(init=False, repr=False)
    _adjacency: dict[str, set[str]] | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self._by_id = {c.class_id: c for c in self.classes}
        self._by_synset = {c.synset: c for c in self.classes}
        self._by_lemma = {c.lemma: c for c in self.classes}
        self._validate()

    def _validate(self):
        if len(self._by_id) != len(self.classes):
            seen = set()
            for c in self.classes:
                if c.class_id in seen:
                    raise TaxonomyError(f"duplicate class_id {c.class_id}")
                seen.add(c.class_id)
        for c in self.classes:
            if c.class_id < 0:
                raise TaxonomyError(f"negative class_id {c.class_id}")
            if not c.lemma:
                raise TaxonomyError(f"class {c.class_id}: empty lemma")
        for ds in self.datasets.values():
            claimed: dict[int, str] = {}
            for super_name, members in ds.superclasses.items():
                for cid in members:
                    if cid not in self._by_id:
                        raise TaxonomyError(
                            f"dataset {ds.name!r}, super-class {super_name!r}: "
                            f"unknown class_id {cid}"
                        )
                    if cid in claimed:
                        raise TaxonomyError(
                            f"dataset {ds.name!r}: class_id {cid} in both "
                            f"{claimed[cid]!r} and {super_name!r}"
                        )
                    claimed[cid] = super_name

    # -- lookups ---------------------------------------------------------

    def by_id(self, class_id: int) -> ClassEntry:
        try:
            return self._by_id[class_id]
        except KeyError:
            raise TaxonomyError(f"unknown class_id {class_id}") from None

    def by_synset(self, synset: str) -> ClassEntry:
        try:
            return self._by_synset[synset]
        except KeyError:
            raise TaxonomyError(f"unknown synset {synset!r}") from None

    def by_lemma(self, lemma: str) -> ClassEntry:
        try:
            return self._by_lemma[lemma]
        except KeyError:
            raise TaxonomyError(f"unknown lemma {lemma!r}") from None

    def dataset(self, name: str) -> DatasetSpec:
        try:
            return self.datasets[name]
        except KeyError:
            raise TaxonomyError(f"unknown dataset {name!r}") from None

    def prompt_for(self, class_id: int) -> str:
        return self.by_id(class_id).prompt

    # -- hierarchy queries -----------------------------------------------

    def superclass_of(self, class_id: int, dataset: str) -> str | None:
        """Super-class containing class_id, or containing any of its hypernyms.

        Direct membership wins; otherwise hypernyms are walked most specific
        first and the first name matching a super-class is returned.  Returns
        None when the chain never meets the dataset's categories.
        """
        entry = self.by_id(class_id)
        ds = self.dataset(dataset)
        for super_name, members in ds.superclasses.items():
            if class_id in members:
                return super_name
        for hyp in entry.hypernyms:
            if hyp in ds.superclasses:
                return hyp
        return None

    def error_kind(self, prediction: int, truth: int, dataset: str) -> ErrorKind:
        """Classify a (prediction, truth) pair as Correct, Intra or Inter.

        A prediction whose hypernym chain meets none of the dataset's
        categories counts as Inter (the high-risk default); callers can
        detect that case via resolves().
        """
        if prediction == truth:
            return ErrorKind.CORRECT
        truth_super = self.superclass_of(truth, dataset)
        if truth_super is None:
            raise TaxonomyError(
                f"truth class {truth} has no super-class in dataset {dataset!r}"
            )
        pred_super = self.superclass_of(prediction, dataset)
        if pred_super is not None and pred_super == truth_super:
            return ErrorKind.INTRA
        return ErrorKind.INTER

    def resolves(self, class_id: int, dataset: str) -> bool:
        return self.superclass_of(class_id, dataset) is not None

    def path_similarity(self, a: int, b: int) -> float:
        """1/(1+d) with d the shortest undirected hop count through the
        hypernym DAG; 1.0 iff a == b, 0.0 when disconnected."""
        ea, eb = self.by_id(a), self.by_id(b)
        if a == b:
            return 1.0
        d = self._shortest_path(ea.synset, eb.synset)
        if d is None:
            return 0.0
        return 1.0 / (1.0 + d)

    def _graph(self) -> dict[str, set[str]]:
        if self._adjacency is None:
            adj: dict[str, set[str]] = {}

            def edge(u, v):
                adj.setdefault(u, set()).add(v)
                adj.setdefault(v, set()).add(u)

            for c in self.classes:
                chain = (c.synset,) + c.hypernyms
                for u, v in zip(chain, chain[1:]):
                    edge(u, v)
                adj.setdefault(c.synset, set())
            self._adjacency = adj
        return self._adjacency

    def _shortest_path(self, src: str, dst: str) -> int | None:
        adj = self._graph()
        seen = {src}
        queue = deque([(src, 0)])
        while queue:
            node, d = queue.popleft()
            if node == dst:
                return d
            for nxt in adj.get(node, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append((nxt, d + 1))
        return None

    def hyponyms_of(self, category: str) -> set[int]:
        """All class ids whose hypernym chain contains the given name."""
        return {c.class_id for c in self.classes if category in c.hypernyms}

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "classes": [
                {
                    "id": c.class_id,
                    "synset": c.synset,
                    "lemma": c.lemma,
                    "hypernyms": list(c.hypernyms),
                }
                for c in self.classes
            ],
            "datasets": {
                name: {
                    super_name: sorted(members)
                    for super_name, members in ds.superclasses.items()
                }
                for name, ds in self.datasets.items()
            },
        }


_CLASS_KEYS = {"id", "synset", "lemma", "hypernyms"}


def _parse_class(obj, index: int) -> ClassEntry:
    if not isinstance(obj, dict):
        raise TaxonomyError(f"classes[{index}]: expected object")
    extra = set(obj) - _CLASS_KEYS
    if extra:
        raise TaxonomyError(f"classes[{index}]: unknown keys {sorted(extra)}")
    missing = _CLASS_KEYS - set(obj)
    if missing:
        raise TaxonomyError(f"classes[{index}]: missing keys {sorted(missing)}")
    cid, synset, lemma, hyps = obj["id"], obj["synset"], obj["lemma"], obj["hypernyms"]
    if not isinstance(cid, int) or isinstance(cid, bool):
        raise TaxonomyError(f"classes[{index}]: id must be an integer")
    if not isinstance(synset, str) or not isinstance(lemma, str):
        raise TaxonomyError(f"classes[{index}]: synset and lemma must be strings")
    if not isinstance(hyps, list) or not all(isinstance(h, str) for h in hyps):
        raise TaxonomyError(f"classes[{index}]: hypernyms must be a list of strings")
    return ClassEntry(cid, synset, lemma, tuple(hyps))


def taxonomy_from_dict(doc: dict) -> Taxonomy:
    if not isinstance(doc, dict):
        raise TaxonomyError("top level: expected object")
    extra = set(doc) - {"classes", "datasets"}
    if extra:
        raise TaxonomyError(f"top level: unknown keys {sorted(extra)}")
    classes = [_parse_class(c, i) for i, c in enumerate(doc.get("classes", []))]
    datasets = {}
    raw_ds = doc.get("datasets", {})
    if not isinstance(raw_ds, dict):
        raise TaxonomyError("datasets: expected object")
    for name, supers in raw_ds.items():
        if not isinstance(supers, dict):
            raise TaxonomyError(f"dataset {name!r}: expected object")
        parsed = {}
        for super_name, members in supers.items():
            if not isinstance(members, list) or not all(
                isinstance(m, int) and not isinstance(m, bool) for m in members
            ):
                raise TaxonomyError(
                    f"dataset {name!r}, super-class {super_name!r}: "
                    "members must be a list of integers"
                )
            parsed[super_name] = frozenset(members)
        datasets[name] = DatasetSpec(name, parsed)
    return Taxonomy(classes, datasets)


def load_taxonomy(path) -> Taxonomy:
    """Load and fully validate a taxonomy JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TaxonomyError(f"{path}: {e}") from e
    try:
        return taxonomy_from_dict(doc)
    except TaxonomyError as e:
        raise TaxonomyError(f"{path}: {e}") from None


def save_taxonomy(taxonomy: Taxonomy, path) -> None:
    Path(path).write_text(
        json.dumps(taxonomy.to_dict(), indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def default_taxonomy_path() -> Path:
    """The ImageNet taxonomy shipped with the package."""
    return _DATA_DIR / "imagenet_taxonomy.json"
