"""Knowledge-graph store: entities, relations, triples, labels, and seeded splits.

The store is immutable after :func:`load_kg`; splitting never mutates it.  All
randomness flows through the package-wide reference PRNG so splits are
byte-identical across runs, thread counts, and implementations in other
languages.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ConfigError, NotFoundError, ParseError
from .rng import SplitMix64, derive_seed
from .validation import check_ratios, check_unit_interval

logger = logging.getLogger(__name__)


class Direction(str, Enum):
    TAIL_PREDICTION = "tail"
    HEAD_PREDICTION = "head"


@dataclass(frozen=True)
class Entity:
    id: str
    label: str
    mapped: bool = True


@dataclass(frozen=True, order=True)
class Triple:
    head: str
    relation: str
    tail: str

    def as_tsv(self) -> str:
        return f"{self.head}\t{self.relation}\t{self.tail}"


@dataclass(frozen=True)
class Query:
    subject: str
    relation: str
    direction: Direction

    def key(self) -> Tuple[str, str, str]:
        return (self.subject, self.relation, self.direction.value)


@dataclass(frozen=True)
class SplitSpec:
    ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    sub_ratio: float = 1.0
    seed: int = 55
    nested: bool = False

    def validate(self) -> "SplitSpec":
        check_ratios(self.ratios, "split ratios")
        check_unit_interval(self.sub_ratio, "sub_ratio", open_left=True)
        return self


@dataclass
class KGStore:
    entities: Dict[str, Entity]
    relations: Tuple[str, ...]
    triples: Tuple[Triple, ...]
    duplicate_count: int = 0
    unmapped_count: int = 0
    label_coverage: float = 1.0
    _triple_set: frozenset = field(default_factory=frozenset, repr=False)

    def __post_init__(self):
        if not self._triple_set:
            self._triple_set = frozenset(self.triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self._triple_set

    def entity_ids(self) -> List[str]:
        return sorted(self.entities)

    def label(self, entity_id: str) -> str:
        entity = self.entities.get(entity_id)
        if entity is None:
            raise NotFoundError(f"unknown entity {entity_id!r}")
        return entity.label

    def tuples_for_relation(self, relation: str) -> List[Tuple[str, str]]:
        """(head, tail) pairs of a relation, sorted by head id then tail id."""
        if relation not in self.relations:
            raise NotFoundError(f"unknown relation {relation!r}")
        pairs = {(t.head, t.tail) for t in self.triples if t.relation == relation}
        return sorted(pairs)


def load_kg(triples_file: Path, label_map_file: Optional[Path] = None,
            min_label_coverage: float = 0.0) -> KGStore:
    """Load a KG from the triples TSV and the optional entity-label map.

    Duplicate triples are dropped with a warning count; unmapped entities keep
    their code as the label and are flagged but stay usable.
    """
    triples: List[Triple] = []
    seen = set()
    duplicates = 0
    path = str(triples_file)
    with open(triples_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise ParseError(f"expected head<TAB>relation<TAB>tail, got {line!r}",
                                 path=path, line=lineno)
            triple = Triple(*parts)
            if triple in seen:
                duplicates += 1
                continue
            seen.add(triple)
            triples.append(triple)

    labels: Dict[str, str] = {}
    if label_map_file is not None:
        with open(label_map_file, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0]:
                    raise ParseError(f"expected entity_id<TAB>label, got {line!r}",
                                     path=str(label_map_file), line=lineno)
                labels[parts[0]] = parts[1]

    entity_ids = sorted({t.head for t in triples} | {t.tail for t in triples})
    entities = {}
    unmapped = 0
    for eid in entity_ids:
        label = labels.get(eid)
        if label:
            entities[eid] = Entity(eid, label, mapped=True)
        else:
            unmapped += 1
            entities[eid] = Entity(eid, eid, mapped=False)
    coverage = 1.0 if not entity_ids else (len(entity_ids) - unmapped) / len(entity_ids)
    if coverage < min_label_coverage:
        raise ConfigError(
            f"label map covers {coverage:.4f} of entities, below the required "
            f"{min_label_coverage:.4f}")
    if duplicates:
        logger.warning("dropped %d duplicate triples from %s", duplicates, path)
    relations = tuple(sorted({t.relation for t in triples}))
    return KGStore(entities=entities, relations=relations, triples=tuple(triples),
                   duplicate_count=duplicates, unmapped_count=unmapped,
                   label_coverage=coverage)


@dataclass(frozen=True)
class Split:
    train: Tuple[Triple, ...]
    valid: Tuple[Triple, ...]
    test: Tuple[Triple, ...]
    full_train: Tuple[Triple, ...]
    spec: SplitSpec


def _sub_split(train: Sequence[Triple], sub_ratio: float, seed: int,
               nested: bool) -> Tuple[Triple, ...]:
    if sub_ratio >= 1.0:
        return tuple(train)
    keep = int(len(train) * sub_ratio)
    if nested:
        stream_seed = derive_seed(seed, 0)
    else:
        # Independent draw per sub-ratio: tag the stream with basis points.
        stream_seed = derive_seed(seed, int(round(sub_ratio * 10_000)))
    rng = SplitMix64(stream_seed)
    shuffled = rng.shuffled(sorted(train))
    return tuple(shuffled[:keep])


def split(store: KGStore, spec: SplitSpec, eval_relations: Sequence[str]) -> Split:
    """Deterministic train/valid/test split.

    Triples are sorted, Fisher-Yates shuffled with the reference PRNG, and cut
    by the ratios.  Valid/test keep only triples whose relation is in
    ``eval_relations``; train keeps everything.  ``spec.sub_ratio`` < 1 keeps
    only that fraction of the (unfiltered) train portion.
    """
    spec.validate()
    if not eval_relations:
        raise ConfigError("evaluation relation list must not be empty")
    eval_set = set(eval_relations)

    ordered = sorted(store.triples)
    rng = SplitMix64(spec.seed)
    rng.shuffle(ordered)
    n = len(ordered)
    n_train = int(n * spec.ratios[0])
    n_valid = int(n * spec.ratios[1])
    full_train = tuple(ordered[:n_train])
    valid = tuple(t for t in ordered[n_train:n_train + n_valid]
                  if t.relation in eval_set)
    test = tuple(t for t in ordered[n_train + n_valid:] if t.relation in eval_set)
    train = _sub_split(full_train, spec.sub_ratio, spec.seed, spec.nested)
    return Split(train=train, valid=valid, test=test, full_train=full_train,
                 spec=spec)


def member_checksum(triples: Iterable[Triple]) -> str:
    """Order-independent sha256 over the member triple ids."""
    lines = sorted(t.as_tsv() for t in triples)
    digest = hashlib.sha256("\n".join(lines).encode("utf-8"))
    return digest.hexdigest()


def split_manifest(result: Split) -> dict:
    spec = result.spec
    return {
        "seed": spec.seed,
        "ratios": list(spec.ratios),
        "sub_ratio": spec.sub_ratio,
        "nested": spec.nested,
        "counts": {
            "train": len(result.train),
            "full_train": len(result.full_train),
            "valid": len(result.valid),
            "test": len(result.test),
        },
        "checksums": {
            "train": member_checksum(result.train),
            "valid": member_checksum(result.valid),
            "test": member_checksum(result.test),
        },
    }


def write_split(result: Split, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, triples in (("train", result.train), ("valid", result.valid),
                          ("test", result.test)):
        with open(directory / f"{name}.tsv", "w", encoding="utf-8") as fh:
            for t in triples:
                fh.write(t.as_tsv() + "\n")
    with open(directory / "split_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(split_manifest(result), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_triples_tsv(path: Path) -> Tuple[Triple, ...]:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"bad triple row {line!r}", path=str(path), line=lineno)
            triples.append(Triple(*parts))
    return tuple(triples)
