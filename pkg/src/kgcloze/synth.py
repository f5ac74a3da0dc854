"""Deterministic synthetic worlds: a typed KG plus a templated corpus.

The default world has 60 entities (24 people, 16 companies, 12 cities, 8
countries), 4 relations, 400 facts, and 3,000 sentences of which 30% are
distractors.  Every fact is expressed several times: mostly through a
relation-specific template whose verb matches the relation's content word,
sometimes through deliberately ambiguous templates that also appear - with
false entity pairs - in the distractor share.  That construction gives the
pipeline something real to recover: ambiguous templates get mined into the
ensemble and must be down-weighted, and distractor co-occurrences make
retrieved support genuinely informative.

Run ``python -m kgcloze.synth --out DIR`` to write the bundled fixture
(kg.tsv, labels.tsv, corpora, config.toml).
"""

from __future__ import annotations

import argparse
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Set, Tuple

from .kg import Triple
from .rng import SplitMix64, derive_seed

PEOPLE_GIVEN = ["mira", "tomas", "ingrid", "pavel", "sofia", "henrik", "lena",
                "omar", "petra", "viktor", "anna", "boris", "clara", "dmitri",
                "elsa", "farid", "greta", "hugo", "irene", "janek", "karin",
                "leo", "marta", "nils"]
PEOPLE_FAMILY = ["abara", "belov", "cervi", "dalca", "ekberg", "farkas",
                 "gruber", "horvat", "ilic", "jansen", "kovac", "lindt",
                 "meyer", "novak", "okafor", "petrov", "quist", "radu",
                 "svane", "tisza", "ullman", "varga", "weiss", "zukas"]
COMPANY_BRANDS = ["altrix", "bervon", "corvex", "dantra", "elvion", "fermak",
                  "gilvan", "hestra", "ivenco", "jorvik", "kelmar", "lunova",
                  "nerida", "ostara", "pelagor", "quorum"]
COMPANY_SUFFIXES = ["systems", "logistics", "labs", "industries", "holdings",
                    "dynamics", "partners", "group", "ventures", "analytics",
                    "networks", "consulting", "freight", "robotics",
                    "materials", "media"]
CITIES = ["veltara", "ostrin", "marleth", "quenby", "sorvale", "tindra",
          "ulmark", "vexley", "wendar", "yarrin", "zelden", "arnvik"]
COUNTRIES = ["norlund", "esperia", "valdora", "kintara", "selenia", "septima",
             "tyrnau", "ulvania"]

PREFIXES = ["Reports confirm that", "Local archives note that",
            "Observers mention that", "Records indicate that",
            "Several sources state that"]
SUFFIXES = ["these days", "for many years", "in the regional files", ""]

REL_WORKS = "/people/person/works_at"
REL_LIVES = "/people/person/lives_in"
REL_BASED = "/business/company/based_in"
REL_LOCATED = "/location/city/located_in"

GOOD_CORES = {
    REL_WORKS: "works at",
    REL_LIVES: "lives in",
    REL_BASED: "is based in",
    REL_LOCATED: "is located in",
}
# Ambiguous templates mention the pair in REVERSED order (object first).
# True facts occasionally use them, distractor sentences lean on them, so the
# reversed-order co-occurrence statistics are dominated by false pairs: a
# mined reversed prompt actively mis-ranks and must be down-weighted.
WEAK_CORES_REVERSED = ["welcomed", "often hosted"]
# Forward ambiguous cores appear only in distractor sentences (never in fact
# expressions, so they are never mined): they plant false forward
# co-occurrences that outweigh the sparse true attestations of the summary
# relations, which retrieved support must overcome.
WEAK_CORES_FORWARD = ["often visited", "is connected to"]
# Relations whose subjects get one multi-object summary sentence each; their
# individual fact expressions are sparse in the reliable corpus.
SUMMARY_RELATIONS = (REL_WORKS,)
LANDMARK_LABEL = CITIES[0]
# Hard relations render mostly bare sentences (killing prefix-variant
# prompts) and attract concentrated reversed pollution.
HARD_RELATIONS = (REL_LIVES, REL_LOCATED, REL_WORKS)


@dataclass
class WorldSpec:
    seed: int = 55
    n_people: int = 24
    n_companies: int = 16
    n_cities: int = 12
    n_countries: int = 8
    facts_per_relation: Dict[str, int] = field(default_factory=lambda: {
        REL_WORKS: 130, REL_LIVES: 130, REL_BASED: 80, REL_LOCATED: 60})
    n_sentences: int = 3000
    distractor_share: float = 0.30
    weak_expression_rate: float = 0.25
    distractor_pair_repeats: int = 3
    forward_pollution_repeats: int = 1
    reversed_distractor_repeats: int = 4
    general_share: float = 0.30
    sentences_per_doc: int = 3


@dataclass
class World:
    spec: WorldSpec
    entities: Dict[str, str]  # id -> label
    entity_types: Dict[str, str]
    relations: Tuple[str, ...]
    facts: Tuple[Triple, ...]
    general_docs: List[Tuple[str, str]]  # (doc_id, text)
    reliable_docs: List[Tuple[str, str]]

    def eval_relations(self) -> Tuple[str, ...]:
        return self.relations


def _type_pools(spec: WorldSpec) -> Dict[str, List[Tuple[str, str]]]:
    people = [(f"p{i:02d}", f"{PEOPLE_GIVEN[i]} {PEOPLE_FAMILY[i]}")
              for i in range(spec.n_people)]
    companies = [(f"c{i:02d}",
                  f"{COMPANY_BRANDS[i]} {COMPANY_SUFFIXES[i % len(COMPANY_SUFFIXES)]}")
                 for i in range(spec.n_companies)]
    cities = [(f"ci{i:02d}", CITIES[i]) for i in range(spec.n_cities)]
    countries = [(f"co{i:02d}", COUNTRIES[i]) for i in range(spec.n_countries)]
    return {"person": people, "company": companies, "city": cities,
            "country": countries}


_RELATION_TYPES = {
    REL_WORKS: ("person", "company"),
    REL_LIVES: ("person", "city"),
    REL_BASED: ("company", "city"),
    REL_LOCATED: ("city", "country"),
}


def build_world(spec: WorldSpec) -> World:
    pools = _type_pools(spec)
    entities: Dict[str, str] = {}
    entity_types: Dict[str, str] = {}
    for type_name, members in pools.items():
        for eid, label in members:
            entities[eid] = label
            entity_types[eid] = type_name

    # Facts: distinct pairs per relation, drawn with the reference PRNG.
    fact_rng = SplitMix64(derive_seed(spec.seed, 0xFAC7))
    facts: List[Triple] = []
    fact_pairs: Set[Tuple[str, str]] = set()
    for relation in sorted(spec.facts_per_relation):
        head_type, tail_type = _RELATION_TYPES[relation]
        heads = [eid for eid, _ in pools[head_type]]
        tails = [eid for eid, _ in pools[tail_type]]
        wanted = spec.facts_per_relation[relation]
        chosen: Set[Tuple[str, str]] = set()
        while len(chosen) < wanted:
            pair = (heads[fact_rng.next_below(len(heads))],
                    tails[fact_rng.next_below(len(tails))])
            if pair in chosen:
                continue
            chosen.add(pair)
        for head, tail in sorted(chosen):
            facts.append(Triple(head, relation, tail))
            fact_pairs.add((head, tail))
            fact_pairs.add((tail, head))

    text_rng = SplitMix64(derive_seed(spec.seed, 0x7357))

    def render(body: str) -> str:
        prefix = PREFIXES[text_rng.next_below(len(PREFIXES))]
        suffix = SUFFIXES[text_rng.next_below(len(SUFFIXES))]
        if suffix:
            body = f"{body} {suffix}"
        return f"{prefix} {body} ."

    general_sentences: List[str] = []
    reliable_sentences: List[str] = []

    # One multi-object summary per (subject, summary relation): the core verb
    # repeats per object so BM25 ranks the summary above single-fact
    # sentences; retrieved support therefore enumerates the true answers.
    by_subject: Dict[Tuple[str, str], List[str]] = {}
    by_object: Dict[Tuple[str, str], List[str]] = {}
    for fact in facts:
        if fact.relation in SUMMARY_RELATIONS:
            by_subject.setdefault((fact.relation, fact.head), []).append(fact.tail)
            by_object.setdefault((fact.relation, fact.tail), []).append(fact.head)
    # Each summary repeats its anchor entity per listed fact, so BM25 ranks a
    # subject's own summary first for the matching query direction.
    summary_count = 0
    for (relation, head) in sorted(by_subject):
        objects = sorted(by_subject[(relation, head)])
        core = GOOD_CORES[relation]
        listing = " , ".join(f"{entities[head]} {core} {entities[obj]}"
                             for obj in objects)
        reliable_sentences.append(render(listing))
        summary_count += 1
    # Head-side summaries keep every anchor mention BEFORE the listed
    # subjects (object-first order feeds only the reversed-order statistics)
    # and use a neutral verb so the relation's type signal stays clean; the
    # doubled anchor still wins object-anchored retrieval on term frequency.
    for (relation, tail) in sorted(by_object):
        heads = sorted(by_object[(relation, tail)])
        anchor = entities[tail]
        verb = GOOD_CORES[relation].split()[0]
        # given names keep the summary short; the full name is recoverable
        # through the name-surname co-occurrence statistics
        parts = " , ".join(entities[h].split()[0] for h in heads)
        # no prefix or suffix: the terse registry line stays short enough to
        # win object-anchored retrieval against one-fact sentences
        reliable_sentences.append(f"{anchor} , {anchor} is where {verb} : {parts} .")
        summary_count += 1

    # Individual fact expressions, stratified per fact.  Summary relations
    # keep only one forward expression in the reliable corpus (their true
    # pairs stay sparse there); the other relations keep three.
    n_fact_sentences = (spec.n_sentences
                        - int(spec.n_sentences * spec.distractor_share)
                        - summary_count)
    base = n_fact_sentences // len(facts)
    remainder = n_fact_sentences - base * len(facts)
    extras = set(text_rng.shuffled(range(len(facts)))[:remainder])
    bare_counter = 0
    for idx, fact in enumerate(facts):
        count = base + (1 if idx in extras else 0)
        subject = entities[fact.head]
        obj = entities[fact.tail]
        def render_fact(body: str) -> str:
            # the hard relation renders mostly bare sentences: prefix variants
            # then stay under the mining support needed to reach the ensemble
            nonlocal bare_counter
            if fact.relation in HARD_RELATIONS:
                bare_counter += 1
                if bare_counter % 6 != 0:
                    return f"{body} ."
            return render(body)
        # three attestation regimes: summary relations rely on their summary
        # sentence (sparse individuals), the hard relation is sparsely
        # attested with ambiguous reversed copy, the rest are dense
        if fact.relation in SUMMARY_RELATIONS:
            n_forward_reliable, n_reversed = 0, 0
        elif fact.relation == REL_LIVES:
            n_forward_reliable, n_reversed = 1, 1
        elif fact.relation == REL_LOCATED:
            n_forward_reliable, n_reversed = 1, 2
        else:
            n_forward_reliable, n_reversed = 3, 2
        n_forward_general = max(0, count - n_forward_reliable - n_reversed)
        for _ in range(n_forward_reliable):
            reliable_sentences.append(
                render_fact(f"{subject} {GOOD_CORES[fact.relation]} {obj}"))
        for k in range(n_forward_general):
            body = f"{subject} {GOOD_CORES[fact.relation]} {obj}"
            # a recurring landmark mention gets mined into its own prompt
            # whose association bias only prompt weighting can suppress
            if fact.relation == REL_LIVES:
                body = f"{body} near {LANDMARK_LABEL}"
            general_sentences.append(render_fact(body))
        for _ in range(n_reversed):
            core = WEAK_CORES_REVERSED[text_rng.next_below(len(WEAK_CORES_REVERSED))]
            reliable_sentences.append(render(f"{obj} {core} {subject}"))

    # Distractors.  Forward pollution targets the summary relations: false
    # pairs repeated until they outweigh the sparse true reliable pairs.
    # Reversed distractors feed the reversed-order statistics that make the
    # mined reversed prompts misleading, leaning on the non-summary
    # relations.  A pair's sentences land wholly in one corpus.
    n_distractors = spec.n_sentences - len(general_sentences) \
        - len(reliable_sentences)
    dis_rng = SplitMix64(derive_seed(spec.seed, 0xD157))
    relations = sorted(spec.facts_per_relation)
    type_names = sorted(pools)
    seen_false: Set[Tuple[str, str]] = set()

    def draw_pair(relation_pool: List[str]) -> Tuple[str, str]:
        attempts = 0
        while True:
            attempts += 1
            choice = relation_pool[dis_rng.next_below(len(relation_pool))]
            if choice == "same-type":
                head_type = tail_type = type_names[dis_rng.next_below(len(type_names))]
            else:
                head_type, tail_type = _RELATION_TYPES[choice]
            heads = [eid for eid, _ in pools[head_type]]
            tails = [eid for eid, _ in pools[tail_type]]
            pair = (heads[dis_rng.next_below(len(heads))],
                    tails[dis_rng.next_below(len(tails))])
            if pair[0] == pair[1] or pair in fact_pairs:
                continue
            # prefer unseen pairs; recycle once the pool runs dry
            if pair in seen_false and attempts < 500:
                continue
            seen_false.add(pair)
            return pair

    summary_rels = [r for r in relations if r in SUMMARY_RELATIONS] or relations
    other_rels = [r for r in relations if r not in SUMMARY_RELATIONS] or relations
    n_forward_pollution = int(n_distractors * 0.55)
    n_reversed_distractors = int(n_distractors * 0.30)
    n_general_distractors = n_distractors - n_forward_pollution - n_reversed_distractors

    produced = 0
    while produced < n_forward_pollution:
        e1, e2 = draw_pair(summary_rels)
        for _ in range(min(spec.forward_pollution_repeats,
                           n_forward_pollution - produced)):
            core = WEAK_CORES_FORWARD[dis_rng.next_below(len(WEAK_CORES_FORWARD))]
            reliable_sentences.append(render(f"{entities[e1]} {core} {entities[e2]}"))
            produced += 1

    rev_pool = ([REL_LIVES] * 5 if REL_LIVES in relations else []) \
        + ([REL_LOCATED] * 3 if REL_LOCATED in relations else []) \
        + ([REL_BASED] if REL_BASED in relations else []) + ["same-type"]
    produced = 0
    while produced < n_reversed_distractors:
        e1, e2 = draw_pair(rev_pool or list(relations) + ["same-type"])
        for _ in range(min(spec.reversed_distractor_repeats,
                           n_reversed_distractors - produced)):
            core = WEAK_CORES_REVERSED[dis_rng.next_below(len(WEAK_CORES_REVERSED))]
            reliable_sentences.append(render(f"{entities[e2]} {core} {entities[e1]}"))
            produced += 1

    produced = 0
    while produced < n_general_distractors:
        e1, e2 = draw_pair(relations + ["same-type"])
        for _ in range(min(spec.distractor_pair_repeats,
                           n_general_distractors - produced)):
            core = WEAK_CORES_REVERSED[dis_rng.next_below(len(WEAK_CORES_REVERSED))]
            general_sentences.append(render(f"{entities[e2]} {core} {entities[e1]}"))
            produced += 1

    # Pack each corpus into documents separately.
    pack_rng = SplitMix64(derive_seed(spec.seed, 0xD0C5))
    pack_rng.shuffle(general_sentences)
    pack_rng.shuffle(reliable_sentences)

    def pack(sentences: List[str], prefix: str) -> List[Tuple[str, str]]:
        docs = []
        for start in range(0, len(sentences), spec.sentences_per_doc):
            chunk = sentences[start:start + spec.sentences_per_doc]
            docs.append((f"{prefix}{start // spec.sentences_per_doc:05d}",
                         " ".join(chunk)))
        return docs

    return World(spec=spec, entities=entities, entity_types=entity_types,
                 relations=tuple(relations), facts=tuple(facts),
                 general_docs=pack(general_sentences, "gdoc"),
                 reliable_docs=pack(reliable_sentences, "rdoc"))


def tiny_world(seed: int = 55) -> World:
    """A small fast world for smoke tests: 2 relations, 60 facts, 300 sentences."""
    spec = WorldSpec(
        seed=seed,
        n_people=10, n_companies=6, n_cities=5, n_countries=3,
        facts_per_relation={REL_WORKS: 30, REL_LIVES: 30},
        n_sentences=300,
    )
    return build_world(spec)


CONFIG_TEMPLATE = """\
seed = {seed}

[paths]
kg_file = "kg.tsv"
labels_file = "labels.tsv"
corpus_general = "corpus_general.jsonl"
corpus_reliable = "corpus_reliable.jsonl"
run_dir = "runs/synth"

[split]
ratios = [0.8, 0.1, 0.1]
sub_ratio = 1.0
eval_relations = [{eval_relations}]

[mining]
theta = 500
min_support = 3
max_window = 10
min_phrase_count = 5
pmi_floor = 1.0

[selection]
middle_band_floor = 0.27
max_candidates = 6
penalty_multiplier = 1.0
negative = 0.05

[retrieval]
delta = 0.9
phi = 100
deterministic_support = true

[kge]
dim = 24
epochs = {kge_epochs}
learning_rate = 0.02

[negatives]
m_ratio = 30
kge_fraction = 0.5
recall_x = {recall_x}

[optimize]
heldout_fraction = 0.1
epochs = 150
learning_rate = 0.5

[train]
epochs = 200
learning_rate = 1.0

[eval]
n_values = [5, 10]

[scorer]
mode = "reference"
"""


def write_fixture(world: World, out_dir: Path) -> Path:
    """Write kg.tsv, labels.tsv, both corpora, and a ready config.toml."""
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "kg.tsv", "w", encoding="utf-8") as fh:
        for fact in world.facts:
            fh.write(fact.as_tsv() + "\n")
    with open(out_dir / "labels.tsv", "w", encoding="utf-8") as fh:
        for eid in sorted(world.entities):
            fh.write(f"{eid}\t{world.entities[eid]}\n")
    for name, docs in (("corpus_general.jsonl", world.general_docs),
                       ("corpus_reliable.jsonl", world.reliable_docs)):
        with open(out_dir / name, "w", encoding="utf-8") as fh:
            for doc_id, text in docs:
                fh.write(json.dumps({"doc_id": doc_id, "text": text},
                                    sort_keys=True, ensure_ascii=False) + "\n")
    eval_relations = ", ".join(f'"{r}"' for r in world.eval_relations())
    small = len(world.facts) < 100
    config = CONFIG_TEMPLATE.format(
        seed=world.spec.seed,
        eval_relations=eval_relations,
        kge_epochs=60 if small else 150,
        recall_x=min(18, len(world.entities)),
    )
    with open(out_dir / "config.toml", "w", encoding="utf-8") as fh:
        fh.write(config)
    return out_dir / "config.toml"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="generate the bundled synthetic fixture")
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--seed", type=int, default=55)
    parser.add_argument("--tiny", action="store_true",
                        help="small fast world for smoke tests")
    args = parser.parse_args(argv)
    world = tiny_world(args.seed) if args.tiny else build_world(WorldSpec(seed=args.seed))
    config_path = write_fixture(world, args.out)
    print(f"fixture written; config at {config_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
