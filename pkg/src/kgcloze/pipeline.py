"""Pipeline stages, run-directory artifacts, and reproducibility manifests.

Each stage reads the original inputs plus upstream artifacts, writes its own
artifacts under ``run_dir/<stage>/``, and finishes with a manifest recording
the config hash and the sha256 of every input and output.  Manifests contain
no timestamps or durations, so two runs with the same config and seeds are
byte-identical; progress and counters go to stderr as JSON lines instead.

Thread counts never change results: parallel sections map over sorted keys
and merge in that order.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from . import corpus as corpus_mod
from . import kg as kg_mod
from .config import PipelineConfig
from .corpus import GENERAL, RELIABLE, CorpusStore, TupleEntry
from .ensemble import learn_weights
from .errors import ConfigError, MissingArtifactError
from .evaluation import RankedPrediction, evaluate, predict, write_predictions, read_predictions
from .kg import Direction, Query, SplitSpec, Triple
from .kge import TransE, gen_negatives, read_negatives, read_recalls, write_negatives, write_recalls
from .mining import mine_candidates, read_candidates, segment_phrases, write_candidates
from .mining import AnnotatedSentence, AnnotatedSubCorpus
from .remote import RemoteScorer
from .retrieval import (BM25Index, RetrievalConfig, SupportPassage, build_index,
                        choose_support, make_cloze, query_terms, read_instances,
                        retrieve, write_instances)
from .rng import derive_seed, stable_hash
from .scoring import CorpusStats, ReferenceScorer
from .selection import read_ensembles, truepie_filter, write_ensembles

T = TypeVar("T")

STAGES = ["ingest", "split", "subcorpus", "mine", "select", "optimize", "index",
          "negatives", "assemble", "train", "predict", "evaluate"]

ARTIFACTS = {
    "ingest/general.jsonl": "ingest",
    "ingest/reliable.jsonl": "ingest",
    "split/train.tsv": "split",
    "split/valid.tsv": "split",
    "split/test.tsv": "split",
    "split/split_manifest.json": "split",
    "subcorpus/subcorpus.jsonl": "subcorpus",
    "mine/candidates.jsonl": "mine",
    "mine/annotated.jsonl": "mine",
    "select/ensembles.json": "select",
    "optimize/ensembles.json": "optimize",
    "index/bm25.json": "index",
    "negatives/negatives.jsonl": "negatives",
    "negatives/recalls.jsonl": "negatives",
    "negatives/kge.json": "negatives",
    "assemble/train_instances.jsonl": "assemble",
    "train/scorer.json": "train",
    "predict/predictions.jsonl": "predict",
    "evaluate/report.json": "evaluate",
}


def log_event(stage: str, event: str, **fields) -> None:
    record = {"stage": stage, "event": event}
    record.update(fields)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Runner:
    """Executes pipeline stages against one run directory."""

    def __init__(self, config: PipelineConfig, base_dir: Path, threads: int = 1):
        self.config = config.validate()
        self.base = Path(base_dir)
        self.run_dir = config.resolve_path(config.paths.run_dir, self.base)
        self.threads = max(1, threads)

    # -- plumbing -----------------------------------------------------------
    def _input_path(self, field: str) -> Path:
        value = getattr(self.config.paths, field)
        if not value:
            raise ConfigError(f"paths.{field} is not configured")
        path = self.config.resolve_path(value, self.base)
        if not path.exists():
            raise ConfigError(f"paths.{field} does not exist: {path}")
        return path

    def artifact(self, rel: str) -> Path:
        path = self.run_dir / rel
        if not path.exists():
            raise MissingArtifactError(rel, ARTIFACTS.get(rel, "unknown"))
        return path

    def _write_manifest(self, stage: str, inputs: Dict[str, Path],
                        outputs: Sequence[str]) -> None:
        manifest = {
            "stage": stage,
            "config_hash": self.config.config_hash(),
            "inputs": {key: _sha256(path) for key, path in sorted(inputs.items())},
            "outputs": {rel: _sha256(self.run_dir / rel) for rel in sorted(outputs)},
        }
        stage_dir = self.run_dir / stage
        stage_dir.mkdir(parents=True, exist_ok=True)
        with open(stage_dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def _map(self, fn: Callable[[T], object], items: Sequence[T]) -> List[object]:
        """Deterministic parallel map: results in input order."""
        if self.threads == 1 or len(items) <= 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, items))

    def _stage_dir(self, stage: str) -> Path:
        path = self.run_dir / stage
        path.mkdir(parents=True, exist_ok=True)
        return path

    # -- shared loaders -----------------------------------------------------
    def _load_store(self) -> kg_mod.KGStore:
        return kg_mod.load_kg(self._input_path("kg_file"),
                              self._input_path("labels_file"),
                              self.config.split.min_label_coverage)

    def _load_corpora(self) -> Tuple[CorpusStore, CorpusStore]:
        general = corpus_mod.read_sentences(self.artifact("ingest/general.jsonl"),
                                            GENERAL)
        reliable = corpus_mod.read_sentences(self.artifact("ingest/reliable.jsonl"),
                                             RELIABLE)
        return general, reliable

    def _load_split(self) -> Dict[str, Tuple[Triple, ...]]:
        return {name: kg_mod.read_triples_tsv(self.artifact(f"split/{name}.tsv"))
                for name in ("train", "valid", "test")}

    def _retrieval_config(self) -> RetrievalConfig:
        r = self.config.retrieval
        return RetrievalConfig(delta=r.delta, phi=r.phi, k1=r.k1, b=r.b,
                               seed=self.config.seed,
                               deterministic=r.deterministic_support)

    def _reference_scorer(self, reliable: CorpusStore) -> ReferenceScorer:
        stats = CorpusStats(reliable)
        return ReferenceScorer(stats,
                               learning_rate=self.config.train.learning_rate,
                               epochs=self.config.train.epochs,
                               m_ratio=self.config.negatives.m_ratio,
                               weight_decay=self.config.train.weight_decay)

    def _scorer(self, reliable: Optional[CorpusStore]):
        if self.config.scorer.mode == "remote":
            return RemoteScorer(self.config.scorer.url,
                                timeout=self.config.scorer.timeout)
        if reliable is None:
            general, reliable = self._load_corpora()
        return self._reference_scorer(reliable)

    def _query_support(self, index: BM25Index, subject_label: str, relation: str,
                       query_id: str) -> Optional[SupportPassage]:
        if not self.config.retrieval.use_support:
            return None
        rcfg = self._retrieval_config()
        passages = retrieve(index, query_terms(subject_label, relation), rcfg)
        return choose_support(passages, rcfg,
                              derive_seed(self.config.seed, stable_hash(query_id)))

    def _triple_support(self, index: BM25Index, head_label: str, relation: str,
                        tail_label: str, triple_id: str) -> Optional[SupportPassage]:
        if not self.config.retrieval.use_support:
            return None
        rcfg = self._retrieval_config()
        terms = query_terms(head_label, relation, tail_label)
        passages = retrieve(index, terms, rcfg)
        return choose_support(passages, rcfg,
                              derive_seed(self.config.seed, stable_hash(triple_id)))

    # -- stages -------------------------------------------------------------
    def stage_ingest(self) -> None:
        out = self._stage_dir("ingest")
        inputs = {}
        outputs = []
        for field, name, tag in (("corpus_general", "general.jsonl", GENERAL),
                                 ("corpus_reliable", "reliable.jsonl", RELIABLE)):
            src = self._input_path(field)
            store = corpus_mod.ingest(src, tag)
            corpus_mod.write_sentences(store, out / name)
            inputs[f"paths.{field}"] = src
            outputs.append(f"ingest/{name}")
            log_event("ingest", "corpus", source=tag, docs=store.doc_count(),
                      sentences=len(store), skipped_empty=store.skipped_empty,
                      checksum=store.index_checksum())
        self._write_manifest("ingest", inputs, outputs)

    def stage_split(self) -> None:
        store = self._load_store()
        spec = SplitSpec(ratios=self.config.split.ratios,
                         sub_ratio=self.config.split.sub_ratio,
                         seed=self.config.seed,
                         nested=self.config.split.nested)
        result = kg_mod.split(store, spec, self.config.split.eval_relations)
        out = self._stage_dir("split")
        kg_mod.write_split(result, out)
        log_event("split", "done", train=len(result.train), valid=len(result.valid),
                  test=len(result.test), unmapped=store.unmapped_count,
                  label_coverage=round(store.label_coverage, 4))
        self._write_manifest(
            "split",
            {"paths.kg_file": self._input_path("kg_file"),
             "paths.labels_file": self._input_path("labels_file")},
            ["split/train.tsv", "split/valid.tsv", "split/test.tsv",
             "split/split_manifest.json"])

    def stage_subcorpus(self) -> None:
        store = self._load_store()
        general, reliable = self._load_corpora()
        split = self._load_split()
        theta = self.config.mining.theta
        relations = sorted(self.config.split.eval_relations)

        def tuples_of(relation: str) -> List[TupleEntry]:
            pairs = sorted({(t.head, t.tail) for t in split["train"]
                            if t.relation == relation})
            return [TupleEntry(h, t, store.label(h), store.label(t))
                    for h, t in pairs]

        def mine_one(relation: str):
            return corpus_mod.mine_sub_corpus([general, reliable], relation,
                                              tuples_of(relation), theta)

        subs = self._map(mine_one, relations)
        out = self._stage_dir("subcorpus")
        target = out / "subcorpus.jsonl"
        if target.exists():
            target.unlink()
        target.touch()
        for sub in subs:
            corpus_mod.write_sub_corpus(sub, target)
            log_event("subcorpus", "relation", relation=sub.relation,
                      tuples=len(sub.entries),
                      sentences=sum(len(v) for v in sub.entries.values()))
        self._write_manifest(
            "subcorpus",
            {"ingest/general.jsonl": self.artifact("ingest/general.jsonl"),
             "ingest/reliable.jsonl": self.artifact("ingest/reliable.jsonl"),
             "split/train.tsv": self.artifact("split/train.tsv")},
            ["subcorpus/subcorpus.jsonl"])

    def stage_mine(self) -> None:
        subs = corpus_mod.read_sub_corpora(self.artifact("subcorpus/subcorpus.jsonl"),
                                           self.config.mining.theta)
        relations = sorted(subs)
        mining = self.config.mining

        def mine_one(relation: str):
            annotated = segment_phrases(subs[relation], mining.min_phrase_count,
                                        mining.pmi_floor)
            candidates = mine_candidates(annotated, mining.min_support,
                                         mining.max_window)
            return annotated, candidates

        results = self._map(mine_one, relations)
        out = self._stage_dir("mine")
        write_candidates([c for _, c in results], out / "candidates.jsonl")
        with open(out / "annotated.jsonl", "w", encoding="utf-8") as fh:
            for annotated, _ in results:
                for entry in sorted(annotated.entries, key=lambda e: (e.head, e.tail)):
                    for sent in annotated.entries[entry]:
                        fh.write(json.dumps({
                            "relation": annotated.relation,
                            "head": entry.head, "tail": entry.tail,
                            "head_label": entry.head_label,
                            "tail_label": entry.tail_label,
                            "tokens": list(sent.tokens),
                            "head_spans": [list(s) for s in sent.head_spans],
                            "tail_spans": [list(s) for s in sent.tail_spans],
                        }, sort_keys=True, ensure_ascii=False) + "\n")
        for annotated, cand in results:
            log_event("mine", "relation", relation=cand.relation,
                      candidates=len(cand.candidates))
        self._write_manifest(
            "mine",
            {"subcorpus/subcorpus.jsonl": self.artifact("subcorpus/subcorpus.jsonl")},
            ["mine/candidates.jsonl", "mine/annotated.jsonl"])

    def _load_annotated(self) -> Dict[str, AnnotatedSubCorpus]:
        path = self.artifact("mine/annotated.jsonl")
        out: Dict[str, AnnotatedSubCorpus] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                annotated = out.setdefault(
                    rec["relation"], AnnotatedSubCorpus(relation=rec["relation"]))
                entry = TupleEntry(rec["head"], rec["tail"], rec["head_label"],
                                   rec["tail_label"])
                sent = AnnotatedSentence(
                    tokens=tuple(rec["tokens"]),
                    head_spans=tuple(tuple(s) for s in rec["head_spans"]),
                    tail_spans=tuple(tuple(s) for s in rec["tail_spans"]))
                annotated.entries.setdefault(entry, ())
                annotated.entries[entry] = annotated.entries[entry] + (sent,)
        return out

    def stage_select(self) -> None:
        candidates = read_candidates(self.artifact("mine/candidates.jsonl"))
        annotated = self._load_annotated()
        selector = self.config.selection.selector()
        seeds = self.config.selection.seed_prompts
        relations = sorted(annotated)

        def select_one(relation: str):
            seed_template = None
            if relation in seeds:
                seed_template = tuple(seeds[relation].split())
            return truepie_filter(candidates.get(relation, []), annotated[relation],
                                  selector, seed_template)

        ensembles = self._map(select_one, relations)
        out = self._stage_dir("select")
        write_ensembles(list(ensembles), out / "ensembles.json")
        for ensemble in ensembles:
            log_event("select", "relation", relation=ensemble.relation,
                      size=ensemble.size)
        self._write_manifest(
            "select",
            {"mine/candidates.jsonl": self.artifact("mine/candidates.jsonl"),
             "mine/annotated.jsonl": self.artifact("mine/annotated.jsonl")},
            ["select/ensembles.json"])

    def stage_optimize(self) -> None:
        ensembles = read_ensembles(self.artifact("select/ensembles.json"))
        out = self._stage_dir("optimize")
        inputs = {"select/ensembles.json": self.artifact("select/ensembles.json")}
        if not self.config.optimize.enabled:
            write_ensembles(list(ensembles.values()), out / "ensembles.json")
            log_event("optimize", "skipped", reason="optimize.enabled=false")
            self._write_manifest("optimize", inputs, ["optimize/ensembles.json"])
            return

        store = self._load_store()
        split = self._load_split()
        general, reliable = self._load_corpora()
        scorer = self._scorer(reliable)
        candidate_ids = store.entity_ids()
        candidate_labels = [store.label(e) for e in candidate_ids]
        gold_index = {e: i for i, e in enumerate(candidate_ids)}
        ocfg = self.config.optimize

        def heldout_for(relation: str) -> List[Triple]:
            triples = sorted(t for t in split["train"] if t.relation == relation)
            if not triples:
                return []
            rng_seed = derive_seed(self.config.seed, 0x0B7, stable_hash(relation))
            from .rng import SplitMix64
            shuffled = SplitMix64(rng_seed).shuffled(triples)
            keep = max(1, int(len(shuffled) * ocfg.heldout_fraction))
            return shuffled[:keep]

        def optimize_one(relation: str):
            ensemble = ensembles[relation]
            heldout = heldout_for(relation)
            rows = []
            for triple in heldout:
                for direction in self._directions():
                    if direction is Direction.TAIL_PREDICTION:
                        subject, gold = triple.head, triple.tail
                    else:
                        subject, gold = triple.tail, triple.head
                    instances = make_cloze(ensemble, subject, store.label(subject),
                                           direction, "infer")
                    row = []
                    for instance in instances:
                        dist = scorer.score_cloze(instance.text, candidate_labels)
                        row.append(dist.probs[gold_index[gold]])
                    rows.append(row)
            matrix = np.array(rows, dtype=np.float64) if rows else None
            return learn_weights(ensemble, matrix, epochs=ocfg.epochs,
                                 learning_rate=ocfg.learning_rate)

        relations = sorted(ensembles)
        optimized = self._map(optimize_one, relations)
        write_ensembles(list(optimized), out / "ensembles.json")
        for ensemble in optimized:
            log_event("optimize", "relation", relation=ensemble.relation,
                      weights=[round(w, 4) for w in ensemble.weights])
        inputs.update({
            "split/train.tsv": self.artifact("split/train.tsv"),
            "ingest/reliable.jsonl": self.artifact("ingest/reliable.jsonl"),
        })
        self._write_manifest("optimize", inputs, ["optimize/ensembles.json"])

    def stage_index(self) -> None:
        general, reliable = self._load_corpora()
        index = build_index(reliable, self.config.retrieval.k1,
                            self.config.retrieval.b)
        out = self._stage_dir("index")
        df_digest = hashlib.sha256()
        for token in sorted(index.df_):
            df_digest.update(f"{token}\x1f{index.df_[token]}".encode("utf-8"))
        with open(out / "bm25.json", "w", encoding="utf-8") as fh:
            json.dump({
                "k1": index.k1, "b": index.b, "sentences": index.n_docs_,
                "avg_len": index.avg_len_, "vocabulary": len(index.df_),
                "df_checksum": df_digest.hexdigest(),
            }, fh, indent=2, sort_keys=True)
            fh.write("\n")
        log_event("index", "done", sentences=index.n_docs_,
                  vocabulary=len(index.df_))
        self._write_manifest(
            "index",
            {"ingest/reliable.jsonl": self.artifact("ingest/reliable.jsonl")},
            ["index/bm25.json"])

    def _directions(self) -> List[Direction]:
        mode = self.config.eval.directions
        if mode == "tail":
            return [Direction.TAIL_PREDICTION]
        if mode == "head":
            return [Direction.HEAD_PREDICTION]
        return [Direction.TAIL_PREDICTION, Direction.HEAD_PREDICTION]

    def _eval_positives(self, split) -> List[Triple]:
        eval_set = set(self.config.split.eval_relations)
        return [t for t in split["train"] if t.relation in eval_set]

    def stage_negatives(self) -> None:
        store = self._load_store()
        split = self._load_split()
        ncfg = self.config.negatives
        model = TransE(dim=self.config.kge.dim, epochs=self.config.kge.epochs,
                       learning_rate=self.config.kge.learning_rate,
                       margin=self.config.kge.margin, seed=self.config.seed)
        model.fit(split["train"], entities=store.entity_ids(),
                  relations=store.relations)
        positives = self._eval_positives(split)
        training_set = gen_negatives(model, positives, set(store.triples),
                                     store.entity_ids(), m_ratio=ncfg.m_ratio,
                                     kge_fraction=ncfg.kge_fraction,
                                     seed=self.config.seed)
        out = self._stage_dir("negatives")
        write_negatives(training_set, out / "negatives.jsonl")

        x = ncfg.resolve_x(self.config.split.sub_ratio)
        x = min(x, len(store.entities))
        queries: List[Query] = []
        seen = set()
        for triple in split["test"]:
            for direction in self._directions():
                subject = (triple.head if direction is Direction.TAIL_PREDICTION
                           else triple.tail)
                query = Query(subject, triple.relation, direction)
                if query.key() not in seen:
                    seen.add(query.key())
                    queries.append(query)
        queries.sort(key=lambda q: q.key())
        recalls = [(q, model.recall(q, x)) for q in queries]
        write_recalls(recalls, out / "recalls.jsonl")
        with open(out / "kge.json", "w", encoding="utf-8") as fh:
            json.dump({"dim": model.dim, "epochs": model.epochs,
                       "checksum": model.checksum(), "recall_x": x},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        log_event("negatives", "done", positives=len(positives),
                  negatives=len(training_set.negatives), recall_x=x,
                  queries=len(queries), kge_checksum=model.checksum()[:12])
        self._write_manifest(
            "negatives",
            {"split/train.tsv": self.artifact("split/train.tsv"),
             "split/test.tsv": self.artifact("split/test.tsv")},
            ["negatives/negatives.jsonl", "negatives/recalls.jsonl",
             "negatives/kge.json"])

    def stage_assemble(self) -> None:
        store = self._load_store()
        split = self._load_split()
        ensembles = read_ensembles(self.artifact("optimize/ensembles.json"))
        kge_neg, rand_neg = read_negatives(self.artifact("negatives/negatives.jsonl"))
        general, reliable = self._load_corpora()
        index = build_index(reliable, self.config.retrieval.k1,
                            self.config.retrieval.b)
        positives = self._eval_positives(split)
        labeled = [(t, 1) for t in positives]
        labeled.extend((t, 0) for t in kge_neg + rand_neg)
        labeled.sort(key=lambda item: (item[0].relation, item[0].head,
                                       item[0].tail, -item[1]))

        def build_one(item):
            triple, label = item
            ensemble = ensembles.get(triple.relation)
            if ensemble is None:
                return []
            support = self._triple_support(index, store.label(triple.head),
                                           triple.relation,
                                           store.label(triple.tail),
                                           triple.as_tsv())
            return make_cloze(ensemble, triple.head, store.label(triple.head),
                              Direction.TAIL_PREDICTION, "train",
                              object_id=triple.tail,
                              object_label=store.label(triple.tail),
                              support=support)

        batches = self._map(build_one, labeled)
        instances = [inst for batch in batches for inst in batch]
        out = self._stage_dir("assemble")
        write_instances(instances, out / "train_instances.jsonl")
        log_event("assemble", "done", triples=len(labeled),
                  instances=len(instances),
                  with_support=sum(1 for i in instances if i.support))
        self._write_manifest(
            "assemble",
            {"optimize/ensembles.json": self.artifact("optimize/ensembles.json"),
             "negatives/negatives.jsonl": self.artifact("negatives/negatives.jsonl"),
             "split/train.tsv": self.artifact("split/train.tsv"),
             "ingest/reliable.jsonl": self.artifact("ingest/reliable.jsonl")},
            ["assemble/train_instances.jsonl"])

    def stage_train(self) -> None:
        instances = read_instances(self.artifact("assemble/train_instances.jsonl"))
        kge_neg, rand_neg = read_negatives(self.artifact("negatives/negatives.jsonl"))
        negative_set = {(t.head, t.relation, t.tail) for t in kge_neg + rand_neg}
        labeled = []
        n_pos = n_neg = 0
        for inst in instances:
            label = 0 if (inst.subject, inst.relation, inst.object) in negative_set else 1
            labeled.append((inst.text, label))
            n_pos, n_neg = n_pos + (label == 1), n_neg + (label == 0)
        ncfg = self.config.negatives
        if ncfg.m_as_pos_neg_ratio and n_pos:
            m_ratio = max(1, round(n_neg / n_pos))
        else:
            m_ratio = ncfg.m_ratio
        general, reliable = self._load_corpora()
        scorer = self._scorer(reliable)
        version = scorer.finetune(labeled, m_ratio=m_ratio,
                                  epochs=self.config.train.epochs)
        out = self._stage_dir("train")
        payload = {"mode": self.config.scorer.mode, "model_version": version,
                   "m_ratio": m_ratio, "instances": len(labeled)}
        if isinstance(scorer, ReferenceScorer):
            payload["head"] = scorer.head_state()
        with open(out / "scorer.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        log_event("train", "done", instances=len(labeled), positives=n_pos,
                  negatives=n_neg, model_version=version)
        self._write_manifest(
            "train",
            {"assemble/train_instances.jsonl":
                 self.artifact("assemble/train_instances.jsonl"),
             "negatives/negatives.jsonl": self.artifact("negatives/negatives.jsonl")},
            ["train/scorer.json"])

    def stage_predict(self) -> None:
        store = self._load_store()
        split = self._load_split()
        ensembles = read_ensembles(self.artifact("optimize/ensembles.json"))
        recalls = dict((q.key(), (q, entities))
                       for q, entities in read_recalls(
                           self.artifact("negatives/recalls.jsonl")))
        with open(self.artifact("train/scorer.json"), encoding="utf-8") as fh:
            trained = json.load(fh)
        general, reliable = self._load_corpora()
        scorer = self._scorer(reliable)
        if isinstance(scorer, ReferenceScorer):
            if "head" not in trained:
                raise ConfigError("train/scorer.json lacks the reference head; "
                                  "was training run in remote mode?")
            scorer.load_head(trained["head"])
        index = build_index(reliable, self.config.retrieval.k1,
                            self.config.retrieval.b)

        items = []
        for triple in split["test"]:
            if triple.relation not in ensembles:
                continue
            for direction in self._directions():
                if direction is Direction.TAIL_PREDICTION:
                    subject, gold = triple.head, triple.tail
                else:
                    subject, gold = triple.tail, triple.head
                items.append((Query(subject, triple.relation, direction), gold))
        items.sort(key=lambda it: (it[0].key(), it[1]))

        def predict_one(item) -> RankedPrediction:
            query, gold = item
            _, recall_ids = recalls[query.key()]
            # the degenerate self-answer never helps link prediction
            filtered = [e for e in recall_ids if e != query.subject]
            recall_ids = filtered or recall_ids
            ensemble = ensembles[query.relation]
            support = self._query_support(index, store.label(query.subject),
                                          query.relation,
                                          "|".join(query.key()))
            instances = make_cloze(ensemble, query.subject,
                                   store.label(query.subject), query.direction,
                                   "infer", support=support)
            candidate_labels = [(e, store.label(e)) for e in recall_ids]
            return predict(query, ensemble, scorer, instances, candidate_labels,
                           gold=gold, weighted=True)

        predictions = self._map(predict_one, items)
        out = self._stage_dir("predict")
        write_predictions(list(predictions), out / "predictions.jsonl")
        log_event("predict", "done", queries=len(items),
                  missing_gold=sum(1 for p in predictions if p.gold_rank is None))
        self._write_manifest(
            "predict",
            {"optimize/ensembles.json": self.artifact("optimize/ensembles.json"),
             "negatives/recalls.jsonl": self.artifact("negatives/recalls.jsonl"),
             "train/scorer.json": self.artifact("train/scorer.json"),
             "split/test.tsv": self.artifact("split/test.tsv")},
            ["predict/predictions.jsonl"])

    def stage_evaluate(self) -> None:
        predictions = read_predictions(self.artifact("predict/predictions.jsonl"))
        report = evaluate(predictions, self.config.eval.n_values,
                          config={"seed": self.config.seed,
                                  "sub_ratio": self.config.split.sub_ratio,
                                  "directions": self.config.eval.directions,
                                  "use_support": self.config.retrieval.use_support,
                                  "optimized_weights": self.config.optimize.enabled,
                                  "config_hash": self.config.config_hash()})
        out = self._stage_dir("evaluate")
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        log_event("evaluate", "done", **{f"hits@{n}": round(v, 4)
                                         for n, v in report.hits.items()},
                  mrr=round(report.mrr, 4), q=report.q,
                  missing_gold=report.missing_gold)
        self._write_manifest(
            "evaluate",
            {"predict/predictions.jsonl": self.artifact("predict/predictions.jsonl")},
            ["evaluate/report.json"])

    # -- entry points -------------------------------------------------------
    def run(self, stage: str) -> None:
        if stage == "all":
            for name in STAGES:
                self.run(name)
            return
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}; expected one of "
                              f"{', '.join(STAGES + ['all'])}")
        started = time.monotonic()
        getattr(self, f"stage_{stage}")()
        log_event(stage, "finished",
                  duration_s=round(time.monotonic() - started, 3))


def run_stage(stage: str, config: PipelineConfig, base_dir: Path,
              threads: int = 1) -> None:
    Runner(config, base_dir, threads).run(stage)
