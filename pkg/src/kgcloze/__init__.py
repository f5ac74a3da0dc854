"""Knowledge-graph completion through mined cloze prompts.

The pipeline mines quality prompt templates per relation from a text corpus,
retrieves BM25 support passages, scores candidate facts with a pluggable
language-model scorer (a deterministic corpus-statistics scorer ships
built in; any service speaking the v1 wire protocol plugs in unchanged), and
evaluates link prediction by re-ranking KGE recalls with Hits@N and MRR.
"""

from .corpus import CorpusStore, SubCorpus, TupleEntry, ingest, mine_sub_corpus
from .ensemble import (PromptWeightLearner, ensemble_prob_uniform,
                       ensemble_prob_weighted, learn_weights)
from .evaluation import EvalReport, RankedPrediction, classify_triples, evaluate, predict
from .kg import Direction, KGStore, Query, Split, SplitSpec, Triple, load_kg, split
from .kge import TransE, TrainingSet, gen_negatives
from .mining import (Candidate, CandidateSet, Prompt, mine_candidates,
                     segment_phrases)
from .remote import RemoteScorer
from .retrieval import (BM25Index, ClozeInstance, RetrievalConfig, SupportPassage,
                        build_index, make_cloze, retrieve)
from .scoring import (ClassificationScore, ClozeDistribution, CorpusStats,
                      ReferenceScorer, Scorer, cross_entropy_loss)
from .selection import (PatternEmbedding, PromptEnsemble, QualityScore,
                        SelectorConfig, TruePieThresholds, score_quality,
                        truepie_filter)

__version__ = "0.1.0"

__all__ = [
    "BM25Index", "Candidate", "CandidateSet", "ClassificationScore",
    "ClozeDistribution", "ClozeInstance", "CorpusStats", "CorpusStore",
    "Direction", "EvalReport", "KGStore", "PatternEmbedding", "Prompt",
    "PromptEnsemble", "PromptWeightLearner", "Query", "RankedPrediction",
    "ReferenceScorer", "RemoteScorer", "RetrievalConfig", "Scorer",
    "SelectorConfig", "Split", "SplitSpec", "SubCorpus", "SupportPassage",
    "TrainingSet", "TransE", "Triple", "TruePieThresholds", "TupleEntry",
    "QualityScore", "build_index", "classify_triples", "cross_entropy_loss",
    "ensemble_prob_uniform", "ensemble_prob_weighted", "evaluate",
    "gen_negatives", "ingest", "learn_weights", "load_kg", "make_cloze",
    "mine_candidates", "mine_sub_corpus", "predict", "retrieve",
    "score_quality", "segment_phrases", "split", "truepie_filter",
]
