"""Incrementally trained word embeddings with closed-form linear relation
projections, evaluated year over year.

The pipeline: train a CBOW model on a base corpus, update it on yearly
slices (expanding the vocabulary as new tokens clear a frequency
threshold), fit a ridge projection from source-entity vectors to
target-entity vectors on each year's snapshot, and score next-year
predictions by nearest-neighbor rank under four training regimes.
"""

from .errors import (ConfigError, EmptyDesignError, FormatError,
                     NumericalError, RankDeficiencyError, ReltraceError)
from .gold import (RelationPair, PairSlice, analogies_to_pairs, emit_pairs,
                   filter_by_vocab, load_bundled_gold, normalize_entity,
                   pairs_in, pairs_up_to, parse_pairs, split_new_vs_ongoing)
from .harness import (ALL_PAIRS, EvalReport, ExperimentPlan, IN_VOCAB_ONLY,
                      PREVIOUS, REGIMES, SCORINGS, STRATEGIES, UP_TO_NOW,
                      build_regime_snapshots, emit_report, load_report,
                      paired_t_test, predict_year, run_plan)
from .projection import (FORWARD, REVERSE, DesignSystem, LOOReport,
                         ProjectionMatrix, apply, assemble_design, fit,
                         load_projection, loo_cross_validate, save_projection)
from .store import (EmbeddingModel, attach_freqs, cosine, load_freqs,
                    load_model, nearest_neighbors, save_freqs, save_model)
from .synth import (SynthSpec, benchmark_spec, benchmark_train_config,
                    gen_diachronic_corpus, gen_linear_pairs,
                    staggered_schedule)
from .trainer import (TrainConfig, TrainState, build_neg_table, build_vocab,
                      cbow_loss, cbow_step, count_tokens, expand_vocab,
                      incremental_update, init_state, iter_sentences,
                      load_snapshot, sample_negatives, save_snapshot,
                      train_from_scratch, train_session)

__version__ = "0.1.0"

__all__ = [
    "ALL_PAIRS", "ConfigError", "DesignSystem", "EmbeddingModel",
    "EmptyDesignError", "EvalReport", "ExperimentPlan", "FORWARD",
    "FormatError", "IN_VOCAB_ONLY", "LOOReport", "NumericalError",
    "PairSlice", "PREVIOUS", "ProjectionMatrix", "RankDeficiencyError",
    "REGIMES", "ReltraceError",
    "RelationPair", "REVERSE", "SCORINGS", "STRATEGIES", "SynthSpec",
    "TrainConfig", "TrainState", "UP_TO_NOW", "analogies_to_pairs", "apply",
    "assemble_design", "attach_freqs", "benchmark_spec",
    "benchmark_train_config", "build_neg_table", "build_regime_snapshots",
    "build_vocab", "cbow_loss", "cbow_step", "cosine", "count_tokens",
    "emit_pairs", "emit_report", "expand_vocab", "filter_by_vocab", "fit",
    "gen_diachronic_corpus", "gen_linear_pairs", "incremental_update",
    "init_state", "iter_sentences", "load_bundled_gold", "load_freqs",
    "load_model", "load_projection", "load_report", "load_snapshot",
    "loo_cross_validate", "nearest_neighbors", "normalize_entity",
    "paired_t_test", "pairs_in", "pairs_up_to", "parse_pairs",
    "predict_year", "run_plan", "sample_negatives", "save_freqs",
    "save_model", "save_projection", "save_snapshot",
    "split_new_vs_ongoing", "staggered_schedule", "train_from_scratch",
    "train_session",
]
