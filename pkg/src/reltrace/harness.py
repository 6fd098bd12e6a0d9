"""Diachronic experiment grid: per-year projection training, next-year
prediction under four model regimes, two pair-selection strategies, two
scoring modes, and a paired significance test.

A "step" is a consecutive year transition t -> t+1: the projection is fit
on snapshot t (pairs selected by strategy, filtered by snapshot-t
vocabulary) and evaluated on the pairs active in t+1 against snapshot t+1.
Accuracies are percentages in [0, 100]. Yearly rows are macro-averaged
across steps; pooled micro-averages over all evaluated pairs are reported
alongside.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from . import projection as prj
from .errors import (ConfigError, EmptyDesignError, FormatError,
                     RankDeficiencyError)
from .gold import RelationPair, pairs_in, pairs_up_to, split_new_vs_ongoing
from .store import EmbeddingModel, nearest_neighbors, _format_value
from .trainer import TrainConfig, incremental_update, iter_sentences, train_from_scratch

REGIMES = ("separate", "cumulative", "incr_static", "incr_dynamic")
STRATEGIES = ("up_to_now", "previous")
SCORINGS = ("in_vocab_only", "all_pairs")

UP_TO_NOW = "up_to_now"
PREVIOUS = "previous"
IN_VOCAB_ONLY = "in_vocab_only"
ALL_PAIRS = "all_pairs"


@dataclass(frozen=True)
class ExperimentPlan:
    years: tuple[int, ...]
    regime: str
    strategy: str = UP_TO_NOW
    lam: float = 1.0
    ks: tuple[int, ...] = (1, 5, 10)
    scoring: str = IN_VOCAB_ONLY

    def __post_init__(self) -> None:
        object.__setattr__(self, "years", tuple(self.years))
        object.__setattr__(self, "ks", tuple(self.ks))
        if list(self.years) != sorted(set(self.years)):
            raise ConfigError("plan years must be strictly increasing")
        if list(self.ks) != sorted(set(self.ks)) or any(k < 1 for k in self.ks):
            raise ConfigError("ks must be strictly increasing positive integers")
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.scoring not in SCORINGS:
            raise ConfigError(f"unknown scoring mode {self.scoring!r}")
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")


@dataclass
class PairOutcome:
    """Per-pair prediction record: either evaluated with a target rank, or
    not evaluated with the reason."""

    pair: RelationPair
    status: str                      # "evaluated" | "skipped" | "oov_missed"
    reason: str | None = None        # OOV reason when not evaluated
    rank: int | None = None          # 1-based rank of the true target, if found


@dataclass
class PredictResult:
    outcomes: list[PairOutcome]
    ks: tuple[int, ...]
    scoring: str

    @property
    def evaluated(self) -> int:
        return sum(1 for o in self.outcomes if o.status == "evaluated")

    @property
    def skipped(self) -> int:
        return sum(1 for o in self.outcomes if o.status == "skipped")

    @property
    def oov_missed(self) -> int:
        return sum(1 for o in self.outcomes if o.status == "oov_missed")

    def hits(self, k: int) -> int:
        return sum(1 for o in self.outcomes
                   if o.status == "evaluated" and o.rank is not None and o.rank <= k)

    @property
    def denominator(self) -> int:
        if self.scoring == ALL_PAIRS:
            return len(self.outcomes)
        return self.evaluated

    @property
    def accuracy(self) -> dict[int, float]:
        den = self.denominator
        return {k: (100.0 * self.hits(k) / den if den else 0.0) for k in self.ks}


def predict_year(
    model_t1: EmbeddingModel,
    proj: prj.ProjectionMatrix,
    test_pairs: list[RelationPair],
    ks: tuple[int, ...] = (1, 5, 10),
    scoring: str = IN_VOCAB_ONLY,
    direction: str = prj.FORWARD,
    exclude_source: bool = False,
    exclude_tokens: frozenset[str] = frozenset(),
) -> PredictResult:
    """Score projected predictions against next-year gold pairs.

    Pairs with either member missing from ``model_t1`` are skipped
    (in_vocab_only) or scored as misses (all_pairs). For the rest the
    projected source vector's neighbors are ranked in ``model_t1`` and the
    true target's rank decides hit@k. By default nothing is excluded from
    the ranking; ``exclude_source`` drops the pair's own source token and
    ``exclude_tokens`` drops a fixed set (ablations).
    """
    if not test_pairs:
        raise ValueError("empty test set")
    if scoring not in SCORINGS:
        raise ConfigError(f"unknown scoring mode {scoring!r}")
    miss_status = "oov_missed" if scoring == ALL_PAIRS else "skipped"
    max_k = max(ks)
    outcomes: list[PairOutcome] = []
    for pair in test_pairs:
        src, tgt = (pair.source, pair.target) if direction == prj.FORWARD \
            else (pair.target, pair.source)
        src_in, tgt_in = src in model_t1, tgt in model_t1
        if not (src_in and tgt_in):
            reason = ("both-OOV" if not src_in and not tgt_in
                      else "source-OOV" if not src_in else "target-OOV")
            outcomes.append(PairOutcome(pair, miss_status, reason=reason))
            continue
        predicted = prj.apply(proj, model_t1.vector(src).astype(np.float64))
        exclude = set(exclude_tokens)
        if exclude_source:
            exclude.add(src)
        ranked = nearest_neighbors(model_t1, predicted, max_k,
                                   exclude=frozenset(exclude))
        rank = None
        for pos, (token, _) in enumerate(ranked, start=1):
            if token == tgt:
                rank = pos
                break
        outcomes.append(PairOutcome(pair, "evaluated", rank=rank))
    return PredictResult(outcomes, tuple(ks), scoring)


@dataclass
class GroupResult:
    accuracy: dict[int, float]
    evaluated: int
    total: int


@dataclass
class StepResult:
    """One t -> t+1 transition; ``year`` is the predicted year t+1."""

    year: int
    train_year: int
    accuracy: dict[int, float]
    evaluated: int
    skipped: int
    oov_missed: int
    n_train_pairs: int
    n_train_skipped: int
    fit_failed: bool = False
    groups: dict[str, GroupResult] = field(default_factory=dict)


@dataclass
class EvalReport:
    plan: ExperimentPlan
    steps: list[StepResult]

    @property
    def n_failed_steps(self) -> int:
        return sum(1 for s in self.steps if s.fit_failed)

    def mean_accuracy(self) -> dict[int, float]:
        """Macro average across successful steps."""
        ok = [s for s in self.steps if not s.fit_failed]
        if not ok:
            return {k: 0.0 for k in self.plan.ks}
        return {k: float(np.mean([s.accuracy[k] for s in ok])) for k in self.plan.ks}

    def pooled_accuracy(self) -> dict[int, float]:
        """Micro average: pooled hits over pooled denominators."""
        ok = [s for s in self.steps if not s.fit_failed]
        out: dict[int, float] = {}
        for k in self.plan.ks:
            hits = sum(s.accuracy[k] * self._den(s) / 100.0 for s in ok)
            den = sum(self._den(s) for s in ok)
            out[k] = float(100.0 * hits / den) if den else 0.0
        return out

    def _den(self, s: StepResult) -> int:
        if self.plan.scoring == ALL_PAIRS:
            return s.evaluated + s.oov_missed
        return s.evaluated


def _fit_step(train_pairs, model_t, lam):
    design = prj.assemble_design(train_pairs, model_t)
    return prj.fit(design, lam), design


def run_plan(
    plan: ExperimentPlan,
    snapshots: dict[int, EmbeddingModel],
    gold: list[RelationPair],
    exclude_source: bool = False,
) -> EvalReport:
    """Evaluate every consecutive year step of the plan.

    Steps whose projection cannot be fit (no in-vocabulary training pairs,
    or singular system) are recorded as failed and excluded from means.
    Steps with no test pairs in year t+1 are skipped entirely.
    """
    if len(plan.years) < 2:
        raise ConfigError("plan needs at least two years to form a step")
    missing = [y for y in plan.years if y not in snapshots]
    if missing:
        raise ConfigError(f"missing snapshots for years {missing}")
    steps: list[StepResult] = []
    for t, t1 in zip(plan.years, plan.years[1:]):
        if plan.strategy == UP_TO_NOW:
            train_pairs = pairs_up_to(gold, t)
        else:
            train_pairs = pairs_in(gold, t)
        test_pairs = pairs_in(gold, t1)
        if not test_pairs:
            continue
        try:
            proj, design = _fit_step(train_pairs, snapshots[t], plan.lam)
        except (EmptyDesignError, RankDeficiencyError):
            steps.append(StepResult(
                year=t1, train_year=t, accuracy={k: 0.0 for k in plan.ks},
                evaluated=0, skipped=0, oov_missed=0,
                n_train_pairs=0, n_train_skipped=len(train_pairs),
                fit_failed=True))
            continue
        result = predict_year(snapshots[t1], proj, test_pairs, plan.ks,
                              plan.scoring, exclude_source=exclude_source)
        history = pairs_up_to(gold, t)
        new, ongoing = split_new_vs_ongoing(test_pairs, history)
        groups = {}
        for name, members in (("new", new), ("ongoing", ongoing)):
            combos = {p.combo for p in members}
            sub = [o for o in result.outcomes if o.pair.combo in combos]
            sub_res = PredictResult(sub, result.ks, result.scoring)
            groups[name] = GroupResult(sub_res.accuracy, sub_res.evaluated,
                                       len(sub))
        steps.append(StepResult(
            year=t1, train_year=t, accuracy=result.accuracy,
            evaluated=result.evaluated, skipped=result.skipped,
            oov_missed=result.oov_missed,
            n_train_pairs=design.n, n_train_skipped=len(design.skipped),
            groups=groups))
    return EvalReport(plan, steps)


def paired_t_test(a, b) -> tuple[float, float]:
    """Two-sided paired t test.

    Zero variance of the differences is a degenerate case: p = 1.0 when the
    means agree (t = 0), p = 0.0 with an infinite t when they differ.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two equal-length 1-D samples")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 paired observations")
    d = a - b
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return float(np.inf) if mean > 0 else float(-np.inf), 0.0
    t = mean / (sd / np.sqrt(n))
    p = 2.0 * float(scipy.stats.t.sf(abs(t), n - 1))
    return float(t), p


REPORT_COLUMNS = ("regime", "strategy", "scoring", "year", "k",
                  "accuracy", "evaluated", "skipped", "oov_missed")


def emit_report(report: EvalReport, path: str, fmt: str = "tsv") -> None:
    """Serialize the report.

    The TSV has one row per (year, k) plus macro summary rows (year =
    "mean") and pooled micro rows (year = "pooled"); group breakdowns ride
    only in the json-lines format, which carries full fidelity and
    round-trips through load_report.
    """
    if fmt == "tsv":
        _emit_tsv(report, path)
    elif fmt == "json-lines":
        _emit_jsonl(report, path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def _emit_tsv(report: EvalReport, path: str) -> None:
    plan = report.plan
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(REPORT_COLUMNS) + "\n")
        for s in report.steps:
            for k in plan.ks:
                f.write("\t".join([
                    plan.regime, plan.strategy, plan.scoring, str(s.year),
                    str(k), _format_value(round(s.accuracy[k], 6)),
                    str(s.evaluated), str(s.skipped), str(s.oov_missed),
                ]) + "\n")
        if report.steps:
            mean = report.mean_accuracy()
            pooled = report.pooled_accuracy()
            tot_eval = sum(s.evaluated for s in report.steps)
            tot_skip = sum(s.skipped for s in report.steps)
            tot_oov = sum(s.oov_missed for s in report.steps)
            for label, acc in (("mean", mean), ("pooled", pooled)):
                for k in plan.ks:
                    f.write("\t".join([
                        plan.regime, plan.strategy, plan.scoring, label,
                        str(k), _format_value(round(acc[k], 6)),
                        str(tot_eval), str(tot_skip), str(tot_oov),
                    ]) + "\n")


def _emit_jsonl(report: EvalReport, path: str) -> None:
    plan = report.plan
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        meta = {"kind": "meta", "regime": plan.regime, "strategy": plan.strategy,
                "scoring": plan.scoring, "lambda": plan.lam,
                "years": list(plan.years), "ks": list(plan.ks),
                "n_failed_steps": report.n_failed_steps}
        f.write(json.dumps(meta, sort_keys=True) + "\n")
        for s in report.steps:
            row = {"kind": "step", "year": s.year, "train_year": s.train_year,
                   "accuracy": {str(k): s.accuracy[k] for k in plan.ks},
                   "evaluated": s.evaluated, "skipped": s.skipped,
                   "oov_missed": s.oov_missed,
                   "n_train_pairs": s.n_train_pairs,
                   "n_train_skipped": s.n_train_skipped,
                   "fit_failed": s.fit_failed,
                   "groups": {name: {"accuracy": {str(k): g.accuracy[k] for k in plan.ks},
                                     "evaluated": g.evaluated, "total": g.total}
                              for name, g in s.groups.items()}}
            f.write(json.dumps(row, sort_keys=True) + "\n")


def load_report(path: str) -> EvalReport:
    """Rebuild an EvalReport from its json-lines serialization."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [json.loads(line) for line in f if line.strip()]
    if not lines or lines[0].get("kind") != "meta":
        raise FormatError("missing meta line", path=str(path), line=1)
    meta = lines[0]
    plan = ExperimentPlan(
        years=tuple(meta["years"]), regime=meta["regime"],
        strategy=meta["strategy"], lam=meta["lambda"],
        ks=tuple(meta["ks"]), scoring=meta["scoring"])
    steps = []
    for row in lines[1:]:
        if row.get("kind") != "step":
            continue
        groups = {name: GroupResult({int(k): v for k, v in g["accuracy"].items()},
                                    g["evaluated"], g["total"])
                  for name, g in row.get("groups", {}).items()}
        steps.append(StepResult(
            year=row["year"], train_year=row["train_year"],
            accuracy={int(k): v for k, v in row["accuracy"].items()},
            evaluated=row["evaluated"], skipped=row["skipped"],
            oov_missed=row["oov_missed"],
            n_train_pairs=row["n_train_pairs"],
            n_train_skipped=row["n_train_skipped"],
            fit_failed=row["fit_failed"], groups=groups))
    return EvalReport(plan, steps)


def build_regime_snapshots(
    corpora: dict[int, object],
    regime: str,
    config: TrainConfig,
) -> dict[int, EmbeddingModel]:
    """Train the per-year snapshots a regime needs.

    ``corpora`` maps year -> corpus source (path or line list), in
    chronological order. Fresh-initialization regimes (separate,
    cumulative) use seed + year-index so every year gets its own layout;
    incremental regimes carry one state through, copying the model at
    each year mark. incr_static freezes the vocabulary by disabling
    expansion.
    """
    if regime not in REGIMES:
        raise ConfigError(f"unknown regime {regime!r}")
    years = sorted(corpora)
    snapshots: dict[int, EmbeddingModel] = {}
    if regime in ("separate", "cumulative"):
        lines: list[list[str]] = []
        for i, year in enumerate(years):
            cfg = TrainConfig(**{**config.__dict__, "seed": config.seed + i})
            if regime == "separate":
                state = train_from_scratch(corpora[year], cfg)
            else:
                lines = lines + [list(s) for s in iter_sentences(corpora[year])]
                state = train_from_scratch(lines, cfg)
            snapshots[year] = state.model
        return snapshots
    if regime == "incr_static":
        config = TrainConfig(**{**config.__dict__, "expand_threshold": float("inf")})
    state = None
    for year in years:
        if state is None:
            state = train_from_scratch(corpora[year], config)
        else:
            state = incremental_update(state, corpora[year])
        m = state.model
        snapshots[year] = EmbeddingModel(list(m.tokens), m.vectors.copy(),
                                         m.freqs.copy())
    return snapshots
