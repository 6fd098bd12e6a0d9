"""Synthetic fixtures: planted linear pair sets and diachronic corpora.

gen_linear_pairs plants an exact (or noisy) affine relation between source
and target vectors so closed-form fitting has a known answer.

gen_diachronic_corpus emits per-year corpora in which every scheduled pair
co-occurs, sentence by sentence, with structured context:

  * pair-topic tokens (unique per pair) appearing symmetrically around both
    members — both vectors converge near a shared pair direction, a
    component any model trained on the data reproduces in its own basis;
  * global role markers flanking sources and targets separately — a
    basis-specific source-to-target offset that survives only when a later
    model keeps training in the same coordinate system;
  * family tokens shared by small pair groups, giving each pair a crowd of
    same-role siblings in embedding space.

Pair members never fall inside each other's context windows (window <= 3):
mutual prediction between two tokens admits sign-flipped solutions, so
in-window adjacency does not reliably align their input vectors.

Half the pairs ("tight", even indices) get mostly topic sentences, half
("loose", odd indices) mostly role sentences. A projection applied across
two independently initialized models retains only the topic channel, so it
resolves tight pairs at best; a projection applied across incrementally
updated models retains both channels and resolves loose pairs too.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import projection as prj
from .gold import RelationPair, emit_pairs
from .store import EmbeddingModel
from .trainer import TrainConfig

YEAR_BASE = 2000
FAMILY_SIZE = 5


@dataclass(frozen=True)
class SynthSpec:
    dim: int = 50
    n_pairs: int = 40
    noise_sigma: float = 0.0
    years: int = 5
    vocab_background: int = 200
    cooccur_strength: int = 12
    base_weight: int = 3
    seed: int = 1
    schedule: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.n_pairs < 1 or self.years < 1:
            raise ValueError("n_pairs and years must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.cooccur_strength < 1:
            raise ValueError("cooccur_strength must be positive")
        if self.base_weight < 1:
            raise ValueError("base_weight must be positive")
        if self.schedule is not None:
            sched = tuple(tuple(year_list) for year_list in self.schedule)
            object.__setattr__(self, "schedule", sched)
            if len(sched) != self.years:
                raise ValueError("schedule must list active pairs for every year")
            for year_list in sched:
                for p in year_list:
                    if not (0 <= p < self.n_pairs):
                        raise ValueError(f"scheduled pair index {p} out of range")


def benchmark_spec() -> SynthSpec:
    """Frozen corpus spec for the regime-comparison benchmark (5 years,
    40 pairs, dim 50): the setting the directional regime-ordering and
    group-split checks run on."""
    return SynthSpec(dim=50, n_pairs=40, noise_sigma=0.0, years=5,
                     vocab_background=200, cooccur_strength=12,
                     base_weight=3, seed=3)


def benchmark_train_config() -> TrainConfig:
    """Frozen training configuration matching benchmark_spec: small window
    so pair members never co-occur directly, light negative sampling and a
    reduced table for the small vocabulary, single worker for determinism."""
    return TrainConfig(dim=50, window=2, negative=5, epochs=10, min_count=5,
                       expand_threshold=5, lr_initial=0.05, lr_min=1e-4,
                       seed=11, table_size=200_000, workers=1)


def staggered_schedule(n_pairs: int, years: int,
                       early_fraction: float = 0.6) -> tuple[tuple[int, ...], ...]:
    """Default activation schedule: the first early_fraction of pairs run
    every year; the rest are introduced in equal batches from year 2 on and
    stay active once introduced."""
    if years == 1:
        return (tuple(range(n_pairs)),)
    n_early = round(n_pairs * early_fraction)
    late = list(range(n_early, n_pairs))
    intro_year = {}
    batches = np.array_split(late, years - 1)
    for i, batch in enumerate(batches):
        for p in batch:
            intro_year[int(p)] = i + 2
    sched = []
    for y in range(1, years + 1):
        active = list(range(n_early)) + [p for p, iy in intro_year.items() if iy <= y]
        sched.append(tuple(sorted(active)))
    return tuple(sched)


def source_token(p: int) -> str:
    return f"src{p:03d}"


def target_token(p: int) -> str:
    return f"tgt{p:03d}"


def gen_linear_pairs(spec: SynthSpec) -> tuple[EmbeddingModel, list[RelationPair], np.ndarray]:
    """Plant target vectors as an affine image of random source vectors.

    Returns the model (sources, targets, and background distractors, all
    float64), the pair list (year 0), and the true (dim+1) x dim map whose
    row 0 is the intercept.
    """
    rng = np.random.default_rng(spec.seed)
    d, n = spec.dim, spec.n_pairs
    true_map = rng.normal(size=(d + 1, d))
    sources = rng.normal(size=(n, d))
    proj = prj.ProjectionMatrix(true_map, 0.0)
    targets = prj.apply(proj, sources)
    if spec.noise_sigma > 0:
        targets = targets + rng.normal(0.0, spec.noise_sigma, size=targets.shape)
    background = rng.normal(size=(spec.vocab_background, d))
    tokens = ([source_token(p) for p in range(n)]
              + [target_token(p) for p in range(n)]
              + [f"bg{i:04d}" for i in range(spec.vocab_background)])
    vectors = np.vstack([sources, targets, background])
    model = EmbeddingModel(tokens, vectors,
                           np.zeros(len(tokens), dtype=np.int64))
    pairs = [RelationPair(0, source_token(p), target_token(p), id=f"P{p}")
             for p in range(n)]
    return model, pairs, true_map


# sentence templates ------------------------------------------------------

SRC_MARKERS = ("rolesrc0", "rolesrc1", "rolesrc2")
TGT_MARKERS = ("roletgt0", "roletgt1", "roletgt2")


def _topic_sentence(p: int, fam: list[str], rng) -> list[str]:
    """Both members wrapped in identical pair-topic context, far enough
    apart that neither is in the other's window. Family tokens sit outside
    the members' windows so the topic channel stays pure."""
    u = f"topic{p:03d}"
    f1, f2, f3 = rng.choice(fam, 3)
    s, t = source_token(p), target_token(p)
    return [f1, u, u, s, u, u, f2, u, u, t, u, u, f3]


def _role_sentence(p: int, fam: list[str], rng) -> list[str]:
    """Source flanked by source-role markers, target by target-role
    markers; the shared family token keeps the pair in one sentence."""
    rs = rng.choice(SRC_MARKERS, 2)
    rt = rng.choice(TGT_MARKERS, 2)
    f1 = rng.choice(fam)
    return [rs[0], source_token(p), rs[1], f1,
            rt[0], target_token(p), rt[1]]


def _family_tokens(p: int) -> list[str]:
    fam = p // FAMILY_SIZE
    return [f"fam{fam:02d}_{j}" for j in range(3)]


def is_tight(p: int) -> bool:
    return p % 2 == 0


def gen_diachronic_corpus(spec: SynthSpec, out_dir: str) -> tuple[dict[int, str], str]:
    """Write per-year corpus files and the matching gold TSV.

    Returns ({year: corpus path}, gold path). Years are YEAR_BASE+1 ..
    YEAR_BASE+spec.years. Tokens belonging to a pair (members and its topic
    token) first occur in the pair's first scheduled year; role markers,
    family tokens, and background tokens occur from the first year on.

    The first year is an aggregate slice: all sentence counts are scaled by
    base_weight, standing in for a multi-year initial training span feeding
    a well-converged base model, with thinner annual slices after it.
    """
    rng = np.random.default_rng(spec.seed)
    schedule = spec.schedule or staggered_schedule(spec.n_pairs, spec.years)
    os.makedirs(out_dir, exist_ok=True)
    bg = [f"bg{i:04d}" for i in range(spec.vocab_background)]
    n_families = (spec.n_pairs + FAMILY_SIZE - 1) // FAMILY_SIZE

    paths: dict[int, str] = {}
    gold: list[RelationPair] = []
    for y_index, active in enumerate(schedule, start=1):
        year = YEAR_BASE + y_index
        weight = spec.base_weight if y_index == 1 else 1
        sentences: list[list[str]] = []
        for p in active:
            fam = _family_tokens(p)
            strong, weak = (0.75, 0.25) if is_tight(p) else (0.25, 0.75)
            n_topic = max(1, round(spec.cooccur_strength * strong)) * weight
            n_role = max(1, round(spec.cooccur_strength * weak)) * weight
            for _ in range(n_topic):
                sentences.append(_topic_sentence(p, fam, rng))
            for _ in range(n_role):
                sentences.append(_role_sentence(p, fam, rng))
            gold.append(RelationPair(year, source_token(p), target_token(p),
                                     id=f"P{p}Y{year}"))
        # family co-text: keeps family tokens trained even in years where
        # few members are active
        for f in range(n_families):
            fam = [f"fam{f:02d}_{j}" for j in range(3)]
            for _ in range(6 * weight):
                b = rng.choice(bg, 2)
                order = [fam[int(rng.integers(3))], b[0],
                         fam[int(rng.integers(3))], b[1],
                         fam[int(rng.integers(3))]]
                sentences.append(order)
        # marker co-text: role markers need stable vectors of their own
        for _ in range(12 * weight):
            b = rng.choice(bg, 3)
            rs = rng.choice(SRC_MARKERS, 2)
            rt = rng.choice(TGT_MARKERS, 2)
            sentences.append([rs[0], b[0], rs[1], b[1], rt[0], b[2], rt[1]])
        # background noise
        for _ in range((40 + 2 * spec.vocab_background) * weight):
            sentences.append(list(rng.choice(bg, 6)))
        perm = rng.permutation(len(sentences))
        path = os.path.join(out_dir, f"corpus_{year}.txt")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for i in perm:
                f.write(" ".join(sentences[i]) + "\n")
        paths[year] = path

    gold_path = os.path.join(out_dir, "gold_pairs.tsv")
    emit_pairs(gold, gold_path)
    return paths, gold_path
