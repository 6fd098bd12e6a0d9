"""Gold relation pairs: ingestion, year slicing, and vocabulary filtering.

The native format is a tab-separated file of ``year<TAB>source<TAB>target``
rows ('#' lines are comments). Entities are normalized at ingestion:
lowercased, with internal whitespace collapsed to the ``::`` joiner used by
the corpus tokenization for multiword names, so a gold entity always equals
exactly one corpus token. Ingestion is idempotent: parsing a file emitted by
:func:`emit_pairs` yields equal pairs.

A converter from the classic four-token analogy test-set format is included
so the same projection protocol can run on analogy sections.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

from .errors import FormatError

#: Analogy sections whose entries are plain nouns; the relation protocol is
#: only meaningful for these (grammatical sections pair inflected forms).
NOUN_SECTIONS = (
    "capital-common-countries",
    "capital-world",
    "city-in-state",
    "currency",
    "family",
)

BUNDLED_GOLD_RESOURCE = "conflict_pairs_1994_2010.tsv"


def normalize_entity(name: str) -> str:
    """Lowercase and join multiword names into a single ``::`` token."""
    return "::".join(name.lower().split())


@dataclass(frozen=True)
class RelationPair:
    """One gold instance of the typed relation in a given year."""

    year: int
    source: str
    target: str
    # provenance label only; two instances with equal (year, source, target)
    # are the same gold fact regardless of where they were read from
    id: str = field(default="", compare=False)

    @property
    def combo(self) -> tuple[str, str]:
        return (self.source, self.target)


@dataclass
class PairSlice:
    """Partition of an input pair list into usable and skipped entries."""

    pairs: list[RelationPair]
    skipped: list[tuple[RelationPair, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)


def parse_pairs(path: str, year_range: tuple[int, int] | None = None) -> list[RelationPair]:
    """Read a gold TSV into pairs, normalizing entities.

    Duplicate (year, source, target) triples are kept: they are distinct
    conflict-year instances. ``year_range`` optionally enforces an inclusive
    year span.
    """
    pairs: list[RelationPair] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise FormatError(
                    f"expected 3 tab-separated fields, got {len(fields)}",
                    path=str(path), line=lineno,
                )
            try:
                year = int(fields[0])
            except ValueError:
                raise FormatError(f"unparseable year {fields[0]!r}",
                                  path=str(path), line=lineno) from None
            source = normalize_entity(fields[1])
            target = normalize_entity(fields[2])
            if not source or not target:
                raise FormatError("empty source or target entity",
                                  path=str(path), line=lineno)
            if year_range is not None and not (year_range[0] <= year <= year_range[1]):
                raise FormatError(
                    f"year {year} outside configured span {year_range}",
                    path=str(path), line=lineno,
                )
            pairs.append(RelationPair(year, source, target, id=f"L{lineno}"))
    return pairs


def emit_pairs(pairs: list[RelationPair], path: str) -> None:
    """Write pairs back to the gold TSV format."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("# year\tsource\ttarget\n")
        for p in pairs:
            f.write(f"{p.year}\t{p.source}\t{p.target}\n")


def load_bundled_gold() -> list[RelationPair]:
    """Parse the gold pair fixture shipped with the package."""
    ref = resources.files("reltrace.data").joinpath(BUNDLED_GOLD_RESOURCE)
    with resources.as_file(ref) as path:
        return parse_pairs(str(path))


def pairs_up_to(pairs: list[RelationPair], year: int) -> list[RelationPair]:
    """Pairs from all years up to and including ``year``, order preserved."""
    return [p for p in pairs if p.year <= year]


def pairs_in(pairs: list[RelationPair], year: int) -> list[RelationPair]:
    """Pairs from exactly ``year``, order preserved."""
    return [p for p in pairs if p.year == year]


def split_new_vs_ongoing(
    test_pairs: list[RelationPair],
    history_pairs: list[RelationPair],
) -> tuple[list[RelationPair], list[RelationPair]]:
    """Partition test pairs into (new, ongoing) against a history.

    A pair is ongoing iff its (source, target) combination occurs anywhere
    in ``history_pairs``, regardless of year.
    """
    known = {p.combo for p in history_pairs}
    new = [p for p in test_pairs if p.combo not in known]
    ongoing = [p for p in test_pairs if p.combo in known]
    return new, ongoing


def filter_by_vocab(pairs: list[RelationPair], vocab) -> PairSlice:
    """Keep pairs whose both members are in ``vocab`` (anything supporting
    ``in``); skipped entries carry the reason."""
    kept: list[RelationPair] = []
    skipped: list[tuple[RelationPair, str]] = []
    for p in pairs:
        src_in = p.source in vocab
        tgt_in = p.target in vocab
        if src_in and tgt_in:
            kept.append(p)
        elif not src_in and not tgt_in:
            skipped.append((p, "both-OOV"))
        elif not src_in:
            skipped.append((p, "source-OOV"))
        else:
            skipped.append((p, "target-OOV"))
    return PairSlice(kept, skipped)


def analogies_to_pairs(path: str, sections: tuple[str, ...] = NOUN_SECTIONS) -> list[RelationPair]:
    """Convert selected sections of a four-token analogy file to unique pairs.

    Each quadruple ``a b c d`` contributes the pairs (a, b) and (c, d);
    duplicates are emitted once, in first-seen order. Pairs carry the
    sentinel year 0 (the analogy sets are not dated).
    """
    wanted = set(sections)
    seen: set[tuple[str, str]] = set()
    pairs: list[RelationPair] = []
    current: str | None = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(":"):
                current = line[1:].strip()
                continue
            if current not in wanted:
                continue
            toks = line.split()
            if len(toks) != 4:
                raise FormatError(
                    f"expected 4 tokens in analogy line, got {len(toks)}",
                    path=str(path), line=lineno,
                )
            for a, b in ((toks[0], toks[1]), (toks[2], toks[3])):
                combo = (normalize_entity(a), normalize_entity(b))
                if combo not in seen:
                    seen.add(combo)
                    pairs.append(RelationPair(0, combo[0], combo[1],
                                              id=f"{current}:{len(seen)}"))
    return pairs
