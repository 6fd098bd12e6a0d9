import sys
import time

import numpy as np
import pytest

from reltrace import harness as hz
from reltrace import synth
from reltrace.gold import parse_pairs
from reltrace.store import EmbeddingModel


def make_model(tokens, vectors, freqs=None) -> EmbeddingModel:
    if not isinstance(vectors, np.ndarray):
        vectors = np.asarray(vectors, dtype=np.float64)
    if freqs is None:
        freqs = np.zeros(len(tokens), dtype=np.int64)
    return EmbeddingModel(list(tokens), vectors, np.asarray(freqs))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the acceptance checklist (one pass/fail line per shipping
    criterion) at the end of any run that executed those tests."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "CHECKLIST", None) if module else None
    if lines:
        terminalreporter.section("acceptance checklist")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def benchmark_run(tmp_path_factory):
    """One full diachronic benchmark build: corpora, snapshots for all four
    regimes, and the eight (regime x scoring) evaluation reports. Built once
    per session; the wall-clock time is recorded for budget checks."""
    out_dir = tmp_path_factory.mktemp("benchmark")
    spec = synth.benchmark_spec()
    config = synth.benchmark_train_config()
    t0 = time.perf_counter()
    corpora, gold_path = synth.gen_diachronic_corpus(spec, str(out_dir))
    gold = parse_pairs(gold_path)
    snapshots = {regime: hz.build_regime_snapshots(corpora, regime, config)
                 for regime in hz.REGIMES}
    years = tuple(sorted(corpora))
    reports = {}
    for regime in hz.REGIMES:
        for scoring in hz.SCORINGS:
            plan = hz.ExperimentPlan(years=years, regime=regime,
                                     strategy=hz.PREVIOUS, lam=1.0,
                                     ks=(1, 5, 10), scoring=scoring)
            reports[(regime, scoring)] = hz.run_plan(plan, snapshots[regime], gold)
    elapsed = time.perf_counter() - t0
    return {
        "spec": spec,
        "config": config,
        "corpora": corpora,
        "gold": gold,
        "snapshots": snapshots,
        "years": years,
        "reports": reports,
        "elapsed": elapsed,
    }
