import numpy as np
import pytest

from reltrace.gold import parse_pairs
from reltrace.projection import assemble_design, fit, loo_cross_validate
from reltrace.synth import (
    FAMILY_SIZE,
    SRC_MARKERS,
    TGT_MARKERS,
    YEAR_BASE,
    SynthSpec,
    _role_sentence,
    _topic_sentence,
    benchmark_spec,
    benchmark_train_config,
    gen_diachronic_corpus,
    gen_linear_pairs,
    is_tight,
    source_token,
    staggered_schedule,
    target_token,
)
from reltrace.trainer import iter_sentences


def small_spec(**overrides):
    base = dict(dim=8, n_pairs=20, noise_sigma=0.0, years=4,
                vocab_background=30, cooccur_strength=4, base_weight=2, seed=5)
    return SynthSpec(**{**base, **overrides})


class TestSpecValidation:
    def test_dim_floor(self):
        with pytest.raises(ValueError):
            small_spec(dim=1)

    def test_schedule_length_must_cover_years(self):
        with pytest.raises(ValueError):
            small_spec(years=3, schedule=((0,), (1,)))

    def test_schedule_pair_index_bounds(self):
        with pytest.raises(ValueError):
            small_spec(n_pairs=2, years=1, schedule=((0, 5),))

    def test_base_weight_floor(self):
        with pytest.raises(ValueError):
            small_spec(base_weight=0)

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            small_spec(noise_sigma=-0.1)


class TestPlantedLinearMap:
    def test_noiseless_map_recovered_exactly(self):
        model, pairs, true_map = gen_linear_pairs(small_spec(n_pairs=30))
        design = assemble_design(pairs, model)
        proj = fit(design, lam=0.0)
        assert np.allclose(proj.coeffs, true_map, rtol=1e-6, atol=1e-8)

    def test_loo_perfect_on_planted_map(self):
        model, pairs, _ = gen_linear_pairs(small_spec())
        report = loo_cross_validate(pairs, model, lam=1e-8, ks=(1,))
        assert report.n_evaluated == 20
        assert report.accuracy[1] == pytest.approx(1.0)

    def test_deterministic(self):
        a_model, a_pairs, a_map = gen_linear_pairs(small_spec())
        b_model, b_pairs, b_map = gen_linear_pairs(small_spec())
        assert a_model == b_model
        assert a_pairs == b_pairs
        assert np.array_equal(a_map, b_map)

    def test_seed_changes_output(self):
        a_model, _, a_map = gen_linear_pairs(small_spec(seed=5))
        b_model, _, b_map = gen_linear_pairs(small_spec(seed=6))
        assert not np.array_equal(a_map, b_map)
        assert not np.array_equal(a_model.vectors, b_model.vectors)

    def test_noise_breaks_exact_fit(self):
        noisy = small_spec(noise_sigma=0.5)
        model, pairs, true_map = gen_linear_pairs(noisy)
        design = assemble_design(pairs, model)
        proj = fit(design, lam=0.0)
        assert not np.allclose(proj.coeffs, true_map, rtol=1e-6, atol=1e-8)

    def test_vocabulary_layout(self):
        model, pairs, _ = gen_linear_pairs(small_spec())
        assert len(model) == 20 + 20 + 30
        assert all(p.source == source_token(i) for i, p in enumerate(pairs))
        assert all(p.target == target_token(i) for i, p in enumerate(pairs))
        assert all(p.year == 0 for p in pairs)


class TestStaggeredSchedule:
    def test_shapes_and_growth(self):
        sched = staggered_schedule(40, 5)
        assert len(sched) == 5
        assert len(sched[0]) == 24
        assert set(sched[-1]) == set(range(40))
        for a, b in zip(sched, sched[1:]):
            assert set(a) <= set(b)

    def test_single_year_has_everyone(self):
        sched = staggered_schedule(10, 1)
        assert sched == (tuple(range(10)),)

    def test_pairs_stay_active_once_introduced(self):
        sched = staggered_schedule(15, 4, early_fraction=0.4)
        introduced = set()
        for active in sched:
            introduced |= set(active)
            assert set(active) == introduced


class TestSentenceTemplates:
    def test_members_never_share_a_window(self):
        window = benchmark_train_config().window
        rng = np.random.default_rng(0)
        fam = ["fam00_0", "fam00_1", "fam00_2"]
        for p in range(6):
            for sent in (_topic_sentence(p, fam, rng), _role_sentence(p, fam, rng)):
                i = sent.index(source_token(p))
                j = sent.index(target_token(p))
                assert abs(i - j) > window

    def test_topic_windows_contain_only_topic_tokens(self):
        window = benchmark_train_config().window
        rng = np.random.default_rng(0)
        fam = ["fam00_0", "fam00_1", "fam00_2"]
        sent = _topic_sentence(3, fam, rng)
        for member in (source_token(3), target_token(3)):
            i = sent.index(member)
            ctx = sent[max(0, i - window):i] + sent[i + 1:i + 1 + window]
            assert all(tok == "topic003" for tok in ctx)

    def test_role_sentence_marker_sides(self):
        rng = np.random.default_rng(1)
        fam = ["fam00_0", "fam00_1", "fam00_2"]
        sent = _role_sentence(2, fam, rng)
        i = sent.index(source_token(2))
        j = sent.index(target_token(2))
        assert sent[i - 1] in SRC_MARKERS and sent[i + 1] in SRC_MARKERS
        assert sent[j - 1] in TGT_MARKERS and sent[j + 1] in TGT_MARKERS


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    spec = small_spec()
    paths, gold_path = gen_diachronic_corpus(spec, str(out))
    return spec, paths, gold_path


class TestDiachronicCorpus:
    def test_one_file_per_year(self, generated):
        spec, paths, _ = generated
        years = [YEAR_BASE + i for i in range(1, spec.years + 1)]
        assert sorted(paths) == years

    def test_gold_rows_match_schedule_activations(self, generated):
        spec, _, gold_path = generated
        sched = staggered_schedule(spec.n_pairs, spec.years)
        gold = parse_pairs(gold_path)
        assert len(gold) == sum(len(active) for active in sched)

    def test_pair_tokens_first_occur_in_intro_year(self, generated):
        spec, paths, _ = generated
        sched = staggered_schedule(spec.n_pairs, spec.years)
        intro = {}
        for y_index, active in enumerate(sched, start=1):
            for p in active:
                intro.setdefault(p, YEAR_BASE + y_index)
        first_occurrence = {}
        for year in sorted(paths):
            for sent in iter_sentences(paths[year]):
                for tok in sent:
                    first_occurrence.setdefault(tok, year)
        for p, year in intro.items():
            assert first_occurrence[source_token(p)] == year
            assert first_occurrence[target_token(p)] == year
            assert first_occurrence[f"topic{p:03d}"] == year

    def test_markers_and_background_present_from_year_one(self, generated):
        spec, paths, _ = generated
        first_year_tokens = {tok for sent in iter_sentences(paths[YEAR_BASE + 1])
                             for tok in sent}
        for marker in SRC_MARKERS + TGT_MARKERS:
            assert marker in first_year_tokens
        assert any(tok.startswith("bg") for tok in first_year_tokens)
        assert any(tok.startswith("fam") for tok in first_year_tokens)

    def test_first_year_is_heavier(self, generated):
        spec, paths, _ = generated
        def n_lines(path):
            return sum(1 for _ in open(path))
        # base_weight scales the aggregate first slice; later years are thin
        assert n_lines(paths[YEAR_BASE + 1]) > n_lines(paths[YEAR_BASE + 2])

    def test_deterministic_files(self, tmp_path):
        spec = small_spec()
        paths_a, gold_a = gen_diachronic_corpus(spec, str(tmp_path / "a"))
        paths_b, gold_b = gen_diachronic_corpus(spec, str(tmp_path / "b"))
        for year in paths_a:
            assert open(paths_a[year]).read() == open(paths_b[year]).read()
        assert open(gold_a).read() == open(gold_b).read()

    def test_explicit_schedule_honored(self, tmp_path):
        spec = small_spec(n_pairs=3, years=2, schedule=((0,), (0, 2)))
        paths, gold_path = gen_diachronic_corpus(spec, str(tmp_path))
        gold = parse_pairs(gold_path)
        per_year = {}
        for p in gold:
            per_year.setdefault(p.year, set()).add(p.source)
        assert per_year[YEAR_BASE + 1] == {source_token(0)}
        assert per_year[YEAR_BASE + 2] == {source_token(0), source_token(2)}
        year1_tokens = {tok for sent in iter_sentences(paths[YEAR_BASE + 1])
                        for tok in sent}
        assert source_token(2) not in year1_tokens

    def test_tightness_alternates_by_parity(self):
        assert is_tight(0) and is_tight(2)
        assert not is_tight(1) and not is_tight(3)

    def test_family_grouping(self):
        from reltrace.synth import _family_tokens
        assert _family_tokens(0) == _family_tokens(FAMILY_SIZE - 1)
        assert _family_tokens(0) != _family_tokens(FAMILY_SIZE)


class TestBenchmarkHelpers:
    def test_benchmark_spec_is_frozen_shape(self):
        spec = benchmark_spec()
        assert spec.years == 5
        assert spec.n_pairs == 40
        assert spec.noise_sigma == 0.0

    def test_benchmark_config_is_deterministic_mode(self):
        config = benchmark_train_config()
        assert config.workers == 1
        assert config.dim == benchmark_spec().dim
