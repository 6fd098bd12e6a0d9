import os
import tempfile

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_model
from reltrace.errors import FormatError
from reltrace.store import (
    EmbeddingModel,
    attach_freqs,
    cosine,
    load_freqs,
    load_model,
    nearest_neighbors,
    save_freqs,
    save_model,
)


def finite_vec(dim):
    return st.lists(
        st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False),
        min_size=dim, max_size=dim,
    )


class TestModelValidation:
    def test_row_count_mismatch(self):
        with pytest.raises(ValueError):
            EmbeddingModel(["a", "b"], np.zeros((3, 2)), np.zeros(2, dtype=np.int64))

    def test_duplicate_token_rejected(self):
        with pytest.raises(ValueError, match="duplicate token"):
            make_model(["a", "a"], np.zeros((2, 2)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            make_model(["a"], [[np.nan, 0.0]])

    def test_negative_freq_rejected(self):
        with pytest.raises(ValueError):
            make_model(["a"], [[1.0, 2.0]], freqs=[-1])

    def test_lookup(self):
        m = make_model(["a", "b"], [[1.0, 0.0], [0.0, 2.0]], freqs=[5, 7])
        assert m.dim == 2
        assert len(m) == 2
        assert "a" in m and "c" not in m
        assert m.index("b") == 1
        assert np.array_equal(m.vector("b"), [0.0, 2.0])
        assert m.freq("a") == 5

    def test_dtype_preserved(self):
        m32 = make_model(["a"], np.ones((1, 2), dtype=np.float32))
        m64 = make_model(["a"], np.ones((1, 2), dtype=np.float64))
        assert m32.vectors.dtype == np.float32
        assert m64.vectors.dtype == np.float64


class TestCosine:
    def test_identical_vectors(self):
        assert cosine([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-12)

    def test_forty_five_degrees(self):
        assert cosine([1.0, 0.0], [1.0, 1.0]) == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-8)

    def test_zero_norm_raises(self):
        with pytest.raises(ValueError):
            cosine([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(ValueError):
            cosine([1.0, 0.0], [0.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cosine([1.0, 0.0], [1.0, 0.0, 0.0])

    @given(finite_vec(4), finite_vec(4))
    def test_symmetry(self, u, v):
        if np.linalg.norm(u) == 0.0 or np.linalg.norm(v) == 0.0:
            return
        assert cosine(u, v) == pytest.approx(cosine(v, u), abs=1e-12)

    @given(finite_vec(3), st.floats(min_value=0.25, max_value=64.0))
    def test_scale_invariance(self, u, c):
        if np.linalg.norm(u) == 0.0 or np.linalg.norm(np.asarray(u) * c) == 0.0:
            return
        v = [3.0, -1.0, 2.0]
        assert cosine(np.asarray(u) * c, v) == pytest.approx(cosine(u, v), abs=1e-9)


class TestNearestNeighbors:
    def three_word_model(self):
        return make_model(
            ["word1", "word2", "word3"],
            [[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]],
        )

    def test_exact_token_query_is_first(self):
        m = self.three_word_model()
        hits = nearest_neighbors(m, m.vector("word2"), k=1)
        assert hits[0][0] == "word2"
        assert hits[0][1] == pytest.approx(1.0)

    def test_top_two(self):
        m = self.three_word_model()
        hits = nearest_neighbors(m, np.array([1.0, 0.0]), k=2)
        assert [t for t, _ in hits] == ["word1", "word2"]

    def test_exclude_removes_token(self):
        m = self.three_word_model()
        hits = nearest_neighbors(m, np.array([1.0, 0.0]), k=3, exclude={"word1"})
        assert [t for t, _ in hits] == ["word2", "word3"]

    def test_tie_broken_by_vocabulary_index(self):
        m = make_model(["later", "earlier"], [[2.0, 0.0], [1.0, 0.0]])
        hits = nearest_neighbors(m, np.array([1.0, 0.0]), k=2)
        # equal cosine: the token at the lower row index wins
        assert [t for t, _ in hits] == ["later", "earlier"]

    def test_k_larger_than_pool(self):
        m = self.three_word_model()
        hits = nearest_neighbors(m, np.array([1.0, 1.0]), k=50)
        assert len(hits) == 3

    def test_zero_norm_rows_never_returned(self):
        m = make_model(["a", "zero", "b"], [[1.0, 0.0], [0.0, 0.0], [0.5, 0.5]])
        hits = nearest_neighbors(m, np.array([1.0, 0.0]), k=3)
        assert [t for t, _ in hits] == ["a", "b"]

    def test_zero_norm_query_raises(self):
        with pytest.raises(ValueError):
            nearest_neighbors(self.three_word_model(), np.zeros(2), k=1)

    def test_bad_k_raises(self):
        with pytest.raises(ValueError):
            nearest_neighbors(self.three_word_model(), np.array([1.0, 0.0]), k=0)

    def test_query_dim_mismatch(self):
        with pytest.raises(ValueError):
            nearest_neighbors(self.three_word_model(), np.array([1.0, 0.0, 0.0]), k=1)

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(7)
        m = make_model(
            [f"t{i}" for i in range(40)],
            rng.normal(size=(40, 6)),
        )
        query = rng.normal(size=6)
        hits = nearest_neighbors(m, query, k=10)

        scored = []
        for i, tok in enumerate(m.tokens):
            scored.append((tok, cosine(m.vectors[i], query), i))
        scored.sort(key=lambda item: (-item[1], item[2]))
        expected = [(tok, score) for tok, score, _ in scored[:10]]

        assert [t for t, _ in hits] == [t for t, _ in expected]
        for (_, got), (_, want) in zip(hits, expected):
            assert got == pytest.approx(want, abs=1e-10)


class TestTextFormat:
    def test_round_trip_exact_values(self, tmp_path):
        m = make_model(["alpha", "beta"], [[0.5, -1.0], [0.125, 3.0]])
        path = str(tmp_path / "m.txt")
        save_model(m, path, format="text")
        loaded = load_model(path, format="text")
        assert loaded.tokens == ["alpha", "beta"]
        assert np.array_equal(loaded.vectors, m.vectors)

    def test_header_line(self, tmp_path):
        m = make_model(["a", "b"], [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        path = str(tmp_path / "m.txt")
        save_model(m, path, format="text")
        first = open(path, encoding="utf-8").readline().strip()
        assert first == "2 3"

    def test_headerless_variant_accepted(self, tmp_path):
        path = str(tmp_path / "m.txt")
        with open(path, "w") as f:
            f.write("a 1.0 0.0\nb 0.0 1.0\n")
        m = load_model(path, format="text")
        assert m.tokens == ["a", "b"]
        assert m.dim == 2

    def test_header_row_count_mismatch(self, tmp_path):
        path = str(tmp_path / "m.txt")
        with open(path, "w") as f:
            f.write("3 2\na 1.0 0.0\nb 0.0 1.0\n")
        with pytest.raises(FormatError, match="declares 3 tokens"):
            load_model(path, format="text")

    def test_field_count_mismatch(self, tmp_path):
        path = str(tmp_path / "m.txt")
        with open(path, "w") as f:
            f.write("2 3\na 1.0 0.0 0.0\nb 0.0 1.0\n")
        with pytest.raises(FormatError):
            load_model(path, format="text")

    def test_unparseable_value(self, tmp_path):
        path = str(tmp_path / "m.txt")
        with open(path, "w") as f:
            f.write("1 2\na 1.0 oops\n")
        with pytest.raises(FormatError):
            load_model(path, format="text")

    def test_non_finite_value(self, tmp_path):
        path = str(tmp_path / "m.txt")
        with open(path, "w") as f:
            f.write("1 2\na 1.0 inf\n")
        with pytest.raises(FormatError):
            load_model(path, format="text")

    def test_empty_file(self, tmp_path):
        path = str(tmp_path / "m.txt")
        open(path, "w").close()
        with pytest.raises(FormatError):
            load_model(path, format="text")

    def test_empty_vocabulary(self, tmp_path):
        m = EmbeddingModel([], np.zeros((0, 4)), np.zeros(0, dtype=np.int64))
        path = str(tmp_path / "m.txt")
        save_model(m, path, format="text")
        loaded = load_model(path, format="text")
        assert len(loaded) == 0
        assert loaded.dim == 4

    @given(
        st.lists(
            st.text(alphabet="abcdefgh", min_size=1, max_size=6),
            min_size=1, max_size=8, unique=True,
        ),
        st.integers(min_value=1, max_value=5),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    @settings(max_examples=25, deadline=None)
    def test_round_trip_property(self, tokens, dim, seed):
        rng = np.random.default_rng(seed)
        m = make_model(tokens, rng.normal(size=(len(tokens), dim)).astype(np.float32))
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "m.txt")
            save_model(m, path, format="text")
            loaded = load_model(path, format="text")
        assert loaded.tokens == m.tokens
        assert np.array_equal(loaded.vectors, m.vectors)


class TestBinaryFormat:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(3)
        m = make_model(
            [f"tok{i}" for i in range(9)],
            rng.normal(size=(9, 5)).astype(np.float32),
        )
        path = str(tmp_path / "m.bin")
        save_model(m, path)
        loaded = load_model(path)
        assert loaded.tokens == m.tokens
        assert loaded.vectors.dtype == np.float32
        assert np.array_equal(loaded.vectors.view(np.uint32), m.vectors.view(np.uint32))

    def test_truncated_payload(self, tmp_path):
        m = make_model(["a", "b"], np.ones((2, 3), dtype=np.float32))
        path = str(tmp_path / "m.bin")
        save_model(m, path)
        blob = open(path, "rb").read()
        with open(path, "wb") as f:
            f.write(blob[:-5])
        with pytest.raises(FormatError):
            load_model(path)

    def test_trailing_garbage(self, tmp_path):
        m = make_model(["a"], np.ones((1, 2), dtype=np.float32))
        path = str(tmp_path / "m.bin")
        save_model(m, path)
        with open(path, "ab") as f:
            f.write(b"xx")
        with pytest.raises(FormatError):
            load_model(path)

    def test_whitespace_token_rejected_on_save(self, tmp_path):
        m = make_model(["bad token"], np.ones((1, 2), dtype=np.float32))
        with pytest.raises(ValueError):
            save_model(m, str(tmp_path / "m.bin"))

    def test_unknown_format_rejected(self, tmp_path):
        m = make_model(["a"], np.ones((1, 2)))
        with pytest.raises(ValueError):
            save_model(m, str(tmp_path / "m"), format="pickle")
        save_model(m, str(tmp_path / "m"), format="text")
        with pytest.raises(ValueError):
            load_model(str(tmp_path / "m"), format="pickle")


class TestFreqSidecar:
    def test_round_trip(self, tmp_path):
        m = make_model(["a", "b"], np.ones((2, 2)), freqs=[10, 3])
        path = str(tmp_path / "m.freqs")
        save_freqs(m, path)
        assert load_freqs(path) == {"a": 10, "b": 3}

    def test_attach_missing_defaults_to_zero(self):
        m = make_model(["a", "b"], np.ones((2, 2)))
        out = attach_freqs(m, {"a": 4})
        assert out.freq("a") == 4
        assert out.freq("b") == 0
        # original untouched
        assert m.freq("a") == 0

    def test_bad_sidecar_line(self, tmp_path):
        path = str(tmp_path / "m.freqs")
        with open(path, "w") as f:
            f.write("a\t4\nbroken-line\n")
        with pytest.raises(FormatError):
            load_freqs(path)
