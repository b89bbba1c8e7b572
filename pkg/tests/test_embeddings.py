import numpy as np
import pytest

from sca.embeddings import (
    DegenerateVectorError,
    EmbeddingLoadError,
    EmbeddingMatrix,
    cosine_similarity,
    frobenius_norm,
    load_embeddings,
    save_embeddings,
    spectral_norm,
)


class TestScaeFormat:
    def test_identity_rows_roundtrip(self, tmp_path):
        data = np.array([[1, 0, 0], [0, 1, 0]], dtype=np.float32)
        path = tmp_path / "m.scae"
        save_embeddings(data, path)
        loaded = load_embeddings(path, "binary")
        assert loaded.n == 2 and loaded.dim == 3
        np.testing.assert_array_equal(loaded.data, data)

    def test_reload_bit_identical(self, tmp_path, rng):
        data = rng.standard_normal((17, 9)).astype(np.float32)
        p1, p2 = tmp_path / "a.scae", tmp_path / "b.scae"
        save_embeddings(data, p1)
        save_embeddings(load_embeddings(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "m.scae"
        save_embeddings(np.ones((5, 3), dtype=np.float32), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-12])  # drop one row
        with pytest.raises(EmbeddingLoadError, match="row count mismatch"):
            load_embeddings(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.scae"
        save_embeddings(np.ones((2, 2), dtype=np.float32), path)
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(EmbeddingLoadError, match="magic"):
            load_embeddings(path)

    def test_non_finite_names_row_and_column(self, tmp_path):
        data = np.ones((3, 4), dtype=np.float32)
        data[1, 2] = np.nan
        path = tmp_path / "m.scae"
        save_embeddings(data, path)
        with pytest.raises(EmbeddingLoadError, match="row 1, column 2"):
            load_embeddings(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(EmbeddingLoadError, match="not found"):
            load_embeddings(tmp_path / "nope.scae")


class TestCsvFormat:
    def test_direct_parse(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1.0,2.0\n3.0,4.0\n")
        loaded = load_embeddings(path, "csv")
        np.testing.assert_array_equal(loaded.data, [[1, 2], [3, 4]])

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1.0,2.0\n3.0\n")
        with pytest.raises(EmbeddingLoadError, match="columns"):
            load_embeddings(path, "csv")


class TestCosine:
    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_identical(self):
        assert cosine_similarity([1, 0], [1, 0]) == 1.0

    def test_hand_dot_product(self):
        # 24 / (5 * 5)
        assert cosine_similarity([3, 4], [4, 3]) == pytest.approx(0.96)

    def test_zero_norm_raises(self):
        with pytest.raises(DegenerateVectorError):
            cosine_similarity([0, 0], [1, 0])

    def test_symmetry_and_positive_scaling(self, rng):
        for _ in range(50):
            x = rng.standard_normal(8)
            v = rng.standard_normal(8)
            c = float(rng.uniform(0.1, 10))
            assert cosine_similarity(x, v) == pytest.approx(
                cosine_similarity(v, x), abs=1e-12
            )
            assert cosine_similarity(x, c * x) == pytest.approx(1.0, abs=1e-9)

    def test_clamped(self):
        x = np.full(4, 1e-20)
        assert -1.0 <= cosine_similarity(x, x) <= 1.0


class TestSpectralNorm:
    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((3, 3), dtype=np.float32)) == 0.0

    def test_identity(self):
        assert spectral_norm(np.eye(2, dtype=np.float32)) == pytest.approx(1.0)

    def test_diagonal_singular_values(self):
        m = np.array([[3, 0], [0, 4]], dtype=np.float32)
        assert spectral_norm(m, tol=1e-8) == pytest.approx(4.0, abs=1e-4)

    def test_against_svd_oracle(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 50))
            d = int(rng.integers(2, 50))
            m = rng.standard_normal((n, d)).astype(np.float32)
            oracle = float(np.linalg.svd(m.astype(np.float64), compute_uv=False)[0])
            estimate = spectral_norm(m, tol=1e-9, max_iter=2000)
            assert estimate == pytest.approx(oracle, rel=1e-4)
            fro = frobenius_norm(m)
            assert estimate <= fro * (1 + 1e-9)
            assert estimate >= fro / np.sqrt(min(n, d)) * (1 - 1e-9)


class TestEmbeddingMatrix:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            EmbeddingMatrix(np.zeros((0, 3), dtype=np.float32))

    def test_flags_zero_rows(self):
        data = np.array([[1, 2], [0, 0], [3, 4]], dtype=np.float32)
        m = EmbeddingMatrix(data)
        np.testing.assert_array_equal(m.zero_rows, [1])

    def test_row_norms_match_numpy(self, rng):
        data = rng.standard_normal((13, 7)).astype(np.float32)
        m = EmbeddingMatrix(data)
        np.testing.assert_allclose(
            m.row_norms, np.linalg.norm(data.astype(np.float64), axis=1), rtol=1e-12
        )

    def test_incremental_norm_updates_track_changes(self, rng):
        data = rng.standard_normal((6, 5)).astype(np.float32)
        m = EmbeddingMatrix(data)
        _ = m.row_norms
        rows = np.array([0, 2])
        old_sq = m.row_norms[rows] ** 2
        m.data[rows] *= 0.5
        m.update_norms_squared_delta(rows, 0.25 * old_sq - old_sq)
        np.testing.assert_allclose(
            m.row_norms, np.linalg.norm(m.data.astype(np.float64), axis=1), rtol=1e-5
        )
