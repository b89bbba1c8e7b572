import itertools

import numpy as np
import pytest

from sca.cluster import ClusterConfig
from sca.embeddings import spectral_norm
from sca.engine import ScaConfig, ScaModel, SemanticComponent, fit
from sca.errors import ConfigurationError
from sca.reduce import ReducerConfig
from sca.synthetic import SynthSpec, generate, match_directions, score_recovery


def fake_model(vectors):
    model = ScaModel(config=ScaConfig())
    for i, v in enumerate(vectors):
        v = np.asarray(v, dtype=np.float64)
        model.components.append(
            SemanticComponent(
                id=i, iteration=1,
                vector=(v / np.linalg.norm(v)).astype(np.float32),
                cluster_size=10,
            )
        )
    return model


class TestGenerate:
    def test_single_topic_docs_are_scalar_multiples(self):
        spec = SynthSpec(n_docs=50, dim=16, n_topics=2, topics_per_doc=(1, 1),
                         noise_sigma=0.0, seed=1)
        data = generate(spec)
        for i, topics in enumerate(data.topic_sets):
            row = data.embeddings.data[i].astype(np.float64)
            direction = data.directions[topics[0]]
            cos = row @ direction / np.linalg.norm(row)
            assert cos == pytest.approx(1.0, abs=1e-6)

    def test_two_unit_coefficients_give_sqrt2_norm(self):
        spec = SynthSpec(n_docs=20, dim=8, n_topics=3, topics_per_doc=(2, 2),
                         coefficient_range=(1.0, 1.0), noise_sigma=0.0, seed=2)
        data = generate(spec)
        norms = np.linalg.norm(data.embeddings.data.astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, np.sqrt(2.0), atol=1e-6)

    def test_deterministic_per_seed(self):
        spec = SynthSpec(n_docs=30, dim=8, n_topics=3, seed=9, noise_sigma=0.1)
        a, b = generate(spec), generate(spec)
        np.testing.assert_array_equal(a.embeddings.data, b.embeddings.data)
        assert a.corpus.raw_texts == b.corpus.raw_texts
        assert a.topic_sets == b.topic_sets

    def test_directions_orthonormal(self):
        data = generate(SynthSpec(n_docs=5, dim=12, n_topics=4, seed=0))
        gram = data.directions @ data.directions.T
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-10)

    def test_correlated_directions_overlap(self):
        data = generate(
            SynthSpec(n_docs=5, dim=12, n_topics=4, seed=0,
                      direction_correlation=0.5)
        )
        gram = data.directions @ data.directions.T
        off = gram[~np.eye(4, dtype=bool)]
        assert np.all(off > 0.1)

    def test_topic_vocabularies_disjoint(self):
        data = generate(SynthSpec(n_docs=40, dim=8, n_topics=3, seed=3,
                                  topics_per_doc=(1, 1)))
        for i, topics in enumerate(data.topic_sets):
            prefix = f"topic{topics[0]:02d}"
            assert all(tok.startswith(prefix) for tok in data.corpus.tokens[i])

    def test_noise_magnitude_is_per_document(self, rng):
        spec = SynthSpec(n_docs=2000, dim=64, n_topics=2, topics_per_doc=(1, 1),
                         coefficient_range=(1.0, 1.0), noise_sigma=0.05, seed=4)
        data = generate(spec)
        residual_norms = []
        for i, topics in enumerate(data.topic_sets):
            row = data.embeddings.data[i].astype(np.float64)
            direction = data.directions[topics[0]]
            residual_norms.append(np.linalg.norm(row - (row @ direction) * direction))
        # noise perpendicular to the planted direction has RMS close to sigma
        rms = float(np.sqrt(np.mean(np.square(residual_norms))))
        assert rms == pytest.approx(0.05, rel=0.1)

    def test_invalid_specs(self):
        with pytest.raises(ConfigurationError):
            generate(SynthSpec(n_docs=5, dim=4, n_topics=8))
        with pytest.raises(ConfigurationError):
            generate(SynthSpec(n_docs=5, dim=8, n_topics=4, topics_per_doc=(0, 2)))
        with pytest.raises(ConfigurationError):
            generate(SynthSpec(n_docs=5, dim=8, n_topics=4,
                               topic_count_weights=(1.0,)))


class TestMatching:
    def test_exact_components_recall_one(self):
        data = generate(SynthSpec(n_docs=5, dim=16, n_topics=4, seed=5))
        model = fake_model(data.directions)
        scores = score_recovery(model, data.directions, data.topic_sets)
        assert scores["direction_recall"] == 1.0
        assert scores["mean_best_cosine"] == pytest.approx(1.0, abs=1e-6)

    def test_random_components_recall_zero(self, rng):
        data = generate(SynthSpec(n_docs=5, dim=64, n_topics=4, seed=6))
        model = fake_model(rng.standard_normal((4, 64)))
        scores = score_recovery(model, data.directions, data.topic_sets)
        assert scores["direction_recall"] == 0.0

    def test_sign_flip_invariance(self):
        data = generate(SynthSpec(n_docs=5, dim=16, n_topics=4, seed=7))
        model = fake_model(-data.directions)
        scores = score_recovery(model, data.directions, data.topic_sets)
        assert scores["direction_recall"] == 1.0

    def test_permutation_invariance(self, rng):
        data = generate(SynthSpec(n_docs=5, dim=16, n_topics=5, seed=8))
        model = fake_model(data.directions[rng.permutation(5)])
        scores = score_recovery(model, data.directions, data.topic_sets)
        assert scores["direction_recall"] == 1.0

    def test_greedy_matches_brute_force_optimum(self, rng):
        # oracle: best assignment over all permutations, K <= 6
        for trial in range(10):
            k, d = 5, 12
            dirs = np.linalg.qr(rng.standard_normal((d, k)))[0].T
            comps = dirs[rng.permutation(k)] + rng.normal(0, 0.05, (k, d))
            comps /= np.linalg.norm(comps, axis=1, keepdims=True)
            sims = np.abs(dirs @ comps.T)
            best_total = max(
                sum(sims[i, p[i]] for i in range(k))
                for p in itertools.permutations(range(k))
            )
            matches = match_directions(dirs, comps)
            greedy_total = sum(cos for _, _, cos in matches)
            assert greedy_total == pytest.approx(best_total, abs=1e-6)


class TestEndToEndRecovery:
    def test_noiseless_single_topic_full_fit(self):
        # noise 0, one topic per document, full removal: recall 1.0 and a
        # residual matrix at numerical zero
        data = generate(
            SynthSpec(n_docs=600, dim=16, n_topics=4, topics_per_doc=(1, 1),
                      noise_sigma=0.0, seed=21)
        )
        config = ScaConfig(
            alpha=0.0, mu=1.0, seed=2,
            reducer=ReducerConfig(kind="pca", target_dim=3),
            cluster=ClusterConfig(min_cluster_size=50, min_samples=10),
        )
        model = fit(data.embeddings, config, data.corpus)
        scores = score_recovery(
            model, data.directions, data.topic_sets, embeddings=data.embeddings
        )
        assert scores["direction_recall"] == 1.0
        final = model.iteration_log[-1].residual_norm
        assert final < 1e-3
