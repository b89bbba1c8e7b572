import numpy as np
import pytest

from sca.text import DocumentCorpus


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_corpus(token_lists, ids=None, labels=None):
    """Corpus straight from token lists (texts are the joined tokens)."""
    ids = ids or [f"d{i}" for i in range(len(token_lists))]
    texts = [" ".join(toks) for toks in token_lists]
    return DocumentCorpus(
        ids=list(ids),
        raw_texts=texts,
        clean_texts=texts,
        tokens=[list(t) for t in token_lists],
        labels=labels,
    )


@pytest.fixture
def small_synth():
    """A tiny planted-topic dataset that fits quickly (4 topics, 900 docs)."""
    from sca import ClusterConfig, ReducerConfig, ScaConfig, SynthSpec, generate

    spec = SynthSpec(
        n_docs=900,
        dim=24,
        n_topics=4,
        topics_per_doc=(1, 2),
        topic_count_weights=(0.95, 0.05),
        noise_sigma=0.02,
        tokens_per_doc=6,
        seed=11,
    )
    data = generate(spec)
    config = ScaConfig(
        alpha=0.0,
        mu=1.0,
        seed=5,
        reducer=ReducerConfig(kind="pca", target_dim=3),
        cluster=ClusterConfig(min_cluster_size=40, min_samples=15),
    )
    return data, config
