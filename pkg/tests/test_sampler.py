import numpy as np
import pytest
from scipy import stats

from skewrec import corpus, sampler
from skewrec.sampler import SamplerError, TripleSampler
from skewrec.synthetic import block_corpus


def test_forced_choices():
    # u likes only a; items are a, b, c
    data = corpus.build_interactions([("u", "a"), ("u2", "b"), ("u2", "c")])
    s = TripleSampler(data, seed=1)
    for _ in range(200):
        u, i, j = s.sample()
        if u == 0:
            assert i == 0 and j in (1, 2)


def test_negative_frequencies_balanced():
    # u: positive a, negatives x and y
    data = corpus.build_interactions([("u", "a"), ("v", "x"), ("v", "y")])
    s = TripleSampler(data, seed=2)
    triples = s.sample_many(100_000)
    js = triples[triples[:, 0] == 0, 2]
    counts = np.bincount(js, minlength=3)[1:]
    assert stats.chisquare(counts).pvalue > 0.001
    n = len(js)
    assert abs(counts[0] - n / 2) < 3 * np.sqrt(n / 4)


def test_saturated_corpus_errors():
    data = corpus.build_interactions([("u", "a"), ("u", "b")])
    with pytest.raises(SamplerError):
        TripleSampler(data)


def test_saturated_user_skipped():
    data = corpus.build_interactions([("full", "a"), ("full", "b"), ("v", "a")])
    triples = TripleSampler(data, seed=0).sample_many(500)
    assert set(triples[:, 0].tolist()) == {1}


def test_epoch_size():
    data = corpus.build_interactions([(f"u{u}", f"i{u}{k}") for u in range(3) for k in range(2)])
    assert sampler.epoch_size(data) == 6
    blocks = block_corpus(seed=4)
    assert sampler.epoch_size(blocks) == sum(len(blocks.pos(u)) for u in range(blocks.n_users))


def test_epoch_size_empty():
    data = corpus.build_interactions([], ["u"], ["a"])
    with pytest.raises(SamplerError):
        sampler.epoch_size(data)


def test_every_draw_valid_and_stream_reproducible():
    data = block_corpus(seed=1)
    a = TripleSampler(data, seed=5).sample_many(20_000)
    b = TripleSampler(data, seed=5)
    single = np.array([b.sample() for _ in range(300)])
    assert np.array_equal(a[:300], single)
    for u, i, j in a:
        p = data.pos(u)
        assert i in p and j not in p


def test_user_marginal_uniform():
    data = block_corpus(n_users=20, n_items=30, density=0.3, seed=3)
    triples = TripleSampler(data, seed=8).sample_many(40_000)
    counts = np.bincount(triples[:, 0], minlength=data.n_users)
    assert stats.chisquare(counts).pvalue > 0.01


def test_thread_offsets_give_distinct_streams():
    data = block_corpus(seed=1)
    s0 = TripleSampler(data, seed=10, thread_index=0).sample_many(50)
    s1 = TripleSampler(data, seed=10, thread_index=1).sample_many(50)
    s11 = TripleSampler(data, seed=11, thread_index=0).sample_many(50)
    assert not np.array_equal(s0, s1)
    assert np.array_equal(s1, s11)
