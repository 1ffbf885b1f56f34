import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewrec import corpus
from skewrec.corpus import CorpusError, RawInteraction


def write(tmp_path, text, name="data.tsv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadTsv:
    def test_basic_rows(self, tmp_path):
        rows = corpus.load_tsv(write(tmp_path, "u1\ti1\t4.0\nu1\ti2\t2.0\n"))
        assert rows == [RawInteraction("u1", "i1", 4.0), RawInteraction("u1", "i2", 2.0)]

    def test_header_skipped(self, tmp_path):
        rows = corpus.load_tsv(write(tmp_path, "user\titem\trating\nu1\ti1\t4\n"), has_header=True)
        assert rows == [RawInteraction("u1", "i1", 4.0)]

    def test_extra_fields_and_custom_delimiter(self, tmp_path):
        rows = corpus.load_tsv(write(tmp_path, "a,b,1,99\n"), delimiter=",")
        assert rows == [RawInteraction("a", "b", 1.0)]

    def test_whitespace_delimiter(self, tmp_path):
        rows = corpus.load_tsv(write(tmp_path, "u1 i1   4.0\n"), delimiter=None)
        assert rows[0].value == 4.0

    def test_bad_value_names_line(self, tmp_path):
        with pytest.raises(CorpusError, match=":2:"):
            corpus.load_tsv(write(tmp_path, "u1\ti1\t4\nu1\ti1\tabc\n"))

    def test_too_few_fields(self, tmp_path):
        with pytest.raises(CorpusError, match=":1:"):
            corpus.load_tsv(write(tmp_path, "u1\ti1\n"))

    def test_non_finite_value(self, tmp_path):
        with pytest.raises(CorpusError, match=":1:"):
            corpus.load_tsv(write(tmp_path, "u1\ti1\tnan\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(CorpusError, match="no interactions"):
            corpus.load_tsv(write(tmp_path, ""))


def raw(values):
    return [RawInteraction("u", f"i{k}", v) for k, v in enumerate(values)]


class TestBinarize:
    def test_rating_threshold_inclusive(self):
        kept = corpus.binarize(raw([3.4, 3.5, 5.0]), "rating", 3.5)
        assert kept == [("u", "i1"), ("u", "i2")]

    def test_rating_default_threshold(self):
        assert corpus.binarize(raw([3.4, 3.5]), "rating") == [("u", "i1")]

    def test_count_threshold_strict(self):
        assert corpus.binarize(raw([3, 4]), "count", 3) == [("u", "i1")]
        assert corpus.binarize(raw([3, 4]), "count") == [("u", "i1")]

    def test_binary_keeps_all(self):
        assert len(corpus.binarize(raw([0, -1, 7]), "binary")) == 3

    def test_unknown_mode(self):
        with pytest.raises(CorpusError):
            corpus.binarize(raw([1]), "stars")

    def test_non_finite_threshold(self):
        with pytest.raises(CorpusError):
            corpus.binarize(raw([1]), "rating", float("inf"))


class TestBuildInteractions:
    def test_dedup(self):
        data = corpus.build_interactions([("a", "x"), ("a", "x"), ("b", "y")])
        assert (data.n_users, data.n_items) == (2, 2)
        assert len(data.pos(0)) == 1

    def test_single_pair(self):
        data = corpus.build_interactions([("a", "x")])
        assert (data.n_users, data.n_items, data.nnz) == (1, 1, 1)

    def test_full_cross(self):
        data = corpus.build_interactions([(f"u{u}", f"i{i}") for u in range(5) for i in range(3)])
        assert all(len(data.pos(u)) == 3 for u in range(5))

    def test_first_appearance_ids_and_sorted_lists(self):
        data = corpus.build_interactions([("b", "z"), ("a", "y"), ("b", "x"), ("b", "y")])
        assert data.user_keys == ("b", "a")
        assert data.item_keys == ("z", "y", "x")
        assert data.pos(0).tolist() == [0, 1, 2]

    def test_empty(self):
        with pytest.raises(CorpusError):
            corpus.build_interactions([])

    def test_fixed_maps_reject_unknown_key(self):
        with pytest.raises(CorpusError, match="missing"):
            corpus.build_interactions([("a", "q")], ["a"], ["x"])


def big_corpus(n_users=500, per_user=20, n_items=300, seed=1):
    rng = np.random.default_rng(seed)
    pairs = [
        (f"u{u}", f"i{i}")
        for u in range(n_users)
        for i in rng.choice(n_items, size=per_user, replace=False)
    ]
    return corpus.build_interactions(pairs)


class TestSplit:
    def test_fraction_within_binomial_bound(self):
        data = big_corpus()
        assert data.nnz == 10_000
        sp = corpus.split(data, 0.2, seed=7)
        # Binomial(10000, 0.2): sd 40, so [1800, 2200] is a 5-sigma band
        assert 1800 <= sp.test.nnz <= 2200
        again = corpus.split(data, 0.2, seed=7)
        assert sp.test.nnz == again.test.nnz

    def test_deterministic(self):
        data = big_corpus()
        a, b = corpus.split(data, 0.2, 3), corpus.split(data, 0.2, 3)
        assert a.train.same_as(b.train) and a.test.same_as(b.test)
        c = corpus.split(data, 0.2, 4)
        assert not c.test.same_as(a.test)

    def test_singleton_user_stays_in_train(self):
        pairs = [("solo", "x")] + [(f"u{k}", f"i{j}") for k in range(20) for j in range(5)]
        data = corpus.build_interactions(pairs)
        for seed in range(30):
            sp = corpus.split(data, 0.9, seed)
            assert sp.train.pos(0).tolist() == [0]
            assert len(sp.test.pos(0)) == 0

    def test_no_user_loses_all_training_items(self):
        data = big_corpus(per_user=3)
        sp = corpus.split(data, 0.7, 0)
        assert (sp.train.counts() > 0).all()

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 1.5])
    def test_degenerate_fraction(self, frac):
        with pytest.raises(CorpusError):
            corpus.split(big_corpus(n_users=5), frac, 0)

    def test_invariants(self):
        data = big_corpus()
        sp = corpus.split(data, 0.2, 11)
        assert sp.train.user_keys == sp.test.user_keys == data.user_keys
        assert sp.train.item_keys == sp.test.item_keys == data.item_keys
        for u in range(data.n_users):
            tr, te = set(sp.train.pos(u).tolist()), set(sp.test.pos(u).tolist())
            assert not tr & te
            assert tr | te == set(data.pos(u).tolist())
        assert sp.train.nnz + sp.test.nnz == data.nnz


keys = st.sampled_from([f"k{n}" for n in range(8)])


@settings(max_examples=60, deadline=None)
@given(
    rows=st.lists(st.tuples(keys, keys, st.floats(0, 6, allow_nan=False)), min_size=1, max_size=60),
    perm_seed=st.integers(0, 2**16),
    mode=st.sampled_from(["rating", "count", "binary"]),
)
def test_binarization_and_mapping_properties(rows, perm_seed, mode):
    raws = [RawInteraction("u" + a, "i" + b, v) for a, b, v in rows]
    kept = corpus.binarize(raws, mode)
    perm = np.random.default_rng(perm_seed).permutation(len(raws))
    kept_perm = corpus.binarize([raws[k] for k in perm], mode)
    # permuting rows leaves the kept key-pair set unchanged
    assert set(kept) == set(kept_perm)
    if not kept:
        return
    data = corpus.build_interactions(kept)
    # round trip: every stored pair maps back to a kept input pair, and nothing is lost
    assert set(data.key_pairs()) == set(kept)
    for u in range(data.n_users):
        p = data.pos(u)
        assert len(p) >= 1 and np.all(np.diff(p) > 0)
    sp = corpus.split(data, 0.3, perm_seed)
    assert set(sp.train.key_pairs()) | set(sp.test.key_pairs()) == set(kept)
    assert sp.train.nnz + sp.test.nnz == len(set(kept))


def test_split_persistence_round_trip(tmp_path):
    data = big_corpus(n_users=30, per_user=5, n_items=40)
    sp = corpus.split(data, 0.2, 2)
    corpus.save_split(sp, tmp_path)
    lines = (tmp_path / "train.tsv").read_text().splitlines()
    assert all(line.endswith("\t1") for line in lines)
    back = corpus.load_split(tmp_path)
    assert back.train.same_as(sp.train) and back.test.same_as(sp.test)
