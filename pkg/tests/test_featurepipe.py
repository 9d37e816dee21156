import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from respdistress import acoustic, prosody
from respdistress.featurepipe import (
    FeatureError, FeatureMatrix, apply_normalizer, fit_normalizer, fuse, rank_llds,
    read_feature_csv, relevance_scores, select_correlation, write_rank_csv,
)

import oracles


def matrix(values, labels, names=None, groups=None):
    values = np.asarray(values, dtype=float)
    if names is None:
        names = [f"f{i}" for i in range(values.shape[1])]
    if groups is None:
        groups = [f"s{i}" for i in range(values.shape[0])]
    return FeatureMatrix(values, names, labels, groups)


def random_pair(n=12, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    groups = [f"s{i // 2}" for i in range(n)]
    ids = tuple(f"seg{i}" for i in range(n))
    ac = FeatureMatrix(rng.normal(size=(n, acoustic.N_FEATURES)), acoustic.FEATURE_NAMES,
                       labels, groups, ids)
    pr = FeatureMatrix(rng.normal(size=(n, prosody.N_FEATURES)), prosody.FEATURE_NAMES,
                       labels, groups, ids)
    return ac, pr


# -- normalisation -----------------------------------------------------------


def test_normalizer_examples():
    m = matrix([[1.0, 5.0], [3.0, 5.0]], [0, 1])
    norm = fit_normalizer(m)
    assert norm.mean[0] == 2.0 and norm.std[0] == 1.0
    z = apply_normalizer(norm, m).values
    assert_allclose(z[:, 0], [-1, 1])
    assert not z[:, 1].any()  # constant column
    t = apply_normalizer(norm, matrix([[2.0, 5.0], [3.0, 5.0]], [0, 1])).values
    assert t[0, 0] == 0.0 and t[1, 0] == 1.0


@settings(max_examples=30)
@given(st.integers(2, 30), st.integers(1, 6), st.integers(0, 2**31))
def test_z_score_identity(n, d, seed):
    x = np.random.default_rng(seed).normal(loc=3.0, scale=2.0, size=(n, d))
    z = apply_normalizer(fit_normalizer(matrix(x, np.arange(n) % 2)), matrix(x, np.arange(n) % 2))
    assert_allclose(z.values.mean(axis=0), 0.0, atol=1e-9)
    assert_allclose(z.values.std(axis=0), 1.0, atol=1e-9)


def test_normalizer_guards():
    with pytest.raises(FeatureError):
        fit_normalizer(matrix([[1.0]], [0]))
    norm = fit_normalizer(matrix([[1.0], [2.0]], [0, 1]))
    with pytest.raises(FeatureError):
        apply_normalizer(norm, matrix([[1.0], [2.0]], [0, 1], names=["other"]))


# -- fusion ------------------------------------------------------------------


def test_fuse_dimensions():
    ac, pr = random_pair()
    fused = fuse(ac, pr)
    assert fused.shape == (12, 1666)
    assert fused.feature_sets.count("prosodic") == 84


def test_fuse_empty_prosodic():
    ac, _ = random_pair()
    empty = FeatureMatrix(np.zeros((12, 0)), (), ac.labels, ac.groups, ac.row_ids)
    assert fuse(ac, empty) is ac


def test_fuse_rejects_permuted_rows():
    ac, pr = random_pair()
    with pytest.raises(FeatureError):
        fuse(ac, pr.rows(np.roll(np.arange(12), 1)))


def test_csv_round_trip(tmp_path):
    ac, pr = random_pair(n=4)
    fused = fuse(ac, pr)
    fused.write_csv(tmp_path / "f.csv")
    ids, names, values = read_feature_csv(tmp_path / "f.csv")
    assert ids == fused.row_ids and names == fused.names
    np.testing.assert_array_equal(values, fused.values)


# -- selection ---------------------------------------------------------------


def test_relevance_matches_pearson():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(20, 10))
    y = rng.integers(0, 2, 20)
    y[:2] = [0, 1]
    rel = relevance_scores(x, y)
    for j in range(10):
        assert rel[j] == pytest.approx(abs(oracles.pearson(x[:, j], y)), abs=1e-9)


def test_label_copy_first_and_duplicate_filtered():
    rng = np.random.default_rng(2)
    y = np.array([0, 1] * 10)
    x = rng.normal(size=(20, 6))
    x[:, 3] = y
    x[:, 5] = y  # exact duplicate of the top feature
    sel = select_correlation(matrix(x, y), 3)
    assert sel.kept[0] == "f3"
    assert sel.relevance["f3"] == pytest.approx(1.0)
    assert "f5" not in sel.kept


def test_cap_one_is_pure_top_k():
    rng = np.random.default_rng(3)
    y = np.array([0, 1] * 15)
    x = rng.normal(size=(30, 12)) + 0.3 * y[:, None] * np.arange(12)
    sel = select_correlation(matrix(x, y), 5, redundancy_cap=1.0)
    rel = relevance_scores(x, y)
    assert list(sel.kept) == [f"f{j}" for j in np.argsort(-rel, kind="stable")[:5]]


def test_fill_when_filter_exhausts():
    y = np.array([0, 1] * 6)
    base = y + 0.1 * np.random.default_rng(0).normal(size=12)
    x = np.stack([base, 2 * base, base + 1, -base], axis=1)
    sel = select_correlation(matrix(x, y), 3)
    assert len(sel.kept) == 3
    assert sel.filled_by_relevance == 2


def test_default_k_on_fused():
    ac, pr = random_pair(n=30, seed=4)
    sel = select_correlation(fuse(ac, pr), 251)
    assert len(sel.kept) == len(set(sel.kept)) == 251


def test_selection_guards():
    m = matrix(np.random.default_rng(0).normal(size=(6, 3)), [0, 1] * 3)
    with pytest.raises(FeatureError):
        select_correlation(m, 4)
    with pytest.raises(FeatureError):
        select_correlation(matrix(m.values, [1] * 6), 2)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8))
def test_selection_properties(seed, k):
    rng = np.random.default_rng(seed)
    y = np.array([0, 1] * 8)
    x = rng.normal(size=(16, 8)) + rng.normal(size=8) * y[:, None]
    sel = select_correlation(matrix(x, y), k)
    assert len(sel.kept) == k
    rel = [sel.relevance[n] for n in sel.kept[: k - sel.filled_by_relevance]]
    assert rel == sorted(rel, reverse=True)


# -- ranking -----------------------------------------------------------------


def test_rank_loudness_first(tmp_path):
    names = ["loudness_amean", "mfcc3_stddev", "mfcc3_de_amean", "voice_rate_amean"]
    y = np.array([0, 1] * 10)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(20, 4))
    x[:, 0] += 3 * y
    x[:, 1] += 1 * y
    sel = select_correlation(matrix(x, y, names), 4, redundancy_cap=1.0)
    table = rank_llds(sel)
    assert table[0].lld == "loudness"
    assert {r.lld for r in table} == {"loudness", "mfcc3", "voice_rate"}
    assert next(r for r in table if r.lld == "mfcc3").kept_count == 2
    write_rank_csv(table, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "rank,lld,kept_count,best_relevance"
    sel.write_csv(tmp_path / "s.csv")
    head = (tmp_path / "s.csv").read_text().splitlines()
    assert head[0] == "rank,feature_name,relevance,source_lld,set"
    assert head[1].startswith("1,loudness_amean,") and head[1].endswith(",loudness,acoustic")


def test_rank_single_lld():
    names = ["mfcc2_amean", "mfcc2_stddev", "mfcc2_de_kurtosis"]
    y = np.array([0, 1] * 5)
    x = np.random.default_rng(6).normal(size=(10, 3))
    table = rank_llds(select_correlation(matrix(x, y, names), 3, redundancy_cap=1.0))
    assert len(table) == 1 and table[0].kept_count == 3


def test_rank_family_level():
    names = ["mfcc2_amean", "mfcc7_stddev", "lspFreq0_amean"]
    y = np.array([0, 1] * 5)
    x = np.random.default_rng(6).normal(size=(10, 3))
    sel = select_correlation(matrix(x, y, names), 3, redundancy_cap=1.0)
    fam = rank_llds(sel, level="family")
    assert sorted(r.lld for r in fam) == ["lspFreq", "mfcc"]
