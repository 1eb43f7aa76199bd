import numpy as np
import pandas as pd
import pytest
from calprop.data import make_rng
from calprop.exceptions import ConfigError, ParameterError
from calprop.gwas_bench import (GwasMethod, marginal_effect_table, marginal_effects, pca_adjusted_effects,
                                principal_components, run_gwas_benchmark)
from calprop.simulators import GwasDataset, SpatialGwasConfig, simulate_spatial_gwas


def _known_world(n=20_000, seed=0):
    rng = make_rng(seed)
    genotypes = rng.binomial(1, 0.5, (n, 2))
    phenotypes = 1.5 * genotypes[:, 1] + rng.standard_normal(n)
    return GwasDataset(genotypes, phenotypes, [0.0, 1.5], np.zeros((n, 2)), np.full((n, 2), 0.5),
                       SpatialGwasConfig(n, 2))


@pytest.fixture(scope="module")
def small_gwas():
    return simulate_spatial_gwas(SpatialGwasConfig(n=500, m=10, alpha=0.1, causal_fraction=0.2, seed=4))


@pytest.mark.parametrize("text,expected", [
    ("naive", GwasMethod("naive")),
    ("pca", GwasMethod("pca")),
    ("iptw-calib", GwasMethod("iptw", "calib", "logistic")),
    ("aipw-plain:nb", GwasMethod("aipw", "plain", "nb")),
    ("iptw-oracle", GwasMethod("iptw", "oracle")),
])
def test_method_parsing(text, expected):
    assert GwasMethod.parse(text) == expected
    assert GwasMethod.parse(expected.name) == expected


@pytest.mark.parametrize("text", ["ols", "iptw", "iptw-best", "naive:nb", "iptw-oracle:nb", "iptw-calib:forest"])
def test_method_parsing_errors(text):
    with pytest.raises(ParameterError):
        GwasMethod.parse(text)


def test_method_names():
    assert GwasMethod.parse("iptw-calib:logistic").name == "iptw-calib"
    assert GwasMethod.parse("iptw-calib:mlp").name == "iptw-calib:mlp"
    assert GwasMethod("iptw", "calib", "nb").fitted
    assert not GwasMethod("iptw", "oracle").fitted


def test_known_effects_are_recovered():
    gwas = _known_world()
    for method in ("naive", "iptw-oracle", "iptw-calib"):
        effects = marginal_effects(gwas, method, seed=1, fold_count=3)
        assert effects[0] == pytest.approx(0.0, abs=0.1)
        assert effects[1] == pytest.approx(1.5, abs=0.1)


def test_monomorphic_snp_is_skipped():
    rng = make_rng(2)
    genotypes = np.column_stack((rng.binomial(1, 0.5, 200), np.ones(200, dtype=int), rng.binomial(1, 0.5, 200)))
    gwas = GwasDataset(genotypes, rng.standard_normal(200), np.zeros(3), np.zeros((200, 2)), np.full((200, 3), 0.5),
                       SpatialGwasConfig(200, 3))
    tables = marginal_effect_table(gwas, [GwasMethod.parse("naive"), GwasMethod.parse("iptw-calib")], fold_count=3)
    for table in tables:
        assert table.skipped == [1]
        assert table.effects[1] == 0.0
        assert np.all(np.isfinite(table.effects))
    assert np.isnan(tables[0].ece_plain).all()
    assert np.isfinite(tables[1].ece_plain[[0, 2]]).all()


@pytest.mark.parametrize("method", ["naive", "iptw-oracle", "aipw-oracle", "iptw-plain", "iptw-calib", "aipw-plain",
                                    "aipw-calib", "iptw-calib:nb"])
def test_per_snp_methods_follow_permutations(small_gwas, method):
    order = make_rng(3).permutation(small_gwas.m)
    effects = marginal_effects(small_gwas, method, seed=7, fold_count=3)
    permuted = marginal_effects(small_gwas.permuted(order), method, seed=7, fold_count=3)
    assert np.allclose(permuted, effects[order], rtol=0, atol=1e-9)


def test_pca_follows_permutations(small_gwas):
    order = make_rng(4).permutation(small_gwas.m)
    effects = pca_adjusted_effects(small_gwas)
    permuted = pca_adjusted_effects(small_gwas.permuted(order))
    assert np.allclose(permuted, effects[order], rtol=0, atol=1e-6)


def test_principal_component_of_planted_structure():
    rng = make_rng(5)
    direction = rng.standard_normal(200)
    matrix = np.outer(direction, rng.standard_normal(30)) + 0.01 * rng.standard_normal((200, 30))
    matrix -= matrix.mean(axis=0)
    scores = principal_components(matrix, 1)[:, 0]
    centered = direction - direction.mean()
    assert abs(scores @ centered) / (np.linalg.norm(scores) * np.linalg.norm(centered)) > 0.99


def test_no_components_gives_simple_slopes(small_gwas):
    effects = pca_adjusted_effects(small_gwas, n_components=0)
    for snp in range(small_gwas.m):
        slope = np.polyfit(small_gwas.genotypes[:, snp].astype(float), small_gwas.phenotypes, 1)[0]
        assert effects[snp] == pytest.approx(slope, abs=1e-8)


@pytest.mark.parametrize("count", [-1, 10])
def test_component_count_bounds(small_gwas, count):
    with pytest.raises(ParameterError):
        pca_adjusted_effects(small_gwas, n_components=count)


def test_benchmark_needs_two_seeds():
    with pytest.raises(ConfigError):
        run_gwas_benchmark([SpatialGwasConfig(n=100, m=5)], ["naive"], seeds=[0])
    with pytest.raises(ConfigError):
        run_gwas_benchmark([SpatialGwasConfig(n=100, m=5)], [], seeds=[0, 1])


def test_small_benchmark_is_reproducible():
    configs = [SpatialGwasConfig(n=300, m=6, alpha=0.1, causal_fraction=0.2)]
    methods = ["naive", "pca", "iptw-plain", "iptw-calib"]
    first = run_gwas_benchmark(configs, methods, seeds=[0, 1], fold_count=3)
    second = run_gwas_benchmark(configs, methods, seeds=[0, 1], fold_count=3, threads=2)
    frame = first.to_frame()
    assert list(frame["method"]) == methods
    assert {"seed_0", "seed_1", "eps_ate_mean", "eps_ate_stderr", "delta_ece"} <= set(frame.columns)
    assert (frame["eps_ate_mean"] >= 0).all()
    assert np.isfinite(first.row("iptw-calib").delta_ece)
    assert np.isnan(first.row("naive").delta_ece)
    pd.testing.assert_frame_equal(frame, second.to_frame())
    assert list(first.timing_frame().columns) == ["setting", "method", "snps_per_sec"]


@pytest.mark.slow
def test_recalibrated_propensities_beat_naive_under_structure():
    configs = [SpatialGwasConfig(n=4000, m=100, alpha=0.1, causal_fraction=0.01)]
    result = run_gwas_benchmark(configs, ["naive", "iptw-plain", "iptw-calib"], seeds=range(5))
    assert result.row("iptw-calib").mean < result.row("naive").mean
    assert result.row("iptw-calib").delta_ece > 0
