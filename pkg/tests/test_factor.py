import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csihdfm.factor import (
    SyntheticSpec,
    decompose,
    default_p_max,
    extract_features,
    generate_synthetic,
    pool_factors,
    remove_factors,
    select_factor_count,
)


def _noise(seed, n=100, t=400):
    return np.random.default_rng(seed).standard_normal((n, t))


def test_rank_one_fully_removed():
    rng = np.random.default_rng(1)
    x = np.outer(rng.standard_normal(20), rng.standard_normal(80))
    fit = remove_factors(x, 1)
    np.testing.assert_allclose(fit.residuals, 0, atol=1e-12)


def test_p0_is_sample_covariance():
    x = _noise(2, 30, 90)
    xc = x - x.mean(axis=1, keepdims=True)
    fit = remove_factors(x, 0)
    np.testing.assert_allclose(fit.residuals, xc, atol=1e-12)
    np.testing.assert_allclose(fit.residual_spectrum, np.linalg.eigvalsh(xc @ xc.T / 90), atol=1e-12)
    assert fit.sigma2_hat == pytest.approx(np.trace(xc @ xc.T / 90) / 30)


@pytest.mark.parametrize("p", [0, 1, 5, 20])
def test_truncation_identity(p):
    x = _noise(3, 50, 200)
    xc = x - x.mean(axis=1, keepdims=True)
    full = np.sort(np.linalg.eigvalsh(xc @ xc.T / 200))[::-1]
    expect = np.sort(np.r_[full[p:], np.zeros(p)])
    got = np.sort(remove_factors(x, p).residual_spectrum)
    np.testing.assert_allclose(got, expect, rtol=1e-8, atol=1e-12)


def test_reconstruction_and_orthogonality():
    x = _noise(4, 40, 120)
    fit = remove_factors(x, 6)
    xc = x - x.mean(axis=1, keepdims=True)
    np.testing.assert_allclose(fit.loadings @ fit.factors + fit.residuals, xc, atol=1e-10)
    np.testing.assert_allclose(fit.factors @ fit.factors.T, np.eye(6), atol=1e-10)
    np.testing.assert_allclose(fit.residuals @ fit.factors.T, 0, atol=1e-10)
    s = np.linalg.svd(xc, compute_uv=False)
    np.testing.assert_allclose(np.linalg.norm(fit.loadings, axis=0), s[:6], rtol=1e-10)


def test_trace_and_spikes_decrease_with_p():
    data, _ = generate_synthetic(SyntheticSpec(n=100, t=400, seed=5))
    fits = [remove_factors(data, p) for p in range(6)]
    traces = [f.sigma2_hat for f in fits]
    assert all(a >= b for a, b in zip(traces, traces[1:]))
    spikes = [f.n_spikes for f in fits]
    assert all(a >= b for a, b in zip(spikes, spikes[1:]))


def test_fit_validation():
    x = _noise(6, 10, 20)
    with pytest.raises(ValueError):
        remove_factors(x, 11)
    with pytest.raises(ValueError):
        remove_factors(x, -1)
    with pytest.raises(ValueError):
        remove_factors(x.T, 1)
    with pytest.raises(ValueError):
        select_factor_count(x, p_max=50)


def test_zero_variance_rows_dropped():
    x = _noise(7, 20, 60)
    x[3] = 4.2
    dec = decompose(x)
    assert dec.shape == (19, 60)
    assert 3 not in dec.kept_rows
    with pytest.raises(ValueError):
        decompose(np.ones((3, 10)))


def test_pure_noise_selects_zero():
    hits = 0
    for seed in range(20):
        sel = select_factor_count(_noise(seed))
        hits += sel.p_star == 0 and sel.fits[0].n_spikes == 0
    assert hits >= 19


def test_pure_noise_ks_small():
    fit = remove_factors(_noise(0, 400, 1000), 0)
    assert fit.ks_distance < 0.03


def test_rank_one_signal_selected():
    rng = np.random.default_rng(8)
    x = 3.0 * np.outer(rng.standard_normal(100), np.sin(np.arange(400) * 0.1)) + rng.standard_normal((100, 400))
    sel = select_factor_count(x)
    assert sel.p_star == 1 and sel.converged
    assert sel.spike_counts == [1, 0]


def test_selection_not_converged():
    rng = np.random.default_rng(9)
    x = 5 * rng.standard_normal((40, 3)) @ rng.standard_normal((3, 200)) + rng.standard_normal((40, 200))
    sel = select_factor_count(x, p_max=1)
    assert sel.p_star == 1 and not sel.converged
    assert len(sel.fits) == 2


def test_default_p_max():
    assert default_p_max(400, 1000) == 50
    assert default_p_max(90, 500) == 22
    assert default_p_max(3, 100) == 0


def test_generate_synthetic_deterministic():
    spec = SyntheticSpec(n=50, t=200, seed=11)
    a, fa = generate_synthetic(spec)
    b, fb = generate_synthetic(spec)
    assert a.values.tobytes() == b.values.tobytes()
    assert fa.tobytes() == fb.tobytes()
    c, _ = generate_synthetic(SyntheticSpec(n=50, t=200, seed=12))
    assert not np.array_equal(a.values, c.values)


def test_generate_synthetic_factors():
    data, f = generate_synthetic(SyntheticSpec(n=80, t=300))
    assert data.values.shape == (80, 300)
    np.testing.assert_allclose(f[0], np.sin(2 * np.pi * 0.02 * np.arange(1, 301)))
    np.testing.assert_allclose(f[2], np.sin(2 * np.pi * 0.005 * np.arange(1, 301)))


def test_generate_synthetic_noise_only():
    data, f = generate_synthetic(SyntheticSpec(n=100, t=400, p_true=0, seed=3))
    assert f.shape == (0, 400)
    assert select_factor_count(data).p_star == 0


def test_synthetic_leading_spikes():
    data, _ = generate_synthetic(SyntheticSpec(seed=0))
    fit = remove_factors(data, 0)
    top = np.sort(fit.residual_spectrum)[::-1]
    assert np.all(top[:3] > fit.fit.spike_threshold)
    assert fit.n_spikes == 3


@pytest.mark.parametrize(
    "kw",
    [dict(p_true=2, frequencies=(0.1,)), dict(frequencies=(0.1, 0.1, 0.2)), dict(frequencies=(0.6, 0.1, 0.2)), dict(n=1)],
)
def test_synthetic_spec_validation(kw):
    with pytest.raises(ValueError):
        generate_synthetic(SyntheticSpec(**kw))


def test_synthetic_extra_frequencies_halve():
    assert SyntheticSpec(p_true=5).freqs() == (0.02, 0.01, 0.005, 0.0025, 0.00125)


def test_pool_constant_row():
    v = -np.ones((1, 100)) / 10
    np.testing.assert_allclose(pool_factors(v, 10), np.full(10, 0.1))


def test_pool_identity_at_full_length():
    rng = np.random.default_rng(10)
    f = rng.standard_normal((2, 30))
    out = pool_factors(f, 30).reshape(2, 30)
    for row, src in zip(out, f):
        sign = np.sign(src[np.argmax(np.abs(src))])
        np.testing.assert_array_equal(row, sign * src)


def _pool_oracle(row, length):
    t = len(row)
    out = []
    for j in range(length):
        lo, hi = (2 * j * t + length) // (2 * length), (2 * (j + 1) * t + length) // (2 * length)
        out.append(sum(row[lo:hi]) / (hi - lo))
    out = np.array(out)
    return out if out[np.argmax(np.abs(out))] >= 0 else -out


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.integers(0, 60), st.integers(0, 2**32 - 1))
def test_pool_matches_oracle(length, extra, seed):
    row = np.random.default_rng(seed).standard_normal(length + extra)
    np.testing.assert_allclose(pool_factors(row[None], length), _pool_oracle(row, length), atol=1e-12)


def test_pool_too_short():
    with pytest.raises(ValueError):
        pool_factors(np.zeros((1, 10)), 20)
    with pytest.raises(ValueError):
        pool_factors(np.zeros((1, 10)), 0)


def test_extract_features_shape_and_sign_invariance():
    data, _ = generate_synthetic(SyntheticSpec(n=60, t=300, seed=1))
    v = extract_features(data, 3, 50)
    assert v.shape == (150,)
    w = extract_features(-data.values, 3, 50)
    np.testing.assert_allclose(v, w, atol=1e-10)
    fit = remove_factors(data, 3)
    np.testing.assert_allclose(extract_features(fit, 2, 50), v[:100], atol=1e-12)
    with pytest.raises(ValueError):
        extract_features(fit, 4)
    with pytest.raises(ValueError):
        extract_features(data, 0)
    with pytest.raises(ValueError):
        extract_features(data.values[:, :20], 1, 50)
