import numpy as np
import pytest

from rapidhare import (
    ActivityLabel,
    DataError,
    EmConfig,
    GmmModel,
    fit_activity_models,
    fit_em,
    fit_em_trace,
    kmeans_init,
    load_model_set,
    log_pdf,
    log_pdf_batch,
    save_model_set,
)
from conftest import log_pdf_oracle, random_gmm, random_model_set


def two_blob_data(rng, n_per=500, centers=(-5.0, 5.0), sigma=0.1):
    a = rng.normal(centers[0], sigma, size=(n_per, 1))
    b = rng.normal(centers[1], sigma, size=(n_per, 1))
    return np.vstack([a, b])


def test_log_pdf_standard_normal_at_mode():
    model = GmmModel(np.array([1.0]), np.zeros((1, 1)), np.ones((1, 1)))
    assert log_pdf(model, np.zeros(1)) == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-12)


def test_log_pdf_identical_components_collapse():
    single = GmmModel(np.array([1.0]), np.zeros((1, 2)), np.ones((1, 2)))
    double = GmmModel(
        np.array([0.3, 0.7]), np.zeros((2, 2)), np.ones((2, 2))
    )
    x = np.array([0.4, -1.1])
    assert log_pdf(double, x) == pytest.approx(log_pdf(single, x), rel=1e-14)


def test_log_pdf_matches_extended_precision_oracle(rng):
    for _ in range(200):
        model = random_gmm(rng, dim=5, k=3)
        x = rng.uniform(-2, 2, size=5)
        got = log_pdf(model, x)
        want = log_pdf_oracle(model, x)
        assert got == pytest.approx(want, rel=1e-12)


def test_log_pdf_dimension_mismatch():
    model = GmmModel(np.array([1.0]), np.zeros((1, 3)), np.ones((1, 3)))
    with pytest.raises(DataError, match="length-3"):
        log_pdf(model, np.zeros(4))


def test_log_pdf_finite_at_floor_variance():
    model = GmmModel(np.array([1.0]), np.zeros((1, 4)), np.full((1, 4), 1e-6))
    value = log_pdf(model, np.full(4, 2.0))  # thousands of sigmas out
    assert np.isfinite(value)
    assert value < -1e6


def test_log_pdf_batch_matches_scalar(rng):
    model = random_gmm(rng, dim=4, k=3)
    X = rng.uniform(-2, 2, size=(50, 4))
    batch = log_pdf_batch(model, X)
    scalar = [log_pdf(model, x) for x in X]
    assert np.allclose(batch, scalar, rtol=1e-13, atol=0)


def test_kmeans_single_cluster(rng):
    data = rng.normal(size=(100, 3))
    model = kmeans_init(data, k=1, seed=7)
    assert np.allclose(model.means[0], data.mean(axis=0))
    assert model.weights[0] == 1.0
    assert np.allclose(model.variances[0], np.maximum(data.var(axis=0), 1e-6))


def test_kmeans_two_blobs(rng):
    data = two_blob_data(rng)
    model = kmeans_init(data, k=2, seed=3)
    found = np.sort(model.means[:, 0])
    assert abs(found[0] - -5.0) < 0.05
    assert abs(found[1] - 5.0) < 0.05


def test_kmeans_deterministic(rng):
    data = rng.normal(size=(200, 4))
    a = kmeans_init(data, k=5, seed=11)
    b = kmeans_init(data, k=5, seed=11)
    assert np.array_equal(a.means, b.means)
    assert np.array_equal(a.variances, b.variances)
    assert np.array_equal(a.weights, b.weights)


def test_kmeans_rejects_k_above_rows(rng):
    with pytest.raises(DataError, match="exceeds"):
        kmeans_init(rng.normal(size=(3, 2)), k=4, seed=0)


def test_em_single_gaussian_closed_form(rng):
    data = rng.normal(0.3, 0.8, size=(400, 2))
    model, trace = fit_em_trace(data, k=1, cfg=EmConfig(seed=5))
    assert np.allclose(model.means[0], data.mean(axis=0))
    assert np.allclose(model.variances[0], np.maximum(data.var(axis=0), 1e-6))
    assert len(trace) <= 3  # already at the optimum after initialization


def test_em_two_blob_recovery(rng):
    data = two_blob_data(rng)
    model, final_ll = fit_em(data, k=2, cfg=EmConfig(seed=9))
    order = np.argsort(model.means[:, 0])
    assert abs(model.means[order[0], 0] - -5.0) < 0.1
    assert abs(model.means[order[1], 0] - 5.0) < 0.1
    assert abs(model.weights[0] - 0.5) < 0.05
    assert np.isfinite(final_ll)


def test_em_rejects_insufficient_rows(rng):
    with pytest.raises(DataError, match="exceeds"):
        fit_em(rng.normal(size=(1, 2)), k=2)


def test_em_rejects_non_finite(rng):
    data = rng.normal(size=(10, 2))
    data[3, 1] = np.nan
    with pytest.raises(DataError, match="non-finite"):
        fit_em(data, k=2)


def test_em_monotone_log_likelihood(rng):
    for seed in range(20):
        local = np.random.default_rng(seed)
        data = local.normal(size=(150, 2)) + local.choice([-2.0, 2.0], size=(150, 1))
        _, trace = fit_em_trace(data, k=3, cfg=EmConfig(seed=seed))
        diffs = np.diff(trace)
        assert diffs.min() >= -1e-8


def test_em_deterministic(rng):
    data = rng.normal(size=(300, 3))
    cfg = EmConfig(seed=21)
    a, ll_a = fit_em(data, k=4, cfg=cfg)
    b, ll_b = fit_em(data, k=4, cfg=cfg)
    assert ll_a == ll_b
    assert np.array_equal(a.means, b.means)
    assert np.array_equal(a.variances, b.variances)
    assert np.array_equal(a.weights, b.weights)


def test_em_variances_respect_floor(rng):
    data = np.zeros((50, 2))  # degenerate data forces the floor
    model, _ = fit_em(data, k=1, cfg=EmConfig(seed=1, variance_floor=1e-6))
    assert (model.variances >= 1e-6).all()


def test_em_surplus_components_stay_valid(rng):
    # Two tight far-apart blobs with k=3: the surplus component starves and
    # restarts, and the fitted model must still satisfy every invariant.
    data = np.vstack([np.full((50, 1), -5.0), np.full((50, 1), 5.0)])
    data = data + 0.01 * rng.standard_normal((100, 1))
    model, ll = fit_em(data, k=3, cfg=EmConfig(seed=2))
    assert (model.weights > 0).all()
    assert model.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert (model.variances >= 1e-6).all()
    assert np.isfinite(ll)


def test_em_restarts_keep_best(rng):
    data = two_blob_data(rng, n_per=100)
    _, ll_one = fit_em(data, k=2, cfg=EmConfig(seed=17, n_init_restarts=1))
    _, ll_many = fit_em(data, k=2, cfg=EmConfig(seed=17, n_init_restarts=3))
    assert ll_many >= ll_one - 1e-9


def test_gmm_model_invariants():
    with pytest.raises(DataError, match="sum to 1"):
        GmmModel(np.array([0.5, 0.4]), np.zeros((2, 1)), np.ones((2, 1)))
    with pytest.raises(DataError, match="positive"):
        GmmModel(np.array([1.0]), np.zeros((1, 1)), np.zeros((1, 1)))
    with pytest.raises(DataError, match="finite"):
        GmmModel(np.array([1.0]), np.full((1, 1), np.inf), np.ones((1, 1)))


def test_em_config_validation():
    with pytest.raises(DataError):
        EmConfig(max_iters=0)
    with pytest.raises(DataError):
        EmConfig(tol=0.0)
    with pytest.raises(DataError):
        EmConfig(n_init_restarts=0)


def test_model_set_round_trip(tmp_path, rng):
    model_set = random_model_set(rng, dim=5, k_lo=1, k_hi=4)
    path = tmp_path / "model.txt"
    save_model_set(model_set, path)
    loaded = load_model_set(path)
    for label, model in model_set.models.items():
        other = loaded.models[label]
        assert np.array_equal(model.weights, other.weights)
        assert np.array_equal(model.means, other.means)
        assert np.array_equal(model.variances, other.variances)
    text = path.read_text().splitlines()
    assert text[0] == "RAPIDHARE-MODEL v1"
    assert text[1] == "dim 5"
    assert text[2] == "activities 8"


def test_model_set_load_errors(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("NOT-A-MODEL\n")
    with pytest.raises(DataError, match="format tag"):
        load_model_set(path)
    with pytest.raises(DataError, match="no such model"):
        load_model_set(tmp_path / "absent.txt")


def test_fit_activity_models_insufficient_data(rng):
    frames = {label: rng.normal(size=(40, 3)) for label in ActivityLabel}
    frames[ActivityLabel.WALKING] = rng.normal(size=(5, 3))
    counts = {label: 2 for label in ActivityLabel}
    counts[ActivityLabel.WALKING] = 18
    with pytest.raises(DataError, match="walking: 5 training frames"):
        fit_activity_models(frames, counts, EmConfig(seed=1))


def test_fit_activity_models_defaults(rng):
    frames = {label: rng.normal(size=(60, 2)) for label in ActivityLabel}
    counts = {label: 2 for label in ActivityLabel}
    model_set, final_ll = fit_activity_models(frames, counts, EmConfig(seed=1))
    assert model_set.dim == 2
    assert model_set.n_total_components == 16
    assert set(final_ll) == set(ActivityLabel)
