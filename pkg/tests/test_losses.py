from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import numeric_grad, rel_error
from widepose.losses import (
    PITCH_BINS,
    YAW_BINS,
    BinConfig,
    LossWeights,
    angle_to_bin,
    classification_loss_grad,
    combined_loss,
    decode_expectation,
    decode_logits,
    decode_with_grad,
    loss_curve,
    mse_loss,
    regression_loss_grad,
    softmax,
    wrapped_loss,
)

pairs = st.lists(st.tuples(st.floats(-720, 720), st.floats(-720, 720)), min_size=1, max_size=20)


def test_presets():
    assert (YAW_BINS.count, YAW_BINS.width, YAW_BINS.lower_edge, YAW_BINS.upper_edge) == (120, 3, -180, 180)
    assert (PITCH_BINS.count, PITCH_BINS.lower_edge, PITCH_BINS.upper_edge) == (66, -99, 99)
    assert YAW_BINS.wraps and not PITCH_BINS.wraps


@pytest.mark.parametrize("theta, expected", [(-179.9, 1), (0, 60), (180, 120), (-180, 120), (0.1, 61), (-177, 1)])
def test_angle_to_bin_yaw(theta, expected):
    assert angle_to_bin(theta, YAW_BINS) == expected


def test_angle_to_bin_pitch_range():
    assert angle_to_bin(99, PITCH_BINS) == 66
    assert angle_to_bin(-98.9, PITCH_BINS) == 1
    with pytest.raises(ValueError):
        angle_to_bin(-99, PITCH_BINS)
    with pytest.raises(ValueError):
        angle_to_bin(120, PITCH_BINS)


@pytest.mark.parametrize("cfg", [YAW_BINS, PITCH_BINS])
def test_bin_of_center_is_identity(cfg):
    assert np.array_equal(angle_to_bin(cfg.centers, cfg), np.arange(1, cfg.count + 1))


def test_decode_examples():
    assert decode_expectation(np.full(120, 1 / 120), YAW_BINS) == pytest.approx(0.0, abs=1e-12)
    assert decode_expectation(np.eye(120)[119], YAW_BINS) == 178.5
    assert decode_expectation(np.eye(66)[0], PITCH_BINS) == -97.5


def test_decode_validates():
    with pytest.raises(ValueError):
        decode_expectation(np.full(120, 0.5), YAW_BINS)
    with pytest.raises(ValueError):
        decode_expectation(np.full(66, 1 / 66), YAW_BINS)


@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_decode_linear(seed, lam):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(66)), rng.dirichlet(np.ones(66))
    mix = decode_expectation(lam * p + (1 - lam) * q, PITCH_BINS)
    parts = lam * decode_expectation(p, PITCH_BINS) + (1 - lam) * decode_expectation(q, PITCH_BINS)
    assert mix == pytest.approx(parts, abs=1e-10)


def test_softmax_examples():
    assert np.allclose(softmax(np.full(120, 3.0)), 1 / 120, atol=1e-15)
    z = np.random.default_rng(2).normal(size=66)
    assert np.max(np.abs(softmax(z + 100) - softmax(z))) < 1e-12
    naive = np.exp(z) / np.exp(z).sum()
    assert np.max(np.abs(softmax(z) - naive)) < 1e-12


def test_wrapped_loss_examples():
    assert wrapped_loss([150], [150]) == 0
    assert wrapped_loss([-179], [179]) == pytest.approx(4, abs=1e-9)
    assert wrapped_loss([-30], [150]) == 32400


@given(pairs)
def test_wrapped_le_mse(ps):
    p, t = np.array(ps).T
    w, m = wrapped_loss(p, t), mse_loss(p, t)
    assert w <= m
    if np.all(np.abs(p - t) <= 180):
        assert w == m
    else:
        assert w < m


@given(pairs)
def test_wrapped_period(ps):
    p, t = np.array(ps).T
    assert wrapped_loss(p + 360, t) == pytest.approx(wrapped_loss(p, t), rel=1e-9, abs=1e-6)


def test_loss_curve_matches_losses():
    preds = np.linspace(-180, 180, 37)
    w, m = loss_curve(170.0, preds)
    for i, p in enumerate(preds):
        assert w[i] == pytest.approx(wrapped_loss([p], [170.0]))
        assert m[i] == mse_loss([p], [170.0])


def test_regression_zero_at_onehot():
    z = np.zeros(120)
    z[60] = 1000.0  # bin 61, center 1.5
    for kind in ("wrapped", "mse"):
        loss, g = regression_loss_grad(z, 1.5, YAW_BINS, kind)
        assert loss == 0.0
        assert np.all(g == 0.0)


def test_regression_wrapped_vs_mse_at_minus_179():
    # 2-degree bins starting at -180 put bin 1's center exactly at -179
    cfg = BinConfig(180, 2.0, -180.0)
    z = np.full(180, -1000.0)
    z[0] = 0.0
    assert decode_logits(z, cfg) == -179.0
    assert regression_loss_grad(z, 179.0, cfg, "wrapped")[0] == pytest.approx(4.0, abs=1e-9)
    assert regression_loss_grad(z, 179.0, cfg, "mse")[0] == 128164.0


@pytest.mark.parametrize("kind", ["wrapped", "mse"])
def test_regression_grad_fd(kind):
    rng = np.random.default_rng(3)
    for _ in range(20):
        z = rng.normal(0, 2, 120)
        _, g = regression_loss_grad(z, 179.0, YAW_BINS, kind)
        n = numeric_grad(lambda x: regression_loss_grad(x, 179.0, YAW_BINS, kind)[0], z)
        assert rel_error(g, n) < 1e-4


def test_regression_batch_is_mean():
    rng = np.random.default_rng(4)
    z = rng.normal(size=(5, 120))
    t = rng.uniform(-180, 180, 5)
    loss, g = regression_loss_grad(z, t, YAW_BINS, "wrapped")
    singles = [regression_loss_grad(z[i], t[i], YAW_BINS, "wrapped") for i in range(5)]
    assert loss == pytest.approx(np.mean([s[0] for s in singles]), rel=1e-12)
    assert np.allclose(g, np.stack([s[1] for s in singles]) / 5, rtol=1e-12, atol=0)


def test_decode_grad_fd():
    z = np.random.default_rng(5).normal(size=66)
    _, jac = decode_with_grad(z, PITCH_BINS)
    n = numeric_grad(lambda x: decode_logits(x, PITCH_BINS), z)
    assert rel_error(jac, n) < 1e-6


def test_classification_examples():
    assert classification_loss_grad(np.zeros(120), 7, "ce_softmax")[0] == pytest.approx(math.log(120), abs=1e-12)
    assert classification_loss_grad(np.zeros(66), 3, "bce_sigmoid")[0] == pytest.approx(math.log(2), abs=1e-12)


def test_classification_rejects_bad_target():
    with pytest.raises(ValueError):
        classification_loss_grad(np.zeros(66), 0)
    with pytest.raises(ValueError):
        classification_loss_grad(np.zeros(66), 67)
    with pytest.raises(ValueError):
        classification_loss_grad(np.zeros(66), 1, "hinge")


def test_bce_matches_naive():
    rng = np.random.default_rng(6)
    z = rng.normal(0, 3, 66)
    s = 1 / (1 + np.exp(-z))
    y = np.eye(66)[9]
    naive = -np.mean(y * np.log(s) + (1 - y) * np.log(1 - s))
    assert classification_loss_grad(z, 10, "bce_sigmoid")[0] == pytest.approx(naive, rel=1e-12)


@pytest.mark.parametrize("kind", ["bce_sigmoid", "ce_softmax"])
def test_classification_grad_fd(kind):
    rng = np.random.default_rng(7)
    for _ in range(20):
        z = rng.normal(0, 3, 66)
        t = int(rng.integers(1, 67))
        _, g = classification_loss_grad(z, t, kind)
        n = numeric_grad(lambda x: classification_loss_grad(x, t, kind)[0], z)
        assert rel_error(g, n) < 1e-4


def test_combined_degenerate_weights():
    rng = np.random.default_rng(8)
    z, t = rng.normal(size=120), 123.0
    cls, gc = classification_loss_grad(z, angle_to_bin(t, YAW_BINS))
    reg, gr = regression_loss_grad(z, t, YAW_BINS)
    l0, g0 = combined_loss(z, t, YAW_BINS, LossWeights(0.0, 2.0))
    assert l0 == 2 * cls and np.array_equal(g0, 2 * gc)
    l1, g1 = combined_loss(z, t, YAW_BINS, LossWeights(3.0, 0.0))
    assert l1 == 3 * reg and np.array_equal(g1, 3 * gr)
    l2, g2 = combined_loss(z, t, YAW_BINS, LossWeights(1.0, 1.0))
    assert abs(l2 - (reg + cls)) < 1e-12
    assert np.max(np.abs(g2 - (gr + gc))) < 1e-12


def test_loss_weights_validate():
    with pytest.raises(ValueError):
        LossWeights(-1.0, 1.0)
    with pytest.raises(ValueError):
        LossWeights(1.0, float("inf"))


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["wrapped", "mse"]), st.sampled_from(["bce_sigmoid", "ce_softmax"]))
def test_combined_grad_fd_property(seed, reg, cls):
    rng = np.random.default_rng(seed)
    z = rng.normal(0, 2, 120)
    t = rng.uniform(-180, 180)
    theta = decode_logits(z, YAW_BINS)
    if abs(abs(theta - t) % 360 - 180) < 1e-3:
        return
    w = LossWeights(0.7, 1.3)
    _, g = combined_loss(z, t, YAW_BINS, w, reg, cls)
    n = numeric_grad(lambda x: combined_loss(x, t, YAW_BINS, w, reg, cls)[0], z)
    assert rel_error(g, n) < 1e-4


def test_reduction_none_matches_singles():
    rng = np.random.default_rng(9)
    z, t = rng.normal(size=(6, 120)), rng.uniform(-180, 180, 6)
    loss, g = combined_loss(z, t, YAW_BINS, LossWeights(0.3, 2.0), "wrapped", "ce_softmax", reduction="none")
    for i in range(6):
        li, gi = combined_loss(z[i], t[i], YAW_BINS, LossWeights(0.3, 2.0), "wrapped", "ce_softmax")
        assert loss[i] == pytest.approx(li, rel=1e-12)
        assert np.allclose(g[i], gi, rtol=1e-12, atol=1e-15)
    with pytest.raises(ValueError):
        regression_loss_grad(z, t, YAW_BINS, reduction="sum")
