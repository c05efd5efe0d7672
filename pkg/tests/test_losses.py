import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from npnkit import losses as L
from npnkit.helpers import DimensionError, ValidationError, run_stream


def _probs(*rows):
    return np.array(rows, dtype=np.float64)


# ---- scalar oracles ----

def test_ce_uniform():
    assert L.ce_loss(_probs([0.25] * 4), [0]).value == pytest.approx(math.log(4), abs=1e-6)


def test_ce_confident_correct():
    eps = 1e-12
    assert L.ce_loss(_probs([1 - 3 * eps, eps, eps, eps]), [0]).value == pytest.approx(0.0, abs=1e-9)


def test_ce_scalar():
    assert L.ce_loss(_probs([0.1, 0.7, 0.2]), [2]).value == pytest.approx(1.609438, abs=1e-6)


def test_ce_gradient_is_p_minus_y():
    p = _probs([0.1, 0.7, 0.2], [0.3, 0.3, 0.4])
    out = L.ce_loss(p, [2, 0])
    assert_allclose(out.grad_logits, (p - np.eye(3)[[2, 0]]) / 2, atol=1e-15)


def test_ce_clipped_label_has_no_gradient():
    # p_y < EPS: değer sabit -log(EPS), gradyan satırı sıfır
    out = L.ce_loss(_probs([1.0 - 1e-15, 1e-15, 0.0]), [1])
    assert out.value == pytest.approx(-math.log(L.EPS), rel=1e-9)
    assert_allclose(out.grad_logits, np.zeros((1, 3)), atol=0)


def test_pll_hard_scalars():
    assert L.pll_hard_loss(_probs([0.5, 0.5]), [0], [0.6]).value == pytest.approx(0.415888, abs=1e-6)
    assert L.pll_hard_loss(_probs([0.2, 0.3, 0.5]), [2], [3 / 5]).value == pytest.approx(0.415888, abs=1e-6)


def test_pll_hard_weight_one_is_ce():
    p = run_stream(1, 0).dirichlet(np.ones(5), size=8)
    labels = np.arange(8) % 5
    hard = L.pll_hard_loss(p, labels, np.ones(8))
    ce = L.ce_loss(p, labels)
    assert hard.value == ce.value
    assert_allclose(hard.grad_logits, ce.grad_logits, rtol=0, atol=0)


def test_pll_soft_one_hot_is_ce():
    p = run_stream(2, 0).dirichlet(np.ones(3), size=6)
    soft = L.pll_soft_loss(p, np.tile([1.0, 0.0, 0.0], (6, 1)))
    ce = L.ce_loss(p, np.zeros(6, dtype=int))
    assert abs(soft.value - ce.value) <= 1e-15
    assert_allclose(soft.grad_logits, ce.grad_logits, atol=1e-15)


def test_pll_soft_entropy_when_matching():
    out = L.pll_soft_loss(_probs([0.6, 0.4 - 1e-12, 1e-12]), _probs([0.6, 0.4, 0.0]))
    assert out.value == pytest.approx(0.673012, abs=1e-6)


def test_pll_soft_uniform():
    c = 7
    assert L.pll_soft_loss(_probs([1 / c] * c), _probs([1 / c] * c)).value == pytest.approx(math.log(c))


def test_nl_scalar():
    comp = np.array([[True, False, False, True]])
    assert L.nl_loss(_probs([0.1, 0.2, 0.6, 0.1]), comp).value == pytest.approx(0.210721, abs=1e-6)


def test_nl_empty_complement():
    out = L.nl_loss(_probs([0.1, 0.2, 0.7]), np.zeros((1, 3), dtype=bool))
    assert out.value == 0.0
    assert not out.grad_logits.any()


def test_nl_saturated_class_is_finite():
    out = L.nl_loss(_probs([1.0, 0.0, 0.0]), np.array([[True, False, False]]))
    assert out.value == pytest.approx(-math.log(1e-12), rel=1e-9)
    assert out.value == pytest.approx(27.631021, abs=1e-5)
    assert np.all(np.isfinite(out.grad_logits))


def test_reg_scalars():
    assert L.reg_loss(_probs([0.7, 0.3]), [0]).value == pytest.approx(0.356675, abs=1e-6)
    assert L.reg_loss(_probs([1.0, 0.0]), [0]).value == pytest.approx(0.0, abs=1e-11)
    assert L.reg_loss(_probs([0.2] * 5), [3]).value == pytest.approx(math.log(5))


def test_combined_values():
    one = lambda v: L.LossOutput(v, np.zeros((1, 2)))
    assert L.combined_loss(one(1.0), one(0.5), one(0.25), L.LossWeights(1.0, 2.0)).value == pytest.approx(2.0)
    assert L.combined_loss(one(0.4159), one(0.2107), one(0.3567), L.LossWeights()).value == pytest.approx(1.34, abs=1e-4)


def test_combined_zero_weights_is_pll():
    rng = run_stream(4, 0)
    p = rng.dirichlet(np.ones(4), size=5)
    pll = L.pll_hard_loss(p, np.arange(5) % 4, rng.uniform(0.3, 1.0, size=5))
    nl = L.nl_loss(p, rng.random((5, 4)) < 0.5)
    reg = L.reg_loss(p, np.zeros(5, dtype=int))
    out = L.combined_loss(pll, nl, reg, L.LossWeights(0.0, 0.0))
    assert out.value == pll.value
    assert_allclose(out.grad_logits, pll.grad_logits, rtol=0, atol=0)


def test_combined_rejects_shape_mismatch():
    a = L.zero_loss(2, 3)
    with pytest.raises(DimensionError):
        L.combined_loss(a, L.zero_loss(4, 3), a, L.LossWeights())


def test_loss_weights_validate():
    with pytest.raises(ValidationError):
        L.LossWeights(-1.0, 2.0)


def test_shape_mismatch_errors():
    p = _probs([0.5, 0.5])
    with pytest.raises(DimensionError):
        L.ce_loss(p, [0, 1])
    with pytest.raises(DimensionError):
        L.nl_loss(p, np.zeros((1, 3), dtype=bool))
    with pytest.raises(DimensionError):
        L.pll_soft_loss(p, _probs([0.3, 0.3, 0.4]))


def test_pad_rows_places_gradient():
    out = L.ce_loss(_probs([0.5, 0.5]), [0])
    padded = L.pad_rows(out, 4, 2)
    assert padded.value == out.value
    assert not padded.grad_logits[:2].any() and not padded.grad_logits[3:].any()
    assert_allclose(padded.grad_logits[2], out.grad_logits[0])
    with pytest.raises(DimensionError):
        L.pad_rows(out, 2, 2)


# ---- finite-difference gradient suite ----

def _loss_of_logits(kind, targets):
    def fn(z):
        p = L.softmax(z)
        if kind == "ce":
            return L.ce_loss(p, targets)
        if kind == "hard":
            return L.pll_hard_loss(p, targets[0], targets[1])
        if kind == "soft":
            return L.pll_soft_loss(p, targets)
        if kind == "nl":
            return L.nl_loss(p, targets)
        return L.reg_loss(p, targets)
    return fn


def _targets_for(kind, rng, b, c):
    if kind in ("ce", "reg"):
        return rng.integers(0, c, size=b)
    if kind == "hard":
        return rng.integers(0, c, size=b), rng.uniform(0.2, 1.0, size=b)
    if kind == "soft":
        counts = rng.integers(0, 4, size=(b, c))
        counts[:, 0] += 1
        return counts / counts.sum(axis=1, keepdims=True)
    return rng.random((b, c)) < 0.5


@pytest.mark.parametrize("kind", ["ce", "hard", "soft", "nl", "reg"])
@pytest.mark.parametrize("c", [2, 3, 5, 10])
def test_gradient_matches_central_differences(kind, c):
    rng = run_stream(100 + c, len(kind))
    h = 1e-5
    for _ in range(25):
        b = int(rng.integers(1, 4))
        z = rng.normal(0.0, 1.5, size=(b, c))
        fn = _loss_of_logits(kind, _targets_for(kind, rng, b, c))
        analytic = fn(z).grad_logits
        numeric = np.zeros_like(z)
        for idx in np.ndindex(*z.shape):
            zp, zm = z.copy(), z.copy()
            zp[idx] += h
            zm[idx] -= h
            numeric[idx] = (fn(zp).value - fn(zm).value) / (2 * h)
        scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
        assert np.abs(analytic - numeric).max() / scale < 1e-5


# ---- batched vs naive loop ----

def test_batched_equals_per_sample_loop():
    rng = run_stream(7, 7)
    b, c = 16, 5
    p = rng.dirichlet(np.ones(c), size=b)
    labels = rng.integers(0, c, size=b)
    weights = rng.uniform(0.2, 1.0, size=b)
    comp = rng.random((b, c)) < 0.5

    ce = np.mean([-math.log(p[i, labels[i]]) for i in range(b)])
    hard = np.mean([-weights[i] * math.log(p[i, labels[i]]) for i in range(b)])
    nl = np.mean([-sum(math.log(1 - p[i, j]) for j in range(c) if comp[i, j]) for i in range(b)])
    assert abs(L.ce_loss(p, labels).value - ce) <= 1e-12
    assert abs(L.pll_hard_loss(p, labels, weights).value - hard) <= 1e-12
    assert abs(L.nl_loss(p, comp).value - nl) <= 1e-12


def test_nl_increases_with_complementary_probability():
    z = np.array([[0.1, -0.3, 0.2, 0.0]])
    comp = np.array([[False, True, False, False]])
    values = []
    for step in np.linspace(0.0, 3.0, 7):
        zz = z.copy()
        zz[0, 1] += step
        values.append(L.nl_loss(L.softmax(zz), comp).value)
    assert all(a < b for a, b in zip(values, values[1:]))


def test_losses_are_permutation_equivariant():
    rng = run_stream(8, 8)
    c = 5
    p = rng.dirichlet(np.ones(c), size=3)
    labels = rng.integers(0, c, size=3)
    comp = rng.random((3, c)) < 0.5
    perm = rng.permutation(c)
    inv = np.argsort(perm)

    base = L.ce_loss(p, labels)
    moved = L.ce_loss(p[:, perm], inv[labels])
    assert moved.value == pytest.approx(base.value)
    assert_allclose(moved.grad_logits, base.grad_logits[:, perm])

    base = L.nl_loss(p, comp)
    moved = L.nl_loss(p[:, perm], comp[:, perm])
    assert moved.value == pytest.approx(base.value)
    assert_allclose(moved.grad_logits, base.grad_logits[:, perm])


def test_softmax_is_stable():
    p = L.softmax(np.array([[1000.0, 0.0, -1000.0]]))
    assert np.all(np.isfinite(p))
    assert p.sum() == pytest.approx(1.0)
