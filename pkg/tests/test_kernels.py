"""Parity between the numba-compiled kernels and the numpy fallbacks."""

import numpy as np
import pytest

from stablematch import _kernels as K


def random_boxes(rng, n):
    x0 = rng.uniform(-2, 2, n)
    y0 = rng.uniform(-2, 2, n)
    w = rng.uniform(0, 2, n)
    h = rng.uniform(0, 2, n)
    return np.stack([x0, y0, x0 + w, y0 + h], axis=1)


PAIRS = [
    (K._pairwise_iou_loops, K._pairwise_iou_numpy),
    (K._pairwise_giou_loops, K._pairwise_giou_numpy),
    (K._pairwise_l1_loops, K._pairwise_l1_numpy),
]


@pytest.mark.parametrize("loops,vectorized", PAIRS)
def test_pairwise_implementations_agree(loops, vectorized):
    rng = np.random.default_rng(0)
    a, b = random_boxes(rng, 17), random_boxes(rng, 23)
    np.testing.assert_array_equal(loops(a, b), vectorized(a, b))


def test_nms_implementations_agree():
    rng = np.random.default_rng(1)
    boxes = random_boxes(rng, 40)
    order = np.argsort(-rng.uniform(0, 1, 40), kind="stable").astype(np.int64)
    for thr in (0.0, 0.3, 0.8, 1.0):
        np.testing.assert_array_equal(
            K._nms_suppress_loops(boxes, order, thr),
            K._nms_suppress_numpy(boxes, order, thr),
        )


def test_loss_term_implementations_agree():
    rng = np.random.default_rng(2)
    p = rng.uniform(0, 1, 500)
    t = rng.uniform(0, 1, 500)
    for gamma in (0.0, 1.0, 2.0, 4.0):
        np.testing.assert_allclose(
            K._positive_terms_loops(p, t, gamma),
            K._positive_terms_numpy(p, t, gamma),
            rtol=1e-15,
        )
        np.testing.assert_allclose(
            K._negative_terms_loops(p, gamma),
            K._negative_terms_numpy(p, gamma),
            rtol=1e-15,
        )


def test_cls_cost_implementations_agree():
    rng = np.random.default_rng(3)
    q = rng.uniform(0, 1, size=(20, 30))
    np.testing.assert_allclose(
        K._cls_cost_values_loops(q, 2.0), K._cls_cost_values_numpy(q, 2.0), rtol=1e-15
    )


@pytest.mark.skipif(not K.NUMBA_ENABLED, reason="numba path disabled")
def test_jitted_kernels_match_their_source():
    rng = np.random.default_rng(4)
    a, b = random_boxes(rng, 11), random_boxes(rng, 7)
    np.testing.assert_array_equal(K.pairwise_iou(a, b), K._pairwise_iou_loops(a, b))
    np.testing.assert_array_equal(K.pairwise_giou(a, b), K._pairwise_giou_loops(a, b))
    cost = rng.normal(size=(9, 6))
    np.testing.assert_array_equal(
        K.lap_min_cols(cost.T.copy()), K._lap_min_cols_loops(cost.T.copy())
    )


def test_lap_against_scipy():
    from scipy.optimize import linear_sum_assignment

    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 12))
        m = int(rng.integers(n, 16))
        cost = rng.normal(size=(n, m))
        ours = K.lap_min_cols(cost)
        total = float(cost[np.arange(n), ours].sum())
        rows, cols = linear_sum_assignment(cost)
        assert sorted(set(ours)) == sorted(ours)  # distinct columns
        assert total == pytest.approx(float(cost[rows, cols].sum()), abs=1e-9)


def test_lap_square_identity():
    cost = np.ones((5, 5)) - np.eye(5)
    np.testing.assert_array_equal(K.lap_min_cols(cost), np.arange(5))
