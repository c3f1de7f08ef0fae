"""Hot numeric kernels, JIT-compiled with numba when available.

Each kernel exists in two interchangeable flavors: an explicit-loop
version that numba compiles to machine code, and a vectorized numpy
version. The active set is chosen once at import time. Set
``STABLE_MATCH_NO_NUMBA=1`` to force the pure-numpy path (the package
also falls back automatically when numba is not importable).

``benchmarks/bench_kernels.py`` times the two paths against each other.
"""

from __future__ import annotations

import os

import numpy as np

# Probabilities are clamped to [PROB_EPS, 1 - PROB_EPS] before any log.
PROB_EPS = 1e-8


def _want_numba() -> bool:
    flag = os.environ.get("STABLE_MATCH_NO_NUMBA", "0").strip().lower()
    if flag in ("1", "true", "yes"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _want_numba()


# ---------------------------------------------------------------------------
# Loop implementations (numba-compatible source)
# ---------------------------------------------------------------------------

def _pairwise_iou_loops(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        ax0 = a[i, 0]
        ay0 = a[i, 1]
        ax1 = a[i, 2]
        ay1 = a[i, 3]
        area_a = (ax1 - ax0) * (ay1 - ay0)
        for j in range(m):
            bx0 = b[j, 0]
            by0 = b[j, 1]
            bx1 = b[j, 2]
            by1 = b[j, 3]
            iw = min(ax1, bx1) - max(ax0, bx0)
            ih = min(ay1, by1) - max(ay0, by0)
            inter = 0.0
            if iw > 0.0 and ih > 0.0:
                inter = iw * ih
            union = area_a + (bx1 - bx0) * (by1 - by0) - inter
            val = inter / union if union > 0.0 else 0.0
            out[i, j] = min(max(val, 0.0), 1.0)
    return out


def _pairwise_giou_loops(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        ax0 = a[i, 0]
        ay0 = a[i, 1]
        ax1 = a[i, 2]
        ay1 = a[i, 3]
        area_a = (ax1 - ax0) * (ay1 - ay0)
        for j in range(m):
            bx0 = b[j, 0]
            by0 = b[j, 1]
            bx1 = b[j, 2]
            by1 = b[j, 3]
            iw = min(ax1, bx1) - max(ax0, bx0)
            ih = min(ay1, by1) - max(ay0, by0)
            inter = 0.0
            if iw > 0.0 and ih > 0.0:
                inter = iw * ih
            union = area_a + (bx1 - bx0) * (by1 - by0) - inter
            enclose = (max(ax1, bx1) - min(ax0, bx0)) * (max(ay1, by1) - min(ay0, by0))
            if enclose <= 0.0:
                out[i, j] = 0.0
                continue
            val = inter / union if union > 0.0 else 0.0
            val = min(max(val, 0.0), 1.0)
            # rounding can push union an ulp past enclose; the penalty is >= 0
            val = val - max((enclose - union) / enclose, 0.0)
            out[i, j] = min(max(val, -1.0), 1.0)
    return out


def _pairwise_l1_loops(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            out[i, j] = (
                abs(a[i, 0] - b[j, 0])
                + abs(a[i, 1] - b[j, 1])
                + abs(a[i, 2] - b[j, 2])
                + abs(a[i, 3] - b[j, 3])
            )
    return out


def _nms_suppress_loops(boxes, order, thr):
    # order: candidate indices, highest probability first (ties pre-broken).
    n = order.shape[0]
    keep = np.empty(n, dtype=np.int64)
    kept = 0
    for oi in range(n):
        i = order[oi]
        ax0 = boxes[i, 0]
        ay0 = boxes[i, 1]
        ax1 = boxes[i, 2]
        ay1 = boxes[i, 3]
        area_a = (ax1 - ax0) * (ay1 - ay0)
        ok = True
        for kj in range(kept):
            j = keep[kj]
            iw = min(ax1, boxes[j, 2]) - max(ax0, boxes[j, 0])
            ih = min(ay1, boxes[j, 3]) - max(ay0, boxes[j, 1])
            inter = 0.0
            if iw > 0.0 and ih > 0.0:
                inter = iw * ih
            union = area_a + (boxes[j, 2] - boxes[j, 0]) * (boxes[j, 3] - boxes[j, 1]) - inter
            iou = inter / union if union > 0.0 else 0.0
            if iou > thr:
                ok = False
                break
        if ok:
            keep[kept] = i
            kept += 1
    return keep[:kept].copy()


def _positive_terms_loops(p, t, gamma):
    # |t - p|^gamma * BCE(p, t), soft targets allowed; p clamped inside logs.
    n = p.shape[0]
    out = np.empty(n)
    for i in range(n):
        pc = min(max(p[i], PROB_EPS), 1.0 - PROB_EPS)
        bce = -(t[i] * np.log(pc) + (1.0 - t[i]) * np.log(1.0 - pc))
        out[i] = abs(t[i] - p[i]) ** gamma * bce
    return out


def _negative_terms_loops(p, gamma):
    # p^gamma * BCE(p, 0)
    n = p.shape[0]
    out = np.empty(n)
    for i in range(n):
        pc = min(max(p[i], PROB_EPS), 1.0 - PROB_EPS)
        out[i] = p[i] ** gamma * (-np.log(1.0 - pc))
    return out


def _cls_cost_values_loops(q, gamma):
    # |1 - q|^gamma * BCE(q, 1) - q^gamma * BCE(1 - q, 1)
    n = q.shape[0]
    m = q.shape[1]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            qc = min(max(q[i, j], PROB_EPS), 1.0 - PROB_EPS)
            out[i, j] = abs(1.0 - q[i, j]) ** gamma * (-np.log(qc)) - q[i, j] ** gamma * (
                -np.log(1.0 - qc)
            )
    return out


def _lap_min_cols_loops(cost):
    # Minimum-cost assignment of every row to a distinct column.
    # cost: (n, m) with n <= m. Returns the column chosen for each row.
    # Shortest augmenting path with potentials; O(n * n * m).
    n = cost.shape[0]
    m = cost.shape[1]
    inf = np.inf
    u = np.zeros(n)
    v = np.zeros(m + 1)
    col_row = np.full(m + 1, -1, dtype=np.int64)  # slot m is the virtual start
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(n):
        col_row[m] = i
        j0 = m
        minv = np.full(m + 1, inf)
        used = np.zeros(m + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = col_row[j0]
            delta = inf
            j1 = -1
            for j in range(m):
                if not used[j]:
                    cur = cost[i0, j] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[col_row[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if col_row[j0] == -1:
                break
        while j0 != m:
            j1 = way[j0]
            col_row[j0] = col_row[j1]
            j0 = j1
    row_col = np.empty(n, dtype=np.int64)
    for j in range(m):
        if col_row[j] >= 0:
            row_col[col_row[j]] = j
    return row_col


# ---------------------------------------------------------------------------
# Vectorized numpy implementations
# ---------------------------------------------------------------------------

def _pairwise_iou_numpy(a, b):
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((iw > 0.0) & (ih > 0.0), iw * ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(union > 0.0, inter / union, 0.0)
    return np.clip(val, 0.0, 1.0)


def _pairwise_giou_numpy(a, b):
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.where((iw > 0.0) & (ih > 0.0), iw * ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    ew = np.maximum(a[:, None, 2], b[None, :, 2]) - np.minimum(a[:, None, 0], b[None, :, 0])
    eh = np.maximum(a[:, None, 3], b[None, :, 3]) - np.minimum(a[:, None, 1], b[None, :, 1])
    enclose = ew * eh
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.clip(np.where(union > 0.0, inter / union, 0.0), 0.0, 1.0)
        penalty = np.maximum((enclose - union) / enclose, 0.0)
        val = np.where(enclose > 0.0, iou - penalty, 0.0)
    return np.clip(val, -1.0, 1.0)


def _pairwise_l1_numpy(a, b):
    return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2)


def _nms_suppress_numpy(boxes, order, thr):
    kept: list[int] = []
    for i in order:
        if kept:
            ious = _pairwise_iou_numpy(boxes[i : i + 1], boxes[np.asarray(kept)])[0]
            if np.any(ious > thr):
                continue
        kept.append(int(i))
    return np.asarray(kept, dtype=np.int64)


def _positive_terms_numpy(p, t, gamma):
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    bce = -(t * np.log(pc) + (1.0 - t) * np.log(1.0 - pc))
    return np.abs(t - p) ** gamma * bce


def _negative_terms_numpy(p, gamma):
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return p**gamma * (-np.log(1.0 - pc))


def _cls_cost_values_numpy(q, gamma):
    qc = np.clip(q, PROB_EPS, 1.0 - PROB_EPS)
    return np.abs(1.0 - q) ** gamma * (-np.log(qc)) - q**gamma * (-np.log(1.0 - qc))


# ---------------------------------------------------------------------------
# Path selection
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:
    from numba import njit

    _jit = njit(cache=True)
    pairwise_iou = _jit(_pairwise_iou_loops)
    pairwise_giou = _jit(_pairwise_giou_loops)
    pairwise_l1 = _jit(_pairwise_l1_loops)
    nms_suppress = _jit(_nms_suppress_loops)
    positive_terms = _jit(_positive_terms_loops)
    negative_terms = _jit(_negative_terms_loops)
    cls_cost_values = _jit(_cls_cost_values_loops)
    lap_min_cols = _jit(_lap_min_cols_loops)
else:
    pairwise_iou = _pairwise_iou_numpy
    pairwise_giou = _pairwise_giou_numpy
    pairwise_l1 = _pairwise_l1_numpy
    nms_suppress = _nms_suppress_numpy
    positive_terms = _positive_terms_numpy
    negative_terms = _negative_terms_numpy
    cls_cost_values = _cls_cost_values_numpy
    lap_min_cols = _lap_min_cols_loops


def warm_up() -> None:
    """Trigger JIT compilation of every kernel (no-op on the numpy path)."""
    boxes = np.array([[0.0, 0.0, 1.0, 1.0], [0.5, 0.5, 2.0, 2.0]])
    pairwise_iou(boxes, boxes)
    pairwise_giou(boxes, boxes)
    pairwise_l1(boxes, boxes)
    nms_suppress(boxes, np.array([0, 1], dtype=np.int64), 0.8)
    p = np.array([0.25, 0.75])
    positive_terms(p, np.ones(2), 2.0)
    negative_terms(p, 2.0)
    cls_cost_values(np.array([[0.25, 0.75]]), 2.0)
    lap_min_cols(np.array([[1.0, 2.0], [2.0, 0.5]]))
