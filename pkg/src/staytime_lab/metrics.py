"""Evaluation metrics for staytime regression and per-user relevance ranking.

Two families share the conventions below:

* pairwise concordance (XAUC, XGAUC, per-user AUC inside GAUC): tied
  predictions earn 0.5 credit;
* list metrics (MRR, NDCG@k, Staytime@n): items sort by prediction
  descending with ascending item id as the deterministic tie-break.

Everything here is a pure function over flat arrays; per-user grouping is
expressed by a parallel ``user_ids`` array.
"""

from __future__ import annotations

import numpy as np

from staytime_lab.errors import ShapeError

_PAIR_CHUNK = 2048


def _as1d(*arrays):
    out = [np.asarray(a) for a in arrays]
    n = out[0].shape[0]
    for a in out:
        if a.ndim != 1 or a.shape[0] != n:
            raise ShapeError(f"expected equal-length 1-D arrays, got {[x.shape for x in out]}")
    return out


def rmse(preds, truths) -> float:
    preds, truths = _as1d(preds, truths)
    if preds.size == 0:
        raise ValueError("rmse of empty arrays")
    return float(np.sqrt(np.mean((preds.astype(np.float64) - truths) ** 2)))


def mae(preds, truths) -> float:
    preds, truths = _as1d(preds, truths)
    if preds.size == 0:
        raise ValueError("mae of empty arrays")
    return float(np.mean(np.abs(preds.astype(np.float64) - truths)))


def _concordance(preds: np.ndarray, truths: np.ndarray) -> tuple[float, int]:
    """(credit, n_pairs) over all i<j pairs with distinct truths.

    Credit: 1 for a concordant pair, 0.5 for a prediction tie, 0 otherwise.
    Chunked so the O(n^2) pair matrix never materializes whole.
    """
    n = preds.shape[0]
    credit = 0.0
    pairs = 0
    for lo in range(0, n, _PAIR_CHUNK):
        hi = min(lo + _PAIR_CHUNK, n)
        dt = truths[lo:hi, None] - truths[None, :]
        dp = preds[lo:hi, None] - preds[None, :]
        upper = np.arange(lo, hi)[:, None] < np.arange(n)[None, :]
        valid = (dt != 0) & upper
        pairs += int(valid.sum())
        concordant = valid & (np.sign(dp) == np.sign(dt))
        tied = valid & (dp == 0)
        credit += float(concordant.sum()) + 0.5 * float(tied.sum())
    return credit, pairs


def xauc(preds, truths) -> float:
    """Pairwise concordance between predicted and true continuous staytime."""
    preds, truths = _as1d(preds, truths)
    if preds.size < 2:
        raise ValueError("xauc needs at least two samples")
    credit, pairs = _concordance(preds.astype(np.float64), truths.astype(np.float64))
    if pairs == 0:
        raise ValueError("xauc undefined: all truths are tied")
    return credit / pairs


def xgauc(user_ids, preds, truths) -> float:
    """Per-user XAUC, weighted by each user's count of valid pairs."""
    user_ids, preds, truths = _as1d(user_ids, preds, truths)
    credit_total = 0.0
    pairs_total = 0
    for u in np.unique(user_ids):
        sel = user_ids == u
        if sel.sum() < 2:
            continue
        credit, pairs = _concordance(preds[sel].astype(np.float64),
                                     truths[sel].astype(np.float64))
        credit_total += credit
        pairs_total += pairs
    if pairs_total == 0:
        raise ValueError("xgauc undefined: no user has a valid pair")
    return credit_total / pairs_total


def relevance_threshold(staytimes) -> float:
    """70th percentile of observed staytime, linear interpolation between ranks."""
    staytimes = np.asarray(staytimes, dtype=np.float64)
    if staytimes.size == 0:
        raise ValueError("relevance threshold of empty staytimes")
    return float(np.percentile(staytimes, 70.0, method="linear"))


def relevance_labels(staytimes, threshold: float | None = None) -> np.ndarray:
    """Binary relevance: 1 iff staytime strictly exceeds the 70th percentile."""
    staytimes = np.asarray(staytimes, dtype=np.float64)
    if threshold is None:
        threshold = relevance_threshold(staytimes)
    return staytimes > threshold


def _auc_binary(preds: np.ndarray, labels: np.ndarray) -> float:
    """ROC-AUC via midranks; prediction ties share 0.5 credit."""
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both a positive and a negative")
    order = np.argsort(preds, kind="mergesort")
    sorted_preds = preds[order]
    ranks = np.empty(labels.size, dtype=np.float64)
    i = 0
    while i < labels.size:
        j = i
        while j + 1 < labels.size and sorted_preds[j + 1] == sorted_preds[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    pos_rank_sum = float(ranks[labels].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def gauc(user_ids, preds, labels) -> tuple[float, int]:
    """Impression-count-weighted mean of per-user binary AUC.

    Users lacking a positive or a negative are skipped. Returns
    ``(gauc, n_excluded_users)``; raises if no user is eligible.
    """
    user_ids, preds, labels = _as1d(user_ids, preds, labels)
    labels = labels.astype(bool)
    num = 0.0
    den = 0
    excluded = 0
    for u in np.unique(user_ids):
        sel = user_ids == u
        pos = int(labels[sel].sum())
        if pos == 0 or pos == int(sel.sum()):
            excluded += 1
            continue
        num += _auc_binary(preds[sel].astype(np.float64), labels[sel]) * int(sel.sum())
        den += int(sel.sum())
    if den == 0:
        raise ValueError("gauc undefined: no user has both a positive and a negative")
    return num / den, excluded


def _ranked_indices(preds: np.ndarray, item_ids: np.ndarray) -> np.ndarray:
    """Indices sorted by prediction descending, item id ascending on ties."""
    return np.lexsort((item_ids, -preds))


def mrr(user_ids, preds, labels, item_ids) -> float:
    """Mean over users of 1/rank of the first relevant item (0 if none)."""
    user_ids, preds, labels, item_ids = _as1d(user_ids, preds, labels, item_ids)
    labels = labels.astype(bool)
    total = 0.0
    users = np.unique(user_ids)
    for u in users:
        sel = user_ids == u
        ranked = labels[sel][_ranked_indices(preds[sel].astype(np.float64), item_ids[sel])]
        hits = np.flatnonzero(ranked)
        if hits.size:
            total += 1.0 / (hits[0] + 1)
    return total / users.size


def ndcg_at_k(user_ids, preds, labels, item_ids, k: int) -> float:
    """Mean NDCG@k with binary gains and log2 discounts; 0 for all-negative users."""
    user_ids, preds, labels, item_ids = _as1d(user_ids, preds, labels, item_ids)
    labels = labels.astype(bool)
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    total = 0.0
    users = np.unique(user_ids)
    for u in users:
        sel = user_ids == u
        ranked = labels[sel][_ranked_indices(preds[sel].astype(np.float64), item_ids[sel])]
        n_pos = int(ranked.sum())
        if n_pos == 0:
            continue
        top = ranked[:k].astype(np.float64)
        dcg = float((top * discounts[:top.size]).sum())
        idcg = float(discounts[:min(k, n_pos)].sum())
        total += dcg / idcg
    return total / users.size


def staytime_at_n(user_ids, preds, staytimes, item_ids, n: int) -> float:
    """Mean over users of the mean true staytime among their top-n predictions."""
    user_ids, preds, staytimes, item_ids = _as1d(user_ids, preds, staytimes, item_ids)
    total = 0.0
    users = np.unique(user_ids)
    for u in users:
        sel = user_ids == u
        order = _ranked_indices(preds[sel].astype(np.float64), item_ids[sel])
        top = staytimes[sel][order][:n]
        total += float(top.mean())
    return total / users.size
