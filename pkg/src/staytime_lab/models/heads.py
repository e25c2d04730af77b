"""The five base staytime predictors as heads over a shared representation.

Each head owns its tower MLP(s), a label transform fitted on the training
split, the corresponding training loss, and (except for the normalized
dwell-time model, which only ranks) an inverse transform back to staytime.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from staytime_lab.errors import DataValidationError, FitError, UnsupportedPredictionError
from staytime_lab.losses import sigmoid
from staytime_lab.nn.layers import MLP
from staytime_lab.nn.params import ParamSet


@dataclass
class HeadLabels:
    """Per-batch label columns a head may consume."""

    staytime: np.ndarray
    opened: np.ndarray
    duration: np.ndarray
    extra: dict = field(default_factory=dict)


def _mse_masked(pred: np.ndarray, target: np.ndarray,
                mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over masked rows; zero loss and gradient if none."""
    n = int(mask.sum())
    if n == 0:
        return 0.0, np.zeros_like(pred)
    err = np.where(mask, pred - target, 0.0)
    loss = float((err ** 2).sum() / n)
    return loss, 2.0 * err / n


def _soft_bce(z: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Cross-entropy against soft targets in [0,1], stable logit form."""
    per = np.maximum(z, 0.0) - z * target + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    return float(per.sum() / n), (sigmoid(z) - target) / n


class VrHead:
    """Value regression: fit observed staytime directly with MSE."""

    kind = "vr"
    uses_nonopened = False
    supports_staytime = True

    def __init__(self, params: ParamSet, in_dim: int, hidden: int,
                 rng: np.random.Generator):
        self.tower = MLP(params, "head/vr", [in_dim, hidden, hidden, 1], rng)

    def prepare(self, labels: HeadLabels) -> None:
        opened = labels.opened
        if not opened.any():
            raise FitError("VR needs at least one opened training impression")
        # start the output at the base rate so the tower learns residuals
        self.tower.layers[-1].b.value[:] = float(labels.staytime[opened].mean())

    def split_extra(self, labels: HeadLabels) -> dict:
        return {}

    def loss_and_grad(self, x: np.ndarray, labels: HeadLabels):
        pred = self.tower.forward(x)[:, 0]
        loss, dpred = _mse_masked(pred, labels.staytime, labels.opened)
        return loss, self.tower.backward(dpred[:, None])

    def predict_staytime(self, x: np.ndarray, duration: np.ndarray) -> np.ndarray:
        return np.maximum(self.tower.forward(x)[:, 0], 0.0)

    def predict_rank(self, x: np.ndarray) -> np.ndarray:
        return self.tower.forward(x)[:, 0]

    def state_sections(self) -> dict:
        return {}

    def load_state(self, sections: dict) -> None:
        pass


class WlrHead:
    """Weighted logistic regression with a comment-section-open tower.

    Tower A classifies whether the comments section is opened (all rows).
    Tower B is a weighted logistic on opened rows: each sample acts as a
    positive with weight equal to its staytime and as a unit-weight negative,
    so the optimal odds exp(logit) equal the staytime. Ranking combines the
    towers as sigma(logit_A) * exp(logit_B), i.e. p(open) * E[staytime|open].
    """

    kind = "wlr"
    uses_nonopened = True
    supports_staytime = True
    _CLIP = 30.0

    def __init__(self, params: ParamSet, in_dim: int, hidden: int,
                 rng: np.random.Generator):
        self.open_tower = MLP(params, "head/wlr_open", [in_dim, hidden, hidden, 1], rng)
        self.stay_tower = MLP(params, "head/wlr_stay", [in_dim, hidden, hidden, 1], rng)

    def prepare(self, labels: HeadLabels) -> None:
        opened = labels.opened
        if not opened.any():
            raise FitError("WLR needs at least one opened training impression")
        if np.any(labels.staytime[opened] <= 0):
            raise DataValidationError("opened impression with staytime <= 0 cannot weight WLR")
        self.stay_tower.layers[-1].b.value[:] = float(
            np.log(labels.staytime[opened].mean()))

    def split_extra(self, labels: HeadLabels) -> dict:
        return {}

    def loss_and_grad(self, x: np.ndarray, labels: HeadLabels):
        opened = labels.opened
        if opened.any() and np.any(labels.staytime[opened] <= 0):
            raise DataValidationError("opened impression with staytime <= 0 cannot weight WLR")
        z_open = self.open_tower.forward(x)[:, 0]
        t_open = opened.astype(np.float64)
        loss_a, dz_a = _soft_bce(z_open, t_open)
        dx = self.open_tower.backward(dz_a[:, None])

        z_stay = self.stay_tower.forward(x)[:, 0]
        n_op = int(opened.sum())
        if n_op:
            w = np.where(opened, labels.staytime, 0.0)
            # per opened row: st * softplus(-z) + softplus(z)
            per = w * np.logaddexp(0.0, -z_stay) + np.logaddexp(0.0, z_stay)
            loss_b = float(per[opened].sum() / n_op)
            dz_b = np.where(opened, (sigmoid(z_stay) - w * sigmoid(-z_stay)) / n_op, 0.0)
        else:
            loss_b = 0.0
            dz_b = np.zeros_like(z_stay)
        dx += self.stay_tower.backward(dz_b[:, None])
        return loss_a + loss_b, dx

    def predict_staytime(self, x: np.ndarray, duration: np.ndarray) -> np.ndarray:
        z = self.stay_tower.forward(x)[:, 0]
        return np.exp(np.clip(z, -self._CLIP, self._CLIP))

    def predict_rank(self, x: np.ndarray) -> np.ndarray:
        p_open = sigmoid(self.open_tower.forward(x)[:, 0])
        odds = np.exp(np.clip(self.stay_tower.forward(x)[:, 0], -self._CLIP, self._CLIP))
        return p_open * odds

    def state_sections(self) -> dict:
        return {}

    def load_state(self, sections: dict) -> None:
        pass


def ndt_value(staytime, log1p_p99: float) -> np.ndarray:
    """Normalized dwell time: clamp(log1p(st) / log1p(P99), 0, 1)."""
    return np.clip(np.log1p(np.asarray(staytime, dtype=np.float64)) / log1p_p99, 0.0, 1.0)


class NdtHead:
    """Normalized dwell-time reweighting; ranking only, no staytime inverse."""

    kind = "ndt"
    uses_nonopened = True
    supports_staytime = False

    def __init__(self, params: ParamSet, in_dim: int, hidden: int,
                 rng: np.random.Generator):
        self.tower = MLP(params, "head/ndt", [in_dim, hidden, hidden, 1], rng)
        self.log1p_p99: float | None = None

    def prepare(self, labels: HeadLabels) -> None:
        opened = labels.opened
        if not opened.any():
            raise FitError("NDT needs at least one opened training impression")
        p99 = float(np.percentile(labels.staytime[opened], 99.0))
        if p99 <= 0:
            raise FitError("non-positive P99 staytime")
        self.log1p_p99 = float(np.log1p(p99))

    def split_extra(self, labels: HeadLabels) -> dict:
        return {}

    def _targets(self, labels: HeadLabels) -> np.ndarray:
        if self.log1p_p99 is None:
            raise FitError("NDT head not prepared")
        return np.where(labels.opened, ndt_value(labels.staytime, self.log1p_p99), 0.0)

    def loss_and_grad(self, x: np.ndarray, labels: HeadLabels):
        z = self.tower.forward(x)[:, 0]
        loss, dz = _soft_bce(z, self._targets(labels))
        return loss, self.tower.backward(dz[:, None])

    def predict_staytime(self, x: np.ndarray, duration: np.ndarray) -> np.ndarray:
        raise UnsupportedPredictionError(
            "NDT has no inverse transform; it supports relevance ranking only"
        )

    def predict_rank(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(self.tower.forward(x)[:, 0])

    def state_sections(self) -> dict:
        return {"head/ndt/log1p_p99": np.array([[self.log1p_p99]])}

    def load_state(self, sections: dict) -> None:
        self.log1p_p99 = float(sections["head/ndt/log1p_p99"][0, 0])


class PcrHead:
    """Completion-ratio regression on staytime / duration, inverted exactly."""

    kind = "pcr"
    uses_nonopened = False
    supports_staytime = True

    def __init__(self, params: ParamSet, in_dim: int, hidden: int,
                 rng: np.random.Generator):
        self.tower = MLP(params, "head/pcr", [in_dim, hidden, hidden, 1], rng)

    def prepare(self, labels: HeadLabels) -> None:
        opened = labels.opened
        if not opened.any():
            raise FitError("PCR needs at least one opened training impression")
        ratio = labels.staytime[opened] / labels.duration[opened]
        self.tower.layers[-1].b.value[:] = float(ratio.mean())

    def split_extra(self, labels: HeadLabels) -> dict:
        return {}

    def loss_and_grad(self, x: np.ndarray, labels: HeadLabels):
        pred = self.tower.forward(x)[:, 0]
        with np.errstate(invalid="ignore"):
            target = np.where(labels.opened, labels.staytime / labels.duration, 0.0)
        loss, dpred = _mse_masked(pred, target, labels.opened)
        return loss, self.tower.backward(dpred[:, None])

    def predict_staytime(self, x: np.ndarray, duration: np.ndarray) -> np.ndarray:
        ratio = np.maximum(self.tower.forward(x)[:, 0], 0.0)
        return ratio * duration

    def predict_rank(self, x: np.ndarray) -> np.ndarray:
        return self.tower.forward(x)[:, 0]

    def state_sections(self) -> dict:
        return {}

    def load_state(self, sections: dict) -> None:
        pass


class DurationBuckets:
    """Equal-frequency duration buckets with per-bucket staytime quantiles.

    ``transform`` maps a staytime to its midpoint-rank empirical CDF position
    within the impression's bucket; ``inverse`` linearly interpolates between
    the bucket's order statistics, clamping to the bucket min/max at q=0/1.
    """

    def __init__(self, boundaries: np.ndarray, bucket_staytimes: list[np.ndarray]):
        self.boundaries = np.asarray(boundaries, dtype=np.float64)
        self.bucket_staytimes = [np.asarray(b, dtype=np.float64) for b in bucket_staytimes]
        self.n_buckets = len(self.bucket_staytimes)

    @classmethod
    def fit(cls, durations, staytimes, n_buckets: int = 30) -> "DurationBuckets":
        durations = np.asarray(durations, dtype=np.float64)
        staytimes = np.asarray(staytimes, dtype=np.float64)
        if durations.size == 0:
            raise FitError("cannot fit duration buckets on an empty training split")
        qs = np.arange(1, n_buckets) / n_buckets
        boundaries = np.quantile(durations, qs, method="linear")
        idx = np.searchsorted(boundaries, durations, side="right")
        buckets = []
        for b in range(n_buckets):
            vals = np.sort(staytimes[idx == b])
            if vals.size == 0:
                raise FitError(
                    f"duration bucket {b} is empty; refit with fewer than "
                    f"{n_buckets} buckets"
                )
            buckets.append(vals)
        return cls(boundaries, buckets)

    def bucket_of(self, durations) -> np.ndarray:
        # durations outside the training range clamp into the end buckets
        return np.searchsorted(self.boundaries, np.asarray(durations, dtype=np.float64),
                               side="right")

    def transform(self, bucket_idx, staytimes) -> np.ndarray:
        bucket_idx = np.asarray(bucket_idx)
        staytimes = np.asarray(staytimes, dtype=np.float64)
        q = np.empty(staytimes.shape, dtype=np.float64)
        for b in np.unique(bucket_idx):
            vals = self.bucket_staytimes[int(b)]
            sel = bucket_idx == b
            lo = np.searchsorted(vals, staytimes[sel], side="left")
            hi = np.searchsorted(vals, staytimes[sel], side="right")
            q[sel] = (lo + 0.5 * (hi - lo)) / vals.size
        return q

    def inverse(self, bucket_idx, q) -> np.ndarray:
        bucket_idx = np.asarray(bucket_idx)
        q = np.asarray(q, dtype=np.float64)
        out = np.empty(q.shape, dtype=np.float64)
        for b in np.unique(bucket_idx):
            vals = self.bucket_staytimes[int(b)]
            positions = (np.arange(vals.size) + 0.5) / vals.size
            sel = bucket_idx == b
            out[sel] = np.interp(q[sel], positions, vals)
        return out

    def max_adjacent_gap(self, bucket: int) -> float:
        vals = self.bucket_staytimes[bucket]
        if vals.size < 2:
            return 0.0
        return float(np.max(np.diff(vals)))

    def sections(self) -> dict:
        out = {"head/d2q/boundaries": self.boundaries[None, :]}
        for b, vals in enumerate(self.bucket_staytimes):
            out[f"head/d2q/bucket_{b:03d}"] = vals[None, :]
        return out

    @classmethod
    def from_sections(cls, sections: dict) -> "DurationBuckets":
        boundaries = sections["head/d2q/boundaries"][0]
        buckets = []
        for b in range(len(boundaries) + 1):
            buckets.append(sections[f"head/d2q/bucket_{b:03d}"][0])
        return cls(boundaries, buckets)


class D2qHead:
    """Duration-debiased quantile regression over 30 equal-frequency buckets."""

    kind = "d2q"
    uses_nonopened = False
    supports_staytime = True

    def __init__(self, params: ParamSet, in_dim: int, hidden: int,
                 rng: np.random.Generator, n_buckets: int = 30):
        self.tower = MLP(params, "head/d2q", [in_dim, hidden, hidden, 1], rng)
        self.n_buckets = n_buckets
        self.buckets: DurationBuckets | None = None

    def prepare(self, labels: HeadLabels) -> None:
        opened = labels.opened
        if not opened.any():
            raise FitError("D2Q needs at least one opened training impression")
        self.buckets = DurationBuckets.fit(labels.duration[opened],
                                           labels.staytime[opened], self.n_buckets)
        self.tower.layers[-1].b.value[:] = 0.5

    def split_extra(self, labels: HeadLabels) -> dict:
        """Quantile targets for a split, computed once against the fitted buckets."""
        if self.buckets is None:
            raise FitError("D2Q head not prepared")
        q = np.zeros_like(labels.staytime)
        opened = labels.opened
        if opened.any():
            idx = self.buckets.bucket_of(labels.duration[opened])
            q[opened] = self.buckets.transform(idx, labels.staytime[opened])
        return {"q": q}

    def loss_and_grad(self, x: np.ndarray, labels: HeadLabels):
        pred = self.tower.forward(x)[:, 0]
        loss, dpred = _mse_masked(pred, labels.extra["q"], labels.opened)
        return loss, self.tower.backward(dpred[:, None])

    def predict_staytime(self, x: np.ndarray, duration: np.ndarray) -> np.ndarray:
        if self.buckets is None:
            raise FitError("D2Q head not prepared")
        q = np.clip(self.tower.forward(x)[:, 0], 0.0, 1.0)
        return self.buckets.inverse(self.buckets.bucket_of(duration), q)

    def predict_rank(self, x: np.ndarray) -> np.ndarray:
        return self.tower.forward(x)[:, 0]

    def state_sections(self) -> dict:
        if self.buckets is None:
            raise FitError("D2Q head not prepared")
        return self.buckets.sections()

    def load_state(self, sections: dict) -> None:
        self.buckets = DurationBuckets.from_sections(sections)


HEAD_KINDS = {
    "vr": VrHead,
    "wlr": WlrHead,
    "ndt": NdtHead,
    "pcr": PcrHead,
    "d2q": D2qHead,
}


def make_head(kind: str, params: ParamSet, in_dim: int, hidden: int,
              rng: np.random.Generator):
    if kind not in HEAD_KINDS:
        raise ValueError(f"unknown base model kind {kind!r}; expected one of "
                         f"{sorted(HEAD_KINDS)}")
    return HEAD_KINDS[kind](params, in_dim, hidden, rng)
