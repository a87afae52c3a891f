"""Desk-scale trainer: a one-hidden-layer MLP with three bin-classifier heads.

Inputs are synthetic stand-ins for image features: the head's forward
(third column) and vertical (second column) rotation axes, plus Gaussian
noise. Backprop is written out by hand and trained with Adam, so the whole
loss stack (softmax expectation, wrapped / squared regression, BCE or CE
classification) can be checked end to end against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .angles import euler_matrices
from .losses import PITCH_BINS, ROLL_BINS, YAW_BINS, BinConfig, LossWeights, combined_loss, decode_logits

ANGLES = ("pitch", "yaw", "roll")
NARROW_YAW_BINS = BinConfig(66, 3.0, -99.0)
FEATURE_DIM = 6


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class ToyData:
    features: np.ndarray  # (n, 6)
    labels: np.ndarray  # (n, 3) pitch, yaw, roll in degrees

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "ToyData":
        return ToyData(self.features[idx], self.labels[idx])


def pose_features(labels) -> np.ndarray:
    lab = np.asarray(labels, dtype=float).reshape(-1, 3)
    R = euler_matrices(lab[:, 0], lab[:, 1], lab[:, 2])
    return np.concatenate([R[:, :, 2], R[:, :, 1]], axis=1)


def gen_dataset(n: int, seed: int, range: str = "full", noise: float = 0.05) -> ToyData:
    """Uniform labels: yaw over (-180, 180] (or (-99, 99] for ``narrow``),
    pitch and roll over (-60, 60]."""
    if n <= 0:
        raise ValueError("n must be positive")
    if range not in ("full", "narrow"):
        raise ValueError(f"unknown range {range!r}")
    rng = np.random.default_rng(seed)
    half = 180.0 if range == "full" else 99.0
    yaw = half - rng.uniform(0.0, 2 * half, n)
    pitch = 60.0 - rng.uniform(0.0, 120.0, n)
    roll = 60.0 - rng.uniform(0.0, 120.0, n)
    labels = np.stack([pitch, yaw, roll], axis=1)
    feats = pose_features(labels)
    if noise > 0:
        feats = feats + rng.normal(0.0, noise, feats.shape)
    return ToyData(feats, labels)


@dataclass
class ToyModel:
    params: dict[str, np.ndarray]
    bins: dict[str, BinConfig]
    hidden: int | None = 64

    @property
    def linear(self) -> bool:
        return self.hidden is None

    def copy(self) -> "ToyModel":
        return ToyModel({k: v.copy() for k, v in self.params.items()}, dict(self.bins), self.hidden)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.params[k].ravel() for k in sorted(self.params)])


def head_bins(stage: str) -> dict[str, BinConfig]:
    yaw = YAW_BINS if stage == "full" else NARROW_YAW_BINS
    return {"pitch": PITCH_BINS, "yaw": yaw, "roll": ROLL_BINS}


def init_model(seed: int, stage: str = "full", hidden: int | None = 64) -> ToyModel:
    """Weights uniform in +/- 1/sqrt(fan_in), biases zero."""
    rng = np.random.default_rng(seed)
    bins = head_bins(stage)
    params = {}
    fan = FEATURE_DIM
    if hidden is not None:
        lim = 1.0 / math.sqrt(FEATURE_DIM)
        params["W1"] = rng.uniform(-lim, lim, (FEATURE_DIM, hidden))
        params["b1"] = np.zeros(hidden)
        fan = hidden
    for name in ANGLES:
        lim = 1.0 / math.sqrt(fan)
        params[f"W_{name}"] = rng.uniform(-lim, lim, (fan, bins[name].count))
        params[f"b_{name}"] = np.zeros(bins[name].count)
    return ToyModel(params, bins, hidden)


def zero_model(stage: str = "full", hidden: int | None = 64) -> ToyModel:
    model = init_model(0, stage, hidden)
    for v in model.params.values():
        v[...] = 0.0
    return model


def _forward(model: ToyModel, X):
    X = np.asarray(X, dtype=float).reshape(-1, FEATURE_DIM)
    p = model.params
    if model.linear:
        pre, h = None, X
    else:
        pre = X @ p["W1"] + p["b1"]
        h = np.maximum(pre, 0.0)
    logits = {a: h @ p[f"W_{a}"] + p[f"b_{a}"] for a in ANGLES}
    return logits, (X, pre, h)


def forward(model: ToyModel, X):
    """Logits per head and the decoded (n, 3) pitch/yaw/roll predictions."""
    logits, _ = _forward(model, X)
    decoded = np.stack([decode_logits(logits[a], model.bins[a]) for a in ANGLES], axis=1)
    return logits, decoded


def predict(model: ToyModel, X) -> np.ndarray:
    return forward(model, X)[1]


@dataclass(frozen=True)
class TrainConfig:
    weights: LossWeights = LossWeights(1.0, 1.0)
    reg_kind: dict = field(default_factory=lambda: {"pitch": "mse", "yaw": "wrapped", "roll": "mse"})
    cls_kind: str = "bce_sigmoid"
    lr: float = 1e-3
    batch_size: int = 64
    steps: int = 2000
    seed: int = 42
    stage: str = "full"
    hidden: int | None = 64
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    lr_schedule: str = "constant"  # or "cosine": anneal to 0 over the run

    @classmethod
    def for_stage(cls, stage: str = "full", **kw) -> "TrainConfig":
        """Defaults: alpha=1, beta=1 for full range; alpha=0.5, beta=2 for narrow."""
        if stage not in ("full", "narrow"):
            raise ValueError(f"unknown stage {stage!r}")
        w = LossWeights(1.0, 1.0) if stage == "full" else LossWeights(0.5, 2.0)
        kw.setdefault("weights", w)
        return cls(stage=stage, **kw)

    def with_yaw_reg(self, kind: str) -> "TrainConfig":
        return replace(self, reg_kind={**self.reg_kind, "yaw": kind})


def loss_and_grads(model: ToyModel, X, labels, cfg: TrainConfig):
    """Batch-mean loss summed over the three angles, and parameter gradients."""
    lab = np.asarray(labels, dtype=float).reshape(-1, 3)
    logits, (X, pre, h) = _forward(model, X)
    p = model.params
    total = 0.0
    grads = {}
    dh = np.zeros_like(h)
    for k, a in enumerate(ANGLES):
        loss, g = combined_loss(
            logits[a], lab[:, k], model.bins[a], cfg.weights, cfg.reg_kind[a], cfg.cls_kind
        )
        total += loss
        grads[f"W_{a}"] = h.T @ g
        grads[f"b_{a}"] = g.sum(axis=0)
        dh += g @ p[f"W_{a}"].T
    if not model.linear:
        dpre = dh * (pre > 0.0)
        grads["W1"] = X.T @ dpre
        grads["b1"] = dpre.sum(axis=0)
    return total, grads


def batch_loss(model: ToyModel, X, labels, cfg: TrainConfig) -> float:
    lab = np.asarray(labels, dtype=float).reshape(-1, 3)
    logits, _ = _forward(model, X)
    return sum(
        combined_loss(logits[a], lab[:, k], model.bins[a], cfg.weights, cfg.reg_kind[a], cfg.cls_kind)[0]
        for k, a in enumerate(ANGLES)
    )


def backward_check(
    model: ToyModel, X, labels, cfg: TrainConfig, n_params: int = 50, seed: int = 0, h: float = 1e-5
) -> float:
    """Max relative error between analytic and central-difference gradients
    on ``n_params`` randomly chosen parameters.

    The error is max|analytic - numeric| / max(|analytic|, |numeric|) over
    the chosen set.
    """
    _, grads = loss_and_grads(model, X, labels, cfg)
    rng = np.random.default_rng(seed)
    names = sorted(model.params)
    sizes = np.array([model.params[k].size for k in names])
    picks = rng.choice(int(sizes.sum()), size=min(n_params, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    analytic, numeric = [], []
    probe = model.copy()
    for flat in picks:
        j = int(np.searchsorted(offsets, flat, side="right") - 1)
        name, i = names[j], int(flat - offsets[j])
        arr = probe.params[name].reshape(-1)
        orig = arr[i]
        arr[i] = orig + h
        up = batch_loss(probe, X, labels, cfg)
        arr[i] = orig - h
        down = batch_loss(probe, X, labels, cfg)
        arr[i] = orig
        numeric.append((up - down) / (2 * h))
        analytic.append(grads[name].reshape(-1)[i])
    a, n = np.array(analytic), np.array(numeric)
    scale = max(np.max(np.abs(a)), np.max(np.abs(n)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - n)) / scale)


class Adam:
    def __init__(self, params: dict, lr: float, betas=(0.9, 0.999), eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, betas[0], betas[1], eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k in sorted(params):
            g = grads[k]
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def warm_start(narrow: ToyModel) -> ToyModel:
    """Full-range model from a narrow one: the 66 narrow yaw bins land on
    the 120-bin head's central bins covering (-99, 99]; the other 54 bins
    start at zero."""
    if narrow.bins["yaw"] != NARROW_YAW_BINS:
        raise ValueError("warm start expects a narrow-stage model")
    full = narrow.copy()
    full.bins = head_bins("full")
    offset = int(round((NARROW_YAW_BINS.lower_edge - YAW_BINS.lower_edge) / YAW_BINS.width))
    W, b = narrow.params["W_yaw"], narrow.params["b_yaw"]
    W_full = np.zeros((W.shape[0], YAW_BINS.count))
    b_full = np.zeros(YAW_BINS.count)
    W_full[:, offset : offset + NARROW_YAW_BINS.count] = W
    b_full[offset : offset + NARROW_YAW_BINS.count] = b
    full.params["W_yaw"], full.params["b_yaw"] = W_full, b_full
    return full


def smooth(trace, window: int = 32) -> np.ndarray:
    x = np.asarray(trace, dtype=float)
    if len(x) < window:
        return np.array([x.mean()]) if len(x) else x
    c = np.cumsum(np.concatenate([[0.0], x]))
    return (c[window:] - c[:-window]) / window


def train(cfg: TrainConfig, data: ToyData, model: ToyModel | None = None):
    """Minibatch Adam. Returns (model, per-step loss trace).

    Raises TrainingDiverged when the loss turns non-finite or stays above
    10x the first batch loss for 100 consecutive steps.
    """
    if model is None:
        model = init_model(cfg.seed, cfg.stage, cfg.hidden)
    else:
        model = model.copy()
    if model.bins != head_bins(cfg.stage):
        raise ValueError("model head sizes do not match the training stage")
    rng = np.random.default_rng([cfg.seed, 1])
    opt = Adam(model.params, cfg.lr, cfg.adam_betas, cfg.adam_eps)
    n = len(data)
    bs = min(cfg.batch_size, n)
    order = rng.permutation(n)
    pos = 0
    trace = []
    above = 0
    if cfg.lr_schedule not in ("constant", "cosine"):
        raise ValueError(f"unknown lr schedule {cfg.lr_schedule!r}")
    for step in range(cfg.steps):
        if cfg.lr_schedule == "cosine":
            opt.lr = 0.5 * cfg.lr * (1.0 + math.cos(math.pi * step / cfg.steps))
        if pos + bs > n:
            order, pos = rng.permutation(n), 0
        idx = order[pos : pos + bs]
        pos += bs
        loss, grads = loss_and_grads(model, data.features[idx], data.labels[idx], cfg)
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at step {len(trace)}")
        trace.append(loss)
        above = above + 1 if loss > 10.0 * trace[0] else 0
        if above >= 100:
            raise TrainingDiverged(f"loss above 10x initial for 100 steps (step {len(trace)})")
        opt.step(model.params, grads)
    return model, np.array(trace)


def train_two_stage(cfg_full: TrainConfig, narrow_data: ToyData, full_data: ToyData, narrow_steps: int | None = None):
    """Narrow-range pretraining, then full-range fine-tuning from its weights."""
    cfg_narrow = TrainConfig.for_stage(
        "narrow",
        steps=narrow_steps if narrow_steps is not None else cfg_full.steps,
        lr=cfg_full.lr,
        batch_size=cfg_full.batch_size,
        seed=cfg_full.seed,
        hidden=cfg_full.hidden,
        cls_kind=cfg_full.cls_kind,
        reg_kind=dict(cfg_full.reg_kind),
    )
    narrow, trace_n = train(cfg_narrow, narrow_data)
    full, trace_f = train(cfg_full, full_data, warm_start(narrow))
    return full, trace_n, trace_f


# -- wrapped vs squared yaw regression -------------------------------------------

HIGH_YAW = (150.0, 180.0)
LOW_YAW = (0.0, 30.0)


@dataclass
class LossComparison:
    """Held-out yaw errors of two models that differ only in yaw regression."""

    seed: int
    overall: dict[str, float]
    high: dict[str, float]  # |yaw| in [150, 180]
    low: dict[str, float]  # |yaw| < 30
    bands: dict[str, list]  # per-model BandStat list over 30 deg bands
    traces: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def high_ratio(self) -> float:
        return self.high["wrapped"] / self.high["mse"]

    @property
    def low_ratio(self) -> float:
        a, b = self.low["wrapped"], self.low["mse"]
        return max(a, b) / min(a, b)

    def worst_band(self, kind: str):
        return max(self.bands[kind], key=lambda b: b.yaw)


def _yaw_subset_mawe(pred_yaw, true_yaw, lo: float, hi: float, closed_low: bool) -> float:
    from .angles import mawe

    a = np.abs(true_yaw)
    sel = (a >= lo) & (a <= hi) if closed_low else (a >= lo) & (a < hi)
    return mawe(pred_yaw[sel], true_yaw[sel])


def compare_losses(
    seed: int = 42,
    cfg: TrainConfig | None = None,
    n_train: int = 20000,
    n_test: int = 20000,
) -> LossComparison:
    """Train wrapped- and mse-yaw models from the same seed, data and init."""
    from .angles import mawe
    from .metrics import angle_errors, band_means

    if cfg is None:
        cfg = TrainConfig.for_stage("full", steps=8000, seed=seed)
    train_data = gen_dataset(n_train, seed * 3 + 1)
    test_data = gen_dataset(n_test, seed * 3 + 2)
    y = test_data.labels[:, 1]
    out = LossComparison(seed, {}, {}, {}, {})
    for kind in ("wrapped", "mse"):
        model, trace = train(cfg.with_yaw_reg(kind), train_data)
        pred = predict(model, test_data.features)
        out.overall[kind] = mawe(pred[:, 1], y)
        out.high[kind] = _yaw_subset_mawe(pred[:, 1], y, *HIGH_YAW, closed_low=True)
        out.low[kind] = _yaw_subset_mawe(pred[:, 1], y, *LOW_YAW, closed_low=False)
        out.bands[kind] = band_means(y, angle_errors(test_data.labels, pred), 30.0)
        out.traces[kind] = trace
    return out


def write_comparison_csv(report: LossComparison, path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "subset", "lo", "hi", "count", "yaw_mawe"])
        for kind in ("wrapped", "mse"):
            w.writerow([kind, "all", "-180", "180", "", repr(report.overall[kind])])
            w.writerow([kind, "high", repr(HIGH_YAW[0]), repr(HIGH_YAW[1]), "", repr(report.high[kind])])
            w.writerow([kind, "low", repr(LOW_YAW[0]), repr(LOW_YAW[1]), "", repr(report.low[kind])])
            for b in report.bands[kind]:
                w.writerow([kind, "band", repr(b.lo), repr(b.hi), b.count, repr(b.yaw)])
