"""Feed-forward sigmoid network trained by per-sample backpropagation.

The traffic predictor is deliberately plain: every layer applies
sigmoid(W a - theta) with thresholds rather than biases, training walks
the samples one at a time and descends each sample's squared error, and
the whole thing is deterministic for a fixed seed.  Resilient
backpropagation (Rprop) is available as an alternative update rule via
``TrainConfig.algorithm``.

For day-ahead traffic prediction, 24 independent hour models are
trained on sliding five-day windows pooled across stations, then fed
the most recent five days to produce the next day's hourly amounts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (InputError, InsufficientHistoryError,
                     TrainingDivergenceError, ValidationError)

DEFAULT_HIDDEN_LAYERS = (20, 10)
WINDOW_DAYS = 5
HOURS_PER_DAY = 24
INIT_SPAN = 0.5          # initial weights/thresholds uniform in [-span, span]

RPROP_STEP0 = 0.1
RPROP_GROW = 1.2
RPROP_SHRINK = 0.5
RPROP_STEP_MIN = 1e-9
RPROP_STEP_MAX = 50.0

_MLP_MAGIC = "skyplan-mlp 1"


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500.0, 500.0)))


@dataclass
class TrainConfig:
    """Knobs of the per-sample training loop.

    Training stops when the epoch cap is reached or the mean
    per-sample error drops below ``error_threshold`` (checked after
    each epoch).
    """

    learning_rate: float = 0.1
    max_epochs: int = 100
    error_threshold: float = 0.0
    rng_seed: int = 0
    shuffle: bool = False
    algorithm: str = "sgd"   # "sgd" (per-sample descent) or "rprop" (batch)

    def __post_init__(self):
        if not 0.0 < self.learning_rate < 1.0:
            raise ValidationError("learning_rate must be in (0, 1)")
        if self.max_epochs < 1:
            raise ValidationError("max_epochs must be >= 1")
        if self.algorithm not in ("sgd", "rprop"):
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")


class Mlp:
    """Layered weights and thresholds; all activations are sigmoid."""

    def __init__(self, layer_sizes, weights, thresholds):
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        if len(self.layer_sizes) < 2 or any(s < 1 for s in self.layer_sizes):
            raise ValidationError("layer_sizes needs >= 2 positive entries")
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.thresholds = [np.asarray(t, dtype=float) for t in thresholds]
        expected = list(zip(self.layer_sizes[1:], self.layer_sizes[:-1]))
        if [w.shape for w in self.weights] != expected:
            raise ValidationError("weight shapes inconsistent with layer_sizes")
        if [t.shape for t in self.thresholds] != [(s,) for s in self.layer_sizes[1:]]:
            raise ValidationError("threshold shapes inconsistent with layer_sizes")

    @classmethod
    def random(cls, layer_sizes, rng: np.random.Generator) -> "Mlp":
        sizes = tuple(layer_sizes)
        weights = [rng.uniform(-INIT_SPAN, INIT_SPAN, size=(o, i))
                   for i, o in zip(sizes[:-1], sizes[1:])]
        thresholds = [rng.uniform(-INIT_SPAN, INIT_SPAN, size=o) for o in sizes[1:]]
        return cls(sizes, weights, thresholds)

    def copy(self) -> "Mlp":
        return Mlp(self.layer_sizes,
                   [w.copy() for w in self.weights],
                   [t.copy() for t in self.thresholds])

    def is_finite(self) -> bool:
        return (all(np.isfinite(w).all() for w in self.weights)
                and all(np.isfinite(t).all() for t in self.thresholds))

    def activations(self, x: np.ndarray) -> list[np.ndarray]:
        """Per-layer outputs [input, hidden..., output] for one sample."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.layer_sizes[0],):
            raise ValidationError(
                f"input length {x.shape} does not match input layer "
                f"({self.layer_sizes[0]},)")
        acts = [x]
        for w, t in zip(self.weights, self.thresholds):
            acts.append(sigmoid(w @ acts[-1] - t))
        return acts

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Network output for one sample (1-D) or a batch (2-D, row-major)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.activations(x)[-1]
        if x.ndim != 2 or x.shape[1] != self.layer_sizes[0]:
            raise ValidationError("batch input must be (N, input_size)")
        a = x
        for w, t in zip(self.weights, self.thresholds):
            a = sigmoid(a @ w.T - t)
        return a

    def gradients(self, x, y):
        """(dE/dW list, dE/dtheta list, E) for one sample, E = 0.5 ||out - y||^2."""
        y = np.asarray(y, dtype=float)
        acts = self.activations(x)
        out = acts[-1]
        if y.shape != out.shape:
            raise ValidationError("target shape does not match output layer")
        err = 0.5 * float(((out - y) ** 2).sum())

        grad_w = [None] * len(self.weights)
        grad_t = [None] * len(self.thresholds)
        # delta = -dE/d(pre-activation); output layer: out(1-out)(y-out)
        delta = out * (1.0 - out) * (y - out)
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = -np.outer(delta, acts[layer])
            grad_t[layer] = delta.copy()
            if layer > 0:
                back = self.weights[layer].T @ delta
                a = acts[layer]
                delta = a * (1.0 - a) * back
        return grad_w, grad_t, err

    def save(self, path, normalizer: "Normalizer | None" = None) -> None:
        """Versioned flat-text dump (layer sizes, row-major weights, thresholds)."""
        lines = [_MLP_MAGIC, "layers " + " ".join(str(s) for s in self.layer_sizes)]
        for i, (w, t) in enumerate(zip(self.weights, self.thresholds)):
            lines.append(f"weights {i} " + " ".join(repr(float(v)) for v in w.ravel()))
            lines.append(f"thresholds {i} " + " ".join(repr(float(v)) for v in t))
        if normalizer is not None:
            lines.append("norm_min " + " ".join(repr(float(v)) for v in normalizer.min_vals))
            lines.append("norm_max " + " ".join(repr(float(v)) for v in normalizer.max_vals))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> tuple["Mlp", "Normalizer | None"]:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = [ln.strip() for ln in fh if ln.strip()]
        except OSError as exc:
            raise InputError(f"cannot read model file {path}: {exc}") from exc
        if not lines or lines[0] != _MLP_MAGIC:
            raise ValidationError(f"{path}: not a '{_MLP_MAGIC}' file")
        if not lines[1].startswith("layers "):
            raise ValidationError(f"{path}: missing layers line")
        sizes = tuple(int(v) for v in lines[1].split()[1:])
        weights, thresholds = [], []
        norm_min = norm_max = None
        for line in lines[2:]:
            kind, rest = line.split(" ", 1)
            if kind == "weights":
                idx, *vals = rest.split()
                o, i = sizes[int(idx) + 1], sizes[int(idx)]
                weights.append(np.array([float(v) for v in vals]).reshape(o, i))
            elif kind == "thresholds":
                _, *vals = rest.split()
                thresholds.append(np.array([float(v) for v in vals]))
            elif kind == "norm_min":
                norm_min = np.array([float(v) for v in rest.split()])
            elif kind == "norm_max":
                norm_max = np.array([float(v) for v in rest.split()])
            else:
                raise ValidationError(f"{path}: unknown record {kind!r}")
        net = cls(sizes, weights, thresholds)
        norm = None
        if norm_min is not None and norm_max is not None:
            norm = Normalizer(norm_min, norm_max)
        return net, norm


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def backprop_step(net: Mlp, x, y, learning_rate: float) -> float:
    """One in-place gradient-descent update on a single sample.

    Returns the sample error at the pre-update parameters.
    """
    grad_w, grad_t, err = net.gradients(x, y)
    for layer in range(len(net.weights)):
        net.weights[layer] -= learning_rate * grad_w[layer]
        net.thresholds[layer] -= learning_rate * grad_t[layer]
    return err


def mean_error(net: Mlp, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean over samples of 0.5 ||out - y||^2."""
    out = net.forward(np.atleast_2d(inputs))
    t = np.atleast_2d(targets)
    return float(0.5 * ((out - t) ** 2).sum(axis=1).mean())


def _batch_gradients(net: Mlp, inputs, targets):
    gw = [np.zeros_like(w) for w in net.weights]
    gt = [np.zeros_like(t) for t in net.thresholds]
    for x, y in zip(inputs, targets):
        dw, dt, _ = net.gradients(x, y)
        for layer in range(len(gw)):
            gw[layer] += dw[layer]
            gt[layer] += dt[layer]
    return gw, gt


class _RpropState:
    """iRprop- bookkeeping: per-parameter steps and previous gradient signs."""

    def __init__(self, net: Mlp):
        self.step_w = [np.full_like(w, RPROP_STEP0) for w in net.weights]
        self.step_t = [np.full_like(t, RPROP_STEP0) for t in net.thresholds]
        self.prev_w = [np.zeros_like(w) for w in net.weights]
        self.prev_t = [np.zeros_like(t) for t in net.thresholds]

    @staticmethod
    def _update(param, grad, prev, step):
        sign_change = grad * prev
        step[sign_change > 0] = np.minimum(step[sign_change > 0] * RPROP_GROW,
                                           RPROP_STEP_MAX)
        step[sign_change < 0] = np.maximum(step[sign_change < 0] * RPROP_SHRINK,
                                           RPROP_STEP_MIN)
        grad = grad.copy()
        grad[sign_change < 0] = 0.0
        param -= np.sign(grad) * step
        prev[...] = grad

    def apply(self, net: Mlp, gw, gt):
        for layer in range(len(net.weights)):
            self._update(net.weights[layer], gw[layer],
                         self.prev_w[layer], self.step_w[layer])
            self._update(net.thresholds[layer], gt[layer],
                         self.prev_t[layer], self.step_t[layer])


def train(net: Mlp, dataset, cfg: TrainConfig,
          val_set=None, early_stop: bool = False,
          patience: int = 10) -> tuple[Mlp, list[float]]:
    """Train in place until the epoch cap or the error threshold is met.

    ``dataset`` is a sequence of (input, target) pairs.  The returned
    trace holds the mean per-sample error evaluated after each epoch.
    With ``early_stop`` and a validation set, training also stops once
    the validation error has not improved for ``patience`` epochs.
    Deterministic for a fixed ``cfg.rng_seed``.
    """
    if len(dataset) == 0:
        raise ValidationError("dataset must be nonempty")
    inputs = np.array([np.asarray(x, dtype=float) for x, _ in dataset])
    targets = np.array([np.atleast_1d(np.asarray(y, dtype=float)) for _, y in dataset])
    rng = np.random.default_rng(cfg.rng_seed)

    val_inputs = val_targets = None
    if val_set is not None and len(val_set) > 0:
        val_inputs = np.array([np.asarray(x, dtype=float) for x, _ in val_set])
        val_targets = np.array([np.atleast_1d(np.asarray(y, dtype=float))
                                for _, y in val_set])

    rprop = _RpropState(net) if cfg.algorithm == "rprop" else None
    trace: list[float] = []
    best_val = math.inf
    stale = 0

    for epoch in range(1, cfg.max_epochs + 1):
        if rprop is not None:
            gw, gt = _batch_gradients(net, inputs, targets)
            rprop.apply(net, gw, gt)
        else:
            order = rng.permutation(len(inputs)) if cfg.shuffle else range(len(inputs))
            for i in order:
                backprop_step(net, inputs[i], targets[i], cfg.learning_rate)

        if not net.is_finite():
            raise TrainingDivergenceError(epoch)
        trace.append(mean_error(net, inputs, targets))
        if trace[-1] < cfg.error_threshold:
            break
        if early_stop and val_inputs is not None:
            val_err = mean_error(net, val_inputs, val_targets)
            if val_err < best_val - 1e-12:
                best_val = val_err
                stale = 0
            else:
                stale += 1
                if stale >= patience:
                    break
    return net, trace


# ---------------------------------------------------------------------------
# Min-max normalization
# ---------------------------------------------------------------------------

@dataclass
class Normalizer:
    """Per-feature min-max scaling to [0, 1].

    Constant features map to 0.5; ``invert`` is exact for non-constant
    features and returns the constant for constant ones.
    """

    min_vals: np.ndarray
    max_vals: np.ndarray

    def __post_init__(self):
        self.min_vals = np.atleast_1d(np.asarray(self.min_vals, dtype=float))
        self.max_vals = np.atleast_1d(np.asarray(self.max_vals, dtype=float))
        if self.min_vals.shape != self.max_vals.shape:
            raise ValidationError("min/max shapes differ")
        if np.any(self.max_vals < self.min_vals):
            raise ValidationError("max must be >= min per feature")

    @property
    def span(self) -> np.ndarray:
        return self.max_vals - self.min_vals

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        span = self.span
        safe = np.where(span > 0, span, 1.0)
        scaled = (values - self.min_vals) / safe
        return np.where(span > 0, scaled, 0.5)

    def invert(self, scaled: np.ndarray) -> np.ndarray:
        scaled = np.asarray(scaled, dtype=float)
        return self.min_vals + scaled * self.span


def fit_normalizer(series: np.ndarray) -> Normalizer:
    """Column-wise min/max of a nonempty (N, F) matrix (or 1-D vector)."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValidationError("cannot fit a normalizer on empty data")
    if series.ndim == 1:
        series = series[:, None]
    return Normalizer(series.min(axis=0), series.max(axis=0))


# ---------------------------------------------------------------------------
# Day-ahead traffic prediction
# ---------------------------------------------------------------------------

@dataclass
class PredictionResult:
    """Next-day prediction per station and hour, plus training diagnostics."""

    values: np.ndarray              # (n_stations, 24), clamped at >= 0
    final_train_error: np.ndarray   # (24,) last trace entry per hour model
    test_error: np.ndarray          # (24,) held-out mean error (NaN if no split)
    models: list = field(default_factory=list, repr=False)
    normalizers: list = field(default_factory=list, repr=False)


def _hour_samples(hour_values: np.ndarray):
    """Sliding windows over days: five inputs, the following day as target."""
    n_stations, n_days = hour_values.shape
    xs, ys = [], []
    for s in range(n_stations):
        for d in range(n_days - WINDOW_DAYS):
            xs.append(hour_values[s, d:d + WINDOW_DAYS])
            ys.append(hour_values[s, d + WINDOW_DAYS:d + WINDOW_DAYS + 1])
    return np.array(xs), np.array(ys)


def predict_next_day(history: np.ndarray, cfg: TrainConfig,
                     hidden_layers=DEFAULT_HIDDEN_LAYERS,
                     pooled: bool = True,
                     early_stop: bool = False,
                     val_frac: float = 0.1,
                     test_frac: float = 0.1) -> PredictionResult:
    """Predict each hour of the next day from per-station daily history.

    ``history`` is (n_stations, n_days, 24) with n_days >= 6.  Each of
    the 24 hours gets its own network (default 5-20-10-1) trained on
    the pooled sliding windows of all stations; the most recent five
    days then yield the next day's value per station.  Values are
    min-max normalized per hour before training and denormalized (and
    clamped at zero) on the way out.

    Every hour model draws from a fresh generator seeded with
    ``cfg.rng_seed``, so hours are fully independent: permuting the
    hour axis of the input permutes the prediction columns identically.

    With ``pooled=False`` a separate network is trained per station
    (needs several window samples per station to be meaningful).
    """
    history = np.asarray(history, dtype=float)
    if history.ndim != 3 or history.shape[2] != HOURS_PER_DAY:
        raise ValidationError("history must be (n_stations, n_days, 24)")
    n_stations, n_days, _ = history.shape
    if n_days < WINDOW_DAYS + 1:
        raise InsufficientHistoryError(
            f"need at least {WINDOW_DAYS + 1} days of history, got {n_days}")
    if not np.isfinite(history).all():
        raise ValidationError("history contains NaN or inf")

    values = np.zeros((n_stations, HOURS_PER_DAY))
    final_err = np.zeros(HOURS_PER_DAY)
    test_err = np.full(HOURS_PER_DAY, np.nan)
    models, normalizers = [], []
    layer_sizes = (WINDOW_DAYS, *hidden_layers, 1)

    for hour in range(HOURS_PER_DAY):
        rng = np.random.default_rng(cfg.rng_seed)
        hour_values = history[:, :, hour]
        norm = fit_normalizer(hour_values.reshape(-1, 1))
        scaled = norm.apply(hour_values.reshape(-1, 1)).reshape(hour_values.shape)

        if pooled:
            groups = [scaled]
        else:
            groups = [scaled[s:s + 1] for s in range(n_stations)]

        hour_models = []
        errs, tests = [], []
        for group in groups:
            xs, ys = _hour_samples(group)
            idx = rng.permutation(len(xs))
            n_test = int(len(xs) * test_frac)
            n_val = int(len(xs) * val_frac)
            test_idx = idx[:n_test]
            val_idx = idx[n_test:n_test + n_val]
            train_idx = idx[n_test + n_val:]
            if len(train_idx) == 0:
                train_idx = idx
                val_idx = test_idx = idx[:0]

            net = Mlp.random(layer_sizes, rng)
            _, trace = train(
                net,
                list(zip(xs[train_idx], ys[train_idx])),
                cfg,
                val_set=list(zip(xs[val_idx], ys[val_idx])) if len(val_idx) else None,
                early_stop=early_stop,
            )
            errs.append(trace[-1])
            if len(test_idx):
                tests.append(mean_error(net, xs[test_idx], ys[test_idx]))
            hour_models.append(net)

        latest = scaled[:, -WINDOW_DAYS:]
        if pooled:
            out = hour_models[0].forward(latest)[:, 0]
        else:
            out = np.array([hour_models[s].forward(latest[s])[0]
                            for s in range(n_stations)])
        values[:, hour] = np.maximum(norm.invert(out[:, None])[:, 0], 0.0)
        final_err[hour] = float(np.mean(errs))
        if tests:
            test_err[hour] = float(np.mean(tests))
        models.append(hour_models[0] if pooled else hour_models)
        normalizers.append(norm)

    return PredictionResult(values=values, final_train_error=final_err,
                            test_error=test_err, models=models,
                            normalizers=normalizers)
