"""Interval abstraction of a classifier under a bounded parameter shift.

Every scalar parameter theta_i is replaced by the interval
[theta_i - delta, theta_i + delta]; forward propagation with interval
arithmetic then encloses the outputs of every model whose parameters sit in
that box.  Classification over output intervals is three-valued: a class is
assigned only when its logit interval dominates, otherwise the verdict is
undefined.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import LogisticModel, ParametricModel, as_feature_vector

__all__ = [
    "ShiftSet",
    "IntervalLayer",
    "IntervalModel",
    "IntervalVerdict",
    "abstract",
    "interval_forward",
    "interval_classify_binary",
    "interval_classify_multi",
    "interval_classify",
    "softmax_interval",
    "sigmoid",
]

SUPPORTED_P = (1, 2, float("inf"))


def _norm_p(p):
    if p in ("inf", "Inf", "INF", np.inf):
        return float("inf")
    p = float(p)
    if p == float("inf"):
        return p
    if p not in (1.0, 2.0):
        raise ValueError("supported norm orders are 1, 2 and inf")
    return p


@dataclass(frozen=True)
class ShiftSet:
    """Bounded set of parameter shifts: p-norm of the change at most delta."""

    p: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "p", _norm_p(self.p))
        d = float(self.delta)
        if not np.isfinite(d) or d < 0:
            raise ValueError("delta must be finite and >= 0 (0 is the degenerate no-shift case)")
        object.__setattr__(self, "delta", d)

    def to_dict(self) -> dict:
        return {"p": "inf" if self.p == float("inf") else int(self.p), "delta": self.delta}

    @classmethod
    def from_dict(cls, doc: dict) -> "ShiftSet":
        return cls(p=doc["p"], delta=doc["delta"])


@dataclass(frozen=True)
class IntervalLayer:
    w_lo: np.ndarray
    w_hi: np.ndarray
    b_lo: np.ndarray | None
    b_hi: np.ndarray | None


@dataclass(frozen=True)
class IntervalModel:
    """Same architecture as the source model, interval-valued parameters."""

    source_type: str  # "logistic" | "relu_network"
    layers: tuple[IntervalLayer, ...]
    delta: float

    @property
    def input_dim(self) -> int:
        return self.layers[0].w_lo.shape[1]

    @property
    def num_outputs(self) -> int:
        return self.layers[-1].w_lo.shape[0]

    @property
    def num_classes(self) -> int:
        return 2 if self.num_outputs == 1 else self.num_outputs


@dataclass(frozen=True)
class IntervalVerdict:
    """Three-valued interval classification plus the intervals behind it.

    ``label`` is the assigned class, or ``None`` when no class dominates
    (the undefined case).  ``lo``/``hi`` are the per-logit output intervals.
    """

    label: int | None
    lo: np.ndarray
    hi: np.ndarray

    @property
    def undefined(self) -> bool:
        return self.label is None


def abstract(model: ParametricModel, shift: ShiftSet) -> IntervalModel:
    """Widen every parameter (weights and biases alike) by +/- delta."""
    d = shift.delta
    if isinstance(model, LogisticModel):
        w = model.weights.reshape(1, -1)
        b_lo = b_hi = None
        if model.bias is not None:
            b_lo = np.array([model.bias - d])
            b_hi = np.array([model.bias + d])
        layer = IntervalLayer(w_lo=w - d, w_hi=w + d, b_lo=b_lo, b_hi=b_hi)
        return IntervalModel(source_type="logistic", layers=(layer,), delta=d)
    layers = []
    for layer in model.layers:
        b_lo = b_hi = None
        if layer.bias is not None:
            b_lo = layer.bias - d
            b_hi = layer.bias + d
        layers.append(
            IntervalLayer(w_lo=layer.weights - d, w_hi=layer.weights + d, b_lo=b_lo, b_hi=b_hi)
        )
    return IntervalModel(source_type="relu_network", layers=tuple(layers), delta=d)


def _interval_matvec(w_lo, w_hi, v_lo, v_hi):
    """Sound product of an interval matrix with an interval vector."""
    p1 = w_lo * v_lo
    p2 = w_lo * v_hi
    p3 = w_hi * v_lo
    p4 = w_hi * v_hi
    lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4)).sum(axis=1)
    hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4)).sum(axis=1)
    return lo, hi


def interval_affine(layer: IntervalLayer, v_lo, v_hi):
    lo, hi = _interval_matvec(layer.w_lo, layer.w_hi, v_lo[None, :], v_hi[None, :])
    if layer.b_lo is not None:
        lo = lo + layer.b_lo
        hi = hi + layer.b_hi
    return lo, hi


def interval_forward(im: IntervalModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Pre-squash logit intervals enclosing every box-shifted model at x."""
    v_lo = v_hi = as_feature_vector(x, im.input_dim)
    for i, layer in enumerate(im.layers):
        v_lo, v_hi = interval_affine(layer, v_lo, v_hi)
        if i < len(im.layers) - 1:
            v_lo = np.maximum(v_lo, 0.0)
            v_hi = np.maximum(v_hi, 0.0)
    return v_lo, v_hi


def interval_classify_binary(im: IntervalModel, x) -> IntervalVerdict:
    """Class 1 when the whole logit interval is >= 0, class 0 when < 0."""
    if im.num_outputs != 1:
        raise ValueError("binary interval classification needs a single logit")
    lo, hi = interval_forward(im, x)
    if lo[0] >= 0.0:
        label = 1
    elif hi[0] < 0.0:
        label = 0
    else:
        label = None
    return IntervalVerdict(label=label, lo=lo, hi=hi)


def interval_classify_multi(im: IntervalModel, x) -> IntervalVerdict:
    """Class c when its logit lower bound dominates every other upper bound."""
    if im.num_outputs < 2:
        raise ValueError("multi-class interval classification needs >= 2 logits")
    lo, hi = interval_forward(im, x)
    label = dominant_class(lo, hi)
    return IntervalVerdict(label=label, lo=lo, hi=hi)


def dominant_class(lo: np.ndarray, hi: np.ndarray) -> int | None:
    """First class whose lower bound >= all other upper bounds, else None."""
    n = lo.size
    for c in range(n):
        others = np.delete(hi, c)
        if lo[c] >= others.max():
            return c + 1
    return None


def interval_classify(im: IntervalModel, x) -> IntervalVerdict:
    if im.num_outputs == 1:
        return interval_classify_binary(im, x)
    return interval_classify_multi(im, x)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax_interval(lo, hi) -> tuple[np.ndarray, np.ndarray]:
    """Sound per-class probability enclosure of softmax over logit boxes.

    Lower bound of class c pits its own lower endpoint against everyone
    else's upper endpoints (and vice versa); reporting-level only.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.size < 2:
        raise ValueError("softmax needs >= 2 logits")
    shift = hi.max()  # overflow guard
    e_lo = np.exp(lo - shift)
    e_hi = np.exp(hi - shift)
    p_lo = np.empty_like(lo)
    p_hi = np.empty_like(hi)
    for c in range(lo.size):
        other_hi = e_hi.sum() - e_hi[c]
        other_lo = e_lo.sum() - e_lo[c]
        p_lo[c] = e_lo[c] / (e_lo[c] + other_hi)
        p_hi[c] = e_hi[c] / (e_hi[c] + other_lo)
    return p_lo, p_hi
