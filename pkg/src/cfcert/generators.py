"""Counterfactual generators.

Plain baselines (exact MILP-based minimum-distance, projected proximal
gradient descent, nearest training neighbour) plus the robust variants: an
iterative wrapper that retries the base generator with a relaxed
cost/validity trade-off until the verifier signs off, and the robust
nearest-neighbour method that queries a k-d tree of candidates and
optionally refines the hit with a line search towards the query.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .intervals import ShiftSet
from .kdtree import KDTree, l1_distance
from .milp import DEFAULT_NODE_LIMIT, branch_and_bound, encode_nearest_ce
from .models import (
    LogisticModel,
    ParametricModel,
    as_feature_vector,
    classify,
    classify_batch,
    forward,
)
from .verifier import is_delta_robust

__all__ = [
    "CounterfactualRecord",
    "mce",
    "gce",
    "nnce",
    "iterative_robustify",
    "mce_robust",
    "gce_robust",
    "get_candidates",
    "get_robust_ce",
    "rnce",
]

LINE_SEARCH_START = 1.0
LINE_SEARCH_STEP = 0.05


@dataclass
class CounterfactualRecord:
    """A candidate counterfactual with provenance.

    ``trace`` carries the per-round knob values of iterative methods (margin
    or trade-off weight), so failed robustification runs stay inspectable.
    """

    method: str
    target_class: int
    found: bool
    x_prime: np.ndarray | None = None
    distance: float | None = None
    robust: bool | None = None
    shift: ShiftSet | None = None
    iterations: int = 1
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "target_class": self.target_class,
            "found": self.found,
            "x_prime": None if self.x_prime is None else [float(v) for v in self.x_prime],
            "distance": self.distance,
            "robust": self.robust,
            "shift": None if self.shift is None else self.shift.to_dict(),
            "iterations": self.iterations,
            "trace": self.trace,
        }


def _not_found(method: str, target: int, shift=None, iterations=1, trace=None) -> CounterfactualRecord:
    return CounterfactualRecord(
        method=method,
        target_class=target,
        found=False,
        shift=shift,
        iterations=iterations,
        trace=trace or [],
    )


def mce(
    model: ParametricModel,
    x,
    target: int,
    margin: float = 0.0,
    box=None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> CounterfactualRecord:
    """Exact minimum normalised-L1 counterfactual with a target logit margin."""
    x = as_feature_vector(x, model.input_dim)
    enc = encode_nearest_ce(model, x, target, margin=margin, box=box)
    res = branch_and_bound(enc.problem, node_limit=node_limit)
    if not res.optimal:
        return _not_found("mce", target)
    x_prime = res.x[enc.var_index["x"]].copy()
    return CounterfactualRecord(
        method="mce",
        target_class=target,
        found=True,
        x_prime=x_prime,
        distance=l1_distance(x_prime, x),
        trace=[margin],
    )


def _score_and_grad(model: ParametricModel, x: np.ndarray, target: int):
    """Validity score (positive iff comfortably in the target class) and its
    input gradient; multi-class uses the margin to the runner-up logit."""
    if isinstance(model, LogisticModel):
        z = forward(model, x)[0]
        if target == 1:
            return z, model.weights.copy()
        return -z, -model.weights
    # Forward pass caching ReLU masks.
    masks = []
    v = x
    for layer in model.layers[:-1]:
        pre = layer.weights @ v
        if layer.bias is not None:
            pre = pre + layer.bias
        masks.append(pre > 0)
        v = np.maximum(pre, 0.0)
    last = model.layers[-1]
    logits = last.weights @ v
    if last.bias is not None:
        logits = logits + last.bias

    if model.num_outputs == 1:
        out_vec = np.array([1.0 if target == 1 else -1.0])
        score = logits[0] if target == 1 else -logits[0]
    else:
        t0 = target - 1
        others = np.delete(np.arange(model.num_outputs), t0)
        runner = others[int(np.argmax(logits[others]))]
        out_vec = np.zeros(model.num_outputs)
        out_vec[t0] = 1.0
        out_vec[runner] = -1.0
        score = logits[t0] - logits[runner]

    g = out_vec
    for i in range(len(model.layers) - 1, -1, -1):
        g = model.layers[i].weights.T @ g
        if i > 0:
            g = g * masks[i - 1]
    return score, g


def _soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def gce(
    model: ParametricModel,
    x,
    target: int,
    lam: float = 0.1,
    step: float = 0.1,
    max_iters: int = 500,
    margin: float = 0.0,
) -> CounterfactualRecord:
    """Proximal gradient descent on hinge(margin - score) + lam * L1/n,
    projected to the unit box; returns the best valid iterate."""
    x = as_feature_vector(x, model.input_dim)
    n = x.size
    x_cur = x.copy()
    best = None
    best_dist = np.inf
    for it in range(max_iters + 1):
        if classify(model, x_cur) == target:
            d = l1_distance(x_cur, x)
            if d < best_dist:
                best = x_cur.copy()
                best_dist = d
        if it == max_iters:
            break
        score, grad = _score_and_grad(model, x_cur, target)
        hinge_grad = -grad if score < margin else np.zeros_like(grad)
        z = x_cur - step * hinge_grad
        x_cur = np.clip(x + _soft_threshold(z - x, lam * step / n), 0.0, 1.0)
    if best is None:
        return _not_found("gce", target, iterations=max_iters, trace=[lam])
    return CounterfactualRecord(
        method="gce",
        target_class=target,
        found=True,
        x_prime=best,
        distance=best_dist,
        iterations=max_iters,
        trace=[lam],
    )


def nnce(model: ParametricModel, X, x, target: int) -> CounterfactualRecord:
    """Nearest training point classified to the target class."""
    X = np.asarray(X, dtype=np.float64)
    x = as_feature_vector(x, model.input_dim)
    valid = classify_batch(model, X) == target
    if not valid.any():
        return _not_found("nnce", target)
    idx = np.flatnonzero(valid)
    # Same distance expression as the k-d tree so orderings agree bitwise.
    dists = np.array([l1_distance(X[i], x) for i in idx])
    pos = int(np.argmin(dists))  # argmin takes the lowest index on ties
    return CounterfactualRecord(
        method="nnce",
        target_class=target,
        found=True,
        x_prime=X[idx[pos]].copy(),
        distance=float(dists[pos]),
    )


def iterative_robustify(
    base_generate,
    model: ParametricModel,
    shift: ShiftSet,
    x,
    target: int,
    max_rounds: int = 10,
    node_limit: int = DEFAULT_NODE_LIMIT,
    method: str = "robustified",
) -> CounterfactualRecord:
    """Retry a base generator with relaxed knobs until the verifier passes.

    ``base_generate(round_index)`` must return a (record, knob) pair.  On
    success the robust counterfactual is returned immediately; once the round
    budget is exhausted the last counterfactual found is returned flagged
    not robust, preserving the incompleteness of the underlying scheme.
    """
    last = None
    trace = []
    for k in range(max_rounds):
        record, knob = base_generate(k)
        trace.append(knob)
        if not record.found:
            continue
        last = record
        verdict = is_delta_robust(model, shift, record.x_prime, target=target, node_limit=node_limit)
        if verdict.robust:
            return CounterfactualRecord(
                method=method,
                target_class=target,
                found=True,
                x_prime=record.x_prime,
                distance=record.distance,
                robust=True,
                shift=shift,
                iterations=k + 1,
                trace=trace,
            )
    if last is None:
        return _not_found(method, target, shift=shift, iterations=max_rounds, trace=trace)
    return CounterfactualRecord(
        method=method,
        target_class=target,
        found=True,
        x_prime=last.x_prime,
        distance=last.distance,
        robust=False,
        shift=shift,
        iterations=max_rounds,
        trace=trace,
    )


def mce_robust(
    model: ParametricModel,
    shift: ShiftSet,
    x,
    target: int,
    margin_step: float = 0.1,
    max_rounds: int = 10,
    box=None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> CounterfactualRecord:
    """MCE wrapped in the iterative scheme: the logit margin grows by
    ``margin_step`` per round, starting from zero."""

    def base(k):
        margin = k * margin_step
        return mce(model, x, target, margin=margin, box=box, node_limit=node_limit), margin

    return iterative_robustify(
        base, model, shift, x, target, max_rounds, node_limit, method="mce-r"
    )


def gce_robust(
    model: ParametricModel,
    shift: ShiftSet,
    x,
    target: int,
    lam: float = 0.1,
    step: float = 0.1,
    max_iters: int = 500,
    max_rounds: int = 10,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> CounterfactualRecord:
    """GCE wrapped in the iterative scheme: the trade-off weight halves per
    round, allowing costlier but more confidently classified iterates."""

    def base(k):
        lam_k = lam / (2.0**k)
        return gce(model, x, target, lam=lam_k, step=step, max_iters=max_iters), lam_k

    return iterative_robustify(
        base, model, shift, x, target, max_rounds, node_limit, method="gce-r"
    )


def get_candidates(
    model: ParametricModel,
    X,
    x,
    shift: ShiftSet,
    target: int | None = None,
    robust_init: bool = False,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> np.ndarray:
    """Indices of training rows eligible as counterfactual candidates.

    Without ``robust_init`` a row qualifies when the point model classifies
    it to the target class; with it the row must additionally pass the
    robustness test.  (Robustness implies target-class point classification,
    so the point filter is applied first in both modes.)
    """
    X = np.asarray(X, dtype=np.float64)
    if target is None:
        if model.num_outputs != 1:
            raise ValueError("multi-class candidate selection needs a target class")
        target = 1 - classify(model, x)
    idx = np.flatnonzero(classify_batch(model, X) == target)
    if not robust_init or shift.delta == 0.0:
        return idx
    keep = [
        i
        for i in idx
        if is_delta_robust(model, shift, X[i], target=target, node_limit=node_limit).robust
    ]
    return np.asarray(keep, dtype=np.int64)


def get_robust_ce(
    model: ParametricModel,
    shift: ShiftSet,
    tree: KDTree,
    x,
    target: int,
    optimal: bool = False,
    candidates_verified: bool = False,
    line_step: float = LINE_SEARCH_STEP,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> CounterfactualRecord:
    """Walk the tree outward until a robust candidate appears; optionally
    refine it with a line search towards the query.

    The line search scans the fixed segment between the query and the chosen
    neighbour with interpolation weight a = 1, 1 - s, 1 - 2s, ..., keeping
    the last interpolant that passes the robustness test.
    """
    x = as_feature_vector(x, model.input_dim)
    x_prime = None
    queries = 0
    for idx, _dist in tree.neighbors(x):
        queries += 1
        candidate = tree.points[idx]
        if shift.delta == 0.0:
            ok = classify(model, candidate) == target
        elif candidates_verified:
            ok = True
        else:
            ok = is_delta_robust(model, shift, candidate, target=target, node_limit=node_limit).robust
        if ok:
            x_prime = candidate.copy()
            break
    if x_prime is None:
        return _not_found("rnce", target, shift=shift, iterations=queries)
    if optimal:
        anchor = x_prime.copy()
        k = 1
        a = LINE_SEARCH_START - line_step
        while a > 1e-12:
            x_line = a * anchor + (1.0 - a) * x
            robust = (
                classify(model, x_line) == target
                if shift.delta == 0.0
                else is_delta_robust(model, shift, x_line, target=target, node_limit=node_limit).robust
            )
            if robust:
                x_prime = x_line
            k += 1
            a = LINE_SEARCH_START - k * line_step
    return CounterfactualRecord(
        method="rnce",
        target_class=target,
        found=True,
        x_prime=x_prime,
        distance=l1_distance(x_prime, x),
        robust=True,
        shift=shift,
        iterations=queries,
    )


def rnce(
    model: ParametricModel,
    X,
    x,
    shift: ShiftSet,
    target: int | None = None,
    robust_init: bool = False,
    optimal: bool = False,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> CounterfactualRecord:
    """Robust nearest-neighbour counterfactual: filter candidates, fit a k-d
    tree, query outward for a certified hit, optionally line-search refine.

    Sound by construction (only verified points are returned) and complete
    whenever some target-class training point passes the robustness test.
    """
    X = np.asarray(X, dtype=np.float64)
    x = as_feature_vector(x, model.input_dim)
    if target is None:
        if model.num_outputs != 1:
            raise ValueError("multi-class rnce needs a target class")
        target = 1 - classify(model, x)
    idx = get_candidates(
        model, X, x, shift, target=target, robust_init=robust_init, node_limit=node_limit
    )
    flags = f"{'t' if robust_init else 'f'}{'t' if optimal else 'f'}"
    if idx.size == 0:
        return _not_found(f"rnce-{flags}", target, shift=shift)
    tree = KDTree(X[idx])
    record = get_robust_ce(
        model,
        shift,
        tree,
        x,
        target,
        optimal=optimal,
        candidates_verified=robust_init,
        node_limit=node_limit,
    )
    record.method = f"rnce-{flags}"
    return record
