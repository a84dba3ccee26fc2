"""Robustness certificates for counterfactuals under bounded parameter shifts.

A counterfactual is robust for its target class when the interval abstraction
assigns it that class: for single-logit models the certified logit lower
bound must be >= 0 (upper bound < 0 for class 0), for multi-logit models the
target's certified lower bound must dominate every other class's certified
upper bound.  Networks are certified through the MILP encoding; logistic
models have a closed form.  An undefined interval verdict counts as not
robust, and a solver node-limit is reported as not robust with a distinct
``unresolved`` flag.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .intervals import ShiftSet, abstract, interval_forward
from .milp import DEFAULT_NODE_LIMIT, branch_and_bound, encode_output_bound
from .models import LogisticModel, ParametricModel, as_feature_vector, classify

__all__ = [
    "RobustnessVerdict",
    "logit_bound",
    "is_delta_robust",
    "is_delta_robust_binary",
    "is_delta_robust_multi",
    "is_sound",
    "delta_validity",
]


@dataclass
class RobustnessVerdict:
    """Outcome of a robustness test plus the bounds that decided it.

    ``bounds`` maps class label to a [lo, hi] pair; the side the decision
    rests on is certified (MILP / closed form), the complementary side is the
    interval-arithmetic enclosure.  ``strictly_robust`` is populated only
    when soundness of the original input was checked.
    """

    robust: bool
    target_class: int
    bounds: dict[int, tuple[float, float]]
    strictly_robust: bool | None = None
    nodes_explored: int = 0
    wall_ms: float = 0.0
    unresolved: bool = False

    def to_dict(self) -> dict:
        return {
            "robust": self.robust,
            "strictly_robust": self.strictly_robust,
            "target_class": self.target_class,
            "bounds": {str(k): [v[0], v[1]] for k, v in sorted(self.bounds.items())},
            "nodes_explored": self.nodes_explored,
            "wall_ms": self.wall_ms,
            "unresolved": self.unresolved,
        }


def _logistic_bounds(model: LogisticModel, delta: float, x) -> tuple[float, float]:
    """Exact logit range over the parameter box; each parameter occurs once."""
    v = as_feature_vector(x, model.input_dim)
    z = float(model.weights @ v)
    width = delta * float(np.abs(v).sum())
    if model.bias is not None:
        z += model.bias
        width += delta
    return z - width, z + width


def logit_bound(
    model: ParametricModel,
    shift: ShiftSet,
    x,
    output_index: int,
    direction: str,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> tuple[float | None, int, bool]:
    """One certified endpoint of an output logit: (value, nodes, unresolved)."""
    if isinstance(model, LogisticModel):
        lo, hi = _logistic_bounds(model, shift.delta, x)
        return (lo if direction == "min" else hi), 0, False
    enc = encode_output_bound(model, x, shift.delta, output_index, direction)
    res = branch_and_bound(enc.problem, node_limit=node_limit)
    if res.status == "node_limit":
        return None, res.nodes, True
    if not res.optimal:
        raise RuntimeError(f"bound problem ended with status {res.status}")
    return res.objective, res.nodes, False


def is_delta_robust_binary(
    model: ParametricModel,
    shift: ShiftSet,
    x_prime,
    target: int = 1,
    check_soundness_of=None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> RobustnessVerdict:
    """Certify a counterfactual for a single-logit model."""
    if model.num_outputs != 1:
        raise ValueError("binary robustness test needs a single-logit model")
    if target not in (0, 1):
        raise ValueError("binary target must be 0 or 1")
    start = time.perf_counter()
    im = abstract(model, shift)
    ia_lo, ia_hi = interval_forward(im, x_prime)
    direction = "min" if target == 1 else "max"
    value, nodes, unresolved = logit_bound(model, shift, x_prime, 0, direction, node_limit)
    if unresolved:
        robust = False
        bounds = {1: (float(ia_lo[0]), float(ia_hi[0]))}
    elif target == 1:
        robust = value >= 0.0
        bounds = {1: (value, float(ia_hi[0]))}
    else:
        robust = value < 0.0
        bounds = {1: (float(ia_lo[0]), value)}
    verdict = RobustnessVerdict(
        robust=robust,
        target_class=target,
        bounds=bounds,
        nodes_explored=nodes,
        unresolved=unresolved,
    )
    if check_soundness_of is not None:
        sound = is_sound(model, shift, check_soundness_of, node_limit=node_limit)
        verdict.strictly_robust = bool(robust and sound)
    verdict.wall_ms = (time.perf_counter() - start) * 1000.0
    return verdict


def is_delta_robust_multi(
    model: ParametricModel,
    shift: ShiftSet,
    x_prime,
    target: int,
    check_soundness_of=None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> RobustnessVerdict:
    """Certify a counterfactual for a multi-logit model: one minimisation for
    the target plus one maximisation per competing class."""
    n_out = model.num_outputs
    if n_out < 2:
        raise ValueError("multi-class robustness test needs >= 2 logits")
    if not 1 <= target <= n_out:
        raise ValueError(f"target class {target} out of range 1..{n_out}")
    start = time.perf_counter()
    im = abstract(model, shift)
    ia_lo, ia_hi = interval_forward(im, x_prime)
    bounds: dict[int, tuple[float, float]] = {}
    nodes = 0
    unresolved = False
    t0 = target - 1
    lo_t, n, u = logit_bound(model, shift, x_prime, t0, "min", node_limit)
    nodes += n
    unresolved |= u
    bounds[target] = (float(ia_lo[t0]) if u else lo_t, float(ia_hi[t0]))
    robust = not u
    for j in range(n_out):
        if j == t0:
            continue
        hi_j, n, u = logit_bound(model, shift, x_prime, j, "max", node_limit)
        nodes += n
        unresolved |= u
        bounds[j + 1] = (float(ia_lo[j]), float(ia_hi[j]) if u else hi_j)
        if u or lo_t is None or lo_t < hi_j:
            robust = False
    verdict = RobustnessVerdict(
        robust=robust,
        target_class=target,
        bounds=bounds,
        nodes_explored=nodes,
        unresolved=unresolved,
    )
    if check_soundness_of is not None:
        sound = is_sound(model, shift, check_soundness_of, node_limit=node_limit)
        verdict.strictly_robust = bool(robust and sound)
    verdict.wall_ms = (time.perf_counter() - start) * 1000.0
    return verdict


def is_delta_robust(
    model: ParametricModel,
    shift: ShiftSet,
    x_prime,
    target: int | None = None,
    check_soundness_of=None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> RobustnessVerdict:
    """Dispatch on model arity; binary target defaults to class 1."""
    if model.num_outputs == 1:
        return is_delta_robust_binary(
            model, shift, x_prime, 1 if target is None else target, check_soundness_of, node_limit
        )
    if target is None:
        raise ValueError("multi-class robustness test needs an explicit target class")
    return is_delta_robust_multi(model, shift, x_prime, target, check_soundness_of, node_limit)


def is_sound(
    model: ParametricModel,
    shift: ShiftSet,
    x,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> bool:
    """True iff the abstraction still assigns x its point-model class."""
    label = classify(model, x)
    if model.num_outputs == 1:
        direction = "min" if label == 1 else "max"
        value, _, unresolved = logit_bound(model, shift, x, 0, direction, node_limit)
        if unresolved:
            return False
        return value >= 0.0 if label == 1 else value < 0.0
    t0 = label - 1
    lo_t, _, u = logit_bound(model, shift, x, t0, "min", node_limit)
    if u:
        return False
    for j in range(model.num_outputs):
        if j == t0:
            continue
        hi_j, _, u = logit_bound(model, shift, x, j, "max", node_limit)
        if u or lo_t < hi_j:
            return False
    return True


def delta_validity(
    model: ParametricModel,
    shift: ShiftSet,
    ce_batch,
    targets=None,
    node_limit: int = DEFAULT_NODE_LIMIT,
) -> float:
    """Fraction of a counterfactual batch passing the robustness test."""
    ces = [np.asarray(ce, dtype=np.float64) for ce in ce_batch]
    if not ces:
        raise ValueError("counterfactual batch is empty")
    if targets is None:
        targets = [None] * len(ces)
    flags = [
        is_delta_robust(model, shift, ce, target=t, node_limit=node_limit).robust
        for ce, t in zip(ces, targets)
    ]
    return float(np.mean(flags))
