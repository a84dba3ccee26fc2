"""Problem carriers for the embedded LP/MILP engine."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["LE", "GE", "EQ", "LinearProgram", "MilpProblem", "SolveResult", "dump_lp"]

LE = 0
GE = 1
EQ = 2

_REL_TEXT = {LE: "<=", GE: ">=", EQ: "="}


@dataclass
class LinearProgram:
    """Dense LP: objective, constraint rows with relations, variable bounds.

    Bounds may be +/-inf; coefficients must be finite.
    """

    c: np.ndarray
    A: np.ndarray
    rel: np.ndarray
    rhs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    sense: str = "min"
    names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        n = self.c.size
        if n == 0:
            raise ValueError("LP needs at least one variable")
        self.A = np.asarray(self.A, dtype=np.float64).reshape(-1, n)
        self.rel = np.asarray(self.rel, dtype=np.int64).reshape(-1)
        self.rhs = np.asarray(self.rhs, dtype=np.float64).reshape(-1)
        if not (self.A.shape[0] == self.rel.size == self.rhs.size):
            raise ValueError("constraint rows, relations and rhs sizes disagree")
        self.lo = np.asarray(self.lo, dtype=np.float64).reshape(-1)
        self.hi = np.asarray(self.hi, dtype=np.float64).reshape(-1)
        if self.lo.size != n or self.hi.size != n:
            raise ValueError("bounds sizes disagree with variable count")
        if not np.all(np.isfinite(self.A)) or not np.all(np.isfinite(self.c)):
            raise ValueError("LP coefficients must be finite")
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("LP right-hand sides must be finite")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")

    @property
    def num_vars(self) -> int:
        return self.c.size

    def var_name(self, j: int) -> str:
        if self.names is not None:
            return self.names[j]
        return f"x{j}"


@dataclass
class MilpProblem:
    """An LP plus the set of variables restricted to {0, 1}."""

    lp: LinearProgram
    binary_idx: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        self.binary_idx = np.asarray(self.binary_idx, dtype=np.int64).reshape(-1)
        n = self.lp.num_vars
        if self.binary_idx.size:
            if self.binary_idx.min() < 0 or self.binary_idx.max() >= n:
                raise ValueError("binary index out of range")
            if np.unique(self.binary_idx).size != self.binary_idx.size:
                raise ValueError("binary indices must be distinct")


@dataclass
class SolveResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "node_limit"
    objective: float | None = None
    x: np.ndarray | None = None
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _coef_terms(row: np.ndarray, lp: LinearProgram) -> str:
    parts = []
    for j, a in enumerate(row):
        if a == 0.0:
            continue
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        term = f"{sign} {mag:.17g} {lp.var_name(j)}"
        parts.append(term)
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def dump_lp(problem: MilpProblem | LinearProgram) -> str:
    """Render in CPLEX-LP text format for cross-checks with external solvers."""
    if isinstance(problem, LinearProgram):
        lp, binaries = problem, np.empty(0, dtype=np.int64)
    else:
        lp, binaries = problem.lp, problem.binary_idx
    lines = ["Minimize" if lp.sense == "min" else "Maximize"]
    lines.append(f" obj: {_coef_terms(lp.c, lp)}")
    lines.append("Subject To")
    for i in range(lp.A.shape[0]):
        lines.append(
            f" c{i}: {_coef_terms(lp.A[i], lp)} {_REL_TEXT[int(lp.rel[i])]} {lp.rhs[i]:.17g}"
        )
    lines.append("Bounds")
    for j in range(lp.num_vars):
        lo, hi = lp.lo[j], lp.hi[j]
        name = lp.var_name(j)
        if lo == -np.inf and hi == np.inf:
            lines.append(f" {name} free")
        elif lo == -np.inf:
            lines.append(f" -inf <= {name} <= {hi:.17g}")
        elif hi == np.inf:
            lines.append(f" {name} >= {lo:.17g}")
        else:
            lines.append(f" {lo:.17g} <= {name} <= {hi:.17g}")
    if binaries.size:
        lines.append("Binaries")
        lines.append(" " + " ".join(lp.var_name(j) for j in binaries))
    lines.append("End")
    return "\n".join(lines) + "\n"
