"""Factorization of a dense matrix into a product of sparse factors.

The solver is a proximal alternating linearized minimization: one factor
at a time takes a gradient step on the quadratic data term and is then
projected back onto its constraint set. A constraint is either
"projected sparse" (keep the largest entries per row and per column,
then rescale to unit Frobenius norm) or a fixed matrix that is never
updated, which is how a diagonal weight factor rides along.

A scalar lambda in front of the product is refit in closed form after
every sweep. On exit lambda is folded into the leftmost free factor, so
callers get a plain factor list whose product is the approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleInit, LevelTooLarge, ShapeChainMismatch, ZeroMatrix
from .sparse import (
    FastOperator,
    SparseFactor,
    fast_operator,
    factors_equal_exact,
    sparse_from_dense,
    spmm_dense,
    spmv,
    transpose,
)

__all__ = [
    "ProjectedSparse",
    "FixedSingleton",
    "PalmConfig",
    "PalmState",
    "factor_shapes",
    "default_init",
    "random_feasible_init",
    "project_sparse",
    "normalize_frobenius",
    "spectral_norm_power",
    "palm4msa",
    "hierarchical_palm4msa",
    "factorization_objective",
]


@dataclass(frozen=True)
class ProjectedSparse:
    """Keep at least ``sparsity_level`` entries per row and per column."""

    shape: tuple[int, int]
    sparsity_level: int
    unit_frobenius: bool = True

    def __post_init__(self):
        n_rows, n_cols = self.shape
        if self.sparsity_level < 1:
            raise LevelTooLarge("sparsity level must be at least 1")
        if self.sparsity_level > min(n_rows, n_cols):
            raise LevelTooLarge(
                f"level {self.sparsity_level} exceeds capacity of {self.shape}"
            )


@dataclass(frozen=True)
class FixedSingleton:
    """Constraint set with a single member; the factor is never updated."""

    factor: SparseFactor

    @property
    def shape(self) -> tuple[int, int]:
        return self.factor.shape


SparsityConstraint = ProjectedSparse | FixedSingleton


@dataclass
class PalmConfig:
    max_iterations: int = 300
    tolerance: float = 1e-6
    step_safety: float = 1.001
    power_iters: int = 30
    seed: int = 0


@dataclass
class PalmState:
    """Result of a factorization run.

    ``factors`` includes any fixed factors, with the final lambda already
    folded into the leftmost free one. ``objective_trace[0]`` is the data
    term at initialization, then one value per sweep.
    """

    factors: list[SparseFactor]
    lam: float
    objective_trace: list[float]

    def operator(self, skip_leading: int = 0) -> FastOperator:
        return fast_operator(self.factors[skip_leading:])


def factor_shapes(n_rows: int, n_cols: int, n_factors: int) -> list[tuple[int, int]]:
    """Factor shapes for an ``n_rows x n_cols`` target.

    All factors are square with side ``min(n_rows, n_cols)`` except one
    rectangular factor at the tall or wide end of the chain.
    """
    a = min(n_rows, n_cols)
    if n_factors < 1:
        raise ValueError("need at least one factor")
    if n_factors == 1:
        return [(n_rows, n_cols)]
    if n_rows > n_cols:
        return [(n_rows, a)] + [(a, a)] * (n_factors - 1)
    return [(a, a)] * (n_factors - 1) + [(a, n_cols)]


def project_sparse(dense: np.ndarray, level: int) -> SparseFactor:
    """Support selection: union of per-row and per-column top ``level``.

    Entries are ranked by magnitude; ties prefer the smaller (row, col)
    position. Zero entries are never selected, so rows or columns with
    fewer than ``level`` nonzeros keep what they have. Retained values
    are copied unchanged; the projection is idempotent.
    """
    dense = np.asarray(dense, dtype=np.float64)
    n_rows, n_cols = dense.shape
    if level < 1 or level > min(n_rows, n_cols):
        raise LevelTooLarge(f"level {level} invalid for shape {dense.shape}")
    mag = np.abs(dense)
    mask = np.zeros(dense.shape, dtype=bool)

    order = np.argsort(-mag, axis=1, kind="stable")[:, :level]
    picked = np.take_along_axis(mag, order, axis=1) > 0
    rows = np.repeat(np.arange(n_rows), level)
    mask[rows[picked.ravel()], order.ravel()[picked.ravel()]] = True

    order = np.argsort(-mag, axis=0, kind="stable")[:level, :]
    picked = np.take_along_axis(mag, order, axis=0) > 0
    cols = np.tile(np.arange(n_cols), (level, 1))
    mask[order.ravel()[picked.ravel()], cols.ravel()[picked.ravel()]] = True

    return sparse_from_dense(np.where(mask, dense, 0.0))


def normalize_frobenius(S: SparseFactor) -> tuple[SparseFactor, float]:
    """Scale a factor to unit Frobenius norm; returns (factor, old norm)."""
    norm = S.frobenius_norm()
    if norm == 0.0:
        raise ZeroMatrix("cannot normalize an all-zero factor")
    return S.scaled(1.0 / norm), norm


def spectral_norm_power(factors, iters: int = 30, seed=0) -> float:
    """Largest singular value of a factor chain, by power iteration.

    Works through the chain with matvecs only; the product is never
    materialized. Deterministic for a given seed. Returns 0.0 for a
    chain whose product is zero.
    """
    factors = list(factors)
    if not factors:
        raise ValueError("empty chain")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    transposed = [transpose(S) for S in factors]
    v = rng.standard_normal(factors[-1].n_cols)
    v /= np.linalg.norm(v)
    rayleigh = 0.0
    for _ in range(iters):
        w = v
        for S in reversed(factors):
            w = spmv(S, w)
        rayleigh = float(np.dot(w, w))
        u = w
        for St in transposed:
            u = spmv(St, u)
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            return 0.0
        v = u / norm_u
    return math.sqrt(max(rayleigh, 0.0))


def default_init(constraints) -> list[SparseFactor]:
    """Deterministic feasible start: leading-diagonal matrices."""
    factors = []
    for c in constraints:
        if isinstance(c, FixedSingleton):
            factors.append(c.factor)
            continue
        n_rows, n_cols = c.shape
        m = min(n_rows, n_cols)
        value = 1.0 / math.sqrt(m) if c.unit_frobenius else 1.0
        eye = np.zeros((n_rows, n_cols))
        eye[np.arange(m), np.arange(m)] = value
        factors.append(sparse_from_dense(eye))
    return factors


def random_feasible_init(constraints, seed=0) -> list[SparseFactor]:
    """Random start: Gaussian draws projected onto each constraint."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    factors = []
    for c in constraints:
        if isinstance(c, FixedSingleton):
            factors.append(c.factor)
            continue
        S = project_sparse(rng.standard_normal(c.shape), c.sparsity_level)
        if c.unit_frobenius:
            S, _ = normalize_frobenius(S)
        factors.append(S)
    return factors


def _chain_dense(factors) -> np.ndarray:
    out = factors[-1].to_dense()
    for S in reversed(factors[:-1]):
        out = spmm_dense(S, out)
    return out


def _apply_chain(factors, M: np.ndarray) -> np.ndarray:
    for S in reversed(factors):
        M = spmm_dense(S, M)
    return M


def _apply_chain_transposed(factors, M: np.ndarray) -> np.ndarray:
    for S in factors:
        M = spmm_dense(transpose(S), M)
    return M


def _objective(target, factors, lam) -> float:
    diff = target - lam * _chain_dense(factors)
    return float(np.sum(diff * diff))


def _validate_chain(constraints, shape) -> None:
    for left, right in zip(constraints, constraints[1:]):
        if left.shape[1] != right.shape[0]:
            raise ShapeChainMismatch(f"cannot chain {left.shape} and {right.shape}")
    chained = (constraints[0].shape[0], constraints[-1].shape[1])
    if chained != tuple(shape):
        raise ShapeChainMismatch(f"chain gives {chained}, target is {tuple(shape)}")


def _check_feasible(factors, constraints) -> None:
    """Feasible means projection-stable plus unit norm where required."""
    for i, (S, c) in enumerate(zip(factors, constraints)):
        if S.shape != c.shape:
            raise InfeasibleInit(f"factor {i} has shape {S.shape}, expected {c.shape}")
        if isinstance(c, FixedSingleton):
            if not factors_equal_exact(S, c.factor):
                raise InfeasibleInit(f"factor {i} differs from its fixed value")
            continue
        if c.unit_frobenius and abs(S.frobenius_norm() - 1.0) > 1e-9:
            raise InfeasibleInit(f"factor {i} is not unit Frobenius norm")
        stable = project_sparse(S.to_dense(), c.sparsity_level)
        if not factors_equal_exact(stable, S):
            raise InfeasibleInit(f"factor {i} is not stable under its projection")


def palm4msa(target, constraints, init=None, config: PalmConfig | None = None) -> PalmState:
    """Approximate ``target`` by a product of constrained sparse factors.

    ``init`` defaults to :func:`default_init`. A warm start may carry a
    scale folded into the leftmost free factor; it is extracted as the
    initial lambda before feasibility is checked. Factors right of the
    one being updated hold their new values within a sweep, factors left
    of it still hold the previous sweep's values. The step size for each
    factor comes from power-iteration estimates of the flanking chains'
    spectral norms, inflated by ``step_safety``.

    Iteration stops at ``max_iterations``, when the relative improvement
    drops below ``tolerance``, or when a sweep fails to improve the
    objective — that trial sweep is discarded, so the reported trace is
    non-increasing and the returned factors realize its last entry.
    """
    cfg = config if config is not None else PalmConfig()
    target = np.asarray(target, dtype=np.float64)
    constraints = list(constraints)
    if not constraints:
        raise ShapeChainMismatch("need at least one constraint")
    _validate_chain(constraints, target.shape)

    factors = list(init) if init is not None else default_init(constraints)
    if len(factors) != len(constraints):
        raise InfeasibleInit(
            f"{len(factors)} init factors for {len(constraints)} constraints"
        )
    fixed = [isinstance(c, FixedSingleton) for c in constraints]
    free = [i for i, fx in enumerate(fixed) if not fx]
    if not free:
        raise InfeasibleInit("no free factor to optimize")
    lead = free[0]

    # Pull the overall scale out of the free factors: each becomes unit
    # Frobenius norm and lambda absorbs the product of their norms. A
    # warm start that carries a previous fold in its leading factor
    # hands that scale straight back to lambda.
    lam = 1.0
    for i in free:
        norm = factors[i].frobenius_norm()
        if norm == 0.0:
            raise InfeasibleInit(f"init factor {i} is all zero")
        lam *= norm
        if norm != 1.0:
            factors[i] = factors[i].scaled(1.0 / norm)
    _check_feasible(factors, constraints)

    if not np.any(target):
        factors = list(factors)
        factors[lead] = factors[lead].scaled(0.0)
        return PalmState(factors, 0.0, [0.0])

    rng = np.random.default_rng(cfg.seed)
    trace = [_objective(target, factors, lam)]

    n_factors = len(factors)
    for _ in range(cfg.max_iterations):
        saved_factors = list(factors)
        saved_lam = lam
        for q in range(n_factors - 1, -1, -1):
            if fixed[q]:
                factors[q] = constraints[q].factor
                continue
            left = factors[:q]
            right = factors[q + 1:]
            sig_left = spectral_norm_power(left, cfg.power_iters, rng) if left else 1.0
            sig_right = spectral_norm_power(right, cfg.power_iters, rng) if right else 1.0
            bound = (lam * sig_left * sig_right) ** 2
            if bound > 0.0:
                step = cfg.step_safety * bound
                residual = lam * _chain_dense(factors) - target
                grad = _apply_chain_transposed(left, residual) if left else residual
                if right:
                    grad = _apply_chain(right, np.ascontiguousarray(grad.T)).T
                candidate = factors[q].to_dense() - (lam / step) * grad
            else:
                candidate = factors[q].to_dense()
            projected = project_sparse(candidate, constraints[q].sparsity_level)
            if projected.nnz == 0:
                continue
            if constraints[q].unit_frobenius:
                projected, _ = normalize_frobenius(projected)
            factors[q] = projected
        product = _chain_dense(factors)
        denom = float(np.sum(product * product))
        lam = float(np.sum(target * product)) / denom if denom > 0.0 else 0.0
        diff = target - lam * product
        current = float(np.sum(diff * diff))
        previous = trace[-1]
        if current > previous:
            # The row/column support heuristic is not an exact projection,
            # so a sweep can overshoot once steps leave the descent regime.
            # Reject the trial sweep and keep the last accepted iterate.
            factors = saved_factors
            lam = saved_lam
            break
        trace.append(current)
        if previous - current <= cfg.tolerance * previous:
            break

    factors[lead] = factors[lead].scaled(lam)
    return PalmState(factors, lam, trace)


def hierarchical_palm4msa(
    target,
    n_factors: int,
    sparsity_level: int,
    config: PalmConfig | None = None,
    level_schedule=None,
) -> PalmState:
    """Factorize by peeling one factor at a time from the right.

    Each round splits the current residual into (denser residual, one
    factor at the final sparsity level) with a two-factor run, then
    refines all factors found so far against the original target. The
    residual's level at round ``j`` follows ``max(level, ceil(a / 2^j))``
    unless an explicit ``level_schedule`` overrides it; the last round
    uses the final level so every returned factor meets its constraint.
    """
    cfg = config if config is not None else PalmConfig()
    target = np.asarray(target, dtype=np.float64)
    n_rows, n_cols = target.shape
    a = min(n_rows, n_cols)
    shapes = factor_shapes(n_rows, n_cols, n_factors)
    if n_factors == 1:
        return palm4msa(target, [ProjectedSparse(shapes[0], sparsity_level)], config=cfg)
    if level_schedule is not None and len(level_schedule) != n_factors - 1:
        raise ValueError("level_schedule must have one entry per split")

    peeled: list[SparseFactor] = []
    peeled_constraints: list[ProjectedSparse] = []
    residual = target
    state = None
    for j in range(1, n_factors):
        split_pos = n_factors - j
        right_shape = shapes[split_pos]
        resid_shape = (n_rows, right_shape[0])
        if level_schedule is not None:
            resid_level = int(level_schedule[j - 1])
        elif j < n_factors - 1:
            resid_level = max(sparsity_level, math.ceil(a / 2**j))
        else:
            resid_level = sparsity_level
        resid_level = max(1, min(resid_level, min(resid_shape)))

        split = palm4msa(
            residual,
            [
                ProjectedSparse(resid_shape, resid_level),
                ProjectedSparse(right_shape, sparsity_level),
            ],
            config=cfg,
        )
        peeled.insert(0, split.factors[1])
        peeled_constraints.insert(0, ProjectedSparse(right_shape, sparsity_level))

        refine_constraints = [ProjectedSparse(resid_shape, resid_level)]
        refine_constraints.extend(peeled_constraints)
        state = palm4msa(target, refine_constraints, [split.factors[0]] + peeled, cfg)
        peeled = list(state.factors[1:])
        residual = state.factors[0].to_dense()
    return state


def factorization_objective(target, state: PalmState) -> float:
    """Squared Frobenius distance between target and the factor product."""
    target = np.asarray(target, dtype=np.float64)
    diff = target - _chain_dense(state.factors)
    return float(np.sum(diff * diff))
