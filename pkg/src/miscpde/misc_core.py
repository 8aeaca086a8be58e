"""Mixed difference operators, the combination technique, and estimator evaluation.

A mixed index pairs a dense vector of spatial refinement levels with a
sparse vector of quadrature levels.  The estimator over a downward
closed set of mixed indices can be evaluated either by summing mixed
first-order differences (surplus form) or as a signed combination of
plain tensor approximations (combination technique); both share one
memoization cache keyed by the hierarchical identity of each
collocation point, so nested points are never solved twice.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import pde_solver, quadrature
from .pde_solver import QoISpec
from .quadrature import ZERO_ID, SparseLevelVector
from .random_field import FieldSpec


class IndexSetError(ValueError):
    """Raised when an operation requires a downward-closed index set."""


@dataclass(frozen=True)
class MixedIndex:
    """One difference operator: spatial levels (dense) and quadrature levels (sparse)."""

    alpha: tuple[int, ...]
    beta: SparseLevelVector

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(int(a) for a in self.alpha))
        if any(a < 1 for a in self.alpha):
            raise ValueError(f"spatial levels must be >= 1, got {self.alpha}")
        if not isinstance(self.beta, SparseLevelVector):
            object.__setattr__(self, "beta", SparseLevelVector(self.beta))

    @property
    def spatial_dim(self) -> int:
        return len(self.alpha)

    def sort_key(self):
        return (self.alpha, self.beta.items())

    def parents(self) -> Iterable["MixedIndex"]:
        """Immediate predecessors: one component decremented (floor 1)."""
        for i, a in enumerate(self.alpha):
            if a > 1:
                yield MixedIndex(self.alpha[:i] + (a - 1,) + self.alpha[i + 1 :], self.beta)
        for j in self.beta.support:
            yield MixedIndex(self.alpha, self.beta.bump(j, -1))

    def bump_alpha(self, i: int) -> "MixedIndex":
        return MixedIndex(self.alpha[:i] + (self.alpha[i] + 1,) + self.alpha[i + 1 :], self.beta)

    def bump_beta(self, j: int) -> "MixedIndex":
        return MixedIndex(self.alpha, self.beta.bump(j))


def root_index(spatial_dim: int) -> MixedIndex:
    return MixedIndex((1,) * spatial_dim, SparseLevelVector())


def is_downward_closed(members: Iterable[MixedIndex]) -> bool:
    mset = set(members)
    return all(parent in mset for m in mset for parent in m.parents())


def downward_closure(members: Iterable[MixedIndex]) -> set[MixedIndex]:
    closed = set(members)
    stack = list(closed)
    while stack:
        for parent in stack.pop().parents():
            if parent not in closed:
                closed.add(parent)
                stack.append(parent)
    return closed


def dof_work(index: MixedIndex) -> int:
    """Exact incremental cost of one mixed difference: new quadrature
    points times spatial unknowns at the index's own refinement."""
    new_points = math.prod(
        quadrature.new_node_count(b) for _, b in index.beta.items()
    )
    return new_points * pde_solver.unknowns(index.alpha)


class IndexSet:
    """Immutable downward-closed collection of mixed indices.

    Combination coefficients are computed lazily from the members and
    always telescope to 1.
    """

    def __init__(self, members: Iterable[MixedIndex], require_closed: bool = True):
        members = sorted(set(members), key=MixedIndex.sort_key)
        if not members:
            raise IndexSetError("an index set needs at least one member")
        dims = {m.spatial_dim for m in members}
        if len(dims) != 1:
            raise IndexSetError(f"mixed spatial dimensions in one set: {sorted(dims)}")
        if require_closed and not is_downward_closed(members):
            raise IndexSetError("index set is not downward closed")
        self._members = tuple(members)
        self._member_set = frozenset(members)
        self._coefficients: dict[MixedIndex, int] | None = None

    @property
    def members(self) -> tuple[MixedIndex, ...]:
        return self._members

    @property
    def spatial_dim(self) -> int:
        return self._members[0].spatial_dim

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self):
        return iter(self._members)

    def __contains__(self, index: MixedIndex) -> bool:
        return index in self._member_set

    def __eq__(self, other) -> bool:
        return isinstance(other, IndexSet) and self._members == other._members

    def __hash__(self) -> int:
        return hash(self._members)

    def active_variables(self) -> tuple[int, ...]:
        out: set[int] = set()
        for m in self._members:
            out.update(m.beta.support)
        return tuple(sorted(out))

    @property
    def coefficients(self) -> dict[MixedIndex, int]:
        if self._coefficients is None:
            self._coefficients = combination_coefficients(self)
        return self._coefficients

    # Diagnostics used by the convergence-study records.
    def max_alpha_level(self) -> int:
        return max(max(m.alpha) for m in self._members)

    def max_beta_level(self) -> int:
        return max(m.beta.max_level() for m in self._members)

    def last_variable(self) -> int:
        return max((m.beta.last_variable() for m in self._members), default=0)

    def max_joint_variables(self) -> int:
        return max(m.beta.active_count() for m in self._members)

    def nominal_work(self) -> int:
        """Total work per the difference-wise decomposition (degrees of freedom)."""
        return sum(dof_work(m) for m in self._members)

    def to_json(self) -> str:
        payload = {
            "spatial_dim": self.spatial_dim,
            "members": [
                {
                    "alpha": list(m.alpha),
                    "beta": {str(j): b for j, b in m.beta.items()},
                    "coeff": self.coefficients[m],
                }
                for m in self._members
            ],
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "IndexSet":
        payload = json.loads(text)
        members = [
            MixedIndex(
                tuple(entry["alpha"]),
                SparseLevelVector({int(j): b for j, b in entry["beta"].items()}),
            )
            for entry in payload["members"]
        ]
        return cls(members)


def combination_coefficients(index_set: IndexSet) -> dict[MixedIndex, int]:
    """Signed counts c_m = sum of (-1)^|offset| over binary forward offsets
    with m + offset in the set; over any downward-closed set they sum to 1.

    Computed backwards: each member distributes its sign to the members
    it is a binary offset above, which costs 2^(number of its
    above-base coordinates) instead of 2^(all active directions).
    """
    members = set(index_set.members)
    if not is_downward_closed(members):
        raise IndexSetError("combination coefficients need a downward-closed set")
    coeffs: dict[MixedIndex, int] = {m: 0 for m in index_set.members}
    for upper in index_set.members:
        spatial_dims = [i for i, a in enumerate(upper.alpha) if a > 1]
        stoch_dims = upper.beta.support
        for bits in itertools.product((0, 1), repeat=len(spatial_dims) + len(stoch_dims)):
            alpha = list(upper.alpha)
            for i, bit in zip(spatial_dims, bits):
                alpha[i] -= bit
            beta = upper.beta
            for j, bit in zip(stoch_dims, bits[len(spatial_dims):]):
                if bit:
                    beta = beta.bump(j, -1)
            lower = MixedIndex(tuple(alpha), beta)
            if lower in coeffs:
                coeffs[lower] += (-1) ** sum(bits)
    return coeffs


@dataclass
class EvalCache:
    """Memoized values of F^alpha at collocation points with hit/miss counters."""

    values: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0

    def key(self, alpha: tuple[int, ...], point_ids: Mapping[int, tuple[int, int]]):
        reduced = frozenset((j, pid) for j, pid in point_ids.items() if pid != ZERO_ID)
        return (alpha, reduced)


@dataclass
class EstimatorResult:
    """Value of one estimator evaluation plus its work accounting."""

    value: float
    work: int              # difference-wise decomposition, in degrees of freedom
    solve_work: int        # degrees of freedom actually solved in this evaluation
    solves: int
    cache_hits: int
    mode: str


class MiscEvaluator:
    """Evaluates mixed differences and whole estimators with a shared cache.

    Every solve is pure, so concurrent evaluation is safe; with
    ``threads > 1`` the uncached solves of each tensor grid run on a
    thread pool.  Sums are always reduced in a fixed deterministic
    order, so results do not depend on scheduling.
    """

    def __init__(self, field_spec: FieldSpec, qoi_spec: QoISpec, threads: int = 1):
        if field_spec.d != qoi_spec.d:
            raise ValueError("field and observation window disagree on the spatial dimension")
        self.field_spec = field_spec
        self.qoi_spec = qoi_spec
        self.threads = max(1, int(threads))
        self.cache = EvalCache()

    # -- point-level evaluation -------------------------------------------

    def value_at(self, alpha: tuple[int, ...], point: Mapping[int, float],
                 ids: Mapping[int, tuple[int, int]]) -> float:
        key = self.cache.key(alpha, ids)
        if key in self.cache.values:
            self.cache.hits += 1
            return self.cache.values[key]
        self.cache.misses += 1
        value = pde_solver.solve_qoi(alpha, point, self.field_spec, self.qoi_spec)
        self.cache.values[key] = value
        return value

    def _grid(self, beta: SparseLevelVector):
        support = beta.support
        axes = []
        for j in support:
            level = beta.level(j)
            pts = quadrature.cc_points(level)
            ids = quadrature.point_ids(level)
            wts = quadrature.cc_weights(level)
            axes.append([(pts[i], ids[i], wts[i]) for i in range(len(pts))])
        return support, axes

    def tensor_value(self, alpha: tuple[int, ...], beta: SparseLevelVector) -> float:
        """Full tensor approximation: quadrature at level beta of F^alpha."""
        support, axes = self._grid(beta)
        if not support:
            return self.value_at(alpha, {}, {})
        combos = list(itertools.product(*axes))
        if self.threads > 1:
            self._prefetch(alpha, support, combos)
        total = 0.0
        for combo in combos:
            point = {j: c[0] for j, c in zip(support, combo)}
            ids = {j: c[1] for j, c in zip(support, combo)}
            weight = math.prod(c[2] for c in combo)
            total += weight * self.value_at(alpha, point, ids)
        return total

    def _prefetch(self, alpha, support, combos) -> None:
        # Solve the uncached points of one tensor grid concurrently; the
        # main loop then reduces them in its fixed traversal order.
        pending = {}
        for combo in combos:
            point = {j: c[0] for j, c in zip(support, combo)}
            ids = {j: c[1] for j, c in zip(support, combo)}
            key = self.cache.key(alpha, ids)
            if key not in self.cache.values and key not in pending:
                pending[key] = point
        if not pending:
            return
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = pool.map(
                lambda item: (item[0], pde_solver.solve_qoi(alpha, item[1], self.field_spec, self.qoi_spec)),
                pending.items(),
            )
            for key, value in results:
                self.cache.values[key] = value
                self.cache.misses += 1

    # -- difference operators ----------------------------------------------

    def delta_det(self, alpha: tuple[int, ...], beta: SparseLevelVector) -> float:
        """Spatial mixed difference: alternating sum over corner offsets,
        with terms containing a zero level dropped."""
        total = 0.0
        for bits in itertools.product((0, 1), repeat=len(alpha)):
            shifted = tuple(a - b for a, b in zip(alpha, bits))
            if any(a == 0 for a in shifted):
                continue
            total += (-1) ** sum(bits) * self.tensor_value(shifted, beta)
        return total

    def mixed_difference(self, index: MixedIndex) -> float:
        """First-order difference in every direction, stochastic around spatial."""
        support = index.beta.support
        total = 0.0
        for bits in itertools.product((0, 1), repeat=len(support)):
            beta = index.beta
            for j, bit in zip(support, bits):
                if bit:
                    beta = beta.bump(j, -1)
            total += (-1) ** sum(bits) * self.delta_det(index.alpha, beta)
        return total

    # -- estimator ----------------------------------------------------------

    def evaluate(self, index_set: IndexSet, mode: str = "combination") -> EstimatorResult:
        """Evaluate the estimator in surplus or combination form.

        The two forms agree up to roundoff; the combination form skips
        members with zero coefficient, so it can perform strictly less
        solve work on the same set.
        """
        if mode not in ("surplus", "combination"):
            raise ValueError(f"unknown evaluation mode {mode!r}")
        if not is_downward_closed(index_set.members):
            raise IndexSetError("estimator evaluation needs a downward-closed set")
        solves_before = self.cache.misses
        hits_before = self.cache.hits
        work_before = self._solved_dof
        if mode == "surplus":
            value = 0.0
            for m in index_set.members:
                value += self.mixed_difference(m)
        else:
            value = 0.0
            for m in index_set.members:
                c = index_set.coefficients[m]
                if c != 0:
                    value += c * self.tensor_value(m.alpha, m.beta)
        return EstimatorResult(
            value=value,
            work=index_set.nominal_work(),
            solve_work=self._solved_dof - work_before,
            solves=self.cache.misses - solves_before,
            cache_hits=self.cache.hits - hits_before,
            mode=mode,
        )

    @property
    def _solved_dof(self) -> int:
        return sum(pde_solver.unknowns(alpha) for alpha, _ in self.cache.values)


@dataclass
class MimcResult:
    value: float
    work: int
    level_means: tuple[float, ...]
    level_variances: tuple[float, ...]
    standard_error: float


def mimc_estimate(
    levels: Sequence[Sequence[int]],
    counts: Sequence[int],
    field_spec: FieldSpec,
    qoi_spec: QoISpec,
    n_random_vars: int,
    seed: int,
) -> MimcResult:
    """Multi-index Monte Carlo baseline on the same spatial differences.

    Each level contributes the sample mean of the spatial mixed
    difference at uniformly drawn parameters (y_1..y_N); N = 0 makes
    every sample the deterministic difference at y = 0, so the estimate
    telescopes with zero variance.  Fixed seeds reproduce bit-identical
    results.
    """
    if len(levels) != len(counts):
        raise ValueError("levels and sample counts must align")
    if any(c < 1 for c in counts):
        raise ValueError("sample counts must be positive")
    rng = np.random.default_rng(seed)
    evaluator_cost = 0
    means: list[float] = []
    variances: list[float] = []
    total = 0.0
    for alpha, m_samples in zip(levels, counts):
        alpha = pde_solver.validate_alpha(alpha)
        corners = []
        for bits in itertools.product((0, 1), repeat=len(alpha)):
            shifted = tuple(a - b for a, b in zip(alpha, bits))
            if any(a == 0 for a in shifted):
                continue
            corners.append((tuple(bits), shifted))
        corner_cost = sum(pde_solver.unknowns(a) for _, a in corners)
        samples = np.empty(m_samples)
        for s in range(m_samples):
            draw = rng.uniform(-1.0, 1.0, n_random_vars)
            y = {j + 1: float(draw[j]) for j in range(n_random_vars)}
            value = 0.0
            for bits, shifted in corners:
                value += (-1) ** sum(bits) * pde_solver.solve_qoi(shifted, y, field_spec, qoi_spec)
            samples[s] = value
        evaluator_cost += m_samples * corner_cost
        if np.all(samples == samples[0]):
            # Zero-variance level (e.g. no sampled variables): the mean is
            # the telescoped value itself, bit-exactly.
            means.append(float(samples[0]))
            variances.append(0.0)
        else:
            means.append(float(samples.mean()))
            variances.append(float(samples.var(ddof=1)) if m_samples > 1 else 0.0)
        total += means[-1]
    stderr = math.sqrt(sum(v / c for v, c in zip(variances, counts)))
    return MimcResult(total, evaluator_cost, tuple(means), tuple(variances), stderr)
