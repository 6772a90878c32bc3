"""Unknown-optimum handling: rerun the sweep with ascending threshold guesses.

The extraction test compares ball-size x radius products against T, so the
algorithm's behaviour only changes at product values; enumerating them and
walking upward until enough points are clustered recovers a good threshold
without any further distance queries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError, SweepFailure
from .landmark import (
    Clustering,
    LandmarkTable,
    StabilityParams,
    assign_remainder,
    cluster_min_sum,
    snapped_ceil,
)


@dataclass
class ThresholdCandidates:
    """Strictly ascending candidate thresholds with their provenance."""

    values: np.ndarray
    provenance: str  # "exact" | "geometric(<gamma>)"

    def __len__(self):
        return len(self.values)


def enumerate_thresholds(
    table: LandmarkTable,
    n: int | None = None,
    mode: str = "exact",
    gamma: float = 0.5,
) -> ThresholdCandidates:
    """Candidate products of ball sizes (1..n) and landmark-point distances.

    Exact mode emits every achievable size x distance product (zero-distance
    products dropped since T must be positive).  Geometric mode bridges the
    same [min, max] range with a (1+gamma) grid; it carries no exactness
    guarantee and is flagged as such in the provenance.
    """
    if n is None:
        n = table.n
    dists = table.finite_distance_values()
    dists = dists[dists > 0]
    if dists.size == 0:
        raise DataError("no positive finite landmark-point distances")
    if mode == "exact":
        products = np.unique(
            np.outer(np.arange(1, n + 1, dtype=np.float64), dists)
        )
        return ThresholdCandidates(products, "exact")
    if mode == "geometric":
        if not gamma > 0:
            raise ParameterError(f"gamma must be positive, got {gamma}")
        lo = float(dists.min())  # smallest product: size 1, smallest distance
        hi = float(n * dists.max())
        if lo == hi:
            return ThresholdCandidates(np.array([lo]), f"geometric({gamma})")
        steps = int(math.ceil(math.log(hi / lo) / math.log1p(gamma)))
        grid = lo * (1.0 + gamma) ** np.arange(steps)
        values = np.unique(np.append(grid, hi))
        return ThresholdCandidates(values, f"geometric({gamma})")
    raise ParameterError(f"unknown enumeration mode {mode!r}")


def stop_bound_from(params: StabilityParams, n: int) -> int:
    """Bad-point budget ceil((2 + 120/alpha) * epsilon * n)."""
    b = snapped_ceil((2.0 + 120.0 / params.alpha) * params.epsilon * n)
    if b >= n:
        raise ParameterError(
            f"stop bound {b} >= n={n}: stability parameters inconsistent with n"
        )
    return b


@dataclass
class SweepResult:
    chosen_threshold: float
    clustering: Clustering  # after remainder assignment
    runs_executed: int
    points_clustered_at_stop: int
    coverage_per_candidate: list[tuple[float, int]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "chosen_T": self.chosen_threshold,
            "runs_executed": self.runs_executed,
            "points_clustered_at_stop": self.points_clustered_at_stop,
            "candidates_tried": [t for t, _ in self.coverage_per_candidate],
            "coverage_per_candidate": [cov for _, cov in self.coverage_per_candidate],
            "warnings": self.warnings,
            "clustering": self.clustering.to_dict(),
        }


def sweep(
    table: LandmarkTable,
    k: int,
    candidates: ThresholdCandidates,
    stop_bound_b: int,
) -> SweepResult:
    """Run the clustering once per ascending candidate until coverage.

    Stops at the first candidate clustering at least n - b points before
    remainder assignment, then completes the winner with assign_remainder.
    Reuses the landmark table throughout, so no new queries are issued.
    """
    n = table.n
    if len(candidates) == 0:
        raise ParameterError("no threshold candidates")
    if not 0 <= stop_bound_b < n:
        raise ParameterError(f"need 0 <= b < n, got b={stop_bound_b}, n={n}")
    needed = n - stop_bound_b
    coverage: list[tuple[float, int]] = []
    best_cov = -1
    best_t = None
    best_run = None
    for t in candidates.values:
        t = float(t)
        run = cluster_min_sum(table, k, t)
        cov = run.points_clustered()
        coverage.append((t, cov))
        if cov > best_cov:
            best_cov, best_t, best_run = cov, t, run
        if cov >= needed:
            warnings = list(run.warnings)
            if candidates.provenance != "exact":
                warnings.append(f"candidates:{candidates.provenance}")
            final = assign_remainder(run, table)
            return SweepResult(
                chosen_threshold=t,
                clustering=final,
                runs_executed=len(coverage),
                points_clustered_at_stop=cov,
                coverage_per_candidate=coverage,
                warnings=warnings,
            )
    raise SweepFailure(
        f"no candidate clustered >= {needed} of {n} points "
        f"(best {best_cov} at T={best_t})",
        best_threshold=best_t,
        best_clustering=best_run,
        best_coverage=best_cov,
    )
