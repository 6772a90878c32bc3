"""Hidden-metric access, query accounting, explicit matrices and ingestion.

Points are dense integer ids in [0, n).  Distances are float64; missing
distances use the +inf sentinel, which sorts above every finite value.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExhaustedError, DataError, ParameterError

logger = logging.getLogger(__name__)

INFINITE_DISTANCE = float("inf")

#: How asymmetric similarity reports for a pair are reconciled.
#: min_distance keeps the smaller distance (larger bit score).
SYMMETRIZE_POLICIES = ("min_distance", "max_distance", "mean")


class QueryLedger:
    """Counts one-versus-all queries; optionally enforces a hard budget.

    Increments are atomic so sources may be shared between workers.
    """

    def __init__(self, budget: int | None = None):
        if budget is not None and budget < 0:
            raise ParameterError(f"budget must be non-negative, got {budget}")
        self.budget = budget
        self._count = 0
        self._lock = threading.Lock()

    @property
    def queries_issued(self) -> int:
        return self._count

    def charge(self) -> None:
        with self._lock:
            if self.budget is not None and self._count + 1 > self.budget:
                raise BudgetExhaustedError(
                    f"query budget of {self.budget} exhausted"
                )
            self._count += 1


class DistanceSource:
    """One-versus-all oracle over a hidden metric on n points.

    Subclasses provide `_row`.  Every successful `query_one_vs_all` charges
    the ledger exactly once; repeated queries return identical vectors.
    """

    def __init__(self, n: int, ledger: QueryLedger | None = None):
        self.n = n
        self.ledger = ledger if ledger is not None else QueryLedger()

    def query_one_vs_all(self, s: int) -> np.ndarray:
        if not 0 <= s < self.n:
            raise ParameterError(f"point id {s} outside [0, {self.n})")
        self.ledger.charge()
        row = np.asarray(self._row(s), dtype=np.float64)
        row = row.copy()
        row.flags.writeable = False
        return row

    def _row(self, s: int) -> np.ndarray:
        raise NotImplementedError


class MatrixDistanceSource(DistanceSource):
    """Oracle backed by an explicit distance matrix."""

    def __init__(self, matrix: "MetricMatrix", ledger: QueryLedger | None = None):
        super().__init__(matrix.n, ledger)
        self.matrix = matrix

    def _row(self, s: int) -> np.ndarray:
        return self.matrix.values[s]


class PointCloudDistanceSource(DistanceSource):
    """Oracle computing Euclidean rows on demand from an embedding.

    Lets large instances be queried without materializing the n x n matrix.
    """

    def __init__(self, points: np.ndarray, ledger: QueryLedger | None = None):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2:
            raise ParameterError("points must be a 2-d array")
        super().__init__(points.shape[0], ledger)
        self.points = points

    def _row(self, s: int) -> np.ndarray:
        diff = self.points - self.points[s]
        row = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        row[s] = 0.0
        return row


class MetricMatrix:
    """Immutable n x n distance matrix with an explicit +inf sentinel.

    Construction checks symmetry, zero diagonal and non-negativity.  The
    triangle inequality is *not* assumed; use `check_metric` to audit it.
    """

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError(f"expected a square matrix, got shape {values.shape}")
        if np.isnan(values).any():
            raise DataError("distance matrix contains NaN")
        finite_or_inf = np.isfinite(values) | np.isposinf(values)
        if not finite_or_inf.all():
            raise DataError("distances must be finite or +inf")
        if (values < 0).any():
            i, j = np.argwhere(values < 0)[0]
            raise DataError(f"negative distance at ({i},{j})")
        if not np.array_equal(values, values.T):
            i, j = np.argwhere(values != values.T)[0]
            raise DataError(f"matrix not symmetric at ({i},{j})")
        if np.diagonal(values).any():
            i = int(np.nonzero(np.diagonal(values))[0][0])
            raise DataError(f"non-zero diagonal at ({i},{i})")
        values = values.copy()
        values.flags.writeable = False
        self.values = values

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        return isinstance(other, MetricMatrix) and np.array_equal(
            self.values, other.values
        )

    def to_csv(self, path) -> None:
        """Write `n` on the first line, then n rows of repr-exact values."""
        with open(path, "w") as fh:
            fh.write(f"{self.n}\n")
            for row in self.values:
                fh.write(",".join("inf" if np.isinf(v) else repr(float(v))
                                  for v in row))
                fh.write("\n")

    @classmethod
    def from_csv(cls, path) -> "MetricMatrix":
        with open(path) as fh:
            header = fh.readline().strip()
            try:
                n = int(header)
            except ValueError:
                raise DataError(f"first line must be the point count, got {header!r}")
            rows = []
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != n:
                    raise DataError(
                        f"expected {n} values per row, got {len(parts)}"
                    )
                rows.append([float(p) for p in parts])
        if len(rows) != n:
            raise DataError(f"expected {n} rows, got {len(rows)}")
        return cls(np.array(rows, dtype=np.float64))


@dataclass
class MetricReport:
    """Outcome of a triangle-inequality audit.  Report-only, never fatal."""

    n: int
    mode: str
    triples_checked: int
    violations: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def fraction_violating(self) -> float:
        if self.triples_checked == 0:
            return 0.0
        return len(self.violations) / self.triples_checked


# Relative slack absorbing float rounding in Euclidean-embedded instances;
# genuine violations in ingested data are orders of magnitude larger.
_TRIANGLE_REL_TOL = 1e-12


def _triple_violations(d: np.ndarray, i, j, k, tol: float):
    """Yield orientations (a,b,c) of one triple with d(a,c) > d(a,b)+d(b,c)."""
    for a, b, c in ((i, j, k), (j, i, k), (i, k, j)):
        lhs = d[a, c]
        rhs = d[a, b] + d[b, c]
        if np.isfinite(lhs) and np.isfinite(rhs) and lhs > rhs + tol * rhs:
            yield (int(a), int(b), int(c))


def check_metric(
    m: MetricMatrix,
    mode: str = "exhaustive",
    sample_triples: int = 10_000,
    seed: int = 0,
    max_violations: int | None = None,
    tol: float = _TRIANGLE_REL_TOL,
) -> MetricReport:
    """Audit the triangle inequality over finite entries.

    Exhaustive mode examines all C(n,3) unordered triples; sampled mode
    examines `sample_triples` uniform ones.  A triple is reported (once,
    oriented as its violating inequality) when d(i,k) > d(i,j) + d(j,k).
    """
    d = m.values
    n = m.n
    violations: list[tuple[int, int, int]] = []
    if mode == "exhaustive":
        checked = n * (n - 1) * (n - 2) // 6
        finite = np.isfinite(d)
        seen: set[tuple[int, int, int]] = set()
        for j in range(n):
            # via-j sums for all (i, k); each unordered triple reported once
            rhs = d[:, j][:, None] + d[j, :][None, :]
            bad = (d > rhs + tol * rhs) & finite & np.isfinite(rhs)
            bad[j, :] = False
            bad[:, j] = False
            if bad.any():
                for i, k in np.argwhere(np.triu(bad, 1)):
                    key = tuple(sorted((int(i), int(j), int(k))))
                    if key in seen:
                        continue
                    seen.add(key)
                    violations.append((int(i), int(j), int(k)))
                    if max_violations and len(violations) >= max_violations:
                        return MetricReport(n, mode, checked, violations)
    elif mode == "sampled":
        if n < 3:
            return MetricReport(n, mode, 0, [])
        rng = np.random.default_rng(seed)
        checked = sample_triples
        seen = set()
        for _ in range(sample_triples):
            i, j, k = rng.choice(n, size=3, replace=False)
            for witness in _triple_violations(d, i, j, k, tol):
                key = tuple(sorted(witness))
                if key not in seen:
                    seen.add(key)
                    violations.append(witness)
                break
    else:
        raise ParameterError(f"unknown check mode {mode!r}")
    return MetricReport(n, mode, checked, violations)


def _combine(distances: list[float], policy: str) -> float:
    if policy == "min_distance":
        return min(distances)
    if policy == "max_distance":
        return max(distances)
    if policy == "mean":
        return sum(distances) / len(distances)
    raise ParameterError(f"unknown symmetrize policy {policy!r}")


def ingest_similarity(
    pairs,
    n: int | None = None,
    policy: str = "min_distance",
) -> MetricMatrix:
    """Build a distance matrix from (id_a, id_b, bit_score) triples.

    Distances are reciprocal bit scores; unreported pairs get the +inf
    sentinel and the diagonal is forced to zero.  Ids must already be dense
    integers in [0, n) -- see `read_pair_file` for labelled input.
    Asymmetric or duplicate reports are reconciled per `policy` and logged.
    """
    pairs = list(pairs)
    if n is None:
        if not pairs:
            raise DataError("cannot infer point count from an empty pair list")
        n = max(max(a, b) for a, b, _ in pairs) + 1
    by_pair: dict[tuple[int, int], list[float]] = {}
    for a, b, score in pairs:
        a, b = int(a), int(b)
        if not (0 <= a < n and 0 <= b < n):
            raise DataError(f"pair ({a},{b}) outside dense id range [0,{n})")
        if not score > 0:
            raise DataError(f"non-positive bit score {score} for pair ({a},{b})")
        if a == b:
            continue  # diagonal is pinned to zero regardless of self-scores
        key = (a, b) if a < b else (b, a)
        by_pair.setdefault(key, []).append(1.0 / float(score))
    values = np.full((n, n), INFINITE_DISTANCE)
    np.fill_diagonal(values, 0.0)
    conflicts = 0
    for (a, b), dists in by_pair.items():
        if len(set(dists)) > 1:
            conflicts += 1
        d = _combine(dists, policy)
        values[a, b] = d
        values[b, a] = d
    if conflicts:
        logger.info(
            "ingest: reconciled %d conflicting pair reports via %s",
            conflicts, policy,
        )
    return MetricMatrix(values)


def emit_pairs(m: MetricMatrix):
    """Inverse of ingestion: finite off-diagonal entries as bit-score triples."""
    for a in range(m.n):
        for b in range(a + 1, m.n):
            d = m.values[a, b]
            if np.isfinite(d) and d > 0:
                yield (a, b, 1.0 / d)


def read_pair_file(path):
    """Read a similarity TSV `id_a  id_b  bit_score`.

    A header line is detected by a non-numeric third column.  Returns
    (pairs with dense integer ids, label list in id order).
    """
    raw = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns")
            try:
                score = float(parts[2])
            except ValueError:
                if lineno == 1 or not raw:
                    continue  # header
                raise DataError(f"{path}:{lineno}: bad bit score {parts[2]!r}")
            raw.append((parts[0], parts[1], score))
    if not raw:
        raise DataError(f"{path}: no similarity pairs found")
    labels = sorted({a for a, _, _ in raw} | {b for _, b, _ in raw},
                    key=_label_sort_key)
    index = {lab: i for i, lab in enumerate(labels)}
    pairs = [(index[a], index[b], s) for a, b, s in raw]
    return pairs, labels


def _label_sort_key(label: str):
    # numeric labels sort numerically so a dense 0..n-1 id space maps onto
    # itself; everything else sorts lexicographically after them
    try:
        return (0, int(label), label)
    except ValueError:
        return (1, 0, label)


def write_labels_csv(path, labels_by_point, header: bool = True) -> None:
    """Write the `point_id,cluster_label` file."""
    with open(path, "w") as fh:
        if header:
            fh.write("point_id,cluster_label\n")
        for pid, lab in enumerate(labels_by_point):
            fh.write(f"{pid},{lab}\n")


def read_labels_csv(path) -> dict[int, str]:
    """Read `point_id,cluster_label`, tolerating a header line."""
    out: dict[int, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns")
            try:
                pid = int(parts[0])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise DataError(f"{path}:{lineno}: bad point id {parts[0]!r}")
            if pid in out:
                raise DataError(f"{path}:{lineno}: duplicate point id {pid}")
            out[pid] = parts[1]
    if not out:
        raise DataError(f"{path}: empty label file")
    return out
