"""Maximum-similarity one-to-one assignment with a deterministic tie-break.

``hungarian_assignment`` finds a maximum-total-similarity matching between
references (rows) and candidates (columns). Rectangular inputs are padded to
square with an off-scale similarity and the padded pairs are discarded, so
the result always has min(rows, cols) pairs.

Among equal-total optima the result is pinned to the assignment whose pair
list, sorted by row, is lexicographically smallest in (row, col). That makes
downstream scores reproducible when similarities tie exactly (quantized
embeddings, repeated texts). The refinement works on the tie structure the
solver's dual potentials expose: an edge can appear in *some* optimal
assignment only if its reduced cost is zero, and on the padded square
problem every perfect matching of such tight edges is optimal. So we greedily
re-match row after row to its most preferred tight column, accepting a move
only when the remaining tight graph still admits a perfect matching
(checked with an augmenting-path search).

The O(n^3) solver kernel is the compiled extension ``ovfact._lap`` when it
was built, otherwise the pure-Python twin; set OVFACT_PURE_PYTHON=1 to force
the fallback. Both produce bit-identical output.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..model import SimilarityMatrix

if os.environ.get("OVFACT_PURE_PYTHON"):
    from .. import _lap_py as _kernel

    KERNEL_BACKEND = "python"
else:
    try:
        from .. import _lap as _kernel  # type: ignore[no-redef]

        KERNEL_BACKEND = "compiled"
    except ImportError:
        from .. import _lap_py as _kernel  # type: ignore[no-redef]

        KERNEL_BACKEND = "python"

# Outside [-1, 1] so padding can never be mistaken for a real similarity.
PAD_SIMILARITY = -2.0

# Reduced costs of genuinely optimal edges are zero up to accumulated
# rounding (~1e-15 here); distinct similarity sums almost never land within
# 1e-9 of each other, and exactly representable fixture values give exact
# zeros. So 1e-9 cleanly separates "tied" from "worse".
_TIGHT_TOL = 1e-9


@dataclass(frozen=True)
class Assignment:
    """One-to-one matching: pairs of (row_index, col_index), row-sorted."""

    pairs: tuple[tuple[int, int], ...]
    total_similarity: float

    def __post_init__(self):
        rows = [r for r, _ in self.pairs]
        cols = [c for _, c in self.pairs]
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise DataError("assignment is not one-to-one")
        if rows != sorted(rows):
            raise DataError("assignment pairs must be sorted by row index")

    @property
    def matched_rows(self) -> tuple[int, ...]:
        return tuple(r for r, _ in self.pairs)

    @property
    def matched_cols(self) -> tuple[int, ...]:
        return tuple(c for _, c in self.pairs)


def _preference_rank(col: int, real_cols: int, n: int) -> int:
    # All real columns (in index order) are preferred to any padded column:
    # matching a row at all always precedes leaving it unmatched in the
    # lexicographic order over real pair lists.
    return col if col < real_cols else n + col


def _augment(
    start_row: int,
    adj: list[list[int]],
    match_col_for_row: np.ndarray,
    match_row_for_col: np.ndarray,
    locked_upto: int,
) -> bool:
    """Try to re-match ``start_row`` via an alternating path in the tight graph.

    Rows <= locked_upto are frozen and may not be re-matched. Commits the
    path and returns True on success; leaves the matching untouched on
    failure.
    """
    visited: set[int] = set()
    stack: list[tuple[int, int]] = [(start_row, 0)]
    path_cols: list[int] = []
    while stack:
        row, idx = stack[-1]
        advanced = False
        adjacency = adj[row]
        while idx < len(adjacency):
            col = adjacency[idx]
            idx += 1
            if col in visited:
                continue
            visited.add(col)
            owner = int(match_row_for_col[col])
            if owner < 0:
                stack[-1] = (row, idx)
                path_cols.append(col)
                for (path_row, _), path_col in zip(stack, path_cols):
                    match_col_for_row[path_row] = path_col
                    match_row_for_col[path_col] = path_row
                return True
            if owner <= locked_upto:
                continue
            stack[-1] = (row, idx)
            path_cols.append(col)
            stack.append((owner, 0))
            advanced = True
            break
        if not advanced:
            stack.pop()
            if path_cols:
                path_cols.pop()
    return False


def _lexicographic_refine(
    tight: np.ndarray, row_to_col: np.ndarray, real_rows: int, real_cols: int
) -> np.ndarray:
    """Rewrite a perfect tight matching into the lexicographically least one.

    Rows are fixed in index order; each row takes the most preferred tight
    column for which the rest of the tight graph still has a perfect
    matching. Preference is real columns ascending, then padded columns.
    """
    n = tight.shape[0]
    match_col_for_row = np.array(row_to_col, dtype=np.int64)
    match_row_for_col = np.full(n, -1, dtype=np.int64)
    match_row_for_col[match_col_for_row] = np.arange(n)

    column_order = sorted(range(n), key=lambda c: _preference_rank(c, real_cols, n))
    adj = [[c for c in column_order if tight[row, c]] for row in range(n)]

    for row in range(real_rows):
        current = int(match_col_for_row[row])
        current_rank = _preference_rank(current, real_cols, n)
        for col in adj[row]:
            if _preference_rank(col, real_cols, n) >= current_rank:
                break
            if col >= real_cols and current >= real_cols:
                break  # swapping one pad column for another changes nothing
            owner = int(match_row_for_col[col])
            if owner <= row:
                continue  # column owned by an already-frozen row
            match_col_for_row[row] = col
            match_row_for_col[col] = row
            match_col_for_row[owner] = -1
            match_row_for_col[current] = -1
            if _augment(owner, adj, match_col_for_row, match_row_for_col, locked_upto=row):
                break
            match_col_for_row[row] = current
            match_row_for_col[current] = row
            match_col_for_row[owner] = col
            match_row_for_col[col] = owner
    return match_col_for_row


def solve_square(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve the square minimization LAP with the selected kernel."""
    return _kernel.solve_square(cost)


def hungarian_assignment(similarity: SimilarityMatrix) -> Assignment:
    """Maximum-total one-to-one assignment over a similarity matrix.

    Requires at least one row and one column. Returns exactly
    min(rows, cols) pairs sorted by row index; equal-total optima resolve to
    the lexicographically smallest (row, col) pair list.
    """
    rows, cols = similarity.rows, similarity.cols
    if rows == 0 or cols == 0:
        raise ValueError("similarity matrix must be non-empty for assignment")
    n = max(rows, cols)
    cost = np.full((n, n), -PAD_SIMILARITY, dtype=np.float64)
    cost[:rows, :cols] = -similarity.values

    row_to_col, _, v = solve_square(cost)
    # Recompute row duals from the matched edges so those edges have reduced
    # cost exactly zero; the tolerance then only has to absorb noise on the
    # unmatched edges.
    u = cost[np.arange(n), row_to_col] - v[row_to_col]
    slack = cost - u[:, None] - v[None, :]
    tight = slack <= _TIGHT_TOL

    refined = _lexicographic_refine(tight, row_to_col, rows, cols)
    pairs = tuple(
        (row, int(refined[row])) for row in range(rows) if refined[row] < cols
    )
    if len(pairs) != min(rows, cols):
        raise DataError(
            f"assignment produced {len(pairs)} pairs, expected {min(rows, cols)}"
        )
    total = 0.0
    for row, col in pairs:
        total += float(similarity.values[row, col])
    return Assignment(pairs=pairs, total_similarity=total)
