from fractions import Fraction
from typing import Dict, List, Sequence

import numpy as np
import scipy.linalg


class LinearSolver:
    """
    Centralized linear algebra for the workbench
    Every rank decision and least-squares solve goes through here so the
    agents can report how much numerical work they did
    """

    def __init__(self):
        self.call_count = 0     # SVD-backed calls
        self.exact_calls = 0    # rational elimination calls

    # ------------------------------------------------------------------
    # Floating point path
    # ------------------------------------------------------------------

    @staticmethod
    def rank_threshold(matrix: np.ndarray, singular_values: np.ndarray) -> float:
        """Singular values at or below max(rows, cols) * eps * s_max count as zero"""
        if singular_values.size == 0:
            return 0.0
        return max(matrix.shape) * np.finfo(float).eps * float(singular_values[0])

    def singular_values(self, matrix: np.ndarray) -> np.ndarray:
        self.call_count += 1
        matrix = np.asarray(matrix, dtype=float)
        if matrix.size == 0:
            return np.zeros(0)
        return scipy.linalg.svdvals(matrix)

    def numerical_rank(self, matrix: np.ndarray) -> int:
        matrix = np.asarray(matrix, dtype=float)
        s = self.singular_values(matrix)
        if s.size == 0:
            return 0
        return int(np.sum(s > self.rank_threshold(matrix, s)))

    def solve_min_norm(self, matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """
        Minimum-Euclidean-norm least-squares solution of matrix @ x ~= rhs

        The result depends only on (matrix, rhs): singular values under the
        rank threshold are discarded, so numerically dependent directions get
        no weight.
        """
        self.call_count += 1
        matrix = np.asarray(matrix, dtype=float)
        rhs = np.asarray(rhs, dtype=float)
        rows, cols = matrix.shape
        if cols == 0 or rows == 0:
            return np.zeros(cols)

        U, s, Vh = scipy.linalg.svd(matrix, full_matrices=False)
        keep = s > self.rank_threshold(matrix, s)
        if not np.any(keep):
            return np.zeros(cols)
        return Vh[keep].T @ ((U[:, keep].T @ rhs) / s[keep])

    def null_space(self, matrix: np.ndarray) -> np.ndarray:
        """Orthonormal basis (as columns) of the numerical null space"""
        self.call_count += 1
        matrix = np.asarray(matrix, dtype=float)
        rows, cols = matrix.shape
        if cols == 0:
            return np.zeros((0, 0))
        if rows == 0:
            return np.eye(cols)

        # scipy's default rcond is max(rows, cols) * eps, the same cutoff as rank_threshold
        return scipy.linalg.null_space(matrix)

    # ------------------------------------------------------------------
    # Exact rational path (integer fixtures, oracles)
    # ------------------------------------------------------------------

    @staticmethod
    def _to_fractions(matrix) -> List[List[Fraction]]:
        # Fraction(float) is exact for binary floating point values
        return [[Fraction(v) if isinstance(v, int) else Fraction(float(v)) for v in row]
                for row in np.asarray(matrix).tolist()]

    def exact_rank(self, matrix) -> int:
        """Rank by Gaussian elimination over the rationals"""
        self.exact_calls += 1
        rows = self._to_fractions(matrix)
        if not rows or not rows[0]:
            return 0

        n_rows, n_cols = len(rows), len(rows[0])
        rank = 0
        for col in range(n_cols):
            pivot = next((r for r in range(rank, n_rows) if rows[r][col] != 0), None)
            if pivot is None:
                continue
            rows[rank], rows[pivot] = rows[pivot], rows[rank]
            for r in range(n_rows):
                if r != rank and rows[r][col] != 0:
                    factor = rows[r][col] / rows[rank][col]
                    rows[r] = [a - factor * b for a, b in zip(rows[r], rows[rank])]
            rank += 1
            if rank == n_rows:
                break
        return rank

    def exact_is_consistent(self, matrix, rhs: Sequence) -> bool:
        """True iff rhs lies in the column span of matrix (exact arithmetic)"""
        matrix = np.asarray(matrix, dtype=float)
        rhs = np.asarray(rhs, dtype=float).reshape(-1, 1)
        if matrix.shape[1] == 0:
            return not np.any(rhs)
        augmented = np.hstack([matrix, rhs])
        return self.exact_rank(matrix) == self.exact_rank(augmented)

    # ------------------------------------------------------------------

    def get_metrics(self) -> Dict:
        """Report usage statistics"""
        return {
            'svd_calls': self.call_count,
            'exact_calls': self.exact_calls,
        }

    def reset_counters(self):
        """Reset for a new experiment"""
        self.call_count = 0
        self.exact_calls = 0


def is_integral(values: np.ndarray) -> bool:
    values = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(values)) and np.all(values == np.round(values)))
