"""Dense two-phase tableau simplex for small equality-form linear programs:

    minimize c^T x  subject to  A x = b,  x >= 0
"""

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .exceptions import InfeasibleProgramError, UnboundedProgramError

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class LPResult:
    x: FloatArray
    objective: float
    iterations: int


class DenseSimplex:
    """Tableau simplex with Dantzig pricing and Bland's rule after degenerate stalls"""

    def __init__(
        self,
        tolerance: float = 1e-10,
        max_iterations: int = 100_000,
        degenerate_limit: int = 50,
    ):
        """
        Args:
            tolerance: Zero threshold for pivots, reduced costs and phase 1 infeasibility
            max_iterations: Pivot cap across both phases
            degenerate_limit: Consecutive zero-step pivots before switching to Bland's rule
        """
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.degenerate_limit = degenerate_limit
        self._iterations = 0

    def solve(self, c: npt.ArrayLike, a_eq: npt.ArrayLike, b_eq: npt.ArrayLike) -> LPResult:
        cost = np.asarray(c, dtype=np.float64).reshape(-1)
        a = np.array(a_eq, dtype=np.float64, ndmin=2)
        b = np.array(b_eq, dtype=np.float64).reshape(-1)
        rows, cols = a.shape
        if cost.size != cols or b.size != rows:
            raise ValueError(
                f"inconsistent LP shapes: c {cost.shape}, A {a.shape}, b {b.shape}"
            )
        self._iterations = 0

        negative = b < 0
        a[negative] *= -1
        b[negative] *= -1

        # phase 1: artificial basis, minimize the sum of artificials
        tableau = np.zeros((rows + 1, cols + rows + 1))
        tableau[:rows, :cols] = a
        tableau[:rows, cols : cols + rows] = np.eye(rows)
        tableau[:rows, -1] = b
        tableau[-1, :cols] = -a.sum(axis=0)
        tableau[-1, -1] = -b.sum()
        basis = np.arange(cols, cols + rows)

        self._iterate(tableau, basis, cols + rows)
        scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        if -tableau[-1, -1] > self.tolerance * scale * max(rows, 1) * 10:
            raise InfeasibleProgramError(
                f"phase 1 ended with infeasibility {-tableau[-1, -1]:.3e}"
            )

        tableau, basis = self._drop_artificials(tableau, basis, cols)

        # phase 2: price the real objective against the current basis
        tableau[-1, :] = 0.0
        tableau[-1, :cols] = cost
        for i, j in enumerate(basis):
            if cost[j] != 0.0:
                tableau[-1] -= cost[j] * tableau[i]
        self._iterate(tableau, basis, cols, cost_scale=max(1.0, float(np.abs(cost).max())))

        x = np.zeros(cols)
        x[basis] = tableau[:-1, -1]
        x[np.abs(x) < self.tolerance] = 0.0
        return LPResult(x=x, objective=float(cost @ x), iterations=self._iterations)

    def _iterate(
        self,
        tableau: FloatArray,
        basis: npt.NDArray[np.int64],
        eligible: int,
        cost_scale: float = 1.0,
    ) -> None:
        degenerate_run = 0
        while True:
            if self._iterations >= self.max_iterations:
                raise RuntimeError(f"simplex exceeded {self.max_iterations} iterations")
            reduced = tableau[-1, :eligible]
            threshold = -self.tolerance * cost_scale
            if degenerate_run >= self.degenerate_limit:
                candidates = np.flatnonzero(reduced < threshold)
                if candidates.size == 0:
                    return
                entering = int(candidates[0])
            else:
                entering = int(np.argmin(reduced))
                if reduced[entering] >= threshold:
                    return

            column = tableau[:-1, entering]
            positive = column > self.tolerance
            if not positive.any():
                raise UnboundedProgramError(f"column {entering} has no positive pivot")
            ratios = np.full(column.shape, np.inf)
            ratios[positive] = tableau[:-1, -1][positive] / column[positive]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + self.tolerance)
            leaving = int(ties[np.argmin(basis[ties])])

            degenerate_run = degenerate_run + 1 if best <= self.tolerance else 0
            self._pivot(tableau, leaving, entering)
            basis[leaving] = entering
            self._iterations += 1

    @staticmethod
    def _pivot(tableau: FloatArray, row: int, col: int) -> None:
        tableau[row] /= tableau[row, col]
        pivot_row = tableau[row].copy()
        tableau -= np.outer(tableau[:, col], pivot_row)
        tableau[row] = pivot_row

    def _drop_artificials(
        self, tableau: FloatArray, basis: npt.NDArray[np.int64], cols: int
    ) -> tuple[FloatArray, npt.NDArray[np.int64]]:
        """Pivot artificials out of the basis; rows where that is impossible are redundant"""
        keep = []
        for i in range(len(basis)):
            if basis[i] >= cols:
                candidates = np.flatnonzero(np.abs(tableau[i, :cols]) > self.tolerance)
                if candidates.size == 0:
                    continue
                j = int(candidates[0])
                self._pivot(tableau, i, j)
                basis[i] = j
            keep.append(i)
        dropped = len(basis) - len(keep)
        if dropped:
            logger.debug(f"simplex dropped {dropped} redundant constraint rows")
        rows = keep + [tableau.shape[0] - 1]
        reduced = np.hstack([tableau[rows, :cols], tableau[rows, -1:]])
        return reduced, basis[keep].copy()


def solve_lp(c: npt.ArrayLike, a_eq: npt.ArrayLike, b_eq: npt.ArrayLike) -> LPResult:
    """Minimize c^T x subject to A x = b, x >= 0 with default solver settings"""
    return DenseSimplex().solve(c, a_eq, b_eq)
