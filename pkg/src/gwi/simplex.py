"""Dense phase-one simplex for ``A x = b, x >= 0`` feasibility.

Bland's rule (lowest-index entering and leaving variables) guarantees
termination on the heavily degenerate marginal-matching systems used by
the JPD test.  Sized for a few hundred rows and columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericalError

PIVOT_EPS = 1e-12


@dataclass
class PhaseOneResult:
    feasible: bool
    x: np.ndarray
    infeasibility: float
    farkas: Optional[np.ndarray]
    iterations: int

    @property
    def residual(self) -> float:
        return self.infeasibility


def phase_one(A, b, tol: float = 1e-9, max_iter: int = 100_000) -> PhaseOneResult:
    """Minimize the sum of artificial slacks for ``A x + u = b``.

    The optimum is the L1 distance of ``b`` from the cone ``{A x : x >= 0}``
    restricted to one-sided residuals.  When it exceeds ``tol`` the system is
    declared infeasible and ``farkas`` holds ``y`` with ``A.T @ y <= 0`` and
    ``b @ y > 0``, i.e. a separating linear functional.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError(f"b has shape {b.shape}, expected ({m},)")

    sign = np.where(b < 0, -1.0, 1.0)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A * sign[:, None]
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b * sign
    # objective row holds reduced costs; last entry is -(current objective)
    T[m, :n] = -T[:m, :n].sum(axis=0)
    T[m, -1] = -T[:m, -1].sum()
    basis = np.arange(n, n + m)

    it = 0
    while True:
        costs = T[m, :-1]
        entering = np.flatnonzero(costs < -PIVOT_EPS)
        if entering.size == 0:
            break
        if it >= max_iter:
            raise NumericalError(f"phase-one simplex did not terminate in {max_iter} pivots")
        j = entering[0]
        col = T[:m, j]
        rows = np.flatnonzero(col > PIVOT_EPS)
        if rows.size == 0:
            # cannot happen for a phase-one problem: objective is bounded below by 0
            raise NumericalError("phase-one simplex reported an unbounded direction")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_EPS * max(1.0, abs(best))]
        r = ties[np.argmin(basis[ties])]
        T[r] /= T[r, j]
        others = np.flatnonzero(T[:, j])
        others = others[others != r]
        T[others] -= np.outer(T[others, j], T[r])
        basis[r] = j
        it += 1

    z = np.zeros(n + m)
    z[basis] = T[:m, -1]
    x = np.clip(z[:n], 0.0, None)
    objective = float(-T[m, -1])
    feasible = objective <= tol
    farkas = None
    if not feasible:
        # reduced cost of artificial i is 1 - y_i (signed rows)
        farkas = (1.0 - T[m, n:n + m]) * sign
    return PhaseOneResult(feasible, x, max(objective, 0.0), farkas, it)
