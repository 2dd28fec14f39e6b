"""Minimum-deviation twist filter.

Stage 1 solves the strictly convex QP

    min ||u - u_nom||^2   s.t.   G u + d >= 0

with a dense primal-dual active-set method specialized to the identity
Hessian: the iterate is always the projection of u_nom onto the working
set of rows treated as equalities.  Pivoting is Bland-style (lowest row
index first) so runs are bit-reproducible.

Stage 2 (``solve_robust``) handles the concave robustified rows
Theta-tilde(u) >= 0 by sequential linearization: each supergradient
linearization is an outer approximation of the convex feasible set, so any
QP iterate that also satisfies the true rows is optimal.  If the loop fails
to produce one, the filter falls back to shrinking the twist toward zero,
which is always feasible while the robust barriers are non-negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barriers import ConstraintRow, stack_rows
from .robust import ThetaBounds

_FEAS_TOL = 1e-9
_THETA_TOL = 1e-8


@dataclass(frozen=True)
class QpSolution:
    u: np.ndarray
    status: str                  # "optimal" | "max_iterations" | "infeasible"
    active: tuple = ()
    iterations: int = 0
    kkt_residual: float = 0.0
    fallback: bool = False
    outer_iterations: int = 0


def solve_min_norm(
    u_nom: np.ndarray,
    g: np.ndarray,
    d: np.ndarray,
    max_iter: int = 200,
) -> QpSolution:
    """Project u_nom onto { u : g @ u + d >= 0 }."""
    u_nom = np.asarray(u_nom, dtype=float)
    g = np.atleast_2d(np.asarray(g, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    scale = 1.0 + float(np.abs(d).max(initial=0.0)) + float(np.abs(u_nom).max(initial=0.0))

    work: list[int] = []
    u = u_nom.copy()
    lam = np.zeros(0)
    for it in range(1, max_iter + 1):
        if work:
            gw = g[work]
            m = gw @ gw.T
            rhs = -d[work] - gw @ u_nom
            try:
                lam = np.linalg.solve(m, rhs)
            except np.linalg.LinAlgError:
                lam, *_ = np.linalg.lstsq(m, rhs, rcond=None)
            u = u_nom + gw.T @ lam
            if np.max(np.abs(gw @ u + d[work])) > 1e-7 * scale:
                # dependent, mutually inconsistent equalities: empty interior
                return QpSolution(u=u, status="infeasible", active=tuple(work), iterations=it)
            neg = np.flatnonzero(lam < -_FEAS_TOL)
            if neg.size:
                work.pop(int(neg[0]))   # lowest-index negative multiplier
                continue
        else:
            u = u_nom.copy()
            lam = np.zeros(0)
        resid = g @ u + d
        violated = np.flatnonzero(resid < -_FEAS_TOL * scale)
        violated = [int(i) for i in violated if i not in work]
        if not violated:
            kkt = float(np.max(np.abs(u - u_nom - g[work].T @ lam))) if work else float(
                np.max(np.abs(u - u_nom))
            )
            return QpSolution(
                u=u,
                status="optimal",
                active=tuple(work),
                iterations=it,
                kkt_residual=kkt,
            )
        work.append(violated[0])        # lowest violated row index
        work.sort()
    return QpSolution(u=u, status="max_iterations", active=tuple(work), iterations=max_iter)


def solve_filtered(u_nom: np.ndarray, rows: list[ConstraintRow], max_iter: int = 200) -> QpSolution:
    """Stage-1 filter over affine barrier rows."""
    if not rows:
        return QpSolution(u=np.asarray(u_nom, dtype=float).copy(), status="optimal")
    g, d = stack_rows(rows)
    return solve_min_norm(u_nom, g, d, max_iter=max_iter)


def solve_robust(
    u_nom: np.ndarray,
    affine_rows: list[ConstraintRow],
    theta: ThetaBounds | None,
    max_outer: int = 20,
    max_iter: int = 200,
) -> QpSolution:
    """Filter against affine rows plus (optionally) the robustified rows.

    The robustified rows are concave in u, so each linearization is a valid
    global cut and the accumulated-cut QP is always a relaxation of the true
    convex robust problem: the first iterate that satisfies
    Theta-tilde >= -1e-8 is therefore optimal.  When the loop stalls, the
    twist is shrunk along [0, u]: u = 0 keeps the robust barriers
    non-negative whenever they currently are, so the filter degrades to
    stopping rather than leaving the safe set.
    """
    if theta is None:
        return solve_filtered(u_nom, affine_rows, max_iter=max_iter)

    g_aff, d_aff = stack_rows(affine_rows) if affine_rows else (np.zeros((0, 6)), np.zeros(0))
    u_nom = np.asarray(u_nom, dtype=float)
    if (
        float(theta.values(u_nom).min()) >= -_THETA_TOL
        and (g_aff @ u_nom + d_aff >= -_THETA_TOL).all()
    ):
        return QpSolution(u=u_nom.copy(), status="optimal", outer_iterations=0)

    base = solve_min_norm(u_nom, g_aff, d_aff, max_iter=max_iter)
    if base.status != "optimal":
        return _fallback(base.u, affine_rows, theta, base)

    u_k = base.u
    th_k = theta.values(u_k)
    if float(th_k.min()) >= -_THETA_TOL:
        return QpSolution(
            u=u_k,
            status="optimal",
            active=base.active,
            iterations=base.iterations,
            kkt_residual=base.kkt_residual,
            outer_iterations=0,
        )

    g, d = g_aff, d_aff
    last = base
    for outer in range(1, max_outer + 1):
        gr_k = theta.gradients(u_k)
        g = np.vstack([g, gr_k])
        d = np.concatenate([d, th_k - gr_k @ u_k])
        sol = solve_min_norm(u_nom, g, d, max_iter=max_iter)
        if sol.status != "optimal":
            return _fallback(u_k, affine_rows, theta, sol)
        last = sol
        u_k = sol.u
        th_k = theta.values(u_k)
        if float(th_k.min()) >= -_THETA_TOL:
            return QpSolution(
                u=u_k,
                status="optimal",
                active=sol.active,
                iterations=sol.iterations,
                kkt_residual=sol.kkt_residual,
                outer_iterations=outer,
            )
    return _fallback(u_k, affine_rows, theta, last)


def _fallback(
    u_start: np.ndarray,
    affine_rows: list[ConstraintRow],
    theta: ThetaBounds,
    last: QpSolution,
) -> QpSolution:
    """Largest s in [0, 1] with s * u_start feasible for every row family."""

    def feasible(u: np.ndarray) -> bool:
        if float(theta.values(u).min()) < -_THETA_TOL:
            return False
        return all(r.value(u) >= -_THETA_TOL for r in affine_rows)

    if feasible(u_start):
        return QpSolution(
            u=u_start, status="optimal", fallback=True, outer_iterations=last.outer_iterations
        )
    zero = np.zeros_like(u_start)
    if not feasible(zero):
        return QpSolution(u=zero, status="infeasible", fallback=True)
    lo, hi = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if feasible(mid * u_start):
            lo = mid
        else:
            hi = mid
    return QpSolution(u=lo * u_start, status="optimal", fallback=True)
