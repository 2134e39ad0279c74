"""Dense linear programming.

The default engine is a two-phase tableau simplex written against numpy. It
uses Dantzig's rule and switches to Bland's rule once it sees a run of
degenerate pivots, so it always terminates and is reproducible for identical
input. A ``"highs"`` engine (scipy's HiGHS) is available for the large
sequence-form programs of the exact oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 50
DEGENERATE_RUN = 50


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpError(RuntimeError):
    """The solver hit its iteration limit or lost numerical control."""


LE, EQ, GE = "<=", "=", ">="


@dataclass
class LinearProgram:
    """``sense c.x`` subject to ``A[i] . x  (senses[i])  rhs[i]``.

    Lower bounds are 0 or ``-inf``; upper bounds default to ``+inf``.
    """

    c: np.ndarray
    A: np.ndarray
    senses: list[str]
    rhs: np.ndarray
    maximize: bool = False
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        self.senses = list(self.senses)
        m = self.A.shape[0]
        if self.rhs.size != m or len(self.senses) != m:
            raise ValueError("constraint matrix, senses and rhs disagree in length")
        if any(s not in (LE, EQ, GE) for s in self.senses):
            raise ValueError(f"unknown constraint sense in {set(self.senses)}")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bound vectors have the wrong length")
        if np.any((self.lower != 0.0) & ~np.isneginf(self.lower)):
            raise ValueError("lower bounds must be 0 or -inf")
        if np.any(np.isneginf(self.upper)) or np.any(self.upper < self.lower):
            raise ValueError("inconsistent upper bounds")
        for arr in (self.c, self.A, self.rhs):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP coefficients must be finite")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]


@dataclass
class LpSolution:
    status: Status
    objective: float = float("nan")
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    # d(objective)/d(rhs) for each constraint row
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_objective: float = float("nan")
    primal_residual: float = float("nan")
    slackness_residual: float = float("nan")
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _StandardForm:
    """min c.z s.t. M z = r, z >= 0, r >= 0 built from a LinearProgram."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        cols = []  # (original var, sign)
        for j in range(n):
            cols.append((j, 1.0))
            if np.isneginf(lp.lower[j]):
                cols.append((j, -1.0))
        self.cols = cols
        expand = np.zeros((n, len(cols)))
        for k, (j, s) in enumerate(cols):
            expand[j, k] = s
        self.expand = expand

        rows = [lp.A @ expand]
        senses = list(lp.senses)
        rhs = [lp.rhs]
        ub_vars = np.flatnonzero(np.isfinite(lp.upper))
        if ub_vars.size:
            rows.append(expand[ub_vars])
            senses += [LE] * ub_vars.size
            rhs.append(lp.upper[ub_vars])
        A = np.vstack(rows)
        b = np.concatenate(rhs)
        self.n_lp_rows = lp.n_rows
        self.ub_vars = ub_vars
        self.ub_values = lp.upper[ub_vars]

        n_slack = sum(s != EQ for s in senses)
        m, nz = A.shape
        M = np.zeros((m, nz + n_slack))
        M[:, :nz] = A
        slack_of_row = np.full(m, -1)
        k = nz
        for i, s in enumerate(senses):
            if s == LE:
                M[i, k] = 1.0
            elif s == GE:
                M[i, k] = -1.0
            else:
                continue
            slack_of_row[i] = k
            k += 1
        flip = np.where(b < 0, -1.0, 1.0)
        self.M = M * flip[:, None]
        self.r = b * flip
        self.flip = flip
        self.slack_of_row = slack_of_row
        self.n_struct = nz
        cz = expand.T @ lp.c
        if lp.maximize:
            cz = -cz
        self.cost = np.concatenate([cz, np.zeros(n_slack)])


class _Tableau:
    def __init__(self, M: np.ndarray, r: np.ndarray, basis: list[int]):
        m, n = M.shape
        self.M, self.r = M, r
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = M
        self.T[:m, n] = r
        self.basis = list(basis)
        self.m = m
        self.n = n
        self.cost = np.zeros(n)
        self.pivots = 0
        self.degenerate_run = 0
        self.bland = False

    def set_cost(self, cost: np.ndarray):
        # objective row holds reduced costs; last entry is -objective
        self.cost = np.asarray(cost, dtype=float)
        self.T[-1, :] = 0.0
        self.T[-1, : self.n] = cost
        for i, j in enumerate(self.basis):
            if self.T[-1, j] != 0.0:
                self.T[-1, :] -= self.T[-1, j] * self.T[i, :]

    def refactor(self):
        """Rebuild the tableau from the original data to shed round-off."""
        if self.m == 0:
            return
        B = self.M[:, self.basis]
        try:
            self.T[: self.m, : self.n] = np.linalg.solve(B, self.M)
            self.T[: self.m, self.n] = np.linalg.solve(B, self.r)
        except np.linalg.LinAlgError:
            return
        self.T[: self.m][np.abs(self.T[: self.m]) < 1e-15] = 0.0
        self.set_cost(self.cost)

    def pivot(self, row: int, col: int):
        T = self.T
        T[row, :] /= T[row, col]
        colvals = T[:, col].copy()
        colvals[row] = 0.0
        T -= np.outer(colvals, T[row, :])
        T[np.abs(T) < 1e-15] = 0.0
        self.basis[row] = col
        self.pivots += 1
        if self.pivots % REFACTOR_EVERY == 0:
            self.refactor()

    def run(self, allowed: np.ndarray, max_iter: int) -> Status:
        T = self.T
        while True:
            if self.pivots > max_iter:
                raise LpError(f"simplex exceeded {max_iter} pivots")
            reduced = T[-1, : self.n]
            candidates = np.flatnonzero((reduced < -OPT_TOL) & allowed)
            if candidates.size == 0:
                if self.pivots:
                    self.refactor()
                    reduced = T[-1, : self.n]
                    if np.any((reduced < -OPT_TOL) & allowed):
                        continue
                return Status.OPTIMAL
            if self.bland:
                col = int(candidates[0])
            else:
                # argmin returns the lowest index among ties
                col = int(candidates[np.argmin(reduced[candidates])])
            column = T[: self.m, col]
            pos = column > PIVOT_TOL
            if not np.any(pos):
                return Status.UNBOUNDED
            ratios = np.full(self.m, np.inf)
            ratios[pos] = T[: self.m, -1][pos] / column[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + FEAS_TOL * max(1.0, abs(best)))
            if self.bland:
                # among ties leave the lowest-index basic variable
                row = int(ties[np.argmin([self.basis[i] for i in ties])])
            else:
                # the largest pivot element keeps the basis well conditioned
                row = int(ties[np.argmax(column[ties])])
            if best <= FEAS_TOL:
                self.degenerate_run += 1
                if self.degenerate_run >= DEGENERATE_RUN:
                    self.bland = True
            else:
                self.degenerate_run = 0
            self.pivot(row, col)


def _solve_simplex(lp: LinearProgram, max_iter: int) -> LpSolution:
    sf = _StandardForm(lp)
    M, r = sf.M, sf.r
    m, n = M.shape
    if m == 0:
        # only sign constraints: optimum at 0 unless some cost is negative
        if np.any(sf.cost < -OPT_TOL):
            return LpSolution(Status.UNBOUNDED)
        z = np.zeros(n)
        return _finish(lp, sf, z, np.zeros(0), 0)

    # a slack with +1 in a row is a ready-made basic variable
    basis = []
    art_rows = []
    for i in range(m):
        k = sf.slack_of_row[i]
        if k >= 0 and M[i, k] == 1.0:
            basis.append(k)
        else:
            basis.append(-1)
            art_rows.append(i)
    n_art = len(art_rows)
    M1 = np.hstack([M, np.zeros((m, n_art))])
    for a, i in enumerate(art_rows):
        M1[i, n + a] = 1.0
        basis[i] = n + a
    tab = _Tableau(M1, r, basis)
    iterations = 0

    if n_art:
        cost1 = np.zeros(n + n_art)
        cost1[n:] = 1.0
        tab.set_cost(cost1)
        tab.run(np.ones(n + n_art, dtype=bool), max_iter)
        infeas = -tab.T[-1, -1]
        if infeas > FEAS_TOL * max(1.0, np.abs(r).max()):
            return LpSolution(Status.INFEASIBLE, iterations=tab.pivots)
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if tab.basis[i] >= n:
                row = tab.T[i, :n]
                nz = np.flatnonzero(np.abs(row) > 1e-7)
                if nz.size:
                    tab.pivot(i, int(nz[np.argmax(np.abs(row[nz]))]))
                else:
                    keep[i] = False
        iterations = tab.pivots
        rows = np.flatnonzero(keep)
        basis2 = [tab.basis[i] for i in rows]
        tab = _Tableau(M[rows], r[rows], basis2)
        tab.refactor()
        tab.pivots = iterations
        kept_rows = rows
    else:
        kept_rows = np.arange(m)

    tab.set_cost(sf.cost)
    status = tab.run(np.ones(n, dtype=bool), max_iter)
    if status is Status.UNBOUNDED:
        return LpSolution(Status.UNBOUNDED, iterations=tab.pivots)

    z = np.zeros(n)
    for i, j in enumerate(tab.basis):
        z[j] = tab.T[i, -1]
    z = np.clip(z, 0.0, None)

    B = M[np.ix_(kept_rows, tab.basis)]
    try:
        y_kept = np.linalg.solve(B.T, sf.cost[tab.basis])
    except np.linalg.LinAlgError:
        # numerically singular basis (degenerate vertex); least squares still
        # reproduces the reduced costs on the columns that matter
        y_kept = np.linalg.lstsq(B.T, sf.cost[tab.basis], rcond=None)[0]
    y = np.zeros(m)
    y[kept_rows] = y_kept
    return _finish(lp, sf, z, y, tab.pivots)


def _finish(lp: LinearProgram, sf: _StandardForm, z: np.ndarray, y_std: np.ndarray, iters: int) -> LpSolution:
    x = sf.expand @ z[: sf.n_struct]
    # undo row flips and the min/max conversion so duals are d(obj)/d(rhs)
    y = y_std * sf.flip if y_std.size else np.zeros(sf.M.shape[0])
    if lp.maximize:
        y = -y
    duals = y[: sf.n_lp_rows]
    ub_duals = y[sf.n_lp_rows:]
    objective = float(lp.c @ x)
    dual_objective = float(lp.rhs @ duals + sf.ub_values @ ub_duals)
    return LpSolution(
        Status.OPTIMAL,
        objective=objective,
        x=x,
        duals=duals,
        dual_objective=dual_objective,
        primal_residual=primal_residual(lp, x),
        slackness_residual=float(np.max(np.abs(duals * (lp.A @ x - lp.rhs)), initial=0.0)),
        iterations=iters,
    )


def primal_residual(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest violation of any constraint or bound by ``x``."""
    ax = lp.A @ x - lp.rhs
    viol = [0.0]
    for s, d in zip(lp.senses, ax):
        if s == LE:
            viol.append(max(d, 0.0))
        elif s == GE:
            viol.append(max(-d, 0.0))
        else:
            viol.append(abs(d))
    viol.append(float(np.max(lp.lower - x, initial=0.0)))
    viol.append(float(np.max(x - lp.upper, initial=0.0)))
    return max(viol)


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    sign = -1.0 if lp.maximize else 1.0
    ub_rows = [i for i, s in enumerate(lp.senses) if s != EQ]
    eq_rows = [i for i, s in enumerate(lp.senses) if s == EQ]
    ub_sign = np.array([1.0 if lp.senses[i] == LE else -1.0 for i in ub_rows])
    kwargs = {}
    if ub_rows:
        kwargs["A_ub"] = lp.A[ub_rows] * ub_sign[:, None]
        kwargs["b_ub"] = lp.rhs[ub_rows] * ub_sign
    if eq_rows:
        kwargs["A_eq"] = lp.A[eq_rows]
        kwargs["b_eq"] = lp.rhs[eq_rows]
    bounds = [
        (None if np.isneginf(lo) else lo, None if np.isposinf(hi) else hi)
        for lo, hi in zip(lp.lower, lp.upper)
    ]
    res = linprog(
        sign * lp.c,
        bounds=bounds,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        **kwargs,
    )
    if res.status == 2:
        return LpSolution(Status.INFEASIBLE)
    if res.status == 3:
        return LpSolution(Status.UNBOUNDED)
    if res.status != 0:
        raise LpError(f"HiGHS failed: {res.message}")
    x = np.asarray(res.x)
    duals = np.zeros(lp.n_rows)
    if ub_rows:
        duals[ub_rows] = sign * np.asarray(res.ineqlin.marginals) * ub_sign
    if eq_rows:
        duals[eq_rows] = sign * np.asarray(res.eqlin.marginals)
    ub_duals = sign * np.asarray(res.upper.marginals)
    finite = np.isfinite(lp.upper)
    objective = float(lp.c @ x)
    return LpSolution(
        Status.OPTIMAL,
        objective=objective,
        x=x,
        duals=duals,
        dual_objective=float(lp.rhs @ duals + lp.upper[finite] @ ub_duals[finite]),
        primal_residual=primal_residual(lp, x),
        slackness_residual=float(np.max(np.abs(duals * (lp.A @ x - lp.rhs)), initial=0.0)),
        iterations=int(getattr(res, "nit", 0)),
    )


def solve(lp: LinearProgram, engine: str = "simplex", max_iter: int = 50_000) -> LpSolution:
    """Solve ``lp``; infeasibility and unboundedness come back as a status."""
    if engine == "simplex":
        return _solve_simplex(lp, max_iter)
    if engine == "highs":
        return _solve_highs(lp)
    raise ValueError(f"unknown LP engine {engine!r}")
