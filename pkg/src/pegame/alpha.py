"""Alpha-vector sets: evaluation, pruning, envelope vertices, max-norm distance.

An alpha-set is a 2-D float array with one vector per row. The value of the set
at a belief is the maximum of the row-wise dot products, so every set describes
a piecewise-linear convex function on the probability simplex.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterable, Iterator, Mapping

import numpy as np

from .game import PursuerPosition
from .lp import LinearProgram, solve

PRUNE_TOL = 1e-9
ACTIVE_TOL = 1e-9
DEDUP_TOL = 1e-8


@dataclass(frozen=True)
class EnvelopeConfig:
    """Limits for exact envelope-vertex enumeration."""

    max_free_dim: int = 7
    max_alphas: int = 64
    max_systems: int = 400_000
    fallback_samples: int = 512
    seed: int = 0


DEFAULT_ENVELOPE = EnvelopeConfig()


def as_alpha_set(alphas: Iterable[Iterable[float]] | np.ndarray) -> np.ndarray:
    arr = np.array(alphas, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("an alpha-set needs at least one vector")
    return arr


def evaluate(alphas: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.asarray(alphas) @ np.asarray(b)))


def evaluate_many(alphas: np.ndarray, beliefs: np.ndarray) -> np.ndarray:
    """Envelope value at each row of ``beliefs``."""
    return np.max(np.asarray(beliefs) @ np.asarray(alphas).T, axis=1)


class ValueFunction(Mapping[PursuerPosition, np.ndarray]):
    """Map from pursuer position to its alpha-set."""

    def __init__(self, sets: Mapping[PursuerPosition, np.ndarray]):
        self._sets = {}
        for pos, alphas in sets.items():
            arr = as_alpha_set(alphas)
            arr.flags.writeable = False
            self._sets[pos] = arr

    def __getitem__(self, pos: PursuerPosition) -> np.ndarray:
        return self._sets[pos]

    def __iter__(self) -> Iterator[PursuerPosition]:
        return iter(sorted(self._sets))

    def __len__(self) -> int:
        return len(self._sets)

    def value(self, pos: PursuerPosition, b: np.ndarray) -> float:
        if pos not in self._sets:
            raise KeyError(f"no value function for position {pos}")
        return evaluate(self._sets[pos], b)

    def n_alphas(self) -> int:
        return sum(len(a) for a in self._sets.values())

    def __repr__(self) -> str:
        sizes = ", ".join(f"{p}: {len(a)}" for p, a in sorted(self._sets.items()))
        return f"ValueFunction({{{sizes}}})"


def dominated_mask(alphas: np.ndarray, tol: float = 1e-12, block: int = 512) -> np.ndarray:
    """Mask of rows that another row weakly dominates (first copy of ties kept).

    Rows are swept in order of decreasing sum, since only a row with a larger
    sum can dominate; each block is checked against the rows kept so far and
    then against its own earlier members.
    """
    alphas = np.asarray(alphas, dtype=float)
    k = len(alphas)
    order = np.lexsort((np.arange(k), -alphas.sum(axis=1)))
    out = np.ones(k, dtype=bool)
    front = alphas[:0]
    for lo in range(0, k, block):
        ids = order[lo : lo + block]
        rows = alphas[ids]
        alive = np.ones(len(ids), dtype=bool)
        if len(front):
            alive = ~np.any(np.all(front[None, :, :] >= rows[:, None, :] - tol, axis=2), axis=1)
        ids, rows = ids[alive], rows[alive]
        ge = np.all(rows[None, :, :] >= rows[:, None, :] - tol, axis=2)  # [i, j]: row j >= row i
        ge &= np.tri(len(ids), k=-1, dtype=bool)
        # a dominated earlier member is itself covered by an earlier survivor
        keep = ~ge.any(axis=1)
        out[ids[keep]] = False
        front = np.vstack([front, rows[keep]])
    return out


def _margin_lp(alpha: np.ndarray, others: np.ndarray) -> tuple[float, np.ndarray]:
    """max over beliefs of alpha.b - max_others beta.b, and the maximizing belief."""
    n = alpha.size
    k = len(others)
    # variables: b (n), delta (free)
    A = np.zeros((k + 1, n + 1))
    A[:k, :n] = alpha - others
    A[:k, n] = -1.0
    A[k, :n] = 1.0
    c = np.zeros(n + 1)
    c[n] = 1.0
    lower = np.zeros(n + 1)
    lower[n] = -np.inf
    sol = solve(LinearProgram(c, A, [">="] * k + ["="], np.r_[np.zeros(k), 1.0], maximize=True, lower=lower))
    return sol.objective, sol.x[:n]


def _witness_margin(alpha: np.ndarray, others: np.ndarray, tol: float, start: int = 4) -> float:
    """Decide whether ``alpha`` beats ``others`` by more than ``tol`` somewhere.

    Cutting planes: solve against a few competitors, then add the one that
    beats ``alpha`` most at the relaxed optimum. Returns the exact maximal
    margin when it is at most ``tol``, otherwise some margin above ``tol``.
    """
    n = alpha.size
    # seed with the strongest competitors at the corners and the centre
    probes = np.vstack([np.eye(n), np.full(n, 1.0 / n)])
    active = set(np.argmax(probes @ others.T, axis=1).tolist())
    active.update(np.argsort(-(others.sum(axis=1)))[:start].tolist())
    while True:
        idx = sorted(active)
        relaxed, b = _margin_lp(alpha, others[idx])
        if relaxed <= tol:
            return relaxed
        gaps = others @ b
        actual = float(alpha @ b - gaps.max())
        if actual > tol or actual >= relaxed - 1e-12:
            return actual
        worst = int(np.argmax(gaps))
        if worst in active:  # numerical stall: fall back to every constraint
            return _margin_lp(alpha, others)[0]
        active.add(worst)


def prune(alphas: np.ndarray, tol: float = PRUNE_TOL, seed: int = 0) -> np.ndarray:
    """Drop vectors that never strictly attain the upper envelope."""
    alphas = as_alpha_set(alphas)
    alphas = alphas[~dominated_mask(alphas)]
    k, n = alphas.shape
    if k == 1:
        return alphas
    # any vector that wins by a clear margin at a sampled belief stays
    rng = np.random.default_rng(seed)
    probes = np.vstack([np.eye(n), np.full((1, n), 1.0 / n), rng.dirichlet(np.ones(n), size=256)])
    vals = probes @ alphas.T
    top = np.argmax(vals, axis=1)
    srt = np.sort(vals, axis=1)
    clear = srt[:, -1] - srt[:, -2] > tol
    certain = np.zeros(k, dtype=bool)
    certain[top[clear]] = True
    keep = np.ones(k, dtype=bool)
    for i in range(k):
        if certain[i]:
            continue
        others = alphas[keep & (np.arange(k) != i)]
        if _witness_margin(alphas[i], others, tol) <= tol:
            keep[i] = False
    return alphas[keep]


def _dedupe(points: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    if len(points) == 0:
        return points
    keys = np.round(points / tol).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(idx)]


def _n_systems(k: int, m: int) -> int:
    return sum(comb(k, p) * comb(m, p) for p in range(1, min(k, m) + 1))


def exact_enumeration_possible(n_alphas: int, n_free: int, cfg: EnvelopeConfig = DEFAULT_ENVELOPE) -> bool:
    return (
        n_free - 1 <= cfg.max_free_dim
        and n_alphas <= cfg.max_alphas
        and _n_systems(n_free, n_alphas) <= cfg.max_systems
    )


def _exact_vertices(alphas: np.ndarray, free: list[int], n: int) -> np.ndarray:
    k = len(free)
    sub = alphas[:, free]
    m = len(sub)
    found = []
    for p in range(1, min(k, m) + 1):
        supports = np.array(list(itertools.combinations(range(k), p)))
        pieces = np.array(list(itertools.combinations(range(m), p)))
        # system rows: (alpha_i - alpha_i0) . b_T = 0 for the p-1 extra pieces, sum b_T = 1
        for T in supports:
            mats = np.empty((len(pieces), p, p))
            mats[:, 0, :] = 1.0
            if p > 1:
                base = sub[pieces[:, 0]][:, T]
                rest = sub[pieces[:, 1:]][:, :, T]
                mats[:, 1:, :] = rest - base[:, None, :]
            rhs = np.zeros((len(pieces), p))
            rhs[:, 0] = 1.0
            det = np.linalg.det(mats)
            ok = np.abs(det) > 1e-12
            if not np.any(ok):
                continue
            sol = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
            feasible = np.all(sol >= -ACTIVE_TOL, axis=1)
            if not np.any(feasible):
                continue
            sol = sol[feasible]
            piv = pieces[ok][feasible][:, 0]
            vals = sol @ sub[:, T].T
            mine = vals[np.arange(len(sol)), piv]
            maximal = mine >= vals.max(axis=1) - ACTIVE_TOL
            sol = np.clip(sol[maximal], 0.0, None)
            full = np.zeros((len(sol), n))
            full[:, np.array(free)[T]] = sol / sol.sum(axis=1, keepdims=True)
            found.append(full)
    return np.vstack(found) if found else np.zeros((0, n))


def _fallback_vertices(alphas: np.ndarray, free: list[int], n: int, cfg: EnvelopeConfig) -> np.ndarray:
    k = len(free)
    rng = np.random.default_rng(cfg.seed)
    pts = [np.eye(n)[free]]
    sample = np.zeros((cfg.fallback_samples, n))
    sample[:, free] = rng.dirichlet(np.ones(k), size=cfg.fallback_samples)
    pts.append(sample)
    # crossings of every pair of pieces along every edge of the sub-simplex
    sub = alphas[:, free]
    for a, b in itertools.combinations(range(k), 2):
        da = sub[:, a][:, None] - sub[:, a][None, :]
        db = sub[:, b][:, None] - sub[:, b][None, :]
        # t*da + (1-t)*db = 0
        denom = da - db
        with np.errstate(divide="ignore", invalid="ignore"):
            t = -db / denom
        mask = np.isfinite(t) & (t > 0) & (t < 1)
        for tt in np.unique(t[mask]):
            p = np.zeros(n)
            p[free[a]] = tt
            p[free[b]] = 1 - tt
            pts.append(p[None, :])
    return np.vstack(pts)


def extreme_points(
    alphas: np.ndarray, free: Iterable[int], cfg: EnvelopeConfig = DEFAULT_ENVELOPE
) -> np.ndarray:
    """Vertices of the envelope's linear regions on the face spanned by ``free``.

    Returns one belief per row. Every corner of the face is included. When the
    exact enumeration exceeds the limits in ``cfg`` the result is the corners,
    seeded random beliefs and the pairwise crossings along face edges.
    """
    free = sorted(set(int(v) for v in free))
    alphas = as_alpha_set(alphas)
    n = alphas.shape[1]
    if not free:
        return np.zeros((0, n))
    if exact_enumeration_possible(len(alphas), len(free), cfg):
        pts = _exact_vertices(alphas, free, n)
    else:
        pts = _fallback_vertices(alphas, free, n, cfg)
    pts = np.vstack([np.eye(n)[free], pts])
    return _dedupe(pts)


def max_norm_distance(
    v: Mapping[PursuerPosition, np.ndarray],
    w: Mapping[PursuerPosition, np.ndarray],
    cfg: EnvelopeConfig = DEFAULT_ENVELOPE,
) -> float:
    """Largest absolute gap between two value functions over all beliefs.

    On each linear region of ``w`` the difference ``v - w`` is convex, so its
    maximum sits on a region vertex; the same holds with the roles swapped.
    """
    if set(v) != set(w):
        raise ValueError("value functions cover different positions")
    worst = 0.0
    for pos in v:
        a, b = as_alpha_set(v[pos]), as_alpha_set(w[pos])
        n = a.shape[1]
        pts = np.vstack([extreme_points(a, range(n), cfg), extreme_points(b, range(n), cfg)])
        gap = np.abs(evaluate_many(a, pts) - evaluate_many(b, pts))
        worst = max(worst, float(gap.max()))
    return worst
