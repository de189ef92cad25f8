"""Independent grid oracle for the goodness measure.

Evaluates

    min { ||Q z||_diamond : ||z||_inf = 1, ||z||_1 <= s }

restricted to the grid of step h on the faces of the sup-norm sphere (one
coordinate pinned to +-1, the rest running over multiples of h in [-1, 1]).
By symmetry of the constraint set and the objective only the +1 faces are
visited. This is the reference the solver is compared against, so it shares
no code with the package: plain branch and bound over coordinate boxes with
convexity (subgradient) lower bounds, which returns exactly the grid
minimum up to the 1e-9 relative pruning slack.

A literal enumeration over all grid points (`brute_min_omega`) validates the
branch-and-bound implementation itself on faces small enough to enumerate.
"""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np


def _norm(r: np.ndarray, diamond: str) -> float:
    if diamond == "l2":
        return float(np.linalg.norm(r))
    if diamond == "linf":
        return float(np.max(np.abs(r)))
    if diamond == "l1":
        return float(np.sum(np.abs(r)))
    raise ValueError(f"unknown diamond {diamond!r}")


def _subgradient(Qf: np.ndarray, r: np.ndarray, diamond: str) -> np.ndarray:
    """A subgradient of z -> ||base + Qf z||_diamond at the point giving r."""
    if diamond == "l2":
        nrm = np.linalg.norm(r)
        if nrm == 0.0:
            return None
        return Qf.T @ (r / nrm)
    if diamond == "linf":
        k = int(np.argmax(np.abs(r)))
        return np.sign(r[k]) * Qf[k, :] if r[k] != 0.0 else None
    return Qf.T @ np.sign(r)


def _face_min(Q: np.ndarray, j: int, s: float, diamond: str, step: float,
              best: float, prune_rel: float) -> float:
    p, n = Q.shape
    free = [d for d in range(n) if d != j]
    base = Q[:, j].copy()
    Qf = Q[:, free]
    nf = len(free)
    T = int(round(1.0 / step))
    budget = int(math.floor((s - 1.0) / step + 1e-9))
    col_cost = np.array([_norm(Qf[:, d], diamond) for d in range(nf)]) * step

    def value(t: np.ndarray) -> tuple[float, np.ndarray]:
        r = base + Qf @ (t * step)
        return _norm(r, diamond), r

    def feasible(t: np.ndarray) -> bool:
        return int(np.sum(np.abs(t))) <= budget

    def slack(v: float) -> float:
        return prune_rel * max(abs(v), 1.0)

    if nf == 0:
        v, _ = value(np.zeros(0, dtype=int))
        return min(best, v)

    lim = min(T, budget)
    lo0 = np.full(nf, -lim, dtype=int)
    hi0 = np.full(nf, lim, dtype=int)

    v0, _ = value(np.zeros(nf, dtype=int))
    best = min(best, v0)   # the origin of every face is feasible

    def box_lb(lo, hi):
        """Evaluate the box center; return (lower bound, center value, center)."""
        c = (lo + hi) // 2
        v, r = value(c)
        radius = np.maximum(c - lo, hi - c)
        sg = _subgradient(Qf, r, diamond)
        lb = v - float(col_cost @ radius)
        if sg is not None:
            lb = max(lb, v - float(np.abs(sg) * step @ radius))
        return lb, v, c

    lb, v, c = box_lb(lo0, hi0)
    if feasible(c):
        best = min(best, v)
    counter = itertools.count()
    heap = [(lb, next(counter), lo0, hi0)]
    while heap:
        lb, _, lo, hi = heapq.heappop(heap)
        if lb >= best - slack(best):
            break   # heap is ordered; nothing below can beat the incumbent
        width = hi - lo
        if int(np.prod(width + 1)) <= 32:
            ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
            for tup in itertools.product(*ranges):
                t = np.array(tup, dtype=int)
                if feasible(t):
                    v, _ = value(t)
                    best = min(best, v)
            continue
        d = int(np.argmax(width))
        mid = (lo[d] + hi[d]) // 2
        for child_lo, child_hi in (
            (lo, _with(hi, d, mid)),
            (_with(lo, d, mid + 1), hi),
        ):
            min_l1 = sum(
                0 if a <= 0 <= b else min(abs(a), abs(b))
                for a, b in zip(child_lo, child_hi)
            )
            if min_l1 > budget:
                continue
            lb, v, c = box_lb(child_lo, child_hi)
            if feasible(c):
                best = min(best, v)
            if lb < best - slack(best):
                heapq.heappush(heap, (lb, next(counter), child_lo, child_hi))
    return best


def _with(arr: np.ndarray, d: int, value: int) -> np.ndarray:
    out = arr.copy()
    out[d] = value
    return out


def grid_min_omega(Q, s: float, diamond: str = "l2", step: float = 0.01,
                   prune_rel: float = 1e-9) -> float:
    """Grid-oracle goodness value; exact grid minimum up to prune_rel."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    best = math.inf
    for j in range(Q.shape[1]):
        best = _face_min(Q, j, s, diamond, step, best, prune_rel)
    return best


def brute_min_omega(Q, s: float, diamond: str = "l2",
                    step: float = 0.01) -> float:
    """Literal enumeration of every face grid point. Small n only."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p, n = Q.shape
    T = int(round(1.0 / step))
    budget = int(math.floor((s - 1.0) / step + 1e-9))
    lim = min(T, budget)
    ticks = np.arange(-lim, lim + 1)
    best = math.inf
    for j in range(n):
        free = [d for d in range(n) if d != j]
        grids = np.meshgrid(*([ticks] * len(free)), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1) if free else \
            np.zeros((1, 0), dtype=int)
        keep = np.sum(np.abs(pts), axis=1) <= budget
        pts = pts[keep]
        Z = pts * step
        R = Z @ Q[:, free].T + Q[:, j]
        if diamond == "l2":
            vals = np.linalg.norm(R, axis=1)
        elif diamond == "linf":
            vals = np.max(np.abs(R), axis=1)
        else:
            vals = np.sum(np.abs(R), axis=1)
        best = min(best, float(np.min(vals)))
    return best
