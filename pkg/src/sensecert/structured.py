"""Structured inequality problems with fast Newton-system solves.

The certification subproblems all share one shape: a dense variable block z,
absolute-value splitting blocks |M z + off| <= u (optionally with a simplex
budget sum(u) <= B), and paired +-W z rows. For these, the interior-point
Newton matrix restricted to z is

    W^T (d+ + d-) W  +  sum_k M^T diag(a - e^2/a) M  +  rank-one terms
                     (+ quadratic-constraint terms)

after eliminating every u block through its diagonal-plus-rank-one Schur
complement (Sherman-Morrison). That turns the per-step cost from
O(rows * vars^2) on the stacked system into O(p q^2) with q = dim(z), which
is what keeps n = 256 table runs tractable.

Objects here implement the same problem protocol consumed by the drivers in
`conic.py`, so both solvers run the identical algorithm on either
representation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .conic import SolverOptions, _KktRegularizer, _solve_with_rank_one


@dataclass(frozen=True)
class PmRows:
    """Paired rows  W z <= h_plus  and  -W z <= h_minus."""

    W: np.ndarray
    h_plus: np.ndarray
    h_minus: np.ndarray


@dataclass(frozen=True)
class AbsBlock:
    """|M z + offset| <= u componentwise, optional budget sum(u) <= B.

    M None means the identity (then size must equal dim z); offset None means
    zero. c_u is the objective coefficient on u (scalar or vector).
    """

    size: int
    M: np.ndarray | None = None
    offset: np.ndarray | None = None
    budget: float | None = None
    c_u: float | np.ndarray = 0.0


@dataclass(frozen=True)
class QuadTerm:
    """0.5*||P z - d||^2 + g.z - r <= 0 (z block only)."""

    P: np.ndarray
    d: np.ndarray | None = None
    g: np.ndarray | None = None
    r: float = 0.5


class StructuredProblem:
    def __init__(
        self,
        c_z: np.ndarray,
        blocks: list[AbsBlock],
        pm: PmRows | None = None,
        quad: QuadTerm | None = None,
        opts: SolverOptions | None = None,
    ):
        self.q = int(np.asarray(c_z).size)
        self.blocks = blocks
        self.pm = pm
        self.quad = quad
        self._reg = _KktRegularizer(opts or SolverOptions())

        sizes = [b.size for b in blocks]
        self.nx = self.q + sum(sizes)
        # variable slices
        self.z_sl = slice(0, self.q)
        self.u_sl = []
        at = self.q
        for p in sizes:
            self.u_sl.append(slice(at, at + p))
            at += p

        # row layout: pm+ , pm- , then per block (+, -, budget)
        self.rows_pm = 0 if pm is None else pm.W.shape[0]
        self.slices = {}
        at = 0
        if pm is not None:
            self.slices["pm+"] = slice(at, at + self.rows_pm); at += self.rows_pm
            self.slices["pm-"] = slice(at, at + self.rows_pm); at += self.rows_pm
        for k, b in enumerate(blocks):
            self.slices[("abs+", k)] = slice(at, at + b.size); at += b.size
            self.slices[("abs-", k)] = slice(at, at + b.size); at += b.size
            if b.budget is not None:
                self.slices[("budget", k)] = at; at += 1
        self.m_rows = at

        c = np.zeros(self.nx)
        c[self.z_sl] = np.asarray(c_z, dtype=float).ravel()
        for sl, b in zip(self.u_sl, blocks):
            c[sl] = b.c_u
        self.c = c

        if quad is not None:
            P = np.atleast_2d(np.asarray(quad.P, dtype=float))
            self._P = P
            self._PtP = P.T @ P
            self._qd = np.zeros(P.shape[0]) if quad.d is None else np.asarray(quad.d, float).ravel()
            self._qg = np.zeros(self.q) if quad.g is None else np.asarray(quad.g, float).ravel()
            self._qr = float(quad.r)

    # -- protocol ---------------------------------------------------------

    def _mz(self, b: AbsBlock, z):
        out = z if b.M is None else b.M @ z
        if b.offset is not None:
            out = out + b.offset
        return out

    def residuals(self, x):
        z = x[self.z_sl]
        out = np.empty(self.m_rows)
        if self.pm is not None:
            wz = self.pm.W @ z
            out[self.slices["pm+"]] = wz - self.pm.h_plus
            out[self.slices["pm-"]] = -wz - self.pm.h_minus
        for k, b in enumerate(self.blocks):
            u = x[self.u_sl[k]]
            mz = self._mz(b, z)
            out[self.slices[("abs+", k)]] = mz - u
            out[self.slices[("abs-", k)]] = -mz - u
            if b.budget is not None:
                out[self.slices[("budget", k)]] = np.sum(u) - b.budget
        return out

    def mul_G(self, dx):
        z = dx[self.z_sl]
        out = np.empty(self.m_rows)
        if self.pm is not None:
            wz = self.pm.W @ z
            out[self.slices["pm+"]] = wz
            out[self.slices["pm-"]] = -wz
        for k, b in enumerate(self.blocks):
            u = dx[self.u_sl[k]]
            mz = z if b.M is None else b.M @ z
            out[self.slices[("abs+", k)]] = mz - u
            out[self.slices[("abs-", k)]] = -mz - u
            if b.budget is not None:
                out[self.slices[("budget", k)]] = np.sum(u)
        return out

    def mul_Gt(self, y):
        out = np.zeros(self.nx)
        zpart = np.zeros(self.q)
        if self.pm is not None:
            diff = y[self.slices["pm+"]] - y[self.slices["pm-"]]
            zpart += self.pm.W.T @ diff
        for k, b in enumerate(self.blocks):
            yp = y[self.slices[("abs+", k)]]
            ym = y[self.slices[("abs-", k)]]
            diff = yp - ym
            zpart += diff if b.M is None else b.M.T @ diff
            uval = -(yp + ym)
            if b.budget is not None:
                uval = uval + y[self.slices[("budget", k)]]
            out[self.u_sl[k]] = uval
        out[self.z_sl] = zpart
        return out

    def quad_val(self, x):
        if self.quad is None:
            return None
        z = x[self.z_sl]
        resid = self._P @ z - self._qd
        return 0.5 * float(resid @ resid) + float(self._qg @ z) - self._qr

    def grad_quad(self, x):
        out = np.zeros(self.nx)
        z = x[self.z_sl]
        out[self.z_sl] = self._P.T @ (self._P @ z - self._qd) + self._qg
        return out

    def kkt_solve(self, d, rhs, quad_alpha=0.0, quad_vec=None, quad_gamma=0.0):
        q = self.q
        H = np.zeros((q, q))
        if self.pm is not None:
            dsum = d[self.slices["pm+"]] + d[self.slices["pm-"]]
            W = self.pm.W
            H += W.T @ (dsum[:, None] * W)
        if quad_alpha:
            H += quad_alpha * self._PtP

        rhs_z = rhs[self.z_sl].copy()
        elim = []  # per block: (a, e, beta, inv_a, y)
        for k, b in enumerate(self.blocks):
            dp = d[self.slices[("abs+", k)]]
            dm = d[self.slices[("abs-", k)]]
            a = dp + dm
            e = dm - dp
            inv_a = 1.0 / a
            if b.budget is not None:
                bw = float(d[self.slices[("budget", k)]])
                beta = bw / (1.0 + bw * float(np.sum(inv_a)))
            else:
                beta = 0.0
            diag_term = a - e * e * inv_a
            eov = e * inv_a
            if b.M is None:
                H[np.arange(q), np.arange(q)] += diag_term
                v = eov
            else:
                H += b.M.T @ (diag_term[:, None] * b.M)
                v = b.M.T @ eov
            if beta:
                H += beta * np.outer(v, v)
            # u-block contribution to the reduced right-hand side
            ru = rhs[self.u_sl[k]]
            y = inv_a * ru
            if beta:
                y = y - beta * inv_a * float(np.sum(y))
            ey = e * y
            rhs_z -= ey if b.M is None else b.M.T @ ey
            elim.append((e, beta, inv_a, ru))

        if quad_gamma and quad_vec is not None:
            dz = _solve_with_rank_one(
                self._reg, H, rhs_z, quad_gamma, quad_vec[self.z_sl]
            )
        else:
            dz = self._reg.solve(H, rhs_z)

        out = np.empty(self.nx)
        out[self.z_sl] = dz
        for k, b in enumerate(self.blocks):
            e, beta, inv_a, ru = elim[k]
            mdz = dz if b.M is None else b.M @ dz
            w = ru - e * mdz
            y = inv_a * w
            if beta:
                y = y - beta * inv_a * float(np.sum(y))
            out[self.u_sl[k]] = y
        return out

    # -- helpers ----------------------------------------------------------

    def set_linear_z(self, c_z):
        """Replace the objective coefficients on the z block in place."""
        self.c[self.z_sl] = np.asarray(c_z, dtype=float).ravel()

    def set_budget(self, k, budget):
        """Replace block k's budget value (the row layout is unchanged)."""
        if self.blocks[k].budget is None:
            raise ValueError("block was built without a budget row")
        self.blocks[k] = replace(self.blocks[k], budget=float(budget))

    def pack(self, z, us):
        x = np.empty(self.nx)
        x[self.z_sl] = z
        for sl, u in zip(self.u_sl, us):
            x[sl] = u
        return x

    def unpack_z(self, x):
        return x[self.z_sl]
