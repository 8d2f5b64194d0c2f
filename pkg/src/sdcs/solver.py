"""Primal-dual interior-point solver for the l1 decoding programs.

The programs handled here all have the form::

    minimize    ||z||_1
    subject to  Phi z - D**r u + nu = q
                u in U   (l2 ball of radius tau, l_inf box of radius tau, or u absent)
                ||nu||_2 <= rho   (or nu absent)

Writing the quantization constraint through the state variable ``u`` instead
of ``||D**-r (Phi z + nu - q)|| <= tau`` keeps the problem data well scaled:
``D**r`` has O(2**r) entries while ``D**-r`` grows like m**r.

The cone program is solved with a Mehrotra predictor-corrector method using
Nesterov-Todd scaling (the standard conelp layout: min c'x s.t. Gx + s = h,
Ax = b, s in K).  Newton systems are reduced analytically to either an m x m
system in the equality multipliers (``dual`` strategy) or, when m > N, an
N x N system in z (``primal`` strategy).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps

from .linops import DiffOperator

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class InfeasibleDetected(SolverError):
    """The iterates produced a certificate that the feasible set is empty."""


class NotConverged(SolverError):
    """Iteration limit reached with residuals above tolerance."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


# --------------------------------------------------------------------------
# cone algebra (nonnegative orthant blocks 'l' and second-order cones 'q')


@dataclass(frozen=True)
class Block:
    kind: str
    start: int
    size: int

    @property
    def sl(self):
        return slice(self.start, self.start + self.size)


def _layout(spec):
    blocks, pos = [], 0
    for kind, size in spec:
        blocks.append(Block(kind, pos, size))
        pos += size
    return blocks, pos


def _degree(blocks):
    return sum(b.size if b.kind == "l" else 1 for b in blocks)


def _unit(blocks, n):
    e = np.zeros(n)
    for b in blocks:
        if b.kind == "l":
            e[b.sl] = 1.0
        else:
            e[b.start] = 1.0
    return e


def _jdet(x):
    return x[0] ** 2 - x[1:] @ x[1:]


def _circ(blocks, x, y):
    """Jordan product x o y."""
    out = np.empty_like(x)
    for b in blocks:
        xs, ys = x[b.sl], y[b.sl]
        if b.kind == "l":
            out[b.sl] = xs * ys
        else:
            out[b.start] = xs @ ys
            out[b.start + 1:b.start + b.size] = xs[0] * ys[1:] + ys[0] * xs[1:]
    return out


def _sdiv(blocks, lam, x):
    """Solve lam o u = x for u."""
    out = np.empty_like(x)
    for b in blocks:
        ls, xs = lam[b.sl], x[b.sl]
        if b.kind == "l":
            out[b.sl] = xs / ls
        else:
            det = _jdet(ls)
            u0 = (ls[0] * xs[0] - ls[1:] @ xs[1:]) / det
            out[b.start] = u0
            out[b.start + 1:b.start + b.size] = (xs[1:] - u0 * ls[1:]) / ls[0]
    return out


def _min_eig(blocks, x):
    vals = []
    for b in blocks:
        xs = x[b.sl]
        vals.append(xs.min() if b.kind == "l" else xs[0] - np.linalg.norm(xs[1:]))
    return min(vals)


def _max_step(blocks, x, d):
    """Largest alpha with x + alpha d in the cone (x interior); inf if unbounded."""
    alpha = np.inf
    for b in blocks:
        xs, ds = x[b.sl], d[b.sl]
        if b.kind == "l":
            neg = ds < 0
            if np.any(neg):
                alpha = min(alpha, np.min(-xs[neg] / ds[neg]))
        else:
            a = _jdet(ds)
            bb = 2.0 * (xs[0] * ds[0] - xs[1:] @ ds[1:])
            c = _jdet(xs)
            if c <= 0:
                return 0.0
            disc = bb * bb - 4.0 * a * c
            if a < 0 or (bb < 0 and disc >= 0):
                root = 2.0 * c / (-bb + np.sqrt(max(disc, 0.0)))
                alpha = min(alpha, root)
            elif a == 0 and bb < 0:
                alpha = min(alpha, -c / bb)
            # the first coordinate must stay positive too
            if ds[0] < 0:
                alpha = min(alpha, -xs[0] / ds[0])
    return alpha


@dataclass
class Scaling:
    """Nesterov-Todd scaling W with W z = W**-1 s = lam."""

    blocks: list
    d: np.ndarray = None          # W for 'l' entries (same length as s)
    beta: dict = field(default_factory=dict)
    wbar: dict = field(default_factory=dict)

    @classmethod
    def identity(cls, blocks, n):
        sc = cls(blocks, np.ones(n))
        for i, b in enumerate(blocks):
            if b.kind == "q":
                w = np.zeros(b.size)
                w[0] = 1.0
                sc.beta[i], sc.wbar[i] = 1.0, w
        return sc

    @classmethod
    def nt(cls, blocks, s, z):
        sc = cls(blocks, np.ones_like(s))
        for i, b in enumerate(blocks):
            ss, zs = s[b.sl], z[b.sl]
            if b.kind == "l":
                sc.d[b.sl] = np.sqrt(ss / zs)
            else:
                sn, zn = np.sqrt(_jdet(ss)), np.sqrt(_jdet(zs))
                sb, zb = ss / sn, zs / zn
                gam = np.sqrt((1.0 + sb @ zb) / 2.0)
                w = sb.copy()
                w[0] += zb[0]
                w[1:] -= zb[1:]
                w /= 2.0 * gam
                sc.beta[i] = np.sqrt(sn / zn)
                sc.wbar[i] = w
        return sc

    def apply(self, x, inverse=False):
        out = np.empty_like(x)
        for i, b in enumerate(self.blocks):
            xs = x[b.sl]
            if b.kind == "l":
                out[b.sl] = xs / self.d[b.sl] if inverse else xs * self.d[b.sl]
            else:
                w, beta = self.wbar[i], self.beta[i]
                if inverse:
                    xs = xs.copy()
                    xs[1:] = -xs[1:]
                w0, w1 = w[0], w[1:]
                t = w1 @ xs[1:]
                y0 = w0 * xs[0] + t
                y1 = xs[1:] + (t / (1.0 + w0) + xs[0]) * w1
                if inverse:
                    out[b.start] = y0 / beta
                    out[b.start + 1:b.start + b.size] = -y1 / beta
                else:
                    out[b.start] = beta * y0
                    out[b.start + 1:b.start + b.size] = beta * y1
        return out

    def apply2(self, x, inverse=False):
        """W**2 x or W**-2 x."""
        out = np.empty_like(x)
        for i, b in enumerate(self.blocks):
            xs = x[b.sl]
            if b.kind == "l":
                dd = self.d[b.sl] ** 2
                out[b.sl] = xs / dd if inverse else xs * dd
            else:
                w, beta = self.wbar[i], self.beta[i]
                a = w.copy()
                if inverse:
                    a[1:] = -a[1:]
                jx = xs.copy()
                jx[1:] = -jx[1:]
                y = 2.0 * a * (a @ xs) - jx
                out[b.sl] = y / beta ** 2 if inverse else y * beta ** 2
        return out


# --------------------------------------------------------------------------
# the l1 program and its structured KKT systems


@dataclass
class L1Program:
    """min ||z||_1 s.t. Phi z - D**r u + nu = q, u in U(tau), ||nu|| <= rho.

    ``u_kind`` is ``"l2"``, ``"linf"`` or ``None`` (u absent, i.e. Phi z + nu = q);
    ``rho=None`` drops nu.  ``r = 0`` means ``D**0 = I``.
    """

    phi: np.ndarray
    q: np.ndarray
    r: int = 1
    u_kind: str = "l2"
    tau: float = 1.0
    rho: float = None
    cache: "OperatorCache" = None

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.m, self.N = self.phi.shape
        if self.q.shape != (self.m,):
            raise ValueError(f"q has shape {self.q.shape}, expected ({self.m},)")
        if self.u_kind not in ("l2", "linf", None):
            raise ValueError(f"unknown constraint kind {self.u_kind!r}")
        if self.u_kind is not None and not self.tau > 0:
            raise ValueError("constraint radius must be positive")
        if self.rho is not None and not self.rho > 0:
            raise ValueError("noise radius must be positive (drop nu for zero noise)")
        if self.cache is None:
            self.cache = OperatorCache(self.phi, self.r)
        self.D = DiffOperator(self.m, self.r)
        N, m = self.N, self.m
        self.nu_dim = m if self.u_kind is not None else 0
        self.nn_dim = m if self.rho is not None else 0
        # variable layout x = (z, t, u, nu)
        self.iz = slice(0, N)
        self.it = slice(N, 2 * N)
        self.iu = slice(2 * N, 2 * N + self.nu_dim)
        self.inu = slice(2 * N + self.nu_dim, 2 * N + self.nu_dim + self.nn_dim)
        self.n = 2 * N + self.nu_dim + self.nn_dim
        cones = [("l", 2 * N)]
        if self.u_kind == "l2":
            cones.append(("q", m + 1))
        elif self.u_kind == "linf":
            cones.append(("l", 2 * m))
        if self.rho is not None:
            cones.append(("q", m + 1))
        self.blocks, self.ns = _layout(cones)
        self.c = np.zeros(self.n)
        self.c[self.it] = 1.0
        self.h = np.zeros(self.ns)
        if self.u_kind == "l2":
            self.h[self.blocks[1].start] = 1.0
        elif self.u_kind == "linf":
            self.h[self.blocks[1].sl] = 1.0
        if self.rho is not None:
            self.h[self.blocks[-1].start] = 1.0

    # G x and G^T y ---------------------------------------------------------
    def G(self, x):
        N = self.N
        out = np.zeros(self.ns)
        z, t = x[self.iz], x[self.it]
        out[:N] = z - t
        out[N:2 * N] = -z - t
        if self.u_kind == "l2":
            b = self.blocks[1]
            out[b.start + 1:b.start + b.size] = -x[self.iu] / self.tau
        elif self.u_kind == "linf":
            b = self.blocks[1]
            u = x[self.iu] / self.tau
            out[b.start:b.start + self.m] = u
            out[b.start + self.m:b.start + b.size] = -u
        if self.rho is not None:
            b = self.blocks[-1]
            out[b.start + 1:b.start + b.size] = -x[self.inu] / self.rho
        return out

    def GT(self, y):
        N = self.N
        out = np.zeros(self.n)
        y1, y2 = y[:N], y[N:2 * N]
        out[self.iz] = y1 - y2
        out[self.it] = -y1 - y2
        if self.u_kind == "l2":
            b = self.blocks[1]
            out[self.iu] = -y[b.start + 1:b.start + b.size] / self.tau
        elif self.u_kind == "linf":
            b = self.blocks[1]
            out[self.iu] = (y[b.start:b.start + self.m] - y[b.start + self.m:b.start + b.size]) / self.tau
        if self.rho is not None:
            b = self.blocks[-1]
            out[self.inu] = -y[b.start + 1:b.start + b.size] / self.rho
        return out

    # A x and A^T y -----------------------------------------------------------
    def A(self, x):
        out = self.phi @ x[self.iz]
        if self.u_kind is not None:
            out -= self.D.apply(x[self.iu])
        if self.rho is not None:
            out += x[self.inu]
        return out

    def AT(self, y):
        out = np.zeros(self.n)
        out[self.iz] = self.phi.T @ y
        if self.u_kind is not None:
            out[self.iu] = -self.D.apply_T(y)
        if self.rho is not None:
            out[self.inu] = y
        return out

    # quantities used by the stopping rule ------------------------------------
    def state_of(self, z, nu=None):
        """D**-r (Phi z + nu - q), accumulated in extended precision."""
        res = self.phi.astype(np.longdouble) @ np.asarray(z, dtype=np.longdouble)
        res -= self.q
        if nu is not None:
            res += nu
        w = res
        for _ in range(self.r):
            w = np.cumsum(w)
        return w

    def constraint_violation(self, z, nu=None):
        """Relative violation of the state constraint (0 when satisfied)."""
        if self.u_kind is None:
            res = self.phi @ z - self.q + (nu if nu is not None else 0.0)
            return float(np.linalg.norm(res) / max(1.0, np.linalg.norm(self.q)))
        w = self.state_of(z, nu)
        nrm = np.linalg.norm(w) if self.u_kind == "l2" else np.max(np.abs(w))
        return float(max(0.0, nrm - self.tau) / self.tau)

    def representable_violation(self, z):
        """Relative violation floor set by double-precision rounding of z and q.

        ``||D**-r||_2 <= (2 sin(pi / (4m + 2)))**-r``; a unit roundoff in
        ``Phi z - q`` can move the state by that factor.
        """
        if self.u_kind is None:
            return 0.0
        sig = (2.0 * np.sin(np.pi / (4 * self.m + 2))) ** (-self.r)
        scale = self.cache.phi_norm * np.linalg.norm(z) + np.linalg.norm(self.q)
        return float(64 * np.finfo(float).eps * sig * scale / self.tau)


class OperatorCache:
    """Per-(Phi, r) quantities reused across every decode with that matrix."""

    def __init__(self, phi, r):
        self.phi = np.asarray(phi, dtype=float)
        self.r = r
        self._B = None
        self._BtB = None
        self._DDt = None
        self._Dr = None
        self._phi_norm = None

    @property
    def phi_norm(self):
        if self._phi_norm is None:
            self._phi_norm = float(np.linalg.norm(self.phi, 2)) if min(self.phi.shape) <= 1024 \
                else float(np.linalg.norm(self.phi))
        return self._phi_norm

    @property
    def B(self):
        """D**-r Phi."""
        if self._B is None:
            w = self.phi.astype(np.longdouble)
            for _ in range(self.r):
                w = np.cumsum(w, axis=0)
            self._B = w.astype(float)
        return self._B

    @property
    def BtB(self):
        if self._BtB is None:
            self._BtB = self.B.T @ self.B
        return self._BtB

    @property
    def Dr_sparse(self):
        if self._Dr is None:
            m = self.phi.shape[0]
            D = sps.identity(m, format="csr") - sps.eye(m, k=-1, format="csr")
            Dr = sps.identity(m, format="csr")
            for _ in range(self.r):
                Dr = D @ Dr
            self._Dr = Dr.tocsr()
        return self._Dr

    @property
    def DDt(self):
        if self._DDt is None:
            self._DDt = (self.Dr_sparse @ self.Dr_sparse.T).toarray()
        return self._DDt


def _banded_upper(M, bw):
    m = M.shape[0]
    ab = np.zeros((bw + 1, m))
    for k in range(bw + 1):
        ab[bw - k, k:] = M.diagonal(k)
    return ab


class KKT:
    """Factorization of the reduced Newton system for a given scaling."""

    def __init__(self, prog: L1Program, sc: Scaling, strategy="auto"):
        self.p = prog
        self.sc = sc
        N, m = prog.N, prog.m
        d2 = 1.0 / sc.d[:2 * N] ** 2         # W**-2 on the l1 block
        self.d1, self.d2 = d2[:N], d2[N:]
        self.hz = 4.0 * self.d1 * self.d2 / (self.d1 + self.d2)
        self.cross = (self.d2 - self.d1) / (self.d1 + self.d2)

        # u block: H_u = diag(hu_diag) or alpha**-1 (I + 2 w w^T); store the inverse pieces.
        self.hu = None
        if prog.u_kind == "l2":
            w1 = sc.wbar[1][1:]
            self.u_w = w1
            self.u_scale = prog.tau * sc.beta[1]
            self.hu = "soc"
        elif prog.u_kind == "linf":
            b = prog.blocks[1]
            dd = 1.0 / sc.d[b.sl] ** 2
            self.hu_diag = (dd[:m] + dd[m:]) / prog.tau ** 2
            self.hu = "diag"
        self.has_nu = prog.rho is not None
        if self.has_nu:
            k = len(prog.blocks) - 1
            self.n_w = sc.wbar[k][1:]
            self.n_scale = prog.rho * sc.beta[k]

        if strategy == "auto":
            strategy = "primal" if (m > N and self.hu is not None) else "dual"
        if strategy == "primal" and self.hu is None:
            strategy = "dual"
        # both reductions solve the same system; if one loses definiteness to
        # cancellation, the other usually has not
        order = ["dual", "primal"] if strategy == "dual" else ["primal", "dual"]
        if self.hu is None:
            order = ["dual"]
        for attempt, name in enumerate(order):
            try:
                (self._factor_dual if name == "dual" else self._factor_primal)()
                self.strategy = name
                break
            except (SolverError, np.linalg.LinAlgError):
                if attempt == len(order) - 1:
                    raise SolverError("Newton system is not positive definite") from None

    # block inverses ----------------------------------------------------------
    def Hu_inv(self, v):
        if self.hu == "diag":
            return v / self.hu_diag[:, None] if v.ndim == 2 else v / self.hu_diag
        w, a = self.u_w, self.u_scale
        coef = 2.0 / (1.0 + 2.0 * (w @ w))
        return a * a * (v - coef * np.outer(w, w @ v) if v.ndim == 2 else v - coef * w * (w @ v))

    def Hu_mul(self, v):
        if self.hu == "diag":
            return v * self.hu_diag
        w, a = self.u_w, self.u_scale
        return (v + 2.0 * w * (w @ v)) / (a * a)

    def Hn_inv(self, v):
        w, a = self.n_w, self.n_scale
        coef = 2.0 / (1.0 + 2.0 * (w @ w))
        return a * a * (v - coef * w * (w @ v))

    def _E_apply(self, v):
        out = np.zeros_like(v)
        if self.hu is not None:
            D = self.p.D
            out += D.apply(self.Hu_inv(D.apply_T(v)))
        if self.has_nu:
            out += self.Hn_inv(v)
        return out

    def _E_dense(self):
        m = self.p.m
        cache = self.p.cache
        E = np.zeros((m, m))
        if self.hu == "soc":
            w, a = self.u_w, self.u_scale
            coef = 2.0 / (1.0 + 2.0 * (w @ w))
            Dw = self.p.D.apply(w)
            E += a * a * (cache.DDt - coef * np.outer(Dw, Dw))
        elif self.hu == "diag":
            Dr = cache.Dr_sparse
            E += (Dr @ sps.diags(1.0 / self.hu_diag) @ Dr.T).toarray()
        if self.has_nu:
            w, a = self.n_w, self.n_scale
            coef = 2.0 / (1.0 + 2.0 * (w @ w))
            E += a * a * (np.eye(m) - coef * np.outer(w, w))
        return E

    # factorizations ----------------------------------------------------------
    def _factor_dual(self):
        phi = self.p.phi
        S = (phi * (1.0 / self.hz)) @ phi.T
        S += self._E_dense()
        self.S_fac = _chol(S)

    def _factor_primal(self):
        p, cache = self.p, self.p.cache
        N = p.N
        if not self.has_nu:
            B = cache.B
            if self.hu == "soc":
                w, a = self.u_w, self.u_scale
                Bw = B.T @ w
                K = (cache.BtB + 2.0 * np.outer(Bw, Bw)) / (a * a)
            else:
                K = (B * self.hu_diag[:, None]).T @ B
            self.Einv = None
        else:
            # E = E0 + U C U^T with E0 banded (bandwidth r) and a rank <= 2 correction.
            m, r = p.m, p.r
            Dr = cache.Dr_sparse
            cols, cvals = [], []
            if self.hu == "soc":
                w, a = self.u_w, self.u_scale
                coef = 2.0 / (1.0 + 2.0 * (w @ w))
                E0 = (a * a) * (Dr @ Dr.T)
                cols.append(p.D.apply(w))
                cvals.append(-a * a * coef)
            elif self.hu == "diag":
                E0 = Dr @ sps.diags(1.0 / self.hu_diag) @ Dr.T
            else:
                E0 = sps.csr_matrix((m, m))
            w, a = self.n_w, self.n_scale
            coef = 2.0 / (1.0 + 2.0 * (w @ w))
            E0 = E0 + (a * a) * sps.identity(m)
            cols.append(w)
            cvals.append(-a * a * coef)
            bw = max(r, 0)
            ab = _banded_upper(E0.tocsr(), bw)
            self.E0_chol = sla.cholesky_banded(ab, lower=False)
            self.E0_bw = bw
            U = np.column_stack(cols)
            E0iU = self._E0_solve(U)
            cap = np.diag(1.0 / np.array(cvals)) + U.T @ E0iU
            self.wood = (U, E0iU, np.linalg.inv(cap))
            E0iPhi = self._E0_solve(p.phi)
            UtE0iPhi = E0iU.T @ p.phi
            K = p.phi.T @ E0iPhi - UtE0iPhi.T @ self.wood[2] @ UtE0iPhi
        K[np.diag_indices(N)] += self.hz
        self.K_fac = _chol(K)

    def _E0_solve(self, v):
        return sla.cho_solve_banded((self.E0_chol, False), v)

    def _Einv(self, v):
        """E**-1 v for the primal strategy."""
        p = self.p
        if not self.has_nu:
            return p.D.solve_T(self.Hu_mul(p.D.solve(v)))
        U, E0iU, capinv = self.wood
        x = self._E0_solve(v)
        return x - E0iU @ (capinv @ (U.T @ x))

    # solve -------------------------------------------------------------------
    def solve(self, bx, by, bz):
        """Solve [0 A' G'; A 0 0; G 0 -W'W] [ux; uy; uz] = [bx; by; bz]."""
        p, sc = self.p, self.sc
        R = bx + p.GT(sc.apply2(bz, inverse=True))
        Rz, Rt = R[p.iz], R[p.it]
        Rz2 = Rz - self.cross * Rt
        Ru = R[p.iu] if self.hu is not None else None
        Rn = R[p.inu] if self.has_nu else None
        Ry2 = by.copy()
        if self.hu is not None:
            Ry2 += p.D.apply(self.Hu_inv(Ru))
        if self.has_nu:
            Ry2 -= self.Hn_inv(Rn)
        phi = p.phi
        if self.strategy == "dual":
            dy = _chol_solve(self.S_fac, phi @ (Rz2 / self.hz) - Ry2)
            dz = (Rz2 - phi.T @ dy) / self.hz
        else:
            dz = _chol_solve(self.K_fac, Rz2 + phi.T @ self._Einv(Ry2))
            dy = self._Einv(phi @ dz - Ry2)
        ux = np.zeros(p.n)
        ux[p.iz] = dz
        ux[p.it] = (Rt - (self.d2 - self.d1) * dz) / (self.d1 + self.d2)
        if self.hu is not None:
            ux[p.iu] = self.Hu_inv(Ru + p.D.apply_T(dy))
        if self.has_nu:
            ux[p.inu] = self.Hn_inv(Rn - dy)
        uz = sc.apply2(p.G(ux) - bz, inverse=True)
        return ux, dy, uz


def _chol(M):
    jitter = 0.0
    scale = max(np.max(np.abs(np.diag(M))), 1e-300)
    for _ in range(8):
        try:
            if jitter:
                M = M.copy()
                M[np.diag_indices_from(M)] += jitter
            return sla.cho_factor(M, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            jitter = scale * 1e-14 if not jitter else jitter * 100
    raise SolverError("Newton system is not positive definite")


def _chol_solve(fac, v):
    return sla.cho_solve(fac, v, check_finite=False)


# --------------------------------------------------------------------------
# driver


@dataclass
class IPMResult:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    zd: np.ndarray
    iters: int
    status: str
    pobj: float
    dobj: float
    gap: float
    dres: float
    viol_u: float
    viol_nu: float
    viol_floor: float


def _kkt_residual(p, sc, ux, uy, uz, bx, by, bz):
    rx = p.GT(uz) + p.AT(uy) - bx
    ry = p.A(ux) - by
    rz = p.G(ux) - sc.apply2(uz) - bz
    return rx, ry, rz


def ipm(prog: L1Program, max_iters=100, tol_feas=1e-8, tol_gap=1e-9, tol_dual=1e-9,
        step=0.99, refine=1, strategy="auto", patience=6):
    """Run the predictor-corrector method on ``prog``."""
    p = prog
    blocks, n, ns = p.blocks, p.n, p.ns
    deg = _degree(blocks)
    e = _unit(blocks, ns)

    def newton(sc, bx, by, bz, kkt):
        ux, uy, uz = kkt.solve(bx, by, bz)
        for _ in range(refine):
            rx, ry, rz = _kkt_residual(p, sc, ux, uy, uz, bx, by, bz)
            cx, cy, cz = kkt.solve(-rx, -ry, -rz)
            ux, uy, uz = ux + cx, uy + cy, uz + cz
        return ux, uy, uz

    # starting point: least-norm s and z with W = I, then shifted into the cone
    sc0 = Scaling.identity(blocks, ns)
    kkt0 = KKT(p, sc0, strategy)
    x, _, zt = newton(sc0, np.zeros(n), p.q.copy(), p.h.copy(), kkt0)
    s = -zt
    _, y, zd = newton(sc0, -p.c, np.zeros(p.m), np.zeros(ns), kkt0)
    for v in (s, zd):
        a = _min_eig(blocks, v)
        if a <= 0:
            v += (1.0 - a) * e
        elif a < 1e-8:
            v += 1e-8 * e

    status = "max_iters"
    best, best_merit, since_best = None, np.inf, 0
    for it in range(max_iters + 1):
        rx = p.c + p.GT(zd) + p.AT(y)
        ry = p.A(x) - p.q
        rz = p.G(x) + s - p.h
        gap = float(s @ zd)
        mu = gap / deg
        z_cur = x[p.iz]
        nu_cur = x[p.inu] if p.rho is not None else None
        pobj = float(np.abs(z_cur).sum())
        dobj = float(-(p.h @ zd) - (p.q @ y))
        dres = float(np.linalg.norm(rx) / max(1.0, np.linalg.norm(p.c)))
        viol_u = p.constraint_violation(z_cur, nu_cur)
        viol_nu = 0.0
        if p.rho is not None:
            viol_nu = max(0.0, np.linalg.norm(nu_cur) - p.rho) / p.rho
        gap_true = max(pobj - dobj, gap)
        log.debug("it %3d pobj %.10e dobj %.10e gap %.2e dres %.2e viol %.2e/%.2e",
                  it, pobj, dobj, gap_true, dres, viol_u, viol_nu)
        # worst ratio of each stopping measure to its tolerance
        merit = max(viol_u / tol_feas, viol_nu / tol_feas, dres / tol_dual,
                    gap_true / (tol_gap * max(1.0, abs(pobj))))
        if merit < best_merit:
            best_merit, since_best = merit, 0
            best = (x, y, s, zd, it, pobj, dobj, gap_true, dres, viol_u, viol_nu)
        else:
            since_best += 1
        if merit <= 1.0:
            status = "optimal"
            break
        if since_best >= patience:
            # D**-r amplifies rounding in Phi z - q; past this point iterates only get noisier
            status = "stalled"
            break
        # infeasibility certificate: G'z + A'y ~ 0 with h'z + q'y < 0
        hz_by = float(p.h @ zd + p.q @ y)
        if hz_by < 0:
            cert = np.linalg.norm(p.GT(zd) + p.AT(y)) / -hz_by
            if cert < 1e-9 and -hz_by > 1e6 * max(1.0, np.linalg.norm(p.c)):
                status = "infeasible"
                break
        if it == max_iters:
            break

        sc = Scaling.nt(blocks, s, zd)
        lam = sc.apply(zd)
        try:
            kkt = KKT(p, sc, strategy)
        except SolverError:
            log.debug("Newton system factorization failed")
            status = "numerical"
            break

        def direction(bs):
            bz = -rz - sc.apply(_sdiv(blocks, lam, bs))
            dx, dy, dz = newton(sc, -rx, -ry, bz, kkt)
            ds_t = _sdiv(blocks, lam, bs) - sc.apply(dz)   # W**-1 ds
            return dx, dy, dz, ds_t

        lamlam = _circ(blocks, lam, lam)
        dx, dy, dz, ds_t = direction(-lamlam)
        dz_t = sc.apply(dz)
        a_aff = min(1.0, _max_step(blocks, lam, ds_t), _max_step(blocks, lam, dz_t))
        sig = ((lam + a_aff * ds_t) @ (lam + a_aff * dz_t)) / (lam @ lam)
        sig = min(1.0, max(0.0, sig)) ** 3
        bs = -lamlam - _circ(blocks, ds_t, dz_t) + sig * mu * e
        dx, dy, dz, ds_t = direction(bs)
        dz_t = sc.apply(dz)
        a_max = min(_max_step(blocks, lam, ds_t), _max_step(blocks, lam, dz_t))
        alpha = min(1.0, step * a_max)
        if not np.isfinite(alpha) or alpha <= 0:
            log.debug("no admissible step (alpha=%r)", alpha)
            status = "numerical"
            break
        ds = sc.apply(ds_t)
        # the step length is exact in the scaled space; back off if rounding in
        # the unscaled update leaves the cone
        for _ in range(30):
            s_new, zd_new = s + alpha * ds, zd + alpha * dz
            if _min_eig(blocks, s_new) > 0 and _min_eig(blocks, zd_new) > 0:
                break
            alpha *= 0.5
        else:
            status = "numerical"
            break
        x_new = x + alpha * dx
        if not np.all(np.isfinite(x_new)):
            status = "numerical"
            break
        x, s, zd = x_new, s_new, zd_new
        y = y + alpha * dy
        # guard against drift out of the cone from roundoff
        for v in (s, zd):
            for b in blocks:
                if b.kind == "l":
                    np.maximum(v[b.sl], 1e-300, out=v[b.sl])

    x, y, s, zd, it_, pobj, dobj, gap_true, dres, viol_u, viol_nu = best
    return IPMResult(x, y, s, zd, it, status, pobj, dobj, gap_true, dres, viol_u, viol_nu,
                     p.representable_violation(x[p.iz]))
