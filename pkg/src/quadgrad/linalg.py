"""Banded and Krylov linear solvers plus the principal eigenpair.

Scale here is desk-sized (thousands of unknowns in 1-d, tens of
thousands in 2-d), so the solvers stay simple: a Thomas sweep with
pivot-breakdown detection and a pivoted banded fallback for tridiagonal
systems, a stabilized bi-conjugate gradient iteration with diagonal
preconditioning for the sparse 2-d operators, and plain inverse power
iteration for the smallest Dirichlet eigenvalue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import SpecError
from .mesh import RadialMesh, Grid2D, DiscreteField


class SingularSystemError(np.linalg.LinAlgError):
    """The linear system has no usable solution."""


class KrylovError(RuntimeError):
    """The Krylov iteration broke down twice or ran out of iterations."""


@dataclass(eq=False)
class BandedMatrix:
    """Band storage in LAPACK layout: ab[ku + i - j, j] = A[i, j]."""

    kl: int
    ku: int
    ab: np.ndarray

    @property
    def n(self) -> int:
        return self.ab.shape[1]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.zeros_like(x)
        n = self.n
        for m in range(-self.kl, self.ku + 1):
            j_lo, j_hi = max(0, m), n + min(0, m)
            if j_lo >= j_hi:
                continue
            js = np.arange(j_lo, j_hi)
            y[js - m] += self.ab[self.ku - m, js] * x[js]
        return y

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        """Transpose product A^T y."""
        y = np.asarray(y, dtype=float)
        n = self.n
        x = np.zeros_like(y)
        for e in range(-self.ku, self.kl + 1):
            # A[j + e, j] lives at ab[ku + e, j]; valid rows stay in range
            j_lo, j_hi = max(0, -e), n - max(0, e)
            if j_lo >= j_hi:
                continue
            js = np.arange(j_lo, j_hi)
            x[js] += self.ab[self.ku + e, js] * y[js + e]
        return x

    def diagonal(self) -> np.ndarray:
        return self.ab[self.ku, :].copy()

    def to_dense(self) -> np.ndarray:
        n = self.n
        A = np.zeros((n, n))
        for m in range(-self.kl, self.ku + 1):
            j_lo, j_hi = max(0, m), n + min(0, m)
            for j in range(j_lo, j_hi):
                A[j - m, j] = self.ab[self.ku - m, j]
        return A


def tridiag_solve(mat: BandedMatrix, rhs: np.ndarray) -> np.ndarray:
    """Thomas sweep for kl = ku = 1; falls back to pivoted banded
    elimination when a pivot collapses, raises SingularSystemError when
    even that fails."""
    if mat.kl != 1 or mat.ku != 1:
        raise SpecError("tridiag_solve needs a tridiagonal matrix")
    rhs = np.asarray(rhs, dtype=float)
    n = mat.n
    if rhs.shape != (n,):
        raise SpecError("rhs length does not match the matrix")
    c = mat.ab[0, :].copy()   # superdiagonal, c[j] = A[j-1, j]
    b = mat.ab[1, :].copy()   # diagonal
    a = mat.ab[2, :].copy()   # subdiagonal, a[j] = A[j+1, j]
    scale = max(np.max(np.abs(mat.ab)), 1e-300)
    x = rhs.copy()
    cp = np.zeros(n)
    ok = True
    piv = b[0]
    if abs(piv) <= 1e-14 * scale:
        ok = False
    else:
        cp[0] = c[1] / piv if n > 1 else 0.0
        x[0] = x[0] / piv
        for i in range(1, n):
            piv = b[i] - a[i - 1] * cp[i - 1]
            if abs(piv) <= 1e-14 * scale:
                ok = False
                break
            if i + 1 < n:
                cp[i] = c[i + 1] / piv
            x[i] = (x[i] - a[i - 1] * x[i - 1]) / piv
        if ok:
            for i in range(n - 2, -1, -1):
                x[i] -= cp[i] * x[i + 1]
            return x
    return banded_solve(mat, rhs)


def banded_solve(mat: BandedMatrix, rhs: np.ndarray) -> np.ndarray:
    """Pivoted banded elimination (LAPACK gbsv by way of scipy)."""
    try:
        x = scipy.linalg.solve_banded((mat.kl, mat.ku), mat.ab, rhs)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError, ValueError) as e:
        raise SingularSystemError(f"banded solve failed: {e}") from e
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("banded solve produced non-finite entries")
    return x


def banded_gram(mat: BandedMatrix) -> BandedMatrix:
    """Normal matrix A^T A of a banded A, with bands widened to kl + ku."""
    n = mat.n
    w = mat.kl + mat.ku
    src = mat.ab
    ab = np.zeros((2 * w + 1, n))
    # (A^T A)[a, a + m] = sum_e A[a + e, a] * A[a + e, a + m]; the row
    # offset e runs over the overlap of the two column supports
    for m in range(-w, w + 1):
        for e in range(max(-mat.ku, m - mat.ku), min(mat.kl, m + mat.kl) + 1):
            a_lo = max(0, -e, -m)
            a_hi = min(n, n - e, n - m)
            if a_lo >= a_hi:
                continue
            js = np.arange(a_lo, a_hi)
            ab[w - m, js + m] += src[mat.ku + e, js] * src[mat.ku + e - m, js + m]
    return BandedMatrix(kl=w, ku=w, ab=ab)


def levenberg_direction(mat: BandedMatrix, residual: np.ndarray,
                        damping: float) -> np.ndarray:
    """Regularized least-squares direction (A^T A + damping * D) d = -A^T r.

    D is the diagonal of A^T A, so the damping acts relative to the
    column scales.  The result is a descent direction for 0.5 * |r|^2
    whatever the conditioning of A, which is what the Newton globalizer
    needs when the linearization degenerates.
    """
    gram = banded_gram(mat)
    diag = gram.ab[gram.ku, :]
    lift = np.maximum(diag, np.max(diag) * 1e-14)
    gram.ab[gram.ku, :] = diag + damping * lift
    return banded_solve(gram, -mat.rmatvec(np.asarray(residual, dtype=float)))


# ---------------------------------------------------------------------------
# Krylov iteration


class _Operator:
    """Adapter exposing matvec + diagonal for ndarray/sparse/banded inputs."""

    def __init__(self, op):
        if isinstance(op, BandedMatrix):
            self._mv = op.matvec
            self._diag = op.diagonal()
            self.n = op.n
        elif sp.issparse(op):
            csr = op.tocsr()
            self._mv = lambda x: csr @ x
            self._diag = csr.diagonal()
            self.n = csr.shape[0]
        elif isinstance(op, np.ndarray):
            self._mv = lambda x: op @ x
            self._diag = np.diag(op).copy()
            self.n = op.shape[0]
        else:  # duck-typed: matvec() and diagonal()
            self._mv = op.matvec
            self._diag = np.asarray(op.diagonal(), dtype=float)
            self.n = self._diag.size

    def matvec(self, x):
        return self._mv(x)

    def precond(self):
        d = self._diag.copy()
        d[np.abs(d) < 1e-300] = 1.0
        return 1.0 / d


def krylov_solve(op, rhs: np.ndarray, tol: float = 1e-10,
                 maxiter: int | None = None) -> np.ndarray:
    """Diagonally preconditioned BiCGSTAB.

    A breakdown (vanishing bi-orthogonality or stabilization scalars)
    triggers one restart with a freshly orthogonalized shadow residual;
    a second breakdown, or running out of iterations, raises KrylovError
    with the iteration count and last relative residual.
    """
    A = _Operator(op)
    b = np.asarray(rhs, dtype=float)
    n = A.n
    if maxiter is None:
        maxiter = max(1000, 20 * n)
    Minv = A.precond()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n)
    x = np.zeros(n)
    r = b.copy()

    def fresh_shadow(r, used_first):
        if not used_first:
            return r.copy()
        # deterministic vector orthogonalized against r
        cand = np.ones(n)
        rn = float(np.linalg.norm(r))
        if rn > 0:
            cand -= (cand @ r) / rn ** 2 * r
        if np.linalg.norm(cand) < 1e-300:
            cand = np.zeros(n)
            cand[0] = 1.0
        return cand

    restarts = 0
    rhat = fresh_shadow(r, False)
    rho = alpha = omega = 1.0
    v = np.zeros(n)
    p = np.zeros(n)
    fresh = True
    it = 0
    relres = float(np.linalg.norm(r)) / bnorm

    def restart(why):
        nonlocal restarts, rhat, rho, alpha, omega, fresh
        if restarts >= 1:
            raise KrylovError(
                f"bicgstab breakdown ({why}) after restart (iter {it}, relres {relres:.3e})")
        restarts += 1
        rhat = fresh_shadow(r, True)
        rho = alpha = omega = 1.0
        v[:] = 0.0
        p[:] = 0.0
        fresh = True

    while it < maxiter:
        it += 1
        rho_new = float(rhat @ r)
        if abs(rho_new) < 1e-300 or (not fresh and abs(omega) < 1e-300):
            restart("orthogonality lost")
            rho_new = float(rhat @ r)
            if abs(rho_new) < 1e-300:
                raise KrylovError(
                    f"bicgstab breakdown: shadow residual degenerate (iter {it})")
        beta = 0.0 if fresh else (rho_new / rho) * (alpha / omega)
        rho = rho_new
        if fresh:
            p = r.copy()
            fresh = False
        else:
            p = r + beta * (p - omega * v)
        phat = Minv * p
        v = A.matvec(phat)
        denom = float(rhat @ v)
        if abs(denom) < 1e-300:
            restart("alpha denominator vanished")
            continue
        alpha = rho / denom
        s = r - alpha * v
        if np.linalg.norm(s) / bnorm <= tol:
            x = x + alpha * phat
            return x
        shat = Minv * s
        t = A.matvec(shat)
        tt = float(t @ t)
        if tt < 1e-300:
            omega = 0.0
        else:
            omega = float(t @ s) / tt
        x = x + alpha * phat + omega * shat
        r = s - omega * t
        relres = float(np.linalg.norm(r)) / bnorm
        if relres <= tol:
            return x
        if not np.all(np.isfinite(r)):
            raise KrylovError(f"bicgstab produced non-finite iterates (iter {it})")
    raise KrylovError(f"bicgstab: no convergence in {maxiter} iterations "
                      f"(relres {relres:.3e})")


# ---------------------------------------------------------------------------
# Dirichlet Laplacian and its principal eigenpair


def laplacian_matrix(mesh):
    """Matrix of -Lap on the unknown nodes (banded in 1-d, sparse in 2-d)."""
    if isinstance(mesh, RadialMesh):
        n = mesh.n_unknowns
        h, N = mesh.h, mesh.domain.dimension
        ab = np.zeros((3, n))
        r = mesh.nodes
        for k in range(n):
            i = k + mesh.i0
            if mesh.i0 == 0 and i == 0:
                ab[1, 0] += 2.0 * N / h ** 2
                ab[0, 1] += -2.0 * N / h ** 2
                continue
            cm = 1.0 / h ** 2 - (N - 1) / r[i] / (2.0 * h)
            cp = 1.0 / h ** 2 + (N - 1) / r[i] / (2.0 * h)
            ab[1, k] += 2.0 / h ** 2
            if i - 1 >= mesh.i0:
                ab[2, k - 1] += -cm   # subdiagonal entry A[k, k-1] stored at column k-1
            if i + 1 <= mesh.M - 1:
                ab[0, k + 1] += -cp
        return BandedMatrix(kl=1, ku=1, ab=ab)
    g = mesh
    nx, ny, hx, hy = g.nx, g.ny, g.hx, g.hy
    ex = np.ones(nx)
    ey = np.ones(ny)
    Tx = sp.diags([(-1 / hx ** 2) * ex[:-1], (2 / hx ** 2) * ex, (-1 / hx ** 2) * ex[:-1]],
                  (-1, 0, 1))
    Ty = sp.diags([(-1 / hy ** 2) * ey[:-1], (2 / hy ** 2) * ey, (-1 / hy ** 2) * ey[:-1]],
                  (-1, 0, 1))
    return (sp.kron(Tx, sp.identity(ny)) + sp.kron(sp.identity(nx), Ty)).tocsr()


@dataclass(eq=False)
class EigenPair:
    """Principal Dirichlet eigenpair: -Lap(phi) = value * phi."""

    value: float
    field: DiscreteField
    iterations: int
    residual_sup: float


class EigenError(RuntimeError):
    pass


def principal_eigenpair(mesh, increment_tol: float = 1e-12,
                        max_iterations: int = 10000) -> EigenPair:
    """Inverse power iteration for the smallest eigenvalue of -Lap.

    Iterates until the eigenvalue increment falls below increment_tol
    (then polishes the vector with two extra sweeps).  The returned
    eigenfunction is positive on the interior and normalized to sup 1.
    """
    A = laplacian_matrix(mesh)
    if isinstance(A, BandedMatrix):
        solve = lambda b: tridiag_solve(A, b)
        matvec = A.matvec
        n = A.n
    else:
        lu = spla.splu(A.tocsc())
        solve = lu.solve
        matvec = lambda x: A @ x
        n = A.shape[0]

    x = np.ones(n)
    x /= np.linalg.norm(x)
    lam_old = math.inf
    lam = math.inf
    polish = 2
    iters = 0
    converged = False
    while iters < max_iterations:
        iters += 1
        w = solve(x)
        wn = float(np.linalg.norm(w))
        if not math.isfinite(wn) or wn == 0.0:
            raise EigenError("inverse iteration collapsed")
        lam = float(w @ x) / float(w @ w)  # Rayleigh quotient of A at w
        x = w / wn
        if converged:
            polish -= 1
            if polish == 0:
                break
        elif abs(lam - lam_old) < increment_tol:
            converged = True
        lam_old = lam
    else:
        raise EigenError(f"no eigenvalue convergence in {max_iterations} iterations")

    if np.sum(x) < 0:
        x = -x
    x = x / np.max(np.abs(x))
    resid = float(np.max(np.abs(matvec(x) - lam * x)))
    field = DiscreteField.from_interior(mesh, x)
    if np.any(x <= 0):
        raise EigenError("principal eigenfunction is not positive on the interior")
    return EigenPair(value=lam, field=field, iterations=iters, residual_sup=resid)
