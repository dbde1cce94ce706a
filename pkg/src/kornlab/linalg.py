"""Sparse symmetric solves, generalized eigenproblems and null spaces.

Eigenproblems are pencils A x = lambda B x with A positive semidefinite
and B positive definite on the admissible subspace.  Deflation restricts
B-orthogonally to the complement of given vectors; raw linear constraints
C x = 0 are also supported.  Below the dense crossover everything reduces
to LAPACK; above it a shift-inverted Lanczos iteration with full
reorthogonalization runs in the B-inner product, projecting every Krylov
vector onto the admissible subspace.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_CROSSOVER = 2000
_LANCZOS_SEED = 20260314  # fixed start vectors keep reports reproducible


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray  # columns, B-orthonormal
    residuals: np.ndarray = field(default=None)

    def __iter__(self):
        return iter((self.values, self.vectors))


def _as_csr(A):
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.atleast_2d(np.asarray(A, dtype=float)))


def solve_spd(A, rhs, tol=1e-12):
    """Solve A x = rhs for symmetric positive (semi)definite A.

    Dense Cholesky below the crossover, Jacobi-preconditioned CG above.
    Raises SolverError (carrying the final residual) on non-convergence.
    """
    A = _as_csr(A)
    rhs = np.asarray(rhs, dtype=float)
    n = A.shape[0]
    if n < DENSE_CROSSOVER:
        try:
            c, low = sla.cho_factor(A.toarray())
            return sla.cho_solve((c, low), rhs)
        except np.linalg.LinAlgError:
            x, *_ = np.linalg.lstsq(A.toarray(), rhs, rcond=None)
            return x
    d = A.diagonal()
    d = np.where(d > 0, d, 1.0)
    M = sp.diags(1.0 / d)
    x, info = spla.cg(A, rhs, rtol=tol, atol=0.0, M=M, maxiter=20 * n)
    if info != 0:
        res = np.linalg.norm(A @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
        raise SolverError(f"CG did not converge (relative residual {res:.3e})", res)
    return x


def _constraint_rows(B, deflation, constraints, n):
    """Stack of rows whose kernel is the admissible subspace."""
    rows = []
    if deflation is not None:
        D = deflation.toarray() if sp.issparse(deflation) else np.asarray(deflation, float)
        if D.ndim == 1:
            D = D[:, None]
        for j in range(D.shape[1]):
            d = D[:, j]
            bd = B @ d
            # vectors in ker(B) quotient in the plain sense
            rows.append(d if np.linalg.norm(bd) <= 1e-12 * max(np.linalg.norm(d), 1.0) else bd)
    if constraints is not None:
        C = constraints.toarray() if sp.issparse(constraints) else np.asarray(constraints, float)
        rows.extend(np.atleast_2d(C))
    if not rows:
        return None
    return np.vstack(rows)


def eig_smallest(A, B, k=1, deflation=None, constraints=None, tol=1e-10):
    """k smallest eigenvalues of A x = lambda B x on the admissible subspace.

    deflation: vectors removed B-orthogonally (vectors in ker(B) are
    quotiented plainly).  constraints: extra rows C with admissible C x = 0.
    """
    A = _as_csr(A)
    B = _as_csr(B)
    n = A.shape[0]
    if n < DENSE_CROSSOVER:
        return _eig_dense(A, B, k, deflation, constraints, tol)
    return _eig_lanczos(A, B, k, deflation, constraints, tol)


def _eig_dense(A, B, k, deflation, constraints, tol):
    n = A.shape[0]
    C = _constraint_rows(B, deflation, constraints, n)
    if C is not None:
        U = sla.null_space(C)
        if U.shape[1] == 0:
            raise SolverError("constraints eliminate the whole space")
    else:
        U = np.eye(n)
    Ar = U.T @ (A @ U)
    Br = U.T @ (B @ U)
    Ar = 0.5 * (Ar + Ar.T)
    Br = 0.5 * (Br + Br.T)
    try:
        w, V = sla.eigh(Ar, Br)
    except (np.linalg.LinAlgError, sla.LinAlgError) as exc:
        raise SolverError(f"B is not positive definite on the admissible space: {exc}")
    k = min(k, len(w))
    vecs = U @ V[:, :k]
    vals = w[:k]
    res = _residuals(A, B, vals, vecs)
    return EigenResult(vals, vecs, res)


def _residuals(A, B, vals, vecs):
    out = np.empty(len(vals))
    for i, lam in enumerate(vals):
        x = vecs[:, i]
        num = np.linalg.norm(A @ x - lam * (B @ x))
        den = np.sqrt(abs(x @ (B @ x)))
        out[i] = num / max(den, 1e-300)
    return out


class _Projector:
    """B-orthogonal projection onto the admissible subspace."""

    def __init__(self, B, deflation, constraints, solve_B):
        self.terms = []
        if deflation is not None:
            D = deflation.tocsc() if sp.issparse(deflation) else np.asarray(deflation, float)
            if not sp.issparse(D) and D.ndim == 1:
                D = D[:, None]
            W = B @ D
            W = W.toarray() if sp.issparse(W) else W
            G = D.T @ W
            G = G.toarray() if sp.issparse(G) else np.asarray(G)
            G = 0.5 * (G + G.T)
            self.terms.append(("defl", D, W, sla.cho_factor(G)))
        if constraints is not None:
            C = constraints.toarray() if sp.issparse(constraints) else np.asarray(constraints, float)
            C = np.atleast_2d(C)
            # admissible {x: Cx=0}; the B-orthogonal projector needs B^{-1} C^T
            Y = np.column_stack([solve_B(c) for c in C])
            G = C @ Y
            G = 0.5 * (G + G.T)
            self.terms.append(("constr", Y, C, sla.cho_factor(G)))

    def __call__(self, x):
        for kind, M1, M2, chol in self.terms:
            if kind == "defl":
                x = x - M1 @ sla.cho_solve(chol, M2.T @ x)
            else:
                x = x - M1 @ sla.cho_solve(chol, M2 @ x)
        return np.asarray(x).ravel()


def _eig_lanczos(A, B, k, deflation, constraints, tol, maxiter=400):
    """Shift-inverted Lanczos for the k smallest pencil eigenvalues.

    Runs on Op = (A + sigma B)^{-1} B in the B-inner product with full
    reorthogonalization; the largest Ritz values of Op map to the smallest
    pencil eigenvalues via lambda = 1/mu - sigma.
    """
    n = A.shape[0]
    tr_a = A.diagonal().sum()
    tr_b = B.diagonal().sum()
    if tr_b <= 0:
        raise SolverError("sparse path needs positive definite B")
    sigma = max(abs(tr_a) / tr_b, 1e-30) * 1e-2
    lu = spla.splu((A + sigma * B).tocsc())
    B_lu = spla.splu(B.tocsc())
    project = _Projector(B, deflation, constraints, B_lu.solve)

    rng = np.random.default_rng(_LANCZOS_SEED)
    v = project(rng.standard_normal(n))
    nrm = np.sqrt(v @ (B @ v))
    if nrm <= 0:
        raise SolverError("projection annihilates the start vector")
    v /= nrm

    V = [v]
    alphas, betas = [], []
    m = min(maxiter, n)
    mu = S = None
    exhausted = False
    for j in range(m):
        w = project(lu.solve(B @ V[-1]))
        a = w @ (B @ V[-1])
        alphas.append(a)
        w = w - a * V[-1]
        if len(V) > 1:
            w = w - betas[-1] * V[-2]
        for u in V:  # full reorthogonalization in the B-inner product
            w = w - (w @ (B @ u)) * u
        b = np.sqrt(max(w @ (B @ w), 0.0))
        Tj = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
        mu, S = np.linalg.eigh(Tj)
        order = np.argsort(mu)[::-1][:k]
        if j + 1 >= k:
            # standard Lanczos bound, mapped through lambda = 1/mu - sigma
            err = b * np.abs(S[-1, order]) / np.maximum(mu[order] ** 2, 1e-300)
            lam = 1.0 / mu[order] - sigma
            if np.all(err <= tol * np.maximum(np.abs(lam), 1.0)) or b <= 1e-13:
                exhausted = b <= 1e-13
                break
        if b <= 1e-13:
            exhausted = True
            break
        betas.append(b)
        V.append(w / b)
    else:
        raise SolverError("Lanczos did not converge within the iteration cap")
    order = np.argsort(mu)[::-1][:k]
    if len(order) < k and not exhausted:
        raise SolverError("Lanczos produced fewer eigenpairs than requested")
    Vm = np.column_stack(V)
    vecs = Vm @ S[:, order]
    vals = 1.0 / mu[order] - sigma
    idx = np.argsort(vals)
    vecs = _b_orthonormalize(vecs[:, idx], B)
    vals = vals[idx]
    res = _residuals(A, B, vals, vecs)
    return EigenResult(vals, vecs, res)


def _b_orthonormalize(V, B):
    G = V.T @ (B @ V)
    L = np.linalg.cholesky(0.5 * (G + G.T))
    return V @ np.linalg.inv(L).T


def null_space(A, rel_tol=1e-8):
    """Orthonormal basis of the numerical kernel of a symmetric PSD matrix."""
    A = _as_csr(A)
    w, V = np.linalg.eigh(A.toarray())
    lam_max = max(w.max(), 0.0)
    keep = w <= rel_tol * max(lam_max, 1e-300)
    return V[:, keep]


def null_space_gen(A, B, rel_tol=1e-8, constraints=None):
    """B-orthonormal basis of the near-kernel of pencil (A, B) on {Cx=0}."""
    A = _as_csr(A)
    B = _as_csr(B)
    n = A.shape[0]
    if constraints is not None:
        C = constraints.toarray() if sp.issparse(constraints) else np.asarray(constraints)
        U = sla.null_space(np.atleast_2d(C))
    else:
        U = np.eye(n)
    Ar = U.T @ (A @ U)
    Br = U.T @ (B @ U)
    w, V = sla.eigh(0.5 * (Ar + Ar.T), 0.5 * (Br + Br.T))
    lam_max = max(w.max(), 0.0)
    keep = w <= rel_tol * max(lam_max, 1e-300)
    return U @ V[:, keep]
