"""Harmonic fields, Helmholtz decompositions and explicit projections.

The harmonic space is the kernel of the curl-curl form inside the
mass-orthogonal complement of the discrete gradients; its dimension is a
topological quantity (a Betti number in the pure-tag cases).  Splits are
computed per row for tensor fields.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg, meshes
from .assemble import assemble, geometry
from .spaces import DofSpace, Field, TensorField, build_space

SO3_BASIS = np.array(
    [
        [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    ]
)


@dataclass
class EdgeOperators:
    """Shared matrices for one Edge0 space with its scalar potential space.

    The edge space may be unconstrained (splits apply to any square
    integrable field); the potentials always carry the tag-1 constraint.
    """

    edge_space: DofSpace
    p1_space: DofSpace
    mass: sp.csr_matrix
    curlcurl: sp.csr_matrix
    grad: sp.csr_matrix  # P1 -> Edge0 incidence


def edge_operators(mesh, constrain_edges=True):
    e0 = build_space(mesh, "Edge0", "gamma_t" if constrain_edges else None)
    return _operators_for(e0)


def _operators_for(edge_space):
    p1 = build_space(edge_space.mesh, "P1_scalar", "gamma_t")
    return EdgeOperators(
        edge_space,
        p1,
        assemble("mass", edge_space),
        assemble("curlcurl", edge_space),
        assemble("mixed_grad", p1, edge_space),
    )


@dataclass
class HarmonicBasis:
    space: DofSpace
    fields: np.ndarray  # (L, free) mass-orthonormal rows
    ops: EdgeOperators = field(repr=False, default=None)

    @property
    def dim(self):
        return len(self.fields)

    def fields_in(self, space):
        """Coefficients zero-extended into another Edge0 space (same mesh)."""
        if space is self.space or self.dim == 0:
            return self.fields if self.dim else np.zeros((0, space.free_count))
        return np.stack(
            [
                space.free_from_full(self.space.full_from_free(f))
                for f in self.fields
            ]
        )


def harmonic_basis(mesh, ops=None, rel_tol=1e-8):
    """Mass-orthonormal basis of curl-free fields orthogonal to gradients."""
    ops = ops or edge_operators(mesh)
    M, A, G = ops.mass, ops.curlcurl, ops.grad
    if ops.edge_space.free_count >= linalg.DENSE_CROSSOVER:
        raw = _harmonic_sparse(ops, rel_tol)
    else:
        constraints = G.T @ M  # rows: mass-orthogonality to every discrete gradient
        raw = linalg.null_space_gen(A, M, rel_tol=rel_tol, constraints=constraints)
    if raw.shape[1] == 0:
        return HarmonicBasis(ops.edge_space, np.zeros((0, ops.edge_space.free_count)), ops)
    fields = np.column_stack([_clean_harmonic(ops, raw[:, j]) for j in range(raw.shape[1])])
    # mass re-orthonormalization after the cleanup
    gram = fields.T @ (M @ fields)
    L = np.linalg.cholesky(0.5 * (gram + gram.T))
    fields = fields @ np.linalg.inv(L).T
    return HarmonicBasis(ops.edge_space, fields.T, ops)


def _harmonic_sparse(ops, rel_tol):
    """Near-kernel of the curl-curl pencil in the gradient complement.

    Asks the Lanczos driver for a few smallest eigenvalues and keeps the
    ones below the relative threshold, doubling the batch while all of
    them land below it.
    """
    A, M = ops.curlcurl, ops.mass
    pin = ops.edge_space.mesh.tagged_vertices(meshes.GAMMA_T).size == 0
    Gp = ops.grad[:, 1:] if pin else ops.grad
    scale = A.diagonal().sum() / max(M.diagonal().sum(), 1e-300)
    k = 4
    while True:
        eig = linalg.eig_smallest(A, M, k=k, deflation=Gp)
        below = eig.values <= rel_tol * max(scale, 1e-300)
        if not np.all(below) or k >= 32:
            return eig.vectors[:, below]
        k *= 2


def _clean_harmonic(ops, d):
    """Re-project residual gradient content out of a kernel candidate.

    The gradient projection leaves the (already tiny) curl untouched since
    curl o grad vanishes identically on the incidence level.
    """
    return d - ops.grad @ _poisson_solve(ops, ops.mass @ d)


def _poisson_solve(ops, weighted_rhs):
    """Solve (G^T M G) u = G^T (M v); constants pinned when unconstrained."""
    K = (ops.grad.T @ (ops.mass @ ops.grad)).tocsr()
    rhs = ops.grad.T @ weighted_rhs
    if ops.p1_space.mesh.tagged_vertices(meshes.GAMMA_T).size == 0:
        # pure Neumann: pin the first vertex, the gradient is unaffected
        n = K.shape[0]
        keep = np.arange(1, n)
        u = np.zeros(n)
        u[1:] = linalg.solve_spd(K[keep][:, keep], rhs[keep])
        return u
    return linalg.solve_spd(K, rhs)


@dataclass
class HelmholtzSplit:
    grad_part: Field
    harmonic_part: Field
    coexact_part: Field
    potential: np.ndarray
    residuals: dict

    def parts(self):
        return self.grad_part, self.harmonic_part, self.coexact_part


def helmholtz_split(v, harmonics=None, ops=None):
    """Orthogonal split of an Edge0 field into gradient + harmonic + coexact.

    The input may live in the constrained or the unconstrained edge space;
    the gradient and harmonic summands always carry the tag-1 condition,
    the coexact remainder absorbs everything else.
    """
    if not isinstance(v, Field):
        raise TypeError("helmholtz_split expects a Field over Edge0")
    space = v.space
    coeffs = v.coeffs
    mesh = space.mesh
    if ops is None or ops.edge_space is not space:
        ops = _operators_for(space)
    if harmonics is None:
        harmonics = harmonic_basis(mesh)
    M, G = ops.mass, ops.grad

    u = _poisson_solve(ops, M @ coeffs)
    grad = G @ u
    if harmonics.dim:
        hf = harmonics.fields_in(space)
        proj = hf @ (M @ coeffs)
        harm = hf.T @ proj
    else:
        harm = np.zeros_like(coeffs)
    coex = coeffs - grad - harm

    def mdot(a, b):
        return float(a @ (M @ b))

    nrm = {p: np.sqrt(max(mdot(x, x), 0.0)) for p, x in
           (("g", grad), ("h", harm), ("c", coex))}
    # pairs with a vanishing factor are orthogonal by convention; measure
    # against the input size so noise-level parts cannot inflate the ratio
    floor = 1e-6 * max(np.sqrt(max(mdot(coeffs, coeffs), 0.0)), 1e-300)

    def rel(a, b, na, nb):
        return abs(mdot(a, b)) / max(max(na, floor) * max(nb, floor), 1e-300)

    residuals = {
        "grad_harmonic": rel(grad, harm, nrm["g"], nrm["h"]),
        "grad_coexact": rel(grad, coex, nrm["g"], nrm["c"]),
        "harmonic_coexact": rel(harm, coex, nrm["h"], nrm["c"]),
    }
    return HelmholtzSplit(
        Field(space, grad), Field(space, harm), Field(space, coex), u, residuals
    )


@dataclass
class TensorSplit:
    curl_free: TensorField  # gradient + harmonic rows
    coexact: TensorField
    row_splits: list

    def parts(self):
        return self.curl_free, self.coexact


def helmholtz_split_tensor(T, harmonics=None, ops=None):
    """Row-wise Helmholtz split; the coexact part carries Curl S = Curl T."""
    if ops is None or ops.edge_space is not T.space:
        ops = _operators_for(T.space)
    if harmonics is None:
        harmonics = harmonic_basis(T.space.mesh)
    rows = []
    R = np.empty_like(T.rows)
    S = np.empty_like(T.rows)
    for m in range(3):
        split = helmholtz_split(Field(T.space, T.rows[m]), harmonics, ops)
        rows.append(split)
        R[m] = split.grad_part.coeffs + split.harmonic_part.coeffs
        S[m] = split.coexact_part.coeffs
    return TensorSplit(TensorField(T.space, R), TensorField(T.space, S), rows)


# --------------------------------------------------------------------------
# averages and projections
# --------------------------------------------------------------------------


def _edge_cell_means(space, coeffs):
    """Cell averages of an Edge0 field (exact: the basis is linear per cell)."""
    mesh = space.mesh
    geom = geometry(mesh)
    lam = np.full((1, 4), 0.25)
    W = geom.edge_values(lam)[:, 0]  # (T,6,3) at the centroid
    full = space.full_from_free(coeffs)[0]
    return np.einsum("te,ted->td", full[mesh.tet_edges], W)


def tensor_mean(T):
    """Volume average of a TensorField, exact quadrature."""
    mesh = T.space.mesh
    vols = geometry(mesh).vols
    out = np.empty((3, 3))
    for m in range(3):
        means = _edge_cell_means(T.space, T.rows[m])
        out[m] = vols @ means / vols.sum()
    return out


def _analytic_mean(func, mesh, degree=2):
    from .assemble import _cell_points, _quad

    pts, wts, _ = _quad(degree, None)
    x = _cell_points(mesh, pts)
    vals = np.asarray(func(x.reshape(-1, 3)), dtype=float)
    vals = vals.reshape(x.shape[0], x.shape[1], *vals.shape[1:])
    vols = geometry(mesh).vols
    w = 6.0 * np.einsum("t,q->tq", vols, wts)
    return np.tensordot(w, vals, axes=([0, 1], [0, 1])) / vols.sum()


def project_so3(T, mesh=None, degree=2):
    """Skew part of the volume average: the projection onto constant skews."""
    if isinstance(T, TensorField):
        mean = tensor_mean(T)
    else:
        if mesh is None:
            raise ValueError("analytic input needs a mesh")
        mean = _analytic_mean(T, mesh, degree)
    return 0.5 * (mean - mean.T)


@dataclass
class RigidProjection:
    spin: np.ndarray  # constant skew 3x3
    mean_value: np.ndarray  # volume average of v
    offset: np.ndarray  # b = mean - spin @ centroid
    centroid: np.ndarray
    residual_so3: float
    residual_r3: float

    def rigid(self, pts):
        return pts @ self.spin.T + self.offset


def project_rigid(v, mesh=None, degree=2):
    """Projection onto infinitesimal rigid motions x -> S x + b.

    v is a P1_vector Field or an analytic object (.value/.jacobian).
    The returned residuals certify grad(v - r) _|_ so(3) and (v - r) _|_ R^3.
    """
    if isinstance(v, Field):
        mesh = v.space.mesh
        vols = geometry(mesh).vols
        full = v.space.full_from_free(v.coeffs)  # (3,V)
        u = full[:, mesh.tets]
        J = np.einsum("mti,tid->tmd", u, geometry(mesh).grads)
        mean_jac = np.tensordot(vols, J, axes=(0, 0)) / vols.sum()
        cent_vals = np.einsum("mti->tm", u) / 4.0
        mean_val = vols @ cent_vals / vols.sum()
    else:
        if mesh is None:
            raise ValueError("analytic input needs a mesh")
        mean_jac = _analytic_mean(v.jacobian, mesh, degree)
        mean_val = _analytic_mean(v.value, mesh, degree)
    centroid = _analytic_mean(lambda x: x, mesh, degree=1)
    vol = geometry(mesh).vols.sum()
    spin = 0.5 * (mean_jac - mean_jac.T)
    offset = mean_val - spin @ centroid
    # exactness of the projection, computable from the averages alone
    res_so3 = max(
        abs(float(np.tensordot(mean_jac - spin, S))) * vol for S in SO3_BASIS
    )
    res_r3 = float(np.linalg.norm((mean_val - (spin @ centroid + offset)) * vol))
    return RigidProjection(spin, mean_val, offset, centroid, res_so3, res_r3)


def piecewise_skew(T, slice_ids=None, mesh=None, degree=2):
    """Per-slice skew averages: (labels, skews) with skews[j] for slice j.

    T is a TensorField or an analytic evaluator (n,3) -> (n,3,3); analytic
    inputs may be discontinuous across slices.
    """
    if isinstance(T, TensorField):
        mesh = T.space.mesh
        cell_means = np.stack(
            [_edge_cell_means(T.space, T.rows[m]) for m in range(3)], axis=1
        )  # (T,3,3)
    else:
        if mesh is None:
            raise ValueError("analytic input needs a mesh")
        from .assemble import _cell_points, _quad

        pts, wts, _ = _quad(degree, None)
        x = _cell_points(mesh, pts)
        vals = np.asarray(T(x.reshape(-1, 3)), dtype=float).reshape(
            x.shape[0], x.shape[1], 3, 3
        )
        cell_means = 6.0 * np.einsum("q,tqab->tab", wts, vals)  # per unit volume
    ids = mesh.slice_ids if slice_ids is None else np.asarray(slice_ids)
    vols = geometry(mesh).vols
    labels = np.unique(ids)
    out = np.zeros((len(labels), 3, 3))
    for j, lab in enumerate(labels):
        sel = ids == lab
        mean = np.einsum("t,tab->ab", vols[sel], cell_means[sel]) / vols[sel].sum()
        out[j] = 0.5 * (mean - mean.T)
    return labels, out


def constant_tensor_coeffs(space, mat):
    """Edge0 coefficients of a constant tensor field (rows are constants)."""
    mesh = space.mesh
    edge_vec = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
    rows = np.empty((3, space.free_count))
    for m in range(3):
        full = edge_vec @ mat[m]
        rows[m] = space.free_from_full(full.reshape(1, -1))
    return rows
