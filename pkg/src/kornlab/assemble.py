"""Bilinear form assembly over the lowest-order element complex.

The discrete gradient and curl are incidence matrices, so grad P1 lands
exactly in Edge0 and curl Edge0 exactly in Face0; every quadratic form
needed by the inequality eigenproblems is assembled here.  Symmetric forms
are symmetrized after scatter, constraints are applied by elimination
(rows/columns of eliminated dofs dropped, folded groups summed).
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .quadrature import barycentric, tet_rule
from .spaces import Field, TensorField

DEFAULT_QUAD_DEGREE = 4

_LOC_EDGES = np.array([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])
_LOC_FACES = np.array([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)])


class QuadratureWarning(UserWarning):
    pass


@dataclass
class MatrixCoefficient:
    """Pointwise 3x3 matrix field F with det F >= mu > 0.

    evaluator maps (n,3) points to (n,3,3) matrices; degree is the
    polynomial degree per cell (None for non-polynomial evaluators, which
    integrate at the configured quadrature order with a warning).
    """

    evaluator: callable
    degree: int | None = 0
    mu: float | None = None

    def __call__(self, pts):
        out = np.asarray(self.evaluator(pts), dtype=float)
        if out.shape != (len(pts), 3, 3):
            raise ValueError("coefficient evaluator must return (n,3,3)")
        return out


def identity_coefficient(scale=1.0):
    return MatrixCoefficient(
        lambda pts: np.broadcast_to(scale * np.eye(3), (len(pts), 3, 3)).copy(),
        degree=0,
        mu=scale**3,
    )


# --------------------------------------------------------------------------
# per-mesh geometry cache
# --------------------------------------------------------------------------


class _Geometry:
    def __init__(self, mesh):
        self.mesh = mesh
        p = mesh.vertices[mesh.tets]  # (T,4,3)
        ones = np.ones((len(p), 4, 1))
        A = np.concatenate([ones, p], axis=2)  # rows (1, x_i)
        coef = np.linalg.inv(A)
        self.grads = np.transpose(coef[:, 1:4, :], (0, 2, 1))  # (T,4,3), grads[t,i]
        self.vols = mesh.tet_volumes()
        # local edge endpoints ordered so the global index ascends
        ge = mesh.tets[:, _LOC_EDGES]  # (T,6,2) global ids
        swap = ge[:, :, 0] > ge[:, :, 1]
        loc = np.broadcast_to(_LOC_EDGES, ge.shape).copy()
        loc[swap] = loc[swap][:, ::-1]
        self.edge_loc = loc  # (T,6,2) local (a,b), global(a)<global(b)
        # local face triples sorted by global index, aligned with tet_faces
        gf = mesh.tets[:, _LOC_FACES]  # (T,4,3)
        order = np.argsort(gf, axis=2)
        self.face_loc = np.take_along_axis(
            np.broadcast_to(_LOC_FACES, gf.shape).copy(), order, axis=2
        )

    def edge_curls(self):
        """curl of the Whitney edge basis, constant per cell: (T,6,3)."""
        ga = np.take_along_axis(self.grads, self.edge_loc[:, :, 0, None], axis=1)
        gb = np.take_along_axis(self.grads, self.edge_loc[:, :, 1, None], axis=1)
        return 2.0 * np.cross(ga, gb)

    def edge_values(self, lam):
        """Whitney edge basis at barycentric points: (T,Q,6,3)."""
        a = self.edge_loc[:, :, 0]
        b = self.edge_loc[:, :, 1]
        ga = np.take_along_axis(self.grads, a[:, :, None], axis=1)  # (T,6,3)
        gb = np.take_along_axis(self.grads, b[:, :, None], axis=1)
        la = lam[:, a.ravel()].reshape(len(lam), *a.shape)  # (Q,T,6)
        lb = lam[:, b.ravel()].reshape(len(lam), *b.shape)
        vals = la[..., None] * gb[None] - lb[..., None] * ga[None]  # (Q,T,6,3)
        return np.transpose(vals, (1, 0, 2, 3))

    def face_values(self, lam):
        """Whitney face basis at barycentric points: (T,Q,4,3)."""
        i = self.face_loc[:, :, 0]
        j = self.face_loc[:, :, 1]
        k = self.face_loc[:, :, 2]
        gi = np.take_along_axis(self.grads, i[:, :, None], axis=1)
        gj = np.take_along_axis(self.grads, j[:, :, None], axis=1)
        gk = np.take_along_axis(self.grads, k[:, :, None], axis=1)
        li = lam[:, i.ravel()].reshape(len(lam), *i.shape)
        lj = lam[:, j.ravel()].reshape(len(lam), *j.shape)
        lk = lam[:, k.ravel()].reshape(len(lam), *k.shape)
        cjk, cki, cij = np.cross(gj, gk), np.cross(gk, gi), np.cross(gi, gj)
        vals = 2.0 * (
            li[..., None] * cjk[None] + lj[..., None] * cki[None] + lk[..., None] * cij[None]
        )
        return np.transpose(vals, (1, 0, 2, 3))

    def face_divs(self):
        """div of the Whitney face basis, constant per cell: (T,4)."""
        i = self.face_loc[:, :, 0]
        j = self.face_loc[:, :, 1]
        k = self.face_loc[:, :, 2]
        gi = np.take_along_axis(self.grads, i[:, :, None], axis=1)
        gj = np.take_along_axis(self.grads, j[:, :, None], axis=1)
        gk = np.take_along_axis(self.grads, k[:, :, None], axis=1)
        return 6.0 * np.einsum("tfi,tfi->tf", gi, np.cross(gj, gk))


def geometry(mesh):
    geom = mesh.__dict__.get("_geom")
    if geom is None:
        geom = _Geometry(mesh)
        mesh.__dict__["_geom"] = geom
    return geom


def _cell_points(mesh, ref_pts):
    p = mesh.vertices[mesh.tets]
    return p[:, None, 0, :] + np.einsum(
        "qk,tkj->tqj", ref_pts, p[:, 1:] - p[:, [0, 0, 0]]
    )


def _local_dofs(space):
    mesh = space.mesh
    fam = space.family
    if fam == "P1_scalar":
        return space.dof_map[0][mesh.tets]
    if fam == "P1_vector":
        return np.concatenate(
            [space.dof_map[m][mesh.tets] for m in range(3)], axis=1
        )  # (T,12), comp-major
    if fam == "Edge0":
        return space.dof_map[0][mesh.tet_edges]
    if fam == "Face0":
        return space.dof_map[0][mesh.tet_faces]
    if fam == "P0_scalar":
        return space.dof_map[0][np.arange(mesh.num_tets)[:, None]]
    raise ValueError(fam)


def _scatter(loc, rows_dofs, cols_dofs, shape, symmetrize):
    nr, nc = loc.shape[1], loc.shape[2]
    rows = np.repeat(rows_dofs[:, :, None], nc, axis=2).ravel()
    cols = np.repeat(cols_dofs[:, None, :], nr, axis=1).ravel()
    vals = loc.ravel()
    keep = (rows >= 0) & (cols >= 0)
    mat = sp.coo_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=shape
    ).tocsr()
    mat.sum_duplicates()
    if symmetrize:
        mat = (mat + mat.T) * 0.5
    return mat


def _quad(degree, quad_order):
    deg = max(degree, DEFAULT_QUAD_DEGREE if quad_order is None else quad_order)
    pts, wts = tet_rule(deg)
    return pts, wts, barycentric(pts)


# --------------------------------------------------------------------------
# local matrices per form
# --------------------------------------------------------------------------


def _p1_mass_local(geom):
    M = (np.ones((4, 4)) + np.eye(4)) / 20.0
    return geom.vols[:, None, None] * M[None]


def _p1_stiff_local(geom):
    return geom.vols[:, None, None] * np.einsum("tid,tjd->tij", geom.grads, geom.grads)


def _vector_block(loc4):
    """Expand a (T,4,4) scalar block to a (T,12,12) comp-major block diagonal."""
    T = loc4.shape[0]
    out = np.zeros((T, 12, 12))
    for m in range(3):
        out[:, 4 * m : 4 * m + 4, 4 * m : 4 * m + 4] = loc4
    return out


def _symgrad_local(geom, hmat=None):
    """<sym(Ju), sym(Jv)> for P1_vector; hmat (T,4,3) replaces the gradients."""
    g = geom.grads if hmat is None else hmat
    gg = np.einsum("tid,tjd->tij", g, g)
    T = g.shape[0]
    out = np.empty((T, 12, 12))
    for m in range(3):
        for n in range(3):
            blk = 0.5 * np.einsum("ti,tj->tij", g[:, :, n], g[:, :, m])
            if m == n:
                blk = blk + 0.5 * gg
            out[:, 4 * m : 4 * m + 4, 4 * n : 4 * n + 4] = blk
    return geom.vols[:, None, None] * out


def _divdiv_p1_local(geom):
    g = geom.grads
    T = g.shape[0]
    out = np.empty((T, 12, 12))
    for m in range(3):
        for n in range(3):
            out[:, 4 * m : 4 * m + 4, 4 * n : 4 * n + 4] = np.einsum(
                "ti,tj->tij", g[:, :, m], g[:, :, n]
            )
    return geom.vols[:, None, None] * out


def _curlcurl_p1_local(geom):
    g = geom.grads
    eye = np.eye(3)
    cb = np.cross(g[:, :, None, :], eye[None, None, :, :])  # (T,4,3comp,3)
    cb = np.transpose(cb, (0, 2, 1, 3)).reshape(len(g), 12, 3)  # comp-major
    return geom.vols[:, None, None] * np.einsum("tid,tjd->tij", cb, cb)


def assemble(form, trial, test=None, coeff=None, quad_order=None):
    """Assemble a bilinear form into a CSR matrix over free dofs.

    Forms: mass, grad, symgrad, curlcurl, divdiv, symF, mixed_grad,
    curl_map, div_map, tensor_mass, tensor_sym, tensor_curlcurl,
    tensor_symF.  trial/test are DofSpaces over the same mesh (test
    defaults to trial).
    """
    test = trial if test is None else test
    if trial.mesh is not test.mesh:
        raise ValueError("trial and test spaces live on different meshes")
    mesh = trial.mesh
    geom = geometry(mesh)

    if form == "mixed_grad":
        return _mixed_grad(trial, test)
    if form == "curl_map":
        return _curl_map(trial, test)
    if form == "div_map":
        return _div_map(trial, test, geom)

    fam = trial.family
    if form == "mass":
        if fam == "P1_scalar":
            loc = _p1_mass_local(geom)
        elif fam == "P1_vector":
            loc = _vector_block(_p1_mass_local(geom))
        elif fam == "Edge0":
            pts, wts, lam = _quad(2, quad_order)
            W = geom.edge_values(lam)
            loc = 6.0 * geom.vols[:, None, None] * np.einsum(
                "q,tqed,tqfd->tef", wts, W, W
            )
        elif fam == "Face0":
            pts, wts, lam = _quad(2, quad_order)
            W = geom.face_values(lam)
            loc = 6.0 * geom.vols[:, None, None] * np.einsum(
                "q,tqed,tqfd->tef", wts, W, W
            )
        elif fam == "P0_scalar":
            loc = geom.vols[:, None, None]
        else:
            raise ValueError(f"mass undefined for {fam}")
    elif form == "grad":
        if fam == "P1_scalar":
            loc = _p1_stiff_local(geom)
        elif fam == "P1_vector":
            loc = _vector_block(_p1_stiff_local(geom))
        else:
            raise ValueError(f"grad undefined for {fam}")
    elif form == "symgrad":
        if fam != "P1_vector":
            raise ValueError("symgrad needs P1_vector")
        loc = _symgrad_local(geom)
    elif form == "divdiv":
        if fam == "P1_vector":
            loc = _divdiv_p1_local(geom)
        elif fam == "Face0":
            d = geom.face_divs()
            loc = geom.vols[:, None, None] * np.einsum("te,tf->tef", d, d)
        else:
            raise ValueError(f"divdiv undefined for {fam}")
    elif form == "curlcurl":
        if fam == "Edge0":
            c = geom.edge_curls()
            loc = geom.vols[:, None, None] * np.einsum("ted,tfd->tef", c, c)
        elif fam == "P1_vector":
            loc = _curlcurl_p1_local(geom)
        else:
            raise ValueError(f"curlcurl undefined for {fam}")
    elif form == "symF":
        if fam != "P1_vector":
            raise ValueError("symF needs P1_vector")
        loc = _coeff_sym_local(geom, mesh, coeff, quad_order, basis="p1")
    elif form == "tensor_mass":
        return sp.block_diag([assemble("mass", trial, quad_order=quad_order)] * 3).tocsr()
    elif form == "tensor_curlcurl":
        return sp.block_diag(
            [assemble("curlcurl", trial, quad_order=quad_order)] * 3
        ).tocsr()
    elif form == "tensor_sym":
        return _tensor_sym(trial, geom, None, quad_order)
    elif form == "tensor_symF":
        return _tensor_sym(trial, geom, coeff, quad_order)
    else:
        raise ValueError(f"unknown form {form!r}")

    rows_dofs = _local_dofs(test)
    cols_dofs = _local_dofs(trial)
    return _scatter(
        loc, rows_dofs, cols_dofs, (test.free_count, trial.free_count),
        symmetrize=(trial is test),
    )


def _coeff_quaddeg(coeff):
    if coeff is None:
        return 2
    if coeff.degree is None:
        warnings.warn(
            "non-polynomial coefficient: integrating at the configured "
            "quadrature order, result is approximate",
            QuadratureWarning,
        )
        return 2
    return 2 + 2 * coeff.degree


def _coeff_sym_local(geom, mesh, coeff, quad_order, basis):
    pts, wts, lam = _quad(_coeff_quaddeg(coeff), quad_order)
    x = _cell_points(mesh, pts)  # (T,Q,3)
    T, Q = x.shape[0], x.shape[1]
    Fq = coeff(x.reshape(-1, 3)).reshape(T, Q, 3, 3) if coeff is not None else None
    g = geom.grads  # (T,4,3)
    h = np.broadcast_to(g[:, None], (T, Q, 4, 3))
    if Fq is not None:
        h = np.einsum("tqdk,tqid->tqik", Fq, h)  # F^T grad
    out = np.empty((T, 12, 12))
    hh = np.einsum("q,tqid,tqjd->tij", wts, h, h)
    for m in range(3):
        for n in range(3):
            blk = 0.5 * np.einsum("q,tqi,tqj->tij", wts, h[..., n], h[..., m])
            if m == n:
                blk = blk + 0.5 * hh
            out[:, 4 * m : 4 * m + 4, 4 * n : 4 * n + 4] = blk
    return 6.0 * geom.vols[:, None, None] * out


def _tensor_sym(space, geom, coeff, quad_order):
    """<sym(T F), sym(S F)> over Edge0 rows, 3x3 block matrix of size 3E."""
    if space.family != "Edge0":
        raise ValueError("tensor forms need an Edge0 space")
    mesh = space.mesh
    pts, wts, lam = _quad(_coeff_quaddeg(coeff), quad_order)
    W = geom.edge_values(lam)  # (T,Q,6,3)
    if coeff is not None:
        x = _cell_points(mesh, pts)
        Fq = coeff(x.reshape(-1, 3)).reshape(W.shape[0], W.shape[1], 3, 3)
        W = np.einsum("tqdk,tqed->tqek", Fq, W)
    scale = 6.0 * geom.vols[:, None, None]
    ww = scale * np.einsum("q,tqed,tqfd->tef", wts, W, W)
    dofs = _local_dofs(space)
    nfree = space.free_count
    blocks = [[None] * 3 for _ in range(3)]
    for m in range(3):
        for n in range(3):
            loc = 0.5 * scale * np.einsum(
                "q,tqe,tqf->tef", wts, W[..., n], W[..., m]
            )
            if m == n:
                loc = loc + 0.5 * ww
            blocks[m][n] = _scatter(loc, dofs, dofs, (nfree, nfree), symmetrize=False)
    mat = sp.bmat(blocks, format="csr")
    return (mat + mat.T) * 0.5


# --------------------------------------------------------------------------
# incidence maps
# --------------------------------------------------------------------------


def _mixed_grad(trial, test):
    if trial.family != "P1_scalar" or test.family != "Edge0":
        raise ValueError("mixed_grad maps P1_scalar into Edge0")
    mesh = trial.mesh
    e = mesh.edges
    rows = np.repeat(test.dof_map[0], 2)
    cols = trial.dof_map[0][e].ravel()
    vals = np.tile([-1.0, 1.0], len(e))
    keep = (rows >= 0) & (cols >= 0)
    return sp.coo_matrix(
        (vals[keep], (rows[keep], cols[keep])),
        shape=(test.free_count, trial.free_count),
    ).tocsr()


def _curl_map(trial, test):
    if trial.family != "Edge0" or test.family != "Face0":
        raise ValueError("curl_map maps Edge0 into Face0")
    mesh = trial.mesh
    nv = mesh.num_vertices
    from .meshes import _pair_index

    lookup = _pair_index(mesh.edges, nv)
    f = mesh.faces
    eij = lookup[f[:, 0] * nv + f[:, 1]]
    ejk = lookup[f[:, 1] * nv + f[:, 2]]
    eik = lookup[f[:, 0] * nv + f[:, 2]]
    rows = np.repeat(test.dof_map[0], 3)
    cols = trial.dof_map[0][np.column_stack([eij, ejk, eik]).ravel()]
    vals = np.tile([1.0, 1.0, -1.0], len(f))
    keep = (rows >= 0) & (cols >= 0)
    return sp.coo_matrix(
        (vals[keep], (rows[keep], cols[keep])),
        shape=(test.free_count, trial.free_count),
    ).tocsr()


def _div_map(trial, test, geom):
    if trial.family != "Face0" or test.family != "P0_scalar":
        raise ValueError("div_map maps Face0 into P0")
    mesh = trial.mesh
    signs = np.sign(geom.face_divs())  # +1 when the global normal points outward
    vals = (signs / geom.vols[:, None]).ravel()
    rows = np.repeat(test.dof_map[0][np.arange(mesh.num_tets)], 4)
    cols = trial.dof_map[0][mesh.tet_faces].ravel()
    keep = (rows >= 0) & (cols >= 0)
    return sp.coo_matrix(
        (vals[keep], (rows[keep], cols[keep])),
        shape=(test.free_count, trial.free_count),
    ).tocsr()


# --------------------------------------------------------------------------
# norm evaluation
# --------------------------------------------------------------------------


def export_matrix(mat, path):
    """Write an assembled matrix as Matrix Market ASCII (debugging aid)."""
    from scipy.io import mmwrite

    mmwrite(path, sp.coo_matrix(mat))


def dev_alpha(mat, alpha):
    """T - alpha * tr(T) * Id, applied along the last two axes."""
    tr = np.trace(mat, axis1=-2, axis2=-1)
    out = np.array(mat, dtype=float, copy=True)
    idx = np.arange(3)
    out[..., idx, idx] -= alpha * tr[..., None]
    return out


def _sym(mat):
    return 0.5 * (mat + np.swapaxes(mat, -2, -1))


def evaluate_norms(obj, which, quad_order=None):
    """Squared norms of a discrete or analytic field over its mesh.

    which: iterable of 'L2', 'grad', 'sym', 'curl', 'div' or
    ('dev_alpha', alpha).  obj is a Field, a TensorField, or an analytic
    object exposing .mesh, .value(pts) and, for derivative norms,
    .jacobian(pts); a .degree attribute makes the quadrature exact.
    """
    requested = list(which)
    mesh = obj.space.mesh if isinstance(obj, (Field, TensorField)) else obj.mesh
    geom = geometry(mesh)
    degree = getattr(obj, "degree", None)
    pts, wts, lam = _quad(2 * degree if degree is not None else 2, quad_order)
    w_phys = 6.0 * np.einsum("t,q->tq", geom.vols, wts)
    q = _pointwise(obj, geom, lam, pts)

    out = {}
    for req in requested:
        name, alpha = (req, None) if isinstance(req, str) else ("dev_alpha", req[1])
        key = req if isinstance(req, str) else f"dev_alpha({alpha:g})"
        kind = q["kind"]
        if name == "L2":
            v = q["value"]
            sq = v**2 if v.ndim == 2 else np.sum(v**2, axis=tuple(range(2, v.ndim)))
        elif kind == "scalar" and name == "grad" and "grad" in q:
            sq = np.sum(q["grad"] ** 2, axis=-1)
        elif kind == "vector" and "jac" in q:
            J = q["jac"]
            if name == "grad":
                sq = np.sum(J**2, axis=(-2, -1))
            elif name == "sym":
                sq = np.sum(_sym(J) ** 2, axis=(-2, -1))
            elif name == "div":
                sq = np.trace(J, axis1=-2, axis2=-1) ** 2
            elif name == "curl":
                c = np.stack(
                    [
                        J[..., 2, 1] - J[..., 1, 2],
                        J[..., 0, 2] - J[..., 2, 0],
                        J[..., 1, 0] - J[..., 0, 1],
                    ],
                    axis=-1,
                )
                sq = np.sum(c**2, axis=-1)
            elif name == "dev_alpha":
                sq = np.sum(dev_alpha(_sym(J), alpha) ** 2, axis=(-2, -1))
            else:
                raise ValueError(f"unknown norm {name!r}")
        elif kind == "vector" and name == "curl" and "curl" in q:
            sq = np.sum(q["curl"] ** 2, axis=-1)
        elif kind == "vector" and name == "div" and "div" in q:
            sq = q["div"] ** 2
        elif kind == "tensor":
            Tv = q["value"]
            if name == "sym":
                sq = np.sum(_sym(Tv) ** 2, axis=(-2, -1))
            elif name == "dev_alpha":
                sq = np.sum(dev_alpha(_sym(Tv), alpha) ** 2, axis=(-2, -1))
            elif name == "curl" and "curl" in q:
                sq = np.sum(q["curl"] ** 2, axis=(-2, -1))
            else:
                raise ValueError(f"norm {name!r} undefined for tensor fields")
        else:
            raise ValueError(f"norm {name!r} undefined for this input")
        out[key] = float(np.sum(w_phys * sq))
    return out


def _pointwise(obj, geom, lam, pts):
    """Pointwise quantities per cell and quadrature point."""
    Q = len(lam)
    if isinstance(obj, TensorField):
        mesh = obj.space.mesh
        W = geom.edge_values(lam)
        full = np.stack(
            [obj.space.full_from_free(obj.rows[m])[0] for m in range(3)]
        )
        c = full[:, mesh.tet_edges]  # (3,T,6)
        vals = np.einsum("mte,tqed->tqmd", c, W)
        curl = np.broadcast_to(
            np.einsum("mte,ted->tmd", c, geom.edge_curls())[:, None],
            (c.shape[1], Q, 3, 3),
        )
        return {"kind": "tensor", "value": vals, "curl": curl}
    if isinstance(obj, Field):
        space = obj.space
        mesh = space.mesh
        full = space.full_from_free(obj.coeffs)
        fam = space.family
        if fam == "P1_scalar":
            u = full[0][mesh.tets]
            grad = np.einsum("ti,tid->td", u, geom.grads)
            return {
                "kind": "scalar",
                "value": np.einsum("qi,ti->tq", lam, u),
                "grad": np.broadcast_to(grad[:, None], (len(u), Q, 3)),
            }
        if fam == "P1_vector":
            u = full[:, mesh.tets]
            J = np.einsum("mti,tid->tmd", u, geom.grads)
            return {
                "kind": "vector",
                "value": np.einsum("qi,mti->tqm", lam, u),
                "jac": np.broadcast_to(J[:, None], (J.shape[0], Q, 3, 3)),
            }
        if fam == "Edge0":
            c = full[0][mesh.tet_edges]
            W = geom.edge_values(lam)
            curl = np.einsum("te,ted->td", c, geom.edge_curls())
            return {
                "kind": "vector",
                "value": np.einsum("te,tqed->tqd", c, W),
                "curl": np.broadcast_to(curl[:, None], (len(c), Q, 3)),
            }
        if fam == "Face0":
            c = full[0][mesh.tet_faces]
            W = geom.face_values(lam)
            div = np.einsum("tf,tf->t", c, geom.face_divs())
            return {
                "kind": "vector",
                "value": np.einsum("tf,tqfd->tqd", c, W),
                "div": np.broadcast_to(div[:, None], (len(c), Q)),
            }
        if fam == "P0_scalar":
            return {
                "kind": "scalar",
                "value": np.broadcast_to(full[0][:, None], (len(full[0]), Q)),
            }
        raise ValueError(fam)
    # analytic object
    x = _cell_points(geom.mesh, pts)
    flat = x.reshape(-1, 3)
    vals = np.asarray(obj.value(flat), dtype=float)
    T = x.shape[0]
    if vals.ndim == 1:
        q = {"kind": "scalar", "value": vals.reshape(T, Q)}
    elif vals.shape[-1] == 3 and vals.ndim == 2:
        q = {"kind": "vector", "value": vals.reshape(T, Q, 3)}
    else:
        q = {"kind": "tensor", "value": vals.reshape(T, Q, 3, 3)}
    if hasattr(obj, "jacobian"):
        jac = np.asarray(obj.jacobian(flat), dtype=float)
        if q["kind"] == "scalar":
            q["grad"] = jac.reshape(T, Q, 3)
        else:
            q["jac"] = jac.reshape(T, Q, 3, 3)
    return q
