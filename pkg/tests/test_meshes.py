import numpy as np
import pytest

from kornlab import meshes
from kornlab.meshes import (
    IndexOutOfRange,
    InvalidMesh,
    MalformedHeader,
    NonManifoldBoundary,
    boundary_components,
    generate_primitive,
    read_mesh,
    refine_uniform,
    validate,
    write_mesh,
)


def test_unit_cube_n1_counts():
    m = generate_primitive("unit_cube", 1)
    assert m.num_vertices == 8
    assert m.num_tets == 6
    assert len(m.btris) == 12
    assert np.all(m.btri_tags == 1)
    assert len(np.unique(m.slice_ids)) == 1


def test_unit_cube_n2_surface_area():
    m = generate_primitive("unit_cube", 2)
    assert m.num_tets == 48
    tris = m.vertices[m.btris]
    areas = 0.5 * np.linalg.norm(
        np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1
    )
    assert areas[m.btri_tags == 1].sum() == pytest.approx(6.0, abs=1e-13)


@pytest.mark.parametrize(
    "kind,n,vol",
    [("unit_cube", 1, 1.0), ("unit_cube", 3, 1.0), ("slab_mixed", 2, 1.0),
     ("cube_with_tunnel", 1, 8.0), ("cube_with_tunnel", 2, 8.0)],
)
def test_primitive_volumes(kind, n, vol):
    m = generate_primitive(kind, n)
    vols = m.tet_volumes()
    assert np.all(vols > 0)
    assert vols.sum() == pytest.approx(vol, rel=1e-13)
    assert validate(m) == []


def test_slab_tags():
    m = generate_primitive("slab_mixed", 2)
    z = m.vertices[m.btris][:, :, 2]
    bottom = np.all(np.abs(z) < 1e-12, axis=1)
    assert np.array_equal(m.btri_tags == 1, bottom)


def test_tunnel_boundary_euler_characteristic():
    # oracle: chi = V - E + F computed on the generated boundary complex
    m = generate_primitive("cube_with_tunnel", 1)
    assert len(np.unique(m.slice_ids)) == 2
    tris = np.sort(m.btris, axis=1)
    verts = np.unique(tris)
    edges = np.unique(
        np.sort(tris[:, [0, 1, 0, 2, 1, 2]].reshape(-1, 2), axis=1), axis=0
    )
    chi = len(verts) - len(edges) + len(tris)
    assert chi == 0  # torus


def test_tunnel_slices_connected():
    m = generate_primitive("cube_with_tunnel", 2)
    assert validate(m) == []  # includes per-slice connectivity


def test_edge_count_oracle():
    # enumeration oracle: unique vertex pairs occurring in the tet list
    m = generate_primitive("unit_cube", 1)
    pairs = set()
    for t in m.tets:
        for i in range(4):
            for j in range(i + 1, 4):
                pairs.add((min(t[i], t[j]), max(t[i], t[j])))
    assert m.num_edges == len(pairs) == 19
    assert np.all(m.edges[:, 0] < m.edges[:, 1])


def test_roundtrip(tmp_path):
    m = generate_primitive("cube_with_tunnel", 1)
    path = tmp_path / "t.msh"
    write_mesh(m, path)
    m2 = read_mesh(path)
    assert np.array_equal(m.vertices, m2.vertices)
    assert np.array_equal(m.tets, m2.tets)
    assert np.array_equal(m.slice_ids, m2.slice_ids)
    assert np.array_equal(m.btris, m2.btris)
    assert np.array_equal(m.btri_tags, m2.btri_tags)


def test_read_bad_header(tmp_path):
    p = tmp_path / "bad.msh"
    p.write_text("kornmesh 2\nvertices 0\ntets 0\nbtris 0\n")
    with pytest.raises(MalformedHeader):
        read_mesh(p)


def test_read_index_out_of_range(tmp_path):
    m = generate_primitive("unit_cube", 1)
    path = tmp_path / "t.msh"
    write_mesh(m, path)
    lines = path.read_text().splitlines()
    first_tet = 2 + m.num_vertices + 1  # header, count, vertices, tets count
    lines[first_tet] = "0 1 2 99 0"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(IndexOutOfRange):
        read_mesh(path)


def test_read_duplicate_btri(tmp_path):
    m = generate_primitive("unit_cube", 1)
    path = tmp_path / "t.msh"
    write_mesh(m, path)
    lines = path.read_text().splitlines()
    k = lines.index(f"btris {len(m.btris)}")
    lines[k] = f"btris {len(m.btris) + 1}"
    lines.append(lines[k + 1])
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(NonManifoldBoundary):
        read_mesh(path)


def test_validate_rejects_interior_face():
    m = generate_primitive("unit_cube", 2)
    interior = set(map(tuple, np.sort(m.faces, axis=1))) - set(
        map(tuple, np.sort(m.btris, axis=1))
    )
    btris = np.vstack([m.btris, np.array([sorted(next(iter(interior)))])])
    tags = np.append(m.btri_tags, 1)
    with pytest.raises((NonManifoldBoundary, InvalidMesh)):
        validate(meshes.Mesh(m.vertices, m.tets, m.slice_ids, btris, tags))


def test_boundary_components():
    m = generate_primitive("unit_cube", 2)
    _, _, n = boundary_components(m, 1)
    assert n == 1
    # two opposite faces tagged: 2 components
    coords = m.vertices[m.btris]
    tags = np.zeros(len(m.btris), dtype=int)
    tags[np.all(np.abs(coords[:, :, 0]) < 1e-12, axis=1)] = 1
    tags[np.all(np.abs(coords[:, :, 0] - 1) < 1e-12, axis=1)] = 1
    m2 = m.retag(tags)
    _, _, n2 = boundary_components(m2, 1)
    assert n2 == 2
    _, _, n3 = boundary_components(m.retag(0), 1)
    assert n3 == 0


def test_refine_uniform():
    m = generate_primitive("unit_cube", 1)
    r = refine_uniform(m)
    assert r.num_tets == 48
    assert r.tet_volumes().sum() == pytest.approx(1.0, rel=1e-14)
    assert validate(r) == []
    # boundary area preserved exactly
    for mesh in (m, r):
        tris = mesh.vertices[mesh.btris]
        area = 0.5 * np.linalg.norm(
            np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1
        ).sum()
        assert area == pytest.approx(6.0, abs=1e-12)


def test_refine_inherits_slices_and_tags():
    m = generate_primitive("cube_with_tunnel", 1)
    r = refine_uniform(m)
    assert r.num_tets == 8 * m.num_tets
    for s in np.unique(m.slice_ids):
        parent_vol = m.tet_volumes()[m.slice_ids == s].sum()
        child_vol = r.tet_volumes()[r.slice_ids == s].sum()
        assert child_vol == pytest.approx(parent_vol, rel=1e-13)
    assert len(r.btris) == 4 * len(m.btris)
    assert validate(r) == []


def test_validate_warns_slice_without_tag():
    m = generate_primitive("cube_with_tunnel", 1)
    # tag only a face on slice 0's side: slice 1 never touches it
    coords = m.vertices[m.btris]
    tags = np.zeros(len(m.btris), dtype=int)
    tags[np.all(np.abs(coords[:, :, 1]) < 1e-12, axis=1)] = 1
    warnings = validate(m.retag(tags))
    assert any("slice" in w for w in warnings)


def test_transformed_rotation_keeps_orientation():
    m = generate_primitive("unit_cube", 1)
    theta = 0.7
    R = np.array(
        [
            [np.cos(theta), -np.sin(theta), 0.0],
            [np.sin(theta), np.cos(theta), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    m2 = m.transformed(matrix=R, shift=[1.0, -2.0, 0.5])
    assert np.all(m2.tet_volumes() > 0)
    assert m2.tet_volumes().sum() == pytest.approx(1.0, rel=1e-13)
