from __future__ import annotations

import numpy as np
import pytest
from conftest import random_mesh, square_mesh
from hypothesis import given
from hypothesis import strategies as st

from tripatch.errors import InputError, InvariantError
from tripatch.ingest import Intrinsics
from tripatch.patchcloud import (
    FeatureMap,
    PatchCloud,
    centroid_depths,
    centroid_sample,
    detach_faces,
    face_id_map,
    params_to_plane,
    plane_normals,
    superpixel_pool,
)
from tripatch.triangulate import Mesh2D


def _brute_owner(tris, x, y):
    # lowest-index face whose closed triangle holds the point, exact for these small integer inputs
    for f, t in enumerate(tris):
        ok = True
        for k in range(3):
            ax, ay = t[k]
            bx, by = t[(k + 1) % 3]
            if (bx - ax) * (y - ay) - (by - ay) * (x - ax) < 0:
                ok = False
        if ok:
            return f
    return -1


def test_detach_two_faces():
    K = Intrinsics.centered(4, 4, 4.0)
    cloud = detach_faces(square_mesh(4, 4), K, 2.0)
    assert cloud.n_faces == 2 and cloud.n_params == 6
    np.testing.assert_array_equal(cloud.params, [[0, 0, 0.5], [0, 0, 0.5]])


def test_detach_keeps_geometry_bit_exact():
    mesh = random_mesh(np.random.default_rng(3), 40, 30)
    cloud = detach_faces(mesh, Intrinsics.centered(40, 30, 40.0))
    assert cloud.n_params == 3 * mesh.n_faces
    assert np.array_equal(cloud.tris, mesh.vertices[mesh.faces])
    with pytest.raises(ValueError):
        cloud.tris[0, 0, 0] = 1.0


def test_detach_empty_and_bad_depth():
    K = Intrinsics.centered(4, 4, 4.0)
    empty = Mesh2D(4, 4, np.zeros((0, 2)), np.zeros((0, 2), int), np.zeros((0, 3), int))
    assert detach_faces(empty, K).n_faces == 0
    with pytest.raises(InputError):
        detach_faces(square_mesh(4, 4), K, 0.0)


def test_fronto_parallel_plane():
    K = Intrinsics.centered(64, 64, 64.0)
    n, d = params_to_plane([[3, 4], [40, 9], [20, 50]], [0, 0, 0.5], K)
    np.testing.assert_array_equal(n, [0, 0, -1])
    assert d == 2.0


def test_slanted_plane_normal_is_orthogonal_to_surface():
    K = Intrinsics.centered(64, 64, 64.0)
    tri = [[31, 30], [33, 30], [32, 33]]  # centroid at the principal point
    abc = np.array([0.1, 0.0, 0.5])
    n, d = params_to_plane(tri, abc, K)
    assert d == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(n, [-0.19611613513818404, 0.0, -0.9805806756909202], atol=1e-12)

    def point(u, v):
        z = 1.0 / (abc[0] * u + abc[1] * v + abc[2])
        return np.array([u * z, v * z, z])

    h = 1e-6
    tu = (point(h, 0) - point(-h, 0)) / (2 * h)
    tv = (point(0, h) - point(0, -h)) / (2 * h)
    assert abs(n @ tu) < 1e-8 and abs(n @ tv) < 1e-8


def test_params_to_plane_rejects_zero():
    with pytest.raises(InputError):
        params_to_plane([[0, 0], [1, 0], [0, 1]], [0, 0, 0], Intrinsics.centered(4, 4, 4.0))


@given(
    st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.1, 2)),
    st.sampled_from([0.5, 2.0, 4.0, 0.25]),
)
def test_normal_is_scale_invariant(abc, t):
    # power-of-two scales keep the check exact
    p = np.array([abc])
    np.testing.assert_array_equal(plane_normals(p), plane_normals(t * p))


def test_scaling_divides_depths():
    mesh = random_mesh(np.random.default_rng(0), 32, 32, 10)
    cloud = detach_faces(mesh, Intrinsics.centered(32, 32, 32.0), 2.0)
    cloud = cloud.with_params(cloud.params + [0.05, -0.02, 0.0])
    d1 = centroid_depths(cloud)
    d2 = centroid_depths(cloud.with_params(3.0 * cloud.params))
    np.testing.assert_allclose(d2, d1 / 3.0, rtol=1e-14)


def test_face_id_map_square_4x4():
    mesh = square_mesh(4, 4)
    ids = face_id_map(mesh).data
    tris = mesh.vertices[mesh.faces]
    expect = [[_brute_owner(tris, x + 0.5, y + 0.5) for x in range(4)] for y in range(4)]
    np.testing.assert_array_equal(ids, expect)
    assert ids.size == 16 and np.all(ids >= 0)


def test_diagonal_tie_goes_to_lower_face():
    mesh = square_mesh(4, 4)
    ids = face_id_map(mesh).data
    # the diagonal y = x runs through every pixel center (k+0.5, k+0.5)
    assert all(ids[k, k] == 0 for k in range(4))
    swapped = Mesh2D(4, 4, mesh.vertices, mesh.segments, mesh.faces[::-1])
    assert all(face_id_map(swapped).data[k, k] == 0 for k in range(4))


def test_face_id_map_matches_brute_force_on_random_mesh():
    mesh = random_mesh(np.random.default_rng(11), 24, 18, 25)
    tris = mesh.vertices[mesh.faces]
    ids = face_id_map(mesh).data
    for y in range(18):
        for x in range(24):
            f = ids[y, x]
            assert _brute_owner(tris[f : f + 1], x + 0.5, y + 0.5) == 0
            assert _brute_owner(tris[:f], x + 0.5, y + 0.5) == -1


@given(st.integers(0, 2**31 - 1))
def test_face_id_map_partitions_and_ignores_threads(seed):
    mesh = random_mesh(np.random.default_rng(seed), 30, 20, 80)
    a = face_id_map(mesh)
    b = face_id_map(mesh, threads=4)
    assert np.array_equal(a.data, b.data)
    assert a.region_sizes(mesh.n_faces).sum() == 30 * 20


def test_face_id_map_rejects_uncovered_frame():
    mesh = Mesh2D(4, 4, [[0, 0], [4, 0], [4, 4]], [], [[1, 2, 0]])
    with pytest.raises(InvariantError):
        face_id_map(mesh)


def test_superpixel_pool_examples():
    ids = face_id_map(square_mesh(2, 2))
    # square_mesh(2, 2): pixels (0,0), (1,0), (1,1) -> face 0; (0,1) -> face 1
    assert ids.data.tolist() == [[0, 0], [1, 0]]
    pooled, empty = superpixel_pool(FeatureMap(np.full((2, 2), 0.7)), ids)
    np.testing.assert_array_equal(pooled, [[0.7], [0.7]])
    assert not empty.any()
    f = FeatureMap(np.array([[1.0, 2.0], [5.0, 0.5]]))
    pooled, _ = superpixel_pool(f, ids)
    np.testing.assert_array_equal(pooled, [[2.0], [5.0]])


def test_superpixel_pool_empty_face_and_mismatch():
    ids = face_id_map(square_mesh(2, 2))
    pooled, empty = superpixel_pool(FeatureMap(np.ones((2, 2))), ids, n_faces=3)
    assert empty.tolist() == [False, False, True]
    assert pooled[2].tolist() == [0.0]
    with pytest.raises(InputError):
        superpixel_pool(FeatureMap(np.ones((3, 2))), ids)


@given(st.integers(0, 2**31 - 1))
def test_pooled_max_bounds_region(seed):
    rng = np.random.default_rng(seed)
    mesh = random_mesh(rng, 20, 16, 15)
    ids = face_id_map(mesh)
    f = FeatureMap(rng.normal(size=(16, 20, 3)))
    pooled, empty = superpixel_pool(f, ids, mesh.n_faces)
    for m in range(mesh.n_faces):
        region = f.data[ids.data == m]
        if empty[m]:
            assert len(region) == 0
            continue
        assert np.all(pooled[m] >= region.max(axis=0))
        assert np.all(np.any(region == pooled[m], axis=0))


def test_centroid_sample_examples():
    K = Intrinsics.centered(8, 8, 8.0)
    ramp = np.tile(np.arange(8) + 0.5, (8, 1))  # value = x coordinate of the pixel center
    tri = np.array([[[2.0, 1.0], [4.25, 1.0], [3.5, 4.0]]])  # centroid x = 3.25
    cloud = PatchCloud(8, 8, K, tri)
    assert centroid_sample(FeatureMap(ramp), cloud)[0, 0] == pytest.approx(3.25, abs=1e-12)
    assert centroid_sample(FeatureMap(np.full((8, 8), 1.5)), cloud)[0, 0] == 1.5
    img = np.random.default_rng(0).normal(size=(8, 8))
    at_center = PatchCloud(8, 8, K, np.array([[[4.5, 2.5], [5.5, 3.0], [3.5, 2.0]]]))  # centroid (4.5, 2.5)
    assert centroid_sample(FeatureMap(img), at_center)[0, 0] == pytest.approx(img[2, 4], abs=1e-12)


def test_centroid_sample_outside_and_size():
    K = Intrinsics.centered(8, 8, 8.0)
    cloud = PatchCloud(8, 8, K, np.array([[[9.0, 1.0], [10.0, 1.0], [9.5, 2.0]]]))
    with pytest.raises(InputError):
        centroid_sample(FeatureMap(np.zeros((8, 8))), cloud)
    with pytest.raises(InputError):
        centroid_sample(FeatureMap(np.zeros((4, 8))), cloud)


def test_cloud_json_roundtrip():
    mesh = random_mesh(np.random.default_rng(5), 16, 16, 6)
    cloud = detach_faces(mesh, Intrinsics.centered(16, 16, 20.0), 1.5)
    back = PatchCloud.from_dict(cloud.to_dict())
    assert np.array_equal(back.tris, cloud.tris) and np.array_equal(back.params, cloud.params)
    assert back.intrinsics == cloud.intrinsics
    with pytest.raises(InputError):
        PatchCloud.from_dict({"width": 1})
