"""Mesh geometry: quadrature weights, normals, metric terms, invariants."""

import numpy as np
import pytest

from neumann_lab.domain import (DomainSpec, boundary_normal, build_mesh,
                                distance_to_boundary)
from neumann_lab.errors import ConfigError, NonPositiveRadius, ResolutionTooSmall

STAR_AREA = 209.0 * np.pi / 200.0          # (1/2) int (1 + 0.3 cos 2t)^2
STAR_PERIMETER = 6.825729193824344         # int sqrt(R^2 + R'^2), quadrature value


def test_disk_area():
    mesh = build_mesh(DomainSpec.disk(), (64, 128))
    # the spec tolerance is 1e-3; midpoint-times-trapezoid is exact here
    assert abs(mesh.area - np.pi) <= 1e-12


def test_interval_weights_partition_of_unity():
    mesh = build_mesh(DomainSpec.interval(0.0, 1.0), 10)
    assert abs(mesh.w_vol.sum() - 1.0) <= 2e-15
    np.testing.assert_array_equal(mesh.w_bnd, [1.0, 1.0])
    np.testing.assert_array_equal(mesh.normals, [[-1.0], [1.0]])


def test_disk_normal_at_theta_zero():
    mesh = build_mesh(DomainSpec.disk(), (16, 32))
    np.testing.assert_allclose(boundary_normal(mesh, 0), [1.0, 0.0], atol=1e-12)
    quarter = mesh.n_theta // 4      # node at theta = pi/2
    np.testing.assert_allclose(boundary_normal(mesh, quarter), [0.0, 1.0], atol=1e-12)


def test_normals_unit_length_on_star(star_mesh):
    lengths = np.linalg.norm(star_mesh.normals, axis=1)
    np.testing.assert_allclose(lengths, 1.0, atol=1e-12)


def test_normals_point_outward(star_mesh):
    # positive projection on the position vector of the boundary point
    dots = (star_mesh.normals * star_mesh.boundary_xy).sum(axis=1)
    assert (dots > 0).all()


def test_star_area_exact_for_trig_polynomial():
    mesh = build_mesh(DomainSpec.star_shaped(1.0, (0.0, 0.3)), (16, 32))
    assert abs(mesh.area - STAR_AREA) <= 1e-12


def test_disk_perimeter_exact():
    mesh = build_mesh(DomainSpec.disk(), (8, 16))
    assert abs(mesh.boundary_measure - 2 * np.pi) <= 1e-12


def test_star_perimeter_spectral_convergence():
    errs = []
    for nt in (8, 16, 32):
        mesh = build_mesh(DomainSpec.star_shaped(1.0, (0.0, 0.3)), (4, nt))
        errs.append(abs(mesh.boundary_measure - STAR_PERIMETER))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 1e-6
    # far beyond second order: the integrand is smooth and periodic
    assert np.log2(errs[1] / errs[2]) >= 1.9


def test_volume_quadrature_second_order():
    # smooth non-polynomial radial integrand: int_disk r^2 dA = pi/2
    errs = []
    for nr in (8, 16, 32):
        mesh = build_mesh(DomainSpec.disk(), (nr, 2 * nr))
        val = np.dot(mesh.w_vol, (mesh.interior_xy**2).sum(axis=1))
        errs.append(abs(val - np.pi / 2))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert (orders >= 1.9).all()


def test_angular_trig_integrands_exact():
    mesh = build_mesh(DomainSpec.disk(), (16, 32))
    theta = np.arctan2(mesh.interior_xy[:, 1], mesh.interior_xy[:, 0])
    # degree < n_theta / 2: integrates exactly against the area weights
    val = np.dot(mesh.w_vol, np.cos(3 * theta) + np.sin(2 * theta))
    assert abs(val) <= 1e-12
    val = np.dot(mesh.w_vol, np.cos(2 * theta) ** 2)
    assert abs(val - np.pi / 2) <= 1e-12


def test_jacobian_positive_and_no_pole_node(disk_mesh_small):
    assert (disk_mesh_small.jdet > 0).all()
    assert np.linalg.norm(disk_mesh_small.interior_xy, axis=1).min() > 0


def test_mesh_construction_deterministic():
    spec = DomainSpec.star_shaped(1.0, (0.1, 0.2), (0.05,))
    m1 = build_mesh(spec, (8, 16))
    m2 = build_mesh(spec, (8, 16))
    for name in ("interior_xy", "boundary_xy", "w_vol", "w_bnd", "normals"):
        np.testing.assert_array_equal(getattr(m1, name), getattr(m2, name))


def test_reflection_symmetry():
    # R(theta) = R(-theta): node set invariant under y -> -y up to reindexing
    from scipy.spatial import cKDTree

    mesh = build_mesh(DomainSpec.star_shaped(1.0, (0.0, 0.0, 0.2)), (8, 16))
    for pts in (mesh.interior_xy, mesh.boundary_xy):
        reflected = pts * np.array([1.0, -1.0])
        dist, _ = cKDTree(pts).query(reflected)
        assert dist.max() <= 1e-12


def test_mesh_arrays_are_read_only(disk_mesh_small):
    with pytest.raises(ValueError):
        disk_mesh_small.w_vol[0] = 2.0


def test_nonpositive_radius_rejected():
    with pytest.raises(NonPositiveRadius):
        build_mesh(DomainSpec.star_shaped(1.0, (1.5,)), (8, 16))
    with pytest.raises(NonPositiveRadius):
        DomainSpec.star_shaped(-1.0)


@pytest.mark.parametrize("spec,res", [
    (DomainSpec.interval(), 3),
    (DomainSpec.disk(), (3, 16)),
    (DomainSpec.disk(), (8, 7)),
])
def test_resolution_too_small(spec, res):
    with pytest.raises(ResolutionTooSmall):
        build_mesh(spec, res)


def test_interval_requires_ordered_bounds():
    with pytest.raises(ConfigError):
        DomainSpec.interval(1.0, 0.0)


def test_domain_json_round_trip():
    spec = DomainSpec.star_shaped(1.5, (0.1, 0.2), (0.0, 0.05))
    obj = spec.to_json(resolution=(8, 16))
    spec2, res = DomainSpec.from_json(obj)
    assert spec2 == spec
    assert res == (8, 16)

    spec = DomainSpec.interval(-1.0, 2.0)
    spec2, res = DomainSpec.from_json(spec.to_json())
    assert spec2 == spec and res is None

    with pytest.raises(ConfigError):
        DomainSpec.from_json({"kind": "hexagon"})


def test_distance_to_boundary():
    mesh = build_mesh(DomainSpec.disk(), (32, 64))
    d = distance_to_boundary(mesh, np.array([[0.0, 0.0], [0.9, 0.0]]))
    assert abs(d[0] - 1.0) <= 5e-3
    assert abs(d[1] - 0.1) <= 5e-3
    mesh1 = build_mesh(DomainSpec.interval(0.0, 1.0), 8)
    d = distance_to_boundary(mesh1, np.array([[0.25]]))
    assert d[0] == pytest.approx(0.25, abs=1e-15)


def test_staggered_radial_layout(disk_mesh_small):
    s = disk_mesh_small.s
    n = disk_mesh_small.n_r
    np.testing.assert_allclose(s, (np.arange(n) + 0.5) / n, atol=1e-15)
