import numpy as np
import pytest

from eigenmax.chambers import (
    InvalidType,
    build_mesh,
    chamber_mesh,
    fundamental_polygon,
)
from eigenmax.fem import laplace_spectrum, normalized_first, steklov_spectrum
from eigenmax.groups import make_group
from eigenmax.taxonomy import (
    SurfaceDescriptor,
    TypeB,
    closed_surface,
    halve,
    sphere_family,
)

Z2 = make_group("onestar")
D2 = make_group("dihedral", (2,))
D3 = make_group("dihedral", (3,))


def test_fundamental_polygons():
    normals, corners, incenter = fundamental_polygon(make_group("platonic", (2, 3, 3)))
    assert len(corners) == 3
    for (i, j), pts in corners.items():
        c = pts[0]
        assert abs(c @ normals[i]) < 1e-12 and abs(c @ normals[j]) < 1e-12
    assert all(incenter @ n > 0 for n in normals)


def test_hemisphere_chamber_for_sphere():
    chamber = chamber_mesh(make_group("trivial"), TypeB.make(f=1), 0.12)
    # all boundary panels are the tau circle; positions on the unit sphere
    assert set(chamber.panels.values()) == {"mirror:tau"}
    assert np.allclose(np.linalg.norm(chamber.positions, axis=1), 1.0, atol=1e-12)
    # one hemisphere: area about 2*pi
    assert chamber.area() == pytest.approx(2 * np.pi, rel=0.02)


def test_build_sphere_from_chambers():
    mesh = build_mesh(sphere_family(1), target_vertices=900)
    assert mesh.euler_characteristic() == 2
    assert mesh.meta["chambers"] == 2
    assert mesh.check_action("tau")
    assert mesh.area() == pytest.approx(4 * np.pi, rel=0.02)
    lam = normalized_first(mesh, "laplace")
    assert lam == pytest.approx(8 * np.pi, rel=0.02)


def test_build_disk_and_steklov():
    disk = build_mesh(halve(sphere_family(1), "tau"), target_vertices=700)
    assert disk.euler_characteristic() == 1
    assert disk.has_boundary()
    sig = normalized_first(disk, "steklov")
    assert sig == pytest.approx(2 * np.pi, rel=0.02)


def test_build_genus_two():
    desc = closed_surface(Z2, TypeB.make(f=1, e={0: 1}))
    assert desc.genus() == 2
    mesh = build_mesh(desc, target_vertices=1600)
    assert mesh.euler_characteristic() == -2
    assert mesh.meta["chambers"] == 4
    for name in mesh.actions:
        assert mesh.check_action(name), name


def test_action_free_and_transitive_on_chambers():
    desc = closed_surface(Z2, TypeB.make(f=1, e={0: 1}))
    mesh = build_mesh(desc, target_vertices=1200)
    # label triangles by chamber: pick a reference triangle per chamber copy
    tri_keys = {tuple(sorted(t)): k for k, t in enumerate(mesh.triangles.tolist())}
    ref = tuple(sorted(mesh.triangles[0].tolist()))
    images = {ref}
    for name, perm in mesh.actions.items():
        img = tuple(sorted(int(perm[v]) for v in mesh.triangles[0]))
        assert img in tri_keys, name
        assert img != ref, f"{name} fixes a chamber triangle (action not free)"
        images.add(img)
    # transitivity: the orbit of the reference triangle has one member per chamber
    assert len(images) == mesh.meta["chambers"]


def test_build_torus_digon():
    desc = closed_surface(D3, TypeB.make(v={(0, 1): 2}))
    assert desc.genus() == 1
    mesh = build_mesh(desc, target_vertices=1800)
    assert mesh.euler_characteristic() == 0
    assert mesh.meta["chambers"] == 12


def test_build_digon_sphere():
    desc = closed_surface(D3, TypeB.make(v={(0, 1): 1}))
    assert desc.genus() == 0
    mesh = build_mesh(desc, target_vertices=1500)
    assert mesh.euler_characteristic() == 2


def test_build_bounded_rho1():
    desc = halve(closed_surface(Z2, TypeB.make(f=1, e={0: 1})), "rho1")
    mesh = build_mesh(desc, target_vertices=1200)
    # genus 1 with 1 boundary circle
    assert mesh.euler_characteristic() == 2 - 2 * 1 - 1
    spec = steklov_spectrum(mesh, count=4)
    assert spec.first_nonzero() > 0


def test_corner_capacity_enforced():
    with pytest.raises(InvalidType):
        chamber_mesh(D3, TypeB.make(v={(0, 1): 3}), 0.2)
    with pytest.raises(InvalidType):
        chamber_mesh(make_group("platonic", (2, 3, 3)), TypeB.make(v={(0, 1): 2}), 0.2)


def test_chamber_one_star():
    chamber = chamber_mesh(Z2, TypeB.make(f=1, e={0: 1}), 0.15)
    labels = set(chamber.panels.values())
    assert labels == {"mirror:tau", "mirror:rho1"}
    # one interior hole plus one half-disk notch on the mirror circle
    from eigenmax.meshcore import boundary_loops

    loops = boundary_loops(chamber)
    assert len(loops) == 2  # outer boundary (mirror+notch) and the interior hole
