import numpy as np
import pytest

from eigenmax.builtins import conformal_annulus, flat_torus, round_sphere, unit_disk
from eigenmax.chambers import build_mesh
from eigenmax.equivariant import average_invariant
from eigenmax.fem import laplace_spectrum, normalized_first, steklov_spectrum
from eigenmax.groups import make_group
from eigenmax.optimize import (
    GuardViolation,
    eigenvalue_derivative,
    flatten_weights,
    gap_report,
    invariant_curve_flag,
    maximize,
    moduli_sweep,
)
from eigenmax.taxonomy import TypeB, closed_surface, halve, sphere_family

CATENOID_T = 1.1996786402577338  # root of t = coth(t)


def _noisy_density(mesh, amp=0.2, seed=3):
    rng = np.random.default_rng(seed)
    rho = 1.0 + amp * (2 * rng.random(mesh.n_vertices) - 1)
    return average_invariant(rho, mesh)


def test_derivative_scale_invariance():
    mesh = round_sphere(2)
    spec = laplace_spectrum(mesh, count=4)
    u = spec.vectors[:, spec.n_zero]
    lam = spec.first_nonzero()
    dlam, dbar = eigenvalue_derivative(mesh, u, mesh.density, "laplace", eigenvalue=lam)
    assert abs(dbar) < 1e-8 * lam * mesh.area()


def test_derivative_matches_central_difference():
    # three random meshes with all symmetries broken (simple first eigenvalue)
    rng = np.random.default_rng(12)
    for base_mesh in (unit_disk(2), flat_torus(0), round_sphere(2)):
        base = 1.0 + 0.3 * rng.random(base_mesh.n_vertices)
        mesh = type(base_mesh)(
            base_mesh.positions, base_mesh.triangles, base_mesh.edge_lengths,
            density=base, panels=base_mesh.panels, actions={}, meta=base_mesh.meta,
        )
        spec = laplace_spectrum(mesh, count=3)
        u = spec.vectors[:, spec.n_zero]
        lam = spec.first_nonzero()
        delta = rng.standard_normal(mesh.n_vertices)
        _, dbar = eigenvalue_derivative(mesh, u, delta, "laplace", eigenvalue=lam)
        errs = []
        for h in (1e-3, 5e-4):
            vals = []
            for s in (+1, -1):
                pert = mesh.with_density(mesh.density + s * h * delta)
                vals.append(normalized_first(pert, "laplace"))
            fd = (vals[0] - vals[1]) / (2 * h)
            errs.append(abs(fd - dbar))
        # central differences agree to second order
        assert errs[1] < errs[0]
        assert errs[0] < 5e-4 * max(1.0, abs(dbar))


def test_flatten_weights_recovers_constant():
    # two profiles whose equal-weight sum is constant
    x = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    profiles = np.column_stack([np.cos(x) ** 2, np.sin(x) ** 2])
    w = flatten_weights(profiles, np.ones(50))
    assert np.allclose(w, [1.0, 1.0], atol=1e-6)


def test_maximize_sphere_from_noise():
    mesh = round_sphere(3).with_density(_noisy_density(round_sphere(3)))
    state, final, spec = maximize(mesh, "laplace", max_iters=60)
    assert state.objective == pytest.approx(8 * np.pi, rel=0.01)
    assert state.residual < 0.05
    assert state.cluster_dim == 3
    # history is non-decreasing up to the line-search tolerance
    values = [v for _, v, _ in state.history]
    assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


def test_maximize_disk_steklov_from_noise():
    disk = unit_disk(3)
    rho = _noisy_density(disk, amp=0.3, seed=5)
    state, final, spec = maximize(disk.with_density(rho), "steklov", max_iters=60)
    assert state.objective == pytest.approx(2 * np.pi, rel=0.01)
    assert state.cluster_dim == 2


def test_maximize_torus_stays_flat():
    torus = flat_torus(1)
    state, final, spec = maximize(torus, "laplace", max_iters=30)
    assert state.objective <= 4 * np.pi**2 + 0.05
    assert state.objective == pytest.approx(4 * np.pi**2, rel=0.02)
    assert state.cluster_dim == 4


def test_density_stays_invariant():
    mesh = build_mesh(sphere_family(1), 700)
    noisy = mesh.with_density(_noisy_density(mesh, amp=0.15, seed=9))
    state, final, _ = maximize(noisy, "laplace", max_iters=25, residual_tol=0.03)
    for name, perm in final.actions.items():
        assert np.array_equal(final.density[perm], final.density), name


def test_scale_invariance_of_argmax():
    mesh = round_sphere(2)
    rho = _noisy_density(mesh, amp=0.1, seed=4)
    s1, m1, _ = maximize(mesh.with_density(rho), "laplace", max_iters=15, residual_tol=0.03)
    s2, m2, _ = maximize(
        mesh.with_density(3.0 * rho), "laplace", max_iters=15, residual_tol=0.03
    )
    assert s2.objective == pytest.approx(s1.objective, rel=1e-9)
    ratio = m2.density / m1.density
    assert np.allclose(ratio, ratio.mean(), rtol=1e-6)


def test_guard_violation_aborts():
    # a sphere falsely labeled as a closed BRS with a tiny bound must abort
    mesh = round_sphere(2)
    mesh.meta["brs"] = {"closed": True, "bound": 1.0}
    with pytest.raises(GuardViolation):
        maximize(mesh, "laplace", max_iters=5)


def test_annulus_moduli_sweep():
    params = [0.8, 1.0, CATENOID_T, 1.4]

    def factory(T):
        return conformal_annulus(T / np.pi, 1)

    results, best = moduli_sweep(params, factory, kind="steklov", max_iters=40)
    assert best["parameter"] == pytest.approx(CATENOID_T)
    expected = 4 * np.pi * np.tanh(CATENOID_T)
    assert best["state"].objective == pytest.approx(expected, rel=0.01)


def test_torus_aspect_sweep():
    params = [0.8, 0.9, 1.0, 1.1, 1.2]

    def factory(a):
        return flat_torus(1, aspect=a)

    results, best = moduli_sweep(params, factory, kind="laplace", max_iters=25)
    assert best["parameter"] == 1.0
    # single-point grid returns that point
    results1, best1 = moduli_sweep([1.0], factory, kind="laplace", max_iters=5)
    assert best1["parameter"] == 1.0


def test_invariant_curve_flags():
    assert invariant_curve_flag(sphere_family(1))
    assert invariant_curve_flag(closed_surface(make_group("onestar"), TypeB.make(f=1, e={0: 1})))
    d3 = closed_surface(make_group("dihedral", (3,)), TypeB.make(v={(0, 1): 2}))
    assert invariant_curve_flag(d3)
    plat = closed_surface(make_group("platonic", (2, 3, 3)), TypeB.make(v={(0, 1): 1}))
    assert not invariant_curve_flag(plat)


def test_gap_report_sphere_equality():
    report = gap_report(sphere_family(1), 8 * np.pi * 0.9995, kind="laplace")
    assert report["verdict"] == "equality"
    assert report["thresholds"]["sphere"] == pytest.approx(8 * np.pi)


def test_gap_report_disk():
    disk = halve(sphere_family(1), "tau")
    report = gap_report(disk, 2 * np.pi * 1.0004, kind="steklov")
    assert report["verdict"] == "equality"
    assert report["thresholds"]["disk"] == pytest.approx(2 * np.pi)


def test_gap_report_genus_two():
    desc = closed_surface(make_group("onestar"), TypeB.make(f=1, e={0: 1}))
    report = gap_report(desc, 40.0, children=[("M(Z2,1)", 4 * np.pi**2)], kind="laplace")
    assert report["clifford_torus"] == pytest.approx(4 * np.pi**2)
    assert report["exceeds_clifford"] is True
    assert "lawson_area_bound" in report
    assert report["verdict"] == "strict"
