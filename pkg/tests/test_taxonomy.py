import itertools

import numpy as np
import pytest

from eigenmax.groups import make_group
from eigenmax.taxonomy import (
    NonIntegerGenus,
    NotSeparating,
    Species,
    SurfaceDescriptor,
    TaxonomyError,
    TypeB,
    all_case_collapses,
    boundary_topology,
    closed_surface,
    degeneration_dag,
    descriptor_from_json,
    double,
    elementary_degenerations,
    euler_char,
    euler_char_topological,
    genus_of_type,
    halve,
    species_violations,
    sphere_family,
    validate_species,
)

Z2 = make_group("onestar")
D2 = make_group("dihedral", (2,))
D3 = make_group("dihedral", (3,))
T233 = make_group("platonic", (2, 3, 3))


def test_species_examples():
    ok, _ = validate_species(Species(3, 0, True, untwisted_ovals=4))
    assert ok
    ok, bad = validate_species(Species(0, 0, True))
    assert not ok and any("C + W" in b for b in bad)
    ok, _ = validate_species(Species(2, 0, False, twisted_ovals=2))
    assert ok  # F + 2C = 4 = genus + 2


def test_euler_examples():
    s = Species(3, 0, True, untwisted_ovals=4)
    assert euler_char(s) == -4 == euler_char_topological(s)
    disk = Species(0, 1, True, untwisted_chains=1)
    assert euler_char(disk) == 1
    klein_like = Species(2, 0, False, twisted_ovals=2)
    assert euler_char(klein_like) == 0 == euler_char_topological(klein_like)


def test_closed_euler_consistency():
    # whenever the species is valid and closed, the two formulas must agree
    for genus in range(7):
        for orientable in (True, False):
            for F, Cm, Cp, Tm, Tp in itertools.product(range(5), repeat=5):
                s = Species(genus, 0, orientable, F, Cm, Cp, Tm, Tp)
                if s.is_valid():
                    assert euler_char(s) == euler_char_topological(s)


def test_genus_formula_examples():
    for k in range(2, 9):
        dk = make_group("dihedral", (k,))
        assert genus_of_type(dk, TypeB.make(v={(0, 1): 2})) == 1
    for f in range(3):
        for e1 in range(4):
            if f + e1 == 0:
                continue
            b = TypeB.make(f=f, e={0: e1})
            assert genus_of_type(Z2, b) == 2 * f + e1 - 1
    for a in range(1, 6):
        assert sphere_family(a).genus() == a - 1
    assert genus_of_type(T233, TypeB.make(v={(0, 1): 1})) == 5


def test_genus_rejects_empty_type():
    with pytest.raises(TaxonomyError):
        genus_of_type(Z2, TypeB.make())


def test_elementary_degenerations_examples():
    parent = closed_surface(Z2, TypeB.make(f=2, e={0: 3}))
    edges = elementary_degenerations(parent)
    assert len(edges) == 1
    child = edges[0].child
    assert child.btype == TypeB.make(f=1, e={0: 4})
    assert parent.genus() == 6 and child.genus() == 5

    assert [e.child.label() for e in elementary_degenerations(sphere_family(4))] == ["M(3)"]
    assert elementary_degenerations(sphere_family(1)) == []

    base = closed_surface(D2, TypeB.make(v={(0, 1): 1}))
    assert elementary_degenerations(base) == []


def test_elementary_moves_drop_genus_by_formula():
    groups_to_try = [Z2, D2, D3, T233, make_group("platonic", (2, 2, 5))]
    rng = np.random.default_rng(3)
    for g in groups_to_try:
        n = g.n_generators
        for _ in range(12):
            f = int(rng.integers(0, 3))
            e = {i: int(rng.integers(0, 3)) for i in range(n)}
            v = {(i, j): int(rng.integers(0, 2)) for i in range(n) for j in range(i + 1, n)}
            try:
                b = TypeB.make(f, e, v)
                parent = closed_surface(g, b)
            except TaxonomyError:
                continue
            for edge in elementary_degenerations(parent):
                drop = edge.genus_drop()
                assert drop > 0
                order = g.order
                if edge.move.startswith("1-"):
                    assert drop == order // 2
                elif "-" in edge.move:
                    i, j = _pair_from_move(edge.move)
                    k = g.relation_order(i, j)
                    assert drop == order * (k - 1) // (2 * k)
                else:
                    i, j = _pair_from_move(edge.move)
                    k = g.relation_order(i, j)
                    assert drop == order // (2 * k)


def _pair_from_move(move):
    import re

    idx = [int(s) - 1 for s in re.findall(r"rho(\d)", move)]
    return idx[-2], idx[-1]


def test_all_case_collapses_include_rho_i():
    parent = closed_surface(Z2, TypeB.make(f=1, e={0: 2}))
    moves = {e.move for e in all_case_collapses(parent)}
    assert "-rho1" in moves
    assert "-1" in moves


def test_degeneration_dag():
    dag = degeneration_dag(closed_surface(Z2, TypeB.make(f=1, e={0: 1})), 3)
    assert dag.complexity() >= 1
    for a, b, _, _ in dag.edges:
        ga = next(n.genus() for n in dag.nodes if n.label() == a)
        gb = next(n.genus() for n in dag.nodes if n.label() == b)
        assert gb < ga
    assert degeneration_dag(sphere_family(1), 5).complexity() == 0
    assert (
        degeneration_dag(closed_surface(D2, TypeB.make(v={(0, 1): 1})), 3).complexity() == 0
    )
    dot = dag.to_dot()
    assert dot.startswith("digraph") and "->" in dot


def test_double_halve_roundtrip():
    n = halve(closed_surface(Z2, TypeB.make(f=1, e={0: 1})), "tau")
    assert double(n) == closed_surface(Z2, TypeB.make(f=1, e={0: 1}))
    with pytest.raises(NotSeparating):
        halve(closed_surface(D3, TypeB.make(v={(0, 1): 1})), "rho1")
    m = closed_surface(D2, TypeB.make(f=1))
    assert double(halve(m, "rho1")) == m


def test_boundary_topology():
    n = halve(closed_surface(Z2, TypeB.make(f=2, e={0: 3})), "rho1")
    assert boundary_topology(n) == (2, 3)
    n0 = halve(closed_surface(Z2, TypeB.make(f=3)), "rho1")
    assert boundary_topology(n0) == (2, 2)
    d2 = halve(closed_surface(D2, TypeB.make(f=1, e={0: 1, 1: 1})), "rho1")
    assert boundary_topology(d2) == (3, 2)
    g = make_group("platonic", (2, 2, 3))
    n22k = halve(closed_surface(g, TypeB.make(e={0: 1})), "rho1")
    assert boundary_topology(n22k) == (0, 6)
    # N_tau(Trivial, a) has genus zero and a boundary circles
    for a in range(1, 5):
        nt = halve(sphere_family(a), "tau")
        assert boundary_topology(nt) == (0, a)


def test_tau_half_matches_genus_plus_one():
    desc = closed_surface(Z2, TypeB.make(f=1, e={0: 1}))
    half = halve(desc, "tau")
    assert boundary_topology(half) == (0, desc.genus() + 1)


def test_descriptor_json_roundtrip():
    for desc in [
        sphere_family(3),
        closed_surface(Z2, TypeB.make(f=1, e={0: 2})),
        closed_surface(T233, TypeB.make(v={(0, 2): 1})),
        halve(closed_surface(D2, TypeB.make(f=1)), "rho1"),
    ]:
        assert descriptor_from_json(desc.to_json()) == desc


def test_exhaustive_species_against_brute_force():
    # vectorized clause transcription, independent of species_violations
    g, k, eo, F, Cm, Cp, Tm, Tp = np.meshgrid(
        np.arange(7),
        np.arange(5),
        np.arange(2),
        np.arange(9),
        np.arange(9),
        np.arange(9),
        np.arange(9),
        np.arange(9),
        indexing="ij",
        sparse=False,
    )
    C = Cm + Cp
    T = Tm + Tp
    W = np.where(T > 0, k, 0)
    orient = eo == 1
    brute = (
        (C + W >= 1)
        & (T <= 1)
        & (~((T == 0) & (k != 0) & (k != 2)))
        & (~((k == 0) & (T != 0)))
        & np.where(
            orient,
            (F == 0) & (Cm == 0) & (Tm == 0) & (Cp + Tp == g + 1),
            F + 2 * (C + T) == g + 2,
        )
    )
    flat = zip(
        g.ravel(), k.ravel(), orient.ravel(), F.ravel(), Cm.ravel(),
        Cp.ravel(), Tm.ravel(), Tp.ravel(), brute.ravel(),
    )
    for gg, kk, oo, ff, cm, cp, tm, tp, expected in flat:
        got = not species_violations(int(gg), int(kk), bool(oo), int(ff),
                                     int(cm), int(cp), int(tm), int(tp))
        assert got == expected, (gg, kk, oo, ff, cm, cp, tm, tp)
