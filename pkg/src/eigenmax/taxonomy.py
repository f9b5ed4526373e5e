"""Combinatorics of basic reflection surfaces.

Species validation and Euler characteristics, chamber types
b = f + sum_i e_i rho_i + sum_{i<j} v_ij rho_i rho_j, the genus formula,
elementary degenerations with their collapsed sets, the degeneration DAG,
and the doubling correspondence between closed and bounded surfaces.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .groups import ReflectionGroup, group_from_json, make_group


class TaxonomyError(ValueError):
    pass


class NonIntegerGenus(TaxonomyError):
    pass


class NotSeparating(TaxonomyError):
    pass


class UnsupportedFamily(TaxonomyError):
    pass


# ---------------------------------------------------------------------------
# Species
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Species:
    """Equivariant-homeomorphism invariants of a surface with reflection.

    Fields: genus, boundary components k, orientability flag, isolated fixed
    points F, twisted/untwisted ovals C-, C+, twisted/untwisted chains T-, T+.
    """

    genus: int
    boundary: int
    orientable: bool
    fixed_points: int = 0
    twisted_ovals: int = 0
    untwisted_ovals: int = 0
    twisted_chains: int = 0
    untwisted_chains: int = 0

    @property
    def C(self):
        return self.twisted_ovals + self.untwisted_ovals

    @property
    def T(self):
        return self.twisted_chains + self.untwisted_chains

    @property
    def W(self):
        # number of fixed-point arcs: one per boundary circle crossed by the
        # chain; zero when there is no chain.
        return self.boundary if self.T > 0 else 0

    def violations(self):
        return species_violations(
            self.genus,
            self.boundary,
            self.orientable,
            self.fixed_points,
            self.twisted_ovals,
            self.untwisted_ovals,
            self.twisted_chains,
            self.untwisted_chains,
        )

    def is_valid(self):
        return not self.violations()

    def to_json(self):
        return {
            "genus": self.genus,
            "boundary": self.boundary,
            "orientable": self.orientable,
            "F": self.fixed_points,
            "C-": self.twisted_ovals,
            "C+": self.untwisted_ovals,
            "T-": self.twisted_chains,
            "T+": self.untwisted_chains,
        }


def species_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    return Species(
        genus=int(obj["genus"]),
        boundary=int(obj.get("boundary", 0)),
        orientable=bool(obj["orientable"]),
        fixed_points=int(obj.get("F", 0)),
        twisted_ovals=int(obj.get("C-", 0)),
        untwisted_ovals=int(obj.get("C+", 0)),
        twisted_chains=int(obj.get("T-", 0)),
        untwisted_chains=int(obj.get("T+", 0)),
    )


def species_violations(genus, k, orientable, F, Cm, Cp, Tm, Tp):
    """Violated classification clauses for the given counters.

    Returns a tuple of clause names; empty means the species is realizable.
    Kept allocation-light because the exhaustive suite calls it millions of
    times.
    """
    C = Cm + Cp
    T = Tm + Tp
    W = k if T > 0 else 0
    out = ()
    if C + W < 1:
        out += ("fixed-set-nonempty: C + W >= 1",)
    if T > 1:
        out += ("chain-count: T <= 1",)
    if T == 0 and k not in (0, 2):
        out += ("chainless-boundary: T = 0 forces k in {0, 2}",)
    if k == 0 and T != 0:
        out += ("closed-chainless: k = 0 forces T = 0",)
    if orientable:
        if F != 0 or Cm != 0 or Tm != 0:
            out += ("orientable-untwisted: F = C- = T- = 0",)
        if Cp + Tp != genus + 1:
            out += ("orientable-count: C+ + T+ = genus + 1",)
    else:
        if F + 2 * (C + T) != genus + 2:
            out += ("nonorientable-count: F + 2(C + T) = genus + 2",)
    return out


def validate_species(species):
    """(is_valid, violation list) for a species."""
    v = species.violations()
    return (not v, list(v))


def euler_char(species):
    """Euler characteristic from the fixed-set counters."""
    return 4 - 2 * species.C - 2 * species.T - species.fixed_points - species.boundary


def euler_char_topological(species):
    """Euler characteristic from the topological type, for cross-checking."""
    if species.orientable:
        return 2 - 2 * species.genus - species.boundary
    return 2 - species.genus - species.boundary


# ---------------------------------------------------------------------------
# Types b and surface descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeB:
    """Chamber decoration f + sum e_i rho_i + sum v_ij rho_i rho_j.

    e maps generator index (0-based) to a count; v maps sorted index pairs to
    counts.  Zero entries are dropped in normalized form.
    """

    f: int = 0
    e: tuple = ()  # sorted tuple of (i, count)
    v: tuple = ()  # sorted tuple of ((i, j), count)

    @staticmethod
    def make(f=0, e=None, v=None):
        e_items = tuple(sorted((int(i), int(c)) for i, c in (e or {}).items() if c))
        v_items = tuple(
            sorted(((min(i, j), max(i, j)), int(c)) for (i, j), c in (v or {}).items() if c)
        )
        if any(c < 0 for _, c in e_items) or any(c < 0 for _, c in v_items) or f < 0:
            raise TaxonomyError("type coefficients must be nonnegative")
        return TypeB(int(f), e_items, v_items)

    def e_dict(self):
        return dict(self.e)

    def v_dict(self):
        return dict(self.v)

    @property
    def total(self):
        return self.f + sum(c for _, c in self.e) + sum(c for _, c in self.v)

    def shifted(self, df=0, de=None, dv=None):
        """New type with coefficients shifted; raises if any goes negative."""
        e = self.e_dict()
        v = self.v_dict()
        for i, d in (de or {}).items():
            e[i] = e.get(i, 0) + d
        for key, d in (dv or {}).items():
            key = (min(key), max(key))
            v[key] = v.get(key, 0) + d
        f = self.f + df
        if f < 0 or any(c < 0 for c in e.values()) or any(c < 0 for c in v.values()):
            raise TaxonomyError("coefficient went negative")
        return TypeB.make(f, e, v)

    def to_json(self):
        return {
            "f": self.f,
            "e": {str(i + 1): c for i, c in self.e},
            "v": {f"{i + 1}{j + 1}": c for (i, j), c in self.v},
        }

    def label(self):
        terms = []
        if self.f:
            terms.append(str(self.f))
        for i, c in self.e:
            terms.append((f"{c}" if c != 1 else "") + f"rho{i + 1}")
        for (i, j), c in self.v:
            terms.append((f"{c}" if c != 1 else "") + f"rho{i + 1}rho{j + 1}")
        return "+".join(terms) if terms else "0"


def type_from_json(obj):
    e = {int(k) - 1: int(c) for k, c in obj.get("e", {}).items()}
    v = {}
    for key, c in obj.get("v", {}).items():
        i, j = int(key[0]) - 1, int(key[1]) - 1
        v[(i, j)] = int(c)
    return TypeB.make(int(obj.get("f", 0)), e, v)


def validate_type(group, btype):
    n = group.n_generators
    for i, _ in btype.e:
        if not 0 <= i < n:
            raise TaxonomyError(f"generator index {i} invalid for {group}")
    for (i, j), _ in btype.v:
        if not (0 <= i < n and 0 <= j < n and i != j):
            raise TaxonomyError(f"generator pair {(i, j)} invalid for {group}")
    if btype.total < 1:
        raise TaxonomyError("type must have at least one fixed circle")


def genus_of_type(group, btype):
    """Genus of the closed surface assembled from (group, b)."""
    validate_type(group, btype)
    order = group.order
    total = Fraction(btype.f)
    for _, c in btype.e:
        total += Fraction(c, 2)
    for (i, j), c in btype.v:
        total += Fraction(c, 2 * group.relation_order(i, j))
    genus = order * total - 1
    if genus.denominator != 1 or genus < 0:
        raise NonIntegerGenus(f"type {btype.label()} for {group} gives genus {genus}")
    return int(genus)


@dataclass(frozen=True)
class SurfaceDescriptor:
    """A surface-with-action: closed M(G, b) or a bounded half of one.

    family: "closed" (doubling involution tau retained), "bounded_tau"
    (quotient by tau), or "bounded_rho1" (quotient by the first mirror, only
    for groups where rho1 is central).
    """

    family: str
    group: ReflectionGroup
    btype: TypeB

    def __post_init__(self):
        validate_type(self.group, self.btype)
        if self.family not in ("closed", "bounded_tau", "bounded_rho1"):
            raise UnsupportedFamily(self.family)
        if self.family == "bounded_rho1" and not _splits_off_rho1(self.group):
            raise NotSeparating(
                f"{self.group} has no central rho1 factor to halve along"
            )

    @property
    def closed(self):
        return self.family == "closed"

    def label(self):
        b = self.btype.label()
        g = self.group.label()
        if self.family == "closed":
            if self.group.kind == "trivial":
                return f"M({self.btype.f})"
            return f"M({g},{b})"
        sub = "tau" if self.family == "bounded_tau" else "rho1"
        if self.group.kind == "trivial" and sub == "tau":
            return f"N({self.btype.f})"
        return f"N_{sub}({g},{b})"

    def genus(self):
        if self.family == "closed":
            return genus_of_type(self.group, self.btype)
        return boundary_topology(self)[0]

    def boundary_count(self):
        if self.family == "closed":
            return 0
        return boundary_topology(self)[1]

    def to_json(self):
        return {
            "family": {"closed": "M", "bounded_tau": "N_tau", "bounded_rho1": "N_rho1"}[
                self.family
            ],
            "group": self.group.to_json(),
            "b": self.btype.to_json(),
        }


def descriptor_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    fam = {"M": "closed", "N_tau": "bounded_tau", "N_rho1": "bounded_rho1"}[obj["family"]]
    return SurfaceDescriptor(fam, group_from_json(obj["group"]), type_from_json(obj["b"]))


def closed_surface(group, btype):
    return SurfaceDescriptor("closed", group, btype)


def sphere_family(a):
    """M(a): the double of the genus-0 surface with a boundary circles."""
    return SurfaceDescriptor("closed", make_group("trivial"), TypeB.make(f=a))


def _splits_off_rho1(group):
    # rho1 is central exactly for 1*, *22 and *22m (there m(1, j) = 2 for all j)
    if group.kind == "onestar":
        return True
    if group.kind == "dihedral":
        return group.params[0] == 2
    if group.kind == "platonic":
        return group.params[0] == 2 and group.params[1] == 2
    return False


# ---------------------------------------------------------------------------
# Doubling correspondence
# ---------------------------------------------------------------------------

def double(descriptor):
    """Closed double of a bounded descriptor."""
    if descriptor.closed:
        raise TaxonomyError("descriptor is already closed")
    return SurfaceDescriptor("closed", descriptor.group, descriptor.btype)


def halve(descriptor, reflection="tau"):
    """Bounded half of a closed descriptor along a marked separating reflection."""
    if not descriptor.closed:
        raise TaxonomyError("can only halve a closed descriptor")
    if reflection == "tau":
        return SurfaceDescriptor("bounded_tau", descriptor.group, descriptor.btype)
    if reflection == "rho1":
        if not _splits_off_rho1(descriptor.group):
            raise NotSeparating(
                f"rho1 is not a central separating reflection of {descriptor.group}"
            )
        return SurfaceDescriptor("bounded_rho1", descriptor.group, descriptor.btype)
    raise TaxonomyError(f"unknown reflection {reflection!r}")


def boundary_topology(descriptor):
    """(genus, boundary component count) of a bounded descriptor."""
    if descriptor.closed:
        raise UnsupportedFamily("descriptor is closed")
    g = descriptor.group
    b = descriptor.btype
    if descriptor.family == "bounded_tau":
        # quotient by the doubling involution: genus 0, one boundary circle
        # per fixed circle of tau upstairs
        return (0, genus_of_type(g, b) + 1)
    e = b.e_dict()
    v = b.v_dict()
    if g.kind == "onestar":
        e1 = e.get(0, 0)
        if e1 > 0:
            return (b.f, e1)
        return (b.f - 1, 2)
    if g.kind == "dihedral":  # *22 only, checked at construction
        e1, e2, v12 = e.get(0, 0), e.get(1, 0), v.get((0, 1), 0)
        if e1 + v12 > 0:
            return (2 * b.f + e2, 2 * e1 + v12)
        return (2 * b.f + e2 - 1, 2)
    # *22k with central rho1; the dihedral factor is generated by rho2, rho3
    k = g.params[2]
    e1, e2, e3 = e.get(0, 0), e.get(1, 0), e.get(2, 0)
    v12, v13, v23 = v.get((0, 1), 0), v.get((0, 2), 0), v.get((1, 2), 0)
    if 2 * e1 + v12 + v13 > 0:
        return (k * (2 * b.f + e2 + e3) + v23, k * (2 * e1 + v12 + v13))
    return (k * (2 * b.f + e2 + e3) + v23 - 1, 2)


# ---------------------------------------------------------------------------
# Degenerations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollapsedClass:
    """One equivalence class of a collapsed set."""

    size: int
    description: str
    on_fixed_circle: bool  # class lies on the tau-fixed set (boundary after halving)

    @property
    def in_p_iota(self):
        # after halving by tau the class projects to a single interior point
        # exactly when it is a tau-pair off the fixed circles
        return self.size == 2 and not self.on_fixed_circle


@dataclass(frozen=True)
class DegenerationEdge:
    parent: SurfaceDescriptor
    child: SurfaceDescriptor
    move: str  # which circle family was collapsed
    case: str  # proof-case tag
    collapsed: tuple = ()

    def genus_drop(self):
        return self.parent.genus() - self.child.genus()


def _closed_child(parent, btype):
    return SurfaceDescriptor(parent.family, parent.group, btype)


def elementary_degenerations(parent):
    """Elementary degeneration edges of a closed descriptor.

    For the trivial group this is M(a) -> M(a-1); otherwise the children are
    b - v for v in {1 - rho_i, rho_i - rho_i rho_j, rho_i rho_j} whose result
    stays nonnegative.  Each edge carries the collapsed-set partition used by
    the gap criteria.
    """
    target = parent
    if not parent.closed:
        # degenerations of bounded surfaces are read off their doubles
        target = double(parent)
    g, b = target.group, target.btype
    edges = []
    if g.kind == "trivial":
        if b.f >= 2:
            child = _closed_child(target, TypeB.make(f=b.f - 1))
            classes = (
                CollapsedClass(2, "pair of points exchanged by the mirror", False),
            )
            edges.append(DegenerationEdge(target, child, "1", "interior-circle", classes))
        return _rehalve(parent, edges)
    n = g.n_generators
    for i in range(n):
        if b.f >= 1:
            try:
                child = _closed_child(target, b.shifted(df=-1, de={i: +1}))
            except TaxonomyError:
                child = None
            if child is not None:
                classes = (
                    CollapsedClass(
                        2, f"two points of one tau-circle on mirror rho{i + 1}", True
                    ),
                )
                edges.append(
                    DegenerationEdge(target, child, f"1-rho{i + 1}", "hole-to-mirror", classes)
                )
        for j in range(n):
            if j == i:
                continue
            key = (min(i, j), max(i, j))
            if b.e_dict().get(i, 0) >= 1:
                try:
                    child = _closed_child(target, b.shifted(de={i: -1}, dv={key: +1}))
                except TaxonomyError:
                    child = None
                if child is not None:
                    size = g.relation_order(i, j)
                    classes = (
                        CollapsedClass(
                            size,
                            f"orbit of a mirror rho{j + 1} point of a corner circle",
                            True,
                        ),
                    )
                    edges.append(
                        DegenerationEdge(
                            target,
                            child,
                            f"rho{i + 1}-rho{i + 1}rho{j + 1}",
                            "mirror-to-corner",
                            classes,
                        )
                    )
    for (i, j), c in b.v:
        if c >= 1:
            try:
                child = _closed_child(target, b.shifted(dv={(i, j): -1}))
            except TaxonomyError:
                continue
            classes = (
                CollapsedClass(2, "corner point paired with its mirror image", False),
            )
            edges.append(
                DegenerationEdge(
                    target, child, f"rho{i + 1}rho{j + 1}", "corner-collapse", classes
                )
            )
    return _rehalve(parent, edges)


def _rehalve(parent, edges):
    if parent.closed:
        return edges
    reflection = "tau" if parent.family == "bounded_tau" else "rho1"
    out = []
    for edge in edges:
        try:
            child = halve(edge.child, reflection)
        except TaxonomyError:
            continue
        out.append(
            DegenerationEdge(parent, child, edge.move, edge.case, edge.collapsed)
        )
    return out


def all_case_collapses(parent):
    """Single-orbit curve collapses from the full case analysis.

    Broader than the elementary list: includes collapsing an interior
    tau-circle family (type drop k = 1..f) and the direct mirror-segment
    collapse b - rho_i, which the elementary list only reaches in two steps.
    """
    if not parent.closed:
        parent = double(parent)
    g, b = parent.group, parent.btype
    moves = []
    if g.kind == "trivial":
        for k in range(1, b.f):
            moves.append((TypeB.make(f=b.f - k), f"-{k}", "interior-curve"))
        return [
            DegenerationEdge(parent, _closed_child(parent, t), mv, case)
            for t, mv, case in moves
        ]
    n = g.n_generators
    for k in range(1, b.f + 1):
        try:
            moves.append((b.shifted(df=-k), f"-{k}", "interior-curve"))
        except TaxonomyError:
            pass
    for i in range(n):
        if b.e_dict().get(i, 0) >= 1:
            moves.append((b.shifted(de={i: -1}), f"-rho{i + 1}", "mirror-segment"))
        if b.f >= 1:
            moves.append(
                (b.shifted(df=-1, de={i: +1}), f"-(1-rho{i + 1})", "hole-to-mirror")
            )
        for j in range(n):
            if j == i:
                continue
            key = (min(i, j), max(i, j))
            if b.e_dict().get(i, 0) >= 1 and b.v_dict().get(key, 0) == 0:
                moves.append(
                    (
                        b.shifted(de={i: -1}, dv={key: +1}),
                        f"-(rho{i + 1}-rho{i + 1}rho{j + 1})",
                        "mirror-to-corner",
                    )
                )
    for (i, j), c in b.v:
        if c >= 1:
            moves.append(
                (b.shifted(dv={(i, j): -1}), f"-rho{i + 1}rho{j + 1}", "corner-segment")
            )
    out = []
    seen = set()
    for t, mv, case in moves:
        if t.total < 1:
            continue
        try:
            child = _closed_child(parent, t)
            child.genus()
        except TaxonomyError:
            continue
        key = (child.label(), mv)
        if key in seen:
            continue
        seen.add(key)
        out.append(DegenerationEdge(parent, child, mv, case))
    return out


@dataclass
class DegenerationDag:
    root: SurfaceDescriptor
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)  # (parent_label, child_label, move, case)

    def complexity(self):
        """Length of the longest elementary chain from the root."""
        children = {}
        for a, b, _, _ in self.edges:
            children.setdefault(a, []).append(b)
        memo = {}

        def depth(label):
            if label not in memo:
                memo[label] = 1 + max(
                    (depth(c) for c in children.get(label, [])), default=-1
                )
            return memo[label]

        return depth(self.root.label())

    def to_dot(self):
        lines = ["digraph degenerations {"]
        for node in self.nodes:
            lines.append(f'  "{node.label()}" [label="{node.label()}\\ngenus {node.genus()}"];')
        for a, b, move, case in self.edges:
            lines.append(f'  "{a}" -> "{b}" [label="{move} ({case})"];')
        lines.append("}")
        return "\n".join(lines)

    def to_json(self):
        return {
            "root": self.root.label(),
            "nodes": [
                {"label": n.label(), "genus": n.genus(), "descriptor": n.to_json()}
                for n in self.nodes
            ],
            "edges": [
                {"parent": a, "child": b, "move": m, "case": c}
                for a, b, m, c in self.edges
            ],
            "complexity": self.complexity(),
        }


def degeneration_dag(root, depth, mode="elementary"):
    """Expand degenerations to the given depth; memoized on descriptor labels."""
    if depth < 0:
        raise TaxonomyError("depth must be nonnegative")
    expand = elementary_degenerations if mode == "elementary" else all_case_collapses
    dag = DegenerationDag(root)
    seen = {root.label(): root}
    frontier = [root]
    for _ in range(depth):
        next_frontier = []
        for node in frontier:
            for edge in expand(node):
                key = (node.label(), edge.child.label(), edge.move)
                if key not in {(a, b, m) for a, b, m, _ in dag.edges}:
                    dag.edges.append(
                        (node.label(), edge.child.label(), edge.move, edge.case)
                    )
                if edge.child.label() not in seen:
                    seen[edge.child.label()] = edge.child
                    next_frontier.append(edge.child)
        frontier = next_frontier
        if not frontier:
            break
    dag.nodes = list(seen.values())
    return dag
