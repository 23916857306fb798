"""Integral laminations on a ciliated disk and their twisted-algebra lifts.

Curves are stored combinatorially: arc counts across each triangle corner
plus integer peripheral weights around the cilia.  Isotopy never enters;
parallel strands merge by adding counts.  The edge-coordinate map takes
half the weighted crossing count per interior edge.  Its inverse marks
2*(n_e + s) points on every edge for the minimal feasible shift s, joins
them inside each triangle by the unique non-crossing matching, and
compensates the shift with weight -s peripheral loops.

The one-edge laminations (single coordinate +-1) lift into the twisted
torus algebra in closed form: the generator term plus fan-product
corrections in inverse generators.  Four based variants cover the cases
where outer or inner vertices of the quadrilateral around the edge are
holes rather than cilia; hole loop classes are auxiliary lattice
directions with vanishing central charge, and the sheet swap acts on them
by negation.  Iterated substitution of these lifts approximates the bare
generator to any prescribed height.
"""

import math
from dataclasses import dataclass

from .homology import HatBasis, Triangulation, edge_key
from .lattice import ChargeLattice, TwistedSeries

# Peripheral loops enter with weight -s.  Fixed once by the one-edge
# example (coordinate +1 on a quadrilateral); the opposite convention
# would flip every boundary-hugging strand to the other side of its
# cilium.
PERIPHERAL_WEIGHT_SIGN = -1

# Central charges of hole loop classes must vanish to this accuracy.
HOLE_CHARGE_TOL = 1e-9


class ApproximationInvariantError(RuntimeError):
    """The generator approximation produced a defect of impossible shape."""


@dataclass(frozen=True)
class CiliatedSurface:
    """Boundary data for lamination bookkeeping.

    cilia lists the cilium count per boundary component; holes are opaque
    labels for boundary components without cilia.  A boundary component
    coming from a pole of order k carries k - 2 cilia, order 2 giving a
    hole.
    """

    cilia: tuple
    holes: tuple = ()
    triangulation: Triangulation | None = None

    def __post_init__(self):
        cilia = tuple(int(c) for c in self.cilia)
        object.__setattr__(self, "cilia", cilia)
        object.__setattr__(self, "holes", tuple(self.holes))
        if any(c < 1 for c in cilia):
            raise ValueError("each ciliated boundary needs at least one cilium")
        if self.triangulation is not None:
            if len(cilia) != 1:
                raise ValueError("a triangulated surface here is a disk with "
                                 "one ciliated boundary")
            if self.triangulation.n_cilia != cilia[0]:
                raise ValueError("triangulation and cilium count disagree")

    @classmethod
    def from_pole_orders(cls, orders, triangulation=None) -> "CiliatedSurface":
        cilia, holes = [], []
        for i, k in enumerate(orders):
            k = int(k)
            if k == 2:
                holes.append(i)
            elif k >= 3:
                cilia.append(k - 2)
            else:
                raise ValueError("pole order below 2 has no boundary data")
        return cls(tuple(cilia), tuple(holes), triangulation)


@dataclass(frozen=True)
class EdgeCoordinates:
    """Integer coordinate per interior edge, in Triangulation order."""

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))

    @classmethod
    def from_dict(cls, tri: Triangulation, mapping) -> "EdgeCoordinates":
        vals = [0] * len(tri.interior_edges)
        for key, v in mapping.items():
            e = edge_key(*key)
            if e not in tri.edge_index:
                raise KeyError(f"{e} is not an interior edge")
            vals[tri.edge_index[e]] = int(v)
        return cls(tuple(vals))

    def as_dict(self, tri: Triangulation) -> dict:
        return dict(zip(tri.interior_edges, self.values))

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def _triangle_sides(triple):
    p, q, r = triple
    return (edge_key(p, q), edge_key(q, r), edge_key(r, p))


def triangle_matching(marks) -> tuple:
    """Corner arc counts of one triangle from its side mark counts.

    marks[k] points sit on side k; the unique non-crossing matching with
    no same-side arcs joins them across corners, t[k] arcs connecting the
    two sides other than k.  Counting endpoints per side forces
    t[k] = (m[k+1] + m[k+2] - m[k]) / 2.
    """
    m = tuple(int(x) for x in marks)
    if len(m) != 3 or any(x < 0 for x in m):
        raise ValueError("need three nonnegative mark counts")
    if sum(m) % 2:
        raise ValueError("odd mark total admits no matching")
    t = tuple((m[(k + 1) % 3] + m[(k + 2) % 3] - m[k]) // 2 for k in range(3))
    if any(x < 0 for x in t):
        raise ValueError("triangle inequality fails: one side carries more "
                         "marks than the other two combined")
    return t


@dataclass(frozen=True)
class Lamination:
    """Weighted curve system on a triangulated ciliated disk.

    triangle_arcs[i][k] counts the arcs of triangle i cutting the corner
    opposite side k (sides of triangle (p, q, r) in the order (p,q),
    (q,r), (r,p)).  peripheral[v] is the weight of the loop hugging
    cilium v; it ends once in each of the two adjacent gaps.  shift
    records the s used during construction.

    Weighted curve ends must cancel in every gap: arc endpoints count +1
    each, and the loops at the two cilia bounding the gap contribute
    their weights.
    """

    tri: Triangulation
    triangle_arcs: tuple
    peripheral: tuple
    shift: int = 0

    def __post_init__(self):
        arcs = tuple(tuple(int(x) for x in row) for row in self.triangle_arcs)
        object.__setattr__(self, "triangle_arcs", arcs)
        object.__setattr__(self, "peripheral",
                           tuple(int(w) for w in self.peripheral))
        object.__setattr__(self, "shift", int(self.shift))
        if len(arcs) != len(self.tri.triangles):
            raise ValueError("one arc triple per triangle")
        if any(len(row) != 3 for row in arcs):
            raise ValueError("arc counts come in triples")
        if any(x < 0 for row in arcs for x in row):
            raise ValueError("arc counts are nonnegative")
        if len(self.peripheral) != self.tri.n_cilia:
            raise ValueError("one peripheral weight per cilium")
        if self.shift < 0:
            raise ValueError("shift is nonnegative")
        self._gather_marks()
        n = self.tri.n_cilia
        for i in range(n):
            j = (i + 1) % n
            gap = edge_key(i, j)
            ends = self._marks[gap] + self.peripheral[i] + self.peripheral[j]
            if ends != 0:
                raise ValueError(f"curve ends in gap {gap} sum to {ends}, "
                                 "not 0")

    def _gather_marks(self):
        marks = {}
        for triple, t in zip(self.tri.triangles, self.triangle_arcs):
            sides = _triangle_sides(triple)
            for k, side in enumerate(sides):
                cnt = t[(k + 1) % 3] + t[(k + 2) % 3]
                prev = marks.get(side)
                if prev is None:
                    marks[side] = cnt
                elif prev != cnt:
                    raise ValueError(f"edge {side} sees {prev} arc ends from "
                                     f"one side and {cnt} from the other")
        object.__setattr__(self, "_marks", marks)

    def edge_marks(self, key) -> int:
        """Arc endpoints on one edge, equal from both adjacent triangles."""
        return self._marks[edge_key(*key)]

    @property
    def is_empty(self) -> bool:
        return (not any(x for row in self.triangle_arcs for x in row)
                and not any(self.peripheral))


def _coerce_coords(coords, tri: Triangulation) -> tuple:
    if isinstance(coords, EdgeCoordinates):
        vals = coords.values
    elif isinstance(coords, dict):
        vals = EdgeCoordinates.from_dict(tri, coords).values
    else:
        vals = tuple(int(v) for v in coords)
    if len(vals) != len(tri.interior_edges):
        raise ValueError("one coordinate per interior edge")
    return vals


def lamination_from_coordinates(coords, tri: Triangulation,
                                shift: int | None = None) -> Lamination:
    """Curve system realizing prescribed edge coordinates.

    Shifts every coordinate by s (boundary edges count as 0) until all
    triangle inequalities hold, marks 2*(n_e + s) points per edge, joins
    them by the non-crossing matching in each triangle, and adds weight
    -s peripheral loops.  Any shift at least the minimal feasible one
    yields the same coordinates; pass shift to override the default.
    """
    vals = _coerce_coords(coords, tri)
    n_of = {e: v for e, v in zip(tri.interior_edges, vals)}
    for triple in tri.triangles:
        for side in _triangle_sides(triple):
            n_of.setdefault(side, 0)
    s_min = 0
    for triple in tri.triangles:
        nv = [n_of[s] for s in _triangle_sides(triple)]
        for k in range(3):
            s_min = max(s_min, nv[k] - nv[(k + 1) % 3] - nv[(k + 2) % 3])
    s = s_min if shift is None else int(shift)
    if s < s_min:
        raise ValueError(f"shift {s} is below the minimal feasible {s_min}")
    arcs = []
    for triple in tri.triangles:
        marks = tuple(2 * (n_of[side] + s) for side in _triangle_sides(triple))
        arcs.append(triangle_matching(marks))
    peripheral = tuple(PERIPHERAL_WEIGHT_SIGN * s
                       for _ in range(tri.n_cilia))
    return Lamination(tri, tuple(arcs), peripheral, s)


def coordinates_from_lamination(lam: Lamination,
                                tri: Triangulation | None = None
                                ) -> EdgeCoordinates:
    """Half the weighted crossing count per interior edge.

    Arcs cross an edge once per mark; the peripheral loop at a cilium
    crosses every interior edge ending there exactly once, since such
    edges terminate at the encircled cilium.  Endpoint cancellation in
    the gaps makes every count even.
    """
    if tri is None:
        tri = lam.tri
    elif tri is not lam.tri and tri.triangles != lam.tri.triangles:
        raise ValueError("triangulation does not match the lamination")
    out = []
    for (u, v) in tri.interior_edges:
        total = lam.edge_marks((u, v)) + lam.peripheral[u] + lam.peripheral[v]
        if total % 2:
            raise ValueError(f"weighted crossings of edge {(u, v)} are odd; "
                             "curve ends do not cancel in the gaps")
        out.append(total // 2)
    return EdgeCoordinates(tuple(out))


@dataclass(frozen=True)
class HoleVariant:
    """Hole placement for the based one-edge lamination lifts.

    position 'outer' puts holes at outer vertices of the quadrilateral
    around the edge (sign +1 lifts); 'inner' at inner vertices (sign -1).
    eps holds one or two loop classes around the holes, as vectors of an
    extended lattice with vanishing central charge.  With one outer hole
    it sits at the vertex carrying the first fan; with one inner hole at
    the vertex carrying the second fan.  c_flag is the base point
    constant of the two-inner-holes case.
    """

    position: str
    eps: tuple
    c_flag: int = 1

    def __post_init__(self):
        if self.position not in ("outer", "inner"):
            raise ValueError("position is 'outer' or 'inner'")
        object.__setattr__(self, "eps", tuple(self.eps))
        if not 1 <= len(self.eps) <= 2:
            raise ValueError("one or two hole loop classes")
        if self.c_flag not in (0, 1):
            raise ValueError("c_flag is 0 or 1")


def _fan_partials(fans, basis: HatBasis, lat: ChargeLattice) -> list:
    """Running products of inverse generators along one fan."""
    out = []
    running = TwistedSeries.unit(lat)
    for key in fans:
        running = running * TwistedSeries.monomial(lat, -basis.edge_vector(key))
        out.append(running)
    return out


def lift_lamination(e0, sign: int, tri: Triangulation, basis: HatBasis,
                    L: float, holes: HoleVariant | None = None
                    ) -> TwistedSeries:
    """Closed-form lift of the one-edge lamination with coordinate +-1.

    Evaluates the generator term plus fan-product corrections in inverse
    generators, truncated at height L (pass math.inf to keep everything).
    With holes, evaluates the based variant selected by the hole position
    and count; hole loop classes get their sheet-swap image by negation.
    """
    if sign not in (1, -1):
        raise ValueError("sign is +1 or -1")
    fans = tri.fans(e0)
    lat = basis.lattice

    def mono(v):
        return TwistedSeries.monomial(lat, v)

    unit = TwistedSeries.unit(lat)
    g0 = basis.edge_vector(e0)
    plus = mono(g0)
    minus = mono(-g0)

    if holes is None:
        if sign > 0:
            prods_e = _fan_partials(fans["e"], basis, lat)
            prods_f = _fan_partials(fans["f"], basis, lat)
            total = plus.copy()
            one_plus = unit + plus
            for pe in prods_e:
                total = total + one_plus * pe
            for pf in prods_f:
                total = total + one_plus * pf
            cross = plus * (unit + minus) * (unit + minus)
            for pe in prods_e:
                for pf in prods_f:
                    total = total + cross * pe * pf
        else:
            prods_g = _fan_partials(fans["g"], basis, lat)
            prods_h = _fan_partials(fans["h"], basis, lat)
            sum_g = unit.copy()
            for pg in prods_g:
                sum_g = sum_g + pg
            sum_h = unit.copy()
            for ph in prods_h:
                sum_h = sum_h + ph
            total = minus * sum_g * sum_h
        return total.truncate(L)

    for eps in holes.eps:
        if abs(lat.charge(eps)) > HOLE_CHARGE_TOL:
            raise ValueError("hole loop classes carry vanishing central "
                             "charge")
    if holes.position == "outer":
        if sign != 1:
            raise ValueError("outer holes pair with sign +1")
        prods_e = _fan_partials(fans["e"], basis, lat)
        prods_f = _fan_partials(fans["f"], basis, lat)
        if len(holes.eps) == 1:
            eps, = (lat.vector(e) for e in holes.eps)
            total = mono(g0 + eps)
            coeff_e = (mono(eps) * (unit + plus)
                       + mono(-eps) * (unit + minus))
            for pe in prods_e:
                total = total + coeff_e * pe
            coeff_f = mono(eps) * (unit + plus)
            for pf in prods_f:
                total = total + coeff_f * pf
            cross = mono(g0 + eps) * (unit + minus) * (unit + minus)
            for pe in prods_e:
                for pf in prods_f:
                    total = total + cross * pe * pf
        else:
            e1, e2 = (lat.vector(e) for e in holes.eps)
            lead = mono(g0 + e1 + e2)
            total = lead.copy()
            coeff_e = lead + mono(-e1 + e2)
            for pe in prods_e:
                total = total + coeff_e * pe
            coeff_f = mono(e1 + e2) * (unit + plus)
            for pf in prods_f:
                total = total + coeff_f * pf
            for pe in prods_e:
                for pf in prods_f:
                    total = total + coeff_f * pe * pf
        return total.truncate(L)

    if sign != -1:
        raise ValueError("inner holes pair with sign -1")
    prods_g = _fan_partials(fans["g"], basis, lat)
    prods_h = _fan_partials(fans["h"], basis, lat)
    if len(holes.eps) == 1:
        eps, = (lat.vector(e) for e in holes.eps)
        base = minus * mono(eps)
        total = base.copy()
        for pg in prods_g:
            total = total + base * pg
        coeff_h = base + mono(-eps)
        for ph in prods_h:
            total = total + coeff_h * ph
        for pg in prods_g:
            for ph in prods_h:
                total = total + base * pg * ph
    else:
        e1, e2 = (lat.vector(e) for e in holes.eps)
        base = minus * mono(e1 + e2)
        total = base.copy()
        coeff_g = mono(e1 + e2) * (unit * holes.c_flag + minus)
        for pg in prods_g:
            total = total + coeff_g * pg
        if holes.c_flag:
            for ph in prods_h:
                total = total + base * ph
            for pg in prods_g:
                for ph in prods_h:
                    total = total + base * pg * ph
    return total.truncate(L)


def _positive_degree(v) -> int:
    return sum(c for c in v if c > 0)


def _check_defect_shape(defect: TwistedSeries, sign: int) -> None:
    """Defect monomials stay in the translated lower-half-plane cone.

    The cone is spanned by the negated generators; membership of an
    exponent vector is exactly the condition that at most one positive
    generator appears (sign +1), or none at all (sign -1).
    """
    cap = 1 if sign > 0 else 0
    for v in defect.terms:
        if _positive_degree(v) > cap:
            raise ApproximationInvariantError(
                f"defect monomial {tuple(v)} has positive-generator degree "
                f"{_positive_degree(v)}, above {cap}")


def approximate_generator(e0, sign: int, tri: Triangulation,
                          basis: HatBasis, L: float):
    """Express the bare generator through lamination lifts up to height L.

    Starts from the one-edge lift and, per round, substitutes lamination
    lifts for every monomial still separating it from [generator]^sign
    below height L.  A substitution cancels its monomial exactly; all
    byproducts sit strictly lower in the componentwise exponent order
    (exponent collapse such as [+e][-e-f] = +-[-f] included), hence at
    least min Im Z lower in Im Z.  The largest visible Im Z therefore
    drops linearly with the round number while visibility bounds it below
    by -L, so the defect empties after at most
    (L + max Im Z)/(min Im Z) + O(1) rounds.  Returns the truncated
    series (equal to the truncated generator monomial) and the number of
    polynomials built, the initial lift included.
    """
    if sign not in (1, -1):
        raise ValueError("sign is +1 or -1")
    lat = basis.lattice
    edges = tri.interior_edges
    if lat.rank != len(edges):
        raise ValueError("auxiliary lattice directions are not supported "
                         "by the approximation")
    ims = [lat.charge(basis.edge_vector(e)).imag for e in edges]
    if min(ims) <= 0:
        raise ValueError("all generator charges must lie in the upper half "
                         "plane")
    max_steps = int(math.ceil((L + max(ims)) / min(ims))) + 3

    lifts = {}

    def lift_for(i: int, sgn: int) -> TwistedSeries:
        if (i, sgn) not in lifts:
            lifts[(i, sgn)] = lift_lamination(edges[i], sgn, tri, basis,
                                              math.inf)
        return lifts[(i, sgn)]

    target = TwistedSeries.monomial(lat, sign * basis.edge_vector(e0))
    p = lift_for(tri.edge_index[edge_key(*e0)], sign)
    steps = 1
    while True:
        defect = (target - p).truncate(L)
        _check_defect_shape(defect, sign)
        if defect.is_zero():
            break
        if steps >= max_steps:
            raise ApproximationInvariantError(
                "defect height failed to clear the linear growth bound")
        for v in sorted(defect.terms, key=tuple):
            c = defect.terms[v]
            prod = TwistedSeries.unit(lat)
            for i, m in enumerate(v):
                if m:
                    prod = prod * lift_for(i, 1 if m > 0 else -1) ** abs(m)
            lead = prod.coefficient(v)
            if abs(lead) != 1:
                raise ApproximationInvariantError(
                    f"substitution for {tuple(v)} has leading coefficient "
                    f"{lead}")
            p = p + prod * (c * lead)
        steps += 1
    return p.truncate(L), steps
