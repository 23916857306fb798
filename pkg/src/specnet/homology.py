"""Triangulations of ciliated disks, intersection pairing, cycle recovery.

The combinatorial side lives here: ideal triangulations of a polygon whose
vertices are boundary cilia, the antisymmetrized adjacency pairing on
interior edges, and integer class recovery from measured periods. The
constructors that extract a triangulation from a computed trajectory
network are further down; they only need the combinatorics plus measured
escape directions.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .geometry import (IntegrationError, build_network, escape_length,
                       escape_sector, period)
from .lattice import ChargeLattice, LatticeVector


def edge_key(a: int, b: int):
    if a == b:
        raise ValueError("degenerate edge")
    return (a, b) if a < b else (b, a)


class Triangulation:
    """Ideal triangulation of a disk with cilia 0..n-1 on the boundary, ccw.

    triangles are vertex triples, each listed counterclockwise. Interior
    edges (diagonals) get indices in sorted key order; that order is the
    basis order for every lattice built on top.
    """

    def __init__(self, n_cilia: int, triangles):
        self.n_cilia = int(n_cilia)
        n = self.n_cilia
        if n < 3:
            raise ValueError("need at least three cilia")
        tris = []
        for t in triangles:
            a, b, c = (int(v) for v in t)
            if len({a, b, c}) != 3:
                raise ValueError("self-folded or degenerate triangle")
            if not all(0 <= v < n for v in (a, b, c)):
                raise ValueError("triangle vertex out of range")
            tris.append((a, b, c))
        self.triangles = tuple(tris)
        if len(self.triangles) != n - 2:
            raise ValueError("triangle count does not match a disk polygon")

        directed = {}
        for ti, (a, b, c) in enumerate(self.triangles):
            for u, v in ((a, b), (b, c), (c, a)):
                if (u, v) in directed:
                    raise ValueError("directed edge repeats; orientation broken")
                directed[(u, v)] = ti
        self._directed = directed

        boundary = set()
        for i in range(n):
            k = (i, (i + 1) % n)
            if k not in directed:
                raise ValueError("boundary side missing from the triangulation")
            if (k[1], k[0]) in directed:
                raise ValueError("boundary side used from both sides")
            boundary.add(edge_key(*k))
        self.boundary_edges = frozenset(boundary)

        interior = set()
        for (u, v) in directed:
            k = edge_key(u, v)
            if k in boundary:
                continue
            if (v, u) not in directed:
                raise ValueError("interior edge seen from one side only")
            interior.add(k)
        self.interior_edges = tuple(sorted(interior))
        self.edge_index = {k: i for i, k in enumerate(self.interior_edges)}
        if len(self.interior_edges) != n - 3:
            raise ValueError("interior edge count inconsistent")

    # ------------------------------------------------------------ queries

    def is_interior(self, key) -> bool:
        return edge_key(*key) in self.edge_index

    def all_edges(self):
        return list(self.interior_edges) + sorted(self.boundary_edges)

    def apex(self, p: int, q: int):
        """Third vertex of the triangle containing the directed edge p->q."""
        ti = self._directed.get((p, q))
        if ti is None:
            return None
        a, b, c = self.triangles[ti]
        for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
            if (u, v) == (p, q):
                return w
        raise AssertionError("directed edge bookkeeping broken")

    def quad(self, e0):
        """Quadrilateral around an interior edge.

        Returns (p, q, a, b): e0 = {p, q}, a the apex over p->q, b the apex
        over q->p. The counterclockwise boundary cycle is q, a, p, b.
        """
        p, q = edge_key(*e0)
        if (p, q) not in self.edge_index:
            raise ValueError("quad is defined for interior edges only")
        a = self.apex(p, q)
        b = self.apex(q, p)
        if a is None or b is None:
            raise ValueError("edge does not bound two triangles")
        return p, q, a, b

    def edges_at(self, x: int):
        """Interior edges with endpoint x, by ccw target order from x+1."""
        n = self.n_cilia
        out = []
        for step in range(1, n):
            t = (x + step) % n
            k = edge_key(x, t)
            if k in self.edge_index:
                out.append(k)
        return out

    def fan(self, x: int, y0: int):
        """Interior edges at x from target y0 sweeping toward x+1.

        The sweep starts with the chord (x, y0) and rotates at x away from
        the far side of y0, collecting interior edges; the polygon side
        (x, x+1) terminates it. Empty when (x, y0) is itself a side.
        """
        n = self.n_cilia
        span = (y0 - x) % n
        out = []
        for step in range(span, 0, -1):
            t = (x + step) % n
            k = edge_key(x, t)
            if k in self.edge_index:
                out.append(k)
            elif k in self.boundary_edges:
                break
        return out

    def fans(self, e0):
        """The four vertex fans of the quadrilateral around e0.

        Keys: 'e' and 'f' sweep from the outer vertices (apexes), 'g' and
        'h' from the inner vertices (endpoints of e0). Each fan starts with
        the quadrilateral side toward the ccw-next quad vertex and rotates
        away from the quadrilateral.
        """
        p, q, a, b = self.quad(e0)
        return {
            "e": self.fan(a, p),
            "f": self.fan(b, q),
            "g": self.fan(q, a),
            "h": self.fan(p, b),
        }


def pairing_from_triangulation(tri: Triangulation):
    """Antisymmetrized count of ccw adjacencies inside triangles.

    <e, f> gains 1 each time f immediately follows e counterclockwise in a
    triangle and loses 1 for the reverse; only interior edges contribute.
    """
    m = len(tri.interior_edges)
    mat = [[0] * m for _ in range(m)]
    idx = tri.edge_index
    for (a, b, c) in tri.triangles:
        cyc = [edge_key(a, b), edge_key(b, c), edge_key(c, a)]
        for t in range(3):
            e, f = cyc[t], cyc[(t + 1) % 3]
            ie, jf = idx.get(e), idx.get(f)
            if ie is None or jf is None:
                continue
            mat[ie][jf] += 1
            mat[jf][ie] -= 1
    return mat


@dataclass
class HatBasis:
    """Charge lattice presented on the interior edges of a triangulation."""

    tri: Triangulation
    lattice: ChargeLattice

    @classmethod
    def from_charges(cls, tri: Triangulation, charges) -> "HatBasis":
        charges = list(charges)
        if len(charges) != len(tri.interior_edges):
            raise ValueError("one charge per interior edge")
        labels = [f"e{a}_{b}" for (a, b) in tri.interior_edges]
        lat = ChargeLattice(pairing_from_triangulation(tri), charges, labels)
        return cls(tri, lat)

    def edge_vector(self, key) -> LatticeVector:
        return self.lattice.basis(self.tri.edge_index[edge_key(*key)])


class AmbiguousClassError(ValueError):
    pass


def class_from_periods(lattice: ChargeLattice, value: complex,
                       tol: float = 1e-6) -> LatticeVector:
    """Integer class whose central charge matches a measured period.

    Least squares on the stacked real and imaginary parts, rounded to
    integers; the rounded class must reproduce the value within
    tol*(1+|value|), and no +-1 neighbor may fit as well, else the match
    is declared ambiguous.
    """
    n = lattice.rank
    if n == 0:
        if abs(value) <= tol:
            return LatticeVector([])
        raise ValueError("nonzero period over an empty lattice")
    a = np.zeros((2, n))
    for j, z in enumerate(lattice.charges):
        a[0, j] = z.real
        a[1, j] = z.imag
    b = np.array([value.real, value.imag])
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    vec = LatticeVector([int(round(c)) for c in x])
    bound = tol * (1.0 + abs(value))
    if abs(lattice.charge(vec) - value) > bound:
        raise ValueError(
            f"no integer class matches the period within {bound:.3g}")
    for i in range(n):
        for s in (1, -1):
            nb = vec + s * lattice.basis(i)
            if abs(lattice.charge(nb) - value) <= bound:
                raise AmbiguousClassError(
                    "two neighboring classes both match the period")
    return vec


def classify_connection(sc, basis: HatBasis, tol: float = 1e-6):
    """Copy of a saddle connection with its lattice class filled in."""
    vec = class_from_periods(basis.lattice, sc.hat_charge, tol)
    return dataclasses.replace(sc, lattice_class=vec)


# ---------------------------------------------------------------------------
# extraction from trajectory networks


class ActivePhaseError(RuntimeError):
    """The phase carries a saddle connection, so no strip decomposition."""


class CapError(RuntimeError):
    """A separatrix was length-capped before escaping; raise the cap."""


def _segment_distance(p: complex, a: complex, b: complex) -> float:
    d = b - a
    den = d.real * d.real + d.imag * d.imag
    if den == 0.0:
        return abs(p - a)
    t = ((p.real - a.real) * d.real + (p.imag - a.imag) * d.imag) / den
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return abs(p - (a + t * d))


def _normalize_hat(z: complex) -> complex:
    """Representative of +-z in the upper half plane or negative reals."""
    if abs(z.imag) <= 1e-12 * abs(z):
        return complex(-abs(z.real), 0.0)
    return -z if z.imag < 0.0 else z


def triangulation_from_network(q, phase: float, cap: float = None):
    """Ideal triangulation of the ciliated disk at a saddle-free phase.

    Every separatrix must escape; each escapes into one of the deg+2
    boundary sectors at infinity, and the three sectors reached from one
    zero form its triangle. Strips between zeros become interior edges,
    charged with twice the period of the straight crossing, normalized
    into the upper half plane union the negative reals. Returns the
    triangulation together with its hat basis.
    """
    if cap is None:
        cap = 1.25 * escape_length(q) + 10.0 * q.zero_scale
    net = build_network(q, phase, cap)
    if net.failures:
        j, m, msg = net.failures[0]
        raise IntegrationError(f"separatrix ({j},{m}) failed: {msg}")
    if net.saddles:
        sc = net.saddles[0]
        raise ActivePhaseError(
            f"phase {phase:.12g} carries a saddle connection between zeros "
            f"{sc.start_zero} and {sc.end_zero}")
    n = q.degree + 2
    tri_of_zero = {}
    for j in range(len(q.zeros)):
        sectors = []
        for orient, seg in net.segments:
            if orient != "+" or seg.origin[0] != j:
                continue
            if seg.terminus.kind != "escaped":
                raise CapError(
                    f"separatrix {seg.origin} was capped at flat length "
                    f"{cap:.6g} before escaping")
            sectors.append(escape_sector(q, seg.points[-1], phase))
        if len(sectors) != 3 or len(set(sectors)) != 3:
            raise ValueError(
                f"zero {j} does not reach three distinct sectors: {sectors}")
        tri_of_zero[j] = tuple(sorted(sectors))
    tri = Triangulation(n, [tri_of_zero[j] for j in range(len(q.zeros))])

    owners = {}
    for j, (a, b, c) in tri_of_zero.items():
        for k in (edge_key(a, b), edge_key(b, c), edge_key(c, a)):
            owners.setdefault(k, []).append(j)
    charges = []
    clear = 3.0 * q.hit_radius
    for e in tri.interior_edges:
        j1, j2 = owners[e]
        z1, z2 = q.zeros[j1], q.zeros[j2]
        for jo, zo in enumerate(q.zeros):
            if jo not in (j1, j2) and _segment_distance(zo, z1, z2) <= clear:
                raise IntegrationError(
                    f"zero {jo} obstructs the strip chord between zeros "
                    f"{j1} and {j2}; no clear quadrature path")
        charges.append(_normalize_hat(2.0 * period(q, [z1, z2])))
    return tri, HatBasis.from_charges(tri, charges)


# ---------------------------------------------------------------------------
# BPS cycle content


@dataclass(frozen=True)
class BpsRay:
    """Ray content: (class, degeneracy, cycle class) triples at one phase."""

    phase: float
    content: tuple


def _need_class(sc):
    if sc.lattice_class is None:
        raise ValueError("saddle connection has no lattice class assigned")
    return sc.lattice_class


def bps_cycle(classification, connections, core=None) -> BpsRay:
    """BPS degeneracies and cycle classes for a classified active ray.

    classification is a RayClassification or one of the tags 'case1',
    'case4a', 'fixture3a', 'fixture3b', 'fixture4b'; connections carry
    their lattice classes. Ring-domain input may reference its boundary
    connections by index into `connections`.
    """
    kind = getattr(classification, "kind", None) or str(classification)
    kind = kind.lower()
    if core is None:
        core = getattr(classification, "core", None)
    conns = tuple(connections)

    def resolved(ring):
        out = []
        for b in ring.boundary_connections:
            out.append(conns[b] if isinstance(b, int) else b)
        return out

    if kind == "case1":
        if len(conns) != 1:
            raise ValueError("a single-connection ray needs one connection")
        g0 = _need_class(conns[0])
        return BpsRay(conns[0].phase, ((g0, 1, g0),))

    if kind == "case4a":
        if core is None:
            raise ValueError("ring-domain ray needs its core")
        bc = resolved(core)
        if len(bc) != 2:
            raise ValueError("ring domain needs two boundary connections")
        gt, gb = (_need_class(c) for c in bc)
        total = gt + gb
        if any(c % 2 for c in total):
            raise ValueError(
                "boundary classes do not sum to twice a lattice class")
        g0 = LatticeVector(c // 2 for c in total)
        ph = bc[0].phase if bc else cmath.phase(core.core_period) % math.pi
        return BpsRay(ph, ((g0, -2, -total),))

    if kind == "fixture3a":
        if len(conns) != 2:
            raise ValueError("fixture3a takes (core class, bottom class)")
        g0, gb = (_need_class(c) for c in conns)
        return BpsRay(conns[0].phase, ((g0, -1, -gb),))

    if kind == "fixture3b":
        if len(conns) != 2:
            raise ValueError("fixture3b takes (gamma0, gamma1)")
        g0, g1 = (_need_class(c) for c in conns)
        return BpsRay(conns[0].phase,
                      ((g0, 2, g0 + g1), (2 * g0, -1, -g0 - g1)))

    if kind == "fixture4b":
        if len(conns) != 3:
            raise ValueError("fixture4b takes (gamma0, gamma1, gamma2)")
        z0, z1, z2 = (c.hat_charge for c in conns)
        if abs(z1 - z0) > 1e-9 * (1.0 + abs(z0)) or \
                abs(z2 - 2.0 * z1) > 1e-9 * (1.0 + abs(z2)):
            raise ValueError(
                "toral end charges must satisfy Z(g2) = 2 Z(g1) = 2 Z(g0)")
        g0, g1, g2 = (_need_class(c) for c in conns)
        return BpsRay(conns[0].phase,
                      ((g0, 2, g0 + g1), (2 * g0, -2, -g0 - g1 - g2)))

    raise ValueError(
        f"ray class {kind!r} is not rank-one certified; refusing BPS content")


# ---------------------------------------------------------------------------
# structured text interchange


def export_triangulation(tri: Triangulation) -> str:
    """Triangle and fan lists as plain text, one declaration per line."""
    lines = ["triangulation", f"cilia {tri.n_cilia}"]
    for (a, b, c) in tri.triangles:
        lines.append(f"triangle {a} {b} {c}")
    for (p, q) in tri.interior_edges:
        fans = tri.fans((p, q))
        parts = [f"fan {p}-{q}"]
        for name in ("e", "f", "g", "h"):
            seq = ",".join(f"{u}-{v}" for (u, v) in fans[name]) or "."
            parts.extend([name, seq])
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def import_triangulation(text: str) -> Triangulation:
    """Inverse of export_triangulation; declared fans are verified."""
    n = None
    tris = []
    fan_lines = []
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0] != "triangulation":
        raise ValueError("missing 'triangulation' header")
    for ln in rows[1:]:
        tok = ln.split()
        if tok[0] == "cilia" and len(tok) == 2:
            n = int(tok[1])
        elif tok[0] == "triangle" and len(tok) == 4:
            tris.append(tuple(int(v) for v in tok[1:]))
        elif tok[0] == "fan":
            fan_lines.append(tok[1:])
        else:
            raise ValueError(f"unrecognized line: {ln!r}")
    if n is None:
        raise ValueError("missing cilia count")
    tri = Triangulation(n, tris)

    def parse_edge(s):
        u, v = s.split("-")
        return edge_key(int(u), int(v))

    seen = set()
    for tok in fan_lines:
        if len(tok) != 9 or tok[1::2] != ["e", "f", "g", "h"]:
            raise ValueError(f"malformed fan line: {' '.join(tok)!r}")
        e0 = parse_edge(tok[0])
        if e0 not in tri.edge_index:
            raise ValueError(f"fan for non-interior edge {tok[0]}")
        seen.add(e0)
        fans = tri.fans(e0)
        for name, spec in zip(("e", "f", "g", "h"), tok[2::2]):
            declared = [] if spec == "." else [parse_edge(s)
                                               for s in spec.split(",")]
            if declared != fans[name]:
                raise ValueError(
                    f"fan {name} of edge {tok[0]} does not match the "
                    f"triangulation")
    if seen != set(tri.interior_edges):
        raise ValueError("fan lines do not cover the interior edges")
    return tri
