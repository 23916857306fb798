"""Exact twisted group-algebra arithmetic over a charge lattice.

Objects here are finite integer combinations of lattice classes [v] with
multiplication twisted by a sign (-1)^<v,w> and truncated by the flat
length |Z(v)| of the central charge. Coefficients stay exact
(fractions.Fraction); floats enter only through central charges, which set
truncation heights and ray phases, never coefficients.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Optional

TWO_PI = 2.0 * math.pi

# slack subtracted from the truncation height; keeps boundary terms from
# flapping when |Z| sits within float error of the cut
HEIGHT_SLACK = 1e-9

PHASE_TOL = 1e-9


def angle_diff(a: float, b: float) -> float:
    """Signed difference a - b folded into (-pi, pi]."""
    d = (a - b) % TWO_PI
    if d > math.pi:
        d -= TWO_PI
    return d


class LatticeVector(tuple):
    """Integer class in a fixed basis. Immutable and hashable.

    Arithmetic is componentwise; * is scalar multiplication (the tuple
    repeat semantics are deliberately replaced).
    """

    __slots__ = ()

    def __new__(cls, coeffs: Iterable[int]):
        return super().__new__(cls, (int(c) for c in coeffs))

    def __add__(self, other):
        if len(self) != len(other):
            raise ValueError("rank mismatch in vector sum")
        return LatticeVector(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        if len(self) != len(other):
            raise ValueError("rank mismatch in vector difference")
        return LatticeVector(a - b for a, b in zip(self, other))

    def __neg__(self):
        return LatticeVector(-a for a in self)

    def __mul__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        return LatticeVector(k * a for a in self)

    __rmul__ = __mul__

    def pad(self, extra: int) -> "LatticeVector":
        """Embed into a lattice extended by `extra` trailing directions."""
        return LatticeVector([*self, *([0] * extra)])

    def is_zero(self) -> bool:
        return not any(self)


class ChargeLattice:
    """Charge lattice with integer antisymmetric pairing and central charges.

    pairing[i][j] = <e_i, e_j>, charges[i] = Z(e_i). Central charges are
    the only numerical data; everything downstream of them (heights,
    phases, truncation) is float, while series coefficients stay rational.
    """

    def __init__(self, pairing, charges, labels=None):
        self.pairing = tuple(tuple(int(x) for x in row) for row in pairing)
        self.charges = tuple(complex(z) for z in charges)
        n = len(self.charges)
        if len(self.pairing) != n or any(len(r) != n for r in self.pairing):
            raise ValueError("pairing shape does not match the rank")
        for i in range(n):
            for j in range(n):
                if self.pairing[i][j] != -self.pairing[j][i]:
                    raise ValueError("pairing must be antisymmetric")
        if labels is None:
            labels = [f"g{i}" for i in range(n)]
        self.labels = tuple(str(s) for s in labels)
        if len(self.labels) != n:
            raise ValueError("label count does not match the rank")

    @property
    def rank(self) -> int:
        return len(self.charges)

    def compatible(self, other: "ChargeLattice") -> bool:
        return self.pairing == other.pairing and self.charges == other.charges

    def vector(self, coeffs) -> LatticeVector:
        v = coeffs if isinstance(coeffs, LatticeVector) else LatticeVector(coeffs)
        if len(v) != self.rank:
            raise ValueError("vector length does not match the rank")
        return v

    def zero(self) -> LatticeVector:
        return LatticeVector([0] * self.rank)

    def basis(self, i: int) -> LatticeVector:
        if not 0 <= i < self.rank:
            raise IndexError("basis index out of range")
        return LatticeVector([1 if j == i else 0 for j in range(self.rank)])

    def pair(self, v, w) -> int:
        p = self.pairing
        total = 0
        for i, vi in enumerate(v):
            if not vi:
                continue
            row = p[i]
            for j, wj in enumerate(w):
                if wj:
                    total += vi * row[j] * wj
        return total

    def charge(self, v) -> complex:
        z = 0j
        for vi, zi in zip(v, self.charges):
            if vi:
                z += vi * zi
        return z

    def height(self, v) -> float:
        return abs(self.charge(v))

    def phase(self, v) -> float:
        z = self.charge(v)
        if z == 0:
            raise ValueError("phase of a class with vanishing central charge")
        return cmath.phase(z)

    def normalized(self, v):
        """Ray representative: (w, s) with w = s*v, s in {1,-1}, and Z(w)
        in the open upper half plane or on the negative real axis."""
        v = self.vector(v)
        z = self.charge(v)
        r = abs(z)
        if r == 0:
            raise ValueError("cannot normalize a class with Z = 0")
        if abs(z.imag) < PHASE_TOL * r:
            s = 1 if z.real < 0 else -1
        else:
            s = 1 if z.imag > 0 else -1
        return (v if s == 1 else -v), s

    def extended(self, extra_charges, cross_pairing=None, extra_pairing=None,
                 extra_labels=None) -> "ChargeLattice":
        """Adjoin auxiliary directions (hole classes, marked-arc classes).

        cross_pairing[i][k] = <e_i, f_k> for old basis e and new f; defaults
        to zero, as do the pairings among the new directions. Old vectors
        embed via LatticeVector.pad(len(extra_charges)).
        """
        n, k = self.rank, len(tuple(extra_charges))
        extra_charges = tuple(complex(z) for z in extra_charges)
        if cross_pairing is None:
            cross_pairing = [[0] * k for _ in range(n)]
        if extra_pairing is None:
            extra_pairing = [[0] * k for _ in range(k)]
        pairing = []
        for i in range(n):
            pairing.append(list(self.pairing[i]) + [int(x) for x in cross_pairing[i]])
        for a in range(k):
            row = [-int(cross_pairing[i][a]) for i in range(n)]
            row += [int(x) for x in extra_pairing[a]]
            pairing.append(row)
        if extra_labels is None:
            extra_labels = [f"x{a}" for a in range(k)]
        return ChargeLattice(pairing, self.charges + extra_charges,
                             list(self.labels) + list(extra_labels))

    def __repr__(self):
        zs = ", ".join(format(z, ".6g") for z in self.charges)
        return f"ChargeLattice(rank={self.rank}, Z=[{zs}])"


class TwistedSeries:
    """Finite sum  sum_v c_v [v]  with exact rational coefficients."""

    __slots__ = ("lattice", "terms")

    def __init__(self, lattice: ChargeLattice, terms=None):
        self.lattice = lattice
        self.terms: dict = {}
        if terms:
            items = terms.items() if isinstance(terms, dict) else terms
            for v, c in items:
                self._bump(lattice.vector(v), Fraction(c))

    def _bump(self, v: LatticeVector, c: Fraction) -> None:
        if not c:
            return
        cur = self.terms.get(v)
        if cur is None:
            self.terms[v] = c
        else:
            cur += c
            if cur:
                self.terms[v] = cur
            else:
                del self.terms[v]

    @classmethod
    def unit(cls, lattice: ChargeLattice) -> "TwistedSeries":
        return cls(lattice, {lattice.zero(): Fraction(1)})

    @classmethod
    def monomial(cls, lattice: ChargeLattice, v, coeff=1) -> "TwistedSeries":
        return cls(lattice, {lattice.vector(v): Fraction(coeff)})

    def copy(self) -> "TwistedSeries":
        s = TwistedSeries(self.lattice)
        s.terms = dict(self.terms)
        return s

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, v) -> Fraction:
        return self.terms.get(self.lattice.vector(v), Fraction(0))

    def height(self) -> float:
        """Least |Z| over the support; +inf for the zero series."""
        if not self.terms:
            return math.inf
        return min(self.lattice.height(v) for v in self.terms)

    def max_height(self) -> float:
        if not self.terms:
            return 0.0
        return max(self.lattice.height(v) for v in self.terms)

    def truncate(self, L: float) -> "TwistedSeries":
        cut = L - HEIGHT_SLACK
        out = TwistedSeries(self.lattice)
        h = self.lattice.height
        out.terms = {v: c for v, c in self.terms.items() if h(v) < cut}
        return out

    def __eq__(self, other):
        if not isinstance(other, TwistedSeries):
            return NotImplemented
        return self.terms == other.terms

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other):
        out = self.copy()
        for v, c in other.terms.items():
            out._bump(v, c)
        return out

    def __sub__(self, other):
        out = self.copy()
        for v, c in other.terms.items():
            out._bump(v, -c)
        return out

    def __neg__(self):
        out = TwistedSeries(self.lattice)
        out.terms = {v: -c for v, c in self.terms.items()}
        return out

    def __mul__(self, other):
        if isinstance(other, TwistedSeries):
            return twisted_multiply(self, other)
        if isinstance(other, (int, Fraction)):
            if not other:
                return TwistedSeries(self.lattice)
            q = Fraction(other)
            out = TwistedSeries(self.lattice)
            out.terms = {v: c * q for v, c in self.terms.items()}
            return out
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.__mul__(other)
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            if len(self.terms) != 1:
                raise ValueError("negative powers only for single classes")
            (v, c), = self.terms.items()
            if c not in (1, -1):
                raise ValueError("negative powers need coefficient +-1")
            # [v]^-1 = [-v]; signs (-1)^<v,v> vanish, so this is exact
            base = TwistedSeries.monomial(self.lattice, -v, c)
            return base ** (-k)
        out = TwistedSeries.unit(self.lattice)
        sq = self
        while k:
            if k & 1:
                out = out * sq
            k >>= 1
            if k:
                sq = sq * sq
        return out

    def __repr__(self):
        if not self.terms:
            return "0"
        h = self.lattice.height
        bits = []
        for v, c in sorted(self.terms.items(), key=lambda t: (h(t[0]), tuple(t[0]))):
            bits.append(f"{c}*{tuple(v)}")
        return " + ".join(bits)


def twisted_multiply(a: TwistedSeries, b: TwistedSeries) -> TwistedSeries:
    """Product with the sign twist (-1)^<v,w> on each pair of classes.

    The twist is symmetric mod 2, so the product is commutative."""
    if not a.lattice.compatible(b.lattice):
        raise ValueError("series live over different lattices")
    out = TwistedSeries(a.lattice)
    pair = a.lattice.pair
    for v, cv in a.terms.items():
        for w, cw in b.terms.items():
            s = -1 if (pair(v, w) & 1) else 1
            out._bump(v + w, cv * cw if s == 1 else -(cv * cw))
    return out


def truncate_height(series: TwistedSeries, L: float) -> TwistedSeries:
    """Drop every class of height |Z| >= L (with a fixed boundary slack)."""
    return series.truncate(L)


def _one_minus_pow(m: int, jmax: int):
    """Coefficients of (1 - x)^m through x^jmax, exact integers."""
    if m >= 0:
        top = min(m, jmax)
        return [(-1) ** j * comb(m, j) for j in range(top + 1)]
    n = -m
    return [comb(n + j - 1, j) for j in range(jmax + 1)]


def k_apply(gamma, omega: int, series: TwistedSeries, L: float) -> TwistedSeries:
    """Wall automorphism for (gamma, omega) applied to a series, truncated.

    Each class [a] maps to (1 - [gamma])^(omega*<gamma,a>) [a]. The
    prefactor is expanded through ceil(L/|Z(gamma)|)+1 powers, enough that
    every surviving term of height < L is exact.
    """
    lat = series.lattice
    gamma = lat.vector(gamma)
    hz = lat.height(gamma)
    if hz <= 0:
        raise ValueError("wall automorphism needs a charge with Z != 0")
    if omega == 0 or not series.terms:
        return series.truncate(L)
    jmax = int(math.ceil(L / hz)) + 1
    out = TwistedSeries(lat)
    cache: dict = {}
    for alpha, c in series.terms.items():
        n = lat.pair(gamma, alpha)
        m = omega * n
        if m == 0:
            out._bump(alpha, c)
            continue
        coeffs = cache.get(m)
        if coeffs is None:
            coeffs = _one_minus_pow(m, jmax)
            cache[m] = coeffs
        v = alpha
        for j, b in enumerate(coeffs):
            if j:
                v = v + gamma
            if not b:
                continue
            sign = -1 if (j * n) & 1 else 1
            out._bump(v, c * b if sign == 1 else -(c * b))
    return out.truncate(L)


def _derive(gen: TwistedSeries, s: TwistedSeries) -> TwistedSeries:
    # derivation [v] -> <v, b> [v][b] extended from the generator's terms
    lat = s.lattice
    out = TwistedSeries(lat)
    pair = lat.pair
    for v, cv in gen.terms.items():
        for b, cb in s.terms.items():
            n = pair(v, b)
            if not n:
                continue
            sign = -1 if n & 1 else 1
            out._bump(v + b, n * cv * cb if sign == 1 else -(n * cv * cb))
    return out


def dt_exp_check(contents, target: TwistedSeries, L: float) -> bool:
    """Verify exp(generator) = product of wall automorphisms on one ray.

    contents is a list of (charge, omega) sharing a single phase. The
    generator is -sum omega(g) sum_{n>=1} [n g]/n^2; its exponential is
    taken termwise as a derivation. Both sides are exact in the truncated
    algebra; the return value is their equality.
    """
    lat = target.lattice
    contents = [(lat.vector(g), int(w)) for g, w in contents]
    if not target.terms:
        return True
    if not contents:
        return True
    ph0 = lat.phase(contents[0][0])
    for g, _ in contents[1:]:
        if abs(angle_diff(lat.phase(g), ph0)) > 1e-7:
            raise ValueError("generator charges must share one phase")

    rhs = target
    for g, w in contents:
        rhs = k_apply(g, w, rhs, L)

    maxz = target.max_height()
    lwork = L + 2.0 * maxz + 1.0
    gen = TwistedSeries(lat)
    for g, w in contents:
        hz = lat.height(g)
        nmax = int(math.ceil(lwork / hz)) + 1
        v = lat.zero()
        for n in range(1, nmax + 1):
            v = v + g
            gen._bump(v, Fraction(-w, n * n))
    gen = gen.truncate(lwork)

    acc = target.copy()
    cur = target
    kfac = 1
    k = 0
    while cur.terms:
        k += 1
        if k > 4096:
            raise RuntimeError("exponential failed to terminate")
        kfac *= k
        cur = _derive(gen, cur).truncate(lwork)
        acc = acc + cur * Fraction(1, kfac)
    return acc.truncate(L) == rhs


@dataclass(frozen=True)
class BpsRay:
    """Charges sharing one central-charge phase, with their invariants.

    contents is a tuple of (charge, omega) pairs, applied in order when the
    ray acts on a series.
    """

    phase: float
    contents: tuple

    @classmethod
    def make(cls, lattice: ChargeLattice, contents) -> "BpsRay":
        items = tuple((lattice.vector(g), int(w)) for g, w in contents)
        if not items:
            raise ValueError("a ray needs at least one charge")
        ph = lattice.phase(items[0][0])
        for g, _ in items[1:]:
            if abs(angle_diff(lattice.phase(g), ph)) > 1e-7:
                raise ValueError("ray charges disagree in phase")
        return cls(ph, items)

    def min_height(self, lattice: ChargeLattice) -> float:
        return min(lattice.height(g) for g, _ in self.contents)


@dataclass(frozen=True)
class Sector:
    """Half-open phase interval [lo, lo + width) on the circle."""

    lo: float
    width: float

    def __post_init__(self):
        if not 0.0 < self.width <= TWO_PI + PHASE_TOL:
            raise ValueError("sector width must lie in (0, 2*pi]")

    @classmethod
    def from_endpoints(cls, lo: float, hi: float) -> "Sector":
        w = (hi - lo) % TWO_PI
        if w == 0.0:
            w = TWO_PI
        return cls(lo, w)

    @property
    def hi(self) -> float:
        return self.lo + self.width

    def contains(self, phi: float, tol: float = 0.0) -> bool:
        d = (phi - self.lo) % TWO_PI
        if d >= TWO_PI - tol:
            d = 0.0
        return d < self.width + tol

    def position(self, phi: float) -> float:
        """Offset of phi from the lower edge, folded into [0, 2*pi)."""
        return (phi - self.lo) % TWO_PI


@dataclass
class AutomorphismWord:
    """Ordered product of BPS rays, optionally confined to a phase sector.

    Ray phases must be weakly monotone in one sense or the other (the sweep
    direction is a property of the word, not of the algebra), and no ray
    may be the opposite of another: a sector and its antipode must stay
    disjoint for height truncation to respect the product.
    """

    rays: tuple
    sector: Optional[Sector] = None

    def __post_init__(self):
        self.rays = tuple(self.rays)

    def validate(self, lattice: Optional[ChargeLattice] = None) -> None:
        phases = [r.phase for r in self.rays]
        if self.sector is not None:
            if self.sector.width > math.pi + PHASE_TOL:
                raise ValueError("sector wider than a half turn meets its antipode")
            for p in phases:
                if not self.sector.contains(p, tol=1e-7):
                    raise ValueError("ray phase outside the word's sector")
        for i in range(len(phases)):
            for j in range(i + 1, len(phases)):
                if abs(angle_diff(phases[i], phases[j] + math.pi)) < 1e-7:
                    raise ValueError("word contains a ray and its opposite")
        if len(phases) >= 2:
            if self.sector is not None:
                pos = [self.sector.position(p) for p in phases]
                steps = [pos[i + 1] - pos[i] for i in range(len(pos) - 1)]
            else:
                steps = [angle_diff(phases[i + 1], phases[i])
                         for i in range(len(phases) - 1)]
            tol = 1e-9
            if not (all(s >= -tol for s in steps) or all(s <= tol for s in steps)):
                raise ValueError("ray phases are not weakly monotone")

    def reversed(self) -> "AutomorphismWord":
        return AutomorphismWord(tuple(self.rays[::-1]), self.sector)


def s_delta_apply(word: AutomorphismWord, target: TwistedSeries,
                  L: float) -> TwistedSeries:
    """Apply a phase-ordered product of wall automorphisms, truncated at L.

    Rays act in list order. A ray whose lightest charge cannot bring any
    current class back under the cut (min |Z(ray)| >= L + max |Z(support)|)
    is skipped; by the triangle inequality it acts as the identity there.
    """
    word.validate(target.lattice)
    lat = target.lattice
    cur = target.truncate(L)
    for ray in word.rays:
        if not cur.terms:
            break
        ray_min = ray.min_height(lat)
        cur_max = max(lat.height(v) for v in cur.terms)
        if ray_min >= L + cur_max:
            continue
        for g, w in ray.contents:
            cur = k_apply(g, w, cur, L)
    return cur


def word_equal(w1: AutomorphismWord, w2: AutomorphismWord,
               lattice: ChargeLattice, L: float) -> bool:
    """Exact equality of two words as automorphisms of the truncated algebra.

    Tested on every generator class [e_i] and [-e_i]; since both words act
    by algebra maps and the generators' classes span, agreement on these
    forces agreement everywhere below the cut.
    """
    for i in range(lattice.rank):
        e = lattice.basis(i)
        for v in (e, -e):
            m = TwistedSeries.monomial(lattice, v)
            if s_delta_apply(w1, m, L) != s_delta_apply(w2, m, L):
                return False
    return True
