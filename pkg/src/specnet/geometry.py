"""Flat-geometry kernel for polynomial quadratic differentials on the sphere.

A differential q = P(z) dz^2 with P a polynomial with simple roots defines
a flat metric |P| |dz|^2 whose cone points are the roots and whose single
infinite end sits at z = infinity (pole of order deg P + 4).  This module
integrates straight lines of that metric in a fixed direction theta, grows
the truncated critical graph (the spectral network W_theta), locates saddle
connections by angular bisection over a sector, evaluates periods of
sqrt(P) dz with continuous branch tracking, and classifies rank-one rays.

Everything is double precision.  Functions are pure over immutable inputs,
so parallel use over phases is safe; the scan merges results in phase
order.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

# Hit disks around zeros, in units of the minimal root separation. Event
# detection must stay decoupled from the integrator step, so the disk is
# fixed by the configuration alone.
HIT_RADIUS_FACTOR = 1e-4
# Launch offset for separatrices, in hit-disk radii.
LAUNCH_FACTOR = 3.0
ESCAPE_FACTOR = 10.0
DEFAULT_TOL = 1e-10
DEFAULT_PHASE_TOL = 1e-12
SCAN_SAMPLES = 720
# Integration tolerance used for the discrete scan probes; final charges
# are always re-measured by quadrature at full accuracy.
SCAN_PROBE_TOL = 1e-5
# Scan probes launch at this multiple of the hit radius (final integrations
# use LAUNCH_FACTOR); fates are insensitive to the larger model stub.
PROBE_LAUNCH_FACTOR = 30.0
# Step length may not exceed this fraction of the distance to the nearest
# zero (measured in |dz|), which keeps branch tracking single valued.
STEP_DISK_FRACTION = 0.4
# Absolute per-step error floor, as a fraction of tol * zero_scale.  The
# arclength parameterization is singular at cone points (dz/ds ~ s^(-1/3)),
# so a pure error-per-unit-step test stalls there; the floor binds only
# inside zero neighborhoods and adds at most ~tol/50 per step taken there.
ATOL_FRACTION = 0.02

_GL_NODES, _GL_WEIGHTS = leggauss(20)

CASE1 = "case1"
CASE4A = "case4a"
UNKNOWN = "unknown"


class IntegrationError(RuntimeError):
    """Trajectory or quadrature failure with a diagnostic position."""


class BranchError(RuntimeError):
    """A period path runs too close to a zero away from its endpoints."""


def _polyval(coeffs, z):
    acc = 0j
    for c in coeffs:
        acc = acc * z + c
    return acc


def _sqrt_near(value, ref):
    s = cmath.sqrt(value)
    if ref is None:
        return s
    return s if abs(s - ref) <= abs(s + ref) else -s


def _wrap_pi(x: float) -> float:
    """Reduce an angle difference into (-pi, pi]."""
    y = math.fmod(x + math.pi, 2.0 * math.pi)
    if y <= 0.0:
        y += 2.0 * math.pi
    return y - math.pi


@dataclass(frozen=True)
class Terminus:
    kind: str  # 'hit_zero' | 'escaped' | 'length_capped'
    zero: int | None = None

    def __post_init__(self):
        if self.kind not in ("hit_zero", "escaped", "length_capped"):
            raise ValueError(f"unknown terminus kind {self.kind!r}")
        if (self.kind == "hit_zero") != (self.zero is not None):
            raise ValueError("zero index iff kind is hit_zero")

    @classmethod
    def hit(cls, zero: int) -> "Terminus":
        return cls("hit_zero", int(zero))

    @classmethod
    def escaped(cls) -> "Terminus":
        return cls("escaped")

    @classmethod
    def capped(cls) -> "Terminus":
        return cls("length_capped")


@dataclass(frozen=True)
class QuadraticDifferential:
    """q = P(z) dz^2 with simple roots; pole of order deg+4 at infinity."""

    coeffs: tuple  # P, highest degree first
    zeros: tuple
    pole_order_at_infinity: int

    def __post_init__(self):
        if self.pole_order_at_infinity != self.degree + 4:
            raise ValueError("pole order must equal deg P + 4")
        if self.pole_order_at_infinity < 3:
            raise ValueError("pole order below the infinite-area range")
        object.__setattr__(self, "_dcoeffs", tuple(
            c * (self.degree - i) for i, c in enumerate(self.coeffs[:-1])))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return self.coeffs[0]

    @property
    def zero_scale(self) -> float:
        """Length scale for hit disks: minimal root separation."""
        zs = self.zeros
        if len(zs) >= 2:
            return min(abs(a - b) for i, a in enumerate(zs)
                       for b in zs[i + 1:])
        if len(zs) == 1:
            return 1.0 + abs(zs[0])
        return 1.0

    @property
    def hit_radius(self) -> float:
        return HIT_RADIUS_FACTOR * self.zero_scale

    @property
    def escape_radius(self) -> float:
        m = max((abs(z) for z in self.zeros), default=0.0)
        return ESCAPE_FACTOR * (1.0 + m)

    def p(self, z: complex) -> complex:
        return _polyval(self.coeffs, z)

    def dp(self, z: complex) -> complex:
        return _polyval(self._dcoeffs, z)

    @classmethod
    def from_coefficients(cls, coeffs, degeneracy_tol: float = 1e-8):
        cs = [complex(c) for c in coeffs]
        while cs and cs[0] == 0:
            cs.pop(0)
        if not cs:
            raise ValueError("zero polynomial does not define a metric")
        deg = len(cs) - 1
        if deg == 0:
            zeros = ()
        else:
            roots = sorted(np.roots(cs), key=lambda z: (z.real, z.imag))
            zeros = tuple(complex(r) for r in roots)
            scale = 1.0 + max(abs(r) for r in zeros)
            for i, a in enumerate(zeros):
                for b in zeros[i + 1:]:
                    if abs(a - b) <= degeneracy_tol * scale:
                        raise ValueError(
                            f"roots {a:.6g} and {b:.6g} are not simple at "
                            f"tolerance {degeneracy_tol:g}")
        return cls(tuple(cs), zeros, deg + 4)

    def separatrix_directions(self, zero: int, phase: float):
        """The three ray angles of the phase-theta foliation at a root."""
        c = self.dp(self.zeros[zero])
        base = (2.0 * phase - cmath.phase(c)) / 3.0
        return tuple(base + 2.0 * math.pi * m / 3.0 for m in range(3))


@dataclass(frozen=True)
class TrajectorySegment:
    """Sampled straight line of the flat metric in direction phase.

    points[0] is the emitting zero for separatrix starts; a terminal hit
    appends the zero itself, with the short stubs inside the launch/hit
    disks measured on the local one-zero model (2/3)|c|^(1/2) r^(3/2).
    """

    points: tuple
    arclengths: tuple
    arclength: float
    origin: tuple | None  # (zero index, ray index 0..2) or None
    phase: float
    terminus: Terminus
    end_branch: complex | None = None

    def __post_init__(self):
        if len(self.points) != len(self.arclengths):
            raise ValueError("points and arclengths must align")
        ss = self.arclengths
        if any(b < a - 1e-12 for a, b in zip(ss, ss[1:])):
            raise ValueError("arclength must be monotone along the polyline")


@dataclass(frozen=True)
class SaddleConnection:
    """Flat geodesic between zeros; charge is the single-sheet period."""

    start_zero: int
    end_zero: int
    phase: float
    charge: complex
    hat_charge: complex = None
    lattice_class: object = None

    def __post_init__(self):
        if self.hat_charge is None:
            object.__setattr__(self, "hat_charge", 2.0 * self.charge)
        if abs(self.charge) == 0.0:
            raise ValueError("saddle connection needs |Z| > 0")
        mismatch = abs(_wrap_pi(cmath.phase(self.hat_charge) - self.phase))
        mismatch = min(mismatch, abs(mismatch - math.pi))
        if mismatch > 1e-6:
            raise ValueError(
                f"hat charge argument {cmath.phase(self.hat_charge):.9f} is "
                f"not the stated phase {self.phase:.9f} mod pi")


@dataclass(frozen=True)
class RingDomain:
    core_period: complex
    boundary_connections: tuple
    degenerate: bool = False


@dataclass(frozen=True)
class RayClassification:
    kind: str  # CASE1 | CASE4A | UNKNOWN
    core: RingDomain | None = None


@dataclass(frozen=True)
class Sector:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("sector needs hi > lo")
        if self.hi - self.lo > math.pi / 2.0 + 1e-12:
            raise ValueError("sector must be acute (width at most pi/2)")


@dataclass(frozen=True)
class ActiveRay:
    phase: float
    connections: tuple
    flagged: bool = False
    interval: tuple | None = None


@dataclass
class SpectralNetwork:
    """Truncated critical graph; segments are ('+'|'-', TrajectorySegment).

    Both orientation classes share the same underlying leaves: a leaf of
    the phase-theta foliation carries the e^{i theta} flow for one branch
    of sqrt(q) and the opposite flow for the other, so the '-' entry of a
    ray reuses the '+' polyline with phase shifted by pi.  Saddles are the
    zero-hitting leaves, deduplicated so each unoriented connection is
    flagged once.
    """

    phase: float
    cap: float
    segments: tuple
    saddles: tuple
    failures: tuple = ()
    incidences: list = field(default_factory=list)

    def register_path(self, path):
        """Record crossings of a user polyline with every network segment."""
        pts = tuple(complex(p) for p in path)
        hits = []
        for si, (orient, seg) in enumerate(self.segments):
            for t_path, t_seg, zc, side in _polyline_crossings(pts, seg.points):
                hits.append({
                    "segment": si,
                    "orientation": orient,
                    "point": zc,
                    "path_param": t_path,
                    "segment_param": t_seg,
                    "side": side,
                })
        hits.sort(key=lambda r: r["path_param"])
        record = {"path": pts, "crossings": tuple(hits)}
        self.incidences.append(record)
        return record


def _cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


def _polyline_crossings(pa, pb):
    """Transverse intersections of two polylines.

    Yields (t_a, t_b, point, side) with fractional segment parameters and
    side = sign of cross(dir_a, dir_b).  Touching endpoints are skipped:
    only proper crossings count.
    """
    out = []
    for i in range(len(pa) - 1):
        a0, a1 = pa[i], pa[i + 1]
        da = a1 - a0
        for j in range(len(pb) - 1):
            b0, b1 = pb[j], pb[j + 1]
            db = b1 - b0
            den = _cross(da, db)
            if den == 0.0:
                continue
            t = _cross(b0 - a0, db) / den
            u = _cross(b0 - a0, da) / den
            if not (0.0 < t < 1.0 and 0.0 < u < 1.0):
                continue
            zc = a0 + t * da
            out.append((i + t, j + u, zc, 1 if den > 0 else -1))
    return out


def _launch(q: QuadraticDifferential, zero: int, ray: int, phase: float,
            radius: float = None):
    """Start state just outside the hit disk of a zero, pointing outward."""
    if not 0 <= ray <= 2:
        raise ValueError("ray index must be 0, 1 or 2")
    zj = q.zeros[zero]
    c = q.dp(zj)
    phi = q.separatrix_directions(zero, phase)[ray]
    r = LAUNCH_FACTOR * q.hit_radius if radius is None else radius
    z0 = zj + r * cmath.exp(1j * phi)
    # branch with e^{i theta}/sqrt(q) pointing outward along the ray
    target = cmath.exp(1j * (phase - phi))
    w0 = _sqrt_near(q.p(z0), target * abs(cmath.sqrt(q.p(z0))))
    stub = (2.0 / 3.0) * math.sqrt(abs(c)) * r ** 1.5
    return z0, w0, stub


def integrate_trajectory(q: QuadraticDifferential, start, phase: float,
                         cap: float, tol: float = DEFAULT_TOL,
                         branch_seed: complex = None,
                         launch_radius: float = None) -> TrajectorySegment:
    """Integrate dz/ds = e^{i theta}/sqrt(q) by flat arclength s.

    start is either a complex point or a (zero, ray) separatrix start.
    Embedded 2(3) pair, error per unit step at tol, step clamped to a
    fraction of the distance to the nearest zero so the branch of sqrt(q)
    is tracked by nearest-root continuation without ambiguity.
    """
    if cap <= 0.0:
        raise ValueError("cap must be positive")
    eith = cmath.exp(1j * phase)
    coeffs = q.coeffs
    zeros = q.zeros
    eps = q.hit_radius
    r_escape = q.escape_radius

    origin = None
    points = []
    lengths = []
    if isinstance(start, tuple) and not isinstance(start, complex):
        zero, ray = start
        origin = (int(zero), int(ray))
        z, w, stub = _launch(q, *origin, phase, radius=launch_radius)
        if stub >= cap:
            raise ValueError("cap does not clear the launch offset")
        s = stub
        points.append(zeros[origin[0]])
        lengths.append(0.0)
    else:
        z = complex(start)
        for j, zj in enumerate(zeros):
            if abs(z - zj) <= 2.0 * eps:
                raise ValueError(
                    f"start {z:.6g} sits inside the exclusion disk of zero "
                    f"{j}; use a (zero, ray) separatrix start instead")
        w = _sqrt_near(_polyval(coeffs, z), branch_seed)
        s = 0.0
    points.append(z)
    lengths.append(s)

    h_floor = 1e-13 * max(1.0, cap)
    atol = ATOL_FRACTION * tol * q.zero_scale
    h = min(1e-3 * (1.0 + abs(z)) * max(abs(w), 1e-30), cap - s)
    k1 = eith / w
    terminus = None
    guard = 0
    while True:
        guard += 1
        if guard > 200000:
            raise IntegrationError(f"step budget exhausted near z = {z:.8g}")
        if cap - s <= 1e-15 * (1.0 + cap):
            terminus = Terminus.capped()
            break
        if zeros:
            dist = min(abs(z - zj) for zj in zeros)
            h = min(h, STEP_DISK_FRACTION * dist * abs(w))
        h = min(h, cap - s)
        if h < h_floor:
            raise IntegrationError(
                f"step collapse at z = {z:.8g} (s = {s:.8g}) without a hit")
        w2 = _sqrt_near(_polyval(coeffs, z + 0.5 * h * k1), w)
        k2 = eith / w2
        w3 = _sqrt_near(_polyval(coeffs, z + 0.75 * h * k2), w)
        k3 = eith / w3
        z_new = z + h * (2.0 * k1 + 3.0 * k2 + 4.0 * k3) / 9.0
        w_new = _sqrt_near(_polyval(coeffs, z_new), w)
        k4 = eith / w_new
        err = abs(h * ((-5.0 / 72.0) * k1 + (1.0 / 12.0) * k2
                       + (1.0 / 9.0) * k3 - (1.0 / 8.0) * k4))
        budget = tol * h + atol
        if err > budget:
            h *= max(0.2, 0.9 * math.sqrt(budget / err))
            continue
        s_new = s + h
        fac = 5.0 if err == 0.0 else min(
            5.0, max(0.3, 0.9 * math.sqrt(budget / err)))

        hit = None
        for j, zj in enumerate(zeros):
            d = abs(z_new - zj)
            if d <= eps:
                hit = (j, d)
                break
        if hit is not None:
            j, d = hit
            stub = (2.0 / 3.0) * math.sqrt(abs(q.dp(zeros[j]))) * d ** 1.5
            if s_new + stub > cap:
                points.append(z_new)
                lengths.append(min(s_new, cap))
                terminus = Terminus.capped()
                w = w_new
                break
            points.append(z_new)
            lengths.append(s_new)
            points.append(zeros[j])
            lengths.append(s_new + stub)
            terminus = Terminus.hit(j)
            w = w_new
            break
        if abs(z_new) > r_escape:
            # refine the exit point on the chord
            dz = z_new - z
            aa = abs(dz) ** 2
            bb = 2.0 * (z.real * dz.real + z.imag * dz.imag)
            cc = abs(z) ** 2 - r_escape ** 2
            disc = max(bb * bb - 4.0 * aa * cc, 0.0)
            t = (-bb + math.sqrt(disc)) / (2.0 * aa) if aa > 0 else 1.0
            t = min(max(t, 0.0), 1.0)
            points.append(z + t * dz)
            lengths.append(s + t * h)
            terminus = Terminus.escaped()
            w = w_new
            break

        z, w, s, k1 = z_new, w_new, s_new, k4
        points.append(z)
        lengths.append(s)
        h *= fac

    return TrajectorySegment(
        points=tuple(points), arclengths=tuple(lengths),
        arclength=lengths[-1], origin=origin, phase=phase,
        terminus=terminus, end_branch=w)


# ---------------------------------------------------------------------------
# periods


def _branch_table(q, zmap, t0, t1, ref, desc, n=96):
    """Threaded sqrt(P) values on a uniform t-grid, for sign matching.

    Entries that land exactly on a zero store the running sign carrier
    instead of 0: a zero entry cannot orient _sqrt_near, and falling back
    to the principal branch there silently disagrees with the threaded
    table whenever the global sign is flipped.
    """
    ts = [t0 + (t1 - t0) * i / (n - 1) for i in range(n)]
    order = range(n - 1, -1, -1) if desc else range(n)
    vals = [None] * n
    run = ref
    for i in order:
        v = _sqrt_near(_polyval(q.coeffs, zmap(ts[i])), run)
        if abs(v) > 0.0:
            run = v
            vals[i] = v
        else:
            vals[i] = run if run is not None else v
    return ts, vals


def _matched_sqrt(q, z, t, ts, vals):
    # nearest table entry fixes the sign; the table is fine enough that
    # consecutive values never straddle a branch flip
    n = len(ts)
    i = min(n - 1, max(0, int(round((t - ts[0]) / (ts[-1] - ts[0]) * (n - 1)))))
    return _sqrt_near(_polyval(q.coeffs, z), vals[i])


def _piece_period(q, za, zb, kind, ref, rel_tol):
    """One polyline piece; kind 'plain', or 'left'/'right' zero endpoint.

    Zero endpoints use the substitution z = z0 + t^2 (other - z0), which
    makes sqrt(P) dz vanish linearly instead of as a half power.
    """
    if kind == "plain":
        zmap = lambda t: za + t * (zb - za)
        jmap = lambda t: zb - za
        desc = False
    elif kind == "left":
        zmap = lambda t: za + t * t * (zb - za)
        jmap = lambda t: 2.0 * t * (zb - za)
        desc = True
    elif kind == "right":
        zmap = lambda t: zb + (1.0 - t) * (1.0 - t) * (za - zb)
        jmap = lambda t: 2.0 * (1.0 - t) * (zb - za)
        desc = False
    else:
        raise AssertionError(kind)

    ts, vals = _branch_table(q, zmap, 0.0, 1.0, ref, desc)
    if kind == "plain":
        peak = max(abs(v) for v in vals)
        if min(abs(v) for v in vals) < 1e-10 * peak:
            raise BranchError(
                f"period path passes a zero near z = {zmap(0.5):.6g}")

    def gl(a, b):
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        acc = 0j
        for xi, wi in zip(_GL_NODES, _GL_WEIGHTS):
            t = mid + half * xi
            acc += wi * _matched_sqrt(q, zmap(t), t, ts, vals) * jmap(t)
        return acc * half

    first = gl(0.0, 1.0)
    budget = rel_tol * (1.0 + abs(first))

    def refine(a, b, whole, depth):
        m = 0.5 * (a + b)
        left, right = gl(a, m), gl(m, b)
        if abs(left + right - whole) <= budget * (b - a) or depth >= 14:
            if depth >= 14 and abs(left + right - whole) > 100 * budget:
                raise IntegrationError(
                    f"period quadrature stalled on piece {za:.6g} -> {zb:.6g}")
            return left + right
        return refine(a, m, left, depth + 1) + refine(m, b, right, depth + 1)

    val = refine(0.0, 1.0, first, 0)
    ref_out = vals[-1] if abs(vals[-1]) > 0.0 else ref
    return val, ref_out


def _decimate_path(points, zeros, factor=0.25):
    """Sparsify a polyline without changing its homotopy class rel zeros.

    Greedy chord extension: a vertex may be skipped when it deviates from
    the covering chord by at most `factor` times its own distance to the
    nearest zero.  Sliding each skipped vertex onto the chord then never
    brings the path within (1 - factor - step_fraction) of a zero, so the
    decimated polyline is homotopic to the original and any path integral
    of a function holomorphic away from the zeros is unchanged.
    """
    n = len(points)
    if n <= 3 or not zeros:
        return list(points)
    dmin = [min(abs(p - z) for z in zeros) for p in points]

    def ok(i, j):
        a = points[i]
        dab = points[j] - a
        den = dab.real * dab.real + dab.imag * dab.imag
        for k in range(i + 1, j):
            p = points[k]
            if den == 0.0:
                dev = abs(p - a)
            else:
                t = ((p.real - a.real) * dab.real
                     + (p.imag - a.imag) * dab.imag) / den
                t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
                dev = abs(p - (a + t * dab))
            if dev > factor * dmin[k]:
                return False
        return True

    out = [points[0]]
    i = 0
    while i < n - 1:
        j = i + 1
        step = 1
        while j < n - 1:
            probe = min(n - 1, i + 2 * step)
            if probe == j or not ok(i, probe):
                break
            j = probe
            step *= 2
        lo, hi = j, min(n - 1, i + 2 * step)
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if ok(i, mid):
                lo = mid
            else:
                hi = mid
        out.append(points[lo])
        i = lo
    return out


def period(q: QuadraticDifferential, path, branch_seed: complex = None,
           rel_tol: float = 1e-12, return_end_branch: bool = False):
    """Integral of sqrt(P) dz along a polyline with branch continuity.

    Endpoints within a few hit radii of a zero are snapped onto it and
    integrated with the local substitution; interior vertices must keep
    clear of all zeros.  branch_seed picks the sqrt sign at the start
    (principal value if omitted); the end branch can be returned to chain
    further pieces consistently.
    """
    pts = [complex(p) for p in path]
    if len(pts) < 2:
        raise ValueError("need at least two path points")
    eps = q.hit_radius

    def snap(zp):
        for zj in q.zeros:
            if abs(zp - zj) <= 3.0 * eps:
                return zj, True
        return zp, False

    pts[0], sing0 = snap(pts[0])
    pts[-1], sing1 = snap(pts[-1])
    for p in pts[1:-1]:
        for zj in q.zeros:
            if abs(p - zj) <= eps:
                raise BranchError(
                    f"interior path vertex {p:.6g} sits on zero {zj:.6g}")
    if len(pts) > 16:
        # dense integrator output: integrand is holomorphic off the zeros,
        # so a homotopic sparsification leaves the integral exact
        pts = _decimate_path(pts, q.zeros)

    pieces = []
    last = len(pts) - 2
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        if a == b:
            continue
        left = sing0 and i == 0
        right = sing1 and i == last
        if left and right:
            m = 0.5 * (a + b)
            pieces.append((a, m, "left"))
            pieces.append((m, b, "right"))
        elif left:
            pieces.append((a, b, "left"))
        elif right:
            pieces.append((a, b, "right"))
        else:
            pieces.append((a, b, "plain"))
    if not pieces:
        raise ValueError("degenerate path")

    total = 0j
    ref = branch_seed
    for za, zb, kind in pieces:
        val, ref = _piece_period(q, za, zb, kind, ref, rel_tol)
        total += val
    if return_end_branch:
        return total, ref
    return total


# ---------------------------------------------------------------------------
# networks


def _connection_from_hit(q, seg: TrajectorySegment, phase: float,
                         rel_tol: float = 1e-12) -> SaddleConnection:
    """Measure the period of a zero-hitting separatrix and polish its phase."""
    j = seg.origin[0]
    k = seg.terminus.zero
    zj, zk = q.zeros[j], q.zeros[k]
    clear = 5.0 * q.hit_radius
    mid = [p for p in seg.points[1:-1]
           if abs(p - zj) > clear and abs(p - zk) > clear]
    z_val = period(q, [zj] + mid + [zk], rel_tol=rel_tol)
    if (z_val * cmath.exp(-1j * phase)).real < 0.0:
        z_val = -z_val
    polished = phase + _wrap_pi(cmath.phase(z_val) - phase)
    return SaddleConnection(j, k, polished, z_val)


def build_network(q: QuadraticDifferential, phase: float,
                  cap: float) -> SpectralNetwork:
    """All separatrices at a phase, truncated at flat length cap.

    Each geometric ray appears once per orientation class; integration
    failures are collected per ray instead of aborting the build.
    """
    segments = []
    saddles = []
    failures = []
    for j in range(len(q.zeros)):
        for m in range(3):
            try:
                seg = integrate_trajectory(q, (j, m), phase, cap)
            except IntegrationError as exc:
                failures.append((j, m, str(exc)))
                continue
            minus = TrajectorySegment(
                points=seg.points, arclengths=seg.arclengths,
                arclength=seg.arclength, origin=seg.origin,
                phase=phase + math.pi, terminus=seg.terminus,
                end_branch=(-seg.end_branch if seg.end_branch is not None
                            else None))
            segments.append(("+", seg))
            segments.append(("-", minus))
            if seg.terminus.kind == "hit_zero":
                try:
                    saddles.append(_connection_from_hit(q, seg, phase))
                except (BranchError, IntegrationError) as exc:
                    failures.append((j, m, str(exc)))
    unique = {}
    for sc in saddles:
        pair = (min(sc.start_zero, sc.end_zero),
                max(sc.start_zero, sc.end_zero))
        key = (pair, round(abs(sc.charge) / (1e-9 * (1.0 + abs(sc.charge)))))
        unique.setdefault(key, sc)
    return SpectralNetwork(
        phase=phase, cap=cap, segments=tuple(segments),
        saddles=tuple(unique.values()), failures=tuple(failures))


def network_report(net: SpectralNetwork) -> dict:
    """Plain-data export of a network: polylines with orientation tags."""
    segs = []
    for orient, seg in net.segments:
        segs.append({
            "orientation": orient,
            "zero": None if seg.origin is None else seg.origin[0],
            "ray": None if seg.origin is None else seg.origin[1],
            "terminus": seg.terminus.kind,
            "hit": seg.terminus.zero,
            "arclength": seg.arclength,
            "points": [[p.real, p.imag] for p in seg.points],
        })
    sads = [{
        "start": sc.start_zero, "end": sc.end_zero, "phase": sc.phase,
        "charge": [sc.charge.real, sc.charge.imag],
        "hat_charge": [sc.hat_charge.real, sc.hat_charge.imag],
    } for sc in net.saddles]
    return {"phase": net.phase, "cap": net.cap,
            "segments": segs, "saddles": sads}


# ---------------------------------------------------------------------------
# angular scan


def escape_length(q: QuadraticDifferential) -> float:
    """Flat length needed to reach the escape radius from the core region."""
    d = q.degree
    r = q.escape_radius
    return (2.0 / (d + 2)) * math.sqrt(abs(q.leading)) * r ** ((d + 2) / 2.0)


def escape_sector(q: QuadraticDifferential, z_end: complex,
                  phase: float) -> int:
    """Asymptotic direction index at infinity (deg+2 sectors)."""
    n = q.degree + 2
    psi = cmath.phase(z_end)
    k = round((n * psi - 2.0 * phase + cmath.phase(q.leading))
              / (2.0 * math.pi))
    return int(k) % n


def _probe(q, j, m, theta, traj_cap):
    # Probes only need the discrete fate; launching farther out skips most
    # of the stiff cone neighborhood and the model error there (~radius^2
    # transverse) stays two orders below the hit disk.
    try:
        seg = integrate_trajectory(
            q, (j, m), theta, traj_cap, tol=SCAN_PROBE_TOL,
            launch_radius=PROBE_LAUNCH_FACTOR * q.hit_radius)
    except IntegrationError as exc:
        return ("err", str(exc)), None
    t = seg.terminus
    if t.kind == "hit_zero":
        return ("hit", t.zero), seg
    if t.kind == "escaped":
        return ("esc", escape_sector(q, seg.points[-1], theta)), seg
    return ("cap",), seg


def scan_active_rays(q: QuadraticDifferential, sector, cap: float,
                     tol_phase: float = DEFAULT_PHASE_TOL,
                     n_samples: int = SCAN_SAMPLES):
    """Active phases in an acute sector with their saddle connections.

    Sweeps the discrete fate (target zero, or escape sector at infinity)
    of every separatrix over a phase grid; each fate flip is bisected down
    to tol_phase.  A flip produced by a saddle is recognized by the probe
    entering a hit disk, after which the exact phase and charge are read
    off one period quadrature.  Only connections with |Z| <= cap are kept.
    An unresolved flip is returned flagged with its interval rather than
    dropped.
    """
    sec = sector if isinstance(sector, Sector) else Sector(*sector)
    if len(q.zeros) < 2:
        return []
    traj_cap = 1.25 * escape_length(q) + 2.0 * cap + 10.0 * q.zero_scale
    rays = [(j, m) for j in range(len(q.zeros)) for m in range(3)]
    n = max(8, int(n_samples))
    thetas = [sec.lo + (sec.hi - sec.lo) * i / n for i in range(n + 1)]

    sigs = []
    grid_hits = []  # (j, m, theta)
    for th in thetas:
        row = []
        for j, m in rays:
            code, _ = _probe(q, j, m, th, traj_cap)
            row.append(code)
            if code[0] == "hit":
                grid_hits.append((j, m, th))
        sigs.append(tuple(row))

    found = []    # (theta_star, SaddleConnection)
    flagged = []  # (mid, (lo, hi))

    def polish(j, m, theta):
        seg = integrate_trajectory(q, (j, m), theta, traj_cap)
        if seg.terminus.kind != "hit_zero":
            return False
        sc = _connection_from_hit(q, seg, theta)
        if abs(sc.charge) <= cap * (1.0 + 1e-9):
            found.append((sc.phase, sc))
        return True

    work = []
    step = (sec.hi - sec.lo) / n
    for j, m, th in grid_hits:
        if polish(j, m, th):
            continue
        # edge of the hit window; fall back to bisecting the neighbors
        ca, _ = _probe(q, j, m, th - step, traj_cap)
        cb, _ = _probe(q, j, m, th + step, traj_cap)
        if ca != cb and "hit" not in (ca[0], cb[0]):
            work.append((j, m, th - step, th + step, ca, cb, 0))

    # bisect every fate flip of every separatrix
    for i in range(n):
        lo_sig, hi_sig = sigs[i], sigs[i + 1]
        if lo_sig == hi_sig:
            continue
        for r, (j, m) in enumerate(rays):
            if lo_sig[r] != hi_sig[r]:
                work.append((j, m, thetas[i], thetas[i + 1],
                             lo_sig[r], hi_sig[r], 0))

    while work:
        j, m, lo, hi, clo, chi, depth = work.pop()
        if "hit" in (clo[0], chi[0]):
            continue  # already polished from the grid pass
        resolved = False
        for _ in range(200):
            if hi - lo < tol_phase:
                break
            mid = 0.5 * (lo + hi)
            code, seg = _probe(q, j, m, mid, traj_cap)
            if code[0] == "hit":
                polish(j, m, mid)
                # keep hunting for distinct rays outside the hit window
                sc_len = max(abs(seg.arclengths[-1]), 1e-9)
                win = max(4.0 * q.hit_radius / sc_len, 10.0 * tol_phase)
                for a, b in ((lo, mid - win), (mid + win, hi)):
                    if b > a:
                        ca, _ = _probe(q, j, m, a, traj_cap)
                        cb, _ = _probe(q, j, m, b, traj_cap)
                        if ca != cb and "hit" not in (ca[0], cb[0]):
                            work.append((j, m, a, b, ca, cb, depth))
                resolved = True
                break
            if code == clo:
                lo = mid
            elif code == chi:
                hi = mid
            else:
                hi, chi = mid, code
        if resolved:
            continue
        if hi - lo < tol_phase:
            if depth == 0:
                # doubled resolution retry on the collapsed interval
                pad = max(64.0 * tol_phase, (hi - lo) * 2.0)
                a, b = lo - pad, hi + pad
                ca, _ = _probe(q, j, m, a, traj_cap)
                cb, _ = _probe(q, j, m, b, traj_cap)
                if ca != cb and "hit" not in (ca[0], cb[0]):
                    work.append((j, m, a, b, ca, cb, 1))
                    continue
            flagged.append((0.5 * (lo + hi), (lo, hi)))

    found.sort(key=lambda t: t[0])
    out = []
    for theta_star, sc in found:
        if out and abs(out[-1].phase - theta_star) <= 1e-9:
            prev = out[-1]
            pair_keys = {(min(c.start_zero, c.end_zero),
                          max(c.start_zero, c.end_zero),
                          round(abs(c.charge) * 1e9))
                         for c in prev.connections}
            key = (min(sc.start_zero, sc.end_zero),
                   max(sc.start_zero, sc.end_zero),
                   round(abs(sc.charge) * 1e9))
            if key not in pair_keys:
                out[-1] = ActiveRay(prev.phase,
                                    prev.connections + (sc,))
        else:
            out.append(ActiveRay(theta_star, (sc,)))
    for mid, iv in flagged:
        if any(not r.flagged and abs(r.phase - mid) < 1e-6 for r in out):
            continue  # flicker at the edge of a resolved ray's hit window
        out.append(ActiveRay(mid, (), True, iv))
    out.sort(key=lambda r: r.phase)
    return out


# ---------------------------------------------------------------------------
# ray classification


def _first_return(q: QuadraticDifferential, base: complex, phase: float,
                  cap: float):
    """Period of a closed leaf through base, or None.

    Integrates the phase trajectory from base and watches for a same-
    direction return across the short transversal through base.
    """
    delta = 10.0 * q.hit_radius
    nhat = 1j * cmath.exp(1j * phase)
    try:
        seg = integrate_trajectory(q, base, phase, cap, tol=1e-9)
    except (ValueError, IntegrationError):
        return None
    pts = seg.points
    armed = False
    for i in range(len(pts) - 1):
        a, b = pts[i], pts[i + 1]
        if not armed:
            if abs(a - base) > 3.0 * delta:
                armed = True
            continue
        den = _cross(b - a, 6.0 * delta * nhat)
        if den == 0.0:
            continue
        t = _cross((base - 3.0 * delta * nhat) - a, 6.0 * delta * nhat) / den
        u = _cross((base - 3.0 * delta * nhat) - a, b - a) / den
        if not (0.0 <= t <= 1.0 and 0.0 <= u <= 1.0):
            continue
        zc = a + t * (b - a)
        if abs(zc - base) > delta:
            return None  # returned to the transversal but displaced: no ring
        loop = list(pts[:i + 1]) + [zc]
        loop[0] = zc  # close up: the loop starts and ends on the transversal
        try:
            return period(q, [base] + loop[1:-1] + [base])
        except (BranchError, IntegrationError):
            return None
    return None


def classify_ray(q, phase: float, connections, cap: float) -> RayClassification:
    """Rank-one ray classification: single saddle, cylinder, or unknown.

    Surfaces may implement closed_core(phase) -> (core_period, boundary
    indices, degenerate) to certify a cylinder directly; polynomial
    differentials fall back to a numeric first-return probe.  Anything not
    certified lands in UNKNOWN, which is a value, not an error.
    """
    conns = tuple(connections)
    probe = getattr(q, "closed_core", None)
    if callable(probe):
        res = probe(phase)
        if res is not None:
            core_period, boundary, degenerate = res
            ring = RingDomain(complex(core_period), tuple(boundary),
                              bool(degenerate))
            return RayClassification(CASE4A, ring)
    if len(conns) == 1 and conns[0].start_zero != conns[0].end_zero:
        return RayClassification(CASE1)
    if not conns:
        return RayClassification(UNKNOWN)

    z0 = conns[0].charge
    for sc in conns[1:]:
        r = sc.charge / z0
        if abs(r.imag) > 1e-9 * (1.0 + abs(r)):
            return RayClassification(UNKNOWN)
        from fractions import Fraction
        approx = Fraction(r.real).limit_denominator(1000)
        if abs(r.real - float(approx)) > 1e-9 * (1.0 + abs(r)):
            return RayClassification(UNKNOWN)

    if isinstance(q, QuadraticDifferential):
        nhat = 1j * cmath.exp(1j * phase)
        for sc in conns:
            if sc.start_zero == sc.end_zero:
                continue
            mid = 0.5 * (q.zeros[sc.start_zero] + q.zeros[sc.end_zero])
            for side in (1.0, -1.0):
                base = mid + side * 20.0 * q.hit_radius * nhat
                z_core = _first_return(q, base, phase, cap)
                if z_core is not None and abs(z_core) > 0.0:
                    ring = RingDomain(z_core, tuple(range(len(conns))), False)
                    return RayClassification(CASE4A, ring)
    return RayClassification(UNKNOWN)
