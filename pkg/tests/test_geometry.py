"""Flat-geometry kernel tests.

Derived targets are pinned by independent oracles computed here: an
adaptive Simpson quadrature for the two closed-form periods of z^2 - 1,
the one-zero model length (2/3) r^(3/2), and the exact rotation that
permutes the saddles of z^3 - 1.
"""

import cmath
import math

import pytest

from specnet.geometry import (
    CASE1,
    CASE4A,
    UNKNOWN,
    ActiveRay,
    BranchError,
    IntegrationError,
    QuadraticDifferential,
    RayClassification,
    RingDomain,
    SaddleConnection,
    Sector,
    Terminus,
    TrajectorySegment,
    build_network,
    classify_ray,
    escape_sector,
    integrate_trajectory,
    network_report,
    period,
    scan_active_rays,
)


def adaptive_simpson(f, a, b, tol=1e-12):
    """Independent quadrature oracle (no shared code with the kernel)."""

    def simp(lo, hi):
        mid = 0.5 * (lo + hi)
        return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi)), mid

    def rec(lo, hi, whole, depth):
        mid = 0.5 * (lo + hi)
        left, _ = simp(lo, mid)
        right, _ = simp(mid, hi)
        if abs(left + right - whole) <= 15.0 * tol or depth > 40:
            return left + right + (left + right - whole) / 15.0
        return rec(lo, mid, left, depth + 1) + rec(mid, hi, right, depth + 1)

    whole, _ = simp(a, b)
    return rec(a, b, whole, 0)


def q_const():
    return QuadraticDifferential.from_coefficients([1.0])


def q_lin():
    return QuadraticDifferential.from_coefficients([1.0, 0.0])


def q_a1():
    return QuadraticDifferential.from_coefficients([1.0, 0.0, -1.0])


def q_z3():
    return QuadraticDifferential.from_coefficients([1.0, 0.0, 0.0, -1.0])


class TestOracles:
    def test_semicircle_area(self):
        # pins both the pi/2 arclength and the +-i pi/2 period targets
        val = adaptive_simpson(lambda x: math.sqrt(max(1.0 - x * x, 0.0)),
                               -1.0, 1.0)
        assert abs(val - math.pi / 2.0) < 1e-9

    def test_one_zero_model_length(self):
        # flat length from the cone point of z dz^2 out to radius r
        r = 0.7
        val = adaptive_simpson(lambda t: math.sqrt(t), 0.0, r)
        # endpoint half-power keeps Simpson from full machine accuracy
        assert abs(val - (2.0 / 3.0) * r ** 1.5) < 1e-10


class TestConstruction:
    def test_constant_test_mode(self):
        q = q_const()
        assert q.zeros == ()
        assert q.pole_order_at_infinity == 4
        assert q.escape_radius == 10.0

    def test_a1_zeros_sorted(self):
        q = q_a1()
        assert q.pole_order_at_infinity == 6
        assert abs(q.zeros[0] + 1.0) < 1e-12
        assert abs(q.zeros[1] - 1.0) < 1e-12
        assert abs(q.hit_radius - 2e-4) < 1e-12

    def test_leading_zero_trim(self):
        q = QuadraticDifferential.from_coefficients([0.0, 1.0, 0.0, -1.0])
        assert q.degree == 2

    def test_double_root_rejected(self):
        # (z-1)^2 (z+2) = z^3 - 3 z + 2
        with pytest.raises(ValueError):
            QuadraticDifferential.from_coefficients([1.0, 0.0, -3.0, 2.0])

    def test_zero_polynomial_rejected(self):
        with pytest.raises(ValueError):
            QuadraticDifferential.from_coefficients([0.0, 0.0])

    def test_separatrix_directions(self):
        q = q_lin()
        dirs = q.separatrix_directions(0, 0.0)
        want = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
        assert all(abs(a - b) < 1e-12 for a, b in zip(dirs, want))


class TestIntegrate:
    def test_constant_straight(self):
        q = q_const()
        seg = integrate_trajectory(q, 0.0 + 0.0j, 0.0, 1.0)
        assert seg.terminus.kind == "length_capped"
        assert abs(seg.points[-1] - 1.0) < 1e-9
        assert abs(seg.arclength - 1.0) < 1e-12
        assert max(abs(p.imag) for p in seg.points) < 1e-12

    def test_cube_root_ray_length(self):
        q = q_lin()
        seg = integrate_trajectory(q, (0, 0), 0.0, 1.0)
        assert seg.terminus.kind == "length_capped"
        end = seg.points[-1]
        assert abs(end.imag) < 1e-9  # ray 0 at phase 0 is the real axis
        assert abs((2.0 / 3.0) * abs(end) ** 1.5 - 1.0) < 1e-6

    def test_ray_directions_cover_cube_roots(self):
        q = q_lin()
        args = []
        for m in range(3):
            seg = integrate_trajectory(q, (0, m), 0.0, 0.5)
            args.append(cmath.phase(seg.points[-1]) % (2.0 * math.pi))
        want = [0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0]
        for a, b in zip(sorted(args), want):
            assert abs(a - b) < 1e-6

    def test_saddle_arclength(self):
        # ray 1 of the right zero points at the left zero when theta = pi/2
        q = q_a1()
        seg = integrate_trajectory(q, (1, 1), math.pi / 2.0, 5.0)
        assert seg.terminus == Terminus.hit(0)
        assert abs(seg.arclength - math.pi / 2.0) < 1e-6
        assert abs(seg.points[0] - 1.0) < 1e-12
        assert abs(seg.points[-1] + 1.0) < 1e-12

    def test_escape_and_length(self):
        q = q_lin()
        seg = integrate_trajectory(q, (0, 0), 0.0, 100.0)
        assert seg.terminus.kind == "escaped"
        assert abs(abs(seg.points[-1]) - q.escape_radius) < 1e-6
        want = (2.0 / 3.0) * q.escape_radius ** 1.5
        assert abs(seg.arclength - want) < 1e-6

    def test_exclusion_disk_start_rejected(self):
        q = q_a1()
        with pytest.raises(ValueError):
            integrate_trajectory(q, 1.0 + 1e-5j, 0.0, 1.0)

    def test_arclengths_aligned_and_monotone(self):
        q = q_z3()
        seg = integrate_trajectory(q, 1.7 + 0.4j, 0.3, 1.5)
        assert len(seg.points) == len(seg.arclengths)
        diffs = [b - a for a, b in
                 zip(seg.arclengths, seg.arclengths[1:])]
        assert all(d >= -1e-15 for d in diffs)
        assert seg.arclength == seg.arclengths[-1]

    def test_reversal_retraces(self):
        q = q_z3()
        tol = 1e-9
        fwd = integrate_trajectory(q, 1.7 + 0.4j, 0.3, 1.5, tol=tol)
        assert fwd.terminus.kind == "length_capped"
        rev = integrate_trajectory(q, fwd.points[-1], 0.3 + math.pi,
                                   fwd.arclength, tol=tol,
                                   branch_seed=fwd.end_branch)
        assert rev.terminus.kind == "length_capped"
        assert abs(rev.points[-1] - (1.7 + 0.4j)) < 10.0 * tol


class TestNetwork:
    def test_single_zero_all_escape(self):
        # cap must clear the flat length to the escape circle, ~21.08 here
        net = build_network(q_lin(), 0.7, 25.0)
        plus = [s for o, s in net.segments if o == "+"]
        minus = [s for o, s in net.segments if o == "-"]
        assert len(plus) == 3 and len(minus) == 3
        assert all(s.terminus.kind == "escaped" for s in plus + minus)
        assert net.saddles == ()
        assert net.failures == ()

    def test_a1_active_phase_one_saddle(self):
        net = build_network(q_a1(), math.pi / 2.0, 5.0)
        assert len(net.saddles) == 1
        sc = net.saddles[0]
        assert {sc.start_zero, sc.end_zero} == {0, 1}
        assert abs(abs(sc.charge) - math.pi / 2.0) < 1e-8
        assert abs(sc.hat_charge - math.pi * 1j) < 1e-8
        hits = [s for o, s in net.segments
                if o == "+" and s.terminus.kind == "hit_zero"]
        assert len(hits) == 2  # one leaf seen from each end

    def test_a1_inactive_phase_no_saddle(self):
        net = build_network(q_a1(), 0.0, 5.0)
        assert net.saddles == ()
        assert all(s.terminus.kind != "hit_zero" for _, s in net.segments)

    def test_register_path_crossings(self):
        net = build_network(q_a1(), math.pi / 2.0, 5.0)
        rec = net.register_path([0.2 - 1.0j, 0.2 + 1.0j])
        on_axis = [c for c in rec["crossings"]
                   if abs(c["point"].imag) < 1e-6]
        # the saddle leaf lies on the real axis and is stored once per
        # orientation class
        assert len(on_axis) >= 2
        assert rec in net.incidences

    def test_network_report_shape(self):
        rep = network_report(build_network(q_a1(), 1.0, 2.0))
        assert rep["phase"] == 1.0
        assert all(set(s) >= {"orientation", "points", "terminus"}
                   for s in rep["segments"])


class TestScan:
    def test_a1_single_ray(self):
        rays = scan_active_rays(q_a1(), (math.pi / 4.0, 3.0 * math.pi / 4.0),
                                5.0, n_samples=180)
        assert len(rays) == 1
        ray = rays[0]
        assert not ray.flagged
        assert abs(ray.phase - math.pi / 2.0) < 1e-6
        assert len(ray.connections) == 1
        sc = ray.connections[0]
        assert abs(abs(sc.charge) - math.pi / 2.0) < 1e-8
        assert abs(sc.hat_charge - math.pi * 1j) < 1e-8

    def test_single_zero_empty(self):
        assert scan_active_rays(q_lin(), (0.1, 1.2), 5.0) == []

    def test_cap_filters_and_is_stable(self):
        q = q_a1()
        sector = (math.pi / 4.0, 3.0 * math.pi / 4.0)
        none = scan_active_rays(q, sector, 1.0, n_samples=90)
        assert [r for r in none if not r.flagged] == []
        small = scan_active_rays(q, sector, 2.0, n_samples=90)
        big = scan_active_rays(q, sector, 5.0, n_samples=90)
        assert len(small) == len(big) == 1
        za = abs(small[0].connections[0].charge)
        zb = abs(big[0].connections[0].charge)
        assert abs(za - zb) < 1e-6

    def test_z3_symmetry_equivariance(self):
        # z -> e^{2 pi i/3} z fixes z^3 - 1 up to the factor e^{4 pi i/3}
        # on q, so the active set is invariant under phase + pi/3.
        q = q_z3()
        lo = 0.02
        a = scan_active_rays(q, (lo, lo + 1.5), 6.0, n_samples=240)
        b = scan_active_rays(q, (lo + math.pi / 3.0, lo + math.pi / 3.0 + 1.5),
                             6.0, n_samples=240)
        a = [r for r in a if not r.flagged]
        b = [r for r in b if not r.flagged]
        assert len(a) >= 1 and len(a) == len(b)
        for ra in a:
            match = min(b, key=lambda rb: abs(rb.phase - math.pi / 3.0
                                              - ra.phase))
            assert abs(match.phase - math.pi / 3.0 - ra.phase) < 1e-6
            assert len(ra.connections) == len(match.connections) == 1
            assert abs(abs(ra.connections[0].charge)
                       - abs(match.connections[0].charge)) < 1e-6

    def test_detection_matches_network(self):
        q = q_a1()
        rays = scan_active_rays(q, (math.pi / 4.0, 3.0 * math.pi / 4.0),
                                5.0, n_samples=90)
        sc = rays[0].connections[0]
        net = build_network(q, rays[0].phase, abs(sc.charge) + 0.1)
        assert len(net.saddles) == 1
        quiet = build_network(q, 1.2, 5.0)
        assert quiet.saddles == ()
        empty = scan_active_rays(q, (1.1, 1.3), 5.0, n_samples=60)
        assert [r for r in empty if not r.flagged] == []


class TestPeriod:
    def test_a1_segment_quadrature(self):
        q = q_a1()
        val = period(q, [-1.0, 1.0])
        assert abs(val - 0.5j * math.pi) < 1e-8
        flipped = period(q, [-1.0, 1.0], branch_seed=-1j)
        assert abs(flipped + 0.5j * math.pi) < 1e-8

    def test_reversal_negates(self):
        q = q_a1()
        assert abs(period(q, [1.0, -1.0]) + 0.5j * math.pi) < 1e-8
        a = period(q, [2.0, 2.0 + 1.0j])
        bb = period(q, [2.0 + 1.0j, 2.0])
        assert abs(a + bb) < 1e-10

    def test_additivity_with_carried_branch(self):
        q = q_a1()
        mid = 0.3 + 0.9j
        whole = period(q, [-1.0, mid, 1.0])
        p1, ref = period(q, [-1.0, mid], return_end_branch=True)
        p2 = period(q, [mid, 1.0], branch_seed=ref)
        assert abs(whole - (p1 + p2)) < 1e-10

    def test_closed_contour_splits_into_segments(self):
        q = q_a1()
        rect = [2.0 + 1.5j, -2.0 + 1.5j, -2.0 - 1.5j, 2.0 - 1.5j, 2.0 + 1.5j]
        loop = period(q, rect)
        seg = period(q, [-1.0, 1.0])
        assert abs(abs(loop) - math.pi) < 1e-6
        assert min(abs(loop - 2.0 * seg), abs(loop + 2.0 * seg)) < 1e-6

    def test_interior_vertex_on_zero_rejected(self):
        q = q_a1()
        with pytest.raises(BranchError):
            period(q, [-2.0, 1.00001, 2.0])


class _CylinderFixture:
    """Glued-rectangle surface with a known closed-leaf family."""

    def __init__(self, phase, core_period):
        self.phase = phase
        self.core_period = core_period

    def closed_core(self, phase):
        d = (phase - self.phase) % math.pi
        if min(d, math.pi - d) < 1e-9:
            return self.core_period, (0, 1), False
        return None


class TestClassify:
    def test_single_connection_distinct_zeros(self):
        q = q_a1()
        sc = SaddleConnection(0, 1, math.pi / 2.0, 0.5j * math.pi)
        out = classify_ray(q, math.pi / 2.0, [sc], 5.0)
        assert out.kind == CASE1

    def test_cylinder_fixture(self):
        fix = _CylinderFixture(0.4, 1.7j * cmath.exp(0.4j))
        out = classify_ray(fix, 0.4, [], 5.0)
        assert out.kind == CASE4A
        assert out.core.core_period == fix.core_period
        assert out.core.boundary_connections == (0, 1)
        assert not out.core.degenerate

    def test_integer_independent_charges_unknown(self):
        q = q_a1()
        z = cmath.exp(0.3j)
        sc1 = SaddleConnection(0, 1, 0.3, z)
        sc2 = SaddleConnection(0, 1, 0.3, math.sqrt(2.0) * z)
        out = classify_ray(q, 0.3, [sc1, sc2], 5.0)
        assert out.kind == UNKNOWN

    def test_no_connections_unknown(self):
        assert classify_ray(q_a1(), 0.3, [], 5.0).kind == UNKNOWN


class TestEscapeSectors:
    def test_sector_count_and_coverage(self):
        q = q_a1()
        net = build_network(q, 0.0, 300.0)
        secs = set()
        for orient, seg in net.segments:
            if orient == "+" and seg.terminus.kind == "escaped":
                secs.add(escape_sector(q, seg.points[-1], 0.0))
        # six separatrices fall into the four pole sectors, all of which
        # are reached for this configuration
        assert secs == {0, 1, 2, 3}


class TestSectorValidation:
    def test_acute_required(self):
        with pytest.raises(ValueError):
            Sector(0.0, 2.0)
        with pytest.raises(ValueError):
            Sector(1.0, 1.0)
        Sector(math.pi / 4.0, 3.0 * math.pi / 4.0)  # width pi/2 allowed
