"""Tests for Filippov integration and portrait rendering."""

import math
from fractions import Fraction as F

import pytest

from nilcyc.portrait import (
    Trajectory,
    filippov_integrate,
    render_portrait,
    return_gap,
)
from nilcyc.sysmodel import (
    SwitchingSystem,
    Z2CubicParams,
    build_z2_cubic,
    hamiltonian_of,
    parse_field,
    perturbed_family,
)

EPS = F(1, 10)

BICENTER_SMOOTH = Z2CubicParams(a21=F(-1), a03=F(-1))
HAMILTONIAN_INSTANCE = Z2CubicParams(a21=F(1), a12=F(3), a02=F(-3),
                                     a03=F(-3), b12=F(-1), b03=F(-1))
SLIDING_BASE = Z2CubicParams(a02=F(-4), a21=F(-1), b03=F(-1), a12=F(3),
                             a03=F(1), b12=F(1))


def offset_family(b):
    return perturbed_family(SLIDING_BASE, eps=EPS, delta1=F(1, 10), b=b)


def poly_float(poly, x, y):
    """Evaluate a bivariate exact polynomial in double precision."""
    total = 0.0
    ix = poly.variables.index("x") if "x" in poly.variables else None
    iy = poly.variables.index("y") if "y" in poly.variables else None
    for expo, coeff in poly.terms.items():
        i = expo[ix] if ix is not None else 0
        j = expo[iy] if iy is not None else 0
        total += float(coeff) * x**i * y**j
    return total


def test_rotation_field_closed_circle():
    rot = parse_field("-y", "x")
    sys = SwitchingSystem(rot, rot)
    traj = filippov_integrate(sys, (0.5, 0.0), (0.0, 7.0), tol=1e-10)
    assert not traj.truncated
    kinds = [kind for _, _, kind in traj.events]
    assert kinds == ["crossing", "crossing"]
    assert traj.events[0][0] == pytest.approx(math.pi, abs=1e-6)
    assert traj.events[1][0] == pytest.approx(2 * math.pi, abs=1e-6)
    assert traj.events[1][1] == pytest.approx(0.5, abs=1e-8)
    radii = [math.hypot(x, y) for _, x, y in traj.samples]
    assert max(radii) - min(radii) < 1e-8


def test_closed_orbit_around_right_singular_point():
    sys = build_z2_cubic(BICENTER_SMOOTH)
    traj = filippov_integrate(sys, (1.5, 0.0), (0.0, 40.0), tol=1e-12)
    assert not traj.truncated
    gap = return_gap(traj, 1.5)
    assert gap is not None and gap < 1e-6
    # the orbit surrounds (1, 0): the first crossing lands left of it
    assert traj.events[0][1] < 1.0


def test_return_gap_shrinks_with_tolerance():
    sys = build_z2_cubic(BICENTER_SMOOTH)
    coarse = return_gap(
        filippov_integrate(sys, (1.5, 0.0), (0.0, 40.0), tol=1e-8), 1.5)
    fine = return_gap(
        filippov_integrate(sys, (1.5, 0.0), (0.0, 40.0), tol=1e-12), 1.5)
    assert coarse is not None and fine is not None
    assert fine < coarse


def test_sliding_entry_and_exit_events():
    sys = offset_family(F(1, 100))
    traj = filippov_integrate(sys, (-0.005, 0.0), (0.0, 12.0), tol=1e-10)
    kinds = [kind for _, _, kind in traj.events]
    assert kinds[:2] == ["sliding-entry", "sliding-exit"]
    entry_t, entry_x, _ = traj.events[0]
    exit_t, exit_x, _ = traj.events[1]
    assert entry_t == 0.0 and entry_x == pytest.approx(-0.005)
    assert exit_t > 0.0
    assert exit_x == pytest.approx(-0.01, abs=1e-9)
    # after leaving the segment the orbit continues below the axis
    assert not traj.truncated
    assert traj.samples[-1][2] < 0.0


def test_sliding_samples_stay_on_axis():
    sys = offset_family(F(1, 100))
    traj = filippov_integrate(sys, (-0.005, 0.0), (0.0, 12.0), tol=1e-10)
    exit_t = traj.events[1][0]
    for t, _, y in traj.samples:
        if t <= exit_t:
            assert y == 0.0


def test_escaping_region_terminates_immediately():
    sys = offset_family(F(-1, 100))
    traj = filippov_integrate(sys, (0.005, 0.0), (0.0, 12.0), tol=1e-10)
    assert traj.truncated
    assert traj.truncation_reason == "escaping region"
    assert traj.events == []


def test_hamiltonian_conserved_along_half_arcs():
    sys = build_z2_cubic(HAMILTONIAN_INSTANCE)
    H_up = hamiltonian_of(sys.upper)
    H_lo = hamiltonian_of(sys.lower)
    assert H_up is not None and H_lo is not None
    tol = 1e-10
    traj = filippov_integrate(sys, (0.99, 0.0), (0.0, 60.0), tol=tol)
    assert len(traj.events) >= 2
    t1, t2 = traj.events[0][0], traj.events[1][0]
    lower_arc = [(x, y) for t, x, y in traj.samples if t <= t1]
    upper_arc = [(x, y) for t, x, y in traj.samples if t1 < t <= t2]
    assert lower_arc[1][1] < 0.0 < upper_arc[1][1]
    for H, arc in ((H_lo, lower_arc), (H_up, upper_arc)):
        values = [poly_float(H, x, y) for x, y in arc]
        assert max(values) - min(values) < 10 * tol


def test_hamiltonian_instance_orbit_closes():
    sys = build_z2_cubic(HAMILTONIAN_INSTANCE)
    traj = filippov_integrate(sys, (0.99, 0.0), (0.0, 60.0), tol=1e-10)
    gap = return_gap(traj, 0.99)
    assert gap is not None and gap < 1e-8


def test_unbounded_orbit_is_flagged():
    sys = build_z2_cubic(HAMILTONIAN_INSTANCE)
    traj = filippov_integrate(sys, (1.5, 0.0), (0.0, 30.0), tol=1e-10)
    assert traj.truncated
    assert traj.truncation_reason


def test_singular_start_rejected():
    sys = build_z2_cubic(BICENTER_SMOOTH)
    with pytest.raises(ValueError, match="singular"):
        filippov_integrate(sys, (1.0, 0.0), (0.0, 10.0), tol=1e-10)


def test_nonpositive_tolerance_rejected():
    sys = build_z2_cubic(BICENTER_SMOOTH)
    with pytest.raises(ValueError, match="tol"):
        filippov_integrate(sys, (1.5, 0.0), (0.0, 10.0), tol=0.0)


def test_sample_times_monotone():
    sys = build_z2_cubic(BICENTER_SMOOTH)
    traj = filippov_integrate(sys, (1.5, 0.0), (0.0, 40.0), tol=1e-10)
    assert traj.samples[0] == (0.0, 1.5, 0.0)
    times = [t for t, _, _ in traj.samples]
    assert all(a <= b for a, b in zip(times, times[1:]))


def test_render_empty_seed_list(tmp_path):
    sys = build_z2_cubic(BICENTER_SMOOTH)
    out = tmp_path / "markers.svg"
    render_portrait(sys, [], (-2.0, 2.0, -1.5, 1.5), str(out))
    text = out.read_text()
    assert text.startswith("<svg ")
    assert text.rstrip().endswith("</svg>")
    assert text.count("<circle") == 2
    assert "<polyline" not in text
    assert "<line" in text


def test_render_is_deterministic(tmp_path):
    sys = build_z2_cubic(BICENTER_SMOOTH)
    seeds = [(1.5, 0.0), (1.2, 0.0)]
    window = (-2.5, 2.5, -2.0, 2.0)
    a = tmp_path / "a.svg"
    b = tmp_path / "b.svg"
    render_portrait(sys, seeds, window, str(a), t_span=(0.0, 30.0), tol=1e-8)
    render_portrait(sys, seeds, window, str(b), t_span=(0.0, 30.0), tol=1e-8)
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert text.count("<polyline") == 2
    assert text.count("<circle") == 2


def test_render_window_validation(tmp_path):
    sys = build_z2_cubic(BICENTER_SMOOTH)
    with pytest.raises(ValueError, match="window"):
        render_portrait(sys, [], (2.0, -2.0, -1.0, 1.0),
                        str(tmp_path / "bad.svg"))


def test_trajectory_dataclass_defaults():
    traj = Trajectory(samples=[(0.0, 1.0, 0.0)], events=[])
    assert not traj.truncated
    assert traj.truncation_reason is None
