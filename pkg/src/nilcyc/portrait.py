"""Double-precision Filippov integration and SVG phase portraits.

The switching line is the x-axis: trajectories follow the active
half-field, cross when both normal components agree in sign, and follow
the Filippov convex combination along sliding segments.  Rendering is
plain deterministic SVG.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

from scipy.integrate import solve_ivp

from .sysmodel import SwitchingSystem

EventKind = str  # crossing | sliding-entry | sliding-exit


@dataclass
class Trajectory:
    """Sampled Filippov trajectory with its manifold event log."""

    samples: List[Tuple[float, float, float]]
    events: List[Tuple[float, float, EventKind]]
    truncated: bool = False
    truncation_reason: Optional[str] = None


def _compile(poly) -> Callable[[float, float], float]:
    packed = []
    for expo, coeff in poly.terms.items():
        i = expo[poly.variables.index("x")] if "x" in poly.variables else 0
        j = expo[poly.variables.index("y")] if "y" in poly.variables else 0
        packed.append((float(coeff), i, j))

    def fn(x: float, y: float) -> float:
        return sum(c * x**i * y**j for c, i, j in packed)

    return fn


class _CompiledSystem:
    def __init__(self, sys: SwitchingSystem):
        self.P_up = _compile(sys.upper.P)
        self.Q_up = _compile(sys.upper.Q)
        self.P_lo = _compile(sys.lower.P)
        self.Q_lo = _compile(sys.lower.Q)

    def half_rhs(self, half: str):
        P = self.P_up if half == "upper" else self.P_lo
        Q = self.Q_up if half == "upper" else self.Q_lo

        def rhs(t, state):
            x, y = state
            return (P(x, y), Q(x, y))

        return rhs

    def g(self, x: float) -> Tuple[float, float]:
        return self.Q_up(x, 0.0), self.Q_lo(x, 0.0)

    def sliding_rhs(self):
        def rhs(t, state):
            x = state[0]
            gp, gm = self.g(x)
            denom = gm - gp
            alpha = gm / denom if denom else 0.5
            return (alpha * self.P_up(x, 0.0) + (1 - alpha) * self.P_lo(x, 0.0),)

        return rhs


def filippov_integrate(sys: SwitchingSystem, start: Tuple[float, float],
                       t_span: Tuple[float, float],
                       tol: float = 1e-10) -> Trajectory:
    """Integrate through crossings and sliding segments on y = 0.

    On reaching the manifold the trajectory crosses when the two normal
    components share a sign, follows the Filippov combination while they
    oppose toward the manifold, and terminates on escaping regions or
    when a singular point is hit within tolerance.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    comp = _CompiledSystem(sys)
    t, t_end = float(t_span[0]), float(t_span[1])
    x, y = float(start[0]), float(start[1])
    traj = Trajectory(samples=[(t, x, y)], events=[])
    if _near_singular(comp, x, y, tol):
        raise ValueError("start point is singular within tolerance")

    guard = 0
    while t < t_end - 1e-14:
        guard += 1
        if guard > 10000:
            traj.truncated = True
            traj.truncation_reason = "too many manifold interactions"
            break
        if abs(y) <= 1e-13:
            gp, gm = comp.g(x)
            if gp < 0.0 < gm:
                t, x, half, stopped = _slide(comp, traj, t, t_end, x, tol)
                if stopped:
                    break
                t, x, y, stopped = _flow_half(comp, traj, half, t, t_end,
                                              x, 0.0, tol)
                if stopped:
                    break
                continue
            if gp > 0.0 > gm:
                traj.truncated = True
                traj.truncation_reason = "escaping region"
                break
            if gp > 0.0 and gm > 0.0:
                half = "upper"
            elif gp < 0.0 and gm < 0.0:
                half = "lower"
            else:
                traj.truncated = True
                traj.truncation_reason = "tangency on the manifold"
                break
        else:
            half = "upper" if y > 0.0 else "lower"
        t, x, y, stopped = _flow_half(comp, traj, half, t, t_end, x, y, tol)
        if stopped:
            break
    return traj


def _near_singular(comp: _CompiledSystem, x: float, y: float,
                   tol: float) -> bool:
    if y >= 0.0:
        vx, vy = comp.P_up(x, y), comp.Q_up(x, y)
        if math.hypot(vx, vy) < 100 * tol:
            return True
    if y <= 0.0:
        vx, vy = comp.P_lo(x, y), comp.Q_lo(x, y)
        if math.hypot(vx, vy) < 100 * tol:
            return True
    return False


def _flow_half(comp, traj, half, t, t_end, x, y, tol):
    rhs = comp.half_rhs(half)
    direction = -1 if half == "upper" else 1

    def hit_axis(tt, state):
        return state[1]

    hit_axis.terminal = True
    hit_axis.direction = direction

    # nudge off the axis so the event does not fire instantly
    if y == 0.0:
        vy = rhs(t, (x, 0.0))[1]
        h = min(1e-9, (t_end - t) / 2)
        y = vy * h
        t = t + h
        x = x + rhs(t, (x, 0.0))[0] * h
    sol = solve_ivp(rhs, (t, t_end), (x, y), method="DOP853",
                    rtol=tol, atol=tol, events=[hit_axis], dense_output=False)
    for tt, (sx, sy) in zip(sol.t[1:], sol.y.T[1:]):
        traj.samples.append((float(tt), float(sx), float(sy)))
    if sol.status == 1 and sol.t_events[0].size:
        te = float(sol.t_events[0][0])
        xe = float(sol.y_events[0][0][0])
        traj.events.append((te, xe, "crossing"))
        if _near_singular(comp, xe, 0.0, tol):
            traj.truncated = True
            traj.truncation_reason = "singular point on the manifold"
            return te, xe, 0.0, True
        return te, xe, 0.0, False
    # ran to t_end (or failed)
    if sol.status < 0:
        traj.truncated = True
        traj.truncation_reason = sol.message
        return float(sol.t[-1]), float(sol.y[0][-1]), float(sol.y[1][-1]), True
    return t_end, float(sol.y[0][-1]), float(sol.y[1][-1]), True


def _slide(comp, traj, t, t_end, x, tol):
    traj.events.append((t, x, "sliding-entry"))
    rhs = comp.sliding_rhs()

    def exit_up(tt, state):
        return comp.g(state[0])[0]

    def exit_lo(tt, state):
        return comp.g(state[0])[1]

    exit_up.terminal = True
    exit_lo.terminal = True
    sol = solve_ivp(rhs, (t, t_end), (x,), method="DOP853", rtol=tol,
                    atol=tol, events=[exit_up, exit_lo])
    for tt, sx in zip(sol.t[1:], sol.y[0][1:]):
        traj.samples.append((float(tt), float(sx), 0.0))
    if sol.status == 1:
        te = float(sol.t[-1])
        xe = float(sol.y[0][-1])
        traj.events.append((te, xe, "sliding-exit"))
        if _near_singular(comp, xe, 0.0, tol):
            traj.truncated = True
            traj.truncation_reason = "singular point on the manifold"
            return te, xe, None, True
        # probe just past the exit along the sliding direction, since at
        # the exit itself one of the normal components is numerically zero
        vel = rhs(te, (xe,))[0]
        probe = xe + math.copysign(1e-9 * max(1.0, abs(xe)), vel) if vel else xe
        gp, gm = comp.g(probe)
        if gp > 0.0:
            return te, xe, "upper", False
        if gm < 0.0:
            return te, xe, "lower", False
        traj.truncated = True
        traj.truncation_reason = "sliding ended at an equilibrium"
        return te, xe, None, True
    traj.truncated = True
    traj.truncation_reason = "sliding did not exit in time"
    return float(sol.t[-1]), float(sol.y[0][-1]), None, True


def return_gap(traj: Trajectory, x0: float) -> Optional[float]:
    """Distance between the second axis crossing and the seed x-value.

    For a seed on the positive x-axis this measures how well the orbit
    closes after one revolution; None when fewer than two crossings
    were recorded.
    """
    crossings = [x for _, x, kind in traj.events if kind == "crossing"]
    if len(crossings) < 2:
        return None
    return abs(crossings[1] - x0)


# -- rendering ---------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.4f}"


def render_portrait(sys: SwitchingSystem,
                    seeds: Sequence[Tuple[float, float]],
                    window: Tuple[float, float, float, float],
                    out_path: str,
                    t_span: Tuple[float, float] = (0.0, 40.0),
                    tol: float = 1e-10,
                    size: int = 640) -> str:
    """Write a deterministic SVG phase portrait; returns the path.

    Trajectories from the seeds are drawn inside the window together
    with the switching line and markers at the distinguished points
    (+-1, 0).
    """
    x0, x1, y0, y1 = (float(v) for v in window)
    if not (x0 < x1 and y0 < y1):
        raise ValueError("window must satisfy x0 < x1 and y0 < y1")
    w = size
    h = int(round(size * (y1 - y0) / (x1 - x0)))

    def to_px(x: float, y: float) -> Tuple[float, float]:
        return ((x - x0) / (x1 - x0) * w, (y1 - y) / (y1 - y0) * h)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
    ]
    # switching manifold
    ax, ay = to_px(x0, 0.0)
    bx, by = to_px(x1, 0.0)
    if y0 < 0.0 < y1:
        parts.append(
            f'<line x1="{_fmt(ax)}" y1="{_fmt(ay)}" x2="{_fmt(bx)}" '
            f'y2="{_fmt(by)}" stroke="#888888" stroke-width="1" '
            'stroke-dasharray="6,4"/>')
    for seed in seeds:
        traj = filippov_integrate(sys, seed, t_span, tol)
        points = []
        for _, x, y in traj.samples:
            if x0 - 1 <= x <= x1 + 1 and y0 - 1 <= y <= y1 + 1:
                px, py = to_px(x, y)
                points.append(f"{_fmt(px)},{_fmt(py)}")
        if len(points) >= 2:
            parts.append(
                f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.2" '
                f'points="{" ".join(points)}"/>')
    for sx in (-1.0, 1.0):
        if x0 <= sx <= x1 and y0 <= 0.0 <= y1:
            px, py = to_px(sx, 0.0)
            parts.append(
                f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3.5" '
                'fill="#c03030"/>')
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write(text)
    return out_path
