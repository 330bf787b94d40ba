"""Directed reference paths built from line and circular-arc segments.

A path is a G1-continuous sequence of segments, parameterized by arc length.
The signed lateral offset convention is: e > 0 when the query point lies to
the left of the direction of travel.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import CorridorExceeded, InvalidSpec

_JOIN_TOL = 1e-9
_TIE_TOL = 1e-12

DEFAULT_CORRIDOR = 50.0


def wrap_angle(a):
    """Wrap an angle to (-pi, pi]."""
    r = math.fmod(a + math.pi, 2.0 * math.pi)
    if r <= 0.0:
        r += 2.0 * math.pi
    return r - math.pi


@dataclass(frozen=True)
class Line:
    x0: float
    y0: float
    heading: float
    length: float

    def end_pose(self):
        return (
            self.x0 + self.length * math.cos(self.heading),
            self.y0 + self.length * math.sin(self.heading),
            self.heading,
        )


@dataclass(frozen=True)
class Arc:
    cx: float
    cy: float
    radius: float
    start_angle: float  # polar angle of the start point seen from the center
    sweep: float        # signed; > 0 turns left (CCW)

    @property
    def length(self):
        return self.radius * abs(self.sweep)

    @property
    def curvature(self):
        return math.copysign(1.0 / self.radius, self.sweep)

    def start_pose(self):
        return self._pose_at_angle(self.start_angle)

    def end_pose(self):
        return self._pose_at_angle(self.start_angle + self.sweep)

    def _pose_at_angle(self, phi):
        x = self.cx + self.radius * math.cos(phi)
        y = self.cy + self.radius * math.sin(phi)
        heading = phi + math.copysign(0.5 * math.pi, self.sweep)
        return x, y, heading


@dataclass(frozen=True)
class PathProjection:
    s_star: float
    e: float
    theta: float
    kappa_ref: float


def _segment_start_pose(seg):
    if isinstance(seg, Line):
        return seg.x0, seg.y0, seg.heading
    return seg.start_pose()


class RefPath:
    """Immutable arc-length-parameterized reference path."""

    def __init__(self, segments):
        segments = tuple(segments)
        if not segments:
            raise InvalidSpec("path needs at least one segment")
        for seg in segments:
            if seg.length <= 0.0:
                raise InvalidSpec(f"segment with nonpositive length: {seg}")
            if isinstance(seg, Arc) and seg.radius <= 0.0:
                raise InvalidSpec(f"arc with nonpositive radius: {seg}")
        # G1 continuity between consecutive segments
        for prev, nxt in zip(segments, segments[1:]):
            ex, ey, eh = prev.end_pose()
            sx, sy, sh = _segment_start_pose(nxt)
            if math.hypot(ex - sx, ey - sy) > _JOIN_TOL:
                raise InvalidSpec("segments are not position-continuous")
            if abs(wrap_angle(eh - sh)) > _JOIN_TOL:
                raise InvalidSpec("segments are not heading-continuous")
        self.segments = segments
        self._cum = np.cumsum([seg.length for seg in segments])
        self.total_length = float(self._cum[-1])
        self._packed = None

    def __repr__(self):
        return f"RefPath({len(self.segments)} segments, {self.total_length:.3f} m)"

    @property
    def straight_heading(self):
        """Common heading if the whole path is straight, else None."""
        if all(isinstance(s, Line) for s in self.segments):
            h0 = self.segments[0].heading
            if all(abs(wrap_angle(s.heading - h0)) <= _JOIN_TOL for s in self.segments):
                return h0
        return None

    def max_curvature(self):
        return max(
            (1.0 / s.radius for s in self.segments if isinstance(s, Arc)),
            default=0.0,
        )

    def _locate(self, s):
        s = min(max(s, 0.0), self.total_length)
        i = bisect_right(self._cum, s)
        if i >= len(self.segments):
            i = len(self.segments) - 1
        s0 = self._cum[i - 1] if i > 0 else 0.0
        return i, s - s0

    def pose_at(self, s):
        """(x, y, heading) at arc length s (clamped to the path)."""
        i, ds = self._locate(s)
        seg = self.segments[i]
        if isinstance(seg, Line):
            return (
                seg.x0 + ds * math.cos(seg.heading),
                seg.y0 + ds * math.sin(seg.heading),
                seg.heading,
            )
        phi = seg.start_angle + math.copysign(ds / seg.radius, seg.sweep)
        return seg._pose_at_angle(phi)

    def point_at(self, s):
        x, y, _ = self.pose_at(s)
        return x, y

    def heading_at(self, s):
        return self.pose_at(s)[2]

    def curvature_at(self, s):
        i, _ = self._locate(s)
        seg = self.segments[i]
        return seg.curvature if isinstance(seg, Arc) else 0.0

    def left_normal_at(self, s):
        h = self.heading_at(s)
        return -math.sin(h), math.cos(h)

    def packed(self):
        """Segments as a float64 array for the projection kernels.

        Row layout: kind (0 line, 1 arc), s0, length, then for lines
        (x0, y0, heading, 0, 0) and for arcs (cx, cy, radius, start_angle, sweep).
        """
        if self._packed is None:
            rows = []
            s0 = 0.0
            for seg in self.segments:
                if isinstance(seg, Line):
                    rows.append([0.0, s0, seg.length, seg.x0, seg.y0, seg.heading, 0.0, 0.0])
                else:
                    rows.append([1.0, s0, seg.length, seg.cx, seg.cy, seg.radius,
                                 seg.start_angle, seg.sweep])
                s0 += seg.length
            self._packed = np.asarray(rows, dtype=np.float64)
        return self._packed

    def project(self, point, corridor=DEFAULT_CORRIDOR):
        """Closest-point projection of a 2D point onto the path.

        Returns the global minimizer of the distance over all segments; ties
        at segment joints go to the smaller s_star. For points whose closest
        path point lies in a segment interior, |e| equals the Euclidean
        distance; past the path ends e is the perpendicular component only.
        """
        from ._backend import project_packed

        s_star, e, theta, kappa, dist = project_packed(self.packed(), point[0], point[1])
        if dist > corridor:
            raise CorridorExceeded(
                f"point {tuple(point)} is {dist:.3f} m from the path (corridor {corridor} m)"
            )
        return PathProjection(s_star=s_star, e=e, theta=theta, kappa_ref=kappa)


def project(point, path, corridor=DEFAULT_CORRIDOR):
    """Module-level alias for RefPath.project."""
    return path.project(point, corridor=corridor)


def build_arc_sequence(spec, start=(0.0, 0.0, 0.0)):
    """Build a G1 path from (curvature, length) rows; curvature 0 is a line."""
    x, y, h = start
    segments = []
    for row in spec:
        kappa, length = float(row[0]), float(row[1])
        if length <= 0.0:
            raise InvalidSpec(f"segment length must be > 0, got {length}")
        if abs(kappa) < 1e-12:
            segments.append(Line(x, y, h, length))
            x += length * math.cos(h)
            y += length * math.sin(h)
        else:
            r = 1.0 / abs(kappa)
            cx = x + (1.0 / kappa) * -math.sin(h)
            cy = y + (1.0 / kappa) * math.cos(h)
            sweep = kappa * length
            start_angle = math.atan2(y - cy, x - cx)
            arc = Arc(cx, cy, r, start_angle, sweep)
            segments.append(arc)
            x, y, h = arc.end_pose()
    return RefPath(segments)


# ISO-3888-style double-lane-change section lengths (arc lengths, meters):
# entry straight, lane transition, offset lane, return transition, exit straight.
LANE_CHANGE_SECTIONS = (12.0, 13.5, 11.0, 12.5, 12.0)
LANE_CHANGE_OFFSET = 3.5


def _s_curve_sweep(offset, length):
    """Half-arc sweep of an S-curve of two equal arcs covering a lateral offset."""
    ratio = offset / length
    if ratio > 2.0 / math.pi:
        raise InvalidSpec(
            f"lane offset {offset} not reachable within transition length {length}"
        )
    lo, hi = 1e-12, math.pi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if (1.0 - math.cos(mid)) / mid < ratio:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def build_lane_change(lane_offset, section_lengths=LANE_CHANGE_SECTIONS):
    """Double-lane-change path: straight, S-curve out, offset lane, S-curve back, straight."""
    if lane_offset < 0.0:
        raise InvalidSpec("lane_offset must be >= 0")
    if len(section_lengths) != 5:
        raise InvalidSpec("section_lengths must have 5 entries")
    entry, trans_out, lane, trans_back, exit_ = (float(v) for v in section_lengths)
    if lane_offset == 0.0:
        return build_arc_sequence([(0.0, entry + trans_out + lane + trans_back + exit_)])
    rows = [(0.0, entry)]
    for length, direction in ((trans_out, 1.0), (trans_back, -1.0)):
        phi = _s_curve_sweep(lane_offset, length)
        kappa = 2.0 * phi / length
        rows.append((direction * kappa, 0.5 * length))
        rows.append((-direction * kappa, 0.5 * length))
        if direction > 0:
            rows.append((0.0, lane))
    rows.append((0.0, exit_))
    return build_arc_sequence(rows)
