"""Filamentary conductor geometry.

Conductors are bundles of straight segments and circular arcs.  Every
filament carries a fraction ``current_weight`` of the assembly drive current;
filaments sharing a ``group`` label are parallel strands of one physical
conductor, so their weights must add up to one.

The mini-trap builder reconstructs the slotted copper tube: four Ioffe bars
left between two axial slits, partial pinch rings at both tube ends and a full
ring on the back of the ceramic chip.  Coordinates: z is the tube axis with the
chip end at negative z, the tube is centred on the origin, and x is the
direction in which the bars are farther apart (the wide slit is the slab
|x| < w/2).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields, replace
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryError

Vec = tuple  # (x, y, z) tuple of floats

_WEIGHT_TOL = 1e-9


def _as_vec(value, name: str) -> Vec:
    try:
        arr = np.asarray(value, dtype=float).reshape(3)
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"{name} must be a 3-vector, got {value!r}", name) from exc
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name} has non-finite components: {value!r}", name)
    return tuple(float(x) for x in arr)


def _check_weight(w: float) -> float:
    w = float(w)
    if not (0.0 < w <= 1.0 + 1e-15):
        raise GeometryError(f"current_weight must lie in (0, 1], got {w}", "current_weight")
    return w


def _check_area(a):
    if a is None:
        return None
    a = float(a)
    if not a > 0:
        raise GeometryError(f"cross-section area must be positive, got {a}", "area")
    return a


@dataclass(frozen=True)
class FilamentSegment:
    """Straight current filament from ``start`` to ``end`` (metres).

    ``area`` is the cross-section (m^2) of the conductor share this strand
    represents; it is only needed by the power audit.
    """

    start: Vec
    end: Vec
    current_weight: float = 1.0
    group: str = "segment"
    area: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "start", _as_vec(self.start, "start"))
        object.__setattr__(self, "end", _as_vec(self.end, "end"))
        object.__setattr__(self, "current_weight", _check_weight(self.current_weight))
        object.__setattr__(self, "area", _check_area(self.area))
        if self.start == self.end:
            raise GeometryError("zero-length segment (start == end)", "end")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.end, self.start)))

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "FilamentSegment":
        return replace(self, start=rotation @ np.asarray(self.start) + translation,
                       end=rotation @ np.asarray(self.end) + translation)


def _default_reference(normal: np.ndarray) -> np.ndarray:
    """A deterministic unit vector perpendicular to ``normal``."""
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(normal)))] = 1.0
    # Prefer x as the zero-angle direction for arcs in planes containing it.
    if abs(normal[0]) < 0.5:
        axis = np.array([1.0, 0.0, 0.0])
    u = axis - np.dot(axis, normal) * normal
    return u / np.linalg.norm(u)


@dataclass(frozen=True)
class FilamentArc:
    """Circular-arc current filament.

    The arc lies in the plane through ``center`` perpendicular to ``normal``.
    Angles are measured from ``reference`` (an in-plane unit vector; chosen
    automatically when omitted) towards ``normal x reference``; current flows
    from ``start_angle`` to ``end_angle``.
    """

    center: Vec
    radius: float
    normal: Vec
    start_angle: float
    end_angle: float
    current_weight: float = 1.0
    group: str = "arc"
    area: float | None = None
    reference: Vec | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec(self.center, "center"))
        n = np.asarray(_as_vec(self.normal, "normal"))
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise GeometryError(f"normal must be a unit vector (|n| = {np.linalg.norm(n)!r})", "normal")
        object.__setattr__(self, "normal", tuple(float(x) for x in n))
        if not (float(self.radius) > 0 and math.isfinite(self.radius)):
            raise GeometryError(f"radius must be positive, got {self.radius}", "radius")
        object.__setattr__(self, "radius", float(self.radius))
        sweep = float(self.end_angle) - float(self.start_angle)
        if sweep == 0.0 or not math.isfinite(sweep):
            raise GeometryError("arc has zero angular sweep", "end_angle")
        if abs(sweep) > 2 * math.pi * (1 + 1e-12):
            raise GeometryError("arc sweep exceeds one turn; use several arcs", "end_angle")
        object.__setattr__(self, "start_angle", float(self.start_angle))
        object.__setattr__(self, "end_angle", float(self.end_angle))
        object.__setattr__(self, "current_weight", _check_weight(self.current_weight))
        object.__setattr__(self, "area", _check_area(self.area))
        if self.reference is None:
            u = _default_reference(n)
        else:
            u = np.asarray(_as_vec(self.reference, "reference"))
            u = u - np.dot(u, n) * n
            if np.linalg.norm(u) < 1e-12:
                raise GeometryError("reference direction is parallel to the normal", "reference")
            u = u / np.linalg.norm(u)
        object.__setattr__(self, "reference", tuple(float(x) for x in u))

    @property
    def sweep(self) -> float:
        return self.end_angle - self.start_angle

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    def basis(self):
        """Orthonormal (u, v, n) with u the zero-angle direction."""
        n = np.asarray(self.normal)
        u = np.asarray(self.reference)
        return u, np.cross(n, u), n

    def points(self, angles) -> np.ndarray:
        u, v, _ = self.basis()
        angles = np.asarray(angles, dtype=float)[..., None]
        return np.asarray(self.center) + self.radius * (np.cos(angles) * u + np.sin(angles) * v)

    def chord_vertices(self, n_chords: int) -> np.ndarray:
        """Vertices of the inscribed polygon with ``n_chords`` equal chords."""
        return self.points(np.linspace(self.start_angle, self.end_angle, n_chords + 1))

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "FilamentArc":
        return replace(self, center=rotation @ np.asarray(self.center) + translation,
                       normal=rotation @ np.asarray(self.normal),
                       reference=rotation @ np.asarray(self.reference))


Element = FilamentSegment | FilamentArc


def _check_rigid(rotation) -> np.ndarray:
    R = np.asarray(rotation, dtype=float)
    if R.shape != (3, 3):
        raise GeometryError("rotation must be a 3x3 matrix", "rotation")
    if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
        raise GeometryError("transform is not a proper rotation (orthogonal, det = +1)", "rotation")
    return R


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """Right-handed rotation by ``angle`` (rad) about ``axis``."""
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)


@dataclass(frozen=True)
class ConductorAssembly:
    """Immutable collection of filaments sharing one drive current (A)."""

    elements: tuple
    drive_current: float = 1.0
    label: str = "assembly"

    def __post_init__(self):
        elems = tuple(self.elements)
        for i, e in enumerate(elems):
            if not isinstance(e, (FilamentSegment, FilamentArc)):
                raise GeometryError(f"element {i} is not a filament: {type(e).__name__}", "elements")
        object.__setattr__(self, "elements", elems)
        if not math.isfinite(float(self.drive_current)):
            raise GeometryError("drive_current must be finite", "drive_current")
        object.__setattr__(self, "drive_current", float(self.drive_current))
        for name, total in self.group_weights().items():
            if abs(total - 1.0) > _WEIGHT_TOL:
                raise GeometryError(
                    f"current weights of group {name!r} sum to {total:.12g}, not 1", "current_weight")

    def __len__(self):
        return len(self.elements)

    def group_weights(self) -> dict:
        totals: dict = {}
        for e in self.elements:
            totals[e.group] = totals.get(e.group, 0.0) + e.current_weight
        return totals

    @property
    def segments(self) -> tuple:
        return tuple(e for e in self.elements if isinstance(e, FilamentSegment))

    @property
    def arcs(self) -> tuple:
        return tuple(e for e in self.elements if isinstance(e, FilamentArc))

    @cached_property
    def segment_arrays(self):
        """(starts, ends, currents, element indices) for the straight filaments."""
        idx = [i for i, e in enumerate(self.elements) if isinstance(e, FilamentSegment)]
        if not idx:
            empty = np.zeros((0, 3))
            return empty, empty, np.zeros(0), np.zeros(0, dtype=int)
        starts = np.array([self.elements[i].start for i in idx])
        ends = np.array([self.elements[i].end for i in idx])
        cur = np.array([self.elements[i].current_weight for i in idx]) * self.drive_current
        return starts, ends, cur, np.array(idx)

    def with_current(self, current: float) -> "ConductorAssembly":
        return replace(self, drive_current=float(current))

    def transformed(self, rotation=None, translation=None) -> "ConductorAssembly":
        """Apply the rigid motion p -> R p + t to every element."""
        R = np.eye(3) if rotation is None else _check_rigid(rotation)
        t = np.zeros(3) if translation is None else np.asarray(_as_vec(translation, "translation"))
        return replace(self, elements=tuple(e.transformed(R, t) for e in self.elements))

    def bounding_box(self):
        pts = []
        for e in self.elements:
            if isinstance(e, FilamentSegment):
                pts += [e.start, e.end]
            else:
                pts.append(e.chord_vertices(64))
        if not pts:
            return np.zeros(3), np.zeros(3)
        allp = np.vstack([np.atleast_2d(p) for p in pts])
        return allp.min(axis=0), allp.max(axis=0)

    def element_rows(self):
        """Rows of the exported element table (lengths in cm, angles in rad)."""
        rows = []
        for i, e in enumerate(self.elements):
            row = dict(index=i, type="segment" if isinstance(e, FilamentSegment) else "arc",
                       group=e.group, weight=e.current_weight)
            if isinstance(e, FilamentSegment):
                row.update(x0_cm=e.start[0] * 100, y0_cm=e.start[1] * 100, z0_cm=e.start[2] * 100,
                           x1_cm=e.end[0] * 100, y1_cm=e.end[1] * 100, z1_cm=e.end[2] * 100)
            else:
                row.update(cx_cm=e.center[0] * 100, cy_cm=e.center[1] * 100, cz_cm=e.center[2] * 100,
                           radius_cm=e.radius * 100, nx=e.normal[0], ny=e.normal[1], nz=e.normal[2],
                           start_rad=e.start_angle, end_rad=e.end_angle)
            row["area_mm2"] = "" if e.area is None else e.area * 1e6
            rows.append(row)
        return rows

    def write_element_table(self, path) -> None:
        cols = ["index", "type", "group", "weight", "x0_cm", "y0_cm", "z0_cm", "x1_cm", "y1_cm",
                "z1_cm", "cx_cm", "cy_cm", "cz_cm", "radius_cm", "nx", "ny", "nz", "start_rad",
                "end_rad", "area_mm2"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for row in self.element_rows():
                w.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in row.items()})


def translate(assembly: ConductorAssembly, displacement) -> ConductorAssembly:
    return assembly.transformed(translation=displacement)


def rotate(assembly: ConductorAssembly, rotation, about=(0.0, 0.0, 0.0)) -> ConductorAssembly:
    """Rotate about the point ``about``."""
    R = _check_rigid(rotation)
    c = np.asarray(_as_vec(about, "about"))
    return assembly.transformed(R, c - R @ c)


def merge(assemblies: Sequence[ConductorAssembly], label: str = "merged") -> ConductorAssembly:
    """Combine assemblies driven by the same current into one.

    Group names that collide between inputs are prefixed with the owning
    assembly's label (and position, if labels collide too).
    """
    if not assemblies:
        raise GeometryError("nothing to merge", "assemblies")
    current = assemblies[0].drive_current
    for a in assemblies[1:]:
        if a.drive_current != current:
            raise GeometryError("merged assemblies must share one drive current", "drive_current")
    seen: dict = {}
    for k, a in enumerate(assemblies):
        for g in a.group_weights():
            seen.setdefault(g, []).append(k)
    out = []
    for k, a in enumerate(assemblies):
        for e in a.elements:
            if len(seen[e.group]) > 1:
                e = replace(e, group=f"{a.label}#{k}:{e.group}")
            out.append(e)
    return ConductorAssembly(tuple(out), current, label)


# -- auxiliary coils ------------------------------------------------------------

def build_circular_loop(radius: float, center=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0),
                        turns: int = 1, current: float = 1.0, label: str = "loop",
                        area: float | None = None) -> ConductorAssembly:
    """``turns`` coincident full-circle arcs (one group per turn)."""
    if not radius > 0:
        raise GeometryError(f"radius must be positive, got {radius}", "radius")
    if int(turns) < 1:
        raise GeometryError("turns must be >= 1", "turns")
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    elems = tuple(FilamentArc(center, radius, n, 0.0, 2 * math.pi, 1.0, f"turn{k}", area)
                  for k in range(int(turns)))
    return ConductorAssembly(elems, current, label)


def build_rect_coil_pair(width: float, height: float, separation: float,
                         center=(0.0, 0.0, 0.0), turns: int = 1, polarity=(1, -1),
                         current: float = 1.0, label: str = "rect_pair",
                         area: float | None = None) -> ConductorAssembly:
    """Two coaxial rectangular loops in the planes z = c_z -/+ separation/2.

    ``polarity`` gives the circulation sense of the lower and upper coil
    (+1 counter-clockwise seen from +z).  (1, -1) is the anti-Helmholtz
    quadrupole configuration, (1, 1) the Helmholtz bias configuration.
    """
    for name, val in (("width", width), ("height", height), ("separation", separation)):
        if not val > 0:
            raise GeometryError(f"{name} must be positive, got {val}", name)
    if int(turns) < 1:
        raise GeometryError("turns must be >= 1", "turns")
    if len(polarity) != 2 or any(p not in (1, -1) for p in polarity):
        raise GeometryError("polarity must be a pair of +1/-1", "polarity")
    c = np.asarray(_as_vec(center, "center"))
    hw, hh = width / 2, height / 2
    corners = np.array([[hw, -hh], [hw, hh], [-hw, hh], [-hw, -hh]])
    elems = []
    for coil, (dz, pol) in enumerate(zip((-separation / 2, separation / 2), polarity)):
        ring = corners if pol > 0 else corners[::-1]
        for t in range(int(turns)):
            for k in range(4):
                p = np.array([*ring[k], dz]) + c
                q = np.array([*ring[(k + 1) % 4], dz]) + c
                elems.append(FilamentSegment(p, q, 1.0, f"coil{coil}_turn{t}_side{k}", area))
    return ConductorAssembly(tuple(elems), current, label)


# -- the mini-trap ----------------------------------------------------------------

@dataclass(frozen=True)
class MinitrapParams:
    """Dimensions of the slotted-tube Ioffe-Pritchard mini-trap (SI units).

    ``slit_widths`` is (wide, narrow).  The wide slit separates the bars along
    x.  ``tip_slit`` selects which slit is open at the tip (+z) end; the other
    one is open at the chip end.

    ``ring_model``:
      * ``"routed"`` -- end-ring current follows the conductor path: each end
        carries arcs from one bar to the next through the uncut part of the
        ring, joined to the bars by short junction strands so the circuit is
        closed.
      * ``"gapped"`` -- each end ring is a single arc spanning the full circle
        minus the slit gaps present at that end (no junctions).

    The chip ring is a full circle ``chip_ring_offset`` behind the chip end of
    the tube, ``chip_trace_width`` wide and ``chip_trace_thickness`` thick.
    Leads run along the axis behind the chip.
    """

    tube_length: float = 17e-3
    inner_diameter: float = 5e-3
    outer_diameter: float = 8e-3
    slit_widths: tuple = (4e-3, 1e-3)
    slit_stop_margin: float = 2e-3
    filaments_per_bar: int = 3
    filaments_per_ring: int = 2
    include_chip_ring: bool = True
    include_leads: bool = True
    ring_model: str = "routed"
    tip_slit: str = "narrow"
    chip_ring_offset: float = 1.085e-3
    chip_trace_width: float = 2.0e-3
    chip_trace_thickness: float = 0.3e-3
    lead_gap: float = 2.0e-3
    lead_length: float = 50e-3
    lead_areas: tuple = (10e-6, 10e-6)

    def __post_init__(self):
        object.__setattr__(self, "slit_widths", tuple(float(w) for w in self.slit_widths))
        object.__setattr__(self, "lead_areas", tuple(float(a) for a in self.lead_areas))
        for name in ("tube_length", "inner_diameter", "outer_diameter", "slit_stop_margin",
                     "chip_ring_offset", "chip_trace_width", "chip_trace_thickness",
                     "lead_gap", "lead_length"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise GeometryError(f"{name} must be a positive length, got {v!r}", name)
        if not self.inner_diameter < self.outer_diameter:
            raise GeometryError("inner_diameter must be smaller than outer_diameter", "inner_diameter")
        if len(self.slit_widths) != 2 or min(self.slit_widths) <= 0:
            raise GeometryError("slit_widths must be two positive widths", "slit_widths")
        if max(self.slit_widths) >= self.inner_diameter:
            raise GeometryError("a slit must be narrower than the bore", "slit_widths")
        if math.pi * self.mean_radius * 2 - 2 * sum(self.slit_widths) <= 0:
            raise GeometryError("slits leave no material for the Ioffe bars", "slit_widths")
        if not 2 * self.slit_stop_margin < self.tube_length:
            raise GeometryError("2 * slit_stop_margin must be shorter than tube_length", "slit_stop_margin")
        for name in ("filaments_per_bar", "filaments_per_ring"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise GeometryError(f"{name} must be an integer >= 1, got {v!r}", name)
        if self.ring_model not in ("routed", "gapped"):
            raise GeometryError("ring_model must be 'routed' or 'gapped'", "ring_model")
        if self.tip_slit not in ("narrow", "wide"):
            raise GeometryError("tip_slit must be 'narrow' or 'wide'", "tip_slit")
        if len(self.lead_areas) != 2 or min(self.lead_areas) <= 0:
            raise GeometryError("lead_areas must be two positive areas", "lead_areas")

    @classmethod
    def from_mapping(cls, data: dict) -> "MinitrapParams":
        """Build from a config mapping, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise GeometryError(f"unknown geometry key(s): {sorted(unknown)}", sorted(unknown)[0])
        return cls(**data)

    def scaled(self, factor: float) -> "MinitrapParams":
        """All lengths multiplied by ``factor`` (areas by factor^2)."""
        lengths = ("tube_length", "inner_diameter", "outer_diameter", "slit_stop_margin",
                   "chip_ring_offset", "chip_trace_width", "chip_trace_thickness",
                   "lead_gap", "lead_length")
        kw = {n: getattr(self, n) * factor for n in lengths}
        kw["slit_widths"] = tuple(w * factor for w in self.slit_widths)
        kw["lead_areas"] = tuple(a * factor ** 2 for a in self.lead_areas)
        return replace(self, **kw)

    @property
    def inner_radius(self) -> float:
        return self.inner_diameter / 2

    @property
    def outer_radius(self) -> float:
        return self.outer_diameter / 2

    @property
    def mean_radius(self) -> float:
        return (self.inner_diameter + self.outer_diameter) / 4

    @property
    def bar_sector(self) -> tuple:
        """Angular limits (a0, a1) of the first-quadrant bar.

        Slit widths are subtracted as arc length at the mean radius: the
        narrow slit is centred on phi = 0, pi and the wide one on +-pi/2.
        """
        wide, narrow = self.slit_widths
        R = self.mean_radius
        return narrow / (2 * R), math.pi / 2 - wide / (2 * R)

    @property
    def bar_area(self) -> float:
        a0, a1 = self.bar_sector
        return 0.5 * (a1 - a0) * (self.outer_radius ** 2 - self.inner_radius ** 2)

    @property
    def ring_area(self) -> float:
        return self.slit_stop_margin * (self.outer_radius - self.inner_radius)

    @property
    def chip_ring_z(self) -> float:
        return -self.tube_length / 2 - self.chip_ring_offset


def _midpoints(lo: float, hi: float, n: int) -> np.ndarray:
    edges = np.linspace(lo, hi, n + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def _cyl(r: float, phi: float, z: float) -> np.ndarray:
    return np.array([r * math.cos(phi), r * math.sin(phi), z])


def build_minitrap(params: MinitrapParams = MinitrapParams(), current: float = 100.0,
                   label: str = "minitrap") -> ConductorAssembly:
    """Filament model of the slotted-tube mini-trap driven by ``current`` (A).

    Bars alternate direction (+z, -z, +z, -z going round from the first
    quadrant) so the transverse field is quadrupolar; the pinch rings and
    the chip ring all circulate in one sense.
    """
    p = params
    R = p.mean_radius
    L2, m = p.tube_length / 2, p.slit_stop_margin
    zb = L2 - m                                  # bar ends at +-zb
    a0, a1 = p.bar_sector
    nb, nr = p.filaments_per_bar, p.filaments_per_ring
    bar_mid = _midpoints(a0, a1, nb)
    theta = 0.5 * (a0 + a1)
    bar_angles = [bar_mid, math.pi - bar_mid[::-1], math.pi + bar_mid, 2 * math.pi - bar_mid[::-1]]
    centroids = [theta, math.pi - theta, math.pi + theta, 2 * math.pi - theta]
    directions = [1, -1, 1, -1]
    z_tip = _midpoints(L2 - m, L2, nr)
    z_chip = _midpoints(-L2, -L2 + m, nr)
    A_bar, A_ring = p.bar_area, p.ring_area
    elems: list = []

    for k in range(4):
        for phi in bar_angles[k]:
            lo, hi = _cyl(R, phi, -zb), _cyl(R, phi, zb)
            if directions[k] < 0:
                lo, hi = hi, lo
            elems.append(FilamentSegment(lo, hi, 1.0 / nb, f"bar{k + 1}", A_bar))

    zhat = (0.0, 0.0, 1.0)
    if p.ring_model == "routed":
        # With the narrow slit open at the tip, the tip ring is continuous
        # through +-90 deg and joins bar1->bar2 and bar3->bar4; the chip-end
        # ring is continuous through 0/180 deg and joins bar2->bar3, bar4->bar1.
        # All arcs then run counter-clockwise.  For the opposite orientation
        # the pairing and the sense are both swapped.
        if p.tip_slit == "narrow":
            tip_pairs, chip_pairs, sense = [(0, 1), (2, 3)], [(1, 2), (3, 0)], 1
        else:
            tip_pairs, chip_pairs, sense = [(0, 3), (2, 1)], [(1, 0), (3, 2)], -1

        def arc_span(k_from, k_to):
            start = centroids[k_from]
            end = centroids[k_to]
            if sense > 0 and end < start:
                end += 2 * math.pi
            if sense < 0 and end > start:
                end -= 2 * math.pi
            return start, end

        def junctions(k, z_end, z_rings, tag):
            # Every bar strand end is tied to every ring strand start by a
            # straight link carrying 1/(nb*nr); Kirchhoff's law then holds at
            # each strand end and the circuit is closed.
            into_ring = (directions[k] > 0) == (z_end > 0)
            w = 1.0 / (nb * nr)
            for phi in bar_angles[k]:
                for z in z_rings:
                    a, b = _cyl(R, phi, z_end), _cyl(R, centroids[k], z)
                    if not into_ring:
                        a, b = b, a
                    elems.append(FilamentSegment(a, b, w, f"bar{k + 1}_{tag}_joint", A_ring))

        for i, (kf, kt) in enumerate(tip_pairs):
            s, e = arc_span(kf, kt)
            for z in z_tip:
                elems.append(FilamentArc((0, 0, z), R, zhat, s, e, 1.0 / nr, f"tip_arc{i + 1}", A_ring))
        for i, (kf, kt) in enumerate(chip_pairs):
            s, e = arc_span(kf, kt)
            for z in z_chip:
                elems.append(FilamentArc((0, 0, z), R, zhat, s, e, 1.0 / nr, f"chip_arc{i + 1}", A_ring))
        for k in range(4):
            junctions(k, zb, z_tip, "tip")
            junctions(k, -zb, z_chip, "chip")
        ring_sense = sense
    else:
        wide, narrow = p.slit_widths
        tip_w, chip_w = (narrow, wide) if p.tip_slit == "narrow" else (wide, narrow)
        tip_c, chip_c = (0.0, math.pi / 2) if p.tip_slit == "narrow" else (math.pi / 2, 0.0)
        for zs, w, c, grp in ((z_tip, tip_w, tip_c, "tip_ring"), (z_chip, chip_w, chip_c, "chip_end_ring")):
            gap = 2 * w / R            # both cuts of the slit merged into one gap
            for z in zs:
                elems.append(FilamentArc((0, 0, z), R, zhat, c + gap / 2, c + 2 * math.pi - gap / 2,
                                         1.0 / nr, grp, A_ring))
        ring_sense = 1

    if p.include_chip_ring:
        w = p.chip_trace_width
        radii = _midpoints(R - w / 2, R + w / 2, nr)
        if radii[0] <= 0:
            raise GeometryError("chip_trace_width exceeds the ring diameter", "chip_trace_width")
        area = w * p.chip_trace_thickness
        for r in radii:
            s, e = (0.0, 2 * math.pi) if ring_sense > 0 else (2 * math.pi, 0.0)
            elems.append(FilamentArc((0, 0, p.chip_ring_z), r, zhat, s, e, 1.0 / nr, "chip_ring", area))

    if p.include_leads:
        z0 = p.chip_ring_z - p.lead_gap
        z1 = z0 - p.lead_length
        elems.append(FilamentSegment((0, 0, z1), (0, 0, z0), 1.0, "lead_in", p.lead_areas[0]))
        elems.append(FilamentSegment((0, 0, z0), (0, 0, z1), 1.0, "lead_out", p.lead_areas[1]))

    return ConductorAssembly(tuple(elems), current, label)
