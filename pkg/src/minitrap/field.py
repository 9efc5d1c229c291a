"""Biot-Savart field evaluation and finite-difference derivatives.

Straight filaments use the closed-form finite-segment expression

    B = mu0 I / (4 pi) * (r1 x r2) (|r1| + |r2|) / (|r1| |r2| (|r1||r2| + r1.r2)),

with r1, r2 the vectors from the segment end points to the field point.
Arcs are replaced by inscribed polygons; the polygon error is an even power
series in the chord angle, so successive chord doublings are combined by
Romberg extrapolation until two tableau diagonals agree to ``rel_tol``.  The
number of chords is chosen once per call, for all points of the batch, so
finite-difference stencils evaluated in one call see a smooth field.

Any object with a ``field(points) -> (M, 3)`` method can be used as a field
source in the derivative helpers; :mod:`minitrap.sources` provides analytic
ones.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import MU0
from .errors import ChordConvergenceWarning, ConvergenceError, NearZeroFieldError, SingularityError
from .geometry import ConductorAssembly, FilamentArc

EPS_GEOM = 1e-6          # exclusion radius around filaments (m)
B_FLOOR = 1e-8           # smallest |B| for which |B| is treated as smooth (T)
REL_TOL = 1e-9           # arc chordization tolerance
GRAD_STEP = 1e-6         # central-difference step for grad B (m)
HESS_STEP = 1e-5         # largest step for the |B| Hessian (m)

_CHUNK = 250_000         # points x filaments per vectorized block
_K = MU0 / (4 * math.pi)


def _segments_field(points: np.ndarray, starts: np.ndarray, ends: np.ndarray,
                    currents: np.ndarray) -> np.ndarray:
    """Field (T) of straight filaments at ``points`` (M, 3)."""
    out = np.zeros_like(points)
    ns = len(starts)
    if ns == 0:
        return out
    step = max(1, _CHUNK // ns)
    for lo in range(0, len(points), step):
        p = points[lo:lo + step, None, :]
        r1 = p - starts[None]
        r2 = p - ends[None]
        n1 = np.sqrt(np.einsum("ijk,ijk->ij", r1, r1))
        n2 = np.sqrt(np.einsum("ijk,ijk->ij", r2, r2))
        n12 = n1 * n2
        den = n12 * (n12 + np.einsum("ijk,ijk->ij", r1, r2))
        f = currents[None] * (n1 + n2) / den
        out[lo:lo + step] = _K * np.einsum("ijk,ij->ik", np.cross(r1, r2), f)
    return out


def _segment_distance(points, starts, ends):
    d = ends - starts
    L2 = np.einsum("jk,jk->j", d, d)
    rel = points[:, None, :] - starts[None]
    t = np.clip(np.einsum("ijk,jk->ij", rel, d) / L2[None], 0.0, 1.0)
    diff = rel - t[..., None] * d[None]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _arc_distance(points: np.ndarray, arc: FilamentArc) -> np.ndarray:
    u, v, n = arc.basis()
    rel = points - np.asarray(arc.center)
    zn = rel @ n
    qu, qv = rel @ u, rel @ v
    rho = np.hypot(qu, qv)
    phi = np.arctan2(qv, qu)
    lo, hi = sorted((arc.start_angle, arc.end_angle))
    inside = np.mod(phi - lo, 2 * math.pi) <= (hi - lo) + 1e-15
    d_in = np.hypot(rho - arc.radius, zn)
    ends = arc.points([arc.start_angle, arc.end_angle])
    d_end = np.min(np.linalg.norm(points[:, None, :] - ends[None], axis=-1), axis=1)
    return np.where(inside, np.minimum(d_in, d_end), d_end)


def check_clearance(assembly: ConductorAssembly, points: np.ndarray, eps: float = EPS_GEOM) -> None:
    """Raise :class:`SingularityError` if a point is within ``eps`` of a filament."""
    starts, ends, _, idx = assembly.segment_arrays
    if len(starts):
        step = max(1, _CHUNK // len(starts))
        for lo in range(0, len(points), step):
            d = _segment_distance(points[lo:lo + step], starts, ends)
            bad = np.argwhere(d < eps)
            if len(bad):
                i, j = bad[0]
                el = assembly.elements[idx[j]]
                raise SingularityError(
                    f"point {points[lo + i]} lies within {eps:g} m of element {idx[j]} ({el.group})",
                    int(idx[j]), el.group)
    for k, el in enumerate(assembly.elements):
        if isinstance(el, FilamentArc):
            d = _arc_distance(points, el)
            bad = np.flatnonzero(d < eps)
            if len(bad):
                raise SingularityError(
                    f"point {points[bad[0]]} lies within {eps:g} m of element {k} ({el.group})",
                    k, el.group)


def _arc_field(points: np.ndarray, arc: FilamentArc, current: float, rel_tol: float,
               max_level: int = 9) -> np.ndarray:
    """Romberg-extrapolated chordization of one arc."""
    n0 = max(4, int(math.ceil(abs(arc.sweep) / (math.pi / 8))))

    def polygon(n):
        v = arc.chord_vertices(n)
        return _segments_field(points, v[:-1], v[1:], np.full(n, current))

    rows = [[polygon(n0)]]
    for k in range(1, max_level + 1):
        row = [polygon(n0 * 2 ** k)]
        for j in range(1, k + 1):
            row.append(row[j - 1] + (row[j - 1] - rows[-1][j - 1]) / (4 ** j - 1))
        best, prev = row[-1], rows[-1][-1]
        rows.append(row)
        mag = np.linalg.norm(best, axis=1)
        scale = np.maximum(mag, 1e-6 * (mag.max() if mag.size else 0.0))
        err = np.linalg.norm(best - prev, axis=1)
        if np.all(err <= rel_tol * scale):
            return best
    warnings.warn(f"arc chordization did not reach rel_tol={rel_tol:g} "
                  f"after {n0 * 2 ** max_level} chords", ChordConvergenceWarning, stacklevel=3)
    return rows[-1][-1]


def biot_savart(assembly: ConductorAssembly, points, rel_tol: float = REL_TOL,
                eps: float = EPS_GEOM) -> np.ndarray:
    """Field (T) of ``assembly`` at ``points`` (M, 3) or a single point."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts).reshape(-1, 3)
    check_clearance(assembly, pts, eps)
    starts, ends, cur, _ = assembly.segment_arrays
    B = _segments_field(pts, starts, ends, cur)
    for el in assembly.arcs:
        B += _arc_field(pts, el, el.current_weight * assembly.drive_current, rel_tol)
    return B[0] if single else B


def evaluate(source, points) -> np.ndarray:
    """Field (T) from an assembly or any object with a ``field`` method."""
    if isinstance(source, ConductorAssembly):
        return biot_savart(source, points)
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        return np.asarray(source.field(pts[None]))[0]
    return np.asarray(source.field(pts))


@dataclass
class FieldSample:
    """Field and derivatives at one point (SI units)."""

    point: np.ndarray
    B: np.ndarray
    grad_B: np.ndarray | None = None          # grad_B[i, j] = dB_i/dx_j
    hess_magnitude: np.ndarray | None = None  # d2|B|/dx_i dx_j

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.B))

    @property
    def grad_magnitude(self) -> np.ndarray | None:
        """Gradient of |B|: J^T B / |B|."""
        if self.grad_B is None:
            return None
        return self.grad_B.T @ self.B / self.magnitude

    def divergence_residual(self) -> float:
        """|tr grad B| / ||grad B||."""
        return float(abs(np.trace(self.grad_B)) / np.linalg.norm(self.grad_B))

    def curl_residual(self) -> float:
        """||antisymmetric part of grad B|| / ||grad B||."""
        g = self.grad_B
        return float(np.linalg.norm(0.5 * (g - g.T)) / np.linalg.norm(g))


def field_at(source, point) -> FieldSample:
    p = np.asarray(point, dtype=float).reshape(3)
    return FieldSample(p, evaluate(source, p))


_EYE = np.eye(3)


def _jacobian_stencil(points: np.ndarray, h: float) -> np.ndarray:
    # (M, 2 levels, 2 signs, 3 dirs, 3)
    offs = np.array([[[s * hh * _EYE[j] for j in range(3)] for s in (1, -1)] for hh in (h, h / 2)])
    return points[:, None, None, None, :] + offs[None]


def jacobians(source, points, h: float = GRAD_STEP, rtol: float = 1e-6) -> tuple:
    """Field and gradient tensors at many points.

    Central differences at steps h and h/2 combined by Richardson
    extrapolation.  Returns ``(B, J)`` with shapes (M, 3) and (M, 3, 3).
    Raises :class:`ConvergenceError` when the two estimates disagree by more
    than ``rtol`` (relative) beyond the expected round-off level.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    M = len(pts)
    stencil = _jacobian_stencil(pts, h)
    allp = np.concatenate([pts, stencil.reshape(-1, 3)])
    vals = evaluate(source, allp)
    B = vals[:M]
    S = vals[M:].reshape(M, 2, 2, 3, 3)
    D1 = (S[:, 0, 0] - S[:, 0, 1]) / (2 * h)          # (M, dir j, comp i)
    D2 = (S[:, 1, 0] - S[:, 1, 1]) / h
    G = (4 * D2 - D1) / 3
    J = np.transpose(G, (0, 2, 1))
    err = np.linalg.norm((G - D2).reshape(M, -1), axis=1)
    scale = np.linalg.norm(G.reshape(M, -1), axis=1)
    noise = 1e3 * np.finfo(float).eps * np.linalg.norm(B, axis=1) / h
    bad = err > rtol * scale + noise
    if np.any(bad):
        raise ConvergenceError(
            f"Richardson gradient estimate not converged at {int(bad.sum())} point(s) "
            f"(worst relative change {np.max(err / np.maximum(scale, 1e-300)):.3g})", (B, J))
    return B, J


def gradient_at(source, point, h: float = GRAD_STEP) -> FieldSample:
    p = np.asarray(point, dtype=float).reshape(3)
    B, J = jacobians(source, p[None], h)
    return FieldSample(p, B[0], J[0])


def _hessian_offsets(h: float) -> np.ndarray:
    offs = []
    for i in range(3):
        offs += [h * _EYE[i], -h * _EYE[i]]
    for i in range(3):
        for j in range(i + 1, 3):
            for si in (1, -1):
                for sj in (1, -1):
                    offs.append(h * (si * _EYE[i] + sj * _EYE[j]))
    return np.array(offs)


def _hessian_from(f0, vals, h):
    H = np.zeros((3, 3))
    for i in range(3):
        H[i, i] = (vals[2 * i] - 2 * f0 + vals[2 * i + 1]) / h ** 2
    k = 6
    for i in range(3):
        for j in range(i + 1, 3):
            pp, pm, mp, mm = vals[k:k + 4]
            H[i, j] = H[j, i] = (pp - pm - mp + mm) / (4 * h ** 2)
            k += 4
    return H


def hessian_of_magnitude(source, point, h_max: float = HESS_STEP, b_floor: float = B_FLOOR,
                         grad_step: float = GRAD_STEP) -> FieldSample:
    """Field, gradient tensor and Hessian of |B| at one point.

    The second-difference step is min(h_max, 0.05 |B| / ||grad B||), i.e. a
    small fraction of the length over which |B| changes appreciably, and the
    result is Richardson-extrapolated over steps h and h/2.
    """
    p = np.asarray(point, dtype=float).reshape(3)
    B, J = jacobians(source, p[None], grad_step)
    B, J = B[0], J[0]
    bmag = float(np.linalg.norm(B))
    if bmag < b_floor:
        raise NearZeroFieldError(f"|B| = {bmag:.3g} T below B_floor = {b_floor:g} T at {p}")
    gnorm = float(np.linalg.norm(J))
    h = h_max if gnorm == 0 else min(h_max, 0.05 * bmag / gnorm)
    offs = np.concatenate([_hessian_offsets(h), _hessian_offsets(h / 2)])
    vals = np.linalg.norm(evaluate(source, p + offs), axis=1)
    n = len(offs) // 2
    H1 = _hessian_from(bmag, vals[:n], h)
    H2 = _hessian_from(bmag, vals[n:], h / 2)
    H = (4 * H2 - H1) / 3
    return FieldSample(p, B, J, 0.5 * (H + H.T))


@dataclass
class LineScan:
    """Field samples along origin + s * axis."""

    origin: np.ndarray
    axis: np.ndarray
    s: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.s) <= 0):
            raise ValueError("scan coordinates must be strictly increasing")

    @property
    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.B, axis=1)

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.s[:, None] * self.axis

    @property
    def samples(self) -> list:
        return [(float(s), FieldSample(p, b)) for s, p, b in zip(self.s, self.points, self.B)]

    def rows(self):
        """CSV rows in laboratory units: s (cm), B components and |B| (G)."""
        for s, b, m in zip(self.s, self.B, self.magnitude):
            yield (s * 100, b[0] * 1e4, b[1] * 1e4, b[2] * 1e4, m * 1e4)

    def write_csv(self, path) -> None:
        write_scan_csv(path, self.rows())


SCAN_HEADER = "s_cm,Bx_G,By_G,Bz_G,Bmag_G"


def write_scan_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(SCAN_HEADER + "\n")
        for r in rows:
            fh.write(",".join(f"{x:.9g}" for x in r) + "\n")


def line_scan(source, origin, axis, s_range: Sequence[float], n_samples: int,
              threads: int = 1) -> LineScan:
    """Uniform scan of the field along a line."""
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    o = np.asarray(origin, dtype=float).reshape(3)
    a = np.asarray(axis, dtype=float).reshape(3)
    a = a / np.linalg.norm(a)
    s = np.linspace(float(s_range[0]), float(s_range[1]), int(n_samples))
    return LineScan(o, a, s, evaluate_many(source, o + s[:, None] * a, threads))


def evaluate_many(source, points: np.ndarray, threads: int = 1, chunk: int = 256) -> np.ndarray:
    """Evaluate in fixed-size chunks, optionally on a thread pool.

    Chunk boundaries depend only on ``chunk``, and arc refinement is decided
    per chunk, so results are identical for any thread count.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    blocks = [pts[i:i + chunk] for i in range(0, len(pts), chunk)]
    if threads <= 1 or len(blocks) == 1:
        parts = [evaluate(source, b) for b in blocks]
    else:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: evaluate(source, b), blocks))
    return np.concatenate(parts) if parts else np.zeros((0, 3))
