"""Trap characterisation: minimum, bias tuning, saddle barriers, frequencies.

Also holds the spectroscopy relations used to read the trap bottom and depth
from RF and Zeeman resonances, and the harmonic relations between |B|
curvature, gradient and oscillation frequency.  All arguments and results are
SI; :meth:`TrapReport.rows` converts to laboratory units.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import minimize_scalar

from .constants import H, LI7, LI7_22, MU_B, Species, SpinState
from .errors import (AntiTrappedError, NearZeroFieldError, NoMinimumError, NoTrapError,
                     NotAchievableError, SingularityError, TransitionError)
from .field import B_FLOOR, evaluate, hessian_of_magnitude, jacobians
from .sources import with_bias

MAJORANA_FIELD = 1e-6   # minima below this |B| (T) are flagged Majorana-unsafe
DIRECTIONS = (("+x", (1, 0, 0)), ("-x", (-1, 0, 0)), ("+y", (0, 1, 0)),
              ("-y", (0, -1, 0)), ("+z", (0, 0, 1)), ("-z", (0, 0, -1)))


# -- spectroscopy and harmonic relations -------------------------------------

def rf_cut_frequency(B: float, initial: SpinState = LI7_22, final: SpinState | None = None,
                     species: Species = LI7) -> float:
    """RF frequency (Hz) resonant with the hyperfine transition at field B (T).

    nu = nu_hfs + (mF gF - mF' gF') muB B / h.
    """
    from .constants import LI7_11
    final = LI7_11 if final is None else final
    if not initial.trapped or not initial.mu_factor > final.mu_factor:
        raise TransitionError("initial state must be trapped and more strongly trapped than the final one")
    return species.nu_hfs + (initial.mu_factor - final.mu_factor) * MU_B * B / H


def zeeman_resonance(B: float, initial: SpinState, final: SpinState) -> float:
    """Frequency (Hz) of a |dmF| = 1 transition within one F manifold."""
    if initial.F != final.F:
        raise TransitionError("transition changes F; use rf_cut_frequency")
    if abs(initial.mF - final.mF) != 1:
        raise TransitionError("Zeeman transition requires |dmF| = 1")
    return abs(initial.mu_factor - final.mu_factor) * MU_B * B / H


def trap_frequency(curvature: float, spin: SpinState = LI7_22, species: Species = LI7) -> float:
    """Angular frequency from a |B| curvature (T/m^2): w^2 = mF gF muB c / m."""
    k = spin.mu_factor * MU_B * curvature
    if k <= 0:
        raise AntiTrappedError(f"non-positive restoring constant ({k:.3g} J/m^2)")
    return math.sqrt(k / species.mass)


def curvature_for_frequency(omega: float, spin: SpinState = LI7_22, species: Species = LI7) -> float:
    """|B| curvature (T/m^2) giving angular frequency ``omega``."""
    return species.mass * omega ** 2 / (spin.mu_factor * MU_B)


def radial_gradient(B0: float, radial_curvature: float, axial_curvature: float) -> float:
    """dB/dr from d2B/dr2 = (dB/dr)^2 / B0 - (1/2) d2B/dz2."""
    return math.sqrt(B0 * (radial_curvature + 0.5 * axial_curvature))


def radial_curvature(B0: float, gradient: float, axial_curvature: float) -> float:
    """Inverse of :func:`radial_gradient`."""
    return gradient ** 2 / B0 - 0.5 * axial_curvature


# -- minimum ------------------------------------------------------------------

@dataclass
class Minimum:
    position: np.ndarray
    B0: float
    B: np.ndarray
    majorana_unsafe: bool = False
    iterations: int = 0


def _magnitude(src, p) -> float:
    return float(np.linalg.norm(evaluate(src, p)))


def find_minimum(source, bias=(0.0, 0.0, 0.0), seed=(0.0, 0.0, 0.0), box: float = 5e-3,
                 step_tol: float = 1e-8, grad_tol: float = 1e-4, max_iter: int = 200,
                 trust: float = 0.5e-3) -> Minimum:
    """Local minimum of |B + bias| starting from ``seed``.

    Newton steps on finite-difference gradient and Hessian of |B|, with
    steepest descent when the Hessian is not positive definite, and
    backtracking so |B| never increases.  Converged when the step is below
    ``step_tol`` (m) and |grad |B|| below ``grad_tol`` (T/m).
    """
    src = with_bias(source, bias)
    seed = np.asarray(seed, dtype=float).reshape(3)
    x = seed.copy()
    f = _magnitude(src, x)
    for it in range(1, max_iter + 1):
        try:
            s = hessian_of_magnitude(src, x)
        except NearZeroFieldError:
            return Minimum(x, f, evaluate(src, x), True, it)
        g, Hm = s.grad_magnitude, s.hess_magnitude
        gnorm = float(np.linalg.norm(g))
        w = np.linalg.eigvalsh(Hm)
        if w.min() > 0:
            dx = -np.linalg.solve(Hm, g)
        else:
            dx = -g / max(gnorm, 1e-300) * min(trust, f / max(gnorm, 1e-300))
        n = float(np.linalg.norm(dx))
        if n > trust:
            dx *= trust / n
        if float(np.linalg.norm(dx)) < step_tol and gnorm < grad_tol:
            return Minimum(x, f, s.B, f < MAJORANA_FIELD, it)
        for _ in range(40):
            f_new = _magnitude(src, x + dx)
            if f_new <= f:
                break
            dx *= 0.5
        else:
            # no decrease possible along dx: we are at the resolution limit
            return Minimum(x, f, s.B, f < MAJORANA_FIELD, it)
        x = x + dx
        f = f_new
        if np.any(np.abs(x - seed) > box):
            raise NoMinimumError(f"minimum search left the +-{box * 1e3:g} mm box around the seed at {x}")
        if f < B_FLOOR:
            return Minimum(x, f, evaluate(src, x), True, it)
        if float(np.linalg.norm(dx)) < step_tol and gnorm < grad_tol:
            return Minimum(x, f, evaluate(src, x), f < MAJORANA_FIELD, it)
    raise NoMinimumError(f"minimum search did not converge in {max_iter} iterations")


def solve_bias_for_B0(source, target_B0: float, axis=(0.0, 0.0, 1.0), seed=(0.0, 0.0, 0.0),
                      tol: float = 1e-7, max_expand: int = 8) -> np.ndarray:
    """Uniform bias (T) along ``axis`` that sets the trap bottom to ``target_B0`` (T).

    Bisection on B0(b) - target to ``tol`` (T) in the bias amplitude.
    """
    if not target_B0 > 0:
        raise ValueError("target_B0 must be positive")
    a = np.asarray(axis, dtype=float)
    a = a / np.linalg.norm(a)
    m0 = find_minimum(source, (0, 0, 0), seed)
    if abs(m0.B0 - target_B0) <= tol:
        return np.zeros(3)
    sign = 1.0 if float(np.dot(m0.B, a)) >= 0 else -1.0
    pos = [m0.position]

    def resid(b):
        try:
            m = find_minimum(source, b * a, pos[-1])
        except NoMinimumError:
            m = find_minimum(source, b * a, seed)
        pos.append(m.position)
        return m.B0 - target_B0

    lo, f_lo = 0.0, m0.B0 - target_B0
    if target_B0 < m0.B0:
        hi = -sign * m0.B0
    else:
        hi = sign * 2 * (target_B0 - m0.B0)
    f_hi = resid(hi)
    k = 0
    while f_lo * f_hi > 0:
        k += 1
        if k > max_expand:
            raise NotAchievableError(f"no bias along {a} reaches B0 = {target_B0:.4g} T")
        lo, f_lo = hi, f_hi
        hi *= 1.5
        f_hi = resid(hi)
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        f_mid = resid(mid)
        if f_mid == 0:
            lo = hi = mid
            break
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return 0.5 * (lo + hi) * a


# -- saddles and depth --------------------------------------------------------

@dataclass
class Saddle:
    label: str
    direction: np.ndarray
    position: np.ndarray | None
    barrier: float | None          # |B| at the saddle (T); None when unbounded
    note: str = ""

    @property
    def bounded(self) -> bool:
        return self.barrier is not None


def _first_local_max(src, p0, d, f0, step, max_distance, chunk=40):
    """Coarse march along p0 + s d; returns (s_lo, s_hi) bracketing the first maximum."""
    prev2, prev1 = None, (0.0, f0)
    k = 1
    nmax = int(math.ceil(max_distance / step))
    while k <= nmax:
        ks = np.arange(k, min(k + chunk, nmax + 1))
        s = ks * step
        vals = np.linalg.norm(evaluate(src, p0 + s[:, None] * d), axis=1)
        for si, fi in zip(s, vals):
            if prev2 is not None and prev1[1] >= prev2[1] and prev1[1] > fi:
                return prev2[0], si
            prev2, prev1 = prev1, (si, fi)
        k = ks[-1] + 1
    return None


def _maximize_along(src, p, d, lo, hi):
    res = minimize_scalar(lambda s: -_magnitude(src, p + s * d), bounds=(lo, hi), method="bounded",
                          options=dict(xatol=1e-9))
    return res.x, -res.fun


def _refine_saddle(src, p, d, step, iterations=2):
    """Quadratic-fit transverse refinement followed by a re-maximisation along d."""
    basis = np.linalg.svd(d[None])[2][1:]        # two unit vectors orthogonal to d
    f0 = _magnitude(src, p)
    for _ in range(iterations):
        for t in basis:
            fm, fp = _magnitude(src, p - step * t), _magnitude(src, p + step * t)
            c = fm - 2 * f0 + fp
            if c > 0:
                shift = float(np.clip(0.5 * step * (fm - fp) / c, -step, step))
                p = p + shift * t
                f0 = _magnitude(src, p)
        s, f0 = _maximize_along(src, p, d, -step, step)
        p = p + s * d
    return p, f0


def trap_depth(source, bias, minimum: Minimum, max_distance: float = 15e-3, step: float = 50e-6):
    """Barriers along +-x, +-y, +-z from the minimum; returns (depth, saddles).

    Each direction is marched until the first local maximum of |B|, which is
    polished by a bounded 1D search and then moved to the true saddle by the
    transverse quadratic refinement.  Directions without a maximum (or that
    run into a conductor) are reported unbounded.
    """
    src = with_bias(source, bias)
    p0 = np.asarray(minimum.position, dtype=float)
    saddles = []
    for label, d in DIRECTIONS:
        d = np.asarray(d, dtype=float)
        try:
            br = _first_local_max(src, p0, d, minimum.B0, step, max_distance)
        except SingularityError as exc:
            saddles.append(Saddle(label, d, None, None, f"path meets conductor ({exc.group})"))
            continue
        if br is None:
            saddles.append(Saddle(label, d, None, None, "no barrier within search distance"))
            continue
        s, _ = _maximize_along(src, p0, d, *br)
        pos, barrier = _refine_saddle(src, p0 + s * d, d, step)
        saddles.append(Saddle(label, d, pos, barrier))
    bounded = [sd for sd in saddles if sd.bounded]
    if not bounded:
        raise NoTrapError("no escape direction is bounded by a barrier")
    depth = min(sd.barrier for sd in bounded) - minimum.B0
    return depth, saddles


# -- harmonic analysis and the full report ------------------------------------

@dataclass
class TrapReport:
    """Trap characterisation in SI units (see :meth:`rows` for lab units)."""

    minimum_position: np.ndarray
    B0: float
    bias: np.ndarray
    saddles: list
    depth: float
    limiting_saddle: str
    grad_radial: tuple          # harmonic-equivalent dB/dr along x and y (T/m)
    curv_axial: float           # d2|B|/dz2 (T/m^2)
    curv_radial: tuple          # d2|B|/dx2, d2|B|/dy2 (T/m^2)
    omega: tuple                # (w_x, w_y, w_z) rad/s
    drive_current: float
    field_gradient: np.ndarray  # dB_i/dx_j at the minimum (T/m)
    hessian: np.ndarray
    offcenter_gradient: dict = dc_field(default_factory=dict)   # label -> |grad|B|| (T/m)
    majorana_unsafe: bool = False

    @property
    def omega_axial(self) -> float:
        return self.omega[2]

    @property
    def omega_bar(self) -> float:
        return float(np.prod(self.omega) ** (1.0 / 3.0))

    def rows(self):
        """(quantity, value, unit) rows in laboratory units."""
        out = [("drive_current", self.drive_current, "A")]
        for k, c in zip("xyz", self.minimum_position):
            out.append((f"min_{k}", c * 100, "cm"))
        for k, c in zip("xyz", self.bias):
            out.append((f"bias_{k}", c * 1e4, "G"))
        out.append(("B0", self.B0 * 1e4, "G"))
        for sd in self.saddles:
            out.append((f"barrier_{sd.label}", float("nan") if sd.barrier is None else sd.barrier * 1e4, "G"))
        out.append(("depth", self.depth * 1e4, "G"))
        out.append(("dBx_dx_center", abs(self.field_gradient[0, 0]) * 100, "G/cm"))
        out.append(("dBy_dy_center", abs(self.field_gradient[1, 1]) * 100, "G/cm"))
        for lab, g in self.offcenter_gradient.items():
            out.append((f"grad_offcenter_{lab}", g * 100, "G/cm"))
        out.append(("grad_radial_x", self.grad_radial[0] * 100, "G/cm"))
        out.append(("grad_radial_y", self.grad_radial[1] * 100, "G/cm"))
        out.append(("curv_axial", self.curv_axial, "G/cm^2"))
        out.append(("curv_radial_x", self.curv_radial[0], "G/cm^2"))
        out.append(("curv_radial_y", self.curv_radial[1], "G/cm^2"))
        for k, w in zip(("x", "y", "z"), self.omega):
            out.append((f"f_{k}", w / (2 * math.pi), "Hz"))
        return out

    def limiting_axis(self) -> str:
        return self.limiting_saddle[-1]


def harmonic_analysis(source, bias, minimum: Minimum, spin: SpinState = LI7_22,
                      species: Species = LI7):
    """Curvatures, frequencies and harmonic-equivalent radial gradients at the minimum.

    Returns ``(sample, omegas, curv, grad_radial)``.
    """
    src = with_bias(source, bias)
    if minimum.B0 < B_FLOOR or minimum.majorana_unsafe:
        raise NearZeroFieldError("trap bottom is (near) zero: Majorana-unsafe, no harmonic expansion")
    s = hessian_of_magnitude(src, minimum.position)
    Hm = s.hess_magnitude
    if np.linalg.eigvalsh(Hm).min() <= 0:
        raise AntiTrappedError(f"|B| Hessian at the minimum has a non-positive eigenvalue: {np.linalg.eigvalsh(Hm)}")
    curv = np.diag(Hm).copy()
    omegas = tuple(trap_frequency(c, spin, species) for c in curv)
    grad_r = tuple(radial_gradient(minimum.B0, c, curv[2]) for c in curv[:2])
    return s, omegas, curv, grad_r


def offcenter_gradients(source, bias, position, offset: float = 1e-3) -> dict:
    """|grad |B|| at ``offset`` (m) from ``position`` along +x and +y."""
    src = with_bias(source, bias)
    out = {}
    for lab, d in (("x", (1.0, 0, 0)), ("y", (0, 1.0, 0))):
        p = np.asarray(position) + offset * np.asarray(d)
        B, J = jacobians(src, p[None])
        g = J[0].T @ B[0] / np.linalg.norm(B[0])
        out[lab] = float(np.linalg.norm(g))
    return out


def analyze_trap(source, bias=(0.0, 0.0, 0.0), seed=(0.0, 0.0, 0.0), spin: SpinState = LI7_22,
                 species: Species = LI7, box: float = 5e-3, max_distance: float = 15e-3,
                 offset: float = 1e-3) -> TrapReport:
    """find_minimum -> trap_depth -> harmonic_analysis, packaged as a report."""
    bias = np.asarray(bias, dtype=float).reshape(3)
    m = find_minimum(source, bias, seed, box=box)
    depth, saddles = trap_depth(source, bias, m, max_distance)
    s, omegas, curv, grad_r = harmonic_analysis(source, bias, m, spin, species)
    limiting = min((sd for sd in saddles if sd.bounded), key=lambda sd: sd.barrier).label
    return TrapReport(
        minimum_position=m.position, B0=m.B0, bias=bias, saddles=saddles, depth=depth,
        limiting_saddle=limiting, grad_radial=grad_r, curv_axial=float(curv[2]),
        curv_radial=(float(curv[0]), float(curv[1])), omega=omegas,
        drive_current=float(getattr(source, "drive_current", float("nan"))),
        field_gradient=s.grad_B, hessian=s.hess_magnitude,
        offcenter_gradient=offcenter_gradients(source, bias, m.position, offset),
        majorana_unsafe=m.majorana_unsafe)
