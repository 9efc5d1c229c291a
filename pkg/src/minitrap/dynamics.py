"""Classical trajectories of magnetically trapped atoms.

Atoms follow the field adiabatically, so each feels the potential
U = mF gF muB |B(x, t)|.  Ensembles are integrated together with a
fixed-step fourth-order Runge-Kutta scheme; each row may carry its own time
step and step count, which is how frequency scans run all grid points in one
vectorized pass.

Spin adiabaticity is monitored, not simulated: a particle is flagged when
|B| drops below ``b_floor`` or when the field direction turns faster than
``adiabatic_ratio`` times the Larmor frequency.  Flagged particles are
treated as lost by :func:`simulate_transfer`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from .constants import HBAR, KB, LI7, LI7_22, MU_B, Species, SpinState
from .errors import MajoranaWarning
from .field import B_FLOOR, evaluate
from .geometry import ConductorAssembly
from .sources import CompositeField

FD_STEP = 1e-7      # finite-difference step for assembly Jacobians inside the integrator (m)


# -- states and ensembles -----------------------------------------------------

@dataclass(frozen=True)
class ParticleState:
    position: tuple
    velocity: tuple
    spin: SpinState = LI7_22
    species: Species = LI7

    def __post_init__(self):
        for name in ("position", "velocity"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, tuple(float(x) for x in v))


@dataclass
class Ensemble:
    """N particles of one species and spin state (arrays of shape (N, 3))."""

    positions: np.ndarray
    velocities: np.ndarray
    spin: SpinState = LI7_22
    species: Species = LI7

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        self.velocities = np.array(self.velocities, dtype=float).reshape(-1, 3)
        if self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities must have equal shapes")

    def __len__(self):
        return len(self.positions)

    @classmethod
    def from_states(cls, states: Sequence[ParticleState]) -> "Ensemble":
        spins = {s.spin for s in states}
        species = {s.species for s in states}
        if len(spins) != 1 or len(species) != 1:
            raise ValueError("ensemble members must share spin state and species")
        return cls(np.array([s.position for s in states]), np.array([s.velocity for s in states]),
                   spins.pop(), species.pop())

    def states(self) -> list:
        return [ParticleState(p, v, self.spin, self.species) for p, v in zip(self.positions, self.velocities)]

    @property
    def moment(self) -> float:
        """mF gF muB (J/T)."""
        return self.spin.mu_factor * MU_B


@dataclass(frozen=True)
class HarmonicTrap:
    """Harmonic description of a trap: centre, (w_x, w_y, w_z), bottom and depth (T)."""

    center: tuple = (0.0, 0.0, 0.0)
    omega: tuple = (1.0, 1.0, 1.0)
    B0: float = 0.0
    depth: float = math.inf

    @classmethod
    def from_report(cls, report) -> "HarmonicTrap":
        return cls(tuple(report.minimum_position), tuple(report.omega), report.B0, report.depth)


def sample_thermal(n: int, temperature: float, trap: HarmonicTrap, species: Species = LI7,
                   spin: SpinState = LI7_22, rng: np.random.Generator | int | None = None) -> Ensemble:
    """Gaussian (harmonic-approximation) thermal sample.

    sigma_x,i = sqrt(kB T / (m w_i^2)), sigma_v = sqrt(kB T / m).
    """
    rng = np.random.default_rng(rng)
    sig_x = np.sqrt(KB * temperature / (species.mass * np.asarray(trap.omega, dtype=float) ** 2))
    sig_v = math.sqrt(KB * temperature / species.mass)
    pos = np.asarray(trap.center) + rng.standard_normal((n, 3)) * sig_x
    vel = rng.standard_normal((n, 3)) * sig_v
    return Ensemble(pos, vel, spin, species)


def phase_balanced_probe(trap: HarmonicTrap, amplitude: float, axes: str = "xy",
                         species: Species = LI7, spin: SpinState = LI7_22) -> Ensemble:
    """Deterministic probe: per axis, one particle displaced by ``amplitude``
    and one passing the centre with speed ``amplitude * w``.

    The two are a quarter period apart, so for a linear drive their mean
    energy gain equals the average over all oscillation phases.
    """
    pos, vel = [], []
    c = np.asarray(trap.center, dtype=float)
    for ax in axes:
        i = "xyz".index(ax)
        e = np.eye(3)[i]
        pos += [c + amplitude * e, c.copy()]
        vel += [np.zeros(3), amplitude * trap.omega[i] * e]
    return Ensemble(np.array(pos), np.array(vel), spin, species)


def harmonic_energies(ens: Ensemble, trap: HarmonicTrap) -> np.ndarray:
    """Per-particle, per-axis energies (N, 3) in the harmonic approximation (J)."""
    m = ens.species.mass
    w = np.asarray(trap.omega)
    d = ens.positions - np.asarray(trap.center)
    return 0.5 * m * ens.velocities ** 2 + 0.5 * m * (w * d) ** 2


def fsum_mean(values) -> float:
    """Order-independent mean (compensated summation)."""
    values = np.ravel(values)
    return math.fsum(values.tolist()) / len(values) if len(values) else float("nan")


# -- time-dependent drives ----------------------------------------------------

class PiecewiseLinear:
    """Piecewise-linear function of time, constant beyond the end points."""

    def __init__(self, times: Sequence[float], values: Sequence[float]):
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape or len(self.times) < 1:
            raise ValueError("times and values must be equal-length 1D sequences")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("breakpoint times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    def __call__(self, t, rows=None):
        return np.interp(t, self.times, self.values)


@dataclass
class Channel:
    """A source whose field is scaled by current(t) / nominal_current.

    ``current`` is either a constant (A) or a callable ``current(t, rows)``
    returning amperes for time(s) ``t``; ``rows`` identifies the integrated
    rows when a drive differs between rows (frequency scans).
    """

    source: object
    current: Callable | float
    nominal_current: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.nominal_current is None:
            self.nominal_current = float(getattr(self.source, "drive_current", 1.0))
        if not self.label:
            self.label = getattr(self.source, "label", "channel")

    @property
    def constant(self) -> bool:
        return not callable(self.current)

    def scale(self, t, rows=None):
        if self.constant:
            return float(self.current) / self.nominal_current
        return np.asarray(self.current(t, rows), dtype=float) / self.nominal_current


@dataclass(frozen=True)
class RampSchedule:
    """Named piecewise-linear current ramps (A) over ``duration`` (s)."""

    channels: tuple            # (label, times, currents) triples
    duration: float

    def __post_init__(self):
        chans = tuple((str(l), tuple(map(float, t)), tuple(map(float, c))) for l, t, c in self.channels)
        for label, t, c in chans:
            PiecewiseLinear(t, c)            # validates
        object.__setattr__(self, "channels", chans)
        if not self.duration > 0:
            raise ValueError("duration must be positive")

    def currents(self) -> dict:
        return {label: PiecewiseLinear(t, c) for label, t, c in self.channels}

    def drive(self, sources: dict, static=None) -> "Drive":
        """Bind channel labels to field sources."""
        missing = [l for l, _, _ in self.channels if l not in sources]
        if missing:
            raise KeyError(f"no source for schedule channel(s) {missing}")
        return Drive([Channel(sources[l], f, label=l) for l, f in self.currents().items()], static)


def field_and_jacobian(source, points: np.ndarray):
    """B (M, 3) and dB_i/dx_j (M, 3, 3); analytic when the source provides it."""
    if hasattr(source, "jacobian") and not isinstance(source, ConductorAssembly):
        return evaluate(source, points), source.jacobian(points)
    if isinstance(source, CompositeField):
        B = np.zeros_like(points)
        J = np.zeros((len(points), 3, 3))
        for src, s in zip(source.sources, source.scales):
            if s != 0.0:
                b, j = field_and_jacobian(src, points)
                B += s * b
                J += s * j
        return B, J
    h = FD_STEP
    M = len(points)
    offs = np.concatenate([np.eye(3) * h, -np.eye(3) * h])
    allp = np.concatenate([points, (points[:, None, :] + offs[None]).reshape(-1, 3)])
    vals = evaluate(source, allp)
    B = vals[:M]
    S = vals[M:].reshape(M, 6, 3)
    J = np.transpose((S[:, :3] - S[:, 3:]) / (2 * h), (0, 2, 1))
    return B, J


class Drive:
    """B(x, t) = B_static(x) + sum_k s_k(t) B_k(x)."""

    _DT = 1e-9        # time step for the numerical derivative of the channel scales (s)

    def __init__(self, channels: Sequence[Channel], static=None):
        self.channels = list(channels)
        self.static = static
        fixed = [(ch.source, ch.scale(0.0)) for ch in self.channels if ch.constant]
        if static is not None:
            fixed.append((static, 1.0))
        self._fixed = fixed
        self._varying = [ch for ch in self.channels if not ch.constant]

    def _scales(self, ch, t, rows, n):
        s = ch.scale(t, rows)
        return s if np.ndim(s) == 0 else np.broadcast_to(s, (n,))[:, None]

    def field_jac(self, x, t, rows=None):
        """B, dB_i/dx_j and the explicit time derivative dB/dt at (x, t)."""
        n = len(x)
        B = np.zeros_like(x)
        J = np.zeros((n, 3, 3))
        dBdt = np.zeros_like(x)
        for src, s in self._fixed:
            b, j = field_and_jacobian(src, x)
            B += s * b
            J += s * j
        for ch in self._varying:
            s = self._scales(ch, t, rows, n)
            b, j = field_and_jacobian(ch.source, x)
            B += s * b
            J += (s[..., None] if np.ndim(s) else s) * j
            sdot = (self._scales(ch, t + self._DT, rows, n) - self._scales(ch, t - self._DT, rows, n)) / (2 * self._DT)
            dBdt += sdot * b
        return B, J, dBdt

    def magnitude(self, x, t, rows=None):
        B = np.zeros_like(x)
        for src, s in self._fixed:
            B += s * evaluate(src, x)
        for ch in self._varying:
            B += self._scales(ch, t, rows, len(x)) * evaluate(ch.source, x)
        return np.sqrt(np.sum(B * B, axis=1))


def static_drive(source, bias=None) -> Drive:
    return Drive([Channel(source, 1.0, 1.0)], bias)


# -- integrator ---------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray                 # (K,) or (K, N)
    positions: np.ndarray             # (K, N, 3)
    velocities: np.ndarray            # (K, N, 3)
    energies: np.ndarray              # (K, N) total energy (J)
    escaped: np.ndarray               # (N,) bool
    exit_time: np.ndarray             # (N,) s, nan if not escaped
    spin_flagged: np.ndarray          # (N,) bool
    warnings: list = dc_field(default_factory=list)
    final_positions: np.ndarray | None = None
    final_velocities: np.ndarray | None = None


def _accel(drive, x, v, t, rows, coef, moment):
    B, J, dBdt = drive.field_jac(x, t, rows)
    bmag = np.sqrt(np.sum(B * B, axis=1))
    safe = np.where(bmag > 0, bmag, 1.0)
    bhat = B / safe[:, None]
    a = (-coef) * np.sum(J * bhat[:, :, None], axis=1)          # -(mu/m) J^T B_hat
    # rate of change of the field direction seen by the moving atom
    dB = np.sum(J * v[:, None, :], axis=2) + dBdt
    dperp = dB - np.sum(dB * bhat, axis=1)[:, None] * bhat
    turn = np.sqrt(np.sum(dperp * dperp, axis=1)) / safe
    return a, bmag, turn, bhat


def run_ensemble(drive: Drive, x0, v0, dt, steps, spin: SpinState = LI7_22, species: Species = LI7,
                 t0=0.0, box=None, b_floor: float = B_FLOOR, adiabatic_ratio: float = 0.1,
                 record_every: int = 0) -> Trajectory:
    """Integrate rows of (x, v) with per-row ``dt`` and ``steps``.

    ``box`` is ((xmin, ymin, zmin), (xmax, ymax, zmax)); particles leaving it
    are frozen and marked escaped.  With ``record_every`` > 0 the state of all
    rows is stored every that many steps (plus the initial state).
    """
    x = np.array(x0, dtype=float).reshape(-1, 3)
    v = np.array(v0, dtype=float).reshape(-1, 3)
    N = len(x)
    dt = np.broadcast_to(np.asarray(dt, dtype=float), (N,)).copy()
    steps = np.broadcast_to(np.asarray(steps, dtype=int), (N,)).copy()
    t = np.full(N, float(t0))
    moment = spin.mu_factor * MU_B
    coef = moment / species.mass
    gyro = abs(spin.gF) * MU_B / HBAR
    escaped = np.zeros(N, bool)
    exit_time = np.full(N, np.nan)
    flagged = np.zeros(N, bool)
    lo = hi = None
    if box is not None:
        lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)

    rec_t, rec_x, rec_v, rec_e = [], [], [], []

    def record():
        bm = drive.magnitude(x, t)
        rec_t.append(t.copy())
        rec_x.append(x.copy())
        rec_v.append(v.copy())
        rec_e.append(0.5 * species.mass * np.sum(v * v, axis=1) + moment * bm)

    if record_every:
        record()
    n_max = int(steps.max()) if N else 0
    all_rows = np.arange(N)
    for n in range(n_max):
        active = (n < steps) & ~escaped
        if not active.any():
            break
        rows = all_rows if active.all() else np.flatnonzero(active)
        xa, va, ta = x[rows], v[rows], t[rows]
        h = dt[rows]
        hc = h[:, None]
        a1, b1, r1, u1 = _accel(drive, xa, va, ta, rows, coef, moment)
        x2, v2 = xa + 0.5 * hc * va, va + 0.5 * hc * a1
        a2, b2, r2, u2 = _accel(drive, x2, v2, ta + 0.5 * h, rows, coef, moment)
        x3, v3 = xa + 0.5 * hc * v2, va + 0.5 * hc * a2
        a3, b3, r3, u3 = _accel(drive, x3, v3, ta + 0.5 * h, rows, coef, moment)
        x4, v4 = xa + hc * v3, va + hc * a3
        a4, b4, r4, u4 = _accel(drive, x4, v4, ta + h, rows, coef, moment)
        x[rows] = xa + hc / 6 * (va + 2 * v2 + 2 * v3 + v4)
        v[rows] = va + hc / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        t[rows] = ta + h
        bmin = np.minimum(np.minimum(b1, b2), np.minimum(b3, b4))
        turn = np.maximum(np.maximum(r1, r2), np.maximum(r3, r4))
        # finite rotation of the field direction across the step (catches sign flips
        # of collinear fields, which the instantaneous rate above cannot see)
        cosang = np.clip(np.sum(u1 * u4, axis=1), -1.0, 1.0)
        turn = np.maximum(turn, np.arccos(cosang) / h)
        bad = (bmin < b_floor) | (turn > adiabatic_ratio * gyro * np.maximum(bmin, 1e-300))
        flagged[rows] |= bad
        if lo is not None:
            out = np.any((x[rows] < lo) | (x[rows] > hi), axis=1)
            if out.any():
                r = rows[out]
                escaped[r] = True
                exit_time[r] = t[r]
        if record_every and (n + 1) % record_every == 0:
            record()
    notes = []
    if flagged.any():
        notes.append(f"{int(flagged.sum())} particle(s) entered a region of non-adiabatic spin following "
                     f"(|B| < {b_floor:g} T or field rotation faster than {adiabatic_ratio:g} x Larmor)")
        warnings.warn(notes[-1], MajoranaWarning, stacklevel=2)
    if record_every:
        traj = Trajectory(np.array(rec_t), np.array(rec_x), np.array(rec_v), np.array(rec_e),
                          escaped, exit_time, flagged, notes)
    else:
        empty = np.zeros((0, N, 3))
        traj = Trajectory(np.zeros((0, N)), empty, empty, np.zeros((0, N)), escaped, exit_time, flagged, notes)
    traj.final_positions, traj.final_velocities = x, v
    return traj


def integrate(particles, drive, dt: float, t_end: float, spin: SpinState | None = None,
              species: Species | None = None, box=None, record_every: int = 1, **kw) -> Trajectory:
    """Integrate a particle (or ensemble) from t = 0 to ``t_end`` with step ``dt``.

    ``drive`` may be a :class:`Drive` or any static field source.  Energy
    E = m v^2 / 2 + mF gF muB |B| is recorded every ``record_every`` steps.
    """
    if isinstance(particles, ParticleState):
        particles = Ensemble([particles.position], [particles.velocity], particles.spin, particles.species)
    spin = particles.spin if spin is None else spin
    species = particles.species if species is None else species
    if not isinstance(drive, Drive):
        drive = static_drive(drive)
    steps = int(round(t_end / dt))
    if steps < 1 or abs(steps * dt - t_end) > 1e-9 * max(t_end, dt):
        steps = max(1, int(math.ceil(t_end / dt)))
        dt = t_end / steps
    return run_ensemble(drive, particles.positions, particles.velocities, dt, steps, spin, species,
                        box=box, record_every=record_every, **kw)


def default_dt(omega_max: float) -> float:
    """One two-hundredth of the fastest oscillation period."""
    return 2 * math.pi / omega_max / 200


# -- semi-adiabatic transfer ---------------------------------------------------

@dataclass
class TransferResult:
    capture_fraction: float
    spin_flagged_fraction: float
    escaped_fraction: float
    mean_energy_before: float          # J, harmonic per-particle total in the source trap
    mean_energy_after: float           # J, in the final trap
    axis_energy_before: tuple          # per-axis means (J)
    axis_energy_after: tuple
    adiabatic_prediction: tuple        # per-axis E_i * w_f / w_i (J)
    adiabaticity: dict                 # axis -> ramp duration / final oscillation period

    @property
    def energy_ratio_vs_adiabatic(self) -> tuple:
        return tuple(a / p for a, p in zip(self.axis_energy_after, self.adiabatic_prediction))

    @property
    def radial_energy_growth(self) -> float:
        """Mean radial energy relative to the adiabatic-invariant prediction, minus one."""
        return (self.axis_energy_after[0] + self.axis_energy_after[1]) / (
            self.adiabatic_prediction[0] + self.adiabatic_prediction[1]) - 1.0


def simulate_transfer(sample: Ensemble, drive: Drive, ramp_duration: float, source_trap: HarmonicTrap,
                      final_trap: HarmonicTrap, dt: float | None = None, hold: float = 0.0,
                      box=None, adiabatic_ratio: float = 0.1) -> TransferResult:
    """Carry a thermal sample through a current ramp into the final trap.

    A particle is captured when its final energy above the trap bottom is
    below the final trap depth, it stayed inside ``box`` and its spin
    followed the field adiabatically throughout.
    """
    if len(sample) < 100:
        raise ValueError("transfer statistics need at least 100 particles")
    dt = default_dt(max(final_trap.omega)) if dt is None else dt
    total = ramp_duration + hold
    steps = max(1, int(math.ceil(total / dt)))
    traj = run_ensemble(drive, sample.positions, sample.velocities, total / steps, steps,
                        sample.spin, sample.species, box=box, adiabatic_ratio=adiabatic_ratio)
    after = Ensemble(traj.final_positions, traj.final_velocities, sample.spin, sample.species)
    m = sample.species.mass
    kinetic = 0.5 * m * np.sum(after.velocities ** 2, axis=1)
    bmag = drive.magnitude(after.positions, np.full(len(after), total))
    e_final = kinetic + sample.moment * (bmag - final_trap.B0)
    ok = ~traj.escaped & ~traj.spin_flagged
    captured = ok & (e_final < sample.moment * final_trap.depth)
    e_before = harmonic_energies(sample, source_trap)
    e_after = harmonic_energies(after, final_trap)
    sel = ok if ok.any() else np.ones(len(sample), bool)
    ax_before = tuple(fsum_mean(e_before[:, i]) for i in range(3))
    ax_after = tuple(fsum_mean(e_after[sel, i]) for i in range(3))
    pred = tuple(b * wf / wi for b, wf, wi in zip(ax_before, final_trap.omega, source_trap.omega))
    adiab = {ax: ramp_duration * w / (2 * math.pi) for ax, w in zip("xyz", final_trap.omega)}
    return TransferResult(
        capture_fraction=float(captured.mean()), spin_flagged_fraction=float(traj.spin_flagged.mean()),
        escaped_fraction=float(traj.escaped.mean()),
        mean_energy_before=sum(ax_before), mean_energy_after=sum(ax_after),
        axis_energy_before=ax_before, axis_energy_after=ax_after, adiabatic_prediction=pred,
        adiabaticity=adiab)


# -- parametric heating --------------------------------------------------------

@dataclass(frozen=True)
class ModulationSpec:
    """I(t) = dc_current + ac_amplitude sin(w t) for ``duration`` seconds."""

    dc_current: float = 100.0
    ac_amplitude: float = 3.0
    duration: float = 10.0

    def __post_init__(self):
        if not abs(self.ac_amplitude) < abs(self.dc_current):
            raise ValueError("ac_amplitude must be smaller than dc_current")
        if not self.duration > 0:
            raise ValueError("duration must be positive")


@dataclass
class HeatingCurve:
    freq_Hz: np.ndarray
    energy_gain: np.ndarray            # <E_f>/<E_i> - 1, energies above the trap bottom

    def rows(self):
        return zip(self.freq_Hz, self.energy_gain)

    def background(self) -> float:
        return float(np.median(np.abs(self.energy_gain)))


def parametric_scan(source, frequencies_Hz, probe: Ensemble, spec: ModulationSpec = ModulationSpec(),
                    static=None, trap_bottom: float | None = None, dt: float | None = None,
                    nominal_current: float | None = None, whole_cycles: bool = True) -> HeatingCurve:
    """Mean relative energy gain of ``probe`` versus modulation frequency.

    The trap source is scaled by I(t)/I_nominal with
    I(t) = I_dc + I_ac sin(w t); ``static`` (e.g. a bias) is left unmodulated.
    With ``whole_cycles`` the drive time is rounded to an integer number of
    modulation periods, so the trap is back at its DC strength when the
    energy is measured and no adiabatic ripple is mistaken for heating.
    Energies are measured from ``trap_bottom`` (|B| at the minimum of the DC
    trap, T; found automatically when omitted).
    """
    from .trap import find_minimum, harmonic_analysis  # local import: trap imports nothing from here

    freqs = np.asarray(frequencies_Hz, dtype=float).ravel()
    if np.any(freqs <= 0):
        raise ValueError("modulation frequencies must be positive")
    nominal = float(getattr(source, "drive_current", 1.0)) if nominal_current is None else nominal_current
    dc_scale = spec.dc_current / nominal
    dc_trap = Drive([Channel(source, spec.dc_current, nominal)], static)
    seed = np.mean(probe.positions, axis=0)
    if trap_bottom is None or dt is None:
        src = CompositeField([source] + ([static] if static is not None else []),
                             [dc_scale] + ([1.0] if static is not None else []))
        mn = find_minimum(src, seed=seed)
        if trap_bottom is None:
            trap_bottom = mn.B0
        if dt is None:
            _, omegas, _, _ = harmonic_analysis(src, (0, 0, 0), mn, probe.spin, probe.species)
            dt = default_dt(max(omegas))
    n_p = len(probe)
    omega = 2 * math.pi * freqs
    if whole_cycles:
        cycles = np.maximum(1, np.round(spec.duration * freqs))
        t_row = cycles / freqs
    else:
        t_row = np.full_like(freqs, spec.duration)
    steps_f = np.ceil(t_row / dt - 1e-9).astype(int)
    dt_f = t_row / steps_f
    row_omega = np.repeat(omega, n_p)

    def current(t, rows=None):
        w = row_omega if rows is None else row_omega[rows]
        return spec.dc_current + spec.ac_amplitude * np.sin(w * t)

    drive = Drive([Channel(source, current, nominal)], static)
    x0 = np.tile(probe.positions, (len(freqs), 1))
    v0 = np.tile(probe.velocities, (len(freqs), 1))
    m = probe.species.mass

    def energy(x, v):
        b = dc_trap.magnitude(x, np.zeros(len(x)))
        return 0.5 * m * np.sum(v * v, axis=1) + probe.moment * (b - trap_bottom)

    e0 = energy(probe.positions, probe.velocities)
    e0_mean = fsum_mean(e0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MajoranaWarning)
        traj = run_ensemble(drive, x0, v0, np.repeat(dt_f, n_p), np.repeat(steps_f, n_p),
                            probe.spin, probe.species)
    ef = energy(traj.final_positions, traj.final_velocities).reshape(len(freqs), n_p)
    gain = np.array([fsum_mean(row) / e0_mean - 1.0 for row in ef])
    return HeatingCurve(freqs, gain)


def find_resonances(curve: HeatingCurve, min_ratio: float = 5.0, separation: float = 0.05) -> list:
    """Frequencies (Hz) of gain peaks exceeding ``min_ratio`` x background.

    Local maxima within a relative ``separation`` of a stronger peak (side
    lobes of a finite-duration drive) are dropped.
    """
    g = curve.energy_gain
    f = curve.freq_Hz
    bg = max(curve.background(), 1e-300)
    cand = []
    for i in range(len(g)):
        left = g[i - 1] if i > 0 else -np.inf
        right = g[i + 1] if i + 1 < len(g) else -np.inf
        if g[i] >= left and g[i] > right and g[i] > min_ratio * bg:
            cand.append(i)
    keep = []
    for i in sorted(cand, key=lambda k: -g[k]):
        if all(abs(f[i] - f[j]) > separation * f[j] for j in keep):
            keep.append(i)
    return sorted(float(f[i]) for i in keep)
