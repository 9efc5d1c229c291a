"""Forced RF evaporation in a harmonic trap.

A two-variable kinetic model for atom number N and temperature T of a
truncated Boltzmann gas:

    dN/dt = -G_ev N - N / tau - G_dd <n> N
    dT/dt = -G_ev (eta + kappa - 3) T / 3
    G_ev  = G_el (eta - 4) exp(-eta)

Each evaporated atom carries away (eta + kappa) kB T while the mean energy
per atom in a 3D harmonic trap is 3 kB T; background and dipolar losses are
taken as energy neutral.  eta is recomputed at every stage from the
instantaneous RF frequency and temperature.  The rate law is only sensible
for eta well above 4: below 4 it is clamped to zero evaporation, and any
eta < 4.5 encountered is reported as a model-validity warning.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .constants import H, HBAR, KB, LI7, LI7_11, LI7_22, D_CRIT, Species, SpinState
from .errors import ModelValidityWarning
from .trap import rf_cut_frequency

ETA_WARN = 4.5
N_FLOOR = 100.0
K_C = 0.575                 # condensate stability coefficient
G_DD = 2e-20                # two-body dipolar rate constant (m^3/s); see README for the choice

# Default sweep: RF values of the published absorption-image snapshots, at
# breakpoint times of our own choosing (the published sweep timing is not given).
DEFAULT_SWEEP_TIMES = (0.0, 10.0, 20.0, 28.0, 35.0)          # s
DEFAULT_SWEEP_FREQS = (980e6, 816e6, 808e6, 805.4e6, 804.48e6)  # Hz
DEFAULT_T0 = 1.0e-3         # K, cloud temperature at the start of the sweep

# background lifetime (s) versus trap current (A)
LIFETIME_TABLE = ((78.0, 87.0), (100.0, 68.0), (120.0, 54.0), (135.0, 30.0), (148.0, 15.0))


# -- thermodynamics of a harmonic gas -----------------------------------------

def omega_bar(omega) -> float:
    w = np.asarray(omega, dtype=float)
    return float(np.prod(w) ** (1.0 / 3.0))


def de_broglie(T: float, species: Species = LI7) -> float:
    """Thermal de Broglie wavelength sqrt(2 pi hbar^2 / (m kB T)) (m)."""
    return math.sqrt(2 * math.pi * HBAR ** 2 / (species.mass * KB * T))


def peak_density(N: float, T: float, wbar: float, species: Species = LI7) -> float:
    """n0 = N wbar^3 (m / (2 pi kB T))^(3/2) (m^-3)."""
    return N * wbar ** 3 * (species.mass / (2 * math.pi * KB * T)) ** 1.5


def phase_space_density(N: float, T: float, wbar: float, species: Species = LI7) -> float:
    """D = n0 lambda^3."""
    return peak_density(N, T, wbar, species) * de_broglie(T, species) ** 3


def phase_space_density_direct(N: float, T: float, wbar: float) -> float:
    """D = N (hbar wbar / kB T)^3 -- the same quantity without n0 and lambda."""
    return N * (HBAR * wbar / (KB * T)) ** 3


def sigma_eff(T: float, species: Species = LI7) -> float:
    """s-wave cross-section 8 pi a^2 / (1 + k^2 a^2) at thermal momentum k^2 = m kB T / hbar^2."""
    a = species.scattering_length
    return 8 * math.pi * a * a / (1.0 + species.mass * KB * T * a * a / HBAR ** 2)


def mean_speed(T: float, species: Species = LI7) -> float:
    return math.sqrt(8 * KB * T / (math.pi * species.mass))


def elastic_rate(N: float, T: float, wbar: float, species: Species = LI7) -> float:
    """G_el = n0 sigma_eff v_bar / sqrt(2) (1/s)."""
    return peak_density(N, T, wbar, species) * sigma_eff(T, species) * mean_speed(T, species) / math.sqrt(2)


@dataclass(frozen=True)
class EvapTrap:
    """What the kinetics needs from a trap: bottom field B0 (T) and (w_x, w_y, w_z) (rad/s)."""

    B0: float
    omega: tuple

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        if self.B0 < 0 or len(self.omega) != 3 or min(self.omega) <= 0:
            raise ValueError("need B0 >= 0 and three positive trap frequencies")

    @classmethod
    def from_report(cls, report) -> "EvapTrap":
        return cls(report.B0, tuple(report.omega))

    @property
    def omega_bar(self) -> float:
        return omega_bar(self.omega)


@dataclass(frozen=True)
class EnsembleState:
    N: float
    T: float
    t: float = 0.0

    def __post_init__(self):
        if not (self.N >= 0 and math.isfinite(self.N)):
            raise ValueError(f"atom number must be finite and >= 0, got {self.N}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError(f"temperature must be finite and > 0, got {self.T}")

    def n0(self, trap: EvapTrap, species: Species = LI7) -> float:
        return peak_density(self.N, self.T, trap.omega_bar, species)

    def wavelength(self, species: Species = LI7) -> float:
        return de_broglie(self.T, species)

    def D(self, trap: EvapTrap, species: Species = LI7) -> float:
        return phase_space_density(self.N, self.T, trap.omega_bar, species)

    def gamma_el(self, trap: EvapTrap, species: Species = LI7) -> float:
        return elastic_rate(self.N, self.T, trap.omega_bar, species)


def efficiency(N_i: float, D_i: float, N_f: float, D_f: float) -> float:
    """gamma = log(D_f / D_i) / log(N_i / N_f); nan when no atoms were lost."""
    if N_f >= N_i:
        return float("nan")
    return math.log(D_f / D_i) / math.log(N_i / N_f)


# -- RF knife ------------------------------------------------------------------

def cut_energy(nu_rf: float, B0: float, spin: SpinState = LI7_22, final: SpinState = LI7_11,
               species: Species = LI7) -> float:
    """Energy above the trap bottom (J) of a trapped atom resonant with ``nu_rf``; 0 below the bottom."""
    slope = spin.mu_factor - final.mu_factor
    de = H * (nu_rf - rf_cut_frequency(B0, spin, final, species)) * spin.mu_factor / slope
    return max(de, 0.0)


def truncation_parameter(nu_rf: float, trap: EvapTrap, T: float, spin: SpinState = LI7_22,
                         final: SpinState = LI7_11, species: Species = LI7) -> float:
    """eta = eps_cut / (kB T); 0 when the knife sits below the trap bottom (all atoms ejected)."""
    return cut_energy(nu_rf, trap.B0, spin, final, species) / (KB * T)


def rf_for_eta(eta: float, T: float, trap: EvapTrap, spin: SpinState = LI7_22,
               final: SpinState = LI7_11, species: Species = LI7) -> float:
    """RF frequency (Hz) placing the knife at eta kB T above the bottom."""
    slope = spin.mu_factor - final.mu_factor
    return rf_cut_frequency(trap.B0, spin, final, species) + eta * KB * T * slope / (spin.mu_factor * H)


# -- schedule and losses -------------------------------------------------------

@dataclass(frozen=True)
class EvapSchedule:
    """Piecewise-linear RF frequency nu(t) (Hz) through ``(times, freqs)`` breakpoints."""

    times: tuple
    freqs: tuple
    nu_floor: float = LI7.nu_hfs

    def __post_init__(self):
        t = tuple(float(x) for x in self.times)
        f = tuple(float(x) for x in self.freqs)
        if len(t) < 2 or len(t) != len(f):
            raise ValueError("schedule needs >= 2 breakpoints with one frequency each")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("schedule times must be strictly increasing")
        if not all(math.isfinite(x) for x in f) or min(f) < self.nu_floor:
            raise ValueError(f"RF frequencies must be >= the hyperfine splitting ({self.nu_floor / 1e6:g} MHz)")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "freqs", f)

    @property
    def duration(self) -> float:
        return self.times[-1] - self.times[0]

    def __call__(self, t) -> float:
        return float(np.interp(t, self.times, self.freqs))

    @classmethod
    def reference_default(cls) -> "EvapSchedule":
        return cls(DEFAULT_SWEEP_TIMES, DEFAULT_SWEEP_FREQS)

    @classmethod
    def linear(cls, nu_start: float, nu_end: float, duration: float) -> "EvapSchedule":
        return cls((0.0, duration), (nu_start, nu_end))


def lifetime_for_current(current: float) -> float:
    """Background lifetime (s) interpolated (linearly, clamped) from the measured table."""
    I, tau = zip(*LIFETIME_TABLE)
    return float(np.interp(current, I, tau))


@dataclass(frozen=True)
class LossModel:
    tau: float = 68.0               # background lifetime (s)
    G_dd: float = G_DD              # dipolar rate constant (m^3/s)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("background lifetime must be positive")
        if not self.G_dd >= 0:
            raise ValueError("dipolar rate constant must be non-negative")

    @classmethod
    def for_current(cls, current: float, G_dd: float = G_DD) -> "LossModel":
        return cls(lifetime_for_current(current), G_dd)


# -- kinetics ------------------------------------------------------------------

def evaporation_rate(gamma_el: float, eta: float) -> float:
    """G_ev = G_el (eta - 4) e^-eta, clamped to 0 for eta <= 4."""
    if eta <= 4.0 or eta > 700.0:
        return 0.0
    return gamma_el * (eta - 4.0) * math.exp(-eta)


def rates(N: float, T: float, eta: float, trap: EvapTrap, loss: LossModel, species: Species = LI7,
          kappa: float = 1.0):
    """(dN/dt, dT/dt) for the kinetic model."""
    if N <= 0:
        return 0.0, 0.0
    wbar = trap.omega_bar
    g_ev = evaporation_rate(elastic_rate(N, T, wbar, species), eta)
    n_mean = peak_density(N, T, wbar, species) / math.sqrt(8.0)
    dN = -g_ev * N - N / loss.tau - loss.G_dd * n_mean * N
    dT = -g_ev * (eta + kappa - 3.0) * T / 3.0 if g_ev > 0 else 0.0
    return dN, dT


def _rk4(N, T, t, dt, eta_of, trap, loss, species, kappa):
    def f(n, temp, tt):
        return rates(max(n, 0.0), max(temp, 1e-30), eta_of(tt, max(temp, 1e-30)), trap, loss, species, kappa)
    k1 = f(N, T, t)
    k2 = f(N + 0.5 * dt * k1[0], T + 0.5 * dt * k1[1], t + 0.5 * dt)
    k3 = f(N + 0.5 * dt * k2[0], T + 0.5 * dt * k2[1], t + 0.5 * dt)
    k4 = f(N + dt * k3[0], T + dt * k3[1], t + dt)
    N1 = N + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    T1 = T + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return max(N1, 0.0), T1


def step(state: EnsembleState, eta: float, loss: LossModel, dt: float, trap: EvapTrap,
         species: Species = LI7, kappa: float = 1.0) -> EnsembleState:
    """One RK4 step at fixed truncation parameter ``eta``."""
    if eta < ETA_WARN:
        warnings.warn(f"eta = {eta:.3g} < {ETA_WARN}: truncated-Boltzmann rates are inaccurate",
                      ModelValidityWarning, stacklevel=2)
    N, T = _rk4(state.N, state.T, state.t, dt, lambda t, T: eta, trap, loss, species, kappa)
    return EnsembleState(N, T, state.t + dt)


@dataclass
class SweepResult:
    rows: list                      # (t, nu, N, T, n0, D, G_el, gamma_cum)
    threshold_time: float | None
    threshold_state: EnsembleState | None
    segment_gamma: list             # gamma between consecutive schedule breakpoints reached
    terminated: bool
    warnings: list = dc_field(default_factory=list)

    HEADER = ("t_s", "nu_MHz", "N", "T_uK", "n0_percm3", "D", "gamma_cum")

    @property
    def final(self) -> EnsembleState:
        r = self.rows[-1]
        return EnsembleState(r[2], r[3], r[0])

    def column(self, name: str) -> np.ndarray:
        i = ("t", "nu", "N", "T", "n0", "D", "gamma_el", "gamma_cum").index(name)
        return np.array([r[i] for r in self.rows])

    def gamma_between(self, t_a: float, t_b: float) -> float:
        """Efficiency between the recorded rows nearest to ``t_a`` and ``t_b``."""
        t = self.column("t")
        a, b = int(np.argmin(abs(t - t_a))), int(np.argmin(abs(t - t_b)))
        ra, rb = self.rows[a], self.rows[b]
        return efficiency(ra[2], ra[5], rb[2], rb[5])

    def csv_rows(self):
        for t, nu, N, T, n0, D, _, g in self.rows:
            yield (f"{t:.9g}", f"{nu / 1e6:.9g}", f"{N:.9g}", f"{T * 1e6:.9g}", f"{n0 * 1e-6:.9g}",
                   f"{D:.9g}", f"{g:.9g}")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            w.writerows(self.csv_rows())


def run_sweep(initial: EnsembleState, schedule: EvapSchedule, trap: EvapTrap, loss: LossModel = LossModel(),
              spin: SpinState = LI7_22, final: SpinState = LI7_11, species: Species = LI7,
              dt: float = 0.01, kappa: float = 1.0, n_floor: float = N_FLOOR,
              stop_at_threshold: bool = True, record_every: int = 10) -> SweepResult:
    """Integrate the kinetics along the RF schedule (time measured from ``initial.t``).

    A knife at or below the trap bottom ejects every atom and terminates
    the run.  The threshold crossing D = zeta(3/2) = 2.612 is located by bisection on the last
    step to 1e-3 relative in time.  With ``stop_at_threshold`` the run ends
    there; otherwise it continues to the end of the schedule.
    """
    t0 = schedule.times[0]
    wbar = trap.omega_bar
    eta_min = [math.inf, None]

    def eta_of(t, T):
        eta = truncation_parameter(schedule(t), trap, T, spin, final, species)
        if eta < eta_min[0]:
            eta_min[0], eta_min[1] = eta, t
        return eta

    def row(t, N, T):
        D = phase_space_density(N, T, wbar, species) if N > 0 else 0.0
        g = efficiency(initial.N, D0, N, D) if N > 0 else float("nan")
        return (t, schedule(t), N, T, peak_density(N, T, wbar, species), D,
                elastic_rate(N, T, wbar, species), g)

    D0 = phase_space_density(initial.N, initial.T, wbar, species)
    n_steps = max(1, int(math.ceil(schedule.duration / dt - 1e-9)))
    h = schedule.duration / n_steps
    N, T, t = initial.N, initial.T, t0
    rows = [row(t, N, T)]
    t_thr, s_thr, terminated = None, None, False
    bp = list(schedule.times)
    seg_states = {bp[0]: (N, D0)}
    already = D0 >= D_CRIT
    for k in range(1, n_steps + 1):
        N1, T1 = _rk4(N, T, t, h, eta_of, trap, loss, species, kappa)
        t1 = t0 + k * h
        if cut_energy(schedule(t1), trap.B0, spin, final, species) <= 0.0:
            N1 = 0.0                     # knife at or below the trap bottom: everything is ejected
        D1 = phase_space_density(N1, T1, wbar, species) if N1 > 0 else 0.0
        if not already and D1 >= D_CRIT and t_thr is None:
            lo, hi = 0.0, h
            while hi - lo > 1e-6 * (t - t0 + h):
                mid = 0.5 * (lo + hi)
                Nm, Tm = _rk4(N, T, t, mid, eta_of, trap, loss, species, kappa)
                if phase_space_density(Nm, Tm, wbar, species) >= D_CRIT:
                    hi = mid
                else:
                    lo = mid
            Nt, Tt = _rk4(N, T, t, hi, eta_of, trap, loss, species, kappa)
            t_thr = t + hi
            s_thr = EnsembleState(Nt, Tt, t_thr)
            if stop_at_threshold:
                rows.append(row(t_thr, Nt, Tt))
                N, T, t = Nt, Tt, t_thr
                break
        N, T, t = N1, T1, t1
        for b in bp:
            if b not in seg_states and t >= b - 1e-9 * max(1.0, abs(b)):
                seg_states[b] = (N, D1)
        if N < n_floor:
            terminated = True
            rows.append(row(t, N, T) if N > 0 else (t, schedule(t), N, T, 0.0, 0.0, 0.0, float("nan")))
            break
        if k % record_every == 0 or k == n_steps:
            rows.append(row(t, N, T))
    seg_gamma = []
    reached = [b for b in bp if b in seg_states]
    for a, b in zip(reached, reached[1:]):
        (Na, Da), (Nb, Db) = seg_states[a], seg_states[b]
        seg_gamma.append(((a, b), efficiency(Na, Da, Nb, Db)))
    notes = []
    if eta_min[0] < ETA_WARN:
        notes.append(f"eta fell to {eta_min[0]:.3g} (< {ETA_WARN}) at t = {eta_min[1]:.4g} s: "
                     "truncated-Boltzmann rates are inaccurate there")
        warnings.warn(notes[-1], ModelValidityWarning, stacklevel=2)
    if terminated:
        notes.append(f"atom number fell below {n_floor:g}")
    return SweepResult(rows, t_thr, s_thr, seg_gamma, terminated, notes)


def constant_eta_trajectory(initial: EnsembleState, eta: float, duration: float, trap: EvapTrap,
                            loss: LossModel = LossModel(), species: Species = LI7, kappa: float = 1.0,
                            dt: float = 0.01) -> list:
    """(t, N, T) samples of evaporation at fixed eta."""
    n = max(1, int(math.ceil(duration / dt - 1e-9)))
    h = duration / n
    N, T, t = initial.N, initial.T, initial.t
    out = [(t, N, T)]
    for k in range(1, n + 1):
        N, T = _rk4(N, T, t, h, lambda tt, TT: eta, trap, loss, species, kappa)
        t = initial.t + k * h
        out.append((t, N, T))
        if N <= 0:
            break
    return out


# -- observables -----------------------------------------------------------------

def thermometry(sigma_axial: float, omega_axial: float, species: Species = LI7) -> float:
    """Temperature (K) from the axial rms cloud size: T = m w^2 sigma^2 / kB."""
    if not sigma_axial > 0:
        raise ValueError("cloud size must be positive")
    return species.mass * omega_axial ** 2 * sigma_axial ** 2 / KB


def cloud_size(T: float, omega_axial: float, species: Species = LI7) -> float:
    """Inverse of :func:`thermometry`."""
    return math.sqrt(KB * T / (species.mass * omega_axial ** 2))


@dataclass(frozen=True)
class BecDiagnostics:
    D: float
    at_threshold: bool
    N_max: float
    a_ho: float


def bec_diagnostics(state: EnsembleState, trap: EvapTrap, species: Species = LI7, k_c: float = K_C) -> BecDiagnostics:
    """Phase-space density, threshold flag and the attractive-interaction condensate limit.

    N_max = k_c a_ho / |a| with a_ho = sqrt(hbar / (m wbar)); unbounded (inf) for a >= 0.
    """
    a_ho = math.sqrt(HBAR / (species.mass * trap.omega_bar))
    a = species.scattering_length
    n_max = k_c * a_ho / abs(a) if a < 0 else math.inf
    D = state.D(trap, species)
    return BecDiagnostics(D, D >= D_CRIT, n_max, a_ho)
