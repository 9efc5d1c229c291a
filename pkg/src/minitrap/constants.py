"""Physical constants, unit conversions and species data.

Everything inside the package is SI (m, T, A, s, kg, K).  The helpers here
convert to and from the laboratory units used in reports and CSV files
(cm, G, MHz, uK).
"""
from __future__ import annotations

from dataclasses import dataclass

from scipy import constants as _sc
from scipy.special import zeta

MU0 = _sc.mu_0
MU_B = _sc.physical_constants["Bohr magneton"][0]
H = _sc.h
HBAR = _sc.hbar
KB = _sc.k
AMU = _sc.atomic_mass

#: Bose-Einstein threshold of the peak phase-space density n0 lambda^3,
#: zeta(3/2) = 2.612.  (zeta(3) = 1.202 is the coefficient of the critical
#: atom number N_c = zeta(3) (kB T / hbar w)^3 in a harmonic trap.)
D_CRIT = float(zeta(1.5))
ZETA3 = float(zeta(3.0))

#: Resistivity of copper at 20 C (Ohm m).
RHO_CU = 1.7e-8

# -- unit conversions ---------------------------------------------------------
G_PER_T = 1.0e4
GCM_PER_TM = 100.0          # 1 T/m = 100 G/cm
GCM2_PER_TM2 = 1.0          # 1 T/m^2 = 1 G/cm^2
CM = 1.0e-2
MM = 1.0e-3
UM = 1.0e-6
MHZ = 1.0e6
UK = 1.0e-6


def gauss(b_tesla):
    """Tesla -> gauss."""
    return b_tesla * G_PER_T


def tesla(b_gauss):
    """Gauss -> tesla."""
    return b_gauss / G_PER_T


@dataclass(frozen=True)
class Species:
    """Atomic species data.

    Attributes:
        name: Label used in reports.
        mass: Atomic mass (kg).
        nu_hfs: Ground-state hyperfine splitting (Hz).
        scattering_length: s-wave scattering length (m).  Negative for
            attractive interactions.
    """

    name: str
    mass: float
    nu_hfs: float
    scattering_length: float

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("Species.mass must be positive")
        if not self.nu_hfs > 0:
            raise ValueError("Species.nu_hfs must be positive")


#: Lithium-7 defaults: mass, 803.5 MHz hyperfine interval and the
#: literature triplet scattering length (about -27 a0).
LI7 = Species(name="Li-7", mass=1.16503e-26, nu_hfs=803.5e6,
              scattering_length=-1.46e-9)


@dataclass(frozen=True)
class SpinState:
    """A hyperfine Zeeman sublevel |F, mF> with Lande factor gF."""

    F: int
    mF: int
    gF: float

    def __post_init__(self):
        if abs(self.mF) > self.F:
            raise ValueError(f"|mF| = {abs(self.mF)} exceeds F = {self.F}")

    @property
    def mu_factor(self) -> float:
        """mF * gF, the dimensionless magnetic moment along B."""
        return self.mF * self.gF

    @property
    def trapped(self) -> bool:
        """Low-field seekers (mF gF > 0) are magnetically trappable."""
        return self.mu_factor > 0

    def label(self) -> str:
        return f"|{self.F},{self.mF}>"


def li7_state(F: int, mF: int) -> SpinState:
    """Ground-state 7Li sublevel in the linear Zeeman regime.

    gF = +1/2 for F = 2 and -1/2 for F = 1.
    """
    if F == 2:
        return SpinState(2, mF, 0.5)
    if F == 1:
        return SpinState(1, mF, -0.5)
    raise ValueError(f"7Li ground manifold has F in {{1, 2}}, got {F}")


LI7_22 = li7_state(2, 2)
LI7_11 = li7_state(1, 1)
LI7_1m1 = li7_state(1, -1)
LI7_10 = li7_state(1, 0)
