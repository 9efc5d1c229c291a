"""Size / current-density scaling of trap figures and a resistive power audit.

For a trap whose conductors are scaled uniformly by r at current density j,
the field at fixed relative position scales as j r, so

    gradient ~ j, curvature ~ j / r, depth ~ j r, volume ~ r^3,
    current ~ j r^2, power ~ j^2 r^3, heat-sink temperature drop ~ j^2 r^2.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .constants import RHO_CU
from .errors import AuditError

# figure -> (exponent of r, exponent of j)
SCALING_EXPONENTS = {
    "gradient": (0, 1),
    "curvature": (-1, 1),
    "depth": (1, 1),
    "volume": (3, 0),
    "current": (2, 1),
    "power": (3, 2),
    "dT_sink": (2, 2),
}

Z_TRAP_GRADIENT_FACTOR = 0.25            # asserted in the source, not derived here
Z_TRAP_DEPTH_FACTOR = 1.0 / (2 * math.pi)


@dataclass(frozen=True)
class ScalingParams:
    r: float
    j: float
    r_ref: float
    j_ref: float

    def __post_init__(self):
        for name in ("r", "j", "r_ref", "j_ref"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def scale_factor(figure: str, params: ScalingParams) -> float:
    try:
        er, ej = SCALING_EXPONENTS[figure]
    except KeyError:
        raise KeyError(f"unknown figure {figure!r}; known: {sorted(SCALING_EXPONENTS)}") from None
    return (params.r / params.r_ref) ** er * (params.j / params.j_ref) ** ej


def scale_trap_figures(params: ScalingParams, reference: dict | None = None) -> dict:
    """Scaled figures: reference value x power law (ratios alone when no reference is given)."""
    reference = reference or {}
    out = {}
    for fig in SCALING_EXPONENTS:
        f = scale_factor(fig, params)
        out[fig] = reference[fig] * f if fig in reference else f
    unknown = set(reference) - set(SCALING_EXPONENTS)
    if unknown:
        raise KeyError(f"no scaling law for {sorted(unknown)}")
    return out


def compression_cost(n: float) -> tuple:
    """(current factor, power factor) = (n^3, n^6) for shrinking a cloud n-fold at fixed trap size."""
    if not n >= 1:
        raise ValueError("linear shrink factor must be >= 1")
    return n ** 3, n ** 6


def z_trap_comparison(reference: dict, enabled: bool = True) -> dict:
    """Z-wire trap equivalents of Ioffe-Pritchard figures.

    Applies the constant factors stated in the source (1/4 on the radial
    gradient, 1/(2 pi) on the depth at equal volume); other keys pass
    through.  The factors are quoted, not derived from a Z-wire model.
    """
    factors = {"radial_gradient": Z_TRAP_GRADIENT_FACTOR, "depth": Z_TRAP_DEPTH_FACTOR}
    return {k: v * factors.get(k, 1.0) if enabled else v for k, v in reference.items()}


# -- power audit ---------------------------------------------------------------

@dataclass(frozen=True)
class AuditRow:
    element: str
    group: str
    area: float          # conductor share carried by this filament (m^2)
    length: float        # m
    current: float       # A
    current_density: float   # A/m^2
    resistance: float    # ohm
    power: float         # W

    def csv_row(self):
        return (self.element, f"{self.area * 1e6:.9g}", f"{self.current_density * 1e-6:.9g}",
                f"{self.resistance:.9g}", f"{self.power:.9g}")


@dataclass
class PowerAudit:
    rows: list
    drive_current: float
    lead_groups: tuple = ("lead_in", "lead_out")

    HEADER = ("element", "area_mm2", "J_Apermm2", "R_ohm", "P_W")

    @property
    def total_power(self) -> float:
        return math.fsum(r.power for r in self.rows)

    @property
    def power_without_leads(self) -> float:
        return math.fsum(r.power for r in self.rows if r.group not in self.lead_groups)

    def group_power(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out[r.group] = out.get(r.group, 0.0) + r.power
        return out

    def group_current_density(self, group: str) -> float:
        """Current density (A/m^2) in a conductor group (uniform across its strands)."""
        js = [r.current_density for r in self.rows if r.group == group]
        if not js:
            raise KeyError(group)
        return max(js)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for r in self.rows:
                w.writerow(r.csv_row())
            w.writerow(("total", "", "", "", f"{self.total_power:.9g}"))
            w.writerow(("total_without_leads", "", "", "", f"{self.power_without_leads:.9g}"))


def power_audit(assembly, current: float | None = None, rho: float = RHO_CU) -> PowerAudit:
    """Ohmic dissipation of every filament.

    Each element's ``area`` annotation is the cross-section of the whole
    conductor of its group; a strand carrying the fraction w of the drive
    current represents the share w of that cross-section, so every strand
    of a conductor has the same current density I / A and
    P = (w I)^2 rho L / (w A).
    """
    I = assembly.drive_current if current is None else float(current)
    rows = []
    for i, e in enumerate(assembly.elements):
        if e.area is None:
            raise AuditError(f"element {i} (group {e.group!r}) has no cross-section annotation")
        share = e.area * e.current_weight
        cur = I * e.current_weight
        R = rho * e.length / share
        rows.append(AuditRow(f"{e.group}#{i}", e.group, share, e.length, cur, cur / share, R, cur * cur * R))
    return PowerAudit(rows, I)
