"""Magnetostatic design and cold-atom dynamics toolkit for a compact Ioffe-Pritchard trap.

Modules:
    geometry     -- filament models of conductors (bars, rings, loops, leads)
    field        -- Biot-Savart field, Jacobians and |B| Hessians, line scans
    sources      -- analytic field sources (bias, ideal Ioffe-Pritchard, harmonic)
    trap         -- minimum, depth, frequencies and RF-knife spectroscopy
    dynamics     -- trajectories, semi-adiabatic transfer, parametric heating
    evaporation  -- truncated-Boltzmann evaporation kinetics and BEC diagnostics
    scaling      -- size / current-density scaling laws and power audit
    cli          -- the ``minitrap`` command-line workbench
"""

__version__ = "0.1.0"
