"""End-to-end acceptance checks, one group per criterion.

Every sub-check is recorded with ``record_acceptance`` so the terminal
summary prints one PASS/FAIL line per criterion.
"""
import filecmp
import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import record_acceptance
from minitrap.cli import main
from minitrap.constants import D_CRIT, LI7, LI7_22, MU0, MU_B
from minitrap.dynamics import (HarmonicTrap, ModulationSpec, RampSchedule, find_resonances, parametric_scan,
                               phase_balanced_probe, sample_thermal, simulate_transfer)
from minitrap.errors import MajoranaWarning, ModelValidityWarning
from minitrap.evaporation import (EnsembleState, EvapSchedule, EvapTrap, LossModel, bec_diagnostics,
                                  run_sweep)
from minitrap.field import biot_savart, gradient_at
from minitrap.geometry import ConductorAssembly, FilamentSegment, MinitrapParams, build_circular_loop, build_minitrap
from minitrap.scaling import SCALING_EXPONENTS, ScalingParams, power_audit, scale_factor
from minitrap.sources import HarmonicField
from minitrap.trap import analyze_trap, radial_gradient, rf_cut_frequency, trap_frequency

TWO_PI = 2 * math.pi
MU = LI7_22.mu_factor * MU_B
G, GCM = 1e-4, 1e-2          # 1 G in T, 1 G/cm in T/m


# -- 1. analytic oracles ------------------------------------------------------------------

def _quad_segment(a, b, p, current):
    dl = b - a

    def comp(i, s):
        r = p - (a + s * dl)
        return np.cross(dl, r)[i] / np.linalg.norm(r) ** 3

    return MU0 * current / (4 * math.pi) * np.array(
        [quad(lambda s: comp(i, s), 0, 1, epsabs=0, epsrel=1e-13, limit=200)[0] for i in range(3)])


def test_criterion_1_analytic_oracles(minitrap100):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(10):
        a, b = rng.uniform(-1e-2, 1e-2, (2, 3))
        p = rng.uniform(-2e-2, 2e-2, 3)
        B = biot_savart(ConductorAssembly((FilamentSegment(a, b),), 3.0), p)
        ref = _quad_segment(a, b, p, 3.0)
        worst = max(worst, np.linalg.norm(B - ref) / np.linalg.norm(ref))
    ok1 = record_acceptance(1, "segment vs quadrature", worst < 1e-9, f"max rel err {worst:.2e} (< 1e-9)")

    R, I = 5e-2, 1.0
    z = np.array([0.0, 0.02, R, 0.1])
    Bz = biot_savart(build_circular_loop(R, current=I), np.stack([0 * z, 0 * z, z], axis=1))[:, 2]
    exact = MU0 * I * R ** 2 / (2 * (R ** 2 + z ** 2) ** 1.5)
    loop_err = float(np.max(np.abs(Bz - exact) / exact))
    ok2 = record_acceptance(1, "loop on-axis closed form", loop_err < 1e-4 and abs(Bz[0] - 1.2566e-5) < 1e-9,
                            f"max rel err {loop_err:.2e} (< 1e-4), B(0) = {Bz[0]:.5e} T")

    div = curl = 0.0
    for p in rng.uniform(-1e-3, 1e-3, (5, 3)):
        s = gradient_at(minitrap100, p)
        div, curl = max(div, s.divergence_residual()), max(curl, s.curl_residual())
    ok3 = record_acceptance(1, "div/curl of the mini-trap", div < 1e-6 and curl < 1e-6,
                            f"div {div:.1e}, curl {curl:.1e} (< 1e-6)")
    assert ok1 and ok2 and ok3


# -- 2. field-map reconstruction ----------------------------------------------------------

def test_criterion_2_field_map(report100):
    r = report100
    checks = [
        ("centre dBx/dx", abs(r.field_gradient[0, 0]) / GCM, 510.0, 0.25),
        ("centre dBy/dy", abs(r.field_gradient[1, 1]) / GCM, 510.0, 0.25),
        ("off-centre gradient x", r.offcenter_gradient["x"] / GCM, 800.0, 0.25),
        ("off-centre gradient y", r.offcenter_gradient["y"] / GCM, 400.0, 0.25),
        ("axial frequency", r.omega_axial / TWO_PI, 67.0, 0.20),
        ("depth", r.depth / G, 70.0, 0.15),
    ]
    ok = True
    for name, v, target, tol in checks:
        ok &= record_acceptance(2, name, abs(v - target) <= tol * target, f"{v:.4g} (target {target:g} ± {tol:.0%})")
    ok &= record_acceptance(2, "limiting saddle on y", r.limiting_axis() == "y", f"limiting {r.limiting_saddle}")
    bar = {sd.label: sd.barrier for sd in r.saddles}
    ok &= record_acceptance(2, "chip-side barrier above tip side", bar["-z"] > bar["+z"],
                            f"-z {bar['-z'] / G:.4g} G vs +z {bar['+z'] / G:.4g} G")
    assert ok


# -- 3. spectroscopy / frequency chain ------------------------------------------------------

def test_criterion_3_rf_cut():
    nu = rf_cut_frequency(0.4 * G) / 1e6
    assert record_acceptance(3, "nu_cut(0.4 G)", abs(nu - 804.34) <= 0.01 * 804.34, f"{nu:.5g} MHz (804.34 ± 1%)")


def test_criterion_3_radial_gradient():
    g = radial_gradient(0.4 * G, 4.4e5, 120.0) / GCM
    assert record_acceptance(3, "dB/dr from curvatures", abs(g - 420.0) <= 0.01 * 420.0, f"{g:.4g} G/cm (420 ± 1%)")


@pytest.mark.xfail(strict=True, reason="120 G/cm^2 gives 49.19 Hz with the exact relation; the 50 Hz "
                                       "figure corresponds to 124 G/cm^2 (rounded source value)")
def test_criterion_3_axial_frequency():
    f = trap_frequency(120.0, LI7_22) / TWO_PI
    assert record_acceptance(3, "omega_axial(120 G/cm^2)", abs(f - 50.0) <= 0.01 * 50.0,
                             f"{f:.4g} Hz (50 ± 1%; 1.6% off, see ledger)")


# -- 4. parametric resonances ---------------------------------------------------------------

W3K = (TWO_PI * 3000, TWO_PI * 3000, TWO_PI * 50)
TRAP3K = HarmonicTrap((0, 0, 0), W3K, 0.4 * G)
SRC3K = HarmonicField.for_frequencies(W3K, 0.4 * G, LI7.mass, MU)

# target (Hz), window (Hz), points, probe axes, amplitude (m), relative modulation, duration (s), dt (s)
SCANS = {
    "6 kHz": (6000.0, (5400.0, 6600.0), 13, "xy", 5e-6, 0.05, 0.02, 1 / 6000 / 200),
    "3 kHz": (3000.0, (2970.0, 3030.0), 13, "xy", 5e-6, 0.03, 0.1, 1 / 3000 / 200),
    "100 Hz": (100.0, (90.0, 110.0), 21, "z", 50e-6, 0.05, 2.0, 1 / 50 / 200),
    "50 Hz": (50.0, (45.0, 55.0), 21, "z", 50e-6, 0.05, 2.0, 1 / 50 / 200),
}


@pytest.mark.slow
@pytest.mark.parametrize("label", list(SCANS))
def test_criterion_4_parametric_resonance(label):
    target, (f0, f1), n, axes, amp, eps, dur, dt = SCANS[label]
    probe = phase_balanced_probe(TRAP3K, amp, axes)
    curve = parametric_scan(SRC3K, np.linspace(f0, f1, n), probe, ModulationSpec(1.0, eps, dur),
                            trap_bottom=0.4 * G, dt=dt, nominal_current=1.0)
    peaks = find_resonances(curve, min_ratio=5.0)
    near = [f for f in peaks if abs(f - target) <= 0.02 * target]
    ratio = float(curve.energy_gain.max() / curve.background())
    ok = bool(near) and ratio > 5.0
    detail = f"peaks {[round(f, 2) for f in peaks]} Hz, peak/background {ratio:.3g}"
    assert record_acceptance(4, f"{label} resonance", ok, detail)


# -- 5. semi-adiabatic transfer ---------------------------------------------------------------

def _transfer(sign):
    ws = (TWO_PI * 1000, TWO_PI * 1000, TWO_PI * 50)
    rect = HarmonicField.for_frequencies(ws, 1 * G, LI7.mass, MU, label="rect")
    st = HarmonicTrap((0, 0, 0), ws, 1 * G)
    ft = HarmonicTrap((0, 0, 0), W3K, 0.4 * G, 70 * G)
    ens = sample_thermal(200, 300e-6, st, rng=11)
    ramp = 2e-3
    sch = RampSchedule((("rect", (0, ramp), (sign, 0.0)), ("mini", (0, ramp), (0.0, 1.0))), ramp)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MajoranaWarning)
        return simulate_transfer(ens, sch.drive({"rect": rect, "mini": SRC3K}), ramp, st, ft, hold=1e-3)


@pytest.mark.slow
def test_criterion_5_transfer():
    fwd, rev = _transfer(1.0), _transfer(-1.0)
    a = fwd.adiabaticity
    ok = record_acceptance(5, "radial adiabatic, axial sudden", a["x"] > 1 and a["y"] > 1 and a["z"] < 1,
                           f"ramp x trap frequency: x {a['x']:.3g}, y {a['y']:.3g}, z {a['z']:.3g}")
    ok &= record_acceptance(5, "radial energy growth", abs(fwd.radial_energy_growth) < 0.10,
                            f"{fwd.radial_energy_growth:+.3%} (< 10%)")
    ok &= record_acceptance(5, "reversed-polarity control", rev.capture_fraction < 0.1 * fwd.capture_fraction,
                            f"capture {rev.capture_fraction:.3g} vs {fwd.capture_fraction:.3g}")
    assert ok


# -- 6. evaporation trajectory -------------------------------------------------------------

MEASURED = EvapTrap(0.4 * G, W3K)


def _sweep(dt):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ModelValidityWarning)
        return run_sweep(EnsembleState(2e8, 1e-3), EvapSchedule.reference_default(), MEASURED,
                         LossModel.for_current(100.0), dt=dt)


def test_criterion_6_evaporation():
    r, fine = _sweep(0.01), _sweep(0.005)
    ok = record_acceptance(6, "threshold reached", r.threshold_time is not None,
                           f"D = {D_CRIT:.4g} at t = {r.threshold_time:.4g} s")
    th = r.threshold_state
    ok &= record_acceptance(6, "final N bracket", th is not None and 1e4 <= th.N <= 1e6,
                            f"N = {th.N:.3g} at T = {th.T * 1e6:.3g} uK ([1e4, 1e6])")
    tc = r.threshold_time
    g_mid = r.gamma_between(tc / 4, 3 * tc / 4)
    ok &= record_acceptance(6, "mid-run efficiency", 1.0 <= g_mid <= 3.0, f"gamma = {g_mid:.3g} ([1, 3])")
    f = fine.threshold_state
    dN, dT = abs(f.N / th.N - 1), abs(f.T / th.T - 1)
    ok &= record_acceptance(6, "step halving", dN < 0.01 and dT < 0.01, f"dN {dN:.1e}, dT {dT:.1e} (< 1%)")
    assert ok


# -- 7. threshold-image consistency -----------------------------------------------------------

def test_criterion_7_threshold_sample():
    d = bec_diagnostics(EnsembleState(6e4, 1.1e-6), MEASURED)
    ok = record_acceptance(7, "D(6e4, 1.1 uK)", 1.7 <= d.D <= 3.9, f"D = {d.D:.3g} ([1.7, 3.9])")
    ok &= record_acceptance(7, "condensate limit", 300 <= d.N_max <= 1200, f"N_max = {d.N_max:.3g} (600 within x2)")
    assert ok


# -- 8. scaling cross-validation and power audit -------------------------------------------------

@pytest.mark.slow
def test_criterion_8_scaling(minitrap100, report100):
    big = build_minitrap(MinitrapParams().scaled(2.0), 400.0)
    rep = analyze_trap(big, box=10e-3, max_distance=30e-3, offset=2e-3)
    g_ratio = abs(rep.field_gradient[0, 0]) / abs(report100.field_gradient[0, 0])
    d_ratio = rep.depth / report100.depth
    ok = record_acceptance(8, "x2 geometry gradient", abs(g_ratio - 1) <= 0.02, f"ratio {g_ratio:.5f} (1 ± 2%)")
    ok &= record_acceptance(8, "x2 geometry depth", abs(d_ratio - 2) <= 0.05 * 2, f"ratio {d_ratio:.5f} (2 ± 5%)")

    worst = 0.0
    rs, js = np.array([1e-3, 3e-3, 1e-2]), np.array([1e6, 1e7, 1e8])
    for fig, (er, ej) in SCALING_EXPONENTS.items():
        sr = np.polyfit(np.log(rs), np.log([scale_factor(fig, ScalingParams(r, 1.0, 1e-3, 1.0)) for r in rs]), 1)[0]
        sj = np.polyfit(np.log(js), np.log([scale_factor(fig, ScalingParams(1.0, j, 1.0, 1e6)) for j in js]), 1)[0]
        worst = max(worst, abs(sr - er), abs(sj - ej))
    ok &= record_acceptance(8, "exponent recovery", worst < 1e-12, f"max slope error {worst:.1e}")

    a100, a120 = power_audit(minitrap100, 100.0), power_audit(minitrap100, 120.0)
    P = a100.power_without_leads
    ok &= record_acceptance(8, "power at 100 A", 3.5 <= P <= 10.5,
                            f"{P:.3g} W without leads ({a100.total_power:.3g} W with leads); 7 W ± 50%")
    J = a120.group_current_density("bar1") * 1e-6
    ok &= record_acceptance(8, "bar current density at 120 A", abs(J - 35) <= 0.2 * 35, f"{J:.3g} A/mm^2 (35 ± 20%)")
    assert ok


# -- 9. determinism ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_9_determinism(tmp_path, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    ok = True
    for cmd in ("geom", "transfer", "audit"):
        a, b = tmp_path / f"{cmd}_a", tmp_path / f"{cmd}_b"
        codes = (main([cmd, "--out", str(a), "--seed", "42"]), main([cmd, "--out", str(b), "--seed", "42"]))
        names = sorted(p.name for p in a.iterdir())
        match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        ok &= record_acceptance(9, f"{cmd} outputs byte-identical", codes == (0, 0) and not mismatch and not errors,
                                f"{len(match)} file(s) identical: {', '.join(match)}")
    assert ok
