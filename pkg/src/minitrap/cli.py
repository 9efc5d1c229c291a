"""``minitrap`` command-line workbench.

Every subcommand reads one JSON config (the bundled default when ``--config``
is omitted), writes its CSV outputs plus ``manifest.json`` into ``--out`` and
prints a short summary.  Outputs are staged in a hidden directory and moved
into place only when the run succeeds, so a failed run leaves no partial
files behind.

Exit codes:
    0  success
    1  unexpected error
    2  configuration error (parse, schema or geometry invariant)
    3  physics error (no trap, zero field, anti-trapped, unreachable target)
    4  numerical non-convergence
    5  ``--golden`` comparison failed
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import shutil
import sys
import tempfile
import warnings
from dataclasses import dataclass, field as dc_field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .constants import KB, LI7, li7_state
from .errors import (ConfigError, ConvergenceError, GeometryError, MinitrapError, NearZeroFieldError,
                     PhysicsError)

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_PHYSICS, EXIT_CONVERGENCE, EXIT_GOLDEN = 0, 1, 2, 3, 4, 5

COMMANDS = ("geom", "field-map", "report", "transfer", "scan", "evap", "scale", "audit")
REQUIRED_GEOMETRY = ("tube_length", "inner_diameter", "outer_diameter", "slit_widths", "slit_stop_margin")

# Reference values for ``report --golden``: quantity -> (target, relative tolerance)
GOLDEN_TARGETS = {
    "dBx_dx_center": (510.0, 0.25),
    "dBy_dy_center": (510.0, 0.25),
    "grad_offcenter_x": (800.0, 0.25),
    "grad_offcenter_y": (400.0, 0.25),
    "f_z": (67.0, 0.20),
    "depth": (70.0, 0.15),
}


# -- configuration -------------------------------------------------------------

def default_config() -> dict:
    text = resources.files("minitrap").joinpath("data/default_config.json").read_text()
    return json.loads(text)


def _merge(defaults: dict, user: dict, where: str) -> dict:
    out = dict(defaults)
    for k, v in user.items():
        if k not in defaults:
            raise ConfigError(f"{where}: unknown key {k!r}")
        if isinstance(defaults[k], dict) and isinstance(v, dict) and k != "bias":
            out[k] = _merge(defaults[k], v, f"{where}.{k}")
        else:
            out[k] = v
    return out


@dataclass
class WorkbenchConfig:
    """Resolved configuration: bundled defaults overlaid by a user file and flags.

    The ``geometry`` section of a user file is taken as a whole (no defaults
    are filled in for the required dimensions).
    """

    data: dict
    source: str = "<bundled default>"

    @classmethod
    def load(cls, path=None) -> "WorkbenchConfig":
        base = default_config()
        if path is None:
            return cls(base)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        if "geometry" in user:
            if not isinstance(user["geometry"], dict):
                raise ConfigError(f"{path}: geometry must be an object")
            missing = [k for k in REQUIRED_GEOMETRY if k not in user["geometry"]]
            if missing:
                raise ConfigError(f"{path}: geometry.{missing[0]} is required")
            geom = user["geometry"]
            user = dict(user, geometry={})
            data = _merge(base, user, "config")
            data["geometry"] = geom
        else:
            data = _merge(base, user, "config")
        return cls(data, str(path))

    # -- accessors (all return SI) --

    def section(self, name: str) -> dict:
        return self.data[name]

    def number(self, section: dict, key: str, where: str, positive: bool = False,
               nonneg: bool = False) -> float:
        v = section.get(key)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{where}.{key} must be a finite number, got {v!r}")
        if positive and not v > 0:
            raise ConfigError(f"{where}.{key} must be positive, got {v!r}")
        if nonneg and v < 0:
            raise ConfigError(f"{where}.{key} must be non-negative, got {v!r}")
        return float(v)

    def vector(self, section: dict, key: str, where: str, n: int = 3) -> np.ndarray:
        v = section.get(key)
        if not isinstance(v, (list, tuple)) or len(v) != n:
            raise ConfigError(f"{where}.{key} must be a list of {n} numbers")
        return np.array([self.number({"v": x}, "v", f"{where}.{key}") for x in v])

    @property
    def seed(self) -> int:
        s = self.data.get("seed")
        if isinstance(s, bool) or not isinstance(s, int):
            raise ConfigError("seed must be an integer")
        return s

    def params(self):
        from .geometry import MinitrapParams
        g = dict(self.data["geometry"])
        for k in ("slit_widths", "lead_areas"):
            if k in g:
                if not isinstance(g[k], list):
                    raise ConfigError(f"geometry.{k} must be a list")
                g[k] = tuple(g[k])
        try:
            return MinitrapParams.from_mapping(g)
        except TypeError as exc:
            raise ConfigError(f"geometry: {exc}") from exc

    @property
    def current(self) -> float:
        return self.number(self.data, "current_A", "config")

    def spin(self):
        s = self.data.get("spin")
        if not isinstance(s, list) or len(s) != 2:
            raise ConfigError("spin must be [F, mF]")
        try:
            return li7_state(int(s[0]), int(s[1]))
        except ValueError as exc:
            raise ConfigError(f"spin: {exc}") from exc

    def assembly(self, current: float | None = None):
        from .geometry import build_minitrap
        return build_minitrap(self.params(), self.current if current is None else current)

    def bias(self, source) -> np.ndarray:
        """Bias field (T): an explicit vector or the solution for a target trap bottom."""
        b = self.data.get("bias")
        if not isinstance(b, dict) or len(b) == 0:
            raise ConfigError("bias must be an object with vector_G or target_B0_G")
        unknown = set(b) - {"vector_G", "target_B0_G", "axis"}
        if unknown:
            raise ConfigError(f"bias: unknown key(s) {sorted(unknown)}")
        if "vector_G" in b and "target_B0_G" in b:
            raise ConfigError("bias: give either vector_G or target_B0_G, not both")
        if "vector_G" in b:
            return self.vector(b, "vector_G", "bias") * 1e-4
        from .trap import solve_bias_for_B0
        target = self.number(b, "target_B0_G", "bias", positive=True) * 1e-4
        axis = self.vector(b, "axis", "bias") if "axis" in b else np.array([0.0, 0.0, 1.0])
        return solve_bias_for_B0(source, target, axis)

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


# -- run bookkeeping -----------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return t.replace(microsecond=0).isoformat()


@dataclass
class RunManifest:
    command: str
    config_sha256: str
    seed: int
    version: str = __version__
    timestamp: str = dc_field(default_factory=_timestamp)
    outputs: dict = dc_field(default_factory=dict)

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")


@dataclass
class RunContext:
    cfg: WorkbenchConfig
    stage: Path
    threads: int = 1
    golden: bool = False
    outputs: list = dc_field(default_factory=list)
    golden_failed: bool = False

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.stage / name


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{x:.9g}" if isinstance(x, float) else x for x in r])


# -- subcommands -----------------------------------------------------------------

def cmd_geom(ctx: RunContext) -> None:
    asm = ctx.cfg.assembly()
    asm.write_element_table(ctx.path("elements.csv"))
    lo, hi = asm.bounding_box()
    print(f"elements: {len(asm)} ({len(asm.segments)} segments, {len(asm.arcs)} arcs)")
    for g, w in sorted(asm.group_weights().items()):
        n = sum(1 for e in asm.elements if e.group == g)
        print(f"  {g}: {n} filament(s), weight sum {w:.6g}")
    print("bounding box (cm): " + ", ".join(f"[{a * 100:.4g}, {b * 100:.4g}]" for a, b in zip(lo, hi)))


def cmd_field_map(ctx: RunContext) -> None:
    from .field import line_scan
    from .sources import with_bias
    cfg = ctx.cfg
    asm = cfg.assembly()
    src = with_bias(asm, cfg.bias(asm))
    lines = cfg.section("field_map").get("lines")
    if not isinstance(lines, list) or not lines:
        raise ConfigError("field_map.lines must be a non-empty list")
    for i, ln in enumerate(lines):
        where = f"field_map.lines[{i}]"
        name = ln.get("name")
        if not isinstance(name, str) or not name.isidentifier():
            raise ConfigError(f"{where}.name must be an identifier-like string")
        rng = cfg.vector(ln, "range_cm", where, 2) * 1e-2
        n = ln.get("n")
        if not isinstance(n, int) or n < 2:
            raise ConfigError(f"{where}.n must be an integer >= 2")
        scan = line_scan(src, cfg.vector(ln, "origin_cm", where) * 1e-2, cfg.vector(ln, "axis", where),
                         rng, n, threads=ctx.threads)
        scan.write_csv(ctx.path(f"field_{name}.csv"))
        print(f"line {name}: {n} samples, |B| in [{scan.magnitude.min() * 1e4:.4g}, "
              f"{scan.magnitude.max() * 1e4:.4g}] G")


def cmd_report(ctx: RunContext) -> None:
    from .trap import analyze_trap
    cfg = ctx.cfg
    sec = cfg.section("report")
    asm = cfg.assembly()
    if cfg.current == 0:
        from .errors import NoTrapError
        raise NoTrapError("drive current is zero: the assembly produces no trap")
    bias = cfg.bias(asm)
    rep = analyze_trap(asm, bias, spin=cfg.spin(),
                       max_distance=cfg.number(sec, "max_distance_mm", "report", positive=True) * 1e-3,
                       offset=cfg.number(sec, "offset_mm", "report", positive=True) * 1e-3)
    rows = rep.rows() + [("limiting_saddle", rep.limiting_saddle, "")]
    _write_rows(ctx.path("report.csv"), ("quantity", "value", "unit"), rows)
    for q, v, u in rows:
        print(f"{q:>22s} = {v:.6g} {u}" if isinstance(v, float) else f"{q:>22s} = {v}")
    if ctx.golden:
        values = {q: v for q, v, _ in rep.rows()}
        golden = []
        for q, (target, tol) in GOLDEN_TARGETS.items():
            v = values[q]
            ok = abs(v - target) <= tol * target
            golden.append((q, v, target, tol, "PASS" if ok else "FAIL"))
        ok = rep.limiting_axis() == "y"
        golden.append(("limiting_axis_is_y", rep.limiting_saddle, "y", 0.0, "PASS" if ok else "FAIL"))
        _write_rows(ctx.path("golden.csv"), ("quantity", "value", "target", "rel_tol", "status"), golden)
        for q, v, target, tol, st in golden:
            print(f"{st} {q}: {v} (target {target}, tol {tol:g})")
        ctx.golden_failed = any(g[-1] == "FAIL" for g in golden)


def _harmonic_source(cfg, sec, where, label):
    from .constants import MU_B
    from .sources import HarmonicField
    spin = cfg.spin()
    w = 2 * math.pi * cfg.vector(sec, "freq_Hz", where)
    if np.any(w <= 0):
        raise ConfigError(f"{where}.freq_Hz must be positive")
    B0 = cfg.number(sec, "B0_G", where, positive=True) * 1e-4
    return HarmonicField.for_frequencies(w, B0, LI7.mass, spin.mu_factor * MU_B, label=label), w, B0


def cmd_transfer(ctx: RunContext) -> None:
    from .dynamics import Channel, Drive, HarmonicTrap, RampSchedule, sample_thermal, simulate_transfer
    cfg = ctx.cfg
    sec = cfg.section("transfer")
    src, ws, B0s = _harmonic_source(cfg, sec["source_trap"], "transfer.source_trap", "source")
    fin, wf, B0f = _harmonic_source(cfg, sec["final_trap"], "transfer.final_trap", "final")
    depth = cfg.number(sec["final_trap"], "depth_G", "transfer.final_trap", positive=True) * 1e-4
    ramp = cfg.number(sec, "ramp_ms", "transfer", positive=True) * 1e-3
    hold = cfg.number(sec, "hold_ms", "transfer", nonneg=True) * 1e-3
    n = sec.get("n_particles")
    if not isinstance(n, int) or n < 100:
        raise ConfigError("transfer.n_particles must be an integer >= 100")
    sign = -1.0 if sec.get("reversed_polarity") else 1.0
    st, ft = HarmonicTrap((0, 0, 0), tuple(ws), B0s), HarmonicTrap((0, 0, 0), tuple(wf), B0f, depth)
    sample = sample_thermal(n, cfg.number(sec, "temperature_uK", "transfer", positive=True) * 1e-6, st,
                            spin=cfg.spin(), rng=cfg.seed)
    sch = RampSchedule((("source", (0.0, ramp), (sign, 0.0)), ("final", (0.0, ramp), (0.0, 1.0))), ramp)
    cur = sch.currents()
    drive = Drive([Channel(src, cur["source"], 1.0, "source"), Channel(fin, cur["final"], 1.0, "final")])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = simulate_transfer(sample, drive, ramp, st, ft, hold=hold)
    ratio = res.energy_ratio_vs_adiabatic
    rows = [("capture_fraction", res.capture_fraction, ""),
            ("spin_flagged_fraction", res.spin_flagged_fraction, ""),
            ("escaped_fraction", res.escaped_fraction, ""),
            ("radial_energy_growth", res.radial_energy_growth, ""),
            ("mean_energy_before", res.mean_energy_before / KB * 1e6, "uK"),
            ("mean_energy_after", res.mean_energy_after / KB * 1e6, "uK")]
    rows += [(f"energy_ratio_vs_adiabatic_{a}", r, "") for a, r in zip("xyz", ratio)]
    rows += [(f"adiabaticity_{a}", v, "") for a, v in res.adiabaticity.items()]
    _write_rows(ctx.path("transfer.csv"), ("quantity", "value", "unit"), rows)
    for q, v, u in rows:
        print(f"{q:>28s} = {v:.6g} {u}")


def cmd_scan(ctx: RunContext) -> None:
    from .dynamics import HarmonicTrap, ModulationSpec, find_resonances, parametric_scan, phase_balanced_probe
    cfg = ctx.cfg
    sec = cfg.section("scan")
    src, w, B0 = _harmonic_source(cfg, sec["trap"], "scan.trap", "scan_trap")
    axes = sec.get("axes")
    if not isinstance(axes, str) or not axes or set(axes) - set("xyz"):
        raise ConfigError("scan.axes must be a non-empty combination of 'x', 'y', 'z'")
    fr = sec["freq_Hz"]
    n = fr.get("n")
    if not isinstance(n, int) or n < 1:
        raise ConfigError("scan.freq_Hz.n must be a positive integer")
    f0 = cfg.number(fr, "start", "scan.freq_Hz", positive=True)
    f1 = cfg.number(fr, "stop", "scan.freq_Hz", positive=True)
    freqs = np.linspace(f0, f1, n)
    eps = cfg.number(sec, "relative_modulation", "scan", nonneg=True)
    spec = ModulationSpec(1.0, eps, cfg.number(sec, "duration_s", "scan", positive=True))
    trap = HarmonicTrap((0, 0, 0), tuple(w), B0)
    probe = phase_balanced_probe(trap, cfg.number(sec, "amplitude_um", "scan", positive=True) * 1e-6, axes,
                                 spin=cfg.spin())
    w_probe = max(w["xyz".index(a)] for a in axes)
    dt = 2 * math.pi / max(w_probe, 2 * math.pi * f1) / 200
    curve = parametric_scan(src, freqs, probe, spec, trap_bottom=B0, dt=dt, nominal_current=1.0)
    _write_rows(ctx.path("scan.csv"), ("freq_Hz", "energy_gain"),
                [(float(f), float(g)) for f, g in curve.rows()])
    peaks = find_resonances(curve, cfg.number(sec, "min_ratio", "scan", positive=True))
    _write_rows(ctx.path("resonances.csv"), ("freq_Hz", "peak_to_background"),
                [(float(f), float(curve.energy_gain[np.argmin(abs(curve.freq_Hz - f))] / max(curve.background(), 1e-300)))
                 for f in peaks])
    print(f"scanned {n} frequencies in [{f0:g}, {f1:g}] Hz; background gain {curve.background():.3g}")
    print("resonances (Hz): " + (", ".join(f"{f:.6g}" for f in peaks) if peaks else "none"))


def cmd_evap(ctx: RunContext) -> None:
    from .evaporation import (EnsembleState, EvapSchedule, EvapTrap, LossModel, bec_diagnostics, run_sweep)
    cfg = ctx.cfg
    sec = cfg.section("evap")
    tr = sec["trap"]
    trap = EvapTrap(cfg.number(tr, "B0_G", "evap.trap", nonneg=True) * 1e-4,
                    tuple(2 * math.pi * cfg.vector(tr, "freq_Hz", "evap.trap")))
    sch = sec["schedule"]
    times, freqs = sch.get("times_s"), sch.get("freqs_MHz")
    if not isinstance(times, list) or not isinstance(freqs, list):
        raise ConfigError("evap.schedule needs times_s and freqs_MHz lists")
    try:
        schedule = EvapSchedule(tuple(times), tuple(f * 1e6 for f in freqs))
        loss = LossModel(cfg.number(sec, "tau_s", "evap", positive=True),
                         cfg.number(sec, "G_dd_m3ps", "evap", nonneg=True))
        init = EnsembleState(cfg.number(sec, "N0", "evap", positive=True),
                             cfg.number(sec, "T0_uK", "evap", positive=True) * 1e-6)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"evap: {exc}") from exc
    rec = sec.get("record_every")
    if not isinstance(rec, int) or rec < 1:
        raise ConfigError("evap.record_every must be a positive integer")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_sweep(init, schedule, trap, loss, spin=cfg.spin(),
                        dt=cfg.number(sec, "dt_s", "evap", positive=True),
                        stop_at_threshold=bool(sec.get("stop_at_threshold")), record_every=rec)
    res.write_csv(ctx.path("evap.csv"))
    f = res.final
    print(f"final: t = {f.t:.4g} s, N = {f.N:.4g}, T = {f.T * 1e6:.4g} uK, D = {f.D(trap):.4g}")
    summary = [("final_t", f.t, "s"), ("final_N", f.N, ""), ("final_T", f.T * 1e6, "uK"),
               ("final_D", f.D(trap), ""), ("terminated", str(res.terminated), "")]
    if res.threshold_state is not None:
        th = res.threshold_state
        diag = bec_diagnostics(th, trap)
        summary += [("threshold_t", res.threshold_time, "s"), ("threshold_N", th.N, ""),
                    ("threshold_T", th.T * 1e6, "uK"), ("N_max_condensate", diag.N_max, "")]
        print(f"threshold D = 2.612 at t = {res.threshold_time:.4g} s with N = {th.N:.4g}, "
              f"T = {th.T * 1e6:.4g} uK; condensate limit N_max = {diag.N_max:.4g}")
    else:
        print("threshold not reached")
    for w in res.warnings:
        print(f"warning: {w}")
    _write_rows(ctx.path("evap_summary.csv"), ("quantity", "value", "unit"), summary)


def cmd_scale(ctx: RunContext) -> None:
    from .scaling import ScalingParams, compression_cost, scale_factor, scale_trap_figures, z_trap_comparison
    cfg = ctx.cfg
    sec = cfg.section("scale")
    try:
        p = ScalingParams(*(cfg.number(sec, k, "scale", positive=True) for k in ("r", "j", "r_ref", "j_ref")))
    except ValueError as exc:
        raise ConfigError(f"scale: {exc}") from exc
    ref = sec.get("reference") or {}
    try:
        scaled = scale_trap_figures(p, ref)
    except KeyError as exc:
        raise ConfigError(f"scale.reference: {exc}") from exc
    rows = [(k, scale_factor(k, p), scaled[k] if k in ref else float("nan")) for k in scaled]
    n = cfg.number(sec, "n", "scale", positive=True)
    try:
        cur, pw = compression_cost(n)
    except ValueError as exc:
        raise ConfigError(f"scale.n: {exc}") from exc
    rows += [("compression_current", cur, float("nan")), ("compression_power", pw, float("nan"))]
    z = z_trap_comparison({"radial_gradient": 1.0, "depth": 1.0})
    rows += [("ztrap_radial_gradient", z["radial_gradient"], float("nan")),
             ("ztrap_depth", z["depth"], float("nan"))]
    _write_rows(ctx.path("scale.csv"), ("figure", "factor", "scaled"), rows)
    for fig, fac, val in rows:
        print(f"{fig:>22s}  x{fac:.6g}" + ("" if math.isnan(val) else f"  -> {val:.6g}"))


def cmd_audit(ctx: RunContext) -> None:
    from .scaling import power_audit
    cfg = ctx.cfg
    sec = cfg.section("audit")
    I = cfg.number(sec, "current_A", "audit")
    audit = power_audit(cfg.assembly(I), I, cfg.number(sec, "rho_ohm_m", "audit", positive=True))
    audit.write_csv(ctx.path("audit.csv"))
    print(f"total power at {I:g} A: {audit.total_power:.4g} W "
          f"({audit.power_without_leads:.4g} W without leads)")
    for g in ("bar1", "chip_ring"):
        try:
            print(f"current density {g}: {audit.group_current_density(g) * 1e-6:.4g} A/mm^2")
        except KeyError:
            pass


HANDLERS = {"geom": cmd_geom, "field-map": cmd_field_map, "report": cmd_report, "transfer": cmd_transfer,
            "scan": cmd_scan, "evap": cmd_evap, "scale": cmd_scale, "audit": cmd_audit}


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="minitrap", description="Mini-trap design and simulation workbench.")
    ap.add_argument("--version", action="version", version=f"minitrap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__name__.replace("cmd_", "").replace("_", "-"))
        p.add_argument("--config", help="JSON config (default: bundled config)")
        p.add_argument("--out", default="minitrap_out", help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--golden", action="store_true", help="compare the report with reference values")
        p.add_argument("--threads", type=int, default=1, help="worker threads for field evaluation")
    return ap


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, GeometryError)):
        return EXIT_CONFIG
    if isinstance(exc, (PhysicsError, NearZeroFieldError)):
        return EXIT_PHYSICS
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    return EXIT_OTHER


def run(command: str, cfg: WorkbenchConfig, out, threads: int = 1, golden: bool = False) -> int:
    """Execute one subcommand; returns the exit code."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    ctx = RunContext(cfg, stage, max(1, threads), golden)
    try:
        HANDLERS[command](ctx)
        manifest = RunManifest(command, cfg.sha256, cfg.seed)
        for name in ctx.outputs:
            manifest.outputs[name] = sha256_file(stage / name)
        manifest.write(stage / "manifest.json")
        for name in ctx.outputs + ["manifest.json"]:
            os.replace(stage / name, out / name)
    except Exception as exc:   # noqa: BLE001 -- mapped to documented exit codes
        code = exit_code_for(exc)
        print(f"minitrap {command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return EXIT_GOLDEN if ctx.golden_failed else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = WorkbenchConfig.load(args.config)
        if args.seed is not None:
            cfg.data["seed"] = args.seed
        cfg.params()          # validate geometry up front for every command
    except (ConfigError, GeometryError) as exc:
        field = getattr(exc, "field", None)
        extra = f" (field: {field})" if field else ""
        print(f"minitrap {args.command}: config error: {exc}{extra}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, cfg, args.out, args.threads, args.golden)


if __name__ == "__main__":
    sys.exit(main())
