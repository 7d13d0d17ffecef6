"""
Experiment orchestration: resolve or synthesize inputs, run the fitters,
aggregate, and emit a report.

An :class:`Experiment` names a kind, optional input files, a seed and a
config of per-module overrides. Inputs that are not given are synthesized
from the config with the seed, so every kind runs end to end without data.
Reports are deterministic: identical inputs, seed and config give
byte-identical files.
"""

from __future__ import annotations

import copy
import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import io as pio
from .diode import DiodeParams, diode_current, fit_iv, reference_params
from .errors import FitError, PcwqdError, QuadratureFailure, Unreachable, ValidationError
from .geometry import PRESETS, PcwGeometry, PurcellEnvelope, purcell_envelope, solve_distance
from .lifetime import DecayHistogram, convolve_model, fit_decay, synthesize_decay, transform_ratio
from .lineshape import GateConfig, classify, detect_dips, fit_dips, linewidth_statistics
from .rc import CUTOFF_NOTE, RcDrive, VoltageResponse, capacitance, modulated_intensity, fit_tau_rc, synthesize_sweep
from .synth import PopulationSpec, extract_ridge, synthesize_plateau, synthesize_scan
from .wgqed import EmitterModel, ScanTrace, frequency_to_wavelength

SCHEMA_VERSION = "1.0"
KINDS = ("rt-scan", "plateau-map", "lifetime", "iv", "rc-sweep")
INPUT_NAMES = {
    "rt-scan": ("scan", "histogram"),
    "plateau-map": (),
    "lifetime": ("histogram",),
    "iv": ("iv",),
    "rc-sweep": ("rc",),
}

# ---------------------------------------------------------------------------
# config schemas: key -> type, or nested dict

_DETECT = {"min_prominence": float, "min_width": float, "baseline_window": float,
           "window_factor": float, "min_separation": float, "smooth": int}
_GATE = {f.name: float for f in fields(GateConfig)}
_POPULATION = {f.name: (int if f.type in ("int", int) else str if f.type in ("str", str) else float)
               for f in fields(PopulationSpec) if f.name != "seed"}
_GEOMETRY = {"region": str, "a_nm": float, "r_nm": float, "rows_per_side": int,
             "strip_halfwidth_nm": float}
_LIFETIME_SYNTH = {"gamma_per_s": float, "total_counts": float, "background": float,
                   "irf_sigma_s": float, "irf_center_s": float, "n_bins": int,
                   "rep_period_s": float, "t0_s": float}
_LIFETIME_FIT = {"method": str}
_PURCELL = {f.name: float for f in fields(PurcellEnvelope)}

CONFIG_SCHEMA = {
    "rt-scan": {
        "detect": _DETECT,
        "gate": _GATE,
        "population": _POPULATION,
        "geometry": _GEOMETRY,
        "purcell": _PURCELL,
        "lifetime": {"synth": _LIFETIME_SYNTH, "fit": _LIFETIME_FIT},
        "pair_center_hz": float,
        "workers": int,
    },
    "plateau-map": {
        "emitter": {"nu0_hz": float, "gamma_tot_hz": float, "beta": float,
                    "stark_slope_hz_per_v": float, "v_on_v": float, "v_off_v": float},
        "grid": {"v_min_v": float, "v_max_v": float, "n_v": int,
                 "detuning_span_hz": float, "n_nu": int},
        "noise": float,
    },
    "lifetime": {"synth": _LIFETIME_SYNTH, "fit": _LIFETIME_FIT},
    "iv": {
        "synth": {"i_sat_a": float, "n_ideality": float, "r_s_ohm": float, "r_p_ohm": float,
                  "v_min_v": float, "v_max_v": float, "n_points": int},
        "fit": {"noise_floor_a": float},
        "temperature_k": float,
    },
    "rc-sweep": {
        "synth": {"tau_rc_s": float, "i0_counts_per_s": float, "noise": float,
                  "f_min_hz": float, "f_max_hz": float, "n_points": int},
        "drive": {"v_ac_v": float, "v_dc_v": float},
        "response": {"width_v": float, "kind": str},
        "attenuation": str,
        "r_s_ohm": float,
    },
}

# Calibrated population scenario: 79 emitters over 944-950 nm, 120-1660 MHz.
# The gates keep their module defaults; detection, coupling distribution and
# diffusion fraction were fixed by the calibration in scripts/calibrate_gates.py.
SCENARIOS = {
    "population-79": {
        "population": {
            "count": 79, "lambda_min": 944e-9, "lambda_max": 950e-9, "step": 100e6,
            "gamma_min": 120e6, "gamma_max": 1660e6,
            "beta_min": 0.012, "beta_max": 0.6, "beta_dist": "loguniform",
            "fano_max": 0.05, "noise": 0.01, "lambda_c": 950.2e-9,
            "diffusion_fraction": 0.45, "diffusion_rms": 1.0, "diffusion_corr": 0.9,
        },
        "detect": {"min_prominence": 0.03, "smooth": 7},
    },
}
SCENARIO_SEED = 79


def _type_ok(value, typ) -> bool:
    if typ is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if typ is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, typ)


def validate_config(kind: str, config: dict, schema: Optional[dict] = None, path: str = "") -> None:
    """Raise ValidationError for unknown keys or wrongly typed values."""
    if schema is None:
        if kind not in CONFIG_SCHEMA:
            raise ValidationError(f"unknown experiment kind {kind!r}")
        schema = CONFIG_SCHEMA[kind]
    if not isinstance(config, dict):
        raise ValidationError(f"config{path} must be an object")
    for key, value in config.items():
        where = f"{path}.{key}"
        if key not in schema:
            raise ValidationError(f"unknown config key {where.lstrip('.')!r} for {kind}")
        typ = schema[key]
        if isinstance(typ, dict):
            validate_config(kind, value, typ, where)
        elif not _type_ok(value, typ):
            raise ValidationError(f"config key {where.lstrip('.')!r} must be {typ.__name__}")


def merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class Experiment:
    kind: str
    inputs: dict = field(default_factory=dict)  # name -> path
    seed: int = 0
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an integer in [0, 2**64)")
        extra = set(self.inputs) - set(INPUT_NAMES[self.kind])
        if extra:
            raise ValidationError(f"unknown inputs {sorted(extra)} for {self.kind}")
        validate_config(self.kind, self.config)

    @classmethod
    def from_dict(cls, d: dict) -> "Experiment":
        if not isinstance(d, dict):
            raise ValidationError("experiment must be a JSON object")
        extra = set(d) - {"kind", "inputs", "seed", "config"}
        if extra:
            raise ValidationError(f"unknown experiment keys {sorted(extra)}")
        if "kind" not in d:
            raise ValidationError("experiment needs 'kind'")
        return cls(kind=d["kind"], inputs=dict(d.get("inputs", {})), seed=d.get("seed", 0),
                   config=dict(d.get("config", {})))


@dataclass
class Report:
    kind: str
    results: dict
    provenance: dict
    errors: list = field(default_factory=list)
    files: list = field(default_factory=list)  # plot/input files written, relative names
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "results": self.results,
            "provenance": self.provenance,
            "errors": self.errors,
            "files": sorted(self.files),
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return pio.dumps_json(self.to_dict())

    def to_text(self) -> str:
        import json

        return pio.key_tree(json.loads(self.to_json())) + "\n"


class PipelineError(PcwqdError):
    """A fitter failed inside an experiment; wraps the original error with context."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {type(exc).__name__}: {exc}")
        self.stage = stage
        self.original = exc


_FIT_ERRORS = (FitError, QuadratureFailure, Unreachable)


class _Context:
    def __init__(self, e: Experiment, out_dir: Optional[Path], keep_going: bool):
        self.e = e
        self.out_dir = out_dir
        self.keep_going = keep_going
        self.errors: list = []
        self.files: list = []
        self.inputs: dict = {}
        self.warnings: list = []

    def rng(self, stream: int) -> np.random.Generator:
        # fixed stream per purpose keeps draws independent of which inputs exist
        return np.random.default_rng(np.random.SeedSequence(self.e.seed, spawn_key=(stream,)))

    def guard(self, stage: str, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _FIT_ERRORS as exc:
            if not self.keep_going:
                raise PipelineError(stage, exc) from exc
            self.errors.append({"stage": stage, "error": type(exc).__name__, "message": str(exc)})
            return None

    def record_input(self, name: str, path=None, text: Optional[str] = None):
        if path is not None:
            self.inputs[name] = {"path": str(path), "sha256": pio.sha256_file(path), "synthesized": False}
        else:
            rel = f"inputs/{name}.csv"
            self.inputs[name] = {"path": rel, "sha256": pio.sha256_text(text), "synthesized": True}
            self.write(rel, text)

    def write(self, rel: str, text: str):
        self.files.append(rel)
        if self.out_dir is not None:
            pio.atomic_write(self.out_dir / rel, text)

    def columns(self, rel: str, header: str, cols):
        self.files.append(rel)
        if self.out_dir is not None:
            pio.write_columns(self.out_dir / rel, header, cols)


# ---------------------------------------------------------------------------
# kinds

def _lifetime_hist(ctx: _Context, cfg: dict) -> DecayHistogram:
    if "histogram" in ctx.e.inputs:
        path = ctx.e.inputs["histogram"]
        hist = pio.read_histogram(path)
        ctx.record_input("histogram", path=path)
        return hist
    s = cfg.get("synth", {})
    hist = synthesize_decay(
        s.get("gamma_per_s", 2 * math.pi * 460e6),
        total_counts=s.get("total_counts", 1e5),
        t0=s.get("t0_s", 0.0),
        background=s.get("background", 0.0),
        irf_sigma=s.get("irf_sigma_s", 50e-12),
        irf_center=s.get("irf_center_s", 1e-9),
        n_bins=s.get("n_bins", 1024),
        rep_period=s.get("rep_period_s", 1.0 / 72.6e6),
        rng=ctx.rng(2),
    )
    text = pio.format_csv("histogram", [hist.times, hist.counts, hist.irf],
                          {"rep_period_s": repr(float(hist.rep_period))})
    ctx.record_input("histogram", text=text)
    return hist


def _decay_record(fit, hist: DecayHistogram, ctx: _Context, plot: str) -> dict:
    model = convolve_model(fit.gamma, fit.amplitude, fit.t0, fit.background, hist)
    ctx.columns(plot, "time_ns counts model", [hist.times * 1e9, hist.counts, model])
    return {
        "gamma_per_s": fit.gamma,
        "gamma_sigma_per_s": fit.sigma.get("gamma"),
        "transform_limit_hz": fit.transform_limit,
        "transform_limit_sigma_hz": fit.transform_limit_sigma,
        "tau_s": fit.tau,
        "amplitude_counts": fit.amplitude,
        "background_counts": fit.background,
        "t0_s": fit.t0,
        "converged": fit.converged,
        "identifiable": fit.identifiable,
        "n_iter": fit.n_iter,
    }


def _dip_record(f, reason) -> dict:
    return {
        "center_hz": f.center,
        "center_sigma_hz": f.sigma["center"],
        "wavelength_m": float(frequency_to_wavelength(f.center)),
        "gamma_rt_hz": f.gamma_rt,
        "gamma_rt_sigma_hz": f.sigma["gamma_rt"],
        "beta_eff": f.beta_eff,
        "beta_eff_sigma": f.sigma["beta_eff"],
        "fano_amp": f.fano_amp,
        "fano_amp_sigma": f.sigma["fano_amp"],
        "fano_phase_rad": f.fano_phase,
        "fano_phase_sigma_rad": f.sigma["fano_phase"],
        "depth": f.depth,
        "chi2_red": f.chi2_red,
        "noise_rms": f.noise_rms,
        "converged": f.converged,
        "status": f.status,
        "rejected": reason,
        "window": list(f.window),
    }


def _geometry_from_config(cfg: dict) -> tuple[PcwGeometry, str]:
    region = cfg.get("region", "first-row")
    if region not in PRESETS:
        raise ValidationError(f"unknown geometry region {region!r}; presets: {sorted(PRESETS)}")
    g = PRESETS[region]
    hw = cfg.get("strip_halfwidth_nm")
    try:
        g = PcwGeometry(
            a=cfg["a_nm"] / 1e9 if "a_nm" in cfg else g.a,
            r=cfg["r_nm"] / 1e9 if "r_nm" in cfg else g.r,
            rows_per_side=cfg.get("rows_per_side", g.rows_per_side),
            halfwidth=hw / 1e9 if hw is not None else g.halfwidth,
        )
    except ValueError as exc:
        raise ValidationError(f"geometry: {exc}") from None
    return g, region


def geometry_record(g: PcwGeometry, region: str, fraction: float) -> dict:
    rec = {"region": region, "a_m": g.a, "r_m": g.r, "rows_per_side": g.rows_per_side,
           "strip_halfwidth_m": g.h, "fraction": fraction, "d_m": None}
    if 0.0 < fraction <= 1.0:
        try:
            rec["d_m"] = solve_distance(g, fraction)
        except Unreachable:
            pass
    return rec


def _resolve_scan(ctx: _Context) -> ScanTrace:
    cfg = ctx.e.config
    if "scan" in ctx.e.inputs:
        path = ctx.e.inputs["scan"]
        trace = pio.read_scan(path)
        ctx.record_input("scan", path=path)
        return trace
    try:
        spec = PopulationSpec(**merge(cfg.get("population", {}), {"seed": ctx.e.seed}))
    except ValueError as exc:
        raise ValidationError(f"population: {exc}") from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        syn = synthesize_scan(spec)
    ctx.warnings.extend(str(w.message) for w in caught)
    trace = syn.trace
    ctx.record_input("scan", text=pio.format_csv("scan", [trace.axis, trace.values], trace.meta))
    ctx.write("inputs/scan_truth.json", pio.dumps_json(syn.truth()))
    return trace


def _run_rt_scan(ctx: _Context) -> dict:
    cfg = ctx.e.config
    trace = _resolve_scan(ctx)
    try:
        gate = GateConfig(**cfg.get("gate", {}))
    except TypeError as exc:
        raise ValidationError(str(exc)) from None
    cands = detect_dips(trace, **cfg.get("detect", {}))
    fits = fit_dips(trace, cands, workers=cfg.get("workers", 1))
    stats = linewidth_statistics(fits, gate)
    dips = [_dip_record(f, classify(f, gate)) for f in fits]
    results = {
        "n_samples": len(trace),
        "step_hz": trace.step,
        "dips": dips,
        "statistics": {
            "total": stats.total,
            "fitted": stats.fitted,
            "fraction": stats.fraction,
            "rejected": stats.rejected,
            "gamma_rt_min_hz": stats.min,
            "gamma_rt_max_hz": stats.max,
            "gamma_rt_median_hz": stats.median,
        },
        "gates": {"min_depth_snr": gate.min_depth_snr, "max_chi2_red": gate.max_chi2_red,
                  "max_rel_sigma": gate.max_rel_sigma},
        "ratio_table": [],
    }
    g, region = _geometry_from_config(cfg.get("geometry", {}))
    results["geometry"] = geometry_record(g, region, stats.fraction if stats.total else math.nan)

    good = [f for f in fits if classify(f, gate) is None]
    lam = frequency_to_wavelength(trace.axis)
    ctx.columns("plots/scan.dat", "wavelength_nm transmission", [lam[::-1] * 1e9, trace.values[::-1]])
    ctx.columns("plots/linewidths.dat", "wavelength_nm gamma_rt_mhz gamma_rt_sigma_mhz",
                [[frequency_to_wavelength(f.center) * 1e9 for f in good],
                 [f.gamma_rt / 1e6 for f in good], [f.sigma["gamma_rt"] / 1e6 for f in good]])
    pcfg = cfg.get("purcell", {})
    try:
        env = PurcellEnvelope(**pcfg)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"purcell: {exc}") from None
    lam_env = lam[lam < env.lambda_c]
    if lam_env.size:
        ctx.columns("plots/purcell_envelope.dat", "wavelength_nm envelope_mhz",
                    [lam_env[::-1] * 1e9, purcell_envelope(env, lam_env[::-1]) / 1e6])

    if "histogram" in ctx.e.inputs or "lifetime" in cfg:
        lcfg = cfg.get("lifetime", {})
        hist = _lifetime_hist(ctx, lcfg)
        dfit = ctx.guard("lifetime", fit_decay, hist, method=lcfg.get("fit", {}).get("method", "mle"))
        if dfit is not None:
            results["lifetime"] = _decay_record(dfit, hist, ctx, "plots/decay.dat")
            pool = good or [f for f in fits if f.converged]
            if pool:
                if "pair_center_hz" in cfg:
                    dip = min(pool, key=lambda f: abs(f.center - cfg["pair_center_hz"]))
                else:
                    dip = max(pool, key=lambda f: f.depth)
                r, sr = transform_ratio(dip, dfit)
                results["ratio_table"].append({
                    "center_hz": dip.center,
                    "gamma_rt_hz": dip.gamma_rt,
                    "gamma_rt_sigma_hz": dip.sigma["gamma_rt"],
                    "transform_limit_hz": dfit.transform_limit,
                    "transform_limit_sigma_hz": dfit.transform_limit_sigma,
                    "ratio": r,
                    "ratio_sigma": sr,
                })
    return results


def _run_lifetime(ctx: _Context) -> dict:
    cfg = ctx.e.config
    hist = _lifetime_hist(ctx, cfg)
    method = cfg.get("fit", {}).get("method", "mle")
    if method not in ("mle", "lsq"):
        raise ValidationError(f"unknown lifetime fit method {method!r}")
    fit = ctx.guard("lifetime", fit_decay, hist, method=method)
    return {"lifetime": None if fit is None else _decay_record(fit, hist, ctx, "plots/decay.dat")}


def _resolve_iv(ctx: _Context) -> np.ndarray:
    cfg = ctx.e.config
    if "iv" in ctx.e.inputs:
        path = ctx.e.inputs["iv"]
        data = pio.read_xy(path, "iv")
        ctx.record_input("iv", path=path)
        return data
    temp = cfg.get("temperature_k", 1.6)
    s = cfg.get("synth", {})
    ref = reference_params(temp)
    try:
        p = DiodeParams(i_sat=s.get("i_sat_a", ref.i_sat), n_ideality=s.get("n_ideality", ref.n_ideality),
                        temperature=temp, r_s=s.get("r_s_ohm", ref.r_s), r_p=s.get("r_p_ohm", ref.r_p))
    except ValueError as exc:
        raise ValidationError(f"iv synth: {exc}") from None
    v = np.linspace(s.get("v_min_v", -1.0), s.get("v_max_v", 1.0), s.get("n_points", 201))
    data = np.column_stack([v, diode_current(p, v)])
    ctx.record_input("iv", text=pio.format_csv("iv", [data[:, 0], data[:, 1]]))
    return data


def _run_iv(ctx: _Context) -> dict:
    cfg = ctx.e.config
    temp = cfg.get("temperature_k", 1.6)
    data = _resolve_iv(ctx)
    fit = ctx.guard("iv", fit_iv, data, noise_floor=cfg.get("fit", {}).get("noise_floor_a", 1e-12),
                    temperature=temp)
    if fit is None:
        return {"iv": None}
    p = fit.params
    model = diode_current(p, data[:, 0])
    ctx.columns("plots/iv.dat", "v_volts i_amps model_amps", [data[:, 0], data[:, 1], model])
    return {"iv": {
        "i_sat_a": p.i_sat, "i_sat_sigma_a": fit.sigma["i_sat"],
        "n_ideality": p.n_ideality, "n_ideality_sigma": fit.sigma["n_ideality"],
        "r_s_ohm": p.r_s, "r_s_sigma_ohm": fit.sigma["r_s"],
        "r_p_ohm": p.r_p, "r_p_sigma_ohm": fit.sigma["r_p"],
        "temperature_k": p.temperature,
        "current_at_minus_1v_a": diode_current(p, -1.0),
        "n_iter": fit.n_iter,
    }}


def _rc_setup(cfg: dict):
    att = cfg.get("attenuation", "exponential")
    if att not in ("exponential", "lowpass"):
        raise ValidationError(f"unknown attenuation {att!r}")
    dcfg, s = cfg.get("drive", {}), cfg.get("synth", {})
    try:
        resp = VoltageResponse(**cfg.get("response", {}))
        drive0 = RcDrive(v_ac=dcfg.get("v_ac_v", 0.1), v_dc=dcfg.get("v_dc_v", 0.0),
                         tau_rc=s.get("tau_rc_s", 0.4e-6), i0=s.get("i0_counts_per_s", 1e4))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"rc-sweep: {exc}") from None
    if resp.kind == "table":
        raise ValidationError("table responses are not configurable from JSON")
    return att, resp, drive0


def _resolve_rc(ctx: _Context) -> np.ndarray:
    cfg = ctx.e.config
    if "rc" in ctx.e.inputs:
        path = ctx.e.inputs["rc"]
        data = pio.read_xy(path, "rc")
        ctx.record_input("rc", path=path)
        return data
    att, resp, drive0 = _rc_setup(cfg)
    s = cfg.get("synth", {})
    f = np.geomspace(s.get("f_min_hz", 1e3), s.get("f_max_hz", 60e6), s.get("n_points", 40))
    data = synthesize_sweep(drive0, resp, f, noise=s.get("noise", 0.01), attenuation=att, rng=ctx.rng(3))
    ctx.record_input("rc", text=pio.format_csv("rc", [data[:, 0], data[:, 1]]))
    return data


def _run_rc(ctx: _Context) -> dict:
    cfg = ctx.e.config
    att, resp, drive0 = _rc_setup(cfg)
    data = _resolve_rc(ctx)
    # start from the midpoint estimate rather than the synthesis truth
    init = RcDrive(v_ac=drive0.v_ac, v_dc=drive0.v_dc, tau_rc=0.0, i0=0.0)
    fit = ctx.guard("rc", fit_tau_rc, data, init, resp, attenuation=att)
    if fit is None:
        return {"rc": None}
    r_s = cfg.get("r_s_ohm", 7e3)
    fitted = RcDrive(v_ac=drive0.v_ac, v_dc=drive0.v_dc, tau_rc=fit.tau_rc, i0=fit.i0)
    model = modulated_intensity(fitted, resp, data[:, 0], att)
    ctx.columns("plots/rc.dat", "f_ac_hz intensity_counts_per_s model", [data[:, 0], data[:, 1], model])
    return {"rc": {
        "tau_rc_s": fit.tau_rc, "tau_rc_sigma_s": fit.tau_sigma,
        "i0_counts_per_s": fit.i0, "i0_sigma_counts_per_s": fit.i0_sigma,
        "cutoff_hz": fit.cutoff, "cutoff_sigma_hz": fit.cutoff_sigma,
        "r_s_ohm": r_s, "capacitance_f": capacitance(fit.tau_rc, r_s),
        "attenuation": att, "chi2_red": fit.chi2_red,
        "cutoff_note": CUTOFF_NOTE,
    }}


def _resolve_plateau(ctx: _Context):
    cfg = ctx.e.config
    ec, gc = cfg.get("emitter", {}), cfg.get("grid", {})
    try:
        m = EmitterModel(nu0=ec.get("nu0_hz", 316e12), gamma_tot=ec.get("gamma_tot_hz", 500e6),
                         beta=ec.get("beta", 0.5), stark_slope=ec.get("stark_slope_hz_per_v", 1e12),
                         plateau=(ec.get("v_on_v", 0.2), ec.get("v_off_v", 0.24)))
    except ValueError as exc:
        raise ValidationError(f"emitter: {exc}") from None
    v = np.linspace(gc.get("v_min_v", 0.18), gc.get("v_max_v", 0.26), gc.get("n_v", 81))
    span = gc.get("detuning_span_hz", 80e9)
    nu = m.nu0 + np.linspace(-0.25 * span, 0.75 * span, gc.get("n_nu", 801))
    pm = synthesize_plateau(m, v, nu, noise=cfg.get("noise", 0.01), seed=int(ctx.rng(4).integers(2**63)))
    vv, nn = np.meshgrid(pm.v_grid, pm.nu_grid, indexing="ij")
    ctx.columns("inputs/plateau_map.dat", "v_gate_v freq_hz transmission",
                [vv.ravel(), nn.ravel(), pm.values.ravel()])
    return pm


def _run_plateau(ctx: _Context) -> dict:
    pm = _resolve_plateau(ctx)
    ridge = ctx.guard("plateau", extract_ridge, pm)
    if ridge is None:
        return {"plateau": None}
    slope, _, v_on, v_off = ridge
    v = pm.v_grid
    return {"plateau": {
        "stark_slope_hz_per_v": slope,
        "v_on_v": v_on, "v_off_v": v_off,
        "plateau_width_v": v_off - v_on,
        "voltage_step_v": float(v[1] - v[0]),
    }}


_RESOLVERS = {
    "rt-scan": _resolve_scan,
    "lifetime": lambda ctx: _lifetime_hist(ctx, ctx.e.config),
    "iv": _resolve_iv,
    "rc-sweep": _resolve_rc,
    "plateau-map": _resolve_plateau,
}

_RUNNERS = {
    "rt-scan": _run_rt_scan,
    "lifetime": _run_lifetime,
    "iv": _run_iv,
    "rc-sweep": _run_rc,
    "plateau-map": _run_plateau,
}


def run_experiment(e: Experiment, out_dir=None, *, keep_going: bool = False) -> Report:
    """Run ``e``; when ``out_dir`` is given, write report.txt, report.json,
    synthesized inputs and plot-data files there.

    Raises ValidationError for bad inputs/config and PipelineError for fitter
    failures (collected in ``Report.errors`` instead when ``keep_going``).
    """
    out = Path(out_dir) if out_dir is not None else None
    ctx = _Context(e, out, keep_going)
    results = _RUNNERS[e.kind](ctx)
    report = Report(
        kind=e.kind,
        results=results,
        provenance={"version": __version__, "seed": e.seed, "config": e.config,
                    "inputs": ctx.inputs, "schema_version": SCHEMA_VERSION},
        errors=ctx.errors,
        files=ctx.files,
        warnings=ctx.warnings,
    )
    if out is not None:
        pio.atomic_write(out / "report.json", report.to_json())
        pio.atomic_write(out / "report.txt", report.to_text())
    return report


def synthesize_inputs(e: Experiment, out_dir) -> tuple[list, list]:
    """Resolve (synthesize) the inputs of ``e`` into ``out_dir`` without fitting.

    Returns the written relative paths and any synthesis warnings.
    """
    ctx = _Context(e, Path(out_dir), keep_going=False)
    _RESOLVERS[e.kind](ctx)
    return sorted(ctx.files), ctx.warnings


def scenario_experiment(name: str = "population-79", seed: int = SCENARIO_SEED, **overrides) -> Experiment:
    if name not in SCENARIOS:
        raise ValidationError(f"unknown scenario {name!r}")
    return Experiment("rt-scan", seed=seed, config=merge(SCENARIOS[name], overrides))


def report_schema() -> dict:
    """The published JSON schema for report sidecars."""
    import json
    from importlib import resources

    return json.loads(resources.files("pcwqd").joinpath("report_schema.json").read_text())
