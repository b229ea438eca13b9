"""
Execute a parsed scenario and write its tables.

Every experiment writes one or more CSV files plus ``manifest.json``.  The
outputs depend only on the scenario and its seed, never on the worker count
or the wall clock, so two runs produce byte-identical files.
"""

from dataclasses import dataclass, field
from concurrent.futures import ProcessPoolExecutor
import csv
import hashlib
import io
import json
import os
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import fitkit
from . import photostream as ps
from . import protocols as pr
from .config import resolved_parameters, ScenarioError
from .dynamics.cw import cw_rf_spectrum, intensity_for_saturation
from .dynamics.rates import relaxation_time
from .levels import boltzmann_ratio
from .pulses import load_samples


class BudgetError(ValueError):
    """The scenario would exceed its trajectory or grid budget."""

    def __init__(self, message, suggestions):
        self.suggestions = list(suggestions)
        super().__init__(message + "; try: " + "; ".join(self.suggestions))


@dataclass
class RunOutput:
    out_dir: Path
    files: dict
    summary: dict
    manifest: dict = field(repr=False, default_factory=dict)


# --- writing ---------------------------------------------------------------

def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def json_text(obj):
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def versions():
    return {"ramanqd": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


# --- building blocks from the scenario -------------------------------------

def control_spec(scn, **override):
    seq = dict(scn["sequence"])
    seq.update(override)
    shape = seq["control_shape"]
    I = seq["control_intensity"]
    w = seq["control_fwhm"]
    if shape == "square":
        return pr.square_control(I, seq["control_duration"])
    if shape == "gaussian":
        return pr.gaussian_control(I, w)
    if shape == "double_gaussian":
        return {"shape": "double_gaussian", "center1": 2.0 * w,
                "center2": 2.0 * w + seq["control_separation"], "fwhm": w,
                "ratio": seq["control_ratio"], "peak_intensity": I}
    path = Path(seq["control_samples"])
    if not path.is_absolute() and scn.source and os.path.exists(scn.source):
        path = Path(scn.source).parent / path
    env = load_samples(path, I)
    spec = env.to_spec()
    spec["values"] = env.values
    return spec


def _scheme(scn):
    return pr.SCHEMES[scn["sequence"]["scheme"]]


def _nonres(scn):
    return scn["level_system"]["nonres_intensity"]


def _nodes(scn):
    b = scn["budget"]
    return {"n_nodes": b["n_nodes"], "n_spin_nodes": b["n_spin_nodes"]}


def _etalon(scn):
    d = scn["detection"]
    return ps.EtalonModel(d["etalon_fsr"], d["etalon_linewidth"], d["etalon_peak"])


def _check_grid(scn, spec, grid_step, tail):
    seq = pr.raman_sequence(scn.level_system(), spec, _scheme(scn),
                            scn["sequence"]["detuning"])
    span = seq.control.support[1] + tail
    n = int(round(span / grid_step)) + 1
    budget = scn["budget"]["max_grid"]
    if n > budget:
        need = span / (budget - 1)
        raise BudgetError(
            f"correlation grid of {n} points exceeds max_grid={budget}",
            [f"grid_step >= {need:.3g} ns",
             f"tail <= {max(0.0, budget * grid_step - seq.control.support[1]):.3g} ns",
             f"max_grid >= {n}"])


# --- experiments -----------------------------------------------------------

def run_cw_scan(scn, workers):
    ls, noise, ex = scn.level_system(), scn.noise(), scn["experiment"]
    nonres = _nonres(scn)
    scan = np.linspace(ex["scan_start"], ex["scan_stop"], ex["scan_points"])
    I = intensity_for_saturation(ls, 1, ex["saturation"])
    fixed = None
    if ex["fixed_label"]:
        fixed = (ls.frequency(ex["fixed_label"]),
                 intensity_for_saturation(ls, ex["fixed_label"], ex["fixed_saturation"]))
    r = cw_rf_spectrum(ls, noise, scan, I, fixed, scn["detection"]["red_leak"], nonres,
                       scn["budget"]["n_nodes"])
    red, blue = r["red"], r["blue"]
    nu = {k: ls.frequency(k) for k in (1, 2, 3, 4)}
    summary = {"scan_intensity": I, "transition_frequencies": nu,
               "red_peak": float(scan[np.argmax(red)]),
               "blue_peak": float(scan[np.argmax(blue)])}
    # pumping dips: signal at the spin-flip line against a lorentzian fitted
    # to the trace with that neighbourhood masked out
    for name, trace, label in (("red", red, 2), ("blue", blue, 3)):
        m = np.abs(scan - nu[label]) > 0.75
        fit = fitkit.fit_lorentzian(scan[m], trace[m])
        model = fitkit.lorentzian(nu[label], fit["center"], fit["fwhm"], fit["amplitude"],
                                  fit["offset"])
        summary[f"{name}_dip_ratio"] = float(np.interp(nu[label], scan, trace) / model)
    if fixed is not None:
        base = float(np.median(blue))
        summary["blue_at_3_over_median"] = float(np.interp(nu[3], scan, blue) / base)
        summary["red_at_2_over_median"] = float(np.interp(nu[2], scan, red) / np.median(red))
        summary["preparation_efficiency"] = pr.preparation(
            ls, noise, nonres, ex["probe_intensity"], ex["prep_saturation"])
    files = {"cw_scan.csv": csv_text(("frequency", "red", "blue"), zip(scan, red, blue))}
    return files, summary


def run_spin_pumping(scn, workers):
    ls, noise, ex = scn.level_system(), scn.noise(), scn["experiment"]
    t, pop, fit = pr.pumping_transient(ls, noise, ex["label"], ex["saturation"],
                                       ex["duration"], _nonres(scn),
                                       dt=scn["sequence"]["dt"])
    keep = _stride(t, ex["save_step"])
    files = {"spin_pumping.csv": csv_text(("time", "population"), zip(t[keep], pop[keep]))}
    return files, {"tau": fit["tau"], "fit": fit.to_dict()}


def run_spin_relaxation(scn, workers):
    ls, noise, ex = scn.level_system(), scn.noise(), scn["experiment"]
    t, pop, fit = pr.relaxation_transient(ls, noise, ex["duration"], ex["step"], _nonres(scn))
    r = boltzmann_ratio(ls)
    eq = r / (1 + r)
    files = {"spin_relaxation.csv": csv_text(("time", "population_up", "boltzmann"),
                                             ((a, b, eq) for a, b in zip(t, pop)))}
    return files, {"tau": fit["tau"], "boltzmann_population_up": eq,
                   "predicted_tau": relaxation_time(ls, noise, _nonres(scn)),
                   "fit": fit.to_dict()}


def _stride(t, step):
    k = max(1, int(round(step / (t[1] - t[0])))) if len(t) > 1 else 1
    return np.arange(0, len(t), k)


def run_shaping(scn, workers):
    ls, noise, ex, seq = scn.level_system(), scn.noise(), scn["experiment"], scn["sequence"]
    shape = seq["control_shape"]
    nonres = _nonres(scn)
    rows, results = [], []
    for v in ex["values"]:
        if shape == "square":
            spec = control_spec(scn, control_intensity=v)
        elif shape == "gaussian":
            I = ex["area"] / v if ex["area"] > 0 else seq["control_intensity"]
            spec = control_spec(scn, control_fwhm=v, control_intensity=I)
        elif shape == "double_gaussian":
            spec = control_spec(scn, control_separation=v)
        else:
            spec = control_spec(scn)
        t, w, _ = pr.raman_waveform(ls, noise, spec, _scheme(scn), seq["detuning"], nonres,
                                    dt=seq["dt"],
                                    save_every=max(1, int(round(ex["save_step"] / seq["dt"]))),
                                    eom_rise_time=seq["eom_rise_time"])
        item = {"value": v, "photons": float(np.trapezoid(w, t))}
        if shape == "square":
            m = (t >= 2.0) & (t <= spec["duration"])
            fit = fitkit.fit_exponential(t[m], w[m])
            item["tau"] = fit["tau"]
            item["converged"] = fit.converged
        elif shape in ("gaussian", "samples"):
            item["fwhm"] = pr.waveform_fwhm(t, w)
        else:
            item["peak_separation"] = _peak_separation(t, w)
        results.append(item)
        rows.extend((v, a, b) for a, b in zip(t, w))
    summary = {"shape": shape, "items": results}
    if shape == "square":
        T = relaxation_time(ls, noise, nonres)
        I = np.array([r["value"] for r in results])
        tau = np.array([r["tau"] for r in results])
        raw = tau * I
        corrected = I / (1.0 / tau - 1.0 / T)
        summary.update(relaxation_time=T, tau_times_intensity=raw,
                       corrected_tau_times_intensity=corrected,
                       raw_spread=_spread(raw), corrected_spread=_spread(corrected),
                       tau_min=float(tau.min()), tau_max=float(tau.max()))
    files = {"waveforms.csv": csv_text(("value", "time", "rate"), rows),
             "shaping_summary.csv": csv_text(tuple(results[0]),
                                             (tuple(r.values()) for r in results))}
    return files, summary


def _spread(x):
    """Largest relative deviation from the mean."""
    x = np.asarray(x, float)
    return float(np.abs(x / x.mean() - 1).max())


def _peak_separation(t, w):
    # two largest local maxima
    i = np.flatnonzero((w[1:-1] > w[:-2]) & (w[1:-1] >= w[2:])) + 1
    if len(i) < 2:
        return float("nan")
    top = i[np.argsort(w[i])[-2:]]
    return float(abs(t[top[1]] - t[top[0]]))


def run_hbt(scn, workers):
    ls, noise, ex, seq, det = (scn.level_system(), scn.noise(), scn["experiment"],
                               scn["sequence"], scn["detection"])
    spec = control_spec(scn)
    pump = seq["pump_duration"] if seq["pump_duration"] is not None else 60.0
    period = seq["period"] if seq["period"] is not None else 100.0
    gate = None
    if det["gate_start"] is not None and det["gate_stop"] is not None:
        gate = (det["gate_start"], det["gate_stop"])
    labels = [int(x) for x in det["labels"]] or None
    rec, coinc, g2, err = pr.hbt_experiment(
        ls, noise, spec, ex["n_traj"], scn.seed, _scheme(scn), pump, period, seq["gap"],
        _nonres(scn), seq["n_repeats"], workers, det["bin_width"], gate,
        det["efficiency"], det["dark_rate"], labels)
    events = len(rec) / rec.n_sequences
    ks, a = ps.peak_areas(coinc, period, ex["max_order"])
    areas = {int(k): int(v) for k, v in zip(ks, a)}
    files = {"coincidences.csv": coinc.to_csv(),
             "clicks.csv": csv_text(("sequence", "time", "label"),
                                    zip(rec.sequence, rec.times, rec.labels))}
    return files, {"g2_zero": g2, "g2_zero_error": err, "events_per_sequence": events,
                   "n_sequences": rec.n_sequences, "peak_areas": areas}


def _spectrum(scn, spec, detuning, nonres, ex):
    ls, noise = scn.level_system(), scn.noise()
    half = ex["spectrum_span"]
    freqs = np.linspace(-half, half, ex["spectrum_points"])
    f, S = pr.raman_spectrum(ls, noise, spec, _scheme(scn), detuning, nonres,
                             ex["grid_step"], ex["tail"], freqs,
                             max_grid=scn["budget"]["max_grid"], **_nodes(scn))
    scan = np.linspace(ex["scan_start"], ex["scan_stop"], ex["scan_points"])
    sp, fit = pr.etalon_linewidth(f, S, _etalon(scn), scan)
    return f, S, sp, fit


def _spectrum_task(args):
    scn, spec, detuning, nonres = args
    f, S, sp, fit = _spectrum(scn, spec, detuning, nonres, scn["experiment"])
    return float(np.trapezoid(S, f)), sp, fit


def _map(fn, items, workers):
    # results come back in input order, so output never depends on workers
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _fit_row(fit):
    p, e = fit.params, fit.errors
    return {"center": p["center"], "center_err": e.get("center", float("nan")),
            "amplitude": p["amplitude"], "offset": p["offset"],
            "fwhm": p["fwhm_deconvolved"], "fwhm_err": e.get("fwhm", float("nan")),
            "fwhm_fitted": p["fwhm_fitted"], "converged": fit.converged,
            "flags": "|".join(fit.flags)}


def run_spectrum_scan(scn, workers):
    ex = scn["experiment"]
    spec = control_spec(scn)
    _check_grid(scn, spec, ex["grid_step"], ex["tail"])
    rows, table = [], []
    jobs = [(scn, spec, d, _nonres(scn)) for d in ex["detunings"]]
    for d, (photons, sp, fit) in zip(ex["detunings"], _map(_spectrum_task, jobs, workers)):
        rows.extend((d, a, b) for a, b in zip(sp.detunings, sp.counts))
        table.append({"detuning_L": d, "photons": photons, **_fit_row(fit)})
    x = np.array([r["detuning_L"] for r in table])
    summary = {"fits": table}
    if len(x) >= 2:
        lin = fitkit.fit_linear(x, np.array([r["center"] for r in table]))
        summary["center_slope"] = lin["slope"]
        summary["center_intercept"] = lin["intercept"]
        summary["center_r2"] = lin.r2
    if len(x) >= 4:
        lor = fitkit.fit_lorentzian(x, np.array([r["amplitude"] for r in table]))
        summary["amplitude_lorentzian"] = lor.params
        summary["amplitude_r2"] = lor.r2
    files = {"spectra.csv": csv_text(("detuning_L", "etalon_detuning", "counts"), rows),
             "spectrum_fits.csv": csv_text(tuple(table[0]), (tuple(r.values()) for r in table))}
    return files, summary


def run_linewidth(scn, workers):
    ex = scn["experiment"]
    rows, table = [], []
    jobs = []
    for v in ex["values"]:
        if ex["sweep"] == "control":
            spec, nonres = control_spec(scn, control_intensity=v), _nonres(scn)
        else:
            spec, nonres = control_spec(scn), v
        _check_grid(scn, spec, ex["grid_step"], ex["tail"])
        jobs.append((scn, spec, scn["sequence"]["detuning"], nonres))
    for v, (photons, sp, fit) in zip(ex["values"], _map(_spectrum_task, jobs, workers)):
        rows.extend((v, a, b) for a, b in zip(sp.detunings, sp.counts))
        table.append({"value": v, "photons": photons, **_fit_row(fit)})
    x = np.array([r["value"] for r in table])
    w = np.array([r["fwhm"] for r in table])
    summary = {"sweep": ex["sweep"], "fits": table, "fwhm_min": float(w.min()),
               "fwhm_max": float(w.max()), "fwhm_at_lowest": float(w[np.argmin(x)])}
    if ex["sweep"] == "control" and len(x) >= 2:
        lin = fitkit.fit_linear(x, w)
        summary.update(slope=lin["slope"], intercept=lin["intercept"], r2=lin.r2)
    if ex["sweep"] == "nonres":
        summary["max_over_min"] = float(w.max() / w.min())
        if len(x) >= 4:
            sat = fitkit.fit_saturation(x, w)
            summary["saturation_fit"] = sat.to_dict()
    files = {"spectra.csv": csv_text(("value", "etalon_detuning", "counts"), rows),
             "linewidths.csv": csv_text(tuple(table[0]), (tuple(r.values()) for r in table))}
    return files, summary


EXPERIMENT_RUNNERS = {
    "cw_scan": run_cw_scan,
    "spin_pumping": run_spin_pumping,
    "spin_relaxation": run_spin_relaxation,
    "shaping": run_shaping,
    "hbt": run_hbt,
    "spectrum_scan": run_spectrum_scan,
    "linewidth_vs_intensity": run_linewidth,
}


def execute(scn, workers=1):
    """Run the experiment in memory; returns (files, summary)."""
    return EXPERIMENT_RUNNERS[scn.experiment](scn, workers)


def run_scenario(scn, out_dir, workers=1, extra=None):
    """Run ``scn`` and write its CSVs and manifest into ``out_dir``.

    ``extra`` is an optional callable ``summary -> dict`` merged into the
    manifest (used for figure checks).
    """
    files, summary = execute(scn, workers)
    return write_outputs(scn, out_dir, files, summary, extra(summary) if extra else None)


def write_outputs(scn, out_dir, files, summary, extra=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prefix = scn["output"]["prefix"]
    digests = {}
    for name, text in files.items():
        path = out / f"{prefix}{name}"
        path.write_text(text, encoding="utf-8", newline="\n")
        digests[path.name] = hashlib.sha256(text.encode()).hexdigest()
    manifest = {"scenario": scn.name, "experiment": scn.experiment, "seed": scn.seed,
                "parameters": resolved_parameters(scn), "versions": versions(),
                "summary": summary, "files": digests,
                "uncertainty": "curvature 1-sigma"}
    if extra:
        manifest.update(extra)
    (out / f"{prefix}manifest.json").write_text(json_text(manifest), encoding="utf-8",
                                                newline="\n")
    return RunOutput(out, digests, summary, manifest)


__all__ = ["run_scenario", "execute", "BudgetError", "RunOutput", "csv_text", "json_text",
           "EXPERIMENT_RUNNERS", "ScenarioError"]
