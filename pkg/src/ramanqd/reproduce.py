"""Bundled figure scenarios and their pass/fail checks."""

from dataclasses import dataclass
from importlib import resources
import math

from . import config
from .runner import run_scenario

FIGURES = {
    "2a": "fig2a.scn", "2b": "fig2b.scn", "2c": "fig2c.scn", "2d": "fig2d.scn",
    "3a": "fig3a.scn", "3b": "fig3b.scn", "3c": "fig3c.scn", "3d": "fig3d.scn",
    "4a": "fig4abc.scn", "4b": "fig4abc.scn", "4c": "fig4abc.scn",
    "4d": "fig4d.scn", "4e": "fig4e.scn",
}

TARGET_PUMPING_TIME = 50.0  # ns
TARGET_RELAXATION_TIME = 950.0  # ns
TARGET_MIN_LINEWIDTH = 0.200  # GHz
GAUSSIAN_TARGETS = (5.0, 15.0, 23.0, 64.0)  # ns
TAU_RANGE = (14.0, 245.0)  # ns


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


class UnknownFigureError(KeyError):
    def __str__(self):
        return f"unknown figure id {self.args[0]!r}; choose from {', '.join(FIGURES)}"


def scenario_text(fig):
    try:
        name = FIGURES[fig]
    except KeyError:
        raise UnknownFigureError(fig) from None
    return resources.files("ramanqd.scenarios").joinpath(name).read_text(encoding="utf-8")


def load_figure(fig):
    return config.loads(scenario_text(fig), f"<bundled {FIGURES.get(fig, fig)}>")


def _within(x, target, rel):
    return abs(x / target - 1) <= rel


def check(fig, s):
    """Checks on the run summary ``s`` of figure ``fig``."""
    out = []
    if fig == "2a":
        nu = s["transition_frequencies"]
        out.append(Check("red peak at transition 1", abs(s["red_peak"] - nu[1]) < 0.5,
                         f"{s['red_peak']:.3f} GHz"))
        out.append(Check("blue peak at transition 4", abs(s["blue_peak"] - nu[4]) < 0.5,
                         f"{s['blue_peak']:.3f} GHz"))
        out.append(Check("red pumping dip at transition 2", s["red_dip_ratio"] < 0.95,
                         f"signal/lorentzian = {s['red_dip_ratio']:.3f}"))
        out.append(Check("blue pumping dip at transition 3", s["blue_dip_ratio"] < 0.95,
                         f"signal/lorentzian = {s['blue_dip_ratio']:.3f}"))
    elif fig == "2b":
        out.append(Check("pumping time 50 ns +-20%", _within(s["tau"], TARGET_PUMPING_TIME, 0.2),
                         f"tau = {s['tau']:.2f} ns"))
    elif fig == "2c":
        out.append(Check("relaxation time 0.95 us +-5%",
                         _within(s["tau"], TARGET_RELAXATION_TIME, 0.05),
                         f"tau = {s['tau']:.1f} ns"))
    elif fig == "2d":
        out.append(Check("preparation efficiency >= 0.95", s["preparation_efficiency"] >= 0.95,
                         f"{s['preparation_efficiency']:.4f}"))
        out.append(Check("new peak at transition 3", s["blue_at_3_over_median"] > 1.5,
                         f"blue(3)/median = {s['blue_at_3_over_median']:.2f}"))
        out.append(Check("red reduced at transition 2", s["red_at_2_over_median"] < 0.95,
                         f"red(2)/median = {s['red_at_2_over_median']:.3f}"))
    elif fig == "3a":
        out.append(Check("tau_R x intensity constant within 5% (relaxation corrected)",
                         s["corrected_spread"] <= 0.05,
                         f"spread {s['corrected_spread']:.3%} (raw {s['raw_spread']:.3%})"))
        out.append(Check("shortest tau_R = 14 ns +-10%", _within(s["tau_min"], TAU_RANGE[0], 0.1),
                         f"{s['tau_min']:.2f} ns"))
        out.append(Check("longest tau_R = 245 ns +-10%", _within(s["tau_max"], TAU_RANGE[1], 0.1),
                         f"{s['tau_max']:.1f} ns"))
    elif fig == "3b":
        for item, target in zip(s["items"], GAUSSIAN_TARGETS):
            out.append(Check(f"{target:g} ns gaussian FWHM +-10%",
                             _within(item["fwhm"], target, 0.1), f"{item['fwhm']:.2f} ns"))
    elif fig == "3c":
        for item in s["items"]:
            sep = item["peak_separation"]
            ok = not math.isnan(sep) and _within(sep, item["value"], 0.1)
            out.append(Check(f"two time bins {item['value']:g} ns apart", ok, f"{sep:.2f} ns"))
    elif fig == "3d":
        g = s["g2_zero"]
        out.append(Check("g2(0) in [0.05, 0.35]", 0.05 <= g <= 0.35,
                         f"{g:.3f} +- {s['g2_zero_error']:.3f}"))
    elif fig == "4a":
        bad = [f["detuning_L"] for f in s["fits"] if not f["converged"]]
        out.append(Check("all Voigt fits converged", not bad,
                         "linewidths " + ", ".join(f"{f['fwhm']:.3f}" for f in s["fits"]) + " GHz"))
    elif fig == "4b":
        out.append(Check("center vs detuning slope 1.00 +-0.05", abs(s["center_slope"] - 1) <= 0.05,
                         f"slope {s['center_slope']:.4f}"))
    elif fig == "4c":
        fwhm = s["amplitude_lorentzian"]["fwhm"]
        out.append(Check("amplitude vs detuning lorentzian R2 > 0.95", s["amplitude_r2"] > 0.95,
                         f"R2 {s['amplitude_r2']:.4f}, FWHM {fwhm:.3f} GHz"))
    elif fig == "4d":
        out.append(Check("linewidth linear in control intensity (R2 > 0.95)", s["r2"] > 0.95,
                         f"R2 {s['r2']:.4f}, slope {s['slope'] * 1e3:.1f} MHz per nW/um^2"))
        out.append(Check("minimum linewidth 200 MHz +-10%",
                         _within(s["fwhm_at_lowest"], TARGET_MIN_LINEWIDTH, 0.1),
                         f"{s['fwhm_at_lowest'] * 1e3:.1f} MHz"))
    elif fig == "4e":
        r = s["max_over_min"]
        out.append(Check("nonresonant broadening max/min = 2 +-0.3", abs(r - 2) <= 0.3,
                         f"ratio {r:.3f}"))
    return out


def reproduce(fig, out_dir, workers=1, seed=None):
    """Run the bundled scenario of ``fig`` and return (RunOutput, checks)."""
    scn = load_figure(fig)
    if seed is not None:
        scn = scn.with_seed(seed)
    checks = []

    def extra(summary):
        checks.extend(check(fig, summary))
        return {"figure": fig, "checks": [{"name": c.name, "passed": c.passed,
                                           "detail": c.detail} for c in checks]}

    res = run_scenario(scn, out_dir, workers, extra)
    return res, checks


__all__ = ["FIGURES", "reproduce", "check", "load_figure", "Check", "UnknownFigureError"]
