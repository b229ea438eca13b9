"""
Scenario files: sectioned key = value text with a typed, strict schema.

Unknown sections or keys are rejected with their line number.  Floats are
written with ``repr`` so parse -> write -> parse is the identity.
"""

from dataclasses import dataclass, field
import configparser
import io
import re

from .levels import ValidationError, build_level_system, NoiseParams, LevelSystem
from .protocols import NOISE, NONRES_LOW

EXPERIMENTS = ("cw_scan", "spin_pumping", "spin_relaxation", "shaping", "hbt",
               "spectrum_scan", "linewidth_vs_intensity")


class ScenarioError(ValueError):
    def __init__(self, message, line=None, section=None, key=None):
        self.line = line
        self.section = section
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if section is not None:
            where.append(f"[{section}]" + (f" {key}" if key else ""))
        super().__init__(f"{': '.join([', '.join(where), message]) if where else message}")


def _floats(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(float(x) for x in re.split(r"[,\s]+", text) if x)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


PARSERS = {float: float, int: lambda s: int(s, 0), str: str.strip, bool: _bool,
           "floats": _floats, "opt_float": _opt_float}


def _fmt(kind, v):
    if kind == "floats":
        return ", ".join(repr(float(x)) for x in v)
    if kind == "opt_float":
        return "none" if v is None else repr(float(v))
    if kind is float:
        return repr(float(v))
    if kind is bool:
        return "true" if v else "false"
    return str(v)


_LS = build_level_system()
_NOISE = NOISE  # calibrated operating point

# section -> key -> (type, default)
SCHEMA = {
    "scenario": {
        "name": (str, "scenario"),
        "experiment": (str, None),
        "seed": (int, 0),
        "description": (str, ""),
    },
    "level_system": {
        "g_e": (float, _LS.g_e), "g_h": (float, _LS.g_h), "B": (float, _LS.B),
        "T": (float, _LS.T), "Gamma": (float, _LS.Gamma),
        "branching": (float, _LS.branching),
        "nonres_intensity": (float, NONRES_LOW),
    },
    "noise": {
        "sigma_charge_max": (float, _NOISE.sigma_charge_max),
        "I_sat_nr": (float, _NOISE.I_sat_nr),
        "kappa_nr_coeff": (float, _NOISE.kappa_nr_coeff),
        "gamma_flip_up_down": (float, _NOISE.gamma_flip_up_down),
        "T2_star_hole": (float, _NOISE.T2_star_hole),
        "spin_charge_ratio": (float, _NOISE.spin_charge_ratio),
        "spin_charge_correlation": (float, _NOISE.spin_charge_correlation),
    },
    "sequence": {
        "scheme": (str, "forward"),
        "pump_duration": ("opt_float", None),
        "pump_saturation": (float, 2.0),
        "gap": (float, 5.0),
        "period": ("opt_float", None),
        "n_repeats": (int, 1),
        "control_shape": (str, "gaussian"),
        "control_intensity": (float, 1.0),
        "control_fwhm": (float, 5.0),
        "control_duration": (float, 100.0),
        "control_separation": (float, 20.0),
        "control_ratio": (float, 1.0),
        "control_samples": (str, ""),
        "detuning": (float, 0.0),
        "eom_rise_time": (float, 0.2),
        "dt": (float, 0.01),
    },
    "detection": {
        "efficiency": (float, 1.0),
        "dark_rate": (float, 0.0),
        "gate_start": ("opt_float", None),
        "gate_stop": ("opt_float", None),
        "bin_width": (float, 2.0),
        "labels": ("floats", ()),
        "etalon_fsr": (float, 12.9),
        "etalon_linewidth": (float, 0.25),
        "etalon_peak": (float, 1.0),
        "integration_time": (float, 100.0),
        "count_rate": (float, 2.0e6),
        "poisson": (bool, False),
        "red_leak": (float, 0.1),
    },
    "output": {
        "prefix": (str, ""),
    },
    "budget": {
        "max_trajectories": (int, 100000),
        "max_grid": (int, 2000),
        "n_nodes": (int, 9),
        "n_spin_nodes": (int, 5),
    },
}

# per-experiment keys of the [experiment] section
EXPERIMENT_SCHEMA = {
    "cw_scan": {
        "scan_start": (float, -12.0), "scan_stop": (float, 12.0), "scan_points": (int, 241),
        "saturation": (float, 2.0),
        "fixed_label": (int, 0), "fixed_saturation": (float, 1.0),
        "probe_intensity": (float, 100.0), "prep_saturation": (float, 4.0),
    },
    "spin_pumping": {
        "label": (int, 4), "saturation": (float, 2.0), "duration": (float, 400.0),
        "save_step": (float, 0.5),
    },
    "spin_relaxation": {
        "duration": (float, 5000.0), "step": (float, 1.0),
    },
    "shaping": {
        "values": ("floats", ()), "area": (float, 0.0),
        "save_step": (float, 0.1),
    },
    "hbt": {
        "n_traj": (int, 1000), "max_order": (int, 5),
    },
    "spectrum_scan": {
        "detunings": ("floats", (0.0,)), "grid_step": (float, 0.2), "tail": (float, 10.0),
        "scan_start": (float, -3.0), "scan_stop": (float, 3.0), "scan_points": (int, 241),
        "spectrum_span": (float, 4.0), "spectrum_points": (int, 801),
    },
    "linewidth_vs_intensity": {
        "sweep": (str, "control"), "values": ("floats", ()), "grid_step": (float, 0.2),
        "tail": (float, 10.0), "scan_start": (float, -3.0), "scan_stop": (float, 3.0),
        "scan_points": (int, 241), "spectrum_span": (float, 4.0),
        "spectrum_points": (int, 801),
    },
}

SECTION_ORDER = ("scenario", "level_system", "noise", "sequence", "detection", "experiment",
                 "output", "budget")


@dataclass
class Scenario:
    sections: dict = field(default_factory=dict)
    source: str = ""

    @property
    def experiment(self):
        return self.sections["scenario"]["experiment"]

    @property
    def seed(self):
        return self.sections["scenario"]["seed"]

    @property
    def name(self):
        return self.sections["scenario"]["name"]

    def __getitem__(self, section):
        return self.sections[section]

    def level_system(self):
        return build_level_system(**self.sections["level_system"])

    def noise(self):
        return NoiseParams(**self.sections["noise"])

    def with_seed(self, seed):
        s = {k: dict(v) for k, v in self.sections.items()}
        s["scenario"]["seed"] = int(seed)
        return Scenario(s, self.source)

    def to_text(self):
        return dumps(self)

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.sections == other.sections


def _schema_for(section, experiment):
    if section == "experiment":
        return EXPERIMENT_SCHEMA[experiment]
    return SCHEMA[section]


def _key_lines(text):
    """Map (section, key) -> line number for diagnostics."""
    out = {}
    section = None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = i
            continue
        key = re.split(r"[=:]", line, 1)[0].strip()
        out[(section, key)] = i
    return out


def loads(text, source="<string>"):
    cp = configparser.ConfigParser(interpolation=None, strict=True,
                                   inline_comment_prefixes=("#", ";"),
                                   default_section="__never__")
    cp.optionxform = str  # keys are case sensitive
    try:
        cp.read_string(text, source=source)
    except configparser.Error as e:
        raise ScenarioError(str(e).replace("\n", " "), getattr(e, "lineno", None)) from None
    lines = _key_lines(text)
    if "scenario" not in cp:
        raise ScenarioError("missing [scenario] section")
    exp = cp["scenario"].get("experiment", "").strip()
    if exp not in EXPERIMENTS:
        raise ScenarioError(f"experiment must be one of {', '.join(EXPERIMENTS)}, got {exp!r}",
                            lines.get(("scenario", "experiment")), "scenario", "experiment")
    sections = {}
    for name in cp.sections():
        if name not in SECTION_ORDER:
            raise ScenarioError(f"unknown section [{name}]", lines.get((name, None)))
    for name in SECTION_ORDER:
        schema = _schema_for(name, exp)
        values = {k: d for k, (t, d) in schema.items()}
        if name in cp:
            for key, raw in cp[name].items():
                if key not in schema:
                    raise ScenarioError(f"unknown key {key!r}", lines.get((name, key)), name, key)
                kind = schema[key][0]
                try:
                    values[key] = PARSERS[kind](raw)
                except ValueError as e:
                    raise ScenarioError(f"bad value {raw!r}: {e}", lines.get((name, key)),
                                        name, key) from None
        sections[name] = values
    scn = Scenario(sections, source)
    validate(scn, lines)
    return scn


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read(), str(path))


def dumps(scn):
    buf = io.StringIO()
    exp = scn.experiment
    for name in SECTION_ORDER:
        schema = _schema_for(name, exp)
        buf.write(f"[{name}]\n")
        for key, (kind, _) in schema.items():
            buf.write(f"{key} = {_fmt(kind, scn.sections[name][key])}\n")
        buf.write("\n")
    return buf.getvalue()


def validate(scn, lines=None):
    """Physical and structural checks; raises ScenarioError with the offending field."""
    lines = lines or {}

    def err(section, key, msg):
        raise ScenarioError(msg, lines.get((section, key)), section, key)

    try:
        scn.level_system()
    except ValidationError as e:
        err("level_system", e.field, str(e))
    try:
        scn.noise()
    except ValidationError as e:
        err("noise", e.field, str(e))
    seq = scn["sequence"]
    if seq["scheme"] not in ("forward", "reverse"):
        err("sequence", "scheme", "scheme must be forward or reverse")
    if seq["control_shape"] not in ("square", "gaussian", "double_gaussian", "samples"):
        err("sequence", "control_shape", "unknown control shape")
    if seq["control_shape"] == "samples" and not seq["control_samples"]:
        err("sequence", "control_samples", "samples shape needs a control_samples file")
    for key in ("dt", "control_fwhm", "control_duration"):
        if not seq[key] > 0:
            err("sequence", key, f"{key} must be > 0")
    if seq["n_repeats"] < 1:
        err("sequence", "n_repeats", "n_repeats must be >= 1")
    det = scn["detection"]
    if not 0 < det["efficiency"] <= 1:
        err("detection", "efficiency", "efficiency must lie in (0, 1]")
    if det["dark_rate"] < 0:
        err("detection", "dark_rate", "dark_rate must be >= 0")
    if not det["bin_width"] > 0:
        err("detection", "bin_width", "bin_width must be > 0")
    if not 0 < det["etalon_linewidth"] < det["etalon_fsr"]:
        err("detection", "etalon_linewidth", "need 0 < etalon_linewidth < etalon_fsr")
    if not (0 <= scn.seed < 2 ** 64):
        err("scenario", "seed", "seed must be a 64-bit unsigned integer")
    ex = scn["experiment"]
    if scn.experiment == "linewidth_vs_intensity" and ex["sweep"] not in ("control", "nonres"):
        err("experiment", "sweep", "sweep must be control or nonres")
    if scn.experiment in ("shaping", "linewidth_vs_intensity") and not ex["values"]:
        err("experiment", "values", "values must list at least one entry")
    if scn.experiment == "hbt" and ex["n_traj"] > scn["budget"]["max_trajectories"]:
        err("experiment", "n_traj",
            f"n_traj={ex['n_traj']} exceeds the budget of {scn['budget']['max_trajectories']}; "
            f"reduce n_traj or raise max_trajectories")
    return scn


def resolved_parameters(scn):
    """Every physical parameter the run uses, including defaults."""
    ls = scn.level_system()
    out = {"level_system": ls.to_dict(), "noise": scn.noise().to_dict()}
    out.update({k: dict(v) for k, v in scn.sections.items()
                if k not in ("level_system", "noise")})
    return out


__all__ = ["Scenario", "ScenarioError", "loads", "load", "dumps", "validate",
           "resolved_parameters", "EXPERIMENTS", "SCHEMA", "EXPERIMENT_SCHEMA", "LevelSystem"]
