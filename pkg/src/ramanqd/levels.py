"""
Level structure of a single-hole charged quantum dot in a Faraday field.

Basis ordering used throughout the package::

    0  |v>     hole spin down            (ground)
    1  |^>     hole spin up              (ground)
    2  |v^d>   trion, electron spin down (excited)
    3  |^vu>   trion, electron spin up   (excited)

Frequencies are in GHz (cyclic), rates in 1/ns, times in ns.  Level energies
are quoted relative to the zero-field optical transition.

Transition labels follow the circled numbers of the usual level diagram::

    1  |^> <-> |^vu>    spin-preserving  (Gamma)
    2  |^> <-> |v^d>    spin-flipping    (gamma)
    3  |v> <-> |^vu>    spin-flipping    (gamma)
    4  |v> <-> |v^d>    spin-preserving  (Gamma)
"""

from dataclasses import dataclass, field, fields, asdict

import numpy as np

DOWN, UP, TRION_DOWN, TRION_UP = 0, 1, 2, 3
GROUND_STATES = (DOWN, UP)
TRION_STATES = (TRION_DOWN, TRION_UP)
STATE_NAMES = ("|v>", "|^>", "|v^d>", "|^vu>")

# label: (lower, upper, kind)
TRANSITION_TABLE = {
    1: (UP, TRION_UP, "spin-preserving"),
    2: (UP, TRION_DOWN, "spin-flipping"),
    3: (DOWN, TRION_UP, "spin-flipping"),
    4: (DOWN, TRION_DOWN, "spin-preserving"),
}
RED_LABELS = (1, 2)
BLUE_LABELS = (3, 4)


class ValidationError(ValueError):
    """Raised when a physical parameter is out of its allowed range."""

    def __init__(self, name, value, why):
        self.field = name
        super().__init__(f"{name}={value!r}: {why}")


@dataclass(frozen=True)
class PhysicalConstants:
    """Constants in frequency units (h = 1).

    Energies are expressed as frequencies, so ``mu_B_over_h * B`` is a Zeeman
    energy in GHz and ``k_B * T`` a thermal energy in GHz.
    """

    mu_B_over_h: float = 13.996  # GHz/T
    k_B: float = 20.8366  # GHz/K  (k_B / h)

    def __post_init__(self):
        if self.mu_B_over_h <= 0 or self.k_B <= 0:
            raise ValidationError("constants", (self.mu_B_over_h, self.k_B),
                                  "must be positive")


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class Transition:
    label: int
    lower: int
    upper: int
    frequency: float
    decay_rate: float
    kind: str

    @property
    def spin_preserving(self):
        return self.kind == "spin-preserving"


@dataclass(frozen=True)
class CollapseChannel:
    """Radiative decay upper -> lower through one optical transition."""

    label: int
    rate: float
    lower: int
    upper: int

    def operator(self):
        op = np.zeros((4, 4), dtype=complex)
        op[self.lower, self.upper] = 1.0
        return op


@dataclass(frozen=True)
class NoiseParams:
    """Environmental noise and spin relaxation.

    ``spin_charge_ratio`` sets the spread of a per-shot shift of the hole
    Zeeman splitting, as a fraction of the optical charge-noise spread.  It
    is correlated with the optical offset by ``spin_charge_correlation``
    (0 draws them independently).  Without it a common
    optical shift leaves the Raman photon frequency untouched.
    """

    sigma_charge_max: float = 0.0  # GHz
    I_sat_nr: float = 0.05  # nW/um^2
    kappa_nr_coeff: float = 0.0  # 1/ns per nW/um^2
    gamma_flip_up_down: float = 0.0  # 1/us
    T2_star_hole: float = float("inf")  # ns
    spin_charge_ratio: float = 0.0
    spin_charge_correlation: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "spin_charge_correlation":
                if not -1 <= v <= 1:
                    raise ValidationError(f.name, v, "must lie in [-1, 1]")
            elif not v >= 0:
                raise ValidationError(f.name, v, "must be >= 0")
        if self.T2_star_hole == 0:
            raise ValidationError("T2_star_hole", 0.0, "must be > 0")

    @property
    def dephasing_rate(self):
        """Pure dephasing rate of the hole spin coherence (1/ns)."""
        return 0.0 if np.isinf(self.T2_star_hole) else 1.0 / self.T2_star_hole

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class LevelSystem:
    g_e: float
    g_h: float
    B: float
    T: float
    Gamma: float
    branching: float
    nonres_intensity: float = 0.0
    constants: PhysicalConstants = field(default=CONSTANTS, repr=False)

    def __post_init__(self):
        if not 0 < self.branching < 1:
            raise ValidationError("branching", self.branching, "must lie in (0, 1)")
        if not self.Gamma > 0:
            raise ValidationError("Gamma", self.Gamma, "must be > 0")
        if not self.B >= 0:
            raise ValidationError("B", self.B, "must be >= 0")
        if not self.T > 0:
            raise ValidationError("T", self.T, "must be > 0")
        if not self.nonres_intensity >= 0:
            raise ValidationError("nonres_intensity", self.nonres_intensity,
                                  "must be >= 0")

    # --- derived quantities -------------------------------------------------

    @property
    def gamma(self):
        """Weak (spin-flipping) radiative rate, 1/ns."""
        return self.Gamma * self.branching / (1.0 - self.branching)

    @property
    def zeeman_unit(self):
        return self.constants.mu_B_over_h * self.B

    @property
    def level_energies(self):
        z = self.zeeman_unit
        return np.array([
            -0.5 * self.g_h * z,
            +0.5 * self.g_h * z,
            -0.5 * self.g_e * z,
            +0.5 * self.g_e * z,
        ])

    @property
    def ground_splitting(self):
        return abs(self.g_h) * self.zeeman_unit

    @property
    def trion_splitting(self):
        return abs(self.g_e) * self.zeeman_unit

    def transition(self, label):
        try:
            lower, upper, kind = TRANSITION_TABLE[int(label)]
        except (KeyError, ValueError, TypeError):
            raise ValidationError("transition", label, "label must be 1, 2, 3 or 4") from None
        E = self.level_energies
        rate = self.Gamma if kind == "spin-preserving" else self.gamma
        return Transition(int(label), lower, upper, E[upper] - E[lower], rate, kind)

    @property
    def transitions(self):
        return {k: self.transition(k) for k in TRANSITION_TABLE}

    def frequency(self, label):
        return self.transition(label).frequency

    def with_(self, **changes):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return LevelSystem(**d)

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)
                if f.name != "constants"}


def build_level_system(g_e=-0.05, g_h=0.41, B=2.8, T=4.2, Gamma=1 / 0.33,
                       branching=1 / 75, constants=CONSTANTS, nonres_intensity=0.0):
    """Validate the parameters and return the corresponding LevelSystem."""
    return LevelSystem(g_e=g_e, g_h=g_h, B=B, T=T, Gamma=Gamma,
                       branching=branching, nonres_intensity=nonres_intensity,
                       constants=constants)


def decay_channels(ls):
    """The four radiative channels, one per optical transition."""
    return [CollapseChannel(t.label, t.decay_rate, t.lower, t.upper)
            for t in ls.transitions.values()]


def boltzmann_ratio(ls):
    """Equilibrium population ratio N_up / N_down."""
    c = ls.constants
    return float(np.exp(-ls.g_h * c.mu_B_over_h * ls.B / (c.k_B * ls.T)))


def spin_flip_rates(ls, noise, nonres_intensity=None):
    """Ground-state spin-flip rates in 1/ns as (up->down, down->up).

    Includes the intrinsic relaxation (detailed balance) and the spin
    randomization by nonresonant light, which adds equally to both.
    """
    if nonres_intensity is None:
        nonres_intensity = ls.nonres_intensity
    up_down = noise.gamma_flip_up_down * 1e-3
    down_up = up_down * boltzmann_ratio(ls)
    kappa = noise.kappa_nr_coeff * nonres_intensity
    return up_down + kappa, down_up + kappa


def charge_noise_sigma(nonres_intensity, noise):
    """Saturating standard deviation (GHz) of the per-shot optical offset."""
    if nonres_intensity < 0:
        raise ValidationError("nonres_intensity", nonres_intensity, "must be >= 0")
    if nonres_intensity == 0:
        return 0.0
    return noise.sigma_charge_max * nonres_intensity / (nonres_intensity + noise.I_sat_nr)
