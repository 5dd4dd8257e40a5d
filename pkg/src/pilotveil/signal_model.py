"""OFDM pilot construction, manipulated-pilot schemes, and received signals.

Conventions used throughout the library:

* subcarrier index m runs 1..M,
* all quantities are linear SI (watts, seconds, hertz); dB conversions
  happen only at the config/CLI boundary,
* a pilot always satisfies ||s|| = sqrt(P) after normalization,
* randomness enters only through explicit integer seeds (counter-based
  Philox generators), so every value is reproducible bit-for-bit.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from .errors import (
    BadPerturbationNorm,
    CoincidentPoint,
    DelayExceedsCp,
    ValidationError,
    ZeroDistance,
)

SPEED_OF_LIGHT = 299_792_458.0

FREE_SPACE = "free_space"

_NORM_RTOL = 1e-9


def make_rng(*seed_parts: int) -> np.random.Generator:
    """Counter-based deterministic generator keyed on integer parts."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(seed_parts))))


def complex_normal(rng, n):
    """i.i.d. standard circularly-symmetric complex normal draws."""
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)


@dataclass(frozen=True)
class OfdmConfig:
    """Carrier/bandwidth/power/noise parameters shared by every formula.

    Args:
        num_subcarriers: M.
        bandwidth: total bandwidth W in Hz.
        carrier_freq: carrier frequency in Hz.
        tx_power: transmit power P in W.
        noise_psd: single-sided noise PSD N0 in W/Hz.
        cp_duration: OFDM cyclic-prefix duration in s. Defaults to a
            5G-NR-like normal CP, 1/(14 du), where du = W/M.
    """

    num_subcarriers: int
    bandwidth: float
    carrier_freq: float
    tx_power: float
    noise_psd: float
    cp_duration: Optional[float] = None

    def __post_init__(self):
        if self.num_subcarriers < 1:
            raise ValidationError("num_subcarriers must be >= 1")
        for name in ("bandwidth", "tx_power", "noise_psd", "carrier_freq"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")
        if self.cp_duration is None:
            object.__setattr__(self, "cp_duration", 1.0 / (14.0 * self.subcarrier_spacing))
        if self.cp_duration <= 0:
            raise ValidationError("cp_duration must be > 0")

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth / self.num_subcarriers

    @property
    def per_subcarrier_power(self) -> float:
        return self.tx_power / self.num_subcarriers

    @property
    def subcarrier_indices(self) -> np.ndarray:
        """m = 1..M."""
        return np.arange(1, self.num_subcarriers + 1)

    @property
    def noise_var(self) -> float:
        """Per-element complex noise variance N0*du."""
        return self.noise_psd * self.subcarrier_spacing


@dataclass(frozen=True)
class AmScheme:
    """Artificial-multipath pilot descriptor: L delayed replicas.

    ``gains[l]`` and ``delays[l]`` describe the (l+1)-th injected path
    (the genuine path has implicit gain 1 at delay 0). ``decay_t``
    records the exponent when the gains come from the (l+1)^t generator.
    """

    gains: Tuple[float, ...]
    delays: Tuple[float, ...]
    decay_t: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        object.__setattr__(self, "delays", tuple(float(d) for d in self.delays))
        if len(self.gains) != len(self.delays):
            raise ValidationError("gains and delays must have equal length")
        if any(g < 0 for g in self.gains):
            raise ValidationError("path gains must be >= 0")
        if any(d < 0 for d in self.delays):
            raise ValidationError("differential delays must be >= 0")
        if any(b >= a for a, b in zip(self.delays[1:], self.delays[:-1])):
            raise ValidationError("differential delays must be strictly increasing")

    @classmethod
    def from_decay(cls, num_paths: int, decay_t: float, bandwidth: float) -> "AmScheme":
        """Paths on the delta_l = l/(L*W) grid with gains (l+1)^t, l = 1..L."""
        if num_paths < 1:
            raise ValidationError("num_paths must be >= 1 for the decay generator")
        gains = tuple((l + 1.0) ** decay_t for l in range(1, num_paths + 1))
        delays = tuple(l / (num_paths * bandwidth) for l in range(1, num_paths + 1))
        return cls(gains=gains, delays=delays, decay_t=decay_t)

    @property
    def num_paths(self) -> int:
        return len(self.gains)

    @property
    def max_delay(self) -> float:
        return self.delays[-1] if self.delays else 0.0

    def validate_against(self, cfg: OfdmConfig):
        if self.delays and self.max_delay >= cfg.cp_duration:
            raise DelayExceedsCp(
                f"max injected delay {self.max_delay:g} s >= CP duration {cfg.cp_duration:g} s"
            )


@dataclass(frozen=True)
class AnScheme:
    """Artificial-noise pilot descriptor.

    The perturbation realization is a deterministic function of
    (seed, M, P): i.i.d. standard complex normal draws rescaled to
    ||z|| = sqrt(P), so the AN-to-pilot power ratio is exactly
    ``strength``. One realization is reused across a strength sweep
    whenever the seed is held fixed.
    """

    strength: float
    seed: int = 1
    z: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.strength < 0:
            raise ValidationError("AN strength must be >= 0")

    def perturbation(self, cfg: OfdmConfig) -> np.ndarray:
        """The realized z for this config; draws it if not given explicitly."""
        target = np.sqrt(cfg.tx_power)
        if self.z is not None:
            z = np.asarray(self.z, dtype=complex)
            if z.shape != (cfg.num_subcarriers,):
                raise BadPerturbationNorm("perturbation length does not match M")
            if abs(np.linalg.norm(z) - target) > _NORM_RTOL * target:
                raise BadPerturbationNorm(
                    f"||z|| = {np.linalg.norm(z):g}, expected sqrt(P) = {target:g}"
                )
            return z
        rng = make_rng(int(self.seed))
        z = complex_normal(rng, cfg.num_subcarriers)
        return z * (target / np.linalg.norm(z))


@dataclass(frozen=True)
class CleanScheme:
    """No manipulation: the pre-agreed flat pilot."""


CLEAN = CleanScheme()

PilotScheme = Union[AmScheme, AnScheme, CleanScheme]


@dataclass(frozen=True, eq=False)
class Pilot:
    """Realized pilot across the M subcarriers."""

    samples: np.ndarray
    norm_factor: float
    scheme_tag: str  # "AM" | "AN" | "CLEAN"

    @property
    def num_subcarriers(self) -> int:
        return len(self.samples)


def phase_vector(num_subcarriers: int, subcarrier_spacing: float, tau: float) -> np.ndarray:
    """Per-subcarrier phase ramp of a delay: element m is exp(-j 2 pi m du tau)."""
    if num_subcarriers < 1 or subcarrier_spacing <= 0:
        raise ValidationError("need M >= 1 and positive subcarrier spacing")
    m = np.arange(1, num_subcarriers + 1)
    return np.exp(-1j * 2.0 * np.pi * m * subcarrier_spacing * tau)


def build_pilot_clean(cfg: OfdmConfig) -> Pilot:
    # Same normalization path as the manipulated builders so that a
    # zero-injection scheme reproduces the clean pilot bit-for-bit.
    v = np.sqrt(cfg.per_subcarrier_power) * np.ones(cfg.num_subcarriers, dtype=complex)
    gamma = np.sqrt(cfg.tx_power) / np.linalg.norm(v)
    return Pilot(samples=gamma * v, norm_factor=float(gamma), scheme_tag="CLEAN")


def build_pilot_am(cfg: OfdmConfig, am: AmScheme) -> Pilot:
    """Flat pilot plus injected delayed replicas, renormalized to ||s|| = sqrt(P)."""
    am.validate_against(cfg)
    base = np.ones(cfg.num_subcarriers, dtype=complex)
    for g, d in zip(am.gains, am.delays):
        base += np.sqrt(g) * phase_vector(cfg.num_subcarriers, cfg.subcarrier_spacing, d)
    v = np.sqrt(cfg.per_subcarrier_power) * base
    gamma = np.sqrt(cfg.tx_power) / np.linalg.norm(v)
    return Pilot(samples=gamma * v, norm_factor=float(gamma), scheme_tag="AM")


def build_pilot_an(cfg: OfdmConfig, an: AnScheme) -> Pilot:
    """Flat pilot plus scaled noise-like perturbation, renormalized to ||s|| = sqrt(P)."""
    z = an.perturbation(cfg)
    v = np.sqrt(cfg.per_subcarrier_power) * np.ones(cfg.num_subcarriers) + np.sqrt(an.strength) * z
    gamma = np.sqrt(cfg.tx_power) / np.linalg.norm(v)
    return Pilot(samples=gamma * v, norm_factor=float(gamma), scheme_tag="AN")


def build_pilot(cfg: OfdmConfig, scheme: PilotScheme) -> Pilot:
    if isinstance(scheme, AmScheme):
        return build_pilot_am(cfg, scheme)
    if isinstance(scheme, AnScheme):
        return build_pilot_an(cfg, scheme)
    if isinstance(scheme, CleanScheme):
        return build_pilot_clean(cfg)
    raise ValidationError(f"unknown scheme type {type(scheme).__name__}")


def pathloss_gain(distance: float, carrier_freq: float, model=FREE_SPACE) -> complex:
    """Channel gain for an anchor.

    ``model`` is either the string ``"free_space"`` (amplitude
    lambda/(4 pi d), zero phase) or an explicit complex gain that is
    passed through unchanged.
    """
    if isinstance(model, str):
        if model != FREE_SPACE:
            raise ValidationError(f"unknown path-loss model {model!r}")
        if distance <= 0:
            raise ZeroDistance("free-space gain needs a positive distance")
        lam = SPEED_OF_LIGHT / carrier_freq
        return complex(lam / (4.0 * np.pi * distance))
    return complex(model)


ROLE_LEGIT = "legit"
ROLE_EVE = "eve"


@dataclass(frozen=True, eq=False)
class Anchor:
    """A receiving base station, legitimate or unauthorized."""

    position: np.ndarray
    role: str
    gain: Optional[complex] = None  # None -> free-space from scenario geometry
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.role not in (ROLE_LEGIT, ROLE_EVE):
            raise ValidationError(f"anchor role must be 'legit' or 'eve', got {self.role!r}")
        if not np.all(np.isfinite(self.position)):
            raise ValidationError("anchor position must be finite")
        if self.gain is not None and abs(self.gain) <= 0:
            raise ValidationError("anchor gain must be nonzero")


@dataclass(frozen=True, eq=False)
class Scenario:
    """One localization scene: Alice, anchors, OFDM config, pilot scheme.

    ``gain_calibration`` multiplies every |alpha|^2 (a single fitted
    convention scalar, see the README); ``an_search_lobes`` sets the
    pseudo-true delay search span for AN schemes in units of 1/W.
    """

    alice_position: np.ndarray
    anchors: Tuple[Anchor, ...]
    config: OfdmConfig
    scheme: PilotScheme = CLEAN
    speed_of_light: float = SPEED_OF_LIGHT
    gain_calibration: float = 1.0
    an_search_lobes: float = 24.0
    seed_box: Tuple[Tuple[float, float], ...] = ((0.0, 200.0), (0.0, 200.0))

    def __post_init__(self):
        object.__setattr__(self, "alice_position", np.asarray(self.alice_position, dtype=float))
        object.__setattr__(self, "anchors", tuple(self.anchors))
        if self.gain_calibration <= 0:
            raise ValidationError("gain_calibration must be > 0")
        if self.an_search_lobes <= 0:
            raise ValidationError("an_search_lobes must be > 0")
        for a in self.anchors:
            if a.position.shape != self.alice_position.shape:
                raise ValidationError("anchor/alice dimensions disagree")
            if np.linalg.norm(a.position - self.alice_position) == 0.0:
                raise CoincidentPoint(f"anchor {a.name or a.role} collocated with Alice")
        if isinstance(self.scheme, AmScheme):
            self.scheme.validate_against(self.config)

    @property
    def eves(self) -> Tuple[Anchor, ...]:
        return tuple(a for a in self.anchors if a.role == ROLE_EVE)

    @property
    def bobs(self) -> Tuple[Anchor, ...]:
        return tuple(a for a in self.anchors if a.role == ROLE_LEGIT)

    def anchor_gain(self, anchor: Anchor) -> complex:
        """Effective complex gain including the calibration scalar on |alpha|^2."""
        if anchor.gain is not None:
            base = complex(anchor.gain)
        else:
            d = float(np.linalg.norm(self.alice_position - anchor.position))
            base = pathloss_gain(d, self.config.carrier_freq, FREE_SPACE)
        return np.sqrt(self.gain_calibration) * base

    def pilot(self) -> Pilot:
        return build_pilot(self.config, self.scheme)


def synthesize_rx(pilot: Pilot, alpha: complex, tau: float, cfg: OfdmConfig, seed) -> np.ndarray:
    """One received snapshot y = alpha d(tau) (.) s + n.

    Noise is i.i.d. circularly-symmetric complex Gaussian with
    per-element variance N0*du, drawn deterministically from ``seed``
    (an int or a tuple of ints for derived streams).
    """
    if pilot.num_subcarriers != cfg.num_subcarriers:
        raise ValidationError("pilot was built for a different subcarrier count")
    d = phase_vector(cfg.num_subcarriers, cfg.subcarrier_spacing, tau)
    parts = (seed,) if np.isscalar(seed) else tuple(seed)
    rng = make_rng(*(int(p) for p in parts))
    noise = np.sqrt(cfg.noise_var) * complex_normal(rng, cfg.num_subcarriers)
    return alpha * d * pilot.samples + noise
