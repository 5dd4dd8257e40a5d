"""Stage 1: pseudo-true delays and delay-domain CRB/MCRB/LB per anchor.

An unaware receiver correlates against the flat pilot while the actual
pilot is manipulated. The pseudo-true delay is the noise-free limit of
that mismatched correlator, i.e. the argmax of

    g(eta) = Re sum_m s_m exp(+j 2 pi m du (eta - tau)),

which for an AM pilot reduces to the double cosine sum over paths and
subcarriers, and for an AN pilot to the perturbed cosine sum. The
search runs in the shift variable x = eta - tau, so the recovered bias
is bit-identical for every anchor under LOS (same scheme, same shift).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCurvature, ValidationError
from .numerics import LineSearchSpec, maximize_scalar
from .signal_model import (
    AmScheme,
    AnScheme,
    CleanScheme,
    OfdmConfig,
    Pilot,
    PilotScheme,
    Scenario,
    build_pilot,
    phase_vector,
)

DEFAULT_AN_SEARCH_LOBES = 24.0
DEFAULT_REFINE_TOL = 1e-16  # seconds; deep sub-picosecond polish
COARSE_LOBE_FRACTION = 20  # coarse step = 1/(20 W): >= 20 samples per lobe


@dataclass(frozen=True)
class GeneralizedFimScalar:
    """Delay-domain generalizations of the Fisher information."""

    a: float
    b: float

    def __post_init__(self):
        if self.b < 0:
            raise ValidationError("B must be >= 0")


@dataclass(frozen=True)
class DelayMismatchReport:
    """Per-anchor delay-domain summary.

    Variances are in s^2; the *_m2 properties export meters^2 (x c^2)
    and bias_m exports meters (x c).
    """

    anchor_id: str
    tau_true: float
    tau0: float
    bias: float
    crb: float
    mcrb: float
    lb: float
    speed_of_light: float

    def __post_init__(self):
        if self.mcrb < 0 or self.crb <= 0:
            raise ValidationError("mcrb must be >= 0 and crb > 0")

    @property
    def bias_m(self) -> float:
        return self.bias * self.speed_of_light

    @property
    def crb_m2(self) -> float:
        return self.crb * self.speed_of_light**2

    @property
    def mcrb_m2(self) -> float:
        return self.mcrb * self.speed_of_light**2

    @property
    def lb_m2(self) -> float:
        return self.lb * self.speed_of_light**2


def correlation_objective(pilot: Pilot, cfg: OfdmConfig):
    """g(x) = Re sum_m s_m exp(+j 2 pi m du x): mismatched correlation vs shift."""
    s = pilot.samples
    m = cfg.subcarrier_indices
    two_pi_mdf = 2.0 * np.pi * m * cfg.subcarrier_spacing

    def g(x: float) -> float:
        return float(np.real(np.exp(1j * two_pi_mdf * x) @ s))

    return g

def search_window(scheme: PilotScheme, cfg: OfdmConfig, an_lobes: float) -> tuple:
    """Shift-domain window for the pseudo-true delay search."""
    lobe = 1.0 / cfg.bandwidth
    if isinstance(scheme, AmScheme):
        return (-lobe, max(scheme.max_delay, lobe) + lobe)
    # AN peaks can land wherever the perturbation correlation beats the
    # genuine one, so the window is a modeling choice (in lobes of 1/W).
    return (-lobe, an_lobes * lobe)


def pseudo_true_delay(
    scheme: PilotScheme,
    cfg: OfdmConfig,
    tau: float,
    an_lobes: float = DEFAULT_AN_SEARCH_LOBES,
    refine_tol: float = DEFAULT_REFINE_TOL,
) -> float:
    """Global maximizer of the mismatched correlation; CLEAN returns tau."""
    if isinstance(scheme, CleanScheme):
        return tau
    pilot = build_pilot(cfg, scheme)
    g = correlation_objective(pilot, cfg)
    lo, hi = search_window(scheme, cfg, an_lobes)
    spec = LineSearchSpec(lo=lo, hi=hi, coarse_step=1.0 / (COARSE_LOBE_FRACTION * cfg.bandwidth),
                          refine_tol=refine_tol)
    x_star, _ = maximize_scalar(g, spec)
    return tau + x_star


def xi(scheme: PilotScheme, cfg: OfdmConfig, tau: float, tau0: float) -> complex:
    """m-weighted pilot correlation at the pseudo-true shift.

    For an AM pilot this equals
    sum_m sum_l m sqrt(beta_l) exp(j 2 pi m du (tau + delta_l - tau0)),
    and for AN the perturbed single-path analogue; the imaginary part
    vanishes at the exact pseudo-true delay (first-order condition).
    """
    pilot = build_pilot(cfg, scheme)
    m = cfg.subcarrier_indices
    gamma = pilot.norm_factor
    base = np.conj(pilot.samples) / (gamma * np.sqrt(cfg.per_subcarrier_power))
    return complex(np.sum(m * base * np.exp(1j * 2.0 * np.pi * m * cfg.subcarrier_spacing * (tau - tau0))))


def _model_vectors(scheme, cfg, alpha, tau, tau0):
    """Noise-free truth, mismatched mean and its eta-derivatives at tau0."""
    pilot = build_pilot(cfg, scheme)
    m = cfg.subcarrier_indices
    d_tau = phase_vector(cfg.num_subcarriers, cfg.subcarrier_spacing, tau)
    d_tau0 = phase_vector(cfg.num_subcarriers, cfg.subcarrier_spacing, tau0)
    q_true = alpha * d_tau * pilot.samples
    root_pm = np.sqrt(cfg.per_subcarrier_power)
    mu = alpha * root_pm * d_tau0
    ring = -1j * 2.0 * np.pi * m * cfg.subcarrier_spacing
    dmu = ring * mu
    d2mu = ring * dmu
    return q_true - mu, dmu, d2mu


def generalized_fims_delay(scheme, cfg, alpha, tau, tau0) -> GeneralizedFimScalar:
    """Scalar A and B for the complex-Gaussian delay model at tau0."""
    eps, dmu, d2mu = _model_vectors(scheme, cfg, alpha, tau, tau0)
    inv_var = 1.0 / cfg.noise_var
    dmu_sq = float(np.vdot(dmu, dmu).real)
    a = 2.0 * inv_var * (float(np.vdot(d2mu, eps).real) - dmu_sq)
    b = 4.0 * (inv_var * float(np.vdot(dmu, eps).real)) ** 2 + 2.0 * inv_var * dmu_sq
    return GeneralizedFimScalar(a=a, b=b)


def mcrb_delay_numeric(scheme, cfg, alpha, tau: float, tau0: float) -> float:
    """Delay MCRB via the generalized-information sandwich B/A^2."""
    gf = generalized_fims_delay(scheme, cfg, alpha, tau, tau0)
    if abs(gf.a) < 1e-300:
        raise DegenerateCurvature("delay-domain A vanished")
    return gf.b / (gf.a * gf.a)


def crb_delay(cfg: OfdmConfig, alpha: complex) -> float:
    """Classical delay CRB for the flat pilot: 3 N0 / (4 pi^2 du (M+1)(2M+1) |a|^2 P)."""
    if abs(alpha) <= 0:
        raise ValidationError("need |alpha| > 0")
    M = cfg.num_subcarriers
    return 3.0 * cfg.noise_psd / (
        4.0 * np.pi**2 * cfg.subcarrier_spacing * (M + 1) * (2 * M + 1) * abs(alpha) ** 2 * cfg.tx_power
    )


def crb_delay_pilot(cfg: OfdmConfig, pilot: Pilot, alpha: complex) -> float:
    """Exact-model delay CRB for an arbitrary known pilot.

    N0 du / (2 |a|^2 sum_m |s_m|^2 (2 pi m du)^2); reduces to the flat-pilot
    CRB when |s_m|^2 = P_M for all m.
    """
    if abs(alpha) <= 0:
        raise ValidationError("need |alpha| > 0")
    m = cfg.subcarrier_indices
    weights = np.abs(pilot.samples) ** 2 * (2.0 * np.pi * m * cfg.subcarrier_spacing) ** 2
    return cfg.noise_var / (2.0 * abs(alpha) ** 2 * float(np.sum(weights)))


def mcrb_delay_closed(scheme, cfg, alpha, tau: float, tau0: float) -> float:
    """The printed closed-form delay MCRB, evaluated verbatim.

    Used only as a cross-check against mcrb_delay_numeric: its terms mix
    P^(3/2) and P scalings, so away from the zero-injection limit the two
    paths are expected to disagree at the percent level.
    """
    pilot = build_pilot(cfg, scheme)
    gamma = pilot.norm_factor
    x = xi(scheme, cfg, tau, tau0)
    M = cfg.num_subcarriers
    df = cfg.subcarrier_spacing
    P = cfg.tx_power
    aab = abs(alpha)
    num = (6.0 * aab * P * gamma * x.imag) ** 2 + 3.0 * M**2 * (M + 1) * (2 * M + 1) * cfg.noise_psd * df * P
    den_root = (
        12.0 * np.pi * df * M ** (-0.5) * aab * P**1.5 * gamma * x.real
        - 6.0 * np.pi * M**0.5 * (M + 1) * df * aab * P**1.5
        + 2.0 * np.pi * M * (M + 1) * (2 * M + 1) * df * aab * P
    )
    if abs(den_root) < 1e-300:
        raise DegenerateCurvature("closed-form denominator vanished")
    return num / den_root**2


def delay_report(scenario: Scenario, anchor_id: int, tau: float) -> DelayMismatchReport:
    """Bundle pseudo-true delay, CRB, MCRB and LB for one anchor.

    Eve anchors get the mismatch treatment; legitimate anchors know the
    manipulated pilot, so they get the known-pilot CRB with zero bias.
    """
    anchor = scenario.anchors[anchor_id]
    cfg = scenario.config
    alpha = scenario.anchor_gain(anchor)
    name = anchor.name or f"{anchor.role}{anchor_id}"
    if anchor.role == "legit":
        bound = crb_delay_pilot(cfg, scenario.pilot(), alpha)
        return DelayMismatchReport(
            anchor_id=name, tau_true=tau, tau0=tau, bias=0.0,
            crb=bound, mcrb=bound, lb=bound, speed_of_light=scenario.speed_of_light,
        )
    tau0 = pseudo_true_delay(scenario.scheme, cfg, tau, an_lobes=scenario.an_search_lobes)
    bias = tau0 - tau
    crb = crb_delay(cfg, alpha)
    mcrb = mcrb_delay_numeric(scenario.scheme, cfg, alpha, tau, tau0)
    return DelayMismatchReport(
        anchor_id=name, tau_true=tau, tau0=tau0, bias=bias,
        crb=crb, mcrb=mcrb, lb=mcrb + bias * bias, speed_of_light=scenario.speed_of_light,
    )
