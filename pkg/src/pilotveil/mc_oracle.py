"""Monte-Carlo mismatched maximum-likelihood validation harness.

The unaware receiver's estimator is the mismatched ML: correlate the
snapshot against the flat pilot and take the best delay. Its noise-free
limit is exactly the KL minimizer that defines the pseudo-true delay,
which makes it the canonical estimator the misspecified bounds
describe. Trial-level noise streams derive from
(master seed, trial index, anchor index) so runs are reproducible and
anchors get independent noise.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .delay_mismatch import (
    DEFAULT_REFINE_TOL,
    COARSE_LOBE_FRACTION,
    crb_delay,
    delay_report,
    mcrb_delay_numeric,
    pseudo_true_delay,
    search_window,
)
from .errors import ValidationError
from .numerics import LineSearchSpec, maximize_scalar
from .position_mismatch import (
    DelayCovariances,
    delay_jacobian,
    pseudo_true_position,
    true_delays,
)
from .signal_model import OfdmConfig, Scenario, synthesize_rx


@dataclass(frozen=True, eq=False)
class McReport:
    """Aggregate of one Monte-Carlo run.

    ``bound_comparison`` is (rmse_lb, empirical_rmse / rmse_lb) in the
    run's native units; ``extras`` carries diagnostic scalars such as
    the sound-covariance bound ratio.
    """

    n_trials: int
    empirical_mean: np.ndarray
    empirical_bias: np.ndarray
    empirical_rmse: float
    standard_error: np.ndarray
    bound_comparison: Tuple[float, float]
    extras: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValidationError("n_trials must be >= 1")


def mle_delay(y: np.ndarray, cfg: OfdmConfig, alpha: complex, window: LineSearchSpec) -> float:
    """Mismatched ML delay: maximize Re[(alpha sqrt(P_M) d(eta))^H y] over the window."""
    m = cfg.subcarrier_indices
    weighted = np.conj(alpha) * np.sqrt(cfg.per_subcarrier_power) * y
    two_pi_mdf = 2.0 * np.pi * m * cfg.subcarrier_spacing

    def score(eta: float) -> float:
        return float(np.real(np.exp(1j * two_pi_mdf * eta) @ weighted))

    eta_star, _ = maximize_scalar(score, window)
    return eta_star


def estimate_position(
    tau_hat: np.ndarray,
    positions: np.ndarray,
    xi_m: np.ndarray,
    seed_box,
    c: float,
    prefer: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Weighted NLS position estimate from measured delays."""
    p, _ = pseudo_true_position(positions, tau_hat, xi_m, seed_box, c=c, prefer=prefer)
    return p


def _trial_window(scenario: Scenario, tau: float) -> LineSearchSpec:
    """Estimator search window: the pseudo-true window padded by two lobes."""
    cfg = scenario.config
    lobe = 1.0 / cfg.bandwidth
    lo_x, hi_x = search_window(scenario.scheme, cfg, scenario.an_search_lobes)
    return LineSearchSpec(
        lo=tau + lo_x - 2.0 * lobe,
        hi=tau + hi_x + 2.0 * lobe,
        coarse_step=1.0 / (COARSE_LOBE_FRACTION * cfg.bandwidth),
        refine_tol=DEFAULT_REFINE_TOL,
    )


def run_delay_trials(scenario: Scenario, anchor_id: int, n: int, seed: int) -> McReport:
    """n independent snapshots at one anchor, each passed through mle_delay.

    Reports the empirical mean against the pseudo-true delay and the
    empirical MSE (about the true delay) against the delay-domain lower
    bound MCRB + bias^2.
    """
    if n < 1:
        raise ValidationError("need n >= 1")
    anchor = scenario.anchors[anchor_id]
    cfg = scenario.config
    alpha = scenario.anchor_gain(anchor)
    tau = float(np.linalg.norm(scenario.alice_position - anchor.position) / scenario.speed_of_light)
    pilot = scenario.pilot()
    window = _trial_window(scenario, tau)

    estimates = np.empty(n)
    for t in range(n):
        y = synthesize_rx(pilot, alpha, tau, cfg, seed=(seed, t, anchor_id))
        estimates[t] = mle_delay(y, cfg, alpha, window)

    tau0 = pseudo_true_delay(scenario.scheme, cfg, tau, an_lobes=scenario.an_search_lobes)
    bias = tau0 - tau
    mcrb = mcrb_delay_numeric(scenario.scheme, cfg, alpha, tau, tau0)
    lb = mcrb + bias * bias
    mse = float(np.mean((estimates - tau) ** 2))
    return McReport(
        n_trials=n,
        empirical_mean=np.array([estimates.mean()]),
        empirical_bias=np.array([estimates.mean() - tau0]),
        empirical_rmse=float(np.sqrt(mse)),
        standard_error=np.array([estimates.std(ddof=1) / np.sqrt(n)]) if n > 1 else np.array([0.0]),
        bound_comparison=(float(np.sqrt(lb)), float(np.sqrt(mse / lb))),
        extras={
            "tau_true": tau,
            "tau0": tau0,
            "crb": crb_delay(cfg, alpha),
            "mcrb": mcrb,
            "empirical_var": float(estimates.var(ddof=1)) if n > 1 else 0.0,
        },
    )


def _sound_position_covariance(p_eval, positions, cov: DelayCovariances, c: float) -> np.ndarray:
    """Asymptotic covariance of the weighted-NLS estimator at p_eval.

    H^-1 S H^-1 with H = J^T Xi_M^-1 J and S = J^T Xi_M^-1 Xi_T Xi_M^-1 J:
    the sandwich with zero mismatch vector, i.e. what the estimator's
    spread actually converges to.
    """
    J = delay_jacobian(p_eval, positions, c)
    w = 1.0 / cov.crb
    H = J.T @ (w[:, None] * J)
    S = J.T @ ((w * cov.mcrb * w)[:, None] * J)
    H_inv = np.linalg.inv(H)
    return H_inv @ S @ H_inv


def run_position_trials(scenario: Scenario, n: int, seed: int) -> McReport:
    """Per-trial delay estimation at every Eve followed by NLS positioning.

    Empirical RMSE about the true position is compared against the
    scenario's rmse_lb (the figure-pipeline convention); ``extras``
    additionally reports the ratio against bias^2 + trace of the
    estimator's sound asymptotic covariance.
    """
    from .experiments import run_bounds  # local import to avoid a cycle

    eves = scenario.eves
    if len(eves) < 2:
        raise ValidationError("position trials need at least two Eves")
    if n < 1:
        raise ValidationError("need n >= 1")
    cfg = scenario.config
    c = scenario.speed_of_light
    p_true = scenario.alice_position
    pilot = scenario.pilot()
    eve_ids = [i for i, a in enumerate(scenario.anchors) if a.role == "eve"]
    eve_positions = np.stack([scenario.anchors[i].position for i in eve_ids])
    gains = [scenario.anchor_gain(scenario.anchors[i]) for i in eve_ids]
    taus = true_delays(p_true, eve_positions, c)
    windows = [_trial_window(scenario, t) for t in taus]
    xi_m = np.array([crb_delay(cfg, g) for g in gains])

    estimates = np.empty((n, p_true.size))
    for t in range(n):
        tau_hat = np.empty(len(eves))
        for i, (aid, g, tau, win) in enumerate(zip(eve_ids, gains, taus, windows)):
            y = synthesize_rx(pilot, g, tau, cfg, seed=(seed, t, aid))
            tau_hat[i] = mle_delay(y, cfg, g, win)
        estimates[t] = estimate_position(tau_hat, eve_positions, xi_m, scenario.seed_box, c, prefer=p_true)

    delay_reports, pos_report = run_bounds(scenario)
    rmse = float(np.sqrt(np.mean(np.sum((estimates - p_true) ** 2, axis=1))))
    mean = estimates.mean(axis=0)
    se = estimates.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)

    eve_reports = [r for r in delay_reports if r.anchor_id.startswith("eve")]
    cov = DelayCovariances(mcrb=np.array([r.mcrb for r in eve_reports]), crb=xi_m)
    p_bar = pos_report.pseudo_true_position
    sound_cov = _sound_position_covariance(p_bar, eve_positions, cov, c)
    sound_lb = float(np.sqrt(pos_report.bias_norm**2 + np.trace(sound_cov)))
    return McReport(
        n_trials=n,
        empirical_mean=mean,
        empirical_bias=mean - p_bar,
        empirical_rmse=rmse,
        standard_error=se,
        bound_comparison=(pos_report.rmse_lb, rmse / pos_report.rmse_lb),
        extras={
            "bias_norm": pos_report.bias_norm,
            "sound_rmse_lb": sound_lb,
            "sound_ratio": rmse / sound_lb,
        },
    )
