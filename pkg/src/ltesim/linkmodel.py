"""Link-to-system abstraction.

Post-equalization SINR under imperfect channel knowledge, the pilot/data
power split, the SINR-to-rate map and the residual-CFO throughput-loss
chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSplitError, InvalidParameterError, OutOfRangeError

GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class PowerSplit:
    p_pilot: float
    p_data: float
    budget: float

    def __post_init__(self):
        if self.p_pilot < 0 or self.p_data < 0:
            raise InvalidParameterError("powers must be non-negative")
        if self.p_pilot + self.p_data > self.budget * (1 + 1e-12):
            raise InvalidParameterError("split exceeds the power budget")

    @property
    def total(self):
        return self.p_pilot + self.p_data

    @property
    def pilot_fraction(self):
        return self.p_pilot / self.total


@dataclass(frozen=True)
class EstimatorModel:
    """Channel-estimation error: a pilot-noise term plus a Doppler floor.

    ``c_floor`` is in (km/h)^-2.
    """

    c_noise: float = 1.0
    c_floor: float = 1e-5
    pilot_density: float = 1.0

    def __post_init__(self):
        if not self.c_noise > 0:
            raise InvalidParameterError("c_noise must be positive")
        if self.c_floor < 0:
            raise InvalidParameterError("c_floor must be non-negative")
        if not self.pilot_density > 0:
            raise InvalidParameterError("pilot_density must be positive")


@dataclass(frozen=True)
class CfoModel:
    c_mse: float = 0.1
    n_obs: int = 50

    def __post_init__(self):
        if not self.c_mse > 0:
            raise InvalidParameterError("c_mse must be positive")
        if self.n_obs < 1:
            raise InvalidParameterError("n_obs must be at least 1")


# Two estimator presets, differing in the MSE constant only.
CFO_PRESETS = {
    "time-domain": CfoModel(c_mse=0.1, n_obs=50),
    "frequency-domain": CfoModel(c_mse=0.05, n_obs=50),
}


def estimation_mse(est, split, velocity, noise_power):
    """Channel-estimation error variance."""
    if split.p_pilot <= 0:
        raise DegenerateSplitError("pilot power must be positive")
    return (est.c_noise * noise_power / (est.pilot_density * split.p_pilot)
            + est.c_floor * velocity ** 2)


def post_eq_sinr(split, channel_gain, noise_power, sigma_e2, n_streams=1):
    """Post-equalization SINR with estimation error acting as extra noise."""
    if n_streams < 1:
        raise InvalidParameterError("n_streams must be at least 1")
    p = split.p_data
    return p * channel_gain / (noise_power + p * sigma_e2 * n_streams)


def _sinr_at(est, p_pilot, p_data, velocity, noise_power, n_streams, gain=1.0):
    sigma = est.c_noise * noise_power / (est.pilot_density * p_pilot) + est.c_floor * velocity ** 2
    return p_data * gain / (noise_power + p_data * sigma * n_streams)


def golden_section_max(f, lo, hi, rel_tol=1e-9):
    """Maximize a unimodal ``f`` on ``[lo, hi]`` with a fixed iteration count."""
    width = hi - lo
    n_iter = max(1, math.ceil(math.log(rel_tol) / math.log(GOLDEN)))
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(n_iter):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        if b - a <= rel_tol * width:
            break
    return (a + b) / 2


def optimal_power_split(est, velocity, noise_power, budget, n_streams=1, rel_tol=1e-9):
    """Pilot/data split of the full budget maximizing the post-equalization SINR."""
    if not budget > 0:
        raise InvalidParameterError("budget must be positive")

    def sinr(frac):
        return _sinr_at(est, frac * budget, (1 - frac) * budget, velocity, noise_power, n_streams)

    frac = golden_section_max(sinr, 0.0, 1.0, rel_tol)
    frac = min(max(frac, 1e-300), 1.0)
    return PowerSplit(frac * budget, (1 - frac) * budget, budget)


def split_sinr(est, split, velocity, noise_power, n_streams=1, gain=1.0):
    sigma = estimation_mse(est, split, velocity, noise_power)
    return post_eq_sinr(split, gain, noise_power, sigma, n_streams)


def power_efficient_split(est, velocity, noise_power, budget, n_streams=1, *,
                          sinr_slack=1e-6, rel_tol=1e-6):
    """Smallest total power whose best split keeps the full-budget SINR.

    The target is the SINR of :func:`optimal_power_split` at the full budget,
    less a relative ``sinr_slack``.  Bisection runs on the total-power scale
    factor, re-optimizing the split at each trial, until the bracket is below
    ``rel_tol``; the feasible end is returned so the total never exceeds the
    budget.
    """
    if not budget > 0:
        raise InvalidParameterError("budget must be positive")
    full = optimal_power_split(est, velocity, noise_power, budget, n_streams)
    target = split_sinr(est, full, velocity, noise_power, n_streams) * (1 - sinr_slack)

    def best(scale):
        return optimal_power_split(est, velocity, noise_power, scale * budget, n_streams)

    lo, hi = 0.0, 1.0
    best_split = full
    while hi - lo > rel_tol * hi:
        mid = (lo + hi) / 2
        trial = best(mid)
        if split_sinr(est, trial, velocity, noise_power, n_streams) >= target:
            hi, best_split = mid, trial
        else:
            lo = mid
    return PowerSplit(best_split.p_pilot, best_split.p_data, budget)


def rate_map(sinr, efficiency=0.75, cap=4.5):
    """Capped, scaled Shannon map from SINR to spectral efficiency (bit/s/Hz)."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise InvalidParameterError("SINR must be non-negative")
    out = np.minimum(efficiency * np.log2(1 + s), cap)
    return float(out) if out.ndim == 0 else out


def cfo_mse(model, snr):
    """CFO estimation MSE in squared subcarrier spacings."""
    snr = np.asarray(snr, dtype=float)
    if np.any(snr <= 0):
        raise InvalidParameterError("SNR must be positive")
    out = model.c_mse / (model.n_obs * snr)
    return float(out) if out.ndim == 0 else out


def residual_cfo(model, snr):
    return np.sqrt(cfo_mse(model, snr))


def _sinc2(eps):
    return np.sinc(eps) ** 2  # numpy sinc is sin(pi x)/(pi x)


def sinr_with_cfo(snr, eps):
    """Resource-element SINR with inter-carrier interference as self-noise."""
    snr = np.asarray(snr, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if np.any(np.abs(eps) >= 1):
        raise OutOfRangeError("|eps| must be below one subcarrier spacing")
    if np.any(snr <= 0):
        raise InvalidParameterError("SNR must be positive")
    s2 = _sinc2(eps)
    out = snr * s2 / (1 + snr * (1 - s2))
    return float(out) if out.ndim == 0 else out


def throughput_loss(snr_per_re, eps, rate_fn=rate_map):
    """Aggregate rate lost over the listed resource elements at offset ``eps``.

    ``eps`` may be an array; the loss is then returned per entry.
    """
    snr = np.atleast_1d(np.asarray(snr_per_re, dtype=float))
    eps = np.asarray(eps, dtype=float)
    ref = np.sum(rate_fn(sinr_with_cfo(snr, 0.0)))
    got = np.sum(rate_fn(sinr_with_cfo(snr, eps[..., None])), axis=-1)
    out = np.maximum(ref - got, 0.0)
    return float(out) if out.ndim == 0 else out


def predict_cfo_loss_curve(model, snr_grid, n_re=1, rate_fn=rate_map):
    """``(snr, loss)`` pairs from MSE -> residual CFO -> rate loss."""
    grid = np.atleast_1d(np.asarray(snr_grid, dtype=float))
    if grid.size == 0:
        raise InvalidParameterError("SNR grid must be non-empty")
    eps = residual_cfo(model, grid)
    return [(float(s), throughput_loss(np.full(n_re, s), float(e), rate_fn))
            for s, e in zip(grid, np.atleast_1d(eps))]


def simulate_cfo_loss(model, snr, rng, n_draws, n_re=1, rate_fn=rate_map):
    """Per-draw losses with the offset drawn as N(0, MSE(snr))."""
    sigma = float(residual_cfo(model, snr))
    eps = rng.normal(0.0, sigma, n_draws)
    eps = np.clip(eps, -0.999, 0.999)
    return throughput_loss(np.full(n_re, snr), eps, rate_fn)
