"""Per-TTI resource-block schedulers: round robin, best CQI, proportional fair."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .linkmodel import post_eq_sinr, rate_map

SCHEDULERS = ("best-cqi", "pf", "rr")


@dataclass(frozen=True)
class ResourceGrid:
    n_tti: int
    n_rb: int
    bandwidth_per_rb: float = 180e3

    def __post_init__(self):
        if self.n_tti < 1 or self.n_rb < 1 or not self.bandwidth_per_rb > 0:
            raise InvalidParameterError("resource grid dimensions must be positive")


@dataclass
class SchedulerState:
    """Mutable per-cell scheduler memory."""

    average: np.ndarray
    cursor: int = 0
    window: float = 100.0
    floor: float = 1e-9

    def __post_init__(self):
        self.average = np.maximum(np.asarray(self.average, dtype=float), self.floor)
        if len(self.average) < 1:
            raise InvalidParameterError("scheduler state needs at least one user")

    @classmethod
    def for_users(cls, k, initial=1.0, **kw):
        return cls(np.broadcast_to(np.asarray(initial, dtype=float), (k,)).copy(), **kw)

    @property
    def n_users(self):
        return len(self.average)


def schedule_round_robin(state, n_rb):
    """Cyclic RB assignment continuing from the state's cursor."""
    k = state.n_users
    assign = (state.cursor + np.arange(n_rb)) % k
    state.cursor = int((state.cursor + n_rb) % k)
    return assign


def schedule_best_cqi(rates):
    """Per-RB argmax of the estimated rate; ties go to the lowest user id."""
    return np.argmax(np.asarray(rates, dtype=float), axis=0)


def schedule_proportional_fair(rates, state, update=True):
    """Per-RB argmax of instantaneous rate over the user's average throughput.

    The averages are held fixed within the TTI and updated afterwards with
    an exponential window; unserved users decay towards zero (bounded
    below by ``state.floor``).
    """
    rates = np.asarray(rates, dtype=float)
    assign = np.argmax(rates / state.average[:, None], axis=0)
    if update:
        served = served_rate(rates, assign)
        a = 1.0 / state.window
        state.average = np.maximum((1 - a) * state.average + a * served, state.floor)
    return assign


def served_rate(rates, assign):
    """Per-user rate summed over the RBs assigned to it."""
    rates = np.asarray(rates, dtype=float)
    out = np.zeros(rates.shape[0])
    np.add.at(out, assign, rates[assign, np.arange(rates.shape[1])])
    return out


def estimate_rates(signal_w, interference_w, noise_w, fading_gain, *, rate_fn=rate_map,
                   split=None, sigma_e2=0.0, n_streams=1):
    """User x RB rate matrix from large-scale powers and per-RB fading gains.

    ``signal_w`` and ``interference_w`` are per-user mean powers; the SINR on
    each RB is ``signal * |h|^2 / (noise + interference)``.  With a
    ``split`` the estimation-error term of the link model enters as well.
    """
    signal_w = np.asarray(signal_w, dtype=float)[:, None]
    n0 = noise_w + np.asarray(interference_w, dtype=float)[:, None]
    g = np.asarray(fading_gain, dtype=float)
    if split is None:
        sinr = signal_w * g / n0
    else:
        sinr = post_eq_sinr(split, signal_w * g / split.p_data, n0, sigma_e2, n_streams)
    return rate_fn(sinr)


@dataclass
class ScheduleResult:
    """Accumulated outcome of a scheduling run over many TTIs."""

    served: np.ndarray  # (k,) summed rate units over all TTIs
    rb_count: np.ndarray  # (k,) number of RBs received
    n_tti: int
    assignments: list = field(default_factory=list)

    @property
    def mean_rate(self):
        return self.served / self.n_tti


def run_scheduler(mode, rates, *, initial_average=None, window=100.0, keep_assignments=False):
    """Schedule a ``(n_tti, k, n_rb)`` rate tensor with one scheduler."""
    rates = np.asarray(rates, dtype=float)
    n_tti, k, n_rb = rates.shape
    if mode not in SCHEDULERS:
        raise InvalidParameterError(f"unknown scheduler {mode!r}")
    init = np.ones(k) if initial_average is None else initial_average
    state = SchedulerState.for_users(k, init, window=window)
    served = np.zeros(k)
    count = np.zeros(k, dtype=int)
    kept = []
    for t in range(n_tti):
        r = rates[t]
        if mode == "rr":
            assign = schedule_round_robin(state, n_rb)
        elif mode == "best-cqi":
            assign = schedule_best_cqi(r)
        else:
            assign = schedule_proportional_fair(r, state)
        served += served_rate(r, assign)
        count += np.bincount(assign, minlength=k)
        if keep_assignments:
            kept.append(assign)
    return ScheduleResult(served, count, n_tti, kept)
