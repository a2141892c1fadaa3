"""Large-scale losses, shadowing, temporally correlated fading and SNR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from .errors import InvalidParameterError

SPEED_OF_LIGHT = 299_792_458.0
BOLTZMANN = 1.380649e-23


def dbm_to_w(dbm):
    return 10 ** ((np.asarray(dbm, dtype=float) - 30) / 10)


def w_to_dbm(w):
    return 10 * np.log10(w) + 30


@dataclass(frozen=True)
class PropagationParams:
    macro_intercept_db: float = 128.1
    macro_slope_db: float = 37.6
    femto_intercept_db: float = 127.0
    femto_slope_db: float = 30.0
    wall_loss_db: float = 10.0
    min_distance_m: float = 10.0
    shadowing_std_macro_db: float = 8.0
    shadowing_std_femto_db: float = 4.0
    macro_power_dbm: float = 46.0
    femto_power_dbm: float = 20.0
    system_bandwidth_hz: float = 10e6
    noise_figure_db: float = 9.0
    temperature_k: float = 290.0
    carrier_hz: float = 2.1e9
    tti_s: float = 1e-3
    beamwidth_3db_deg: float = 70.0
    front_to_back_db: float = 20.0
    rx_correlation: float = 0.0

    @property
    def noise_power_w(self):
        return thermal_noise_w(self.system_bandwidth_hz, self.noise_figure_db, self.temperature_k)

    @property
    def macro_power_w(self):
        return float(dbm_to_w(self.macro_power_dbm))

    @property
    def femto_power_w(self):
        return float(dbm_to_w(self.femto_power_dbm))


DEFAULT_PARAMS = PropagationParams()


def thermal_noise_w(bandwidth_hz, noise_figure_db=0.0, temperature_k=290.0):
    return BOLTZMANN * temperature_k * bandwidth_hz * 10 ** (noise_figure_db / 10)


def pathloss(d, kind="macro", params=DEFAULT_PARAMS):
    """Distance-dependent pathloss in dB; ``d`` in metres, floored at 10 m."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise InvalidParameterError("distance must be positive")
    d_km = np.maximum(d, params.min_distance_m) / 1000.0
    if kind in ("macro", "rru"):
        return params.macro_intercept_db + params.macro_slope_db * np.log10(d_km)
    if kind == "femto":
        return (params.femto_intercept_db + params.femto_slope_db * np.log10(d_km)
                + params.wall_loss_db)
    raise InvalidParameterError(f"unknown link kind {kind!r}")


def antenna_gain_db(angle_deg, params=DEFAULT_PARAMS):
    """Horizontal parabolic sector pattern, 0 dB at boresight."""
    a = (np.asarray(angle_deg, dtype=float) + 180.0) % 360.0 - 180.0
    return -np.minimum(12.0 * (a / params.beamwidth_3db_deg) ** 2, params.front_to_back_db)


def shadowing_sample(rng, size=None, std_db=8.0):
    """Zero-mean log-normal shadowing in dB."""
    return rng.normal(0.0, std_db, size)


def doppler_correlation(velocity_kmh, carrier_hz=2.1e9, tti_s=1e-3):
    """Lag-one correlation of a Clarke/Jakes channel, clipped to [0, 1]."""
    v = np.asarray(velocity_kmh, dtype=float)
    if np.any(v < 0):
        raise InvalidParameterError("velocity must be non-negative")
    f_d = v / 3.6 * carrier_hz / SPEED_OF_LIGHT
    x = 2 * np.pi * f_d * tti_s
    # J0 turns negative past its first zero and oscillates; clip at zero there
    rho = np.where(x >= 2.404825557695773, 0.0, np.clip(j0(x), 0.0, 1.0))
    return float(rho) if rho.ndim == 0 else rho


@dataclass(frozen=True)
class FadingTrace:
    """Per-TTI, per-RB channel matrices, shape ``(*batch, n_tti, n_rb, n_rx, n_tx)``."""

    h: np.ndarray
    rho: float

    @property
    def n_tti(self):
        return self.h.shape[-4]

    def gains(self):
        """``|h|^2`` for single-antenna links."""
        return np.abs(self.h[..., 0, 0]) ** 2


def _cgauss(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def exponential_correlation(n, r):
    idx = np.arange(n)
    return r ** np.abs(idx[:, None] - idx[None, :])


def generate_fading(n_tti, n_rb, n_rx, n_tx, rho, rng, batch=(), rx_correlation=0.0):
    """First-order autoregressive Rayleigh fading across TTIs.

    ``h[t] = rho h[t-1] + sqrt(1 - rho^2) w[t]`` with unit-power complex
    Gaussian innovations, independent over RBs, antennas and ``batch``.
    The first TTI is drawn from the stationary law.
    """
    if min(n_tti, n_rb, n_rx, n_tx) < 1:
        raise InvalidParameterError("all fading dimensions must be at least 1")
    if not 0.0 <= rho <= 1.0:
        raise InvalidParameterError("rho must lie in [0, 1]")
    batch = tuple(np.atleast_1d(batch)) if batch != () else ()
    shape = (*batch, n_rb, n_rx, n_tx)
    h = np.empty((*batch, n_tti, n_rb, n_rx, n_tx), dtype=complex)
    cur = _cgauss(rng, shape)
    h[..., 0, :, :, :] = cur
    innov = np.sqrt(max(0.0, 1.0 - rho * rho))
    for t in range(1, n_tti):
        if rho < 1.0:
            cur = rho * cur + innov * _cgauss(rng, shape)
        h[..., t, :, :, :] = cur
    if rx_correlation and n_rx > 1:
        root = np.linalg.cholesky(exponential_correlation(n_rx, rx_correlation))
        h = root @ h
    return FadingTrace(h, float(rho))


def wideband_snr(tx_power_w, loss_db, noise_power_w):
    """Average SNR from transmit power, total loss (pathloss + shadowing) and noise."""
    return np.asarray(tx_power_w) * 10 ** (-np.asarray(loss_db) / 10) / noise_power_w


@dataclass(frozen=True)
class LinkTable:
    """Large-scale link state between users and transmission points.

    Arrays are ``(k, n_tp)``.  ``tp_cell`` maps each transmission point to
    its cell (or ``n_cells + femto id``); ``tp_power`` holds its transmit
    power in W.
    """

    distance: np.ndarray
    pathloss_db: np.ndarray
    shadowing_db: np.ndarray
    antenna_gain_db: np.ndarray
    tp_cell: np.ndarray
    tp_power: np.ndarray
    tp_antennas: np.ndarray
    tp_kind: tuple
    n_cells: int

    @property
    def loss_db(self):
        return self.pathloss_db + self.shadowing_db - self.antenna_gain_db

    @property
    def rx_power_w(self):
        return self.tp_power[None, :] * 10 ** (-self.loss_db / 10)

    def wideband_snr(self, noise_power_w):
        return wideband_snr(self.tp_power[None, :], self.loss_db, noise_power_w)

    def per_candidate_power(self):
        """Received power summed over the transmission points of each cell/femto."""
        n_cand = int(self.tp_cell.max()) + 1
        out = np.zeros((self.distance.shape[0], n_cand))
        np.add.at(out.T, self.tp_cell, self.rx_power_w.T)
        return out


def transmission_points(layout):
    """Flattened transmission points: cells' points first, then femtos."""
    tps, owner = [], []
    for cell in layout.cells:
        for tp in cell.tx_points:
            tps.append(tp)
            owner.append(cell.id)
    n_cells = len(layout.cells)
    for f in layout.femtos:
        tps.append(f)
        owner.append(n_cells + f.id)
    return tps, np.array(owner, dtype=int)


def compute_links(layout, positions, rng, params=DEFAULT_PARAMS, *, indoor=None):
    """Pathloss, shadowing and antenna gain for every (user, transmission point).

    Femto links use the femto model (which carries the wall loss).
    ``indoor`` marks users that sit inside a building: their macro/RRU links
    get the same wall loss.  Shadowing is i.i.d. per link, drawn in a fixed
    order: one ``(k, n_tp)`` block.
    """
    pos = np.atleast_2d(positions)
    tps, owner = transmission_points(layout)
    tp_pos = np.array([tp.position for tp in tps])
    kinds = tuple(getattr(tp, "kind", "femto") for tp in tps)
    is_femto = np.array([k == "femto" for k in kinds])
    diff = pos[:, None, :] - tp_pos[None, :, :]
    dist = np.maximum(np.hypot(diff[..., 0], diff[..., 1]), 1e-6)

    pl = np.where(is_femto[None, :], pathloss(dist, "femto", params), pathloss(dist, "macro", params))
    if indoor is not None:
        ind = np.asarray(indoor, dtype=bool)
        pl = pl + np.where(ind[:, None] & ~is_femto[None, :], params.wall_loss_db, 0.0)
    std = np.where(is_femto, params.shadowing_std_femto_db, params.shadowing_std_macro_db)
    sh = shadowing_sample(rng, dist.shape, 1.0) * std[None, :]

    gain = np.zeros_like(dist)
    for j, tp in enumerate(tps):
        orient = getattr(tp, "orientation", None)
        if orient is not None:
            az = np.rad2deg(np.arctan2(diff[:, j, 1], diff[:, j, 0]))
            gain[:, j] = antenna_gain_db(az - orient, params)

    return LinkTable(
        distance=dist,
        pathloss_db=pl,
        shadowing_db=sh,
        antenna_gain_db=gain,
        tp_cell=owner,
        tp_power=np.array([tp.tx_power for tp in tps], dtype=float),
        tp_antennas=np.array([tp.n_antennas for tp in tps], dtype=int),
        tp_kind=kinds,
        n_cells=len(layout.cells),
    )


def calibrate_interference_floor(full_layout, n_explicit_cells=3, params=DEFAULT_PARAMS,
                                 n_points=64):
    """Mean out-of-site interference power at cell-edge points (W).

    Cells with id ``< n_explicit_cells`` are simulated explicitly; everything
    else in ``full_layout`` collapses into one constant floor.  Sample points
    sit on the far edge of cell 0 (between 0.8 and 1 cell radius, within the
    sector), shadowing excluded.
    """
    r = full_layout.cell_radius
    site = full_layout.sites[0]
    ang = np.linspace(-50, 50, n_points)
    frac = np.linspace(0.8, 0.95, n_points)
    pts = site + (frac * r)[:, None] * np.column_stack([np.cos(np.deg2rad(ang)), np.sin(np.deg2rad(ang))])
    pts = pts[full_layout.in_sector(0, pts)]
    tps, owner = transmission_points(full_layout)
    power = np.zeros(len(pts))
    for tp, cell in zip(tps, owner):
        if cell < n_explicit_cells:
            continue
        d = np.hypot(*(pts - tp.position).T)
        g = 0.0
        if getattr(tp, "orientation", None) is not None:
            az = np.rad2deg(np.arctan2(*(pts - tp.position).T[::-1]))
            g = antenna_gain_db(az - tp.orientation, params)
        power += tp.tx_power * 10 ** (-(pathloss(d, "macro", params) - g) / 10)
    return float(np.mean(power))
