"""The five experiments.

Each experiment maps ``drop index -> per-drop samples`` with a pure
function (all randomness from :mod:`ltesim.rng` streams keyed by the drop
index), runs the drops through :func:`map_drops` and reduces them in drop
order into a :class:`ResultTable`.
"""

from __future__ import annotations

import functools

import numpy as np

from .. import geometry as geo
from .. import linkmodel as lm
from .. import mimo
from .. import propagation as prop
from ..errors import InvalidParameterError
from ..metrics import ThroughputReport, fit_loglog_gain, jain_index, tier_split_report
from ..rng import drop_streams, stream
from ..scheduling import estimate_rates, run_scheduler
from .config import parse_antennas
from .parallel import map_drops
from .results import ResultTable


def _rate_fn(cfg):
    return functools.partial(lm.rate_map, efficiency=cfg.radio.rate_efficiency, cap=cfg.radio.rate_cap)


def _macro_layout(cfg, rings=None, **kw):
    lay = cfg.layout
    return geo.build_hex_grid(lay.rings if rings is None else rings, lay.isd, lay.rru_fraction,
                              rru_offset_deg=lay.rru_offset_deg,
                              cell_power=cfg.propagation.macro_power_w, **kw)


def _drops(cfg, fn):
    return map_drops(functools.partial(fn, cfg), range(cfg.n_drops))


# -- multi-user gain ---------------------------------------------------------

def _codebook_bits(mg, n_tx):
    bits = mg.codebook_bits
    if isinstance(bits, dict):
        return int(bits.get(str(n_tx), max(1, 2 * (n_tx // 2))))
    return int(bits)


def mu_gain_rates(cfg, d):
    """Per-antenna-configuration rate tensors ``(n_tti, k_max, n_rb)`` of one drop."""
    mg = cfg.mu_gain
    params = cfg.propagation
    names = ["users", "shadowing"] + [f"fading-{a}" for a in mg.antennas]
    rngs = drop_streams(cfg.seed, "mu-gain", d, names)
    layout = _macro_layout(cfg)
    k_max = max(mg.users)
    drop = geo.drop_users_uniform(layout, k_max, rngs["users"], cell=0,
                                  velocity=cfg.radio.velocity_kmh)
    links = prop.compute_links(layout, drop.positions, rngs["shadowing"], params)
    rx = links.per_candidate_power()
    sinr_wb = rx[:, 0] / (params.noise_power_w + rx[:, 1:].sum(axis=1))
    rho = prop.doppler_correlation(cfg.radio.velocity_kmh, params.carrier_hz, params.tti_s)
    rate_fn = _rate_fn(cfg)

    out = {}
    for ant in mg.antennas:
        nt, nr = parse_antennas("mu_gain.antennas", ant)
        fad = prop.generate_fading(cfg.n_tti, mg.n_rb, nr, nt, rho, rngs[f"fading-{ant}"],
                                   batch=(k_max,), rx_correlation=params.rx_correlation)
        H = fad.h * np.sqrt(sinr_wb)[:, None, None, None, None]
        if nt == 1:
            rates = rate_fn(np.abs(H[..., 0, 0]) ** 2)
        else:
            books = mimo.clsm_codebooks(nt, _codebook_bits(mg, nt))
            _, _, rates = mimo.clsm_transceiver(H, books, 1.0, rate_fn)
        rates = rates * (1.0 - float(mg.pilot_overhead.get(str(nt), 0.0)))
        out[ant] = np.transpose(rates, (1, 0, 2))
    return out


def _mu_gain_drop(cfg, d):
    mg = cfg.mu_gain
    bw = cfg.radio.bandwidth_per_rb
    out = {}
    for ant, rates in mu_gain_rates(cfg, d).items():
        for k in mg.users:
            r = rates[:, :k, :]
            init = r[0].mean(axis=1) * mg.n_rb / k
            for s in mg.schedulers:
                res = run_scheduler(s, r, initial_average=init, window=mg.pf_window)
                tput = res.mean_rate * bw
                rb_share = res.rb_count / res.rb_count.sum()
                out[(k, s, ant)] = (tput.sum(), jain_index(tput), jain_index(rb_share))
    return out


def run_mu_gain(cfg):
    mg = cfg.mu_gain
    per_drop = _drops(cfg, _mu_gain_drop)
    table = ResultTable("mu-gain")
    for ant in mg.antennas:
        for s in mg.schedulers:
            for k in mg.users:
                vals = np.array([d[(k, s, ant)] for d in per_drop])
                table.add("k", k, f"sum_tput/{s}/{ant}", vals[:, 0])
                table.add("k", k, f"jain/{s}/{ant}", vals[:, 1])
                table.add("k", k, f"jain_rb/{s}/{ant}", vals[:, 2])
    fits = {}
    for ant in mg.antennas:
        for s in mg.schedulers:
            _, rows = table.series(f"sum_tput/{s}/{ant}")
            fit = fit_loglog_gain([(r.sweep_value, r.mean) for r in rows])
            fits[(s, ant)] = fit
            n = len(rows)
            table.add_exact("fit", 0, f"fit_m/{s}/{ant}", fit.m, n)
            table.add_exact("fit", 0, f"fit_b/{s}/{ant}", fit.b, n)
            table.add_exact("fit", 0, f"fit_r2/{s}/{ant}", fit.r2, n)
    if "1x1" in mg.antennas:
        for (s, ant), fit in fits.items():
            table.add_exact("fit", 0, f"mux_gain/{s}/{ant}", fit.m / fits[(s, "1x1")].m)
    return table.sorted()


# -- distributed antenna systems ---------------------------------------------

DAS_COMPARISONS = (
    # (name, (mode, layout) that should win, (mode, layout) it is compared with)
    ("zf-perfect-vs-svd-perfect/centralized", ("zf-perfect", "centralized"), ("svd-perfect", "centralized")),
    ("zf-perfect-vs-svd-perfect/das", ("zf-perfect", "das"), ("svd-perfect", "das")),
    ("zf-quantized/das-vs-centralized", ("zf-quantized", "das"), ("zf-quantized", "centralized")),
    ("zf-quantized-vs-pu2rc-quantized/das", ("zf-quantized", "das"), ("pu2rc-quantized", "das")),
)


def _das_layout(cfg, rings, rrus):
    return _macro_layout(cfg, rings=rings, rrus_per_cell=rrus, n_tx=cfg.das.n_tx)


@functools.lru_cache(maxsize=8)
def _das_floor(lay, params, dc, rrus):
    if dc.interference_floor_dbm is not None:
        return float(prop.dbm_to_w(dc.interference_floor_dbm))
    full = geo.build_hex_grid(dc.calibration_rings, lay.isd, lay.rru_fraction,
                              rru_offset_deg=lay.rru_offset_deg, rrus_per_cell=rrus,
                              cell_power=params.macro_power_w, n_tx=dc.n_tx)
    return prop.calibrate_interference_floor(full, 3, params)


def das_channels(cfg, d):
    """Normalized channels of both layouts for one drop.

    Returns ``{layout: (H, group_loss_db)}`` with ``H`` shaped
    ``(3, k_max, n_rb, n_rx, n_tx)`` and scaled so that noise plus
    interference (other explicit cells at full power, plus the floor) is
    one and a unit-norm precoder radiates the full cell power.  Both layouts
    share user positions, shadowing towards the site and fast fading; the
    centralized layout puts all antennas at the site.
    """
    dc = cfg.das
    params = cfg.propagation
    rngs = drop_streams(cfg.seed, "das", d, ["users", "shadowing", "fading"])
    layout = _das_layout(cfg, 0, 2)
    k = max(dc.users_per_cell)
    pos = np.concatenate([geo.drop_users_uniform(layout, k, rngs["users"], cell=c).positions
                          for c in range(3)])
    links = prop.compute_links(layout, pos, rngs["shadowing"], params)
    loss = links.loss_db.reshape(3, k, -1)  # TPs: (site, rru, rru) per cell
    fad = prop.generate_fading(1, dc.n_rb, dc.n_rx, dc.n_tx, 0.0, rngs["fading"],
                               batch=(3, k), rx_correlation=params.rx_correlation)
    h = fad.h[:, :, 0]  # (3, k, n_rb, n_rx, n_tx)
    groups = mimo.das_antenna_groups(dc.n_tx - 4, [2, 2])
    p_cell = params.macro_power_w
    noise = params.noise_power_w

    out = {}
    for name in dc.layouts:
        rrus = 2 if name == "das" else 0
        floor = _das_floor(cfg.layout, params, dc, rrus)
        if rrus:
            tp_loss = loss  # (3 cells, k, 9 TPs)
            tp_share = np.array([(dc.n_tx - 4) / dc.n_tx, 2 / dc.n_tx, 2 / dc.n_tx] * 3)
        else:
            tp_loss = loss[..., ::3]  # the site TP of every cell
            tp_share = np.ones(3)
        rx = p_cell * tp_share * 10 ** (-tp_loss / 10)  # (3, k, n_tp)
        n_per = tp_loss.shape[-1] // 3
        amp = np.empty((3, k, dc.n_tx))
        for c in range(3):
            own = slice(c * n_per, (c + 1) * n_per)
            interf = rx[c].sum(axis=1) - rx[c, :, own].sum(axis=1)
            n0 = noise + floor + interf
            if rrus:
                for g, ant in enumerate(groups):
                    amp[c][:, ant] = np.sqrt(p_cell * 10 ** (-tp_loss[c, :, c * n_per + g] / 10) / n0)[:, None]
            else:
                amp[c] = np.sqrt(p_cell * 10 ** (-tp_loss[c, :, c] / 10) / n0)[:, None]
        gl = np.stack([tp_loss[c, :, c * n_per:(c + 1) * n_per] for c in range(3)])
        out[name] = (h * amp[:, :, None, None, :], gl)
    return out


def _das_codebooks(cfg, rng, layout):
    dc = cfg.das
    if layout == "das":
        dims = [dc.n_tx - 4, 2, 2]
    else:
        dims = [dc.n_tx]
    return [mimo.random_codebook(n, dc.feedback_bits, rng) for n in dims]


def _das_cell_rates(cfg, H, gloss, books, tools, rate_fn):
    """Spectral efficiency of every mode on one cell and RB (``H``: ``(k, n_rx, n_tx)``)."""
    dc = cfg.das
    groups, clsm_books, unitary = tools
    k = H.shape[0]
    # single-user modes: every user gets an equal share of the resources
    # (round robin) or the RB goes to the best user
    pick = np.mean if dc.su_scheduler == "rr" else np.max
    out = {}
    for mode in dc.modes:
        if mode == "svd-perfect":
            out[mode] = float(pick(mimo.su_svd_transceiver(H, 1.0, rate_fn)))
        elif mode == "clsm-quantized":
            out[mode] = float(pick(mimo.clsm_transceiver(H, clsm_books, 1.0, rate_fn)[2]))
    rows = mimo.receive_combining(H)  # (k, n_tx)
    if "zf-perfect" in dc.modes:
        sel = mimo.zf_user_selection(rows, dc.n_tx, "perfect", rate_fn=rate_fn)
        dec = mimo.zf_precoder(rows[sel], 1.0, sel, "zf")
        out["zf-perfect"] = float(np.sum(rate_fn(mimo.mu_sinr(dec, rows[sel]))))
    if "zf-quantized" in dc.modes:
        reps = [mimo.das_feedback_allocation(rows[u], groups, gloss[u], books) for u in range(k)]
        est = np.array([r.estimate for r in reps])
        qerr = np.array([r.expected_error for r in reps])
        dims = np.array([r.dim for r in reps])
        sel = mimo.zf_user_selection(est, dc.n_tx, "quantized", expected_error=qerr, dims=dims,
                                     rate_fn=rate_fn)
        dec = mimo.zf_precoder(est[sel], 1.0, sel, "zf")
        out["zf-quantized"] = float(np.sum(rate_fn(mimo.mu_sinr(dec, rows[sel]))))
    if "pu2rc-quantized" in dc.modes:
        sinr_bits = dc.feedback_bits - dc.pu2rc_matrix_bits - int(np.log2(dc.n_tx))
        reps = mimo.pu2rc_reports(rows, unitary, 1.0, 1.0, sinr_bits=max(sinr_bits, 1))
        dec = mimo.pu2rc_transceiver(reps, unitary, 1.0, rate_fn)
        users = list(dec.users)
        out["pu2rc-quantized"] = float(np.sum(rate_fn(mimo.mu_sinr(dec, rows[users])))) if users else 0.0
    return out


def _das_drop(cfg, d):
    dc = cfg.das
    rate_fn = _rate_fn(cfg)
    chans = das_channels(cfg, d)
    area = _das_layout(cfg, 0, 0).region.area
    clsm_books = mimo.clsm_codebooks(dc.n_tx, dc.feedback_bits - dc.clsm_rank_bits,
                                     max_rank=min(dc.n_tx, dc.n_rx))
    unitary = mimo.dft_unitary_set(dc.n_tx, dc.pu2rc_matrix_bits)
    out = {}
    for layout in dc.layouts:
        H, gloss = chans[layout]
        books = _das_codebooks(cfg, stream(cfg.seed, "das", "codebooks", layout), layout)
        groups = (mimo.das_antenna_groups(dc.n_tx - 4, [2, 2]) if layout == "das"
                  else [np.arange(dc.n_tx)])
        tools = (groups, clsm_books, unitary)
        for k in dc.users_per_cell:
            acc = {m: 0.0 for m in dc.modes}
            for c in range(3):
                for rb in range(dc.n_rb):
                    rates = _das_cell_rates(cfg, H[c, :k, rb], gloss[c, :k], books, tools, rate_fn)
                    for m, v in rates.items():
                        acc[m] += v / dc.n_rb
            for m in dc.modes:
                # bit/s/Hz summed over the three cells, per m^2
                out[(k, m, layout)] = acc[m] / area
    return out


def run_das(cfg):
    dc = cfg.das
    per_drop = _drops(cfg, _das_drop)
    table = ResultTable("das")
    for k in dc.users_per_cell:
        for layout in dc.layouts:
            for m in dc.modes:
                table.add("users_per_cell", k, f"ase/{m}/{layout}",
                          [d[(k, m, layout)] for d in per_drop])
        for name, win, lose in DAS_COMPARISONS:
            if win[0] in dc.modes and lose[0] in dc.modes and win[1] in dc.layouts and lose[1] in dc.layouts:
                diff = [d[(k, *win)] - d[(k, *lose)] for d in per_drop]
                table.add("users_per_cell", k, f"delta/{name}", diff)
    return table.sorted()


# -- macro/femto overlay -----------------------------------------------------

def _femto_counts(fc):
    return tuple(fc.femto_counts) if fc.femto_counts is not None else tuple(range(fc.n_clusters + 1))


def _femto_drop(cfg, d):
    fc = cfg.femto
    params = cfg.propagation
    rngs = drop_streams(cfg.seed, "femto", d, ["users", "shadowing", "fading"])
    macro = _macro_layout(cfg)
    drop, centers = geo.drop_user_clusters(macro.cell_region(0), fc.n_clusters, fc.users_per_cluster,
                                           fc.cluster_radius, rngs["users"],
                                           velocity=cfg.radio.velocity_kmh)
    # links towards every cell and every potential femto, drawn once so that
    # all femto counts see the same users, shadowing and fading
    full = geo.place_femtos_at_centers(macro, centers, fc.n_clusters, tx_power=params.femto_power_w)
    indoor = np.full(drop.k, bool(fc.indoor_users))
    links = prop.compute_links(full, drop.positions, rngs["shadowing"], params, indoor=indoor)
    rx = links.per_candidate_power()  # (k, n_cells + n_clusters)
    n_cells = macro.n_cells
    rho = prop.doppler_correlation(cfg.radio.velocity_kmh, params.carrier_hz, params.tti_s)
    fad = prop.generate_fading(cfg.n_tti, fc.n_rb, 1, 1, rho, rngs["fading"], batch=(drop.k,))
    gain = np.abs(fad.h[..., 0, 0]) ** 2  # (k, n_tti, n_rb)
    rate_fn = _rate_fn(cfg)
    bw = cfg.radio.bandwidth_per_rb

    out = {}
    for n in _femto_counts(fc):
        active = rx[:, :n_cells + n]
        eligible = np.zeros(n_cells + n, dtype=bool)
        eligible[0] = True
        eligible[n_cells:] = True
        att = geo.attach_users(drop, active, eligible).attachment
        sig = active[np.arange(drop.k), att]
        interf = active.sum(axis=1) - sig
        tput = np.zeros(drop.k)
        for node in np.unique(att):
            users = np.flatnonzero(att == node)
            rates = estimate_rates(sig[users], interf[users], params.noise_power_w,
                                   gain[users].reshape(len(users), -1), rate_fn=rate_fn)
            rates = rates.reshape(len(users), cfg.n_tti, fc.n_rb).transpose(1, 0, 2)
            init = rates[0].mean(axis=1) * fc.n_rb / len(users)
            res = run_scheduler(fc.scheduler, rates, initial_average=init, window=fc.pf_window)
            tput[users] = res.mean_rate * bw
        tier = np.where(att >= n_cells, "femto", "macro")
        split = tier_split_report(ThroughputReport(tput, tier))
        out[n] = (split, jain_index(tput))
    return out


def run_femto(cfg):
    per_drop = _drops(cfg, _femto_drop)
    table = ResultTable("femto")
    for n in _femto_counts(cfg.femto):
        splits = [d[n][0] for d in per_drop]
        table.add("femto_count", n, "tput_combined", [s.combined for s in splits])
        # an absent tier contributes no sample (NaN is dropped)
        table.add("femto_count", n, "tput_macro",
                  [np.nan if s.macro is None else s.macro for s in splits])
        table.add("femto_count", n, "tput_femto",
                  [np.nan if s.femto is None else s.femto for s in splits])
        table.add("femto_count", n, "jain", [d[n][1] for d in per_drop])
        table.add("femto_count", n, "femto_users", [s.n_femto for s in splits])
    return table.sorted()


# -- carrier frequency offset ------------------------------------------------

def _cfo_model(cc):
    if cc.preset not in lm.CFO_PRESETS:
        raise InvalidParameterError(f"unknown CFO preset {cc.preset!r}")
    base = lm.CFO_PRESETS[cc.preset]
    return lm.CfoModel(base.c_mse if cc.c_mse is None else cc.c_mse,
                       base.n_obs if cc.n_obs is None else cc.n_obs)


def _cfo_drop(cfg, d):
    # one standard-normal offset per SNR point; scaled by the residual CFO later
    return stream(cfg.seed, "cfo", d).standard_normal(len(cfg.cfo.snr_db))


def run_cfo(cfg):
    cc = cfg.cfo
    model = _cfo_model(cc)
    rate_fn = _rate_fn(cfg)
    z = np.array(_drops(cfg, _cfo_drop))  # (n_drops, n_snr)
    table = ResultTable("cfo")
    for j, snr_db in enumerate(cc.snr_db):
        snr = 10 ** (snr_db / 10)
        re = np.full(cc.n_re, snr)
        if cc.epsilon_override is not None:
            eps_pred = float(cc.epsilon_override)
            eps = np.full(len(z), eps_pred)
        else:
            eps_pred = float(lm.residual_cfo(model, snr))
            eps = np.clip(z[:, j] * eps_pred, -0.999, 0.999)
        predicted = lm.throughput_loss(re, eps_pred, rate_fn)
        simulated = np.atleast_1d(lm.throughput_loss(re, eps, rate_fn))
        table.add_exact("snr_db", snr_db, "loss_predicted", predicted)
        table.add("snr_db", snr_db, "loss_simulated", simulated)
        table.add_exact("snr_db", snr_db, "epsilon", eps_pred)
    return table.sorted()


# -- pilot/data power split --------------------------------------------------

def _pilot_drop(cfg, d):
    pp = cfg.pilot_power
    rng = stream(cfg.seed, "pilot-power", d)
    # per-stream channel gains, shared by every velocity and configuration
    return rng.exponential(1.0, (pp.n_samples, 4))


def pilot_power_point(pp, n_tx, n_rx, velocity):
    """Full-budget optimal split and power-efficient split at one operating point."""
    est = lm.EstimatorModel(pp.c_noise, pp.c_floor, pp.pilot_density_per_tx * n_tx)
    noise = 10 ** (-pp.snr_db / 10)
    streams = min(n_tx, n_rx)
    unit = lm.optimal_power_split(est, velocity, noise, 1.0, streams)
    eff = lm.power_efficient_split(est, velocity, noise, 1.0, streams, sinr_slack=pp.sinr_slack)
    return est, noise, streams, unit, eff


def run_pilot_power(cfg):
    pp = cfg.pilot_power
    rate_fn = _rate_fn(cfg)
    gains = _drops(cfg, _pilot_drop)
    table = ResultTable("pilot-power")
    for ant in pp.antennas:
        nt, nr = parse_antennas("pilot_power.antennas", ant)
        for v in pp.velocities:
            est, noise, streams, unit, eff = pilot_power_point(pp, nt, nr, v)
            s_unit = lm.split_sinr(est, unit, v, noise, streams)
            s_eff = lm.split_sinr(est, eff, v, noise, streams)
            t_unit = [np.mean(np.sum(rate_fn(s_unit * g[:, :streams]), axis=1)) for g in gains]
            t_eff = [np.mean(np.sum(rate_fn(s_eff * g[:, :streams]), axis=1)) for g in gains]
            table.add("velocity", v, f"tput_unit/{ant}", t_unit)
            table.add("velocity", v, f"tput_efficient/{ant}", t_eff)
            table.add_exact("velocity", v, f"power_used_pct/{ant}", 100.0 * eff.total / eff.budget)
            table.add_exact("velocity", v, f"pilot_fraction/{ant}", unit.pilot_fraction)
    return table.sorted()


RUNNERS = {
    "mu-gain": run_mu_gain,
    "das": run_das,
    "femto": run_femto,
    "cfo": run_cfo,
    "pilot-power": run_pilot_power,
}


def run_experiment(cfg):
    """Run the experiment named in ``cfg`` and return its sorted table."""
    return RUNNERS[cfg.experiment](cfg)
