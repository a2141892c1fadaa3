"""SU/MU-MIMO transceiver abstractions and limited-feedback CSIT.

Channel matrices are ``n_rx x n_tx`` and are assumed normalized so that
a precoder of unit Frobenius norm delivers the full cell power against
unit noise-plus-interference; ``snr`` arguments rescale that.  Most kernels
accept arbitrary leading batch dimensions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannelError, InvalidParameterError, SingularSetError


def log2_rate(sinr):
    return np.log2(1 + np.asarray(sinr, dtype=float))


@dataclass(frozen=True)
class Codebook:
    entries: np.ndarray  # (2**bits, n_tx), unit-norm rows
    bits: int

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.shape[0] != 2 ** self.bits:
            raise InvalidParameterError("codebook size must be 2**bits")
        object.__setattr__(self, "entries", e)

    @property
    def dim(self):
        return self.entries.shape[1]


def random_codebook(n_tx, bits, rng):
    """Random vector quantization: i.i.d. directions uniform on the sphere."""
    g = rng.standard_normal((2 ** bits, n_tx)) + 1j * rng.standard_normal((2 ** bits, n_tx))
    return Codebook(g / np.linalg.norm(g, axis=1, keepdims=True), bits)


def dft_unitary_set(n_tx, bits):
    """``2**bits`` unitary matrices: a DFT basis under diagonal phase rotations."""
    n = np.arange(n_tx)
    dft = np.exp(2j * np.pi * np.outer(n, n) / n_tx) / np.sqrt(n_tx)
    count = 2 ** bits
    mats = []
    for g in range(count):
        rot = np.exp(2j * np.pi * g * n / (count * n_tx))
        mats.append(rot[:, None] * dft)
    return np.array(mats)


def clsm_codebooks(n_tx, bits_per_rank, max_rank=None):
    """Rank-indexed precoder sets: the first ``r`` columns of each rotated DFT basis.

    Columns are scaled by ``1/sqrt(r)`` so every precoder has unit
    Frobenius norm (equal power per layer).
    """
    max_rank = n_tx if max_rank is None else max_rank
    mats = dft_unitary_set(n_tx, bits_per_rank)
    return {r: mats[:, :, :r] / np.sqrt(r) for r in range(1, max_rank + 1)}


def waterfill(gains, total_power=1.0):
    """Water-filling powers over the last axis of ``gains`` (channel gain / noise)."""
    g = np.asarray(gains, dtype=float)
    order = np.argsort(-g, axis=-1)
    gs = np.take_along_axis(g, order, axis=-1)
    n = g.shape[-1]
    safe = np.where(gs > 0, gs, np.inf)
    inv_cum = np.cumsum(1.0 / safe, axis=-1)
    m = np.arange(1, n + 1)
    level = (total_power + inv_cum) / m
    active = (gs > 0) & (level > 1.0 / safe)
    n_act = np.maximum(active.sum(axis=-1, keepdims=True), 1)
    mu = np.take_along_axis(level, n_act - 1, axis=-1)
    p_sorted = np.where(gs > 0, np.maximum(mu - 1.0 / safe, 0.0), 0.0)
    p = np.empty_like(p_sorted)
    np.put_along_axis(p, order, p_sorted, axis=-1)
    return p


def su_svd_transceiver(H, snr=1.0, rate_fn=log2_rate):
    """Water-filled SVD transmission; returns the achievable rate.

    With the default ``rate_fn`` this is the MIMO capacity under a total
    power constraint of one and noise ``1/snr``.
    """
    H = np.asarray(H, dtype=complex)
    s = np.linalg.svd(H, compute_uv=False)
    g = s ** 2 * snr
    p = waterfill(g, 1.0)
    sinr = p * g
    out = np.sum(np.where(p > 0, rate_fn(sinr), 0.0), axis=-1)
    return float(out) if out.ndim == 0 else out


def hpd_inv_diag(a):
    """Diagonal of the inverse of Hermitian positive-definite matrices.

    Unit-lower LDL^H factorization on the last two axes, with every matrix
    entry held as its own batch array (much faster than batched ``inv`` for
    the tiny matrices used here).
    """
    a = np.asarray(a)
    r = a.shape[-1]
    A = [[a[..., i, j] for j in range(r)] for i in range(r)]
    L = [[None] * r for _ in range(r)]
    D = [None] * r
    for j in range(r):
        d = np.real(A[j][j]).copy()
        for k in range(j):
            d -= D[k] * np.abs(L[j][k]) ** 2
        D[j] = d
        for i in range(j + 1, r):
            s = A[i][j].copy()
            for k in range(j):
                s -= L[i][k] * D[k] * np.conj(L[j][k])
            L[i][j] = s / d
    # diag(A^-1)_c = sum_i |(L^-1)_ic|^2 / D_i
    out = [1.0 / D[c] for c in range(r)]
    for c in range(r):
        X = {}
        for i in range(c + 1, r):
            s = -L[i][c]
            for k in range(c + 1, i):
                s = s - L[i][k] * X[k]
            X[i] = s
            out[c] = out[c] + np.abs(s) ** 2 / D[i]
    return np.stack(out, axis=-1)


def _mmse_from_gram(gram, snr):
    r = gram.shape[-1]
    inv_diag = hpd_inv_diag(np.eye(r) + snr * gram)
    return np.maximum(1.0 / inv_diag - 1.0, 0.0)


def mmse_stream_sinr(H, W, snr=1.0):
    """Per-stream SINR of linear MMSE detection for precoder ``W`` (unit Frobenius norm)."""
    HW = np.asarray(H) @ np.asarray(W)
    gram = np.conj(np.swapaxes(HW, -1, -2)) @ HW
    return _mmse_from_gram(gram, snr)


def clsm_transceiver(H, codebooks, snr=1.0, rate_fn=log2_rate):
    """Exhaustive (rank, precoder) choice under MMSE detection.

    Returns ``(rank, index, rate)``; for batched ``H`` each is an array.
    Ties resolve to the lowest rank, then lowest index.
    """
    H = np.asarray(H, dtype=complex)
    max_rank = min(H.shape[-1], H.shape[-2])
    R = np.conj(np.swapaxes(H, -1, -2)) @ H
    best_rate = np.full(H.shape[:-2], -np.inf)
    best_rank = np.zeros(H.shape[:-2], dtype=int)
    best_idx = np.zeros(H.shape[:-2], dtype=int)
    for r in sorted(codebooks):
        if r > max_rank:
            continue
        W = codebooks[r]  # (G, n_tx, r)
        gram = np.einsum("gia,...ij,gjb->...gab", np.conj(W), R, W, optimize=True)
        sinr = _mmse_from_gram(gram, snr)  # (..., G, r)
        rates = np.sum(rate_fn(sinr), axis=-1)
        idx = np.argmax(rates, axis=-1)
        val = np.take_along_axis(rates, idx[..., None], axis=-1)[..., 0]
        better = val > best_rate
        best_rate = np.where(better, val, best_rate)
        best_rank = np.where(better, r, best_rank)
        best_idx = np.where(better, idx, best_idx)
    if best_rate.ndim == 0:
        return int(best_rank), int(best_idx), float(best_rate)
    return best_rank, best_idx, best_rate


def receive_combining(H):
    """Dominant-eigenmode combining: returns ``u1^H H`` (norm = largest singular value)."""
    H = np.asarray(H, dtype=complex)
    if H.shape[-2] == 1:
        return H[..., 0, :].copy()
    u, s, vh = np.linalg.svd(H)
    return s[..., 0, None] * vh[..., 0, :]


def quantize_csit(row, codebook):
    """Codebook entry closest in chordal distance to the channel direction."""
    row = np.asarray(row, dtype=complex)
    norm = np.linalg.norm(row)
    if norm == 0:
        raise DegenerateChannelError("cannot quantize a zero channel")
    entries = codebook.entries if isinstance(codebook, Codebook) else np.asarray(codebook)
    corr = np.abs(np.conj(entries) @ (row / norm)) ** 2
    idx = int(np.argmax(corr))
    return idx, entries[idx]


def quantization_error(row, direction):
    """``1 - |<row/|row|, direction>|^2``."""
    row = np.asarray(row, dtype=complex)
    return 1.0 - np.abs(np.vdot(direction, row / np.linalg.norm(row))) ** 2


def expected_rvq_error(dim, bits):
    """Mean quantization error of a random codebook (high-resolution approximation)."""
    if dim <= 1:
        return 0.0
    return 2.0 ** (-bits / (dim - 1))


@dataclass(frozen=True)
class FeedbackReport:
    group: int
    index: int
    gain: float  # energy of the quantized subvector (unquantized)
    direction: np.ndarray  # zero-padded unit vector over all n_tx antennas
    expected_error: float
    dim: int

    @property
    def estimate(self):
        return np.sqrt(self.gain) * self.direction


def das_feedback_allocation(row, groups, group_pathloss_db, codebooks):
    """Spend the whole feedback budget on the antenna group with least pathloss.

    ``groups`` lists antenna index arrays partitioning the row; ``codebooks``
    gives one codebook per group (matching its dimension).  Ties in pathloss
    go to the lowest group id.
    """
    if len(groups) == 0:
        raise InvalidParameterError("at least one antenna group is required")
    row = np.asarray(row, dtype=complex)
    g = int(np.argmin(np.asarray(group_pathloss_db, dtype=float)))
    ant = np.asarray(groups[g])
    sub = row[ant]
    idx, q = quantize_csit(sub, codebooks[g])
    direction = np.zeros(row.shape[-1], dtype=complex)
    direction[ant] = q
    cb = codebooks[g]
    return FeedbackReport(g, idx, float(np.linalg.norm(sub) ** 2), direction,
                          expected_rvq_error(len(ant), cb.bits), len(ant))


def das_antenna_groups(n_bs, rru_sizes):
    """Contiguous antenna index groups: the base station first, then each RRU."""
    sizes = [n_bs, *rru_sizes]
    edges = np.cumsum([0, *sizes])
    return [np.arange(edges[i], edges[i + 1]) for i in range(len(sizes))]


@dataclass(frozen=True)
class PrecodingDecision:
    users: tuple
    precoder: np.ndarray  # (n_tx, n_streams), unit-norm columns
    power: np.ndarray  # per-stream power
    mode: str

    @property
    def total_power(self):
        return float(np.sum(self.power * np.sum(np.abs(self.precoder) ** 2, axis=0)))


def zf_precoder(rows, cell_power=1.0, users=None, mode="zf"):
    """Zero-forcing beams from the right pseudo-inverse, equal power per user."""
    Hs = np.atleast_2d(np.asarray(rows, dtype=complex))
    k, n_tx = Hs.shape
    if k > n_tx:
        raise SingularSetError("more users than transmit antennas")
    sv = np.linalg.svd(Hs, compute_uv=False)
    if sv[-1] <= 1e-10 * sv[0]:
        raise SingularSetError("served set is rank deficient")
    W = np.linalg.pinv(Hs)
    W = W / np.linalg.norm(W, axis=0, keepdims=True)
    users = tuple(range(k)) if users is None else tuple(users)
    return PrecodingDecision(users, W, np.full(k, cell_power / k), mode)


def mu_sinr(decision, rows, noise=1.0):
    """Per-user SINR of a precoding decision over the true effective channels.

    ``rows`` are the served users' true channels, ordered like ``decision.users``.
    """
    if len(decision.users) == 0:
        return np.empty(0)
    Hs = np.atleast_2d(np.asarray(rows, dtype=complex))
    g = np.abs(Hs @ decision.precoder) ** 2 * decision.power[None, :]
    sig = np.diagonal(g).copy()
    return sig / (noise + g.sum(axis=1) - sig)


def _zf_sum_rate(est, qerr, dims, sel, power, noise, mode, rate_fn):
    """Estimated ZF sum rate of candidate sets ``sel`` (``(n_sets, s)`` indices)."""
    H = est[sel]  # (n_sets, s, n_tx)
    s = sel.shape[1]
    gram = H @ np.conj(np.swapaxes(H, -1, -2))
    sv = np.linalg.svd(H, compute_uv=False)
    ok = sv[:, -1] > 1e-10 * np.maximum(sv[:, 0], 1e-300)
    gram = np.where(ok[:, None, None], gram, np.eye(s))
    inv_diag = np.real(np.diagonal(np.linalg.inv(gram), axis1=-2, axis2=-1))
    p = power / s
    sig = p / inv_diag
    interf = 0.0
    if mode == "quantized" and s > 1:
        norm2 = np.sum(np.abs(H) ** 2, axis=-1)
        leak = qerr[sel] / np.maximum(dims[sel] - 1, 1)
        interf = p * (s - 1) * norm2 * leak
    rates = np.sum(rate_fn(sig / (noise + interf)), axis=-1)
    return np.where(ok, rates, -np.inf)


def zf_user_selection(estimates, n_tx, mode="perfect", *, expected_error=None, dims=None,
                      power=1.0, noise=1.0, rate_fn=log2_rate):
    """Greedy semi-orthogonal user selection for ZF beamforming.

    Users are added one at a time, each time the one that maximizes the
    estimated sum rate, until ``n_tx`` are served or the estimate stops
    increasing.  The greedy pass is started from every candidate (all passes
    advance together, one batched rate evaluation per step) and the best
    final set wins, ties to the lowest starting user.  In ``quantized`` mode
    the estimate charges every user the mean leakage its quantization error
    causes with the other beams.
    """
    if mode not in ("perfect", "quantized"):
        raise InvalidParameterError(f"unknown selection mode {mode!r}")
    est = np.atleast_2d(np.asarray(estimates, dtype=complex))
    k = est.shape[0]
    qerr = np.zeros(k) if expected_error is None else np.asarray(expected_error, dtype=float)
    dims = np.full(k, est.shape[1]) if dims is None else np.asarray(dims)
    chosen = [[u] for u in range(k)]
    value = _zf_sum_rate(est, qerr, dims, np.arange(k)[:, None], power, noise, mode, rate_fn)
    active = [u for u in range(k) if np.isfinite(value[u])]
    for step in range(1, min(n_tx, k)):
        if not active:
            break
        rest = [np.setdiff1d(np.arange(k), chosen[i]) for i in active]
        sets = np.concatenate([np.column_stack([np.tile(chosen[i], (len(r), 1)), r])
                               for i, r in zip(active, rest)])
        rates = _zf_sum_rate(est, qerr, dims, sets, power, noise, mode, rate_fn)
        rates = rates.reshape(len(active), k - step)
        j = np.argmax(rates, axis=1)
        still = []
        for row, i in enumerate(active):
            r = rates[row, j[row]]
            if r > value[i]:
                value[i] = r
                chosen[i].append(int(rest[row][j[row]]))
                still.append(i)
        active = still
    return chosen[int(np.argmax(value))]


def zf_sum_rate_estimate(estimates, users, mode="perfect", *, expected_error=None, dims=None,
                         power=1.0, noise=1.0, rate_fn=log2_rate):
    est = np.atleast_2d(np.asarray(estimates, dtype=complex))
    k = est.shape[0]
    qerr = np.zeros(k) if expected_error is None else np.asarray(expected_error, dtype=float)
    dims = np.full(k, est.shape[1]) if dims is None else np.asarray(dims)
    sel = np.asarray([list(users)])
    return float(_zf_sum_rate(est, qerr, dims, sel, power, noise, mode, rate_fn)[0])


def exhaustive_zf_selection(estimates, n_tx, **kw):
    """Best subset (size <= n_tx) by estimated ZF sum rate; small problems only."""
    k = np.atleast_2d(estimates).shape[0]
    best, best_set = -np.inf, ()
    for size in range(1, min(n_tx, k) + 1):
        for users in itertools.combinations(range(k), size):
            r = zf_sum_rate_estimate(estimates, users, **kw)
            if r > best:
                best, best_set = r, users
    return list(best_set), best


@dataclass(frozen=True)
class Pu2rcReport:
    matrix: np.ndarray  # preferred unitary matrix per user
    column: np.ndarray
    sinr: np.ndarray  # quantized SINR estimate


def pu2rc_sinr_levels(bits, lo_db=-10.0, step_db=5.0):
    return 10 ** ((lo_db + step_db * np.arange(2 ** bits)) / 10)


def pu2rc_reports(rows, unitary_set, power=1.0, noise=1.0, sinr_bits=None):
    """Each user's preferred (matrix, column) with its SINR under full-rank transmission.

    The SINR assumes all columns of the matrix are active with equal power;
    with ``sinr_bits`` it is floored onto a ``2**sinr_bits``-level dB grid.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=complex))
    n_tx = unitary_set.shape[-1]
    p = power / n_tx
    g = np.abs(np.einsum("kt,gtc->kgc", rows, unitary_set)) ** 2 * p  # (k, G, n_tx)
    sinr = g / (noise + g.sum(axis=-1, keepdims=True) - g)
    flat = sinr.reshape(len(rows), -1)
    best = np.argmax(flat, axis=1)
    val = flat[np.arange(len(rows)), best]
    if sinr_bits is not None:
        levels = pu2rc_sinr_levels(sinr_bits)
        pos = np.searchsorted(levels, val, side="right") - 1
        val = np.where(pos >= 0, levels[np.maximum(pos, 0)], 0.0)
    return Pu2rcReport(best // n_tx, best % n_tx, val)


def pu2rc_transceiver(reports, unitary_set, cell_power=1.0, rate_fn=log2_rate):
    """Pick the unitary matrix whose best user per column maximizes the summed rate."""
    if len(reports.matrix) == 0:
        n_tx = unitary_set.shape[-1]
        return PrecodingDecision((), np.zeros((n_tx, 0), dtype=complex), np.zeros(0), "pu2rc")
    best_total, best_g, best_users = -np.inf, 0, []
    for g in range(unitary_set.shape[0]):
        users, total = [], 0.0
        for c in range(unitary_set.shape[-1]):
            mask = (reports.matrix == g) & (reports.column == c)
            if not mask.any():
                continue
            cand = np.flatnonzero(mask)
            u = int(cand[np.argmax(reports.sinr[cand])])
            users.append((c, u))
            total += float(rate_fn(reports.sinr[u]))
        if users and total > best_total:
            best_total, best_g, best_users = total, g, users
    cols = [c for c, _ in best_users]
    W = unitary_set[best_g][:, cols]
    s = len(cols)
    return PrecodingDecision(tuple(u for _, u in best_users), W, np.full(s, cell_power / s),
                             "pu2rc")
