import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ltesim import mimo
from ltesim.errors import DegenerateChannelError, InvalidParameterError, SingularSetError


def cgauss(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


# ---- codebooks ----

def test_codebook_entries_unit_norm():
    cb = mimo.random_codebook(8, 8, np.random.default_rng(0))
    assert cb.entries.shape == (256, 8)
    assert np.allclose(np.linalg.norm(cb.entries, axis=1), 1.0, atol=1e-12)
    with pytest.raises(InvalidParameterError):
        mimo.Codebook(np.ones((3, 2)), 2)


def test_dft_set_is_unitary():
    mats = mimo.dft_unitary_set(4, 2)
    assert mats.shape == (4, 4, 4)
    for m in mats:
        assert np.allclose(m.conj().T @ m, np.eye(4), atol=1e-12)
    cb = mimo.clsm_codebooks(4, 4)
    for r, w in cb.items():
        assert w.shape == (16, 4, r)
        assert np.allclose(np.linalg.norm(w, axis=(1, 2)), 1.0)


# ---- single user ----

@pytest.mark.parametrize("n", [1, 2, 4])
def test_svd_identity(n):
    assert mimo.su_svd_transceiver(np.eye(n), 1.0) == pytest.approx(n * np.log2(1 + 1 / n))


def test_svd_rank_one():
    rng = np.random.default_rng(1)
    h = np.outer(cgauss(rng, 4), cgauss(rng, 4))
    s1 = np.linalg.svd(h, compute_uv=False)[0]
    assert mimo.su_svd_transceiver(h, 3.0) == pytest.approx(np.log2(1 + 3.0 * s1 ** 2))
    assert mimo.su_svd_transceiver(np.zeros((2, 2))) == 0.0


def test_svd_matches_power_grid():
    rng = np.random.default_rng(2)
    for _ in range(20):
        h = cgauss(rng, 2, 2)
        s = np.linalg.svd(h, compute_uv=False) ** 2
        p = np.linspace(0, 1, 100_001)
        grid = np.max(np.log2(1 + p * s[0]) + np.log2(1 + (1 - p) * s[1]))
        assert mimo.su_svd_transceiver(h) == pytest.approx(grid, abs=1e-3)
        assert mimo.su_svd_transceiver(h) >= grid - 1e-12


def test_waterfill_sums_to_budget():
    g = np.random.default_rng(3).exponential(1.0, (50, 4))
    p = mimo.waterfill(g, 2.0)
    assert np.allclose(p.sum(axis=1), 2.0)
    assert np.all(p >= 0)


def test_hpd_inverse_diagonal():
    rng = np.random.default_rng(4)
    a = cgauss(rng, 30, 4, 4)
    a = a @ np.conj(np.swapaxes(a, -1, -2)) + 0.1 * np.eye(4)
    ref = np.real(np.diagonal(np.linalg.inv(a), axis1=-2, axis2=-1))
    assert np.allclose(mimo.hpd_inv_diag(a), ref, rtol=1e-10)


def test_clsm_perfect_codebook_equals_svd():
    rng = np.random.default_rng(5)
    h = np.outer(cgauss(rng, 4), cgauss(rng, 4))
    v1 = np.linalg.svd(h)[2][0].conj()
    rank, idx, rate = mimo.clsm_transceiver(h, {1: v1[None, :, None]}, snr=2.0)
    assert (rank, idx) == (1, 0)
    assert rate == pytest.approx(mimo.su_svd_transceiver(h, 2.0), abs=1e-9)


def test_clsm_single_entry():
    h = cgauss(np.random.default_rng(6), 2, 2)
    w = np.array([[[1.0], [0.0]]])
    assert mimo.clsm_transceiver(h, {1: w})[:2] == (1, 0)


def test_clsm_never_beats_svd():
    rng = np.random.default_rng(7)
    cb = mimo.clsm_codebooks(4, 4)
    h = cgauss(rng, 200, 4, 4)
    _, _, rate = mimo.clsm_transceiver(h, cb, snr=10.0)
    svd = mimo.su_svd_transceiver(h, 10.0)
    assert np.all(rate <= svd + 1e-9)
    # batched and scalar calls agree
    r0 = mimo.clsm_transceiver(h[0], cb, snr=10.0)
    assert r0[2] == pytest.approx(rate[0])


# ---- feedback ----

def test_receive_combining():
    rng = np.random.default_rng(8)
    row = cgauss(rng, 1, 8)
    assert np.allclose(mimo.receive_combining(row), row[0])
    h = cgauss(rng, 4, 8)
    eff = mimo.receive_combining(h)
    u, s, vh = np.linalg.svd(h)
    assert np.linalg.norm(eff) == pytest.approx(s[0], rel=1e-9)
    assert np.allclose(eff, u[:, 0].conj() @ h)
    assert np.allclose(mimo.receive_combining(np.zeros((2, 3))), 0.0)


def test_quantize_csit():
    cb = mimo.random_codebook(4, 4, np.random.default_rng(9))
    idx, q = mimo.quantize_csit(3.0 * cb.entries[5], cb)
    assert idx == 5
    assert mimo.quantization_error(cb.entries[5], q) == pytest.approx(0.0, abs=1e-12)
    row = cgauss(np.random.default_rng(10), 4)
    idx, _ = mimo.quantize_csit(row, cb)
    scan = [abs(np.vdot(e, row / np.linalg.norm(row))) ** 2 for e in cb.entries]
    assert idx == int(np.argmax(scan))
    with pytest.raises(DegenerateChannelError):
        mimo.quantize_csit(np.zeros(4), cb)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2 * np.pi))
def test_quantization_phase_invariant(seed, theta):
    rng = np.random.default_rng(seed)
    cb = mimo.random_codebook(4, 3, rng)
    row = cgauss(rng, 4)
    rot = row * np.exp(1j * theta)
    i1, q1 = mimo.quantize_csit(row, cb)
    i2, q2 = mimo.quantize_csit(rot, cb)
    assert i1 == i2
    assert mimo.quantization_error(row, q1) == pytest.approx(mimo.quantization_error(rot, q2),
                                                             abs=1e-12)


def test_das_allocation_picks_least_pathloss():
    groups = mimo.das_antenna_groups(4, [2, 2])
    assert [g.tolist() for g in groups] == [[0, 1, 2, 3], [4, 5], [6, 7]]
    rng = np.random.default_rng(11)
    cbs = [mimo.random_codebook(len(g), 8, rng) for g in groups]
    row = cgauss(rng, 8)
    rep = mimo.das_feedback_allocation(row, groups, [110.0, 95.0, 120.0], cbs)
    assert rep.group == 1
    assert np.all(rep.direction[[0, 1, 2, 3, 6, 7]] == 0)
    assert rep.gain == pytest.approx(np.sum(np.abs(row[4:6]) ** 2))
    tie = mimo.das_feedback_allocation(row, groups, [100.0, 100.0, 100.0], cbs)
    assert tie.group == 0
    with pytest.raises(InvalidParameterError):
        mimo.das_feedback_allocation(row, [], [], [])


def test_small_group_quantizes_better():
    rng = np.random.default_rng(12)
    cb2 = mimo.random_codebook(2, 8, rng)
    cb8 = mimo.random_codebook(8, 8, rng)
    e2, e8 = [], []
    for _ in range(1000):
        h = cgauss(rng, 8)
        e2.append(mimo.quantization_error(h[:2], mimo.quantize_csit(h[:2], cb2)[1]))
        e8.append(mimo.quantization_error(h, mimo.quantize_csit(h, cb8)[1]))
    assert np.mean(e2) < np.mean(e8)


# ---- multi user ----

def test_zf_identity_and_orthogonal():
    d = mimo.zf_precoder(np.eye(4), cell_power=2.0)
    assert np.allclose(d.precoder, np.eye(4))
    assert d.total_power == pytest.approx(2.0)
    rows = np.array([[1.0, 1.0, 0, 0], [0, 0, 1.0, -1.0]])
    d = mimo.zf_precoder(rows)
    assert np.allclose(d.precoder.T, rows / np.sqrt(2))
    with pytest.raises(SingularSetError):
        mimo.zf_precoder(np.array([[1.0, 0], [2.0, 0]]))
    with pytest.raises(SingularSetError):
        mimo.zf_precoder(np.ones((3, 2)))


def test_zf_nulls_interference():
    rng = np.random.default_rng(13)
    worst = 0.0
    for _ in range(200):
        h = cgauss(rng, 4, 8)
        d = mimo.zf_precoder(h, cell_power=1.0)
        assert d.total_power == pytest.approx(1.0, abs=1e-9)
        cross = np.abs(h @ d.precoder)
        np.fill_diagonal(cross, 0.0)
        rel = cross / np.outer(np.linalg.norm(h, axis=1), np.linalg.norm(d.precoder, axis=0))
        worst = max(worst, rel.max())
    assert worst <= 1e-9


def test_mu_sinr_cases():
    rng = np.random.default_rng(14)
    h = cgauss(rng, 3, 4)
    d = mimo.zf_precoder(h)
    s = mimo.mu_sinr(d, h)
    ref = d.power * np.abs(np.sum(h * d.precoder.T, axis=1)) ** 2
    assert np.allclose(s, ref, rtol=1e-9)
    one = mimo.zf_precoder(h[:1])
    assert mimo.mu_sinr(one, h[:1])[0] == pytest.approx(np.linalg.norm(h[0]) ** 2)
    cb = mimo.random_codebook(4, 4, rng)
    q = np.array([mimo.quantize_csit(r, cb)[1] for r in h])
    dq = mimo.zf_precoder(q)
    assert np.sum(np.log2(1 + mimo.mu_sinr(dq, h))) < np.sum(np.log2(1 + s))


def test_zf_selection_simple_cases():
    assert mimo.zf_user_selection(np.array([[1.0, 0.5]]), 2) == [0]
    strong = 10 * np.eye(4)
    assert sorted(mimo.zf_user_selection(strong, 4)) == [0, 1, 2, 3]
    rows = cgauss(np.random.default_rng(15), 6, 4)
    assert mimo.zf_user_selection(rows, 4) == mimo.zf_user_selection(rows.copy(), 4)
    with pytest.raises(InvalidParameterError):
        mimo.zf_user_selection(rows, 4, mode="bogus")


def test_greedy_close_to_exhaustive():
    rng = np.random.default_rng(16)
    ratios = []
    for _ in range(100):
        rows = cgauss(rng, 6, 4) * 3.0
        greedy = mimo.zf_user_selection(rows, 4)
        g = mimo.zf_sum_rate_estimate(rows, greedy)
        _, best = mimo.exhaustive_zf_selection(rows, 4)
        ratios.append(g / best)
    assert min(ratios) >= 0.9


def test_pu2rc_single_user_and_aligned():
    U = mimo.dft_unitary_set(4, 2)
    row = 5 * U[2][:, 1].conj()
    rep = mimo.pu2rc_reports(row[None], U)
    d = mimo.pu2rc_transceiver(rep, U)
    assert d.users == (0,)
    assert np.allclose(d.precoder[:, 0], U[2][:, 1])
    rows = 5 * U[1].conj().T
    rep = mimo.pu2rc_reports(rows, U)
    d = mimo.pu2rc_transceiver(rep, U)
    assert sorted(d.users) == [0, 1, 2, 3]
    assert d.total_power == pytest.approx(1.0)
    g = np.abs(rows[list(d.users)] @ d.precoder) ** 2
    assert np.allclose(g - np.diag(np.diag(g)), 0.0, atol=1e-20)
    empty = mimo.pu2rc_transceiver(mimo.Pu2rcReport(np.zeros(0, int), np.zeros(0, int),
                                                     np.zeros(0)), U)
    assert empty.users == ()


def test_pu2rc_matches_linear_scan():
    rng = np.random.default_rng(17)
    U = mimo.dft_unitary_set(4, 2)
    for _ in range(50):
        rep = mimo.pu2rc_reports(cgauss(rng, 8, 4) * 2, U)
        d = mimo.pu2rc_transceiver(rep, U)
        totals = []
        for g in range(len(U)):
            t = 0.0
            for c in range(4):
                m = (rep.matrix == g) & (rep.column == c)
                if m.any():
                    t += np.log2(1 + rep.sinr[m].max())
            totals.append(t)
        chosen = sum(np.log2(1 + rep.sinr[u]) for u in d.users)
        assert chosen == pytest.approx(max(totals))


def test_pu2rc_below_zf_perfect():
    rng = np.random.default_rng(18)
    U = mimo.dft_unitary_set(4, 2)
    for _ in range(100):
        rows = cgauss(rng, 6, 4) * np.sqrt(10.0)
        d = mimo.pu2rc_transceiver(mimo.pu2rc_reports(rows, U), U)
        pu = np.sum(np.log2(1 + mimo.mu_sinr(d, rows[list(d.users)])))
        _, zf = mimo.exhaustive_zf_selection(rows, 4)
        assert pu <= zf + 1e-9


def test_pu2rc_sinr_quantization_floors():
    U = mimo.dft_unitary_set(4, 2)
    rows = cgauss(np.random.default_rng(19), 5, 4)
    raw = mimo.pu2rc_reports(rows, U)
    q = mimo.pu2rc_reports(rows, U, sinr_bits=3)
    assert np.all(q.sinr <= raw.sinr)
    assert set(np.round(q.sinr, 12)) <= set(np.round(np.r_[0.0, mimo.pu2rc_sinr_levels(3)], 12))
