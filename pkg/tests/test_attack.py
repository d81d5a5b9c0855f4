"""Key-recovery distinguisher: prediction, correlation, ranking."""

import numpy as np
import pytest

from coalsim import aes, campaign as cp, memsim
from coalsim.attack import (
    AttackConfig,
    StreamingAttack,
    attack_byte,
    attack_full,
    min_samples_to_rank1,
    pearson,
    predict_count,
    predicted_counts_all_guesses,
)
from coalsim.coalescer import count_lines
from coalsim.randomness import SampleRng

KS = aes.expand_key(bytes.fromhex("2b7e151628aed2a6abf7158809cf4f3c"))
K10 = bytes(KS.round_keys[10])


def collect_baseline(samples, seed=21, sigma=None):
    timing = memsim.TimingParams() if sigma is None else memsim.TimingParams(sigma_eps=sigma)
    cfg = cp.CampaignConfig(
        seed=seed, samples=samples, key_hex=KS.master.hex(), timing=timing
    )
    return cp.collect(cfg).samples, cfg


def test_predict_count_degenerate_identical_ciphertexts():
    pts = np.tile(np.arange(16, dtype=np.uint8), (32, 1))
    sample = memsim.simulate_kernel(pts, KS, rng=SampleRng(0, 0))
    config = AttackConfig()
    for guess in (0, 17, 255):
        assert predict_count(sample, 5, guess, config) == 1


def test_predict_count_true_guess_matches_actual_lines():
    rng = np.random.default_rng(2)
    pts = rng.integers(0, 256, size=(32, 16), dtype=np.uint8)
    sample = memsim.simulate_kernel(pts, KS, rng=SampleRng(0, 0))
    config = AttackConfig()
    _, trace = aes.encrypt_batch(pts, KS)
    for j in range(16):
        actual = count_lines(trace[:, 144 + j], 16)
        assert predict_count(sample, j, K10[j], config) == actual


def test_predict_count_constructed_three_lines():
    # choose plaintexts whose final-round indices at byte 0 land on lines
    # {0, 1, 2}: indices 0, 16, 32
    rng = np.random.default_rng(3)
    wanted = [0, 16, 32]
    pts = []
    for i in range(32):
        target = wanted[i % 3]
        while True:
            pt = rng.integers(0, 256, 16, dtype=np.uint8)
            _, trace = aes.encrypt_block(bytes(pt), KS)
            idx = trace.rounds[9][0][1]
            # adjust by searching; indices are uniform so this terminates
            if idx == target:
                pts.append(pt)
                break
    sample = memsim.simulate_kernel(np.stack(pts), KS, rng=SampleRng(0, 0))
    assert predict_count(sample, 0, K10[0], AttackConfig()) == 3


def test_predicted_counts_matrix_matches_scalar():
    rng = np.random.default_rng(4)
    pts = rng.integers(0, 256, size=(6, 64, 16), dtype=np.uint8)
    times, cts, _ = memsim.simulate_batch(pts, KS, seed=1)
    counts = predicted_counts_all_guesses(cts[:, :, 3], 16, 2)
    config = AttackConfig()
    for i in range(6):
        sample = memsim.TimingSample(pts[i], cts[i], float(times[i]))
        for guess in (0, 99, 255):
            assert counts[guess, i] == predict_count(sample, 3, guess, config)


def test_predict_count_xor_equivariance():
    rng = np.random.default_rng(5)
    pts = rng.integers(0, 256, size=(8, 32, 16), dtype=np.uint8)
    _, cts, _ = memsim.simulate_batch(pts, KS, seed=1)
    col = cts[:, :, 7]
    counts = predicted_counts_all_guesses(col, 16, 1)
    for delta in (1, 0x3C, 0xFF):
        shifted = predicted_counts_all_guesses(col ^ np.uint8(delta), 16, 1)
        for g in range(0, 256, 37):
            assert np.array_equal(counts[g], shifted[g ^ delta])


def test_pearson_basics():
    assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.9819805060619659, abs=1e-12)
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])


def test_pearson_affine_invariance():
    rng = np.random.default_rng(6)
    x = rng.normal(size=200)
    y = rng.normal(size=200)
    base = pearson(x, y)
    assert pearson(3.5 * x + 11.0, y) == pytest.approx(base, abs=1e-12)
    assert pearson(x, 0.25 * y - 4.0) == pytest.approx(base, abs=1e-12)


def test_attack_byte_recovers_byte_five():
    samples, _ = collect_baseline(8000)
    rep = attack_byte(samples, 5, AttackConfig(), true_byte=K10[5])
    assert rep.best_guess == K10[5]
    assert rep.rank_of_true_key == 1
    assert rep.rho_peak > rep.rho_ave


def test_attack_byte_deterministic():
    samples, _ = collect_baseline(2000)
    r1 = attack_byte(samples, 5, AttackConfig())
    r2 = attack_byte(samples, 5, AttackConfig())
    assert np.array_equal(r1.correlations, r2.correlations)
    assert r1.best_guess == r2.best_guess


def test_attack_byte_pure_noise_rank_is_unstable():
    # overwhelm the signal: the true byte should not rank first reliably
    samples, _ = collect_baseline(1500, seed=77, sigma=1e9)
    ranks = []
    for byte_pos in range(8):
        rep = attack_byte(samples, byte_pos, AttackConfig(), true_byte=K10[byte_pos])
        ranks.append(rep.rank_of_true_key)
    assert max(ranks) > 8  # rank-1 everywhere would be a miracle under noise
    assert np.mean(ranks) > 16


def test_attack_full_success_and_inversion():
    samples, _ = collect_baseline(9000)
    report = attack_full(samples, AttackConfig(), truth=K10)
    assert report.success is True
    assert report.recovered_round10_key == K10
    assert report.recovered_master_key == KS.master


def test_attack_full_under_sampled_fails():
    samples, _ = collect_baseline(100, seed=3)
    report = attack_full(samples.prefix(100), AttackConfig(), truth=K10)
    assert report.success is False


def test_attack_full_without_truth_still_recovers():
    samples, _ = collect_baseline(9000)
    report = attack_full(samples, AttackConfig())
    assert report.success is None
    assert all(r.rank_of_true_key is None for r in report.reports)
    assert report.recovered_master_key == KS.master


def test_margin_grows_with_sample_count():
    samples, _ = collect_baseline(16000)
    margins = []
    for n in (2000, 6000, 16000):
        rep = attack_byte(samples.prefix(n), 5, AttackConfig(), true_byte=K10[5])
        wrong = np.abs(rep.correlations).copy()
        wrong[K10[5]] = -1
        margins.append(rep.rho_peak - wrong.max())
    assert margins[0] < margins[-1]
    assert margins[1] < margins[-1]


def test_min_samples_to_rank1_finds_and_saturates():
    samples, _ = collect_baseline(9000)
    found = min_samples_to_rank1(samples, 5, AttackConfig(), step=500, true_byte=K10[5])
    assert found is not None and found <= 9000
    noise, _ = collect_baseline(3000, seed=9, sigma=1e9)
    assert (
        min_samples_to_rank1(noise, 5, AttackConfig(), step=500, true_byte=K10[5]) is None
    )


def test_streaming_attack_matches_direct():
    samples, cfg = collect_baseline(4000)
    config = AttackConfig()
    stream = StreamingAttack(config, n_warps=1)
    for lo in range(0, 4000, 1000):
        stream.update(samples.times[lo : lo + 1000], samples.ciphertexts[lo : lo + 1000])
    rs = stream.correlations()
    for byte_pos in (0, 5, 15):
        direct = attack_byte(samples, byte_pos, AttackConfig())
        assert np.allclose(rs[byte_pos], direct.correlations, atol=1e-9)
    with pytest.raises(ValueError):
        StreamingAttack(AttackConfig(target_bytes=(0, 5)), n_warps=1)


def test_informed_attacker_beats_static_on_random_widths():
    from coalsim.coalescer import FixedRandom

    cfg = cp.CampaignConfig(seed=70, samples=12000, policy=FixedRandom())
    truth = bytes(cfg.key_schedule().round_keys[10])
    data = cp.collect(cfg)
    assert data.samples.elements_per_txn_per_sample is not None
    static = attack_byte(data.samples, 5, AttackConfig(), true_byte=truth[5])
    informed = attack_byte(data.samples, 5, AttackConfig(informed=True), true_byte=truth[5])
    assert informed.rho_peak > static.rho_peak


def test_attack_config_validation():
    with pytest.raises(ValueError):
        AttackConfig(assumed_elements_per_txn=3)
    with pytest.raises(ValueError):
        AttackConfig(num_samples=5)
    with pytest.raises(ValueError):
        AttackConfig(target_bytes=(16,))
