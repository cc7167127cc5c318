import numpy as np
import pytest

from convbounds.codec import GeneratorSpec, build_trellis, encode
from convbounds.simulator import (
    CODEWORD_BITS, INFO_BITS, ChannelConfig, SimulationError, bsc_corrupt, run_campaign,
    viterbi_decode,
)

from oracles import all_terminated_codewords


@pytest.fixture(scope="module")
def t1317():
    return build_trellis(GeneratorSpec.parse("(13,17)"))


def test_channel_config_domain():
    with pytest.raises(SimulationError):
        ChannelConfig(0.5)
    with pytest.raises(SimulationError):
        ChannelConfig(-0.01)
    with pytest.raises(SimulationError):
        ChannelConfig(0.1, seed=-1)


def test_bsc_identity_at_zero():
    bits = np.random.default_rng(0).integers(0, 2, 1000, dtype=np.uint8)
    assert np.array_equal(bsc_corrupt(bits, ChannelConfig(0.0, 3), (0,)), bits)


def test_bsc_flip_rate():
    N, p = 10**6, 0.1
    out = bsc_corrupt(np.zeros(N, dtype=np.uint8), ChannelConfig(p, 11), (7, 1))
    sigma = np.sqrt(N * p * (1 - p))
    assert abs(int(out.sum()) - N * p) <= 3 * sigma


def test_bsc_deterministic_per_stream():
    bits = np.zeros(5000, dtype=np.uint8)
    cfg = ChannelConfig(0.2, 99)
    a = bsc_corrupt(bits, cfg, (3, 1))
    assert np.array_equal(a, bsc_corrupt(bits, cfg, (3, 1)))
    assert not np.array_equal(a, bsc_corrupt(bits, cfg, (4, 1)))


@pytest.mark.parametrize("code", ["(13,17)", "(13,15)", "(117,155)", "(13,17,15)"])
def test_noiseless_roundtrip(code):
    t = build_trellis(GeneratorSpec.parse(code))
    rng = np.random.default_rng(1)
    for L in (1, 5, 50, 300):
        info = rng.integers(0, 2, L, dtype=np.uint8)
        assert np.array_equal(viterbi_decode(encode(info, t).bits, t, rng), info)


def test_all_zero_received(t1317):
    assert not viterbi_decode(np.zeros(2 * 23, dtype=np.uint8), t1317, 5).any()


def test_malformed_length(t1317):
    with pytest.raises(SimulationError):
        viterbi_decode(np.zeros(7, dtype=np.uint8), t1317)
    with pytest.raises(SimulationError):
        viterbi_decode(np.zeros(4, dtype=np.uint8), t1317)


@pytest.mark.parametrize("code, info_len", [("(13,17)", 10), ("(13,15)", 12), ("(7,5)", 8)])
def test_viterbi_is_maximum_likelihood(code, info_len):
    t = build_trellis(GeneratorSpec.parse(code))
    infos, words = all_terminated_codewords(t, info_len)
    rng = np.random.default_rng(2024)
    for trial in range(150):
        rx = rng.integers(0, 2, words.shape[1], dtype=np.uint8)
        if trial % 2:  # also near-codeword inputs
            rx = words[rng.integers(len(words))] ^ (rng.random(words.shape[1]) < 0.15)
        best = int((words ^ rx).sum(axis=1).min())
        decided = viterbi_decode(rx, t, rng)
        got = int((encode(decided, t).bits ^ rx).sum())
        assert got == best


def test_tie_fairness(t1317):
    info_len = 10
    infos, words = all_terminated_codewords(t1317, info_len)
    # weight-6 codeword whose branch ends inside the frame
    w6 = np.flatnonzero(words.sum(axis=1) == 6)
    c1 = words[w6[0]]
    ones = np.flatnonzero(c1)
    rx = np.zeros_like(c1)
    rx[ones[:3]] = 1
    dist = (words ^ rx).sum(axis=1)
    assert dist.min() == 3 and np.count_nonzero(dist == 3) == 2
    trials = 4000
    picks = sum(bool(viterbi_decode(rx, t1317, k).any()) for k in range(trials))
    sigma = np.sqrt(0.25 / trials)
    assert abs(picks / trials - 0.5) <= 3 * sigma


def test_campaign_noiseless():
    spec = GeneratorSpec.parse("(13,17)")
    for basis in (CODEWORD_BITS, INFO_BITS):
        r = run_campaign(spec, ChannelConfig(0.0, 1), 37, 120, basis)
        assert r.ber == 0.0 and r.fer == 0.0 and r.bit_errors == 0
        assert r.ci95 == (0.0, 0.0)


def test_campaign_counting():
    spec = GeneratorSpec.parse("(13,17)")
    r = run_campaign(spec, ChannelConfig(0.06, 4), 300, 200)
    assert r.bits_compared == 300 * 200 * 2
    assert r.info_len == 197
    assert r.bit_errors <= r.bits_compared
    assert r.ber == r.bit_errors / r.bits_compared
    assert r.fer >= r.ber and 0 <= r.fer <= 1
    assert r.ci95[0] <= r.ber <= r.ci95[1]
    ri = run_campaign(spec, ChannelConfig(0.06, 4), 300, 200, INFO_BITS)
    assert ri.bits_compared == 300 * 197
    # same frames, same channel: info-bit errors imply codeword errors in that frame
    assert ri.frame_errors <= r.frame_errors


def test_campaign_rejects_bad_arguments():
    spec = GeneratorSpec.parse("(13,17)")
    with pytest.raises(SimulationError):
        run_campaign(spec, ChannelConfig(0.1), 0)
    with pytest.raises(SimulationError):
        run_campaign(spec, ChannelConfig(0.1), 5, 3)
    with pytest.raises(SimulationError):
        run_campaign(spec, ChannelConfig(0.1), 5, ber_basis="symbols")


def test_campaign_independent_of_workers():
    spec = GeneratorSpec.parse("(13,15)")
    cfg = ChannelConfig(0.05, 1234)
    a = run_campaign(spec, cfg, 700, 300, workers=1)
    b = run_campaign(spec, cfg, 700, 300, workers=3)
    assert a == b
    assert a.to_json() == b.to_json()


def test_campaign_prefix_consistency():
    # frames are keyed by index, so a longer run extends a shorter one
    spec = GeneratorSpec.parse("(13,17)")
    cfg = ChannelConfig(0.05, 8)
    small = run_campaign(spec, cfg, 256, 100)
    big = run_campaign(spec, cfg, 512, 100)
    assert big.bit_errors >= small.bit_errors
