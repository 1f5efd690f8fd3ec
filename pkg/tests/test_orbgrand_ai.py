import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from grandai.channel import complex_normal, gm1_covariance
from grandai.codebook import encode, make_random_linear_code
from grandai.errors import NumericalError, ParameterError
from grandai.modem import bpsk, get_constellation, modulate, square_qam
from grandai.orbgrand_ai import (
    OrbgrandAIDecoder,
    WhitenedBlocks,
    block_covariances,
    block_posteriors,
    candidate_arrays,
    decode,
    enumerate_candidates,
    interleaved_baseline_decode,
    partition,
    query_sequence,
)

Y_EXAMPLE = np.array([1.5, 0.1, -0.2, 0.1], dtype=complex)
PSI_EXAMPLE = gm1_covariance(0.5, 1.0, 4)
PAIRS = [(1, 1), (1, -1), (-1, 1), (-1, -1)]


class MemberOf:
    def __init__(self, words, n):
        self.words = {tuple(int(b) for b in w) for w in words}
        self.n = n

    def is_member(self, word):
        return tuple(int(b) for b in word) in self.words


def symbols_to_bits(s):
    return (np.real(s) < 0).astype(np.uint8)


def test_partition():
    assert [list(r) for r in partition(4, 2).blocks] == [[0, 1], [2, 3]]
    assert len(partition(6, 1).blocks) == 6
    assert [list(r) for r in partition(5, 5).blocks] == [[0, 1, 2, 3, 4]]
    with pytest.raises(ParameterError):
        partition(6, 4)


@given(st.integers(1, 12), st.integers(1, 8))
def test_partition_covers(count, b):
    part = partition(count * b, b)
    flat = [i for r in part.blocks for i in r]
    assert flat == list(range(count * b))
    assert all(len(r) == b for r in part.blocks)


def test_worked_example_posteriors():
    psi = PSI_EXAMPLE[:2, :2]
    p1 = block_posteriors(Y_EXAMPLE[:2], psi, PAIRS)
    p2 = block_posteriors(Y_EXAMPLE[2:], psi, PAIRS)
    assert np.allclose(p1, [0.30, 0.68, 0.0, 0.0], atol=0.02)
    assert np.allclose(p2, [0.38, 0.00, 0.10, 0.50], atol=0.02)
    assert p1.sum() == pytest.approx(1) and p2.sum() == pytest.approx(1)


def test_posterior_symmetry_and_limit():
    assert np.allclose(block_posteriors([0, 0], np.eye(2), PAIRS), 0.25)
    p = block_posteriors([1, -1], 1e-3 * np.eye(2), PAIRS)
    assert p[1] == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        block_posteriors([0, 0], np.eye(2), np.zeros((0, 2)))
    with pytest.raises(NumericalError):
        block_posteriors([0, 0], np.ones((2, 2)), PAIRS)


def test_worked_example_ranking():
    cands = enumerate_candidates(Y_EXAMPLE, partition(4, 2), bpsk(), None, PSI_EXAMPLE)
    got = [(tuple(int(v.real) for v in c.symbols), c.block_index + 1) for c in cands]
    assert got == [((1, 1), 2), ((1, 1), 1), ((-1, 1), 2), ((1, -1), 2), ((-1, -1), 1), ((-1, 1), 1)]


def test_worked_example_query_order():
    seq = list(query_sequence(Y_EXAMPLE, bpsk(), partition(4, 2), PSI_EXAMPLE, limit=7))
    expected = [
        ((), [1, -1, -1, -1]),
        ((1,), [1, -1, 1, 1]),
        ((2,), [1, 1, -1, -1]),
        ((1, 2), [1, 1, 1, 1]),
        ((3,), [1, -1, -1, 1]),
        ((1, 3), None),
        ((4,), [1, -1, 1, -1]),
    ]
    for (ranks, syms), (eranks, esyms) in zip(seq, expected):
        assert ranks == eranks
        if esyms is None:
            assert syms is None
        else:
            assert np.allclose(syms, esyms)


def test_worked_example_budget_accounting():
    target = symbols_to_bits(np.array([1, -1, 1, -1]))
    out = decode(Y_EXAMPLE, MemberOf([target], 4), bpsk(), partition(4, 2), PSI_EXAMPLE, tau=100)
    assert np.array_equal(out.codeword, target)
    # seven patterns drawn, one discarded without a query
    assert (out.queries, out.patterns_generated, out.conflicts_discarded) == (6, 7, 1)
    fail = decode(Y_EXAMPLE, MemberOf([], 4), bpsk(), partition(4, 2), PSI_EXAMPLE, tau=7)
    assert fail.failure and (fail.queries, fail.patterns_generated) == (6, 7)


def test_omega_counts():
    y = modulate(bpsk(), np.zeros(128, dtype=np.uint8))
    cs = candidate_arrays(y, partition(128, 4), bpsk(), None, np.eye(128))
    assert len(cs) == (2**4 - 1) * 128 // 4 == 480
    const = square_qam(256)
    rng = np.random.default_rng(0)
    y = const.points[rng.integers(0, 256, 16)] + 0.02 * complex_normal(rng, 16)
    cs = candidate_arrays(y, partition(16, 2), const, 4, np.eye(16))
    assert len(cs) == 120


@given(st.integers(0, 10_000), st.sampled_from([1, 2, 4]), st.sampled_from(["bpsk", "qam16"]))
def test_candidate_invariants(seed, b, name):
    r = np.random.default_rng(seed)
    const = get_constellation(name)
    n_s = 8
    y = const.points[r.integers(0, const.size, n_s)] + 0.5 * complex_normal(r, n_s)
    gamma = 3 if name == "qam16" else None
    cs = candidate_arrays(y, partition(n_s, b), const, gamma, gm1_covariance(0.6, 0.5, n_s))
    assert np.all(cs.penalty >= 0)
    assert np.all(np.diff(cs.penalty) >= 0)
    for blk, sym in zip(cs.block, cs.symbol_index):
        assert not np.array_equal(sym, cs.hard_index[blk])


def test_eq3_factorisation(rng):
    """With block-diagonal noise the joint posterior is the product of block posteriors."""
    n_s, b = 4, 2
    covs = np.stack([gm1_covariance(0.5, 0.8, 2), gm1_covariance(0.3, 1.2, 2)])
    full = np.zeros((4, 4))
    full[:2, :2], full[2:, 2:] = covs[0], covs[1]
    y = complex_normal(rng, n_s) + np.array([1, -1, 1, 1])
    seqs = np.array(list(itertools.product((1.0, -1.0), repeat=n_s)))
    inv = np.linalg.inv(full)
    q = np.array([np.real((y - s).conj() @ inv @ (y - s)) for s in seqs])
    joint = np.exp(-(q - q.min()))
    joint /= joint.sum()
    p1 = block_posteriors(y[:2], covs[0], PAIRS)
    p2 = block_posteriors(y[2:], covs[1], PAIRS)
    for s, pj in zip(seqs, joint):
        i1 = PAIRS.index(tuple(s[:2]))
        i2 = PAIRS.index(tuple(s[2:]))
        assert pj == pytest.approx(p1[i1] * p2[i2], rel=1e-9)
    # the penalty of a two-block swap is the sum of the single-block penalties
    cs = candidate_arrays(y, partition(n_s, b), bpsk(), None, covs)
    hard = np.concatenate([bpsk().points[h] for h in cs.hard_index])
    q_hard = np.real((y - hard).conj() @ inv @ (y - hard))
    for r1, r2 in itertools.combinations(range(len(cs)), 2):
        if cs.block[r1] == cs.block[r2]:
            continue
        s = hard.copy()
        for r in (r1, r2):
            s[cs.block[r] * 2 : cs.block[r] * 2 + 2] = bpsk().points[cs.symbol_index[r]]
        q_s = np.real((y - s).conj() @ inv @ (y - s))
        assert q_s - q_hard == pytest.approx(cs.penalty[r1] + cs.penalty[r2], abs=1e-9)


@given(st.integers(0, 10_000))
def test_conflict_rule_audit(seed):
    r = np.random.default_rng(seed)
    n_s, b = 6, 2
    y = (1 - 2 * r.integers(0, 2, n_s)) + complex_normal(r, n_s)
    seq = list(query_sequence(y, bpsk(), partition(n_s, b), gm1_covariance(0.5, 1.0, n_s), limit=300))
    cs = candidate_arrays(y, partition(n_s, b), bpsk(), None, gm1_covariance(0.5, 1.0, n_s))
    discarded = 0
    for ranks, syms in seq:
        blocks = [cs.block[k - 1] for k in ranks]
        if syms is None:
            discarded += 1
            assert len(set(blocks)) < len(blocks)
        else:
            assert len(set(blocks)) == len(blocks)
    out = decode(y, MemberOf([], n_s), bpsk(), partition(n_s, b), gm1_covariance(0.5, 1.0, n_s), tau=300)
    assert out.conflicts_discarded == discarded
    assert out.queries == len(seq) - discarded


@given(st.integers(0, 10_000), st.integers(1, 2000))
def test_budget_invariants(seed, tau):
    r = np.random.default_rng(seed)
    code = make_random_linear_code(24, 12, seed % 7)
    y = (1 - 2 * r.integers(0, 2, 24)) + 1.2 * complex_normal(r, 24)
    out = decode(y, code, bpsk(), partition(24, 2), gm1_covariance(0.5, 1.0, 24), tau)
    assert out.queries <= out.patterns_generated <= tau
    if out.failure:
        assert out.patterns_generated == tau
    else:
        assert code.is_member(out.codeword)


def test_noise_free_single_query(rng):
    code = make_random_linear_code(32, 20, 3)
    for name in ("bpsk", "qam16"):
        const = get_constellation(name)
        c = encode(code, rng.integers(0, 2, 20))
        y = modulate(const, c)
        dec = OrbgrandAIDecoder(code, const, b=2 if name == "bpsk" else 1, tau=10, gamma=4 if name == "qam16" else None)
        out = dec(y, np.eye(len(y)))
        assert out.queries == 1 and np.array_equal(out.codeword, c)
    with pytest.raises(ParameterError):
        OrbgrandAIDecoder(code, bpsk(), b=3, tau=10)


def test_interleaved_equals_diagonal_b1(rng):
    code = make_random_linear_code(32, 24, 5)
    for _ in range(20):
        y = (1 - 2 * rng.integers(0, 2, 32)) + 0.8 * complex_normal(rng, 32)
        a = interleaved_baseline_decode(y, code, bpsk(), 0.64, 5000)
        b = decode(y, code, bpsk(), partition(32, 1), 0.64 * np.eye(32), 5000)
        assert (a.queries, a.patterns_generated) == (b.queries, b.patterns_generated)
        assert (a.codeword is None and b.codeword is None) or np.array_equal(a.codeword, b.codeword)


def test_white_noise_blocking_neutral(rng):
    """On white noise, b=2 with the exact white statistics matches b=1 within the intervals."""
    from grandai.harness.sweep import wilson_ci

    code = make_random_linear_code(32, 24, 5)
    sigma2, frames = 0.6, 1500
    errs = {1: 0, 2: 0}
    for _ in range(frames):
        c = encode(code, rng.integers(0, 2, 24))
        y = modulate(bpsk(), c) + complex_normal(rng, 32, sigma2)
        for b in errs:
            out = decode(y, code, bpsk(), partition(32, b), sigma2 * np.eye(32), 20_000)
            errs[b] += out.failure or not np.array_equal(out.codeword, c)
    lo1, hi1 = wilson_ci(errs[1], frames)
    lo2, hi2 = wilson_ci(errs[2], frames)
    assert errs[1] > 20
    assert lo1 <= hi2 and lo2 <= hi1


def test_high_snr_no_errors(rng):
    code = make_random_linear_code(64, 52, 1)
    for _ in range(50):
        c = encode(code, rng.integers(0, 2, 52))
        y = modulate(bpsk(), c) + complex_normal(rng, 64, 1e-3)
        out = interleaved_baseline_decode(y, code, bpsk(), 1e-3, 1000)
        assert np.array_equal(out.codeword, c)


def test_whitened_blocks_reuse(rng):
    psi = gm1_covariance(0.7, 0.5, 8)
    part = partition(8, 2)
    pre = WhitenedBlocks.from_covariance(psi, part)
    y = complex_normal(rng, 8) + 1
    a = candidate_arrays(y, part, bpsk(), None, psi)
    b = candidate_arrays(y, part, bpsk(), None, pre)
    assert np.allclose(a.penalty, b.penalty)
    assert np.array_equal(block_covariances(psi, part)[1], psi[2:4, 2:4])
    with pytest.raises(ParameterError):
        WhitenedBlocks.from_covariance(psi, part, gain=np.ones((3, 2, 2)))
    with pytest.raises(ParameterError):
        block_covariances(np.eye(6), part)


def test_unit_gain_is_neutral(rng):
    psi = gm1_covariance(0.4, 0.5, 8)
    part = partition(8, 4)
    y = complex_normal(rng, 8)
    eye = np.broadcast_to(np.eye(4), (2, 4, 4))
    a = candidate_arrays(y, part, bpsk(), None, WhitenedBlocks.from_covariance(psi, part))
    b = candidate_arrays(y, part, bpsk(), None, WhitenedBlocks.from_covariance(psi, part, gain=eye))
    assert np.allclose(a.penalty, b.penalty)
