"""Block-wise approximately independent ORBGRAND decoding.

The received sequence is cut into blocks of ``b`` symbols. Inside a block
the noise correlation is used exactly. Across blocks the posterior is
treated as a product, so the joint posterior of a sequence of candidate
blocks factorises into the hard-decision term and one penalty per swapped
block. Every alternative block is ranked by its penalty

    log p(t* | Y_i) - log p(t | Y_i) = q(t) - q(t*),
    q(t) = (Y_i - t)^H C_i^{-1} (Y_i - t),

and the ORBGRAND pattern generator then picks which ranked substitutions to
combine. A pattern that swaps the same block twice is dropped before any
codebook query.

Only symbols among the ``gamma`` constellation points nearest each received
sample are considered. Tuples outside that product set get probability 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import NumericalError, ParameterError
from .modem import Constellation, neighbor_table
from .orbgrand import iter_patterns, substitution_search

COND_CAP = 1e12


@dataclass(frozen=True)
class BlockPartition:
    n_s: int
    b: int

    @property
    def count(self) -> int:
        return self.n_s // self.b

    @property
    def blocks(self) -> list[range]:
        return [range(i * self.b, (i + 1) * self.b) for i in range(self.count)]


def partition(n_s: int, b: int) -> BlockPartition:
    if b < 1 or n_s < 1 or n_s % b:
        raise ParameterError(f"block size {b} must divide {n_s} symbols")
    return BlockPartition(n_s, b)


@dataclass(frozen=True)
class SubstitutionCandidate:
    block_index: int
    symbols: tuple
    penalty: float


@dataclass
class DecodeOutcome:
    """Result of one decode.

    ``codeword`` is ``None`` on FAILURE, which happens once the pattern
    budget is spent or every pattern has been tried.
    """

    codeword: np.ndarray | None
    queries: int
    patterns_generated: int
    conflicts_discarded: int

    @property
    def failure(self) -> bool:
        return self.codeword is None


def block_covariances(psi, part: BlockPartition) -> np.ndarray:
    """Accept a full ``n_s x n_s`` matrix or a ``(count, b, b)`` stack."""
    psi = np.asarray(psi)
    b, nb = part.b, part.count
    if psi.ndim == 3:
        if psi.shape != (nb, b, b):
            raise ParameterError(f"expected ({nb}, {b}, {b}) block covariances, got {psi.shape}")
        return psi
    if psi.shape != (part.n_s, part.n_s):
        raise ParameterError(f"expected a {part.n_s}x{part.n_s} covariance, got {psi.shape}")
    idx = np.arange(nb)[:, None] * b + np.arange(b)[None, :]
    return psi[idx[:, :, None], idx[:, None, :]]


def whitening(covs: np.ndarray, cond_cap: float = COND_CAP) -> np.ndarray:
    """Inverse Cholesky factors ``L^{-1}`` with ``C = L L^H``, one per block."""
    covs = np.asarray(covs, dtype=complex)
    cond = np.linalg.cond(covs)
    if np.any(~np.isfinite(cond)) or np.any(cond > cond_cap):
        raise NumericalError(f"block covariance condition number {np.max(cond):.3g} exceeds {cond_cap:.3g}")
    try:
        chol = np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"block covariance is not positive definite: {exc}") from exc
    return np.linalg.inv(chol)


@dataclass(frozen=True, eq=False)
class WhitenedBlocks:
    """Block covariances already reduced to inverse Cholesky factors.

    Lets a caller that reuses one set of statistics across many frames skip
    the per-decode factorisation. ``gain`` optionally holds one ``b x b``
    matrix per block mapping a candidate tuple to the mean it produces at
    the equaliser output. Without it the mean is the tuple itself.
    """

    linv: np.ndarray
    gain: np.ndarray | None = None

    @classmethod
    def from_covariance(
        cls, psi, part: BlockPartition, cond_cap: float = COND_CAP, gain=None
    ) -> "WhitenedBlocks":
        if gain is not None:
            gain = np.asarray(gain, dtype=complex)
            if gain.shape != (part.count, part.b, part.b):
                raise ParameterError(f"expected ({part.count}, {part.b}, {part.b}) gains, got {gain.shape}")
        return cls(whitening(block_covariances(psi, part), cond_cap), gain)


def _quadratic_forms(y_blocks, tuples, linv):
    d = y_blocks[:, None, :] - tuples
    z = np.einsum("nij,ntj->nti", linv, d)
    return np.sum(z.real**2 + z.imag**2, axis=-1)


def block_posteriors(y_block, cov_block, candidate_blocks) -> np.ndarray:
    """Posterior of each candidate tuple under a uniform prior over the list."""
    y = np.asarray(y_block, dtype=complex)
    t = np.asarray(candidate_blocks, dtype=complex)
    if t.ndim != 2 or t.shape[1] != len(y) or len(t) == 0:
        raise ParameterError("candidate blocks must be a non-empty (count, b) array")
    linv = whitening(np.asarray(cov_block, dtype=complex)[None])
    q = _quadratic_forms(y[None], t[None], linv)[0]
    w = np.exp(-(q - q.min()))
    return w / w.sum()


@dataclass
class CandidateSet:
    """Ranked substitutions in array form (rank ``r`` is row ``r - 1``)."""

    block: np.ndarray  # (K,)
    symbol_index: np.ndarray  # (K, b) constellation indices
    penalty: np.ndarray  # (K,)
    hard_index: np.ndarray  # (count, b) block-wise hard decisions

    def __len__(self):
        return len(self.block)


class _TupleGrid:
    _cache: dict = {}

    @classmethod
    def get(cls, gamma: int, b: int) -> np.ndarray:
        key = (gamma, b)
        if key not in cls._cache:
            cls._cache[key] = np.indices((gamma,) * b).reshape(b, -1).T
        return cls._cache[key]


def candidate_arrays(y, part: BlockPartition, constellation: Constellation, gamma, covs) -> CandidateSet:
    y = np.asarray(y, dtype=complex)
    if len(y) != part.n_s:
        raise ParameterError(f"received {len(y)} symbols, partition expects {part.n_s}")
    gamma = constellation.size if gamma is None else int(gamma)
    if gamma < 1:
        raise ParameterError("gamma must be at least 1")
    b, nb = part.b, part.count
    gain = None
    if isinstance(covs, WhitenedBlocks):
        linv, gain = covs.linv, covs.gain
    else:
        linv = whitening(block_covariances(covs, part))
    nbr = neighbor_table(constellation, y, gamma).reshape(nb, b, gamma)
    grid = _TupleGrid.get(gamma, b)
    sym = nbr[:, np.arange(b)[None, :], grid]  # (nb, T, b)
    tuples = constellation.points[sym]
    if gain is not None:
        tuples = np.einsum("nij,ntj->nti", gain, tuples)
    q = _quadratic_forms(y.reshape(nb, b), tuples, linv)
    hard = np.argmin(q, axis=1)
    rows = np.arange(nb)
    penalty = q - q[rows, hard][:, None]
    keep = np.ones_like(q, dtype=bool)
    keep[rows, hard] = False
    T = q.shape[1]
    block = np.broadcast_to(rows[:, None], (nb, T))[keep]
    pen = penalty[keep]
    order = np.argsort(pen, kind="stable")
    return CandidateSet(
        block=block[order],
        symbol_index=sym[keep][order],
        penalty=pen[order],
        hard_index=sym[rows, hard],
    )


def enumerate_candidates(y, part, constellation, gamma, cov_provider) -> list[SubstitutionCandidate]:
    cs = candidate_arrays(y, part, constellation, gamma, cov_provider)
    pts = constellation.points
    return [
        SubstitutionCandidate(int(bk), tuple(complex(v) for v in pts[s]), float(p))
        for bk, s, p in zip(cs.block, cs.symbol_index, cs.penalty)
    ]


def decode(y, code, constellation: Constellation, part: BlockPartition, psi, tau: int, gamma=None) -> DecodeOutcome:
    """Query hard decisions first, then ranked block substitutions.

    ``tau`` caps the number of patterns drawn, discarded ones included.
    ``code`` may be any object with ``is_member``. Linear codes take a
    vectorised syndrome path.
    """
    m = constellation.bits_per_symbol
    if part.n_s * m != code.n:
        raise ParameterError(f"{part.n_s} symbols of {m} bits do not cover n={code.n}")
    cs = candidate_arrays(y, part, constellation, gamma, psi)
    base = constellation.labels[cs.hard_index].reshape(-1)
    cand_bits = constellation.labels[cs.symbol_index].reshape(len(cs), part.b * m)
    res = substitution_search(code, base, part.b * m, cs.block, cand_bits, tau)
    return DecodeOutcome(res.word, res.queries, res.patterns, res.conflicts)


def query_sequence(y, constellation, part, psi, gamma=None, limit: int | None = None) -> Iterator:
    """Yield ``(ranks, symbols)`` per pattern; ``symbols`` is ``None`` if discarded."""
    cs = candidate_arrays(y, part, constellation, gamma, psi)
    pts = constellation.points
    base = pts[cs.hard_index].reshape(-1)
    b = part.b
    for count, ranks in enumerate(iter_patterns(len(cs))):
        if limit is not None and count >= limit:
            return
        blocks = [int(cs.block[r - 1]) for r in ranks]
        if len(set(blocks)) < len(blocks):
            yield ranks, None
            continue
        s = base.copy()
        for r, bk in zip(ranks, blocks):
            s[bk * b : (bk + 1) * b] = pts[cs.symbol_index[r - 1]]
        yield ranks, s


def interleaved_baseline_decode(y, code, constellation, sigma2: float, tau: int, gamma=None) -> DecodeOutcome:
    """Decoder view of an ideally interleaved channel: ``b = 1``, white noise."""
    part = partition(len(y), 1)
    covs = np.full((part.count, 1, 1), float(sigma2), dtype=complex)
    return decode(y, code, constellation, part, covs, tau, gamma)


class OrbgrandAIDecoder:
    """Reusable decoder holding the code, constellation and block settings."""

    def __init__(self, code, constellation: Constellation, b: int, tau: int, gamma=None):
        self.code = code
        self.constellation = constellation
        m = constellation.bits_per_symbol
        if code.n % (b * m):
            raise ParameterError(f"b*m_s = {b * m} does not divide n = {code.n}")
        self.part = partition(code.n // m, b)
        self.tau = int(tau)
        self.gamma = gamma

    def __call__(self, y, psi) -> DecodeOutcome:
        return decode(y, self.code, self.constellation, self.part, psi, self.tau, self.gamma)
