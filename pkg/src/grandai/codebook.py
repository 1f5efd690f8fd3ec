"""Binary linear block codes and the syndrome membership test.

Every code here is kept in systematic form: the generator is ``[I_k | P]``
and the parity-check matrix is ``[P^T | I_{n-k}]``. A systematic generator
always has rank ``k``, so no rank check is needed after sampling ``P``.

CRC polynomials are given in Koopman notation. The integer's set bits are
the coefficients of ``x^d ... x^1`` with the implicit ``+1`` term dropped, so
the full polynomial is ``(koopman << 1) | 1`` and its degree is
``koopman.bit_length()``. For example ``0xb41`` expands to ``0x1683``, that is
``x^12 + x^10 + x^9 + x^7 + x + 1``. Message bits are read most significant
first: bit 0 of the message multiplies the highest power of ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class LinearCode:
    """A binary ``[n, k]`` code in systematic form."""

    n: int
    k: int
    generator: np.ndarray
    parity_check: np.ndarray
    name: str = ""
    # syndrome contribution of each codeword position, packed into an int
    syndrome_columns: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.asarray(self.generator, dtype=np.uint8)
        h = np.asarray(self.parity_check, dtype=np.uint8)
        if g.shape != (self.k, self.n) or h.shape != (self.n - self.k, self.n):
            raise ParameterError(
                f"matrix shapes {g.shape}, {h.shape} do not match [{self.n},{self.k}]"
            )
        g.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "generator", g)
        object.__setattr__(self, "parity_check", h)
        object.__setattr__(self, "syndrome_columns", _pack_columns(h))

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def redundancy(self) -> int:
        return self.n - self.k

    def syndrome(self, word) -> int:
        """Syndrome of ``word`` packed into an integer (0 for codewords)."""
        w = _as_bits(word, self.n)
        return int(np.bitwise_xor.reduce(self.syndrome_columns[w.astype(bool)], initial=0))

    def is_member(self, word) -> bool:
        return is_member(self, word)

    def encode(self, info) -> np.ndarray:
        return encode(self, info)


def _pack_columns(h: np.ndarray) -> np.ndarray:
    r, n = h.shape
    if r > 63:
        # packed syndromes are used as uint64 lanes by the decoders
        raise ParameterError(f"redundancy {r} exceeds 63 bits")
    weights = np.left_shift(np.uint64(1), np.arange(r, dtype=np.uint64))
    return (h.astype(np.uint64) * weights[:, None]).sum(axis=0, dtype=np.uint64)


def _as_bits(word, n: int) -> np.ndarray:
    w = np.asarray(word)
    if w.ndim != 1 or w.shape[0] != n:
        raise ParameterError(f"expected a length-{n} bit vector, got shape {w.shape}")
    if np.any((w != 0) & (w != 1)):
        raise ParameterError("bit vectors may only contain 0 and 1")
    return w.astype(np.uint8)


def _systematic(p: np.ndarray, name: str) -> LinearCode:
    k, r = p.shape
    n = k + r
    g = np.concatenate([np.eye(k, dtype=np.uint8), p], axis=1)
    h = np.concatenate([p.T, np.eye(r, dtype=np.uint8)], axis=1)
    return LinearCode(n=n, k=k, generator=g, parity_check=h, name=name)


def make_random_linear_code(n: int, k: int, seed: int) -> LinearCode:
    """Random linear code with ``P`` drawn uniformly over GF(2).

    The bits come from a Philox counter-based generator keyed by ``seed``,
    so ``(n, k, seed)`` identifies the code on any platform.
    """
    if not (0 < k < n):
        raise ParameterError(f"need 0 < k < n, got n={n}, k={k}")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    p = rng.integers(0, 2, size=(k, n - k), dtype=np.uint8)
    return _systematic(p, f"rlc[{n},{k}]#{seed}")


def crc_remainder(message, poly_full: int) -> np.ndarray:
    """Bitwise long division of ``message * x^d`` by the full polynomial.

    ``poly_full`` includes both the leading and the ``+1`` terms. Returns the
    ``d`` remainder bits, most significant first.
    """
    d = int(poly_full).bit_length() - 1
    reg = 0
    for bit in list(np.asarray(message, dtype=np.uint8)) + [0] * d:
        reg = (reg << 1) | int(bit)
        if reg >> d:
            reg ^= poly_full
    return np.array([(reg >> (d - 1 - i)) & 1 for i in range(d)], dtype=np.uint8)


def make_crc_code(k: int, poly_koopman: int) -> LinearCode:
    """Systematic CRC code ``[k + d, k]`` for a Koopman-notation polynomial."""
    poly_koopman = int(poly_koopman)
    if poly_koopman <= 0:
        raise ParameterError("CRC polynomial must be positive")
    if k < 1:
        raise ParameterError(f"k must be positive, got {k}")
    d = poly_koopman.bit_length()
    full = (poly_koopman << 1) | 1
    # parity of unit message e_i is x^(d + k-1-i) mod g(x); build it by shifting
    p = np.zeros((k, d), dtype=np.uint8)
    reg = 1  # x^0
    for _ in range(d):
        reg = _mulx(reg, full, d)
    for row in range(k - 1, -1, -1):
        p[row] = [(reg >> (d - 1 - i)) & 1 for i in range(d)]
        reg = _mulx(reg, full, d)
    return _systematic(p, f"crc[{k + d},{k}]/{poly_koopman:#x}")


def _mulx(reg: int, full: int, d: int) -> int:
    reg <<= 1
    if reg >> d:
        reg ^= full
    return reg


def encode(code: LinearCode, info) -> np.ndarray:
    """``info · G`` over GF(2); the first ``k`` bits reproduce ``info``."""
    m = _as_bits(info, code.k)
    return (m.astype(np.int64) @ code.generator % 2).astype(np.uint8)


def is_member(code: LinearCode, word) -> bool:
    """True iff ``H · word^T = 0`` over GF(2)."""
    return code.syndrome(word) == 0


def code_from_spec(spec: dict) -> LinearCode:
    """Build a code from a ``{type: rlc|crc, ...}`` mapping."""
    kind = spec.get("type")
    if kind == "rlc":
        return make_random_linear_code(int(spec["n"]), int(spec["k"]), int(spec.get("seed", 0)))
    if kind == "crc":
        poly = spec["poly"]
        poly = int(poly, 0) if isinstance(poly, str) else int(poly)
        code = make_crc_code(int(spec["k"]), poly)
        if "n" in spec and int(spec["n"]) != code.n:
            raise ParameterError(f"polynomial {poly:#x} gives n={code.n}, not {spec['n']}")
        return code
    raise ParameterError(f"unknown code type {kind!r}")
