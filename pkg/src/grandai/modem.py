"""BPSK and Gray-labelled square QAM.

Point ``i`` of a constellation carries the label whose integer value is
``i`` (most significant bit first), so modulation is an index lookup.
For square QAM the first half of the label selects the in-phase level and
the second half the quadrature level, each through a reflected Gray code,
which makes grid neighbours differ in exactly one bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class Constellation:
    name: str
    points: np.ndarray  # complex, unit average energy
    labels: np.ndarray  # (M, bits_per_symbol) uint8

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]


def _label_table(m: int) -> np.ndarray:
    idx = np.arange(2**m)
    return ((idx[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)


def bpsk() -> Constellation:
    """Bit 0 maps to +1 and bit 1 to -1."""
    return Constellation("bpsk", np.array([1.0 + 0j, -1.0 + 0j]), _label_table(1))


def _gray_to_index(g: np.ndarray) -> np.ndarray:
    out = g.copy()
    shift = g >> 1
    while np.any(shift):
        out ^= shift
        shift >>= 1
    return out


def square_qam(order: int) -> Constellation:
    m = int(np.log2(order))
    if 2**m != order or m % 2 or m < 2:
        raise ParameterError(f"square QAM needs an even power of two, got {order}")
    half = m // 2
    side = 2**half
    labels = np.arange(order)
    i_level = _gray_to_index(labels >> half)
    q_level = _gray_to_index(labels & (side - 1))
    amp = 2 * np.arange(side) - (side - 1)
    pts = amp[i_level] + 1j * amp[q_level]
    pts = pts / np.sqrt(2 * (order - 1) / 3)
    return Constellation(f"qam{order}", pts.astype(complex), _label_table(m))


def get_constellation(name: str) -> Constellation:
    if name == "bpsk":
        return bpsk()
    if name.startswith("qam"):
        return square_qam(int(name[3:]))
    raise ParameterError(f"unknown constellation {name!r}")


def modulate(constellation: Constellation, bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    m = constellation.bits_per_symbol
    if bits.ndim != 1 or len(bits) % m:
        raise ParameterError(f"bit count {bits.shape} is not a multiple of {m}")
    weights = 1 << np.arange(m - 1, -1, -1)
    return constellation.points[bits.reshape(-1, m) @ weights]


def nearest_indices(constellation: Constellation, symbols) -> np.ndarray:
    """Index of the closest point per sample; ties go to the lower index."""
    y = np.atleast_1d(np.asarray(symbols, dtype=complex))
    d = np.abs(y[:, None] - constellation.points[None, :])
    return np.argmin(d, axis=1)


def demodulate_hard(constellation: Constellation, symbols) -> np.ndarray:
    idx = nearest_indices(constellation, symbols)
    return constellation.labels[idx].reshape(-1)


def neighbors(constellation: Constellation, point: complex, gamma: int) -> list[int]:
    """The ``gamma`` points closest to ``point``, nearest first."""
    return [int(i) for i in neighbor_table(constellation, [point], gamma)[0]]


def neighbor_table(constellation: Constellation, symbols, gamma: int) -> np.ndarray:
    """``(len(symbols), gamma)`` array of neighbour indices sorted by distance."""
    if not (1 <= gamma <= constellation.size):
        raise ParameterError(f"gamma must be in [1, {constellation.size}], got {gamma}")
    y = np.atleast_1d(np.asarray(symbols, dtype=complex))
    d = np.abs(y[:, None] - constellation.points[None, :])
    # stable sort keeps equidistant points in index order
    return np.argsort(d, axis=1, kind="stable")[:, :gamma]
