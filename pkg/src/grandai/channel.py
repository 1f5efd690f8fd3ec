"""Delay-tap ISI channels, Gauss-Markov noise and channel sounding.

Noise is circularly-symmetric complex Gaussian throughout: a variance
``sigma2`` means ``sigma2 / 2`` per real dimension.

Tap indexing is zero based. ``taps[k, j]`` is the coefficient applied at
symbol time ``k`` to the symbol sent ``j`` steps earlier, so the channel
matrix has ``H[k, k - j] = taps[k, j]``. Entries with ``k - j < 0`` have no
symbol to act on and are treated as undefined.

Sounding bookkeeping
--------------------
An impulse response is an ``(m, mu)`` array: ``m`` fast-time samples for
each of ``mu`` pulses. ``s = max(1, m // L)`` sounding signals are sent per
pulse, and sounding ``k`` (zero based) uses pulse ``k // s``. Each sounding
is convolved with the pulse response (length ``m + L - 1``) and matched
filtered (length ``eta = m + 2L - 2``). The output is then sampled at
indices ``L - 1 + j L`` for ``j < J = eta // L``. The matched-filter peak of
an undelayed path lands on ``j = 0``. The resulting ``(J, K)`` sounding
matrix ``z`` gives the taps through ``taps[k, j] = z[j, k - j]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import ar2_validity, yule_walker_ar2
from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class TapChannel:
    taps: np.ndarray  # (n_s, J) complex

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=complex)
        if t.ndim != 2 or t.shape[1] < 1 or t.shape[0] < 1:
            raise ParameterError(f"taps must be an (n_s, J) array, got shape {t.shape}")
        object.__setattr__(self, "taps", t)

    @property
    def n_s(self) -> int:
        return self.taps.shape[0]

    @property
    def memory(self) -> int:
        return self.taps.shape[1]

    @property
    def defined(self) -> np.ndarray:
        """Mask of taps that act on a symbol inside the frame."""
        k = np.arange(self.n_s)[:, None]
        j = np.arange(self.memory)[None, :]
        return k - j >= 0


def dicode_taps(rho: float, n_s: int) -> TapChannel:
    if not (0.0 <= rho <= 1.0):
        raise ParameterError(f"rho must lie in [0, 1], got {rho}")
    taps = np.zeros((n_s, 2), dtype=complex)
    taps[:, 0] = 1.0
    taps[:, 1] = -rho
    return TapChannel(taps)


def build_channel_matrix(channel: TapChannel) -> np.ndarray:
    n_s, J = channel.taps.shape
    h = np.zeros((n_s, n_s), dtype=complex)
    for j in range(min(J, n_s)):
        rows = np.arange(j, n_s)
        h[rows, rows - j] = channel.taps[j:, j]
    return h


def complex_normal(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def transmit(matrix: np.ndarray, x, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """``Y = H X + N`` with white ``CN(0, sigma2)`` noise."""
    x = np.asarray(x, dtype=complex)
    if matrix.shape != (len(x), len(x)):
        raise ParameterError(f"matrix {matrix.shape} does not match {len(x)} symbols")
    if sigma2 < 0:
        raise ParameterError("noise variance must be non-negative")
    y = matrix @ x
    if sigma2 > 0:
        y = y + complex_normal(rng, len(x), sigma2)
    return y


# -- Gauss-Markov noise ----------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "white"  # white | gm1 | gm2
    sigma2: float = 1.0
    rho: float = 0.0
    rho1: float = 0.0
    rho2: float = 0.0

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ParameterError("noise variance must be positive")
        if self.kind == "gm1" and not (0.0 <= self.rho < 1.0):
            raise ParameterError(f"AR(1) coefficient must lie in [0, 1), got {self.rho}")
        if self.kind == "gm2" and not ar2_validity(self.rho1, self.rho2):
            raise ParameterError(f"invalid AR(2) correlations ({self.rho1}, {self.rho2})")
        if self.kind not in ("white", "gm1", "gm2"):
            raise ParameterError(f"unknown noise kind {self.kind!r}")

    def covariance(self, n: int) -> np.ndarray:
        if self.kind == "white":
            return self.sigma2 * np.eye(n)
        if self.kind == "gm1":
            return gm1_covariance(self.rho, self.sigma2, n)
        return ar2_covariance(self.rho1, self.rho2, self.sigma2, n)


def gm1_covariance(rho: float, sigma2: float, n: int) -> np.ndarray:
    lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return sigma2 * np.power(float(rho), lag)


def ar2_autocorrelation(rho1: float, rho2: float, n: int) -> np.ndarray:
    """Normalised autocorrelation at lags ``0 .. n-1``."""
    if not ar2_validity(rho1, rho2):
        raise ParameterError(f"invalid AR(2) correlations ({rho1}, {rho2})")
    beta1, beta2, _ = yule_walker_ar2(rho1, rho2)
    r = np.empty(max(n, 3))
    r[:3] = 1.0, rho1, rho2
    for i in range(3, len(r)):
        r[i] = beta1 * r[i - 1] + beta2 * r[i - 2]
    return r[:n]


def ar2_covariance(rho1: float, rho2: float, sigma2: float, n: int) -> np.ndarray:
    r = ar2_autocorrelation(rho1, rho2, n)
    lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    return sigma2 * r[lag]


def gen_colored_noise(model: NoiseModel, n: int, rng: np.random.Generator, frames=None):
    """Stationary noise samples; shape ``(n,)`` or ``(frames, n)``."""
    shape = (n,) if frames is None else (frames, n)
    w = complex_normal(rng, shape, model.sigma2)
    if model.kind == "white":
        return w
    out = np.empty(shape, dtype=complex)
    if model.kind == "gm1":
        rho = model.rho
        gain = np.sqrt(1.0 - rho**2)
        out[..., 0] = w[..., 0]
        for k in range(1, n):
            out[..., k] = rho * out[..., k - 1] + gain * w[..., k]
        return out
    beta1, beta2, innov = yule_walker_ar2(model.rho1, model.rho2)
    # first two samples drawn from their stationary joint law
    out[..., 0] = w[..., 0]
    if n > 1:
        out[..., 1] = model.rho1 * w[..., 0] + np.sqrt(1 - model.rho1**2) * w[..., 1]
    gain = np.sqrt(innov)
    for k in range(2, n):
        out[..., k] = beta1 * out[..., k - 1] + beta2 * out[..., k - 2] + gain * w[..., k]
    return out


# -- sounding and tap extraction --------------------------------------------


def sounding_pulse(L: int, f_s: float = 1.0) -> np.ndarray:
    """Unit-energy complex exponential of ``L`` samples at carrier ``f_s / L``."""
    f_c = f_s / L
    l = np.arange(1, L + 1)
    u = np.exp(2j * np.pi * f_c * l / f_s)
    return u / np.sqrt(np.sum(np.abs(u) ** 2))


def sounding_samples(impulse_response, L: int, f_s: float = 1.0) -> np.ndarray:
    """Sampled matched-filter outputs, shape ``(J, K)`` for ``K`` soundings."""
    g = np.asarray(impulse_response, dtype=complex)
    if g.ndim == 1:
        g = g[:, None]
    if g.size == 0:
        raise ParameterError("impulse response is empty")
    m, mu = g.shape
    eta = 2 * L + m - 2
    J = eta // L
    if J < 1:
        raise ParameterError(f"pulse length L={L} too long for m={m} samples")
    per_pulse = max(1, m // L)
    u = sounding_pulse(L, f_s)
    u_mf = np.conj(u[::-1])
    picks = L - 1 + L * np.arange(J)
    cols = []
    for r in range(mu):
        z = np.convolve(g[:, r], u)
        assert len(z) == m + L - 1
        zp = np.convolve(z, u_mf)
        assert len(zp) == eta
        cols.append(zp[picks])
    z2 = np.stack(cols, axis=1)
    return np.repeat(z2, per_pulse, axis=1)


def taps_from_soundings(z, n_s: int | None = None) -> TapChannel:
    """Assemble ``taps[k, j] = z[j, k - j]``; undefined entries are zero."""
    z = np.asarray(z, dtype=complex)
    J, K = z.shape
    n_s = K if n_s is None else n_s
    if n_s > K:
        raise ParameterError(f"need {n_s} soundings, have {K}")
    taps = np.zeros((n_s, J), dtype=complex)
    for j in range(min(J, n_s)):
        taps[j:, j] = z[j, : n_s - j]
    return TapChannel(taps)


def extract_taps(impulse_response, L: int, f_s: float = 1.0, n_s: int | None = None) -> TapChannel:
    return taps_from_soundings(sounding_samples(impulse_response, L, f_s), n_s)


def make_synthetic_impulse_response(
    seed: int,
    m: int,
    mu: int,
    sparsity: float = 1.0,
    decay: float = 0.15,
    coherence: float = 0.9,
) -> np.ndarray:
    """Sparse clutter-like impulse responses, one column per pulse.

    Path ``kappa`` has mean power ``exp(-kappa / (decay * m))``; ``decay=0``
    keeps only the leading path. Path amplitudes evolve from pulse to pulse
    as an AR(1) process with coefficient ``coherence``.
    """
    if m < 1 or mu < 1:
        raise ParameterError("m and mu must be positive")
    if not (0.0 < sparsity <= 1.0):
        raise ParameterError(f"sparsity must lie in (0, 1], got {sparsity}")
    rng = np.random.default_rng(seed)
    kappa = np.arange(m)
    if decay > 0:
        power = np.exp(-kappa / (decay * m))
        support = rng.random(m) < sparsity
    else:
        power = np.zeros(m)
        support = np.zeros(m, dtype=bool)
    support[0] = True
    power[0] = 1.0
    amp = np.sqrt(power * support)
    g = np.empty((m, mu), dtype=complex)
    a = complex_normal(rng, m)
    gain = np.sqrt(1 - coherence**2)
    for r in range(mu):
        if r:
            a = coherence * a + gain * complex_normal(rng, m)
        g[:, r] = amp * a
    return g


def make_ar2_soundings(seed: int, K: int, phi1: complex, phi2: complex, J: int = 6) -> np.ndarray:
    """Sounding matrix whose every column obeys ``z_j = phi1 z_{j-1} + phi2 z_{j-2}``."""
    rng = np.random.default_rng(seed)
    z = np.empty((J, K), dtype=complex)
    z[0] = 1.0 + 0.2 * complex_normal(rng, K)
    z[1] = phi1 * z[0] + 0.2 * complex_normal(rng, K)
    for j in range(2, J):
        z[j] = phi1 * z[j - 1] + phi2 * z[j - 2]
    return z


def normalize_power(channel: TapChannel) -> TapChannel:
    """Scale so the mean received energy per unit-energy symbol is one."""
    energy = np.mean(np.sum(np.abs(channel.taps * channel.defined) ** 2, axis=1))
    return TapChannel(channel.taps / np.sqrt(energy))


# -- CSV ingestion ------------------------------------------------------------


def load_taps_csv(path) -> TapChannel:
    """Read a ``k,j,re,im`` tap file (zero-based ``k`` and ``j``)."""
    rows = _read_csv(path, ("k", "j", "re", "im"))
    k = np.array([int(r["k"]) for r in rows])
    j = np.array([int(r["j"]) for r in rows])
    if np.any(k < 0) or np.any(j < 0):
        raise ParameterError(f"{path}: negative tap index")
    if np.any(j > k):
        raise ParameterError(f"{path}: tap (k={k[j > k][0]}, j={j[j > k][0]}) lies above the band")
    taps = np.zeros((k.max() + 1, j.max() + 1), dtype=complex)
    taps[k, j] = [float(r["re"]) + 1j * float(r["im"]) for r in rows]
    return TapChannel(taps)


def save_taps_csv(channel: TapChannel, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "j", "re", "im"])
        for k, j in zip(*np.nonzero(channel.defined)):
            t = channel.taps[k, j]
            w.writerow([k, j, repr(float(t.real)), repr(float(t.imag))])


def load_impulse_response_csv(path) -> np.ndarray:
    """Read a ``sample,pulse,re,im`` impulse-response file (zero based)."""
    rows = _read_csv(path, ("sample", "pulse", "re", "im"))
    s = np.array([int(r["sample"]) for r in rows])
    p = np.array([int(r["pulse"]) for r in rows])
    g = np.zeros((s.max() + 1, p.max() + 1), dtype=complex)
    g[s, p] = [float(r["re"]) + 1j * float(r["im"]) for r in rows]
    return g


def save_impulse_response_csv(g, path) -> None:
    g = np.asarray(g, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "pulse", "re", "im"])
        for (s, p), v in np.ndenumerate(g):
            w.writerow([s, p, repr(float(v.real)), repr(float(v.imag))])


def _read_csv(path, header) -> list[dict]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != header:
            raise ParameterError(f"{path}: expected header {','.join(header)}")
        rows = list(reader)
    if not rows:
        raise ParameterError(f"{path}: no data rows")
    return rows
