"""Zero-forcing and MMSE equalisation, and the equalised-noise statistics.

With ``A = h_eq h`` the equalised residual ``Y_eq - X`` has covariance

    A Cx A^H + h_eq Cn h_eq^H - A Cx - Cx A^H + Cx

which is evaluated term by term in :func:`equalized_noise_covariance`.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.signal import lfilter

from .errors import NumericalError, ParameterError

COND_CAP = 1e12


def zf_equalize_dicode(rho: float, received) -> np.ndarray:
    """Invert the ``(1, -rho)`` dicode channel by forward substitution."""
    if not (0.0 <= rho < 1.0):
        raise ParameterError(f"rho must lie in [0, 1), got {rho}")
    return lfilter([1.0], [1.0, -rho], np.asarray(received, dtype=complex))


def zf_equalize(h: np.ndarray, received) -> np.ndarray:
    """Forward substitution through a lower-triangular channel matrix."""
    return sla.solve_triangular(h, np.asarray(received, dtype=complex), lower=True)


def _check_cond(m: np.ndarray, cap: float, what: str):
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > cap:
        raise NumericalError(f"{what} is ill-conditioned (condition number {cond:.3g} > {cap:.3g})")


def mmse_matrix(h: np.ndarray, cx: np.ndarray, cn: np.ndarray, cond_cap: float = COND_CAP) -> np.ndarray:
    """``Cx h^H (h Cx h^H + Cn)^{-1}``."""
    h = np.asarray(h, dtype=complex)
    if h.shape != cx.shape or h.shape != cn.shape:
        raise ParameterError(f"shape mismatch: h {h.shape}, Cx {cx.shape}, Cn {cn.shape}")
    hcx = h @ cx
    inner = hcx @ h.conj().T + cn
    inner = 0.5 * (inner + inner.conj().T)
    _check_cond(inner, cond_cap, "h Cx h^H + Cn")
    try:
        factor = sla.cho_factor(inner, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"h Cx h^H + Cn is not positive definite: {exc}") from exc
    # inner and Cx are Hermitian, so h_eq = (inner^{-1} h Cx)^H
    return sla.cho_solve(factor, hcx).conj().T


def equalized_noise_covariance(h_eq, h, cx, cn) -> np.ndarray:
    a = h_eq @ h
    c = (
        a @ cx @ a.conj().T
        + h_eq @ cn @ h_eq.conj().T
        - a @ cx
        - cx @ a.conj().T
        + cx
    )
    return 0.5 * (c + c.conj().T)


def condition_on_block(cx: np.ndarray, i: int, b: int) -> np.ndarray:
    """Symbol covariance with block ``i`` (zero based) held fixed."""
    n = cx.shape[0]
    if not (0 <= i < n // b):
        raise ParameterError(f"block index {i} out of range for {n // b} blocks")
    c = cx.copy()
    sl = slice(i * b, (i + 1) * b)
    c[sl, :] = 0
    c[:, sl] = 0
    return c


def block_conditional_covariance(cx, i: int, b: int, h, h_eq, cn) -> np.ndarray:
    """``b x b`` residual covariance of block ``i`` given that block's symbols."""
    c = equalized_noise_covariance(h_eq, h, condition_on_block(cx, i, b), cn)
    sl = slice(i * b, (i + 1) * b)
    return c[sl, sl]


def block_covariances(h_eq, h, cx, cn, b: int, conditional: bool = True) -> np.ndarray:
    """All ``(n_s / b, b, b)`` diagonal blocks of the residual covariance.

    For ``Cx = c I`` the conditional blocks follow from one full product:
    zeroing block ``i`` of ``Cx`` removes ``c (A_ii - I)(A_ii - I)^H`` from the
    marginal block. Other ``Cx`` fall back to one evaluation per block.
    """
    n = h.shape[0]
    if n % b:
        raise ParameterError(f"block size {b} does not divide {n}")
    nb = n // b
    full = equalized_noise_covariance(h_eq, h, cx, cn)
    idx = np.arange(nb)[:, None] * b + np.arange(b)[None, :]
    marginal = full[idx[:, :, None], idx[:, None, :]]
    if not conditional:
        return marginal
    scale = cx[0, 0]
    if not np.allclose(cx, scale * np.eye(n)):
        return np.stack([block_conditional_covariance(cx, i, b, h, h_eq, cn) for i in range(nb)])
    a = h_eq @ h
    d = a[idx[:, :, None], idx[:, None, :]] - np.eye(b)
    out = marginal - scale * d @ np.conj(np.swapaxes(d, 1, 2))
    return 0.5 * (out + np.conj(np.swapaxes(out, 1, 2)))


def block_gains(h_eq, h, b: int) -> np.ndarray:
    """Diagonal ``b x b`` blocks of ``h_eq h``, the mean gain on each block's own symbols."""
    a = h_eq @ h
    n = a.shape[0]
    if n % b:
        raise ParameterError(f"block size {b} does not divide {n}")
    idx = np.arange(n // b)[:, None] * b + np.arange(b)[None, :]
    return a[idx[:, :, None], idx[:, None, :]]
