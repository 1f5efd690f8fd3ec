"""Monte-Carlo Eb/N0 sweeps.

Every frame draws from its own generator seeded by ``(seed, point, frame)``.
Frames are processed in fixed-size batches, and batch results are merged
in frame order. A point stops at the exact frame where ``min_errors`` is
reached. So the output does not depend on how many workers ran the batches.

Two pipelines exist:

* ``dicode``: ``Y = h (X + N~)`` with ``N~`` AR(1) of power ``sigma2``, so
  that zero forcing returns ``X + N~``. ``sigma2`` is the noise power after
  equalisation.
* ``mmse``: ``Y = h X + N`` with white ``N`` of variance ``sigma2`` before
  equalisation, followed by an MMSE equaliser. Channel realisations come
  from a fixed pool and each frame picks one at random.

With imperfect CSI the estimated channel drives both equalisation and the
decoder statistics. A frame whose estimate leaves no usable statistics
(for example an unstable zero-forcing inverse) counts as a FAILURE; the
sidecar reports how many frames this happened to.
"""

from __future__ import annotations

import csv
import logging
import math
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
import yaml
from scipy.signal import lfilter
from scipy.stats import binomtest

from ..channel import (
    TapChannel,
    build_channel_matrix,
    complex_normal,
    dicode_taps,
    gm1_covariance,
    load_taps_csv,
    make_ar2_soundings,
    make_synthetic_impulse_response,
    sounding_samples,
    taps_from_soundings,
)
from ..codebook import make_crc_code, make_random_linear_code
from ..equalizer import block_covariances as eq_block_covariances
from ..equalizer import block_gains, mmse_matrix, zf_equalize_dicode
from ..errors import NumericalError, ParameterError
from ..estimation import ar2_fit_channel, mismatch_rho, perturb_taps_nmse, quantize_taps
from ..modem import demodulate_hard, get_constellation, modulate
from ..orbgrand import hard_grand_decode
from ..orbgrand_ai import WhitenedBlocks, decode, partition
from .config import SimConfig, config_from_dict

log = logging.getLogger(__name__)

CSV_HEADER = ("ebn0_db", "frames", "errors", "bler", "ci_lo", "ci_hi", "mean_queries", "failures")
BATCH = 64
WORKER_ENV = "GRANDAI_WORKERS"
# frame whose estimated channel gives no usable decoder statistics: a FAILURE
UNUSABLE = (True, True, 0, 0, True)


def ebn0_to_sigma2(ebn0_db: float, rate: float, m_s: int) -> float:
    """Noise power for unit-energy symbols: ``1 / (R m_s 10^(Eb/N0 / 10))``."""
    if not (0.0 < rate <= 1.0):
        raise ParameterError(f"rate must lie in (0, 1], got {rate}")
    if m_s < 1:
        raise ParameterError("m_s must be at least 1")
    return 1.0 / (rate * m_s * 10.0 ** (ebn0_db / 10.0))


def build_code(cfg: SimConfig):
    c = cfg.code
    if c.type == "rlc":
        return make_random_linear_code(c.n, c.k, c.seed)
    return make_crc_code(c.k, c.poly)


def _stream_seed(*key) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1)[0])


# -- pipelines ----------------------------------------------------------------


class _Pipeline:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.code = build_code(cfg)
        self.const = get_constellation(cfg.constellation)
        self.m = self.const.bits_per_symbol
        self.n_s = self.code.n // self.m
        dec = cfg.decoder
        self.kind = dec.type
        self.part = partition(self.n_s, 1 if dec.type == "orbgrand_interleaved" else dec.b)
        self.tau = dec.tau
        self.gamma = dec.gamma
        self._stats: dict = {}

    def _message(self, rng):
        info = rng.integers(0, 2, self.code.k, dtype=np.uint8)
        word = self.code.encode(info)
        return word, modulate(self.const, word)

    def _decode(self, y_eq, stats, word) -> tuple:
        if self.kind == "hard_grand":
            out = hard_grand_decode(demodulate_hard(self.const, y_eq), self.code, self.tau)
            if out is None:
                return True, True, self.tau, self.tau, False
            return not np.array_equal(out[0], word), False, out[1], out[1], False
        res = decode(y_eq, self.code, self.const, self.part, stats, self.tau, self.gamma)
        wrong = res.failure or not np.array_equal(res.codeword, word)
        return wrong, res.failure, res.queries, res.patterns_generated, False


class DicodePipeline(_Pipeline):
    def __init__(self, cfg: SimConfig):
        super().__init__(cfg)
        self.rho = cfg.channel.rho
        self.rho_dec = mismatch_rho(self.rho, cfg.csi.delta_rho)
        self.nmse = cfg.csi.nmse
        self.per_symbol = cfg.csi.nmse_per_symbol
        self.taps = dicode_taps(self.rho, self.n_s)
        # ideal interleaving leaves white noise of the same power
        self.white = self.kind == "orbgrand_interleaved"

    def statistics(self, sigma2: float):
        if sigma2 not in self._stats:
            rho = 0.0 if self.white else self.rho_dec
            self._stats[sigma2] = WhitenedBlocks.from_covariance(gm1_covariance(rho, sigma2, self.n_s), self.part)
        return self._stats[sigma2]

    def frame(self, rng, sigma2: float) -> tuple:
        word, x = self._message(rng)
        w = complex_normal(rng, self.n_s)
        if self.white:
            return self._decode(x + math.sqrt(sigma2) * w, self.statistics(sigma2), word)
        rho = self.rho
        drive = math.sqrt(1.0 - rho**2) * w
        drive[0] = w[0]
        nt = math.sqrt(sigma2) * lfilter([1.0], [1.0, -rho], drive)
        y = lfilter([1.0, -rho], [1.0], x + nt)
        if self.nmse == 0:
            return self._decode(zf_equalize_dicode(rho, y), self.statistics(sigma2), word)
        est = build_channel_matrix(perturb_taps_nmse(self.taps, self.nmse, rng, self.per_symbol))
        y_eq = sla.solve_triangular(est, y, lower=True)
        # covariance of h N~ is diagonal: sigma2 first, then the innovation power
        pre = np.full(self.n_s, sigma2 * (1.0 - rho**2))
        pre[0] = sigma2
        g = sla.solve_triangular(est, np.diag(np.sqrt(pre)), lower=True)
        try:
            psi = WhitenedBlocks.from_covariance(g @ g.conj().T, self.part)
        except NumericalError:
            return UNUSABLE
        return self._decode(y_eq, psi, word)


class MmsePipeline(_Pipeline):
    def __init__(self, cfg: SimConfig):
        super().__init__(cfg)
        self.conditional = cfg.covariance == "conditional"
        self.nmse = cfg.csi.nmse
        self.per_symbol = cfg.csi.nmse_per_symbol
        self.true, self.est = self._realizations()
        self.matrices = [build_channel_matrix(t) for t in self.true]
        self.est_matrices = [build_channel_matrix(t) for t in self.est]

    def _realizations(self):
        ch, csi, n_s = self.cfg.channel, self.cfg.csi, self.n_s
        true, est = [], []
        if ch.type == "taps_file":
            taps = load_taps_csv(ch.path).taps
            if taps.shape[0] < n_s:
                raise ParameterError(f"{ch.path}: {taps.shape[0]} symbol times, need {n_s}")
            t = TapChannel(taps[:n_s])
            true.append(t)
            est.append(quantize_taps(t, csi.quantize_levels) if csi.quantize_levels else t)
            return true, est
        for r in range(ch.realizations):
            seed = _stream_seed(ch.seed, r)
            if ch.type == "synthetic":
                g = make_synthetic_impulse_response(
                    seed, ch.m, ch.pulses, ch.sparsity, ch.decay, ch.coherence
                )
                z = sounding_samples(g, ch.L, ch.f_s)
            else:
                z = make_ar2_soundings(seed, n_s, complex(*ch.phi1), complex(*ch.phi2))
            t = taps_from_soundings(z, n_s)
            scale = np.sqrt(np.mean(np.sum(np.abs(t.taps * t.defined) ** 2, axis=1)))
            z = z / scale
            t = taps_from_soundings(z, n_s)
            e = ar2_fit_channel(z, n_s) if csi.ar2_fit else t
            if csi.quantize_levels:
                e = quantize_taps(e, csi.quantize_levels)
            true.append(t)
            est.append(e)
        return true, est

    def _equalizer(self, h_est: np.ndarray, sigma2: float):
        eye = np.eye(self.n_s)
        cn = sigma2 * eye
        h_eq = mmse_matrix(h_est, eye, cn)
        b = self.part.b
        covs = eq_block_covariances(h_eq, h_est, eye, cn, b, self.conditional)
        # given the block's own symbols the output mean is A_ii t, not t
        gain = block_gains(h_eq, h_est, b) if self.conditional else None
        return h_eq, WhitenedBlocks.from_covariance(covs, self.part, gain=gain)

    def statistics(self, r: int, sigma2: float):
        key = (r, sigma2)
        if key not in self._stats:
            self._stats[key] = self._equalizer(self.est_matrices[r], sigma2)
        return self._stats[key]

    def frame(self, rng, sigma2: float) -> tuple:
        r = int(rng.integers(len(self.true)))
        word, x = self._message(rng)
        y = self.matrices[r] @ x + math.sqrt(sigma2) * complex_normal(rng, self.n_s)
        if self.nmse == 0:
            h_eq, stats = self.statistics(r, sigma2)
        else:
            est = perturb_taps_nmse(self.est[r], self.nmse, rng, self.per_symbol)
            try:
                h_eq, stats = self._equalizer(build_channel_matrix(est), sigma2)
            except NumericalError:
                return UNUSABLE
        return self._decode(h_eq @ y, stats, word)


def make_pipeline(cfg: SimConfig):
    return DicodePipeline(cfg) if cfg.channel.type == "dicode" else MmsePipeline(cfg)


# -- batch execution ----------------------------------------------------------


def frame_rng(seed: int, point: int, frame: int) -> np.random.Generator:
    return np.random.default_rng([seed, point, frame])


def run_batch(pipeline, seed: int, point: int, sigma2: float, start: int, stop: int) -> np.ndarray:
    """Rows of ``(error, failure, queries, patterns, unusable)`` for frames ``start .. stop-1``."""
    out = np.empty((stop - start, 5), dtype=np.int64)
    for i, f in enumerate(range(start, stop)):
        out[i] = pipeline.frame(frame_rng(seed, point, f), sigma2)
    return out


_WORKER: dict = {}


def _init_worker(raw: dict):
    _WORKER["pipeline"] = make_pipeline(config_from_dict(raw))


def _worker_batch(args):
    return run_batch(_WORKER["pipeline"], *args)


def default_workers() -> int:
    value = os.environ.get(WORKER_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            raise ParameterError(f"{WORKER_ENV} must be an integer, got {value!r}") from None
    return os.cpu_count() or 1


# -- results ------------------------------------------------------------------


@dataclass
class PointResult:
    ebn0_db: float
    frames: int
    errors: int
    bler: float
    ci_lo: float
    ci_hi: float
    mean_queries: float
    failures: int
    mean_patterns: float = float("nan")
    std_queries: float = float("nan")
    unusable: int = 0


@dataclass
class SweepResult:
    points: list[PointResult]
    config: dict = field(default_factory=dict)
    label: str = ""

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


def wilson_ci(errors: int, frames: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(errors, frames).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def summarize(ebn0_db: float, rows: np.ndarray) -> PointResult:
    frames = len(rows)
    errors = int(rows[:, 0].sum())
    lo, hi = wilson_ci(errors, frames)
    return PointResult(
        ebn0_db=float(ebn0_db),
        frames=frames,
        errors=errors,
        bler=errors / frames,
        ci_lo=lo,
        ci_hi=hi,
        mean_queries=float(rows[:, 2].mean()),
        failures=int(rows[:, 1].sum()),
        mean_patterns=float(rows[:, 3].mean()),
        std_queries=float(rows[:, 2].std()),
        unusable=int(rows[:, 4].sum()),
    )


def _truncate(rows: np.ndarray, have: int, need: int):
    """Cut ``rows`` at the frame that brings the error count to ``need``."""
    cum = have + np.cumsum(rows[:, 0])
    hit = np.nonzero(cum >= need)[0]
    if len(hit):
        return rows[: hit[0] + 1], True
    return rows, False


def _run_point(cfg, pipeline, pool, workers, point, sigma2) -> np.ndarray:
    stop = cfg.stop
    starts = list(range(0, stop.max_frames, BATCH))
    tasks = ((cfg.seed, point, sigma2, s, min(s + BATCH, stop.max_frames)) for s in starts)
    chunks, errors = [], 0
    if pool is None:
        for t in tasks:
            rows, done = _truncate(run_batch(pipeline, *t), errors, stop.min_errors)
            chunks.append(rows)
            errors += int(rows[:, 0].sum())
            if done:
                break
        return np.concatenate(chunks)
    # keep a bounded window of batches in flight and consume them in order
    pending = []
    window = 2 * workers
    for t in tasks:
        pending.append(pool.submit(_worker_batch, t))
        if len(pending) < window:
            continue
        rows, done = _truncate(pending.pop(0).result(), errors, stop.min_errors)
        chunks.append(rows)
        errors += int(rows[:, 0].sum())
        if done:
            break
    else:
        done = False
        while pending and not done:
            rows, done = _truncate(pending.pop(0).result(), errors, stop.min_errors)
            chunks.append(rows)
            errors += int(rows[:, 0].sum())
    for f in pending:
        f.cancel()
    return np.concatenate(chunks)


def run_sweep(cfg: SimConfig, workers: int | None = None) -> SweepResult:
    """Simulate every Eb/N0 point of ``cfg``."""
    workers = default_workers() if workers is None else max(1, int(workers))
    pipeline = make_pipeline(cfg)
    rate = pipeline.code.rate
    pool = None
    if workers > 1:
        ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
        pool = ProcessPoolExecutor(workers, mp_context=ctx, initializer=_init_worker, initargs=(cfg.to_dict(),))
    try:
        points = []
        for i, ebn0 in enumerate(cfg.ebn0):
            sigma2 = ebn0_to_sigma2(ebn0, rate, pipeline.m)
            rows = _run_point(cfg, pipeline, pool, workers, i, sigma2)
            points.append(summarize(ebn0, rows))
            log.info("%s Eb/N0 %.2f dB: %d/%d errors", cfg.label, ebn0, points[-1].errors, points[-1].frames)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    result = SweepResult(points, cfg.to_dict(), cfg.label)
    for msg in trend_warnings(result):
        log.warning("%s", msg)
    return result


def trend_warnings(result: SweepResult) -> list[str]:
    """BLER and mean queries should not rise with Eb/N0 beyond the CIs."""
    out = []
    pts = result.points
    for a, b in zip(pts, pts[1:]):
        if b.ci_lo > a.ci_hi:
            out.append(f"BLER rises from {a.ebn0_db} to {b.ebn0_db} dB beyond the 95% intervals")
        se = math.hypot(a.std_queries / math.sqrt(a.frames), b.std_queries / math.sqrt(b.frames))
        if b.mean_queries - a.mean_queries > 3 * se:
            out.append(f"mean queries rise from {a.ebn0_db} to {b.ebn0_db} dB")
    return out


def ebn0_at_bler(result: SweepResult, target: float) -> float:
    """Eb/N0 where the BLER curve first crosses ``target``.

    Interpolates ``log10(BLER)`` linearly between the two grid points that
    bracket the target. Returns ``nan`` if the grid never brackets it.
    """
    pts = result.points
    for a, b in zip(pts, pts[1:]):
        if a.bler == target:
            return a.ebn0_db
        if a.bler > target > b.bler:
            if b.bler == 0:
                # no errors at the upper point: nothing to interpolate against
                return float("nan")
            la, lb = math.log10(a.bler), math.log10(b.bler)
            return a.ebn0_db + (math.log10(target) - la) / (lb - la) * (b.ebn0_db - a.ebn0_db)
    return float("nan")


# -- CSV ----------------------------------------------------------------------


def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else "%.12g" % v


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.yaml")


def emit_csv(result: SweepResult, path) -> Path:
    """Write the result rows and a ``.meta.yaml`` sidecar with the resolved config."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for p in result.points:
                w.writerow([_fmt(getattr(p, k)) for k in CSV_HEADER])
        meta = {
            "label": result.label,
            "seed": result.config.get("seed"),
            "tau": result.config.get("decoder", {}).get("tau"),
            "config": result.config,
            "mean_patterns": [float("%.12g" % p.mean_patterns) for p in result.points],
            "std_queries": [float("%.12g" % p.std_queries) for p in result.points],
            "unusable_csi_frames": [p.unusable for p in result.points],
        }
        sidecar_path(path).write_text(yaml.safe_dump(meta, sort_keys=False))
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    return path


def parse_csv(path) -> SweepResult:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_HEADER:
                raise ParameterError(f"{path}: unexpected header")
            rows = list(reader)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    ints = {"frames", "errors", "failures"}
    points = [PointResult(**{k: (int(r[k]) if k in ints else float(r[k])) for k in CSV_HEADER}) for r in rows]
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = yaml.safe_load(side.read_text()) or {}
        for i, p in enumerate(points):
            for key, attr in (("mean_patterns", "mean_patterns"), ("std_queries", "std_queries"), ("unusable_csi_frames", "unusable")):
                values = meta.get(key) or []
                if i < len(values):
                    setattr(p, attr, values[i])
    return SweepResult(points, meta.get("config", {}), meta.get("label", ""))
