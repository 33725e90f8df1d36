"""Monte-Carlo FER/BER measurement over BPSK/AWGN.

Noise is indexed by (seed, point index, chunk index), with fixed chunk
boundaries, so results are bit-identical for any worker count; the early
stop rule is evaluated on the committed in-order prefix of chunks.  Frames
whose search never backtracks run through the vectorized batch decoder;
the rest are re-decoded by the reference implementation (identical output
by construction, pinned by tests).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass, field, asdict

import numpy as np

from .baselines import ml_decode, sc_decode, scl_decode, SclConfig
from .batch import BatchDecoder
from .bsda import (
    DecoderConfig,
    decode,
    penalty_profile,
    psi_for_tree,
    sda_tree,
)
from .codespec import CodeSpec, crc_bits, crc_degree, load_spec, save_spec
from .decomposition import TreePolicy, build_tree
from .pathstore import ArrayBank

CSV_COLUMNS = ("snr_db", "frames", "frame_errors", "bit_errors", "fer", "ber",
               "avg_add", "avg_cmp", "avg_iter", "peak_pool", "seconds")

CHUNK = 256     # frames per RNG/work unit; fixed so workers cannot matter


@dataclass
class Campaign:
    spec_text: str
    decoder: str = "bsda"               # bsda | sda | sc | scl | ml
    snrs: tuple[float, ...] = (2.0,)
    L: int = 32
    D: int | None = None
    pool_capacity: int | None = None
    crc: int | None = None              # validate/select on an info-tail CRC
    max_frames: int = 1_000_000
    target_errors: int = 100
    min_frames_factor: int = 10
    seed: int = 0
    workers: int = 1
    tree_policy: dict = field(default_factory=dict)
    bias_snr_db: float | None = None    # None: re-estimate at every point
    bias_samples: int = 200_000
    bias_profile: tuple[float, ...] | None = None   # overrides estimation
    use_batch: bool = True

    @staticmethod
    def for_spec(spec: CodeSpec, **kw) -> "Campaign":
        return Campaign(spec_text=save_spec(spec), **kw)


@dataclass
class PointStats:
    snr_db: float
    frames: int
    frame_errors: int
    bit_errors: int
    fer: float
    ber: float
    avg_add: float
    avg_cmp: float
    avg_iter: float
    peak_pool: float
    seconds: float

    def csv_row(self) -> str:
        return ",".join([
            f"{self.snr_db:g}", str(self.frames), str(self.frame_errors),
            str(self.bit_errors), f"{self.fer:.8g}", f"{self.ber:.8g}",
            f"{self.avg_add:.8g}", f"{self.avg_cmp:.8g}",
            f"{self.avg_iter:.8g}", f"{self.peak_pool:.8g}",
            f"{self.seconds:.3f}"])


def channel_llrs(codeword, snr_db: float, rate: float, rng) -> np.ndarray:
    """BPSK over AWGN: x = 1-2c, y = x + noise, LLR = 2y/sigma^2.

    snr_db is Eb/N0; sigma^2 = 1/(2 * rate * 10^(snr_db/10)).
    """
    c = np.asarray(codeword)
    sigma_sq = 1.0 / (2.0 * rate * 10.0 ** (snr_db / 10.0))
    y = (1.0 - 2.0 * c) + np.sqrt(sigma_sq) * rng.standard_normal(c.shape)
    return 2.0 * y / sigma_sq


class _Context:
    """Per-process decode state for one campaign."""

    def __init__(self, campaign: Campaign):
        self.campaign = campaign
        self.spec = load_spec(campaign.spec_text)
        self.rate = self.spec.k / self.spec.n
        kind = campaign.decoder
        self.kind = kind
        self.config = None
        self.tree = None
        self.bank = None
        self.batch = None
        self._psi_cache: dict[float, np.ndarray] = {}
        if kind in ("bsda", "sda"):
            if kind == "bsda":
                self.tree = build_tree(self.spec, TreePolicy(**campaign.tree_policy))
            else:
                self.tree = sda_tree(self.spec)
            self.config = DecoderConfig(
                L=campaign.L, D=campaign.D,
                pool_capacity=campaign.pool_capacity, crc=campaign.crc)
            self.bank = ArrayBank(self.spec.m, self.config.queue_capacity(),
                                  self.config.pool_entries(self.spec.n))
        elif kind == "scl":
            self.scl_config = SclConfig(L=campaign.L, crc=campaign.crc)
        elif kind not in ("sc", "ml"):
            raise ValueError(f"unknown decoder {kind!r}")

    def _profile(self, snr_db: float) -> np.ndarray:
        camp = self.campaign
        if camp.bias_profile is not None:
            return np.asarray(camp.bias_profile)
        key = camp.bias_snr_db if camp.bias_snr_db is not None else snr_db
        if key not in self._psi_cache:
            self._psi_cache[key] = penalty_profile(
                self.spec, key, camp.bias_samples, seed=(camp.seed ^ 0x5EED))
        return self._psi_cache[key]

    _configured: float | None = None

    def configure_point(self, snr_db: float) -> None:
        if self._configured == snr_db:
            return
        self._configured = snr_db
        if self.kind in ("bsda", "sda"):
            psi = psi_for_tree(self._profile(snr_db), self.tree)
            self.config.psi = psi
            if self.kind == "bsda" and self.campaign.use_batch:
                self.batch = BatchDecoder(self.spec, self.tree, self.config)
            else:
                self.batch = None

    def frame_bits(self, point_idx: int, chunk_idx: int, count: int):
        """Deterministic info bits and LLRs for one chunk of frames."""
        camp = self.campaign
        rng = np.random.default_rng((camp.seed, point_idx, chunk_idx))
        k, n = self.spec.k, self.spec.n
        r = crc_degree(camp.crc) if camp.crc is not None else 0
        data = rng.integers(0, 2, (count, k - r), dtype=np.uint8)
        if r:
            info = np.array([np.concatenate([d, crc_bits(d, camp.crc)])
                             for d in data])
        else:
            info = data
        words = np.array([self.spec.encode(i) for i in info])
        llrs = channel_llrs(words, self.snr_db, self.rate, rng)
        return info, llrs

    def run_chunk(self, point_idx: int, snr_db: float, chunk_idx: int,
                  count: int) -> dict:
        self.snr_db = snr_db
        info, llrs = self.frame_bits(point_idx, chunk_idx, count)
        stats = dict(frames=count, frame_errors=0, bit_errors=0,
                     add=0, cmp=0, iters=0, pool=0)
        results: list = [None] * count
        if self.batch is not None:
            accepted, fast = self.batch.decode_batch(llrs)
            for i in np.nonzero(accepted)[0]:
                results[i] = fast[i]
        for i in range(count):
            if results[i] is None:
                results[i] = self._decode_one(llrs[i])
        for i, res in enumerate(results):
            ok = res.status == "ok" and np.array_equal(res.info, info[i])
            if not ok:
                stats["frame_errors"] += 1
                if res.info is not None:
                    stats["bit_errors"] += int((res.info != info[i]).sum())
                else:
                    stats["bit_errors"] += info[i].size
            stats["add"] += res.ops_add
            stats["cmp"] += res.ops_cmp
            stats["iters"] += res.iterations
            stats["pool"] += res.peak_pool
        return stats

    def _decode_one(self, llrs):
        if self.kind in ("bsda", "sda"):
            return decode(self.spec, self.tree, self.config, llrs, bank=self.bank)
        if self.kind == "sc":
            return sc_decode(self.spec, llrs)
        if self.kind == "scl":
            return scl_decode(self.spec, self.scl_config, llrs)
        word, _ = ml_decode(self.spec, llrs)
        from .bsda import DecodeResult
        from .kernel import polar_transform
        u = polar_transform(word)
        return DecodeResult(status="ok", codeword=word, u=u,
                            info=self.spec.extract_info(u), iterations=1,
                            ops_add=0, ops_cmp=0,
                            visits=np.zeros(1, dtype=np.int64), peak_pool=0)


_WORKER_CTX: _Context | None = None


def _worker_init(campaign: Campaign) -> None:
    global _WORKER_CTX
    _WORKER_CTX = _Context(campaign)


def _worker_chunk(args) -> tuple[int, dict]:
    point_idx, snr_db, chunk_idx, count = args
    _WORKER_CTX.configure_point(snr_db)
    return chunk_idx, _WORKER_CTX.run_chunk(point_idx, snr_db, chunk_idx, count)


def run_point(campaign: Campaign, snr_db: float, point_idx: int = 0,
              ctx: _Context | None = None) -> PointStats:
    """Simulate one SNR point; stops at the target error count."""
    t0 = time.perf_counter()
    totals = dict(frames=0, frame_errors=0, bit_errors=0,
                  add=0, cmp=0, iters=0, pool=0)

    def committed(chunk_stats) -> bool:
        for key in totals:
            totals[key] += chunk_stats[key]
        camp = campaign
        return (totals["frame_errors"] >= camp.target_errors > 0 and
                totals["frames"] >= camp.min_frames_factor * camp.target_errors)

    n_chunks = (campaign.max_frames + CHUNK - 1) // CHUNK
    sizes = [min(CHUNK, campaign.max_frames - i * CHUNK) for i in range(n_chunks)]

    if campaign.workers <= 1:
        if ctx is None:
            ctx = _Context(campaign)
        ctx.configure_point(snr_db)
        for idx in range(n_chunks):
            stats = ctx.run_chunk(point_idx, snr_db, idx, sizes[idx])
            if committed(stats):
                break
    else:
        with ProcessPoolExecutor(max_workers=campaign.workers,
                                 initializer=_worker_init,
                                 initargs=(campaign,)) as pool:
            window = campaign.workers * 2
            pending = {}
            buffered: dict[int, dict] = {}
            next_commit = 0
            submitted = 0
            stop = False
            while not stop and (pending or submitted < n_chunks):
                while submitted < n_chunks and len(pending) < window:
                    fut = pool.submit(_worker_chunk,
                                      (point_idx, snr_db, submitted, sizes[submitted]))
                    pending[fut] = submitted
                    submitted += 1
                done, _ = wait(pending, return_when=FIRST_COMPLETED)
                for fut in done:
                    del pending[fut]
                    idx, stats = fut.result()
                    buffered[idx] = stats
                while not stop and next_commit in buffered:
                    if committed(buffered.pop(next_commit)):
                        stop = True
                    next_commit += 1

    frames = totals["frames"]
    return PointStats(
        snr_db=snr_db, frames=frames,
        frame_errors=totals["frame_errors"], bit_errors=totals["bit_errors"],
        fer=totals["frame_errors"] / frames if frames else 0.0,
        ber=totals["bit_errors"] / (frames * _info_len(campaign)) if frames else 0.0,
        avg_add=totals["add"] / frames if frames else 0.0,
        avg_cmp=totals["cmp"] / frames if frames else 0.0,
        avg_iter=totals["iters"] / frames if frames else 0.0,
        peak_pool=totals["pool"] / frames if frames else 0.0,
        seconds=time.perf_counter() - t0)


def _info_len(campaign: Campaign) -> int:
    spec = load_spec(campaign.spec_text)
    return spec.k


def run_campaign(campaign: Campaign) -> list[PointStats]:
    ctx = _Context(campaign) if campaign.workers <= 1 else None
    return [run_point(campaign, snr, i, ctx)
            for i, snr in enumerate(campaign.snrs)]


def write_csv(points: list[PointStats], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for p in points:
            fh.write(p.csv_row() + "\n")


def write_json(campaign: Campaign, points: list[PointStats], path: str) -> None:
    doc = {"campaign": asdict(campaign),
           "points": [asdict(p) for p in points]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_csv(path: str) -> list[dict]:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for line in fh:
            vals = line.strip().split(",")
            rows.append({k: float(v) for k, v in zip(header, vals)})
    return rows
