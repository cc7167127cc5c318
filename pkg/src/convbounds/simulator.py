"""Monte Carlo BER/FER measurement over the BSC with hard-decision Viterbi.

Randomness
----------
Every frame ``f`` owns two NumPy ``SeedSequence`` substreams keyed by the
master seed: ``spawn_key=(f, 0)`` draws the information bits and the tie key,
``spawn_key=(f, 1)`` drives the channel.  Bits come from ``PCG64``.  Decoder
ties are broken by the low bit of ``splitmix64(tie_key + t * S + state)``,
so a coin is only consumed where a tie actually happens.  Results therefore
depend only on (code, p, seed, frames, frame length, basis), never on how
frames are split between workers.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Union

import numba
import numpy as np
from scipy.stats import binomtest

from . import __version__
from .codec import GeneratorSpec, Trellis, build_trellis

CODEWORD_BITS = "codeword_bits"
INFO_BITS = "info_bits"
BASES = (CODEWORD_BITS, INFO_BITS)

RNG_NAME = f"numpy-{np.__version__} SeedSequence/PCG64 + splitmix64 tie coins"
BLOCK_FRAMES = 256

_INFO_STREAM = 0
_CHANNEL_STREAM = 1


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelConfig:
    p: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p < 0.5:
            raise SimulationError(f"crossover probability {self.p} outside [0, 1/2)")
        if not 0 <= self.seed < 2**64:
            raise SimulationError("seed must fit in 64 bits")


def stream_rng(seed: int, stream: Sequence[int]) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in stream))
    return np.random.Generator(np.random.PCG64(ss))


def bsc_corrupt(bits, cfg: ChannelConfig, stream: Sequence[int]) -> np.ndarray:
    """Flip each bit independently with probability ``cfg.p``."""
    bits = np.asarray(bits, dtype=np.uint8)
    if cfg.p == 0.0:
        return bits.copy()
    flips = stream_rng(cfg.seed, stream).random(bits.shape) < cfg.p
    return bits ^ flips.astype(np.uint8)


# ---------------------------------------------------------------- kernels

@numba.njit(cache=True)
def _splitmix64(x):
    z = x + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _encode_block(info, next_state, out_packed, tail_input, m):
    F, L = info.shape
    tx = np.empty((F, L + m), dtype=np.int64)
    for f in range(F):
        s = 0
        for t in range(L):
            u = info[f, t]
            tx[f, t] = out_packed[s, u]
            s = next_state[s, u]
        for t in range(L, L + m):
            u = tail_input[s]
            tx[f, t] = out_packed[s, u]
            s = next_state[s, u]
    return tx


@numba.njit(cache=True)
def _viterbi_block(rx, tie_keys, prev, prev_in, prev_out, popcount):
    """Zero-terminated hard-decision Viterbi; returns decided inputs per step."""
    F, T = rx.shape
    S = prev.shape[0]
    big = np.int64(1) << np.int64(40)
    pm = np.empty(S, dtype=np.int64)
    npm = np.empty(S, dtype=np.int64)
    dec = np.empty((T, S), dtype=np.uint8)
    out = np.empty((F, T), dtype=np.uint8)
    for f in range(F):
        key = tie_keys[f]
        pm[:] = big
        pm[0] = 0
        for t in range(T):
            r = rx[f, t]
            base = np.uint64(t) * np.uint64(S)
            for s in range(S):
                a = pm[prev[s, 0]] + popcount[prev_out[s, 0] ^ r]
                b = pm[prev[s, 1]] + popcount[prev_out[s, 1] ^ r]
                if a < b:
                    k = 0
                elif b < a:
                    k = 1
                else:
                    k = np.int64(_splitmix64(key + base + np.uint64(s)) & np.uint64(1))
                dec[t, s] = k
                npm[s] = b if k else a
            pm[:] = npm
        s = 0
        for t in range(T - 1, -1, -1):
            k = dec[t, s]
            out[f, t] = prev_in[s, k]
            s = prev[s, k]
    return out


class _Kernel:
    """Trellis tables laid out for the compiled kernels."""

    def __init__(self, trellis: Trellis):
        self.trellis = trellis
        self.prev, self.prev_in = trellis.predecessors()
        self.prev_out = trellis.out_packed[self.prev, self.prev_in].astype(np.int64)
        n = trellis.n
        self.popcount = np.array([bin(x).count("1") for x in range(1 << n)], dtype=np.int64)
        self.next_state = np.ascontiguousarray(trellis.next_state, dtype=np.int64)
        self.out_packed = np.ascontiguousarray(trellis.out_packed, dtype=np.int64)
        self.tail_input = np.ascontiguousarray(trellis.tail_input, dtype=np.int64)
        self.shifts = np.arange(n - 1, -1, -1, dtype=np.int64)

    def encode(self, info: np.ndarray) -> np.ndarray:
        return _encode_block(np.atleast_2d(info).astype(np.int64), self.next_state,
                             self.out_packed, self.tail_input, self.trellis.m)

    def decode(self, rx_packed: np.ndarray, tie_keys: np.ndarray) -> np.ndarray:
        return _viterbi_block(rx_packed, tie_keys.astype(np.uint64), self.prev, self.prev_in,
                              self.prev_out, self.popcount)

    def pack(self, bits: np.ndarray) -> np.ndarray:
        """(..., T*n) bits -> (..., T) tuple integers, first bit most significant."""
        n = self.trellis.n
        b = bits.reshape(bits.shape[:-1] + (-1, n)).astype(np.int64)
        return (b << self.shifts).sum(axis=-1)

    def unpack(self, packed: np.ndarray) -> np.ndarray:
        bits = (packed[..., None] >> self.shifts) & 1
        return bits.reshape(packed.shape[:-1] + (-1,)).astype(np.uint8)


def viterbi_decode(received, trellis: Trellis,
                   ties: Union[np.random.Generator, int, None] = None) -> np.ndarray:
    """Information bits of a closest zero-terminated codeword to ``received``.

    ``ties`` is a generator (one 64-bit key is drawn from it) or the key itself.
    """
    received = np.asarray(received, dtype=np.uint8).reshape(-1)
    n, m = trellis.n, trellis.m
    if received.size % n or received.size // n < m:
        raise SimulationError(
            f"received length {received.size} is not n*(info_len + m) with n={n}, m={m}")
    if isinstance(ties, np.random.Generator):
        key = ties.integers(0, 2**64, dtype=np.uint64)
    else:
        key = np.uint64(0 if ties is None else ties)
    kern = _Kernel(trellis)
    inputs = kern.decode(kern.pack(received)[None, :], np.array([key], dtype=np.uint64))
    return inputs[0, : received.size // n - m]


# --------------------------------------------------------------- campaign

@dataclass(frozen=True)
class SimReport:
    code: str
    p: float
    frames: int
    frame_len_tuples: int
    info_len: int
    bit_errors: int
    bits_compared: int
    frame_errors: int
    ber: float
    fer: float
    ci95: tuple[float, float]
    seed: int
    ber_basis: str
    rng: str = RNG_NAME
    tool: str = f"convbounds {__version__}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci95"] = list(self.ci95)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"


def wilson_interval(k: int, N: int, level: float = 0.95) -> tuple[float, float]:
    if N == 0:
        return (0.0, 1.0)
    ci = binomtest(k, N).proportion_ci(confidence_level=level, method="wilson")
    return (float(ci.low), float(ci.high))


def _frame_block(args) -> tuple[int, int, int]:
    trellis, p, seed, first, count, frame_len, basis = args
    kern = _Kernel(trellis)
    m, n = trellis.m, trellis.n
    info_len = frame_len - m
    cfg = ChannelConfig(p, seed)
    info = np.empty((count, info_len), dtype=np.uint8)
    keys = np.empty(count, dtype=np.uint64)
    for i in range(count):
        rng = stream_rng(seed, (first + i, _INFO_STREAM))
        info[i] = rng.integers(0, 2, info_len, dtype=np.uint8)
        keys[i] = rng.integers(0, 2**64, dtype=np.uint64)
    tx = kern.encode(info)
    if p == 0.0:
        rx = tx
    else:
        tx_bits = kern.unpack(tx)
        rx_bits = np.empty_like(tx_bits)
        for i in range(count):
            rx_bits[i] = bsc_corrupt(tx_bits[i], cfg, (first + i, _CHANNEL_STREAM))
        rx = kern.pack(rx_bits)
    decided = kern.decode(rx, keys)[:, :info_len]
    if basis == CODEWORD_BITS:
        diff = kern.unpack(kern.encode(decided) ^ tx)
    else:
        diff = decided ^ info
    per_frame = diff.sum(axis=1, dtype=np.int64)
    return int(per_frame.sum()), int(np.count_nonzero(per_frame)), count


def run_campaign(spec: GeneratorSpec, cfg: ChannelConfig, frames: int,
                 frame_len_tuples: int = 1000, ber_basis: str = CODEWORD_BITS,
                 workers: int = 1, trellis: Optional[Trellis] = None) -> SimReport:
    """Simulate ``frames`` zero-terminated frames of ``frame_len_tuples`` tuples.

    The last ``m`` tuples of each frame are the termination tail, so each
    frame carries ``frame_len_tuples - m`` information bits.
    """
    if frames < 1:
        raise SimulationError("frames must be >= 1")
    if ber_basis not in BASES:
        raise SimulationError(f"unknown BER basis {ber_basis!r}")
    if frame_len_tuples <= spec.m:
        raise SimulationError(f"frame length must exceed the memory m={spec.m}")
    trellis = trellis if trellis is not None else build_trellis(spec)
    info_len = frame_len_tuples - spec.m
    jobs = [
        (trellis, cfg.p, cfg.seed, first, min(BLOCK_FRAMES, frames - first),
         frame_len_tuples, ber_basis)
        for first in range(0, frames, BLOCK_FRAMES)
    ]
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        parts = [_frame_block(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_frame_block, jobs))
    bit_errors = sum(b for b, _, _ in parts)
    frame_errors = sum(f for _, f, _ in parts)
    per_frame = frame_len_tuples * spec.n if ber_basis == CODEWORD_BITS else info_len
    bits = frames * per_frame
    return SimReport(
        code=spec.name, p=float(cfg.p), frames=frames, frame_len_tuples=frame_len_tuples,
        info_len=info_len, bit_errors=bit_errors, bits_compared=bits,
        frame_errors=frame_errors, ber=bit_errors / bits, fer=frame_errors / frames,
        # a noiseless channel gives a certain zero, not an estimate
        ci95=(0.0, 0.0) if cfg.p == 0.0 else wilson_interval(bit_errors, bits),
        seed=cfg.seed, ber_basis=ber_basis,
    )


def default_workers() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
