"""Burst probabilities and BER bounds over the binary symmetric channel.

Everything is evaluated in the log domain (log-gamma binomials, max-shifted
summation) because the individual terms underflow doubles at small ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .codec import GeneratorSpec
from .spectrum import ActiveSpectrum, SpectrumSummary, summarize


class BoundsDomainError(ValueError):
    pass


@dataclass(frozen=True)
class BurstQuery:
    s: int
    w: int
    p: float
    n: int = 2

    def __post_init__(self):
        check_p(self.p)
        if self.s < 0 or not 0 <= self.w <= self.n * self.s:
            raise BoundsDomainError(
                f"burst weight {self.w} outside [0, {self.n * self.s}] for s={self.s}")


def check_p(p: float) -> None:
    if not 0.0 <= p < 0.5:
        raise BoundsDomainError(f"crossover probability {p} outside [0, 1/2)")


def _log_binom(a, b):
    return gammaln(np.add(a, 1)) - gammaln(np.add(b, 1)) - gammaln(np.subtract(a, b) + 1)


def _log_class(e_all, e1, L, w, p):
    """Vectorised log class probability; arguments already validated."""
    e_all = np.asarray(e_all, dtype=float)
    e1 = np.asarray(e1, dtype=float)
    out = _log_binom(w, e1) + _log_binom(L - w, e_all - e1)
    if p == 0.0:
        return np.where(e_all > 0, -np.inf, out)
    return out + e_all * math.log(p) + (L - e_all) * math.log1p(-p)


def log_class_prob(e_all: int, e1: int, q: BurstQuery) -> float:
    """log of C(w, e1) C(ns - w, e_all - e1) p^e_all (1-p)^(ns - e_all)."""
    L = q.n * q.s
    if not (0 <= e1 <= min(q.w, e_all) and 0 <= e_all - e1 <= L - q.w):
        raise BoundsDomainError(
            f"error class (e_all={e_all}, e1={e1}) impossible for s={q.s}, w={q.w}")
    return float(_log_class(e_all, e1, L, q.w, q.p))


@lru_cache(maxsize=65536)
def _log_p_burst(s: int, w: int, p: float, n: int) -> float:
    L = n * s
    half = w // 2
    # majority of the burst's ones flipped: i > w/2, w/2 < i1 <= min(w, i)
    i = np.arange(half + 1, L + 1)
    i1 = np.arange(half + 1, w + 1)
    I, I1 = np.meshgrid(i, i1, indexing="ij")
    # terms with i - i1 > L - w have a zero binomial and are dropped
    keep = (I1 <= I) & (I - I1 <= L - w)
    parts = [_log_class(I[keep], I1[keep], L, w, p)]
    if w % 2 == 0:
        it = np.arange(half, L - half + 1)
        parts.append(_log_class(it, np.full(it.shape, half), L, w, p) - math.log(2.0))
    terms = np.concatenate(parts)
    if terms.size == 0:
        return -math.inf
    return float(logsumexp(terms))


def log_p_burst(q: BurstQuery) -> float:
    return _log_p_burst(int(q.s), int(q.w), float(q.p), int(q.n))


def p_burst(q: BurstQuery) -> float:
    """Probability that a burst of ``s`` tuples and weight ``w`` is decoded wrongly.

    A tie (exactly half of an even-weight burst flipped) counts one half.
    """
    return math.exp(log_p_burst(q))


def p_low(j: int, p: float, a_j: int, m: int, n: int = 2) -> float:
    """Lower estimate of the probability of a burst of length ``j``."""
    check_p(p)
    q = BurstQuery(j, a_j, p, n)
    return math.exp(4 * m * math.log1p(-p) + log_p_burst(q))


def _log_p_up(j: int, p: float, spectrum: ActiveSpectrum) -> float:
    n = spectrum.code.n
    terms = [math.log(c) + log_p_burst(BurstQuery(j, w, p, n)) for w, c in spectrum.entries(j)]
    return float(logsumexp(terms))


def p_up(j: int, p: float, spectrum: ActiveSpectrum) -> float:
    """Upper estimate of the probability of a burst of length ``j``."""
    check_p(p)
    return math.exp(_log_p_up(j, p, spectrum))


def ber_low(p: float, summary: SpectrumSummary, m: int, n: int = 2) -> float:
    check_p(p)
    return summary.w_min * summary.N_wmin / n * p_low(summary.j_wmin, p, summary.w_min, m, n)


def ber_up(p: float, spectrum: ActiveSpectrum, J: Optional[int] = None) -> float:
    """Sum over burst lengths ``j <= J`` (default: all), clamped to 1."""
    check_p(p)
    if not spectrum:
        raise BoundsDomainError("empty spectrum")
    n = spectrum.code.n
    lengths = [j for j in spectrum.lengths if J is None or j <= J]
    if not lengths:
        return 0.0
    terms = [math.log(spectrum.max_weight(j) / n) + _log_p_up(j, p, spectrum) for j in lengths]
    return min(math.exp(logsumexp(terms)), 1.0)


@dataclass(frozen=True, eq=False)
class BoundsCurve:
    code: GeneratorSpec
    grid: np.ndarray
    ber_low: np.ndarray
    ber_up: np.ndarray
    J_used: int
    spectrum_id: str
    summary: SpectrumSummary


def curve(spec: GeneratorSpec, spectrum: ActiveSpectrum, grid: Sequence[float]) -> BoundsCurve:
    if spectrum.code.name != spec.name:
        raise BoundsDomainError(f"spectrum is for {spectrum.code.name}, not {spec.name}")
    grid = np.asarray(grid, dtype=float).reshape(-1)
    for p in grid:
        check_p(p)
    summary = summarize(spectrum)
    low = np.array([ber_low(p, summary, spec.m, spec.n) for p in grid])
    up = np.array([ber_up(p, spectrum) for p in grid])
    return BoundsCurve(spec, grid, low, up, spectrum.J_max, spectrum.digest, summary)
