"""Distance spectra of active distances.

A codeword of the subset C_f leaves the zero state at time 0, may touch the
zero state again but must leave it on the very next step, and ends when it
arrives at the zero state at time ``j``.  For each such length ``j`` we count
the codewords per Hamming weight.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from . import __version__
from .codec import GeneratorSpec, Trellis


class SpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class SpectrumSummary:
    w_min: int
    N_wmin: int
    j_wmin: int


@dataclass(frozen=True, eq=False)
class ActiveSpectrum:
    """Per-length weight enumerator, truncated at ``J_max`` tuples and ``W_max``.

    ``per_length[j]`` is a tuple of ``(weight, count)`` pairs sorted by weight.
    ``truncated[j]`` is true when some length-``j`` codeword was heavier than
    ``W_max`` and therefore left out.  ``W_max is None`` means no weight cap.
    """

    code: GeneratorSpec
    J_max: int
    W_max: Optional[int]
    per_length: Mapping[int, tuple[tuple[int, int], ...]]
    truncated: Mapping[int, bool] = field(default_factory=dict)

    @property
    def lengths(self) -> list[int]:
        return sorted(self.per_length)

    def __bool__(self) -> bool:
        return bool(self.per_length)

    def entries(self, j: int) -> tuple[tuple[int, int], ...]:
        try:
            return self.per_length[j]
        except KeyError:
            raise SpectrumError(f"no spectrum entries at length {j}") from None

    def active_distance(self, j: int) -> int:
        return self.entries(j)[0][0]

    def max_weight(self, j: int) -> int:
        return self.entries(j)[-1][0]

    def restrict(self, J: int) -> "ActiveSpectrum":
        """The same spectrum cut down to lengths ``j <= J``."""
        return ActiveSpectrum(
            self.code,
            min(J, self.J_max),
            self.W_max,
            {j: e for j, e in self.per_length.items() if j <= J},
            {j: f for j, f in self.truncated.items() if j <= J},
        )

    def to_dict(self) -> dict:
        payload = {
            "code": self.code.name,
            "n": self.code.n,
            "m": self.code.m,
            "J_max": self.J_max,
            "W_max": self.W_max,
            "truncated": {str(j): bool(f) for j, f in sorted(self.truncated.items())},
            "spectrum": {
                str(j): [[w, str(c)] for w, c in self.per_length[j]] for j in self.lengths
            },
            "tool": f"convbounds {__version__}",
        }
        payload["digest"] = _digest(payload)
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @property
    def digest(self) -> str:
        return self.to_dict()["digest"]

    @classmethod
    def from_dict(cls, data: dict, **spec_kwargs) -> "ActiveSpectrum":
        if "digest" in data and data["digest"] != _digest(data):
            raise SpectrumError("spectrum file digest mismatch (file modified?)")
        code = GeneratorSpec.parse(data["code"], **spec_kwargs)
        if code.m != data["m"] or code.n != data["n"]:
            raise SpectrumError("spectrum header disagrees with its code string")
        per_length = {
            int(j): tuple((int(w), int(c)) for w, c in rows)
            for j, rows in data["spectrum"].items()
        }
        truncated = {int(j): bool(f) for j, f in data.get("truncated", {}).items()}
        return cls(code, int(data["J_max"]), data["W_max"], per_length, truncated)

    @classmethod
    def from_json(cls, text: str, **spec_kwargs) -> "ActiveSpectrum":
        return cls.from_dict(json.loads(text), **spec_kwargs)


def _digest(payload: dict) -> str:
    body = {k: v for k, v in payload.items() if k != "digest"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _edges(trellis: Trellis):
    """All edges allowed inside a nonzero branch (no zero self-loop)."""
    for s in range(trellis.num_states):
        for u in range(2):
            ns = int(trellis.next_state[s, u])
            if s == 0 and ns == 0:
                continue
            yield s, ns, int(trellis.out_weight[s, u])


def compute_spectrum(trellis: Trellis, J_max: int = 40, W_max: Optional[int] = None) -> ActiveSpectrum:
    """Count C_f codewords per (length, weight) by dynamic programming.

    The table holds path counts per (state, weight) with one extra overflow
    column for paths heavier than ``W_max``; overflow arriving at the zero
    state marks that length as truncated.  Cost is O(J_max * 2^m * W_max).
    """
    m, n = trellis.m, trellis.n
    if J_max < m + 1:
        raise SpectrumError(f"J_max must be at least m+1 = {m + 1}")
    if W_max is not None and W_max < 1:
        raise SpectrumError("W_max must be positive")
    cap = n * J_max if W_max is None else W_max
    S, ov = trellis.num_states, cap + 1
    edges = list(_edges(trellis))

    cur = np.zeros((S, cap + 2), dtype=object)
    cur[0, 0] = 1
    per_length: dict[int, tuple[tuple[int, int], ...]] = {}
    truncated: dict[int, bool] = {}
    for j in range(1, J_max + 1):
        new = np.zeros_like(cur)
        for s, ns, w in edges:
            row = cur[s]
            if w == 0:
                new[ns] += row
                continue
            new[ns, w:ov] += row[: ov - w]
            spill = row[ov - w :].sum()
            if spill:
                new[ns, ov] += spill
        arrived = new[0]
        found = tuple((w, int(arrived[w])) for w in range(ov) if arrived[w])
        if found:
            per_length[j] = found
        if j > m:
            truncated[j] = bool(arrived[ov])
        cur = new
    return ActiveSpectrum(trellis.spec, J_max, W_max, per_length, truncated)


def active_distances(trellis: Trellis, J_max: int) -> dict[int, int]:
    """``a_j`` for every reachable length ``j <= J_max`` (min-plus DP, no cap)."""
    INF = np.iinfo(np.int64).max // 4
    S = trellis.num_states
    cur = np.full(S, INF, dtype=np.int64)
    cur[0] = 0
    edges = list(_edges(trellis))
    out = {}
    for j in range(1, J_max + 1):
        new = np.full(S, INF, dtype=np.int64)
        for s, ns, w in edges:
            if cur[s] + w < new[ns]:
                new[ns] = cur[s] + w
        if new[0] < INF:
            out[j] = int(new[0])
        cur = new
    return out


def oracle_spectrum(trellis: Trellis, J_max: int) -> ActiveSpectrum:
    """Exhaustive enumeration of input prefixes; no weight cap.

    For every length ``j`` all ``2^j`` input sequences are replayed through
    the trellis and kept when their state path satisfies the C_f rules
    literally.  Intended for ``J_max`` up to about 16.
    """
    per_length = {}
    for j in range(1, J_max + 1):
        inputs = (np.arange(1 << j)[:, None] >> np.arange(j)[None, :]) & 1
        state = np.zeros(1 << j, dtype=np.int64)
        weight = np.zeros(1 << j, dtype=np.int64)
        ok = np.ones(1 << j, dtype=bool)
        for t in range(j):
            u = inputs[:, t]
            nxt = trellis.next_state[state, u]
            weight += trellis.out_weight[state, u]
            # s_t = 0 and s_{t+1} = 0 inside the branch is forbidden (covers s_1 != 0)
            ok &= ~((state == 0) & (nxt == 0))
            state = nxt
        ok &= state == 0
        ws, counts = np.unique(weight[ok], return_counts=True)
        if len(ws):
            per_length[j] = tuple((int(w), int(c)) for w, c in zip(ws, counts))
    truncated = {j: False for j in range(trellis.m + 1, J_max + 1)}
    return ActiveSpectrum(trellis.spec, J_max, None, per_length, truncated)


def summarize(spec: ActiveSpectrum) -> SpectrumSummary:
    if not spec:
        raise SpectrumError("empty spectrum")
    w_min = min(spec.active_distance(j) for j in spec.lengths)
    N = 0
    j_min = None
    for j in spec.lengths:
        for w, c in spec.per_length[j]:
            if w == w_min:
                N += c
                if j_min is None:
                    j_min = j
    return SpectrumSummary(w_min, N, j_min)
