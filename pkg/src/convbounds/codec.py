"""Recursive systematic convolutional encoders of rate 1/n.

Generator polynomials are given in octal.  The first polynomial is the
feedback (denominator) polynomial, the remaining ones are feedforward
numerators, so the generator matrix is ``(1, g2/g1, ..., gn/g1)``.

State labels pack the register contents ``r_1 .. r_m`` with ``r_1`` as the
most significant bit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class CodeSpecError(ValueError):
    """Invalid generator polynomials or code specification string."""


def parse_octal(text: str) -> tuple[int, ...]:
    """Return the coefficients ``(g_0, ..., g_m)`` of an octal polynomial.

    The binary expansion is read with its least significant bit as the
    coefficient of ``D^0``: ``"13"`` is ``1011`` and maps to ``1 + D + D^3``.
    """
    text = text.strip()
    if not text or any(c not in "01234567" for c in text):
        raise CodeSpecError(f"not an octal polynomial: {text!r}")
    value = int(text, 8)
    if value == 0:
        raise CodeSpecError("zero polynomial")
    return tuple((value >> i) & 1 for i in range(value.bit_length()))


def _to_int(coeffs: Sequence[int]) -> int:
    return sum(int(c) << i for i, c in enumerate(coeffs))


def gf2_gcd(a: int, b: int) -> int:
    """GCD of two GF(2) polynomials encoded as integers (bit i = coeff of D^i)."""
    while b:
        db = b.bit_length()
        while a and a.bit_length() >= db:
            a ^= b << (a.bit_length() - db)
        a, b = b, a
    return a


@dataclass(frozen=True)
class GeneratorSpec:
    polys_octal: tuple[str, ...]
    coeffs: tuple[tuple[int, ...], ...]
    m: int
    n: int

    @classmethod
    def from_octal(
        cls,
        polys: Sequence[str],
        allow_noncoprime: bool = False,
        allow_unequal_degree: bool = False,
    ) -> "GeneratorSpec":
        polys = tuple(str(p).strip() for p in polys)
        if len(polys) < 2:
            raise CodeSpecError("need at least two generator polynomials")
        raw = [parse_octal(p) for p in polys]
        degrees = [len(c) - 1 for c in raw]
        if len(set(degrees)) != 1 and not allow_unequal_degree:
            raise CodeSpecError(
                f"generator polynomials must have equal degree, got {degrees}")
        if raw[0][0] != 1:
            raise CodeSpecError("feedback polynomial must have g_0 = 1")
        g = 0
        for c in raw:
            g = gf2_gcd(g, _to_int(c)) if g else _to_int(c)
        if g != 1 and not allow_noncoprime:
            raise CodeSpecError(
                f"generator polynomials are not coprime (gcd = {g:o} octal)")
        m = max(degrees)
        coeffs = tuple(c + (0,) * (m + 1 - len(c)) for c in raw)
        return cls(polys_octal=polys, coeffs=coeffs, m=m, n=len(polys))

    @classmethod
    def parse(cls, text: str, **kwargs) -> "GeneratorSpec":
        """Parse a code string such as ``"(13,17)"``."""
        match = re.fullmatch(r"\s*\(?\s*([0-7]+(?:\s*,\s*[0-7]+)+)\s*\)?\s*", text)
        if not match:
            raise CodeSpecError(f"malformed code specification: {text!r}")
        return cls.from_octal(match.group(1).split(","), **kwargs)

    @property
    def name(self) -> str:
        return "(" + ",".join(self.polys_octal) + ")"

    @property
    def num_states(self) -> int:
        return 1 << self.m

    def __str__(self) -> str:
        return self.name


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Trellis:
    """State transition table of an encoder.

    ``next_state[s, u]`` and ``output[s, u]`` (an n-bit tuple) describe the
    edge leaving state ``s`` on input bit ``u``.  ``tail_input[s]`` is the
    input that cancels the feedback in state ``s``.
    """

    spec: GeneratorSpec
    next_state: np.ndarray
    output: np.ndarray
    tail_input: np.ndarray
    out_weight: np.ndarray = field(init=False)
    out_packed: np.ndarray = field(init=False)

    def __post_init__(self):
        n = self.spec.n
        weights = self.output.sum(axis=2).astype(np.int64)
        shifts = np.arange(n - 1, -1, -1)
        packed = (self.output.astype(np.int64) << shifts).sum(axis=2)
        object.__setattr__(self, "out_weight", _frozen(weights))
        object.__setattr__(self, "out_packed", _frozen(packed))

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def n(self) -> int:
        return self.spec.n

    def predecessors(self) -> tuple[np.ndarray, np.ndarray]:
        """Per state, the two ``(prev_state, input)`` edges entering it."""
        S = self.num_states
        prev = np.full((S, 2), -1, dtype=np.int64)
        inp = np.full((S, 2), -1, dtype=np.int64)
        fill = np.zeros(S, dtype=np.int64)
        for s in range(S):
            for u in range(2):
                t = self.next_state[s, u]
                k = fill[t]
                if k >= 2:
                    raise RuntimeError(f"state {t} has more than two incoming edges")
                prev[t, k], inp[t, k] = s, u
                fill[t] += 1
        return prev, inp


def _step(spec: GeneratorSpec, regs: list[int], u: int) -> tuple[int, list[int], list[int]]:
    fb = spec.coeffs[0]
    a = u
    for i in range(1, spec.m + 1):
        a ^= fb[i] & regs[i - 1]
    out = [u]
    for g in spec.coeffs[1:]:
        bit = g[0] & a
        for i in range(1, spec.m + 1):
            bit ^= g[i] & regs[i - 1]
        out.append(bit)
    return a, out, [a] + regs[:-1]


def _regs(state: int, m: int) -> list[int]:
    return [(state >> (m - i)) & 1 for i in range(1, m + 1)]


def _state(regs: Sequence[int]) -> int:
    m = len(regs)
    return sum(r << (m - i) for i, r in enumerate(regs, start=1))


def build_trellis(spec: GeneratorSpec) -> Trellis:
    S, m, n = spec.num_states, spec.m, spec.n
    nxt = np.zeros((S, 2), dtype=np.int64)
    out = np.zeros((S, 2, n), dtype=np.uint8)
    tail = np.zeros(S, dtype=np.uint8)
    for s in range(S):
        regs = _regs(s, m)
        for u in range(2):
            a, bits, new = _step(spec, regs, u)
            nxt[s, u] = _state(new)
            out[s, u] = bits
            if a == 0:
                tail[s] = u
    return Trellis(spec, _frozen(nxt), _frozen(out), _frozen(tail))


@dataclass(frozen=True, eq=False)
class Codeword:
    tuples: np.ndarray  # shape (info_len + tail_len, n)
    info_len: int
    tail_len: int

    @property
    def bits(self) -> np.ndarray:
        return self.tuples.reshape(-1)

    def __len__(self) -> int:
        return self.tuples.shape[0]


def terminate(state: int, trellis: Trellis) -> np.ndarray:
    """Tail input bits driving ``state`` back to zero in ``m`` steps."""
    tail = np.zeros(trellis.m, dtype=np.uint8)
    for k in range(trellis.m):
        tail[k] = trellis.tail_input[state]
        state = trellis.next_state[state, tail[k]]
    assert state == 0
    return tail


def encode(info: Sequence[int], trellis: Trellis, terminated: bool = True) -> Codeword:
    info = np.asarray(info, dtype=np.uint8).reshape(-1)
    state = 0
    rows = []
    for u in info:
        rows.append(trellis.output[state, u])
        state = trellis.next_state[state, u]
    tail = terminate(state, trellis) if terminated else np.zeros(0, dtype=np.uint8)
    for u in tail:
        rows.append(trellis.output[state, u])
        state = trellis.next_state[state, u]
    tuples = np.array(rows, dtype=np.uint8).reshape(-1, trellis.n)
    return Codeword(tuples, len(info), len(tail))
