"""Continuous-phase encoder, memoryless modulator, and distance increments.

The modulator uses the tilted-phase decomposition: the phase state lives in
Z_P and one channel symbol u in Z_M advances the phase by 2*pi*h*u.  Pairwise
waveform distances only involve phase differences, so they match the physical
(untilted) modulator exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "CpmParams",
    "CpeState",
    "BranchWaveform",
    "cpe_step",
    "modulate",
    "waveform_bank",
    "interval_nsed_increment",
    "event_nsed",
]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class CpmParams:
    """CPM scheme parameters; REC (rectangular frequency pulse) only."""

    M: int
    h_num: int
    h_den: int
    L: int = 1
    pulse: str = "REC"
    T: float = 1.0
    n_sps: int = 8

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("M must be >= 2")
        frac = Fraction(self.h_num, self.h_den)
        if (frac.numerator, frac.denominator) != (self.h_num, self.h_den):
            raise ValueError(f"h={self.h_num}/{self.h_den} is not irreducible")
        if self.L < 1:
            raise ValueError("pulse length L must be >= 1")
        if self.pulse != "REC":
            raise ValueError(f"unsupported pulse family {self.pulse!r}")
        if self.n_sps < 4:
            raise ValueError("need at least 4 samples per symbol")
        if self.T <= 0:
            raise ValueError("symbol duration must be positive")

    @property
    def h(self) -> float:
        return self.h_num / self.h_den

    @property
    def P(self) -> int:
        return self.h_den

    @property
    def corr_states(self) -> int:
        return self.M ** (self.L - 1)

    @property
    def cpe_state_count(self) -> int:
        return self.P * self.corr_states

    def q(self, t: float) -> float:
        """REC phase response: t/(2LT) on [0, LT], saturating at 1/2."""
        if t <= 0.0:
            return 0.0
        lt = self.L * self.T
        if t >= lt:
            return 0.5
        return t / (2.0 * lt)


@dataclass(frozen=True)
class CpeState:
    """Phase state v in Z_P plus the L-1 most recent inputs (newest first)."""

    v: int
    corr: tuple[int, ...] = ()

    def index(self, params: CpmParams) -> int:
        if not 0 <= self.v < params.P:
            raise ValueError("phase state out of range")
        if len(self.corr) != params.L - 1:
            raise ValueError("correlative history length must be L-1")
        idx = 0
        for c in self.corr:
            if not 0 <= c < params.M:
                raise ValueError("correlative symbol out of range")
            idx = idx * params.M + c
        return self.v * params.corr_states + idx

    @classmethod
    def zero(cls, params: CpmParams) -> "CpeState":
        return cls(0, (0,) * (params.L - 1))

    @classmethod
    def from_index(cls, idx: int, params: CpmParams) -> "CpeState":
        if not 0 <= idx < params.cpe_state_count:
            raise ValueError("CPE state index out of range")
        v, r = divmod(idx, params.corr_states)
        corr = tuple(
            (r // params.M ** (params.L - 2 - k)) % params.M
            for k in range(params.L - 1)
        )
        return cls(v, corr)


def cpe_step(state: CpeState, u: int, params: CpmParams) -> CpeState:
    """Advance the CPE by one channel symbol.

    For L=1 the phase accumulates u directly; for L>1 the oldest correlative
    symbol leaves the window and enters the mod-P accumulator.
    """
    if not 0 <= u < params.M:
        raise ValueError(f"symbol {u} outside Z_{params.M}")
    if params.L == 1:
        return CpeState((state.v + u) % params.P, ())
    oldest = state.corr[-1]
    return CpeState((state.v + oldest) % params.P, (u,) + state.corr[:-1])


def branch_phase(state: CpeState, u: int, params: CpmParams, t) -> np.ndarray:
    """Tilted phase psi(t) for t in [0, T) of the interval carrying u."""
    t = np.asarray(t, dtype=np.float64)
    h = params.h
    acc = TWO_PI * h * state.v
    q = np.vectorize(params.q)
    phase = acc + 2.0 * TWO_PI * h * u * q(t)
    for k, past in enumerate(state.corr, start=1):
        if past:
            phase = phase + 2.0 * TWO_PI * h * past * q(t + k * params.T)
    return phase


@dataclass(frozen=True)
class BranchWaveform:
    """Unit-symbol-energy baseband samples for one channel interval."""

    start: CpeState
    symbol: int
    samples: np.ndarray = field(repr=False)


def modulate(state: CpeState, u: int, params: CpmParams) -> BranchWaveform:
    """Baseband samples exp(j psi(t))/sqrt(T) at interval midpoints."""
    if not 0 <= u < params.M:
        raise ValueError(f"symbol {u} outside Z_{params.M}")
    k = np.arange(params.n_sps)
    t = (k + 0.5) * params.T / params.n_sps
    psi = branch_phase(state, u, params, t)
    samples = np.exp(1j * psi) / math.sqrt(params.T)
    return BranchWaveform(state, u, samples)


@lru_cache(maxsize=32)
def waveform_bank(params: CpmParams) -> np.ndarray:
    """All interval waveforms, indexed by cpe_state_index * M + symbol."""
    bank = np.empty((params.cpe_state_count * params.M, params.n_sps), dtype=np.complex128)
    for idx in range(params.cpe_state_count):
        st = CpeState.from_index(idx, params)
        for u in range(params.M):
            bank[idx * params.M + u] = modulate(st, u, params).samples
    bank.setflags(write=False)
    return bank


def _difference_phase_coeffs(
    gamma: int, omega: int, hist: tuple[int, ...], params: CpmParams
) -> tuple[float, float]:
    """Difference phase over one interval is A + B*t/T for REC; return (A, B)."""
    h = params.h
    A = TWO_PI * h * omega
    B = 0.0
    # every active difference symbol ramps linearly with slope 2*pi*h/(L*T)
    for k, g in enumerate((gamma,) + tuple(hist)):
        if g:
            A += 2.0 * TWO_PI * h * g * params.q(k * params.T)
            B += TWO_PI * h * g / params.L
    return A, B


def interval_nsed_increment(
    gamma: int,
    omega: int,
    hist: tuple[int, ...] = (),
    params: CpmParams | None = None,
    method: str = "closed-form",
) -> float:
    """One bracketed distance summand: 1 - (1/T) * integral of cos(phi) dt.

    `gamma` is the current difference symbol, `omega` the accumulated
    difference phase state, `hist` the L-1 most recent older difference
    symbols (newest first).  Result lies in [0, 2].
    """
    if params is None:
        raise ValueError("params is required")
    if abs(gamma) > params.M - 1:
        raise ValueError(f"difference symbol {gamma} out of range")
    if len(hist) != params.L - 1:
        raise ValueError("difference history length must be L-1")
    if method == "closed-form":
        A, B = _difference_phase_coeffs(gamma, omega, hist, params)
        if B == 0.0:
            return 1.0 - math.cos(A)
        return 1.0 - (math.sin(A + B) - math.sin(A)) / B
    if method == "quadrature":
        nodes, weights = np.polynomial.legendre.leggauss(max(params.n_sps * 4, 16))
        t = 0.5 * params.T * (nodes + 1.0)
        h = params.h
        phi = TWO_PI * h * omega + 2.0 * TWO_PI * h * gamma * np.array(
            [params.q(tt) for tt in t]
        )
        for k, g in enumerate(hist, start=1):
            if g:
                phi = phi + 2.0 * TWO_PI * h * g * np.array(
                    [params.q(tt + k * params.T) for tt in t]
                )
        integral = 0.5 * float(np.dot(weights, np.cos(phi)))
        return 1.0 - integral
    raise ValueError(f"unknown method {method!r}")


def event_nsed(gamma_seq, rate: float, params: CpmParams) -> float:
    """Distance of a difference sequence, normalized to the bound kernel.

    d^2 = rate * log2(M) * sum of per-interval increments, with the
    difference phase state carried forward across intervals.
    """
    if not 0 < rate <= 1:
        raise ValueError("code rate must lie in (0, 1]")
    omega = 0
    hist = [0] * (params.L - 1)
    total = 0.0
    for g in gamma_seq:
        g = int(g)
        total += interval_nsed_increment(g, omega, tuple(hist), params)
        if params.L == 1:
            omega = (omega + g) % params.P
        else:
            omega = (omega + hist[-1]) % params.P
            hist = [g] + hist[:-1]
    return rate * math.log2(params.M) * total
