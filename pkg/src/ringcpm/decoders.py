"""Branch metrics, Viterbi MLSD, and log-domain BCJR on the joint trellis.

All branches of a section span the same number of channel intervals, so the
constant-envelope signals have equal energy per step and the correlation
Re<r, s> is a valid maximum-likelihood metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cpm import waveform_bank
from .trellis import JointTrellis

__all__ = ["MetricTable", "branch_metrics", "viterbi_mlsd", "bcjr_app", "hard_decision"]

TERMINATIONS = ("zero-tail", "truncate")


@dataclass(frozen=True)
class MetricTable:
    """Per step and branch: correlation metric over the branch's intervals."""

    metrics: np.ndarray = field(repr=False)  # (steps, S, M) float64
    phase: int = 0

    @property
    def n_steps(self) -> int:
        return self.metrics.shape[0]


def branch_metrics(
    received: np.ndarray, trellis: JointTrellis, phase: int = 0
) -> MetricTable:
    """Matched-filter-bank correlations accumulated per branch.

    `received` holds complex baseband samples for a whole number of steps
    starting at period position `phase`.  Filter outputs are shared between
    branches that reuse a waveform.
    """
    n_sps = trellis.cpm.n_sps
    r = np.asarray(received, dtype=np.complex128).reshape(-1)
    if r.size % n_sps:
        raise ValueError("received length is not a whole number of intervals")
    n_int = r.size // n_sps
    # how many steps fit
    steps = 0
    acc = 0
    while True:
        k = trellis.sections[(phase + steps) % trellis.p].k
        if acc + k > n_int:
            break
        acc += k
        steps += 1
        if acc == n_int:
            break
    if acc != n_int:
        raise ValueError("received length is not a whole number of trellis steps")

    bank = waveform_bank(trellis.cpm)
    dt = trellis.cpm.T / n_sps
    # (intervals, filters) correlation table
    F = (r.reshape(n_int, n_sps) @ bank.conj().T).real * dt

    S, M = trellis.state_count, trellis.M
    metrics = np.zeros((steps, S, M))
    off = 0
    for t in range(steps):
        sec = trellis.sections[(phase + t) % trellis.p]
        for i in range(sec.k):
            metrics[t] += F[off + i, sec.filter_ids[:, :, i]]
        off += sec.k
    return MetricTable(metrics, phase)


def viterbi_mlsd(
    trellis: JointTrellis,
    table: MetricTable,
    termination: str = "zero-tail",
    start_state: int = 0,
) -> np.ndarray:
    """Maximum-metric path through the time-varying trellis.

    With 'zero-tail' the survivor is chosen among states whose encoder part
    is zero (any CPE phase); 'truncate' takes the best state overall.  Ties
    resolve to the smallest state index.
    """
    if termination not in TERMINATIONS:
        raise ValueError(f"unknown termination {termination!r}")
    mt = table.metrics
    n_steps, S, M = mt.shape
    if n_steps == 0:
        raise ValueError("empty metric table")
    NEG = -np.inf
    path_metric = np.full(S, NEG)
    path_metric[start_state] = 0.0
    back = np.empty((n_steps, S), dtype=np.int8)
    for t in range(n_steps):
        sec = trellis.sections[(table.phase + t) % trellis.p]
        cand = path_metric[sec.in_state] + mt[t][sec.in_state, sec.in_input]
        best = np.argmax(cand, axis=1)
        path_metric = cand[np.arange(S), best]
        back[t] = best
    if termination == "zero-tail":
        cpe_n = trellis.cpm.cpe_state_count
        allowed = np.arange(S)[np.arange(S) // cpe_n == 0]
        end = int(allowed[np.argmax(path_metric[allowed])])
    else:
        end = int(np.argmax(path_metric))
    # trace back through stored predecessor slots
    decided = np.empty(n_steps, dtype=np.int64)
    s = end
    for t in range(n_steps - 1, -1, -1):
        sec = trellis.sections[(table.phase + t) % trellis.p]
        slot = back[t, s]
        decided[t] = sec.in_input[s, slot]
        s = int(sec.in_state[s, slot])
    return decided


def bcjr_app(
    trellis: JointTrellis,
    table: MetricTable,
    priors: np.ndarray | None,
    n0: float,
    start_state: int = 0,
    termination: str = "zero-tail",
) -> np.ndarray:
    """Per-step symbol posteriors via log-domain forward/backward recursions.

    Branch weight is log prior(u) + 2 * metric / N0 (equal-energy signals).
    Returns an (steps, M) array of probabilities summing to one per step.
    """
    if n0 <= 0:
        raise ValueError("noise density must be positive")
    mt = table.metrics
    n_steps, S, M = mt.shape
    if priors is None:
        logp = np.full((n_steps, M), -np.log(M))
    else:
        pr = np.asarray(priors, dtype=np.float64)
        if pr.shape != (n_steps, M):
            raise ValueError("priors must have shape (steps, M)")
        if np.any(pr < 0) or not np.allclose(pr.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("priors must be distributions per step")
        with np.errstate(divide="ignore"):
            logp = np.log(pr)

    NEG = -np.inf
    alpha = np.full((n_steps + 1, S), NEG)
    alpha[0, start_state] = 0.0
    gam = 2.0 / n0
    for t in range(n_steps):
        sec = trellis.sections[(table.phase + t) % trellis.p]
        w = alpha[t][sec.in_state] + gam * mt[t][sec.in_state, sec.in_input] \
            + logp[t][sec.in_input]
        a = _logsumexp2(w)
        alpha[t + 1] = a - _logsumexp1(a)

    beta = np.full((n_steps + 1, S), NEG)
    if termination == "zero-tail":
        cpe_n = trellis.cpm.cpe_state_count
        zero_cc = np.arange(S) // cpe_n == 0
        beta[n_steps, zero_cc] = 0.0
    else:
        beta[n_steps, :] = 0.0
    for t in range(n_steps - 1, -1, -1):
        sec = trellis.sections[(table.phase + t) % trellis.p]
        # forward-indexed: from state s with input u to next_state
        w = beta[t + 1][sec.next_state] + gam * mt[t] + logp[t][None, :]
        b = _logsumexp2(w)
        beta[t] = b - _logsumexp1(b)

    post = np.empty((n_steps, M))
    for t in range(n_steps):
        sec = trellis.sections[(table.phase + t) % trellis.p]
        w = (
            alpha[t][:, None]
            + gam * mt[t]
            + logp[t][None, :]
            + beta[t + 1][sec.next_state]
        )
        ls = _logsumexp1(w.reshape(-1))
        post[t] = np.exp(_logsumexp0(w) - ls)
    return post


def _logsumexp0(w: np.ndarray) -> np.ndarray:
    """logsumexp over axis 0 of a 2-D array."""
    mx = np.max(w, axis=0)
    out = np.full(w.shape[1], -np.inf)
    ok = np.isfinite(mx)
    if np.any(ok):
        out[ok] = mx[ok] + np.log(np.exp(w[:, ok] - mx[ok]).sum(axis=0))
    return out


def _logsumexp1(w: np.ndarray) -> float:
    mx = float(np.max(w))
    if not np.isfinite(mx):
        return -np.inf
    return mx + float(np.log(np.exp(w - mx).sum()))


def _logsumexp2(w: np.ndarray) -> np.ndarray:
    """logsumexp over the last axis of a 2-D array."""
    mx = np.max(w, axis=1)
    out = np.full(w.shape[0], -np.inf)
    ok = np.isfinite(mx)
    if np.any(ok):
        out[ok] = mx[ok] + np.log(
            np.exp(w[ok] - mx[ok, None]).sum(axis=1)
        )
    return out


def hard_decision(app: np.ndarray) -> np.ndarray:
    """Per-step argmax of the posteriors; ties resolve to the smallest symbol."""
    app = np.asarray(app)
    if app.ndim != 2:
        raise ValueError("APP array must be 2-D (steps, M)")
    return np.argmax(app, axis=1).astype(np.int64)
