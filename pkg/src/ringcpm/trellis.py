"""Joint trellis of the punctured ring encoder cascaded with the CPE.

The trellis is periodically time-varying: section j applies puncture column
j, so a branch spans k_j channel intervals (the column weight) and the CPE
consumes the kept symbols in encoder row order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from io import StringIO

import numpy as np

from .cpm import CpeState, CpmParams, cpe_step, waveform_bank
from .ringcode import GeneratorMatrix, PunctureMatrix

__all__ = ["JointTrellis", "TrellisSection", "build_trellis", "section_schedule"]


@dataclass(frozen=True)
class TrellisSection:
    """One period phase: per (state, input) the successor and kept symbols."""

    phase: int
    kept_rows: tuple[int, ...]
    next_state: np.ndarray = field(repr=False)   # (S, M) int32
    kept_symbols: np.ndarray = field(repr=False)  # (S, M, k) int8
    filter_ids: np.ndarray = field(repr=False)    # (S, M, k) int32 into waveform bank
    in_state: np.ndarray = field(repr=False)      # (S, M) int32 predecessors
    in_input: np.ndarray = field(repr=False)      # (S, M) int8 inputs on incoming branches

    @property
    def k(self) -> int:
        return len(self.kept_rows)


@dataclass(frozen=True)
class JointTrellis:
    generator: GeneratorMatrix
    puncture: PunctureMatrix
    cpm: CpmParams
    sections: tuple[TrellisSection, ...]

    @property
    def M(self) -> int:
        return self.generator.M

    @property
    def p(self) -> int:
        return self.puncture.p

    @property
    def state_count(self) -> int:
        return self.generator.state_count * self.cpm.cpe_state_count

    @property
    def symbols_per_period(self) -> int:
        return self.puncture.s

    @property
    def rate(self) -> float:
        return self.puncture.rate

    def state_index(self, cc: int, cpe: int) -> int:
        return cc * self.cpm.cpe_state_count + cpe

    def split_state(self, state: int) -> tuple[int, int]:
        return divmod(state, self.cpm.cpe_state_count)

    def interval_counts(self, n_steps: int, phase: int = 0) -> np.ndarray:
        """Kept channel intervals per step for n_steps starting at `phase`."""
        return np.array(
            [self.sections[(phase + t) % self.p].k for t in range(n_steps)],
            dtype=np.int64,
        )

    def path(
        self, symbols, start_state: int = 0, phase: int = 0
    ) -> tuple[np.ndarray, int]:
        """Walk the trellis; returns (filter id per channel interval, end state)."""
        fids: list[int] = []
        s = start_state
        for t, u in enumerate(np.asarray(symbols, dtype=np.int64)):
            sec = self.sections[(phase + t) % self.p]
            fids.extend(int(f) for f in sec.filter_ids[s, u])
            s = int(sec.next_state[s, u])
        return np.asarray(fids, dtype=np.int64), s

    def synthesize(self, symbols, start_state: int = 0, phase: int = 0) -> np.ndarray:
        """Baseband sample stream for an input sequence (one row per interval)."""
        fids, _ = self.path(symbols, start_state, phase)
        bank = waveform_bank(self.cpm)
        return bank[fids].reshape(-1)

    def dump(self) -> str:
        """Structured text of every branch, for golden tests."""
        out = StringIO()
        cpe_n = self.cpm.cpe_state_count
        for sec in self.sections:
            out.write(f"section {sec.phase} kept_rows={list(sec.kept_rows)}\n")
            for s in range(self.state_count):
                cc, cpe = divmod(s, cpe_n)
                for u in range(self.M):
                    kept = ",".join(str(int(v)) for v in sec.kept_symbols[s, u])
                    out.write(
                        f"  state={s}(cc={cc},cpe={cpe}) u={u} -> "
                        f"next={int(sec.next_state[s, u])} kept=[{kept}]\n"
                    )
        return out.getvalue()


def build_trellis(
    G: GeneratorMatrix, P_mat: PunctureMatrix, params: CpmParams
) -> JointTrellis:
    """Construct the period of sections for the PRCC/CPE cascade."""
    if G.M != params.M:
        raise ValueError(
            f"code ring Z_{G.M} and CPM alphabet size {params.M} must coincide"
        )
    if P_mat.n != G.n:
        raise ValueError(f"puncture rows {P_mat.n} != generator outputs {G.n}")
    M, m = G.M, G.m
    ncc = G.state_count
    cpe_n = params.cpe_state_count
    S = ncc * cpe_n

    # one-step encoder tables
    enc_next = np.empty((ncc, M), dtype=np.int32)
    enc_out = np.empty((ncc, M, G.n), dtype=np.int64)
    for cc in range(ncc):
        mem = [(cc // M ** t) % M for t in range(m)]
        for u in range(M):
            for i, row in enumerate(G.coeffs):
                acc = row[0] * u
                for d in range(1, m + 1):
                    acc += row[d] * mem[d - 1]
                enc_out[cc, u, i] = acc % M
            enc_next[cc, u] = (u + M * (cc % M ** (m - 1))) if m > 0 else 0

    # CPE one-step tables
    cpe_next = np.empty((cpe_n, M), dtype=np.int32)
    for idx in range(cpe_n):
        st = CpeState.from_index(idx, params)
        for u in range(M):
            cpe_next[idx, u] = cpe_step(st, u, params).index(params)

    sections = []
    for j in range(P_mat.p):
        rows = P_mat.kept_rows(j)
        k = len(rows)
        next_state = np.empty((S, M), dtype=np.int32)
        kept_symbols = np.empty((S, M, k), dtype=np.int8)
        filter_ids = np.empty((S, M, k), dtype=np.int32)
        for cc in range(ncc):
            for u in range(M):
                kept = [int(enc_out[cc, u, i]) for i in rows]
                ncc_next = enc_next[cc, u]
                for cpe in range(cpe_n):
                    s = cc * cpe_n + cpe
                    c = cpe
                    for i, sym in enumerate(kept):
                        kept_symbols[s, u, i] = sym
                        filter_ids[s, u, i] = c * M + sym
                        c = cpe_next[c, sym]
                    next_state[s, u] = ncc_next * cpe_n + c
        in_state = np.empty((S, M), dtype=np.int32)
        in_input = np.empty((S, M), dtype=np.int8)
        fill = np.zeros(S, dtype=np.int64)
        for s in range(S):
            for u in range(M):
                t = next_state[s, u]
                in_state[t, fill[t]] = s
                in_input[t, fill[t]] = u
                fill[t] += 1
        if not np.all(fill == M):
            raise AssertionError("trellis is not M-regular; incoming degree mismatch")
        sections.append(
            TrellisSection(j, rows, next_state, kept_symbols, filter_ids, in_state, in_input)
        )
    return JointTrellis(G, P_mat, params, tuple(sections))


def section_schedule(trellis: JointTrellis, t: int) -> TrellisSection:
    """Section applied at step t (period indexing)."""
    if t < 0:
        raise ValueError("step index must be nonnegative")
    return trellis.sections[t % trellis.p]
