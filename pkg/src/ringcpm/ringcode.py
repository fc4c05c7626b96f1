"""Arithmetic over Z_M: ring convolutional encoding and periodic puncturing."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeneratorMatrix",
    "PunctureMatrix",
    "RingState",
    "parse_generator",
    "parse_puncture_octal",
    "format_puncture_octal",
    "encode",
    "puncture",
]


@dataclass(frozen=True)
class GeneratorMatrix:
    """Rate-1/n feedforward generator over Z_M.

    Row i holds the coefficients (g_0^i, ..., g_m^i) of the i-th output
    polynomial, constant term first.  All coefficients are reduced mod M.
    """

    M: int
    coeffs: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.M < 2:
            raise ValueError(f"modulus must be >= 2, got {self.M}")
        if not self.coeffs:
            raise ValueError("generator needs at least one output polynomial")
        width = len(self.coeffs[0])
        if width < 1 or any(len(row) != width for row in self.coeffs):
            raise ValueError("all generator rows must share one length >= 1")
        for row in self.coeffs:
            for c in row:
                if not 0 <= c < self.M:
                    raise ValueError(f"coefficient {c} outside Z_{self.M}")
        if width > 1 and all(row[-1] == 0 for row in self.coeffs):
            raise ValueError("memory is not exact: every degree-m coefficient is zero")

    @property
    def n(self) -> int:
        return len(self.coeffs)

    @property
    def m(self) -> int:
        return len(self.coeffs[0]) - 1

    @property
    def state_count(self) -> int:
        return self.M ** self.m


@dataclass(frozen=True)
class PunctureMatrix:
    """n x p keep/kill pattern; 1 = transmit, column index = step mod p."""

    keep: tuple[tuple[int, ...], ...]
    allow_empty_columns: bool = False

    def __post_init__(self):
        if not self.keep or not self.keep[0]:
            raise ValueError("puncture matrix must have at least one row and column")
        p = len(self.keep[0])
        if any(len(row) != p for row in self.keep):
            raise ValueError("ragged puncture matrix")
        for row in self.keep:
            for b in row:
                if b not in (0, 1):
                    raise ValueError("puncture entries must be 0 or 1")
        if not self.allow_empty_columns:
            for c in range(p):
                if all(row[c] == 0 for row in self.keep):
                    raise ValueError(
                        f"column {c} keeps no symbol; an information symbol with no "
                        "channel output breaks MLSD observability "
                        "(set allow_empty_columns=True to override)"
                    )

    @property
    def n(self) -> int:
        return len(self.keep)

    @property
    def p(self) -> int:
        return len(self.keep[0])

    @property
    def s(self) -> int:
        return sum(sum(row) for row in self.keep)

    @property
    def rate(self) -> float:
        return self.p / self.s

    def kept_rows(self, column: int) -> tuple[int, ...]:
        """Row indices transmitted at step `column` (mod p), in row order."""
        c = column % self.p
        return tuple(i for i in range(self.n) if self.keep[i][c])

    def column_weight(self, column: int) -> int:
        return len(self.kept_rows(column))

    def shifted(self, by: int) -> "PunctureMatrix":
        """Cyclically shift all columns left by `by` positions."""
        p = self.p
        by %= p
        keep = tuple(tuple(row[(c + by) % p] for c in range(p)) for row in self.keep)
        return PunctureMatrix(keep, self.allow_empty_columns)

    def shift_class(self) -> tuple[tuple[tuple[int, ...], ...], ...]:
        """All distinct cyclic column shifts of this pattern."""
        return tuple(sorted({self.shifted(c).keep for c in range(self.p)}))


def no_puncturing(n: int) -> PunctureMatrix:
    """p=1 all-ones pattern (identity passthrough)."""
    return PunctureMatrix(tuple((1,) for _ in range(n)))


@dataclass(frozen=True)
class RingState:
    """The m most recent encoder inputs, most recent first."""

    mem: tuple[int, ...]
    M: int = 4

    def __post_init__(self):
        for v in self.mem:
            if not 0 <= v < self.M:
                raise ValueError(f"state symbol {v} outside Z_{self.M}")

    @property
    def index(self) -> int:
        return sum(v * self.M ** t for t, v in enumerate(self.mem))

    @classmethod
    def zero(cls, m: int, M: int) -> "RingState":
        return cls((0,) * m, M)

    @classmethod
    def from_index(cls, idx: int, m: int, M: int) -> "RingState":
        if not 0 <= idx < M ** m:
            raise ValueError(f"state index {idx} out of range for M^m={M ** m}")
        return cls(tuple((idx // M ** t) % M for t in range(m)), M)


_TERM = re.compile(r"^([0-9]+)?\s*(?:(D)(?:\^([0-9]+))?)?$")


def _parse_polynomial(text: str, M: int) -> dict[int, int]:
    """One polynomial in D, e.g. '1+D+D^2' or '2+2D+D^2' or 'D'."""
    body = text.strip()
    if not body:
        raise ValueError("empty polynomial")
    coeffs: dict[int, int] = {}
    for term in body.replace("-", "+-").split("+"):
        term = term.strip()
        if not term:
            continue
        neg = term.startswith("-")
        if neg:
            term = term[1:].strip()
        mm = _TERM.match(term.replace(" ", ""))
        if not mm or (mm.group(1) is None and mm.group(2) is None):
            raise ValueError(f"malformed polynomial term {term!r}")
        coef = int(mm.group(1)) if mm.group(1) is not None else 1
        if mm.group(2) is None:
            deg = 0
        else:
            deg = int(mm.group(3)) if mm.group(3) is not None else 1
        if neg:
            coef = -coef
        coeffs[deg] = (coeffs.get(deg, 0) + coef) % M
    return coeffs


def parse_generator(text: str, M: int) -> GeneratorMatrix:
    """Parse a generator list like "[1+D+D^2; 1+D^2]" over Z_M.

    Polynomials are separated by ';' (or ','); surrounding brackets are
    optional.  Coefficients reduce mod M; memory m is the largest degree
    present in any row.
    """
    body = text.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    parts = [p for p in re.split(r"[;,]", body) if p.strip()]
    if not parts:
        raise ValueError("generator list is empty")
    polys = [_parse_polynomial(p, M) for p in parts]
    m = max((max(p) for p in polys if p), default=0)
    coeffs = tuple(
        tuple(poly.get(d, 0) for d in range(m + 1)) for poly in polys
    )
    return GeneratorMatrix(M, coeffs)


def parse_puncture_octal(text: str, p: int, n: int | None = None) -> PunctureMatrix:
    """Parse "(a,b,...)_o" octal row notation into an n x p keep matrix.

    Row i is the binary expansion of the i-th octal value, left-padded to
    width p; the leftmost bit is the first position of the period and 0
    marks a punctured symbol.
    """
    if p < 1:
        raise ValueError("period must be >= 1")
    body = text.strip()
    mm = re.match(r"^\(?\s*([0-7\s,]+?)\s*\)?\s*(?:_?[oO])?$", body)
    if not mm:
        raise ValueError(f"malformed octal puncture spec {text!r}")
    rows_text = [t.strip() for t in mm.group(1).split(",") if t.strip()]
    if not rows_text:
        raise ValueError("no octal rows found")
    if n is not None and len(rows_text) != n:
        raise ValueError(f"expected {n} rows, got {len(rows_text)}")
    keep = []
    for t in rows_text:
        val = int(t, 8)
        if val >= (1 << p):
            raise ValueError(f"octal row {t} does not fit in period {p}")
        bits = tuple((val >> (p - 1 - c)) & 1 for c in range(p))
        keep.append(bits)
    return PunctureMatrix(tuple(keep))


def format_puncture_octal(P: PunctureMatrix) -> str:
    """Inverse of parse_puncture_octal for the same row/bit convention."""
    rows = []
    for row in P.keep:
        val = 0
        for b in row:
            val = (val << 1) | b
        rows.append(f"{val:o}")
    return "(" + ",".join(rows) + ")_o"


def encode(
    G: GeneratorMatrix,
    symbols,
    start: RingState | None = None,
) -> np.ndarray:
    """Encode Z_M input symbols; returns an (L, n) array of codewords.

    Output i of step t is R_M(sum_j g_j^i * u_{t-j}) with the start state
    supplying u at negative times.
    """
    u = np.asarray(symbols, dtype=np.int64)
    if u.ndim != 1:
        raise ValueError("input must be a 1-D symbol sequence")
    if u.size and (u.min() < 0 or u.max() >= G.M):
        raise ValueError(f"input symbols must lie in Z_{G.M}")
    m = G.m
    if start is None:
        start = RingState.zero(m, G.M)
    if len(start.mem) != m or start.M != G.M:
        raise ValueError("start state does not match generator memory/modulus")
    # u padded with the start state so u_pad[t+m-j] = u_{t-j}
    u_pad = np.concatenate([np.asarray(start.mem[::-1], dtype=np.int64), u])
    out = np.zeros((u.size, G.n), dtype=np.int64)
    for i, row in enumerate(G.coeffs):
        acc = np.zeros(u.size, dtype=np.int64)
        for j, g in enumerate(row):
            if g:
                acc += g * u_pad[m - j : m - j + u.size]
        out[:, i] = acc % G.M
    return out


def encoder_step(G: GeneratorMatrix, state_index: int, u: int) -> tuple[np.ndarray, int]:
    """Single-step encode from a packed state index; returns (outputs, next index)."""
    M, m = G.M, G.m
    mem = [(state_index // M ** t) % M for t in range(m)]
    ys = np.empty(G.n, dtype=np.int64)
    for i, row in enumerate(G.coeffs):
        acc = row[0] * u
        for d in range(1, m + 1):
            acc += row[d] * mem[d - 1]
        ys[i] = acc % M
    nxt = u + M * (state_index % (M ** max(m - 1, 0))) if m > 0 else 0
    if m == 0:
        nxt = 0
    return ys, nxt


def puncture(codewords, P: PunctureMatrix, phase: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Apply the keep pattern; returns (flat kept symbols, kept count per step).

    Column `phase + t mod p` selects the kept rows of step t in row order.
    """
    cw = np.asarray(codewords, dtype=np.int64)
    if cw.ndim != 2 or cw.shape[1] != P.n:
        raise ValueError(f"codeword width must equal P.n={P.n}")
    kept: list[int] = []
    counts = np.empty(cw.shape[0], dtype=np.int64)
    for t in range(cw.shape[0]):
        rows = P.kept_rows(phase + t)
        counts[t] = len(rows)
        kept.extend(int(cw[t, i]) for i in rows)
    return np.asarray(kept, dtype=np.int64), counts
