"""Reduced product-state graph, error-event enumeration, and SER bounds.

Events are ordered pairs of trellis paths that leave a common state with
differing inputs and remerge for the first time (first-return convention).
A reduced product state is (cc, cc_hat, omega[, difference history]) where
omega is the accumulated difference of the CPE phase states; distances only
depend on differences, so this reduction is exact.

Two event-source conventions are supported:

* ``all-states``: events may start at every period phase from every encoder
  state; coefficients are averaged with weight M^-m / p.  This is the union
  bound for the stationary system and is the default.
* ``zero-state``: events start only at the beginning of a puncture period
  from the all-zero encoder state.  This restricted census reproduces part
  of the published reference figures for the bundled benchmark codes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cpm import CpmParams, interval_nsed_increment
from .ringcode import GeneratorMatrix, PunctureMatrix
from .trellis import JointTrellis

__all__ = [
    "ProductGraph",
    "ErrorEventTable",
    "DminTheta",
    "build_product_graph",
    "minimum_distance",
    "enumerate_error_events",
    "theta_spectrum",
    "dmin_and_theta",
    "series_bound",
    "transfer_bound",
    "distance_profile",
    "length_weight_value",
    "BoundError",
    "DivergentBoundError",
    "SingularBoundError",
    "NonObservableCodeError",
    "EnumerationLimitError",
]

NANO = 1_000_000_000
MICRO = 1_000_000

EVENT_SOURCES = ("all-states", "zero-state")
LENGTH_WEIGHTS = ("per-step", "per-bit")


class BoundError(RuntimeError):
    pass


class DivergentBoundError(BoundError):
    """Transfer-function series diverges at this SNR (spectral radius >= 1)."""


class SingularBoundError(BoundError):
    """The (I - W) solve failed although the spectral radius looked fine."""


class NonObservableCodeError(BoundError):
    """Two distinct input sequences share one channel signal (zero-distance event)."""


class EnumerationLimitError(BoundError):
    """Event enumeration exceeded the configured size guard."""


def qfunc(x: float) -> float:
    """Gaussian tail Q(x) = 0.5 * erfc(x / sqrt(2))."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def length_weight_value(length_weight: str, M: int) -> float:
    """Per-step weight W: M^-1 ('per-step') or M^-log2(M) ('per-bit')."""
    if length_weight == "per-step":
        return 1.0 / M
    if length_weight == "per-bit":
        return float(M) ** (-math.log2(M))
    raise ValueError(f"unknown length weight {length_weight!r}")


@dataclass(frozen=True)
class ProductGraph:
    """Period-expanded reduced product graph with integer-nano edge weights."""

    generator: GeneratorMatrix
    puncture: PunctureMatrix
    cpm: CpmParams
    scale: float
    nodes_per_phase: int
    n_nodes: int
    indptr: np.ndarray = field(repr=False)
    edge_dst: np.ndarray = field(repr=False)
    edge_dtau: np.ndarray = field(repr=False)
    edge_dnano: np.ndarray = field(repr=False)
    edge_mult: np.ndarray = field(repr=False)
    diag_mask: np.ndarray = field(repr=False)

    @property
    def M(self) -> int:
        return self.generator.M

    @property
    def m(self) -> int:
        return self.generator.m

    @property
    def p(self) -> int:
        return self.puncture.p

    @property
    def ncc(self) -> int:
        return self.generator.state_count

    @property
    def P(self) -> int:
        return self.cpm.P

    @property
    def dh_count(self) -> int:
        return (2 * self.M - 1) ** (self.cpm.L - 1)

    @property
    def dh_zero(self) -> int:
        """Index of the all-zero difference history (digit M-1 in every slot)."""
        base = 2 * self.M - 1
        return (self.M - 1) * (base ** (self.cpm.L - 1) - 1) // (base - 1)

    def node_id(self, phase: int, cc: int, cch: int, omega: int, dh: int | None = None) -> int:
        if dh is None:
            dh = self.dh_zero
        local = ((cc * self.ncc + cch) * self.P + omega) * self.dh_count + dh
        return phase * self.nodes_per_phase + local

    def node_label(self, gid: int) -> tuple[int, int, int, int, int]:
        phase, local = divmod(gid, self.nodes_per_phase)
        local, dh = divmod(local, self.dh_count)
        local, omega = divmod(local, self.P)
        cc, cch = divmod(local, self.ncc)
        return phase, cc, cch, omega, dh

    def initial_node(self, phase: int, kappa: int) -> int:
        return self.node_id(phase, kappa, kappa, 0)

    def sources(self, event_source: str) -> list[tuple[int, int]]:
        if event_source == "all-states":
            return [(j, k) for j in range(self.p) for k in range(self.ncc)]
        if event_source == "zero-state":
            return [(0, 0)]
        raise ValueError(f"unknown event source {event_source!r}")

    def describe(self) -> dict:
        """Structural summary: state counts and initial/end state labels."""
        per_phase = self.nodes_per_phase
        diag0 = [
            f"({cc}{cc}0)" for cc in range(self.ncc)
        ]
        return {
            "reduced_states_per_phase": per_phase,
            "period": self.p,
            "initial_end_states": diag0,
            "transfer_states_per_phase": per_phase - self.ncc,
        }

    def out_edges(self, gid: int) -> slice:
        return slice(int(self.indptr[gid]), int(self.indptr[gid + 1]))


def _encoder_tables(G: GeneratorMatrix):
    M, m = G.M, G.m
    ncc = G.state_count
    nxt = np.empty((ncc, M), dtype=np.int64)
    out = np.empty((ncc, M, G.n), dtype=np.int64)
    for cc in range(ncc):
        mem = [(cc // M ** t) % M for t in range(m)]
        for u in range(M):
            for i, row in enumerate(G.coeffs):
                acc = row[0] * u
                for d in range(1, m + 1):
                    acc += row[d] * mem[d - 1]
                out[cc, u, i] = acc % M
            nxt[cc, u] = (u + M * (cc % M ** (m - 1))) if m > 0 else 0
    return nxt, out


def build_product_graph(trellis: JointTrellis) -> ProductGraph:
    """Edges for every (state pair, input pair) with merged multiplicities."""
    G, P_mat, params = trellis.generator, trellis.puncture, trellis.cpm
    M, m, p = G.M, G.m, P_mat.p
    ncc = G.state_count
    P = params.P
    L = params.L
    dh_count = (2 * M - 1) ** (L - 1)
    scale = P_mat.rate * math.log2(M)
    nodes_per_phase = ncc * ncc * P * dh_count
    n_nodes = p * nodes_per_phase

    max_d2 = 64.0
    if scale * 2.0 * (max(P_mat.column_weight(j) for j in range(p))) > max_d2:
        raise ValueError("distance scale too large for the integer edge encoding")

    # per-interval increments in nano units, indexed [gamma + M-1, omega, dh]
    inc_nano = np.empty((2 * M - 1, P, dh_count), dtype=np.int64)
    for g in range(-(M - 1), M):
        for om in range(P):
            for dh in range(dh_count):
                hist = _dh_tuple(dh, L, M)
                val = interval_nsed_increment(g, om, hist, params)
                inc_nano[g + M - 1, om, dh] = round(scale * val * NANO)

    enc_next, enc_out = _encoder_tables(G)

    # broadcast grids over (cc, u, cch, uh)
    cc_g, u_g, cch_g, uh_g = np.meshgrid(
        np.arange(ncc), np.arange(M), np.arange(ncc), np.arange(M), indexing="ij"
    )
    cc_f, u_f = cc_g.ravel(), u_g.ravel()
    cch_f, uh_f = cch_g.ravel(), uh_g.ravel()
    next_pair = enc_next[cc_f, u_f] * ncc + enc_next[cch_f, uh_f]
    dtau_f = (u_f != uh_f).astype(np.int8)

    srcs, dsts, dtaus, dnanos = [], [], [], []
    for j in range(p):
        rows = P_mat.kept_rows(j)
        gammas = [
            enc_out[cc_f, u_f, i] - enc_out[cch_f, uh_f, i] for i in rows
        ]
        for om in range(P):
            for dh in range(dh_count):
                w = np.full(cc_f.shape, om, dtype=np.int64)
                cur_dh = np.full(cc_f.shape, dh, dtype=np.int64)
                dn = np.zeros(cc_f.shape, dtype=np.int64)
                for gma in gammas:
                    dn += inc_nano[gma + M - 1, w, cur_dh]
                    if L == 1:
                        w = (w + gma) % P
                    else:
                        oldest = cur_dh % (2 * M - 1) - (M - 1)
                        w = (w + oldest) % P
                        cur_dh = cur_dh // (2 * M - 1) + (gma + M - 1) * (
                            (2 * M - 1) ** (L - 2)
                        )
                src_local = ((cc_f * ncc + cch_f) * P + om) * dh_count + dh
                dst_local = (next_pair * P + w) * dh_count + cur_dh
                srcs.append(j * nodes_per_phase + src_local)
                dsts.append(((j + 1) % p) * nodes_per_phase + dst_local)
                dtaus.append(dtau_f.copy())
                dnanos.append(dn)

    src = np.concatenate(srcs)
    dst = np.concatenate(dsts)
    dtau = np.concatenate(dtaus)
    dnano = np.concatenate(dnanos)

    # merge parallel edges with identical labels
    order = np.lexsort((dtau, dnano, dst, src))
    src, dst, dtau, dnano = src[order], dst[order], dtau[order], dnano[order]
    new_group = np.empty(src.size, dtype=bool)
    new_group[0] = True
    new_group[1:] = (
        (src[1:] != src[:-1])
        | (dst[1:] != dst[:-1])
        | (dnano[1:] != dnano[:-1])
        | (dtau[1:] != dtau[:-1])
    )
    idx = np.flatnonzero(new_group)
    mult = np.diff(np.append(idx, src.size)).astype(np.int64)
    src, dst, dtau, dnano = src[idx], dst[idx], dtau[idx], dnano[idx]

    indptr = np.searchsorted(src, np.arange(n_nodes + 1))

    base = 2 * M - 1
    dh_zero = (M - 1) * (base ** (L - 1) - 1) // (base - 1)
    diag = np.zeros(n_nodes, dtype=bool)
    for j in range(p):
        for cc in range(ncc):
            local = ((cc * ncc + cc) * P + 0) * dh_count + dh_zero
            diag[j * nodes_per_phase + local] = True

    return ProductGraph(
        G, P_mat, params, scale, nodes_per_phase, n_nodes,
        indptr, dst.astype(np.int64), dtau.astype(np.int8),
        dnano.astype(np.int64), mult, diag,
    )


def _dh_tuple(dh: int, L: int, M: int) -> tuple[int, ...]:
    """Decode a difference-history index into signed symbols, newest first."""
    base = 2 * M - 1
    vals = []
    for k in range(L - 1):
        vals.append((dh // base ** (L - 2 - k)) % base - (M - 1))
    return tuple(vals)


def _first_edges(graph: ProductGraph, phase: int, kappa: int):
    """Edge indices leaving the (kappa, kappa, 0) diagonal with u != uhat."""
    gid = graph.initial_node(phase, kappa)
    sl = graph.out_edges(gid)
    ids = np.arange(sl.start, sl.stop)
    return ids[graph.edge_dtau[sl] == 1]


def minimum_distance(
    graph: ProductGraph, event_source: str = "all-states"
) -> float:
    """Smallest event distance via multi-source Dijkstra over product states."""
    INF = np.int64(np.iinfo(np.int64).max)
    dist = {}
    pq: list[tuple[int, int]] = []
    for (j, k) in graph.sources(event_source):
        for e in _first_edges(graph, j, k):
            d = int(graph.edge_dnano[e])
            t = int(graph.edge_dst[e])
            if d < dist.get(t, INF):
                dist[t] = d
                heapq.heappush(pq, (d, t))
    while pq:
        d, node = heapq.heappop(pq)
        if d > dist.get(node, INF):
            continue
        if graph.diag_mask[node]:
            if d == 0:
                raise NonObservableCodeError(
                    "distinct inputs produce identical channel output"
                )
            return d / NANO
        sl = graph.out_edges(node)
        for e in range(sl.start, sl.stop):
            nd = d + int(graph.edge_dnano[e])
            t = int(graph.edge_dst[e])
            if nd < dist.get(t, INF):
                dist[t] = nd
                heapq.heappush(pq, (nd, t))
    raise BoundError("no merging error event found; graph is degenerate")


@dataclass
class ErrorEventTable:
    """Sparse census (phase, kappa, length, symbol errors, d2 micro) -> count."""

    entries: dict[tuple[int, int, int, int, int], int]
    d_cap: float
    iota_cap: int
    M: int
    m: int
    p: int

    def total_events(self) -> int:
        return sum(self.entries.values())

    def distances(self) -> list[float]:
        return sorted({k[4] / MICRO for k in self.entries})


@dataclass(frozen=True)
class DminTheta:
    d2min: float
    theta_dmin: float
    spectrum: dict[float, float]
    length_weight: str


def _expand_rows(graph: ProductGraph, nodes: np.ndarray):
    """Map frontier rows to (row index, edge index) pairs via CSR repetition."""
    starts = graph.indptr[nodes]
    degs = (graph.indptr[nodes + 1] - starts).astype(np.int64)
    rows = np.repeat(np.arange(nodes.size), degs)
    offsets = np.arange(degs.sum()) - np.repeat(np.cumsum(degs) - degs, degs)
    edges = np.repeat(starts, degs) + offsets
    return rows, edges


def enumerate_error_events(
    graph: ProductGraph,
    d_cap: float,
    iota_cap: int,
    event_source: str = "all-states",
    event_limit: int = 10_000_000,
) -> ErrorEventTable:
    """Exact census of all first-return events with d2 <= d_cap, iota <= iota_cap."""
    if d_cap <= 0:
        raise ValueError("d_cap must be positive")
    if iota_cap < 1:
        raise ValueError("iota_cap must be >= 1")
    if d_cap >= 60.0:
        raise ValueError("d_cap too large for the packed integer keys")
    if iota_cap > 63:
        raise ValueError("iota_cap must be <= 63 (packed key width)")
    if graph.n_nodes >= (1 << 22):
        raise ValueError("graph too large for the packed integer keys")
    cap_nano = round(d_cap * NANO) + 500  # half-micro slack so the cap is inclusive
    entries: dict[tuple[int, int, int, int, int], int] = {}
    total = 0
    for (j0, kappa) in graph.sources(event_source):
        e0 = _first_edges(graph, j0, kappa)
        dn = graph.edge_dnano[e0]
        keep = dn <= cap_nano
        nodes = graph.edge_dst[e0][keep]
        taus = np.ones(keep.sum(), dtype=np.int64)
        dns = dn[keep]
        counts = graph.edge_mult[e0][keep].astype(np.int64)
        keys = ((nodes << 6) + taus << 36) + dns
        keys, inv = np.unique(keys, return_inverse=True)
        agg = np.zeros(keys.size, dtype=np.int64)
        np.add.at(agg, inv, counts)
        for iota in range(1, iota_cap + 1):
            if keys.size == 0:
                break
            nodes = keys >> 42
            taus = (keys >> 36) & 0x3F
            dns = keys & ((1 << 36) - 1)
            is_end = graph.diag_mask[nodes]
            if np.any(is_end):
                for n_, t_, d_, c_ in zip(
                    nodes[is_end], taus[is_end], dns[is_end], agg[is_end]
                ):
                    if d_ == 0:
                        raise NonObservableCodeError(
                            "zero-distance error event encountered"
                        )
                    key = (j0, kappa, iota, int(t_), int(round(d_ / 1000.0)))
                    entries[key] = entries.get(key, 0) + int(c_)
                    total += int(c_)
            if total > event_limit:
                raise EnumerationLimitError(
                    f"event census exceeded {event_limit} events"
                )
            live = ~is_end
            nodes, taus, dns, agg = nodes[live], taus[live], dns[live], agg[live]
            if iota == iota_cap or nodes.size == 0:
                break
            rows, edges = _expand_rows(graph, nodes)
            nd = dns[rows] + graph.edge_dnano[edges]
            ok = nd <= cap_nano
            rows, edges, nd = rows[ok], edges[ok], nd[ok]
            ntau = taus[rows] + graph.edge_dtau[edges]
            nkeys = ((graph.edge_dst[edges] << 6) + ntau << 36) + nd
            ncounts = agg[rows] * graph.edge_mult[edges]
            keys, inv = np.unique(nkeys, return_inverse=True)
            agg = np.zeros(keys.size, dtype=np.int64)
            np.add.at(agg, inv, ncounts)
            if keys.size > event_limit:
                raise EnumerationLimitError(
                    f"event frontier exceeded {event_limit} entries"
                )
    return ErrorEventTable(entries, d_cap, iota_cap, graph.M, graph.m, graph.p)


def dmin_and_theta(
    table: ErrorEventTable, length_weight: str = "per-step"
) -> DminTheta:
    """Collapse a census into d2min, Theta_dmin, and the Theta_d spectrum.

    Theta_d = (M^-m / p) * sum over events of tau * W^iota, W per convention.
    """
    if not table.entries:
        raise ValueError("empty error-event table")
    W = length_weight_value(length_weight, table.M)
    norm = table.M ** (-table.m) / table.p
    spec: dict[int, float] = {}
    for (j, kappa, iota, tau, d_micro), count in table.entries.items():
        spec[d_micro] = spec.get(d_micro, 0.0) + norm * count * tau * W ** iota
    spectrum = {d / MICRO: v for d, v in sorted(spec.items())}
    d2min = min(spectrum)
    return DminTheta(d2min, spectrum[d2min], spectrum, length_weight)


def theta_spectrum(
    graph: ProductGraph,
    d_cap: float,
    iota_cap: int,
    length_weight: str = "per-step",
    event_source: str = "all-states",
    size_limit: int = 20_000_000,
) -> dict[float, float]:
    """Theta_d over all events below the caps, without per-(iota, tau) storage.

    Carries per (node, accumulated d2) two running sums: A = sum of W^iota and
    B = sum of W^iota * tau over open path prefixes; the merge contribution of
    an event is its B value.  Identical to collapsing enumerate_error_events
    with dmin_and_theta, but scales to large d_cap.
    """
    if d_cap >= 60.0:
        raise ValueError("d_cap too large for the packed integer keys")
    if graph.n_nodes >= (1 << 22):
        raise ValueError("graph too large for the packed integer keys")
    W = length_weight_value(length_weight, graph.M)
    norm = graph.M ** (-graph.m) / graph.p
    cap_nano = round(d_cap * NANO) + 500
    spec: dict[int, float] = {}

    parts_keys = []
    parts_a = []
    parts_b = []
    for (j0, kappa) in graph.sources(event_source):
        e0 = _first_edges(graph, j0, kappa)
        dn = graph.edge_dnano[e0]
        keep = dn <= cap_nano
        nodes = graph.edge_dst[e0][keep].astype(np.int64)
        dns = dn[keep]
        mult = graph.edge_mult[e0][keep].astype(np.float64)
        parts_keys.append((nodes << 36) + dns)
        parts_a.append(mult * W)
        parts_b.append(mult * W)  # first step always has dtau = 1
    keys = np.concatenate(parts_keys)
    a_val = np.concatenate(parts_a)
    b_val = np.concatenate(parts_b)
    keys, inv = np.unique(keys, return_inverse=True)
    A = np.zeros(keys.size)
    B = np.zeros(keys.size)
    np.add.at(A, inv, a_val)
    np.add.at(B, inv, b_val)

    for iota in range(1, iota_cap + 1):
        if keys.size == 0:
            break
        nodes = keys >> 36
        dns = keys & ((1 << 36) - 1)
        is_end = graph.diag_mask[nodes]
        if np.any(is_end):
            for d_, b_ in zip(dns[is_end], B[is_end]):
                if d_ == 0:
                    raise NonObservableCodeError("zero-distance error event")
                dm = int(round(d_ / 1000.0))
                spec[dm] = spec.get(dm, 0.0) + norm * b_
        live = ~is_end
        nodes, dns, A, B = nodes[live], dns[live], A[live], B[live]
        if iota == iota_cap or nodes.size == 0:
            break
        rows, edges = _expand_rows(graph, nodes)
        nd = dns[rows] + graph.edge_dnano[edges]
        ok = nd <= cap_nano
        rows, edges, nd = rows[ok], edges[ok], nd[ok]
        wmult = graph.edge_mult[edges] * W
        na = A[rows] * wmult
        nb = (B[rows] + A[rows] * graph.edge_dtau[edges]) * wmult
        nkeys = (graph.edge_dst[edges] << 36) + nd
        keys, inv = np.unique(nkeys, return_inverse=True)
        if keys.size > size_limit:
            raise EnumerationLimitError("spectrum frontier exceeded size limit")
        A = np.zeros(keys.size)
        B = np.zeros(keys.size)
        np.add.at(A, inv, na)
        np.add.at(B, inv, nb)
    return {d / MICRO: v for d, v in sorted(spec.items())}


def series_bound(spectrum: dict[float, float], ebn0: float) -> float:
    """Sum of Theta_d * Q(sqrt(d2 * Eb/N0)) over the spectrum."""
    if ebn0 <= 0:
        raise ValueError("Eb/N0 must be positive (linear scale)")
    return sum(theta * qfunc(math.sqrt(d2 * ebn0)) for d2, theta in spectrum.items())


def _spectral_radius(W: sp.csr_matrix, iters: int = 400) -> float:
    if W.shape[0] == 0 or W.nnz == 0:
        return 0.0
    rng = np.random.default_rng(0)
    v = rng.random(W.shape[0]) + 0.1
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = W @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam = nw
        v = w / nw
    return float(lam)


def transfer_bound(
    graph: ProductGraph,
    ebn0: float,
    length_weight: str = "per-step",
    event_source: str = "all-states",
    d2min: float | None = None,
) -> float:
    """Closed-form bound: Q * exp * d/d(eps) of the matrix transfer function.

    Evaluates the generating function over transfer states with eta at the
    length-weight value, eps = 1, zeta = exp(-Eb/(2 N0)), and computes the
    eps-derivative with sparse linear solves.
    """
    if ebn0 <= 0:
        raise ValueError("Eb/N0 must be positive (linear scale)")
    eta = length_weight_value(length_weight, graph.M)
    if d2min is None:
        d2min = minimum_distance(graph, event_source)

    transfer_ids = np.flatnonzero(~graph.diag_mask)
    pos = -np.ones(graph.n_nodes, dtype=np.int64)
    pos[transfer_ids] = np.arange(transfer_ids.size)
    nT = transfer_ids.size

    # edge value at (eta, eps=1, zeta): b * eta * zeta^{d2}
    all_src = np.repeat(
        np.arange(graph.n_nodes), np.diff(graph.indptr).astype(np.int64)
    )
    vals = (
        graph.edge_mult.astype(np.float64)
        * eta
        * np.exp(-0.5 * ebn0 * graph.edge_dnano / NANO)
    )
    src_is_t = ~graph.diag_mask[all_src]
    dst_is_t = ~graph.diag_mask[graph.edge_dst]

    tt = src_is_t & dst_is_t
    Wmat = sp.csr_matrix(
        (vals[tt], (pos[graph.edge_dst[tt]], pos[all_src[tt]])), shape=(nT, nT)
    )
    rho = _spectral_radius(Wmat)
    if rho >= 1.0 - 1e-9:
        raise DivergentBoundError(
            f"transfer matrix spectral radius {rho:.4f} >= 1 at Eb/N0={ebn0:.3f}"
        )

    # f: transfer -> any end state; f' restricted to dtau = 1 edges
    te = src_is_t & ~dst_is_t
    f = np.zeros(nT)
    fp = np.zeros(nT)
    np.add.at(f, pos[all_src[te]], vals[te])
    np.add.at(fp, pos[all_src[te]], vals[te] * graph.edge_dtau[te])

    Wp = sp.csr_matrix(
        (
            vals[tt] * graph.edge_dtau[tt],
            (pos[graph.edge_dst[tt]], pos[all_src[tt]]),
        ),
        shape=(nT, nT),
    )

    ident = sp.identity(nT, format="csc")
    try:
        lu = spla.splu((ident - Wmat).tocsc())
        y = lu.solve(f, trans="T")
    except RuntimeError as exc:
        raise SingularBoundError(str(exc)) from exc

    total = 0.0
    for (j0, kappa) in graph.sources(event_source):
        e0 = _first_edges(graph, j0, kappa)
        v0 = (
            graph.edge_mult[e0].astype(np.float64)
            * eta
            * np.exp(-0.5 * ebn0 * graph.edge_dnano[e0] / NANO)
        )
        dst0 = graph.edge_dst[e0]
        into_t = ~graph.diag_mask[dst0]
        xi = np.zeros(nT)
        np.add.at(xi, pos[dst0[into_t]], v0[into_t])
        # first step always has dtau = 1, so xi' = xi and chi' = chi
        chi_p = float(v0[~into_t].sum())
        try:
            x = lu.solve(xi)
        except RuntimeError as exc:
            raise SingularBoundError(str(exc)) from exc
        psi_p = float(fp @ x) + float(y @ (Wp @ x)) + float(y @ xi) + chi_p
        total += psi_p

    norm = graph.M ** (-graph.m) / graph.p
    arg = math.sqrt(d2min * ebn0)
    return qfunc(arg) * math.exp(0.5 * d2min * ebn0) * norm * total


def distance_profile(
    graph: ProductGraph,
    depth_cap: int,
    event_source: str = "all-states",
    d2min: float | None = None,
) -> tuple[list[float], int | None]:
    """Growing minimum distance over observation steps and the depth N_B.

    delta2(N) is the least accumulated distance over all pair paths that
    diverge at step 0, including pairs that have already merged (their
    distance stays flat).  N_B is the first N with delta2(N) >= d2min.
    """
    if depth_cap < 1:
        raise ValueError("depth_cap must be >= 1")
    if d2min is None:
        d2min = minimum_distance(graph, event_source)
    INF = np.iinfo(np.int64).max
    dist = np.full(graph.n_nodes, INF, dtype=np.int64)
    for (j0, kappa) in graph.sources(event_source):
        for e in _first_edges(graph, j0, kappa):
            t = graph.edge_dst[e]
            d = graph.edge_dnano[e]
            if d < dist[t]:
                dist[t] = d
    all_src = np.repeat(
        np.arange(graph.n_nodes), np.diff(graph.indptr).astype(np.int64)
    )
    deltas = [float(dist.min()) / NANO]
    for _ in range(1, depth_cap):
        live = dist[all_src] < INF
        nd = dist[all_src[live]] + graph.edge_dnano[live]
        new = np.full(graph.n_nodes, INF, dtype=np.int64)
        np.minimum.at(new, graph.edge_dst[live], nd)
        dist = new
        deltas.append(float(dist.min()) / NANO)
    nb = None
    for n, v in enumerate(deltas, start=1):
        if v >= d2min - 1e-9:
            nb = n
            break
    return deltas, nb
