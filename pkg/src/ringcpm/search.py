"""Exhaustive search over puncture matrices maximizing the minimum distance."""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

from .bound import (
    NonObservableCodeError,
    build_product_graph,
    distance_profile,
    dmin_and_theta,
    enumerate_error_events,
    minimum_distance,
)
from .cpm import CpmParams
from .ringcode import GeneratorMatrix, PunctureMatrix, format_puncture_octal
from .trellis import build_trellis

__all__ = ["SearchSpec", "Candidate", "search_puncture"]


@dataclass(frozen=True)
class SearchSpec:
    """Search space: all n x p keep patterns with s ones and no empty column."""

    generator: GeneratorMatrix
    cpm: CpmParams
    p: int
    s: int
    event_source: str = "all-states"
    length_weight: str = "per-step"
    profile_depth: int = 60

    def __post_init__(self):
        n = self.generator.n
        if not self.p <= self.s <= n * self.p:
            raise ValueError("need p <= s <= n*p for a rate p/s <= 1 pattern")


@dataclass
class Candidate:
    octal: str
    keep: tuple[tuple[int, ...], ...]
    d2min: float
    theta_dmin: float | None = None
    n_b: int | None = None
    observable: bool = True
    elapsed_s: float = 0.0

    def sort_key(self):
        # maximize d2min, then minimize theta and N_B; deterministic tail
        return (
            -self.d2min,
            self.theta_dmin if self.theta_dmin is not None else float("inf"),
            self.n_b if self.n_b is not None else 10 ** 9,
            self.keep,
        )


def _candidate_classes(n: int, p: int, s: int):
    """Distinct cyclic-shift classes of keep patterns; canonical = max tuple."""
    seen = set()
    for ones in itertools.combinations(range(n * p), s):
        keep = [[0] * p for _ in range(n)]
        for o in ones:
            keep[o // p][o % p] = 1
        if any(all(keep[i][c] == 0 for i in range(n)) for c in range(p)):
            continue
        mat = PunctureMatrix(tuple(tuple(row) for row in keep))
        cls = mat.shift_class()
        canon = max(cls)
        if canon in seen:
            continue
        seen.add(canon)
        yield PunctureMatrix(canon)


def search_puncture(spec: SearchSpec) -> list[Candidate]:
    """Rank all candidate classes by minimum distance with documented ties.

    Every class is scored by d2min; classes tied at the maximum are further
    ordered by smaller Theta_dmin, then smaller N_B.  Cyclic column shifts
    only change the time origin of the periodic trellis, so one
    representative per class is evaluated.
    """
    results: list[Candidate] = []
    for P_mat in _candidate_classes(spec.generator.n, spec.p, spec.s):
        t0 = time.perf_counter()
        octal = format_puncture_octal(P_mat)
        trellis = build_trellis(spec.generator, P_mat, spec.cpm)
        graph = build_product_graph(trellis)
        try:
            d2 = minimum_distance(graph, spec.event_source)
            cand = Candidate(octal, P_mat.keep, d2)
        except NonObservableCodeError:
            cand = Candidate(octal, P_mat.keep, 0.0, observable=False)
        cand.elapsed_s = time.perf_counter() - t0
        results.append(cand)
    if not results:
        raise ValueError("empty candidate set")

    best = max(c.d2min for c in results)
    for cand in results:
        if cand.observable and cand.d2min >= best - 1e-9:
            t0 = time.perf_counter()
            P_mat = PunctureMatrix(cand.keep)
            trellis = build_trellis(spec.generator, P_mat, spec.cpm)
            graph = build_product_graph(trellis)
            table = enumerate_error_events(
                graph, cand.d2min + 1e-6, 60, spec.event_source
            )
            dt = dmin_and_theta(table, spec.length_weight)
            cand.theta_dmin = dt.theta_dmin
            _, nb = distance_profile(
                graph, spec.profile_depth, spec.event_source, cand.d2min
            )
            cand.n_b = nb
            cand.elapsed_s += time.perf_counter() - t0
    results.sort(key=Candidate.sort_key)
    return results
