"""Coreference evaluation: MUC, B-cubed, entity-based CEAF and the CoNLL average.

Partitions are iterables of mention-id collections.  Mentions present in
only one of key/response are added to the other as singletons before
scoring.  Corpus scores are micro-averaged: numerators and denominators are
summed over documents before dividing.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, p_num, p_den, r_num, r_den) -> "PRF":
        p = p_num / p_den if p_den else 0.0
        r = r_num / r_den if r_den else 0.0
        return cls(p, r, f1_score(p, r))


def f1_score(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _as_clusters(partition, what: str) -> list[frozenset]:
    clusters, seen = [], set()
    for c in partition:
        c = frozenset(c)
        if not c:
            continue
        if seen & c:
            raise MetricError(f"{what} partition repeats mention(s) {sorted(seen & c)}")
        seen |= c
        clusters.append(c)
    return clusters


def align_partitions(key, response, strict: bool = False) -> tuple[list[frozenset], list[frozenset]]:
    """Validate both partitions and complete each with the other's missing mentions as singletons."""
    k = _as_clusters(key, "key")
    r = _as_clusters(response, "response")
    k_ids = set().union(*k) if k else set()
    r_ids = set().union(*r) if r else set()
    if strict and k_ids != r_ids:
        raise MetricError(f"mention sets differ: key-only {sorted(k_ids - r_ids)}, "
                          f"response-only {sorted(r_ids - k_ids)}")
    k += [frozenset([m]) for m in sorted(r_ids - k_ids)]
    r += [frozenset([m]) for m in sorted(k_ids - r_ids)]
    return k, r


# -- per-document counts: (precision numerator, precision denominator,
#    recall numerator, recall denominator) ---------------------------------

def _muc_side(gold, other) -> tuple[int, int]:
    owner = {m: i for i, c in enumerate(other) for m in c}
    num = den = 0
    for c in gold:
        if len(c) < 2:
            continue
        parts = {owner[m] for m in c}
        num += len(c) - len(parts)
        den += len(c) - 1
    return num, den


def muc_counts(key, response):
    k, r = align_partitions(key, response)
    r_num, r_den = _muc_side(k, r)
    p_num, p_den = _muc_side(r, k)
    return p_num, p_den, r_num, r_den


def b_cubed_counts(key, response):
    k, r = align_partitions(key, response)
    k_of = {m: c for c in k for m in c}
    r_of = {m: c for c in r for m in c}
    p_num = r_num = 0.0
    for m in sorted(k_of):
        overlap = len(k_of[m] & r_of[m])
        r_num += overlap / len(k_of[m])
        p_num += overlap / len(r_of[m])
    n = len(k_of)
    return p_num, n, r_num, n


def phi4(k: frozenset, r: frozenset) -> float:
    return 2.0 * len(k & r) / (len(k) + len(r))


def ceaf_e_counts(key, response):
    k, r = align_partitions(key, response)
    if not k or not r:
        return 0.0, len(r), 0.0, len(k)
    sim = np.array([[phi4(a, b) for b in r] for a in k])
    total = max_assignment_total(sim)
    return total, len(r), total, len(k)


def muc(key, response) -> PRF:
    return PRF.from_counts(*muc_counts(key, response))


def b_cubed(key, response) -> PRF:
    return PRF.from_counts(*b_cubed_counts(key, response))


def ceaf_e(key, response) -> PRF:
    return PRF.from_counts(*ceaf_e_counts(key, response))


# -- optimal assignment -----------------------------------------------------

def _min_cost_rows_le_cols(cost: np.ndarray) -> list[int]:
    """Kuhn-Munkres with potentials for an n x m cost matrix, n <= m.

    Returns the column assigned to each row.
    """
    n, m = cost.shape
    c = cost.tolist()
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j]: row (1-based) matched to column j
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = c[i0 - 1]
            ui = u[i0]
            delta, j1 = inf, 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta, j1 = minv[j], j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assign = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            assign[p[j] - 1] = j - 1
    return assign


def _max_assignment(score: np.ndarray) -> list[tuple[int, int]]:
    n, m = score.shape
    if n == 0 or m == 0:
        return []
    if n <= m:
        return [(i, j) for i, j in enumerate(_min_cost_rows_le_cols(-score))]
    return sorted((i, j) for j, i in enumerate(_min_cost_rows_le_cols(-score.T)))


def max_assignment_total(score) -> float:
    score = np.asarray(score, dtype=np.float64)
    return float(sum(score[i, j] for i, j in _max_assignment(score)))


def hungarian(score) -> list[tuple[int, int]]:
    """Maximum-sum injective row->column matching of size min(n, m).

    Among optimal matchings the lexicographically smallest list of
    (row, col) pairs is returned.
    """
    S = np.asarray(score, dtype=np.float64)
    if S.ndim != 2:
        raise ValueError("score matrix must be 2-D")
    if not np.all(np.isfinite(S)):
        raise ValueError("score matrix must be finite")
    n, m = S.shape
    if n == 0 or m == 0:
        return []
    best = max_assignment_total(S)
    tol = 1e-9 * (1.0 + abs(best) + float(np.abs(S).max()))
    need = min(n, m)
    cols = list(range(m))
    chosen: list[tuple[int, int]] = []
    acc = 0.0
    for i in range(n):
        if len(chosen) == need:
            break
        remaining = need - len(chosen)
        pick = None
        for j in cols:
            if n - i - 1 < remaining - 1:
                break
            rest_cols = [c for c in cols if c != j]
            rest = max_assignment_total(S[i + 1:][:, rest_cols]) if remaining > 1 else 0.0
            if acc + S[i, j] + rest >= best - tol:
                pick = j
                break
        if pick is None:
            continue  # row i stays unmatched (only possible when n > m)
        chosen.append((i, pick))
        acc += S[i, pick]
        cols.remove(pick)
    return chosen


# -- reports ----------------------------------------------------------------

def conll_avg(*f1s) -> float:
    """Arithmetic mean of the MUC, B-cubed and CEAF_e F1 values (any common scale)."""
    if len(f1s) == 1:
        f1s = tuple(f1s[0])
    if len(f1s) != 3:
        raise ValueError("conll_avg needs exactly three F1 values")
    return sum(f1s) / 3.0


@dataclass(frozen=True)
class ScoreReport:
    muc: PRF
    b_cubed: PRF
    ceaf_e: PRF
    conll_avg_f1: float

    ROWS = (("MUC", "muc"), ("B3", "b_cubed"), ("CEAF_e", "ceaf_e"))

    def to_dict(self, percent: bool = True) -> dict:
        scale = 100.0 if percent else 1.0
        out = {}
        for _, attr in self.ROWS:
            prf = getattr(self, attr)
            out[attr] = {k: round(v * scale, 2) if percent else v for k, v in asdict(prf).items()}
        out["conll_avg_f1"] = round(self.conll_avg_f1 * scale, 2) if percent else self.conll_avg_f1
        return out

    def format_table(self) -> str:
        lines = []
        for label, attr in self.ROWS:
            prf = getattr(self, attr)
            lines.append(f"{label:<8}Precision  {100 * prf.precision:6.2f}")
            lines.append(f"{'':<8}Recall     {100 * prf.recall:6.2f}")
            lines.append(f"{'':<8}F1         {100 * prf.f1:6.2f}")
        lines.append(f"CoNLL Average F1   {100 * self.conll_avg_f1:6.2f}")
        return "\n".join(lines)


def report_from_counts(muc_c, b3_c, ceaf_c) -> ScoreReport:
    m, b, c = PRF.from_counts(*muc_c), PRF.from_counts(*b3_c), PRF.from_counts(*ceaf_c)
    return ScoreReport(m, b, c, conll_avg(m.f1, b.f1, c.f1))


def score_document(key, response) -> ScoreReport:
    return report_from_counts(muc_counts(key, response), b_cubed_counts(key, response),
                              ceaf_e_counts(key, response))


def score_system(key_partitions: dict, response_partitions: dict) -> ScoreReport:
    """Micro-averaged report over documents; both arguments map doc id -> partition."""
    missing = sorted(set(key_partitions) - set(response_partitions))
    extra = sorted(set(response_partitions) - set(key_partitions))
    if missing or extra:
        raise MetricError(f"document ids differ: no response for {missing}, no key for {extra}")
    totals = [[0.0] * 4 for _ in range(3)]
    for doc_id in key_partitions:
        k, r = key_partitions[doc_id], response_partitions[doc_id]
        for acc, counts in zip(totals, (muc_counts(k, r), b_cubed_counts(k, r), ceaf_e_counts(k, r))):
            for i, x in enumerate(counts):
                acc[i] += x
    return report_from_counts(*totals)
