"""Weighted density-clustering sampler.

Logs are embedded on one axis by their complexity score, clustered with
DBSCAN on that axis, and sampled per cluster in proportion to cluster size,
favouring complex logs inside each cluster. The draw is then split into a
meta-training set and an inference set.
"""

from __future__ import annotations

import csv
import json
import math
import random
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core import LogRecord, Template, TokenizedLog, normalize, tokenize
from .preprocess import deduplicate

FLOAT_MAX = sys.float_info.max


class EmptyInput(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


class RatioTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    epsilon: float = 10.0
    min_pts: int = 5
    sample_ratio: float = 0.0001
    smoothing_factor: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")
        if not 0 < self.sample_ratio <= 1:
            raise ValueError(f"sample_ratio must be in (0, 1], got {self.sample_ratio}")
        if not self.smoothing_factor > 0:
            raise ValueError(f"smoothing_factor must be > 0, got {self.smoothing_factor}")


@dataclass
class SampledSets:
    meta_set: list[LogRecord] = field(default_factory=list)
    inference_set: list[LogRecord] = field(default_factory=list)


@dataclass
class Clustering:
    clusters: list[list[int]]
    noise: list[int]


def complexity(log: TokenizedLog) -> float:
    """``token_count ** token_count + char_length``, saturating at the largest float."""
    n = log.token_count
    try:
        power = math.pow(n, n)  # pow(0, 0) == 1.0
    except OverflowError:
        return FLOAT_MAX
    return min(power + log.char_length, FLOAT_MAX)


def weights_from_complexities(values: Sequence[float], factor_s: float) -> list[float]:
    if not values:
        raise EmptyCorpus("cannot weight an empty corpus")
    terms = [v + factor_s for v in values]
    # rescale by the largest term first; saturated complexities would
    # otherwise overflow the sum
    top = max(terms)
    scaled = [t / top for t in terms]
    total = math.fsum(scaled)
    return [s / total for s in scaled]


def weight(log: TokenizedLog, corpus: Sequence[TokenizedLog], factor_s: float) -> float:
    if not corpus:
        raise EmptyCorpus("cannot weight against an empty corpus")
    values = [complexity(item) for item in corpus]
    own = complexity(log)
    try:
        idx = values.index(own)
    except ValueError:
        raise ValueError("log is not part of the corpus") from None
    return weights_from_complexities(values, factor_s)[idx]


def dbscan_1d(values: Sequence[float], epsilon: float, min_pts: int) -> Clustering:
    """DBSCAN over scalar values with distance ``|a - b|``.

    Core points have at least ``min_pts`` values (themselves included)
    within ``epsilon``. In one dimension the clusters are the maximal runs
    of sorted core points whose consecutive gaps are at most ``epsilon``.
    A border point reachable from two clusters joins the cluster of its
    nearest core point (lower value on a tie) so the result does not depend
    on input order. Clusters are ordered by their smallest value and list
    indices in ascending order; noise indices are ascending too.
    """
    n = len(values)
    if n == 0:
        raise EmptyInput("no points to cluster")
    order = sorted(range(n), key=lambda i: (values[i], i))
    vals = [values[i] for i in order]

    is_core = [False] * n
    lo = hi = 0
    for pos in range(n):
        while vals[pos] - vals[lo] > epsilon:
            lo += 1
        if hi < pos:
            hi = pos
        while hi + 1 < n and vals[hi + 1] - vals[pos] <= epsilon:
            hi += 1
        is_core[pos] = hi - lo + 1 >= min_pts

    label = [-1] * n
    n_clusters = 0
    prev_core = None
    for pos in range(n):
        if not is_core[pos]:
            continue
        if prev_core is None or vals[pos] - vals[prev_core] > epsilon:
            n_clusters += 1
        label[pos] = n_clusters - 1
        prev_core = pos

    # nearest core on each side for every border candidate
    left_core = [None] * n
    last = None
    for pos in range(n):
        if is_core[pos]:
            last = pos
        left_core[pos] = last
    right_core = [None] * n
    last = None
    for pos in range(n - 1, -1, -1):
        if is_core[pos]:
            last = pos
        right_core[pos] = last

    for pos in range(n):
        if is_core[pos]:
            continue
        best = None
        best_dist = None
        for core in (left_core[pos], right_core[pos]):
            if core is None:
                continue
            dist = abs(vals[pos] - vals[core])
            if dist <= epsilon and (best is None or dist < best_dist):
                best, best_dist = core, dist
        if best is not None:
            label[pos] = label[best]

    clusters: list[list[int]] = [[] for _ in range(n_clusters)]
    noise = []
    for pos in range(n):
        if label[pos] < 0:
            noise.append(order[pos])
        else:
            clusters[label[pos]].append(order[pos])
    for members in clusters:
        members.sort()
    noise.sort()
    return Clustering(clusters=clusters, noise=noise)


def cluster(records: Sequence[LogRecord], config: SamplerConfig) -> Clustering:
    if not records:
        raise EmptyInput("no records to cluster")
    values = [complexity(tokenize(r.content)) for r in records]
    return dbscan_1d(values, config.epsilon, config.min_pts)


def target_count(n_records: int, sample_ratio: float) -> int:
    # round away float noise first: 0.01 * 1000 is 10.000000000000002
    return math.ceil(round(sample_ratio * n_records, 9))


def allocate_quotas(sizes: Sequence[int], target: int) -> list[int]:
    """Split ``target`` across groups proportionally to ``sizes``.

    Largest-remainder rounding, remainders tied by larger group then lower
    index. When ``target`` covers every nonempty group, groups left at zero
    take one slot each from the group currently holding the most.
    """
    total = sum(sizes)
    if total == 0 or target <= 0:
        return [0] * len(sizes)
    target = min(target, total)
    quotas = [target * s // total for s in sizes]
    remainders = [target * s % total for s in sizes]
    leftover = target - sum(quotas)
    ranked = sorted(range(len(sizes)), key=lambda i: (-remainders[i], -sizes[i], i))
    for i in ranked[:leftover]:
        quotas[i] += 1

    nonempty = [i for i, s in enumerate(sizes) if s > 0]
    if target >= len(nonempty):
        for i in nonempty:
            if quotas[i] > 0:
                continue
            donor = max(nonempty, key=lambda j: (quotas[j], sizes[j], -j))
            quotas[donor] -= 1
            quotas[i] += 1
    return quotas


def weighted_sample_without_replacement(
    weights: Sequence[float], k: int, rng: random.Random
) -> list[int]:
    """Efraimidis-Spirakis draw: keep the k largest ``u ** (1 / w)`` keys.

    Keys are compared in log space (``log(u) / w``) to stay finite for the
    tiny weights that saturated complexities produce.
    """
    if k <= 0:
        return []
    keyed = []
    for i, w in enumerate(weights):
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        key = math.log(u) / w if w > 0 else -math.inf
        keyed.append((key, -i))
    keyed.sort(reverse=True)
    return sorted(-neg_i for _, neg_i in keyed[:k])


def sample(records: Sequence[LogRecord], config: SamplerConfig) -> SampledSets:
    if not records:
        raise EmptyInput("no records to sample")
    records = deduplicate(records)
    target = target_count(len(records), config.sample_ratio)
    if target < 2:
        raise RatioTooSmall(
            f"sample_ratio {config.sample_ratio} over {len(records)} records "
            f"draws {target}; need at least 2"
        )

    values = [complexity(tokenize(r.content)) for r in records]
    clustering = dbscan_1d(values, config.epsilon, config.min_pts)
    groups = [g for g in clustering.clusters if g]
    if clustering.noise:
        groups.append(clustering.noise)

    quotas = allocate_quotas([len(g) for g in groups], target)
    rng = random.Random(config.seed)
    drawn: list[int] = []
    for members, quota in zip(groups, quotas):
        if quota >= len(members):
            drawn.extend(members)
            continue
        local = weights_from_complexities([values[i] for i in members], config.smoothing_factor)
        picked = weighted_sample_without_replacement(local, quota, rng)
        drawn.extend(members[p] for p in picked)

    global_w = weights_from_complexities(values, config.smoothing_factor)
    drawn.sort(key=lambda i: (-global_w[i], records[i].line_id, i))
    sets = SampledSets()
    for rank, i in enumerate(drawn):
        (sets.meta_set if rank % 2 == 0 else sets.inference_set).append(records[i])
    return sets


def write_sampled_sets(
    sets: SampledSets,
    out_dir: str | Path,
    config: SamplerConfig,
    labels: Optional[dict[int, Template]] = None,
    extra: Optional[dict] = None,
) -> dict[str, Path]:
    """Write ``meta_set.csv``, ``inference_set.csv`` and ``sample_provenance.json``.

    With ``labels`` (line_id -> ground-truth template) each CSV gets an
    EventTemplate column so the sets can seed retrieval and training.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "meta": out_dir / "meta_set.csv",
        "inference": out_dir / "inference_set.csv",
        "provenance": out_dir / "sample_provenance.json",
    }
    for key, rows in (("meta", sets.meta_set), ("inference", sets.inference_set)):
        with open(paths[key], "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            header = ["LineId", "Content"] + (["EventTemplate"] if labels is not None else [])
            writer.writerow(header)
            for rec in rows:
                row = [rec.line_id, rec.content]
                if labels is not None:
                    row.append(labels[rec.line_id].text)
                writer.writerow(row)
    provenance = {
        "config": asdict(config),
        "seed": config.seed,
        "meta_count": len(sets.meta_set),
        "inference_count": len(sets.inference_set),
    }
    if extra:
        provenance.update(extra)
    paths["provenance"].write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def read_sampled_csv(path: str | Path, dataset: str = "") -> list[tuple[LogRecord, Optional[str]]]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((LogRecord(int(row["LineId"]), row["Content"], dataset), row.get("EventTemplate")))
    return rows


def normalized_contents(records: Sequence[LogRecord]) -> set[str]:
    return {normalize(r.content) for r in records}
