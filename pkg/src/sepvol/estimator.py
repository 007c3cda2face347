"""Streaming QMC estimation of volumes, hyperareas and separability probabilities.

A :class:`RunAccumulator` owns the compensated weight sums of one rank
stratum over a set of sequence-index ranges.  Accumulators over disjoint
ranges merge (the monoid used for sharding), serialize to a versioned binary
checkpoint, and turn into estimates:

    estimate = box_measure * sum / (M * r!)

``box_measure`` is the measure of the coordinate box handed to the
integrand and ``r!`` counts the orderings of the nonzero eigenvalues that
the parameterization visits.

Classes follow the two PPT groupings: ``sep_A``, ``sep_B``, their union
``sep_either`` and intersection ``sep_both``.  ``sep_pooled`` is the average
of the A and B sums; it is the headline separable estimate because the two
groupings estimate the same quantity.
"""
from __future__ import annotations

import hashlib
import json
import os
import signal
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import exact, kernels, param, septest
from .config import RunConfig
from .lds import SequenceSpec, make_sequence
from .metrics import MetricKind

POOLED = "sep_pooled"
CLASSES = kernels.CLASSES
REPORT_CLASSES = CLASSES + (POOLED,)
SEP_CLASSES = REPORT_CLASSES[1:]
CHUNK = 65536

MAGIC = b"SEPVOLCK"
VERSION = 1
_HEAD = struct.Struct("<8sI16sI")


class EstimatorError(RuntimeError):
    pass


class CheckpointError(EstimatorError):
    pass


class Interrupted(EstimatorError):
    pass


def _class_index(cls: str) -> int:
    try:
        return CLASSES.index(cls)
    except ValueError:
        raise EstimatorError(f"unknown class {cls!r}") from None


def _two_sum_into(S, C, x):
    """Neumaier-add the array ``x`` elementwise into ``S`` with compensation ``C``."""
    t = S + x
    big = np.abs(S) >= np.abs(x)
    C += np.where(big, (S - t) + x, (x - t) + S)
    S[...] = t


# --------------------------------------------------------------------------
# accumulator


@dataclass(eq=False)
class RunAccumulator:
    N: int
    n: int
    metrics: tuple
    spec: SequenceSpec
    dims: tuple = (2, 3)
    angle_map: str = "haar"
    eps: float = 0.0
    floor: float = 1e-18
    block: int = 1_000_000
    projection: bool = False
    sums: np.ndarray = None
    comps: np.ndarray = None
    sumsq: np.ndarray = None
    counts: np.ndarray = None
    diverged: np.ndarray = None
    ranges: list = field(default_factory=list)
    block_sums: dict = field(default_factory=dict)
    block_counts: dict = field(default_factory=dict)
    # last fold when it ended inside a chunk: its kernel arrays plus the state
    # before it, so extending the run can redo that chunk in one kernel pass
    tail: dict | None = None

    def __post_init__(self):
        self.metrics = tuple(self.metrics)
        self.dims = tuple(self.dims)
        param.check_stratum(self.N, self.n)
        want = param.stratum_dim(self.N, 0 if self.projection else self.n)
        if self.spec.dimension != want:
            raise EstimatorError(f"sequence dimension {self.spec.dimension} != {want}")
        if self.sums is None:
            (self.sums, self.comps, self.sumsq, self.counts,
             self.diverged) = kernels.new_arrays(len(self.metrics))
        self.ranges = [tuple(r) for r in self.ranges]

    # -- identity ---------------------------------------------------------

    def identity(self) -> dict:
        return {"N": self.N, "n": self.n, "metrics": list(self.metrics),
                "spec": self.spec.to_dict(), "dims": list(self.dims),
                "angle_map": self.angle_map, "eps": self.eps, "floor": self.floor,
                "block": self.block, "projection": self.projection}

    @property
    def digest(self) -> bytes:
        blob = json.dumps(self.identity(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.blake2b(blob, digest_size=16).digest()

    @property
    def M(self) -> int:
        return sum(b - a for a, b in self.ranges)

    @property
    def next_index(self) -> int:
        return self.ranges[-1][1] if self.ranges else 0

    @property
    def contiguous(self) -> bool:
        return all(self.ranges[i][1] == self.ranges[i + 1][0]
                   for i in range(len(self.ranges) - 1)) and (
            not self.ranges or self.ranges[0][0] == 0)

    @property
    def r(self) -> int:
        return self.N - self.n

    @property
    def box(self) -> float:
        return param.box_measure(self.N, self.n, self.angle_map)

    @property
    def multiplicity(self) -> int:
        return param.multiplicity(self.N, self.n)

    def metric_index(self, metric) -> int:
        tag = metric.value if isinstance(metric, MetricKind) else str(metric).lower()
        try:
            return self.metrics.index(tag)
        except ValueError:
            raise EstimatorError(f"metric {tag!r} not accumulated") from None

    # -- accumulation -----------------------------------------------------

    def _add_range(self, a: int, b: int) -> None:
        for lo, hi in self.ranges:
            if a < hi and lo < b:
                raise EstimatorError(f"index range [{a},{b}) overlaps [{lo},{hi})")
        merged = []
        for lo, hi in sorted(self.ranges + [(a, b)]):
            if merged and merged[-1][1] == lo:
                merged[-1] = (merged[-1][0], hi)
            else:
                merged.append((lo, hi))
        self.ranges = merged

    def fold(self, start: int, stop: int, part) -> None:
        """Add the kernel arrays ``part`` for points ``[start, stop)`` (one block)."""
        sums, comps, sumsq, counts, diverged = part
        if start // self.block != (stop - 1) // self.block:
            raise EstimatorError("a folded chunk must not straddle a block boundary")
        self.tail = None
        self._add_range(start, stop)
        x = sums + comps
        _two_sum_into(self.sums, self.comps, x)
        self.sumsq += sumsq
        self.counts += counts
        self.diverged += diverged
        bid = start // self.block
        if bid in self.block_sums:
            self.block_sums[bid] = self.block_sums[bid] + x
            self.block_counts[bid] = self.block_counts[bid] + counts
        else:
            self.block_sums[bid] = x.copy()
            self.block_counts[bid] = counts.copy()

    def merge(self, other: "RunAccumulator") -> "RunAccumulator":
        """Merge ``other`` (disjoint index ranges) into ``self`` and return ``self``."""
        if other.digest != self.digest:
            raise EstimatorError("cannot merge accumulators of different runs")
        self.tail = None
        for a, b in other.ranges:
            self._add_range(a, b)
        _two_sum_into(self.sums, self.comps, other.sums)
        self.comps += other.comps
        self.sumsq += other.sumsq
        self.counts += other.counts
        self.diverged += other.diverged
        for bid, x in other.block_sums.items():
            if bid in self.block_sums:
                self.block_sums[bid] = self.block_sums[bid] + x
                self.block_counts[bid] = self.block_counts[bid] + other.block_counts[bid]
            else:
                self.block_sums[bid] = x.copy()
                self.block_counts[bid] = other.block_counts[bid].copy()
        return self

    def _snapshot(self, bid: int) -> dict:
        b = self.block_sums.get(bid)
        return {"arrays": [a.copy() for a in (self.sums, self.comps, self.sumsq, self.counts,
                                                self.diverged)],
                "block": None if b is None else (b.copy(), self.block_counts[bid].copy())}

    def _rollback(self):
        """Undo the partial-chunk fold in ``tail``; returns ``(start, part)``."""
        t = self.tail
        self.tail = None
        (self.sums, self.comps, self.sumsq, self.counts,
         self.diverged) = [a.copy() for a in t["before"]["arrays"]]
        bid = t["start"] // self.block
        if t["before"]["block"] is None:
            del self.block_sums[bid], self.block_counts[bid]
        else:
            self.block_sums[bid], self.block_counts[bid] = (a.copy() for a in t["before"]["block"])
        lo, hi = self.ranges[-1]
        self.ranges[-1:] = [(lo, t["start"])] if lo < t["start"] else []
        return t["start"], [a.copy() for a in t["part"]]

    def copy(self) -> "RunAccumulator":
        return restore(checkpoint(self))

    # -- estimates --------------------------------------------------------

    def total(self, metric, cls: str = "all") -> float:
        q = self.metric_index(metric)
        if cls == POOLED:
            return 0.5 * (self.total(metric, "sep_A") + self.total(metric, "sep_B"))
        c = _class_index(cls)
        return float(self.sums[q, c] + self.comps[q, c])

    def count(self, cls: str = "all") -> float:
        if cls == POOLED:
            return 0.5 * (self.count("sep_A") + self.count("sep_B"))
        return int(self.counts[_class_index(cls)])

    def scale(self) -> float:
        return self.box / (self.M * self.multiplicity)

    def estimate(self, metric, cls: str = "all") -> float | None:
        """Volume (n=0) or rank-stratum hyperarea estimate, ``None`` before any point."""
        if self.M == 0:
            return None
        return self.total(metric, cls) * self.scale()

    def probability(self, metric, cls: str = POOLED) -> float | None:
        den = self.total(metric, "all")
        if den <= 0:
            return None
        return self.total(metric, cls) / den

    def fraction(self, cls: str) -> float | None:
        """Raw share of hypercube points in ``cls`` (no weights)."""
        if self.M == 0:
            return None
        return self.count(cls) / self.M

    def divergent(self, metric) -> bool:
        return bool(self.diverged[self.metric_index(metric)] > 0)


def accumulator_for(config: RunConfig, n: int) -> RunAccumulator:
    projection = config.hyperarea_mode == "projection" and n > 0
    dim = param.stratum_dim(config.N, 0 if projection else n)
    base = config.base if config.base is not None and config.base >= dim else None
    spec = SequenceSpec(dim, base, config.scramble, config.seed, config.kind)
    return RunAccumulator(config.N, n, config.metrics, spec, config.dims, config.angle_map,
                          config.eps, config.floor, config.block, projection)


def projection_columns(N: int, n: int) -> np.ndarray:
    """Columns of a full-rank point that form a point of stratum ``n``.

    The leading ``r-1`` spectrum coordinates are kept (the dropped ones pin the
    trailing eigenvalues to zero) and the Euler block is truncated to the
    levels the stratum still has.
    """
    r0, r = N, N - n
    spec = np.arange(r - 1)
    euler = r0 - 1 + np.arange(param.n_euler(N, n))
    return np.concatenate([spec, euler])


# --------------------------------------------------------------------------
# driving the kernels


class _Source:
    def __init__(self, acc: RunAccumulator, start: int):
        self.seq = make_sequence(acc.spec).seek(start)
        self.cols = projection_columns(acc.N, acc.n) if acc.projection else None
        self.buf = np.empty((CHUNK, acc.spec.dimension))

    def take(self, count: int) -> np.ndarray:
        pts = self.seq.fill(self.buf[:count])
        if self.cols is not None:
            pts = np.ascontiguousarray(pts[:, self.cols])
        return pts


def advance(acc: RunAccumulator, stop: int, start: int | None = None, should_stop=None,
            on_block=None, use_numba=None) -> bool:
    """Accumulate points ``[start, stop)`` into ``acc``.

    ``start`` defaults to ``acc.next_index``.  Chunks end on multiples of the
    chunk size and of the block size, so a run stopped and resumed at any
    chunk boundary repeats the exact arithmetic of an uninterrupted run.
    Returns ``False`` when ``should_stop()`` cut the run short.
    """
    idx = acc.next_index if start is None else int(start)
    if stop <= idx:
        return True
    N, n = acc.N, acc.n
    ranges = param.angle_ranges(N, n, acc.angle_map)
    haar = acc.angle_map == "haar"
    s_a = septest.block_size(N, "A", acc.dims)
    s_b = septest.block_size(N, "B", acc.dims)
    kinds = [MetricKind(m) for m in acc.metrics]
    codes = np.array([k.code for k in kinds], dtype=np.int64)
    flagged = np.array([k.divergent_volume for k in kinds], dtype=np.bool_)
    src = _Source(acc, idx)
    resume = acc.tail is not None and acc.tail["stop"] == idx == acc.next_index
    while idx < stop:
        if should_stop is not None and should_stop():
            return False
        natural = min((idx // CHUNK + 1) * CHUNK, (idx // acc.block + 1) * acc.block)
        nb = min(stop, natural)
        if resume:
            lo, part = acc._rollback()
            resume = False
        else:
            lo, part = idx, kernels.new_arrays(len(codes))
        pts = src.take(nb - idx)
        status = kernels.accumulate_points(pts, N, n, ranges, haar, s_a, s_b, codes, flagged,
                                           acc.eps, acc.floor, *part, use_numba=use_numba)
        if status != kernels.OK:
            raise EstimatorError(f"non-finite weight for points [{idx}, {nb})")
        before = acc._snapshot(lo // acc.block) if nb < natural else None
        acc.fold(lo, nb, part)
        if before is not None:
            acc.tail = {"start": lo, "stop": nb, "part": [a.copy() for a in part],
                        "before": before}
        idx = nb
        if on_block is not None and idx % acc.block == 0:
            on_block(acc)
    return True


def run_range(config: RunConfig, n: int, start: int, stop: int) -> RunAccumulator:
    """Fresh accumulator over ``[start, stop)``; the unit of work of a shard."""
    acc = accumulator_for(config, n)
    advance(acc, stop, start=start)
    return acc


def shard_bounds(start: int, stop: int, shards: int) -> list[tuple[int, int]]:
    edges = [start + (stop - start) * k // shards for k in range(shards + 1)]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run_sharded(config: RunConfig, n: int, start: int, stop: int,
                acc: RunAccumulator | None = None) -> RunAccumulator:
    """Split ``[start, stop)`` over ``config.shards`` workers and merge in order."""
    acc = acc if acc is not None else accumulator_for(config, n)
    bounds = shard_bounds(start, stop, config.shards)
    workers = min(config.effective_workers(), len(bounds))
    if workers <= 1:
        parts = [run_range(config, n, a, b) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(run_range, config, n, a, b) for a, b in bounds]
            parts = [f.result() for f in futs]
    for p in parts:
        acc.merge(p)
    return acc


class StopFlag:
    """Set by SIGINT/SIGTERM while installed; polled between chunks."""

    def __init__(self):
        self.hit = False
        self._old = {}

    def __call__(self) -> bool:
        return self.hit

    def _handle(self, signum, frame):
        self.hit = True

    def __enter__(self):
        for s in (signal.SIGINT, signal.SIGTERM):
            try:
                self._old[s] = signal.signal(s, self._handle)
            except ValueError:  # not the main thread
                pass
        return self

    def __exit__(self, *exc):
        for s, h in self._old.items():
            signal.signal(s, h)
        return False


def run_stratum(config: RunConfig, n: int, acc: RunAccumulator | None = None,
                checkpoint_path: str | None = None, should_stop=None) -> RunAccumulator:
    """Bring the stratum-``n`` accumulator up to ``config.points``.

    Serial runs checkpoint at every block boundary when ``checkpoint_path`` is
    set.  Raises :class:`Interrupted` (after saving) when ``should_stop`` fires.
    """
    acc = acc if acc is not None else accumulator_for(config, n)
    if acc.digest != accumulator_for(config, n).digest:
        raise CheckpointError("checkpoint belongs to a different configuration")
    if not acc.contiguous:
        raise CheckpointError("checkpoint does not cover a prefix of the sequence")
    if acc.M > config.points:
        raise EstimatorError(f"checkpoint holds {acc.M} points, more than requested")

    def save(a):
        if checkpoint_path:
            save_checkpoint(a, checkpoint_path)

    if config.shards == 1:
        done = advance(acc, config.points, should_stop=should_stop, on_block=save)
        save(acc)
        if not done:
            raise Interrupted(f"stopped at index {acc.next_index}")
    else:
        run_sharded(config, n, acc.next_index, config.points, acc)
        save(acc)
    return acc


# --------------------------------------------------------------------------
# checkpoint


def checkpoint(acc: RunAccumulator) -> bytes:
    meta = acc.identity()
    meta["ranges"] = [list(r) for r in acc.ranges]
    bids = sorted(acc.block_sums)
    meta["n_blocks"] = len(bids)
    meta["tail"] = _tail_to_json(acc.tail)
    mj = json.dumps(meta, sort_keys=True).encode()
    m = len(acc.metrics)
    parts = [_HEAD.pack(MAGIC, VERSION, acc.digest, len(mj)), mj,
             acc.sums.astype("<f8").tobytes(), acc.comps.astype("<f8").tobytes(),
             acc.sumsq.astype("<f8").tobytes(), acc.counts.astype("<i8").tobytes(),
             acc.diverged.astype("<i8").tobytes(),
             np.asarray(bids, dtype="<i8").tobytes()]
    bs = np.array([acc.block_sums[b] for b in bids]).reshape(len(bids), m, len(CLASSES))
    bc = np.array([acc.block_counts[b] for b in bids]).reshape(len(bids), len(CLASSES))
    parts += [bs.astype("<f8").tobytes(), bc.astype("<i8").tobytes()]
    body = b"".join(parts)
    return body + hashlib.blake2b(body, digest_size=8).digest()


def restore(data: bytes) -> RunAccumulator:
    if len(data) < _HEAD.size + 8:
        raise CheckpointError("checkpoint truncated")
    body, trailer = data[:-8], data[-8:]
    if hashlib.blake2b(body, digest_size=8).digest() != trailer:
        raise CheckpointError("checkpoint digest mismatch (corrupt or truncated)")
    magic, version, digest, mlen = _HEAD.unpack_from(body)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file")
    if version != VERSION:
        raise CheckpointError(f"checkpoint version {version}, expected {VERSION}")
    pos = _HEAD.size
    meta = json.loads(body[pos:pos + mlen])
    pos += mlen
    m, c, k = len(meta["metrics"]), len(CLASSES), meta["n_blocks"]

    def take(dtype, count, shape):
        nonlocal pos
        size = np.dtype(dtype).itemsize * count
        if pos + size > len(body):
            raise CheckpointError("checkpoint truncated")
        arr = np.frombuffer(body, dtype=dtype, count=count, offset=pos).reshape(shape)
        pos += size
        return arr.astype(arr.dtype.newbyteorder("="))

    sums, comps = take("<f8", m * c, (m, c)), take("<f8", m * c, (m, c))
    sumsq, counts = take("<f8", m, (m,)), take("<i8", c, (c,))
    diverged, bids = take("<i8", m, (m,)), take("<i8", k, (k,))
    bs, bc = take("<f8", k * m * c, (k, m, c)), take("<i8", k * c, (k, c))
    if pos != len(body):
        raise CheckpointError("checkpoint has trailing bytes")
    acc = RunAccumulator(meta["N"], meta["n"], tuple(meta["metrics"]),
                         SequenceSpec.from_dict(meta["spec"]), tuple(meta["dims"]),
                         meta["angle_map"], meta["eps"], meta["floor"], meta["block"],
                         meta["projection"], sums, comps, sumsq, counts, diverged,
                         [tuple(r) for r in meta["ranges"]],
                         {int(b): bs[i] for i, b in enumerate(bids)},
                         {int(b): bc[i] for i, b in enumerate(bids)})
    if acc.digest != digest:
        raise CheckpointError("checkpoint header does not match its contents")
    acc.tail = _tail_from_json(meta.get("tail"))
    return acc


_TAIL_DTYPES = (np.float64, np.float64, np.float64, np.int64, np.int64)


def _tail_to_json(t):
    # JSON floats round-trip exactly, so the tail rides in the metadata
    if t is None:
        return None
    b = t["before"]["block"]
    return {"start": t["start"], "stop": t["stop"],
            "part": [a.tolist() for a in t["part"]],
            "before": [a.tolist() for a in t["before"]["arrays"]],
            "block": None if b is None else [b[0].tolist(), b[1].tolist()]}


def _tail_from_json(d):
    if d is None:
        return None
    arr = lambda xs: [np.array(x, dtype=dt) for x, dt in zip(xs, _TAIL_DTYPES)]
    b = d["block"]
    return {"start": d["start"], "stop": d["stop"], "part": arr(d["part"]),
            "before": {"arrays": arr(d["before"]),
                       "block": None if b is None else (np.array(b[0], dtype=np.float64),
                                                        np.array(b[1], dtype=np.int64))}}


def save_checkpoint(acc: RunAccumulator, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(checkpoint(acc))
    os.replace(tmp, path)


def load_checkpoint(path: str) -> RunAccumulator:
    with open(path, "rb") as fh:
        return restore(fh.read())


# --------------------------------------------------------------------------
# oracles


def oracle(metric: str, N: int, n: int, cls: str = "all") -> exact.ExactQuantity | None:
    """Known or conjectured value for an estimate, if there is one."""
    if cls == "all":
        if metric == "km" and n == 0:
            b = exact.bures_rank_volume(N, 0)
            k = exact.km_volume_ratio(N)
            return exact.ExactQuantity(f"km_volume_{N}", k.expr * b.expr, N, 0, k.status,
                                       metric="km", note="conjectured KM/Bures ratio times Bures")
        return exact.exact_volume(metric, N, n)
    if cls != POOLED:
        return None
    names = {
        ("bures", 6, 0): "sep_bures_volume_6", ("bures", 6, 1): "sep_bures_hyperarea_6",
        ("hs", 6, 0): "sep_hs_volume_6", ("hs", 6, 1): "sep_hs_hyperarea_6",
        ("hs", 6, 2): "sep_hs_volume_6_rank4",
        ("hs", 4, 0): "sep_hs_volume_4", ("hs", 4, 1): "sep_hs_hyperarea_4",
    }
    key = (metric, N, n)
    if key in names:
        return exact.conjecture_value(names[key])
    # SD and 4*KM units are 2^(N^2-1) times the Bures and KM separable volumes
    scaled = {("bures", 4, 0): "sd_sep_volume_4", ("km", 4, 0): "km4_sep_volume_4"}
    if key in scaled:
        q = exact.conjecture_value(scaled[key])
        return exact.ExactQuantity(f"{q.name}_bures_units", q.expr / 2 ** (N * N - 1), N, n,
                                   q.status, metric=metric, note=q.note)
    return None


@dataclass(frozen=True)
class OracleComparison:
    name: str
    value: float
    status: str
    ratio: float | None

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "status": self.status,
                "ratio": self.ratio}


def compare(estimate: float | None, q: exact.ExactQuantity | None) -> OracleComparison | None:
    if q is None:
        return None
    v = float(q)
    ratio = None if estimate is None or v == 0 else estimate / v
    return OracleComparison(q.name, v, q.status.value, ratio)


# --------------------------------------------------------------------------
# reports


@dataclass
class MetricEstimate:
    metric: str
    estimates: dict
    probabilities: dict
    divergent: bool
    floor: float | None
    oracles: dict

    def to_dict(self) -> dict:
        return {"metric": self.metric, "estimates": self.estimates,
                "probabilities": self.probabilities, "divergent": self.divergent,
                "floor": self.floor,
                "oracles": {k: v.to_dict() for k, v in self.oracles.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricEstimate":
        return cls(d["metric"], d["estimates"], d["probabilities"], d["divergent"], d["floor"],
                   {k: OracleComparison(**v) for k, v in d["oracles"].items()})


@dataclass
class StratumEstimate:
    N: int
    n: int
    M: int
    counts: dict
    fractions: dict
    metrics: dict

    def to_dict(self) -> dict:
        return {"N": self.N, "n": self.n, "M": self.M, "counts": self.counts,
                "fractions": self.fractions,
                "metrics": {k: v.to_dict() for k, v in self.metrics.items()}}

    @classmethod
    def from_dict(cls, d: dict) -> "StratumEstimate":
        return cls(d["N"], d["n"], d["M"], d["counts"], d["fractions"],
                   {k: MetricEstimate.from_dict(v) for k, v in d["metrics"].items()})


def stratum_estimate(acc: RunAccumulator) -> StratumEstimate:
    out = {}
    for tag in acc.metrics:
        kind = MetricKind(tag)
        est = {c: acc.estimate(tag, c) for c in REPORT_CLASSES}
        prob = {c: acc.probability(tag, c) for c in SEP_CLASSES}
        ors = {}
        for c in ("all", POOLED):
            cmp = compare(est[c], oracle(tag, acc.N, acc.n, c))
            if cmp is not None:
                ors[c] = cmp
        floor = acc.floor if kind in (MetricKind.KM, MetricKind.GEOM) and acc.n > 0 else None
        out[tag] = MetricEstimate(tag, est, prob, acc.divergent(tag), floor, ors)
    counts = {c: acc.count(c) for c in REPORT_CLASSES}
    fracs = {c: acc.fraction(c) for c in SEP_CLASSES}
    return StratumEstimate(acc.N, acc.n, acc.M, counts, fracs, out)


def _div(a, b):
    if a is None or b is None or b == 0:
        return None
    return a / b


@dataclass(frozen=True)
class RatioEntry:
    """Hyperarea-to-volume ratios and the separability probability ratio for one metric.

    ``omega`` is computed as ``R_all / R_sep``; ``omega_from_p`` as
    ``P_N / P_{N-1}``.  The two agree identically.
    """
    metric: str
    R_all: float | None
    R_sep: float | None
    omega: float | None
    P_N: float | None
    P_N1: float | None
    omega_from_p: float | None
    gamma_exact: OracleComparison | None = None

    @property
    def omega_minus_2(self) -> float | None:
        return None if self.omega is None else self.omega - 2.0

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("metric", "R_all", "R_sep", "omega", "P_N", "P_N1", "omega_from_p")}
        d["omega_minus_2"] = self.omega_minus_2
        d["gamma_exact"] = None if self.gamma_exact is None else self.gamma_exact.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RatioEntry":
        g = d.get("gamma_exact")
        return cls(d["metric"], d["R_all"], d["R_sep"], d["omega"], d["P_N"], d["P_N1"],
                   d["omega_from_p"], OracleComparison(**g) if g else None)


def ratio_entry(metric: str, vol_all, area_all, vol_sep, area_sep, N: int | None = None
                ) -> RatioEntry:
    """Ratios from four volume/hyperarea numbers; zero separable parts give ``None``."""
    R_all = _div(area_all, vol_all)
    R_sep = _div(area_sep, vol_sep) if area_sep else None
    omega = _div(R_all, R_sep)
    P_N = _div(vol_sep, vol_all)
    P_N1 = _div(area_sep, area_all)
    omega_p = _div(P_N, P_N1) if P_N1 else None
    g = None
    if N is not None and metric in ("bures", "hs"):
        g = compare(R_all, exact.gamma_ratio(metric, N))
    return RatioEntry(metric, R_all, R_sep, omega, P_N, P_N1, omega_p, g)


def ratio_report(vol: RunAccumulator, area: RunAccumulator, cls: str = POOLED) -> dict:
    """Per-metric :class:`RatioEntry` from a volume and a hyperarea accumulator."""
    if vol.n != 0 or area.n != 1 or vol.N != area.N:
        raise EstimatorError("ratio_report needs the n=0 and n=1 strata of one N")
    out = {}
    for tag in vol.metrics:
        if tag not in area.metrics:
            continue
        out[tag] = ratio_entry(tag, vol.estimate(tag), area.estimate(tag),
                               vol.estimate(tag, cls), area.estimate(tag, cls), vol.N)
    return out


@dataclass
class EstimateReport:
    config: dict
    strata: dict
    ratios: dict
    probability_ratios: dict
    pooled_class: str = POOLED

    def to_dict(self) -> dict:
        return {"config": self.config,
                "strata": {str(k): v.to_dict() for k, v in self.strata.items()},
                "ratios": {k: v.to_dict() for k, v in self.ratios.items()},
                "probability_ratios": self.probability_ratios,
                "pooled_class": self.pooled_class}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateReport":
        return cls(d["config"], {int(k): StratumEstimate.from_dict(v) for k, v in d["strata"].items()},
                   {k: RatioEntry.from_dict(v) for k, v in d["ratios"].items()},
                   d["probability_ratios"], d.get("pooled_class", POOLED))


def build_report(accs: dict, config: dict | None = None) -> EstimateReport:
    """Report over the strata in ``accs`` (mapping ``n -> RunAccumulator``)."""
    strata = {n: stratum_estimate(a) for n, a in sorted(accs.items())}
    ratios = {}
    if 0 in accs and 1 in accs:
        ratios = ratio_report(accs[0], accs[1])
    pr = {}
    ns = sorted(accs)
    if len(ns) > 1:
        for tag in accs[ns[0]].metrics:
            row = {}
            for i, a in enumerate(ns):
                for b in ns[i + 1:]:
                    pa = accs[a].probability(tag, POOLED)
                    pb = accs[b].probability(tag, POOLED)
                    row[f"{a}/{b}"] = _div(pa, pb) if pb else None
            pr[tag] = row
    if config is None:
        first = accs[ns[0]]
        config = first.identity()
    return EstimateReport(config, strata, ratios, pr)


# --------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceSeries:
    block: int
    rows: list

    COLUMNS = ("block", "samples", "metric", "class", "estimate", "ratio_to_oracle",
               "oracle_status")

    def __len__(self) -> int:
        return len({r[0] for r in self.rows})

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for row in self.rows:
            lines.append(",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v))
                                  for v in row))
        return "\n".join(lines) + "\n"

    def series(self, metric: str, cls: str = "all") -> list:
        return [r for r in self.rows if r[2] == metric and r[3] == cls]


def convergence(acc: RunAccumulator, classes=("all", POOLED, "sep_A", "sep_B",
                                              "sep_either", "sep_both")) -> ConvergenceSeries:
    """Cumulative estimates after each complete block of a prefix run."""
    if not acc.contiguous:
        raise EstimatorError("convergence series needs a run covering [0, M)")
    B = acc.block
    nblocks = acc.M // B
    m = len(acc.metrics)
    ors = {(tag, c): oracle(tag, acc.N, acc.n, c) for tag in acc.metrics for c in classes}
    orv = {k: (None if q is None else float(q)) for k, q in ors.items()}
    run = np.zeros((m, len(CLASSES)))
    rows = []
    for k in range(nblocks):
        run = run + acc.block_sums[k]
        samples = (k + 1) * B
        tot = acc.sums + acc.comps if samples == acc.M else run
        scale = acc.box / (samples * acc.multiplicity)
        for q, tag in enumerate(acc.metrics):
            for c in classes:
                if c == POOLED:
                    s = 0.5 * (tot[q, 1] + tot[q, 2])
                else:
                    s = tot[q, CLASSES.index(c)]
                est = float(s * scale)
                o = orv[(tag, c)]
                ratio = None if o is None else est / o
                status = "" if ors[(tag, c)] is None else ors[(tag, c)].status.value
                rows.append((k, samples, tag, c, est, ratio, status))
    return ConvergenceSeries(B, rows)
