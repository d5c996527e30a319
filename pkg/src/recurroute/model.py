"""Service specifications and eventually affine payoff functions.

A service specification describes a set of nodes that require recurrent
visits, positive integer traversal times between them, one payoff function
per node, a set of moves whose traversal may be prolonged by waiting, and a
set of compulsory nodes that carry a per-time-unit penalty when abandoned.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PayoffFunction",
    "ServiceSpec",
    "DeaffinizedSpec",
    "ValidationReport",
    "payoff_at",
    "validate_spec",
    "deaffinize",
]

#: A validation report is a list of human-readable violation messages;
#: an empty list means the specification is valid.
ValidationReport = list


@dataclass(frozen=True)
class PayoffFunction:
    """Payoff received when a node is revisited after ``t`` time units.

    The function is *eventually affine*: ``prefix[i]`` holds the value at
    ``t = i + 1`` for ``t < k``, and for every ``t >= k`` the value equals
    ``d + (t - k) * c`` exactly.
    """

    prefix: tuple[float, ...]
    k: int
    d: float
    c: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"threshold k must be >= 1, got {self.k}")
        if len(self.prefix) != self.k - 1:
            raise ValueError(
                f"prefix must have exactly k-1 = {self.k - 1} entries, "
                f"got {len(self.prefix)}"
            )
        object.__setattr__(self, "prefix", tuple(float(p) for p in self.prefix))

    def __call__(self, t: int) -> float:
        return payoff_at(self, t)

    def values(self, ts: np.ndarray) -> np.ndarray:
        """Vectorised evaluation for an array of revisit times (all >= 1)."""
        ts = np.asarray(ts, dtype=np.int64)
        if ts.size and ts.min() < 1:
            raise ValueError("revisit times must be >= 1")
        out = self.d + (ts - self.k) * self.c
        if self.k > 1:
            pre = ts < self.k
            prefix = np.asarray(self.prefix, dtype=np.float64)
            out = np.where(pre, prefix[np.minimum(ts, self.k - 1) - 1], out)
        return out

    def table(self, upto: int) -> np.ndarray:
        """Values at ``t = 1 .. upto`` as a dense array (index ``t - 1``)."""
        return self.values(np.arange(1, upto + 1, dtype=np.int64))


def payoff_at(p: PayoffFunction, t: int) -> float:
    """Evaluate the payoff for a revisit after exactly ``t`` time units."""
    if t < 1:
        raise ValueError(f"revisit time must be >= 1, got {t}")
    if t < p.k:
        return p.prefix[t - 1]
    return p.d + (t - p.k) * p.c


@dataclass(frozen=True, eq=False)
class ServiceSpec:
    """A routing instance: nodes, traversal times, payoffs, and constraints.

    ``time[v, u]`` is the (positive, integer) number of minutes needed to
    move from ``v`` to ``u``; the diagonal is meaningful since a service
    action at a node takes time too.  ``prolongable`` lists the ordered node
    pairs along which the traversal may be prolonged by integer waits.
    ``compulsory`` nodes charge their payoff slope ``c`` per time unit if
    they are eventually abandoned.
    """

    time: np.ndarray
    payoffs: tuple[PayoffFunction, ...]
    prolongable: frozenset
    compulsory: frozenset
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        time = np.asarray(self.time, dtype=np.int64)
        if time.ndim != 2 or time.shape[0] != time.shape[1]:
            raise ValueError(f"time must be a square matrix, got shape {time.shape}")
        if len(self.payoffs) != time.shape[0]:
            raise ValueError(
                f"need one payoff per node: {len(self.payoffs)} payoffs "
                f"for {time.shape[0]} nodes"
            )
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "payoffs", tuple(self.payoffs))
        object.__setattr__(self, "prolongable", frozenset(
            (int(a), int(b)) for a, b in self.prolongable))
        object.__setattr__(self, "compulsory", frozenset(
            int(v) for v in self.compulsory))

    @property
    def node_count(self) -> int:
        return self.time.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ServiceSpec):
            return NotImplemented
        return (
            np.array_equal(self.time, other.time)
            and self.payoffs == other.payoffs
            and self.prolongable == other.prolongable
            and self.compulsory == other.compulsory
            and self.meta == other.meta
        )


def validate_spec(s: ServiceSpec) -> ValidationReport:
    """Collect model-convention violations; an empty report means valid."""
    report = []
    n = s.node_count
    bad = np.argwhere(s.time < 1)
    for v, u in bad:
        report.append(
            f"non-positive traversal time: time({v},{u}) = {s.time[v, u]}"
        )
    for v, p in enumerate(s.payoffs):
        if p.k < 1:
            report.append(f"node {v}: threshold k must be >= 1, got {p.k}")
        if len(p.prefix) != p.k - 1:
            report.append(
                f"node {v}: prefix has {len(p.prefix)} entries, expected {p.k - 1}"
            )
        if v not in s.compulsory and p.c != 0.0:
            report.append(
                f"node {v}: nonzero slope off compulsory set (c = {p.c})"
            )
    for a, b in sorted(s.prolongable):
        if not (0 <= a < n and 0 <= b < n):
            report.append(f"prolongable pair ({a},{b}) out of range")
    for v in sorted(s.compulsory):
        if not (0 <= v < n):
            report.append(f"compulsory node {v} out of range")
    return report


@dataclass(frozen=True)
class DeaffinizedSpec:
    """A spec whose payoffs have had their eventual slope removed.

    Each payoff ``P_v`` is replaced by ``Q_v(t) = P_v(t) - t * c_v``, which
    is eventually *constant* (equal to ``d_v - k_v * c_v`` for ``t >= k_v``).
    The mean payoff of any schedule under the original payoffs, penalties
    included, equals its mean payoff under ``Q`` plus ``shift``, the sum of
    slopes over compulsory nodes.
    """

    base: ServiceSpec
    shift: float


def deaffinize(s: ServiceSpec) -> DeaffinizedSpec:
    """Remove eventual slopes so every payoff becomes eventually constant."""
    qs = []
    for p in s.payoffs:
        if p.c == 0.0:
            qs.append(p)
            continue
        prefix = tuple(p.prefix[t - 1] - t * p.c for t in range(1, p.k))
        qs.append(PayoffFunction(prefix=prefix, k=p.k, d=p.d - p.k * p.c, c=0.0))
    shift = float(sum(s.payoffs[v].c for v in sorted(s.compulsory)))
    base = ServiceSpec(
        time=s.time,
        payoffs=tuple(qs),
        prolongable=s.prolongable,
        compulsory=s.compulsory,
        meta=s.meta,
    )
    return DeaffinizedSpec(base=base, shift=shift)
