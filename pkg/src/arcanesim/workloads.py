"""Traffic generation: incast, permutation, tornado, trace-driven flows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    src: str
    dst: str
    size_bytes: int
    start_ns: int


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str                       # incast | permutation | tornado | trace
    message_bytes: int = 1 << 20
    incast_degree: int = 8
    load_fraction: float = 0.6
    trace_cdf: tuple = ()           # ((size_bytes, cum_prob), ...)
    horizon_ns: int = 5_000_000     # trace-driven window, 5 ms

    def __post_init__(self):
        if self.kind not in ("incast", "permutation", "tornado", "trace"):
            raise ValueError(f"unknown workload kind {self.kind!r}")


def load_trace_cdf(path) -> tuple:
    """Two-column text file: size_bytes cum_prob, '#' comments allowed."""
    points = []
    with open(path) as f:
        for ln, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{ln}: expected 'size_bytes cum_prob'")
            points.append((int(parts[0]), float(parts[1])))
    validate_cdf(points)
    return tuple(points)


def validate_cdf(points) -> None:
    if not points:
        raise ValueError("empty trace CDF")
    for (s1, p1), (s2, p2) in zip(points, points[1:]):
        if s2 <= s1 or p2 <= p1:
            raise ValueError("trace CDF must be strictly increasing in both columns")
    if abs(points[-1][1] - 1.0) > 1e-9:
        raise ValueError("trace CDF must end at probability 1.0")
    if points[0][1] < 0:
        raise ValueError("trace CDF probabilities must be nonnegative")


def sample_flow_size(points, u: float) -> int:
    """Inverse-CDF draw with linear interpolation between the points."""
    prev_s, prev_p = points[0]
    if u <= prev_p:
        return prev_s
    for s, p in points[1:]:
        if u <= p:
            frac = (u - prev_p) / (p - prev_p)
            return max(1, int(round(prev_s + frac * (s - prev_s))))
        prev_s, prev_p = s, p
    return points[-1][0]


def generate(spec: WorkloadSpec, topology, rng: np.random.Generator,
             host_bandwidth_bps: int | None = None) -> list[FlowSpec]:
    """Flow list for one run; deterministic given (spec, topology, rng)."""
    hosts = topology.hosts
    n = len(hosts)
    if spec.kind == "incast":
        if spec.incast_degree >= n:
            raise ValueError(f"incast degree {spec.incast_degree} needs at least {spec.incast_degree + 1} hosts")
        dst = hosts[0]
        return [
            FlowSpec(i, hosts[1 + i], dst, spec.message_bytes, 0)
            for i in range(spec.incast_degree)
        ]
    if spec.kind == "tornado":
        if n % 2:
            raise ValueError("tornado needs an even host count")
        return [
            FlowSpec(i, hosts[i], hosts[(i + n // 2) % n], spec.message_bytes, 0)
            for i in range(n)
        ]
    if spec.kind == "permutation":
        perm = _derangement(n, rng)
        return [
            FlowSpec(i, hosts[i], hosts[perm[i]], spec.message_bytes, 0)
            for i in range(n)
        ]
    # trace-driven: Poisson arrivals at the target offered load.
    if not spec.trace_cdf:
        raise ValueError("trace workload needs a trace_cdf")
    if host_bandwidth_bps is None:
        host_bandwidth_bps = topology.link_capacity_bps
    mean_size = _cdf_mean_bytes(spec.trace_cdf)
    agg_bps = host_bandwidth_bps * n
    rate_per_ns = spec.load_fraction * agg_bps / 8.0 / mean_size / 1e9
    flows = []
    t = 0.0
    fid = 0
    while True:
        t += rng.exponential(1.0 / rate_per_ns)
        if t >= spec.horizon_ns:
            break
        src = hosts[int(rng.integers(n))]
        dst = src
        while dst == src:
            dst = hosts[int(rng.integers(n))]
        size = sample_flow_size(spec.trace_cdf, float(rng.random()))
        flows.append(FlowSpec(fid, src, dst, size, int(t)))
        fid += 1
    return flows


def _derangement(n: int, rng: np.random.Generator) -> list[int]:
    if n < 2:
        raise ValueError("permutation needs at least two hosts")
    while True:
        perm = rng.permutation(n)
        if not (perm == np.arange(n)).any():
            return perm.tolist()


def _cdf_mean_bytes(points) -> float:
    """Mean of the interpolated size distribution (trapezoid per segment)."""
    mean = points[0][0] * points[0][1]
    for (s1, p1), (s2, p2) in zip(points, points[1:]):
        mean += (p2 - p1) * (s1 + s2) / 2.0
    return mean
