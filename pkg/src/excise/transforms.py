"""Deterministic path transformations: bridge <-> reversed-meander maps,
Brownian scaling, and the excision-and-concatenation maps with their clocks.

Excursion endpoints follow the linear interpolant exactly: the left endpoint
of a forward excursion is always a node, while the right endpoint may be the
interpolated time where the path re-crosses the excursion level on its way
to a new maximum. The envelope is constant across each excursion, so excising
an interval and closing the gap joins two identical float values; junctions
are exact by construction, with no tolerances anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import scan_excursions
from .path_core import Path, argmax_unique, hitting_time


@dataclass(frozen=True)
class ExcursionRecord:
    """One excursion below the (one- or two-sided) maximum envelope."""

    g: float
    d: float
    level: float
    length: float
    height: float
    excised: bool
    phase: str

    @property
    def min_value(self) -> float:
        return self.level - self.height


@dataclass(frozen=True)
class ClockMap:
    """Retained-time measure u at every source node and its inverse alpha,
    materialized as the source-node index of each retained output node."""

    source_times: np.ndarray
    u: np.ndarray
    alpha_idx: np.ndarray  # output node -> source node index

    @property
    def alpha_times(self) -> np.ndarray:
        return self.source_times[self.alpha_idx]


@dataclass(frozen=True)
class TransformOutput:
    excised: Path
    tau: float
    clock: ClockMap
    records: list
    argmax_time: float

    @property
    def excised_length(self) -> float:
        return math.fsum(r.length for r in self.records if r.excised)


class _RawExcursion:
    """Scan output in source-index coordinates, before the keep/excise rule."""

    __slots__ = ("g", "d", "level", "minv", "lo", "hi", "junction", "phase")

    def __init__(self, g, d, level, minv, lo, hi, junction, phase):
        self.g = g          # left endpoint time
        self.d = d          # right endpoint time
        self.level = level  # envelope value, constant on [g, d]
        self.minv = minv    # path minimum over the excursion
        self.lo = lo        # first source node with g <= t
        self.hi = hi        # last source node with t <= d
        self.junction = junction  # the node kept at the glue point if excised
        self.phase = phase


def _forward_excursions(times, values, phase):
    out = []
    for g, d, lev, mv, gi, dseg, node_end in zip(*scan_excursions(times, values)):
        if node_end:
            out.append(_RawExcursion(g, d, lev, mv, gi, dseg, dseg, phase))
        else:
            out.append(_RawExcursion(g, d, lev, mv, gi, dseg - 1, gi, phase))
    return out


def _backward_excursions(times, values, phase):
    """Excursions below the backward running max, via the time-reversed path."""
    horizon = times[-1]
    rt = horizon - times[::-1]
    rt[0] = 0.0
    rv = values[::-1].copy()
    n = times.size - 1
    out = []
    for g, d, lev, mv, gi, dseg, node_end in zip(*scan_excursions(rt, rv)):
        og, od = horizon - d, horizon - g
        hi = n - gi
        lo = n - dseg if node_end else n - dseg + 1
        out.append(_RawExcursion(og, od, lev, mv, lo, hi, hi, phase))
    out.reverse()
    return out


def _assemble(times, values, raw, excised_flags, kind, level=None, argmax_time=0.0):
    """Drop the excised intervals, close the gaps, and build the clock."""
    n = times.size
    keep = np.ones(n, dtype=bool)
    delta = np.zeros(n)
    records = []
    for exc, flag in zip(raw, excised_flags):
        records.append(ExcursionRecord(
            g=float(exc.g), d=float(exc.d), level=float(exc.level),
            length=float(exc.d - exc.g), height=float(exc.level - exc.minv),
            excised=bool(flag), phase=exc.phase))
        if not flag:
            continue
        keep[exc.lo:exc.hi + 1] = False
        keep[exc.junction] = True
        # the removed length is absorbed by the first kept node at or after d
        di = exc.junction if exc.junction == exc.hi else exc.hi + 1
        delta[di] += exc.d - exc.g

    shift = np.cumsum(delta)
    u = times - shift
    # nodes swallowed by an excision keep the retained time of the glue point
    for exc, flag in zip(raw, excised_flags):
        if flag:
            u[exc.lo:exc.hi + 1] = u[exc.junction]

    idx = np.flatnonzero(keep)
    out_times = times[idx] - shift[idx]
    out_times[0] = 0.0
    # a junction and the node after its gap are shifted by amounts differing
    # by the excised length; when the interpolated endpoint sits within an
    # ulp of that node the two subtractions can round to a tie, so collided
    # times are nudged forward to keep strict order
    if np.any(np.diff(out_times) <= 0.0):
        for j in range(1, out_times.size):
            if out_times[j] <= out_times[j - 1]:
                out_times[j] = np.nextafter(out_times[j - 1], np.inf)
    out_values = values[idx].copy()
    excised_path = Path(out_times, out_values, kind, level)
    clock = ClockMap(source_times=times.copy(), u=u, alpha_idx=idx)
    return TransformOutput(excised=excised_path, tau=float(out_times[-1]),
                           clock=clock, records=records,
                           argmax_time=float(argmax_time))


# ---------------------------------------------------------------------------
# bridge <-> reversed meander


def two_sided_max(path: Path) -> Path:
    """Forward running max before the argmax, backward running max after."""
    k, _ = argmax_unique(path)
    v = path.values
    env = np.empty_like(v)
    env[:k + 1] = np.maximum.accumulate(v[:k + 1])
    env[k:] = np.maximum.accumulate(v[:k - 1 if k else None:-1])[::-1]
    return Path(path.times, env, "free")


def t_me(path: Path) -> Path:
    """Bridge -> time-space reversed meander: reflect the part after the
    argmax rho, so the output climbs to 2*w(rho) at the right end."""
    if path.kind != "bridge":
        raise ValueError("t_me expects a bridge")
    k, rho = argmax_unique(path)
    t, v = path.times, path.values
    a = path.horizon
    n = t.size - 1
    j = np.arange(n - 1, k - 1, -1)
    out_t = np.concatenate([t[:k + 1], (a + rho) - t[j]])
    out_v = np.concatenate([v[:k + 1], v[k] + v[j]])
    out_t[-1] = a
    return Path(out_t, out_v, "meander_type")


def t_br(path: Path) -> Path:
    """Reversed meander -> bridge: cut at the first passage of half the
    terminal value and reflect the tail back (inverse of t_me)."""
    if path.kind not in ("meander_type", "first_passage"):
        raise ValueError("t_br expects a meander-type path")
    t, v = path.times, path.values
    end = float(v[-1])
    if end <= 0:
        raise ValueError("terminal value must be positive")
    gamma = hitting_time(path, end / 2)
    a = path.horizon
    t, v, k = _with_node(t, v, gamma, value=end / 2)
    n = t.size - 1
    j = np.arange(n - 1, k - 1, -1)
    out_t = np.concatenate([t[:k + 1], (a + gamma) - t[j]])
    out_v = np.concatenate([v[:k + 1], v[j] - v[k]])
    out_t[-1] = a
    out_v[-1] = 0.0
    return Path(out_t, out_v, "bridge")


def _with_node(times, values, t0, value=None):
    """Insert a node at time t0 (interpolated unless a value is pinned);
    return (times, values, index)."""
    j = int(np.searchsorted(times, t0))
    if j < times.size and times[j] == t0:
        return times, values, j
    w = np.interp(t0, times, values) if value is None else value
    return (np.insert(times, j, t0), np.insert(values, j, w), j)


def brownian_scale(path: Path) -> Path:
    """Map a path on [0, a] to [0, 1]: divide times by a and values by sqrt(a)."""
    a = path.horizon
    if a == 1.0:
        return path
    s = 1.0 / math.sqrt(a)
    t = path.times / a
    t[-1] = 1.0
    level = None if path.level is None else path.level * s
    return Path(t, path.values * s, path.kind, level)


# ---------------------------------------------------------------------------
# excision maps


def excise_bridge(path: Path) -> TransformOutput:
    """Excise the excursions of a bridge below its two-sided maximum envelope
    that reach level 0, and close the gaps."""
    if path.kind != "bridge":
        raise ValueError("excise_bridge expects a bridge")
    k, mu = argmax_unique(path)
    t, v = path.times, path.values
    pre = _forward_excursions(t[:k + 1], v[:k + 1], "pre_argmax")
    post = _backward_excursions(t[k:], v[k:], "post")
    for exc in post:
        exc.lo += k
        exc.hi += k
        exc.junction += k
    raw = pre + post
    flags = [exc.minv <= 0.0 for exc in raw]
    return _assemble(t, v, raw, flags, "bridge", argmax_time=mu)


def excise_meander(path: Path) -> TransformOutput:
    """Excise excursions below the running max of a reversed-meander-type
    path: before the half-level passage those reaching 0, after it those
    reaching half the terminal value."""
    if path.kind not in ("meander_type", "first_passage"):
        raise ValueError("excise_meander expects a meander-type path")
    end = float(path.values[-1])
    if end <= 0:
        raise ValueError("terminal value must be positive")
    half = end / 2
    gamma = hitting_time(path, half)
    raw = _forward_excursions(path.times, path.values, "pre_half")
    flags = []
    for exc in raw:
        if exc.d <= gamma:
            flags.append(exc.minv <= 0.0)
        else:
            exc.phase = "post"
            flags.append(exc.minv <= half)
    return _assemble(path.times, path.values, raw, flags, path.kind,
                     level=path.level, argmax_time=path.horizon)


def excise_to_level(path: Path, x: float) -> TransformOutput:
    """Truncate a free path at its first passage of x (interpolated node)
    and excise as for a meander with thresholds 0 before the x/2 passage
    and x/2 after it. Output terminal value is exactly x."""
    if not (x > 0):
        raise ValueError(f"level must be > 0, got {x}")
    gamma_x = hitting_time(path, x)
    if gamma_x is None:
        raise ValueError(f"path never reaches level {x}")
    t, v, j = _with_node(path.times, path.values, gamma_x)
    t, v = t[:j + 1].copy(), v[:j + 1].copy()
    v[-1] = x
    half = x / 2
    gamma_half = hitting_time(Path(t, v, "free"), half)
    raw = _forward_excursions(t, v, "pre_half")
    flags = []
    for exc in raw:
        if exc.d <= gamma_half:
            flags.append(exc.minv <= 0.0)
        else:
            exc.phase = "post"
            flags.append(exc.minv <= half)
    return _assemble(t, v, raw, flags, "first_passage", level=x,
                     argmax_time=float(gamma_x))


def g_br(path: Path) -> Path:
    """Normalized bridge excision: excise, then Brownian-scale to [0, 1]."""
    return brownian_scale(excise_bridge(path).excised)


def g_me(path: Path) -> Path:
    """Normalized meander excision: excise, then Brownian-scale to [0, 1]."""
    return brownian_scale(excise_meander(path).excised)


# ---------------------------------------------------------------------------
# regularity


def regularity_check(path: Path) -> list:
    """Grid-level proxy for path regularity.

    Reports (i) one-sided argmax ties: a node that re-attains an earlier
    prefix maximum (or, mirrored, a suffix maximum), and (ii) interior nodes
    at exactly 0 that are strict local minima. Sampled bridges produce an
    empty list with overwhelming probability.
    """
    if path.kind != "bridge":
        raise ValueError("regularity_check expects a bridge")
    v = path.values
    violations = []
    fwd = np.maximum.accumulate(v)
    ties = np.flatnonzero((v[1:] == fwd[:-1]) & (v[1:] != 0.0)) + 1
    for i in ties:
        violations.append(("prefix_argmax_tie", int(i)))
    bwd = np.maximum.accumulate(v[::-1])[::-1]
    ties = np.flatnonzero((v[:-1] == bwd[1:]) & (v[:-1] != 0.0))
    for i in ties:
        violations.append(("suffix_argmax_tie", int(i)))
    zeros = np.flatnonzero((v[1:-1] == 0.0) & (v[:-2] > 0.0) & (v[2:] > 0.0)) + 1
    for i in zeros:
        violations.append(("interior_zero_local_min", int(i)))
    return violations


def excursion_margin(out: TransformOutput) -> float:
    """Smallest distance from any excursion minimum to its excision
    threshold; a stability margin for perturbation tests."""
    best = math.inf
    for r in out.records:
        thr = 0.0
        best = min(best, abs(r.min_value - thr))
    return best
