"""Hot inner loops: excursion scans and level-crossing searches on polylines.

Two interchangeable backends are provided: numba ``@njit`` loops (default)
and a vectorized pure-numpy path. Set ``EXCISE_DISABLE_NUMBA=1`` to force
the numpy backend. Both backends use the same floating-point expressions in
the same order, so they produce bit-identical results.

A "polyline" is a pair of float64 arrays (times, values) with strictly
increasing times, interpreted as a piecewise-linear function.

The excursion scan walks a path whose running maximum starts at ``values[0]``
and ends on a touch point (the final value must equal the running maximum
there, which holds for every input this package produces). Each excursion is
a maximal interval where the path sits strictly below its running maximum.
The left endpoint is always a node; the right endpoint is either a node where
the path returns exactly to the excursion level, or the interpolated time
where a rising segment crosses that level on its way to a new maximum.
"""

import os

import numpy as np

_DISABLED = os.environ.get("EXCISE_DISABLE_NUMBA", "0") == "1"

if not _DISABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        _DISABLED = True

USING_NUMBA = not _DISABLED


def _scan_excursions_core(times, values):
    n = times.shape[0]
    cap = n // 2 + 2
    g_time = np.empty(cap)
    d_time = np.empty(cap)
    level = np.empty(cap)
    min_value = np.empty(cap)
    g_idx = np.empty(cap, dtype=np.int64)
    d_seg = np.empty(cap, dtype=np.int64)
    d_is_node = np.empty(cap, dtype=np.uint8)

    m = 0
    cur_max = values[0]
    in_exc = False
    gi = 0
    lev = 0.0
    mv = 0.0
    for j in range(1, n):
        vj = values[j]
        if not in_exc:
            if vj >= cur_max:
                cur_max = vj
            else:
                in_exc = True
                gi = j - 1
                lev = cur_max
                mv = vj
        else:
            if vj < lev:
                if vj < mv:
                    mv = vj
            elif vj == lev:
                g_time[m] = times[gi]
                d_time[m] = times[j]
                level[m] = lev
                min_value[m] = mv
                g_idx[m] = gi
                d_seg[m] = j
                d_is_node[m] = 1
                m += 1
                in_exc = False
            else:
                v0 = values[j - 1]
                d = times[j - 1] + (times[j] - times[j - 1]) * (lev - v0) / (vj - v0)
                g_time[m] = times[gi]
                d_time[m] = d
                level[m] = lev
                min_value[m] = mv
                g_idx[m] = gi
                d_seg[m] = j
                d_is_node[m] = 0
                m += 1
                in_exc = False
                cur_max = vj
    if in_exc:
        m = -1  # path ended inside an excursion: invalid input
    return m, g_time, d_time, level, min_value, g_idx, d_seg, d_is_node


def _first_crossing_core(times, values, y):
    if values[0] == y:
        return times[0]
    n = times.shape[0]
    for j in range(1, n):
        v0 = values[j - 1]
        v1 = values[j]
        if v1 == y:
            return times[j]
        if (v0 - y) * (v1 - y) < 0.0:
            return times[j - 1] + (times[j] - times[j - 1]) * (y - v0) / (v1 - v0)
    return np.nan


if USING_NUMBA:
    _scan_excursions_impl = njit(cache=True)(_scan_excursions_core)
    _first_crossing_impl = njit(cache=True)(_first_crossing_core)
else:

    def _scan_excursions_numpy(times, values):
        runmax = np.maximum.accumulate(values)
        touch = np.flatnonzero(values == runmax)
        a = touch[:-1]
        b = touch[1:]
        keep = b > a + 1
        a = a[keep]
        b = b[keep]
        m = a.shape[0]
        if values[-1] != runmax[-1]:
            return (-1,) + (np.empty(0),) * 4 + (np.empty(0, np.int64),) * 2 + (
                np.empty(0, np.uint8),
            )
        lev = values[a]
        node_end = values[b] == lev
        if m:
            bounds = np.empty(2 * m, dtype=np.int64)
            bounds[0::2] = a + 1
            bounds[1::2] = b
            mv = np.minimum.reduceat(values, bounds)[0::2]
        else:
            mv = np.empty(0)
        v0 = values[b - 1]
        v1 = values[b]
        with np.errstate(divide="ignore", invalid="ignore"):
            d_cross = times[b - 1] + (times[b] - times[b - 1]) * (lev - v0) / (v1 - v0)
        d = np.where(node_end, times[b], d_cross)
        return (
            m,
            times[a],
            d,
            lev,
            mv,
            a,
            b,
            node_end.astype(np.uint8),
        )

    def _first_crossing_numpy(times, values, y):
        if values[0] == y:
            return times[0]
        dv = values - y
        hit = (dv[:-1] * dv[1:] < 0.0) | (dv[1:] == 0.0)
        idx = np.flatnonzero(hit)
        if idx.size == 0:
            return np.nan
        j = idx[0] + 1
        if values[j] == y:
            return times[j]
        v0 = values[j - 1]
        return times[j - 1] + (times[j] - times[j - 1]) * (y - v0) / (values[j] - v0)

    _scan_excursions_impl = _scan_excursions_numpy
    _first_crossing_impl = _first_crossing_numpy


def scan_excursions(times, values):
    """Decompose a polyline into excursions below its running maximum.

    Returns ``(g_time, d_time, level, min_value, g_idx, d_seg, d_is_node)``
    arrays, one entry per excursion in time order. ``g_idx`` is the node
    index of the left endpoint; ``d_seg`` is the index of the node at (or
    just after) the right endpoint; ``d_is_node`` is 1 when the right
    endpoint is a grid node and 0 when it is an interpolated crossing.

    Raises ValueError if the path does not end on its running maximum.
    """
    out = _scan_excursions_impl(np.ascontiguousarray(times, dtype=np.float64),
                                np.ascontiguousarray(values, dtype=np.float64))
    m = out[0]
    if m < 0:
        raise ValueError("path ends strictly below its running maximum")
    return tuple(arr[:m] for arr in out[1:])


def first_crossing(times, values, y):
    """First time the piecewise-linear interpolant reaches level ``y``.

    Returns ``None`` when the level is never reached. Exact at nodes: if a
    node value equals ``y``, the node time is returned with no rounding.
    """
    t = _first_crossing_impl(np.ascontiguousarray(times, dtype=np.float64),
                             np.ascontiguousarray(values, dtype=np.float64),
                             float(y))
    if np.isnan(t):
        return None
    return float(t)
