"""Sub-grid corrections for excision sampling on discrete paths.

A discretely sampled path understates running maxima and misses dips between
nodes, which biases every excision statistic at the sqrt(step) scale. The
fix has two parts. First, ``augment_maxima`` inserts the maximum of every
segment at its argmax, both drawn from their exact conditional laws given
the segment endpoints; the augmented polyline then carries all running-max
information, and every piece of it has its own maximum at one endpoint.
Second, given that skeleton, the probability that the path dips below a
threshold inside an excursion has a closed form: a product over pieces of a
reflection series (or its spectral dual when the band is narrow relative to
the piece duration). Each excursion whose skeleton minimum stays above the
threshold is then excised by an exact Bernoulli draw. The residual bias is
O(step) instead of O(sqrt(step)).

The corrected excisions mirror the deterministic ones in ``transforms`` but
consume randomness; they are meant for Monte Carlo estimation, where the
deterministic maps would need prohibitively fine grids.
"""

from __future__ import annotations

import math

import numpy as np

from .path_core import Path
from .transforms import (TransformOutput, _backward_excursions,
                         _forward_excursions, _assemble, _with_node)
from ._kernels import first_crossing

_N_IMAGES = 8
_MIN_LOG_Q = -745.0  # below this the no-dip probability underflows to 0


def sample_argmax_fraction(rise_left, rise_right, duration, gen):
    """Sample the argmax location of a bridge segment, as a fraction of it.

    ``rise_left`` and ``rise_right`` are M - a and M - b for a segment from a
    to b with maximum M. The fraction b* has density proportional to
    (b(1-b))^{-3/2} exp(-lam (p-b)^2 / (2 b (1-b))) with p the left-rise
    share and lam = (rise_left + rise_right)^2 / duration. Substituting
    R = (p - b)/sqrt(b(1-b)) makes the density Gaussian in R up to a factor
    bounded between min(p, 1-p) and max(p, 1-p), which drives an exact
    rejection sampler.
    """
    u = np.asarray(rise_left, dtype=float)
    v = np.asarray(rise_right, dtype=float)
    duration = np.asarray(duration, dtype=float)
    p = u / (u + v)
    lam = (u + v) ** 2 / duration
    out = np.empty(p.shape)
    todo = np.arange(p.size)
    while todo.size:
        pp = p[todo]
        r = gen.standard_normal(todo.size) / np.sqrt(lam[todo])
        r2 = r * r
        disc = np.sqrt(r2 * (r2 + 4.0 * pp * (1.0 - pp)))
        b = np.where(r >= 0.0,
                     (2.0 * pp + r2 - disc) / (2.0 * (1.0 + r2)),
                     (2.0 * pp + r2 + disc) / (2.0 * (1.0 + r2)))
        accept = gen.random(todo.size) * (pp * (1.0 - b) + (1.0 - pp) * b) \
            < np.minimum(pp, 1.0 - pp)
        out[todo[accept]] = b[accept]
        todo = todo[~accept]
    return out


def augment_maxima(times, values, gen, ceiling=None):
    """Insert every segment's maximum at its sampled argmax location.

    Returns (times, values, inserted) where ``inserted`` marks the new nodes.
    Segment maxima follow the exact law M = (a + b + sqrt((a-b)^2
    - 2 dt log U)) / 2 given endpoints (a, b), and their locations come from
    ``sample_argmax_fraction``. The result has 2n - 1 nodes for n inputs.

    With ``ceiling`` set, maxima are drawn conditioned to stay below it, as
    required for paths whose law is conditioned never to exceed a level
    before the end. Since P(M > m) = exp(-2 (m-a)(m-b) / dt), conditioning
    amounts to drawing U uniformly above that tail probability at the
    ceiling; a segment ending exactly at the ceiling degenerates to
    M = max(a, b) as it should.
    """
    a = values[:-1]
    b = values[1:]
    dt = times[1:] - times[:-1]
    u = gen.random(a.size)
    if ceiling is not None:
        p = np.exp(-2.0 * np.maximum(ceiling - a, 0.0)
                   * np.maximum(ceiling - b, 0.0) / dt)
        u = p + u * (1.0 - p)
    m = 0.5 * (a + b + np.sqrt((a - b) ** 2 - 2.0 * dt * np.log(u)))
    if ceiling is not None:
        # keep inserted nodes strictly below the ceiling so kinds with a
        # strict pre-terminal bound stay valid; one ulp is within the
        # resolution of the conditioned draw
        m = np.minimum(m, np.nextafter(ceiling, -np.inf))
    rise_l = np.maximum(m - a, 1e-300)
    rise_r = np.maximum(m - b, 1e-300)
    frac = sample_argmax_fraction(rise_l, rise_r, dt, gen)
    tm = times[:-1] + dt * np.clip(frac, 1e-12, 1.0 - 1e-12)
    # at large absolute times an extreme fraction can round onto a segment
    # endpoint; place such nodes mid-segment to keep times strictly increasing
    bad = (tm <= times[:-1]) | (tm >= times[1:])
    if np.any(bad):
        tm[bad] = (0.5 * (times[:-1] + times[1:]))[bad]
    out_t = np.empty(times.size + a.size)
    out_v = np.empty_like(out_t)
    out_t[0::2] = times
    out_t[1::2] = tm
    out_v[0::2] = values
    out_v[1::2] = m
    inserted = np.zeros(out_t.size, dtype=bool)
    inserted[1::2] = True
    return out_t, out_v, inserted


def augmented_max_path(path: Path, gen) -> Path:
    """Return the path with one extra node: its sub-grid global maximum.

    The maximum of the returned polyline is distributed as the true path
    maximum; all other nodes are the original ones, so polyline integrals
    stay essentially unbiased.
    """
    t, v, _ = augment_maxima(path.times, path.values, gen)
    k = int(np.argmax(v[1::2]))
    j = 2 * k + 1
    nt, nv, _ = _with_node(path.times, path.values, t[j], value=v[j])
    return Path(nt, nv, path.kind, path.level)


def piece_log_no_dip(low, high, duration, c):
    """Log-probability that a skeleton piece never dips to level c.

    Each augmented piece runs between a node and a segment maximum, so its
    own maximum equals its higher endpoint. Conditionally on that, with
    h = high - low and w = high - c, the no-dip probability is the series
    sum_k (1 + 2kw/h) exp(-2kw(kw + h)/s). When s is large relative to w^2
    the dual spectral form converges instead:
    (pi s sqrt(2 pi s) / (w^2 h)) e^{h^2/(2s)}
    sum_n n sin(n pi h / w) exp(-n^2 pi^2 s / (2 w^2)).
    """
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    s = np.asarray(duration, dtype=float)
    h = high - low
    w = high - c
    q = np.ones(h.shape)
    ok = (h > 0.0) & (low > c) & (s > 0.0)
    image = ok & (s < 0.5 * w * w)
    if np.any(image):
        hi, wi, si = h[image], w[image], s[image]
        k = np.arange(-_N_IMAGES, _N_IMAGES + 1, dtype=float)[:, None]
        coef = 1.0 + 2.0 * k * wi / hi
        expo = -2.0 * k * wi * (k * wi + hi) / si
        q[image] = np.sum(coef * np.exp(expo), axis=0)
    dual = ok & ~image
    if np.any(dual):
        hd, wd, sd = h[dual], w[dual], s[dual]
        n = np.arange(1.0, _N_IMAGES + 1.0)[:, None]
        series = np.sum(n * np.sin(n * np.pi * hd / wd)
                        * np.exp(-0.5 * (n * np.pi / wd) ** 2 * sd), axis=0)
        q[dual] = (np.pi * sd * np.sqrt(2.0 * np.pi * sd) / (wd * wd * hd)
                   * np.exp(0.5 * hd * hd / sd) * np.maximum(series, 0.0))
    return np.log(np.clip(q, math.exp(_MIN_LOG_Q), 1.0))


def _decide_flags(t, v, raw, thresholds, gen):
    """Excision flags for scanned excursions on an augmented polyline.

    ``thresholds`` is a per-excursion array. Excursions whose node minimum
    reaches the threshold are excised outright; the rest are excised by a
    Bernoulli draw on the exact sub-grid dip probability. Excursions whose
    draw fires get their recorded minimum pinned to the threshold, since the
    dip is only known to reach it.
    """
    n_exc = len(raw)
    flags = np.zeros(n_exc, dtype=bool)
    undecided = []
    for k, exc in enumerate(raw):
        if exc.minv <= thresholds[k]:
            flags[k] = True
        else:
            undecided.append(k)
    if not undecided:
        return flags
    low = np.minimum(v[:-1], v[1:])
    high = np.maximum(v[:-1], v[1:])
    dur = t[1:] - t[:-1]
    spans = []
    for k in undecided:
        exc = raw[k]
        pend = exc.hi if exc.junction == exc.hi else exc.hi + 1
        spans.append((exc.lo, pend))
    pieces = np.concatenate([np.arange(lo, pend) for lo, pend in spans]) \
        if spans else np.empty(0, dtype=int)
    cvals = np.concatenate([np.full(pend - lo, thresholds[k])
                            for (lo, pend), k in zip(spans, undecided)])
    logq = piece_log_no_dip(low[pieces], high[pieces], dur[pieces], cvals)
    bounds = np.concatenate([[0], np.cumsum([pend - lo for lo, pend in spans])])
    draws = gen.random(len(undecided))
    for i, k in enumerate(undecided):
        total = logq[bounds[i]:bounds[i + 1]].sum()
        if draws[i] < -np.expm1(total):
            flags[k] = True
            raw[k].minv = thresholds[k]
    return flags


def _thin_output(out: TransformOutput, inserted, keep_sources, kind, level):
    """Drop augmentation nodes from an assembled path, keeping junctions.

    ``keep_sources`` lists source-node indices that must survive (excision
    junctions and the argmax node). Polyline integrals over the thinned path
    are unbiased because only the original nodes and a handful of structural
    nodes remain.
    """
    idx = out.clock.alpha_idx
    keep = ~inserted[idx]
    keep[0] = True
    keep[-1] = True
    if keep_sources:
        keep |= np.isin(idx, np.fromiter(keep_sources, dtype=int))
    path = Path(out.excised.times[keep], out.excised.values[keep], kind, level)
    clock = out.clock.__class__(source_times=out.clock.source_times,
                                u=out.clock.u, alpha_idx=idx[keep])
    return TransformOutput(excised=path, tau=out.tau, clock=clock,
                           records=out.records, argmax_time=out.argmax_time)


def excise_bridge_corrected(path: Path, gen) -> TransformOutput:
    """Bridge excision with sub-grid max and dip corrections.

    Matches ``transforms.excise_bridge`` in structure, but augments the
    skeleton first and replaces the node-minimum excision rule with the
    exact conditional dip law. The output path keeps the original nodes,
    the junction nodes, and the corrected argmax node.
    """
    if path.kind != "bridge":
        raise ValueError("excise_bridge_corrected expects a bridge")
    t, v, inserted = augment_maxima(path.times, path.values, gen)
    k = int(np.argmax(v))
    mu = float(t[k])
    pre = _forward_excursions(t[:k + 1], v[:k + 1], "pre_argmax")
    flags_pre = _decide_flags(t[:k + 1], v[:k + 1], pre,
                              np.zeros(len(pre)), gen)
    rt = t[-1] - t[k:][::-1]
    rt[0] = 0.0
    rv = v[k:][::-1].copy()
    post_rev = _forward_excursions(rt, rv, "post")
    flags_rev = _decide_flags(rt, rv, post_rev,
                              np.zeros(len(post_rev)), gen)
    post = _backward_excursions(t[k:], v[k:], "post")
    for exc in post:
        exc.lo += k
        exc.hi += k
        exc.junction += k
    flags_post = flags_rev[::-1]
    for exc, rev in zip(post, reversed(post_rev)):
        exc.minv = rev.minv
    raw = pre + post
    flags = np.concatenate([flags_pre, flags_post])
    out = _assemble(t, v, raw, flags, "bridge", argmax_time=mu)
    keep = {exc.junction for exc, f in zip(raw, flags) if f}
    keep.add(k)
    return _thin_output(out, inserted, keep, "bridge", None)


def excise_meander_corrected(path: Path, gen) -> TransformOutput:
    """Meander-type excision with sub-grid corrections.

    Thresholds are 0 before the half-level passage of the terminal value and
    half the terminal value after it, as in ``transforms.excise_meander``.
    """
    if path.kind not in ("meander_type", "first_passage"):
        raise ValueError("excise_meander_corrected expects a meander-type path")
    end = float(path.values[-1])
    if end <= 0:
        raise ValueError("terminal value must be positive")
    t, v, inserted = augment_maxima(path.times, path.values, gen, ceiling=end)
    return _excise_one_sided(t, v, inserted, end, path.kind, path.level,
                             float(path.horizon), gen)


def excise_to_level_corrected(path: Path, x: float, gen) -> TransformOutput:
    """Level excision with sub-grid corrections.

    The free path is augmented first, so the first passage of x is detected
    with sub-grid accuracy, then truncated there and excised with the
    two-phase thresholds.
    """
    if not (x > 0):
        raise ValueError(f"level must be > 0, got {x}")
    t, v, inserted = augment_maxima(path.times, path.values, gen)
    gamma_x = first_crossing(t, v, x)
    if gamma_x is None:
        raise ValueError(f"path never reaches level {x}")
    j = int(np.searchsorted(t, gamma_x))
    if j < t.size and t[j] == gamma_x:
        t, v = t[:j + 1].copy(), v[:j + 1].copy()
        inserted = inserted[:j + 1].copy()
    else:
        t = np.concatenate([t[:j], [gamma_x]])
        v = np.concatenate([v[:j], [x]])
        inserted = np.concatenate([inserted[:j], [False]])
    v[-1] = x
    return _excise_one_sided(t, v, inserted, x, "first_passage", x,
                             float(t[-1]), gen)


def _excise_one_sided(t, v, inserted, end, kind, level, argmax_time, gen):
    gamma_half = first_crossing(t, v, end / 2)
    raw = _forward_excursions(t, v, "pre_half")
    thresholds = np.empty(len(raw))
    for i, exc in enumerate(raw):
        if exc.d <= gamma_half:
            thresholds[i] = 0.0
        else:
            exc.phase = "post"
            thresholds[i] = end / 2
    flags = _decide_flags(t, v, raw, thresholds, gen)
    out = _assemble(t, v, raw, flags, kind, level=level,
                    argmax_time=argmax_time)
    keep = {exc.junction for exc, f in zip(raw, flags) if f}
    return _thin_output(out, inserted, keep, kind, level)
