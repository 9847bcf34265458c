"""Excision of Brownian motion run to a level, and the Bessel reconstruction.

``excise_bm_to_x`` simulates Brownian motion until it first reaches x,
excises excursions below the running maximum by the two-phase rule (reach 0
before the half-level passage, reach x/2 after it), and reports per-excursion
(level, length, height) records together with the kept-time accounting.
``sample_bessel_pair`` builds the independent two-segment BES(3) path whose
law matches the concatenated kept path; the two simulators never share code
beyond the primitives, so comparing them is a genuine two-route check.

Both samplers apply the sub-grid corrections of ``subgrid`` by default;
pass ``correction="none"`` for the plain node-level rule, which is exactly
the deterministic ``transforms.excise_to_level`` composition but carries an
O(sqrt(step)) bias in every excision statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .path_core import (ExtensionLimitError, Path, PathInvariantError,
                        RngStream, TimeGrid, first_crossing)
from .subgrid import augment_maxima, excise_to_level_corrected
from .transforms import TransformOutput, brownian_scale, excise_to_level, t_br

_EXTENSION_LIMIT = 8
_CAP_RESAMPLE_LIMIT = 400


@dataclass(frozen=True)
class PppRecord:
    """One excursion below the running maximum: level, length, height."""

    ell: float
    zeta: float
    height: float
    kept: bool
    phase: str


@dataclass(frozen=True)
class ExcisionSummary:
    x: float
    T_x: float
    tau_x: float
    tau_e: float
    records: list
    X_path: Path


@dataclass(frozen=True)
class BesselPair:
    H: float
    H_hat: float
    W_path: Path


def _check_correction(correction: str):
    if correction not in ("subgrid", "none"):
        raise ValueError(f"unknown correction policy {correction!r}")


def _bm_until_level(gen: np.random.Generator, x: float, dt: float,
                    n_init: int, on_cap: str):
    """Increment-by-increment Brownian motion until the running max reaches x.

    The horizon doubles up to the extension limit; with ``on_cap='resample'``
    a fresh path is drawn from the same generator when the cap is hit (the
    cap leaves ~2.5% of paths unfinished at 1024 x^2; see the sampler notes),
    with ``on_cap='error'`` the cap raises ExtensionLimitError.
    """
    sdt = math.sqrt(dt)
    for _ in range(_CAP_RESAMPLE_LIMIT):
        v = np.concatenate([[0.0], np.cumsum(gen.standard_normal(n_init) * sdt)])
        doublings = 0
        while v.max() < x:
            if doublings >= _EXTENSION_LIMIT:
                break
            inc = gen.standard_normal(v.size - 1) * sdt
            v = np.concatenate([v, v[-1] + np.cumsum(inc)])
            doublings += 1
        if v.max() >= x:
            return v
        if on_cap == "error":
            raise ExtensionLimitError(
                f"level {x} not reached within {_EXTENSION_LIMIT} horizon doublings")
    raise ExtensionLimitError("level-reaching resample limit exceeded")


def cap_horizon(x: float) -> float:
    """Largest horizon the level-x simulator explores before resampling."""
    return 4.0 * x * x * 2 ** _EXTENSION_LIMIT


def cap_tail_probability(x: float) -> float:
    """P(T_x > cap_horizon(x)): the mass removed by the resample policy.

    P(T_x > t) = erf(x / sqrt(2 t)), so the cap at 1024 x^2 removes about
    2.5% regardless of x.
    """
    return math.erf(x / math.sqrt(2.0 * cap_horizon(x)))


def excise_bm_to_x(x: float, grid: TimeGrid, rng: RngStream,
                   on_cap: str = "resample",
                   correction: str = "subgrid") -> ExcisionSummary:
    """Excise a Brownian path run to level x and account for kept time.

    ``grid.n_steps`` sets the resolution of the initial block, whose horizon
    is 4 x**2 (the mean of the first-passage time is infinite, so the horizon
    is adaptive and the step size, not the horizon, is what the grid pins).
    """
    if not (x > 0):
        raise ValueError(f"level must be > 0, got {x}")
    if on_cap not in ("resample", "error"):
        raise ValueError(f"unknown on_cap policy {on_cap!r}")
    _check_correction(correction)
    n = grid.n_steps
    dt = 4.0 * x * x / n
    gen = rng.generator()
    v = _bm_until_level(gen, x, dt, n, on_cap)
    times = np.arange(v.size) * dt
    path = Path(times, v, "free")
    if correction == "subgrid":
        out = excise_to_level_corrected(path, x, gen)
    else:
        out = excise_to_level(path, x)
    return summarize_excision(x, out)


def summarize_excision(x: float, out: TransformOutput) -> ExcisionSummary:
    """Fold a level-excision TransformOutput into PPP-style accounting.

    The kept and excised totals are accumulated with compensated summation;
    the larger of the two is then derived as the complement of T_x and
    nudged by at most a few ulps so that tau_x + tau_e equals T_x exactly.
    The larger total is at least T_x / 2, so its ulp spacing is coarse
    enough for the rounded sum to land on T_x.
    """
    records = []
    kept_gaps = []
    cursor = 0.0
    excised = []
    for r in out.records:
        records.append(PppRecord(ell=r.level, zeta=r.length, height=r.height,
                                 kept=not r.excised, phase=r.phase))
        if r.excised:
            kept_gaps.append(r.g - cursor)
            cursor = r.d
            excised.append(r.length)
    T_x = out.argmax_time  # first passage time of x
    kept_gaps.append(T_x - cursor)
    kept = math.fsum(kept_gaps)
    exc = math.fsum(excised)
    big_is_kept = kept >= exc
    small = exc if big_is_kept else kept
    big, small = _close_partition(float(T_x), small)
    tau_x, tau_e = (big, small) if big_is_kept else (small, big)
    return ExcisionSummary(x=x, T_x=T_x, tau_x=tau_x, tau_e=tau_e,
                           records=records, X_path=out.excised)


def _step(value: float, k: int) -> float:
    target = math.inf if k > 0 else -math.inf
    for _ in range(abs(k)):
        value = math.nextafter(value, target)
    return value


def _close_partition(total: float, small: float):
    """Split ``total`` into small + big exactly, moving small by ulps only.

    The big part is derived as the complement; when its ulp spacing matches
    the total's, the rounded sum can straddle the target, so the small part
    is shifted in sub-ulp-of-total steps until some pair adds back exactly.
    """
    for ds in (0, 1, -1, 2, -2, 3, -3, 4, -4):
        s = _step(small, ds)
        big = total - s
        for db in (0, 1, -1, 2, -2):
            b = _step(big, db)
            if b + s == total:
                return b, s
    raise PathInvariantError("kept/excised accounting does not close")


def _bes3_until_level(gen: np.random.Generator, y: float, dt: float,
                      n_init: int, correction: str = "subgrid"):
    """BES(3) from 0 run until it first reaches y, truncated there with the
    terminal value pinned to y exactly. Transient, so extension always ends.

    With the sub-grid correction, the radial polyline is augmented with
    segment maxima before the crossing search, so the hitting time loses its
    O(sqrt(dt)) late-detection bias; the returned nodes stay on the original
    grid, truncated at the corrected crossing.
    """
    sdt = math.sqrt(dt)
    comps = None
    for doublings in range(_EXTENSION_LIMIT + 1):
        n_new = n_init if comps is None else comps.shape[1] - 1
        inc = gen.standard_normal((3, n_new)) * sdt
        block = np.cumsum(inc, axis=1)
        if comps is None:
            comps = np.concatenate([np.zeros((3, 1)), block], axis=1)
        else:
            comps = np.concatenate([comps, comps[:, -1:] + block], axis=1)
        r = np.sqrt(np.einsum("ij,ij->j", comps, comps))
        if r.max() >= y:
            times = np.arange(r.size) * dt
            if correction == "subgrid":
                at, av, _ = augment_maxima(times, r, gen)
                h = first_crossing(at, av, y)
            else:
                h = first_crossing(times, r, y)
            j = int(np.searchsorted(times, h))
            if j < times.size and times[j] == h:
                t_out = times[:j + 1].copy()
                v_out = r[:j + 1].copy()
            else:
                t_out = np.concatenate([times[:j], [h]])
                v_out = np.concatenate([r[:j], [y]])
            v_out[-1] = y
            return t_out, v_out
    raise ExtensionLimitError(
        f"BES(3) did not reach {y} within {_EXTENSION_LIMIT} doublings")


def sample_bessel_pair(x: float, grid: TimeGrid, rng: RngStream,
                       correction: str = "subgrid") -> BesselPair:
    """Two independent BES(3) first-passage segments to x/2, stacked so the
    second starts at x/2; the terminal value is exactly x."""
    if not (x > 0):
        raise ValueError(f"level must be > 0, got {x}")
    _check_correction(correction)
    gen = rng.generator()
    # same step size as excise_bm_to_x at this x, so grid bias is comparable
    dt = 4.0 * x * x / grid.n_steps
    n_init = max(grid.n_steps // 4, 16)
    t1, v1 = _bes3_until_level(gen, x / 2, dt, n_init, correction)
    t2, v2 = _bes3_until_level(gen, x / 2, dt, n_init, correction)
    h, h_hat = float(t1[-1]), float(t2[-1])
    w_t = np.concatenate([t1, t1[-1] + t2[1:]])
    w_v = np.concatenate([v1, x / 2 + v2[1:]])
    w_v[-1] = x
    w = Path(w_t, w_v, "first_passage", level=x)
    return BesselPair(H=h, H_hat=h_hat, W_path=w)


def x_bridge_tilde(summary: ExcisionSummary) -> Path:
    """Bridge-ify the kept path (reflect at the half-level passage) and
    Brownian-scale to [0, 1]; the output maximum is (x/2) / sqrt(tau_x)."""
    return brownian_scale(t_br(summary.X_path))


def path_functionals(path: Path, x: float) -> dict:
    """Scalar functionals shared by the two simulators of the kept path."""
    half_time = first_crossing(path.times, path.values, x / 2)
    total = path.horizon
    return {
        "tau": total,
        "tau_phase1": float(half_time),
        "tau_phase2": total - float(half_time),
        "integral": float(np.trapezoid(path.values, path.times)),
    }


def lemma1_two_sample(x: float, n_reps: int, grid: TimeGrid, seeds,
                      threshold: float = 0.015,
                      correction: str = "subgrid") -> dict:
    """Compare the excised-BM kept path with the two-segment Bessel path
    through scalar functionals; report the KS distance of each."""
    from .montecarlo import ks_distance

    seed_a, seed_b = seeds
    names = ("tau", "tau_phase1", "tau_phase2", "integral")
    a = {k: np.empty(n_reps) for k in names}
    b = {k: np.empty(n_reps) for k in names}
    for i in range(n_reps):
        fa = path_functionals(
            excise_bm_to_x(x, grid, RngStream(seed_a, i),
                           correction=correction).X_path, x)
        fb = path_functionals(
            sample_bessel_pair(x, grid, RngStream(seed_b, i),
                               correction=correction).W_path, x)
        for k in names:
            a[k][i] = fa[k]
            b[k][i] = fb[k]
    report = {}
    for k in names:
        ks = ks_distance(a[k], b[k])
        report[k] = {"ks": ks, "n": n_reps, "threshold": threshold,
                     "pass": bool(ks < threshold)}
    return report
