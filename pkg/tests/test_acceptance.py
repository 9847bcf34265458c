"""Acceptance gate: eleven criteria, one test and one pass/fail line each.

The Monte Carlo criteria share their heavy sampling passes through the
cached tables in ``excise.montecarlo``; running this file as a whole is what
keeps the total runtime manageable on a single core.
"""

import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from scipy import integrate

from excise import (Path, RngStream, TimeGrid, excise_bm_to_x, excise_bridge,
                    excursion_margin, g_br, g_density, laplace_T, laplace_tau,
                    laplace_tau_e, regularity_check, report_to_json,
                    sample_bridge, t_br, t_me, tau_e_density,
                    verify_corollary2, verify_counts, verify_eq22,
                    verify_laplace, verify_lemma2, verify_lemma3,
                    verify_lemma4, verify_theorem1)

SEED = 2026
N_BIG = 200000   # theorem-level runs
N_STD = 100000   # lemma-level runs
GRID_FINE = 8192
GRID_COARSE = 4096
GRID_LEMMA2 = 2048


def _line(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[criterion {num:02d}] {name}: {status} {detail}".rstrip())


def test_criterion_01_deterministic_fixtures():
    # 6-node fixture: the excursion on (0.1, 0.3) is excised, tau = 0.8
    p = Path(np.array([0.0, 0.1, 0.2, 0.3, 0.5, 1.0]),
             np.array([0.0, 0.5, 0.0, 0.5, 1.0, 0.0]), "bridge")
    out = excise_bridge(p)
    assert out.tau == 0.8
    # retained times are source times minus the excised length, so the hand
    # values are reproduced under exact float subtraction
    assert out.excised.times.tolist() == [0.0, 0.1, 0.5 - (0.3 - 0.1),
                                          1.0 - (0.3 - 0.1)]
    assert out.excised.values.tolist() == [0.0, 0.5, 1.0, 0.0]

    # reversal round trip on 10^3 sampled bridges, node-wise
    g = TimeGrid(1.0, 512)
    for i in range(1000):
        b = sample_bridge(g, RngStream(SEED + 1, i))
        back = t_br(t_me(b))
        assert np.array_equal(back.times, b.times) or \
            np.allclose(back.times, b.times, atol=1e-12, rtol=0.0)
        assert np.allclose(back.values, b.values, atol=1e-12, rtol=0.0)

    # exact kept/excised accounting on 10^3 level excisions
    g2 = TimeGrid(1.0, 2048)
    for i in range(1000):
        s = excise_bm_to_x(1.0, g2, RngStream(SEED + 2, i))
        assert s.tau_x + s.tau_e == s.T_x
    _line(1, "deterministic fixtures", True,
          "tau=0.8 exact; 1000 reversal round trips; 1000 exact accountings")


def test_criterion_02_analytics():
    # normalization of g_1 with the tail under u = 1/s
    head, _ = integrate.quad(lambda s: g_density(1.0, s), 0.0, 1.0,
                             epsabs=1e-12, epsrel=1e-10, limit=300)
    tail, _ = integrate.quad(lambda u: g_density(1.0, 1.0 / u) / (u * u),
                             0.0, 1.0, epsabs=1e-12, epsrel=1e-10, limit=300)
    norm = head + tail
    assert abs(norm - 1.0) < 1e-8

    # high-precision reference for (u / sinh u)^2 at u = 1/2 via the sinh
    # series in 30-digit decimal arithmetic
    getcontext().prec = 30
    u = Decimal("0.5")
    sinh = Decimal(0)
    term = u
    k = 1
    while term != 0:
        sinh += term
        term = term * u * u / ((2 * k) * (2 * k + 1))
        k += 1
    ref = float((u / sinh) ** 2)
    assert abs(laplace_tau(1.0, 0.5) - ref) < 1e-12

    # product identity on a 10 x 10 grid
    worst = 0.0
    for x in np.linspace(0.2, 3.0, 10):
        for lam in np.linspace(0.1, 5.0, 10):
            gap = abs(laplace_tau(x, lam) * laplace_tau_e(x, lam)
                      - laplace_T(x, lam))
            worst = max(worst, gap)
    assert worst < 1e-12

    # numerical Laplace transform of the excised-length density
    worst_l = 0.0
    for lam in (0.25, 0.5, 1.0, 2.0):
        val, _ = integrate.quad(
            lambda t: math.exp(-lam * t) * tau_e_density(1.0, t),
            0.0, 80.0, limit=300)
        worst_l = max(worst_l, abs(val - laplace_tau_e(1.0, lam)))
    assert worst_l < 1e-6
    _line(2, "analytics", True,
          f"norm gap {abs(norm - 1.0):.2e}; product gap {worst:.2e}; "
          f"laplace gap {worst_l:.2e}")


def test_criterion_03_lemma3_moments_and_ks():
    r = verify_lemma3(1.0, N_STD, GRID_FINE, SEED)
    ok = r["pass"]
    _line(3, "lemma3 moments and KS", ok,
          f"mean z {r['moments']['mean']['z']:.2f}; "
          f"var z {r['moments']['variance']['z']:.2f}; "
          f"ks {r['ks']['value']:.4f}")
    assert r["moments"]["mean"]["pass"]
    assert r["moments"]["variance"]["pass"]
    assert r["ks"]["pass"]


def test_criterion_04_empirical_laplace_transforms():
    r = verify_laplace(1.0, N_STD, GRID_FINE, SEED)
    zs = {k: c["z"] for k, c in r["checks"].items()}
    ok = all(c["pass"] for c in r["checks"].values())
    _line(4, "empirical Laplace transforms", ok,
          "max z {:.2f}".format(max(zs.values())))
    for k, c in r["checks"].items():
        assert c["pass"], (k, c)


def test_criterion_05_lemma2_mixture():
    zs = {}
    for g_id in ("max", "value_at_half", "integral"):
        r = verify_lemma2(g_id, N_STD, SEED, GRID_LEMMA2)
        zs[g_id] = r["z"]
    ok = all(z < 3.0 for z in zs.values())
    _line(5, "lemma2 mixture", ok,
          "; ".join(f"{k} z {v:.2f}" for k, v in zs.items()))
    for k, z in zs.items():
        assert z < 3.0, (k, z)


def test_criterion_06_lemma4_agreement():
    zs = {}
    for x in (1.0, 2.0):
        for g_id in ("const_one", "integral"):
            r = verify_lemma4(x, g_id, N_STD, GRID_FINE, SEED)
            zs[f"x={x:g},{g_id}"] = r["z"]
    ok = all(z < 3.0 for z in zs.values())
    _line(6, "lemma4 agreement", ok,
          "; ".join(f"{k} z {v:.2f}" for k, v in zs.items()))
    for k, z in zs.items():
        assert z < 3.0, (k, z)


def test_criterion_07_corollary2_normalization():
    r = verify_corollary2(N_BIG, GRID_FINE, SEED)
    c = r["checks"]["identity_m"]
    _line(7, "corollary2 normalization", c["pass"], f"z {c['z']:.2f}")
    assert c["pass"], c


def test_criterion_08_theorem1():
    zs = {}
    gaps_fine = {}
    gaps_coarse = {}
    slack = {}
    for g_id in ("const_one", "max", "integral"):
        fine = verify_theorem1(g_id, N_BIG, GRID_FINE, SEED)
        coarse = verify_theorem1(g_id, N_STD, GRID_COARSE, SEED)
        zs[g_id] = fine["z"]
        gaps_fine[g_id] = abs(fine["lhs"]["mean"] - fine["rhs"]["mean"])
        gaps_coarse[g_id] = abs(coarse["lhs"]["mean"] - coarse["rhs"]["mean"])
        slack[g_id] = 3.0 * math.hypot(fine["lhs"]["se"], fine["rhs"]["se"],
                                       coarse["lhs"]["se"],
                                       coarse["rhs"]["se"])
    ok = all(z < 3.0 for z in zs.values()) and all(
        gaps_fine[g] <= gaps_coarse[g] + slack[g] for g in zs)
    _line(8, "theorem1", ok,
          "; ".join(f"{g} z {zs[g]:.2f} gap {gaps_coarse[g]:.2e}"
                    f"->{gaps_fine[g]:.2e}" for g in zs))
    for g_id in zs:
        assert zs[g_id] < 3.0, (g_id, zs[g_id])
        assert gaps_fine[g_id] <= gaps_coarse[g_id] + slack[g_id], g_id


def test_criterion_09_intensity_counts():
    r = verify_counts(1.0, N_STD, GRID_FINE, SEED)
    _line(9, "intensity counts", r["pass"],
          f"mean {r['lhs']['mean']:.4f} vs {r['rhs']['mean']:.4f} "
          f"(uncapped reference {r['unconditional_mean']:.4f}); "
          f"z {r['z']:.2f}")
    assert r["pass"], r


def _sup_dist(a, b):
    grid = np.union1d(a.times, b.times)
    return float(np.max(np.abs(np.interp(grid, a.times, a.values)
                               - np.interp(grid, b.times, b.values))))


def _stability_distances(eps, n_paths=200, grid_n=256, seed=SEED + 10):
    grid = TimeGrid(1.0, grid_n)
    dists = []
    i = 0
    while len(dists) < n_paths and i < 50 * n_paths:
        p = sample_bridge(grid, RngStream(seed, i))
        i += 1
        if regularity_check(p):
            continue
        if excursion_margin(excise_bridge(p)) <= 10.0 * eps:
            continue
        noise = np.random.default_rng(seed + i).uniform(-1.0, 1.0,
                                                        p.values.size)
        noise[0] = noise[-1] = 0.0
        q = Path(p.times, p.values + eps * noise, "bridge")
        dists.append(_sup_dist(g_br(p), g_br(q)))
    return np.asarray(dists)


def test_criterion_10_stability():
    eps = 1e-3
    d_big = _stability_distances(eps)
    d_small = _stability_distances(1e-4)
    n_over = int(np.sum(d_big >= 10.0 * eps))
    shrinks = d_small.mean() < d_big.mean()
    ok = n_over == 0 and shrinks
    _line(10, "stability", ok,
          f"{n_over}/{d_big.size} over 10*eps at eps=1e-3 "
          f"(max {d_big.max():.4f}, mean {d_big.mean():.4f}); "
          f"mean shrinks {d_big.mean():.4f}->{d_small.mean():.4f}")
    assert shrinks
    assert n_over == 0, (
        f"{n_over} of {d_big.size} perturbed bridges exceed 10*eps; "
        f"max sup-distance {d_big.max():.4f}")


def test_criterion_11_worker_reproducibility():
    n, grid, seed = 240, 512, SEED + 20
    runs = {
        "theorem1": lambda w: verify_theorem1("max", n, grid, seed, w),
        "corollary2": lambda w: verify_corollary2(n, grid, seed, w),
        "lemma2": lambda w: verify_lemma2("max", n, seed, grid, w),
        "lemma3": lambda w: verify_lemma3(1.0, n, grid, seed, w),
        "lemma4": lambda w: verify_lemma4(1.0, "integral", n, grid, seed, w),
        "eq22": lambda w: verify_eq22("max", n, grid, seed, w),
        "laplace": lambda w: verify_laplace(1.0, n, grid, seed, w),
        "counts": lambda w: verify_counts(1.0, n, grid, seed, w),
    }
    mismatched = []
    for name, fn in runs.items():
        texts = {w: report_to_json(fn(w)) for w in (1, 4, 8)}
        if not (texts[1] == texts[4] == texts[8]):
            mismatched.append(name)
    _line(11, "worker reproducibility", not mismatched,
          f"{len(runs)} verifiers x workers (1, 4, 8)")
    assert not mismatched, mismatched
