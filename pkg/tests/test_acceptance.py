"""End-to-end acceptance checks.

Each test records its outcome with the ``record`` fixture; the terminal
summary prints one PASS/FAIL line per criterion.  Checks that cannot be met
are marked ``xfail(strict=True)`` with the measured numbers in the reason,
so they still run and still report FAIL.
"""

import numpy as np
import pytest

from gkpcodes.bounds import lb_crossing, lb_ratio_curve, no_threshold_tr_lb, sigma_lb
from gkpcodes.channel import AgnModel, CodeSpec, FiniteGkp
from gkpcodes.decode import (
    QuadConfig, output_covariance_mc, output_covariance_quadrature,
)
from gkpcodes.lattice import (
    by_name, change_basis, hex_equivalent_exact, hex_equivalents, hexagonal, param_lattice, square,
)
from gkpcodes.optimize import (
    SweepGrid, find_breakeven, finite_breakeven_db, optimize_concat, optimize_gain,
    relative_improvement, staircase_objective, sweep_single_mode, table2,
)
from gkpcodes.reduction import reduce_to_tms, sqrep2_gain
from gkpcodes.symplectic import (
    bloch_messiah, omega, random_symplectic, sqrep2_encoding, symplectic_inverse, tms, williamson,
)

pytestmark = pytest.mark.acceptance

SQUARE_RMS = 1.25129e-3
HEX_RMS = 1.15575e-3
TABLE2_REF = {
    "square": {0.1: 0.0354, 0.2: 0.120, 0.5: 0.490},
    "hexagonal": {0.1: 0.0340, 0.2: 0.117, 0.5: 0.489},
    "d4": {0.1: 0.0322, 0.2: 0.112, 0.5: 0.487},
}
TABLE3_REF = {
    "square": {0.1: (18.9, 1.14), 0.2: (3.43, 1.20), 0.3: (1.92, 1.20)},
    "hexagonal": {0.1: (22.5, 2.04), 0.2: (3.20, 1.11), 0.3: (1.75, 1.11)},
    "d4": {0.1: (8.46, 1.21), 0.2: (3.21, 1.04), 0.3: (1.72, 1.01)},
}
WINDOW = (1 / np.sqrt(np.e), 1 / np.sqrt(2))


# ------------------------------------------------------------------ criterion 1


def test_c1_square_optimum(record):
    res = optimize_gain("square", sigma_sq=1e-2)
    d_rms = abs(res.sigma_rms_sq - SQUARE_RMS)
    d_gm = abs(res.sigma_gm_sq - res.sigma_rms_sq)
    ok = d_rms <= 5e-7 and d_gm <= 1e-6
    record(1, ok, f"rms={res.sigma_rms_sq:.6e} (|d|={d_rms:.1e}), |gm-rms|={d_gm:.1e}")
    assert ok


# ------------------------------------------------------------------ criterion 2


def test_c2_hexagonal_optimum(record):
    res = optimize_gain("hexagonal", sigma_sq=1e-2)
    d_rms = abs(res.sigma_rms_sq - HEX_RMS)
    d_gm = abs(res.sigma_gm_sq - HEX_RMS)
    ok = d_rms <= 5e-7 and d_gm <= 5e-7
    record(2, ok, f"rms={res.sigma_rms_sq:.6e} gm={res.sigma_gm_sq:.6e}")
    assert ok


def test_c2_four_representations(record):
    vals, rounded = [], []
    for (th, r), N in hex_equivalents():
        th_x, r_x = hex_equivalent_exact(N)
        vals.append(optimize_gain(param_lattice(r_x, th_x), sigma_sq=1e-2).sigma_rms_sq)
        rounded.append(optimize_gain(param_lattice(r, th), sigma_sq=1e-2).sigma_rms_sq)
    spread = float(np.ptp(vals))
    ok = spread <= 1e-7
    record(2, ok, f"exact-point spread={spread:.1e}, "
                  f"rounded-point spread={np.ptp(rounded):.1e}")
    assert ok


# ------------------------------------------------------------------ criterion 3


@pytest.fixture(scope="module")
def sweep_rows():
    return SweepGrid.uniform(12, 12, 1e-2), sweep_single_mode(SweepGrid.uniform(12, 12, 1e-2))


def test_c3_grid_minimum_near_hexagonal(record, sweep_rows):
    grid, rows = sweep_rows
    dr = grid.r_values[1] - grid.r_values[0]
    dth = grid.theta_values[1] - grid.theta_values[0]
    best = min((r for r in rows if not r["error"]), key=lambda r: r["sigma_rms_sq"])
    pts = [hex_equivalent_exact(N) for _, N in hex_equivalents()]
    near = [abs(best["r"] - r) <= dr + 1e-12 and abs(best["theta"] - th) <= dth + 1e-12
            for th, r in pts]
    ok = any(near)
    record(3, ok, f"grid min at r={best['r']:.3f} theta={best['theta'] / np.pi:.3f}pi")
    assert ok


def test_c3_square_line_flat(record, sweep_rows):
    _, rows = sweep_rows
    line = [r["sigma_rms_sq"] for r in rows if r["r"] == 1.0]
    ptp = float(np.ptp(line))
    ok = len(line) == 12 and ptp <= 1e-6
    record(3, ok, f"r=1 line ptp={ptp:.1e}")
    assert ok


# ------------------------------------------------------------------ criteria 4, 5


@pytest.fixture(scope="module")
def table2_rows():
    return {(r["lattice"], r["sigma"]): r for r in table2()}


def test_c4_table2(record, table2_rows):
    worst, lines = 0.0, []
    for name, ref in TABLE2_REF.items():
        for s, v in ref.items():
            got = table2_rows[(name, s)]["sigma_gm"]
            worst = max(worst, abs(got - v))
            lines.append(f"{name[:3]}@{s}={got:.4f}")
    ok = worst <= 1.5e-3
    record(4, ok, f"max |d|={worst:.1e} [{' '.join(lines)}]")
    assert ok


@pytest.mark.parametrize("name,ref", [("hexagonal", 0.0395), ("d4", 0.0904)])
def test_c5_relative_improvement(record, table2_rows, name, ref):
    imp = relative_improvement(table2_rows[("square", 0.1)]["sigma_gm"],
                               table2_rows[(name, 0.1)]["sigma_gm"])
    ok = abs(imp - ref) <= 0.005
    record(5, ok, f"{name} vs square {100 * imp:.2f}% (target {100 * ref:.2f}%)")
    assert ok


# ------------------------------------------------------------------ criterion 6


@pytest.fixture(scope="module")
def breakevens():
    out = {}
    out[("square", "mmse")] = find_breakeven("square", "mmse", tol=1e-4, bracket=(0.59, 0.62))
    out[("hexagonal", "mmse")] = find_breakeven("hexagonal", "mmse", tol=1e-4,
                                                bracket=(0.59, 0.62))
    out[("square", "linear")] = find_breakeven("square", "linear", tol=1e-4, bracket=(0.5, 0.6))
    out[("d4", "mmse")] = find_breakeven("d4", "mmse", tol=1e-3, bracket=(0.59, 0.62))
    return {k: v["sigma_star"] for k, v in out.items()}


@pytest.mark.parametrize("key,lo,hi", [
    (("square", "mmse"), 0.595, 0.615),
    (("hexagonal", "mmse"), 0.595, 0.615),
    (("square", "linear"), 0.548, 0.568),
    (("d4", "mmse"), 0.595, 0.615),
])
def test_c6_breakeven_values(record, breakevens, key, lo, hi):
    s = breakevens[key]
    ok = lo <= s <= hi
    record(6, ok, f"{key[0]}/{key[1]} sigma*={s:.5f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="MMSE break-even points sit at about 0.6064, just below "
                                       "1/sqrt(e) = 0.60653")
def test_c6_mmse_inside_window(record, breakevens):
    mm = {k[0]: v for k, v in breakevens.items() if k[1] == "mmse"}
    ok = all(WINDOW[0] <= v <= WINDOW[1] for v in mm.values())
    record(6, ok, "window [1/sqrt(e), 1/sqrt(2)]: "
           + " ".join(f"{k}={v - WINDOW[0]:+.1e}" for k, v in mm.items()))
    assert ok


# ------------------------------------------------------------------ criterion 7


@pytest.fixture(scope="module")
def table3_rows():
    rows = {}
    for name, ref in TABLE3_REF.items():
        lat2 = by_name(name + "2" if name != "d4" else "d4")
        for s, (g1_ref, g2_ref) in ref.items():
            res = optimize_concat(lat2, s, seed=0)
            g1, g2 = res.params["G1"], res.params["G2"]
            # common random numbers for the objective comparison
            ours = staircase_objective(lat2, s, g1, g2, seed=7).sigma_gm_sq
            theirs = staircase_objective(lat2, s, g1_ref, g2_ref, seed=7).sigma_gm_sq
            rows[(name, s)] = (g1, g2, ours, theirs)
    return rows


@pytest.mark.xfail(strict=True, reason="optimized staircase gains differ from the reference "
                                       "table and give a lower objective")
def test_c7_table3(record, table3_rows):
    fails = []
    for (name, s), (g1, g2, ours, theirs) in table3_rows.items():
        g1_ref, g2_ref = TABLE3_REF[name][s]
        p_ok = abs(g1 - g1_ref) <= 0.15 * g1_ref and abs(g2 - g2_ref) <= 0.15
        o_ok = abs(ours / theirs - 1) <= 0.01
        if not (p_ok and o_ok):
            fails.append(f"{name[:3]}@{s}:({g1:.2f},{g2:.2f}) obj {100 * (ours / theirs - 1):+.1f}%")
    ok = not fails
    record(7, ok, f"{9 - len(fails)}/9 entries in tolerance; " + " ".join(fails))
    assert ok


# ------------------------------------------------------------------ criterion 8


@pytest.mark.parametrize("name", ["square", "hexagonal"])
def test_c8_breakeven_squeezing(record, name):
    db = finite_breakeven_db(name, bracket=(10.0, 11.0), tol=0.02)["s_db_star"]
    ok = 10.3 <= db <= 10.7
    record(8, ok, f"{name} break-even {db:.2f} dB")
    assert ok


@pytest.mark.parametrize("db", [15.0, 20.0, 30.0])
@pytest.mark.parametrize("k", [1.0, 1.5])
def test_c8_square_beats_hexagonal_at_gkp_noise(record, db, k):
    # at sigma = sigma_GKP both codes idle (G = 1); 1.5 sigma_GKP is the first point with a gain
    fin = FiniteGkp.from_db(db)
    s = k * float(np.sqrt(fin.sigma_gkp_sq))
    a = optimize_gain("square", sigma=s, objective="gm", fin=fin).sigma_gm_sq
    b = optimize_gain("hexagonal", sigma=s, objective="gm", fin=fin).sigma_gm_sq
    ok = a <= b
    record(8, ok, f"{db:g} dB, sigma={k:g} sigma_GKP: square {a:.4e} <= hexagonal {b:.4e}")
    assert ok


# ------------------------------------------------------------------ criterion 9


def _chain_ok(rep, gains, sigma, N, M):
    ok = rep.sigma_rms_sq >= rep.sigma_gm_sq * (1 - 1e-12)
    if sigma <= WINDOW[1]:
        # the capacity bound behind sigma_lb vanishes above 1/sqrt(2)
        ok &= rep.sigma_gm >= sigma_lb(sigma, N, M)
    return ok and np.trace(rep.v_out) >= no_threshold_tr_lb(gains, sigma) * (1 - 1e-10)


def test_c9_property_suite(record):
    rng = np.random.default_rng(99)
    parts = {}

    worst = 0.0
    for _ in range(1000):
        m = int(rng.integers(1, 4))
        S, T = random_symplectic(m, rng), random_symplectic(m, rng)
        Om = omega(m)
        scale = max(1.0, np.linalg.norm(S) ** 2 * np.linalg.norm(T) ** 2)
        worst = max(worst, np.linalg.norm(S @ Om @ S.T - Om) / scale,
                    np.linalg.norm((S @ T) @ Om @ (S @ T).T - Om) / scale,
                    np.linalg.norm(symplectic_inverse(S) @ S - np.eye(2 * m)) / scale)
    parts["symplectic identities x1000"] = worst < 1e-9

    bm_err = w_err = 0.0
    for _ in range(100):
        m = int(rng.integers(1, 4))
        S = random_symplectic(m, rng)
        bm_err = max(bm_err, np.linalg.norm(bloch_messiah(S).reconstruct() - S) / np.linalg.norm(S))
        V = S @ np.diag(np.repeat(0.5 + rng.exponential(1.0, m), 2)) @ S.T
        w_err = max(w_err, np.linalg.norm(williamson(V).reconstruct() - V) / np.linalg.norm(V))
    parts["round trips"] = bm_err < 1e-8 and w_err < 1e-8

    reports = []
    N = np.array([[2, -1], [1, 0]])
    L = hexagonal()
    for kind in ("mmse", "linear"):
        a = output_covariance_quadrature(CodeSpec(tms(3.0), L, 1, 1), AgnModel.iid(0.3, 2),
                                         estimator_kind=kind)
        b = output_covariance_quadrature(CodeSpec(tms(3.0), change_basis(L, N), 1, 1),
                                         AgnModel.iid(0.3, 2), estimator_kind=kind)
        reports += [(a, [3.0], 0.3, 1, 1), (b, [3.0], 0.3, 1, 1)]
        d = np.abs(a.v_out - b.v_out).max() / np.abs(a.v_out).max()
        if kind == "mmse":
            parts["mmse basis invariance"] = d < 1e-8
        else:
            parts["linear non-invariance"] = d > 1e-3

    worst = 0.0
    for _ in range(200):
        worst = max(worst, reduce_to_tms(random_symplectic(5, rng), 2, 3).residual)
    parts["reduction residual x200"] = worst < 1e-8
    g = reduce_to_tms(sqrep2_encoding(1.3), 1, 1).gains[0]
    parts["sqrep2 gain"] = abs(g - sqrep2_gain()) < 1e-10

    code = CodeSpec(tms(2.0), hexagonal(), 1, 1)
    q = output_covariance_quadrature(code, AgnModel.iid(0.4, 2))
    mc = output_covariance_mc(code, AgnModel.iid(0.4, 2), n_samples=200_000, seed=5)
    parts["quadrature vs MC"] = abs(mc.sigma_gm - q.sigma_gm) < 3 * mc.sigma_gm_se
    reports += [(q, [2.0], 0.4, 1, 1), (mc, [2.0], 0.4, 1, 1)]

    tight = QuadConfig(rel_tol=1e-11, max_level=5)
    small = [output_covariance_quadrature(CodeSpec(tms(30.0), square(), 1, 1),
                                          AgnModel.iid(0.01, 2), estimator_kind=k, quad=tight)
             for k in ("mmse", "linear")]
    parts["mmse vs linear at 0.01"] = (abs(small[0].sigma_rms_sq - small[1].sigma_rms_sq)
                                       < 1e-6 * small[0].sigma_rms_sq)
    reports += [(r, [30.0], 0.01, 1, 1) for r in small]

    for s in (0.1, 0.5, 0.75):
        for G in (1.0, 2.5, 8.0):
            r = output_covariance_quadrature(CodeSpec(tms(G), square(), 1, 1), AgnModel.iid(s, 2))
            reports.append((r, [G], s, 1, 1))
    parts["report chain"] = all(_chain_ok(*r) for r in reports)

    bad = [k for k, v in parts.items() if not v]
    ok = not bad
    record(9, ok, f"{len(parts) - len(bad)}/{len(parts)} properties hold"
           + (f" (failing: {', '.join(bad)})" if bad else ""))
    assert ok


# ------------------------------------------------------------------ criterion 10


def test_c10_transition_is_sharp(record):
    s = np.array([0.65, 0.70, 0.72, 0.8])
    hi = lb_ratio_curve(s, 10_000)
    at = [lb_ratio_curve([WINDOW[1]], r)[0] for r in (1, 2, 4)]
    ok = bool(np.all(hi[:2] < 1e-3) and np.all(hi[2:] > 1) and np.allclose(at, np.sqrt(2 / np.e)))
    record(10, ok, "curves pinned at sqrt(2/e) at 1/sqrt(2); step for large M/N")
    assert ok


@pytest.mark.xfail(strict=True, reason="the closed-form curves cross 1 above 1/sqrt(2) for every "
                                       "finite M/N")
def test_c10_crossings_below_half_sqrt2(record):
    xs = {r: lb_crossing(r) for r in (1, 2, 4)}
    ok = all(x <= WINDOW[1] + 1e-9 for x in xs.values())
    record(10, ok, "crossings " + " ".join(f"M/N={r}:{x:.5f}" for r, x in xs.items())
           + f" vs 1/sqrt(2)={WINDOW[1]:.5f}")
    assert ok
