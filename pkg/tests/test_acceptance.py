"""Acceptance criteria 1-10 at desk scale.

Each test records one PASS/FAIL line (printed in the terminal summary) and
then asserts it.  Run alone with ``pytest tests/test_acceptance.py`` or
``fairspace acceptance``.
"""
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import (
    cluster_line,
    disk_mixture,
    plane_mixture,
    record,
    symmetric_disk,
    thirds_fan,
    uniform_disk,
)
from fairspace import combinatorics as comb
from fairspace.cli import main as cli_main
from fairspace.delta_spaces import (
    Join,
    PowerFixedSites,
    Trivial,
    TwoLineDisk,
    calibrate_M,
    evaluate,
    interval_space,
)
from fairspace.envyfree_convex import (
    GroupInstance,
    normalize_columns,
    solve_group_allocation,
    solve_simultaneous,
)
from fairspace.geometry import partition_to_dict
from fairspace.kkm_solver import SolveOptions, brute_force_oracle, levi_oracle, solve_envy_free, solve_levi
from fairspace.measures import Measure, cell_mass, save_measure, value_table
from fairspace.power_equipartition import equalize_weights
from fairspace.proportional import solve_proportional

pytestmark = pytest.mark.acceptance


def random_permutation_mix(rng, n, k):
    th = rng.dirichlet(np.ones(k))
    return sum(a * comb.permutation_matrix(rng.permutation(n)) for a in th)


# 1 -----------------------------------------------------------------------------

def test_criterion_1_two_line_secretive(tmp_path):
    rows, worst_time, fails = [], 0.0, []
    for inst in range(20):
        rng = np.random.default_rng(100 + inst)
        paths = []
        for k in range(3):
            p = tmp_path / f"i{inst}_m{k}.json"
            save_measure(disk_mixture(rng, 10_000), p)
            paths.append(str(p))
        out = tmp_path / f"i{inst}.json"
        t0 = time.perf_counter()
        code = cli_main(["solve", "two-lines", "--measures", *paths, "--secret", "--eps", "1e-2",
                         "--seed", str(inst), "--out", str(out)])
        dt = time.perf_counter() - t0
        worst_time = max(worst_time, dt)
        cert = json.loads(out.with_suffix(".cert.json").read_text())
        hall = cert["feasible"] and sorted(cert["witnesses"]) == ["0", "1", "2", "3"]
        verified = cli_main(["verify", str(out), *paths]) == 0
        ok = code == 0 and hall and verified and dt <= 60
        rows.append(ok)
        if not ok:
            fails.append(inst)
    passed = record(1, all(rows), f"{sum(rows)}/20 feasible+verified, slowest {worst_time:.1f}s"
                    + (f", failed {fails}" if fails else ""))
    assert passed


# 2 -----------------------------------------------------------------------------

def test_criterion_2_oracle_agreement():
    worst, bad = -np.inf, []
    for n in (2, 3):
        for inst in range(25):
            rng = np.random.default_rng(1000 * n + inst)
            ms = [cluster_line(rng) for _ in range(n)]
            space = interval_space(n)
            _, _, cert = solve_envy_free(space, ms, SolveOptions(stop_at=0.0, seed=inst))
            _, oracle = brute_force_oracle(space, ms, 128)
            gap = cert.envy - oracle
            worst = max(worst, gap)
            if gap > 1e-3:
                bad.append((n, inst, round(gap, 5)))
    passed = record(2, not bad, f"50 instances, max(solver - oracle) = {worst:.2e}"
                    + (f", over 1e-3: {bad}" if bad else ""))
    assert passed


# 3 -----------------------------------------------------------------------------

def test_criterion_3_equal_measure_power_diagrams():
    total = converged = agree = 0
    for n in (2, 3, 4):
        for d in (2, 3):
            for inst in range(10):
                rng = np.random.default_rng(10_000 + 1000 * n + 100 * d + inst)
                c = int(rng.integers(1, 4))
                means = rng.uniform(-1, 1, (c, d))
                sd = rng.uniform(0.2, 0.6, c)
                lab = rng.integers(0, c, 10_000)
                pts = means[lab] + sd[lab, None] * rng.standard_normal((10_000, d))
                mu = Measure(pts, np.full(10_000, 1e-4))
                tol = 2 * mu.max_weight
                sites = pts[rng.choice(10_000, n, replace=False)]
                a = equalize_weights(mu, sites, tol, max_iter=100_000)
                b = equalize_weights(mu, sites, tol, lambda0=rng.standard_normal(n), max_iter=100_000)
                total += 1
                converged += a.max_error <= tol and b.max_error <= tol
                agree += np.abs(a.lambdas - b.lambdas).max() <= 10 * tol
    passed = record(3, converged == total and agree >= 0.9 * total,
                    f"{converged}/{total} converged to 2*max weight, {agree}/{total} starts agree")
    assert passed


# 4 -----------------------------------------------------------------------------

def test_criterion_4_matrix_layer():
    rng = np.random.default_rng(4)
    birk_err, birk_terms_ok = 0.0, True
    for _ in range(100):
        n = int(rng.integers(2, 7))
        M = random_permutation_mix(rng, n, int(rng.integers(1, n * n + 1)))
        terms = comb.birkhoff_decompose(M)
        R = sum(a * comb.permutation_matrix(p) for a, p in terms)
        birk_err = max(birk_err, float(np.abs(R - M).max()))
        birk_terms_ok &= len(terms) <= n * n - 2 * n + 2
    norm_err = 0.0
    for _ in range(100):
        n, m = int(rng.integers(2, 7)), int(rng.integers(1, 7))
        G = rng.uniform(0, 1, (m, n)) * (rng.uniform(size=(m, n)) < 0.7) + 1e-3 * np.eye(m, n)
        G[0] += 1e-3  # every column positive
        target = m / n
        norm_err = max(norm_err, float(np.abs(normalize_columns(G, target).sum(0) - target).max()))
    stack_ok = True
    for _ in range(100):
        m = int(rng.integers(1, 4))
        k = int(rng.integers(1, 4))
        n = m * k
        # m x n with rows 1 and columns m/n: scaled blocks of a doubly stochastic n x n matrix
        D = random_permutation_mix(rng, n, 3)
        A = sum(D[i * m:(i + 1) * m] for i in range(k)) / k
        N = comb.stack_matrix(A, tol=1e-12)
        stack_ok &= bool(np.abs(N.sum(0) - 1).max() <= 1e-12 and np.abs(N.sum(1) - 1).max() <= 1e-12)
    forced_ok = True
    for _ in range(100):
        n = int(rng.integers(2, 7))
        M = random_permutation_mix(rng, n, int(rng.integers(1, 4)))
        for i in np.flatnonzero(M[:, -1] > 0):
            p = comb.forced_column_permutation(M, int(i))
            forced_ok &= p[-1] == i and sorted(p) == list(range(n)) and all(M[p[j], j] > 0 for j in range(n))
    ok = birk_err < 1e-10 and birk_terms_ok and norm_err <= 1e-12 and stack_ok and forced_ok
    passed = record(4, ok, f"birkhoff err {birk_err:.1e} (terms ok: {birk_terms_ok}), column sums err "
                    f"{norm_err:.1e}, stack ok: {stack_ok}, forced ok: {forced_ok}")
    assert passed


# 5 -----------------------------------------------------------------------------

def _check_success(inst, res):
    eps = res.report["eps_final"]
    tol = 1e-3
    base = value_table([inst.base_measure], res.cells)[0]
    ok = bool(np.all(np.abs(base - 1 / inst.n) <= tol + 1e-12))
    for g, perm in zip(inst.groups, res.permutations):
        V = value_table(g, res.cells)
        ok &= all(V[j, perm[j]] >= V[j].max() - eps for j in range(len(g)))
    return ok


def test_criterion_5_simultaneous_envy_free():
    summary, ok_all = [], True
    for n in (2, 3):
        wins, verified = 0, 0
        for inst_id in range(10):
            rng = np.random.default_rng(500 + 10 * n + inst_id)
            mu = plane_mixture(rng)
            inst = GroupInstance(mu, [[plane_mixture(rng) for _ in range(n)]], n)
            res = solve_simultaneous(inst)
            if res.state is not None and res.report.get("certificate"):
                wins += 1
                verified += _check_success(inst, res)
        ok_all &= wins >= 8 and verified == wins
        summary.append(f"n={n}: {wins}/10 solved, {verified} re-verified")
    # identical group measures: a convex equipartition of all of them
    equi = []
    for n in (2, 3):
        rng = np.random.default_rng(700 + n)
        nu = plane_mixture(rng, 12_000)
        mu = plane_mixture(rng, 12_000)
        inst = GroupInstance(mu, [[nu] * n], n)
        res = solve_simultaneous(inst)
        good = res.feasible
        if good:
            eps = res.report["eps_final"]
            masses = value_table([nu], res.cells)[0]
            good = bool(np.all(np.abs(masses - 1 / n) <= eps)) and _check_success(inst, res)
        equi.append(good)
    ok_all &= all(equi)
    summary.append(f"identical measures equipartitioned: {equi}")
    passed = record(5, ok_all, "; ".join(summary))
    assert passed


# 6 -----------------------------------------------------------------------------

def test_criterion_6_group_allocation():
    details, ok_all = [], True
    for seed in range(3):
        rng = np.random.default_rng(600 + seed)
        mu = plane_mixture(rng)
        group = [plane_mixture(rng) for _ in range(4)]
        res = solve_group_allocation(mu, [group], 2)
        if not res.feasible:
            ok_all = False
            details.append(f"seed {seed}: infeasible")
            continue
        pi = res.permutations[0]
        eps = res.report["eps_final"]
        V = value_table(group, res.cells)
        sizes = np.bincount(pi, minlength=2).tolist()
        low = min(V[j, pi[j]] - (0.5 - eps) for j in range(4))
        ok_all &= sizes == [2, 2] and low >= 0
        details.append(f"seed {seed}: sizes {sizes}, margin {low:.3f}")
    passed = record(6, ok_all, "; ".join(details))
    assert passed


# 7 -----------------------------------------------------------------------------

def test_criterion_7_proportional_recursion():
    rng = np.random.default_rng(2024)  # reference seed
    mu = plane_mixture(rng, 4000)
    group = [plane_mixture(rng, 4000) for _ in range(6)]
    res = solve_proportional(mu, [group], 6, eps_total=0.05)
    ok = res.feasible
    detail = "infeasible"
    if ok:
        pi = res.maps[0]
        direct = [cell_mass(group[i], res.cells[pi[i]]) for i in range(6)]
        bound = res.certificate["composed_bound"]
        blocks = np.bincount(np.asarray(pi) // 2, minlength=3).tolist() == [2, 2, 2]
        convex = all(
            set(res.tree.cells[j].constraints) <= set(res.cells[2 * j + h].constraints)
            and set(child.cells[h].constraints) <= set(res.cells[2 * j + h].constraints)
            for j, child in enumerate(res.tree.children) for h in range(2))
        ok = (min(direct) >= bound - 1e-12 and min(direct) >= 1 / 6 - 3e-2 and blocks and convex
              and sorted(pi) == list(range(6)))
        detail = (f"min assigned mass {min(direct):.4f}, composed bound {bound:.4f}, "
                  f"1/6 - 3e-2 = {1 / 6 - 3e-2:.4f}, blocks exact: {blocks}, cells nested: {convex}")
    passed = record(7, ok, detail)
    assert passed


# 8 -----------------------------------------------------------------------------

def test_criterion_8_levi_cones():
    mu = symmetric_disk(4000)
    x, _, cert = solve_levi(thirds_fan(), [mu] * 3, [1 / 3] * 3, SolveOptions(stop_at=0.0))
    sym_ok = np.linalg.norm(x) <= 1e-2 and cert.envy == 0.0
    nu = uniform_disk(10_000, seed=8)
    alphas = [0.5, 0.25, 0.25]
    x2, assign, cert2 = solve_levi(thirds_fan(), [nu] * 3, alphas, SolveOptions(stop_at=0.0))
    _, oracle = levi_oracle(thirds_fan(), [nu] * 3, alphas, 64)
    V = cert2.value_table
    asym_ok = (cert2.feasible and all(V[assign[i], i] >= alphas[i] - 1e-2 for i in range(3))
               and cert2.envy <= oracle + 1e-3)
    passed = record(8, sym_ok and asym_ok,
                    f"symmetric |x| = {np.linalg.norm(x):.1e}, residual {cert.envy:.1e}; asymmetric "
                    f"residual {cert2.envy:.1e} vs grid oracle {oracle:.1e}")
    assert passed


# 9 -----------------------------------------------------------------------------

def _random_space(rng, mu, depth=0):
    """Random Δ-space tree with its leaf kinds; power leaves carry their calibration eps."""
    r = rng.uniform()
    if depth >= 2 or r < 0.35:
        kind = rng.integers(3)
        if kind == 0:
            return Trivial(2)
        if kind == 1:
            return TwoLineDisk(tuple(rng.uniform(-0.3, 0.3, 2)), float(rng.uniform(0.5, 1.2)))
        k = int(rng.integers(2, 4))
        sites = rng.uniform(-1, 1, (k, 2))
        M = calibrate_M(sites, [mu], POWER_EPS)
        return PowerFixedSites(sites, M)
    v = rng.standard_normal(2)
    return Join(_random_space(rng, mu, depth + 1), _random_space(rng, mu, depth + 1), tuple(v))


POWER_EPS = 0.05


def _leaf_thresholds(space):
    """Per-piece face threshold: 1e-9, or the calibration eps for power-diagram pieces."""
    if isinstance(space, Join):
        return _leaf_thresholds(space.left) + _leaf_thresholds(space.right)
    t = POWER_EPS if isinstance(space, PowerFixedSites) else 1e-9
    return [t] * space.pieces


def test_criterion_9_delta_space_laws():
    rng = np.random.default_rng(9)
    mu = uniform_disk(10_000, seed=99)
    face_fail = join_fail = trials = 0
    while trials < 1000:
        space = _random_space(rng, mu)
        n = space.pieces
        if n < 2:
            continue
        trials += 1
        thresholds = _leaf_thresholds(space)
        x = rng.dirichlet(np.ones(n))
        i = int(rng.integers(n))
        x[i] = 0.0
        x /= x.sum()
        if value_table([mu], evaluate(space, x))[0, i] >= thresholds[i]:
            face_fail += 1
        if isinstance(space, Join):
            nl = space.left.pieces
            xl = rng.dirichlet(np.ones(nl))
            xr = rng.dirichlet(np.ones(space.right.pieces))
            m_left = value_table([mu], evaluate(space, np.r_[xl, np.zeros(len(xr))]))[0]
            m_right = value_table([mu], evaluate(space, np.r_[np.zeros(nl), xr]))[0]
            if not (np.array_equal(m_left[:nl], value_table([mu], evaluate(space.left, xl))[0])
                    and np.all(m_left[nl:] == 0)
                    and np.array_equal(m_right[nl:], value_table([mu], evaluate(space.right, xr))[0])
                    and np.all(m_right[:nl] == 0)):
                join_fail += 1
    passed = record(9, face_fail == 0 and join_fail == 0,
                    f"1000 random spaces: face-law failures {face_fail}, join-limit failures {join_fail}")
    assert passed


# 10 ----------------------------------------------------------------------------

def _cli(*args, cwd):
    env = dict(os.environ, FAIRSPACE_THREADS="1")
    return subprocess.run([sys.executable, "-m", "fairspace.cli", *map(str, args)], cwd=cwd,
                          capture_output=True, text=True, env=env).returncode


def test_criterion_10_cli_determinism(tmp_path):
    rng = np.random.default_rng(10)
    for k in range(4):
        save_measure(disk_mixture(rng, 3000), tmp_path / f"m{k}.json")
    save_measure(uniform_disk(3000, seed=1), tmp_path / "disk.json")
    (tmp_path / "cones.json").write_text(json.dumps(partition_to_dict(thirds_fan())))
    (tmp_path / "sites.json").write_text(json.dumps([[-0.5, 0.0], [0.5, 0.0], [0.0, 0.6]]))
    m3 = ["m0.json", "m1.json", "m2.json"]
    runs = {
        "two-lines": ["solve", "two-lines", "--measures", *m3, "--secret", "--seed", "3"],
        "nested": ["solve", "nested", "--measures", *m3, "--cut", "1,0:0", "--cut", "0,1:1", "--seed", "3"],
        "power-fixed": ["solve", "power-fixed", "--measures", *m3, "--sites", "sites.json", "--seed", "3"],
        "levi": ["solve", "levi", "--cones", "cones.json", "--measures", "disk.json", "disk.json",
                 "disk.json", "--alphas", "0.5", "0.25", "0.25", "--seed", "3"],
        "convex": ["solve", "convex-envyfree", "--base", "disk.json", "--group", "m0.json", "m1.json",
                   "--seed", "3"],
        "proportional": ["solve", "proportional", "--n", "2", "--base", "disk.json", "--group",
                         "m0.json", "m1.json", "--seed", "3"],
    }
    mismatched, codes = [], {}
    for name, argv in runs.items():
        outputs = []
        for rep in range(2):
            d = tmp_path / f"{name}_{rep}"
            d.mkdir()
            out = d / "p.json"
            codes[name] = _cli(*argv, "--out", out, cwd=tmp_path)
            svg = d / "p.svg"
            _cli("render", out, "--out", svg, cwd=tmp_path)
            outputs.append((out.read_bytes(), out.with_suffix(".cert.json").read_bytes(), svg.read_bytes()))
        if outputs[0] != outputs[1]:
            mismatched.append(name)
    ok = not mismatched and all(c == 0 for c in codes.values())
    passed = record(10, ok, f"{len(runs)} solve commands + renders run twice; mismatches: {mismatched or 'none'}, "
                    f"exit codes {codes}")
    assert passed
