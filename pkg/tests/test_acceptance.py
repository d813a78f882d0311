"""Acceptance suite: one test and one PASS/FAIL line per criterion."""
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from mavr.data import SplitSpec, generate_blobs, preset, sample_split
from mavr.graph import Dataset, KernelSpec, build_laplacian, build_similarity
from mavr.harness import ExperimentSpec, run_experiment
from mavr.linalg import kron_spectrum, sym_eig
from mavr.predict import predict_multiclass
from mavr.solver import (
    EigenCache,
    SolverConfig,
    lgc,
    objective,
    secular_g,
    solve,
    solve_constrained,
    solve_unconstrained,
    volume_approx,
)

from oracles import batch_objective, dense_constrained, random_instance, random_labels, sphere_samples

ROOT = Path(__file__).resolve().parents[1]
N_INSTANCES = 500


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, detail


def note(capsys, text):
    with capsys.disabled():
        print(f"\n[INFO] {text}")


@pytest.fixture(scope="module")
def instances():
    """500 random (P PD, Q PSD) instances solved by both routes."""
    rng = np.random.default_rng(20240601)
    out = []
    t0 = time.perf_counter()
    for _ in range(N_INSTANCES):
        P, Q, Y, gamma, tau = random_instance(rng)
        sol = solve_constrained(P, Q, Y, SolverConfig(gamma, tau), cache=EigenCache())
        H_ref, rho_ref = dense_constrained(P, Q, Y, gamma, tau)
        out.append((P, Q, Y, gamma, tau, sol, H_ref, rho_ref))
    return out, time.perf_counter() - t0


def test_criterion_01_oracle_equivalence(instances, capsys):
    items, elapsed = instances
    h_err = max(np.linalg.norm(s.H - H_ref) / tau for _, _, _, _, tau, s, H_ref, _ in items)
    r_err = max(abs(s.rho - rho_ref) / (1 + abs(s.rho)) for *_, s, _, rho_ref in items)
    ok = h_err <= 1e-6 and r_err <= 1e-8 and elapsed < 60
    report(capsys, 1, ok, f"{len(items)} instances, max ||H-H_ref||/tau={h_err:.2e} (<=1e-6), "
           f"max |rho-rho_ref|/(1+|rho|)={r_err:.2e} (<=1e-8), runtime {elapsed:.1f}s (<60s)")


def test_criterion_02_global_optimality(instances, capsys):
    items, _ = instances
    rng = np.random.default_rng(7)
    worst = math.inf
    for P, Q, Y, gamma, tau, sol, _, _ in items:
        f = objective(sol.H, Y, P, Q, gamma)
        S = sphere_samples(rng, 10_000, *Y.shape, tau)
        worst = min(worst, batch_objective(S, Y, P, Q, gamma).min() - f)
    report(capsys, 2, worst >= -1e-8, f"min over instances of (best of 1e4 sphere samples - solver objective) = {worst:.3e} (>= -1e-8)")


def test_criterion_03_bracket(instances, capsys):
    items, _ = instances
    inside, g0_max, sign_change = 0, -math.inf, 0
    for P, Q, Y, gamma, tau, sol, _, _ in items:
        eP, eQ = sym_eig(P), sym_eig(Q)
        kron = kron_spectrum(eP, eQ)
        z = (eQ.vectors.T @ Y @ eP.vectors).ravel(order="F")[kron.flat_index]
        pole = gamma * kron.values[sol.k0]
        rho0 = pole - np.linalg.norm(Y) / tau
        inside += rho0 <= sol.rho < pole
        g0_max = max(g0_max, secular_g(rho0, z, kron, gamma, tau, sol.k0))
        above = min(pole - 1e-9 * max(1.0, abs(pole)), sol.rho + 1e-6 * (pole - rho0))
        sign_change += secular_g(above, z, kron, gamma, tau, sol.k0) > 0 or above <= sol.rho
    n = len(items)
    ok = inside == n and g0_max <= 1e-12 and sign_change == n
    report(capsys, 3, ok, f"root in [rho0, pole) for {inside}/{n}; max g(rho0) = {g0_max:.3e} (<=1e-12); "
           f"g > 0 just above the root for {sign_change}/{n}")


def test_criterion_04_kkt(instances, capsys):
    items, _ = instances
    stat, norm = 0.0, 0.0
    for P, Q, Y, gamma, tau, sol, _, _ in items:
        stat = max(stat, np.linalg.norm(gamma * Q @ sol.H @ P - sol.rho * sol.H - Y) / np.linalg.norm(Y))
        norm = max(norm, abs(np.linalg.norm(sol.H) - tau) / tau)
    report(capsys, 4, stat <= 1e-8 and norm <= 1e-8,
           f"max ||gQHP - rho H - Y||/||Y|| = {stat:.2e}, max | ||H|| - tau |/tau = {norm:.2e} (both <=1e-8)")


def test_criterion_05_lgc_equivalence(capsys):
    rng = np.random.default_rng(5)
    worst, count = 0.0, 0
    for _ in range(100):
        n = int(rng.integers(3, 51))
        c = int(rng.integers(2, 5))
        X = rng.normal(size=(n, 2))
        L = build_laplacian(build_similarity(Dataset(X), KernelSpec("gaussian", sigma=float(rng.uniform(0.5, 2)))))
        Y = random_labels(rng, n, c)
        gamma = float(np.exp(rng.uniform(np.log(0.1), np.log(100))))
        H = solve_unconstrained(np.eye(c), L, Y, SolverConfig(gamma, mode="unconstrained"), cache=EigenCache()).H
        worst = max(worst, np.abs(H - lgc(L, Y, gamma)).max())
        count += 1
    report(capsys, 5, worst <= 1e-8, f"{count} random graphs (n<=50): max |H_mavr - H_lgc| = {worst:.2e} (<=1e-8)")


def test_criterion_06_stability(capsys):
    rng = np.random.default_rng(6)
    viol_u = viol_c = checked_c = 0
    worst_u = worst_c = 0.0
    for _ in range(500):
        P, Q, Y, gamma, tau = random_instance(rng)
        Y2 = random_labels(rng, *Y.shape)
        cache = EigenCache()
        _, _, kron = cache.factors(P, Q)
        lam1 = max(kron.values[0], 0.0)

        cu = SolverConfig(gamma, mode="unconstrained")
        Hu = solve_unconstrained(P, Q, Y, cu, cache=cache).H
        Hu2 = solve_unconstrained(P, Q, Y2, cu, cache=cache).H
        rhs = np.linalg.norm(Y - Y2) / (gamma * lam1 + 1)
        lhs = np.linalg.norm(Hu - Hu2)
        worst_u = max(worst_u, lhs / rhs if rhs else 0.0)
        viol_u += lhs > rhs * (1 + 1e-10) + 1e-14

        a = solve_constrained(P, Q, Y, SolverConfig(gamma, tau), cache=cache)
        b = solve_constrained(P, Q, Y2, SolverConfig(gamma, tau), cache=cache)
        C = gamma * kron.values[0] - max(a.rho, b.rho)
        if C > 0:
            checked_c += 1
            rhs = np.linalg.norm(Y - Y2) / C + abs(a.rho - b.rho) * min(np.linalg.norm(Y), np.linalg.norm(Y2)) / C**2
            lhs = np.linalg.norm(a.H - b.H)
            worst_c = max(worst_c, lhs / rhs if rhs else 0.0)
            viol_c += lhs > rhs * (1 + 1e-10) + 1e-14
    ok = viol_u == 0 and viol_c == 0 and checked_c >= 250
    report(capsys, 6, ok, f"unconstrained: 500 pairs, {viol_u} violations (max lhs/rhs {worst_u:.4f}); "
           f"constrained: {checked_c} pairs with C>0, {viol_c} violations (max lhs/rhs {worst_c:.4f})")


def ground_truth(rng, P, Q, C_h, norm):
    """H* mixing two Kronecker eigenvectors so that V(H*) is just below C_h."""
    eP, eQ = sym_eig(P), sym_eig(Q)
    kron = kron_spectrum(eP, eQ)
    lam = kron.values
    lo = int(np.flatnonzero(lam <= C_h)[-1])
    hi = int(np.flatnonzero(lam > C_h)[0])
    w = (lam[hi] - C_h) / (lam[hi] - lam[lo])
    coef = np.zeros(lam.size)
    coef[lo], coef[hi] = math.sqrt(w), math.sqrt(1 - w)
    C = np.zeros(lam.size)
    C[kron.flat_index] = coef
    G = C.reshape(Q.shape[0], P.shape[0], order="F")
    H = eQ.vectors @ G @ eP.vectors.T
    H *= norm / np.linalg.norm(H)
    return H * (1 - 1e-12)


def error_trials(rng, P, Q, H_star, labeled_rows, sigma_l, sigma_u, cfg, draws=200):
    n, c = H_star.shape
    std = np.where(np.isin(np.arange(n), labeled_rows)[:, None], sigma_l, sigma_u) * np.ones((1, c))
    cache = EigenCache()
    errs, rhos = [], []
    for _ in range(draws):
        Y = H_star + std * rng.normal(size=(n, c))
        sol = solve(P, Q, Y, cfg, cache=cache)
        errs.append(np.sum((sol.H - H_star) ** 2))
        rhos.append(sol.rho)
    return np.array(errs), np.array(rhos)


def test_criterion_07_error_bound(capsys):
    rng = np.random.default_rng(77)
    n, c, l = 30, 3, 6
    X = rng.normal(size=(n, 2))
    Q = build_laplacian(build_similarity(Dataset(X), KernelSpec("gaussian", sigma=1.0)))
    P = preset("P5")
    labeled = rng.choice(n, size=l, replace=False)
    lt, ut = l * c, (n - l) * c
    # the stated bound (C_h/4)||H*||^2 + noise is proven only for gamma <= 1
    settings = [(0.05, 0.1, 1.0, 1.0), (0.2, 0.05, 0.5, 0.5), (0.5, 0.01, 0.2, 1.0)]
    lines, ok = [], True
    for C_h, s_l, s_u, gamma in settings:
        H_star = ground_truth(rng, P, Q, C_h, norm=math.sqrt(lt))
        assert volume_approx(H_star, P, Q) <= C_h
        errs, _ = error_trials(rng, P, Q, H_star, labeled, s_l, s_u, SolverConfig(gamma, mode="unconstrained"))
        mean, se = errs.mean(), errs.std(ddof=1) / math.sqrt(errs.size)
        bound = C_h / 4 * np.sum(H_star**2) + lt * s_l**2 + ut * s_u**2
        ok &= mean <= bound + 3 * se
        lines.append(f"(C_h={C_h}, s_l={s_l}, s_u={s_u}, gamma={gamma}): mean {mean:.4f} +- {se:.4f} vs bound {bound:.4f}")
    report(capsys, 7, ok, "200 draws each; " + "; ".join(lines))


def test_criterion_07_supplement_large_gamma(capsys):
    """For gamma > 1 the bias term needs the factor gamma; check that version,
    and report the constrained bound's slack without asserting it."""
    rng = np.random.default_rng(78)
    n, c, l = 30, 3, 6
    X = rng.normal(size=(n, 2))
    Q = build_laplacian(build_similarity(Dataset(X), KernelSpec("gaussian", sigma=1.0)))
    P = preset("P5")
    labeled = rng.choice(n, size=l, replace=False)
    lt, ut = l * c, (n - l) * c
    C_h, s_l, s_u, gamma = 0.01, 0.01, 0.02, 99.0
    H_star = ground_truth(rng, P, Q, C_h, norm=math.sqrt(lt))
    errs, _ = error_trials(rng, P, Q, H_star, labeled, s_l, s_u, SolverConfig(gamma, mode="unconstrained"))
    mean, se = errs.mean(), errs.std(ddof=1) / math.sqrt(errs.size)
    noise = lt * s_l**2 + ut * s_u**2
    stated = C_h / 4 * np.sum(H_star**2) + noise
    corrected = gamma * C_h / 4 * np.sum(H_star**2) + noise
    note(capsys, f"gamma={gamma}: mean {mean:.4f} +- {se:.4f}; (C_h/4) form {stated:.4f} "
         f"({'holds' if mean <= stated + 3 * se else 'violated'}); (gamma C_h/4) form {corrected:.4f}")
    assert mean <= corrected + 3 * se

    tau = math.sqrt(lt)
    errs_c, rhos = error_trials(rng, P, Q, H_star, labeled, s_l, s_u, SolverConfig(1.0, tau))
    lam1 = sym_eig(P).values[0] * sym_eig(Q).values[0]
    Cgt = lam1 - rhos.max()
    hn = math.sqrt(np.sum(H_star**2))
    bound = (math.sqrt(C_h) * lam1 / Cgt) * hn + max(math.sqrt(lt) / tau - lam1 - 1, lam1 - Cgt + 1) / Cgt * hn \
        + math.sqrt(noise) / Cgt
    note(capsys, f"constrained (gamma=1, tau={tau:.3f}): mean ||H-H*|| {np.sqrt(errs_c).mean():.4f} "
         f"vs bound {bound:.4f} with a-posteriori C={Cgt:.4f} (reported, not asserted)")


def test_criterion_08_3circles(capsys):
    spec = ExperimentSpec.from_json(ROOT / "demos" / "specs" / "3circles.json")
    assert (spec.dataset["n"], spec.dataset["sigma_eps"], spec.kernel["sigma"], spec.gamma, spec.trials) == (
        300, 0.5, 0.5, [99.0], 100)
    t0 = time.perf_counter()
    res = run_experiment(spec)
    elapsed = time.perf_counter() - t0
    mavr = next(r for r in res.records if r.method == "mavr_constrained")
    base = next(r for r in res.records if r.method == "lgc")
    assert mavr.tau == pytest.approx(math.sqrt(3))
    ok = mavr.mean_error <= base.mean_error + base.std_error and elapsed < 600
    report(capsys, 8, ok, f"MAVR {mavr.mean_error:.4f} +- {mavr.std_error:.4f} vs LGC {base.mean_error:.4f} "
           f"+- {base.std_error:.4f} over {mavr.trials} trials; runtime {elapsed:.1f}s (<600s)")


def test_criterion_09_serendipitous(capsys):
    P = preset("P5")
    cfg = SolverConfig(99.0, 2.0, balance_gamma=1.0)
    success = 0
    for trial in range(100):
        data = generate_blobs([[0, 0], [6, 0], [3, 5]], [30, 30, 30], 0.7, seed=1000 + trial)
        Q = build_laplacian(build_similarity(data, KernelSpec("gaussian", sigma=0.5)))
        idx, Y = sample_split(data, SplitSpec(4, "serendipitous", {3}, seed=trial))
        pred = predict_multiclass(solve(P, Q, Y, cfg, cache=EigenCache()).H).labels
        unl = np.ones(data.n, bool)
        unl[idx] = False
        known = unl & (data.labels != 3)
        hidden = data.labels == 3
        success += np.all(pred[known] == data.labels[known]) and np.all(~np.isin(pred[hidden], [1, 2]))
    report(capsys, 9, success >= 95, f"known-class error 0 and every hidden point labeled outside {{1,2}} in {success}/100 trials (>=95)")


def run_cli(*args, cwd):
    proc = subprocess.run([sys.executable, "-m", "mavr", *args], capture_output=True, text=True, cwd=cwd)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def test_criterion_10_determinism(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "dataset": {"generator": "3circles", "n": 90, "sigma_eps": 0.5},
        "kernel": {"kind": "gaussian", "sigma": 0.7},
        "methods": ["mavr_constrained", "mavr_unconstrained", "lgc"],
        "gamma": [1, 99], "tau_scale": [0.5, 1], "trials": 5,
    }))
    outputs = {}
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        run_cli("generate", "3circles", "--n", "60", "--seed", "11", "--out", "c.csv", cwd=d)
        run_cli("generate", "blobs", "--centers", "0,0;5,0", "--counts", "8,9", "--seed", "11", "--out", "b.csv", cwd=d)
        lines = (d / "c.csv").read_text().splitlines()
        (d / "partial.csv").write_text("\n".join([lines[0]] + lines[1:4] + [l.rsplit(",", 1)[0] + "," for l in lines[4:]]) + "\n")
        for fmt in ("csv", "json"):
            run_cli("solve", "--data", "partial.csv", "--out", f"h.{fmt}", "--format", fmt, cwd=d)
            run_cli("experiment", str(spec), "--seed", "11", "--out", f"r.{fmt}", "--format", fmt, cwd=d)
        outputs[run] = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
    same = outputs["a"] == outputs["b"]
    report(capsys, 10, same, f"{len(outputs['a'])} output files byte-identical across repeated runs: {same}")
