"""Acceptance suite: one test per criterion, each at its stated tolerance."""

import os
import time

import numpy as np
import pytest
from conftest import random_state, record

from superchain import closed_solver as cs
from superchain import dynamics as dyn
from superchain import liouville as lv
from superchain import open_solver as osv
from superchain.cli import parse_grid
from superchain.model import ChainSpec

SWEEP = parse_grid("0.05:0.01:20")
COHERENCE_GAMMAS = [0.05, 0.1, 0.25, 0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 5, 7, 10, 15, 20]
MC_SEED = 20261019


def spec(lam, **kw):
    return ChainSpec.symmetric(10, 2.5, lam=lam, kappa=4.0, **kw)


def workers():
    return int(os.environ.get("SUPERCHAIN_THREADS", os.cpu_count() or 1))


@pytest.fixture(scope="module")
def sweep_weak():
    return osv.sweep_gamma(spec(0.01), SWEEP)


@pytest.fixture(scope="module")
def scan_weak_noise():
    return lv.coherence_scan(spec(2.0), COHERENCE_GAMMAS, [10, 20, 30, 40], [1e-3], workers=workers())


@pytest.fixture(scope="module")
def scan_strong_noise():
    return lv.coherence_scan(spec(2.0), COHERENCE_GAMMAS, [40], [1e-1], workers=workers())


@pytest.fixture(scope="module")
def trace_run():
    s = spec(2.0, gamma=2.5)
    psi = cs.pair_state(s, 1).amplitudes
    t = np.linspace(0, 50 / s.nu, 501)
    return s, psi, t, lv.evolve_density(s, np.outer(psi, psi.conj()), t)


@pytest.fixture(scope="module")
def dephasing_run():
    alpha = 1e-3
    s = spec(2.0, alpha_phi=alpha)
    psi = random_state(np.random.default_rng(2), s.dim)
    t = np.array([0.0, 1 / (2 * alpha), 3 / (2 * alpha)])
    rho0 = np.outer(psi, psi.conj())
    return alpha, rho0, t, lv.evolve_density(s, rho0, t, hamiltonian=np.zeros((s.dim, s.dim)))


@pytest.fixture(scope="module")
def mc_run():
    s = spec(2.0, gamma=2.5, alpha_phi=1e-3)
    psi = cs.pair_state(s, 1).amplitudes
    noise = lv.NoiseModel(1e-3, seed=MC_SEED, dt=0.01, n_traj=2000)
    t0 = time.perf_counter()
    cmp = lv.compare_with_master(s, psi, noise, np.linspace(5, 50, 10))
    return cmp, time.perf_counter() - t0


def test_criterion_01_decoupled_limit():
    t0 = time.perf_counter()
    s = spec(1e-6)
    num = np.array([x.energy for x in cs.closed_spectrum(s)])
    ana = cs.decoupled_limit_spectrum(s).energies(s.lam)
    err = np.abs(num - ana).max()
    runtime = time.perf_counter() - t0
    # order from the relative error: the central pair sits at ±κ/λ, so its
    # absolute shift is O(λ) while every level converges as O(λ²) relative
    lams = np.array([1e-2, 1e-3, 1e-4])
    rel = []
    for lam in lams:
        n = np.array([x.energy for x in cs.closed_spectrum(spec(lam))])
        a = cs.decoupled_limit_spectrum(s).energies(lam)
        rel.append(np.max(np.abs(n - a) / np.maximum(np.abs(a), 1.0)))
    order = np.polyfit(np.log(lams), np.log(rel), 1)[0]
    ok = err < 1e-6 and 1.0 <= order <= 4.0 and runtime < 1.0
    assert record(1, "decoupled limit", ok, f"max|dE|={err:.2e} (<1e-6), order={order:.3f} (2 within x2), {runtime:.3f}s")


def test_criterion_02_symmetric_point_roots():
    s = spec(2.0)
    eig = np.array([x.energy for x in cs.closed_spectrum(s)])
    band = eig[[cs.in_band(e, s) for e in eig]]
    roots = np.sort([E for E, _ in cs.solve_symmetric_point_energies(s).roots])
    count_ok = len(roots) == len(band)
    dev = np.abs(roots - band).max() if count_ok else np.inf
    ok = count_ok and dev < 1e-9
    assert record(2, "transcendental roots", ok, f"{len(roots)} roots vs {len(band)} in-band eigenvalues, max dev {dev:.2e} (<1e-9)")


def test_criterion_03_width_sum_rule(sweep_weak):
    dev = np.abs(sweep_weak.widths.sum(axis=1) - 2 * sweep_weak.gamma_grid).max()
    ok = len(sweep_weak.gamma_grid) == 1996 and dev < 1e-9
    assert record(3, "width sum rule", ok, f"max|sum Gamma - 2 gamma|={dev:.2e} over {len(SWEEP)} points (<1e-9)")


def test_criterion_04_superradiance(sweep_weak):
    res = osv.detect_superradiance(sweep_weak)
    g = sweep_weak.gamma_grid
    s_hi = res.top2_share[np.argmin(np.abs(g - 20))]
    s_lo = res.top2_share[np.argmin(np.abs(g - 0.1))]
    ok = 1.5 <= res.gamma_crit <= 3.5 and s_hi > 0.9 and s_lo < 0.3
    detail = f"gamma_crit={res.gamma_crit:.3f} in [1.5,3.5], share(20)={s_hi:.3f} (>0.9), share(0.1)={s_lo:.3f} (<0.3), D={res.level_spacing:.4f}"
    assert record(4, "superradiance transition", ok, detail)


def test_criterion_05_edge_localization():
    weights = {lam: osv.superradiant_profiles(spec(lam), [20.0]).edge_weight()[0] for lam in (0.01, 2.0)}
    ok = all(np.all(w > 0.9) for w in weights.values())
    detail = ", ".join(f"lambda={lam}: {w[0]:.4f}/{w[1]:.4f}" for lam, w in weights.items())
    assert record(5, "edge localization", ok, detail + " (>0.9)")


def test_criterion_06_open_band_structure():
    obs = osv.band_structure_vs_lambda(spec(2.0, gamma=3.0), np.geomspace(0.05, 20, 200))
    v1, v5 = obs.pair_variation(1), obs.pair_variation(5)
    ok = 10 * v5 <= v1
    assert record(6, "open band structure", ok, f"pair V spread {v5:.4g}, pair I spread {v1:.4g}, ratio {v1 / v5:.1f} (>=10)")


def _survival_agreement(s, psi, tau):
    t = np.linspace(0, 3 * tau, 301)
    a = dyn.evolve_state(s, psi, t, method="eigen").p
    b = dyn.evolve_state(s, psi, t, method="integrate").p
    return np.abs(a - b).max()


def test_criterion_07_survival():
    gammas = (0.25, 2.5, 25.0)
    tau, dev = {}, 0.0
    for pair in (1, 5):
        for g in gammas:
            s = spec(2.0, gamma=g)
            psi = osv.pair_resonance(s, pair, "upper").right_vec
            tau[pair, g] = dyn.lifetime(s, psi)
            dev = max(dev, _survival_agreement(s, psi, tau[pair, g]))
    ratio = tau[1, 25.0] / tau[1, 2.5]
    sr = [tau[5, g] for g in gammas]
    ok = ratio >= 5 and sr[0] > sr[1] > sr[2] and dev < 1e-8
    detail = (
        f"pair I tau(25)/tau(2.5)={ratio:.2f} (>=5); pair V tau={sr[0]:.4g},{sr[1]:.4g},{sr[2]:.4g} "
        f"(decreasing); eigen vs integrator {dev:.1e} (<1e-8)"
    )
    assert record(7, "survival probability", ok, detail)


def test_criterion_08_initial_decay_rate():
    s = spec(2.0, gamma=2.5)
    rng = np.random.default_rng(8)
    h = 1e-3
    worst = 0.0
    for _ in range(20):
        psi = random_state(rng, s.dim)
        p = dyn.survival_probability(s, psi, h * np.arange(5), method="eigen")
        dp = (-25 * p[0] + 48 * p[1] - 36 * p[2] + 16 * p[3] - 3 * p[4]) / (12 * h)
        expect = -s.gamma * (abs(psi[0]) ** 2 + abs(psi[2 * s.N - 1]) ** 2)
        worst = max(worst, abs(dp - expect))
    assert record(8, "initial decay rate", worst < 1e-6, f"max deviation over 20 states {worst:.2e} (<1e-6)")


def test_criterion_09_trace_equals_survival(trace_run):
    s, psi, t, ev = trace_run
    tr = np.trace(ev.rho, axis1=1, axis2=2).real
    dev = np.abs(tr - dyn.survival_probability(s, psi, t)).max()
    assert record(9, "master-equation consistency", dev < 1e-6, f"max|Tr rho - P| on [0, 50] = {dev:.2e} (<1e-6)")


def test_criterion_10_dephasing_closed_form(dephasing_run):
    alpha, rho0, t, ev = dephasing_run
    off = ~np.eye(len(rho0), dtype=bool)
    k = 2
    rel = np.abs(ev.rho[k][off] / (rho0[off] * np.exp(-2 * alpha * t[k])) - 1).max()
    assert record(10, "dephasing closed form", rel < 1e-6, f"max rel error at t=3/(2 alpha): {rel:.2e} (<1e-6)")


def test_criterion_11_monte_carlo(mc_run):
    cmp, runtime = mc_run
    ok = cmp.passed and runtime < 60
    detail = f"seed {MC_SEED}, max z={cmp.z_max.max():.2f}, {int(cmp.exceed.sum())} elements beyond 3 SE, {runtime:.1f}s (<60s)"
    assert record(11, "Monte-Carlo oracle", ok, detail)


def _tau_table(rows, n):
    sel = sorted((r for r in rows if r.N == n), key=lambda r: r.gamma)
    return np.array([r.gamma for r in sel]), np.array([r.tau for r in sel]), sel


def test_criterion_12_coherence_scan_shape(scan_weak_noise):
    ok, parts, tmin = True, [], []
    for n in (10, 20, 30, 40):
        g, tau, sel = _tau_table(scan_weak_noise, n)
        k = int(np.argmin(tau))
        clean = all(not r.censored and not r.error for r in sel)
        interior = 0 < k < len(g) - 1 and 1 <= g[k] <= 5
        ok &= clean and interior
        tmin.append(tau[k])
        parts.append(f"N={n}: min {tau[k]:.4g} at gamma={g[k]:g}")
    ok &= bool(np.all(np.diff(tmin) > 0))
    assert record(12, "coherence scan shape", ok, "; ".join(parts) + " (interior in [1,5], increasing in N)")


def test_criterion_13_strong_dephasing(scan_strong_noise):
    g, tau, sel = _tau_table(scan_strong_noise, 40)
    spread = (tau.max() - tau.min()) / tau.min()
    ok = spread < 0.2 and all(not r.censored and not r.error for r in sel)
    assert record(13, "strong dephasing flattening", ok, f"N=40 tau in [{tau.min():.4g}, {tau.max():.4g}], spread {100 * spread:.2f}% (<20%)")


def test_criterion_14_hygiene(trace_run, dephasing_run, mc_run, scan_weak_noise, scan_strong_noise):
    hyg = [trace_run[3].hygiene, dephasing_run[3].hygiene, mc_run[0].master.hygiene]
    hyg += [r.hygiene for r in scan_weak_noise + scan_strong_noise]
    missing = sum(h is None for h in hyg)
    hyg = [h for h in hyg if h is not None]
    herm = max(h.max_hermitian_dev for h in hyg)
    eig = min(h.min_eigenvalue for h in hyg)
    trace = max(h.max_trace_increase for h in hyg)
    steps = sum(h.steps for h in hyg)
    checks = sum(h.eig_checks for h in hyg)
    ok = missing == 0 and all(h.ok() for h in hyg)
    detail = (
        f"{len(hyg)} trajectories, {steps} steps, {checks} eigenvalue checks: herm dev {herm:.1e} (<1e-8), "
        f"min eig {eig:.1e} (>=-1e-8), max trace increase {trace:.1e} (<=1e-9)"
    )
    assert record(14, "density-matrix hygiene", ok, detail)
