import numpy as np
import pytest
from conftest import random_state
from hypothesis import given, settings
from hypothesis import strategies as st

from superchain import dynamics as dyn
from superchain import open_solver as osv
from superchain.model import ChainSpec


def test_closed_evolution_conserves_norm(base_spec, rng):
    psi = random_state(rng, base_spec.dim)
    p = dyn.survival_probability(base_spec, psi, np.linspace(0, 50, 11))
    np.testing.assert_allclose(p, 1.0, atol=1e-12)


def test_right_eigenvector_decays_exponentially(base_spec):
    s = base_spec.replace(gamma=2.5)
    r = osv.pair_resonance(s, 1, "upper")
    t = np.linspace(0, 100, 21)
    p = dyn.survival_probability(s, r.right_vec, t)
    np.testing.assert_allclose(p, np.exp(-r.gamma_q * t), rtol=1e-9)
    assert dyn.lifetime(s, r.right_vec) == pytest.approx(1 / r.gamma_q, rel=1e-5)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_initial_decay_rate(seed, gamma):
    s = ChainSpec.symmetric(6, 2.5, lam=2.0, kappa=4.0, gamma=gamma)
    psi = random_state(np.random.default_rng(seed), s.dim)
    h = 1e-3
    p = dyn.survival_probability(s, psi, h * np.arange(5), method="eigen")
    # one-sided fourth-order stencil
    dp = (-25 * p[0] + 48 * p[1] - 36 * p[2] + 16 * p[3] - 3 * p[4]) / (12 * h)
    expect = -gamma * (abs(psi[0]) ** 2 + abs(psi[2 * s.N - 1]) ** 2)
    assert dp == pytest.approx(expect, abs=1e-6 * max(1, gamma))


def test_eigen_and_integrator_agree(base_spec, rng):
    s = base_spec.replace(gamma=2.5)
    psi = random_state(rng, s.dim)
    t = np.linspace(0, 60, 31)
    a = dyn.evolve_state(s, psi, t, method="eigen")
    b = dyn.evolve_state(s, psi, t, method="integrate")
    np.testing.assert_allclose(a.p, b.p, atol=1e-8)
    np.testing.assert_allclose(a.states, b.states, atol=1e-7)
    assert dyn.evolve_state(s, psi, t, cross_check=True).method == "eigen"


def test_survival_is_monotone(base_spec, rng):
    s = base_spec.replace(gamma=1.0)
    p = dyn.survival_probability(s, random_state(rng, s.dim), np.linspace(0, 30, 301))
    assert np.all(np.diff(p) <= 1e-12)


def test_decay_time_interpolation():
    t = np.linspace(0, 10, 11)
    assert dyn.decay_time(t, np.exp(-t / 3.3)) == pytest.approx(3.3, rel=1e-12)
    assert dyn.decay_time(t, np.ones_like(t)) is None


def test_input_validation(base_spec):
    with pytest.raises(ValueError):
        dyn.evolve_state(base_spec, np.ones(base_spec.dim), [0, 1])
    psi = np.zeros(base_spec.dim, complex)
    psi[0] = 1
    with pytest.raises(ValueError):
        dyn.evolve_state(base_spec, psi, [1, 0])
    with pytest.raises(ValueError):
        dyn.evolve_state(base_spec, psi, [0, 1], method="magic")


def test_lifetime_raises_without_decay(base_spec):
    psi = np.zeros(base_spec.dim, complex)
    psi[0] = 1
    with pytest.raises(dyn.IntegrationError):
        dyn.lifetime(base_spec, psi, t_max=100)
