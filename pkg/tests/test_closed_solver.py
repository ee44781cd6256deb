import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import Polynomial

from superchain import closed_solver as cs
from superchain.model import ChainSpec, SpecError, build_closed_hamiltonian, flat_index

# decoupled left-arm top level for N=10: 2 cos(pi/11)
LEFT_TOP_N10 = 1.9189859472289947
# decoupled right-arm top level for N=10: 2 cos(pi/10)
RIGHT_TOP_N10 = 1.902113032590307


def secular_roots(spec):
    """Roots of the cleared symmetric-point polynomial, built independently.

    With x = (E - ε0)/2ν and Chebyshev U_n, the eigenvalues of parity ±
    solve (E - δ) U_N(x) - (±(E - δ) + κ/ν) U_{N-1}(x) = 0.
    """
    N, nu, eps, d, k = spec.N, spec.nu, spec.epsilon0, spec.delta, spec.kappa
    x = Polynomial([-eps / (2 * nu), 1 / (2 * nu)])
    U = [Polynomial([1.0]), 2 * x]
    for _ in range(2, N + 1):
        U.append(2 * x * U[-1] - U[-2])
    Ed = Polynomial([-d, 1.0])
    out = {}
    for name, sg in ((cs.SYMMETRIC, 1.0), (cs.ANTISYMMETRIC, -1.0)):
        out[name] = np.sort((Ed * U[N] - (sg * Ed + k / nu) * U[N - 1]).roots().real)
    return out


def test_polynomial_oracle_small_chain():
    s = ChainSpec.symmetric(2, 2.5, lam=2.0, kappa=4.0)
    roots = secular_roots(s)
    allroots = np.sort(np.concatenate(list(roots.values())))
    energies = [st.energy for st in cs.closed_spectrum(s)]
    np.testing.assert_allclose(energies, allroots, atol=1e-12)
    # parity of each eigenstate matches its polynomial
    for st_ in cs.closed_spectrum(s):
        par = cs.SYMMETRIC if cs.reflection_parity(st_) > 0 else cs.ANTISYMMETRIC
        assert np.abs(roots[par] - st_.energy).min() < 1e-10


@pytest.mark.parametrize("N", [3, 6, 10])
def test_symmetric_point_roots_match_polynomial(N):
    s = ChainSpec.symmetric(N, 2.5, lam=2.0, kappa=4.0)
    roots = cs.solve_symmetric_point_energies(s)
    poly = secular_roots(s)
    for E, par in roots.roots:
        assert np.abs(poly[par] - E).min() < 1e-9
    in_band = sum(cs.in_band(E, s) for r in poly.values() for E in r)
    assert len(roots.roots) == in_band


def test_symmetric_point_residual_vanishes_at_roots(base_spec):
    roots = cs.solve_symmetric_point_energies(base_spec)
    for E, par in roots.roots:
        assert abs(cs.symmetric_point_residual(E, base_spec, par)) < 1e-7


def test_symmetric_point_requires_lambda_squared_kappa():
    with pytest.raises(SpecError):
        cs.solve_symmetric_point_energies(ChainSpec.symmetric(5, 2.5, lam=1.0, kappa=4.0))


def test_decoupled_limit_frozen_values():
    s = ChainSpec.symmetric(10, 2.5, lam=0.01, kappa=4.0)
    dec = cs.decoupled_limit_spectrum(s)
    assert dec.left_band.energies.max() == pytest.approx(LEFT_TOP_N10, abs=1e-15)
    assert dec.right_band.energies.max() == pytest.approx(RIGHT_TOP_N10, abs=1e-15)
    lo, hi = dec.central_pair_energies(0.01)
    assert lo == pytest.approx(1.25 - 400.0)
    assert hi == pytest.approx(1.25 + 400.0)
    assert len(dec.energies(0.01)) == s.dim


def test_decoupled_states_overlap_numeric_eigenvectors():
    s = ChainSpec.symmetric(6, 2.5, lam=1e-5, kappa=4.0)
    numeric = cs.closed_spectrum(s)
    analytic = cs.decoupled_limit_spectrum(s).states(s.lam)
    for a, b in zip(analytic, numeric):
        assert np.linalg.norm(a.amplitudes) == pytest.approx(1.0)
        assert abs(np.vdot(a.amplitudes, b.amplitudes)) == pytest.approx(1.0, abs=1e-8)


def test_decoupled_limit_convergence():
    base = ChainSpec.symmetric(10, 2.5, lam=1e-6, kappa=4.0)
    dec = cs.decoupled_limit_spectrum(base)
    num = [st.energy for st in cs.closed_spectrum(base)]
    assert np.abs(num - dec.energies(base.lam)).max() < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.floats(-3, 3), st.floats(0.2, 5), st.floats(0.1, 4))
def test_spectrum_invariants(N, delta, kappa, lam):
    s = ChainSpec.symmetric(N, delta, lam=lam, kappa=kappa)
    H = build_closed_hamiltonian(s)
    sp = cs.closed_spectrum(s)
    E = np.array([x.energy for x in sp])
    assert np.all(np.diff(E) >= 0)
    assert E.sum() == pytest.approx(np.trace(H).real, abs=1e-9)
    assert np.sum(E**2) == pytest.approx(np.sum(np.abs(H) ** 2), rel=1e-10)
    for x in sp:
        assert sum(cs.localization_weights(x)) == pytest.approx(1.0)


def test_pairs_interlace_parity(base_spec):
    states = cs.band_states(cs.closed_spectrum(base_spec), base_spec)
    pars = np.sign([cs.reflection_parity(x) for x in states])
    assert np.all(pars[:-1] * pars[1:] < 0)


def test_pair_classification(base_spec):
    spectrum = cs.closed_spectrum(base_spec)
    pairs = cs.classify_pairs(spectrum, base_spec)
    assert [p.label for p in pairs[:5]] == ["I", "II", "III", "IV", "V"]
    for p in pairs:
        assert p.rabi > 0
        assert p.e_upper > p.e_lower
    # Rabi splitting grows toward the band centre in the upper half
    rabi = [p.rabi for p in pairs[:5]]
    assert np.all(np.diff(rabi) > 0)
    # at the symmetric point each state is shared equally by both arms
    for p in pairs:
        assert p.weights_upper[0] == pytest.approx(p.weights_upper[1], abs=1e-9)
    with pytest.raises(cs.ClassificationError):
        cs.classify_pairs(spectrum, base_spec, strict=True)


def test_pair_state_member(base_spec):
    up = cs.pair_state(base_spec, 1, "upper")
    lo = cs.pair_state(base_spec, 1, "lower")
    assert up.energy > lo.energy
    assert abs(np.vdot(up.amplitudes, lo.amplitudes)) < 1e-12


def test_out_of_band_states_sit_on_qubits():
    s = ChainSpec.symmetric(10, 2.5, lam=0.01, kappa=4.0)
    out = [x for x in cs.closed_spectrum(s) if not cs.in_band(x.energy, s)]
    assert len(out) == 3
    core = [flat_index(s.N, 1), 2 * s.N, 2 * s.N + 1]
    for x in out:
        assert np.sum(np.abs(x.amplitudes[core]) ** 2) > 0.999


def test_roman():
    assert [cs.roman(n) for n in (1, 4, 5, 9, 14, 40)] == ["I", "IV", "V", "IX", "XIV", "XL"]


def test_band_structure_shapes(base_spec):
    bs = cs.band_structure(base_spec, [0.5, 1.0, 2.0])
    assert bs["energies"].shape == (3, base_spec.dim)
    np.testing.assert_allclose(bs["weights"].sum(axis=2), 1.0)


def test_chain_profile(base_spec):
    sites, w = cs.chain_profile(cs.pair_state(base_spec, 1))
    assert len(sites) == 2 * base_spec.N and np.all(w >= 0)
