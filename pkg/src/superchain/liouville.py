"""Dephasing master equation, coherence time and a noise-trajectory oracle.

The averaged density matrix obeys

    dρ/dt = -i (H_eff ρ - ρ H_eff†) - 2 α_φ (ρ - diag ρ)

i.e. every off-diagonal element is damped at rate 2 α_φ on top of the
non-Hermitian evolution. The oracle in :func:`monte_carlo_dephasing` samples
the white-noise site energies directly and averages |ψ><ψ|.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .closed_solver import pair_state
from .model import ChainSpec, build_effective_hamiltonian

log = logging.getLogger(__name__)

MODULUS_SUM = "modulus_sum"
ELEMENT_SUM = "element_sum"


class IntegrationError(RuntimeError):
    pass


class PositivityError(IntegrationError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    alpha_phi: float
    seed: int = 0
    dt: float = 0.01
    n_traj: int = 1000

    def __post_init__(self):
        if self.alpha_phi < 0:
            raise ValueError("alpha_phi must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.n_traj < 1:
            raise ValueError("n_traj must be positive")


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SUPERCHAIN_THREADS", "1")))
    except ValueError:
        return 1


def _heff(spec: ChainSpec, hamiltonian) -> np.ndarray:
    if hamiltonian is None:
        return build_effective_hamiltonian(spec).matrix
    H = np.asarray(hamiltonian, complex)
    if H.shape != (spec.dim, spec.dim):
        raise ValueError(f"hamiltonian must be {spec.dim}x{spec.dim}")
    return H


def master_rhs(rho: np.ndarray, spec: ChainSpec, hamiltonian=None) -> np.ndarray:
    """Time derivative of ρ; ``hamiltonian`` overrides H_eff built from ``spec``."""
    H = _heff(spec, hamiltonian)
    rho = np.asarray(rho, complex)
    out = -1j * (H @ rho - rho @ H.conj().T)
    off = rho - np.diag(np.diag(rho))
    return out - 2 * spec.alpha_phi * off


def _hermitian_rhs(spec: ChainSpec, hamiltonian=None):
    """Fast RHS on the flattened matrix, valid for Hermitian ρ.

    Uses ρ H† = (H ρ)†, which keeps every stage exactly Hermitian.
    """
    H = scipy.sparse.csr_matrix(_heff(spec, hamiltonian))
    d = spec.dim
    a2 = 2 * spec.alpha_phi
    diag = np.arange(d) * (d + 1)

    def f(_t, y):
        rho = y.reshape(d, d)
        A = H @ rho
        out = -1j * (A - A.conj().T)
        if a2:
            out -= a2 * rho
            out.flat[diag] += a2 * y[diag]
        return out.ravel()

    return f


def _hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().swapaxes(-1, -2))


def _as_density(rho0, d: int) -> np.ndarray:
    r = np.asarray(getattr(rho0, "amplitudes", rho0), complex)
    if r.ndim == 1:
        r = np.outer(r, r.conj())
    if r.shape != (d, d):
        raise ValueError(f"density matrix must be {d}x{d}, got {r.shape}")
    if np.abs(r - r.conj().T).max() > 1e-10:
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(r).real
    if tr > 1 + 1e-9 or np.linalg.eigvalsh(r).min() < -1e-8:
        raise ValueError("density matrix must be positive with trace <= 1")
    return _hermitize(r)


@dataclass
class Hygiene:
    """Running checks along one master-equation trajectory."""

    max_hermitian_dev: float = 0.0
    min_eigenvalue: float = np.inf
    max_trace_increase: float = -np.inf
    steps: int = 0
    eig_checks: int = 0

    def ok(self, herm: float = 1e-8, eig: float = -1e-8, trace: float = 1e-9) -> bool:
        return (
            self.max_hermitian_dev < herm
            and self.min_eigenvalue >= eig
            and self.max_trace_increase <= trace
        )


class _Stepper:
    """DOP853 over the flattened ρ, re-hermitized after every accepted step."""

    def __init__(self, spec, rho0, t_bound, rtol, atol, eig_every, hamiltonian=None, abort_eig=-1e-6):
        self.d = spec.dim
        self.solver = DOP853(
            _hermitian_rhs(spec, hamiltonian), 0.0, rho0.ravel().copy(), t_bound, rtol=rtol, atol=atol
        )
        self.hyg = Hygiene(min_eigenvalue=float(np.linalg.eigvalsh(rho0).min()))
        self.trace = float(np.trace(rho0).real)
        self.eig_every = eig_every
        self.abort_eig = abort_eig

    def step(self):
        s = self.solver
        msg = s.step()
        if s.status == "failed":
            raise IntegrationError(f"integrator failed at t={s.t}: {msg}")
        rho = s.y.reshape(self.d, self.d)
        h = self.hyg
        h.max_hermitian_dev = max(h.max_hermitian_dev, float(np.abs(rho - rho.conj().T).max()))
        s.y = _hermitize(rho).ravel()
        tr = float(np.trace(rho).real)
        h.max_trace_increase = max(h.max_trace_increase, tr - self.trace)
        self.trace = tr
        h.steps += 1
        if self.eig_every and (h.steps % self.eig_every == 0 or s.status == "finished"):
            self.check_eig(rho)
        return s.dense_output()

    def check_eig(self, rho):
        h = self.hyg
        m = float(np.linalg.eigvalsh(_hermitize(rho)).min())
        h.min_eigenvalue = min(h.min_eigenvalue, m)
        h.eig_checks += 1
        if m < self.abort_eig:
            raise PositivityError(f"min eigenvalue {m:.3g} at t={self.solver.t}")


@dataclass(frozen=True, eq=False)
class DensityEvolution:
    t_grid: np.ndarray
    rho: np.ndarray  # (T, d, d)
    hygiene: Hygiene

    @property
    def trace(self) -> np.ndarray:
        return np.einsum("tii->t", self.rho).real


def evolve_density(
    spec: ChainSpec,
    rho0,
    t_grid: Sequence[float],
    rtol: float = 1e-9,
    atol: float = 1e-12,
    eig_every: int = 1,
    hamiltonian=None,
) -> DensityEvolution:
    """Integrate the master equation and sample ρ on ``t_grid``."""
    t = np.asarray(t_grid, float)
    if np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("t_grid must be nonnegative and ascending")
    r0 = _as_density(rho0, spec.dim)
    out = np.empty((len(t), spec.dim, spec.dim), complex)
    k = 0
    while k < len(t) and t[k] == 0:
        out[k] = r0
        k += 1
    if k == len(t):
        return DensityEvolution(t, out, Hygiene(min_eigenvalue=float(np.linalg.eigvalsh(r0).min())))
    st = _Stepper(spec, r0, t[-1], rtol, atol, eig_every, hamiltonian)
    while k < len(t):
        dense = st.step()
        while k < len(t) and t[k] <= st.solver.t:
            out[k] = _hermitize(dense(t[k]).reshape(spec.dim, spec.dim))
            k += 1
    for r in out:
        st.check_eig(r)
    return DensityEvolution(t, out, st.hyg)


def coherence_measure(rho: np.ndarray, mode: str = MODULUS_SUM):
    """Aggregate of off-diagonal elements.

    ``modulus_sum`` returns sum_{i!=j} |ρ_ij|; ``element_sum`` returns the
    complex sum_{i!=j} ρ_ij, which is real for Hermitian ρ.
    """
    rho = np.asarray(rho)
    if mode == MODULUS_SUM:
        return float(np.abs(rho).sum() - np.abs(np.diagonal(rho)).sum())
    if mode == ELEMENT_SUM:
        return complex(rho.sum() - np.trace(rho))
    raise ValueError(f"unknown coherence mode {mode!r}")


def _r_real(rho, mode) -> float:
    v = coherence_measure(rho, mode)
    return float(v.real) if isinstance(v, complex) else v


@dataclass(frozen=True)
class CoherenceTime:
    tau: float
    censored: bool
    r0: float
    hygiene: Hygiene


def default_cap(spec: ChainSpec) -> float:
    if spec.alpha_phi > 0:
        return 25.0 / spec.alpha_phi
    return 1e4 / abs(spec.nu)


def coherence_time(
    spec: ChainSpec,
    rho0,
    mode: str = MODULUS_SUM,
    cap: Optional[float] = None,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    eig_every: int = 1,
    hamiltonian=None,
) -> CoherenceTime:
    """First time R(t) falls to R(0)/e.

    The crossing is bracketed on accepted steps and refined on the
    integrator's dense output. If no crossing happens before ``cap`` the
    result is censored with ``tau = cap``.
    """
    r0 = _as_density(rho0, spec.dim)
    R0 = _r_real(r0, mode)
    if R0 == 0:
        raise ValueError("coherence time undefined: R(0) = 0")
    cap = default_cap(spec) if cap is None else cap
    target = R0 / math.e
    d = spec.dim
    st = _Stepper(spec, r0, cap, rtol, atol, eig_every, hamiltonian)

    def g(t, dense):
        return _r_real(dense(t).reshape(d, d), mode) / R0 - 1 / math.e

    while st.solver.status == "running":
        t_old = st.solver.t
        dense = st.step()
        rho = st.solver.y.reshape(d, d)
        if _r_real(rho, mode) / R0 <= 1 / math.e:
            st.check_eig(rho)
            tau = brentq(g, t_old, st.solver.t, args=(dense,), xtol=1e-9 * st.solver.t, rtol=1e-10)
            return CoherenceTime(float(tau), False, R0, st.hyg)
    log.info("no R(0)/e crossing before cap=%g (target %g)", cap, target)
    return CoherenceTime(float(cap), True, R0, st.hyg)


def initial_density(spec: ChainSpec) -> np.ndarray:
    """Upper state of the top band pair at λ = √κ, as a pure density matrix."""
    st = pair_state(spec.replace(lam=math.sqrt(spec.kappa)), 1, "upper")
    return np.outer(st.amplitudes, st.amplitudes.conj())


@dataclass
class ScanRow:
    N: int
    alpha_phi: float
    gamma: float
    tau: float
    censored: bool
    hygiene_ok: bool = True
    error: str = ""
    hygiene: Optional[Hygiene] = None


def _scan_point(args) -> ScanRow:
    spec, mode, cap = args
    try:
        spec = spec.replace(lam=math.sqrt(spec.kappa))
        ct = coherence_time(spec, initial_density(spec), mode=mode, cap=cap)
        return ScanRow(spec.N, spec.alpha_phi, spec.gamma, ct.tau, ct.censored, ct.hygiene.ok(), "", ct.hygiene)
    except Exception as exc:  # recorded per point, scan continues
        log.warning("scan point failed for %s: %s", spec, exc)
        return ScanRow(spec.N, spec.alpha_phi, spec.gamma, float("nan"), False, False, repr(exc))


def coherence_scan(
    spec_base: ChainSpec,
    gamma_grid: Iterable[float],
    n_list: Iterable[int],
    alpha_list: Iterable[float],
    mode: str = MODULUS_SUM,
    cap: Optional[float] = None,
    workers: Optional[int] = None,
) -> List[ScanRow]:
    """τ_coh over the product of chain sizes, dephasing strengths and γ."""
    jobs = [
        (spec_base.replace(N=int(n), alpha_phi=float(a), gamma=float(g)), mode, cap)
        for n in n_list
        for a in alpha_list
        for g in gamma_grid
    ]
    workers = _threads() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_scan_point, jobs))
    return [_scan_point(j) for j in jobs]


# --- Monte-Carlo oracle ----------------------------------------------------

BLOCK = 500


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    t_grid: np.ndarray
    rho: np.ndarray  # (T, d, d) ensemble mean
    stderr: np.ndarray  # (T, d, d) standard error of the complex mean
    n_traj: int


def _checkpoint_steps(t_grid, dt) -> np.ndarray:
    t = np.asarray(t_grid, float)
    k = np.rint(t / dt).astype(int)
    if np.any(np.abs(k * dt - t) > 1e-9 * np.maximum(1.0, t)):
        raise ValueError("checkpoints must be integer multiples of dt")
    if np.any(k < 0) or np.any(np.diff(k) < 0):
        raise ValueError("t_grid must be nonnegative and ascending")
    return k


def _run_block(U, psi0, sigma_half, steps, n, rng):
    """One block of trajectories; returns per-checkpoint sums."""
    d = len(psi0)
    X = np.tile(psi0[:, None], (1, n))
    s1 = np.zeros((len(steps), d, d), complex)
    s2 = np.zeros((len(steps), d, d))

    def kick(sig):
        if sig:
            X[:] *= np.exp(-1j * sig * rng.standard_normal((d, n)))

    def record(j):
        o = X[:, None, :] * X.conj()[None, :, :]
        s1[j] = o.sum(axis=2)
        s2[j] = (o.real**2 + o.imag**2).sum(axis=2)

    want = {int(k): [] for k in steps}
    for j, k in enumerate(steps):
        want[int(k)].append(j)
    for j in want.get(0, []):
        record(j)
    last = int(steps[-1])
    if last == 0:
        return s1, s2
    kick(sigma_half)
    full = math.sqrt(2) * sigma_half
    for k in range(1, last + 1):
        X[:] = U @ X
        if k in want or k == last:
            kick(sigma_half)
            for j in want.get(k, []):
                record(j)
            if k < last:
                kick(sigma_half)
        else:
            kick(full)
    return s1, s2


def monte_carlo_dephasing(
    spec: ChainSpec, psi0, noise: NoiseModel, t_grid, hamiltonian=None
) -> MonteCarloResult:
    """Ensemble average of |ψ><ψ| under white-noise site energies.

    Each step applies exp(-i H_eff dt) between half-step random phase kicks
    exp(-i ξ_j) on every site and qubit level, ξ_j ~ N(0, α_φ dt) per half
    step. A full step therefore damps ensemble coherences by exp(-2 α_φ dt),
    matching the master equation. Trajectories run in fixed blocks, each
    with a generator seeded by (seed, block index), so results do not depend
    on the worker count.
    """
    H = _heff(spec, hamiltonian)
    if np.linalg.norm(H, 2) * noise.dt >= 0.05:
        raise ValueError(f"dt={noise.dt} too large: need ||H_eff|| dt < 0.05")
    v = np.asarray(getattr(psi0, "amplitudes", psi0), complex)
    if not np.isclose(np.linalg.norm(v), 1.0, atol=1e-10):
        raise ValueError("psi0 must be normalized")
    steps = _checkpoint_steps(t_grid, noise.dt)
    U = scipy.linalg.expm(-1j * H * noise.dt)
    sigma_half = math.sqrt(noise.alpha_phi * noise.dt)

    sizes = [BLOCK] * (noise.n_traj // BLOCK)
    if noise.n_traj % BLOCK:
        sizes.append(noise.n_traj % BLOCK)

    def job(b):
        rng = np.random.default_rng([noise.seed, b])
        return _run_block(U, v, sigma_half, steps, sizes[b], rng)

    workers = _threads()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, range(len(sizes))))
    else:
        parts = [job(b) for b in range(len(sizes))]

    n = noise.n_traj
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n
    if n > 1:
        var = np.clip((s2 - n * np.abs(mean) ** 2) / (n - 1), 0.0, None)
        se = np.sqrt(var / n)
    else:
        se = np.full(mean.shape, np.inf)
    return MonteCarloResult(np.asarray(t_grid, float), mean, se, n)


@dataclass(frozen=True, eq=False)
class OracleComparison:
    t_grid: np.ndarray
    z_max: np.ndarray  # per checkpoint, max |MC - master| / SE
    exceed: np.ndarray  # per checkpoint, independent elements beyond the bound
    max_abs_dev: np.ndarray
    n_sigma: float
    mc: MonteCarloResult = field(repr=False)
    master: DensityEvolution = field(repr=False)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.exceed == 0))


def compare_with_master(
    spec: ChainSpec, psi0, noise: NoiseModel, t_grid, n_sigma: float = 3.0
) -> OracleComparison:
    """Elementwise agreement of the noise ensemble with the master equation.

    Only the upper triangle (diagonal included) is compared, since ρ is
    Hermitian in both methods.
    """
    if noise.n_traj < 100:
        raise ValueError("validation runs need n_traj >= 100")
    spec = spec.replace(alpha_phi=noise.alpha_phi)
    mc = monte_carlo_dephasing(spec, psi0, noise, t_grid)
    v = np.asarray(getattr(psi0, "amplitudes", psi0), complex)
    ref = evolve_density(spec, np.outer(v, v.conj()), t_grid, rtol=1e-11, atol=1e-14)
    iu = np.triu_indices(spec.dim)
    dev = np.abs(mc.rho - ref.rho)[:, iu[0], iu[1]]
    se = mc.stderr[:, iu[0], iu[1]]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, dev / se, np.where(dev < 1e-12, 0.0, np.inf))
    return OracleComparison(
        np.asarray(t_grid, float),
        z.max(axis=1),
        (z > n_sigma).sum(axis=1),
        dev.max(axis=1),
        n_sigma,
        mc,
        ref,
    )
