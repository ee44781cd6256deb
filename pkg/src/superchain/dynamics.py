"""Pure-state evolution under the effective Hamiltonian."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .model import ChainSpec, build_effective_hamiltonian
from .open_solver import eigensystem

log = logging.getLogger(__name__)

RTOL = 1e-10
ATOL = 1e-13


class IntegrationError(RuntimeError):
    pass


class ConsistencyError(RuntimeError):
    """Eigen-expansion and direct integration disagree."""


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    t_grid: np.ndarray
    states: np.ndarray  # (T, d)
    p: np.ndarray
    method: str


def _as_vector(psi0) -> np.ndarray:
    v = np.asarray(getattr(psi0, "amplitudes", psi0), complex)
    if not np.isclose(np.linalg.norm(v), 1.0, rtol=0, atol=1e-10):
        raise ValueError(f"initial state must be normalized, |psi0| = {np.linalg.norm(v)}")
    return v


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, float)
    if np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("t_grid must be nonnegative and ascending")
    return t


def evolve_eigen(spec: ChainSpec, psi0, t_grid) -> np.ndarray:
    """psi(t) = sum_q <l_q|psi0> exp(-i E_q t) |r_q>."""
    es = eigensystem(spec)
    c = es.left.conj().T @ _as_vector(psi0)
    t = _check_grid(t_grid)
    phases = np.exp(-1j * np.outer(t, es.values))
    return (phases * c) @ es.right.T


def evolve_integrate(spec: ChainSpec, psi0, t_grid, rtol: float = RTOL, atol: float = ATOL) -> np.ndarray:
    """Direct adaptive integration of dpsi/dt = -i H_eff psi."""
    H = build_effective_hamiltonian(spec).matrix
    t = _check_grid(t_grid)
    y0 = _as_vector(psi0)
    if t[-1] == 0:
        return np.tile(y0, (len(t), 1))
    sol = solve_ivp(
        lambda _t, y: -1j * (H @ y), (0.0, t[-1]), y0, method="DOP853", t_eval=t, rtol=rtol, atol=atol
    )
    if not sol.success:
        raise IntegrationError(sol.message)
    return sol.y.T


def evolve_state(
    spec: ChainSpec, psi0, t_grid, method: str = "auto", cross_check: bool = False
) -> EvolutionResult:
    """Evolve ``psi0`` under H_eff.

    ``method`` is ``"eigen"``, ``"integrate"`` or ``"auto"``; auto uses the
    biorthogonal expansion unless the spectrum is flagged near an
    exceptional point. With ``cross_check`` both paths run and must agree on
    ||psi(t)||^2 within 1e-7.
    """
    t = _check_grid(t_grid)
    if method == "auto":
        method = "integrate" if eigensystem(spec).near_exceptional else "eigen"
    if method == "eigen":
        states = evolve_eigen(spec, psi0, t)
    elif method == "integrate":
        states = evolve_integrate(spec, psi0, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    p = np.sum(np.abs(states) ** 2, axis=1)
    if cross_check:
        other = evolve_integrate(spec, psi0, t) if method == "eigen" else evolve_eigen(spec, psi0, t)
        dev = np.abs(np.sum(np.abs(other) ** 2, axis=1) - p).max()
        if dev > 1e-7:
            raise ConsistencyError(f"eigen/integrator survival mismatch {dev:.3g}")
    return EvolutionResult(t, states, p, method)


def survival_probability(spec: ChainSpec, psi0, t_grid, method: str = "auto") -> np.ndarray:
    """P(t) = sum_m |<m|psi(t)>|^2 over the intrinsic basis."""
    return evolve_state(spec, psi0, t_grid, method=method).p


def decay_time(t: np.ndarray, p: np.ndarray, level: float = np.exp(-1)) -> Optional[float]:
    """First time P drops to ``level``, by linear interpolation of log P."""
    below = np.nonzero(p <= level)[0]
    if len(below) == 0:
        return None
    k = below[0]
    if k == 0:
        return float(t[0])
    la, lb = np.log(p[k - 1]), np.log(max(p[k], 1e-300))
    frac = (np.log(level) - la) / (lb - la)
    return float(t[k - 1] + frac * (t[k] - t[k - 1]))


def lifetime(
    spec: ChainSpec, psi0, level: float = np.exp(-1), points: int = 4001, t_max: float = 1e7
) -> float:
    """1/e time of the survival probability on an auto-sized grid."""
    horizon = 1.0 / max(abs(spec.nu), 1e-12)
    while horizon <= t_max:
        if survival_probability(spec, psi0, [horizon], method="eigen")[0] < level:
            break
        horizon *= 2
    else:
        raise IntegrationError(f"P(t) stays above {level} up to t={t_max}")
    t = np.linspace(0.0, horizon, points)
    return decay_time(t, survival_probability(spec, psi0, t, method="eigen"), level)
