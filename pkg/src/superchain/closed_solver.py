"""Closed-system spectrum, decoupled-limit formulas and symmetric-point roots."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .model import (
    ChainSpec,
    SpecError,
    build_closed_hamiltonian,
    chain_sites,
    flat_index,
    reflection_permutation,
)

log = logging.getLogger(__name__)

SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"


class EigensolverError(RuntimeError):
    pass


class NotEvaluable(ValueError):
    """Residual requested at a pole or outside its domain."""


class RootCountError(RuntimeError):
    pass


class ClassificationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Amplitudes over (chain sites, e_L, e_R) in flat order."""

    amplitudes: np.ndarray
    energy: float = float("nan")

    @property
    def N(self) -> int:
        return (len(self.amplitudes) - 2) // 2

    @property
    def chain(self) -> np.ndarray:
        return self.amplitudes[: 2 * self.N]

    @property
    def b_L(self) -> complex:
        return self.amplitudes[2 * self.N]

    @property
    def b_R(self) -> complex:
        return self.amplitudes[2 * self.N + 1]

    def a(self, n: int) -> complex:
        return self.amplitudes[flat_index(self.N, n)]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class PairDescriptor:
    pair_index: int
    e_upper: float
    e_lower: float
    rabi: float
    weights_upper: Tuple[float, float, float]
    weights_lower: Tuple[float, float, float]

    @property
    def label(self) -> str:
        return roman(self.pair_index)


def roman(n: int) -> str:
    vals = [(100, "C"), (90, "XC"), (50, "L"), (40, "XL"), (10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I")]
    out = []
    for v, s in vals:
        while n >= v:
            out.append(s)
            n -= v
    return "".join(out)


def _fix_phase(v: np.ndarray) -> np.ndarray:
    # deterministic gauge: largest component real positive
    k = np.argmax(np.abs(v) - 1e-12 * np.arange(len(v)))
    return v * (abs(v[k]) / v[k])


def closed_spectrum(spec: ChainSpec) -> List[QuantumState]:
    """Eigenstates of H0 sorted by ascending energy."""
    H = build_closed_hamiltonian(spec)
    try:
        E, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigh failed for {spec}") from exc
    scale = max(np.linalg.norm(H, 2), 1.0)
    resid = np.linalg.norm(H @ V - V * E, axis=0)
    if resid.max() > 1e-10 * scale:
        raise EigensolverError(f"residual {resid.max():.3g} too large for {spec}")
    return [QuantumState(_fix_phase(V[:, i]), float(E[i])) for i in range(len(E))]


def localization_weights(state: QuantumState) -> Tuple[float, float, float]:
    """Probability on the left arm, the right arm and the two qubit levels."""
    p = np.abs(state.amplitudes) ** 2
    N = state.N
    return float(p[:N].sum()), float(p[N : 2 * N].sum()), float(p[2 * N :].sum())


def in_band(energy: float, spec: ChainSpec) -> bool:
    return abs(energy - spec.epsilon0) < 2 * abs(spec.nu)


# --- decoupled limit -------------------------------------------------------


@dataclass(frozen=True)
class ArmBand:
    k: np.ndarray
    energies: np.ndarray
    amplitudes: np.ndarray  # (len(k), N) over the arm's own sites, n ascending
    sites: np.ndarray


@dataclass(frozen=True)
class DecoupledSpectrum:
    spec: ChainSpec
    left_qubit_level: float
    left_band: ArmBand
    right_band: ArmBand

    def central_pair_energies(self, lam: float) -> Tuple[float, float]:
        s = self.spec
        mid = 0.5 * (s.epsilon0 + s.delta)
        return mid - s.kappa / lam, mid + s.kappa / lam

    def energies(self, lam: float) -> np.ndarray:
        """All ``2N + 2`` decoupled energies at coupling ``lam``, ascending."""
        lo, hi = self.central_pair_energies(lam)
        return np.sort(
            np.concatenate(
                [self.left_band.energies, self.right_band.energies, [self.left_qubit_level, lo, hi]]
            )
        )

    def states(self, lam: float) -> List[QuantumState]:
        s = self.spec
        N = s.N
        d = s.dim
        out = []
        v = np.zeros(d, complex)
        v[2 * N] = 1.0
        out.append(QuantumState(v, self.left_qubit_level))
        for sign, E in zip((-1.0, 1.0), self.central_pair_energies(lam)):
            v = np.zeros(d, complex)
            v[flat_index(N, 1)] = 1 / np.sqrt(2)
            v[2 * N + 1] = sign / np.sqrt(2)
            out.append(QuantumState(v, E))
        for band in (self.left_band, self.right_band):
            for E, amp in zip(band.energies, band.amplitudes):
                v = np.zeros(d, complex)
                v[[flat_index(N, n) for n in band.sites]] = amp
                out.append(QuantumState(v, float(E)))
        return sorted(out, key=lambda st: st.energy)


def decoupled_limit_spectrum(spec: ChainSpec) -> DecoupledSpectrum:
    """Closed-form spectrum for a vanishing left coupling.

    Site 1 binds to the right qubit and drops out of the chain, leaving a
    left arm of N sites (walls at -N-1 and at site 1) and a right arm of
    N-1 sites, 2..N.
    """
    delta = spec.delta
    N, eps, nu = spec.N, spec.epsilon0, spec.nu

    kL = 2 * np.arange(1, N + 1)
    phiL = np.pi * kL / (2 * N + 2)
    nL = np.arange(-N, 0)
    ampL = (1j ** kL)[:, None] * np.sqrt(2 / (N + 1)) * np.sin(np.outer(phiL, nL))

    kR = 2 * np.arange(1, N)
    phiR = np.pi * kR / (2 * N)
    nR = np.arange(1, N + 1)
    # shifted by one site so the amplitude vanishes on the bound site 1
    ampR = (1j ** kR)[:, None] * np.sqrt(2 / N) * np.sin(np.outer(phiR, nR - 1))

    return DecoupledSpectrum(
        spec=spec,
        left_qubit_level=float(delta),
        left_band=ArmBand(kL, eps + 2 * nu * np.cos(phiL), ampL, nL),
        right_band=ArmBand(kR, eps + 2 * nu * np.cos(phiR), ampR, nR),
    )


# --- symmetric point lambda^2 = kappa --------------------------------------


def _check_symmetric_point(spec: ChainSpec) -> float:
    delta = spec.delta
    if not np.isclose(spec.lam**2, spec.kappa, rtol=1e-12, atol=0):
        raise SpecError(f"requires lam**2 == kappa, got lam={spec.lam}, kappa={spec.kappa}")
    return delta


def _sign(parity: str) -> float:
    if parity == SYMMETRIC:
        return 1.0
    if parity == ANTISYMMETRIC:
        return -1.0
    raise ValueError(f"unknown parity {parity!r}")


def symmetric_point_residual(E: float, spec: ChainSpec, parity: str) -> float:
    """sin((N+1)θ)/sin(Nθ) - (±1 + κ/(ν(E-δ))) with E = ε0 + 2ν cos θ."""
    delta = _check_symmetric_point(spec)
    N, nu = spec.N, spec.nu
    x = (E - spec.epsilon0) / (2 * nu)
    if not -1 < x < 1:
        raise NotEvaluable(f"E={E} is outside the band")
    if E == delta:
        raise NotEvaluable("E = delta is a pole of the residual")
    theta = np.arccos(x)
    den = np.sin(N * theta)
    if abs(den) < 1e-14:
        raise NotEvaluable(f"sin(N theta) vanishes at E={E}")
    return float(np.sin((N + 1) * theta) / den - (_sign(parity) + spec.kappa / (nu * (E - delta))))


def _cleared_residual(E, spec: ChainSpec, sgn: float):
    # residual times sin(Nθ)(E-δ)/sinθ: a degree N+1 polynomial in E
    N, nu = spec.N, spec.nu
    x = (np.asarray(E, float) - spec.epsilon0) / (2 * nu)
    u_prev, u = np.ones_like(x), 2 * x  # U_0, U_1
    for _ in range(N - 1):
        u_prev, u = u, 2 * x * u - u_prev
    # now u = U_N, u_prev = U_{N-1}
    dE = np.asarray(E, float) - spec.delta
    return dE * u - (sgn * dE + spec.kappa / nu) * u_prev


@dataclass(frozen=True)
class SymmetricPointRoots:
    roots: List[Tuple[float, str]]
    pole_cells: List[Tuple[float, float]]
    grid_points: int


def solve_symmetric_point_energies(
    spec: ChainSpec, grid_points: int = 4096, max_refinements: int = 3, expected: Optional[int] = None
) -> SymmetricPointRoots:
    """All in-band roots of the symmetric-point energy equation.

    Sign changes are located on a uniform θ grid and polished by bisection
    (Brent) to |ΔE| < 1e-12. The root count is checked against the number
    of in-band eigenvalues of H0; a mismatch triggers ×4 refinement.
    """
    _check_symmetric_point(spec)
    if expected is None:
        expected = sum(in_band(st.energy, spec) for st in closed_spectrum(spec))
    N, nu, eps = spec.N, spec.nu, spec.epsilon0

    n = grid_points
    for _ in range(max_refinements + 1):
        theta = np.linspace(0, np.pi, n + 1)[1:-1]
        E = eps + 2 * nu * np.cos(theta)
        poles = np.sign(np.sin(N * theta))
        pole_cells = [
            (float(E[i]), float(E[i + 1])) for i in np.nonzero(poles[:-1] != poles[1:])[0]
        ]
        roots = []
        for parity in (SYMMETRIC, ANTISYMMETRIC):
            sgn = _sign(parity)
            f = _cleared_residual(E, spec, sgn)
            for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]:
                a, b = sorted((E[i], E[i + 1]))
                r = brentq(_cleared_residual, a, b, args=(spec, sgn), xtol=1e-13, rtol=4 * np.finfo(float).eps)
                roots.append((float(r), parity))
            roots.extend((float(e), parity) for e in E[f == 0])
        roots.sort()
        if len(roots) == expected:
            return SymmetricPointRoots(roots, pole_cells, n)
        log.info("root count %d != %d at %d grid points, refining", len(roots), expected, n)
        n *= 4
    raise RootCountError(f"found {len(roots)} in-band roots, eigensolve has {expected} ({spec})")


# --- pairs -----------------------------------------------------------------


def reflection_parity(state: QuantumState) -> float:
    """<v|P v> for the left-right mirror; +1 symmetric, -1 antisymmetric."""
    v = state.amplitudes
    return float(np.real(np.vdot(v, v[reflection_permutation(state.N)])))


def band_states(spectrum: List[QuantumState], spec: ChainSpec) -> List[QuantumState]:
    """In-band, chain-dominated states by descending energy."""
    chosen = [
        st for st in spectrum if in_band(st.energy, spec) and localization_weights(st)[2] <= 0.5
    ]
    chosen.sort(key=lambda st: (-st.energy, -reflection_parity(st)))
    # exact degeneracies: symmetric member first
    for i in range(len(chosen) - 1):
        a, b = chosen[i], chosen[i + 1]
        if abs(a.energy - b.energy) < 1e-12 and reflection_parity(b) > reflection_parity(a):
            chosen[i], chosen[i + 1] = b, a
    return chosen


def classify_pairs(
    spectrum: List[QuantumState], spec: ChainSpec, strict: bool = False
) -> List[PairDescriptor]:
    """Group band states into consecutive pairs counted from the band top.

    The arms hold N and N-1 levels, so the band usually has an odd number of
    states; the lowest one is then left unpaired (logged). ``strict=True``
    turns an odd count into :class:`ClassificationError`.
    """
    states = band_states(spectrum, spec)
    if len(states) % 2:
        msg = (
            f"{len(states)} in-band states; lowest state E={states[-1].energy:.6g} left unpaired"
        )
        if strict:
            raise ClassificationError(msg)
        log.debug(msg)
    pairs = []
    for p in range(len(states) // 2):
        up, lo = states[2 * p], states[2 * p + 1]
        pairs.append(
            PairDescriptor(
                pair_index=p + 1,
                e_upper=up.energy,
                e_lower=lo.energy,
                rabi=up.energy - lo.energy,
                weights_upper=localization_weights(up),
                weights_lower=localization_weights(lo),
            )
        )
    return pairs


def pair_state(spec: ChainSpec, pair: int, member: str = "upper") -> QuantumState:
    """Closed eigenstate for one member of a labelled pair (1 = band top)."""
    states = band_states(closed_spectrum(spec), spec)
    idx = 2 * (pair - 1) + (0 if member == "upper" else 1)
    if member not in ("upper", "lower") or not 0 <= idx < len(states):
        raise IndexError(f"no {member} state in pair {pair}")
    return states[idx]


def band_structure(spec: ChainSpec, lambda_grid) -> dict:
    """Closed energies and localization weights over a λ grid."""
    lams = np.asarray(lambda_grid, float)
    d = spec.dim
    E = np.empty((len(lams), d))
    W = np.empty((len(lams), d, 3))
    for i, lam in enumerate(lams):
        st = closed_spectrum(spec.replace(lam=float(lam)))
        E[i] = [s.energy for s in st]
        W[i] = [localization_weights(s) for s in st]
    return {"lambda": lams, "energies": E, "weights": W}


def chain_profile(state: QuantumState) -> Tuple[np.ndarray, np.ndarray]:
    """(site numbers, |a_n|^2) over the chain only."""
    return chain_sites(state.N), np.abs(state.chain) ** 2

