"""Complex spectra of the effective Hamiltonian and their parameter sweeps."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .closed_solver import in_band
from .model import ChainSpec, build_effective_hamiltonian

log = logging.getLogger(__name__)

EP_THRESHOLD = 1e-10


class NoTransitionError(RuntimeError):
    """Width participation ratio has no interior knee on the grid."""


@dataclass(frozen=True, eq=False)
class Resonance:
    """One eigenvalue E - (i/2)Γ of H_eff with its biorthonormal vectors.

    ``right_vec`` has unit 2-norm and ``left_vec`` satisfies
    ``vdot(left_vec, right_vec) == 1``.
    """

    e: float
    gamma_q: float
    right_vec: np.ndarray
    left_vec: np.ndarray
    near_exceptional: bool = False

    @property
    def eigenvalue(self) -> complex:
        return complex(self.e, -0.5 * self.gamma_q)

    @property
    def weights(self) -> Tuple[float, float, float]:
        p = np.abs(self.right_vec) ** 2
        N = (len(p) - 2) // 2
        return float(p[:N].sum()), float(p[N : 2 * N].sum()), float(p[2 * N :].sum())


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """Array form of the biorthogonal decomposition, ascending real part."""

    values: np.ndarray
    right: np.ndarray  # columns, unit norm
    left: np.ndarray  # columns, <left_q|right_q'> = δ
    condition: np.ndarray  # |<l|r>| of the unit-normalised raw vectors

    @property
    def near_exceptional(self) -> bool:
        return bool(np.any(self.condition < EP_THRESHOLD))

    @property
    def widths(self) -> np.ndarray:
        return -2 * self.values.imag


def eigensystem(spec: ChainSpec) -> Eigensystem:
    H = build_effective_hamiltonian(spec).matrix
    vals, vl, vr = scipy.linalg.eig(H, left=True, right=True)
    order = np.lexsort((vals.imag, vals.real))
    vals, vl, vr = vals[order], vl[:, order], vr[:, order]

    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)
    overlap = np.einsum("ij,ij->j", vl.conj(), vr)
    cond = np.abs(overlap)
    with np.errstate(divide="ignore", invalid="ignore"):
        left = vl / overlap.conj()

    # degenerate subspaces need not come out biorthogonal from LAPACK
    if not np.all(np.isfinite(left)) or np.abs(left.conj().T @ vr - np.eye(len(vals))).max() > 1e-8:
        left = np.linalg.inv(vr).conj().T

    if np.any(cond < EP_THRESHOLD):
        log.warning("near-exceptional spectrum for %s (min |<l|r>| = %.3g)", spec, cond.min())

    return Eigensystem(vals, vr, left, cond)


def open_spectrum(spec: ChainSpec) -> List[Resonance]:
    """Resonances of ``H0 - (i/2) W`` sorted by ascending position."""
    es = eigensystem(spec)
    return [
        Resonance(
            e=float(es.values[q].real),
            gamma_q=float(-2 * es.values[q].imag),
            right_vec=es.right[:, q],
            left_vec=es.left[:, q],
            near_exceptional=bool(es.condition[q] < EP_THRESHOLD),
        )
        for q in range(len(es.values))
    ]


# --- labelling by band position --------------------------------------------


def band_order(values: np.ndarray, weights_q: np.ndarray, spec: ChainSpec) -> np.ndarray:
    """Indices of in-band, chain-dominated levels by descending real part."""
    idx = [
        q
        for q in range(len(values))
        if in_band(values[q].real, spec) and weights_q[q] <= 0.5
    ]
    return np.array(sorted(idx, key=lambda q: -values[q].real), dtype=int)


def pair_labels(values: np.ndarray, right: np.ndarray, spec: ChainSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Pair number (1 = band top, 0 = none) and member (+1 upper, -1 lower)."""
    N = spec.N
    wq = np.sum(np.abs(right[2 * N :]) ** 2, axis=0) / np.sum(np.abs(right) ** 2, axis=0)
    order = band_order(values, wq, spec)
    pair = np.zeros(len(values), dtype=int)
    member = np.zeros(len(values), dtype=int)
    for rank, q in enumerate(order[: 2 * (len(order) // 2)]):
        pair[q] = rank // 2 + 1
        member[q] = 1 if rank % 2 == 0 else -1
    return pair, member


def pair_resonance(spec: ChainSpec, pair: int, member: str = "upper") -> Resonance:
    """Open-system resonance for one member of a labelled pair."""
    res = open_spectrum(spec)
    values = np.array([r.eigenvalue for r in res])
    right = np.stack([r.right_vec for r in res], axis=1)
    p, m = pair_labels(values, right, spec)
    want = 1 if member == "upper" else -1
    hit = np.nonzero((p == pair) & (m == want))[0]
    if len(hit) != 1:
        raise IndexError(f"no {member} resonance in pair {pair}")
    return res[hit[0]]


# --- branch tracking -------------------------------------------------------


@dataclass
class ResonanceTrajectory:
    """Eigenvalues matched into continuous branches over a parameter grid.

    ``branches[k, b]`` is the eigenvalue of branch ``b`` at grid point ``k``.
    """

    gamma_grid: np.ndarray
    branches: np.ndarray
    matching_cost: float
    ambiguous: List[int] = field(default_factory=list)
    refinements: int = 0
    spec: Optional[ChainSpec] = None

    @property
    def energies(self) -> np.ndarray:
        return self.branches.real

    @property
    def widths(self) -> np.ndarray:
        return -2 * self.branches.imag


def _assign(pred: np.ndarray, new: np.ndarray) -> Tuple[np.ndarray, float, bool]:
    """Permutation of ``new`` continuing ``pred``; greedy, Hungarian on collisions."""
    dist = np.abs(pred[:, None] - new[None, :])
    greedy = dist.argmin(axis=1)
    if len(np.unique(greedy)) == len(greedy):
        perm = greedy
    else:
        _, perm = linear_sum_assignment(dist)
    cost = float(dist[np.arange(len(pred)), perm].sum())
    # a near tie between the two best candidates of any row makes the match ambiguous
    srt = np.sort(dist, axis=1)
    ambiguous = bool(len(pred) > 1 and np.any(srt[:, 1] - srt[:, 0] < 1e-12))
    return perm, cost, ambiguous


def _step_ok(prev: np.ndarray, pred: np.ndarray, matched: np.ndarray, floor: float) -> bool:
    if len(prev) < 2:
        return True
    gaps = np.abs(prev[:, None] - prev[None, :])
    np.fill_diagonal(gaps, np.inf)
    gap = gaps.min(axis=1)
    miss = np.abs(matched - pred)
    # clusters tighter than the floor cannot be split by refining; left to the tie flag
    return bool(np.all((miss < 0.5 * gap) | (gap < floor)))


def track_branches(
    grid: Sequence[float],
    eigvals: Callable[[float], np.ndarray],
    max_depth: int = 6,
    gap_floor: float = 1e-6,
) -> Tuple[np.ndarray, float, List[int], int]:
    """Continue eigenvalues along ``grid``.

    Each step is matched against a linear extrapolation of the previous two
    points. A step whose match misses the prediction by more than half the
    local level gap is bisected, up to ``max_depth`` times.
    """
    grid = np.asarray(grid, float)
    if len(grid) > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    first = np.asarray(eigvals(grid[0]))
    first = first[np.lexsort((first.imag, first.real))]
    out = np.empty((len(grid), len(first)), complex)
    out[0] = first
    scale = 1.0 + np.abs(first).max()
    total = 0.0
    ambiguous: List[int] = []
    refinements = 0

    def advance(back, p0, z0, p1, z1_raw, depth):
        nonlocal refinements
        if back is None:
            pred = z0
        else:
            pb, zb = back
            pred = z0 + (z0 - zb) * ((p1 - p0) / (p0 - pb))
        perm, cost, amb = _assign(pred, z1_raw)
        z1 = z1_raw[perm]
        ok = _step_ok(z0, pred, z1, gap_floor * scale)
        if ok or depth >= max_depth:
            return z1, cost, amb or not ok
        refinements += 1
        pm = 0.5 * (p0 + p1)
        zm, c1, a1 = advance(back, p0, z0, pm, np.asarray(eigvals(pm)), depth + 1)
        z1, c2, a2 = advance((p0, z0), pm, zm, p1, z1_raw, depth + 1)
        return z1, c1 + c2, a1 or a2

    for k in range(1, len(grid)):
        back = (grid[k - 2], out[k - 2]) if k >= 2 else None
        z, cost, amb = advance(back, grid[k - 1], out[k - 1], grid[k], np.asarray(eigvals(grid[k])), 0)
        out[k] = z
        total += cost
        if amb:
            ambiguous.append(k)
    return out, total, ambiguous, refinements


def sweep_gamma(spec: ChainSpec, gamma_grid: Sequence[float]) -> ResonanceTrajectory:
    H0 = build_effective_hamiltonian(spec.replace(gamma=0.0)).h0
    edges = np.zeros(spec.dim)
    edges[0] = edges[2 * spec.N - 1] = 1.0

    def eigvals(g):
        return np.linalg.eigvals(H0 - 0.5j * g * np.diag(edges))

    branches, cost, amb, nref = track_branches(gamma_grid, eigvals)
    if amb:
        log.info("%d ambiguous matching steps in gamma sweep", len(amb))
    return ResonanceTrajectory(np.asarray(gamma_grid, float), branches, cost, amb, nref, spec)


# --- superradiance ---------------------------------------------------------


@dataclass(frozen=True)
class SuperradianceResult:
    gamma_crit: float
    sr_indices: Tuple[int, int]
    participation_ratio: np.ndarray
    top2_share: np.ndarray
    level_spacing: float


def width_metrics(widths: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Participation ratio and top-two share of the widths, per row."""
    G = np.clip(np.atleast_2d(widths), 0.0, None)
    total = G.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        pr = total**2 / np.sum(G**2, axis=1)
        s2 = np.sort(G, axis=1)[:, -2:].sum(axis=1) / total
    return pr, s2


def mean_level_spacing(spec: ChainSpec) -> float:
    """Band width over the number of closed levels inside it."""
    H0 = build_effective_hamiltonian(spec.replace(gamma=0.0)).h0
    E = np.linalg.eigvalsh(H0)
    n = sum(in_band(e, spec) for e in E)
    return 4 * abs(spec.nu) / max(n, 1)


def detect_superradiance(traj: ResonanceTrajectory) -> SuperradianceResult:
    """Locate the steepest drop of the width participation ratio."""
    g = traj.gamma_grid
    if len(g) < 3:
        raise NoTransitionError("need at least three grid points")
    pr, s2 = width_metrics(traj.widths)
    slope = np.gradient(pr, g)
    k = int(np.argmax(np.abs(slope)))
    if k in (0, len(g) - 1) or slope[k] >= 0:
        raise NoTransitionError(
            f"no transition in range [{g[0]}, {g[-1]}]: steepest PR change at grid edge"
        )
    top = np.argsort(traj.widths[-1])[-2:][::-1]
    D = mean_level_spacing(traj.spec) if traj.spec is not None else float("nan")
    return SuperradianceResult(float(g[k]), (int(top[0]), int(top[1])), pr, s2, D)


# --- open band structure ---------------------------------------------------


@dataclass
class OpenBandStructure:
    lambda_grid: np.ndarray
    energies: np.ndarray  # (L, d) real parts, columns are matched branches
    widths: np.ndarray
    pair: np.ndarray  # (L, d) position label, 0 = not a band pair
    member: np.ndarray  # +1 upper, -1 lower
    ambiguous: List[int]

    def pair_energies(self, pair: int) -> np.ndarray:
        """(L, 2) real energies of the upper and lower member of a pair."""
        out = np.full((len(self.lambda_grid), 2), np.nan)
        for i in range(len(self.lambda_grid)):
            for j, m in enumerate((1, -1)):
                hit = np.nonzero((self.pair[i] == pair) & (self.member[i] == m))[0]
                if len(hit):
                    out[i, j] = self.energies[i, hit[0]]
        return out

    def pair_variation(self, pair: int) -> float:
        """Largest max-min spread of a member's real energy over the grid."""
        return float(np.nanmax(np.ptp(self.pair_energies(pair), axis=0)))


def band_structure_vs_lambda(
    spec: ChainSpec, lambda_grid: Sequence[float], gamma: Optional[float] = None
) -> OpenBandStructure:
    if gamma is not None:
        spec = spec.replace(gamma=float(gamma))
    lams = np.asarray(lambda_grid, float)
    cache = {}

    def solve(lam):
        if lam not in cache:
            cache[lam] = eigensystem(spec.replace(lam=float(lam)))
        return cache[lam]

    branches, _, amb, _ = track_branches(lams, lambda l: solve(l).values)
    pair = np.zeros(branches.shape, int)
    member = np.zeros(branches.shape, int)
    for i, lam in enumerate(lams):
        es = solve(lam)
        p, m = pair_labels(es.values, es.right, spec.replace(lam=float(lam)))
        # map eigensystem order onto branch order
        col = np.abs(branches[i][:, None] - es.values[None, :]).argmin(axis=1)
        pair[i], member[i] = p[col], m[col]
    return OpenBandStructure(lams, branches.real, -2 * branches.imag, pair, member, amb)


# --- superradiant profiles -------------------------------------------------


@dataclass
class SuperradiantProfiles:
    gamma_grid: np.ndarray
    chain: np.ndarray  # (G, 2, 2N) |a_n|^2 of the upper and lower broad state
    qubits: np.ndarray  # (G, 2, 2) |b_L|^2, |b_R|^2
    eigenvalues: np.ndarray  # (G, 2)

    def edge_weight(self) -> np.ndarray:
        """Share of chain weight on sites -N and N, shape (G, 2)."""
        c = self.chain
        return (c[..., 0] + c[..., -1]) / c.sum(axis=-1)

    def participation(self) -> np.ndarray:
        c = self.chain / self.chain.sum(axis=-1, keepdims=True)
        return 1.0 / np.sum(c**2, axis=-1)


def superradiant_profiles(spec: ChainSpec, gamma_grid: Sequence[float]) -> SuperradiantProfiles:
    """Squared components of the two broadest resonances at each γ."""
    gs = np.asarray(gamma_grid, float)
    N = spec.N
    chain = np.empty((len(gs), 2, 2 * N))
    qub = np.empty((len(gs), 2, 2))
    vals = np.empty((len(gs), 2), complex)
    for i, g in enumerate(gs):
        es = eigensystem(spec.replace(gamma=float(g)))
        top = np.argsort(es.widths)[-2:]
        top = top[np.argsort(-es.values[top].real)]  # upper first
        p = np.abs(es.right[:, top].T) ** 2
        chain[i], qub[i], vals[i] = p[:, : 2 * N], p[:, 2 * N :], es.values[top]
    return SuperradiantProfiles(gs, chain, qub, vals)
