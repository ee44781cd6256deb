"""Parameter space, site indexing and Hamiltonian assembly.

The intrinsic space of the wire has dimension ``2N + 2``: chain sites
``-N..-1`` and ``1..N`` followed by the excited levels of the left and right
central qubits. Flat indices follow a fixed convention::

    -N .. -1  ->  0 .. N-1
     1 ..  N  ->  N .. 2N-1
    e_L       ->  2N
    e_R       ->  2N+1

Sites ``-1`` and ``1`` are nearest neighbours: the chain bond runs straight
across the qubit pair.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Union

import numpy as np

EXCITED_LEFT = "eL"
EXCITED_RIGHT = "eR"

SiteLabel = Union[int, str]


class SpecError(ValueError):
    """Invalid or unsupported parameter set."""


@dataclass(frozen=True)
class ChainSpec:
    """Full parameter set of one wire instance.

    ``kappa`` is the asynchronization parameter: the right qubit couples to
    site 1 with ``kappa / lam``. ``lam`` stands for the left coupling λ.
    """

    N: int
    epsilon0: float = 0.0
    nu: float = 1.0
    delta_L: float = 0.0
    delta_R: float = 0.0
    lam: float = 1.0
    kappa: float = 1.0
    gamma: float = 0.0
    alpha_phi: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise SpecError(f"N must be an integer >= 2, got {self.N!r}")
        if self.nu == 0:
            raise SpecError("nu must be nonzero")
        if not self.kappa > 0:
            raise SpecError(f"kappa must be > 0, got {self.kappa!r}")
        if self.lam < 0:
            raise SpecError(f"lam must be >= 0, got {self.lam!r}")
        if self.gamma < 0:
            raise SpecError(f"gamma must be >= 0, got {self.gamma!r}")
        if self.alpha_phi < 0:
            raise SpecError(f"alpha_phi must be >= 0, got {self.alpha_phi!r}")
        for name in ("epsilon0", "nu", "delta_L", "delta_R", "lam", "kappa", "gamma", "alpha_phi"):
            if not np.isfinite(getattr(self, name)):
                raise SpecError(f"{name} must be finite")

    @classmethod
    def symmetric(cls, N: int, delta: float, **kw) -> "ChainSpec":
        """Spec with ``delta_L = delta_R = delta``."""
        return cls(N=N, delta_L=delta, delta_R=delta, **kw)

    @property
    def dim(self) -> int:
        return 2 * self.N + 2

    @property
    def right_coupling(self) -> float:
        if self.lam == 0:
            raise SpecError("lam = 0 gives a divergent right coupling kappa/lam")
        return self.kappa / self.lam

    @property
    def degenerate_qubits(self) -> bool:
        return self.delta_L == self.delta_R

    @property
    def delta(self) -> float:
        """Common qubit energy; only defined when ``delta_L == delta_R``."""
        if not self.degenerate_qubits:
            raise SpecError(
                f"requires delta_L == delta_R, got {self.delta_L} and {self.delta_R}"
            )
        return self.delta_L

    def replace(self, **changes) -> "ChainSpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def flat_index(N: int, label: SiteLabel) -> int:
    """Map a site label (nonzero int, ``"eL"`` or ``"eR"``) to its flat index."""
    if label == EXCITED_LEFT:
        return 2 * N
    if label == EXCITED_RIGHT:
        return 2 * N + 1
    n = int(label)
    if n == 0 or abs(n) > N:
        raise IndexError(f"no chain site {label!r} for N={N}")
    return n + N if n < 0 else n + N - 1


def site_label(N: int, flat: int) -> SiteLabel:
    """Inverse of :func:`flat_index`."""
    if not 0 <= flat < 2 * N + 2:
        raise IndexError(f"flat index {flat} out of range for N={N}")
    if flat == 2 * N:
        return EXCITED_LEFT
    if flat == 2 * N + 1:
        return EXCITED_RIGHT
    return flat - N if flat < N else flat - N + 1


def chain_sites(N: int) -> np.ndarray:
    """Chain site numbers in flat order, ``[-N, ..., -1, 1, ..., N]``."""
    return np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)])


def reflection_permutation(N: int) -> np.ndarray:
    """Flat-index permutation for the mirror ``n -> -n``, ``eL <-> eR``."""
    perm = np.empty(2 * N + 2, dtype=int)
    perm[: 2 * N] = np.arange(2 * N)[::-1]
    perm[2 * N] = 2 * N + 1
    perm[2 * N + 1] = 2 * N
    return perm


def build_closed_hamiltonian(spec: ChainSpec) -> np.ndarray:
    """Dense Hermitian H0 of the closed wire plus qubit pair."""
    N = spec.N
    d = spec.dim
    H = np.zeros((d, d), dtype=complex)
    H[np.arange(2 * N), np.arange(2 * N)] = spec.epsilon0
    H[2 * N, 2 * N] = spec.delta_L
    H[2 * N + 1, 2 * N + 1] = spec.delta_R

    # flat order is already spatial order along the chain, -1 and 1 adjacent
    i = np.arange(2 * N - 1)
    H[i, i + 1] = spec.nu
    H[i + 1, i] = spec.nu

    left = flat_index(N, -1)
    right = flat_index(N, 1)
    H[left, 2 * N] = H[2 * N, left] = spec.lam
    if spec.lam == 0:
        raise SpecError("matrix assembly requires lam > 0")
    H[right, 2 * N + 1] = H[2 * N + 1, right] = spec.right_coupling
    return H


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """Hermitian core plus diagonal width operator, ``H0 - (i/2) W``."""

    h0: np.ndarray
    w_diag: np.ndarray

    def __post_init__(self):
        self.h0.setflags(write=False)
        self.w_diag.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.h0 - 0.5j * np.diag(self.w_diag)


def width_diagonal(spec: ChainSpec) -> np.ndarray:
    w = np.zeros(spec.dim)
    w[flat_index(spec.N, -spec.N)] = spec.gamma
    w[flat_index(spec.N, spec.N)] = spec.gamma
    return w


def build_effective_hamiltonian(spec: ChainSpec) -> EffectiveHamiltonian:
    return EffectiveHamiltonian(build_closed_hamiltonian(spec), width_diagonal(spec))
