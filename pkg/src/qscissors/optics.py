"""Physical building blocks: coherent light, the down-conversion pair source,
lossless beam splitters and binary (click / no-click) photodetectors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

from .fock import DensityMatrix, FockVector, ModeLayout

COHERENT_TAIL_TOL = 1e-10
DEFAULT_GAMMA_SQ = 4e-4
DEFAULT_PAIR_CUTOFF = 2


@dataclass(frozen=True)
class BeamSplitterParams:
    """Mixing angle and transmission/reflection phases, in radians.

    The defaults describe a 50:50 splitter with reflection phase pi/2.
    """

    theta: float = math.pi / 4
    psi_t: float = 0.0
    psi_r: float = math.pi / 2


@dataclass(frozen=True)
class DetectorModel:
    eta: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0 or math.isnan(self.eta):
            raise ValueError(f"detector efficiency eta={self.eta!r} must lie in [0, 1]")


@dataclass(frozen=True)
class PdcParams:
    """Phase-averaged pair source: ``gamma_sq`` is the pair probability per pulse."""

    gamma_sq: float = DEFAULT_GAMMA_SQ
    pair_cutoff: int = DEFAULT_PAIR_CUTOFF

    def __post_init__(self):
        if not 0.0 <= self.gamma_sq < 1.0:
            raise ValueError(f"gamma_sq={self.gamma_sq!r} must lie in [0, 1)")
        if self.pair_cutoff < 1:
            raise ValueError(f"pair_cutoff={self.pair_cutoff!r} must be at least 1")

    def branch_weight(self, n: int) -> float:
        return (1.0 - self.gamma_sq) * self.gamma_sq**n


def coherent_tail(alpha_sq: float, cutoff: int) -> float:
    """Poisson weight of photon numbers above ``cutoff``."""
    if alpha_sq == 0:
        return 0.0
    return float(poisson.sf(cutoff, alpha_sq))


def coherent_cutoff(alpha_sq: float, tol: float = COHERENT_TAIL_TOL) -> int:
    """Smallest cutoff whose Poisson tail is at most ``tol``."""
    if alpha_sq == 0:
        return 0
    n = int(poisson.isf(tol, alpha_sq))
    while n > 0 and coherent_tail(alpha_sq, n - 1) <= tol:
        n -= 1
    while coherent_tail(alpha_sq, n) > tol:
        n += 1
    return n


def coherent_vector(alpha: complex, cutoff: int, label: str = "b3",
                    tol: float = COHERENT_TAIL_TOL) -> FockVector:
    """Truncated coherent state; refuses cutoffs that drop more than ``tol``."""
    alpha = complex(alpha)
    alpha_sq = abs(alpha) ** 2
    tail = coherent_tail(alpha_sq, cutoff)
    if tail > tol:
        need = coherent_cutoff(alpha_sq, tol)
        raise ValueError(
            f"cutoff {cutoff} leaves Poisson tail {tail:.3g} > {tol:g} for |alpha|^2={alpha_sq:g}; "
            f"need cutoff >= {need}")
    n = np.arange(cutoff + 1)
    # amplitudes in log space so large n does not overflow factorials
    if alpha == 0:
        amps = (n == 0).astype(complex)
    else:
        log_mag = -alpha_sq / 2 + n * math.log(abs(alpha)) - 0.5 * np.array(
            [math.lgamma(k + 1) for k in n])
        amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    return FockVector(ModeLayout.of((label, cutoff)), amps)


def pdc_density(p: PdcParams, labels: tuple[str, str] = ("a1", "c1")) -> DensityMatrix:
    """Signal/idler pair mixture with weights (1 - g^2) g^(2n) on |n, n>.

    The truncation is deliberately not renormalized: the trace is
    ``1 - gamma_sq ** (pair_cutoff + 1)``.
    """
    c = p.pair_cutoff
    layout = ModeLayout.of((labels[0], c), (labels[1], c))
    elems = np.zeros((layout.dim, layout.dim), dtype=complex)
    for n in range(c + 1):
        i = layout.index((n, n))
        elems[i, i] = p.branch_weight(n)
    return DensityMatrix(layout, elems)


def _ladder(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1)


def beam_splitter_generators(cutoff1: int, cutoff2: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``(L2, L3)`` on the joint two-mode space, built from truncated ladders."""
    a1 = np.kron(_ladder(cutoff1), np.eye(cutoff2 + 1))
    a2 = np.kron(np.eye(cutoff1 + 1), _ladder(cutoff2))
    l2 = (a1.T @ a2 - a2.T @ a1) / 2j
    l3 = (a1.T @ a1 - a2.T @ a2) / 2
    return l2.astype(complex), l3.astype(complex)


def number_blocks(cutoff1: int, cutoff2: int) -> list[np.ndarray]:
    """Joint-basis indices of each total-photon-number block, ordered by n1 descending."""
    blocks = []
    for total in range(cutoff1 + cutoff2 + 1):
        n1 = np.arange(min(total, cutoff1), max(0, total - cutoff2) - 1, -1)
        blocks.append(n1 * (cutoff2 + 1) + (total - n1))
    return blocks


def _block_generators(total: int, n1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """L2 and diag(L3) restricted to the states |n1, total - n1> (n1 descending)."""
    n2 = total - n1
    k = len(n1)
    # <n1+1, n2-1| a1^dag a2 |n1, n2> = sqrt((n1+1) n2); row i-1 holds n1+1
    up = np.sqrt((n1[1:] + 1.0) * n2[1:])
    hop = np.zeros((k, k))
    hop[np.arange(k - 1), np.arange(1, k)] = up
    l2 = (hop - hop.T) / 2j
    return l2, (n1 - n2) / 2.0


@lru_cache(maxsize=512)
def _block(theta: float, psi_t: float, psi_r: float, total: int, lo: int, hi: int) -> np.ndarray:
    n1 = np.arange(hi, lo - 1, -1)
    l2, l3 = _block_generators(total, n1)
    mix = expm(-2j * theta * l2)
    outer = np.exp(-1j * (psi_t - psi_r) * l3)
    inner = np.exp(-1j * (psi_t + psi_r) * l3)
    b = outer[:, None] * mix * inner[None, :]
    b.setflags(write=False)
    return b


def beam_splitter_blocks(p: BeamSplitterParams, cutoff1: int,
                         cutoff2: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """``(indices, block)`` pairs making up :func:`beam_splitter_unitary`.

    Blocks whose photon number exceeds a cutoff are exponentiated from the
    truncated generator: still unitary, but not the physical splitter, so
    callers must keep amplitude out of them.
    """
    if cutoff1 < 0 or cutoff2 < 0:
        raise ValueError("cutoffs must be non-negative")
    out = []
    for total, idx in enumerate(number_blocks(cutoff1, cutoff2)):
        hi, lo = min(total, cutoff1), max(0, total - cutoff2)
        out.append((idx, _block(float(p.theta), float(p.psi_t), float(p.psi_r), total, lo, hi)))
    return out


@lru_cache(maxsize=8)
def _beam_splitter_cached(p: BeamSplitterParams, cutoff1: int, cutoff2: int) -> np.ndarray:
    d = (cutoff1 + 1) * (cutoff2 + 1)
    u = np.zeros((d, d), dtype=complex)
    for idx, block in beam_splitter_blocks(p, cutoff1, cutoff2):
        u[np.ix_(idx, idx)] = block
    u.setflags(write=False)
    return u


def beam_splitter_unitary(p: BeamSplitterParams, cutoff1: int, cutoff2: int) -> np.ndarray:
    """Fock-basis matrix of exp(-i(pt-pr)L3) exp(-2i theta L2) exp(-i(pt+pr)L3).

    The generators conserve total photon number, so the matrix is assembled
    from one small exponential per photon-number block.
    """
    if cutoff1 < 0 or cutoff2 < 0:
        raise ValueError("cutoffs must be non-negative")
    return _beam_splitter_cached(p, int(cutoff1), int(cutoff2))


def povm_no_click(d: DetectorModel, cutoff: int) -> np.ndarray:
    """No-click element: diag((1 - eta)^m)."""
    m = np.arange(cutoff + 1)
    return np.diag((1.0 - d.eta) ** m)


def povm_click(d: DetectorModel, cutoff: int) -> np.ndarray:
    """Click element, the complement of :func:`povm_no_click`."""
    return np.eye(cutoff + 1) - povm_no_click(d, cutoff)


def click_probability(eta: float, m: np.ndarray | int) -> np.ndarray:
    """Diagonal of the click element for photon numbers ``m``."""
    return 1.0 - (1.0 - eta) ** np.asarray(m)
