"""The scissors setup end to end: pair source, two 50:50 splitters, and the
D1-click / D2-click / D3-no-click post-selection that leaves a truncated
state in mode b1.

Mode bookkeeping: the pair source emits signal a1 and idler c1; BS1 mixes
(a1, a2) into (b1, b2); BS2 mixes (b2, b3) into (c2, c3), with the coherent
beam entering at b3. Every splitter acts on kets as ``U^dag`` where ``U`` is
:func:`~qscissors.optics.beam_splitter_unitary`, so density matrices evolve
as ``U^dag rho U``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import fock
from .fock import DensityMatrix, FockVector, ModeLayout
from .optics import (
    BeamSplitterParams,
    DetectorModel,
    PdcParams,
    beam_splitter_blocks,
    beam_splitter_unitary,
    click_probability,
    coherent_cutoff,
    coherent_vector,
    pdc_density,
    povm_click,
    povm_no_click,
)

NO_EVENT_THRESHOLD = 1e-15
# rep_rate calibrated so that balanced target, eta=0.5, |alpha|^2=0.72 yields 4533 events/s
DEFAULT_REP_RATE = 1.00077165e8


class NoEventError(RuntimeError):
    """The heralding pattern has (numerically) zero probability."""


@dataclass(frozen=True)
class TargetQubit:
    """Target ``c0|0> + c1|1>`` (normalized on use)."""

    c0: complex = 1.0
    c1: complex = 1.0

    def __post_init__(self):
        if abs(self.c0) == 0 and abs(self.c1) == 0:
            raise ValueError("target qubit needs c0 or c1 non-zero")

    @classmethod
    def from_ratio(cls, ratio: float, phase: float = 0.0) -> "TargetQubit":
        """Target with ``|c1/c0| = ratio``; ``ratio=inf`` gives |1>."""
        if ratio < 0 or math.isnan(ratio):
            raise ValueError(f"ratio {ratio!r} must be non-negative")
        if math.isinf(ratio):
            return cls(0.0, cmath.exp(1j * phase))
        return cls(1.0, ratio * cmath.exp(1j * phase))

    @property
    def ratio(self) -> float:
        return math.inf if self.c0 == 0 else abs(self.c1 / self.c0)

    @property
    def vacuum_weight(self) -> float:
        return abs(self.c0) ** 2 / (abs(self.c0) ** 2 + abs(self.c1) ** 2)

    def vector(self, label: str = "b1", cutoff: int = 1) -> FockVector:
        if cutoff < 1:
            raise ValueError("a qubit target needs a mode cutoff of at least 1")
        amps = np.zeros(cutoff + 1, dtype=complex)
        amps[0], amps[1] = self.c0, self.c1
        return FockVector(ModeLayout.of((label, cutoff)), amps).normalized()


@dataclass(frozen=True)
class SchemeConfig:
    """Physical parameters of one evaluation.

    ``coherent_cutoff=None`` picks the smallest cutoff whose Poisson tail is
    below 1e-10.
    """

    alpha: complex = 0.0
    pdc: PdcParams = field(default_factory=PdcParams)
    eta1: DetectorModel = DetectorModel(0.5)
    eta2: DetectorModel = DetectorModel(0.5)
    eta3: DetectorModel = DetectorModel(0.5)
    coherent_cutoff: Optional[int] = None
    rep_rate: float = DEFAULT_REP_RATE

    def __post_init__(self):
        if not self.rep_rate > 0:
            raise ValueError(f"rep_rate={self.rep_rate!r} must be positive")
        if self.coherent_cutoff is not None:
            need = coherent_cutoff(self.alpha_sq)
            if self.coherent_cutoff < need:
                raise ValueError(
                    f"coherent_cutoff={self.coherent_cutoff} too small for |alpha|^2={self.alpha_sq:g}; "
                    f"need >= {need}")

    @classmethod
    def from_intensity(cls, alpha_sq: float, eta: float, phase: float = 0.0, **kw) -> "SchemeConfig":
        """Config with a real-phase coherent amplitude and one shared efficiency."""
        if alpha_sq < 0:
            raise ValueError(f"alpha_sq={alpha_sq!r} must be non-negative")
        d = DetectorModel(eta)
        return cls(alpha=math.sqrt(alpha_sq) * cmath.exp(1j * phase), eta1=d, eta2=d, eta3=d, **kw)

    @property
    def alpha_sq(self) -> float:
        return abs(complex(self.alpha)) ** 2

    @property
    def cutoffs(self) -> dict[str, int]:
        """Per-mode cutoffs; every amplitude-carrying photon-number block stays complete."""
        p = self.pdc.pair_cutoff
        k = self.coherent_cutoff if self.coherent_cutoff is not None else coherent_cutoff(self.alpha_sq)
        return {"coherent": k, "pair": p, "c": k + p, "b1": p + 1}


@dataclass(frozen=True, eq=False)
class TruncationResult:
    rho_out: Optional[DensityMatrix]
    probability: float
    rate: float
    fidelity: Optional[float] = None

    @property
    def no_event(self) -> bool:
        return self.rho_out is None


def _finish(rho_unnorm: np.ndarray, cfg: SchemeConfig, target: Optional[TargetQubit]) -> TruncationResult:
    layout = ModeLayout.of(("b1", cfg.cutoffs["b1"]))
    prob = fock.clamp_probability(np.trace(rho_unnorm).real)
    if prob < NO_EVENT_THRESHOLD:
        return TruncationResult(None, prob, prob * cfg.rep_rate)
    rho_unnorm = (rho_unnorm + rho_unnorm.conj().T) / 2
    rho = DensityMatrix(layout, rho_unnorm / prob)
    res = TruncationResult(rho, prob, prob * cfg.rep_rate)
    if target is not None:
        res = replace(res, fidelity=fidelity_to_qubit(res, target))
    return res


def _bs_dagger(c1: int, c2: int) -> np.ndarray:
    return beam_splitter_unitary(BeamSplitterParams(), c1, c2).conj().T


def run_dense(cfg: SchemeConfig, target: Optional[TargetQubit] = None) -> TruncationResult:
    """Full density-matrix evolution of the four-mode setup.

    Slow (dimension ``(P+1)^2 (K+P+1)^2``); serves as the reference path.
    """
    cut = cfg.cutoffs
    p, c = cut["pair"], cut["c"]
    vac = FockVector.basis(ModeLayout.of(("a2", p)), (0,))
    coh = fock.resize_mode(coherent_vector(cfg.alpha, cut["coherent"], "b3"), "b3", c)
    rho = fock.tensor(fock.tensor(pdc_density(cfg.pdc), vac), coh)  # a1 c1 a2 b3

    rho = fock.apply_unitary(rho, _bs_dagger(p, p), ("a1", "a2"))
    rho = fock.relabel(rho, {"a1": "b1", "a2": "b2"})
    rho = fock.resize_mode(rho, "b2", c)
    rho = fock.apply_unitary(rho, _bs_dagger(c, c), ("b2", "b3"))
    rho = fock.relabel(rho, {"b2": "c2", "b3": "c3"})
    rho = fock.resize_mode(rho, "b1", cut["b1"])

    rho = fock.apply_operator(rho, povm_click(cfg.eta1, p), "c1")
    rho = fock.apply_operator(rho, povm_click(cfg.eta2, c), "c2")
    rho = fock.apply_operator(rho, povm_no_click(cfg.eta3, c), "c3")
    reduced = fock.partial_trace(rho, ["b1"])
    return _finish(reduced.elems, cfg, target)


def _branch_output(n: int, cfg: SchemeConfig, coh: np.ndarray) -> np.ndarray:
    """Amplitude tensor over (b1, c2, c3) for n signal photons entering BS1."""
    cut = cfg.cutoffs
    p, c = cut["pair"], cut["c"]
    u1 = _bs_dagger(p, p).reshape(p + 1, p + 1, p + 1, p + 1)
    b12 = u1[:, :, n, 0]  # column of |n, 0> on (a1, a2)
    dc = c + 1
    state = np.zeros((p + 1, dc, dc), dtype=complex)
    state[:, : p + 1, :] = b12[:, :, None] * coh[None, None, :]
    flat = state.reshape(p + 1, dc * dc)
    out = np.zeros_like(flat)
    # BS2 blockwise: kets map by U^dag, so each block acts as flat @ conj(block)
    for idx, block in beam_splitter_blocks(BeamSplitterParams(), c, c):
        out[:, idx] = flat[:, idx] @ block.conj()
    out = out.reshape(p + 1, dc, dc)
    b1 = np.zeros((cut["b1"] + 1, dc, dc), dtype=complex)
    b1[: p + 1] = out
    return b1


def branch_contributions(cfg: SchemeConfig, *, single_photon: bool = False,
                         number_resolving: bool = False) -> list[tuple[int, np.ndarray]]:
    """Unnormalized b1 density contribution of each pair-number branch.

    ``single_photon`` replaces the pair source by exactly one pair;
    ``number_resolving`` heralds on exactly (1, 1, 0) photons at D1, D2, D3
    with perfect detectors instead of the binary click model.
    """
    cut = cfg.cutoffs
    c = cut["c"]
    coh = np.zeros(c + 1, dtype=complex)
    coh[: cut["coherent"] + 1] = coherent_vector(cfg.alpha, cut["coherent"]).amps
    m = np.arange(c + 1)
    if number_resolving:
        herald = np.zeros((c + 1, c + 1))
        herald[1, 0] = 1.0
    else:
        herald = np.outer(click_probability(cfg.eta2.eta, m), 1.0 - click_probability(cfg.eta3.eta, m))

    branches = [1] if single_photon else range(cut["pair"] + 1)
    out = []
    for n in branches:
        if single_photon:
            w = 1.0
        else:
            # n = 0 gets weight 0: without dark counts D1 cannot click
            w = cfg.pdc.branch_weight(n) * float(click_probability(cfg.eta1.eta, n))
        if number_resolving and n != 1:
            w = 0.0
        if w == 0.0:
            out.append((n, np.zeros((cut["b1"] + 1,) * 2, dtype=complex)))
            continue
        v = _branch_output(n, cfg, coh)
        rho = w * np.einsum("ijk,jk,ljk->il", v, herald, v.conj())
        out.append((n, rho))
    return out


def run_branches(cfg: SchemeConfig, target: Optional[TargetQubit] = None, *,
                 single_photon: bool = False, number_resolving: bool = False) -> TruncationResult:
    """Fast path: pure-vector evolution per pair branch, Fock-diagonal heralding."""
    parts = branch_contributions(cfg, single_photon=single_photon, number_resolving=number_resolving)
    rho = sum((r for _, r in parts), np.zeros((cfg.cutoffs["b1"] + 1,) * 2, dtype=complex))
    return _finish(rho, cfg, target)


def fidelity_to_qubit(r: TruncationResult, t: TargetQubit) -> float:
    if r.no_event:
        raise NoEventError("no heralding event: fidelity undefined")
    rho = r.rho_out
    return fock.fidelity_pure(rho, t.vector(rho.layout.labels[0], rho.layout.cutoffs[0]))


def ideal_truncated_state(alpha: complex) -> FockVector:
    """(|0> + alpha|1>) / sqrt(1 + |alpha|^2): the perfect scissors output."""
    alpha = complex(alpha)
    return FockVector(ModeLayout.of(("b1", 1)), np.array([1.0, alpha]) / math.sqrt(1 + abs(alpha) ** 2))


def ideal_fidelity(alpha: complex, t: TargetQubit) -> float:
    overlap = np.vdot(t.vector("b1", 1).amps, ideal_truncated_state(alpha).amps)
    return fock.clamp_probability(abs(overlap) ** 2, "fidelity")
