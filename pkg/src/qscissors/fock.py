"""Truncated multimode Fock-space states.

Basis ordering is mixed-radix with the first listed mode as the most
significant digit, i.e. ``np.ravel_multi_index`` in C order over the
per-mode dimensions ``cutoff + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
TRACE_SLACK = 1e-9
UNITARY_TOL = 1e-9
CLAMP_TOL = 1e-6


class LayoutError(ValueError):
    """Raised for inconsistent or unknown mode bookkeeping."""


def clamp_probability(p: float, what: str = "probability") -> float:
    """Clamp ``p`` into [0, 1], refusing violations larger than 1e-6."""
    p = float(p)
    if p < -CLAMP_TOL or p > 1 + CLAMP_TOL or not np.isfinite(p):
        raise ValueError(f"{what} {p!r} outside [0, 1] beyond tolerance")
    return min(max(p, 0.0), 1.0)


@dataclass(frozen=True)
class ModeLayout:
    """Ordered mode labels with per-mode photon-number cutoffs."""

    modes: tuple[tuple[str, int], ...]

    def __post_init__(self):
        modes = tuple((str(label), int(cutoff)) for label, cutoff in self.modes)
        object.__setattr__(self, "modes", modes)
        labels = [m[0] for m in modes]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate mode labels in {labels}")
        for label, cutoff in modes:
            if cutoff < 0:
                raise LayoutError(f"negative cutoff {cutoff} for mode {label!r}")

    @classmethod
    def of(cls, *modes: tuple[str, int]) -> "ModeLayout":
        return cls(tuple(modes))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m[0] for m in self.modes)

    @property
    def cutoffs(self) -> tuple[int, ...]:
        return tuple(m[1] for m in self.modes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cutoffs)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown mode {label!r}; layout has {self.labels}") from None

    def cutoff(self, label: str) -> int:
        return self.modes[self.position(label)][1]

    def index(self, occupation: Sequence[int]) -> int:
        """Basis index of ``|n_1, ..., n_k>``."""
        if len(occupation) != len(self.modes):
            raise LayoutError("occupation tuple length does not match layout")
        for n, c in zip(occupation, self.cutoffs):
            if not 0 <= n <= c:
                raise LayoutError(f"occupation {tuple(occupation)} outside cutoffs {self.cutoffs}")
        if not self.modes:
            return 0
        return int(np.ravel_multi_index(tuple(occupation), self.shape))

    def occupation(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise LayoutError(f"basis index {index} outside [0, {self.dim})")
        if not self.modes:
            return ()
        return tuple(int(n) for n in np.unravel_index(index, self.shape))

    def without(self, label: str) -> "ModeLayout":
        pos = self.position(label)
        return ModeLayout(self.modes[:pos] + self.modes[pos + 1:])

    def concat(self, other: "ModeLayout") -> "ModeLayout":
        return ModeLayout(self.modes + other.modes)

    def select(self, labels: Iterable[str]) -> "ModeLayout":
        """Sub-layout of ``labels`` in this layout's order."""
        keep = set(labels)
        for label in keep:
            self.position(label)
        return ModeLayout(tuple(m for m in self.modes if m[0] in keep))

    def with_cutoff(self, label: str, cutoff: int) -> "ModeLayout":
        pos = self.position(label)
        modes = list(self.modes)
        modes[pos] = (label, cutoff)
        return ModeLayout(tuple(modes))

    def relabel(self, mapping: dict[str, str]) -> "ModeLayout":
        for old in mapping:
            self.position(old)
        return ModeLayout(tuple((mapping.get(l, l), c) for l, c in self.modes))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FockVector:
    """Pure (possibly unnormalized) state over a :class:`ModeLayout`."""

    layout: ModeLayout
    amps: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amps).reshape(-1)
        if amps.shape != (self.layout.dim,):
            raise LayoutError(f"{amps.size} amplitudes for layout of dimension {self.layout.dim}")
        object.__setattr__(self, "amps", amps)

    @classmethod
    def basis(cls, layout: ModeLayout, occupation: Sequence[int]) -> "FockVector":
        amps = np.zeros(layout.dim, dtype=complex)
        amps[layout.index(occupation)] = 1.0
        return cls(layout, amps)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def tensor_view(self) -> np.ndarray:
        return self.amps.reshape(self.layout.shape)

    def normalized(self) -> "FockVector":
        n = np.sqrt(self.norm_sq)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return FockVector(self.layout, self.amps / n)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.layout, np.outer(self.amps, self.amps.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian PSD operator, trace <= 1 (trace is a probability weight)."""

    layout: ModeLayout
    elems: np.ndarray

    def __post_init__(self):
        elems = _frozen(self.elems)
        d = self.layout.dim
        if elems.shape != (d, d):
            raise LayoutError(f"matrix of shape {elems.shape} for layout of dimension {d}")
        object.__setattr__(self, "elems", elems)

    @property
    def trace(self) -> float:
        return float(np.trace(self.elems).real)

    def tensor_view(self) -> np.ndarray:
        return self.elems.reshape(self.layout.shape * 2)

    def check(self, psd: bool = True) -> "DensityMatrix":
        """Verify Hermiticity, positivity and trace bounds; return self."""
        herm = np.max(np.abs(self.elems - self.elems.conj().T), initial=0.0)
        if herm > HERMITIAN_TOL:
            raise ValueError(f"density matrix not Hermitian (max deviation {herm:.3g})")
        tr = self.trace
        if tr < -TRACE_SLACK or tr > 1 + TRACE_SLACK:
            raise ValueError(f"density matrix trace {tr!r} outside [0, 1]")
        if psd:
            lo = np.linalg.eigvalsh((self.elems + self.elems.conj().T) / 2).min()
            if lo < -PSD_TOL:
                raise ValueError(f"density matrix not positive semidefinite (min eigenvalue {lo:.3g})")
        return self

    def normalized(self) -> "DensityMatrix":
        tr = self.trace
        if tr <= 0:
            raise ValueError("cannot normalize a zero-trace density matrix")
        return DensityMatrix(self.layout, self.elems / tr)


State = Union[FockVector, DensityMatrix]


def as_density(state: State) -> DensityMatrix:
    return state.to_density() if isinstance(state, FockVector) else state


def tensor(a: State, b: State) -> State:
    """Tensor product; vectors stay vectors, anything mixed becomes a density matrix."""
    layout = a.layout.concat(b.layout)
    if isinstance(a, FockVector) and isinstance(b, FockVector):
        return FockVector(layout, np.kron(a.amps, b.amps))
    a, b = as_density(a), as_density(b)
    return DensityMatrix(layout, np.kron(a.elems, b.elems))


def partial_trace(rho: DensityMatrix, keep: Iterable[str]) -> DensityMatrix:
    """Trace out every mode not in ``keep``; kept modes retain layout order."""
    rho = as_density(rho)
    kept = rho.layout.select(keep)
    k = len(rho.layout.modes)
    keep_pos = [rho.layout.position(l) for l in kept.labels]
    drop_pos = [i for i in range(k) if i not in keep_pos]
    t = rho.tensor_view()
    # einsum subscripts: row axes 0..k-1, column axes k..2k-1, traced pairs share a letter
    letters = [chr(ord("a") + i) for i in range(2 * k)]
    for i in drop_pos:
        letters[k + i] = letters[i]
    out = "".join(letters[i] for i in keep_pos) + "".join(letters[k + i] for i in keep_pos)
    reduced = np.einsum("".join(letters) + "->" + out, t)
    return DensityMatrix(kept, reduced.reshape(kept.dim, kept.dim))


def project_mode(v: FockVector, mode: str, n: int) -> FockVector:
    """Unnormalized ``<n|_mode v`` on the layout without ``mode``."""
    pos = v.layout.position(mode)
    cutoff = v.layout.modes[pos][1]
    if not 0 <= n <= cutoff:
        raise ValueError(f"photon number {n} outside [0, {cutoff}] for mode {mode!r}")
    sub = np.take(v.tensor_view(), n, axis=pos)
    return FockVector(v.layout.without(mode), sub.reshape(-1))


def fidelity_pure(rho: DensityMatrix, psi: FockVector) -> float:
    """``<psi|rho|psi>`` for normalized ``rho`` and ``psi``."""
    if rho.layout != psi.layout:
        raise LayoutError(f"layout mismatch: {rho.layout.modes} vs {psi.layout.modes}")
    if abs(rho.trace - 1) > TRACE_SLACK:
        raise ValueError(f"fidelity needs a normalized state, trace is {rho.trace!r}")
    if abs(psi.norm_sq - 1) > TRACE_SLACK:
        raise ValueError(f"target vector not normalized (norm^2 {psi.norm_sq!r})")
    f = np.vdot(psi.amps, rho.elems @ psi.amps)
    if abs(f.imag) > HERMITIAN_TOL:
        raise ValueError(f"fidelity has imaginary residue {f.imag:.3g}")
    return clamp_probability(f.real, "fidelity")


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> None:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    dev = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])), initial=0.0)
    if dev > tol:
        raise ValueError(f"matrix is not unitary (max |U^dag U - I| = {dev:.3g})")


def apply_unitary(state: State, u: np.ndarray, modes: tuple[str, str]) -> State:
    """Apply a two-mode unitary, acting on kets as ``v -> U v``.

    ``u`` is indexed in the joint basis of ``modes`` (first mode most
    significant) and must match their cutoffs. Density matrices map as
    ``rho -> U rho U^dag``.
    """
    m1, m2 = modes
    layout = state.layout
    p1, p2 = layout.position(m1), layout.position(m2)
    if p1 == p2:
        raise LayoutError("apply_unitary needs two distinct modes")
    d1, d2 = layout.shape[p1], layout.shape[p2]
    u = np.asarray(u, dtype=complex)
    if u.shape != (d1 * d2, d1 * d2):
        raise LayoutError(f"unitary of shape {u.shape} does not match modes {modes} with dims ({d1}, {d2})")
    check_unitary(u)
    u4 = u.reshape(d1, d2, d1, d2)
    k = len(layout.modes)

    def left(t: np.ndarray, offset: int) -> np.ndarray:
        # contract u4's input axes with the tensor's axes p1, p2 (shifted by offset)
        t = np.tensordot(u4, t, axes=([2, 3], [offset + p1, offset + p2]))
        # result axes: (m1, m2, remaining...) -> move back into place
        return np.moveaxis(t, [0, 1], [offset + p1, offset + p2])

    if isinstance(state, FockVector):
        t = left(state.tensor_view(), 0)
        return FockVector(layout, t.reshape(-1))
    t = left(state.tensor_view(), 0)
    # X U^dag = conj(U acting on the column axes of conj(X))
    t = np.conj(left(np.conj(t), k))
    return DensityMatrix(layout, t.reshape(layout.dim, layout.dim))


def apply_operator(rho: DensityMatrix, op: np.ndarray, mode: str) -> DensityMatrix:
    """Left-multiply ``rho`` by a single-mode operator (no Hermiticity kept)."""
    layout = rho.layout
    p = layout.position(mode)
    d = layout.shape[p]
    op = np.asarray(op)
    if op.shape != (d, d):
        raise LayoutError(f"operator of shape {op.shape} does not match mode {mode!r} of dim {d}")
    t = np.tensordot(op, rho.tensor_view(), axes=([1], [p]))
    t = np.moveaxis(t, 0, p)
    return DensityMatrix(layout, t.reshape(layout.dim, layout.dim))


def relabel(state: State, mapping: dict[str, str]) -> State:
    layout = state.layout.relabel(mapping)
    if isinstance(state, FockVector):
        return FockVector(layout, state.amps)
    return DensityMatrix(layout, state.elems)


def resize_mode(state: State, mode: str, cutoff: int) -> State:
    """Change a mode's cutoff, zero-padding or truncating amplitudes."""
    layout = state.layout
    p = layout.position(mode)
    new = layout.with_cutoff(mode, cutoff)
    old_d, new_d = layout.shape[p], cutoff + 1
    axes = [p] if isinstance(state, FockVector) else [p, p + len(layout.modes)]
    t = state.tensor_view()
    for ax in axes:
        if new_d <= old_d:
            t = np.take(t, np.arange(new_d), axis=ax)
        else:
            pad = [(0, 0)] * t.ndim
            pad[ax] = (0, new_d - old_d)
            t = np.pad(t, pad)
    if isinstance(state, FockVector):
        return FockVector(new, t.reshape(-1))
    return DensityMatrix(new, t.reshape(new.dim, new.dim))


def permute(state: State, order: Sequence[str]) -> State:
    """Reorder modes to ``order`` (a permutation of the layout labels)."""
    layout = state.layout
    if sorted(order) != sorted(layout.labels):
        raise LayoutError(f"{list(order)} is not a permutation of {list(layout.labels)}")
    perm = [layout.position(l) for l in order]
    new = ModeLayout(tuple(layout.modes[i] for i in perm))
    if isinstance(state, FockVector):
        return FockVector(new, np.transpose(state.tensor_view(), perm).reshape(-1))
    k = len(perm)
    t = np.transpose(state.tensor_view(), perm + [k + i for i in perm])
    return DensityMatrix(new, t.reshape(new.dim, new.dim))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    if a.layout != b.layout:
        raise LayoutError("trace distance needs matching layouts")
    diff = a.elems - b.elems
    return 0.5 * float(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())
