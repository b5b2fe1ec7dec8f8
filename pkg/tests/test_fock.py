import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qscissors import fock
from qscissors.fock import DensityMatrix, FockVector, LayoutError, ModeLayout
from qscissors.optics import BeamSplitterParams, PdcParams, beam_splitter_unitary, coherent_vector, pdc_density


def random_vector(rng, layout, normalize=True):
    amps = rng.normal(size=layout.dim) + 1j * rng.normal(size=layout.dim)
    if normalize:
        amps /= np.linalg.norm(amps)
    return FockVector(layout, amps)


def random_density(rng, layout, trace=1.0):
    a = rng.normal(size=(layout.dim, layout.dim)) + 1j * rng.normal(size=(layout.dim, layout.dim))
    rho = a @ a.conj().T
    return DensityMatrix(layout, trace * rho / np.trace(rho).real)


TWO = ModeLayout.of(("x", 1), ("y", 1))
SINGLE_PHOTON_SPLIT = FockVector(TWO, np.array([0, 1j, 1, 0]) / math.sqrt(2))  # (|10> + i|01>)/sqrt2


def test_layout_ordering_first_mode_most_significant():
    layout = ModeLayout.of(("a", 2), ("b", 3))
    assert layout.dim == 12
    assert layout.index((1, 0)) == 4
    assert layout.index((0, 3)) == 3
    assert layout.occupation(7) == (1, 3)


@pytest.mark.parametrize("cutoffs", [(0,), (2,), (1, 2), (3, 0, 2), (1, 1, 1, 1)])
def test_index_occupation_bijection(cutoffs):
    layout = ModeLayout(tuple((f"m{i}", c) for i, c in enumerate(cutoffs)))
    seen = set()
    for i in range(layout.dim):
        occ = layout.occupation(i)
        assert layout.index(occ) == i
        seen.add(occ)
    assert len(seen) == layout.dim


def test_layout_rejects_bad_modes():
    with pytest.raises(LayoutError):
        ModeLayout.of(("a", 1), ("a", 2))
    with pytest.raises(LayoutError):
        ModeLayout.of(("a", -1))
    with pytest.raises(LayoutError):
        ModeLayout.of(("a", 1)).index((2,))


def test_vectors_are_immutable():
    v = FockVector.basis(TWO, (1, 0))
    with pytest.raises(ValueError):
        v.amps[0] = 1.0


def test_tensor_vacua():
    vac = FockVector.basis(ModeLayout.of(("a", 1)), (0,)).to_density()
    vac2 = FockVector.basis(ModeLayout.of(("b", 1)), (0,)).to_density()
    out = fock.tensor(vac, vac2)
    expected = np.zeros((4, 4))
    expected[0, 0] = 1
    np.testing.assert_array_equal(out.elems, expected)
    assert out.layout.labels == ("a", "b")


def test_tensor_trace_multiplies():
    rng = np.random.default_rng(1)
    rho = random_density(rng, ModeLayout.of(("a", 2)), trace=0.5)
    sigma = random_density(rng, ModeLayout.of(("b", 1)), trace=1.0)
    assert fock.tensor(rho, sigma).trace == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("gamma_sq", [0.1, 0.01])
def test_tensor_pdc_with_vacuum(gamma_sq):
    # hand expansion of the pair mixture: (1 - g2) * {1, g2, g2^2} on |n, n, 0>
    out = fock.tensor(pdc_density(PdcParams(gamma_sq, 2)),
                      FockVector.basis(ModeLayout.of(("a2", 2)), (0,)).to_density())
    assert out.layout.dim == 27
    diag = np.diag(out.elems).real
    expected = np.zeros(27)
    for n, w in enumerate([1.0, gamma_sq, gamma_sq**2]):
        expected[out.layout.index((n, n, 0))] = (1 - gamma_sq) * w
    np.testing.assert_allclose(diag, expected, atol=1e-15)
    assert np.count_nonzero(out.elems) == 3


def test_tensor_duplicate_label():
    v = FockVector.basis(ModeLayout.of(("a", 1)), (0,))
    with pytest.raises(LayoutError):
        fock.tensor(v, v)


def test_partial_trace_product_state():
    rho = FockVector.basis(TWO, (0, 1)).to_density()
    out = fock.partial_trace(rho, ["x"])
    np.testing.assert_allclose(out.elems, [[1, 0], [0, 0]])


def test_partial_trace_all_modes_is_trace():
    rng = np.random.default_rng(2)
    rho = random_density(rng, TWO, trace=0.7)
    out = fock.partial_trace(rho, [])
    assert out.elems.shape == (1, 1)
    assert out.elems[0, 0].real == pytest.approx(0.7, abs=1e-12)


def test_partial_trace_entangled_photon():
    out = fock.partial_trace(SINGLE_PHOTON_SPLIT.to_density(), ["x"])
    np.testing.assert_allclose(out.elems, np.diag([0.5, 0.5]), atol=1e-15)


def test_partial_trace_unknown_label():
    with pytest.raises(LayoutError):
        fock.partial_trace(SINGLE_PHOTON_SPLIT.to_density(), ["z"])


def test_project_mode_examples():
    out = fock.project_mode(SINGLE_PHOTON_SPLIT, "y", 0)
    np.testing.assert_allclose(out.amps, [0, 1 / math.sqrt(2)], atol=1e-15)
    coh = coherent_vector(1.0, 20, label="m")
    scalar = fock.project_mode(coh, "m", 0)
    assert scalar.layout.dim == 1
    assert scalar.amps[0] == pytest.approx(math.exp(-0.5), abs=1e-15)
    with pytest.raises(ValueError):
        fock.project_mode(SINGLE_PHOTON_SPLIT, "y", 2)


def test_fidelity_pure_examples():
    one = ModeLayout.of(("b1", 1))
    plus = FockVector(one, np.array([1, 1]) / math.sqrt(2))
    assert fock.fidelity_pure(plus.to_density(), plus) == pytest.approx(1.0, abs=1e-15)
    vac = FockVector.basis(one, (0,))
    assert fock.fidelity_pure(vac.to_density(), FockVector.basis(one, (1,))) == 0.0
    mixed = DensityMatrix(one, np.diag([0.5, 0.5]))
    assert fock.fidelity_pure(mixed, plus) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(LayoutError):
        fock.fidelity_pure(mixed, FockVector.basis(ModeLayout.of(("q", 1)), (0,)))


def test_clamp_probability():
    assert fock.clamp_probability(1 + 1e-9) == 1.0
    assert fock.clamp_probability(-1e-9) == 0.0
    with pytest.raises(ValueError):
        fock.clamp_probability(1.01)


def test_apply_identity():
    rng = np.random.default_rng(3)
    v = random_vector(rng, TWO)
    out = fock.apply_unitary(v, np.eye(4), ("x", "y"))
    np.testing.assert_array_equal(out.amps, v.amps)


def test_apply_fifty_fifty_single_photon():
    # kets evolve by U^dag; hand exponential of the one-photon block gives
    # U = [[1, -i], [-i, 1]] / sqrt2 on (|10>, |01>)
    u = beam_splitter_unitary(BeamSplitterParams(), 1, 1)
    out = fock.apply_unitary(FockVector.basis(TWO, (1, 0)), u.conj().T, ("x", "y"))
    np.testing.assert_allclose(out.amps, SINGLE_PHOTON_SPLIT.amps, atol=1e-15)


def test_apply_unitary_rejects():
    v = FockVector.basis(TWO, (1, 0))
    with pytest.raises(ValueError):
        fock.apply_unitary(v, 2 * np.eye(4), ("x", "y"))
    with pytest.raises(LayoutError):
        fock.apply_unitary(v, np.eye(4), ("x", "z"))


def test_apply_unitary_on_non_adjacent_modes_matches_kron():
    rng = np.random.default_rng(4)
    layout = ModeLayout.of(("a", 1), ("b", 2), ("c", 1))
    u = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0]
    rho = random_density(rng, layout)
    out = fock.apply_unitary(rho, u, ("a", "c"))
    # reference: permute to (a, c, b), apply kron(u, I), permute back
    perm = fock.permute(rho, ["a", "c", "b"])
    full = np.kron(u, np.eye(3))
    ref = DensityMatrix(perm.layout, full @ perm.elems @ full.conj().T)
    np.testing.assert_allclose(fock.permute(out, ["a", "b", "c"]).elems,
                               fock.permute(ref, ["a", "b", "c"]).elems, atol=1e-12)


def test_resize_mode_pads_and_truncates():
    v = FockVector.basis(TWO, (1, 1))
    bigger = fock.resize_mode(v, "y", 3)
    assert bigger.layout.cutoff("y") == 3
    assert bigger.amps[bigger.layout.index((1, 1))] == 1
    back = fock.resize_mode(bigger, "y", 1)
    np.testing.assert_array_equal(back.amps, v.amps)


layouts = st.lists(st.integers(0, 3), min_size=1, max_size=3).map(
    lambda cs: ModeLayout(tuple((f"m{i}", c) for i, c in enumerate(cs))))


@settings(max_examples=60, deadline=None)
@given(layouts, layouts, st.integers(0, 2**32 - 1))
def test_tensor_partial_trace_round_trip(la, lb, seed):
    lb = lb.relabel({l: "o" + l for l in lb.labels})
    rng = np.random.default_rng(seed)
    rho = random_density(rng, la)
    sigma = random_density(rng, lb, trace=rng.uniform(0.1, 1.0))
    out = fock.partial_trace(fock.tensor(rho, sigma), la.labels)
    np.testing.assert_allclose(out.elems, sigma.trace * rho.elems, atol=1e-12)
    assert out.trace == pytest.approx(rho.trace * sigma.trace, abs=1e-12)


def test_projection_completeness_random_vectors():
    rng = np.random.default_rng(5)
    layout = ModeLayout.of(("a", 2), ("b", 3), ("c", 1))
    for _ in range(100):
        v = random_vector(rng, layout, normalize=False)
        for mode in layout.labels:
            total = sum(fock.project_mode(v, mode, n).norm_sq for n in range(layout.cutoff(mode) + 1))
            assert total == pytest.approx(v.norm_sq, abs=1e-12 * max(1.0, v.norm_sq))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_apply_unitary_preserves_state_structure(seed, c1, c2):
    rng = np.random.default_rng(seed)
    layout = ModeLayout.of(("a", c1), ("b", c2), ("c", 1))
    p = BeamSplitterParams(*rng.uniform(-math.pi, math.pi, size=3))
    u = beam_splitter_unitary(p, c1, c2)
    v = random_vector(rng, layout)
    assert fock.apply_unitary(v, u, ("a", "b")).norm_sq == pytest.approx(1.0, abs=1e-12)
    rho = random_density(rng, layout, trace=0.8)
    out = fock.apply_unitary(rho, u, ("a", "b"))
    out.check()
    assert out.trace == pytest.approx(0.8, abs=1e-10)
    np.testing.assert_allclose(np.linalg.eigvalsh(out.elems), np.linalg.eigvalsh(rho.elems), atol=1e-9)
