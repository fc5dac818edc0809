import math

import numpy as np
import pytest

from core.model.analytic_sp import (
    GaussianSequence,
    SequenceSet,
    detect_sequences,
    sp_analytic,
    sp_sequence,
    theta3,
)
from core.model.classical import PoincareSurface
from core.model.dicke import ModelParams
from core.model.dynamics import Decomposition, decompose_point, survival_probability
from core.model.errors import ParameterError, UnstructuredDecompositionError
from core.model.spectrum import get_or_diagonalize


def _gaussian(energies, center, sigma, amplitude=1.0):
    return amplitude * np.exp(-(energies - center) ** 2 / (2 * sigma ** 2))


@pytest.fixture
def single_sequence():
    energies = np.arange(41, dtype=float)
    return Decomposition.from_weights(_gaussian(energies, 20.3, 3.0), energies)


@pytest.fixture
def two_sequences():
    # две гармонические лестницы с шагом 1, сдвинутые на 0.37
    e_a = np.arange(41, dtype=float)
    e_b = np.arange(41, dtype=float) + 0.37
    w_a = _gaussian(e_a, 20.0, 3.0)
    w_b = _gaussian(e_b, 22.5, 2.5, amplitude=0.5)
    energies = np.concatenate([e_a, e_b])
    order = np.argsort(energies)
    return Decomposition.from_weights(np.concatenate([w_a, w_b])[order], energies[order])


def test_theta3_matches_direct_sum():
    x = np.array([0.0, 0.3, 1.7, 4.0])
    y = 0.6
    p = np.arange(-60, 61)
    direct = np.array([np.sum(y ** (p * p) * np.cos(2 * p * xx)) for xx in x])
    np.testing.assert_allclose(theta3(x, y), direct, rtol=1e-13, atol=1e-14)
    assert theta3(1.2, 0.0) == 1.0
    assert isinstance(theta3(0.5, 0.3), float)


def test_theta3_broadcasts():
    x = np.linspace(0.0, 3.0, 5).reshape(-1, 1)
    y = np.array([0.1, 0.5, 0.9])
    assert theta3(x, y).shape == (5, 3)


def test_theta3_rejects_bad_nome():
    with pytest.raises(ParameterError):
        theta3(0.0, 1.0)
    with pytest.raises(ParameterError):
        theta3(0.0, -0.1)


def test_detects_single_harmonic_sequence(single_sequence):
    ss = detect_sequences(single_sequence)
    assert ss.M == 1
    assert ss.spacing_estimate == pytest.approx(1.0)
    seq = ss.sequences[0]
    assert seq.E_bar == pytest.approx(20.3, abs=1e-8)
    assert seq.sigma == pytest.approx(3.0, rel=1e-8)
    assert seq.omega1 == pytest.approx(1.0)
    assert seq.e2 == 0.0
    assert math.isinf(seq.t_D)
    assert seq.r2 == pytest.approx(1.0, abs=1e-10)
    assert ss.residual_weight < 1e-3


def test_single_sequence_survival_matches_exact(single_sequence):
    ss = detect_sequences(single_sequence)
    t = np.linspace(0.0, 12.0, 241)
    exact = survival_probability(single_sequence, t).sp
    analytic = sp_analytic(ss, t)
    np.testing.assert_allclose(analytic.series.sp, exact, atol=1e-6)
    np.testing.assert_allclose(analytic.terms["seq_1"], analytic.series.sp)
    assert analytic.series.plateau == pytest.approx(1.0 / single_sequence.pr, rel=1e-6)
    assert analytic.pairs == []


def test_sequence_revival_period(single_sequence):
    seq = detect_sequences(single_sequence).sequences[0]
    period = 2 * math.pi / seq.omega1
    assert sp_sequence(seq, period) == pytest.approx(sp_sequence(seq, 0.0), rel=1e-10)
    assert sp_sequence(seq, 0.0) == pytest.approx(1.0, abs=1e-6)


def test_two_interleaved_sequences(two_sequences):
    ss = detect_sequences(two_sequences)
    assert ss.M == 2
    first, second = ss.sequences
    assert first.E_bar == pytest.approx(20.0, abs=1e-8)
    assert second.E_bar == pytest.approx(22.5, abs=1e-8)
    assert first.sigma == pytest.approx(3.0, rel=1e-8)
    assert second.sigma == pytest.approx(2.5, rel=1e-8)

    t = np.linspace(0.0, 15.0, 301)
    analytic = sp_analytic(ss, t)
    assert set(analytic.terms) == {"seq_1", "seq_2", "int_1_2"}
    pair = analytic.pairs[0]
    assert pair.delta_E == pytest.approx(0.37, abs=1e-12)
    assert pair.omega_ij == pytest.approx(1.0)
    assert pair.sigma_ij == 0.0
    exact = survival_probability(two_sequences, t).sp
    np.testing.assert_allclose(analytic.series.sp, exact, atol=1e-6)


def test_manual_sequence_count_keeps_heaviest(two_sequences):
    ss = detect_sequences(two_sequences, n_sequences=1)
    assert ss.M == 1
    assert ss.sequences[0].E_bar == pytest.approx(20.0, abs=1e-8)
    assert ss.residual_weight > 0.1


def test_too_few_components():
    d = Decomposition.from_weights(np.ones(5), np.arange(5.0))
    with pytest.raises(ParameterError):
        detect_sequences(d)


def test_unstructured_decomposition_is_rejected():
    empty = SequenceSet(sequences=[], residual_weight=1.0, spacing_estimate=1.0)
    assert empty.unstructured
    with pytest.raises(UnstructuredDecompositionError):
        sp_analytic(empty, [0.0, 1.0])


def test_poor_fit_is_rejected(single_sequence):
    seq = detect_sequences(single_sequence).sequences[0]
    poor = GaussianSequence(members=seq.members, energies=seq.energies, weights=seq.weights,
                            A=seq.A, E_bar=seq.E_bar, sigma=seq.sigma, omega1=seq.omega1,
                            e2=seq.e2, r2=0.5)
    ss = SequenceSet(sequences=[poor], residual_weight=0.0, spacing_estimate=1.0)
    with pytest.raises(UnstructuredDecompositionError, match="0.9"):
        sp_analytic(ss, [0.0, 1.0])


def _quadratic_ladder(e2, n=61, center=30, sigma=3.0):
    k = np.arange(n, dtype=float)
    energies = k + e2 * (k - center) ** 2
    return Decomposition.from_weights(_gaussian(energies, float(center), sigma), energies)


@pytest.mark.parametrize("e2", [0.002, 0.01, -0.005])
def test_anharmonic_sequence_parameters(e2):
    ss = detect_sequences(_quadratic_ladder(e2))
    assert ss.M == 1
    seq = ss.sequences[0]
    assert seq.E_bar == pytest.approx(30.0, abs=1e-8)
    assert seq.sigma == pytest.approx(3.0, rel=1e-6)
    assert seq.omega1 == pytest.approx(1.0, abs=1.5 * abs(e2))
    assert seq.e2 == pytest.approx(e2, rel=1e-6)
    assert seq.t_D == pytest.approx(seq.omega1 / (3.0 * abs(e2)), rel=1e-6)
    assert seq.t_D == pytest.approx(1.0 / (3.0 * abs(e2)), rel=0.02)


@pytest.mark.parametrize("e2", [0.002, 0.01, -0.005])
def test_anharmonic_survival_follows_exact_until_fractional_revivals(e2):
    d = _quadratic_ladder(e2)
    ss = detect_sequences(d)
    t_d = ss.sequences[0].t_D
    t = np.linspace(0.0, 3.0 * t_d, 1501)
    exact = survival_probability(d, t).sp
    analytic = sp_analytic(ss, t).series

    assert analytic.sp[0] == pytest.approx(1.0, abs=1e-2)
    # дробные возрождения около 3 t_D формулой не описываются
    assert np.max(np.abs(analytic.sp - exact)) < 0.2
    assert analytic.plateau == pytest.approx(1.0 / d.pr, rel=0.02)
    late = sp_analytic(ss, [20.0 * t_d]).series.sp[0]
    assert late == pytest.approx(analytic.plateau, rel=1e-9)


@pytest.mark.slow
def test_regular_state_follows_analytic_curve(tmp_path):
    params = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=60.0)
    es = get_or_diagonalize(params, 260, cache_dir=str(tmp_path))
    center = PoincareSurface(energy=-1.8 * params.j, params=params).point(math.pi, -0.6)
    d = decompose_point(center, es)
    ss = detect_sequences(d)
    assert ss.M >= 1

    heaviest = max(ss.sequences, key=lambda s: float(s.weights.sum()))
    t = np.linspace(0.0, heaviest.t_D, 4001)
    exact = survival_probability(d, t).sp
    analytic = sp_analytic(ss, t).series.sp
    assert np.mean(np.abs(analytic - exact)) <= 0.05
