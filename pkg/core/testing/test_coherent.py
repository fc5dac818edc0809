import math

import numpy as np
import pytest

from core.model.classical import PoincareSurface, hcl
from core.model.coherent import (
    OK,
    TRUNCATED,
    CoherentParams,
    coherent_vector,
    labels_to_phase,
    overlap,
    parity_weight,
    phase_to_labels,
    spreading_contour,
    uncertainty_check,
)
from core.model.dicke import ModelParams, build_basis, build_full_basis, build_hamiltonian
from core.model.errors import EmptyShellError, ParameterError
from core.model.phase_space import PhasePoint


@pytest.fixture
def point():
    return PhasePoint(q=0.9, p=-0.4, jz=-1.5, phi=2.2)


def test_labels_roundtrip(resonant, point):
    back = labels_to_phase(phase_to_labels(point, resonant), resonant)
    assert back.q == pytest.approx(point.q, abs=1e-12)
    assert back.p == pytest.approx(point.p, abs=1e-12)
    assert back.jz == pytest.approx(point.jz, abs=1e-12)
    assert back.phi == pytest.approx(point.phi, abs=1e-12)


def test_labels_south_pole(resonant):
    cp = phase_to_labels(PhasePoint(q=0.0, p=0.0, jz=-resonant.j, phi=1.0), resonant)
    assert cp.z == 0
    back = labels_to_phase(cp, resonant)
    assert back.jz == pytest.approx(-resonant.j)
    assert back.phi == 0.0


def test_labels_north_pole_requires_flag(resonant):
    pt = PhasePoint(q=0.0, p=0.0, jz=resonant.j, phi=0.0)
    with pytest.raises(ParameterError):
        phase_to_labels(pt, resonant)
    cp = phase_to_labels(pt, resonant, allow_pole=True)
    assert cp.north_pole
    assert labels_to_phase(cp, resonant).jz == resonant.j


def test_labels_reject_jz_outside_sphere(resonant):
    with pytest.raises(ParameterError):
        phase_to_labels(PhasePoint(q=0.0, p=0.0, jz=resonant.j + 0.5, phi=0.0), resonant)


def test_coherent_vector_full_basis_is_normalized(resonant, point):
    basis = build_full_basis(resonant, 40)
    vec = coherent_vector(phase_to_labels(point, resonant), resonant, basis)
    assert vec.status == OK
    assert vec.parity_weight == 1.0
    assert vec.norm_captured == pytest.approx(1.0, abs=1e-12)


def test_coherent_vector_parity_sector_weight(resonant, point):
    cp = phase_to_labels(point, resonant)
    vec = coherent_vector(cp, resonant, build_basis(resonant, 40))
    assert vec.parity_weight == pytest.approx(parity_weight(cp, resonant), rel=1e-14)
    assert vec.norm_captured == pytest.approx(vec.parity_weight, rel=1e-10)
    assert vec.capture == pytest.approx(1.0, abs=1e-10)


def test_parity_weight_limits(resonant):
    # вакуум с j_z = −J целиком в секторе +1
    vacuum = CoherentParams(z=0j, alpha=0j)
    assert parity_weight(vacuum, resonant) == pytest.approx(1.0)
    far = CoherentParams(z=1.0 + 0j, alpha=4.0 + 0j)
    assert parity_weight(far, resonant) == pytest.approx(0.5, abs=1e-12)


def test_coherent_vector_reports_truncation(resonant, caplog):
    cp = CoherentParams(z=0.5 + 0j, alpha=3.0 + 0j)
    with caplog.at_level("WARNING"):
        vec = coherent_vector(cp, resonant, build_basis(resonant, 2))
    assert vec.status == TRUNCATED
    assert vec.capture < 0.5
    assert "захватывает" in caplog.text


def test_coherent_vector_basis_mismatch(resonant, decoupled, point):
    with pytest.raises(ParameterError):
        coherent_vector(phase_to_labels(point, resonant), resonant, build_basis(decoupled, 5))


def test_overlap_matches_explicit_vectors(resonant, point):
    other = PhasePoint(q=0.3, p=0.2, jz=0.5, phi=2.9)
    a, b = phase_to_labels(point, resonant), phase_to_labels(other, resonant)
    basis = build_full_basis(resonant, 40)
    va = coherent_vector(a, resonant, basis).coefficients
    vb = coherent_vector(b, resonant, basis).coefficients
    explicit = abs(np.vdot(va, vb)) ** 2
    assert overlap(a, b, resonant) == pytest.approx(explicit, rel=1e-10)
    assert overlap(a, b, resonant) == pytest.approx(overlap(b, a, resonant), rel=1e-14)
    assert overlap(a, a, resonant) == pytest.approx(1.0)


def test_overlap_with_north_pole(resonant):
    pole = CoherentParams(z=complex(math.inf, 0.0), alpha=0j, north_pole=True)
    equator = phase_to_labels(PhasePoint(q=0.0, p=0.0, jz=0.0, phi=0.0), resonant)
    basis = build_full_basis(resonant, 5)
    explicit = abs(np.vdot(coherent_vector(pole, resonant, basis).coefficients,
                           coherent_vector(equator, resonant, basis).coefficients)) ** 2
    assert overlap(pole, equator, resonant) == pytest.approx(0.5 ** resonant.n_atoms, rel=1e-12)
    assert explicit == pytest.approx(0.5 ** resonant.n_atoms, rel=1e-12)


def test_mean_energy_equals_classical_hamiltonian(resonant, point):
    basis = build_full_basis(resonant, 40)
    h = build_hamiltonian(resonant, basis)
    c = coherent_vector(phase_to_labels(point, resonant), resonant, basis).coefficients
    mean = float(np.real(np.vdot(c, h.entries @ c)))
    assert mean == pytest.approx(hcl(point, resonant), rel=1e-9, abs=1e-9)


def test_coherent_vector_large_labels_do_not_overflow():
    params = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=60.0)
    cp = phase_to_labels(PhasePoint(q=14.0, p=3.0, jz=-20.0, phi=0.7), params)
    vec = coherent_vector(cp, params, build_basis(params, 200))
    assert np.all(np.isfinite(vec.coefficients))
    assert vec.capture == pytest.approx(1.0, abs=1e-6)


def test_uncertainty_relations(resonant, point):
    report = uncertainty_check(phase_to_labels(point, resonant), resonant)
    assert report.dq_dp == pytest.approx(0.5, abs=1e-10)
    assert report.dq == pytest.approx(math.sqrt(0.5), abs=1e-10)
    assert report.spin_variance == pytest.approx(resonant.j, abs=1e-9)
    assert report.boson_norm == pytest.approx(1.0, abs=1e-12)


def test_spreading_contour_reaches_level():
    params = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=10.0)
    surface = PoincareSurface(energy=-0.5 * params.j, params=params)
    center = surface.point(math.pi, -0.25)
    contour = spreading_contour(center, params, surface, n_directions=16)

    assert contour.phi.size == 16
    assert not contour.is_clipped
    np.testing.assert_allclose(contour.overlap, math.exp(-1.0), atol=1e-6)
    assert contour.area > 0
    for phi, x, q in zip(contour.phi, contour.jz_tilde, contour.q_plus):
        assert surface.contains(PhasePoint(q=q, p=0.0, jz=x * params.j, phi=phi), tol=1e-7)


def test_spreading_contour_clipped_near_ground_state(caplog):
    params = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=10.0)
    surface = PoincareSurface(energy=-2.1 * params.j, params=params)
    center = surface.point(math.pi, -0.25)
    with caplog.at_level("WARNING"):
        contour = spreading_contour(center, params, surface, n_directions=12)
    assert contour.is_clipped
    assert np.all(contour.overlap[contour.clipped] > math.exp(-1.0))
    assert "обрезан" in caplog.text


def test_spreading_contour_errors(resonant):
    below = PoincareSurface(energy=-3.0 * resonant.j, params=resonant)
    with pytest.raises(EmptyShellError):
        spreading_contour(PhasePoint(q=0.0, p=0.0, jz=0.0, phi=0.0), resonant, below)

    surface = PoincareSurface(energy=-1.0 * resonant.j, params=resonant)
    center = surface.point(math.pi, -0.25)
    shifted = PhasePoint(q=center.q, p=0.5, jz=center.jz, phi=center.phi)
    with pytest.raises(ParameterError):
        spreading_contour(shifted, resonant, surface)


def test_spreading_contour_area_scales_as_inverse_j():
    areas = {}
    for j in (20.0, 80.0):
        params = ModelParams(omega=1.0, omega0=1.0, gamma=1.0, j=j)
        surface = PoincareSurface(energy=-0.5 * j, params=params)
        contour = spreading_contour(surface.point(math.pi, -0.25), params, surface, n_directions=32)
        assert not contour.is_clipped
        areas[j] = contour.area
    assert areas[80.0] / areas[20.0] == pytest.approx(0.25, rel=0.2)
