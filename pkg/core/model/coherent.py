# coherent.py
"""
Coherent States - когерентные состояния |z, α⟩ = |z⟩ ⊗ |α⟩
API: phase_to_labels, labels_to_phase, coherent_vector, overlap, spreading_contour, uncertainty_check
Основные возможности: вычисление в логарифмической шкале (J ≥ 50, n ≥ 150 без переполнения),
     аналитический вес сектора положительной четности, контур e^(−1) на поверхности Пуанкаре
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from core.config.config import CONTOUR_DIRECTIONS, CONTOUR_XTOL, TRUNCATION_WARNING
from core.model.classical import PoincareSurface
from core.model.dicke import BasisSpec, ModelParams
from core.model.errors import EmptyShellError, ParameterError, TruncationError
from core.model.phase_space import PhasePoint

logger = logging.getLogger(__name__)

OK = "ok"
TRUNCATED = "truncated"


@dataclass(frozen=True)
class CoherentParams:
    """
    API: Метки когерентного состояния
    Вход: z (спиновая метка), alpha (бозонная метка), north_pole (предел z → ∞, состояние |J, +J⟩)
    """
    z: complex
    alpha: complex
    north_pole: bool = False

    def bloch_vector(self) -> np.ndarray:
        if self.north_pole:
            return np.array([0.0, 0.0, 1.0])
        r2 = abs(self.z) ** 2
        return np.array([2 * self.z.real, 2 * self.z.imag, r2 - 1.0]) / (1.0 + r2)


@dataclass(eq=False)
class CoherentVector:
    """
    API: Коэффициенты когерентного состояния в базисе BasisSpec
    Вход: coefficients (complex), basis, labels, norm_captured (Σ|c|² в обрезанном базисе),
          parity_weight (точный вес сектора базиса), status ("ok" | "truncated")
    """
    coefficients: np.ndarray = field(repr=False)
    basis: BasisSpec = field(repr=False)
    labels: CoherentParams
    norm_captured: float
    parity_weight: float
    status: str = OK

    @property
    def capture(self) -> float:
        """Доля веса сектора, попавшая в обрезанный базис"""
        if self.parity_weight <= 0.0:
            return 0.0
        return self.norm_captured / self.parity_weight


def phase_to_labels(pt: PhasePoint, params: ModelParams, allow_pole: bool = False) -> CoherentParams:
    """
    API: Отображение точки фазового пространства в метки (z, α)
    Вход: pt, params, allow_pole (разрешить j_z = +J как предельное состояние)
    Выход: CoherentParams
    Логика: z = √((1 + j_z/J)/(1 − j_z/J)) e^(−iφ), α = (q + ip)/√2
    """
    x = pt.jz / params.j
    if abs(x) > 1 + 1e-12:
        raise ParameterError(f"|j_z| = {abs(pt.jz)} > J = {params.j}")
    alpha = complex(pt.q, pt.p) / math.sqrt(2)
    if x >= 1.0:
        if not allow_pole:
            raise ParameterError("j_z = +J: северный полюс требует флага allow_pole")
        return CoherentParams(z=complex(math.inf, 0.0), alpha=alpha, north_pole=True)
    x = max(x, -1.0)
    modulus = math.sqrt((1 + x) / (1 - x))
    z = modulus * complex(math.cos(pt.phi), -math.sin(pt.phi))
    return CoherentParams(z=z, alpha=alpha)


def labels_to_phase(cp: CoherentParams, params: ModelParams) -> PhasePoint:
    """
    API: Обратное отображение (z, α) → (q, p, j_z, φ)
    Вход: cp, params
    Выход: PhasePoint с φ ∈ [0, 2π)
    """
    q = math.sqrt(2) * cp.alpha.real
    p = math.sqrt(2) * cp.alpha.imag
    if cp.north_pole:
        return PhasePoint(q=q, p=p, jz=params.j, phi=0.0)
    r2 = abs(cp.z) ** 2
    x = (r2 - 1) / (r2 + 1)
    phi = 0.0 if cp.z == 0 else math.fmod(-math.atan2(cp.z.imag, cp.z.real), 2 * math.pi)
    if phi < 0:
        phi += 2 * math.pi
    return PhasePoint(q=q, p=p, jz=x * params.j, phi=phi)


def _boson_amplitudes(alpha: complex, n: np.ndarray) -> np.ndarray:
    n = np.asarray(n)
    if alpha == 0:
        return (n == 0).astype(complex)
    log_mag = -abs(alpha) ** 2 / 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag + 1j * n * np.angle(alpha))


def _spin_amplitudes(cp: CoherentParams, j: float, k: np.ndarray) -> np.ndarray:
    k = np.asarray(k)
    two_j = int(round(2 * j))
    if cp.north_pole:
        return (k == two_j).astype(complex)
    if cp.z == 0:
        return (k == 0).astype(complex)
    log_binom = gammaln(two_j + 1) - gammaln(k + 1) - gammaln(two_j - k + 1)
    log_mag = -j * math.log1p(abs(cp.z) ** 2) + 0.5 * log_binom + k * math.log(abs(cp.z))
    return np.exp(log_mag + 1j * k * np.angle(cp.z))


def parity_weight(cp: CoherentParams, params: ModelParams) -> float:
    """
    API: Вес когерентного состояния в секторе положительной четности
    Вход: cp, params
    Выход: float, (1 + e^(−2|α|²) ((1 − |z|²)/(1 + |z|²))^(2J))/2
    Логика: Оператор четности переводит |z, α⟩ в |−z, −α⟩
    """
    if cp.north_pole:
        spin_factor = (-1.0) ** params.n_atoms
    else:
        r2 = abs(cp.z) ** 2
        spin_factor = ((1 - r2) / (1 + r2)) ** params.n_atoms
    return 0.5 * (1.0 + math.exp(-2 * abs(cp.alpha) ** 2) * spin_factor)


def coherent_vector(cp: CoherentParams, params: ModelParams, basis: BasisSpec) -> CoherentVector:
    """
    API: Коэффициенты |z, α⟩ в обрезанном базисе
    Вход: cp, params, basis (сектор четности или полный базис)
    Выход: CoherentVector
    Логика: ⟨n|α⟩ ⟨J,m|z⟩ в логарифмической шкале, фазы n·arg α + (J+m)·arg z отдельно;
            при недоборе веса сектора больше 1e−4 - статус "truncated" и предупреждение
    """
    if abs(basis.j - params.j) > 1e-12:
        raise ParameterError(f"Базис построен для J={basis.j}, параметры для J={params.j}")
    coefficients = _boson_amplitudes(cp.alpha, basis.n) * _spin_amplitudes(cp, params.j, basis.k)
    norm_captured = float(np.sum(np.abs(coefficients) ** 2))
    weight = parity_weight(cp, params) if basis.parity == 1 else 1.0

    vec = CoherentVector(coefficients=coefficients, basis=basis, labels=cp,
                         norm_captured=norm_captured, parity_weight=weight)
    if vec.capture < 1 - TRUNCATION_WARNING:
        vec.status = TRUNCATED
        logger.warning(f"Обрезание n_max={basis.n_max} захватывает {vec.capture:.6f} веса состояния")
    return vec


def overlap(a: CoherentParams, b: CoherentParams, params: ModelParams) -> float:
    """
    API: Перекрытие |⟨z α|z₀ α₀⟩|²
    Вход: a, b, params
    Выход: float ∈ [0, 1]
    Логика: exp(−|α − α₀|²) · ((1 + n·n₀)/2)^(2J), n - вектор Блоха метки
            (равно |1 + z̄z₀|^(4J)/[(1+|z|²)(1+|z₀|²)]^(2J), включая полюс)
    """
    boson = math.exp(-abs(a.alpha - b.alpha) ** 2)
    cos_half = (1.0 + float(np.dot(a.bloch_vector(), b.bloch_vector()))) / 2
    cos_half = min(1.0, max(0.0, cos_half))
    return boson * cos_half ** params.n_atoms


@dataclass
class Contour:
    """
    API: Контур перекрытия e^(−1) на плоскости (φ, j̃z)
    Вход: center, j, phi / jz_tilde / q_plus / overlap (по направлениям), clipped (граница оболочки)
    """
    center: PhasePoint
    j: float
    phi: np.ndarray
    jz_tilde: np.ndarray
    q_plus: np.ndarray
    overlap: np.ndarray
    clipped: np.ndarray

    @property
    def is_clipped(self) -> bool:
        return bool(np.any(self.clipped))

    @property
    def area(self) -> float:
        """Площадь многоугольника в плоскости (φ, j̃z)"""
        x, y = self.phi, self.jz_tilde
        return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def spreading_contour(center: PhasePoint, params: ModelParams, surface: PoincareSurface,
                      n_directions: int = CONTOUR_DIRECTIONS,
                      xtol: float = CONTOUR_XTOL) -> Contour:
    """
    API: Контур, на котором перекрытие с центром падает до e^(−1)
    Вход: center (на поверхности), params, surface, n_directions (64), xtol (1e−10)
    Выход: Contour
    Логика: Лучи из центра в плоскости (φ, j̃z); радиус растет геометрически до смены знака
            overlap − e^(−1), затем brentq; если раньше встречена граница оболочки -
            точка обрезается на границе и помечается
    """
    if surface.q_plus(center.jz, center.phi) is None:
        raise EmptyShellError(f"Центр вне оболочки E={surface.energy}")
    if not surface.contains(center):
        raise ParameterError("Центр контура не лежит на поверхности p = 0, q = q₊")

    level = math.exp(-1.0)
    c_labels = phase_to_labels(center, params)
    x_c = center.jz / params.j
    s_c = math.sqrt(max(1e-12, 1 - x_c * x_c))

    def point_at(theta: float, r: float) -> Optional[PhasePoint]:
        x = x_c + r * math.sin(theta) * s_c
        if not -1.0 < x < 1.0:
            return None
        return surface.point(center.phi + r * math.cos(theta) / s_c, x)

    def excess(theta: float, r: float) -> float:
        pt = point_at(theta, r)
        return overlap(c_labels, phase_to_labels(pt, params), params) - level

    phis, xs, qs, values, clipped = [], [], [], [], []
    r_start = 0.05 / math.sqrt(params.j)
    for theta in np.linspace(0.0, 2 * math.pi, n_directions, endpoint=False):
        r_lo, r_hi = 0.0, r_start
        edge = False
        while True:
            if point_at(theta, r_hi) is None:
                # граница оболочки между r_lo и r_hi
                a, b = r_lo, r_hi
                while b - a > xtol:
                    mid = 0.5 * (a + b)
                    if point_at(theta, mid) is None:
                        b = mid
                    else:
                        a = mid
                r_hi = a
                edge = excess(theta, r_hi) > 0
                break
            if excess(theta, r_hi) < 0:
                break
            r_lo, r_hi = r_hi, r_hi * 1.5
            if r_hi > 4 * math.pi:
                r_hi, edge = r_lo, True
                break

        r = r_hi if edge else brentq(lambda rr: excess(theta, rr), r_lo, r_hi, xtol=xtol)
        pt = point_at(theta, r)
        phis.append(pt.phi)
        xs.append(pt.jz / params.j)
        qs.append(pt.q)
        values.append(overlap(c_labels, phase_to_labels(pt, params), params))
        clipped.append(edge)

    contour = Contour(center=center, j=params.j, phi=np.array(phis), jz_tilde=np.array(xs),
                      q_plus=np.array(qs), overlap=np.array(values), clipped=np.array(clipped))
    if contour.is_clipped:
        logger.warning(f"Контур обрезан границей оболочки в {int(contour.clipped.sum())} направлениях")
    return contour


@dataclass
class UncertaintyReport:
    dq: float
    dp: float
    spin_variance: float
    boson_norm: float

    @property
    def dq_dp(self) -> float:
        return self.dq * self.dp


def uncertainty_check(cp: CoherentParams, params: ModelParams, n_max: Optional[int] = None) -> UncertaintyReport:
    """
    API: Соотношения неопределенностей когерентного состояния
    Вход: cp, params, n_max (по умолчанию |α|² + 10√(|α|²+1) + 10)
    Выход: UncertaintyReport (Δq Δp = 1/2, Δ² = ΔJx² + ΔJy² + ΔJz² = J)
    Логика: Моменты из явных векторов коэффициентов бозонного и спинового множителей
    """
    a2 = abs(cp.alpha) ** 2
    if n_max is None:
        n_max = int(math.ceil(a2 + 10 * math.sqrt(a2 + 1))) + 10
    n = np.arange(n_max + 1)
    b = _boson_amplitudes(cp.alpha, n)
    boson_norm = float(np.sum(np.abs(b) ** 2))
    if boson_norm < 1 - TRUNCATION_WARNING:
        raise TruncationError(f"n_max={n_max} захватывает {boson_norm:.6f} бозонного веса")
    b = b / math.sqrt(boson_norm)

    sqrt_n = np.sqrt(n[1:])
    mean_a = np.sum(np.conj(b[:-1]) * b[1:] * sqrt_n)
    mean_a2 = np.sum(np.conj(b[:-2]) * b[2:] * np.sqrt(n[2:] * (n[2:] - 1)))
    mean_n = np.sum(np.abs(b) ** 2 * n)
    mean_q = math.sqrt(2) * mean_a.real
    mean_p = math.sqrt(2) * mean_a.imag
    var_q = (2 * mean_a2.real + 2 * mean_n + 1) / 2 - mean_q ** 2
    var_p = (-2 * mean_a2.real + 2 * mean_n + 1) / 2 - mean_p ** 2

    j = params.j
    k = np.arange(params.n_atoms + 1)
    m = k - j
    s = _spin_amplitudes(cp, j, k)
    s = s / math.sqrt(float(np.sum(np.abs(s) ** 2)))
    probs = np.abs(s) ** 2
    mean_jz = float(np.sum(probs * m))
    mean_jz2 = float(np.sum(probs * m * m))
    ladder = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    mean_jplus = np.sum(np.conj(s[1:]) * s[:-1] * ladder)
    mean_jx, mean_jy = mean_jplus.real, mean_jplus.imag
    # ⟨Jx²⟩ + ⟨Jy²⟩ = J(J+1) − ⟨Jz²⟩
    spin_variance = (j * (j + 1) - mean_jz2) - mean_jx ** 2 - mean_jy ** 2 + (mean_jz2 - mean_jz ** 2)

    return UncertaintyReport(dq=math.sqrt(max(var_q, 0.0)), dp=math.sqrt(max(var_p, 0.0)),
                             spin_variance=float(spin_variance), boson_norm=boson_norm)
