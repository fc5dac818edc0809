# analytic_sp.py
"""
Regular SP Analytic - аналитическая вероятность выживания для регулярных состояний
API: detect_sequences, theta3, sp_sequence, sp_interference, sp_analytic
Основные возможности: разбиение компонент разложения на гауссовы последовательности,
     взвешенная аппроксимация огибающих, сумма вкладов последовательностей и интерференций
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional

import numpy as np

from core.config.config import (
    DELTA_E_PAIRS,
    MIN_FIT_QUALITY,
    SEQUENCE_FRAC_TOL,
    SEQUENCE_MIN_MEMBERS,
    SEQUENCE_THRESHOLD,
    THETA_EPS,
)
from core.model.dynamics import Decomposition, SPSeries
from core.model.errors import ParameterError, UnstructuredDecompositionError

logger = logging.getLogger(__name__)

MIN_COMPONENTS = 10
SPACING_CANDIDATES = 150
LOG_THETA_EPS = math.log(THETA_EPS)


@dataclass
class GaussianSequence:
    """
    API: Последовательность уровней с гауссовой огибающей весов
    Вход: members (индексы компонент, по возрастанию энергии), energies, weights,
          A, E_bar, sigma (параметры огибающей), omega1, e2 (по собственным энергиям), r2 (качество)
    Логика: t_D = ω₁/(|e₂| σ), бесконечно при e₂ = 0
    """
    members: np.ndarray
    energies: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    A: float
    E_bar: float
    sigma: float
    omega1: float
    e2: float
    r2: float

    @property
    def t_D(self) -> float:
        if self.e2 == 0:
            return math.inf
        return self.omega1 / (abs(self.e2) * self.sigma)

    @property
    def plateau(self) -> float:
        return self.A ** 2 * self.sigma * math.sqrt(math.pi) / self.omega1

    def envelope(self, energies) -> np.ndarray:
        energies = np.asarray(energies, dtype=float)
        return self.A * np.exp(-(energies - self.E_bar) ** 2 / (2 * self.sigma ** 2))

    def as_dict(self) -> Dict:
        return {"A": self.A, "E_bar": self.E_bar, "sigma": self.sigma, "omega1": self.omega1,
                "e2": self.e2, "t_D": self.t_D, "members": [int(m) for m in self.members],
                "R2": self.r2}


@dataclass
class SequenceSet:
    """
    API: Результат поиска последовательностей
    Вход: sequences, residual_weight (вес вне последовательностей), spacing_estimate
    """
    sequences: List[GaussianSequence]
    residual_weight: float
    spacing_estimate: float

    @property
    def M(self) -> int:
        return len(self.sequences)

    @property
    def unstructured(self) -> bool:
        return self.M == 0

    @property
    def fit_quality(self) -> List[float]:
        return [s.r2 for s in self.sequences]

    def as_dict(self) -> Dict:
        return {"M": self.M, "residual_weight": self.residual_weight,
                "spacing_estimate": self.spacing_estimate, "unstructured": self.unstructured,
                "sequences": [s.as_dict() for s in self.sequences]}


@dataclass
class InterferencePair:
    """
    API: Параметры интерференции последовательностей i < j
    Вход: i, j, delta_E (среднее E⁽ʲ⁾ − E⁽ⁱ⁾ по парам ближайших уровней), omega_ij,
          E_I (энергия максимума произведения огибающих), sigma_ij
    """
    i: int
    j: int
    delta_E: float
    omega_ij: float
    E_I: float
    sigma_ij: float


# ---------------------------------------------------------------------------
# Поиск последовательностей

def _spacing_estimate(energies: np.ndarray, weights: np.ndarray) -> float:
    """Шаг, при котором максимальна сумма w_i·w_j по парам (E_i, E_i + s)"""
    top = np.argsort(weights)[::-1][:SPACING_CANDIDATES]
    e = energies[top]
    w = weights[top]
    order = np.argsort(e)
    e, w = e[order], w[order]
    span = float(e[-1] - e[0])

    diffs = (e[None, :] - e[:, None])[np.triu_indices(e.size, k=1)]
    candidates = np.unique(diffs[(diffs > 0) & (diffs <= span / 2 + 1e-12)])
    if candidates.size == 0:
        raise ParameterError("Недостаточно компонент для оценки шага")

    best_score, best = -1.0, float(candidates[0])
    for s in candidates:
        target = e + s
        pos = np.clip(np.searchsorted(e, target), 1, e.size - 1)
        left, right = e[pos - 1], e[pos]
        nearest = np.where(np.abs(target - left) <= np.abs(right - target), pos - 1, pos)
        hit = np.abs(e[nearest] - target) <= 0.1 * s
        score = float(np.sum(w[hit] * w[nearest[hit]]))
        if score > best_score + 1e-15:
            best_score, best = score, float(s)
    return best


def _fit_gaussian(energies: np.ndarray, weights: np.ndarray):
    center = float(np.average(energies, weights=weights))
    x = energies - center
    c2, c1, c0 = np.polyfit(x, np.log(weights), 2, w=np.sqrt(weights))
    if c2 >= 0:
        return None
    sigma2 = -1.0 / (2 * c2)
    shift = c1 * sigma2
    amplitude = math.exp(c0 + shift * shift / (2 * sigma2))
    e_bar = center + shift
    model = amplitude * np.exp(-(energies - e_bar) ** 2 / (2 * sigma2))
    total = float(np.sum((weights - weights.mean()) ** 2))
    r2 = 1.0 - float(np.sum((weights - model) ** 2)) / total if total > 0 else 1.0
    return amplitude, e_bar, math.sqrt(sigma2), r2


def _local_parameters(energies: np.ndarray, e_bar: float):
    kmax = int(np.searchsorted(energies, e_bar, side="right")) - 1
    kmax = min(max(kmax, 1), energies.size - 2)
    omega1 = float(energies[kmax + 1] - energies[kmax])
    e2 = float((energies[kmax + 1] + energies[kmax - 1]) / 2 - energies[kmax])
    return omega1, e2


def detect_sequences(d: Decomposition, threshold: float = SEQUENCE_THRESHOLD,
                     frac_tol: float = SEQUENCE_FRAC_TOL, min_members: int = SEQUENCE_MIN_MEMBERS,
                     n_sequences: Optional[int] = None) -> SequenceSet:
    """
    API: Разбиение компонент на гауссовы последовательности
    Вход: d, threshold (доля от максимального веса), frac_tol (допуск экстраполяции в долях шага),
          min_members (4), n_sequences (ручное M, по умолчанию автоматически)
    Выход: SequenceSet; пустой (unstructured), если нет последовательности из ≥ min_members
    Логика: Компоненты выше порога по возрастанию энергии; компонента присоединяется к
            последовательности, линейная экстраполяция которой ближе всего (невязка ≤ frac_tol·шаг),
            иначе начинает новую; огибающая - взвешенный МНК по log w
    """
    selected = np.flatnonzero(d.weights >= threshold * float(d.weights.max()))
    if selected.size < MIN_COMPONENTS:
        raise ParameterError(f"Компонент выше порога {selected.size} < {MIN_COMPONENTS}")
    selected = selected[np.argsort(d.energies[selected], kind="stable")]
    energies = d.energies[selected]
    weights = d.weights[selected]
    spacing = _spacing_estimate(energies, weights)

    groups: List[List[int]] = []
    closed: List[bool] = []
    for pos, energy in enumerate(energies):
        best, best_residual = None, math.inf
        for g, members in enumerate(groups):
            if closed[g]:
                continue
            last = energies[members[-1]]
            step = last - energies[members[-2]] if len(members) > 1 else spacing
            predicted = last + step
            residual = abs(energy - predicted)
            if energy - predicted > frac_tol * step:
                closed[g] = True
                continue
            if residual <= frac_tol * step and residual < best_residual:
                best, best_residual = g, residual
        if best is None:
            groups.append([pos])
            closed.append(False)
        else:
            groups[best].append(pos)

    sequences: List[GaussianSequence] = []
    for members in groups:
        if len(members) < min_members:
            continue
        fit = _fit_gaussian(energies[members], weights[members])
        if fit is None:
            logger.debug(f"Огибающая не гауссова для последовательности из {len(members)} компонент")
            continue
        amplitude, e_bar, sigma, r2 = fit
        omega1, e2 = _local_parameters(energies[members], e_bar)
        sequences.append(GaussianSequence(
            members=selected[members], energies=energies[members], weights=weights[members],
            A=amplitude, E_bar=e_bar, sigma=sigma, omega1=omega1, e2=e2, r2=r2,
        ))

    sequences.sort(key=lambda s: float(s.weights.sum()), reverse=True)
    if n_sequences is not None:
        sequences = sequences[:n_sequences]
    sequences.sort(key=lambda s: s.E_bar)

    assigned = sum(float(s.weights.sum()) for s in sequences)
    residual = float(min(1.0, max(0.0, 1.0 - assigned)))
    result = SequenceSet(sequences=sequences, residual_weight=residual, spacing_estimate=spacing)
    if result.unstructured:
        logger.info("Разложение без гауссовых последовательностей (unstructured)")
    else:
        logger.info(f"Найдено последовательностей: {result.M}, остаточный вес {residual:.3e}")
    return result


# ---------------------------------------------------------------------------
# Тета-функция и вклады

def theta3(x, y):
    """
    API: Тета-функция Якоби Θ₃(x, y) = 1 + 2 Σ_{p≥1} y^(p²) cos(2px)
    Вход: x (фаза), y (ном в [0, 1)); допускается broadcasting массивов
    Выход: float или np.ndarray
    Логика: Ряд обрывается, когда y^(p²) < 1e−16 для наибольшего y
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y >= 1):
        raise ParameterError("Ном y должен лежать в [0, 1)")
    y_max = float(np.max(y)) if y.size else 0.0
    result = np.ones(np.broadcast(x, y).shape)
    if y_max > 0:
        p_max = int(math.ceil(math.sqrt(LOG_THETA_EPS / math.log(y_max))))
        with np.errstate(divide="ignore"):
            log_y = np.log(y)
        for p in range(1, p_max + 1):
            result = result + 2 * np.exp(p * p * log_y) * np.cos(2 * p * x)
    return float(result) if result.ndim == 0 else result


def sp_sequence(seq: GaussianSequence, t):
    """
    API: Вклад одной последовательности
    Вход: seq, t (скаляр или массив)
    Выход: (A² σ √π / ω₁) Θ₃(ω₁t/2, exp[−(ω₁/σ)²/4]·exp[−(t/t_D)²])
    """
    t = np.asarray(t, dtype=float)
    y = math.exp(-0.25 * (seq.omega1 / seq.sigma) ** 2) * np.exp(-(t / seq.t_D) ** 2)
    return seq.plateau * theta3(seq.omega1 * t / 2, y)


def _nearest_level(energies: np.ndarray, value: float) -> int:
    pos = int(np.clip(np.searchsorted(energies, value), 1, energies.size - 1))
    return pos - 1 if abs(value - energies[pos - 1]) <= abs(energies[pos] - value) else pos


def interference_pair(seqs: List[GaussianSequence], i: int, j: int,
                      n_pairs: int = DELTA_E_PAIRS) -> InterferencePair:
    """
    API: Параметры интерференции пары последовательностей
    Вход: seqs, i < j, n_pairs (число пар уровней для δE, 5)
    Выход: InterferencePair
    Логика: E_I = (Ē_i σ_j² + Ē_j σ_i²)/(σ_i² + σ_j²); уровни i, ближайшие к E_I, сопоставляются
            ближайшим уровням j; ω_ij - шаг i вокруг E_I
    """
    a, b = seqs[i], seqs[j]
    s2 = a.sigma ** 2 + b.sigma ** 2
    e_i = (a.E_bar * b.sigma ** 2 + b.E_bar * a.sigma ** 2) / s2

    ea, eb = a.energies, b.energies
    k_i = int(np.searchsorted(ea, e_i, side="right")) - 1
    k_i = min(max(k_i, 0), ea.size - 2)
    omega_ij = float(ea[k_i + 1] - ea[k_i])

    nearest_a = np.argsort(np.abs(ea - e_i), kind="stable")[:n_pairs]
    offsets = [eb[_nearest_level(eb, ea[k])] - ea[k] for k in nearest_a]
    delta_e = float(np.mean(offsets))

    sigma_ij = 2 * abs(a.e2) * a.sigma * b.sigma / (omega_ij * math.sqrt(s2))
    return InterferencePair(i=i, j=j, delta_E=delta_e, omega_ij=omega_ij, E_I=e_i, sigma_ij=sigma_ij)


def sp_interference(pair: InterferencePair, seqs: List[GaussianSequence], t):
    """
    API: Интерференционный вклад пары последовательностей
    Вход: pair, seqs, t (скаляр или массив)
    Выход: 2 A_i A_j √(2π) σ_i σ_j /(ω_ij √(σ_i²+σ_j²)) ·
           Σ_p exp[−(pω_ij + δE + Ē_i − Ē_j)²/(2(σ_i²+σ_j²))] exp[−(σ_ij p t)²/2] cos[(δE + pω_ij)t]
    Логика: Слагаемые p, у которых энергетический гауссов множитель < 1e−16, отбрасываются
    """
    a, b = seqs[pair.i], seqs[pair.j]
    t = np.asarray(t, dtype=float)
    s2 = a.sigma ** 2 + b.sigma ** 2
    prefactor = 2 * a.A * b.A * math.sqrt(2 * math.pi) * a.sigma * b.sigma / (pair.omega_ij * math.sqrt(s2))

    shift = pair.delta_E + a.E_bar - b.E_bar
    center = -shift / pair.omega_ij
    half_width = math.sqrt(-2 * s2 * LOG_THETA_EPS) / pair.omega_ij
    p = np.arange(math.floor(center - half_width), math.ceil(center + half_width) + 1)
    energy_factor = np.exp(-(p * pair.omega_ij + shift) ** 2 / (2 * s2))
    keep = energy_factor >= THETA_EPS
    p, energy_factor = p[keep], energy_factor[keep]

    tt = t.reshape(-1, 1)
    terms = energy_factor * np.exp(-0.5 * (pair.sigma_ij * p * tt) ** 2) \
        * np.cos((pair.delta_E + p * pair.omega_ij) * tt)
    result = prefactor * terms.sum(axis=1)
    return float(result[0]) if t.ndim == 0 else result.reshape(t.shape)


@dataclass
class AnalyticSP:
    """
    API: Аналитическая SP с разбивкой по слагаемым
    Вход: series (SPSeries), terms ({"seq_1": ..., "int_1_2": ...}), pairs
    """
    series: SPSeries
    terms: Dict[str, np.ndarray] = field(repr=False)
    pairs: List[InterferencePair] = field(default_factory=list)


def sp_analytic(ss: SequenceSet, times, min_quality: float = MIN_FIT_QUALITY) -> AnalyticSP:
    """
    API: Полная аналитическая SP = Σ_i SP⁽ⁱ⁾ + Σ_{i<j} SP_I⁽ⁱʲ⁾
    Вход: ss, times, min_quality (порог R² для каждой последовательности, 0.9)
    Выход: AnalyticSP
    Логика: Неструктурированное разложение или плохая аппроксимация - UnstructuredDecompositionError
    """
    if ss.unstructured:
        raise UnstructuredDecompositionError("Нет гауссовых последовательностей")
    poor = [k + 1 for k, r2 in enumerate(ss.fit_quality) if r2 < min_quality]
    if poor:
        raise UnstructuredDecompositionError(
            f"Качество аппроксимации ниже {min_quality} у последовательностей {poor}"
        )
    times = np.asarray(times, dtype=float)

    terms: Dict[str, np.ndarray] = {}
    total = np.zeros(times.size)
    for k, seq in enumerate(ss.sequences, start=1):
        terms[f"seq_{k}"] = np.atleast_1d(sp_sequence(seq, times))
        total += terms[f"seq_{k}"]

    pairs = [interference_pair(ss.sequences, i, j) for i, j in combinations(range(ss.M), 2)]
    for pair in pairs:
        name = f"int_{pair.i + 1}_{pair.j + 1}"
        terms[name] = np.atleast_1d(sp_interference(pair, ss.sequences, times))
        total += terms[name]

    plateau = sum(seq.plateau for seq in ss.sequences)
    return AnalyticSP(series=SPSeries(times=times, sp=total, plateau=plateau), terms=terms, pairs=pairs)
