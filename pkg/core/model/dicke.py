# dicke.py
"""
Dicke Model Core - параметры модели и матрица гамильтониана
API: ModelParams, BasisSpec, HamiltonianMatrix; построение базиса с четностью и плотной матрицы
Основные возможности: критическая связь, классическое основное состояние, энергия ESQPT
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from core.config.config import MAX_DIM
from core.model.errors import ParameterError
from core.model.phase_space import PhasePoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    """
    API: Физические константы модели Дике (ħ = 1)
    Вход: omega (частота поля), omega0 (атомное расщепление), gamma (связь), j (псевдоспин J)
    Выход: None (неизменяемый объект, валидируется при создании)
    Логика: omega, omega0 > 0; gamma ≥ 0; j > 0 и 2j целое
    """
    omega: float
    omega0: float
    gamma: float
    j: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ParameterError(f"omega должно быть > 0, получено {self.omega}")
        if not self.omega0 > 0:
            raise ParameterError(f"omega0 должно быть > 0, получено {self.omega0}")
        if not self.gamma >= 0:
            raise ParameterError(f"gamma должно быть ≥ 0, получено {self.gamma}")
        if not self.j > 0:
            raise ParameterError(f"j должно быть > 0, получено {self.j}")
        if abs(2 * self.j - round(2 * self.j)) > 1e-12:
            raise ParameterError(f"2j должно быть целым, получено j={self.j}")

    @property
    def n_atoms(self) -> int:
        return int(round(2 * self.j))

    def critical_coupling(self) -> float:
        return math.sqrt(self.omega * self.omega0) / 2

    def as_dict(self) -> Dict[str, float]:
        return {"omega": self.omega, "omega0": self.omega0, "gamma": self.gamma, "j": self.j}


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """
    API: Обрезанный базис |n⟩ ⊗ |J, m⟩
    Вход: n_max (макс. число бозонов), parity (+1 или None для полного базиса), j, массивы n и m
    Выход: None
    Логика: Лексикографический порядок (n, затем m); для parity=+1 только (m + J + n) четное
    """
    n_max: int
    parity: Optional[int]
    j: float
    n: np.ndarray = field(repr=False)
    m: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return int(self.n.size)

    @property
    def k(self) -> np.ndarray:
        """Целочисленный индекс спина k = m + J ∈ [0, 2J]"""
        return np.rint(self.m + self.j).astype(int)

    def index_map(self) -> Dict[Tuple[int, int], int]:
        return {(int(n), int(k)): i for i, (n, k) in enumerate(zip(self.n, self.k))}

    def states(self):
        return [(int(n), float(m)) for n, m in zip(self.n, self.m)]

    def header(self) -> Dict:
        return {"n_max": self.n_max, "parity": self.parity, "dim": self.dim}


@dataclass(frozen=True, eq=False)
class HamiltonianMatrix:
    """
    API: Плотная вещественная симметричная матрица гамильтониана в базисе BasisSpec
    Вход: params, basis, entries (dim × dim, только для чтения)
    Выход: None
    """
    params: ModelParams
    basis: BasisSpec
    entries: np.ndarray = field(repr=False)

    def norm(self) -> float:
        """Норма по строкам; для симметричной матрицы не меньше спектральной"""
        return float(np.max(np.sum(np.abs(self.entries), axis=1)))

    def trace(self) -> float:
        return float(np.trace(self.entries))


def critical_coupling(params: ModelParams) -> float:
    """
    API: Критическая связь квантового фазового перехода
    Вход: params (ModelParams)
    Выход: float, γ_cr = √(ω ω₀)/2
    """
    return params.critical_coupling()


def _enumerate_basis(params: ModelParams, n_max: int, parity: Optional[int]) -> BasisSpec:
    if n_max < 0:
        raise ParameterError(f"n_max должно быть ≥ 0, получено {n_max}")
    two_j = params.n_atoms
    ns, ms = [], []
    for n in range(n_max + 1):
        for k in range(two_j + 1):
            if parity is not None and (k + n) % 2 != 0:
                continue
            ns.append(n)
            ms.append(k - params.j)
    basis = BasisSpec(
        n_max=n_max,
        parity=parity,
        j=params.j,
        n=np.asarray(ns, dtype=int),
        m=np.asarray(ms, dtype=float),
    )
    if basis.dim == 0:
        raise ParameterError("Пустой базис")
    return basis


def build_basis(params: ModelParams, n_max: int, parity: int = 1) -> BasisSpec:
    """
    API: Построение базиса положительной четности
    Вход: params, n_max (≥ 0), parity (поддерживается только +1)
    Выход: BasisSpec с парами (n, m), где m + J + n четно
    Логика: Перебор n, затем m от −J до J; отбор по правилу четности
    """
    if parity != 1:
        raise ParameterError(f"Поддерживается только положительная четность, получено {parity}")
    return _enumerate_basis(params, n_max, parity=1)


def build_full_basis(params: ModelParams, n_max: int) -> BasisSpec:
    """
    API: Полный (непроектированный) базис обоих секторов четности
    Вход: params, n_max
    Выход: BasisSpec с parity=None
    Логика: Используется для точных тождеств когерентных состояний (норма, средняя энергия)
    """
    return _enumerate_basis(params, n_max, parity=None)


def build_hamiltonian(params: ModelParams, basis: BasisSpec, max_dim: int = MAX_DIM) -> HamiltonianMatrix:
    """
    API: Сборка матрицы гамильтониана Дике
    Вход: params, basis, max_dim (защита от переполнения памяти)
    Выход: HamiltonianMatrix (симметричная, только для чтения)
    Логика: Диагональ ω n + ω₀ m; связи (n, m) ↔ (n+1, m±1) с амплитудой
            (γ/√N) √(n+1) √(J(J+1) − m m'); переходы за n_max отбрасываются
    """
    if abs(basis.j - params.j) > 1e-12:
        raise ParameterError(f"Базис построен для J={basis.j}, параметры для J={params.j}")
    if basis.dim > max_dim:
        raise ParameterError(f"Размерность {basis.dim} превышает лимит {max_dim}")

    dim = basis.dim
    j = params.j
    h = np.zeros((dim, dim), dtype=float)
    h[np.arange(dim), np.arange(dim)] = params.omega * basis.n + params.omega0 * basis.m

    coupling = params.gamma / math.sqrt(params.n_atoms)
    if coupling != 0.0:
        index = basis.index_map()
        casimir = j * (j + 1)
        for i, (n, k) in enumerate(zip(basis.n, basis.k)):
            m = k - j
            for dk in (1, -1):
                target = index.get((int(n) + 1, int(k) + dk))
                if target is None:
                    continue
                m_new = m + dk
                value = coupling * math.sqrt(n + 1) * math.sqrt(casimir - m * m_new)
                h[i, target] = value
                h[target, i] = value

    h.flags.writeable = False
    logger.debug(f"Гамильтониан собран: dim={dim}, n_max={basis.n_max}, parity={basis.parity}")
    return HamiltonianMatrix(params=params, basis=basis, entries=h)


def _classical_energy_profile(params: ModelParams, x: float) -> float:
    # минимум по q при p = 0, φ = π
    return params.j * (-(2 * params.gamma ** 2 / params.omega) * (1 - x * x) + params.omega0 * x)


def classical_ground_state(params: ModelParams) -> Tuple[float, PhasePoint]:
    """
    API: Глобальный минимум классического гамильтониана
    Вход: params
    Выход: (E_GS, PhasePoint минимума)
    Логика: Аналитически p = 0, φ = π, q = 2γ√J√(1−x²)/ω; по x = j_z/J аналитическая
            точка −ωω₀/(4γ²) уточняется одномерной минимизацией на [−1, 1]
    """
    gamma_cr = params.critical_coupling()
    if params.gamma > gamma_cr:
        x_analytic = -params.omega * params.omega0 / (4 * params.gamma ** 2)
    else:
        x_analytic = -1.0

    refined = minimize_scalar(
        lambda x: _classical_energy_profile(params, x),
        bounds=(-1.0, 1.0),
        method="bounded",
        options={"xatol": 1e-12},
    )
    candidates = [x_analytic, -1.0]
    if refined.success:
        candidates.append(float(refined.x))
    x_best = min(candidates, key=lambda x: _classical_energy_profile(params, x))
    energy = _classical_energy_profile(params, x_best)

    s = math.sqrt(max(0.0, 1 - x_best * x_best))
    q = 2 * params.gamma * math.sqrt(params.j) * s / params.omega
    point = PhasePoint(q=q, p=0.0, jz=x_best * params.j, phi=math.pi)
    return energy, point


def ground_state_energy_classical(params: ModelParams) -> float:
    """
    API: Энергия классического основного состояния
    Вход: params
    Выход: float (например −2.125 J при ω = ω₀ = γ = 1)
    """
    energy, _ = classical_ground_state(params)
    return energy


def esqpt_energy(params: ModelParams) -> float:
    """
    API: Критическая энергия ESQPT
    Вход: params с γ > γ_cr
    Выход: float, −ω₀ J
    Логика: Ниже критической связи ESQPT отсутствует - ошибка
    """
    if params.gamma <= params.critical_coupling():
        raise ParameterError(
            f"ESQPT отсутствует: gamma={params.gamma} ≤ gamma_cr={params.critical_coupling()}"
        )
    return -params.omega0 * params.j
