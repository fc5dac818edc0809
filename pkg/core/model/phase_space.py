# phase_space.py
"""
Phase Space - общие типы классического фазового пространства
API: PhasePoint - точка (q, p, j_z, φ), общая для когерентных состояний и классической динамики
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhasePoint:
    """
    API: Точка классического фазового пространства R² × S²
    Вход: q, p (бозонные квадратуры), jz (проекция псевдоспина), phi (азимутальный угол)
    Выход: None (неизменяемый объект)
    Логика: Канонические пары (φ, j_z) и (q, p); |jz| ≤ J проверяется там, где известен J
    """
    q: float
    p: float
    jz: float
    phi: float

    def as_array(self) -> np.ndarray:
        """Вектор состояния в порядке интегратора (φ, j_z, q, p)"""
        return np.array([self.phi, self.jz, self.q, self.p], dtype=float)

    @classmethod
    def from_array(cls, y) -> "PhasePoint":
        return cls(q=float(y[2]), p=float(y[3]), jz=float(y[1]), phi=float(y[0]))
