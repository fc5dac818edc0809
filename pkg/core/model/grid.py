# grid.py
"""
Surface Grid - решетка начальных условий на поверхности Пуанкаре и карты значений
API: SurfaceGrid (центры ячеек в (φ, j̃z)), ScanMap (значение и статус в каждой точке)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, Tuple

import numpy as np
import pandas as pd

from core.model.classical import PoincareSurface
from core.model.errors import GridMismatchError, ParameterError

logger = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_MISSING = "missing"
STATUS_TIMEOUT = "timeout"
STATUS_PARTIAL = "partial"
STATUS_ERROR = "error"


@dataclass(frozen=True)
class SurfaceGrid:
    """
    API: Равномерная решетка n_phi × n_jz на плоскости (φ, j̃z)
    Вход: n_phi, n_jz
    Выход: None
    Логика: Центры ячеек φ_i = 2π(i + 0.5)/n_phi, j̃z_r = −1 + 2(r + 0.5)/n_jz;
            индекс точки = r·n_phi + i (строки - по j̃z)
    """
    n_phi: int
    n_jz: int

    def __post_init__(self):
        if self.n_phi < 1 or self.n_jz < 1:
            raise ParameterError(f"Размер сетки должен быть ≥ 1, получено {self.n_phi}×{self.n_jz}")

    @classmethod
    def square(cls, n: int) -> "SurfaceGrid":
        return cls(n_phi=n, n_jz=n)

    @property
    def size(self) -> int:
        return self.n_phi * self.n_jz

    @property
    def phi_centers(self) -> np.ndarray:
        return 2 * math.pi * (np.arange(self.n_phi) + 0.5) / self.n_phi

    @property
    def jz_centers(self) -> np.ndarray:
        return -1.0 + 2.0 * (np.arange(self.n_jz) + 0.5) / self.n_jz

    def coordinates(self, index: int) -> Tuple[float, float]:
        row, col = divmod(index, self.n_phi)
        return float(self.phi_centers[col]), float(self.jz_centers[row])

    def row_indices(self, row: int) -> range:
        return range(row * self.n_phi, (row + 1) * self.n_phi)

    def iter_points(self) -> Iterator[Tuple[int, float, float]]:
        for index in range(self.size):
            phi, x = self.coordinates(index)
            yield index, phi, x

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Плоские массивы (phi, jz_tilde) в порядке индексов"""
        phi, x = np.meshgrid(self.phi_centers, self.jz_centers)
        return phi.ravel(), x.ravel()

    def shell_mask(self, surface: PoincareSurface) -> np.ndarray:
        phi, x = self.mesh()
        return surface.shell_mask(phi, x)

    def spec(self) -> Dict[str, int]:
        return {"n_phi": self.n_phi, "n_jz": self.n_jz}


@dataclass
class ScanMap:
    """
    API: Скалярное поле на решетке
    Вход: grid, values (NaN для отсутствующих точек), status (по точкам), energy, task, aux
    """
    grid: SurfaceGrid
    values: np.ndarray
    status: np.ndarray
    energy: float = float("nan")
    task: str = ""
    aux: Dict = field(default_factory=dict)

    @classmethod
    def empty(cls, grid: SurfaceGrid, energy: float = float("nan"), task: str = "") -> "ScanMap":
        return cls(grid=grid, values=np.full(grid.size, np.nan),
                   status=np.full(grid.size, STATUS_MISSING, dtype=object), energy=energy, task=task)

    @property
    def present(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def n_present(self) -> int:
        return int(np.count_nonzero(self.present))

    def fraction_above(self, threshold: float) -> float:
        vals = self.values[self.present]
        if vals.size == 0:
            return float("nan")
        return float(np.mean(vals > threshold))

    def as_matrix(self) -> np.ndarray:
        return self.values.reshape(self.grid.n_jz, self.grid.n_phi)

    def check_same_grid(self, other: "ScanMap") -> None:
        if self.grid != other.grid:
            raise GridMismatchError(f"Сетки различаются: {self.grid.spec()} и {other.grid.spec()}")

    def to_frame(self) -> pd.DataFrame:
        phi, x = self.grid.mesh()
        return pd.DataFrame({"phi": phi, "jz_tilde": x, "value": self.values,
                             "status": self.status.astype(str)})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, grid: SurfaceGrid, energy: float = float("nan"),
                   task: str = "") -> "ScanMap":
        if len(frame) != grid.size:
            raise GridMismatchError(f"В таблице {len(frame)} точек, в сетке {grid.size}")
        phi, x = grid.mesh()
        if not (np.allclose(frame["phi"].to_numpy(), phi) and np.allclose(frame["jz_tilde"].to_numpy(), x)):
            raise GridMismatchError("Координаты таблицы не совпадают с сеткой")
        return cls(grid=grid, values=frame["value"].to_numpy(dtype=float),
                   status=frame["status"].to_numpy(dtype=object), energy=energy, task=task)

    @staticmethod
    def infer_grid(frame: pd.DataFrame) -> SurfaceGrid:
        grid = SurfaceGrid(n_phi=int(frame["phi"].nunique()), n_jz=int(frame["jz_tilde"].nunique()))
        if len(frame) != grid.size:
            raise GridMismatchError(
                f"В таблице {len(frame)} точек, а координаты задают сетку {grid.n_phi}x{grid.n_jz}"
            )
        return grid
