# artifacts.py
"""
Artifacts - запись и чтение результатов расчетов
API: write_csv / read_csv (pandas, строки метаданных '# key: value'), write_json, file_sha256,
     write_manifest, dump_matrix
Основные возможности: точный круговой обмен чисел (17 значащих цифр), манифест с хэшами
     всех файлов каталога результатов
"""

import hashlib
import json
import logging
import math
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from core import __version__
from core.config.config import CSV_FLOAT_FORMAT
from core.model.dicke import HamiltonianMatrix

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MISSING_MARK = "nan"


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Тип {type(value).__name__} не сериализуется в JSON")


def _clean(value: Any):
    # JSON не допускает NaN/inf - заменяются на null / строку
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def write_json(path, data: Dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")
    return path


def read_json(path) -> Dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(frame: pd.DataFrame, path, metadata: Optional[Dict[str, Any]] = None) -> Path:
    """
    API: Запись таблицы с метаданными
    Вход: frame, path, metadata (пишутся строками '# key: <json>' перед заголовком)
    Выход: Path
    Логика: float_format %.17g - чтение возвращает те же числа; пропуски пишутся как nan
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for key, value in (metadata or {}).items():
            f.write(f"# {key}: {json.dumps(_clean(value), default=_json_default, sort_keys=True)}\n")
        frame.to_csv(f, index=False, float_format=CSV_FLOAT_FORMAT, na_rep=MISSING_MARK,
                     lineterminator="\n")
    logger.debug(f"CSV записан: {path} ({len(frame)} строк)")
    return path


def read_metadata(path) -> Dict[str, Any]:
    metadata = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, raw = line[1:].strip().partition(":")
            try:
                metadata[key.strip()] = json.loads(raw.strip())
            except json.JSONDecodeError:
                metadata[key.strip()] = raw.strip()
    return metadata


def read_csv(path) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """
    API: Чтение таблицы, записанной write_csv
    Вход: path
    Выход: (DataFrame, metadata)
    """
    frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    return frame, read_metadata(path)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(directory, command: str, config: Dict, seed: Optional[int],
                   timings: Dict[str, float], extra: Optional[Dict] = None) -> Path:
    """
    API: Манифест каталога результатов
    Вход: directory, command, config (эхо конфигурации), seed, timings, extra
    Выход: Path манифеста
    Логика: sha256 каждого файла каталога (кроме самого манифеста и журнала сканирования);
            эхо конфигурации и seed достаточны для повторного запуска
    """
    directory = Path(directory)
    hashes = {}
    for file in sorted(directory.rglob("*")):
        if file.is_file() and file.name != MANIFEST_NAME and not file.name.startswith("ledger"):
            hashes[str(file.relative_to(directory))] = file_sha256(file)
    manifest = {
        "command": command,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config,
        "seed": seed,
        "timings": timings,
        "artifacts": hashes,
    }
    if extra:
        manifest.update(extra)
    return write_json(directory / MANIFEST_NAME, manifest)


def dump_matrix(h: HamiltonianMatrix, path) -> Path:
    """
    API: Выгрузка гамильтониана тройками (row, col, value)
    Вход: h, path
    Выход: Path
    Логика: Первая строка - JSON-заголовок {omega, omega0, gamma, j, n_max, parity, dim};
            записывается верхний треугольник ненулевых элементов
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = np.nonzero(np.triu(h.entries))
    header = dict(h.params.as_dict(), n_max=h.basis.n_max, parity=h.basis.parity, dim=h.basis.dim)
    triplets = np.column_stack([rows, cols, h.entries[rows, cols]])
    np.savetxt(path, triplets, fmt=["%d", "%d", CSV_FLOAT_FORMAT], header=json.dumps(header, sort_keys=True),
               comments="# ")
    return path


def load_matrix(path) -> Tuple[np.ndarray, Dict]:
    """Обратное чтение троек в плотную симметричную матрицу"""
    with open(path, encoding="utf-8") as f:
        header = json.loads(f.readline()[2:])
    data = np.loadtxt(path, comments="#", ndmin=2)
    dim = int(header["dim"])
    matrix = np.zeros((dim, dim))
    rows, cols = data[:, 0].astype(int), data[:, 1].astype(int)
    matrix[rows, cols] = data[:, 2]
    matrix[cols, rows] = data[:, 2]
    return matrix, header
