# ledger.py
"""
Scan Ledger - журнал завершенных точек сканирования для возобновления
API: ScanLedger (SQLite-файл в каталоге результатов), ScanPoint
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, Tuple

from sqlalchemy import Column, Float, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

logger = logging.getLogger(__name__)

LedgerBase = declarative_base()

LEDGER_FILE = "ledger.sqlite"


class ScanPoint(LedgerBase):
    """
    API: Одна завершенная точка сетки
    Вход: job_hash (хэш задания), point_index, value (NULL для NaN), status, aux
    """
    __tablename__ = 'scan_points'

    job_hash = Column(String(64), primary_key=True)
    point_index = Column(Integer, primary_key=True)
    value = Column(Float, nullable=True)
    status = Column(String, nullable=False)
    aux = Column(Float, nullable=True)

    def __repr__(self):
        return f"<ScanPoint({self.point_index}) {self.status}>"


class ScanLedger:
    """
    API: Журнал точек одного задания
    Вход: directory (каталог результатов), job_hash
    Выход: None
    Логика: Запись строками сетки после завершения строки; единственный писатель - главный процесс
    """

    def __init__(self, directory: str, job_hash: str):
        path = Path(directory)
        path.mkdir(parents=True, exist_ok=True)
        self.path = path / LEDGER_FILE
        self.job_hash = job_hash
        self.engine = create_engine(f"sqlite:///{self.path}")
        LedgerBase.metadata.create_all(bind=self.engine)
        self.Session = sessionmaker(bind=self.engine)

    def completed(self) -> Dict[int, Tuple[float, str, float]]:
        db = self.Session()
        try:
            rows = db.query(ScanPoint).filter(ScanPoint.job_hash == self.job_hash).all()
            return {
                r.point_index: (
                    float("nan") if r.value is None else r.value,
                    r.status,
                    float("nan") if r.aux is None else r.aux,
                )
                for r in rows
            }
        finally:
            db.close()

    def record(self, results: Iterable[Tuple[int, float, str, float]]) -> None:
        db = self.Session()
        try:
            for index, value, status, aux in results:
                db.merge(ScanPoint(
                    job_hash=self.job_hash,
                    point_index=int(index),
                    value=None if value != value else float(value),
                    status=status,
                    aux=None if aux != aux else float(aux),
                ))
            db.commit()
        except Exception as e:
            logger.error(f"Ошибка записи в журнал сканирования {self.path}: {e}")
            db.rollback()
            raise
        finally:
            db.close()

    def clear(self) -> None:
        db = self.Session()
        try:
            db.query(ScanPoint).filter(ScanPoint.job_hash == self.job_hash).delete()
            db.commit()
        finally:
            db.close()

    def close(self) -> None:
        self.engine.dispose()
