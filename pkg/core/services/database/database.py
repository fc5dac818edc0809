# database.py
"""
Database Module - журнал запусков и событий
API: SQLAlchemy-модели LogEntry и RunRecord, CRUD-операции журнала
Основные возможности: автоматическое логирование с именем процедуры-источника, учет запусков CLI
"""

import inspect
import logging
import uuid
from datetime import datetime, timedelta, timezone
from typing import Dict, List, Optional

from sqlalchemy import Column, DateTime, Integer, String, Text, case, create_engine, func
from sqlalchemy.orm import declarative_base, sessionmaker
from sqlalchemy.pool import StaticPool

from core.config.config import DATABASE_URL

logger = logging.getLogger(__name__)

Base = declarative_base()


class LogEntry(Base):
    """
    API: Модель записи лога
    Вход: None (создается через конструктор)
    Выход: None (хранит данные лога)
    Логика: Автоматически генерирует ID и timestamp при создании
    """
    __tablename__ = 'logs'

    id = Column(String(36), primary_key=True, default=lambda: str(uuid.uuid4()))
    level = Column(String)  # INFO, ERROR, DEBUG, WARNING
    message = Column(Text)
    run_id = Column(String(36))
    procedure = Column(String)  # имя процедуры-источника
    timestamp = Column(DateTime, default=lambda: datetime.now(timezone.utc))

    def __repr__(self):
        return f"<Log({self.level}) {self.message[:50]}...>"


class RunRecord(Base):
    """
    API: Модель запуска команды CLI
    Вход: None (создается через конструктор)
    Выход: None (хранит данные запуска)
    Логика: Статус, код выхода, тип ошибки и длительность каждого запуска
    """
    __tablename__ = 'runs'

    id = Column(String(36), primary_key=True, default=lambda: str(uuid.uuid4()))
    command = Column(String, nullable=False)  # spectrum, survival, poincare, ...
    config_hash = Column(String(64))
    status = Column(String, default="running")  # running, ok, failed
    exit_code = Column(Integer)
    error_type = Column(String)  # ParameterError, ConvergenceError, ...
    error_message = Column(Text)
    duration_ms = Column(Integer)
    artifact_dir = Column(String)
    timestamp = Column(DateTime, default=lambda: datetime.now(timezone.utc))

    def __repr__(self):
        return f"<Run({self.command}) {self.status} exit={self.exit_code}>"


def _make_engine(url: str):
    if url.startswith("sqlite") and (url in ("sqlite://", "sqlite:///:memory:")):
        return create_engine(url, connect_args={"check_same_thread": False}, poolclass=StaticPool)
    if url.startswith("sqlite"):
        return create_engine(url, connect_args={"check_same_thread": False})
    return create_engine(url)


# Подключение к БД
engine = _make_engine(DATABASE_URL)
SessionLocal = sessionmaker(bind=engine)


def init_db():
    """
    API: Инициализация базы данных
    Вход: None
    Выход: None (создает таблицы в БД)
    Логика: Создает все таблицы, определенные в Base.metadata
    """
    Base.metadata.create_all(bind=engine)
    logger.debug(f"Таблицы журнала готовы: {engine.url}")


def get_db():
    """
    API: Получение сессии базы данных
    Вход: None
    Выход: Generator[Session, None, None]
    Логика: Создает новую сессию, автоматически закрывает
    """
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()


def add_activity_log(level: str, message: str, run_id: str = None, depth: int = 1):
    """
    API: Логирование активности с указанием процедуры-источника
    Вход: level (уровень), message (сообщение), run_id (идентификатор запуска),
          depth (на сколько кадров выше искать процедуру-источник)
    Выход: str (ID созданной записи) или None при ошибке
    Логика: Получает имя вызывающей процедуры через inspect; сбой журнала не прерывает расчет
    """
    caller_frame = inspect.currentframe()
    for _ in range(depth):
        caller_frame = caller_frame.f_back if caller_frame else None
    procedure_name = caller_frame.f_code.co_name if caller_frame else "unknown"

    db = SessionLocal()
    try:
        log = LogEntry(level=level, message=message, run_id=run_id, procedure=procedure_name)
        db.add(log)
        db.commit()
        return log.id
    except Exception as e:
        logger.debug(f"Ошибка записи лога в журнал: {e}")
        db.rollback()
        return None
    finally:
        db.close()


def get_recent_logs(limit: int = 10, run_id: str = None) -> List[LogEntry]:
    """
    API: Получение последних записей лога
    Вход: limit (количество записей), run_id (фильтр по запуску)
    Выход: List[LogEntry] (новые сначала)
    """
    db = SessionLocal()
    try:
        query = db.query(LogEntry)
        if run_id:
            query = query.filter(LogEntry.run_id == run_id)
        return query.order_by(LogEntry.timestamp.desc()).limit(limit).all()
    finally:
        db.close()


def create_run_record(command: str, config_hash: str = None, artifact_dir: str = None) -> Optional[str]:
    """
    API: Создание записи о запуске
    Вход: command, config_hash (sha256 конфигурации), artifact_dir
    Выход: str (ID запуска) или None, если журнал недоступен
    """
    db = SessionLocal()
    try:
        run = RunRecord(command=command, config_hash=config_hash, artifact_dir=artifact_dir)
        db.add(run)
        db.commit()
        return run.id
    except Exception as e:
        logger.debug(f"Ошибка записи запуска: {e}")
        db.rollback()
        return None
    finally:
        db.close()


def finish_run_record(run_id: str, exit_code: int, duration_ms: int,
                      error_type: str = None, error_message: str = None,
                      config_hash: str = None) -> None:
    """
    API: Завершение записи о запуске
    Вход: run_id, exit_code, duration_ms, error_type, error_message, config_hash (если известен)
    Выход: None
    Логика: status = ok при нулевом коде выхода, иначе failed
    """
    if run_id is None:
        return
    db = SessionLocal()
    try:
        run = db.query(RunRecord).filter(RunRecord.id == run_id).first()
        if run:
            run.status = "ok" if exit_code == 0 else "failed"
            run.exit_code = exit_code
            run.duration_ms = duration_ms
            run.error_type = error_type
            run.error_message = error_message
            if config_hash:
                run.config_hash = config_hash
            db.commit()
    except Exception as e:
        logger.debug(f"Ошибка обновления запуска {run_id}: {e}")
        db.rollback()
    finally:
        db.close()


def get_recent_runs(limit: int = 10) -> List[RunRecord]:
    """
    API: Получение последних запусков
    Вход: limit
    Выход: List[RunRecord] (новые сначала)
    """
    db = SessionLocal()
    try:
        return db.query(RunRecord).order_by(RunRecord.timestamp.desc()).limit(limit).all()
    finally:
        db.close()


def get_run_statistics(hours: int = 24) -> Dict[str, Dict]:
    """
    API: Статистика запусков по командам
    Вход: hours (окно анализа)
    Выход: Dict {command: {total, ok, failed, avg_duration_ms}}
    """
    db = SessionLocal()
    try:
        time_threshold = datetime.now(timezone.utc).replace(tzinfo=None) - timedelta(hours=hours)
        results = db.query(
            RunRecord.command,
            func.count().label('total'),
            func.sum(case((RunRecord.status == "ok", 1), else_=0)).label('ok'),
            func.sum(case((RunRecord.status == "failed", 1), else_=0)).label('failed'),
            func.avg(RunRecord.duration_ms).label('avg_duration_ms'),
        ).filter(RunRecord.timestamp >= time_threshold).group_by(RunRecord.command).all()

        return {
            r.command: {
                'total': r.total,
                'ok': int(r.ok or 0),
                'failed': int(r.failed or 0),
                'avg_duration_ms': round(r.avg_duration_ms or 0),
            }
            for r in results
        }
    except Exception as e:
        add_activity_log("ERROR", f"Ошибка статистики запусков: {e}")
        return {}
    finally:
        db.close()
