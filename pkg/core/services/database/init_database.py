# init_database.py - создаем таблицы журнала
from core.services.database.database import engine, init_db

if __name__ == "__main__":
    init_db()
    print(f"🎉 База данных готова: {engine.url} (таблицы logs, runs)")
