#!/usr/bin/env python3
# show_logs.py
"""
Show Logs - последние записи журнала активности
API: python -m core.services.monitoring.show_logs [N] [RUN_ID]
"""
import sys

from tabulate import tabulate

from core.services.database.database import get_recent_logs, init_db


def show_logs(limit: int = 50, run_id: str = None) -> None:
    logs = get_recent_logs(limit, run_id)
    rows = [[log.timestamp.strftime('%H:%M:%S'), log.level, log.procedure, (log.run_id or 'system')[:8], log.message]
            for log in reversed(logs)]
    print(tabulate(rows, headers=["время", "уровень", "процедура", "запуск", "сообщение"], maxcolwidths=[None] * 4 + [80]))


if __name__ == "__main__":
    init_db()
    show_logs(int(sys.argv[1]) if len(sys.argv) > 1 else 50, sys.argv[2] if len(sys.argv) > 2 else None)
