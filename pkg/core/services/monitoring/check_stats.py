# check_stats.py
"""
Dicke Chaos Lab - Statistics Monitor
API: Утилита мониторинга журнала запусков расчетов
Основные возможности: статистика запусков по командам, последние запуски, разбор ошибок по типам
"""

import argparse
from collections import Counter

from tabulate import tabulate

from core.services.database.database import (
    LogEntry,
    RunRecord,
    SessionLocal,
    add_activity_log,
    get_recent_logs,
    get_recent_runs,
    get_run_statistics,
    init_db,
)


def print_run_statistics(hours=24):
    """
    API: Вывод статистики запусков по командам
    Вход: hours (окно анализа)
    Выход: None (вывод в консоль)
    """
    stats = get_run_statistics(hours)
    add_activity_log("INFO", f"Запрос статистики запусков за {hours} ч")

    print(f"📊 СТАТИСТИКА ЗАПУСКОВ ЗА {hours} Ч")
    print("=" * 50)
    if not stats:
        print("📭 Запусков нет")
        return

    rows = [[command, s['total'], s['ok'], s['failed'], s['avg_duration_ms']] for command, s in sorted(stats.items())]
    print(tabulate(rows, headers=["команда", "всего", "ok", "ошибки", "среднее, мс"]))

    total = sum(s['total'] for s in stats.values())
    ok = sum(s['ok'] for s in stats.values())
    print(f"\nУспешность: {ok / total * 100:.1f}%")


def print_recent_runs(limit=10):
    """
    API: Вывод последних запусков
    Вход: limit (количество записей)
    Выход: None (вывод в консоль)
    """
    runs = get_recent_runs(limit)

    print(f"\n🕒 ПОСЛЕДНИЕ {len(runs)} ЗАПУСКОВ")
    print("=" * 80)
    if not runs:
        print("📭 В журнале нет запусков")
        return

    rows = []
    for run in runs:
        status = "✅" if run.status == "ok" else "🔄" if run.status == "running" else "❌"
        rows.append([run.timestamp.strftime('%Y-%m-%d %H:%M:%S'), status, run.command, run.exit_code,
                     run.duration_ms, run.error_type or "", (run.config_hash or "")[:12]])
    print(tabulate(rows, headers=["время", "", "команда", "код", "мс", "ошибка", "конфигурация"]))


def analyze_errors(limit=50):
    """
    API: Разбор ошибок последних запусков
    Вход: limit (количество запусков для анализа)
    Выход: None (вывод в консоль)
    Логика: Подсчет по типам ошибок и подсказки по типичным причинам
    """
    runs = [run for run in get_recent_runs(limit) if run.status == "failed"]
    add_activity_log("INFO", f"Анализ ошибок для {limit} запусков")

    print(f"\n🚨 АНАЛИЗ ОШИБОК (последние {limit} запусков)")
    print("=" * 50)
    if not runs:
        print("✅ Ошибок не обнаружено")
        return

    by_type = Counter(run.error_type for run in runs)
    print(tabulate(sorted(by_type.items()), headers=["тип ошибки", "число"]))

    if by_type.get("ConvergenceError"):
        print("\n⚠️  Нет сходимости: увеличьте basis.n_max или сузьте spectrum.energy_window_per_j")
    if by_type.get("TruncationError"):
        print("\n⚠️  Потеря нормы когерентного состояния: увеличьте basis.n_max")
    if by_type.get("UnstructuredDecompositionError"):
        print("\n⚠️  Аналитическая SP неприменима: состояние, вероятно, хаотическое")


def print_database_stats():
    """
    API: Вывод статистики базы данных
    Вход: None
    Выход: None (вывод в консоль)
    """
    db = SessionLocal()
    try:
        log_count = db.query(LogEntry).count()
        run_count = db.query(RunRecord).count()
    finally:
        db.close()

    print(f"\n🗄️ СТАТИСТИКА БАЗЫ ДАННЫХ")
    print("=" * 50)
    print(f"Всего записей в логах: {log_count}")
    print(f"Всего запусков: {run_count}")

    recent_logs = get_recent_logs(5)
    if recent_logs:
        print(f"\n📋 Последние 5 логов:")
        for log in recent_logs:
            print(f"  [{log.level}] {log.timestamp.strftime('%H:%M:%S')} {log.procedure}: {log.message[:60]}")
    else:
        print(f"\n📋 Логов нет")


def main(argv=None):
    """
    API: Основная функция утилиты мониторинга
    Вход: argv (аргументы командной строки)
    Выход: None (вывод в консоль)
    """
    parser = argparse.ArgumentParser(
        description='Dicke Chaos Lab - Утилита мониторинга журнала запусков',
        epilog='Примеры использования:\n'
               '  python -m core.services.monitoring.check_stats --all\n'
               '  python -m core.services.monitoring.check_stats --runs 5\n'
               '  python -m core.services.monitoring.check_stats --errors'
    )

    parser.add_argument('--stats', action='store_true', help='Статистика запусков по командам')
    parser.add_argument('--hours', type=int, default=24, help='Окно статистики в часах (по умолчанию: 24)')
    parser.add_argument('--runs', type=int, default=0, metavar='N', help='Показать последние N запусков')
    parser.add_argument('--errors', action='store_true', help='Разбор ошибок запусков')
    parser.add_argument('--db', action='store_true', help='Статистика базы данных')
    parser.add_argument('--all', action='store_true', help='Показать всю доступную информацию')

    args = parser.parse_args(argv)

    if not any([args.stats, args.runs, args.errors, args.db, args.all]):
        parser.print_help()
        return

    init_db()
    if args.all or args.stats:
        print_run_statistics(args.hours)

    if args.all or args.runs:
        print_recent_runs(args.runs or 10)

    if args.all or args.errors:
        analyze_errors()

    if args.all or args.db:
        print_database_stats()


if __name__ == "__main__":
    """
    Точка входа при прямом запуске утилиты мониторинга
    """
    try:
        main()
    except KeyboardInterrupt:
        print("\n👋 Мониторинг завершен")
    except Exception as e:
        error_msg = f"Критическая ошибка в check_stats: {e}"
        print(f"❌ {error_msg}")
        add_activity_log("ERROR", error_msg)
