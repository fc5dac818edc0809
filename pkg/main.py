# main.py
"""
Dicke Chaos Lab - главная точка входа
API: python main.py <команда> [флаги] - запуск расчетов через CLI
Основные возможности: спектр и сходимость, вероятность выживания, карты Пуанкаре / Ляпунова / P_R,
     контуры когерентных состояний, аналитическая SP, корреляция карт
"""

import logging
import sys

from core.services.cli import main
from core.services.database.database import add_activity_log

logger = logging.getLogger(__name__)


if __name__ == "__main__":
    """
    Точка входа при прямом запуске main.py
    """
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        add_activity_log("INFO", "Расчет прерван пользователем", "system")
        print("\n👋 Расчет прерван. Повторный запуск продолжит сканирование с журнала точек")
        sys.exit(130)
