# config.py
"""
Dicke Chaos Lab - статическая конфигурация
API: Константы по умолчанию для физических расчетов, хранилищ и CLI
Основные возможности: допуски численных методов, параметры сеток, адрес журнала запусков
"""

import os

# Журнал запусков (SQLAlchemy)
DATABASE_URL = os.environ.get("DICKE_DATABASE_URL", "sqlite:///dicke_journal.sqlite")

# Каталоги по умолчанию
DEFAULT_OUTPUT_DIR = "runs"
DEFAULT_CACHE_DIR = os.environ.get("DICKE_CACHE_DIR", ".eigen_cache")

# Базис и гамильтониан
MAX_DIM = 20000
DEFAULT_N_MAX = 200

# Диагонализация
ORTHONORMALITY_TOL = 1e-10
RESIDUAL_TOL = 1e-8
DEGENERACY_TOL = 1e-12
VERIFY_MAX_DIM = 2500

# Сходимость по обрезанию
CONVERGENCE_ABS_TOL = 1e-8
CONVERGENCE_REL_TOL = 1e-10
CONVERGENCE_TAIL_TOL = 1e-6
TAIL_FRACTION = 0.1

# Статистика уровней
UNFOLD_DEGREE = 9
MIN_SPACING_LEVELS = 50
SPACING_BINS = 40

# Когерентные состояния
TRUNCATION_WARNING = 1e-4
MIN_CAPTURE = 0.99
CONTOUR_DIRECTIONS = 64
CONTOUR_XTOL = 1e-10

# Квантовая динамика
T_MAX = 500.0
N_TIME_POINTS = 20000
T_LOG_START = 1e-2
T_LOG_END = 5.0
LOG_FRACTION = 0.25
DROP_WEIGHT_BELOW = 1e-14
DECAY_MULTIPLE = 10.0
MIN_WINDOW_POINTS = 100

# Аналитическая SP
SEQUENCE_THRESHOLD = 1e-4
SEQUENCE_FRAC_TOL = 0.25
SEQUENCE_MIN_MEMBERS = 4
MIN_FIT_QUALITY = 0.9
THETA_EPS = 1e-16
DELTA_E_PAIRS = 5

# Классическая динамика
ODE_RTOL = 1e-12
ODE_ATOL = 1e-12
POLE_MARGIN = 1e-10
POLE_SWITCH = 1e-6
POLE_RETURN = 1e-3
CROSSING_P_TOL = 1e-8
CHAOS_CUTOFF = 0.004

# Ляпунов
LYAPUNOV_T_TOTAL = 2000.0
RENORM_INTERVAL = 0.5
BENETTIN_D0 = 1e-8
CLOUD_NEIGHBORS = 16
CLOUD_RADIUS = 1e-6
CLOUD_CHUNK = 50.0
CLOUD_SATURATION = 0.1
CLOUD_TRANSIENT = 0.1

# Сканирование поверхности Пуанкаре
GRID_SIZE = 100
COARSE_GRID_SIZE = 40
SECTION_CROSSINGS = 300
SECTION_MAX_TIME = 1e4
TIMEOUT_FACTOR = 10.0  # лимит точки: кратное медианы вызовов правой части на калибровке
CALIBRATION_POINTS = 3
GLOBAL_SEED = 12345

# Версия формата артефактов
CSV_FLOAT_FORMAT = "%.17g"
