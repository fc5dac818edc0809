# errors.py
"""
Errors - исключения предметной области
API: Классы ошибок физической библиотеки, различаемые CLI для кодов выхода
"""


class ParameterError(ValueError):
    """Недопустимые физические параметры или аргументы операции"""


class TruncationError(RuntimeError):
    """Обрезание бозонного базиса слишком мало для запрошенного состояния"""


class DiagonalizationError(RuntimeError):
    """Сбой собственного решателя (с метаданными матрицы в сообщении)"""


class ConvergenceError(RuntimeError):
    """Уровни в запрошенном окне не сошлись по обрезанию"""


class DegeneracyError(RuntimeError):
    """Спектр содержит вырожденные уровни, а формула SP их не допускает"""


class EmptyShellError(ValueError):
    """На заданной энергии поверхность Пуанкаре пуста"""


class PoleProximityError(ValueError):
    """Точка слишком близко к полюсу сферы, где координата φ вырождена"""


class UnstructuredDecompositionError(RuntimeError):
    """В разложении нет гауссовых последовательностей (типично для хаоса)"""


class PointTimeout(RuntimeError):
    """Точка сетки считается дольше допустимого времени"""


class GridMismatchError(ValueError):
    """Карты построены на разных сетках"""
