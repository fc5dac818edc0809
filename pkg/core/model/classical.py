# classical.py
"""
Classical Dynamics - классический предел модели Дике
API: hcl, hamilton_rhs, integrate, поверхность Пуанкаре p = 0 (ветвь q₊), сечения,
     максимальный показатель Ляпунова (Бенеттин и облако соседей)
Основные возможности: интегратор DOP853 с плотным выводом, смена карты у полюсов сферы,
     локализация пересечений по плотному выводу
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial import cKDTree

from core.config.config import (
    BENETTIN_D0,
    CHAOS_CUTOFF,
    CLOUD_CHUNK,
    CLOUD_NEIGHBORS,
    CLOUD_RADIUS,
    CLOUD_SATURATION,
    CLOUD_TRANSIENT,
    CROSSING_P_TOL,
    LYAPUNOV_T_TOTAL,
    ODE_ATOL,
    ODE_RTOL,
    POLE_MARGIN,
    POLE_RETURN,
    POLE_SWITCH,
    RENORM_INTERVAL,
    SECTION_MAX_TIME,
)
from core.model.dicke import ModelParams
from core.model.errors import ConvergenceError, ParameterError, PointTimeout, PoleProximityError
from core.model.phase_space import PhasePoint

logger = logging.getLogger(__name__)

StateLike = Union[PhasePoint, np.ndarray, Sequence[float]]

CANONICAL = "canonical"
CARTESIAN = "cartesian"
SECTION_CHUNK = 100.0


def _as_array(state: StateLike) -> np.ndarray:
    if isinstance(state, PhasePoint):
        return state.as_array()
    return np.asarray(state, dtype=float)


# ---------------------------------------------------------------------------
# Гамильтониан и уравнения движения

def hcl(state: StateLike, params: ModelParams):
    """
    API: Классический гамильтониан ⟨z, α|H_D|z, α⟩
    Вход: state (PhasePoint или массив (..., 4) в порядке φ, j_z, q, p), params
    Выход: float или массив энергий
    Логика: (ω/2)(p² + q²) + ω₀ j_z + 2γ√J √(1 − (j_z/J)²) q cos φ
    """
    y = _as_array(state)
    phi, jz, q, p = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    x = jz / params.j
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    energy = (params.omega / 2) * (p * p + q * q) + params.omega0 * jz \
        + 2 * params.gamma * math.sqrt(params.j) * s * q * np.cos(phi)
    return float(energy) if np.ndim(energy) == 0 else energy


def _rhs_canonical(t, y, params: ModelParams):
    y = y.reshape(-1, 4)
    phi, jz, q, p = y[:, 0], y[:, 1], y[:, 2], y[:, 3]
    j = params.j
    x = jz / j
    s = np.sqrt(np.clip(1.0 - x * x, 1e-300, None))
    g = 2 * params.gamma * math.sqrt(j)
    out = np.empty_like(y)
    out[:, 0] = params.omega0 - g * q * np.cos(phi) * x / (j * s)
    out[:, 1] = g * s * q * np.sin(phi)
    out[:, 2] = params.omega * p
    out[:, 3] = -params.omega * q - g * s * np.cos(phi)
    return out.ravel()


def _rhs_cartesian(t, y, params: ModelParams):
    # (j_x, j_y, j_z, q, p): dj/dt = ∇_j H × j, {j_x, j_y} = j_z
    y = y.reshape(-1, 5)
    jx, jy, jz, q, p = y[:, 0], y[:, 1], y[:, 2], y[:, 3], y[:, 4]
    c = 2 * params.gamma / math.sqrt(params.j)
    bx = c * q
    bz = params.omega0
    out = np.empty_like(y)
    out[:, 0] = -bz * jy
    out[:, 1] = bz * jx - bx * jz
    out[:, 2] = bx * jy
    out[:, 3] = params.omega * p
    out[:, 4] = -params.omega * q - c * jx
    return out.ravel()


def hamilton_rhs(state: StateLike, params: ModelParams) -> np.ndarray:
    """
    API: Уравнения Гамильтона в канонической карте
    Вход: state (φ, j_z, q, p), params
    Выход: np.ndarray (dφ/dt, dj_z/dt, dq/dt, dp/dt)
    Логика: dφ/dt = ∂H/∂j_z, dj_z/dt = −∂H/∂φ, dq/dt = ∂H/∂p, dp/dt = −∂H/∂q (аналитически)
    """
    y = _as_array(state)
    if abs(y[1] / params.j) > 1 - POLE_MARGIN:
        raise PoleProximityError(f"|j_z/J| = {abs(y[1] / params.j)} слишком близко к полюсу")
    return _rhs_canonical(0.0, y, params)


def to_cartesian(y: np.ndarray, params: ModelParams) -> np.ndarray:
    phi, jz, q, p = y
    r = math.sqrt(max(0.0, params.j ** 2 - jz ** 2))
    return np.array([r * math.cos(phi), r * math.sin(phi), jz, q, p])


def to_canonical(y: np.ndarray, params: ModelParams, phi_ref: float = 0.0) -> np.ndarray:
    jx, jy, jz, q, p = y
    norm = math.sqrt(jx * jx + jy * jy + jz * jz)
    jz = jz * params.j / norm if norm > 0 else jz
    phi = math.atan2(jy, jx)
    # ветвь φ, ближайшая к опорному значению
    phi = phi_ref + math.remainder(phi - phi_ref, 2 * math.pi)
    return np.array([phi, jz, q, p])


def _project_sphere(y: np.ndarray, params: ModelParams) -> np.ndarray:
    y = y.reshape(-1, 5).copy()
    norms = np.linalg.norm(y[:, :3], axis=1)
    y[:, :3] *= (params.j / norms)[:, None]
    return y.ravel()


# ---------------------------------------------------------------------------
# Интегрирование с плотным выводом

@dataclass
class WorkBudget:
    """
    API: Бюджет расчета одной точки в вызовах правой части уравнений
    Вход: limit (None - без ограничения)
    Выход: None; charge(nfev) накапливает used и бросает PointTimeout при превышении limit
    Логика: Проверка после каждого вызова интегратора; число вызовов не зависит от загрузки машины
    """
    limit: Optional[int] = None
    used: int = 0

    def charge(self, nfev: int) -> None:
        self.used += int(nfev)
        if self.limit is not None and self.used > self.limit:
            raise PointTimeout(f"Превышен бюджет точки: {self.used} > {self.limit} вызовов правой части")


def _charge(budget: Optional[WorkBudget], sol) -> None:
    if budget is not None:
        budget.charge(sol.nfev)


@dataclass
class _Segment:
    chart: str
    t0: float
    t1: float
    sol: object
    phi_ref: float


@dataclass
class Trajectory:
    """
    API: Траектория, составленная из сегментов в разных картах
    Вход: params, segments (плотный вывод DOP853), crossings (события p = 0, если запрошены)
    Выход: None; вызов traj(t) возвращает каноническое состояние
    """
    params: ModelParams
    segments: List[_Segment] = field(repr=False)
    crossings_t: List[float] = field(default_factory=list, repr=False)
    crossings_y: List[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def t_start(self) -> float:
        return self.segments[0].t0

    @property
    def t_end(self) -> float:
        return self.segments[-1].t1

    def _segment_for(self, t: float) -> _Segment:
        for seg in self.segments:
            lo, hi = min(seg.t0, seg.t1), max(seg.t0, seg.t1)
            if lo - 1e-12 <= t <= hi + 1e-12:
                return seg
        raise ParameterError(f"t={t} вне траектории [{self.t_start}, {self.t_end}]")

    def __call__(self, t: float) -> np.ndarray:
        seg = self._segment_for(t)
        y = seg.sol(t)
        if seg.chart == CARTESIAN:
            return to_canonical(y, self.params, seg.phi_ref)
        return np.asarray(y)

    def sample(self, times: Sequence[float]) -> np.ndarray:
        return np.array([self(t) for t in times])

    @property
    def final_state(self) -> np.ndarray:
        return self(self.t_end)

    def energy_drift(self, times: Optional[Sequence[float]] = None) -> float:
        """Максимальный относительный дрейф энергии |H(t) − H(0)|/|H(0)|"""
        if times is None:
            times = np.linspace(self.t_start, self.t_end, 201)
        energies = hcl(self.sample(times), self.params)
        e0 = hcl(self(self.t_start), self.params)
        return float(np.max(np.abs(energies - e0)) / max(abs(e0), 1e-300))


def _chart_for(y_can: np.ndarray, params: ModelParams) -> str:
    return CANONICAL if abs(y_can[1] / params.j) < 1 - POLE_SWITCH else CARTESIAN


def _propagate(y0: np.ndarray, t0: float, t1: float, params: ModelParams,
               rtol: float, atol: float, crossings: bool = False,
               budget: Optional[WorkBudget] = None) -> Trajectory:
    y_can = np.asarray(y0, dtype=float)
    chart = _chart_for(y_can, params)
    phi_ref = float(y_can[0])
    y = y_can if chart == CANONICAL else to_cartesian(y_can, params)
    t = t0
    direction = 1.0 if t1 >= t0 else -1.0
    traj = Trajectory(params=params, segments=[])

    while (t1 - t) * direction > 0:
        if chart == CANONICAL:
            rhs = _rhs_canonical

            def switch(_t, yy, _params):
                return (1 - POLE_SWITCH) - abs(yy[1] / params.j)
            p_index = 3
        else:
            rhs = _rhs_cartesian

            def switch(_t, yy, _params):
                return abs(yy[2]) / math.sqrt(yy[0] ** 2 + yy[1] ** 2 + yy[2] ** 2) - (1 - POLE_RETURN)
            p_index = 4
        switch.terminal = True
        switch.direction = -1

        events = [switch]
        if crossings:
            def p_zero(_t, yy, _params, _i=p_index):
                return yy[_i]
            events.append(p_zero)

        sol = solve_ivp(rhs, (t, t1), y, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True, events=events, args=(params,))
        _charge(budget, sol)
        if sol.status == -1:
            raise RuntimeError(f"Сбой интегратора в карте {chart} при t={t}: {sol.message}")

        traj.segments.append(_Segment(chart, float(sol.t[0]), float(sol.t[-1]), sol.sol, phi_ref))
        if crossings:
            for te, ye in zip(sol.t_events[1], sol.y_events[1]):
                yc = ye if chart == CANONICAL else to_canonical(ye, params, phi_ref)
                traj.crossings_t.append(float(te))
                traj.crossings_y.append(np.asarray(yc))

        if sol.status == 1 and len(sol.t_events[0]):
            t = float(sol.t_events[0][-1])
            y_end = sol.y_events[0][-1]
            if chart == CANONICAL:
                phi_ref = float(y_end[0])
                y = to_cartesian(y_end, params)
                chart = CARTESIAN
                logger.debug(f"Переход в декартову карту при t={t}")
            else:
                y_end = _project_sphere(y_end, params)
                y = to_canonical(y_end, params, phi_ref)
                phi_ref = float(y[0])
                chart = CANONICAL
                logger.debug(f"Возврат в каноническую карту при t={t}")
        else:
            t = t1
    return traj


def integrate(state0: StateLike, t_end: float, params: ModelParams,
              rtol: float = ODE_RTOL, atol: float = ODE_ATOL) -> Trajectory:
    """
    API: Интегрирование уравнений Гамильтона
    Вход: state0, t_end (может быть отрицательным - интегрирование назад), params, rtol, atol
    Выход: Trajectory с плотным выводом
    Логика: DOP853 (8-й порядок); при |j_z/J| > 1 − 10⁻⁶ переход в декартову карту спина
            (j_x, j_y, j_z) с проекцией на сферу |j| = J
    """
    y0 = _as_array(state0)
    if abs(y0[1]) > params.j * (1 + 1e-12):
        raise ParameterError(f"|j_z| = {abs(y0[1])} > J = {params.j}")
    return _propagate(y0, 0.0, float(t_end), params, rtol, atol)


# ---------------------------------------------------------------------------
# Поверхность Пуанкаре

def _q_roots(energy: float, jz, phi, params: ModelParams):
    x = np.asarray(jz, dtype=float) / params.j
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    a = params.omega / 2
    b = 2 * params.gamma * math.sqrt(params.j) * s * np.cos(phi)
    c = params.omega0 * np.asarray(jz, dtype=float) - energy
    disc = b * b - 4 * a * c
    root = np.sqrt(np.where(disc >= 0, disc, np.nan))
    return (-b + root) / (2 * a), (-b - root) / (2 * a)


def poincare_q_plus(energy: float, jz: float, phi: float, params: ModelParams) -> Optional[float]:
    """
    API: Верхняя ветвь поверхности p = 0
    Вход: energy, jz (|jz| ≤ J), phi, params
    Выход: больший корень (ω/2)q² + 2γ√J√(1−x²)cos φ q + (ω₀ j_z − E) = 0 или None вне оболочки
    """
    if abs(jz) > params.j * (1 + 1e-12):
        raise ParameterError(f"|j_z| = {abs(jz)} > J = {params.j}")
    q_plus, _ = _q_roots(energy, jz, phi, params)
    q_plus = float(q_plus)
    return None if math.isnan(q_plus) else q_plus


def poincare_q_minus(energy: float, jz: float, phi: float, params: ModelParams) -> Optional[float]:
    """Нижняя ветвь q₋ той же квадратичной задачи"""
    _, q_minus = _q_roots(energy, jz, phi, params)
    q_minus = float(q_minus)
    return None if math.isnan(q_minus) else q_minus


@dataclass(frozen=True)
class PoincareSurface:
    """
    API: Поверхность Пуанкаре p = 0, ветвь q₊, на энергии E
    Вход: energy, params, branch ("q+")
    Выход: None
    Логика: Точка поверхности задается (φ, j̃z = j_z/J); q восстанавливается из энергии
    """
    energy: float
    params: ModelParams
    branch: str = "q+"

    def q_plus(self, jz: float, phi: float) -> Optional[float]:
        return poincare_q_plus(self.energy, jz, phi, self.params)

    def point(self, phi: float, jz_tilde: float) -> Optional[PhasePoint]:
        jz = jz_tilde * self.params.j
        q = self.q_plus(jz, phi)
        if q is None:
            return None
        return PhasePoint(q=q, p=0.0, jz=jz, phi=phi)

    def shell_mask(self, phi, jz_tilde) -> np.ndarray:
        """Маска точек сетки внутри оболочки (дискриминант ≥ 0)"""
        q_plus, _ = _q_roots(self.energy, np.asarray(jz_tilde) * self.params.j, phi, self.params)
        return ~np.isnan(q_plus)

    def contains(self, pt: PhasePoint, tol: float = 1e-8) -> bool:
        if abs(pt.p) > tol:
            return False
        q = self.q_plus(pt.jz, pt.phi)
        if q is None:
            return False
        scale = max(1.0, abs(self.energy))
        return abs(hcl(pt, self.params) - self.energy) <= tol * scale and abs(q - pt.q) <= tol * max(1.0, abs(q))


@dataclass
class PoincareSection:
    """
    API: Пересечения траектории с поверхностью p = 0 при q > 0
    Вход: energy, times, phi (mod 2π), jz_tilde, q, p, partial (получено меньше пересечений)
    """
    energy: float
    times: np.ndarray
    phi: np.ndarray
    jz_tilde: np.ndarray
    q: np.ndarray
    p: np.ndarray
    partial: bool = False

    def __len__(self):
        return int(self.times.size)


def poincare_section(state0: StateLike, n_crossings: int, params: ModelParams,
                     max_time: float = SECTION_MAX_TIME, rtol: float = ODE_RTOL,
                     atol: float = ODE_ATOL, budget: Optional[WorkBudget] = None) -> PoincareSection:
    """
    API: Сечение Пуанкаре одной орбиты
    Вход: state0 (на поверхности, p = 0), n_crossings, params, max_time, rtol, atol, budget
    Выход: PoincareSection (φ mod 2π, j_z/J, q)
    Логика: Пересечения p = 0 в обоих направлениях, только q > 0; момент уточняется поиском корня
            по плотному выводу; при нехватке пересечений за max_time - флаг partial
    """
    y = _as_array(state0)
    if abs(y[3]) > CROSSING_P_TOL:
        raise ParameterError(f"Начальная точка не на поверхности p = 0 (p = {y[3]})")
    energy = hcl(y, params)

    times, states = [], []
    t = 0.0
    while len(times) < n_crossings and t < max_time:
        t_next = min(t + SECTION_CHUNK, max_time)
        traj = _propagate(y, t, t_next, params, rtol, atol, crossings=True, budget=budget)
        for te, ye in zip(traj.crossings_t, traj.crossings_y):
            if te <= 1e-9 or ye[2] <= 0:
                continue
            times.append(te)
            states.append(ye)
        y = traj.final_state
        t = t_next

    states = np.array(states[:n_crossings]).reshape(-1, 4)
    times = np.array(times[:n_crossings])
    partial = times.size < n_crossings
    if partial:
        logger.warning(f"Получено {times.size} из {n_crossings} пересечений за t={max_time}")
    return PoincareSection(
        energy=energy,
        times=times,
        phi=np.mod(states[:, 0], 2 * np.pi),
        jz_tilde=states[:, 1] / params.j,
        q=states[:, 2],
        p=states[:, 3],
        partial=partial,
    )


def section_dimension(section: PoincareSection) -> float:
    """
    API: Оценка размерности множества пересечений
    Вход: section (≥ 16 точек)
    Выход: float (≈1 для кривой, ≈2 для заполненной области, 0 для периодической орбиты)
    Логика: Медианное расстояние до ближайшего соседа для N и N/4 точек на сфере Блоха;
            D = ln 4 / ln(d(N/4)/d(N))
    """
    if len(section) < 16:
        return float("nan")
    r = np.sqrt(np.clip(1 - section.jz_tilde ** 2, 0.0, None))
    pts = np.column_stack([r * np.cos(section.phi), r * np.sin(section.phi), section.jz_tilde])

    def median_nn(points):
        dist, _ = cKDTree(points).query(points, k=2)
        return float(np.median(dist[:, 1]))

    d_full = median_nn(pts)
    d_sub = median_nn(pts[::4])
    if d_full <= 1e-12:
        return 0.0
    ratio = d_sub / d_full
    if ratio <= 1.0:
        return 3.0
    return float(min(3.0, math.log(4.0) / math.log(ratio)))


# ---------------------------------------------------------------------------
# Показатели Ляпунова

@dataclass
class LyapunovEstimate:
    """
    API: Оценка максимального показателя Ляпунова
    Вход: lam, method ("benettin" | "cloud"), trace_t / trace_value (история сходимости),
          cutoff, converged, message
    """
    lam: float
    method: str
    trace_t: np.ndarray = field(repr=False)
    trace_value: np.ndarray = field(repr=False)
    cutoff: float = CHAOS_CUTOFF
    converged: bool = True
    message: str = ""

    @property
    def is_chaotic(self) -> bool:
        return self.lam > self.cutoff

    def summary(self) -> dict:
        return {"lambda": self.lam, "method": self.method, "is_chaotic": self.is_chaotic,
                "cutoff": self.cutoff, "converged": self.converged, "message": self.message}


def _metric_distance(a: np.ndarray, b: np.ndarray, params: ModelParams) -> np.ndarray:
    # декартово вложение: бозонная часть как есть, спин в масштабе √J
    a = a.reshape(-1, 5)
    b = b.reshape(-1, 5)
    dj = np.sum((a[:, :3] - b[:, :3]) ** 2, axis=1) / params.j
    dqp = np.sum((a[:, 3:] - b[:, 3:]) ** 2, axis=1)
    return np.sqrt(dj + dqp)


def _random_offsets(center: np.ndarray, n: int, radius: float, params: ModelParams,
                    rng: np.random.Generator) -> np.ndarray:
    """Смещения в касательном пространстве R² × S² на расстоянии radius в метрике вложения"""
    offsets = rng.standard_normal((n, 5))
    j_hat = center[:3] / np.linalg.norm(center[:3])
    offsets[:, :3] -= np.outer(offsets[:, :3] @ j_hat, j_hat)
    offsets[:, :3] *= math.sqrt(params.j)
    scale = _metric_distance(np.tile(center, n) + offsets.ravel(), np.tile(center, n), params)
    offsets *= (radius / scale)[:, None]
    return _project_sphere((center + offsets).ravel(), params).reshape(n, 5)


def _check_shell(y0: np.ndarray, params: ModelParams) -> None:
    if abs(y0[1]) > params.j * (1 + 1e-12):
        raise ParameterError(f"|j_z| = {abs(y0[1])} > J = {params.j}")


def lyapunov_benettin(state0: StateLike, params: ModelParams,
                      t_total: float = LYAPUNOV_T_TOTAL,
                      renorm_interval: float = RENORM_INTERVAL,
                      d0: float = BENETTIN_D0,
                      rtol: float = ODE_RTOL, atol: float = ODE_ATOL,
                      cutoff: float = CHAOS_CUTOFF, seed: int = 0,
                      budget: Optional[WorkBudget] = None) -> LyapunovEstimate:
    """
    API: Показатель Ляпунова методом Бенеттина (две траектории)
    Вход: state0, params, t_total, renorm_interval (0.5), d0 (1e-8), rtol, atol, cutoff, seed, budget
    Выход: LyapunovEstimate с историей λ(t)
    Логика: Опорная и возмущенная траектории интегрируются одной системой (общие шаги);
            каждые renorm_interval расстояние возвращается к d0, λ = (1/t) Σ ln(d_k/d0)
    """
    y0 = _as_array(state0)
    _check_shell(y0, params)
    rng = np.random.default_rng(seed)
    base = to_cartesian(y0, params)
    partner = _random_offsets(base, 1, d0, params, rng)[0]
    y = np.concatenate([base, partner])

    n_steps = max(1, int(round(t_total / renorm_interval)))
    trace_t = np.empty(n_steps)
    trace_v = np.empty(n_steps)
    log_sum = 0.0
    t = 0.0
    for k in range(n_steps):
        sol = solve_ivp(_rhs_cartesian, (t, t + renorm_interval), y, method="DOP853",
                        rtol=rtol, atol=atol, args=(params,))
        _charge(budget, sol)
        if sol.status == -1:
            raise RuntimeError(f"Сбой интегратора при t={t}: {sol.message}")
        y = sol.y[:, -1]
        t += renorm_interval
        a, b = y[:5], y[5:]
        d = float(_metric_distance(a, b, params)[0])
        log_sum += math.log(d / d0)
        b = a + (b - a) * (d0 / d)
        y = _project_sphere(np.concatenate([a, b]), params)
        trace_t[k] = t
        trace_v[k] = log_sum / t

    lam = float(trace_v[-1])
    tail = trace_v[3 * n_steps // 4:]
    converged = True
    message = ""
    if lam > cutoff and tail.size > 1:
        spread = (tail.max() - tail.min()) / abs(tail.mean())
        if spread > 0.5:
            converged = False
            message = f"λ(t) колеблется на {spread:.0%} в конце истории"
            logger.warning(message)
    return LyapunovEstimate(lam=lam, method="benettin", trace_t=trace_t, trace_value=trace_v,
                            cutoff=cutoff, converged=converged, message=message)


def _fit_window(t: np.ndarray, mean_log: np.ndarray, transient: float) -> Tuple[float, float]:
    """Наклон ⟨ln d⟩ на окне после переходного участка; возвращает (наклон, длина окна)"""
    t_lo = t[0] + transient * (t[-1] - t[0])
    sel = t >= t_lo
    if np.count_nonzero(sel) < 10:
        raise ConvergenceError("Насыщение раньше, чем набралось окно для аппроксимации")
    slope, _ = np.polyfit(t[sel], mean_log[sel], 1)
    return float(slope), float(t[sel][-1] - t[sel][0])


def lyapunov_cloud(state0: StateLike, params: ModelParams,
                   n_neighbors: int = CLOUD_NEIGHBORS, radius: float = CLOUD_RADIUS,
                   t_total: float = LYAPUNOV_T_TOTAL, rtol: float = ODE_RTOL,
                   atol: float = ODE_ATOL, cutoff: float = CHAOS_CUTOFF, seed: int = 0,
                   sample_dt: float = 0.5, budget: Optional[WorkBudget] = None) -> LyapunovEstimate:
    """
    API: Показатель Ляпунова по облаку соседних начальных условий
    Вход: state0, params, n_neighbors (16), radius (1e-6), t_total, rtol, atol, cutoff, seed,
          sample_dt (шаг выборки ⟨ln d⟩), budget
    Выход: LyapunovEstimate
    Логика: Соседи на сфере радиуса radius вокруг центра; ⟨ln d(t)⟩ усредняется по соседям;
            при насыщении (CLOUD_SATURATION·√J) окно закрывается, наклон аппроксимируется после
            переходного участка, облако пересеивается вокруг текущего центра; λ - среднее
            наклонов с весом длины окна
    """
    y0 = _as_array(state0)
    _check_shell(y0, params)
    rng = np.random.default_rng(seed)
    saturation = math.log(CLOUD_SATURATION * math.sqrt(params.j))

    center = to_cartesian(y0, params)
    cloud = _random_offsets(center, n_neighbors, radius, params, rng)
    y = np.concatenate([center, cloud.ravel()])

    window_t: List[float] = []
    window_v: List[float] = []
    trace_t: List[float] = []
    trace_v: List[float] = []
    slopes: List[Tuple[float, float]] = []
    t = 0.0
    while t < t_total - 1e-12:
        t_next = min(t + CLOUD_CHUNK, t_total)
        n_samples = max(2, int(round((t_next - t) / sample_dt)) + 1)
        grid = np.linspace(t, t_next, n_samples)
        sol = solve_ivp(_rhs_cartesian, (t, t_next), y, method="DOP853", rtol=rtol, atol=atol,
                        t_eval=grid, args=(params,))
        _charge(budget, sol)
        if sol.status == -1:
            raise RuntimeError(f"Сбой интегратора при t={t}: {sol.message}")

        saturated_at = None
        for col, tk in enumerate(sol.t):
            if window_t and tk <= window_t[-1]:
                continue
            states = sol.y[:, col]
            c = states[:5]
            others = states[5:]
            d = _metric_distance(np.tile(c, n_neighbors), others, params)
            mean_log = float(np.mean(np.log(d)))
            window_t.append(float(tk))
            window_v.append(mean_log)
            trace_t.append(float(tk))
            trace_v.append(mean_log)
            if mean_log >= saturation:
                saturated_at = col
                break

        if saturated_at is not None:
            slopes.append(_fit_window(np.array(window_t), np.array(window_v), CLOUD_TRANSIENT))
            t = window_t[-1]
            center = _project_sphere(sol.y[:5, saturated_at], params)
            cloud = _random_offsets(center, n_neighbors, radius, params, rng)
            y = np.concatenate([center, cloud.ravel()])
            window_t, window_v = [], []
        else:
            y = sol.y[:, -1]
            t = t_next

    if len(window_t) >= 10:
        slopes.append(_fit_window(np.array(window_t), np.array(window_v), CLOUD_TRANSIENT))
    if not slopes:
        raise ConvergenceError("Нет окна экспоненциального роста для аппроксимации")

    total = sum(length for _, length in slopes)
    lam = float(sum(slope * length for slope, length in slopes) / total)
    return LyapunovEstimate(lam=lam, method="cloud", trace_t=np.array(trace_t),
                            trace_value=np.array(trace_v), cutoff=cutoff,
                            message=f"окон аппроксимации: {len(slopes)}")
