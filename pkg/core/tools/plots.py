# plots.py
"""
Plots - статические SVG-графики по выгруженным CSV
API: plot_survival, plot_map, plot_section, plot_collage, plot_components, plot_contour
Логика: Каждая функция читает только CSV-файл результатов (никакого скрытого состояния)
"""

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from core.tools.artifacts import read_csv  # noqa: E402

logger = logging.getLogger(__name__)

MAP_LABELS = {"sections": "D (размерность сечения)", "lyapunov": "λ", "pr": "P_R"}


def _save(fig, svg_path) -> Path:
    svg_path = Path(svg_path)
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(svg_path, format="svg", bbox_inches="tight")
    plt.close(fig)
    logger.debug(f"График сохранен: {svg_path}")
    return svg_path


def plot_survival(csv_path, svg_path) -> Path:
    """
    API: SP(t) в двойном логарифмическом масштабе
    Вход: csv_path (столбцы t, sp, plateau и при наличии sp_analytic), svg_path
    Выход: Path SVG
    Логика: Горизонтальная линия 1/P_R; аналитическая кривая пунктиром
    """
    frame, meta = read_csv(csv_path)
    frame = frame[frame["t"] > 0]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(frame["t"], frame["sp"], lw=0.8, label="SP численно")
    if "sp_analytic" in frame:
        ax.loglog(frame["t"], frame["sp_analytic"], "--", lw=1.0, label="SP аналитически")
    ax.axhline(float(frame["plateau"].iloc[0]), color="k", lw=0.8, label="1/P_R")
    ax.set_xlabel("t")
    ax.set_ylabel("SP(t)")
    if "energy_per_j" in meta:
        ax.set_title(f"E/J = {meta['energy_per_j']:.4g}")
    ax.legend(frameon=False)
    return _save(fig, svg_path)


def plot_map(csv_path, svg_path) -> Path:
    """
    API: Тепловая карта значения на плоскости (φ, j̃z)
    Вход: csv_path (phi, jz_tilde, value, status), svg_path
    Выход: Path SVG; отсутствующие точки не закрашиваются
    """
    frame, meta = read_csv(csv_path)
    phi = np.sort(frame["phi"].unique())
    x = np.sort(frame["jz_tilde"].unique())
    values = frame.sort_values(["jz_tilde", "phi"])["value"].to_numpy().reshape(x.size, phi.size)
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(phi, x, np.ma.masked_invalid(values), shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=MAP_LABELS.get(meta.get("task"), "value"))
    ax.set_xlabel("φ")
    ax.set_ylabel("j_z / J")
    if "energy_per_j" in meta:
        ax.set_title(f"E/J = {meta['energy_per_j']:.4g}")
    return _save(fig, svg_path)


def plot_section(csv_path, svg_path) -> Path:
    """Сечение Пуанкаре одной орбиты (phi, jz_tilde)"""
    frame, meta = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(frame["phi"], frame["jz_tilde"], ",", color="k")
    ax.set_xlim(0, 2 * np.pi)
    ax.set_ylim(-1, 1)
    ax.set_xlabel("φ")
    ax.set_ylabel("j_z / J")
    return _save(fig, svg_path)


def plot_collage(csv_path, svg_path) -> Path:
    """Сечения нескольких орбит одной энергии, цвет по номеру орбиты"""
    frame, meta = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(frame["phi"], frame["jz_tilde"], c=frame["orbit"], s=0.3, cmap="tab20", linewidths=0)
    ax.set_xlim(0, 2 * np.pi)
    ax.set_ylim(-1, 1)
    ax.set_xlabel("φ")
    ax.set_ylabel("j_z / J")
    if "energy_per_j" in meta:
        ax.set_title(f"E/J = {meta['energy_per_j']:.4g}")
    return _save(fig, svg_path)


def plot_components(csv_path, svg_path) -> Path:
    """
    API: Энергетические компоненты |c_k|² от E_k
    Вход: csv_path (energy, weight, sequence, envelope), svg_path
    Логика: Точки окрашены по номеру последовательности (0 - вне последовательностей),
            огибающие - линиями
    """
    frame, meta = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    x = frame["energy"] / meta["j"] if "j" in meta else frame["energy"]
    ax.vlines(x, 0, frame["weight"], lw=0.6, color="0.6")
    if "sequence" in frame:
        for label, group in frame[frame["sequence"] > 0].groupby("sequence"):
            gx = group["energy"] / meta["j"] if "j" in meta else group["energy"]
            ax.plot(gx, group["weight"], "o", ms=2.5, label=f"seq {label}")
            if "envelope" in group:
                ax.plot(gx, group["envelope"], "-", lw=0.8)
    ax.set_xlabel("E_k / J" if "j" in meta else "E_k")
    ax.set_ylabel("|c_k|²")
    ax.legend(frameon=False, fontsize="small")
    return _save(fig, svg_path)


def plot_contour(csv_path, svg_path) -> Path:
    """Контур e^(−1) вокруг центра на плоскости (φ, j̃z); обрезанные точки отмечены"""
    frame, meta = read_csv(csv_path)
    fig, ax = plt.subplots(figsize=(5, 4))
    closed = np.append(np.arange(len(frame)), 0)
    ax.plot(frame["phi"].to_numpy()[closed], frame["jz_tilde"].to_numpy()[closed], "-", lw=1.0)
    if "clipped" in frame and frame["clipped"].any():
        clipped = frame[frame["clipped"].astype(bool)]
        ax.plot(clipped["phi"], clipped["jz_tilde"], "x", color="r", ms=3)
    center = meta.get("center")
    if center:
        ax.plot(center["phi"], center["jz_tilde"], "k+", ms=8)
    ax.set_xlabel("φ")
    ax.set_ylabel("j_z / J")
    return _save(fig, svg_path)
