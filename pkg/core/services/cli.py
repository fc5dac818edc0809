# cli.py
"""
Dicke Chaos Lab CLI - командная строка для всех расчетов
API: main, run (argv → код выхода), build_parser, подкоманды spectrum, survival, poincare,
     lyapunov-map, pr-map, contour, fit-sequences, correlate
Основные возможности: конфигурация JSON + переопределения флагами, каталоги результатов с
     манифестом, журнал запусков в БД, коды выхода 0 / 1 (конфигурация) / 2 (сходимость) /
     3 (аналитика неприменима)
"""

import argparse
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError
from tabulate import tabulate

from core import __version__
from core.config.config import DEFAULT_OUTPUT_DIR, MIN_SPACING_LEVELS
from core.config.run_config import (
    RunConfig,
    config_hash,
    format_validation_error,
    load_config,
    parse_set_arguments,
)
from core.model.analytic_sp import SequenceSet, detect_sequences, sp_analytic
from core.model.classical import (
    PoincareSurface,
    hcl,
    lyapunov_benettin,
    lyapunov_cloud,
    poincare_section,
)
from core.model.coherent import phase_to_labels, spreading_contour, uncertainty_check
from core.model.dicke import build_basis, build_hamiltonian
from core.model.dynamics import (
    Decomposition,
    decompose_point,
    equilibration_stats,
    survival_probability,
    time_grid,
)
from core.model.errors import (
    ConvergenceError,
    ParameterError,
    UnstructuredDecompositionError,
)
from core.model.grid import ScanMap, SurfaceGrid
from core.model.phase_space import PhasePoint
from core.model.spectrum import (
    EigenSystem,
    cache_path,
    check_convergence,
    get_or_diagonalize,
    level_spacing_stats,
)
from core.scan.scan_core import ScanJob, correlate_maps, orbit_seed, run_scan
from core.services.database.database import (
    add_activity_log,
    create_run_record,
    finish_run_record,
    init_db,
)
from core.tools import plots
from core.tools.artifacts import read_csv, write_csv, write_json, write_manifest, dump_matrix

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONVERGENCE = 2
EXIT_ANALYTIC = 3

MAP_TASKS = {"poincare": "sections", "lyapunov-map": "lyapunov", "pr-map": "pr"}


class CliParser(argparse.ArgumentParser):
    """argparse с кодом выхода 1 при ошибке использования"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: ошибка: {message}\n")


@dataclass
class CommandContext:
    """
    API: Состояние одного запуска команды
    Вход: command, args, config (None для correlate), output (каталог результатов), run_id
    """
    command: str
    args: argparse.Namespace
    config: Optional[RunConfig]
    output: Path
    run_id: Optional[str] = None
    timings: Dict[str, float] = field(default_factory=dict)

    def log(self, level: str, message: str) -> None:
        logger.log(logging.getLevelName(level), message)
        add_activity_log(level, message, self.run_id, depth=2)

    def manifest(self, directory: Path, extra: Optional[Dict] = None) -> Path:
        config = self.config.model_dump(mode="json") if self.config else {"args": vars(self.args)}
        seed = self.config.scan.seed if self.config else None
        return write_manifest(directory, self.command, config, seed, dict(self.timings), extra)


# ---------------------------------------------------------------------------
# Общие шаги

def _energy_tag(energy_per_j: float) -> str:
    return f"E{energy_per_j:+.4f}"


def _eigensystem(ctx: CommandContext, n_max: int) -> EigenSystem:
    config = ctx.config
    params = config.params
    path = cache_path(params, n_max, config.io.cache_dir)
    hit = path.exists()
    start = time.monotonic()
    es = get_or_diagonalize(params, n_max, config.io.cache_dir)
    if hit:
        ctx.log("INFO", f"cache hit: {path}")
    else:
        ctx.log("INFO", f"Диагонализация dim={es.dim} за {time.monotonic() - start:.2f} с, кэш: {path}")
    ctx.timings.setdefault("eigensystem_s", time.monotonic() - start)
    return es


def _phase_point(ctx: CommandContext) -> PhasePoint:
    if ctx.config.phase_point is None:
        raise ParameterError(f"Команде {ctx.command} нужен блок phase_point")
    return ctx.config.phase_point.to_point(ctx.config.params)


def _decomposition(ctx: CommandContext, point: PhasePoint) -> Decomposition:
    config = ctx.config
    es = _eigensystem(ctx, config.basis.n_max)
    d = decompose_point(point, es, config.tolerances.min_capture)
    ctx.log("INFO", f"Разложение: P_R={d.pr:.4g}, захват {d.capture:.6f}, ⟨E⟩/J={d.mean_energy / config.model.j:.6f}")
    return d


def _times(config: RunConfig) -> np.ndarray:
    tg = config.time_grid
    return time_grid(tg.t_max, tg.n_points, tg.t_log_start, tg.t_log_end, tg.log_fraction)


def _point_dict(point: PhasePoint, j: float) -> Dict[str, float]:
    return {"q": point.q, "p": point.p, "jz": point.jz, "jz_tilde": point.jz / j, "phi": point.phi}


def _components_frame(d: Decomposition, ss: Optional[SequenceSet] = None) -> pd.DataFrame:
    frame = pd.DataFrame({"k": np.arange(d.weights.size), "energy": d.energies, "weight": d.weights})
    if ss is not None:
        sequence = np.zeros(d.weights.size, dtype=int)
        envelope = np.full(d.weights.size, np.nan)
        for label, seq in enumerate(ss.sequences, start=1):
            sequence[seq.members] = label
            envelope[seq.members] = seq.envelope(d.energies[seq.members])
        frame["sequence"] = sequence
        frame["envelope"] = envelope
    return frame


def _maybe_plot(ctx: CommandContext, plotter: Callable, csv_path: Path, svg_path: Path) -> None:
    if ctx.config is not None and ctx.config.io.plot:
        plotter(csv_path, svg_path)


# ---------------------------------------------------------------------------
# Подкоманды

def cmd_spectrum(ctx: CommandContext) -> int:
    """
    API: Спектр, кэш собственной системы и отчет о сходимости
    Вход: ctx
    Выход: код выхода (ConvergenceError при несошедшихся уровнях в окне)
    Логика: Диагонализация при n_max и n_max_high; окно энергий по умолчанию
            [E_0, E_0 + ω n_max / 2]; статистика уровней при ≥ 50 сошедшихся уровнях
    """
    config = ctx.config
    params = config.params
    n_low = config.basis.n_max
    n_high = config.basis.n_max_high or n_low + max(10, n_low // 5)

    es = _eigensystem(ctx, n_low)
    if config.spectrum.dump_matrix:
        dump_matrix(build_hamiltonian(params, build_basis(params, n_low)), ctx.output / "hamiltonian.txt")

    if config.spectrum.energy_window_per_j is not None:
        window = tuple(e * params.j for e in config.spectrum.energy_window_per_j)
    else:
        window = (float(es.energies[0]), float(es.energies[0]) + 0.5 * params.omega * n_low)

    start = time.monotonic()
    tol = config.tolerances
    report = check_convergence(params, n_low, n_high, window, tol.convergence_abs, tol.convergence_rel,
                               tol.convergence_tail, cache_dir=config.io.cache_dir)
    ctx.timings["convergence_s"] = time.monotonic() - start

    meta = {"params": params.as_dict(), "n_max": n_low, "dim": es.dim}
    write_csv(pd.DataFrame({"k": np.arange(es.dim), "energy": es.energies,
                            "energy_per_j": es.energies / params.j}), ctx.output / "spectrum.csv", meta)
    write_csv(pd.DataFrame({
        "k": report.level_indices,
        "energy": report.energies,
        "energy_per_j": report.energies / params.j,
        "shift": report.shifts,
        "tail_weight": report.tail_weights,
        "converged": report.converged.astype(int),
    }), ctx.output / "convergence.csv", dict(meta, n_max_high=n_high, window=list(report.energy_window)))

    summary = {
        "params": params.as_dict(),
        "dim": es.dim,
        "n_max_low": n_low,
        "n_max_high": n_high,
        "energy_window": list(report.energy_window),
        "levels_in_window": int(report.level_indices.size),
        "converged_count": report.converged_count,
        "degenerate_pairs": int(es.degenerate_pairs.shape[0]),
        "cache": str(cache_path(params, n_low, config.io.cache_dir)),
    }

    mask = np.zeros(es.dim, dtype=bool)
    mask[report.level_indices[report.converged]] = True
    if report.converged_count >= MIN_SPACING_LEVELS:
        stats = level_spacing_stats(es, window, degree=config.spectrum.unfold_degree,
                                    bins=config.spectrum.spacing_bins, converged_mask=mask)
        summary["spacing"] = {"mean_ratio": stats.mean_ratio, "fraction_below_0.1": stats.fraction_below(0.1),
                              "levels": int(stats.spacings.size + 1), "degree": stats.degree}
        write_csv(pd.DataFrame({"s": stats.spacings}), ctx.output / "spacings.csv", meta)
    else:
        ctx.log("INFO", f"Статистика уровней пропущена: {report.converged_count} < {MIN_SPACING_LEVELS} сошедшихся уровней")

    write_json(ctx.output / "convergence.json", summary)
    print(tabulate(report.table_rows(limit=15), headers=["k", "E_k", "ΔE_k", "хвост", "сошелся"],
                   floatfmt=".6g"))
    print(f"Сошлось {report.converged_count} из {report.level_indices.size} уровней в окне "
          f"[{window[0]:.6g}, {window[1]:.6g}]")
    ctx.manifest(ctx.output, {"convergence": summary})

    if not report.all_converged:
        raise ConvergenceError(
            f"{report.level_indices.size - report.converged_count} уровней в окне не сошлись "
            f"(n_max {n_low} → {n_high}); увеличьте n_max или сузьте окно"
        )
    return EXIT_OK


def cmd_survival(ctx: CommandContext) -> int:
    """
    API: Вероятность выживания когерентного состояния
    Вход: ctx (phase_point обязателен; io.analytic - аналитическая кривая)
    Выход: код выхода; при неструктурированном разложении с --analytic - 3,
           численные результаты уже записаны
    """
    config = ctx.config
    params = config.params
    point = _phase_point(ctx)
    d = _decomposition(ctx, point)
    energy = hcl(point, params)

    start = time.monotonic()
    times = _times(config)
    series = survival_probability(d, times)
    ctx.timings["survival_s"] = time.monotonic() - start

    window = None
    if config.time_grid.window_start is not None:
        window = (config.time_grid.window_start, config.time_grid.window_end or float(times[-1]))
    try:
        stats = equilibration_stats(series, d, window).as_dict()
    except ParameterError as e:
        ctx.log("WARNING", f"Статистика плато не вычислена: {e}")
        stats = None

    meta = {"params": params.as_dict(), "n_max": config.basis.n_max, "j": params.j,
            "energy_per_j": energy / params.j, "point": _point_dict(point, params.j)}
    frame = pd.DataFrame({"t": series.times, "sp": series.sp, "plateau": series.plateau})
    survival_csv = write_csv(frame, ctx.output / "survival.csv", meta)
    components_csv = write_csv(_components_frame(d), ctx.output / "components.csv", meta)
    decomposition = {
        "params": params.as_dict(),
        "point": _point_dict(point, params.j),
        "hcl": energy,
        "energy_per_j": energy / params.j,
        "mean_energy": d.mean_energy,
        "energy_width": d.energy_width,
        "norm_captured": d.norm_captured,
        "parity_weight": d.parity_weight,
        "capture": d.capture,
        "pr": d.pr,
        "equilibration": stats,
    }
    write_json(ctx.output / "decomposition.json", decomposition)

    try:
        if config.io.analytic:
            seq = config.sequences
            ss = detect_sequences(d, seq.threshold, seq.frac_tol, seq.min_members, seq.n_sequences)
            write_json(ctx.output / "sequences.json", ss.as_dict())
            components_csv = write_csv(_components_frame(d, ss), ctx.output / "components.csv", meta)
            analytic = sp_analytic(ss, times, seq.min_quality)
            frame["sp_analytic"] = analytic.series.sp
            survival_csv = write_csv(frame, ctx.output / "survival.csv", meta)
            terms = pd.DataFrame({"t": times, **analytic.terms})
            write_csv(terms, ctx.output / "sp_terms.csv", dict(meta, plateau=analytic.series.plateau))
            ctx.log("INFO", f"Аналитическая SP: {ss.M} последовательностей")
    finally:
        _maybe_plot(ctx, plots.plot_survival, survival_csv, ctx.output / "survival.svg")
        _maybe_plot(ctx, plots.plot_components, components_csv, ctx.output / "components.svg")
        ctx.manifest(ctx.output, {"decomposition": decomposition})

    print(tabulate([["E/J", energy / params.j], ["P_R", d.pr], ["1/P_R", 1.0 / d.pr],
                    ["захват", d.capture]], floatfmt=".6g"))
    return EXIT_OK


def cmd_fit_sequences(ctx: CommandContext) -> int:
    """
    API: Поиск гауссовых последовательностей и аналитическая SP
    Вход: ctx; источник - --components (CSV из survival) или phase_point
    Выход: код выхода (3 для неструктурированного разложения, отчет уже записан)
    """
    config = ctx.config
    components = ctx.args.components
    if components:
        frame, meta = read_csv(components)
        j = float(meta.get("j", config.model.j))
        d = Decomposition.from_weights(frame["weight"].to_numpy(), frame["energy"].to_numpy(), j=j)
    else:
        point = _phase_point(ctx)
        d = _decomposition(ctx, point)
        j = config.model.j
        meta = {"j": j, "point": _point_dict(point, j)}

    seq = config.sequences
    ss = detect_sequences(d, seq.threshold, seq.frac_tol, seq.min_members, seq.n_sequences)
    report = dict(ss.as_dict(), pr=d.pr, mean_energy=d.mean_energy)
    write_json(ctx.output / "sequences.json", report)
    meta = dict(meta, j=j)
    components_csv = write_csv(_components_frame(d, ss), ctx.output / "components.csv", meta)
    _maybe_plot(ctx, plots.plot_components, components_csv, ctx.output / "components.svg")

    rows = [[k, s.A, s.E_bar / j, s.sigma, s.omega1, s.e2, s.t_D, len(s.members), s.r2]
            for k, s in enumerate(ss.sequences, start=1)]
    print(tabulate(rows, headers=["#", "A", "Ē/J", "σ", "ω₁", "e₂", "t_D", "N", "R²"], floatfmt=".5g"))

    try:
        times = _times(config)
        analytic = sp_analytic(ss, times, seq.min_quality)
        terms = pd.DataFrame({"t": times, "sp_analytic": analytic.series.sp, **analytic.terms})
        write_csv(terms, ctx.output / "sp_terms.csv", dict(meta, plateau=analytic.series.plateau))
    finally:
        ctx.manifest(ctx.output, {"sequences": report})
    return EXIT_OK


def _collage(ctx: CommandContext, job: ScanJob, mask: np.ndarray) -> pd.DataFrame:
    """Сечения равномерно выбранных орбит оболочки (для коллажа)"""
    n = ctx.config.scan.collage_orbits
    inside = np.flatnonzero(mask)
    if n == 0 or inside.size == 0:
        return pd.DataFrame(columns=["orbit", "t_cross", "phi", "jz_tilde", "q"])
    chosen = np.unique(inside[np.linspace(0, inside.size - 1, min(n, inside.size)).astype(int)])
    parts = []
    for index in chosen:
        pt = job.surface.point(*job.grid.coordinates(int(index)))
        try:
            section = poincare_section(pt, job.n_crossings, job.params, job.section_max_time, job.rtol, job.atol)
        except Exception as e:
            logger.warning(f"Орбита {index} пропущена в коллаже: {e}")
            continue
        parts.append(pd.DataFrame({"orbit": int(index), "t_cross": section.times, "phi": section.phi,
                                   "jz_tilde": section.jz_tilde, "q": section.q}))
    return pd.concat(parts, ignore_index=True) if parts else pd.DataFrame(
        columns=["orbit", "t_cross", "phi", "jz_tilde", "q"])


def _single_orbit(ctx: CommandContext, task: str) -> None:
    """Сечение или история показателя Ляпунова для phase_point"""
    config = ctx.config
    params = config.params
    point = _phase_point(ctx)
    meta = {"params": params.as_dict(), "energy_per_j": hcl(point, params) / params.j,
            "point": _point_dict(point, params.j)}
    tol = config.tolerances
    if task == "sections":
        section = poincare_section(point, config.scan.n_crossings, params, config.scan.section_max_time,
                                   tol.ode_rtol, tol.ode_atol)
        path = write_csv(pd.DataFrame({"t_cross": section.times, "phi": section.phi,
                                       "jz_tilde": section.jz_tilde, "q": section.q}),
                         ctx.output / "section.csv", dict(meta, partial=section.partial))
        _maybe_plot(ctx, plots.plot_section, path, ctx.output / "section.svg")
        return

    ly = config.lyapunov
    seed = orbit_seed(config.scan.seed, 0)
    if ly.method == "cloud":
        est = lyapunov_cloud(point, params, ly.n_neighbors, ly.radius, ly.t_total, tol.ode_rtol,
                             tol.ode_atol, ly.cutoff, seed=seed)
        ln_d = est.trace_value
    else:
        est = lyapunov_benettin(point, params, ly.t_total, ly.renorm_interval, ly.d0, tol.ode_rtol,
                                tol.ode_atol, ly.cutoff, seed=seed)
        ln_d = est.trace_value * est.trace_t
    write_csv(pd.DataFrame({"t": est.trace_t, "ln_d": ln_d}), ctx.output / "lyapunov_trace.csv",
              dict(meta, method=est.method))
    write_json(ctx.output / "lyapunov.json", dict(est.summary(), point=_point_dict(point, params.j)))
    ctx.log("INFO", f"λ = {est.lam:.5g} ({est.method}), хаос: {est.is_chaotic}")


def cmd_map(ctx: CommandContext) -> int:
    """
    API: Карта на поверхности Пуанкаре для каждой энергии из surface.energies_per_j
    Вход: ctx (команда poincare | lyapunov-map | pr-map)
    Выход: код выхода
    Логика: Каталог на энергию: map.csv (phi, jz_tilde, value, status), манифест,
            для poincare - коллаж сечений; пустая оболочка - пустая карта с диагностикой
    """
    config = ctx.config
    task = MAP_TASKS[ctx.command]
    params = config.params
    grid = SurfaceGrid.square(config.scan.effective_grid_size)
    scan, ly, tol = config.scan, config.lyapunov, config.tolerances

    if config.phase_point is not None and task != "pr":
        _single_orbit(ctx, task)

    summary_rows = []
    for energy_per_j in config.surface.energies_per_j:
        energy = energy_per_j * params.j
        directory = ctx.output / _energy_tag(energy_per_j)
        directory.mkdir(parents=True, exist_ok=True)
        job = ScanJob(
            params=params, energy=energy, grid=grid, task=task,
            n_crossings=scan.n_crossings, section_max_time=scan.section_max_time,
            lyapunov_method=ly.method, t_total=ly.t_total, renorm_interval=ly.renorm_interval,
            d0=ly.d0, n_neighbors=ly.n_neighbors, radius=ly.radius, cutoff=ly.cutoff,
            rtol=tol.ode_rtol, atol=tol.ode_atol, seed=scan.seed, processes=scan.processes,
            timeout_factor=scan.timeout_factor, calibration_points=scan.calibration_points,
            output_dir=str(directory),
            n_max=config.basis.n_max if task == "pr" else None,
            cache_dir=config.io.cache_dir if task == "pr" else None,
        )
        ctx.log("INFO", f"Сканирование {task}: E/J={energy_per_j}, сетка {grid.n_phi}×{grid.n_jz}")
        result = run_scan(job, log_callback=ctx.log, resume=scan.resume)
        ctx.timings[f"{_energy_tag(energy_per_j)}_s"] = result.timings.get("total_s", 0.0)

        meta = {"task": task, "energy": energy, "energy_per_j": energy_per_j, "grid": grid.spec(),
                "params": params.as_dict(), "job_hash": job.job_hash()}
        map_csv = write_csv(result.map.to_frame(), directory / "map.csv", meta)
        _maybe_plot(ctx, plots.plot_map, map_csv, directory / "map.svg")

        if task == "sections":
            mask = grid.shell_mask(job.surface)
            collage_csv = write_csv(_collage(ctx, job, mask), directory / "collage.csv", meta)
            _maybe_plot(ctx, plots.plot_collage, collage_csv, directory / "collage.svg")

        stats = {"n_points": grid.size, "n_present": result.map.n_present,
                 "counts": result.map.aux.get("counts", {}), "resumed_points": result.resumed_points,
                 "point_budget_nfev": result.budget}
        if task == "lyapunov":
            stats["chaotic_fraction"] = result.map.fraction_above(ly.cutoff)
        values = result.map.values[result.map.present]
        stats["median"] = float(np.median(values)) if values.size else math.nan
        for message in result.diagnostics:
            ctx.log("WARNING", message)
        write_manifest(directory, ctx.command, config.model_dump(mode="json"), scan.seed,
                       result.timings, {"job": job.spec(), "job_hash": job.job_hash(),
                                        "diagnostics": result.diagnostics, "stats": stats})
        summary_rows.append([energy_per_j, stats["n_present"], stats["median"],
                             stats.get("chaotic_fraction", "")])

    print(tabulate(summary_rows, headers=["E/J", "точек", "медиана", "доля хаоса"], floatfmt=".4g"))
    ctx.manifest(ctx.output, {"energies_per_j": config.surface.energies_per_j})
    return EXIT_OK


def cmd_contour(ctx: CommandContext) -> int:
    """
    API: Контур e^(−1) когерентного состояния на поверхности Пуанкаре
    Вход: ctx (phase_point на поверхности p = 0, q = q₊)
    Выход: код выхода; contour.csv (phi, jz_tilde, q_plus, overlap, clipped), contour.json
    """
    config = ctx.config
    params = config.params
    center = _phase_point(ctx)
    energy = hcl(center, params)
    surface = PoincareSurface(energy=energy, params=params)
    contour = spreading_contour(center, params, surface, config.contour.n_directions, config.contour.xtol)
    unc = uncertainty_check(phase_to_labels(center, params), params)

    meta = {"params": params.as_dict(), "j": params.j, "energy_per_j": energy / params.j,
            "center": _point_dict(center, params.j)}
    path = write_csv(pd.DataFrame({"phi": contour.phi, "jz_tilde": contour.jz_tilde, "q_plus": contour.q_plus,
                                   "overlap": contour.overlap, "clipped": contour.clipped.astype(int)}),
                     ctx.output / "contour.csv", meta)
    report = {"area": contour.area, "clipped": contour.is_clipped, "energy_per_j": energy / params.j,
              "dq_dp": unc.dq_dp, "spin_variance": unc.spin_variance, "j": params.j}
    write_json(ctx.output / "contour.json", report)
    _maybe_plot(ctx, plots.plot_contour, path, ctx.output / "contour.svg")
    ctx.manifest(ctx.output, {"contour": report})
    print(tabulate([[k, v] for k, v in report.items()], floatfmt=".6g"))
    return EXIT_OK


def cmd_correlate(ctx: CommandContext) -> int:
    """
    API: Ранговая корреляция двух карт
    Вход: ctx (args.map_a, args.map_b - файлы map.csv)
    Выход: код выхода; correlation.json и joint_histogram.csv
    """
    maps = []
    for path in (ctx.args.map_a, ctx.args.map_b):
        frame, meta = read_csv(path)
        grid = ScanMap.infer_grid(frame)
        maps.append(ScanMap.from_frame(frame, grid, energy=meta.get("energy", math.nan), task=meta.get("task", "")))
    corr = correlate_maps(maps[0], maps[1], bins=ctx.args.bins)

    xc = 0.5 * (corr.x_edges[:-1] + corr.x_edges[1:])
    yc = 0.5 * (corr.y_edges[:-1] + corr.y_edges[1:])
    xx, yy = np.meshgrid(xc, yc, indexing="ij")
    write_csv(pd.DataFrame({"a": xx.ravel(), "b": yy.ravel(), "count": corr.histogram.ravel()}),
              ctx.output / "joint_histogram.csv", {"map_a": str(ctx.args.map_a), "map_b": str(ctx.args.map_b)})
    result = dict(corr.as_dict(), map_a=str(ctx.args.map_a), map_b=str(ctx.args.map_b))
    write_json(ctx.output / "correlation.json", result)
    ctx.manifest(ctx.output, {"correlation": result})
    print(tabulate([["Спирмен ρ", corr.rho], ["точек", corr.n_points], ["вырождено", corr.degenerate]]))
    return EXIT_OK


COMMANDS: Dict[str, Callable[[CommandContext], int]] = {
    "spectrum": cmd_spectrum,
    "survival": cmd_survival,
    "poincare": cmd_map,
    "lyapunov-map": cmd_map,
    "pr-map": cmd_map,
    "contour": cmd_contour,
    "fit-sequences": cmd_fit_sequences,
    "correlate": cmd_correlate,
}


# ---------------------------------------------------------------------------
# Разбор аргументов и запуск

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', help='JSON-файл конфигурации')
    common.add_argument('--output', '-o', help='Каталог результатов (io.output)')
    common.add_argument('--cache-dir', help='Каталог кэша собственных систем (io.cache_dir)')
    common.add_argument('--seed', type=int, help='Глобальный seed (scan.seed)')
    common.add_argument('--threads', type=int, help='Число процессов сканирования (scan.processes)')
    common.add_argument('--coarse', action='store_true', help='Грубая сетка 40×40 (scan.coarse)')
    common.add_argument('--plot', action='store_true', help='SVG-графики по CSV (io.plot)')
    common.add_argument('--no-resume', action='store_true', help='Не использовать журнал сканирования')
    common.add_argument('--set', action='append', metavar='KEY=VALUE', default=[],
                        help='Переопределение ключа конфигурации: --set scan.grid_size=20')
    common.add_argument('--verbose', '-v', action='store_true', help='Отладочный вывод')

    parser = CliParser(
        prog='dicke-lab',
        description='Dicke Chaos Lab - квантово-классическое соответствие хаоса в модели Дике',
        epilog='Примеры использования:\n'
               '  python main.py spectrum --config cfg.json\n'
               '  python main.py survival --config cfg.json --analytic --plot\n'
               '  python main.py lyapunov-map --config cfg.json --coarse --threads 4\n'
               '  python main.py correlate runs/lyapunov-map/E-1.5000/map.csv runs/pr-map/E-1.5000/map.csv',
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')

    sub.add_parser('spectrum', parents=[common], help='Спектр, кэш и отчет о сходимости')
    survival = sub.add_parser('survival', parents=[common], help='Вероятность выживания когерентного состояния')
    survival.add_argument('--analytic', action='store_true', help='Аналитическая SP по гауссовым последовательностям')
    sub.add_parser('poincare', parents=[common], help='Карта сечений Пуанкаре и коллаж')
    sub.add_parser('lyapunov-map', parents=[common], help='Карта показателей Ляпунова')
    sub.add_parser('pr-map', parents=[common], help='Карта коэффициента участия P_R')
    sub.add_parser('contour', parents=[common], help='Контур e^(-1) когерентного состояния')
    fit = sub.add_parser('fit-sequences', parents=[common], help='Гауссовы последовательности и аналитическая SP')
    fit.add_argument('--components', help='components.csv из команды survival')
    corr = sub.add_parser('correlate', parents=[common], help='Ранговая корреляция двух карт')
    corr.add_argument('map_a')
    corr.add_argument('map_b')
    corr.add_argument('--bins', type=int, default=20)
    return parser


def _flag_overrides(args: argparse.Namespace) -> Dict:
    overrides = parse_set_arguments(args.set)
    if args.output:
        overrides["io.output"] = args.output
    if args.cache_dir:
        overrides["io.cache_dir"] = args.cache_dir
    if args.seed is not None:
        overrides["scan.seed"] = args.seed
    if args.threads is not None:
        overrides["scan.processes"] = args.threads
    if args.coarse:
        overrides["scan.coarse"] = True
    if args.plot:
        overrides["io.plot"] = True
    if args.no_resume:
        overrides["scan.resume"] = False
    if getattr(args, "analytic", False):
        overrides["io.analytic"] = True
    return overrides


def _prepare(args: argparse.Namespace) -> CommandContext:
    if args.command == "correlate" and not args.config:
        output = Path(args.output or DEFAULT_OUTPUT_DIR) / args.command
        config = None
    else:
        config = load_config(args.config, _flag_overrides(args))
        output = Path(config.io.output) / args.command
    output.mkdir(parents=True, exist_ok=True)
    return CommandContext(command=args.command, args=args, config=config, output=output)


def run(argv: Optional[List[str]] = None) -> int:
    """
    API: Выполнение одной команды
    Вход: argv (по умолчанию sys.argv[1:])
    Выход: int (код выхода)
    Логика: Отдельный обработчик на каждый тип ошибки; каждая ошибка пишется в лог,
            в журнал активности и в запись запуска
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        init_db()
    except Exception as e:
        logger.warning(f"Журнал запусков недоступен: {e}")

    started = time.monotonic()
    run_id = create_run_record(args.command)
    ctx = None
    exit_code, error_type, error_message = EXIT_OK, None, None

    try:
        ctx = _prepare(args)
        ctx.run_id = run_id
        add_activity_log("INFO", f"Запуск {args.command}, результаты: {ctx.output}", run_id)
        exit_code = COMMANDS[args.command](ctx)

    except ValidationError as e:
        error_message = f"Ошибка конфигурации:\n{format_validation_error(e)}"
        exit_code, error_type = EXIT_USAGE, "ValidationError"
        logger.error(error_message)
        add_activity_log("ERROR", error_message, run_id)

    except ParameterError as e:
        error_message = f"Некорректные параметры: {e}"
        exit_code, error_type = EXIT_USAGE, "ParameterError"
        logger.error(error_message)
        add_activity_log("ERROR", error_message, run_id)

    except ConvergenceError as e:
        error_message = f"Нет сходимости: {e}"
        exit_code, error_type = EXIT_CONVERGENCE, "ConvergenceError"
        logger.error(error_message)
        add_activity_log("ERROR", error_message, run_id)

    except UnstructuredDecompositionError as e:
        error_message = f"Аналитическая SP неприменима: {e}; численные результаты записаны"
        exit_code, error_type = EXIT_ANALYTIC, "UnstructuredDecompositionError"
        logger.error(error_message)
        add_activity_log("ERROR", error_message, run_id)

    except Exception as e:
        error_message = f"Ошибка выполнения {args.command}: {type(e).__name__}: {e}"
        exit_code, error_type = EXIT_USAGE, type(e).__name__
        logger.error(error_message)
        add_activity_log("ERROR", error_message, run_id)

    duration_ms = int((time.monotonic() - started) * 1000)
    finish_run_record(run_id, exit_code, duration_ms, error_type, error_message,
                      config_hash=config_hash(ctx.config) if ctx and ctx.config else None)
    if exit_code == EXIT_OK:
        add_activity_log("INFO", f"Команда {args.command} завершена за {duration_ms} мс", run_id)
    if error_message:
        print(error_message, file=sys.stderr)
    return exit_code


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
