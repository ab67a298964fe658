"""
Оценка распределений времени перехода между узлами сети:
сбор соответствий, гистограммы, аппроксимация гауссианой,
уверенность связи и пересчет окна поиска.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import curve_fit
from scipy.stats import norm

from app.core.exceptions import ReidTopologyException
from app.models.forest import ForestSeries
from app.models.observation import PersonTrack
from app.models.topology import Correspondence, SearchWindow, TransitDistribution
from app.schemas.config import PipelineConfig
from app.services.forest import ForestException, best_matches, similarity, slot_index_for_time

logger = logging.getLogger(__name__)

DEGENERATE_FIT_MESSAGE = "degenerate fit; retain previous window"


class TopologyException(ReidTopologyException):
    """Исключение для ошибок оценки топологии"""
    pass


@dataclass
class GatherStats:
    """Счетчики одного прохода сбора соответствий"""
    exits: int = 0
    comparisons: int = 0
    skipped: int = 0


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    masses: np.ndarray
    support: int
    discarded: int = 0

    @property
    def centers(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2.0

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def non_empty(self) -> int:
        return int(np.count_nonzero(self.masses))


@dataclass(frozen=True)
class GaussianFit:
    mu: float
    sigma: float
    fit_error: float
    amplitude: float
    degenerate: bool = False


def gather_correspondences(
    source: str,
    dest: str,
    exits: Sequence[PersonTrack],
    gallery: Sequence[PersonTrack],
    series: ForestSeries,
    window: SearchWindow,
    stats: Optional[GatherStats] = None,
) -> List[Correspondence]:
    """
    Ищет для каждого выхода лучшее совпадение среди треков галереи.

    Для выхода в момент t кандидаты - треки галереи со входом в [t+lo, t+hi],
    известные лесу слота, ближайшего к t + window.target_offset.
    Треки, покинувшие кадр раньше, чем появился сам выходящий трек, не рассматриваются:
    при отрицательной нижней границе окна они предшествуют ему, а не продолжают.
    Каждый выход дает не более одного соответствия.

    Args:
        source: Узел выхода
        dest: Узел входа (галерея)
        exits: Треки, покидающие source
        gallery: Треки, появляющиеся в dest (метки - ключи треков)
        series: Серия лесов, обученная на gallery
        window: Окно поиска в терминах dt
        stats: Необязательные счетчики сравнений

    Returns:
        List[Correspondence]: Соответствия в порядке номеров выходов
    """
    stats = stats if stats is not None else GatherStats()
    stats.exits += len(exits)
    if not exits or not gallery or not series.slots:
        stats.skipped += len(exits)
        return []

    ordered = sorted(gallery, key=lambda track: track.entry_time)
    entries = np.array([track.entry_time for track in ordered])
    by_key: Dict[str, PersonTrack] = {track.ref.key: track for track in ordered}

    # Выходы группируются по лесу, чтобы прогонять наблюдения пакетом
    groups: Dict[int, list] = {}
    for track in sorted(exits, key=lambda tr: tr.seq):
        t = track.exit_time
        lo = np.searchsorted(entries, t + window.lo, side="left")
        hi = np.searchsorted(entries, t + window.hi, side="right")
        slot = slot_index_for_time(series, t + window.target_offset)
        forest = series.slots[slot][1]
        keys = [
            ordered[i].ref.key for i in range(lo, hi)
            if ordered[i].seq != track.seq
            and ordered[i].exit_time >= track.entry_time
            and forest.index_of(ordered[i].ref.key) is not None
        ]
        if not keys:
            stats.skipped += 1
            continue
        stats.comparisons += len(keys)
        groups.setdefault(slot, []).append((track, keys))

    found: List[Correspondence] = []
    for slot, items in groups.items():
        forest = series.slots[slot][1]
        try:
            matches = best_matches(forest, [track for track, _ in items], [keys for _, keys in items])
        except ForestException as e:
            logger.warning(f"Пропуск слота {slot} для {source}->{dest}: {e}")
            stats.skipped += len(items)
            continue
        for (track, _), (label, _) in zip(items, matches):
            matched = by_key[label]
            found.append(Correspondence(
                exit_track=track.ref,
                matched_track=matched.ref,
                similarity=similarity(track, matched),
                delta_t=matched.entry_time - track.exit_time,
                source=source,
                dest=dest,
            ))
    found.sort(key=lambda c: (c.exit_track.seq, c.matched_track.seq))
    return found


def filter_reliable(cands: Sequence[Correspondence], theta_sim: float) -> List[Correspondence]:
    """Надежные соответствия: строго S > theta_sim"""
    return [c for c in cands if c.similarity > theta_sim]


def build_histogram(delta_ts: Sequence[float], bin_width: float, lo: float, hi: float) -> Histogram:
    """
    Нормированная гистограмма dt на [lo, hi].

    Бины замкнуты справа: (e_k, e_{k+1}], первый бин включает lo.
    Значения вне диапазона отбрасываются и учитываются в discarded.

    Raises:
        TopologyException: Если bin_width <= 0 или hi <= lo
    """
    if bin_width <= 0:
        raise TopologyException(f"Ширина бина должна быть > 0, получено {bin_width}")
    if not hi > lo:
        raise TopologyException(f"Пустой диапазон гистограммы [{lo}, {hi}]")
    n_bins = max(1, int(math.ceil((hi - lo) / bin_width - 1e-9)))
    edges = lo + bin_width * np.arange(n_bins + 1)
    values = np.asarray(delta_ts, dtype=np.float64).reshape(-1)
    inside = values[(values >= lo) & (values <= hi)]
    counts = np.zeros(n_bins)
    if inside.size:
        index = np.maximum(np.searchsorted(edges, inside, side="left") - 1, 0)
        np.add.at(counts, np.minimum(index, n_bins - 1), 1.0)
    support = int(inside.size)
    masses = counts / support if support else counts
    return Histogram(edges=edges, masses=masses, support=support, discarded=int(values.size - inside.size))


def _scaled_gaussian(x, a, mu, sigma):
    return a * np.exp(-((x - mu) ** 2) / (2.0 * sigma ** 2))


def _moments(hist: Histogram):
    centers = hist.centers
    total = hist.masses.sum()
    if total <= 0:
        return float(centers.mean()), hist.bin_width / 2.0
    mu = float(np.dot(hist.masses, centers) / total)
    var = float(np.dot(hist.masses, (centers - mu) ** 2) / total)
    return mu, max(math.sqrt(var), hist.bin_width / 2.0)


def _r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 1e-15:
        # Плоская гистограмма: пика нет, гауссиана ничего не объясняет
        return 0.0
    return 1.0 - float(np.sum((y - fitted) ** 2)) / ss_tot


def _peak_start(x: np.ndarray, y: np.ndarray, bin_width: float) -> list:
    """Начальное приближение по пику: высота, положение и ширина на полувысоте"""
    peak = int(np.argmax(y))
    half = y[peak] / 2.0
    left = peak
    while left > 0 and y[left - 1] >= half:
        left -= 1
    right = peak
    while right < y.size - 1 and y[right + 1] >= half:
        right += 1
    # FWHM = 2.355 sigma
    return [float(y[peak]), float(x[peak]), max((right - left + 1) * bin_width / 2.355, bin_width / 2.0)]


def _starts(hist: Histogram, mu0: float, sigma0: float) -> List[list]:
    x, y = hist.centers, hist.masses
    starts = [[float(y.max()), mu0, sigma0], _peak_start(x, y, hist.bin_width)]
    if y.size >= 5:
        smoothed = np.convolve(y, np.array([1.0, 2.0, 3.0, 2.0, 1.0]) / 9.0, mode="same")
        starts.append(_peak_start(x, smoothed, hist.bin_width))
    return starts


def fit_gaussian(hist: Histogram) -> GaussianFit:
    """
    Аппроксимирует гистограмму функцией a*exp(-(x-mu)^2/(2 sigma^2)).

    Нелинейный МНК с ограничениями запускается из нескольких начальных точек
    (моменты гистограммы, самый высокий бин, пик сглаженной гистограммы);
    берется решение с наименьшей суммой квадратов остатков.
    E = clamp(1 - R^2, 0, 1), R^2 по всем бинам диапазона, включая пустые.
    Меньше трех непустых бинов - вырожденная аппроксимация, E = 1.
    """
    mu0, sigma0 = _moments(hist)
    if hist.non_empty < 3:
        return GaussianFit(mu=mu0, sigma=sigma0, fit_error=1.0, amplitude=float(hist.masses.max(initial=0.0)),
                           degenerate=True)

    x, y = hist.centers, hist.masses
    lo, hi = float(hist.edges[0]), float(hist.edges[-1])
    span = hi - lo
    lower, upper = [0.0, lo, hist.bin_width / 10.0], [np.inf, hi, span]

    best = None
    best_sse = np.inf
    for a0, m0, s0 in _starts(hist, mu0, sigma0):
        p0 = [a0, min(max(m0, lo), hi), min(max(s0, lower[2]), span)]
        try:
            popt, _ = curve_fit(_scaled_gaussian, x, y, p0=p0, bounds=(lower, upper), maxfev=5000)
            params = [float(v) for v in popt]
        except (RuntimeError, ValueError) as e:
            logger.debug(f"МНК не сошелся из {p0}: {e}")
            params = p0
        sse = float(np.sum((y - _scaled_gaussian(x, *params)) ** 2))
        if sse < best_sse:
            best, best_sse = params, sse
    a, mu, sigma = best
    r2 = _r_squared(y, _scaled_gaussian(x, a, mu, sigma))
    return GaussianFit(mu=mu, sigma=sigma, fit_error=float(np.clip(1.0 - r2, 0.0, 1.0)), amplitude=a)


def connectivity_confidence(sigma: float, fit_error: float, scale: float) -> float:
    """conf = exp(-sigma/scale) * (1 - E)"""
    if sigma <= 0 or scale <= 0:
        raise TopologyException(f"sigma и масштаб должны быть > 0: sigma={sigma}, scale={scale}")
    if not 0.0 <= fit_error <= 1.0:
        raise TopologyException(f"Ошибка аппроксимации вне [0,1]: {fit_error}")
    return math.exp(-sigma / scale) * (1.0 - fit_error)


def time_bounds(mu: float, sigma: float, R: float) -> tuple:
    """
    Центральные квантили N(mu, sigma^2) с массой R% между ними.

    Returns:
        tuple: (T_L, T_U)
    """
    if sigma <= 0:
        raise TopologyException(f"sigma должна быть > 0, получено {sigma}")
    if not 0.0 <= R < 100.0:
        raise TopologyException(f"R должно лежать в [0, 100), получено {R}")
    z = float(norm.ppf((1.0 + R / 100.0) / 2.0))
    return mu - z * sigma, mu + z * sigma


def empirical_bounds(hist: Histogram, R: float) -> tuple:
    """Квантили (1-R)/2 и (1+R)/2 кумулятивной гистограммы с линейной интерполяцией внутри бина"""
    if hist.support == 0:
        raise TopologyException("Пустая гистограмма")
    if not 0.0 <= R < 100.0:
        raise TopologyException(f"R должно лежать в [0, 100), получено {R}")
    cdf = np.concatenate([[0.0], np.cumsum(hist.masses)])
    q_lo, q_hi = (1.0 - R / 100.0) / 2.0, (1.0 + R / 100.0) / 2.0
    # Пустые бины дают горизонтальные участки CDF; interp берет первую точку плато
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return float(np.interp(q_lo, cdf[keep], hist.edges[keep])), float(np.interp(q_hi, cdf[keep], hist.edges[keep]))


def update_window(fit_error: float, T_L: float, T_U: float) -> float:
    """
    T = (T_U - T_L) / (1 - E): чем хуже аппроксимация, тем шире окно.

    Raises:
        TopologyException: E >= 1 (вызывающий сохраняет прежнее окно) или T_U <= T_L
    """
    if fit_error >= 1.0:
        raise TopologyException(DEGENERATE_FIT_MESSAGE)
    if fit_error < 0.0:
        raise TopologyException(f"Ошибка аппроксимации вне [0,1): {fit_error}")
    if not T_U > T_L:
        raise TopologyException(f"Некорректные границы окна: T_L={T_L}, T_U={T_U}")
    return (T_U - T_L) / (1.0 - fit_error)


def fit_transit(
    source: str,
    dest: str,
    delta_ts: Sequence[float],
    lo: float,
    hi: float,
    cfg: PipelineConfig,
) -> TransitDistribution:
    """Гистограмма -> аппроксимация -> уверенность для одной направленной пары"""
    hist = build_histogram(delta_ts, cfg.bin_width, lo, hi)
    fit = fit_gaussian(hist)
    confidence = connectivity_confidence(fit.sigma, fit.fit_error, cfg.sigma_scale)
    if hist.discarded:
        logger.debug(f"{source}->{dest}: {hist.discarded} значений dt вне [{lo:.1f}, {hi:.1f}] отброшено")
    return TransitDistribution(
        source=source,
        dest=dest,
        bin_edges=tuple(float(e) for e in hist.edges),
        masses=tuple(float(m) for m in hist.masses),
        mu=fit.mu,
        sigma=fit.sigma,
        fit_error=fit.fit_error,
        confidence=confidence,
        support=hist.support,
        discarded=hist.discarded,
        degenerate=fit.degenerate,
        amplitude=fit.amplitude,
    )


def distribution_bounds(distribution: TransitDistribution, cfg: PipelineConfig) -> tuple:
    """(T_L, T_U) в выбранном режиме: параметрическом или по гистограмме"""
    if cfg.bound_mode == "empirical" and distribution.support > 0:
        hist = Histogram(
            edges=np.asarray(distribution.bin_edges),
            masses=np.asarray(distribution.masses),
            support=distribution.support,
        )
        T_L, T_U = empirical_bounds(hist, cfg.quantile_R)
        if T_U > T_L:
            return T_L, T_U
    return time_bounds(distribution.mu, distribution.sigma, cfg.quantile_R)


def histogram_frame(distribution: TransitDistribution) -> pd.DataFrame:
    """
    Таблица для построения графика: bin_center, mass, fitted_value по бинам
    и итоговая строка с параметрами аппроксимации.

    fitted_value - значение той же кривой a*exp(-(x-mu)^2/(2 sigma^2)), по которой
    считается ошибка аппроксимации; для распределения без амплитуды - масса бина под N(mu, sigma^2).
    """
    centers = distribution.bin_centers
    width = float(distribution.bin_edges[1] - distribution.bin_edges[0])
    if distribution.amplitude is not None:
        fitted = _scaled_gaussian(centers, distribution.amplitude, distribution.mu, distribution.sigma)
    else:
        fitted = width * norm.pdf(centers, loc=distribution.mu, scale=distribution.sigma)
    bins = pd.DataFrame({
        "row": "bin",
        "bin_center": centers,
        "mass": distribution.masses,
        "fitted_value": fitted,
    })
    summary = pd.DataFrame([{
        "row": "summary",
        "mu": distribution.mu,
        "sigma": distribution.sigma,
        "fit_error": distribution.fit_error,
        "confidence": distribution.confidence,
        "support": distribution.support,
    }])
    columns = ["row", "bin_center", "mass", "fitted_value", "mu", "sigma", "fit_error", "confidence", "support"]
    return pd.concat([bins, summary], ignore_index=True).reindex(columns=columns)
