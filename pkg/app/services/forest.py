"""
Мульти-шот ре-идентификация на случайных лесах.

Деревья выращиваются реализацией CART из scikit-learn и сразу переводятся
в неизменяемые массивы DecisionTree; предсказание выполняется по этим
массивам, поэтому сериализованный лес работает без исходного оценщика.
"""
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from app.core.exceptions import ReidTopologyException
from app.models.forest import LEAF, DecisionTree, Forest, ForestSeries
from app.models.observation import FeatureVector, PersonTrack
from app.schemas.config import ForestParams
from app.utils.random import derive_seed

logger = logging.getLogger(__name__)


class ForestException(ReidTopologyException):
    """Исключение для ошибок обучения и применения лесов"""
    pass


Query = Union[PersonTrack, Sequence[FeatureVector], np.ndarray]


def _tree_from_estimator(estimator) -> DecisionTree:
    tree = estimator.tree_
    feature = np.where(tree.feature >= 0, tree.feature, LEAF)
    return DecisionTree(
        feature=feature,
        threshold=tree.threshold,
        left=tree.children_left,
        right=tree.children_right,
        leaf_values=tree.value[:, 0, :],
    )


def _single_leaf_tree(distribution: np.ndarray) -> DecisionTree:
    return DecisionTree(
        feature=[LEAF],
        threshold=[0.0],
        left=[LEAF],
        right=[LEAF],
        leaf_values=[distribution],
    )


def train_forest(
    gallery: Sequence[PersonTrack],
    hyper: Optional[ForestParams] = None,
    seed: int = 0,
    n_jobs: Optional[int] = None,
    t_start: float = 0.0,
    t_end: float = 0.0,
) -> Forest:
    """
    Обучает лес на наборе появлений галереи.

    Единица бутстрепа - отдельное наблюдение, его метка - метка трека.

    Args:
        gallery: Треки галереи (у каждого должна быть метка)
        hyper: Гиперпараметры леса
        seed: Зерно; при фиксированном зерне результат детерминирован
        n_jobs: Параллельность обучения деревьев

    Returns:
        Forest: Лес с label_set, равным отсортированным меткам галереи

    Raises:
        ForestException: Пустая галерея, трек без метки или разная размерность
    """
    hyper = hyper or ForestParams()
    if not gallery:
        raise ForestException("empty gallery")
    if any(track.label is None for track in gallery):
        raise ForestException("unlabeled track in gallery")
    dims = {track.dimension for track in gallery}
    if len(dims) != 1:
        raise ForestException(f"Разная размерность дескрипторов в галерее: {sorted(dims)}")
    dimension = dims.pop()

    label_set = tuple(sorted({track.label for track in gallery}))
    label_index = {label: i for i, label in enumerate(label_set)}
    X = np.vstack([track.features for track in gallery])
    y = np.concatenate([np.full(len(track), label_index[track.label]) for track in gallery])

    if len(label_set) == 1 or X.shape[0] < 2:
        # Вырожденная галерея: единственный лист с частотами меток
        counts = np.bincount(y, minlength=len(label_set)).astype(np.float64)
        tree = _single_leaf_tree(counts / counts.sum())
        return Forest(trees=(tree,), label_set=label_set, dimension=dimension, t_start=t_start, t_end=t_end)

    estimator = RandomForestClassifier(
        n_estimators=hyper.n_trees,
        criterion="gini",
        max_depth=hyper.max_depth,
        min_samples_leaf=hyper.min_samples_leaf,
        max_features=hyper.max_features,
        bootstrap=hyper.bootstrap,
        random_state=seed,
        n_jobs=n_jobs,
    )
    estimator.fit(X, y)
    # classes_ совпадает с 0..L-1, так как каждая метка встречается хотя бы раз
    trees = tuple(_tree_from_estimator(est) for est in estimator.estimators_)
    logger.debug(f"Лес обучен: {len(trees)} деревьев, {len(label_set)} меток, {X.shape[0]} наблюдений")
    return Forest(trees=trees, label_set=label_set, dimension=dimension, t_start=t_start, t_end=t_end)


def _as_matrix(query: Query) -> np.ndarray:
    if isinstance(query, PersonTrack):
        return query.features
    if isinstance(query, np.ndarray):
        return np.atleast_2d(query)
    items = list(query)
    if not items:
        return np.empty((0, 0))
    return np.vstack([v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64) for v in items])


def predict_posterior_batch(forest: Forest, X: np.ndarray) -> np.ndarray:
    """Апостериорные распределения (n x L) для строк X: среднее распределений листьев по деревьям"""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.ndim != 2 or X.shape[1] != forest.dimension:
        raise ForestException(
            f"Размерность дескриптора {X.shape[1]} не совпадает с размерностью обучения {forest.dimension}"
        )
    # Пороги CART считаются по float32-копии данных
    X = X.astype(np.float32).astype(np.float64)
    total = np.zeros((X.shape[0], len(forest.label_set)))
    for tree in forest.trees:
        total += tree.predict(X)
    posterior = total / len(forest.trees)
    return posterior / posterior.sum(axis=1, keepdims=True)


def predict_posterior(forest: Forest, v: Union[FeatureVector, np.ndarray]) -> Dict[str, float]:
    values = v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64)
    row = predict_posterior_batch(forest, values.reshape(1, -1))[0]
    return dict(zip(forest.label_set, row.tolist()))


def _multishot_vector(forest: Forest, query: Query) -> np.ndarray:
    X = _as_matrix(query)
    if X.shape[0] == 0:
        raise ForestException("empty query")
    return predict_posterior_batch(forest, X).mean(axis=0)


def predict_multishot(forest: Forest, query: Query) -> Dict[str, float]:
    """Среднее одиночных апостериорных распределений по всем наблюдениям запроса"""
    return dict(zip(forest.label_set, _multishot_vector(forest, query).tolist()))


def _argmax_label(forest: Forest, posterior: np.ndarray, candidates: Optional[Iterable[str]]) -> Tuple[str, float]:
    if candidates is None:
        # label_set отсортирован, argmax берет первый максимум -> наименьшая метка
        best = int(np.argmax(posterior))
        return forest.label_set[best], float(posterior[best])
    indices = sorted(i for i in (forest.index_of(c) for c in candidates) if i is not None)
    if not indices:
        raise ForestException("Ни одна из меток-кандидатов не известна лесу")
    restricted = posterior[indices]
    best = indices[int(np.argmax(restricted))]
    return forest.label_set[best], float(posterior[best])


def best_match(forest: Forest, query: Query, candidates: Optional[Iterable[str]] = None) -> Tuple[str, float]:
    """
    Итоговая метка y* = argmax усредненного распределения.

    Args:
        forest: Лес галереи
        query: Трек-запрос или набор дескрипторов
        candidates: Если задано, argmax берется только среди этих меток

    Returns:
        Tuple[str, float]: Метка и ее апостериорная вероятность; ничьи -> наименьшая метка
    """
    return _argmax_label(forest, _multishot_vector(forest, query), candidates)


def best_matches(
    forest: Forest,
    queries: Sequence[PersonTrack],
    candidates: Sequence[Optional[Iterable[str]]],
) -> List[Tuple[str, float]]:
    """Пакетный best_match: все наблюдения всех запросов проходят через лес одним вызовом"""
    if not queries:
        return []
    X = np.vstack([query.features for query in queries])
    posterior = predict_posterior_batch(forest, X)
    bounds = np.cumsum([0] + [len(query) for query in queries])
    results = []
    for i, allowed in enumerate(candidates):
        mean = posterior[bounds[i]:bounds[i + 1]].mean(axis=0)
        results.append(_argmax_label(forest, mean, allowed))
    return results


def similarity(track_a: Query, track_b: Query) -> float:
    """
    Оценка сходства S в [0,1]: максимум косинусного сходства по всем парам появлений.

    Дескрипторы единичные и неотрицательные, поэтому скалярное произведение
    уже является косинусом и не выходит за [0,1].
    """
    A = _as_matrix(track_a)
    B = _as_matrix(track_b)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ForestException("Нельзя сравнить пустой трек")
    return float(np.clip(np.max(A @ B.T), 0.0, 1.0))


def train_forest_series(
    gallery: Sequence[PersonTrack],
    window_T: float,
    stride: Optional[float] = None,
    hyper: Optional[ForestParams] = None,
    seed: int = 0,
    node: str = "",
    n_jobs: Optional[int] = None,
) -> ForestSeries:
    """
    Нарезает галерею по времени входа на слоты [c - T/2, c + T/2) и обучает лес на каждый.

    Центры слотов идут с шагом stride от самого раннего входа и не зависят
    от T, поэтому при увеличении окна галерея каждого слота только расширяется.
    Пустые слоты пропускаются.
    """
    stride = window_T if stride is None else stride
    if window_T <= 0 or stride <= 0:
        raise ForestException(f"Ширина окна и шаг серии должны быть > 0: T={window_T}, stride={stride}")
    if not gallery:
        return ForestSeries(node=node, window_T=window_T, slots=())

    entries = np.array([track.entry_time for track in gallery])
    t_min, t_max = float(entries.min()), float(entries.max())
    half = window_T / 2.0
    k_lo = math.floor(-half / stride) + 1
    k_hi = math.floor((t_max - t_min + half) / stride)

    slots = []
    for k in range(k_lo, k_hi + 1):
        center = t_min + k * stride
        members = [track for track, t in zip(gallery, entries) if center - half <= t < center + half]
        if not members:
            continue
        forest = train_forest(
            members,
            hyper=hyper,
            seed=derive_seed(seed, node, k),
            n_jobs=n_jobs,
            t_start=center - half,
            t_end=center + half,
        )
        slots.append((center, forest))
    logger.debug(f"Серия лесов для {node or 'галереи'}: {len(slots)} слотов, T={window_T:.1f}")
    return ForestSeries(node=node, window_T=window_T, slots=tuple(slots))


def forest_for_time(series: ForestSeries, t: float) -> Forest:
    """Лес слота с центром, ближайшим к t; при равенстве - более ранний слот"""
    if not series.slots:
        raise ForestException("no forest available")
    distances = np.abs(np.asarray(series.centers) - t)
    return series.slots[int(np.argmin(distances))][1]


def slot_index_for_time(series: ForestSeries, t: float) -> int:
    if not series.slots:
        raise ForestException("no forest available")
    return int(np.argmin(np.abs(np.asarray(series.centers) - t)))
