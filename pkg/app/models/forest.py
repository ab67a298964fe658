"""
Неизменяемые представления деревьев решений, лесов и временных серий лесов
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from app.models.observation import CoreTypeException

LEAF = -1


def _frozen(array, dtype) -> np.ndarray:
    result = np.array(array, dtype=dtype, copy=True)
    result.setflags(write=False)
    return result


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """
    Бинарное дерево в виде параллельных массивов.

    Для внутреннего узла feature >= 0 и переход влево при x[feature] <= threshold;
    для листа feature == -1, а строка leaf_values - распределение по меткам галереи.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "feature", _frozen(self.feature, np.int64))
        object.__setattr__(self, "threshold", _frozen(self.threshold, np.float64))
        object.__setattr__(self, "left", _frozen(self.left, np.int64))
        object.__setattr__(self, "right", _frozen(self.right, np.int64))
        values = np.array(self.leaf_values, dtype=np.float64, copy=True)
        n_nodes = self.feature.shape[0]
        if values.ndim != 2 or values.shape[0] != n_nodes:
            raise CoreTypeException("Размер таблицы листьев не совпадает с числом узлов")
        if np.any(values < 0):
            raise CoreTypeException("Распределение листа содержит отрицательные значения")
        sums = values.sum(axis=1, keepdims=True)
        sums[sums == 0] = 1.0
        values = values / sums
        leaves = self.feature == LEAF
        if not np.allclose(values[leaves].sum(axis=1), 1.0, atol=1e-9):
            raise CoreTypeException("Распределение листа не нормировано")
        values.setflags(write=False)
        object.__setattr__(self, "leaf_values", values)

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Индексы листьев для каждой строки X"""
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while np.any(active):
            idx = rows[active]
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_values[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "leaf_values": self.leaf_values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionTree":
        return cls(
            feature=data["feature"],
            threshold=data["threshold"],
            left=data["left"],
            right=data["right"],
            leaf_values=data["leaf_values"],
        )


@dataclass(frozen=True, eq=False)
class Forest:
    """Лес классификаторов p(y|v) над метками одной галереи"""
    trees: Tuple[DecisionTree, ...]
    label_set: Tuple[str, ...]
    dimension: int
    t_start: float = 0.0
    t_end: float = 0.0
    _label_index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.label_set:
            raise CoreTypeException("Лес без меток")
        if not self.trees:
            raise CoreTypeException("Лес без деревьев")
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "label_set", tuple(self.label_set))
        for tree in self.trees:
            if tree.leaf_values.shape[1] != len(self.label_set):
                raise CoreTypeException("Деревья леса обучены на разных наборах меток")
        object.__setattr__(self, "_label_index", {label: i for i, label in enumerate(self.label_set)})

    def index_of(self, label: str) -> Optional[int]:
        return self._label_index.get(label)

    def to_dict(self) -> dict:
        return {
            "label_set": list(self.label_set),
            "dimension": self.dimension,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Forest":
        return cls(
            trees=tuple(DecisionTree.from_dict(t) for t in data["trees"]),
            label_set=tuple(data["label_set"]),
            dimension=int(data["dimension"]),
            t_start=float(data.get("t_start", 0.0)),
            t_end=float(data.get("t_end", 0.0)),
        )


@dataclass(frozen=True, eq=False)
class ForestSeries:
    """Серия лесов одного узла галереи, нарезанная по времени входа с шириной слота T"""
    node: str
    window_T: float
    slots: Tuple[Tuple[float, Forest], ...] = ()

    def __post_init__(self):
        slots = tuple(self.slots)
        centers = [center for center, _ in slots]
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise CoreTypeException("Центры слотов серии должны строго возрастать")
        object.__setattr__(self, "slots", slots)

    @property
    def centers(self) -> Tuple[float, ...]:
        return tuple(center for center, _ in self.slots)

    def __len__(self) -> int:
        return len(self.slots)

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "window_T": self.window_T,
            "slots": [{"center": center, "forest": forest.to_dict()} for center, forest in self.slots],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForestSeries":
        return cls(
            node=data["node"],
            window_T=float(data["window_T"]),
            slots=tuple((float(s["center"]), Forest.from_dict(s["forest"])) for s in data["slots"]),
        )
