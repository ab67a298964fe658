"""
Детерминированные генераторы случайных чисел.

Все случайные потоки проекта порождаются из одного зерна через
numpy.random.SeedSequence, поэтому фиксированное зерно дает одинаковые
результаты независимо от порядка вызовов в других частях конвейера.
"""
import hashlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _as_entropy(key: Key) -> int:
    if isinstance(key, str):
        # Встроенный hash() зависит от PYTHONHASHSEED
        return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")
    return int(key) & 0xFFFFFFFFFFFFFFFF


def derive_seed(seed: int, *keys: Key) -> int:
    """Зерно для подзадачи, определяемой ключами (узел, номер слота и т.п.)"""
    sequence = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF] + [_as_entropy(k) for k in keys])
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def make_rng(seed: int, *keys: Key) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))
