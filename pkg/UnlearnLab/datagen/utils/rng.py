"""
Файл: rng.py
Описание: Независимые RNG-потоки

Каждая операция получает собственный поток, производный от (seed, tag, ключи...),
поэтому параллельные вызовы остаются детерминированными.
"""

import zlib

import numpy as np


def _entropy(seed, tag, keys):
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return [int(seed), zlib.crc32(tag.encode('utf-8')), *[int(k) for k in keys]]


def derive_rng(seed: int, tag: str, *keys: int) -> np.random.Generator:
    """Генератор numpy для пары (seed, tag) и дополнительных ключей"""
    return np.random.default_rng(_entropy(seed, tag, keys))


def derive_seed(seed: int, tag: str, *keys: int) -> int:
    """Целочисленный seed (u32) для вложенного потока"""
    return int(np.random.SeedSequence(_entropy(seed, tag, keys)).generate_state(1)[0])
