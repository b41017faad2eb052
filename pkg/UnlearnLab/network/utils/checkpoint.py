"""
Файл: checkpoint.py
Описание: Бинарный формат чекпоинтов MULAB

Формат (little-endian):
- магические байты b"MULAB", версия u16 = 1
- затем для каждого тензора до конца файла:
  длина имени u32, имя UTF-8, ndim u32, размеры u32[ndim], данные f64[]

Архитектура в файле не хранится: загрузка идет в модель с тем же ModelConfig.
"""

import logging
import struct
from pathlib import Path
from typing import Dict

import numpy as np

from network.services.model import Model, ModelConfig, init_model

logger = logging.getLogger(__name__)

MAGIC = b'MULAB'
VERSION = 1


def encode_tensors(tensors: Dict[str, np.ndarray]) -> bytes:
    """Сериализация словаря имя -> массив"""
    chunks = [MAGIC, struct.pack('<H', VERSION)]
    for name, values in tensors.items():
        values = np.asarray(values, dtype=np.float64)
        encoded = name.encode('utf-8')
        chunks.append(struct.pack('<I', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<I', values.ndim))
        chunks.append(struct.pack(f'<{values.ndim}I', *values.shape))
        chunks.append(values.astype('<f8').tobytes(order='C'))
    return b''.join(chunks)


def decode_tensors(payload: bytes) -> Dict[str, np.ndarray]:
    """Разбор байтов формата MULAB"""
    if payload[:len(MAGIC)] != MAGIC:
        raise ValueError("not a MULAB checkpoint (bad magic)")
    offset = len(MAGIC)
    (version,) = struct.unpack_from('<H', payload, offset)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    offset += 2

    tensors: Dict[str, np.ndarray] = {}
    try:
        while offset < len(payload):
            (name_len,) = struct.unpack_from('<I', payload, offset)
            offset += 4
            name = payload[offset:offset + name_len].decode('utf-8')
            offset += name_len
            (ndim,) = struct.unpack_from('<I', payload, offset)
            offset += 4
            shape = struct.unpack_from(f'<{ndim}I', payload, offset)
            offset += 4 * ndim
            count = int(np.prod(shape, dtype=np.int64))
            end = offset + 8 * count
            if end > len(payload):
                raise ValueError(f"truncated data for tensor {name!r}")
            tensors[name] = np.frombuffer(payload[offset:end], dtype='<f8').astype(np.float64).reshape(shape)
            offset = end
    except struct.error as e:
        raise ValueError(f"truncated checkpoint: {e}") from e
    return tensors


def save_checkpoint(model: Model, path) -> Path:
    """Сохраняет параметры модели в файл"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_tensors(model.state_dict()))
    logger.debug(f"Checkpoint saved: {path}")
    return path


def load_checkpoint(path, config: ModelConfig) -> Model:
    """Загружает параметры в новую модель с заданной архитектурой"""
    model = init_model(config)
    model.load_state_dict(decode_tensors(Path(path).read_bytes()))
    return model
