"""
Single-file checkpoint container

Layout:
    8 bytes   magic b"MKMEDCK1"
    8 bytes   header length, unsigned little-endian
    N bytes   header, canonical JSON (sorted keys, compact)
    blocks    little-endian float32 arrays, in header order

The header carries the format version, the block table (name and shape of
every block) and whatever the caller adds: config snapshot, vocabulary
sizes, normalisation statistics, KG entity names.
"""

import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import numpy as np
import torch
import torch.nn as nn
from loguru import logger

from .errors import CorruptCheckpoint

MAGIC = b"MKMEDCK1"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<Q")
_FLOAT = np.dtype("<f4")


class Checkpoint:
    """Header dictionary plus named float32 parameter blocks"""

    def __init__(self, header: Optional[Dict[str, Any]] = None,
                 blocks: Optional[Mapping[str, np.ndarray]] = None):
        self.header: Dict[str, Any] = dict(header or {})
        self.blocks: "OrderedDict[str, np.ndarray]" = OrderedDict(
            (name, np.ascontiguousarray(array, dtype=_FLOAT)) for name, array in (blocks or {}).items()
        )

    @classmethod
    def from_modules(cls, modules: Mapping[str, nn.Module], header: Optional[Dict[str, Any]] = None) -> 'Checkpoint':
        """Collect state_dict entries of every module under '<prefix>.<key>'"""
        blocks = OrderedDict()
        for prefix, module in modules.items():
            for key, tensor in module.state_dict().items():
                blocks[f"{prefix}.{key}"] = tensor.detach().cpu().to(torch.float64).numpy()
        return cls(header, blocks)

    def state_dict(self, prefix: str) -> Dict[str, torch.Tensor]:
        start = prefix + "."
        return {name[len(start):]: torch.from_numpy(array.astype(np.float32))
                for name, array in self.blocks.items() if name.startswith(start)}

    def load_into(self, module: nn.Module, prefix: str):
        """
        Copy the blocks under prefix into module, cast to each target's dtype

        Raises:
            CorruptCheckpoint: missing, unexpected or wrongly shaped entries
        """
        stored = self.state_dict(prefix)
        target = module.state_dict()
        missing = sorted(set(target) - set(stored))
        unexpected = sorted(set(stored) - set(target))
        if missing or unexpected:
            raise CorruptCheckpoint(f"checkpoint/module mismatch under {prefix!r}: "
                                    f"missing {missing[:5]}, unexpected {unexpected[:5]}")
        state = {}
        for key, value in target.items():
            if tuple(stored[key].shape) != tuple(value.shape):
                raise CorruptCheckpoint(f"{prefix}.{key}: stored shape {tuple(stored[key].shape)}, "
                                        f"module expects {tuple(value.shape)}")
            state[key] = stored[key].to(value.dtype)
        module.load_state_dict(state)

    def to_bytes(self) -> bytes:
        header = dict(self.header)
        header["format_version"] = FORMAT_VERSION
        header["blocks"] = [{"name": name, "shape": list(array.shape)} for name, array in self.blocks.items()]
        encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        body = b"".join(array.tobytes() for array in self.blocks.values())
        return MAGIC + _LENGTH.pack(len(encoded)) + encoded + body

    @classmethod
    def from_bytes(cls, data: bytes) -> 'Checkpoint':
        if data[:len(MAGIC)] != MAGIC:
            raise CorruptCheckpoint("not an MKMed checkpoint (bad magic)")
        offset = len(MAGIC)
        if len(data) < offset + _LENGTH.size:
            raise CorruptCheckpoint("truncated checkpoint header")
        (length,) = _LENGTH.unpack_from(data, offset)
        offset += _LENGTH.size
        try:
            header = json.loads(data[offset:offset + length].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CorruptCheckpoint(f"unreadable checkpoint header: {e}") from e
        offset += length

        version = header.pop("format_version", None)
        if version != FORMAT_VERSION:
            raise CorruptCheckpoint(f"unsupported checkpoint format version {version!r}")
        blocks = OrderedDict()
        for entry in header.pop("blocks", []):
            shape = tuple(entry["shape"])
            nbytes = int(np.prod(shape, dtype=np.int64)) * _FLOAT.itemsize
            if offset + nbytes > len(data):
                raise CorruptCheckpoint(f"block {entry['name']!r} needs {nbytes} bytes past the end of the file")
            blocks[entry["name"]] = np.frombuffer(data, dtype=_FLOAT, count=nbytes // 4, offset=offset).reshape(shape)
            offset += nbytes
        if offset != len(data):
            raise CorruptCheckpoint(f"{len(data) - offset} trailing bytes after the last block")
        return cls(header, blocks)

    def save(self, path: Union[str, Path]):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = self.to_bytes()
        path.write_bytes(payload)
        logger.info(f"Saved checkpoint ({len(self.blocks)} blocks, {len(payload)} bytes) to {path}")

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'Checkpoint':
        path = Path(path)
        if not path.exists():
            raise CorruptCheckpoint(f"checkpoint {path} does not exist")
        checkpoint = cls.from_bytes(path.read_bytes())
        logger.info(f"Loaded checkpoint {path} ({len(checkpoint.blocks)} blocks)")
        return checkpoint
