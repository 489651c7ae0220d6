"""Named parameter blocks, initialisation and the KNN1 binary container."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

import numpy as np

MAGIC = b"KNN1"


class ParamsFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple[int, ...]
    fan_in: int | None = None  # None marks a bias (zero-initialised)
    fan_out: int | None = None


class ModelParams:
    """Ordered mapping of unique names to float64 arrays with fixed shapes.

    All blocks are views into one contiguous buffer (`flat`), which lets the
    optimizer update every parameter with a handful of vector operations.
    """

    def __init__(self, blocks: Iterable[tuple[str, np.ndarray]] | dict):
        items = list(blocks.items() if isinstance(blocks, dict) else blocks)
        names = [name for name, _ in items]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise ValueError(f"duplicate parameter name {dup!r}")
        arrays = [np.asarray(arr, dtype=np.float64) for _, arr in items]
        total = sum(a.size for a in arrays)
        self.flat = np.empty(total)
        self._arrays: dict[str, np.ndarray] = {}
        pos = 0
        for name, arr in zip(names, arrays):
            view = self.flat[pos:pos + arr.size].reshape(arr.shape)
            view[...] = arr
            self._arrays[name] = view
            pos += arr.size
        if not np.all(np.isfinite(self.flat)):
            bad = next(n for n, a in self._arrays.items() if not np.all(np.isfinite(a)))
            raise ValueError(f"parameter {bad!r} has non-finite values")

    @classmethod
    def from_flat(cls, like: "ModelParams", flat: np.ndarray) -> "ModelParams":
        """Same names and shapes as `like`, values taken from `flat`."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != like.flat.shape:
            raise ValueError("flat vector size does not match the parameter layout")
        if not np.all(np.isfinite(flat)):
            raise ValueError("non-finite parameter values")
        out = cls.__new__(cls)
        out.flat = flat.copy()
        out._arrays = {}
        pos = 0
        for name, arr in like.items():
            out._arrays[name] = out.flat[pos:pos + arr.size].reshape(arr.shape)
            pos += arr.size
        return out

    def zero_buffer(self) -> "ModelParams":
        """Zeroed parameters of the same layout, used as a gradient accumulator."""
        return ModelParams.from_flat(self, np.zeros_like(self.flat))

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value) -> None:
        # in-place so the block stays a view of `flat` (supports `grads[k] += g`)
        target = self._arrays[name]
        if value is not target:
            target[...] = value

    def __contains__(self, name) -> bool:
        return name in self._arrays

    def __iter__(self) -> Iterator[str]:
        return iter(self._arrays)

    def __len__(self) -> int:
        return len(self._arrays)

    def items(self):
        return self._arrays.items()

    @property
    def names(self) -> list[str]:
        return list(self._arrays)

    @property
    def size(self) -> int:
        return sum(a.size for a in self._arrays.values())

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: a.shape for k, a in self._arrays.items()}

    def copy(self) -> "ModelParams":
        return ModelParams.from_flat(self, self.flat)

    def zeros_like(self) -> "ModelParams":
        return self.zero_buffer()

    def replace(self, name: str, value: np.ndarray) -> "ModelParams":
        if value.shape != self._arrays[name].shape:
            raise ValueError(f"shape mismatch for {name!r}: {value.shape} vs {self._arrays[name].shape}")
        return ModelParams((k, value if k == name else a) for k, a in self._arrays.items())

    def bit_equal(self, other: "ModelParams") -> bool:
        return self.to_bytes() == other.to_bytes()

    def to_bytes(self) -> bytes:
        out = [MAGIC, struct.pack("<I", len(self._arrays))]
        for name, arr in self._arrays.items():
            raw = name.encode("utf-8")
            out.append(struct.pack("<I", len(raw)))
            out.append(raw)
            out.append(struct.pack("<I", arr.ndim))
            out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ModelParams":
        if data[:4] != MAGIC:
            raise ParamsFormatError("not a KNN1 parameter container")
        pos = 4

        def take(n):
            nonlocal pos
            if pos + n > len(data):
                raise ParamsFormatError("truncated parameter container")
            chunk = data[pos:pos + n]
            pos += n
            return chunk

        (count,) = struct.unpack("<I", take(4))
        blocks = []
        for _ in range(count):
            (nlen,) = struct.unpack("<I", take(4))
            name = take(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<I", take(4))
            shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
            blocks.append((name, arr))
        if pos != len(data):
            raise ParamsFormatError("trailing bytes after parameter container")
        return cls(blocks)

    def save(self, path_or_stream) -> None:
        if hasattr(path_or_stream, "write"):
            path_or_stream.write(self.to_bytes())
            return
        with open(path_or_stream, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path_or_stream: str | IO[bytes]) -> "ModelParams":
        if hasattr(path_or_stream, "read"):
            return cls.from_bytes(path_or_stream.read())
        with open(path_or_stream, "rb") as fh:
            return cls.from_bytes(fh.read())


def init_params(plan: Iterable[ParamSpec], seed: int) -> ModelParams:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    blocks = []
    for spec in plan:
        if spec.fan_in is None:
            blocks.append((spec.name, np.zeros(spec.shape)))
        else:
            bound = np.sqrt(6.0 / (spec.fan_in + spec.fan_out))
            blocks.append((spec.name, rng.uniform(-bound, bound, size=spec.shape)))
    return ModelParams(blocks)
