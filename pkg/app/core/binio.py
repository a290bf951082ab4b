"""Little-endian binary reader/writer used by the model and index formats."""

import struct

import numpy as np

from core.errors import FormatError


class BinaryWriter:
    """Accumulates little-endian fields into a byte buffer."""

    def __init__(self):
        self._parts: list[bytes] = []

    def raw(self, data: bytes) -> None:
        self._parts.append(bytes(data))

    def u32(self, *values: int) -> None:
        self._parts.append(struct.pack(f'<{len(values)}I', *values))

    def u64(self, *values: int) -> None:
        self._parts.append(struct.pack(f'<{len(values)}Q', *values))

    def f32(self, *values: float) -> None:
        self._parts.append(struct.pack(f'<{len(values)}f', *values))

    def array(self, arr: np.ndarray, dtype: str) -> None:
        self._parts.append(np.ascontiguousarray(arr, dtype=dtype).tobytes())

    def getvalue(self) -> bytes:
        return b''.join(self._parts)


class BinaryReader:
    """Reads little-endian fields from a buffer, tracking the offset for error reports."""

    def __init__(self, data: bytes, offset: int = 0):
        self._data = memoryview(data)
        self.offset = offset

    def _take(self, size: int, what: str) -> memoryview:
        end = self.offset + size
        if size < 0 or end > len(self._data):
            raise FormatError(f'unexpected end of data while reading {what}', self.offset)
        chunk = self._data[self.offset:end]
        self.offset = end
        return chunk

    def raw(self, size: int, what: str = 'bytes') -> bytes:
        return bytes(self._take(size, what))

    def u32(self, count: int = 1, what: str = 'u32'):
        values = struct.unpack(f'<{count}I', self._take(4 * count, what))
        return values[0] if count == 1 else values

    def u64(self, count: int = 1, what: str = 'u64'):
        values = struct.unpack(f'<{count}Q', self._take(8 * count, what))
        return values[0] if count == 1 else values

    def f32(self, count: int = 1, what: str = 'f32'):
        values = struct.unpack(f'<{count}f', self._take(4 * count, what))
        return values[0] if count == 1 else values

    def array(self, dtype: str, count: int, what: str = 'array') -> np.ndarray:
        dt = np.dtype(dtype)
        chunk = self._take(dt.itemsize * count, what)
        # Copy so the result owns its memory and is writeable-independent of the buffer
        return np.frombuffer(chunk, dtype=dt, count=count).astype(dt.newbyteorder('='))

    @property
    def remaining(self) -> int:
        return len(self._data) - self.offset
