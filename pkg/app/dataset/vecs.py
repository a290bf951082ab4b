"""
fvecs / bvecs / ivecs readers and writers.

Each record is a little-endian u32 dimension followed by that many elements
(f32 for fvecs, u8 for bvecs, i32 for ivecs). Every record of a file must
have the same dimension.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from core.errors import FormatError, InconsistentDimensionError, InvalidConfigError

logger = logging.getLogger(__name__)

ELEMENT_TYPES = {
    'f32': np.dtype('<f4'),
    'u8': np.dtype('u1'),
    'i32': np.dtype('<i4'),
}

SUFFIX_KINDS = {
    '.fvecs': 'f32',
    '.bvecs': 'u8',
    '.ivecs': 'i32',
}


@dataclass(frozen=True)
class DatasetFile:
    """Shape of a vecs file: count·(4 + dim·element_size) bytes."""

    path: Path
    kind: str
    count: int
    dim: int

    @property
    def element_size(self) -> int:
        return ELEMENT_TYPES[self.kind].itemsize

    @property
    def nbytes(self) -> int:
        return self.count * (4 + self.dim * self.element_size)


def kind_for_path(path: str | Path) -> str:
    """Element kind implied by the file suffix."""
    suffix = Path(path).suffix.lower()
    if suffix not in SUFFIX_KINDS:
        raise InvalidConfigError(f'cannot infer element kind from {path!s}; expected one of {sorted(SUFFIX_KINDS)}')
    return SUFFIX_KINDS[suffix]


def _element_type(kind: str) -> np.dtype:
    if kind not in ELEMENT_TYPES:
        raise InvalidConfigError(f'unknown element kind {kind!r}; expected one of {sorted(ELEMENT_TYPES)}')
    return ELEMENT_TYPES[kind]


def parse_vecs(raw: bytes, kind: str) -> np.ndarray:
    """
    Decode vecs-format bytes into an (N, D) matrix.

    Raises:
        FormatError: On a truncated record or zero dimension (offset reported)
        InconsistentDimensionError: On the first record whose dimension differs from record 0
    """
    dtype = _element_type(kind)
    if len(raw) == 0:
        return np.zeros((0, 0), dtype=dtype.newbyteorder('='))
    if len(raw) < 4:
        raise FormatError('truncated record header', 0)

    dim = int(np.frombuffer(raw, dtype='<u4', count=1)[0])
    if dim == 0:
        raise FormatError('record dimension is zero', 0)
    record = 4 + dim * dtype.itemsize
    n = len(raw) // record

    records = np.frombuffer(raw, dtype=np.uint8, count=n * record).reshape(n, record)
    dims = records[:, :4].copy().view('<u4').reshape(-1)
    mismatched = np.flatnonzero(dims != dim)
    if len(mismatched):
        row = int(mismatched[0])
        raise InconsistentDimensionError(
            f'dimension {int(dims[row])} differs from {dim}', record=row, offset=row * record,
        )

    leftover = len(raw) - n * record
    if leftover:
        offset = n * record
        if leftover >= 4:
            found = int(np.frombuffer(raw, dtype='<u4', count=1, offset=offset)[0])
            if found != dim:
                raise InconsistentDimensionError(
                    f'dimension {found} differs from {dim}', record=n, offset=offset,
                )
        raise FormatError(f'truncated record {n}', offset)

    values = records[:, 4:].copy().view(dtype).reshape(n, dim)
    return values.astype(dtype.newbyteorder('='))


def read_vecs(path: str | Path, kind: str | None = None) -> np.ndarray:
    """
    Read a vecs file.

    Args:
        path: File path
        kind: 'f32', 'u8' or 'i32' (inferred from the suffix when omitted)

    Returns:
        (N, D) matrix of the element type
    """
    kind = kind or kind_for_path(path)
    matrix = parse_vecs(Path(path).read_bytes(), kind)
    logger.info(f'{path}を読み込みました: {matrix.shape[0]}件 x {matrix.shape[1]}次元 ({kind})')
    return matrix


def encode_vecs(matrix, kind: str) -> bytes:
    """Encode an (N, D) matrix as vecs-format bytes."""
    dtype = _element_type(kind)
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise InvalidConfigError(f'expected a 2-D matrix, got {matrix.ndim} dimensions')
    n, dim = matrix.shape
    headers = np.full((n, 1), dim, dtype='<u4').view(np.uint8)
    body = np.ascontiguousarray(matrix.astype(dtype)).view(np.uint8).reshape(n, dim * dtype.itemsize)
    return np.concatenate([headers, body], axis=1).tobytes()


def write_vecs(path: str | Path, matrix, kind: str | None = None) -> None:
    """Write a matrix as a vecs file (kind inferred from the suffix when omitted)."""
    kind = kind or kind_for_path(path)
    Path(path).write_bytes(encode_vecs(matrix, kind))
    logger.info(f'{path}に書き込みました: {np.shape(matrix)[0]}件 ({kind})')


def inspect_vecs(path: str | Path, kind: str | None = None) -> DatasetFile:
    """Count and dimension of a vecs file, validated against its size."""
    kind = kind or kind_for_path(path)
    dtype = _element_type(kind)
    path = Path(path)
    size = path.stat().st_size
    if size == 0:
        return DatasetFile(path=path, kind=kind, count=0, dim=0)
    with path.open('rb') as f:
        head = f.read(4)
    if len(head) < 4:
        raise FormatError('truncated record header', 0)
    dim = int(np.frombuffer(head, dtype='<u4')[0])
    record = 4 + dim * dtype.itemsize
    if dim == 0 or size % record:
        raise FormatError(f'file size {size} is not a multiple of record size {record}', size - size % record)
    return DatasetFile(path=path, kind=kind, count=size // record, dim=dim)
