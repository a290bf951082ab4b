"""
Index file format (little-endian).

    magic "MRQIVF01", u32 version
    u32 D, d, k, N, B_q
    f32 epsilon0, m, c0
    PCA blob
    rotation blob: u64 seed, f32[d·d]
    centroids: u32 centroid_dim, f32[k·centroid_dim]
    k blocks: u32 len, u32 ids[len], u64 codes[len·W], f32 factors[2·len] (denom, err_coeff
              interleaved), f32 dists[len], f32 tail_norms[len], f32 heads[len·d]
    tail store: f32[N·D]

The build time is kept next to the index in "<path>.build.json" so that
fixed-seed builds stay byte-identical.
"""

import json
import logging
from pathlib import Path

import numpy as np

from core.binio import BinaryReader, BinaryWriter
from core.errors import FormatError, InvalidConfigError, VersionMismatchError
from core.linalg import RandomRotation, orthogonality_error
from core.pca import read_pca, write_pca
from index.ivf import ClusterBlock, IndexConfig, IvfIndex
from index.kmeans import Centroids
from quantize.rabitq import words_per_code

logger = logging.getLogger(__name__)

INDEX_MAGIC = b'MRQIVF01'
INDEX_VERSION = 1
BUILD_INFO_SUFFIX = '.build.json'

# Largest |R·Rᵀ − I| entry accepted for a stored rotation
ROTATION_TOLERANCE = 1e-3


def serialize(index: IvfIndex) -> bytes:
    """Encode an index into bytes."""
    config = index.config
    writer = BinaryWriter()
    writer.raw(INDEX_MAGIC)
    writer.u32(INDEX_VERSION)
    writer.u32(index.dim, config.d, index.k, index.size, config.query_bits)
    writer.f32(config.epsilon0, config.m, config.c0)

    write_pca(index.pca, writer)

    writer.u64(index.rot.seed)
    writer.array(index.rot.matrix, '<f4')

    writer.u32(index.centroids.dim)
    writer.array(index.centroids.vectors, '<f4')

    for block in index.blocks:
        writer.u32(len(block))
        writer.array(block.ids, '<u4')
        writer.array(block.codes, '<u8')
        writer.array(np.stack([block.denom, block.err_coeff], axis=1), '<f4')
        writer.array(block.dists, '<f4')
        writer.array(block.tail_norms, '<f4')
        writer.array(block.heads, '<f4')

    writer.array(index.tail_store, '<f4')
    return writer.getvalue()


def deserialize(data: bytes) -> IvfIndex:
    """
    Decode an index from bytes.

    Raises:
        VersionMismatchError: On an unknown magic or version
        FormatError: On truncated or inconsistent content (offset reported)
    """
    reader = BinaryReader(data)
    magic = reader.raw(len(INDEX_MAGIC), 'index magic')
    if magic != INDEX_MAGIC:
        raise VersionMismatchError(f'unknown index header {magic!r}', 0)
    version = reader.u32(what='index version')
    if version != INDEX_VERSION:
        raise VersionMismatchError(f'unsupported index version {version}', len(INDEX_MAGIC))

    header_offset = reader.offset
    dim, d, k, n, query_bits = reader.u32(5, 'index header')
    epsilon0, m, c0 = reader.f32(3, 'index defaults')
    if not (1 <= d <= dim) or k < 1 or k > max(n, 1):
        raise FormatError(f'inconsistent header D={dim}, d={d}, k={k}, N={n}', header_offset)

    pca = read_pca(reader)
    if pca.dim != dim:
        raise FormatError(f'PCA dimension {pca.dim} != header D={dim}', reader.offset)

    rotation_offset = reader.offset
    seed = reader.u64(what='rotation seed')
    matrix = reader.array('<f4', d * d, 'rotation matrix').reshape(d, d)
    if not orthogonality_error(matrix) <= ROTATION_TOLERANCE:
        raise FormatError('stored rotation is not orthogonal', rotation_offset)
    rot = RandomRotation(matrix=matrix.astype(np.float32), seed=int(seed))

    centroid_offset = reader.offset
    centroid_dim = reader.u32(what='centroid dimension')
    if centroid_dim not in (d, dim):
        raise FormatError(f'centroid dimension {centroid_dim} matches neither d nor D', centroid_offset)
    vectors = reader.array('<f4', k * centroid_dim, 'centroids').reshape(k, centroid_dim)
    centroids = Centroids(k=k, vectors=vectors.astype(np.float32))

    words = words_per_code(d)
    blocks = []
    total = 0
    for cluster in range(k):
        length_offset = reader.offset
        length = reader.u32(what=f'block {cluster} length')
        total += length
        if total > n:
            raise FormatError(f'block sizes exceed N={n}', length_offset)
        ids = reader.array('<u4', length, f'block {cluster} ids').astype(np.int64)
        if length and int(ids.max()) >= n:
            raise FormatError(f'block {cluster} has an id out of range', length_offset)
        codes = reader.array('<u8', length * words, f'block {cluster} codes').reshape(length, words)
        factors = reader.array('<f4', 2 * length, f'block {cluster} factors').reshape(length, 2)
        dists = reader.array('<f4', length, f'block {cluster} distances')
        tail_norms = reader.array('<f4', length, f'block {cluster} tail norms')
        heads = reader.array('<f4', length * d, f'block {cluster} heads').reshape(length, d)
        blocks.append(ClusterBlock(
            ids=ids,
            codes=codes.astype(np.uint64),
            denom=np.ascontiguousarray(factors[:, 0], dtype=np.float32),
            err_coeff=np.ascontiguousarray(factors[:, 1], dtype=np.float32),
            dists=dists.astype(np.float32),
            tail_norms=tail_norms.astype(np.float32),
            heads=heads.astype(np.float32),
        ))
    if total != n:
        raise FormatError(f'block sizes sum to {total}, header says N={n}', reader.offset)

    tail_store = reader.array('<f4', n * dim, 'tail store').reshape(n, dim).astype(np.float32)
    if reader.remaining:
        raise FormatError(f'{reader.remaining} trailing bytes after index', reader.offset)

    centroid_mode = 'full' if centroid_dim == dim and d < dim else 'projected'
    try:
        config = IndexConfig(
            d=d, k=k, query_bits=query_bits, epsilon0=float(epsilon0), m=float(m), c0=float(c0),
            seed=int(seed), centroid_mode=centroid_mode,
        )
    except InvalidConfigError as e:
        raise FormatError(f'invalid index parameters: {e}', header_offset) from e
    return IvfIndex(
        config=config, pca=pca, rot=rot, centroids=centroids, blocks=blocks, tail_store=tail_store,
    )


def build_info_path(path: str | Path) -> Path:
    """Sidecar file holding the build time of an index file."""
    return Path(f'{path}{BUILD_INFO_SUFFIX}')


def save_index(index: IvfIndex, path: str | Path) -> None:
    """Write an index file, plus its build-time sidecar when the build time is known."""
    payload = serialize(index)
    Path(path).write_bytes(payload)
    if index.build_seconds is not None:
        info = {'build_seconds': round(index.build_seconds, 3), 'N': index.size, 'k': index.k}
        build_info_path(path).write_text(json.dumps(info), encoding='utf-8')
    logger.info(f'インデックスを保存しました: {path} ({len(payload)}バイト)')


def load_index(path: str | Path) -> IvfIndex:
    """Read an index file; the build time comes from the sidecar if one is readable."""
    index = deserialize(Path(path).read_bytes())
    info_path = build_info_path(path)
    if info_path.exists():
        try:
            index.build_seconds = float(json.loads(info_path.read_text(encoding='utf-8'))['build_seconds'])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            logger.warning(f'ビルド情報を読み込めませんでした: {info_path}')
    logger.info(f'インデックスを読み込みました: {path} (N={index.size}, D={index.dim}, d={index.d}, k={index.k})')
    return index
