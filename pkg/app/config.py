"""Runtime defaults, configurable via environment variables."""

import logging
import os

from dotenv import load_dotenv

# Values in .env do not override variables already set in the environment
load_dotenv()

logger = logging.getLogger(__name__)

# Error-bound multipliers
try:
    EPSILON0 = float(os.environ.get('MRQ_EPSILON0', 1.9))
    if EPSILON0 <= 0:
        logger.warning(f'MRQ_EPSILON0が範囲外です ({EPSILON0})。デフォルト値1.9を使用します。')
        EPSILON0 = 1.9
except (ValueError, TypeError):
    logger.warning('MRQ_EPSILON0設定が無効です。デフォルト値1.9を使用します。')
    EPSILON0 = 1.9

try:
    M = float(os.environ.get('MRQ_M', 4.0))
    if M <= 0:
        logger.warning(f'MRQ_Mが範囲外です ({M})。デフォルト値4.0を使用します。')
        M = 4.0
except (ValueError, TypeError):
    logger.warning('MRQ_M設定が無効です。デフォルト値4.0を使用します。')
    M = 4.0

# Concentration constant of the quantization bound (empirical)
try:
    C0 = float(os.environ.get('MRQ_C0', 0.5))
except (ValueError, TypeError):
    logger.warning('MRQ_C0設定が無効です。デフォルト値0.5を使用します。')
    C0 = 0.5

try:
    QUERY_BITS = int(os.environ.get('MRQ_QUERY_BITS', 4))
    if QUERY_BITS < 1 or QUERY_BITS > 8:
        logger.warning(f'MRQ_QUERY_BITSが範囲外です ({QUERY_BITS})。デフォルト値4を使用します。')
        QUERY_BITS = 4
except (ValueError, TypeError):
    logger.warning('MRQ_QUERY_BITS設定が無効です。デフォルト値4を使用します。')
    QUERY_BITS = 4

try:
    SEED = int(os.environ.get('MRQ_SEED', 42))
except (ValueError, TypeError):
    logger.warning('MRQ_SEED設定が無効です。デフォルト値42を使用します。')
    SEED = 42

try:
    PCA_SAMPLE_LIMIT = int(os.environ.get('MRQ_PCA_SAMPLE_LIMIT', 100_000))
    if PCA_SAMPLE_LIMIT < 2:
        logger.warning(f'MRQ_PCA_SAMPLE_LIMITが範囲外です ({PCA_SAMPLE_LIMIT})。デフォルト値100000を使用します。')
        PCA_SAMPLE_LIMIT = 100_000
except (ValueError, TypeError):
    logger.warning('MRQ_PCA_SAMPLE_LIMIT設定が無効です。デフォルト値100000を使用します。')
    PCA_SAMPLE_LIMIT = 100_000

# Seed used for PCA subsampling; fixed so training is reproducible
PCA_SAMPLE_SEED = 42

try:
    KMEANS_MAX_ITERS = int(os.environ.get('MRQ_KMEANS_MAX_ITERS', 25))
    if KMEANS_MAX_ITERS < 1:
        logger.warning(f'MRQ_KMEANS_MAX_ITERSが範囲外です ({KMEANS_MAX_ITERS})。デフォルト値25を使用します。')
        KMEANS_MAX_ITERS = 25
except (ValueError, TypeError):
    logger.warning('MRQ_KMEANS_MAX_ITERS設定が無効です。デフォルト値25を使用します。')
    KMEANS_MAX_ITERS = 25

try:
    THREADS = max(1, int(os.environ.get('MRQ_THREADS', 1)))
except (ValueError, TypeError):
    logger.warning('MRQ_THREADS設定が無効です。デフォルト値1を使用します。')
    THREADS = 1


def get_log_dir() -> str:
    """Log directory, read at call time so tests can redirect it."""
    return os.environ.get('LOG_DIR', 'logs')
