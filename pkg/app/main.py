"""MRQ vector search - command-line entry point."""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

import config
from core.errors import MrqError
from core.pca import load_pca, save_pca, train_pca
from dataset.synthetic import blobs, embed_like, gist_like, split_queries
from dataset.vecs import inspect_vecs, read_vecs, write_vecs
from evaluate.bench import bench, parameter_grid, write_report
from evaluate.metrics import generate_groundtruth, recall_at_k, result_ids
from evaluate.spectrum import spectrum_report
from index.ivf import IndexConfig, build_index, default_cluster_count, index_summary
from index.storage import load_index, save_index
from search.engine import SearchMode, SearchParams, batch_search

LOG_FORMAT = '[%(asctime)s] %(levelname)s %(name)s: %(message)s'

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

logger = logging.getLogger('main')


class UsageError(Exception):
    """Raised by the argument parser instead of exiting."""
    pass


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as exceptions (exit code 1)."""

    def error(self, message):
        raise UsageError(f'{self.prog}: {message}')


def setup_logging(log_dir: str | Path | None = None, level: int = logging.INFO) -> None:
    """Log to stdout and LOG_DIR/app.log, with errors also in LOG_DIR/error.log."""
    log_dir = Path(log_dir or config.get_log_dir())
    log_dir.mkdir(parents=True, exist_ok=True)

    logging.basicConfig(
        level=level,
        format=LOG_FORMAT,
        handlers=[
            logging.StreamHandler(sys.stdout),
            logging.FileHandler(log_dir / 'app.log', encoding='utf-8'),
        ],
        force=True,
    )

    # Error-only file handler
    error_handler = logging.FileHandler(log_dir / 'error.log', encoding='utf-8')
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(error_handler)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated integers, got {text!r}')


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, got {text!r}')


def cmd_train_pca(args) -> int:
    data = read_vecs(args.data)
    model = train_pca(data, args.sample_limit)
    save_pca(model, args.out)
    return EXIT_OK


def cmd_build(args) -> int:
    corpus = read_vecs(args.data)
    k = args.k or default_cluster_count(corpus.shape[0])
    index_config = IndexConfig(
        d=args.d,
        k=k,
        query_bits=args.query_bits,
        epsilon0=args.epsilon0,
        m=args.m,
        seed=args.seed,
        sample_limit=args.sample_limit,
        max_iters=args.max_iters,
        centroid_mode=args.centroid_mode,
    )
    pca = load_pca(args.pca) if args.pca else None
    index = build_index(corpus, index_config, pca=pca, threads=args.threads)
    save_index(index, args.out)
    return EXIT_OK


def cmd_groundtruth(args) -> int:
    corpus = read_vecs(args.data)
    queries = read_vecs(args.queries)
    truth = generate_groundtruth(corpus, queries, args.K, progress=args.progress)
    write_vecs(args.out, truth, 'i32')
    return EXIT_OK


def cmd_search(args) -> int:
    index = load_index(args.index)
    queries = read_vecs(args.queries)
    params = SearchParams(
        top_k=args.K,
        nprobe=args.nprobe,
        epsilon0=args.epsilon0 if args.epsilon0 is not None else index.config.epsilon0,
        m=args.m if args.m is not None else index.config.m,
        mode=args.mode,
        stage2=not args.no_stage2,
    )
    batch = batch_search(queries, index, params, args.threads, progress=args.progress)
    stats = batch.stats
    count = max(len(batch.results), 1)
    logger.info(
        f'検索完了: {len(batch.results)}クエリ, 平均走査={stats.candidates_scanned / count:.1f}, '
        f'厳密計算率={stats.exact_ratio:.4f}, 合計時間={stats.elapsed:.3f}秒'
    )

    ids = result_ids(batch.results)
    # Every row holds min(K, N) ids
    width = min(args.K, index.size)
    if args.groundtruth:
        truth = read_vecs(args.groundtruth, 'i32')
        logger.info(f'recall@{width} = {recall_at_k(ids, truth, width):.4f}')
    if args.out:
        write_vecs(args.out, np.array(ids, dtype=np.int32).reshape(len(ids), width), 'i32')
    return EXIT_OK


def cmd_bench(args) -> int:
    index = load_index(args.index)
    queries = read_vecs(args.queries)
    truth = read_vecs(args.groundtruth, 'i32')
    epsilons = args.epsilon0 or [index.config.epsilon0]
    ms = args.m or [index.config.m]
    grid = parameter_grid(args.nprobe, epsilons, ms)
    report = bench(index, queries, truth, grid, top_k=args.K, mode=args.mode, threads=args.threads,
                   stage2=not args.no_stage2)
    if args.out:
        write_report(report, args.out)
    else:
        report.to_csv(sys.stdout, index=False)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    report = spectrum_report(read_vecs(args.data), args.sample_limit)
    for level, d in report.levels.items():
        print(f'{int(level * 100)}%: d={d}')
    if args.out:
        report.table.to_csv(args.out, index=False)
        logger.info(f'スペクトルを保存しました: {args.out}')
    return EXIT_OK


def cmd_info(args) -> int:
    if args.data:
        info = inspect_vecs(args.data)
        summary = {'kind': info.kind, 'count': info.count, 'dim': info.dim, 'bytes': info.nbytes}
    else:
        summary = index_summary(load_index(args.index))
    for key, value in summary.items():
        print(f'{key}: {value}')
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.queries and not args.query_out:
        raise UsageError('--query-out is required with --queries')
    total = args.n + args.queries
    if args.kind == 'gist-like':
        data = gist_like(total, dim=args.dim or 960, seed=args.seed)
    elif args.kind == 'embed-like':
        data = embed_like(total, dim=args.dim or 1536, seed=args.seed)
    else:
        data, _, _ = blobs(total, args.centers, dim=args.dim or 32, seed=args.seed)

    if args.queries:
        base, queries = split_queries(data, args.queries, args.seed)
        write_vecs(args.query_out, queries, 'f32')
    else:
        base = data
    write_vecs(args.out, base, 'f32')
    return EXIT_OK


def build_parser() -> CliParser:
    parser = CliParser(prog='mrq', description='MRQ approximate nearest neighbor search')
    parser.add_argument('--verbose', action='store_true', help='Enable debug logging')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=CliParser)

    p = sub.add_parser('train-pca', help='Train a PCA model')
    p.add_argument('--data', required=True)
    p.add_argument('--sample-limit', type=int, default=config.PCA_SAMPLE_LIMIT)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_train_pca)

    p = sub.add_parser('build', help='Build an index')
    p.add_argument('--data', required=True)
    p.add_argument('--d', type=int, required=True, help='Quantized (head) dimensions')
    p.add_argument('--k', type=int, default=None, help='Clusters (default: scaled to N)')
    p.add_argument('--query-bits', type=int, default=config.QUERY_BITS)
    p.add_argument('--epsilon0', type=float, default=config.EPSILON0)
    p.add_argument('--m', type=float, default=config.M)
    p.add_argument('--seed', type=int, default=config.SEED)
    p.add_argument('--threads', type=int, default=config.THREADS)
    p.add_argument('--sample-limit', type=int, default=config.PCA_SAMPLE_LIMIT)
    p.add_argument('--max-iters', type=int, default=config.KMEANS_MAX_ITERS)
    p.add_argument('--centroid-mode', choices=['projected', 'full'], default='projected')
    p.add_argument('--pca', default=None, help='Pre-trained PCA model')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser('groundtruth', help='Exact neighbors as ivecs')
    p.add_argument('--data', required=True)
    p.add_argument('--queries', required=True)
    p.add_argument('--K', type=int, default=100)
    p.add_argument('--progress', action='store_true')
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_groundtruth)

    p = sub.add_parser('search', help='Search queries against an index')
    p.add_argument('--index', required=True)
    p.add_argument('--queries', required=True)
    p.add_argument('--K', type=int, default=20)
    p.add_argument('--nprobe', type=int, default=1)
    p.add_argument('--epsilon0', type=float, default=None)
    p.add_argument('--m', type=float, default=None)
    p.add_argument('--mode', choices=[mode.value for mode in SearchMode], default=SearchMode.FULL.value)
    p.add_argument('--no-stage2', action='store_true', help='Refine stage-1 survivors without the head-exact recheck')
    p.add_argument('--threads', type=int, default=config.THREADS)
    p.add_argument('--groundtruth', default=None, help='Report recall against this ivecs file')
    p.add_argument('--progress', action='store_true')
    p.add_argument('--out', default=None, help='Result ids as ivecs')
    p.set_defaults(func=cmd_search)

    p = sub.add_parser('bench', help='Recall/latency sweep as CSV')
    p.add_argument('--index', required=True)
    p.add_argument('--queries', required=True)
    p.add_argument('--groundtruth', required=True)
    p.add_argument('--K', type=int, default=20)
    p.add_argument('--nprobe', type=_int_list, required=True, help='Comma-separated nprobe values')
    p.add_argument('--epsilon0', type=_float_list, default=None)
    p.add_argument('--m', type=_float_list, default=None)
    p.add_argument('--mode', choices=[mode.value for mode in SearchMode], default=SearchMode.FULL.value)
    p.add_argument('--no-stage2', action='store_true', help='Refine stage-1 survivors without the head-exact recheck')
    p.add_argument('--threads', type=int, default=config.THREADS)
    p.add_argument('--out', default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser('spectrum', help='PCA variance spectrum')
    p.add_argument('--data', required=True)
    p.add_argument('--sample-limit', type=int, default=config.PCA_SAMPLE_LIMIT)
    p.add_argument('--out', default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser('info', help='Summarize an index or vecs file')
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument('--index', default=None)
    source.add_argument('--data', default=None, help='fvecs/bvecs/ivecs file')
    p.set_defaults(func=cmd_info)

    p = sub.add_parser('generate', help='Write a synthetic corpus as fvecs')
    p.add_argument('--kind', choices=['gist-like', 'embed-like', 'blobs'], required=True)
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--dim', type=int, default=None)
    p.add_argument('--centers', type=int, default=16)
    p.add_argument('--queries', type=int, default=0)
    p.add_argument('--seed', type=int, default=config.SEED)
    p.add_argument('--out', required=True)
    p.add_argument('--query-out', default=None)
    p.set_defaults(func=cmd_generate)

    return parser


def run(argv: list[str] | None = None) -> int:
    """
    Parse arguments and run one command.

    Returns:
        0 on success, 1 on usage errors, 2 on data/format errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    setup_logging(level=logging.DEBUG if args.verbose else logging.INFO)
    logger.info(f'コマンドを開始します: {args.command}')

    try:
        code = args.func(args)
    except UsageError as e:
        logger.error(f'引数エラー: {e}')
        return EXIT_USAGE
    except (MrqError, OSError) as e:
        logger.error(f'{args.command}の実行中にエラーが発生しました: {e}')
        return EXIT_DATA

    logger.info(f'コマンドが完了しました: {args.command}')
    return code


if __name__ == '__main__':
    sys.exit(run(sys.argv[1:]))
