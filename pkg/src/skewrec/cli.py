"""Command-line entry point: ``skewrec {fetch,prep,train,eval,sweep,analyze}``.

Every command writes into its own output directory and finishes by writing
``manifest.json`` there (argv, inputs, outputs, resolved config, duration).
Files are written to a temporary name and renamed, so a failed command
leaves no partial outputs behind.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import time
from importlib import metadata
from pathlib import Path

from . import corpus, datasets, embed, metrics, skewopt, skewstats
from .sampler import SamplerError
from .skewopt import SkewOptConfig

logger = logging.getLogger("skewrec")

MANIFEST = "manifest.json"
# flags that override config-file values; None means "not given"
HYPER_FLAGS = ("xi", "omega", "eta", "beta", "lam", "epochs", "clip", "dim")
SWEEP_XI = "0,4,8,12"
SWEEP_OMEGA = "1,2,3"
SWEEP_ETA = "3"


class CliError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args: argparse.Namespace, started: float, **fields) -> None:
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:] if args.argv is None else args.argv,
        "version": _version(),
        "seed": _seed(args),
        "wall_seconds": round(time.perf_counter() - started, 3),
        **fields,
    }
    _write_text(out / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _seed(args: argparse.Namespace, default: int = 0) -> int:
    seed = getattr(args, "seed", None)
    return default if seed is None else seed


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"expected comma-separated numbers, got {text!r}") from None


def _resolve_config(args: argparse.Namespace) -> tuple[SkewOptConfig, dict]:
    overrides = {k: getattr(args, k) for k in HYPER_FLAGS if getattr(args, k, None) is not None}
    for k in ("seed", "threads"):
        if getattr(args, k, None) is not None:
            overrides[k] = getattr(args, k)
    if args.config:
        cfg = SkewOptConfig.from_file(args.config, overrides)
    else:
        cfg = SkewOptConfig().with_overrides(overrides)
    return cfg, overrides


def _load_model(path: str) -> embed.EmbeddingModel:
    if not Path(path).is_file():
        raise CliError(f"model file not found: {path}")
    return embed.load(path)


def _load_split(path: str, seed: int = -1) -> corpus.SplitPair:
    d = Path(path)
    for name in ("train.tsv", "test.tsv"):
        if not (d / name).is_file():
            raise CliError(f"{d / name} not found; run 'skewrec prep' first")
    return corpus.load_split(d, seed)


def _check_alignment(model: embed.EmbeddingModel, data: corpus.Interactions) -> None:
    if (model.n_users, model.n_items) != (data.n_users, data.n_items):
        raise CliError(
            f"model has {model.n_users} users x {model.n_items} items but the data has "
            f"{data.n_users} x {data.n_items}; was it trained on this split?"
        )


def _train_logged(train: corpus.Interactions, cfg: SkewOptConfig) -> tuple[embed.EmbeddingModel, list]:
    log = []

    def on_epoch(epoch, mean_ll):
        log.append((epoch, mean_ll))
        logger.info("epoch %d/%d  mean loglik %.6f", epoch + 1, cfg.epochs, mean_ll)

    return skewopt.train(train, cfg, on_epoch), log


# ---- commands -----------------------------------------------------------------------


def cmd_fetch(args: argparse.Namespace) -> int:
    path = datasets.movielens_100k(args.cache_dir)
    print(path)
    return 0


def cmd_prep(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    delimiter = None if args.delimiter == "whitespace" else args.delimiter.encode().decode("unicode_escape")
    raw = corpus.load_tsv(args.input, delimiter, args.header)
    pairs = corpus.binarize(raw, args.mode, args.threshold)
    if not pairs:
        raise CliError(f"no interactions survive {args.mode} binarization of {args.input}")
    data = corpus.build_interactions(pairs)
    sp = corpus.split(data, args.test_fraction, _seed(args))
    out = _out_dir(args.out)
    corpus.save_split(sp, out)
    stats = {
        "users": data.n_users, "items": data.n_items, "positives": data.nnz,
        "train": sp.train.nnz, "test": sp.test.nnz,
    }
    logger.info("prep: %s", stats)
    _write_manifest(
        out, args, started,
        inputs={"ratings": str(args.input)},
        outputs=["train.tsv", "test.tsv", corpus.USER_MAP_FILE, corpus.ITEM_MAP_FILE],
        params={"mode": args.mode, "threshold": args.threshold, "test_fraction": args.test_fraction},
        stats=stats,
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg, overrides = _resolve_config(args)
    train = corpus.load_interactions(args.train)
    model, log = _train_logged(train, cfg)
    out = _out_dir(args.out)
    embed.save(model, out / "model.bin")
    _write_text(out / "epochs.tsv", "epoch\tmean_loglik\n" + "".join(f"{e}\t{v!r}\n" for e, v in log))
    _write_manifest(
        out, args, started,
        inputs={"train": str(args.train), "config_file": args.config},
        outputs=["model.bin", "epochs.tsv"],
        seed=cfg.seed,
        overrides=overrides,
        config=cfg.to_dict(),
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    model = _load_model(args.model)
    sp = _load_split(args.split)
    _check_alignment(model, sp.train)
    report = metrics.evaluate(model, sp, args.n, seed=_seed(args))
    sys.stdout.write(report.to_tsv())
    if args.out:
        out = _out_dir(args.out)
        _write_text(out / "report.json", report.to_json() + "\n")
        _write_manifest(
            out, args, started,
            inputs={"model": str(args.model), "split": str(args.split)},
            outputs=["report.json"],
        )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    base, overrides = _resolve_config(args)
    sp = _load_split(args.split)
    xis, omegas, etas = _floats(args.xi_grid), _floats(args.omega_grid), _floats(args.eta_grid)
    rows = []
    for xi, omega, eta in itertools.product(xis, omegas, etas):
        cfg = base.with_overrides({"xi": xi, "omega": omega, "eta": eta})
        logger.info("sweep cell xi=%g omega=%g eta=%d", cfg.xi, cfg.omega, cfg.eta)
        try:
            model = skewopt.train(sp.train, cfg)
        except skewopt.DivergenceError as exc:
            if not args.keep_going:
                raise
            logger.warning("cell diverged: %s", exc)
            rows.append((cfg.xi, cfg.omega, cfg.eta, float("nan"), float("nan")))
            continue
        report = metrics.evaluate(model, sp, args.n)
        rows.append((cfg.xi, cfg.omega, cfg.eta, report.recall, report.map))
    out = _out_dir(args.out)
    lines = ["xi\tomega\teta\trecall\tmap\n"]
    lines += [f"{xi!r}\t{om!r}\t{eta}\t{r!r}\t{m!r}\n" for xi, om, eta, r, m in rows]
    _write_text(out / "sweep.tsv", "".join(lines))
    sys.stdout.write("".join(lines))
    _write_manifest(
        out, args, started,
        inputs={"split": str(args.split), "config_file": args.config},
        outputs=["sweep.tsv"],
        seed=base.seed,
        grid={"xi": xis, "omega": omegas, "eta": etas, "n": args.n},
        overrides=overrides,
        config=base.to_dict(),
    )
    return 0


def _params_arg(text: str) -> skewstats.SkewNormalParams:
    vals = _floats(text)
    if len(vals) != 3:
        raise CliError(f"--params expects xi,omega,alpha; got {text!r}")
    return skewstats.SkewNormalParams(*vals)


def cmd_analyze(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    model = _load_model(args.model)
    train = corpus.load_interactions(args.train)
    _check_alignment(model, train)
    params = [_params_arg(p) for p in args.params or []]
    sample = skewstats.collect_estimator(model, train, args.n_triples, _seed(args))
    out = _out_dir(args.out)
    skewstats.write_histogram(sample, out / "histogram.tsv", {"model": args.model, "seed": _seed(args)})
    lo, hi = float(sample.bin_edges[0]), float(sample.bin_edges[-1])
    outputs = ["histogram.tsv"]
    for p in params:
        name = f"curve_xi{p.xi:g}_omega{p.omega:g}_alpha{p.alpha:g}.tsv"
        skewstats.write_curve(p, out / name, lo, hi)
        outputs.append(name)
    print(f"skewness\t{sample.sample_skewness!r}\nmean\t{sample.mean!r}")
    _write_manifest(
        out, args, started,
        inputs={"model": str(args.model), "train": str(args.train)},
        outputs=outputs,
        n_triples=args.n_triples,
        params=[vars(p) for p in params],
        skewness=sample.sample_skewness,
    )
    return 0


# ---- parser -------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed (default: config or 0)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for training")
    p.add_argument("--config", default=None, help="key = value hyperparameter file")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def _add_hyper(p: argparse.ArgumentParser, grid: bool = False) -> None:
    if not grid:
        p.add_argument("--xi", type=float)
        p.add_argument("--omega", type=float)
        p.add_argument("--eta", type=int)
    p.add_argument("--beta", type=float, help="learning rate")
    p.add_argument("--lambda", dest="lam", type=float, help="L2 regularization")
    p.add_argument("--epochs", type=int)
    p.add_argument("--clip", type=float, help="cap on the per-triple scalar gradient")
    p.add_argument("--dim", type=int, help="embedding dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skewrec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch", help="download MovieLens-100K and print the ratings path")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("prep", help="binarize a ratings file and write a train/test split")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("rating", "count", "binary"), default="rating")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--delimiter", default="\\t", help="field separator, or 'whitespace'")
    p.add_argument("--header", action="store_true", help="skip the first line")
    _add_common(p)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("train", help="fit embeddings on a positives file")
    p.add_argument("train")
    p.add_argument("--out", required=True)
    _add_hyper(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="recall/mAP@N and AUC of a model on a split")
    p.add_argument("model")
    p.add_argument("split", help="directory written by prep")
    p.add_argument("-n", type=int, default=10)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train and evaluate every (xi, omega, eta) grid cell")
    p.add_argument("split", help="directory written by prep")
    p.add_argument("--out", required=True)
    p.add_argument("--xi-grid", default=SWEEP_XI)
    p.add_argument("--omega-grid", default=SWEEP_OMEGA)
    p.add_argument("--eta-grid", default=SWEEP_ETA)
    p.add_argument("-n", type=int, default=10)
    p.add_argument("--keep-going", action="store_true", help="record diverged cells as NaN")
    _add_hyper(p, grid=True)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="export the learned x_uij distribution and reference curves")
    p.add_argument("model")
    p.add_argument("train")
    p.add_argument("--out", required=True)
    p.add_argument("--n-triples", type=int, default=100_000)
    p.add_argument("--params", action="append", metavar="XI,OMEGA,ALPHA",
                   help="skew-normal reference curve; repeatable")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)
    return parser


EXPECTED_ERRORS = (
    CliError,
    corpus.CorpusError,
    skewopt.ConfigError,
    skewopt.DivergenceError,
    embed.ModelFormatError,
    metrics.EvaluationError,
    SamplerError,
    OSError,
    ValueError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except EXPECTED_ERRORS as exc:
        print(f"skewrec {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
