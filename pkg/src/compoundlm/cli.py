"""compoundlm command line: train / perplexity / breakdown / compare / inspect.

Exit codes: 0 ok, 2 usage or configuration, 3 file IO, 4 malformed data,
1 anything else.  Every artifact gets a JSON manifest next to it; manifests
hold no timestamps so re-runs are byte-identical.
"""
import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import __version__, modelio
from .corpus import Corpus, CorpusFormatError, build_vocabulary, ngram_array, read_sentences
from .evaluation import (BREAKDOWN_COLUMNS, MARGIN_COLUMNS, AlignmentError, EvalReport,
                         HitLengthIndex, breakdown, compare_breakdown, margin_ranking,
                         perplexity, write_table)
from .segmentation import DIRECTIONS, SCHEMES, load_dictionary

log = logging.getLogger("compoundlm")

THREADS_ENV = "COMPOUNDLM_THREADS"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 1, 2, 3, 4


class ConfigError(Exception):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _set_threads(n):
    if n is None:
        return
    try:
        import numba
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except (ImportError, ValueError):
        pass


# ---- commands --------------------------------------------------------------
def cmd_train(args):
    if args.model == "hpylmc" and not args.seg:
        raise ConfigError("--model hpylmc requires --seg")
    if args.model != "hpylmc":
        for flag in ("direction", "scheme"):
            if getattr(args, flag) is not None:
                log.warning("--%s is ignored for --model %s", flag, args.model)
    if args.order < 1:
        raise ConfigError("--order must be >= 1")
    if args.burn_in < 0:
        raise ConfigError("--burn-in must be >= 0")
    direction = args.direction or "ling"

    sents = read_sentences(args.train)
    vocab = build_vocabulary(sents, args.min_count)
    corpus = Corpus.from_tokens(sents, vocab)
    if corpus.token_count == 0:
        raise CorpusFormatError(f"{args.train}: no tokens")
    events = ngram_array(corpus, args.order)
    hits = HitLengthIndex.from_events(events, len(vocab))
    rng = np.random.default_rng(args.seed)
    inputs = {args.train: _sha256(args.train)}

    if args.model == "mkn":
        from .mkn import MKN
        model = MKN.from_events(vocab, events, args.order)
        stats = {"discounts": model.discounts.tolist()}
    else:
        def progress(m, it):
            if (it + 1) % max(1, args.burn_in // 10) == 0:
                log.info("sweep %d/%d", it + 1, args.burn_in)
        if args.model == "hpylm":
            from .hpylm import HPYLM
            model = HPYLM(vocab, args.order, events)
        else:
            from .hpylmc import HPYLMC
            seg = load_dictionary(args.seg, args.scheme, direction, args.keep_hyphen)
            inputs[args.seg] = _sha256(args.seg)
            model = HPYLMC(vocab, seg, args.order, events)
        model.fit(args.burn_in, rng, init=args.init, trace=args.trace, callback=progress)
        stats = {"hyperparameters": model.hyperparameters(),
                 "final_log_likelihood": model.log_likelihood()}
        if args.trace:
            stats["log_likelihood_trace"] = model.ll_trace

    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}
    # output locations stay out of the model so the bytes depend on inputs only
    stored = {k: v for k, v in config.items() if k not in ("out", "manifest", "threads")}
    modelio.save_model(args.out, model, hits, extra={"config": stored})
    manifest = {"command": "train", "version": __version__, "seed": args.seed, "config": config,
                "inputs": inputs, "vocab_size": len(vocab), "train_tokens": corpus.token_count,
                "model_file": args.out, "model_sha256": _sha256(args.out)}
    manifest.update(stats)
    _write_manifest(args.manifest or args.out + ".json", manifest)
    print(f"trained {args.model} order={args.order} vocab={len(vocab)} "
          f"tokens={corpus.token_count} -> {args.out}")
    return EXIT_OK


def cmd_perplexity(args):
    model, hits, _ = modelio.load_model(args.model_file)
    if args.renormalize and model.kind != "hpylmc":
        raise ConfigError("--renormalize is only valid for hpylmc models")
    seg = None
    if args.seg:
        seg = load_dictionary(args.seg)
    sents = read_sentences(args.test)
    rep = perplexity(model, sents, hits, seg=seg, renormalize=args.renormalize, name=args.name)
    if args.report:
        rep.write(args.report)
        _write_manifest(args.report + ".json", {
            "command": "perplexity", "version": __version__, "model_file": args.model_file,
            "model_sha256": _sha256(args.model_file), "test": args.test,
            "test_sha256": _sha256(args.test), "renormalize": args.renormalize,
            "tokens": len(rep), "cross_entropy": rep.cross_entropy,
            "perplexity": rep.perplexity, "report_sha256": _sha256(args.report)})
    print(rep.summary())
    return EXIT_OK


def _out(path):
    return open(path, "w", encoding="utf-8", newline="\n") if path else sys.stdout


def cmd_breakdown(args):
    rep = EvalReport.read(args.report)
    seg = load_dictionary(args.seg) if args.seg else None
    fh = _out(args.out)
    try:
        if args.against:
            other = EvalReport.read(args.against)
            rows = compare_breakdown(rep, other, args.order, seg)
            write_table(fh, ("h", "compound", "tokens", "xent_a", "xent_b", "rel_delta"), rows)
        else:
            write_table(fh, BREAKDOWN_COLUMNS, breakdown(rep, args.order, seg))
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_compare(args):
    a, b = EvalReport.read(args.report_a), EvalReport.read(args.report_b)
    rows = margin_ranking(a, b, compounds_only=not args.all_tokens, order=args.order)
    if args.top:
        rows = rows[:args.top]
    fh = _out(args.out)
    try:
        write_table(fh, MARGIN_COLUMNS, rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_inspect(args):
    model, hits, header = modelio.load_model(args.model_file)
    info = {"kind": model.kind, "order": model.order, "vocab_size": len(model.vocab),
            "hit_index": hits is not None}
    if model.kind == "mkn":
        info["discounts"] = model.discounts.tolist()
    else:
        info["hyperparameters"] = model.hyperparameters()
        info["log_likelihood"] = model.log_likelihood()
        info["tables"] = int(model.A.ent_m.sum())
        info["customers"] = int(model.A.ent_N.sum())
    if model.kind == "hpylmc":
        info.update(direction=model.seg.direction, scheme=model.seg.scheme,
                    compounds=len(model.seg), components=len(model.comp_vocab))
    if "extra" in header:
        info["train_config"] = header["extra"].get("config")
    print(json.dumps(info, indent=2, sort_keys=True, ensure_ascii=False))
    return EXIT_OK


# ---- parser ----------------------------------------------------------------
def build_parser():
    p = argparse.ArgumentParser(prog="compoundlm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="estimate / sample a model")
    t.add_argument("--model", choices=("mkn", "hpylm", "hpylmc"), required=True)
    t.add_argument("--train", required=True, help="one sentence per line, space separated")
    t.add_argument("--out", required=True, help="model file")
    t.add_argument("--manifest", help="manifest path (default OUT.json)")
    t.add_argument("--order", type=int, default=4)
    t.add_argument("--burn-in", type=int, default=300)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--seg", help="segmentation dictionary (hpylmc)")
    t.add_argument("--direction", choices=DIRECTIONS)
    t.add_argument("--scheme", choices=SCHEMES,
                   help="linker handling (default: merge-left for ling, merge-right for inv)")
    t.add_argument("--keep-hyphen", action="store_true", help="keep '-' as a component")
    t.add_argument("--min-count", type=int, default=1)
    t.add_argument("--init", choices=("random", "sequential"), default="random")
    t.add_argument("--trace", action="store_true", help="record log-likelihood every sweep")
    t.add_argument("--threads", type=int, default=os.environ.get(THREADS_ENV))
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("perplexity", help="score a test set")
    e.add_argument("--model-file", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--report", help="per-token TSV report")
    e.add_argument("--seg", help="dictionary for compound flags (default: the model's)")
    e.add_argument("--renormalize", action="store_true", help="hpylmc: normalise over words")
    e.add_argument("--name", help="model label stored in the report")
    e.add_argument("--threads", type=int, default=os.environ.get(THREADS_ENV))
    e.set_defaults(func=cmd_perplexity)

    b = sub.add_parser("breakdown", help="hit-length x compound table of a report")
    b.add_argument("--report", required=True)
    b.add_argument("--against", help="second report: print relative deltas")
    b.add_argument("--seg", help="re-flag compounds with this dictionary")
    b.add_argument("--order", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_breakdown)

    c = sub.add_parser("compare", help="rank tokens by P_a - P_b")
    c.add_argument("--report-a", required=True)
    c.add_argument("--report-b", required=True)
    c.add_argument("--top", type=int, default=10)
    c.add_argument("--all-tokens", action="store_true", help="do not restrict to compounds")
    c.add_argument("--order", type=int)
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    i = sub.add_parser("inspect", help="print a model summary")
    i.add_argument("--model-file", required=True)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    _set_threads(getattr(args, "threads", None))
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"compoundlm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusFormatError, modelio.ModelFormatError, AlignmentError) as exc:
        print(f"compoundlm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"compoundlm: IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"compoundlm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
