"""``keyreader`` command line: keywordify, train-dom, train-e2e, predict, eval, gradcheck.

Exit codes: 0 ok, 1 check failure, 2 missing file or bad configuration, 3 training diverged.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import training
from .config import ConfigError, load_config
from .metrics import evaluate_predictions
from .textproc.keywords import KeywordStats, keywordify_examples, load_stopwords
from .textproc.squad import read_dataset, write_dataset
from .textproc.vocab import EmbeddingParseError

logger = logging.getLogger("keyreader")

EXIT_CHECK, EXIT_INPUT, EXIT_DIVERGED = 1, 2, 3
N_SAMPLES = 10


class InputError(Exception):
    pass


def _require(path, what="file"):
    if not path:
        raise InputError(f"no {what} given")
    if not os.path.exists(path):
        raise InputError(f"missing {what}: {path}")
    return path


def _config(args):
    if args.config:
        _require(args.config, "config file")
    return load_config(args.config, args.set or (), args.seed)


def _meta(cfg, command):
    return {"command": command, "config_sha256": cfg.digest(), "seed": cfg.seed}


def _sidecar(path, meta):
    training.write_json(path + ".meta.json", meta)


def _plot(args, fn, *a, name):
    if not args.plot_dir:
        return
    from . import plotting
    path = getattr(plotting, fn)(a[0], os.path.join(args.plot_dir, name), *a[1:])
    logger.info("wrote %s", path)


# --- commands ---------------------------------------------------------------


def cmd_keywordify(args):
    cfg = _config(args)
    examples = read_dataset(_require(args.input, "input dataset"))
    stopwords = load_stopwords(_require(cfg.stopwords, "stopword list") if cfg.stopwords else None)
    originals = [list(ex.question_tokens) for ex in examples]
    stats = KeywordStats()
    keywordify_examples(examples, np.random.default_rng([cfg.seed, 0]), stopwords, stats=stats)
    meta = _meta(cfg, "keywordify")
    write_dataset(examples, args.output, extra={"keywordify": meta})
    pick = np.random.default_rng([cfg.seed, 1]).choice(len(examples), size=min(N_SAMPLES, len(examples)),
                                                        replace=False)
    samples = [{"id": examples[k].id, "before": " ".join(originals[k]), "after": examples[k].keyword}
               for k in sorted(int(k) for k in pick)]
    report = {"meta": meta, "n_questions": len(examples), **stats.as_dict(), "samples": samples}
    stats_path = args.stats or args.output + ".stats.json"
    training.write_json(stats_path, report)
    print(f"questions\t{len(examples)}\ndrop_rate\t{stats.drop_rate:.4f}\nstats\t{stats_path}")
    _plot(args, "length_histogram", dict(stats.lengths), name="keyword_lengths.png")
    return 0


def _load_data(cfg):
    train = read_dataset(_require(cfg.train, "training data (set train = ...)"))
    dev = read_dataset(_require(cfg.dev, "dev data")) if cfg.dev else None
    return train, dev


def _lexicon_path(cfg):
    return os.path.join(cfg.out_dir, "lexicon.json")


def _skeleton(cfg):
    from .pipeline import system_skeleton
    with open(_require(_lexicon_path(cfg), "lexicon (run train-dom first)"), encoding="utf-8") as fh:
        blob = json.load(fh)
    return system_skeleton(cfg, blob["lexicon"], blob["word_dim"])


def cmd_train_dom(args):
    from .pipeline import build_system, save_lexicon
    from . import tensor as T
    cfg = _config(args)
    train, dev = _load_data(cfg)
    if cfg.embeddings:
        _require(cfg.embeddings, "embeddings")
    os.makedirs(cfg.out_dir, exist_ok=True)
    meta = _meta(cfg, "train-dom")
    if args.resume:
        system = _skeleton(cfg)
        opt = T.AdaDelta(system.store.trainable("dom/"), cfg.rho, cfg.epsilon, cfg.lr)
        start = training.resume_state(_require(args.resume, "checkpoint"), system, opt)
    else:
        system = build_system(cfg, train, dev or ())
        save_lexicon(_lexicon_path(cfg), system, meta)
        opt, start = None, 0
    log_path = os.path.join(cfg.out_dir, "dom_log.csv")
    log = training.MetricLog(log_path, append=bool(args.resume))
    _sidecar(log_path, meta)
    training.train_dom(system, train, cfg, dev, log, cfg.out_dir, start, optimizer=opt)
    print(f"epochs\t{len(log.rows)}\nlog\t{log_path}\ncheckpoint\t{os.path.join(cfg.out_dir, 'dom_best.krd')}")
    _plot(args, "training_curves", log.rows, "rewriter pre-training", name="dom_curve.png")
    return 0


def cmd_train_e2e(args):
    from . import tensor as T
    cfg = _config(args)
    train, dev = _load_data(cfg)
    system = _skeleton(cfg)
    meta = _meta(cfg, "train-e2e")
    params = {**system.store.trainable("reader/"), **system.store.trainable("eval/")}
    opt = T.AdaDelta(params, cfg.rho, cfg.epsilon, cfg.lr)
    if args.resume:
        start = training.resume_state(_require(args.resume, "checkpoint"), system, opt)
    else:
        init = args.init or os.path.join(cfg.out_dir, "dom_best.krd")
        training.resume_state(_require(init, "rewriter checkpoint"), system)
        start = 0
    log_path = os.path.join(cfg.out_dir, "e2e_log.csv")
    log = training.MetricLog(log_path, append=bool(args.resume))
    _sidecar(log_path, meta)
    training.train_e2e(system, train, cfg, dev, log, cfg.out_dir, start, use_dom=not args.reader_only,
                       optimizer=opt)
    best = max((r["em"] for r in log.rows), default=0.0)
    print(f"epochs\t{len(log.rows)}\nbest_em\t{best:.2f}\nlog\t{log_path}")
    _plot(args, "training_curves", log.rows, "reader + scorer", name="e2e_curve.png")
    return 0


def cmd_predict(args):
    cfg = _config(args)
    data = read_dataset(_require(args.data or cfg.dev, "dataset to predict (--data or dev = ...)"))
    system = _skeleton(cfg)
    training.resume_state(_require(args.checkpoint or os.path.join(cfg.out_dir, "e2e_best.krd"), "checkpoint"),
                          system)
    scored = {ex.id: system.generate_scored(ex) for ex in data}
    cands = {k: [toks for toks, _ in v] for k, v in scored.items()}
    preds = training.predict(system, data, cands)
    meta = _meta(cfg, "predict")
    out = args.output or os.path.join(cfg.out_dir, "predictions.json")
    training.write_json(out, preds)
    _sidecar(out, meta)
    dump = args.candidates or os.path.join(cfg.out_dir, "candidates.tsv")
    training.write_candidate_dump(dump, scored)
    _sidecar(dump, meta)
    print(f"predictions\t{out}\ncandidates\t{dump}")
    return 0


def cmd_eval(args):
    examples = read_dataset(_require(args.data, "dataset"))
    with open(_require(args.predictions, "predictions"), encoding="utf-8") as fh:
        preds = json.load(fh)
    scores = evaluate_predictions(preds, examples)
    print(json.dumps({"em": round(scores["em"], 4), "f1": round(scores["f1"], 4), "n": len(examples)}))
    return 0


def cmd_gradcheck(args):
    from .gradcheck import TOLERANCE, run_suite
    cfg = _config(args)
    results = run_suite(seed=cfg.seed, max_entries=args.max_entries)
    print("check\tmax_rel_error\tparams\tseconds\tstatus")
    for r in results:
        print(f"{r.name}\t{r.max_error:.3e}\t{r.n_params}\t{r.seconds:.2f}\t{'ok' if r.ok else 'FAIL'}")
    failed = [r.name for r in results if not r.ok]
    print(f"# {len(results) - len(failed)}/{len(results)} below {TOLERANCE:g}")
    return EXIT_CHECK if failed else 0


# --- wiring -----------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
    common.add_argument("--seed", type=int, help="overrides config and $KEYREADER_SEED")
    common.add_argument("--plot-dir", help="also write PNG figures here")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="keyreader", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keywordify", parents=[common], help="turn questions into keyword queries")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--stats", help="stats report path (default: OUTPUT.stats.json)")
    p.set_defaults(fn=cmd_keywordify)

    p = sub.add_parser("train-dom", parents=[common], help="pre-train the query rewriter")
    p.add_argument("--resume", help="continue from a dom_last.krd checkpoint")
    p.set_defaults(fn=cmd_train_dom)

    p = sub.add_parser("train-e2e", parents=[common], help="train reader and question scorer")
    p.add_argument("--init", help="rewriter checkpoint (default: OUT_DIR/dom_best.krd)")
    p.add_argument("--resume", help="continue from an e2e_last.krd checkpoint")
    p.add_argument("--reader-only", action="store_true", help="ablation: read the keyword query directly")
    p.set_defaults(fn=cmd_train_e2e)

    p = sub.add_parser("predict", parents=[common], help="answer a dataset")
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--output")
    p.add_argument("--candidates", help="candidate-question dump path")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="EM/F1 of a prediction file")
    p.add_argument("data")
    p.add_argument("predictions")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient suite")
    p.add_argument("--max-entries", type=int, default=6, help="coordinates probed per parameter")
    p.set_defaults(fn=cmd_gradcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
    except FileNotFoundError as e:
        print(f"error: missing file: {e.filename}", file=sys.stderr)
    except ConfigError as e:
        where = f" ({args.config})" if args.config else ""
        print(f"error: config{where}: {e}", file=sys.stderr)
    except EmbeddingParseError as e:
        print(f"error: {e}", file=sys.stderr)
    except training.Divergence as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
