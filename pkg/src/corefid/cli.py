"""Command-line entry point: ``corefid <subcommand> ...``.

Stages talk to each other only through files: corpus JSON lines, word2vec
text embeddings, KNN1 model containers with JSON sidecars, and prediction
JSON lines.  Exit codes: 0 success, 1 validation/scoring failure, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .classifiers import (
    SELECTIONS,
    FeatureGroupSelection,
    HyperConfig,
    load_model,
    save_model,
    train_coref_classifier,
    train_singleton_classifier,
)
from .clustering import (
    SINGLETON_MODES,
    ClusteringConfig,
    dump_predictions,
    parse_predictions,
    partition_record,
    random_scorer,
    resolve_document,
)
from .corpus import CorpusError, gold_partition, iter_records, load_corpus, save_corpus, validate_record
from .embeddings import EmbeddingError, load_embeddings, random_table, save_word2vec_text
from .metrics import MetricError, score_system
from .pairgen import APPROXIMATE_STRATEGIES, STRATEGIES, class_balance, generate_pairs
from .synthetic import generate_synthetic_corpus, vocabulary

log = logging.getLogger("corefid")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

SINGLETON_FILE = "singleton.knn"
COREF_FILE = "coref.knn"


class CommandError(Exception):
    """A failure reported to the user with exit code 1."""


def _threshold(value: str):
    if value.lower() == "none":
        return None
    x = float(value)
    if not 0.0 <= x <= 1.0:
        raise argparse.ArgumentTypeError("threshold must be in [0, 1] or 'none'")
    return x


def _selection(value: str) -> FeatureGroupSelection:
    """'7' (grid number) or a comma list drawn from words,context,mention."""
    if value.isdigit():
        if int(value) not in SELECTIONS:
            raise argparse.ArgumentTypeError("feature group number must be 1..7")
        return SELECTIONS[int(value)]
    parts = {p.strip() for p in value.split(",") if p.strip()}
    unknown = parts - {"words", "context", "mention"}
    if unknown or not parts:
        raise argparse.ArgumentTypeError(f"unknown feature group(s) {sorted(unknown)}")
    return FeatureGroupSelection("words" in parts, "context" in parts, "mention" in parts)


def _load_corpus(path):
    try:
        return load_corpus(path)
    except OSError as exc:
        raise CommandError(f"cannot read corpus {path}: {exc.strerror}") from None
    except CorpusError as exc:
        raise CommandError(f"invalid corpus {path}: {exc}") from None


def _load_embeddings(path):
    if not path:
        raise CommandError("--embeddings is required")
    try:
        return load_embeddings(path)
    except OSError as exc:
        raise CommandError(f"cannot read embeddings {path}: {exc.strerror}") from None
    except EmbeddingError as exc:
        raise CommandError(f"invalid embeddings {path}: {exc}") from None


# -- subcommands ------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        fh = open(args.corpus, "rb")
    except OSError as exc:
        raise CommandError(f"cannot read corpus {args.corpus}: {exc.strerror}") from None
    n_docs, errors = 0, []
    with fh:
        for lineno, record in iter_records(fh):
            n_docs += 1
            if isinstance(record, CorpusError):
                errors.append(str(record))
                continue
            errors.extend(f"line {lineno}: {e}" for e in validate_record(record))
    for e in errors:
        print(e)
    print(f"{n_docs} documents, {len(errors)} errors")
    return EXIT_OK if not errors else EXIT_FAIL


def cmd_gen_pairs(args) -> int:
    docs = _load_corpus(args.corpus)
    if args.pairs in APPROXIMATE_STRATEGIES:
        print(f"# note: pair strategy {args.pairs!r} is an approximation", file=sys.stderr)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    all_pairs = []
    try:
        for doc in docs:
            pairs = generate_pairs(doc, args.pairs)
            all_pairs.extend(pairs)
            for p in pairs:
                out.write(p.to_line() + "\n")
    finally:
        if args.out:
            out.close()
    pos, neg, ratio = class_balance(all_pairs)
    print(f"# {len(all_pairs)} pairs ({pos} positive, {neg} negative, ratio {ratio:.3f})", file=sys.stderr)
    return EXIT_OK


def _hyper_config(args) -> HyperConfig:
    overrides = {"seed": args.seed}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    return HyperConfig.from_preset(args.preset, **overrides)


def cmd_train(args) -> int:
    docs = _load_corpus(args.corpus)
    if not docs:
        raise CommandError("corpus is empty")
    embeddings = _load_embeddings(args.embeddings)
    config = _hyper_config(args)
    out_dir = Path(args.model_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def progress(name):
        return lambda epoch, loss: print(f"[{name}] epoch {epoch + 1}/{config.epochs} loss {loss:.6f}")

    if args.target in ("singleton", "both"):
        model, result = train_singleton_classifier(docs, embeddings, config, args.features,
                                                   args.singleton_threshold, progress("singleton"))
        for w in result.warnings:
            print(f"[singleton] warning: {w}", file=sys.stderr)
        save_model(model, out_dir / SINGLETON_FILE)
    if args.target in ("coref", "both"):
        pairs = []
        for doc in docs:
            doc_pairs = generate_pairs(doc, args.pairs)
            log.info("%s: %d mentions -> %d pairs", doc.doc_id, len(doc.mentions), len(doc_pairs))
            pairs.extend(doc_pairs)
        pos, neg, _ = class_balance(pairs)
        print(f"[coref] {len(pairs)} training pairs ({args.pairs} strategy, {pos} positive, {neg} negative)")
        if not pairs:
            raise CommandError("no training pairs could be generated")
        extra = {"pair_strategy": args.pairs, "pair_strategy_approximation": args.pairs in APPROXIMATE_STRATEGIES}
        model, result = train_coref_classifier(docs, embeddings, config, pairs, progress("coref"), extra)
        for w in result.warnings:
            print(f"[coref] warning: {w}", file=sys.stderr)
        save_model(model, out_dir / COREF_FILE)
    return EXIT_OK


def _resolve_all(docs, scorer, clustering, singleton_model, singleton_threshold, jobs, seed):
    def one(doc):
        part = resolve_document(doc, scorer, clustering, singleton_model, singleton_threshold)
        return partition_record(doc, part, seed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, docs))
    return [one(doc) for doc in docs]


def _scorer_and_models(args):
    singleton_model = None
    need_embeddings = args.scorer == "model" or args.singleton_mode == "trained"
    embeddings = _load_embeddings(args.embeddings) if need_embeddings else None
    model_dir = Path(args.model_dir) if args.model_dir else None
    if need_embeddings and model_dir is None:
        raise CommandError("--model-dir is required for model scoring or trained singleton exclusion")
    try:
        if args.scorer == "model":
            scorer = load_model(model_dir / COREF_FILE, embeddings).scorer()
        else:
            scorer = random_scorer(args.seed)
        if args.singleton_mode == "trained":
            singleton_model = load_model(model_dir / SINGLETON_FILE, embeddings)
    except FileNotFoundError as exc:
        raise CommandError(f"missing model file: {exc.filename}") from None
    except ValueError as exc:
        raise CommandError(str(exc)) from None
    return scorer, singleton_model


def cmd_resolve(args) -> int:
    docs = _load_corpus(args.corpus)
    scorer, singleton_model = _scorer_and_models(args)
    threshold = args.singleton_threshold
    if singleton_model is not None and threshold is None:
        threshold = singleton_model.threshold
    clustering = ClusteringConfig(args.link_threshold, args.singleton_mode)
    records = _resolve_all(docs, scorer, clustering, singleton_model,
                           0.5 if threshold is None else threshold, args.jobs, args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            dump_predictions(records, fh)
    else:
        dump_predictions(records, sys.stdout)
    return EXIT_OK


def _print_report(report, json_path=None):
    print(report.format_table())
    record = report.to_dict()
    print(json.dumps(record, sort_keys=True))
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")


def cmd_score(args) -> int:
    docs = _load_corpus(args.key)
    try:
        with open(args.predictions, "rb") as fh:
            predictions = parse_predictions(fh)
    except OSError as exc:
        raise CommandError(f"cannot read predictions {args.predictions}: {exc.strerror}") from None
    except ValueError as exc:
        raise CommandError(f"invalid predictions {args.predictions}: {exc}") from None
    key = {d.doc_id: gold_partition(d) for d in docs}
    try:
        report = score_system(key, predictions)
    except MetricError as exc:
        raise CommandError(str(exc)) from None
    _print_report(report, args.json)
    return EXIT_OK


def cmd_baseline(args) -> int:
    docs = _load_corpus(args.corpus)
    clustering = ClusteringConfig(args.link_threshold, args.singleton_mode)
    records = _resolve_all(docs, random_scorer(args.seed), clustering, None, 0.5, args.jobs, args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            dump_predictions(records, fh)
    key = {d.doc_id: gold_partition(d) for d in docs}
    response = {r["doc_id"]: [frozenset(c) for c in r["system_entities"]] for r in records}
    _print_report(score_system(key, response), args.json)
    return EXIT_OK


def cmd_synth(args) -> int:
    docs = generate_synthetic_corpus(args.seed, args.docs)
    save_corpus(docs, args.out)
    print(f"wrote {len(docs)} documents to {args.out}")
    if args.embeddings:
        table = random_table(args.seed, vocabulary(docs), args.dim)
        with open(args.embeddings, "w", encoding="utf-8") as fh:
            save_word2vec_text(table, fh)
        print(f"wrote {table.vocab_size} x {table.dim} random embeddings to {args.embeddings}")
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="corefid", description="Mention-pair coreference toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-document details")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file of option defaults; command-line flags win")
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("validate", cmd_validate, "check a corpus file and list every violation")
    p.add_argument("corpus")

    p = add("gen-pairs", cmd_gen_pairs, "emit labelled training pairs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pairs", choices=STRATEGIES, default="default")
    p.add_argument("--out")

    p = add("train", cmd_train, "train singleton and/or coreference classifiers")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--target", choices=("singleton", "coref", "both"), default="both")
    p.add_argument("--preset", choices=("proposed", "wu_ma"), default="proposed")
    p.add_argument("--features", type=_selection, default=SELECTIONS[7],
                   help="singleton feature groups: 1..7 or e.g. words,context,mention")
    p.add_argument("--pairs", choices=STRATEGIES, default="default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--singleton-threshold", type=float, default=0.5)

    for name, func, help_ in (("resolve", cmd_resolve, "cluster mentions into entities"),
                              ("baseline", cmd_baseline, "score the random-classifier baseline")):
        p = add(name, func, help_)
        p.add_argument("--corpus", required=True)
        p.add_argument("--singleton-mode", choices=SINGLETON_MODES, default="none")
        p.add_argument("--link-threshold", type=_threshold, default=None,
                       help="minimum confidence to link, or 'none' (default) to always link")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out")
        if name == "resolve":
            p.add_argument("--embeddings")
            p.add_argument("--model-dir")
            p.add_argument("--scorer", choices=("model", "random"), default="model")
            p.add_argument("--singleton-threshold", type=float, default=None)
        else:
            p.add_argument("--json", help="also write the report as JSON to this path")

    p = add("score", cmd_score, "score predictions against a gold corpus")
    p.add_argument("key")
    p.add_argument("predictions")
    p.add_argument("--json", help="also write the report as JSON to this path")

    p = add("synth", cmd_synth, "write a synthetic corpus (and optional random embeddings)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--docs", type=int, default=40)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--dim", type=int, default=16)
    return parser, subs


def _prescan(argv):
    """(subcommand, --config value) found in argv without full parsing."""
    command = config = None
    it = iter(argv)
    for tok in it:
        if command is None and not tok.startswith("-"):
            command = tok
        elif tok == "--config":
            config = next(it, None)
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
    return command, config


def _apply_config_file(parser, subs, argv):
    """Parse argv with a --config JSON file's values installed as subcommand defaults."""
    command, config = _prescan(argv)
    if config is None or command not in subs:
        return parser.parse_args(argv)
    try:
        with open(config, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot load config {config}: {exc}")
    if not isinstance(values, dict):
        parser.error("config file must hold a JSON object")
    sp = subs[command]
    known = {a.dest: a for a in sp._actions}
    defaults = {}
    for k, v in values.items():
        dest = k.replace("-", "_")
        if dest not in known or dest in ("config", "help"):
            parser.error(f"unknown config key {k!r} for {command}")
        action = known[dest]
        if isinstance(v, str) and action.type is not None:
            try:
                v = action.type(v)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                parser.error(f"config key {k!r}: {exc}")
        elif dest == "link_threshold" and v is not None:
            v = _threshold(str(v))
        elif dest == "features":
            v = _selection(str(v))
        if action.choices is not None and v not in action.choices:
            parser.error(f"config key {k!r}: invalid choice {v!r}")
        defaults[dest] = v
        action.required = False
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subs = build_parser()
    args = _apply_config_file(parser, subs, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
