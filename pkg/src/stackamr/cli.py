"""Command line: oracle, train, parse, eval and inspect subcommands."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

from .amr import PenmanError, iter_blocks, read_amr_file, write_amr_file
from .corpus import CorpusError, fallback_align, make_tokens, read_conll_annotations, read_corpus

logger = logging.getLogger("stackamr")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _existing_file(text: str) -> Path:
    path = Path(text)
    if not path.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {text}")
    return path


def _existing_dir(text: str) -> Path:
    path = Path(text)
    if not path.is_dir():
        raise argparse.ArgumentTypeError(f"no such directory: {text}")
    return path


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stackamr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("oracle", help="print oracle action sequences for an aligned corpus")
    p.add_argument("--corpus", type=_existing_file, required=True)
    p.add_argument("--fallback-align", action="store_true", help="add exact-match alignments for unaligned tokens")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("train", help="train a parser on an aligned corpus")
    p.add_argument("--corpus", type=_existing_file, required=True)
    p.add_argument("--dev", type=_existing_file, help="dev corpus (defaults to the training corpus)")
    p.add_argument("--embeddings", type=_existing_file, help="pretrained word vectors ('<count> <dim>' header)")
    p.add_argument("--conll", type=_existing_file, help="POS/dependency annotations for --corpus")
    p.add_argument("--dev-conll", type=_existing_file, help="POS/dependency annotations for --dev")
    p.add_argument("--use-pos", action="store_true")
    p.add_argument("--use-dep", action="store_true")
    p.add_argument("--no-chars", action="store_true", help="drop the character BiLSTM")
    p.add_argument("--fallback-align", action="store_true")
    p.add_argument("--out", type=Path, required=True, help="checkpoint directory")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--epochs", type=_positive, default=30)
    p.add_argument("--patience", type=_positive, default=5)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--dropout", type=float, default=0.0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="parse sentences with a trained model")
    p.add_argument("--model", type=_existing_dir, required=True)
    p.add_argument("--input", type=_existing_file, required=True, help="one tokenized sentence per line, or an AMR corpus")
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--conll", type=_existing_file, help="POS/dependency annotations for the input")
    p.add_argument("--jobs", type=_positive, default=1)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="Smatch between two AMR files")
    p.add_argument("--gold", type=_existing_file, required=True)
    p.add_argument("--pred", type=_existing_file, required=True)
    p.add_argument("--restarts", type=_positive, default=4)
    p.add_argument("--jobs", type=_positive, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="list the parameters of a trained model")
    p.add_argument("--model", type=_existing_dir, required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def _load_corpus(path: Path, conll: Path | None = None, fallback: bool = False):
    examples = read_corpus(path)
    if conll is not None:
        examples = read_conll_annotations(conll, examples)
    if fallback:
        examples = [fallback_align(ex) for ex in examples]
    return examples


def cmd_oracle(args) -> int:
    from .oracle import derive_actions
    from .smatch import corpus_score
    from .transitions import format_actions

    examples = _load_corpus(args.corpus, fallback=args.fallback_align)
    out = sys.stdout
    built = []
    for ex in examples:
        result = derive_actions(ex)
        built.append(result.graph)
        out.write(f"# ::id {ex.id}\n")
        if result.actions:
            out.write(format_actions(result.actions) + "\n")
        out.write(f"# reachable={str(result.reachable).lower()} skipped={result.skipped_triples}\n\n")
    score = corpus_score([ex.graph for ex in examples], built)
    out.write(f"# oracle Smatch P {score.precision:.4f} R {score.recall:.4f} F1 {score.f1:.4f}\n")
    return EXIT_OK


def cmd_train(args) -> int:
    from .model import ModelConfig
    from .trainer import TrainingError, train

    corpus = _load_corpus(args.corpus, args.conll, args.fallback_align)
    dev = _load_corpus(args.dev, args.dev_conll, args.fallback_align) if args.dev else None
    if not corpus:
        raise CorpusError(f"{args.corpus}: no examples")
    config = ModelConfig(
        use_chars=not args.no_chars,
        use_pos=args.use_pos,
        use_dep=args.use_dep,
        pretrained=str(args.embeddings) if args.embeddings else None,
        seed=args.seed,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        patience=args.patience,
        dropout=args.dropout,
    )
    run_info = {"corpus": args.corpus.name, "dev": args.dev.name if args.dev else None}
    try:
        _, run = train(corpus, dev, config, out_dir=args.out, run_info=run_info)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"epochs\t{len(run.losses)}")
    print(f"best_epoch\t{run.best_epoch}")
    print(f"best_dev_f1\t{run.best_score:.4f}")
    print(f"checkpoint\t{args.out}")
    return EXIT_OK


def _read_sentences(path: Path):
    text = path.read_text(encoding="utf-8")
    if any(line.startswith("# ::") for line in text.splitlines()):
        sentences = []
        for meta, _, _, _ in iter_blocks(text):
            sentences.append(((meta.get("tok") or meta.get("snt") or "").split(), meta.get("id")))
        return sentences
    return [(line.split(), None) for line in text.splitlines()]


def cmd_parse(args) -> int:
    from .corpus import AlignedExample
    from .amr import AmrGraph
    from .trainer import load_model, parse_all

    model = load_model(args.model)
    sentences = _read_sentences(args.input)
    token_lists = [make_tokens(words) for words, _ in sentences]
    if args.conll is not None:
        shells = [AlignedExample(toks, AmrGraph.empty()) for toks in token_lists]
        token_lists = [ex.tokens for ex in read_conll_annotations(args.conll, shells)]
    graphs = parse_all(model, token_lists, args.jobs)
    metas = []
    for k, (words, sid) in enumerate(sentences, start=1):
        metas.append({"id": sid or str(k), "snt": " ".join(words)})
    write_amr_file(args.output, graphs, metas)
    print(f"parsed {len(graphs)} sentence(s) -> {args.output}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .smatch import corpus_score

    gold = [g for _, g in read_amr_file(args.gold)]
    pred = [g for _, g in read_amr_file(args.pred)]
    score = corpus_score(gold, pred, restarts=args.restarts, jobs=args.jobs)
    print(f"P {score.precision:.4f} R {score.recall:.4f} F1 {score.f1:.4f}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    from .trainer import load_model

    model = load_model(args.model)
    total = trainable = 0
    print("name\tshape\ttrainable")
    for p in model.parameters():
        print(f"{p.name}\t{'x'.join(map(str, p.shape))}\t{str(p.trainable).lower()}")
        total += p.value.size
        trainable += p.value.size if p.trainable else 0
    print(f"# {len(model.parameters())} parameters, {total} values ({trainable} trainable)")
    print(f"# {model.actions.size} actions, {len(model.lexicon)} lexicon words")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (CorpusError, PenmanError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
