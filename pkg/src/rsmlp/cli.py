"""Command-line entry point.

stdout carries only machine-readable payloads; every diagnostic goes to
stderr.  Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .edits import cells_json, derive_edit_matrix
from .errors import RsmlpError
from .model import RsmlpModel
from .text import DialogueExample, build_joint, load_corpus, tokenize
from .training import (
    TrainConfig,
    bench,
    configs_from_mapping,
    evaluate,
    parse_config_file,
    rewrite_example,
    train,
)
from .model import ModelConfig

USAGE_ERROR = 1
DATA_ERROR = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="rsmlp", description="Incomplete-utterance rewriting pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    derive = sub.add_parser("derive-labels", help="derive edit-matrix supervision from gold triples")
    derive.add_argument("--input", required=True)
    derive.add_argument("--output", required=True)
    derive.add_argument("--mode", choices=("char", "word"), default="char")

    tr = sub.add_parser("train", help="train a model")
    tr.add_argument("--train", required=True, dest="train_path")
    tr.add_argument("--dev")
    tr.add_argument("--config")
    tr.add_argument("--out", required=True)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--out")

    rw = sub.add_parser("rewrite", help="rewrite one utterance")
    rw.add_argument("--model", required=True)
    rw.add_argument("--context", required=True, help='context turns joined with "||"')
    rw.add_argument("--utterance", required=True)

    be = sub.add_parser("bench", help="latency benchmark")
    be.add_argument("--model", required=True)
    be.add_argument("--len", type=int, default=64, dest="length")
    be.add_argument("--iters", type=int, default=200)
    return parser


def _cmd_derive(args) -> int:
    errors = []
    corpus = load_corpus(args.input, mode=args.mode, errors=errors)
    for failure in errors:
        print(f"line {failure.line_no}: {failure.reason}", file=sys.stderr)
    lossy = 0
    dropped = 0
    with open(args.output, "w", encoding="utf-8") as out:
        for example in corpus:
            if example.rewrite is None:
                raise RsmlpError("derive-labels needs gold rewrites on every line")
            matrix = derive_edit_matrix(example, build_joint(example))
            lossy += matrix.lossy
            dropped += matrix.dropped_tokens
            out.write(json.dumps(cells_json(matrix), ensure_ascii=False) + "\n")
    print(
        f"{len(corpus)} examples, {lossy} lossy ({dropped} dropped tokens), "
        f"{len(errors)} malformed lines",
        file=sys.stderr,
    )
    return 0


def _cmd_train(args) -> int:
    if args.config:
        model_config, train_config = configs_from_mapping(parse_config_file(args.config))
    else:
        model_config, train_config = ModelConfig(), TrainConfig()
    corpus = load_corpus(args.train_path, mode=model_config.token_mode)
    dev = load_corpus(args.dev, mode=model_config.token_mode) if args.dev else None
    model, history = train(corpus, model_config, train_config, dev=dev)
    model.save(args.out)
    final_loss = history["epoch_loss"][-1] if history["epoch_loss"] else None
    print(
        f"trained {train_config.epochs} epochs, final median loss {final_loss}, "
        f"{history['truncated']} truncated examples",
        file=sys.stderr,
    )
    return 0


def _cmd_eval(args) -> int:
    model = RsmlpModel.load(args.model)
    corpus = load_corpus(args.data, mode=model.config.token_mode)
    payload = json.dumps(evaluate(model, corpus).to_dict(), sort_keys=True, ensure_ascii=False)
    print(payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    return 0


def _cmd_rewrite(args) -> int:
    model = RsmlpModel.load(args.model)
    mode = model.config.token_mode
    example = DialogueExample(
        context_utterances=tuple(tuple(tokenize(u, mode)) for u in args.context.split("||")),
        incomplete=tuple(tokenize(args.utterance, mode)),
    )
    tokens = rewrite_example(model, example)
    joiner = "" if mode == "char" else " "
    print(joiner.join(tokens))
    return 0


def _cmd_bench(args) -> int:
    model = RsmlpModel.load(args.model)
    print(json.dumps(bench(model, length=args.length, iterations=args.iters), sort_keys=True))
    return 0


_COMMANDS = {
    "derive-labels": _cmd_derive,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "rewrite": _cmd_rewrite,
    "bench": _cmd_bench,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (RsmlpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
