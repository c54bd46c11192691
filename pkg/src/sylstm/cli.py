"""Command-line entry point.

Subcommands: prep, train, eval, predict, baseline. Exit statuses: 0 ok,
2 I/O or configuration error, 3 artifact integrity error, 4 data/parse
alignment error. Config files use one `key = value` per line ('#' starts a
comment); any key can be overridden with a --key value flag. The env var
SYLSTM_RESOURCE_DIR points preprocessing at alternate resource tables.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields

import torch

from . import corpus, depgraph, evaluation, textprep, train as training, vocab as vocabulary
from .corpus import TASK_CLASSES
from .model import (IntegrityError, ModelConfig, SyLSTM, model_from_checkpoint,
                    predict as model_predict, save_checkpoint)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_IO, EXIT_INTEGRITY, EXIT_ALIGNMENT = 0, 2, 3, 4


class ConfigError(Exception):
    pass


class AlignmentError(Exception):
    pass


@dataclass
class RunConfig:
    dataset: str = "olid"          # olid | davidson
    task: str = "A"                # A | B | C | D3
    train_file: str = ""
    test_file: str = ""
    parses_train: str = ""
    parses_test: str = ""
    glove: str = ""
    embedding: str = "random"      # random | glove
    output_dir: str = "out"
    seed: int = 0
    vocab_size: int = 30_000
    dev_fraction: float = 0.10
    # model overrides
    d_w: int = 200
    lstm_hidden: int = 32
    gcn_out: int = 32
    ffnn_out: int = 32
    max_len: int = 64
    pooling: str = "mean"
    # training overrides
    epochs: int = 30
    batch_size: int = 32
    lr0: float = 0.001
    weight_decay: float = 0.1

    def validate(self) -> None:
        problems = []
        if self.dataset not in ("olid", "davidson"):
            problems.append(f"unknown dataset {self.dataset!r}")
        if self.task not in TASK_CLASSES:
            problems.append(f"unknown task {self.task!r}")
        elif (self.dataset == "olid") != (self.task in ("A", "B", "C")):
            problems.append(f"task {self.task} is not defined for dataset {self.dataset}")
        if not self.train_file:
            problems.append("train_file is required")
        for key in ("train_file", "test_file", "parses_train", "parses_test", "glove"):
            path = getattr(self, key)
            if path and not os.path.exists(path):
                problems.append(f"{key}: no such file {path!r}")
        if self.embedding not in ("random", "glove"):
            problems.append(f"embedding must be 'random' or 'glove', got {self.embedding!r}")
        if self.embedding == "glove" and not self.glove:
            problems.append("embedding=glove requires a glove vectors path")
        if problems:
            raise ConfigError("; ".join(problems))


def parse_config_file(path: str) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path} line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def build_run_config(path: str, overrides: dict[str, str]) -> RunConfig:
    values = parse_config_file(path)
    values.update(overrides)
    cfg = RunConfig()
    known = {f.name: f.type for f in fields(RunConfig)}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(cfg, key)
        try:
            setattr(cfg, key, type(current)(raw))
        except ValueError:
            raise ConfigError(f"config key {key}: bad value {raw!r}")
    cfg.validate()
    return cfg


def _load_rows(cfg: RunConfig, data_path: str, parse_path: str):
    """All dataset rows zipped with their parse blocks, filtered to the task."""
    if cfg.dataset == "olid":
        examples = corpus.load_olid(data_path, task="A")
    else:
        examples = corpus.load_davidson(data_path)
    parses = depgraph.read_conllu(parse_path)
    if len(examples) != len(parses):
        raise AlignmentError(f"{data_path} has {len(examples)} rows but {parse_path} "
                             f"has {len(parses)} parses")
    pairs = [(ex, p) for ex, p in zip(examples, parses) if cfg.task in ex.task_labels]
    if not pairs:
        raise ConfigError(f"no examples carry a label for task {cfg.task}")
    return pairs


def cmd_prep(args) -> int:
    emap_path = fmap_path = None
    resource_dir = os.environ.get("SYLSTM_RESOURCE_DIR")
    if resource_dir:
        emap_path = os.path.join(resource_dir, "emoticons.tsv")
        fmap_path = os.path.join(resource_dir, "wordfreq.tsv")
    try:
        textprep.load_emoticon_map(emap_path)
        textprep.load_word_frequencies(fmap_path)
        with open(args.infile, encoding="utf-8") as f:
            lines = f.read().splitlines()
        cleaned = []
        for lineno, line in enumerate(lines, start=1):
            try:
                cleaned.append(textprep.preprocess(line).text)
            except ValueError as err:
                print(f"error: line {lineno}: {err}", file=sys.stderr)
                return EXIT_IO
        with open(args.outfile, "w", encoding="utf-8") as f:
            f.write("\n".join(cleaned) + ("\n" if cleaned else ""))
    except (OSError, textprep.ResourceError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_train(args, overrides: dict[str, str]) -> int:
    try:
        cfg = build_run_config(args.config, overrides)
        classes = TASK_CLASSES[cfg.task]
        pairs = _load_rows(cfg, cfg.train_file, cfg.parses_train or _default_parses(cfg.train_file))
        test_pairs = []
        if cfg.test_file:
            test_pairs = _load_rows(cfg, cfg.test_file,
                                    cfg.parses_test or _default_parses(cfg.test_file))
    except (ConfigError, corpus.CorpusError, depgraph.ParseError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except AlignmentError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ALIGNMENT

    parse_by_id = {ex.id: p for ex, p in pairs + test_pairs}
    examples = [ex for ex, _ in pairs]
    if cfg.dataset == "olid":
        split = corpus.make_split(examples, cfg.task, cfg.dev_fraction, cfg.seed,
                                  test_examples=[ex for ex, _ in test_pairs])
    else:
        split = corpus.make_split(examples, cfg.task, cfg.dev_fraction, cfg.seed)

    voc = vocabulary.build_vocab(
        [list(parse_by_id[ex.id].tokens) for ex in split.train], cfg.vocab_size)
    if cfg.embedding == "glove":
        emb = vocabulary.load_glove(cfg.glove, voc, cfg.d_w, cfg.seed)
    else:
        emb = vocabulary.random_embeddings(voc, cfg.d_w, cfg.seed)

    def encode(exs):
        out = []
        for ex in exs:
            parse = parse_by_id[ex.id]
            tokens = list(parse.tokens)[:cfg.max_len]
            adj = depgraph.normalize(depgraph.build_graph(parse, max_len=cfg.max_len))
            out.append((vocabulary.encode(tokens, voc), adj,
                        classes.index(ex.task_labels[cfg.task])))
        return out

    model_cfg = ModelConfig(d_w=cfg.d_w, lstm_hidden=cfg.lstm_hidden, gcn_out=cfg.gcn_out,
                            ffnn_out=cfg.ffnn_out, n_classes=len(classes),
                            max_len=cfg.max_len, pooling=cfg.pooling)
    train_cfg = training.TrainConfig(lr0=cfg.lr0, weight_decay=cfg.weight_decay,
                                     epochs=cfg.epochs, batch_size=cfg.batch_size,
                                     seed=cfg.seed)
    torch.manual_seed(cfg.seed)
    model = SyLSTM(model_cfg, emb, seed=cfg.seed)
    counts = model.parameter_counts()
    print(f"trainable parameters: {counts['total']}")
    best_state, history = training.train(model, train_cfg, encode(split.train),
                                         encode(split.dev), classes,
                                         example_ids=[ex.id for ex in split.train])
    model.load_state_dict(best_state)

    os.makedirs(cfg.output_dir, exist_ok=True)
    save_checkpoint(os.path.join(cfg.output_dir, "checkpoint.npz"), model,
                    voc.sha256(), task=cfg.task)
    with open(os.path.join(cfg.output_dir, "history.csv"), "w") as f:
        f.write(history.to_csv())
    split.save_manifest(os.path.join(cfg.output_dir, "split.json"))
    with open(os.path.join(cfg.output_dir, "vocab.json"), "w", encoding="utf-8") as f:
        f.write(voc.to_json())
    print(f"best dev weighted F1: {100 * max(history.dev_wf1):.1f} "
          f"(epoch {history.best_epoch})")
    return EXIT_OK


def _default_parses(data_path: str) -> str:
    return os.path.splitext(data_path)[0] + ".conllu"


def _load_model_and_vocab(checkpoint_path: str, vocab_path: str):
    model, vocab_hash, task = model_from_checkpoint(checkpoint_path)
    with open(vocab_path, encoding="utf-8") as f:
        voc = vocabulary.Vocabulary.from_json(f.read())
    if voc.sha256() != vocab_hash:
        raise IntegrityError("vocabulary hash does not match the checkpoint")
    return model, voc, task


def cmd_eval(args) -> int:
    try:
        model, voc, task = _load_model_and_vocab(args.checkpoint, args.vocab)
        classes = TASK_CLASSES[task]
        cfg = RunConfig(dataset="davidson" if task == "D3" else "olid", task=task,
                        train_file=args.data)
        pairs = _load_rows(cfg, args.data, args.parses)
    except (vocabulary.VocabError, IntegrityError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INTEGRITY
    except AlignmentError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ALIGNMENT
    except (ConfigError, corpus.CorpusError, depgraph.ParseError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO

    max_len = model.cfg.max_len
    inputs, gold = [], []
    for ex, parse in pairs:
        tokens = list(parse.tokens)[:max_len]
        adj = depgraph.normalize(depgraph.build_graph(parse, max_len=max_len))
        inputs.append((vocabulary.encode(tokens, voc), adj))
        gold.append(ex.task_labels[task])
    pred = [classes[i] for i in model_predict(model, inputs)]
    report = evaluation.weighted_metrics(gold, pred, list(classes), task=task)
    rows = [(f"All {c}", evaluation.trivial_baseline(list(classes), c, gold, task=task))
            for c in classes]
    rows.append(("SyLSTM", report))
    print(evaluation.format_table(rows))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report.to_json())
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        model, voc, task = _load_model_and_vocab(args.checkpoint, args.vocab)
        classes = TASK_CLASSES[task]
        with open(args.infile, encoding="utf-8") as f:
            tweets = f.read().splitlines()
        parses = depgraph.read_conllu(args.parses)
    except (vocabulary.VocabError, IntegrityError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (depgraph.ParseError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    if len(tweets) != len(parses):
        extra = range(min(len(tweets), len(parses)) + 1, max(len(tweets), len(parses)) + 1)
        print(f"error: {len(tweets)} tweets but {len(parses)} parses; "
              f"unmatched lines: {list(extra)}", file=sys.stderr)
        return EXIT_ALIGNMENT
    max_len = model.cfg.max_len
    inputs = []
    for parse in parses:
        tokens = list(parse.tokens)[:max_len]
        adj = depgraph.normalize(depgraph.build_graph(parse, max_len=max_len))
        inputs.append((vocabulary.encode(tokens, voc), adj))
    labels = [classes[i] for i in model_predict(model, inputs)]
    with open(args.outfile, "w", encoding="utf-8") as f:
        f.write("\n".join(labels) + ("\n" if labels else ""))
    return EXIT_OK


def cmd_baseline(args) -> int:
    try:
        if args.dataset == "olid":
            examples = [ex for ex in corpus.load_olid(args.train_file, task="A")
                        if args.task in ex.task_labels]
        else:
            examples = corpus.load_davidson(args.train_file)
        classes = TASK_CLASSES[args.task]
        test_examples = None
        if args.test_file:
            if args.dataset == "olid":
                test_examples = [ex for ex in corpus.load_olid(args.test_file, task="A")
                                 if args.task in ex.task_labels]
            else:
                test_examples = corpus.load_davidson(args.test_file)
        split = corpus.make_split(examples, args.task, seed=args.seed,
                                  test_examples=test_examples)
    except (corpus.CorpusError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO

    def tokens_of(exs):
        return [textprep.preprocess(ex.raw).text.split() for ex in exs]

    def labels_of(exs):
        return [ex.task_labels[args.task] for ex in exs]

    model = evaluation.svm_baseline(tokens_of(split.train), labels_of(split.train),
                                    tokens_of(split.dev), labels_of(split.dev),
                                    list(classes))
    held_out = split.test if split.test else split.dev
    gold = labels_of(held_out)
    pred = model.predict(tokens_of(held_out))
    rows = [(f"All {c}", evaluation.trivial_baseline(list(classes), c, gold))
            for c in classes]
    rows.append(("SVM", evaluation.weighted_metrics(gold, pred, list(classes))))
    print(evaluation.format_table(rows))
    return EXIT_OK


def _parse_overrides(extra: list[str]) -> dict[str, str]:
    if len(extra) % 2 != 0:
        raise ConfigError(f"dangling override flag: {extra[-1]!r}")
    overrides = {}
    for flag, value in zip(extra[::2], extra[1::2]):
        if not flag.startswith("--"):
            raise ConfigError(f"expected --key value overrides, got {flag!r}")
        overrides[flag[2:]] = value
    return overrides


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("SYLSTM_LOG", "WARNING"))
    parser = argparse.ArgumentParser(prog="sylstm")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="normalize raw tweets, one per line")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("config")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled set")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--parses", required=True)
    p.add_argument("--out", default="")

    p = sub.add_parser("predict", help="label raw tweets with a parse sidecar")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--parses", required=True)
    p.add_argument("--out", dest="outfile", required=True)

    p = sub.add_parser("baseline", help="unigram SVM and trivial-row baselines")
    p.add_argument("--dataset", choices=["olid", "davidson"], required=True)
    p.add_argument("--task", choices=list(TASK_CLASSES), required=True)
    p.add_argument("--train-file", required=True)
    p.add_argument("--test-file", default="")
    p.add_argument("--seed", type=int, default=0)

    args, extra = parser.parse_known_args(argv)
    try:
        if args.command == "prep":
            return cmd_prep(args)
        if args.command == "train":
            return cmd_train(args, _parse_overrides(extra))
        if extra:
            parser.error(f"unrecognized arguments: {extra}")
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "predict":
            return cmd_predict(args)
        if args.command == "baseline":
            return cmd_baseline(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
