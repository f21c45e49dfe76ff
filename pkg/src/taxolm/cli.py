"""Command-line surface: ingest, stats, sample, pretrain, evaluate.

Every command accepts a flat INI-style config file (key=value lines, `#`
comments) through --config; command-line flags override file keys. Commands
that write into an output directory echo their effective configuration
there. Exit codes: 0 success, 1 runtime failure, 2 input/validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import InputError, LengthMismatch, TaxolmError
from .masking import MaskingPolicy
from .metrics import (
    EvalReport,
    decode_bio,
    mrr,
    read_bio_file,
    read_label_file,
    sequence_report,
    weighted_macro_f1,
)
from .model.network import ModelConfig
from .model.training import PretrainConfig, pretrain
from .sampler import SamplerConfig, pair_to_json, sample_pair
from .taxonomy import Kind, corpus_stats, load_taxonomy, save_taxonomy
from .tokenizer import tokenize


def load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InputError(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(value: str, action: argparse.Action):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)) or isinstance(
        action.const, bool
    ):
        lowered = value.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise InputError(f"cannot parse boolean config value {value!r} for {action.dest!r}")
    if action.type is not None:
        return action.type(value)
    return value


def _apply_config_file(subparser: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {action.dest: action for action in subparser._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in actions:
            raise InputError(f"unknown config key {key!r}")
        defaults[key] = _coerce(raw, actions[key])
    subparser.set_defaults(**defaults)


def _echo_config(args: argparse.Namespace, out_dir: str) -> None:
    skip = {"func", "command", "config"}
    lines = []
    for key in sorted(vars(args)):
        if key in skip:
            continue
        value = getattr(args, key)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key}={value}")
    with open(os.path.join(out_dir, "effective_config.ini"), "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def cmd_ingest(args: argparse.Namespace) -> int:
    store = load_taxonomy(args.taxonomy, strict=args.strict)
    kinds = {kind: 0 for kind in Kind}
    for rec in store.concepts.values():
        kinds[rec.kind] += 1
    report = {
        "concepts": len(store.concepts),
        "occupations": kinds[Kind.OCCUPATION],
        "skills": kinds[Kind.SKILL],
        "aliases": kinds[Kind.ALIAS],
        "groups": len(store.groups),
        "languages": sorted(store.languages),
        "description_entries": len(store.entries),
    }
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        save_taxonomy(store, os.path.join(args.out, "normalized.jsonl"))
        with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2, sort_keys=True)
            handle.write("\n")
        _echo_config(args, args.out)
    print(json.dumps(report, sort_keys=True))
    return 0


def _stats_payload(store) -> dict:
    per_language = corpus_stats(store, tokenize)
    total_count = sum(s["instance_count"] for s in per_language.values())
    payload: dict = {"languages": per_language}
    if total_count:
        weighted = sum(s["instance_count"] * s["mean_token_length"] for s in per_language.values())
        payload["total"] = {
            "instance_count": total_count,
            "mean_token_length": weighted / total_count,
            "max_token_length": max(s["max_token_length"] for s in per_language.values()),
        }
    return payload


def _stats_table(payload: dict) -> str:
    header = f"{'language':<10}{'instances':>12}{'mean_tokens':>14}{'max_tokens':>12}"
    rows = [header]
    for lang, stats in payload["languages"].items():
        rows.append(
            f"{lang:<10}{stats['instance_count']:>12}"
            f"{stats['mean_token_length']:>14.4f}{stats['max_token_length']:>12}"
        )
    if "total" in payload:
        total = payload["total"]
        rows.append(
            f"{'total':<10}{total['instance_count']:>12}"
            f"{total['mean_token_length']:>14.4f}{total['max_token_length']:>12}"
        )
    return "\n".join(rows)


def cmd_stats(args: argparse.Namespace) -> int:
    store = load_taxonomy(args.taxonomy, strict=args.strict)
    payload = _stats_payload(store)
    print(_stats_table(payload))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "stats.json"), "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
        _echo_config(args, args.out)
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    store = load_taxonomy(args.taxonomy)
    config = SamplerConfig(
        seed=args.seed,
        strict_disjoint_random=args.strict_disjoint,
        max_retries=args.max_retries,
    )
    rng = np.random.default_rng(config.seed)
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for _ in range(args.n):
            sink.write(json.dumps(pair_to_json(sample_pair(store, config, rng))) + "\n")
    finally:
        if args.out:
            sink.close()
    return 0


def cmd_pretrain(args: argparse.Namespace) -> int:
    store = load_taxonomy(args.taxonomy)
    sampler_config = SamplerConfig(seed=args.seed, strict_disjoint_random=args.strict_disjoint)
    model_config = ModelConfig(
        vocab_size=1,  # replaced by the vocabulary actually built inside pretrain
        max_len=args.max_len,
        layers=args.layers,
        hidden_dim=args.hidden_dim,
        heads=args.heads,
        ffn_dim=args.ffn_dim,
        dropout=args.dropout,
    )
    run = PretrainConfig(
        steps=args.steps,
        seed=args.seed,
        batch_size=args.batch_size,
        peak_lr=args.lr,
        warmup_ratio=args.warmup_ratio,
        weight_decay=args.weight_decay,
        log_interval=args.log_interval,
        dev_fraction=args.dev_fraction,
        max_len=args.max_len,
        min_freq=args.min_freq,
        masking=MaskingPolicy(select_rate=args.select_rate),
    )
    os.makedirs(args.out, exist_ok=True)
    _echo_config(args, args.out)
    result = pretrain(
        store,
        sampler_config,
        model_config,
        run,
        args.out,
        resume_from=args.resume,
        halt_after=args.halt_after,
    )
    if result.final:
        print(
            "final step {step}: train_loss={train_loss:.4f} dev_loss={dev_loss:.4f} "
            "mlm_acc={mlm_acc:.4f} erp_acc={erp_acc:.4f}".format(**result.final)
        )
    return 0


def _aligned_spans(gold_path: str, pred_path: str):
    gold_sentences = read_bio_file(gold_path)
    pred_sentences = read_bio_file(pred_path)
    if len(gold_sentences) != len(pred_sentences):
        raise LengthMismatch(
            f"{len(gold_sentences)} gold sentences vs {len(pred_sentences)} predicted"
        )
    for idx, ((gtok, _), (ptok, _)) in enumerate(zip(gold_sentences, pred_sentences)):
        if len(gtok) != len(ptok):
            raise LengthMismatch(f"sentence {idx + 1}: {len(gtok)} gold tokens vs {len(ptok)}")
    gold = [decode_bio(tags, tokens) for tokens, tags in gold_sentences]
    pred = [decode_bio(tags, tokens) for tokens, tags in pred_sentences]
    return gold, pred


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.task == "seq":
        gold, pred = _aligned_spans(args.gold, args.pred)
        report = sequence_report(gold, pred)
    elif args.task == "mcc":
        gold_labels = read_label_file(args.gold, "label")
        pred_labels = read_label_file(args.pred, "label")
        report = EvalReport(weighted_macro_f1=weighted_macro_f1(gold_labels, pred_labels))
    else:  # mlc
        relevant = read_label_file(args.gold, "relevant")
        rankings = read_label_file(args.pred, "ranking")
        report = EvalReport(mrr=mrr(rankings, relevant))
    print(report.table())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as handle:
            json.dump(report.to_json(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        _echo_config(args, args.out)
    else:
        print(json.dumps(report.to_json(), sort_keys=True))
    return 0


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="taxolm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="INI-style key=value config file")
        p.set_defaults(func=func)
        commands[name] = p
        return p

    p = add("ingest", cmd_ingest, "validate a taxonomy dump and write the normalized store")
    p.add_argument("taxonomy")
    p.add_argument("--strict", action="store_true", help="reject unknown fields")
    p.add_argument("--seed", type=int, default=None, help="accepted for uniformity; ingest is deterministic")
    p.add_argument("--out", default=None)

    p = add("stats", cmd_stats, "per-language corpus statistics")
    p.add_argument("taxonomy")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--seed", type=int, default=None, help="accepted for uniformity; stats is deterministic")
    p.add_argument("--out", default=None)

    p = add("sample", cmd_sample, "emit labeled concept pairs as JSONL")
    p.add_argument("taxonomy")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--strict-disjoint", dest="strict_disjoint", action="store_true", default=True)
    p.add_argument("--no-strict-disjoint", dest="strict_disjoint", action="store_false")
    p.add_argument("--max-retries", type=int, default=64)
    p.add_argument("--out", default=None)

    p = add("pretrain", cmd_pretrain, "toy joint-objective pre-training run")
    p.add_argument("taxonomy")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--warmup-ratio", type=float, default=0.06)
    p.add_argument("--weight-decay", type=float, default=0.01)
    p.add_argument("--log-interval", type=int, default=50)
    p.add_argument("--dev-fraction", type=float, default=0.01)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--min-freq", type=int, default=1)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden-dim", type=int, default=32)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--ffn-dim", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--select-rate", type=float, default=0.15)
    p.add_argument("--strict-disjoint", dest="strict_disjoint", action="store_true", default=True)
    p.add_argument("--no-strict-disjoint", dest="strict_disjoint", action="store_false")
    p.add_argument("--resume", default=None, help="checkpoint.npz to continue from")
    p.add_argument("--halt-after", type=int, default=None, help="stop after the checkpoint at this step")

    p = add("evaluate", cmd_evaluate, "score predictions against gold data")
    p.add_argument("--task", choices=("seq", "mcc", "mlc"), required=True)
    p.add_argument("gold")
    p.add_argument("pred")
    p.add_argument("--seed", type=int, default=None, help="accepted for uniformity; evaluation is deterministic")
    p.add_argument("--out", default=None)

    return parser, commands


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            _apply_config_file(commands[args.command], load_config_file(args.config))
            args = parser.parse_args(argv)
        return args.func(args)
    except (InputError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TaxolmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
