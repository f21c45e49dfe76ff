"""Deterministic toy pre-training loop.

One master seed is split into labeled child streams (init, dev sampling,
dev masking, train sampling, train masking, dropout), so a rerun with the
same seed reproduces the metrics CSV byte for byte and a resumed run
continues the interrupted trajectory exactly. Checkpoints are single .npz
files written atomically (temp file + rename) at every logging boundary.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import EmptyCorpus
from ..masking import IGNORE_INDEX, MaskedInstance, MaskingPolicy, mask_sequence
from ..sampler import PairSample, Relation, SamplerConfig, sample_pair
from ..taxonomy import TaxonomyStore
from ..tokenizer import PAD_ID, Vocab, build_vocab, instance_text, pair_sequence
from .network import ForwardOutput, ModelConfig, backward, forward, init_params, log_softmax
from .optim import OptimizerState, adamw_update, init_optimizer

CHECKPOINT_VERSION = 1
CSV_HEADER = "step,train_loss,dev_loss,mlm_acc,erp_acc"

_STREAMS = ("init", "dev_sample", "dev_mask", "train_sample", "train_mask", "dropout")


@dataclass
class PretrainConfig:
    steps: int
    seed: int
    batch_size: int = 32
    peak_lr: float = 1e-3
    warmup_ratio: float = 0.06
    weight_decay: float = 0.01
    betas: tuple[float, float] = (0.9, 0.98)
    log_interval: int = 50
    dev_fraction: float = 0.01
    max_len: int = 64
    min_freq: int = 1
    mlm_reduction: str = "mean"
    masking: MaskingPolicy = field(default_factory=MaskingPolicy)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.log_interval < 1:
            raise ValueError("log_interval must be >= 1")
        if not 0.0 < self.dev_fraction < 1.0:
            raise ValueError("dev_fraction must be in (0, 1)")


@dataclass
class PretrainResult:
    history: list[dict]
    final: dict
    checkpoint_path: str
    metrics_path: str
    model_config: ModelConfig
    vocab: Vocab


def _spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.Generator(np.random.PCG64(child)) for name, child in zip(_STREAMS, children)}


def collate(instances: list[MaskedInstance]) -> dict[str, np.ndarray]:
    """Pad a list of masked instances into fixed-shape training arrays."""
    width = max(len(inst.input_ids) for inst in instances)
    n = len(instances)
    input_ids = np.full((n, width), PAD_ID, dtype=np.int64)
    mlm_labels = np.full((n, width), IGNORE_INDEX, dtype=np.int64)
    erp_labels = np.zeros(n, dtype=np.int64)
    for row, inst in enumerate(instances):
        length = len(inst.input_ids)
        input_ids[row, :length] = inst.input_ids
        mlm_labels[row, :length] = inst.mlm_labels
        erp_labels[row] = int(inst.erp_label)
    return {"input_ids": input_ids, "mlm_labels": mlm_labels, "erp_labels": erp_labels}


class _InstanceBuilder:
    """Turns sampled pairs into masked instances, caching encoded segments."""

    def __init__(self, store: TaxonomyStore, vocab: Vocab, max_len: int, policy: MaskingPolicy):
        self.store = store
        self.vocab = vocab
        self.max_len = max_len
        self.policy = policy
        self._segments: dict[tuple[str, str], list[int]] = {}

    def _segment(self, entry: tuple[str, str]) -> list[int]:
        ids = self._segments.get(entry)
        if ids is None:
            ids = self.vocab.encode(instance_text(self.store, entry[0], entry[1]))
            self._segments[entry] = ids
        return ids

    def build(self, pair: PairSample, rng: np.random.Generator) -> MaskedInstance:
        seq = pair_sequence(self._segment(pair.anchor), self._segment(pair.partner), self.max_len)
        return mask_sequence(seq, self.vocab, self.policy, rng, erp_label=pair.relation)


def train_step(
    params: dict[str, np.ndarray],
    state: OptimizerState,
    config: ModelConfig,
    batch: dict[str, np.ndarray],
    mlm_reduction: str = "mean",
    rng: np.random.Generator | None = None,
) -> dict:
    """One optimization step: exact gradients then an AdamW update in place."""
    grads, (total, mlm, erp) = backward(
        params, config, batch, mlm_reduction=mlm_reduction, rng=rng, train=True
    )
    lr = adamw_update(params, state, grads)
    return {"step": state.step, "lr": lr, "loss": total, "mlm_loss": mlm, "erp_loss": erp}


def _dev_metrics(
    params: dict[str, np.ndarray],
    config: ModelConfig,
    dev_batches: list[dict[str, np.ndarray]],
    chunk: int = 128,
) -> dict:
    nll_sum = 0.0
    n_labeled = 0
    mlm_correct = 0
    erp_nll = 0.0
    n_inst = 0
    erp_correct = 0
    per_relation = {rel: [0, 0] for rel in Relation}  # correct, total
    for batch in dev_batches:
        ids = batch["input_ids"]
        for start in range(0, ids.shape[0], chunk):
            sl = slice(start, start + chunk)
            out: ForwardOutput = forward(params, config, ids[sl])
            labels = batch["mlm_labels"][sl]
            labeled = labels != IGNORE_INDEX
            if labeled.any():
                logp = log_softmax(out.mlm_logits)
                safe = np.where(labeled, labels, 0)
                picked = np.take_along_axis(logp, safe[..., None], axis=-1)[..., 0]
                nll_sum += float(-picked[labeled].sum())
                n_labeled += int(labeled.sum())
                pred = out.mlm_logits.argmax(axis=-1)
                mlm_correct += int(((pred == labels) & labeled).sum())
            erp = batch["erp_labels"][sl]
            elogp = log_softmax(out.erp_logits)
            erp_nll += float(-elogp[np.arange(erp.shape[0]), erp].sum())
            epred = out.erp_logits.argmax(axis=-1)
            erp_correct += int((epred == erp).sum())
            n_inst += erp.shape[0]
            for rel in Relation:
                here = erp == int(rel)
                per_relation[rel][0] += int((epred[here] == erp[here]).sum())
                per_relation[rel][1] += int(here.sum())
    dev_mlm = nll_sum / n_labeled if n_labeled else 0.0
    dev_erp = erp_nll / n_inst if n_inst else 0.0
    return {
        "dev_loss": dev_mlm + dev_erp,
        "dev_mlm_loss": dev_mlm,
        "dev_erp_loss": dev_erp,
        "mlm_acc": mlm_correct / n_labeled if n_labeled else 0.0,
        "erp_acc": erp_correct / n_inst if n_inst else 0.0,
        "erp_acc_by_relation": {
            rel.wire_name: (cor / tot if tot else None) for rel, (cor, tot) in per_relation.items()
        },
    }


def _format_row(step: int, train_loss: float, dev: dict) -> str:
    return ",".join(
        [
            str(step),
            repr(float(train_loss)),
            repr(float(dev["dev_loss"])),
            repr(float(dev["mlm_acc"])),
            repr(float(dev["erp_acc"])),
        ]
    )


def save_checkpoint(
    path: str,
    params: dict[str, np.ndarray],
    state: OptimizerState,
    model_config: ModelConfig,
    vocab: Vocab,
    rng_states: dict[str, dict],
) -> None:
    """Single-file checkpoint, written atomically (temp + rename)."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "model_config": model_config.to_json(),
        "optimizer": {
            "step": state.step,
            "peak_lr": state.peak_lr,
            "total_steps": state.total_steps,
            "warmup_ratio": state.warmup_ratio,
            "betas": list(state.betas),
            "eps": state.eps,
            "weight_decay": state.weight_decay,
        },
        "rng": rng_states,
        "vocab": list(vocab.id_to_token),
    }
    arrays: dict[str, np.ndarray] = {
        "__meta__": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    }
    for name, value in params.items():
        arrays[f"param/{name}"] = value
    for name, value in state.m.items():
        arrays[f"m/{name}"] = value
    for name, value in state.v.items():
        arrays[f"v/{name}"] = value
    tmp = path + ".tmp"
    with open(tmp, "wb") as handle:
        np.savez(handle, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], OptimizerState, ModelConfig, Vocab, dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        params = {k[len("param/"):]: data[k].copy() for k in data.files if k.startswith("param/")}
        m = {k[len("m/"):]: data[k].copy() for k in data.files if k.startswith("m/")}
        v = {k[len("v/"):]: data[k].copy() for k in data.files if k.startswith("v/")}
    opt_meta = meta["optimizer"]
    state = OptimizerState(
        step=opt_meta["step"],
        m=m,
        v=v,
        peak_lr=opt_meta["peak_lr"],
        total_steps=opt_meta["total_steps"],
        warmup_ratio=opt_meta["warmup_ratio"],
        betas=tuple(opt_meta["betas"]),
        eps=opt_meta["eps"],
        weight_decay=opt_meta["weight_decay"],
    )
    model_config = ModelConfig.from_json(meta["model_config"])
    tokens = meta["vocab"]
    vocab = Vocab(id_to_token=tuple(tokens), token_to_id={t: i for i, t in enumerate(tokens)})
    return params, state, model_config, vocab, meta["rng"]


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _restore_rng(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state


def pretrain(
    store: TaxonomyStore,
    sampler_config: SamplerConfig,
    model_config: ModelConfig,
    run: PretrainConfig,
    out_dir: str,
    resume_from: str | None = None,
    halt_after: int | None = None,
) -> PretrainResult:
    """Run the joint objective end to end over a taxonomy store.

    The dev split holds out a fixed 1% (run.dev_fraction) of the instance
    budget, sampled and masked once from dedicated streams so its loss is
    comparable across steps. Fresh training pairs are drawn every batch and
    the corruption pattern is regenerated per instance.

    `halt_after` stops the loop right after the checkpoint at that logging
    boundary, modeling an interrupted run; resuming from the checkpoint
    continues the original trajectory bit for bit.

    Writes metrics.csv, checkpoint.npz, and summary.json under out_dir.
    """
    if not store.entries:
        raise EmptyCorpus("cannot pretrain on a store without descriptions")
    os.makedirs(out_dir, exist_ok=True)
    streams = _spawn_streams(run.seed)

    vocab = build_vocab(store, run.min_freq)
    if model_config.vocab_size != vocab.size:
        model_config = replace(model_config, vocab_size=vocab.size)
    if model_config.max_len < run.max_len:
        model_config = replace(model_config, max_len=run.max_len)

    builder = _InstanceBuilder(store, vocab, run.max_len, run.masking)

    # Fixed dev split: 1% of the total instance budget, held out up front.
    dev_count = max(1, round(run.dev_fraction * run.steps * run.batch_size))
    dev_instances = []
    for _ in range(dev_count):
        pair = sample_pair(store, sampler_config, streams["dev_sample"])
        dev_instances.append(builder.build(pair, streams["dev_mask"]))
    dev_batches = [collate(dev_instances)]

    if resume_from is not None:
        params, opt, ckpt_config, ckpt_vocab, rng_states = load_checkpoint(resume_from)
        if ckpt_config != model_config:
            raise ValueError("checkpoint model config does not match the requested run")
        if ckpt_vocab != vocab:
            raise ValueError("checkpoint vocabulary does not match this store and min_freq")
        if opt.total_steps != run.steps:
            raise ValueError(
                f"checkpoint was scheduled for {opt.total_steps} steps, run asks for {run.steps}"
            )
        _restore_rng(streams["train_sample"], rng_states["train_sample"])
        _restore_rng(streams["train_mask"], rng_states["train_mask"])
        if "dropout" in rng_states:
            _restore_rng(streams["dropout"], rng_states["dropout"])
        start_step = opt.step
    else:
        params = init_params(model_config, streams["init"])
        opt = init_optimizer(
            params,
            peak_lr=run.peak_lr,
            total_steps=run.steps,
            warmup_ratio=run.warmup_ratio,
            betas=run.betas,
            weight_decay=run.weight_decay,
        )
        start_step = 0

    metrics_path = os.path.join(out_dir, "metrics.csv")
    checkpoint_path = os.path.join(out_dir, "checkpoint.npz")
    dropout_rng = streams["dropout"] if model_config.dropout > 0 else None

    history: list[dict] = []
    interval_losses: list[float] = []
    with open(metrics_path, "w", encoding="utf-8") as csv:
        csv.write(CSV_HEADER + "\n")
        for step in range(start_step + 1, run.steps + 1):
            pairs = [sample_pair(store, sampler_config, streams["train_sample"]) for _ in range(run.batch_size)]
            batch = collate([builder.build(p, streams["train_mask"]) for p in pairs])
            logs = train_step(params, opt, model_config, batch, run.mlm_reduction, rng=dropout_rng)
            interval_losses.append(logs["loss"])

            if step % run.log_interval == 0 or step == run.steps:
                dev = _dev_metrics(params, model_config, dev_batches)
                row = {
                    "step": step,
                    "train_loss": sum(interval_losses) / len(interval_losses),
                    **dev,
                }
                history.append(row)
                csv.write(_format_row(step, row["train_loss"], dev) + "\n")
                csv.flush()
                interval_losses = []
                rng_states = {
                    "train_sample": _rng_state(streams["train_sample"]),
                    "train_mask": _rng_state(streams["train_mask"]),
                }
                if dropout_rng is not None:
                    rng_states["dropout"] = _rng_state(dropout_rng)
                save_checkpoint(checkpoint_path, params, opt, model_config, vocab, rng_states)
                if halt_after is not None and step >= halt_after:
                    break

    final = history[-1] if history else {}
    summary = {
        "steps": run.steps,
        "dev_instances": dev_count,
        "final": final,
        "history": history,
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return PretrainResult(
        history=history,
        final=final,
        checkpoint_path=checkpoint_path,
        metrics_path=metrics_path,
        model_config=model_config,
        vocab=vocab,
    )
