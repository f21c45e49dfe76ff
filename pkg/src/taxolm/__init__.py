"""Desk-scale multilingual taxonomy pre-training toolkit.

Submodules:

* taxonomy  — JSONL ingestion, validation, indexing, corpus statistics
* sampler   — random/linked/grouped relation pair sampling
* tokenizer — word-level vocabulary and paired-segment input assembly
* masking   — dynamic masked-language-modeling corruption
* model     — toy transformer encoder, joint loss, exact gradients, AdamW
* metrics   — span-F1 / bucket / MRR / weighted macro-F1 evaluation suite
* cli       — ingest / stats / sample / pretrain / evaluate commands
"""

__version__ = "0.1.0"
