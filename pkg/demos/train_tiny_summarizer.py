"""Train a small summarizer on the bundled 32-example corpus.

Runs a couple of minutes below the overfit regime on purpose: the point
is the training loop mechanics (schedule, history, checkpoints, early
stopping bookkeeping), not headline numbers. Artifacts land in
demo_runs/tiny so the decoding demo can reuse them.
"""

from pathlib import Path

from scriptsum import ModelConfig, ScriptModel, TrainConfig, build_vocab, load_dataset, train
from scriptsum.data import toy_corpus_path

OUT = Path("demo_runs") / "tiny"

examples = load_dataset(toy_corpus_path())
src_vocab, tgt_vocab = build_vocab(examples)
print(f"{len(examples)} examples, {len(src_vocab)} source / {len(tgt_vocab)} target tokens")

config = ModelConfig(
    src_vocab_size=len(src_vocab),
    tgt_vocab_size=len(tgt_vocab),
    d_model=64,
    n_heads=4,
    n_script_modules=1,
    n_decoder_layers=2,
    ffn_dim=256,
    dropout_p=0.2,
    l=8,
    k=16,
)
model = ScriptModel(config, seed=0)
n_params = sum(p.data.size for p in model.params.values())
print(f"model: {n_params} parameters, layer plan {config.layer_plan}")

train_config = TrainConfig(
    batch_size=8,
    lr=3e-3,
    max_epochs=40,
    early_stop_patience=40,
    seed=0,
    bleu_every=10,
)
result = train(model, examples, examples, train_config, src_vocab, tgt_vocab, OUT)

print("\nepoch  train_loss  valid_loss  valid_bleu      lr")
for row in result.history:
    bleu = f"{row.valid_bleu:.3f}" if row.valid_bleu is not None else "    -"
    print(
        f"{row.epoch:>5}  {row.train_loss:>10.4f}  {row.valid_loss:>10.4f}  "
        f"{bleu:>10}  {row.lr:.2e}"
    )

print(f"\nbest epoch {result.best_epoch} (valid loss {result.best_metric:.4f})")
print(f"artifacts in {OUT}/: " + ", ".join(sorted(p.name for p in OUT.iterdir())))
