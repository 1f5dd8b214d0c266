"""Decode with the trained demo model, score the output, plot attention.

Reuses demo_runs/tiny from train_tiny_summarizer.py (training a fresh
model first if it is missing), compares greedy and beam decoding, runs
the three metrics with length buckets, and renders one encoder attention
head as an ASCII heatmap.
"""

import subprocess
import sys
from pathlib import Path

import numpy as np

from scriptsum import (
    BucketSpec,
    EvalPair,
    Vocabulary,
    build_vocab,
    corpus_report,
    encode_examples,
    load_dataset,
)
from scriptsum.data import toy_corpus_path
from scriptsum.tensor import no_grad
from scriptsum.training import load_model_from_dir

MODEL_DIR = Path("demo_runs") / "tiny"

if not MODEL_DIR.exists():
    print("no trained model yet; running train_tiny_summarizer.py first\n")
    script = Path(__file__).parent / "train_tiny_summarizer.py"
    subprocess.run([sys.executable, str(script)], check=True)

model, payload = load_model_from_dir(MODEL_DIR, which="best")
src_vocab = Vocabulary.load(MODEL_DIR / "src_vocab.json")
tgt_vocab = Vocabulary.load(MODEL_DIR / "tgt_vocab.json")

examples = load_dataset(toy_corpus_path())
split = encode_examples(examples, src_vocab, tgt_vocab)

print("greedy vs beam-5 on the first four training examples:")
pairs = []
with no_grad():
    for ex, enc in zip(examples, split):
        state = model.script_encoder(enc.src_ids, enc.bundle)
        greedy = tgt_vocab.decode(model.greedy_decode(state, max_len=20))
        beam = tgt_vocab.decode(model.beam_search(state, beam_size=5, max_len=20))
        pairs.append(EvalPair(candidate=beam, references=[list(ex.summary_tokens)]))
        if len(pairs) <= 4:
            print(f"  reference: {' '.join(ex.summary_tokens)}")
            print(f"  greedy   : {' '.join(greedy)}")
            print(f"  beam 5   : {' '.join(beam)}\n")

report = corpus_report(pairs, bucket_spec=BucketSpec((4, 6), key="reference_len"))
o = report.overall
print(f"train-set scores over {len(pairs)} examples:")
print(f"  BLEU-4 {o['bleu4']:.4f}  ROUGE-L {o['rouge_l']:.4f}  METEOR {o['meteor']:.4f}")
print("  by reference length:")
for b in report.buckets:
    mean = "-" if b["bleu4"] is None else f"{b['bleu4']:.4f}"
    print(f"    {b['label']:>5}: {b['count']:>2} example(s), BLEU {mean}")

# capture post-softmax attention for one example and draw head 0, layer 1
ex, enc = examples[0], split[0]
capture = []
with no_grad():
    model.script_encoder(enc.src_ids, enc.bundle, capture=capture)
head = capture[1 * model.config.n_heads + 0]
tokens = list(ex.code_tokens)
shades = " .:-=+*#%@"
print(f"\nencoder layer 1 head 0 for: {' '.join(tokens)}")
width = max(len(t) for t in tokens)
for tok, row in zip(tokens, head):
    cells = "".join(shades[min(int(v * (len(shades) - 1) / row.max()), len(shades) - 1)] for v in row)
    print(f"  {tok:>{width}} |{cells}|")
print(f"  (rows sum to {head.sum(axis=1).round(6).min()}..{head.sum(axis=1).round(6).max()})")
