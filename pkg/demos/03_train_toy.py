# %% [markdown]
# # Training on the bundled toy corpus
#
# The toy corpus holds 20 short sentences with coordinated, overlapping and
# one-word entities. We train the small BiLSTM + biaffine + convolution model
# with task cross-entropy plus centroid triplet loss and stop once the train
# set is decoded perfectly. Expect one to two minutes on a laptop CPU.

# %%
import logging

from gridner import Dataset, MiningConfig, ModelConfig, TrainConfig, Vocab, compute_stats, train, violation_rate
from gridner.synthetic import load_toy_corpus

logging.basicConfig(level=logging.INFO, format="%(message)s")

sents = load_toy_corpus()
print(compute_stats(sents).to_dict())

# %%
ds = Dataset("toy", {"train": sents, "dev": sents})
vocab = Vocab.build(sents)
mcfg = ModelConfig(vocab_size=len(vocab), c=2 + len(ds.label_set))
mining = MiningConfig(strategy="ce", window=5, margin=1.0)
cfg = TrainConfig(max_epochs=200, early_stop_patience=200, batch_size=2, mining=mining, stop_at_f1=1.0)
params, hist = train(ds, mcfg, cfg, vocab)

# %%
print("best epoch", hist.best_epoch, "F1", hist.best_val_f1)
print("violation rate", hist.initial_violation_rate, "->", violation_rate(params, mcfg, vocab, sents, mining))
