# %% [markdown]
# # Triplet candidates and mining on the grid
#
# Grid coordinates are augmented: row/column 0 is [POS], 1 is [NEG], and
# token t sits at t + 2. Anchors are cells inside some entity; positives
# share an entity with the anchor; negatives do not.

# %%
import numpy as np

from gridner import Entity, MiningConfig, Sentence, build_candidates, mine, triplet_loss

s = Sentence("joint pain in knees and hips".split(),
             [Entity((0, 1, 2, 3), "ADR"), Entity((0, 1, 2, 5), "ADR")])

cands = {c.anchor: c for c in build_candidates(s, window=3)}
cs = cands[(2, 4)]  # ("joint", "in")
print("positives:", cs.positives)
print("negatives:", cs.negatives)

# %% [markdown]
# A one-word entity anchors at (token, [POS]) and, lacking other positives,
# pairs with the ([POS], [POS]) cell.

# %%
one = Sentence("Insomnia was constant .".split(), [Entity((0,), "ADR")])
print(build_candidates(one)[0].to_dict()["positives"])

# %% [markdown]
# The four strategies pick different negatives for the same features.

# %%
rng = np.random.default_rng(0)
feats = rng.normal(size=(8, 8, 4))
cand_list = build_candidates(s, window=3, unique_pairs=True)
for strategy in ("hn", "sn", "ce", "nc"):
    cfg = MiningConfig(strategy=strategy, margin=1.0)
    triplets = mine(cand_list, feats, cfg)
    res = triplet_loss(triplets, cfg.margin)
    print(f"{strategy}: {len(triplets):3d} triplets, loss {res.value:.3f}, violations {res.violations}")
