# %% [markdown]
# # Word-pair grid tagging
#
# Each sentence becomes an n x n grid. NNW cells (upper triangle) link a
# word to the next word of the same entity; a THW cell at (tail, head) closes
# an entity and carries its label. Decoding walks every NNW path from a head
# to a tail that has a matching THW cell.

# %%
import numpy as np

from gridner import Entity, Sentence, decode, encode

tokens = "Pain and cramping in my hands and lower legs .".split()
gold = [
    Entity((0, 3, 4, 5), "ADR"),
    Entity((0, 3, 4, 7, 8), "ADR"),
    Entity((2, 3, 4, 5), "ADR"),
    Entity((2, 3, 4, 7, 8), "ADR"),
]
s = Sentence(tokens, gold)

grid = encode(s, ["ADR"])
for cell, tag in sorted(grid.nonzero().items()):
    print(cell, tokens[cell[0]], "->", tokens[cell[1]], tag)

# %% [markdown]
# Four overlapping entities share the "in my" core, so the grid stores
# them in only a handful of cells.

# %%
print(np.count_nonzero(grid.cells), "non-empty cells for", len(gold), "entities")
for e in decode(grid):
    print(e.indices, " ".join(tokens[i] for i in e.indices))

# %% [markdown]
# Some overlap patterns are ambiguous: the grid cannot tell which head
# belongs to which path, and decoding returns extra entities.

# %%
amb = Sentence(list("abcd"), [Entity((0, 1, 3), "X"), Entity((1, 2, 3), "X")])
print([e.indices for e in decode(encode(amb, ["X"]))])
