"""Slow, literal reference implementations used as test oracles.

Everything here works on plain Python lists and floats so it shares no
code path with the vectorised library.
"""
import math

POS, NEG, OFF = 0, 1, 2


def _cells_of(indices):
    toks = [i + OFF for i in indices]
    if len(toks) == 1:
        return {(toks[0], POS)}
    return {(r, c) for r in toks for c in toks}


def _special(cell):
    return min(cell) < OFF


def _near(cell, anchor, window):
    if window is None or _special(cell):
        return True
    return abs(cell[0] - anchor[0]) <= window and abs(cell[1] - anchor[1]) <= window


def candidates(sentence, window, unique):
    """List of (anchor, positives, negatives) tuples in anchor order."""
    n = len(sentence.tokens)
    ents = [(set(i + OFF for i in e.indices), _cells_of(e.indices)) for e in sentence.entities]
    anchors = sorted(set().union(*(cells for _, cells in ents))) if ents else []
    grid = [(r, c) for r in range(OFF, n + OFF) for c in range(OFF, n + OFF)]
    seen = set()
    out = []
    for a in anchors:
        if unique and not _special(a) and a[0] > a[1]:
            continue
        mine = [e for e in ents if a in e[1]]
        pos = []
        for _, cells in mine:
            for p in cells:
                if p != a and p not in pos and _near(p, a, window):
                    pos.append(p)
        pos.sort()
        neg = []
        for cell in grid:
            if not _near(cell, a, window):
                continue
            inside = False
            for toks, _ in mine:
                if cell[0] in toks and cell[1] in toks:
                    inside = True
            if not inside:
                neg.append(cell)
        if not neg:
            neg = [(NEG, NEG)]
        if not pos:
            pos = [(POS, POS)]
        elif unique:
            pos = [p for p in pos if (_special(p) or p[0] <= p[1]) and (p, a) not in seen]
            if not pos:
                continue
        for p in pos:
            seen.add((a, p))
        out.append((a, pos, neg))
    return out


def dist(u, v):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(u, v)))


def mean(vectors):
    k = len(vectors)
    return [sum(col) / k for col in zip(*vectors)]


def mine(cands, feats, strategy, margin):
    """feats maps cell -> list of floats. Returns (key, a, p, n) tuples."""
    out = []
    for a, pos, neg in cands:
        av = feats[a]
        if strategy == "ce":
            out.append(((a, tuple(pos), tuple(neg)), av,
                        mean([feats[c] for c in pos]), mean([feats[c] for c in neg])))
            continue
        for p in pos:
            dap = dist(av, feats[p])
            if strategy == "nc":
                out.append(((a, (p,), tuple(neg)), av, feats[p], mean([feats[c] for c in neg])))
                continue
            best = None
            for c in neg:
                d = dist(av, feats[c])
                if strategy == "sn" and not (dap < d < dap + margin):
                    continue
                if best is None or d < best[0]:
                    best = (d, c)
            if best is not None:
                out.append(((a, (p,), (best[1],)), av, feats[p], feats[best[1]]))
    return out


def hinge_mean(triplets, margin):
    if not triplets:
        return 0.0
    total = 0.0
    for a, p, n in triplets:
        total += max(dist(a, p) - dist(a, n) + margin, 0.0)
    return total / len(triplets)


def cross_entropy_mean(logits, gold):
    """Per-cell softmax cross-entropy averaged over an n x n grid."""
    n = len(gold)
    total = 0.0
    for i in range(n):
        for j in range(n):
            z = list(logits[i][j])
            top = max(z)
            lse = top + math.log(sum(math.exp(v - top) for v in z))
            total += lse - z[gold[i][j]]
    return total / (n * n)
