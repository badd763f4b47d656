"""Brute-force metric reference: plain loops over the pairs, no numpy."""


def brute_force(truths, preds, k=4):
    n = len(truths)
    acc = sum(t == p for t, p in zip(truths, preds)) / n
    per = []
    for c in range(k):
        tp = sum(1 for t, p in zip(truths, preds) if t == c and p == c)
        fp = sum(1 for t, p in zip(truths, preds) if t != c and p == c)
        fn = sum(1 for t, p in zip(truths, preds) if t == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per.append((prec, rec, f1))
    present = sorted(set(truths) | set(preds))
    macro = tuple(sum(per[c][i] for c in present) / len(present) for i in range(3))
    return acc, per, macro
