"""Deterministic tweet-like corpus drawn from overlapping topic-word distributions.

Used when the real datasets are not available.  Each document mixes words
from one topic's pool with words from a shared background pool (Zipf
weighted), and some documents carry URLs, @mentions, hashtags, and
punctuation so the cleaning stage has something to do.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from itertools import accumulate
from pathlib import Path

from .corpus import KAGGLE_COLUMNS, ZHANG_COLUMNS, load_stopwords
from .numerics import SeededRng

_ONSETS = ["b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v",
           "w", "z", "br", "ch", "dr", "fl", "gr", "pl", "sh", "st", "tr", "th"]
_VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "oo", "ou"]
_CODAS = ["", "", "n", "r", "s", "t", "l", "m", "ck", "nd", "st"]
GOLD = ("negative", "neutral", "positive")
SYNTH_SEED = 2024


class _Weighted:
    def __init__(self, items, exponent=1.0):
        self.items = list(items)
        self.cum = list(accumulate(1.0 / (r + 1) ** exponent for r in range(len(self.items))))

    def draw(self, rng):
        return self.items[bisect_right(self.cum, rng.random() * self.cum[-1])]


def _pseudo_words(rng, count, taken):
    words = []
    while len(words) < count:
        syl = 1 + rng.randbelow(3)
        w = "".join(_ONSETS[rng.randbelow(len(_ONSETS))] + _VOWELS[rng.randbelow(len(_VOWELS))]
                    + _CODAS[rng.randbelow(len(_CODAS))] for _ in range(syl))
        if len(w) >= 3 and w not in taken:
            taken.add(w)
            words.append(w)
    return words


def topic_corpus(n_docs=5000, n_topics=3, seed=SYNTH_SEED, topic_words=120, shared_words=400,
                 overlap=30, topic_share=0.55, min_len=6, max_len=18, topic_weights=None):
    """Return ``(texts, topics)`` for a synthetic corpus.

    Every topic owns ``topic_words`` words, ``overlap`` of which it shares
    with the next topic; each token is a topic word with probability
    ``topic_share`` and a background word otherwise.
    """
    rng = SeededRng(seed)
    taken = set(load_stopwords())
    shared = _Weighted(_pseudo_words(rng, shared_words, taken), exponent=1.0)
    own = [_pseudo_words(rng, topic_words - overlap, taken) for _ in range(n_topics)]
    bridge = [_pseudo_words(rng, overlap, taken) for _ in range(n_topics)]
    pools = []
    for t in range(n_topics):
        words = own[t] + bridge[t] + bridge[(t - 1) % n_topics]
        rng.shuffle(words)
        pools.append(_Weighted(words, exponent=0.8))
    cum = list(accumulate(topic_weights)) if topic_weights is not None else None
    texts, topics = [], []
    for _ in range(n_docs):
        t = rng.randbelow(n_topics) if cum is None else bisect_right(cum, rng.random() * cum[-1])
        length = min_len + rng.randbelow(max_len - min_len + 1)
        toks = [pools[t].draw(rng) if rng.random() < topic_share else shared.draw(rng)
                for _ in range(length)]
        if rng.random() < 0.15:
            toks.insert(rng.randbelow(len(toks) + 1), "#" + pools[t].draw(rng))
        if rng.random() < 0.10:
            toks.insert(0, "@user" + str(rng.randbelow(1000)))
        if rng.random() < 0.10:
            toks.append("https://t.co/" + format(rng.next_u64() & 0xFFFFFF, "x"))
        if rng.random() < 0.3:
            toks[0] = toks[0].capitalize()
        if rng.random() < 0.3:
            toks[-1] += "!" if rng.random() < 0.5 else "..."
        texts.append(" ".join(toks))
        topics.append(t)
    return texts, topics


def write_dataset_csvs(out_dir, n_docs=5000, seed=SYNTH_SEED, zhang_share=0.02, **kw):
    """Write the synthetic corpus as a Zhang-schema and a Kaggle-schema CSV.

    Returns the two paths.  The gold label column carries a sentiment name
    derived from the generating topic.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    texts, topics = topic_corpus(n_docs, seed=seed, **kw)
    n_zhang = int(round(n_docs * zhang_share))
    zpath, kpath = out_dir / "zhang_synthetic.csv", out_dir / "kaggle_synthetic.csv"
    with open(zpath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ZHANG_COLUMNS)
        for i in range(n_zhang):
            w.writerow([i, f"s{i:05d}", texts[i], GOLD[topics[i] % 3]])
    with open(kpath, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KAGGLE_COLUMNS)
        for i in range(n_zhang, n_docs):
            w.writerow([f"k{i:06x}", texts[i], "", GOLD[topics[i] % 3]])
    return zpath, kpath
