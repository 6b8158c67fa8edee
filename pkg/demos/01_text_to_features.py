"""
From raw tweets to PCA features
===============================

Cleaning, de-duplication, TF-IDF and the truncated PCA that every
clustering step consumes.
"""

import numpy as np

from apsent.corpus import KAGGLE, RawRecord, clean_text, merge_dedupe
from apsent.features import build_vocabulary, fit_pca, pca_project, tfidf_transform
from apsent.synthetic import topic_corpus

# cleaning drops URLs and mentions, keeps hashtag words, strips punctuation
print(clean_text("Check https://t.co/x #ThankYouObama @bob!!"))
print(clean_text("I'm going to bed... Muhammad Ali!"))

# a small synthetic corpus stands in for the tweet datasets
texts, topics = topic_corpus(n_docs=600, seed=1)
print(texts[0])

records = [RawRecord(str(i), t, KAGGLE) for i, t in enumerate(texts)]
corpus = merge_dedupe([], records)
print(len(corpus), "documents kept,", corpus.duplicates, "duplicates,", corpus.dropped_empty, "empty")

vocab = build_vocabulary(corpus)
X = tfidf_transform(corpus, vocab)
print("tfidf", X.shape, "nnz", X.nnz)

# rows are unit length
print(np.allclose(np.sqrt(X.multiply(X).sum(axis=1)), 1.0))

model = fit_pca(X, k=20, seed=0)
Z = pca_project(model, X)
print("pca", Z.shape)
print("explained variance ratio, first five:", np.round(model.explained_variance_ratio[:5], 4))
print("total captured by 20 components:", round(float(model.explained_variance_ratio.sum()), 4))
