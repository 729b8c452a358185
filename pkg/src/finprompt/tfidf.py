"""Small TF-IDF cosine similarity index over lowercased unigrams.

Used for exemplar selection and context retrieval. Deliberately tiny and
dependency-free so rankings are deterministic and hand-checkable: raw term
counts for TF, ln(N/df) for IDF, terms outside the index vocabulary ignored.
The index is built once over an immutable document list and is safe for
concurrent reads.
"""

from __future__ import annotations

import math
import re
from typing import Sequence

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercased, punctuation-stripped unigrams."""
    return _TOKEN_RE.findall(text.lower())


def _counts(tokens: Sequence[str]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for tok in tokens:
        counts[tok] = counts.get(tok, 0) + 1
    return counts


class TfidfIndex:
    def __init__(self, documents: Sequence[str]):
        self._n_docs = len(documents)
        doc_counts = [_counts(tokenize(doc)) for doc in documents]
        df: dict[str, int] = {}
        for counts in doc_counts:
            for term in counts:
                df[term] = df.get(term, 0) + 1
        self._idf = {term: math.log(self._n_docs / n) for term, n in df.items()}
        self._vectors = [self._vectorize(counts) for counts in doc_counts]
        self._norms = [math.sqrt(sum(w * w for w in vec.values())) for vec in self._vectors]

    def _vectorize(self, counts: dict[str, int]) -> dict[str, float]:
        return {
            term: count * self._idf[term]
            for term, count in counts.items()
            if term in self._idf and self._idf[term] > 0.0
        }

    def __len__(self) -> int:
        return self._n_docs

    def similarities(self, query: str) -> list[float]:
        """Cosine similarity of the query against every indexed document.

        A zero-norm side (all terms out of vocabulary, or shared by every
        document) yields similarity 0.0 rather than NaN.
        """
        qvec = self._vectorize(_counts(tokenize(query)))
        qnorm = math.sqrt(sum(w * w for w in qvec.values()))
        scores: list[float] = []
        for vec, norm in zip(self._vectors, self._norms):
            if qnorm == 0.0 or norm == 0.0:
                scores.append(0.0)
                continue
            dot = sum(weight * vec.get(term, 0.0) for term, weight in qvec.items())
            scores.append(dot / (qnorm * norm))
        return scores
