"""
Text-generation metrics for single-reference hint-text evaluation:
exact match, BLEU@1-4, METEOR (exact + stem stages), ROUGE-L and CIDEr.

Every score lies in [0, 1]. CIDEr is not scaled by 10 and has no length penalty.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import pandas as pd
from nltk.stem.porter import PorterStemmer

from .errors import EmptyCorpus, LengthMismatch

METRIC_COLUMNS = ["exact_match", "bleu1", "bleu2", "bleu3", "bleu4", "meteor", "rouge_l", "cider"]

_TOKEN_RE = re.compile(r"[^\W_]+")
_stemmer = PorterStemmer()


@dataclass(frozen=True)
class MetricConfig:
    bleu_orders: tuple[int, ...] = (1, 2, 3, 4)
    rouge_beta: float = 1.2
    meteor_alpha: float = 0.9          # F_mean = PR / (alpha*P + (1-alpha)*R) = 10PR/(R+9P)
    meteor_gamma: float = 0.5
    meteor_beta: float = 3.0
    cider_orders: tuple[int, ...] = (1, 2, 3, 4)

    def __post_init__(self):
        if not self.bleu_orders or min(self.bleu_orders) < 1 or not self.cider_orders or min(self.cider_orders) < 1:
            raise ValueError("n-gram orders must be positive")
        if min(self.rouge_beta, self.meteor_gamma, self.meteor_beta) <= 0 or not 0 < self.meteor_alpha < 1:
            raise ValueError("Metric parameters must be positive")


DEFAULT_CONFIG = MetricConfig()


@dataclass
class MetricReport:
    per_pair: pd.DataFrame
    means: dict[str, float]
    by_category: pd.DataFrame | None = field(default=None)

    def to_frame(self) -> pd.DataFrame:
        return self.per_pair.copy()

    def to_dict(self) -> dict:
        report = {
            "pairs": len(self.per_pair),
            "means": {name: float(self.means[name]) for name in METRIC_COLUMNS},
            "per_pair": self.per_pair[METRIC_COLUMNS].to_dict(orient="records"),
        }
        if self.by_category is not None:
            report["by_category"] = {
                category: {name: float(value) for name, value in row.items()}
                for category, row in self.by_category.iterrows()
            }
        return report


def tokenize(text: str) -> list[str]:
    """Lowercase; split on anything that is not a letter or digit."""
    return _TOKEN_RE.findall(text.lower())


def normalize(text: str) -> str:
    return " ".join(text.lower().split())


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def exact_match(candidate: str, reference: str) -> int:
    return int(normalize(candidate) == normalize(reference))


def _bleu_tokens(cand: list[str], ref: list[str], n: int) -> float:
    if not cand:
        return 0.0
    log_sum = 0.0
    for order in range(1, n + 1):
        cand_counts = ngrams(cand, order)
        total = sum(cand_counts.values())
        if total == 0:
            return 0.0
        ref_counts = ngrams(ref, order)
        clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        if clipped == 0:
            return 0.0
        log_sum += math.log(clipped / total)
    brevity = min(1.0, math.exp(1 - len(ref) / len(cand)))
    return brevity * math.exp(log_sum / n)


def bleu(candidate: str, reference: str, n: int) -> float:
    """
    Sentence BLEU@n without smoothing: geometric mean of clipped 1..n-gram
    precisions times min(1, exp(1 - r/c)). Any zero precision gives 0.
    """
    if not 1 <= n <= 4:
        raise ValueError(f"BLEU order must be within 1..4, got {n}")
    return _bleu_tokens(tokenize(candidate), tokenize(reference), n)


@lru_cache(maxsize=8192)
def _stem(token: str) -> str:
    return _stemmer.stem(token)


def _align(cand: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """
    Unigram alignment: exact matches first, then stem matches among the rest.
    Each stage pairs candidate tokens left to right with the leftmost free
    reference token.
    """
    ref_used = [False] * len(ref)
    cand_used = [False] * len(cand)
    pairs = []
    for key in (lambda token: token, _stem):
        ref_keys = [key(token) for token in ref]
        for i, token in enumerate(cand):
            if cand_used[i]:
                continue
            wanted = key(token)
            for j, ref_key in enumerate(ref_keys):
                if not ref_used[j] and ref_key == wanted:
                    ref_used[j] = cand_used[i] = True
                    pairs.append((i, j))
                    break
    return sorted(pairs)


def _chunks(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    previous = None
    for i, j in pairs:
        if previous is None or i != previous[0] + 1 or j != previous[1] + 1:
            chunks += 1
        previous = (i, j)
    return chunks


def meteor(candidate: str, reference: str, config: MetricConfig = DEFAULT_CONFIG) -> float:
    """
    METEOR with exact and Porter-stem matching (no synonym stage).
    F_mean = PR / (alpha*P + (1-alpha)*R); penalty = gamma * (chunks/matches)^beta.
    """
    cand, ref = tokenize(candidate), tokenize(reference)
    pairs = _align(cand, ref)
    matches = len(pairs)
    if matches == 0:
        return 0.0
    precision = matches / len(cand)
    recall = matches / len(ref)
    alpha = config.meteor_alpha
    f_mean = precision * recall / (alpha * precision + (1 - alpha) * recall)
    penalty = config.meteor_gamma * (_chunks(pairs) / matches) ** config.meteor_beta
    return f_mean * (1 - penalty)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: str, reference: str, config: MetricConfig = DEFAULT_CONFIG) -> float:
    cand, ref = tokenize(candidate), tokenize(reference)
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    beta_sq = config.rouge_beta ** 2
    return (1 + beta_sq) * precision * recall / (recall + beta_sq * precision)


def _weighted(counts: Counter, idf: dict, document_count: int, use_idf: bool) -> dict:
    if not use_idf:
        return dict(counts)
    default_idf = math.log(document_count)  # n-grams absent from every reference
    return {gram: count * idf.get(gram, default_idf) for gram, count in counts.items()}


def _cosine(a: dict, b: dict) -> float:
    dot = sum(weight * b.get(gram, 0.0) for gram, weight in a.items())
    norm = math.sqrt(sum(w * w for w in a.values())) * math.sqrt(sum(w * w for w in b.values()))
    if norm == 0.0:
        return 0.0
    return min(1.0, max(0.0, dot / norm))


def cider(candidates: Sequence[str], references: Sequence[str],
          config: MetricConfig = DEFAULT_CONFIG) -> tuple[list[float], float]:
    """
    TF-IDF n-gram cosine averaged over orders, with document frequencies from the
    reference corpus and idf = log(N/df). Orders for which the reference has no
    n-grams are left out of a pair's average. When every reference n-gram of an
    order has zero idf (N = 1, or n-grams shared by all references) that order
    falls back to plain term-frequency vectors.

    Returns:
        tuple[list[float], float]: Per-pair scores and their mean.

    Raises:
        LengthMismatch: If the lists differ in length.
        EmptyCorpus: If the lists are empty.
    """
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates but {len(references)} references")
    if not candidates:
        raise EmptyCorpus("CIDEr needs at least one pair")

    cand_tokens = [tokenize(text) for text in candidates]
    ref_tokens = [tokenize(text) for text in references]
    document_count = len(references)
    totals = [0.0] * document_count
    orders_used = [0] * document_count

    for n in config.cider_orders:
        ref_counts = [ngrams(tokens, n) for tokens in ref_tokens]
        cand_counts = [ngrams(tokens, n) for tokens in cand_tokens]
        document_frequency = Counter(gram for counts in ref_counts for gram in counts)
        idf = {gram: math.log(document_count / df) for gram, df in document_frequency.items()}
        use_idf = any(weight > 0 for weight in idf.values())
        for index in range(document_count):
            if not ref_counts[index]:
                continue
            orders_used[index] += 1
            totals[index] += _cosine(_weighted(cand_counts[index], idf, document_count, use_idf),
                                     _weighted(ref_counts[index], idf, document_count, use_idf))

    scores = [total / used if used else 0.0 for total, used in zip(totals, orders_used)]
    return scores, sum(scores) / len(scores)


def evaluate_corpus(pairs: Sequence[tuple[str, str]], categories: Sequence[str] | None = None,
                    config: MetricConfig = DEFAULT_CONFIG) -> MetricReport:
    """
    Scores every (candidate, reference) pair and averages each metric.
    Per-category means are added when `categories` is given (one per pair).
    """
    if not pairs:
        raise EmptyCorpus("No pairs to evaluate")
    if categories is not None and len(categories) != len(pairs):
        raise LengthMismatch(f"{len(categories)} categories for {len(pairs)} pairs")

    candidates = [candidate for candidate, _ in pairs]
    references = [reference for _, reference in pairs]
    cider_scores, _ = cider(candidates, references, config)

    rows = []
    for (candidate, reference), cider_score in zip(pairs, cider_scores):
        row = {"candidate": candidate, "reference": reference,
               "exact_match": float(exact_match(candidate, reference))}
        for n in (1, 2, 3, 4):
            row[f"bleu{n}"] = bleu(candidate, reference, n)
        row["meteor"] = meteor(candidate, reference, config)
        row["rouge_l"] = rouge_l(candidate, reference, config)
        row["cider"] = cider_score
        rows.append(row)

    per_pair = pd.DataFrame(rows, columns=["candidate", "reference", *METRIC_COLUMNS])
    means = {name: float(per_pair[name].mean()) for name in METRIC_COLUMNS}
    by_category = None
    if categories is not None:
        per_pair["category"] = list(categories)
        by_category = per_pair.groupby("category", sort=True)[METRIC_COLUMNS].mean()
    return MetricReport(per_pair=per_pair, means=means, by_category=by_category)
