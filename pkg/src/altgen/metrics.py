"""Validation mathematics: cosine similarity, sentence BLEU with brevity
penalty, error reduction rate, and corpus-level aggregation.

One canonical tokenizer serves BLEU and the stub embedder: split on Unicode
whitespace, strip leading/trailing punctuation, lowercase, drop empties.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

from altgen.errors import AltgenError


class MetricError(AltgenError):
    pass


class ZeroVector(MetricError):
    pass


class LengthMismatch(MetricError):
    """Vector lengths disagree, or a backend returned the wrong count."""


class EmptyCandidate(MetricError):
    pass


class NoReferences(MetricError):
    pass


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    """Canonical tokenizer shared by BLEU and the stub embedder."""
    tokens = []
    for raw in text.split():
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        token = raw[start:end].lower()
        if token:
            tokens.append(token)
    return tokens


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """(a.b)/(|a||b|), clamped to [-1, 1].

    Raises LengthMismatch and ZeroVector; non-finite inputs are rejected.
    """
    if len(a) != len(b):
        raise LengthMismatch(f"vector lengths {len(a)} vs {len(b)}")
    for v in (a, b):
        for x in v:
            if not math.isfinite(x):
                raise ValueError("vectors must contain only finite values")
    dot = math.fsum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(math.fsum(x * x for x in a))
    norm_b = math.sqrt(math.fsum(y * y for y in b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine undefined for an all-zero vector")
    return max(-1.0, min(1.0, dot / (norm_a * norm_b)))


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidate: Sequence[str],
    references: Sequence[Sequence[str]],
    max_n: int = 4,
    smoothing: bool = False,
) -> float:
    """Sentence BLEU with clipped n-gram precisions and brevity penalty.

    Uniform weights over n-gram levels; levels where the candidate has no
    n-grams at all (candidate shorter than n) are excluded so that
    bleu(c, [c]) == 1 holds for any non-empty c. Without smoothing, any
    zero precision makes the score 0. With smoothing, every level gets
    add-one in numerator and denominator.

    Raises EmptyCandidate and NoReferences.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    cand = list(candidate)
    refs = [list(r) for r in references]
    if not cand:
        raise EmptyCandidate("candidate has no tokens")
    if not refs or all(not r for r in refs):
        raise NoReferences("need at least one non-empty reference")

    log_precisions: list[float] = []
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(cand, n)
        total = sum(cand_counts.values())
        if total == 0:
            continue
        ref_counts = [_ngram_counts(r, n) for r in refs]
        clipped = 0
        for gram, count in cand_counts.items():
            best = max(rc[gram] for rc in ref_counts)
            clipped += min(count, best)
        if smoothing:
            p = (clipped + 1) / (total + 1)
        else:
            if clipped == 0:
                return 0.0
            p = clipped / total
        log_precisions.append(math.log(p))

    weight = 1.0 / len(log_precisions)
    geo_mean = math.exp(math.fsum(weight * lp for lp in log_precisions))

    c = len(cand)
    r = min((len(ref) for ref in refs), key=lambda rl: (abs(rl - c), rl))
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return min(1.0, bp * geo_mean)


def error_reduction_rate(pre_errors: int, post_errors: int) -> tuple[float, bool]:
    """100 * (pre - post) / pre as (value, no_baseline).

    pre == 0 is defined as 0.0 with the no-baseline flag set.
    """
    if pre_errors < 0 or post_errors < 0:
        raise ValueError("error counts must be non-negative")
    if pre_errors == 0:
        return 0.0, True
    return 100.0 * (pre_errors - post_errors) / pre_errors, False


@dataclass
class MetricReport:
    cosine: float | None = None
    bleu: float | None = None
    err_percent: float | None = None
    no_baseline: bool = False
    seconds_per_file: float | None = None
    n_files: int = 0
    n_pairs: int = 0
    embed_failures: int = 0
    bleu_failures: int = 0
    missing_references: int = 0

    def to_dict(self) -> dict:
        return {
            "cosine": self.cosine,
            "bleu": self.bleu,
            "err_percent": self.err_percent,
            "no_baseline": self.no_baseline,
            "seconds_per_file": self.seconds_per_file,
            "n_files": self.n_files,
            "n_pairs": self.n_pairs,
            "embed_failures": self.embed_failures,
            "bleu_failures": self.bleu_failures,
            "missing_references": self.missing_references,
        }


def corpus_metrics(
    pairs: Sequence[tuple[str, str]],
    embedder: Callable[[list[str]], list[Sequence[float]]],
    timings: Sequence[float] = (),
    *,
    bleu_max_n: int = 4,
    smoothing: bool = False,
) -> MetricReport:
    """Mean cosine and sentence BLEU over (candidate, reference) text pairs.

    A pair whose embedding or scoring fails is excluded from that metric's
    mean and counted in the report. err_percent is left unset; the pipeline
    fills it from stored audit reports.
    """
    if not pairs:
        raise ValueError("pairs must be non-empty")
    cosines: list[float] = []
    bleus: list[float] = []
    embed_failures = 0
    bleu_failures = 0
    for candidate, reference in pairs:
        try:
            vectors = embedder([candidate, reference])
            if len(vectors) != 2:
                raise LengthMismatch(f"embedder returned {len(vectors)} vectors for 2 texts")
            cosines.append(cosine_similarity(vectors[0], vectors[1]))
        except AltgenError:
            embed_failures += 1
        try:
            bleus.append(
                bleu(tokenize(candidate), [tokenize(reference)], bleu_max_n, smoothing)
            )
        except MetricError:
            bleu_failures += 1
    return MetricReport(
        cosine=math.fsum(cosines) / len(cosines) if cosines else None,
        bleu=math.fsum(bleus) / len(bleus) if bleus else None,
        seconds_per_file=math.fsum(timings) / len(timings) if timings else None,
        n_files=len(timings),
        n_pairs=len(pairs),
        embed_failures=embed_failures,
        bleu_failures=bleu_failures,
    )
