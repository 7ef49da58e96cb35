"""Score secret candidates and draw the inspection sample.

A candidate scores higher when its characters are more diverse (population
standard deviation of the character code values) and when fewer of its
letter substrings are dictionary words. The two components are summed and
used as sampling weights.
"""

import heapq
import math
import random
import re
import statistics
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import BadConfidence, EmptyString, SampleTooLarge
from .extract import SecretCandidate

WEIGHT_FLOOR = 1e-9
DEFAULT_SAMPLE_SIZE = 300

_LETTER_RUNS = re.compile(r"[A-Za-z]+")
# camel-case split: runs of capitals keep together until a capital that
# starts a new lowercase word (APIKey -> API, Key)
_CAMEL_PARTS = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+")


@dataclass(frozen=True)
class RankScore:
    diversity: float
    words: float

    @property
    def total(self) -> float:
        return self.diversity + self.words


@dataclass(frozen=True)
class SampleSpec:
    sample_size: int = DEFAULT_SAMPLE_SIZE
    include_numeric_only: bool = True
    seed: int = 0


@lru_cache(maxsize=4)
def _load_words(path: str | None) -> frozenset[str]:
    if path is None:
        text = resources.files("apkleak.data").joinpath("wordlist.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def load_wordlist(path: str | Path | None = None) -> frozenset[str]:
    """Load the dictionary (one word per line, UTF-8); bundled list by default."""
    return _load_words(str(path) if path is not None else None)


def diversity_score(s: str) -> float:
    """Population standard deviation of the code values of all characters."""
    if not s:
        raise EmptyString("diversity_score needs a non-empty string")
    return statistics.pstdev(ord(c) for c in s)


def split_words(s: str) -> list[str]:
    """Split on non-letters, then on camel-case boundaries."""
    return [part for run in _LETTER_RUNS.findall(s) for part in _CAMEL_PARTS.findall(run)]


def word_score(s: str, dictionary: frozenset[str] | None = None) -> float:
    """Proportion of substrings that are not dictionary words, in [0, 1].

    Strings with no letter substrings at all (e.g. all digits) score 1.0.
    """
    if not s:
        raise EmptyString("word_score needs a non-empty string")
    words = dictionary if dictionary is not None else load_wordlist()
    parts = split_words(s)
    if not parts:
        return 1.0
    non_words = sum(1 for p in parts if p.lower() not in words)
    return non_words / len(parts)


def rank(candidate: SecretCandidate, dictionary: frozenset[str] | None = None) -> RankScore:
    return RankScore(
        diversity=diversity_score(candidate.value),
        words=word_score(candidate.value, dictionary),
    )


def margin_of_error(n: int, confidence: float = 0.95) -> float:
    """Worst-case (p=0.5) margin of error of a size-n sample of an
    unlimited population: z * sqrt(0.25 / n)."""
    if n < 1:
        raise ValueError("sample size must be >= 1")
    if not 0.0 < confidence < 1.0:
        raise BadConfidence(f"confidence must be in (0, 1), got {confidence}")
    z = statistics.NormalDist().inv_cdf((1.0 + confidence) / 2.0)
    return z * math.sqrt(0.25 / n)


def weighted_sample(
    ranked: list[tuple[SecretCandidate, RankScore]],
    spec: SampleSpec,
) -> list[SecretCandidate]:
    """Draw the inspection sample from scored candidates.

    sample_size candidates are drawn without replacement with probability
    proportional to their total score (clamped to a small positive floor
    so zero-scored candidates stay drawable), using seeded exponential
    keys. All numeric-only candidates are then unioned in when the spec
    asks for them. The result is deduplicated and sorted by
    (app, path, line).
    """
    if spec.sample_size > len(ranked):
        raise SampleTooLarge(
            f"sample_size {spec.sample_size} exceeds population {len(ranked)}"
        )
    rng = random.Random(spec.seed)
    keyed = []
    for index, (candidate, score) in enumerate(ranked):
        weight = max(score.total, WEIGHT_FLOOR)
        keyed.append((rng.random() ** (1.0 / weight), -index, candidate))
    top = heapq.nlargest(spec.sample_size, keyed)

    picked = [c for _, _, c in top]
    if spec.include_numeric_only:
        picked.extend(c for c, _ in ranked if c.numeric_only)

    unique = list(dict.fromkeys(picked))
    unique.sort(key=lambda c: (c.app, c.rel_path, c.line_number))
    return unique
