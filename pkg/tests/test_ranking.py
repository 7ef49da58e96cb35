"""Scoring oracles, margin of error, and weighted sampling behavior."""

import math
import random
import string

import pytest

from apkleak.errors import BadConfidence, EmptyString, SampleTooLarge
from apkleak.extract import SecretCandidate
from apkleak.ranking import (
    RankScore,
    SampleSpec,
    diversity_score,
    load_wordlist,
    margin_of_error,
    rank,
    split_words,
    weighted_sample,
    word_score,
)


def naive_pstdev(values: list[int]) -> float:
    """Two-pass population standard deviation, the reference arithmetic."""
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def reference_split(s: str) -> list[str]:
    """Character-walk splitter independent of the regex implementation."""
    fragments: list[str] = []
    current: list[str] = []
    for ch in s:
        if ch.isascii() and ch.isalpha():
            current.append(ch)
        elif current:
            fragments.append("".join(current))
            current = []
    if current:
        fragments.append("".join(current))

    parts: list[str] = []
    for frag in fragments:
        cur = frag[0]
        for i in range(1, len(frag)):
            prev, ch = frag[i - 1], frag[i]
            nxt = frag[i + 1] if i + 1 < len(frag) else ""
            if prev.islower() and ch.isupper():
                parts.append(cur)
                cur = ch
            elif prev.isupper() and ch.isupper() and nxt.islower():
                parts.append(cur)
                cur = ch
            else:
                cur += ch
        parts.append(cur)
    return parts


def candidate(value: str, numeric: bool = False, line: int = 1) -> SecretCandidate:
    return SecretCandidate(
        value=value,
        variable_name="SECRET_KEY",
        app="com.example.app",
        dataset_tag="2021",
        rel_path="Keys.smali",
        line_number=line,
        numeric_only=numeric,
    )


class TestDiversity:
    def test_constant_string_is_zero(self):
        assert diversity_score("aaaaaaaaaaa") == 0.0

    def test_ab_is_half(self):
        # code values 97, 98; mean 97.5; deviations +-0.5
        assert diversity_score("ab") == pytest.approx(0.5, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(EmptyString):
            diversity_score("")

    def test_matches_naive_two_pass(self):
        rng = random.Random(42)
        pool = string.ascii_letters + string.digits + "_-!@#$%"
        for _ in range(1000):
            s = "".join(rng.choice(pool) for _ in range(rng.randrange(1, 64)))
            expected = naive_pstdev([ord(c) for c in s])
            assert diversity_score(s) == pytest.approx(expected, abs=1e-9)

    def test_non_ascii_uses_code_points(self):
        s = "aé"  # 97, 233
        assert diversity_score(s) == pytest.approx(naive_pstdev([97, 233]), abs=1e-12)


class TestWordScore:
    def test_all_dictionary_words(self):
        assert word_score("MySecretKey") == 0.0

    def test_no_dictionary_words(self):
        assert word_score("Xz9qqqw") == 1.0

    def test_digits_only_is_one(self):
        assert word_score("1234567890123") == 1.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyString):
            word_score("")

    def test_camel_split_handles_acronym_runs(self):
        assert split_words("APIKey") == ["API", "Key"]
        assert split_words("my_secret2Key") == ["my", "secret", "Key"]

    def test_matches_reference_splitter_and_lookup(self):
        words = load_wordlist()
        rng = random.Random(99)
        vocab = ["My", "Secret", "Key", "token", "qqqw", "Xz", "value", "AIza", "backup"]
        strings = []
        for _ in range(500):
            n = rng.randrange(1, 5)
            sep = rng.choice(["", "_", "9", "-", ""])
            strings.append(sep.join(rng.choice(vocab) for _ in range(n)))
        for s in strings:
            parts = reference_split(s)
            if not parts:
                expected = 1.0
            else:
                expected = sum(1 for p in parts if p.lower() not in words) / len(parts)
            assert word_score(s) == expected, s


class TestRank:
    def test_composition(self):
        words = load_wordlist()
        assert "aaaaaaaaaaa" not in words
        score = rank(candidate("aaaaaaaaaaa"))
        assert score.diversity == 0.0
        assert score.words == 1.0
        assert score.total == 1.0

    def test_purity(self):
        a = rank(candidate("Zq7Xw2Lp9Rt"))
        b = rank(candidate("Zq7Xw2Lp9Rt", line=88))
        assert a == b

    def test_monotone_in_diversity(self):
        low = RankScore(diversity=0.5, words=0.7)
        high = RankScore(diversity=1.5, words=0.7)
        assert high.total > low.total


class TestMarginOfError:
    def test_paper_sample_size(self):
        assert margin_of_error(575, 0.95) == pytest.approx(0.0409, abs=0.0002)

    def test_hundred(self):
        # 1.959964 * sqrt(0.25 / 100)
        assert margin_of_error(100, 0.95) == pytest.approx(0.098, abs=0.001)

    def test_limit_behavior(self):
        assert margin_of_error(10_000_000, 0.95) < 0.001

    def test_bad_confidence(self):
        for conf in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(BadConfidence):
                margin_of_error(100, conf)

    def test_bad_n(self):
        with pytest.raises(ValueError):
            margin_of_error(0, 0.95)


class TestWeightedSample:
    def test_exhaustive_draw_returns_all(self):
        ranked = [
            (candidate("aaaaaaaaaaa", line=i), RankScore(float(i), 0.5))
            for i in range(3)
        ]
        out = weighted_sample(ranked, SampleSpec(sample_size=3, seed=1))
        assert sorted(c.line_number for c in out) == [0, 1, 2]

    def test_sample_too_large(self):
        ranked = [(candidate("x" * 11), RankScore(1.0, 1.0))]
        with pytest.raises(SampleTooLarge):
            weighted_sample(ranked, SampleSpec(sample_size=2, seed=1))

    def test_same_seed_same_sample(self):
        rng = random.Random(5)
        ranked = [
            (candidate("v" + str(i) * 10, line=i), RankScore(rng.random() * 3, rng.random()))
            for i in range(200)
        ]
        spec = SampleSpec(sample_size=40, seed=777)
        assert weighted_sample(ranked, spec) == weighted_sample(ranked, spec)

    def test_different_seed_differs(self):
        ranked = [
            (candidate("v" + str(i) * 10, line=i), RankScore(1.0, 0.0))
            for i in range(200)
        ]
        a = weighted_sample(ranked, SampleSpec(sample_size=20, seed=1))
        b = weighted_sample(ranked, SampleSpec(sample_size=20, seed=2))
        assert a != b

    def test_no_duplicates_and_bounded(self):
        ranked = [
            (candidate("w" + str(i) * 9, line=i), RankScore(float(i % 5), 0.2))
            for i in range(100)
        ]
        out = weighted_sample(ranked, SampleSpec(sample_size=50, seed=3))
        assert len(out) == len(set(out))
        assert len(out) <= 100

    def test_numeric_only_unioned_in(self):
        ranked = [
            (candidate("abcdefghijk" + str(i), line=i), RankScore(5.0, 1.0))
            for i in range(20)
        ]
        numeric = candidate("123456789012", numeric=True, line=99)
        ranked.append((numeric, RankScore(0.0, 1.0)))
        out = weighted_sample(ranked, SampleSpec(sample_size=3, seed=4))
        assert numeric in out
        skipped = weighted_sample(
            ranked, SampleSpec(sample_size=3, include_numeric_only=False, seed=4)
        )
        assert numeric not in skipped

    def test_zero_weight_still_drawable(self):
        ranked = [
            (candidate("z" * 11, line=i), RankScore(0.0, 0.0)) for i in range(5)
        ]
        out = weighted_sample(ranked, SampleSpec(sample_size=5, seed=9))
        assert len(out) == 5

    def test_output_sorted_by_app_path_line(self):
        ranked = [
            (candidate("s" * 11 + str(i), line=100 - i), RankScore(1.0, 1.0))
            for i in range(30)
        ]
        out = weighted_sample(ranked, SampleSpec(sample_size=30, seed=0))
        keys = [(c.app, c.rel_path, c.line_number) for c in out]
        assert keys == sorted(keys)

    def test_double_weight_drawn_twice_as_often(self):
        heavy = candidate("heavyvalue0", line=1)
        light = candidate("lightvalue0", line=2)
        ranked = [(heavy, RankScore(2.0, 0.0)), (light, RankScore(1.0, 0.0))]
        counts = {1: 0, 2: 0}
        for seed in range(2000):
            spec = SampleSpec(sample_size=1, include_numeric_only=False, seed=seed)
            pick = weighted_sample(ranked, spec)[0]
            counts[pick.line_number] += 1
        ratio = counts[1] / counts[2]
        assert 2.0 * 0.85 <= ratio <= 2.0 * 1.15
