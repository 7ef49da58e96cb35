"""Extract keyword-named string literals (secret candidates) from scan units.

A line produces a candidate when it defines an identifier containing one
of the configured keywords with a quoted string literal at least
min_literal_length characters long.
"""

import logging
import re
from dataclasses import dataclass, replace
from typing import Iterable

from .ingest import DEX_STRING_POOL, SMALI_TEXT, ScanUnit

logger = logging.getLogger(__name__)

DEFAULT_KEYWORDS = frozenset({
    "key", "secret", "token", "password", "passwd", "pwd", "auth",
    "credential", "api_key", "apikey", "private", "signature", "cert",
})

DEFAULT_MIN_LITERAL_LENGTH = 11


@dataclass(frozen=True)
class KeywordConfig:
    keywords: frozenset[str] = DEFAULT_KEYWORDS
    min_literal_length: int = DEFAULT_MIN_LITERAL_LENGTH
    case_insensitive: bool = True

    def __post_init__(self):
        if not self.keywords:
            raise ValueError("keyword set must be non-empty")
        if any(len(k) < 2 for k in self.keywords):
            raise ValueError("keywords must be at least 2 characters")
        if self.min_literal_length < 1:
            raise ValueError("min_literal_length must be >= 1")

    def name_matches(self, name: str) -> bool:
        probe = name.lower() if self.case_insensitive else name
        return any(k in probe for k in self.keywords)


@dataclass(frozen=True)
class SecretCandidate:
    value: str
    variable_name: str
    app: str  # package id
    dataset_tag: str
    rel_path: str
    line_number: int
    numeric_only: bool = False

    def to_record(self) -> dict:
        return {
            "app": self.app,
            "dataset": self.dataset_tag,
            "path": self.rel_path,
            "line": self.line_number,
            "var": self.variable_name,
            "value": self.value,
            "numeric_only": self.numeric_only,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SecretCandidate":
        return cls(
            value=rec["value"],
            variable_name=rec["var"],
            app=rec["app"],
            dataset_tag=rec["dataset"],
            rel_path=rec["path"],
            line_number=rec["line"],
            numeric_only=rec.get("numeric_only", False),
        )


_SIMPLE_ESCAPES = {
    "b": "\b", "f": "\f", "n": "\n", "r": "\r", "t": "\t",
    "\\": "\\", "'": "'", '"': '"', "0": "\0",
}

_ESCAPE_RE = re.compile(r"\\(u[0-9a-fA-F]{4}|.)")


def unescape_smali(literal: str) -> str:
    """Decode smali string escapes; unknown escapes pass through verbatim."""

    def _sub(match: re.Match) -> str:
        esc = match.group(1)
        if esc.startswith("u"):
            return chr(int(esc[1:], 16))
        if esc in _SIMPLE_ESCAPES:
            return _SIMPLE_ESCAPES[esc]
        logger.warning("unknown escape sequence \\%s left verbatim", esc)
        return "\\" + esc

    return _ESCAPE_RE.sub(_sub, literal)


_LITERAL = r'"(?P<lit>(?:[^"\\]|\\.)*)"'

# .field private static final GOOGLE_API_KEY:Ljava/lang/String; = "..."
_FIELD_RE = re.compile(
    r"^\s*\.field\s+(?:[a-z$]+\s+)*(?P<name>[A-Za-z_$][\w$]*)\s*:\s*[^\s=]+\s*=\s*"
    + _LITERAL
)

# const-string v0, "..."   (name attached by a following .local debug line)
_CONST_STRING_RE = re.compile(
    r"^\s*const-string(?:/jumbo)?\s+(?P<reg>[vp]\d+)\s*,\s*" + _LITERAL
)
_LOCAL_RE = re.compile(
    r"^\s*\.local\s+(?P<reg>[vp]\d+)\s*,\s*\"(?P<name>[^\"]+)\"\s*:"
)
_END_METHOD_RE = re.compile(r"^\s*\.end\s+method")

# <string name="api_key">...</string>
_XML_STRING_RE = re.compile(
    r"<string\s[^>]*name\s*=\s*\"(?P<name>[^\"]+)\"[^>]*>(?P<lit>[^<]*)</string>"
)
# android:name="..." ... android:value="..."  (manifest meta-data)
_XML_NAME_VALUE_RE = re.compile(
    r"name\s*=\s*\"(?P<name>[^\"]+)\"[^>]*\bvalue\s*=\s*\"(?P<lit>[^\"]*)\""
)
# "api_key": "..."  (json)  /  api_key = "..."  /  api_key=...  (properties)
_KV_QUOTED_RE = re.compile(
    r"[\"']?(?P<name>[A-Za-z_][\w.-]*)[\"']?\s*[:=]\s*" + _LITERAL
)
_KV_BARE_RE = re.compile(
    r"^\s*(?P<name>[A-Za-z_][\w.-]*)\s*=\s*(?P<lit>\S+)\s*$"
)

_IDENTIFIER_RE = re.compile(r"^[A-Za-z_$][\w$]*$")
_NUMERIC_RE = re.compile(r"^[0-9]+$")


def is_numeric_only(value: str) -> bool:
    return bool(_NUMERIC_RE.match(value))


def flag_numeric_only(candidate: SecretCandidate) -> SecretCandidate:
    return replace(candidate, numeric_only=is_numeric_only(candidate.value))


def _smali_definitions(lines) -> Iterable[tuple[str, str, int]]:
    """Yield (name, raw_literal, line_number) from smali text.

    Field initializers are matched directly. const-string registers count
    as definitions when a .local debug directive names the register later
    in the same method.
    """
    pending: dict[str, tuple[str, int]] = {}
    for number, text in lines:
        match = _FIELD_RE.match(text)
        if match:
            yield match.group("name"), match.group("lit"), number
            continue
        match = _CONST_STRING_RE.match(text)
        if match:
            pending[match.group("reg")] = (match.group("lit"), number)
            continue
        match = _LOCAL_RE.match(text)
        if match and match.group("reg") in pending:
            literal, at = pending.pop(match.group("reg"))
            yield match.group("name"), literal, at
            continue
        if _END_METHOD_RE.match(text):
            pending.clear()


def _markup_definitions(lines) -> Iterable[tuple[str, str, int]]:
    for number, text in lines:
        for rx in (_XML_STRING_RE, _XML_NAME_VALUE_RE, _KV_QUOTED_RE):
            for match in rx.finditer(text):
                yield match.group("name"), match.group("lit"), number
        match = _KV_BARE_RE.match(text)
        if match and not match.group("lit").startswith('"'):
            yield match.group("name"), match.group("lit"), number


def _pool_definitions(lines, config: KeywordConfig) -> Iterable[tuple[str, str, int]]:
    """Name/value adjacency heuristic for dex string pools.

    A pool string becomes a candidate when a nearby entry (index distance
    at most 2) looks like an identifier containing a keyword; dex
    interleaves field-name strings with value strings.
    """
    entries = [text for _, text in lines]
    for i, value in enumerate(entries):
        if len(value) < config.min_literal_length:
            continue
        for j in range(max(0, i - 2), min(len(entries), i + 3)):
            if j == i:
                continue
            neighbor = entries[j]
            if _IDENTIFIER_RE.match(neighbor) and config.name_matches(neighbor):
                yield neighbor, value, i + 1
                break


def extract_candidates(
    unit: ScanUnit,
    config: KeywordConfig | None = None,
    dex_adjacency: bool = False,
) -> list[SecretCandidate]:
    """Apply the keyword/length filter to one scan unit, in line order."""
    config = config or KeywordConfig()
    candidates: list[SecretCandidate] = []

    if unit.kind == DEX_STRING_POOL:
        if not dex_adjacency:
            return []
        found = _pool_definitions(unit.lines, config)
        for name, value, number in found:
            if len(value) >= config.min_literal_length:
                candidates.append(_make(unit, name, value, number))
        return candidates

    if unit.kind == SMALI_TEXT:
        definitions = _smali_definitions(unit.lines)
        decode = unescape_smali
    else:
        definitions = _markup_definitions(unit.lines)
        decode = lambda s: s  # noqa: E731 - markup values carry no smali escapes

    for name, raw, number in definitions:
        if not config.name_matches(name):
            continue
        value = decode(raw)
        if len(value) < config.min_literal_length:
            continue
        candidates.append(_make(unit, name, value, number))
    candidates.sort(key=lambda c: c.line_number)
    return candidates


def _make(unit: ScanUnit, name: str, value: str, number: int) -> SecretCandidate:
    return SecretCandidate(
        value=value,
        variable_name=name,
        app=unit.app.package_id,
        dataset_tag=unit.app.dataset_tag,
        rel_path=unit.rel_path,
        line_number=number,
        numeric_only=is_numeric_only(value),
    )
