"""Detect service-specific credentials in scan units.

Single-factor services (the Alphabet API-key family and FCM) are matched
by regex alone. Multi-factor OAuth services (Twitter, Facebook) have far
noisier patterns, so a seed additionally requires a keyword-bearing
variable name and a service-name hint in the variable name or file path;
once a file holds a seed, its missing counterpart role is searched in
that same file by regex only, and IDs are paired with secrets only within
one app.
"""

import hashlib
import json
import re
from collections.abc import Iterable
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .errors import CrossAppPairing, RedactionTooWide
from .extract import KeywordConfig, _markup_definitions, _smali_definitions, unescape_smali
from .ingest import SMALI_TEXT, AppArtifact, ScanUnit

GOOGLE_FAMILY = ("google_maps", "google_translation", "google_cloud_vision", "youtube")
MULTI_FACTOR_SERVICES = ("twitter", "facebook")

SINGLE_KEY = "single_key"
SERVER_KEY = "server_key"
CLIENT_ID = "client_id"
CLIENT_SECRET = "client_secret"

# role words accepted by the seed keyword condition in addition to the
# configured keywords; an ID factor is conventionally named "...id"
_ROLE_WORDS = {CLIENT_ID: "id", CLIENT_SECRET: "secret"}

DEFAULT_REDACT_PREFIX = 4


@dataclass(frozen=True)
class ServicePattern:
    service_id: str
    factor_role: str
    pattern: str
    boundary_class: str
    name_hints: frozenset[str] = frozenset()

    def compiled(self) -> re.Pattern:
        return _compile_bounded(self.pattern, self.boundary_class)

    def full(self) -> re.Pattern:
        return re.compile(f"(?:{self.pattern})\\Z")


@lru_cache(maxsize=256)
def _compile_bounded(pattern: str, boundary_class: str) -> re.Pattern:
    # a match may not be flanked by a character of its own class
    return re.compile(f"(?<!{boundary_class})(?:{pattern})(?!{boundary_class})")


@dataclass(frozen=True, slots=True)
class Factor:
    value: str
    rel_path: str
    line_number: int


@dataclass(frozen=True, slots=True)
class FactorHit:
    role: str
    factor: Factor
    app: str  # package id


@dataclass(frozen=True, slots=True)
class DetectedCredential:
    service_id: str
    factors: tuple[tuple[str, Factor], ...]  # (role, factor), sorted by role
    app: str  # package id
    dataset_tag: str

    def factor(self, role: str) -> Factor:
        for r, f in self.factors:
            if r == role:
                return f
        raise KeyError(role)

    def values(self) -> tuple[str, ...]:
        return tuple(f.value for _, f in self.factors)

    def fingerprint(self) -> str:
        return credential_fingerprint(
            self.service_id, [(role, f.value) for role, f in self.factors]
        )

    def to_record(self, redacted: bool = True) -> dict:
        return {
            "service": self.service_id,
            "app": self.app,
            "dataset": self.dataset_tag,
            "redacted": redacted,
            "factors": {
                role: {
                    "value": redact(f.value) if redacted else f.value,
                    "path": f.rel_path,
                    "line": f.line_number,
                }
                for role, f in self.factors
            },
        }

    @classmethod
    def from_record(cls, rec: dict) -> "DetectedCredential":
        factors = tuple(
            sorted(
                (role, Factor(v["value"], v["path"], v["line"]))
                for role, v in rec["factors"].items()
            )
        )
        return cls(
            service_id=rec["service"],
            factors=factors,
            app=rec["app"],
            dataset_tag=rec["dataset"],
        )


def credential_fingerprint(service_id: str, role_value_pairs) -> str:
    """Non-reversible join key for (service, factor values); lets redacted
    outcome and report rows reference a credential without exposing it."""
    payload = json.dumps(
        [service_id, sorted([role, value] for role, value in role_value_pairs)],
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def make_credential(
    service_id: str, app: AppArtifact, factors: dict[str, Factor]
) -> DetectedCredential:
    return DetectedCredential(
        service_id=service_id,
        factors=tuple(sorted(factors.items())),
        app=app.package_id,
        dataset_tag=app.dataset_tag,
    )


@lru_cache(maxsize=4)
def _load_patterns(path: str | None) -> tuple[ServicePattern, ...]:
    if path is None:
        text = resources.files("apkleak.data").joinpath("service_patterns.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    raw = json.loads(text)
    patterns = []
    for entry in raw["patterns"]:
        pat = ServicePattern(
            service_id=entry["service_id"],
            factor_role=entry["factor_role"],
            pattern=entry["pattern"],
            boundary_class=entry["boundary_class"],
            name_hints=frozenset(entry.get("name_hints", ())),
        )
        pat.compiled()  # patterns must compile at load time
        patterns.append(pat)
    return tuple(patterns)


def load_service_patterns(path: str | Path | None = None) -> tuple[ServicePattern, ...]:
    return _load_patterns(str(path) if path is not None else None)


def redact(value: str, keep_prefix: int = DEFAULT_REDACT_PREFIX, keep_suffix: int = 0) -> str:
    """Mask a secret as prefix + "***" + suffix; length is not recoverable."""
    if not value:
        raise RedactionTooWide("cannot redact an empty value")
    if keep_prefix < 0 or keep_suffix < 0:
        raise RedactionTooWide("keep widths must be non-negative")
    if keep_prefix + keep_suffix >= len(value):
        raise RedactionTooWide(
            f"keep_prefix + keep_suffix must be < {len(value)} for this value"
        )
    suffix = value[len(value) - keep_suffix:] if keep_suffix else ""
    return value[:keep_prefix] + "***" + suffix


def match_single_factor(
    unit: ScanUnit, patterns: Iterable[ServicePattern] | None = None
) -> list[DetectedCredential]:
    """Regex-match single-factor credentials in one unit.

    Matches are boundary-checked so a key inside a longer same-class blob
    is not reported. The shared Alphabet key pattern attributes each hit
    to all four services in the family; validation later disambiguates.
    """
    patterns = patterns if patterns is not None else load_service_patterns()
    single = [p for p in patterns if p.factor_role in (SINGLE_KEY, SERVER_KEY)]
    found: list[DetectedCredential] = []
    seen: set[tuple[str, str, int, str]] = set()
    for number, text in unit.lines:
        for pat in single:
            for match in pat.compiled().finditer(text):
                key = (pat.service_id, unit.rel_path, number, match.group(0))
                if key in seen:
                    continue
                seen.add(key)
                found.append(
                    make_credential(
                        pat.service_id,
                        unit.app,
                        {pat.factor_role: Factor(match.group(0), unit.rel_path, number)},
                    )
                )
    return found


def find_multi_factor_seeds(
    unit: ScanUnit,
    service: str,
    keywords: KeywordConfig | None = None,
    patterns: Iterable[ServicePattern] | None = None,
) -> list[tuple[str, str, int]]:
    """Find (factor_role, value, line) seeds for a multi-factor service.

    A seed needs all three conditions: the literal fully matches the
    role's pattern, the variable name carries a keyword (or the role word
    itself, e.g. "id"), and the variable name or file path carries a
    service-name hint.
    """
    if service not in MULTI_FACTOR_SERVICES:
        raise ValueError(f"{service} is not a multi-factor service")
    keywords = keywords or KeywordConfig()
    patterns = patterns if patterns is not None else load_service_patterns()
    rows = [p for p in patterns if p.service_id == service]

    if unit.kind == SMALI_TEXT:
        definitions = [
            (name, unescape_smali(raw), line)
            for name, raw, line in _smali_definitions(unit.lines)
        ]
    else:
        definitions = list(_markup_definitions(unit.lines))

    path_lower = unit.rel_path.lower()
    seeds = []
    for name, value, line in definitions:
        name_lower = name.lower()
        for pat in rows:
            if not pat.full().match(value):
                continue
            role_word = _ROLE_WORDS[pat.factor_role]
            if not (keywords.name_matches(name) or role_word in name_lower):
                continue
            if not any(h in name_lower or h in path_lower for h in pat.name_hints):
                continue
            seeds.append((pat.factor_role, value, line))
    seeds.sort(key=lambda s: (s[2], s[0]))
    return seeds


def counterpart_search(
    unit: ScanUnit,
    service: str,
    missing_role: str,
    patterns: Iterable[ServicePattern] | None = None,
) -> list[tuple[str, int]]:
    """Regex-only search for the missing factor role inside one file.

    Used after a seed was found in the same unit: the keyword and hint
    conditions are waived, only the boundary-checked pattern applies.
    """
    patterns = patterns if patterns is not None else load_service_patterns()
    rows = [
        p for p in patterns
        if p.service_id == service and p.factor_role == missing_role
    ]
    hits: list[tuple[str, int]] = []
    seen: set[tuple[str, int]] = set()
    for number, text in unit.lines:
        for pat in rows:
            for match in pat.compiled().finditer(text):
                item = (match.group(0), number)
                if item not in seen:
                    seen.add(item)
                    hits.append(item)
    return hits


def pair_credentials(
    service: str,
    ids: list[FactorHit],
    secrets: list[FactorHit],
    app: AppArtifact,
) -> list[DetectedCredential]:
    """Cartesian-pair client IDs with client secrets from one app."""
    for hit in list(ids) + list(secrets):
        if hit.app != app.package_id:
            raise CrossAppPairing(
                f"factor from {hit.app} cannot pair within {app.package_id}"
            )
    pairs = []
    for id_hit in ids:
        for secret_hit in secrets:
            pairs.append(
                make_credential(
                    service,
                    app,
                    {CLIENT_ID: id_hit.factor, CLIENT_SECRET: secret_hit.factor},
                )
            )
    pairs.sort(
        key=lambda c: (
            c.factor(CLIENT_ID).rel_path,
            c.factor(CLIENT_ID).line_number,
            c.factor(CLIENT_SECRET).rel_path,
            c.factor(CLIENT_SECRET).line_number,
        )
    )
    return pairs


def detect_app(
    units: Iterable[ScanUnit],
    app: AppArtifact,
    keywords: KeywordConfig | None = None,
    patterns: Iterable[ServicePattern] | None = None,
) -> list[DetectedCredential]:
    """Full detection pass over one app's units.

    Single-factor matches are collected per unit. For each multi-factor
    service, seeds and same-file counterparts are gathered across units,
    then paired app-wide.
    """
    patterns = tuple(patterns) if patterns is not None else load_service_patterns()
    keywords = keywords or KeywordConfig()
    detections: list[DetectedCredential] = []
    multi: dict[str, dict[str, list[FactorHit]]] = {
        s: {CLIENT_ID: [], CLIENT_SECRET: []} for s in MULTI_FACTOR_SERVICES
    }

    for unit in units:
        detections.extend(match_single_factor(unit, patterns))
        for service in MULTI_FACTOR_SERVICES:
            seeds = find_multi_factor_seeds(unit, service, keywords, patterns)
            if not seeds:
                continue
            by_role: dict[str, list[tuple[str, int]]] = {CLIENT_ID: [], CLIENT_SECRET: []}
            for role, value, line in seeds:
                by_role[role].append((value, line))
            for role, other in ((CLIENT_ID, CLIENT_SECRET), (CLIENT_SECRET, CLIENT_ID)):
                if by_role[role]:
                    by_role[other].extend(counterpart_search(unit, service, other, patterns))
            for role, values in by_role.items():
                bucket = multi[service][role]
                seen = {(h.factor.value, h.factor.rel_path, h.factor.line_number) for h in bucket}
                for value, line in values:
                    key = (value, unit.rel_path, line)
                    if key not in seen:
                        seen.add(key)
                        bucket.append(
                            FactorHit(role, Factor(value, unit.rel_path, line), app.package_id)
                        )

    for service in MULTI_FACTOR_SERVICES:
        detections.extend(
            pair_credentials(service, multi[service][CLIENT_ID], multi[service][CLIENT_SECRET], app)
        )
    return detections
