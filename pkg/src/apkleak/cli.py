"""Command-line front end: scan | rank | sample | detect | validate | report.

Each stage reads its upstream JSONL artifact and writes the downstream
one, so any stage can be re-run in isolation and manual labels can be
spliced in between stages. All randomness is seed-controlled; offline is
the default posture and output values are redacted unless --unredacted is
given (which prints a standing ethics warning).

Exit codes: 0 success, 2 input error, 3 network failure during online
validation. Flags can also be set through APKLEAK_* environment
variables (e.g. APKLEAK_OUT, APKLEAK_SEED).
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .detect import DetectedCredential, detect_app, load_service_patterns
from .errors import ApkLeakError, InputError, NotAnApp, CorruptArchive
from .extract import (
    DEFAULT_MIN_LITERAL_LENGTH,
    KeywordConfig,
    SecretCandidate,
    extract_candidates,
)
from .ingest import enumerate_scan_units, open_app
from .jsonl import read_jsonl, write_jsonl
from .ranking import RankScore, SampleSpec, load_wordlist, rank, weighted_sample
from .report import DedupKey, build_report, write_report
from .validate import (
    FixtureTransport,
    ValidationPolicy,
    load_endpoint_templates,
    run_validation_batch,
)

logger = logging.getLogger(__name__)

ENV_PREFIX = "APKLEAK_"

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NETWORK = 3

ETHICS_WARNING = (
    "WARNING: --unredacted output contains live credential values. "
    "Handle as sensitive data; do not publish or commit it."
)


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def _env_flag(name: str) -> bool | None:
    raw = _env(name)
    if raw is None:
        return None
    return raw.strip().lower() in ("1", "true", "yes", "on")


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise InputError(f"config file not found: {p}")
    config = json.loads(p.read_text("utf-8"))
    for key in ("patterns_path", "endpoints_path", "wordlist_path"):
        if config.get(key) and not Path(config[key]).exists():
            raise InputError(f"config {key} does not exist: {config[key]}")
    for tag, root in config.get("datasets", {}).items():
        if not Path(root).exists():
            raise InputError(f"dataset root for {tag} does not exist: {root}")
    return config


def _keyword_config(args, config: dict) -> KeywordConfig:
    keywords = config.get("keywords")
    if getattr(args, "keywords", None):
        keywords = [k.strip() for k in args.keywords.split(",") if k.strip()]
    kwargs = {}
    if keywords:
        kwargs["keywords"] = frozenset(k.lower() for k in keywords)
    min_len = getattr(args, "min_length", None) or config.get("min_literal_length")
    if min_len:
        kwargs["min_literal_length"] = int(min_len)
    if "case_insensitive" in config:
        kwargs["case_insensitive"] = bool(config["case_insensitive"])
    return KeywordConfig(**kwargs)


def _gather_inputs(args, config: dict) -> list[tuple[Path, str]]:
    """(path, dataset_tag) pairs from positional inputs or the config map."""
    pairs: list[tuple[Path, str]] = []
    if args.inputs:
        tag = args.dataset or "default"
        for raw in args.inputs:
            path = Path(raw)
            if not path.exists():
                raise InputError(f"input does not exist: {path}")
            pairs.append((path, tag))
        return pairs
    datasets = config.get("datasets", {})
    if not datasets:
        raise InputError("no inputs given and no datasets configured")
    for tag in sorted(datasets):
        root = Path(datasets[tag])
        children = sorted(root.iterdir(), key=lambda p: p.name)
        pairs.extend((child, tag) for child in children)
    return pairs


def _iter_apps(pairs):
    for path, tag in pairs:
        try:
            yield open_app(path, tag)
        except (NotAnApp, CorruptArchive) as exc:
            logger.warning("skipping %s: %s", path, exc)


def cmd_scan(args) -> int:
    config = load_config(args.config)
    keyword_config = _keyword_config(args, config)
    out = Path(args.out) / "candidates.jsonl"
    count = 0
    records = []
    for app in _iter_apps(_gather_inputs(args, config)):
        try:
            for unit in enumerate_scan_units(app):
                for cand in extract_candidates(unit, keyword_config, args.dex_adjacency):
                    records.append(cand.to_record())
                    count += 1
        except ApkLeakError as exc:
            logger.warning("scan failed for %s: %s", app.package_id, exc)
    write_jsonl(out, records)
    print(f"{count} candidates -> {out}")
    return EXIT_OK


def cmd_rank(args) -> int:
    config = load_config(args.config)
    src = Path(args.input or Path(args.out) / "candidates.jsonl")
    if not src.is_file():
        raise InputError(f"candidates artifact not found: {src}")
    dictionary = load_wordlist(args.wordlist or config.get("wordlist_path"))
    out = Path(args.out) / "ranked.jsonl"
    records = []
    for rec in read_jsonl(src):
        cand = SecretCandidate.from_record(rec)
        score = rank(cand, dictionary)
        rec = dict(rec)
        rec.update(
            diversity=round(score.diversity, 9),
            words=round(score.words, 9),
            total=round(score.total, 9),
        )
        records.append(rec)
    records.sort(key=lambda r: -r["total"])
    write_jsonl(out, records)
    print(f"{len(records)} ranked -> {out}")
    return EXIT_OK


def cmd_sample(args) -> int:
    config = load_config(args.config)
    src = Path(args.input or Path(args.out) / "ranked.jsonl")
    if not src.is_file():
        raise InputError(f"ranked artifact not found: {src}")
    rows = read_jsonl(src)
    ranked = [
        (SecretCandidate.from_record(rec), RankScore(rec["diversity"], rec["words"]))
        for rec in rows
    ]
    spec = SampleSpec(
        sample_size=min(
            args.sample_size or config.get("sample_size", 300), len(ranked)
        ),
        include_numeric_only=not args.no_numeric,
        seed=args.seed,
    )
    sample = weighted_sample(ranked, spec)
    out = Path(args.out) / "sample.jsonl"
    write_jsonl(out, (c.to_record() for c in sample))
    print(f"{len(sample)} sampled -> {out}")
    return EXIT_OK


def cmd_detect(args) -> int:
    config = load_config(args.config)
    keyword_config = _keyword_config(args, config)
    patterns = load_service_patterns(args.patterns or config.get("patterns_path"))
    out = Path(args.out) / "detections.jsonl"
    records = []
    for app in _iter_apps(_gather_inputs(args, config)):
        try:
            units = list(enumerate_scan_units(app))
            for det in detect_app(units, app, keyword_config, patterns):
                records.append(det.to_record(redacted=not args.unredacted))
        except ApkLeakError as exc:
            logger.warning("detect failed for %s: %s", app.package_id, exc)
    write_jsonl(out, records)
    print(f"{len(records)} detections -> {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = load_config(args.config)
    src = Path(args.input or Path(args.out) / "detections.jsonl")
    if not src.is_file():
        raise InputError(f"detections artifact not found: {src}")
    rows = read_jsonl(src)
    if any(rec.get("redacted") for rec in rows):
        raise InputError(
            "detections are redacted; re-run detect --unredacted to validate"
        )
    credentials = [DetectedCredential.from_record(rec) for rec in rows]
    policy = ValidationPolicy(
        offline=not args.online,
        max_in_flight=config.get("max_in_flight", 4),
        per_service_rate=config.get("per_service_rate", 1.0),
        timeout=config.get("timeout", 10.0),
        max_retries_on_network_error=config.get("max_retries_on_network_error", 2),
    )
    templates = load_endpoint_templates(args.endpoints or config.get("endpoints_path"))
    transport = FixtureTransport.from_file(args.fixtures) if args.fixtures else None
    outcomes = run_validation_batch(credentials, transport, policy, templates)
    out = Path(args.out) / "outcomes.jsonl"
    write_jsonl(out, (o.to_record() for o in outcomes))
    by_status: dict[str, int] = {}
    for outcome in outcomes:
        by_status[outcome.status] = by_status.get(outcome.status, 0) + 1
    print(f"{len(outcomes)} outcomes -> {out} " + json.dumps(by_status, sort_keys=True))
    if args.online and by_status.get("network_error"):
        return EXIT_NETWORK
    return EXIT_OK


def _parse_groups(raw: list[str]) -> dict[str, set[str]]:
    groups = {}
    for item in raw:
        label, _, tags = item.partition("=")
        if not tags:
            raise InputError(f"--group must look like LABEL=tag1,tag2 (got {item!r})")
        groups[label] = {t.strip() for t in tags.split(",") if t.strip()}
    return groups


def cmd_report(args) -> int:
    detection_files = args.detections or [str(Path(args.out) / "detections.jsonl")]
    detections = []
    for name in detection_files:
        path = Path(name)
        if not path.is_file():
            raise InputError(f"detections artifact not found: {path}")
        detections.extend(DetectedCredential.from_record(r) for r in read_jsonl(path))

    groups = _parse_groups(args.group) if args.group else None
    by_dataset: dict[str, list[DetectedCredential]] = {}
    for det in detections:
        if groups:
            label = next(
                (lbl for lbl, tags in sorted(groups.items()) if det.dataset_tag in tags),
                det.dataset_tag,
            )
        else:
            label = det.dataset_tag
        by_dataset.setdefault(label, []).append(det)

    candidates = []
    if args.candidates:
        path = Path(args.candidates)
        if not path.is_file():
            raise InputError(f"candidates artifact not found: {path}")
        candidates = [SecretCandidate.from_record(r) for r in read_jsonl(path)]

    valid_keys = set()
    if args.outcomes:
        path = Path(args.outcomes)
        if not path.is_file():
            raise InputError(f"outcomes artifact not found: {path}")
        valid_fps = {r["fingerprint"] for r in read_jsonl(path) if r["status"] == "valid"}
        valid_keys = {
            k for k in {DedupKey.of(d) for d in detections} if k.fingerprint() in valid_fps
        }

    tag_order = None
    if args.tag_order:
        tag_order = [t.strip() for t in args.tag_order.split(",") if t.strip()]

    report = build_report(
        by_dataset,
        candidates=candidates,
        valid_keys=frozenset(valid_keys),
        tag_order=tag_order,
        min_shared_apps=args.min_shared_apps,
    )
    written = write_report(report, args.out, csv_too=args.csv)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=_env("config"), help="pipeline config JSON")
    common.add_argument("--out", default=_env("out", "out"), help="artifact directory")
    common.add_argument("--seed", type=int, default=int(_env("seed", "0")), help="RNG seed")
    common.add_argument(
        "--offline", dest="online", action="store_false",
        help="no network activity (default)",
    )
    common.add_argument(
        "--online", dest="online", action="store_true",
        help="allow live validation requests",
    )
    common.add_argument(
        "--unredacted", action="store_true",
        default=bool(_env_flag("unredacted")),
        help="emit raw credential values (prints an ethics warning)",
    )
    common.set_defaults(online=bool(_env_flag("online")))

    scan_common = argparse.ArgumentParser(add_help=False)
    scan_common.add_argument("inputs", nargs="*", help="APKs or smali trees")
    scan_common.add_argument("--dataset", help="dataset tag for the given inputs")
    scan_common.add_argument("--keywords", help="comma-separated keyword overrides")
    scan_common.add_argument("--min-length", type=int, help="minimum literal length")

    parser = argparse.ArgumentParser(
        prog="apkleak",
        description="Extract, rank, detect, validate and report hard-coded app credentials.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", parents=[common, scan_common],
                       help="extract keyword-named secret candidates")
    p.add_argument("--dex-adjacency", action="store_true",
                   help="extract dex pool strings via name adjacency")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("rank", parents=[common], help="score candidates")
    p.add_argument("--input", help="candidates.jsonl (default: <out>/candidates.jsonl)")
    p.add_argument("--wordlist", help="dictionary file, one word per line")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("sample", parents=[common], help="draw the inspection sample")
    p.add_argument("--input", help="ranked.jsonl (default: <out>/ranked.jsonl)")
    p.add_argument("--sample-size", type=int, help="weighted draw size (default 300)")
    p.add_argument("--no-numeric", action="store_true",
                   help="do not union in numeric-only candidates")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("detect", parents=[common, scan_common],
                       help="detect service credentials")
    p.add_argument("--patterns", help="service pattern JSON override")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("validate", parents=[common], help="check credential exploitability")
    p.add_argument("--input", help="detections.jsonl (default: <out>/detections.jsonl)")
    p.add_argument("--fixtures", help="fixture transport JSON for offline tests")
    p.add_argument("--endpoints", help="endpoint template JSON override")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", parents=[common], help="aggregate result tables")
    p.add_argument("--detections", nargs="*", help="detections.jsonl files")
    p.add_argument("--candidates", help="candidates.jsonl for multi-secret files")
    p.add_argument("--outcomes", help="outcomes.jsonl for validity joins")
    p.add_argument("--tag-order", help="comma-separated dataset tags, oldest first")
    p.add_argument("--group", action="append",
                   help="LABEL=tag1,tag2 dataset grouping (repeatable)")
    p.add_argument("--min-shared-apps", type=int, default=2,
                   help="threshold for the shared-credentials table")
    p.add_argument("--csv", action="store_true", help="also write report.csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="[%(levelname)s] %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "unredacted", False):
        print(ETHICS_WARNING, file=sys.stderr)
    try:
        return args.func(args)
    except InputError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except ApkLeakError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
