"""Open app inputs and stream scannable text units.

Two input kinds are supported: APK archives (scanned through their raw
classes*.dex string pools, no disassembler needed) and already
disassembled smali directory trees (scanned as text).
"""

import logging
import re
import zipfile
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

from .dexpool import parse_dex_string_pool
from .errors import BadMagic, CorruptArchive, NotAnApp, TruncatedPool

logger = logging.getLogger(__name__)

APK_ARCHIVE = "apk_archive"
SMALI_TREE = "smali_tree"

SMALI_TEXT = "smali_text"
MANIFEST_TEXT = "manifest_text"
DEX_STRING_POOL = "dex_string_pool"
RESOURCE_TEXT = "resource_text"

ZIP_MAGIC = b"PK\x03\x04"
DEX_ENTRY_RE = re.compile(r"^classes\d*\.dex$")
MANIFEST_PACKAGE_RE = re.compile(r'package\s*=\s*"([^"]+)"')

TEXT_RESOURCE_SUFFIXES = {
    ".xml", ".txt", ".json", ".properties", ".cfg", ".ini", ".yml", ".yaml",
    ".js", ".html", ".csv",
}


@dataclass(frozen=True)
class AppArtifact:
    package_id: str
    dataset_tag: str
    source_path: Path
    source_kind: str


@dataclass(frozen=True)
class ScanUnit:
    app: AppArtifact
    rel_path: str
    kind: str
    # (line_number, text); for dex pools the line number is pool index + 1
    lines: tuple[tuple[int, str], ...]


def _text_lines(text: str) -> tuple[tuple[int, str], ...]:
    return tuple(enumerate(text.splitlines(), start=1))


def _package_id_from_tree(root: Path) -> str:
    manifest = root / "AndroidManifest.xml"
    if manifest.is_file():
        try:
            match = MANIFEST_PACKAGE_RE.search(manifest.read_text("utf-8", errors="replace"))
            if match and match.group(1):
                return match.group(1)
        except OSError:
            pass
    return root.name


def open_app(path: str | Path, dataset_tag: str) -> AppArtifact:
    """Classify an input path and build its app record.

    Directories become smali trees; files with zip magic become APK
    archives (and must have a readable central directory). Anything else
    raises NotAnApp.
    """
    path = Path(path)
    if path.is_dir():
        return AppArtifact(
            package_id=_package_id_from_tree(path),
            dataset_tag=dataset_tag,
            source_path=path,
            source_kind=SMALI_TREE,
        )
    if path.is_file():
        with open(path, "rb") as fh:
            magic = fh.read(4)
        if magic != ZIP_MAGIC:
            raise NotAnApp(f"{path} is neither a zip archive nor a directory")
        try:
            with zipfile.ZipFile(path) as zf:
                zf.namelist()
        except zipfile.BadZipFile as exc:
            raise CorruptArchive(f"{path}: {exc}") from exc
        return AppArtifact(
            package_id=path.stem,
            dataset_tag=dataset_tag,
            source_path=path,
            source_kind=APK_ARCHIVE,
        )
    raise NotAnApp(f"{path} does not exist")


def _iter_tree_units(app: AppArtifact) -> Iterator[ScanUnit]:
    root = app.source_path
    paths = sorted(
        (p for p in root.rglob("*") if p.is_file()),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    for path in paths:
        rel = path.relative_to(root).as_posix()
        if path.suffix == ".smali":
            kind = SMALI_TEXT
        elif path.name == "AndroidManifest.xml":
            kind = MANIFEST_TEXT
        elif path.suffix.lower() in TEXT_RESOURCE_SUFFIXES:
            kind = RESOURCE_TEXT
        else:
            continue
        try:
            text = path.read_text("utf-8", errors="strict")
        except (OSError, UnicodeDecodeError) as exc:
            logger.warning("skipping %s!%s: %s", app.package_id, rel, exc)
            continue
        yield ScanUnit(app=app, rel_path=rel, kind=kind, lines=_text_lines(text))


def _iter_archive_units(app: AppArtifact) -> Iterator[ScanUnit]:
    with zipfile.ZipFile(app.source_path) as zf:
        for name in sorted(zf.namelist()):
            if DEX_ENTRY_RE.match(name):
                try:
                    pool = parse_dex_string_pool(zf.read(name))
                except (BadMagic, TruncatedPool, zipfile.BadZipFile) as exc:
                    logger.warning("skipping %s!%s: %s", app.package_id, name, exc)
                    continue
                for index, problem in pool.decode_warnings:
                    logger.warning("%s!%s string %d: %s", app.package_id, name, index, problem)
                yield ScanUnit(
                    app=app,
                    rel_path=name,
                    kind=DEX_STRING_POOL,
                    lines=tuple(enumerate(pool.entries, start=1)),
                )
            elif name == "AndroidManifest.xml":
                # Binary AXML does not decode as UTF-8; only plain-text
                # manifests (rare in real APKs) are scanned.
                raw = zf.read(name)
                try:
                    text = raw.decode("utf-8")
                except UnicodeDecodeError:
                    logger.warning("skipping %s!%s: binary manifest", app.package_id, name)
                    continue
                if "\x00" in text:
                    logger.warning("skipping %s!%s: binary manifest", app.package_id, name)
                    continue
                yield ScanUnit(app=app, rel_path=name, kind=MANIFEST_TEXT, lines=_text_lines(text))


def enumerate_scan_units(app: AppArtifact) -> Iterator[ScanUnit]:
    """Yield every scannable unit of an app in lexicographic path order.

    Per-entry decode failures are logged and skipped; the stream itself
    never aborts.
    """
    if app.source_kind == SMALI_TREE:
        yield from _iter_tree_units(app)
    elif app.source_kind == APK_ARCHIVE:
        yield from _iter_archive_units(app)
    else:
        raise NotAnApp(f"unknown source kind {app.source_kind!r}")
