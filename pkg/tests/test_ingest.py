"""Opening inputs and enumerating scan units."""

import pytest

from apkleak.errors import CorruptArchive, NotAnApp
from apkleak.ingest import (
    APK_ARCHIVE,
    DEX_STRING_POOL,
    MANIFEST_TEXT,
    SMALI_TEXT,
    SMALI_TREE,
    enumerate_scan_units,
    open_app,
)

from conftest import build_dex, make_apk


def test_open_smali_tree(planted_tree):
    app = open_app(planted_tree, "2021")
    assert app.source_kind == SMALI_TREE
    assert app.package_id == "com.example.planted"
    assert app.dataset_tag == "2021"


def test_open_tree_without_manifest(tmp_path):
    root = tmp_path / "com.fallback.name"
    root.mkdir()
    (root / "A.smali").write_text(".class public LA;\n", "utf-8")
    app = open_app(root, "2020")
    assert app.package_id == "com.fallback.name"


def test_open_apk(tmp_path):
    apk = make_apk(tmp_path / "a.apk", {"classes.dex": build_dex(["KEY"])})
    app = open_app(apk, "2019")
    assert app.source_kind == APK_ARCHIVE
    assert app.package_id == "a"


def test_open_random_bytes_rejected(tmp_path):
    bogus = tmp_path / "bogus.bin"
    bogus.write_bytes(b"\x8f\x00\x11" * 3 + b"\x42")
    with pytest.raises(NotAnApp):
        open_app(bogus, "2019")


def test_open_missing_path_rejected(tmp_path):
    with pytest.raises(NotAnApp):
        open_app(tmp_path / "missing", "2019")


def test_open_corrupt_zip_rejected(tmp_path):
    truncated = tmp_path / "broken.apk"
    truncated.write_bytes(b"PK\x03\x04" + b"\x00" * 10)  # no central directory
    with pytest.raises(CorruptArchive):
        open_app(truncated, "2019")


def test_tree_units_in_lexicographic_order(tmp_path):
    root = tmp_path / "app"
    root.mkdir()
    for name in ("c.smali", "a.smali", "b.smali"):
        (root / name).write_text(".class public LX;\n", "utf-8")
    app = open_app(root, "t")
    units = list(enumerate_scan_units(app))
    assert [u.rel_path for u in units] == ["a.smali", "b.smali", "c.smali"]
    assert all(u.kind == SMALI_TEXT for u in units)


def test_tree_unit_kinds(planted_tree):
    app = open_app(planted_tree, "2021")
    units = list(enumerate_scan_units(app))
    kinds = {u.rel_path: u.kind for u in units}
    assert kinds["AndroidManifest.xml"] == MANIFEST_TEXT
    assert kinds["smali/com/example/planted/ApiKeys.smali"] == SMALI_TEXT


def test_line_numbers_start_at_one(planted_tree):
    app = open_app(planted_tree, "2021")
    unit = next(iter(enumerate_scan_units(app)))
    numbers = [n for n, _ in unit.lines]
    assert numbers == list(range(1, len(numbers) + 1))


def test_multidex_archive_units(tmp_path):
    apk = make_apk(
        tmp_path / "multi.apk",
        {
            "classes.dex": build_dex(["one"]),
            "classes2.dex": build_dex(["two"]),
        },
    )
    app = open_app(apk, "t")
    units = list(enumerate_scan_units(app))
    assert [u.rel_path for u in units] == ["classes.dex", "classes2.dex"]
    assert all(u.kind == DEX_STRING_POOL for u in units)
    assert units[0].lines == ((1, "one"),)
    assert units[1].lines == ((1, "two"),)


def test_archive_bad_entry_skipped_not_fatal(tmp_path, caplog):
    apk = make_apk(
        tmp_path / "mixed.apk",
        {
            "classes.dex": b"garbage not dex",
            "classes2.dex": build_dex(["survivor"]),
            "AndroidManifest.xml": b"\x03\x00\x08\x00binaryaxml\x00\x00",
        },
    )
    app = open_app(apk, "t")
    with caplog.at_level("WARNING"):
        units = list(enumerate_scan_units(app))
    assert [u.rel_path for u in units] == ["classes2.dex"]
    assert any("skipping" in r.message for r in caplog.records)


def test_plaintext_manifest_in_archive(tmp_path):
    apk = make_apk(
        tmp_path / "m.apk",
        {"classes.dex": build_dex([])},
        extra={"AndroidManifest.xml": b'<manifest package="zz"/>'},
    )
    app = open_app(apk, "t")
    kinds = {u.rel_path: u.kind for u in enumerate_scan_units(app)}
    assert kinds["AndroidManifest.xml"] == MANIFEST_TEXT


def test_enumeration_is_deterministic(planted_tree):
    app = open_app(planted_tree, "2021")
    first = list(enumerate_scan_units(app))
    second = list(enumerate_scan_units(app))
    assert first == second
