"""Aggregate detections and validation outcomes into report tables.

All aggregation is value-level: two detections with the same service and
the same factor values are the same credential no matter which app or
dataset they came from. Report output is deterministic (stable sort keys
everywhere) and always redacted.
"""

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .detect import GOOGLE_FAMILY, DetectedCredential, credential_fingerprint, redact
from .errors import MissingTagOrder
from .extract import SecretCandidate

TOTAL_LABEL = "Total"


@dataclass(frozen=True)
class DedupKey:
    service_id: str
    canonical_factors: tuple[tuple[str, str], ...]  # (role, value), sorted

    @classmethod
    def of(cls, credential: DetectedCredential) -> "DedupKey":
        return cls(
            service_id=credential.service_id,
            canonical_factors=tuple(
                sorted((role, f.value) for role, f in credential.factors)
            ),
        )

    def redacted(self) -> str:
        return ", ".join(redact(value) for _, value in self.canonical_factors)

    def fingerprint(self) -> str:
        return credential_fingerprint(self.service_id, self.canonical_factors)


@dataclass(frozen=True)
class SummaryRow:
    label: str
    count_a: int
    count_b: int
    total: int
    overlap: int


@dataclass(frozen=True)
class SummaryTable:
    label_a: str
    label_b: str
    rows: tuple[SummaryRow, ...]


def dedup_and_overlap(
    detections_a: Iterable[DetectedCredential],
    detections_b: Iterable[DetectedCredential],
    label_a: str = "A",
    label_b: str = "B",
) -> SummaryTable:
    """Distinct-credential counts per dataset with cross-dataset overlap.

    Every row satisfies total = count_a + count_b - overlap because the
    union/intersection are computed on credential identity sets.
    """
    keys_a = {DedupKey.of(d) for d in detections_a}
    keys_b = {DedupKey.of(d) for d in detections_b}
    services = sorted({k.service_id for k in keys_a | keys_b})

    rows = []
    for service in services:
        sa = {k for k in keys_a if k.service_id == service}
        sb = {k for k in keys_b if k.service_id == service}
        rows.append(
            SummaryRow(service, len(sa), len(sb), len(sa | sb), len(sa & sb))
        )
    rows.sort(key=lambda r: (-r.total, r.label))
    rows.append(
        SummaryRow(
            TOTAL_LABEL,
            len(keys_a),
            len(keys_b),
            len(keys_a | keys_b),
            len(keys_a & keys_b),
        )
    )
    return SummaryTable(label_a=label_a, label_b=label_b, rows=tuple(rows))


def _family_key(key: DedupKey) -> tuple:
    # The four Alphabet services share one key format; a key attributed to
    # several of them is still one credential for counting purposes.
    family = "google" if key.service_id in GOOGLE_FAMILY else key.service_id
    return (family, key.canonical_factors)


def per_app_counts(
    detections: Iterable[DetectedCredential],
) -> list[tuple[str, int, tuple[str, ...]]]:
    """(app, distinct credential count, services) sorted by count desc."""
    per_app: dict[str, set[tuple]] = {}
    services: dict[str, set[str]] = {}
    for det in detections:
        key = DedupKey.of(det)
        per_app.setdefault(det.app, set()).add(_family_key(key))
        services.setdefault(det.app, set()).add(det.service_id)
    rows = [
        (app, len(keys), tuple(sorted(services[app])))
        for app, keys in per_app.items()
    ]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows


def shared_credentials(
    detections: Iterable[DetectedCredential],
    min_apps: int = 2,
) -> list[tuple[str, str, int, tuple[str, ...]]]:
    """Credentials present in at least min_apps distinct apps.

    Rows are (redacted value(s), service, app count, apps), most shared
    first. Values are always redacted here; this table is report output.
    """
    if min_apps < 1:
        raise ValueError("min_apps must be >= 1")
    apps_by_key: dict[DedupKey, set[str]] = {}
    for det in detections:
        apps_by_key.setdefault(DedupKey.of(det), set()).add(det.app)
    rows = [
        (key.redacted(), key.service_id, len(apps), tuple(sorted(apps)))
        for key, apps in apps_by_key.items()
        if len(apps) >= min_apps
    ]
    rows.sort(key=lambda r: (-r[2], r[1], r[0]))
    return rows


def multi_secret_files(
    candidates: Iterable[SecretCandidate],
    detections: Iterable[DetectedCredential],
) -> list[tuple[str, str, int]]:
    """Files holding at least two distinct secret values, largest first."""
    values: dict[tuple[str, str], set[str]] = {}
    for cand in candidates:
        values.setdefault((cand.app, cand.rel_path), set()).add(cand.value)
    for det in detections:
        for _, factor in det.factors:
            values.setdefault((det.app, factor.rel_path), set()).add(factor.value)
    rows = [
        (app, path, len(vals))
        for (app, path), vals in values.items()
        if len(vals) >= 2
    ]
    rows.sort(key=lambda r: (-r[2], r[0], r[1]))
    return rows


@dataclass(frozen=True)
class LifespanRecord:
    key: DedupKey
    app: str
    years_present: tuple[str, ...]  # subset of the tag order, oldest first
    span: int
    removed_but_valid: bool


def lifespan(
    detections: Iterable[DetectedCredential],
    tag_order: Sequence[str] | None,
    valid_keys: frozenset | set | None = None,
) -> tuple[list[LifespanRecord], dict[int, int]]:
    """Per (app, credential) presence profile across dataset snapshots.

    Span counts distinct snapshots the pair appears in. A credential is
    removed_but_valid when it is absent from the latest snapshot yet its
    latest validation said valid (valid_keys holds such DedupKeys).
    Returns the records plus a {span: count} histogram.
    """
    detections = list(detections)
    if not tag_order:
        raise MissingTagOrder("an ordered dataset tag sequence is required")
    tag_order = list(tag_order)
    seen_tags = {d.dataset_tag for d in detections}
    unknown = seen_tags - set(tag_order)
    if unknown:
        raise MissingTagOrder(f"tags {sorted(unknown)} missing from tag order")
    if len(tag_order) < 2:
        raise MissingTagOrder("need at least two dataset tags")
    valid_keys = valid_keys or frozenset()
    latest = tag_order[-1]

    years: dict[tuple[str, DedupKey], set[str]] = {}
    for det in detections:
        years.setdefault((det.app, DedupKey.of(det)), set()).add(det.dataset_tag)

    records = []
    for (app, key), tags in years.items():
        present = tuple(t for t in tag_order if t in tags)
        records.append(
            LifespanRecord(
                key=key,
                app=app,
                years_present=present,
                span=len(present),
                removed_but_valid=(latest not in tags) and (key in valid_keys),
            )
        )
    records.sort(key=lambda r: (r.app, r.key.service_id, r.key.canonical_factors))

    histogram: dict[int, int] = {}
    for rec in records:
        histogram[rec.span] = histogram.get(rec.span, 0) + 1
    return records, histogram


def span_histogram_svg(histogram: Mapping[int, int], title: str = "Credential life spans") -> str:
    """Minimal deterministic SVG bar chart of the span histogram."""
    spans = sorted(histogram)
    peak = max(histogram.values(), default=1)
    bar_w, gap, chart_h, margin = 60, 20, 200, 40
    width = margin * 2 + len(spans) * (bar_w + gap)
    height = chart_h + margin * 2 + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{margin}" y="20" font-family="sans-serif" font-size="14">{title}</text>',
    ]
    for i, span in enumerate(spans):
        count = histogram[span]
        h = round(chart_h * count / peak)
        x = margin + i * (bar_w + gap)
        y = margin + 20 + (chart_h - h)
        parts.append(f'<rect x="{x}" y="{y}" width="{bar_w}" height="{h}" fill="#4477aa"/>')
        parts.append(
            f'<text x="{x + bar_w // 2}" y="{y - 4}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{count}</text>'
        )
        parts.append(
            f'<text x="{x + bar_w // 2}" y="{margin + 20 + chart_h + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{span} yr</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def summary_table_text(table: SummaryTable) -> str:
    header = ("Service", table.label_a, table.label_b, "Total", "Overlap")
    body = [
        (r.label, str(r.count_a), str(r.count_b), str(r.total), str(r.overlap))
        for r in table.rows
    ]
    return _align([header, *body])


def _align(rows: list[tuple[str, ...]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = []
    for r in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip())
    return "\n".join(lines)


def build_report(
    detections_by_dataset: Mapping[str, list[DetectedCredential]],
    candidates: Iterable[SecretCandidate] = (),
    valid_keys: frozenset | set | None = None,
    tag_order: Sequence[str] | None = None,
    min_shared_apps: int = 2,
) -> dict:
    """Assemble the full machine-readable report (all values redacted)."""
    all_detections = [d for ds in detections_by_dataset.values() for d in ds]
    labels = sorted(detections_by_dataset)
    report: dict = {
        "datasets": {
            label: len({DedupKey.of(d) for d in detections_by_dataset[label]})
            for label in labels
        },
        "per_app": [
            {"app": app, "credentials": count, "services": list(svcs)}
            for app, count, svcs in per_app_counts(all_detections)
        ],
        "shared": [
            {"credential": red, "service": svc, "apps": n, "app_ids": list(apps)}
            for red, svc, n, apps in shared_credentials(all_detections, min_shared_apps)
        ],
        "multi_secret_files": [
            {"app": app, "path": path, "secrets": n}
            for app, path, n in multi_secret_files(candidates, all_detections)
        ],
    }
    if len(labels) == 2:
        table = dedup_and_overlap(
            detections_by_dataset[labels[0]],
            detections_by_dataset[labels[1]],
            labels[0],
            labels[1],
        )
        report["overlap"] = {
            "label_a": table.label_a,
            "label_b": table.label_b,
            "rows": [
                {
                    "service": r.label,
                    "count_a": r.count_a,
                    "count_b": r.count_b,
                    "total": r.total,
                    "overlap": r.overlap,
                }
                for r in table.rows
            ],
        }
    if tag_order and len(tag_order) >= 2:
        records, histogram = lifespan(all_detections, tag_order, valid_keys)
        total = len(records) or 1
        report["lifespan"] = {
            "histogram": {str(span): histogram[span] for span in sorted(histogram)},
            "percentages": {
                str(span): round(100.0 * histogram[span] / total, 1)
                for span in sorted(histogram)
            },
            "records": [
                {
                    "app": rec.app,
                    "service": rec.key.service_id,
                    "credential": rec.key.redacted(),
                    "fingerprint": rec.key.fingerprint(),
                    "years": list(rec.years_present),
                    "span": rec.span,
                    "removed_but_valid": rec.removed_but_valid,
                }
                for rec in records
            ],
        }
    return report


def report_text(report: dict) -> str:
    """Aligned-column human rendering of build_report output."""
    sections = []
    if "overlap" in report:
        rows = [("Service", "A", "B", "Total", "Overlap")]
        ov = report["overlap"]
        rows[0] = ("Service", ov["label_a"], ov["label_b"], "Total", "Overlap")
        for r in ov["rows"]:
            rows.append(
                (r["service"], str(r["count_a"]), str(r["count_b"]), str(r["total"]), str(r["overlap"]))
            )
        sections.append("== Distinct credentials per dataset ==\n" + _align(rows))
    if report["per_app"]:
        rows = [("App", "Credentials", "Services")]
        for entry in report["per_app"]:
            rows.append((entry["app"], str(entry["credentials"]), ", ".join(entry["services"])))
        sections.append("== Apps with the most credentials ==\n" + _align(rows))
    if report["shared"]:
        rows = [("Credential", "Service", "Apps")]
        for entry in report["shared"]:
            rows.append((entry["credential"], entry["service"], str(entry["apps"])))
        sections.append("== Credentials shared across apps ==\n" + _align(rows))
    if report["multi_secret_files"]:
        rows = [("App", "File", "Secrets")]
        for entry in report["multi_secret_files"]:
            rows.append((entry["app"], entry["path"], str(entry["secrets"])))
        sections.append("== Files holding multiple secrets ==\n" + _align(rows))
    if "lifespan" in report:
        rows = [("Span", "Credentials", "Percent")]
        hist = report["lifespan"]["histogram"]
        pct = report["lifespan"]["percentages"]
        for span in sorted(hist, key=int):
            rows.append((f"{span} yr", str(hist[span]), f"{pct[span]}%"))
        sections.append("== Credential life spans ==\n" + _align(rows))
        removed = [r for r in report["lifespan"]["records"] if r["removed_but_valid"]]
        if removed:
            rows = [("App", "Service", "Credential", "Years")]
            for r in removed:
                rows.append((r["app"], r["service"], r["credential"], ", ".join(r["years"])))
            sections.append("== Removed but still valid ==\n" + _align(rows))
    return "\n\n".join(sections) + "\n"


def report_csv(report: dict) -> str:
    """Flat CSV rendering (section column + key/value columns)."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["section", "c1", "c2", "c3", "c4", "c5"])
    for r in report.get("overlap", {}).get("rows", ()):
        writer.writerow(
            ["overlap", r["service"], r["count_a"], r["count_b"], r["total"], r["overlap"]]
        )
    for entry in report["per_app"]:
        writer.writerow(
            ["per_app", entry["app"], entry["credentials"], ";".join(entry["services"]), "", ""]
        )
    for entry in report["shared"]:
        writer.writerow(
            ["shared", entry["credential"], entry["service"], entry["apps"],
             ";".join(entry["app_ids"]), ""]
        )
    for entry in report["multi_secret_files"]:
        writer.writerow(
            ["multi_secret_files", entry["app"], entry["path"], entry["secrets"], "", ""]
        )
    for span, count in report.get("lifespan", {}).get("histogram", {}).items():
        writer.writerow(["lifespan", span, count, "", "", ""])
    return buf.getvalue()


def write_report(
    report: dict,
    out_dir: str | Path,
    csv_too: bool = False,
) -> list[Path]:
    """Write report.json / report.txt (and optional csv + svg); returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", "utf-8")
    written.append(json_path)
    text_path = out_dir / "report.txt"
    text_path.write_text(report_text(report), "utf-8")
    written.append(text_path)
    if csv_too:
        csv_path = out_dir / "report.csv"
        csv_path.write_text(report_csv(report), "utf-8")
        written.append(csv_path)
    if "lifespan" in report:
        svg_path = out_dir / "lifespan.svg"
        histogram = {int(k): v for k, v in report["lifespan"]["histogram"].items()}
        svg_path.write_text(span_histogram_svg(histogram) + "\n", "utf-8")
        written.append(svg_path)
    return written
