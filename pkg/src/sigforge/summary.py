"""Alert frequency summaries, per alert and per generalisation method."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional

from .rule_model import method_of, split_tag

# Entries seen fewer times than this are flagged for a closer look.
LOW_FREQUENCY = 10


@dataclass(frozen=True)
class SummaryEntry:
    sid: Optional[int]
    msg: str
    count: int


@dataclass
class SummaryReport:
    per_alert: list = field(default_factory=list)
    per_method: list = field(default_factory=list)
    total_alerts: int = 0
    suppressed: list = field(default_factory=list)
    max_frequency: Optional[int] = None

    @property
    def low_frequency(self) -> list:
        return [e for e in self.per_alert if e.count < LOW_FREQUENCY]

    def to_json(self) -> str:
        body = asdict(self)
        body["low_frequency"] = [asdict(e) for e in self.low_frequency]
        return json.dumps(body, indent=2)


def alert_method(msg: str) -> str:
    _, code = split_tag(msg)
    return "original" if code is None else method_of(code)


def _entry_order(e: SummaryEntry):
    return (-e.count, e.sid if e.sid is not None else -1, e.msg)


def summarize(alerts, max_frequency: Optional[int] = None) -> SummaryReport:
    alerts = list(alerts)
    by_alert = Counter((a.sid, a.msg) for a in alerts)
    by_method = Counter(alert_method(a.msg) for a in alerts)
    report = SummaryReport(total_alerts=len(alerts), max_frequency=max_frequency)
    for (sid, msg), n in by_alert.items():
        entry = SummaryEntry(sid, msg, n)
        if max_frequency is not None and n > max_frequency:
            report.suppressed.append(entry)
        else:
            report.per_alert.append(entry)
    report.per_alert.sort(key=_entry_order)
    report.suppressed.sort(key=_entry_order)
    report.per_method = sorted(by_method.items(), key=lambda kv: (-kv[1], kv[0]))
    return report


def _table(rows, headers):
    widths = [max(len(str(x)) for x in col) for col in zip(headers, *rows)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row, widths)))
    return lines


def render_text(report: SummaryReport) -> str:
    out = [f"Total alerts: {report.total_alerts}"]

    def section(title, entries):
        out.append("")
        out.append(f"{title} ({len(entries)})")
        if entries:
            out.extend(_table([(e.count, e.sid if e.sid is not None else "-", e.msg) for e in entries],
                              ("count", "sid", "msg")))

    section("Alerts", report.per_alert)
    section(f"Low-frequency alerts (count < {LOW_FREQUENCY})", report.low_frequency)
    if report.max_frequency is not None:
        section(f"Suppressed (count > {report.max_frequency})", report.suppressed)
    out.append("")
    out.append(f"Methods ({len(report.per_method)})")
    if report.per_method:
        out.extend(_table([(n, m) for m, n in report.per_method], ("count", "method")))
    return "\n".join(out) + "\n"
