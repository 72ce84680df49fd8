"""Single-line alert records in a Snort fast-alert style.

::

    03/31-18:00:32.637334 [**] [1:255:11] DNS zone transfer TCP [**] [Priority: 2] {TCP} 194.7.248.153:2076 -> 172.16.112.20:53
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

# Alert timestamps carry no year; a leap year keeps 02/29 representable.
PLACEHOLDER_YEAR = 2000

_TS_RE = re.compile(r"(\d{2})/(\d{2})(?:[A-Za-z]{3})?-(\d{2}):(\d{2}):(\d{2})\.(\d{6})")
_ALERT_RE = re.compile(
    r"^(?P<ts>\S+) \[\*\*\] \[(?P<gid>\d+):(?P<sid>\d+):(?P<rev>\d+)\] (?P<msg>.*) \[\*\*\] "
    r"\[Priority: (?P<prio>\d+)\] \{(?P<proto>[A-Za-z]+)\} "
    r"(?P<sip>[\d.]+):(?P<sport>\d+) -> (?P<dip>[\d.]+):(?P<dport>\d+)$"
)


class TimestampError(ValueError):
    pass


def parse_timestamp(text: str) -> datetime:
    """Parse ``MM/DD-HH:MM:SS.ffffff``; a weekday infix (``03/31wed-``) is tolerated."""
    m = _TS_RE.fullmatch(text.strip())
    if m is None:
        raise TimestampError(f"bad timestamp {text!r}")
    month, day, hour, minute, second, micro = (int(g) for g in m.groups())
    try:
        return datetime(PLACEHOLDER_YEAR, month, day, hour, minute, second, micro)
    except ValueError as exc:
        raise TimestampError(f"bad timestamp {text!r}: {exc}") from exc


def format_timestamp(ts: datetime) -> str:
    return ts.strftime("%m/%d-%H:%M:%S.%f")


@dataclass(frozen=True)
class Alert:
    ts: datetime
    msg: str
    priority: int
    protocol: str
    src_ip: ipaddress.IPv4Address
    src_port: int
    dst_ip: ipaddress.IPv4Address
    dst_port: int
    sid: Optional[int] = None
    rev: Optional[int] = None

    def __post_init__(self):
        # sid/rev 0 is how the line format spells "absent".
        if self.sid == 0:
            object.__setattr__(self, "sid", None)
        if self.rev == 0:
            object.__setattr__(self, "rev", None)
        for name in ("src_ip", "dst_ip"):
            value = getattr(self, name)
            if not isinstance(value, ipaddress.IPv4Address):
                object.__setattr__(self, name, ipaddress.IPv4Address(value))
        object.__setattr__(self, "protocol", self.protocol.lower())

    @property
    def key(self) -> tuple:
        """Packet identity: two alerts with equal keys describe the same packet."""
        return (self.ts, self.protocol, self.src_ip, self.src_port, self.dst_ip, self.dst_port)


PacketKey = tuple


def format_alert(a: Alert) -> str:
    return (f"{format_timestamp(a.ts)} [**] [1:{a.sid or 0}:{a.rev or 0}] {a.msg} [**] "
            f"[Priority: {a.priority}] {{{a.protocol.upper()}}} "
            f"{a.src_ip}:{a.src_port} -> {a.dst_ip}:{a.dst_port}")


def format_alerts(alerts) -> str:
    return "".join(format_alert(a) + "\n" for a in alerts)


def parse_alert(line: str) -> Alert:
    m = _ALERT_RE.match(line.rstrip("\r\n"))
    if m is None:
        raise ValueError("line does not look like an alert")
    return Alert(
        ts=parse_timestamp(m["ts"]),
        msg=m["msg"],
        priority=int(m["prio"]),
        protocol=m["proto"],
        src_ip=ipaddress.IPv4Address(m["sip"]),
        src_port=int(m["sport"]),
        dst_ip=ipaddress.IPv4Address(m["dip"]),
        dst_port=int(m["dport"]),
        sid=int(m["sid"]),
        rev=int(m["rev"]),
    )


def parse_alert_file(text: str) -> tuple[list[Alert], list[tuple[int, str]]]:
    """Alerts in file order plus ``(line_number, reason)`` for lines that failed."""
    alerts, diags = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            alerts.append(parse_alert(line))
        except ValueError as exc:
            diags.append((lineno, str(exc)))
    return alerts, diags
