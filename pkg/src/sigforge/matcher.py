"""A small stateless detection engine for packet fixtures.

Rules are compiled once against a variable table: address and port
conditions become sorted interval lists, content conditions become literal
or regex searches. :class:`Detector` adds a cheap candidate index (by
protocol/destination port and by a 3-byte content anchor) so that large rule
sets only fully evaluate the rules that could plausibly fire.
"""

from __future__ import annotations

import bisect
import ipaddress
import json
import re
from dataclasses import dataclass
from datetime import datetime

from .alert_io import Alert, format_timestamp, parse_timestamp
from .rule_model import BIDIRECTIONAL, WILDCARD, AddrSpec, Dsize, PortSpec, Rule

PACKET_PROTOCOLS = ("tcp", "udp", "icmp")
FIRST_MATCH = "first_match"
ALL_MATCHES = "all_matches"
MATCH_MODES = (FIRST_MATCH, ALL_MATCHES)

# Actions that write an alert when their rule is the one that fires.
ALERTING_ACTIONS = ("alert", "activate")

_ADDR_TOP = 2**32 - 1
_PORT_TOP = 65535
_ANCHOR_LEN = 3
# A destination port set this small is indexed port by port.
_MAX_INDEXED_PORTS = 64


class UndefinedVariable(KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"undefined variable ${self.name}"


class VariableTypeError(ValueError):
    pass


@dataclass(frozen=True)
class Packet:
    ts: datetime
    proto: str
    src_ip: ipaddress.IPv4Address
    src_port: int
    dst_ip: ipaddress.IPv4Address
    dst_port: int
    payload: bytes = b""

    def __post_init__(self):
        if self.proto not in PACKET_PROTOCOLS:
            raise ValueError(f"packet protocol must be one of {PACKET_PROTOCOLS}, got {self.proto!r}")
        for name in ("src_ip", "dst_ip"):
            value = getattr(self, name)
            if not isinstance(value, ipaddress.IPv4Address):
                object.__setattr__(self, name, ipaddress.IPv4Address(value))
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= _PORT_TOP:
                raise ValueError(f"port {port} out of range")
        if self.proto == "icmp" and (self.src_port or self.dst_port):
            raise ValueError("icmp packets carry port 0")
        if len(self.payload) > 65535:
            raise ValueError("payload longer than 65535 bytes")


def packet_from_json(obj: dict) -> Packet:
    payload_hex = obj.get("payload_hex", "")
    if len(payload_hex) % 2:
        raise ValueError("payload_hex must have even length")
    return Packet(
        ts=parse_timestamp(obj["ts"]),
        proto=obj["proto"],
        src_ip=ipaddress.IPv4Address(obj["src_ip"]),
        src_port=int(obj["src_port"]),
        dst_ip=ipaddress.IPv4Address(obj["dst_ip"]),
        dst_port=int(obj["dst_port"]),
        payload=bytes.fromhex(payload_hex),
    )


def packet_to_json(p: Packet) -> dict:
    return {
        "ts": format_timestamp(p.ts),
        "proto": p.proto,
        "src_ip": str(p.src_ip),
        "src_port": p.src_port,
        "dst_ip": str(p.dst_ip),
        "dst_port": p.dst_port,
        "payload_hex": p.payload.hex(),
    }


def load_packets(text: str) -> list[Packet]:
    """Read a JSON-lines packet fixture; blank lines are skipped."""
    packets = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            packets.append(packet_from_json(json.loads(line)))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"packet fixture line {lineno}: {exc}") from exc
    return packets


def dump_packets(packets) -> str:
    return "".join(json.dumps(packet_to_json(p)) + "\n" for p in packets)


# -- interval sets -----------------------------------------------------------

def _merge(intervals):
    out = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1] + 1:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return tuple(out)


def _complement(intervals, top):
    out = []
    nxt = 0
    for lo, hi in intervals:
        if lo > nxt:
            out.append((nxt, lo - 1))
        nxt = hi + 1
    if nxt <= top:
        out.append((nxt, top))
    return tuple(out)


class _IntervalSet:
    """Membership test over merged closed integer intervals."""

    __slots__ = ("full", "starts", "ends")

    def __init__(self, intervals, top):
        intervals = _merge(intervals)
        self.full = intervals == ((0, top),)
        self.starts = [lo for lo, _ in intervals]
        self.ends = [hi for _, hi in intervals]

    def __contains__(self, x):
        if self.full:
            return True
        i = bisect.bisect_right(self.starts, x) - 1
        return i >= 0 and x <= self.ends[i]

    def __len__(self):
        return sum(hi - lo + 1 for lo, hi in zip(self.starts, self.ends))

    def values(self):
        for lo, hi in zip(self.starts, self.ends):
            yield from range(lo, hi + 1)


def _lookup(name, vars, seen):
    if name in seen:
        raise VariableTypeError(f"variable ${name} refers to itself")
    if name not in vars:
        raise UndefinedVariable(name)
    return vars[name], seen | {name}


def addr_intervals(spec: AddrSpec, vars, seen=frozenset()):
    if not isinstance(spec, AddrSpec):
        raise VariableTypeError(f"port value used as an address: {spec.render()}")
    if spec.kind == "any":
        iv = ((0, _ADDR_TOP),)
    elif spec.kind == "cidr":
        iv = _merge((int(n.network_address), int(n.broadcast_address)) for n in spec.networks)
    else:
        value, seen = _lookup(spec.name, vars, seen)
        iv = addr_intervals(value, vars, seen)
    return _complement(iv, _ADDR_TOP) if spec.negated else iv


def port_intervals(spec, vars, seen=frozenset()):
    if isinstance(spec, AddrSpec):
        # `var X any` / `var X $Y` parse as addresses but may name ports.
        if spec.kind == "any":
            return ((0, _PORT_TOP),)
        if spec.kind == "var":
            spec = PortSpec.var(spec.name, negated=spec.negated)
        else:
            raise VariableTypeError(f"address value used as a port: {spec.render()}")
    if spec.kind == "any":
        iv = ((0, _PORT_TOP),)
    elif spec.kind in ("single", "range"):
        lo = 0 if spec.lo is None else spec.lo
        hi = _PORT_TOP if spec.hi is None else spec.hi
        iv = ((lo, hi),)
    else:
        value, seen = _lookup(spec.name, vars, seen)
        iv = port_intervals(value, vars, seen)
    return _complement(iv, _PORT_TOP) if spec.negated else iv


# -- compiled rules ----------------------------------------------------------

class _ContentOp:
    __slots__ = ("length", "negated", "nocase", "offset", "depth", "distance", "literal", "regex")

    def __init__(self, spec):
        self.length = len(spec.pattern)
        self.negated = spec.negated
        self.nocase = spec.nocase
        self.offset = spec.offset or 0
        self.depth = spec.depth
        self.distance = spec.distance
        if WILDCARD in spec.pattern:
            self.literal = None
            body = b"".join(b"." if b is WILDCARD else re.escape(bytes([b])) for b in spec.pattern)
            self.regex = re.compile(body, re.DOTALL | (re.IGNORECASE if spec.nocase else 0))
        else:
            lit = bytes(spec.pattern)
            self.literal = lit.lower() if spec.nocase else lit
            self.regex = None

    def search(self, payload, lowered, lo):
        """Leftmost valid start at or after ``lo``, or -1."""
        end = len(payload)
        if self.depth is not None:
            end = min(end, self.offset + self.depth)
        if end - lo < self.length:
            return -1
        if self.literal is not None:
            return (lowered if self.nocase else payload).find(self.literal, lo, end)
        m = self.regex.search(payload, lo, end)
        return m.start() if m else -1


class CompiledRule:
    """A rule with its variables resolved, ready to test packets."""

    __slots__ = ("rule", "protocol", "src", "sport", "dst", "dport", "bidirectional",
                 "ops", "dsizes", "needs_lower", "backtrack")

    def __init__(self, rule: Rule, vars):
        self.rule = rule
        self.protocol = rule.protocol
        self.src = _IntervalSet(addr_intervals(rule.src_addr, vars), _ADDR_TOP)
        self.sport = _IntervalSet(port_intervals(rule.src_port, vars), _PORT_TOP)
        self.dst = _IntervalSet(addr_intervals(rule.dst_addr, vars), _ADDR_TOP)
        self.dport = _IntervalSet(port_intervals(rule.dst_port, vars), _PORT_TOP)
        self.bidirectional = rule.direction == BIDIRECTIONAL
        self.ops = [_ContentOp(c) for c in rule.contents]
        self.dsizes = [o for o in rule.options if isinstance(o, Dsize)]
        self.needs_lower = any(op.nocase and op.literal is not None for op in self.ops)
        # Leftmost positions are always the most permissive choice for later
        # positive contents, but not for a later negated content measured by
        # distance: there a later position of an earlier content may succeed.
        self.backtrack = False
        seen_positive = False
        for op in self.ops:
            if op.negated and op.distance is not None and seen_positive:
                self.backtrack = True
            seen_positive = seen_positive or not op.negated

    def _side(self, addr_set, port_set, ip, port, icmp):
        if ip not in addr_set:
            return False
        # icmp has no ports: only an unrestricted port condition holds.
        return port_set.full if icmp else port in port_set

    def header_matches(self, pkt: Packet) -> bool:
        if self.protocol != "ip" and self.protocol != pkt.proto:
            return False
        icmp = pkt.proto == "icmp"
        s, d = int(pkt.src_ip), int(pkt.dst_ip)
        if (self._side(self.src, self.sport, s, pkt.src_port, icmp)
                and self._side(self.dst, self.dport, d, pkt.dst_port, icmp)):
            return True
        return (self.bidirectional
                and self._side(self.src, self.sport, d, pkt.dst_port, icmp)
                and self._side(self.dst, self.dport, s, pkt.src_port, icmp))

    def payload_matches(self, payload: bytes, lowered: bytes = None) -> bool:
        for d in self.dsizes:
            if not d.holds(len(payload)):
                return False
        if self.needs_lower and lowered is None:
            lowered = payload.lower()
        if self.backtrack:
            return self._resolve(payload, lowered, 0, 0, {})
        prev_end = 0
        for op in self.ops:
            lo = op.offset
            if op.distance is not None:
                lo = max(lo, prev_end + op.distance)
            pos = op.search(payload, lowered, lo)
            if op.negated:
                if pos >= 0:
                    return False
            elif pos < 0:
                return False
            else:
                prev_end = pos + op.length
        return True

    def _resolve(self, payload, lowered, i, prev_end, memo):
        """True if contents ``i..`` hold for some choice of positive match positions."""
        if i == len(self.ops):
            return True
        key = (i, prev_end)
        if key in memo:
            return memo[key]
        op = self.ops[i]
        lo = op.offset
        if op.distance is not None:
            lo = max(lo, prev_end + op.distance)
        pos = op.search(payload, lowered, lo)
        if op.negated:
            ok = pos < 0 and self._resolve(payload, lowered, i + 1, prev_end, memo)
        else:
            ok = False
            while pos >= 0 and not ok:
                ok = self._resolve(payload, lowered, i + 1, pos + op.length, memo)
                pos = op.search(payload, lowered, pos + 1)
        memo[key] = ok
        return ok

    def matches(self, pkt: Packet, lowered: bytes = None) -> bool:
        return self.header_matches(pkt) and self.payload_matches(pkt.payload, lowered)

    def anchor(self):
        """``(nocase, 3-byte gram)`` every matching payload must contain, or None."""
        best = None
        for op, spec in zip(self.ops, self.rule.contents):
            if op.negated:
                continue
            run = []
            for b in list(spec.pattern) + [WILDCARD]:
                if b is WILDCARD:
                    if len(run) >= _ANCHOR_LEN and (best is None or len(run) > len(best[1])):
                        best = (op.nocase, bytes(run))
                    run = []
                else:
                    run.append(b)
        if best is None:
            return None
        nocase, run = best
        gram = run[:_ANCHOR_LEN]
        return (nocase, gram.lower() if nocase else gram)


def rule_matches(rule: Rule, packet: Packet, vars=None) -> bool:
    return CompiledRule(rule, vars or {}).matches(packet)


def alert_for(rule: Rule, packet: Packet) -> Alert:
    return Alert(
        ts=packet.ts,
        msg=rule.msg or "",
        priority=rule.priority or 1,
        protocol=packet.proto,
        src_ip=packet.src_ip,
        src_port=packet.src_port,
        dst_ip=packet.dst_ip,
        dst_port=packet.dst_port,
        sid=rule.sid,
        rev=rule.rev,
    )


class Detector:
    """Evaluates packets against a fixed rule list in file order."""

    def __init__(self, rules, vars=None):
        vars = vars or {}
        # Dynamic rules only fire once activated; without chaining they stay dormant.
        self.compiled = [CompiledRule(r, vars) for r in rules if r.action != "dynamic"]
        self._by_port = {}
        self._wild = {}
        self._raw_anchor = {}
        self._nocase_anchor = {}
        for idx, cr in enumerate(self.compiled):
            anchor = cr.anchor()
            if anchor is not None:
                nocase, gram = anchor
                (self._nocase_anchor if nocase else self._raw_anchor).setdefault(gram, []).append(idx)
            elif not cr.bidirectional and len(cr.dport) <= _MAX_INDEXED_PORTS:
                for port in cr.dport.values():
                    self._by_port.setdefault((cr.protocol, port), []).append(idx)
            else:
                self._wild.setdefault(cr.protocol, []).append(idx)
        self._raw_keys = frozenset(self._raw_anchor)
        self._nocase_keys = frozenset(self._nocase_anchor)

    def candidates(self, pkt: Packet, lowered: bytes) -> list[int]:
        found = []
        for proto in (pkt.proto, "ip"):
            found.extend(self._wild.get(proto, ()))
            found.extend(self._by_port.get((proto, pkt.dst_port), ()))
        payload = pkt.payload
        if len(payload) >= _ANCHOR_LEN:
            rng = range(len(payload) - _ANCHOR_LEN + 1)
            if self._raw_keys:
                for gram in self._raw_keys & {payload[i:i + _ANCHOR_LEN] for i in rng}:
                    found.extend(self._raw_anchor[gram])
            if self._nocase_keys:
                for gram in self._nocase_keys & {lowered[i:i + _ANCHOR_LEN] for i in rng}:
                    found.extend(self._nocase_anchor[gram])
        return sorted(set(found))

    def matching(self, pkt: Packet, first_only: bool = False):
        """Yield matching rules in file order."""
        lowered = pkt.payload.lower()
        for idx in self.candidates(pkt, lowered):
            cr = self.compiled[idx]
            if cr.matches(pkt, lowered):
                yield cr.rule
                if first_only:
                    return

    def detect(self, pkt: Packet, mode: str = FIRST_MATCH) -> list[Alert]:
        if mode == FIRST_MATCH:
            for rule in self.matching(pkt, first_only=True):
                # The first matching rule decides, even when its action writes nothing.
                return [alert_for(rule, pkt)] if rule.action in ALERTING_ACTIONS else []
            return []
        if mode == ALL_MATCHES:
            return [alert_for(r, pkt) for r in self.matching(pkt) if r.action in ALERTING_ACTIONS]
        raise ValueError(f"unknown match mode {mode!r}")


def run_detection(rules, packets, vars=None, mode: str = FIRST_MATCH) -> list[Alert]:
    if mode not in MATCH_MODES:
        raise ValueError(f"unknown match mode {mode!r}")
    detector = Detector(rules, vars)
    alerts = []
    for pkt in packets:
        alerts.extend(detector.detect(pkt, mode))
    return alerts
