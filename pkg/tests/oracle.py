"""Brute-force reference evaluator, written without reusing matcher internals.

Every condition is decided by direct enumeration: address membership through
``ipaddress`` containment, ports by range checks, content by trying every
start position byte by byte and every combination of positions across
contents.
"""

import functools

from sigforge.rule_model import AddrSpec, Dsize, PortSpec


def _fold(b):
    return b + 32 if 65 <= b <= 90 else b


def addr_ok(spec, ip, vars):
    if spec.kind == "any":
        hit = True
    elif spec.kind == "var":
        hit = addr_ok(vars[spec.name], ip, vars)
    else:
        hit = any(ip in net for net in spec.networks)
    return hit != spec.negated


def port_ok(spec, port, vars):
    if isinstance(spec, AddrSpec):
        if spec.kind == "any":
            return True
        spec = PortSpec.var(spec.name, negated=spec.negated)
    if spec.kind == "any":
        hit = True
    elif spec.kind == "var":
        hit = port_ok(vars[spec.name], port, vars)
    else:
        lo = spec.lo if spec.lo is not None else 0
        hi = spec.hi if spec.hi is not None else 65535
        hit = lo <= port <= hi
    return hit != spec.negated


class Oracle:
    def __init__(self, vars):
        self.vars = vars
        self._all_ports = functools.lru_cache(maxsize=None)(self._admits_all_ports)

    def _admits_all_ports(self, spec):
        return all(port_ok(spec, p, self.vars) for p in range(65536))

    def side_ok(self, addr, port_spec, ip, port, icmp):
        if not addr_ok(addr, ip, self.vars):
            return False
        if icmp:
            return self._all_ports(port_spec)
        return port_ok(port_spec, port, self.vars)

    def header(self, rule, pkt):
        if rule.protocol != "ip" and rule.protocol != pkt.proto:
            return False
        icmp = pkt.proto == "icmp"
        fwd = (self.side_ok(rule.src_addr, rule.src_port, pkt.src_ip, pkt.src_port, icmp)
               and self.side_ok(rule.dst_addr, rule.dst_port, pkt.dst_ip, pkt.dst_port, icmp))
        if fwd:
            return True
        if rule.direction == "<>":
            return (self.side_ok(rule.src_addr, rule.src_port, pkt.dst_ip, pkt.dst_port, icmp)
                    and self.side_ok(rule.dst_addr, rule.dst_port, pkt.src_ip, pkt.src_port, icmp))
        return False

    @staticmethod
    def positions(spec, payload, lo):
        n = len(spec.pattern)
        offset = spec.offset or 0
        found = []
        for s in range(len(payload)):
            if s < lo or s < offset or s + n > len(payload):
                continue
            if spec.depth is not None and s + n > offset + spec.depth:
                continue
            ok = True
            for k, want in enumerate(spec.pattern):
                if want is None:
                    continue
                got = payload[s + k]
                if spec.nocase:
                    got, want = _fold(got), _fold(want)
                if got != want:
                    ok = False
                    break
            if ok:
                found.append(s)
        return found

    def payload(self, rule, payload):
        for opt in rule.options:
            if isinstance(opt, Dsize):
                n = len(payload)
                ok = {"<": n < opt.value, ">": n > opt.value, "=": n == opt.value,
                      "<>": opt.upper is not None and opt.value <= n <= opt.upper}[opt.op]
                if not ok:
                    return False
        return self._contents(list(rule.contents), payload, 0)

    def _contents(self, specs, payload, prev_end):
        # Some choice of positions for the positive contents must satisfy
        # every condition; negated contents are judged from the last positive end.
        if not specs:
            return True
        spec, rest = specs[0], specs[1:]
        lo = 0 if spec.distance is None else prev_end + spec.distance
        found = self.positions(spec, payload, lo)
        if spec.negated:
            return not found and self._contents(rest, payload, prev_end)
        return any(self._contents(rest, payload, s + len(spec.pattern)) for s in found)

    def matches(self, rule, pkt):
        return self.header(rule, pkt) and self.payload(rule, pkt.payload)
