"""In-memory model of Snort rules.

Everything here is an immutable value type. Text formats live in
:mod:`sigforge.rule_parser`; this module only knows how to render the pieces
it owns (address/port specs, content patterns, single options) so that the
parser and the generaliser agree on one canonical spelling.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, field, replace
from typing import Optional, Union

ACTIONS = ("alert", "log", "pass", "activate", "dynamic")
PROTOCOLS = ("tcp", "udp", "icmp", "ip")
TO_DEST = "->"
BIDIRECTIONAL = "<>"
DIRECTIONS = (TO_DEST, BIDIRECTIONAL)

# A pattern is a tuple of byte values; ``WILDCARD`` matches any byte.
WILDCARD = None
PatternByte = Optional[int]

# Literal bytes that must not appear bare inside a quoted content string.
# '?' is included so that a literal question mark can never be confused with
# the wildcard token.
_RESERVED = frozenset(b'"|;\\?')

TAG_MARKER = "FuzzRuleId"


class RuleModelError(ValueError):
    pass


@dataclass(frozen=True)
class AddrSpec:
    """Source or destination address condition.

    ``kind`` is ``"any"``, ``"var"`` (``name`` holds the variable) or
    ``"cidr"`` (``networks`` holds one or more IPv4 networks).
    """

    kind: str = "any"
    name: Optional[str] = None
    networks: tuple[ipaddress.IPv4Network, ...] = ()
    negated: bool = False

    def __post_init__(self):
        if self.kind == "any":
            if self.negated:
                raise RuleModelError("'any' address cannot be negated")
        elif self.kind == "var":
            if not self.name:
                raise RuleModelError("variable address needs a name")
        elif self.kind == "cidr":
            if not self.networks:
                raise RuleModelError("cidr address needs at least one network")
        else:
            raise RuleModelError(f"unknown address kind {self.kind!r}")

    @classmethod
    def any(cls) -> AddrSpec:
        return cls()

    @classmethod
    def var(cls, name: str, negated: bool = False) -> AddrSpec:
        return cls("var", name=name, negated=negated)

    @classmethod
    def cidr(cls, *nets: str, negated: bool = False) -> AddrSpec:
        return cls("cidr", networks=tuple(ipaddress.IPv4Network(n, strict=False) for n in nets),
                   negated=negated)

    @property
    def is_any(self) -> bool:
        return self.kind == "any"

    def inverted(self) -> AddrSpec:
        return replace(self, negated=not self.negated)

    def render(self) -> str:
        if self.kind == "any":
            return "any"
        if self.kind == "var":
            body = "$" + self.name
        else:
            parts = [str(n.network_address) if n.prefixlen == 32 else str(n) for n in self.networks]
            body = parts[0] if len(parts) == 1 else "[" + ",".join(parts) + "]"
        return ("!" if self.negated else "") + body


@dataclass(frozen=True)
class PortSpec:
    """Source or destination port condition.

    Kinds: ``"any"``, ``"var"``, ``"single"`` (``lo == hi``) and ``"range"``
    where either bound may be ``None`` for an open range (``1024:``, ``:1023``).
    """

    kind: str = "any"
    name: Optional[str] = None
    lo: Optional[int] = None
    hi: Optional[int] = None
    negated: bool = False

    def __post_init__(self):
        if self.kind == "any":
            if self.negated:
                raise RuleModelError("'any' port cannot be negated")
        elif self.kind == "var":
            if not self.name:
                raise RuleModelError("variable port needs a name")
        elif self.kind in ("single", "range"):
            for p in (self.lo, self.hi):
                if p is not None and not 0 <= p <= 65535:
                    raise RuleModelError(f"port {p} out of range")
            if self.kind == "single" and (self.lo is None or self.lo != self.hi):
                raise RuleModelError("single port needs lo == hi")
            if self.kind == "range":
                if self.lo is None and self.hi is None:
                    raise RuleModelError("port range needs at least one bound")
                if self.lo is not None and self.hi is not None and self.lo > self.hi:
                    raise RuleModelError(f"port range {self.lo}:{self.hi} is reversed")
        else:
            raise RuleModelError(f"unknown port kind {self.kind!r}")

    @classmethod
    def any(cls) -> PortSpec:
        return cls()

    @classmethod
    def var(cls, name: str, negated: bool = False) -> PortSpec:
        return cls("var", name=name, negated=negated)

    @classmethod
    def single(cls, port: int, negated: bool = False) -> PortSpec:
        return cls("single", lo=port, hi=port, negated=negated)

    @classmethod
    def range(cls, lo: Optional[int], hi: Optional[int], negated: bool = False) -> PortSpec:
        return cls("range", lo=lo, hi=hi, negated=negated)

    @property
    def is_any(self) -> bool:
        return self.kind == "any"

    def inverted(self) -> PortSpec:
        return replace(self, negated=not self.negated)

    def render(self) -> str:
        if self.kind == "any":
            return "any"
        if self.kind == "var":
            body = "$" + self.name
        elif self.kind == "single":
            body = str(self.lo)
        else:
            body = ("" if self.lo is None else str(self.lo)) + ":" + ("" if self.hi is None else str(self.hi))
        return ("!" if self.negated else "") + body


def _is_bare(b: int) -> bool:
    return 0x20 <= b < 0x7F and b not in _RESERVED


def render_pattern(pattern, hex_bytes=None) -> str:
    """Render a pattern in quoted Snort content syntax.

    Printable bytes are written bare unless ``hex_bytes`` flags them,
    everything else goes into ``|..|`` hex runs. A wildcard is the token
    ``|?|``; when it sits next to hex bytes it joins their run
    (``|00 00 |?||``), otherwise it stands alone (``HTTP/1.|?| 403``).
    """
    if not pattern:
        raise RuleModelError("empty content pattern")
    if hex_bytes is None:
        hex_bytes = [False] * len(pattern)
    out = []
    run = []

    def flush():
        if not run:
            return
        if all(b is WILDCARD for b in run):
            out.append("|?|" * len(run))
        else:
            out.append("|" + " ".join("|?|" if b is WILDCARD else f"{b:02x}" for b in run) + "|")
        run.clear()

    for b, as_hex in zip(pattern, hex_bytes):
        if b is not WILDCARD and _is_bare(b) and not as_hex:
            flush()
            out.append(chr(b))
        else:
            run.append(b)
    flush()
    return '"' + "".join(out) + '"'


@dataclass(frozen=True)
class ContentSpec:
    """A ``content`` or ``uricontent`` condition plus its modifiers.

    ``hex_bytes`` only records which bytes were written in ``|..|`` notation
    so that rendering keeps the rule's original spelling; it takes no part in
    equality.
    """

    pattern: tuple
    kind: str = "content"
    negated: bool = False
    nocase: bool = False
    offset: Optional[int] = None
    depth: Optional[int] = None
    distance: Optional[int] = None
    hex_bytes: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("content", "uricontent"):
            raise RuleModelError(f"unknown content kind {self.kind!r}")
        if not self.pattern:
            raise RuleModelError("content pattern must not be empty")
        for b in self.pattern:
            if b is not WILDCARD and not (isinstance(b, int) and 0 <= b <= 255):
                raise RuleModelError(f"bad pattern byte {b!r}")
        if self.offset is not None and self.offset < 0:
            raise RuleModelError("offset must be non-negative")
        if self.depth is not None and self.depth < 1:
            raise RuleModelError("depth must be positive")
        flags = self.hex_bytes if self.hex_bytes is not None else (False,) * len(self.pattern)
        if len(flags) != len(self.pattern):
            raise RuleModelError("hex_bytes must match the pattern length")
        flags = tuple(b is not WILDCARD and (bool(f) or not _is_bare(b)) for b, f in zip(self.pattern, flags))
        object.__setattr__(self, "hex_bytes", flags)

    @classmethod
    def literal(cls, data: Union[bytes, str], **kw) -> ContentSpec:
        if isinstance(data, str):
            data = data.encode("latin-1")
        return cls(tuple(data), **kw)

    def __len__(self):
        return len(self.pattern)

    def wildcarded(self, pos: int) -> ContentSpec:
        pattern = self.pattern[:pos] + (WILDCARD,) + self.pattern[pos + 1:]
        return replace(self, pattern=pattern)

    def sliced(self, start: int, stop: int) -> ContentSpec:
        return replace(self, pattern=self.pattern[start:stop], hex_bytes=self.hex_bytes[start:stop])

    def render_options(self) -> list[str]:
        """The option strings this condition occupies, in canonical order."""
        opts = [f"{self.kind}:{'!' if self.negated else ''}{render_pattern(self.pattern, self.hex_bytes)}"]
        if self.offset is not None:
            opts.append(f"offset:{self.offset}")
        if self.depth is not None:
            opts.append(f"depth:{self.depth}")
        if self.distance is not None:
            opts.append(f"distance:{self.distance}")
        if self.nocase:
            opts.append("nocase")
        return opts


def escape_text(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"').replace(";", "\\;")


@dataclass(frozen=True)
class Content:
    spec: ContentSpec

    def render(self) -> list[str]:
        return self.spec.render_options()


@dataclass(frozen=True)
class Msg:
    text: str

    def render(self):
        return [f'msg:"{escape_text(self.text)}"']


@dataclass(frozen=True)
class Sid:
    value: int

    def render(self):
        return [f"sid:{self.value}"]


@dataclass(frozen=True)
class Rev:
    value: int

    def render(self):
        return [f"rev:{self.value}"]


@dataclass(frozen=True)
class Priority:
    value: int

    def __post_init__(self):
        if self.value < 1:
            raise RuleModelError("priority starts at 1")

    def render(self):
        return [f"priority:{self.value}"]


DSIZE_OPS = ("<", ">", "=", "<>")


@dataclass(frozen=True)
class Dsize:
    """Payload length test; ``op`` is ``<``, ``>``, ``=`` or ``<>`` (inclusive range)."""

    op: str
    value: int
    upper: Optional[int] = None

    def __post_init__(self):
        if self.op not in DSIZE_OPS:
            raise RuleModelError(f"unknown dsize comparator {self.op!r}")
        if (self.op == "<>") != (self.upper is not None):
            raise RuleModelError("dsize range needs both bounds")

    def holds(self, size: int) -> bool:
        if self.op == "<":
            return size < self.value
        if self.op == ">":
            return size > self.value
        if self.op == "=":
            return size == self.value
        return self.value <= size <= self.upper

    def render(self):
        if self.op == "<>":
            return [f"dsize:{self.value}<>{self.upper}"]
        if self.op == "=":
            return [f"dsize:{self.value}"]
        return [f"dsize:{self.op}{self.value}"]


@dataclass(frozen=True)
class Classtype:
    value: str

    def render(self):
        return [f"classtype:{self.value}"]


@dataclass(frozen=True)
class Flow:
    value: str

    def render(self):
        return [f"flow:{self.value}"]


@dataclass(frozen=True)
class Reference:
    value: str

    def render(self):
        return [f"reference:{self.value}"]


@dataclass(frozen=True)
class Regex:
    def render(self):
        return ["regex"]


@dataclass(frozen=True)
class Opaque:
    """An option this toolchain does not interpret; kept verbatim."""

    name: str
    value: Optional[str] = None

    def render(self):
        return [self.name if self.value is None else f"{self.name}:{self.value}"]


RuleOption = Union[Content, Msg, Sid, Rev, Priority, Dsize, Classtype, Flow, Reference, Regex, Opaque]


_TAG_KINDS = (
    "original", "inv_src_port", "inv_dst_port", "inv_src_ip", "inv_dst_ip", "inv_protocol",
    "inv_direction", "inv_content", "inv_region_before", "inv_region_after",
    "cor", "urr", "trim_head", "trim_tail",
)
_SIMPLE_CODES = {
    "inv_src_port": "inv:sport",
    "inv_dst_port": "inv:dport",
    "inv_src_ip": "inv:sip",
    "inv_dst_ip": "inv:dip",
    "inv_direction": "inv:dir",
}
_INDEXED_CODES = {
    "inv_content": "inv:content",
    "inv_region_before": "inv:before",
    "inv_region_after": "inv:after",
    "trim_head": "trim:head",
    "trim_tail": "trim:tail",
}
_CODE_RE = re.compile(
    r"^(?:(?P<simple>inv:(?:sport|dport|sip|dip|dir))"
    r"|inv:proto=(?P<proto>tcp|udp|icmp)"
    r"|(?P<indexed>inv:content|inv:before|inv:after|trim:head|trim:tail)\[(?P<i1>\d+)\]"
    r"|(?P<wild>cor|urr)\[(?P<i2>\d+),(?P<p>\d+)\])$"
)


@dataclass(frozen=True)
class GenTag:
    """Which transformation produced a rule (``original`` for none)."""

    kind: str = "original"
    index: Optional[int] = None
    position: Optional[int] = None
    proto: Optional[str] = None

    def __post_init__(self):
        if self.kind not in _TAG_KINDS:
            raise RuleModelError(f"unknown tag kind {self.kind!r}")
        needs_index = self.kind in _INDEXED_CODES or self.kind in ("cor", "urr")
        if needs_index != (self.index is not None):
            raise RuleModelError(f"tag {self.kind} index mismatch")
        if (self.kind in ("cor", "urr")) != (self.position is not None):
            raise RuleModelError(f"tag {self.kind} position mismatch")
        if (self.kind == "inv_protocol") != (self.proto is not None):
            raise RuleModelError(f"tag {self.kind} protocol mismatch")

    @property
    def is_original(self) -> bool:
        return self.kind == "original"

    @property
    def code(self) -> str:
        if self.kind == "original":
            return "original"
        if self.kind in _SIMPLE_CODES:
            return _SIMPLE_CODES[self.kind]
        if self.kind == "inv_protocol":
            return f"inv:proto={self.proto}"
        if self.kind in _INDEXED_CODES:
            return f"{_INDEXED_CODES[self.kind]}[{self.index}]"
        return f"{self.kind}[{self.index},{self.position}]"

    @property
    def method(self) -> str:
        """Code with the indices stripped, e.g. ``cor`` or ``inv:proto``."""
        return method_of(self.code)

    @classmethod
    def from_code(cls, code: str) -> GenTag:
        m = _CODE_RE.match(code)
        if m is None:
            raise RuleModelError(f"unrecognised tag code {code!r}")
        if m["simple"]:
            return cls({v: k for k, v in _SIMPLE_CODES.items()}[m["simple"]])
        if m["proto"]:
            return cls("inv_protocol", proto=m["proto"])
        if m["indexed"]:
            return cls({v: k for k, v in _INDEXED_CODES.items()}[m["indexed"]], index=int(m["i1"]))
        return cls(m["wild"], index=int(m["i2"]), position=int(m["p"]))

    def tag_msg(self, msg: Optional[str]) -> str:
        suffix = f"{TAG_MARKER} {self.code}"
        return f"{msg} {suffix}" if msg else suffix


ORIGINAL = GenTag()


def method_of(code: str) -> str:
    return re.split(r"[\[(=]", code, maxsplit=1)[0].strip()


def split_tag(msg: Optional[str]) -> tuple[Optional[str], Optional[str]]:
    """Split ``"text FuzzRuleId code"`` into ``("text", "code")``.

    Returns ``(msg, None)`` when no marker is present. The code is returned
    raw; it may be a foreign spelling that :meth:`GenTag.from_code` rejects.
    """
    if not msg:
        return msg, None
    idx = msg.rfind(TAG_MARKER)
    if idx < 0 or (idx > 0 and not msg[idx - 1].isspace()):
        return msg, None
    return msg[:idx].rstrip() or None, msg[idx + len(TAG_MARKER):].strip()


def tag_from_msg(msg: Optional[str]) -> GenTag:
    """Recover the tag embedded in a msg; unknown or absent tags give ``ORIGINAL``."""
    _, code = split_tag(msg)
    if code is None:
        return ORIGINAL
    try:
        return GenTag.from_code(code)
    except RuleModelError:
        return ORIGINAL


def has_tag(msg: Optional[str]) -> bool:
    return split_tag(msg)[1] is not None


@dataclass(frozen=True)
class Rule:
    action: str
    protocol: str
    src_addr: AddrSpec
    src_port: PortSpec
    direction: str
    dst_addr: AddrSpec
    dst_port: PortSpec
    options: tuple = ()
    origin: GenTag = field(default=ORIGINAL)

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise RuleModelError(f"unknown action {self.action!r}")
        if self.protocol not in PROTOCOLS:
            raise RuleModelError(f"unknown protocol {self.protocol!r}")
        if self.direction not in DIRECTIONS:
            raise RuleModelError(f"unknown direction {self.direction!r}")
        if not isinstance(self.options, tuple):
            object.__setattr__(self, "options", tuple(self.options))

    def _first(self, cls):
        for opt in self.options:
            if isinstance(opt, cls):
                return opt
        return None

    @property
    def msg(self) -> Optional[str]:
        opt = self._first(Msg)
        return opt.text if opt else None

    @property
    def sid(self) -> Optional[int]:
        opt = self._first(Sid)
        return opt.value if opt else None

    @property
    def rev(self) -> Optional[int]:
        opt = self._first(Rev)
        return opt.value if opt else None

    @property
    def priority(self) -> Optional[int]:
        opt = self._first(Priority)
        return opt.value if opt else None

    @property
    def contents(self) -> list[ContentSpec]:
        """Content and uricontent conditions in rule order; list index = tag index."""
        return [opt.spec for opt in self.options if isinstance(opt, Content)]

    def header(self) -> str:
        return " ".join((self.action, self.protocol, self.src_addr.render(), self.src_port.render(),
                         self.direction, self.dst_addr.render(), self.dst_port.render()))

    def replace_content(self, index: int, spec: ContentSpec) -> Rule:
        opts = list(self.options)
        seen = -1
        for i, opt in enumerate(opts):
            if isinstance(opt, Content):
                seen += 1
                if seen == index:
                    opts[i] = Content(spec)
                    return replace(self, options=tuple(opts))
        raise IndexError(f"rule has no content option #{index}")

    def set_option(self, opt, front: bool = False) -> Rule:
        """Replace the first option of ``opt``'s type, or add it when absent."""
        opts = list(self.options)
        for i, existing in enumerate(opts):
            if type(existing) is type(opt):
                opts[i] = opt
                return replace(self, options=tuple(opts))
        if front:
            opts.insert(0, opt)
        else:
            opts.append(opt)
        return replace(self, options=tuple(opts))
