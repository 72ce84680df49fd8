"""Reading and writing ``.rules`` files and ``var`` configuration.

Parsing is lenient where Snort rule sets are: ``msg`` and ``content`` values
may be quoted or bare, unknown options survive as :class:`Opaque`, and a
line that cannot be parsed becomes a diagnostic instead of an exception.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass
from typing import Union

from .rule_model import (
    ACTIONS,
    DIRECTIONS,
    PROTOCOLS,
    WILDCARD,
    AddrSpec,
    Classtype,
    Content,
    ContentSpec,
    Dsize,
    Flow,
    Msg,
    Opaque,
    PortSpec,
    Priority,
    Reference,
    Regex,
    Rev,
    Rule,
    RuleModelError,
    Sid,
    tag_from_msg,
)


class RuleParseError(ValueError):
    pass


class VarConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    reason: str
    text: str = ""

    def __str__(self):
        return f"line {self.line}: {self.reason}"


VarTable = dict  # name -> AddrSpec | PortSpec

_HEADER_TOKEN = re.compile(r"!?\[[^\]]*\]|\S+")
_HEX = set("0123456789abcdefABCDEF")
_U32 = 2**32 - 1


def parse_pattern(raw: str) -> tuple:
    """Decode the inside of a content string into pattern bytes.

    Inside a ``|..|`` run, ``?`` and the nested token ``|?|`` both mean
    "any byte". Outside a run, backslash escapes the next character.
    """
    return decode_pattern(raw)[0]


def decode_pattern(raw: str) -> tuple[tuple, tuple]:
    """Like :func:`parse_pattern`, also returning which bytes were written in hex."""
    out = []
    as_hex = []
    i, n = 0, len(raw)
    in_hex = False
    while i < n:
        c = raw[i]
        if not in_hex:
            if c == "\\":
                if i + 1 >= n:
                    raise RuleParseError("dangling backslash in content")
                enc = raw[i + 1].encode("utf-8")
                out.extend(enc)
                as_hex.extend([False] * len(enc))
                i += 2
            elif c == "|":
                in_hex = True
                i += 1
            else:
                enc = c.encode("utf-8")
                out.extend(enc)
                as_hex.extend([False] * len(enc))
                i += 1
        else:
            if raw.startswith("|?|", i):
                out.append(WILDCARD)
                as_hex.append(False)
                i += 3
            elif c == "|":
                in_hex = False
                i += 1
            elif c == "?":
                out.append(WILDCARD)
                as_hex.append(False)
                i += 1
            elif c.isspace():
                i += 1
            elif c in _HEX and i + 1 < n and raw[i + 1] in _HEX:
                out.append(int(raw[i:i + 2], 16))
                as_hex.append(True)
                i += 2
            else:
                raise RuleParseError(f"bad hex in content near {raw[i:i + 4]!r}")
    if in_hex:
        raise RuleParseError("unterminated hex run in content")
    if not out:
        raise RuleParseError("empty content")
    return tuple(out), tuple(as_hex)


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == '"' and value[-1] == '"':
        return value[1:-1]
    return value


def _unescape(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s)


def _split_options(body: str) -> list[str]:
    opts = []
    cur = []
    in_quote = False
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\" and i + 1 < len(body):
            cur.append(body[i:i + 2])
            i += 2
            continue
        if c == '"':
            in_quote = not in_quote
        if c == ";" and not in_quote:
            opts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(c)
        i += 1
    if in_quote:
        raise RuleParseError("unterminated quoted string in options")
    tail = "".join(cur).strip()
    if tail:
        opts.append(tail)
    return [o for o in opts if o]


def parse_addr(token: str) -> AddrSpec:
    negated = token.startswith("!")
    body = token[1:] if negated else token
    if body == "any":
        if negated:
            raise RuleParseError("'!any' matches nothing")
        return AddrSpec.any()
    if body.startswith("$"):
        return AddrSpec.var(body[1:], negated=negated)
    if body.startswith("[") and body.endswith("]"):
        items = [x.strip() for x in body[1:-1].split(",") if x.strip()]
    else:
        items = [body]
    nets = []
    for item in items:
        try:
            nets.append(ipaddress.IPv4Network(item, strict=False))
        except ValueError as exc:
            raise RuleParseError(f"bad address {item!r}") from exc
    if not nets:
        raise RuleParseError(f"empty address list {token!r}")
    return AddrSpec("cidr", networks=tuple(nets), negated=negated)


def _port_number(s: str) -> int:
    if not s.isdigit():
        raise RuleParseError(f"bad port {s!r}")
    return int(s)


def parse_port(token: str) -> PortSpec:
    negated = token.startswith("!")
    body = token[1:] if negated else token
    try:
        if body == "any":
            if negated:
                raise RuleParseError("'!any' matches nothing")
            return PortSpec.any()
        if body.startswith("$"):
            return PortSpec.var(body[1:], negated=negated)
        if "," in body or body.startswith("["):
            raise RuleParseError(f"port lists are not supported: {token!r}")
        if ":" in body:
            lo, _, hi = body.partition(":")
            return PortSpec.range(_port_number(lo) if lo else None,
                                  _port_number(hi) if hi else None, negated=negated)
        return PortSpec.single(_port_number(body), negated=negated)
    except RuleModelError as exc:
        raise RuleParseError(str(exc)) from exc


def _parse_int(name, value, lo=0, hi=_U32):
    if value is None or not re.fullmatch(r"-?\d+", value.strip()):
        raise RuleParseError(f"{name} needs an integer, got {value!r}")
    v = int(value)
    if not lo <= v <= hi:
        raise RuleParseError(f"{name} value {v} out of range")
    return v


def _parse_dsize(value):
    if value is None:
        raise RuleParseError("dsize needs a value")
    v = value.replace(" ", "")
    m = re.fullmatch(r"(\d+)<>(\d+)", v)
    if m:
        return Dsize("<>", int(m[1]), int(m[2]))
    m = re.fullmatch(r"([<>=]?)(\d+)", v)
    if not m:
        raise RuleParseError(f"bad dsize {value!r}")
    return Dsize(m[1] or "=", int(m[2]))


_MODIFIERS = ("nocase", "offset", "depth", "distance")


def _parse_options(parts: list[str]) -> list:
    options = []
    last_content = None  # index into options of the most recent Content
    for part in parts:
        name, sep, value = part.partition(":")
        name = name.strip()
        value = value.strip() if sep else None

        if name in ("content", "uricontent"):
            if value is None:
                raise RuleParseError(f"{name} needs a value")
            negated = value.startswith("!")
            if negated:
                value = value[1:].lstrip()
            pattern, as_hex = decode_pattern(_unquote(value))
            spec = ContentSpec(pattern, kind=name, negated=negated, hex_bytes=as_hex)
            options.append(Content(spec))
            last_content = len(options) - 1
        elif name in _MODIFIERS and last_content is not None:
            spec = options[last_content].spec
            if name == "nocase":
                if value is not None:
                    raise RuleParseError("nocase takes no value")
                changes = {"nocase": True}
            elif name == "distance":
                changes = {"distance": _parse_int(name, value, lo=-65535, hi=65535)}
            else:
                changes = {name: _parse_int(name, value, hi=65535)}
            if getattr(spec, name) not in (None, False):
                raise RuleParseError(f"duplicate {name} for one content")
            try:
                options[last_content] = Content(ContentSpec(**{**spec.__dict__, **changes}))
            except RuleModelError as exc:
                raise RuleParseError(str(exc)) from exc
        elif name == "msg":
            if value is None:
                raise RuleParseError("msg needs a value")
            options.append(Msg(_unescape(_unquote(value))))
        elif name == "sid":
            options.append(Sid(_parse_int(name, value)))
        elif name == "rev":
            options.append(Rev(_parse_int(name, value)))
        elif name == "priority":
            options.append(Priority(_parse_int(name, value, lo=1)))
        elif name == "dsize":
            options.append(_parse_dsize(value))
        elif name == "classtype" and value:
            options.append(Classtype(value))
        elif name == "flow" and value:
            options.append(Flow(value))
        elif name == "reference" and value:
            options.append(Reference(value))
        elif name == "regex" and value is None:
            options.append(Regex())
        else:
            if not name or not re.fullmatch(r"[A-Za-z_][\w.-]*", name):
                raise RuleParseError(f"bad option {part!r}")
            options.append(Opaque(name, value))
    return options


def parse_rule(text: str) -> Rule:
    """Parse one rule line; raises :class:`RuleParseError`."""
    text = text.strip()
    open_idx = text.find("(")
    if open_idx < 0 or not text.endswith(")"):
        raise RuleParseError("rule options must be enclosed in parentheses")
    tokens = _HEADER_TOKEN.findall(text[:open_idx])
    if len(tokens) != 7:
        raise RuleParseError(f"rule header needs 7 fields, found {len(tokens)}")
    action, proto, src, sport, direction, dst, dport = tokens
    if action not in ACTIONS:
        raise RuleParseError(f"unknown action {action!r}")
    if proto not in PROTOCOLS:
        raise RuleParseError(f"unknown protocol {proto!r}")
    if direction not in DIRECTIONS:
        raise RuleParseError(f"unknown direction {direction!r}")
    options = _parse_options(_split_options(text[open_idx + 1:-1]))
    try:
        rule = Rule(action, proto, parse_addr(src), parse_port(sport), direction,
                    parse_addr(dst), parse_port(dport), tuple(options))
    except RuleModelError as exc:
        raise RuleParseError(str(exc)) from exc
    tag = tag_from_msg(rule.msg)
    if not tag.is_original:
        rule = Rule(**{**rule.__dict__, "origin": tag})
    return rule


def parse_rules_file(text: str) -> tuple[list[Rule], list[ParseDiagnostic]]:
    rules, diags = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            rules.append(parse_rule(stripped))
        except (RuleParseError, RuleModelError) as exc:
            diags.append(ParseDiagnostic(lineno, str(exc), stripped))
    return rules, diags


def serialize_rule(rule: Rule) -> str:
    opts = [s for opt in rule.options for s in opt.render()]
    if not opts:
        return f"{rule.header()} ()"
    return f"{rule.header()} ({'; '.join(opts)};)"


def serialize_rules(rules) -> str:
    return "".join(serialize_rule(r) + "\n" for r in rules)


def _parse_var_value(value: str) -> Union[AddrSpec, PortSpec]:
    body = value[1:] if value.startswith("!") else value
    if body == "any" or body.startswith("$"):
        # Type is decided at lookup; an address spec also serves as a port reference.
        return parse_addr(value)
    if re.fullmatch(r"\d*:?\d*", body) and body != ":":
        return parse_port(value)
    return parse_addr(value)


def parse_var_config(text: str) -> VarTable:
    """Read ``var NAME VALUE`` lines (``ipvar``/``portvar`` are accepted too)."""
    table: VarTable = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split(None, 2)
        if len(parts) != 3 or parts[0] not in ("var", "ipvar", "portvar"):
            raise VarConfigError(f"line {lineno}: expected 'var NAME VALUE', got {stripped!r}")
        _, name, value = parts
        if name in table:
            raise VarConfigError(f"line {lineno}: variable {name} defined twice")
        try:
            table[name] = _parse_var_value(value.replace(" ", ""))
        except (RuleParseError, RuleModelError) as exc:
            raise VarConfigError(f"line {lineno}: variable {name}: {exc}") from exc
    return table
