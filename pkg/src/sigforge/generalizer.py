"""Rule generalisation: inversion variants and content wildcard variants.

Every variant differs from its original in exactly one condition, carries a
``FuzzRuleId`` tag in its msg and a demoted priority, so that alerts raised
by a variant can be told apart from alerts of the rule it came from.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

from .rule_model import (
    BIDIRECTIONAL,
    WILDCARD,
    ContentSpec,
    GenTag,
    Msg,
    Priority,
    Rule,
    Sid,
    has_tag,
)

log = logging.getLogger(__name__)

MODES = ("invert", "content", "both")
INVERTIBLE_PROTOCOLS = ("tcp", "udp", "icmp")

VARIANT_SID_BASE = 2_000_000
SIDLESS_SID_BASE = 3_000_000
OVERFLOW_SID_BASE = 4_000_000_000
VARIANTS_PER_SID = 100
_U32 = 2**32 - 1


class AlreadyGeneralised(ValueError):
    """Input already contains tagged variants; generalising again would compound tags."""

    def __init__(self, rules):
        self.rules = rules
        names = ", ".join(str(r.sid) if r.sid is not None else repr(r.msg) for r in rules[:5])
        super().__init__(f"{len(rules)} rule(s) already generalised ({names})")


@dataclass(frozen=True)
class GenConfig:
    mode: str = "both"
    priority_offset: int = 1
    min_content_len: int = 2
    emit_trims: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.priority_offset < 1:
            raise ValueError("priority_offset must be at least 1")
        if self.min_content_len < 1:
            raise ValueError("min_content_len must be at least 1")


DEFAULT_CONFIG = GenConfig()


def _finish(original: Rule, variant: Rule, tag: GenTag, cfg: GenConfig) -> Rule:
    """Stamp tag, tagged msg and demoted priority onto a variant."""
    variant = variant.set_option(Msg(tag.tag_msg(original.msg)), front=True)
    variant = variant.set_option(Priority((original.priority or 1) + cfg.priority_offset))
    return replace(variant, origin=tag)


def region_before(content: ContentSpec) -> Optional[ContentSpec]:
    """Search strictly before the original region, overlapping it by ``len - 1`` bytes."""
    offset = content.offset or 0
    if offset <= 0:
        return None
    depth = offset + len(content) - 1
    if depth <= 0:
        return None
    return replace(content, offset=0, depth=depth)


def region_after(content: ContentSpec) -> Optional[ContentSpec]:
    """Search strictly after the original region's last allowed start."""
    if content.depth is None:
        return None
    offset = (content.offset or 0) + content.depth - (len(content) - 1)
    if offset < 0:
        return None
    return replace(content, offset=offset, depth=None)


def invert_region(content: ContentSpec) -> list[ContentSpec]:
    return [c for c in (region_before(content), region_after(content)) if c is not None]


def _require_original(rule: Rule):
    if not rule.origin.is_original or has_tag(rule.msg):
        raise AlreadyGeneralised([rule])


def invert_variants(rule: Rule, cfg: GenConfig = DEFAULT_CONFIG) -> list[Rule]:
    _require_original(rule)
    out = []

    def add(variant, tag):
        out.append(_finish(rule, variant, tag, cfg))

    if not rule.src_addr.is_any:
        add(replace(rule, src_addr=rule.src_addr.inverted()), GenTag("inv_src_ip"))
    if not rule.src_port.is_any:
        add(replace(rule, src_port=rule.src_port.inverted()), GenTag("inv_src_port"))
    if not rule.dst_addr.is_any:
        add(replace(rule, dst_addr=rule.dst_addr.inverted()), GenTag("inv_dst_ip"))
    if not rule.dst_port.is_any:
        add(replace(rule, dst_port=rule.dst_port.inverted()), GenTag("inv_dst_port"))
    if rule.protocol != "ip":
        for proto in INVERTIBLE_PROTOCOLS:
            if proto != rule.protocol:
                add(replace(rule, protocol=proto), GenTag("inv_protocol", proto=proto))
    # Swapping the sides of a bidirectional rule describes the same traffic.
    if rule.direction != BIDIRECTIONAL:
        add(replace(rule, src_addr=rule.dst_addr, src_port=rule.dst_port,
                    dst_addr=rule.src_addr, dst_port=rule.src_port), GenTag("inv_direction"))
    for i, content in enumerate(rule.contents):
        add(rule.replace_content(i, replace(content, negated=not content.negated)),
            GenTag("inv_content", index=i))
        before = region_before(content)
        if before is not None:
            add(rule.replace_content(i, before), GenTag("inv_region_before", index=i))
        after = region_after(content)
        if after is not None:
            add(rule.replace_content(i, after), GenTag("inv_region_after", index=i))
    return out


def content_variants(rule: Rule, cfg: GenConfig = DEFAULT_CONFIG) -> list[Rule]:
    _require_original(rule)
    out = []
    for i, content in enumerate(rule.contents):
        # Wildcarding or trimming a negated pattern narrows the rule instead of widening it.
        if content.negated or len(content) < cfg.min_content_len:
            continue
        code = "cor" if content.kind == "content" else "urr"
        for pos, b in enumerate(content.pattern):
            if b is WILDCARD:
                continue
            variant = rule.replace_content(i, content.wildcarded(pos))
            out.append(_finish(rule, variant, GenTag(code, index=i, position=pos), cfg))
        if cfg.emit_trims and len(content) - 1 >= cfg.min_content_len:
            n = len(content)
            for kind, trimmed in (("trim_head", content.sliced(1, n)), ("trim_tail", content.sliced(0, n - 1))):
                variant = rule.replace_content(i, trimmed)
                out.append(_finish(rule, variant, GenTag(kind, index=i), cfg))
    return out


def variants(rule: Rule, cfg: GenConfig = DEFAULT_CONFIG) -> list[Rule]:
    out = []
    if cfg.mode in ("invert", "both"):
        out.extend(invert_variants(rule, cfg))
    if cfg.mode in ("content", "both"):
        out.extend(content_variants(rule, cfg))
    return out


def variant_sid(original_sid: int, ordinal: int) -> int:
    return VARIANT_SID_BASE + original_sid * VARIANTS_PER_SID + ordinal


def generalize_file(rules, cfg: GenConfig = DEFAULT_CONFIG) -> list[Rule]:
    """Each original followed by its variants, with variant sids remapped.

    Raises :class:`AlreadyGeneralised` if any input rule is already tagged.
    """
    rules = list(rules)
    tagged = [r for r in rules if not r.origin.is_original or has_tag(r.msg)]
    if tagged:
        raise AlreadyGeneralised(tagged)
    out = []
    next_sidless = SIDLESS_SID_BASE
    next_overflow = OVERFLOW_SID_BASE
    for rule in rules:
        if rule.sid is None:
            rule = rule.set_option(Sid(next_sidless))
            next_sidless += 1
        out.append(rule)
        vs = variants(rule, cfg)
        if len(vs) > VARIANTS_PER_SID:
            log.warning("rule %s has %d variants; sids past ordinal %d come from %d upward",
                        rule.sid, len(vs), VARIANTS_PER_SID - 1, OVERFLOW_SID_BASE)
        for ordinal, variant in enumerate(vs):
            if ordinal < VARIANTS_PER_SID:
                sid = variant_sid(rule.sid, ordinal)
            else:
                sid = next_overflow
                next_overflow += 1
            if sid > _U32:
                raise ValueError(f"variant sid for rule {rule.sid} exceeds 32 bits")
            out.append(variant.set_option(Sid(sid)))
    return out
