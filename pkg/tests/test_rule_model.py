import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigforge.rule_model import (
    ORIGINAL,
    WILDCARD,
    AddrSpec,
    ContentSpec,
    GenTag,
    PortSpec,
    RuleModelError,
    render_pattern,
    split_tag,
    tag_from_msg,
)


@pytest.mark.parametrize("pattern, expected", [
    (tuple(b"HTTP"), '"HTTP"'),
    ((0x00, 0x00, WILDCARD), '"|00 00 |?||"'),
    ((0x3B, WILDCARD, 0xE7), '"|3b |?| e7|"'),
    (tuple(b"HTTP/1.") + (WILDCARD,) + tuple(b" 403"), '"HTTP/1.|?| 403"'),
    ((WILDCARD,), '"|?|"'),
    ((WILDCARD, WILDCARD), '"|?||?|"'),
    (tuple(b'a"b;c|d?e\\'), '"a|22|b|3b|c|7c|d|3f|e|5c|"'),
])
def test_render_pattern(pattern, expected):
    assert render_pattern(pattern) == expected


def test_render_pattern_keeps_hex_spelling():
    assert render_pattern(tuple(b";c\xe7"), (True, True, True)) == '"|3b 63 e7|"'
    spec = ContentSpec(tuple(b";c\xe7"), hex_bytes=(True, True, True))
    assert spec.wildcarded(0).render_options()[0] == 'content:"||?| 63 e7|"'
    assert spec.sliced(1, 3).render_options()[0] == 'content:"|63 e7|"'


def test_hex_spelling_is_not_part_of_equality():
    assert ContentSpec(tuple(b"c"), hex_bytes=(True,)) == ContentSpec(tuple(b"c"))


def test_empty_pattern_rejected():
    with pytest.raises(RuleModelError):
        render_pattern(())
    with pytest.raises(RuleModelError):
        ContentSpec(())


@pytest.mark.parametrize("make", [
    lambda: AddrSpec("any", negated=True),
    lambda: PortSpec("any", negated=True),
    lambda: PortSpec.single(70000),
    lambda: PortSpec.range(10, 5),
    lambda: ContentSpec(tuple(b"x"), depth=0),
    lambda: ContentSpec(tuple(b"x"), offset=-1),
])
def test_invalid_specs(make):
    with pytest.raises(RuleModelError):
        make()


def test_spec_rendering():
    assert AddrSpec.cidr("10.0.0.0/8", negated=True).render() == "!10.0.0.0/8"
    assert AddrSpec.cidr("10.0.0.1", "10.0.0.2").render() == "[10.0.0.1,10.0.0.2]"
    assert AddrSpec.var("HOME_NET").inverted().render() == "!$HOME_NET"
    assert PortSpec.range(1024, None).render() == "1024:"
    assert PortSpec.range(None, 1023).render() == ":1023"
    assert PortSpec.single(53).inverted().render() == "!53"


ALL_TAGS = [
    GenTag("inv_src_port"), GenTag("inv_dst_port"), GenTag("inv_src_ip"), GenTag("inv_dst_ip"),
    GenTag("inv_protocol", proto="udp"), GenTag("inv_direction"),
    GenTag("inv_content", index=1), GenTag("inv_region_before", index=0),
    GenTag("inv_region_after", index=2), GenTag("cor", index=0, position=7),
    GenTag("urr", index=1, position=0), GenTag("trim_head", index=0), GenTag("trim_tail", index=3),
]


@pytest.mark.parametrize("tag", ALL_TAGS, ids=lambda t: t.code)
def test_tag_code_round_trip(tag):
    assert GenTag.from_code(tag.code) == tag
    assert tag_from_msg(tag.tag_msg("Some alert")) == tag


def test_tag_codes_are_bit_exact():
    assert [t.code for t in ALL_TAGS] == [
        "inv:sport", "inv:dport", "inv:sip", "inv:dip", "inv:proto=udp", "inv:dir",
        "inv:content[1]", "inv:before[0]", "inv:after[2]", "cor[0,7]", "urr[1,0]",
        "trim:head[0]", "trim:tail[3]",
    ]
    assert GenTag("cor", index=0, position=2).tag_msg("m") == "m FuzzRuleId cor[0,2]"


def test_split_tag():
    assert split_tag("DNS zone transfer TCP") == ("DNS zone transfer TCP", None)
    assert split_tag("x FuzzRuleId inv:dport") == ("x", "inv:dport")
    assert split_tag("x FuzzRuleId cor('|3b |?| e7|')") == ("x", "cor('|3b |?| e7|')")
    # foreign spellings are recognised as tagged but do not decode
    assert tag_from_msg("x FuzzRuleId cor('|3b |?| e7|')") == ORIGINAL


@given(st.text(min_size=1).filter(lambda s: "FuzzRuleId" not in s), st.sampled_from(ALL_TAGS))
def test_tag_recovered_from_any_msg(msg, tag):
    assert tag_from_msg(tag.tag_msg(msg)) == tag
