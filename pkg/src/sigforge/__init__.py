"""Snort rule generalisation: parse, generalise, match, merge and summarise."""

from .alert_io import Alert, format_alert, parse_alert_file
from .alert_merge import MergeResult, merge
from .generalizer import GenConfig, content_variants, generalize_file, invert_region, invert_variants
from .matcher import Detector, Packet, rule_matches, run_detection
from .rule_model import AddrSpec, ContentSpec, GenTag, PortSpec, Rule, render_pattern
from .rule_parser import parse_rule, parse_rules_file, parse_var_config, serialize_rule
from .summary import SummaryReport, summarize

__version__ = "0.1.0"

__all__ = [
    "AddrSpec", "Alert", "ContentSpec", "Detector", "GenConfig", "GenTag", "MergeResult", "Packet",
    "PortSpec", "Rule", "SummaryReport", "content_variants", "format_alert", "generalize_file",
    "invert_region", "invert_variants", "merge", "parse_alert_file", "parse_rule", "parse_rules_file",
    "parse_var_config", "render_pattern", "rule_matches", "run_detection", "serialize_rule", "summarize",
]
