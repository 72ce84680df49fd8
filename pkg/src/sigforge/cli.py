"""Command line entry point: ``sigforge {fuzz,match,merge,summarize,pipeline}``.

Exit codes:
    0  success
    1  bad input content (variable config, packet fixture, alert file)
    2  input file unreadable, or command line usage error
    3  backup ``<rules>.orig`` already exists (use ``--force``)
    4  rules are already generalised
    5  a rule references an undefined or mistyped variable
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import alert_io, alert_merge, generalizer, matcher, rule_parser, summary

VARS_ENV = "SIGFORGE_VARS"
BACKUP_SUFFIX = ".orig"

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_UNREADABLE = 2
EXIT_BACKUP_EXISTS = 3
EXIT_ALREADY_GENERALISED = 4
EXIT_VARIABLE = 5


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_UNREADABLE, f"cannot read {path}: {exc.strerror or exc}") from exc


def _write(path, text):
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_UNREADABLE, f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_rules(path):
    rules, diags = rule_parser.parse_rules_file(_read(path))
    for d in diags:
        _warn(f"{path}: {d}")
    return rules


def _load_vars(path):
    path = path or os.environ.get(VARS_ENV)
    if not path:
        return {}
    try:
        return rule_parser.parse_var_config(_read(path))
    except rule_parser.VarConfigError as exc:
        raise CliError(EXIT_BAD_INPUT, f"{path}: {exc}") from exc


def _load_packets(path):
    try:
        return matcher.load_packets(_read(path))
    except ValueError as exc:
        raise CliError(EXIT_BAD_INPUT, f"{path}: {exc}") from exc


def _load_alerts(path):
    alerts, diags = alert_io.parse_alert_file(_read(path))
    for lineno, reason in diags:
        _warn(f"{path}: line {lineno}: {reason}")
    return alerts


def _gen_config(args) -> generalizer.GenConfig:
    try:
        return generalizer.GenConfig(mode=args.mode, priority_offset=args.priority_offset,
                                     min_content_len=args.min_content_len, emit_trims=not args.no_trims)
    except ValueError as exc:
        raise CliError(EXIT_UNREADABLE, str(exc)) from exc


def _generalise(rules, cfg):
    try:
        return generalizer.generalize_file(rules, cfg)
    except generalizer.AlreadyGeneralised as exc:
        raise CliError(EXIT_ALREADY_GENERALISED, f"already generalised: {exc}") from exc


def _detect(rules, packets, vars, mode):
    try:
        return matcher.run_detection(rules, packets, vars, mode)
    except matcher.UndefinedVariable as exc:
        raise CliError(EXIT_VARIABLE, str(exc)) from exc
    except matcher.VariableTypeError as exc:
        raise CliError(EXIT_VARIABLE, str(exc)) from exc


def cmd_fuzz(args) -> int:
    cfg = _gen_config(args)
    path = Path(args.rules)
    original_text = _read(path)
    rules, diags = rule_parser.parse_rules_file(original_text)
    for d in diags:
        _warn(f"{path}: {d}")
    out_rules = _generalise(rules, cfg)
    if args.out:
        _write(args.out, rule_parser.serialize_rules(out_rules))
        target = args.out
    else:
        backup = Path(str(path) + BACKUP_SUFFIX)
        if backup.exists() and not args.force:
            raise CliError(EXIT_BACKUP_EXISTS, f"backup {backup} already exists (use --force)")
        _write(backup, original_text)
        _write(path, rule_parser.serialize_rules(out_rules))
        target = path
    print(f"{len(rules)} original rules -> {len(out_rules)} rules "
          f"({len(out_rules) - len(rules)} variants) written to {target}")
    return EXIT_OK


def cmd_match(args) -> int:
    rules = _load_rules(args.rules)
    vars = _load_vars(args.vars)
    packets = _load_packets(args.packets)
    mode = matcher.ALL_MATCHES if args.all_matches else matcher.FIRST_MATCH
    text = alert_io.format_alerts(_detect(rules, packets, vars, mode))
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_merge(args) -> int:
    result = alert_merge.merge(_load_alerts(args.original), _load_alerts(args.generalised))
    try:
        paths = alert_merge.write_merge(result, args.generalised)
    except OSError as exc:
        raise CliError(EXIT_UNREADABLE, f"cannot write merge output: {exc}") from exc
    for name, path in paths.items():
        print(f"{len(getattr(result, name)):>8}  {path}")
    return EXIT_OK


def _render(report, as_json):
    return report.to_json() + "\n" if as_json else summary.render_text(report)


def cmd_summarize(args) -> int:
    report = summary.summarize(_load_alerts(args.alerts), args.max_frequency)
    text = _render(report, args.json)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _gen_config(args)
    out_dir = Path(args.out_dir)
    stage = "load"
    try:
        rules = _load_rules(args.rules)
        vars = _load_vars(args.vars)
        packets = _load_packets(args.packets)
        out_dir.mkdir(parents=True, exist_ok=True)

        stage = "generalise"
        gen_rules = _generalise(rules, cfg)
        _write(out_dir / "generalised.rules", rule_parser.serialize_rules(gen_rules))

        mode = matcher.ALL_MATCHES if args.all_matches else matcher.FIRST_MATCH
        stage = "match original rules"
        # The originals as written to the generalised file, so sid-less rules carry their assigned sid.
        originals = [r for r in gen_rules if r.origin.is_original]
        original_alerts = _detect(originals, packets, vars, mode)
        _write(out_dir / "original.alerts", alert_io.format_alerts(original_alerts))

        stage = "match generalised rules"
        gen_alerts = _detect(gen_rules, packets, vars, mode)
        gen_path = out_dir / "generalised.alerts"
        _write(gen_path, alert_io.format_alerts(gen_alerts))

        stage = "merge"
        result = alert_merge.merge(original_alerts, gen_alerts)
        alert_merge.write_merge(result, gen_path)

        stage = "summarize"
        report = summary.summarize(result.merged, args.max_frequency)
        text = _render(report, args.json)
        _write(out_dir / ("summary.json" if args.json else "summary.txt"), text)
    except CliError as exc:
        raise CliError(exc.code, f"pipeline stage '{stage}': {exc}") from exc
    except OSError as exc:
        raise CliError(EXIT_UNREADABLE, f"pipeline stage '{stage}': {exc}") from exc
    sys.stdout.write(text)
    return EXIT_OK


def _add_gen_flags(p):
    p.add_argument("--mode", choices=generalizer.MODES, default="both")
    p.add_argument("--priority-offset", type=int, default=1)
    p.add_argument("--min-content-len", type=int, default=2)
    p.add_argument("--no-trims", action="store_true", help="skip head/tail shortening variants")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sigforge", description="Snort rule generalisation toolchain")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuzz", help="generalise a .rules file")
    _add_gen_flags(p)
    p.add_argument("--force", action="store_true", help="overwrite an existing .orig backup")
    p.add_argument("--out", help="write here instead of rewriting RULES in place")
    p.add_argument("rules", metavar="RULES")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("match", help="run rules against a packet fixture")
    p.add_argument("--rules", required=True)
    p.add_argument("--packets", required=True)
    p.add_argument("--vars", help=f"variable config (default: ${VARS_ENV})")
    p.add_argument("--all-matches", action="store_true", help="alert on every matching rule")
    p.add_argument("--out", help="alert file (default: stdout)")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("merge", help="merge original and generalised alert files")
    p.add_argument("original", metavar="ORIGINAL_ALERTS")
    p.add_argument("generalised", metavar="GENERALISED_ALERTS")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("summarize", help="count alerts per rule and per method")
    p.add_argument("--max-frequency", type=int, help="suppress alerts seen more often than this")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.add_argument("alerts", metavar="ALERTS")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("pipeline", help="generalise, match, merge and summarise in one go")
    _add_gen_flags(p)
    p.add_argument("--rules", required=True)
    p.add_argument("--packets", required=True)
    p.add_argument("--vars", help=f"variable config (default: ${VARS_ENV})")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--all-matches", action="store_true")
    p.add_argument("--max-frequency", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"sigforge {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
