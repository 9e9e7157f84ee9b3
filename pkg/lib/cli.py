"""Model ingestion, command dispatch and verification reports for the `liepair` command."""
import argparse
import json
import logging
import sys
from dataclasses import replace

from . import config
from .directory_manager import dir_manager
from .errors import LiePairError, ModelFileError
from .liepair import model_from_dict, model_to_dict, require_valid, validate
from .pidgla import PullbackAlgebroid
from .progress_tracker import ProgressTracker
from .tools.commands import COMMANDS, RunOptions, execute_command
from .tools.global_func import validate_model_file_structure

logger = logging.getLogger(__name__)


def parse_model(path, check=True):
    """LiePairModel from a model file path or bundled model name"""
    resolved = dir_manager.resolve_model(path)
    data = dir_manager.load_json(resolved)
    validate_model_file_structure(data)
    model = model_from_dict(data)
    if not model.name:
        model = replace(model, name=resolved.stem)
    return require_valid(model) if check else model


def parse_model_text(text, check=True):
    """LiePairModel from the JSON text of a model file"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFileError(f"Invalid JSON: {e.msg}", location=f"{e.lineno}:{e.colno}") from e
    validate_model_file_structure(data)
    model = model_from_dict(data)
    return require_valid(model) if check else model


def serialize_model(model):
    return json.dumps(model_to_dict(model), indent=2)


def _report_record(section, entry, timing):
    if entry.get('status') == 'skipped':
        status = 'skipped'
    else:
        status = 'pass' if entry['valid'] else 'fail'
    check = entry['check'] if entry['check'] == section else f"{section}/{entry['check']}"
    return {
        'check': check,
        'generator': entry.get('generator'),
        'status': status,
        'witness': entry.get('message'),
        'timing': entry.get('timing') if timing else None,
    }


def _violation_records(violations):
    return [{'check': f"model/{v['invariant']}", 'generator': str(v['indices']), 'status': 'fail',
             'witness': v['message'], 'timing': None} for v in violations]


def run(command, model, options=None, tracker=None):
    """(report document, exit status) of one command on a parsed model"""
    options = options or RunOptions()
    tracker = tracker or ProgressTracker(quiet=options.quiet)
    if command not in COMMANDS:
        raise ValueError(f"Unknown command '{command}' (expected one of {', '.join(COMMANDS)})")

    records = []
    violations = validate(model)
    if violations:
        records += _violation_records(violations)
        records.append({'check': command, 'generator': None, 'status': 'skipped',
                        'witness': "model is not a Lie pair", 'timing': None})
    else:
        if command in ("check", "report"):
            records.append({'check': "model/axioms", 'generator': None, 'status': 'pass',
                            'witness': "antisymmetry, closure, anchor compatibility and Jacobi hold",
                            'timing': None})
        pi = PullbackAlgebroid(model)
        with tracker.track_operation(f"{command} on {model.name or 'model'}"):
            for section, entries in execute_command(command, pi, options, tracker):
                records += [_report_record(section, entry, options.timing) for entry in entries]

    counts = {status: sum(1 for r in records if r['status'] == status) for status in ('pass', 'fail', 'skipped')}
    report = {
        'model': model.name,
        'command': command,
        'gamma': options.gamma,
        'seed': options.seed if options.gamma == "random" else None,
        'records': records,
        'summary': counts,
        'status': 'fail' if counts['fail'] else 'pass',
    }
    tracker.summary(counts)
    return report, (1 if counts['fail'] else 0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="liepair",
        description="Exact verification of Lie pair, pullback dg Lie algebroid and Atiyah/Todd identities",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("model", help="model file path or bundled model name")
    parser.add_argument("--json", action="store_true", help="print the report document on stdout")
    parser.add_argument("--gamma", choices=("default", "random"), default="default",
                        help="Christoffel tables: default extension only, or also seeded random tables")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    parser.add_argument("--max-k", type=int, default=None, help="highest wedge degree (default r)")
    parser.add_argument("--tables", type=int, default=config.RANDOM_TABLES,
                        help="number of random tables with --gamma random")
    parser.add_argument("--save", action="store_true", help=f"write the report under {config.REPORT_DIR}/")
    parser.add_argument("--timing", action="store_true", help="include per-check timing in the report")
    parser.add_argument("--quiet", action="store_true", help="no status lines or progress bars")
    return parser


def _print_human(report, stream):
    for entry in report['records']:
        if entry['status'] == 'pass':
            continue
        marker = "❌" if entry['status'] == 'fail' else "⏭️"
        where = f" [{entry['generator']}]" if entry['generator'] else ""
        print(f"{marker} {entry['check']}{where}: {entry['witness']}", file=stream)
    counts = report['summary']
    print(f"{report['model']} {report['command']}: {report['status']} "
          f"({counts['pass']} passed, {counts['fail']} failed, {counts['skipped']} skipped)", file=stream)


def main(argv=None, stdout=None, reports=None):
    """Exit status: 0 all checks pass, 1 a check failed, 2 usage or model file error"""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    logging.basicConfig(level=config.LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    options = RunOptions(gamma=args.gamma, seed=args.seed, max_k=args.max_k, tables=args.tables,
                         timing=args.timing, quiet=args.quiet)
    tracker = ProgressTracker(quiet=args.quiet)

    try:
        model = parse_model(args.model, check=False)
    except LiePairError as e:
        print(f"❌ {e}", file=sys.stderr)
        return 2

    report, status = run(args.command, model, options, tracker)

    if args.json:
        json.dump(report, stdout, indent=2, ensure_ascii=False)
        stdout.write("\n")
    else:
        _print_human(report, stdout)

    if args.save or args.command == "report":
        (reports or dir_manager).save_report(report, model.name, args.command, options.seed if options.gamma == "random" else None)
    return status
