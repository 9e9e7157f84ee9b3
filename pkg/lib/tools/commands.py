"""Verification commands: each maps a pullback algebroid to named sections of check records."""
from dataclasses import dataclass
from typing import Any, Callable, Optional

from .. import config
from ..atiyah import atiyah_checks, compare_theoremB, form_spaces
from ..errors import LiePairError, NotPointCase
from ..hpl import (
    exterior_contraction,
    hom_contraction,
    lemma_identities,
    perturb,
    projector_rank_check,
    random_contraction,
    tensor_contraction,
    toy_contraction,
    verify_contraction,
)
from ..liepair import connection_violations, default_connection, random_connection
from ..pidgla import (
    b_generators_q_stable,
    canonical_inclusion_check,
    dA_squared_check,
    filtration_check,
    pi_contraction_checks,
    q_checks,
    splitting_check,
)
from ..todd import (
    ce_euler_check,
    cohomology_table,
    connection_independence,
    multiplicativity_check,
    series_self_check,
    todd_class_check,
    todd_cocycle,
    trace_lemma_check,
)

COMMANDS = ("check", "atiyah", "compare", "todd", "hpl-verify", "cohomology", "report")


@dataclass
class RunOptions:
    gamma: str = "default"
    seed: int = config.DEFAULT_SEED
    max_k: Optional[int] = None
    tables: int = config.RANDOM_TABLES
    contractions: int = config.RANDOM_CONTRACTIONS
    timing: bool = False
    quiet: bool = False


def record(check, generator, valid, message):
    return {'check': check, 'generator': None if generator is None else str(generator),
            'valid': valid, 'message': message}


def skipped(check, reason):
    return {'check': check, 'generator': None, 'valid': None, 'status': 'skipped', 'message': reason}


def run_section(tracker, name, fn, *args):
    """(name, records) with engine errors turned into failing or skipped records"""
    with tracker.track_check(name):
        try:
            records = list(fn(*args))
        except NotPointCase as e:
            records = [skipped(name, str(e))]
        except LiePairError as e:
            records = [record(name, getattr(e, 'generator', None), False, f"{e.__class__.__name__}: {e}")]
    for entry in records:
        entry['timing'] = tracker.timings[name]
    return name, records


def connection_tables(pi, options):
    """The default table, then seeded random admissible tables (odd offsets fill the vertical slots)"""
    tables = [default_connection(pi.model)]
    if options.gamma == "random":
        for t in range(options.tables):
            tables.append(random_connection(pi.model, options.seed + t, vertical=bool(t % 2)))
    return tables


def _k_max(pi, options):
    r = pi.model.r
    return r if options.max_k is None else max(0, min(options.max_k, r))


def _admissibility(pi, tables):
    out = []
    for table in tables:
        violations = connection_violations(pi.model, table)
        out.append(record("admissible", table.label, not violations,
                          "admissible" if not violations else violations[0]['message']))
    return out


def _instances(pi):
    """Filtration of ∂p̃_A; Q-stable B generators give τ = canonical inclusion"""
    out = filtration_check(pi)
    stable = b_generators_q_stable(pi)
    if all(r['valid'] for r in stable):
        return out + stable + canonical_inclusion_check(pi)
    return out + [skipped("canonical-inclusion", "B generators are not Q-stable")]


def check_command(pi, options, tracker):
    tables = connection_tables(pi, options)
    return [
        run_section(tracker, "dA", dA_squared_check, pi.model),
        run_section(tracker, "Q", q_checks, pi),
        run_section(tracker, "splitting", splitting_check, pi.maps),
        run_section(tracker, "instances", _instances, pi),
        run_section(tracker, "connection", _admissibility, pi, tables),
    ]


def atiyah_command(pi, options, tracker):
    sections = []
    for table in tracker.progress(connection_tables(pi, options), "atiyah tables"):
        sections.append(run_section(tracker, f"atiyah[{table.label}]", atiyah_checks, pi, table))
    return sections


def _compare(pi, table):
    result = compare_theoremB(pi, table)
    residual = result['residual']
    return [record("pi12-At-equals-at", result['connection'], result['equal'],
                   "residual 0" if result['equal'] else f"residual {residual}")]


def compare_command(pi, options, tracker):
    sections = []
    for table in tracker.progress(connection_tables(pi, options), "compare tables"):
        sections.append(run_section(tracker, f"compare[{table.label}]", _compare, pi, table))
    return sections


def _todd_cocycle(pi, k_max):
    out = []
    for side in ("pair", "dgla"):
        spaces = form_spaces(pi, side)
        for d, component in enumerate(todd_cocycle(pi, None, side, k_max)):
            residual = spaces.scalar(d).delta(component.element)
            out.append(record(f"{side}-todd-{d}", None, not residual,
                              f"component {component.element}" if not residual else f"D = {residual}"))
    return out


def _independence(pi, seed):
    other = random_connection(pi.model, seed)
    result = connection_independence(pi, default_connection(pi.model), other)
    return [record("at-connection-independent", other.label, result['exact'],
                   f"witness {result['witness']}" if result['exact'] else f"obstruction {result['obstruction']}")]


def _multiplicativity(pi, k_max):
    out = []
    for k in range(min(k_max, 2) + 1):
        out += multiplicativity_check(pi, k)
    return out


def todd_command(pi, options, tracker):
    k_max = _k_max(pi, options)
    return [
        run_section(tracker, "series", series_self_check, max(k_max, 1)),
        run_section(tracker, "trace-lemma", trace_lemma_check, pi, k_max),
        run_section(tracker, "T-hat", _multiplicativity, pi, k_max),
        run_section(tracker, "todd-cocycle", _todd_cocycle, pi, k_max),
        run_section(tracker, "todd-class", todd_class_check, pi),
        run_section(tracker, "independence", _independence, pi, options.seed),
    ]


def _random_suite(options, tracker):
    out = []
    for s in tracker.progress(range(options.contractions), "random contractions"):
        seed = options.seed + s
        c, pert = random_contraction(seed)
        base = verify_contraction(c)
        pc = perturb(c, pert)
        identities = lemma_identities(pc)
        failures = [r for r in base + pc.report + identities if not r['valid']]
        out.append(record("random-contraction", f"seed={seed}", not failures,
                          f"axioms and closed forms hold (series lengths {pc.iterations})"
                          if not failures else f"{failures[0]['check']}: {failures[0]['message']}"))
    return out


def _toy():
    c, pert = toy_contraction()
    pc = perturb(c, pert)
    return verify_contraction(c) + pc.report + lemma_identities(pc)


def hpl_command(pi, options, tracker):
    basic = pi.basic
    top = 3 if options.max_k is None else max(2, min(options.max_k, 3))
    sections = [
        run_section(tracker, "basic", verify_contraction, basic),
        run_section(tracker, "pi!L", pi_contraction_checks, pi),
        run_section(tracker, "hom", lambda: verify_contraction(hom_contraction(basic, basic))),
        run_section(tracker, "tensor", lambda: verify_contraction(tensor_contraction([basic, basic]))),
    ]
    for k in range(2, top + 1):
        sections.append(run_section(tracker, f"exterior-{k}",
                                    lambda k=k: verify_contraction(exterior_contraction(basic, k))))
    sections.append(run_section(tracker, "projector-rank", lambda: [projector_rank_check(basic)]))
    sections.append(run_section(tracker, "toy", _toy))
    sections.append(run_section(tracker, "random", _random_suite, options, tracker))
    return sections


def _cohomology(pi, k_max):
    if pi.model.n:
        raise NotPointCase(pi.model.n)
    out = []
    for row in cohomology_table(pi, k_max):
        out.append(record(f"quasi-iso-{row['k']}", None, row['valid'],
                          f"H_CE(A; Λ^{row['k']}B∨) = {row['ce']}, H(Λ^{row['k']}(π!L)∨, Q) = {row['dgla']}"))
    for tag in ("B", "dual-B-End-B"):
        out.append(ce_euler_check(pi, tag))
    return out


def cohomology_command(pi, options, tracker):
    return [run_section(tracker, "cohomology", _cohomology, pi, _k_max(pi, options))]


def report_command(pi, options, tracker):
    sections = []
    for name in COMMANDS[:-1]:
        with tracker.track_operation(name):
            sections += [(f"{name}:{section}", records) for section, records in REGISTRY[name](pi, options, tracker)]
    return sections


REGISTRY: dict[str, Callable[..., Any]] = {
    "check": check_command,
    "atiyah": atiyah_command,
    "compare": compare_command,
    "todd": todd_command,
    "hpl-verify": hpl_command,
    "cohomology": cohomology_command,
    "report": report_command,
}


def execute_command(name, pi, options, tracker):
    fn = REGISTRY.get(name)
    if not fn:
        raise ValueError(f"Unknown command '{name}'")
    return fn(pi, options, tracker)