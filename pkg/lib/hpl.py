"""Homological perturbation over a graded coefficient ring.

Operators are generator-value tables with a linearity contract: an operator of degree d
with ring derivation D acts by φ(f·g) = D(f)·g + (−1)^{d|f|} f·φ(g).  Lazy composites
evaluate on elements; `tabulate` freezes one back into a table.  A contraction is a dg
module (δ, optional idempotent support), a homotopy h and small-space data (V, τ, σ, δ_V).
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
import sympy

from . import config
from .errors import MissingSmallSpace, NonNilpotent, NotAPerturbation, NotPointCase
from .exactalg import (
    ANY_DEGREE,
    CochainElem,
    FreeModule,
    ModuleElem,
    PolyScalar,
    hom_module,
    tensor_module,
    tensor_product,
)

logger = logging.getLogger(__name__)


def _signed(coeff, odd):
    """(−1)^{|c|} c when odd, c otherwise"""
    if not odd:
        return coeff
    even, odd_part = coeff.parity_parts()
    return even - odd_part


class Map:
    """Graded map between free modules, evaluated on elements"""

    source: FreeModule
    target: FreeModule
    degree: int
    name: str = ""
    derivation: Optional[Callable] = None

    def __call__(self, x):
        raise NotImplementedError

    def on_generator(self, label):
        return self(self.source.basis(label))

    def __add__(self, other):
        return Combination([(Fraction(1), self), (Fraction(1), other)])

    def __sub__(self, other):
        return Combination([(Fraction(1), self), (Fraction(-1), other)])

    def __neg__(self):
        return Combination([(Fraction(-1), self)])

    def __rmul__(self, scalar):
        return Combination([(Fraction(scalar), self)])

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name or '?'}: {self.source.name} -> {self.target.name}, deg {self.degree})"


class Operator(Map):
    """Map stored as values on generators plus an optional ring derivation"""

    def __init__(self, source, target, degree, table=None, rule=None, derivation=None, name=""):
        self.source = source
        self.target = target
        self.degree = degree
        self.derivation = derivation
        self.name = name
        self._table = dict(table or {})
        self._rule = rule

    def on_generator(self, label):
        if label not in self._table:
            self._table[label] = self._rule(label) if self._rule else self.target.zero()
        return self._table[label]

    def table(self):
        """Values on every source generator"""
        return {label: self.on_generator(label) for label in self.source.generators}

    def __call__(self, x):
        out = self.target.zero()
        odd = self.degree % 2
        for label, coeff in x.items():
            if self.derivation is not None:
                d_coeff = self.derivation(coeff)
                if d_coeff:
                    out = out + ModuleElem(x.n, {label: d_coeff})
            value = self.on_generator(label)
            if value:
                out = out + value.scale(_signed(coeff, odd))
        return out


class Composite(Map):
    def __init__(self, maps, name=""):
        flat = []
        for m in maps:
            flat.extend(m.maps if isinstance(m, Composite) else [m])
        self.maps = flat
        self.source = flat[-1].source
        self.target = flat[0].target
        self.degree = sum(m.degree for m in flat)
        self.name = name or "∘".join(m.name or "?" for m in flat)

    def __call__(self, x):
        for m in reversed(self.maps):
            if not x:
                return self.target.zero()
            x = m(x)
        return x


class Combination(Map):
    def __init__(self, terms, name=""):
        terms = [(Fraction(s), m) for s, m in terms]
        self.terms = terms
        self.source = terms[0][1].source
        self.target = terms[0][1].target
        self.degree = terms[0][1].degree
        self.name = name or " + ".join(f"{s}·{m.name or '?'}" for s, m in terms)

    def __call__(self, x):
        out = self.target.zero()
        for scalar, m in self.terms:
            value = m(x)
            if value:
                out = out + (value if scalar == 1 else value.scale(scalar))
        return out


class Identity(Map):
    def __init__(self, module, name="id"):
        self.source = self.target = module
        self.degree = 0
        self.name = name

    def __call__(self, x):
        return x

    def on_generator(self, label):
        return self.source.basis(label)


def zero_map(source, target, degree, name="0"):
    return Operator(source, target, degree, name=name)


def tabulate(m, derivation=None, name=None):
    """Freeze a linear (or derivation-type with the given derivation) map into a table"""
    if isinstance(m, Operator) and m.derivation is derivation:
        return m
    return Operator(m.source, m.target, m.degree, rule=m.on_generator,
                    derivation=derivation, name=name or m.name)


@dataclass(frozen=True)
class DgModuleSpec:
    module: FreeModule
    delta: Map
    ring_differential: Optional[Callable] = None
    support: Optional[Map] = None


@dataclass(frozen=True)
class SmallSpace:
    module: FreeModule
    delta: Map
    tau: Map
    sigma: Map
    identity: Map


@dataclass(frozen=True)
class Contraction:
    dg: DgModuleSpec
    h: Map
    small: Optional[SmallSpace] = None
    name: str = ""

    @property
    def module(self):
        return self.dg.module

    @property
    def delta(self):
        return self.dg.delta

    @property
    def ring_differential(self):
        return self.dg.ring_differential

    @property
    def support(self):
        return self.dg.support or Identity(self.module)

    def small_space(self):
        """Explicit small data, or V = im ϖ inside W for a compact contraction"""
        if self.small is not None:
            return self.small
        varpi = projector(self)
        return SmallSpace(self.module, self.delta, varpi, varpi, varpi)

    def spanning_elements(self):
        """(label, P(label)) for generators with nonzero support image"""
        support = self.support
        for label in self.module.generators:
            x = support.on_generator(label)
            if x:
                yield label, x


def projector(c):
    """ϖ = id − hδ − δh (support idempotent in place of id)"""
    varpi = Combination([(1, c.support), (-1, Composite([c.h, c.delta])), (-1, Composite([c.delta, c.h]))])
    return tabulate(varpi, name=f"varpi[{c.name}]")


def sample_coefficients(module):
    """Homogeneous coefficients used to probe signed linearity"""
    n, r = module.n, module.r
    samples = [CochainElem.eta(n, i) for i in range(1, min(r, 2) + 1)]
    if r >= 2:
        samples.append(CochainElem.eta(n, 1, 2))
    if n >= 1:
        x1 = CochainElem.scalar(n, PolyScalar.var(n, 1))
        samples.append(x1)
        if r >= 1:
            samples.append(x1 * CochainElem.eta(n, 1))
    return samples


def _record(check, generator, valid, message):
    return {'check': check, 'generator': None if generator is None else str(generator),
            'valid': valid, 'message': message}


def _run_check(report, check, items, predicate, describe):
    failures = 0
    count = 0
    for key, *args in items:
        count += 1
        if not predicate(*args):
            failures += 1
            report.append(_record(check, key, False, describe(key, *args)))
    if not failures:
        report.append(_record(check, None, True, f"holds on {count} elements"))


def verify_contraction(c, samples=None, small=True):
    """Contraction axioms as a list of {'check','generator','valid','message'} records"""
    report = []
    module, delta, h = c.module, c.delta, c.h
    d_ring = c.ring_differential
    spans = list(c.spanning_elements())
    zero = module.zero()

    for name, m, expected in (("delta-degree", delta, 1), ("h-degree", h, -1)):
        if m.degree != expected:
            report.append(_record(name, None, False, f"{m.name} declares degree {m.degree}, expected {expected}"))
            continue

        def degree_ok(label, m=m, expected=expected):
            grade = module.element_grade(m.on_generator(label))
            return grade == ANY_DEGREE or grade == module.degree(label) + expected
        _run_check(report, name, ((g, g) for g in module.generators), degree_ok,
                   lambda g, _g, m=m: f"{m.name}({g}) = {m.on_generator(g)} has the wrong degree")

    _run_check(report, "delta-squared", ((g, x) for g, x in spans),
               lambda x: not delta(delta(x)), lambda g, x: f"δ²({g}) = {delta(delta(x))}")
    _run_check(report, "h-squared", ((g, x) for g, x in spans),
               lambda x: not h(h(x)), lambda g, x: f"h²({g}) = {h(h(x))}")
    _run_check(report, "h-delta-h", ((g, x) for g, x in spans),
               lambda x: h(delta(h(x))) == h(x), lambda g, x: f"hδh({g}) != h({g})")

    samples = sample_coefficients(module) if samples is None else samples
    pairs = [((g, str(f)), f, x) for g, x in spans for f in samples]

    def delta_linear(f, x):
        expected = x.scale(d_ring(f)) if d_ring else zero
        expected = expected + delta(x).scale(_signed(f, 1))
        return delta(x.scale(f)) == expected

    def h_linear(f, x):
        return h(x.scale(f)) == h(x).scale(_signed(f, 1))

    _run_check(report, "delta-leibniz", pairs, delta_linear,
               lambda key, f, x: f"δ({f}·{key[0]}) breaks the Leibniz rule")
    _run_check(report, "h-linearity", pairs, h_linear,
               lambda key, f, x: f"h({f}·{key[0]}) != (−1)^|f| f·h({key[0]})")

    if not small:
        return report
    V = c.small_space()
    small_spans = [(v, V.identity.on_generator(v)) for v in V.module.generators]
    small_spans = [(v, y) for v, y in small_spans if y]

    _run_check(report, "sigma-tau", ((v, y) for v, y in small_spans),
               lambda y: V.sigma(V.tau(y)) == y, lambda v, y: f"στ({v}) = {V.sigma(V.tau(y))}")
    _run_check(report, "homotopy", ((g, x) for g, x in spans),
               lambda x: x - V.tau(V.sigma(x)) == h(delta(x)) + delta(h(x)),
               lambda g, x: f"id − τσ != hδ + δh on {g}")
    _run_check(report, "sigma-h", ((g, x) for g, x in spans),
               lambda x: not V.sigma(h(x)), lambda g, x: f"σh({g}) = {V.sigma(h(x))}")
    _run_check(report, "h-tau", ((v, y) for v, y in small_spans),
               lambda y: not h(V.tau(y)), lambda v, y: f"hτ({v}) = {h(V.tau(y))}")
    _run_check(report, "tau-chain", ((v, y) for v, y in small_spans),
               lambda y: delta(V.tau(y)) == V.tau(V.delta(y)), lambda v, y: f"δτ != τδ_V on {v}")
    _run_check(report, "sigma-chain", ((g, x) for g, x in spans),
               lambda x: V.sigma(delta(x)) == V.delta(V.sigma(x)), lambda g, x: f"σδ != δ_Vσ on {g}")
    _run_check(report, "small-delta-squared", ((v, y) for v, y in small_spans),
               lambda y: not V.delta(V.delta(y)), lambda v, y: f"δ_V²({v}) = {V.delta(V.delta(y))}")
    return report


def report_ok(report):
    return all(entry['valid'] for entry in report)


@dataclass
class PerturbedContraction:
    base: Contraction
    perturbation: Map
    h_pert: Operator
    tau_pert: Operator
    sigma_pert: Operator
    delta_pert: Operator
    iterations: dict = field(default_factory=dict)
    report: list = field(default_factory=list)

    def as_contraction(self, name=None):
        base = self.base
        d_ring = _sum_derivations(base.ring_differential, self.perturbation.derivation)
        delta = tabulate(base.delta + self.perturbation, derivation=d_ring,
                         name=f"({base.delta.name} + {self.perturbation.name})")
        small = base.small_space()
        return Contraction(
            DgModuleSpec(base.module, delta, d_ring, base.dg.support),
            self.h_pert,
            SmallSpace(small.module, self.delta_pert, self.tau_pert, self.sigma_pert, small.identity),
            name or f"{base.name}+pert",
        )


def _sum_derivations(d1, d2):
    if d1 is None:
        return d2
    if d2 is None:
        return d1
    return lambda f: d1(f) + d2(f)


def _series(name, start, step, max_iter, generator):
    """Σ_k t_k with t_0 = start, t_{k+1} = step(t_k); stops on the first zero term"""
    total = start
    term = start
    for k in range(1, max_iter + 1):
        term = step(term)
        if not term:
            return total, k
        total = total + term
    raise NonNilpotent(name, generator, max_iter)


def perturb(c, perturbation, max_iter=None, verify=True):
    """Perturbed contraction for δ + ∂ (series evaluated on every generator)"""
    max_iter = config.MAX_ITER if max_iter is None else max_iter
    module = c.module
    small = c.small_space()
    h, delta = c.h, c.delta
    total = c.delta + perturbation
    for label, x in c.spanning_elements():
        residual = total(total(x))
        if residual:
            raise NotAPerturbation(label, residual)

    iterations = {}

    def note(series, k):
        iterations[series] = max(iterations.get(series, 0), k)

    h_table = {}
    for label in module.generators:
        start = h.on_generator(label)
        value, k = _series("h_pert", start, lambda t: h(-perturbation(t)), max_iter, label)
        note("h_pert", k)
        h_table[label] = value

    tau_table, delta_table = {}, {}
    for v in small.module.generators:
        start = small.tau.on_generator(v)
        value, k = _series("tau_pert", start, lambda y: -h(perturbation(y)), max_iter, v)
        note("tau_pert", k)
        tau_table[v] = value
        correction = small.sigma(perturbation(value))
        delta_table[v] = small.delta.on_generator(v) + correction

    sigma_table = {}
    for label in module.generators:
        acc = small.module.zero()
        z = module.basis(label)
        for k in range(max_iter + 1):
            if not z:
                note("sigma_pert", k)
                break
            acc = acc + small.sigma(z)
            z = -perturbation(h(z))
        else:
            raise NonNilpotent("sigma_pert", label, max_iter)
        sigma_table[label] = acc

    d_ring = _sum_derivations(c.ring_differential, perturbation.derivation)
    result = PerturbedContraction(
        c, perturbation,
        Operator(module, module, -1, h_table, name="h_pert"),
        Operator(small.module, module, 0, tau_table, name="tau_pert"),
        Operator(module, small.module, 0, sigma_table, name="sigma_pert"),
        Operator(small.module, small.module, 1, delta_table, derivation=d_ring, name="delta_pert"),
        iterations,
    )
    logger.debug("Perturbed %s: series lengths %s", c.name, iterations)
    if verify:
        result.report = verify_contraction(result.as_contraction())
        if not report_ok(result.report):
            logger.warning("Perturbed contraction %s fails %d axiom checks", c.name,
                           sum(1 for r in result.report if not r['valid']))
    return result


def _transpose(m):
    """u ↦ [(w, c)] with c the coefficient of u in m(w), over all source generators"""
    out = {}
    for w in m.source.generators:
        for u, coeff in m.on_generator(w).items():
            out.setdefault(u, []).append((w, coeff))
    return out


class _LazyTranspose:
    def __init__(self, m):
        self.m = m
        self._value = None

    def get(self, label):
        if self._value is None:
            self._value = _transpose(self.m)
        return self._value.get(label, ())


def _hom_sandwich(hom, left, out, inner, deg, right):
    """left ∘ φ_{out,inner} ∘ right for a degree-0 left map; right given by its transpose"""
    left_value = hom.target.basis(out) if left is None else left.on_generator(out)
    terms = {}
    for w, coeff in right.get(inner):
        signed = _signed(coeff, deg % 2)
        for o, b in left_value.items():
            value = signed * b
            key = (o, w)
            total = terms[key] + value if key in terms else value
            if total:
                terms[key] = total
            else:
                terms.pop(key, None)
    return ModuleElem(hom.n, terms)


def _hom_post(hom, left, out, inner):
    """left ∘ φ_{out,inner}"""
    return ModuleElem(hom.n, {(o, inner): b for o, b in left.on_generator(out).items()})


def _hom_operators(hom, delta_in, delta_out, d_ring, name):
    transpose = _LazyTranspose(delta_in)

    def rule(label):
        out, inner = label
        deg = hom.degree(label)
        value = _hom_post(hom, delta_out, out, inner)
        correction = _hom_sandwich(hom, None, out, inner, deg, transpose)
        return value - correction if deg % 2 == 0 else value + correction

    return Operator(hom, hom, 1, rule=rule, derivation=d_ring, name=name)


def _hom_conjugation(source_hom, target_hom, left, right, name):
    """φ ↦ left ∘ φ ∘ right for degree-0 left/right"""
    transpose = _LazyTranspose(right)

    def rule(label):
        out, inner = label
        return _hom_sandwich(target_hom, left, out, inner, source_hom.degree(label), transpose)

    return Operator(source_hom, target_hom, 0, rule=rule, name=name)


def hom_contraction(c1, c2, name=None):
    """Contraction on Hom(W1, W2): D(f) = δ2 f − (−1)^|f| f δ1, H(f) = h2 f + (−1)^|f| ϖ2 f h1"""
    name = name or f"Hom({c1.name},{c2.name})"
    hom = hom_module(c1.module, c2.module, name)
    d_ring = c2.ring_differential or c1.ring_differential
    D = _hom_operators(hom, c1.delta, c2.delta, d_ring, f"D[{name}]")
    varpi2 = projector(c2)
    h1_transpose = _LazyTranspose(c1.h)

    def h_rule(label):
        out, inner = label
        deg = hom.degree(label)
        value = _hom_post(hom, c2.h, out, inner)
        tail = _hom_sandwich(hom, varpi2, out, inner, deg, h1_transpose)
        return value + tail if deg % 2 == 0 else value - tail

    H = Operator(hom, hom, -1, rule=h_rule, name=f"H[{name}]")
    support = None
    if c1.dg.support is not None or c2.dg.support is not None:
        support = _hom_conjugation(hom, hom, c2.support, c1.support, f"P[{name}]")

    V1, V2 = c1.small_space(), c2.small_space()
    small_hom = hom_module(V1.module, V2.module, f"Hom(V[{c1.name}],V[{c2.name}])")
    small = SmallSpace(
        small_hom,
        _hom_operators(small_hom, V1.delta, V2.delta, d_ring, f"D_V[{name}]"),
        _hom_conjugation(small_hom, hom, V2.tau, V1.sigma, f"T[{name}]"),
        _hom_conjugation(hom, small_hom, V2.sigma, V1.tau, f"S[{name}]"),
        _hom_conjugation(small_hom, small_hom, V2.identity, V1.identity, f"id_V[{name}]"),
    )
    return Contraction(DgModuleSpec(hom, D, d_ring, support), H, small, name)


def _tensor_apply(maps, label, sources, targets):
    """(φ1 ⊗ … ⊗ φk)(w1 ⊗ … ⊗ wk) with sign (−1)^{Σ_{i<j} |φ_j||w_i|}"""
    sign = 0
    passed = 0
    for m, w, src in zip(maps, label, sources):
        sign += (m.degree if m is not None else 0) * passed
        passed += src.degree(w)
    values = [src.basis(w) if m is None else m.on_generator(w) for m, w, src in zip(maps, label, sources)]
    if not all(values):
        return ModuleElem.zero(targets[0].n)
    out = tensor_product(values, targets)
    return -out if sign % 2 else out


def _factorwise(source, target, degree, maps_list, sources, targets, derivation=None, name=""):
    """Σ over lists of factor maps (None for identity) applied with the Koszul sign"""
    def rule(label):
        total = target.zero()
        for maps in maps_list:
            total = total + _tensor_apply(maps, label, sources, targets)
        return total

    return Operator(source, target, degree, rule=rule, derivation=derivation, name=name)


def tensor_contraction(cs, name=None):
    """Tensor trick: D = Σ id⊗…⊗δ_i⊗…, H = Σ ϖ⊗…⊗ϖ⊗h_i⊗id⊗…"""
    cs = list(cs)
    if len(cs) == 1:
        return cs[0]
    name = name or "⊗".join(c.name for c in cs)
    k = len(cs)
    mods = [c.module for c in cs]
    T = tensor_module(mods, name)
    d_ring = cs[0].ring_differential
    varpis = [projector(c) for c in cs]

    D = _factorwise(T, T, 1, [[c.delta if j == i else None for j, c in enumerate(cs)] for i in range(k)],
                    mods, mods, d_ring, f"D[{name}]")
    H = _factorwise(T, T, -1, [[varpis[j] if j < i else (cs[i].h if j == i else None) for j in range(k)]
                               for i in range(k)], mods, mods, None, f"H[{name}]")
    support = None
    if any(c.dg.support is not None for c in cs):
        support = _factorwise(T, T, 0, [[c.support for c in cs]], mods, mods, None, f"P[{name}]")

    Vs = [c.small_space() for c in cs]
    vmods = [V.module for V in Vs]
    TV = tensor_module(vmods, f"V[{name}]")
    small = SmallSpace(
        TV,
        _factorwise(TV, TV, 1, [[V.delta if j == i else None for j, V in enumerate(Vs)] for i in range(k)],
                    vmods, vmods, d_ring, f"D_V[{name}]"),
        _factorwise(TV, T, 0, [[V.tau for V in Vs]], vmods, mods, None, f"tau[{name}]"),
        _factorwise(T, TV, 0, [[V.sigma for V in Vs]], mods, vmods, None, f"sigma[{name}]"),
        _factorwise(TV, TV, 0, [[V.identity for V in Vs]], vmods, vmods, None, f"id_V[{name}]"),
    )
    return Contraction(DgModuleSpec(T, D, d_ring, support), H, small, name)


def koszul_permutation_sign(degrees, perm):
    """χ with w_1∧…∧w_k = χ · w_{perm[0]}∧…∧w_{perm[k-1]}: each inverted pair gives −(−1)^{|a||b|}"""
    sign = 1
    for a in range(len(perm)):
        for b in range(a + 1, len(perm)):
            if perm[a] > perm[b]:
                if not (degrees[perm[a]] * degrees[perm[b]]) % 2:
                    sign = -sign
    return sign


def alt_operator(module, factor_module, k, name="Alt"):
    """Graded antisymmetrizer (1/k!) Σ_σ χ_σ on the k-fold tensor power"""
    scale = Fraction(1, math.factorial(k))
    perms = list(itertools.permutations(range(k)))

    def rule(label):
        degrees = [factor_module.degree(w) for w in label]
        terms = {}
        for perm in perms:
            chi = koszul_permutation_sign(degrees, perm)
            key = tuple(label[p] for p in perm)
            terms[key] = terms.get(key, 0) + chi * scale
        return ModuleElem(module.n, {key: value for key, value in terms.items() if value})

    return Operator(module, module, 0, rule=rule, name=name)


def ring_contraction(n, r, d_ring, name="R"):
    """The coefficient ring as a contraction: one generator () of degree 0, h = 0"""
    module = FreeModule(name, n, r, ((),), {(): 0})
    delta = Operator(module, module, 1, {(): module.zero()}, derivation=d_ring, name=f"d[{name}]")
    ident = Identity(module)
    small = SmallSpace(module, delta, ident, ident, ident)
    return Contraction(DgModuleSpec(module, delta, d_ring), zero_map(module, module, -1, "0"), small, name)


def exterior_contraction(c, k, name=None):
    """Contraction on Λ^k W, realised as the Alt-image inside W^{⊗k}"""
    if k < 0:
        raise ValueError(f"Wedge degree must be nonnegative, got {k}")
    if k == 0:
        return ring_contraction(c.module.n, c.module.r, c.ring_differential, name or "Λ^0")
    if k == 1:
        return c
    name = name or f"Λ^{k}({c.name})"
    T = tensor_contraction([c] * k, f"{c.name}^⊗{k}")
    alt = alt_operator(T.module, c.module, k, f"Alt[{name}]")
    support = tabulate(Composite([alt, T.support]), name=f"P[{name}]") if T.dg.support is not None else alt
    H = tabulate(Composite([support, T.h, support]), name=f"H[{name}]")

    V = T.small_space()
    base_small = c.small_space()
    alt_v = alt_operator(V.module, base_small.module, k, f"Alt_V[{name}]")
    ident_v = tabulate(Composite([alt_v, V.identity]), name=f"id_V[{name}]")
    small = SmallSpace(
        V.module,
        V.delta,
        tabulate(Composite([V.tau, ident_v]), name=f"tau[{name}]"),
        tabulate(Composite([ident_v, V.sigma]), name=f"sigma[{name}]"),
        ident_v,
    )
    return Contraction(DgModuleSpec(T.module, T.delta, T.ring_differential, support), H, small, name)


def wedge_label(args):
    """Λ^k generator label of an argument tuple (bare label for k = 1)"""
    return args[0] if len(args) == 1 else tuple(args)


def wedge_args(label, k):
    """Inverse of wedge_label"""
    if k == 1:
        return (label,)
    return tuple(label)


def rational_basis(module):
    """Q-basis (η-monomial, generator) of a module over the point-case ring"""
    if module.n:
        raise NotPointCase(module.n)
    monos = [m for d in range(module.r + 1) for m in itertools.combinations(range(1, module.r + 1), d)]
    return [(m, g) for g in module.generators for m in monos]


def rational_vector(x, index):
    """Coordinates of x in a rational basis given as {(mono, label): position}"""
    vec = [0] * len(index)
    for label, coeff in x.items():
        for mono, poly in coeff.terms.items():
            vec[index[(mono, label)]] = poly.constant_value()
    return vec


def rational_matrix(m, source_basis=None, target_basis=None):
    """Exact sympy matrix of a map on the rational span (point case)"""
    source_basis = source_basis or rational_basis(m.source)
    target_basis = target_basis or rational_basis(m.target)
    index = {key: pos for pos, key in enumerate(target_basis)}
    n = m.source.n
    columns = []
    for mono, label in source_basis:
        x = ModuleElem(n, {label: CochainElem.eta(n, *mono)})
        columns.append([sympy.Rational(v.numerator, v.denominator) if isinstance(v, Fraction) else sympy.Integer(v)
                        for v in rational_vector(m(x), index)])
    if not columns:
        return sympy.zeros(len(target_basis), 0)
    return sympy.Matrix(columns).T


def lemma_identities(pc):
    """Closed-form checks of a perturbed contraction against direct inversion (point case)"""
    c = pc.base
    module = c.module
    basis = rational_basis(module)
    I = sympy.eye(len(basis))
    delta = rational_matrix(c.delta, basis, basis)
    h = rational_matrix(c.h, basis, basis)
    pert = rational_matrix(pc.perturbation, basis, basis)
    h_pert = rational_matrix(pc.h_pert, basis, basis)
    total = delta + pert
    inv_left = (I + pert * h).inv()
    inv_right = (I + h * pert).inv()
    small = c.small_space()
    small_basis = rational_basis(small.module)
    sigma = rational_matrix(small.sigma, basis, small_basis)
    tau = rational_matrix(small.tau, small_basis, basis)
    checks = [
        ("one-minus-dh", I - total * h_pert, (I - delta * h) * inv_left),
        ("one-minus-hd", I - h_pert * total, inv_right * (I - h * delta)),
        ("h-pert-inverse", h_pert, h * inv_left),
        ("sigma-pert-inverse", rational_matrix(pc.sigma_pert, basis, small_basis), sigma * inv_left),
        ("tau-pert-inverse", rational_matrix(pc.tau_pert, small_basis, basis), inv_right * tau),
    ]
    report = []
    for name, lhs, rhs in checks:
        diff = lhs - rhs
        ok = diff.is_zero_matrix
        report.append(_record(name, None, bool(ok),
                              "matches direct inversion" if ok else f"residual rank {diff.rank()}"))
    return report


def projector_rank_check(c):
    """rank τσ on the support equals rank of the small identity (point case)"""
    V = c.small_space()
    basis = rational_basis(c.module)
    support = rational_matrix(c.support, basis, basis)
    ts = rational_matrix(Composite([V.tau, V.sigma]), basis, basis) * support
    ident = rational_matrix(V.identity)
    big, small = ts.rank(), ident.rank()
    return _record("projector-rank", None, big == small, f"rank τσ = {big}, rank id_V = {small}")


def _rng_fraction(rng):
    value = 0
    while not value:
        value = int(rng.integers(-3, 4))
    return Fraction(value, int(rng.integers(1, 3)))


def random_contraction(seed, free=2, pairs=3):
    """Seeded contraction with a nilpotent perturbation, conjugated by id + N with N² = 0.

    Generators v_i (small), a_j ↦ b_j under δ with h the inverse on b_j.  The
    perturbation sends a_i into span{b_j : j < i} and v into span{b_j}.
    """
    rng = np.random.default_rng(seed)
    r = int(rng.integers(0, 2))
    n = 0
    v_deg = {("v", i): int(rng.integers(-1, 2)) for i in range(free)}
    a_deg = {("a", j): int(rng.integers(-1, 1)) for j in range(pairs)}
    degrees = dict(v_deg)
    for (_, j), d in a_deg.items():
        degrees[("a", j)] = d
        degrees[("b", j)] = d + 1
    gens = tuple(degrees)
    W = FreeModule(f"W{seed}", n, r, gens, degrees)
    V = FreeModule(f"V{seed}", n, r, tuple(v_deg), dict(v_deg))
    one = CochainElem.one(n)

    def elem(terms):
        return ModuleElem(n, {label: coeff for label, coeff in terms if coeff})

    def reach(src_deg, targets, shift):
        """Random combination of targets t with |t| = src_deg + shift (or η·t when r = 1)"""
        out = []
        for t in targets:
            if degrees[t] == src_deg + shift:
                out.append((t, one * _rng_fraction(rng)))
            elif r and degrees[t] == src_deg + shift - 1:
                out.append((t, CochainElem.eta(n, 1) * _rng_fraction(rng)))
        return out

    delta = Operator(W, W, 1, {("a", j): W.basis(("b", j)) for j in range(pairs)}, name="delta")
    h = Operator(W, W, -1, {("b", j): W.basis(("a", j)) for j in range(pairs)}, name="h")
    pert_table = {}
    for j in range(pairs):
        pert_table[("a", j)] = elem(reach(degrees[("a", j)], [("b", i) for i in range(j)], 1))
    for v in v_deg:
        pert_table[v] = elem(reach(degrees[v], [("b", i) for i in range(pairs)], 1))
    pert = Operator(W, W, 1, pert_table, name="pert")
    N_table = {}
    for j in range(pairs):
        for src in (("a", j), ("b", j)):
            N_table[src] = elem(reach(degrees[src], list(v_deg), 0))
    N = Operator(W, W, 0, N_table, name="N")
    g = tabulate(Identity(W) + N, name="g")
    g_inv = tabulate(Identity(W) - N, name="g_inv")

    tau = Operator(V, W, 0, {v: W.basis(v) for v in v_deg}, name="tau")
    sigma = Operator(W, V, 0, {v: V.basis(v) for v in v_deg}, name="sigma")
    small = SmallSpace(V, zero_map(V, V, 1, "delta_V"), tabulate(Composite([g, tau]), name="tau'"),
                       tabulate(Composite([sigma, g_inv]), name="sigma'"), Identity(V))
    c = Contraction(
        DgModuleSpec(W, tabulate(Composite([g, delta, g_inv]), name="delta'")),
        tabulate(Composite([g, h, g_inv]), name="h'"),
        small,
        f"random[{seed}]",
    )
    return c, tabulate(Composite([g, pert, g_inv]), name="pert'")


def toy_contraction():
    """a ↦ b under δ, h = δ⁻¹ on b, small v; perturbation a ↦ v so that (∂h)² = 0"""
    degrees = {"a": 0, "b": 1, "v": 1}
    W = FreeModule("toy", 0, 0, ("a", "b", "v"), degrees)
    V = FreeModule("toy-V", 0, 0, ("v",), {"v": 1})
    delta = Operator(W, W, 1, {"a": W.basis("b")}, name="delta")
    h = Operator(W, W, -1, {"b": W.basis("a")}, name="h")
    small = SmallSpace(V, zero_map(V, V, 1, "delta_V"), Operator(V, W, 0, {"v": W.basis("v")}, name="tau"),
                       Operator(W, V, 0, {"v": V.basis("v")}, name="sigma"), Identity(V))
    c = Contraction(DgModuleSpec(W, delta), h, small, "toy")
    pert = Operator(W, W, 1, {"a": W.basis("v")}, name="pert")
    return c, pert


def require_small(c):
    if c.small is None:
        raise MissingSmallSpace(f"Contraction {c.name} has no explicit small space")
    return c.small
