"""Atiyah cocycles of a Lie pair and of its pullback dg Lie algebroid.

Both live in Hom-spaces built by the hpl constructors: the dg-side cocycle At in
Hom(π!L ⊗ π!L, π!L), the pair-side cocycle at in Hom(B ⊗ B, B) with coefficients in
C∞(A[1]) carrying the A∨ leg.  The first tensor slot is the form slot.
"""
import itertools
import logging
from dataclasses import dataclass
from functools import cached_property

from .exactalg import INHOMOGENEOUS, CochainElem, ModuleElem, tensor_product
from .hpl import exterior_contraction, hom_contraction, projector, ring_contraction, tensor_contraction
from .liepair import (
    default_connection,
    extended_connection,
    module_covariant_derivative,
    random_connection,
)
from .pidgla import D, E, probe_coefficients, pullback

logger = logging.getLogger(__name__)


def _signed(coeff, odd):
    if not odd:
        return coeff
    even, odd_part = coeff.parity_parts()
    return even - odd_part


def hom_apply(hom, phi, x):
    """Evaluate a Hom element on an element of its source"""
    by_input = {}
    for (out, inner), coeff in phi.items():
        by_input.setdefault(inner, []).append((out, coeff))
    result = hom.target.zero()
    for w, a in x.items():
        for out, c in by_input.get(w, ()):
            value = c * _signed(a, hom.degree((out, w)) % 2)
            if value:
                result = result + ModuleElem(hom.n, {out: value})
    return result


@dataclass(frozen=True)
class MultiHom:
    """Multilinear map stored as an element of a Hom module over generator tuples"""

    hom: object
    element: ModuleElem
    arity: int
    degree: int
    name: str = ""

    @cached_property
    def by_input(self):
        table = {}
        for (out, inner), coeff in self.element.items():
            table.setdefault(inner, []).append((out, coeff))
        return table

    def value(self, in_label):
        """Value on a source generator"""
        return ModuleElem(self.hom.n, {out: c for out, c in self.by_input.get(in_label, ())})

    def __call__(self, x):
        return hom_apply(self.hom, self.element, x)

    def _with(self, element, name):
        return MultiHom(self.hom, element, self.arity, self.degree, name)

    def __add__(self, other):
        return self._with(self.element + other.element, f"{self.name}+{other.name}")

    def __sub__(self, other):
        return self._with(self.element - other.element, f"{self.name}-{other.name}")

    def scale(self, c):
        return self._with(self.element.scale(c), self.name)

    def is_zero(self):
        return not self.element


class FormSpaces:
    """Λ^k-forms and End-valued Λ^k-forms over one contraction, built lazily per k"""

    def __init__(self, base, side):
        self.base = base
        self.side = side
        self._exterior = {}
        self._scalar = {}
        self._end = {}

    @property
    def module(self):
        return self.base.module

    @cached_property
    def ring(self):
        return ring_contraction(self.module.n, self.module.r, self.base.ring_differential, "R")

    def exterior(self, k):
        if k not in self._exterior:
            self._exterior[k] = exterior_contraction(self.base, k)
        return self._exterior[k]

    def scalar(self, k):
        """Hom(Λ^k W, R)"""
        if k not in self._scalar:
            self._scalar[k] = hom_contraction(self.exterior(k), self.ring, f"Λ^{k}∨[{self.side}]")
        return self._scalar[k]

    def end(self, k):
        """Hom(Λ^k W ⊗ W, W)"""
        if k not in self._end:
            source = tensor_contraction([self.exterior(k), self.base], f"Λ^{k}⊗W[{self.side}]")
            self._end[k] = hom_contraction(source, self.base, f"Λ^{k}End[{self.side}]")
        return self._end[k]


def form_spaces(model, side):
    """FormSpaces of the dg side (π!L, Q) or of the pair side (B, d^Bott)"""
    pi = pullback(model)
    if side not in pi.spaces:
        if side == "dgla":
            pi.spaces[side] = FormSpaces(pi.contraction, side)
        elif side == "pair":
            pi.spaces[side] = FormSpaces(pi.bott, side)
        else:
            raise ValueError(f"Unknown side '{side}' (expected 'pair' or 'dgla')")
    return pi.spaces[side]


def resolve_connection(model, table=None, seed=None, vertical=False):
    """Default table, a seeded random admissible table, or a checked explicit one"""
    model = pullback(model).model
    if table is not None:
        return extended_connection(model, table)
    if seed is not None:
        return extended_connection(model, random_connection(model, seed, vertical))
    return default_connection(model)


def _connection_on_generators(model, table, lam, eps):
    n = model.n
    kind_l, i = lam
    kind_e, j = eps
    if kind_l == "d" and kind_e == "d":
        return ModuleElem.zero(n)
    if kind_l == "e" and kind_e == "e":
        return ModuleElem(n, {E(k): CochainElem.scalar(n, table.G(i, j, k)) for k in model.frame})
    if kind_l == "e":
        return ModuleElem(n, {D(k): CochainElem.scalar(n, table.LA(i, j, k)) for k in model.a_indices})
    return ModuleElem(n, {D(k): CochainElem.scalar(n, table.AL(i, j, k)) for k in model.a_indices})


def anchor_action(model, lam, g):
    """ρ(λ)(g): ∂/∂η^i for ∂η_i, the frame-flat lift Σ ρ_i^j ∂x_j for e_i"""
    kind, i = lam
    if kind == "d":
        return g.contract(i)
    out = CochainElem.zero(model.n)
    for j in range(1, model.n + 1):
        rho = model.rho_(i, j)
        if rho:
            derived = g.derive_x(j)
            if derived:
                out = out + derived * rho
    return out


def covariant_derivative(model, table, lam, eps):
    """∇_λ ε for sections λ, ε of π!L"""
    model = pullback(model).model
    module_degree = {"d": -1, "e": 0}
    out = ModuleElem.zero(model.n)
    for lam_label, f in lam.items():
        inner = ModuleElem.zero(model.n)
        odd = module_degree[lam_label[0]] % 2
        for eps_label, g in eps.items():
            dg = anchor_action(model, lam_label, g)
            if dg:
                inner = inner + ModuleElem(model.n, {eps_label: dg})
            value = _connection_on_generators(model, table, lam_label, eps_label)
            if value:
                inner = inner + value.scale(_signed(g, odd))
        out = out + inner.scale(f)
    return out


def dgla_connection(model, table=None):
    """∇ on generator pairs, stored in Hom(π!L ⊗ π!L, π!L) (not tensorial in the second slot)"""
    pi = pullback(model)
    table = resolve_connection(pi, table)
    space = form_spaces(pi, "dgla").end(1)
    S = pi.module
    terms = {}
    for lam, eps in itertools.product(S.generators, repeat=2):
        for out, coeff in _connection_on_generators(pi.model, table, lam, eps).items():
            terms[(out, (lam, eps))] = coeff
    return MultiHom(space.module, ModuleElem(pi.model.n, terms), 2, 0, "nabla")


def connection_properties(model, table=None):
    """∇_{∂η_i} ∂η_j = 0 and ∇_{e_l} i_B(b) = i_B(∇_{e_l} b)"""
    pi = pullback(model)
    table = resolve_connection(pi, table)
    m = pi.model
    S = pi.module
    records = []
    for i, j in itertools.product(m.a_indices, repeat=2):
        value = covariant_derivative(pi, table, S.basis(D(i)), S.basis(D(j)))
        records.append({'check': "nabla-AA", 'generator': str((D(i), D(j))), 'valid': not value,
                        'message': f"∇_(∂η{i}) ∂η{j} = {value}"})
    for l in m.frame:
        for j in m.b_indices:
            got = covariant_derivative(pi, table, S.basis(E(l)), S.basis(E(j)))
            expected = ModuleElem(m.n, {E(k): CochainElem.scalar(m.n, table.G(l, j, k)) for k in m.b_indices})
            records.append({'check': "nabla-iB", 'generator': str((E(l), E(j))), 'valid': got == expected,
                            'message': f"∇_(e{l}) i_B(b{j}) = {got}"})
    return records


def atiyah_direct(model, table, lam, eps, lam_degree):
    """Q∇_λε − ∇_{Qλ}ε − (−1)^{|λ|}∇_λ(Qε) for homogeneous λ of total degree lam_degree"""
    pi = pullback(model)
    q = pi.q
    first = q(covariant_derivative(pi, table, lam, eps))
    second = covariant_derivative(pi, table, q(lam), eps)
    third = covariant_derivative(pi, table, lam, q(eps))
    return first - second + third if lam_degree % 2 else first - second - third


def dgla_atiyah(model, table=None):
    """At on every generator pair of π!L, as a degree-1 element of Hom(π!L ⊗ π!L, π!L)"""
    pi = pullback(model)
    table = resolve_connection(pi, table)
    space = form_spaces(pi, "dgla").end(1)
    S = pi.module
    terms = {}
    for lam, eps in itertools.product(S.generators, repeat=2):
        value = atiyah_direct(pi, table, S.basis(lam), S.basis(eps), S.degree(lam))
        for out, coeff in value.items():
            terms[(out, (lam, eps))] = coeff
    logger.debug("At on %s: %d nonzero entries", pi.model.name, len(terms))
    return MultiHom(space.module, ModuleElem(pi.model.n, terms), 2, 1, "At")


def tensoriality_check(model, table=None):
    """At(fλ, gε) = (−1)^{|λ||g| + |f| + |g|} fg At(λ, ε) on probe coefficients"""
    pi = pullback(model)
    table = resolve_connection(pi, table)
    S = pi.module
    probes = [p for p in probe_coefficients(pi.model) if p.grade() != INHOMOGENEOUS]
    records = []
    failures = 0
    for lam, eps in itertools.product(S.generators, repeat=2):
        base = atiyah_direct(pi, table, S.basis(lam), S.basis(eps), S.degree(lam))
        for f, g in itertools.product(probes, repeat=2):
            fd, gd = f.grade(), g.grade()
            got = atiyah_direct(pi, table, S.basis(lam).scale(f), S.basis(eps).scale(g), S.degree(lam) + fd)
            sign = (S.degree(lam) * gd + fd + gd) % 2
            expected = base.scale(f * g)
            if sign:
                expected = -expected
            if got != expected:
                failures += 1
                records.append({'check': "At-tensorial", 'generator': str((lam, eps)), 'valid': False,
                                'message': f"At({f}·{lam}, {g}·{eps}) = {got}, expected {expected}"})
    if not failures:
        records.append({'check': "At-tensorial", 'generator': None, 'valid': True,
                        'message': f"bilinear on {len(probes)}² coefficient pairs per generator pair"})
    return records


def dgla_closedness(model, at_form):
    """D(At) in the Hom differential induced by Q"""
    space = form_spaces(model, "dgla").end(1)
    return space.delta(at_form.element)


def _b_nabla(model, table, a, vec):
    """∇_{e_a} on Σ f_l Ē_l given as {l: PolyScalar}"""
    out = {}

    def add(k, value):
        if value:
            total = out[k] + value if k in out else value
            if total:
                out[k] = total
            else:
                out.pop(k, None)

    for l, f in vec.items():
        add(l, model.anchor(a, f))
        for k in model.b_indices:
            coeff = table.G(a, l, k)
            if coeff:
                add(k, f * coeff)
    return out


def curvature(model, table, p, i, j):
    """R(e_p, e_i) Ē_j as {k: PolyScalar}"""
    unit = {j: model.zero() + 1}
    first = _b_nabla(model, table, p, _b_nabla(model, table, i, unit))
    second = _b_nabla(model, table, i, _b_nabla(model, table, p, unit))
    out = dict(first)
    for k, value in second.items():
        out[k] = out.get(k, model.zero()) - value
    for a in model.frame:
        coeff = model.c_(p, i, a)
        if not coeff:
            continue
        for k, value in _b_nabla(model, table, a, unit).items():
            out[k] = out.get(k, model.zero()) - coeff * value
    return {k: v for k, v in out.items() if v}


def curvature_formula(model, table, p, i, j):
    """R_{pij}^k from Christoffel symbols directly"""
    out = {}
    for k in model.b_indices:
        value = model.anchor(p, table.G(i, j, k)) - model.anchor(i, table.G(p, j, k))
        for m in model.b_indices:
            value = value + table.G(i, j, m) * table.G(p, m, k) - table.G(p, j, m) * table.G(i, m, k)
        for a in model.frame:
            value = value - model.c_(p, i, a) * table.G(a, j, k)
        if value:
            out[k] = value
    return out


def _pair_form(pi, table, curv, name):
    m = pi.model
    space = form_spaces(pi, "pair").end(1)
    terms = {}
    for i, j in itertools.product(m.b_indices, repeat=2):
        for p in m.a_indices:
            for k, value in curv(m, table, p, i, j).items():
                key = (("b", k), (("b", i), ("b", j)))
                piece = CochainElem.eta(m.n, p) * value
                terms[key] = terms[key] + piece if key in terms else piece
    return MultiHom(space.module, ModuleElem(m.n, terms), 2, 1, name)


def pair_atiyah(model, table=None):
    """at(ē_i, ē_j) = Σ_p η^p R(e_p, e_i)Ē_j in Hom(B ⊗ B, B)"""
    pi = pullback(model)
    return _pair_form(pi, resolve_connection(pi, table), curvature, "at")


def pair_atiyah_formula(model, table=None):
    pi = pullback(model)
    return _pair_form(pi, resolve_connection(pi, table), curvature_formula, "at-formula")


def as_bott_cochain(model, form):
    """Relabel a Hom(B ⊗ B, B) element as a B∨ ⊗ End B valued cochain"""
    return form.element.relabel(lambda label: ("b*end", label[1][0][1], label[0][1], label[1][1][1]))


def pair_closedness(model, form):
    """(d^Bott residual in B∨ ⊗ End B, Hom-differential residual)"""
    pi = pullback(model)
    bott = module_covariant_derivative(pi.model, "dual-B-End-B", as_bott_cochain(pi.model, form))
    return bott, form_spaces(pi, "pair").end(1).delta(form.element)


def proj_Pi12(model, theta):
    """p_B ∘ Θ ∘ (τ ⊗ τ)"""
    space = form_spaces(model, "dgla").end(1)
    return MultiHom(space.small.module, space.small.sigma(theta.element), theta.arity, theta.degree,
                    f"Pi12({theta.name})")


def T12(model, theta):
    """τ ∘ Θ ∘ (p_B ⊗ p_B) for a pair-side Θ"""
    space = form_spaces(model, "dgla").end(1)
    return MultiHom(space.module, space.small.tau(theta.element), theta.arity, theta.degree,
                    f"T12({theta.name})")


def homotopy_H12(model, theta):
    """p̃_A∘Θ + (−1)^{|Θ|} ϖ∘Θ∘(p̃_A⊗id + ϖ⊗p̃_A), evaluated generator pair by generator pair"""
    pi = pullback(model)
    space = form_spaces(pi, "dgla").end(1)
    S = pi.module
    p = pi.maps.p_tilde_A
    varpi = projector(pi.contraction)
    terms = ModuleElem.zero(S.n)
    for lam, eps in itertools.product(S.generators, repeat=2):
        x, y = S.basis(lam), S.basis(eps)
        shifted = tensor_product([p(x), y], [S, S])
        tail = tensor_product([varpi(x), p(y)], [S, S])
        shifted = shifted - tail if S.degree(lam) % 2 else shifted + tail
        value = p(theta.value((lam, eps)))
        rest = varpi(theta(shifted))
        value = value - rest if theta.degree % 2 else value + rest
        for out, coeff in value.items():
            terms = terms + ModuleElem(S.n, {(out, (lam, eps)): coeff})
    return MultiHom(space.module, terms, theta.arity, theta.degree - 1, f"H12({theta.name})")


def compare_theoremB(model, table=None, seed=None, vertical=False):
    """Π¹₂(At) − at for one admissible connection: {'equal', 'residual', 'connection'}"""
    pi = pullback(model)
    table = resolve_connection(pi, table, seed, vertical)
    projected = proj_Pi12(pi, dgla_atiyah(pi, table))
    at = pair_atiyah(pi, table)
    residual = projected.element - at.element
    if residual:
        logger.warning("Π¹₂(At) != at on %s with %s", pi.model.name, table.label)
    return {'equal': not residual, 'residual': residual, 'connection': table.label}


def atiyah_checks(model, table=None):
    """Cocycle conditions on both sides plus the connection and tensoriality checks"""
    pi = pullback(model)
    table = resolve_connection(pi, table)
    records = connection_properties(pi, table)
    at = pair_atiyah(pi, table)
    formula = pair_atiyah_formula(pi, table)
    records.append({'check': "at-formula", 'generator': None, 'valid': at.element == formula.element,
                    'message': "curvature and Christoffel expressions agree"
                    if at.element == formula.element else f"difference {at.element - formula.element}"})
    bott, hom = pair_closedness(pi, at)
    records.append({'check': "at-closed", 'generator': None, 'valid': not bott and not hom,
                    'message': f"d_CE(at) = {bott}, D(at) = {hom}"})
    big = dgla_atiyah(pi, table)
    residual = dgla_closedness(pi, big)
    records.append({'check': "At-closed", 'generator': None, 'valid': not residual,
                    'message': f"D(At) = {residual}"})
    records += tensoriality_check(pi, table)
    return records
