"""Lie pair local models: structure functions, CE differential, Bott modules, constructors.

A model lives on a polynomial chart with coordinates x1..xn and a frame e_1..e_N of L
(N = r + r') whose first r vectors span A.  B = L/A is identified with the span of
e_{r+1}..e_N.  Indices are 1-based throughout, as in the model file.
"""
import itertools
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import sympy
from sympy.polys.polyerrors import PolynomialError

from .errors import (
    ActionMorphismError,
    ConnectionTableError,
    FrameInversionError,
    ModelFileError,
    ModelValidationError,
    PolyParseError,
    ShapeMismatchError,
    SubalgebraClosureError,
    UnknownModuleTagError,
)
from .exactalg import (
    CochainElem,
    FreeModule,
    ModuleElem,
    PolyScalar,
    format_poly,
    normalize_monomial,
    parse_poly,
    random_poly,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LiePairModel:
    """Anchors ρ_i^j and structure functions c_ij^k of (L, A) in a frame"""

    n: int
    r: int
    rprime: int
    rho: tuple
    c: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if min(self.n, self.r, self.rprime) < 0:
            raise ShapeMismatchError(f"Negative dimension in (n, r, r') = ({self.n}, {self.r}, {self.rprime})")
        N = self.r + self.rprime
        if len(self.rho) != N:
            raise ShapeMismatchError(f"rho has {len(self.rho)} rows, expected r + r' = {N}")
        for i, row in enumerate(self.rho, start=1):
            if len(row) != self.n:
                raise ShapeMismatchError(f"rho row {i} has {len(row)} entries, expected n = {self.n}")
            for entry in row:
                if not isinstance(entry, PolyScalar) or entry.n != self.n:
                    raise ShapeMismatchError(f"rho row {i} holds a non-polynomial or wrong-chart entry")
        for key, value in self.c.items():
            if len(key) != 3 or not all(1 <= x <= N for x in key):
                raise ShapeMismatchError(f"Structure function index {key} outside 1..{N}")
            if not isinstance(value, PolyScalar) or value.n != self.n:
                raise ShapeMismatchError(f"Structure function {key} is not a polynomial on the chart")

    @property
    def N(self):
        return self.r + self.rprime

    @property
    def a_indices(self):
        return range(1, self.r + 1)

    @property
    def b_indices(self):
        return range(self.r + 1, self.N + 1)

    @property
    def frame(self):
        return range(1, self.N + 1)

    def zero(self):
        return PolyScalar.zero(self.n)

    def rho_(self, i, j):
        return self.rho[i - 1][j - 1]

    def c_(self, i, j, k):
        return self.c.get((i, j, k)) or PolyScalar.zero(self.n)

    def anchor(self, i, f):
        """ρ_i(f) = Σ_j ρ_i^j ∂f/∂x_j for a PolyScalar f"""
        out = PolyScalar.zero(self.n)
        for j in range(1, self.n + 1):
            coeff = self.rho[i - 1][j - 1]
            if coeff:
                out = out + coeff * f.derive(j)
        return out

    @cached_property
    def dA_x(self):
        """d_A(x_j) = Σ_{i≤r} ρ_i^j η^i"""
        out = {}
        for j in range(1, self.n + 1):
            value = CochainElem(self.n, {(i,): self.rho_(i, j) for i in self.a_indices})
            if value:
                out[j] = value
        return out

    @cached_property
    def dA_eta(self):
        """d_A(η^k) = −½ Σ_{i,j≤r} c_ij^k η^i η^j"""
        half = Fraction(-1, 2)
        out = {}
        for k in self.a_indices:
            value = CochainElem.zero(self.n)
            for i in self.a_indices:
                for j in self.a_indices:
                    coeff = self.c_(i, j, k)
                    if coeff and i != j:
                        value = value + CochainElem.eta(self.n, i, j) * (coeff * half)
            if value:
                out[k] = value
        return out


def _violation(invariant, indices, residual, message):
    return {
        'invariant': invariant,
        'indices': list(indices),
        'valid': False,
        'residual': format_poly(residual) if isinstance(residual, PolyScalar) else str(residual),
        'message': message,
    }


def validate(model):
    """List of violated Lie pair axioms; empty iff the model is a Lie pair"""
    violations = []
    frame = model.frame
    for i, j, k in itertools.product(frame, repeat=3):
        if i <= j:
            residual = model.c_(i, j, k) + model.c_(j, i, k)
            if residual:
                violations.append(_violation(
                    'antisymmetry', (i, j, k), residual,
                    f"c_{i}{j}^{k} + c_{j}{i}^{k} = {residual} != 0"))
    for i, j in itertools.product(model.a_indices, repeat=2):
        for k in model.b_indices:
            coeff = model.c_(i, j, k)
            if coeff:
                violations.append(_violation(
                    'subalgebroid-closure', (i, j, k), coeff,
                    f"c_{i}{j}^{k} = {coeff} but A must be closed under the bracket"))
    for i, j in itertools.product(frame, repeat=2):
        if i >= j:
            continue
        for s in range(1, model.n + 1):
            residual = model.anchor(i, model.rho_(j, s)) - model.anchor(j, model.rho_(i, s))
            for k in frame:
                residual = residual - model.c_(i, j, k) * model.rho_(k, s)
            if residual:
                violations.append(_violation(
                    'anchor-compatibility', (i, j, s), residual,
                    f"anchor fails to intertwine [e_{i}, e_{j}] on x{s}: residual {residual}"))
    for i, j, k in itertools.combinations(frame, 3):
        for m in frame:
            residual = PolyScalar.zero(model.n)
            for a, b, d in ((i, j, k), (j, k, i), (k, i, j)):
                residual = residual + model.anchor(a, model.c_(b, d, m))
                for l in frame:
                    residual = residual + model.c_(b, d, l) * model.c_(a, l, m)
            if residual:
                violations.append(_violation(
                    'jacobi', (i, j, k, m), residual,
                    f"Jacobi identity fails on (e_{i}, e_{j}, e_{k}) in component {m}: residual {residual}"))
    if violations:
        logger.warning("Model %s violates %d axioms", model.name or "<unnamed>", len(violations))
    return violations


def require_valid(model):
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    return model


def ce_differential(model, f):
    """d_A f = Σ ρ_i^j η^i ∂f/∂x_j − ½ Σ c_ij^k η^i η^j ι_k f"""
    out = CochainElem.zero(model.n)
    for j, dx in model.dA_x.items():
        derived = f.derive_x(j)
        if derived:
            out = out + dx * derived
    for k, de in model.dA_eta.items():
        contracted = f.contract(k)
        if contracted:
            out = out + de * contracted
    return out


@dataclass(frozen=True)
class ConnectionTable:
    """Christoffel symbols of an L-connection on the trivialized π!L.

    gamma:    ∇_{e_i} e_j = Σ_k Γ_ij^k e_k, all indices in 1..N
    gamma_LA: ∇_{e_i} ∂η_j = Σ_k Γ_ij^k ∂η_k, i in 1..N, j, k in 1..r
    gamma_AL: ∇_{∂η_i} e_j = Σ_k Γ_ij^k ∂η_k, i in 1..r, j in 1..N, k in 1..r
    Missing entries are zero.
    """

    n: int
    gamma: dict = field(default_factory=dict)
    gamma_LA: dict = field(default_factory=dict)
    gamma_AL: dict = field(default_factory=dict)
    label: str = "explicit"

    def G(self, i, j, k):
        return self.gamma.get((i, j, k)) or PolyScalar.zero(self.n)

    def LA(self, i, j, k):
        return self.gamma_LA.get((i, j, k)) or PolyScalar.zero(self.n)

    def AL(self, i, j, k):
        return self.gamma_AL.get((i, j, k)) or PolyScalar.zero(self.n)


def connection_violations(model, table):
    """Admissibility report for a Christoffel table"""
    violations = []
    N, r = model.N, model.r
    for name, entries, ranges in (
        ('gamma', table.gamma, (N, N, N)),
        ('gamma_LA', table.gamma_LA, (N, r, r)),
        ('gamma_AL', table.gamma_AL, (r, N, r)),
    ):
        for key in entries:
            if len(key) != 3 or not all(1 <= x <= bound for x, bound in zip(key, ranges)):
                violations.append(_violation('shape', key, 0, f"{name} index {key} out of range {ranges}"))
    for i in model.frame:
        for j in model.b_indices:
            for k in model.frame:
                got = table.G(i, j, k)
                if k > model.r and i <= model.r:
                    residual = got - model.c_(i, j, k)
                    if residual:
                        violations.append(_violation(
                            'bott-extension', (i, j, k), residual,
                            f"Γ_{i}{j}^{k} = {got} but the Bott extension requires c_{i}{j}^{k} = {model.c_(i, j, k)}"))
                elif k <= model.r and got:
                    violations.append(_violation(
                        'splitting-compatibility', (i, j, k), got,
                        f"Γ_{i}{j}^{k} = {got} but B-slots must not leak into A"))
    return violations


def default_connection(model):
    gamma = {}
    for i in model.frame:
        for j in model.b_indices:
            for k in model.b_indices:
                coeff = model.c_(i, j, k)
                if coeff:
                    gamma[(i, j, k)] = coeff
    return ConnectionTable(model.n, gamma, label="default")


def extended_connection(model, mode="default"):
    """Default extension of the Bott connection, or check an explicit table"""
    if isinstance(mode, str):
        if mode != "default":
            raise ValueError(f"Unknown connection mode '{mode}'")
        return default_connection(model)
    violations = connection_violations(model, mode)
    if violations:
        raise ConnectionTableError(violations)
    return mode


def random_connection(model, seed, vertical=False):
    """Admissible table with seeded small-integer fills in every unconstrained slot"""
    rng = np.random.default_rng(seed)
    degree = 1 if model.n else 0
    gamma = {}
    for i, j, k in itertools.product(model.frame, repeat=3):
        if j > model.r and k > model.r and i <= model.r:
            value = model.c_(i, j, k)
        elif j > model.r and k <= model.r:
            continue
        else:
            value = random_poly(rng, model.n, degree, -2, 2)
        if value:
            gamma[(i, j, k)] = value
    gamma_LA, gamma_AL = {}, {}
    if vertical:
        for i, j, k in itertools.product(model.frame, model.a_indices, model.a_indices):
            value = random_poly(rng, model.n, degree, -2, 2)
            if value:
                gamma_LA[(i, j, k)] = value
        for i, j, k in itertools.product(model.a_indices, model.frame, model.a_indices):
            value = random_poly(rng, model.n, degree, -2, 2)
            if value:
                gamma_AL[(i, j, k)] = value
    label = f"random(seed={seed}{', vertical' if vertical else ''})"
    return ConnectionTable(model.n, gamma, gamma_LA, gamma_AL, label)


_WEDGE_TAG = re.compile(r"^wedge(\d+)-dual-B(-End-B)?$")

MODULE_TAGS = ("trivial", "B", "dual-B", "End-B", "dual-B-End-B", "wedge{k}-dual-B", "wedge{k}-dual-B-End-B")

# kind marker and factor types of each basis label
_FIXED_TAGS = {
    "trivial": ("1", ()),
    "B": ("b", ("vec",)),
    "dual-B": ("b*", ("cov",)),
    "End-B": ("end", ("vec", "cov")),
    "dual-B-End-B": ("b*end", ("cov", "vec", "cov")),
}


def _tag_layout(tag):
    if tag in _FIXED_TAGS:
        kind, types = _FIXED_TAGS[tag]
        return kind, types, None
    match = _WEDGE_TAG.match(tag) if isinstance(tag, str) else None
    if not match:
        raise UnknownModuleTagError(f"Unknown module tag '{tag}' (known: {', '.join(MODULE_TAGS)})")
    power = int(match.group(1))
    if match.group(2):
        return "wedge-end", ("wedge", "vec", "cov"), power
    return "wedge", ("wedge",), power


def bott_module(model, tag):
    """Free module of the induced representation named by tag"""
    kind, types, power = _tag_layout(tag)
    ranges = []
    for t in types:
        if t == "wedge":
            ranges.append(list(itertools.combinations(model.b_indices, power)))
        else:
            ranges.append(list(model.b_indices))
    generators = tuple((kind,) + combo for combo in itertools.product(*ranges))
    return FreeModule(tag, model.n, model.r, generators, {g: 0 for g in generators})


def _factor_nabla(model, kind, i, value):
    """∇_{e_i} on one tensor factor: list of (coefficient, new factor value)"""
    out = []
    if kind == "vec":
        for k in model.b_indices:
            coeff = model.c_(i, value, k)
            if coeff:
                out.append((coeff, k))
    elif kind == "cov":
        for l in model.b_indices:
            coeff = model.c_(i, l, value)
            if coeff:
                out.append((-coeff, l))
    else:
        for pos, m in enumerate(value):
            for l in model.b_indices:
                coeff = model.c_(i, l, m)
                if not coeff:
                    continue
                sign, mono = normalize_monomial(value[:pos] + (l,) + value[pos + 1:])
                if sign:
                    out.append((-coeff if sign > 0 else coeff, mono))
    return out


def bott_action(model, tag, i, label):
    """∇^Bott_{e_i} applied to a basis label, i in 1..r"""
    _, types, _ = _tag_layout(tag)
    out = ModuleElem.zero(model.n)
    for pos, kind in enumerate(types):
        for coeff, value in _factor_nabla(model, kind, i, label[pos + 1]):
            new = label[:pos + 1] + (value,) + label[pos + 2:]
            out = out + ModuleElem(model.n, {new: CochainElem.scalar(model.n, coeff)})
    return out


def bott_connection_form(model, tag):
    """label ↦ Σ_{i≤r} η^i ∇_{e_i} label, the module part of d^Bott"""
    module = bott_module(model, tag)
    table = {}
    for label in module.generators:
        value = module.zero()
        for i in model.a_indices:
            value = value + bott_action(model, tag, i, label).scale(CochainElem.eta(model.n, i))
        table[label] = value
    return module, table


def bott_differential(model, tag):
    """(module, d^Bott) for repeated application"""
    module, table = bott_connection_form(model, tag)

    def apply(omega):
        out = module.zero()
        for label, coeff in omega.items():
            d_coeff = ce_differential(model, coeff)
            if d_coeff:
                out = out + ModuleElem(model.n, {label: d_coeff})
            even, odd = coeff.parity_parts()
            out = out + table[label].scale(even - odd)
        return out

    return module, apply


def module_covariant_derivative(model, tag, omega):
    """d^Bott on the induced module named by tag"""
    _, apply = bott_differential(model, tag)
    return apply(omega)


def vector_field_bracket(X, Y, n):
    """Commutator of polynomial vector fields given by component lists"""
    out = []
    for s in range(n):
        value = PolyScalar.zero(n)
        for t in range(n):
            value = value + X[t] * Y[s].derive(t + 1) - Y[t] * X[s].derive(t + 1)
        out.append(value)
    return out


def _complete_constants(constants, n):
    """Dict (i, j, k) ↦ PolyScalar, filling c_ji^k = −c_ij^k where absent"""
    items = constants.items() if isinstance(constants, dict) else ((tuple(e[:3]), e[3]) for e in constants)
    table = {}
    for key, value in items:
        if not isinstance(value, PolyScalar):
            value = parse_poly(value, n) if isinstance(value, str) else PolyScalar.const(n, value)
        table[tuple(key)] = value
    for (i, j, k), value in list(table.items()):
        table.setdefault((j, i, k), -value)
    return {key: value for key, value in table.items() if value}


def _check_subalgebra(model):
    for (i, j, k), value in model.c.items():
        if i <= model.r and j <= model.r and k > model.r and value:
            raise SubalgebraClosureError(
                f"[e_{i}, e_{j}] has component {value} along e_{k}, outside the first {model.r} frame vectors")


def make_point_pair(dim, r, constants=None, name="point-pair"):
    """Lie algebra of dimension dim with subalgebra spanned by the first r basis vectors.

    constants maps (i, j, k) to c_ij^k (or is a list of [i, j, k, value]); c_ji^k
    defaults to −c_ij^k when only one of the pair is given.
    """
    c = _complete_constants(constants or {}, 0)
    model = LiePairModel(0, r, dim - r, tuple(() for _ in range(dim)), c, name)
    _check_subalgebra(model)
    return require_valid(model)


def _as_field(components, n):
    return [c if isinstance(c, PolyScalar) else parse_poly(c, n) for c in components]


def make_foliation(n, k, frame=None, name="foliation"):
    """L = T_M on a chart, A = F spanned by the first k fields of a polynomial frame"""
    if frame is None:
        fields = [[PolyScalar.const(n, int(s == t)) for s in range(n)] for t in range(n)]
    else:
        if len(frame) != n:
            raise ShapeMismatchError(f"Frame has {len(frame)} fields, expected {n}")
        fields = [_as_field(f, n) for f in frame]
    syms = sympy.symbols(f"x1:{n + 1}") if n else ()
    matrix = sympy.Matrix([[p.to_sympy() for p in f] for f in fields])
    det = sympy.expand(matrix.det())
    if not det.is_number or det == 0:
        raise FrameInversionError(f"Frame determinant {det} is not a nonzero constant")
    inverse = matrix.inv()
    try:
        inv = [[PolyScalar.from_sympy(sympy.cancel(inverse[s, t]), n) for t in range(n)] for s in range(n)]
    except (PolynomialError, PolyParseError) as e:
        raise FrameInversionError("Frame inverse is not polynomial") from e
    c = {}
    for i, j in itertools.product(range(n), repeat=2):
        bracket = vector_field_bracket(fields[i], fields[j], n)
        for m in range(n):
            value = PolyScalar.zero(n)
            for s in range(n):
                value = value + bracket[s] * inv[s][m]
            if value:
                c[(i + 1, j + 1, m + 1)] = value
    logger.debug("Foliation frame structure functions: %d nonzero", len(c))
    model = LiePairModel(n, k, n - k, tuple(tuple(f) for f in fields), c, name)
    _check_subalgebra(model)
    return require_valid(model)


def make_action(dim, constants, fields, name="action"):
    """g-manifold pair: A = g ⋉ M inside L = (g ⋉ M) ⋈ T_M.

    fields[i] holds the components of the fundamental vector field of a_{i+1};
    the frame is a_1..a_dim followed by ∂x_1..∂x_n.
    """
    if len(fields) != dim:
        raise ShapeMismatchError(f"Expected {dim} action fields, got {len(fields)}")
    n = len(fields[0]) if fields else 0
    hats = [_as_field(f, n) for f in fields]
    g = _complete_constants(constants or {}, n)
    for i, j in itertools.combinations(range(dim), 2):
        lhs = vector_field_bracket(hats[i], hats[j], n)
        rhs = [PolyScalar.zero(n) for _ in range(n)]
        for k in range(dim):
            coeff = g.get((i + 1, j + 1, k + 1))
            if coeff:
                rhs = [a + coeff * b for a, b in zip(rhs, hats[k])]
        if lhs != rhs:
            raise ActionMorphismError(
                f"[â_{i + 1}, â_{j + 1}] = {[str(p) for p in lhs]} differs from the image of [a_{i + 1}, a_{j + 1}]")
    c = dict(g)
    for i in range(dim):
        for s in range(n):
            for t in range(n):
                value = hats[i][t].derive(s + 1)
                if value:
                    c[(i + 1, dim + s + 1, dim + t + 1)] = -value
                    c[(dim + s + 1, i + 1, dim + t + 1)] = value
    rho = [tuple(h) for h in hats]
    rho += [tuple(PolyScalar.const(n, int(s == t)) for t in range(n)) for s in range(n)]
    model = LiePairModel(n, dim, n, tuple(rho), c, name)
    _check_subalgebra(model)
    return require_valid(model)


def model_to_dict(model):
    """JSON document of a model (inverse of model_from_dict)"""
    return {
        'name': model.name,
        'n': model.n,
        'r': model.r,
        'rprime': model.rprime,
        'rho': [[format_poly(p) for p in row] for row in model.rho],
        'c': [[i, j, k, format_poly(v)] for (i, j, k), v in sorted(model.c.items()) if v],
    }


def model_from_dict(data):
    """Build a model from a structurally validated JSON document"""
    n, r, rprime = data['n'], data['r'], data['rprime']
    rho = []
    for i, row in enumerate(data['rho']):
        parsed = []
        for j, text in enumerate(row):
            try:
                parsed.append(parse_poly(text, n))
            except PolyParseError as e:
                raise ModelFileError(str(e), location=f"rho[{i}][{j}]") from e
        rho.append(tuple(parsed))
    c = {}
    for idx, entry in enumerate(data.get('c', [])):
        key = tuple(entry[:3])
        if key in c:
            raise ModelFileError(f"Duplicate structure function entry {list(key)}", location=f"c[{idx}]")
        try:
            value = parse_poly(entry[3], n)
        except PolyParseError as e:
            raise ModelFileError(str(e), location=f"c[{idx}][3]") from e
        c[key] = value
    try:
        return LiePairModel(n, r, rprime, tuple(rho), {k: v for k, v in c.items() if v},
                            data.get('name', ''))
    except ShapeMismatchError as e:
        raise ModelFileError(str(e), location="rho/c") from e
