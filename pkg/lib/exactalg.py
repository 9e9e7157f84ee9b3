"""Exact scalars and the graded coefficient ring C∞(A[1]) = Γ(Λ A∨) on a polynomial chart.

PolyScalar is a polynomial in x1..xn with Fraction coefficients, CochainElem a sparse
combination of sorted η-monomials with PolyScalar coefficients, and ModuleElem a
combination of named generators of a free graded module with CochainElem coefficients
on the left.  All values are immutable once built.
"""
import itertools
import logging
import re
from tokenize import TokenError
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations
from sympy.polys.polyerrors import CoercionFailed, GeneratorsError, PolynomialError

from .errors import PolyParseError, ShapeMismatchError

logger = logging.getLogger(__name__)

INHOMOGENEOUS = "inhomogeneous"
ANY_DEGREE = "any degree"

# sorted tuple of η indices in 1..r; () is the unit monomial
ExtMonomial = tuple

_TRANSFORMATIONS = standard_transformations + (convert_xor,)
_IDENTIFIER = re.compile(r"[A-Za-z_]\w*")
_FLOAT = re.compile(r"\d*\.\d+|\d+\.\d*")
_BAD_CHAR = re.compile(r"[^\w\s+\-*/^().]")


def _as_fraction(value):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"Not an exact scalar: {value!r}")


class PolyScalar:
    """Polynomial in x1..xn with exact rational coefficients (a rational when n = 0)"""

    __slots__ = ("n", "terms")

    def __init__(self, n, terms=None):
        clean = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(exps)
            if len(exps) != n or any(e < 0 for e in exps):
                raise ShapeMismatchError(f"Exponent vector {exps} does not fit chart dimension {n}")
            coeff = _as_fraction(coeff)
            if coeff:
                clean[exps] = clean.get(exps, 0) + coeff
                if not clean[exps]:
                    del clean[exps]
        self.n = n
        self.terms = clean

    @classmethod
    def _raw(cls, n, terms):
        obj = cls.__new__(cls)
        obj.n = n
        obj.terms = terms
        return obj

    @classmethod
    def const(cls, n, value):
        value = _as_fraction(value)
        return cls._raw(n, {(0,) * n: value} if value else {})

    @classmethod
    def var(cls, n, j):
        if not 1 <= j <= n:
            raise ValueError(f"Coordinate index {j} out of range 1..{n}")
        exps = [0] * n
        exps[j - 1] = 1
        return cls._raw(n, {tuple(exps): Fraction(1)})

    @classmethod
    def zero(cls, n):
        return cls._raw(n, {})

    def _coerce(self, other):
        if isinstance(other, PolyScalar):
            if other.n != self.n:
                raise ShapeMismatchError(f"Chart dimensions differ: {self.n} vs {other.n}")
            return other
        if isinstance(other, (int, Fraction)):
            return PolyScalar.const(self.n, other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for exps, coeff in other.terms.items():
            total = out.get(exps, 0) + coeff
            if total:
                out[exps] = total
            else:
                out.pop(exps, None)
        return PolyScalar._raw(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return PolyScalar._raw(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if not self.terms or not other.terms:
            return PolyScalar.zero(self.n)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                exps = tuple(a + b for a, b in zip(e1, e2))
                total = out.get(exps, 0) + c1 * c2
                if total:
                    out[exps] = total
                else:
                    out.pop(exps, None)
        return PolyScalar._raw(self.n, out)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, PolyScalar):
            return self.n == other.n and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == PolyScalar.const(self.n, other).terms
        return NotImplemented

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def is_constant(self):
        return all(not any(e) for e in self.terms)

    def constant_value(self):
        """Value of a constant polynomial"""
        if not self.is_constant():
            raise ValueError(f"Polynomial {self} is not constant")
        return self.terms.get((0,) * self.n, Fraction(0))

    def derive(self, j):
        if not 1 <= j <= self.n:
            raise ValueError(f"Coordinate index {j} out of range 1..{self.n}")
        out = {}
        for exps, coeff in self.terms.items():
            power = exps[j - 1]
            if power:
                lowered = exps[:j - 1] + (power - 1,) + exps[j:]
                out[lowered] = out.get(lowered, 0) + coeff * power
        return PolyScalar._raw(self.n, {e: c for e, c in out.items() if c})

    def symbols(self):
        return sympy.symbols(f"x1:{self.n + 1}") if self.n else ()

    def to_sympy(self):
        syms = self.symbols()
        expr = sympy.Integer(0)
        for exps, coeff in self.terms.items():
            term = sympy.Rational(coeff.numerator, coeff.denominator)
            for sym, power in zip(syms, exps):
                term *= sym ** power
            expr += term
        return expr

    @classmethod
    def from_sympy(cls, expr, n):
        """Convert a sympy polynomial expression in x1..xn"""
        expr = sympy.sympify(expr)
        if n == 0:
            if not expr.is_Rational:
                raise PolyParseError(str(expr), "not a rational constant")
            return cls.const(0, Fraction(int(expr.p), int(expr.q)))
        syms = sympy.symbols(f"x1:{n + 1}")
        poly = sympy.Poly(expr, *syms, domain="QQ")
        terms = {}
        for monom, coeff in poly.terms():
            coeff = sympy.Rational(coeff)
            terms[tuple(monom)] = Fraction(int(coeff.p), int(coeff.q))
        return cls(n, terms)

    def __str__(self):
        return format_poly(self)

    def __repr__(self):
        return f"PolyScalar({self})"


def poly_derive(f, j):
    """Exact partial derivative ∂f/∂x_j"""
    return f.derive(j)


def format_poly(p):
    """Render a PolyScalar in the model-file grammar ("2*x1^2 - 1/3")"""
    if not p.terms:
        return "0"
    pieces = []
    for exps in sorted(p.terms, key=lambda e: (-sum(e), tuple(-x for x in e))):
        coeff = p.terms[exps]
        factors = [f"x{j}" + (f"^{e}" if e > 1 else "") for j, e in enumerate(exps, start=1) if e]
        mono = "*".join(factors)
        if not mono:
            pieces.append(str(coeff))
        elif coeff == 1:
            pieces.append(mono)
        elif coeff == -1:
            pieces.append(f"-{mono}")
        else:
            pieces.append(f"{coeff}*{mono}")
    text = pieces[0]
    for piece in pieces[1:]:
        text += f" - {piece[1:]}" if piece.startswith("-") else f" + {piece}"
    return text


def parse_poly(text, n):
    """Parse a polynomial string over x1..xn with exact rational coefficients"""
    if isinstance(text, bool):
        raise PolyParseError(str(text), "expected a polynomial string")
    if isinstance(text, int):
        return PolyScalar.const(n, text)
    if not isinstance(text, str):
        raise PolyParseError(str(text), "expected a polynomial string")
    if not text.strip():
        raise PolyParseError(text, "empty polynomial")
    bad = _BAD_CHAR.search(text)
    if bad:
        raise PolyParseError(text, "invalid character", bad.group())
    floating = _FLOAT.search(text)
    if floating:
        raise PolyParseError(text, "floating point literal", floating.group())
    allowed = {f"x{j}": sympy.Symbol(f"x{j}") for j in range(1, n + 1)}
    for token in _IDENTIFIER.findall(text):
        if token not in allowed:
            raise PolyParseError(text, "unknown symbol", token)
    try:
        expr = parse_expr(text, local_dict=dict(allowed), transformations=_TRANSFORMATIONS)
    except (SyntaxError, TokenError, TypeError, ValueError, ZeroDivisionError) as e:
        raise PolyParseError(text, f"syntax error ({e.__class__.__name__})") from e
    if expr.has(sympy.zoo, sympy.nan, sympy.oo):
        raise PolyParseError(text, "division by zero")
    try:
        return PolyScalar.from_sympy(expr, n)
    except (PolynomialError, GeneratorsError, CoercionFailed) as e:
        raise PolyParseError(text, "not a polynomial") from e


@lru_cache(maxsize=None)
def merge_monomials(a, b):
    """Product of two η-monomials: (sign, merged) with sign 0 when an index repeats"""
    if not a:
        return 1, b
    if not b:
        return 1, a
    if set(a) & set(b):
        return 0, ()
    inversions = sum(1 for x in a for y in b if y < x)
    return (-1 if inversions % 2 else 1), tuple(sorted(a + b))


def normalize_monomial(indices):
    """Sort η-indices: (sign, monomial), sign 0 if an index repeats"""
    indices = tuple(indices)
    if len(set(indices)) != len(indices):
        return 0, ()
    inversions = sum(1 for p in range(len(indices)) for q in range(p + 1, len(indices))
                     if indices[p] > indices[q])
    return (-1 if inversions % 2 else 1), tuple(sorted(indices))


class CochainElem:
    """Element of C∞(A[1]): map from sorted η-monomials to PolyScalar coefficients"""

    __slots__ = ("n", "terms")

    def __init__(self, n, terms=None):
        clean = {}
        for mono, coeff in (terms or {}).items():
            sign, mono = normalize_monomial(mono)
            if not sign:
                continue
            if not isinstance(coeff, PolyScalar):
                coeff = PolyScalar.const(n, coeff)
            elif coeff.n != n:
                raise ShapeMismatchError(f"Coefficient on chart of dimension {coeff.n}, expected {n}")
            total = clean.get(mono, PolyScalar.zero(n)) + (coeff if sign > 0 else -coeff)
            if total:
                clean[mono] = total
            else:
                clean.pop(mono, None)
        self.n = n
        self.terms = clean

    @classmethod
    def _raw(cls, n, terms):
        obj = cls.__new__(cls)
        obj.n = n
        obj.terms = terms
        return obj

    @classmethod
    def zero(cls, n):
        return cls._raw(n, {})

    @classmethod
    def one(cls, n):
        return cls._raw(n, {(): PolyScalar.const(n, 1)})

    @classmethod
    def eta(cls, n, *indices):
        """The monomial η^{i1}…η^{ik} (signed and sorted)"""
        return cls(n, {tuple(indices): PolyScalar.const(n, 1)})

    @classmethod
    def scalar(cls, n, value):
        if isinstance(value, PolyScalar):
            return cls._raw(n, {(): value} if value else {})
        value = _as_fraction(value)
        return cls._raw(n, {(): PolyScalar.const(n, value)} if value else {})

    def _coerce(self, other):
        if isinstance(other, CochainElem):
            if other.n != self.n:
                raise ShapeMismatchError(f"Chart dimensions differ: {self.n} vs {other.n}")
            return other
        if isinstance(other, (PolyScalar, int, Fraction)):
            return CochainElem.scalar(self.n, other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for mono, coeff in other.terms.items():
            total = out[mono] + coeff if mono in out else coeff
            if total:
                out[mono] = total
            else:
                del out[mono]
        return CochainElem._raw(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return CochainElem._raw(self.n, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                sign, mono = merge_monomials(m1, m2)
                if not sign:
                    continue
                prod = c1 * c2
                if sign < 0:
                    prod = -prod
                total = out[mono] + prod if mono in out else prod
                if total:
                    out[mono] = total
                else:
                    out.pop(mono, None)
        return CochainElem._raw(self.n, out)

    def __rmul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other * self

    def __eq__(self, other):
        if isinstance(other, CochainElem):
            return self.n == other.n and self.terms == other.terms
        if isinstance(other, (int, Fraction, PolyScalar)):
            return self == CochainElem.scalar(self.n, other)
        return NotImplemented

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def grade(self):
        degrees = {len(m) for m in self.terms}
        if not degrees:
            return ANY_DEGREE
        if len(degrees) > 1:
            return INHOMOGENEOUS
        return degrees.pop()

    def homogeneous_parts(self):
        parts = {}
        for mono, coeff in self.terms.items():
            parts.setdefault(len(mono), {})[mono] = coeff
        return {d: CochainElem._raw(self.n, t) for d, t in sorted(parts.items())}

    def parity_parts(self):
        """(even part, odd part)"""
        even = {m: c for m, c in self.terms.items() if not len(m) % 2}
        odd = {m: c for m, c in self.terms.items() if len(m) % 2}
        return CochainElem._raw(self.n, even), CochainElem._raw(self.n, odd)

    def contract(self, k):
        """Left derivative ∂/∂η^k"""
        out = {}
        for mono, coeff in self.terms.items():
            if k in mono:
                pos = mono.index(k)
                rest = mono[:pos] + mono[pos + 1:]
                out[rest] = -coeff if pos % 2 else coeff
        return CochainElem._raw(self.n, out)

    def derive_x(self, j):
        out = {}
        for mono, coeff in self.terms.items():
            d = coeff.derive(j)
            if d:
                out[mono] = d
        return CochainElem._raw(self.n, out)

    def coefficient(self, mono):
        return self.terms.get(tuple(mono), PolyScalar.zero(self.n))

    def __str__(self):
        if not self.terms:
            return "0"
        pieces = []
        for mono in sorted(self.terms, key=lambda m: (len(m), m)):
            coeff = format_poly(self.terms[mono])
            if not mono:
                pieces.append(coeff)
                continue
            etas = "*".join(f"eta{i}" for i in mono)
            pieces.append(etas if coeff == "1" else f"({coeff})*{etas}")
        return " + ".join(pieces)

    def __repr__(self):
        return f"CochainElem({self})"


def ring_mul(f, g):
    """Graded-commutative product in C∞(A[1])"""
    return f * g


def grade_of(f):
    """Common η-degree, INHOMOGENEOUS, or ANY_DEGREE for zero"""
    return f.grade()


def random_poly(rng, n, max_degree=1, low=-3, high=3):
    """Seeded small-integer polynomial of total degree ≤ max_degree"""
    terms = {}
    for exps in itertools.product(range(max_degree + 1), repeat=n):
        if sum(exps) <= max_degree:
            terms[exps] = Fraction(int(rng.integers(low, high + 1)))
    return PolyScalar(n, terms)


def random_cochain(rng, n, r, degree, max_degree=1):
    terms = {mono: random_poly(rng, n, max_degree)
             for mono in itertools.combinations(range(1, r + 1), degree)}
    return CochainElem(n, terms)


class ModuleElem:
    """Element of a free graded module: generator label → CochainElem coefficient"""

    __slots__ = ("n", "terms")

    def __init__(self, n, terms=None):
        clean = {}
        for label, coeff in (terms or {}).items():
            if not isinstance(coeff, CochainElem):
                coeff = CochainElem.scalar(n, coeff)
            if coeff:
                clean[label] = clean[label] + coeff if label in clean else coeff
                if not clean[label]:
                    del clean[label]
        self.n = n
        self.terms = clean

    @classmethod
    def _raw(cls, n, terms):
        obj = cls.__new__(cls)
        obj.n = n
        obj.terms = terms
        return obj

    @classmethod
    def zero(cls, n):
        return cls._raw(n, {})

    @classmethod
    def basis(cls, n, label):
        return cls._raw(n, {label: CochainElem.one(n)})

    def __add__(self, other):
        if not isinstance(other, ModuleElem):
            return NotImplemented
        out = dict(self.terms)
        for label, coeff in other.terms.items():
            total = out[label] + coeff if label in out else coeff
            if total:
                out[label] = total
            else:
                out.pop(label, None)
        return ModuleElem._raw(self.n, out)

    def __neg__(self):
        return ModuleElem._raw(self.n, {l: -c for l, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, ModuleElem):
            return NotImplemented
        return self + (-other)

    def scale(self, c):
        """Left multiplication c·x by a ring element"""
        if not isinstance(c, CochainElem):
            c = CochainElem.scalar(self.n, c)
        if not c:
            return ModuleElem.zero(self.n)
        out = {}
        for label, coeff in self.terms.items():
            value = c * coeff
            if value:
                out[label] = value
        return ModuleElem._raw(self.n, out)

    def __rmul__(self, c):
        if isinstance(c, (CochainElem, PolyScalar, int, Fraction)):
            return self.scale(c)
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, ModuleElem):
            return self.terms == other.terms
        if other == 0:
            return not self.terms
        return NotImplemented

    __hash__ = None

    def __bool__(self):
        return bool(self.terms)

    def coefficient(self, label):
        return self.terms.get(label, CochainElem.zero(self.n))

    def items(self):
        return self.terms.items()

    def relabel(self, fn):
        out = ModuleElem.zero(self.n)
        for label, coeff in self.terms.items():
            out = out + ModuleElem._raw(self.n, {fn(label): coeff})
        return out

    def __str__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"[{coeff}]·{label}" for label, coeff in
                          sorted(self.terms.items(), key=lambda t: str(t[0])))

    def __repr__(self):
        return f"ModuleElem({self})"


@dataclass(frozen=True, eq=False)
class FreeModule:
    """Free graded module over C∞(A[1]) with named homogeneous generators"""

    name: str
    n: int
    r: int
    generators: tuple
    degrees: dict = field(repr=False)

    def __post_init__(self):
        missing = [g for g in self.generators if g not in self.degrees]
        if missing:
            raise ShapeMismatchError(f"Generators without degree in {self.name}: {missing}")

    def degree(self, label):
        return self.degrees[label]

    def basis(self, label):
        return ModuleElem.basis(self.n, label)

    def zero(self):
        return ModuleElem.zero(self.n)

    def homogeneous_parts(self, x):
        parts = {}
        for label, coeff in x.items():
            for d, piece in coeff.homogeneous_parts().items():
                total = d + self.degrees[label]
                parts[total] = parts.get(total, self.zero()) + ModuleElem._raw(self.n, {label: piece})
        return dict(sorted(parts.items()))

    def element_grade(self, x):
        """Total degree (coefficient degree + generator degree) of x"""
        degrees = set(self.homogeneous_parts(x))
        if not degrees:
            return ANY_DEGREE
        if len(degrees) > 1:
            return INHOMOGENEOUS
        return degrees.pop()


@dataclass(frozen=True, eq=False)
class TensorModule(FreeModule):
    factors: tuple = ()


@dataclass(frozen=True, eq=False)
class HomModule(FreeModule):
    source: FreeModule = None
    target: FreeModule = None


def tensor_module(factors, name=None):
    """Tensor product of free modules; generators are tuples of factor labels"""
    factors = tuple(factors)
    first = factors[0]
    generators = tuple(itertools.product(*(f.generators for f in factors)))
    degrees = {g: sum(f.degree(x) for f, x in zip(factors, g)) for g in generators}
    return TensorModule(name or "⊗".join(f.name for f in factors), first.n, first.r,
                        generators, degrees, factors)


def hom_module(source, target, name=None):
    """Hom(source, target); generator (out, in) sends `in` to `out`, degree |out| − |in|"""
    generators = tuple((o, i) for o in target.generators for i in source.generators)
    degrees = {(o, i): target.degree(o) - source.degree(i) for o, i in generators}
    return HomModule(name or f"Hom({source.name},{target.name})", source.n, source.r,
                     generators, degrees, source, target)


def tensor_product(elements, factors):
    """x1 ⊗ … ⊗ xk with (a·u)⊗(b·v) = (−1)^{|u||b|} ab·(u⊗v)"""
    n = factors[0].n
    acc = {(): (CochainElem.one(n), 0)}
    for x, module in zip(elements, factors):
        nxt = {}
        for labels, (a, deg) in acc.items():
            for u, b in x.items():
                even, odd = b.parity_parts()
                coeff = a * (even - odd if deg % 2 else even + odd)
                if not coeff:
                    continue
                key = labels + (u,)
                if key in nxt:
                    total = nxt[key][0] + coeff
                    if total:
                        nxt[key] = (total, nxt[key][1])
                    else:
                        del nxt[key]
                else:
                    nxt[key] = (coeff, deg + module.degree(u))
        acc = nxt
    return ModuleElem._raw(n, {labels: coeff for labels, (coeff, _) in acc.items()})
