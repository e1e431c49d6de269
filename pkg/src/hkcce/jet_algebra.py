"""Exact-rational truncated power series over formal boundary-curvature scalars.

Everything in the order-r^4 expansion of the geodesic normal form of a
conformally compact Einstein metric reduces, after taking traces, to the four
boundary scalars

    J     the Schouten trace (scalar curvature / (2(n-1)))
    A2    |A|^2, the squared norm of the Schouten tensor
    E2    |E|^2, the squared norm of its trace-free part
    LapJ  the boundary Laplacian of J

with exact rational coefficients once the boundary dimension n is fixed.
`Poly` is a sparse multivariate polynomial over these symbols, `Jet` a
truncated even power series in the defining function r with Poly coefficients,
and `IntegralClass` the result of integrating a Poly over the closed boundary
(the Laplacian term drops, A2 splits into E2/(n-2)^2 + J^2/n, and the
surviving channels are Vol, int J, int J^2, int E2).

`verify_prop21` re-derives the full r^4 coefficient chain of the asymptotic
Heintze-Karcher ratio (surface integral of V/H over boundary level sets
against the enclosed weighted volume) and certifies, in exact arithmetic, that
the r^2 terms cancel and the r^4 defect is (1/(n(n-2)^3)) int |E|^2 / Vol.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

SYMBOLS = ("J", "A2", "E2", "LapJ")
_IDX = {name: i for i, name in enumerate(SYMBOLS)}
_ZERO_MONO = (0, 0, 0, 0)

JET_ORDER = 4  # truncation at r^4 throughout; O(r^5) is never represented


class UnsupportedIntegralError(ValueError):
    """An integrand falls outside the closed-boundary reduction rules."""


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"exact coefficient expected (int or Fraction), got {type(x).__name__}")


class Poly:
    """Sparse polynomial over (J, A2, E2, LapJ) with Fraction coefficients.

    The boundary dimension n is part of the ring: arithmetic between
    polynomials of different n is rejected.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[tuple, Fraction] | None = None):
        if n < 3:
            raise ValueError("Poly requires n >= 3")
        self.n = int(n)
        pruned = {}
        for mono, c in (terms or {}).items():
            c = _as_fraction(c)
            if c != 0:
                if len(mono) != 4 or any(e < 0 for e in mono):
                    raise ValueError(f"bad monomial {mono}")
                pruned[tuple(mono)] = c
        self.terms = pruned

    # -- constructors ------------------------------------------------------
    @classmethod
    def constant(cls, n: int, c) -> "Poly":
        return cls(n, {_ZERO_MONO: _as_fraction(c)})

    @classmethod
    def symbol(cls, n: int, name: str, power: int = 1) -> "Poly":
        mono = [0, 0, 0, 0]
        mono[_IDX[name]] = power
        return cls(n, {tuple(mono): Fraction(1)})

    # -- ring operations ---------------------------------------------------
    def _check(self, other: "Poly"):
        if self.n != other.n:
            raise ValueError(f"mixed rings: n={self.n} vs n={other.n}")

    def __add__(self, other: "Poly") -> "Poly":
        self._check(other)
        out = dict(self.terms)
        for mono, c in other.terms.items():
            out[mono] = out.get(mono, Fraction(0)) + c
        return Poly(self.n, out)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + other.scale(-1)

    def __mul__(self, other: "Poly") -> "Poly":
        self._check(other)
        out: dict[tuple, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                out[mono] = out.get(mono, Fraction(0)) + c1 * c2
        return Poly(self.n, out)

    def scale(self, c) -> "Poly":
        c = _as_fraction(c)
        return Poly(self.n, {m: c * v for m, v in self.terms.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, mono: tuple) -> Fraction:
        return self.terms.get(tuple(mono), Fraction(0))

    def subs_floats(self, values: Mapping[str, float]) -> float:
        """Numeric evaluation, used to compare against model closed forms."""
        total = 0.0
        for mono, c in self.terms.items():
            x = float(c)
            for name, e in zip(SYMBOLS, mono):
                if e:
                    x *= values[name] ** e
            total += x
        return total

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for mono, c in sorted(self.terms.items()):
            factors = [str(c)]
            for name, e in zip(SYMBOLS, mono):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            parts.append("*".join(factors))
        return " + ".join(parts)


class Jet:
    """Even truncated series  c0 + c2 r^2 + c4 r^4  with Poly coefficients."""

    __slots__ = ("n", "coeffs", "order")

    def __init__(self, n: int, coeffs: list, order: int = JET_ORDER):
        if order % 2 or order > 8:
            raise ValueError("jet order must be even and <= 8")
        want = order // 2 + 1
        if len(coeffs) != want:
            raise ValueError(f"need {want} coefficients for order {order}")
        self.n = n
        self.order = order
        self.coeffs = [c if isinstance(c, Poly) else Poly.constant(n, c) for c in coeffs]

    @classmethod
    def zero(cls, n: int, order: int = JET_ORDER) -> "Jet":
        return cls(n, [Poly(n)] * (order // 2 + 1), order)

    @classmethod
    def one(cls, n: int, order: int = JET_ORDER) -> "Jet":
        coeffs = [Poly.constant(n, 1)] + [Poly(n)] * (order // 2)
        return cls(n, coeffs, order)

    def _common(self, other: "Jet") -> int:
        if self.n != other.n:
            raise ValueError("mixed rings")
        return min(self.order, other.order)

    def __add__(self, other: "Jet") -> "Jet":
        order = self._common(other)
        m = order // 2 + 1
        return Jet(self.n, [self.coeffs[i] + other.coeffs[i] for i in range(m)], order)

    def __sub__(self, other: "Jet") -> "Jet":
        return self + other.scale(-1)

    def __mul__(self, other: "Jet") -> "Jet":
        order = self._common(other)
        m = order // 2 + 1
        out = [Poly(self.n) for _ in range(m)]
        for i, a in enumerate(self.coeffs[:m]):
            if a.is_zero():
                continue
            for j, b in enumerate(other.coeffs[:m]):
                if i + j < m:
                    out[i + j] = out[i + j] + a * b
        return Jet(self.n, out, order)

    def scale(self, c) -> "Jet":
        return Jet(self.n, [p.scale(c) for p in self.coeffs], self.order)

    def invert(self) -> "Jet":
        """Reciprocal series; requires leading coefficient exactly 1."""
        if self.coeffs[0] != Poly.constant(self.n, 1):
            raise ValueError("invert requires unit leading coefficient")
        m = self.order // 2 + 1
        inv = [Poly.constant(self.n, 1)] + [Poly(self.n)] * (m - 1)
        for i in range(1, m):
            acc = Poly(self.n)
            for j in range(1, i + 1):
                acc = acc + self.coeffs[j] * inv[i - j]
            inv[i] = acc.scale(-1)
        return Jet(self.n, inv, self.order)

    def exp_nilpotent(self) -> "Jet":
        """exp of a jet with zero constant term."""
        if not self.coeffs[0].is_zero():
            raise ValueError("exp_nilpotent requires vanishing constant term")
        m = self.order // 2 + 1
        out = Jet.one(self.n, self.order)
        power = Jet.one(self.n, self.order)
        fact = 1
        for i in range(1, m):
            power = power * self
            fact *= i
            out = out + power.scale(Fraction(1, fact))
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Jet)
            and self.n == other.n
            and self.order == other.order
            and self.coeffs == other.coeffs
        )

    def coefficient(self, r_power: int) -> Poly:
        if r_power % 2 or r_power > self.order:
            raise ValueError(f"no r^{r_power} coefficient at order {self.order}")
        return self.coeffs[r_power // 2]

    def eval_floats(self, r: float, values: Mapping[str, float]) -> float:
        return sum(p.subs_floats(values) * r ** (2 * i) for i, p in enumerate(self.coeffs))

    def __repr__(self):
        return " + ".join(f"({p}) r^{2 * i}" for i, p in enumerate(self.coeffs))


def jet_combine(a: Jet, b, op: str) -> Jet:
    """Dispatch helper: op in {add, mul, invert-unit-leading, scale}."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "invert-unit-leading":
        return a.invert()
    if op == "scale":
        return a.scale(b)
    raise ValueError(f"unknown jet op {op!r}")


# ---------------------------------------------------------------------------
# Trace-level matrix series.  Metric coefficients in the normal form are
# polynomials in the Schouten endomorphism A (powers 0..2 suffice at order
# r^4) plus the r^4 tensor g4 of which only the trace A2/4 is used.  That is
# all the structure needed to run the "trace of a matrix series" route for the
# determinant and mean-curvature expansions.
# ---------------------------------------------------------------------------

_G4KEY = "g4"


class MatJet:
    """Even series of symbolic endomorphisms spanned by {I, A, A^2, g4}."""

    def __init__(self, n: int, coeffs: list[dict], order: int = JET_ORDER):
        self.n = n
        self.order = order
        self.coeffs = [dict(c) for c in coeffs]
        while len(self.coeffs) < order // 2 + 1:
            self.coeffs.append({})

    @classmethod
    def identity(cls, n: int) -> "MatJet":
        return cls(n, [{0: Poly.constant(n, 1)}])

    def __add__(self, other: "MatJet") -> "MatJet":
        m = min(self.order, other.order) // 2 + 1
        out = []
        for i in range(m):
            d = dict(self.coeffs[i])
            for key, p in other.coeffs[i].items():
                d[key] = d.get(key, Poly(self.n)) + p
            out.append(d)
        return MatJet(self.n, out, min(self.order, other.order))

    def __mul__(self, other: "MatJet") -> "MatJet":
        m = min(self.order, other.order) // 2 + 1
        out = [dict() for _ in range(m)]
        for i, d1 in enumerate(self.coeffs):
            for j, d2 in enumerate(other.coeffs):
                if i + j >= m:
                    continue
                for k1, p1 in d1.items():
                    for k2, p2 in d2.items():
                        key = self._mul_keys(k1, k2)
                        out[i + j][key] = out[i + j].get(key, Poly(self.n)) + p1 * p2
        return MatJet(self.n, out, 2 * (m - 1))

    @staticmethod
    def _mul_keys(k1, k2):
        if k1 == _G4KEY or k2 == _G4KEY:
            # g4 enters at r^4; any nontrivial product exceeds the truncation
            other = k2 if k1 == _G4KEY else k1
            if other != 0:
                raise ValueError("g4 products exceed the r^4 truncation")
            return _G4KEY
        p = k1 + k2
        if p > 2:
            raise ValueError("A^p with p > 2 has no trace rule at this order")
        return p

    def scale(self, c) -> "MatJet":
        return MatJet(
            self.n, [{k: p.scale(c) for k, p in d.items()} for d in self.coeffs], self.order
        )

    def truncate(self, order: int) -> "MatJet":
        return MatJet(self.n, self.coeffs[: order // 2 + 1], order)

    def neg(self) -> "MatJet":
        return self.scale(-1)

    def trace(self) -> Jet:
        """Apply tr I = n, tr A = J, tr A^2 = A2, tr g4 = A2/4."""
        n = self.n
        rules = {
            0: Poly.constant(n, n),
            1: Poly.symbol(n, "J"),
            2: Poly.symbol(n, "A2"),
            _G4KEY: Poly.symbol(n, "A2").scale(Fraction(1, 4)),
        }
        out = []
        for d in self.coeffs:
            acc = Poly(n)
            for key, p in d.items():
                acc = acc + p * rules[key]
            out.append(acc)
        return Jet(n, out, self.order)


def _metric_deviation(n: int) -> MatJet:
    """A(r) with g_r = g0 (I + A(r)): r^2 (-A) + r^4 g4."""
    return MatJet(n, [{}, {1: Poly.constant(n, -1)}, {_G4KEY: Poly.constant(n, 1)}])


def det_via_trace_log(n: int) -> Jet:
    """sqrt(det g_r / det g0) as exp((1/2) tr log(I + A)) by jet arithmetic."""
    a = _metric_deviation(n)
    # tr log(I+A) = tr A - tr(A^2)/2  (A^3 exceeds order 4)
    trlog = a.trace() - (a * a).trace().scale(Fraction(1, 2))
    return trlog.scale(Fraction(1, 2)).exp_nilpotent()


def mean_curvature_via_trace(n: int) -> Jet:
    """H_r = n - (r/2) tr(g_r^{-1} d_r g_r) from the inverse-series route.

    d_r g_r = r (2 M2 + 4 r^2 M4) is odd; the returned jet is the even series
    n - (r^2/2) tr(g_r^{-1} (2 M2 + 4 r^2 M4)).
    """
    a = _metric_deviation(n)
    # (I + A)^{-1} = I - A + A^2 at this order
    inv = MatJet.identity(n) + a.neg() + (a * a)
    # E(r) with d_r g_r * g0^{-1} = r E(r): coefficients 2 M2 + 4 r^2 M4.
    # H needs tr(inv * E) only through r^2 (the r^2 factor in front shifts it
    # to r^4); truncating first also keeps products inside the trace rules.
    e = MatJet(n, [{1: Poly.constant(n, -2)}, {_G4KEY: Poly.constant(n, 4)}], order=2)
    tr = (inv.truncate(2) * e).trace()
    return Jet(n, [Poly.constant(n, n),
                   tr.coeffs[0].scale(Fraction(-1, 2)),
                   tr.coeffs[1].scale(Fraction(-1, 2))])


def expand_normal_form(n: int) -> dict:
    """Order-r^4 jets of the normal-form expansion for boundary dimension n.

    det_jet  sqrt(det g_r/det g0) = 1 - (J/2) r^2 + (1/8)(J^2 - A2) r^4
    h_jet    mean curvature of the level sets, n + J r^2 + (A2/2) r^4
    v_jet    r V = 1 + (J/2n) r^2 + v4 r^4 with
             v4 = (LapJ - J^2 + n A2) / (8n(n-2))

    Inputs are the trace data tr g2 = -J, tr(g2 g2) = A2 and tr g4 = A2/4;
    the direct formulas are cross-checked in exact arithmetic against the
    exp-trace-log and inverse-series routes before returning.
    """
    if n < 5:
        raise ValueError("expansion requires n >= 5 (the (n+1)/(n-3) weight)")
    J = Poly.symbol(n, "J")
    A2 = Poly.symbol(n, "A2")
    LapJ = Poly.symbol(n, "LapJ")

    det_jet = Jet(n, [Poly.constant(n, 1), J.scale(Fraction(-1, 2)),
                      (J * J - A2).scale(Fraction(1, 8))])
    h_jet = Jet(n, [Poly.constant(n, n), J, A2.scale(Fraction(1, 2))])
    v4 = (LapJ - J * J + A2.scale(n)).scale(Fraction(1, 8 * n * (n - 2)))
    v_jet = Jet(n, [Poly.constant(n, 1), J.scale(Fraction(1, 2 * n)), v4])

    if det_jet != det_via_trace_log(n):
        raise AssertionError("determinant jet disagrees with exp-trace-log route")
    if h_jet != mean_curvature_via_trace(n):
        raise AssertionError("mean-curvature jet disagrees with trace route")
    return {"det_jet": det_jet, "h_jet": h_jet, "v_jet": v_jet}


# ---------------------------------------------------------------------------
# Closed-boundary integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegralClass:
    """Exact linear combination of Vol, int J, int J^2 and int |E|^2."""

    vol: Fraction = Fraction(0)
    j: Fraction = Fraction(0)
    j2: Fraction = Fraction(0)
    e2: Fraction = Fraction(0)

    def __add__(self, other: "IntegralClass") -> "IntegralClass":
        return IntegralClass(self.vol + other.vol, self.j + other.j,
                             self.j2 + other.j2, self.e2 + other.e2)

    def __sub__(self, other: "IntegralClass") -> "IntegralClass":
        return self + other.scale(-1)

    def scale(self, c) -> "IntegralClass":
        c = _as_fraction(c)
        return IntegralClass(c * self.vol, c * self.j, c * self.j2, c * self.e2)

    def as_strings(self) -> dict:
        return {"Vol": str(self.vol), "intJ": str(self.j),
                "intJ2": str(self.j2), "intE2": str(self.e2)}


def boundary_integral(p: Poly) -> IntegralClass:
    """Integrate a Poly over the closed boundary.

    Rules: int LapJ = 0 (divergence theorem; only a bare linear occurrence is
    admissible), then A2 -> E2/(n-2)^2 + J^2/n pointwise.  Monomials that do
    not land in {1, J, J^2, E2} raise UnsupportedIntegralError: those
    integrals are not expressible in the four channels and silently guessing
    zero would be wrong.
    """
    n = p.n
    reduced = Poly(n)
    a2_rule = (Poly.symbol(n, "E2").scale(Fraction(1, (n - 2) ** 2))
               + Poly.symbol(n, "J", 2).scale(Fraction(1, n)))
    for mono, c in p.terms.items():
        jp, a2p, e2p, lp = mono
        if lp:
            if lp == 1 and jp == a2p == e2p == 0:
                continue  # int LapJ = 0
            raise UnsupportedIntegralError(
                f"LapJ occurs in a product ({mono}); int of that is not zero in general"
            )
        term = Poly.constant(n, c)
        if jp:
            term = term * Poly.symbol(n, "J", jp)
        if e2p:
            term = term * Poly.symbol(n, "E2", e2p)
        for _ in range(a2p):
            term = term * a2_rule
        reduced = reduced + term
    out = IntegralClass()
    for mono, c in reduced.terms.items():
        jp, a2p, e2p, lp = mono
        assert a2p == 0 and lp == 0
        if jp == 0 and e2p == 0:
            out = out + IntegralClass(vol=c)
        elif jp == 1 and e2p == 0:
            out = out + IntegralClass(j=c)
        elif jp == 2 and e2p == 0:
            out = out + IntegralClass(j2=c)
        elif jp == 0 and e2p == 1:
            out = out + IntegralClass(e2=c)
        else:
            raise UnsupportedIntegralError(f"monomial {mono} outside the channel set")
    return out


# ---------------------------------------------------------------------------
# Order-r^4 certificate
# ---------------------------------------------------------------------------

@dataclass
class Prop21Certificate:
    """Exact-arithmetic certificate of the r^4 coefficient chain.

    alpha is the r^4 coefficient of n r (V/H_r); alpha1/alpha2 are the r^2 and
    r^4 integral coefficients of the surface integral, beta1/beta2 those of
    the enclosed volume integral (with the radial weights (n+1)/(n-1) and
    (n+1)/(n-3) from integrating t^{-n-2+2j}), and beta = alpha2 - beta2 is
    the defect class.  Passing means exact equality of rationals.
    """

    n: int
    alpha: Poly
    alpha1: IntegralClass
    alpha2: IntegralClass
    beta1: IntegralClass
    beta2: IntegralClass
    beta: IntegralClass
    passed: dict
    detail: dict

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_json(self, indent: int | None = 2) -> str:
        payload = {
            "n": self.n,
            "alpha": {str(mono): str(c) for mono, c in sorted(self.alpha.terms.items())},
            "alpha1": self.alpha1.as_strings(),
            "alpha2": self.alpha2.as_strings(),
            "beta1": self.beta1.as_strings(),
            "beta2": self.beta2.as_strings(),
            "beta": self.beta.as_strings(),
            "passed": self.passed,
            "ok": self.ok,
            "detail": self.detail,
        }
        return json.dumps(payload, indent=indent, sort_keys=True)


def verify_prop21(n: int) -> Prop21Certificate:
    """Certify the asymptotic Heintze-Karcher coefficient chain at order r^4."""
    jets = expand_normal_form(n)
    det_jet, h_jet, v_jet = jets["det_jet"], jets["h_jet"], jets["v_jet"]
    J = Poly.symbol(n, "J")
    A2 = Poly.symbol(n, "A2")

    # n r (V/H_r) = v_jet * (h_jet/n)^{-1} = 1 - (J/2n) r^2 + alpha r^4
    surf_series = v_jet * h_jet.scale(Fraction(1, n)).invert()
    alpha = surf_series.coefficient(4)
    v4 = v_jet.coefficient(4)
    alpha_direct = v4 - A2.scale(Fraction(1, 2 * n)) + (J * J).scale(Fraction(1, 2 * n ** 2))
    passed = {"alpha_formula": alpha == alpha_direct,
              "surface_r2": surf_series.coefficient(2) == J.scale(Fraction(-1, 2 * n))}

    # surface integrand (V/H) sqrt(det): r^{-n-1}/n (1 + sigma2 r^2 + sigma4 r^4)
    surf_integrand = surf_series * det_jet
    alpha1 = boundary_integral(surf_integrand.coefficient(2))
    alpha2 = boundary_integral(surf_integrand.coefficient(4))

    # volume integrand V sqrt(det) = r^{-1}(1 + m2 r^2 + m4 r^4); integrating
    # t^{-n-2+2j} puts the weight (n+1)/(n+1-2j) on the r^{2j} coefficient
    vol_integrand = v_jet * det_jet
    beta1 = boundary_integral(vol_integrand.coefficient(2)).scale(Fraction(n + 1, n - 1))
    beta2 = boundary_integral(vol_integrand.coefficient(4)).scale(Fraction(n + 1, n - 3))

    expected_a1 = IntegralClass(j=Fraction(-(n + 1), 2 * n))
    beta = alpha2 - beta2
    expected_beta = IntegralClass(e2=Fraction(1, n * (n - 2) ** 3))
    passed.update({
        "alpha1_value": alpha1 == expected_a1,
        "alpha1_eq_beta1": alpha1 == beta1,
        "j2_cancellation": beta.j2 == 0,
        "j_cancellation": beta.j == 0 and beta.vol == 0,
        "beta_value": beta == expected_beta,
    })
    detail = {}
    if not passed["beta_value"]:
        detail["beta_e2"] = (str(beta.e2), str(expected_beta.e2))
    if not passed["alpha1_eq_beta1"]:
        detail["alpha1_vs_beta1"] = (alpha1.as_strings(), beta1.as_strings())
    return Prop21Certificate(n=n, alpha=alpha, alpha1=alpha1, alpha2=alpha2,
                             beta1=beta1, beta2=beta2, beta=beta,
                             passed=passed, detail=detail)
