"""Gamma-function utilities and the closed-form constants of the fractional
Q-curvature problem.

The renormalisation constant d_gamma = 2^{2g} Gamma(g)/Gamma(-g) turns the
scattering matrix S(s) of an asymptotically hyperbolic Einstein space into the
fractional GJMS operator P_{2g} = d_g S(n/2 + g), and Q_{2g} is
2/(n - 2g) P_{2g}(1).  On hyperbolic space with a round sphere of radius
k^{-1/2} at infinity, P_{2g} acts on constants as the gamma ratio
Gamma(n/2+g)/Gamma(n/2-g); `sphere_q_oracle` exposes that closed form as the
independent oracle for the radial ODE pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Admissible fractional order.  The expansion coefficient u2 of the scattering
# solution carries 1/(1 - gamma), so a neighbourhood of gamma = 1 is excluded
# instead of implementing resonance log branches; the lower cut keeps the
# branch contrast e^{-2 gamma T} resolvable in the matching window.
GAMMA_MIN = 0.05
GAMMA_MAX = 0.95

# Lanczos approximation, g = 7, 9 coefficients (relative error < 1e-13 for
# positive arguments; negative arguments go through the reflection formula).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

_SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


def gamma_fn(x: float) -> float:
    """Gamma function via Lanczos approximation with reflection.

    Raises ValueError at the poles (x = 0, -1, -2, ...).
    """
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise ValueError(f"gamma pole at x={x}")
    if x < 0.5:
        # Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))
    z = x - 1.0
    acc = _LANCZOS_COEF[0]
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc += c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_TWO_PI * t ** (z + 0.5) * math.exp(-t) * acc


def d_gamma(gamma: float) -> float:
    """Renormalisation constant 2^{2g} Gamma(g)/Gamma(-g); negative on (0,1)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"d_gamma requires gamma in (0,1), got {gamma}")
    return 2.0 ** (2.0 * gamma) * gamma_fn(gamma) / gamma_fn(-gamma)


def hk_constant(n: int, gamma: float) -> float:
    """Sharp constant C(n,g) of the fractional Heintze-Karcher inequality.

    C(n,g) = (n+2g)^2 / (4g(n+1)) * (-4g/d_g)^{(1-g)/g}; equals n+1 at g=1/2.
    """
    if n < 3 or not 0.0 < gamma < 1.0:
        raise ValueError(f"hk_constant requires n >= 3, gamma in (0,1); got n={n}, gamma={gamma}")
    base = -4.0 * gamma / d_gamma(gamma)
    return (n + 2.0 * gamma) ** 2 / (4.0 * gamma * (n + 1.0)) * base ** ((1.0 - gamma) / gamma)


def sphere_q_value(n: int, gamma: float, k: float = 1.0) -> float:
    """Fractional Q-curvature of the round sphere of radius k^{-1/2}.

    Closed form k^g * 2/(n-2g) * Gamma(n/2+g)/Gamma(n/2-g), the scattering
    value of hyperbolic space.  Unvalidated arguments; see `sphere_q_oracle`
    for the parameter-checked version.
    """
    return k ** gamma * (2.0 / (n - 2.0 * gamma)) * gamma_fn(n / 2.0 + gamma) / gamma_fn(n / 2.0 - gamma)


@dataclass(frozen=True)
class QCurvParams:
    """Parameters of one scattering problem.

    n      boundary dimension (n >= 3)
    gamma  fractional order in [GAMMA_MIN, GAMMA_MAX]
    k      boundary Einstein constant: Ric = (n-1) k on the representative,
           i.e. a round sphere of radius k^{-1/2}
    s      spectral parameter n/2 + gamma (derived)
    """

    n: int
    gamma: float
    k: float
    s: float = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"n must be an integer >= 3, got {self.n}")
        if not (GAMMA_MIN <= self.gamma <= GAMMA_MAX):
            raise ValueError(
                f"gamma={self.gamma} outside [{GAMMA_MIN}, {GAMMA_MAX}] (resonance guard)"
            )
        if not self.k > 0.0:
            raise ValueError(f"k must be positive, got {self.k}")
        object.__setattr__(self, "s", self.n / 2.0 + self.gamma)
        # spectral condition s(n-s) = n^2/4 - gamma^2 < n^2/4 holds for real gamma
        assert self.s * (self.n - self.s) < self.n ** 2 / 4.0

    @property
    def lam(self) -> float:
        """Eigenvalue factor s(n-s)."""
        return self.s * (self.n - self.s)


def sphere_q_oracle(p: QCurvParams) -> float:
    """Closed-form Q_{2 gamma} of the model boundary; oracle for the ODE path."""
    return sphere_q_value(p.n, p.gamma, p.k)


def sphere_volume(n: int) -> float:
    """Volume of the unit n-sphere, 2 pi^{(n+1)/2} / Gamma((n+1)/2)."""
    if n < 1:
        raise ValueError("sphere_volume requires n >= 1")
    return 2.0 * math.pi ** ((n + 1) / 2.0) / gamma_fn((n + 1) / 2.0)
