"""Closed-form robustness and convergence quantities.

Everything here is pure arithmetic.  Where a formula has no value (a
fraction of adversaries at or beyond the breakdown point, a convergence
bound whose denominator vanishes) the functions return the string markers
``INFEASIBLE`` or ``UNDEFINED`` rather than NaN, so results serialise
cleanly to JSON.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import ParameterDomain, TooManyByzantine

PSI_CONSTANT = 640.0


class Marker(str):
    """A labelled non-numeric result; compares equal to its label."""

    def __repr__(self) -> str:
        return f"<{str(self)}>"


INFEASIBLE = Marker("Infeasible")
UNDEFINED = Marker("Undefined")


def is_marker(value) -> bool:
    return isinstance(value, Marker)


def breakdown_point(B: float) -> float:
    """BP = 1 / (2 + B^2)."""
    if not B >= 0:
        raise ParameterDomain(f"B must be >= 0, got {B}")
    return 1.0 / (2.0 + B * B)


def lower_bound_error(n: int, f: int, G: float, B: float):
    """Smallest achievable stationarity error under (G, B)-dissimilarity.

    ``f G^2 / (4 (n - (2 + B^2) f))``, or ``INFEASIBLE`` once f/n reaches the
    breakdown point.
    """
    if n <= 0:
        raise ParameterDomain(f"n must be positive, got {n}")
    if f < 0 or G < 0 or B < 0:
        raise ParameterDomain("f, G and B must be non-negative")
    if f == 0:
        return 0.0
    denom = n - (2.0 + B * B) * f
    if denom <= 0:
        return INFEASIBLE
    return f * G * G / (4.0 * denom)


def kappa_lower(n: int, f: int) -> float:
    _check_majority(n, f)
    return f / (n - 2 * f)


def kappa_nnm(n: int, f: int) -> float:
    """Certified robustness coefficient of {CWTM, CWMed, GM, MK} composed with NNM."""
    _check_majority(n, f)
    if f == 0:
        return 0.0
    r = 1.0 + f / (n - 2 * f)
    return 8.0 * f / (n - f) * (1.0 + r * r)


def arc_increment(n: int, f: int) -> float:
    """Extra robustness coefficient paid for pre-composing with ARC: 2f/(n-2f)."""
    _check_majority(n, f)
    return 2.0 * f / (n - 2 * f)


def _check_majority(n: int, f: int) -> None:
    if f < 0 or n <= 2 * f:
        raise TooManyByzantine(f"need n > 2f, got n={n}, f={f}")


def kappa_bounds(n: int, f: int) -> tuple[float, float, float]:
    """(lower bound on any kappa, NNM certificate, ARC increment)."""
    return kappa_lower(n, f), kappa_nnm(n, f), arc_increment(n, f)


def convergence_bound(Delta_o: float, kappa: float, B: float, G: float, gamma: float, T: int):
    """Average squared gradient norm bound of Robust-DGD, or ``UNDEFINED`` when kappa B^2 >= 1."""
    if not (gamma > 0 and T > 0):
        raise ParameterDomain("gamma and T must be positive")
    slack = 1.0 - kappa * B * B
    if slack <= 0:
        return UNDEFINED
    return 2.0 * Delta_o / (slack * gamma * T) + kappa * G * G / slack


def psi(G: float, B: float, rho: float) -> float:
    """640 (1 + 1/B^2)^2 (1 + B^2 rho^2 / G^2)."""
    if not (B > 0 and G > 0):
        raise ParameterDomain("psi needs B > 0 and G > 0")
    a = 1.0 + 1.0 / (B * B)
    return PSI_CONSTANT * a * a * (1.0 + B * B * rho * rho / (G * G))


def rho_envelope(Delta_o: float, L: float, G: float, B: float, xi_o: float, zeta: float) -> float:
    """exp((2 + B^2) Delta_o L / ((1 - xi_o) G^2)) * zeta."""
    if not (G > 0 and 0 < xi_o < 1):
        raise ParameterDomain("rho needs G > 0 and 0 < xi_o < 1")
    expo = (2.0 + B * B) * Delta_o * L / ((1.0 - xi_o) * G * G)
    if zeta == 0:
        return 0.0
    try:
        return math.exp(expo) * zeta
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class TheoryInputs:
    n: int
    f: int
    G: float
    B: float
    L: float = 1.0
    Delta_o: float = 1.0
    gamma: float | None = None
    T: int | None = None
    zeta_init: float = 1.0
    xi: float = 0.5
    xi_o: float = 0.5
    rho: float | None = None  # overrides the derived envelope when given
    upsilon: float | None = None

    def validate(self) -> None:
        for name in ("G", "B", "L", "Delta_o", "zeta_init"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ParameterDomain(f"{name} must be finite and non-negative, got {v}")
        if self.n <= 0 or self.f < 0:
            raise ParameterDomain("need n > 0 and f >= 0")
        if not self.B > 0:
            raise ParameterDomain("ARC bounds need B > 0")
        if not self.G > 0:
            raise ParameterDomain("ARC bounds need G > 0")
        if not (0 < self.xi <= self.xi_o < 1):
            raise ParameterDomain(f"need 0 < xi <= xi_o < 1, got xi={self.xi}, xi_o={self.xi_o}")
        if self.T is not None and self.T <= 0:
            raise ParameterDomain("T must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ParameterDomain("gamma must be positive")
        if self.upsilon is not None and not 0 < self.upsilon < 1:
            raise ParameterDomain("upsilon must lie in (0, 1)")
        if self.rho is not None and not self.rho >= 0:
            raise ParameterDomain("rho must be non-negative")


def _step_size(Delta_o, kappa, G, L, T):
    if T is None or kappa == 0:
        return None
    cap = 1.0 / L if L > 0 else math.inf
    return min(Delta_o / (kappa * G * G * T), cap)


def arc_bounds(inputs: TheoryInputs) -> dict:
    """Every bound attached to Robust-DGD with ARC, computed from its closed form.

    ``kappa`` is the NNM certificate for the given (n, f).  The step-count
    threshold and step size are reported both for kappa and for the 3 kappa
    coefficient of the ARC pipeline.
    """
    p = inputs
    p.validate()
    if p.n <= 2 * p.f:
        raise ParameterDomain(f"need n > 2f, got n={p.n}, f={p.f}")
    G, B, L, D = p.G, p.B, p.L, p.Delta_o
    kappa = kappa_nnm(p.n, p.f)
    rho = p.rho if p.rho is not None else rho_envelope(D, L, G, B, p.xi_o, p.zeta_init)
    ps = psi(G, B, rho)
    bp = breakdown_point(B)
    eps_o = lower_bound_error(p.n, p.f, G, B)

    heavy = G * G + B * B * rho * rho
    if p.T is None:
        c1 = UNDEFINED
    else:
        c1 = 2.0 * D * L / p.T + 5.0 * kappa * heavy
    slack = max(1.0 - kappa * B * B, 0.0)
    alt = G * G / slack if slack > 0 else math.inf
    c5 = 5.0 * kappa * min(heavy, alt)

    part1 = INFEASIBLE if is_marker(eps_o) else p.xi * ps * eps_o
    part2 = ps * G * G / 8.0
    lo, hi = p.n * bp * (1.0 - 1.0 / ps), p.n * bp

    out = {
        "kappa": kappa,
        "kappa_arc": kappa + arc_increment(p.n, p.f),
        "breakdown_point": bp,
        "epsilon_o": eps_o,
        "xi_implied": (bp - p.f / p.n) / bp,
        "rho": rho,
        "psi": ps,
        "error_bound_rhs": c1,
        "error_floor_rhs": c5,
        "arc_error_small_xi": part1,
        "arc_error_cap": part2,
        "improvement_interval": {"low": lo, "high": hi, "length": p.n * bp / ps},
        "T_min": D * L / (kappa * G * G) if kappa > 0 else 0.0,
        "T_min_3kappa": D * L / (3.0 * kappa * G * G) if kappa > 0 else 0.0,
        "gamma": _step_size(D, kappa, G, L, p.T),
        "gamma_3kappa": _step_size(D, 3.0 * kappa, G, L, p.T),
    }
    if p.upsilon is not None:
        out["xi_max"] = min(p.upsilon / ps, p.xi_o)
        out["target_error"] = INFEASIBLE if is_marker(eps_o) else p.upsilon * eps_o
    return out


def inputs_dict(inputs: TheoryInputs) -> dict:
    return asdict(inputs)
