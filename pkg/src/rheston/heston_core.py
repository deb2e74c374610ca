"""Exact and asymptotic evaluation of the Heston moment generating function.

Everything here is a pure function of its inputs. The MGF of the log price is
assembled from the two affine components C(t, u) and D(t, u); randomisation of
the initial variance enters only through the law's MGF evaluated at D(t, u).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "HestonParams",
    "MgfComponents",
    "LimitCgf",
    "CdApproximation",
    "mgf_components",
    "randomised_mgf",
    "randomised_log_mgf",
    "randomised_mgf_dlog",
    "limit_cgf",
    "cd_asymptotic",
    "explosion_time",
    "real_mgf_domain_upper",
    "real_mgf_domain_lower",
    "randomised_mgf_domain",
]

# Pole detection tolerance for the log argument 1 - g exp(-dt).
_POLE_TOL = 1e-12


@dataclass(frozen=True)
class HestonParams:
    """Coefficients of the variance diffusion and its correlation with the price."""

    kappa: float
    theta: float
    xi: float
    rho: float

    def __post_init__(self):
        for name in ("kappa", "theta", "xi"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be finite and strictly positive, got {v}")
        if not (math.isfinite(self.rho) and abs(self.rho) <= 1.0):
            raise ValueError(f"rho must lie in [-1, 1], got {self.rho}")
        object.__setattr__(self, "_rho_bar", math.sqrt(max(0.0, 1.0 - self.rho * self.rho)))

    @property
    def rho_bar(self) -> float:
        return self._rho_bar


@dataclass(frozen=True)
class MgfComponents:
    """Values of C(t, u) and D(t, u); `defined` is False past moment explosion."""

    c_value: complex
    d_value: complex
    defined: bool


def _require_time(t: float) -> float:
    if not (isinstance(t, (int, float)) and math.isfinite(t) and t > 0.0):
        raise ValueError(f"t must be a finite positive real, got {t!r}")
    return float(t)


def _cd_values(p: HestonParams, t: float, z: complex):
    """C, D and the log-argument denominator at complex argument z.

    Uses d on the branch with nonnegative real part; the resulting expressions
    are invariant under d -> -d, so the branch choice never shows in the value.
    """
    kappa, theta, xi, rho = p.kappa, p.theta, p.xi, p.rho
    beta = kappa - rho * xi * z
    delta = beta * beta + xi * xi * z * (1.0 - z)
    d = np.sqrt(complex(delta))
    if d.real < 0.0:
        d = -d
    if abs(d) < 1e-13 * max(1.0, abs(beta)):
        # d -> 0 limit: g -> 1 and both ratios become 0/0.
        bt = beta * t
        c = (kappa * theta / xi**2) * (bt - 2.0 * np.log(1.0 + 0.5 * bt))
        dd = beta * beta * t / (xi**2 * (2.0 + bt))
        return c, dd, 1.0 + 0.0j, 1.0 + 0.0j
    g = (beta - d) / (beta + d)
    e = np.exp(-d * t)
    one_minus_g = 1.0 - g
    denom = 1.0 - g * e
    c = (kappa * theta / xi**2) * ((beta - d) * t - 2.0 * (np.log(denom) - np.log(one_minus_g)))
    dd = (beta - d) / xi**2 * (1.0 - e) / denom
    return c, dd, denom, one_minus_g


def explosion_time(p: HestonParams, u: float) -> float:
    """First time at which the real-argument MGF at moment u becomes infinite."""
    kappa, xi, rho = p.kappa, p.xi, p.rho
    beta = kappa - rho * xi * u
    delta = beta * beta + xi * xi * u * (1.0 - u)
    if delta >= 0.0:
        # Exploding branch requires beta < -sqrt(delta), i.e. u outside [0, 1]
        # with strongly negative drift coefficient.
        if beta < 0.0 and u * (1.0 - u) < 0.0:
            d = math.sqrt(delta)
            if d < 1e-14 * abs(beta):
                return 2.0 / abs(beta)
            return math.log((beta - d) / (beta + d)) / d
        return math.inf
    root = math.sqrt(-delta)
    phi = math.atan2(root, beta)  # in (0, pi)
    return 2.0 * (math.pi - phi) / root


def mgf_components(p: HestonParams, t: float, u: complex) -> MgfComponents:
    """Evaluate C(t, u) and D(t, u), flagging moment explosion via `defined`."""
    t = _require_time(t)
    z = complex(u)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"u must be finite, got {u!r}")
    if z.imag == 0.0 and explosion_time(p, z.real) <= t:
        return MgfComponents(complex("nan"), complex("nan"), False)
    c, d, denom, one_minus_g = _cd_values(p, t, z)
    if abs(denom) < _POLE_TOL or abs(one_minus_g) < _POLE_TOL:
        return MgfComponents(complex("nan"), complex("nan"), False)
    return MgfComponents(complex(c), complex(d), True)


def randomised_log_mgf(p: HestonParams, law, t: float, u: complex) -> Optional[complex]:
    """log E[e^{uX_t}] with randomised initial variance; branch of the imaginary
    part is arbitrary (exponentiate before comparing values).

    Returns None when the argument lies outside the joint domain: Heston moment
    explosion, or D(t, u) at/above the law's MGF abscissa.
    """
    comps = mgf_components(p, t, u)
    if not comps.defined:
        return None
    d = comps.d_value
    m_sup = law.mgf_domain_sup
    if math.isfinite(m_sup) and d.real >= m_sup:
        return None
    return comps.c_value + law.log_mgf(d)


def randomised_mgf(p: HestonParams, law, t: float, u: complex) -> Optional[complex]:
    """E[e^{uX_t}] for the randomised model: exp(C(t,u)) * M_V(D(t,u)).

    The law object must expose `log_mgf(z)` and `mgf_domain_sup`. Returns None
    outside the domain (distinct from raising, which signals invalid inputs).
    """
    lm = randomised_log_mgf(p, law, t, u)
    if lm is None:
        return None
    return np.exp(lm)


def _cd_derivatives(p: HestonParams, t: float, z: complex):
    """d/du of C(t, u) and D(t, u) in closed form."""
    kappa, theta, xi, rho = p.kappa, p.theta, p.xi, p.rho
    beta = kappa - rho * xi * z
    bp = -rho * xi
    delta = beta * beta + xi * xi * z * (1.0 - z)
    d = np.sqrt(complex(delta))
    if d.real < 0.0:
        d = -d
    dp = (2.0 * beta * bp + xi * xi * (1.0 - 2.0 * z)) / (2.0 * d)
    g = (beta - d) / (beta + d)
    gp = 2.0 * (bp * d - beta * dp) / (beta + d) ** 2
    e = np.exp(-d * t)
    ep = -t * dp * e
    denom = 1.0 - g * e
    denom_p = -(gp * e + g * ep)
    num = 1.0 - e
    num_p = -ep
    d_deriv = ((bp - dp) * num + (beta - d) * num_p) / (xi**2 * denom) \
        - (beta - d) * num * denom_p / (xi**2 * denom**2)
    c_deriv = (kappa * theta / xi**2) * ((bp - dp) * t - 2.0 * denom_p / denom
                                         - 2.0 * gp / (1.0 - g))
    return c_deriv, d_deriv


def randomised_mgf_dlog(p: HestonParams, law, t: float, u: complex) -> complex:
    """d/du log E[e^{uX_t}] = C_u + (M_V'/M_V)(D) * D_u, all in closed form."""
    z = complex(u)
    c, d, denom, one_minus_g = _cd_values(p, t, z)
    if abs(denom) < _POLE_TOL:
        raise ValueError("argument at a pole of the MGF")
    c_deriv, d_deriv = _cd_derivatives(p, t, z)
    return c_deriv + law.dlog_mgf(d) * d_deriv


@dataclass(frozen=True)
class LimitCgf:
    """Small-time limit of the rescaled cumulant generating function.

    Finite, smooth and strictly convex on (u_min, u_max); +inf outside.
    """

    u_min: float
    u_max: float
    xi: float
    rho: float
    rho_bar: float

    def value(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u > self.u_min) & (u < self.u_max)
        out = np.full(u.shape, np.inf)
        uu = np.where(inside, u, 0.0)
        if self.rho_bar < 1e-14:
            val = uu * uu / (2.0 - self.rho * self.xi * uu)
        else:
            z = 0.5 * self.xi * self.rho_bar * uu
            val = uu * np.sin(z) / (self.xi * (self.rho_bar * np.cos(z) - self.rho * np.sin(z)))
        out = np.where(inside, val, out)
        return out if out.shape else float(out)

    def __call__(self, u):
        return self.value(u)

    def _value_complex(self, z: complex) -> complex:
        if self.rho_bar < 1e-14:
            return z * z / (2.0 - self.rho * self.xi * z)
        w = 0.5 * self.xi * self.rho_bar * z
        return z * np.sin(w) / (self.xi * (self.rho_bar * np.cos(w) - self.rho * np.sin(w)))

    def deriv(self, u: float) -> float:
        # Complex-step derivative; exact to machine precision for interior u.
        h = 1e-20
        return self._value_complex(complex(u, h)).imag / h

    def deriv2(self, u: float) -> float:
        span = min(self.u_max - u, u - self.u_min, 1.0)
        h = max(1e-7, 1e-7 * abs(u))
        h = min(h, 0.25 * span)
        return (self.deriv(u + h) - self.deriv(u - h)) / (2.0 * h)


def limit_cgf(p: HestonParams) -> LimitCgf:
    """Domain endpoints and evaluator for the limiting rescaled cgf."""
    xi, rho, rho_bar = p.xi, p.rho, p.rho_bar
    if rho_bar < 1e-14:
        # Degenerate correlation: the evaluator reduces to u^2 / (2 - rho xi u).
        if rho > 0.0:
            u_min, u_max = -math.inf, 2.0 / (xi * rho)
        else:
            u_min, u_max = -2.0 / xi * 1.0 / abs(rho), math.inf
            u_min = 2.0 / (xi * rho)
        return LimitCgf(u_min, u_max, xi, rho, rho_bar)
    if rho < 0.0:
        a = math.atan(rho_bar / rho)
        u_min = 2.0 / (xi * rho_bar) * a
        u_max = 2.0 / (xi * rho_bar) * (a + math.pi)
    elif rho > 0.0:
        a = math.atan(rho_bar / rho)
        u_min = 2.0 / (xi * rho_bar) * (a - math.pi)
        u_max = 2.0 / (xi * rho_bar) * a
    else:
        u_min = -math.pi / xi
        u_max = math.pi / xi
    return LimitCgf(u_min, u_max, xi, rho, rho_bar)


@dataclass(frozen=True)
class CdApproximation:
    """Leading-order approximation of (C, D) under a time rescaling.

    `d_rel_error_scale` / `c_rel_error_scale` carry the claimed relative error
    magnitude at this t, so order-of-accuracy tests can form ratios across t.
    """

    c_value: float
    d_value: float
    scale: str
    d_rel_error_scale: Optional[float]
    c_rel_error_scale: Optional[float]


def cd_asymptotic(p: HestonParams, t: float, u: float, scale: str,
                  h: Optional[Callable[[float], float]] = None) -> CdApproximation:
    """Small-time approximations of C(t, u/h(t)) and D(t, u/h(t)).

    scale="ldp" uses h(t) = t and requires u inside the limiting-cgf domain;
    scale="mdp" requires t = o(h(t)) and works for all real u. The sub-t
    rescaling class has no finite limit and is rejected.
    """
    t = _require_time(t)
    u = float(u)
    if scale == "sub_t":
        raise ValueError("rescalings with h(t) = o(t) have no defined limit for u != 0")
    if scale == "ldp":
        lc = limit_cgf(p)
        if not (lc.u_min < u < lc.u_max):
            raise ValueError(f"ldp scale requires u in ({lc.u_min}, {lc.u_max}), got {u}")
        lam = float(lc.value(u))
        d_rel = None if lam == 0.0 else t / abs(lam) * t  # O(1) absolute -> t^2/Lambda relative on D=Lambda/t
        # The O(1) constant of C is not modelled; treat C as an error term.
        return CdApproximation(0.0, lam / t, "ldp", d_rel, None)
    if scale == "mdp":
        if h is None:
            raise ValueError("mdp scale requires the rescaling function h")
        ht = float(h(t))
        if not (ht > 0.0 and t < ht):
            raise ValueError(f"mdp scale requires t = o(h(t)); got h({t}) = {ht}")
        c_approx = p.kappa * p.theta * u * u * t * t / (4.0 * ht * ht)
        if u == 0.0:
            d_approx = 0.0
        else:
            d_approx = (u * u * t / (2.0 * ht * ht)) * (
                1.0 - ht / u + p.rho * p.xi * u * t / (2.0 * ht))
        d_rel = t + ht * ht + (t / ht) ** 2
        c_rel = ht + t / ht
        return CdApproximation(c_approx, d_approx, "mdp", d_rel, c_rel)
    raise ValueError(f"unknown rescaling class {scale!r}")


def _bisect_boundary(pred, lo: float, hi: float, rel_tol: float = 1e-12) -> float:
    """Bisection for the boundary of {u : pred(u)}; pred(lo) True, pred(hi) False."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) <= rel_tol * max(1.0, abs(lo)):
            break
    return lo


def real_mgf_domain_upper(p: HestonParams, t: float, cap: float = 1e7) -> float:
    """sup{u >= 1 : M(t, u) finite} for the non-randomised model.

    Located by bracketing the first pole of the denominator 1 - g exp(-dt)
    along real u and bisecting; returns +inf when no pole exists below `cap`.
    """
    t = _require_time(t)

    def finite(u):
        return explosion_time(p, u) > t

    if not finite(1.0):
        # Degenerate parameter region; fall back to the boundary inside (0, 1].
        return _bisect_boundary(finite, 0.5, 1.0)
    u = 2.0
    while finite(u):
        u *= 2.0
        if u > cap:
            return math.inf
    return _bisect_boundary(finite, u / 2.0, u)


def real_mgf_domain_lower(p: HestonParams, t: float, cap: float = 1e7) -> float:
    """inf{u <= 0 : M(t, u) finite}; -inf when no pole exists above -cap."""
    t = _require_time(t)

    def finite(u):
        return explosion_time(p, u) > t

    u = -1.0
    while finite(u):
        u *= 2.0
        if -u > cap:
            return -math.inf
    return _bisect_boundary(finite, u / 2.0, u)


def randomised_mgf_domain(p: HestonParams, law, t: float, cap: float = 1e7):
    """Open interval of real u where the randomised MGF is finite.

    Combines the Heston explosion boundary with the law's MGF abscissa
    (D(t, u) must stay below it for fat-tailed laws).
    """
    t = _require_time(t)
    m_sup = law.mgf_domain_sup

    def finite(u):
        if explosion_time(p, u) <= t:
            return False
        if not math.isfinite(m_sup):
            return True
        _, d, denom, _ = _cd_values(p, t, complex(u))
        if abs(denom) < _POLE_TOL:
            return False
        return d.real < m_sup

    hi = real_mgf_domain_upper(p, t, cap)
    lo = real_mgf_domain_lower(p, t, cap)
    if math.isfinite(m_sup):
        u = 2.0
        while finite(u) and u < cap:
            u *= 2.0
        hi = _bisect_boundary(finite, u / 2.0, min(u, hi if math.isfinite(hi) else u))
        u = -2.0
        while finite(u) and -u < cap:
            u *= 2.0
        lo = _bisect_boundary(finite, u / 2.0, max(u, lo if math.isfinite(lo) else u))
    return lo, hi
