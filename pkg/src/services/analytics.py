"""
Closed-form and ODE-based expected delivery rates, baseline schemes,
exact distinct-demand combinatorics and coding gains
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Optional, Tuple, Union

import numpy as np

from core.config import settings
from core.errors import ConfigurationError, DegenerateGainError, OdeDivergenceError

logger = logging.getLogger(__name__)

Probability = Union[Fraction, float, int]

SERIES_THRESHOLD = 1e-4
SATURATION_THRESHOLD = 1 - 1e-12


def _check_q(q: Probability) -> float:
    value = float(q)
    if not 0.0 <= value <= 1.0:
        raise ConfigurationError(f"caching probability must lie in [0, 1], got {q}")
    return value


# ---------------------------------------------------------------------------
# Online matching (closed form)
# ---------------------------------------------------------------------------

def rate_cfcm_analytic(K: int, q: Probability) -> float:
    """
    Expected message count of online matching on the asymptotic graph:
    (1/2)[K(1-q) - log(2 - (1-q²)^{K(1-q)}) / log(1-q²)].
    """
    if K < 1:
        raise ConfigurationError(f"K must be positive, got {K}")
    q = _check_q(q)
    if q > SATURATION_THRESHOLD:
        return 0.0
    n = K * (1.0 - q)
    a = q * q
    if q < SERIES_THRESHOLD:
        # second-order expansion in q² around the 0/0 limit
        return n - 0.5 * n * n * a
    log_base = math.log1p(-a)
    return 0.5 * (n - math.log1p(-math.expm1(n * log_base)) / log_base)


# ---------------------------------------------------------------------------
# Greedy clique cover (ODE system)
# ---------------------------------------------------------------------------

class OdeVariant(str, Enum):
    """Sign of the g_{i-1} term in the clique-count drift"""

    BIRTH_DEATH = "birth_death"  # dz_i/dx = (1-q)[2g_i - g_{i+1} - g_{i-1}]
    PRINTED = "printed"          # dz_i/dx = (1-q)[2g_i - g_{i+1} + g_{i-1}]


@dataclass(frozen=True, eq=False)
class OdeSolution:
    """Normalized clique counts z_i(1; q), i = 1..K"""

    q: float
    K: int
    z: np.ndarray
    step_size: float
    variant: OdeVariant
    i_max_effective: int
    trajectory_x: Optional[np.ndarray] = None
    trajectory_z: Optional[np.ndarray] = None

    @property
    def clique_count(self) -> float:
        """Expected number of cliques, K Σ z_i(1)"""
        return self.K * float(self.z.sum())

    @property
    def covered_mass(self) -> float:
        return float(np.dot(np.arange(1, self.K + 1), self.z))


class CliqueCoverOde:
    """Right-hand side of the clique-count system for fixed K and q"""

    def __init__(self, K: int, q: float, variant: OdeVariant = OdeVariant.BIRTH_DEATH):
        self.K = K
        self.q = q
        self.sign = -1.0 if variant == OdeVariant.BIRTH_DEATH else 1.0
        sizes = np.arange(1, K + 1, dtype=float)
        # log(1 - q^{2j}) for j = 1..K
        self.log_weights = np.log1p(-np.power(q, 2.0 * sizes))

    def g(self, z: np.ndarray) -> np.ndarray:
        """g_0..g_{K+1} with g_0 = 0 and g_{K+1} = 1"""
        terms = self.K * z * self.log_weights
        suffix = np.cumsum(terms[::-1])[::-1]
        out = np.empty(self.K + 2)
        out[0] = 0.0
        out[1:-1] = np.exp(suffix)
        out[-1] = 1.0
        return out

    def __call__(self, z: np.ndarray) -> np.ndarray:
        g = self.g(z)
        return (1.0 - self.q) * (2.0 * g[1:-1] - g[2:] + self.sign * g[:-2])


def _rk4_step(f, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h * (k1 + 2.0 * (k2 + k3) + k4) / 6.0


def default_ode_step(K: int) -> float:
    return 1.0 / (settings.ode_step_factor * K)


def solve_clique_cover_ode(
    K: int,
    q: Probability,
    step: Optional[float] = None,
    tol: Optional[float] = None,
    variant: OdeVariant = OdeVariant.BIRTH_DEATH,
    samples: int = 0,
    self_check: bool = False,
) -> OdeSolution:
    """
    Integrate the K-dimensional clique-count system over x in [0, 1]
    with classical fixed-step RK4 from z(0) = 0.

    `samples` > 0 records the trajectory at that many evenly spaced steps.
    """
    if K < 1:
        raise ConfigurationError(f"K must be positive, got {K}")
    qf = _check_q(q)
    if qf >= 1.0:
        raise ConfigurationError("the clique cover system is defined for q < 1")
    h = step if step is not None else default_ode_step(K)
    if h <= 0:
        raise ConfigurationError(f"ODE step must be positive, got {h}")
    tol = tol if tol is not None else settings.ode_tolerance

    steps = max(1, math.ceil(1.0 / h - 1e-9))
    h = 1.0 / steps
    rhs = CliqueCoverOde(K, qf, variant)
    z = np.zeros(K)

    record_every = max(1, steps // samples) if samples > 0 else 0
    xs, zs = [0.0], [z.copy()]
    for n in range(1, steps + 1):
        z = _rk4_step(rhs, z, h)
        if not np.all(np.isfinite(z)):
            raise OdeDivergenceError(f"non-finite state at x={n * h:.6f} (K={K}, q={qf}, h={h})")
        if record_every and (n % record_every == 0 or n == steps):
            xs.append(n * h)
            zs.append(z.copy())

    above = np.flatnonzero(z > tol)
    solution = OdeSolution(
        q=qf,
        K=K,
        z=z,
        step_size=h,
        variant=variant,
        i_max_effective=int(above[-1]) + 1 if above.size else 0,
        trajectory_x=np.asarray(xs) if record_every else None,
        trajectory_z=np.vstack(zs) if record_every else None,
    )
    if self_check:
        drift = ode_step_convergence(K, qf, h, variant)
        if drift > 1e-6 * K:
            logger.warning(f"ODE step {h:.3g} not converged at K={K}, q={qf}: halving changes rate by {drift:.3g}")
    return solution


def ode_step_convergence(K: int, q: Probability, step: float, variant: OdeVariant = OdeVariant.BIRTH_DEATH) -> float:
    """|R(h) - R(h/2)| for the clique cover rate"""
    coarse = solve_clique_cover_ode(K, q, step=step, variant=variant)
    fine = solve_clique_cover_ode(K, q, step=step / 2, variant=variant)
    return abs(coarse.clique_count - fine.clique_count)


def rate_cfcc_analytic(
    K: int,
    q: Probability,
    step: Optional[float] = None,
    variant: OdeVariant = OdeVariant.BIRTH_DEATH,
) -> float:
    """Expected greedy clique cover rate, K Σ z_i(1; q)"""
    if _check_q(q) >= 1.0:
        return 0.0
    return solve_clique_cover_ode(K, q, step=step, variant=variant).clique_count


def rate_cscc_approx(
    K: int,
    q: Probability,
    delta: int,
    step: Optional[float] = None,
    variant: OdeVariant = OdeVariant.BIRTH_DEATH,
) -> float:
    """
    Subfile caching rate approximated as R_cc(K·Δ) / Δ.

    The subfile graphs have all-or-nothing edge groups that the asymptotic
    model ignores, so this is only indicative when Δ << K and N·Δ >> K·Δ.
    """
    if delta < 1:
        raise ConfigurationError(f"delta must be positive, got {delta}")
    return rate_cfcc_analytic(K * delta, q, step=step, variant=variant) / delta


# ---------------------------------------------------------------------------
# Distinct demands and baselines
# ---------------------------------------------------------------------------

def surjection_count(K: int, m: int) -> int:
    """Maps from a K-set onto an m-set: Σ_j (-1)^j C(m,j) (m-j)^K"""
    if m <= 0:
        raise ConfigurationError(f"target set size must be positive, got {m}")
    if m > K:
        return 0
    return sum((-1) ** j * math.comb(m, j) * (m - j) ** K for j in range(m + 1))


def prob_distinct(K: int, N: int, m: int) -> Fraction:
    """P(N_e(d) = m) = C(N,m) · surj(K,m) / N^K for uniform demands"""
    if m < 1 or m > min(K, N):
        return Fraction(0)
    return Fraction(math.comb(N, m) * surjection_count(K, m), N ** K)


def prob_distinct_table(K: int, N: int) -> np.ndarray:
    """
    Float P(N_e = m) for m = 0..K, built request by request in log space.

    Adding one request keeps m distinct files w.p. m/N and adds one
    w.p. (N-m)/N.
    """
    log_p = np.full(K + 1, -np.inf)
    log_p[0] = 0.0
    m = np.arange(K + 1, dtype=float)
    with np.errstate(divide="ignore"):
        stay = np.log(m / N)
        grow = np.log(np.clip(N - m + 1, 0, None) / N)
    for _ in range(K):
        shifted = np.concatenate(([-np.inf], log_p[:-1] + grow[1:]))
        log_p = np.logaddexp(log_p + stay, shifted)
    return np.exp(log_p)


def expected_distinct(K: int, N: int) -> Fraction:
    """E[N_e(d)] = N(1 - (1 - 1/N)^K)"""
    return N * (1 - Fraction(N - 1, N) ** K)


def rate_uncoded_exact(K: int, N: int, M: int) -> Fraction:
    """Closed form N(1 - (1-1/N)^K)(1 - M/N)"""
    _check_instance(K, N, M)
    return expected_distinct(K, N) * (1 - Fraction(M, N))


def rate_uncoded_sum_form(K: int, N: int, M: int) -> Fraction:
    """Σ_m P(N_e = m) · m (1 - M/N)"""
    _check_instance(K, N, M)
    return sum((prob_distinct(K, N, m) * m for m in range(1, K + 1)), Fraction(0)) * (1 - Fraction(M, N))


def rate_uncoded_analytic(K: int, N: int, M: int) -> float:
    """Expected uncoded rate N(1 - (1-1/N)^K)(1 - M/N)"""
    _check_instance(K, N, M)
    if N == 1:
        return 1.0 - M
    return N * -math.expm1(K * math.log1p(-1.0 / N)) * (1.0 - M / N)


def rate_uncoded_approx(K: int, q: Probability) -> float:
    """Large-library uncoded rate K(1 - q)"""
    return K * (1.0 - _check_q(q))


def rate_centralized_reference(K: int, q: Probability) -> float:
    """Worst-case rate of the centralized subfile scheme, K(1-q)/(1+Kq)"""
    qf = _check_q(q)
    return K * (1.0 - qf) / (1.0 + K * qf)


def _check_instance(K: int, N: int, M: int):
    if K < 1 or N < 1 or not 0 <= M <= N:
        raise ConfigurationError(f"invalid instance K={K}, N={N}, M={M}")


def rate_csc_opt_exact(K: int, N: int, M: int) -> Fraction:
    """Σ_m P(N_e = m) · (N-M)/M · (1 - (1-M/N)^m), exact"""
    _check_instance(K, N, M)
    if M == 0:
        raise ConfigurationError("optimal subfile caching rate is undefined for M = 0")
    miss = Fraction(N - M, N)
    factor = Fraction(N - M, M)
    return sum(
        (prob_distinct(K, N, m) * factor * (1 - miss ** m) for m in range(1, min(K, N) + 1)),
        Fraction(0),
    )


def rate_csc_opt_analytic(K: int, N: int, M: int, bits_budget: Optional[int] = None) -> float:
    """
    Expected rate of optimal decentralized subfile caching.

    Exact rational arithmetic while K·log2(N) fits the bit budget,
    log-space floats beyond it.
    """
    _check_instance(K, N, M)
    if M == 0:
        raise ConfigurationError("optimal subfile caching rate is undefined for M = 0")
    budget = bits_budget if bits_budget is not None else settings.exact_bits_budget
    if K * math.log2(max(N, 2)) <= budget:
        return float(rate_csc_opt_exact(K, N, M))
    logger.info(f"csc-opt for K={K}, N={N} exceeds {budget} bits, using log-space distribution")
    if M == N:
        return 0.0
    probs = prob_distinct_table(K, N)
    m = np.arange(K + 1, dtype=float)
    hit_any = -np.expm1(m * math.log1p(-M / N))
    return float((N - M) / M * np.sum(probs * hit_any))


def csc_gap_limit(K: int, N: int) -> float:
    """Shortfall of the optimal subfile additive gain from 100 % as M -> N"""
    return float(1 / expected_distinct(K, N))


# ---------------------------------------------------------------------------
# Coding gains
# ---------------------------------------------------------------------------

def coding_gains(r_coded: float, r_uncoded: float) -> Tuple[float, float]:
    """(g_a, g_m): additive and multiplicative gain over uncoded delivery"""
    if r_coded <= 0 or r_uncoded <= 0:
        raise DegenerateGainError(f"coding gain undefined for rates coded={r_coded}, uncoded={r_uncoded}")
    g_a = (r_uncoded - r_coded) / r_uncoded
    g_m = r_uncoded / r_coded
    assert math.isclose(g_a, 1.0 - 1.0 / g_m, rel_tol=1e-9, abs_tol=1e-12)
    return g_a, g_m
