"""
Special functions, closed-form constants and dense linear algebra
used by the samplers and the dependence engine
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from src.models.errors import DomainError, NotPositiveDefinite

logger = logging.getLogger(__name__)

# Fixed so that simulation output is reproducible across runs
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)
RECONSTRUCTION_TOLERANCE = 1e-8

NORMING_CONVENTIONS = ('tail_matched', 'as_printed')


def _as_float_array(value) -> np.ndarray:
    return np.asarray(value, dtype=float)


def _scalar_or_array(result: np.ndarray, template):
    return float(result) if np.ndim(template) == 0 else result


def ln_gamma(x):
    """Natural log of the Gamma function for x > 0"""
    values = _as_float_array(x)
    if np.any(~(values > 0)):
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    return _scalar_or_array(special.gammaln(values), x)


def regularized_incomplete_beta(a, b, x):
    """Regularized incomplete beta I_x(a, b)

    scipy evaluates the continued fraction on whichever side of the
    symmetry I_x(a,b) = 1 - I_{1-x}(b,a) converges faster.
    """
    a_arr, b_arr, x_arr = _as_float_array(a), _as_float_array(b), _as_float_array(x)
    if np.any(~(a_arr > 0)) or np.any(~(b_arr > 0)):
        raise DomainError(f"Incomplete beta requires a, b > 0, got a={a}, b={b}")
    if np.any(~((x_arr >= 0) & (x_arr <= 1))):
        raise DomainError(f"Incomplete beta requires 0 <= x <= 1, got {x}")
    return _scalar_or_array(special.betainc(a_arr, b_arr, x_arr), x)


def student_t_cdf(x, df):
    """CDF of the standard Student t with (possibly non-integer) df"""
    df_arr = _as_float_array(df)
    if np.any(~(df_arr > 0)):
        raise DomainError(f"Student t requires df > 0, got {df}")
    x_arr, df_arr = np.broadcast_arrays(_as_float_array(x), df_arr)
    x_sq = x_arr ** 2
    with np.errstate(invalid='ignore', divide='ignore'):
        # |x| small: 0.5 +- 0.5 * I_{x^2/(df+x^2)}(1/2, df/2)
        inner = 0.5 * special.betainc(0.5, 0.5 * df_arr, x_sq / (df_arr + x_sq))
        # |x| large: tail = 0.5 * I_{df/(df+x^2)}(df/2, 1/2)
        tail_ratio = np.where(np.isinf(x_arr), 0.0, df_arr / (df_arr + x_sq))
        tail = 0.5 * special.betainc(0.5 * df_arr, 0.5, tail_ratio)
    upper = x_arr >= 0
    result = np.where(
        x_sq < df_arr,
        np.where(upper, 0.5 + inner, 0.5 - inner),
        np.where(upper, 1.0 - tail, tail)
    )
    if np.ndim(x) == 0 and np.ndim(df) == 0:
        return float(result)
    return result


def normal_cdf(x):
    return special.ndtr(x)


def normal_ppf(p):
    return special.ndtri(p)


def chi_quantile(u, df):
    """Quantile of the chi distribution by inverting the regularized incomplete gamma"""
    return np.sqrt(2.0 * special.gammaincinv(0.5 * df, u))


def m_alpha_gaussian(alpha) -> float:
    """m_alpha = E[(W+)^alpha] for a standard normal W

    pi^(-1/2) * 2^((alpha-2)/2) * Gamma((alpha+1)/2), evaluated in log space.
    """
    a = float(alpha)
    if not a > 0:
        raise DomainError(f"m_alpha requires alpha > 0, got {alpha}")
    log_value = -0.5 * math.log(math.pi) + 0.5 * (a - 2.0) * math.log(2.0) + ln_gamma(0.5 * (a + 1.0))
    return math.exp(log_value)


def m_alpha_student_t(alpha, nu) -> float:
    """m_alpha = E[(T+)^alpha] for a standard Student t with nu df (alpha < nu)"""
    a, v = float(alpha), float(nu)
    if not a > 0 or not v > 0:
        raise DomainError(f"m_alpha requires alpha, nu > 0, got alpha={alpha}, nu={nu}")
    if a >= v:
        raise DomainError(f"E[(T+)^alpha] is infinite for alpha={a} >= nu={v}")
    log_value = (math.log(0.5) + 0.5 * a * math.log(v) + ln_gamma(0.5 * (a + 1.0))
                 + ln_gamma(0.5 * (v - a)) - 0.5 * math.log(math.pi) - ln_gamma(0.5 * v))
    return math.exp(log_value)


def c_nu(nu) -> float:
    """Tail constant of the Student t: P(T > x) ~ x^(-nu) / c_nu"""
    v = float(nu)
    if not v > 0:
        raise DomainError(f"c_nu requires nu > 0, got {nu}")
    log_value = (-ln_gamma(0.5 * (v + 1.0)) + (1.0 - 0.5 * v) * math.log(v)
                 + 0.5 * math.log(math.pi) + ln_gamma(0.5 * v))
    return math.exp(log_value)


def frechet_norming_a_n(n: int, nu, convention: str = 'tail_matched') -> float:
    """Norming constant a_n for maxima of n standard t variables (b_n = 0)

    tail_matched: (n / c_nu)^(1/nu), so that n * P(T > a_n z) -> z^(-nu).
    as_printed:   (n * c_nu)^(1/nu), the literal product form; its limit
                  is exp(-c_nu^(-2) z^(-nu)) rather than nu-Frechet.
    """
    if n < 1:
        raise DomainError(f"Block size must be at least 1, got {n}")
    v = float(nu)
    if not v > 0:
        raise DomainError(f"nu must be positive, got {nu}")
    if convention == 'tail_matched':
        return math.exp((math.log(n) - math.log(c_nu(v))) / v)
    if convention == 'as_printed':
        return math.exp((math.log(n) + math.log(c_nu(v))) / v)
    raise DomainError(f"Unknown norming convention {convention!r}, expected one of {NORMING_CONVENTIONS}")


@dataclass(frozen=True, eq=False)
class CholeskyFactor:
    """Lower factor L with L L^T = m + jitter_used * I"""
    lower: np.ndarray
    jitter_used: float = 0.0

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]


def cholesky_with_jitter(m, max_jitter: float = JITTER_LADDER[-1]) -> CholeskyFactor:
    """Cholesky factor with the fixed diagonal jitter ladder 0, 1e-12, 1e-10, 1e-8"""
    matrix = _as_float_array(m)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError(f"Cholesky requires a square matrix, got shape {matrix.shape}")
    if max_jitter < 0:
        raise DomainError('max_jitter must be non-negative')
    identity = np.eye(matrix.shape[0])

    for jitter in JITTER_LADDER:
        if jitter > max_jitter:
            break
        target = matrix + jitter * identity
        try:
            lower = np.linalg.cholesky(target)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.diag(lower) > 0):
            continue
        if np.max(np.abs(lower @ lower.T - target)) > RECONSTRUCTION_TOLERANCE:
            continue
        if jitter > 0:
            logger.warning(f"Cholesky needed diagonal jitter {jitter:g} on a {matrix.shape[0]}x{matrix.shape[0]} matrix")
        lower.setflags(write=False)
        return CholeskyFactor(lower=lower, jitter_used=jitter)

    raise NotPositiveDefinite(
        f"Matrix of size {matrix.shape[0]} is not positive definite up to jitter {min(max_jitter, JITTER_LADDER[-1]):g}"
    )
