"""Single-photon amplitudes and terminating special functions.

Every function here is an exact finite expression: the single-photon
transmission/reflection amplitudes, the momentum-shell integral ``F(j, l)``
of products of resonance poles, terminating Gauss hypergeometric sums and
the incomplete beta function at positive integer parameters.  Finite series
are accumulated with compensated (Kahan) summation because neighbouring
terms may alternate in sign with large magnitude ratios.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "transmission",
    "reflection",
    "binom",
    "f_integral",
    "gauss2f1_terminating",
    "incomplete_beta",
    "kahan_sum",
]

# float conversion of an exact binomial overflows near comb(1029, 514)
_COMB_FLOAT_LIMIT = 1020


def transmission(k, beta, gamma=1.0):
    """Single-photon transmission amplitude t_k = 1 - i*beta*gamma/(k + i*gamma/2).

    Accepts scalars or arrays for ``k``.  |t_k| <= 1 for beta in (0, 1].
    """
    k = np.asarray(k, dtype=complex)
    out = 1.0 - 1j * beta * gamma / (k + 0.5j * gamma)
    return out if out.shape else complex(out)


def reflection(k, beta, gamma=1.0):
    """Loss-channel amplitude r_k = -sqrt(beta(1-beta)) * i*gamma/(k + i*gamma/2).

    Satisfies |t_k|^2 + |r_k|^2 = 1 for real k.
    """
    k = np.asarray(k, dtype=complex)
    out = -math.sqrt(beta * (1.0 - beta)) * 1j * gamma / (k + 0.5j * gamma)
    return out if out.shape else complex(out)


def binom(n: int, k: int) -> float:
    """Binomial coefficient as a float, exact where the float range allows.

    ``math.comb`` is exact in integer arithmetic; beyond the float range a
    log-space (lgamma) evaluation is used instead.
    """
    if k < 0 or k > n:
        return 0.0
    if n <= _COMB_FLOAT_LIMIT:
        return float(math.comb(n, k))
    return math.exp(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1))


def kahan_sum(terms) -> complex:
    """Compensated sum of an iterable of complex terms."""
    total = 0.0 + 0.0j
    comp = 0.0 + 0.0j
    for t in terms:
        y = t - comp
        s = total + y
        comp = (s - total) - y
        total = s
    return total


def _ipow(n: int) -> complex:
    """i**n for any integer n."""
    return (1j) ** (n % 4)


def f_integral(j: int, l: int) -> complex:
    """Momentum-shell pole integral F(j, l).

    F(j, l) = integral over the zero-total-momentum shell of
    gamma^(j+l-1) / [(k + i*gamma/2)^j (-k + i*gamma/2)^l], with the exact
    value 2*pi * i^(-j-l) * C(j+l-2, l-1).
    """
    if j < 1 or l < 1:
        raise ValueError(f"F(j, l) requires j, l >= 1, got ({j}, {l})")
    if j + l - 2 > _COMB_FLOAT_LIMIT:
        raise OverflowError(f"F({j}, {l}) exceeds double precision range")
    return 2.0 * math.pi * _ipow(-(j + l)) * binom(j + l - 2, l - 1)


def _termination_index(a, b) -> int | None:
    """Smallest series-truncation index implied by a non-positive integer
    upper parameter, or None if neither parameter terminates the series."""
    cands = []
    for x in (a, b):
        if isinstance(x, (int, np.integer)) or (
            isinstance(x, float) and x.is_integer()
        ):
            xi = int(round(float(np.real(x))))
            if xi <= 0 and xi == x:
                cands.append(-xi)
    return min(cands) if cands else None


def gauss2f1_terminating(a, b, c, z) -> complex:
    """Terminating Gauss hypergeometric sum 2F1(a, b; c; z).

    One of ``a``, ``b`` must be a non-positive integer so the series is a
    finite polynomial in ``z``.  If ``c`` is also a non-positive integer its
    magnitude must exceed the truncation index, otherwise a denominator
    Pochhammer vanishes inside the sum; that combination is rejected.
    """
    n_max = _termination_index(a, b)
    if n_max is None:
        raise ValueError(
            "2F1 series does not terminate: need a or b a non-positive integer"
        )
    if isinstance(c, (int, np.integer)) and c <= 0 and -int(c) < n_max:
        raise ValueError(
            f"2F1({a}, {b}; {c}; z): denominator Pochhammer vanishes before "
            f"the series terminates at n = {n_max}"
        )

    def terms():
        term = 1.0 + 0.0j
        yield term
        for n in range(n_max):
            term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
            yield term

    return kahan_sum(terms())


def incomplete_beta(z, a: int, b: int) -> complex:
    """Incomplete beta function B(z; a, b) for integer a, b >= 1.

    Finite binomial expansion of the defining integral of
    t^(a-1) (1-t)^(b-1) from 0 to z; an exact polynomial in z, valid for
    complex z with no branch ambiguity.
    """
    if a < 1 or b < 1:
        raise ValueError(f"incomplete_beta requires integer a, b >= 1, got ({a}, {b})")
    z = complex(z)

    def terms():
        zp = z**a
        for k in range(b):
            yield binom(b - 1, k) * (-1.0) ** k * zp / (a + k)
            zp *= z

    return kahan_sum(terms())
