"""Connected S-matrix coefficients for one, two and three photons.

Conventions
-----------
All momentum-space amplitudes in this package are *delta stripped*: a
coefficient returned here multiplies a single overall momentum-conservation
delta, delta(sum p - sum k), which is never represented numerically.  The
1/(2pi)^n normalisation of the momentum-space field operators is absorbed
into the coefficients, so position-space amplitudes are recovered with the
bare transform  psi(x) = integral dp e^{ipx} psi(p)  (no 2*pi prefactor).

The three-photon coefficient is evaluated by explicit enumeration of all 36
(outgoing, incoming) permutation pairs; no algebraic pre-simplification is
applied, which keeps the code term-for-term comparable to the closed form
and costs nothing at this size.

``real_space_kernel`` and the ``sector_moment_*`` helpers expose the
position-space scattering kernel on the ordered sector; they exist solely as
an independent oracle against which the closed-form momentum coefficients
are validated in the test suite.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "s1_coefficient",
    "s2c_coefficient",
    "s3c_coefficient",
    "SingleAtomTwoPhoton",
    "single_atom_two_photon",
    "real_space_kernel",
    "sector_permutations",
    "sector_moment_i1",
    "sector_moment_i2",
    "sector_moment_i3",
]


def s1_coefficient(k, gamma=1.0):
    """Even-channel single-photon scattering phase (k - i*gamma/2)/(k + i*gamma/2)."""
    k = np.asarray(k, dtype=complex)
    out = (k - 0.5j * gamma) / (k + 0.5j * gamma)
    return out if out.shape else complex(out)


def s2c_coefficient(p1, k1, k2, gamma=1.0):
    """Two-photon connected coefficient; p2 = k1 + k2 - p1 is implied.

    i*gamma^2/(2*pi) * (p1+p2+i*gamma) /
        [(p1+i*gamma/2)(p2+i*gamma/2)(k1+i*gamma/2)(k2+i*gamma/2)]
    """
    p1 = np.asarray(p1, dtype=complex)
    k1 = np.asarray(k1, dtype=complex)
    k2 = np.asarray(k2, dtype=complex)
    p2 = k1 + k2 - p1
    hg = 0.5j * gamma
    out = (
        (1j * gamma**2 / (2.0 * math.pi))
        * (p1 + p2 + 1j * gamma)
        / ((p1 + hg) * (p2 + hg) * (k1 + hg) * (k2 + hg))
    )
    return out if out.shape else complex(out)


def s3c_coefficient(p1, p2, k1, k2, k3, gamma=1.0):
    """Three-photon connected coefficient; p3 = k1 + k2 + k3 - p1 - p2 implied.

    Explicit sum over all 6 x 6 permutations of the outgoing and incoming
    momenta of
        -i*gamma^3/(2 * 3! pi^2) /
          [(P1+P2-K1+i*gamma/2)(P1+i*gamma/2)(K1+i*gamma/2)(K2+i*gamma/2)(K3+i*gamma/2)]
    where (P, K) run over the permuted momentum tuples.

    The overall normalisation is anchored to the position-space sector
    kernel: integrating the connected part of the ordered-sector scattering
    kernel numerically (see the test-suite oracle) fixes the prefactor to
    half the naive permutation-sum bookkeeping, and the single-atom
    coincidence identity between the two- and three-photon connected
    amplitudes confirms the same factor independently.
    """
    p1 = np.asarray(p1, dtype=complex)
    p2 = np.asarray(p2, dtype=complex)
    k1 = np.asarray(k1, dtype=complex)
    k2 = np.asarray(k2, dtype=complex)
    k3 = np.asarray(k3, dtype=complex)
    p3 = k1 + k2 + k3 - p1 - p2
    hg = 0.5j * gamma
    ps = (p1, p2, p3)
    ks = (k1, k2, k3)
    total = 0.0 + 0.0j
    for ip in itertools.permutations(range(3)):
        P1, P2 = ps[ip[0]], ps[ip[1]]
        for ik in itertools.permutations(range(3)):
            K1, K2, K3 = ks[ik[0]], ks[ik[1]], ks[ik[2]]
            total = total + 1.0 / (
                (P1 + P2 - K1 + hg) * (P1 + hg) * (K1 + hg) * (K2 + hg) * (K3 + hg)
            )
    out = -1j * gamma**3 / (12.0 * math.pi**2) * total
    return out if np.asarray(out).shape else complex(out)


@dataclass(frozen=True)
class SingleAtomTwoPhoton:
    """Structure of a single-atom two-photon scattering element.

    ``connected_weight`` multiplies the connected coefficient; the
    disconnected part is the symmetrised product of the two listed
    single-photon amplitudes ("t" for transmission, "r" for the loss
    amplitude), each carrying its own momentum-conservation delta.
    """

    branch: str
    connected_weight: float
    disconnected_factors: tuple[str, str]


def single_atom_two_photon(branch: str, beta: float) -> SingleAtomTwoPhoton:
    """Decomposition of the two-photon single-atom element for one branch.

    ``branch`` is "lossless" (both photons stay in the guide, connected
    weight beta^2) or "one-loss" (one photon leaves through the loss
    channel, connected weight beta^(3/2) * sqrt(1-beta)).
    """
    if branch == "lossless":
        return SingleAtomTwoPhoton(branch, beta**2, ("t", "t"))
    if branch == "one-loss":
        return SingleAtomTwoPhoton(
            branch, beta**1.5 * math.sqrt(1.0 - beta), ("r", "t")
        )
    raise ValueError(f"unknown branch {branch!r}")


# ---------------------------------------------------------------------------
# Position-space sector kernel (test oracle only)
# ---------------------------------------------------------------------------


def sector_permutations(n: int) -> list[tuple[int, ...]]:
    """Permutations P of (1..n) with P_j >= j-1 for j = 2..n (1-based)."""
    out = []
    for perm in itertools.permutations(range(1, n + 1)):
        if all(perm[j] >= j for j in range(1, n)):  # perm[j] is P_{j+1}, 1-based
            out.append(perm)
    return out


def real_space_kernel(n: int, y, xi, gamma=1.0):
    """Ordered-sector position kernel for n = 2 or 3 photons.

    Parameters
    ----------
    y, xi:
        Outgoing positions and incoming light-cone coordinates, each sorted
        strictly decreasing (y[0] > y[1] > ...).

    Returns
    -------
    (delta_pairs, smooth):
        ``delta_pairs`` is a list of lists of (j, P_j) index pairs, one list
        per permutation term whose propagator factors were all taken in the
        delta branch at xi_j == y_{P_j}; ``smooth`` is the value of the sum
        of all remaining (exponential-branch mixed) terms.

    The kernel is defined only on the interleaved sector
    xi_1 >= y_1 >= xi_2 >= y_2 >= ...; violating the outgoing ordering is a
    precondition error.
    """
    if n not in (2, 3):
        raise ValueError("real_space_kernel supports n = 2 or 3")
    y = [float(v) for v in y]
    xi = [float(v) for v in xi]
    if any(y[i] <= y[i + 1] for i in range(n - 1)):
        raise ValueError("outgoing positions must be strictly decreasing")
    inter = []
    for j in range(n):
        inter.append(xi[j])
        inter.append(y[j])
    if any(inter[i] < inter[i + 1] for i in range(2 * n - 1)):
        return [], 0.0

    delta_pairs = []
    smooth = 0.0
    for perm in sector_permutations(n):
        # each factor: delta(y_{P_j} - xi_j) - gamma * theta(xi_j > y_{P_j}) e^{gamma(y_{P_j}-xi_j)/2}
        all_delta = all(math.isclose(y[perm[j] - 1], xi[j]) for j in range(n))
        if all_delta:
            delta_pairs.append([(j + 1, perm[j]) for j in range(n)])
            continue
        val = 1.0 / math.factorial(n)
        for j in range(n):
            yp, x = y[perm[j] - 1], xi[j]
            if x > yp:
                val *= -gamma * math.exp(0.5 * gamma * (yp - x))
            else:
                val = 0.0
                break
        smooth += val
    return delta_pairs, smooth


# -- sector moments: the half-transformed kernels used by the oracle --------


def sector_moment_i1(k, y, gamma=1.0):
    """Single-photon half-transformed kernel I_1(k, y)."""
    return s1_coefficient(k, gamma) * np.exp(1j * k * y)


def sector_moment_i2(k1, k2, y1, y2, gamma=1.0):
    """Two-photon half-transformed sector kernel I~_2 on y1 > y2."""
    hg = 0.5j * gamma
    disc = (
        s1_coefficient(k1, gamma)
        * s1_coefficient(k2, gamma)
        * np.exp(1j * (k1 * y1 + k2 * y2))
    )
    conn = (
        np.exp(1j * (k1 + k2) * y1 - 0.5 * gamma * (y1 - y2))
        * 1j
        * gamma
        * (k1 - k2 - 1j * gamma)
        / ((k1 + hg) * (k2 + hg))
    )
    return disc + conn


def _interval_sets(n: int, p: int):
    """Lexicographically ordered 2p-element subsets of {1..n}."""
    return list(itertools.combinations(range(1, n + 1), 2 * p))


def sector_moment_i3(k1, k2, k3, y1, y2, y3, gamma=1.0):
    """Three-photon half-transformed sector kernel I~_3 on y1 > y2 > y3.

    Direct evaluation of the general pairing expansion: the free part is the
    product of single-photon kernels; each paired interval (a, b) replaces
    the enclosed phases by a decaying exchange factor.
    """
    ks = (complex(k1), complex(k2), complex(k3))
    ys = (float(y1), float(y2), float(y3))
    hg = 0.5j * gamma
    n = 3

    free = math.prod(
        (ks[j] - hg) / (ks[j] + hg) * np.exp(1j * ks[j] * ys[j]) for j in range(n)
    )
    pref = math.prod(1.0 / (ks[j] + hg) for j in range(n))

    total = complex(free)
    for p in range(1, n // 2 + 1):
        for subset in _interval_sets(n, p):
            # pair consecutive subset entries into intervals [a, b]
            pairs = [(subset[2 * q], subset[2 * q + 1]) for q in range(p)]
            covered = set()
            for a, b in pairs:
                covered.update(range(a, b + 1))
            comp = [c for c in range(1, n + 1) if c not in covered]
            val = (1j * gamma) ** p * pref
            for c in comp:
                val *= np.exp(1j * ks[c - 1] * ys[c - 1]) * (ks[c - 1] - hg)
            for a, b in pairs:
                phase = 1j * ks[a - 1] * ys[a - 1]
                for v in range(a + 1, b + 1):
                    phase += 1j * ks[v - 1] * ys[v - 2]
                amp = 1.0 + 0.0j
                if b >= a + 2:
                    for r in range(a + 2, b + 1):
                        amp *= ks[r - 1] + 3j * gamma / 2.0
                val *= (
                    np.exp(phase)
                    * (ks[a - 1] - ks[a] - 1j * gamma)
                    * amp
                    * np.exp(-0.5 * gamma * (ys[a - 1] - ys[b - 1]))
                )
            total += val
    return total
