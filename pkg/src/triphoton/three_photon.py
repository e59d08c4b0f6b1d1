"""Perturbative three-photon amplitude: tree-level sums and loop diagrams.

The connected three-photon momentum amplitude at resonant drive is assembled
from concatenated single-atom processes:

* ``t3v``: one triple vertex somewhere along the chain (already symmetric in
  the outgoing momenta).
* ``t4v``: two pair vertices on different atoms, summed over all six
  relabelings of the outgoing momenta.
* ``loop_diagram(1..6)``: the order-beta^3 diagrams containing an internal
  momentum integral, in closed form.  Diagram 2 (pair vertex feeding the
  triple vertex) is fully symmetric and enters the total once, mirroring the
  triple-vertex convention; diagrams 1 and 3-6 are summed over all six
  outgoing relabelings.

Everything is evaluated on the delta(p1+p2+p3) shell with p3 = -p1-p2
implied, vectorised over numpy arrays of (p1, p2).

Loop diagrams 1-6 contain factors such as 1/p1 or (p1+p2)^(-n) that are
removable in the full summed expression but singular term by term; they are
therefore only evaluated away from p1 = 0, p2 = 0, p1+p2 = 0 and raise
``RequiresOffset`` at those points.  Grid drivers sidestep the singular
lines with a small multiplicative nudge (see `transforms.sample_phi3`).

The module also hosts the exact position-space evaluator for the tree-level
amplitude: every tree term factorises as F(p1) G(p2) H(p1+p2) with rational
single-line factors, so the two-dimensional inverse transform reduces to the
one-dimensional kernel convolution implemented in `position`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .params import PhysParams
from .position import ContourBasis, StandardKernel, TripleTerm, triple_convolution
from .smatrix import s3c_coefficient
from .special import binom, gauss2f1_terminating, incomplete_beta, transmission

__all__ = [
    "DiagramConfig",
    "RequiresOffset",
    "t3v",
    "t4v",
    "fundamental_integral",
    "loop_diagram",
    "loop_sum",
    "phi3_momentum",
    "TreePositionField",
    "tree_s_max",
]

_SING_TOL = 1e-12


class RequiresOffset(ValueError):
    """Evaluation point sits on a removable-singularity line of a loop term."""


@dataclass(frozen=True)
class DiagramConfig:
    """Evaluation configuration for the three-photon amplitude."""

    params: PhysParams
    include_loops: bool = False

    @property
    def beta(self) -> float:
        return self.params.beta

    @property
    def atoms(self) -> int:
        return self.params.num_atoms

    @property
    def gamma(self) -> float:
        return self.params.gamma_tot


def _tp(p, beta, gamma):
    return transmission(p, beta, gamma)


# ---------------------------------------------------------------------------
# tree level, momentum space
# ---------------------------------------------------------------------------


def t3v(p1, p2, cfg: DiagramConfig):
    """Triple-vertex amplitude: one three-photon vertex on any atom."""
    beta, M, gamma = cfg.beta, cfg.atoms, cfg.gamma
    p1 = np.asarray(p1, dtype=complex)
    p2 = np.asarray(p2, dtype=complex)
    p3 = -p1 - p2
    t0 = 1.0 - 2.0 * beta
    a = _tp(p1, beta, gamma) * _tp(p2, beta, gamma) * _tp(p3, beta, gamma)
    geom = np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    for j in range(M):
        geom += a ** (M - 1 - j) * t0 ** (3 * j)
    out = beta**3 * s3c_coefficient(p1, p2, 0.0, 0.0, 0.0, gamma) * geom
    return out if np.asarray(out).shape else complex(out)


def _t4v_role(pa, pb, pc, cfg: DiagramConfig):
    """Double pair-vertex amplitude with photon ``pa`` leaving the first vertex."""
    beta, M, gamma = cfg.beta, cfg.atoms, cfg.gamma
    hg = 0.5j * gamma
    t0 = 1.0 - 2.0 * beta
    ta = _tp(pa, beta, gamma)
    tam = _tp(-pa, beta, gamma)
    tbc = _tp(pb, beta, gamma) * _tp(pc, beta, gamma)
    pref = (
        2.0
        * beta**4
        * gamma**2
        / math.pi**2
        * (-pa + 1j * gamma)
        / ((pa + hg) * (-pa + hg) ** 2 * (pb + hg) * (pc + hg))
    )
    # inner sum over atoms between the vertices, then over atoms before them
    total = np.zeros(np.broadcast(pa, pb).shape, dtype=complex)
    if M >= 2:
        gk = np.ones_like(total)  # sum_{m<=K} (t0 t_{-pa})^m tbc^(K-m), K = 0
        j = M - 2
        total = total + t0 ** (3 * j) * ta ** (M - j - 1) * gk
        for K in range(1, M - 1):
            gk = (t0 * tam) * gk + tbc**K
            j = M - 2 - K
            total = total + t0 ** (3 * j) * ta ** (M - j - 1) * gk
    return pref * t0 * total


def t4v(p1, p2, cfg: DiagramConfig):
    """Double pair-vertex amplitude summed over all six outgoing relabelings."""
    p1 = np.asarray(p1, dtype=complex)
    p2 = np.asarray(p2, dtype=complex)
    p3 = -p1 - p2
    ps = (p1, p2, p3)
    total = 0.0
    for ia, ib, ic in itertools.permutations(range(3)):
        total = total + _t4v_role(ps[ia], ps[ib], ps[ic], cfg)
    out = total
    return out if np.asarray(out).shape else complex(out)


# ---------------------------------------------------------------------------
# fundamental loop-momentum integrals
# ---------------------------------------------------------------------------


def fundamental_integral(variant: int, a: int, b: int, c: int | None = None,
                         p=None, gamma: float = 1.0):
    """Closed forms of the four loop-momentum pole integrals.

    variant 1: int dl [(l+ig/2)^a (-l+ig/2)^b]^(-1)
    variant 2: int dl [(l+ig/2)^a (-l+ig/2)^b (l+p+ig/2)^c]^(-1),  c >= 2
    variant 3: the variant-2 form with c = 1
    variant 4: int dl [(l+ig/2)^a (-l-p+ig/2)^b]^(-1)

    ``p`` is the external momentum entering the shifted pole (the sum of two
    outgoing momenta at the call sites).  Integer orders a, b (and c) >= 1.
    """
    if a < 1 or b < 1:
        raise ValueError("pole orders must be integers >= 1")
    ig = 1j * gamma
    if variant == 1:
        return (
            2.0
            * math.pi
            * (1j) ** (-(a + b) % 4)
            * gamma ** (1 - a - b)
            * binom(a + b - 2, a - 1)
        )
    if variant == 2:
        if c is None or c < 2 or p is None:
            raise ValueError("variant 2 requires c >= 2 and external momentum p")
        p = np.asarray(p, dtype=complex)
        z = -1j * (p + ig) / gamma
        f21 = np.array(
            [gauss2f1_terminating(a, 1 - b, 2 - b - c, zz) for zz in np.atleast_1d(z)]
        ).reshape(np.shape(z))
        return (
            -2.0 * math.pi * (1j) ** ((1 - a) % 4) * (p + ig) ** (1 - b - c)
            * gamma ** (-a) * binom(b + c - 2, b - 1) * f21
        )
    if variant == 3:
        if p is None:
            raise ValueError("variant 3 requires external momentum p")
        p = np.asarray(p, dtype=complex)
        z = 1.0 - 1j * p / gamma
        bt = np.array([incomplete_beta(zz, b, a) for zz in np.atleast_1d(z)]).reshape(np.shape(z))
        return (
            -2j * math.pi * (-p) ** (-a) * (p + ig) ** (-b)
            * (1.0 - b * bt * binom(a + b - 1, b))
        )
    if variant == 4:
        if p is None:
            raise ValueError("variant 4 requires external momentum p")
        p = np.asarray(p, dtype=complex)
        return -2j * math.pi * binom(a + b - 2, b - 1) * (-p + ig) ** (1 - a - b)
    raise ValueError(f"unknown fundamental integral variant {variant}")


# ---------------------------------------------------------------------------
# loop diagrams, closed forms
# ---------------------------------------------------------------------------


def _check_offset(gamma, *moms):
    for m in moms:
        if np.any(np.abs(np.asarray(m)) < _SING_TOL * gamma):
            raise RequiresOffset(
                "loop diagram evaluated on a removable-singularity line; "
                "offset the evaluation point"
            )


def _geom_cumulative(rho, n):
    """g[k] = sum_{j=0}^{k} rho^j for k = 0..n (list of grid arrays)."""
    out = [np.ones_like(rho)]
    acc = np.ones_like(rho)
    powr = np.ones_like(rho)
    for _ in range(n):
        powr = powr * rho
        acc = acc + powr
        out.append(acc.copy())
    return out


def _loop_1(p1, p2, cfg: DiagramConfig):
    """Triple vertex followed by a pair vertex on the two lower lines."""
    beta, M, gamma = cfg.beta, cfg.atoms, cfg.gamma
    if M < 2:
        return np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    _check_offset(gamma, p1)
    hg = 0.5j * gamma
    ig = 1j * gamma
    t0 = 1.0 - 2.0 * beta
    p3 = -p1 - p2
    tp1 = _tp(p1, beta, gamma)
    tbc = _tp(p2, beta, gamma) * _tp(p3, beta, gamma)

    pref = (
        -2j * beta**5 * gamma**3 * (-p1 + ig)
        / (math.pi**2 * p1 * (p3 + hg) * (p2 + hg))
    )

    uinv = 1.0 / (-p1)          # base of the (-p1)^(-k) factors
    vinv = 1.0 / (-p1 + ig)     # base of the (-p1+ig)^(-k) factors; z = ig*vinv
    mmax = M - 2
    nu, nv = mmax + 2, 2 * mmax + 3
    u_pows = [np.ones_like(uinv)]
    for _ in range(nu):
        u_pows.append(u_pows[-1] * uinv)

    pole_m = 1.0 / (p1 - hg)
    pole_p = 1.0 / (p1 + hg)

    def w_inner(m):
        # collect the (r, s) sums into coefficient tables: a pure polynomial
        # in vinv (shifted-pole residues) and a table over (uinv^i, vinv^e)
        zc = 1j * gamma  # z = zc * vinv
        cv = np.zeros(2 * m + 3, dtype=complex)
        tbl = np.zeros((m + 2, 2 * m + 3), dtype=complex)
        for r in range(m + 1):
            for s in range(m + 1):
                cb = binom(m, r) * binom(m, s) * (-1j * beta * gamma) ** (r + s)
                cv[r + s + 2] += cb * binom(r + s + 2, r + 1)
                for aa, bb in ((s + 1, r + 1), (r + 1, s + 1)):
                    i_u = r + 1 if aa == s + 1 else s + 1
                    i_g = s + 1 if aa == s + 1 else r + 1
                    base = cb * ig ** (-i_g)
                    tbl[i_u, 0] += base
                    fac = -base * aa * binom(r + s + 1, aa)
                    for k in range(bb):
                        tbl[i_u, aa + k] += (
                            fac * binom(bb - 1, k) * (-1.0) ** k
                            * zc ** (aa + k) / (aa + k)
                        )
        # Horner in vinv for the pole_m polynomial
        acc_v = np.zeros_like(vinv)
        for e in range(len(cv) - 1, 0, -1):
            acc_v = (acc_v + cv[e]) * vinv
        # table part: sum_i uinv^i * poly_e(vinv)
        acc_u = np.zeros_like(uinv)
        for i in range(tbl.shape[0] - 1, 0, -1):
            row = tbl[i]
            acc_row = np.zeros_like(vinv)
            for e in range(len(row) - 1, 0, -1):
                acc_row = (acc_row + row[e]) * vinv
            acc_u = acc_u + u_pows[i] * (acc_row + row[0])
        return pole_m * acc_v + pole_p * acc_u

    total = np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    hk = None
    for K in range(0, M - 1):
        wk = w_inner(K)
        hk = wk if hk is None else tbc * hk + wk
        j = M - 2 - K
        total = total + t0 ** (3 * j) * tp1 ** (M - j - 1) * hk
    return pref * total


def _loop_2(p1, p2, cfg: DiagramConfig):
    """Pair vertex creating a zero-sum pair that feeds the triple vertex."""
    beta, M, gamma = cfg.beta, cfg.atoms, cfg.gamma
    if M < 2:
        return np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    p3 = -p1 - p2
    _check_offset(gamma, p1, p2, p1 + p2)
    hg = 0.5j * gamma
    ig = 1j * gamma
    t0 = 1.0 - 2.0 * beta
    trip = _tp(p1, beta, gamma) * _tp(p2, beta, gamma) * _tp(p3, beta, gamma)

    ps = (np.asarray(p1, dtype=complex), np.asarray(p2, dtype=complex),
          np.asarray(p3, dtype=complex))
    mmax = M - 2
    zc = -1j / gamma  # hypergeometric-argument scale: z = zc * w

    # per pair-class data shared by the two permutations of each class
    classes = []
    for ia, ib in ((0, 1), (0, 2), (1, 2)):
        pa, pb = ps[ia], ps[ib]
        w = pa + pb + ig
        winv = 1.0 / w
        winv_pows = [np.ones_like(winv)]
        for _ in range(mmax + 3):
            winv_pows.append(winv_pows[-1] * winv)
        n2inv = 1.0 / (-(pa + pb))
        n2_pows = [np.ones_like(n2inv)]
        for _ in range(mmax + 3):
            n2_pows.append(n2_pows[-1] * n2inv)
        pole_sum = 1.0 / (pa + hg) + 1.0 / (pb + hg)
        pole_ab = 1.0 / (pa + pb + hg)
        classes.append((w, winv_pows, n2_pows, pole_sum, pole_ab))

    def w_inner(m):
        # scalar part of the zero-shift loop integral
        d1 = 0.0 + 0.0j
        # table over (n2^(-i), w^(e - (m+2))) for the shifted branches
        off = m + 2
        tbl = np.zeros((m + 3, 3 * m + 8), dtype=complex)
        for r in range(m + 1):
            for s in range(m + 1):
                cb = binom(m, r) * binom(m, s) * (-1j * beta * gamma) ** (r + s)
                d1 += (
                    cb * 2.0 * (1j) ** (-(r + s) % 4) * math.pi
                    * gamma ** (-3.0 - r - s)
                    * math.factorial(r + s + 2)
                    / (math.factorial(r + 1) * math.factorial(s + 1))
                )
                for aa, bb in ((2 + s, 2 + r), (2 + r, 2 + s)):
                    base = cb * (-2j * math.pi)
                    tbl[bb, off - aa] += base
                    fac = -base * aa * binom(r + s + 3, aa)
                    # the w^(-aa) prefactor multiplies the whole bracket, so
                    # the beta-sum power w^(aa+k) lands at net w^k
                    for k in range(bb):
                        tbl[bb, off + k] += (
                            fac * binom(bb - 1, k) * (-1.0) ** k
                            * zc ** (aa + k) / (aa + k)
                        )
        acc = np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
        for w, winv_pows, n2_pows, pole_sum, pole_ab in classes:
            part = np.zeros_like(acc)
            for i in range(2, tbl.shape[0]):
                row = tbl[i]
                acc_row = np.zeros_like(w)
                for e in range(len(row) - 1, -1, -1):
                    acc_row = acc_row * w
                    if row[e] != 0.0:
                        acc_row = acc_row + row[e]
                part = part + n2_pows[i] * acc_row * winv_pows[off]
            acc = acc + pole_sum * (d1 * pole_ab + part)
        return acc

    total = np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    hk = None
    for K in range(0, M - 1):
        wk = w_inner(K)
        hk = wk if hk is None else trip * hk + t0**K * wk
        j = M - 2 - K
        total = total + t0 ** (3 * j) * hk
    return -(2.0 * beta**5 * gamma**3 / (3.0 * math.pi**3)) * t0 * total


def _f21_poly_coeffs(r, s_shift, t, gamma):
    """Coefficients of 2F1(-r-1, s_shift, -r-t-2, z) as powers of w, z = -i w / gamma."""
    # series sum_n (a)_n (b)_n / ((c)_n n!) z^n, terminating at n = r+1
    a, b, c = -r - 1, s_shift, -r - t - 2
    coeffs = []
    term = 1.0
    for n in range(r + 2):
        coeffs.append(term * (-1j / gamma) ** n)
        term *= (a + n) * (b + n) / ((c + n) * (n + 1))
    return coeffs  # coefficient of w^n


def _loop_chain_three(p1, p2, cfg: DiagramConfig, variant: str):
    """Shared machinery of the three-pair-vertex diagrams 3 and 6."""
    beta, M, gamma = cfg.beta, cfg.atoms, cfg.gamma
    if M < 3:
        return np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    hg = 0.5j * gamma
    ig = 1j * gamma
    t0 = 1.0 - 2.0 * beta
    p3 = -p1 - p2
    tp1 = _tp(p1, beta, gamma)
    tp2 = _tp(p2, beta, gamma)
    tp3 = _tp(p3, beta, gamma)

    if variant == "mid":
        w = p1 + p2 + ig
        pref = (
            1j * beta**6 * (p1 + p2 + ig) * gamma**4
            / (math.pi**2 * (p1 + hg) * (p2 + hg) * (p3 + hg))
        )
        pair_pow = tp1 * tp2     # exponent M-j-m-q-3
        solo_pow = tp3           # exponent M-j-m-2
    elif variant == "crossed":
        w = -p2 + ig
        pref = (
            -2j * beta**6 * (-p2 + ig) * gamma**4
            / (math.pi**2 * (p1 + hg) * (p2 + hg) * (p3 + hg))
        )
        pair_pow = tp1 * tp3
        solo_pow = tp2
    else:  # pragma: no cover
        raise ValueError(variant)

    winv = 1.0 / w
    wmax = 3 * (M + 2)
    w_pows = [np.ones_like(winv)]
    for _ in range(wmax):
        w_pows.append(w_pows[-1] * winv)

    def w_inner(m, q):
        # collect the (r, s, t) sums as a Laurent polynomial in w
        lmax = (M + 2) + (M + 2) + 3
        coeffs = np.zeros(lmax + 1, dtype=complex)  # coefficient of w^(-e)
        for r in range(m + q + 2):
            for t in range(q + 1):
                base = binom(r + t + 2, r + 1) * binom(m + q + 1, r) * binom(q, t)
                for s in range(m + 1):
                    if variant == "mid":
                        cb = (
                            base * binom(m, s)
                            * beta ** (r + s + t)
                            * gamma ** (r + t - 1.0)
                            * (-1.0) ** (s + 1)
                            * (1j) ** (-(r + t) % 4)
                        )
                        series = [
                            2.0 * x + y
                            for x, y in zip(
                                _f21_poly_coeffs(r, s + 1, t, gamma),
                                _f21_poly_coeffs(r, s + 2, t, gamma),
                            )
                        ]
                    else:
                        cb = (
                            base * binom(m, s)
                            * (-1j * beta * gamma) ** (r + s + t)
                            * (1j) ** (-s % 4)
                            * gamma ** (-s - 1.0)
                        )
                        series = [
                            x + 0.5 * y
                            for x, y in zip(
                                _f21_poly_coeffs(r, s + 1, t, gamma),
                                _f21_poly_coeffs(r, s + 2, t, gamma),
                            )
                        ]
                    for n, cn in enumerate(series):
                        coeffs[r + t + 3 - n] += cb * cn
        # Horner evaluation in 1/w
        acc = np.zeros_like(winv, dtype=complex)
        for e in range(len(coeffs) - 1, 0, -1):
            acc = (acc + coeffs[e]) * winv
        return acc + coeffs[0]

    rho0 = t0**3 / (tp1 * tp2 * tp3)
    geo = _geom_cumulative(rho0, M - 3)
    total = np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    for m in range(M - 2):
        for q in range(M - 2 - m):
            if M - 3 - m - q < 0:
                continue
            total = total + (
                w_inner(m, q)
                * t0 ** (m + 1)
                * pair_pow ** (M - m - q - 3)
                * solo_pow ** (M - m - 2)
                * geo[M - 3 - m - q]
            )
    return pref * total


def _loop_4(p1, p2, cfg: DiagramConfig):
    """Pair vertex on the lower lines, then two pair vertices on the top pair.

    The internal pair between the last two vertices carries (-l, l+p1+p2),
    fixed by momentum conservation at each vertex; the loop integral is the
    shifted pole pair
        int dl [(-l+ig/2)^(r+2) (l+p1+p2+ig/2)^(s+2)]^(-1)
          = -2*pi*i * C(r+s+2, s+1) * (p1+p2+ig)^(-r-s-3).
    """
    beta, M, gamma = cfg.beta, cfg.atoms, cfg.gamma
    if M < 3:
        return np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    hg = 0.5j * gamma
    ig = 1j * gamma
    t0 = 1.0 - 2.0 * beta
    p3 = -p1 - p2
    tp1 = _tp(p1, beta, gamma)
    tp2 = _tp(p2, beta, gamma)
    tp3 = _tp(p3, beta, gamma)
    tsum = _tp(p1 + p2, beta, gamma)
    w = p1 + p2 + ig

    pref = (
        1j * beta**6 * gamma**4 / math.pi**3
        * w**2
        / ((p1 + p2 + hg) ** 2 * (p3 + hg) * (p1 + hg) * (p2 + hg))
    )

    winv = 1.0 / w
    w3 = winv**3

    def w_inner(q):
        acc = np.zeros_like(winv, dtype=complex)
        wp = w3.copy()
        # collect over n = r+s: coefficient sum_{r+s=n} C(q,r)C(q,s)C(n+2, s+1)
        for n in range(2 * q + 1):
            cn = 0.0
            for r in range(max(0, n - q), min(q, n) + 1):
                s = n - r
                cn += binom(q, r) * binom(q, s) * binom(n + 2, s + 1)
            acc += cn * (-1j * beta * gamma) ** n * (-2j * math.pi) * wp
            wp = wp * winv
        return acc

    rho0 = t0**3 / (tp1 * tp2 * tp3)
    geo = _geom_cumulative(rho0, M - 3)
    total = np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    for m in range(M - 2):
        for q in range(M - 2 - m):
            if M - 3 - m - q < 0:
                continue
            total = total + (
                w_inner(q)
                * t0 ** (m + 1)
                * tsum**m
                * (tp1 * tp2) ** (M - m - q - 3)
                * tp3 ** (M - 1)
                * geo[M - 3 - m - q]
            )
    return pref * total


def _loop_5(p1, p2, cfg: DiagramConfig):
    """Two pair vertices on the top pair, then a pair vertex on the lower lines."""
    beta, M, gamma = cfg.beta, cfg.atoms, cfg.gamma
    if M < 3:
        return np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    hg = 0.5j * gamma
    ig = 1j * gamma
    t0 = 1.0 - 2.0 * beta
    p3 = -p1 - p2
    tp1 = _tp(p1, beta, gamma)
    tp2 = _tp(p2, beta, gamma)
    tp3 = _tp(p3, beta, gamma)
    tm1 = _tp(-p1, beta, gamma)

    pref = (
        2.0 * beta**6 * (p1 - ig) * gamma**2
        / (math.pi**2 * (p1 + hg) * (p3 + hg) * (p2 + hg))
        / (-p1 + hg) ** 2
    )

    def d_inner(m):
        acc = 0.0 + 0.0j
        for r in range(m + 1):
            for s in range(m + 1):
                acc += (
                    binom(m, r) * binom(m, s)
                    * (-beta) ** (r + s)
                    * math.factorial(r + s + 2)
                    / (math.factorial(r + 1) * math.factorial(s + 1))
                )
        return acc

    rho0 = t0**3 / (tp1 * tp2 * tp3)
    geo = _geom_cumulative(rho0, M - 3)
    total = np.zeros(np.broadcast(p1, p2).shape, dtype=complex)
    for m in range(M - 2):
        for q in range(M - 2 - m):
            if M - 3 - m - q < 0:
                continue
            total = total + (
                d_inner(m)
                * t0 ** (m + q + 2)
                * tm1**q
                * tp1 ** (M - m - 2)
                * (tp2 * tp3) ** (M - m - q - 3)
                * geo[M - 3 - m - q]
            )
    return pref * total


def loop_diagram(which: int, p1, p2, cfg: DiagramConfig):
    """Unsymmetrised closed form of loop diagram 1..6.

    1: triple vertex, then pair vertex on the two non-leading lines
    2: pair vertex creating an internal zero-sum pair, then the triple vertex
    3: pair(1,2), pair(2,3), pair(1,2) chain
    4: pair(2,3) first, then two pair(1,2) vertices
    5: two pair(1,2) vertices, then pair(2,3)
    6: pair(1,2), pair(2,3), crossed pair(1,3)
    """
    p1 = np.asarray(p1, dtype=complex)
    p2 = np.asarray(p2, dtype=complex)
    if which == 1:
        return _loop_1(p1, p2, cfg)
    if which == 2:
        return _loop_2(p1, p2, cfg)
    if which == 3:
        return _loop_chain_three(p1, p2, cfg, "mid")
    if which == 4:
        return _loop_4(p1, p2, cfg)
    if which == 5:
        return _loop_5(p1, p2, cfg)
    if which == 6:
        return _loop_chain_three(p1, p2, cfg, "crossed")
    raise ValueError(f"unknown loop diagram {which}")


def loop_sum(p1, p2, cfg: DiagramConfig):
    """All loop diagrams, symmetrised over the outgoing momenta.

    Diagram 2 is fully symmetric already and enters once, like the triple
    vertex at tree level; the other diagrams are summed over all six
    relabelings of (p1, p2, p3).  Each of those diagrams is invariant under
    one pair exchange, so three evaluations counted twice cover the six.
    """
    p1 = np.asarray(p1, dtype=complex)
    p2 = np.asarray(p2, dtype=complex)
    p3 = -p1 - p2
    calls = {
        1: [(p1, p2), (p2, p1), (p3, p1)],
        3: [(p1, p2), (p1, p3), (p2, p3)],
        4: [(p1, p2), (p1, p3), (p2, p3)],
        5: [(p1, p2), (p2, p1), (p3, p1)],
        6: [(p1, p2), (p2, p1), (p1, p3)],
    }
    total = loop_diagram(2, p1, p2, cfg)
    for which, args in calls.items():
        for a, b in args:
            total = total + 2.0 * loop_diagram(which, a, b, cfg)
    return total


def phi3_momentum(p1, p2, cfg: DiagramConfig):
    """Connected three-photon momentum amplitude at the configured order."""
    out = t3v(p1, p2, cfg) + t4v(p1, p2, cfg)
    if cfg.include_loops:
        out = out + loop_sum(p1, p2, cfg)
    return out


# ---------------------------------------------------------------------------
# exact tree-level position space
# ---------------------------------------------------------------------------


def tree_s_max(atoms: int, gamma: float = 1.0) -> float:
    """Convolution window covering the spatial extent of the tree kernels."""
    return (30.0 + 2.5 * atoms) / gamma


def _slot_line_cases():
    """Line assignment of the two vertex pole factors per permutation term.

    Lines are labelled 'f' (momentum p1), 'g' (p2), 'h' (p3); each entry maps
    line -> +1 for a (p + i*gamma/2)^(-1) factor or -1 for
    (-p + i*gamma/2)^(-1), expressed in that line's own momentum (for the h
    line the kernel variable is w = p1 + p2 = -p3 and the factor is composed
    with the negation).
    """
    return [
        {"f": +1, "h": -1},
        {"f": +1, "g": -1},
        {"g": +1, "h": -1},
        {"g": +1, "f": -1},
        {"g": -1, "h": +1},
        {"f": -1, "h": +1},
    ]


class TreePositionField:
    """Exact position-space tree-level amplitude phi3(u, v).

    Coordinates are the relative positions u = x1 - x3, v = x2 - x3.  Every
    tree term factorises across the momentum lines (p1, p2, p1+p2), so the
    field is assembled from one-dimensional contour kernels and evaluated by
    the kink-split convolution in `position`; no momentum grid enters, and
    the result is exact to quadrature roundoff.
    """

    def __init__(self, params: PhysParams, basis: ContourBasis | None = None,
                 seg_len: float = 2.5, gl_order: int = 12):
        self.params = params
        self.gamma = params.gamma_tot
        self.basis = basis if basis is not None else ContourBasis(self.gamma)
        self.seg_len = seg_len
        self.gl_order = gl_order
        self.s_max = tree_s_max(params.num_atoms, self.gamma)
        self.terms = self._build_terms()

    # -- kernel factories ---------------------------------------------------

    def _kernel(self, func, delta_coeff=0.0) -> StandardKernel:
        return StandardKernel.from_func(self.basis, func, delta_coeff)

    def _line_func(self, n: int, slot: int | None, negated: bool):
        """t(x)^n times an optional vertex pole, on a possibly negated line."""
        beta, gamma = self.params.beta, self.gamma
        hg = 0.5j * gamma

        def f(x):
            arg = -x if negated else x
            val = transmission(arg, beta, gamma) ** n
            if slot == +1:
                val = val / (arg + hg)
            elif slot == -1:
                val = val / (-arg + hg)
            return val

        return f

    def _build_terms(self) -> list[TripleTerm]:
        params = self.params
        beta, M, gamma = params.beta, params.num_atoms, params.gamma_tot
        t0 = params.t0
        hg = 0.5j * gamma
        ig = 1j * gamma
        terms: list[TripleTerm] = []

        # triple-vertex terms: slot poles distributed per permutation case
        kern_cache: dict[tuple, StandardKernel] = {}

        def line_kernel(line: str, n: int, slot: int | None) -> StandardKernel:
            key = (line, n, slot)
            if key not in kern_cache:
                negated = line == "h"  # h carries t(p3)^n = t(-w)^n
                func = self._line_func(n, slot, negated)
                delta = 1.0 if slot is None else 0.0
                kern_cache[key] = self._kernel(func, delta)
            return kern_cache[key]

        # normalisation of the triple vertex matches `s3c_coefficient`
        for j in range(M):
            n = M - 1 - j
            coeff = beta**3 * t0 ** (3 * j) * (4.0 / math.pi**2)
            for case in _slot_line_cases():
                fk = line_kernel("f", n, case.get("f"))
                gk = line_kernel("g", n, case.get("g"))
                hk = line_kernel("h", n, case.get("h"))
                terms.append(TripleTerm(coeff, fk, gk, hk))

        # double pair-vertex terms: role photon a leaves the first vertex
        if M >= 2:
            tfun = lambda x: transmission(x, beta, gamma)  # noqa: E731

            def role1_func(e1: int, m: int, negated: bool):
                def f(x):
                    arg = -x if negated else x
                    return (
                        tfun(arg) ** e1
                        * tfun(-arg) ** m
                        * (-arg + ig)
                        / ((-arg + hg) ** 2 * (arg + hg))
                    )

                return f

            def role23_func(e2: int, negated: bool):
                def f(x):
                    arg = -x if negated else x
                    return tfun(arg) ** e2 / (arg + hg)

                return f

            coeff4 = 2.0 * beta**4 * gamma**2 / math.pi**2
            for a_line in ("f", "g", "h"):
                other = [ln for ln in ("f", "g", "h") if ln != a_line]
                # combined role-1 kernels per exponent of the post-vertex pair
                combos: dict[int, StandardKernel] = {}
                for e2 in range(M - 1):
                    kers, wts = [], []
                    for j in range(M - 1 - e2):
                        m = M - j - 2 - e2
                        e1 = M - j - 1
                        kers.append(
                            self._kernel(role1_func(e1, m, a_line == "h"))
                        )
                        wts.append(t0 ** (3 * j + m + 1))
                    combos[e2] = StandardKernel.combination(kers, wts)
                for e2 in range(M - 1):
                    k23 = {
                        ln: self._kernel(role23_func(e2, ln == "h"))
                        for ln in other
                    }
                    km = {a_line: combos[e2], **k23}
                    # factor 2: the two assignments of roles 2, 3 to the
                    # remaining lines are identical by the pair symmetry
                    terms.append(
                        TripleTerm(2.0 * coeff4, km["f"], km["g"], km["h"])
                    )
        return terms

    def evaluate(self, u, v) -> np.ndarray:
        """Tree-level phi3 at relative positions (u, v); real-valued.

        The field is continuous, but the raw kernel convolution assigns
        symmetric principal values at kinks, which disagree with the limit
        only at the triple-coincidence point u = v = 0; that point is
        evaluated by Richardson extrapolation along a fixed direction.
        """
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        shape = np.broadcast(u, v).shape
        uu = np.broadcast_to(u, shape).reshape(-1).copy()
        vv = np.broadcast_to(v, shape).reshape(-1).copy()
        coincident = (np.abs(uu) < 1e-12) & (np.abs(vv) < 1e-12)
        uu2, vv2 = uu[~coincident], vv[~coincident]
        out = np.empty(uu.shape, dtype=float)
        if uu2.size:
            val = triple_convolution(
                self.terms, uu2, vv2, self.s_max, self.seg_len, self.gl_order
            )
            scale = np.max(np.abs(val))
            if scale > 0 and np.max(np.abs(val.imag)) > 1e-8 * max(scale, 1e-300):
                raise FloatingPointError("tree-level position amplitude not real")
            out[~coincident] = val.real
        if coincident.any():
            out[coincident] = self._origin_value()
        out = out.reshape(shape)
        return out if out.shape else float(out)

    def _origin_value(self) -> float:
        """Limit of the field at the triple coincidence point.

        Cubic Richardson in the probe distance removes the linear and
        quadratic approach terms of the continuous field.
        """
        eps = 1.5e-3 / self.gamma
        du, dv = 1.0, 0.61803398875
        probes = np.array([eps, 2 * eps, 4 * eps])
        vals = triple_convolution(
            self.terms, probes * du, probes * dv, self.s_max, self.seg_len,
            self.gl_order,
        ).real
        return float((8.0 * vals[0] - 6.0 * vals[1] + vals[2]) / 3.0)
