"""Analytic position-space transforms of rational momentum amplitudes.

Fourier convention (fixed package-wide, validated against the two-photon
closed form): position amplitudes are recovered from delta-stripped momentum
coefficients by the bare transform

    f(x) = integral dp e^{ipx} F(p)        (no 1/2pi factor)

because the 1/(2pi)^n normalisation of momentum operators is already
absorbed into the coefficients.

All amplitudes handled here are rational in each momentum variable with
poles on the imaginary axis at +/- i*gamma/2.  For such F the transform is a
one-sided function: for x > 0 the contour closes around the upper pole, for
x < 0 around the lower one, and at x = 0 the symmetric principal value is
the mean of the two limits.  Rather than extracting residues of high-order
poles symbolically (numerically unstable for orders ~ M), each one-sided
value is computed as a trapezoidal contour integral on a small circle around
the pole; the trapezoid rule is geometrically convergent for analytic
integrands, so the result is exact to roundoff at any pole order.

Products F(p1) G(p2) H(p1+p2) transform to a single one-dimensional
convolution of the three position kernels,

    (FGH)(u, v) = (1/2pi) integral ds f(u-v+s) g(s) h(v-s),

which `triple_convolution` evaluates with piecewise Gauss-Legendre
quadrature split at the kernel kinks s = v-u, 0, v.  Bounded factors carry a
constant part at infinity whose transform is a delta; those terms reduce to
products of the remaining two kernels and are added separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ContourBasis",
    "StandardKernel",
    "kernel_eval",
    "TripleTerm",
    "triple_convolution",
]

_EVAL_CHUNK = 1 << 18


class ContourBasis:
    """Fixed contour node set around the poles at +/- i*gamma/2.

    All kernels sharing a basis are evaluated from the same node values, so
    the expensive phase factors exp(i * x * p_node) are built once per
    argument array and reused for every kernel.
    """

    def __init__(self, gamma: float = 1.0, radius: float | None = None, nodes: int = 48):
        self.gamma = gamma
        self.radius = gamma / 8.0 if radius is None else radius
        theta = 2.0 * math.pi * (np.arange(nodes) + 0.5) / nodes
        circle = self.radius * np.exp(1j * theta)
        self.upper_nodes = 0.5j * gamma + circle
        self.lower_nodes = -0.5j * gamma + circle
        self.quad = 1j * circle * (2.0 * math.pi / nodes)
        self.n = nodes

    def coefficients(self, func) -> tuple[np.ndarray, np.ndarray]:
        """Contour coefficients (upper, lower) of ``func`` on this basis."""
        cu = func(self.upper_nodes) * self.quad
        cl = func(self.lower_nodes) * self.quad
        return cu, cl


@dataclass
class StandardKernel:
    """Position kernel of one rational momentum factor on a shared basis.

    ``delta_coeff`` is the constant value of the factor at infinite momentum;
    its transform is ``delta_coeff * 2pi * delta(x)`` and is handled by the
    convolution assembler, while the contour coefficients automatically see
    only the decaying part (constants integrate to zero on closed contours).
    """

    basis: ContourBasis
    cu: np.ndarray
    cl: np.ndarray
    delta_coeff: complex = 0.0

    @classmethod
    def from_func(cls, basis: ContourBasis, func, delta_coeff: complex = 0.0):
        cu, cl = basis.coefficients(func)
        return cls(basis, cu, cl, delta_coeff)

    def scaled(self, c: complex) -> "StandardKernel":
        return StandardKernel(self.basis, self.cu * c, self.cl * c, self.delta_coeff * c)

    @classmethod
    def combination(cls, kernels, weights) -> "StandardKernel":
        """Linear combination of kernels on one basis (coefficient-level sum)."""
        basis = kernels[0].basis
        cu = sum(w * k.cu for w, k in zip(weights, kernels))
        cl = sum(w * k.cl for w, k in zip(weights, kernels))
        dc = sum(w * k.delta_coeff for w, k in zip(weights, kernels))
        return cls(basis, cu, cl, dc)


def kernel_eval(kernel: StandardKernel, x) -> np.ndarray:
    """Evaluate the smooth (non-delta) part of a kernel at positions ``x``."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    basis = kernel.basis
    for lo in range(0, flat.size, _EVAL_CHUNK):
        xs = flat[lo : lo + _EVAL_CHUNK]
        pos = xs >= 0.0
        neg = xs <= 0.0
        res = np.zeros(xs.shape, dtype=complex)
        if pos.any():
            e = np.exp(1j * np.multiply.outer(xs[pos], basis.upper_nodes))
            res[pos] += e @ kernel.cu
        if neg.any():
            e = np.exp(1j * np.multiply.outer(xs[neg], basis.lower_nodes))
            res[neg] -= e @ kernel.cl
        both = pos & neg  # x == 0: mean of the one-sided limits
        if both.any():
            res[both] *= 0.5
        out[lo : lo + _EVAL_CHUNK] = res
    return out.reshape(x.shape)


@dataclass
class TripleTerm:
    """One product term F(p1) G(p2) H(p1+p2) with a scalar prefactor."""

    coeff: complex
    f: StandardKernel
    g: StandardKernel
    h: StandardKernel


def _segment_nodes(edges: np.ndarray, gl_x: np.ndarray, gl_w: np.ndarray):
    """Gauss-Legendre nodes/weights for consecutive-edge segments.

    ``edges`` has shape (npts, ne); returns arrays of shape
    (npts, (ne-1)*order).  Zero-length segments get zero weights.
    """
    a = edges[:, :-1]
    b = edges[:, 1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    s = mid[:, :, None] + half[:, :, None] * gl_x[None, None, :]
    w = half[:, :, None] * gl_w[None, None, :]
    n = edges.shape[0]
    return s.reshape(n, -1), w.reshape(n, -1)


def _line_kernel_values(arr: np.ndarray, kernels: list[StandardKernel]) -> list[np.ndarray]:
    """Smooth-part values of several same-basis kernels at one argument array."""
    basis = kernels[0].basis
    pos = arr >= 0.0
    cu = np.stack([k.cu for k in kernels], axis=1)
    cl = np.stack([k.cl for k in kernels], axis=1)
    e = np.exp(1j * arr[..., None] * basis.upper_nodes)
    e[~pos] = 0.0
    vals = e @ cu
    e = np.exp(1j * arr[..., None] * basis.lower_nodes)
    e[pos] = 0.0
    vals -= e @ cl
    return [vals[..., i] for i in range(len(kernels))]


def triple_convolution(
    terms: list[TripleTerm],
    u,
    v,
    s_max: float,
    seg_len: float = 2.5,
    gl_order: int = 12,
    chunk_cols: int = 64,
) -> np.ndarray:
    """Sum of convolution terms evaluated at positions (u, v).

    Returns  sum_t coeff_t * [ (1/2pi) int ds f(u-v+s) g(s) h(v-s)
                               + delta reductions ].

    The s axis is split at the per-point kink locations (v-u, 0, v) plus a
    uniform global segmentation of [-s_max, s_max]; each segment is handled
    by Gauss-Legendre quadrature, whose interior nodes never touch a kink.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if u.shape != v.shape:
        raise ValueError("u and v must have matching shapes")
    npts = u.size
    tau = u - v

    nseg = max(4, int(math.ceil(2.0 * s_max / seg_len)))
    glob = np.linspace(-s_max, s_max, nseg + 1)
    kinks = np.stack(
        [
            np.clip(-tau, -s_max, s_max),
            np.zeros(npts),
            np.clip(v, -s_max, s_max),
        ],
        axis=1,
    )
    edges = np.sort(
        np.concatenate([np.broadcast_to(glob, (npts, glob.size)), kinks], axis=1),
        axis=1,
    )

    gl_x, gl_w = np.polynomial.legendre.leggauss(gl_order)
    s_nodes, s_w = _segment_nodes(edges, gl_x, gl_w)

    # unique kernels per argument line
    line_kernels: dict[str, list[StandardKernel]] = {"f": [], "g": [], "h": []}
    line_index: dict[str, dict[int, int]] = {"f": {}, "g": {}, "h": {}}
    for t in terms:
        for key, ker in (("f", t.f), ("g", t.g), ("h", t.h)):
            if id(ker) not in line_index[key]:
                line_index[key][id(ker)] = len(line_kernels[key])
                line_kernels[key].append(ker)

    total = np.zeros(npts, dtype=complex)
    ncols = s_nodes.shape[1]
    for lo in range(0, ncols, chunk_cols):
        sl = slice(lo, lo + chunk_cols)
        s_c = s_nodes[:, sl]
        w_c = s_w[:, sl]
        args = {"f": tau[:, None] + s_c, "g": s_c, "h": v[:, None] - s_c}
        vals = {
            key: _line_kernel_values(args[key], line_kernels[key])
            for key in ("f", "g", "h")
        }
        for t in terms:
            vf = vals["f"][line_index["f"][id(t.f)]]
            vg = vals["g"][line_index["g"][id(t.g)]]
            vh = vals["h"][line_index["h"][id(t.h)]]
            total += t.coeff * np.einsum("pn,pn,pn,pn->p", w_c, vf, vg, vh)
    total /= 2.0 * math.pi

    # delta reductions: a constant part of one factor removes the s integral
    for t in terms:
        ndelta = sum(1 for k in (t.f, t.g, t.h) if k.delta_coeff != 0.0)
        if ndelta == 0:
            continue
        if ndelta > 1:
            raise ValueError("at most one bounded factor per product term")
        if t.f.delta_coeff != 0.0:
            total += (t.coeff * t.f.delta_coeff) * kernel_eval(t.g, v - u) * kernel_eval(t.h, u)
        elif t.g.delta_coeff != 0.0:
            total += (t.coeff * t.g.delta_coeff) * kernel_eval(t.f, u - v) * kernel_eval(t.h, v)
        else:
            total += (t.coeff * t.h.delta_coeff) * kernel_eval(t.f, u) * kernel_eval(t.g, v)
    return total
