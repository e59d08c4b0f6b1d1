"""Exact two-photon transport through the chain via the coefficient recursion.

The outgoing two-photon wavefunction after d atoms, driven on resonance,
separates into an individual-transmission part t0^(2d) delta(k1) delta(k2)
and a connected part living on the zero-total-momentum shell,

    delta(k1+k2) * sum_{j,l=1}^{d} C_jl gamma^(j+l-1)
                   (k1 + i*gamma/2)^(-j) (k2 + i*gamma/2)^(-l).

A single scattering step maps the coefficient matrix C to the next atom's
matrix in closed form; photon loss at the next atom produces an analogous
degree-(d+1) matrix for the amplitude with one photon in that atom's loss
channel.  Position-space evaluation goes through the analytic contour
transform in `position` (exact polynomial-times-exponential structure), not
through a grid FFT, so the two-photon path carries no grid error into the
correlation observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .position import ContourBasis, StandardKernel, kernel_eval
from .special import f_integral, transmission, reflection

__all__ = [
    "CoeffMatrix",
    "LossCoeffMatrix",
    "initial_coeffs",
    "step",
    "propagate",
    "loss_step",
    "phi2_momentum",
    "phi2_kernel",
    "phi2_position",
    "psi2",
]


@dataclass(frozen=True)
class CoeffMatrix:
    """Connected-part coefficients C[j-1, l-1] = C_{j,l} after ``atoms`` atoms."""

    beta: float
    atoms: int
    c: np.ndarray
    t0_power: float  # t0^(2*atoms), weight of the double-delta term
    gamma: float = 1.0

    def __post_init__(self):
        d = self.atoms
        if self.c.shape != (d, d):
            raise ValueError("coefficient matrix shape must be (atoms, atoms)")


@dataclass(frozen=True)
class LossCoeffMatrix:
    """Coefficients of the amplitude with one photon lost at atom ``atoms``.

    The matrix has degree atoms = d+1; ``delta_weight`` multiplies the
    delta(k1) delta(k2) term (r0 * t0^(2d+1)).  The lost photon is the first
    argument, so the matrix is not j <-> l symmetric.
    """

    beta: float
    atoms: int
    c: np.ndarray
    delta_weight: float
    gamma: float = 1.0


def initial_coeffs(beta: float, gamma: float = 1.0) -> CoeffMatrix:
    """Connected coefficients after a single atom: C_{1,1} = 2 beta^2 / pi."""
    t0 = 1.0 - 2.0 * beta
    c = np.array([[2.0 * beta**2 / math.pi]], dtype=complex)
    return CoeffMatrix(beta, 1, c, t0**2, gamma)


def _f_table(d: int) -> np.ndarray:
    """F(j+1, l+1) for 1 <= j, l <= d."""
    out = np.empty((d, d), dtype=complex)
    for j in range(1, d + 1):
        for l in range(1, d + 1):
            out[j - 1, l - 1] = f_integral(j + 1, l + 1)
    return out


def step(cm: CoeffMatrix) -> CoeffMatrix:
    """One more atom: apply the closed-form update to the coefficient matrix."""
    beta, d, gamma = cm.beta, cm.atoms, cm.gamma
    t0 = 1.0 - 2.0 * beta
    old = cm.c
    new = np.zeros((d + 1, d + 1), dtype=complex)

    # degree-preserving and degree-raising parts, valid for j + l >= 3
    new[:d, :d] += old
    new[1:, :d] += -1j * beta * old
    new[:d, 1:] += -1j * beta * old
    new[1:, 1:] += -(beta**2) * old

    fsum = np.sum(old * _f_table(d))
    new[0, 0] = old[0, 0] + cm.t0_power * (2.0 * beta**2 / math.pi) - beta**2 / (
        2.0 * math.pi
    ) * fsum
    return CoeffMatrix(beta, d + 1, new, cm.t0_power * t0**2, gamma)


def propagate(beta: float, atoms: int, gamma: float = 1.0) -> CoeffMatrix:
    """Coefficient matrix after ``atoms`` atoms (initial state, then steps)."""
    if atoms < 1:
        raise ValueError("atoms must be >= 1")
    cm = initial_coeffs(beta, gamma)
    for _ in range(atoms - 1):
        cm = step(cm)
    return cm


def loss_step(cm: CoeffMatrix) -> LossCoeffMatrix:
    """Amplitude with one photon lost at atom d+1, from the d-atom matrix."""
    beta, d, gamma = cm.beta, cm.atoms, cm.gamma
    t0 = 1.0 - 2.0 * beta
    r0 = -2.0 * math.sqrt(beta * (1.0 - beta))
    root = math.sqrt(beta * (1.0 - beta))
    old = cm.c
    new = np.zeros((d + 1, d + 1), dtype=complex)

    # first-row / first-column structure from the connected kernel
    fsum = np.sum(old * _f_table(d))
    new[0, 0] = (beta**1.5 * math.sqrt(1.0 - beta) / (2.0 * math.pi)) * (
        4.0 * cm.t0_power - fsum
    )
    # lost photon in the first slot: shifted coefficients, no symmetrisation
    new[1:, :d] += -1j * root * old
    new[1:, 1:] += -1j * root * (-1j * beta) * old
    delta_weight = r0 * cm.t0_power * t0
    return LossCoeffMatrix(beta, d + 1, new, delta_weight, gamma)


def phi2_momentum(k_rel, cm: CoeffMatrix):
    """Connected amplitude on the zero-total-momentum shell at k1 = -k2 = k."""
    k = np.asarray(k_rel, dtype=complex)
    d, gamma = cm.atoms, cm.gamma
    hg = 0.5j * gamma
    a = 1.0 / (k + hg)
    b = 1.0 / (-k + hg)
    pa = np.array([a ** (j + 1) for j in range(d)])
    pb = np.array([b ** (l + 1) for l in range(d)])
    scale = np.array([[gamma ** (j + l + 1) for l in range(d)] for j in range(d)])
    out = np.einsum("jl,j...,l...->...", cm.c * scale, pa, pb)
    return out if np.asarray(out).shape else complex(out)


def phi2_kernel(cm: CoeffMatrix, basis: ContourBasis | None = None) -> StandardKernel:
    """Contour kernel of the connected shell amplitude (for position space)."""
    if basis is None:
        basis = ContourBasis(cm.gamma)
    return StandardKernel.from_func(basis, lambda k: phi2_momentum(k, cm))


def phi2_position(x_rel, cm: CoeffMatrix, kernel: StandardKernel | None = None):
    """Connected two-photon amplitude at separation x1 - x2 (real output).

    phi2 is even in the separation and real; the imaginary contour residue is
    checked to stay below 1e-10 relative.
    """
    if kernel is None:
        kernel = phi2_kernel(cm)
    val = kernel_eval(kernel, x_rel)
    scale = np.max(np.abs(val)) if np.asarray(val).size else 1.0
    if scale > 0 and np.max(np.abs(val.imag)) > 1e-10 * max(scale, 1e-300):
        raise FloatingPointError("two-photon position amplitude has imaginary residue")
    out = val.real
    return out if np.asarray(out).shape else float(out)


def psi2(x1, x2, cm: CoeffMatrix, kernel: StandardKernel | None = None):
    """Full two-photon amplitude t0^(2d) + phi2(x1 - x2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    out = cm.t0_power + phi2_position(x1 - x2, cm, kernel)
    return out if np.asarray(out).shape else float(out)


def one_loss_amplitude_momentum(k1, k2_is_minus_k1: bool, lm: LossCoeffMatrix):
    """Shell evaluation of the one-loss amplitude (lost momentum first)."""
    if not k2_is_minus_k1:
        raise ValueError("amplitude defined on the zero-total-momentum shell")
    k = np.asarray(k1, dtype=complex)
    d, gamma = lm.atoms, lm.gamma
    hg = 0.5j * gamma
    a = 1.0 / (k + hg)
    b = 1.0 / (-k + hg)
    pa = np.array([a ** (j + 1) for j in range(d)])
    pb = np.array([b ** (l + 1) for l in range(d)])
    scale = np.array([[gamma ** (j + l + 1) for l in range(d)] for j in range(d)])
    out = np.einsum("jl,j...,l...->...", lm.c * scale, pa, pb)
    return out if np.asarray(out).shape else complex(out)


def transmission_reflection_identity(beta: float, atoms: int, gamma: float = 1.0) -> float:
    """t0^(2M) + sum_l r0^2 t0^(2l): photon bookkeeping sum, equals 1."""
    t0 = abs(transmission(0.0, beta, gamma))
    r0 = abs(reflection(0.0, beta, gamma))
    total = t0 ** (2 * atoms)
    for l in range(atoms):
        total += r0**2 * t0 ** (2 * l)
    return total
