"""Physical parameters and unit conventions.

Natural units are used throughout the package: the total atomic decay rate
``gamma_tot`` sets the unit of rates and momenta, positions and times are
measured in ``1/gamma_tot``, and ``hbar = v_g = 1``.  Internally
``gamma_tot`` is always 1; it is kept as an explicit field only so that
formulas stay dimensionally readable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class PhysParams:
    """Parameters of the driven chiral atom chain.

    Attributes
    ----------
    beta:
        Fraction of the atomic decay going into the guided mode, in (0, 1].
    num_atoms:
        Number of atoms M in the chain, >= 1.
    p_in:
        Input photon flux in units of gamma_tot, >= 0.
    theta:
        Quadrature phase (radians) used by the cumulant observables.
    gamma_tot:
        Total decay rate; the internal unit, fixed to 1.
    """

    beta: float
    num_atoms: int
    p_in: float = 0.0
    theta: float = 0.0
    gamma_tot: float = field(default=1.0)

    def __post_init__(self) -> None:
        if not (0.0 < self.beta <= 1.0):
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if not (isinstance(self.num_atoms, int) and self.num_atoms >= 1):
            raise ValueError(f"num_atoms must be an integer >= 1, got {self.num_atoms}")
        if self.p_in < 0.0:
            raise ValueError(f"p_in must be >= 0, got {self.p_in}")
        if self.gamma_tot != 1.0:
            raise ValueError("gamma_tot is the internal unit and must be 1")
        if not all(math.isfinite(x) for x in (self.beta, self.p_in, self.theta)):
            raise ValueError("parameters must be finite")

    @property
    def optical_depth(self) -> float:
        """Optical depth of the chain, OD = 4 * beta * M."""
        return 4.0 * self.beta * self.num_atoms

    @property
    def p_sat(self) -> float:
        """Saturation flux of a single atom, gamma_tot / beta."""
        return self.gamma_tot / self.beta

    @property
    def t0(self) -> float:
        """On-resonance single-photon transmission amplitude, 1 - 2*beta."""
        return 1.0 - 2.0 * self.beta

    def metadata(self) -> dict:
        """Parameter record attached to every exported result."""
        return {
            "beta": self.beta,
            "num_atoms": self.num_atoms,
            "p_in": self.p_in,
            "theta": self.theta,
            "gamma_tot": self.gamma_tot,
            "optical_depth": self.optical_depth,
            # weak-drive validity window of all leading-order observables
            "drive_validity": "p_in/gamma_tot ~ O(beta)",
        }
