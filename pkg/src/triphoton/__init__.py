"""Few-photon transport through a chirally coupled atom chain.

Connected S-matrix coefficients, the exact two-photon scattering recursion,
the perturbative three-photon diagram series, non-Gaussianity observables,
and a cascaded master-equation / quantum-regression verifier.
"""

from .params import PhysParams

__all__ = ["PhysParams"]
__version__ = "0.1.0"
