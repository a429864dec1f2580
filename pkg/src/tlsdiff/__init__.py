"""Two-level-defect spectral diffusion toolkit.

Synthesizes spectrally and temporally resolved qubit T1 datasets from a
sum-of-Lorentzians relaxation model, simulates the frequency wandering of
defects coupled to a bath of thermal two-state fluctuators, and recovers
defect parameters (couplings, decoherence rates, jump rates, diffusivity)
from real or synthetic data.
"""

__version__ = "0.1.0"

from tlsdiff import analysis, diffusion, physics, spectra

__all__ = ["analysis", "diffusion", "physics", "spectra", "__version__"]
