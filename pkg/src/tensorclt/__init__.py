"""Wishart tensors, Stein kernels from transport maps, and Gaussian distances.

Submodules
----------
symtensor   index sets and tensor-power Jacobians
measures    isotropic measure zoo with samplers and moment oracles
transport   Gaussian-to-target transport maps
stein       OU-semigroup Stein kernel estimators
wishart     Wishart tensor sampling, covariance models, whitening
metrics     W2 estimators and theorem bound calculators
expcli      command line front end
"""

from ._accel import backend

__version__ = "0.1.0"

__all__ = ["backend", "__version__"]
