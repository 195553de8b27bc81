"""ksefix: fixed points of the 2D Kuramoto-Sivashinsky equation.

Pseudospectral ETDRK4 integration, a hookstep Newton-Krylov solver, and a
DDPG agent whose reward steers trajectories toward low-residual states that
make good Newton initial guesses.
"""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
