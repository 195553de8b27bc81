from pathlib import Path

import numpy as np
import pytest

from ksefix.spectral import GridSpec, read_spectral
from ksefix.store import verify

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def equilibrium():
    """A stored nontrivial equilibrium, re-verified against the flow map."""
    spec, grid = read_spectral(DATA / "equilibrium.kse2")
    assert grid == GridSpec()
    residual = verify(spec, grid)
    assert residual < 1e-10, f"stored equilibrium fails verification: {residual}"
    return spec
