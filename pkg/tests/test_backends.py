"""The Cython kernels and the numpy fallback must agree to rounding."""

import numpy as np
import pytest

import ksefix.dynamics as dynamics
from ksefix import _kernels_py
from ksefix._backend import BACKEND, kernels
from ksefix.dynamics import SimState, cached_tables, flow_map
from ksefix.spectral import GridSpec, dft2

GRID = GridSpec()
N = GRID.n
H = N // 2 + 1


def random_half(rng):
    return rng.standard_normal((N, H)) + 1j * rng.standard_normal((N, H))


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    return {
        "v": random_half(rng),
        "n1": random_half(rng),
        "n2": random_half(rng),
        "n3": random_half(rng),
        "kx": rng.standard_normal((N, H)),
        "ky": rng.standard_normal((N, H)),
        "e": rng.standard_normal((N, H)),
        "e2": rng.standard_normal((N, H)),
        "q": rng.standard_normal((N, H)),
        "f1": rng.standard_normal((N, H)),
        "f2": rng.standard_normal((N, H)),
        "f3": rng.standard_normal((N, H)),
        "mask": (rng.random((N, H)) > 0.3).astype(np.float64),
        "px": rng.standard_normal((N, N)),
        "py": rng.standard_normal((N, N)),
    }


class TestKernelEquivalence:
    def test_grad_pair(self, data):
        gx1, gy1 = kernels.grad_pair(data["v"], data["kx"], data["ky"])
        gx2, gy2 = _kernels_py.grad_pair(data["v"], data["kx"], data["ky"])
        assert np.array_equal(gx1, gx2)
        assert np.array_equal(gy1, gy2)

    def test_neg_half_grad_sq(self, data):
        w1 = kernels.neg_half_grad_sq(data["px"], data["py"])
        w2 = _kernels_py.neg_half_grad_sq(data["px"], data["py"])
        assert np.array_equal(w1, w2)

    def test_mask_mean0(self, data):
        a = data["v"].copy()
        b = data["v"].copy()
        out1 = kernels.mask_mean0(a, data["mask"], data["n1"])
        out2 = _kernels_py.mask_mean0(b, data["mask"], data["n1"])
        assert np.array_equal(out1, out2)
        assert out1[0, 0] == 0.0

    def test_stages_and_combine(self, data):
        d = data
        assert np.array_equal(
            kernels.stage_ab(d["e2"], d["v"], d["q"], d["n1"]),
            _kernels_py.stage_ab(d["e2"], d["v"], d["q"], d["n1"]))
        assert np.array_equal(
            kernels.stage_c(d["e2"], d["v"], d["q"], d["n2"], d["n1"]),
            _kernels_py.stage_c(d["e2"], d["v"], d["q"], d["n2"], d["n1"]))
        assert np.array_equal(
            kernels.combine(d["e"], d["v"], d["f1"], d["n1"], d["f2"],
                            d["n2"], d["n3"], d["f3"], d["n1"]),
            _kernels_py.combine(d["e"], d["v"], d["f1"], d["n1"], d["f2"],
                                d["n2"], d["n3"], d["f3"], d["n1"]))


class TestFlowEquivalence:
    def test_flow_map_matches_python_backend(self, monkeypatch):
        rng = np.random.default_rng(1)
        state = SimState(spec=dft2(rng.uniform(0, 1, (N, N))), time=0.0)
        state.spec[0, 0] = 0.0
        tables = cached_tables(GRID, 0.05)
        fast = flow_map(state, 2.0, tables)

        monkeypatch.setattr(dynamics, "kernels", _kernels_py)
        slow = flow_map(state, 2.0, tables)
        # same operation order in both backends: bit-identical results
        assert np.array_equal(fast.spec, slow.spec)


def test_backend_selected():
    assert BACKEND in ("cython", "python")
