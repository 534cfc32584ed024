import numpy as np
import pytest

from symotflow import Tensor, backward


def central_diff(f, arr: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a flat array."""
    grad = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def combined_grad_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Relative error, switching to absolute where the gradient is tiny."""
    worst = 0.0
    for g, fd in zip(analytic.reshape(-1), numeric.reshape(-1)):
        scale = max(abs(g), abs(fd))
        if scale > 1e-3:
            worst = max(worst, abs(g - fd) / scale)
        else:
            # abs tolerance 1e-7 maps onto the shared 1e-4 threshold
            worst = max(worst, abs(g - fd) * 1e3)
    return worst


def check_gradient(build, arrs, h=1e-5, tol=1e-4):
    """Compare backward() of build(tensors) against finite differences.

    build receives one Tensor per input array and must return a scalar
    Tensor on a fresh tape each call.
    """
    tensors = [Tensor(a, requires_grad=True) for a in arrs]
    root = build(*tensors)
    backward(root)

    for t, a in zip(tensors, arrs):
        def value():
            fresh = [Tensor(x) for x in arrs]
            return build(*fresh).item()

        fd = central_diff(value, a, h=h)
        err = combined_grad_error(t.grad, fd)
        assert err < tol, f"gradient mismatch: {err}"


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
