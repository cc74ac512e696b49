"""Adam with bias correction; moment state lives on the Network."""

from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError
from .network import Network

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


def adam_step(net: Network, gradients: dict[str, np.ndarray], learning_rate: float) -> Network:
    """One in-place update of every parameter; the step counter advances once.

    m and v start at zero on first use, and the update applies the standard
    1/(1 - beta^t) bias correction, so a fresh optimizer still takes
    full-size first steps.
    """
    if learning_rate <= 0:
        raise ValueError(f"learning_rate must be > 0, got {learning_rate}")
    params = net.parameters()
    unknown = set(gradients) - set(params)
    if unknown:
        raise ValueError(f"gradients for unknown parameters: {sorted(unknown)}")
    missing = set(params) - set(gradients)
    if missing:
        raise ValueError(f"gradients missing for parameters: {sorted(missing)}")

    net.adam_t += 1
    t = net.adam_t
    correction1 = 1.0 - BETA1 ** t
    correction2 = 1.0 - BETA2 ** t
    for name, param in params.items():
        grad = gradients[name]
        if not np.all(np.isfinite(grad)):
            raise ConvergenceError(f"non-finite gradient for parameter {name!r}")
        if name not in net.adam_m:
            net.adam_m[name] = np.zeros_like(param)
            net.adam_v[name] = np.zeros_like(param)
        m = net.adam_m[name]
        v = net.adam_v[name]
        m *= BETA1
        m += (1.0 - BETA1) * grad
        v *= BETA2
        v += (1.0 - BETA2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        param -= learning_rate * m_hat / (np.sqrt(v_hat) + EPS)
    return net
