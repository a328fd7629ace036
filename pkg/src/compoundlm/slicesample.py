"""Univariate slice sampling (stepping out + shrinkage).

Bounds are handled by the target: ``logf`` returns -inf outside the support,
which stops the step-out and rejects shrinkage proposals there.
"""
import math


def slice_sample(x0, logf, width, rng, max_steps=100, fx0=None):
    """One slice-sampling transition from ``x0``.  Returns (x1, logf(x1))."""
    if fx0 is None:
        fx0 = logf(x0)
    if not math.isfinite(fx0):
        raise ValueError(f"slice sampler started outside the support (x0={x0})")
    y = fx0 + math.log(1.0 - rng.random())  # log slice level; 1-U avoids log(0)
    left = x0 - width * rng.random()
    right = left + width
    j = int(max_steps * rng.random())
    k = max_steps - 1 - j
    while j > 0 and logf(left) > y:
        left -= width
        j -= 1
    while k > 0 and logf(right) > y:
        right += width
        k -= 1
    while True:
        x1 = left + rng.random() * (right - left)
        f1 = logf(x1)
        if f1 >= y:
            return x1, f1
        if x1 < x0:
            left = x1
        else:
            right = x1


def log_beta11(a):
    return 0.0 if 0.0 <= a < 1.0 else -math.inf


def log_gamma_shape_scale(b, shape=10.0, scale=0.1):
    """Unnormalised Gamma log density (shape/scale parameterisation)."""
    if b <= 0.0:
        return -math.inf
    return (shape - 1.0) * math.log(b) - b / scale
