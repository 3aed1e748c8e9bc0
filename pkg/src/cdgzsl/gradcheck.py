"""Central finite-difference gradient checking.

Every analytic gradient in the package (classification losses, the
similarity and meta-generation losses, the critic penalty) is validated
against this harness in float64 with h = 1e-5.
"""

from dataclasses import dataclass

import numpy as np


def finite_difference(f, params, h=1e-5):
    """Central-difference gradient of the scalar callable f wrt each array.

    Perturbs entries of `params` in place (restoring them), calling f()
    after each perturbation; arrays should be float64 for meaningful output.
    """
    grads = []
    for p in params:
        g = np.zeros(p.shape, dtype=np.float64)
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            f_plus = f()
            flat_p[i] = orig - h
            f_minus = f()
            flat_p[i] = orig
            flat_g[i] = (f_plus - f_minus) / (2.0 * h)
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric, floor=1e-4):
    """max over entries of |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / denom).max()) if a.size else 0.0


@dataclass
class GradCheckReport:
    per_param: list        # max relative error per parameter array
    tolerance: float
    passed: bool

    @property
    def worst(self):
        return max(self.per_param) if self.per_param else 0.0


def check_gradients(f, params, analytic_grads, h=1e-5, tolerance=1e-4, floor=1e-4):
    """Compare analytic grads of scalar f() against central differences."""
    numeric = finite_difference(f, params, h=h)
    errors = [max_relative_error(a, n, floor=floor) for a, n in zip(analytic_grads, numeric)]
    return GradCheckReport(per_param=errors, tolerance=tolerance, passed=max(errors) < tolerance)
