"""Small dense linear-algebra kernels shared by the training modules."""

import numpy as np


def cosine_similarity(u, v):
    """Cosine of the angle between two nonzero vectors, in [-1, 1]."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("undefined cosine: zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def unit_rows(x):
    """Rows scaled to unit norm; returns (unit, norms). Raises naming the first zero row."""
    x = np.asarray(x)
    norms = np.linalg.norm(x, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"undefined cosine: row {zero[0]} has zero norm")
    return x / norms[:, None], norms


def ridge_solve(a, u, alpha):
    """Closed-form ridge solution z = (AᵀA + αI)⁻¹ AᵀU.

    a: [n, p], u: [n, q], alpha > 0. Solved in float64 regardless of input
    dtype (the result is cast back), so the normal-equation residual stays
    below 1e-8 on well-scaled systems.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    a = np.asarray(a)
    u = np.asarray(u)
    if not (np.isfinite(a).all() and np.isfinite(u).all()):
        raise ValueError("non-finite inputs to ridge_solve")
    a64 = a.astype(np.float64, copy=False)
    u64 = u.astype(np.float64, copy=False)
    gram = a64.T @ a64 + alpha * np.eye(a.shape[1])
    z = np.linalg.solve(gram, a64.T @ u64)
    return z.astype(np.result_type(a.dtype, u.dtype), copy=False)


def ridge_solve_backward(a, u, alpha, z, grad_z):
    """Gradient of <grad_z, ridge_solve(A, U, alpha)> wrt A.

    With S = AᵀA + αI and W = S⁻¹ grad_z, differentiating through the
    inverse (dX⁻¹ = -X⁻¹ dX X⁻¹) gives

        grad_A = (U - A z) Wᵀ - A W zᵀ.
    """
    a64 = np.asarray(a, dtype=np.float64)
    u64 = np.asarray(u, dtype=np.float64)
    z64 = np.asarray(z, dtype=np.float64)
    g64 = np.asarray(grad_z, dtype=np.float64)
    if g64.shape != z64.shape:
        raise ValueError(f"grad_z shape {g64.shape} does not match solution {z64.shape}")
    if a64.shape[0] != u64.shape[0] or z64.shape != (a64.shape[1], u64.shape[1]):
        raise ValueError("inconsistent shapes for ridge backward")
    gram = a64.T @ a64 + alpha * np.eye(a64.shape[1])
    w = np.linalg.solve(gram, g64)
    grad_a = (u64 - a64 @ z64) @ w.T - a64 @ (w @ z64.T)
    return grad_a.astype(np.asarray(a).dtype, copy=False)


def pca_two(x):
    """Project rows of x onto their top-2 principal components.

    Mean-centered covariance eigendecomposition; components ordered by
    eigenvalue descending; each component's sign is fixed so its
    largest-magnitude entry is positive. Returns (coords [n, 2],
    components [2, d], eigenvalues [2]).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 3 or x.shape[1] < 2:
        raise ValueError(f"need at least 3 rows and 2 columns for a 2-D projection, got {x.shape}")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (x.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:2]
    comps = eigvecs[:, order].T
    for i in range(2):
        j = np.argmax(np.abs(comps[i]))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    coords = centered @ comps.T
    return coords, comps, eigvals[order]
