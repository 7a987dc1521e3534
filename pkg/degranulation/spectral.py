"""
GRANULA - Spectral Norm

||A||_2 = sqrt(lambda_max(A^T A)) by power iteration on the Gram matrix.
Only the leading eigenvalue is needed, so there is no deflation.
"""

import logging

import numpy as np

from core.errors import ConvergenceError, ParameterError
from core.seeding import get_rng

logger = logging.getLogger("granula.degranulation.spectral")

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1000
DEFAULT_SEED = 0


def spectral_norm(
    A: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int = DEFAULT_SEED,
    fallback: bool = False,
) -> float:
    """Largest singular value of a real matrix.

    Stops when the Rayleigh quotient changes by at most tol relative to its
    current value. After max_iter iterations raises ConvergenceError, or with
    fallback=True solves the Gram matrix with a dense symmetric eigensolver
    (nearly equal leading singular values stall the iteration).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if tol <= 0:
        raise ParameterError(f"spectral_norm tol must be > 0, got {tol}")
    if not np.all(np.isfinite(A)):
        raise ParameterError("spectral_norm needs a finite matrix")
    if A.size == 0 or not np.any(A):
        return 0.0

    gram = A.T @ A
    x = get_rng(seed).standard_normal(gram.shape[0])
    x /= np.linalg.norm(x)
    lam = float(x @ gram @ x)

    for _ in range(max_iter):
        y = gram @ x
        y_norm = np.linalg.norm(y)
        if y_norm == 0.0:
            # start vector in the null space of A; any other direction will do
            x = np.roll(x, 1) + 1.0
            x /= np.linalg.norm(x)
            continue
        x = y / y_norm
        lam_next = float(x @ gram @ x)
        if abs(lam_next - lam) <= tol * abs(lam_next):
            return float(np.sqrt(max(lam_next, 0.0)))
        lam = lam_next

    if fallback:
        logger.warning(f"[Spectral] power iteration stalled after {max_iter} iterations "
                       f"(last iterate {np.sqrt(max(lam, 0.0)):.12g}); using eigvalsh on the Gram matrix")
        return float(np.sqrt(max(np.linalg.eigvalsh(gram)[-1], 0.0)))
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations", last_value=float(np.sqrt(max(lam, 0.0)))
    )
