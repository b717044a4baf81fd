"""Dense complex-matrix kernels shared by every other module.

All routines work on plain ``numpy`` arrays with ``complex128`` entries.
Hermitian inputs are verified (not silently symmetrized) so that callers
cannot hide bookkeeping bugs behind a projection.
"""

import numpy as np

# Tolerance used when classifying a matrix as Hermitian.
HERMITIAN_ATOL = 1e-10
# Eigenvalues above this (negative) floor are treated as numerical zeros
# when deciding whether a matrix is PSD.
EIGEN_FLOOR = 1e-9


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class DomainError(ValueError):
    """Input is outside the mathematical domain of the operation."""


class NumericalFailureError(RuntimeError):
    """An iterative routine produced non-finite values."""


def is_hermitian(a, atol=HERMITIAN_ATOL):
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.abs(a).max()) if a.size else 1.0)
    return bool(np.allclose(a, a.conj().T, rtol=0.0, atol=atol * scale))


def require_hermitian(a, name="matrix"):
    if not is_hermitian(a):
        raise ContractError(f"{name} must be Hermitian within {HERMITIAN_ATOL:g}")
    return np.asarray(a, dtype=complex)


def hermitian_logdet(a):
    """Base-2 log-determinant of a Hermitian positive-definite matrix.

    Computed from the Cholesky factor for stability:
    ``log2|A| = 2 * sum(log2 diag(L))``.

    Raises
    ------
    DomainError
        If the matrix is not positive definite; the message names the
        smallest eigenvalue.
    """
    a = require_hermitian(a, "logdet input")
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        lam_min = float(np.linalg.eigvalsh(a)[0])
        raise DomainError(
            f"logdet requires a positive-definite matrix; smallest eigenvalue "
            f"is {lam_min:.6e}"
        ) from None
    return float(2.0 * np.sum(np.log2(np.diagonal(lower).real)))


def simplex_trace_project(eigs, cap):
    """Project a nonnegative eigenvalue vector onto {x >= 0, sum(x) <= cap}.

    Sort-and-threshold water-level rule: if the clipped vector already fits
    under the cap it is returned unchanged, otherwise a common level theta
    is subtracted so that ``sum(max(x - theta, 0)) == cap``.  This is the
    Euclidean-nearest point, hence also the Frobenius-nearest spectrum.
    """
    x = np.maximum(np.asarray(eigs, dtype=float), 0.0)
    total = float(x.sum())
    if total <= cap:
        return x
    # Water level for the equality-constrained projection onto sum(x) = cap.
    u = np.sort(x)[::-1]
    cssv = np.cumsum(u) - cap
    idx = np.arange(1, x.size + 1)
    rho = np.nonzero(u - cssv / idx > 0)[0][-1]
    theta = cssv[rho] / (rho + 1.0)
    return np.maximum(x - theta, 0.0)


def psd_project(a, trace_cap):
    """Frobenius-nearest PSD matrix with trace at most ``trace_cap``.

    Eigenvalues are clipped at zero; if the clipped trace still exceeds the
    cap the spectrum is projected onto the simplex {lam >= 0, sum <= cap}.
    Idempotent by construction.
    """
    if trace_cap <= 0:
        raise ContractError("trace_cap must be positive")
    a = require_hermitian(a, "psd_project input")
    eigs, vecs = np.linalg.eigh(a)
    eigs = simplex_trace_project(eigs, float(trace_cap))
    return (vecs * eigs) @ vecs.conj().T


def cholesky_lower(a):
    """Lower-triangular B with B @ B^H == A for a Hermitian PSD matrix.

    Singular but PSD inputs (e.g. zero or rank-deficient covariances) are
    handled through an eigen-floored QR factorization; the diagonal of the
    returned factor is real and nonnegative either way.

    Raises
    ------
    DomainError
        If the matrix is indefinite beyond the PSD floor.
    """
    a = require_hermitian(a, "cholesky input")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    eigs, vecs = np.linalg.eigh(a)
    scale = max(1.0, float(np.abs(eigs).max()) if eigs.size else 1.0)
    if eigs.size and eigs[0] < -EIGEN_FLOOR * scale:
        raise DomainError(
            f"cholesky requires a PSD matrix; smallest eigenvalue is "
            f"{float(eigs[0]):.6e}"
        )
    root = (vecs * np.sqrt(np.maximum(eigs, 0.0))).conj().T
    # A = root^H root = R^H R with R from the QR of root, so B = R^H is lower
    # triangular.  Row phases of R are fixed to make diag(B) real >= 0.
    _, r = np.linalg.qr(root)
    d = np.diagonal(r).copy()
    phase = np.where(np.abs(d) > 0, np.conj(d) / np.abs(np.where(d == 0, 1, d)), 1.0)
    return (phase[:, None] * r).conj().T


def psd_sqrt_factor(a, check=True):
    """Factor F with F @ F^H == A for a Hermitian PSD matrix.

    Unlike :func:`cholesky_lower` the factor is not triangular (it is an
    eigenvector basis scaled by root eigenvalues), which is cheaper and all
    that quadratic forms need.  ``check=False`` skips the Hermitian guard
    for callers that construct their inputs symmetrically.

    Raises
    ------
    DomainError
        If the matrix is indefinite beyond the PSD floor.
    """
    a = require_hermitian(a, "psd factor input") if check else np.asarray(a, dtype=complex)
    eigs, vecs = np.linalg.eigh(a)
    scale = max(1.0, float(np.abs(eigs).max()) if eigs.size else 1.0)
    if eigs.size and eigs[0] < -EIGEN_FLOOR * scale:
        raise DomainError(
            f"psd factor requires a PSD matrix; smallest eigenvalue is "
            f"{float(eigs[0]):.6e}"
        )
    return vecs * np.sqrt(np.maximum(eigs, 0.0))


def largest_sq_singular_value(a, iters=30, seed=0):
    """Power-iteration estimate of the largest squared singular value."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    gram = a.conj().T @ a
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(gram.shape[0]) + 1j * rng.standard_normal(gram.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = float(np.real(v.conj() @ gram @ v))
    return lam
