"""Pointwise hermitian linear algebra.

Every function accepts a single ``(r, r)`` matrix or a stack ``(..., r, r)``
and works on the trailing two axes, so the same code serves one fiber and a
whole grid of fibers.
"""

from __future__ import annotations

import numpy as np

TOL_HERM = 1e-12


class SingularMetricError(ValueError):
    """A determinant fell below the requested floor."""


class HermitianMatrix:
    """Hermitian matrix with the symmetrization correction recorded.

    The constructor replaces ``A`` by ``(A + A*) / 2``; ``correction`` is the
    Frobenius norm of the removed antihermitian part relative to ``|A|``.
    """

    def __init__(self, entries, tol: float = TOL_HERM):
        a = np.array(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("hermitian matrix must be square")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite entries")
        sym = 0.5 * (a + a.conj().T)
        scale = max(np.linalg.norm(a), 1.0)
        self.correction = float(np.linalg.norm(a - sym) / scale)
        if self.correction > tol:
            raise ValueError(f"matrix is not hermitian (relative defect {self.correction:.3g})")
        sym.flags.writeable = False
        self.entries = sym

    @property
    def r(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return f"HermitianMatrix({self.entries.tolist()!r})"


def _arr(a) -> np.ndarray:
    return np.asarray(a.entries if isinstance(a, HermitianMatrix) else a, dtype=complex)


def hermitian_part(a) -> np.ndarray:
    a = _arr(a)
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def eigenvalues(a) -> np.ndarray:
    """Ascending eigenvalues of the hermitian part of ``a``."""
    a = _arr(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite entries")
    return np.linalg.eigvalsh(hermitian_part(a))


def min_eigenvalue(a):
    lam = eigenvalues(a)[..., 0]
    return float(lam) if np.ndim(lam) == 0 else lam


def default_psd_tol(a):
    """Scale-aware tolerance ``1e-9 * (1 + trace(A))``."""
    tr = np.trace(_arr(a), axis1=-2, axis2=-1).real
    return 1e-9 * (1.0 + np.abs(tr))


def is_psd(a, tol=None):
    tol = default_psd_tol(a) if tol is None else tol
    out = min_eigenvalue(a) >= -tol
    return bool(out) if np.ndim(out) == 0 else out


def det(a):
    a = _arr(a)
    r = a.shape[-1]
    if r == 1:
        return a[..., 0, 0]
    if r == 2:
        return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    return np.linalg.det(a)


def _minor(a, i, j):
    rows = [k for k in range(a.shape[-1]) if k != i]
    cols = [k for k in range(a.shape[-1]) if k != j]
    return a[..., rows, :][..., :, cols]


def adjugate(a) -> np.ndarray:
    """Cofactor transpose, so that ``A @ adj(A) = det(A) I`` even for singular ``A``.

    Exact cofactors for ``r <= 4``; larger matrices go through an LU solve
    with one step of iterative refinement and are scaled by the determinant.
    """
    a = _arr(a)
    r = a.shape[-1]
    if a.shape[-2] != r:
        raise ValueError("adjugate needs a square matrix")
    if r == 1:
        return np.ones_like(a)
    if r == 2:
        out = np.empty_like(a)
        out[..., 0, 0] = a[..., 1, 1]
        out[..., 1, 1] = a[..., 0, 0]
        out[..., 0, 1] = -a[..., 0, 1]
        out[..., 1, 0] = -a[..., 1, 0]
        return out
    if r <= 4:
        out = np.empty_like(a)
        for i in range(r):
            for j in range(r):
                out[..., j, i] = (-1) ** (i + j) * det(_minor(a, i, j))
        return out
    eye = np.broadcast_to(np.eye(r, dtype=complex), a.shape)
    x = np.linalg.solve(a, eye)
    x = x + np.linalg.solve(a, eye - a @ x)
    return det(a)[..., None, None] * x


def inverse(a) -> np.ndarray:
    """``adj(A) / det(A)``."""
    a = _arr(a)
    return adjugate(a) / det(a)[..., None, None]


def loewner_leq(a, b, tol=None):
    """``A <= B`` in the Loewner order, i.e. ``min eig(B - A) >= -tol``."""
    a, b = _arr(a), _arr(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("rank mismatch")
    diff = b - a
    tol = default_psd_tol(diff) if tol is None else tol
    out = min_eigenvalue(diff) >= -tol
    return bool(out) if np.ndim(out) == 0 else out


def dual_matrix(a, floor: float = 1e-12):
    """Matrix of the dual metric on covectors: ``transpose(inverse(A))``.

    With ``|xi|^2_dual = xi^* D xi`` this is the sharp constant in
    ``|xi(s)|^2 <= |xi|^2_dual * s^* A s``.
    """
    arr = _arr(a)
    d = det(arr).real
    if np.any(d < floor):
        raise SingularMetricError(f"determinant {np.min(d):.3g} below floor {floor:.3g}")
    out = np.swapaxes(inverse(arr), -1, -2)
    out = hermitian_part(out)
    return HermitianMatrix(out) if out.ndim == 2 else out


def pencil_eigenvalues(a, b) -> np.ndarray:
    """Eigenvalues of the hermitian pencil ``A v = lambda B v`` with ``B > 0``.

    Reduced to a standard problem through the Cholesky factor ``B = L L*``.
    """
    a, b = hermitian_part(a), hermitian_part(b)
    chol = np.linalg.cholesky(b)
    y = np.linalg.solve(chol, a)
    m = np.linalg.solve(chol, np.conj(np.swapaxes(y, -1, -2)))
    return np.linalg.eigvalsh(hermitian_part(m))
