"""Self-contained dense linear-algebra kernel.

Provides the factorization, symmetric eigendecomposition, matrix exponential,
matrix sign function, and continuous algebraic Riccati equation (CARE) solver
used by the synthesis and simulation layers.  All algorithms are implemented
directly on top of numpy array arithmetic; no external decomposition routines
are called.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinearAlgebraError",
    "ShapeError",
    "SymmetryError",
    "ConvergenceError",
    "SingularMatrixError",
    "SignFunctionError",
    "NotStabilizableError",
    "EigenResult",
    "as_matrix",
    "sym_eig",
    "lu_solve",
    "inverse",
    "matrix_exp",
    "matrix_sign",
    "care_solve",
    "is_negative_semidefinite",
    "is_positive_definite",
]


class LinearAlgebraError(Exception):
    """Base class for failures in the dense linear-algebra kernel."""


class ShapeError(LinearAlgebraError):
    """Operand dimensions are inconsistent with the operation."""


class SymmetryError(LinearAlgebraError):
    """An operation requiring a symmetric matrix received a non-symmetric one."""


class ConvergenceError(LinearAlgebraError):
    """An iterative kernel failed to converge within its sweep budget."""


class SingularMatrixError(LinearAlgebraError):
    """Pivot fell below the singularity threshold during factorization."""


class SignFunctionError(LinearAlgebraError):
    """Sign-function Newton iteration failed (eigenvalues too close to the imaginary axis)."""


class NotStabilizableError(LinearAlgebraError):
    """CARE synthesis failed; the input pair admits no stabilizing solution."""


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array, rejecting non-finite entries."""
    m = np.array(values, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains non-finite entries")
    return m


def _square(values, name: str) -> np.ndarray:
    m = as_matrix(values, name)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got {m.shape[0]}x{m.shape[1]}")
    return m


def _require_symmetric(m: np.ndarray, name: str, rel: float = 1e-10) -> None:
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > rel * scale:
        raise SymmetryError(f"{name} is not symmetric within {rel:g} relative tolerance")


def _frobenius(m: np.ndarray) -> float:
    return math.sqrt(float((m * m).sum()))


@dataclass(frozen=True)
class EigenResult:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` are ascending; column i of ``eigenvectors`` is the
    eigenvector for ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(m, max_sweeps: int = 100) -> EigenResult:
    """Diagonalize a symmetric matrix with cyclic Jacobi rotations.

    Sweeps run until the off-diagonal Frobenius norm falls below
    1e-12 times the matrix norm.
    """
    a = _square(m, "m")
    _require_symmetric(a, "m")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    norm = _frobenius(a)
    if norm == 0.0:
        return EigenResult(np.zeros(n), v)
    target = 1e-12 * norm
    converged = False
    for _ in range(max_sweeps):
        off = a - np.diag(np.diag(a))
        if _frobenius(off) < target:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    if not converged:
        off = a - np.diag(np.diag(a))
        if _frobenius(off) >= target:
            raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    order = np.argsort(np.diag(a), kind="stable")
    return EigenResult(np.diag(a)[order].copy(), v[:, order].copy())


def _lu_factor(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = m.shape[0]
    lu = m.copy()
    perm = np.arange(n)
    scale = float(np.abs(m).max())
    threshold = 1e-13 * scale
    for k in range(n):
        r = k + int(np.abs(lu[k:, k]).argmax())
        if abs(lu[r, k]) <= threshold:
            raise SingularMatrixError(f"pivot {abs(lu[r, k]):.3e} below threshold at column {k}")
        if r != k:
            lu[[k, r]] = lu[[r, k]]
            perm[[k, r]] = perm[[r, k]]
        lu[k + 1 :, k] /= lu[k, k]
        lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
    return lu, perm


def lu_solve(m, rhs) -> np.ndarray:
    """Solve m @ x = rhs by partially pivoted LU factorization."""
    a = _square(m, "m")
    b = np.array(rhs, dtype=float)
    vector = b.ndim == 1
    if vector:
        b = b.reshape(-1, 1)
    if b.shape[0] != a.shape[0]:
        raise ShapeError(f"rhs has {b.shape[0]} rows, expected {a.shape[0]}")
    lu, perm = _lu_factor(a)
    x = b[perm].astype(float)
    n = a.shape[0]
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] -= lu[i, i + 1 :] @ x[i + 1 :]
        x[i] /= lu[i, i]
    return x[:, 0] if vector else x


def inverse(m) -> np.ndarray:
    """Matrix inverse via LU solve against the identity."""
    a = _square(m, "m")
    return lu_solve(a, np.eye(a.shape[0]))


_PADE6 = (1.0, 1.0 / 2.0, 5.0 / 44.0, 1.0 / 66.0, 1.0 / 792.0, 1.0 / 15840.0, 1.0 / 665280.0)


def matrix_exp(m) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a degree-6 Pade core."""
    a = _square(m, "m")
    n = a.shape[0]
    norm = float(np.abs(a).sum(axis=1).max()) if n else 0.0
    squarings = 0
    if norm > 0.5:
        squarings = max(0, int(math.ceil(math.log2(norm / 0.5))))
        a = a / (2.0**squarings)
    ident = np.eye(n)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    even = _PADE6[0] * ident + _PADE6[2] * a2 + _PADE6[4] * a4 + _PADE6[6] * a6
    odd = a @ (_PADE6[1] * ident + _PADE6[3] * a2 + _PADE6[5] * a4)
    result = lu_solve(even - odd, even + odd)
    for _ in range(squarings):
        result = result @ result
    return result


def matrix_sign(m, max_iterations: int = 100) -> np.ndarray:
    """Matrix sign function by Newton iteration Z <- (Z + Z^-1)/2.

    Fails when the input has eigenvalues on (or numerically touching) the
    imaginary axis, which makes the iteration singular or divergent.
    """
    z = _square(m, "m")
    converged = False
    for _ in range(max_iterations):
        try:
            z_next = 0.5 * (z + inverse(z))
        except SingularMatrixError as exc:
            raise SignFunctionError("sign iteration hit a singular iterate") from exc
        delta = float(np.abs(z_next - z).max())
        scale = max(float(np.abs(z).max()), np.finfo(float).tiny)
        z = z_next
        if delta < 1e-12 * scale:
            converged = True
            break
    if not converged:
        raise SignFunctionError(f"sign iteration did not converge in {max_iterations} iterations")
    residual = float(np.abs(z @ z - np.eye(z.shape[0])).max())
    if residual > 1e-8:
        raise SignFunctionError(f"sign involution residual {residual:.3e} exceeds 1e-8")
    return z


def care_solve(a, b, q_hat, gamma: float) -> np.ndarray:
    """Solve P A + A^T P - gamma P B B^T P + q_hat = 0 for symmetric P >= 0.

    Uses the sign function of the Hamiltonian matrix to extract the stable
    invariant subspace.  Raises NotStabilizableError when no stabilizing
    solution exists (sign failure, indefinite P, or excessive residual).
    """
    a = _square(a, "a")
    b_mat = as_matrix(b, "b")
    q = _square(q_hat, "q_hat")
    d = a.shape[0]
    if b_mat.shape[0] != d:
        raise ShapeError(f"b has {b_mat.shape[0]} rows, expected {d}")
    if q.shape[0] != d:
        raise ShapeError(f"q_hat is {q.shape[0]}x{q.shape[1]}, expected {d}x{d}")
    _require_symmetric(q, "q_hat")
    if not gamma > 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    g = gamma * (b_mat @ b_mat.T)
    hamiltonian = np.block([[a, -g], [-q, -a.T]])
    try:
        s = matrix_sign(hamiltonian)
    except SignFunctionError as exc:
        raise NotStabilizableError("Hamiltonian sign iteration failed; pair is not stabilizable") from exc
    s11 = s[:d, :d]
    s12 = s[:d, d:]
    s21 = s[d:, :d]
    s22 = s[d:, d:]
    stacked = np.vstack([s12, s22 + np.eye(d)])
    rhs = -np.vstack([s11 + np.eye(d), s21])
    try:
        p = lu_solve(stacked.T @ stacked, stacked.T @ rhs)
    except SingularMatrixError as exc:
        raise NotStabilizableError("stable-subspace system is singular") from exc
    p = 0.5 * (p + p.T)
    eigenvalues = sym_eig(p).eigenvalues
    if eigenvalues[0] < -1e-9 * max(1.0, float(np.abs(eigenvalues).max())):
        raise NotStabilizableError(f"solution is indefinite (min eigenvalue {eigenvalues[0]:.3e})")
    residual = p @ a + a.T @ p - gamma * (p @ b_mat) @ (b_mat.T @ p) + q
    limit = 1e-7 * (1.0 + _frobenius(p) ** 2)
    if float(np.abs(residual).max()) > limit:
        raise NotStabilizableError(
            f"Riccati residual {float(np.abs(residual).max()):.3e} exceeds {limit:.3e}"
        )
    return p


def is_negative_semidefinite(m, tol: float = 1e-9) -> bool:
    """True when every eigenvalue of the symmetric input is <= tol."""
    return float(sym_eig(m).eigenvalues[-1]) <= tol


def is_positive_definite(m, tol: float = 1e-9) -> bool:
    """True when every eigenvalue of the symmetric input is >= tol."""
    return float(sym_eig(m).eigenvalues[0]) >= tol
