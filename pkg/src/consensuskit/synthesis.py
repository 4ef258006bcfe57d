"""Protocol gain synthesis from translated Riccati conditions.

The leaderless design solves P A + A^T P - gamma P B B^T P + 2 Q = 0 and the
leader-follower design solves the same equation with multiplier 3, yielding
the gain pair K_u = B^T P and K_w = P B B^T P.  The translation factor gamma
shifts the nonzero Laplacian spectrum, so no global topology information
enters the design.  The module also verifies the matrix-inequality form of
the conditions (certificates and the LMI feasibility variant) and regulates
the gain magnitude by a one-dimensional search over gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matops
from .matops import NotStabilizableError, SymmetryError

__all__ = [
    "LEADERLESS",
    "LEADER_FOLLOWER",
    "COST_MULTIPLIER",
    "SynthesisError",
    "WeightMatrixError",
    "RegulationError",
    "GainSet",
    "CertificateCheck",
    "LmiReport",
    "RegulationRequest",
    "design_leaderless",
    "design_leader_follower",
    "verify_riccati_certificate",
    "verify_lmi_corollary",
    "regulate_gain",
]

LEADERLESS = "leaderless"
LEADER_FOLLOWER = "leader-follower"
COST_MULTIPLIER = {LEADERLESS: 2, LEADER_FOLLOWER: 3}


class SynthesisError(Exception):
    """Gain synthesis failed."""


class WeightMatrixError(SynthesisError):
    """Cost weight matrix Q is not symmetric positive definite."""


class RegulationError(SynthesisError):
    """Gain regulation search failed (infeasible bounds or non-monotone spectrum)."""


@dataclass(frozen=True)
class GainSet:
    """Synthesized protocol gains with their Riccati certificate and plant.

    ``certificate`` is the symmetric positive definite solution matrix,
    ``k_u`` = B^T certificate drives the control protocol, and
    ``k_w`` = certificate B B^T certificate drives the adaptive weights.
    The plant matrices ride along so simulation and verification are
    self-contained.
    """

    mode: str
    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    gamma: float
    certificate: np.ndarray
    k_u: np.ndarray = field(default=None)  # type: ignore[assignment]
    k_w: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.mode not in COST_MULTIPLIER:
            raise ValueError(f"mode must be one of {sorted(COST_MULTIPLIER)}, got {self.mode!r}")
        if self.k_u is None:
            object.__setattr__(self, "k_u", self.b.T @ self.certificate)
        if self.k_w is None:
            object.__setattr__(self, "k_w", self.k_u.T @ self.k_u)

    @property
    def multiplier(self) -> int:
        return COST_MULTIPLIER[self.mode]

    @property
    def state_dim(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class CertificateCheck:
    """Verdict of the Riccati inequality check with its margin.

    ``margin`` is the maximum eigenvalue of
    certificate A + A^T certificate - gamma K_w + multiplier Q;
    the certificate is valid when the margin is at most the tolerance.
    """

    is_certificate: bool
    margin: float


@dataclass(frozen=True)
class LmiReport:
    """Feasibility report for the LMI form of the synthesis condition."""

    feasible: bool
    xi_negative_definite: bool
    xi_max_eigenvalue: float
    floor_satisfied: bool
    certificate_min_eigenvalue: float
    bbt_max_eigenvalue: float
    bbt_precondition_ok: bool
    strict: bool
    rescale_factor: float
    gamma_equivalent: float


@dataclass(frozen=True)
class RegulationRequest:
    """Gain-factor target and gamma search bounds for regulate_gain."""

    delta: float
    gamma_min: float = 1e-6
    gamma_max: float = 1e12

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not (0.0 < self.gamma_min < self.gamma_max):
            raise ValueError("need 0 < gamma_min < gamma_max")


def _validated_plant(a, b, q) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = matops.as_matrix(a, "a")
    b = matops.as_matrix(b, "b")
    q = matops.as_matrix(q, "q")
    if a.shape[0] != a.shape[1]:
        raise matops.ShapeError(f"a must be square, got {a.shape}")
    d = a.shape[0]
    if b.shape[0] != d:
        raise matops.ShapeError(f"b has {b.shape[0]} rows, expected {d}")
    if q.shape != (d, d):
        raise matops.ShapeError(f"q is {q.shape[0]}x{q.shape[1]}, expected {d}x{d}")
    return a, b, q


def _design(mode: str, a, b, q, gamma: float) -> GainSet:
    a, b, q = _validated_plant(a, b, q)
    if not matops.is_positive_definite(q, tol=1e-12):
        raise WeightMatrixError("q must be symmetric positive definite")
    multiplier = COST_MULTIPLIER[mode]
    certificate = matops.care_solve(a, b, multiplier * q, gamma)
    gains = GainSet(mode=mode, a=a, b=b, q=q, gamma=gamma, certificate=certificate)
    check = verify_riccati_certificate(certificate, a, b, q, gamma, multiplier)
    scale = 1.0 + float((certificate * certificate).sum())
    if check.margin > 1e-7 * scale:
        raise SynthesisError(f"synthesized certificate margin {check.margin:.3e} out of tolerance")
    return gains


def design_leaderless(a, b, q, gamma: float) -> GainSet:
    """Leaderless gain design: CARE with cost multiplier 2."""
    return _design(LEADERLESS, a, b, q, gamma)


def design_leader_follower(a, b, q, gamma_l: float) -> GainSet:
    """Leader-follower gain design: CARE with cost multiplier 3."""
    return _design(LEADER_FOLLOWER, a, b, q, gamma_l)


def verify_riccati_certificate(
    certificate, a, b, q, gamma: float, multiplier: int, tol: float = 1e-9
) -> CertificateCheck:
    """Check that a candidate certificate satisfies the Riccati inequality.

    Returns the negative-semidefiniteness verdict of
    certificate A + A^T certificate - gamma certificate B B^T certificate
    + multiplier Q together with its maximum eigenvalue (the margin).
    """
    a, b, q = _validated_plant(a, b, q)
    p = matops.as_matrix(certificate, "certificate")
    if p.shape != a.shape:
        raise matops.ShapeError(f"certificate is {p.shape[0]}x{p.shape[1]}, expected {a.shape[0]}x{a.shape[1]}")
    scale = max(1.0, float(np.abs(p).max()))
    if float(np.abs(p - p.T).max()) > 1e-10 * scale:
        raise SymmetryError("certificate is not symmetric")
    pb = p @ b
    form = p @ a + a.T @ p - gamma * (pb @ pb.T) + multiplier * q
    margin = float(matops.sym_eig(form).eigenvalues[-1])
    return CertificateCheck(is_certificate=margin <= tol, margin=margin)


def verify_lmi_corollary(
    p_tilde, gamma: float, a, b, q, multiplier: int, delta: float, strict: bool = True
) -> LmiReport:
    """Feasibility check of the LMI form of the synthesis condition.

    Assembles Xi = [[A P~ + P~ A^T - gamma B B^T, multiplier P~ Q],
                    [multiplier Q P~, -multiplier Q]] and requires Xi < 0,
    P~ >= (1/delta) I, and the input-scaling precondition
    lambda_max(B B^T) <= 1.  In strict mode a violated precondition makes the
    report infeasible; in relaxed mode B is rescaled to unit spectral norm
    (gamma compensated, leaving gamma B B^T unchanged) and the precondition is
    reported but waived.
    """
    a, b, q = _validated_plant(a, b, q)
    pt = matops.as_matrix(p_tilde, "p_tilde")
    d = a.shape[0]
    if pt.shape != (d, d):
        raise matops.ShapeError(f"p_tilde is {pt.shape[0]}x{pt.shape[1]}, expected {d}x{d}")
    scale = max(1.0, float(np.abs(pt).max()))
    if float(np.abs(pt - pt.T).max()) > 1e-10 * scale:
        raise SymmetryError("p_tilde is not symmetric")
    bbt = b @ b.T
    bbt_max = float(matops.sym_eig(bbt).eigenvalues[-1])
    bbt_ok = bbt_max <= 1.0 + 1e-9
    rescale = 1.0
    gamma_equivalent = gamma
    b_eff = b
    if not bbt_ok and not strict:
        rescale = math.sqrt(bbt_max)
        b_eff = b / rescale
        gamma_equivalent = gamma * bbt_max
    xi = np.block(
        [
            [a @ pt + pt @ a.T - gamma_equivalent * (b_eff @ b_eff.T), multiplier * (pt @ q)],
            [multiplier * (q @ pt), -multiplier * q],
        ]
    )
    xi_max = float(matops.sym_eig(xi).eigenvalues[-1])
    xi_nd = xi_max < -1e-12 * max(1.0, float(np.abs(xi).max()))
    pt_min = float(matops.sym_eig(pt).eigenvalues[0])
    floor = 0.0 if math.isinf(delta) else 1.0 / delta
    floor_ok = pt_min >= floor - 1e-9 * max(1.0, floor)
    feasible = xi_nd and floor_ok and (bbt_ok or not strict)
    return LmiReport(
        feasible=feasible,
        xi_negative_definite=xi_nd,
        xi_max_eigenvalue=xi_max,
        floor_satisfied=floor_ok,
        certificate_min_eigenvalue=pt_min,
        bbt_max_eigenvalue=bbt_max,
        bbt_precondition_ok=bbt_ok,
        strict=strict,
        rescale_factor=rescale,
        gamma_equivalent=gamma_equivalent,
    )


def regulate_gain(
    a, b, q, request: RegulationRequest, mode: str = LEADERLESS, strict: bool = False
) -> tuple[float, GainSet]:
    """Find the smallest gamma whose certificate satisfies lambda_max <= delta.

    Brackets by doubling from gamma_min, then runs 60 bisection steps.  The
    expected monotone nonincrease of lambda_max(P(gamma)) in gamma is checked
    empirically; a violation raises RegulationError instead of silently
    bisecting a non-monotone function.
    """
    if mode not in COST_MULTIPLIER:
        raise ValueError(f"mode must be one of {sorted(COST_MULTIPLIER)}, got {mode!r}")
    a, b, q = _validated_plant(a, b, q)
    if strict:
        bbt_max = float(matops.sym_eig(b @ b.T).eigenvalues[-1])
        if bbt_max > 1.0 + 1e-9:
            raise RegulationError(
                f"strict mode requires lambda_max(B B^T) <= 1, got {bbt_max:.6g}"
            )
    delta = request.delta

    def evaluate(gamma: float) -> tuple[float, GainSet]:
        gains = _design(mode, a, b, q, gamma)
        lam = float(matops.sym_eig(gains.certificate).eigenvalues[-1])
        return lam, gains

    def check_monotone(lam_low_gamma: float, lam_high_gamma: float) -> None:
        slack = 1e-9 * (1.0 + abs(lam_low_gamma) + abs(lam_high_gamma))
        if lam_high_gamma > lam_low_gamma + slack:
            raise RegulationError(
                "lambda_max(P(gamma)) increased with gamma; bisection bracket is invalid"
            )

    gamma_lo = request.gamma_min
    lam_lo, gains_lo = evaluate(gamma_lo)
    if lam_lo <= delta * (1.0 + 1e-9):
        return gamma_lo, gains_lo
    gamma_hi = gamma_lo
    lam_hi = lam_lo
    gains_hi = None
    while gamma_hi < request.gamma_max:
        gamma_next = min(2.0 * gamma_hi, request.gamma_max)
        lam_next, gains_next = evaluate(gamma_next)
        check_monotone(lam_hi, lam_next)
        gamma_lo, lam_lo = gamma_hi, lam_hi
        gamma_hi, lam_hi = gamma_next, lam_next
        if lam_hi <= delta * (1.0 + 1e-9):
            gains_hi = gains_next
            break
    if gains_hi is None:
        raise RegulationError(
            f"no gamma in [{request.gamma_min:g}, {request.gamma_max:g}] achieves "
            f"lambda_max <= {delta:g} (best {lam_hi:.6g})"
        )
    for _ in range(60):
        gamma_mid = 0.5 * (gamma_lo + gamma_hi)
        lam_mid, gains_mid = evaluate(gamma_mid)
        slack = 1e-9 * (1.0 + abs(lam_lo) + abs(lam_hi))
        if lam_mid > lam_lo + slack or lam_mid < lam_hi - slack:
            raise RegulationError(
                "lambda_max(P(gamma)) is not monotone on the bisection bracket"
            )
        if lam_mid <= delta * (1.0 + 1e-9):
            gamma_hi, lam_hi, gains_hi = gamma_mid, lam_mid, gains_mid
        else:
            gamma_lo, lam_lo = gamma_mid, lam_mid
    return gamma_hi, gains_hi
