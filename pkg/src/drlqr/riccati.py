"""Nominal stochastic LQR and the covariance-only robust variant.

The nominal problem is solved by value iteration on the generalized Riccati
recursion P_{k+1} = Q + F(P_k) - H(P_k)^T (R + G(P_k))^{-1} H(P_k) starting
from P_0 = 0, and cross-checked by a trace-maximizing SDP.  The
covariance-only robust controller is the same pipeline run with the
covariance inflated to rho_sigma * Sigma_hat, which is worst-case exact
when the mean is known.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .matcore import NumericalFailure, SymMatrix, as_matrix, symmetrize
from .sdpcore import LmiBuilder, block_expr, kron_const, solve
from .sysmodel import CostWeights, DisturbanceMoments, MultNoiseSystem, fgh
from .ambiguity import MomentAmbiguity

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200_000
DIVERGENCE_TRACE = 1e12


class NotStabilizableError(RuntimeError):
    """No linear gain renders the system mean-square stable under these moments."""


@dataclass(frozen=True)
class Controller:
    """Static state-feedback gain with its value matrix and provenance."""

    K: np.ndarray
    P: SymMatrix
    cost_kind: str  # "exact" | "upper_bound"
    method: str  # "nominal_vi" | "nominal_sdp" | "dr_covariance" | "dr_full" | "dr_rhc"
    iterations: int = 0
    cost_bound: float | None = None

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K, dtype=float))
        P = self.P if isinstance(self.P, SymMatrix) else SymMatrix(np.atleast_2d(self.P))
        if np.linalg.eigvalsh(as_matrix(P))[0] <= 0:
            raise ValueError("value matrix P must be strictly positive definite")
        if K.shape[1] != P.dim:
            raise ValueError(f"gain shape {K.shape} inconsistent with P dimension {P.dim}")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "P", P)

    def to_json_dict(self) -> dict:
        d = {
            "K": self.K.tolist(),
            "P": as_matrix(self.P).tolist(),
            "method": self.method,
            "cost_kind": self.cost_kind,
            "trace_P": float(np.trace(as_matrix(self.P))),
        }
        if self.cost_bound is not None:
            d["cost_bound"] = float(self.cost_bound)
        return d


def _gain_from(P, sys: MultNoiseSystem, m: DisturbanceMoments, cost: CostWeights) -> np.ndarray:
    _, G, H = fgh(sys, m, P)
    R = as_matrix(cost.R)
    try:
        c, low = scipy.linalg.cho_factor(R + G)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"R + G(P) not positive definite: {exc}") from exc
    return -scipy.linalg.cho_solve((c, low), H)


def value_iteration(sys: MultNoiseSystem, m: DisturbanceMoments, cost: CostWeights,
                    tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> Controller:
    """Solve the stochastic LQR Riccati equation by value iteration from P_0 = 0.

    The iteration is monotone (P_{k+1} >= P_k); a diverging trace signals
    that no mean-square stabilizing gain exists.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = sys.n_x
    Q, R = as_matrix(cost.Q), as_matrix(cost.R)
    P = np.zeros((n, n))
    for k in range(max_iter):
        F, G, H = fgh(sys, m, P)
        try:
            c, low = scipy.linalg.cho_factor(R + G)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"R + G(P) lost positive definiteness: {exc}") from exc
        P_next = symmetrize(Q + F - H.T @ scipy.linalg.cho_solve((c, low), H))
        if np.linalg.eigvalsh(P_next - P)[0] < -1e-8 * (1.0 + np.linalg.norm(P)):
            raise NumericalFailure("value iteration lost monotonicity")
        delta = np.linalg.norm(P_next - P)
        P = P_next
        if np.trace(P) > DIVERGENCE_TRACE:
            raise NotStabilizableError(
                "value iteration diverged: system is not mean-square stabilizable under these moments"
            )
        if delta <= tol * (1.0 + np.linalg.norm(P)):
            K = _gain_from(P, sys, m, cost)
            return Controller(K=K, P=SymMatrix(P), cost_kind="exact", method="nominal_vi", iterations=k + 1)
    raise NotStabilizableError(
        f"value iteration did not converge within {max_iter} sweeps (trace {np.trace(P):.3e})"
    )


def riccati_residual(sys: MultNoiseSystem, m: DisturbanceMoments, cost: CostWeights, P) -> float:
    """Frobenius norm of P - (Q + F(P) - H^T (R+G)^{-1} H)."""
    P = as_matrix(P)
    F, G, H = fgh(sys, m, P)
    rhs = as_matrix(cost.Q) + F - H.T @ np.linalg.solve(as_matrix(cost.R) + G, H)
    return float(np.linalg.norm(P - rhs))


def nominal_sdp(sys: MultNoiseSystem, m: DisturbanceMoments, cost: CostWeights) -> Controller:
    """Solve the Riccati equation through the trace SDP (cross-check route).

    minimize -tr(P) subject to [[Q - P + F(P), H(P)^T], [H(P), R + G(P)]] >= 0
    and P >= 0; by complementary slackness the optimum is the Riccati solution.
    """
    b = LmiBuilder()
    P = b.sym_var("P", sys.n_x)
    Abar0, Bbar0 = sys.stacked()
    S_ext = as_matrix(m.extended_moment())
    mid = kron_const(S_ext, P)
    F = Abar0.T @ mid @ Abar0
    G = Bbar0.T @ mid @ Bbar0
    H = Bbar0.T @ mid @ Abar0
    Q, R = as_matrix(cost.Q), as_matrix(cost.R)
    b.add_psd(block_expr([[Q - P + F, H.T], [H, R + G]]))
    b.add_psd(P)
    b.minimize(-P.trace())
    prob = b.build()
    sol = solve(prob)
    if sol.status == "infeasible":
        raise NotStabilizableError("Riccati SDP infeasible: system is not mean-square stabilizable")
    if sol.status != "optimal":
        raise NumericalFailure(f"Riccati SDP solver returned status {sol.status}")
    P_val = b.extract("P", sol.y)
    K = _gain_from(P_val, sys, m, cost)
    return Controller(K=K, P=SymMatrix(P_val), cost_kind="exact", method="nominal_sdp",
                      iterations=sol.iterations)


def dr_covariance(sys: MultNoiseSystem, mu_known, amb: MomentAmbiguity,
                  cost: CostWeights, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER) -> Controller:
    """Covariance-only robust controller: nominal pipeline at rho_sigma * Sigma_hat.

    The mean is treated as known (rho_mu is ignored).  Worst-case exact: the
    support-function maximum over {Sigma <= rho_sigma Sigma_hat} is attained
    at the inflated covariance.
    """
    inflated = DisturbanceMoments(mu=np.asarray(mu_known, dtype=float),
                                  sigma=SymMatrix(amb.rho_sigma * as_matrix(amb.sigma_hat)))
    try:
        ctrl = value_iteration(sys, inflated, cost, tol=tol, max_iter=max_iter)
    except NotStabilizableError as exc:
        raise NotStabilizableError(
            f"system not stabilizable under covariance inflated by rho_sigma = {amb.rho_sigma:.4f}"
        ) from exc
    return Controller(K=ctrl.K, P=ctrl.P, cost_kind="exact", method="dr_covariance",
                      iterations=ctrl.iterations)


def save_controller(ctrl: Controller, path) -> None:
    with open(path, "w") as f:
        json.dump(ctrl.to_json_dict(), f, indent=2)


def load_gain(path) -> np.ndarray:
    """Read a gain matrix from controller JSON (only the "K" field is used)."""
    with open(path) as f:
        d = json.load(f)
    return np.atleast_2d(np.asarray(d["K"], dtype=float))
