"""Full-uncertainty distributionally robust LQR synthesis.

Both the mean and covariance of the disturbance are only known to lie in a
data-driven ambiguity set.  Synthesis maximizes tr(W) (W = P^{-1}) subject
to two LMIs: an arrow-shaped block coupling the mean radius to the noise
channels through auxiliary variables S and L, and a large Schur-complement
block encoding the robust Lyapunov/cost decrease.  The resulting gain is
K = V W^{-1} and tr(W^{-1}) upper-bounds the expected closed-loop cost for
an isotropic random initial state.

A receding-horizon variant minimizes a scalar bound gamma on x0^T W^{-1} x0
for a specific initial state instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ambiguity import MomentAmbiguity
from .matcore import NumericalFailure, ShapeError, SymMatrix, as_matrix, psd_sqrt
from .riccati import Controller
from .sdpcore import LmiBuilder, LmiProblem, block_expr, kron_const, solve, zeros
from .stability import ClosedLoop, dr_certify_mss
from .sysmodel import CostWeights, MultNoiseSystem


class DrSynthesisError(RuntimeError):
    """The robust synthesis SDP is infeasible: the ambiguity set is too large
    for any linear gain to be certifiably mean-square stabilizing."""


@dataclass(frozen=True)
class SynthesisResult:
    """Synthesized robust controller together with the SDP matrix variables."""

    controller: Controller
    W: np.ndarray
    V: np.ndarray
    S: np.ndarray
    L: np.ndarray
    cost_bound: float
    trace_W: float


def _thm6_builder(sys: MultNoiseSystem, amb: MomentAmbiguity, cost: CostWeights) -> LmiBuilder:
    if amb.n_w != sys.n_w:
        raise ShapeError(f"ambiguity has n_w={amb.n_w}, system has n_w={sys.n_w}")
    n_x, n_u, n_w = sys.n_x, sys.n_u, sys.n_w
    sigma_hat = as_matrix(amb.sigma_hat)
    if np.linalg.eigvalsh(sigma_hat)[0] <= 0:
        raise DrSynthesisError("Sigma_hat is singular; rebuild the ambiguity set with regularization")
    sigma_half = as_matrix(psd_sqrt(sigma_hat))
    sigma_dr_inv = np.linalg.inv(amb.rho_sigma * sigma_hat)
    A_mu, B_mu = sys.eval_AB(amb.mu_hat)
    Q_half = as_matrix(psd_sqrt(cost.Q))
    R_half = as_matrix(psd_sqrt(cost.R))

    b = LmiBuilder()
    W = b.sym_var("W", n_x)
    V = b.rect_var("V", n_u, n_x)
    S = b.sym_var("S", n_x)
    L = b.sym_var("L", n_x)

    channels = [sys.A[i] @ W + sys.B[i] @ V for i in range(n_w)]
    H = [sum((sigma_half[j, i] * channels[j] for j in range(n_w)), zeros((n_x, n_x)))
         for i in range(n_w)]

    # arrow block: [[S, rho_mu H_i^T ...], [rho_mu H_i, diag(L)]]
    arrow = [[S] + [amb.rho_mu * H[i].T for i in range(n_w)]]
    for i in range(n_w):
        row = [amb.rho_mu * H[i]]
        for j in range(n_w):
            row.append(L if i == j else zeros((n_x, n_x)))
        arrow.append(row)
    b.add_psd(block_expr(arrow))

    # main Schur block
    stack = block_expr([[ch] for ch in channels]) if n_w else zeros((0, n_x))
    center = A_mu @ W + B_mu @ V
    root2 = math.sqrt(2.0)
    zx = zeros((n_w * n_x, n_x))
    zxu = zeros((n_w * n_x, n_u))
    main = block_expr([
        [W - root2 * S, stack.T, center.T, W @ Q_half, V.T @ R_half],
        [stack, kron_const(sigma_dr_inv, W), zx, zx, zxu],
        [center, zx.T, W - root2 * L, zeros((n_x, n_x)), zeros((n_x, n_u))],
        [Q_half @ W, zx.T, zeros((n_x, n_x)), np.eye(n_x), zeros((n_x, n_u))],
        [R_half @ V, zxu.T, zeros((n_u, n_x)), zeros((n_u, n_x)), np.eye(n_u)],
    ])
    b.add_psd(main)

    # keep L invertible in the barrier when rho_mu degenerates to 0
    eps = 1e-9 * (1.0 + max(np.linalg.norm(as_matrix(cost.Q), 2), np.linalg.norm(as_matrix(cost.R), 2)))
    b.add_psd(block_expr([[L - eps * np.eye(n_x)]]))
    return b


def assemble_thm6(sys: MultNoiseSystem, amb: MomentAmbiguity, cost: CostWeights) -> LmiProblem:
    """Pencil form of the full-uncertainty synthesis SDP (tr(W) maximized)."""
    b = _thm6_builder(sys, amb, cost)
    b.minimize(-b.var("W").trace())
    return b.build()


def _extract(b: LmiBuilder, sol, sys: MultNoiseSystem, method: str,
             cost_bound: float | None = None) -> SynthesisResult:
    W = b.extract("W", sol.y)
    V = b.extract("V", sol.y)
    S = b.extract("S", sol.y)
    L = b.extract("L", sol.y)
    W_inv = np.linalg.inv(W)
    K = V @ W_inv
    P_hat = SymMatrix(W_inv)
    bound = float(np.trace(as_matrix(P_hat))) if cost_bound is None else cost_bound
    ctrl = Controller(K=K, P=P_hat, cost_kind="upper_bound", method=method,
                      iterations=sol.iterations, cost_bound=bound)
    return SynthesisResult(controller=ctrl, W=W, V=V, S=S, L=L,
                           cost_bound=bound, trace_W=float(np.trace(W)))


def _check_status(sol) -> None:
    if sol.status == "infeasible":
        raise DrSynthesisError("synthesis SDP infeasible: ambiguity set too large for this system")
    if sol.status != "optimal":
        raise NumericalFailure(f"synthesis SDP returned status {sol.status}")


def synth_full(sys: MultNoiseSystem, amb: MomentAmbiguity, cost: CostWeights,
               certify: bool = True, mean_grid: int = 12) -> SynthesisResult:
    """Full-uncertainty robust controller with cost bound tr(W^{-1}).

    The bound is the expected closed-loop cost for a random initial state
    with identity second moment, valid for every distribution in the
    ambiguity set.  The returned gain additionally passes the sampled
    robust stability certificate unless certify=False.
    """
    b = _thm6_builder(sys, amb, cost)
    b.minimize(-b.var("W").trace())
    sol = solve(b.build())
    _check_status(sol)
    result = _extract(b, sol, sys, "dr_full")
    if certify:
        cl = ClosedLoop(sys=sys, K=result.controller.K)
        if not dr_certify_mss(cl, amb, mean_grid=mean_grid):
            raise NumericalFailure(
                "synthesized gain failed the sampled robust stability certificate"
            )
    return result


def synth_rhc(sys: MultNoiseSystem, amb: MomentAmbiguity, cost: CostWeights, x0,
              certify: bool = True, mean_grid: int = 12) -> SynthesisResult:
    """Receding-horizon variant: minimize gamma >= x0^T W^{-1} x0.

    The gamma constraint enters as the Schur-complement block
    [[gamma, x0^T], [x0, W]] >= 0 alongside the synthesis LMIs.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != sys.n_x:
        raise ShapeError(f"x0 has length {x0.size}, expected {sys.n_x}")
    b = _thm6_builder(sys, amb, cost)
    gamma = b.scalar_var("gamma")
    b.add_psd(block_expr([[gamma, x0.reshape(1, -1)], [x0.reshape(-1, 1), b.var("W")]]))
    b.minimize(gamma)
    sol = solve(b.build())
    _check_status(sol)
    gamma_val = float(b.extract("gamma", sol.y)[0, 0])
    result = _extract(b, sol, sys, "dr_rhc", cost_bound=gamma_val)
    if certify:
        cl = ClosedLoop(sys=sys, K=result.controller.K)
        if not dr_certify_mss(cl, amb, mean_grid=mean_grid):
            raise NumericalFailure(
                "synthesized gain failed the sampled robust stability certificate"
            )
    return result
