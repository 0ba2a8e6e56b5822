"""Non-convex phase retrieval solvers: alternating projections and Wirtinger Flow."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, dominant_eigenvector, hermitize, qr_projector, sample_gaussian, solve_from_qr
from .problems import SolveReport, rel_error_mod_phase

_SPECTRAL_SEED = 0x1A57  # fixed internal stream: solvers are deterministic given the instance


@dataclass
class WFConfig:
    step_scale: float = 0.1
    max_iter: int = 5000
    grad_tol: float = 1e-9
    backtracking: bool = True

    def __post_init__(self):
        if self.step_scale <= 0 or self.grad_tol <= 0:
            raise ValueError("step_scale and grad_tol must be positive")


def project_modulus(y, b):
    """Nearest point with |y'_k| = b_k; zero entries take phase 1."""
    y = np.asarray(y)
    b = np.asarray(b)
    a = np.abs(y)
    with np.errstate(invalid="ignore", divide="ignore"):
        ph = np.where(a > 0, y / np.where(a > 0, a, 1.0), 1.0)
    return b * ph


def alternating_projections(instance, rng=None, max_iter=2000, tol=1e-9, y0=None):
    """Gerchberg-Saxton iteration y <- P_range(P_moduli(y)).

    Starts from a Gaussian y0 in measurement space unless one is supplied.
    The range projection is applied through a thin QR of the measurement
    matrix, which equals B @ least_squares(B, .) for full-column-rank B.
    residual_trace records || |y_t| - b || at the in-range iterates, which is
    non-increasing.  Stops when the relative iterate change drops below tol.
    """
    B = instance.matrix
    b = instance.moduli
    q, r = qr_projector(B)
    if y0 is None:
        if rng is None:
            rng = RngStream(0)
        y = sample_gaussian(rng, instance.m, instance.field)
    else:
        y = np.asarray(y0)
    residuals = []
    converged = False
    iterations = 0
    for _ in range(max_iter):
        y_new = q @ (q.conj().T @ project_modulus(y, b))
        iterations += 1
        residuals.append(float(np.linalg.norm(np.abs(y_new) - b)))
        change = np.linalg.norm(y_new - y)
        y = y_new
        if change <= tol * max(float(np.linalg.norm(y)), 1e-300):
            converged = True
            break
    x = solve_from_qr(q, r, y)
    err = None
    if instance.x_true is not None:
        err = rel_error_mod_phase(x, instance.x_true, instance.field)
    return SolveReport(
        estimate=x,
        rel_error_mod_phase=err,
        iterations=iterations,
        converged=converged,
        residual_trace=np.asarray(residuals),
    )


def wf_loss(instance, x):
    """Quartic loss (1/2m) sum_k (|<x,v_k>|^2 - b_k^2)^2."""
    r = np.abs(instance.matrix @ x) ** 2 - instance.moduli ** 2
    return 0.5 * float(r @ r) / instance.m


def wf_grad(instance, x):
    """Gradient (1/m) sum_k (|<x,v_k>|^2 - b_k^2) v_k v_k* x.

    Satisfies (f(x+eh) - f(x-eh))/(2e) -> 2 Re<grad, h> as e -> 0 (inner
    product conjugate-linear in the first slot).
    """
    B = instance.matrix
    w = B @ x
    r = np.abs(w) ** 2 - instance.moduli ** 2
    return B.conj().T @ (r * w) / instance.m


def wf_weight_matrix(instance):
    """Moduli-weighted covariance (1/m) sum_k b_k^2 v_k v_k*."""
    B = instance.matrix
    b2 = instance.moduli ** 2
    return hermitize(B.conj().T @ (b2[:, None] * B)) / instance.m


def wf_spectral_init(instance):
    """Dominant eigenvector of the weighted covariance, scaled to norm sqrt(mean b^2)."""
    M = wf_weight_matrix(instance)
    lam_hat = float(np.sqrt(np.mean(instance.moduli ** 2)))
    _, v = dominant_eigenvector(
        M, tol=1e-11, max_iter=100_000, rng=RngStream(_SPECTRAL_SEED), assume_top=True
    )
    return v * lam_hat


def wirtinger_flow(instance, config=None, x0=None):
    """Gradient descent on the quartic loss from the spectral initializer.

    The step is step_scale / mean(b^2); when backtracking is on it halves
    whenever the loss would increase (and the reduced step is kept), so the
    objective trace is non-increasing.  Stops when ||grad|| < grad_tol *
    mean(b^2)^(3/2) or at max_iter.
    """
    if config is None:
        config = WFConfig()
    b = instance.moduli
    lam2 = float(np.mean(b ** 2))
    mu = config.step_scale / max(lam2, 1e-300)
    grad_threshold = config.grad_tol * lam2 ** 1.5
    x = wf_spectral_init(instance) if x0 is None else np.asarray(x0)
    f = wf_loss(instance, x)
    residuals = [float(np.linalg.norm(np.abs(instance.matrix @ x) - b))]
    objectives = [f]
    converged = False
    iterations = 0
    for _ in range(config.max_iter):
        g = wf_grad(instance, x)
        gn = float(np.linalg.norm(g))
        if gn < grad_threshold:
            converged = True
            break
        cand = x - mu * g
        fc = wf_loss(instance, cand)
        if config.backtracking:
            stalled = False
            halvings = 0
            while fc > f:
                halvings += 1
                if halvings > 60:
                    stalled = True
                    break
                mu *= 0.5
                cand = x - mu * g
                fc = wf_loss(instance, cand)
            if stalled:
                break
        x = cand
        f = fc
        iterations += 1
        residuals.append(float(np.linalg.norm(np.abs(instance.matrix @ x) - b)))
        objectives.append(f)
    err = None
    if instance.x_true is not None:
        err = rel_error_mod_phase(x, instance.x_true, instance.field)
    return SolveReport(
        estimate=x,
        rel_error_mod_phase=err,
        iterations=iterations,
        converged=converged,
        residual_trace=np.asarray(residuals),
        objective_trace=np.asarray(objectives),
    )
