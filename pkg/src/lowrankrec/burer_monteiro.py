"""Factorized solver for unit-diagonal semidefinite programs.

The SDP  min Tr(C U) s.t. U >= 0, U_kk = 1  is attacked through the factor
U = V V* with V an N x p matrix of unit-norm rows (a product-of-spheres
manifold), using Riemannian gradient descent with Armijo line search.
Cost constructors are provided for the phase-retrieval (PhaseCut) and
synchronization relaxations, together with rank-one rounding, a sampled
second-order criticality probe and a high-rank reference solver.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import FDInconsistent
from .numerics import RngStream, hermitize, least_squares, qr_projector, sample_gaussian
from .phase_sync import torus_project
from .problems import SolveReport


@dataclass(frozen=True)
class UnitDiagSDP:
    """min Tr(cost U) over Hermitian U >= 0 with unit diagonal (N constraints)."""

    dim: int
    cost: np.ndarray
    provenance: str = "raw"          # "phasecut" | "sync" | "raw"
    instance: object = None          # originating problem instance, if any


@dataclass
class SOSPCertificate:
    """Sampled evidence that a factor is a second-order critical point.

    min_quadform is the smallest Riemannian-Hessian quadratic form value seen
    over the sampled unit tangent directions: a lower-bound estimate only.
    """

    riemannian_grad_norm: float
    min_quadform: float
    trials: int
    factor_rank: int


def phasecut_cost(instance):
    """Cost matrix Diag(b) (I - B B^+) Diag(b) of the phase relaxation.

    For every unit-modulus u, u* C u equals the least-squares residual
    min_x sum_k |b_k u_k - <x, v_k>|^2, which pins the matrix on the
    constraint set.  Hermitian positive semidefinite by construction.
    """
    q, _ = qr_projector(instance.matrix)   # raises RankDeficient if m < n etc.
    b = instance.moduli
    m = instance.m
    proj = q @ q.conj().T
    A = np.eye(m, dtype=proj.dtype) - proj
    C = hermitize(b[:, None] * A * b[None, :])
    return UnitDiagSDP(m, C, "phasecut", instance)


def sync_cost(instance):
    """Synchronization relaxation: minimize Tr(-C U) with unit diagonal."""
    return UnitDiagSDP(instance.n, -instance.observations, "sync", instance)


def objective(problem, V):
    """f(V) = Re Tr(C V V*)."""
    return float(np.real(np.vdot(V, problem.cost @ V)))


def riemannian_grad(problem, V):
    """Tangent gradient of f on the unit-row manifold.

    Euclidean gradient G = 2 C V, projected rowwise:
    h_k = g_k - Re<v_k, g_k> v_k, so Re<v_k, h_k> = 0.
    """
    G = 2.0 * (problem.cost @ V)
    lam = np.real(np.einsum("ij,ij->i", V.conj(), G))
    return G - lam[:, None] * V


def row_multipliers(problem, V):
    """Rowwise Lagrange multipliers Re<v_k, (C V)_k> of the unit-row constraints."""
    return np.real(np.einsum("ij,ij->i", V.conj(), problem.cost @ V))


def retract(V, H):
    """Row renormalization of V + H; zero rows map to the first basis direction."""
    W = V + H
    norms = np.linalg.norm(W, axis=1)
    zero = norms == 0.0
    if np.any(zero):
        W = W.copy()
        W[zero, :] = 0.0
        W[zero, 0] = 1.0
        norms = np.where(zero, 1.0, norms)
    return W / norms[:, None]


def random_factor(rng, n, p, field="complex"):
    """Factor with rows drawn uniformly on the unit sphere."""
    V = sample_gaussian(rng, n * p, field).reshape(n, p)
    return V / np.linalg.norm(V, axis=1)[:, None]


def opnorm_estimate(C, iters=30, rng=None):
    """Cheap spectral-norm estimate by power iteration on C* C (via C twice)."""
    if rng is None:
        rng = RngStream(0x09)
    field = "real" if np.isrealobj(C) else "complex"
    v = sample_gaussian(rng, C.shape[0], field)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = C.conj().T @ (C @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        est = math.sqrt(nw)
        v = w / nw
    return est


def riemannian_gd(problem, p, rng, step0=None, max_iter=20000, grad_tol=None, v0=None):
    """Riemannian gradient descent with Armijo backtracking on the factor.

    Starts from rows uniform on the sphere (or v0).  The first trial step is
    1/(2 ||C||_op estimate); later trial steps use the Barzilai-Borwein
    quotient <dV,dV>/<dV,dgrad> from the last accepted move, which adapts to
    the nearly flat valleys a rank-deficient optimum creates.  Every step is
    safeguarded by the Armijo test f(V') <= f(V) - 1e-4 t ||grad||^2 with
    halving, so the objective trace is non-increasing.  Stops when the
    Riemannian gradient Frobenius norm drops below grad_tol * N (grad_tol
    defaults to 1e-10 * the operator-norm estimate) or at max_iter.

    Returns (factor, report); report.estimate is None, the factor carries
    the result.
    """
    C = problem.cost
    N = problem.dim
    if not 1 <= p <= N:
        raise ValueError("need 1 <= p <= N")
    nrm = opnorm_estimate(C)
    if grad_tol is None:
        grad_tol = 1e-10 * max(nrm, 1e-300)
    threshold = grad_tol * N
    if step0 is None:
        step0 = 0.5 / max(nrm, 1e-300)
    V = random_factor(rng, N, p) if v0 is None else np.asarray(v0)

    def eval_point(X):
        # one C @ X product serves objective, multipliers and gradient
        W = C @ X
        fx = float(np.real(np.vdot(X, W)))
        lam = np.real(np.einsum("ij,ij->i", X.conj(), W))
        grad = 2.0 * (W - lam[:, None] * X)
        return fx, grad

    f, H = eval_point(V)
    trace = [f]
    V_prev = H_prev = None
    converged = False
    iterations = 0
    for _ in range(max_iter):
        gn2 = float(np.real(np.vdot(H, H)))
        if math.sqrt(gn2) < threshold:
            converged = True
            break
        if V_prev is None:
            t = step0
        else:
            dV = V - V_prev
            dH = H - H_prev
            denom = float(np.real(np.vdot(dV, dH)))
            t = float(np.real(np.vdot(dV, dV))) / denom if denom > 0 else step0
            t = min(max(t, 1e-3 * step0), 1e10 * step0)
        accepted = False
        for _ in range(60):
            Vc = retract(V, -t * H)
            fc, Hc = eval_point(Vc)
            if fc <= f - 1e-4 * t * gn2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break  # line search stalled at numerical floor
        V_prev, H_prev = V, H
        V, f, H = Vc, fc, Hc
        iterations += 1
        trace.append(f)
    report = SolveReport(
        estimate=None,
        rel_error_mod_phase=None,
        iterations=iterations,
        converged=converged,
        residual_trace=np.asarray([]),
        objective_trace=np.asarray(trace),
    )
    return V, report


def round_factor(problem, V, instance=None):
    """Rank-one rounding of a feasible factor.

    Takes the dominant eigenvector of V V* scaled by the square root of its
    eigenvalue (the top left singular pair of V), projects it to unit moduli,
    and for phase-retrieval problems lifts the phases back to signal space
    through a least-squares solve.
    """
    U, S, _ = np.linalg.svd(np.asarray(V), full_matrices=False)
    u = U[:, 0] * S[0]
    z = torus_project(u)
    if problem.provenance == "phasecut":
        inst = instance if instance is not None else problem.instance
        if inst is None:
            raise ValueError("phasecut rounding needs the originating instance")
        return least_squares(inst.matrix, inst.moduli * z)
    return z


def sosp_probe(problem, V, trials, rng, fd_tol=0.05):
    """Sampled check of the second-order criticality conditions at V.

    For random unit tangent directions H the Riemannian-Hessian quadratic
    form q(H) = 2 (Re Tr(H* C H) - sum_k lam_k ||h_k||^2) is evaluated and
    cross-validated against the second central difference of the objective
    along the retraction curve t -> retract(V, tH); disagreement beyond
    fd_tol relative raises FDInconsistent.  Records the minimum over trials.
    """
    V = np.asarray(V)
    C = problem.cost
    n, p = V.shape
    gnorm = float(np.linalg.norm(riemannian_grad(problem, V)))
    lam = row_multipliers(problem, V)
    scale_guard = 1e-8 * max(opnorm_estimate(C), 1e-300)

    def quadform(H):
        return 2.0 * (float(np.real(np.vdot(H, C @ H)))
                      - float(lam @ np.sum(np.abs(H) ** 2, axis=1)))

    def curve_second_diff(H, eps):
        f0 = objective(problem, V)
        fp = objective(problem, retract(V, eps * H))
        fm = objective(problem, retract(V, -eps * H))
        return (fp - 2.0 * f0 + fm) / eps ** 2

    field = "real" if np.isrealobj(V) and np.isrealobj(C) else "complex"
    qmin = math.inf
    for _ in range(trials):
        G = sample_gaussian(rng, n * p, field).reshape(n, p)
        H = G - np.real(np.einsum("ij,ij->i", V.conj(), G))[:, None] * V
        nh = float(np.linalg.norm(H))
        if nh == 0.0:
            continue
        H /= nh
        q = quadform(H)
        d1 = curve_second_diff(H, 1e-3)
        d2 = curve_second_diff(H, 5e-4)
        ref = (4.0 * d2 - d1) / 3.0
        if abs(q - ref) > fd_tol * max(abs(q), abs(ref), scale_guard):
            raise FDInconsistent(
                f"quadratic form {q:.6e} vs finite difference {ref:.6e}"
            )
        qmin = min(qmin, q)
    s = np.linalg.svd(V, compute_uv=False)
    rank = int(np.sum(s > 1e-8 * s[0])) if s.size else 0
    return SOSPCertificate(
        riemannian_grad_norm=gnorm,
        min_quadform=qmin,
        trials=trials,
        factor_rank=rank,
    )


def reference_rank(N):
    """Factor width making the rank-deficiency guarantee hold with margin."""
    return math.ceil(math.sqrt(2 * N)) + 1


def reference_sdp_solve(problem, rng, starts=3, max_iter=50000, grad_tol=None):
    """SDP-value oracle: high-rank factor descent with multi-starts.

    Uses p = ceil(sqrt(2N)) + 1 so that p(p+1)/2 > N (the number of affine
    constraints), the regime where spurious second-order critical points
    generically do not exist; returns the best (value, factor) over starts.
    """
    if problem.dim > 512:
        raise ValueError("reference solver limited to N <= 512")
    p = reference_rank(problem.dim)
    best = None
    for s in range(starts):
        V, rep = riemannian_gd(
            problem, p, rng.split(s), max_iter=max_iter, grad_tol=grad_tol
        )
        val = rep.objective_trace[-1]
        if best is None or val < best[0]:
            best = (float(val), V)
    return best


# --- raw problem import/export ------------------------------------------------

def sdp_to_dict(problem):
    c = np.asarray(problem.cost, dtype=complex)
    return {
        "type": "unit_diag_sdp",
        "dim": problem.dim,
        "cost": np.stack([c.real, c.imag], axis=-1).tolist(),
    }


def sdp_from_dict(d):
    if d["type"] != "unit_diag_sdp":
        raise ValueError(f"unknown problem type {d['type']!r}")
    a = np.asarray(d["cost"], dtype=float)
    cost = a[..., 0] + 1j * a[..., 1]
    if np.all(cost.imag == 0.0):
        cost = cost.real
    return UnitDiagSDP(int(d["dim"]), hermitize(cost), "raw", None)


def save_sdp(problem, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(sdp_to_dict(problem), f)


def load_sdp(path):
    with open(path, "r", encoding="utf-8") as f:
        return sdp_from_dict(json.load(f))
