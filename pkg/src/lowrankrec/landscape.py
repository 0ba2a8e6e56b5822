"""Closed-form expected-landscape quantities for the quartic phase retrieval
loss, empirical curvature probes, the one-step displacement experiment and
attraction-basin maps for alternating projections."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FDInconsistent, MissingGroundTruth
from .numerics import qr_projector, solve_from_qr
from .phase_retrieval import wf_loss
from .problems import dist_mod_phase


def expected_loss(x, x_s):
    """E f(x) = ||x||^4 - ||x||^2 ||x_s||^2 - |<x,x_s>|^2 + ||x_s||^4.

    Expectation of the quartic loss over a single complex normal measurement
    vector with E|<u,v>|^2 = ||u||^2.
    """
    nx2 = float(np.real(np.vdot(x, x)))
    ns2 = float(np.real(np.vdot(x_s, x_s)))
    ip = abs(complex(np.vdot(x_s, x)))
    return nx2 ** 2 - nx2 * ns2 - ip ** 2 + ns2 ** 2


def expected_grad(x, x_s):
    """Gradient of the expected loss: 2((2||x||^2 - ||x_s||^2) x - <x_s,x> x_s)."""
    x = np.asarray(x)
    x_s = np.asarray(x_s)
    nx2 = np.real(np.vdot(x, x))
    ns2 = np.real(np.vdot(x_s, x_s))
    return 2.0 * ((2.0 * nx2 - ns2) * x - np.vdot(x_s, x) * x_s)


def expected_hess_form(x, x_s, h):
    """Quadratic form of the expected-loss Hessian along h.

    2((2||x||^2 - ||x_s||^2)||h||^2 + 4 Re^2 <x,h> - |<x_s,h>|^2); equals the
    second derivative of t -> expected_loss(x + t h) at t = 0.
    """
    nx2 = float(np.real(np.vdot(x, x)))
    ns2 = float(np.real(np.vdot(x_s, x_s)))
    nh2 = float(np.real(np.vdot(h, h)))
    re_xh = float(np.real(np.vdot(x, h)))
    ip_sh = abs(complex(np.vdot(x_s, h)))
    return 2.0 * ((2.0 * nx2 - ns2) * nh2 + 4.0 * re_xh ** 2 - ip_sh ** 2)


@dataclass(frozen=True)
class CriticalClass:
    """Which expected-landscape critical set a point belongs to.

    tag: "solution" (the global minimizers), "origin" (the strict local
    maximum at 0), "ring" (the orthogonal saddle circle at radius
    ||x_s||/sqrt(2)), or "none".
    """

    tag: str
    tol: float


def classify_critical(x, x_s, tol=1e-8):
    """Classify x against the three expected-landscape critical sets.

    Checked in priority order: solution (distance mod phase), origin (norm),
    ring (orthogonality to x_s and radius ||x_s||/sqrt(2)).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    ns = float(np.linalg.norm(x_s))
    if dist_mod_phase(x, x_s) <= tol * ns:
        return CriticalClass("solution", tol)
    nx = float(np.linalg.norm(x))
    if nx <= tol * ns:
        return CriticalClass("origin", tol)
    if abs(complex(np.vdot(x_s, x))) <= tol * ns ** 2 and abs(nx - ns / math.sqrt(2.0)) <= tol * ns:
        return CriticalClass("ring", tol)
    return CriticalClass("none", tol)


def curvature_probe(instance, x, tol_fd=0.05):
    """Empirical second directional derivative of the sample loss along x_true.

    Central differences at two step sizes; the two estimates must agree to
    tol_fd relative or FDInconsistent is raised.  Returns the smaller-step
    estimate.  Concentrates, for x on the orthogonal ring, towards
    -2 ||x_true||^4 as the number of measurements grows.
    """
    if instance.x_true is None:
        raise MissingGroundTruth("curvature probe requires a ground-truth signal")
    x_s = instance.x_true
    x = np.asarray(x)
    ns = float(np.linalg.norm(x_s))
    base = 1e-2 * max(1.0, float(np.linalg.norm(x)) / max(ns, 1e-300))

    def second_diff(eps):
        f_p = wf_loss(instance, x + eps * x_s)
        f_m = wf_loss(instance, x - eps * x_s)
        f_0 = wf_loss(instance, x)
        return (f_p - 2.0 * f_0 + f_m) / eps ** 2

    d1 = second_diff(base)
    d2 = second_diff(base / 2.0)
    scale = max(abs(d1), abs(d2), 1e-12 * ns ** 4)
    if abs(d1 - d2) > tol_fd * scale:
        raise FDInconsistent(
            f"second-difference estimates disagree: {d1:.6e} vs {d2:.6e}"
        )
    return d2


def _unit_columns(a):
    return a / np.linalg.norm(a, axis=0, keepdims=True)


def displacement_probe(algorithm, instance, d, pairs, rng):
    """Mean one-step displacement E ||T(z) - T(z')|| over random close pairs.

    z is uniform on the unit sphere; z' = normalize(z + d w) for a random unit
    tangent direction w, rescaled along the chord so that ||z - z'|| = d
    exactly.  T is one alternating-projections step mapped to signal space or
    one Wirtinger Flow step with mu = 0.1 / mean(b^2).  The instance is
    rescaled so the ground-truth signal has unit norm, putting the probe
    sphere at the scale where the dynamics live.
    """
    if instance.field != "real":
        raise ValueError("displacement probe is defined for real-field instances")
    if not 0.0 < d < 2.0:
        raise ValueError("d must lie in (0, 2)")
    if instance.x_true is None:
        raise MissingGroundTruth("displacement probe requires a ground-truth signal")
    B = instance.matrix
    s = float(np.linalg.norm(instance.x_true))
    b = instance.moduli / s
    n, m = instance.n, instance.m

    g = rng.generator
    Z = _unit_columns(g.standard_normal((n, pairs)))
    Wd = g.standard_normal((n, pairs))
    Wd -= Z * np.einsum("ij,ij->j", Z, Wd)[None, :]
    Wd = _unit_columns(Wd)
    U = _unit_columns(Z + d * Wd)
    Zp = Z + d * _unit_columns(U - Z)

    if algorithm == "AP":
        q, r = qr_projector(B)

        def T(X):
            Y = B @ X
            A = np.abs(Y)
            P = b[:, None] * np.where(A > 0, Y / np.where(A > 0, A, 1.0), 1.0)
            return solve_from_qr(q, r, P)

    elif algorithm == "WF":
        mu = 0.1 / float(np.mean(b ** 2))

        def T(X):
            Y = B @ X
            R = np.abs(Y) ** 2 - (b ** 2)[:, None]
            return X - mu * (B.T @ (R * Y)) / m

    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")

    disp = np.linalg.norm(T(Z) - T(Zp), axis=0)
    return float(disp.mean())


def basin_map(instance, center, dirs, half_width, grid, rng=None,
              max_iter=2000, tol=1e-10, merge_scale=1e-4):
    """Attraction-basin labels of alternating projections on an affine 2-plane.

    Each grid point p (the plane center + span(dirs) restricted to the square
    of the given half width) starts one run at y0 = B p; limits are clustered
    by pairwise distance modulo phase with merge radius merge_scale *
    ||x_true||.  Label 0 is reserved for the cluster containing the solution;
    the other clusters are numbered in order of first appearance.

    Returns an integer (grid x grid) label array, rows indexing dirs[0].
    """
    if instance.field != "real":
        raise ValueError("basin map is defined for real-field instances")
    if instance.x_true is None:
        raise MissingGroundTruth("basin map requires a ground-truth signal")
    d1, d2 = np.asarray(dirs[0]), np.asarray(dirs[1])
    B = instance.matrix
    b = instance.moduli
    q, r = qr_projector(B)
    ticks = np.linspace(-half_width, half_width, grid)
    A1, A2 = np.meshgrid(ticks, ticks, indexing="ij")
    P = (np.asarray(center)[:, None]
         + d1[:, None] * A1.ravel()[None, :]
         + d2[:, None] * A2.ravel()[None, :])
    K = P.shape[1]

    Y = q @ (q.T @ (B @ P))  # start in-range: y0 = projection of B p
    active = np.ones(K, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ya = Y[:, idx]
        Aabs = np.abs(Ya)
        Pm = b[:, None] * np.where(Aabs > 0, Ya / np.where(Aabs > 0, Aabs, 1.0), 1.0)
        Yn = q @ (q.T @ Pm)
        change = np.linalg.norm(Yn - Ya, axis=0)
        norms = np.maximum(np.linalg.norm(Yn, axis=0), 1e-300)
        Y[:, idx] = Yn
        active[idx] = change > tol * norms

    X = solve_from_qr(q, r, Y)

    radius = merge_scale * float(np.linalg.norm(instance.x_true))
    reps = []
    labels = np.empty(K, dtype=int)
    for j in range(K):
        x = X[:, j]
        lab = -1
        if reps:
            Rp = np.stack(reps, axis=1)
            nx2 = float(x @ x)
            d2c = nx2 + np.einsum("ij,ij->j", Rp, Rp) - 2.0 * np.abs(x @ Rp)
            k = int(np.argmin(d2c))
            if d2c[k] <= radius ** 2:
                lab = k
        if lab < 0:
            reps.append(x)
            lab = len(reps) - 1
        labels[j] = lab

    # reserve label 0 for the cluster holding the solution
    sol = -1
    for k, rep in enumerate(reps):
        if dist_mod_phase(rep, instance.x_true) <= radius:
            sol = k
            break
    out = np.empty(K, dtype=int)
    if sol < 0:
        out[:] = labels + 1  # no solution cluster observed; 0 stays unused
    else:
        remap = {sol: 0}
        nxt = 1
        for k in range(len(reps)):
            if k != sol:
                remap[k] = nxt
                nxt += 1
        out[:] = [remap[v] for v in labels]
    return out.reshape(grid, grid)
