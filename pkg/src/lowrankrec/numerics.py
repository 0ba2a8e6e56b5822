"""Dense real/complex linear-algebra kernels and seeded random sampling.

Hermitian matrices are stored as plain ndarrays (real symmetric or complex
Hermitian); builders in this package enforce the symmetry exactly, and
`hermitize` is available to restore it after a lossy computation.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NonConvergence, NumericFailure, RankDeficient


class RngStream:
    """Reproducible random stream with deterministic splitting.

    A stream is identified by a 64-bit seed plus a split path (a tuple of
    integers).  Identical (seed, path) yield identical sample sequences:
    the state is a PCG64 bit generator keyed through numpy's SeedSequence,
    both fixed, documented algorithms.  Parallel trials must use disjoint
    splits, never a shared stream.
    """

    def __init__(self, seed, path=()):
        self.seed = int(seed)
        self.path = tuple(int(i) for i in path)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.path))
        )

    def split(self, *indices):
        """Child stream at path + indices, independent of the parent."""
        return RngStream(self.seed, self.path + tuple(indices))

    @property
    def generator(self):
        return self._gen

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"


def sample_gaussian(rng, n, field="complex"):
    """i.i.d. Gaussian n-vector.

    real: standard normal entries.  complex: independent N(0, 1/2) real and
    imaginary parts, so E|entry|^2 = 1.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = rng.generator
    if field == "real":
        return g.standard_normal(n)
    if field == "complex":
        re = g.standard_normal(n)
        im = g.standard_normal(n)
        return (re + 1j * im) / math.sqrt(2.0)
    raise ValueError(f"unknown field {field!r}")


def hermitize(a):
    """Exactly Hermitian part (a + a*)/2; also zeroes the diagonal imag part."""
    return (a + a.conj().T) / 2.0


def is_hermitian(a, tol=0.0):
    return np.all(np.abs(a - a.conj().T) <= tol)


def _shifted_power(H, shift, sign, v0, tol, max_iter):
    """Power iteration on sign*H + shift*I (shift >= spectral radius).

    Returns (eigenvalue of H, vector, residual, converged).  The residual of
    the shifted operator equals ||Hv - lam v||, so the tolerance check is the
    caller-facing contract tol*(1+|lam|) on the original matrix.
    """
    v = v0 / np.linalg.norm(v0)
    lam = 0.0
    res = np.inf
    for _ in range(max_iter):
        w = sign * (H @ v) + shift * v
        lam_s = float(np.real(np.vdot(v, w)))
        lam = sign * (lam_s - shift)
        res = float(np.linalg.norm(w - lam_s * v))
        if res <= tol * (1.0 + abs(lam)):
            return lam, v, res, True
        nw = np.linalg.norm(w)
        if nw == 0.0:
            # v is in the kernel of the shifted operator, an exact eigenvector
            return sign * (0.0 - shift), v, 0.0, True
        v = w / nw
    return lam, v, res, False


def dominant_eigenvector(H, tol=1e-10, max_iter=20000, rng=None, assume_top=False):
    """Eigenpair of largest absolute eigenvalue of a Hermitian matrix.

    Power iteration on the positively shifted matrix H + sI finds the top
    algebraic eigenvalue; a second run on sI - H finds the bottom one; the
    pair with the larger |eigenvalue| wins.  For matrices whose top algebraic
    eigenvalue is known to dominate in modulus (z z* + W observations,
    moduli-weighted covariances) pass assume_top=True to skip the second run.

    Returns (eigenvalue, unit vector) with ||Hv - lam v|| <= tol*(1+|lam|).
    Raises NonConvergence if the winning side missed the tolerance.
    """
    H = np.asarray(H)
    n = H.shape[0]
    if n < 1:
        raise ValueError("empty matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if rng is None:
        rng = RngStream(0x5EED)
    field = "real" if np.isrealobj(H) else "complex"
    v0 = sample_gaussian(rng, n, field)

    shift = float(np.abs(H).sum(axis=1).max())  # >= spectral radius
    if shift == 0.0:
        v = v0 / np.linalg.norm(v0)
        return 0.0, v

    lam, v, res, ok = _shifted_power(H, shift, +1, v0, tol, max_iter)
    if not assume_top:
        lam_lo, v_lo, res_lo, ok_lo = _shifted_power(H, shift, -1, v0, tol, max_iter)
        if abs(lam_lo) > abs(lam):
            lam, v, res, ok = lam_lo, v_lo, res_lo, ok_lo
    if not ok:
        raise NonConvergence(
            f"power iteration residual {res:.3e} above tol after {max_iter} iterations"
        )
    return lam, v


def hermitian_eigen(H):
    """Full eigendecomposition H = Q diag(w) Q* with w ascending.

    Dense algorithm (LAPACK); intended for n <= 2048.
    """
    H = np.asarray(H)
    n = H.shape[0]
    if n > 2048:
        raise ValueError("dense eigendecomposition limited to n <= 2048")
    try:
        w, q = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(str(exc)) from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(q))):
        raise NumericFailure("non-finite eigendecomposition output")
    return w, q


RANK_TOL = 1e-12


def least_squares(B, y):
    """Minimum of ||Bx - y|| for a full-column-rank B (m >= n).

    Raises RankDeficient when the smallest singular value is not above
    RANK_TOL times the largest (m < n always fails this test).
    """
    B = np.asarray(B)
    y = np.asarray(y)
    x, _, rank, s = np.linalg.lstsq(B, y, rcond=None)
    if s.size == 0 or B.shape[0] < B.shape[1] or s[-1] <= RANK_TOL * s[0]:
        raise RankDeficient(
            f"matrix of shape {B.shape} is rank deficient (singular values {s[:3]}...)"
        )
    return x


def qr_projector(B):
    """Thin QR of a full-column-rank B; Q Q* projects onto Range(B).

    Used by the iterative solvers so the projection is factored once.
    """
    B = np.asarray(B)
    m, n = B.shape
    q, r = np.linalg.qr(B)
    d = np.abs(np.diag(r))
    if m < n or d.size == 0 or d.min() <= RANK_TOL * max(d.max(), 1e-300):
        raise RankDeficient(f"matrix of shape {B.shape} is rank deficient")
    return q, r


def solve_from_qr(q, r, y):
    """x with B x = Q Q* y, given the thin QR of B (columns of y allowed)."""
    return np.linalg.solve(r, q.conj().T @ y)
