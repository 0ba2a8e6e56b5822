"""Instance generators and metrics for phase retrieval and phase synchronization.

Serialization format (JSON, documented field names, complex matrices as
nested arrays of [re, im] pairs):

  phase retrieval: {"type": "phase_retrieval", "kind": ..., "field": ...,
                    "n": ..., "m": ..., "matrix": [[[re, im], ...], ...],
                    "moduli": [...], "signal": [[re, im], ...] | null}
  synchronization: {"type": "phase_sync", "n": ..., "sigma": ...,
                    "observations": pairs, "truth": pairs, "noise": pairs}
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InvalidDimension, MissingGroundTruth
from .numerics import RngStream, hermitize, sample_gaussian

ENSEMBLE_KINDS = ("complex-gaussian", "real-gaussian", "structured-frame")


@dataclass(frozen=True)
class MeasurementEnsemble:
    """Measurement matrix B whose k-th row pairs against the signal: (Bx)_k = <x, v_k>."""

    kind: str
    matrix: np.ndarray  # m x n

    @property
    def m(self):
        return self.matrix.shape[0]

    @property
    def n(self):
        return self.matrix.shape[1]


@dataclass(frozen=True)
class PhaseRetrievalInstance:
    ensemble: MeasurementEnsemble
    moduli: np.ndarray            # b >= 0, length m
    x_true: np.ndarray | None     # ground-truth signal, optional
    field: str                    # "real" | "complex"

    @property
    def matrix(self):
        return self.ensemble.matrix

    @property
    def n(self):
        return self.ensemble.n

    @property
    def m(self):
        return self.ensemble.m


@dataclass(frozen=True)
class SyncInstance:
    observations: np.ndarray      # C = z z* + W, Hermitian, unit diagonal
    z_true: np.ndarray            # unit-modulus entries
    sigma: float
    noise: np.ndarray             # W, Hermitian, zero diagonal (kept for diagnostics)

    @property
    def n(self):
        return self.z_true.shape[0]


@dataclass
class SolveReport:
    """Common output record of the iterative solvers."""

    estimate: np.ndarray | None
    rel_error_mod_phase: float | None
    iterations: int
    converged: bool
    residual_trace: np.ndarray
    objective_trace: np.ndarray | None = None
    extras: dict = dc_field(default_factory=dict)


def haar_frame(n, m):
    """Deterministic structured frame with m unit-norm rows (n a power of two).

    Base system: the constant vector plus, for each dyadic scale and shift,
    the vector supported on one dyadic block with +1 on its first half and
    -1 on its second, unit-normalized.  The n base rows are cycled with a
    per-repeat diagonal phase modulation exp(2i*pi*k*r/n) (repeat index r)
    until m rows exist.  Mixes strongly correlated and near-orthogonal rows.
    """
    if n < 1 or (n & (n - 1)) != 0:
        raise InvalidDimension(f"structured-frame requires n a power of two, got {n}")
    base = np.zeros((n, n))
    base[0] = 1.0 / math.sqrt(n)
    row = 1
    length = n
    while length >= 2:
        half = length // 2
        for start in range(0, n, length):
            base[row, start:start + half] = 1.0
            base[row, start + half:start + length] = -1.0
            base[row] /= math.sqrt(length)
            row += 1
        length //= 2
    assert row == n
    k = np.arange(n)
    rows = np.empty((m, n), dtype=complex)
    for i in range(m):
        r, j = divmod(i, n)
        rows[i] = base[j] * np.exp(2j * np.pi * k * r / n)
    return rows


def gen_phase_retrieval(n, m, kind="complex-gaussian", rng=None):
    """Instance with Gaussian signal and exact moduli b_k = |<x_true, v_k>|."""
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    if kind not in ENSEMBLE_KINDS:
        raise ValueError(f"unknown ensemble kind {kind!r}")
    if rng is None:
        rng = RngStream(0)
    if kind == "real-gaussian":
        field = "real"
        B = sample_gaussian(rng, m * n, "real").reshape(m, n)
    elif kind == "complex-gaussian":
        field = "complex"
        B = sample_gaussian(rng, m * n, "complex").reshape(m, n)
    else:
        field = "complex"
        B = haar_frame(n, m)
    x_true = sample_gaussian(rng, n, field)
    b = np.abs(B @ x_true)
    return PhaseRetrievalInstance(MeasurementEnsemble(kind, B), b, x_true, field)


def gen_sync(n, sigma, rng=None):
    """Noisy rank-one synchronization instance C = z z* + W.

    z has i.i.d. uniform phases; the strict upper triangle of W holds i.i.d.
    complex normals with E|w|^2 = sigma^2, the diagonal is zero and the lower
    triangle mirrors by conjugation, so C is exactly Hermitian with unit
    diagonal.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if rng is None:
        rng = RngStream(0)
    theta = rng.generator.random(n) * 2.0 * np.pi
    z = np.exp(1j * theta)
    W = np.zeros((n, n), dtype=complex)
    if sigma > 0:
        iu = np.triu_indices(n, k=1)
        W[iu] = sigma * sample_gaussian(rng, len(iu[0]), "complex")
        W = W + W.conj().T
    C = hermitize(np.outer(z, z.conj())) + W
    np.fill_diagonal(C, 1.0)
    return SyncInstance(C, z, float(sigma), W)


def dist_mod_phase(u, v, field=None):
    """Distance modulo a global phase: inf_a ||u - e^{ia} v||.

    Closed form sqrt(max(0, ||u||^2 + ||v||^2 - 2|<u,v>|)).  For real-valued
    inputs the infimum over a in {0, pi} (sign ambiguity) coincides with the
    same formula, so the field is inferred from the dtypes unless forced.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ValueError("length mismatch")
    w = complex(np.vdot(u, v))
    if field == "real" and (np.iscomplexobj(u) or np.iscomplexobj(v)):
        w = complex(w.real)
    if w == 0:
        return math.sqrt(max(0.0, float(np.real(np.vdot(u, u)) + np.real(np.vdot(v, v)))))
    # align at the optimal phase and measure directly (avoids cancellation)
    phase = w.conjugate() / abs(w)
    if np.iscomplexobj(u) or np.iscomplexobj(v):
        return float(np.linalg.norm(u - phase * v))
    return float(np.linalg.norm(u - phase.real * v))


def rel_error_mod_phase(estimate, truth, field=None):
    return dist_mod_phase(estimate, truth, field) / np.linalg.norm(truth)


def success(report, tau=1e-3):
    """True iff the report's relative error modulo phase is below tau."""
    if report.rel_error_mod_phase is None:
        raise MissingGroundTruth("report carries no ground-truth error")
    return report.rel_error_mod_phase < tau


# --- serialization -----------------------------------------------------------

def _c2pairs(a):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _pairs2c(data):
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def instance_to_dict(instance):
    if isinstance(instance, PhaseRetrievalInstance):
        return {
            "type": "phase_retrieval",
            "kind": instance.ensemble.kind,
            "field": instance.field,
            "n": instance.n,
            "m": instance.m,
            "matrix": _c2pairs(instance.matrix),
            "moduli": np.asarray(instance.moduli, dtype=float).tolist(),
            "signal": None if instance.x_true is None else _c2pairs(instance.x_true),
        }
    if isinstance(instance, SyncInstance):
        return {
            "type": "phase_sync",
            "n": instance.n,
            "sigma": instance.sigma,
            "observations": _c2pairs(instance.observations),
            "truth": _c2pairs(instance.z_true),
            "noise": _c2pairs(instance.noise),
        }
    raise TypeError(f"cannot serialize {type(instance)!r}")


def instance_from_dict(d):
    if d["type"] == "phase_retrieval":
        B = _pairs2c(d["matrix"])
        field = d["field"]
        if field == "real":
            B = B.real
        sig = d.get("signal")
        x = None if sig is None else _pairs2c(sig)
        if x is not None and field == "real":
            x = x.real
        return PhaseRetrievalInstance(
            MeasurementEnsemble(d["kind"], B),
            np.asarray(d["moduli"], dtype=float),
            x,
            field,
        )
    if d["type"] == "phase_sync":
        return SyncInstance(
            _pairs2c(d["observations"]),
            _pairs2c(d["truth"]),
            float(d["sigma"]),
            _pairs2c(d["noise"]),
        )
    raise ValueError(f"unknown instance type {d['type']!r}")


def save_instance(instance, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(instance_to_dict(instance), f)


def load_instance(path):
    with open(path, "r", encoding="utf-8") as f:
        return instance_from_dict(json.load(f))
