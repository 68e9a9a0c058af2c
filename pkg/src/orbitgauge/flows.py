"""Diagonal flows and their expanding horospherical frames."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .lattice import LatticeBasis

log = logging.getLogger(__name__)

ZERO_SUM_TOL = 1e-12


@dataclass(frozen=True)
class FlowSpec:
    """One-parameter diagonal flow diag(e^(a_1 t), ..., e^(a_d t)), sum a_k = 0."""

    exponents: tuple[float, ...]

    def __post_init__(self):
        exps = tuple(float(a) for a in self.exponents)
        if abs(sum(exps)) > ZERO_SUM_TOL:
            raise PreconditionError(f"exponents must sum to zero, got {sum(exps)!r}")
        if not any(a > 0 for a in exps):
            raise PreconditionError("flow needs at least one positive exponent")
        object.__setattr__(self, "exponents", exps)

    @property
    def dim(self) -> int:
        return len(self.exponents)

    @staticmethod
    def standard(m: int, n: int) -> "FlowSpec":
        """diag(e^(nt), ..., e^(nt), e^(-mt), ..., e^(-mt)) with m + n entries."""
        return FlowSpec(tuple([float(n)] * m + [float(-m)] * n))

    @staticmethod
    def weighted(pos: list[float], neg: list[float]) -> "FlowSpec":
        return FlowSpec(tuple([float(a) for a in pos] + [-float(b) for b in neg]))

    def matrix(self, t: float) -> np.ndarray:
        return np.diag(np.exp(np.asarray(self.exponents) * t))


@dataclass(frozen=True)
class HorosphericalFrame:
    """Expanding block data: P = upper-right m x n unipotent block ~ R^(mn)."""

    m: int
    n: int
    entry_exponents: np.ndarray   # (m, n), lambda_kl = a_k - a_(m+l)
    lambda_min: float
    lambda_max: float
    delta: float
    flow: FlowSpec

    @property
    def p(self) -> int:
        return self.m * self.n

    def contraction_rates(self, t: float) -> np.ndarray:
        """Entrywise factors of conjugation h -> g_(-t) h g_t, flattened."""
        return np.exp(-self.entry_exponents.reshape(-1) * t)


def horospherical_frame(flow: FlowSpec, m: int, n: int) -> HorosphericalFrame:
    """Frame of the upper-right block for a flow in sorted block form.

    Requires the first m exponents positive and the last n negative; other
    orderings must be permuted into block form by the caller.
    """
    if m + n != flow.dim:
        raise PreconditionError("m + n must equal the flow dimension")
    a = flow.exponents
    if not (all(x > 0 for x in a[:m]) and all(x < 0 for x in a[m:])):
        raise PreconditionError(
            "exponents must be block-sorted (m positives then n negatives); "
            "permute coordinates first"
        )
    lam = np.empty((m, n))
    for k in range(m):
        for l in range(n):
            lam[k, l] = a[k] - a[m + l]
    return HorosphericalFrame(
        m=m,
        n=n,
        entry_exponents=lam,
        lambda_min=float(lam.min()),
        lambda_max=float(lam.max()),
        delta=float(lam.sum()),
        flow=flow,
    )


def shear_matrix(frame: HorosphericalFrame, coords: np.ndarray) -> np.ndarray:
    """Unipotent element of P from chart coordinates (length mn, row-major)."""
    m, n = frame.m, frame.n
    d = m + n
    g = np.eye(d)
    g[:m, m:] = np.asarray(coords, dtype=float).reshape(m, n)
    return g


def apply_flow(flow: FlowSpec, t: float, basis: LatticeBasis) -> LatticeBasis:
    """Left-multiply the basis by diag(e^(a_k t)); renormalize determinant drift."""
    if flow.dim != basis.dim:
        raise PreconditionError("flow dimension mismatch")
    mat = flow.matrix(t) @ basis.cols
    det = float(np.linalg.det(mat))
    if abs(det - 1.0) > 1e-9:
        log.warning("determinant drift %.3e under flow t=%s; renormalizing", det - 1.0, t)
        mat = mat / (det ** (1.0 / basis.dim))
    return LatticeBasis(mat)


def apply_flow_shear_batch(
    frame: HorosphericalFrame, t: float, coords: np.ndarray, basis: LatticeBasis
) -> np.ndarray:
    """Batch of g_t h(s) x bases for chart coordinates s (shape (k, mn)).

    Specialized to m = n = 1 with a fast closed form; general sizes assemble
    matrices per sample.
    """
    base = basis.cols
    if frame.m == 1 and frame.n == 1:
        s = np.asarray(coords, dtype=float).reshape(-1)
        et = math.exp(frame.flow.exponents[0] * t)
        emt = math.exp(frame.flow.exponents[1] * t)
        out = np.empty((s.shape[0], 2, 2))
        out[:, 0, 0] = et * (base[0, 0] + s * base[1, 0])
        out[:, 0, 1] = et * (base[0, 1] + s * base[1, 1])
        out[:, 1, 0] = emt * base[1, 0]
        out[:, 1, 1] = emt * base[1, 1]
        return out
    gt = frame.flow.matrix(t)
    mats = np.empty((coords.shape[0], base.shape[0], base.shape[1]))
    for i, s in enumerate(np.asarray(coords, dtype=float)):
        mats[i] = gt @ shear_matrix(frame, s) @ base
    return mats
