"""Solvers for the symmetric indefinite saddle-point system."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import MixedSystem
from .exceptions import NonConvergence, SingularSystem

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
BACKENDS = ("direct", "minres")


@dataclass(frozen=True)
class MixedSolution:
    flux_coefficients: np.ndarray
    scalar_values: np.ndarray
    residual_norm: float  # relative: |r| / |rhs|
    backend: str = "direct"


def _relative_residual(K, x, rhs) -> float:
    r = rhs - K @ x
    scale = np.linalg.norm(rhs)
    return float(np.linalg.norm(r) / scale) if scale > 0 else float(np.linalg.norm(r))


def _direct(K, rhs):
    try:
        lu = spla.splu(K.tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SingularSystem(str(exc)) from exc
    x = lu.solve(rhs)
    # one step of iterative refinement tightens the residual for high contrasts
    x += lu.solve(rhs - K @ x)
    return x


def _minres(system: MixedSystem, K, rhs, tol: float, maxiter: int):
    """MINRES with the block-diagonal preconditioner diag(diag(A), B diag(A)^-1 B^T)."""
    A, B = system.A, system.B
    dA = A.diagonal()
    if np.any(dA <= 0):
        raise SingularSystem("flux mass matrix has a non-positive diagonal")
    S = (B @ sp.diags(1.0 / dA) @ B.T).tocsc()
    S_lu = spla.splu(S)
    n = A.shape[0]

    def apply(v):
        out = np.empty_like(v)
        out[:n] = v[:n] / dA
        out[n:] = S_lu.solve(v[n:])
        return out

    M = spla.LinearOperator(K.shape, matvec=apply, dtype=float)
    x = np.zeros_like(rhs)
    for _ in range(8):
        r = rhs - K @ x
        if np.linalg.norm(r) <= tol * np.linalg.norm(rhs):
            break
        dx, info = spla.minres(K, r, M=M, rtol=1e-14, maxiter=maxiter)
        if info < 0:
            raise NonConvergence(f"minres breakdown (info={info})")
        x += dx
    return x


def solve(system: MixedSystem, backend: str = "direct", tol: float = RESIDUAL_TOL,
          maxiter: int = 20000) -> MixedSolution:
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}")
    K = system.matrix()
    rhs = system.rhs()
    n = system.A.shape[0]
    if not np.any(rhs):
        return MixedSolution(np.zeros(n), np.zeros(system.B.shape[0]), 0.0, backend)
    x = _direct(K, rhs) if backend == "direct" else _minres(system, K, rhs, tol, maxiter)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("solution contains non-finite values")
    res = _relative_residual(K, x, rhs)
    log.debug("%s solve: n=%d, relative residual %.2e", backend, K.shape[0], res)
    if res > tol:
        if backend == "direct":
            raise SingularSystem(f"relative residual {res:.3e} exceeds {tol:.0e}")
        raise NonConvergence(f"relative residual {res:.3e} exceeds {tol:.0e} after {maxiter} iterations")
    return MixedSolution(x[:n], x[n:], res, backend)
