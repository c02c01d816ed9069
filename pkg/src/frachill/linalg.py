"""Matrix-free preconditioned conjugate gradients on grid fields."""
from __future__ import annotations

import math

import numpy as np


class SolverFailure(RuntimeError):
    """An iterative solver hit its iteration cap; ``history`` holds residual norms."""

    def __init__(self, message, history=None, step=None):
        super().__init__(message)
        self.history = list(history or [])
        self.step = step


def pcg(matvec, rhs, precond, tol=1e-12, maxiter=500, x0=None, atol=0.0):
    """Solve ``M x = rhs`` for SPD ``M`` given as a callable.

    Stops when the true residual satisfies ``||r|| <= max(tol ||rhs||, atol)``
    (Euclidean norms on the grid values).  The default is purely relative, which
    matters for the tiny right-hand sides of nested Newton solves.  Returns
    ``(x, iterations, history)``.
    """
    bnorm = float(np.linalg.norm(rhs))
    if bnorm == 0.0 and x0 is None:
        return np.zeros_like(rhs, dtype=float), 0, [0.0]
    target = max(tol * bnorm, atol)
    # copy: a preconditioner may return its argument, and x is updated in place
    x = np.array(precond(rhs) if x0 is None else x0, dtype=float, copy=True)
    r = rhs - matvec(x)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    if rnorm <= target:
        return x, 0, history
    z = precond(r)
    p = z.copy()
    rz = float(np.vdot(r, z))
    for it in range(1, maxiter + 1):
        q = matvec(p)
        pq = float(np.vdot(p, q))
        if pq <= 0 or not math.isfinite(pq):
            raise SolverFailure(f"operator not positive definite (p.Mp = {pq})", history)
        a = rz / pq
        x += a * p
        r -= a * q
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
        if rnorm <= target:
            # confirm against the true residual; recurrence drift is possible
            r = rhs - matvec(x)
            rnorm = float(np.linalg.norm(r))
            history[-1] = rnorm
            if rnorm <= target:
                return x, it, history
        z = precond(r)
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverFailure(f"PCG did not reach {target:.3e} in {maxiter} iterations "
                        f"(last residual {rnorm:.3e})", history)
