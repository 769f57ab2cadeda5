"""Augmented system and the Riccati equation of the optimal centralized design.

With ``xi(k) = u(k) + w(k)`` and the new input ``v(k) = u(k+1) - D u(k)`` the
plant becomes::

    [x; xi](k+1) = [[A, B], [0, D]] [x; xi](k) + [[0], [I]] v(k)

and the cost is the sum of ``|x|^2 + |xi|^2`` with no penalty on ``v``.  The
optimal feedback ``v = G1 x + G2 xi`` comes from the positive definite
solution of::

    At' X Bt (Bt' X Bt)^-1 Bt' X At - At' X At + X - I = 0
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Plant


class DareConvergenceError(RuntimeError):
    pass


class DareSingularError(RuntimeError):
    pass


class NilpotencyError(ValueError):
    pass


@dataclass(frozen=True)
class AugmentedSystem:
    A_tilde: np.ndarray
    B_tilde: np.ndarray

    @property
    def n(self) -> int:
        return self.B_tilde.shape[1]


@dataclass(frozen=True)
class DareSolution:
    X: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    residual: float
    iterations: int

    @property
    def n(self) -> int:
        return self.G1.shape[0]

    @property
    def X11(self):
        return self.X[: self.n, : self.n]

    @property
    def X12(self):
        return self.X[: self.n, self.n:]

    @property
    def X22(self):
        return self.X[self.n:, self.n:]


def build_augmented(p: Plant) -> AugmentedSystem:
    n = p.n
    At = np.zeros((2 * n, 2 * n))
    At[:n, :n] = p.A
    At[:n, n:] = np.diag(p.b_diag)
    At[n:, n:] = np.diag(p.d_diag)
    Bt = np.zeros((2 * n, n))
    Bt[n:, :] = np.eye(n)
    return AugmentedSystem(At, Bt)


def is_controllable(aug: AugmentedSystem, tol: float | None = None) -> bool:
    """PBH test: ``[At - lam I, Bt]`` has full row rank at every eigenvalue of ``At``."""
    At, Bt = aug.A_tilde, aug.B_tilde
    N = At.shape[0]
    for lam in np.linalg.eigvals(At):
        M = np.hstack([At - lam * np.eye(N), Bt])
        if np.linalg.matrix_rank(M, tol=tol) < N:
            return False
    return True


# Extended precision is used for a final polish of X and for the residual.
# On platforms where longdouble is plain double this is a harmless no-op.
_LD = np.longdouble
_STALL_WINDOW = 50


def _inv_refined(M):
    Y = np.linalg.inv(np.asarray(M, dtype=float)).astype(M.dtype)
    eye = np.eye(M.shape[0], dtype=M.dtype)
    for _ in range(3):
        Y = Y + Y @ (eye - M @ Y)
    return Y


def _riccati_step(X, At, Bt):
    XB = X @ Bt
    K = XB.T @ At
    Xn = At.T @ X @ At - K.T @ _inv_refined(Bt.T @ XB) @ K + np.eye(X.shape[0], dtype=X.dtype)
    return (Xn + Xn.T) / 2


def dare_residual(X, aug: AugmentedSystem) -> float:
    """Frobenius norm of the Riccati residual, evaluated in extended precision."""
    X = np.asarray(X, dtype=_LD)
    At = aug.A_tilde.astype(_LD)
    Bt = aug.B_tilde.astype(_LD)
    XB = X @ Bt
    K = XB.T @ At
    R = K.T @ _inv_refined(Bt.T @ XB) @ K - At.T @ X @ At + X - np.eye(X.shape[0], dtype=_LD)
    return float(np.sqrt(np.sum(R * R)))


def gains(X, aug: AugmentedSystem):
    """``[G1 G2] = -(Bt' X Bt)^-1 Bt' X At``."""
    n = aug.n
    Bt, At = aug.B_tilde, aug.A_tilde
    G = -np.linalg.solve(Bt.T @ X @ Bt, Bt.T @ X @ At)
    return G[:, :n], G[:, n:]


def solve_dare(aug: AugmentedSystem, tol: float = 1e-12, max_iter: int = 100_000,
               polish: int = 6) -> DareSolution:
    """Value iteration from ``X = I`` with symmetrization at every step.

    Stops when ``|X_{k+1} - X_k|_F <= tol * max(1, |X_k|_F)``, or when the step
    is below ``sqrt(tol)`` times that scale and has not decreased for 50
    iterations (the float64 rounding floor).  Then runs ``polish`` extra steps in extended precision so the residual sits at the
    rounding level of ``X`` rather than at the stopping tolerance.
    """
    if not tol >= 0:
        raise ValueError(f"tol must be nonnegative, got {tol!r}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be positive, got {max_iter!r}")
    At, Bt = aug.A_tilde, aug.B_tilde
    N = At.shape[0]
    X = np.eye(N)
    best, since_best = np.inf, 0
    for it in range(1, max_iter + 1):
        S = Bt.T @ X @ Bt
        if np.linalg.cond(S) > 1e14:
            raise DareSingularError(f"Bt' X Bt is numerically singular at iteration {it}")
        X_new = _riccati_step(X, At, Bt)
        if not np.all(np.isfinite(X_new)):
            raise DareConvergenceError(f"iterate became non-finite at iteration {it}")
        step = np.linalg.norm(X_new - X)
        scale = max(1.0, np.linalg.norm(X))
        converged = step <= tol * scale
        # for large X the float64 rounding floor can sit above tol; accept a step
        # that is already small and has stopped shrinking
        if step < best:
            best, since_best = step, 0
        else:
            since_best += 1
        converged = converged or (step <= np.sqrt(tol) * scale and since_best >= _STALL_WINDOW)
        X = X_new
        if converged:
            break
    else:
        raise DareConvergenceError(
            f"value iteration did not converge in {max_iter} iterations (last step {step:.3e})")

    if polish:
        Xl = X.astype(_LD)
        Atl, Btl = At.astype(_LD), Bt.astype(_LD)
        for _ in range(polish):
            Xl = _riccati_step(Xl, Atl, Btl)
        X = Xl.astype(float)
        X = (X + X.T) / 2
    G1, G2 = gains(X, aug)
    return DareSolution(X=X, G1=G1, G2=G2, residual=dare_residual(X, aug), iterations=it)


def closed_form_blockers(A, b_diag, tol: float = 1e-12) -> list[str]:
    """Reasons the nilpotent closed form does not apply (empty list if it does).

    Besides ``A @ A == 0`` the closed form needs ``A @ diag(c) @ A == 0`` for
    ``c = b^2 / (1 + b^2)``.  Both hold whenever the sparsity graph of ``A``
    has no walk of length two, e.g. every plant whose graph only has edges from
    non-sinks into self-loop-free sinks.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b_diag, dtype=float)
    scale = tol * max(1.0, np.linalg.norm(A) ** 2)
    reasons = []
    if np.linalg.norm(A @ A) > scale:
        reasons.append("A not nilpotent of degree 2")
    c = b * b / (1.0 + b * b)
    if np.linalg.norm(A @ (c[:, None] * A)) > scale:
        reasons.append("closed form requires A diag(b^2/(1+b^2)) A = 0")
    return reasons


def nilpotent_closed_form(p: Plant, tol: float = 1e-12) -> DareSolution:
    """Exact Riccati solution for plants with ``A^2 = 0`` (see :func:`closed_form_blockers`).

    ``X = [[A'A + I, A'B], [BA, B A'(I+B^2)^-1 A B + I + B^2]]`` with
    ``G1 = 0`` and ``G2 = -(I+B^2)^-1 B A B - D``.  ``X`` does not depend on ``D``.
    """
    reasons = closed_form_blockers(p.A, p.b_diag, tol)
    if reasons:
        raise NilpotencyError("; ".join(reasons))
    n = p.n
    A, b, d = p.A, p.b_diag, p.d_diag
    B = np.diag(b)
    inv1b2 = 1.0 / (1.0 + b * b)
    eye = np.eye(n)
    X = np.block([
        [A.T @ A + eye, A.T @ B],
        [B @ A, B @ A.T @ (inv1b2[:, None] * A) @ B + eye + B @ B],
    ])
    G1 = np.zeros((n, n))
    G2 = -(inv1b2 * b)[:, None] * A * b[None, :] - np.diag(d)
    return DareSolution(X=X, G1=G1, G2=G2, residual=dare_residual(X, build_augmented(p)),
                        iterations=0)


def solve_for_plant(p: Plant, tol: float = 1e-12, max_iter: int = 100_000,
                    nilpotent_tol: float = 1e-12) -> DareSolution:
    """Closed form when it applies, value iteration otherwise."""
    if not closed_form_blockers(p.A, p.b_diag, nilpotent_tol):
        return nilpotent_closed_form(p, nilpotent_tol)
    return solve_dare(build_augmented(p), tol=tol, max_iter=max_iter)
