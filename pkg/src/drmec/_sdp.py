"""Log-det barrier method for the small worst-case CVaR SDP.

Variables are ``beta`` and the upper triangle of the symmetric ``H``.  Each
outer iteration centres ``t * f(beta, H) - logdet H - logdet S`` with damped
Newton steps, ``S = H - M + beta E``.  At a centred point the matrices
``H^-1 / t`` and ``S^-1 / t`` are dual feasible and the gap is ``2 d / t``.

The iteration runs in whitened coordinates ``H = L^-T G L^-1`` with
``Omega = L L^T``, where the objective becomes ``beta + c tr(G)``; without
this, nearly singular moment matrices stall the Newton steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drmec.errors import DomainError, NumericError

_EPS = np.finfo(float).eps


@dataclass
class BarrierResult:
    value: float
    beta: float
    h_mat: np.ndarray
    z_mat: np.ndarray
    gap: float
    newton_steps: int


def _basis(d: int) -> list[np.ndarray]:
    out = []
    for i in range(d):
        for j in range(i, d):
            a = np.zeros((d, d))
            a[i, j] = a[j, i] = 1.0
            out.append(a)
    return out


def _chol_ok(mat: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return False
    return True


def solve_barrier(
    coeff: np.ndarray,
    omega: np.ndarray,
    alpha: float,
    *,
    gap_tol: float = 1e-10,
    mu_step: float = 8.0,
    max_newton: int = 2000,
) -> BarrierResult:
    """Minimise ``beta + <omega, H>/(1-alpha)`` s.t. ``H >= 0``, ``H - coeff + beta E >= 0``.

    ``coeff`` is the loss coefficient matrix at ``beta = 0``.  The constant
    term is shifted out and the rest normalised before iterating, so the
    returned value is exactly translation-equivariant and scales with the
    loss.  Raises :class:`NumericError` when ``max_newton`` is exhausted.
    """
    coeff = np.asarray(coeff, dtype=float)
    omega = np.asarray(omega, dtype=float)
    d = coeff.shape[0]
    if omega.shape != (d, d):
        raise DomainError(f"omega shape {omega.shape} does not match loss dimension {d}")
    try:
        chol = np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        raise DomainError("barrier route needs a positive definite moment matrix") from None
    c = 1.0 / (1.0 - alpha)

    offset = coeff[-1, -1]
    m = coeff.copy()
    m[-1, -1] = 0.0
    scale = np.abs(m).max()
    if scale == 0.0:
        return BarrierResult(offset, offset, np.zeros((d, d)), np.zeros((d, d)), 0.0, 0)
    m /= scale
    m = chol.T @ m @ chol
    e = np.outer(chol[-1], chol[-1])

    basis = _basis(d)
    # columns: beta, then H entries
    h_basis = [np.zeros((d, d))] + basis
    s_basis = [e] + basis
    cost = np.array([1.0] + [c * float(np.trace(a)) for a in basis])
    n = len(cost)

    def unpack(v):
        h = sum(vi * a for vi, a in zip(v[1:], basis))
        return h, h - m + v[0] * e

    tau = 1.0 + max(0.0, float(np.linalg.eigvalsh(m).max()))
    v = np.zeros(n)
    v[0] = 1.0
    for idx, a in enumerate(basis, start=1):
        if np.count_nonzero(a) == 1:
            v[idx] = tau

    def phi(v, t):
        h, s = unpack(v)
        return t * (cost @ v) - np.linalg.slogdet(h)[1] - np.linalg.slogdet(s)[1]

    # start the path where the barrier and objective terms are comparable
    t = 2 * d / max(1.0, abs(float(cost @ v)))
    steps = 0
    best = v.copy()
    while True:
        # centering
        while True:
            h, s = unpack(v)
            hi, si = np.linalg.inv(h), np.linalg.inv(s)
            grad = t * cost.copy()
            hess = np.zeros((n, n))
            for w, bas in ((hi, h_basis), (si, s_basis)):
                wb = [w @ a for a in bas]
                grad -= np.array([np.trace(x) for x in wb])
                for i in range(n):
                    for j in range(i, n):
                        hess[i, j] += np.sum(wb[i] * wb[j].T)
            hess = np.triu(hess) + np.triu(hess, 1).T
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError as exc:
                raise NumericError("singular Newton system", iterate=best, residuals={"t": t}) from exc
            dec2 = -grad @ step
            f0 = phi(v, t)
            # second clause: decrement below the rounding floor of phi
            if dec2 / 2.0 <= 1e-11 or dec2 <= 64 * _EPS * abs(f0):
                break
            lr = 1.0
            while lr > 1e-14:
                cand = v + lr * step
                hc, sc = unpack(cand)
                if _chol_ok(hc) and _chol_ok(sc) and phi(cand, t) < f0 - 0.25 * lr * dec2:
                    break
                lr *= 0.5
            else:
                break
            v = cand
            steps += 1
            if steps >= max_newton:
                raise NumericError(
                    "barrier method hit the Newton step cap",
                    iterate=scale * v,
                    residuals={"t": t, "newton_decrement_sq": float(dec2)},
                )
        best = v.copy()
        obj = float(cost @ v)
        if 2 * d / t <= gap_tol * max(1.0, abs(obj)):
            break
        t *= mu_step

    g, s = unpack(v)
    linv = np.linalg.inv(chol)
    h = linv.T @ g @ linv
    z = chol @ np.linalg.inv(s) @ chol.T / t
    value = offset + scale * obj
    return BarrierResult(
        value=value,
        beta=offset + scale * v[0],
        h_mat=scale * h,
        z_mat=z,
        gap=scale * 2 * d / t,
        newton_steps=steps,
    )
