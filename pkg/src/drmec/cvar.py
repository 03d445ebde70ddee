"""Worst-case CVaR of quadratic losses over mean/covariance ambiguity sets.

The worst-case CVaR of ``phi(xi) = xi' Theta xi + theta' xi + theta0`` over
all distributions with mean ``mu`` and covariance ``Sigma`` equals the
optimal value of the semidefinite program

    minimize    beta + <Omega, H> / (1 - alpha)
    subject to  H >= 0,
                H - [[Theta, theta/2], [theta'/2, theta0 - beta]] >= 0,

with ``Omega = [[Sigma + mu mu', mu], [mu', 1]]``.  Its dual is

    maximize    <Z, [[Theta, theta/2], [theta'/2, theta0]]>
    subject to  Z >= 0,  Z[-1, -1] = 1,  Omega / (1 - alpha) - Z >= 0,

where ``Z`` is the (rescaled) second-moment matrix of the worst-case
tail.  For a scalar random variable the dual feasible set is the region
between two parabolas in ``(Z12, Z11)``, so both problems are solved in
closed form; ``solve_barrier`` handles the general case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from drmec._sdp import solve_barrier
from drmec.errors import DomainError, InfeasibleError
from drmec.model import (
    Destination,
    LowerUavParams,
    ScenarioConfig,
    UpperUavParams,
    check_access,
    offloaded_bits,
)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadraticLoss:
    theta_mat: np.ndarray
    theta_vec: np.ndarray
    theta0: float

    def __post_init__(self):
        mat = np.atleast_2d(np.asarray(self.theta_mat, dtype=float))
        vec = np.atleast_1d(np.asarray(self.theta_vec, dtype=float))
        if mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise DomainError(f"theta_mat must be square, got shape {mat.shape}")
        if vec.shape != (mat.shape[0],):
            raise DomainError(f"theta_vec must have length {mat.shape[0]}, got shape {vec.shape}")
        if not (np.isfinite(mat).all() and np.isfinite(vec).all() and math.isfinite(self.theta0)):
            raise DomainError("loss coefficients must be finite")
        if mat.shape[0] > 1:
            if not np.allclose(mat, mat.T, rtol=0, atol=1e-12 * max(1.0, np.abs(mat).max())):
                raise DomainError("theta_mat must be symmetric")
            mat = 0.5 * (mat + mat.T)
        object.__setattr__(self, "theta_mat", mat)
        object.__setattr__(self, "theta_vec", vec)
        object.__setattr__(self, "theta0", float(self.theta0))

    @property
    def k(self) -> int:
        return self.theta_mat.shape[0]

    def coefficient_matrix(self, beta: float = 0.0) -> np.ndarray:
        """``[[Theta, theta/2], [theta'/2, theta0 - beta]]``."""
        k = self.k
        out = np.empty((k + 1, k + 1))
        out[:k, :k] = self.theta_mat
        out[:k, k] = out[k, :k] = 0.5 * self.theta_vec
        out[k, k] = self.theta0 - beta
        return out

    def scaled(self, c: float) -> "QuadraticLoss":
        return QuadraticLoss(c * self.theta_mat, c * self.theta_vec, c * self.theta0)

    def shifted(self, delta: float) -> "QuadraticLoss":
        return QuadraticLoss(self.theta_mat, self.theta_vec, self.theta0 + delta)

    def __call__(self, xi):
        """Evaluate the loss; for k = 1 ``xi`` may be an array of samples."""
        if self.k == 1:
            xi = np.asarray(xi, dtype=float)
            return self.theta_mat[0, 0] * xi * xi + self.theta_vec[0] * xi + self.theta0
        xi = np.asarray(xi, dtype=float)
        return np.einsum("...i,ij,...j->...", xi, self.theta_mat, xi) + xi @ self.theta_vec + self.theta0


@dataclass(frozen=True)
class MomentMatrix:
    omega: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    @property
    def k(self) -> int:
        return self.mu.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.k == 1


@dataclass(frozen=True)
class WcCvarCertificate:
    """Optimal ``(beta, H)`` of the primal SDP with its dual matrix.

    ``primal_attained`` is False when the covariance is singular: the
    infimum is then approached but not reached, and ``h_mat`` is a
    near-optimal member of the minimizing sequence.
    """

    value: float
    beta: float
    h_mat: np.ndarray
    duality_gap: float
    dual_mat: np.ndarray
    method: str = "analytic"
    primal_attained: bool = True


def assemble_moment_matrix(mu, sigma) -> MomentMatrix:
    """Build ``Omega = [[Sigma + mu mu', mu], [mu', 1]]``.

    Scalars are accepted for the one-dimensional case, with ``sigma``
    read as a variance.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    k = mu.shape[0]
    if mu.ndim != 1 or sigma.shape != (k, k):
        raise DomainError(f"mu has length {k} but sigma has shape {sigma.shape}")
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
        raise DomainError("moments must be finite")
    if not np.allclose(sigma, sigma.T, rtol=0, atol=1e-12 * max(1.0, np.abs(sigma).max())):
        raise DomainError("sigma must be symmetric")
    sigma = 0.5 * (sigma + sigma.T)
    if np.linalg.eigvalsh(sigma).min() < -1e-12 * max(1.0, np.abs(sigma).max()):
        raise DomainError("sigma must be positive semidefinite")
    omega = np.empty((k + 1, k + 1))
    omega[:k, :k] = sigma + np.outer(mu, mu)
    omega[:k, k] = omega[k, :k] = mu
    omega[k, k] = 1.0
    return MomentMatrix(omega=omega, mu=mu, sigma=sigma)


def gain_moments(params: LowerUavParams | UpperUavParams) -> MomentMatrix:
    """Moments of the gain magnitude ``|g| = g_nominal + error``."""
    return assemble_moment_matrix(params.gain_mean, params.gain_err_var)


def build_loss_lower(params: LowerUavParams, power_w: float, dest: Destination, noise_var_w: float) -> QuadraticLoss:
    """Linearised delay loss ``L sigma^2 - B gamma p t_max xi^2`` of one lower UAV."""
    if power_w < 0:
        raise DomainError(f"power_w must be >= 0, got {power_w}")
    slope = params.bandwidth_hz * params.pathloss(dest) * power_w * params.delay_budget_s
    return QuadraticLoss(np.array([[-slope]]), np.zeros(1), params.data_len_bits * noise_var_w)


def build_loss_upper(cfg: ScenarioConfig, x: Sequence[int], power_w: float) -> QuadraticLoss:
    """Relay loss for the upper UAV carrying every offloaded payload."""
    if power_w < 0:
        raise DomainError(f"power_w must be >= 0, got {power_w}")
    x = check_access(cfg, x)
    return build_loss_relay(cfg.upper, offloaded_bits(cfg, x), power_w, cfg.noise_var_w)


def build_loss_relay(upper: UpperUavParams, payload_bits: float, power_w: float, noise_var_w: float) -> QuadraticLoss:
    """Upper-UAV loss keyed by the total offloaded payload instead of ``x``."""
    if power_w < 0:
        raise DomainError(f"power_w must be >= 0, got {power_w}")
    slope = upper.bandwidth_hz * upper.pathloss_to_bs * power_w * upper.delay_budget_s
    return QuadraticLoss(np.array([[-slope]]), np.zeros(1), payload_bits * noise_var_w)


# --- scalar closed form -----------------------------------------------------


def _dual_optimum_k1(a2: float, a1: float, mu: float, s2: float, alpha: float) -> tuple[float, float, str]:
    """Maximise ``a2*u + a1*t`` over the scalar dual region.

    Returns ``(t, u, where)`` with ``where`` one of ``"lower"`` (interior of
    the lower parabola ``u = t^2``), ``"upper"`` (interior of the upper
    parabola), ``"corner"`` (an intersection point) or ``"point"`` (the
    region has collapsed to the mean).
    """
    c = 1.0 / (1.0 - alpha)
    half = math.sqrt(s2 * alpha / (1.0 - alpha))
    t_lo, t_hi = mu - half, mu + half
    if t_lo == t_hi:
        # variance below float resolution at this mean
        return mu, mu * mu, "point"
    if a2 < 0:
        t = -a1 / (2.0 * a2)
        if t_lo < t < t_hi:
            return t, t * t, "lower"
    elif a2 > 0:
        t = c * mu + a1 * (c - 1.0) / (2.0 * a2)
        if t_lo < t < t_hi:
            u = c * (s2 + mu * mu) - (c * mu - t) ** 2 / (c - 1.0)
            return t, u, "upper"
    elif a1 == 0:
        return mu, mu * mu, "lower"
    # a concave quadratic clipped to the interval, or a convex/linear one:
    # the optimum sits at a corner where both parabolas meet
    f_lo = a2 * t_lo * t_lo + a1 * t_lo
    f_hi = a2 * t_hi * t_hi + a1 * t_hi
    t = t_hi if f_hi > f_lo else t_lo
    return t, t * t, "corner"


def _wc_value_k1(a2: float, a1: float, a0: float, mu: float, s2: float, alpha: float) -> float:
    t, u, _ = _dual_optimum_k1(a2, a1, mu, s2, alpha)
    return a0 + (a2 * u + a1 * t)


def _round_up(q: Fraction) -> float:
    f = float(q)
    return f if Fraction(f) >= q else math.nextafter(f, math.inf)


def _solve_k1(loss: QuadraticLoss, moments: MomentMatrix, alpha: float) -> WcCvarCertificate:
    a2 = float(loss.theta_mat[0, 0])
    a1 = float(loss.theta_vec[0])
    a0 = loss.theta0
    mu = float(moments.mu[0])
    s2 = float(moments.sigma[0, 0])
    c = 1.0 / (1.0 - alpha)
    t, u, where = _dual_optimum_k1(a2, a1, mu, s2, alpha)
    dual_value = a0 + (a2 * u + a1 * t)
    dual_mat = np.array([[u, t], [t, 1.0]])
    attained = True

    if where == "lower":
        # tail is a point mass at the loss maximiser; no moment pressure
        h_mat = np.zeros((2, 2))
        beta = a0 + 0.5 * a1 * t
    elif where == "upper":
        r = (c * mu - t) / (c - 1.0)
        beta = a0 + 0.5 * a1 * r
        h_mat = np.array([[a2, 0.5 * a1], [0.5 * a1, a0 - beta]])
    elif where == "corner" and t != (r := (c * mu - t) / (c - 1.0)):
        # corner: tail at t, remaining mass concentrated at r
        h = (a2 * t + 0.5 * a1) / (t - r)
        if abs(h) * max(1.0, r * r) > 1e100:
            h_mat, beta, _ = _degenerate_primal(a2, a1, a0, mu, c, dual_value)
        elif h > a2:
            h_mat, beta = _rank_one_rounded(a2, a1, a0, h, -h * r)
        else:
            h_mat = h * np.array([[1.0, -r], [-r, r * r]])
            beta = a0 + h * r * t + 0.5 * a1 * t - h * r * r
    else:
        h_mat, beta, attained = _degenerate_primal(a2, a1, a0, mu, c, dual_value)

    primal_value = beta + c * float(np.sum(moments.omega * h_mat))
    if where == "corner" and abs(primal_value - dual_value) > 1e-9 * max(1.0, abs(dual_value)):
        # tiny variance: the exact primal has entries ~ 1/sd and loses to
        # rounding; the point-mass construction may certify more tightly
        alt_h, alt_beta, _ = _degenerate_primal(a2, a1, a0, mu, c, dual_value)
        alt_value = alt_beta + c * float(np.sum(moments.omega * alt_h))
        if abs(alt_value - dual_value) < abs(primal_value - dual_value):
            h_mat, beta, primal_value = alt_h, alt_beta, alt_value
    return WcCvarCertificate(
        value=dual_value,
        beta=float(beta),
        h_mat=h_mat,
        duality_gap=float(primal_value - dual_value),
        dual_mat=dual_mat,
        method="analytic",
        primal_attained=attained,
    )


def _degenerate_primal(a2, a1, a0, mu, c, dual_value):
    """Primal point for a point-mass ambiguity set.

    With ``Sigma = 0`` the optimum is attained only when ``mu`` is a
    stationary point of the loss.  Otherwise ``H = h [[1, -mu], [-mu, mu^2]]``
    drives the gap down like ``1/h``; ``h`` balances that against rounding
    in the large entries, and ``beta`` is rounded so both PSD residuals are
    exactly nonnegative in the stored floats.
    """
    slope = 0.5 * a1 + a2 * mu
    if slope == 0.0:
        if a2 <= 0:
            return np.zeros((2, 2)), a0 + 0.5 * a1 * mu, True
        beta = a0 + 0.5 * a1 * mu
        return np.array([[a2, 0.5 * a1], [0.5 * a1, a0 - beta]]), beta, True
    scale = max(1.0, abs(dual_value))
    h = max(a2, 0.0) + abs(slope) / math.sqrt(c * _EPS) / max(1.0, abs(mu)) + scale
    h_mat, beta = _rank_one_rounded(a2, a1, a0, h, -h * mu)
    return h_mat, beta, False


def _rank_one_rounded(a2, a1, a0, h, h12):
    """``H = [[h, h12], [h12, h22]]`` and ``beta`` with both PSD residuals exact.

    ``h22`` and ``beta`` are the smallest values making ``det H`` and
    ``det (H - M + beta E)`` nonnegative, rounded up in exact arithmetic, so
    large entries cannot push either residual below zero.  Needs ``h > a2``.
    """
    fh = Fraction(h)
    h22 = _round_up(Fraction(h12) ** 2 / fh) if fh else 0.0
    q_beta = (Fraction(h12) - Fraction(a1) / 2) ** 2 / (fh - Fraction(a2)) - Fraction(h22) + Fraction(a0)
    return np.array([[h, h12], [h12, h22]]), _round_up(q_beta)


def worst_case_cvar(
    loss: QuadraticLoss, omega: MomentMatrix, alpha: float, method: str = "auto"
) -> WcCvarCertificate:
    """Solve the worst-case CVaR SDP.

    ``method="auto"`` uses the closed form for scalar ``xi`` and the
    log-det barrier otherwise; ``"barrier"`` forces the iterative route
    (covariance must be positive definite).
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if loss.k != omega.k:
        raise DomainError(f"loss has k={loss.k} but moments have k={omega.k}")
    if method == "auto":
        method = "analytic" if loss.k == 1 else "barrier"
    if method == "analytic":
        if loss.k != 1:
            raise DomainError("closed form is only available for scalar xi")
        return _solve_k1(loss, omega, alpha)
    if method == "barrier":
        res = solve_barrier(loss.coefficient_matrix(), omega.omega, alpha)
        return WcCvarCertificate(
            value=res.value,
            beta=res.beta,
            h_mat=res.h_mat,
            duality_gap=res.gap,
            dual_mat=res.z_mat,
            method="barrier",
        )
    raise DomainError(f"unknown method {method!r}")


def wc_cvar_value(loss: QuadraticLoss, omega: MomentMatrix, alpha: float) -> float:
    """Optimal value only; skips certificate construction for scalar xi."""
    if loss.k == 1 and omega.k == 1:
        return _wc_value_k1(
            float(loss.theta_mat[0, 0]),
            float(loss.theta_vec[0]),
            loss.theta0,
            float(omega.mu[0]),
            float(omega.sigma[0, 0]),
            alpha,
        )
    return worst_case_cvar(loss, omega, alpha).value


# --- certificate verification -----------------------------------------------


def min_eigenvalue(mat: np.ndarray) -> float:
    """Smallest eigenvalue; 2x2 inputs use an exact rational determinant."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape == (2, 2):
        a, b, d = (Fraction(float(v)) for v in (mat[0, 0], mat[0, 1], mat[1, 1]))
        return _min_eig_2x2(a, b, d)
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.T)).min())


def _min_eig_2x2(a: Fraction, b: Fraction, d: Fraction) -> float:
    scale = max(abs(a), abs(b), abs(d))
    if scale == 0:
        return 0.0
    # work on the unit-scaled matrix so squares cannot overflow
    a, b, d = a / scale, b / scale, d / scale
    tr = a + d
    det = a * d - b * b
    disc = float((a - d) ** 2 + 4 * b * b)
    lam_max = 0.5 * (float(tr) + math.sqrt(disc))
    if lam_max > 0:
        return float(scale) * (float(det) / lam_max)
    return float(scale) * 0.5 * (float(tr) - math.sqrt(disc))


def certificate_residuals(loss: QuadraticLoss, cert: WcCvarCertificate) -> dict[str, float]:
    """Minimum eigenvalues of ``H`` and of ``H - coefficient_matrix(beta)``."""
    h = cert.h_mat
    if h.shape == (2, 2):
        f = [[Fraction(float(v)) for v in row] for row in h]
        m = [[Fraction(float(v)) for v in row] for row in loss.coefficient_matrix()]
        beta = Fraction(cert.beta)
        slack = (f[0][0] - m[0][0], f[0][1] - m[0][1], f[1][1] - m[1][1] + beta)
        min_slack = _min_eig_2x2(*slack)
    else:
        min_slack = min_eigenvalue(h - loss.coefficient_matrix(cert.beta))
    return {"min_eig_h": min_eigenvalue(h), "min_eig_slack": min_slack, "duality_gap": cert.duality_gap}


# --- discrete-support oracle ------------------------------------------------


def cvar_discrete(losses, probs, alpha: float) -> float:
    """Exact CVaR of a discrete loss: mean of the worst ``1 - alpha`` tail."""
    losses = np.asarray(losses, dtype=float)
    probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    order = np.argsort(-losses, kind="stable")
    tail = 1.0 - alpha
    acc = 0.0
    total = 0.0
    for j in order:
        if acc >= tail:
            break
        take = min(probs[j], tail - acc)
        total += take * losses[j]
        acc += take
    return total / tail


def default_grid(mu: float, sigma2: float, n: int = 201) -> np.ndarray:
    """``n`` points on ``[max(0, mu - 10 sd), mu + 10 sd]`` plus ``mu`` itself."""
    half = 10.0 * math.sqrt(sigma2) if sigma2 > 0 else max(1.0, abs(mu))
    grid = np.linspace(max(0.0, mu - half), mu + half, n)
    return np.union1d(grid, [mu])


def cvar_oracle_discrete(
    loss: QuadraticLoss, mu: float, sigma2: float, alpha: float, support_grid=None
) -> float:
    """Largest CVaR over distributions on a finite grid with the given moments.

    Splits each grid mass ``q_j`` into a tail part ``w_j / c`` and a rest
    part ``r_j``, which makes the CVaR dual representation a linear
    program in ``(w, r)``.  The CVaR of the maximising distribution is then
    recomputed exactly by sorting.
    """
    if loss.k != 1:
        raise DomainError("the discrete oracle is scalar only")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if sigma2 < 0:
        raise DomainError(f"sigma2 must be >= 0, got {sigma2}")
    grid = default_grid(mu, sigma2) if support_grid is None else np.unique(np.asarray(support_grid, dtype=float))
    n = grid.size
    c = 1.0 / (1.0 - alpha)
    phi = loss(grid)
    ones = np.ones(n)
    zeros = np.zeros(n)
    a_eq = np.vstack(
        [
            np.concatenate([ones, zeros]),
            np.concatenate([ones / c, ones]),
            np.concatenate([grid / c, grid]),
            np.concatenate([grid**2 / c, grid**2]),
        ]
    )
    b_eq = np.array([1.0, 1.0, mu, sigma2 + mu * mu])
    res = linprog(np.concatenate([-phi, zeros]), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status == 2:
        raise DomainError("moments are not attainable on the support grid")
    if not res.success:
        raise DomainError(f"oracle LP failed: {res.message}")
    q = res.x[:n] / c + res.x[n:]
    return cvar_discrete(phi, q, alpha)


# --- minimum feasible power -------------------------------------------------


def min_feasible_power(
    loss_builder: Callable[[float], QuadraticLoss],
    moments: MomentMatrix,
    alpha: float,
    power_upper_bound: float = 1e3,
    *,
    constraint: str = "constraint",
    xtol: float = 1e-10,
    rtol: float = 1e-13,
) -> float:
    """Smallest ``p >= 0`` with worst-case CVaR of ``loss_builder(p)`` at most 0.

    Bisection; the upper bracket doubles from 1 W until feasible or
    ``power_upper_bound`` is reached.  The returned point is always on the
    feasible side of the bracket.
    """

    def value(p: float) -> float:
        return wc_cvar_value(loss_builder(p), moments, alpha)

    if value(0.0) <= 0:
        return 0.0
    hi = min(1.0, power_upper_bound)
    while value(hi) > 0:
        if hi >= power_upper_bound:
            raise InfeasibleError(
                f"{constraint}: worst-case CVaR stays positive up to {power_upper_bound:g} W",
                constraint=constraint,
            )
        hi = min(2.0 * hi, power_upper_bound)
    lo = 0.0
    while hi - lo > min(xtol, rtol * hi):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if value(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return hi
