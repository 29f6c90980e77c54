"""Fundamental solutions and the Hill discriminant F(lambda).

theta and phi solve -y'' + q y = lambda y on [0, pi] with
theta(0) = phi'(0) = 1, theta'(0) = phi(0) = 0.  The discriminant is
F(lambda) = phi'(pi) + theta(pi); Bloch eigenvalues solve
F(lambda) = 2 cos(pi t) with quasimomentum t in (-1, 1].

The integrator propagates the 4 complex fundamental components plus the
4 components of the variational system in lambda (for F'), using an
embedded adaptive Runge-Kutta pair (DOP853).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationError
from .params import PotentialParams

DEFAULT_TOL = 1e-12

# second finite-difference step for F'' (only double-point diagnostics need it)
_FPP_STEP = 1e-4


@dataclass(frozen=True)
class FundamentalData:
    """Values of theta, phi and their x- and lambda-derivatives at x = pi."""

    lam: complex
    theta_pi: complex
    theta_prime_pi: complex
    phi_pi: complex
    phi_prime_pi: complex
    dtheta_pi: complex
    dtheta_prime_pi: complex
    dphi_pi: complex
    dphi_prime_pi: complex

    @property
    def F(self) -> complex:
        return self.phi_prime_pi + self.theta_pi

    @property
    def F_prime(self) -> complex:
        return self.dphi_prime_pi + self.dtheta_pi

    @property
    def wronskian(self) -> complex:
        return self.theta_pi * self.phi_prime_pi - self.theta_prime_pi * self.phi_pi

    def monodromy(self) -> np.ndarray:
        """2x2 transfer matrix over one period [0, pi]."""
        return np.array(
            [[self.theta_pi, self.phi_pi], [self.theta_prime_pi, self.phi_prime_pi]]
        )


_Y0 = np.array([1, 0, 0, 1, 0, 0, 0, 0], dtype=complex)


def _potential_coeffs(params: PotentialParams, use_shifted: bool):
    """Return (A, B) with q(x) = A e^{2ix} + B e^{-2ix}."""
    if use_shifted:
        a = 1j * params.c
        return a, a
    if params.alpha is None:
        raise IntegrationError("optical potential form undefined at c = 0")
    return 1.0 + 2.0 * params.V, 1.0 - 2.0 * params.V


def _propagate(A, B, lams, tol, x_eval=None):
    """Integrate the 8K-dimensional stacked system for K lambda values.

    Returns (endpoint, dense) where endpoint has shape (8, K) and dense,
    present when x_eval is given, has shape (8, K, len(x_eval)).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if not np.all(np.isfinite(lams)):
        raise IntegrationError("nonfinite lambda")
    K = lams.size
    y0 = np.tile(_Y0[:, None], (1, K)).reshape(-1)

    def rhs(x, y):
        Y = y.reshape(8, K)
        w = A * np.exp(2j * x) + B * np.exp(-2j * x) - lams
        out = np.empty_like(Y)
        out[0] = Y[1]
        out[1] = w * Y[0]
        out[2] = Y[3]
        out[3] = w * Y[2]
        out[4] = Y[5]
        out[5] = w * Y[4] - Y[0]
        out[6] = Y[7]
        out[7] = w * Y[6] - Y[2]
        return out.reshape(-1)

    t_eval = None
    if x_eval is not None:
        t_eval = np.asarray(x_eval, dtype=float)
        if t_eval.size == 0 or t_eval[-1] < np.pi:
            t_eval = np.append(t_eval, np.pi)
    sol = solve_ivp(
        rhs,
        (0.0, np.pi),
        y0,
        method="DOP853",
        rtol=tol,
        atol=tol,
        t_eval=t_eval,
        dense_output=False,
    )
    if not sol.success:
        raise IntegrationError(f"step control failed: {sol.message}")
    endpoint = sol.y[:, -1].reshape(8, K)
    dense = None
    if x_eval is not None:
        dense = sol.y.reshape(8, K, -1)[:, :, : len(np.asarray(x_eval))]
    return endpoint, dense


def _make_data(lam, col) -> FundamentalData:
    return FundamentalData(
        lam=complex(lam),
        theta_pi=complex(col[0]),
        theta_prime_pi=complex(col[1]),
        phi_pi=complex(col[2]),
        phi_prime_pi=complex(col[3]),
        dtheta_pi=complex(col[4]),
        dtheta_prime_pi=complex(col[5]),
        dphi_pi=complex(col[6]),
        dphi_prime_pi=complex(col[7]),
    )


_cache: dict = {}
_CACHE_CAP = 400_000


def clear_cache():
    _cache.clear()


def fundamental(
    params: PotentialParams,
    lam: complex,
    use_shifted: bool = True,
    tol: float = DEFAULT_TOL,
) -> FundamentalData:
    """Fundamental solution data at x = pi for a single lambda (cached)."""
    lam = complex(lam)
    key = (params.c if use_shifted else -params.V, lam, tol, use_shifted)
    hit = _cache.get(key)
    if hit is not None:
        return hit
    A, B = _potential_coeffs(params, use_shifted)
    endpoint, _ = _propagate(A, B, [lam], tol)
    data = _make_data(lam, endpoint[:, 0])
    if len(_cache) > _CACHE_CAP:
        _cache.clear()
    _cache[key] = data
    return data


def discriminant(
    params: PotentialParams,
    lam: complex,
    use_shifted: bool = True,
    tol: float = DEFAULT_TOL,
) -> tuple[complex, complex]:
    """Hill discriminant F(lambda) and its lambda-derivative."""
    fd = fundamental(params, lam, use_shifted, tol)
    return fd.F, fd.F_prime


def discriminant_many(params, lams, use_shifted=True, tol=DEFAULT_TOL):
    """Vectorized (F, F') over an array of lambda values (one stacked solve)."""
    A, B = _potential_coeffs(params, use_shifted)
    endpoint, _ = _propagate(A, B, lams, tol)
    F = endpoint[3] + endpoint[0]
    Fp = endpoint[7] + endpoint[4]
    return F, Fp


def wronskian_many(params, lams, tol=DEFAULT_TOL):
    """theta*phi' - theta'*phi at x = pi for each lambda (identity check)."""
    A, B = _potential_coeffs(params, True)
    endpoint, _ = _propagate(A, B, lams, tol)
    return endpoint[0] * endpoint[3] - endpoint[1] * endpoint[2]


def second_derivative(
    params: PotentialParams, lam: complex, tol: float = DEFAULT_TOL
) -> complex:
    """F''(lambda) by central differences of the variational F'."""
    h = _FPP_STEP * max(1.0, abs(lam))
    _, fp_plus = discriminant(params, lam + h, tol=tol)
    _, fp_minus = discriminant(params, lam - h, tol=tol)
    return (fp_plus - fp_minus) / (2.0 * h)


# ---------------------------------------------------------------------------
# values on arbitrary real x via the transfer matrix
# ---------------------------------------------------------------------------


def _mono_power(mon: np.ndarray, m: int) -> np.ndarray:
    if m == 0:
        return np.eye(2, dtype=complex)
    if m > 0:
        return np.linalg.matrix_power(mon, m)
    inv = np.array(
        [[mon[1, 1], -mon[0, 1]], [-mon[1, 0], mon[0, 0]]]
    )  # det = 1 (Wronskian)
    return np.linalg.matrix_power(inv, -m)


def fundamental_profile_many(params, lams, xs, tol=DEFAULT_TOL):
    """theta(x, lam), phi(x, lam) on an arbitrary real grid, batched in lambda.

    The base solve covers one period; values outside [0, pi) come from
    powers of the monodromy matrix.  Returns (theta, phi, data_list) with
    value arrays of shape (K, len(xs)).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    xs = np.asarray(xs, dtype=float)
    K = lams.size
    ms = np.floor(xs / np.pi).astype(int)
    rs = xs - np.pi * ms
    rs = np.clip(rs, 0.0, np.nextafter(np.pi, 0.0))
    r_unique, r_inv = np.unique(rs, return_inverse=True)

    A, B = _potential_coeffs(params, True)
    endpoint, dense = _propagate(A, B, lams, tol, x_eval=r_unique)
    # dense rows 0..3 are theta, theta', phi, phi' at the base points
    theta = np.empty((K, xs.size), dtype=complex)
    phi = np.empty((K, xs.size), dtype=complex)
    data = [_make_data(lams[k], endpoint[:, k]) for k in range(K)]
    for k in range(K):
        mon = data[k].monodromy()
        pows = {m: _mono_power(mon, m) for m in np.unique(ms)}
        base = dense[:4, k, :][:, r_inv]  # (4, len(xs)) at reduced coords
        for m, P in pows.items():
            sel = ms == m
            # row 0 of [[th, ph], [th', ph']](r) @ P^m
            theta[k, sel] = base[0, sel] * P[0, 0] + base[2, sel] * P[1, 0]
            phi[k, sel] = base[0, sel] * P[0, 1] + base[2, sel] * P[1, 1]
    return theta, phi, data


def fundamental_profile(params, lam, xs, tol=DEFAULT_TOL):
    """Single-lambda convenience wrapper around fundamental_profile_many."""
    theta, phi, data = fundamental_profile_many(params, [lam], xs, tol)
    return theta[0], phi[0], data[0]
