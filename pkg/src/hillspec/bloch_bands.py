"""Bloch-eigenvalue refinement and band tracing.

Bands are the curves lambda_n(t) solving F(lambda) = 2 cos(pi t); by
evenness only t in [0, 1] is stored.  Periodic eigenvalues are numbered
as: the 2*n1+1 eigenvalues in the low-lying rectangle sorted by
(Re, Im), then for each disk around (2n)^2 with n > n1 the increasing
pair lambda_{2n}(0) < lambda_{2n+1}(0).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import hill_core, matrix_oracle
from .errors import (
    BandJump,
    CountMismatch,
    Degenerate,
    HillspecError,
    NearSingular,
    NoConvergence,
    NotFound,
)
from .params import PotentialParams

FPRIME_FLOOR = 1e-8
REAL_IM_TOL = 1e-8


@dataclass(frozen=True)
class BlochPoint:
    n: int
    t: float
    lam: complex
    residual: float
    simple: bool = True

    @property
    def is_real(self) -> bool:
        return abs(self.lam.imag) <= REAL_IM_TOL


@dataclass(frozen=True)
class DoublePoint:
    k: int
    t: float
    lam: float
    f_second: complex


@dataclass
class Band:
    n: int
    samples: list = field(default_factory=list)
    double_point: DoublePoint | None = None
    real_segment: tuple | None = None

    @property
    def t(self) -> np.ndarray:
        return np.array([p.t for p in self.samples])

    @property
    def lam(self) -> np.ndarray:
        return np.array([p.lam for p in self.samples])


# ---------------------------------------------------------------------------
# periodic / antiperiodic numbering
# ---------------------------------------------------------------------------


def _numbered(params, t_val, rect_hi, rect_expected, centers, n_lo, M):
    eigs = matrix_oracle.filter_converged(
        matrix_oracle.bloch_eigenvalues(params, t_val, M=M), M
    )
    c = params.c
    slack = 1e-9 * (1.0 + np.abs(eigs.real).max(initial=1.0))
    in_rect = (
        (np.abs(eigs.imag) <= 2 * c + slack)
        & (eigs.real >= -2 * c - slack)
        & (eigs.real <= rect_hi + slack)
    )
    rect = eigs[in_rect]
    rect = rect[np.lexsort((rect.imag, rect.real))]
    if rect.size != rect_expected:
        raise CountMismatch(
            f"rectangle at t={t_val} holds {rect.size}, expected {rect_expected}"
        )
    numbered = list(rect)
    bound = matrix_oracle.converged_bound(M)
    n = n_lo + 1
    while centers(n) + 2 * c <= bound:
        members = eigs[np.abs(eigs - centers(n)) <= 2 * c + slack]
        if members.size != 2:
            break
        members = members[np.lexsort((members.imag, members.real))]
        numbered.extend(members)
        n += 1
    return np.array(numbered, dtype=complex)


def numbered_periodic(params: PotentialParams, n_limit: int = 12,
                      M: int | None = None) -> np.ndarray:
    """Periodic eigenvalues lambda_1(0), lambda_2(0), ... (1-based index)."""
    if M is None:
        M = matrix_oracle.default_truncation(params.c, max(n_limit, 12))
    return _numbered(
        params,
        0.0,
        (2.0 * params.n1) ** 2 + 2 * params.c,
        2 * params.n1 + 1,
        lambda n: (2.0 * n) ** 2,
        params.n1,
        M,
    )


def numbered_antiperiodic(params: PotentialParams, n_limit: int = 12,
                          M: int | None = None) -> np.ndarray:
    """Antiperiodic eigenvalues lambda_1(1), lambda_2(1), ..."""
    if M is None:
        M = matrix_oracle.default_truncation(params.c, max(n_limit, 12))
    return _numbered(
        params,
        1.0,
        (2.0 * params.n2 + 1.0) ** 2 + 2 * params.c,
        2 * params.n2 + 2,
        lambda n: (2.0 * n + 1.0) ** 2,
        params.n2,
        M,
    )


# ---------------------------------------------------------------------------
# Newton refinement of a single Bloch point
# ---------------------------------------------------------------------------


def refine(params: PotentialParams, t: float, lam0: complex, n: int = 0,
           tol: float = 1e-9, max_iter: int = 50,
           ode_tol: float = hill_core.DEFAULT_TOL) -> BlochPoint:
    """Newton iteration on F(lambda) - 2 cos(pi t) from the seed lam0.

    Raises NearSingular as soon as |F'| < 1e-8 (double-point territory;
    use find_double_point) and NoConvergence on a basin miss.
    """
    target = 2.0 * math.cos(math.pi * t)
    lam = complex(lam0)
    for _ in range(max_iter):
        F, Fp = hill_core.discriminant(params, lam, tol=ode_tol)
        if abs(Fp) < FPRIME_FLOOR:
            raise NearSingular(f"|F'|={abs(Fp):.2e} at lambda={lam:.10g}")
        resid = abs(F - target)
        if resid < tol:
            return _polish_real(params, BlochPoint(n, abs(t), lam, resid), target,
                                tol, ode_tol)
        lam = lam - (F - target) / Fp
    raise NoConvergence(f"no convergence from seed {lam0:.10g} at t={t}")


def _polish_real(params, point, target, tol, ode_tol):
    """Snap a converged point with tiny Im onto the real axis when valid."""
    if point.lam.imag == 0.0 or abs(point.lam.imag) > REAL_IM_TOL:
        return point
    lam = point.lam.real
    for _ in range(3):
        F, Fp = hill_core.discriminant(params, lam, tol=ode_tol)
        resid = abs(F.real - target)
        if resid < tol:
            return BlochPoint(point.n, point.t, complex(lam), resid, point.simple)
        if abs(Fp.real) < FPRIME_FLOOR:
            return point
        lam = lam - (F.real - target) / Fp.real
    return point


# ---------------------------------------------------------------------------
# band tracing
# ---------------------------------------------------------------------------


def _matrix_seed(params, t, guess, M):
    w = matrix_oracle.bloch_eigenvalues(params, t, M=M)
    return w[np.argmin(np.abs(w - guess))]


def _accept(params, t, seed, n, tol, ode_tol):
    """Refine with matrix fallback; accept raw seeds pinned by F' = 0 edges."""
    try:
        return refine(params, t, seed, n=n, tol=tol, ode_tol=ode_tol)
    except NearSingular:
        F, _ = hill_core.discriminant(params, seed, tol=ode_tol)
        resid = abs(F - 2.0 * math.cos(math.pi * t))
        if resid < tol:
            return BlochPoint(n, abs(t), complex(seed), resid, simple=False)
        raise


def trace_band(params: PotentialParams, n: int, t_grid=None,
               M: int | None = None, tol: float = 1e-9,
               max_points: int = 2 ** 14,
               ode_tol: float = hill_core.DEFAULT_TOL) -> Band:
    """Continuation of band n from t = 0 to t = 1.

    Seeds come from the numbered periodic eigenvalue and then from linear
    extrapolation, falling back to the nearest truncated-matrix eigenvalue;
    the grid is bisected where the chord-midpoint continuity test fails.
    """
    if n < 1:
        raise HillspecError(f"band index must be >= 1, got {n}")
    if t_grid is None:
        t_grid = np.linspace(0.0, 1.0, 129)
    t_grid = np.asarray(t_grid, dtype=float)
    if M is None:
        M = matrix_oracle.default_truncation(params.c, max(n + 2, 12))
    peri = numbered_periodic(params, n_limit=n + 2, M=M)
    if n > peri.size:
        raise CountMismatch(f"band {n} beyond the converged window ({peri.size})")

    band = Band(n=n)
    point = _accept(params, t_grid[0], peri[n - 1], n, tol, ode_tol)
    band.samples.append(point)

    def _guess(t):
        prev = band.samples[-1]
        if len(band.samples) >= 2:
            before = band.samples[-2]
            dt_prev = prev.t - before.t
            slope = (prev.lam - before.lam) / dt_prev if dt_prev > 0 else 0.0
        else:
            slope = 0.0
        return prev.lam + slope * (t - prev.t)

    j = 1
    while j < t_grid.size:
        target = t_grid[j]
        t_try = target
        halvings = 0
        while True:
            try:
                pt = _accept(params, t_try, _guess(t_try), n, tol, ode_tol)
                break
            except (NoConvergence, NearSingular):
                pass
            try:
                seed = _matrix_seed(params, t_try, _guess(t_try), M)
                pt = _accept(params, t_try, seed, n, tol, ode_tol)
                break
            except (NoConvergence, NearSingular):
                halvings += 1
                if halvings >= 10:
                    raise BandJump(
                        f"band {n}: step to t={target:.6g} rejected 10 times"
                    ) from None
                t_try = 0.5 * (band.samples[-1].t + t_try)
        band.samples.append(pt)
        if pt.t >= target:
            j += 1

    _bisect_refine(params, band, n, M, tol, ode_tol, max_points)
    _classify_band(params, band, M, tol, ode_tol)
    return band


def _bisect_refine(params, band, n, M, tol, ode_tol, max_points):
    """Insert midpoints until each chord passes the continuity test."""
    stack = list(range(len(band.samples) - 1, 0, -1))
    pts = band.samples
    while stack and len(pts) < max_points:
        j = stack.pop()
        a, b = pts[j - 1], pts[j]
        if b.t - a.t < 1e-7:
            continue
        chord = abs(b.lam - a.lam)
        if chord < 1e-6:
            continue
        tm = 0.5 * (a.t + b.t)
        guess = 0.5 * (a.lam + b.lam)
        try:
            mid = _accept(params, tm, guess, n, tol, ode_tol)
        except (NoConvergence, NearSingular):
            try:
                mid = _accept(params, tm, _matrix_seed(params, tm, guess, M),
                              n, tol, ode_tol)
            except (NoConvergence, NearSingular):
                continue
        deviation = abs(mid.lam - guess)
        pts.insert(j, mid)
        # renumber pending interval indices after the insertion
        stack = [i + 1 if i > j else i for i in stack]
        if deviation > 0.25 * chord + 1e-9:
            stack.extend([j + 1, j])


def _classify_band(params, band, M, tol, ode_tol):
    """Attach the real segment and, when present, the interior double point."""
    flags = [p.is_real for p in band.samples]
    if all(flags):
        band.real_segment = (0.0, 1.0)
        return
    if not flags[0]:
        band.real_segment = None
        return
    k = (band.n + 1) // 2
    try:
        dp = find_double_point(params, k, M=M, ode_tol=ode_tol)
    except (NotFound, Degenerate):
        last_real = max(p.t for p, ok in zip(band.samples, flags) if ok)
        band.real_segment = (0.0, last_real)
        return
    band.double_point = dp
    band.real_segment = (0.0, dp.t)
    point = BlochPoint(band.n, dp.t, complex(dp.lam),
                       residual=0.0, simple=False)
    ts = [p.t for p in band.samples]
    band.samples.insert(int(np.searchsorted(ts, dp.t)), point)


def trace_bands(params, ns, **kwargs):
    """Trace several bands, in parallel when HILLSPEC_THREADS > 1."""
    workers = int(os.environ.get("HILLSPEC_THREADS", "1") or "1")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda n: trace_band(params, n, **kwargs), ns))
    return [trace_band(params, n, **kwargs) for n in ns]


# ---------------------------------------------------------------------------
# interior double points (Theorem-6 machinery)
# ---------------------------------------------------------------------------


def find_double_point(params: PotentialParams, k: int, M: int | None = None,
                      samples: int = 41, fp_tol: float = 1e-11,
                      ode_tol: float = hill_core.DEFAULT_TOL) -> DoublePoint:
    """Locate the double Bloch eigenvalue of the band pair (2k-1, 2k).

    Solves F'(lambda) = 0 for real lambda inside
    I_k = [lambda_{2k-1}(0), lambda_{2k}(0)] by safeguarded Newton with a
    sampled sign-change bracket; the quasimomentum follows from
    t_k = arccos(F/2)/pi.
    """
    peri = numbered_periodic(params, n_limit=2 * k + 2, M=M)
    if peri.size < 2 * k:
        raise NotFound(f"pair {k} beyond the converged window")
    lam_a, lam_b = peri[2 * k - 2], peri[2 * k - 1]
    scale = 1.0 + abs(lam_a)
    if max(abs(lam_a.imag), abs(lam_b.imag)) > 1e-7 * scale:
        raise NotFound(f"pair {k} is not real (left the axis)")
    a, b = lam_a.real, lam_b.real
    if b - a < 1e-6 * scale:
        raise NotFound(f"interval I_{k} is degenerate (width {b - a:.2e})")

    pad = 1e-3 * (b - a)
    grid = np.linspace(a + pad, b - pad, samples)
    _, fp = hill_core.discriminant_many(params, grid, tol=ode_tol)
    fp = fp.real
    crossings = np.nonzero(fp[:-1] * fp[1:] < 0)[0]
    if crossings.size == 0:
        raise NotFound(f"no F' sign change inside I_{k} (numbering error?)")
    if crossings.size > 1:
        raise NotFound(
            f"{crossings.size} F' sign changes inside I_{k}; expected a single one"
        )
    lo, hi = grid[crossings[0]], grid[crossings[0] + 1]
    flo = fp[crossings[0]]

    lam = 0.5 * (lo + hi)
    for _ in range(60):
        _, fp_c = hill_core.discriminant(params, lam, tol=ode_tol)
        fp_val = fp_c.real
        if abs(fp_val) < fp_tol:
            break
        if fp_val * flo < 0:
            hi = lam
        else:
            lo = lam
        fpp = hill_core.second_derivative(params, lam, tol=ode_tol).real
        lam_new = lam - fp_val / fpp if fpp != 0 else 0.5 * (lo + hi)
        lam = lam_new if lo < lam_new < hi else 0.5 * (lo + hi)
    else:
        raise NotFound(f"F' refinement stalled in I_{k}")

    F, _ = hill_core.discriminant(params, lam, tol=ode_tol)
    F = F.real
    if not (-2.0 < F < 2.0):
        raise NotFound(f"F={F:.6g} outside (-2, 2) at the F' root of I_{k}")
    f_second = hill_core.second_derivative(params, lam, tol=ode_tol)
    if abs(f_second) < 1e-6:
        raise Degenerate(f"|F''|={abs(f_second):.2e} at pair {k}")
    t_k = math.acos(F / 2.0) / math.pi
    return DoublePoint(k=k, t=t_k, lam=float(lam), f_second=f_second)


# ---------------------------------------------------------------------------
# real spectrum: intervals and gaps (Theorem-5 structure)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RealSpectrum:
    mu: float
    base_index: int
    intervals: list
    gaps: list


def real_spectrum(params: PotentialParams, n_max: int,
                  M: int | None = None) -> RealSpectrum:
    """Spectrum intervals/gaps on the real axis right of lambda_{2n}(0), n = n1+2.

    Also locates the smallest real periodic eigenvalue mu and verifies
    F > 2 at probe points left of it (no real spectrum there).
    """
    peri = numbered_periodic(params, n_limit=2 * n_max + 6, M=M)
    scale = 1.0 + np.abs(peri).max(initial=1.0)
    real_mask = np.abs(peri.imag) <= 1e-7 * scale
    if not real_mask.any():
        raise HillspecError("no real periodic eigenvalue in the window")
    mu = float(np.min(peri.real[real_mask]))

    probes = mu - np.array([0.25, 0.5, 1.0, 2.0, 4.0])
    F, _ = hill_core.discriminant_many(params, probes)
    if not np.all(F.real > 2.0 - 1e-9):
        raise HillspecError("found real spectrum left of the smallest "
                            "real periodic eigenvalue")

    n = params.n1 + 2
    intervals, gaps = [], []
    j = 2 * n  # 1-based index of lambda_{2n}(0)
    while j + 2 <= peri.size and len(intervals) < n_max:
        # gap (lambda_{2n+2i}, lambda_{2n+2i+1}), interval [.._{+1}, .._{+2}]
        gaps.append((float(peri[j - 1].real), float(peri[j].real)))
        intervals.append((float(peri[j].real), float(peri[j + 1].real)))
        j += 2
    return RealSpectrum(mu=mu, base_index=n, intervals=intervals, gaps=gaps)
