"""Truncated Fourier systems: the brute-force oracle for all spectra.

The Bloch problem at quasimomentum t is the complex symmetric tridiagonal
operator diag((2m+t)^2) + a*(shift + shift^T) with a = ic, m = -M..M.
The Dirichlet/Neumann/antiperiodic problems split into four symmetry
sectors (even/odd sine and cosine series) whose tridiagonal systems carry
small first-row corrections; their eigenvalues are polished to machine
accuracy by a continued-fraction characteristic equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, CountMismatch
from .params import PotentialParams

_CF_EXTRA = 24  # continued-fraction depth beyond the pivot


def default_truncation(c: float, n_max: int) -> int:
    """Retained modes for eigenvalues up to index n_max: n_max + ceil(2c) + 16."""
    return int(n_max + math.ceil(2.0 * c) + 16)


def converged_bound(M: int) -> float:
    """Eigenvalues with |lambda| above this are truncation boundary artifacts."""
    return (2.0 * (M - 8)) ** 2 / 2.0


def filter_converged(eigs, M: int):
    eigs = np.asarray(eigs)
    return eigs[np.abs(eigs) <= converged_bound(M)]


def _sorted_by_re_im(w):
    return w[np.lexsort((w.imag, w.real))]


# ---------------------------------------------------------------------------
# Bloch (quasi-periodic) truncated operator
# ---------------------------------------------------------------------------


def bloch_modes(M: int) -> np.ndarray:
    return np.arange(-M, M + 1)


def bloch_matrix(params: PotentialParams, t: float, M: int) -> np.ndarray:
    m = bloch_modes(M)
    T = np.diag(((2.0 * m + t) ** 2).astype(complex))
    a = 1j * params.c
    off = np.full(2 * M, a)
    T += np.diag(off, 1) + np.diag(off, -1)
    return T


def bloch_eigenvalues(params: PotentialParams, t: float, M: int | None = None,
                      n_max: int = 12) -> np.ndarray:
    """All 2M+1 eigenvalues of the truncated Bloch operator, (Re, Im)-sorted."""
    if M is None:
        M = default_truncation(params.c, n_max)
    try:
        w = np.linalg.eigvals(bloch_matrix(params, t, M))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceError(f"eigen-iteration failed: {exc}") from exc
    return _sorted_by_re_im(w)


def bloch_eigensystem(params: PotentialParams, t: float, M: int):
    """Sorted eigenvalues with right and adjoint (left) eigenvectors.

    Columns of vr solve T v = w v; columns of vl solve T^H u = conj(w) u,
    aligned index-by-index with w.  All columns are unit norm with the
    largest-magnitude entry rotated to the positive real axis.
    """
    T = bloch_matrix(params, t, M)
    try:
        w, vl, vr = scipy.linalg.eig(T, left=True, right=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise ConvergenceError(f"eigen-iteration failed: {exc}") from exc
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    vr = vr[:, order]
    vl = vl[:, order]
    for v in (vr, vl):
        idx = np.argmax(np.abs(v), axis=0)
        lead = v[idx, np.arange(v.shape[1])]
        v *= np.where(np.abs(lead) > 0, np.abs(lead) / lead, 1.0)
        v /= np.linalg.norm(v, axis=0)
    return w, vr, vl


# ---------------------------------------------------------------------------
# localization (Theorem-1 disks) and counting regions (Theorem-3)
# ---------------------------------------------------------------------------


@dataclass
class DiskReport:
    ok: bool
    violators: list = field(default_factory=list)
    max_excess: float = 0.0


def disk_cover_check(params: PotentialParams, t: float, eigs) -> DiskReport:
    """Check every eigenvalue lies in some disk |lambda - (2n+t)^2| <= 2c."""
    eigs = np.asarray(eigs, dtype=complex)
    if eigs.size == 0:
        return DiskReport(ok=True)
    n_hi = int(math.ceil(math.sqrt(np.max(np.abs(eigs))))) // 2 + 2
    centers = (2.0 * np.arange(-n_hi, n_hi + 1) + t) ** 2
    report = DiskReport(ok=True)
    for lam in eigs:
        dist = np.min(np.abs(lam - centers))
        slack = 1e-8 * (1.0 + abs(lam))
        if dist > 2.0 * params.c + slack:
            report.ok = False
            report.violators.append(complex(lam))
            report.max_excess = max(report.max_excess, dist - 2.0 * params.c)
    return report


@dataclass
class RegionCounts:
    kind: str
    rectangle_count: int
    rectangle_expected: int
    disk_counts: dict
    disk_expected: int = 2


def _in_rectangle(eigs, c, re_hi, slack):
    return (np.abs(eigs.imag) <= 2 * c + slack) & (eigs.real >= -2 * c - slack) & (
        eigs.real <= re_hi + slack
    )


def count_in_regions(params: PotentialParams, eigs, kind: str,
                     n_hi: int | None = None) -> RegionCounts:
    """Count eigenvalues per far disk and in the low-lying rectangle.

    Expected: 2 per disk beyond n1 (periodic) / n2 (antiperiodic), and
    2*n1+1 resp. 2*n2+2 in the rectangle.  Deviations raise CountMismatch
    (insufficient truncation or unconverged input).
    """
    eigs = np.asarray(eigs, dtype=complex)
    c = params.c
    slack = 1e-9 * (1.0 + np.abs(eigs.real).max(initial=1.0))
    if kind == "periodic":
        n_lo = params.n1
        centers = lambda n: (2.0 * n) ** 2
        rect_hi = (2.0 * params.n1) ** 2 + 2 * c
        rect_expected = 2 * params.n1 + 1
    elif kind == "antiperiodic":
        n_lo = params.n2
        centers = lambda n: (2.0 * n + 1.0) ** 2
        rect_hi = (2.0 * params.n2 + 1.0) ** 2 + 2 * c
        rect_expected = 2 * params.n2 + 2
    else:
        raise ValueError(f"kind must be periodic|antiperiodic, got {kind}")

    re_max = eigs.real.max(initial=0.0)
    if n_hi is None:
        n_hi = int(math.floor(math.sqrt(max(re_max, 0.0)) / 2.0)) - 1
    rect_count = int(np.sum(_in_rectangle(eigs, c, rect_hi, slack)))
    counts = {}
    for n in range(n_lo + 1, n_hi + 1):
        if centers(n) + 2 * c > re_max:
            break
        counts[n] = int(np.sum(np.abs(eigs - centers(n)) <= 2 * c + slack))
    result = RegionCounts(kind, rect_count, rect_expected, counts)
    bad = {n: k for n, k in counts.items() if k != 2}
    if rect_count != rect_expected or bad:
        raise CountMismatch(
            f"{kind}: rectangle {rect_count}/{rect_expected}, bad disks {bad} "
            f"(increase M?)"
        )
    return result


# ---------------------------------------------------------------------------
# boundary-problem sectors (Dirichlet / Neumann / antiperiodic split)
# ---------------------------------------------------------------------------
#
# even sine  sin(2kx)      : Dirichlet, periodic      ("dirichlet")
# even cosine 1, cos(2kx)  : Neumann, periodic        ("neumann")
# odd sine   sin((2k-1)x)  : Dirichlet, antiperiodic  ("antiperiodic_sine")
# odd cosine cos((2k-1)x)  : Neumann, antiperiodic    ("antiperiodic_cosine")

BOUNDARY_KINDS = ("dirichlet", "neumann", "antiperiodic_sine", "antiperiodic_cosine")


def _sector_diag(kind: str, count: int) -> np.ndarray:
    k = np.arange(1, count + 1)
    if kind in ("dirichlet", "neumann"):
        return (2.0 * k) ** 2
    return (2.0 * k - 1.0) ** 2


def _sector_corner(kind: str, a: complex):
    """lambda-dependent addition to the first diagonal entry."""
    if kind == "dirichlet":
        return lambda lam: 0.0
    if kind == "neumann":
        return lambda lam: 2.0 * a * a / lam
    if kind == "antiperiodic_sine":
        return lambda lam: -a
    if kind == "antiperiodic_cosine":
        return lambda lam: a
    raise ValueError(f"unknown sector kind {kind}")


def _sector_matrix(params: PotentialParams, kind: str, M: int,
                   corner_value: complex = 0.0) -> np.ndarray:
    d = _sector_diag(kind, M).astype(complex)
    d[0] += corner_value
    a = 1j * params.c
    off = np.full(M - 1, a)
    return np.diag(d) + np.diag(off, 1) + np.diag(off, -1)


def _neumann_full_matrix(params: PotentialParams, M: int) -> np.ndarray:
    """Unreduced even-cosine system including the constant mode."""
    d = np.concatenate([[0.0], _sector_diag("neumann", M)]).astype(complex)
    a = 1j * params.c
    A = np.diag(d)
    A += np.diag(np.full(M, a), 1)
    A += np.diag(np.full(M, a), -1)
    A[1, 0] = 2.0 * a  # constant mode couples twice into cos 2x
    return A


def _cf_char(lam, diag, a2, corner, pivot, depth):
    """Characteristic function of the sector system pivoted at one mode."""
    if pivot == 0:
        s = corner(lam)
    else:
        s = a2 / (lam - diag[0] - corner(lam))
        for i in range(1, pivot):
            s = a2 / (lam - diag[i] - s)
    u = 0.0
    for i in range(depth - 1, pivot, -1):
        u = a2 / (lam - diag[i] - u)
    return lam - diag[pivot] - s - u


def _neumann_ground_char(lam, diag, a2, depth):
    """Pivot at the constant cosine mode: lam = 2a^2 / (lam - 4 - u)."""
    u = 0.0
    for i in range(depth - 1, 0, -1):
        u = a2 / (lam - diag[i] - u)
    return lam - 2.0 * a2 / (lam - diag[0] - u)


def _secant(fun, x0, tol=1e-13, max_iter=80):
    f0 = fun(x0)
    if f0 == 0:
        return x0
    x1 = x0 * (1.0 + 1e-7) + 1e-9
    f1 = fun(x1)
    for _ in range(max_iter):
        if f1 == 0:
            return x1
        denom = f1 - f0
        if denom == 0:
            break
        x2 = x1 - f1 * (x1 - x0) / denom
        if abs(x2 - x1) <= tol * max(1.0, abs(x2)):
            return x2
        x0, f0, x1, f1 = x1, f1, x2, fun(x2)
    raise ConvergenceError("secant refinement stalled")


def sector_eigenvalue(params: PotentialParams, kind: str, near: complex) -> complex:
    """Machine-accurate sector eigenvalue closest to `near` (CF + secant).

    `near` should sit within O(c) of a sector diagonal entry; the pivot is
    the nearest mode.  Used where dense eig accuracy (~1e-10 absolute) is
    not enough, e.g. the c^{2n} PD/PN splitting.
    """
    a = 1j * params.c
    a2 = a * a
    count = int(math.sqrt(abs(near)) / 2 + 4) + _CF_EXTRA
    diag = _sector_diag(kind, count)
    pivot = int(np.argmin(np.abs(diag - near.real)))
    corner = _sector_corner(kind, a)
    fun = lambda lam: _cf_char(lam, diag, a2, corner, pivot, count)
    return complex(_secant(fun, complex(near)))


def neumann_ground_eigenvalue(params: PotentialParams, seed: complex | None = None,
                              depth: int = 48) -> complex:
    """The even-cosine Neumann eigenvalue continued from the constant mode."""
    a2 = (1j * params.c) ** 2
    diag = _sector_diag("neumann", depth)
    if seed is None:
        w = np.linalg.eigvals(_neumann_full_matrix(params, 24))
        seed = w[np.argmin(np.abs(w))]
    fun = lambda lam: _neumann_ground_char(lam, diag, a2, depth)
    return complex(_secant(fun, complex(seed)))


def _neumann_fixed_point(params: PotentialParams, seed: complex, pivot: int,
                         diag, a2, depth) -> complex:
    """Fixed point on the 2a^2/mu first-row correction, seeded from `seed`."""
    mu = complex(seed)
    for _ in range(20):
        frozen = 2.0 * a2 / mu
        fun = lambda lam: _cf_char(lam, diag, a2, lambda _lam: frozen, pivot, depth)
        mu_next = complex(_secant(fun, mu))
        if abs(mu_next - mu) < 1e-10 * max(1.0, abs(mu_next)):
            return mu_next
        mu = mu_next
    raise ConvergenceError(f"Neumann correction fixed point diverged near {seed:.6g}")


def boundary_eigenvalues(params: PotentialParams, kind: str,
                         M: int | None = None) -> np.ndarray:
    """Converged eigenvalues of one boundary-problem sector, (Re, Im)-sorted.

    The Neumann sector's lambda-dependent first-row correction 2a^2/mu is
    resolved by fixed point on the correction (<= 20 iterations, tolerance
    1e-10), one mode at a time; seeds come from the uncorrected linear
    systems.  The eigenvalue continued from the constant cosine mode is
    solved from its own pivot equation (the 2a^2/mu elimination is
    singular there).
    """
    if kind not in BOUNDARY_KINDS:
        raise ValueError(f"kind must be one of {BOUNDARY_KINDS}, got {kind}")
    if M is None:
        M = default_truncation(params.c, 12)
    a = 1j * params.c
    a2 = a * a
    depth = M + _CF_EXTRA
    diag_full = _sector_diag(kind, depth)
    corner = _sector_corner(kind, a)

    out = []
    if kind == "neumann":
        seeds = np.linalg.eigvals(_neumann_full_matrix(params, M))
        seeds = seeds[np.abs(seeds) <= converged_bound(M)]
        # nearest free mode decides the pivot; 0 is the constant mode
        free = np.concatenate([[0.0], diag_full])
        for seed in _sorted_by_re_im(seeds):
            j = int(np.argmin(np.abs(free - seed.real)))
            if j == 0:
                out.append(neumann_ground_eigenvalue(params, seed=seed))
            else:
                out.append(
                    _neumann_fixed_point(params, seed, j - 1, diag_full, a2, depth)
                )
    else:
        seeds = np.linalg.eigvals(_sector_matrix(params, kind, M))
        seeds = seeds[np.abs(seeds) <= converged_bound(M)]
        for seed in _sorted_by_re_im(seeds):
            pivot = int(np.argmin(np.abs(diag_full - seed.real)))
            fun = lambda lam: _cf_char(lam, diag_full, a2, corner, pivot, depth)
            out.append(complex(_secant(fun, complex(seed))))
    return _sorted_by_re_im(np.array(out, dtype=complex))
