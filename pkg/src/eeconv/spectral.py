"""Symmetric eigendecomposition and Chebyshev matrix-function approximation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def apply(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Dense ``U f(Lambda) U^T``."""
        u = self.eigenvectors
        return (u * f(self.eigenvalues)[None, :]) @ u.T


def _fix_signs(u: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs[None, :]


def _jacobi(m: np.ndarray, max_sweeps: int, tol: float):
    a = np.array(m, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise ConvergenceError(f"cyclic Jacobi did not converge within {max_sweeps} sweeps")


def eigendecompose(m, method: str = "lapack", max_sweeps: int = 100) -> EigenDecomposition:
    """Eigenpairs of a symmetric matrix, eigenvalues ascending.

    ``method="lapack"`` uses ``numpy.linalg.eigh``; ``method="jacobi"`` runs a
    cyclic Jacobi sweep (O(N^3) per sweep in pure Python loops, meant for
    small matrices and cross-checking). Each eigenvector is signed so that its
    largest-magnitude entry is positive.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    asym = np.abs(m - m.T).max() if m.size else 0.0
    if asym > 1e-10 * max(1.0, np.abs(m).max()):
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    m = 0.5 * (m + m.T)
    if method == "lapack":
        w, u = np.linalg.eigh(m)
    elif method == "jacobi":
        w, u = _jacobi(m, max_sweeps, tol=1e-14)
        order = np.argsort(w, kind="stable")
        w, u = w[order], u[:, order]
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    return EigenDecomposition(eigenvalues=w, eigenvectors=_fix_signs(u))


def gershgorin_upper(m) -> float:
    """Gershgorin bound on the largest eigenvalue, padded for round-off in the matrix entries."""
    m = np.asarray(m)
    off = np.abs(m).sum(axis=1) - np.abs(np.diag(m))
    g = float(np.max(np.diag(m) + off))
    return g + 1e-12 * max(abs(g), 1.0)


def lambda_max_estimate(m, tol: float = 1e-2, max_iter: int = 2000, seed: int = 0,
                        return_info: bool = False):
    """Upper estimate of the largest eigenvalue of a symmetric PSD matrix.

    Power iteration gives a Rayleigh quotient ``rho <= lambda_max``; the
    estimate ``rho * (1 + tol/2) + tol/2`` is then capped by the Gershgorin
    bound, which is always a valid upper bound. If the iteration budget runs
    out the universal normalised-Laplacian bound 2 is returned and
    ``info["fallback"]`` is set.
    """
    m = np.asarray(m, dtype=float) if not hasattr(m, "tocsr") else m
    n = m.shape[0]
    cap = gershgorin_upper(m.toarray() if hasattr(m, "toarray") else m)
    info = {"iterations": 0, "fallback": False, "rayleigh": 0.0}
    if cap <= 0.0:
        return (0.0, info) if return_info else 0.0
    x = np.random.default_rng(seed).standard_normal(n)
    x /= np.linalg.norm(x)
    rho = 0.0
    for it in range(1, max_iter + 1):
        y = m @ x
        rho_new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            rho = 0.0
            break
        x = y / ny
        if abs(rho_new - rho) <= 1e-3 * tol * max(abs(rho_new), 1e-300):
            rho = rho_new
            break
        rho = rho_new
    else:
        info.update(iterations=max_iter, fallback=True, rayleigh=rho)
        return (2.0, info) if return_info else 2.0
    info.update(iterations=it, rayleigh=rho)
    est = min(rho * (1.0 + tol / 2) + tol / 2, cap)
    return (est, info) if return_info else est


@dataclass(frozen=True)
class ChebyshevFilter:
    coefficients: np.ndarray
    domain_upper: float = 2.0
    target: str = ""
    max_error: float = float("nan")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, lam) -> np.ndarray:
        """Evaluate the series at scalar spectral values."""
        x = 2.0 * np.asarray(lam, dtype=float) / self.domain_upper - 1.0
        t_prev, t_cur = np.ones_like(x), x
        out = self.coefficients[0] * t_prev
        if self.degree >= 1:
            out = out + self.coefficients[1] * t_cur
        for c in self.coefficients[2:]:
            t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
            out = out + c * t_cur
        return out


def chebyshev_fit(f: Callable, degree: int = 16, domain_upper: float = 2.0,
                  target: str = "", num_points: int | None = None) -> ChebyshevFilter:
    """Degree-``degree`` Chebyshev series of ``f`` on ``[0, domain_upper]`` by Gauss quadrature."""
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if domain_upper <= 0:
        raise ValueError("domain_upper must be positive")
    m = num_points or 4 * (degree + 1)
    m = max(m, 2 * degree + 2)
    theta = np.pi * (np.arange(m) + 0.5) / m
    lam = (np.cos(theta) + 1.0) * domain_upper / 2.0
    vals = np.asarray(f(lam), dtype=float)
    k = np.arange(degree + 1)
    coef = (2.0 / m) * (np.cos(np.outer(k, theta)) @ vals)
    coef[0] /= 2.0
    filt = ChebyshevFilter(coefficients=coef, domain_upper=float(domain_upper), target=target)
    grid = np.linspace(0.0, domain_upper, 1000)
    err = float(np.max(np.abs(filt(grid) - f(grid))))
    return ChebyshevFilter(coefficients=coef, domain_upper=float(domain_upper),
                           target=target, max_error=err)


def _check_domain(m, domain_upper: float):
    lmax = lambda_max_estimate(m, tol=1e-3)
    if lmax > domain_upper * (1.0 + 1e-3):
        raise ValueError(
            f"spectrum upper estimate {lmax:.4f} exceeds filter domain {domain_upper}; "
            "refit with a larger domain_upper"
        )


def chebyshev_apply_many(filters: Sequence[ChebyshevFilter], m, x,
                         check_domain: bool = True) -> list[np.ndarray]:
    """Apply several filters sharing one three-term recurrence on ``m``.

    ``m`` may be a dense array or a scipy sparse matrix; only ``m @ x``
    products are formed.
    """
    if not filters:
        return []
    u = filters[0].domain_upper
    if any(f.domain_upper != u for f in filters):
        raise ValueError("filters applied together must share domain_upper")
    if check_domain:
        _check_domain(m, u)
    x = np.asarray(x, dtype=float)
    deg = max(f.degree for f in filters)

    def scaled(v):
        return (2.0 / u) * (m @ v) - v

    t_prev = x
    outs = [f.coefficients[0] * t_prev for f in filters]
    if deg >= 1:
        t_cur = scaled(x)
        for o, f in zip(outs, filters):
            if f.degree >= 1:
                o += f.coefficients[1] * t_cur
    for k in range(2, deg + 1):
        t_prev, t_cur = t_cur, 2.0 * scaled(t_cur) - t_prev
        for o, f in zip(outs, filters):
            if f.degree >= k:
                o += f.coefficients[k] * t_cur
    return outs


def chebyshev_apply(filt: ChebyshevFilter, m, x, check_domain: bool = True) -> np.ndarray:
    return chebyshev_apply_many([filt], m, x, check_domain=check_domain)[0]


def power_iteration_norm(w, max_iter: int = 1000, tol: float = 1e-12, seed: int = 0) -> float:
    """Largest singular value of ``w`` by power iteration on ``w^T w``."""
    w = np.asarray(w, dtype=float)
    if not np.any(w):
        return 0.0
    x = np.random.default_rng(seed).standard_normal(w.shape[1])
    x /= np.linalg.norm(x)
    s2 = 0.0
    for _ in range(max_iter):
        y = w.T @ (w @ x)
        s2_new = float(x @ y)
        x = y / np.linalg.norm(y)
        if abs(s2_new - s2) <= tol * s2_new:
            s2 = s2_new
            break
        s2 = s2_new
    return float(np.sqrt(s2))
