"""The (N-1)-fold density integral, its determinant bounds and closed forms.

The central object is

    I = integral over K_1 x ... x K_{N-1} of Vandermonde(mu) /
        prod_k sqrt(P^+(mu_k) P^-(mu_k)) d mu,

with K_j the j-th admissible window between consecutive root pairs.  Because
the domain is a product of disjoint intervals, the integral factorises into
an (N-1) x (N-1) determinant of one-dimensional singular integrals, which is
evaluated here with a cosine endpoint substitution plus dyadic panels that
resolve the boundary layers left by the opposite root family.

Everything is tracked in log-magnitude: the values of interest span hundreds
of orders of magnitude over a sweep in N.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.integrate import quad

from .core import SizeError
from .spectral import (
    NotAdmissibleError,
    SpectralData,
    log_vandermonde,
    membership_from_eta,
    pair_bounds,
    parity_signs,
)


class AccuracyError(RuntimeError):
    """Quadrature failed to converge to the requested accuracy."""


@dataclass(frozen=True)
class IntegralResult:
    log_abs: float
    sign: int
    method: str  # determinant-quadrature | tensor-brute-force | lower-bound | upper-envelope
    est_error: float

    def __post_init__(self):
        if self.sign not in (+1, -1):
            raise ValueError("sign must be +1 or -1")
        if not self.est_error >= 0.0:
            raise ValueError("est_error must be non-negative")

    @property
    def value(self) -> float:
        """Plain float value; overflows to +/-inf when out of double range."""
        return self.sign * float(np.exp(self.log_abs))


# ---------------------------------------------------------------------------
# panelled Gauss-Legendre with cosine substitution


def _panel_edges(layer_lo: float, layer_hi: float) -> np.ndarray:
    """Dyadic theta-panels on [0, pi] refined towards both endpoints.

    layer_lo / layer_hi are the boundary-layer widths (in theta) to resolve
    at theta=pi (interval lower end) and theta=0 (upper end).
    """

    def depth(layer):
        if layer >= np.pi / 2:
            return 1
        return min(int(np.ceil(np.log2(np.pi / layer))), 52)

    k_hi = depth(max(layer_hi, 1e-300))
    k_lo = depth(max(layer_lo, 1e-300))
    right = np.pi * 2.0 ** (-np.arange(1, k_hi + 1, dtype=float))
    left = np.pi - np.pi * 2.0 ** (-np.arange(1, k_lo + 1, dtype=float))
    edges = np.unique(np.concatenate([[0.0, np.pi], right, left]))
    return edges


def cos_panel_integral(lo, hi, layer_lo, layer_hi, log_f, sign, order):
    """log of integral over [lo, hi] of sign * exp(log_f(mu)) d mu.

    Substitutes mu = m + r cos(theta) and applies Gauss-Legendre of the
    given order on each dyadic panel.  log_f must be vectorised and may go
    to -inf like log(distance)/2 at the interval endpoints; the r*sin(theta)
    factor of the substitution is added here.

    Returns (log_abs, sign) of the integral.
    """
    m = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    if r <= 0.0:
        return -np.inf, 1
    # boundary-layer width in theta ~ sqrt(2*delta/r)
    t_lo = np.sqrt(2.0 * min(layer_lo / r, 1.0)) if layer_lo < np.inf else np.pi
    t_hi = np.sqrt(2.0 * min(layer_hi / r, 1.0)) if layer_hi < np.inf else np.pi
    edges = _panel_edges(t_lo, t_hi)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    shift = None
    for a, b in zip(edges[:-1], edges[1:]):
        theta = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        w = 0.5 * (b - a) * weights
        mu = m + r * np.cos(theta)
        logs = log_f(mu) + np.log(r * np.sin(theta))
        if shift is None:
            finite = logs[np.isfinite(logs)]
            shift = float(np.max(finite)) if finite.size else 0.0
        total += float(np.sum(w * np.exp(np.clip(logs - shift, -745.0, 700.0))))
    if total == 0.0:
        return -np.inf, 1
    return shift + np.log(abs(total)), int(np.sign(total)) * sign


def logdet_full_pivot(mat) -> tuple[float, int]:
    """(log|det|, sign) by LU with full pivoting, accumulated in log space."""
    m = np.array(mat, dtype=float)
    n = m.shape[0]
    if n == 0:
        return 0.0, 1
    log_abs = 0.0
    sign = 1
    for k in range(n):
        sub = np.abs(m[k:, k:])
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        i += k
        j += k
        if m[i, j] == 0.0:
            return -np.inf, 1
        if i != k:
            m[[k, i], :] = m[[i, k], :]
            sign = -sign
        if j != k:
            m[:, [k, j]] = m[:, [j, k]]
            sign = -sign
        piv = m[k, k]
        sign *= 1 if piv > 0 else -1
        log_abs += np.log(abs(piv))
        if k + 1 < n:
            m[k + 1 :, k + 1 :] -= np.outer(m[k + 1 :, k], m[k, k + 1 :]) / piv
    return float(log_abs), int(sign)


# ---------------------------------------------------------------------------
# interval geometry shared by the determinant and envelope routes


def _intervals(spec: SpectralData):
    """Windows K_j = [upper_j, lower_{j+1}] plus the outside-partner gaps."""
    lower, upper = pair_bounds(spec.lambda_plus, spec.lambda_minus)
    delta = upper - lower
    left = upper[:-1]
    right = lower[1:]
    if np.any(right <= left):
        raise NotAdmissibleError("admissible windows are empty or inverted")
    return left, right, delta


def _require_membership(spec: SpectralData):
    res = membership_from_eta(spec.eta, spec.eps)
    if not res.admissible:
        raise NotAdmissibleError(f"spectrum outside the admissible set (margin {res.margin:.3g})")


def _monic_chebyshev(a: float, b: float, k: int):
    """Monic degree-k Chebyshev polynomial shifted to [a, b]."""
    if k == 0:
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    c = 2.0 * ((b - a) / 4.0) ** k

    def q(x):
        u = np.clip((2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a), -1.0, 1.0)
        return c * np.cos(k * np.arccos(u))

    return q


def _log_weight(spec: SpectralData):
    """log of the window weight 1/sqrt(P^+ P^-), vectorised in mu."""
    lp = spec.lambda_plus
    lm = spec.lambda_minus

    def log_w(mu):
        mu = np.asarray(mu, dtype=float)
        with np.errstate(divide="ignore"):
            s = np.sum(np.log(np.abs(mu[:, None] - lp[None, :])), axis=1)
            s += np.sum(np.log(np.abs(mu[:, None] - lm[None, :])), axis=1)
        return -0.5 * s

    return log_w


def integral_I(spec: SpectralData, quad_order: int = 24) -> IntegralResult:
    """Determinant-quadrature evaluation of the density integral.

    The Vandermonde splits column-wise over the disjoint windows, giving
    det[ integral over K_j of q_{i-1}(mu) w(mu) d mu ] with any monic basis
    q; shifted monic Chebyshev polynomials keep the matrix well conditioned.
    The accuracy estimate compares quad_order against 2*quad_order.
    """
    if quad_order < 8:
        raise ValueError("quad_order must be at least 8")
    n = spec.n
    if n == 1:
        return IntegralResult(0.0, +1, "determinant-quadrature", 0.0)
    _require_membership(spec)

    def assemble(order):
        left, right, delta = _intervals(spec)
        a_all = min(spec.lambda_minus[0], spec.lambda_plus[0])
        b_all = max(spec.lambda_minus[-1], spec.lambda_plus[-1])
        basis = [_monic_chebyshev(a_all, b_all, k) for k in range(n - 1)]
        log_w = _log_weight(spec)
        col_shift = np.zeros(n - 1)
        mat = np.zeros((n - 1, n - 1))
        for j in range(n - 1):
            shift = None
            for i in range(n - 1):
                # basis polynomials change sign inside a window, so the
                # panel sums carry the polynomial as a plain prefactor
                la, sg = _signed_window_integral(
                    left[j], right[j], delta[j], delta[j + 1], basis[i], log_w, order
                )
                if shift is None:
                    shift = la if np.isfinite(la) else 0.0
                    col_shift[j] = shift
                mat[i, j] = sg * np.exp(np.clip(la - shift, -745.0, 700.0))
        ld, sg = logdet_full_pivot(mat)
        return float(ld + np.sum(col_shift)), sg

    log1, sign1 = assemble(quad_order)
    log2, sign2 = assemble(2 * quad_order)
    est = abs(log1 - log2)
    if est > 1e-4 * max(abs(log2), 1.0):
        raise AccuracyError(f"density integral did not converge: delta log = {est:.3g}")
    if sign2 <= 0:
        raise AccuracyError("density integral evaluated non-positive")
    return IntegralResult(float(log2), int(sign2), "determinant-quadrature", float(est))


def _signed_window_integral(lo, hi, delta_lo, delta_hi, prefactor, log_w, order):
    """(log, sign) of integral over [lo,hi] of prefactor(mu)*exp(log_w(mu)).

    prefactor may change sign inside the window (polynomial basis), so the
    panel sums are accumulated with explicit signs under a common shift.
    """
    m = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    t_lo = np.sqrt(2.0 * min(delta_lo / r, 1.0))
    t_hi = np.sqrt(2.0 * min(delta_hi / r, 1.0))
    edges = _panel_edges(t_lo, t_hi)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    shift = None
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        theta = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        w = 0.5 * (b - a) * weights
        mu = m + r * np.cos(theta)
        base = log_w(mu) + np.log(r * np.sin(theta))
        if shift is None:
            finite = base[np.isfinite(base)]
            shift = float(np.max(finite)) if finite.size else 0.0
        total += float(np.sum(w * prefactor(mu) * np.exp(np.clip(base - shift, -745.0, 700.0))))
    if total == 0.0:
        return -np.inf, 1
    return shift + np.log(abs(total)), int(np.sign(total))


# ---------------------------------------------------------------------------
# brute-force oracles (N <= 3): adaptive quadrature on the raw integrand


def integral_bruteforce(spec: SpectralData) -> IntegralResult:
    """Tensor quadrature of the raw multi-dimensional integrand, N <= 3.

    Uses the adaptive QUADPACK integrator on the cosine-substituted
    integrand, nested per dimension: an independent route to the same
    number as integral_I.
    """
    n = spec.n
    if n == 1:
        return IntegralResult(0.0, +1, "tensor-brute-force", 0.0)
    if n > 3:
        raise SizeError("brute force supported for N <= 3 only")
    _require_membership(spec)
    left, right, _ = _intervals(spec)
    log_w_all = _log_weight(spec)

    def sub(j):
        m = 0.5 * (left[j] + right[j])
        r = 0.5 * (right[j] - left[j])
        log_w = log_w_all

        def val(theta, extra):
            mu = np.atleast_1d(m + r * np.cos(theta))
            lw = log_w(mu)[0] + np.log(r * np.sin(theta)) if np.sin(theta) > 0 else -np.inf
            return extra(mu[0]) * np.exp(lw) if np.isfinite(lw) else 0.0

        return val

    if n == 2:
        f = sub(0)
        val, err = quad(lambda t: f(t, lambda mu: 1.0), 0.0, np.pi, limit=400)
        if val <= 0:
            raise AccuracyError("brute-force integral non-positive")
        return IntegralResult(float(np.log(val)), +1, "tensor-brute-force", float(err / val))

    f0, f1 = sub(0), sub(1)

    def outer(t0):
        def with_mu0(mu0):
            inner, _ = quad(lambda t1: f1(t1, lambda mu1: mu1 - mu0), 0.0, np.pi, limit=200)
            return inner

        return f0(t0, with_mu0)

    val, err = quad(outer, 0.0, np.pi, limit=200)
    if val <= 0:
        raise AccuracyError("brute-force integral non-positive")
    return IntegralResult(float(np.log(val)), +1, "tensor-brute-force", float(err / max(val, 1e-300)))


# ---------------------------------------------------------------------------
# determinant lower bound


def window_log_ratio_matrix(spec: SpectralData, full: bool = False) -> np.ndarray:
    """Matrix A_ks = ln|(right_k - eta_s)/(left_k - eta_s)| over the windows.

    full=True keeps all N columns (the square extension whose det equals
    N times the truncated one); otherwise the last column is dropped.
    """
    left, right, _ = _intervals(spec)
    eta = spec.eta
    cols = spec.n if full else spec.n - 1
    with np.errstate(divide="ignore"):
        mat = np.log(np.abs(right[:, None] - eta[None, :cols])) - np.log(
            np.abs(left[:, None] - eta[None, :cols])
        )
    if not np.all(np.isfinite(mat)):
        raise ValueError("window endpoint collides with an eta root")
    return mat


def lower_bound_detA(spec: SpectralData) -> IntegralResult:
    """The exact finite-N lower bound N det(A) / Vandermonde(eta)."""
    n = spec.n
    if n == 1:
        return IntegralResult(0.0, +1, "lower-bound", 0.0)
    _require_membership(spec)
    A = window_log_ratio_matrix(spec)
    ld, sg = logdet_full_pivot(A)
    log_abs = float(np.log(n) + ld - log_vandermonde(spec.eta))
    return IntegralResult(log_abs, sg, "lower-bound", 0.0)


# ---------------------------------------------------------------------------
# closed form for the singular-pair entries


def phi_closed_form(x: float) -> float:
    """ln(2x + 1 + 2 sqrt(x(1+x))), stable for huge x."""
    if x < 0:
        raise ValueError("argument must be non-negative")
    if x > 1.0:
        return float(np.log(x) + np.log(2.0 + 1.0 / x + 2.0 * np.sqrt(1.0 + 1.0 / x)))
    return float(np.log1p(2.0 * x + 2.0 * np.sqrt(x * (1.0 + x))))


def phi_diag_element(delta: float, Delta: float) -> float:
    """Half-window integral of 1/sqrt((mu-e)(mu-e+delta)) in closed form.

    Equals the integral of 1/sqrt(mu(mu+1)) from 0 to Delta/(2*delta).
    """
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    if Delta < 0.0:
        raise ValueError("Delta must be non-negative")
    return phi_closed_form(Delta / (2.0 * delta))


# ---------------------------------------------------------------------------
# combinatorial upper envelope (small N)


def _envelope_column(spec, j, half, sigma_family, order):
    """Column entries of the envelope matrix for window j, half in {0,1}.

    Entry i: integral over the chosen half-window of
        (mu - lam_a^s) / (mu - lam_i^s) / sqrt((mu - lam_a^+)(mu - lam_a^-))
    with a = j + half and s the chosen family.
    """
    n = spec.n
    left, right, delta = _intervals(spec)
    mid = 0.5 * (left[j] + right[j])
    fam = spec.lambda_plus if sigma_family > 0 else spec.lambda_minus
    a = j + half
    pair_lo = min(spec.lambda_plus[a], spec.lambda_minus[a])
    pair_hi = max(spec.lambda_plus[a], spec.lambda_minus[a])
    if half == 0:
        lo, hi = left[j], mid
        layer_lo, layer_hi = delta[a], np.inf
    else:
        lo, hi = mid, right[j]
        layer_lo, layer_hi = np.inf, delta[a]
    col = np.zeros(n)
    for i in range(n):
        if i == a:
            col[i] = phi_diag_element(max(delta[a], 1e-300), right[j] - left[j])
            continue

        def log_f(mu, i=i):
            mu = np.asarray(mu, dtype=float)
            with np.errstate(divide="ignore"):
                out = np.log(np.abs(mu - fam[a])) - np.log(np.abs(mu - fam[i]))
                out -= 0.5 * (np.log(np.abs(mu - pair_lo)) + np.log(np.abs(mu - pair_hi)))
            return out

        mid_mu = 0.5 * (lo + hi)
        sgn = int(np.sign((mid_mu - fam[a]) / (mid_mu - fam[i])))
        la, sg = cos_panel_integral(lo, hi, layer_lo, layer_hi, log_f, sgn, order)
        col[i] = sg * np.exp(la)
    return col


def upper_envelope(spec: SpectralData, quad_order: int = 24) -> IntegralResult:
    """Cauchy-Schwarz envelope over the 2^(N-1) half-window assignments.

    Column j of each determinant depends only on the j-th binary choice, so
    all 2(N-1) distinct columns are integrated once and the combinatorial
    sum only reassembles determinants.  Restricted to N <= 12.
    """
    n = spec.n
    if n == 1:
        return IntegralResult(0.0, +1, "upper-envelope", 0.0)
    if n > 12:
        raise SizeError("upper envelope is limited to N <= 12 (2^(N-1) terms)")
    _require_membership(spec)
    log_s = {}
    for fam in (+1, -1):
        cols = [
            [_envelope_column(spec, j, half, fam, quad_order) for half in (0, 1)]
            for j in range(n - 1)
        ]
        ones = np.ones(n)
        log_dets = []
        for sigma in product((0, 1), repeat=n - 1):
            mat = np.column_stack([cols[j][sigma[j]] for j in range(n - 1)] + [ones])
            sign, ld = np.linalg.slogdet(mat)
            if sign != 0.0:
                log_dets.append(ld)
        if not log_dets:
            raise AccuracyError("all envelope determinants vanished")
        log_dets = np.array(log_dets)
        m = np.max(log_dets)
        log_s[fam] = float(m + np.log(np.sum(np.exp(log_dets - m))))
    log_abs = 0.5 * (
        log_s[+1]
        - log_vandermonde(spec.lambda_plus)
        + log_s[-1]
        - log_vandermonde(spec.lambda_minus)
    )
    return IntegralResult(float(log_abs), +1, "upper-envelope", 0.0)


# ---------------------------------------------------------------------------
# heuristic large-N approximant


def heuristic_asymptotic(spec: SpectralData, ell: float) -> float:
    """Log of the heuristic approximant built from the empirical root measures.

    log ~ N ln|ln eps| - ln Vandermonde(lambda+) +
          sum_a ln(1 + (2/ell) mean_{k != a} ln|lambda_a^- - lambda_k^+|).

    Returns -inf when the inner logarithm goes non-positive; no accuracy
    contract is attached to this quantity.
    """
    _require_membership(spec)
    n = spec.n
    lp = spec.lambda_plus
    lm = spec.lambda_minus
    total = n * np.log(np.abs(np.log(spec.eps))) - log_vandermonde(lp)
    for a in range(n):
        diffs = np.abs(lm[a] - lp)
        diffs = np.delete(diffs, a)
        inner = float(np.mean(np.log(diffs)))
        arg = 1.0 + (2.0 / ell) * inner
        if arg <= 0.0:
            return -np.inf
        total += np.log(arg)
    return float(total)


# ---------------------------------------------------------------------------
# auxiliary identities used by the verification suite


def square_extension_identity(spec: SpectralData) -> dict:
    """Residuals of det_N(extended) = N det_{N-1}(A) and its row-sum rule.

    The extension appends the eta_N column and a row of ones; its row sums
    vanish except the last, which equals N, because |P| = 2 eps at both ends
    of every window.
    """
    n = spec.n
    A_full = window_log_ratio_matrix(spec, full=True)
    ext = np.vstack([A_full, np.ones(n)])
    ld_ext, sg_ext = logdet_full_pivot(ext)
    A = window_log_ratio_matrix(spec)
    ld, sg = logdet_full_pivot(A)
    det_rel = abs(np.expm1(ld_ext - (np.log(n) + ld))) if sg_ext == sg else np.inf
    row_sums = np.sum(ext, axis=1)
    expected = np.zeros(n)
    expected[-1] = n
    return {
        "det_extension_rel": float(det_rel),
        "row_sum_max_abs": float(np.max(np.abs(row_sums - expected))),
    }
