"""Spectra of the periodic/antiperiodic/Dirichlet matrices and the root web.

Four interlinked root families hang off a single chain state: the periodic
eigenvalues lambda^+, the antiperiodic ones lambda^-, the roots eta of the
averaged polynomial P = prod(x - eta_a), and the critical points zeta of P'.
They satisfy  prod(x - lambda^+_k) = P(x) - 2*eps  and
prod(x - lambda^-_k) = P(x) + 2*eps  with eps = prod(a_j).

All polynomial evaluation is done in log-magnitude + sign so the machinery
stays usable at N in the hundreds, where Vandermonde-scale products overflow
doubles.  Root finding never leaves the real line: every root is bracketed
between consecutive critical points, which is guaranteed to work exactly on
the admissible set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import FlaschkaState, SizeError, lax_matrix

# Margins closer to zero than this are reported as boundary: the admissible
# set is open and membership is not machine-decidable on its edge.
BOUNDARY_TOL = 1e-12


class NotAdmissibleError(ValueError):
    """Root data left the admissible region (complex or colliding roots)."""


class DegenerateSpacingError(ValueError):
    """Root spacing too small for the requested expansion or map."""


# ---------------------------------------------------------------------------
# log-magnitude polynomial evaluation from roots


def poly_log(x, roots):
    """Evaluate prod(x - r) as (log|.|, sign); vectorised in x."""
    x = np.asarray(x, dtype=float)
    diff = x[..., None] - np.asarray(roots)[None, ...] if x.ndim else x - np.asarray(roots)
    with np.errstate(divide="ignore"):
        logabs = np.sum(np.log(np.abs(diff)), axis=-1)
    sign = np.prod(np.sign(diff), axis=-1)
    return logabs, sign


def dpoly_log(x, roots):
    """Evaluate d/dx prod(x - r) as (log|.|, sign) at a scalar x."""
    roots = np.asarray(roots)
    diff = x - roots
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(diff))
    signs = np.sign(diff)
    if np.any(diff == 0.0):
        # x collides with a root: exactly one term survives
        k = int(np.argmin(np.abs(diff)))
        mask = np.arange(roots.size) != k
        return np.sum(logs[mask]), np.prod(signs[mask])
    total_log = np.sum(logs)
    total_sign = np.prod(signs)
    # sum over k of prod_{j != k}(x - r_j), accumulated stably
    term_logs = total_log - logs
    term_signs = total_sign * signs  # sign/|.| of removing factor k
    m = np.max(term_logs)
    acc = np.sum(term_signs * np.exp(term_logs - m))
    if acc == 0.0:
        return -np.inf, 0.0
    return m + np.log(np.abs(acc)), np.sign(acc)


def critical_points(roots) -> np.ndarray:
    """Roots of P' for P = prod(x - r), one in each gap between the r's."""
    roots = np.sort(np.asarray(roots, dtype=float))
    n = roots.size
    if n < 2:
        return np.zeros(0)
    if np.any(np.diff(roots) <= 0.0):
        raise DegenerateSpacingError("roots must be strictly increasing")
    zeta = np.empty(n - 1)
    for k in range(n - 1):
        lo, hi = roots[k], roots[k + 1]

        def f(x):
            la, s = dpoly_log(x, roots)
            return s * np.exp(min(la / n, 500.0))

        # P' changes sign across each gap; nudge off the exact endpoints
        h = (hi - lo) * 1e-14
        zeta[k] = brentq(f, lo + h, hi - h, xtol=1e-300, rtol=8.9e-16)
    return zeta


def _newton_polish(x, roots, c, steps=3):
    # Newton on Q = prod(x - r) + c, all in log space.
    for _ in range(steps):
        lp, sp = poly_log(x, roots)
        lq, sq = _logsum2(lp, sp, np.log(abs(c)), np.sign(c))
        if sq == 0.0:
            return x
        ld, sd = dpoly_log(x, roots)
        step = -(sq / sd) * np.exp(lq - ld)
        if not np.isfinite(step):
            return x
        x = x + step
    return x


def _logsum2(la, sa, lb, sb):
    # (log, sign) of sa*e^la + sb*e^lb
    if sa == 0.0:
        return lb, sb
    if sb == 0.0:
        return la, sa
    if la < lb:
        la, lb, sa, sb = lb, la, sb, sa
    val = sa + sb * np.exp(lb - la)
    if val == 0.0:
        return -np.inf, 0.0
    return la + np.log(np.abs(val)), np.sign(val)


def shifted_roots(roots, c) -> np.ndarray:
    """All-real roots of prod(x - r_k) + c, or raise NotAdmissibleError.

    Each root is bracketed between consecutive critical points of the base
    polynomial (plus two outer brackets), so only real arithmetic is used.
    """
    roots = np.asarray(roots, dtype=float)
    n = roots.size
    if c == 0.0:
        return roots.copy()
    if n == 1:
        return np.array([roots[0] - c])
    zeta = critical_points(roots)
    span = max(roots[-1] - roots[0], 1.0)
    # outer bracket offset: beyond it every factor exceeds |c|^(1/n)
    off = abs(c) ** (1.0 / n) + 1e-9 * span
    lo = roots[0] - off
    hi = roots[-1] + off
    lc = np.log(abs(c))
    sc = np.sign(c)

    def q(x):
        la, s = poly_log(x, roots)
        return s * np.exp(min(la - lc, 500.0)) + sc

    for _ in range(60):
        if q(lo) * (-1.0) ** n > 0.0:
            break
        off *= 2.0
        lo = roots[0] - off
    for _ in range(60):
        if q(hi) > 0.0:
            break
        off *= 2.0
        hi = roots[-1] + off

    nodes = np.concatenate([[lo], zeta, [hi]])
    vals = np.array([q(x) for x in nodes])
    out = np.empty(n)
    for k in range(n):
        a, b = nodes[k], nodes[k + 1]
        if vals[k] == 0.0 or vals[k + 1] == 0.0 or vals[k] * vals[k + 1] > 0.0:
            raise NotAdmissibleError(
                f"prod(x-r)+c has no real root in bracket {k}: "
                "shifted polynomial has complex roots"
            )
        x = brentq(q, a, b, xtol=1e-300, rtol=8.9e-16)
        out[k] = _newton_polish(x, roots, c)
    if np.any(np.diff(out) <= 0.0):
        raise NotAdmissibleError("shifted roots are not strictly increasing")
    return out


# ---------------------------------------------------------------------------
# eigenvalue extraction


def eig_periodic(state: FlaschkaState, sign: int) -> np.ndarray:
    """Ascending eigenvalues of the periodic (+1) / antiperiodic (-1) matrix."""
    return np.linalg.eigvalsh(lax_matrix(state, sign))


def dirichlet_spectrum(state: FlaschkaState) -> np.ndarray:
    """Ascending eigenvalues of the minor with first row and column removed.

    The minor is the same for both corner signs, since the corners sit in the
    deleted row/column.  Requires N >= 3 so the minor is at least 2x2.
    """
    if state.n < 3:
        raise SizeError("Dirichlet spectrum needs N >= 3")
    minor = lax_matrix(state, +1)[1:, 1:]
    return np.linalg.eigvalsh(minor)


# ---------------------------------------------------------------------------
# parity bookkeeping: v_k = (-1)^(N-k) selects the upper member of pair k


def parity_signs(n: int) -> np.ndarray:
    """Array v with v[j] = (-1)^(N-k) for k = j+1, j = 0..N-1."""
    return np.array([1 if (n - 1 - j) % 2 == 0 else -1 for j in range(n)])


def pair_bounds(lambda_plus, lambda_minus):
    """Per-pair (lower, upper) where upper_k = lambda_k^{v_k}.

    The Dirichlet variable mu_j then lives on [upper[j], lower[j+1]].
    """
    lp = np.asarray(lambda_plus, dtype=float)
    lm = np.asarray(lambda_minus, dtype=float)
    v = parity_signs(lp.size)
    upper = np.where(v > 0, lp, lm)
    lower = np.where(v > 0, lm, lp)
    return lower, upper


def interlacing_margin(lambda_plus, lambda_minus, mu) -> float:
    """Worst signed slack of the parity-indexed interlacing pattern.

    Non-negative iff mu_k lies in [lambda_k^{v_k}, lambda_{k+1}^{v_k}] for
    every k (up to the sign of the returned margin).
    """
    lower, upper = pair_bounds(lambda_plus, lambda_minus)
    mu = np.asarray(mu, dtype=float)
    left = mu - upper[:-1]
    right = lower[1:] - mu
    return float(min(left.min(), right.min()))


# ---------------------------------------------------------------------------
# spectral data record


@dataclass(frozen=True)
class SpectralData:
    """The four root families of one chain state plus the corner product eps.

    mu (the Dirichlet spectrum) is optional: synthetic spectra built from a
    root family alone do not carry one.
    """

    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray
    eps: float
    mu: np.ndarray | None = None

    def __post_init__(self):
        for name in ("lambda_plus", "lambda_minus", "eta", "zeta"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.mu is not None:
            object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")

    @property
    def n(self) -> int:
        return self.lambda_plus.size

    def polynomial_residuals(self) -> dict:
        """Relative residuals of P^+ = P - 2eps, P^- = P + 2eps at the roots."""
        out = {}
        la, _ = poly_log(self.eta, self.lambda_plus)
        out["P_plus_at_eta"] = float(
            np.max(np.abs(np.exp(la) - 2.0 * self.eps)) / (2.0 * self.eps)
        )
        la, _ = poly_log(self.lambda_minus, self.lambda_plus)
        out["P_plus_at_lambda_minus"] = float(
            np.max(np.abs(np.exp(la) - 4.0 * self.eps)) / (4.0 * self.eps)
        )
        la, _ = poly_log(self.lambda_plus, self.eta)
        out["P_at_lambda_plus"] = float(
            np.max(np.abs(np.exp(la) - 2.0 * self.eps)) / (2.0 * self.eps)
        )
        return out


def roots_from_lambda_plus(lambda_plus, eps) -> SpectralData:
    """Fill eta, lambda^- and zeta from the periodic spectrum and eps.

    Raises NotAdmissibleError if either shifted polynomial fails to have a
    complete set of real roots.
    """
    lp = np.sort(np.asarray(lambda_plus, dtype=float))
    eta = shifted_roots(lp, 2.0 * eps)
    lm = shifted_roots(lp, 4.0 * eps)
    zeta = critical_points(eta) if lp.size > 1 else np.zeros(0)
    return SpectralData(lambda_plus=lp, lambda_minus=lm, eta=eta, zeta=zeta, eps=eps)


def spectral_data_from_state(state: FlaschkaState) -> SpectralData:
    """Extract the full root web of a chain state.

    eps equals prod(a_j): the corner product is what couples the polynomial
    families, whether or not the state sits on a prescribed leaf.
    """
    eps = float(np.prod(state.a))
    lp = eig_periodic(state, +1)
    lm = eig_periodic(state, -1)
    zeta = critical_points(lp)
    eta = shifted_roots(lp, 2.0 * eps)
    mu = dirichlet_spectrum(state) if state.n >= 3 else None
    return SpectralData(lambda_plus=lp, lambda_minus=lm, eta=eta, zeta=zeta, eps=eps, mu=mu)


# ---------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class MembershipResult:
    admissible: bool
    margin: float
    boundary: bool

    def __bool__(self) -> bool:
        return self.admissible


def membership_from_eta(eta, eps) -> MembershipResult:
    """Admissibility test from the averaged roots: min|P(zeta)| > 2*eps."""
    eta = np.asarray(eta, dtype=float)
    if eta.size == 1:
        return MembershipResult(True, np.inf, False)
    zeta = critical_points(eta)
    la, sg = poly_log(zeta, eta)
    v = parity_signs(eta.size)[:-1]
    if np.any(sg * v < 0):
        return MembershipResult(False, -1.0, False)
    margin = float(np.min(np.exp(la)) / (2.0 * eps) - 1.0)
    return MembershipResult(margin > 0.0, margin, abs(margin) < BOUNDARY_TOL)


def membership_AN(lambda_plus, eps) -> MembershipResult:
    """Admissibility of a periodic spectrum: P + 4*eps keeps all roots real.

    Checked through the equivalent critical-value criterion on
    P = prod(x - lambda^+) + 2*eps evaluated at the shared critical points.
    """
    lp = np.asarray(lambda_plus, dtype=float)
    if lp.size == 1:
        return MembershipResult(True, np.inf, False)
    if np.any(np.diff(lp) <= 0.0):
        raise DegenerateSpacingError("lambda_plus must be strictly increasing")
    zeta = critical_points(lp)
    la, sg = poly_log(zeta, lp)  # P^+ at its own critical points
    vals = sg * np.exp(la) + 2.0 * eps  # P = P^+ + 2*eps
    v = parity_signs(lp.size)[:-1]
    signed = v * vals
    if np.any(signed <= 0.0):
        return MembershipResult(False, float(np.min(signed) / (2.0 * eps) - 1.0), False)
    margin = float(np.min(np.abs(vals)) / (2.0 * eps) - 1.0)
    return MembershipResult(margin > 0.0, margin, abs(margin) < BOUNDARY_TOL)


# ---------------------------------------------------------------------------
# first-order expansion and Jacobians


def lambda_expansion(eta, eps):
    """First-order root shift lambda_a^{+/-} ~ eta_a +/- 2*eps / P'(eta_a).

    Returns (lambda_plus_approx, lambda_minus_approx).
    """
    eta = np.asarray(eta, dtype=float)
    n = eta.size
    if n == 1:
        return eta + 2.0 * eps, eta - 2.0 * eps
    shift = np.empty(n)
    for a in range(n):
        ld, sd = dpoly_log(eta[a], eta)
        if not np.isfinite(ld) or ld < -700.0:
            raise DegenerateSpacingError("P'(eta_a) below machine floor")
        shift[a] = sd * 2.0 * eps * np.exp(-ld)
    # P(lambda^+) = +2 eps and P ~ P'(eta_a)(x - eta_a) near eta_a
    return eta + shift, eta - shift


def log_vandermonde(x) -> float:
    """log of Delta(x) = prod_{i<j}(x_j - x_i) for ascending x (log of abs)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return 0.0
    total = 0.0
    for j in range(1, n):
        total += float(np.sum(np.log(x[j] - x[:j])))
    return total


def jacobian_ratio(source, eps, which: str) -> float:
    """Vandermonde ratio Delta(source)/Delta(image) for a root-shift map.

    which = "lambda_minus_to_plus": image solves prod(x - source) - 4*eps = 0;
    which = "eta_to_plus":          image solves prod(x - source) - 2*eps = 0.
    The returned value equals |det| of the Jacobian of the map source -> image.
    """
    source = np.asarray(source, dtype=float)
    if which == "lambda_minus_to_plus":
        image = shifted_roots(source, -4.0 * eps)
    elif which == "eta_to_plus":
        image = shifted_roots(source, -2.0 * eps)
    else:
        raise ValueError(f"unknown map {which!r}")
    return float(np.exp(log_vandermonde(source) - log_vandermonde(image)))


def root_map(source, eps, which: str) -> np.ndarray:
    """The image roots of the map named in jacobian_ratio (for oracles)."""
    source = np.asarray(source, dtype=float)
    shift = {"lambda_minus_to_plus": -4.0 * eps, "eta_to_plus": -2.0 * eps}[which]
    return shifted_roots(source, shift)


# ---------------------------------------------------------------------------
# closed identities on the averaged roots


@dataclass(frozen=True)
class IdentityReport:
    product_identity_rel: float      # prod|P'(eta)| vs N^N prod|P(zeta)|
    min_critical_ok: bool            # (min|P(zeta)|)^{(N-1)/N} <= N min|P'(eta)|
    min_critical_slack: float
    pair_bound_ok: bool              # sqrt|P'(eta_k)P'(eta_k+1)| <= 4|P(zeta_k)|/gap
    pair_bound_slack: float

    @property
    def all_ok(self) -> bool:
        return (
            self.product_identity_rel < 1e-8
            and self.min_critical_ok
            and self.pair_bound_ok
        )


def appendix_identities(eta) -> IdentityReport:
    """Check the product identity and the two critical-value inequalities.

    All three follow from P'(eta_k) = N prod(eta_k - zeta_j) and
    P(zeta_j) = prod(zeta_j - eta_k); they are verified here in log space.
    """
    eta = np.sort(np.asarray(eta, dtype=float))
    n = eta.size
    if n < 2:
        raise SizeError("identities need N >= 2")
    zeta = critical_points(eta)
    log_dp = np.empty(n)
    for a in range(n):
        log_dp[a], _ = dpoly_log(eta[a], eta)
    log_pz, _ = poly_log(zeta, eta)

    lhs = float(np.sum(log_dp))
    rhs = float(n * np.log(n) + np.sum(log_pz))
    rel = abs(np.expm1(lhs - rhs))

    slack1 = float(np.log(n) + np.min(log_dp) - (n - 1) / n * np.min(log_pz))
    gaps = np.log(np.diff(eta))
    slack2 = float(
        np.min(np.log(4.0) + log_pz - gaps - 0.5 * (log_dp[:-1] + log_dp[1:]))
    )
    return IdentityReport(
        product_identity_rel=rel,
        min_critical_ok=slack1 >= -1e-12,
        min_critical_slack=slack1,
        pair_bound_ok=slack2 >= -1e-12,
        pair_bound_slack=slack2,
    )


# ---------------------------------------------------------------------------
# triangular interpolation matrix and its closed-form inverse


def interp_matrix(x) -> np.ndarray:
    """Upper-triangular matrix A with A_ij = [i<=j] prod_{m=i,m!=j} 1/(x_j - x_m)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if np.unique(x).size != n:
        raise ValueError("entries must be pairwise distinct")
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            diff = x[j] - x[i:]
            diff = np.delete(diff, j - i)
            A[i, j] = 1.0 / np.prod(diff) if diff.size else 1.0
    return A


def interp_matrix_inverse(x) -> np.ndarray:
    """Closed-form inverse: B_ij = [i<=j] prod_{k=j+1..N} (x_i - x_k)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    B = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            B[i, j] = float(np.prod(x[i] - x[j + 1 :])) if j + 1 < n else 1.0
    return B


def appendix_d_inverse(x) -> float:
    """Max-abs residual of A(x) @ A(x)^{-1} - Id with both factors in closed form."""
    A = interp_matrix(x)
    B = interp_matrix_inverse(x)
    n = A.shape[0]
    return float(np.max(np.abs(A @ B - np.eye(n))))


# ---------------------------------------------------------------------------
# synthetic admissible spectra (randomised test/driver inputs)


def random_admissible_spectrum(n, rng, min_gap=0.35, eps_fraction=0.3) -> SpectralData:
    """Draw a strictly admissible synthetic spectrum of size n.

    eta is drawn with spacing bounded below, then eps is set to a fixed
    fraction of the admissibility threshold min|P(zeta)|/2, which keeps a
    comfortable margin for every downstream identity.
    """
    gaps = min_gap + rng.uniform(0.0, 1.0, size=n)
    eta = np.cumsum(gaps)
    eta -= eta.mean()
    if n == 1:
        eps = 0.1
        return SpectralData(
            lambda_plus=eta + 2 * eps,
            lambda_minus=eta - 2 * eps,
            eta=eta,
            zeta=np.zeros(0),
            eps=eps,
        )
    zeta = critical_points(eta)
    la, _ = poly_log(zeta, eta)
    eps = eps_fraction * 0.5 * float(np.min(np.exp(la)))
    lp = shifted_roots(eta, -2.0 * eps)
    lm = shifted_roots(eta, +2.0 * eps)
    return SpectralData(lambda_plus=lp, lambda_minus=lm, eta=eta, zeta=zeta, eps=eps)
