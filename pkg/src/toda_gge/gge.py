"""Samplers for the generalised Gibbs ensembles and empirical spectral measures.

Two models are sampled.  The soft (theta) model puts density
exp(-tr V(L+)) prod a_j^(2 theta - 1) on the full phase space; for V = x^2
and N >= 3 the coordinates decouple into exact one-site marginals that are
sampled directly.  The hard (leaf) model fixes sum(b) = 0 and
prod(a) = exp(-N ell / 2) and is sampled by Metropolis random walks inside
the two zero-sum hyperplanes.

Every chain owns a spawned RNG stream, so batches are reproducible
independently of scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .core import FlaschkaState, lax_matrix
from .measures import GriddedMeasure


class TuningWarning(UserWarning):
    """Metropolis acceptance rate left the healthy band after burn-in."""


@dataclass(frozen=True)
class Potential:
    """Confining potential with the growth metadata the theory asks for.

    kind is either "polynomial" (coeffs in increasing degree order) or
    "callable"; growth_exponent is the algebraic growth rate at infinity
    used for grid sizing and hypothesis checks.
    """

    kind: str = "polynomial"
    coeffs: tuple = (0.0, 0.0, 1.0)
    fn: object = None
    dfn: object = None
    growth_exponent: float = 2.0

    def __post_init__(self):
        if self.kind not in ("polynomial", "callable"):
            raise ValueError("kind must be 'polynomial' or 'callable'")
        if self.kind == "callable" and self.fn is None:
            raise ValueError("callable potential needs fn")
        if self.kind == "polynomial":
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
            if len(self.coeffs) < 1:
                raise ValueError("empty coefficient list")
            deg = len(self.coeffs) - 1
            if deg % 2 != 0 or self.coeffs[-1] <= 0:
                raise ValueError("polynomial must have even degree and positive leading term")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            return np.polyval(self.coeffs[::-1], x)
        return np.asarray(self.fn(x), dtype=float)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "polynomial":
            dcoeffs = [k * c for k, c in enumerate(self.coeffs)][1:]
            return np.polyval(dcoeffs[::-1], x) if dcoeffs else np.zeros_like(x)
        if self.dfn is not None:
            return np.asarray(self.dfn(x), dtype=float)
        h = 1e-6 * np.maximum(np.abs(x), 1.0)
        return (self(x + h) - self(x - h)) / (2 * h)

    @property
    def is_even(self) -> bool:
        if self.kind != "polynomial":
            return False
        return all(c == 0.0 for c in self.coeffs[1::2])

    @property
    def is_pure_quadratic(self) -> bool:
        """True when V has degree exactly 2; the sampler then decouples."""
        return self.kind == "polynomial" and len(self.coeffs) == 3 and self.coeffs[2] > 0.0


QUADRATIC = Potential()


@dataclass(frozen=True)
class SamplerConfig:
    """Chain size, ensemble parameter and the Metropolis knobs.

    Exactly one of theta (soft model) or ell (leaf model) must be set.
    """

    n: int
    n_samples: int
    theta: float | None = None
    ell: float | None = None
    burn_in: int = 2000
    thin: int = 10
    proposal_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if (self.theta is None) == (self.ell is None):
            raise ValueError("set exactly one of theta (soft) or ell (leaf)")
        if self.theta is not None and not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.ell is not None and not self.ell > 0:
            raise ValueError("ell must be positive")
        if self.n < 2 or self.n_samples < 1:
            raise ValueError("need n >= 2 and n_samples >= 1")

    @property
    def eps(self) -> float:
        if self.ell is None:
            raise ValueError("eps is defined for the leaf model only")
        return math.exp(-0.5 * self.n * self.ell)


# ---------------------------------------------------------------------------
# soft model: exact one-site marginals for quadratic V


def sample_site_marginal(theta: float, v2: float, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw (a, b) pairs from the one-site law e^(-v2 b^2) a^(2 theta -1) e^(-2 v2 a^2).

    a^2 is Gamma(theta) with rate 2*v2; b is centred normal with variance
    1/(2*v2).  These are the exact marginals of the decoupled soft model.
    """
    a = np.sqrt(rng.gamma(shape=theta, scale=1.0 / (2.0 * v2), size=count))
    b = rng.normal(scale=np.sqrt(0.5 / v2), size=count)
    return a, b


def _tr_V(V: Potential, state_a, state_b, sign=+1):
    st = FlaschkaState(a=state_a, b=state_b)
    lam = np.linalg.eigvalsh(lax_matrix(st, sign))
    return float(np.sum(V(lam)))


def sample_unconstrained(cfg: SamplerConfig, V: Potential, rng=None):
    """Generator of soft-model states: density exp(-tr V(L+)) prod a^(2theta-1).

    Quadratic V with N >= 3 decouples exactly and is sampled directly;
    otherwise a log-a / b random-walk Metropolis chain is run, tuned to a
    30-40% acceptance rate during burn-in.
    """
    if cfg.theta is None:
        raise ValueError("unconstrained sampler needs theta")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n = cfg.n
    if V.is_pure_quadratic and n >= 3 and V.coeffs[1] == 0.0:
        v2 = V.coeffs[2]
        for _ in range(cfg.n_samples):
            a, b = sample_site_marginal(cfg.theta, v2, n, rng)
            yield FlaschkaState(a=a, b=b)
        return
    yield from _mcmc_unconstrained(cfg, V, rng)


def _mcmc_unconstrained(cfg: SamplerConfig, V: Potential, rng):
    n = cfg.n
    theta = cfg.theta
    s = np.zeros(n)  # ln a
    b = np.zeros(n)

    def logp(s, b):
        return -_tr_V(V, np.exp(s), b) + 2.0 * theta * np.sum(s)

    cur = logp(s, b)
    scale = cfg.proposal_scale
    accepted = 0
    proposed = 0
    total = cfg.burn_in + cfg.n_samples * cfg.thin
    for step in range(total):
        s_new = s + scale * rng.normal(size=n)
        b_new = b + scale * rng.normal(size=n)
        new = logp(s_new, b_new)
        proposed += 1
        if np.isfinite(new) and np.log(rng.uniform()) < new - cur:
            s, b, cur = s_new, b_new, new
            accepted += 1
        if step < cfg.burn_in and step > 0 and step % 200 == 0:
            rate = accepted / proposed
            scale *= 1.25 if rate > 0.4 else (0.8 if rate < 0.3 else 1.0)
            accepted = proposed = 0
        if step >= cfg.burn_in and (step - cfg.burn_in) % cfg.thin == cfg.thin - 1:
            yield FlaschkaState(a=np.exp(s), b=b.copy())
    _check_rate(accepted, proposed)


def _check_rate(accepted, proposed):
    if proposed == 0:
        return
    rate = accepted / proposed
    if not 0.1 <= rate <= 0.7:
        import warnings

        warnings.warn(f"acceptance rate {rate:.2f} outside [0.1, 0.7]", TuningWarning)


# ---------------------------------------------------------------------------
# hard model: random walk inside the two zero-sum hyperplanes


def _zero_sum_basis(n: int) -> np.ndarray:
    """Orthonormal basis (n x (n-1)) of the hyperplane sum(x) = 0."""
    basis = np.zeros((n, n - 1))
    for k in range(1, n):
        col = np.zeros(n)
        col[:k] = 1.0
        col[k] = -k
        basis[:, k - 1] = col / np.linalg.norm(col)
    return basis


def sample_constrained(cfg: SamplerConfig, V: Potential, rng=None):
    """Generator of leaf states: sum(b) = 0 and prod(a) = exp(-N ell / 2).

    Parametrised by s = ln a on the hyperplane sum(s) = ln eps and b on
    sum(b) = 0; in these coordinates the flat measure da db restricted to
    the leaf has log-density -tr V(L+) + sum(s) (the volume factor prod a_j
    from da = a ds; constant on the hyperplane, kept for the record).
    For quadratic V the b-block is an exact Gaussian on its hyperplane and
    is sampled directly; the s-block always uses pairwise Metropolis moves,
    which keep sum(s) fixed to the last bit.
    """
    if cfg.ell is None:
        raise ValueError("constrained sampler needs ell")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n = cfg.n
    s_bar = -0.5 * cfg.ell  # mean of ln a on the leaf
    s = np.full(n, s_bar)
    basis = _zero_sum_basis(n)
    quadratic = V.is_pure_quadratic and V.coeffs[1] == 0.0 and n >= 3
    v2 = V.coeffs[2] if quadratic else None

    if quadratic:
        # tr V(L+) = v2 (sum b^2 + 2 sum a^2) (+ const): blocks decouple
        def log_density(s, b):
            return -2.0 * v2 * float(np.sum(np.exp(2.0 * s)))

    else:
        def log_density(s, b):
            return -_tr_V(V, np.exp(s), b)

    def draw_b():
        if quadratic:
            # e^(-v2 sum b^2) restricted to the hyperplane: iid normals in
            # the orthonormal zero-sum coordinates
            w = rng.normal(scale=np.sqrt(0.5 / v2), size=n - 1)
            return basis @ w
        return None

    b = draw_b() if quadratic else basis @ (0.1 * rng.normal(size=n - 1))
    cur = log_density(s, b)
    scale = cfg.proposal_scale
    accepted = proposed = 0
    sweep = max(n, 8)  # pair moves per Metropolis sweep
    total = cfg.burn_in + cfg.n_samples * cfg.thin
    ea = np.exp(2.0 * s)  # cached site energies for the quadratic fast path

    for step in range(total):
        pairs = rng.integers(0, n, size=(sweep, 2))
        deltas = scale * rng.normal(size=sweep)
        log_us = np.log(rng.uniform(size=sweep))
        for m in range(sweep):
            i, j = pairs[m]
            if i == j:
                continue
            d = deltas[m]
            proposed += 1
            if quadratic:
                # O(1) energy delta: only sites i and j move
                ei = np.exp(2.0 * (s[i] + d))
                ej = np.exp(2.0 * (s[j] - d))
                dlog = -2.0 * v2 * (ei + ej - ea[i] - ea[j])
                if np.isfinite(dlog) and log_us[m] < dlog:
                    s[i] += d
                    s[j] -= d
                    ea[i], ea[j] = ei, ej
                    cur += dlog
                    accepted += 1
                continue
            s[i] += d
            s[j] -= d
            db = scale * rng.normal()
            b[i] += db
            b[j] -= db
            new = log_density(s, b)
            if np.isfinite(new) and log_us[m] < new - cur:
                cur = new
                accepted += 1
            else:
                s[i] -= d
                s[j] += d
                b[i] -= db
                b[j] += db
        if step < cfg.burn_in and step > 0 and step % 50 == 0:
            rate = accepted / max(proposed, 1)
            scale *= 1.25 if rate > 0.4 else (0.8 if rate < 0.3 else 1.0)
            accepted = proposed = 0
        if step >= cfg.burn_in and (step - cfg.burn_in) % cfg.thin == cfg.thin - 1:
            if quadratic:
                b = draw_b()
            # re-project: pair moves preserve the sums exactly, this guards
            # against float drift over very long runs
            s = s - (np.sum(s) - n * s_bar) / n
            b = b - np.sum(b) / n
            ea = np.exp(2.0 * s)
            cur = log_density(s, b)
            yield FlaschkaState(a=np.exp(s), b=b.copy())
    _check_rate(accepted, proposed)


# ---------------------------------------------------------------------------
# empirical spectral measures


def empirical_spectral_measure(samples, which: str, x0: float, h: float, n_cells: int) -> GriddedMeasure:
    """Pooled normalised histogram of one root family over a sample batch.

    which is one of "lambda_plus", "lambda_minus", "eta".
    """
    from .spectral import eig_periodic, shifted_roots

    values = []
    count = 0
    for st in samples:
        count += 1
        if which == "lambda_plus":
            values.append(eig_periodic(st, +1))
        elif which == "lambda_minus":
            values.append(eig_periodic(st, -1))
        elif which == "eta":
            lp = eig_periodic(st, +1)
            values.append(shifted_roots(lp, 2.0 * float(np.prod(st.a))))
        else:
            raise ValueError(f"unknown root family {which!r}")
    if count == 0:
        raise ValueError("need at least one sample")
    return GriddedMeasure.from_samples(np.concatenate(values), x0, h, n_cells)


# ---------------------------------------------------------------------------
# one-site normalisation for the quadratic soft model


def partition_scalar(theta: float, v2: float = 1.0) -> float:
    """One-site normalisation Z_1 = int e^(-v2 b^2 - 2 v2 a^2) a^(2 theta - 1) da db.

    Evaluated by adaptive quadrature; this repository's convention for the
    per-site factor of the soft-model partition function.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    b_int, _ = quad(lambda b: np.exp(-v2 * b * b), -np.inf, np.inf)
    a_int, _ = quad(
        lambda a: a ** (2.0 * theta - 1.0) * np.exp(-2.0 * v2 * a * a), 0.0, np.inf
    )
    return float(b_int * a_int)
