"""Probability measures on uniform grids and the functional toolkit on them.

A measure is piecewise-constant density on a uniform grid.  Every kernel
integral (the logarithmic potential above all) is done cell-exactly in
closed form, so no quadrature parameter enters anywhere downstream: the
grid is the single discretisation knob of the whole pipeline.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog


class GridCoverageError(ValueError):
    """Samples or supports fall outside the grid; carries suggested bounds."""

    def __init__(self, message, lo=None, hi=None):
        super().__init__(message)
        self.suggested = (lo, hi)


@dataclass(frozen=True)
class GriddedMeasure:
    """Piecewise-constant probability density on a uniform grid.

    x0 is the left edge of the first cell, h the cell width; density[i] is
    the per-unit-length value on [x0 + i*h, x0 + (i+1)*h].
    """

    x0: float
    h: float
    density: np.ndarray
    mass: float = field(init=False)

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        object.__setattr__(self, "density", d)
        if not self.h > 0.0:
            raise ValueError("cell width must be positive")
        if np.any(d < 0.0) or not np.all(np.isfinite(d)):
            raise ValueError("density must be finite and non-negative")
        object.__setattr__(self, "mass", float(np.sum(d) * self.h))

    @property
    def n(self) -> int:
        return self.density.size

    @property
    def centers(self) -> np.ndarray:
        return self.x0 + (np.arange(self.n) + 0.5) * self.h

    @property
    def edges(self) -> np.ndarray:
        return self.x0 + np.arange(self.n + 1) * self.h

    def normalized(self) -> "GriddedMeasure":
        if self.mass <= 0.0:
            raise ValueError("cannot normalise a zero measure")
        return GriddedMeasure(self.x0, self.h, self.density / self.mass)

    def mean(self) -> float:
        return float(np.sum(self.centers * self.density) * self.h)

    def moment(self, k: int) -> float:
        return float(np.sum(self.centers**k * self.density) * self.h)

    def integrate(self, f) -> float:
        """Integral of a callable against the measure (midpoint per cell)."""
        return float(np.sum(f(self.centers) * self.density) * self.h)

    # -- construction -------------------------------------------------------

    @staticmethod
    def from_samples(samples, x0: float, h: float, n: int) -> "GriddedMeasure":
        samples = np.asarray(samples, dtype=float).ravel()
        hi = x0 + n * h
        if samples.min() < x0 or samples.max() >= hi:
            pad = 0.05 * (samples.max() - samples.min() + 1.0)
            raise GridCoverageError(
                f"samples in [{samples.min():.6g}, {samples.max():.6g}] "
                f"fall outside grid [{x0:.6g}, {hi:.6g}]",
                lo=float(samples.min() - pad),
                hi=float(samples.max() + pad),
            )
        counts, _ = np.histogram(samples, bins=n, range=(x0, hi))
        return GriddedMeasure(x0, h, counts / (samples.size * h))

    @staticmethod
    def from_function(f, x0: float, h: float, n: int) -> "GriddedMeasure":
        grid = GriddedMeasure(x0, h, np.ones(n))
        vals = np.maximum(np.asarray(f(grid.centers), dtype=float), 0.0)
        return GriddedMeasure(x0, h, vals).normalized()

    # -- serialisation ------------------------------------------------------

    def header(self) -> dict:
        return {"x0": self.x0, "h": self.h, "n": self.n}

    def to_files(self, csv_path, json_path) -> None:
        with open(json_path, "w") as fh:
            json.dump(self.header(), fh, sort_keys=True)
            fh.write("\n")
        with open(csv_path, "w", newline="") as fh:
            fh.write("x,density\r\n")
            for x, d in zip(self.centers, self.density):
                fh.write(f"{float(x)!r},{float(d)!r}\r\n")

    @staticmethod
    def from_files(csv_path, json_path) -> "GriddedMeasure":
        with open(json_path) as fh:
            head = json.load(fh)
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
        dens = np.atleast_2d(data)[:, 1]
        if dens.size != head["n"]:
            raise ValueError("csv length disagrees with header")
        return GriddedMeasure(head["x0"], head["h"], dens)


# ---------------------------------------------------------------------------
# logarithmic potential, cell-exact


def _log_antiderivative(t):
    # primitive of ln|t| with value 0 at t = 0
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    nz = t != 0.0
    out[nz] = t[nz] * (np.log(np.abs(t[nz])) - 1.0)
    return out


def log_potential(mu: GriddedMeasure, x) -> np.ndarray | float:
    """U[mu](x) = integral of ln|x-y| d mu(y), exact per cell.

    Finite for every x because the cell primitive t(ln|t|-1) is continuous
    through zero.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xv = np.atleast_1d(x)
    left = xv[:, None] - mu.edges[None, :-1]
    right = xv[:, None] - mu.edges[None, 1:]
    vals = (_log_antiderivative(left) - _log_antiderivative(right)) @ mu.density
    return float(vals[0]) if scalar else vals


def log_potential_grid(mu: GriddedMeasure) -> np.ndarray:
    """U[mu] evaluated at all cell centers, via one discrete convolution."""
    n = mu.n
    m = np.arange(-(n - 1), n)
    kernel = _log_antiderivative((m + 0.5) * mu.h) - _log_antiderivative((m - 0.5) * mu.h)
    return np.convolve(mu.density, kernel, mode="full")[n - 1 : 2 * n - 1]


def entropy(mu: GriddedMeasure) -> float:
    """Differential entropy -sum rho ln rho * h with 0 ln 0 = 0."""
    d = mu.density
    pos = d > 0.0
    return float(-np.sum(d[pos] * np.log(d[pos])) * mu.h)


# ---------------------------------------------------------------------------
# bounded-Lipschitz distance as a finite linear program


def _node_masses(mu: GriddedMeasure, nu: GriddedMeasure):
    if mu.n == nu.n and mu.x0 == nu.x0 and mu.h == nu.h:
        return mu.centers, (mu.density - nu.density) * mu.h
    xs = np.concatenate([mu.centers, nu.centers])
    ws = np.concatenate([mu.density * mu.h, -nu.density * nu.h])
    order = np.argsort(xs, kind="stable")
    xs, ws = xs[order], ws[order]
    # merge coincident nodes
    keep = np.concatenate([[True], np.diff(xs) > 1e-12 * max(mu.h, nu.h)])
    idx = np.cumsum(keep) - 1
    merged_x = xs[keep]
    merged_w = np.zeros(merged_x.size)
    np.add.at(merged_w, idx, ws)
    return merged_x, merged_w


def bl_distance(mu: GriddedMeasure, nu: GriddedMeasure) -> float:
    """sup{ int f d(mu-nu) : sup|f| + Lip(f) <= 1 } over piecewise-linear f.

    Solved as a linear program in the node values of f on the union grid;
    exact for node-supported measures, discretisation error O(h) otherwise.
    """
    for m in (mu, nu):
        if abs(m.mass - 1.0) > 1e-8:
            raise ValueError("bl_distance needs normalised measures")
    x, w = _node_masses(mu, nu)
    n = x.size
    if n == 1:
        return 0.0
    gaps = np.diff(x)
    # variables: f_0..f_{n-1}, s, L
    nv = n + 2
    rows, cols, vals, rhs = [], [], [], []

    def add_row(entries, b):
        r = len(rhs)
        for c, v in entries:
            rows.append(r)
            cols.append(c)
            vals.append(v)
        rhs.append(b)

    for i in range(n):
        add_row([(i, 1.0), (n, -1.0)], 0.0)      # f_i <= s
        add_row([(i, -1.0), (n, -1.0)], 0.0)     # -f_i <= s
    for i in range(n - 1):
        add_row([(i + 1, 1.0), (i, -1.0), (n + 1, -gaps[i])], 0.0)
        add_row([(i, 1.0), (i + 1, -1.0), (n + 1, -gaps[i])], 0.0)
    add_row([(n, 1.0), (n + 1, 1.0)], 1.0)       # s + L <= 1

    A = sparse.coo_matrix((vals, (rows, cols)), shape=(len(rhs), nv)).tocsr()
    c = np.concatenate([-w, [0.0, 0.0]])
    bounds = [(None, None)] * n + [(0.0, None), (0.0, None)]
    res = linprog(c, A_ub=A, b_ub=np.array(rhs), bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"BL linear program failed: {res.message}")
    return float(-res.fun)


# ---------------------------------------------------------------------------
# regularisation pipeline: dilation, mean-preserving truncation, mollification


def dilate(mu: GriddedMeasure, factor: float) -> GriddedMeasure:
    """Pushforward under x -> factor*x; support scales, mass is untouched."""
    if not factor > 0.0:
        raise ValueError("dilation factor must be positive")
    return GriddedMeasure(mu.x0 * factor, mu.h * factor, mu.density / factor)


def _abs_moment_from_zero(mu: GriddedMeasure, side: int):
    """Cumulative integral of |x| d mu outward from 0 on one side.

    Returns (breakpoints y_k, F(y_k), cell index per stretch); F is
    piecewise-quadratic between breakpoints.  side=+1 integrates over
    [0, y], side=-1 over [-y, 0].
    """
    edges = mu.edges
    dens = mu.density
    ys = [0.0]
    Fs = [0.0]
    cells = []
    if side > 0:
        sel = np.where(edges[1:] > 0.0)[0]
        for i in sel:
            lo = max(edges[i], 0.0)
            hi = edges[i + 1]
            ys.append(hi)
            Fs.append(Fs[-1] + dens[i] * abs(hi**2 - lo**2) / 2.0)
            cells.append(i)
    else:
        sel = np.where(edges[:-1] < 0.0)[0][::-1]
        for i in sel:
            hi = min(edges[i + 1], 0.0)
            lo = edges[i]
            ys.append(-lo)
            Fs.append(Fs[-1] + dens[i] * abs(hi**2 - lo**2) / 2.0)
            cells.append(i)
    return np.array(ys), np.array(Fs), np.array(cells, dtype=int)


def _invert_abs_moment(mu: GriddedMeasure, side: int, target: float) -> float:
    """Smallest y with integral of |x| d mu over the one-sided window = target."""
    ys, Fs, cells = _abs_moment_from_zero(mu, side)
    if target > Fs[-1] + 1e-15:
        raise ValueError("truncation target exceeds available one-sided mass")
    k = int(np.searchsorted(Fs, target))
    if k == 0:
        return 0.0
    k = min(k, ys.size - 1)
    lo_y, hi_y = ys[k - 1], ys[k]
    lo_F = Fs[k - 1]
    # on this stretch F(y) = lo_F + rho*(y^2 - lo_y^2)/2 with the cell's rho
    rho = mu.density[cells[k - 1]]
    if rho <= 0.0:
        return hi_y
    return float(min(np.sqrt(lo_y**2 + 2.0 * (target - lo_F) / rho), hi_y))


def truncate_mean_preserving(mu: GriddedMeasure, eta: float):
    """Restrict to a window [-K1, K2] chosen so the windowed mean stays zero.

    Both one-sided |x| tail masses are cut down to (eta/2) * min(1, K~1, K~2),
    following the intermediate-value construction; the tail mass and tail
    |x|-mass outside the window are then both at most eta.

    Returns (restricted normalised measure, K1, K2).
    """
    if not 0.0 < eta:
        raise ValueError("eta must be positive")
    m_plus = _abs_moment_from_zero(mu, +1)[1][-1]
    m_minus = _abs_moment_from_zero(mu, -1)[1][-1]
    if abs(m_plus - m_minus) > 1e-8 * max(m_plus, m_minus, 1e-300):
        raise ValueError("measure must be centred: one-sided |x| masses differ")
    m_half = 0.5 * (m_plus + m_minus)
    if not eta < m_half:
        raise ValueError("eta too large: no truncation window exists")
    k1_tilde = _invert_abs_moment(mu, -1, 0.5 * m_half)
    k2_tilde = _invert_abs_moment(mu, +1, 0.5 * m_half)
    resid = 0.5 * eta * min(1.0, k1_tilde, k2_tilde)
    K1 = _invert_abs_moment(mu, -1, m_half - resid)
    K2 = _invert_abs_moment(mu, +1, m_half - resid)

    # restrict on the grid; boundary cells keep the covered fraction
    edges = mu.edges
    frac = np.clip((np.minimum(edges[1:], K2) - np.maximum(edges[:-1], -K1)) / mu.h, 0.0, 1.0)
    dens = mu.density * frac
    out = GriddedMeasure(mu.x0, mu.h, dens).normalized()
    return out, float(K1), float(K2)


def mollify(mu: GriddedMeasure, tau: float) -> GriddedMeasure:
    """Convolve with the uniform kernel on [-tau, tau], cell-exactly.

    The weights are the exact overlap areas of the box kernel with cell
    pairs, renormalised so mass is preserved to the last bit; symmetry of
    the weights preserves the mean exactly.
    """
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    h = mu.h
    pad = int(np.ceil(tau / h)) + 1
    m = np.arange(-pad, pad + 1)

    def tri_cdf(z):
        # integral of (h - |t|) over [-h, z], clamped to [-h, h]
        z = np.clip(z, -h, h)
        neg = z <= 0
        out = np.where(neg, h * z + z * z / 2.0 + h * h / 2.0,
                       h * h / 2.0 + h * z - z * z / 2.0)
        return out

    d = m * h
    overlap = tri_cdf(tau - d) - tri_cdf(-tau - d)
    w = overlap / np.sum(overlap)
    dens = np.convolve(mu.density, w, mode="full")
    return GriddedMeasure(mu.x0 - pad * h, h, dens)


# ---------------------------------------------------------------------------
# default grid sizing


def grid_for_potential(V, n_cells: int = 2048, tail: float = 1e-12):
    """Symmetric grid [-R, R] wide enough that exp(-V) keeps tail mass < tail."""
    R = 1.0
    for _ in range(60):
        xs = np.linspace(-2 * R, 2 * R, 4097)
        wts = np.exp(-np.asarray(V(xs), dtype=float))
        total = np.trapezoid(wts, xs)
        outside = np.trapezoid(np.where(np.abs(xs) > R, wts, 0.0), xs)
        if outside < tail * total:
            break
        R *= 1.5
    return -R, 2.0 * R / n_cells, n_cells
