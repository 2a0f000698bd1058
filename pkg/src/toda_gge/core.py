"""Flaschka-Manakov phase points, periodic Lax matrices and the Toda flow.

The chain state lives in the variables (a_1..a_N, b_1..b_N) with a_j > 0.
The evolution is the periodic Toda flow

    db_j/dt = a_j^2 - a_{j-1}^2,      da_j/dt = (a_j/2) (b_{j+1} - b_j),

with all indices mod N.  The flow is isospectral for the lambda-twisted
Jacobi matrices L^(+1), L^(-1); conservation is *measured* by the test
suite, never enforced by the integrator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp


class SizeError(ValueError):
    """Chain length too small for the requested operation."""


class IntegrationError(RuntimeError):
    """Time stepping failed; carries the time actually reached."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(message)
        self.t_reached = t_reached


@dataclass(frozen=True)
class FlaschkaState:
    """Immutable chain state in Flaschka-Manakov variables.

    Attributes
    ----------
    a : ndarray, shape (n,)
        Off-diagonal variables, strictly positive.
    b : ndarray, shape (n,)
        Momentum-like diagonal variables.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.ndim != 1 or b.ndim != 1 or a.size != b.size:
            raise ValueError("a and b must be 1-d arrays of equal length")
        if a.size < 2:
            raise SizeError("chain needs at least two sites")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
            raise ValueError("state entries must be finite")
        if np.any(a <= 0.0):
            raise ValueError("all a_j must be strictly positive")

    @property
    def n(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class ChainParams:
    """Chain size, stretch parameter and the induced leaf constant.

    eps is always computed as exp(-n*ell/2); it is stored rather than
    recomputed so that every consumer sees the identical float.
    """

    n: int
    ell: float
    eps: float = field(init=False)

    def __post_init__(self):
        if self.n < 2:
            raise SizeError("chain needs at least two sites")
        if not self.ell > 0.0:
            raise ValueError("stretch parameter ell must be positive")
        object.__setattr__(self, "eps", math.exp(-0.5 * self.n * self.ell))


def lax_matrix(state: FlaschkaState, sign: int) -> np.ndarray:
    """Assemble the periodic (sign=+1) or antiperiodic (sign=-1) Lax matrix.

    The matrix is tridiagonal with diagonal b and off-diagonal a_1..a_{N-1};
    the corners (1,N),(N,1) carry sign*a_N.  For N=2 the corner lands on the
    off-diagonal entry, so (1,2) = (2,1) = a_1 + sign*a_2 (the entries sum).
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    n = state.n
    mat = np.zeros((n, n))
    idx = np.arange(n - 1)
    mat[idx, idx] = state.b[:-1]
    mat[n - 1, n - 1] = state.b[-1]
    mat[idx, idx + 1] += state.a[:-1]
    mat[idx + 1, idx] += state.a[:-1]
    mat[0, n - 1] += sign * state.a[-1]
    mat[n - 1, 0] += sign * state.a[-1]
    return mat


def hamiltonian(state: FlaschkaState) -> float:
    """Periodic Toda energy sum(b_j^2/2 + a_j^2)."""
    return float(0.5 * np.sum(state.b**2) + np.sum(state.a**2))


def conserved_traces(state: FlaschkaState, jmax: int) -> np.ndarray:
    """Traces tr((L^+)^j) for j = 1..jmax, computed from the Lax spectrum."""
    if jmax < 1:
        raise ValueError("jmax must be at least 1")
    lam = np.linalg.eigvalsh(lax_matrix(state, +1))
    return np.array([np.sum(lam**j) for j in range(1, jmax + 1)])


def _rhs(t, y, n):
    # y = (s, b) with s = ln a; keeps a > 0 by construction and turns
    # sum(s) and sum(b) into linear invariants that RK steps preserve exactly.
    s = y[:n]
    b = y[n:]
    a_sq = np.exp(2.0 * s)
    ds = 0.5 * (np.roll(b, -1) - b)
    db = a_sq - np.roll(a_sq, 1)
    return np.concatenate([ds, db])


def flow(state: FlaschkaState, t: float, tol: float = 1e-10) -> FlaschkaState:
    """Evolve the state for time t with an adaptive embedded RK45 scheme.

    Integrates in (ln a, b), which preserves positivity of a exactly and
    keeps the leaf invariants sum(b), prod(a) to machine precision (they are
    linear functionals of the integrated variables).

    Raises
    ------
    IntegrationError
        if the adaptive stepper fails before reaching t; the exception
        carries the time actually reached.
    """
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    if t == 0.0:
        return state
    n = state.n
    y0 = np.concatenate([np.log(state.a), state.b])
    sol = solve_ivp(
        _rhs,
        (0.0, t),
        y0,
        method="RK45",
        rtol=tol,
        atol=tol,
        args=(n,),
        dense_output=False,
    )
    if not sol.success:
        reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(f"flow stopped at t={reached}: {sol.message}", reached)
    y = sol.y[:, -1]
    return FlaschkaState(a=np.exp(y[:n]), b=y[n:])
