"""Integrators for the semi-spray (nonlinear geodesic) equations.

The second-order equation (d^alpha_tau)^2 x^k + 2 G^k(x, y) = 0 is split
into the first-order Caputo system

    d^alpha_tau x = y,    d^alpha_tau y = -2 G(x, y)

and solved with the fractional Adams-Bashforth-Moulton predictor-corrector
over the full history. At alpha = 1 the same scheme is a trapezoidal
predictor-corrector; reference_classical_solve gives an independent
fourth-order answer for comparison.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from caputo_kernel import FractionalOrder, OrderLike, as_order
from errors import BlowUp, StepCountTooSmall
from expr.point import Point
from fields import Field
from gamma_function import lanczos_gamma

MIN_STEPS = 16
TOLERANCE_FLOOR = 1e-9


@dataclass
class Trajectory:
    """
    Sampled solution on a uniform tau grid.

    Row 0 holds the initial state at tau = 0, rows 1..M the steps on (0, T].
    `tolerance` is the solver's accumulated error indicator.
    """
    tau: np.ndarray
    x: np.ndarray
    y: np.ndarray
    order: FractionalOrder
    tolerance: float = TOLERANCE_FLOOR

    @property
    def steps(self) -> int:
        return len(self.tau) - 1

    def to_frame(self) -> pd.DataFrame:
        """Table with columns tau, x1..xn, y1..yn."""
        n = self.x.shape[1]
        frame = pd.DataFrame({'tau': self.tau})
        for i in range(n):
            frame[f"x{i + 1}"] = self.x[:, i]
        for i in range(n):
            frame[f"y{i + 1}"] = self.y[:, i]
        return frame


def _rhs(G: Field, state: np.ndarray, n: int) -> np.ndarray:
    x, y = state[:n], state[n:]
    acceleration = -2.0 * G.evaluate(np.concatenate([x, y])[None, :])[0]
    return np.concatenate([y, acceleration])


def _guard(state: np.ndarray, tau: float, overflow_guard: float):
    if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > overflow_guard:
        raise BlowUp(f"trajectory left |z| <= {overflow_guard:g} at tau = {tau:.6g}")


def _check_steps(M: int):
    if M < MIN_STEPS:
        raise StepCountTooSmall(f"need at least {MIN_STEPS} steps, got {M}")


def solve_semi_spray(G: Field, order: OrderLike, x0: Sequence[float], v0: Sequence[float],
                     T: float, M: int, history_window: Optional[int] = None,
                     overflow_guard: float = 1e12) -> Trajectory:
    """
    Fractional Adams-Bashforth-Moulton integration of the semi-spray system.

    Args:
        G: Semi-spray field with shape (n,)
        order: Caputo order alpha
        x0: Initial position
        v0: Initial fractional velocity y(0)
        T: Final parameter value
        M: Number of steps
        history_window: Keep only the most recent steps in the memory sums
            (short-memory principle); None keeps the full history
        overflow_guard: Largest admissible state component

    Returns:
        Trajectory on tau = 0, h, ..., T

    Raises:
        StepCountTooSmall: M < 16
        NonPositiveAbscissa: alpha < 1 and x0 has a non-positive component
        BlowUp: The state exceeds overflow_guard or stops being finite
    """
    _check_steps(M)
    order = as_order(order)
    alpha = order.alpha
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    n = len(x0)
    Point(x0, ()).require_admissible(order)

    h = T / M
    z0 = np.concatenate([x0, v0])
    states = np.zeros((M + 1, 2 * n))
    slopes = np.zeros((M + 1, 2 * n))
    states[0] = z0
    slopes[0] = _rhs(G, z0, n)

    predictor_scale = h ** alpha / lanczos_gamma(alpha + 1.0)
    corrector_scale = h ** alpha / lanczos_gamma(alpha + 2.0)
    powers = np.arange(M + 2, dtype=float) ** alpha
    powers_up = np.arange(M + 3, dtype=float) ** (alpha + 1.0)
    gap_total = 0.0

    for k in range(M):
        start = 0 if history_window is None else max(0, k + 1 - history_window)
        j = np.arange(start, k + 1)
        history = slopes[start:k + 1]

        b = powers[k + 1 - j] - powers[k - j]
        predicted = z0 + predictor_scale * (b @ history)

        a = powers_up[k - j + 2] + powers_up[k - j] - 2.0 * powers_up[k - j + 1]
        if start == 0:
            a[0] = k ** (alpha + 1.0) - (k - alpha) * (k + 1.0) ** alpha
        predicted_slope = _rhs(G, predicted, n)
        corrected = z0 + corrector_scale * (predicted_slope + a @ history)
        _guard(corrected, (k + 1) * h, overflow_guard)

        states[k + 1] = corrected
        slopes[k + 1] = _rhs(G, corrected, n)
        gap_total += corrector_scale * float(np.max(np.abs(slopes[k + 1] - predicted_slope)))

    tau = np.linspace(0.0, T, M + 1)
    return Trajectory(tau, states[:, :n], states[:, n:], order, max(gap_total, TOLERANCE_FLOOR))


def reference_classical_solve(G: Field, x0: Sequence[float], v0: Sequence[float], T: float,
                              M: int, overflow_guard: float = 1e12) -> Trajectory:
    """Classical fourth-order Runge-Kutta for x'' + 2 G(x, x') = 0."""
    _check_steps(M)
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    h = T / M
    states = np.zeros((M + 1, 2 * n))
    states[0] = np.concatenate([x0, np.asarray(v0, dtype=float)])

    for k in range(M):
        z = states[k]
        k1 = _rhs(G, z, n)
        k2 = _rhs(G, z + 0.5 * h * k1, n)
        k3 = _rhs(G, z + 0.5 * h * k2, n)
        k4 = _rhs(G, z + h * k3, n)
        states[k + 1] = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _guard(states[k + 1], (k + 1) * h, overflow_guard)

    tau = np.linspace(0.0, T, M + 1)
    return Trajectory(tau, states[:, :n], states[:, n:], FractionalOrder(1.0), TOLERANCE_FLOOR)


__all__: List[str] = ['Trajectory', 'solve_semi_spray', 'reference_classical_solve']
