"""Canonical Lagrange-Finsler pipeline.

A regular Lagrangian L(x, y) on the fractional tangent bundle induces
everything else: the fractional Hessian g, the semi-spray G, the
canonical N-connection N^a_j = d^alpha_{y_j} G^a, the Sasaki d-metric
and the canonical d-connection. All of them are exposed as fields so
geometry and gravity can differentiate them again.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np

from caputo_kernel import (
    CaputoConfig,
    FractionalOrder,
    OrderLike,
    as_order,
    fractional_integral_trapezoid,
)
from errors import DegenerateGrid, DegenerateHessian, EmptySample, GridTooCoarse
from expr import DerivativeContext, Expression, Symbol, caputo_partial_expression, evaluate_array, parse
from expr.nodes import ZERO, add, const, mul, sub
from expr.point import Point
from fields import ExpressionField, Field
from geometry import DConnection, DGeometry, DMetric, NConnection, frame_gradient_batch

MIN_TRAJECTORY_SAMPLES = 16


@dataclass(frozen=True)
class LagrangeModel:
    """
    A fractional Lagrange space (n, alpha, L).

    The model is immutable; derived symbolic fields are built once on
    first use and shared afterwards.
    """
    n: int
    alpha: FractionalOrder
    L: Expression
    caputo: CaputoConfig = field(default_factory=CaputoConfig)
    regularity_tol: float = 1e-10

    @classmethod
    def from_text(cls, source: str, n: int, alpha: OrderLike = 1.0,
                  caputo: Optional[CaputoConfig] = None,
                  regularity_tol: float = 1e-10) -> "LagrangeModel":
        """Parse L over x1..xn, y1..yn and build the model."""
        return cls(n, as_order(alpha), parse(source, n, n),
                   caputo or CaputoConfig(), regularity_tol)

    @property
    def m(self) -> int:
        return self.n

    @cached_property
    def derivatives(self) -> DerivativeContext:
        """Memo tables shared by every symbolic partial of this model."""
        return DerivativeContext()

    def _partial(self, e: Expression, position: int) -> Expression:
        return caputo_partial_expression(e, position, self.alpha, self.caputo, self.derivatives)

    def fiber(self, a: int) -> Symbol:
        return Symbol(f"y{a + 1}", self.n + a)

    @cached_property
    def hessian_field(self) -> ExpressionField:
        """g_ij = 1/4 (d_i d_j + d_j d_i) L over fiber coordinates; symmetric by construction."""
        n = self.n
        first = [self._partial(self.L, n + j) for j in range(n)]
        components = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(i, n):
                mixed = add(self._partial(first[j], n + i), self._partial(first[i], n + j))
                components[i, j] = components[j, i] = mul(const(0.25), mixed)
        return ExpressionField(components, n, n)

    @cached_property
    def spray_bracket_field(self) -> ExpressionField:
        """A_j = y^i d_{y_j}(d_{x_i} L) - d_{x_j} L, so that G^k = 1/4 g^{kj} A_j."""
        n = self.n
        base = [self._partial(self.L, i) for i in range(n)]
        components = np.empty((n,), dtype=object)
        for j in range(n):
            total = ZERO
            for i in range(n):
                total = add(total, mul(self.fiber(i), self._partial(base[i], n + j)))
            components[j] = sub(total, base[j])
        return ExpressionField(components, n, n)

    @cached_property
    def momentum_field(self) -> ExpressionField:
        """p_i = d_{y_i} L."""
        return ExpressionField([self._partial(self.L, self.n + i) for i in range(self.n)],
                               self.n, self.n)

    @cached_property
    def force_field(self) -> ExpressionField:
        """d_{x_i} L."""
        return ExpressionField([self._partial(self.L, i) for i in range(self.n)], self.n, self.n)


@dataclass
class Hessian:
    point: Point
    g: np.ndarray
    g_inv: np.ndarray


@dataclass
class RegularityReport:
    """Result of a regularity scan over sample points."""
    min_abs_det: float
    condition_numbers: List[float]
    failing_points: List[Point]
    passed: bool


def _require_regular(g: np.ndarray, u: np.ndarray, tol: float):
    determinants = np.abs(np.linalg.det(g))
    bad = np.flatnonzero(~(determinants > tol))
    if bad.size:
        k = int(bad[0])
        raise DegenerateHessian(
            f"|det g| = {determinants[k]:.3e} <= {tol:g} at u = {tuple(u[k])}"
        )


def fractional_hessian(m: LagrangeModel, p: Point) -> Hessian:
    """
    Fractional Hessian of L at p.

    Raises:
        NonPositiveAbscissa: p has a non-positive coordinate and alpha < 1
        DegenerateHessian: |det g| <= regularity_tol
    """
    p.require_admissible(m.alpha)
    g = m.hessian_field(p)
    _require_regular(g[None], p.coords[None], m.regularity_tol)
    g_inv = np.linalg.solve(g, np.eye(m.n))
    return Hessian(p, g, g_inv)


def regularity_check(m: LagrangeModel, sample: Sequence[Point]) -> RegularityReport:
    """Scan |det g| and cond(g) over the sample; never raises on degeneracy."""
    if not sample:
        raise EmptySample("regularity check needs at least one sample point")
    determinants, conditions, failing = [], [], []
    for p in sample:
        p.require_admissible(m.alpha)
        g = m.hessian_field(p)
        det = abs(float(np.linalg.det(g)))
        determinants.append(det)
        conditions.append(float(np.linalg.cond(g)))
        if not det > m.regularity_tol:
            failing.append(p)
    return RegularityReport(min(determinants), conditions, failing, not failing)


def finsler_homogeneity_check(m: LagrangeModel, sample: Sequence[Point],
                              lambdas: Sequence[float] = (2.0, 3.0),
                              rtol: float = 1e-8) -> bool:
    """True iff L(x, lambda*y) = lambda^2 L(x, y) and L > 0 wherever y != 0."""
    for p in sample:
        u = p.coords[None, :]
        value = float(evaluate_array(m.L, u)[0])
        if any(p.y) and not value > 0.0:
            return False
        for lam in lambdas:
            scaled = u.copy()
            scaled[0, m.n:] *= lam
            lhs = float(evaluate_array(m.L, scaled)[0])
            rhs = lam * lam * value
            if abs(lhs - rhs) > rtol * max(abs(lhs), abs(rhs), 1e-300):
                return False
    return True


class SemiSpray(Field):
    """G^k(x, y) = 1/4 g^{kj} A_j, evaluated with a pivoted solve per point."""

    def __init__(self, model: LagrangeModel):
        super().__init__(model.n, model.n, (model.n,))
        self.model = model
        self.hessian = model.hessian_field
        self.bracket = model.spray_bracket_field

    @property
    def is_zero(self) -> bool:
        """Holds exactly when L does not depend on x."""
        return self.bracket.is_zero()

    def evaluate(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.is_zero:
            return np.zeros((u.shape[0], self.n))
        g = self.hessian.evaluate(u)
        _require_regular(g, u, self.model.regularity_tol)
        bracket = self.bracket.evaluate(u)
        return 0.25 * np.linalg.solve(g, bracket[..., None])[..., 0]

    def partial_batch(self, u, index, order, cfg):
        if self.is_zero:
            return np.zeros((np.atleast_2d(u).shape[0], self.n))
        return super().partial_batch(u, index, order, cfg)


class SprayJacobianField(Field):
    """N^a_j = d^alpha_{y_j} G^a stored as [a, j]."""

    def __init__(self, spray: SemiSpray, order: OrderLike, cfg: CaputoConfig):
        super().__init__(spray.n, spray.m, (spray.n, spray.n))
        self.spray = spray
        self.order = as_order(order)
        self.cfg = cfg

    def evaluate(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        columns = [self.spray.partial_batch(u, self.n + j, self.order, self.cfg)
                   for j in range(self.n)]
        return np.stack(columns, axis=2)

    def partial_batch(self, u, index, order, cfg):
        if self.spray.is_zero:
            return np.zeros((np.atleast_2d(u).shape[0],) + self.shape)
        return super().partial_batch(u, index, order, cfg)


class CanonicalConnectionField(Field):
    """
    Canonical d-connection coefficients from N-adapted derivatives of g.

    L^i_jk = 1/2 g^{ih} (e_k g_jh + e_j g_hk - e_h g_jk)
    C^a_bc = 1/2 g^{ad} (e_c g_bd + e_b g_dc - e_d g_bc)

    The same L fills the h- and v-blocks, the same C the mixed ones.
    """

    def __init__(self, hessian: Field, N: NConnection, order: OrderLike, cfg: CaputoConfig,
                 regularity_tol: float):
        n = hessian.n
        super().__init__(n, n, (2 * n, 2 * n, 2 * n))
        self.hessian = hessian
        self.N = N
        self.order = as_order(order)
        self.cfg = cfg
        self.regularity_tol = regularity_tol

    def evaluate(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        n = self.n
        g = self.hessian.evaluate(u)
        _require_regular(g, u, self.regularity_tol)
        g_inv = np.linalg.inv(g)
        d_g = frame_gradient_batch(self.hessian, self.N, u, self.order, self.cfg)
        horizontal = d_g[:, :n]  # [k, gamma, i, j] = e_gamma g_ij
        vertical = d_g[:, n:]

        lowered_h = (np.einsum('Kkjh->Kjhk', horizontal)
                     + horizontal
                     - np.einsum('Khjk->Kjhk', horizontal))
        L_hat = 0.5 * np.einsum('Kih,Kjhk->Kijk', g_inv, lowered_h)

        lowered_v = (np.einsum('Kcbd->Kbdc', vertical)
                     + vertical
                     - np.einsum('Kdbc->Kbdc', vertical))
        C_hat = 0.5 * np.einsum('Kad,Kbdc->Kabc', g_inv, lowered_v)

        out = np.zeros((u.shape[0],) + self.shape)
        out[:, :n, :n, :n] = L_hat
        out[:, n:, n:, :n] = L_hat
        out[:, :n, :n, n:] = C_hat
        out[:, n:, n:, n:] = C_hat
        return out


def semi_spray(m: LagrangeModel) -> SemiSpray:
    return SemiSpray(m)


def canonical_n_connection(m: LagrangeModel) -> NConnection:
    """N^a_j = d^alpha_{y_j} G^a, numeric on the spray."""
    return NConnection(m.n, m.n, SprayJacobianField(semi_spray(m), m.alpha, m.caputo))


def sasaki_d_metric(m: LagrangeModel) -> DMetric:
    """Both blocks are the fractional Hessian field itself."""
    return DMetric(m.n, m.n, m.hessian_field, m.hessian_field)


def canonical_d_connection(m: LagrangeModel, N: Optional[NConnection] = None) -> DConnection:
    N = N or canonical_n_connection(m)
    field_ = CanonicalConnectionField(m.hessian_field, N, m.alpha, m.caputo, m.regularity_tol)
    return DConnection(m.n, m.n, field_)


def canonical_data(m: LagrangeModel) -> DGeometry:
    """The (g, N, D) triple of the canonical pipeline, sharing one N-connection."""
    N = canonical_n_connection(m)
    return DGeometry(sasaki_d_metric(m), N, canonical_d_connection(m, N))


def euler_lagrange_residual(m: LagrangeModel, traj) -> np.ndarray:
    """
    Euler-Lagrange residual of L along a trajectory.

    At alpha = 1 this is d_tau(d_{y_i} L) - d_{x_i} L with a central
    difference in tau.

    Below alpha = 1 the Caputo derivative has no chain rule, so the
    semi-spray equations follow from the N-adapted form

        (d_y d_y L) d^alpha_tau y + A(x, y) = 0,   A_j = y^i d_{y_j} d_{x_i} L - d_{x_j} L

    rather than from d^alpha_tau(d_y L). The residual is that equation in
    Volterra form, y(tau) - y(0) + I^alpha[(d_y d_y L)^{-1} A](tau), with
    the product trapezoidal rule for I^alpha.

    Args:
        m: Lagrange model
        traj: Trajectory with uniform tau (first sample at tau = 0 when alpha < 1)

    Returns:
        Array of shape (M - 2, n), one row per interior sample

    Raises:
        GridTooCoarse: Fewer than 16 samples
        DegenerateHessian: alpha < 1 and the Hessian is singular on the trajectory
    """
    tau = np.asarray(traj.tau, dtype=float)
    if len(tau) < MIN_TRAJECTORY_SAMPLES:
        raise GridTooCoarse(f"need at least {MIN_TRAJECTORY_SAMPLES} samples, got {len(tau)}")
    steps = np.diff(tau)
    h = float(steps[0])
    if h <= 0.0 or not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise DegenerateGrid("trajectory tau grid must be uniform and increasing")

    u = np.hstack([traj.x, traj.y])
    if m.alpha.is_classical:
        momentum = m.momentum_field.evaluate(u)
        force = m.force_field.evaluate(u)
        rate = (momentum[2:] - momentum[:-2]) / (2.0 * h)
        return rate - force[1:-1]

    if tau[0] != 0.0:
        raise DegenerateGrid("fractional residual needs the trajectory to start at tau = 0")
    g = m.hessian_field.evaluate(u)
    _require_regular(g, u, m.regularity_tol)
    bracket = m.spray_bracket_field.evaluate(u)
    acceleration = -0.5 * np.linalg.solve(g, bracket[..., None])[..., 0]
    y = np.asarray(traj.y, dtype=float)
    residual = y - y[0] - fractional_integral_trapezoid(acceleration, h, m.alpha.alpha)
    return residual[1:-1]


__all__: List[str] = [
    'LagrangeModel', 'Hessian', 'RegularityReport', 'SemiSpray',
    'fractional_hessian', 'regularity_check', 'finsler_homogeneity_check',
    'semi_spray', 'canonical_n_connection', 'sasaki_d_metric',
    'canonical_d_connection', 'canonical_data', 'euler_lagrange_residual',
]
