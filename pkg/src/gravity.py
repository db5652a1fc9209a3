"""Frame transforms, fractional Einstein residuals and Levi-Civita constraints.

A FrameTransform A is stored as A[alpha, alpha'] with inverse B[alpha', alpha].
Metric components transform by congruence, A g A^T. N-adapted transforms
(block-diagonal in the h/v splitting) also act on the N-connection:
N' = A_v^T N B_h^T.
"""

import sys
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple, Union

import numpy as np

from caputo_kernel import CaputoConfig, OrderLike
from errors import EmptySample, NotNAdapted, SingularTransform
from expr.point import Point
from fields import ConstantField, Field, PullbackField
from geometry import (
    DConnection,
    DGeometry,
    DMetric,
    NConnection,
    anholonomy_coefficients,
    frame_gradient,
    full_geometry,
    metric_compatibility_residual,
)

N_ADAPTED_TOL = 1e-12
_SINGULAR_CONDITION = 1e12


class FrameTransform:
    """An (n+m)x(n+m) frame transform field A(u) with its pointwise inverse."""

    def __init__(self, n: int, m: int, field: Field):
        d = n + m
        if field.shape != (d, d):
            raise SingularTransform(f"frame transform must be {d}x{d}, got {field.shape}")
        self.n = n
        self.m = m
        self.field = field

    @classmethod
    def constant(cls, matrix, n: int, m: int) -> "FrameTransform":
        return cls(n, m, ConstantField(np.asarray(matrix, dtype=float), n, m))

    @classmethod
    def block_diagonal(cls, h_block, v_block) -> "FrameTransform":
        h_block = np.atleast_2d(np.asarray(h_block, dtype=float))
        v_block = np.atleast_2d(np.asarray(v_block, dtype=float))
        n, m = h_block.shape[0], v_block.shape[0]
        matrix = np.zeros((n + m, n + m))
        matrix[:n, :n] = h_block
        matrix[n:, n:] = v_block
        return cls.constant(matrix, n, m)

    @property
    def is_constant(self) -> bool:
        return isinstance(self.field, ConstantField)

    def at(self, p: Point) -> Tuple[np.ndarray, np.ndarray]:
        """
        A and its inverse at p.

        Raises:
            SingularTransform: A is not invertible at p
        """
        matrix = self.field(p)
        if not np.all(np.isfinite(matrix)) or np.linalg.cond(matrix) > _SINGULAR_CONDITION:
            raise SingularTransform(f"frame transform is singular at {p}")
        return matrix, np.linalg.inv(matrix)

    def is_n_adapted(self, p: Point) -> bool:
        matrix = self.field(p)
        n = self.n
        off_diagonal = max(np.max(np.abs(matrix[:n, n:]), initial=0.0),
                           np.max(np.abs(matrix[n:, :n]), initial=0.0))
        return off_diagonal <= N_ADAPTED_TOL


@dataclass
class SourceField:
    """Matter source Upsilon_{beta delta} in the N-adapted frame."""
    n: int
    m: int
    field: Field

    def __call__(self, p: Point) -> np.ndarray:
        return self.field(p)

    @classmethod
    def zero(cls, n: int, m: int) -> "SourceField":
        d = n + m
        return cls(n, m, ConstantField(np.zeros((d, d)), n, m))


class LCResiduals(NamedTuple):
    vertical_connection: float
    mixed_cartan: float
    anholonomy: float


def apply_frame_transform(g: Union[DMetric, np.ndarray], A: FrameTransform, p: Point,
                          inverse: bool = False) -> np.ndarray:
    """
    Congruence A g A^T of the full metric at p.

    With inverse=True the primed components are mapped back, B g' B^T.
    """
    matrix, inverse_matrix = A.at(p)
    values = g.full(p) if isinstance(g, DMetric) else np.asarray(g, dtype=float)
    if inverse:
        return inverse_matrix @ values @ inverse_matrix.T
    return matrix @ values @ matrix.T


def inverse_frame_transform(g_prime: Union[DMetric, np.ndarray], A: FrameTransform,
                            p: Point) -> np.ndarray:
    return apply_frame_transform(g_prime, A, p, inverse=True)


def _values(N: Union[NConnection, np.ndarray], p: Point) -> np.ndarray:
    if isinstance(N, NConnection):
        return N(p)
    return np.asarray(N, dtype=float)


def _adapted_blocks(A: FrameTransform, p: Point):
    if not A.is_n_adapted(p):
        raise NotNAdapted("frame transform mixes horizontal and vertical blocks")
    matrix, inverse = A.at(p)
    n = A.n
    return matrix[:n, :n], matrix[n:, n:], inverse[:n, :n], inverse[n:, n:]


def transform_n_connection(N: Union[NConnection, np.ndarray], A: FrameTransform, p: Point,
                           inverse: bool = False) -> np.ndarray:
    """
    N^{a'}_{j'} = A^{a'}_a A^j_{j'} N^a_j under an N-adapted transform.

    Args:
        N: N-connection or its (m, n) values at p
        A: Frame transform
        p: Point
        inverse: Apply the inverse law, recovering N from primed values

    Raises:
        NotNAdapted: A mixes the h and v blocks
    """
    A_h, A_v, B_h, B_v = _adapted_blocks(A, p)
    values = _values(N, p)
    if inverse:
        return B_v.T @ values @ A_h.T
    return A_v.T @ values @ B_h.T


def inverse_transform_n_connection(N_prime: Union[NConnection, np.ndarray], A: FrameTransform,
                                   p: Point) -> np.ndarray:
    return transform_n_connection(N_prime, A, p, inverse=True)


def transform_geometry(geometry: DGeometry, A: FrameTransform) -> Tuple[DGeometry, np.ndarray]:
    """
    Re-express (g, N, D) after the linear coordinate change u' = A^T u.

    The transform must be constant and N-adapted. Metric blocks, the
    N-connection and the connection coefficients are pulled back as
    numeric fields, so every derived quantity is recomputed from scratch
    in the new coordinates. Caputo partials are covariant under this
    change only at alpha = 1.

    Returns:
        The transformed geometry and the matrix A^T mapping points u -> u'
    """
    if not A.is_constant:
        raise SingularTransform("coordinate transforms must be constant")
    n, m = geometry.n, geometry.m
    probe = Point(np.ones(n), np.ones(m))
    A_h, A_v, B_h, B_v = _adapted_blocks(A, probe)
    matrix, inverse = A.at(probe)
    back = inverse.T

    g = geometry.metric
    metric = DMetric(
        n, m,
        PullbackField(g.h, back, lambda values: np.einsum('ij,kjl,ml->kim', B_h, values, B_h)),
        PullbackField(g.v, back, lambda values: np.einsum('ab,kbc,dc->kad', B_v, values, B_v)),
        g.signature,
    )
    nconnection = NConnection(n, m, PullbackField(
        geometry.nconnection.field, back,
        lambda values: np.einsum('ba,kbj,ij->kai', A_v, values, B_h)))
    dconnection = DConnection(n, m, PullbackField(
        geometry.dconnection.field, back,
        lambda values: np.einsum('tT,Bb,Cc,ktbc->kTBC', matrix, inverse, inverse, values)))
    return DGeometry(metric, nconnection, dconnection), matrix.T


class EinsteinSourceField(Field):
    """The computed Einstein d-tensor of a geometry, as a field."""

    def __init__(self, geometry: DGeometry, order: OrderLike, cfg: CaputoConfig):
        d = geometry.n + geometry.m
        super().__init__(geometry.n, geometry.m, (d, d))
        self.geometry = geometry
        self.order = order
        self.cfg = cfg

    def evaluate(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        geometry = self.geometry
        rows = []
        for coords in u:
            p = Point.from_coords(coords, self.n)
            *_, einstein = full_geometry(geometry.dconnection, geometry.nconnection,
                                         geometry.metric, p, self.order, self.cfg)
            rows.append(einstein.full())
        return np.array(rows)


def einstein_source(g: DMetric, N: NConnection, D: DConnection, order: OrderLike,
                    cfg: CaputoConfig) -> SourceField:
    """A source equal to the geometry's own Einstein tensor."""
    geometry = DGeometry(g, N, D)
    return SourceField(g.n, g.m, EinsteinSourceField(geometry, order, cfg))


def einstein_residual(g: DMetric, N: NConnection, D: DConnection, src: SourceField,
                      sample: Sequence[Point], order: OrderLike, cfg: CaputoConfig,
                      compatibility_tol: float = 1e-6) -> float:
    """
    max |G_{beta delta} - Upsilon_{beta delta}| over the sample.

    Warns on standard error when D is not compatible with g, since the
    field equations presume a metric-compatible connection.
    """
    if not sample:
        raise EmptySample("einstein residual needs at least one sample point")
    compatibility = metric_compatibility_residual(D, g, N, sample, order, cfg)
    if compatibility > compatibility_tol:
        print(f"⚠ connection is not metric compatible (residual {compatibility:.3e})",
              file=sys.stderr)

    worst = 0.0
    for p in sample:
        *_, einstein = full_geometry(D, N, g, p, order, cfg)
        worst = max(worst, float(np.max(np.abs(einstein.full() - src(p)))))
    return worst


def lc_constraint_residuals(geometry: DGeometry, sample: Sequence[Point], order: OrderLike,
                            cfg: CaputoConfig) -> LCResiduals:
    """
    Residuals of the three constraints that make D Levi-Civita compatible.

    L^c_aj = e_a(N^c_j), C^i_jb = 0 and Omega^a_ji = 0, each reported
    as a separate maximum over the sample.
    """
    if not sample:
        raise EmptySample("constraint residuals need at least one sample point")
    n = geometry.n
    D, N = geometry.dconnection, geometry.nconnection
    vertical, mixed, anholonomy = 0.0, 0.0, 0.0
    for p in sample:
        gamma = D(p)
        vertical_n = frame_gradient(N.field, N, p, order, cfg)[n:]  # [a, c, j]
        vertical = max(vertical, float(np.max(np.abs(
            gamma[n:, n:, :n] - vertical_n.transpose(1, 0, 2)))))
        mixed = max(mixed, float(np.max(np.abs(gamma[:n, :n, n:]))))
        anholonomy = max(anholonomy, float(np.max(np.abs(
            anholonomy_coefficients(N, p, order, cfg)))))
    return LCResiduals(vertical, mixed, anholonomy)


__all__: List[str] = [
    'FrameTransform', 'SourceField', 'LCResiduals', 'apply_frame_transform', 'inverse_frame_transform',
    'transform_n_connection', 'inverse_transform_n_connection', 'transform_geometry',
    'einstein_source', 'einstein_residual', 'lc_constraint_residuals',
]
