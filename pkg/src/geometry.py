"""Distinguished geometry on the fractional tangent bundle.

Works for any d-metric g, N-connection N and d-connection D, not only
the canonical Lagrange data. Indices follow one flat layout: 0..n-1
horizontal (x), n..n+m-1 vertical (y). Connection coefficients are
stored as Gamma[tau, beta, gamma] with D_{e_gamma} e_beta = Gamma[tau, beta, gamma] e_tau,
so the direction index comes last.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from caputo_kernel import CaputoConfig, OrderLike
from errors import EmptySample, InputError, SingularMetric
from expr.point import Point
from fields import ComponentSlice, ConstantField, Field

_SINGULAR_CONDITION = 1e14


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

@dataclass
class NConnection:
    """Nonlinear connection coefficients N^a_i stored as an (m, n) field [a, i]."""
    n: int
    m: int
    field: Field

    def __post_init__(self):
        if self.field.shape != (self.m, self.n):
            raise InputError(f"N-connection field must have shape ({self.m}, {self.n}), "
                             f"got {self.field.shape}")

    def __call__(self, p: Point) -> np.ndarray:
        return self.field(p)

    @classmethod
    def zero(cls, n: int, m: int) -> "NConnection":
        return cls(n, m, ConstantField(np.zeros((m, n)), n, m))


class BlockDiagonalField(Field):
    """Full (n+m)x(n+m) metric assembled from its h- and v-blocks."""

    def __init__(self, h: Field, v: Field):
        super().__init__(h.n, h.m, (h.n + h.m, h.n + h.m))
        self.h = h
        self.v = v

    def _assemble(self, hb: np.ndarray, vb: np.ndarray) -> np.ndarray:
        n = self.n
        out = np.zeros((hb.shape[0],) + self.shape)
        out[:, :n, :n] = hb
        out[:, n:, n:] = vb
        return out

    def evaluate(self, u):
        return self._assemble(self.h.evaluate(u), self.v.evaluate(u))

    def partial_batch(self, u, index, order, cfg):
        return self._assemble(self.h.partial_batch(u, index, order, cfg),
                              self.v.partial_batch(u, index, order, cfg))


@dataclass
class DMetric:
    """Block-diagonal d-metric {g_ij, g_ab} in the N-adapted coframe."""
    n: int
    m: int
    h: Field
    v: Field
    signature: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        if self.h.shape != (self.n, self.n) or self.v.shape != (self.m, self.m):
            raise InputError("d-metric blocks must be square with sizes n and m")

    @cached_property
    def full_field(self) -> Field:
        return BlockDiagonalField(self.h, self.v)

    def blocks(self, p: Point) -> Tuple[np.ndarray, np.ndarray]:
        gh = self.h(p)
        gv = self.v(p)
        return 0.5 * (gh + gh.T), 0.5 * (gv + gv.T)

    def full(self, p: Point) -> np.ndarray:
        return self.full_field(p)

    def inverse_blocks(self, p: Point) -> Tuple[np.ndarray, np.ndarray]:
        gh, gv = self.blocks(p)
        return _inverse(gh, 'h'), _inverse(gv, 'v')

    def signature_at(self, p: Point) -> Tuple[int, ...]:
        return metric_signature(self, p)


def _inverse(block: np.ndarray, name: str) -> np.ndarray:
    if np.linalg.cond(block) > _SINGULAR_CONDITION:
        raise SingularMetric(f"{name}-block of the metric is singular")
    return np.linalg.inv(block)


class BlockConnectionField(Field):
    """Gamma[tau, beta, gamma] assembled from the four d-connection blocks."""

    def __init__(self, L_h: Field, L_v: Field, C_h: Field, C_v: Field):
        n, m = L_h.n, L_h.m
        super().__init__(n, m, (n + m, n + m, n + m))
        self.parts = (L_h, L_v, C_h, C_v)
        expected = [(n, n, n), (m, m, n), (n, n, m), (m, m, m)]
        for part, shape in zip(self.parts, expected):
            if part.shape != shape:
                raise InputError(f"d-connection block has shape {part.shape}, expected {shape}")

    def _assemble(self, blocks) -> np.ndarray:
        n = self.n
        L_h, L_v, C_h, C_v = blocks
        out = np.zeros((L_h.shape[0],) + self.shape)
        out[:, :n, :n, :n] = L_h
        out[:, n:, n:, :n] = L_v
        out[:, :n, :n, n:] = C_h
        out[:, n:, n:, n:] = C_v
        return out

    def evaluate(self, u):
        return self._assemble([part.evaluate(u) for part in self.parts])

    def partial_batch(self, u, index, order, cfg):
        return self._assemble([part.partial_batch(u, index, order, cfg) for part in self.parts])


class DConnection:
    """
    Distinguished connection Gamma = (L^i_jk, L^a_bk, C^i_jc, C^a_bc).

    Backed by one field of full coefficients; the four blocks are views.
    """

    def __init__(self, n: int, m: int, field: Field):
        d = n + m
        if field.shape != (d, d, d):
            raise InputError(f"connection field must have shape {(d, d, d)}, got {field.shape}")
        self.n = n
        self.m = m
        self.field = field

    @classmethod
    def from_blocks(cls, L_h: Field, L_v: Field, C_h: Field, C_v: Field) -> "DConnection":
        return cls(L_h.n, L_h.m, BlockConnectionField(L_h, L_v, C_h, C_v))

    @classmethod
    def zero(cls, n: int, m: int) -> "DConnection":
        d = n + m
        return cls(n, m, ConstantField(np.zeros((d, d, d)), n, m))

    def __call__(self, p: Point) -> np.ndarray:
        return self.field(p)

    @property
    def L_h(self) -> Field:
        n = self.n
        return ComponentSlice(self.field, (slice(0, n), slice(0, n), slice(0, n)))

    @property
    def L_v(self) -> Field:
        n = self.n
        return ComponentSlice(self.field, (slice(n, None), slice(n, None), slice(0, n)))

    @property
    def C_h(self) -> Field:
        n = self.n
        return ComponentSlice(self.field, (slice(0, n), slice(0, n), slice(n, None)))

    @property
    def C_v(self) -> Field:
        n = self.n
        return ComponentSlice(self.field, (slice(n, None), slice(n, None), slice(n, None)))

    def blocks(self, p: Point) -> Dict[str, np.ndarray]:
        gamma = self(p)
        n = self.n
        return {
            'L^i_jk': gamma[:n, :n, :n],
            'L^a_bk': gamma[n:, n:, :n],
            'C^i_jc': gamma[:n, :n, n:],
            'C^a_bc': gamma[n:, n:, n:],
        }


@dataclass
class DGeometry:
    """A complete (g, N, D) triple."""
    metric: DMetric
    nconnection: NConnection
    dconnection: DConnection

    @property
    def n(self) -> int:
        return self.metric.n

    @property
    def m(self) -> int:
        return self.metric.m


@dataclass
class TorsionData:
    """Torsion T^tau_{beta gamma} at a point, antisymmetric in beta and gamma."""
    full: np.ndarray
    n: int
    m: int

    def blocks(self) -> Dict[str, np.ndarray]:
        n, t = self.n, self.full
        return {
            'T^i_jk': t[:n, :n, :n],
            'T^i_jc': t[:n, :n, n:],
            'T^a_ij': t[n:, :n, :n],
            'T^a_ib': t[n:, :n, n:],
            'T^a_bc': t[n:, n:, n:],
        }


@dataclass
class CurvatureData:
    """Curvature R^tau_{beta gamma delta} at a point, antisymmetric in gamma and delta."""
    full: np.ndarray
    n: int
    m: int

    def blocks(self) -> Dict[str, np.ndarray]:
        n, r = self.n, self.full
        return {
            'R^i_jkl': r[:n, :n, :n, :n],
            'R^i_jka': r[:n, :n, :n, n:],
            'R^a_bkc': r[n:, n:, :n, n:],
            'R^a_bcd': r[n:, n:, n:, n:],
        }


@dataclass
class RicciData:
    R_ij: np.ndarray
    R_ia: np.ndarray
    R_ai: np.ndarray
    R_ab: np.ndarray

    def full(self) -> np.ndarray:
        return np.block([[self.R_ij, self.R_ia], [self.R_ai, self.R_ab]])


@dataclass
class EinsteinData:
    G_ij: np.ndarray
    G_ia: np.ndarray
    G_ai: np.ndarray
    G_ab: np.ndarray

    def full(self) -> np.ndarray:
        return np.block([[self.G_ij, self.G_ia], [self.G_ai, self.G_ab]])


class ScalarCurvature(NamedTuple):
    total: float
    h: float
    v: float


@dataclass
class StructureReport:
    """Discrepancy between coefficient torsion and the coframe 2-form evaluation."""
    torsion_residual: float
    h_residual: float
    v_residual: float


# ---------------------------------------------------------------------------
# N-adapted frames
# ---------------------------------------------------------------------------

def frame_gradient(field: Field, N: NConnection, p: Point, order: OrderLike,
                   cfg: CaputoConfig) -> np.ndarray:
    """
    All N-adapted frame derivatives of a field at p.

    e_j = d_j - N^a_j d_a on the horizontal slots and e_b = d_b on the
    vertical ones, with Caputo partials d.

    Returns:
        Array of shape (n + m, *field.shape), frame index first
    """
    n = N.n
    partials = field.gradient(p, order, cfg)
    coefficients = N(p)
    out = partials.copy()
    out[:n] = partials[:n] - np.tensordot(coefficients, partials[n:], axes=(0, 0))
    return out


def frame_gradient_batch(field: Field, N: NConnection, u: np.ndarray, order: OrderLike,
                         cfg: CaputoConfig) -> np.ndarray:
    """Batch form of frame_gradient: shape (K, n + m, *field.shape)."""
    n = N.n
    u = np.atleast_2d(u)
    partials = np.stack([field.partial_batch(u, index, order, cfg) for index in range(field.dim)],
                        axis=1)
    coefficients = N.field.evaluate(u)
    out = partials.copy()
    out[:, :n] = partials[:, :n] - np.einsum('kaj,ka...->kj...', coefficients, partials[:, n:])
    return out


def n_adapted_frame_apply(N: NConnection, f: Field, which: int, p: Point, order: OrderLike,
                          cfg: CaputoConfig) -> float:
    """
    Apply the frame vector e_which to a scalar field at p.

    Args:
        N: N-connection defining the horizontal frame
        f: Scalar field
        which: Frame index, 0..n-1 horizontal, n..n+m-1 vertical
        p: Point
        order: Fractional order
        cfg: Quadrature settings

    Returns:
        e_which(f) at p
    """
    derivative = f.partial(p, which, order, cfg)
    if which < N.n:
        coefficients = N(p)[:, which]
        for a in range(N.m):
            derivative = derivative - coefficients[a] * f.partial(p, N.n + a, order, cfg)
    return float(derivative)


def anholonomy_coefficients(N: NConnection, p: Point, order: OrderLike,
                            cfg: CaputoConfig) -> np.ndarray:
    """Omega^a_ij = e_i(N^a_j) - e_j(N^a_i), shape (m, n, n)."""
    horizontal = frame_gradient(N.field, N, p, order, cfg)[:N.n]  # [i, a, j]
    omega = horizontal.transpose(1, 0, 2) - horizontal.transpose(1, 2, 0)
    return 0.5 * (omega - omega.transpose(0, 2, 1))


def frame_bracket_coefficients(N: NConnection, p: Point, order: OrderLike,
                               cfg: CaputoConfig) -> np.ndarray:
    """
    W^tau_{beta gamma} with [e_beta, e_gamma] = W^tau_{beta gamma} e_tau.

    The only nonzero entries are W^a_ij = -Omega^a_ij and
    W^a_ib = -W^a_bi = e_b(N^a_i).
    """
    n, m = N.n, N.m
    d = n + m
    gradient = frame_gradient(N.field, N, p, order, cfg)  # [gamma, a, i]
    horizontal = gradient[:n]
    vertical = gradient[n:]  # [b, a, i]

    omega = horizontal.transpose(1, 0, 2) - horizontal.transpose(1, 2, 0)
    omega = 0.5 * (omega - omega.transpose(0, 2, 1))

    bracket = np.zeros((d, d, d))
    bracket[n:, :n, :n] = -omega
    bracket[n:, :n, n:] = vertical.transpose(1, 2, 0)
    bracket[n:, n:, :n] = -vertical.transpose(1, 0, 2)
    return bracket


# ---------------------------------------------------------------------------
# Torsion, curvature, Ricci, scalar, Einstein
# ---------------------------------------------------------------------------

def torsion_coefficients(D: DConnection, N: NConnection, p: Point, order: OrderLike,
                         cfg: CaputoConfig) -> TorsionData:
    """
    Torsion of D in the N-adapted frame.

    T^tau_{beta gamma} = Gamma^tau_{beta gamma} - Gamma^tau_{gamma beta} + W^tau_{beta gamma},
    which gives T^i_jc = C^i_jc, T^a_ij = -Omega^a_ij and
    T^a_ib = e_b(N^a_i) - L^a_bi.
    """
    gamma = D(p)
    torsion = gamma - gamma.transpose(0, 2, 1) + frame_bracket_coefficients(N, p, order, cfg)
    torsion = 0.5 * (torsion - torsion.transpose(0, 2, 1))
    return TorsionData(torsion, D.n, D.m)


def curvature_coefficients(D: DConnection, N: NConnection, p: Point, order: OrderLike,
                           cfg: CaputoConfig) -> CurvatureData:
    """
    Curvature of D in the N-adapted frame.

    R^tau_{beta gamma delta} is the curvature 2-form of D evaluated on
    (e_delta, e_gamma):

        e_delta Gamma^tau_{beta gamma} - e_gamma Gamma^tau_{beta delta}
        + Gamma^rho_{beta gamma} Gamma^tau_{rho delta}
        - Gamma^rho_{beta delta} Gamma^tau_{rho gamma}
        + W^rho_{gamma delta} Gamma^tau_{beta rho}

    The last term carries the anholonomy of the frame.
    """
    gamma = D(p)
    d_gamma = frame_gradient(D.field, N, p, order, cfg)  # [delta, tau, beta, gamma]
    bracket = frame_bracket_coefficients(N, p, order, cfg)

    curvature = (np.einsum('dtbg->tbgd', d_gamma)
                 - np.einsum('gtbd->tbgd', d_gamma)
                 + np.einsum('rbg,trd->tbgd', gamma, gamma)
                 - np.einsum('rbd,trg->tbgd', gamma, gamma)
                 + np.einsum('rgd,tbr->tbgd', bracket, gamma))
    curvature = 0.5 * (curvature - curvature.transpose(0, 1, 3, 2))
    return CurvatureData(curvature, D.n, D.m)


def ricci_tensor(R: CurvatureData) -> RicciData:
    """R_ij = R^k_ijk, R_ia = -R^k_ika, R_ai = R^b_aib, R_ab = R^c_abc."""
    n, r = R.n, R.full
    return RicciData(
        R_ij=np.einsum('kijk->ij', r[:n, :n, :n, :n]),
        R_ia=-np.einsum('kika->ia', r[:n, :n, :n, n:]),
        R_ai=np.einsum('baib->ai', r[n:, n:, :n, n:]),
        R_ab=np.einsum('cabc->ab', r[n:, n:, n:, n:]),
    )


def scalar_curvature(g: DMetric, ric: RicciData, p: Point) -> ScalarCurvature:
    """
    Scalar curvature sR = g^{ij} R_ij + g^{ab} R_ab and its two partial traces.

    Raises:
        SingularMetric: Either metric block is not invertible at p
    """
    inverse_h, inverse_v = g.inverse_blocks(p)
    trace_h = float(np.einsum('ij,ij->', inverse_h, ric.R_ij))
    trace_v = float(np.einsum('ab,ab->', inverse_v, ric.R_ab))
    return ScalarCurvature(trace_h + trace_v, trace_h, trace_v)


def einstein_tensor(g: DMetric, ric: RicciData, sR: float, p: Point) -> EinsteinData:
    """G_{alpha beta} = R_{alpha beta} - 1/2 g_{alpha beta} sR; mixed blocks equal Ricci."""
    gh, gv = g.blocks(p)
    return EinsteinData(
        G_ij=ric.R_ij - 0.5 * gh * sR,
        G_ia=ric.R_ia.copy(),
        G_ai=ric.R_ai.copy(),
        G_ab=ric.R_ab - 0.5 * gv * sR,
    )


def metric_trace(g: DMetric, tensor: np.ndarray, p: Point) -> float:
    """g^{alpha beta} T_{alpha beta} for a full (n+m)x(n+m) tensor."""
    inverse_h, inverse_v = g.inverse_blocks(p)
    n = g.n
    return float(np.einsum('ij,ij->', inverse_h, tensor[:n, :n])
                 + np.einsum('ab,ab->', inverse_v, tensor[n:, n:]))


def metric_signature(g: DMetric, p: Point) -> Tuple[int, ...]:
    """Signs of the eigenvalues of each block, h-block first."""
    gh, gv = g.blocks(p)
    signs = np.concatenate([np.sign(np.linalg.eigvalsh(gh)), np.sign(np.linalg.eigvalsh(gv))])
    return tuple(int(s) for s in signs)


def full_geometry(D: DConnection, N: NConnection, g: DMetric, p: Point, order: OrderLike,
                  cfg: CaputoConfig):
    """Torsion, curvature, Ricci, scalar curvature and Einstein tensor at one point."""
    torsion = torsion_coefficients(D, N, p, order, cfg)
    curvature = curvature_coefficients(D, N, p, order, cfg)
    ricci = ricci_tensor(curvature)
    scalar = scalar_curvature(g, ricci, p)
    einstein = einstein_tensor(g, ricci, scalar.total, p)
    return torsion, curvature, ricci, scalar, einstein


# ---------------------------------------------------------------------------
# Residual diagnostics
# ---------------------------------------------------------------------------

def nonmetricity(D: DConnection, g: DMetric, N: NConnection, p: Point, order: OrderLike,
                 cfg: CaputoConfig) -> np.ndarray:
    """Q[alpha, beta, gamma] = (D_{e_gamma} g)(e_alpha, e_beta)."""
    metric = g.full(p)
    gamma = D(p)
    d_metric = frame_gradient(g.full_field, N, p, order, cfg)  # [gamma, alpha, beta]
    return (d_metric.transpose(1, 2, 0)
            - np.einsum('rag,rb->abg', gamma, metric)
            - np.einsum('rbg,ar->abg', gamma, metric))


def _require_sample(sample: Sequence[Point]):
    if not sample:
        raise EmptySample("residual evaluation needs at least one sample point")


def metric_compatibility_residual(D: DConnection, g: DMetric, N: NConnection,
                                  sample: Sequence[Point], order: OrderLike,
                                  cfg: CaputoConfig) -> float:
    """Largest component of the N-adapted covariant derivative of g over the sample."""
    _require_sample(sample)
    return max(float(np.max(np.abs(nonmetricity(D, g, N, p, order, cfg)))) for p in sample)


class CoframeField(Field):
    """Coordinate components E[tau, mu] of the N-adapted coframe e^tau = E[tau, mu] du^mu."""

    def __init__(self, N: NConnection):
        d = N.n + N.m
        super().__init__(N.n, N.m, (d, d))
        self.N = N

    def evaluate(self, u):
        coefficients = self.N.field.evaluate(u)
        n = self.n
        out = np.broadcast_to(np.eye(self.dim), (coefficients.shape[0],) + self.shape).copy()
        out[:, n:, :n] = coefficients
        return out


class ConnectionFormField(Field):
    """Coordinate components A[tau, beta, mu] of the connection 1-forms Gamma^tau_{beta gamma} e^gamma."""

    def __init__(self, D: DConnection, coframe: CoframeField):
        d = D.n + D.m
        super().__init__(D.n, D.m, (d, d, d))
        self.D = D
        self.coframe = coframe

    def evaluate(self, u):
        return np.einsum('ktbg,kgm->ktbm', self.D.field.evaluate(u), self.coframe.evaluate(u))


def structure_equation_residual(D: DConnection, N: NConnection, g: DMetric, p: Point,
                                order: OrderLike, cfg: CaputoConfig) -> StructureReport:
    """
    Compare torsion coefficients with the first structure equation.

    The coframe is differentiated numerically in coordinates, pulled back
    to the N-adapted frame, and combined with Gamma into the torsion
    2-form: T(e_gamma, e_delta) = Gamma_{gamma delta} - Gamma_{delta gamma} - de(e_gamma, e_delta).
    `g` is not needed for torsion but fixes the point's dimensions.
    """
    coframe_field = CoframeField(N)
    coframe = coframe_field(p)
    frame = np.linalg.inv(coframe)
    partials = coframe_field.gradient(p, order, cfg)  # [mu, tau, nu]
    d_coframe = partials.transpose(1, 0, 2) - partials.transpose(1, 2, 0)  # [tau, mu, nu]
    d_frame = np.einsum('tmn,mg,nd->tgd', d_coframe, frame, frame)

    gamma = D(p)
    from_forms = gamma - gamma.transpose(0, 2, 1) - d_frame
    from_coefficients = torsion_coefficients(D, N, p, order, cfg).full

    difference = np.abs(from_forms - from_coefficients)
    n = g.n
    return StructureReport(
        torsion_residual=float(np.max(difference)),
        h_residual=float(np.max(difference[:n])),
        v_residual=float(np.max(difference[n:])),
    )


def curvature_form_residual(D: DConnection, N: NConnection, p: Point, order: OrderLike,
                            cfg: CaputoConfig) -> float:
    """
    Compare curvature coefficients with dA + A^A of the connection 1-forms.

    The 1-forms are written in coordinates, differentiated numerically
    and evaluated on (e_delta, e_gamma). Exact only at alpha = 1, where the
    Leibniz rule holds.
    """
    coframe_field = CoframeField(N)
    frame = np.linalg.inv(coframe_field(p))
    form_field = ConnectionFormField(D, coframe_field)

    forms = form_field(p)  # [tau, beta, mu]
    partials = form_field.gradient(p, order, cfg)  # [nu, tau, beta, mu]
    d_forms = np.einsum('mtbn->tbmn', partials) - np.einsum('ntbm->tbmn', partials)
    wedge = np.einsum('trm,rbn->tbmn', forms, forms) - np.einsum('trn,rbm->tbmn', forms, forms)
    two_form = d_forms + wedge
    from_forms = np.einsum('tbmn,md,ng->tbgd', two_form, frame, frame)

    from_coefficients = curvature_coefficients(D, N, p, order, cfg).full
    return float(np.max(np.abs(from_forms - from_coefficients)))


__all__: List[str] = [
    'NConnection', 'DMetric', 'DConnection', 'DGeometry', 'TorsionData', 'CurvatureData',
    'RicciData', 'EinsteinData', 'ScalarCurvature', 'StructureReport',
    'frame_gradient', 'frame_gradient_batch', 'n_adapted_frame_apply',
    'anholonomy_coefficients', 'frame_bracket_coefficients', 'torsion_coefficients',
    'curvature_coefficients', 'ricci_tensor', 'scalar_curvature', 'einstein_tensor',
    'metric_trace', 'metric_signature', 'full_geometry', 'nonmetricity',
    'metric_compatibility_residual', 'structure_equation_residual', 'curvature_form_residual',
]
