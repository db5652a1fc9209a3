"""Model (.fgm) and frame-transform file parsing.

A model file is flat `key = value` text followed by `[section]` tables:

    n = 2
    alpha = 1
    mode = lagrangian
    lagrangian = exp(x1)*(y1^2+y2^2)

    [caputo]
    grid_points = 256
    tol = 1e-6

    [points]
    p1 = 0.5, 0.5, 1.0, 0.5

    [geodesic]
    x0 = 0.5, 0.5
    v0 = 1.0, 0.5
    horizon = 1.0
    steps = 400

Explicit models (mode = explicit) replace `lagrangian` with component
tables [g_h] "i,j", [g_v] "a,b", [N] "a,i", [D.L_h] "i,j,k",
[D.L_v] "a,b,k", [D.C_h] "i,j,c", [D.C_v] "a,b,c" and an optional
[source] "alpha,beta". Indices are 1-based, missing entries are zero,
metric and source tables are mirrored.
"""

import configparser
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from caputo_kernel import CaputoConfig, as_order
from errors import InputError, ModelFileError
from expr import parse
from expr.nodes import Const
from expr.point import Point
from fields import ExpressionField
from geometry import DConnection, DGeometry, DMetric, NConnection
from gravity import FrameTransform, SourceField
from lagrange import LagrangeModel

MODES = ('lagrangian', 'explicit')
CONNECTION_TABLES = ('D.L_h', 'D.L_v', 'D.C_h', 'D.C_v')

Table = Dict[Tuple[int, ...], str]


def _config_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, delimiters=('=',),
                                       comment_prefixes=('#', ';'), inline_comment_prefixes=('#',))
    parser.optionxform = str
    return parser


def _read(text: str, origin: str) -> configparser.ConfigParser:
    parser = _config_parser()
    try:
        parser.read_string("[model]\n" + text, source=origin)
    except configparser.Error as e:
        raise ModelFileError(f"{origin}: {e}") from None
    return parser


def parse_numbers(value: str, what: str) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in value.replace(';', ',').split(',') if v.strip())
    except ValueError:
        raise ModelFileError(f"{what}: expected comma-separated numbers, got '{value}'") from None


def _table(parser: configparser.ConfigParser, section: str, rank: int) -> Table:
    if not parser.has_section(section):
        return {}
    table = {}
    for key, value in parser.items(section):
        try:
            index = tuple(int(part) for part in key.split(','))
        except ValueError:
            raise ModelFileError(f"[{section}] key '{key}' is not a comma-separated index") from None
        if len(index) != rank:
            raise ModelFileError(f"[{section}] key '{key}' needs {rank} indices")
        table[index] = value.strip()
    return table


@dataclass
class ModelFile:
    """Parsed and validated contents of one .fgm file."""
    name: str
    text: str
    n: int
    m: int
    alpha: float
    mode: str
    lagrangian: Optional[str] = None
    tables: Dict[str, Table] = field(default_factory=dict)
    grid_points: Optional[int] = None
    tol: Optional[float] = None
    sample_points: List[Tuple[float, ...]] = field(default_factory=list)
    geodesic: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "ModelFile":
        path = Path(path)
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as e:
            raise ModelFileError(f"cannot read model file {path}: {e.strerror}") from None
        return cls.parse(text, path.name)

    @classmethod
    def parse(cls, text: str, name: str = '<model>') -> "ModelFile":
        """
        Parse model text and validate it.

        Raises:
            ModelFileError: Missing or malformed keys
            ExpressionSyntaxError: A component expression does not parse
            NonPositiveAbscissa: A sample point is not admissible for alpha
        """
        parser = _read(text, name)
        model = parser['model']
        try:
            n = int(model.get('n', ''))
            m = int(model.get('m', str(n)))
            alpha = float(model.get('alpha', '1'))
        except ValueError:
            raise ModelFileError(f"{name}: n, m and alpha must be numbers") from None
        mode = model.get('mode', 'lagrangian').strip()
        if mode not in MODES:
            raise ModelFileError(f"{name}: mode must be one of {MODES}, got '{mode}'")

        tables = {}
        if mode == 'explicit':
            tables = {
                'g_h': _table(parser, 'g_h', 2),
                'g_v': _table(parser, 'g_v', 2),
                'N': _table(parser, 'N', 2),
                'source': _table(parser, 'source', 2),
            }
            for section in CONNECTION_TABLES:
                tables[section] = _table(parser, section, 3)

        caputo = parser['caputo'] if parser.has_section('caputo') else {}
        geodesic = {}
        if parser.has_section('geodesic'):
            section = parser['geodesic']
            geodesic = {
                'x0': parse_numbers(section.get('x0', ''), 'geodesic x0'),
                'v0': parse_numbers(section.get('v0', ''), 'geodesic v0'),
                'horizon': float(section.get('horizon', '1.0')),
                'steps': int(section.get('steps', '200')),
            }
        points = []
        if parser.has_section('points'):
            points = [parse_numbers(value, f"point {key}") for key, value in parser.items('points')]

        result = cls(
            name=name,
            text=text,
            n=n,
            m=m,
            alpha=alpha,
            mode=mode,
            lagrangian=model.get('lagrangian'),
            tables=tables,
            grid_points=int(caputo['grid_points']) if 'grid_points' in caputo else None,
            tol=float(caputo['tol']) if 'tol' in caputo else None,
            sample_points=points,
            geodesic=geodesic,
        )
        result.validate()
        return result

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode('utf-8')).hexdigest()

    def validate(self, alpha: Optional[float] = None):
        """Check mode-required fields, parse every expression and check the sample points."""
        if self.n < 1 or self.m < 1:
            raise ModelFileError(f"{self.name}: dimensions must be positive")
        order = as_order(self.alpha if alpha is None else alpha)
        if self.mode == 'lagrangian':
            if not self.lagrangian:
                raise ModelFileError(f"{self.name}: mode = lagrangian needs a 'lagrangian' key")
            if self.m != self.n:
                raise ModelFileError(f"{self.name}: a Lagrange model needs m = n")
            parse(self.lagrangian, self.n, self.m)
        else:
            if not self.tables.get('g_h') or not self.tables.get('g_v'):
                raise ModelFileError(f"{self.name}: mode = explicit needs [g_h] and [g_v] tables")
            self.geometry()
            self.source()
        for point in self.points():
            if point.m != self.m:
                raise ModelFileError(f"{self.name}: sample point {point} needs {self.n + self.m} coordinates")
            point.require_admissible(order)

    def points(self, override: Optional[List[Tuple[float, ...]]] = None) -> List[Point]:
        coordinates = override if override is not None else self.sample_points
        return [Point.from_coords(c, self.n) for c in coordinates]

    def caputo_config(self, grid_points: Optional[int] = None, fd_step: float = 1e-3) -> CaputoConfig:
        cfg = CaputoConfig(grid_points=grid_points or self.grid_points or 256, fd_step=fd_step)
        cfg.validate()
        return cfg

    def lagrange_model(self, alpha: float, cfg: CaputoConfig,
                       regularity_tol: float = 1e-10) -> LagrangeModel:
        if self.mode != 'lagrangian':
            raise InputError(f"{self.name} is an explicit model; this command needs a Lagrangian")
        return LagrangeModel.from_text(self.lagrangian, self.n, alpha, cfg, regularity_tol)

    def _field(self, table: Table, shape: Tuple[int, ...], section: str,
               symmetric: bool = False) -> ExpressionField:
        components = np.empty(shape, dtype=object)
        components.fill(Const(0.0))
        for index, source in table.items():
            zero_based = tuple(i - 1 for i in index)
            if any(not 0 <= i < s for i, s in zip(zero_based, shape)):
                raise ModelFileError(f"[{section}] index {index} outside {shape}")
            expression = parse(source, self.n, self.m)
            components[zero_based] = expression
            if symmetric and index[::-1] not in table:
                components[zero_based[::-1]] = expression
        return ExpressionField(components, self.n, self.m)

    def geometry(self) -> DGeometry:
        """(g, N, D) built from the explicit component tables."""
        n, m = self.n, self.m
        metric = DMetric(
            n, m,
            self._field(self.tables['g_h'], (n, n), 'g_h', symmetric=True),
            self._field(self.tables['g_v'], (m, m), 'g_v', symmetric=True),
        )
        nconnection = NConnection(n, m, self._field(self.tables['N'], (m, n), 'N'))
        shapes = {'D.L_h': (n, n, n), 'D.L_v': (m, m, n), 'D.C_h': (n, n, m), 'D.C_v': (m, m, m)}
        blocks = [self._field(self.tables[name], shapes[name], name) for name in CONNECTION_TABLES]
        return DGeometry(metric, nconnection, DConnection.from_blocks(*blocks))

    def source(self) -> SourceField:
        d = self.n + self.m
        table = self.tables.get('source', {})
        if not table:
            return SourceField.zero(self.n, self.m)
        return SourceField(self.n, self.m, self._field(table, (d, d), 'source', symmetric=True))


def load_frame(path, n: int, m: int) -> FrameTransform:
    """
    Read a frame-transform file: an [A] table with keys "alpha,alpha'".

    Missing diagonal entries are 1, missing off-diagonal entries 0.
    Entries may be expressions in the model coordinates.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise ModelFileError(f"cannot read frame file {path}: {e.strerror}") from None
    parser = _read(text, path.name)
    table = _table(parser, 'A', 2)
    d = n + m
    components = np.empty((d, d), dtype=object)
    for index in np.ndindex(d, d):
        components[index] = Const(1.0 if index[0] == index[1] else 0.0)
    for (row, column), source in table.items():
        if not (1 <= row <= d and 1 <= column <= d):
            raise ModelFileError(f"[A] index ({row},{column}) outside {d}x{d}")
        components[row - 1, column - 1] = parse(source, n, m)
    if all(isinstance(e, Const) for e in components.flat):
        return FrameTransform.constant([[e.value for e in row] for row in components], n, m)
    return FrameTransform(n, m, ExpressionField(components, n, m))


__all__: List[str] = ['ModelFile', 'load_frame', 'parse_numbers']
