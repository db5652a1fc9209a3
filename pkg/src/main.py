"""Command-line front end for fractional Lagrange-Finsler geometry."""

import argparse
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import yaml
from dotenv import load_dotenv

# Add src to path for imports
sys.path.insert(0, os.path.dirname(__file__))

from caputo_kernel import as_order
from dynamics import reference_classical_solve, solve_semi_spray
from errors import InputError, NumericalError
from expr import to_source
from expr.point import Point
from geometry import (
    curvature_form_residual,
    full_geometry,
    metric_compatibility_residual,
    structure_equation_residual,
)
from gravity import (
    SourceField,
    apply_frame_transform,
    einstein_residual,
    lc_constraint_residuals,
    transform_geometry,
    transform_n_connection,
)
from lagrange import (
    canonical_data,
    euler_lagrange_residual,
    finsler_homogeneity_check,
    fractional_hessian,
    regularity_check,
    semi_spray,
)
from model_file import ModelFile, parse_numbers, load_frame
from report import Report, write_trajectory

COMMANDS = ('inspect', 'hessian', 'geometry', 'geodesic', 'check', 'residual', 'transform')
DEFAULT_SETTINGS = Path(__file__).resolve().parent.parent / 'config' / 'settings.yaml'


def load_settings(path: Optional[str] = None) -> Dict:
    """
    Read settings.yaml; FGEOM_SETTINGS overrides the default location.

    A missing file yields empty settings and built-in defaults apply.
    """
    path = Path(path or os.getenv('FGEOM_SETTINGS') or DEFAULT_SETTINGS)
    if not path.exists():
        return {}
    with open(path, 'r') as f:
        return yaml.safe_load(f) or {}


class GeometryRunner:
    """Runs one pipeline stage for a parsed model and assembles its report."""

    def __init__(self, model: ModelFile, settings: Dict, alpha: Optional[float] = None,
                 grid: Optional[int] = None, tol: Optional[float] = None,
                 points: Optional[List[Tuple[float, ...]]] = None):
        """
        Initialize runner. Flags override the model file, which overrides settings.

        Args:
            model: Parsed model file
            settings: Contents of settings.yaml
            alpha: --alpha override
            grid: --grid override
            tol: --tol override
            points: --points override
        """
        caputo = settings.get('caputo', {})
        lagrange = settings.get('lagrange', {})
        self.geometry_settings = settings.get('geometry', {})
        self.dynamics_settings = settings.get('dynamics', {})

        self.model = model
        self.alpha = float(alpha if alpha is not None else model.alpha)
        self.order = as_order(self.alpha)
        self.cfg = model.caputo_config(
            grid or model.grid_points or int(caputo.get('grid_points', 256)),
            float(caputo.get('fd_step', 1e-3)),
        )
        self.tol = float(tol if tol is not None else (model.tol or self.geometry_settings.get('tol', 1e-6)))
        self.regularity_tol = float(lagrange.get('regularity_tol', 1e-10))

        if alpha is not None or points is not None:
            model.sample_points = list(points) if points is not None else model.sample_points
            model.validate(self.alpha)
        self.points = model.points()

    # ------------------------------------------------------------------

    def _report(self, command: str) -> Report:
        return Report(command, self.model.name, self.model.digest, self.alpha, self.cfg.grid_points)

    def _lagrange(self):
        return self.model.lagrange_model(self.alpha, self.cfg, self.regularity_tol)

    def _geometry(self):
        if self.model.mode == 'lagrangian':
            return canonical_data(self._lagrange())
        return self.model.geometry()

    def _require_points(self):
        if not self.points:
            raise InputError(f"{self.model.name} has no sample points; add a [points] table or --points")

    def inspect(self) -> Report:
        report = self._report('inspect')
        model = self.model
        extra = {'n': model.n, 'm': model.m, 'mode': model.mode}
        if model.mode == 'lagrangian':
            lagrange = self._lagrange()
            extra['lagrangian'] = to_source(lagrange.L)
            extra['finsler'] = finsler_homogeneity_check(lagrange, self.points)
        else:
            extra['tables'] = {name: len(table) for name, table in model.tables.items()}
        extra['sample_points'] = [list(p.x + p.y) for p in self.points]
        report.extra = extra
        return report

    def hessian(self) -> Report:
        self._require_points()
        report = self._report('hessian')
        lagrange = self._lagrange()
        for p in self.points:
            h = fractional_hessian(lagrange, p)
            report.add_point(p, g=h.g, g_inv=h.g_inv)
        regularity = regularity_check(lagrange, self.points)
        report.residuals = {
            'min_abs_det': regularity.min_abs_det,
            'max_condition': max(regularity.condition_numbers),
        }
        report.passed = regularity.passed
        return report

    def geometry(self) -> Report:
        self._require_points()
        report = self._report('geometry')
        geom = self._geometry()
        spray = semi_spray(self._lagrange()) if self.model.mode == 'lagrangian' else None
        for p in self.points:
            torsion, curvature, ricci, scalar, einstein = full_geometry(
                geom.dconnection, geom.nconnection, geom.metric, p, self.order, self.cfg)
            gh, gv = geom.metric.blocks(p)
            tables = {'metric_h': gh, 'metric_v': gv}
            if spray is not None:
                tables['spray'] = spray(p)
            tables.update({
                'N': geom.nconnection(p),
                'connection': geom.dconnection.blocks(p),
                'torsion': torsion.blocks(),
                'curvature': curvature.blocks(),
                'ricci': {'R_ij': ricci.R_ij, 'R_ia': ricci.R_ia,
                          'R_ai': ricci.R_ai, 'R_ab': ricci.R_ab},
                'scalar': {'sR': scalar.total, 'R_h': scalar.h, 'S_v': scalar.v},
                'einstein': {'G_ij': einstein.G_ij, 'G_ia': einstein.G_ia,
                             'G_ai': einstein.G_ai, 'G_ab': einstein.G_ab},
            })
            report.add_point(p, **tables)
        return report

    def geodesic(self, out: Optional[str] = None) -> Report:
        report = self._report('geodesic')
        lagrange = self._lagrange()
        spray = semi_spray(lagrange)
        settings = self.dynamics_settings
        geodesic = self.model.geodesic
        if geodesic.get('x0'):
            x0, v0 = geodesic['x0'], geodesic['v0']
        else:
            self._require_points()
            x0, v0 = self.points[0].x, self.points[0].y
        if len(x0) != self.model.n or len(v0) != self.model.n:
            raise InputError(f"geodesic x0 and v0 need {self.model.n} components each")
        horizon = float(geodesic.get('horizon', settings.get('horizon', 1.0)))
        steps = int(geodesic.get('steps', settings.get('steps', 200)))

        traj = solve_semi_spray(spray, self.order, x0, v0, horizon, steps,
                                overflow_guard=float(settings.get('overflow_guard', 1e12)))
        path = write_trajectory(traj, out or f"{Path(self.model.name).stem}_trajectory.csv")
        residual = euler_lagrange_residual(lagrange, traj)

        report.extra = {
            'trajectory': str(path),
            'steps': steps,
            'horizon': horizon,
            'final': {'x': traj.x[-1], 'y': traj.y[-1]},
        }
        report.residuals = {
            'solver_tolerance': traj.tolerance,
            'euler_lagrange': float(np.max(np.abs(residual))),
        }
        if self.order.is_classical:
            reference = reference_classical_solve(spray, x0, v0, horizon, steps)
            report.residuals['reference_sup_norm'] = float(np.max(np.abs(reference.x - traj.x)))
        report.passed = report.residuals['euler_lagrange'] <= 10.0 * traj.tolerance
        return report

    def check(self) -> Report:
        self._require_points()
        report = self._report('check')
        geom = self._geometry()
        g, N, D = geom.metric, geom.nconnection, geom.dconnection
        compatibility = metric_compatibility_residual(D, g, N, self.points, self.order, self.cfg)
        structure = max(structure_equation_residual(D, N, g, p, self.order, self.cfg).torsion_residual
                        for p in self.points)
        curvature_form = max(curvature_form_residual(D, N, p, self.order, self.cfg)
                             for p in self.points)
        lc = lc_constraint_residuals(geom, self.points, self.order, self.cfg)
        report.residuals = {
            'metric_compatibility': compatibility,
            'structure_equation': structure,
            'curvature_form': curvature_form,
            'lc_constraints': lc._asdict(),
            'tol': self.tol,
        }
        report.passed = compatibility <= self.tol and structure <= self.tol
        return report

    def residual(self) -> Report:
        self._require_points()
        report = self._report('residual')
        geom = self._geometry()
        source = self.model.source() if self.model.mode == 'explicit' else None
        if source is None:
            source = SourceField.zero(geom.n, geom.m)
        value = einstein_residual(geom.metric, geom.nconnection, geom.dconnection, source,
                                  self.points, self.order, self.cfg,
                                  float(self.geometry_settings.get('compatibility_tol', 1e-6)))
        report.residuals = {'einstein': value, 'tol': self.tol}
        report.passed = value <= self.tol
        return report

    def transform(self, frame: Optional[str]) -> Report:
        self._require_points()
        if not frame:
            raise InputError("transform needs --frame PATH")
        report = self._report('transform')
        A = load_frame(frame, self.model.n, self.model.m)
        geom = self._geometry()
        transformed, forward = None, None
        if A.is_constant and A.is_n_adapted(self.points[0]):
            transformed, forward = transform_geometry(geom, A)

        for p in self.points:
            metric = apply_frame_transform(geom.metric, A, p)
            tables = {'metric': metric, 'n_adapted': A.is_n_adapted(p)}
            restored_metric = apply_frame_transform(metric, A, p, inverse=True)
            round_trip = float(np.max(np.abs(restored_metric - geom.metric.full(p))))
            if A.is_n_adapted(p):
                primed = transform_n_connection(geom.nconnection, A, p)
                restored = transform_n_connection(primed, A, p, inverse=True)
                tables['N'] = primed
                round_trip = max(round_trip, float(np.max(np.abs(restored - geom.nconnection(p)))))
            tables['round_trip'] = round_trip
            if transformed is not None:
                q = Point.from_coords(forward @ p.coords, geom.n)
                before = full_geometry(geom.dconnection, geom.nconnection, geom.metric,
                                       p, self.order, self.cfg)[3]
                after = full_geometry(transformed.dconnection, transformed.nconnection,
                                      transformed.metric, q, self.order, self.cfg)[3]
                tables['scalar'] = {'before': before.total, 'after': after.total}
            report.add_point(p, **tables)
        return report


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _parse_points(text: Optional[str]) -> Optional[List[Tuple[float, ...]]]:
    if text is None:
        return None
    return [parse_numbers(chunk, '--points') for chunk in text.split(';') if chunk.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='fgeom',
                             description='Fractional Lagrange-Finsler geometry toolkit')
    parser.add_argument('command', choices=COMMANDS, help='Pipeline stage to run')
    parser.add_argument('model', help='Model file (.fgm)')
    parser.add_argument('--alpha', type=float, help='Override the fractional order')
    parser.add_argument('--grid', type=int, help='Override the quadrature grid size')
    parser.add_argument('--tol', type=float, help='Pass threshold for check and residual')
    parser.add_argument('--points', type=str,
                        help='Sample points as "x1,..,y1,..;x1,..,y1,.." (overrides [points])')
    parser.add_argument('--out', type=str, help='Trajectory CSV path for geodesic')
    parser.add_argument('--frame', type=str, help='Frame transform file for transform')
    parser.add_argument('--config', type=str, help='Settings file (default config/settings.yaml)')
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """
    Run one command and print its JSON report on standard output.

    Returns:
        0 on success, 1 on input errors, 2 on numerical failures
    """
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        settings = load_settings(args.config)
        model = ModelFile.load(args.model)
        runner = GeometryRunner(model, settings, alpha=args.alpha, grid=args.grid,
                                tol=args.tol, points=_parse_points(args.points))

        if args.command == 'geodesic':
            report = runner.geodesic(args.out)
        elif args.command == 'transform':
            report = runner.transform(args.frame)
        else:
            report = getattr(runner, args.command)()

    except InputError as e:
        print(f"✗ {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"✗ {type(e).__name__}: {e}", file=sys.stderr)
        return 2

    indent = int(settings.get('report', {}).get('indent', 2))
    print(report.to_json(indent))
    if report.passed is True:
        print(f"✓ {args.command} passed", file=sys.stderr)
    elif report.passed is False:
        print(f"⚠ {args.command} did not pass", file=sys.stderr)
    print(f"⏱  {args.command} finished in {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return 0


def main():
    """Main entry point."""
    load_dotenv()
    sys.exit(run())


if __name__ == '__main__':
    main()
