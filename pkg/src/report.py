"""Machine-readable reports for the fgeom command line."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from dynamics import Trajectory
from expr.point import Point


def to_plain(value: Any) -> Any:
    """numpy arrays and scalars to nested lists of Python floats."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {key: to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    return value


@dataclass
class Report:
    """
    One command's output.

    Field order is fixed and floats are written with their shortest
    round-trip representation, so equal inputs give byte-identical text.
    """
    command: str
    model: str
    model_hash: str
    alpha: float
    grid_points: int
    points: List[Dict[str, Any]] = field(default_factory=list)
    residuals: Dict[str, Any] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)
    passed: Optional[bool] = None

    def add_point(self, p: Point, **tables):
        entry = {'x': list(p.x), 'y': list(p.y)}
        entry.update({name: to_plain(value) for name, value in tables.items()})
        self.points.append(entry)

    def as_dict(self) -> Dict[str, Any]:
        data = {
            'command': self.command,
            'model': self.model,
            'model_hash': self.model_hash,
            'alpha': self.alpha,
            'grid_points': self.grid_points,
        }
        if self.points:
            data['points'] = self.points
        if self.residuals:
            data['residuals'] = to_plain(self.residuals)
        if self.extra:
            data.update(to_plain(self.extra))
        if self.passed is not None:
            data['passed'] = self.passed
        return data

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.as_dict(), indent=indent, ensure_ascii=False)


def write_trajectory(traj: Trajectory, path) -> Path:
    """CSV with header tau,x1..xn,y1..yn at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    traj.to_frame().to_csv(path, index=False, float_format='%.17g')
    return path


__all__: List[str] = ['Report', 'to_plain', 'write_trajectory']
