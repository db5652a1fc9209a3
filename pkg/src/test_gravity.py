"""Test frame transforms, Einstein residuals and Levi-Civita constraints."""

import sys
import os
sys.path.insert(0, os.path.dirname(__file__))

from pathlib import Path

import numpy as np
import pytest

from caputo_kernel import CaputoConfig
from errors import EmptySample, NotNAdapted, SingularTransform
from expr.point import Point
from fields import ConstantField
from geometry import DMetric, full_geometry
from gravity import (
    FrameTransform,
    SourceField,
    apply_frame_transform,
    einstein_residual,
    einstein_source,
    inverse_frame_transform,
    inverse_transform_n_connection,
    lc_constraint_residuals,
    transform_geometry,
    transform_n_connection,
)
from lagrange import LagrangeModel, canonical_data
from model_file import ModelFile, load_frame

MODELS = Path(__file__).resolve().parent.parent / 'models'
SPHERE = "y1^2 + sin(x1)^2*y2^2"
CFG = CaputoConfig()
P = Point((1.0, 0.5), (0.7, 0.4))


def _canonical(source):
    model = LagrangeModel.from_text(source, 2)
    return model, canonical_data(model)


def _constant_metric(h, v):
    n, m = len(h), len(v)
    return DMetric(n, m, ConstantField(np.asarray(h, dtype=float), n, m),
                   ConstantField(np.asarray(v, dtype=float), n, m))


def test_identity_and_scaling():
    _, data = _canonical(SPHERE)
    g = data.metric
    assert np.allclose(apply_frame_transform(g, FrameTransform.constant(np.eye(4), 2, 2), P), g.full(P))
    scaled = apply_frame_transform(g, FrameTransform.constant(2.5 * np.eye(4), 2, 2), P)
    assert np.allclose(scaled, 6.25 * g.full(P))


def test_orthonormalizing_frame():
    g = _constant_metric(np.diag([4.0, 9.0]), np.diag([1.0, 16.0]))
    A = FrameTransform.block_diagonal(np.diag([0.5, 1.0 / 3.0]), np.diag([1.0, 0.25]))
    assert np.allclose(apply_frame_transform(g, A, P), np.eye(4), atol=1e-14)


def test_congruence_determinant():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(2, 2))
    g = _constant_metric(a @ a.T + 2.0 * np.eye(2), np.diag([1.0, 3.0]))
    matrix = rng.normal(size=(4, 4)) + 4.0 * np.eye(4)
    transformed = apply_frame_transform(g, FrameTransform.constant(matrix, 2, 2), P)
    expected = np.linalg.det(matrix) ** 2 * np.linalg.det(g.full(P))
    assert np.linalg.det(transformed) == pytest.approx(expected, rel=1e-10)


def test_n_connection_transform():
    A = load_frame(MODELS / 'scale.frame', 2, 2)
    assert A.is_constant
    N = np.array([[1.0, -2.0], [0.5, 4.0]])
    primed = transform_n_connection(N, A, P)
    assert np.allclose(primed, 1.5 * N)
    assert np.allclose(inverse_transform_n_connection(primed, A, P), N, atol=1e-10)


def test_transform_errors():
    mixing = np.eye(4)
    mixing[0, 2] = 0.3
    with pytest.raises(NotNAdapted):
        transform_n_connection(np.zeros((2, 2)), FrameTransform.constant(mixing, 2, 2), P)
    with pytest.raises(SingularTransform):
        FrameTransform.constant(np.zeros((4, 4)), 2, 2).at(P)
    with pytest.raises(SingularTransform):
        FrameTransform.constant(np.eye(3), 2, 2)


def test_scalar_curvature_is_frame_invariant():
    model, data = _canonical(SPHERE)
    A = FrameTransform.block_diagonal(2.0 * np.eye(2), 3.0 * np.eye(2))
    transformed, forward = transform_geometry(data, A)
    p_new = Point.from_coords(forward @ P.coords, 2)
    assert p_new.x == pytest.approx((2.0, 1.0))

    assert np.allclose(transformed.nconnection(p_new), transform_n_connection(data.nconnection, A, P))
    *_, before, _ = full_geometry(data.dconnection, data.nconnection, data.metric, P, 1.0, CFG)
    *_, after, _ = full_geometry(transformed.dconnection, transformed.nconnection,
                                 transformed.metric, p_new, 1.0, CFG)
    assert after.total == pytest.approx(before.total, abs=1e-5)
    assert after.total == pytest.approx(2.0, abs=1e-5)


def test_scalar_curvature_is_invariant_under_random_transforms():
    model, data = _canonical(SPHERE)
    *_, before, _ = full_geometry(data.dconnection, data.nconnection, data.metric, P, 1.0, CFG)
    rng = np.random.default_rng(31)
    for _ in range(3):
        A = FrameTransform.block_diagonal(np.eye(2) + 0.3 * rng.uniform(-1.0, 1.0, size=(2, 2)),
                                          np.eye(2) + 0.3 * rng.uniform(-1.0, 1.0, size=(2, 2)))
        transformed, forward = transform_geometry(data, A)
        p_new = Point.from_coords(forward @ P.coords, 2)
        *_, after, _ = full_geometry(transformed.dconnection, transformed.nconnection,
                                     transformed.metric, p_new, 1.0, CFG)
        assert after.total == pytest.approx(before.total, abs=1e-5)


def test_transform_round_trip_restores_metric_and_n():
    _, data = _canonical(SPHERE)
    rng = np.random.default_rng(37)
    for _ in range(5):
        mixing = FrameTransform.constant(rng.uniform(-0.5, 0.5, size=(4, 4)) + 3.0 * np.eye(4), 2, 2)
        primed = apply_frame_transform(data.metric, mixing, P)
        assert np.allclose(inverse_frame_transform(primed, mixing, P), data.metric.full(P),
                           rtol=0.0, atol=1e-10)

        adapted = FrameTransform.block_diagonal(rng.uniform(-0.5, 0.5, size=(2, 2)) + 2.0 * np.eye(2),
                                                rng.uniform(-0.5, 0.5, size=(2, 2)) + 2.0 * np.eye(2))
        primed = apply_frame_transform(data.metric, adapted, P)
        assert np.allclose(apply_frame_transform(primed, adapted, P, inverse=True),
                           data.metric.full(P), rtol=0.0, atol=1e-10)
        primed_n = transform_n_connection(data.nconnection, adapted, P)
        assert np.allclose(inverse_transform_n_connection(primed_n, adapted, P),
                           data.nconnection(P), rtol=0.0, atol=1e-10)


def test_einstein_residual():
    model, data = _canonical(SPHERE)
    g, N, D = data.metric, data.nconnection, data.dconnection
    sample = [P, Point((1.2, 0.3), (0.5, 0.9))]

    own = einstein_source(g, N, D, 1.0, CFG)
    assert einstein_residual(g, N, D, own, sample, 1.0, CFG) <= 1e-10

    # The v-block of the sphere's Einstein tensor is -g_ab, so a zero source misses by ~1.
    zero = SourceField.zero(2, 2)
    assert einstein_residual(g, N, D, zero, sample, 1.0, CFG) > 0.5

    _, flat = _canonical("y1^2 + y2^2")
    assert einstein_residual(flat.metric, flat.nconnection, flat.dconnection, zero,
                             sample, 1.0, CFG) <= 1e-10

    with pytest.raises(EmptySample):
        einstein_residual(g, N, D, zero, [], 1.0, CFG)


def test_lc_constraints():
    _, flat = _canonical("y1^2 + y2^2")
    assert max(lc_constraint_residuals(flat, [P], 1.0, CFG)) == 0.0

    _, anharmonic = _canonical("exp(x1)*(y1^2 + y2^2) + y1^4")
    residuals = lc_constraint_residuals(anharmonic, [Point((0.4, 0.6), (0.8, 0.5))], 1.0, CFG)
    assert residuals.mixed_cartan > 0.1

    model = ModelFile.load(MODELS / 'levi_civita.fgm')
    residuals = lc_constraint_residuals(model.geometry(), model.points(), 1.0, CFG)
    assert max(residuals) <= 1e-10

    with pytest.raises(EmptySample):
        lc_constraint_residuals(flat, [], 1.0, CFG)


def main():
    """Run gravity tests."""
    test_identity_and_scaling()
    test_orthonormalizing_frame()
    test_congruence_determinant()
    test_n_connection_transform()
    test_transform_errors()
    test_scalar_curvature_is_frame_invariant()
    test_scalar_curvature_is_invariant_under_random_transforms()
    test_transform_round_trip_restores_metric_and_n()
    test_einstein_residual()
    test_lc_constraints()
    print("✓ Gravity tests passed")


if __name__ == '__main__':
    main()
