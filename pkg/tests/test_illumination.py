import math

import numpy as np
import pytest

from conftest import make_config
from simscope.errors import DataError
from simscope.illumination import (
    IlluminationParams,
    JitterSpec,
    ideal_angle_set,
    ideal_phase_set,
    jitter,
    pattern,
    pattern_set,
)


def params(m=0.8, k0=3.0, theta=0.0, phi=0.0, i0=1.0):
    return IlluminationParams(i0=i0, m=m, k0=k0, theta=theta, phi=phi)


def test_pattern_m_zero_is_constant(config128):
    img = pattern(config128, params(m=0.0, i0=1.7))
    assert np.allclose(img.data, 1.7, atol=1e-12)


def test_pattern_origin_value(config128):
    img = pattern(config128, params(m=0.6, i0=2.0, theta=0.0, phi=0.0))
    assert img.data[0, 0] == pytest.approx(2.0 * (1.0 - 0.3), abs=1e-12)
    assert np.all(img.data >= 2.0 * 0.7 - 1e-12)
    assert np.all(img.data <= 2.0 * 1.3 + 1e-12)


def test_pattern_phase_periodicity(config128):
    a = pattern(config128, params(phi=0.4))
    b = pattern(config128, params(phi=0.4 + 2.0 * math.pi))
    assert np.max(np.abs(a.data - b.data)) < 1e-12


def test_three_phase_sum_homogeneous(config128):
    total = sum(
        pattern(config128, params(theta=0.7, phi=phi)).data
        for phi in ideal_phase_set(3)
    )
    assert (total.max() - total.min()) / total.mean() < 1e-9
    assert total.mean() == pytest.approx(3.0, rel=1e-12)


def test_ideal_phase_set():
    assert ideal_phase_set(3) == pytest.approx([0.0, 2 * math.pi / 3, 4 * math.pi / 3])
    assert ideal_phase_set(1) == [0.0]
    assert ideal_phase_set(5) == pytest.approx([2 * math.pi * j / 5 for j in range(5)])
    with pytest.raises(DataError):
        ideal_phase_set(0)


def test_ideal_angle_set():
    assert ideal_angle_set(3) == pytest.approx([0.0, math.pi / 3, 2 * math.pi / 3])
    assert ideal_angle_set(1, offset=0.2) == [0.2]
    assert ideal_angle_set(2) == pytest.approx([0.0, math.pi / 2])


def test_jitter_zero_spec_is_identity():
    p = params(k0=2.5, theta=0.3, phi=1.0)
    assert jitter(p, JitterSpec(), np.random.default_rng(3)) == p


def test_jitter_deterministic():
    p = params()
    spec = JitterSpec(dphi=0.3)
    a = jitter(p, spec, np.random.default_rng(42))
    b = jitter(p, spec, np.random.default_rng(42))
    assert a == b


def test_jitter_bounds_hold():
    p = params(k0=3.0, theta=0.5, phi=0.1)
    spec = JitterSpec(dk_rel=0.03, dtheta=0.02, dphi=0.25)
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        q = jitter(p, spec, rng)
        assert abs(q.k0 / p.k0 - 1.0) <= 0.03
        assert abs(q.theta - p.theta) <= 0.02
        assert abs(q.phi - p.phi) <= 0.25


def test_pattern_set_counts_and_ordering(config128):
    frames = pattern_set(config128, params(), n_angles=3, n_phases=3)
    assert len(frames) == 9
    ideal_phis = ideal_phase_set(3)
    angles = ideal_angle_set(3)
    for f, (p, img) in enumerate(frames):
        assert p.theta == pytest.approx(angles[f // 3])
        assert p.phi == pytest.approx(ideal_phis[f % 3])
        assert img.shape == config128.shape
    assert len(pattern_set(config128, params(), n_angles=1, n_phases=3)) == 3


def test_pattern_set_triples_homogeneous_without_jitter(config128):
    frames = pattern_set(config128, params(m=1.0), n_angles=3, n_phases=3)
    for a in range(3):
        total = sum(img.data for _, img in frames[3 * a : 3 * a + 3])
        assert (total.max() - total.min()) / total.mean() < 1e-9


def test_params_validation():
    with pytest.raises(DataError):
        IlluminationParams(i0=0.0, m=0.5, k0=1.0, theta=0.0, phi=0.0)
    with pytest.raises(DataError):
        IlluminationParams(i0=1.0, m=1.5, k0=1.0, theta=0.0, phi=0.0)
    with pytest.raises(DataError):
        JitterSpec(dk_rel=-0.1)
