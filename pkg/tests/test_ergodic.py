import numpy as np
import pytest

from hjmetric import OmegaPoint, PotentialSpec, TorusEnvironment
from hjmetric.ergodic import (
    ACCEPTED,
    REJECTED,
    FieldSample,
    birkhoff_average,
    density_asymptotics,
    mean_increment_test,
    sample_threshold_set,
    sublinearity_test,
)
from hjmetric.errors import EmptySample

from conftest import make_quasiperiodic_spec, make_sine_spec, zero_omega


def test_birkhoff_constant_function():
    env = TorusEnvironment.quasiperiodic_2d(seed=3)
    pot = PotentialSpec("constant", 1.0)
    rep = birkhoff_average(env, pot, env.sample_omega(0), radii=[5.0, 10.0], h=0.25)
    np.testing.assert_allclose(rep.means, 1.0)
    assert rep.expected == 1.0


def test_birkhoff_single_harmonic_mean_zero():
    env = TorusEnvironment.quasiperiodic_2d(seed=5)
    pot = PotentialSpec(
        "user_trigonometric", {"c0": 1.0, "terms": [{"k": [1, 0, 0, 0], "a": 1.0, "b": 0.0}]}
    )
    rep = birkhoff_average(env, pot, env.sample_omega(2), radii=[20.0, 60.0], h=0.25)
    # harmonic averages out: mean tends to c0 = 1, i.e. the oscillation mean is 0
    assert abs(rep.means[-1] - 1.0) < 0.02
    assert rep.tail_gap < 0.02


def test_birkhoff_quasiperiodic_tail():
    spec = make_quasiperiodic_spec(seed=7)
    env = spec.env
    rep = birkhoff_average(env, spec.potential, env.sample_omega(1), radii=[15.0, 40.0], h=0.25)
    assert rep.expected == pytest.approx(4.0)
    assert abs(rep.means[-1] - 4.0) <= 0.08
    # means approach the torus integral as the window grows
    assert abs(rep.means[-1] - 4.0) <= abs(rep.means[0] - 4.0) + 0.02


def test_threshold_set_stationarity_bit_exact():
    env = TorusEnvironment(flow_matrix=np.array([[1.0, 0.0], [0.0, 1.0]]), seed=0)
    pot = PotentialSpec(
        "user_trigonometric",
        {"c0": 2.0, "terms": [{"k": [1, 0], "a": -1.0, "b": 0.0}, {"k": [0, 1], "a": -1.0, "b": 0.0}]},
    )
    om = OmegaPoint(np.array([0.0, 0.0]))
    z = np.array([3.0, -1.0])
    shifted_omega = env.translate(om, z)
    base = sample_threshold_set(env, pot, shifted_omega, (0.0, 1.5), [[0, 2], [0, 2]], h=0.25)
    moved = sample_threshold_set(
        env, pot, om, (0.0, 1.5), [[z[0], z[0] + 2], [z[1], z[1] + 2]], h=0.25
    )
    assert np.array_equal(base.indicator, moved.indicator)


def test_volume_fraction_window_agreement():
    spec = make_quasiperiodic_spec(seed=9)
    env = spec.env
    om = env.sample_omega(4)
    fractions = []
    for corner in ([-30, -30], [0, -30], [-30, 0], [0, 0]):
        box = [[corner[0], corner[0] + 30], [corner[1], corner[1] + 30]]
        s = sample_threshold_set(env, spec.potential, om, (0.0, 1.0), box, h=0.25)
        fractions.append(s.volume_fraction)
    fractions = np.asarray(fractions)
    assert fractions.std() < 0.02
    assert np.all(fractions > 0.0)


def test_density_asymptotics_monotone_and_coverage():
    spec = make_quasiperiodic_spec(seed=11)
    env = spec.env
    om = env.sample_omega(0)
    sample = sample_threshold_set(
        env, spec.potential, om, (0.0, 1.0), [[-40, 40], [-40, 40]], h=0.25
    )
    table = density_asymptotics(sample, dilation_radii=[0.0, 0.5, 1.0, 2.0, 4.0], ball_radii=[10.0, 30.0])
    assert np.all(np.diff(table.ratios, axis=0) >= -1e-12)
    assert np.all(table.ratios >= 0.0) and np.all(table.ratios <= 1.0)
    assert table.ratios[-1, -1] > table.ratios[0, -1]
    # a generous dilation covers most of the window
    assert table.coverage_radii[0.2] is not None


def test_density_asymptotics_full_set_is_one():
    env = TorusEnvironment.still(2, seed=0)
    pot = PotentialSpec("constant", 0.5)
    om = env.sample_omega(0)
    sample = sample_threshold_set(env, pot, om, (0.0, 1.0), [[-5, 5], [-5, 5]], h=0.5)
    table = density_asymptotics(sample, [0.0, 1.0], [2.0, 4.0])
    np.testing.assert_allclose(table.ratios, 1.0)


def test_density_asymptotics_thin_set():
    # near-maximal level set of a single harmonic: thin vertical strips with
    # a small volume fraction; a unit dilation already covers the period
    env = TorusEnvironment(flow_matrix=np.array([[1.0, 0.0]]), seed=0)
    pot = PotentialSpec(
        "user_trigonometric", {"c0": 1.0, "terms": [{"k": [1], "a": 1.0, "b": 0.0}]}
    )
    om = OmegaPoint(np.zeros(1))
    sample = sample_threshold_set(env, pot, om, (1.995, 2.0), [[-20, 20], [-20, 20]], h=0.1)
    table = density_asymptotics(sample, dilation_radii=[0.0, 1.0], ball_radii=[15.0])
    assert sample.volume_fraction < 0.15
    # undilated ratio sits near the volume fraction, far from 1
    assert abs(table.ratios[0, 0] - sample.volume_fraction) < 0.02
    assert table.ratios[1, 0] > 0.99


def test_density_asymptotics_empty_raises():
    env = TorusEnvironment.still(2, seed=0)
    pot = PotentialSpec("constant", 5.0)
    om = env.sample_omega(0)
    sample = sample_threshold_set(env, pot, om, (0.0, 1.0), [[-5, 5], [-5, 5]], h=0.5)
    with pytest.raises(EmptySample):
        density_asymptotics(sample, [0.0, 1.0], [2.0])


def test_sublinearity_linear_rejected_sqrt_accepted():
    box = [[-64, 64], [-64, 64]]
    h = 1.0
    linear = FieldSample.from_callable(lambda x: 0.7 * x[0] + 0.1 * x[1], box, h)
    rep = sublinearity_test(linear, radii=[4.0, 8.0, 16.0, 32.0, 60.0])
    assert rep.verdict == REJECTED
    root = FieldSample.from_callable(lambda x: np.sqrt(np.linalg.norm(x)), box, h)
    rep2 = sublinearity_test(root, radii=[4.0, 8.0, 16.0, 32.0, 60.0])
    assert rep2.verdict == ACCEPTED
    assert rep2.slope_vs_inverse_radius >= 0.0


def test_sublinearity_periodic_corrector_accepted():
    # corrector for the 1D sine potential: bounded, hence sublinear
    from hjmetric import build_graph
    from hjmetric.lax import lax_solve

    spec = make_sine_spec()
    om = zero_omega(spec)
    h = 0.01
    g = build_graph(spec, [[-40.0, 40.0]], h=h, stencil_radius=2, a=0.0, omega=om)
    sources = [g.point_node([float(k)]) for k in range(-40, 41)]
    sol = lax_solve(g, sources, np.zeros(len(sources)))
    field = FieldSample.from_graph(g, sol.values)
    rep = sublinearity_test(field, radii=[2.0, 5.0, 10.0, 20.0, 38.0])
    assert rep.verdict == ACCEPTED


def test_mean_increment_linear_rejected():
    box = [[-8, 8], [-8, 8]]
    fields = [
        FieldSample.from_callable(lambda x: 1.0 * x[0], box, 0.5) for _ in range(8)
    ]
    rep = mean_increment_test(fields, x=[0.0, 0.0], y=[1.0, 0.0])
    assert rep.verdict == REJECTED
    assert rep.mean == pytest.approx(1.0)


def test_mean_increment_same_point_accepted():
    box = [[-8, 8], [-8, 8]]
    rng = np.random.default_rng(0)
    fields = [
        FieldSample.from_callable(lambda x, c=rng.normal(): np.sin(x[0] + c), box, 0.5)
        for _ in range(8)
    ]
    rep = mean_increment_test(fields, x=[1.0, 1.0], y=[1.0, 1.0])
    assert rep.verdict == ACCEPTED
    assert rep.mean == 0.0


def test_mean_increment_stationary_lax_accepted():
    # distances to stationary threshold sources over an omega ensemble carry
    # stationary increments: ensemble means of increments vanish
    from hjmetric import build_graph
    from hjmetric.lax import lax_solve

    spec = make_quasiperiodic_spec(seed=21)
    fields = []
    for k in range(8):
        om = spec.env.sample_omega(k)
        g = build_graph(spec, [[-6, 6], [-6, 6]], h=0.25, stencil_radius=2, a=0.5, omega=om)
        pts = g.grid_points()
        pm = spec.pointwise_min(pts, om)
        sources = np.nonzero(pm >= -1.0)[0]
        sol = lax_solve(g, sources, np.zeros(sources.size))
        vals = sol.values - sol.value_at([0.0, 0.0])
        fields.append(FieldSample.from_graph(g, vals))
    rep = mean_increment_test(fields, x=[-2.0, 1.0], y=[3.0, -2.0])
    assert rep.verdict == ACCEPTED


def test_mean_increment_requires_ensemble():
    box = [[-2, 2], [-2, 2]]
    fields = [FieldSample.from_callable(lambda x: 0.0, box, 0.5) for _ in range(3)]
    with pytest.raises(ValueError):
        mean_increment_test(fields, [0, 0], [1, 1])
