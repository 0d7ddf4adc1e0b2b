import numpy as np
import pytest
from scipy.integrate import quad

from hjmetric import (
    HamiltonianSpec,
    OmegaPoint,
    PotentialSpec,
    TorusEnvironment,
    build_graph,
    coprime_offsets,
    detect_sources,
    free_critical_value,
    has_negative_cycle,
    multi_source_values,
    reverse_graph,
    shortest_distances,
)
from hjmetric.errors import EmptySublevel, NegativeCycle
from hjmetric.hamiltonian import TrigSum

from conftest import (
    make_constant_spec,
    make_quasiperiodic_spec,
    make_sine_spec,
    zero_omega,
)


def make_rotational_drift_spec(amp: float) -> HamiltonianSpec:
    """Non-conservative drift field b = amp (-sin 2 pi x2, sin 2 pi x1)."""
    env = TorusEnvironment(flow_matrix=np.array([[1.0, 0.0], [0.0, 1.0]]), seed=0)
    drift = (
        TrigSum(c0=0.0, harmonics=(((0, 1), 0.0, -amp),)),
        TrigSum(c0=0.0, harmonics=(((1, 0), 0.0, amp),)),
    )
    return HamiltonianSpec(
        env=env, form="eikonal_drift", potential=PotentialSpec("constant", 0.0), drift=drift
    )


def test_offsets_coprime_counts():
    assert len(coprime_offsets(2, 1)) == 8
    assert len(coprime_offsets(2, 3)) == 32
    assert len(coprime_offsets(1, 3)) == 2
    for z in coprime_offsets(2, 3):
        assert np.gcd(abs(int(z[0])), abs(int(z[1]))) == 1


def test_build_graph_node_count_and_interior_degree():
    spec = make_constant_spec(0.0)
    om = zero_omega(spec)
    g = build_graph(spec, [[0, 1], [0, 1]], h=0.5, stencil_radius=1, a=1.0, omega=om)
    assert g.n_nodes == 9
    center = g.point_node([0.5, 0.5])
    assert int(np.isfinite(g.weights[center]).sum()) == 8


def test_free_weights_are_euclidean_lengths():
    spec = make_constant_spec(0.0)
    om = zero_omega(spec)
    g = build_graph(spec, [[-1, 1], [-1, 1]], h=0.25, stencil_radius=2, a=1.0, omega=om)
    for k, z in enumerate(g.offsets):
        length = 0.25 * np.linalg.norm(z)
        finite = np.isfinite(g.weights[:, k])
        assert np.allclose(g.weights[finite, k], length)


def test_quasiperiodic_weight_midpoint_value():
    spec = make_quasiperiodic_spec()
    om = OmegaPoint(np.zeros(4))
    h = 0.125
    g = build_graph(spec, [[0, 1], [0, 1]], h=h, stencil_radius=1, a=0.0, omega=om)
    origin = g.point_node([0.0, 0.0])
    k = next(i for i, z in enumerate(g.offsets) if tuple(z) == (1, 0))
    v_mid = spec.potential_values(np.array([[h / 2, 0.0]]), om)[0]
    assert g.weights[origin, k] == pytest.approx(h * v_mid)


def test_trapezoid_quadrature_option():
    spec = make_sine_spec()
    om = zero_omega(spec)
    h = 1e-3
    mid = build_graph(spec, [[0.0, 1.0]], h=h, stencil_radius=1, a=0.0, omega=om)
    trap = build_graph(
        spec, [[0.0, 1.0]], h=h, stencil_radius=1, a=0.0, omega=om, quadrature="trapezoid"
    )
    k = next(i for i, z in enumerate(trap.offsets) if z[0] == 1)
    node = trap.point_node([0.25])
    v = lambda x: abs(np.sin(np.pi * x))
    assert trap.weights[node, k] == pytest.approx(h * (v(0.25) + v(0.25 + h)) / 2, rel=1e-12)
    assert mid.weights[node, k] == pytest.approx(h * v(0.25 + h / 2), rel=1e-12)
    # both rules agree with the exact integral to first order
    d_mid = shortest_distances(mid, np.array([0.0])).value_at([1.0])
    d_trap = shortest_distances(trap, np.array([0.0])).value_at([1.0])
    assert abs(d_mid - d_trap) < 1e-5


def test_weights_bounded_by_kappa_times_length():
    spec = make_quasiperiodic_spec()
    om = spec.env.sample_omega(8)
    a = 0.7
    g = build_graph(spec, [[-3, 3], [-3, 3]], h=0.2, stencil_radius=3, a=a, omega=om)
    kappa = spec.kappa(a)
    lengths = g.h * np.linalg.norm(g.offsets, axis=1)
    for k in range(g.offsets.shape[0]):
        finite = np.isfinite(g.weights[:, k])
        assert np.all(g.weights[finite, k] <= kappa * lengths[k] + 1e-12)


def test_distance_euclidean_oracle():
    spec = make_constant_spec(0.0)
    om = zero_omega(spec)
    g = build_graph(spec, [[-5, 5], [-5, 5]], h=0.05, stencil_radius=3, a=1.0, omega=om)
    field = shortest_distances(g, np.array([0.0, 0.0]))
    assert field.value_at([0.0, 0.0]) == 0.0
    got = field.value_at([3.0, 4.0])
    assert abs(got - 5.0) <= 0.1
    # sublevel is the unit ball, so the intrinsic metric is Euclidean within
    # the stencil anisotropy (< 0.5% at radius 3)
    assert got >= 5.0


def test_distance_sine_quadrature_oracle():
    spec = make_sine_spec()
    om = zero_omega(spec)
    g = build_graph(spec, [[-0.5, 1.5]], h=1e-3, stencil_radius=3, a=0.0, omega=om)
    field = shortest_distances(g, np.array([0.0]))
    oracle, err = quad(lambda t: abs(np.sin(np.pi * t)), 0.0, 1.0)
    assert err < 1e-9
    got = field.value_at([1.0])
    assert abs(got - oracle) <= 0.01 * oracle


def test_triangle_inequality_random_triples():
    spec = make_quasiperiodic_spec()
    om = spec.env.sample_omega(3)
    g = build_graph(spec, [[-2, 2], [-2, 2]], h=0.2, stencil_radius=2, a=0.5, omega=om)
    rng = np.random.default_rng(0)
    nodes = rng.integers(0, g.n_nodes, size=12)
    fields = {int(n): shortest_distances(g, int(n)).values for n in nodes}
    slack = 1e-9
    for _ in range(400):
        x, y, z = rng.choice(nodes, size=3)
        lhs = fields[int(x)][int(z)]
        rhs = fields[int(x)][int(y)] + fields[int(y)][int(z)]
        assert lhs <= rhs + slack


def test_grid_stationarity_bit_exact():
    # integer flow rows, dyadic spacing, integer shift: translated window
    # against translated omega gives bit-identical weights
    env = TorusEnvironment(flow_matrix=np.array([[1.0, 0.0], [0.0, 1.0]]), seed=0)
    pot = PotentialSpec(
        "user_trigonometric",
        {"c0": 2.0, "terms": [{"k": [1, 0], "a": -1.0, "b": 0.0}, {"k": [0, 1], "a": -0.5, "b": 0.5}]},
    )
    spec = HamiltonianSpec(env=env, form="eikonal", potential=pot)
    om = OmegaPoint(np.array([0.0, 0.0]))
    z = np.array([2.0, -3.0])
    g0 = build_graph(spec, [[0, 1], [0, 1]], h=0.25, stencil_radius=2, a=1.0, omega=env.translate(om, z))
    g1 = build_graph(spec, [[z[0], z[0] + 1], [z[1], z[1] + 1]], h=0.25, stencil_radius=2, a=1.0, omega=om)
    assert np.array_equal(g0.weights, g1.weights)


def test_monotone_in_level():
    spec = make_quasiperiodic_spec()
    om = spec.env.sample_omega(1)
    ga = build_graph(spec, [[-2, 2], [-2, 2]], h=0.25, stencil_radius=2, a=0.0, omega=om)
    gb = build_graph(spec, [[-2, 2], [-2, 2]], h=0.25, stencil_radius=2, a=1.0, omega=om)
    da = shortest_distances(ga, np.array([0.0, 0.0])).values
    db = shortest_distances(gb, np.array([0.0, 0.0])).values
    assert np.all(da <= db + 1e-12)


def test_kingman_subadditivity_exact_on_dyadic_weights():
    # axis-only stencil and constant potential keep every path sum an exact
    # small multiple of h: the premise f(m,n) <= f(m,k) + f(k,n) holds with
    # no float slack
    spec = make_constant_spec(1.0)
    om = zero_omega(spec)
    offsets = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [2, 0], [-2, 0]])
    g = build_graph(
        spec, [[0, 8], [0, 2]], h=0.25, stencil_radius=2, a=3.0, omega=om, offsets=offsets
    )
    step = np.array([1.0, 0.0])
    nodes = [g.point_node(step * m) for m in range(9)]
    dist = {m: shortest_distances(g, nodes[m]).values for m in range(9)}
    f = lambda m, n: dist[m][nodes[n]]
    for m in range(9):
        assert f(m, m) == 0.0
        for k in range(m, 9):
            for n in range(k, 9):
                assert f(m, n) <= f(m, k) + f(k, n)


def test_refinement_consistency():
    spec = make_quasiperiodic_spec()
    om = spec.env.sample_omega(2)
    target = np.array([1.6, 1.0])
    vals = []
    for h in (0.2, 0.1, 0.05):
        g = build_graph(spec, [[-1, 3], [-1, 3]], h=h, stencil_radius=3, a=0.5, omega=om)
        vals.append(shortest_distances(g, np.array([0.0, 0.0])).value_at(target))
    assert abs(vals[2] - vals[1]) <= abs(vals[1] - vals[0]) + 1e-9


def test_free_critical_value_constant():
    spec = make_constant_spec(2.0)
    om = zero_omega(spec)
    res = free_critical_value(spec, om, [[-1, 1], [-1, 1]], h=0.25, stencil_radius=1, tol=0.01)
    assert res.width <= 0.01
    assert abs(res.estimate - (-4.0)) <= 0.01


def test_free_critical_value_sine():
    spec = make_sine_spec()
    om = zero_omega(spec)
    res = free_critical_value(spec, om, [[-0.25, 1.25]], h=1e-3, stencil_radius=2, tol=1e-3)
    assert abs(res.estimate - 0.0) <= 1e-3


def test_free_critical_value_quasiperiodic_growing_box():
    spec = make_quasiperiodic_spec()
    om = spec.env.sample_omega(5)
    small = free_critical_value(spec, om, [[-2, 2], [-2, 2]], h=0.1, stencil_radius=1, tol=0.01)
    large = free_critical_value(spec, om, [[-12, 12], [-12, 12]], h=0.1, stencil_radius=1, tol=0.01)
    # the certified lower end is -min V^2 over the box: negative, creeping
    # up to zero as the box grows (inf V = 0 almost surely)
    assert small.lo <= 1e-9 and large.lo <= 1e-9
    assert large.lo >= small.lo - 1e-12
    assert large.lo > -0.05
    assert large.hi <= 0.011


def test_negative_cycle_detection_rotational_drift():
    spec = make_rotational_drift_spec(amp=1.0)
    om = zero_omega(spec)
    box = [[-1, 1], [-1, 1]]
    g0 = build_graph(spec, box, h=0.1, stencil_radius=2, a=0.0, omega=om)
    assert has_negative_cycle(g0)
    with pytest.raises(NegativeCycle):
        shortest_distances(g0, np.array([0.0, 0.0]))
    res = free_critical_value(spec, om, box, h=0.1, stencil_radius=2, tol=0.02)
    assert 0.0 < res.estimate <= 2.0 + 0.02
    g1 = build_graph(spec, box, h=0.1, stencil_radius=2, a=res.estimate + 0.05, omega=om)
    assert not has_negative_cycle(g1)
    field = shortest_distances(g1, np.array([0.0, 0.0]))
    assert field.reached


def test_empty_sublevel_propagates():
    spec = make_constant_spec(1.0)
    om = zero_omega(spec)
    with pytest.raises(EmptySublevel):
        build_graph(spec, [[-1, 1], [-1, 1]], h=0.5, stencil_radius=1, a=-2.0, omega=om)


def test_detect_sources_sine_equilibria_and_aubry():
    spec = make_sine_spec()
    om = zero_omega(spec)
    h = 1e-3
    g = build_graph(spec, [[-0.2, 1.2]], h=h, stencil_radius=2, a=0.0, omega=om)
    pts = g.grid_points()
    candidates = np.nonzero(np.abs(pts[:, 0] - np.round(pts[:, 0])) < 0.02)[0]
    sets = detect_sources(
        spec, om, g, c_f_est=0.0, c_est=0.0, delta=5 * h, aubry_candidates=candidates
    )
    eq_points = pts[sets.equilibria, 0]
    assert set(np.round(eq_points).astype(int)) == {0, 1}
    assert np.all(np.abs(eq_points - np.round(eq_points)) < 1e-9)
    # equilibria sit inside the Aubry set at the default cycle budget
    assert set(sets.equilibria).issubset(set(sets.aubry))
    # points far from the zeros of V fail the cycle test
    far = np.nonzero(np.abs(pts[:, 0] - 0.5) < 0.05)[0]
    sets_far = detect_sources(
        spec, om, g, c_f_est=0.0, c_est=0.0, delta=5 * h, aubry_candidates=far
    )
    assert len(sets_far.aubry) == 0


def test_detect_sources_constant_all_aubry():
    spec = make_constant_spec(1.5)
    om = zero_omega(spec)
    g = build_graph(spec, [[-1, 1], [-1, 1]], h=0.25, stencil_radius=1, a=-2.25, omega=om)
    sets = detect_sources(spec, om, g, c_f_est=-2.25, c_est=-2.25, delta=0.5)
    assert len(sets.equilibria) == g.n_nodes
    assert len(sets.aubry) == g.n_nodes


def test_detect_sources_empty_equilibria_off_box():
    env = TorusEnvironment.line(seed=0)
    pot = PotentialSpec(
        "user_trigonometric", {"c0": 1.1, "terms": [{"k": [1], "a": 1.0, "b": 0.0}]}
    )
    spec = HamiltonianSpec(env=env, form="eikonal", potential=pot)
    om = OmegaPoint(np.zeros(1))
    # V >= 0.29 on [-0.2, 0.2] while the global min 0.1 sits at x = 0.5
    g = build_graph(spec, [[-0.2, 0.2]], h=0.01, stencil_radius=1, a=0.0, omega=om)
    sets = detect_sources(spec, om, g, c_f_est=-0.01, c_est=-0.01, delta=0.02, value_tol=1e-6)
    assert len(sets.equilibria) == 0


def test_weights_not_assumed_antisymmetric():
    # a drift tilts the support function: opposite edges carry different costs
    spec = make_rotational_drift_spec(amp=0.3)
    om = zero_omega(spec)
    g = build_graph(spec, [[-1, 1], [-1, 1]], h=0.25, stencil_radius=1, a=1.0, omega=om)
    node = g.point_node([0.25, 0.25])
    k_fwd = next(i for i, z in enumerate(g.offsets) if tuple(z) == (1, 0))
    k_bwd = next(i for i, z in enumerate(g.offsets) if tuple(z) == (-1, 0))
    fwd_node = g.point_node([0.5, 0.25])
    w_out = g.weights[node, k_fwd]
    w_back = g.weights[fwd_node, k_bwd]
    assert abs(w_out - w_back) > 1e-3


def test_reverse_graph_measures_inbound_distance():
    spec = make_rotational_drift_spec(amp=0.2)
    om = zero_omega(spec)
    g = build_graph(spec, [[-1, 1], [-1, 1]], h=0.25, stencil_radius=2, a=1.0, omega=om)
    rev = reverse_graph(g)
    a = g.point_node([0.0, 0.0])
    b = g.point_node([0.75, -0.5])
    fwd = shortest_distances(g, a).values
    bwd = shortest_distances(rev, b).values
    assert fwd[b] == pytest.approx(bwd[a], rel=1e-12, abs=1e-12)


def test_distance_field_export_round_trip(tmp_path):
    spec = make_constant_spec(0.0)
    om = zero_omega(spec)
    g = build_graph(spec, [[0, 1], [0, 1]], h=0.5, stencil_radius=1, a=1.0, omega=om)
    field = shortest_distances(g, np.array([0.0, 0.0]))
    csv_path = tmp_path / "field.csv"
    field.to_csv(csv_path)
    rows = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert rows.shape == (9, 3)
    field.to_binary(tmp_path / "field")
    raw = np.fromfile(tmp_path / "field.bin")
    assert np.array_equal(raw, field.values)
    import json

    head = json.loads((tmp_path / "field.json").read_text())
    assert head["dims"] == [3, 3]
    assert head["a"] == 1.0
