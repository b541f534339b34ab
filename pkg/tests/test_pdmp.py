import math

import numpy as np
import pytest

from sohb import pdmp, son
from sohb.pdmp import ConfigError, ParticleEnsemble, SimParams


def ens_of(X, A, L=1.0, c0=1.0, t_mark=None):
    X = np.asarray(X, float)
    N = len(X)
    return ParticleEnsemble(X, np.asarray(A, float), np.zeros(N) if t_mark is None else np.asarray(t_mark, float),
                            np.full(N, math.inf), 0.0, L, c0)


def test_position_at_advects_along_first_column():
    A = np.stack([np.eye(3), son.expm_skew(np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0]]) * math.pi / 2)])
    e = ens_of([[0.1, 0.2, 0.3], [0.5, 0.5, 0.5]], A, t_mark=[0.0, 1.0])
    np.testing.assert_allclose(pdmp.position_at(e, 0, 0.25), [0.35, 0.2, 0.3])
    # second frame sends e1 to e2; time is measured from its own last event
    np.testing.assert_allclose(pdmp.position_at(e, 1, 1.75), [0.5, 0.25, 0.5], atol=1e-12)
    np.testing.assert_allclose(pdmp.position_at(e, 0, 1.0), [0.1, 0.2, 0.3], atol=1e-12)  # wraps
    with pytest.raises(ValueError):
        pdmp.position_at(e, 1, 0.5)


def test_periodic_distance():
    d = pdmp.periodic_distance(np.array([0.05, 0.0]), np.array([[0.95, 0.0], [0.5, 0.5]]), 1.0)
    np.testing.assert_allclose(d, [0.1, math.sqrt(0.45**2 + 0.5**2)])


def test_neighbor_average_three_particles_by_hand(rng):
    p = SimParams(N=3, n=3, R=0.3, L=1.0)
    A = son.haar_sample(rng, 3, 3)
    # particle 1 sits 0.2 away across the boundary, particle 2 sits 0.4 away
    e = ens_of([[0.1, 0.5, 0.5], [0.9, 0.5, 0.5], [0.5, 0.5, 0.5]], A)
    J = pdmp.neighbor_average(0, e, 0.0, p)
    np.testing.assert_allclose(J, (A[0] + A[1]) / (3 * 0.3**3), atol=1e-13)


def test_isolated_particle_keeps_own_frame(rng):
    p = SimParams(N=2, n=3, R=0.1, L=1.0)
    A = son.haar_sample(rng, 3, 2)
    e = ens_of([[0.1, 0.1, 0.1], [0.6, 0.6, 0.6]], A)
    J = pdmp.neighbor_average(0, e, 0.0, p)
    np.testing.assert_allclose(son.project_to_rotation(J), A[0], atol=1e-12)


def test_custom_kernel_weights():
    p = SimParams(N=2, n=3, R=0.2, kernel="custom", kernel_table=[(0, 1), (2, 0)])
    np.testing.assert_allclose(pdmp.kernel_weights(p, [0.0, 0.2, 0.4, 0.5]), np.array([1, 0.5, 0, 0]) / 0.008)


def test_homogeneous_average_is_global_mean(rng):
    p = SimParams(N=4, n=3, R=2.0, L=1.0)
    assert p.homogeneous
    A = son.haar_sample(rng, 3, 4)
    e = ens_of(rng.uniform(size=(4, 3)), A)
    np.testing.assert_allclose(pdmp.neighbor_average(2, e, 0.0, p), A.mean(axis=0) / 8.0)


def test_order_parameter_examples(rng):
    op, J = pdmp.order_parameter(np.broadcast_to(son.haar_sample(rng, 4), (10, 4, 4)))
    assert op == pytest.approx(1.0, abs=1e-12)
    A = np.stack([np.eye(3), np.eye(3), np.diag([1.0, -1.0, -1.0])])
    op, J = pdmp.order_parameter(A)
    np.testing.assert_allclose(J, np.diag([1.0, 1 / 3, 1 / 3]))
    assert op == pytest.approx(5.0 / 9.0)


@pytest.mark.parametrize("bad", [
    dict(R=0.6), dict(c0=0.0), dict(kappa=-1.0), dict(nu=-0.5), dict(T_end=math.inf),
    dict(kernel="gauss"), dict(kernel="custom"), dict(jump_rule="unnormalized"), dict(n=2), dict(N=0),
])
def test_config_errors(bad):
    kw = dict(N=10)
    kw.update(bad)
    with pytest.raises(ConfigError):
        SimParams(**kw)


def test_config_dict_and_toml(tmp_path):
    with pytest.raises(ConfigError):
        SimParams.from_dict({"N": 5, "bogus": 1})
    with pytest.raises(ConfigError):
        SimParams.from_dict({"n": 3})
    f = tmp_path / "c.toml"
    f.write_text('N = 20\nn = 4\nR = 3.0\nkernel = "indicator"\nT_end = 2.0\n')
    p = pdmp.load_config(f, seed=7, T_end=None)
    assert (p.N, p.n, p.seed, p.T_end) == (20, 4, 7, 2.0)
    assert SimParams.from_dict(p.to_dict()) == p
    f.write_text("N = [")
    with pytest.raises(ConfigError):
        pdmp.load_config(f)
    with pytest.raises(ConfigError):
        pdmp.load_config(tmp_path / "missing.toml")


def test_no_events_without_jumps():
    res = pdmp.run(SimParams(N=30, nu=0.0, T_end=2.0, R=0.2))
    assert res.n_events == 0 and res.jump_counts.sum() == 0
    assert res.snapshots[-1]["t"] == 2.0


def test_run_deterministic_and_records():
    p = SimParams(N=40, n=3, R=0.25, T_end=1.0, nu=2.0, kappa=2.0, seed=11, snapshot_every=0.5)
    recs_a, recs_b = [], []
    a = pdmp.run(p, recs_a.append)
    b = pdmp.run(p, recs_b.append)
    assert recs_a == recs_b
    np.testing.assert_array_equal(a.ensemble.A, b.ensemble.A)
    ev = [r for r in recs_a if r["type"] == "event"]
    assert len(ev) == a.n_events - a.n_warnings
    assert all(x["t"] <= y["t"] for x, y in zip(ev, ev[1:]))
    assert [r["t"] for r in recs_a if r["type"] == "snapshot"] == [0.5, 1.0]
    A = np.array(ev[0]["a_new"]).reshape(3, 3)
    np.testing.assert_allclose(A.T @ A, np.eye(3), atol=1e-12)
    c = pdmp.run(SimParams(**{**p.to_dict(), "seed": 12}))
    assert not np.array_equal(a.ensemble.A, c.ensemble.A)


def test_cell_list_matches_brute_force():
    base = dict(N=300, n=3, R=0.15, L=1.0, T_end=0.5, nu=2.0, kappa=3.0, seed=4)
    a = pdmp.run(SimParams(**base, neighbor_search="brute"))
    b = pdmp.run(SimParams(**base, neighbor_search="cell"))
    assert a.n_events == b.n_events
    np.testing.assert_allclose(a.ensemble.A, b.ensemble.A, atol=1e-10)


def test_homogeneous_relaxation_to_equilibrium():
    p = SimParams(N=400, n=3, R=2.0, L=1.0, kappa=2.0, nu=1.0, T_end=8.0, init_frames="aligned", seed=1)
    res = pdmp.run(p)
    # aligned start at theta = Id; the target order parameter is c1(kappa)
    from sohb.coefficients import c1
    assert abs(res.snapshots[-1]["order_parameter"] - c1(3, 2.0)) < 0.06


def test_poisson_check():
    assert pdmp.poisson_check([1, 2, 3], 2.0, 1.0)[2]
    assert not pdmp.poisson_check([10, 10, 10], 2.0, 1.0)[2]
    assert pdmp.poisson_check([0, 0], 0.0, 1.0) == (0.0, 0.0, True)
