import math

import numpy as np
import pytest

import gplfm


def chain_twin(noise=0.0, n_dof=4):
    modal = gplfm.solve_modal(gplfm.spring_mass_chain(n_dof, 1000.0, 4.0e6), n_dof).with_uniform_damping(0.05)
    channels = gplfm.SensorLayout(accel=list(range(n_dof))).channels()
    sc = gplfm.ImpactScenario()
    sc.force = gplfm.TriangularForce(peak=1.0e4, rise=0.0625, fall=0.125, onset=0.5)
    sc.loads = [gplfm.ForceLoad(1)]
    sc.duration = 3.0
    sc.fs = 128.0
    sc.noise.accel = noise
    sc.seed = 5
    return modal, channels, gplfm.simulate(sc, modal, channels)


def test_modal_frequencies_match_generalized_eigenproblem():
    sys = gplfm.spring_mass_chain(6, 2.0, 300.0)
    modal = gplfm.solve_modal(sys, 6)
    # M^-1/2 K M^-1/2 with a diagonal mass matrix
    m = np.diag(sys.mass)
    a = sys.stiffness / np.sqrt(np.outer(m, m))
    w = np.sqrt(np.linalg.eigvalsh(a))
    np.testing.assert_allclose(modal.omega, w, rtol=1e-10)
    np.testing.assert_allclose(modal.phi.T @ sys.mass @ modal.phi, np.eye(6), atol=1e-10)


def test_state_space_covariance_reproduces_the_kernel():
    p = gplfm.Matern32Params(1.7, 0.3)
    ssm = gplfm.to_state_space(p, 0.01)
    lam = math.sqrt(3.0) / 0.3
    for lag in range(0, 60, 7):
        tau = lag * 0.01
        expected = 1.7**2 * (1 + lam * tau) * math.exp(-lam * tau)
        assert abs(gplfm.ssm_covariance(ssm, lag) - expected) < 1e-10
        assert gplfm.kernel_eval(p, tau) == pytest.approx(expected, rel=1e-13)
    np.testing.assert_allclose(ssm.pinf, np.diag([1.7**2, 1.7**2 * lam**2]), rtol=1e-10, atol=1e-12)


def test_metric_truths_and_errors():
    a = np.sin(np.linspace(0, 7, 200)) + 0.1
    assert gplfm.rmse(a, a) == 0.0
    assert abs(gplfm.trac(a, a) - 100.0) < 1e-12
    assert abs(gplfm.trac(-3.0 * a, a) - 100.0) < 1e-12
    p = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert abs(gplfm.hellinger(p, p)) < 1e-12
    with pytest.raises(gplfm.UndefinedMetric):
        gplfm.trac(a, np.zeros_like(a))
    with pytest.raises(gplfm.InvalidInput):
        gplfm.rmse(a, a[:10])
    assert issubclass(gplfm.InvalidInput, gplfm.GplfmError)


def test_welch_white_noise_integrates_to_its_variance():
    x = np.random.default_rng(1).standard_normal(1 << 16)
    s = gplfm.psd(x, 256.0)
    f = np.asarray(s.frequency)
    assert np.sum(s.power) * (f[1] - f[0]) == pytest.approx(1.0, rel=0.1)


def test_simulation_and_estimation_with_fixed_model():
    modal, channels, sim = chain_twin()
    assert sim.measured.length == sim.clean.length == sc_samples(sim)
    np.testing.assert_allclose(sim.measured.matrix(), sim.clean.matrix())
    observed = channels[:3]
    y = sim.clean.matrix()[:3]
    model = gplfm.build_gplfm(modal, observed, 1.0 / 128.0, gplfm.Hyperparameters(1e3, 0.05, 1e-14),
                              gplfm.NoiseVariances(accel=1e-6))
    res = gplfm.estimate(model, modal, y, [channels[3]])
    assert res.outputs.mean.shape == (1, y.shape[1])
    assert gplfm.trac(res.outputs.mean[0], sim.acceleration[3]) > 90.0
    for f, s in zip(res.filtered, res.smoothed):
        assert np.all(np.diag(s.cov) <= np.diag(f.cov) + 1e-9)


def sc_samples(sim):
    return sim.acceleration.shape[1]


def test_leave_one_out_and_placement_workflows():
    modal, channels, sim = chain_twin(noise=1e-3)
    cfg = gplfm.LooConfig()
    cfg.estimation.prior.restarts = 2
    cfg.shared_tuning = True
    rep = gplfm.run_loo(sim.measured, modal, channels, cfg)
    assert len(rep.folds) == 4 and rep.failed() == 0
    assert sorted(rep.ranking) == sorted(c.name for c in channels)
    assert all(f.trac > 80.0 for f in rep.folds)

    bcfg = gplfm.BsspConfig()
    bcfg.estimation = cfg.estimation
    bcfg.min_sensors = 1
    target = gplfm.Channel("virtual_a2", gplfm.Quantity.Acceleration, 2)
    r = gplfm.run_bssp(sim.measured, modal, channels, target, list(sim.acceleration[2]), bcfg)
    assert len(r.removal_order) == 3
    assert [len(s.retained) for s in r.steps] == [4, 3, 2, 1]


def test_invalid_input_is_mapped():
    with pytest.raises(gplfm.InvalidInput):
        gplfm.spring_mass_chain(0, 1.0, 1.0)
    with pytest.raises(gplfm.InvalidInput):
        gplfm.Matern32Params(-1.0, 1.0)
