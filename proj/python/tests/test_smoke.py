import numpy as np
import pytest

import ctrirl


@pytest.fixture(scope="module")
def env():
    return ctrirl.build_env("easy", seed=3)


@pytest.fixture(scope="module")
def expert(env):
    return ctrirl.expert_policy(env.mdp, env.r_true)


def test_env_shapes(env):
    mdp = env.mdp
    assert (mdp.n_states, mdp.n_actions) == (16, 5)
    assert mdp.transition.shape == (80, 16)
    np.testing.assert_allclose(mdp.transition.sum(axis=1), 1.0)
    assert env.r_true.shape == (16, 5)


def test_exact_solver_is_a_fixed_point(env, expert):
    sol = ctrirl.exact_solver(env.mdp, expert)
    res = ctrirl.soft_bellman_residual(env.mdp, sol.r, sol.v)
    assert np.abs(res).max() < 1e-10
    # uniform reference measure: each row of r averages to zero
    assert np.abs(sol.r.mean(axis=1)).max() < 1e-10
    m = ctrirl.evaluate(env.mdp, env.r_true, sol.q)
    assert m["kl"] < 1e-9
    assert m["corr"] == pytest.approx(1.0, abs=1e-9)


def test_point_mass_column_is_zero(env, expert):
    sol = ctrirl.exact_solver(env.mdp, expert, mu="point-mass", mu_action=2)
    assert np.all(sol.r[:, 2] == 0.0)


def test_shaping_keeps_the_residual(env, expert):
    sol = ctrirl.exact_solver(env.mdp, expert)
    c = np.random.default_rng(0).normal(size=16)
    r2, v2 = ctrirl.shape(env.mdp, sol.r, sol.v, c)
    assert np.abs(ctrirl.soft_bellman_residual(env.mdp, r2, v2)).max() < 1e-10


def test_sample_and_solve(env, expert):
    data = ctrirl.sample(env.mdp, expert, 4000, seed=1)
    assert len(data) == 4000
    assert data.records.shape == (4000, 3)
    again = ctrirl.sample(env.mdp, expert, 4000, seed=1)
    np.testing.assert_array_equal(data.records, again.records)

    sol = ctrirl.solve(data, env.mdp.gamma, K=30, keep_iterates=True)
    diag = sol.diagnostics
    assert diag["iterations"] == 30
    assert len(diag["eta"]) == 30
    assert len(diag["iterates"]) == 31
    m = ctrirl.evaluate(env.mdp, env.r_true, sol.q)
    assert m["corr"] > 0.8
    assert 0.0 <= m["top1"] <= 1.0


def test_dataset_round_trip(tmp_path, env, expert):
    data = ctrirl.sample(env.mdp, expert, 50, seed=2)
    path = tmp_path / "d.csv"
    data.save(str(path))
    back = ctrirl.read_dataset(str(path))
    np.testing.assert_array_equal(back.records, data.records)
    assert back.seed == 2


def test_dataset_from_numpy():
    mdp = ctrirl.TabularMdp(2, 2, np.full((4, 2), 0.5), 0.9)
    data = ctrirl.Dataset(np.array([[0, 0, 1], [0, 1, 0], [1, 0, 0]]), 2, 2)
    np.testing.assert_array_equal(data.counts(), [[1, 1], [1, 0]])
    sol = ctrirl.solve(data, mdp.gamma, K=5)
    assert sol.r.shape == (2, 2)


def test_maxent_runs(env, expert):
    data = ctrirl.sample(env.mdp, expert, 2000, seed=4)
    fit = ctrirl.maxent_fit(env.mdp, env.features, data, max_epochs=10)
    assert fit["theta"].shape == (env.features.shape[1],)
    assert 1 <= fit["best_epoch"] <= 10


def test_errors_map_to_python():
    with pytest.raises(ctrirl.InvalidArgument):
        ctrirl.build_env("medium")
    assert issubclass(ctrirl.InvalidArgument, ctrirl.Error)
    with pytest.raises(ctrirl.InvalidArgument):
        ctrirl.TabularMdp(2, 2, np.full((4, 2), 0.5), 1.0)


def test_auto_iterations():
    assert ctrirl.auto_iterations(50000, 0.97) == 356
    assert ctrirl.auto_iterations(1, 0.97) == 1


def test_cli_in_process(tmp_path):
    code, out, err = ctrirl.cli_main(["--help"])
    assert code == 0 and "Usage" in out
    code, _, err = ctrirl.cli_main(["solve", str(tmp_path / "missing.csv")])
    assert code == 2 and "missing.csv" in err


def test_reproduce_is_deterministic():
    text = "preset = easy\n[env]\nn = 1000\n[baseline]\nenabled = false\n[eval]\nthreads = 1\n"
    a = ctrirl.reproduce(text, reruns=2, seed=9)
    b = ctrirl.reproduce(text, reruns=2, seed=9)
    assert a["raw_csv"] == b["raw_csv"]
    assert "| Ours |" in a["table"]
