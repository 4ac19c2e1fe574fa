import math
import pathlib

import numpy as np
import pytest

import incstab

ROOT = pathlib.Path(__file__).resolve().parents[2]
COARSE = ROOT / "configs" / "coarse_desk.json"


def test_gain_thresholds():
    assert incstab.required_gain(5.0, 25.0) == 15.5
    assert math.isclose(incstab.required_gain_contraction(6.0, 10.0), 100.0 / 48.0, rel_tol=1e-15)


def test_composed_matrix_and_block_metric_agree():
    p = incstab.compose_lyapunov_matrix([[1.0]], [[-1.0]])
    g = incstab.block_metric_matrix([[1.0]], [[-1.0]])
    np.testing.assert_array_equal(p, [[2.0, 1.0], [1.0, 1.0]])
    np.testing.assert_array_equal(g, p)


def test_grid_counts():
    assert incstab.grid_counts([-1, -1], [1, 1], 0.009, [-10], [10], 0.5) == (49729, 41)


def test_simulation_converges_to_origin():
    t, x = incstab.simulate_builtin([0.8, 0.9], 3.0)
    assert len(t) == x.shape[0] == 3001
    assert np.abs(x[-1]).max() < 1e-3
    assert np.abs(x).max() < 1.0


def test_incremental_decay():
    _, a = incstab.simulate_builtin([0.8, 0.9], 2.0)
    _, b = incstab.simulate_builtin([-0.8, -0.9], 2.0)
    P = np.array([[2.0, 1.0], [1.0, 1.0]])
    d = a - b
    V = np.einsum("ij,jk,ik->i", d, P, d)
    t = np.arange(len(V)) * 1e-3
    assert np.all(V <= 1.05 * np.exp(-5 * t) * V[0])


def test_unknown_config_key_is_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(COARSE.read_text().replace('"lambda"', '"lamda"'))
    with pytest.raises(incstab._incstab.ConfigError):
        incstab.Project(str(bad))


def test_coarse_pipeline():
    proj = incstab.Project(str(COARSE))
    reports = incstab.verify(proj, "lyapunov")
    assert all(r["pass"] for r in reports)
    abs_ = proj.abstract(threads=1)
    assert abs_.n_states == 41 * 41 and abs_.n_inputs == 41
    ok, dev = proj.check_epsilon(abs_, runs=50, length=20)
    assert dev >= 0.0
    ctrl = proj.synthesize(abs_)
    assert ctrl.sound() and ctrl.winning_count > 0
    assert ctrl.core_size > 0
    # a replay from inside the core never uses a nonzero input in an unavailable slot
    run = proj.replay(ctrl, [0.0, 0.0], slots=30)
    assert run["success"]
    for u, av in zip(run["inputs"], run["available"]):
        assert av or u == 0.0


def test_abstraction_round_trip(tmp_path):
    proj = incstab.Project(str(COARSE))
    proj.eta = 0.1
    a = proj.abstract(threads=1)
    path = tmp_path / "a.bin"
    a.save(str(path))
    b = incstab.Abstraction.load(str(path))
    assert b.n_states == a.n_states
    assert all(a.successor(s, u) == b.successor(s, u) for s in range(0, a.n_states, 7) for u in range(a.n_inputs))
