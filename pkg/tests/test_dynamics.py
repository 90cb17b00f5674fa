import numpy as np
import pytest

from flowgp.design import Box, lhs_sample
from flowgp.dynamics import (SystemSpec, flow_map_dataset, hindmarsh_rose, integrate_step, lorenz,
                             read_trajectory_csv, simulate_trajectory, van_der_pol, vector_field,
                             write_trajectory_csv)
from flowgp.errors import DivergenceError, InputError


def test_lorenz_field():
    np.testing.assert_allclose(vector_field(lorenz(), [1, 1, 1]), [-5 / 3, 0, 26], rtol=1e-15)


def test_vdp_field():
    np.testing.assert_array_equal(vector_field(van_der_pol(a=5), [1, 1]), [1, -1])


def test_hr_field():
    np.testing.assert_allclose(vector_field(hindmarsh_rose(), [1, 1, 1]), [4.1, -5, 0.094], rtol=1e-13)


def test_spec_validation():
    with pytest.raises(InputError):
        SystemSpec("duffing")
    with pytest.raises(InputError):
        van_der_pol(a=-1)
    with pytest.raises(InputError):
        lorenz(b=2)
    with pytest.raises(InputError):
        vector_field(lorenz(), [1, 2])
    assert SystemSpec("HR").kind == "hindmarshrose"
    assert lorenz().params["a1"] == -8 / 3


@pytest.mark.parametrize("sys,x", [(lorenz(), [1.0, 2.0, 3.0]), (van_der_pol(), [0.5, -1.0]),
                                   (hindmarsh_rose(), [0.2, -3.0, 1.0])])
def test_first_order_consistency(sys, x):
    x = np.array(x)
    err = [np.linalg.norm(integrate_step(sys, x, h) - x - h * vector_field(sys, x)) for h in (1e-2, 5e-3)]
    # local error of an Euler predictor is O(h^2): halving h quarters it
    assert 3.5 < err[0] / err[1] < 4.5


def _observed_order(sys, x0, T, dt):
    # sup-norm over the whole run; a single endpoint can hit an error cancellation
    runs = [simulate_trajectory(sys, x0, T, dt, substeps=s).states for s in (1, 2, 4)]
    return np.log2(np.abs(runs[0] - runs[1]).max() / np.abs(runs[1] - runs[2]).max())


def test_rk4_self_convergence_lorenz():
    assert 3.5 <= _observed_order(lorenz(), [1, 1, 1], 1.0, 0.01) <= 4.5


def test_vdp_matches_fine_reference():
    sys = van_der_pol(a=5)
    coarse = simulate_trajectory(sys, [1, 1], 1.0, 0.01)
    fine = simulate_trajectory(sys, [1, 1], 1.0, 0.01, substeps=20)
    assert np.abs(coarse.states - fine.states).max() < 1e-5


def test_single_step_trajectory():
    tr = simulate_trajectory(lorenz(), [1, 1, 1], 0.01, 0.01)
    assert tr.states.shape == (2, 3)
    assert tr.n_step == 1


def test_lorenz_stays_on_attractor():
    tr = simulate_trajectory(lorenz(), [1, 1, 1], 20, 0.01)
    assert tr.states.shape == (2001, 3)
    assert np.abs(tr.states).max() < 100


def test_simulation_deterministic_and_autonomous():
    a = simulate_trajectory(hindmarsh_rose(), [1, 1, 1], 5, 0.01)
    b = simulate_trajectory(hindmarsh_rose(), [1, 1, 1], 5, 0.01)
    c = simulate_trajectory(hindmarsh_rose(), [1, 1, 1], 5, 0.01, t0=42.0)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.states, c.states)
    assert c.times[0] == 42.0


def test_bad_time_arguments():
    with pytest.raises(InputError):
        simulate_trajectory(lorenz(), [1, 1, 1], 0.001, 0.01)
    with pytest.raises(InputError):
        integrate_step(lorenz(), [1, 1, 1], 0.0)
    with pytest.raises(InputError):
        integrate_step(lorenz(), [1, 1, 1], 0.01, substeps=0)


def test_divergence_reports_step():
    # the HR cubic makes RK4 at dt = 0.01 unstable far from the attractor
    with pytest.raises(DivergenceError) as exc:
        simulate_trajectory(hindmarsh_rose(), [30.0, 0, 0], 1.0, 0.01)
    assert exc.value.step is not None and exc.value.step >= 1


def test_flow_map_fixed_points():
    r = np.sqrt(72.0)
    fixed = np.array([[0.0, 0.0, 0.0], [27.0, r, r], [27.0, -r, -r]])
    X = np.vstack([fixed, lhs_sample(5, Box.cube(-10, 10, 3), seed=0).points])
    out = flow_map_dataset(lorenz(), X, 0.01)
    np.testing.assert_allclose(out[:3], fixed, atol=1e-12)


def test_flow_map_shape_and_agreement_with_trajectory():
    sys = lorenz()
    X = lhs_sample(45, Box.cube(-10, 10, 3), seed=1)
    out = flow_map_dataset(sys, X, 0.01)
    assert out.shape == (45, 3) and np.all(np.isfinite(out))
    for i in range(45):
        last = simulate_trajectory(sys, X.points[i], 0.01, 0.01).states[-1]
        np.testing.assert_array_equal(out[i], last)


def test_flow_map_divergence_names_row():
    X = np.array([[0.0, 0, 0], [1.0, 1, 1], [500.0, 0, 0]])
    with pytest.raises(DivergenceError) as exc:
        flow_map_dataset(hindmarsh_rose(), X, 0.01)
    assert exc.value.row == 2


def test_trajectory_csv(tmp_path):
    tr = simulate_trajectory(van_der_pol(), [1, 1], 0.05, 0.01)
    path = write_trajectory_csv(tr, tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1,x2" and len(lines) == 7
    back = read_trajectory_csv(path)
    np.testing.assert_array_equal(back.states, tr.states)
