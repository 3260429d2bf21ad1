import math

import numpy as np
import pytest
from scipy import integrate, stats

from erps import states as S
from erps.errors import InvalidStateError

from conftest import one_mode_library, within_se

LIB = one_mode_library()


def _probe(state, rng, n=200):
    lo, hi = state.probe_range() if hasattr(state, "probe_range") else (-6, 6)
    q = rng.uniform(max(lo, -6), min(hi, 6), n)
    rho = state.density(q[:, None])
    return q[rho > 1e-12]


@pytest.mark.parametrize("name", sorted(LIB))
def test_grad_log_density_matches_finite_differences(name, rng):
    state = LIB[name]
    q = _probe(state, rng)
    h = 1e-5
    fd = (state.log_density((q + h)[:, None]) - state.log_density((q - h)[:, None])) / (2 * h)
    an = state.grad_log_density(q[:, None])[:, 0]
    tol = 1e-3 if name == "grid" else 1e-6
    # relative error, with an absolute floor where the gradient passes through zero
    err = np.abs(fd - an) / np.maximum(np.abs(an), 1.0)
    assert err.max() < tol


@pytest.mark.parametrize("name", sorted(LIB))
def test_phase_gradient_matches_unwrapped_phase(name, rng):
    state = LIB[name]
    q = _probe(state, rng)
    h = 1e-5
    psi = state.wavefunction
    phase = lambda x: state.hbar * np.angle(psi(x[:, None]))
    ph_plus, ph_minus = phase(q + h), phase(q - h)
    d = np.unwrap(np.stack([ph_minus, ph_plus]), axis=0)
    fd = (d[1] - d[0]) / (2 * h)
    an = state.phase_gradient(q[:, None])[:, 0]
    rho = state.density(q[:, None])
    keep = rho > 1e-8 * rho.max()
    tol = 1e-3 if name == "grid" else 1e-6
    err = np.abs(fd - an)[keep] / np.maximum(np.abs(an[keep]), 1.0)
    assert err.max() < tol


@pytest.mark.parametrize("name", sorted(LIB))
def test_density_normalized(name):
    state = LIB[name]
    lo, hi = state.probe_range()
    val, _ = integrate.quad(lambda x: float(state.density(np.array([[x]]))[0]), lo, hi, limit=400)
    assert abs(val - 1.0) < 1e-6


@pytest.mark.parametrize("name", sorted(LIB))
def test_position_samples_follow_cdf(name, rng):
    state = LIB[name]
    x = state.sample_position(rng, 100_000)[:, 0]
    ks = stats.kstest(x, state.cdf).statistic
    assert ks < 0.01


def test_gaussian_without_phase_has_zero_phase_gradient(rng):
    st = S.GaussianPureState([0.3, -1.0], [0.0, 0.0], [[2.0, 0.4], [0.4, 1.0]])
    q = rng.normal(size=(50, 2))
    assert np.all(st.phase_gradient(q) == 0.0)


def test_multimode_gaussian_gradients(rng):
    gamma = np.array([[2.0, 0.4], [0.4, 1.0]])
    phase = np.array([[0.5, -0.2], [-0.2, 0.1]])
    st = S.GaussianPureState([0.3, -1.0], [0.7, 0.2], gamma, phase)
    q = rng.normal(size=(20, 2))
    d = q - st.mean_q
    np.testing.assert_allclose(st.grad_log_density(q), -d @ gamma, atol=1e-12)
    np.testing.assert_allclose(st.phase_gradient(q), d @ phase + st.mean_p, atol=1e-12)


def test_product_density_factorizes(rng):
    f1, f2 = S.FockState(1), S.CoherentState(0.5 - 0.2j)
    prod = S.ProductState([f1, f2])
    q = rng.normal(size=(30, 2))
    np.testing.assert_allclose(prod.density(q), f1.density(q[:, :1]) * f2.density(q[:, 1:]), rtol=1e-12)
    assert prod.modes == 2


def test_amplitude_phase_real_gaussian_has_zero_phase():
    grid = np.linspace(-8, 8, 1601)
    psi = np.pi ** -0.25 * np.exp(-grid ** 2 / 2)
    rho, phase = S.amplitude_phase_from_grid(psi, grid)
    np.testing.assert_allclose(rho, psi ** 2, atol=1e-9)
    assert np.all(phase == 0.0)


def test_amplitude_phase_plane_wave_factor():
    grid = np.linspace(-8, 8, 1601)
    psi = np.pi ** -0.25 * np.exp(-grid ** 2 / 2) * np.exp(1j * grid)
    _, phase = S.amplitude_phase_from_grid(psi, grid)
    np.testing.assert_allclose(phase - phase[800], grid - grid[800], atol=1e-9)
    st = S.GridState1D(-8, 8, psi)
    q = np.linspace(-3, 3, 41)[:, None]
    np.testing.assert_allclose(st.phase_gradient(q)[:, 0], 1.0, atol=1e-6)


def test_amplitude_phase_first_excited_jumps_by_pi_at_node():
    grid = np.linspace(-8, 8, 1600)  # even count: no sample exactly at the node
    psi = grid * np.exp(-grid ** 2 / 2)
    rho, phase = S.amplitude_phase_from_grid(psi, grid)
    left, right = phase[grid < 0], phase[grid > 0]
    assert np.ptp(left) == 0 and np.ptp(right) == 0
    assert abs(abs(right[0] - left[-1]) - math.pi) < 1e-12
    expected = grid ** 2 * np.exp(-grid ** 2)
    np.testing.assert_allclose(rho, expected / np.trapezoid(expected, grid), atol=1e-12)


def test_amplitude_phase_rejects_zero_input():
    with pytest.raises(InvalidStateError):
        S.amplitude_phase_from_grid(np.zeros(10), np.linspace(0, 1, 10))


def test_grid_cdf_table_monotone():
    st = LIB["grid"]
    assert st.cdf_table[0] == 0.0
    assert np.all(np.diff(st.cdf_table) >= 0)
    assert abs(st.cdf_table[-1] - 1.0) < 1e-6


def test_vacuum_sample_mean(rng):
    q = S.vacuum_state().sample_position(rng, 1_000_000)[:, 0]
    assert abs(q.mean()) < 5 * 0.707 / 1e3


def test_fock1_second_moment(rng):
    q = S.FockState(1).sample_position(rng, 1_000_000)[:, 0]
    ok, m, se = within_se(q ** 2, 1.5)
    assert ok, (m, se)


def test_mixture_mean(rng):
    alpha = 1.2
    mix = S.MixtureState([0.5, 0.5], [S.vacuum_state(), S.CoherentState(alpha)])
    q = mix.sample_position(rng, 1_000_000)[:, 0]
    ok, m, se = within_se(q, 0.5 * math.sqrt(2) * alpha)
    assert ok, (m, se)


def test_fock_state_wavefunction_matches_hermite():
    x = np.linspace(-4, 4, 33)
    h = S.hermite_functions(3, x)
    for n in range(4):
        np.testing.assert_allclose(S.FockState(n).wavefunction(x[:, None]), h[n], atol=1e-12)


def test_validate_vacuum():
    d = S.validate_state(S.vacuum_state())
    assert d.norm_deviation < 1e-12
    assert d.node_count == 0


@pytest.mark.parametrize("n", [0, 1, 2, 3, 5])
def test_validate_fock_node_count(n):
    assert S.validate_state(S.FockState(n)).node_count == n


def test_validate_grid_renormalizes_with_flag():
    grid = np.linspace(-8, 8, 1601)
    psi = 3.0 * np.exp(-grid ** 2 / 2)
    st = S.GridState1D(-8, 8, psi)
    d = S.validate_state(st)
    assert st.renormalized and d.renormalized
    assert d.input_norm_deviation == pytest.approx(9 * math.sqrt(math.pi) - 1, rel=1e-6)
    assert d.norm_deviation < 1e-6


def test_grid_state_from_csv(tmp_path):
    grid = np.linspace(-6, 6, 601)
    psi = np.pi ** -0.25 * np.exp(-grid ** 2 / 2)
    path = tmp_path / "psi.csv"
    np.savetxt(path, np.column_stack([grid, psi, 0 * psi]), delimiter=",")
    st = S.GridState1D.from_csv(path)
    assert st.modes == 1 and not st.renormalized


@pytest.mark.parametrize("bad", [
    lambda: S.GaussianPureState([0], [0], [[-1.0]]),
    lambda: S.MixtureState([0.7, 0.7], [S.vacuum_state(), S.vacuum_state()]),
    lambda: S.FockState(-1),
    lambda: S.ProductState([]),
])
def test_invalid_states_rejected(bad):
    with pytest.raises((InvalidStateError, ValueError)):
        bad()


def test_hbar_must_be_positive():
    with pytest.raises(ValueError):
        S.HbarConfig(0.0)
