import numpy as np
import pytest

from steerkit.povm import (
    THM2_VISIBILITY,
    MeasurementAssemblage,
    Povm,
    ResponseFunction,
    depolarize,
    noisy_pauli_pair,
    pauli_measurements,
    post_process,
    random_qubit_pair,
    trivial_measurement,
    validate,
)


def test_validate_examples(oracles):
    z = MeasurementAssemblage.from_povms([[np.diag([1, 0]), np.diag([0, 1])]])
    assert validate(z).valid
    x = np.array([[0, 1], [1, 0]])
    bad = MeasurementAssemblage.from_povms([[0.5 * np.eye(2) + x, 0.5 * np.eye(2) - x]])
    report = validate(bad)
    assert not report.valid
    assert report.min_eigenvalue == pytest.approx(min(oracles["half_i_pm_x_eigs"]))
    incomplete = MeasurementAssemblage.from_povms([[np.diag([1, 0]), np.diag([0, 0.5])]])
    assert validate(incomplete).completeness_residual == pytest.approx(0.5)


def test_ragged_settings_are_padded():
    m = MeasurementAssemblage.from_povms([[np.eye(2)], [np.diag([1, 0]), np.diag([0, 1])]])
    assert m.n_outcomes == 2 and m.n_settings == 2
    assert np.allclose(m.elements[1, 0], 0)
    assert validate(m).valid


def test_noisy_pauli_pair():
    m = noisy_pauli_pair()
    assert m.elements.shape == (2, 2, 2, 2)
    assert np.allclose(m.elements[0, 0], 0.5 * (np.eye(2) + THM2_VISIBILITY * np.array([[0, 1], [1, 0]])))
    assert validate(m).valid
    assert THM2_VISIBILITY == pytest.approx(0.8408964, abs=1e-7)


def test_depolarize():
    sharp = pauli_measurements("XY")
    assert np.allclose(depolarize(sharp, 1.0).elements, sharp.elements)
    assert np.allclose(depolarize(sharp, 0.0).elements, np.eye(2) / 2)
    assert np.allclose(depolarize(sharp, THM2_VISIBILITY).elements, noisy_pauli_pair().elements)
    with pytest.raises(ValueError):
        depolarize(sharp, 1.5)


def test_post_process_explicit_parent():
    # G_{a0 a1} = (1 + eta (a0 X + a1 Y))/4 is a parent of the eta-noisy pair for eta <= 1/sqrt(2)
    eta = 0.5
    x, y = np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]])
    strategies = [(0, 0), (0, 1), (1, 0), (1, 1)]
    sign = lambda k: 1 - 2 * k  # noqa: E731
    parent = Povm(np.array([(np.eye(2) + eta * (sign(a0) * x + sign(a1) * y)) / 4 for a0, a1 in strategies]))
    assert parent.is_valid()
    out = post_process(parent, ResponseFunction.deterministic(strategies, 2))
    assert np.allclose(out.elements, pauli_measurements("XY", eta).elements)


def test_post_process_identity_and_errors():
    z = Povm(np.array([np.diag([1, 0]), np.diag([0, 1])]))
    r = ResponseFunction(np.eye(2)[:, None, :])
    assert np.allclose(post_process(z, r).elements[:, 0], z.elements)
    with pytest.raises(ValueError):
        post_process(z, ResponseFunction(np.ones((1, 1, 3))))
    with pytest.raises(ValueError):
        ResponseFunction(np.full((2, 1, 1), 0.7))


def test_random_pair_and_trivial(rng):
    for eta in (0.3, 0.9):
        m = random_qubit_pair(rng, eta)
        assert validate(m).valid
        for x in range(2):
            bloch = np.real(np.trace(m.elements[0, x] - m.elements[1, x]))
            assert bloch == pytest.approx(0.0, abs=1e-12)
    t = trivial_measurement(3, 2, 2)
    assert validate(t).valid and np.allclose(t.elements, np.eye(3) / 2)
