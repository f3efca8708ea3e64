import numpy as np
import pytest

from steerkit.states import PureState, basis_state, dicke, ghz, haar_random_state, max_entangled, thm1_hypothesis, w


def test_ghz():
    psi = ghz(3)
    assert psi.dims == (2, 2, 2)
    assert np.allclose(psi.amplitudes[[0, 7]], 1 / np.sqrt(2))
    assert np.allclose(ghz(2, 3).amplitudes[[0, 4, 8]], 1 / np.sqrt(3))
    assert np.allclose(ghz(2).amplitudes, max_entangled(2).amplitudes)
    with pytest.raises(ValueError):
        ghz(1)


def test_w_and_dicke():
    assert np.allclose(w(3).amplitudes[[1, 2, 4]], 1 / np.sqrt(3))
    d = dicke(4, 2)
    assert np.count_nonzero(np.abs(d.amplitudes) > 0) == 6
    with pytest.raises(ValueError):
        dicke(3, 0)
    with pytest.raises(ValueError):
        dicke(3, 3)


def test_max_entangled():
    phi = max_entangled(3)
    assert np.allclose(phi.amplitudes.reshape(3, 3), np.eye(3) / np.sqrt(3))
    with pytest.raises(ValueError):
        max_entangled(1)


def test_pure_state_validation():
    with pytest.raises(ValueError):
        PureState(np.array([1.0, 1.0]), (2,))
    with pytest.raises(ValueError):
        PureState(np.array([1.0, 0, 0]), (2,))


def test_thm1_hypothesis():
    assert thm1_hypothesis(ghz(3))
    assert thm1_hypothesis(w(3))
    assert thm1_hypothesis(dicke(4, 2))
    assert thm1_hypothesis(max_entangled(2))
    assert thm1_hypothesis(ghz(4))
    # product state: Schmidt rank 1 < 2
    assert not thm1_hypothesis(basis_state([0, 0, 0], [2, 2, 2]))
    # (|0>|01> + |1>|10>)/sqrt2 is not invariant under swapping parties 2,3
    amp = np.zeros(8)
    amp[0b001] = amp[0b110] = 1 / np.sqrt(2)
    assert not thm1_hypothesis(PureState(amp, (2, 2, 2)))


def test_thm1_hypothesis_global_phase():
    # Schmidt vectors antisymmetric in parties 2,3: the swap gives a common factor -1
    amp = np.zeros((2, 3, 3))
    amp[0, 0, 1], amp[0, 1, 0] = 0.5, -0.5
    amp[1, 0, 2], amp[1, 2, 0] = 0.5, -0.5
    assert thm1_hypothesis(PureState(amp, (2, 3, 3)))


def test_haar_random(rng):
    psi = haar_random_state((2, 2, 2), rng)
    assert np.linalg.norm(psi.amplitudes) == pytest.approx(1.0)
    assert not thm1_hypothesis(psi)
