import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from qrm_metrology.errors import DegenerateAbscissa, NonpositiveData
from qrm_metrology.fitting import fit_power_law

positive = st.floats(1e-3, 1e3, allow_nan=False, allow_infinity=False)
xs_strategy = st.lists(positive, min_size=3, max_size=8, unique=True)


def test_exact_quadratic():
    fit = fit_power_law([1, 2, 4, 8], [3, 12, 48, 192])
    assert fit.a == pytest.approx(3.0, rel=1e-12)
    assert fit.b == pytest.approx(2.0, rel=1e-12)
    assert fit.rms_log_residual < 1e-12
    assert fit.n_points == 4


@pytest.mark.parametrize("a,b", [(2648.0, -0.953), (9.03e3, 0.661)])
def test_recovers_reference_laws(a, b):
    x = np.array([0.2, 0.3, 0.5, 0.8, 1.3])
    fit = fit_power_law(x, a * x**b)
    assert fit.a == pytest.approx(a, rel=1e-10)
    assert fit.b == pytest.approx(b, abs=1e-12)
    np.testing.assert_allclose(fit(x), a * x**b, rtol=1e-10)


def test_residual_is_log_rms():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    y = 2 * x * np.exp([0.1, -0.1, 0.1, -0.1])
    fit = fit_power_law(x, y)
    resid = np.log(y) - np.log(fit(x))
    assert fit.rms_log_residual == pytest.approx(np.sqrt(np.mean(resid**2)))


def test_errors():
    with pytest.raises(NonpositiveData):
        fit_power_law([1, 2, 3], [1, -2, 3])
    with pytest.raises(NonpositiveData):
        fit_power_law([0, 2, 3], [1, 2, 3])
    with pytest.raises(DegenerateAbscissa):
        fit_power_law([2, 2, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        fit_power_law([1, 2], [1, 2])


@settings(max_examples=60)
@given(xs_strategy, st.floats(0.01, 100.0), st.floats(-3.0, 3.0), st.floats(0.01, 100.0))
def test_y_scale_equivariance(xs, a, b, c):
    x = np.array(xs)
    assume(np.ptp(np.log(x)) > 1e-3)
    y = a * x**b * np.exp(np.sin(7 * x))
    f1 = fit_power_law(x, y)
    f2 = fit_power_law(x, c * y)
    assert f2.a == pytest.approx(c * f1.a, rel=1e-9)
    assert f2.b == pytest.approx(f1.b, rel=1e-9, abs=1e-9)


@settings(max_examples=60)
@given(xs_strategy, st.floats(0.01, 100.0), st.floats(-3.0, 3.0), st.floats(0.1, 10.0))
def test_x_scale_equivariance(xs, a, b, c):
    x = np.array(xs)
    assume(np.ptp(np.log(x)) > 1e-3)
    y = a * x**b * np.exp(np.cos(3 * x))
    f1 = fit_power_law(x, y)
    f2 = fit_power_law(c * x, y)
    assert f2.b == pytest.approx(f1.b, rel=1e-8, abs=1e-8)
    assert f2.a == pytest.approx(f1.a * c ** (-f1.b), rel=1e-8)


@settings(max_examples=60)
@given(xs_strategy, st.floats(0.01, 100.0), st.floats(-3.0, 3.0))
def test_refit_reproduces_parameters(xs, a, b):
    x = np.array(xs)
    assume(np.ptp(np.log(x)) > 1e-3)
    fit = fit_power_law(x, a * x**b * np.exp(np.sin(5 * x)))
    again = fit_power_law(x, fit(x))
    assert again.a == pytest.approx(fit.a, rel=1e-9)
    assert again.b == pytest.approx(fit.b, rel=1e-9, abs=1e-9)
    assert again.rms_log_residual < 1e-9
