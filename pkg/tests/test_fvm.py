import numpy as np
import pytest

from thermowalk import ConfigError, DomainSpec, FieldGrid, NumericalError, UnsupportedCaseError
from thermowalk import fvm
from thermowalk.analysis import convergence_rate

TWO_PI = 2 * np.pi


def fig2_law(cells):
    d = DomainSpec.square(cells)
    a = 0.2 + np.sum((d.centers() - 0.5) ** 2, axis=-1)
    return fvm.FluxLaw.random_walk(d, np.full(d.shape, 0.005), 1.0 / a), a


def test_law_invariants():
    d = DomainSpec.line(10)
    with pytest.raises(ConfigError):
        fvm.FluxLaw.fick(d, np.zeros(10))
    with pytest.raises(ConfigError):
        fvm.FluxLaw("darcy", d, {})
    with pytest.raises(ConfigError):
        fvm.FluxLaw("randomwalk", d, {"D": 1.0})
    law = fvm.FluxLaw.thermophoretic(d, 1.0, -0.3, 2.0)
    assert law["D_T"].min() == -0.3


def test_face_flux_examples():
    d = DomainSpec.line(10)
    u = 1 + np.arange(10.0) ** 2 / 50
    rw = fvm.FluxLaw.random_walk(d, 0.005, 3.0)
    fk = fvm.FluxLaw.fick(d, 0.005)
    assert np.allclose(fvm.face_fluxes(rw, u), fvm.face_fluxes(fk, u), rtol=1e-14, atol=0)
    S = np.ones(10)
    S[4], S[5] = 1.0, 2.0
    law = fvm.FluxLaw.random_walk(d, 0.005, S)
    # S u constant across face 4|5
    uc = np.ones(10)
    uc[5] = 0.5
    assert fvm.face_flux(law, uc, 4) == 0.0
    assert fvm.face_flux(law, np.ones(10), 4) == pytest.approx(-0.005 / 1.5 * 1 / 0.1, rel=1e-14)
    assert fvm.face_flux(law, np.ones(10), 4) == pytest.approx(-0.033333, abs=1e-6)


def test_face_flux_2d_index_and_periodic_seam():
    d = DomainSpec.square(4)
    u = np.arange(16.0).reshape(4, 4) + 1
    law = fvm.FluxLaw.fick(d, 2.0)
    assert fvm.face_flux(law, u, (0, (1, 2))) == pytest.approx(-2.0 * (u[2, 2] - u[1, 2]) / 0.25)
    assert fvm.face_flux(law, u, (1, (0, 3))) == pytest.approx(-2.0 * (u[0, 0] - u[0, 3]) / 0.25)


def test_rival_flux_formulas():
    d = DomainSpec.line(8)
    x = d.axis_centers(0)
    u = 1 + 0.2 * np.cos(TWO_PI * x)
    k = 1 + 0.5 * x
    T = 2 + np.sin(TWO_PI * x)
    D = 0.3 + 0.1 * x
    DT = 0.05 * np.cos(TWO_PI * x)
    h = 1 / 8
    i, j = 3, 4
    assert fvm.face_flux(fvm.FluxLaw.chapman(d, k), u, i) == pytest.approx(
        -(k[j] * u[j] - k[i] * u[i]) / h)
    assert fvm.face_flux(fvm.FluxLaw.van_kampen(d, D, T), u, i) == pytest.approx(
        -((D[i] + D[j]) / (T[i] + T[j])) * (T[j] * u[j] - T[i] * u[i]) / h)
    assert fvm.face_flux(fvm.FluxLaw.thermophoretic(d, D, DT, T), u, i) == pytest.approx(
        -(D[i] + D[j]) / 2 * (u[j] - u[i]) / h - (u[i] + u[j]) / 2 * (DT[i] + DT[j]) / 2 * (T[j] - T[i]) / h)


def test_step_zero_gradient_unchanged():
    law, _ = fig2_law(20)
    S = law["S"]
    st = fvm.SolverState.start(law, 1.0 / S)
    nxt = fvm.step_explicit(st)
    assert np.allclose(nxt.u.values, st.u.values, rtol=1e-15, atol=0)
    assert nxt.time == st.dt and nxt.steps == 1


def test_spike_spreads_symmetrically():
    d = DomainSpec.line(11)
    u = np.zeros(11)
    u[5] = 1.0
    st = fvm.SolverState.start(fvm.FluxLaw.fick(d, 0.01), u)
    nxt = fvm.step_explicit(st).u.values
    assert nxt[4] == nxt[6] > 0
    assert np.all(nxt[:4] == 0) and np.all(nxt[7:] == 0)
    assert nxt.sum() == pytest.approx(1.0, rel=1e-15)


def test_cfl_bound_is_enforced():
    law, _ = fig2_law(10)
    with pytest.raises(ConfigError):
        fvm.SolverState.start(law, dt=law.stable_dt() * 1.01)
    assert law.stable_dt() == pytest.approx(0.5 * 0.1**2 / (4 * 0.005))


def manufactured_error(tag, n):
    d = DomainSpec.square(n)
    c = d.centers()
    x, y = c[..., 0], c[..., 1]
    u = 1 + 0.1 * np.sin(TWO_PI * x) * np.cos(TWO_PI * y)
    ux = 0.1 * TWO_PI * np.cos(TWO_PI * x) * np.cos(TWO_PI * y)
    uy = -0.1 * TWO_PI * np.sin(TWO_PI * x) * np.sin(TWO_PI * y)
    uxx = -(TWO_PI**2) * (u - 1)
    D = 0.005
    if tag == "fick":
        law = fvm.FluxLaw.fick(d, D)
        exact = D * (uxx + uxx)
    else:
        S = 1.3 + 0.4 * np.sin(TWO_PI * x + 0.3) + 0.2 * np.cos(TWO_PI * y)
        Sx = 0.4 * TWO_PI * np.cos(TWO_PI * x + 0.3)
        Sy = -0.2 * TWO_PI * np.sin(TWO_PI * y)
        Sxx = -(TWO_PI**2) * 0.4 * np.sin(TWO_PI * x + 0.3)
        Syy = -(TWO_PI**2) * 0.2 * np.cos(TWO_PI * y)
        law = fvm.FluxLaw.random_walk(d, D, S)
        # d/dx[(D/S) d/dx(S u)] = D (w''/S - S' w'/S^2), w = S u
        exact = 0.0
        for Sa, Saa, ua, uaa in ((Sx, Sxx, ux, uxx), (Sy, Syy, uy, uxx)):
            w1 = Sa * u + S * ua
            w2 = Saa * u + 2 * Sa * ua + S * uaa
            exact = exact + D * (w2 / S - Sa * w1 / S**2)
    err = fvm.rhs(law, u) - exact
    return 1.0 / n, float(np.sqrt(np.mean(err**2)))


@pytest.mark.parametrize("tag", ["fick", "randomwalk"])
def test_manufactured_solution_second_order(tag):
    rate = convergence_rate([manufactured_error(tag, n) for n in (16, 32, 64, 128)])
    assert 1.8 <= rate <= 2.2


@pytest.mark.parametrize("law_name", ["fick", "chapman", "vankampen", "randomwalk"])
def test_steady_state_oracle_1d(law_name):
    d = DomainSpec.line(64)
    x = d.axis_centers(0)
    T = 1.5 + 0.4 * np.sin(TWO_PI * x)
    D = 0.01 * (1 + 0.3 * np.cos(TWO_PI * x))
    law = {"fick": lambda: fvm.FluxLaw.fick(d, D), "chapman": lambda: fvm.FluxLaw.chapman(d, D),
           "vankampen": lambda: fvm.FluxLaw.van_kampen(d, D, T),
           "randomwalk": lambda: fvm.FluxLaw.random_walk(d, D, np.sqrt(T))}[law_name]()
    st = fvm.run_to_steady(fvm.SolverState.start(law), check_mass=True)
    ref = fvm.analytic_steady(law).values
    assert np.max(np.abs(st.normalized().values - ref)) < 1e-6
    assert st.mass_drift < 1e-12


def test_start_at_steady_converges_immediately():
    law, a = fig2_law(30)
    st = fvm.run_to_steady(fvm.SolverState.start(law, a))
    assert st.steps <= 2


def test_chapman_constant_kappa_stays_uniform():
    d = DomainSpec.square(20)
    st = fvm.run_to_steady(fvm.SolverState.start(fvm.FluxLaw.chapman(d, 0.01)))
    assert np.array_equal(st.u.values, np.ones(d.shape))


def test_chapman_perturbed_relaxes_to_uniform():
    d = DomainSpec.line(32)
    u0 = 1 + 0.3 * np.sin(TWO_PI * d.axis_centers(0))
    st = fvm.run_to_steady(fvm.SolverState.start(fvm.FluxLaw.chapman(d, 0.02), u0))
    assert np.max(np.abs(st.u.values - 1)) < 1e-6


def test_mass_and_positivity_over_many_steps():
    law, _ = fig2_law(24)
    rng = np.random.default_rng(1)
    u0 = rng.random(law.domain.shape) ** 4
    st = fvm.run_for(fvm.SolverState.start(law, u0), 5.0)
    assert st.mass_drift < 1e-12
    assert st.u.values.min() >= 0


def test_non_convergence_and_blowup_are_reported():
    law, _ = fig2_law(10)
    with pytest.raises(NumericalError):
        fvm.run_to_steady(fvm.SolverState.start(law, np.linspace(1, 2, 100)), max_steps=5)
    st = fvm.SolverState(FieldGrid(law.domain, np.linspace(0, 1, 100)), law, law.stable_dt() * 20)
    with pytest.raises(NumericalError):
        fvm.run_for(st, 200 * st.dt)


def test_analytic_steady_examples():
    d = DomainSpec.line(50)
    x = d.axis_centers(0)
    assert np.allclose(fvm.analytic_steady(fvm.FluxLaw.fick(d, x + 1)).values, 1.0)
    law, a = fig2_law(50)
    assert np.allclose(fvm.analytic_steady(law).values, a / a.mean(), rtol=1e-13)
    T = 1 + x
    vk = fvm.analytic_steady(fvm.FluxLaw.van_kampen(d, 0.005, T)).values
    rw = fvm.analytic_steady(fvm.FluxLaw.random_walk(d, 0.005, np.sqrt(T))).values
    assert np.allclose(vk, (1 / T) / np.mean(1 / T), rtol=1e-13)
    assert np.allclose(rw, T**-0.5 / np.mean(T**-0.5), rtol=1e-13)
    assert np.max(np.abs(vk - rw)) > 0.05


def test_thermophoretic_closed_form_and_unsupported_case():
    d = DomainSpec.line(50)
    x = d.axis_centers(0)
    T = 2 + np.sin(TWO_PI * x)
    law = fvm.FluxLaw.thermophoretic(d, 0.01, 0.01 * 0.4, T)
    ref = np.exp(-0.4 * T)
    assert np.allclose(fvm.analytic_steady(law).values, ref / ref.mean(), rtol=1e-12)
    bad = fvm.FluxLaw.thermophoretic(DomainSpec.square(10), 0.01, 0.01 / (2 * (1 + d.axis_centers(0)[:10])), 1.0 + np.arange(10.0))
    with pytest.raises(UnsupportedCaseError):
        fvm.analytic_steady(bad)


def test_thermophoretic_steady_state_second_order():
    # the discrete zero-flux state matches exp(-S_T T) only to O(h^2)
    errs = []
    for n in (32, 64, 128):
        d = DomainSpec.line(n)
        T = 2 + np.sin(TWO_PI * d.axis_centers(0))
        law = fvm.FluxLaw.thermophoretic(d, 0.01, 0.004, T)
        st = fvm.run_to_steady(fvm.SolverState.start(law), tol=1e-12)
        errs.append((1 / n, np.max(np.abs(st.normalized().values - fvm.analytic_steady(law).values))))
    assert 1.8 <= convergence_rate(errs) <= 2.2


def flux_discrepancy(n):
    d = DomainSpec.line(n)
    x = d.axis_centers(0)
    T = 1.5 + 0.5 * np.sin(TWO_PI * x)
    u = 1 + 0.3 * np.cos(TWO_PI * x + 0.7)
    D = 0.005 * (1 + 0.2 * np.sin(TWO_PI * x + 1.1))
    S = np.sqrt(T)
    DT = D / S * 0.5 / np.sqrt(T)
    rw = fvm.face_fluxes(fvm.FluxLaw.random_walk(d, D, S), u)
    th = fvm.face_fluxes(fvm.FluxLaw.thermophoretic(d, D, DT, T), u)
    return np.max(np.abs(rw - th))


def test_flux_forms_agree_to_second_order():
    e = [flux_discrepancy(n) for n in (50, 100, 200)]
    for a, b in zip(e, e[1:]):
        assert 3.2 <= a / b <= 4.8
