import numba
import numpy as np
import pytest

from thermowalk import ConfigError, DomainSpec, NumericalError, WalkProfile, mc
from thermowalk.fields import theoretical_steady_state

FIG2 = WalkProfile.paper_fig2()
SQUARE = DomainSpec.square(50)


def test_init_ensemble_examples():
    e = mc.init_ensemble(SQUARE, 4, seed=3)
    assert e.positions.shape == (4, 2)
    assert np.all((e.positions >= 0) & (e.positions < 1))
    assert np.all(e.clocks == 0)
    again = mc.init_ensemble(SQUARE, 4, seed=3)
    assert np.array_equal(e.positions, again.positions)
    other = mc.init_ensemble(SQUARE, 4, seed=4)
    assert not np.array_equal(e.positions, other.positions)
    with pytest.raises(ConfigError):
        mc.init_ensemble(SQUARE, 0)


def test_init_is_uniform():
    e = mc.init_ensemble(SQUARE, 200000, seed=11)
    c = mc.bin_counts(e, 10)
    expect = e.count / 100
    chi2 = np.sum((c - expect) ** 2 / expect)
    assert chi2 < 99 + 5 * np.sqrt(2 * 99)


def test_step_particle_examples():
    x, tau = mc.step_particle((0.5, 0.5), FIG2, 0.0)
    assert x == pytest.approx((0.504, 0.5), abs=1e-15)
    assert tau == pytest.approx(0.0008, rel=1e-14)
    x, tau = mc.step_particle((0.999, 0.5), FIG2, 0.0)
    assert x == pytest.approx((0.00798002, 0.5), abs=1e-12)
    x, _ = mc.step_particle((0.25,), WalkProfile.constant(1e-300, 1.0), 1)
    assert x[0] == 0.25


def test_step_particle_midpoint_rule():
    x, tau = mc.step_particle((0.5, 0.5), FIG2, 0.0, rule="midpoint")
    a = 0.2 + 0.002**2
    assert x == pytest.approx((0.5 + 0.02 * a, 0.5), abs=1e-15)
    assert tau == pytest.approx(0.02 * a * a, rel=1e-14)


def test_short_horizon_takes_one_step():
    e = mc.init_ensemble(SQUARE, 1000, seed=1)
    out = mc.simulate(e, FIG2, 1e-5)
    assert np.all(out.steps == 1)
    assert np.all(out.clocks >= 1e-5)


def test_constant_profile_exact_step_count():
    e = mc.init_ensemble(SQUARE, 3000, seed=2)
    out = mc.simulate(e, WalkProfile.constant(0.01, 0.01), 1.0)
    assert np.all(out.steps == 100)
    assert np.all(out.clocks == 1.0)


@pytest.mark.parametrize("rule", ["departure", "midpoint"])
def test_simulate_invariants(rule):
    e = mc.init_ensemble(SQUARE, 5000, seed=5)
    out = mc.simulate(e, FIG2, 2.0, rule=rule)
    assert out.count == e.count
    assert np.all((out.positions >= 0) & (out.positions < 1))
    assert np.all(out.clocks >= 2.0)
    assert np.array_equal(out.positions, mc.simulate(e, FIG2, 2.0, rule=rule).positions)


def test_kernel_matches_scalar_reference():
    # replay particle 3's first steps with step_particle and the documented stream
    from thermowalk import rng
    e = mc.init_ensemble(SQUARE, 8, seed=99)
    x = e.positions[3].copy()
    t = 0.0
    words = rng.step_words(99, 3, np.arange(400))
    k = 0
    while t < 0.05:
        x, tau = mc.step_particle(x, FIG2, rng.word_angle(words[k]), rule="midpoint")
        t += tau
        k += 1
    out = mc.simulate(e, FIG2, 0.05, rule="midpoint")
    assert out.steps[3] == k
    assert out.positions[3] == pytest.approx(x, abs=1e-12)


def test_1d_walk_and_determinism_across_workers():
    line = DomainSpec.line(50)
    e = mc.init_ensemble(line, 3000, seed=8)
    a = mc.simulate(e, FIG2, 3.0, workers=1)
    b = mc.simulate(e, FIG2, 3.0, workers=numba.config.NUMBA_NUM_THREADS)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.steps, b.steps)


def test_resuming_continues_the_same_stream():
    e = mc.init_ensemble(SQUARE, 500, seed=21)
    part = mc.simulate(e, WalkProfile.constant(0.01, 0.01), 0.5)
    whole = mc.simulate(e, WalkProfile.constant(0.01, 0.01), 1.0)
    rest = mc.simulate(part, WalkProfile.constant(0.01, 0.01), 1.0)
    assert np.array_equal(rest.steps, whole.steps)
    assert np.allclose(rest.positions, whole.positions, atol=1e-12)


def test_step_cap_guards_runaway_profiles():
    e = mc.init_ensemble(SQUARE, 10, seed=1)
    with pytest.raises(NumericalError):
        mc.simulate(e, WalkProfile.constant(0.01, 1e-6), 1000.0, step_cap=10**6)
    with pytest.raises(ConfigError):
        mc.simulate(e, FIG2, 0.0)
    with pytest.raises(ConfigError):
        mc.simulate(e, FIG2, 1.0, rule="nearest")


def test_histogram_examples():
    pos = np.array([[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])
    e = mc.ParticleEnsemble(SQUARE, pos, np.zeros(4), np.zeros(4, dtype=np.int64), 0)
    assert np.array_equal(mc.histogram(e, 2).values, np.ones((2, 2)))
    line = DomainSpec.line(10)
    e1 = mc.ParticleEnsemble(line, np.full((5, 1), 0.1), np.zeros(5), np.zeros(5, dtype=np.int64), 0)
    assert np.array_equal(mc.histogram(e1, 2).values, [2.0, 0.0])


def test_histogram_of_uniform_particles_is_binomial_noise():
    e = mc.init_ensemble(SQUARE, 10**6, seed=4)
    h = mc.histogram(e, 50).values
    assert h.mean() == pytest.approx(1.0)
    rms = np.sqrt(np.mean((h - 1) ** 2))
    assert rms == pytest.approx(1 / 20, rel=0.05)
    assert np.max(np.abs(h - 1)) < 5 / 20


def test_variance_examples():
    e = mc.init_ensemble(SQUARE, 20000, seed=6, track_displacement=True)
    assert mc.variance(e, e, 1.0) == 0.0
    with pytest.raises(ConfigError):
        mc.variance(e, e, 0.0)
    with pytest.raises(ConfigError):
        mc.variance(mc.init_ensemble(SQUARE, 5), mc.init_ensemble(SQUARE, 5), 1.0)


def test_variance_homogeneous_2d_within_three_standard_errors():
    e = mc.init_ensemble(SQUARE, 10**5, seed=7, track_displacement=True)
    out = mc.simulate(e, WalkProfile.constant(0.01, 0.01), 10.0)
    D = mc.variance(e, out, 10.0)
    r2 = np.sum(out.displacement**2, axis=1) / (4 * 10.0)
    se = r2.std() / np.sqrt(r2.size)
    assert abs(D - 0.0025) < 3 * se


def test_variance_simple_1d_walk():
    line = DomainSpec.line(8, length=4.0)
    e = mc.init_ensemble(line, 10**5, seed=12, track_displacement=True)
    out = mc.simulate(e, WalkProfile.constant(1.0, 1.0), 100.0)
    assert np.all(out.steps == 100)
    D = mc.variance(e, out, 100.0)
    r2 = out.displacement[:, 0] ** 2 / 200.0
    assert abs(D - 0.5) < 3 * r2.std() / np.sqrt(r2.size)


def test_step_rule_sensitivity_1d():
    # departure evaluation relaxes to 1/D (uniform here), midpoint to 1/S
    line = DomainSpec.line(25)
    e = mc.init_ensemble(line, 40000, seed=13)
    th = theoretical_steady_state(FIG2, line).values
    err = {}
    for rule in ("departure", "midpoint"):
        h = mc.histogram(mc.simulate(e, FIG2, 60.0, rule=rule), 25).values
        err[rule] = (np.linalg.norm(h - th) / np.linalg.norm(th), np.linalg.norm(h - 1) / 5)
    assert err["midpoint"][0] < 0.05 < err["midpoint"][1]
    assert err["departure"][1] < 0.05 < err["departure"][0]


def test_lattice_step_conserves_and_splits():
    x = np.linspace(0, 1, 20, endpoint=False)
    st = mc.init_lattice(x, np.full(20, 0.1), 10000, seed=3)
    st = mc.LatticeState(x, st.site_dt, np.full(10000, 7), st.clocks, st.jumps, 3)
    nxt = mc.lattice_step(st)
    occ = nxt.occupancy
    assert occ.sum() == 10000
    assert set(np.nonzero(occ)[0]) == {6, 8}
    assert abs(occ[8] - 5000) < 4 * 50
    assert np.all(nxt.clocks == 0.1)
    forced = mc.lattice_step(st, np.ones(10000, dtype=bool))
    assert np.all(forced.sites == 8)


def test_lattice_two_sites_uniform():
    st = mc.init_lattice([0.0, 0.5], [1.0, 1.0], 20000, seed=2)
    out = mc.lattice_run(st, 101.0)
    assert abs(out.occupancy[0] - 10000) < 5 * np.sqrt(5000)
    with pytest.raises(ConfigError):
        mc.init_lattice([0.0, 0.5], [1.0, -1.0], 10)


def test_lattice_run_matches_manual_steps():
    x = np.linspace(0, 1, 10, endpoint=False)
    dts = 0.1 + x
    st = mc.init_lattice(x, dts, 200, seed=9)
    run = mc.lattice_run(st, 3.0)
    manual = st
    for _ in range(200):
        can = manual.clocks + manual.site_dt[manual.sites] <= 3.0
        if not can.any():
            break
        nxt = mc.lattice_step(manual)
        manual = mc.LatticeState(x, dts, np.where(can, nxt.sites, manual.sites),
                                 np.where(can, nxt.clocks, manual.clocks),
                                 np.where(can, nxt.jumps, manual.jumps), manual.seed)
    assert np.array_equal(run.sites, manual.sites)
    assert np.array_equal(run.jumps, manual.jumps)
