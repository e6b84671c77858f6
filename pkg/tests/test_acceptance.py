"""End-to-end acceptance gate.

Each test is one verdict line (run with -v).  The two separation-scaling
exponent tests encode the published windows verbatim; see the project
decision log for the measured exponents of this implementation.
"""

import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from avbeam.analysis import compare_trajectories, fit_scaling
from avbeam.beamline import (averaged_offset, integrate_jacobi,
                             particular_solution, preset_system,
                             principal_solutions, HillSystem)
from avbeam.cli import main as cli_main
from avbeam.connections import (LorentzConnection, TildeConnection,
                                average_numeric, averaged_table, difference,
                                torsion)
from avbeam.distribution import MomentSet, delta_ensemble, rapidity_cap
from avbeam.dynamics import IntegratorConfig, push_lorentz
from avbeam.fields import Potential, from_potential, make_preset
from avbeam import fluid

from conftest import random_hyperboloid

DIPOLE = make_preset("normal-dipole", b0=1.0)
STEP = IntegratorConfig(step=1e-3)


def benchmark(n, energy=10.0, alpha=0.02, seed=11):
    """Transverse velocity cap riding at lab energy `energy` along axis 1."""
    return rapidity_cap(n, r0=float(np.arccosh(energy)), r_cap=alpha / 2.0,
                        seed=seed, axis=1, aspect=(0.0, 1.0, 1.0))


# -- 1: single-particle gyromotion against the closed form -------------------

def test_gyromotion_radius_and_period_to_1e6():
    gamma, b = 5.0, 1.0
    y0 = np.array([gamma, np.sqrt(gamma ** 2 - 1.0), 0.0, 0.0])
    rec = push_lorentz(make_preset("constant-B", b=b), np.zeros(4), y0,
                       (0.0, 2.0 * np.pi / b), STEP)
    r_exact = np.sqrt(gamma ** 2 - 1.0) / b
    center = rec.x[0, 1:3] + np.array([0.0, r_exact])
    radius = np.linalg.norm(rec.x[:, 1:3] - center, axis=1)
    assert np.max(np.abs(radius - r_exact)) / r_exact < 1e-6
    lab_period = rec.x[-1, 0] - rec.x[0, 0]
    assert abs(lab_period - 2.0 * np.pi * gamma / b) \
        / (2.0 * np.pi * gamma / b) < 1e-6


# -- 2: averaged flow collapses onto the Lorentz flow for a point bunch ------

def test_point_bunch_flows_coincide_to_1e9_over_t100():
    ens = delta_ensemble(v=(np.sqrt(24.0), 0.0, 0.0), n=4)
    rep = compare_trajectories(DIPOLE, ens, t_end=100.0, n_out=101,
                               cfg=IntegratorConfig(step=5e-4))
    assert float(np.max(rep.pos_sep)) < 1e-9
    assert float(np.max(rep.vel_sep)) < 1e-9


# -- 3 & 4: separation scaling exponents on the dipole benchmark -------------

def _sweep(param, response, n=20000):
    points = []
    if param == "alpha":
        for a in (0.005, 0.01, 0.02, 0.04):
            ens = benchmark(n, alpha=a)
            rep = compare_trajectories(DIPOLE, ens, t_end=10.0, n_out=11,
                                       cfg=STEP, warn=False)
            sep = rep.pos_sep[-1] if response == "position" else rep.vel_sep[-1]
            points.append((rep.alpha, float(sep)))
    elif param == "energy":
        for e in (5.0, 10.0, 20.0, 40.0):
            ens = benchmark(n, energy=e)
            rep = compare_trajectories(DIPOLE, ens, t_end=10.0, n_out=11,
                                       cfg=STEP, warn=False)
            sep = rep.pos_sep[-1] if response == "position" else rep.vel_sep[-1]
            points.append((rep.energy, float(sep)))
    else:
        ens = benchmark(n)
        rep = compare_trajectories(DIPOLE, ens, t_end=20.0, n_out=41,
                                   cfg=STEP, warn=False)
        sep = rep.pos_sep if response == "position" else rep.vel_sep
        for t in (2.5, 5.0, 10.0, 20.0):
            k = int(np.argmin(np.abs(rep.times - t)))
            points.append((t, float(sep[k])))
    return fit_scaling(points, param)


def test_position_separation_exponent_windows():
    fit_a = _sweep("alpha", "position")
    fit_e = _sweep("energy", "position")
    fit_t = _sweep("time", "position")
    report = {"alpha": (fit_a.slope, fit_a.r2), "energy": fit_e.slope,
              "time": fit_t.slope}
    assert fit_a.r2 >= 0.98 and 1.8 <= fit_a.slope <= 2.2, report
    assert -2.4 <= fit_e.slope <= -1.6, report
    assert 1.7 <= fit_t.slope <= 2.3, report


def test_velocity_separation_exponent_windows():
    fit_t = _sweep("time", "velocity")
    fit_e = _sweep("energy", "velocity")
    report = {"time": fit_t.slope, "energy": fit_e.slope}
    assert 0.8 <= fit_t.slope <= 1.2, report
    assert -1.4 <= fit_e.slope <= -0.6, report


# -- 5: averaging discriminates the Lorentz connection from its foil ---------

def _normalized_gap_slopes():
    x = np.zeros(4)
    Fm = DIPOLE.mixed(x)
    pts_lorentz, pts_tilde = [], []
    for r_cap in (0.01, 0.02, 0.04, 0.08):
        ens = rapidity_cap(2000, r0=3.0, r_cap=r_cap, seed=11)
        a = ens.alpha()
        avg_full = averaged_table(DIPOLE, x, ens.moments())
        avg_tilde = average_numeric(TildeConnection(DIPOLE), ens, x).coeffs(x)
        spray = -(ens.y @ Fm.T)     # Gamma(y,y) on the unit shell
        gap_l = spray - np.einsum("ijk,aj,ak->ai", avg_full, ens.y, ens.y)
        gap_t = spray - np.einsum("ijk,aj,ak->ai", avg_tilde, ens.y, ens.y)
        pts_lorentz.append((a, np.max(np.linalg.norm(gap_l, axis=1)) / a))
        pts_tilde.append((a, np.max(np.linalg.norm(gap_t, axis=1)) / a))
    return (fit_scaling(pts_lorentz, "alpha"), fit_scaling(pts_tilde, "alpha"))


def test_structural_stability_separates_connections():
    fit_l, fit_t = _normalized_gap_slopes()
    assert fit_l.slope >= 1.8
    assert fit_t.slope <= 1.3


# -- 6: acceleration-gap decomposition is an exact identity ------------------

def test_gap_decomposition_exact_on_1000_draws():
    worst = 0.0
    for seed in range(100):
        ens = rapidity_cap(40, r0=0.5 + 0.02 * seed, r_cap=0.15, seed=seed)
        x = np.array([0.1, -0.2, 0.05, 0.3])
        ms = ens.moments()
        for y in ens.y[:10]:
            exact, lead, o2, o3 = difference(DIPOLE, ms, x, y)
            worst = max(worst, float(np.max(np.abs(exact - (lead + o2 + o3)))))
    assert worst < 1e-10


# -- 7: closed-form averaging equals the numeric ensemble average ------------

def test_averaging_closed_form_on_100_configurations():
    rng = np.random.default_rng(42)
    worst = 0.0
    for seed in range(100):
        field = make_preset("normal-quad+dipole", b0=1.0,
                            b1=float(rng.uniform(-1.0, 1.0)))
        ens = rapidity_cap(30, r0=float(rng.uniform(0.0, 1.5)),
                           r_cap=float(rng.uniform(0.02, 0.3)), seed=seed)
        x = rng.normal(size=4)
        closed = averaged_table(field, x, ens.moments())
        numeric = average_numeric(LorentzConnection(field), ens, x).coeffs(x)
        worst = max(worst, float(np.max(np.abs(closed - numeric))))
        assert np.max(np.abs(closed - np.transpose(closed, (0, 2, 1)))) == 0.0
    assert worst < 1e-12


# -- 8: transversality and gauge invariance ----------------------------------

def test_transversality_and_gauge_invariance():
    conn = LorentzConnection(DIPOLE)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(1000):
        x = rng.normal(size=4)
        y = random_hyperboloid(rng, boost=1.0)
        Tyy = np.einsum("ijk,j,k->i", conn.T_part(x, y), y, y)
        worst = max(worst, float(np.max(np.abs(Tyy))))
    assert worst < 1e-12

    # potential for a constant magnetic field, then shift by an exact form
    A = Potential(lambda x: np.array([0.0, 0.0, x[1], 0.0]), name="A")
    lam_grad = lambda x: np.array([x[1] * x[2], x[0] * x[2],
                                   x[0] * x[1], 0.0])   # d(x0 x1 x2)
    A2 = Potential(lambda x: A(x) + lam_grad(x), name="A+dlam")
    c1 = LorentzConnection(from_potential(A))
    c2 = LorentzConnection(from_potential(A2))
    for _ in range(20):
        x = rng.normal(size=4)
        y = random_hyperboloid(rng)
        assert np.max(np.abs(c1.coeffs(x, y) - c2.coeffs(x, y))) < 1e-6


# -- 9: fluid closure residual ------------------------------------------------

def test_fluid_residual_scaling_noise_floor_and_budget():
    # closure error grows like the squared support diameter
    pts, pts_n = [], []
    for a in (0.005, 0.01, 0.02, 0.04):
        ens = benchmark(4000, alpha=a)
        rep = fluid.residual(DIPOLE, ens, tau=0.05, h_tau=5e-4)
        pts.append((ens.alpha(), rep.norm()))
        pts_n.append((ens.alpha(), rep.normalized_norm()))
    fit = fit_scaling(pts, "alpha")
    fit_n = fit_scaling(pts_n, "alpha")
    assert 1.6 <= fit.slope <= 2.4, fit
    assert 1.6 <= fit_n.slope <= 2.4, fit_n

    # a point bunch has zero true residual: measurement sits at the floor
    delta = delta_ensemble(v=(2.0, 0.5, 0.0), n=4)
    rep = fluid.residual(DIPOLE, delta, tau=0.05, h_tau=5e-4)
    floor = fluid.noise_floor(DIPOLE, delta, tau=0.05, h_tau=5e-4)
    assert rep.norm() < 10.0 * max(floor, 1e-16)

    # the theoretical budget dominates the measured residual at every slice
    ens = benchmark(4000, alpha=0.01)
    for tau in (0.02, 0.05, 0.1):
        res = fluid.residual(DIPOLE, ens, tau=tau, h_tau=5e-4,
                             transport="averaged").norm()
        rep = fluid.bound_rhs(DIPOLE, ens, tau=tau, transport="averaged")
        assert res <= rep.total, (tau, res, rep)


# -- 10: beam-optics closed forms and deviation-equation fidelity -------------

def test_beam_optics_closed_forms_and_orbit_variation():
    cfg = IntegratorConfig(step=1e-3)
    span = (0.0, 2.0)
    checks = [
        (preset_system("dipole", rho=2.0)["xi1"],
         lambda s: np.cosh(0.5 * s), lambda s: 2.0 * np.sinh(0.5 * s)),
        (preset_system("quadrupole", b1=2.0)["xi3"],
         lambda s: np.cos(np.sqrt(2.0) * s),
         lambda s: np.sin(np.sqrt(2.0) * s) / np.sqrt(2.0)),
        (preset_system("constant-e", e2=0.8)["xi2"],
         lambda s: np.ones_like(s),
         lambda s: (1.0 - np.exp(-0.8 * s)) / 0.8),
    ]
    for system, exact_C, exact_S in checks:
        pp = principal_solutions(system, span, cfg)
        assert np.max(np.abs(pp.C - exact_C(pp.s))) < 1e-6
        assert np.max(np.abs(pp.S - exact_S(pp.s))) < 1e-6
    undamped = principal_solutions(HillSystem(K=1.0), span, cfg)
    assert np.max(np.abs(undamped.wronskian() - 1.0)) < 1e-9
    resonant = HillSystem(K=1.0, p=np.cos)
    P = particular_solution(resonant, undamped)
    taus = np.linspace(0.0, 2.0, 41)
    assert np.max(np.abs(P(taus) - 0.5 * taus * np.sin(taus))) < 1e-6

    # deviation equation vs central-difference variation of true orbits
    field = make_preset("normal-quad+dipole", b0=1.0, b1=0.4)
    gamma = 3.0
    y0 = np.array([gamma, np.sqrt(gamma ** 2 - 1.0), 0.0, 0.0])
    cfg = IntegratorConfig(step=1e-3, renormalize=False)
    ref = push_lorentz(field, np.zeros(4), y0, (0.0, 1.0), cfg)
    xi0 = np.array([0.0, 0.3, 0.1, 0.2])
    dxi0 = np.array([0.0, 0.0, 0.1, -0.2])
    rec = integrate_jacobi(LorentzConnection(field), ref, xi0, dxi0,
                           (0.0, 1.0), STEP)
    eps = 1e-5
    rp = push_lorentz(field, eps * xi0, y0 + eps * dxi0, (0.0, 1.0), cfg)
    rm = push_lorentz(field, -eps * xi0, y0 - eps * dxi0, (0.0, 1.0), cfg)
    fd = (rp.x[-1] - rm.x[-1]) / (2.0 * eps)
    assert np.max(np.abs(rec.xi[-1] - fd)) / np.max(np.abs(fd)) < 1e-3


# -- 11: collective offset is a genuine distribution observable ---------------

def test_collective_offset_zero_for_point_and_alpha_increasing():
    gamma = np.cosh(1.0)
    y0 = np.array([gamma, np.sinh(1.0), 0.0, 0.0])
    ref = push_lorentz(DIPOLE, np.zeros(4), y0, (0.0, 1.0),
                       IntegratorConfig(step=1e-3, renormalize=False))

    def on_orbit_delta(s):
        y = ref.state(s)[1]
        return MomentSet.delta(y / np.sqrt(y[0] ** 2 - y[1] ** 2
                                           - y[2] ** 2 - y[3] ** 2))

    rep0 = averaged_offset(DIPOLE, ref, on_orbit_delta, (0.0, 1.0))
    assert float(np.max(np.abs(rep0.off1))) < 1e-12
    assert float(np.max(np.abs(rep0.off3))) < 1e-12

    ends = []
    for r_cap in (0.05, 0.1, 0.2):
        ms = rapidity_cap(4000, r0=1.0, r_cap=r_cap, seed=7, axis=1).moments()
        rep = averaged_offset(DIPOLE, ref, ms, (0.0, 1.0))
        ends.append(abs(rep.off1[-1]) + abs(rep.off3[-1]))
    assert ends[0] > 0.0
    assert ends[0] < ends[1] < ends[2]


# -- 12: bit-for-bit reproducibility of the experiment runner -----------------

def test_identical_config_and_seed_give_byte_identical_outputs(tmp_path):
    runner = CliRunner()
    sim = {"field": {"preset": "constant-B", "params": {"b": 1.0}},
           "y0": [5.0, float(np.sqrt(24.0)), 0.0, 0.0],
           "tau_end": 1.0, "n_out": 21, "integrator": {"step": 1e-3}}
    ens = {"ensemble": {"generator": "rapidity-cap", "n": 500, "seed": 11,
                        "params": {"r0": 1.0, "r_cap": 0.05}}}
    for name, command, doc, files in [
            ("sim", "simulate", sim, ["trajectory.csv", "summary.json"]),
            ("ens", "ensemble", ens, ["ensemble.csv", "summary.json"])]:
        cfg = tmp_path / f"{name}.yaml"
        cfg.write_text(yaml.safe_dump(doc))
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{name}_{run}"
            res = runner.invoke(cli_main, [command, "--config", str(cfg),
                                           "--out", str(out)])
            assert res.exit_code == 0, res.output
            outs.append(out)
        for f in files:
            assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
        assert json.load(open(outs[0] / "summary.json"))["ok"] is True
