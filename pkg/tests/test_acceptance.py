"""The ten acceptance criteria at their stated tolerances.

Each test records one pass/fail line that is printed in the terminal
summary.  Criteria 7 and 10 are checked over the designs produced by the
other suites, which are computed once per module.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from nfisac.channel import build_channel_set
from nfisac.designs import DESIGNS, build_subspace, extract_rank_one, feasibility_probe, subspace_residual
from nfisac.fisher import assemble_fim, closed_form_collocated_crb, sum_crb
from nfisac.metrics import echo_power, illumination_power
from nfisac.scenario import (
    ArraySpec,
    ScenarioConfig,
    TargetSpec,
    aperture_diagonal,
    db_to_linear,
    fresnel_distance,
    load_scenario,
    symmetric_bistatic,
    symmetric_monostatic,
)
from nfisac.tradeoff import endpoint_pc, endpoint_ps, move_collocated, sweep
from nfisac.validation import fim_derivative_oracle, fim_elementwise_error, random_psd

from .conftest import ACCEPTANCE, small_layout

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def record(n, problems, detail):
    ACCEPTANCE[n] = (not problems, "; ".join(problems) if problems else detail)
    print(f"criterion {n}: {'PASS' if not problems else 'FAIL'}  {ACCEPTANCE[n][1]}")
    assert not problems, problems


def metric(ch, cfg, R_X, name):
    if name == "crb":
        return sum_crb(ch, R_X, cfg.noise_covariance(), cfg.snapshots)
    if name == "illum":
        return min(illumination_power(ch, R_X, k) for k in range(ch.K))
    return min(echo_power(ch, R_X, k, cfg.echo_power_exponent) for k in range(ch.K))


class Run:
    """One design solve: the relaxed optimum and its rank-one version."""

    def __init__(self, label, name, ch, cfg, reduced=True):
        t0 = time.perf_counter()
        self.raw = DESIGNS[name](ch, cfg, reduced=reduced, extract=False)
        self.sol = extract_rank_one(self.raw, ch, cfg.comm_noise_power, [u.sinr_threshold for u in cfg.users])
        self.seconds = time.perf_counter() - t0
        self.label, self.name, self.ch, self.cfg = label, name, ch, cfg
        self.value = metric(ch, cfg, self.sol.R_X, name)


# --- suites ------------------------------------------------------------------


@pytest.fixture(scope="module")
def suite2():
    runs = []
    for n in (3, 4):
        for g_db in (0.0, 25.0):
            cfg = small_layout(n, n, sinr_db=g_db)
            ch = build_channel_set(cfg)
            for name in DESIGNS:
                red = Run(f"{n}x{n} {g_db:g} dB {name} reduced", name, ch, cfg, True)
                direct = Run(f"{n}x{n} {g_db:g} dB {name} direct", name, ch, cfg, False)
                runs.append((n, g_db, name, red, direct))
    return runs


@pytest.fixture(scope="module")
def suite3():
    runs = []
    for n in (6, 8):
        for make in (symmetric_bistatic, symmetric_monostatic):
            cfg = make(n)
            runs.append(Run(f"{make.__name__} {n}x{n}", "crb", build_channel_set(cfg), cfg))
    return runs


@pytest.fixture(scope="module")
def suite4():
    cfg = load_scenario(SCENARIOS / "offaxis_bistatic_8x8.json")
    ch = build_channel_set(cfg)
    return cfg, ch, endpoint_pc(ch, cfg), endpoint_ps(ch, cfg), feasibility_probe(ch, cfg)


@pytest.fixture(scope="module")
def suite6():
    template = symmetric_bistatic(8)
    D_z = template.rx.center[2]
    rows = []
    for d in np.linspace(-D_z, D_z, 11):
        cfg = move_collocated(template, d)
        _, _, R_s, _, crb_s, _, _ = endpoint_ps(build_channel_set(cfg), cfg)
        rows.append((float(d), crb_s, R_s, cfg))
    return D_z, rows


@pytest.fixture(scope="module")
def suite9():
    cfg = load_scenario(SCENARIOS / "two_target_two_user_8x8.json")
    ch = build_channel_set(cfg)
    grid = np.geomspace(1.0, 10**3.8, 10)
    curves = {name: sweep(ch, cfg, name, grid) for name in DESIGNS}
    # the max-min optima again, to read off the epigraph variable
    epi = {name: [DESIGNS[name](ch, cfg.with_sinr(g)) for g in grid] for name in ("illum", "echo")}
    return cfg, ch, grid, curves, epi


# --- criteria ------------------------------------------------------------------


def _random_config(rng):
    n_tx, n_rx = rng.choice([2, 3, 4], size=2)
    K = int(rng.integers(1, 3))
    lam = 3e8 / 28e9
    targets = tuple(
        TargetSpec(
            (rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), rng.uniform(0.03, 0.2)),
            complex(rng.normal(), rng.normal()),
        )
        for _ in range(K)
    )
    rx = ArraySpec(int(n_rx), int(n_rx), 0.5, (rng.uniform(-5, 5) * lam, rng.uniform(-5, 5) * lam, rng.uniform(0, 20) * lam))
    return ScenarioConfig(carrier_hz=28e9, tx=ArraySpec(int(n_tx), int(n_tx)), rx=rx, targets=targets, snapshots=int(rng.integers(1, 4)))


def test_criterion_1_fim_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    problems = []
    for i in range(20):
        cfg = _random_config(rng)
        ch = build_channel_set(cfg)
        R = random_psd(ch.N, rng, 1.0, int(rng.integers(1, ch.N + 1)))
        G = rng.normal(size=(ch.M, ch.M)) + 1j * rng.normal(size=(ch.M, ch.M))
        for Q in (1e-3 * np.eye(ch.M), G @ G.conj().T + 0.1 * np.eye(ch.M)):
            F = assemble_fim(ch, R, Q, cfg.snapshots).matrix
            err = fim_elementwise_error(F, fim_derivative_oracle(ch, R, Q, cfg.snapshots))
            worst = max(worst, err)
            if err > 1e-8:
                problems.append(f"scenario {i}: error {err:.2e}")
    dt = time.perf_counter() - t0
    if dt > 120:
        problems.append(f"runtime {dt:.0f} s")
    record(1, problems, f"20 scenarios x 2 noise models, worst elementwise error {worst:.1e}, {dt:.1f} s")


def test_criterion_2_direct_vs_reduced(suite2):
    problems = []
    worst = 0.0
    t_red = t_dir = 0.0
    for n, g_db, name, red, direct in suite2:
        rel = abs(red.value - direct.value) / abs(direct.value)
        worst = max(worst, rel)
        if rel > 1e-3:
            problems.append(f"{red.label}: relative difference {rel:.2e}")
        if n == 4 and name == "crb":
            t_red += red.seconds
            t_dir += direct.seconds
            if not red.seconds < direct.seconds:
                problems.append(f"{red.label}: reduced {red.seconds:.2f} s not faster than direct {direct.seconds:.2f} s")
    record(2, problems, f"worst relative difference {worst:.1e}; 4x4 CRB-min reduced {t_red:.2f} s vs direct {t_dir:.2f} s")


def test_criterion_3_collocated_closed_form(suite3):
    problems = []
    details = []
    for run in suite3:
        ch, cfg, R = run.ch, run.cfg, run.sol.R_X
        w, E = np.linalg.eigh(R)
        v = np.conj(ch.V[:, 0]) / np.linalg.norm(ch.V[:, 0])
        align = abs(np.vdot(E[:, -1], v))
        share = w[-1] / w.sum()
        xi = cfg.scalar_sensing_noise / (2 * abs(ch.b[0]) ** 2 * cfg.snapshots)
        cf = sum(closed_form_collocated_crb(ch, (cfg.total_power, 0, 0, 0), xi))
        rel = abs(run.value - cf) / cf
        if align < 1 - 1e-6:
            problems.append(f"{run.label}: alignment {align:.9f}")
        if share < 1 - 1e-6:
            problems.append(f"{run.label}: lambda_max/trace {share:.9f}")
        if rel > 1e-4:
            problems.append(f"{run.label}: CRB vs closed form {rel:.2e}")
        details.append(f"{run.label} 1-align {1 - align:.0e} 1-share {1 - share:.0e} crb {rel:.0e}")
    record(3, problems, ", ".join(details))


def test_criterion_4_endpoint_identities(suite4):
    cfg, ch, (w_c, g_c, _), (w_s, R_d, R_s, g_s, crb_s, a2, residual), probe = suite4
    problems = []
    h = ch.H_c[:, 0]
    closed = cfg.total_power * np.vdot(h, h).real / cfg.comm_noise_power
    rel = abs(probe.max_sinr[0] - closed) / closed
    if rel > 1e-6:
        problems.append(f"probe max SINR off by {rel:.2e}")
    if abs(g_c - closed) > 1e-12 * closed:
        problems.append("MRT SINR differs from the closed form")
    if residual > 1e-8:
        problems.append(f"beam residual {residual:.2e}")
    lam = np.linalg.eigvalsh(R_d)[0] / np.trace(R_s).real
    if not -1e-10 <= lam <= 1e-8:
        problems.append(f"lambda_min(R_d)/trace = {lam:.2e}")
    record(4, problems, f"probe vs closed form {rel:.1e}, beam residual {residual:.1e}, lambda_min(R_d)/trace {lam:.1e}")


def test_criterion_5_array_constants():
    cfg = ScenarioConfig(carrier_hz=28e9, tx=ArraySpec(48, 48), rx=ArraySpec(48, 48), targets=(TargetSpec((0, 0, 1.0)),))
    D = aperture_diagonal(cfg.tx, cfg.wavelength)
    d_nf = fresnel_distance(cfg)
    small = ScenarioConfig(carrier_hz=1.5e9, tx=ArraySpec(3, 3), rx=ArraySpec(3, 3), targets=(TargetSpec((0, 0, 1.0)),))
    D_z = fresnel_distance(small) / 20
    problems = []
    if abs(D / 0.364 - 1) > 5e-3:
        problems.append(f"D = {D:.4f} m")
    if abs(d_nf / 24.7 - 1) > 5e-3:
        problems.append(f"d_nf = {d_nf:.3f} m")
    ok_main = not problems
    if abs(D_z / 1.205 - 1) > 5e-3:
        problems.append(f"D_z = d_nf/20 = {D_z:.4f} m for the 3x3 1.5 GHz array, not 1.205 m (see ledger)")
    ACCEPTANCE[5] = (not problems, "; ".join([f"D = {D:.4f} m, d_nf = {d_nf:.3f} m"] + problems))
    print(f"criterion 5: {'PASS' if not problems else 'FAIL'}  {ACCEPTANCE[5][1]}")
    assert ok_main


@pytest.mark.xfail(strict=True, reason="the stated D_z = 1.205 m does not follow from a 3x3 array at 1.5 GHz")
def test_criterion_5_complexity_study_depth():
    small = ScenarioConfig(carrier_hz=1.5e9, tx=ArraySpec(3, 3), rx=ArraySpec(3, 3), targets=(TargetSpec((0, 0, 1.0)),))
    assert fresnel_distance(small) / 20 == pytest.approx(1.205, rel=5e-3)


def test_criterion_6_distance_symmetry(suite6):
    D_z, rows = suite6
    crb = {round(d / D_z, 6): c for d, c, _, _ in rows}
    problems = []
    worst = 0.0
    for key, c in crb.items():
        rel = abs(c - crb[-key]) / c
        worst = max(worst, rel)
        if rel > 1e-2:
            problems.append(f"CRB({key} D_z) vs CRB({-key} D_z): {rel:.2e}")
    dips = [k for k, c in crb.items() if k != 0 and c < crb[0.0]]
    if not dips:
        problems.append("no offset beats the on-axis CRB")
    best = min(crb, key=crb.get)
    record(6, problems, f"worst asymmetry {worst:.1e}; CRB_s(0) = {crb[0.0]:.3e}, min {crb[best]:.3e} at d = {best:g} D_z")


def _design_runs(suite2, suite3):
    return [r for *_, red, direct in suite2 for r in (red, direct)] + list(suite3)


def test_criterion_7_sdr_tightness(suite2, suite3):
    problems = []
    count = 0
    for run in _design_runs(suite2, suite3):
        if run.ch.U == 0:
            continue
        count += 1
        raw, sol = run.raw, run.sol
        tr = np.trace(sol.R_X).real
        for u, W in enumerate(sol.W):
            w = np.linalg.eigvalsh(W)
            if w[-1] > 0 and w[-2] > 1e-7 * w[-1]:
                problems.append(f"{run.label}: W_{u} eigenvalue ratio {w[-2] / w[-1]:.1e}")
            if raw.sinr[u] > 0 and abs(sol.sinr[u] - raw.sinr[u]) > 1e-6 * raw.sinr[u]:
                problems.append(f"{run.label}: SINR {u} moved")
        if np.linalg.eigvalsh(sol.R_d)[0] < -1e-8 * tr:
            problems.append(f"{run.label}: R_d not PSD")
        before = metric(run.ch, run.cfg, raw.R_X, run.name)
        if abs(run.value - before) > 1e-8 * abs(before):
            problems.append(f"{run.label}: objective moved by {abs(run.value - before) / abs(before):.1e}")
    record(7, problems, f"{count} designs with users, all rank one after extraction")


def test_criterion_8_subspace_residual():
    cfg = small_layout(3, 3)
    ch = build_channel_set(cfg)
    problems = []
    res = {}
    for name, kind in (("crb", "sensing_comm_crb"), ("illum", "sensing_comm_power"), ("echo", "sensing_comm_power")):
        sol = DESIGNS[name](ch, cfg, reduced=False)
        r = subspace_residual(sol.R_X, build_subspace(ch, kind))
        res[name] = r
        if r > 1e-6:
            problems.append(f"{name}: residual {r:.2e}")
    record(8, problems, ", ".join(f"{k} {v:.1e}" for k, v in res.items()))


def test_criterion_9_monotone_tradeoffs(suite9):
    cfg, ch, grid, curves, epi = suite9
    problems = []
    for name, curve in curves.items():
        if any(p.status != "optimal" for p in curve.points):
            problems.append(f"{name}: not every point solved")
            continue
        v = curve.values
        step = np.diff(v)
        if name == "crb" and np.any(step < -1e-6 * v[:-1]):
            problems.append("sum-CRB decreases")
        if name != "crb" and np.any(step > 1e-6 * v[:-1]):
            problems.append(f"{name}: mu increases")
    for name, sols in epi.items():
        for g, sol in zip(grid, sols):
            mu = sol.objective_value
            if abs(sol.metric_value - mu) > 1e-6 * abs(mu):
                problems.append(f"{name} at {10 * np.log10(g):.1f} dB: no target at mu")
    crb = curves["crb"].values
    record(9, problems, f"10 points 0..38 dB, sum-CRB {crb[0]:.3e} -> {crb[-1]:.3e}, mu_illum {curves['illum'].values[0]:.3e} -> {curves['illum'].values[-1]:.3e}")


def test_criterion_10_power_tightness(suite2, suite3, suite4, suite6, suite9):
    problems = []
    traces = []
    for run in _design_runs(suite2, suite3):
        traces.append((run.label, np.trace(run.sol.R_X).real, run.cfg.total_power))
    cfg4, _, _, ps, _ = suite4
    traces.append(("endpoint P_s", np.trace(ps[2]).real, cfg4.total_power))
    for d, _, R_s, cfg in suite6[1]:
        traces.append((f"P_s at d = {d:.4g}", np.trace(R_s).real, cfg.total_power))
    cfg9, _, _, curves, epi = suite9
    for name, curve in curves.items():
        traces += [(f"{name} at {p.gamma:.3g}", p.trace, cfg9.total_power) for p in curve.points if p.status == "optimal"]
    for name, sols in epi.items():
        traces += [(name, np.trace(s.R_X).real, cfg9.total_power) for s in sols]
    worst = 0.0
    for label, tr, P in traces:
        rel = abs(tr - P) / P
        worst = max(worst, rel)
        if rel > 1e-6:
            problems.append(f"{label}: trace/P_T - 1 = {rel:.1e}")
    record(10, problems, f"{len(traces)} designs, worst |trace/P_T - 1| = {worst:.1e}")
