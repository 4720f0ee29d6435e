"""Sensing/communication tradeoff for one target and one user.

Three reference designs bound the tradeoff curve:

* P_c   MRT towards the user (best SINR)
* P_s   the unconstrained CRB optimum, with the user beam carved out of it
* P_s'  all power focused on the target (best illumination)

``sweep`` fills in the curve between them by re-solving with a growing SINR
threshold; ``collocated_distance_sweep`` moves a collocated target/user
across the symmetric bistatic layout.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelSet, build_channel_set
from .conic import SolverSettings
from .designs import DESIGNS
from .errors import Infeasible, NfisacError, NumericalLimit
from .fisher import assemble_fim, crb_from_fim
from .scenario import ScenarioConfig, TargetSpec, dumps_scenario

EVD_TOL = 1e-7  # truncated EVD threshold relative to the largest eigenvalue
ALPHA_TOL = 1e-10  # bisection tolerance on lambda_min, relative to the trace


@dataclass
class TradeoffEndpoints:
    gamma_c: float
    crb_c: float
    gamma_s: float
    crb_s: float
    gamma_s_prime: float
    crb_s_prime: float
    w_c: np.ndarray
    w_s: np.ndarray
    w_s_prime: np.ndarray
    R_d_s: np.ndarray
    R_X_s: np.ndarray | None = None
    alpha_sq: float = float("nan")
    beam_residual: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "gamma_c": self.gamma_c,
            "crb_c": self.crb_c,
            "gamma_s": self.gamma_s,
            "crb_s": self.crb_s,
            "gamma_s_prime": self.gamma_s_prime,
            "crb_s_prime": self.crb_s_prime,
            "alpha_sq": self.alpha_sq,
            "beam_residual": self.beam_residual,
        }


@dataclass
class CurvePoint:
    gamma: float
    metric_value: float
    status: str
    sinr: list = field(default_factory=list)
    trace: float = float("nan")
    message: str = ""


@dataclass
class TradeoffCurve:
    points: list
    scenario_hash: str
    objective: str

    @property
    def gammas(self) -> np.ndarray:
        return np.array([p.gamma for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.metric_value for p in self.points])


def scenario_hash(config: ScenarioConfig) -> str:
    return hashlib.sha256(dumps_scenario(config).encode()).hexdigest()[:16]


def _crb(ch, config, R):
    return crb_from_fim(assemble_fim(ch, R, config.noise_covariance(), config.snapshots, check=False)).sum_crb


def _single_link(ch: ChannelSet, need_target: bool = True):
    if ch.U != 1:
        raise ValueError("tradeoff endpoints need exactly one user")
    if need_target and ch.K != 1:
        raise ValueError("tradeoff endpoints need exactly one target")


def _sinr(h, w, R_d, noise):
    return float(abs(np.vdot(h, w)) ** 2 / (np.real(np.conj(h) @ R_d @ h) + noise))


def canonical_phase(w) -> np.ndarray:
    """Rotate w so that its largest-magnitude entry is real and positive."""
    w = np.asarray(w, dtype=complex)
    i = int(np.argmax(np.abs(w)))
    if w[i] == 0:
        return w
    return w * (abs(w[i]) / w[i])


def endpoint_pc(ch: ChannelSet, config: ScenarioConfig) -> tuple[np.ndarray, float, float]:
    """MRT beam w_c = sqrt(P_T) h/||h||, its SINR and the resulting sum-CRB."""
    _single_link(ch, need_target=False)
    h = ch.H_c[:, 0]
    P = config.total_power
    w = np.sqrt(P) * h / np.linalg.norm(h)
    gamma = P * float(np.vdot(h, h).real) / config.comm_noise_power
    crb = _crb(ch, config, np.outer(w, w.conj()))
    return w, gamma, crb


def endpoint_ps_prime(ch: ChannelSet, config: ScenarioConfig) -> tuple[np.ndarray, float, float]:
    """Beam focused on the target: R_X = P_T v* v^T / ||v||^2."""
    _single_link(ch)
    h = ch.H_c[:, 0]
    P = config.total_power
    vc = np.conj(ch.V[:, 0])
    nv2 = float(np.vdot(vc, vc).real)
    w = np.sqrt(P / nv2) * vc
    gamma = P * abs(np.vdot(h, vc)) ** 2 / (nv2 * config.comm_noise_power)
    crb = _crb(ch, config, np.outer(w, w.conj()))
    return w, float(gamma), crb


def split_user_beam(R_X, h, total_power: float):
    """Carve the largest user beam out of a sensing covariance.

    Keeps the eigenpairs of R_X above EVD_TOL * lambda_max, then finds by
    bisection the largest |alpha|^2 in [0, P_T] for which
    Sigma - |alpha|^2 g g^H stays PSD, g = U^H h / ||U^H h||.
    Returns (w, R_d, R_trunc, alpha_sq, U).
    """
    R_X = (np.asarray(R_X) + np.asarray(R_X).conj().T) / 2
    lam, E = np.linalg.eigh(R_X)
    keep = lam > EVD_TOL * lam[-1]
    U, sig = E[:, keep], lam[keep]
    R_trunc = (U * sig) @ U.conj().T
    g = U.conj().T @ h
    gn = np.linalg.norm(g)
    if gn == 0:
        return np.zeros_like(h), R_trunc, R_trunc, 0.0, U
    g = g / gn
    tr = float(sig.sum())
    G = np.outer(g, g.conj())

    def lam_min(c):
        return float(np.linalg.eigvalsh(np.diag(sig) - c * G)[0])

    lo, hi = 0.0, float(total_power)
    if lam_min(hi) >= -ALPHA_TOL * tr:
        lo = hi
    else:
        # lambda_min is non-increasing in c, so bisection brackets its root
        while hi - lo > 1e-15 * total_power:
            mid = 0.5 * (lo + hi)
            if lam_min(mid) >= 0:
                lo = mid
            else:
                hi = mid
    w = canonical_phase(np.sqrt(lo) * (U @ g))
    R_d = R_trunc - np.outer(w, w.conj())
    return w, (R_d + R_d.conj().T) / 2, R_trunc, lo, U


def endpoint_ps(ch: ChannelSet, config: ScenarioConfig, settings: SolverSettings | None = None):
    """Unconstrained CRB optimum and the SINR it can deliver without loss.

    Returns (w_s, R_d_s, R_X_s, gamma_s, crb_s, alpha_sq, beam_residual).
    """
    _single_link(ch)
    free = config.without_users()
    sol = DESIGNS["crb"](build_channel_set(free), free, settings=settings)
    h = ch.H_c[:, 0]
    w, R_d, R_s, alpha_sq, U = split_user_beam(sol.R_X, h, config.total_power)
    nw = np.linalg.norm(w)
    residual = float(np.linalg.norm(w - U @ (U.conj().T @ w)) / nw) if nw > 0 else 0.0
    gamma = _sinr(h, w, R_d, config.comm_noise_power)
    return w, R_d, R_s, gamma, _crb(ch, config, R_s), alpha_sq, residual


def endpoints(ch: ChannelSet, config: ScenarioConfig, settings: SolverSettings | None = None) -> TradeoffEndpoints:
    w_c, g_c, crb_c = endpoint_pc(ch, config)
    w_s, R_d, R_s, g_s, crb_s, a2, res = endpoint_ps(ch, config, settings)
    w_p, g_p, crb_p = endpoint_ps_prime(ch, config)
    return TradeoffEndpoints(g_c, crb_c, g_s, crb_s, g_p, crb_p, w_c, w_s, w_p, R_d, R_s, a2, res)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("NFISAC_THREADS", "1")))
    except ValueError:
        return 1


def _solve_point(ch, config, objective, gamma, settings):
    cfg = config.with_sinr(gamma)
    try:
        sol = DESIGNS[objective](ch, cfg, settings=settings)
    except Infeasible as exc:
        return CurvePoint(float(gamma), float("nan"), "infeasible", message=str(exc))
    except NumericalLimit as exc:
        return CurvePoint(float(gamma), float("nan"), "numerical_limit", message=str(exc))
    except NfisacError as exc:
        return CurvePoint(float(gamma), float("nan"), "error", message=f"{type(exc).__name__}: {exc}")
    return CurvePoint(float(gamma), sol.metric_value, sol.solver_status, list(sol.sinr), float(np.trace(sol.R_X).real))


def sweep(ch: ChannelSet, config: ScenarioConfig, objective: str, gamma_grid, settings: SolverSettings | None = None, threads: int | None = None) -> TradeoffCurve:
    """Solve one design per SINR threshold (linear) in ``gamma_grid``.

    Failed points are kept with their status and a NaN metric.  Points run
    concurrently when ``threads`` (default NFISAC_THREADS) exceeds one; the
    output order follows the sorted grid either way.
    """
    if objective not in DESIGNS:
        raise ValueError(f"unknown objective {objective!r}")
    grid = sorted(float(g) for g in gamma_grid)
    if len(set(grid)) != len(grid):
        raise ValueError("gamma grid has repeated values")
    threads = threads or _threads()
    if threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(lambda g: _solve_point(ch, config, objective, g, settings), grid))
    else:
        points = [_solve_point(ch, config, objective, g, settings) for g in grid]
    return TradeoffCurve(points=points, scenario_hash=scenario_hash(config), objective=objective)


def default_gamma_grid(gamma_min: float, gamma_max: float, points: int = 20) -> np.ndarray:
    """``points`` logarithmically spaced thresholds (linear units)."""
    if points < 1 or not 0 < gamma_min <= gamma_max:
        raise ValueError("need points >= 1 and 0 < gamma_min <= gamma_max")
    return np.geomspace(gamma_min, gamma_max, points)


# --- distance sweep ----------------------------------------------------------


@dataclass
class DistanceRow:
    d: float
    crb_ps: float
    crb_pc: float
    crb_iso: float
    sinr_ps: float
    sinr_pc: float


def move_collocated(config: ScenarioConfig, d: float) -> ScenarioConfig:
    """Place the single target and user at (0, d, z) with z kept from the template."""
    if config.K != 1 or config.U != 1:
        raise ValueError("distance sweep needs one target and one user")
    t = config.targets[0]
    pos = (0.0, float(d), float(t.position[2]))
    return replace(config, targets=(TargetSpec(pos, t.reflection),), users=(replace(config.users[0], position=pos),))


def _distance_row(config, d, settings):
    cfg = move_collocated(config, d)
    ch = build_channel_set(cfg)
    nan = float("nan")
    try:
        _, g_c, crb_c = endpoint_pc(ch, cfg)
    except NfisacError:
        g_c = crb_c = nan
    try:
        _, _, _, g_s, crb_s, _, _ = endpoint_ps(ch, cfg, settings)
    except NfisacError:
        g_s = crb_s = nan
    try:
        crb_iso = _crb(ch, cfg, cfg.total_power / cfg.N * np.eye(cfg.N))
    except NfisacError:
        crb_iso = nan
    return DistanceRow(float(d), crb_s, crb_c, crb_iso, g_s, g_c)


def collocated_distance_sweep(config_template: ScenarioConfig, d_values, settings: SolverSettings | None = None, threads: int | None = None) -> list[DistanceRow]:
    """CRB and SINR of P_s, P_c and the isotropic design along the y-offset d."""
    threads = threads or _threads()
    d_values = [float(d) for d in d_values]
    if threads > 1 and len(d_values) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda d: _distance_row(config_template, d, settings), d_values))
    return [_distance_row(config_template, d, settings) for d in d_values]


# --- CSV ---------------------------------------------------------------------


def _f(x) -> str:
    return format(float(x), ".17g")


def _db(g) -> str:
    return _f(10 * math.log10(g)) if g > 0 else "-inf"


def write_curve_csv(path, curve: TradeoffCurve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gamma_db", "metric_value", "status"])
        for p in curve.points:
            w.writerow([_db(p.gamma), _f(p.metric_value), p.status])


def write_distance_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d_m", "crb_ps", "crb_pc", "crb_iso", "sinr_ps", "sinr_pc"])
        for r in rows:
            w.writerow([_f(r.d), _f(r.crb_ps), _f(r.crb_pc), _f(r.crb_iso), _f(r.sinr_ps), _f(r.sinr_pc)])
