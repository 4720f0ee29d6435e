"""Oracle checks run by ``nfisac validate`` (and reused by the test suite)."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, build_channel_set
from .conic import SolverSettings
from .designs import DESIGNS, build_subspace, subspace_residual
from .errors import ConfigNotSymmetric, NfisacError, RankDeficientBlock
from .fisher import assemble_fim, closed_form_collocated_crb
from .scenario import ScenarioConfig, validate


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    skipped: bool = False
    seconds: float = 0.0

    @property
    def label(self) -> str:
        return "skip" if self.skipped else ("pass" if self.passed else "FAIL")


def random_psd(n: int, rng, trace: float = 1.0, rank: int | None = None) -> np.ndarray:
    rank = n if rank is None else rank
    G = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    R = G @ G.conj().T
    return trace * R / np.trace(R).real


def fim_derivative_oracle(ch: ChannelSet, Rx_cov, Q, L: int = 1) -> np.ndarray:
    """FIM from explicit derivatives of the noiseless echo A B V^T X.

    The transmit block X = sqrt(L) R^{1/2} has X X^H = L R, which is all the
    FIM depends on.  Each entry is 2 Re <dmu_i, Q^{-1} dmu_j> summed over
    snapshots.
    """
    w, E = np.linalg.eigh((Rx_cov + np.conj(Rx_cov).T) / 2)
    X = np.sqrt(L) * (E * np.sqrt(np.clip(w, 0, None))) @ E.conj().T
    Qi = np.linalg.inv(Q)
    K, b = ch.K, ch.b
    D = np.zeros((5 * K, ch.M, X.shape[1]), dtype=complex)
    for k in range(K):
        a, v = ch.A[:, k], ch.V[:, k]
        for i, ax in enumerate("xyz"):
            D[i * K + k] = b[k] * (np.outer(ch.dA[ax][:, k], v) + np.outer(a, ch.dV[ax][:, k])) @ X
        D[3 * K + k] = np.outer(a, v) @ X
        D[4 * K + k] = 1j * np.outer(a, v) @ X
    QD = np.einsum("mn,inl->iml", Qi, D)
    return 2.0 * np.real(np.einsum("iml,jml->ij", D.conj(), QD))


def fim_elementwise_error(F, F_ref) -> float:
    """max |F - F_ref|_ij / sqrt(|F_ref_ii F_ref_jj|)."""
    d = np.sqrt(np.abs(np.diag(F_ref)))
    scale = np.outer(d, d)
    scale[scale == 0] = 1.0
    return float(np.max(np.abs(F - F_ref) / scale))


def projector_error(ch: ChannelSet, kind: str) -> float:
    """Distance between the Q_orth projector and the pinv projector of the
    unnormalised column stack."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficientBlock)
        basis = build_subspace(ch, kind)
    cols = []
    if ch.U > 0:
        cols.append(np.conj(ch.H_c))
    cols.append(ch.V)
    if kind == "sensing_comm_crb":
        cols += [ch.dV[ax] for ax in "xyz"]
    S = np.hstack(cols)
    P_ref = S @ np.linalg.pinv(S, rcond=1e-10)
    return float(np.linalg.norm(basis.projector() - P_ref))


def _timed(name, fn):
    t0 = time.perf_counter()
    try:
        passed, detail, skipped = fn()
    except NfisacError as exc:
        passed, detail, skipped = False, f"{type(exc).__name__}: {exc}", False
    return CheckResult(name, passed, detail, skipped, time.perf_counter() - t0)


def run_validation(config: ScenarioConfig, level: str = "quick", settings: SolverSettings | None = None, seed: int = 0) -> list[CheckResult]:
    if level not in ("quick", "full"):
        raise ValueError("level must be quick or full")
    settings = settings or SolverSettings()
    issues = validate(config)
    out = [CheckResult("scenario", not issues, "; ".join(i.message for i in issues))]
    if issues:
        return out
    ch = build_channel_set(config)
    rng = np.random.default_rng(seed)
    Q = config.noise_covariance()

    def fim_oracle():
        R = random_psd(ch.N, rng, config.total_power)
        F = assemble_fim(ch, R, Q, config.snapshots).matrix
        err = fim_elementwise_error(F, fim_derivative_oracle(ch, R, Q, config.snapshots))
        return err <= 1e-8, f"elementwise error {err:.2e}", False

    def projector():
        errs = {kind: projector_error(ch, kind) for kind in ("sensing_comm_crb", "sensing_comm_power")}
        worst = max(errs.values())
        return worst <= 1e-8, f"max projector difference {worst:.2e}", False

    reduced = {}

    def design(name):
        def run():
            sol = DESIGNS[name](ch, config, reduced=True, settings=settings)
            reduced[name] = sol
            tr = np.trace(sol.R_X).real
            problems = sol.check_invariants(config.total_power, 1e-8)
            if abs(tr / config.total_power - 1) > 1e-6:
                problems.append(f"trace(R_X)/P_T = {tr / config.total_power:.9f}")
            for u, user in enumerate(config.users):
                if sol.sinr[u] < user.sinr_threshold * (1 - 1e-6):
                    problems.append(f"user {u} SINR below target")
            for u, W in enumerate(sol.W):
                w = np.linalg.eigvalsh(W)
                if w[-1] > 0 and w[-2] > 1e-7 * w[-1]:
                    problems.append(f"W_{u} not rank one")
            if name == "crb":
                rel = abs(sol.objective_value - sol.metric_value) / sol.metric_value
                if rel > 1e-4:
                    problems.append(f"LMI objective vs recomputed CRB differ by {rel:.2e}")
            detail = "; ".join(problems) or f"{sol.metric_name} = {sol.metric_value:.6e}"
            return not problems, detail, False

        return run

    out.append(_timed("fim-oracle", fim_oracle))
    out.append(_timed("subspace-projector", projector))
    for name in DESIGNS:
        if name == "echo" and np.any(ch.b == 0):
            out.append(CheckResult("design-echo", True, "zero reflection coefficient", skipped=True))
            continue
        out.append(_timed(f"design-{name}", design(name)))
    if level == "quick":
        return out

    for name in DESIGNS:
        def direct_vs_reduced(name=name):
            if ch.N > 16:
                return True, "N > 16, direct solve skipped", True
            if name not in reduced:
                return True, "no reduced solution", True
            sol = DESIGNS[name](ch, config, reduced=False, settings=settings)
            rel = abs(sol.metric_value - reduced[name].metric_value) / abs(sol.metric_value)
            kind = "sensing_comm_crb" if name == "crb" else "sensing_comm_power"
            if name == "crb" and ch.U == 0:
                kind = "sensing_only"
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RankDeficientBlock)
                res = subspace_residual(sol.R_X, build_subspace(ch, kind))
            ok = rel <= 1e-3 and res <= 1e-6
            return ok, f"relative difference {rel:.2e}, subspace residual {res:.2e}", False

        out.append(_timed(f"direct-vs-reduced-{name}", direct_vs_reduced))

    def closed_form():
        if ch.K != 1 or ch.U > 1 or any(u.sinr_threshold > 0 for u in config.users):
            return True, "needs one target and no SINR requirement", True
        if config.scalar_sensing_noise is None:
            return True, "needs scalar sensing noise", True
        try:
            xi = config.scalar_sensing_noise / (2 * abs(ch.b[0]) ** 2 * config.snapshots)
            cf = sum(closed_form_collocated_crb(ch, (config.total_power, 0, 0, 0), xi))
        except ConfigNotSymmetric as exc:
            return True, str(exc), True
        sol = reduced.get("crb") or DESIGNS["crb"](ch, config, settings=settings)
        rel = abs(sol.metric_value - cf) / cf
        w, E = np.linalg.eigh(sol.R_X)
        v = np.conj(ch.V[:, 0]) / np.linalg.norm(ch.V[:, 0])
        align = abs(np.vdot(E[:, -1], v))
        ok = rel <= 1e-4 and align >= 1 - 1e-6 and w[-1] / w.sum() >= 1 - 1e-6
        return ok, f"CRB vs closed form {rel:.2e}, alignment {align:.9f}", False

    out.append(_timed("collocated-closed-form", closed_form))
    return out

