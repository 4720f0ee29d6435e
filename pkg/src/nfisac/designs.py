"""SINR-constrained transmit covariance designs.

Three objectives share one constraint set (per-user SINR, total power,
PSD covariances):

* ``solve_crb_min``              minimise the sum of position CRBs
* ``solve_maxmin_illumination``  maximise the weakest target illumination
* ``solve_maxmin_echo``          maximise the weakest echo power

Each is solved as a semidefinite relaxation.  In reduced mode every
covariance is restricted to W = Q* S Q^T, with Q an orthonormal basis of the
span of [conj(H_c), V, dV_x, dV_y, dV_z] (CRB design) or [conj(H_c), V]
(power designs); optimal solutions of the full relaxation are known to live
there, so the reduced SDP has the same optimum with (4K+U)^2 or (K+U)^2
unknowns per matrix instead of N^2.  A rank-one beam per user is then
recovered without changing R_X or any SINR.

Internally covariances are measured in units of the power budget and the
FIM is Jacobi-scaled at a reference point, which keeps the conic data
well conditioned even though physical FIM entries span many decades.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla

from .channel import ChannelSet
from .conic import HermitianVar, ProblemBuilder, SolverSettings, solve, svec
from .errors import DegenerateBeam, Infeasible, NumericalLimit, RankDeficientBlock, SingularFim, ZeroReflection
from .fisher import AXES, assemble_fim, crb_from_fim, fim_blocks, real_fim, rx_grams
from .metrics import DesignSolution, all_sinr, echo_power, echo_weight, illumination_power
from .scenario import ScenarioConfig

RANK_TOL = 1e-7  # relative eigenvalue threshold for rank decisions
GRAM_COND_MAX = 1e12
COLUMN_TOL = 1e-9  # relative R-diagonal threshold for dropping dependent columns


@dataclass(frozen=True)
class SubspaceBasis:
    U_raw: np.ndarray
    Q_orth: np.ndarray
    R_factor: np.ndarray
    kind: str  # sensing_comm_crb | sensing_comm_power | comm
    labels: tuple = ()
    dropped: tuple = ()

    @property
    def rank(self) -> int:
        return self.Q_orth.shape[1]

    def projector(self) -> np.ndarray:
        return self.Q_orth @ self.Q_orth.conj().T


def _normalised_block(X):
    """X (X^H X)^{-1/2}; falls back to an orthonormal basis of the
    independent columns when the Gram matrix is ill conditioned."""
    G = X.conj().T @ X
    w, E = np.linalg.eigh((G + G.conj().T) / 2)
    if w[0] > 0 and w[-1] / w[0] <= GRAM_COND_MAX:
        return X @ (E / np.sqrt(w)) @ E.conj().T, None
    Qp, Rp, piv = sla.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(Rp))
    keep = d > COLUMN_TOL * max(d[0], 1e-300) if d.size else np.zeros(0, bool)
    dropped = sorted(int(p) for p in piv[~keep])
    return Qp[:, keep], dropped


def _subspace_blocks(ch: ChannelSet, kind: str):
    blocks = []
    if ch.U > 0 and kind != "sensing_only":
        blocks.append(("H_c*", np.conj(ch.H_c)))
    if kind != "comm":
        blocks.append(("V", ch.V))
    if kind in ("sensing_comm_crb", "sensing_only"):
        blocks += [(f"dV_{ax}", ch.dV[ax]) for ax in AXES]
    return blocks


def build_subspace(ch: ChannelSet, kind: str = "sensing_comm_crb") -> SubspaceBasis:
    """Orthonormal basis of the optimal-solution subspace.

    ``kind`` is ``sensing_comm_crb`` (4K+U columns), ``sensing_comm_power``
    (K+U columns), ``sensing_only`` (4K columns, no users) or ``comm``
    (the user channels only).
    """
    cols, labels, dropped = [], [], []
    for name, X in _subspace_blocks(ch, kind):
        Y, drop = _normalised_block(X)
        if drop is not None:
            warnings.warn(f"block {name} is rank deficient; dropped columns {drop}", RankDeficientBlock, stacklevel=2)
            dropped += [f"{name}[{i}]" for i in drop]
        cols.append(Y)
        labels += [f"{name}[{i}]" for i in range(Y.shape[1])]
    U_raw = np.hstack(cols)
    # pivoted QR finds columns that depend on other blocks (e.g. a user
    # collocated with a target); they are dropped quietly, listed in
    # ``dropped``, and the rest re-factored
    _, Rp, piv = sla.qr(U_raw, mode="economic", pivoting=True)
    d = np.abs(np.diag(Rp))
    keep = np.sort(piv[d > COLUMN_TOL * d[0]])
    if keep.size < U_raw.shape[1]:
        lost = [labels[i] for i in sorted(set(range(U_raw.shape[1])) - set(keep.tolist()))]
        dropped += lost
        U_raw = U_raw[:, keep]
        labels = [labels[i] for i in keep]
    Q, R = np.linalg.qr(U_raw)
    return SubspaceBasis(U_raw=U_raw, Q_orth=Q, R_factor=R, kind=kind, labels=tuple(labels), dropped=tuple(dropped))


# --- shared SDP machinery ----------------------------------------------------


@dataclass
class _Setup:
    T: np.ndarray  # covariance = P_T * T S T^H
    mode: str
    basis: SubspaceBasis | None
    notes: list = field(default_factory=list)


def _choose_transform(ch: ChannelSet, kind: str, reduced: bool) -> _Setup:
    if reduced:
        need = (4 * ch.K if kind in ("sensing_comm_crb", "sensing_only") else ch.K) + (0 if kind == "sensing_only" else ch.U)
        if need <= ch.N:
            basis = build_subspace(ch, kind)
            if basis.rank < ch.N:
                return _Setup(T=basis.Q_orth.conj(), mode="reduced", basis=basis)
        note = f"reduced subspace dimension {need} not below N={ch.N}; solved directly"
        return _Setup(T=np.eye(ch.N, dtype=complex), mode="direct", basis=None, notes=[note])
    return _Setup(T=np.eye(ch.N, dtype=complex), mode="direct", basis=None)


def _sinr_rows(pb: ProblemBuilder, ch, setup, Ws, Sd, gammas, noise, P_T):
    """h_u^H W_u h_u - gamma (interference + h^H R_d h + noise) >= 0, row-normalised."""
    for u in range(ch.U):
        g = setup.T.conj().T @ ch.H_c[:, u]
        q = Ws[0].form_coeffs(g, g).real if Ws else Sd.form_coeffs(g, g).real
        row = np.zeros(pb.n)
        gam = float(gammas[u])
        for k, Wk in enumerate(Ws):
            row[Wk.slice] = -q if k == u else gam * q
        row[Sd.slice] = gam * q
        rhs = -gam * noise / P_T
        scale = np.linalg.norm(row)
        pb.nonneg(row / scale, rhs / scale, name=f"sinr_{u}")


def _power_row(pb: ProblemBuilder, mats):
    row = np.zeros(pb.n)
    for m in mats:
        row[m.slice] = m.trace_coeffs()
    pb.nonneg(row, 1.0, name="power")


def _unpack(setup, x, mats, P_T):
    out = []
    for m in mats:
        S = m.value(x)
        S = (S + S.conj().T) / 2
        out.append(P_T * setup.T @ S @ setup.T.conj().T)
    return out


def _finish(ch, config, setup, res, W, R_d, objective, metric_name, settings, extract=True, t0=None):
    R_X = R_d + sum(W, np.zeros_like(R_d))
    diag = {
        "mode": setup.mode,
        "subspace_rank": setup.T.shape[1],
        "backend": res.backend,
        "solver_status": res.raw_status,
        "iterations": res.iterations,
        "primal_residual": res.primal_residual,
        "duality_gap": res.gap,
        "solve_time_s": res.wall_time,
        "total_time_s": time.perf_counter() - t0 if t0 is not None else res.wall_time,
        "notes": list(setup.notes),
    }
    if setup.basis is not None and setup.basis.dropped:
        diag["dropped_columns"] = list(setup.basis.dropped)
    sol = DesignSolution(
        W=list(W),
        R_d=R_d,
        R_X=R_X,
        objective_value=float(objective),
        sinr=all_sinr(ch, W, R_d, config.comm_noise_power),
        solver_status=res.status,
        metric_name=metric_name,
        metric_value=float("nan"),
        diagnostics=diag,
        span=setup.T if setup.mode == "reduced" else None,
    )
    if extract and ch.U > 0:
        sol = extract_rank_one(sol, ch, config.comm_noise_power, [u.sinr_threshold for u in config.users], settings.psd_eig_floor)
    sol.metric_value = _metric(ch, config, sol.R_X, metric_name)
    return sol


def _metric(ch, config, R_X, metric_name):
    if metric_name == "sum_crb":
        return crb_from_fim(assemble_fim(ch, R_X, config.noise_covariance(), config.snapshots, check=False)).sum_crb
    if metric_name == "min_illumination":
        return min(illumination_power(ch, R_X, k) for k in range(ch.K))
    if metric_name == "min_echo":
        return min(echo_power(ch, R_X, k, config.echo_power_exponent) for k in range(ch.K))
    raise ValueError(metric_name)


def sinr_ceilings(ch: ChannelSet, config: ScenarioConfig) -> np.ndarray:
    """P_T ||h_u||^2 / sigma_c^2: each user's SINR with every other beam off."""
    return config.total_power * np.sum(np.abs(ch.H_c) ** 2, axis=0) / config.comm_noise_power


def _solve_or_report(prob, settings, ch, config):
    gammas = np.array([u.sinr_threshold for u in config.users])
    if ch.U and np.any(gammas > sinr_ceilings(ch, config) * (1 + 1e-9)):
        report = feasibility_probe(ch, config, settings)
        raise Infeasible(f"SINR targets not achievable: {report.summary()}", report=report)
    try:
        return solve(prob, settings)
    except Infeasible as exc:
        report = feasibility_probe(ch, config, settings)
        raise Infeasible(f"SINR targets not achievable: {report.summary()}", report=report) from exc
    except NumericalLimit as exc:
        # a stalled solve near the feasibility boundary is often infeasibility
        # the backend could not certify
        if ch.U:
            report = feasibility_probe(ch, config, settings)
            if not report.feasible:
                raise Infeasible(f"SINR targets not achievable: {report.summary()}", report=report) from exc
        raise


# --- CRB minimisation --------------------------------------------------------


def _fim_basis(ch: ChannelSet, T: np.ndarray, Q, L: int, P_T: float) -> np.ndarray:
    """Real FIMs of P_T * T E_i T^H for every Hermitian basis element E_i."""
    from .conic import hermitian_basis

    r = T.shape[1]
    E = hermitian_basis(r)
    mats = {"0": ch.V, **{ax: ch.dV[ax] for ax in AXES}}
    proj = {k: T.T @ m for k, m in mats.items()}  # (r, K)
    Ec = np.conj(E)
    tx = {(i, j): P_T * np.einsum("mk,imn,nl->ikl", proj[i].conj(), Ec, proj[j], optimize=True) for i in proj for j in proj}
    blocks = fim_blocks(rx_grams(ch, Q), tx, ch.b, L)
    F = real_fim(blocks)
    return (F + np.swapaxes(F, -1, -2)) / 2


def solve_crb_min(
    ch: ChannelSet,
    config: ScenarioConfig,
    reduced: bool = True,
    settings: SolverSettings | None = None,
    extract: bool = True,
) -> DesignSolution:
    """Minimise the sum of 3D position CRBs under SINR and power constraints.

    The CRB terms enter through 3K Schur-complement LMIs
    [[F, e_k], [e_k^T, t_k]] >= 0.  ``objective_value`` is sum_k t_k in m^2.
    """
    settings = settings or SolverSettings()
    t0 = time.perf_counter()
    kind = "sensing_comm_crb" if ch.U > 0 else "sensing_only"
    setup = _choose_transform(ch, kind, reduced)
    r = setup.T.shape[1]
    P_T = config.total_power
    K = ch.K

    Fb = _fim_basis(ch, setup.T, config.noise_covariance(), config.snapshots, P_T)
    # reference point S = I / r fixes the Jacobi scaling of the LMIs
    F_ref = Fb[:r].sum(axis=0) / r
    dref = np.diag(F_ref)
    if np.any(dref[: 3 * K] <= 0) or np.any(dref <= 0):
        raise SingularFim("FIM has a zero diagonal entry on the design subspace")
    D = 1.0 / np.sqrt(dref)
    Fhat = Fb * np.outer(D, D)

    pb = ProblemBuilder()
    Ws = [pb.hermitian(f"W{u}", r) for u in range(ch.U)]
    Sd = pb.hermitian("Rd", r)
    taus = [pb.scalar(f"t{k}") for k in range(3 * K)]
    mats = Ws + [Sd]
    for m in mats:
        pb.hermitian_psd(m)

    n5 = 5 * K
    order = n5 + 1
    Fpad = np.zeros((Fhat.shape[0], order, order))
    Fpad[:, :n5, :n5] = Fhat
    F_svec = svec(Fpad).T  # (svec_len, r^2)
    corner = np.zeros((order, order))
    corner[n5, n5] = 1.0
    corner_svec = svec(corner)[:, None]
    for k in range(3 * K):
        const = np.zeros((order, order))
        const[k, n5] = const[n5, k] = 1.0
        terms = [(m.slice, F_svec) for m in mats] + [([taus[k]], corner_svec)]
        pb.lmi(order, terms, const=const, name=f"crb_{k}")

    gammas = [u.sinr_threshold for u in config.users]
    _sinr_rows(pb, ch, setup, Ws, Sd, gammas, config.comm_noise_power, P_T)
    _power_row(pb, mats)

    weights = D[: 3 * K] ** 2
    c0 = weights.sum()
    c = np.zeros(pb.n)
    c[taus] = weights / c0
    prob = pb.build(c)
    res = _solve_or_report(prob, settings, ch, config)

    covs = _unpack(setup, res.x, mats, P_T)
    W, R_d = covs[:-1], covs[-1]
    return _finish(ch, config, setup, res, W, R_d, c0 * res.objective, "sum_crb", settings, extract, t0)


# --- max-min illumination / echo --------------------------------------------


def _solve_maxmin(ch, config, weights, metric_name, reduced, settings, extract):
    settings = settings or SolverSettings()
    t0 = time.perf_counter()
    setup = _choose_transform(ch, "sensing_comm_power", reduced)
    r = setup.T.shape[1]
    P_T = config.total_power

    pb = ProblemBuilder()
    Ws = [pb.hermitian(f"W{u}", r) for u in range(ch.U)]
    Sd = pb.hermitian("Rd", r)
    mu = pb.scalar("mu")
    mats = Ws + [Sd]
    for m in mats:
        pb.hermitian_psd(m)

    vnorm2 = np.sum(np.abs(ch.V) ** 2, axis=0)
    mu_ref = P_T * float(np.min(np.asarray(weights) * vnorm2))
    for k in range(ch.K):
        g = setup.T.conj().T @ np.conj(ch.V[:, k])
        q = Sd.form_coeffs(g, g).real * (P_T * weights[k] / mu_ref)
        row = np.zeros(pb.n)
        for m in mats:
            row[m.slice] = -q
        row[mu] = 1.0
        scale = np.linalg.norm(row)
        pb.nonneg(row / scale, 0.0, name=f"epigraph_{k}")

    gammas = [u.sinr_threshold for u in config.users]
    _sinr_rows(pb, ch, setup, Ws, Sd, gammas, config.comm_noise_power, P_T)
    _power_row(pb, mats)

    c = np.zeros(pb.n)
    c[mu] = -1.0
    prob = pb.build(c)
    res = _solve_or_report(prob, settings, ch, config)
    covs = _unpack(setup, res.x, mats, P_T)
    W, R_d = covs[:-1], covs[-1]
    return _finish(ch, config, setup, res, W, R_d, mu_ref * res.x[mu], metric_name, settings, extract, t0)


def solve_maxmin_illumination(ch, config, reduced: bool = True, settings=None, extract: bool = True) -> DesignSolution:
    """Maximise min_k v_k^T R_X v_k^* under SINR and power constraints."""
    return _solve_maxmin(ch, config, np.ones(ch.K), "min_illumination", reduced, settings, extract)


def solve_maxmin_echo(ch, config, reduced: bool = True, settings=None, extract: bool = True) -> DesignSolution:
    """Maximise the weakest echo power ||a_k||^2 |b_k|^p v_k^T R_X v_k^*."""
    if np.any(np.abs(np.diag(ch.B)) == 0):
        raise ZeroReflection("echo design needs every reflection coefficient to be nonzero")
    w = np.array([echo_weight(ch, k, config.echo_power_exponent) for k in range(ch.K)])
    return _solve_maxmin(ch, config, w, "min_echo", reduced, settings, extract)


DESIGNS = {
    "crb": solve_crb_min,
    "illum": solve_maxmin_illumination,
    "echo": solve_maxmin_echo,
}


# --- rank-one extraction and beam recovery ----------------------------------


def extract_rank_one(sol: DesignSolution, ch: ChannelSet, comm_noise: float, thresholds=None, floor: float = 1e-9) -> DesignSolution:
    """Replace each W_u by a rank-one beam with the same useful signal power.

    xi_u = W_u h_u / sqrt(h_u^H W_u h_u), W_u <- xi_u xi_u^H, and R_d
    absorbs the remainder so that R_X is untouched.  Users whose threshold
    is zero and whose beam carries no signal are folded into R_d.
    """
    if sol.U == 0:
        return sol
    thresholds = [None] * sol.U if thresholds is None else list(thresholds)
    new_W = []
    for u, W in enumerate(sol.W):
        h = ch.H_c[:, u]
        s = float(np.real(np.conj(h) @ W @ h))
        trW = float(np.trace(W).real)
        if s <= floor * max(trW, 0.0) or s <= 0:
            if thresholds[u] is not None and thresholds[u] == 0:
                new_W.append(np.zeros_like(W))
                continue
            raise DegenerateBeam(f"user {u}: beam covariance has no power along the channel")
        xi = W @ h / np.sqrt(s)
        new_W.append(np.outer(xi, xi.conj()))
    R_d = sol.R_d + sum(sol.W, np.zeros_like(sol.R_d)) - sum(new_W, np.zeros_like(sol.R_d))
    R_d = (R_d + R_d.conj().T) / 2
    out = replace(sol, W=new_W, R_d=R_d, sinr=all_sinr(ch, new_W, R_d, comm_noise))
    out.diagnostics = dict(sol.diagnostics, rank_one_extracted=True)
    return out


def dedicated_beamformers_from_Rd(R_d, floor: float = 1e-9) -> list[np.ndarray]:
    """Vectors sqrt(lambda_n) u_n of the significant eigenpairs of R_d."""
    R_d = np.asarray(R_d, dtype=complex)
    w, E = np.linalg.eigh((R_d + R_d.conj().T) / 2)
    tr = float(np.trace(R_d).real)
    if tr <= 0:
        return []
    return [np.sqrt(w[i]) * E[:, i] for i in range(len(w) - 1, -1, -1) if w[i] > floor * tr]


# --- feasibility -------------------------------------------------------------


@dataclass
class FeasibilityReport:
    max_sinr: list  # per-user maximum SINR with all other users silent
    min_power: float  # least total power meeting all SINR targets (inf if none)
    feasible: bool
    thresholds: list

    def summary(self) -> str:
        def db(x):
            return f"{10 * np.log10(x):.2f} dB" if x > 0 else "none"

        parts = [f"user {u}: max SINR {db(m)} (target {db(t)})" for u, (m, t) in enumerate(zip(self.max_sinr, self.thresholds))]
        parts.append(f"minimum power {self.min_power:.4g} W")
        return "; ".join(parts)


def feasibility_probe(ch: ChannelSet, config: ScenarioConfig, settings: SolverSettings | None = None) -> FeasibilityReport:
    """Per-user SINR ceilings and the joint min-power SINR feasibility SDP."""
    settings = settings or SolverSettings()
    P_T = config.total_power
    noise = config.comm_noise_power
    gammas = [u.sinr_threshold for u in config.users]
    if ch.U == 0:
        return FeasibilityReport([], 0.0, True, [])
    basis = build_subspace(ch, "comm") if ch.U < ch.N else None
    # beams live in conj(Q_orth), as in the designs
    T = basis.Q_orth.conj() if basis is not None else np.eye(ch.N, dtype=complex)
    r = T.shape[1]

    max_sinr = []
    for u in range(ch.U):
        pb = ProblemBuilder()
        S = pb.hermitian("W", r)
        pb.hermitian_psd(S)
        _power_row(pb, [S])
        g = T.conj().T @ ch.H_c[:, u]
        q = S.form_coeffs(g, g).real
        res = solve(pb.build(-q / np.abs(q).max()), settings)
        max_sinr.append(float(P_T * (q @ res.x) / noise))

    if all(g == 0 for g in gammas):
        return FeasibilityReport(max_sinr, 0.0, True, gammas)
    if any(g > m * (1 + 1e-6) for g, m in zip(gammas, max_sinr)):
        return FeasibilityReport(max_sinr, float("inf"), False, gammas)

    pb = ProblemBuilder()
    Ws = [pb.hermitian(f"W{u}", r) for u in range(ch.U)]
    Sd = pb.hermitian("Rd", r)
    for m in Ws + [Sd]:
        pb.hermitian_psd(m)
    setup = _Setup(T=T, mode="comm", basis=basis)
    _sinr_rows(pb, ch, setup, Ws, Sd, gammas, noise, P_T)
    c = np.zeros(pb.n)
    for m in Ws + [Sd]:
        c[m.slice] = m.trace_coeffs()
    try:
        res = solve(pb.build(c), settings)
    except Infeasible:
        return FeasibilityReport(max_sinr, float("inf"), False, gammas)
    except NumericalLimit as exc:
        if exc.result is not None and exc.result.status == "numerical_limit" and np.isfinite(exc.result.objective):
            res = exc.result
        else:
            raise
    min_power = P_T * float(res.objective)
    return FeasibilityReport(max_sinr, min_power, bool(min_power <= P_T * (1 + 1e-7)), gammas)


def subspace_residual(R_X, basis: SubspaceBasis) -> float:
    """||P_perp R_X P_perp||_F / ||R_X||_F, with P_perp the projector off the
    span that optimal covariances occupy, conj(Q_orth)."""
    Qc = np.conj(basis.Q_orth)
    R_X = np.asarray(R_X)
    RP = R_X - Qc @ (Qc.conj().T @ R_X)
    PRP = RP - (RP @ Qc) @ Qc.conj().T
    return float(np.linalg.norm(PRP) / np.linalg.norm(R_X))


# --- JSON --------------------------------------------------------------------


def _mat_to_json(M):
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _mat_from_json(rows):
    a = np.asarray(rows, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# diagnostics that vary run to run stay out of the solution file
_VOLATILE = ("solve_time_s", "total_time_s")


FULL_MATRIX_LIMIT = 64  # above this N only factored matrices are written


def _eig_in_span(M, span):
    """Eigenpairs of a Hermitian M known to live in span (N x r orthonormal)."""
    if span is None:
        return np.linalg.eigh((M + M.conj().T) / 2)
    m = span.conj().T @ M @ span
    w, E = np.linalg.eigh((m + m.conj().T) / 2)
    return w, span @ E


def _beam_vector(W, span):
    w, E = _eig_in_span(W, span)
    if w[-1] <= 0:
        return np.zeros(W.shape[0], dtype=complex)
    if len(w) > 1 and w[-2] > RANK_TOL * w[-1]:
        return None
    return np.sqrt(w[-1]) * E[:, -1]


def _factor(R, span, floor):
    w, E = _eig_in_span(R, span)
    tr = float(np.sum(w))
    keep = w > floor * tr if tr > 0 else np.zeros(len(w), bool)
    return E[:, keep][:, ::-1] * np.sqrt(w[keep][::-1])


def solution_to_dict(sol: DesignSolution, scenario: dict | None = None, full_matrices: bool | None = None, floor: float = 1e-9) -> dict:
    """JSON form: complex entries as [re, im] pairs.

    Beams are stored as vectors (W_u = w w^H) and R_d as a factor G with
    R_d = G G^H.  Full matrices are added for N <= FULL_MATRIX_LIMIT or on
    request.
    """
    N = sol.R_X.shape[0]
    full = N <= FULL_MATRIX_LIMIT if full_matrices is None else full_matrices
    vecs = [_beam_vector(W, sol.span) for W in sol.W]
    d = {
        "solver_status": sol.solver_status,
        "metric": {"name": sol.metric_name, "value": sol.metric_value},
        "objective_value": sol.objective_value,
        "sinr": list(map(float, sol.sinr)),
        "N": N,
    }
    if all(v is not None for v in vecs):
        d["beams"] = [[[float(z.real), float(z.imag)] for z in v] for v in vecs]
    else:
        full = True
    d["R_d_factor"] = _mat_to_json(_factor(sol.R_d, sol.span, floor))
    if full:
        d["W"] = [_mat_to_json(w) for w in sol.W]
        d["R_d"] = _mat_to_json(sol.R_d)
        d["R_X"] = _mat_to_json(sol.R_X)
    d["diagnostics"] = _clean({k: v for k, v in sol.diagnostics.items() if k not in _VOLATILE})
    if scenario is not None:
        d["scenario"] = scenario
    return d


def solution_from_dict(d: dict) -> DesignSolution:
    N = int(d["N"])
    if "R_X" in d:
        W = [_mat_from_json(w) for w in d["W"]]
        R_d = _mat_from_json(d["R_d"])
        R_X = _mat_from_json(d["R_X"])
    else:
        beams = [_mat_from_json(b) for b in d["beams"]]
        W = [np.outer(b, b.conj()) for b in beams]
        rows = d["R_d_factor"]
        G = _mat_from_json(rows) if rows and rows[0] else np.zeros((N, 0), dtype=complex)
        R_d = G @ G.conj().T
        R_X = R_d + sum(W, np.zeros((N, N), dtype=complex))
    return DesignSolution(
        W=W,
        R_d=R_d,
        R_X=R_X,
        objective_value=float(d["objective_value"]),
        sinr=[float(s) for s in d["sinr"]],
        solver_status=d["solver_status"],
        metric_name=d["metric"]["name"],
        metric_value=float(d["metric"]["value"]),
        diagnostics=dict(d.get("diagnostics", {})),
    )
