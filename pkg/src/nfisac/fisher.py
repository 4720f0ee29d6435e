"""Fisher information and Cramer-Rao bounds for 3D target localization.

The unknown vector is ordered [x_1..x_K, y_1..y_K, z_1..z_K, bR_1..bR_K,
bI_1..bI_K].  Every block of the FIM is a Hadamard product of a receive-side
Gram term (fixed by the geometry and Q) and a transmit-side Gram term that
is linear in conj(R_X).  The split is exposed through ``rx_grams`` /
``tx_grams`` so that the optimisation code can evaluate the FIM on a basis
of covariance matrices without rebuilding the receive side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .channel import ChannelSet
from .errors import ConfigNotSymmetric, NonPsdInput, ShapeMismatch, SingularBlock, SingularFim

AXES = ("x", "y", "z")
PARAM_GROUPS = ("x", "y", "z", "bR", "bI")


@dataclass(frozen=True)
class Fim:
    matrix: np.ndarray
    K: int
    blocks: dict = field(default_factory=dict, repr=False)

    @property
    def ordering(self) -> list[str]:
        return [f"{g}_{k + 1}" for g in PARAM_GROUPS for k in range(self.K)]


@dataclass(frozen=True)
class CrbReport:
    per_target: list  # (crb_x, crb_y, crb_z, crb_total) per target, m^2
    sum_crb: float
    fim_condition_estimate: float


def rx_grams(ch: ChannelSet, Q) -> dict:
    """Receive-side products X^H Q^{-1} Y for X, Y in {A, dA_x, dA_y, dA_z}."""
    Q = np.asarray(Q, dtype=complex)
    if Q.shape != (ch.M, ch.M):
        raise ShapeMismatch(f"Q must be {ch.M}x{ch.M}, got {Q.shape}")
    mats = {"0": ch.A, **{ax: ch.dA[ax] for ax in AXES}}
    try:
        cf = sla.cho_factor(Q, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NonPsdInput("sensing noise covariance is not positive definite") from exc
    qinv = {k: sla.cho_solve(cf, m) for k, m in mats.items()}
    return {(i, j): mats[i].conj().T @ qinv[j] for i in mats for j in mats}


def tx_grams(ch: ChannelSet, R) -> dict:
    """Transmit-side products X^H conj(R) Y for X, Y in {V, dV_x, dV_y, dV_z}."""
    mats = {"0": ch.V, **{ax: ch.dV[ax] for ax in AXES}}
    Rc = np.conj(R)
    right = {k: Rc @ m for k, m in mats.items()}
    return {(i, j): mats[i].conj().T @ right[j] for i in mats for j in mats}


def fim_blocks(rx: dict, tx: dict, b, L: int) -> dict:
    """Complex blocks F_uv, F_ub, F_bb from Gram terms.

    Works elementwise on trailing (K, K) axes, so ``tx`` entries may carry a
    leading batch dimension.
    """
    b = np.asarray(b)
    bb = np.conj(b)[:, None] * b[None, :]
    bc = np.conj(b)[:, None]
    out = {}
    for i, u in enumerate(AXES):
        for v in AXES[i:]:
            out[u + v] = L * (
                rx[u, v] * (bb * tx["0", "0"])
                + rx[u, "0"] * (bb * tx["0", v])
                + rx["0", v] * (bb * tx[u, "0"])
                + rx["0", "0"] * (bb * tx[u, v])
            )
        out[u + "b"] = L * (rx[u, "0"] * (bc * tx["0", "0"]) + rx["0", "0"] * (bc * tx[u, "0"]))
    out["bb"] = L * rx["0", "0"] * tx["0", "0"]
    return out


def real_fim(blocks: dict) -> np.ndarray:
    """Real 5K x 5K FIM (factor 2 included) from the complex blocks."""
    bb = blocks["bb"]
    K = bb.shape[-1]
    batch = bb.shape[:-2]
    F = np.zeros(batch + (5 * K, 5 * K))

    def put(i, j, val):
        F[..., i * K:(i + 1) * K, j * K:(j + 1) * K] = val

    T = lambda m: np.swapaxes(m, -1, -2)  # noqa: E731
    for i, u in enumerate(AXES):
        for j, v in enumerate(AXES):
            if j >= i:
                put(i, j, blocks[u + v].real)
            else:
                put(i, j, T(blocks[v + u]).real)
        put(i, 3, blocks[u + "b"].real)
        put(i, 4, -blocks[u + "b"].imag)
        put(3, i, T(blocks[u + "b"]).real)
        put(4, i, -T(blocks[u + "b"]).imag)
    put(3, 3, bb.real)
    put(3, 4, -bb.imag)
    put(4, 3, -T(bb).imag)
    put(4, 4, bb.real)
    return 2.0 * F


def _check_psd(R, name="R_X"):
    R = np.asarray(R)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ShapeMismatch(f"{name} must be square")
    H = (R + R.conj().T) / 2
    tr = max(np.trace(H).real, 0.0)
    if np.linalg.eigvalsh(H).min() < -1e-9 * tr:
        raise NonPsdInput(f"{name} is not positive semidefinite")


def assemble_fim(ch: ChannelSet, Rx_cov, Q, L: int = 1, check: bool = True) -> Fim:
    """Fisher information of the target parameters for a transmit covariance."""
    Rx_cov = np.asarray(Rx_cov, dtype=complex)
    if Rx_cov.shape != (ch.N, ch.N):
        raise ShapeMismatch(f"R_X must be {ch.N}x{ch.N}, got {Rx_cov.shape}")
    if check:
        _check_psd(Rx_cov)
    blocks = fim_blocks(rx_grams(ch, Q), tx_grams(ch, Rx_cov), ch.b, L)
    F = real_fim(blocks)
    F = (F + F.T) / 2
    return Fim(matrix=F, K=ch.K, blocks=blocks)


def scaled_condition(F) -> tuple[float, np.ndarray, np.ndarray]:
    """Condition number of the Jacobi-scaled FIM plus its eigen-decomposition.

    Raw FIM entries mix m^-2 and unitless parameters, so the unscaled
    condition number says little about the accuracy of the inverse.
    """
    F = np.asarray(F)
    d = np.sqrt(np.abs(np.diag(F)))
    d[d == 0] = 1.0
    S = F / np.outer(d, d)
    w, vec = np.linalg.eigh(S)
    cond = np.inf if w[0] <= 0 else w[-1] / w[0]
    return cond, w, vec / d[:, None]


def crb_from_fim(fim: Fim | np.ndarray, max_condition: float = 1e14) -> CrbReport:
    F = fim.matrix if isinstance(fim, Fim) else np.asarray(fim)
    K = F.shape[0] // 5
    cond, w, vec = scaled_condition(F)
    if not cond < max_condition:
        null = vec[:, 0] / np.linalg.norm(vec[:, 0])
        raise SingularFim(f"FIM is singular (scaled condition {cond:.3g})", cond, null)
    C = fim_inverse(F)
    per = []
    for k in range(K):
        cx, cy, cz = C[k, k], C[k + K, k + K], C[k + 2 * K, k + 2 * K]
        per.append((cx, cy, cz, cx + cy + cz))
    return CrbReport(per_target=per, sum_crb=float(sum(p[3] for p in per)), fim_condition_estimate=float(cond))


def fim_inverse(F) -> np.ndarray:
    """Inverse via a Jacobi-scaled Cholesky factorisation."""
    F = np.asarray(F)
    d = np.sqrt(np.abs(np.diag(F)))
    d[d == 0] = 1.0
    S = F / np.outer(d, d)
    cf = sla.cho_factor(S, lower=True)
    Sinv = sla.cho_solve(cf, np.eye(F.shape[0]))
    return Sinv / np.outer(d, d)


def sum_crb(ch: ChannelSet, Rx_cov, Q, L: int = 1) -> float:
    return crb_from_fim(assemble_fim(ch, Rx_cov, Q, L)).sum_crb


def equivalent_fim_schur(fim: Fim | np.ndarray) -> np.ndarray:
    """Schur complement of the reflection block: D = G - H R^{-1} H^T."""
    F = fim.matrix if isinstance(fim, Fim) else np.asarray(fim)
    K = F.shape[0] // 5
    G = F[: 3 * K, : 3 * K]
    H = F[: 3 * K, 3 * K:]
    R = F[3 * K:, 3 * K:]
    try:
        cf = sla.cho_factor(R, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock("reflection block of the FIM is not invertible") from exc
    D = G - H @ sla.cho_solve(cf, H.T)
    return (D + D.T) / 2


# --- symmetric collocated configuration -----------------------------------


def symmetry_residuals(ch: ChannelSet) -> dict:
    """Relative residuals of the orthogonality / norm identities that hold
    for a single target on the axis of a symmetric array pair."""
    a, v = ch.A[:, 0], ch.V[:, 0]
    da = {ax: ch.dA[ax][:, 0] for ax in AXES}
    dv = {ax: ch.dV[ax][:, 0] for ax in AXES}
    n = np.linalg.norm
    res = {}
    res["a^H da_x"] = abs(a.conj() @ da["x"]) / (n(a) * n(da["x"]))
    res["a^H da_y"] = abs(a.conj() @ da["y"]) / (n(a) * n(da["y"]))
    res["v^H dv_x"] = abs(v.conj() @ dv["x"]) / (n(v) * n(dv["x"]))
    res["v^H dv_y"] = abs(v.conj() @ dv["y"]) / (n(v) * n(dv["y"]))
    for p, q in (("x", "y"), ("x", "z"), ("y", "z")):
        res[f"da_{p}^H da_{q}"] = abs(da[p].conj() @ da[q]) / (n(da[p]) * n(da[q]))
        res[f"dv_{p}^H dv_{q}"] = abs(dv[p].conj() @ dv[q]) / (n(dv[p]) * n(dv[q]))
    res["|a|-|v|"] = abs(n(a) - n(v)) / n(v)
    res["|da_x|-|dv_x|"] = abs(n(da["x"]) - n(dv["x"])) / n(dv["x"])
    res["|da_y|-|dv_y|"] = abs(n(da["y"]) - n(dv["y"])) / n(dv["y"])
    res["|dv_x|-|dv_y|"] = abs(n(dv["x"]) - n(dv["y"])) / n(dv["y"])
    res["|da_z|-|dv_z|"] = abs(n(da["z"]) - n(dv["z"])) / n(dv["z"])
    return res


def collocated_basis(ch: ChannelSet) -> np.ndarray:
    """Orthonormal basis [v, dv_x, dv_y, omega] (each normalised), where omega
    is dv_z with its component along v removed."""
    v = ch.V[:, 0]
    dvx, dvy, dvz = (ch.dV[ax][:, 0] for ax in AXES)
    n = np.linalg.norm
    omega = dvz / n(dvz) - (v.conj() @ dvz) / (n(v) ** 2 * n(dvz)) * v
    return np.column_stack([v / n(v), dvx / n(dvx), dvy / n(dvy), omega / n(omega)])


def closed_form_collocated_crb(ch: ChannelSet, x, noise_scale: float, tol: float = 1e-8) -> tuple[float, float, float]:
    """Per-axis CRBs for R_X^* = Qr diag(x) Qr^H on the collocated basis.

    ``noise_scale`` is sigma^2 / (2 |b|^2 L).  Raises ConfigNotSymmetric
    unless the single-target symmetry identities hold to ``tol``.
    """
    if ch.K != 1:
        raise ConfigNotSymmetric("closed form needs exactly one target")
    res = symmetry_residuals(ch)
    worst = max(res.values())
    if worst > tol:
        name = max(res, key=res.get)
        raise ConfigNotSymmetric(f"symmetry identity {name} violated (residual {worst:.3g})")
    x1, x2, x3, x4 = (float(t) for t in x)
    v = ch.V[:, 0]
    dvx, dvy, dvz = (ch.dV[ax][:, 0] for ax in AXES)
    nv2 = np.vdot(v, v).real
    cx = np.vdot(dvx, dvx).real * nv2 * (x1 + x2)
    cy = np.vdot(dvy, dvy).real * nv2 * (x1 + x3)
    cz = (np.vdot(dvz, dvz).real * nv2 - abs(np.vdot(dvz, v)) ** 2) * (x1 + x4)
    xi = noise_scale
    return xi / cx, xi / cy, xi / cz
