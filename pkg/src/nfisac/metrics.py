"""Communication SINR, target illumination / echo power and beampatterns."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, steering_vector
from .errors import SingularGeometry


@dataclass
class DesignSolution:
    """A transmit design: per-user covariances, dedicated sensing covariance
    and their sum R_X = R_d + sum_u W_u.  Matrices are not conjugated."""

    W: list
    R_d: np.ndarray
    R_X: np.ndarray
    objective_value: float
    sinr: list
    solver_status: str  # optimal | infeasible | numerical_limit
    metric_name: str  # sum_crb | min_illumination | min_echo
    metric_value: float
    diagnostics: dict = field(default_factory=dict)
    # orthonormal N x r basis containing every matrix above, when known
    span: np.ndarray | None = field(default=None, repr=False)

    @property
    def U(self) -> int:
        return len(self.W)

    def check_invariants(self, total_power: float, tol: float = 1e-8) -> list[str]:
        """Violated structural invariants (empty when consistent)."""
        problems = []
        tr = np.trace(self.R_X).real
        recon = self.R_d + sum(self.W, np.zeros_like(self.R_X))
        if np.linalg.norm(recon - self.R_X) > tol * max(tr, 1e-300):
            problems.append("R_X != R_d + sum W_u")
        if tr > total_power * (1 + tol):
            problems.append("power budget exceeded")
        for name, m in [("R_d", self.R_d)] + [(f"W_{u}", w) for u, w in enumerate(self.W)]:
            if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -tol * max(tr, 1e-300):
                problems.append(f"{name} not PSD")
        return problems


def _quad(h, M) -> float:
    return float(np.real(np.conj(h) @ M @ h))


def sinr(ch: ChannelSet, sol: DesignSolution, user: int, comm_noise: float) -> float:
    """SINR of ``user`` in trace form; valid for beam covariances of any rank."""
    h = ch.H_c[:, user]
    signal = _quad(h, sol.W[user])
    interference = sum(_quad(h, w) for k, w in enumerate(sol.W) if k != user)
    return signal / (interference + _quad(h, sol.R_d) + comm_noise)


def all_sinr(ch: ChannelSet, W, R_d, comm_noise: float) -> list[float]:
    sol = DesignSolution(list(W), R_d, R_d + sum(W, np.zeros_like(R_d)), 0.0, [], "", "", 0.0)
    return [sinr(ch, sol, u, comm_noise) for u in range(len(W))]


def illumination_power(ch: ChannelSet, Rx_cov, target: int) -> float:
    """Transmit beampattern gain v^T R_X v^* at a target."""
    vc = np.conj(ch.V[:, target])
    return _quad(vc, np.asarray(Rx_cov))


def echo_power(ch: ChannelSet, Rx_cov, target: int, exponent: int = 1) -> float:
    """Echo power ||a||^2 |b|^exponent v^T R_X v^*; ``exponent`` is 1 by default."""
    a = ch.A[:, target]
    b = abs(ch.B[target, target])
    return float(np.vdot(a, a).real) * b**exponent * illumination_power(ch, Rx_cov, target)


def echo_weight(ch: ChannelSet, target: int, exponent: int = 1) -> float:
    a = ch.A[:, target]
    return float(np.vdot(a, a).real) * abs(ch.B[target, target]) ** exponent


def beampattern_grid(tx_positions, wavelength: float, Rx_cov, y_values, z_values, x: float = 0.0) -> np.ndarray:
    """Beampattern v^T(p) R_X v^*(p) on the plane x = const.

    Returns an array of shape (len(z_values), len(y_values)); cells that
    coincide with an antenna are NaN.
    """
    Rx_cov = np.asarray(Rx_cov)
    out = np.empty((len(z_values), len(y_values)))
    for iz, z in enumerate(z_values):
        for iy, y in enumerate(y_values):
            try:
                vc = np.conj(steering_vector(tx_positions, (x, y, z), wavelength))
            except SingularGeometry:
                out[iz, iy] = np.nan
                continue
            out[iz, iy] = _quad(vc, Rx_cov)
    return out


def write_grid_csv(path, y_values, z_values, grid) -> None:
    """CSV with header ``y_m,z_m,power_w``; z is the outer loop."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y_m", "z_m", "power_w"])
        for iz, z in enumerate(z_values):
            for iy, y in enumerate(y_values):
                w.writerow([format(float(y), ".17g"), format(float(z), ".17g"), format(float(grid[iz, iy]), ".17g")])
