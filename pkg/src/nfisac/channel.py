"""Exact spherical-wavefront steering vectors and their position derivatives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularGeometry
from .scenario import ScenarioConfig, build_antenna_positions

_AXIS = {"x": 0, "y": 1, "z": 2}


def _distances(antennas, point):
    antennas = np.asarray(antennas, dtype=float)
    diff = antennas - np.asarray(point, dtype=float)
    d = np.linalg.norm(diff, axis=-1)
    if np.any(d == 0):
        raise SingularGeometry(f"point {tuple(point)} coincides with an antenna")
    return diff, d


def steering_vector(antennas, point, wavelength: float) -> np.ndarray:
    """Element i is lambda / (4 pi d_i) * exp(-j 2 pi d_i / lambda)."""
    _, d = _distances(antennas, point)
    return wavelength / (4.0 * np.pi * d) * np.exp(-2j * np.pi * d / wavelength)


def steering_derivative(antennas, point, wavelength: float, axis: str) -> np.ndarray:
    """Derivative of the steering vector with respect to one point coordinate.

    Element m is a_m ((u_m - u)/d_m^2 + j nu (u_m - u)/d_m), with u_m the
    antenna coordinate and u the point coordinate along ``axis``.
    """
    diff, d = _distances(antennas, point)
    a = wavelength / (4.0 * np.pi * d) * np.exp(-2j * np.pi * d / wavelength)
    du = diff[:, _AXIS[axis]]
    nu = 2.0 * np.pi / wavelength
    return a * (du / d**2 + 1j * nu * du / d)


@dataclass(frozen=True)
class ChannelSet:
    """Steering matrices, derivative matrices and user channels of a scenario.

    Columns follow target / user order.  ``dA`` and ``dV`` map axis name to
    the M x K / N x K derivative matrix.
    """

    A: np.ndarray
    V: np.ndarray
    dA: dict
    dV: dict
    H_c: np.ndarray
    B: np.ndarray
    wavelength: float
    tx_positions: np.ndarray
    rx_positions: np.ndarray

    @property
    def b(self) -> np.ndarray:
        return np.diag(self.B).copy()

    @property
    def K(self) -> int:
        return self.V.shape[1]

    @property
    def U(self) -> int:
        return self.H_c.shape[1]

    @property
    def N(self) -> int:
        return self.V.shape[0]

    @property
    def M(self) -> int:
        return self.A.shape[0]

    def matrix(self, name: str) -> np.ndarray:
        """Look up a matrix by name (A, V, dA_x, ..., dV_z, H_c, B)."""
        if name in ("A", "V", "H_c", "B"):
            return getattr(self, name)
        kind, _, axis = name.partition("_")
        if kind in ("dA", "dV") and axis in _AXIS:
            return getattr(self, kind)[axis]
        raise KeyError(name)


def _steering_matrix(antennas, points, wavelength):
    return np.column_stack([steering_vector(antennas, p, wavelength) for p in points])


def _derivative_matrix(antennas, points, wavelength, axis):
    return np.column_stack([steering_derivative(antennas, p, wavelength, axis) for p in points])


def build_channel_set(config: ScenarioConfig) -> ChannelSet:
    """Assemble A, V, all derivative matrices, B and the user channels.

    h_u = conj(v(l_u)) + eta_u * conj(v(l_t)), where t is the user's
    designated scattering target.
    """
    lam = config.wavelength
    tx = build_antenna_positions(config.tx, lam)
    rx = build_antenna_positions(config.rx, lam)
    tpos = [t.position for t in config.targets]
    A = _steering_matrix(rx, tpos, lam)
    V = _steering_matrix(tx, tpos, lam)
    dA = {ax: _derivative_matrix(rx, tpos, lam, ax) for ax in "xyz"}
    dV = {ax: _derivative_matrix(tx, tpos, lam, ax) for ax in "xyz"}
    H = np.zeros((tx.shape[0], config.U), dtype=complex)
    for u, user in enumerate(config.users):
        h = np.conj(steering_vector(tx, user.position, lam))
        if user.nlos_coefficient:
            h = h + user.nlos_coefficient * np.conj(V[:, user.nlos_target_index])
        H[:, u] = h
    B = np.diag(np.array([complex(t.reflection) for t in config.targets]))
    for arr in (A, V, H, B, *dA.values(), *dV.values()):
        arr.setflags(write=False)
    return ChannelSet(A=A, V=V, dA=dA, dV=dV, H_c=H, B=B, wavelength=lam, tx_positions=tx, rx_positions=rx)
