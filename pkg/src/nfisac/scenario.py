"""Problem instances: array geometry, targets, users, noise and power.

Powers are linear (watts) everywhere in the library.  The JSON scenario
format carries dBm/dB values and is converted on load.

Antenna ordering is row-major with the first in-plane index fastest.  The
in-plane axes are the two axes other than ``normal_axis`` in x, y, z order,
so a ``normal_axis="z"`` array has ``count_x`` elements along x and
``count_y`` along y.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.constants import speed_of_light

from .errors import ScenarioError

_AXES = {"x": 0, "y": 1, "z": 2}


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


@dataclass(frozen=True)
class ArraySpec:
    count_x: int
    count_y: int
    spacing: float = 0.5
    center: tuple = (0.0, 0.0, 0.0)
    normal_axis: str = "z"

    @property
    def count(self) -> int:
        return self.count_x * self.count_y

    def in_plane_axes(self) -> tuple[int, int]:
        n = _AXES[self.normal_axis]
        a, b = [i for i in range(3) if i != n]
        return a, b


@dataclass(frozen=True)
class TargetSpec:
    position: tuple
    reflection: complex = 1.0 + 0.0j


@dataclass(frozen=True)
class UserSpec:
    position: tuple
    sinr_threshold: float
    nlos_coefficient: float = 0.0
    nlos_target_index: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    """A complete problem instance.

    ``sensing_noise`` is either a scalar variance (Q = sigma^2 I) or a full
    M x M Hermitian positive definite matrix.
    """

    carrier_hz: float
    tx: ArraySpec
    rx: ArraySpec
    targets: tuple
    users: tuple = ()
    total_power: float = 1e-2
    comm_noise_power: float = 1e-11
    sensing_noise: object = 1e-11
    snapshots: int = 1
    echo_power_exponent: int = 1
    source_dir: Path | None = field(default=None, compare=False, repr=False)

    @property
    def wavelength(self) -> float:
        return speed_of_light / self.carrier_hz

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    @property
    def K(self) -> int:
        return len(self.targets)

    @property
    def U(self) -> int:
        return len(self.users)

    @property
    def N(self) -> int:
        return self.tx.count

    @property
    def M(self) -> int:
        return self.rx.count

    def noise_covariance(self) -> np.ndarray:
        """The sensing noise covariance Q as an explicit M x M matrix."""
        if np.ndim(self.sensing_noise) == 0:
            return float(self.sensing_noise) * np.eye(self.M, dtype=complex)
        return np.asarray(self.sensing_noise, dtype=complex)

    @property
    def scalar_sensing_noise(self) -> float | None:
        if np.ndim(self.sensing_noise) == 0:
            return float(self.sensing_noise)
        return None

    def with_sinr(self, gamma) -> ScenarioConfig:
        """Copy with every user's SINR threshold set to ``gamma`` (linear)."""
        gammas = np.broadcast_to(np.asarray(gamma, dtype=float), (self.U,))
        users = tuple(replace(u, sinr_threshold=float(g)) for u, g in zip(self.users, gammas))
        return replace(self, users=users)

    def without_users(self) -> ScenarioConfig:
        return replace(self, users=())

    def check(self) -> ScenarioConfig:
        issues = validate(self)
        if issues:
            raise ScenarioError(issues)
        return self


def build_antenna_positions(spec: ArraySpec, wavelength: float) -> np.ndarray:
    """Positions of a centered rectangular grid, shape (count, 3).

    Row-major: the first in-plane index runs fastest.
    """
    pitch = spec.spacing * wavelength
    ia = (np.arange(spec.count_x) - (spec.count_x - 1) / 2.0) * pitch
    ib = (np.arange(spec.count_y) - (spec.count_y - 1) / 2.0) * pitch
    a_ax, b_ax = spec.in_plane_axes()
    pos = np.zeros((spec.count, 3))
    pos[:, a_ax] = np.tile(ia, spec.count_y)
    pos[:, b_ax] = np.repeat(ib, spec.count_x)
    return pos + np.asarray(spec.center, dtype=float)


def aperture_diagonal(spec: ArraySpec, wavelength: float) -> float:
    """Aperture size sqrt(nx^2 + ny^2) * s with element pitch s."""
    s = spec.spacing * wavelength
    return float(np.hypot(spec.count_x, spec.count_y) * s)


def fresnel_distance(config: ScenarioConfig) -> float:
    """Near-field boundary 2 D^2 / lambda of the transmit aperture."""
    lam = config.wavelength
    d = aperture_diagonal(config.tx, lam)
    return 2.0 * d * d / lam


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str


def validate(config: ScenarioConfig) -> list[ValidationIssue]:
    """Every violated invariant of ``config``; empty means usable."""
    issues = []

    def bad(code, msg):
        issues.append(ValidationIssue(code, msg))

    if not config.carrier_hz > 0:
        bad("carrier", "carrier frequency must be positive")
    for name, arr in (("tx", config.tx), ("rx", config.rx)):
        if arr.count_x < 1 or arr.count_y < 1:
            bad("array_size", f"{name} array needs at least one antenna per axis")
        if not arr.spacing > 0:
            bad("array_spacing", f"{name} spacing must be positive")
        if arr.normal_axis not in _AXES:
            bad("array_normal", f"{name} normal_axis must be one of x, y, z")
        if np.shape(arr.center) != (3,):
            bad("dimension", f"{name} center must be a 3-vector")
    if config.K < 1:
        bad("no_targets", "at least one target is required")
    if not config.total_power > 0:
        bad("power", "total power must be positive")
    if not config.comm_noise_power > 0:
        bad("power", "communication noise power must be positive")
    if config.snapshots < 1:
        bad("snapshots", "snapshot count must be at least 1")
    if config.echo_power_exponent not in (1, 2):
        bad("echo_power_exponent", "echo_power_exponent must be 1 or 2")

    if np.ndim(config.sensing_noise) == 0:
        if not float(config.sensing_noise) > 0:
            bad("power", "sensing noise power must be positive")
    else:
        q = np.asarray(config.sensing_noise, dtype=complex)
        if q.shape != (config.M, config.M):
            bad("dimension", f"sensing noise covariance must be {config.M}x{config.M}, got {q.shape}")
        else:
            scale = max(np.abs(q).max(), np.finfo(float).tiny)
            if np.abs(q - q.conj().T).max() > 1e-12 * scale:
                bad("noise_not_hermitian", "sensing noise covariance not Hermitian")
            elif np.linalg.eigvalsh((q + q.conj().T) / 2).min() <= 0:
                bad("noise_not_psd", "sensing noise covariance not PSD (minimum eigenvalue <= 0)")

    for i, u in enumerate(config.users):
        if not u.sinr_threshold >= 0:
            bad("sinr", f"user {i} SINR threshold must be nonnegative")
        if u.nlos_coefficient < 0:
            bad("nlos", f"user {i} nlos_coefficient must be >= 0")
        if u.nlos_coefficient > 0 and not 0 <= u.nlos_target_index < config.K:
            bad("nlos", f"user {i} nlos_target_index out of range")

    if issues:
        return issues

    if 4 * config.K + config.U > config.N:
        bad("subspace_dimension", f"subspace dimension exceeds N (4K+U = {4 * config.K + config.U} > N = {config.N})")

    lam = config.wavelength
    tx = build_antenna_positions(config.tx, lam)
    rx = build_antenna_positions(config.rx, lam)
    ants = np.vstack([tx, rx])
    points = [("target", i, t.position) for i, t in enumerate(config.targets)]
    points += [("user", i, u.position) for i, u in enumerate(config.users)]
    for kind, i, p in points:
        p = np.asarray(p, dtype=float)
        if p.shape != (3,):
            bad("dimension", f"{kind} {i} position must be a 3-vector")
            continue
        if np.linalg.norm(ants - p, axis=1).min() <= 1e-12:
            bad("coincident_position", f"{kind} {i} coincides with an antenna")
    return issues


# --- JSON scenario files ---------------------------------------------------


def _fmt_db(x) -> float:
    # 12 significant digits so that dB -> W -> dB is stable for canonical files
    return float(f"{float(x):.12g}")


def _array_from_json(d) -> ArraySpec:
    return ArraySpec(
        count_x=int(d["count_x"]),
        count_y=int(d["count_y"]),
        spacing=float(d.get("spacing_wavelengths", 0.5)),
        center=tuple(float(c) for c in d.get("center", (0.0, 0.0, 0.0))),
        normal_axis=str(d.get("normal_axis", "z")),
    )


def _array_to_json(a: ArraySpec) -> dict:
    return {
        "count_x": a.count_x,
        "count_y": a.count_y,
        "spacing_wavelengths": a.spacing,
        "center": [float(c) for c in a.center],
        "normal_axis": a.normal_axis,
    }


def read_matrix_csv(path) -> np.ndarray:
    """Complex matrix from CSV with interleaved (re, im) column pairs."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0::2] + 1j * arr[:, 1::2]


def write_matrix_csv(path, matrix) -> None:
    m = np.atleast_2d(np.asarray(matrix, dtype=complex))
    out = np.empty((m.shape[0], 2 * m.shape[1]))
    out[:, 0::2] = m.real
    out[:, 1::2] = m.imag
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in out:
            w.writerow([format(v, ".17g") for v in row])


def scenario_from_dict(d: dict, base_dir=None) -> ScenarioConfig:
    targets = tuple(
        TargetSpec(
            position=tuple(float(c) for c in t["position"]),
            reflection=complex(*t.get("reflection", (1.0, 0.0))),
        )
        for t in d.get("targets", [])
    )
    users = tuple(
        UserSpec(
            position=tuple(float(c) for c in u["position"]),
            sinr_threshold=float(db_to_linear(u["sinr_db"])) if u.get("sinr_db") is not None else 0.0,
            nlos_coefficient=float(u.get("nlos_coefficient", 0.0)),
            nlos_target_index=int(u.get("nlos_target_index", 0)),
        )
        for u in d.get("users", [])
    )
    if "sensing_noise_matrix_file" in d:
        p = Path(d["sensing_noise_matrix_file"])
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        noise = read_matrix_csv(p)
    else:
        noise = float(dbm_to_watts(d["sensing_noise_dbm"]))
    return ScenarioConfig(
        carrier_hz=float(d["carrier_hz"]),
        tx=_array_from_json(d["tx"]),
        rx=_array_from_json(d["rx"]),
        targets=targets,
        users=users,
        total_power=float(dbm_to_watts(d["total_power_dbm"])),
        comm_noise_power=float(dbm_to_watts(d["comm_noise_dbm"])),
        sensing_noise=noise,
        snapshots=int(d.get("snapshots", 1)),
        echo_power_exponent=int(d.get("echo_power_exponent", 1)),
        source_dir=Path(base_dir) if base_dir is not None else None,
    )


def scenario_to_dict(config: ScenarioConfig, matrix_file: str | None = None) -> dict:
    """Canonical dict form; a matrix-valued Q needs ``matrix_file``."""
    d = {
        "carrier_hz": config.carrier_hz,
        "tx": _array_to_json(config.tx),
        "rx": _array_to_json(config.rx),
        "targets": [
            {"position": [float(c) for c in t.position], "reflection": [complex(t.reflection).real, complex(t.reflection).imag]}
            for t in config.targets
        ],
        "users": [],
        "total_power_dbm": _fmt_db(watts_to_dbm(config.total_power)),
        "comm_noise_dbm": _fmt_db(watts_to_dbm(config.comm_noise_power)),
    }
    for u in config.users:
        ud = {
            "position": [float(c) for c in u.position],
            "nlos_coefficient": u.nlos_coefficient,
            "sinr_db": _fmt_db(linear_to_db(u.sinr_threshold)) if u.sinr_threshold > 0 else None,
        }
        if u.nlos_target_index:
            ud["nlos_target_index"] = u.nlos_target_index
        d["users"].append(ud)
    if config.scalar_sensing_noise is not None:
        d["sensing_noise_dbm"] = _fmt_db(watts_to_dbm(config.scalar_sensing_noise))
    else:
        if matrix_file is None:
            raise ValueError("matrix-valued sensing noise needs a matrix_file path")
        d["sensing_noise_matrix_file"] = matrix_file
    d["snapshots"] = config.snapshots
    if config.echo_power_exponent != 1:
        d["echo_power_exponent"] = config.echo_power_exponent
    return d


def load_scenario(path, check: bool = True) -> ScenarioConfig:
    path = Path(path)
    with open(path) as fh:
        d = json.load(fh)
    try:
        config = scenario_from_dict(d, base_dir=path.parent)
    except (KeyError, TypeError) as exc:
        raise ScenarioError([ValidationIssue("schema", f"missing or malformed field: {exc}")]) from exc
    return config.check() if check else config


def dumps_scenario(config: ScenarioConfig, matrix_file: str | None = None) -> str:
    return json.dumps(scenario_to_dict(config, matrix_file), indent=2) + "\n"


def save_scenario(config: ScenarioConfig, path, matrix_file: str | None = None) -> None:
    path = Path(path)
    if config.scalar_sensing_noise is None:
        if matrix_file is None:
            matrix_file = path.stem + "_noise.csv"
        write_matrix_csv(path.parent / matrix_file, config.noise_covariance())
    path.write_text(dumps_scenario(config, matrix_file))


# --- reference layouts -----------------------------------------------------


def symmetric_bistatic(
    n_x: int,
    n_y: int | None = None,
    carrier_hz: float = 28e9,
    depth: float | None = None,
    offset: float = 0.0,
    **kw,
) -> ScenarioConfig:
    """Facing Tx (plane z=0) and Rx (plane z=depth) UPAs, both centered on the
    z-axis, with one target/user collocated at (0, offset, depth/2).

    ``depth`` defaults to a tenth of the Fresnel distance.  Extra keyword
    arguments override ScenarioConfig fields (powers, users, ...).
    """
    n_y = n_x if n_y is None else n_y
    tx = ArraySpec(n_x, n_y, 0.5, (0.0, 0.0, 0.0), "z")
    base = ScenarioConfig(carrier_hz=carrier_hz, tx=tx, rx=tx, targets=(TargetSpec((0.0, 0.0, 1.0)),))
    if depth is None:
        depth = fresnel_distance(base) / 10.0
    rx = replace(tx, center=(0.0, 0.0, depth))
    point = (0.0, float(offset), depth / 2.0)
    fields = dict(
        carrier_hz=carrier_hz,
        tx=tx,
        rx=rx,
        targets=(TargetSpec(point, 1.0 + 0.0j),),
        users=(UserSpec(point, 0.0),),
        total_power=float(dbm_to_watts(10.0)),
        comm_noise_power=float(dbm_to_watts(-50.0)),
        sensing_noise=float(dbm_to_watts(-50.0)),
    )
    fields.update(kw)
    return ScenarioConfig(**fields)


def symmetric_monostatic(n_x: int, n_y: int | None = None, carrier_hz: float = 28e9, distance: float | None = None, **kw) -> ScenarioConfig:
    """Collocated Tx/Rx UPA at the origin, target/user at (0, 0, distance)."""
    n_y = n_x if n_y is None else n_y
    arr = ArraySpec(n_x, n_y, 0.5, (0.0, 0.0, 0.0), "z")
    if distance is None:
        base = ScenarioConfig(carrier_hz=carrier_hz, tx=arr, rx=arr, targets=(TargetSpec((0.0, 0.0, 1.0)),))
        distance = fresnel_distance(base) / 20.0
    point = (0.0, 0.0, float(distance))
    fields = dict(
        carrier_hz=carrier_hz,
        tx=arr,
        rx=arr,
        targets=(TargetSpec(point, 1.0 + 0.0j),),
        users=(UserSpec(point, 0.0),),
        total_power=float(dbm_to_watts(10.0)),
        comm_noise_power=float(dbm_to_watts(-50.0)),
        sensing_noise=float(dbm_to_watts(-50.0)),
    )
    fields.update(kw)
    return ScenarioConfig(**fields)


def multi_target_bistatic(
    n_x: int,
    n_y: int,
    carrier_hz: float,
    depth: float,
    targets,
    users,
    sinr_db: float = 0.0,
    **kw,
) -> ScenarioConfig:
    """Facing Tx/Rx layout with targets/users given as fractions of ``depth``.

    ``targets`` and ``users`` are sequences of (y, z) pairs in units of
    ``depth``; all points lie in the x = 0 plane.
    """
    tx = ArraySpec(n_x, n_y, 0.5, (0.0, 0.0, 0.0), "z")
    rx = replace(tx, center=(0.0, 0.0, depth))
    gamma = float(db_to_linear(sinr_db))
    fields = dict(
        carrier_hz=carrier_hz,
        tx=tx,
        rx=rx,
        targets=tuple(TargetSpec((0.0, y * depth, z * depth), 1.0 + 0.0j) for y, z in targets),
        users=tuple(UserSpec((0.0, y * depth, z * depth), gamma) for y, z in users),
        total_power=float(dbm_to_watts(10.0)),
        comm_noise_power=float(dbm_to_watts(-50.0)),
        sensing_noise=float(dbm_to_watts(-50.0)),
    )
    fields.update(kw)
    return ScenarioConfig(**fields)
