"""Semidefinite programs in a canonical conic form, plus the solver backends.

A :class:`ConicProblem` reads

    minimize    c @ x
    subject to  A @ x == b
                h_i - G_i @ x  in  cone_i      for every cone block i

where each cone is the nonnegative orthant or the real PSD cone.  PSD slacks
are stored in svec layout: the upper triangle stacked column by column with
off-diagonal entries scaled by sqrt(2), so that <svec(X), svec(Y)> equals
trace(X @ Y).

Complex Hermitian variables never reach the backend directly.  A Hermitian
n x n matrix S = X + jY is parametrised by n^2 reals (diag of X, strict upper
triangle of X, strict upper triangle of Y) and constrained through its real
embedding [[X, -Y], [Y, X]].
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import Infeasible, NotHermitian, NumericalLimit

SQRT2 = np.sqrt(2.0)
ZERO_TOL = 1e-14


# --- svec / embedding helpers --------------------------------------------


def svec_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the upper triangle in svec (column-major) order."""
    rows, cols = [], []
    for j in range(n):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def svec(M) -> np.ndarray:
    """Scaled vectorisation of a symmetric matrix (last two axes)."""
    M = np.asarray(M)
    n = M.shape[-1]
    r, c = svec_indices(n)
    out = M[..., r, c].astype(float)
    out[..., r != c] *= SQRT2
    return out


def smat(v, n: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if n is None:
        n = int(round((np.sqrt(8 * v.shape[-1] + 1) - 1) / 2))
    r, c = svec_indices(n)
    M = np.zeros(v.shape[:-1] + (n, n))
    vals = np.where(r != c, v / SQRT2, v)
    M[..., r, c] = vals
    M[..., c, r] = vals
    return M


def hermitian_to_real_embedding(H, tol: float = 1e-10) -> np.ndarray:
    """[[Re H, -Im H], [Im H, Re H]] for a Hermitian H.

    The embedding is PSD iff H is, each eigenvalue of H appears twice, and
    its trace is 2 * trace(H).
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NotHermitian("matrix must be square")
    scale = max(np.abs(H).max(), 1.0) if H.size else 1.0
    if np.abs(H - H.conj().T).max(initial=0.0) > tol * scale:
        raise NotHermitian("matrix is not Hermitian")
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def real_embedding_to_hermitian(E) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    n = E.shape[0] // 2
    return (E[:n, :n] + E[n:, n:]) / 2 + 1j * (E[n:, :n] - E[:n, n:]) / 2


def hermitian_basis(n: int) -> np.ndarray:
    """Real-coefficient basis (n^2, n, n) of the n x n Hermitian matrices.

    Order: diagonal units, then symmetric off-diagonal units, then
    antisymmetric imaginary units (upper triangle, row-major).
    """
    iu, ju = np.triu_indices(n, 1)
    m = len(iu)
    basis = np.zeros((n * n, n, n), dtype=complex)
    basis[np.arange(n), np.arange(n), np.arange(n)] = 1.0
    k = np.arange(m)
    basis[n + k, iu, ju] = 1.0
    basis[n + k, ju, iu] = 1.0
    basis[n + m + k, iu, ju] = 1.0j
    basis[n + m + k, ju, iu] = -1.0j
    return basis


def hermitian_params(H) -> np.ndarray:
    """Inverse of ``sum_i p_i basis_i``."""
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    iu, ju = np.triu_indices(n, 1)
    return np.concatenate([np.diag(H).real, H[iu, ju].real, H[iu, ju].imag])


@dataclass(frozen=True)
class HermitianVar:
    """A Hermitian matrix variable occupying ``n*n`` slots from ``offset``."""

    name: str
    n: int
    offset: int

    @property
    def size(self) -> int:
        return self.n * self.n

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)

    def basis(self) -> np.ndarray:
        return _basis_cache(self.n)

    def form_coeffs(self, a, b) -> np.ndarray:
        """Complex coefficients c with a^H S b = c @ params."""
        a = np.asarray(a, dtype=complex)
        b = np.asarray(b, dtype=complex)
        return np.einsum("i,kij,j->k", a.conj(), self.basis(), b)

    def trace_coeffs(self) -> np.ndarray:
        c = np.zeros(self.size)
        c[: self.n] = 1.0
        return c

    def value(self, x) -> np.ndarray:
        p = np.asarray(x)[self.slice]
        return np.einsum("k,kij->ij", p, self.basis())

    def embedding_terms(self) -> np.ndarray:
        """svec of the real embedding of every basis element, (svec_len, n^2)."""
        emb = np.stack([hermitian_to_real_embedding(B) for B in self.basis()])
        return svec(emb).T


_BASIS = {}


def _basis_cache(n):
    if n not in _BASIS:
        _BASIS[n] = hermitian_basis(n)
        _BASIS[n].setflags(write=False)
    return _BASIS[n]


# --- the problem container -------------------------------------------------


@dataclass(frozen=True)
class ConeBlock:
    kind: str  # "nonneg" or "psd"
    G: np.ndarray
    h: np.ndarray
    order: int
    name: str = ""


@dataclass(frozen=True)
class ConicProblem:
    c: np.ndarray
    cones: tuple
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    variables: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def check(self) -> None:
        n = self.n
        for blk in self.cones:
            if blk.G.shape[1] != n:
                raise ValueError(f"cone {blk.name!r}: G has {blk.G.shape[1]} columns, expected {n}")
            want = blk.order if blk.kind == "nonneg" else blk.order * (blk.order + 1) // 2
            if blk.G.shape[0] != want or blk.h.shape != (want,):
                raise ValueError(f"cone {blk.name!r}: inconsistent dimensions")
        if self.A is not None and (self.A.shape[1] != n or self.A.shape[0] != self.b.shape[0]):
            raise ValueError("equality constraints have inconsistent dimensions")

    def data_norm(self) -> float:
        parts = [np.abs(self.c).max(initial=0.0)]
        for blk in self.cones:
            parts += [np.abs(blk.G).max(initial=0.0), np.abs(blk.h).max(initial=0.0)]
        return float(max(parts))


class ProblemBuilder:
    """Incrementally assemble a :class:`ConicProblem`."""

    def __init__(self):
        self.n = 0
        self.variables = {}
        self._cones = []
        self._eq = []

    def scalar(self, name: str) -> int:
        idx = self.n
        self.variables[name] = slice(idx, idx + 1)
        self.n += 1
        return idx

    def hermitian(self, name: str, n: int) -> HermitianVar:
        var = HermitianVar(name, n, self.n)
        self.variables[name] = var.slice
        self.n += var.size
        return var

    def nonneg(self, rows, rhs, name=""):
        """Rows r with r @ x <= rhs, given as dense (m, n) or list of rows."""
        G = np.atleast_2d(np.asarray(rows, dtype=float))
        self._cones.append(("nonneg", G, np.atleast_1d(np.asarray(rhs, dtype=float)), G.shape[0], name))

    def lmi(self, order: int, terms, const=None, name=""):
        """Constrain const + sum_j x_j M_j to be PSD.

        ``terms`` is a list of (column slice or index array, svec block of
        shape (svec_len, width)) pairs giving svec(M_j) for those columns.
        """
        m = order * (order + 1) // 2
        self._cones.append(("psd", terms, np.zeros(m) if const is None else svec(const), order, name))

    def hermitian_psd(self, var: HermitianVar):
        self.lmi(2 * var.n, [(var.slice, var.embedding_terms())], name=f"{var.name}>=0")

    def equality(self, row, rhs):
        self._eq.append((np.asarray(row, dtype=float), float(rhs)))

    def build(self, c) -> ConicProblem:
        n = self.n
        cones = []
        for kind, data, h, order, name in self._cones:
            if kind == "nonneg":
                G = np.zeros((data.shape[0], n))
                G[:, : data.shape[1]] = data
            else:
                G = np.zeros((h.shape[0], n))
                for cols, block in data:
                    # slack = const + M x  ->  G = -M
                    G[:, cols] -= block
            # round-off dust (e.g. 1e-30 next to O(1) data) upsets equilibration
            G[np.abs(G) < ZERO_TOL * max(np.abs(G).max(initial=0.0), 1.0)] = 0.0
            cones.append(ConeBlock(kind, G, h, order, name))
        A = b = None
        if self._eq:
            A = np.zeros((len(self._eq), n))
            for i, (row, _) in enumerate(self._eq):
                A[i, : row.shape[0]] = row
            b = np.array([rhs for _, rhs in self._eq])
        c_full = np.zeros(n)
        c = np.asarray(c, dtype=float)
        c_full[: c.shape[0]] = c
        prob = ConicProblem(c=c_full, cones=tuple(cones), A=A, b=b, variables=dict(self.variables))
        prob.check()
        return prob


# --- solving -------------------------------------------------------------


@dataclass(frozen=True)
class SolverSettings:
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    max_iters: int = 10000
    psd_eig_floor: float = 1e-9
    backend: str = "clarabel"
    verbose: bool = False
    fallback: bool = True  # retry a stalled solve on the other backend
    accept_tol: float = 1e-6  # stalled solves this close to optimal still count

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol", "max_iters", "psd_eig_floor", "accept_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ConicResult:
    status: str  # optimal | infeasible | numerical_limit
    x: np.ndarray
    z: list  # dual variables per cone block
    y: np.ndarray | None
    objective: float
    iterations: int
    primal_residual: float
    gap: float
    wall_time: float
    backend: str
    raw_status: str = ""
    certificate: np.ndarray | None = None


def _residuals(prob: ConicProblem, x, z, y=None) -> tuple[float, float]:
    """Primal infeasibility (cone-projected) and relative duality gap."""
    worst = 0.0
    pobj = float(prob.c @ x)
    dual_obj = 0.0
    for blk, zi in zip(prob.cones, z):
        s = blk.h - blk.G @ x
        if blk.kind == "nonneg":
            worst = max(worst, float(np.maximum(-s, 0).max(initial=0.0)))
        else:
            w = np.linalg.eigvalsh(smat(s, blk.order))
            worst = max(worst, float(max(-w.min(), 0.0)))
        if zi is not None:
            dual_obj -= float(blk.h @ zi)
    if prob.A is not None:
        worst = max(worst, float(np.abs(prob.A @ x - prob.b).max()))
        if y is not None:
            dual_obj -= float(prob.b @ y)
    gap = abs(pobj - dual_obj)
    return worst, gap


def _close_enough(res: ConicResult, tol: float) -> bool:
    """Independent residual check for iterates the backend gave up on."""
    if not np.all(np.isfinite(res.x)):
        return False
    return res.primal_residual <= tol and res.gap <= tol * max(1.0, abs(res.objective))


def solve(problem: ConicProblem, settings: SolverSettings | None = None, raise_on_failure: bool = True) -> ConicResult:
    """Solve with the configured backend.

    An infeasible problem raises :class:`Infeasible` with the result (and
    its dual certificate) attached; a stalled solve raises
    :class:`NumericalLimit` carrying the best iterate.  Pass
    ``raise_on_failure=False`` to get the result object instead.
    """
    settings = settings or SolverSettings()
    backends = {"clarabel": _solve_clarabel, "cvxopt": _solve_cvxopt}
    backend = backends.get(settings.backend)
    if backend is None:
        raise ValueError(f"unknown backend {settings.backend!r}")
    res = backend(problem, settings)
    if res.status == "numerical_limit" and settings.fallback:
        other = next(name for name in backends if name != settings.backend)
        alt = backends[other](problem, settings)
        if alt.status == "optimal" or alt.primal_residual + alt.gap < res.primal_residual + res.gap:
            alt.raw_status = f"{alt.raw_status} (after {settings.backend}: {res.raw_status})"
            res = alt
    if res.status == "numerical_limit" and _close_enough(res, settings.accept_tol):
        res.status = "optimal"
        res.raw_status += " (accepted at reduced accuracy)"
    if raise_on_failure:
        if res.status == "infeasible":
            raise Infeasible(f"problem is infeasible ({res.raw_status})", report=res)
        if res.status != "optimal":
            raise NumericalLimit(f"solver stopped with status {res.raw_status}", result=res)
    return res


def _stack_cones(prob: ConicProblem):
    blocks_G, blocks_h = [], []
    if prob.A is not None:
        blocks_G.append(prob.A)
        blocks_h.append(prob.b)
    for blk in prob.cones:
        blocks_G.append(blk.G)
        blocks_h.append(blk.h)
    return np.vstack(blocks_G), np.concatenate(blocks_h)


def _solve_clarabel(prob: ConicProblem, settings: SolverSettings) -> ConicResult:
    import clarabel

    G, h = _stack_cones(prob)
    cones = []
    if prob.A is not None:
        cones.append(clarabel.ZeroConeT(prob.A.shape[0]))
    for blk in prob.cones:
        cones.append(clarabel.NonnegativeConeT(blk.order) if blk.kind == "nonneg" else clarabel.PSDTriangleConeT(blk.order))
    opts = clarabel.DefaultSettings()
    opts.verbose = settings.verbose
    opts.max_iter = int(min(settings.max_iters, 2**31 - 1))
    opts.tol_gap_abs = settings.abs_tol
    opts.tol_gap_rel = settings.rel_tol
    opts.tol_feas = settings.abs_tol
    opts.presolve_enable = False
    opts.chordal_decomposition_enable = False
    n = prob.n
    P = sp.csc_matrix((n, n))
    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(P, prob.c, sp.csc_matrix(G), h, cones, opts)
    sol = solver.solve()
    wall = time.perf_counter() - t0
    raw = str(sol.status)
    x = np.asarray(sol.x, dtype=float)
    zall = np.asarray(sol.z, dtype=float)
    off = 0
    y = None
    if prob.A is not None:
        y = zall[: prob.A.shape[0]]
        off = prob.A.shape[0]
    z = []
    for blk in prob.cones:
        m = blk.h.shape[0]
        z.append(zall[off: off + m])
        off += m
    if raw.endswith("Solved") and not raw.endswith("AlmostSolved"):
        status = "optimal"
    elif "PrimalInfeasible" in raw:
        status = "infeasible"
    else:
        status = "numerical_limit"
    pres, gap = _residuals(prob, x, z, y)
    return ConicResult(
        status=status,
        x=x,
        z=z,
        y=y,
        objective=float(prob.c @ x),
        iterations=int(sol.iterations),
        primal_residual=pres,
        gap=gap,
        wall_time=wall,
        backend="clarabel",
        raw_status=raw,
        certificate=zall.copy() if status == "infeasible" else None,
    )


def _svec_to_full_rows(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Map each full column-major entry of an order x order matrix to its
    svec row and the scale applied to it."""
    r, c = svec_indices(order)
    idx = np.empty((order, order), dtype=int)
    idx[r, c] = np.arange(r.shape[0])
    idx[c, r] = np.arange(r.shape[0])
    scale = np.where(np.eye(order, dtype=bool), 1.0, 1.0 / SQRT2)
    return idx.T.ravel(), scale.T.ravel()


def _solve_cvxopt(prob: ConicProblem, settings: SolverSettings) -> ConicResult:
    import cvxopt
    from cvxopt import solvers

    lin = [b for b in prob.cones if b.kind == "nonneg"]
    psd = [b for b in prob.cones if b.kind == "psd"]
    Gs, hs = [], []
    for blk in lin:
        Gs.append(blk.G)
        hs.append(blk.h)
    for blk in psd:
        rows, scale = _svec_to_full_rows(blk.order)
        Gs.append(blk.G[rows] * scale[:, None])
        hs.append(blk.h[rows] * scale)
    G = np.vstack(Gs)
    h = np.concatenate(hs)
    dims = {"l": int(sum(b.order for b in lin)), "q": [], "s": [int(b.order) for b in psd]}
    opts = {
        "show_progress": settings.verbose,
        "abstol": settings.abs_tol,
        "reltol": settings.rel_tol,
        "feastol": settings.abs_tol,
        "maxiters": int(min(settings.max_iters, 500)),
    }
    kw = {}
    if prob.A is not None:
        kw = {"A": cvxopt.matrix(prob.A), "b": cvxopt.matrix(prob.b)}
    t0 = time.perf_counter()
    try:
        sol = solvers.conelp(cvxopt.matrix(prob.c), cvxopt.matrix(G), cvxopt.matrix(h), dims, options=opts, **kw)
    except (ArithmeticError, ValueError) as exc:
        # conelp can break down outright (e.g. a zero scaling update)
        nan = np.full(prob.n, np.nan)
        return ConicResult("numerical_limit", nan, [None] * len(prob.cones), None, np.nan, 0, np.inf, np.inf,
                           time.perf_counter() - t0, "cvxopt", f"breakdown: {exc}")
    wall = time.perf_counter() - t0
    raw = sol["status"]
    x = np.asarray(sol["x"]).ravel() if sol["x"] is not None else np.full(prob.n, np.nan)
    zfull = np.asarray(sol["z"]).ravel() if sol["z"] is not None else None
    z = []
    off = 0
    by_id = {}
    for blk in lin:
        m = blk.order
        by_id[id(blk)] = None if zfull is None else zfull[off: off + m]
        off += m
    for blk in psd:
        m = blk.order * blk.order
        by_id[id(blk)] = None if zfull is None else svec(zfull[off: off + m].reshape(blk.order, blk.order).T)
        off += m
    z = [by_id[id(blk)] for blk in prob.cones]
    status = {"optimal": "optimal", "primal infeasible": "infeasible"}.get(raw, "numerical_limit")
    if status != "infeasible":
        pres, gap = _residuals(prob, x, z)
    else:
        pres, gap = np.inf, np.inf
    return ConicResult(
        status=status,
        x=x,
        z=z,
        y=np.asarray(sol["y"]).ravel() if sol.get("y") is not None else None,
        objective=float(prob.c @ x) if status != "infeasible" else np.inf,
        iterations=int(sol.get("iterations", 0)),
        primal_residual=pres,
        gap=gap,
        wall_time=wall,
        backend="cvxopt",
        raw_status=raw,
        certificate=zfull if status == "infeasible" else None,
    )


def write_sdpa(problem: ConicProblem, path) -> None:
    """Dump in the sparse SDPA format (dual/LMI form) for external solvers.

    Nonnegative blocks become a diagonal block (negative size), PSD blocks
    keep their order.  SDPA reads "minimize c @ x subject to
    sum_i x_i F_i - F_0 >= 0", so F_i = -smat(G[:, i]) and F_0 = -smat(h).
    """
    if problem.A is not None:
        raise ValueError("SDPA export does not support equality constraints")
    lines = [f"{problem.n}", f"{len(problem.cones)}"]
    sizes = [(-blk.order if blk.kind == "nonneg" else blk.order) for blk in problem.cones]
    lines.append(" ".join(str(s) for s in sizes))
    lines.append(" ".join(format(v, ".17g") for v in problem.c))
    for bi, blk in enumerate(problem.cones, start=1):
        cols = [blk.h] + [blk.G[:, i] for i in range(problem.n)]
        for mi, col in enumerate(cols):
            vals = -col
            if blk.kind == "nonneg":
                for i in np.flatnonzero(vals):
                    lines.append(f"{mi} {bi} {i + 1} {i + 1} {format(vals[i], '.17g')}")
            else:
                M = smat(vals, blk.order)
                r, c = np.nonzero(np.triu(M))
                for i, j in zip(r, c):
                    lines.append(f"{mi} {bi} {i + 1} {j + 1} {format(M[i, j], '.17g')}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
