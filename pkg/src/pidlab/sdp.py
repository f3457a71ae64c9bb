"""Dense semidefinite programming with primal-dual certificates.

Solves standard-form problems over real symmetric PSD blocks,

    minimize    sum_b <C_b, X_b>
    subject to  sum_b <A_{i,b}, X_b> = b_i   (i = 1..m),   X_b >= 0,

with a Mehrotra-style predictor-corrector path-following method using
Nesterov-Todd scaling.  Problem sizes here are at most a few hundred real
dimensions, so the Schur complement is assembled densely and factored with
Cholesky.  Everything is deterministic: fixed initialization, no randomized
pivoting, so identical inputs produce identical iterates.

Complex Hermitian problems are handled by :class:`ComplexSdpBuilder`, which
embeds every Hermitian matrix ``H = P + iQ`` as the real symmetric matrix
``[[P, -Q], [Q, P]]`` (doubling traces and eigenvalue multiplicities) and
undoes the doubling when reporting values.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .linalg import hermitize, max_abs

__all__ = [
    "ComplexSdpBuilder",
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "SolveOptions",
    "embed_complex",
    "hermitian_basis",
    "solve",
    "unembed_complex",
]

DIVERGENCE_LIMIT = 1e8


class SdpStatus(Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass(frozen=True)
class SolveOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-7
    max_iter: int = 200
    step_frac: float = 0.98


@dataclass(frozen=True)
class SdpProblem:
    """Block SDP data.  ``constraints`` holds ``(per-block matrices, rhs)`` rows."""

    blocks: tuple[tuple[str, int], ...]
    objective: tuple[np.ndarray, ...]
    constraints: tuple[tuple[tuple[np.ndarray, ...], float], ...]

    def __post_init__(self):
        dims = [d for _, d in self.blocks]
        if len(self.objective) != len(dims):
            raise ValueError("objective must provide one matrix per block")
        for c, (_, d) in zip(self.objective, self.blocks):
            _check_sym(c, d, "objective")
        for row, _ in self.constraints:
            if len(row) != len(dims):
                raise ValueError("constraint row must cover every block")
            for a, (_, d) in zip(row, self.blocks):
                _check_sym(a, d, "constraint")

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)


def _check_sym(a: np.ndarray, dim: int, what: str) -> None:
    if a.shape != (dim, dim):
        raise ValueError(f"{what} matrix shape {a.shape} does not match block dim {dim}")
    if max_abs(a - a.T) > 1e-12 * max(1.0, max_abs(a)):
        raise ValueError(f"{what} matrix has an antisymmetric part")


@dataclass
class SdpSolution:
    status: SdpStatus
    primal_value: float
    dual_value: float
    primal_blocks: list[np.ndarray]
    dual_multipliers: np.ndarray
    dual_slacks: list[np.ndarray]
    gap: float
    iterations: int
    primal_residual: float
    dual_residual: float


def embed_complex(h: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[Re, -Im], [Im, Re]]`` of a Hermitian matrix.

    The embedding is PSD iff the input is, its eigenvalues are the doubled
    multiset of the input's, and traces double.
    """
    h = hermitize(h)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def unembed_complex(x: np.ndarray) -> np.ndarray:
    """Project a ``2n x 2n`` real symmetric matrix back to Hermitian ``n x n``."""
    n2 = x.shape[0]
    if n2 % 2:
        raise ValueError("embedded matrix must have even dimension")
    n = n2 // 2
    p = (x[:n, :n] + x[n:, n:]) / 2
    q = (x[n:, :n] - x[:n, n:]) / 2
    return hermitize(p + 1j * q, tol=1e-8)


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Orthonormal (Frobenius) basis of n x n Hermitian matrices, diagonal first."""
    basis = []
    for k in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[k, k] = 1.0
        basis.append(e)
    s = 1.0 / np.sqrt(2.0)
    for k in range(n):
        for l in range(k + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[k, l] = s
            e[l, k] = s
            basis.append(e)
            f = np.zeros((n, n), dtype=complex)
            f[k, l] = -1j * s
            f[l, k] = 1j * s
            basis.append(f)
    return basis


# ---------------------------------------------------------------------------
# Core interior-point solver
# ---------------------------------------------------------------------------


def _sym(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2


def _max_step(chol_l: np.ndarray, delta: np.ndarray) -> float:
    """Largest alpha with X + alpha*Delta >= 0, given X = L L^T."""
    t = np.linalg.solve(chol_l, delta)
    t = np.linalg.solve(chol_l, t.T).T
    lam = float(np.linalg.eigvalsh(_sym(t))[0])
    if lam >= -1e-13:
        return np.inf
    return 1.0 / (-lam)


def _initial_point(dims, a_stack, b, c_list):
    # primal blocks: identity scaled to roughly satisfy trace-like constraints
    cands = []
    for i in range(len(b)):
        tr = sum(float(np.trace(a_stack[k][i])) for k in range(len(dims)))
        if abs(tr) > 1e-9:
            cands.append(abs(b[i]) / abs(tr))
    xi = float(np.clip(max(cands) if cands else 1.0, 1.0, 1e4))
    eta = float(np.clip(max(max_abs(c) for c in c_list) if c_list else 1.0, 1.0, 1e4))
    x = [xi * np.eye(d) for d in dims]
    s = [eta * np.eye(d) for d in dims]
    y = np.zeros(len(b))
    return x, s, y


def solve(problem: SdpProblem, opts: SolveOptions | None = None) -> SdpSolution:
    """Run the interior-point iteration and return a primal-dual certificate."""
    opts = opts or SolveOptions()
    dims = [d for _, d in problem.blocks]
    nblk = len(dims)
    m = problem.n_constraints
    ntot = sum(dims)
    b = np.array([rhs for _, rhs in problem.constraints], dtype=float)
    c_list = [np.asarray(c, dtype=float) for c in problem.objective]
    # stack constraint matrices per block: a_stack[k] has shape (m, d_k, d_k)
    a_stack = []
    for k in range(nblk):
        mats = [np.asarray(row[k], dtype=float) for row, _ in problem.constraints]
        a_stack.append(np.stack(mats) if mats else np.zeros((0, dims[k], dims[k])))

    if m == 0:
        raise ValueError("problems without equality constraints are not supported")

    def apply_a(xs):
        out = np.zeros(m)
        for k in range(nblk):
            out += np.einsum("ipq,pq->i", a_stack[k], xs[k])
        return out

    def apply_at(y):
        return [np.einsum("ipq,i->pq", a_stack[k], y) for k in range(nblk)]

    x, s, y = _initial_point(dims, a_stack, b, c_list)
    b_scale = 1.0 + float(np.max(np.abs(b)))
    c_scale = 1.0 + max(max_abs(c) for c in c_list)

    status = SdpStatus.NUMERICAL_FAILURE
    it = 0
    pres = dres = np.inf
    for it in range(1, opts.max_iter + 1):
        rp = b - apply_a(x)
        aty = apply_at(y)
        rd = [c_list[k] - aty[k] - s[k] for k in range(nblk)]
        mu = sum(float(np.sum(x[k] * s[k])) for k in range(nblk)) / ntot
        pobj = sum(float(np.sum(c_list[k] * x[k])) for k in range(nblk))
        dobj = float(b @ y)
        pres = float(np.max(np.abs(rp))) / b_scale
        dres = max(max_abs(rd[k]) for k in range(nblk)) / c_scale
        gap_rel = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))

        if pres <= opts.feas_tol and dres <= opts.feas_tol and (
            gap_rel <= opts.gap_tol or mu * ntot <= opts.gap_tol
        ):
            status = SdpStatus.OPTIMAL
            break
        if dobj > DIVERGENCE_LIMIT:
            status = SdpStatus.INFEASIBLE
            break
        if pobj < -DIVERGENCE_LIMIT:
            status = SdpStatus.UNBOUNDED
            break

        # Nesterov-Todd scaling per block: W = G G^T, scaled variable D = diag(sv)
        try:
            g_list, ginv_list, d_list, lx_list, ls_list = [], [], [], [], []
            for k in range(nblk):
                lx = np.linalg.cholesky(x[k])
                ls = np.linalg.cholesky(s[k])
                u, sv, vt = np.linalg.svd(ls.T @ lx)
                sv = np.maximum(sv, 1e-300)
                g = lx @ vt.T * (sv ** -0.5)[None, :]
                ginv = (sv ** 0.5)[:, None] * (vt @ np.linalg.inv(lx))
                g_list.append(g)
                ginv_list.append(ginv)
                d_list.append(sv)
                lx_list.append(lx)
                ls_list.append(ls)
            w_list = [g @ g.T for g in g_list]
        except np.linalg.LinAlgError:
            status = SdpStatus.NUMERICAL_FAILURE
            break

        # Schur complement H[i,j] = sum_b <A_i, W A_j W>
        h = np.zeros((m, m))
        for k in range(nblk):
            t = np.einsum("pq,iqr,rs->ips", w_list[k], a_stack[k], w_list[k], optimize=True)
            h += np.einsum("ipq,jpq->ij", a_stack[k], t, optimize=True)

        h_chol = None
        h_scale = max(np.trace(h) / m, 1e-300)
        for ridge in (1e-14, 1e-12, 1e-10, 1e-8):
            try:
                h_chol = np.linalg.cholesky(h + ridge * h_scale * np.eye(m))
                break
            except np.linalg.LinAlgError:
                continue
        if h_chol is None:
            status = SdpStatus.NUMERICAL_FAILURE
            break

        def solve_h(rhs_vec):
            z = np.linalg.solve(h_chol, rhs_vec)
            return np.linalg.solve(h_chol.T, z)

        def newton_step(rc_scaled):
            """Given scaled complementarity RHS per block, return (dx, dy, ds)."""
            grcg = [g_list[k] @ rc_scaled[k] @ g_list[k].T for k in range(nblk)]
            rhs = rp.copy()
            for k in range(nblk):
                rhs -= np.einsum("ipq,pq->i", a_stack[k], grcg[k])
                wrdw = w_list[k] @ rd[k] @ w_list[k]
                rhs += np.einsum("ipq,pq->i", a_stack[k], wrdw)
            dy = solve_h(rhs)
            ds = [rd[k] - np.einsum("ipq,i->pq", a_stack[k], dy) for k in range(nblk)]
            dx = [
                _sym(grcg[k] - w_list[k] @ ds[k] @ w_list[k]) for k in range(nblk)
            ]
            return dx, dy, ds

        # predictor (affine scaling): Rc = -D in scaled space, divided by L_D
        rc_aff = [np.diag(-d_list[k]) for k in range(nblk)]
        dx_a, dy_a, ds_a = newton_step(rc_aff)
        ap = min([_max_step(lx_list[k], dx_a[k]) for k in range(nblk)] + [1.0])
        ad = min([_max_step(ls_list[k], ds_a[k]) for k in range(nblk)] + [1.0])
        mu_aff = sum(
            float(np.sum((x[k] + ap * dx_a[k]) * (s[k] + ad * ds_a[k])))
            for k in range(nblk)
        ) / ntot
        sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 1e-8, 1.0))

        # corrector: Rc = L_D^{-1}(sigma*mu*I - D^2 - H(dXhat dShat))
        rc = []
        for k in range(nblk):
            d = d_list[k]
            dxh = ginv_list[k] @ dx_a[k] @ ginv_list[k].T
            dsh = g_list[k].T @ ds_a[k] @ g_list[k]
            cross = _sym(dxh @ dsh)
            rhs_mat = sigma * mu * np.eye(dims[k]) - np.diag(d * d) - cross
            denom = (d[:, None] + d[None, :]) / 2
            rc.append(rhs_mat / denom)
        dx, dy, ds = newton_step(rc)
        ap = min([_max_step(lx_list[k], dx[k]) for k in range(nblk)])
        ad = min([_max_step(ls_list[k], ds[k]) for k in range(nblk)])
        ap = min(1.0, opts.step_frac * ap)
        ad = min(1.0, opts.step_frac * ad)
        for k in range(nblk):
            x[k] = _sym(x[k] + ap * dx[k])
            s[k] = _sym(s[k] + ad * ds[k])
        y = y + ad * dy

    pobj = sum(float(np.sum(c_list[k] * x[k])) for k in range(nblk))
    dobj = float(b @ y)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj))
    aty = apply_at(y)
    slacks = [c_list[k] - aty[k] for k in range(nblk)]
    return SdpSolution(
        status=status,
        primal_value=pobj,
        dual_value=dobj,
        primal_blocks=x,
        dual_multipliers=y,
        dual_slacks=slacks,
        gap=gap,
        iterations=it,
        primal_residual=pres,
        dual_residual=dres,
    )


# ---------------------------------------------------------------------------
# Complex Hermitian layer
# ---------------------------------------------------------------------------


class ComplexSdpBuilder:
    """Assemble an SDP over complex Hermitian PSD blocks.

    Matrices are embedded into real symmetric blocks; right-hand sides and
    the reported optimum are rescaled so values refer to the complex problem.
    ``minimize`` is the default sense; pass ``sense="max"`` to flip.
    """

    def __init__(self):
        self._names: list[str] = []
        self._dims: dict[str, int] = {}
        self._obj: dict[str, np.ndarray] = {}
        self._rows: list[tuple[dict[str, np.ndarray], float]] = []
        self._constant = 0.0
        self._sense = 1.0

    def add_block(self, name: str, cdim: int) -> None:
        if name in self._dims:
            raise ValueError(f"duplicate block {name!r}")
        self._names.append(name)
        self._dims[name] = cdim

    def set_objective(
        self, coeffs: dict[str, np.ndarray], constant: float = 0.0, sense: str = "min"
    ) -> None:
        self._obj = {k: hermitize(v) for k, v in coeffs.items()}
        self._constant = constant
        self._sense = -1.0 if sense == "max" else 1.0

    def add_constraint(self, coeffs: dict[str, np.ndarray], rhs: float) -> None:
        self._rows.append(({k: hermitize(v) for k, v in coeffs.items()}, float(rhs)))

    def solve(self, opts: SolveOptions | None = None) -> "ComplexSdpResult":
        blocks = tuple((n, 2 * self._dims[n]) for n in self._names)
        zero = {n: np.zeros((2 * d, 2 * d)) for n, d in self._dims.items()}
        obj = tuple(
            self._sense * embed_complex(self._obj[n]) if n in self._obj else zero[n]
            for n in self._names
        )
        rows = []
        for coeffs, rhs in self._rows:
            row = tuple(
                embed_complex(coeffs[n]) if n in coeffs else zero[n] for n in self._names
            )
            rows.append((row, 2.0 * rhs))
        problem = SdpProblem(blocks=blocks, objective=obj, constraints=tuple(rows))
        sol = solve(problem, opts)
        value = self._sense * sol.primal_value / 2.0 + self._constant
        dual_value = self._sense * sol.dual_value / 2.0 + self._constant
        prim = {
            n: unembed_complex(x) for n, x in zip(self._names, sol.primal_blocks)
        }
        slack = {
            n: unembed_complex(self._sense * z)
            for n, z in zip(self._names, sol.dual_slacks)
        }
        return ComplexSdpResult(
            status=sol.status,
            value=value,
            dual_value=dual_value,
            blocks=prim,
            multipliers=self._sense * sol.dual_multipliers,
            dual_slacks=slack,
            gap=sol.gap,
            iterations=sol.iterations,
            primal_residual=sol.primal_residual,
            dual_residual=sol.dual_residual,
        )

    def constraint_count(self) -> int:
        return len(self._rows)


@dataclass
class ComplexSdpResult:
    status: SdpStatus
    value: float
    dual_value: float
    blocks: dict[str, np.ndarray]
    multipliers: np.ndarray
    dual_slacks: dict[str, np.ndarray]
    gap: float
    iterations: int
    primal_residual: float
    dual_residual: float

    def require_optimal(self, what: str = "SDP") -> "ComplexSdpResult":
        if self.status is not SdpStatus.OPTIMAL:
            raise ArithmeticError(f"{what} did not reach optimality: {self.status.value}")
        return self
