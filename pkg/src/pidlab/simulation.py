"""Applying and composing device transformations, and see-saw score search.

A transformation routes the target's quantum input through a pre-processing
channel into the source device plus a side system, feeds the source's quantum
output and the side system through a post-processing instrument, and wires
all classical data (program, outcome, instrument branch) through stochastic
tables.  Only classical memory crosses the temporal cut, so simple devices
map to simple devices.

Everything here works on Choi tensors with explicit legs; the application of
a transformation is a single contraction, and the same contraction with one
tensor removed yields the score gradient used by the see-saw heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .devices import (
    ClassicalChannel,
    FreeSimulation,
    Instrument,
    Pid,
    SimulationShape,
    rng_from_seed,
    random_free_simulation,
)
from .games import GameSpec, game_value
from .linalg import (
    ChoiMatrix,
    choi_identity,
    choi_of_prepare,
    choi_tensor,
    choi_trace_map,
    link_product,
)
from .sdp import ComplexSdpBuilder, SolveOptions, hermitian_basis

__all__ = [
    "SeesawResult",
    "apply_free_simulation",
    "apply_pmd_simulation",
    "compose_parallel",
    "compose_sequential",
    "mix",
    "reaching_simulation",
    "seesaw_pguess",
]


def _pre_tensor(f: FreeSimulation) -> np.ndarray:
    """Pre-processing Choi with legs [b, c, i, m, j, n] (target in, source in, side)."""
    s = f.shape
    t = f.pre.as_tensor()  # [b, c, out_row, out_col]
    return t.reshape(
        s.target_din, s.target_din, s.source_din, s.side_dim, s.source_din, s.side_dim
    )


def _post_tensor(f: FreeSimulation) -> np.ndarray:
    """Instrument Chois stacked with legs [k, p, m, q, n, u, v]."""
    s = f.shape
    mats = [b.as_tensor() for b in f.post.branches]
    return np.stack(mats).reshape(
        s.n_branches,
        s.source_dout,
        s.side_dim,
        s.source_dout,
        s.side_dim,
        s.target_dout,
        s.target_dout,
    )


def _source_tensor(p: Pid) -> np.ndarray:
    """Device blocks with legs [x, y, i, j, p, q] (program, outcome, in, in, out, out)."""
    t = p.blocks.reshape(
        p.n_programs, p.n_outcomes, p.din, p.dout, p.din, p.dout
    )
    return t.transpose(0, 1, 2, 4, 3, 5)


def _routing_tensor(f: FreeSimulation) -> np.ndarray:
    """Combined classical weight W[y0, y1, x0, x1, k] = sum_l q[y1,x1,l] p[x0,l,y0,k]."""
    return np.einsum("gyl,xlwk->wgxyk", f.q_table(), f.p_table(), optimize=True)


def _check_source(f: FreeSimulation, p: Pid) -> None:
    s = f.shape
    if (
        p.din != s.source_din
        or p.dout != s.source_dout
        or p.n_programs != s.source_programs
        or p.n_outcomes != s.source_outcomes
    ):
        raise ValueError("device does not match the transformation's source shape")


def apply_free_simulation(f: FreeSimulation, p: Pid) -> Pid:
    """Transform a device; the output is always a valid device of the target shape."""
    _check_source(f, p)
    s = f.shape
    mid = np.einsum(
        "bcimjn,xyijpq->xybcpmqn", _pre_tensor(f), _source_tensor(p), optimize=True
    )
    comp = np.einsum("xybcpmqn,kpmqnuv->xykbcuv", mid, _post_tensor(f), optimize=True)
    gamma = np.einsum("wgxyk,xykbcuv->wgbcuv", _routing_tensor(f), comp, optimize=True)
    blocks = gamma.transpose(0, 1, 2, 4, 3, 5).reshape(
        s.target_programs,
        s.target_outcomes,
        s.target_din * s.target_dout,
        s.target_din * s.target_dout,
    )
    return Pid(s.target_din, s.target_dout, blocks)


def apply_pmd_simulation(
    post: Instrument,
    p_cc: ClassicalChannel,
    q_cc: ClassicalChannel,
    m,
):
    """Transform a measurement family through an instrument in the Heisenberg picture.

    The new effects are ``sum q p K_k^adj[M_{x1|x0}]``, with the adjoint taken
    via the Choi transpose identity; the result is a valid measurement family
    on the instrument's input space.
    """
    from .devices import Pmd

    n_x0, n_x1 = m.n_programs, m.n_outcomes
    n_k = post.n_branches
    if post.dout != m.dim:
        raise ValueError("instrument output must match the measurement dimension")
    n_y0 = p_cc.n_in // n_k
    if p_cc.table.shape[0] % n_x0 or p_cc.n_in % n_k:
        raise ValueError("program routing table does not match the index sets")
    n_l = p_cc.table.shape[0] // n_x0
    n_y1 = q_cc.n_out
    if q_cc.n_in != n_x1 * n_l:
        raise ValueError("outcome routing table does not match the index sets")
    p_t = p_cc.table.reshape(n_x0, n_l, n_y0, n_k)
    q_t = q_cc.table.reshape(n_y1, n_x1, n_l)
    kt = np.stack([b.as_tensor() for b in post.branches])  # [k, i, j, u, v]
    # adjoint on effects: K^adj[M][a, b] = sum M[u, w] T[b, a, w, u]
    adj = np.einsum("xyuw,kbawu->kxyab", m.effects, kt, optimize=True)
    weights = np.einsum("gyl,xlwk->wgxyk", q_t, p_t, optimize=True)
    eff = np.einsum("wgxyk,kxyab->wgab", weights, adj, optimize=True)
    return Pmd(eff)


def compose_sequential(f2: FreeSimulation, f1: FreeSimulation) -> FreeSimulation:
    """Transformation equal to applying ``f1`` then ``f2`` (match at f1's target)."""
    s1, s2 = f1.shape, f2.shape
    if (
        s1.target_din != s2.source_din
        or s1.target_dout != s2.source_dout
        or s1.target_programs != s2.source_programs
        or s1.target_outcomes != s2.source_outcomes
    ):
        raise ValueError("shapes do not chain: f1 target differs from f2 source")
    side = s1.side_dim * s2.side_dim
    shape = SimulationShape(
        source_din=s1.source_din,
        source_dout=s1.source_dout,
        source_programs=s1.source_programs,
        source_outcomes=s1.source_outcomes,
        target_din=s2.target_din,
        target_dout=s2.target_dout,
        target_programs=s2.target_programs,
        target_outcomes=s2.target_outcomes,
        side_dim=side,
        n_branches=s1.n_branches * s2.n_branches,
        n_flags=s1.n_flags * s2.n_flags,
    )
    id2 = choi_identity(s2.side_dim)
    pre = link_product(f2.pre, choi_tensor(f1.pre, id2))
    branches = []
    for k1 in range(s1.n_branches):
        for k2 in range(s2.n_branches):
            branches.append(
                link_product(
                    choi_tensor(f1.post.branches[k1], id2), f2.post.branches[k2]
                )
            )
    post = Instrument(tuple(branches))
    p1 = f1.p_table()  # [x0, l1, y0, k1]
    p2 = f2.p_table()  # [y0, l2, z0, k2]
    p_comb = np.einsum("xlyk,yszj->xlszkj", p1, p2)
    p_comb = p_comb.reshape(
        s1.source_programs * s1.n_flags * s2.n_flags,
        s2.target_programs * s1.n_branches * s2.n_branches,
    )
    q1 = f1.q_table()  # [y1, x1, l1]
    q2 = f2.q_table()  # [z1, y1, l2]
    q_comb = np.einsum("zys,yxl->zxls", q2, q1).reshape(
        s2.target_outcomes, s1.source_outcomes * s1.n_flags * s2.n_flags
    )
    return FreeSimulation(
        shape=shape,
        pre=pre,
        post=post,
        p_cc=ClassicalChannel(p_comb),
        q_cc=ClassicalChannel(q_comb),
    )


def _permutation_matrix(dims: tuple[int, ...], perm: tuple[int, ...]) -> np.ndarray:
    """Unitary reordering tensor factors: |i_1..i_k> -> |i_perm(1)..i_perm(k)>."""
    n = int(np.prod(dims))
    mat = np.zeros((n, n))
    out_dims = tuple(dims[p] for p in perm)
    for idx in np.ndindex(*dims):
        new_idx = tuple(idx[p] for p in perm)
        mat[np.ravel_multi_index(new_idx, out_dims), np.ravel_multi_index(idx, dims)] = 1.0
    return mat


def _conjugate_choi_output(j: ChoiMatrix, u: np.ndarray) -> ChoiMatrix:
    mat = np.kron(np.eye(j.din), u) @ j.mat @ np.kron(np.eye(j.din), u).conj().T
    return ChoiMatrix(j.din, j.dout, mat)


def _conjugate_choi_input(j: ChoiMatrix, u: np.ndarray) -> ChoiMatrix:
    a = np.kron(u.T, np.eye(j.dout))
    return ChoiMatrix(j.din, j.dout, a @ j.mat @ a.conj().T)


def compose_parallel(f1: FreeSimulation, f2: FreeSimulation) -> FreeSimulation:
    """Transformation acting on a tensor pair of devices wing by wing.

    Source and target systems pair up as products, with programs and outcomes
    flattened row-major in the same order as :func:`pidlab.devices.tensor_pid`.
    """
    s1, s2 = f1.shape, f2.shape
    shape = SimulationShape(
        source_din=s1.source_din * s2.source_din,
        source_dout=s1.source_dout * s2.source_dout,
        source_programs=s1.source_programs * s2.source_programs,
        source_outcomes=s1.source_outcomes * s2.source_outcomes,
        target_din=s1.target_din * s2.target_din,
        target_dout=s1.target_dout * s2.target_dout,
        target_programs=s1.target_programs * s2.target_programs,
        target_outcomes=s1.target_outcomes * s2.target_outcomes,
        side_dim=s1.side_dim * s2.side_dim,
        n_branches=s1.n_branches * s2.n_branches,
        n_flags=s1.n_flags * s2.n_flags,
    )
    # outputs of pre1 (x) pre2 come out as (A0 D1 A0' D2); reorder to (A0 A0' D1 D2)
    pre_raw = choi_tensor(f1.pre, f2.pre)
    perm_out = _permutation_matrix(
        (s1.source_din, s1.side_dim, s2.source_din, s2.side_dim), (0, 2, 1, 3)
    )
    pre = _conjugate_choi_output(pre_raw, perm_out)
    # post branches expect (A1 D1 A1' D2); incoming order is (A1 A1' D1 D2)
    perm_in = _permutation_matrix(
        (s1.source_dout, s2.source_dout, s1.side_dim, s2.side_dim), (0, 2, 1, 3)
    )
    branches = []
    for k1 in range(s1.n_branches):
        for k2 in range(s2.n_branches):
            raw = choi_tensor(f1.post.branches[k1], f2.post.branches[k2])
            branches.append(_conjugate_choi_input(raw, perm_in))
    post = Instrument(tuple(branches))
    p1 = f1.p_table()
    p2 = f2.p_table()
    p_comb = np.einsum("xlyk,XLYK->xXlLyYkK", p1, p2).reshape(
        shape.source_programs * shape.n_flags,
        shape.target_programs * shape.n_branches,
    )
    q1 = f1.q_table()
    q2 = f2.q_table()
    q_comb = np.einsum("gyl,GYL->gGyYlL", q1, q2).reshape(
        shape.target_outcomes, shape.source_outcomes * shape.n_flags
    )
    return FreeSimulation(
        shape=shape,
        pre=pre,
        post=post,
        p_cc=ClassicalChannel(p_comb),
        q_cc=ClassicalChannel(q_comb),
    )


def mix(simulations: list[FreeSimulation], weights) -> FreeSimulation:
    """Probabilistic mixture realized with a classical flag register.

    The register is prepared alongside the side system with the mixing
    weights, each post-processing branch reads it out, and the flag wiring
    copies it into the classical routing, so the action equals the convex
    combination of the individual actions.
    """
    weights = np.asarray(weights, dtype=float)
    if len(simulations) != len(weights):
        raise ValueError("one weight per transformation required")
    if abs(weights.sum() - 1.0) > 1e-12 or weights.min() < 0:
        raise ValueError("weights must form a probability distribution")
    s0 = simulations[0].shape
    if any(f.shape != s0 for f in simulations):
        raise ValueError("all transformations must share one shape")
    n_i = len(simulations)
    shape = SimulationShape(
        source_din=s0.source_din,
        source_dout=s0.source_dout,
        source_programs=s0.source_programs,
        source_outcomes=s0.source_outcomes,
        target_din=s0.target_din,
        target_dout=s0.target_dout,
        target_programs=s0.target_programs,
        target_outcomes=s0.target_outcomes,
        side_dim=s0.side_dim * n_i,
        n_branches=s0.n_branches * n_i,
        n_flags=s0.n_flags * n_i,
    )
    # pre: sum_i w_i F_i (x) |i><i| on the register
    pre_mat = sum(
        w * choi_tensor(f.pre, choi_of_prepare(_basis_state(n_i, i))).mat
        for i, (f, w) in enumerate(zip(simulations, weights))
    )
    pre = ChoiMatrix(s0.target_din, s0.source_din * shape.side_dim, pre_mat)
    id_ad = choi_identity(s0.source_dout * s0.side_dim)
    branches = []
    for k in range(s0.n_branches):
        for i in range(n_i):
            compress = ChoiMatrix(n_i, 1, _basis_state(n_i, i))
            reader = choi_tensor(id_ad, compress)
            branches.append(link_product(reader, simulations[i].post.branches[k]))
    post = Instrument(tuple(branches))
    p_comb = np.zeros(
        (
            s0.source_programs,
            s0.n_flags,
            n_i,
            s0.target_programs,
            s0.n_branches,
            n_i,
        )
    )
    for i, f in enumerate(simulations):
        p_comb[:, :, i, :, :, i] = f.p_table()
    p_comb = p_comb.reshape(
        shape.source_programs * shape.n_flags,
        shape.target_programs * shape.n_branches,
    )
    q_comb = np.zeros((s0.target_outcomes, s0.source_outcomes, s0.n_flags, n_i))
    for i, f in enumerate(simulations):
        q_comb[:, :, :, i] = f.q_table()
    q_comb = q_comb.reshape(shape.target_outcomes, shape.source_outcomes * shape.n_flags)
    return FreeSimulation(
        shape=shape,
        pre=pre,
        post=post,
        p_cc=ClassicalChannel(p_comb),
        q_cc=ClassicalChannel(q_comb),
    )


def _basis_state(d: int, i: int) -> np.ndarray:
    s = np.zeros((d, d), dtype=complex)
    s[i, i] = 1.0
    return s


def reaching_simulation(
    source: Pid, mother: Instrument, table: np.ndarray
) -> FreeSimulation:
    """Transformation sending any device with the given source shape to a simple target.

    The target is ``sum_g table[y1, y0, g] branch_g``.  The pre-processing
    parks the target input in the side system and feeds a fixed state to the
    source; the post-processing discards the source output and runs the
    mother instrument on the side system; the routing plays program 0 and
    relays the branch outcome through the flag.
    """
    table = np.asarray(table, dtype=float)
    n_y1, n_y0, n_g = table.shape
    if n_g != mother.n_branches:
        raise ValueError("table branch axis does not match the mother instrument")
    shape = SimulationShape(
        source_din=source.din,
        source_dout=source.dout,
        source_programs=source.n_programs,
        source_outcomes=source.n_outcomes,
        target_din=mother.din,
        target_dout=mother.dout,
        target_programs=n_y0,
        target_outcomes=n_y1,
        side_dim=mother.din,
        n_branches=n_g,
        n_flags=n_y1,
    )
    fixed = np.zeros((source.din, source.din), dtype=complex)
    fixed[0, 0] = 1.0
    pre = choi_tensor(choi_of_prepare(fixed), choi_identity(mother.din))
    discard = choi_tensor(choi_trace_map(source.dout), choi_identity(mother.din))
    post = Instrument(tuple(link_product(discard, b) for b in mother.branches))
    p_comb = np.zeros((source.n_programs, n_y1, n_y0, n_g))
    p_comb[0] = table.transpose(0, 1, 2)  # [l = y1, y0, g]
    p_comb = p_comb.reshape(source.n_programs * n_y1, n_y0 * n_g)
    q_comb = np.zeros((n_y1, source.n_outcomes, n_y1))
    for y1 in range(n_y1):
        q_comb[y1, :, y1] = 1.0
    q_comb = q_comb.reshape(n_y1, source.n_outcomes * n_y1)
    return FreeSimulation(
        shape=shape,
        pre=pre,
        post=post,
        p_cc=ClassicalChannel(p_comb),
        q_cc=ClassicalChannel(q_comb),
    )


# ---------------------------------------------------------------------------
# See-saw search for game scores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeesawResult:
    value: float
    simulation: FreeSimulation
    restarts_used: int


def _score_tensor(g: GameSpec) -> np.ndarray:
    """S6 with value = sum_{w,g,...} S6 * Gamma6 over matching legs."""
    t = g.effects.reshape(g.n_m, g.n_n, g.d_ref, g.dout, g.d_ref, g.dout)
    # value = (1/d) sum_{w,g} Tr[M J] with Gamma6[w,g,b,c,u,v] = J[(b,u),(c,v)],
    # so the elementwise pairing tensor is S6[w,g,b,c,u,v] = M[(c,v),(b,u)] / d
    return t.transpose(0, 1, 4, 2, 5, 3) / g.d_ref


def _seesaw_value_and_grads(p: Pid, g: GameSpec, f: FreeSimulation):
    s6 = _score_tensor(g)  # S6[w,g,b,c,u,v] pairing Gamma6[w,g,b,c,u,v]
    ft = _pre_tensor(f)
    lt = _source_tensor(p)
    kt = _post_tensor(f)
    wt = _routing_tensor(f)
    common = (s6, wt, ft, lt, kt)
    value = float(
        np.real(
            np.einsum(
                "wgbcuv,wgxyk,bcimjn,xyijpq,kpmqnuv->",
                *common,
                optimize=True,
            )
        )
    )
    grad_f = np.einsum(
        "wgbcuv,wgxyk,xyijpq,kpmqnuv->bcimjn", s6, wt, lt, kt, optimize=True
    )
    grad_k = np.einsum(
        "wgbcuv,wgxyk,bcimjn,xyijpq->kpmqnuv", s6, wt, ft, lt, optimize=True
    )
    grad_w = np.einsum(
        "wgbcuv,bcimjn,xyijpq,kpmqnuv->wgxyk", s6, ft, lt, kt, optimize=True
    )
    return value, grad_f, grad_k, grad_w


def _channel_sdp(z: np.ndarray, din: int, dout: int, opts: SolveOptions) -> np.ndarray:
    """Maximize Tr[Z J] over Choi matrices of channels din -> dout."""
    builder = ComplexSdpBuilder()
    d = din * dout
    builder.add_block("j", d)
    builder.set_objective({"j": z}, sense="max")
    eye_out = np.eye(dout, dtype=complex)
    for h in hermitian_basis(din):
        builder.add_constraint({"j": np.kron(h, eye_out)}, float(np.real(np.trace(h))))
    res = builder.solve(opts).require_optimal("channel step")
    return res.blocks["j"]


def _instrument_sdp(
    zs: list[np.ndarray], din: int, dout: int, opts: SolveOptions
) -> list[np.ndarray]:
    """Maximize sum_k Tr[Z_k J_k] over instruments din -> dout."""
    builder = ComplexSdpBuilder()
    d = din * dout
    for k in range(len(zs)):
        builder.add_block(f"j{k}", d)
    builder.set_objective({f"j{k}": z for k, z in enumerate(zs)}, sense="max")
    eye_out = np.eye(dout, dtype=complex)
    for h in hermitian_basis(din):
        builder.add_constraint(
            {f"j{k}": np.kron(h, eye_out) for k in range(len(zs))},
            float(np.real(np.trace(h))),
        )
    res = builder.solve(opts).require_optimal("instrument step")
    return [res.blocks[f"j{k}"] for k in range(len(zs))]


def _clean_table(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, None)
    sums = t.sum(axis=0, keepdims=True)
    sums[sums <= 0] = 1.0
    return t / sums


def seesaw_pguess(
    p: Pid,
    game: GameSpec,
    restarts: int = 8,
    iters: int = 50,
    seed: int = 0,
    side_dim: int | None = None,
    n_branches: int = 2,
    n_flags: int | None = None,
    opts: SolveOptions | None = None,
) -> SeesawResult:
    """Alternating lower-bound search for the best freely-reachable game score.

    Fixing the routing tables, each quantum part is the solution of a
    channel- or instrument-constrained SDP on its linear score operator;
    fixing the quantum parts, each routing column is an argmax.  The value is
    nondecreasing over iterations and every iterate is a genuine
    transformation, so the result is always a valid lower bound.
    """
    opts = opts or SolveOptions(feas_tol=1e-8, gap_tol=1e-8)
    side = side_dim if side_dim is not None else p.din * p.dout
    flags = n_flags if n_flags is not None else game.n_n
    shape = SimulationShape(
        source_din=p.din,
        source_dout=p.dout,
        source_programs=p.n_programs,
        source_outcomes=p.n_outcomes,
        target_din=game.d_ref,
        target_dout=game.dout,
        target_programs=game.n_m,
        target_outcomes=game.n_n,
        side_dim=side,
        n_branches=n_branches,
        n_flags=flags,
    )
    rng = rng_from_seed(seed)
    best_value = -np.inf
    best_sim = None
    for restart in range(restarts):
        f = random_free_simulation(shape, seed=int(rng.integers(2**62)))
        value = -np.inf
        for _ in range(iters):
            _, grad_f, grad_k, grad_w = _seesaw_value_and_grads(p, game, f)
            # routing updates: per-column argmax on the affine score
            pt = f.p_table()
            qt = f.q_table()
            coef_q = np.einsum("wgxyk,xlwk->gyl", grad_w, pt, optimize=True)
            new_q = np.zeros_like(qt)
            idx = np.argmax(coef_q, axis=0)
            for y in range(shape.source_outcomes):
                for l in range(shape.n_flags):
                    new_q[idx[y, l], y, l] = 1.0
            f = _replace_tables(f, q_t=new_q)
            coef_p = np.einsum("wgxyk,gyl->xlwk", grad_w, f.q_table(), optimize=True)
            new_p = np.zeros_like(pt)
            flat = coef_p.reshape(shape.source_programs * shape.n_flags, -1)
            arg = np.argmax(flat, axis=0)
            for col, row in enumerate(arg):
                new_p.reshape(shape.source_programs * shape.n_flags, -1)[row, col] = 1.0
            f = _replace_tables(f, p_t=new_p)
            # quantum updates
            _, grad_f, grad_k, _ = _seesaw_value_and_grads(p, game, f)
            zf = _grad_to_score_matrix_pre(grad_f, shape)
            j_pre = _channel_sdp(zf, shape.target_din, shape.source_din * side, opts)
            f = _replace_pre(f, j_pre)
            _, _, grad_k, _ = _seesaw_value_and_grads(p, game, f)
            zks = _grad_to_score_matrices_post(grad_k, shape)
            jks = _instrument_sdp(zks, shape.source_dout * side, shape.target_dout, opts)
            f = _replace_post(f, jks)
            new_value = game_value(game, apply_free_simulation(f, p))
            if new_value <= value + 1e-8:
                value = max(value, new_value)
                break
            value = new_value
        if value > best_value:
            best_value = value
            best_sim = f
    assert best_sim is not None
    achieved = game_value(game, apply_free_simulation(best_sim, p))
    return SeesawResult(value=achieved, simulation=best_sim, restarts_used=restarts)


def _grad_to_score_matrix_pre(grad_f: np.ndarray, s: SimulationShape) -> np.ndarray:
    din = s.target_din
    dmid = s.source_din * s.side_dim
    # grad[b, c, i, m, j, n] pairs F6[b,c,i,m,j,n] = J[(b,(i,m)), (c,(j,n))]
    zmat = grad_f.transpose(1, 4, 5, 0, 2, 3).reshape(din * dmid, din * dmid)
    return (zmat + zmat.conj().T) / 2


def _grad_to_score_matrices_post(grad_k: np.ndarray, s: SimulationShape) -> list[np.ndarray]:
    dmid = s.source_dout * s.side_dim
    dout = s.target_dout
    out = []
    for k in range(s.n_branches):
        z = grad_k[k]  # [p, m, q, n, u, v] pairs J[((p,m),u), ((q,n),v)]
        zmat = z.transpose(2, 3, 5, 0, 1, 4).reshape(dmid * dout, dmid * dout)
        out.append((zmat + zmat.conj().T) / 2)
    return out


def _replace_tables(
    f: FreeSimulation, p_t: np.ndarray | None = None, q_t: np.ndarray | None = None
) -> FreeSimulation:
    s = f.shape
    p_cc = f.p_cc
    q_cc = f.q_cc
    if p_t is not None:
        p_cc = ClassicalChannel(
            _clean_table(
                p_t.reshape(
                    s.source_programs * s.n_flags, s.target_programs * s.n_branches
                )
            )
        )
    if q_t is not None:
        q_cc = ClassicalChannel(
            _clean_table(q_t.reshape(s.target_outcomes, s.source_outcomes * s.n_flags))
        )
    return FreeSimulation(shape=s, pre=f.pre, post=f.post, p_cc=p_cc, q_cc=q_cc)


def _replace_pre(f: FreeSimulation, j_pre: np.ndarray) -> FreeSimulation:
    s = f.shape
    pre = ChoiMatrix(s.target_din, s.source_din * s.side_dim, j_pre)
    return FreeSimulation(shape=s, pre=pre, post=f.post, p_cc=f.p_cc, q_cc=f.q_cc)


def _replace_post(f: FreeSimulation, jks: list[np.ndarray]) -> FreeSimulation:
    s = f.shape
    din = s.source_dout * s.side_dim
    post = Instrument(tuple(ChoiMatrix(din, s.target_dout, j) for j in jks))
    return FreeSimulation(shape=s, pre=f.pre, post=post, p_cc=f.p_cc, q_cc=f.q_cc)
