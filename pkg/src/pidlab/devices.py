"""Device families: programmable instruments and measurements, and their samplers.

A programmable instrument device (Pid) is a classically indexed family of CP
maps, non-signaling from the classical program to the quantum output: the
blocks of every program sum to one and the same channel.  Programmable
measurement devices (Pmd), instruments, POVMs, classical channels, and the
structured pre/post/side-processing tuples used to transform devices are
defined here together with seeded random samplers for property tests.

All samplers use the counter-based Philox generator, so a seed pins the
output bit-for-bit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    ChoiMatrix,
    choi_from_kraus,
    choi_identity,
    choi_tensor,
    max_abs,
    min_eig,
    partial_trace,
    trace_norm,
)

__all__ = [
    "ClassicalChannel",
    "FreeSimulation",
    "Instrument",
    "Pid",
    "PidValidationReport",
    "Pmd",
    "Povm",
    "SimplePidSample",
    "SimulationShape",
    "identity_free_simulation",
    "pad_pid_outcomes",
    "pid_from_pmd",
    "product_strategy_weights",
    "random_channel_choi",
    "random_free_simulation",
    "random_instrument",
    "random_isometry",
    "random_pid",
    "random_pmd",
    "random_povm",
    "random_simple_pid",
    "random_state",
    "random_stochastic",
    "rng_from_seed",
    "simple_pid_from_mixture",
    "steer",
    "tensor_pid",
    "validate_pid",
]

DEFAULT_TOL = 1e-8


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


# ---------------------------------------------------------------------------
# Device types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pid:
    """Family of CP-map Choi blocks indexed ``(program, outcome)``.

    ``blocks`` has shape ``(n_programs, n_outcomes, din*dout, din*dout)``.
    Construction only checks shapes and Hermiticity; use :func:`validate_pid`
    for the CP / non-signaling / marginal-TP diagnostics.
    """

    din: int
    dout: int
    blocks: np.ndarray = field(repr=False)

    def __post_init__(self):
        blocks = np.asarray(self.blocks, dtype=complex)
        if blocks.ndim != 4:
            raise ValueError("blocks must be a 4-d array (program, outcome, row, col)")
        d = self.din * self.dout
        if blocks.shape[2:] != (d, d):
            raise ValueError(
                f"block dimension {blocks.shape[2:]} does not match din*dout = {d}"
            )
        blocks = (blocks + blocks.conj().transpose(0, 1, 3, 2)) / 2
        blocks.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_programs(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.blocks.shape[1]

    @property
    def block_dim(self) -> int:
        return self.din * self.dout

    def choi(self, x0: int, x1: int) -> ChoiMatrix:
        return ChoiMatrix(self.din, self.dout, self.blocks[x0, x1])

    def marginal(self, x0: int = 0) -> np.ndarray:
        """Choi matrix of the coarse-grained channel for program ``x0``."""
        return self.blocks[x0].sum(axis=0)

    def is_assemblage(self) -> bool:
        return self.din == 1


@dataclass(frozen=True)
class Pmd:
    """Family of POVM effects indexed ``(program, outcome)`` on one system."""

    effects: np.ndarray = field(repr=False)

    def __post_init__(self):
        eff = np.asarray(self.effects, dtype=complex)
        if eff.ndim != 4 or eff.shape[2] != eff.shape[3]:
            raise ValueError("effects must have shape (programs, outcomes, d, d)")
        eff = (eff + eff.conj().transpose(0, 1, 3, 2)) / 2
        eff.setflags(write=False)
        object.__setattr__(self, "effects", eff)

    @property
    def n_programs(self) -> int:
        return self.effects.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[1]

    @property
    def dim(self) -> int:
        return self.effects.shape[2]

    def cp_defect(self) -> float:
        return max(
            0.0,
            max(-min_eig(self.effects[x0, x1]) for x0 in range(self.n_programs)
                for x1 in range(self.n_outcomes)),
        )

    def completeness_defect(self) -> float:
        eye = np.eye(self.dim)
        return max(
            max_abs(self.effects[x0].sum(axis=0) - eye) for x0 in range(self.n_programs)
        )

    def is_valid(self, tol: float = 1e-9) -> bool:
        return self.cp_defect() <= tol and self.completeness_defect() <= tol

    def transpose(self) -> "Pmd":
        return Pmd(self.effects.transpose(0, 1, 3, 2))


@dataclass(frozen=True)
class Povm:
    """Measurement effects on one system; ``factor_dims`` declares a tensor split."""

    effects: np.ndarray = field(repr=False)
    factor_dims: tuple[int, ...] | None = None

    def __post_init__(self):
        eff = np.asarray(self.effects, dtype=complex)
        if eff.ndim != 3 or eff.shape[1] != eff.shape[2]:
            raise ValueError("effects must have shape (outcomes, d, d)")
        eff = (eff + eff.conj().transpose(0, 2, 1)) / 2
        eff.setflags(write=False)
        object.__setattr__(self, "effects", eff)
        if self.factor_dims is not None:
            if int(np.prod(self.factor_dims)) != eff.shape[1]:
                raise ValueError("factor_dims do not multiply to the effect dimension")

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[0]

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    def cp_defect(self) -> float:
        return max(0.0, max(-min_eig(e) for e in self.effects))

    def completeness_defect(self) -> float:
        return max_abs(self.effects.sum(axis=0) - np.eye(self.dim))

    def is_valid(self, tol: float = 1e-9) -> bool:
        return self.cp_defect() <= tol and self.completeness_defect() <= tol


@dataclass(frozen=True)
class Instrument:
    """CP branches with a trace-preserving sum."""

    branches: tuple[ChoiMatrix, ...]

    def __post_init__(self):
        if not self.branches:
            raise ValueError("instrument needs at least one branch")
        din, dout = self.branches[0].din, self.branches[0].dout
        if any(b.din != din or b.dout != dout for b in self.branches):
            raise ValueError("all branches must share din/dout")
        object.__setattr__(self, "branches", tuple(self.branches))

    @property
    def din(self) -> int:
        return self.branches[0].din

    @property
    def dout(self) -> int:
        return self.branches[0].dout

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    def total(self) -> np.ndarray:
        return sum(b.mat for b in self.branches)

    def cp_defect(self) -> float:
        return max(0.0, max(-min_eig(b.mat) for b in self.branches))

    def tp_defect(self) -> float:
        marg = partial_trace(self.total(), (self.din, self.dout), keep=(0,))
        return max_abs(marg - np.eye(self.din))

    def is_valid(self, tol: float = 1e-9) -> bool:
        return self.cp_defect() <= tol and self.tp_defect() <= tol


@dataclass(frozen=True)
class ClassicalChannel:
    """Conditional probability table ``table[out, in]``; columns sum to one."""

    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 2:
            raise ValueError("table must be 2-d (out, in)")
        if t.size and t.min() < -1e-12:
            raise ValueError("negative conditional probability")
        colsums = t.sum(axis=0)
        if t.size and max_abs(colsums - 1.0) > 1e-12:
            raise ValueError("columns must sum to one")
        t = np.clip(t, 0.0, None)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def n_out(self) -> int:
        return self.table.shape[0]

    @property
    def n_in(self) -> int:
        return self.table.shape[1]

    @staticmethod
    def deterministic(mapping: list[int] | tuple[int, ...], n_out: int) -> "ClassicalChannel":
        t = np.zeros((n_out, len(mapping)))
        for i, o in enumerate(mapping):
            t[o, i] = 1.0
        return ClassicalChannel(t)


@dataclass(frozen=True)
class SimulationShape:
    """Index sets and dimensions of a device transformation."""

    source_din: int
    source_dout: int
    source_programs: int
    source_outcomes: int
    target_din: int
    target_dout: int
    target_programs: int
    target_outcomes: int
    side_dim: int = 1
    n_branches: int = 1
    n_flags: int = 1


@dataclass(frozen=True)
class FreeSimulation:
    """Pre/post/side processing connected only through classical memory.

    ``pre`` maps the target input to (source input (x) side system), ``post``
    is an instrument from (source output (x) side system) to the target
    output, ``p_cc`` routes ``(target program, branch) -> (source program,
    flag)`` and ``q_cc`` routes ``(source outcome, flag) -> target outcome``.
    """

    shape: SimulationShape
    pre: ChoiMatrix
    post: Instrument
    p_cc: ClassicalChannel
    q_cc: ClassicalChannel

    def __post_init__(self):
        s = self.shape
        if self.pre.din != s.target_din or self.pre.dout != s.source_din * s.side_dim:
            raise ValueError("pre-processing channel dimensions do not match shape")
        if (
            self.post.din != s.source_dout * s.side_dim
            or self.post.dout != s.target_dout
            or self.post.n_branches != s.n_branches
        ):
            raise ValueError("post-processing instrument does not match shape")
        if self.p_cc.table.shape != (
            s.source_programs * s.n_flags,
            s.target_programs * s.n_branches,
        ):
            raise ValueError("program routing table does not match shape")
        if self.q_cc.table.shape != (
            s.target_outcomes,
            s.source_outcomes * s.n_flags,
        ):
            raise ValueError("outcome routing table does not match shape")

    def p_table(self) -> np.ndarray:
        """Routing table reshaped to ``p[x0, l, y0, k]``."""
        s = self.shape
        return self.p_cc.table.reshape(
            s.source_programs, s.n_flags, s.target_programs, s.n_branches
        )

    def q_table(self) -> np.ndarray:
        """Routing table reshaped to ``q[y1, x1, l]``."""
        s = self.shape
        return self.q_cc.table.reshape(s.target_outcomes, s.source_outcomes, s.n_flags)

    def is_valid(self, tol: float = 1e-9) -> bool:
        return (
            self.pre.is_cp(tol)
            and self.pre.is_tp(tol)
            and self.post.cp_defect() <= tol
            and self.post.tp_defect() <= tol
        )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PidValidationReport:
    cp_defect: float
    nonsignaling_defect: float
    tp_defect: float

    def max_defect(self) -> float:
        return max(self.cp_defect, self.nonsignaling_defect, self.tp_defect)

    def ok(self, tol: float = DEFAULT_TOL) -> bool:
        return self.max_defect() <= tol


def validate_pid(p: Pid) -> PidValidationReport:
    """Diagnostic defects: CP per block, non-signaling across programs, TP marginal.

    The non-signaling defect is the largest trace-norm distance between the
    coarse-grained channels of two programs; the other defects are the most
    negative block eigenvalue and the deviation of the marginal from identity.
    """
    cp = max(
        0.0,
        max(
            -min_eig(p.blocks[x0, x1])
            for x0 in range(p.n_programs)
            for x1 in range(p.n_outcomes)
        ),
    )
    margs = [p.marginal(x0) for x0 in range(p.n_programs)]
    ns = 0.0
    for a in range(len(margs)):
        for b in range(a + 1, len(margs)):
            ns = max(ns, trace_norm(margs[a] - margs[b]))
    avg = sum(margs) / len(margs)
    tp = max_abs(partial_trace(avg, (p.din, p.dout), keep=(0,)) - np.eye(p.din))
    return PidValidationReport(cp_defect=cp, nonsignaling_defect=ns, tp_defect=tp)


def assert_valid_pid(p: Pid, tol: float = DEFAULT_TOL, what: str = "pid") -> None:
    report = validate_pid(p)
    if not report.ok(tol):
        raise ValueError(f"invalid {what}: {report}")


# ---------------------------------------------------------------------------
# Steering and conversions
# ---------------------------------------------------------------------------


def steer(e: ChoiMatrix, m: Pmd, env_dim: int | None = None) -> Pid:
    """Device induced on the retained wing of a broadcast channel.

    ``e`` is the Choi matrix of a channel ``A0 -> A1 (x) E`` with the
    environment factor last; measuring ``E`` with the effects of ``m`` leaves
    the block family ``Tr_E[(1 (x) M_{x1|x0}) E[.]]`` on ``A0 -> A1``.
    """
    d_env = env_dim if env_dim is not None else m.dim
    if d_env != m.dim:
        raise ValueError(f"environment dim {d_env} does not match measurement dim {m.dim}")
    if e.dout % d_env:
        raise ValueError(
            f"broadcast output dim {e.dout} has no factor matching environment {d_env}"
        )
    dout = e.dout // d_env
    t = e.mat.reshape(e.din, dout, d_env, e.din, dout, d_env)
    blocks = np.einsum(
        "iaejbf,xyfe->xyiajb", t, m.effects, optimize=True
    ).reshape(m.n_programs, m.n_outcomes, e.din * dout, e.din * dout)
    return Pid(e.din, dout, blocks)


def pid_from_pmd(m: Pmd) -> Pid:
    """View a measurement family as an instrument family with trivial quantum output."""
    blocks = m.effects.transpose(0, 1, 3, 2)[:, :, :, :]  # Choi of rho -> Tr[M rho] is M^T
    return Pid(m.dim, 1, blocks)


def tensor_pid(a: Pid, b: Pid) -> Pid:
    """Parallel composition; programs and outcomes pair up row-major."""
    blocks = np.empty(
        (
            a.n_programs * b.n_programs,
            a.n_outcomes * b.n_outcomes,
            a.block_dim * b.block_dim,
            a.block_dim * b.block_dim,
        ),
        dtype=complex,
    )
    for (xa, xb) in itertools.product(range(a.n_programs), range(b.n_programs)):
        for (ya, yb) in itertools.product(range(a.n_outcomes), range(b.n_outcomes)):
            j = choi_tensor(a.choi(xa, ya), b.choi(xb, yb))
            blocks[xa * b.n_programs + xb, ya * b.n_outcomes + yb] = j.mat
    return Pid(a.din * b.din, a.dout * b.dout, blocks)


def pad_pid_outcomes(p: Pid, n_outcomes: int) -> Pid:
    """Extend the outcome set with zero blocks (valid and non-signaling)."""
    if n_outcomes < p.n_outcomes:
        raise ValueError("cannot shrink the outcome set")
    blocks = np.zeros(
        (p.n_programs, n_outcomes, p.block_dim, p.block_dim), dtype=complex
    )
    blocks[:, : p.n_outcomes] = p.blocks
    return Pid(p.din, p.dout, blocks)


def simple_pid_from_mixture(mother: Instrument, table: np.ndarray) -> Pid:
    """Build ``sum_g table[x1, x0, g] * branch_g`` from a mother instrument."""
    table = np.asarray(table, dtype=float)
    n_x1, n_x0, n_g = table.shape
    if n_g != mother.n_branches:
        raise ValueError("table branch axis does not match the instrument")
    if max_abs(table.sum(axis=0) - 1.0) > 1e-12 or table.min() < -1e-12:
        raise ValueError("table must be a conditional distribution over outcomes")
    branch_mats = np.stack([b.mat for b in mother.branches])
    blocks = np.einsum("yxg,gpq->xypq", table, branch_mats)
    return Pid(mother.din, mother.dout, blocks)


def product_strategy_weights(table: np.ndarray) -> np.ndarray:
    """Decompose a program-indexed outcome distribution into deterministic responses.

    ``table[x1, x0]`` is a distribution over outcomes per program; the result
    ``w`` is indexed by the flattened response function (outcome per program,
    row-major over programs) and satisfies
    ``sum_{f : f(x0) = x1} w[f] = table[x1, x0]`` via the product measure.
    """
    table = np.asarray(table, dtype=float)
    n_x1, n_x0 = table.shape
    w = np.ones(1)
    for x0 in range(n_x0):
        w = np.einsum("f,a->fa", w, table[:, x0]).reshape(-1)
    return w


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def _complex_gaussian(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_isometry(rng: np.random.Generator, d_from: int, d_to: int) -> np.ndarray:
    """Haar-random isometry via QR with a deterministic phase fix."""
    if d_to < d_from:
        raise ValueError("an isometry needs d_to >= d_from")
    g = _complex_gaussian(rng, d_to, d_from)
    q, r = np.linalg.qr(g)
    diag = np.diag(r)
    phases = diag / np.abs(diag)
    return q * phases.conj()[None, :]


def random_state(rng: np.random.Generator, d: int, rank: int | None = None) -> np.ndarray:
    a = _complex_gaussian(rng, d, rank or d)
    w = a @ a.conj().T
    return w / np.trace(w).real


def random_povm(rng: np.random.Generator, d: int, n_outcomes: int) -> Povm:
    """Generic full-rank effects from normalized Wishart matrices."""
    ws = np.stack([_complex_gaussian(rng, d, d) for _ in range(n_outcomes)])
    ws = np.einsum("kij,klj->kil", ws, ws.conj())
    total = ws.sum(axis=0)
    vals, vecs = np.linalg.eigh(total)
    inv_sqrt = (vecs * vals**-0.5) @ vecs.conj().T
    effects = np.einsum("ij,kjl,lm->kim", inv_sqrt, ws, inv_sqrt)
    return Povm(effects)


def random_pmd(rng: np.random.Generator, d: int, n_programs: int, n_outcomes: int) -> Pmd:
    effects = np.stack(
        [random_povm(rng, d, n_outcomes).effects for _ in range(n_programs)]
    )
    return Pmd(effects)


def random_channel_choi(
    rng: np.random.Generator, din: int, dout: int, env_dim: int | None = None
) -> ChoiMatrix:
    """Random channel via a Haar isometry into an environment traced out afterwards."""
    env = env_dim if env_dim is not None else din * dout
    v = random_isometry(rng, din, dout * env)
    kraus = [v.reshape(dout, env, din)[:, e, :] for e in range(env)]
    return choi_from_kraus(kraus)


def random_instrument(
    rng: np.random.Generator,
    din: int,
    dout: int,
    n_branches: int,
    env_per_branch: int | None = None,
) -> Instrument:
    if env_per_branch is None:
        # smallest ancilla making a Stinespring isometry possible
        env_per_branch = max(1, -(-din // (dout * n_branches)))
    v = random_isometry(rng, din, dout * n_branches * env_per_branch)
    resh = v.reshape(dout, n_branches, env_per_branch, din)
    branches = []
    for g in range(n_branches):
        kraus = [resh[:, g, e, :] for e in range(env_per_branch)]
        branches.append(choi_from_kraus(kraus))
    return Instrument(tuple(branches))


def random_stochastic(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    t = rng.gamma(1.0, 1.0, size=(n_out, n_in)) + 1e-12
    return t / t.sum(axis=0, keepdims=True)


def random_pid(
    din: int,
    dout: int,
    n_programs: int,
    n_outcomes: int,
    seed: int,
    env_dim: int | None = None,
) -> Pid:
    """Generic device: a random isometric broadcast extension steered by a random PMD."""
    rng = rng_from_seed(seed)
    env = env_dim if env_dim is not None else din * dout
    v = random_isometry(rng, din, dout * env)
    e = choi_from_kraus([v])
    m = random_pmd(rng, env, n_programs, n_outcomes)
    return steer(e, m)


@dataclass(frozen=True)
class SimplePidSample:
    pid: Pid
    mother: Instrument
    table: np.ndarray  # table[x1, x0, g]


def random_simple_pid(
    din: int,
    dout: int,
    n_programs: int,
    n_outcomes: int,
    seed: int,
    n_mother: int | None = None,
) -> SimplePidSample:
    """Mixture of a random mother instrument through a random classical channel."""
    rng = rng_from_seed(seed)
    n_g = n_mother if n_mother is not None else n_outcomes
    mother = random_instrument(rng, din, dout, n_g)
    table = np.stack(
        [random_stochastic(rng, n_outcomes, n_programs) for _ in range(n_g)], axis=2
    )
    pid = simple_pid_from_mixture(mother, table)
    return SimplePidSample(pid=pid, mother=mother, table=table)


def identity_free_simulation(p: Pid) -> FreeSimulation:
    """The do-nothing transformation matched to the shape of ``p``."""
    shape = SimulationShape(
        source_din=p.din,
        source_dout=p.dout,
        source_programs=p.n_programs,
        source_outcomes=p.n_outcomes,
        target_din=p.din,
        target_dout=p.dout,
        target_programs=p.n_programs,
        target_outcomes=p.n_outcomes,
        side_dim=1,
        n_branches=1,
        n_flags=1,
    )
    pre = choi_identity(p.din)
    post = Instrument((choi_identity(p.dout),))
    p_cc = ClassicalChannel(np.eye(p.n_programs))
    q_cc = ClassicalChannel(np.eye(p.n_outcomes))
    return FreeSimulation(shape=shape, pre=pre, post=post, p_cc=p_cc, q_cc=q_cc)


def random_free_simulation(shape: SimulationShape, seed: int) -> FreeSimulation:
    """Random transformation with Stinespring-sampled quantum parts and random tables."""
    rng = rng_from_seed(seed)
    s = shape
    pre = random_channel_choi(rng, s.target_din, s.source_din * s.side_dim)
    post = random_instrument(rng, s.source_dout * s.side_dim, s.target_dout, s.n_branches)
    p_cc = ClassicalChannel(
        random_stochastic(
            rng, s.source_programs * s.n_flags, s.target_programs * s.n_branches
        )
    )
    q_cc = ClassicalChannel(
        random_stochastic(rng, s.target_outcomes, s.source_outcomes * s.n_flags)
    )
    return FreeSimulation(shape=s, pre=pre, post=post, p_cc=p_cc, q_cc=q_cc)
