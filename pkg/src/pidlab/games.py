"""Guessing games: strategy scores, simple-device benchmarks, and witnesses.

Two game families are provided.  In the entangled-referee game the referee
keeps one half of a maximally entangled pair, receives a system back, and
measures both with a bipartite POVM indexed ``(m, n)``; the player, holding a
non-signaling device, later learns ``m`` and guesses ``n``.  In the
post-information game the referee instead sends a state drawn from an
ensemble indexed ``(m, n, l)`` and measures the returned system with a fixed
POVM, and the player must guess ``n`` without disturbing ``l``.

The strongest simple-device score in either family is a semidefinite program
over deterministic-response instrument blocks.  Witness games built from
robustness dual certificates give players with a non-simple device a scoring
ratio approaching ``1 + robustness`` as dummy outcomes are appended.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compatibility import (
    RoiCertificate,
    enumerate_strategies,
    roi,
)
from .devices import Pid, Povm, pad_pid_outcomes
from .linalg import hermitize, max_abs, min_eig
from .sdp import ComplexSdpBuilder, SolveOptions, hermitian_basis

__all__ = [
    "BoundReport",
    "DualFrame",
    "DualFrameSolver",
    "GameSpec",
    "PiGameSpec",
    "PguessSimpleResult",
    "dummy_count_for_gap",
    "game_value",
    "ic_dual_frame",
    "merge_game_outcomes",
    "pguess_simple",
    "pi_game_value",
    "pi_pguess_simple",
    "verify_robustness_bound",
    "witness_ensemble",
    "witness_game",
]

GAME_OPTS = SolveOptions(feas_tol=1e-8, gap_tol=1e-9)


@dataclass(frozen=True)
class GameSpec:
    """Bipartite POVM indexed ``(m, n)`` over referee factor ``d_ref`` and ``dout``."""

    effects: np.ndarray = field(repr=False)  # (n_m, n_n, D, D) with D = d_ref*dout
    d_ref: int
    dout: int

    def __post_init__(self):
        eff = np.asarray(self.effects, dtype=complex)
        d = self.d_ref * self.dout
        if eff.ndim != 4 or eff.shape[2:] != (d, d):
            raise ValueError("effects must have shape (n_m, n_n, d_ref*dout, d_ref*dout)")
        eff = (eff + eff.conj().transpose(0, 1, 3, 2)) / 2
        eff.setflags(write=False)
        object.__setattr__(self, "effects", eff)

    @property
    def n_m(self) -> int:
        return self.effects.shape[0]

    @property
    def n_n(self) -> int:
        return self.effects.shape[1]

    def completeness_defect(self) -> float:
        d = self.d_ref * self.dout
        return max_abs(self.effects.sum(axis=(0, 1)) - np.eye(d))

    def cp_defect(self) -> float:
        return max(
            0.0,
            max(
                -min_eig(self.effects[m, n])
                for m in range(self.n_m)
                for n in range(self.n_n)
            ),
        )

    def is_valid(self, tol: float = 1e-9) -> bool:
        return self.cp_defect() <= tol and self.completeness_defect() <= tol


def game_value(g: GameSpec, strategy: Pid) -> float:
    """Winning probability of a fixed device: ``(1/d_ref) sum Tr[M_{m,n} J_{n|m}]``."""
    if strategy.din != g.d_ref or strategy.dout != g.dout:
        raise ValueError("strategy dimensions do not match the game")
    if strategy.n_programs != g.n_m or strategy.n_outcomes != g.n_n:
        raise ValueError("strategy index sets do not match the game")
    return float(
        np.real(np.einsum("mnpq,mnqp->", g.effects, strategy.blocks)) / g.d_ref
    )


def _merge_groups(effects: np.ndarray, tol: float = 1e-12) -> list[list[int]]:
    """Group outcome labels whose effect columns agree across every program."""
    n_n = effects.shape[1]
    groups: list[list[int]] = []
    for n in range(n_n):
        for grp in groups:
            if max_abs(effects[:, n] - effects[:, grp[0]]) <= tol:
                grp.append(n)
                break
        else:
            groups.append([n])
    return groups


def merge_game_outcomes(g: GameSpec, labels: list[int]) -> GameSpec:
    """Coarse-grain guess labels: outcomes with equal ``labels`` entries are summed."""
    if len(labels) != g.n_n:
        raise ValueError("one label per outcome required")
    uniq = sorted(set(labels))
    eff = np.zeros(
        (g.n_m, len(uniq), g.effects.shape[2], g.effects.shape[3]), dtype=complex
    )
    for n, lab in enumerate(labels):
        eff[:, uniq.index(lab)] += g.effects[:, n]
    return GameSpec(effects=eff, d_ref=g.d_ref, dout=g.dout)


@dataclass(frozen=True)
class PguessSimpleResult:
    value: float
    strategy: Pid
    gap: float


def pguess_simple(
    g: GameSpec, opts: SolveOptions | None = None
) -> PguessSimpleResult:
    """Best winning probability over simple devices, with an attaining strategy.

    Outcome labels with identical effect columns are merged before the
    response-function enumeration (a simple device gains nothing from
    distinguishing them), which keeps witness games with many dummy outcomes
    tractable.
    """
    groups = _merge_groups(g.effects)
    reps = [grp[0] for grp in groups]
    eff = g.effects[:, reps]
    n_m, n_red = eff.shape[0], eff.shape[1]
    strategies = enumerate_strategies(n_m, n_red)
    d = g.d_ref * g.dout
    builder = ComplexSdpBuilder()
    for f in strategies:
        builder.add_block(f"j{f.index}", d)
    builder.set_objective(
        {
            f"j{f.index}": sum(eff[m, f.mapping[m]] for m in range(n_m)) / g.d_ref
            for f in strategies
        },
        sense="max",
    )
    eye_out = np.eye(g.dout, dtype=complex)
    for h in hermitian_basis(g.d_ref):
        builder.add_constraint(
            {f"j{f.index}": np.kron(h, eye_out) for f in strategies},
            float(np.real(np.trace(h))),
        )
    res = builder.solve(opts or GAME_OPTS).require_optimal("simple-device benchmark")
    blocks = np.zeros((n_m, g.n_n, d, d), dtype=complex)
    for f in strategies:
        for m in range(n_m):
            blocks[m, reps[f.mapping[m]]] += res.blocks[f"j{f.index}"]
    return PguessSimpleResult(
        value=res.value, strategy=Pid(g.d_ref, g.dout, blocks), gap=res.gap
    )


def witness_game(cert: RoiCertificate, n_dummy: int = 64) -> GameSpec:
    """Game built from a robustness dual certificate, padded with dummy outcomes.

    The certificate functionals, scaled by the largest eigenvalue of their
    sum, become the effects for real outcome labels; the remainder of the
    identity is split uniformly over ``n_programs * n_dummy`` dummy labels.
    """
    if cert.alpha is None:
        raise ValueError("certificate carries no dual functionals")
    if n_dummy < 1:
        raise ValueError("need at least one dummy outcome")
    alpha = cert.alpha
    n_m, n_x1 = alpha.shape[0], alpha.shape[1]
    d = alpha.shape[2]
    total = hermitize(alpha.sum(axis=(0, 1)))
    c = max(float(np.linalg.eigvalsh(total)[-1]), 0.0)
    eff = np.zeros((n_m, n_x1 + n_dummy, d, d), dtype=complex)
    if c > 1e-12:
        eff[:, :n_x1] = alpha / c
    remainder = np.eye(d, dtype=complex) - eff[:, :n_x1].sum(axis=(0, 1))
    eff[:, n_x1:] = remainder[None, None, :, :] / (n_m * n_dummy)
    return GameSpec(effects=eff, d_ref=cert.din, dout=cert.dout)


def dummy_count_for_gap(
    c: float, d_ref: int, n_programs: int, n_outcomes: int, eps: float
) -> int:
    """Dummy-outcome count sufficient to bring the benchmark within ``eps``."""
    return int(math.ceil(2.0 * c * d_ref * n_programs * n_outcomes / eps))


@dataclass(frozen=True)
class BoundReport:
    roi: float
    schedule: tuple[int, ...]
    ratios: tuple[float, ...]
    lower_bounds: tuple[float, ...]
    benchmarks: tuple[float, ...]
    cap_violations: int

    def final_gap(self) -> float:
        """Relative distance of the last ratio from ``1 + roi``."""
        return abs((1.0 + self.roi) - self.ratios[-1]) / (1.0 + self.roi)


def verify_robustness_bound(
    p: Pid,
    schedule: tuple[int, ...] = (8, 64, 512),
    opts: SolveOptions | None = None,
    use_seesaw: bool = False,
    seesaw_kwargs: dict | None = None,
) -> BoundReport:
    """Witness-game ratio schedule converging upward to ``1 + robustness``.

    For each dummy count the achieved score is the best of (i) the device
    itself embedded with dummy outcomes ignored, and (ii) the strongest simple
    strategy, which any device can reach; both are genuinely attainable, so
    every ratio is a certified lower bound on the advantage and can never
    exceed ``1 + roi`` beyond numerical tolerance.
    """
    cert = roi(p, opts)
    ratios = []
    lower = []
    bench = []
    violations = 0
    for n_dummy in schedule:
        g = witness_game(cert, n_dummy=n_dummy)
        num = game_value(g, pad_pid_outcomes(p, g.n_n))
        simple = pguess_simple(g, opts)
        num = max(num, simple.value)
        if use_seesaw:
            from .simulation import seesaw_pguess

            kw = seesaw_kwargs or {}
            num = max(num, seesaw_pguess(p, g, **kw).value)
        ratio = num / simple.value
        ratios.append(ratio)
        lower.append(num)
        bench.append(simple.value)
        if ratio > 1.0 + cert.r + 1e-5:
            violations += 1
    return BoundReport(
        roi=cert.r,
        schedule=tuple(schedule),
        ratios=tuple(ratios),
        lower_bounds=tuple(lower),
        benchmarks=tuple(bench),
        cap_violations=violations,
    )


# ---------------------------------------------------------------------------
# Post-information games
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PiGameSpec:
    """State ensemble indexed ``(m, n, l)`` plus the referee's fixed POVM."""

    ensemble: np.ndarray = field(repr=False)  # (n_m, n_n, n_l, d0, d0)
    povm_l: Povm

    def __post_init__(self):
        ens = np.asarray(self.ensemble, dtype=complex)
        if ens.ndim != 5 or ens.shape[3] != ens.shape[4]:
            raise ValueError("ensemble must have shape (n_m, n_n, n_l, d0, d0)")
        if ens.shape[2] != self.povm_l.n_outcomes:
            raise ValueError("ensemble l-axis must match the POVM outcome count")
        ens = (ens + ens.conj().transpose(0, 1, 2, 4, 3)) / 2
        ens.setflags(write=False)
        object.__setattr__(self, "ensemble", ens)

    @property
    def n_m(self) -> int:
        return self.ensemble.shape[0]

    @property
    def n_n(self) -> int:
        return self.ensemble.shape[1]

    @property
    def n_l(self) -> int:
        return self.ensemble.shape[2]

    @property
    def din(self) -> int:
        return self.ensemble.shape[3]

    @property
    def dout(self) -> int:
        return self.povm_l.dim

    def total_probability(self) -> float:
        return float(np.real(np.einsum("mnlpp->", self.ensemble)))

    def cp_defect(self) -> float:
        flat = self.ensemble.reshape(-1, self.din, self.din)
        return max(0.0, max(-min_eig(s) for s in flat))

    def is_valid(self, tol: float = 1e-9) -> bool:
        return self.cp_defect() <= tol and abs(self.total_probability() - 1.0) <= tol


def pi_game_value(g: PiGameSpec, strategy: Pid) -> float:
    """Score ``sum Tr[(sigma^T_{m,n,l} (x) L_l) J_{n|m}]`` of a fixed device."""
    if strategy.din != g.din or strategy.dout != g.dout:
        raise ValueError("strategy dimensions do not match the game")
    if strategy.n_programs != g.n_m or strategy.n_outcomes != g.n_n:
        raise ValueError("strategy index sets do not match the game")
    blocks = strategy.blocks.reshape(
        g.n_m, g.n_n, g.din, g.dout, g.din, g.dout
    )
    # Tr[(s^T (x) L) J] = sum s[j,i] L[u,v] J[(j,v),(i,u)]
    return float(
        np.real(
            np.einsum(
                "mnlji,luv,mnjviu->", g.ensemble, g.povm_l.effects, blocks,
                optimize=True,
            )
        )
    )


def pi_pguess_simple(
    g: PiGameSpec, opts: SolveOptions | None = None
) -> PguessSimpleResult:
    """Best post-information score over simple devices."""
    score = np.einsum(
        "mnlji,luv->mniujv", g.ensemble, g.povm_l.effects, optimize=True
    ).reshape(g.n_m, g.n_n, g.din * g.dout, g.din * g.dout)
    score = (score + score.conj().transpose(0, 1, 3, 2)) / 2
    strategies = enumerate_strategies(g.n_m, g.n_n)
    d = g.din * g.dout
    builder = ComplexSdpBuilder()
    for f in strategies:
        builder.add_block(f"j{f.index}", d)
    builder.set_objective(
        {
            f"j{f.index}": sum(score[m, f.mapping[m]] for m in range(g.n_m))
            for f in strategies
        },
        sense="max",
    )
    eye_out = np.eye(g.dout, dtype=complex)
    for h in hermitian_basis(g.din):
        builder.add_constraint(
            {f"j{f.index}": np.kron(h, eye_out) for f in strategies},
            float(np.real(np.trace(h))),
        )
    res = builder.solve(opts or GAME_OPTS).require_optimal("post-information benchmark")
    blocks = np.zeros((g.n_m, g.n_n, d, d), dtype=complex)
    for f in strategies:
        for m in range(g.n_m):
            blocks[m, f.mapping[m]] += res.blocks[f"j{f.index}"]
    return PguessSimpleResult(
        value=res.value, strategy=Pid(g.din, g.dout, blocks), gap=res.gap
    )


# ---------------------------------------------------------------------------
# Dual frames over informationally complete POVMs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualFrame:
    """Hermitian expansion coefficients ``target = sum_l mu_l (x) L_l``."""

    operators: np.ndarray = field(repr=False)  # (..., n_l, d0, d0)
    povm: Povm
    residual: float


class DualFrameSolver:
    """Least-squares expansion over the span of an informationally complete POVM."""

    def __init__(self, povm: Povm):
        d1 = povm.dim
        self._povm = povm
        self._basis = hermitian_basis(d1)
        coords = np.array(
            [
                [float(np.real(np.sum(h.conj() * e))) for h in self._basis]
                for e in povm.effects
            ]
        )  # (n_l, d1^2)
        gram = coords @ coords.T
        rank = int(np.linalg.matrix_rank(gram, tol=1e-10))
        if rank < d1 * d1:
            raise ValueError(
                f"POVM spans only {rank} of {d1 * d1} Hermitian dimensions; "
                "not informationally complete"
            )
        self._coords = coords
        self._gram_pinv = np.linalg.pinv(gram, rcond=1e-12)

    def solve(self, targets: np.ndarray) -> DualFrame:
        """Minimal-norm operators expanding each target over the POVM.

        ``targets`` has shape ``(..., d0*d1, d0*d1)`` on the product of the
        retained factor and the measured factor (measured factor last).
        """
        targets = np.asarray(targets, dtype=complex)
        lead = targets.shape[:-2]
        d1 = self._povm.dim
        dd = targets.shape[-1]
        if dd % d1:
            raise ValueError("target dimension is not a multiple of the POVM dimension")
        d0 = dd // d1
        f_basis = hermitian_basis(d0)
        t = targets.reshape(lead + (d0, d1, d0, d1))
        # coefficients D[..., j, i] = <F_j (x) H_i, target>
        fd = np.stack([f.conj() for f in f_basis])
        hd = np.stack([h.conj() for h in self._basis])
        coeff = np.real(np.einsum("jab,icd,...acbd->...ji", fd, hd, t, optimize=True))
        x = np.einsum("...ji,li,lk->...jk", coeff, self._coords, self._gram_pinv, optimize=True)
        # operators mu[..., l] = sum_j X[..., j, l] F_j
        fmats = np.stack(f_basis)
        mu = np.einsum("...jl,jab->...lab", x, fmats, optimize=True)
        recon = np.einsum("...lab,lcd->...acbd", mu, self._povm.effects, optimize=True)
        residual = float(np.max(np.abs(recon.reshape(targets.shape) - targets)))
        return DualFrame(operators=mu, povm=self._povm, residual=residual)


def ic_dual_frame(povm: Povm) -> DualFrameSolver:
    """Builder for dual frames; raises if the POVM is not informationally complete."""
    return DualFrameSolver(povm)


def witness_ensemble(frame: DualFrame, povm: Povm | None = None) -> PiGameSpec:
    """Shifted, normalized frame operators as a post-information game ensemble.

    Each operator's transpose is offset by the largest frame norm so all
    states are positive, and the whole family is scaled to total probability
    one.  A zero frame degenerates to the uniform maximally mixed ensemble.
    """
    pv = povm or frame.povm
    mu = frame.operators
    if mu.ndim != 5:
        raise ValueError("expected frame operators indexed (m, n, l)")
    n_m, n_n, n_l, d0, _ = mu.shape
    norms = np.linalg.norm(mu.reshape(-1, d0, d0), ord=2, axis=(1, 2))
    c = float(np.max(norms)) if norms.size else 0.0
    count = n_m * n_n * n_l
    if c <= 1e-14:
        ens = np.broadcast_to(np.eye(d0) / (d0 * count), mu.shape).copy()
        return PiGameSpec(ensemble=ens, povm_l=pv)
    c_prime = float(np.real(np.einsum("mnlaa->", mu)))
    denom = c_prime + c * d0 * count
    ens = (mu.transpose(0, 1, 2, 4, 3) + c * np.eye(d0)[None, None, None, :, :]) / denom
    return PiGameSpec(ensemble=ens, povm_l=pv)
