import numpy as np
import pytest

from pidlab.sdp import (
    ComplexSdpBuilder,
    SdpProblem,
    SdpStatus,
    SolveOptions,
    embed_complex,
    hermitian_basis,
    solve,
    unembed_complex,
)


def rand_sym(rng, n):
    a = rng.standard_normal((n, n))
    return (a + a.T) / 2


def rand_spd(rng, n):
    a = rng.standard_normal((n, n + 2))
    return a @ a.T + 0.1 * np.eye(n)


class TestEmbedComplex:
    def test_identity(self):
        assert np.allclose(embed_complex(np.eye(2)), np.eye(4))

    def test_pauli_y_pattern(self):
        y = np.array([[0, -1j], [1j, 0]])
        expect = np.array(
            [
                [0, 0, 0, 1],
                [0, 0, -1, 0],
                [0, -1, 0, 0],
                [1, 0, 0, 0],
            ],
            dtype=float,
        )
        assert np.allclose(embed_complex(y), expect)

    def test_doubled_spectrum_oracle(self):
        rng = np.random.default_rng(np.random.Philox(31))
        for _ in range(20):
            n = int(rng.integers(2, 6))
            a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            h = (a + a.conj().T) / 2
            ev_h = np.sort(np.linalg.eigvalsh(h))
            ev_e = np.sort(np.linalg.eigvalsh(embed_complex(h)))
            assert np.allclose(ev_e, np.sort(np.repeat(ev_h, 2)), atol=1e-10)

    def test_unembed_roundtrip(self):
        rng = np.random.default_rng(np.random.Philox(32))
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        h = (a + a.conj().T) / 2
        assert np.allclose(unembed_complex(embed_complex(h)), h, atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            embed_complex(np.array([[0.0, 1.0], [0.0, 0.0]]))


def _single_block_problem(c, a_rows, rhs):
    dim = c.shape[0]
    return SdpProblem(
        blocks=(("x", dim),),
        objective=(c,),
        constraints=tuple(((a,), r) for a, r in zip(a_rows, rhs)),
    )


class TestSolveBasics:
    def test_smallest_eigenvalue(self):
        p = _single_block_problem(np.diag([1.0, 2.0]), [np.eye(2)], [1.0])
        sol = solve(p)
        assert sol.status is SdpStatus.OPTIMAL
        assert abs(sol.primal_value - 1.0) <= 1e-7
        assert np.allclose(sol.primal_blocks[0], np.diag([1.0, 0.0]), atol=1e-5)

    def test_infeasible_negative_trace(self):
        p = _single_block_problem(np.zeros((2, 2)), [np.eye(2)], [-1.0])
        sol = solve(p)
        assert sol.status is SdpStatus.INFEASIBLE

    def test_rejects_asymmetric_data(self):
        bad = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError):
            _single_block_problem(bad, [np.eye(2)], [1.0])

    def test_deterministic(self):
        rng = np.random.default_rng(np.random.Philox(33))
        c = rand_sym(rng, 3)
        a1 = rand_sym(rng, 3)
        p = _single_block_problem(c, [np.eye(3), a1], [1.0, 0.2])
        s1 = solve(p)
        s2 = solve(p)
        assert s1.primal_value == s2.primal_value
        assert np.array_equal(s1.primal_blocks[0], s2.primal_blocks[0])
        assert np.array_equal(s1.dual_multipliers, s2.dual_multipliers)


class TestGridOracle:
    def test_three_block_grid(self):
        # Three 2x2 blocks constrained to be equal with unit trace, so the
        # feasible set is the two-parameter family [[a, b], [b, 1-a]].
        rng = np.random.default_rng(np.random.Philox(34))
        for _ in range(5):
            cs = [rand_sym(rng, 2) for _ in range(3)]
            e01 = np.array([[0.0, 1.0], [1.0, 0.0]])
            e00 = np.diag([1.0, 0.0])
            zero = np.zeros((2, 2))
            rows = []
            for k in range(3):
                row = [zero, zero, zero]
                row[k] = np.eye(2)
                rows.append((tuple(row), 1.0))
            for k in (1, 2):
                row_a = [zero, zero, zero]
                row_a[0] = e00
                row_a[k] = -e00
                rows.append((tuple(row_a), 0.0))
                row_b = [zero, zero, zero]
                row_b[0] = e01
                row_b[k] = -e01
                rows.append((tuple(row_b), 0.0))
            p = SdpProblem(
                blocks=(("x1", 2), ("x2", 2), ("x3", 2)),
                objective=tuple(cs),
                constraints=tuple(rows),
            )
            sol = solve(p)
            assert sol.status is SdpStatus.OPTIMAL
            ctot = cs[0] + cs[1] + cs[2]
            best = np.inf
            for a in np.linspace(0.0, 1.0, 301):
                bmax = np.sqrt(max(a * (1 - a), 0.0))
                for b in np.linspace(-bmax, bmax, 301):
                    x = np.array([[a, b], [b, 1 - a]])
                    best = min(best, float(np.sum(ctot * x)))
            assert abs(sol.primal_value - best) <= 1e-4


class TestRandomFeasibleSuite:
    def test_kkt_and_weak_duality(self):
        rng = np.random.default_rng(np.random.Philox(35))
        opts = SolveOptions()
        for trial in range(50):
            nblk = int(rng.integers(1, 4))
            dims = [int(rng.integers(2, 5)) for _ in range(nblk)]
            m = int(rng.integers(2, 7))
            a_rows = [
                tuple(rand_sym(rng, d) for d in dims) for _ in range(m)
            ]
            x0 = [rand_spd(rng, d) for d in dims]
            s0 = [rand_spd(rng, d) for d in dims]
            y0 = rng.standard_normal(m)
            b = [sum(float(np.sum(a_rows[i][k] * x0[k])) for k in range(nblk)) for i in range(m)]
            c = tuple(
                sum(y0[i] * a_rows[i][k] for i in range(m)) + s0[k] for k in range(nblk)
            )
            p = SdpProblem(
                blocks=tuple((f"b{k}", dims[k]) for k in range(nblk)),
                objective=c,
                constraints=tuple((a_rows[i], b[i]) for i in range(m)),
            )
            sol = solve(p, opts)
            assert sol.status is SdpStatus.OPTIMAL, f"trial {trial}"
            # KKT residuals
            assert sol.primal_residual <= opts.feas_tol
            assert sol.dual_residual <= opts.feas_tol
            # weak duality (minimization)
            assert sol.dual_value <= sol.primal_value + 1e-9
            # feasible blocks
            for xb in sol.primal_blocks:
                assert np.linalg.eigvalsh(xb)[0] >= -opts.feas_tol


class TestComplexBuilder:
    def test_min_eigenvalue_complex(self):
        y = np.array([[0, -1j], [1j, 0]])
        b = ComplexSdpBuilder()
        b.add_block("x", 2)
        b.set_objective({"x": y})
        b.add_constraint({"x": np.eye(2)}, 1.0)
        res = b.solve()
        assert res.status is SdpStatus.OPTIMAL
        assert abs(res.value - (-1.0)) <= 1e-6
        x = res.blocks["x"]
        assert abs(np.trace(x).real - 1.0) <= 1e-6
        assert np.linalg.eigvalsh(x)[0] >= -1e-8

    def test_max_sense(self):
        h = np.array([[1.0, 0.5j], [-0.5j, -0.25]])
        b = ComplexSdpBuilder()
        b.add_block("x", 2)
        b.set_objective({"x": h}, sense="max")
        b.add_constraint({"x": np.eye(2)}, 1.0)
        res = b.solve()
        lam_max = np.linalg.eigvalsh(h)[-1]
        assert abs(res.value - lam_max) <= 1e-6

    def test_hermitian_basis_orthonormal(self):
        basis = hermitian_basis(3)
        assert len(basis) == 9
        for i, hi in enumerate(basis):
            for j, hj in enumerate(basis):
                ip = np.sum(hi.conj() * hj).real
                assert abs(ip - (1.0 if i == j else 0.0)) <= 1e-12
