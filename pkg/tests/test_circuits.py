import json

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import kstest

from mblvqe import circuits as ci
from mblvqe import state as st

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def embed(n, ops):
    mat = np.array([[1.0 + 0j]])
    for q in reversed(range(n)):
        mat = np.kron(mat, ops.get(q, np.eye(2, dtype=complex)))
    return mat


class TestGraphs:
    def test_ring_edge_count(self):
        for n in (3, 6, 11):
            g = ci.ring_graph(n)
            assert g.num_edges == n
            assert g.m_steady == 2 * n and g.m_kick == 3 * n

    def test_circulant_edge_count(self):
        for n in (5, 8, 12):
            g = ci.circulant_graph(n)
            assert g.num_edges == 2 * n

    def test_circulant_needs_n5(self):
        with pytest.raises(ValueError):
            ci.circulant_graph(4)

    def test_intermittent_chain_structure(self):
        g = ci.intermittent_chain_graph(13)
        assert g.n == 13
        assert g.num_edges == 12  # a tree
        degrees = {q: 0 for q in range(13)}
        for a, b in g.edges:
            degrees[a] += 1
            degrees[b] += 1
        # backbone has ceil(26/3) = 9 qubits (path ends have degree 1),
        # pendants hang off sites 1,3,5,7
        assert sorted(degrees.values(), reverse=True) == [3, 3, 3, 3, 2, 2, 2, 1, 1, 1, 1, 1, 1]

    def test_intermittent_chain_n31_matches_described_layout(self):
        g = ci.intermittent_chain_graph(31)
        backbone = int(np.ceil(2 * 31 / 3))
        assert backbone == 21
        pendant_edges = [(a, b) for a, b in g.edges if b >= backbone]
        assert len(pendant_edges) == 10
        assert all(a % 2 == 1 for a, _ in pendant_edges)

    def test_no_duplicate_or_self_edges(self):
        with pytest.raises(ValueError):
            ci.CouplingGraph(3, ((0, 0),))
        with pytest.raises(ValueError):
            ci.CouplingGraph(3, ((0, 1), (0, 1)))

    def test_custom_graph(self):
        g = ci.make_graph("custom", 4, edges=[(0, 2), (1, 3)])
        assert g.num_edges == 2


class TestFloquetInit:
    def test_kick_zero_means_zero_angles(self):
        g = ci.ring_graph(5)
        params = ci.floquet_init(g, 3, 0.0, np.random.default_rng(0))
        assert np.all(params.x == 0) and np.all(params.xx == 0) and np.all(params.yy == 0)

    def test_layer_replication_exact(self):
        g = ci.circulant_graph(6)
        params = ci.floquet_init(g, 5, 0.7, np.random.default_rng(1))
        for block in params.blocks():
            assert np.max(np.abs(block - block[0])) == 0.0
        assert params.is_periodic()

    def test_kick_range_bounded(self):
        g = ci.ring_graph(6)
        for w in (0.1, 0.9, 2.0):
            params = ci.floquet_init(g, 2, w, np.random.default_rng(2))
            for kick in (params.x, params.xx, params.yy):
                assert np.max(np.abs(kick)) <= w
            for steady in (params.z, params.zz):
                assert np.max(np.abs(steady)) <= np.pi

    def test_kick_distribution_uniform(self):
        # KS test against Uniform(-W, W) over 10^4 draws
        g = ci.ring_graph(8)
        w = 0.8
        draws = []
        rng = np.random.default_rng(3)
        while len(draws) < 10_000:
            params = ci.floquet_init(g, 1, w, rng)
            draws.extend(params.x[0].tolist())
            draws.extend(params.xx[0].tolist())
            draws.extend(params.yy[0].tolist())
        stat = kstest(np.array(draws[:10_000]), "uniform", args=(-w, 2 * w))
        assert stat.pvalue > 0.01


class TestOtherInits:
    def test_random_init_layers_differ(self):
        g = ci.ring_graph(4)
        params = ci.random_init(g, 2, np.random.default_rng(4))
        assert not np.array_equal(params.x[0], params.x[1])
        assert not params.is_periodic()

    def test_cti_epsilon_zero_identity(self):
        g = ci.ring_graph(4)
        params = ci.cti_init(g, 3, 0.0, np.random.default_rng(5))
        psi = st.haar_state(4, np.random.default_rng(6))
        out = psi.copy()
        ci.apply_circuit(out, g, params)
        assert np.allclose(out, psi)

    def test_cti_high_overlap_with_input(self):
        # simulate and measure overlap with the input basis state
        n = 8
        g = ci.ring_graph(n)
        params = ci.cti_init(g, n, 0.001, np.random.default_rng(7))
        psi = st.basis_state(n, "0" * n)
        ci.apply_circuit(psi, g, params)
        assert abs(psi[0]) ** 2 > 0.99


class TestChebyshevInit:
    def test_angle_ranges(self):
        g = ci.ring_graph(13)
        params = ci.chebyshev_init(g, 2, 0.6)
        assert np.max(np.abs(params.z)) <= np.pi + 1e-12
        assert np.max(np.abs(params.zz)) <= np.pi + 1e-12
        for kick in (params.x, params.xx, params.yy):
            assert np.max(np.abs(kick)) <= 0.6 + 1e-12

    def test_deterministic(self):
        g = ci.ring_graph(9)
        a = ci.chebyshev_init(g, 3, 0.5)
        b = ci.chebyshev_init(g, 3, 0.5)
        for ba, bb in zip(a.blocks(), b.blocks()):
            assert np.array_equal(ba, bb)

    def test_zero_count_is_ms_plus_mk(self):
        # ring: m_s + m_k = 5n
        n = 13
        zeros = ci.chebyshev_zeros(5 * n)
        assert zeros.size == 65
        g = ci.ring_graph(n)
        params = ci.chebyshev_init(g, 1, 1.0)
        total = sum(b.size for b in params.blocks())
        assert total == 5 * n

    def test_stagger_sign_pattern(self):
        zeros = ci.chebyshev_zeros(20)
        pos = sorted([v for v in zeros if v >= 0], key=abs, reverse=True)
        neg = sorted([v for v in zeros if v < 0], key=abs, reverse=True)
        g = ci.ring_graph(4)
        params = ci.chebyshev_init(g, 1, np.pi)
        flat_layer = np.concatenate([params.z[0], params.zz[0], params.x[0],
                                     params.xx[0], params.yy[0]])
        assert np.allclose(flat_layer[0::2], pos)
        assert np.allclose(flat_layer[1::2], neg)

    def test_replicated(self):
        g = ci.ring_graph(5)
        params = ci.chebyshev_init(g, 4, 0.3)
        assert params.is_periodic()


class TestApplyCircuit:
    def test_zero_params_identity(self):
        g = ci.ring_graph(4)
        params = ci.cti_init(g, 3, 0.0, np.random.default_rng(8))
        psi0 = st.haar_state(4, np.random.default_rng(9))
        psi = psi0.copy()
        ci.apply_circuit(psi, g, params)
        assert np.allclose(psi, psi0)

    def test_floquet_power_property(self):
        # D-layer Floquet circuit equals applying layer 1 D times
        g = ci.ring_graph(5)
        params = ci.floquet_init(g, 3, 0.4, np.random.default_rng(10))
        psi_a = st.basis_state(5, "01010")
        ci.apply_circuit(psi_a, g, params)
        psi_b = st.basis_state(5, "01010")
        for _ in range(3):
            ci.apply_layer(psi_b, g, params)
        assert np.abs(np.vdot(psi_a, psi_b)) ** 2 == pytest.approx(1.0, abs=1e-10)
        assert np.allclose(psi_a, psi_b, atol=1e-10)

    def test_against_dense_unitary_oracle(self):
        g = ci.ring_graph(4)
        params = ci.random_init(g, 2, np.random.default_rng(11))
        psi = st.basis_state(4, "0101")
        ci.apply_circuit(psi, g, params)
        u = ci.circuit_unitary(g, params)
        ref = u @ st.basis_state(4, "0101")
        assert np.allclose(psi, ref, atol=1e-9)
        assert st.pauli_expectation(psi, "ZIII") == pytest.approx(
            np.vdot(ref, st.pauli_apply(ref, "ZIII")).real, abs=1e-9
        )

    def test_block_order_matches_product_formula(self):
        # one layer == e^{-iH_zz} e^{-iH_yy} e^{-iH_xx} e^{-iH_z} e^{-iH_x}
        n = 5
        g = ci.ring_graph(n)
        params = ci.floquet_init(g, 1, 0.9, np.random.default_rng(12))
        h = {}
        h["x"] = sum(params.x[0][q] * embed(n, {q: X}) for q in range(n)) / 2
        h["z"] = sum(params.z[0][q] * embed(n, {q: Z}) for q in range(n)) / 2
        h["xx"] = sum(params.xx[0][i] * embed(n, {j: X, k: X}) for i, (j, k) in enumerate(g.edges)) / 2
        h["yy"] = sum(params.yy[0][i] * embed(n, {j: Y, k: Y}) for i, (j, k) in enumerate(g.edges)) / 2
        h["zz"] = sum(params.zz[0][i] * embed(n, {j: Z, k: Z}) for i, (j, k) in enumerate(g.edges)) / 2
        ref = (expm(-1j * h["zz"]) @ expm(-1j * h["yy"]) @ expm(-1j * h["xx"])
               @ expm(-1j * h["z"]) @ expm(-1j * h["x"]))
        assert np.linalg.norm(ci.layer_unitary(g, params) - ref) < 1e-9

    def test_intra_block_gates_commute(self):
        # permuting gates inside one block leaves the state unchanged
        rng = np.random.default_rng(13)
        n = 5
        g = ci.ring_graph(n)
        angles = rng.uniform(-np.pi, np.pi, g.num_edges)
        psi0 = st.haar_state(n, rng)
        psi_fwd = psi0.copy()
        for i, (j, k) in enumerate(g.edges):
            st.apply_rxx(psi_fwd, n, j, k, angles[i])
        psi_rev = psi0.copy()
        for i, (j, k) in reversed(list(enumerate(g.edges))):
            st.apply_rxx(psi_rev, n, j, k, angles[i])
        assert np.allclose(psi_fwd, psi_rev, atol=1e-10)

    def test_size_mismatch(self):
        g = ci.ring_graph(4)
        params = ci.random_init(g, 1, np.random.default_rng(14))
        with pytest.raises(ValueError):
            ci.apply_circuit(st.basis_state(5, "0" * 5), g, params)


class TestKickScalingAndInterpolation:
    def test_lambda_one_identity(self):
        g = ci.ring_graph(4)
        params = ci.floquet_init(g, 2, 0.3, np.random.default_rng(15))
        scaled = ci.uniform_kick_scaling(params, 1.0)
        for a, b in zip(params.blocks(), scaled.blocks()):
            assert np.array_equal(a, b)

    def test_scaling_values(self):
        g = ci.ring_graph(4)
        params = ci.floquet_init(g, 2, 0.3, np.random.default_rng(16))
        scaled = ci.uniform_kick_scaling(params, 2.0)
        assert np.allclose(scaled.x, 2.0 * params.x)
        assert np.allclose(scaled.yy, 2.0 * params.yy)
        assert np.array_equal(scaled.z, params.z)
        assert np.array_equal(scaled.zz, params.zz)

    def test_delta_l1_bound(self):
        # ||delta||_1 <= D * m_k * (lambda-1) * W from the direct sum
        g = ci.ring_graph(6)
        w, lam, depth = 0.5, 3.0, 4
        params = ci.floquet_init(g, depth, w, np.random.default_rng(17))
        scaled = ci.uniform_kick_scaling(params, lam)
        delta = np.abs(scaled.flatten() - params.flatten()).sum()
        assert delta <= depth * g.m_kick * (lam - 1) * w + 1e-12

    def test_non_floquet_rejected(self):
        g = ci.ring_graph(4)
        params = ci.random_init(g, 2, np.random.default_rng(18))
        with pytest.raises(ValueError):
            ci.uniform_kick_scaling(params, 2.0)

    def test_interpolation_endpoints(self):
        g = ci.ring_graph(4)
        rng = np.random.default_rng(19)
        a = ci.floquet_init(g, 2, 0.2, rng)
        b = ci.uniform_kick_scaling(a, 2.5)
        assert np.array_equal(ci.interpolate(a, b, 0.0).flatten(), a.flatten())
        assert np.array_equal(ci.interpolate(a, b, 1.0).flatten(), b.flatten())
        mid = ci.interpolate(a, b, 0.5)
        assert np.allclose(mid.flatten(), 0.5 * (a.flatten() + b.flatten()))

    def test_interpolated_energy_continuity(self):
        # dense grid evaluation: no jumps above 0.1 on a 100-point grid
        from mblvqe.hamiltonians import aubry_andre, AA_PHASES
        from mblvqe.optimize import VQEProblem

        n = 6
        g = ci.ring_graph(n)
        ham = aubry_andre(n, AA_PHASES["critical"])
        problem = VQEProblem(g, 2, ham)
        rng = np.random.default_rng(20)
        a = ci.floquet_init(g, 2, 0.3, rng)
        b = ci.uniform_kick_scaling(a, 4.0)
        energies = [
            problem.energy(ci.interpolate(a, b, s).flatten())
            for s in np.linspace(0, 1, 100)
        ]
        assert np.max(np.abs(np.diff(energies))) < 0.1


class TestFlattenAndSerialization:
    def test_flatten_round_trip(self):
        g = ci.circulant_graph(5)
        params = ci.random_init(g, 3, np.random.default_rng(21))
        back = params.with_flat(params.flatten())
        for a, b in zip(params.blocks(), back.blocks()):
            assert np.array_equal(a, b)

    def test_json_round_trip(self):
        g = ci.ring_graph(4)
        params = ci.floquet_init(g, 2, 0.4, np.random.default_rng(22))
        back = ci.ParameterTensor.from_json(params.to_json())
        for a, b in zip(params.blocks(), back.blocks()):
            assert np.allclose(a, b)
        assert back.ensemble["kind"] == "floquet"
        payload = json.loads(params.to_json())
        assert set(payload) == {"n", "D", "graph", "steady", "kick", "ensemble"}
