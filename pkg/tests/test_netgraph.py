import numpy as np
import pytest

from codedflow import (
    CodingCoefficients,
    CyclicTopologyError,
    NetworkTopology,
    SparsityViolation,
    SystemMatrices,
    UnknownEdge,
    build_coefficient_matrices,
    compact_form,
    diamond_coefficients,
    diamond_topology,
    neumann_topology_sum,
    remove_edge,
    seeded_diamond_symbols,
    zero_edge_coefficients,
)
from codedflow.errors import SingularIFError

from conftest import random_dag


def _fanout(n_edges=3):
    """All edges from one source straight into one sink: F is forced to zero."""
    topology = NetworkTopology.from_edges(
        ["s", "t"], [("s", "t")] * n_edges, sources=("s",), sinks=("t",)
    )
    return topology


class TestBuild:
    def test_zero_coupling_gives_identity_topology_matrix(self, rng):
        topology = _fanout(3)
        alpha = {(i, e): complex(rng.normal(), rng.normal()) for e in range(3) for i in range(2)}
        gamma = {(k, e): complex(rng.normal(), rng.normal()) for e in range(3) for k in range(2)}
        sys = build_coefficient_matrices(
            topology, CodingCoefficients(alpha, {}, gamma), n_in=2, n_out=2
        )
        np.testing.assert_array_equal(sys.F, np.zeros((3, 3)))
        np.testing.assert_array_equal(sys.G, np.eye(3))
        np.testing.assert_allclose(sys.M, sys.A @ sys.B, atol=1e-15)

    def test_two_edge_chain_is_nilpotent_order_two(self):
        topology = NetworkTopology.from_edges(
            ["a", "b", "c"], [("a", "b"), ("b", "c")], sources=("a",), sinks=("c",)
        )
        b = 0.37 - 0.8j
        coeffs = CodingCoefficients({(0, 0): 1.0}, {(0, 1): b}, {(0, 1): 1.0})
        sys = build_coefficient_matrices(topology, coeffs, n_in=1, n_out=1)
        np.testing.assert_array_equal(sys.F @ sys.F, np.zeros((2, 2)))
        np.testing.assert_allclose(sys.G, np.eye(2) + sys.F, atol=1e-15)
        assert sys.G[1, 0] == b

    def test_diamond_topology_matrix_pattern(self):
        """The path products land in the sink-rows/source-columns block."""
        symbols = {name: 1.0 for name in seeded_diamond_symbols(0)}
        symbols.update(beta_e1_e4=0.2, beta_e1_e3=0.3, beta_e3_e5=0.5, beta_e2_e5=0.7)
        topology = diamond_topology()
        sys = build_coefficient_matrices(
            topology, diamond_coefficients(symbols), n_in=2, n_out=2
        )
        rows = topology.sink_incoming()
        cols = topology.source_outgoing()
        block = sys.G[np.ix_(rows, cols)]
        np.testing.assert_allclose(block, [[0.2, 0.0], [0.3 * 0.5, 0.7]], atol=1e-15)

    def test_cycle_rejected_without_flag(self):
        topology = NetworkTopology.from_edges(
            ["a", "b"], [("a", "b"), ("b", "a")], sources=("a",), sinks=("b",)
        )
        assert not topology.is_acyclic
        coeffs = CodingCoefficients({(0, 0): 1.0}, {(0, 1): 0.5, (1, 0): 0.5}, {(0, 0): 1.0})
        with pytest.raises(CyclicTopologyError):
            build_coefficient_matrices(topology, coeffs, 1, 1)

    def test_cycle_with_small_spectral_radius_inverts(self):
        topology = NetworkTopology.from_edges(
            ["a", "b"], [("a", "b"), ("b", "a")], sources=("a",), sinks=("b",)
        )
        coeffs = CodingCoefficients({(0, 0): 1.0}, {(0, 1): 0.5, (1, 0): 0.5}, {(0, 0): 1.0})
        sys = build_coefficient_matrices(topology, coeffs, 1, 1, allow_cyclic=True)
        eye = np.eye(2)
        np.testing.assert_allclose(sys.G @ (eye - sys.F), eye, atol=1e-12)

    def test_cycle_with_divergent_radius_errors(self):
        topology = NetworkTopology.from_edges(
            ["a", "b"], [("a", "b"), ("b", "a")], sources=("a",), sinks=("b",)
        )
        coeffs = CodingCoefficients({(0, 0): 1.0}, {(0, 1): 2.0, (1, 0): 2.0}, {(0, 0): 1.0})
        with pytest.raises(CyclicTopologyError):
            build_coefficient_matrices(topology, coeffs, 1, 1, allow_cyclic=True)

    def test_near_singular_cyclic_inverse_errors(self):
        topology = NetworkTopology.from_edges(
            ["a", "b"], [("a", "b"), ("b", "a")], sources=("a",), sinks=("b",)
        )
        eps = 1e-14
        coeffs = CodingCoefficients(
            {(0, 0): 1.0}, {(0, 1): 1.0 - eps, (1, 0): 1.0 - eps}, {(0, 0): 1.0}
        )
        with pytest.raises((SingularIFError, CyclicTopologyError)):
            build_coefficient_matrices(topology, coeffs, 1, 1, allow_cyclic=True)


class TestSparsity:
    def test_alpha_off_source_edge(self):
        topology = diamond_topology()
        coeffs = diamond_coefficients(seeded_diamond_symbols(1))
        bad = dict(coeffs.alpha)
        bad[(0, topology.edge_index("e3"))] = 1.0
        with pytest.raises(SparsityViolation):
            build_coefficient_matrices(
                topology, CodingCoefficients(bad, coeffs.beta, coeffs.gamma), 2, 2
            )

    def test_beta_on_non_adjacent_pair(self):
        topology = diamond_topology()
        coeffs = diamond_coefficients(seeded_diamond_symbols(1))
        bad = dict(coeffs.beta)
        bad[(topology.edge_index("e1"), topology.edge_index("e5"))] = 1.0  # head(e1)=v2 != v3
        with pytest.raises(SparsityViolation):
            build_coefficient_matrices(
                topology, CodingCoefficients(coeffs.alpha, bad, coeffs.gamma), 2, 2
            )

    def test_gamma_off_sink_edge(self):
        topology = diamond_topology()
        coeffs = diamond_coefficients(seeded_diamond_symbols(1))
        bad = dict(coeffs.gamma)
        bad[(0, topology.edge_index("e1"))] = 1.0
        with pytest.raises(SparsityViolation):
            build_coefficient_matrices(
                topology, CodingCoefficients(coeffs.alpha, coeffs.beta, bad), 2, 2
            )

    def test_coefficient_on_unknown_edge(self):
        topology = diamond_topology()
        coeffs = diamond_coefficients(seeded_diamond_symbols(1))
        bad = dict(coeffs.alpha)
        bad[(0, 9)] = 1.0
        with pytest.raises(UnknownEdge):
            build_coefficient_matrices(
                topology, CodingCoefficients(bad, coeffs.beta, coeffs.gamma), 2, 2
            )


class TestCompactForm:
    def test_all_ones_diamond_block(self):
        symbols = {name: 1.0 for name in seeded_diamond_symbols(0)}
        topology = diamond_topology()
        sys = build_coefficient_matrices(topology, diamond_coefficients(symbols), 2, 2)
        _, G_c, _ = compact_form(sys, topology)
        np.testing.assert_allclose(G_c, [[1.0, 0.0], [1.0, 1.0]], atol=1e-15)

    def test_compact_product_equals_full_product(self, rng):
        for _ in range(20):
            topology, coeffs, n_in, n_out = random_dag(rng)
            sys = build_coefficient_matrices(topology, coeffs, n_in, n_out)
            A_c, G_c, B_c = compact_form(sys, topology)
            np.testing.assert_allclose(A_c @ G_c @ B_c, sys.M, atol=1e-12)

    def test_trivial_topology_compact_equals_full(self, rng):
        topology = _fanout(3)
        alpha = {(i, e): complex(rng.normal(), rng.normal()) for e in range(3) for i in range(2)}
        gamma = {(k, e): complex(rng.normal(), rng.normal()) for e in range(3) for k in range(2)}
        sys = build_coefficient_matrices(
            topology, CodingCoefficients(alpha, {}, gamma), 2, 2
        )
        A_c, G_c, B_c = compact_form(sys, topology)
        np.testing.assert_array_equal(A_c, sys.A)
        np.testing.assert_array_equal(G_c, sys.G)
        np.testing.assert_array_equal(B_c, sys.B)


class TestRemoveEdge:
    def test_remove_chord_makes_compact_block_diagonal(self):
        symbols = seeded_diamond_symbols(5)
        topology = diamond_topology()
        coeffs = diamond_coefficients(symbols)
        topo2, coeffs2 = remove_edge(topology, coeffs, topology.edge_index("e3"))
        assert topo2.edge_count == 4
        assert all(
            symbols["beta_e1_e3"] not in (v,) for v in coeffs2.beta.values()
        )
        sys2 = build_coefficient_matrices(topo2, coeffs2, 2, 2)
        _, G_c, _ = compact_form(sys2, topo2)
        np.testing.assert_allclose(
            G_c, np.diag([symbols["beta_e1_e4"], symbols["beta_e2_e5"]]), atol=1e-15
        )

    def test_losing_branch_edges_leaves_single_path(self):
        symbols = seeded_diamond_symbols(6)
        topology = diamond_topology()
        coeffs = diamond_coefficients(symbols)
        # zeroing view keeps the 2x2 shape with a dead row/column
        zeroed = coeffs
        for name in ("e2", "e5"):
            zeroed = zero_edge_coefficients(zeroed, topology.edge_index(name))
        sys_z = build_coefficient_matrices(topology, zeroed, 2, 2)
        _, G_c, _ = compact_form(sys_z, topology)
        np.testing.assert_allclose(
            G_c, [[symbols["beta_e1_e4"], 0.0], [0.0, 0.0]], atol=1e-15
        )
        # deletion view shrinks to the surviving path but yields the same M
        topo2, coeffs2 = remove_edge(topology, coeffs, topology.edge_index("e5"))
        topo3, coeffs3 = remove_edge(topo2, coeffs2, topo2.edge_index("e2"))
        sys_d = build_coefficient_matrices(topo3, coeffs3, 2, 2)
        np.testing.assert_allclose(sys_d.M, sys_z.M, atol=0)
        _, G_s, _ = compact_form(sys_d, topo3)
        np.testing.assert_allclose(G_s, [[symbols["beta_e1_e4"]]], atol=1e-15)

    def test_removing_edge_with_zero_coefficients_keeps_M(self):
        symbols = seeded_diamond_symbols(7)
        symbols["beta_e1_e3"] = 0.0
        symbols["beta_e3_e5"] = 0.0
        topology = diamond_topology()
        coeffs = diamond_coefficients(symbols)
        before = build_coefficient_matrices(topology, coeffs, 2, 2).M
        topo2, coeffs2 = remove_edge(topology, coeffs, topology.edge_index("e3"))
        after = build_coefficient_matrices(topo2, coeffs2, 2, 2).M
        np.testing.assert_allclose(after, before, atol=0)

    def test_deletion_equals_zeroing_for_M(self, rng):
        for _ in range(10):
            topology, coeffs, n_in, n_out = random_dag(rng)
            edge = int(rng.integers(topology.edge_count))
            topo2, coeffs2 = remove_edge(topology, coeffs, edge)
            m_deleted = build_coefficient_matrices(topo2, coeffs2, n_in, n_out).M
            m_zeroed = build_coefficient_matrices(
                topology, zero_edge_coefficients(coeffs, edge), n_in, n_out
            ).M
            np.testing.assert_array_equal(m_deleted, m_zeroed)

    def test_unknown_edge(self):
        topology = diamond_topology()
        coeffs = diamond_coefficients(seeded_diamond_symbols(1))
        with pytest.raises(UnknownEdge):
            remove_edge(topology, coeffs, 17)

    def test_inputs_unchanged(self):
        topology = diamond_topology()
        coeffs = diamond_coefficients(seeded_diamond_symbols(8))
        alpha_before = dict(coeffs.alpha)
        remove_edge(topology, coeffs, 2)
        assert coeffs.alpha == alpha_before
        assert topology.edge_count == 5


class TestTopologyAlgebra:
    def test_neumann_sum_matches_inverse(self, rng):
        for _ in range(25):
            topology, coeffs, n_in, n_out = random_dag(rng)
            sys = build_coefficient_matrices(topology, coeffs, n_in, n_out)
            np.testing.assert_allclose(
                neumann_topology_sum(sys.F), sys.G, atol=1e-12, rtol=0
            )

    def test_canonical_order_makes_coupling_lower_triangular(self, rng):
        for _ in range(25):
            topology, coeffs, n_in, n_out = random_dag(rng)
            sys = build_coefficient_matrices(topology, coeffs, n_in, n_out)
            assert not np.any(np.triu(sys.F))

    def test_inverse_consistency_invariant(self, rng):
        topology, coeffs, n_in, n_out = random_dag(rng)
        sys = build_coefficient_matrices(topology, coeffs, n_in, n_out)
        eye = np.eye(topology.edge_count)
        np.testing.assert_allclose(sys.G @ (eye - sys.F), eye, atol=1e-12)
        np.testing.assert_allclose((eye - sys.F) @ sys.G, eye, atol=1e-12)


class TestSystemMatrices:
    def test_from_factors_validates_chain(self):
        with pytest.raises(ValueError):
            SystemMatrices.from_factors(np.eye(2), np.eye(3), np.eye(2))

    def test_from_factors_checks_inverse_pair(self):
        G = np.eye(2)
        F = np.array([[0.0, 0.5], [0.0, 0.0]])  # G != (I-F)^{-1}
        with pytest.raises(SingularIFError):
            SystemMatrices.from_factors(np.eye(2), G, np.eye(2), F=F)

    def test_topology_validates_membership(self):
        with pytest.raises(ValueError):
            NetworkTopology.from_edges(["a"], [("a", "zz")], ("a",), ("a",))
