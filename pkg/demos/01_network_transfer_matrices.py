"""Building a coded-flow network and its transfer matrices.

The running example is the five-edge diamond: one source v1 feeding two
branch edges, a relay chord between the branches, and two edges into the
sink v4.  We assemble the coefficient matrices, look at how paths appear as
products inside the topology matrix, reduce everything to the compact 2x2
factors, and watch what edge removal does.
"""

import numpy as np

from codedflow import (
    build_coefficient_matrices,
    compact_form,
    diamond_coefficients,
    diamond_topology,
    neumann_topology_sum,
    remove_edge,
    seeded_diamond_symbols,
)

np.set_printoptions(precision=4, suppress=True)

# A topology is an ordered vertex list plus ordered edges; edges are kept in
# topological order of their tail vertices so the coupling matrix F is
# strictly lower triangular.
topology = diamond_topology()
print("edges:", dict(zip(topology.edge_names, topology.edges)))
print("acyclic:", topology.is_acyclic)

# Draw real coefficients for every slot the topology allows.
symbols = seeded_diamond_symbols(seed=7)
coeffs = diamond_coefficients(symbols)
system = build_coefficient_matrices(topology, coeffs, n_in=2, n_out=2)

print("\ncoupling matrix F (edge-to-edge):")
print(system.F.real)

# G = (I - F)^{-1} accumulates every path through the network.  Entry
# (e5, e1) is the two-hop product beta_e1_e3 * beta_e3_e5.
print("\ntopology matrix G:")
print(system.G.real)
print("two-hop path product:", symbols["beta_e1_e3"] * symbols["beta_e3_e5"])

# For an acyclic network the finite Neumann sum gives the same inverse.
print("Neumann sum equals G:", np.allclose(neumann_topology_sum(system.F), system.G))

# The compact form restricts rows/columns to sink-incoming and
# source-outgoing edges; the product is unchanged.
A_c, G_c, B_c = compact_form(system, topology)
print("\ncompact topology block:")
print(G_c.real)
print("A_c G_c B_c == M:", np.allclose(A_c @ G_c @ B_c, system.M))

# Removing the relay chord e3 kills the cross path: the compact block
# becomes diagonal and the transfer matrix loses the interference term.
topo2, coeffs2 = remove_edge(topology, coeffs, topology.edge_index("e3"))
system2 = build_coefficient_matrices(topo2, coeffs2, n_in=2, n_out=2)
_, G_c2, _ = compact_form(system2, topo2)
print("\nafter removing the chord:")
print(G_c2.real)
