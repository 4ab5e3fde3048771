"""Worked scenarios on the five-edge diamond network, network cuts, and a
precoder ascent demo.

The diamond network has four vertices: a source feeding two edges (e1, e2),
a relay chord (e3), and two edges into the sink (e4, e5).  Its compact
factors are 2x2:

    A_c = [[gamma_e4_1, gamma_e5_1],     G_c = [[beta_e1_e4,            0         ],
           [gamma_e4_2, gamma_e5_2]]            [beta_e1_e3*beta_e3_e5, beta_e2_e5]]

    B_c = [[alpha_1_e1, alpha_1_e2],
           [alpha_2_e1, alpha_2_e2]]

``alpha_i_ej`` names the entry at row i, column j of the compact precoding
block (row = source edge, column = input stream).

The (1,1) entry of the topology gradient ``A^H A G B E B^H`` expands into
24 monomials over these symbols (six per entry of E).  Two transcriptions
of the full expansion are kept: the one published with this network, and a
corrected version.  They differ in exactly one factor -- term 6 of the E11
group reads ``gamma_e4_1 * gamma_e5_2`` in the published list where the
matrix product yields ``gamma_e4_2 * gamma_e5_2``.  The comparison report
quantifies this erratum instead of hiding it; both lists stay available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CodedFlowError
from .estimator import EngineSpec, MmseMatrix, mmse_matrix
from .flowmodel import InputDistribution
from .infogradients import (
    MutualInformationValue,
    closed_gradient,
    effective_matrix,
    grad_mi_precoding,
    mutual_information,
)
from .netgraph import CodingCoefficients, NetworkTopology, SystemMatrices

# ---------------------------------------------------------------------------
# the diamond network
# ---------------------------------------------------------------------------

DIAMOND_SYMBOLS = (
    "gamma_e4_1",
    "gamma_e4_2",
    "gamma_e5_1",
    "gamma_e5_2",
    "beta_e1_e4",
    "beta_e1_e3",
    "beta_e3_e5",
    "beta_e2_e5",
    "alpha_1_e1",
    "alpha_1_e2",
    "alpha_2_e1",
    "alpha_2_e2",
)


def diamond_topology() -> NetworkTopology:
    return NetworkTopology.from_edges(
        vertices=("v1", "v2", "v3", "v4"),
        edges=[("v1", "v2"), ("v1", "v3"), ("v2", "v3"), ("v2", "v4"), ("v3", "v4")],
        sources=("v1",),
        sinks=("v4",),
        edge_names=("e1", "e2", "e3", "e4", "e5"),
    )


def diamond_coefficients(symbols) -> CodingCoefficients:
    """Coefficient maps for the diamond network from a symbol assignment.

    Source couplings follow the compact-block placement documented in the
    module docstring: symbol ``alpha_i_ej`` lands on source edge i, input j.
    """
    missing = [s for s in DIAMOND_SYMBOLS if s not in symbols]
    if missing:
        raise CodedFlowError(f"missing coefficients: {', '.join(missing)}")
    s = symbols
    e1, e2, e3, e4, e5 = range(5)
    alpha = {
        (0, e1): s["alpha_1_e1"],
        (1, e1): s["alpha_1_e2"],
        (0, e2): s["alpha_2_e1"],
        (1, e2): s["alpha_2_e2"],
    }
    beta = {
        (e1, e4): s["beta_e1_e4"],
        (e1, e3): s["beta_e1_e3"],
        (e3, e5): s["beta_e3_e5"],
        (e2, e5): s["beta_e2_e5"],
    }
    gamma = {
        (0, e4): s["gamma_e4_1"],
        (1, e4): s["gamma_e4_2"],
        (0, e5): s["gamma_e5_1"],
        (1, e5): s["gamma_e5_2"],
    }
    return CodingCoefficients(alpha=alpha, beta=beta, gamma=gamma)


def diamond_compact_matrices(symbols):
    """The three 2x2 compact factors, directly from the symbol table."""
    s = symbols
    A_c = np.array(
        [[s["gamma_e4_1"], s["gamma_e5_1"]], [s["gamma_e4_2"], s["gamma_e5_2"]]],
        dtype=complex,
    )
    G_c = np.array(
        [
            [s["beta_e1_e4"], 0.0],
            [s["beta_e1_e3"] * s["beta_e3_e5"], s["beta_e2_e5"]],
        ],
        dtype=complex,
    )
    B_c = np.array(
        [[s["alpha_1_e1"], s["alpha_1_e2"]], [s["alpha_2_e1"], s["alpha_2_e2"]]],
        dtype=complex,
    )
    return A_c, G_c, B_c


def diamond_compact_system(symbols) -> SystemMatrices:
    A_c, G_c, B_c = diamond_compact_matrices(symbols)
    return SystemMatrices.from_factors(A_c, G_c, B_c, form="compact")


def seeded_diamond_symbols(seed: int, low: float = 0.3, high: float = 1.0) -> dict:
    """Real coefficient draw, one uniform per symbol in a fixed order."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(0xD1A)])
    rng = np.random.Generator(np.random.Philox(key=key))
    return {name: float(rng.uniform(low, high)) for name in DIAMOND_SYMBOLS}


# ---------------------------------------------------------------------------
# the expanded (1,1) topology-gradient entry
# ---------------------------------------------------------------------------

_A11, _A12, _A21, _A22 = "alpha_1_e1", "alpha_1_e2", "alpha_2_e1", "alpha_2_e2"
_G41, _G42, _G51, _G52 = "gamma_e4_1", "gamma_e4_2", "gamma_e5_1", "gamma_e5_2"
_B14, _B13, _B35, _B25 = "beta_e1_e4", "beta_e1_e3", "beta_e3_e5", "beta_e2_e5"


def _group(row, col, left, right):
    """Six monomials tied to one entry of E; ``left``/``right`` are the
    trailing source-coupling factors of that group."""
    return [
        (row, col, (_G41, _G41, _B14, left, right)),
        (row, col, (_G41, _G51, _B13, _B35, left, right)),
        (row, col, (_G41, _G51, _B25, *_swap_first(left, right))),
        (row, col, (_G42, _G42, _B14, left, right)),
        (row, col, (_G42, _G52, _B13, _B35, left, right)),
        (row, col, (_G42, _G52, _B25, *_swap_first(left, right))),
    ]


def _swap_first(left, right):
    # the beta_e2_e5 terms replace the leading alpha_1_* factor with alpha_2_*
    swap = {_A11: _A21, _A12: _A22}
    return (swap[left], right)


TERMS_FULL_CORRECTED = tuple(
    _group(0, 0, _A11, _A11)
    + _group(0, 1, _A11, _A12)
    + _group(1, 0, _A12, _A11)
    + _group(1, 1, _A12, _A12)
)

# The published transcription: identical except term 6 of the E11 group,
# whose gamma pair reads (e4_1, e5_2) instead of (e4_2, e5_2).
_printed = [list(t) for t in TERMS_FULL_CORRECTED]
_printed[5][2] = (_G41, _G52, _B25, _A21, _A11)
TERMS_FULL_PRINTED = tuple((r, c, tuple(f)) for r, c, f in _printed)
ERRATUM_TERM_INDEX = 5

_REMOVED_BY_VARIANT = {
    "no-e3": frozenset({_B13, _B35}),
    "no-e2e5": frozenset({_B25, _B35, _G51, _G52}),
}


def reduce_terms(terms, zeroed_symbols):
    """Drop every monomial containing a zeroed symbol."""
    zeroed = frozenset(zeroed_symbols)
    return tuple(t for t in terms if not zeroed & set(t[2]))


TERMS_NO_E3 = reduce_terms(TERMS_FULL_PRINTED, _REMOVED_BY_VARIANT["no-e3"])
TERMS_NO_E2E5 = reduce_terms(TERMS_FULL_PRINTED, _REMOVED_BY_VARIANT["no-e2e5"])


@dataclass(frozen=True)
class Grad11Expansion:
    """One variant of the expanded gradient entry, stored term by term."""

    variant: str
    terms: tuple

    @property
    def term_count(self) -> int:
        return len(self.terms)

    def evaluate(self, symbols, error_matrix) -> complex:
        missing = sorted({f for _, _, fs in self.terms for f in fs} - set(symbols))
        if missing:
            raise CodedFlowError(f"missing coefficients: {', '.join(missing)}")
        E = np.asarray(error_matrix, dtype=complex)
        total = 0.0 + 0.0j
        for row, col, factors in self.terms:
            value = E[row, col]
            for f in factors:
                value = value * symbols[f]
            total += value
        return complex(total)


EXPANSIONS = {
    "full": Grad11Expansion("full", TERMS_FULL_PRINTED),
    "full-corrected": Grad11Expansion("full-corrected", TERMS_FULL_CORRECTED),
    "no-e3": Grad11Expansion("no-e3", TERMS_NO_E3),
    "no-e2e5": Grad11Expansion("no-e2e5", TERMS_NO_E2E5),
}


def topology_grad11(variant: str, symbols, error_matrix) -> complex:
    """Evaluate one printed expansion variant term by term, no simplification."""
    return EXPANSIONS[variant].evaluate(symbols, error_matrix)


def grad11_matrix_form(symbols, error_matrix) -> complex:
    """(1,1) of A_c^H A_c G_c B_c E B_c^H from the compact factors."""
    A_c, G_c, B_c = diamond_compact_matrices(symbols)
    E = np.asarray(error_matrix, dtype=complex)
    return complex((A_c.conj().T @ A_c @ G_c @ B_c @ E @ B_c.conj().T)[0, 0])


def erratum_delta(symbols, error_matrix) -> complex:
    """Value of (published - corrected): the single divergent monomial pair."""
    E = np.asarray(error_matrix, dtype=complex)
    s = symbols
    printed = s[_G41] * s[_G52] * s[_B25] * s[_A21] * s[_A11]
    corrected = s[_G42] * s[_G52] * s[_B25] * s[_A21] * s[_A11]
    return complex(E[0, 0] * (printed - corrected))


@dataclass(frozen=True)
class ExpansionCheck:
    """Per-draw comparison of the printed expansion against the matrix form."""

    seeds: tuple
    printed_values: np.ndarray
    corrected_values: np.ndarray
    matrix_values: np.ndarray
    printed_gap: np.ndarray
    corrected_gap: np.ndarray
    attribution_gap: np.ndarray

    @property
    def max_printed_gap(self) -> float:
        return float(self.printed_gap.max())

    @property
    def max_corrected_gap(self) -> float:
        return float(self.corrected_gap.max())

    @property
    def max_attribution_gap(self) -> float:
        return float(self.attribution_gap.max())

    def erratum_confirmed(self, tol: float = 1e-10) -> bool:
        """True when the corrected list matches the matrix form and the
        published/matrix discrepancy is exactly the known divergent term."""
        return self.max_corrected_gap <= tol and self.max_attribution_gap <= tol


def grad11_matches_matrix_form(draws: int = 100, seed: int = 7_2025, low: float = -1.0, high: float = 1.0) -> ExpansionCheck:
    """Compare both expansion transcriptions with the compact matrix product.

    Each draw assigns independent real uniforms to the twelve coefficients
    and a real 2x2 matrix to E (the identity is algebraic, so E need not be
    a valid error matrix here).
    """
    key = np.array([np.uint64(seed), np.uint64(0x9511)])
    rng = np.random.Generator(np.random.Philox(key=key))
    printed_values = np.zeros(draws, dtype=complex)
    corrected_values = np.zeros(draws, dtype=complex)
    matrix_values = np.zeros(draws, dtype=complex)
    printed_gap = np.zeros(draws)
    corrected_gap = np.zeros(draws)
    attribution_gap = np.zeros(draws)
    for d in range(draws):
        symbols = {name: float(rng.uniform(low, high)) for name in DIAMOND_SYMBOLS}
        E = rng.uniform(low, high, size=(2, 2))
        matrix_values[d] = grad11_matrix_form(symbols, E)
        printed_values[d] = topology_grad11("full", symbols, E)
        corrected_values[d] = topology_grad11("full-corrected", symbols, E)
        printed_gap[d] = abs(printed_values[d] - matrix_values[d])
        corrected_gap[d] = abs(corrected_values[d] - matrix_values[d])
        attribution_gap[d] = abs(
            printed_values[d] - matrix_values[d] - erratum_delta(symbols, E)
        )
    return ExpansionCheck(
        seeds=(seed,),
        printed_values=printed_values,
        corrected_values=corrected_values,
        matrix_values=matrix_values,
        printed_gap=printed_gap,
        corrected_gap=corrected_gap,
        attribution_gap=attribution_gap,
    )


# ---------------------------------------------------------------------------
# network cuts
# ---------------------------------------------------------------------------

_CUT_NOISE_LABEL = {"source": "n~", "mid": "n~~", "full": "n"}
_CUT_TARGETS = {"source": ("B",), "mid": ("B", "G"), "full": ("A", "G", "B")}


@dataclass(frozen=True)
class CutSpec:
    """Where the flow is sliced; fixes the effective channel matrix."""

    cut: str

    def __post_init__(self):
        if self.cut not in _CUT_NOISE_LABEL:
            raise ValueError(f"unknown cut {self.cut!r}")

    @property
    def noise_label(self) -> str:
        return _CUT_NOISE_LABEL[self.cut]

    def effective(self, sys: SystemMatrices) -> np.ndarray:
        return effective_matrix(self.cut, sys)


@dataclass(frozen=True)
class CutReport:
    cut: str
    mi: MutualInformationValue
    mmse: MmseMatrix
    gradients: dict


def cut_analysis(cut, sys: SystemMatrices, dist: InputDistribution, spec: EngineSpec = EngineSpec()) -> CutReport:
    """Mutual information, error matrix, and closed-form gradients for one cut."""
    cut_spec = cut if isinstance(cut, CutSpec) else CutSpec(cut)
    channel = cut_spec.effective(sys)
    mi = mutual_information(channel, dist, spec)
    err = mmse_matrix(channel, dist, spec)
    gradients = {
        target: closed_gradient(sys, err, target, cut_spec.cut)
        for target in _CUT_TARGETS[cut_spec.cut]
    }
    return CutReport(cut=cut_spec.cut, mi=mi, mmse=err, gradients=gradients)


# ---------------------------------------------------------------------------
# precoder ascent
# ---------------------------------------------------------------------------


def precoder_ascent(
    sys: SystemMatrices,
    dist: InputDistribution,
    step: float,
    iterations: int,
    norm_budget: float,
    spec: EngineSpec = EngineSpec(),
    *,
    halvings: int = 40,
):
    """Projected gradient ascent on the precoding matrix.

    After each gradient step the precoder is rescaled to Frobenius norm
    ``norm_budget``.  When a step would decrease the information it is
    halved until the ascent resumes (up to ``halvings`` times); a
    non-finite gradient aborts, returning the trajectory collected so far.
    Returns a list of (B, information-in-nats) pairs, one per iteration
    plus the starting point.
    """
    if step < 0:
        raise ValueError("step must be >= 0")
    if norm_budget <= 0:
        raise ValueError("norm budget must be > 0")

    def evaluate(B):
        trial = SystemMatrices.from_factors(sys.A, sys.G, B, form=sys.form)
        err = mmse_matrix(trial.M, dist, spec)
        info = mutual_information(trial.M, dist, spec).nats
        return trial, err, info

    def project(B):
        norm = np.linalg.norm(B)
        if norm == 0.0:
            B = np.eye(B.shape[0], B.shape[1], dtype=complex)
            norm = np.linalg.norm(B)
        return B * (norm_budget / norm)

    current = np.array(sys.B, dtype=complex)
    trial, err, info = evaluate(current)
    trajectory = [(current.copy(), info)]
    for _ in range(iterations):
        if step == 0.0:
            trajectory.append((current.copy(), info))
            continue
        gradient = grad_mi_precoding(trial, err)
        if not np.all(np.isfinite(gradient)):
            break
        size = step
        for _ in range(halvings + 1):
            candidate = project(current + size * gradient)
            cand_trial, cand_err, cand_info = evaluate(candidate)
            if cand_info >= info - 1e-12:
                break
            size /= 2.0
        else:
            break
        current, trial, err, info = candidate, cand_trial, cand_err, cand_info
        trajectory.append((current.copy(), info))
    return trajectory
