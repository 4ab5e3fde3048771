"""Conditional-mean estimation and the MMSE error matrix.

The posterior mean ``xhat(z) = E[x|z]`` is computed by exact posterior
summation for discrete inputs and by the linear closed form
``M^H (I + M M^H)^{-1} z`` for Gaussian inputs.  The error matrix
``E[(x - xhat)(x - xhat)^H]`` is evaluated either by tensorized
Gauss-Hermite quadrature over the output space (guarded at three complex
output dimensions) or by Monte Carlo with batch-means standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import flowmodel
from .errors import CostGuardError, SingularSystemMatrix
from .flowmodel import InputDistribution, SampleBatch
from .netgraph import SystemMatrices
from .quadrature import complex_gauss_hermite, default_nodes

_SE_BATCHES = 32
_HERMITIAN_TOL = 1e-10
_PSD_FLOOR = -1e-10
_DOMINANCE_FLOOR = -1e-8
_MC_MIN_SAMPLES = 1000
_QUAD_BLOCK = 1 << 17
_SYSTEM_CONDITION_LIMIT = 1e10


@dataclass(frozen=True)
class EngineSpec:
    """How expectations are evaluated: exact quadrature or Monte Carlo."""

    method: str = "quadrature"
    nodes: int | None = None
    samples: int = 100_000
    seed: int = 0
    workers: int = 1
    batches: int = _SE_BATCHES

    def __post_init__(self):
        if self.method not in ("quadrature", "mc"):
            raise ValueError(f"unknown engine method {self.method!r}")

    def resolve_nodes(self, dim: int) -> int:
        return self.nodes if self.nodes is not None else default_nodes(dim)

    def with_seed(self, seed: int) -> "EngineSpec":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class MmseMatrix:
    """Hermitian PSD error matrix E[(x - xhat)(x - xhat)^H] with provenance.

    ``standard_error`` is a per-entry batch-means estimate (Monte Carlo
    only).  Construction enforces Hermitian symmetry to 1e-10, positive
    semidefiniteness to -1e-10, and dominance by the input covariance; the
    dominance floor is widened by five standard errors for Monte-Carlo
    estimates, whose fluctuation is quantified rather than zero.
    """

    matrix: np.ndarray
    method: str
    count: int
    standard_error: np.ndarray | None = None

    @classmethod
    def checked(cls, matrix, method, count, input_covariance, standard_error=None):
        matrix = np.asarray(matrix, dtype=complex)
        herm_gap = float(np.max(np.abs(matrix - matrix.conj().T), initial=0.0))
        if herm_gap > _HERMITIAN_TOL:
            raise ValueError(f"error matrix is not Hermitian: gap {herm_gap:.2e}")
        matrix = 0.5 * (matrix + matrix.conj().T)
        eigs = np.linalg.eigvalsh(matrix)
        se_scale = 0.0
        if standard_error is not None:
            se_scale = float(np.linalg.norm(standard_error))
        if eigs.min(initial=0.0) < _PSD_FLOOR - 5.0 * se_scale:
            raise ValueError(f"error matrix has eigenvalue {eigs.min():.2e} below the PSD floor")
        gap_eigs = np.linalg.eigvalsh(np.asarray(input_covariance) - matrix)
        if gap_eigs.min(initial=0.0) < _DOMINANCE_FLOOR - 5.0 * se_scale:
            raise ValueError(
                f"error matrix exceeds the input covariance: eigenvalue {gap_eigs.min():.2e}"
            )
        matrix.setflags(write=False)
        return cls(matrix=matrix, method=method, count=count, standard_error=standard_error)

    @property
    def E(self) -> np.ndarray:
        return self.matrix


def _as_matrix(system) -> np.ndarray:
    if isinstance(system, SystemMatrices):
        return system.M
    return np.asarray(system, dtype=complex)


# ---------------------------------------------------------------------------
# conditional mean
# ---------------------------------------------------------------------------


def _gaussian_estimator_matrix(M: np.ndarray) -> np.ndarray:
    """M^H (I + M M^H)^{-1}, the linear MMSE filter for unit-covariance inputs."""
    cov = np.eye(M.shape[0], dtype=complex) + M @ M.conj().T
    return M.conj().T @ np.linalg.inv(cov)


def conditional_mean(M, dist: InputDistribution, z) -> np.ndarray:
    """Posterior mean of the input given one observed output vector."""
    M = np.asarray(M, dtype=complex)
    z = np.asarray(z, dtype=complex)
    return conditional_mean_batch(M, dist, z[None, :])[0]


def conditional_mean_batch(M, dist: InputDistribution, points) -> np.ndarray:
    """Posterior means for a batch of output vectors, shape (N, n_in)."""
    M = np.asarray(M, dtype=complex)
    points = np.asarray(points, dtype=complex)
    if dist.kind == "gaussian":
        return points @ _gaussian_estimator_matrix(M).T
    means = dist.support @ M.T
    return flowmodel.mixture_posterior_mean(means, dist.log_probs, dist.support, points)


# ---------------------------------------------------------------------------
# quadrature moments
# ---------------------------------------------------------------------------


def quadrature_moments(M, dist: InputDistribution, nodes: int | None = None, *, want_mmse=True, want_mi=True):
    """Exact-expectation pass over the output density of a discrete input.

    Returns ``(mi_nats, error_matrix, node_count)``; either output may be
    ``None`` if not requested.  Writing the exponent of component j at the
    point ``mean_k + noise`` as ``c_j + 2 S[j,k] + 2 T[q,j]`` (with S the
    mean Gram matrix and T the noise/mean cross terms) keeps the cost at
    one small matrix product plus one log-sum-exp sweep per support point.
    """
    M = np.asarray(M, dtype=complex)
    if dist.kind != "discrete":
        raise ValueError("quadrature_moments expects a discrete input")
    n_out = M.shape[0]
    nodes = nodes if nodes is not None else default_nodes(n_out)
    noise, weights = complex_gauss_hermite(n_out, nodes)

    support = dist.support
    probs = dist.probs
    means = support @ M.T
    m2 = np.sum(np.abs(means) ** 2, axis=1)
    c = dist.log_probs - m2
    S = np.real(means.conj() @ means.T)  # S[j, k]
    K = len(probs)

    mi_total = 0.0 if want_mi else None
    err_total = np.zeros((dist.dimension, dist.dimension), dtype=complex) if want_mmse else None

    for start in range(0, noise.shape[0], _QUAD_BLOCK):
        block = noise[start : start + _QUAD_BLOCK]
        wq = weights[start : start + _QUAD_BLOCK]
        T = np.real(block @ means.conj().T)  # (q, j)
        for k in range(K):
            ex = (c + 2.0 * S[:, k])[None, :] + 2.0 * T
            mx = ex.max(axis=1)
            np.subtract(ex, mx[:, None], out=ex)
            np.exp(ex, out=ex)
            total = ex.sum(axis=1)
            if want_mi:
                lse = mx + np.log(total)
                mi_total += probs[k] * float(wq @ (m2[k] + 2.0 * T[:, k] - lse))
            if want_mmse:
                ex /= total[:, None]
                resid = support[k][None, :] - ex @ support
                err_total += probs[k] * np.einsum("q,qi,qj->ij", wq, resid, resid.conj())

    return mi_total, err_total, nodes


# ---------------------------------------------------------------------------
# Monte Carlo moments
# ---------------------------------------------------------------------------


def _batch_se(values: np.ndarray, batches: int):
    """Batch-means standard error along axis 0; works for complex arrays."""
    splits = np.array_split(values, batches)
    means = np.stack([np.mean(b, axis=0) for b in splits])
    var = np.var(means.real, axis=0, ddof=1) + np.var(means.imag, axis=0, ddof=1)
    return np.sqrt(var / batches)


def mc_moments(M, dist: InputDistribution, spec: EngineSpec, *, want_mmse=True, want_mi=True, batch: SampleBatch | None = None):
    """Monte-Carlo estimates of mutual information and the error matrix.

    Returns ``(mi, mi_se, error_matrix, error_se, count)``.  A pre-drawn
    ``batch`` may be supplied for common-random-number workflows.
    """
    M = np.asarray(M, dtype=complex)
    if spec.samples < _MC_MIN_SAMPLES and batch is None:
        raise CostGuardError(f"Monte Carlo needs at least {_MC_MIN_SAMPLES} samples")
    if batch is None:
        batch = flowmodel.sample(M, dist, spec.seed, spec.samples, workers=spec.workers)
    x, z = batch.inputs, batch.outputs
    n_out = M.shape[0]

    mi = mi_se = None
    if want_mi:
        log_cond = -n_out * np.log(np.pi) - np.sum(np.abs(z - x @ M.T) ** 2, axis=1)
        if dist.kind == "gaussian":
            cov = flowmodel._output_moments(M)
            _, logdet = np.linalg.slogdet(cov)
            quad = np.real(np.einsum("ni,ni->n", z.conj(), z @ np.linalg.inv(cov).T))
            log_pz = -n_out * np.log(np.pi) - logdet - quad
        else:
            means = dist.support @ M.T
            log_pz = flowmodel.mixture_log_density(means, dist.log_probs, z)
        info_samples = log_cond - log_pz
        mi = float(np.mean(info_samples))
        mi_se = float(_batch_se(info_samples, spec.batches))

    err = err_se = None
    if want_mmse:
        resid = x - conditional_mean_batch(M, dist, z)
        outer = np.einsum("ni,nj->nij", resid, resid.conj())
        err = np.mean(outer, axis=0)
        err_se = _batch_se(outer, spec.batches)

    return mi, mi_se, err, err_se, batch.count


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def mmse_matrix(M, dist: InputDistribution, spec: EngineSpec = EngineSpec()) -> MmseMatrix:
    """Error matrix of the conditional-mean estimator for the channel M.

    Gaussian inputs use the closed form ``(I + M^H M)^{-1}`` (tagged
    ``exact``); discrete inputs use quadrature or Monte Carlo per ``spec``.
    """
    M = _as_matrix(M)
    cov = (
        np.eye(dist.dimension, dtype=complex)
        if dist.kind == "gaussian"
        else dist.covariance()
    )
    if dist.kind == "gaussian" and spec.method == "quadrature":
        eye = np.eye(M.shape[1], dtype=complex)
        exact = np.linalg.inv(eye + M.conj().T @ M)
        return MmseMatrix.checked(exact, "exact", 0, cov)
    if spec.method == "quadrature":
        _, err, nodes = quadrature_moments(M, dist, spec.resolve_nodes(M.shape[0]), want_mi=False)
        return MmseMatrix.checked(err, "quadrature", nodes, cov)
    _, _, err, err_se, count = mc_moments(M, dist, spec, want_mi=False)
    return MmseMatrix.checked(err, "monte-carlo", count, cov, standard_error=err_se)


def score_identity_residual(system, dist: InputDistribution, z) -> float:
    """Norm of ``M xhat(z) - (z + score(z))``; zero up to numerics."""
    M = _as_matrix(system)
    z = np.asarray(z, dtype=complex)
    lhs = M @ conditional_mean(M, dist, z)
    rhs = z + flowmodel.output_score(M, dist, z)
    return float(np.linalg.norm(lhs - rhs))


def invert_flow_estimate(system: SystemMatrices, dist: InputDistribution, z) -> np.ndarray:
    """Recover the posterior mean through the factored inverse filter.

    Computes ``B^{-1} G^{-1} A^{-1} (z + score(z))``, which equals the
    conditional mean wherever the end-to-end matrix is invertible.  When
    the coupling matrix F is available, ``G^{-1}`` is applied as ``I - F``
    instead of a numerical inverse.
    """
    z = np.asarray(z, dtype=complex)
    A, G, B = system.A, system.G, system.B
    if system.M.shape[0] != system.M.shape[1]:
        raise SingularSystemMatrix("transfer matrix must be square to invert the flow")
    for name, factor in (("A", A), ("G", G), ("B", B)):
        if factor.shape[0] != factor.shape[1]:
            raise SingularSystemMatrix(f"factor {name} is not square; cannot factor the inverse")
    if np.linalg.cond(system.M) > _SYSTEM_CONDITION_LIMIT:
        raise SingularSystemMatrix("transfer matrix condition estimate exceeds 1e10")
    v = z + flowmodel.output_score(system.M, dist, z)
    w = np.linalg.solve(A, v)
    if system.F is not None:
        u = (np.eye(G.shape[0]) - system.F) @ w
    else:
        u = np.linalg.solve(G, w)
    return np.linalg.solve(B, u)


def estimation_diagnostics(M, dist: InputDistribution, batch: SampleBatch, batches: int = _SE_BATCHES):
    """Orthogonality and tower-property residuals with batch-means errors.

    Returns a dict with the cross-moment ``E[(x - xhat) z^H]`` and the
    posterior-mean bias ``E[xhat] - E[x]``, each paired with per-entry
    standard errors.
    """
    M = np.asarray(M, dtype=complex)
    x, z = batch.inputs, batch.outputs
    xhat = conditional_mean_batch(M, dist, z)
    resid = x - xhat
    cross = np.einsum("ni,nj->nij", resid, z.conj())
    return {
        "orthogonality": np.mean(cross, axis=0),
        "orthogonality_se": _batch_se(cross, batches),
        "tower_gap": np.mean(xhat, axis=0) - dist.mean(),
        "tower_se": _batch_se(xhat, batches),
    }
