"""Probabilistic model of the coded-flow channel ``z = M x + n``.

Noise is circularly-symmetric complex Gaussian with unit variance per
component, so the conditional density is
``p(z|x) = pi**(-n) * exp(-||z - M x||**2)``.  Inputs are either a finite
complex constellation with point probabilities or a unit-covariance complex
Gaussian; Gaussian inputs use exact closed forms for the output density and
score instead of mixture sums.

All log-densities are computed in the log domain with a max-shifted
sum-exp; an output log-density below -700 raises ``DensityUnderflow``
rather than silently flushing to zero.

Score convention: the gradient with respect to the output is taken in
conjugate coordinates, entry k being ``(d/dRe z_k + i d/dIm z_k) / 2``
applied to ``log p(z)``.  Under this convention the posterior-mean identity
``M E[x|z] = z + score(z)`` holds exactly.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DensityUnderflow, EmptySupport

LOG_UNDERFLOW = -700.0
_PROB_TOL = 1e-12
_SAMPLE_CHUNK = 4096
_POINT_CHUNK = 1 << 17

_QPSK_SYMBOLS = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


@dataclass(frozen=True)
class InputDistribution:
    """Input law of the flow vector: finite support or unit Gaussian."""

    kind: str
    dimension: int
    support: np.ndarray | None = None
    probs: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("discrete", "gaussian"):
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.kind == "discrete":
            if self.support is None or len(self.support) == 0:
                raise EmptySupport("discrete input needs at least one support point")
            support = np.atleast_2d(np.asarray(self.support, dtype=complex))
            if support.shape[1] != self.dimension:
                raise ValueError("support vectors do not match the declared dimension")
            probs = (
                np.full(len(support), 1.0 / len(support))
                if self.probs is None
                else np.asarray(self.probs, dtype=float)
            )
            if probs.shape != (len(support),):
                raise ValueError("probs length must match support")
            if np.any(probs < 0) or abs(probs.sum() - 1.0) > _PROB_TOL:
                raise ValueError("probs must be nonnegative and sum to 1 within 1e-12")
            support.setflags(write=False)
            probs.setflags(write=False)
            object.__setattr__(self, "support", support)
            object.__setattr__(self, "probs", probs)

    # -- constructors ---------------------------------------------------

    @classmethod
    def discrete(cls, support, probs=None) -> "InputDistribution":
        support = np.atleast_2d(np.asarray(support, dtype=complex))
        return cls(kind="discrete", dimension=support.shape[1], support=support, probs=probs)

    @classmethod
    def point(cls, x0) -> "InputDistribution":
        """Deterministic input: a single support point with probability 1."""
        x0 = np.atleast_1d(np.asarray(x0, dtype=complex))
        return cls.discrete(x0[None, :])

    @classmethod
    def bpsk(cls, dimension: int = 1) -> "InputDistribution":
        symbols = np.array([1.0, -1.0], dtype=complex)
        return cls.discrete(_product_constellation(symbols, dimension))

    @classmethod
    def qpsk(cls, dimension: int = 1) -> "InputDistribution":
        return cls.discrete(_product_constellation(_QPSK_SYMBOLS, dimension))

    @classmethod
    def gaussian(cls, dimension: int) -> "InputDistribution":
        return cls(kind="gaussian", dimension=dimension)

    # -- moments ----------------------------------------------------------

    @property
    def log_probs(self) -> np.ndarray:
        return np.log(self.probs)

    def mean(self) -> np.ndarray:
        if self.kind == "gaussian":
            return np.zeros(self.dimension, dtype=complex)
        return self.probs @ self.support

    def covariance(self) -> np.ndarray:
        if self.kind == "gaussian":
            return np.eye(self.dimension, dtype=complex)
        mu = self.mean()
        centered = self.support - mu
        return np.einsum("k,ki,kj->ij", self.probs, centered, centered.conj())

    def entropy_nats(self) -> float:
        """Shannon entropy of a discrete input; infinite for Gaussian."""
        if self.kind == "gaussian":
            return np.inf
        p = self.probs[self.probs > 0]
        return float(-(p @ np.log(p)))


def _product_constellation(symbols: np.ndarray, dimension: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(len(symbols))] * dimension), indexing="ij")
    index = np.stack(grids, axis=-1).reshape(-1, dimension)
    return symbols[index]


@dataclass(frozen=True)
class NoiseModel:
    """Circularly-symmetric complex Gaussian noise, unit variance per component."""

    dimension: int

    def log_density(self, v) -> float:
        v = np.asarray(v, dtype=complex)
        return float(-self.dimension * np.log(np.pi) - np.sum(np.abs(v) ** 2))

    def density(self, v) -> float:
        return float(np.exp(self.log_density(v)))


@dataclass(frozen=True)
class SampleBatch:
    """Paired (x, z) draws; identical (seed, count, model) gives identical arrays."""

    seed: int
    count: int
    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        self.inputs.setflags(write=False)
        self.outputs.setflags(write=False)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


def log_conditional_density(M, x, z) -> float:
    """log p(z|x) = -n log(pi) - ||z - Mx||^2."""
    M = np.asarray(M, dtype=complex)
    x = np.asarray(x, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if x.shape != (M.shape[1],) or z.shape != (M.shape[0],):
        raise ValueError(
            f"dimension mismatch: M{M.shape}, x{x.shape}, z{z.shape}"
        )
    resid = z - M @ x
    return float(-M.shape[0] * np.log(np.pi) - np.sum(np.abs(resid) ** 2))


def conditional_density(M, x, z) -> float:
    return float(np.exp(log_conditional_density(M, x, z)))


def _output_moments(M) -> np.ndarray:
    """Output covariance I + M M^H for a unit-covariance Gaussian input."""
    M = np.asarray(M, dtype=complex)
    return np.eye(M.shape[0], dtype=complex) + M @ M.conj().T


def log_output_density(M, dist: InputDistribution, z) -> float:
    """log p(z) for the mixture (discrete input) or Gaussian closed form."""
    M = np.asarray(M, dtype=complex)
    z = np.asarray(z, dtype=complex)
    n_out = M.shape[0]
    if z.shape != (n_out,):
        raise ValueError(f"z has shape {z.shape}, expected ({n_out},)")
    if dist.kind == "gaussian":
        cov = _output_moments(M)
        _, logdet = np.linalg.slogdet(cov)
        quad = float(np.real(z.conj() @ np.linalg.solve(cov, z)))
        value = -n_out * np.log(np.pi) - logdet - quad
    else:
        means = dist.support @ M.T
        value = float(
            mixture_log_density(means, dist.log_probs, z[None, :], check_underflow=False)[0]
        )
    if value < LOG_UNDERFLOW:
        raise DensityUnderflow(f"log p(z) = {value:.1f} fell below {LOG_UNDERFLOW}")
    return value


def output_density(M, dist: InputDistribution, z) -> float:
    return float(np.exp(log_output_density(M, dist, z)))


def output_score(M, dist: InputDistribution, z) -> np.ndarray:
    """Conjugate-coordinate gradient of log p(z).

    For the unit-variance model this equals ``-(z - M E[x|z])``: each
    mixture component contributes ``(Mx - z)`` weighted by its posterior
    probability.  Gaussian inputs use ``-(I + M M^H)^{-1} z`` directly.
    """
    M = np.asarray(M, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if dist.kind == "gaussian":
        log_output_density(M, dist, z)  # dimension + underflow guard
        return -np.linalg.solve(_output_moments(M), z)
    means = dist.support @ M.T
    log_pz, posterior = _posterior_weights(means, dist.log_probs, z[None, :])
    if log_pz[0] < LOG_UNDERFLOW:
        raise DensityUnderflow(f"log p(z) = {log_pz[0]:.1f} fell below {LOG_UNDERFLOW}")
    return (posterior[0] @ means) - z


# ---------------------------------------------------------------------------
# batched mixture evaluation (shared by the estimation and information layers)
# ---------------------------------------------------------------------------


def mixture_log_density(means, log_probs, points, *, check_underflow=True) -> np.ndarray:
    """log p(z) at many points for a complex-Gaussian mixture with unit noise.

    ``means`` has shape (K, n), ``points`` (N, n); returns shape (N,).
    """
    means = np.asarray(means, dtype=complex)
    points = np.asarray(points, dtype=complex)
    n = means.shape[1]
    offsets = log_probs - np.sum(np.abs(means) ** 2, axis=1)
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], _POINT_CHUNK):
        block = points[start : start + _POINT_CHUNK]
        ex = offsets[None, :] + 2.0 * np.real(block @ means.conj().T)
        mx = ex.max(axis=1)
        np.subtract(ex, mx[:, None], out=ex)
        np.exp(ex, out=ex)
        lse = mx + np.log(ex.sum(axis=1))
        out[start : start + block.shape[0]] = (
            lse - np.sum(np.abs(block) ** 2, axis=1) - n * np.log(np.pi)
        )
    if check_underflow and np.any(out < LOG_UNDERFLOW):
        worst = float(out.min())
        raise DensityUnderflow(f"log p(z) = {worst:.1f} fell below {LOG_UNDERFLOW}")
    return out


def _posterior_weights(means, log_probs, points):
    """(log p(z), posterior over mixture components) for a batch of points."""
    means = np.asarray(means, dtype=complex)
    points = np.asarray(points, dtype=complex)
    n = means.shape[1]
    offsets = log_probs - np.sum(np.abs(means) ** 2, axis=1)
    ex = offsets[None, :] + 2.0 * np.real(points @ means.conj().T)
    mx = ex.max(axis=1)
    np.subtract(ex, mx[:, None], out=ex)
    np.exp(ex, out=ex)
    total = ex.sum(axis=1)
    log_pz = mx + np.log(total) - np.sum(np.abs(points) ** 2, axis=1) - n * np.log(np.pi)
    ex /= total[:, None]
    return log_pz, ex


def mixture_posterior_mean(means, log_probs, support, points) -> np.ndarray:
    """Posterior mean of the mixture label vector at each point, chunked."""
    points = np.asarray(points, dtype=complex)
    out = np.empty((points.shape[0], support.shape[1]), dtype=complex)
    for start in range(0, points.shape[0], _POINT_CHUNK):
        block = points[start : start + _POINT_CHUNK]
        log_pz, posterior = _posterior_weights(means, log_probs, block)
        if np.any(log_pz < LOG_UNDERFLOW):
            raise DensityUnderflow("log p(z) fell below the representable floor")
        out[start : start + block.shape[0]] = posterior @ support
    return out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(chunk)])
    return np.random.Generator(np.random.Philox(key=key))


def _draw_chunk(dist, n_out, seed, chunk, count):
    rng = _chunk_rng(seed, chunk)
    if dist.kind == "discrete":
        u = rng.random(count)
        idx = np.searchsorted(np.cumsum(dist.probs), u, side="right")
        x = dist.support[np.minimum(idx, len(dist.probs) - 1)]
    else:
        xr = rng.standard_normal((count, 2 * dist.dimension))
        x = (xr[:, ::2] + 1j * xr[:, 1::2]) / np.sqrt(2.0)
    nr = rng.standard_normal((count, 2 * n_out))
    noise = (nr[:, ::2] + 1j * nr[:, 1::2]) / np.sqrt(2.0)
    return x, noise


def draw_inputs_and_noise(dist: InputDistribution, n_out: int, seed: int, count: int, *, workers: int = 1):
    """Input and noise draws without forming z; used for common-random-number
    workflows where the same draws are pushed through many channel matrices.

    Draws are keyed per fixed-size chunk by (seed, chunk index) through a
    counter-based bit generator, so identical (seed, count) produce
    bitwise-identical arrays for any number of workers.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    xs = np.empty((count, dist.dimension), dtype=complex)
    ns = np.empty((count, n_out), dtype=complex)
    spans = [
        (c, start, min(start + _SAMPLE_CHUNK, count))
        for c, start in enumerate(range(0, count, _SAMPLE_CHUNK))
    ]

    def fill(span):
        chunk, start, stop = span
        x, noise = _draw_chunk(dist, n_out, seed, chunk, stop - start)
        xs[start:stop] = x
        ns[start:stop] = noise

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, spans))
    else:
        for span in spans:
            fill(span)
    return xs, ns


def sample(M, dist: InputDistribution, seed: int, count: int, *, noise: NoiseModel | None = None, workers: int = 1) -> SampleBatch:
    """Draw ``count`` paired (x, z) samples with z = Mx + n.

    Reproducibility contract: identical (seed, count, model) give
    bitwise-identical batches regardless of the worker count.
    """
    M = np.asarray(M, dtype=complex)
    if noise is not None and noise.dimension != M.shape[0]:
        raise ValueError("noise dimension does not match the system matrix")
    if dist.dimension != M.shape[1]:
        raise ValueError("input dimension does not match the system matrix")
    xs, ns = draw_inputs_and_noise(dist, M.shape[0], seed, count, workers=workers)
    return SampleBatch(seed=seed, count=count, inputs=xs, outputs=xs @ M.T + ns)
