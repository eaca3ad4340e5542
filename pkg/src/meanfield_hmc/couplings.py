"""Velocity couplings for pairs of chains and coupled-kernel runners.

For particle pairs closer than the threshold radius the refreshed
velocities are coupled so that the difference collapses to -gamma*z with
the largest probability a valid coupling allows, and are reflected across
the separation direction otherwise; distant pairs synchronize.  Both
marginals stay exactly standard normal.  Coupled kernels share the
integrator's per-step uniforms between the two copies, so only the
initial velocities differ.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import KernelParams
from .models import MeanFieldModel
from .integrators import randomized_step_arrays
from .rng import RngStream


@dataclass(frozen=True)
class CouplingParams:
    """Threshold radius R_tilde and duration T; the coupling strength
    gamma = min(1/T, 1/(4 R_tilde)) is derived (1/T when R_tilde = 0)."""

    R_tilde: float
    T: float

    def __post_init__(self):
        if self.R_tilde < 0:
            raise ValueError("R_tilde must be nonnegative")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @property
    def gamma(self) -> float:
        if self.R_tilde == 0.0:
            return 1.0 / self.T
        return min(1.0 / self.T, 0.25 / self.R_tilde)


@dataclass(frozen=True)
class CoupleResult:
    """Coupled velocity draw with branch bookkeeping.

    ``synchronous`` marks pairs at or beyond the threshold radius;
    ``coalescing`` marks pairs whose velocity difference equals -gamma*z
    (it is True on synchronous pairs only if z = 0).
    """

    xi: np.ndarray
    eta: np.ndarray
    synchronous: np.ndarray
    coalescing: np.ndarray


def couple_velocities_batch(z: np.ndarray, cp: CouplingParams,
                            stream: RngStream) -> CoupleResult:
    """Coupled velocity refresh for a batch of separations ``z`` (..., d).

    Draws xi ~ N(0, I_d) per batch element.  One uniform per element is
    always consumed so variate counts stay fixed across branches.  The
    acceptance ratio of the shifted normal density is evaluated in log
    space.
    """
    z = np.asarray(z, dtype=float)
    batch = z.shape[:-1]
    d = z.shape[-1]
    count = int(np.prod(batch)) if batch else 1
    xi = stream.normal_vector(count * d).reshape(z.shape)
    u = stream.uniforms(count).reshape(batch)

    r = np.linalg.norm(z, axis=-1)
    e = np.zeros_like(z)
    e[..., 0] = 1.0
    safe = r > 0
    np.divide(z, r[..., None], out=e, where=safe[..., None])

    a = np.sum(e * xi, axis=-1)
    gr = cp.gamma * r
    # log of phi(a + gamma r) / phi(a)
    log_ratio = -gr * a - 0.5 * gr * gr
    accept = np.log(u) <= log_ratio

    synchronous = r >= cp.R_tilde
    reflected = xi - 2.0 * a[..., None] * e
    shifted = xi + cp.gamma * z
    eta = np.where(synchronous[..., None], xi,
                   np.where(accept[..., None], shifted, reflected))
    coalescing = np.where(synchronous, r == 0.0, accept)
    return CoupleResult(xi=xi, eta=eta, synchronous=synchronous,
                        coalescing=coalescing)


def couple_velocities(z: np.ndarray, cp: CouplingParams, stream: RngStream):
    """Coupled refresh for one pair; returns (xi, eta), both (d,)."""
    res = couple_velocities_batch(np.asarray(z, dtype=float), cp, stream)
    return res.xi, res.eta


def couple_velocities_particlewise(x: np.ndarray, xp: np.ndarray,
                                   cp: CouplingParams, stream: RngStream):
    """Per-particle coupled refresh on (..., N, d) position arrays.

    Each particle pair gets its own uniform and its own threshold test on
    |x^i - x'^i|; returns (xi, eta) of the same shape.
    """
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape:
        raise ValueError("coupled copies must have identical shapes")
    res = couple_velocities_batch(x - xp, cp, stream)
    return res.xi, res.eta


def coupled_uhmc_step(model: MeanFieldModel, x: np.ndarray, xp: np.ndarray,
                      params: KernelParams, cp: CouplingParams, stream: RngStream,
                      *, synchronous: bool = False):
    """One coupled unadjusted step on (..., N, d) position arrays.

    Initial velocities are coupled particle-wise (or fully synchronized
    with ``synchronous``); both copies are then advanced with identical
    integrator uniforms.
    """
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if synchronous:
        xi = stream.normal_vector(x.size).reshape(x.shape)
        eta = xi
    else:
        xi, eta = couple_velocities_particlewise(x, xp, cp, stream)
    n = params.n_inner_steps
    if n == 0:
        raise ValueError("coupled uhmc requires h > 0")
    batch = x.shape[:-2]
    us = stream.uniforms(n * max(1, int(np.prod(batch)))).reshape((n,) + batch)
    q, p = x, xi
    qp, pp = xp, eta
    for k in range(n):
        q, p = randomized_step_arrays(model, q, p, params.h, us[k], step_index=k)
        qp, pp = randomized_step_arrays(model, qp, pp, params.h, us[k], step_index=k)
    return q, qp


# ---------------------------------------------------------------------------
# contraction metric


def metric_f(r, R1: float, T: float):
    """Concave distance profile: integral of exp(-min(R1, s)/T) from 0 to r.

    Closed form: T (1 - e^{-r/T}) for r <= R1, continued linearly with
    slope e^{-R1/T} beyond.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    if not (R1 > 0 and T > 0):
        raise ValueError("R1 and T must be positive")
    inner = T * (-np.expm1(-np.minimum(r, R1) / T))
    tail = np.exp(-R1 / T) * np.maximum(r - R1, 0.0)
    out = inner + tail
    return float(out) if out.ndim == 0 else out


def metric_f_prime(r, R1: float, T: float):
    """Derivative of :func:`metric_f`: exp(-min(R1, r)/T)."""
    r = np.asarray(r, dtype=float)
    out = np.exp(-np.minimum(r, R1) / T)
    return float(out) if out.ndim == 0 else out


def rho_N(x: np.ndarray, y: np.ndarray, R1: float, T: float):
    """Particle-averaged coupled distance: mean_i f(|x^i - y^i|).

    ``x`` and ``y`` have shape (..., N, d); the result drops both trailing
    axes.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("shape mismatch between the two states")
    dist = np.linalg.norm(x - y, axis=-1)
    out = metric_f(dist, R1, T).mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def ell1_bar(x: np.ndarray, y: np.ndarray):
    """Particle-averaged Euclidean distance: mean_i |x^i - y^i|."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("shape mismatch between the two states")
    out = np.linalg.norm(x - y, axis=-1).mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# contraction estimation


@dataclass(frozen=True)
class ContractionEstimate:
    """Per-step coupled-distance decay table with a fitted per-step factor.

    ``mean_rho[k]`` averages rho_N over replicas after k coupled steps;
    the decay factor is exp(slope) of a log-linear fit, with a standard
    error across replica blocks.
    """

    mean_rho: np.ndarray
    stderr: np.ndarray
    decay_factor: float
    decay_factor_se: float
    block_factors: np.ndarray


def _fit_factor(mean_rho: np.ndarray) -> float:
    steps = np.arange(len(mean_rho))
    good = mean_rho > 0
    if good.sum() < 2:
        return 0.0
    slope = np.polyfit(steps[good], np.log(mean_rho[good]), 1)[0]
    return float(np.exp(slope))


def estimate_contraction(model: MeanFieldModel, params: KernelParams,
                         cp: CouplingParams, m: int, replicas: int,
                         init_pair: Callable[[RngStream, int], tuple],
                         stream: RngStream, *, synchronous: bool = False,
                         blocks: int = 10) -> ContractionEstimate:
    """Run coupled chains and tabulate the mean coupled distance per step.

    ``init_pair(stream, replicas)`` returns the two initial position
    batches of shape (replicas, N, d).  The fitted factor's standard error
    comes from refitting on ``blocks`` disjoint replica groups.
    """
    if replicas < 2:
        raise ValueError("need at least 2 replicas")
    if m < 1:
        raise ValueError("m must be a positive integer")
    R1 = 1.25 * (cp.R_tilde + 2.0 * cp.T)
    x, xp = init_pair(stream, replicas)
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    rho = np.empty((m + 1, replicas))
    rho[0] = rho_N(x, xp, R1, cp.T)
    for k in range(1, m + 1):
        x, xp = coupled_uhmc_step(model, x, xp, params, cp, stream,
                                  synchronous=synchronous)
        rho[k] = rho_N(x, xp, R1, cp.T)

    mean_rho = rho.mean(axis=1)
    stderr = rho.std(axis=1, ddof=1) / np.sqrt(replicas)
    n_blocks = min(blocks, replicas)
    splits = np.array_split(np.arange(replicas), n_blocks)
    block_factors = np.array([_fit_factor(rho[:, idx].mean(axis=1)) for idx in splits])
    factor = _fit_factor(mean_rho)
    factor_se = float(block_factors.std(ddof=1) / np.sqrt(n_blocks))
    return ContractionEstimate(mean_rho=mean_rho, stderr=stderr,
                               decay_factor=factor, decay_factor_se=factor_se,
                               block_factors=block_factors)
