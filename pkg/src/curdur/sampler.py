"""Hamiltonian Monte Carlo over the unconstrained model parameters.

Multi-chain sampler with leapfrog integration, dual-averaging step-size
adaptation toward a target acceptance rate, and diagonal mass-matrix
estimation in expanding warm-up windows.  The number of leapfrog steps is
chosen each iteration so that step size times steps matches the
configured trajectory length, capped at a configurable maximum.

Chains own independent seeded RNG streams, so results are bit-identical
across runs and across sequential or threaded execution.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SamplingError
from .model import PosteriorDensity, phi_matrix, to_noncentered

DEFAULT_TRAJECTORY_LENGTH = 2.0
DIVERGENCE_ENERGY = 1000.0
DUAL_GAMMA = 0.05
DUAL_T0 = 10.0
DUAL_KAPPA = 0.75


@dataclass(frozen=True)
class SamplerConfig:
    """Chain layout, adaptation target, and seeding.

    ``trajectory_length`` is the product of step size and leapfrog steps
    each iteration aims for; longer trajectories cost more gradient
    evaluations but decorrelate draws faster.
    """

    chains: int = 4
    iterations_per_chain: int = 2000
    warmup: int = 1000
    seed: int = 0
    target_accept: float = 0.8
    max_leapfrog_steps: int = 1024
    trajectory_length: float = DEFAULT_TRAJECTORY_LENGTH

    def __post_init__(self):
        if self.chains < 2:
            raise ConfigurationError(
                f"diagnostics require at least 2 chains, got {self.chains}"
            )
        if self.warmup < 0:
            raise ConfigurationError(f"warmup must be >= 0, got {self.warmup}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must fit in an unsigned 64-bit integer")
        if self.warmup >= self.iterations_per_chain:
            raise ConfigurationError(
                f"warmup ({self.warmup}) must be smaller than iterations_per_chain "
                f"({self.iterations_per_chain})"
            )
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigurationError(
                f"target_accept must be in (0, 1), got {self.target_accept}"
            )
        if self.max_leapfrog_steps < 1:
            raise ConfigurationError("max_leapfrog_steps must be >= 1")
        if self.trajectory_length <= 0.0:
            raise ConfigurationError("trajectory_length must be positive")

    @property
    def kept_iterations(self) -> int:
        return self.iterations_per_chain - self.warmup


@dataclass
class PosteriorDraws:
    """Post-warmup draws and per-chain sampler statistics.

    ``draws`` has shape (chains, kept iterations, parameters);
    ``phi_draws``, when cached, holds the derived day-probability vector
    per draw.
    """

    draws: np.ndarray
    accept_stats: np.ndarray
    divergence_count: np.ndarray
    step_sizes: np.ndarray
    param_names: list
    phi_draws: np.ndarray | None = None

    @property
    def num_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def num_kept(self) -> int:
        return self.draws.shape[1]

    @property
    def num_params(self) -> int:
        return self.draws.shape[2]

    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1, self.num_params)


def leapfrog(position, momentum, step_size, num_steps, gradient_fn, inv_mass=None):
    """Symplectic leapfrog integrator.

    Returns the end-of-trajectory (position, momentum).  Zero steps is the
    identity; applying the result with negated momentum retraces the
    trajectory back to the start.  ``inv_mass`` is the diagonal of the
    inverse mass matrix (defaults to identity).
    """
    q = np.array(position, dtype=float)
    p = np.array(momentum, dtype=float)
    if num_steps == 0:
        return q, p
    scale = 1.0 if inv_mass is None else inv_mass
    step_size = float(step_size)
    p = p + 0.5 * step_size * gradient_fn(q)
    for step in range(num_steps):
        q = q + step_size * scale * p
        grad = gradient_fn(q)
        if not np.all(np.isfinite(grad)):
            return q, p
        factor = step_size if step < num_steps - 1 else 0.5 * step_size
        p = p + factor * grad
    return q, p


class _DualAveraging:
    """Nesterov dual averaging of the log step size toward a target rate."""

    def __init__(self, initial_step: float, target: float):
        self.mu = math.log(10.0 * initial_step)
        self.target = target
        self.log_step = math.log(initial_step)
        self.log_step_bar = math.log(initial_step)
        self.h_bar = 0.0
        self.m = 0

    @property
    def step(self) -> float:
        return math.exp(self.log_step)

    @property
    def adapted_step(self) -> float:
        return math.exp(self.log_step_bar)

    def update(self, accept_prob: float) -> None:
        self.m += 1
        frac = 1.0 / (self.m + DUAL_T0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_prob)
        self.log_step = self.mu - math.sqrt(self.m) / DUAL_GAMMA * self.h_bar
        weight = self.m ** -DUAL_KAPPA
        self.log_step_bar = weight * self.log_step + (1.0 - weight) * self.log_step_bar


class _RunningMoments:
    """Welford accumulator for per-coordinate variance."""

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, x: np.ndarray) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def regularized_variance(self) -> np.ndarray:
        # shrunk toward a small constant, as in windowed metric adaptation
        n = self.count
        if n < 2:
            return np.ones_like(self.mean)
        var = self.m2 / (n - 1)
        return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


def _mass_update_points(warmup: int) -> list:
    """Iteration indices (0-based) after which the metric is re-estimated."""
    if warmup < 20:
        return []
    if warmup >= 150:
        init_buffer, term_buffer, window = 75, 50, 25
    else:
        init_buffer = max(1, int(round(0.15 * warmup)))
        term_buffer = max(1, int(round(0.10 * warmup)))
        window = max(1, int(round(0.05 * warmup)))
    points = []
    start = init_buffer
    while start + window <= warmup - term_buffer:
        end = start + window
        # absorb a too-small final window into this one
        if end + 2 * window > warmup - term_buffer:
            end = warmup - term_buffer
        points.append(end - 1)
        start = end
        window *= 2
    return points


def _find_initial_step(logp_and_grad, q, rng, inv_mass) -> float:
    """Double or halve the step until the one-step acceptance crosses 1/2."""
    dim = q.size
    step = 1.0
    momentum_sd = inv_mass ** -0.5
    p = rng.standard_normal(dim) * momentum_sd
    logp0, grad0 = logp_and_grad(q)
    energy0 = -logp0 + 0.5 * float(np.dot(inv_mass * p, p))

    def energy_after(step_size: float) -> float:
        p1 = p + 0.5 * step_size * grad0
        q1 = q + step_size * inv_mass * p1
        logp1, grad1 = logp_and_grad(q1)
        if not (math.isfinite(logp1) and np.all(np.isfinite(grad1))):
            return math.inf
        p1 = p1 + 0.5 * step_size * grad1
        return -logp1 + 0.5 * float(np.dot(inv_mass * p1, p1))

    log_ratio = energy0 - energy_after(step)
    direction = 1.0 if log_ratio > math.log(0.5) else -1.0
    for _ in range(100):
        step *= 2.0 ** direction
        log_ratio = energy0 - energy_after(step)
        if direction * log_ratio <= direction * math.log(0.5):
            break
        if not 1e-12 < step < 1e7:
            raise SamplingError(f"could not find a workable step size (reached {step})")
    return step


def _run_chain(logp_and_grad, dim, config: SamplerConfig, chain_index: int, progress,
               init_fn=None):
    rng = np.random.default_rng([config.seed, chain_index])
    q = rng.uniform(-1.0, 1.0, dim) if init_fn is None else init_fn(rng)
    logp, grad = logp_and_grad(q)
    if not (math.isfinite(logp) and np.all(np.isfinite(grad))):
        raise SamplingError(
            f"chain {chain_index}: posterior is not finite at the initial point"
        )

    inv_mass = np.ones(dim)
    momentum_sd = np.ones(dim)
    step = _find_initial_step(logp_and_grad, q, rng, inv_mass)
    dual = _DualAveraging(step, config.target_accept)
    update_points = set(_mass_update_points(config.warmup))
    moments = _RunningMoments(dim)

    kept = config.kept_iterations
    draws = np.empty((kept, dim))
    accept_sum = 0.0
    divergences = 0
    final_step = dual.adapted_step

    for it in range(config.iterations_per_chain):
        warming = it < config.warmup
        step_size = dual.step if warming else final_step
        num_steps = int(min(config.max_leapfrog_steps,
                            max(1, round(config.trajectory_length / step_size))))

        p = rng.standard_normal(dim) * momentum_sd
        energy0 = -logp + 0.5 * float(np.dot(inv_mass * p, p))

        q_new, p_new = np.array(q), np.array(p)
        logp_new, grad_new = logp, grad
        diverged = False
        p_new = p_new + 0.5 * step_size * grad_new
        for leap in range(num_steps):
            q_new = q_new + step_size * inv_mass * p_new
            logp_new, grad_new = logp_and_grad(q_new)
            if not (math.isfinite(logp_new) and np.all(np.isfinite(grad_new))):
                diverged = True
                break
            factor = step_size if leap < num_steps - 1 else 0.5 * step_size
            p_new = p_new + factor * grad_new

        if not diverged:
            energy1 = -logp_new + 0.5 * float(np.dot(inv_mass * p_new, p_new))
            delta_energy = energy1 - energy0
            if not math.isfinite(delta_energy) or delta_energy > DIVERGENCE_ENERGY:
                diverged = True

        accept_prob = 0.0 if diverged else min(1.0, math.exp(-max(delta_energy, -700.0)))
        if rng.random() < accept_prob:
            q, logp, grad = q_new, logp_new, grad_new

        if warming:
            dual.update(accept_prob)
            moments.add(q)
            if it in update_points:
                inv_mass = moments.regularized_variance()
                momentum_sd = inv_mass ** -0.5
                moments = _RunningMoments(dim)
                # restart averaging around the current step; the next
                # window re-converges it under the new metric
                dual = _DualAveraging(dual.step, config.target_accept)
            if it == config.warmup - 1:
                final_step = dual.adapted_step
        else:
            draws[it - config.warmup] = q
            accept_sum += accept_prob
            divergences += int(diverged)

        if progress is not None:
            progress(chain_index, it + 1, config.iterations_per_chain)

    return {
        "draws": draws,
        "accept_mean": accept_sum / kept,
        "divergences": divergences,
        "step_size": final_step,
    }


def sample_density(
    config: SamplerConfig,
    logp_and_grad,
    dim: int,
    parallel: bool = False,
    progress=None,
    param_names=None,
    init_fn=None,
) -> PosteriorDraws:
    """Run HMC chains against an arbitrary log density with gradient.

    ``logp_and_grad`` maps a parameter vector to (log density, gradient).
    ``init_fn(rng)``, when given, supplies each chain's starting point
    (default: uniform on [-1, 1] per coordinate).  Deterministic given the
    config seed, with or without chain threading.
    """
    if param_names is None:
        param_names = [f"param_{i}" for i in range(dim)]
    chain_ids = list(range(config.chains))
    if parallel:
        with ThreadPoolExecutor(max_workers=config.chains) as pool:
            results = list(
                pool.map(
                    lambda c: _run_chain(logp_and_grad, dim, config, c, progress, init_fn),
                    chain_ids,
                )
            )
    else:
        results = [
            _run_chain(logp_and_grad, dim, config, c, progress, init_fn)
            for c in chain_ids
        ]

    draws = np.stack([r["draws"] for r in results])
    accept = np.array([r["accept_mean"] for r in results])
    divergences = np.array([r["divergences"] for r in results], dtype=int)
    steps = np.array([r["step_size"] for r in results])

    kept = config.kept_iterations
    dead = [c for c in chain_ids if divergences[c] == kept]
    if dead:
        detail = ", ".join(
            f"chain {c}: step_size={steps[c]:.3g}, mean_accept={accept[c]:.3f}"
            for c in dead
        )
        raise SamplingError(
            f"all post-warmup proposals diverged in chain(s) {dead}; "
            f"pathological step size or target ({detail})"
        )
    return PosteriorDraws(
        draws=draws,
        accept_stats=accept,
        divergence_count=divergences,
        step_sizes=steps,
        param_names=list(param_names),
    )


def sample(
    config: SamplerConfig,
    data,
    basis,
    heap=None,
    prior_only: bool = False,
    parallel: bool = False,
    progress=None,
    cache_phi: bool = False,
) -> PosteriorDraws:
    """Sample the posterior over (delta_1 .. delta_K, log_sigma).

    ``prior_only`` switches to an empty likelihood (the dataset may then be
    empty or None).  Warm-up draws are discarded; the result holds
    iterations_per_chain - warmup draws per chain.

    Chains start from (delta, log_sigma) uniform on [-1, 1] per coordinate
    and run in scale-free coordinates internally; the returned draws are
    always (delta_1 .. delta_K, log_sigma).
    """
    if not prior_only and (data is None or len(data) == 0):
        raise SamplingError("dataset is empty; nothing to fit (use prior_only to "
                            "sample the prior)")
    density = PosteriorDensity(data, basis, heap=heap, prior_only=prior_only)
    k = basis.num_basis
    names = [f"delta_{i + 1}" for i in range(k)] + ["log_sigma"]

    def init_fn(rng):
        return to_noncentered(rng.uniform(-1.0, 1.0, density.num_params))

    result = sample_density(
        config,
        density.noncentered_logp_and_grad,
        density.num_params,
        parallel=parallel,
        progress=progress,
        param_names=names,
        init_fn=init_fn,
    )
    result.draws[:, :, :-1] *= np.exp(result.draws[:, :, -1:])
    if cache_phi:
        flat_phi = phi_matrix(result.flat(), basis)
        result.phi_draws = flat_phi.reshape(
            result.num_chains, result.num_kept, -1
        )
    return result
