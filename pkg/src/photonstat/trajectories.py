"""Quantum-jump Monte Carlo unraveling with channel-resolved counting.

Each trajectory propagates an unnormalized pure state with the
non-Hermitian generator ``H_eff = H(t) - (i/2) R sp sm`` (R the total
emission rate) on a fixed step grid aligned with the envelope edges. The
squared norm of the state is the no-jump probability since the last reset,
so a jump occurs when it crosses a uniform threshold; the crossing is
localized inside the step by inverting the norm-decay curve (analytically
where the drive vanishes, by bisection otherwise). The jump is attributed
to a channel in proportion to the channel weights, the state resets to the
ground state, a fresh threshold is drawn, and the remainder of the step is
propagated with the same rules.

Reproducibility contract: trajectory ``i`` draws from a PCG64 generator
seeded with ``SeedSequence([seed, i])`` and consumes, in order, one initial
threshold, then per jump one channel uniform followed by the next
threshold. The schedule depends only on the trajectory's own history, so
histograms merge identically no matter how trajectories are split across
workers.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, SpecError
from .liouville import (
    DriveSpec,
    SquarePulse,
    decay_channels,
    drive_amplitude,
    effective_hamiltonian,
    total_decay_rate,
)

__all__ = ["TrajectoryResult", "sample_trajectories", "sample_trajectory_range"]

_MAX_STEP = 0.005
_RATE_STEP_FACTOR = 0.1
_BISECT_ITERS = 16


@dataclass(frozen=True)
class TrajectoryResult:
    """Histogram of monitored-channel jump counts over ``n_traj`` runs."""

    n_traj: int
    counts: np.ndarray
    per_channel_totals: dict[str, float]
    seed: int

    def __post_init__(self):
        self.counts.setflags(write=False)

    def probabilities(self) -> np.ndarray:
        return self.counts / self.n_traj

    def standard_errors(self) -> np.ndarray:
        p = self.probabilities()
        return np.sqrt(p * (1.0 - p) / self.n_traj)


class _StepGen:
    """Per-step evolution: scalars of exp(-i H_eff s) in closed form."""

    __slots__ = ("h", "rate", "driven", "mu", "a00", "a01", "a10", "q",
                 "u00", "u01", "u10", "u11")

    def __init__(self, heff: np.ndarray, h: float, rate: float, driven: bool):
        self.h = h
        self.rate = rate
        self.driven = driven
        self.mu = 0.5 * (heff[0, 0] + heff[1, 1])
        self.a00 = heff[0, 0] - self.mu
        self.a01 = heff[0, 1]
        self.a10 = heff[1, 0]
        self.q = cmath.sqrt(self.a00 * self.a00 + self.a01 * self.a10)
        self.u00, self.u01, self.u10, self.u11 = self.matrix(h)

    def matrix(self, s: float):
        """Entries of exp(-i H_eff s); traceless part has eigenvalues +-q."""
        qs = self.q * s
        c = cmath.cos(qs)
        if abs(qs) < 1e-8:
            f = s * (1.0 - qs * qs / 6.0)
        else:
            f = cmath.sin(qs) / self.q
        ph = cmath.exp(-1j * self.mu * s)
        return (ph * (c - 1j * f * self.a00), ph * (-1j * f * self.a01),
                ph * (-1j * f * self.a10), ph * (c + 1j * f * self.a00))

    def apply(self, s: float, g: complex, e: complex):
        u00, u01, u10, u11 = self.matrix(s)
        return u00 * g + u01 * e, u10 * g + u11 * e


def _build_gens(spec: DriveSpec) -> list[_StepGen]:
    """One generator per grid step, uniform within each envelope stretch."""
    rate = total_decay_rate(spec.topology)
    h_target = min(_MAX_STEP, _RATE_STEP_FACTOR / rate)
    if h_target < 1e-9:
        raise NumericalError(
            f"step-size underflow: total jump rate {rate:.3g} is not resolvable"
        )
    gens: list[_StepGen] = []
    edges = spec.breakpoints()
    square = isinstance(spec.pulse, SquarePulse)
    for t0, t1 in zip(edges, edges[1:]):
        if t1 <= t0:
            continue
        n = max(1, int(np.ceil((t1 - t0) / h_target - 1e-12)))
        h = (t1 - t0) / n
        if square:
            mid = 0.5 * (t0 + t1)
            gen = _StepGen(effective_hamiltonian(spec, mid), h, rate,
                           driven=drive_amplitude(spec, mid) > 0.0)
            gens.extend([gen] * n)
        else:
            # envelope frozen at each step midpoint (first-order scheme)
            for i in range(n):
                mid = t0 + (i + 0.5) * h
                gens.append(_StepGen(effective_hamiltonian(spec, mid), h, rate,
                                     driven=drive_amplitude(spec, mid) > 0.0))
    return gens


def _crossing_time(gen: _StepGen, span: float, g: complex, e: complex,
                   thr: float) -> float:
    """Solve |U(s) psi|^2 = thr on (0, span); the norm decays monotonically."""
    g2 = g.real * g.real + g.imag * g.imag
    if not gen.driven:
        # decay only: |g| is constant and |e|^2 shrinks by exp(-rate*s)
        e2 = e.real * e.real + e.imag * e.imag
        arg = (thr - g2) / e2
        if arg <= 0.0:
            return span
        return -math.log(arg) / gen.rate
    lo, hi = 0.0, span
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        gm, em = gen.apply(mid, g, e)
        n2 = (gm.real * gm.real + gm.imag * gm.imag
              + em.real * em.real + em.imag * em.imag)
        if n2 > thr:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _jump_cascade(gen: _StepGen, span: float, g: complex, e: complex,
                  thr: float, rng, mon_frac: float):
    """Resolve one detected crossing and any further jumps in the step.

    ``(g, e)`` are the amplitudes at the start of ``span``, below whose
    norm decay the active threshold is known to lie. Returns
    (g, e, threshold, monitored_jumps, other_jumps) at the end of the step;
    amplitudes are relative to the last reset.
    """
    mon = oth = 0
    for _ in range(64):
        s_j = _crossing_time(gen, span, g, e, thr)
        if rng.random() < mon_frac:
            mon += 1
        else:
            oth += 1
        thr = rng.random()
        span = span - s_j
        g, e = 1.0 + 0.0j, 0.0j  # the emission resets the emitter
        if span <= 0.0 or not gen.driven:
            # an undriven ground state neither evolves nor jumps again
            return g, e, thr, mon, oth
        g_end, e_end = gen.apply(span, g, e)
        n2 = (g_end.real * g_end.real + g_end.imag * g_end.imag
              + e_end.real * e_end.real + e_end.imag * e_end.imag)
        if n2 > thr:
            return g_end, e_end, thr, mon, oth
        # a further crossing inside the remainder: search from the reset
    raise NumericalError("jump cascade did not terminate within one step")


def _normalize_psi0(psi0) -> tuple[complex, complex]:
    if psi0 is None:
        return 1.0 + 0.0j, 0.0j
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi.shape != (2,):
        raise SpecError("initial state must be a 2-component amplitude vector")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-9:
        raise SpecError(f"initial state norm {norm:.3g} is not 1")
    return complex(psi[0]), complex(psi[1])


def sample_trajectory_range(spec: DriveSpec, seed: int, start: int, stop: int,
                            psi0=None, chunk_size: int = 4096):
    """Raw counts for trajectory indices ``[start, stop)``.

    Returns ``(histogram, monitored_total, other_total)``. The histogram of
    a full run is the elementwise sum over any partition into index ranges,
    which is how the CLI parallelizes.
    """
    if stop <= start:
        raise SpecError(f"empty trajectory range [{start}, {stop})")
    gens = _build_gens(spec)
    g_init, e_init = _normalize_psi0(psi0)
    mon_frac = next(c.weight for c in decay_channels(spec) if c.monitored) \
        / total_decay_rate(spec.topology)

    hist: np.ndarray = np.zeros(1, dtype=np.int64)
    mon_grand = 0
    other_grand = 0

    for lo in range(start, stop, chunk_size):
        hi = min(lo + chunk_size, stop)
        m = hi - lo
        rngs = [np.random.default_rng([seed, i]) for i in range(lo, hi)]
        thr = np.array([rng.random() for rng in rngs])
        g = np.full(m, g_init, dtype=complex)
        e = np.full(m, e_init, dtype=complex)
        g_new = np.empty(m, dtype=complex)
        e_new = np.empty(m, dtype=complex)
        w1 = np.empty(m, dtype=complex)
        n2 = np.empty(m)
        sq = np.empty(m)
        crossed = np.empty(m, dtype=bool)
        mon_counts = np.zeros(m, dtype=np.int64)
        other_counts = np.zeros(m, dtype=np.int64)

        for gen in gens:
            np.multiply(g, gen.u00, out=g_new)
            np.multiply(e, gen.u01, out=w1)
            g_new += w1
            np.multiply(g, gen.u10, out=e_new)
            np.multiply(e, gen.u11, out=w1)
            e_new += w1
            np.multiply(g_new.real, g_new.real, out=n2)
            np.multiply(g_new.imag, g_new.imag, out=sq)
            n2 += sq
            np.multiply(e_new.real, e_new.real, out=sq)
            n2 += sq
            np.multiply(e_new.imag, e_new.imag, out=sq)
            n2 += sq
            np.less(n2, thr, out=crossed)
            # old amplitudes stay in (g, e) for event handling; swap buffers
            g, g_new = g_new, g
            e, e_new = e_new, e
            if crossed.any():
                for i in np.flatnonzero(crossed):
                    gi, ei, ti, mon, oth = _jump_cascade(
                        gen, gen.h, complex(g_new[i]), complex(e_new[i]),
                        float(thr[i]), rngs[i], mon_frac)
                    g[i] = gi
                    e[i] = ei
                    thr[i] = ti
                    mon_counts[i] += mon
                    other_counts[i] += oth

        chunk_hist = np.bincount(mon_counts)
        if len(chunk_hist) > len(hist):
            hist = np.pad(hist, (0, len(chunk_hist) - len(hist)))
        hist[:len(chunk_hist)] += chunk_hist
        mon_grand += int(mon_counts.sum())
        other_grand += int(other_counts.sum())

    return hist, mon_grand, other_grand


def sample_trajectories(spec: DriveSpec, n_traj: int, seed: int,
                        psi0=None, chunk_size: int = 4096) -> TrajectoryResult:
    """Monte Carlo estimate of the monitored count distribution.

    Parameters
    ----------
    spec : DriveSpec
        Drive, topology and counting window.
    n_traj : int
        Number of trajectories, >= 1.
    seed : int
        Base seed; trajectory ``i`` uses ``SeedSequence([seed, i])``, so
        results are bit-for-bit reproducible for fixed ``(seed, n_traj)``
        regardless of chunking or worker layout.
    psi0 : array_like, optional
        Initial pure-state amplitudes ``(g, e)``, default ground.
    """
    if n_traj < 1:
        raise SpecError(f"need n_traj >= 1, got {n_traj}")
    hist, mon_total, other_total = sample_trajectory_range(
        spec, seed, 0, n_traj, psi0=psi0, chunk_size=chunk_size)
    names = [c.name for c in decay_channels(spec)]
    totals = {names[0]: mon_total / n_traj, names[1]: other_total / n_traj}
    return TrajectoryResult(n_traj=n_traj, counts=hist,
                            per_channel_totals=totals, seed=seed)
