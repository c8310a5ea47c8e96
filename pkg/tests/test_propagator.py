import numpy as np
import pytest
from scipy.linalg import expm

import photonstat as ps
from conftest import random_density
from photonstat.errors import GridError, SpecError


def reference_rk4(spec, rho0, t1, n_steps):
    """Independent fine-step integration of the master equation.

    Classical RK4 on the 2x2 density matrix written directly from the
    equation of motion; shares nothing with the package's propagation
    paths except the generator construction.
    """
    def rhs(t, rho):
        return ps.devectorize(ps.build_liouvillian(spec, min(t, t1 * (1 - 1e-12)))
                              @ ps.vectorize(rho))

    h = t1 / n_steps
    rho = np.array(rho0, dtype=complex)
    for i in range(n_steps):
        t = i * h
        k1 = rhs(t, rho)
        k2 = rhs(t + h / 2, rho + h / 2 * k1)
        k3 = rhs(t + h / 2, rho + h / 2 * k2)
        k4 = rhs(t + h, rho + h * k3)
        rho = rho + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


class TestSegmentPropagators:
    def test_undriven_segments_are_decay_exponentials(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=1.0, N=0.0), t_end=1.0)
        grid = ps.segment_propagators(spec, step=0.5)
        expected = expm(ps.dissipator(ps.SIGMA_MINUS) * 0.5)
        assert len(grid.segments) == 2
        for seg in grid.segments:
            assert np.allclose(seg, expected, atol=1e-13)
        rho1 = ps.devectorize(grid.segments[1] @ (grid.segments[0] @ ps.vectorize(ps.EXCITED)))
        assert rho1[1, 1].real == pytest.approx(np.exp(-1.0), abs=1e-12)

    def test_pi_pulse_inversion_vs_fine_reference(self):
        T = 0.1
        spec = ps.DriveSpec(ps.SquarePulse(T=T, N=np.pi**2 / (2 * T)))
        rho_T = ps.evolve_state(spec, ps.GROUND, 0.0, T)
        assert abs(rho_T[1, 1].real - 1.0) < 0.05
        ref = reference_rk4(spec, ps.GROUND, T, 2000)
        assert np.max(np.abs(rho_T - ref)) < 1e-9

    def test_composition_property(self):
        rng = np.random.default_rng(23)
        for _ in range(5):
            T = float(rng.uniform(0.05, 1.0))
            N = float(rng.uniform(0.0, 60.0))
            spec = ps.DriveSpec(ps.SquarePulse(T=T, N=N))
            t0, t1, t2 = sorted(rng.uniform(0.0, spec.t_end, size=3))
            direct = ps.propagator_between(spec, t0, t2)
            composed = ps.propagator_between(spec, t1, t2) @ ps.propagator_between(spec, t0, t1)
            assert np.max(np.abs(direct - composed)) < 1e-8

    def test_grid_segment_composition(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=0.1, N=30.0), t_end=1.0)
        grid = ps.segment_propagators(spec, step=0.02)
        j = 3
        prod = np.eye(4, dtype=complex)
        for seg in grid.segments[j:j + 5]:
            prod = seg @ prod
        direct = ps.propagator_between(spec, grid.times[j], grid.times[j + 5])
        assert np.max(np.abs(prod - direct)) < 1e-8

    def test_trace_preservation_on_random_states(self):
        rng = np.random.default_rng(29)
        spec = ps.DriveSpec(ps.SquarePulse(T=0.2, N=80.0), ps.TwoLine(a=0.4))
        grid = ps.segment_propagators(spec)
        for seg in grid.segments[::25]:
            rho = random_density(rng)
            out = ps.devectorize(seg @ ps.vectorize(rho))
            assert abs(out.trace() - rho.trace()) < 1e-9

    def test_states_along_window(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=0.1, N=49.35))
        grid = ps.segment_propagators(spec)
        for rho in grid.states[:: len(grid.states) // 40]:
            assert abs(rho.trace() - 1.0) < 1e-9
            assert np.max(np.abs(rho - rho.conj().T)) < 1e-10
            assert np.linalg.eigvalsh(rho).min() > -1e-9

    def test_states_satisfy_segment_relation(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=0.1, N=20.0), t_end=0.5)
        grid = ps.segment_propagators(spec, step=0.05)
        for j, seg in enumerate(grid.segments):
            stepped = ps.devectorize(seg @ ps.vectorize(grid.states[j]))
            assert np.max(np.abs(stepped - grid.states[j + 1])) < 1e-12

    def test_square_pulse_states_step_independent(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=0.1, N=49.35), t_end=1.0)
        coarse = ps.segment_propagators(spec, step=0.02)
        fine = ps.segment_propagators(spec, step=0.01)
        for j, t in enumerate(coarse.times):
            i = int(np.argmin(np.abs(fine.times - t)))
            assert abs(fine.times[i] - t) < 1e-12
            assert np.max(np.abs(coarse.states[j] - fine.states[i])) < 1e-12

    def test_sampled_step_halving_stability(self):
        pulse = ps.SampledPulse((0.0, 0.05, 0.15, 0.2), (0.0, 60.0, 60.0, 0.0))
        spec = ps.DriveSpec(pulse, t_end=1.0)
        coarse = ps.segment_propagators(spec, step=0.02)
        fine = ps.segment_propagators(spec, step=0.01)
        for j, t in enumerate(coarse.times):
            i = int(np.argmin(np.abs(fine.times - t)))
            if abs(fine.times[i] - t) < 1e-12:
                assert np.max(np.abs(coarse.states[j] - fine.states[i])) < 1e-8

    def test_sampled_rectangle_matches_square_pulse(self):
        T, N = 0.1, 12.0
        square = ps.DriveSpec(ps.SquarePulse(T=T, N=N), t_end=2.0)
        sampled = ps.DriveSpec(ps.SampledPulse((0.0, T), (N / T, N / T)), t_end=2.0)
        ga = ps.segment_propagators(square, step=0.02)
        gb = ps.segment_propagators(sampled, step=0.02)
        assert max(np.max(np.abs(a - b)) for a, b in zip(ga.states, gb.states)) < 1e-8

    def test_grid_contains_pulse_edges(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=0.33, N=5.0), t_end=1.0)
        grid = ps.segment_propagators(spec, step=0.1)
        assert np.any(np.abs(grid.times - 0.33) < 1e-12)

    def test_explicit_times_must_align_with_edges(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=0.25, N=5.0), t_end=1.0)
        with pytest.raises(GridError, match="edge"):
            ps.segment_propagators(spec, times=[0.0, 0.4, 1.0])
        ps.segment_propagators(spec, times=[0.0, 0.25, 0.4, 1.0])


class TestEvolveState:
    def test_rejects_reversed_interval(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=0.1, N=1.0))
        with pytest.raises(SpecError):
            ps.evolve_state(spec, ps.GROUND, 1.0, 0.5)

    def test_detuned_coherence_rotation(self):
        # undriven, detuned: the <e|rho|g> coherence picks up e^{(i delta - 1/2) t}
        delta, t = 1.3, 0.7
        spec = ps.DriveSpec(ps.SquarePulse(T=1.0, N=0.0), ps.SingleLine(delta=delta), t_end=1.0)
        rho0 = np.array([[0.6, 0.35], [0.35, 0.4]], dtype=complex)
        rho_t = ps.evolve_state(spec, rho0, 0.0, t)
        expected = rho0[1, 0] * np.exp((1j * delta - 0.5) * t)
        assert abs(rho_t[1, 0] - expected) < 1e-9
        assert abs(rho_t[0, 1] - np.conj(expected)) < 1e-9

    def test_validates_initial_state(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=0.1, N=1.0))
        with pytest.raises(SpecError, match="Hermitian"):
            ps.evolve_state(spec, np.array([[1.0, 0.2], [0.0, 0.0]]), 0.0, 0.1)
        with pytest.raises(SpecError, match="trace"):
            ps.evolve_state(spec, 0.5 * ps.GROUND, 0.0, 0.1)

    def test_identity_propagator_at_zero_duration(self):
        spec = ps.DriveSpec(ps.SquarePulse(T=0.1, N=5.0))
        assert np.array_equal(ps.propagator_between(spec, 0.3, 0.3), np.eye(4))
