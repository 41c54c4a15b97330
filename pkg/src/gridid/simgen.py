"""Synthetic steady states: Newton power flow, load scenarios, measurement noise."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import PowerFlowError, ValidationError
from .ingest import MeasurementSet, NetworkCase
from .netmodel import build_admittance

MISMATCH_TOL = 1e-8
MAX_ITERATIONS = 30

# Noise sub-stream indices per channel, so V and I noise are independent.
_V_CHANNEL = 0
_I_CHANNEL = 1


@dataclass(frozen=True)
class SteadyState:
    """A converged operating point; currents and powers satisfy I = YV exactly."""

    bus_ids: tuple[str, ...]
    v: np.ndarray  # complex per-unit voltage per bus
    i: np.ndarray  # complex injection current per bus
    s: np.ndarray  # complex injection power per bus
    mismatch: float
    iterations: int


@dataclass(frozen=True)
class ScenarioSet:
    """Per-slot load scaling factors for a base case (1.0 at unloaded buses)."""

    base: NetworkCase
    scalings: np.ndarray  # K x n
    seed: int
    scale_lo: float
    scale_hi: float

    @property
    def slots(self) -> int:
        return int(self.scalings.shape[0])

    def case_for(self, k: int) -> NetworkCase:
        buses = tuple(
            dataclasses.replace(b, p_load=b.p_load * self.scalings[k, j],
                                q_load=b.q_load * self.scalings[k, j])
            for j, b in enumerate(self.base.buses))
        return dataclasses.replace(self.base, buses=buses)


def _slot_rng(seed: int, slot: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(slot,)))


def generate_scenarios(case: NetworkCase, k_slots: int, scale_lo: float = 0.8,
                       scale_hi: float = 1.2, seed: int = 0) -> ScenarioSet:
    """Each loaded bus gets one uniform draw per slot applied to both p and q."""
    if not 0 < scale_lo <= scale_hi:
        raise ValidationError(f"bad scaling interval [{scale_lo}, {scale_hi}]")
    if k_slots < 0:
        raise ValidationError("slot count must be nonnegative")
    loaded = np.array([b.p_load != 0 or b.q_load != 0 for b in case.buses])
    scalings = np.ones((k_slots, case.n))
    for k in range(k_slots):
        rng = _slot_rng(seed, k)
        scalings[k, loaded] = rng.uniform(scale_lo, scale_hi, size=int(loaded.sum()))
    return ScenarioSet(base=case, scalings=scalings, seed=seed,
                       scale_lo=scale_lo, scale_hi=scale_hi)


def injected_power(y_dense: np.ndarray, v: np.ndarray) -> np.ndarray:
    """S = diag(V) conj(Y V)."""
    return v * np.conj(y_dense @ v)


def power_flow_jacobian(y_dense: np.ndarray, v: np.ndarray, pvpq: np.ndarray,
                        pq: np.ndarray) -> np.ndarray:
    """Polar Newton Jacobian d[P(pvpq); Q(pq)] / d[angle(pvpq); magnitude(pq)]."""
    ibus = y_dense @ v
    diag_v = np.diag(v)
    diag_i = np.diag(ibus)
    diag_vnorm = np.diag(v / np.abs(v))
    ds_dva = 1j * diag_v @ np.conj(diag_i - y_dense @ diag_v)
    ds_dvm = diag_v @ np.conj(y_dense @ diag_vnorm) + np.conj(diag_i) @ diag_vnorm
    top = np.hstack([ds_dva[np.ix_(pvpq, pvpq)].real, ds_dvm[np.ix_(pvpq, pq)].real])
    bottom = np.hstack([ds_dva[np.ix_(pq, pvpq)].imag, ds_dvm[np.ix_(pq, pq)].imag])
    return np.vstack([top, bottom])


def solve_power_flow(case: NetworkCase, y=None, tol: float = MISMATCH_TOL,
                     max_iterations: int = MAX_ITERATIONS) -> SteadyState:
    """Polar Newton-Raphson from a flat start; reactive limits are not modeled."""
    if y is None:
        y = build_admittance(case, "physical")
    y_dense = y.to_dense()
    n = case.n
    kinds = [b.kind for b in case.buses]
    slack = case.slack_index
    pv = np.array([k for k in range(n) if kinds[k] == "pv"], dtype=int)
    pq = np.array([k for k in range(n) if kinds[k] == "pq"], dtype=int)
    pvpq = np.concatenate([pv, pq])

    p_gen = np.zeros(n)
    for g in case.generators:
        p_gen[case.bus_index(g.bus)] += g.p_set
    p_spec = p_gen - np.array([b.p_load for b in case.buses])
    q_spec = -np.array([b.q_load for b in case.buses])

    slack_angle = case.buses[slack].v_angle_setpoint or 0.0
    vm = np.ones(n)
    for k, b in enumerate(case.buses):
        if b.kind in ("pv", "slack"):
            vm[k] = b.v_setpoint if b.v_setpoint else 1.0
    va = np.full(n, slack_angle)

    mismatch_norm = math.inf
    for iteration in range(max_iterations + 1):
        v = vm * np.exp(1j * va)
        s = injected_power(y_dense, v)
        mis = np.concatenate([p_spec[pvpq] - s.real[pvpq], q_spec[pq] - s.imag[pq]])
        mismatch_norm = float(np.abs(mis).max()) if mis.size else 0.0
        if mismatch_norm <= tol:
            ibus = y_dense @ v
            return SteadyState(bus_ids=case.bus_ids, v=v, i=ibus,
                               s=v * np.conj(ibus), mismatch=mismatch_norm,
                               iterations=iteration)
        if iteration == max_iterations:
            break
        jac = power_flow_jacobian(y_dense, v, pvpq, pq)
        try:
            dx = np.linalg.solve(jac, mis)
        except np.linalg.LinAlgError as exc:
            raise PowerFlowError(f"singular Jacobian: {exc}", mismatch_norm, iteration) from exc
        va[pvpq] += dx[:pvpq.size]
        vm[pq] += dx[pvpq.size:]
    raise PowerFlowError("power flow did not converge", mismatch_norm, max_iterations)


def solve_scenarios(scenarios: ScenarioSet, y=None, tol: float = MISMATCH_TOL) -> list[SteadyState]:
    """Solve every slot; Y is rebuilt per slot only if not supplied."""
    return [solve_power_flow(scenarios.case_for(k), y=y, tol=tol)
            for k in range(scenarios.slots)]


def measure(states: list[SteadyState], observed: tuple[str, ...] | list[str],
            snr: float = math.inf, seed: int = 0) -> MeasurementSet:
    """Sample V and I at the observed buses, adding channel-calibrated noise.

    Finite snr is a linear power ratio: each channel receives complex Gaussian
    noise with variance mean(|channel|^2)/snr, split evenly between real and
    imaginary parts. snr=inf returns the exact values (powers included).
    """
    if not states:
        raise ValidationError("no steady states to measure")
    if snr <= 0:
        raise ValidationError("snr must be positive or infinite")
    observed = tuple(observed)
    idx = [states[0].bus_ids.index(b) for b in observed]
    v = np.array([st.v[idx] for st in states])
    i = np.array([st.i[idx] for st in states])
    if math.isinf(snr):
        s = np.array([st.s[idx] for st in states])
        return MeasurementSet(observed=observed, v=v, i=i, s=s)

    def noisy(signal: np.ndarray, channel: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                           spawn_key=(channel,)))
        sigma = math.sqrt(float(np.mean(np.abs(signal) ** 2)) / snr / 2.0)
        noise = rng.normal(0.0, sigma, signal.shape) + 1j * rng.normal(0.0, sigma, signal.shape)
        return signal + noise

    return MeasurementSet(observed=observed, v=noisy(v, _V_CHANNEL),
                          i=noisy(i, _I_CHANNEL), s=None)
