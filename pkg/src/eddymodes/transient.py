"""Theta-method time integration of the reduced dynamics, two ways.

td1 factors Z = L_i + dt*theta*R_i once and does forward/backward
substitution every step. td2 projects the same discrete right-hand side
onto the modal basis and advances each mode with a scalar update whose
cost per step is linear in the mode count. Both paths consume the
identical drive discretization (derivative terms as plain differences),
so they solve the same linear recursion and agree to round-off.
An exact per-interval exponential integrator is included as a validation
reference for piecewise-linear drives.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _kernels, linalg
from .assembly import field_transfer
from .errors import DimensionMismatch, ValidationError
from .modal import ModalBasis, drive_rhs, from_modal
from .network import DriveSignal, LoopNetwork
from .reduction import ReducedModel


@dataclass(frozen=True)
class TransientConfig:
    """theta in [0, 1] (1 = implicit Euler, 0.5 = trapezoidal), step dt,
    final time t_end, method 'td1' or 'td2', optional probe observers."""

    theta: float
    dt: float
    t_end: float
    method: str = "td1"
    probes: np.ndarray | None = None
    capture_stride: int = 1
    capture_state: bool = True

    def __post_init__(self):
        if not (0.0 <= self.theta <= 1.0):
            raise ValidationError("theta must lie in [0, 1]")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.t_end < self.dt:
            raise ValidationError("t_end must be at least one step")
        if self.method not in ("td1", "td2"):
            raise ValidationError(f"unknown method {self.method!r}")
        if self.capture_stride < 1:
            raise ValidationError("capture_stride must be >= 1")
        if self.probes is not None:
            object.__setattr__(self, "probes",
                               np.atleast_2d(np.asarray(self.probes, dtype=float)))

    @property
    def n_steps(self) -> int:
        return max(int(round(self.t_end / self.dt)), 1)


@dataclass
class SimulationResult:
    """Captured trajectory plus the setup/stepping wall-time split."""

    times: np.ndarray
    internal_states: np.ndarray | None
    probe_fields: np.ndarray | None      # (n_captures, n_probes, 3) in tesla
    wall_time_setup: float
    wall_time_stepping: float
    n_steps: int
    method: str

    @property
    def per_step_cost(self) -> float:
        return self.wall_time_stepping / self.n_steps


class Td1Stepper:
    """Coupled stepper: holds the Cholesky factor of L_i + dt*theta*R_i.

    The factor is valid only for the (dt, theta) it was built with;
    changing the step size means building a new stepper.
    """

    def __init__(self, rm: ReducedModel, dt: float, theta: float):
        if dt <= 0:
            raise ValidationError("dt must be positive")
        if not (0.0 <= theta <= 1.0):
            raise ValidationError("theta must lie in [0, 1]")
        t0 = time.perf_counter()
        self.rm = rm
        self.dt = float(dt)
        self.theta = float(theta)
        n = rm.n_internal
        z = rm.l_i.full + self.dt * self.theta * rm.r_i.full
        self.chol = linalg.cholesky(z, what="stepping matrix") if n else None
        self._r = np.ascontiguousarray(rm.r_i.full)
        self._b = np.empty(n)
        self._y = np.empty(n)
        self._x = np.empty(n)
        self.setup_time = time.perf_counter() - t0

    def step(self, state: np.ndarray, i_d: np.ndarray, delta_i_d: np.ndarray,
             delta_i0: np.ndarray) -> np.ndarray:
        """Advance one step in place and return the state."""
        n = self.rm.n_internal
        if state.shape != (n,):
            raise DimensionMismatch(f"state must have {n} components")
        if n == 0:
            return state
        extra = drive_rhs(self.rm, i_d, delta_i_d, delta_i0, self.dt, self.theta)
        _kernels.td1_step_kernel(self.chol.c, self._r, state, self.dt, extra,
                                 self._b, self._y, self._x)
        return state


class Td2Stepper:
    """Decoupled stepper: per-mode scalar updates after projecting the
    drive onto the modes. Setup covers the projection matrices and the
    per-mode factors; the eigendecomposition cost is accounted by the
    caller that built the ModalBasis."""

    def __init__(self, rm: ReducedModel, basis: ModalBasis, dt: float, theta: float):
        if dt <= 0:
            raise ValidationError("dt must be positive")
        if not (0.0 <= theta <= 1.0):
            raise ValidationError("theta must lie in [0, 1]")
        if basis.n_modes != rm.n_internal:
            raise DimensionMismatch("modal basis does not match the reduced model")
        t0 = time.perf_counter()
        self.rm = rm
        self.basis = basis
        self.dt = float(dt)
        self.theta = float(theta)
        den = basis.l_n + self.dt * self.theta * basis.r_n
        # sqrt factors: the scalar update divides twice by the 1x1 Cholesky
        # factor so a single-mode system matches the coupled path bitwise
        self._c = np.sqrt(den)
        self._rn = basis.r_n.copy()
        # drive projections, precomputed so each step is O(n_modes)
        vt = basis.v.T
        self._p_r = vt @ rm.r_d if rm.n_ports else np.zeros((basis.n_modes, 0))
        self._p_l = vt @ rm.l_d if rm.n_ports else np.zeros((basis.n_modes, 0))
        self._p_m = vt @ rm.m0 if rm.n_sources else np.zeros((basis.n_modes, 0))
        self._p_ltr = self._p_l + self.dt * self.theta * self._p_r
        self.setup_time = time.perf_counter() - t0

    def forcing(self, i_d: np.ndarray, delta_i_d: np.ndarray,
                delta_i0: np.ndarray) -> np.ndarray:
        f = np.zeros(self.basis.n_modes)
        if self.rm.n_ports:
            f -= self.dt * (self._p_r @ i_d)
            f -= self._p_ltr @ delta_i_d
        if self.rm.n_sources:
            f -= self._p_m @ delta_i0
        return f

    def step(self, modal_state: np.ndarray, i_d: np.ndarray,
             delta_i_d: np.ndarray, delta_i0: np.ndarray) -> np.ndarray:
        n = self.basis.n_modes
        if modal_state.shape != (n,):
            raise DimensionMismatch(f"modal state must have {n} components")
        if n == 0:
            return modal_state
        f = self.forcing(i_d, delta_i_d, delta_i0)
        _kernels.td2_step_kernel(modal_state, self._rn, self._c, self.dt, f)
        return modal_state


def prepare_td1(rm: ReducedModel, cfg: TransientConfig) -> Td1Stepper:
    return Td1Stepper(rm, cfg.dt, cfg.theta)


def step_td1(stepper: Td1Stepper, state, i_d, delta_i_d, delta_i0) -> np.ndarray:
    """Functional wrapper over Td1Stepper.step (state updated in place)."""
    return stepper.step(np.asarray(state, dtype=float),
                        np.asarray(i_d, dtype=float),
                        np.asarray(delta_i_d, dtype=float),
                        np.asarray(delta_i0, dtype=float))


def prepare_td2(rm: ReducedModel, basis: ModalBasis, cfg: TransientConfig) -> Td2Stepper:
    return Td2Stepper(rm, basis, cfg.dt, cfg.theta)


def step_td2(stepper: Td2Stepper, modal_state, forcing) -> np.ndarray:
    """Advance modal coordinates one step with a precomputed forcing
    increment (see Td2Stepper.forcing or modal.modal_forcing)."""
    modal_state = np.asarray(modal_state, dtype=float)
    forcing = np.asarray(forcing, dtype=float)
    if forcing.shape != modal_state.shape:
        raise DimensionMismatch("forcing and state sizes differ")
    if modal_state.shape[0]:
        _kernels.td2_step_kernel(modal_state, stepper._rn, stepper._c,
                                 stepper.dt, forcing)
    return modal_state


def _drive_samplers(net: LoopNetwork | None, rm: ReducedModel,
                    drives: tuple[DriveSignal, ...]):
    """Map drive signals onto the port and source coordinate order."""
    if net is not None:
        port_names = [el.name for el in net.electrodes[:-1]] if net.n_electrodes else []
        source_names = [c.name for c in net.sources if c.port is None]
    else:
        port_names = list(rm.port_names) or [str(i) for i in range(rm.n_ports)]
        source_names = list(rm.source_names) or [str(i) for i in range(rm.n_sources)]
    if len(port_names) != rm.n_ports or len(source_names) != rm.n_sources:
        raise DimensionMismatch("network and reduced model disagree on ports/sources")
    port_tones: list[list] = [[] for _ in port_names]
    source_tones: list[list] = [[] for _ in source_names]
    for d in drives:
        for p in d.ports:
            if p not in port_names:
                raise ValidationError(f"drive references unknown port {p!r}")
            port_tones[port_names.index(p)].extend(d.tones)
        for s in d.sources:
            if s not in source_names:
                raise ValidationError(f"drive references unknown source {s!r}")
            source_tones[source_names.index(s)].extend(d.tones)

    def compile_channels(tone_lists):
        # flat tone table with a segment index per channel keeps the
        # per-step evaluation to a handful of vector ops
        amps, omegas, phases, owner = [], [], [], []
        for ch, tones in enumerate(tone_lists):
            for t in tones:
                amps.append(t.amplitude)
                omegas.append(2 * np.pi * t.frequency)
                phases.append(t.phase)
                owner.append(ch)
        n_ch = len(tone_lists)
        amps = np.array(amps)
        omegas = np.array(omegas)
        phases = np.array(phases)
        owner = np.array(owner, dtype=np.int64)

        def sample(t: float) -> np.ndarray:
            out = np.zeros(n_ch)
            if amps.size:
                np.add.at(out, owner, amps * np.sin(omegas * t + phases))
            return out

        return sample

    return compile_channels(port_tones), compile_channels(source_tones)


def run_transient(rm: ReducedModel, net: LoopNetwork | None,
                  drives: tuple[DriveSignal, ...] | DriveSignal,
                  cfg: TransientConfig,
                  modal: ModalBasis | None = None) -> SimulationResult:
    """Integrate from rest and capture observers every capture_stride steps.

    Captures happen after the stride-th step (t = k*dt, k = stride,
    2*stride, ...). Probe fields need a network with a branch basis in the
    reduced model; td2 needs a modal basis. Setup and stepping wall times
    are recorded separately around the factorization/projection work and
    the stepping loop.
    """
    if isinstance(drives, DriveSignal):
        drives = (drives,)
    if cfg.method == "td2" and modal is None:
        raise ValidationError("td2 requires a modal basis")
    sample_d, sample_0 = _drive_samplers(net, rm, drives)

    transfer = None
    if cfg.probes is not None:
        if net is None or rm.basis is None:
            raise ValidationError("probe observers require the network geometry")
        transfer = field_transfer(net, cfg.probes)      # (p, 3, nb)
        w = rm.basis.w.astype(float)
        t_internal = np.ascontiguousarray(transfer @ (w @ rm.k))
        t_ports = np.ascontiguousarray(transfer @ (w @ rm.lift))

    setup0 = time.perf_counter()
    if cfg.method == "td1":
        stepper = Td1Stepper(rm, cfg.dt, cfg.theta)
    else:
        stepper = Td2Stepper(rm, modal, cfg.dt, cfg.theta)
    setup_time = time.perf_counter() - setup0

    n_steps = cfg.n_steps
    n_caps = n_steps // cfg.capture_stride
    times = cfg.dt * cfg.capture_stride * np.arange(1, n_caps + 1)
    states = np.zeros((n_caps, rm.n_internal)) if cfg.capture_state else None
    fields = np.zeros((n_caps, cfg.probes.shape[0], 3)) if transfer is not None else None

    state = np.zeros(rm.n_internal)
    step0 = time.perf_counter()
    i_d_prev = sample_d(0.0)
    i_0_prev = sample_0(0.0)
    cap = 0
    for k in range(n_steps):
        t_next = (k + 1) * cfg.dt
        i_d_next = sample_d(t_next)
        i_0_next = sample_0(t_next)
        stepper.step(state, i_d_prev, i_d_next - i_d_prev, i_0_next - i_0_prev)
        i_d_prev = i_d_next
        i_0_prev = i_0_next
        if (k + 1) % cfg.capture_stride == 0:
            internal = from_modal(modal, state) if cfg.method == "td2" else state
            if states is not None:
                states[cap] = internal
            if fields is not None:
                fields[cap] = t_internal @ internal + t_ports @ i_d_next
            cap += 1
    stepping_time = time.perf_counter() - step0

    return SimulationResult(times=times, internal_states=states,
                            probe_fields=fields, wall_time_setup=setup_time,
                            wall_time_stepping=stepping_time,
                            n_steps=n_steps, method=cfg.method)


def exact_modal_reference(basis: ModalBasis, rm: ReducedModel,
                          i_d_samples: np.ndarray, i0_samples: np.ndarray,
                          times: np.ndarray,
                          modal_state0: np.ndarray | None = None) -> np.ndarray:
    """Exact per-interval integration of every mode for drives interpreted
    as piecewise linear between the given samples.

    On each interval the forcing E_n(t) = -(R_D i_D)_n - (L_D i_D')_n
    - (M0 i0')_n projected on mode n is linear in t, so the solution is
    the particular linear response plus a decaying exponential. Returns
    modal coordinates at every sample time, shape (len(times), n_modes).
    """
    times = np.asarray(times, dtype=float)
    n_t = times.shape[0]
    n = basis.n_modes
    i_d_samples = np.asarray(i_d_samples, dtype=float).reshape(n_t, rm.n_ports)
    i0_samples = np.asarray(i0_samples, dtype=float).reshape(n_t, rm.n_sources)
    vt = basis.v.T
    p_r = vt @ rm.r_d if rm.n_ports else np.zeros((n, 0))
    p_l = vt @ rm.l_d if rm.n_ports else np.zeros((n, 0))
    p_m = vt @ rm.m0 if rm.n_sources else np.zeros((n, 0))

    out = np.zeros((n_t, n))
    state = np.zeros(n) if modal_state0 is None else np.asarray(modal_state0, float).copy()
    out[0] = state
    for k in range(n_t - 1):
        h = times[k + 1] - times[k]
        di_d = (i_d_samples[k + 1] - i_d_samples[k]) / h
        di_0 = (i0_samples[k + 1] - i0_samples[k]) / h
        # E(t) = e0 + s * (t - t_k) on this interval
        e0 = -(p_r @ i_d_samples[k]) - (p_l @ di_d) - (p_m @ di_0)
        s = -(p_r @ di_d)
        state = exact_first_order(basis.l_n, basis.r_n, state, e0, s, h)
        out[k + 1] = state
    return out


def exact_first_order(l_n: np.ndarray, r_n: np.ndarray, y0: np.ndarray,
                      e0: np.ndarray, slope: np.ndarray, h: float) -> np.ndarray:
    """Closed-form step of l y' + r y = e0 + slope * t from y(0) = y0 to
    y(h), per component."""
    tau = l_n / r_n
    # particular solution for a linear ramp: y_p(t) = (e(t) - slope*tau)/r
    yp0 = (e0 - slope * tau) / r_n
    yph = (e0 + slope * h - slope * tau) / r_n
    return yph + (y0 - yp0) * np.exp(-h / tau)


# --- CSV export -----------------------------------------------------------------

def write_timeseries_csv(path, result: SimulationResult,
                         header_lines: tuple[str, ...] = ()):
    """Probe field export: t, probe_id, Bx, By, Bz."""
    if result.probe_fields is None:
        raise ValidationError("result holds no probe fields")
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("t,probe_id,Bx,By,Bz\n")
        for it, t in enumerate(result.times):
            for p in range(result.probe_fields.shape[1]):
                bx, by, bz = (float(v) for v in result.probe_fields[it, p])
                fh.write(f"{float(t)!r},{p},{bx!r},{by!r},{bz!r}\n")


def write_states_csv(path, result: SimulationResult,
                     header_lines: tuple[str, ...] = ()):
    """Raw internal-state export: t then one column per component."""
    if result.internal_states is None:
        raise ValidationError("result holds no internal states")
    n = result.internal_states.shape[1]
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("t," + ",".join(f"i{j}" for j in range(n)) + "\n")
        for it, t in enumerate(result.times):
            row = ",".join(repr(float(v)) for v in result.internal_states[it])
            fh.write(f"{float(t)!r},{row}\n")


def write_timing_csv(path, results: list[SimulationResult],
                     header_lines: tuple[str, ...] = ()):
    """Timing split export: method, setup_s, stepping_s, steps, per_step_s."""
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("method,setup_s,stepping_s,steps,per_step_s\n")
        for r in results:
            fh.write(f"{r.method},{r.wall_time_setup!r},{r.wall_time_stepping!r},"
                     f"{r.n_steps},{r.per_step_cost!r}\n")
