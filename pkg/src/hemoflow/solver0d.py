"""Lumped-parameter (0D) vessel models and their network assembly.

Each vessel is described by volume/flow states coupled through resistance,
inductance and compliance elements. Four configurations exist, named by
which quantities are prescribed at the inlet and outlet: (P_in, Q_out),
(Q_in, P_out), (P_in, P_out) and (Q_in, Q_out). The nonlinear variants
evaluate R and L at the instantaneous mean area and use the full elastic
tube law for the pressure-volume relation; the linear variants use the
constant reference values R0, L0, C0.

A network is assembled into one global ODE system (root vessel QinQout,
interior vessels as chains of two PinQout compartments, terminal vessels
PinPout, plus one capacitor pressure per RCR terminal) and advanced with
classical RK4.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import CollapseError, ConfigurationError, ModelError
from .netio import Network, WaveformSeries, Windkessel
from .vessel import VesselSpec, tube_law_slope


@dataclass(frozen=True)
class ModelMode:
    """Switches between linear (reference-area) and nonlinear
    (instantaneous-area) evaluation of the pressure law, resistance and
    inductance. ``frozen_area`` keeps the nonlinear code paths but pins the
    mean area at A0 (used for consistency checks)."""

    nonlinear_pressure: bool = True
    nonlinear_resistance: bool = True
    nonlinear_inductance: bool = True
    frozen_area: bool = False

    @classmethod
    def linear(cls) -> "ModelMode":
        return cls(False, False, False)

    @classmethod
    def nonlinear(cls) -> "ModelMode":
        return cls(True, True, True)

    @classmethod
    def from_name(cls, name: str) -> "ModelMode":
        table = {
            "linear": cls(False, False, False),
            "nonlinear": cls(True, True, True),
            "nl-p": cls(True, False, False),
            "nl-r": cls(False, True, False),
            "nl-l": cls(False, False, True),
        }
        try:
            return table[name.strip().lower()]
        except KeyError:
            raise ConfigurationError(
                f"unknown 0D mode {name!r}; choose from {sorted(table)}") from None


class _Compartment:
    """A lumped piece of a vessel: ``fraction`` of its length, with the
    reference volume and constants scaled accordingly."""

    __slots__ = ("length", "A0", "V0", "K", "m", "n", "P0", "p_ext",
                 "rho_kR_l", "rho_l", "R0", "L0", "C0")

    def __init__(self, spec: VesselSpec, fraction: float = 1.0):
        w, f = spec.wall, spec.fluid
        self.length = fraction * spec.length
        self.A0 = w.A0
        self.V0 = w.A0 * self.length
        self.K, self.m, self.n = w.K, w.m, w.n
        self.P0, self.p_ext = w.P0, w.p_ext
        self.rho_kR_l = f.rho * f.k_R * self.length
        self.rho_l = f.rho * self.length
        self.R0 = self.rho_kR_l / (w.A0 * w.A0)
        self.L0 = self.rho_l / w.A0
        self.C0 = self.length / tube_law_slope(w.A0, w)

    def area(self, V: float) -> float:
        return V / self.length

    def pressure(self, V: float, mode: ModelMode) -> float:
        """Compartment pressure from its volume, per the mode's law."""
        if V <= 0.0:
            raise CollapseError(f"compartment volume became non-positive: {V}")
        if mode.nonlinear_pressure:
            x = V / self.V0  # = A_hat / A0
            return self.K * (x ** self.m - x ** self.n) + self.P0 + self.p_ext
        return self.P0 + (V - self.V0) / self.C0 + self.p_ext

    def resistance(self, A_hat: float, mode: ModelMode) -> float:
        if not mode.nonlinear_resistance:
            return self.R0
        if mode.frozen_area:
            A_hat = self.A0
        if A_hat <= 0.0:
            raise CollapseError(f"mean area became non-positive: {A_hat}")
        return self.rho_kR_l / (A_hat * A_hat)

    def inductance(self, A_hat: float, mode: ModelMode) -> float:
        if not mode.nonlinear_inductance:
            return self.L0
        if mode.frozen_area:
            A_hat = self.A0
        if A_hat <= 0.0:
            raise CollapseError(f"mean area became non-positive: {A_hat}")
        return self.rho_l / A_hat

    def pressure_array(self, V: np.ndarray, mode: ModelMode) -> np.ndarray:
        """Vectorized pressure law, for post-processing sampled volumes."""
        if mode.nonlinear_pressure:
            x = V / self.V0
            return self.K * (x ** self.m - x ** self.n) + self.P0 + self.p_ext
        return self.P0 + (V - self.V0) / self.C0 + self.p_ext


def pressure_of_volume(V: float, spec: VesselSpec, mode: ModelMode) -> float:
    """Whole-vessel pressure at volume V (mean area V/l)."""
    return _Compartment(spec).pressure(V, mode)


# ---------------------------------------------------------------------------
# The four vessel configurations
# ---------------------------------------------------------------------------

class PinQoutVessel:
    """(P_in, Q_out)-type vessel: states (V, Q).

    dV/dt = Q - Q_out;  dQ/dt = [P_in - R(A_hat) Q - P]/L(A_hat).
    With the distal split enabled, half of the total resistance is moved to
    the outlet and the exposed outlet pressure is P - R_d Q_out.
    """

    nstates = 2

    def __init__(self, spec: VesselSpec, fraction: float = 1.0,
                 distal_split: bool = False):
        self.comp = _Compartment(spec, fraction)
        self.distal_split = distal_split

    def rhs(self, y, p_in: float, q_out: float, mode: ModelMode):
        V, Q = y
        c = self.comp
        P = c.pressure(V, mode)
        A_hat = c.area(V)
        R = c.resistance(A_hat, mode)
        L = c.inductance(A_hat, mode)
        return (Q - q_out, (p_in - R * Q - P) / L)

    def outlet_pressure(self, y, q_out: float, mode: ModelMode) -> float:
        V, _ = y
        P = self.comp.pressure(V, mode)
        if not self.distal_split:
            return P
        R_d = 0.5 * self.comp.resistance(self.comp.area(V), mode)
        return P - R_d * q_out


class QinPoutVessel:
    """(Q_in, P_out)-type vessel: states (V, Q), mirror of PinQout."""

    nstates = 2

    def __init__(self, spec: VesselSpec, fraction: float = 1.0,
                 proximal_split: bool = False):
        self.comp = _Compartment(spec, fraction)
        self.proximal_split = proximal_split

    def rhs(self, y, q_in: float, p_out: float, mode: ModelMode):
        V, Q = y
        c = self.comp
        P = c.pressure(V, mode)
        A_hat = c.area(V)
        R = c.resistance(A_hat, mode)
        L = c.inductance(A_hat, mode)
        return (q_in - Q, (P - R * Q - p_out) / L)

    def inlet_pressure(self, y, q_in: float, mode: ModelMode) -> float:
        V, _ = y
        P = self.comp.pressure(V, mode)
        if not self.proximal_split:
            return P
        R_p = 0.5 * self.comp.resistance(self.comp.area(V), mode)
        return P + R_p * q_in


class PinPoutVessel:
    """(P_in, P_out)-type vessel: states (V, Q, Q_d).

    The total resistance and inductance are split evenly between the
    proximal (flow Q) and distal (flow Q_d) portions around one capacitor.
    """

    nstates = 3

    def __init__(self, spec: VesselSpec):
        self.comp = _Compartment(spec)

    def rhs(self, y, p_in: float, p_out: float, mode: ModelMode):
        V, Q, Qd = y
        c = self.comp
        P = c.pressure(V, mode)
        A_hat = c.area(V)
        Rh = 0.5 * c.resistance(A_hat, mode)
        Lh = 0.5 * c.inductance(A_hat, mode)
        return (Q - Qd, (p_in - Rh * Q - P) / Lh, (P - Rh * Qd - p_out) / Lh)


class QinQoutVessel:
    """(Q_in, Q_out)-type vessel: states (V, Q, V_d).

    Two half-length compartments (reference volume A0 l/2 each) exchange the
    interior flow Q through resistance R and inductance L evaluated at the
    whole-vessel mean area. The total resistance is split as R_p : R : R_d =
    rp_frac : 1 - rp_frac - rd_frac : rd_frac; end resistances are evaluated
    at the mean area of the compartment they attach to.
    """

    nstates = 3

    def __init__(self, spec: VesselSpec, rp_frac: float = 0.25,
                 rd_frac: float = 0.25):
        if rp_frac < 0 or rd_frac < 0 or rp_frac + rd_frac >= 1.0:
            raise ConfigurationError(
                f"resistance split fractions must be non-negative with sum < 1, "
                f"got rp={rp_frac}, rd={rd_frac}")
        self.half = _Compartment(spec, 0.5)
        self.full = _Compartment(spec, 1.0)
        self.rp_frac = rp_frac
        self.rd_frac = rd_frac
        self.r_frac = 1.0 - rp_frac - rd_frac

    def rhs(self, y, q_in: float, q_out: float, mode: ModelMode):
        V, Q, Vd = y
        P = self.half.pressure(V, mode)
        Pd = self.half.pressure(Vd, mode)
        A_hat = self.full.area(V + Vd)
        R = self.r_frac * self.full.resistance(A_hat, mode)
        L = self.full.inductance(A_hat, mode)
        return (q_in - Q, (P - R * Q - Pd) / L, Q - q_out)

    def inlet_pressure(self, y, q_in: float, mode: ModelMode) -> float:
        V = y[0]
        R_p = self.rp_frac * self.full.resistance(self.half.area(V), mode)
        return self.half.pressure(V, mode) + R_p * q_in

    def outlet_pressure(self, y, q_out: float, mode: ModelMode) -> float:
        Vd = y[2]
        return self.half.pressure(Vd, mode) - self.distal_resistance(y, mode) * q_out

    def distal_resistance(self, y, mode: ModelMode) -> float:
        return self.rd_frac * self.full.resistance(self.half.area(y[2]), mode)


class TwoSplitPinQout:
    """Interior vessel realized as two PinQout half-compartments in series,
    coupled by a two-vessel junction: states (V1, Q1, V2, Q2)."""

    nstates = 4

    def __init__(self, spec: VesselSpec):
        self.first = PinQoutVessel(spec, fraction=0.5, distal_split=True)
        self.second = PinQoutVessel(spec, fraction=0.5, distal_split=True)

    def rhs(self, y, p_in: float, q_out: float, mode: ModelMode):
        y1, y2 = y[:2], y[2:]
        # junction between the halves: Q_out of the first is the flow state
        # of the second, and the second sees the first's outlet pressure
        q_mid = y2[1]
        p_mid = self.first.outlet_pressure(y1, q_mid, mode)
        d1 = self.first.rhs(y1, p_in, q_mid, mode)
        d2 = self.second.rhs(y2, p_mid, q_out, mode)
        return d1 + d2

    def outlet_pressure(self, y, q_out: float, mode: ModelMode) -> float:
        return self.second.outlet_pressure(y[2:], q_out, mode)


# Spec-level functional entry points over the class machinery.

def rhs_pin_qout(state, p_in, q_out, spec, mode, distal_split=False):
    return PinQoutVessel(spec, distal_split=distal_split).rhs(state, p_in, q_out, mode)


def rhs_qin_pout(state, q_in, p_out, spec, mode, proximal_split=False):
    return QinPoutVessel(spec, proximal_split=proximal_split).rhs(state, q_in, p_out, mode)


def rhs_pin_pout(state, p_in, p_out, spec, mode):
    return PinPoutVessel(spec).rhs(state, p_in, p_out, mode)


def rhs_qin_qout(state, q_in, q_out, spec, mode, rp_frac=0.25, rd_frac=0.25):
    return QinQoutVessel(spec, rp_frac, rd_frac).rhs(state, q_in, q_out, mode)


# ---------------------------------------------------------------------------
# Terminal coupling
# ---------------------------------------------------------------------------

def terminal_flow_coupling(P: float, R_d: float, terminal, P_wk: float):
    """Flow-typed coupling of a vessel outlet (distal pressure P behind
    split resistance R_d) to a terminal element.

    Returns (Q_out, dP_wk/dt); the capacitor derivative is 0 for a single
    resistance.
    """
    if isinstance(terminal, Windkessel):
        R_tot = R_d + terminal.R1
        if R_tot <= 0.0:
            raise ConfigurationError("terminal coupling has zero total resistance")
        q = (P - P_wk) / R_tot
        dP_wk = (q - (P_wk - terminal.P_v) / terminal.R2) / terminal.C
        return q, dP_wk
    R_tot = R_d + terminal.R
    if R_tot <= 0.0:
        raise ConfigurationError("terminal coupling has zero total resistance")
    return (P - terminal.P_v) / R_tot, 0.0


def terminal_pressure_coupling(Q: float, terminal, P_wk: float):
    """Pressure-typed coupling: the vessel's distal flow Q enters the
    terminal and the outlet pressure is returned with dP_wk/dt."""
    if isinstance(terminal, Windkessel):
        p_out = P_wk + terminal.R1 * Q
        dP_wk = (Q - (P_wk - terminal.P_v) / terminal.R2) / terminal.C
        return p_out, dP_wk
    return terminal.P_v + terminal.R * Q, 0.0


# ---------------------------------------------------------------------------
# Network assembly
# ---------------------------------------------------------------------------

class NetworkModel0D:
    """Global ODE system for a vessel tree.

    Configuration assignment: the root vessel is QinQout (inflow rate
    prescribed), interior vessels are two-split PinQout chains, and leaf
    vessels are PinPout. One capacitor pressure per RCR terminal is appended
    to the state vector.
    """

    def __init__(self, network: Network, mode: ModelMode,
                 inflow: WaveformSeries):
        self.network = network
        self.mode = mode
        self.inflow = inflow
        self.models: dict[str, object] = {}
        self.layout: dict[str, int] = {}
        self.wk_index: dict[str, int] = {}

        has_daughters = {j.parent for j in network.junctions}
        offset = 0
        for vid in network.vessels:
            spec = network.vessels[vid]
            if vid == network.root:
                model = QinQoutVessel(spec)
            elif vid in has_daughters:
                model = TwoSplitPinQout(spec)
            else:
                model = PinPoutVessel(spec)
            self.models[vid] = model
            self.layout[vid] = offset
            offset += model.nstates
        for vid, term in network.terminals.items():
            if isinstance(term, Windkessel):
                self.wk_index[vid] = offset
                offset += 1
        self.dim = offset

        root_model = self.models[network.root]
        if isinstance(root_model, QinQoutVessel) and network.root in network.terminals:
            term = network.terminals[network.root]
            R1 = term.R1 if isinstance(term, Windkessel) else term.R
            if R1 <= 0.0 and root_model.rd_frac == 0.0:
                raise ConfigurationError(
                    "flow-typed terminal coupling has zero total resistance")

    @property
    def volume_indices(self) -> list[int]:
        """State indices holding compartment volumes (for mass audits)."""
        idx = []
        for vid, model in self.models.items():
            off = self.layout[vid]
            if isinstance(model, (QinQoutVessel, TwoSplitPinQout)):
                idx.extend([off, off + 2])
            else:
                idx.append(off)
        return idx

    def initial_state(self) -> np.ndarray:
        """All vessels at the area matching the initial pressure, zero flow,
        terminal capacitors at the initial pressure."""
        net = self.network
        y0 = np.zeros(self.dim)
        for vid, model in self.models.items():
            off = self.layout[vid]
            A_init = net.initial_area(vid)
            l = net.vessels[vid].length
            if isinstance(model, QinQoutVessel):
                y0[off] = A_init * l / 2.0
                y0[off + 2] = A_init * l / 2.0
            elif isinstance(model, TwoSplitPinQout):
                y0[off] = A_init * l / 2.0
                y0[off + 2] = A_init * l / 2.0
            else:  # PinPout
                y0[off] = A_init * l
        for vid, idx in self.wk_index.items():
            y0[idx] = net.initial_pressure
        return y0

    def _proximal_flow(self, y, vid: str) -> float:
        """Flow state adjacent to the vessel inlet (Q of the first
        compartment for every configuration used here)."""
        return y[self.layout[vid] + 1]

    def _vessel_inputs(self, t: float, y):
        """Junction and terminal coupling: per-vessel (inlet, outlet) input
        values and the terminal capacitor derivatives."""
        net, mode = self.network, self.mode
        inputs: dict[str, list] = {vid: [None, None] for vid in self.models}
        dwk: dict[str, float] = {}

        inputs[net.root][0] = float(self.inflow(t))

        for j in net.junctions:
            off = self.layout[j.parent]
            parent = self.models[j.parent]
            q_out = sum(self._proximal_flow(y, d) for d in j.daughters)
            y_p = y[off:off + parent.nstates]
            p_interface = parent.outlet_pressure(y_p, q_out, mode)
            inputs[j.parent][1] = q_out
            for d in j.daughters:
                inputs[d][0] = p_interface

        for vid, term in net.terminals.items():
            model = self.models[vid]
            off = self.layout[vid]
            P_wk = y[self.wk_index[vid]] if vid in self.wk_index else 0.0
            if isinstance(model, PinPoutVessel):
                q_d = y[off + 2]
                out_val, dP_wk = terminal_pressure_coupling(q_d, term, P_wk)
            else:  # single-vessel network: flow-typed QinQout outlet
                y_v = y[off:off + model.nstates]
                P_d = model.half.pressure(y_v[2], mode)
                R_d = model.distal_resistance(y_v, mode)
                # the coupling returns the outlet flow, not a pressure
                out_val, dP_wk = terminal_flow_coupling(P_d, R_d, term, P_wk)
            inputs[vid][1] = out_val
            if vid in self.wk_index:
                dwk[vid] = dP_wk
        return inputs, dwk

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        inputs, dwk = self._vessel_inputs(t, y)
        dy = np.empty(self.dim)
        for vid, model in self.models.items():
            off = self.layout[vid]
            d = model.rhs(y[off:off + model.nstates], inputs[vid][0],
                          inputs[vid][1], self.mode)
            dy[off:off + model.nstates] = d
        for vid, idx in self.wk_index.items():
            dy[idx] = dwk[vid]
        return dy

    def boundary_flows(self, t: float, y):
        """(inflow at the root, per-leaf outflow into the terminals);
        used for mass-balance verification."""
        q_in = float(self.inflow(t))
        inputs, _ = self._vessel_inputs(t, y)
        outflows = {}
        for vid in self.network.terminals:
            model = self.models[vid]
            off = self.layout[vid]
            if isinstance(model, PinPoutVessel):
                outflows[vid] = y[off + 2]
            else:
                outflows[vid] = inputs[vid][1]
        return q_in, outflows

    def observe(self, Y: np.ndarray) -> dict[str, dict[str, np.ndarray]]:
        """Per-vessel sampled (P, Q, A): volume-weighted mean pressure,
        mid-vessel interface flow and mean area, from sampled states Y with
        shape (n_samples, dim)."""
        out = {}
        mode = self.mode
        for vid, model in self.models.items():
            off = self.layout[vid]
            l = self.network.vessels[vid].length
            if isinstance(model, QinQoutVessel):
                V, Q, Vd = Y[:, off], Y[:, off + 1], Y[:, off + 2]
                P = model.half.pressure_array(V, mode)
                Pd = model.half.pressure_array(Vd, mode)
                P_mean = (V * P + Vd * Pd) / (V + Vd)
                A = (V + Vd) / l
            elif isinstance(model, TwoSplitPinQout):
                V1, V2 = Y[:, off], Y[:, off + 2]
                P1 = model.first.comp.pressure_array(V1, mode)
                P2 = model.second.comp.pressure_array(V2, mode)
                P_mean = (V1 * P1 + V2 * P2) / (V1 + V2)
                Q = Y[:, off + 3]
                A = (V1 + V2) / l
            else:  # PinPout: the capacitor node sits mid-vessel between the
                # proximal and distal flows, so their mean stands in for the
                # midpoint flow
                V = Y[:, off]
                Q = 0.5 * (Y[:, off + 1] + Y[:, off + 2])
                P_mean = model.comp.pressure_array(V, mode)
                A = V / l
            out[vid] = {"P": np.asarray(P_mean), "Q": np.asarray(Q),
                        "A": np.asarray(A)}
        return out


def assemble_network(network: Network, mode: ModelMode,
                     inflow: WaveformSeries) -> NetworkModel0D:
    """Build the global 0D ODE system for a network."""
    return NetworkModel0D(network, mode, inflow)


# ---------------------------------------------------------------------------
# Time integration
# ---------------------------------------------------------------------------

@dataclass
class Integration:
    """Sampled trajectory of an ODE integration plus stepping-loop timing."""

    t: np.ndarray
    y: np.ndarray  # (n_samples, dim)
    cpu_seconds: float
    n_steps: int


def rk4_integrate(rhs, y0, dt: float, t_end: float,
                  sample_interval: float | None = None) -> Integration:
    """Classical fourth-order Runge-Kutta with fixed step.

    Samples the state every ``sample_interval`` (rounded to a whole number
    of steps; every step if None). The reported CPU time covers only the
    stepping loop.
    """
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    y = np.asarray(y0, dtype=float).copy()
    n_steps = int(round(t_end / dt))
    if sample_interval is None:
        stride = 1
    else:
        stride = max(1, int(round(sample_interval / dt)))

    times = [0.0]
    samples = [y.copy()]
    half = 0.5 * dt
    sixth = dt / 6.0
    start = time.perf_counter()
    t = 0.0
    for step in range(1, n_steps + 1):
        k1 = rhs(t, y)
        k2 = rhs(t + half, y + half * k1)
        k3 = rhs(t + half, y + half * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        t = step * dt
        if step % stride == 0 or step == n_steps:
            if not np.all(np.isfinite(y)):
                raise ModelError(f"non-finite state at t = {t:.6g} s")
            times.append(t)
            samples.append(y.copy())
    cpu = time.perf_counter() - start
    return Integration(t=np.array(times), y=np.array(samples),
                       cpu_seconds=cpu, n_steps=n_steps)


@dataclass
class RunResult:
    """Sampled per-vessel midpoint series of a network run."""

    t: np.ndarray
    vessels: dict[str, dict[str, np.ndarray]]
    cpu_seconds: float
    seconds_per_cycle: float


def run_0d(network: Network, inflow: WaveformSeries, mode: ModelMode,
           dt: float = 1e-3, t_end: float = 29.7, T0: float = 1.1,
           sample_interval: float = 1e-3) -> RunResult:
    """Advance the assembled 0D network and return per-vessel series."""
    model = assemble_network(network, mode, inflow)
    integ = rk4_integrate(model.rhs, model.initial_state(), dt, t_end,
                          sample_interval)
    vessels = model.observe(integ.y)
    cycles = t_end / T0
    return RunResult(t=integ.t, vessels=vessels, cpu_seconds=integ.cpu_seconds,
                     seconds_per_cycle=integ.cpu_seconds / cycles)
