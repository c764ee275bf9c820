"""
Lumped resistance-capacitance (RC) thermal network.

Each node ``i`` obeys

    C_i dT_i/dt = (T_out - T_i)/R_i,out + sum_j (T_j - T_i)/R_ij
                  + Q_heat,i + Q_solar,i + Q_occ,i + u_win,i (T_out - T_i)

Driver values are held constant over each step and the system is advanced
with classical fourth-order Runge-Kutta. Output row ``k`` is the state at the
start of row ``k``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .timeseries import ColumnSpec, FeatureGroup, TierKind, TimeSeriesFrame

__all__ = [
    "Zone",
    "RcNetwork",
    "DriverColumns",
    "PhysicsTier",
    "CalibrationOptions",
    "CalibrationResult",
    "TierKind",
    "simulate",
    "simulate_arrays",
    "calibrate",
    "make_tier",
    "room_kind",
    "nominal_room",
    "sim_column",
    "target_column",
]


def sim_column(room: str) -> str:
    return f"sim_{room}_temperature"


def target_column(room: str) -> str:
    return f"{room}_temperature"


@dataclass(frozen=True)
class Zone:
    """One thermal node.

    ``room`` names the room whose driver columns feed the node. ``observed``
    nodes produce a simulated output column; hidden nodes (e.g. wall masses)
    do not.
    """

    name: str
    capacitance: float  # J/K
    r_out: float  # K/W
    heat_gain: float = 0.0  # W per kg/s of mass flow
    solar_aperture: float = 0.0  # m^2
    occupant_gain: float = 0.0  # W per occupant
    window_conductance: float = 0.0  # W/K when the window is open
    initial_temp: float = 20.0
    room: str | None = None
    observed: bool = True
    flow_share: float = 0.0  # share of building-level flow when no room flow column

    def __post_init__(self):
        if not self.capacitance > 0:
            raise ValueError(f"zone {self.name}: capacitance must be > 0")
        if not self.r_out > 0:
            raise ValueError(f"zone {self.name}: resistance must be > 0")
        for attr in ("heat_gain", "solar_aperture", "occupant_gain", "window_conductance", "flow_share"):
            if getattr(self, attr) < 0:
                raise ValueError(f"zone {self.name}: {attr} must be >= 0")


@dataclass(frozen=True)
class RcNetwork:
    zones: tuple
    inter_zone: tuple = ()  # (zone_a, zone_b, R K/W)
    blinds_transmittance: float = 0.3

    def __post_init__(self):
        zones = tuple(self.zones)
        if not zones:
            raise ValueError("network needs at least one zone")
        names = [z.name for z in zones]
        if len(set(names)) != len(names):
            raise ValueError("zone names must be unique")
        links = []
        seen = set()
        for a, b, r in self.inter_zone:
            if a not in names or b not in names or a == b:
                raise ValueError(f"bad inter-zone link {a}-{b}")
            if not r > 0:
                raise ValueError("all resistances must be > 0")
            key = frozenset((a, b))
            if key in seen:
                raise ValueError(f"duplicate inter-zone link {a}-{b}")
            seen.add(key)
            links.append((a, b, float(r)))
        object.__setattr__(self, "zones", zones)
        object.__setattr__(self, "inter_zone", tuple(links))

    @property
    def names(self) -> list[str]:
        return [z.name for z in self.zones]

    @property
    def observed(self) -> list[Zone]:
        return [z for z in self.zones if z.observed]

    def conductance_matrix(self) -> np.ndarray:
        """Symmetric inter-zone conductance matrix (W/K), zero diagonal."""
        idx = {n: i for i, n in enumerate(self.names)}
        G = np.zeros((len(self.zones), len(self.zones)))
        for a, b, r in self.inter_zone:
            G[idx[a], idx[b]] += 1.0 / r
            G[idx[b], idx[a]] += 1.0 / r
        return G

    def replace_zone(self, i: int, **changes) -> "RcNetwork":
        zones = list(self.zones)
        zones[i] = replace(zones[i], **changes)
        return replace(self, zones=tuple(zones))

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "hybridtherm.rc-network",
            "version": 1,
            "blinds_transmittance": self.blinds_transmittance,
            "zones": [asdict(z) for z in self.zones],
            "inter_zone": [list(link) for link in self.inter_zone],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RcNetwork":
        if d.get("version", 1) != 1:
            raise ValueError(f"unsupported network version {d.get('version')}")
        return cls(
            zones=tuple(Zone(**z) for z in d["zones"]),
            inter_zone=tuple((a, b, r) for a, b, r in d.get("inter_zone", [])),
            blinds_transmittance=d.get("blinds_transmittance", 0.3),
        )

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, path_or_text) -> "RcNetwork":
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(path_or_text).read_text()
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        return hashlib.sha1(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class DriverColumns:
    """Names of the driver columns read by :func:`simulate`."""

    outdoor: str = "drybulb_temp"
    solar: tuple = ("solar_direct", "solar_diffuse")
    ac_mode: str = "ac_mode"
    heating_total: str = "heating_mass_flow"
    cooling_total: str = "cooling_mass_flow"
    mass_flow: str = "{room}_mass_flow"
    occupancy: str = "{room}_occupancy"
    window: str = "{room}_window"
    blinds: str = "{room}_blinds"


DEFAULT_DRIVERS = DriverColumns()


# ---------------------------------------------------------------------------
# integration kernels


@numba.njit(cache=True)
def _derivative(T, Cinv, G, g_env, tout, q, w, out):
    n = T.shape[0]
    for i in range(n):
        acc = q[i] + (g_env[i] + w[i]) * (tout - T[i])
        for j in range(n):
            gij = G[i, j]
            if gij != 0.0:
                acc += gij * (T[j] - T[i])
        out[i] = acc * Cinv[i]


@numba.njit(cache=True)
def _rk4_step(T, Cinv, G, g_env, tout, q, w, h, k1, k2, k3, k4, tmp):
    n = T.shape[0]
    _derivative(T, Cinv, G, g_env, tout, q, w, k1)
    for i in range(n):
        tmp[i] = T[i] + 0.5 * h * k1[i]
    _derivative(tmp, Cinv, G, g_env, tout, q, w, k2)
    for i in range(n):
        tmp[i] = T[i] + 0.5 * h * k2[i]
    _derivative(tmp, Cinv, G, g_env, tout, q, w, k3)
    for i in range(n):
        tmp[i] = T[i] + h * k3[i]
    _derivative(tmp, Cinv, G, g_env, tout, q, w, k4)
    for i in range(n):
        T[i] = T[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@numba.njit(cache=True)
def _integrate(Cinv, G, g_env, tout, Q, W, T0, h):
    n_steps = tout.shape[0]
    n = T0.shape[0]
    out = np.empty((n_steps, n))
    T = T0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for t in range(n_steps):
        for i in range(n):
            out[t, i] = T[i]
        if t + 1 < n_steps:
            _rk4_step(T, Cinv, G, g_env, tout[t], Q[t], W[t], h, k1, k2, k3, k4, tmp)
    return out


@numba.njit(cache=True)
def _integrate_controlled(Cinv, G, g_env, tout, Q, W, T0, h, ctrl_node, setpoint, mode, m_max, band, heat_gain):
    """Like ``_integrate`` with a proportional thermostat on ``ctrl_node``.

    Flow for controlled node c at step t is decided from the state at the
    start of the step; heating when ``mode[t] == 0``, cooling otherwise.
    """
    n_steps = tout.shape[0]
    n = T0.shape[0]
    n_ctrl = ctrl_node.shape[0]
    out = np.empty((n_steps, n))
    flows = np.zeros((n_steps, n_ctrl))
    T = T0.copy()
    q = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for t in range(n_steps):
        for i in range(n):
            out[t, i] = T[i]
            q[i] = Q[t, i]
        for c in range(n_ctrl):
            node = ctrl_node[c]
            if mode[t] == 0:
                err = setpoint[t, c] - T[node]
            else:
                err = T[node] - setpoint[t, c]
            u = err / band
            if u < 0.0:
                u = 0.0
            elif u > 1.0:
                u = 1.0
            m = m_max[c] * u
            flows[t, c] = m
            if mode[t] == 0:
                q[node] += heat_gain[c] * m
            else:
                q[node] -= heat_gain[c] * m
        if t + 1 < n_steps:
            _rk4_step(T, Cinv, G, g_env, tout[t], q, W[t], h, k1, k2, k3, k4, tmp)
    return out, flows


# ---------------------------------------------------------------------------
# driver assembly


@dataclass(frozen=True)
class _Bases:
    """Per-node driver series, independent of network parameters."""

    tout: np.ndarray  # (T,)
    flow: np.ndarray  # (T, n) signed mass flow
    solar: np.ndarray  # (T, n) blinds-modulated irradiance
    occupancy: np.ndarray  # (T, n)
    window: np.ndarray  # (T, n) open state


def _optional(frame: TimeSeriesFrame, name: str, n: int) -> np.ndarray:
    return frame.column(name) if name in frame else np.zeros(n)


def _driver_bases(network: RcNetwork, drivers: TimeSeriesFrame, cols: DriverColumns) -> _Bases:
    if cols.outdoor not in drivers:
        raise ValueError(f"missing outdoor-temperature column {cols.outdoor!r}")
    n = drivers.n_rows
    tout = drivers.column(cols.outdoor)
    solar = np.zeros(n)
    for s in cols.solar:
        solar = solar + _optional(drivers, s, n)
    mode = _optional(drivers, cols.ac_mode, n)
    sign = 1.0 - 2.0 * mode
    building_flow = _optional(drivers, cols.heating_total, n) - _optional(drivers, cols.cooling_total, n)

    nz = len(network.zones)
    flow = np.zeros((n, nz))
    sol = np.zeros((n, nz))
    occ = np.zeros((n, nz))
    win = np.zeros((n, nz))
    for i, z in enumerate(network.zones):
        room = z.room
        fname = cols.mass_flow.format(room=room) if room else None
        if fname and fname in drivers:
            flow[:, i] = drivers.column(fname) * sign
        else:
            flow[:, i] = building_flow * z.flow_share
        blinds = _optional(drivers, cols.blinds.format(room=room), n) if room else np.zeros(n)
        sol[:, i] = solar * (1.0 - (1.0 - network.blinds_transmittance) * blinds)
        if room:
            occ[:, i] = _optional(drivers, cols.occupancy.format(room=room), n)
            win[:, i] = _optional(drivers, cols.window.format(room=room), n)
    for arr in (tout, flow, sol, occ, win):
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite driver values")
    return _Bases(tout, flow, sol, occ, win)


def _network_arrays(network: RcNetwork):
    C = np.array([z.capacitance for z in network.zones])
    g_env = np.array([1.0 / z.r_out for z in network.zones])
    heat = np.array([z.heat_gain for z in network.zones])
    ap = np.array([z.solar_aperture for z in network.zones])
    occ = np.array([z.occupant_gain for z in network.zones])
    win = np.array([z.window_conductance for z in network.zones])
    T0 = np.array([z.initial_temp for z in network.zones], dtype=np.float64)
    return 1.0 / C, network.conductance_matrix(), g_env, heat, ap, occ, win, T0


def _run(network: RcNetwork, b: _Bases, h: float, extra_gains=None, extra_conductance=None, T0=None):
    Cinv, G, g_env, heat, ap, occ, win, T0_default = _network_arrays(network)
    Q = b.flow * heat + b.solar * ap + b.occupancy * occ
    W = b.window * win
    if extra_gains is not None:
        Q = Q + extra_gains
    if extra_conductance is not None:
        W = W + extra_conductance
    T0 = T0_default if T0 is None else np.asarray(T0, dtype=np.float64)
    return _integrate(Cinv, G, g_env, np.ascontiguousarray(b.tout), np.ascontiguousarray(Q),
                      np.ascontiguousarray(W), T0, float(h))


def simulate_arrays(
    network: RcNetwork,
    drivers: TimeSeriesFrame,
    step_minutes: int | None = None,
    columns: DriverColumns = DEFAULT_DRIVERS,
    extra_gains: np.ndarray | None = None,
    extra_conductance: np.ndarray | None = None,
    initial: np.ndarray | None = None,
) -> np.ndarray:
    """Node temperatures for every zone (hidden ones included), shape (T, n)."""
    step = drivers.step_minutes if step_minutes is None else int(step_minutes)
    bases = _driver_bases(network, drivers, columns)
    return _run(network, bases, step * 60.0, extra_gains, extra_conductance, initial)


def simulate(
    network: RcNetwork,
    drivers: TimeSeriesFrame,
    step_minutes: int | None = None,
    columns: DriverColumns = DEFAULT_DRIVERS,
) -> TimeSeriesFrame:
    """Simulate ``network`` over ``drivers``; one Simulated column per observed zone.

    Driver columns a network needs but the frame lacks are read as zero. When a
    room has no mass-flow column, its heating input is its ``flow_share`` of the
    building-level heating minus cooling flow.
    """
    T = simulate_arrays(network, drivers, step_minutes, columns)
    obs = [i for i, z in enumerate(network.zones) if z.observed]
    specs = [
        ColumnSpec(sim_column(network.zones[i].room or network.zones[i].name), FeatureGroup.SIMULATED, "degC")
        for i in obs
    ]
    return TimeSeriesFrame(drivers.timestamps, specs, T[:, obs], drivers.step_minutes)


# ---------------------------------------------------------------------------
# calibration

_CALIBRATED_FIELDS = (
    "capacitance",
    "r_out",
    "heat_gain",
    "solar_aperture",
    "occupant_gain",
    "window_conductance",
)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class CalibrationOptions:
    """Coordinate-wise golden-section search in log-parameter space."""

    max_cycles: int = 20
    rel_tol: float = 1e-4
    log_halfwidth: float = math.log(2.0)
    golden_iters: int = 10
    pattern_step: bool = True
    pattern_reach: float = 6.0
    fields: tuple = _CALIBRATED_FIELDS


@dataclass(frozen=True)
class CalibrationResult:
    network: RcNetwork
    rmse_per_room: dict
    rmse: float
    initial_rmse: float
    iterations: int
    converged: bool
    history: tuple = field(default=())


def _golden_min(f, lo, hi, iters):
    """Golden-section minimisation of ``f`` on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best = (c, fc) if fc <= fd else (d, fd)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
        for x, fx in ((c, fc), (d, fd)):
            if fx < best[1]:
                best = (x, fx)
    return best


def calibrate(
    network: RcNetwork,
    drivers: TimeSeriesFrame,
    targets: TimeSeriesFrame,
    options: CalibrationOptions = CalibrationOptions(),
    columns: DriverColumns = DEFAULT_DRIVERS,
) -> CalibrationResult:
    """Fit zone parameters so simulated temperatures track ``targets``.

    ``targets`` holds one column per observed zone, in zone order, on the
    same timestamps as ``drivers``. Initial node temperatures are set from the
    first target row. Parameters that are zero in ``network`` stay zero.
    """
    common, di, ti = np.intersect1d(drivers.minutes, targets.minutes, return_indices=True)
    if len(common) == 0:
        raise ValueError("empty overlap between drivers and targets")
    obs = [i for i, z in enumerate(network.zones) if z.observed]
    if targets.values.shape[1] != len(obs):
        raise ValueError(f"targets need one column per observed zone ({len(obs)})")
    if len(common) != drivers.n_rows:
        drivers = drivers.rows(di)
    Y = targets.values[ti]
    if np.isnan(Y).any():
        raise ValueError("targets contain missing values")

    T0 = np.array([z.initial_temp for z in network.zones], dtype=np.float64)
    T0[obs] = Y[0]
    obs_rooms = {network.zones[j].room: k for k, j in enumerate(obs)}
    for i, z in enumerate(network.zones):
        if not z.observed and z.room in obs_rooms:
            T0[i] = Y[0, obs_rooms[z.room]]
    zones = tuple(replace(z, initial_temp=float(T0[i])) for i, z in enumerate(network.zones))
    net = replace(network, zones=zones)

    h = drivers.step_minutes * 60.0
    bases = _driver_bases(net, drivers, columns)
    Cinv, G, g_env, heat, ap, occ, win, _ = _network_arrays(net)
    params = {
        "capacitance": 1.0 / Cinv,
        "r_out": 1.0 / g_env,
        "heat_gain": heat,
        "solar_aperture": ap,
        "occupant_gain": occ,
        "window_conductance": win,
    }
    params = {k: v.copy() for k, v in params.items()}
    tout = np.ascontiguousarray(bases.tout)

    def objective(p) -> float:
        Q = bases.flow * p["heat_gain"] + bases.solar * p["solar_aperture"] + bases.occupancy * p["occupant_gain"]
        W = bases.window * p["window_conductance"]
        T = _integrate(1.0 / p["capacitance"], G, 1.0 / p["r_out"], tout,
                       np.ascontiguousarray(Q), np.ascontiguousarray(W), T0, h)
        # trial points far from the optimum can make RK4 unstable
        with np.errstate(over="ignore", invalid="ignore"):
            err = T[:, obs] - Y
            val = float(np.sqrt(np.mean(err * err)))
        return val if np.isfinite(val) else np.inf

    # Search coordinates per zone, all logarithmic: envelope resistance, time
    # constant R*C, and steady-state gains gain*R. This basis keeps the
    # coordinates far less correlated than raw (R, C, gain) triples.
    gains = ("heat_gain", "solar_aperture", "occupant_gain", "window_conductance")
    basis_of = {"heat_gain": bases.flow, "solar_aperture": bases.solar,
                "occupant_gain": bases.occupancy, "window_conductance": bases.window}
    coords = []
    for i in obs:
        if "r_out" in options.fields:
            coords.append(("r_out", i))
        if "capacitance" in options.fields:
            coords.append(("tau", i))
        for g in gains:
            if g in options.fields and params[g][i] > 0 and np.any(basis_of[g][:, i]):
                coords.append((g, i))

    def encode(p) -> np.ndarray:
        theta = []
        for kind, i in coords:
            r = p["r_out"][i]
            if kind == "r_out":
                theta.append(math.log(r))
            elif kind == "tau":
                theta.append(math.log(r * p["capacitance"][i]))
            else:
                theta.append(math.log(r * p[kind][i]))
        return np.array(theta)

    def decode(theta) -> dict:
        p = {k: v.copy() for k, v in params.items()}
        for (kind, i), x in zip(coords, theta):
            if kind == "r_out":
                p["r_out"][i] = math.exp(x)
        for (kind, i), x in zip(coords, theta):
            if kind == "tau":
                p["capacitance"][i] = math.exp(x) / p["r_out"][i]
            elif kind != "r_out":
                p[kind][i] = math.exp(x) / p["r_out"][i]
        return p

    theta = encode(params)
    current = objective(params)
    initial = current
    history = [current]
    cycles = 0
    converged = False
    for cycles in range(1, options.max_cycles + 1):
        start = current
        before = theta.copy()
        for c in range(len(coords)):
            def f(x, c=c):
                trial = theta.copy()
                trial[c] = x
                return objective(decode(trial))

            x, fx = _golden_min(f, theta[c] - options.log_halfwidth, theta[c] + options.log_halfwidth,
                                options.golden_iters)
            if fx < current:
                theta[c] = x
                current = fx
            history.append(current)
        move = theta - before
        if options.pattern_step and np.any(move):
            # Extrapolate along the net move of the cycle (pattern step).
            base = theta.copy()
            a, fa = _golden_min(lambda t: objective(decode(base + t * move)), 0.0, options.pattern_reach,
                                options.golden_iters)
            if fa < current:
                theta = base + a * move
                current = fa
            history.append(current)
        if start <= 0 or (start - current) / start < options.rel_tol:
            converged = True
            break
    params = decode(theta)

    zones = []
    for i, z in enumerate(net.zones):
        zones.append(
            replace(
                z,
                capacitance=float(params["capacitance"][i]),
                r_out=float(params["r_out"][i]),
                heat_gain=float(params["heat_gain"][i]),
                solar_aperture=float(params["solar_aperture"][i]),
                occupant_gain=float(params["occupant_gain"][i]),
                window_conductance=float(params["window_conductance"][i]),
            )
        )
    fitted = replace(net, zones=tuple(zones)) if cycles else network
    T = simulate_arrays(fitted, drivers, columns=columns, initial=T0)[:, obs]
    per_room = {
        (fitted.zones[i].room or fitted.zones[i].name): float(np.sqrt(np.mean((T[:, k] - Y[:, k]) ** 2)))
        for k, i in enumerate(obs)
    }
    return CalibrationResult(
        network=fitted,
        rmse_per_room=per_room,
        rmse=float(np.sqrt(np.mean((T - Y) ** 2))),
        initial_rmse=initial,
        iterations=cycles,
        converged=converged,
        history=tuple(history),
    )


# ---------------------------------------------------------------------------
# documented building and fidelity tiers

ROOM_KINDS = ("bedroom", "living", "bedroom", "bathroom", "bathroom")


def room_kind(index: int) -> str:
    return ROOM_KINDS[index % len(ROOM_KINDS)]


# Nominal two-node parameters per room kind: air node and wall node.
_NOMINAL = {
    "bedroom": dict(c_air=2.5e6, c_wall=1.6e7, r_air_out=1 / 25.0, r_wall_out=1 / 60.0, r_air_wall=1 / 350.0,
                    heat_gain=6.0e4, solar_aperture=1.6, occupant_gain=120.0, window_conductance=150.0),
    "living": dict(c_air=4.0e6, c_wall=2.6e7, r_air_out=1 / 40.0, r_wall_out=1 / 90.0, r_air_wall=1 / 550.0,
                   heat_gain=9.0e4, solar_aperture=3.2, occupant_gain=120.0, window_conductance=220.0),
    "bathroom": dict(c_air=1.2e6, c_wall=0.9e7, r_air_out=1 / 12.0, r_wall_out=1 / 30.0, r_air_wall=1 / 200.0,
                     heat_gain=3.5e4, solar_aperture=0.0, occupant_gain=120.0, window_conductance=0.0),
}

INTER_ROOM_RESISTANCE = 1 / 60.0


def nominal_room(kind: str) -> dict:
    return dict(_NOMINAL[kind])


def lumped_room(kind: str) -> dict:
    """Single-node equivalent of the documented two-node room."""
    p = _NOMINAL[kind]
    g = 1.0 / p["r_air_out"] + 1.0 / (p["r_air_wall"] + p["r_wall_out"])
    return dict(
        capacitance=p["c_air"] + p["c_wall"],
        r_out=1.0 / g,
        heat_gain=p["heat_gain"],
        solar_aperture=p["solar_aperture"],
        occupant_gain=p["occupant_gain"],
        window_conductance=p["window_conductance"],
    )


def rooms_of(world_schema) -> list[str]:
    if isinstance(world_schema, TimeSeriesFrame):
        specs = world_schema.columns
    elif isinstance(world_schema, dict):
        specs = world_schema.values()
    else:
        specs = world_schema
    rooms = [s.name[: -len("_temperature")] for s in specs
             if s.group == FeatureGroup.TARGET and s.name.endswith("_temperature")]
    if not rooms:
        raise ValueError("schema has no Target room temperature columns")
    return rooms


def documented_network(rooms: Sequence[str], initial_temp: float = 21.0) -> RcNetwork:
    """Multi-zone single-node-per-room network from the building documentation."""
    zones = []
    for i, room in enumerate(rooms):
        zones.append(Zone(name=room, room=room, initial_temp=initial_temp,
                          flow_share=1.0 / len(rooms), **lumped_room(room_kind(i))))
    links = tuple((rooms[i], rooms[i + 1], INTER_ROOM_RESISTANCE) for i in range(len(rooms) - 1))
    return RcNetwork(tuple(zones), links)


def archetype_network(n_rooms: int, initial_temp: float = 21.0) -> RcNetwork:
    """Generic one-zone residential archetype standing in for every room."""
    zone = Zone(
        name="archetype",
        capacitance=1.2e7,
        r_out=1.0 / 45.0,
        heat_gain=5.0e4,
        solar_aperture=1.2,
        occupant_gain=100.0,
        window_conductance=0.0,
        initial_temp=initial_temp,
        room=None,
        flow_share=1.0 / max(n_rooms, 1),
    )
    return RcNetwork((zone,))


@dataclass(frozen=True)
class PhysicsTier:
    """A physics sub-model at one fidelity.

    ``rooms`` lists the rooms predictions are produced for. For the archetype
    tier the single simulated zone is replicated for every room.
    """

    tier: TierKind
    network: RcNetwork
    rooms: tuple
    calibration: CalibrationResult | None = None

    def simulate(self, drivers: TimeSeriesFrame, columns: DriverColumns = DEFAULT_DRIVERS) -> TimeSeriesFrame:
        T = simulate_arrays(self.network, drivers, columns=columns)
        obs = [i for i, z in enumerate(self.network.zones) if z.observed]
        if self.tier == TierKind.ARCHETYPE:
            Y = np.repeat(T[:, obs[:1]], len(self.rooms), axis=1)
        else:
            by_room = {self.network.zones[i].room: T[:, i] for i in obs}
            Y = np.column_stack([by_room[r] for r in self.rooms])
        specs = [ColumnSpec(sim_column(r), FeatureGroup.SIMULATED, "degC") for r in self.rooms]
        return TimeSeriesFrame(drivers.timestamps, specs, Y, drivers.step_minutes)

    def to_dict(self) -> dict:
        return {"tier": self.tier.value, "rooms": list(self.rooms), "network": self.network.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "PhysicsTier":
        return cls(TierKind(d["tier"]), RcNetwork.from_dict(d["network"]), tuple(d["rooms"]))


def perturb_network(network: RcNetwork, seed: int, low: float = 0.7, high: float = 1.3) -> RcNetwork:
    """Multiply every calibratable zone parameter by a seeded U[low, high] factor."""
    rng = np.random.default_rng([seed, 0x7E12])
    zones = []
    for z in network.zones:
        f = rng.uniform(low, high, size=len(_CALIBRATED_FIELDS))
        zones.append(replace(z, **{k: getattr(z, k) * fk for k, fk in zip(_CALIBRATED_FIELDS, f)}))
    return replace(network, zones=tuple(zones))


def make_tier(
    tier,
    world_schema,
    seed: int,
    train_drivers: TimeSeriesFrame | None = None,
    train_targets: TimeSeriesFrame | None = None,
    options: CalibrationOptions = CalibrationOptions(),
) -> PhysicsTier:
    """Build the physics sub-model for a fidelity tier.

    The calibrated tier needs training drivers and one target column per room.
    """
    tier = TierKind(tier)
    rooms = tuple(rooms_of(world_schema))
    if tier == TierKind.ARCHETYPE:
        return PhysicsTier(tier, archetype_network(len(rooms)), rooms)
    net = perturb_network(documented_network(rooms), seed)
    if tier == TierKind.UNCALIBRATED_DETAILED:
        return PhysicsTier(tier, net, rooms)
    if train_drivers is None or train_targets is None:
        raise ValueError("the calibrated tier needs training drivers and targets")
    targets = train_targets.select([target_column(r) for r in rooms])
    result = calibrate(net, train_drivers, targets, options)
    return PhysicsTier(tier, result.network, rooms, result)


def simulate_closed_loop(
    network: RcNetwork,
    drivers: TimeSeriesFrame,
    controlled: Sequence[int],
    setpoints: np.ndarray,
    mode: np.ndarray,
    max_flow: np.ndarray,
    band: float,
    extra_gains: np.ndarray | None = None,
    extra_conductance: np.ndarray | None = None,
    columns: DriverColumns = DEFAULT_DRIVERS,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate ``network`` with a proportional thermostat on ``controlled`` nodes.

    Mass-flow driver columns are ignored; the thermostat decides the flow
    from the node temperature at the start of each step. Returns node
    temperatures (T, n) and the controller flows (T, len(controlled)).
    """
    bases = _driver_bases(network, drivers, columns)
    Cinv, G, g_env, heat, ap, occ, win, T0 = _network_arrays(network)
    Q = bases.solar * ap + bases.occupancy * occ
    W = bases.window * win
    if extra_gains is not None:
        Q = Q + extra_gains
    if extra_conductance is not None:
        W = W + extra_conductance
    ctrl = np.asarray(controlled, dtype=np.int64)
    return _integrate_controlled(
        Cinv, G, g_env, np.ascontiguousarray(bases.tout), np.ascontiguousarray(Q), np.ascontiguousarray(W),
        T0, drivers.step_minutes * 60.0, ctrl, np.ascontiguousarray(setpoints, dtype=np.float64),
        np.ascontiguousarray(mode, dtype=np.int64), np.asarray(max_flow, dtype=np.float64), float(band),
        np.ascontiguousarray(heat[ctrl]),
    )
