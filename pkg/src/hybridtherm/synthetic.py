"""
Seeded synthetic two-year dataset for a small multi-room apartment.

The ground truth is a hidden RC network with an air node and a wall node per
room, a proportional thermostat, and occupant disturbances (cooking, showers,
door airing) that no modelled physics tier sees. Sensor noise and a small
fraction of missing cells are added on top.

Randomness is drawn from one Philox stream per (seed, column), read in row
order, so adding columns never changes existing ones.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .physics import (
    INTER_ROOM_RESISTANCE,
    RcNetwork,
    Zone,
    nominal_room,
    room_kind,
    simulate_closed_loop,
    target_column,
)
from .timeseries import ColumnSpec, FeatureGroup, TimeSeriesFrame

__all__ = [
    "WorldConfig",
    "GroundTruthModel",
    "room_names",
    "datetime_features",
    "generate_weather",
    "generate_occupant_behaviour",
    "generate_dataset",
    "ground_truth_model",
]

W = FeatureGroup.WEATHER
B = FeatureGroup.BUILDING
R = FeatureGroup.ROOM

_DEFAULT_ROOMS = ("R272", "R273", "R274", "R275", "R276")

# Hourly occupancy probabilities (weekday, weekend) per room kind.
_OCCUPANCY = {
    "bedroom": (
        (0.95,) * 7 + (0.5,) + (0.05,) * 9 + (0.1,) * 4 + (0.4, 0.85, 0.95),
        (0.95,) * 9 + (0.4,) + (0.15,) * 11 + (0.5, 0.85, 0.95),
    ),
    "living": (
        (0.0,) * 6 + (0.3, 0.6, 0.2) + (0.05,) * 8 + (0.5, 0.8, 0.85, 0.8, 0.7, 0.4, 0.05),
        (0.0,) * 8 + (0.5, 0.7, 0.6, 0.5, 0.6, 0.5, 0.4, 0.5, 0.6, 0.7, 0.85, 0.8, 0.7, 0.6, 0.3, 0.05),
    ),
    "bathroom": (
        (0.0,) * 6 + (0.5, 0.6, 0.15) + (0.02,) * 9 + (0.1, 0.15, 0.2, 0.3, 0.2, 0.05),
        (0.0,) * 8 + (0.4, 0.5, 0.3) + (0.05,) * 7 + (0.1, 0.15, 0.2, 0.3, 0.2, 0.05),
    ),
}


@dataclass(frozen=True)
class WorldConfig:
    seed: int = 0
    n_rooms: int = 5
    years: int = 2
    step_minutes: int = 1
    start_year: int = 2021
    # weather
    annual_mean: float = 9.5
    annual_amplitude: float = 10.0
    diurnal_amplitude: float = 4.0
    ar_coefficient: float = 0.97  # hourly AR(1) coefficient of the temperature anomaly
    weather_noise_std: float = 0.6
    # occupants
    occupancy_profiles: dict = field(default_factory=lambda: {k: v for k, v in _OCCUPANCY.items()})
    window_rate_per_day: float = 0.5
    window_mean_minutes: float = 25.0
    spring_episode_hours: tuple = (52.0, 110.0)
    setpoint_day: float = 21.5
    setpoint_night: float = 19.5
    cooling_setpoint: float = 25.0
    occupant_gains: bool = True
    # sensors
    sensor_noise_std: float = 0.1
    missing_fraction: float = 0.004

    def __post_init__(self):
        if self.step_minutes <= 0 or 60 % self.step_minutes:
            raise ValueError("step_minutes must divide 60")
        if not 0.0 <= self.ar_coefficient < 1.0:
            raise ValueError("AR(1) coefficient must lie in [0, 1)")
        for name in ("annual_amplitude", "diurnal_amplitude", "weather_noise_std", "sensor_noise_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.n_rooms < 1 or self.years < 1:
            raise ValueError("n_rooms and years must be >= 1")
        if not 0.0 <= self.missing_fraction < 0.01:
            raise ValueError("missing_fraction must lie in [0, 0.01)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["occupancy_profiles"] = {k: [list(p) for p in v] for k, v in self.occupancy_profiles.items()}
        return d


def room_names(n_rooms: int) -> list[str]:
    if n_rooms <= len(_DEFAULT_ROOMS):
        return list(_DEFAULT_ROOMS[:n_rooms])
    return [f"R{272 + i}" for i in range(n_rooms)]


def _rng(seed: int, name: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}/{name}".encode()).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest[:16], "little")))


def _timeline(cfg: WorldConfig) -> np.ndarray:
    start = np.datetime64(f"{cfg.start_year}-01-01T00:00", "m")
    end = np.datetime64(f"{cfg.start_year + cfg.years}-01-01T00:00", "m")
    return np.arange(start, end, np.timedelta64(cfg.step_minutes, "m"))


def _calendar(ts: np.ndarray):
    days = ts.astype("datetime64[D]")
    years = ts.astype("datetime64[Y]")
    doy = (days - years.astype("datetime64[D]")).astype(np.int64)
    hour = (ts - days.astype("datetime64[m]")).astype(np.int64) / 60.0
    month = (ts.astype("datetime64[M]") - years.astype("datetime64[M]")).astype(np.int64) + 1
    weekday = (days.astype(np.int64) + 3) % 7  # Monday = 0
    return doy, hour, month, weekday


def datetime_features(ts: np.ndarray) -> tuple[list[ColumnSpec], np.ndarray]:
    """Ordinal season (DJF=0 .. SON=3), week (weekend=1) and daytime codes.

    Daytime: morning 6-12 = 0, afternoon 12-18 = 1, evening 18-24 = 2,
    night 0-6 = 3.
    """
    _, hour, month, weekday = _calendar(ts)
    season = (month % 12) // 3
    week = (weekday >= 5).astype(float)
    daytime = ((np.floor(hour).astype(int) // 6) + 3) % 4
    specs = [
        ColumnSpec("season", FeatureGroup.DATETIME, "", True),
        ColumnSpec("week", FeatureGroup.DATETIME, "", True),
        ColumnSpec("daytime", FeatureGroup.DATETIME, "", True),
    ]
    return specs, np.column_stack([season, week, daytime]).astype(float)


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    eps = rng.standard_normal(n) * sigma
    out = np.empty(n)
    out[0] = eps[0] / np.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        out[t] = phi * out[t - 1] + eps[t]
    return out


def _hourly_to_steps(hourly: np.ndarray, hours_since_start: np.ndarray) -> np.ndarray:
    return np.interp(hours_since_start, np.arange(len(hourly)), hourly)


def generate_weather(config: WorldConfig) -> TimeSeriesFrame:
    """Outdoor weather: temperatures, humidity, solar irradiance and wind."""
    cfg = config
    ts = _timeline(cfg)
    doy, hour, _, _ = _calendar(ts)
    t_hours = (ts - ts[0]).astype(np.int64) / 60.0
    n_hours = int(np.ceil(t_hours[-1])) + 2
    day = doy + hour / 24.0

    anomaly = _ar1(_rng(cfg.seed, "drybulb_temp"), n_hours, cfg.ar_coefficient, cfg.weather_noise_std)
    drybulb = (
        cfg.annual_mean
        - cfg.annual_amplitude * np.cos(2 * np.pi * (day - 15.0) / 365.0)
        + cfg.diurnal_amplitude * np.cos(2 * np.pi * (hour - 15.0) / 24.0)
        + _hourly_to_steps(anomaly, t_hours)
    )
    drybulb = np.clip(drybulb, -20.0, 40.0)

    n_days = int(t_hours[-1] // 24) + 2
    cloud_latent = _ar1(_rng(cfg.seed, "cloud"), n_days, 0.6, 1.0)
    clearness = 1.0 / (1.0 + np.exp(-(cloud_latent + 0.3) * 1.5))  # in (0, 1)
    cf = _hourly_to_steps(clearness, t_hours / 24.0)
    daylength = 12.0 + 4.0 * np.sin(2 * np.pi * (day - 80.0) / 365.0)
    sunrise = 12.0 - daylength / 2.0
    phase = (hour - sunrise) / daylength
    peak = 550.0 + 350.0 * np.sin(2 * np.pi * (day - 80.0) / 365.0)
    clear_sky = np.where((phase > 0) & (phase < 1), peak * np.sin(np.pi * np.clip(phase, 0, 1)), 0.0)
    solar_direct = 0.8 * clear_sky * cf
    solar_diffuse = clear_sky * (0.12 * cf + 0.25 * (1.0 - cf))

    depression = np.abs(
        2.0 + 3.0 * cf + _hourly_to_steps(_ar1(_rng(cfg.seed, "dewpoint_temp"), n_hours, 0.9, 0.5), t_hours)
    )
    dewpoint = drybulb - depression
    a, b = 17.62, 243.12
    rel_humidity = np.clip(100.0 * np.exp(a * dewpoint / (b + dewpoint) - a * drybulb / (b + drybulb)), 0.0, 100.0)

    wind_speed = np.abs(3.0 + _hourly_to_steps(_ar1(_rng(cfg.seed, "wind_speed"), n_hours, 0.9, 0.8), t_hours))
    wind_direction = np.mod(
        225.0 + _hourly_to_steps(_ar1(_rng(cfg.seed, "wind_direction"), n_hours, 0.95, 15.0), t_hours), 360.0
    )

    specs = [
        ColumnSpec("drybulb_temp", W, "degC"),
        ColumnSpec("dewpoint_temp", W, "degC"),
        ColumnSpec("solar_direct", W, "W/m2"),
        ColumnSpec("solar_diffuse", W, "W/m2"),
        ColumnSpec("rel_humidity", W, "%"),
        ColumnSpec("wind_speed", W, "m/s"),
        ColumnSpec("wind_direction", W, "deg"),
    ]
    vals = np.column_stack([drybulb, dewpoint, solar_direct, solar_diffuse, rel_humidity, wind_speed, wind_direction])
    return TimeSeriesFrame(ts, specs, vals, cfg.step_minutes)


# ---------------------------------------------------------------------------
# occupants


def _hourly_bernoulli(rng, probs_by_hour: np.ndarray) -> np.ndarray:
    return (rng.random(len(probs_by_hour)) < probs_by_hour).astype(float)


def _episodes(rng, n_steps, step, starts_per_step, mean_minutes):
    """Boolean series of Poisson-started episodes with exponential durations."""
    out = np.zeros(n_steps)
    u = rng.random(n_steps)
    durations = rng.exponential(mean_minutes, n_steps)
    starts = np.flatnonzero(u < starts_per_step)
    for s in starts:
        out[s : s + max(1, int(round(durations[s] / step)))] = 1.0
    return out


@dataclass(frozen=True)
class _Behaviour:
    occupancy: np.ndarray  # (T, rooms)
    window: np.ndarray
    blinds: np.ndarray
    setpoint: np.ndarray
    ac_mode: np.ndarray  # (T,)
    extra_gains: np.ndarray  # (T, rooms) hidden
    extra_conductance: np.ndarray  # (T, rooms) hidden


def _running_mean(x: np.ndarray, window: int) -> np.ndarray:
    kernel = np.ones(window) / window
    return np.convolve(np.r_[np.full(window - 1, x[0]), x], kernel, mode="valid")


def _ac_mode(drybulb: np.ndarray, step: int) -> np.ndarray:
    """Cooling (1) when the 48 h mean outdoor temperature exceeds 16 degC, else heating (0)."""
    return (_running_mean(drybulb, 48 * 60 // step) > 16.0).astype(float)


def _open_loop_behaviour(cfg: WorldConfig, ts: np.ndarray, drybulb: np.ndarray) -> _Behaviour:
    rooms = room_names(cfg.n_rooms)
    doy, hour, month, weekday = _calendar(ts)
    n = len(ts)
    step = cfg.step_minutes
    hour_idx = ((ts - ts[0]).astype(np.int64) // 60).astype(np.int64)
    n_hours = int(hour_idx[-1]) + 1
    h0 = np.arange(n_hours)
    hour_of_day = (h0 + 0) % 24  # timeline starts at midnight
    weekend_h = ((((ts[0].astype("datetime64[D]").astype(np.int64) + h0 // 24) + 3) % 7) >= 5)
    years = (ts.astype("datetime64[Y]").astype(np.int64) + 1970)
    summerness = np.clip(np.sin(2 * np.pi * (doy - 100.0) / 365.0), 0.0, 1.0)
    ac_mode = _ac_mode(drybulb, step)

    occ = np.zeros((n, len(rooms)))
    win = np.zeros((n, len(rooms)))
    blinds = np.zeros((n, len(rooms)))
    sp = np.zeros((n, len(rooms)))
    extra_q = np.zeros((n, len(rooms)))
    extra_g = np.zeros((n, len(rooms)))

    for r, room in enumerate(rooms):
        kind = room_kind(r)
        wd, we = (np.asarray(p) for p in cfg.occupancy_profiles[kind])
        p_occ = np.where(weekend_h, we[hour_of_day], wd[hour_of_day])
        occ_h = _hourly_bernoulli(_rng(cfg.seed, f"{room}_occupancy"), p_occ)
        occ[:, r] = occ_h[hour_idx]

        if kind != "bathroom":
            rng = _rng(cfg.seed, f"{room}_window")
            rate = cfg.window_rate_per_day * (1.0 + 1.5 * summerness) * (step / 1440.0)
            w = _episodes(rng, n, step, rate, cfg.window_mean_minutes)
            lo, hi = cfg.spring_episode_hours
            for year in np.unique(years):
                # one long airing episode every March, and often one in April
                for mon, prob in ((3, 1.0), (4, 0.6)):
                    if rng.random() >= prob:
                        continue
                    start = np.datetime64(f"{year}-{mon:02d}-01T00:00", "m")
                    start += np.timedelta64(int(rng.uniform(0, 18 * 24 * 60)), "m")
                    hours = rng.uniform(lo, hi) if mon == 3 else rng.uniform(24.0, 72.0)
                    stop = start + np.timedelta64(int(hours * 60), "m")
                    w[(ts >= start) & (ts < stop)] = 1.0
            win[:, r] = w

            rng_b = _rng(cfg.seed, f"{room}_blinds")
            n_days = n_hours // 24 + 1
            day_down = rng_b.random(n_days)
            night_down = rng_b.random(n_days)
            d_of_h = h0 // 24
            doy_h = np.minimum(doy[np.minimum(h0 * (60 // step), n - 1)], 364)
            sunny = np.clip(np.sin(2 * np.pi * (doy_h - 100.0) / 365.0), 0.0, 1.0)
            down_day = (day_down[d_of_h] < 0.15 + 0.7 * sunny) & (hour_of_day >= 10) & (hour_of_day < 18)
            down_night = (night_down[d_of_h] < (0.85 if kind == "bedroom" else 0.4)) & (
                (hour_of_day >= 22) | (hour_of_day < 7)
            )
            blinds[:, r] = (down_day | down_night).astype(float)[hour_idx]

        offset = _rng(cfg.seed, f"{room}_setpoint").uniform(-0.5, 0.5)
        day_time = (hour >= 7) & (hour < 22)
        bath = 1.0 if kind == "bathroom" else 0.0
        heat_sp = np.where(day_time, cfg.setpoint_day, cfg.setpoint_night) + offset + bath
        sp[:, r] = np.where(ac_mode == 1, cfg.cooling_setpoint + offset, heat_sp)

        if cfg.occupant_gains:
            rng_q = _rng(cfg.seed, f"{room}_hidden_gain")
            factor = rng_q.uniform(0.3, 2.2, n_hours)[hour_idx]
            base = nominal_room(kind)["occupant_gain"]
            extra_q[:, r] = occ[:, r] * base * (factor - 1.0)
            if kind == "living":
                cook_days = rng_q.random(n_hours // 24 + 2) < 0.7
                cooking = cook_days[hour_idx // 24] & (hour >= 18.0) & (hour < 19.5)
                extra_q[:, r] += 1200.0 * cooking
            if kind == "bathroom":
                shower = (occ[:, r] > 0) & (hour >= 6.0) & (hour < 9.0)
                extra_q[:, r] += 700.0 * shower
            airing = rng_q.random(n_hours)[hour_idx] < 0.25
            extra_g[:, r] = 20.0 * airing * occ[:, r]

    return _Behaviour(occ, win, blinds, sp, ac_mode, extra_q, extra_g)


# ---------------------------------------------------------------------------
# ground truth


@dataclass(frozen=True)
class GroundTruthModel:
    """Hidden two-node-per-room network plus thermostat settings."""

    network: RcNetwork
    rooms: tuple
    max_flow: tuple
    band: float

    def to_dict(self) -> dict:
        return {
            "format": "hybridtherm.ground-truth",
            "version": 1,
            "rooms": list(self.rooms),
            "max_flow": list(self.max_flow),
            "band": self.band,
            "network": self.network.to_dict(),
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def ground_truth_model(config: WorldConfig) -> GroundTruthModel:
    rooms = room_names(config.n_rooms)
    zones = []
    links = []
    for i, room in enumerate(rooms):
        p = nominal_room(room_kind(i))
        occ_gain = p["occupant_gain"] if config.occupant_gains else 0.0
        zones.append(Zone(
            name=f"{room}_air", room=room, capacitance=p["c_air"], r_out=p["r_air_out"],
            heat_gain=p["heat_gain"], solar_aperture=0.6 * p["solar_aperture"], occupant_gain=occ_gain,
            window_conductance=p["window_conductance"], initial_temp=20.0, observed=True,
        ))
        zones.append(Zone(
            name=f"{room}_wall", room=room, capacitance=p["c_wall"], r_out=p["r_wall_out"],
            solar_aperture=0.4 * p["solar_aperture"], initial_temp=20.0, observed=False,
        ))
        links.append((f"{room}_air", f"{room}_wall", p["r_air_wall"]))
        if i > 0:
            links.append((f"{rooms[i - 1]}_air", f"{room}_air", INTER_ROOM_RESISTANCE))
    return GroundTruthModel(RcNetwork(tuple(zones), tuple(links)), tuple(rooms), (0.05,) * len(rooms), 0.5)


def _network_temperature(drybulb: np.ndarray, ac_mode: np.ndarray, step: int) -> np.ndarray:
    """Smoothed supply temperature: heating curve in heating mode, 16 degC in cooling mode."""
    win = max(1, int(round(6 * 60 / step)))
    smooth_out = _running_mean(drybulb, win)
    supply = np.where(ac_mode == 1, 16.0, np.clip(30.0 + 0.6 * (15.0 - smooth_out), 25.0, 45.0))
    return _running_mean(supply, win)


@dataclass(frozen=True)
class _World:
    weather: TimeSeriesFrame
    behaviour: TimeSeriesFrame
    temperatures: np.ndarray  # (T, rooms) noiseless air temperatures
    model: GroundTruthModel


_CACHE: dict = {}


def _simulate_world(cfg: WorldConfig) -> _World:
    key = json.dumps(cfg.to_dict(), sort_keys=True)
    if key in _CACHE:
        return _CACHE[key]
    weather = generate_weather(cfg)
    ts = weather.timestamps
    beh = _open_loop_behaviour(cfg, ts, weather.column("drybulb_temp"))
    rooms = room_names(cfg.n_rooms)
    gt = ground_truth_model(cfg)

    specs, vals = [], []
    for r, room in enumerate(rooms):
        specs += [ColumnSpec(f"{room}_occupancy", R, "-", True), ColumnSpec(f"{room}_window", R, "-", True),
                  ColumnSpec(f"{room}_blinds", R, "-", True)]
        vals += [beh.occupancy[:, r], beh.window[:, r], beh.blinds[:, r]]
    open_drivers = weather.with_columns(specs, np.column_stack(vals))
    open_drivers = open_drivers.with_columns([ColumnSpec("ac_mode", B, "-", True)], beh.ac_mode[:, None])

    n_nodes = len(gt.network.zones)
    air = np.arange(0, n_nodes, 2)
    extra_q = np.zeros((len(ts), n_nodes))
    extra_g = np.zeros((len(ts), n_nodes))
    extra_q[:, air] = beh.extra_gains
    extra_g[:, air] = beh.extra_conductance
    T, flows = simulate_closed_loop(
        gt.network, open_drivers, air, beh.setpoint, beh.ac_mode.astype(np.int64),
        np.asarray(gt.max_flow), gt.band, extra_q, extra_g,
    )
    temps = T[:, air]

    heating = np.where(beh.ac_mode == 0, flows.sum(axis=1), 0.0)
    cooling = np.where(beh.ac_mode == 1, flows.sum(axis=1), 0.0)
    network_temp = _network_temperature(weather.column("drybulb_temp"), beh.ac_mode, cfg.step_minutes)
    b_specs = [
        ColumnSpec("heating_mass_flow", B, "kg/s"),
        ColumnSpec("cooling_mass_flow", B, "kg/s"),
        ColumnSpec("network_temp", B, "degC"),
        ColumnSpec("ac_mode", B, "-", True),
    ]
    b_vals = [heating, cooling, network_temp, beh.ac_mode]
    for r, room in enumerate(rooms):
        b_specs += [
            ColumnSpec(f"{room}_mass_flow", R, "kg/s"),
            ColumnSpec(f"{room}_setpoint", R, "degC"),
            ColumnSpec(f"{room}_occupancy", R, "-", True),
            ColumnSpec(f"{room}_window", R, "-", True),
            ColumnSpec(f"{room}_blinds", R, "-", True),
        ]
        b_vals += [flows[:, r], beh.setpoint[:, r], beh.occupancy[:, r], beh.window[:, r], beh.blinds[:, r]]
    behaviour = TimeSeriesFrame(ts, b_specs, np.column_stack(b_vals), cfg.step_minutes)
    world = _World(weather, behaviour, temps, gt)
    _CACHE.clear()
    _CACHE[key] = world
    return world


def generate_occupant_behaviour(config: WorldConfig) -> TimeSeriesFrame:
    """Building- and room-level operation columns.

    Occupancy, window and blinds states are binary. Setpoints follow a
    day/night schedule in heating mode and a constant value in cooling mode.
    Mass flows come from the thermostat acting on the hidden model.
    """
    return _simulate_world(config).behaviour


def generate_dataset(config: WorldConfig, with_missing: bool = True) -> TimeSeriesFrame:
    """Full table: datetime, weather, building, room and noisy target columns."""
    cfg = config
    world = _simulate_world(cfg)
    ts = world.weather.timestamps
    dt_specs, dt_vals = datetime_features(ts)
    rooms = room_names(cfg.n_rooms)
    t_specs = [ColumnSpec(target_column(r), FeatureGroup.TARGET, "degC") for r in rooms]
    noise = np.column_stack([
        _rng(cfg.seed, f"{target_column(r)}_noise").standard_normal(len(ts)) * cfg.sensor_noise_std for r in rooms
    ])
    frame = TimeSeriesFrame(ts, dt_specs, dt_vals, cfg.step_minutes)
    frame = frame.with_columns(world.weather.columns, world.weather.values)
    frame = frame.with_columns(world.behaviour.columns, world.behaviour.values)
    frame = frame.with_columns(t_specs, world.temperatures + noise)
    if not with_missing or cfg.missing_fraction == 0:
        return frame
    vals = frame.values.copy()
    for j, spec in enumerate(frame.columns):
        if spec.group == FeatureGroup.DATETIME:
            continue
        mask = _rng(cfg.seed, f"{spec.name}_missing").random(len(ts)) < cfg.missing_fraction
        vals[mask, j] = np.nan
    return TimeSeriesFrame(ts, frame.columns, vals, cfg.step_minutes)
