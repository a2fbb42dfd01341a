"""Fixed-step dynamic model of the island plant.

Single-bus RMS model with a uniform island frequency: diesel genset with
governor droop and swing dynamics, curtailable PV, up to two battery
inverters (one may be grid-forming), a switchable load bank with command
latency, an aggregated load and a main-grid boundary breaker. The anchor
unit is solved as slack every step, so the power balance is exact by
construction; frequency follows the swing equation when the diesel anchors
an island and the forming inverter's droop characteristic otherwise.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

from gridloop.util import clamp

TWO_PI = 2.0 * math.pi

GRID_FORMING = "grid_forming"
GRID_FOLLOWING = "grid_following"

# operating modes of the island bus
MODE_GRID = "grid"            # breaker closed onto a live main grid
MODE_ISLAND_DIESEL = "island_diesel"
MODE_ISLAND_VSI = "island_vsi"
MODE_DEAD = "dead"            # de-energized bus


class InvalidScenario(Exception):
    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


class NoFrequencyAnchor(InvalidScenario):
    def __init__(self, detail: str = ""):
        super().__init__("GridScenario.anchor", detail)


class FrequencyCollapse(Exception):
    def __init__(self, t_s: float, f_hz: float):
        self.t_s = t_s
        self.f_hz = f_hz
        super().__init__(f"island frequency {f_hz:.3f} Hz left the admissible band at t={t_s:.3f} s")


@dataclass
class SimConfig:
    dt_s: float = 1e-3
    control_period_s: float = 0.1
    duration_s: float = 10.0
    f_nominal_hz: float = 50.0
    seed: int = 0

    def steps_per_cycle(self) -> int:
        return int(round(self.control_period_s / self.dt_s))

    def n_steps(self) -> int:
        return int(round(self.duration_s / self.dt_s))

    def validate(self) -> None:
        if self.dt_s <= 0:
            raise InvalidScenario("SimConfig.dt_s", "must be > 0")
        if self.f_nominal_hz <= 0:
            raise InvalidScenario("SimConfig.f_nominal_hz", "must be > 0")
        if self.duration_s < 0:
            raise InvalidScenario("SimConfig.duration_s", "must be >= 0")
        n = self.control_period_s / self.dt_s
        if self.control_period_s <= 0 or abs(n - round(n)) > 1e-6:
            raise InvalidScenario(
                "SimConfig.control_period_s",
                f"{self.control_period_s} is not an integer multiple of dt={self.dt_s}")


@dataclass
class DieselGenset:
    s_rated_kw: float
    h_s: float = 2.0
    droop_pu: float = 0.05
    t_gov_s: float = 0.5
    min_load_ratio: float = 0.30
    p_dispatch_kw: float = 0.0
    p_mech_kw: float = 0.0
    online: bool = True


@dataclass
class PvPlant:
    p_rated_kw: float
    irradiance_profile: tuple = ((0.0, 0.0),)   # (t_s, W/m2), piecewise constant
    curtail_setpoint_kw: float = -1.0           # -1 sentinel -> rated (no curtailment)
    irradiance_now: float = 0.0
    profile_idx: int = 0

    def __post_init__(self):
        if self.curtail_setpoint_kw < 0:
            self.curtail_setpoint_kw = self.p_rated_kw


@dataclass
class BatteryInverter:
    mode: str
    p_rated_kw: float
    capacity_kwh: float
    soc_frac: float = 0.5
    p_setpoint_kw: float = 0.0       # grid-following only
    droop_f_pu: float = 0.02         # grid-forming only
    droop_v_pu: float = 0.0          # reserved; no reactive model
    ramp_rate_pu_s: float = 0.5      # forming voltage ramp after energize
    uv_lockout_pu: float = 0.8
    energized: bool = False          # forming enable flag
    v_ramp_pu: float = 0.0
    f_trim_hz: float = 0.0


@dataclass
class LoadBank:
    step_sizes_kw: tuple
    switch_delay_s: float = 0.0
    active_mask: int = 0
    pending: dict = field(default_factory=dict)  # step idx -> (due_t_s, target_on)

    def power_kw(self) -> float:
        return sum(w for i, w in enumerate(self.step_sizes_kw) if self.active_mask >> i & 1)


@dataclass
class GridEvent:
    t_s: float
    kind: str                  # load_step | irradiance_step | blackout | grid_recovery | anchor_trip
    p_kw: float | None = None
    wm2: float | None = None
    v_pu: float | None = None
    f_hz: float | None = None


@dataclass
class GridScenario:
    diesel: DieselGenset | None = None
    pv: PvPlant | None = None
    batteries: list = field(default_factory=list)
    bank: LoadBank | None = None
    load_base_kw: float = 0.0
    loss_frac: float = 0.0
    v_base_v: float = 230.0
    main_grid: dict | None = None         # {"v_pu": .., "f_hz": ..} or None (off-grid)
    breaker_initial_closed: bool = False
    anchor: str = "diesel"                # diesel | battery1 | battery2
    events: list = field(default_factory=list)


@dataclass
class GridState:
    t_s: float = 0.0
    step_index: int = 0
    f_hz: float = 0.0
    v_pu: float = 0.0
    theta_island_rad: float = 0.0
    theta_grid_rad: float = 0.0
    breaker_main: bool = False
    grid_v_pu: float = 0.0
    grid_f_hz: float = 0.0
    mode: str = MODE_DEAD
    energized: bool = False
    p_load_kw: float = 0.0      # served aggregated load, banks excluded
    p_banks_kw: float = 0.0
    p_hut_kw: float = 0.0       # external / power-interface load
    p_loss_kw: float = 0.0
    p_pv_kw: float = 0.0
    p_diesel_kw: float = 0.0
    p_grid_kw: float = 0.0
    p_batt_kw: list = field(default_factory=list)
    protection_group: int = 0
    diesel: DieselGenset | None = None
    pv: PvPlant | None = None
    batteries: list = field(default_factory=list)
    bank: LoadBank | None = None
    event_ptr: int = 0

    def clone(self) -> "GridState":
        return copy.deepcopy(self)

    def battery_power(self, idx: int) -> float:
        return self.p_batt_kw[idx] if idx < len(self.p_batt_kw) else 0.0

    def battery_soc(self, idx: int) -> float:
        return self.batteries[idx].soc_frac if idx < len(self.batteries) else 0.0


def validate_scenario(scenario: GridScenario, cfg: SimConfig) -> None:
    cfg.validate()
    sc = scenario
    if sc.diesel is None and sc.pv is None and not sc.batteries and sc.bank is None:
        raise InvalidScenario("GridScenario.components", "scenario has no components")
    if sc.loss_frac < 0 or sc.loss_frac >= 1:
        raise InvalidScenario("GridScenario.loss_frac", "must be in [0, 1)")
    if sc.v_base_v <= 0:
        raise InvalidScenario("GridScenario.v_base_v", "must be > 0")
    if sc.load_base_kw < 0:
        raise InvalidScenario("GridScenario.load_base_kw", "must be >= 0")

    d = sc.diesel
    if d is not None:
        if d.s_rated_kw <= 0:
            raise InvalidScenario("DieselGenset.s_rated_kw", "must be > 0")
        if not 0 < d.min_load_ratio < 1:
            raise InvalidScenario("DieselGenset.min_load_ratio", "must be in (0, 1)")
        if d.h_s <= 0:
            raise InvalidScenario("DieselGenset.h_s", "must be > 0")
        if d.droop_pu <= 0:
            raise InvalidScenario("DieselGenset.droop_pu", "must be > 0")
        if d.t_gov_s < 0:
            raise InvalidScenario("DieselGenset.t_gov_s", "must be >= 0")
        if not 0 <= d.p_mech_kw <= d.s_rated_kw:
            raise InvalidScenario("DieselGenset.p_mech_kw", "must be in [0, s_rated_kw]")
        if not 0 <= d.p_dispatch_kw <= d.s_rated_kw:
            raise InvalidScenario("DieselGenset.p_dispatch_kw", "must be in [0, s_rated_kw]")

    if sc.pv is not None:
        pv = sc.pv
        if pv.p_rated_kw <= 0:
            raise InvalidScenario("PvPlant.p_rated_kw", "must be > 0")
        if not 0 <= pv.curtail_setpoint_kw <= pv.p_rated_kw:
            raise InvalidScenario("PvPlant.curtail_setpoint_kw", "must be in [0, p_rated_kw]")
        last_t = -math.inf
        for t, wm2 in pv.irradiance_profile:
            if wm2 < 0:
                raise InvalidScenario("PvPlant.irradiance_profile", "irradiance must be >= 0")
            if t < last_t:
                raise InvalidScenario("PvPlant.irradiance_profile", "times must be sorted")
            last_t = t

    if len(sc.batteries) > 2:
        raise InvalidScenario("GridScenario.batteries", "at most two battery inverters")
    forming = [b for b in sc.batteries if b.mode == GRID_FORMING]
    if len(forming) > 1:
        raise InvalidScenario("BatteryInverter.mode", "at most one grid-forming unit per island")
    for b in sc.batteries:
        if b.mode not in (GRID_FORMING, GRID_FOLLOWING):
            raise InvalidScenario("BatteryInverter.mode", f"unknown mode {b.mode!r}")
        if not 0 <= b.soc_frac <= 1:
            raise InvalidScenario("BatteryInverter.soc_frac", "must be in [0, 1]")
        if b.capacity_kwh <= 0:
            raise InvalidScenario("BatteryInverter.capacity_kwh", "must be > 0")
        if b.p_rated_kw <= 0:
            raise InvalidScenario("BatteryInverter.p_rated_kw", "must be > 0")
        if b.mode == GRID_FORMING and b.droop_f_pu <= 0:
            raise InvalidScenario("BatteryInverter.droop_f_pu", "must be > 0 for a forming unit")

    if sc.bank is not None:
        bank = sc.bank
        if not bank.step_sizes_kw:
            raise InvalidScenario("LoadBank.step_sizes_kw", "needs at least one step")
        if any(w <= 0 for w in bank.step_sizes_kw):
            raise InvalidScenario("LoadBank.step_sizes_kw", "all step sizes must be > 0")
        if bank.switch_delay_s < 0:
            raise InvalidScenario("LoadBank.switch_delay_s", "must be >= 0")
        if not 0 <= bank.active_mask < (1 << len(bank.step_sizes_kw)):
            raise InvalidScenario("LoadBank.active_mask", "mask wider than the step list")

    if sc.main_grid is not None:
        if sc.main_grid.get("v_pu", 0.0) < 0:
            raise InvalidScenario("GridScenario.main_grid", "v_pu must be >= 0")
        if sc.main_grid.get("f_hz", 0.0) <= 0:
            raise InvalidScenario("GridScenario.main_grid", "f_hz must be > 0")
    elif sc.breaker_initial_closed:
        raise InvalidScenario("GridScenario.breaker_initial_closed",
                              "breaker cannot be closed without a main grid")

    if sc.anchor == "diesel":
        if sc.diesel is None:
            raise NoFrequencyAnchor("anchor is diesel but no diesel is configured")
        if forming:
            raise InvalidScenario("GridScenario.anchor",
                                  "diesel anchor excludes a grid-forming inverter")
    elif sc.anchor in ("battery1", "battery2"):
        idx = 0 if sc.anchor == "battery1" else 1
        if idx >= len(sc.batteries):
            raise NoFrequencyAnchor(f"anchor {sc.anchor} not present")
        if sc.batteries[idx].mode != GRID_FORMING:
            raise NoFrequencyAnchor(f"anchor {sc.anchor} is not grid-forming")
        if sc.diesel is not None:
            raise InvalidScenario("GridScenario.anchor",
                                  "battery anchor excludes a diesel genset")
    else:
        raise NoFrequencyAnchor(f"unknown anchor {sc.anchor!r}")

    known = {"load_step", "irradiance_step", "blackout", "grid_recovery", "anchor_trip"}
    for ev in sc.events:
        if ev.kind not in known:
            raise InvalidScenario("GridScenario.events", f"unknown event kind {ev.kind!r}")
        if not 0 <= ev.t_s <= cfg.duration_s:
            raise InvalidScenario("GridScenario.events",
                                  f"event at t={ev.t_s} outside [0, {cfg.duration_s}]")
        if ev.kind == "grid_recovery" and sc.main_grid is None:
            raise InvalidScenario("GridScenario.events", "grid_recovery without a main grid")


# -- pure component operations -------------------------------------------------

def pv_output(plant: PvPlant, irradiance_wm2: float) -> float:
    """Available PV power under the active curtailment ceiling, never negative."""
    raw = plant.p_rated_kw * irradiance_wm2 / 1000.0
    return max(0.0, min(raw, plant.curtail_setpoint_kw))


def governor_update(diesel: DieselGenset, f_hz: float, dt_s: float,
                    f_nominal_hz: float) -> DieselGenset:
    """First-order governor: p_mech relaxes toward the clamped droop target."""
    d = copy.copy(diesel)
    p_ref = d.p_dispatch_kw + d.s_rated_kw * (f_nominal_hz - f_hz) / (d.droop_pu * f_nominal_hz)
    target = clamp(p_ref, 0.0, d.s_rated_kw)
    if d.t_gov_s <= 0:
        d.p_mech_kw = target
    else:
        d.p_mech_kw += (dt_s / d.t_gov_s) * (target - d.p_mech_kw)
    return d


def load_bank_command(bank: LoadBank, mask: int, t_now: float) -> LoadBank:
    """Queue the switching actions needed to reach `mask`.

    A step is enqueued only when the commanded state differs from its
    effective future state (current state overridden by any pending change),
    so re-commands are deduplicated and reversals supersede the pending entry.
    """
    new = copy.copy(bank)
    new.pending = dict(bank.pending)
    for i in range(len(new.step_sizes_kw)):
        desired = bool(mask >> i & 1)
        effective = new.pending[i][1] if i in new.pending else bool(new.active_mask >> i & 1)
        if desired != effective:
            new.pending[i] = (t_now + new.switch_delay_s, desired)
    return new


def power_balance_residual(state: GridState) -> float:
    """Generation minus consumption minus losses; zero for any solved state."""
    gen = state.p_diesel_kw + state.p_pv_kw + state.p_grid_kw + sum(state.p_batt_kw)
    cons = state.p_load_kw + state.p_banks_kw + state.p_hut_kw + state.p_loss_kw
    return gen - cons


# -- simulation ------------------------------------------------------------------

class GridSim:
    """Steps one island scenario through virtual time, mutating its state.

    Each simulation step is split so the orchestrator can interleave the
    controller exchange: `begin_step` applies due events and solves the
    algebraic powers at the current instant, `resolve` re-solves after
    command writes, `finish_step` integrates the dynamics to the next step.
    """

    def __init__(self, scenario: GridScenario, cfg: SimConfig):
        validate_scenario(scenario, cfg)
        self.scenario = scenario
        self.cfg = cfg
        self.events = sorted(scenario.events, key=lambda e: (e.t_s, e.kind))
        self.load_base_kw = scenario.load_base_kw
        self.external_load_kw = 0.0       # stage-4 power-interface injection
        self.external_resistance = None   # (r_ohm, v_base_v) equivalent for stages 1-3
        self.run_events: list = []        # (t_s, kind, detail) plant-side happenings
        self.state = self._initial_state()

    # -- construction

    def _initial_state(self) -> GridState:
        sc = self.scenario
        st = GridState(
            diesel=copy.deepcopy(sc.diesel),
            pv=copy.deepcopy(sc.pv),
            batteries=copy.deepcopy(sc.batteries),
            bank=copy.deepcopy(sc.bank),
        )
        st.p_batt_kw = [0.0] * len(st.batteries)
        st.breaker_main = sc.breaker_initial_closed and sc.main_grid is not None
        if sc.main_grid is not None:
            st.grid_v_pu = float(sc.main_grid.get("v_pu", 1.0))
            st.grid_f_hz = float(sc.main_grid.get("f_hz", self.cfg.f_nominal_hz))
        if st.pv is not None and st.pv.irradiance_profile:
            st.pv.irradiance_now = st.pv.irradiance_profile[0][1]

        # anchor starts energized at nominal frequency
        if sc.anchor == "diesel":
            st.f_hz = st.grid_f_hz if st.breaker_main else self.cfg.f_nominal_hz
        else:
            vsi = st.batteries[0 if sc.anchor == "battery1" else 1]
            if not st.breaker_main:
                vsi.energized = True
                vsi.v_ramp_pu = 1.0
                st.f_hz = self.cfg.f_nominal_hz
            else:
                st.f_hz = st.grid_f_hz
        self._solve(st)
        # start the governor balanced so t=0 satisfies the power balance
        if st.diesel is not None and st.mode == MODE_ISLAND_DIESEL:
            st.diesel.p_mech_kw = clamp(st.p_diesel_kw, 0.0, st.diesel.s_rated_kw)
        return st

    # -- per-step phases

    def begin_step(self) -> None:
        st = self.state
        t = st.t_s
        self._apply_profile(st, t)
        self._apply_events(st, t)
        self._apply_bank_pending(st, t)
        self._solve(st)

    def resolve(self) -> None:
        self._solve(self.state)

    def finish_step(self) -> None:
        st = self.state
        dt = self.cfg.dt_s
        f_n = self.cfg.f_nominal_hz

        if st.mode == MODE_ISLAND_DIESEL:
            d = st.diesel
            p_mech = d.p_mech_kw if d.online else 0.0
            st.f_hz += dt * (p_mech - st.p_diesel_kw) * f_n / (2.0 * d.h_s * d.s_rated_kw)
            if d.online:
                st.diesel = governor_update(d, st.f_hz, dt, f_n)
            if not 0.5 * f_n <= st.f_hz <= 1.5 * f_n:
                raise FrequencyCollapse(st.t_s, st.f_hz)
        elif st.mode == MODE_GRID and st.diesel is not None and st.diesel.online:
            st.diesel = governor_update(st.diesel, st.f_hz, dt, f_n)

        for i, b in enumerate(st.batteries):
            if b.mode == GRID_FORMING and b.energized:
                b.v_ramp_pu = clamp(b.v_ramp_pu + b.ramp_rate_pu_s * dt, 0.0, 1.0)
            p = st.p_batt_kw[i]
            if p != 0.0:
                b.soc_frac = clamp(b.soc_frac - p * dt / (3600.0 * b.capacity_kwh), 0.0, 1.0)

        st.theta_island_rad += TWO_PI * st.f_hz * dt
        st.theta_grid_rad += TWO_PI * st.grid_f_hz * dt
        st.step_index += 1
        st.t_s = st.step_index * dt

    def step(self) -> None:
        self.begin_step()
        self.finish_step()

    # -- event and queue application

    def _apply_profile(self, st: GridState, t: float) -> None:
        pv = st.pv
        if pv is None:
            return
        while pv.profile_idx < len(pv.irradiance_profile) and \
                pv.irradiance_profile[pv.profile_idx][0] <= t:
            pv.irradiance_now = pv.irradiance_profile[pv.profile_idx][1]
            pv.profile_idx += 1

    def _apply_events(self, st: GridState, t: float) -> None:
        while st.event_ptr < len(self.events) and self.events[st.event_ptr].t_s <= t:
            ev = self.events[st.event_ptr]
            st.event_ptr += 1
            if ev.kind == "load_step":
                self.load_base_kw = float(ev.p_kw)
            elif ev.kind == "irradiance_step":
                if st.pv is not None:
                    st.pv.irradiance_now = float(ev.wm2)
            elif ev.kind == "blackout":
                if self.scenario.main_grid is not None:
                    st.grid_v_pu = 0.0
                    st.grid_f_hz = 0.0
                elif st.diesel is not None:
                    st.diesel.online = False
                    st.diesel.p_mech_kw = 0.0
                self.run_events.append((t, "plant", "blackout"))
            elif ev.kind == "anchor_trip":
                if st.diesel is not None:
                    st.diesel.online = False
                    st.diesel.p_mech_kw = 0.0
                self.run_events.append((t, "plant", "anchor_trip"))
            elif ev.kind == "grid_recovery":
                st.grid_v_pu = float(ev.v_pu if ev.v_pu is not None else 1.0)
                st.grid_f_hz = float(ev.f_hz if ev.f_hz is not None else self.cfg.f_nominal_hz)
                self.run_events.append((t, "plant", "grid_recovery"))

    def _apply_bank_pending(self, st: GridState, t: float) -> None:
        bank = st.bank
        if bank is None or not bank.pending:
            return
        due = sorted((d, i) for i, (d, _) in bank.pending.items() if d <= t)
        for _, i in due:
            _, target = bank.pending.pop(i)
            if target:
                bank.active_mask |= 1 << i
            else:
                bank.active_mask &= ~(1 << i)

    # -- algebraic solve

    def _mode_of(self, st: GridState) -> str:
        grid_live = self.scenario.main_grid is not None and st.grid_v_pu >= 0.5
        if st.breaker_main:
            return MODE_GRID if grid_live else MODE_DEAD
        if self.scenario.anchor == "diesel":
            return MODE_ISLAND_DIESEL if st.diesel is not None else MODE_DEAD
        vsi = self._forming(st)
        if vsi is not None and vsi.energized and vsi.v_ramp_pu > 0.0:
            return MODE_ISLAND_VSI
        return MODE_DEAD

    def _forming(self, st: GridState):
        for b in st.batteries:
            if b.mode == GRID_FORMING:
                return b
        return None

    def _solve(self, st: GridState) -> None:
        f_n = self.cfg.f_nominal_hz
        mode = self._mode_of(st)
        if mode == MODE_DEAD and st.mode != MODE_DEAD and st.mode != "":
            self._shed_on_deenergize(st)
        st.mode = mode
        st.energized = mode != MODE_DEAD

        if mode == MODE_DEAD:
            st.f_hz = 0.0
            st.v_pu = 0.0
            st.p_load_kw = st.p_banks_kw = st.p_hut_kw = st.p_loss_kw = 0.0
            st.p_pv_kw = st.p_diesel_kw = st.p_grid_kw = 0.0
            st.p_batt_kw = [0.0] * len(st.batteries)
            return

        if mode == MODE_GRID:
            st.f_hz = st.grid_f_hz
            st.v_pu = st.grid_v_pu
        elif mode == MODE_ISLAND_DIESEL:
            st.v_pu = 1.0
        else:
            st.v_pu = self._forming(st).v_ramp_pu

        # consumption side
        st.p_load_kw = self.load_base_kw
        st.p_banks_kw = st.bank.power_kw() if st.bank is not None else 0.0
        if self.external_resistance is not None:
            r_ohm, v_base = self.external_resistance
            st.p_hut_kw = (st.v_pu * v_base) ** 2 / r_ohm / 1000.0
        else:
            st.p_hut_kw = self.external_load_kw
        subtotal = st.p_load_kw + st.p_banks_kw + st.p_hut_kw
        st.p_loss_kw = self.scenario.loss_frac * subtotal
        consumption = subtotal + st.p_loss_kw

        # injections
        st.p_pv_kw = 0.0
        if st.pv is not None and st.v_pu >= 0.8:
            st.p_pv_kw = pv_output(st.pv, st.pv.irradiance_now)

        st.p_batt_kw = [0.0] * len(st.batteries)
        slack_batt = None
        for i, b in enumerate(st.batteries):
            if b.mode == GRID_FOLLOWING:
                if st.v_pu >= b.uv_lockout_pu:
                    p = clamp(b.p_setpoint_kw, -b.p_rated_kw, b.p_rated_kw)
                    st.p_batt_kw[i] = self._soc_gate(b, p)
            elif mode == MODE_GRID and b.energized:
                f_set = f_n + b.f_trim_hz
                p = (f_set - st.grid_f_hz) * b.p_rated_kw / (b.droop_f_pu * f_n)
                st.p_batt_kw[i] = self._soc_gate(b, clamp(p, -b.p_rated_kw, b.p_rated_kw))
            elif mode == MODE_ISLAND_VSI:
                slack_batt = i

        st.p_diesel_kw = 0.0
        st.p_grid_kw = 0.0
        if mode == MODE_GRID:
            if st.diesel is not None and st.diesel.online:
                st.p_diesel_kw = st.diesel.p_mech_kw
            st.p_grid_kw = consumption - st.p_pv_kw - sum(st.p_batt_kw) - st.p_diesel_kw
        elif mode == MODE_ISLAND_DIESEL:
            st.p_diesel_kw = consumption - st.p_pv_kw - sum(st.p_batt_kw)
        else:
            vsi = st.batteries[slack_batt]
            p_vsi = consumption - st.p_pv_kw - sum(
                p for i, p in enumerate(st.p_batt_kw) if i != slack_batt)
            if vsi.soc_frac <= 0.0 and p_vsi > 0.0:
                vsi.energized = False
                vsi.v_ramp_pu = 0.0
                self.run_events.append((st.t_s, "plant", "forming_unit_depleted"))
                self._solve(st)
                return
            st.p_batt_kw[slack_batt] = p_vsi
            st.f_hz = f_n + vsi.f_trim_hz - vsi.droop_f_pu * f_n * p_vsi / vsi.p_rated_kw

    def _soc_gate(self, b: BatteryInverter, p: float) -> float:
        if p > 0.0 and b.soc_frac <= 0.0:
            return 0.0
        if p < 0.0 and b.soc_frac >= 1.0:
            return 0.0
        return p

    def _shed_on_deenergize(self, st: GridState) -> None:
        """A dead bus drops all switched load and trips the forming unit."""
        if st.bank is not None:
            st.bank.active_mask = 0
            st.bank.pending.clear()
        vsi = self._forming(st)
        if vsi is not None:
            vsi.energized = False
            vsi.v_ramp_pu = 0.0
        self.run_events.append((st.t_s, "plant", "bus_deenergized"))

    # -- controller-facing surface

    def apply_register_write(self, addr: int, values: list) -> None:
        from gridloop.stagelink import registers as regs

        st = self.state
        for offset, value in enumerate(values):
            reg = addr + offset
            if reg == regs.REG_BANK_MASK and st.bank is not None:
                st.bank = load_bank_command(st.bank, int(round(value)), st.t_s)
            elif reg == regs.REG_PV_CURTAIL_KW and st.pv is not None:
                st.pv.curtail_setpoint_kw = clamp(value, 0.0, st.pv.p_rated_kw)
            elif reg == regs.REG_BATT2_SETPOINT_KW and len(st.batteries) >= 2:
                b = st.batteries[1]
                b.p_setpoint_kw = clamp(value, -b.p_rated_kw, b.p_rated_kw)
            elif reg == regs.REG_BREAKER_CMD and self.scenario.main_grid is not None:
                st.breaker_main = bool(int(round(value)))
            elif reg == regs.REG_PROTECTION_GROUP:
                st.protection_group = int(round(value))
            elif reg == regs.REG_BLACKSTART_ACK:
                vsi = self._forming(st)
                if vsi is not None:
                    vsi.energized = bool(int(round(value)))
                    if not vsi.energized:
                        vsi.v_ramp_pu = 0.0
            elif reg == regs.REG_FREQ_TRIM_HZ:
                vsi = self._forming(st)
                if vsi is not None:
                    vsi.f_trim_hz = clamp(value, -2.0, 2.0)

    def measurements(self):
        from gridloop.stagelink.registers import Measurements
        from gridloop.util import wrap_angle

        st = self.state
        has_grid = self.scenario.main_grid is not None
        d = st.diesel
        return Measurements(
            f_hz=st.f_hz,
            v_pu=st.v_pu,
            p_load_kw=st.p_load_kw + st.p_hut_kw,
            p_pv_kw=st.p_pv_kw,
            p_diesel_kw=st.p_diesel_kw,
            p_batt1_kw=st.battery_power(0),
            p_batt2_kw=st.battery_power(1),
            soc1=st.battery_soc(0),
            soc2=st.battery_soc(1),
            breaker_main=1.0 if st.breaker_main else 0.0,
            df_hz=st.f_hz - st.grid_f_hz if has_grid else 0.0,
            dv_pu=st.v_pu - st.grid_v_pu if has_grid else 0.0,
            dtheta_rad=wrap_angle(st.theta_island_rad - st.theta_grid_rad) if has_grid else 0.0,
            diesel_ratio=st.p_diesel_kw / d.s_rated_kw if d is not None else 0.0,
        )

    def state_row(self) -> tuple:
        st = self.state
        return (
            st.t_s, st.f_hz, st.v_pu,
            st.p_load_kw + st.p_hut_kw, st.p_pv_kw, st.p_diesel_kw,
            st.battery_power(0), st.battery_power(1),
            st.battery_soc(0), st.battery_soc(1),
            1.0 if st.breaker_main else 0.0,
            float(st.bank.active_mask) if st.bank is not None else 0.0,
            st.pv.curtail_setpoint_kw if st.pv is not None else 0.0,
        )


# -- pure transition wrappers ----------------------------------------------------

def init_grid(scenario: GridScenario, cfg: SimConfig) -> GridState:
    """Validated t=0 state: nominal frequency, empty queues, exact balance."""
    return GridSim(scenario, cfg).state.clone()


def step_dynamics(state: GridState, scenario: GridScenario, cfg: SimConfig) -> GridState:
    """Advance a state value by one dt; the input state is left untouched."""
    sim = GridSim(scenario, cfg)
    sim.state = state.clone()
    sim.load_base_kw = scenario.load_base_kw
    # replay any events that predate the state's clock
    sim.step()
    return sim.state
