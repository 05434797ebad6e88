"""Discrete-time microscopic simulation.

Each road holds a single FIFO stream of vehicles ordered front first.
Vehicles follow the Intelligent Driver Model against their leader, or
against a virtual stopped obstacle at the stop line when they may not
cross.  A vehicle crosses a junction only when its movement is served by
the active phase, the movement's discharge budget holds a full vehicle,
and the next road has room at its entrance.

One call to :meth:`Simulation.step` runs, in order: injection of due
vehicles, the snapshot record for the current step, the controller
decision (at epochs), discharge budgets, car-following motion, junction
crossings and finishes, and finally signal advance.  A vehicle that
completes its route during step ``t`` is timestamped ``t + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from tsa.contract import (
    SET_PHASE,
    Controller,
    JunctionObservation,
    SignalAction,
    VehicleAction,
    VehicleObservation,
)
from tsa.demand.routing import path_cost, route_length
from tsa.engine.config import EngineParams, SimConfig
from tsa.engine.trace import SimTrace, StepRecord, VehicleRecord
from tsa.errors import ControllerFailure, UnknownJunction
from tsa.metrics.carbon import carbon_rate
from tsa.netmodel.model import Movement, RoadNetwork
from tsa.policies.pressure import all_phase_pressures

PENDING, EN_ROUTE, FINISHED = "pending", "en_route", "finished"


def idm_acceleration(v: float, v_des: float, a_max: float, b: float, s0: float, T: float,
                     gap: float | None = None, dv: float = 0.0, delta: float = 4.0,
                     max_decel: float = 9.0) -> float:
    """IDM acceleration; ``gap`` None means a free road ahead.

    Above the desired speed the free-road term is bounded below by
    ``-b / a_max`` so an advisory slowdown brakes comfortably rather than
    abruptly.
    """
    if v_des <= 1e-9:
        free = -b / a_max if v > 0 else 0.0
    else:
        free = 1.0 - (v / v_des) ** delta
        if v > v_des:
            free = max(free, -b / a_max)
    acc = a_max * free
    if gap is not None:
        s_star = s0 + max(0.0, v * T + v * dv / (2.0 * math.sqrt(a_max * b)))
        acc -= a_max * (s_star / max(gap, 1e-3)) ** 2
    return max(acc, -max_decel)


class Vehicle:
    __slots__ = ("id", "route", "cursor", "x", "v", "a", "params", "depart", "finish",
                 "advice", "status", "ff_suffix", "planned_depart")

    def __init__(self, vid, route, params, planned_depart):
        self.id = vid
        self.route = route
        self.cursor = 0
        self.x = 0.0
        self.v = 0.0
        self.a = 0.0
        self.params = params
        self.depart = None
        self.finish = None
        self.advice = None
        self.status = PENDING
        self.planned_depart = planned_depart
        self.ff_suffix = None

    @property
    def road(self) -> str:
        return self.route[self.cursor]

    @property
    def on_last_road(self) -> bool:
        return self.cursor == len(self.route) - 1


@dataclass
class SignalState:
    junction_id: str
    active_phase: int = 0
    elapsed_in_phase: float = 0.0


class Simulation:
    def __init__(self, net: RoadNetwork, trips, config: SimConfig | None = None,
                 controller: Controller | None = None, params: EngineParams | None = None):
        self.net = net
        self.config = config or SimConfig()
        self.params = params or EngineParams()
        self.controller = controller
        persons = trips.cars if hasattr(trips, "cars") else [p for p in trips if p.mode == "car"]
        persons = [p for p in persons if p.route]
        order = sorted(persons, key=lambda p: (p.departure_step or 0, p.id))
        self.vehicles = {p.id: Vehicle(p.id, tuple(p.route), p.driving, p.departure_step or 0)
                         for p in order}
        self.pending = [self.vehicles[p.id] for p in order]
        self.roads = {r.id: r for r in net.roads}
        self.on_road: dict[str, list[Vehicle]] = {r.id: [] for r in net.roads}
        self.signals = {j.id: SignalState(j.id) for j in net.junctions if j.signal_plan is not None}
        self._movement_junction = {m.key: j.id for j in net.junctions for m in j.movements}
        self._disch = {}
        for j in net.junctions:
            for m in j.movements:
                rate = self.params.saturation_flow * net.road(m.in_road).lanes * self.config.dt
                self._disch[m.key] = (rate, max(1.0, rate))
        self.budget = {k: 0.0 for k in self._disch}
        self.step_no = self.config.start_step
        self.finished_count = 0
        self.trace = SimTrace(junction_ids=tuple(sorted(j.id for j in net.junctions)),
                              total_trips=len(self.vehicles), dt=self.config.dt,
                              end_step=self.config.start_step,
                              vehicle_states=[] if self.params.record_vehicle_states else None)
        # (step, junction, movement, active phase or -1 when unsignalized)
        self.crossings: list[tuple[int, str, Movement, int]] = []
        self.incidents: list[str] = []
        self._lane_km = net.total_lane_km()
        self._qcache_step = None
        self._served_cache: dict[str, frozenset] = {}
        if controller is not None:
            controller.reset(net)

    # -- status ----------------------------------------------------------
    @property
    def en_route(self) -> list[Vehicle]:
        return [v for vs in self.on_road.values() for v in vs]

    def counts(self) -> dict[str, int]:
        c = {PENDING: 0, EN_ROUTE: 0, FINISHED: 0}
        for v in self.vehicles.values():
            c[v.status] += 1
        return c

    @property
    def _controls_signals(self) -> bool:
        return self.controller is not None and self.controller.controls_signals

    def _interval(self) -> int:
        if self.controller is not None and self.controller.interval:
            return self.controller.interval
        return self.config.llm_control_interval

    def served_movements(self, junction_id: str) -> frozenset | None:
        """Movements the junction lets through right now; None means all (unsignalized)."""
        sig = self.signals.get(junction_id)
        if sig is None:
            return None
        plan = self.net.junction(junction_id).signal_plan
        return plan.phases[sig.active_phase].served

    def _is_served(self, in_road: str, out_road: str) -> bool:
        jid = self._movement_junction.get((in_road, out_road))
        if jid is None:
            return False
        served = self._served_cache.get(jid, False)
        if served is False:
            served = self._served_cache[jid] = self.served_movements(jid)
        if served is None:
            return True
        m = self.net.movement(in_road, out_road)
        return m in served

    # -- queues ----------------------------------------------------------
    def _queues(self):
        """Per-step cache: stopped vehicles near the stop line.

        Returns ``(movement_q, road_q)``: counts keyed by (in, out) road
        pair and the total per road regardless of intended movement.
        """
        if self._qcache_step == self.step_no:
            return self._qcache
        p = self.params
        movement_q: dict[tuple[str, str], int] = {}
        road_q: dict[str, int] = {}
        for rid, vs in self.on_road.items():
            road = self.roads[rid]
            if road.to_junction is None or not vs:
                continue
            limit = road.length - p.queue_distance
            n = 0
            for veh in vs:
                if veh.x < limit:
                    break
                if veh.v < p.queue_speed:
                    n += 1
                    if not veh.on_last_road:
                        key = (rid, veh.route[veh.cursor + 1])
                        movement_q[key] = movement_q.get(key, 0) + 1
            if n:
                road_q[rid] = n
        self._qcache = (movement_q, road_q)
        self._qcache_step = self.step_no
        return self._qcache

    def junction_queue(self, junction_id: str) -> int:
        movement_q, _ = self._queues()
        return sum(movement_q.get(m.key, 0) for m in self.net.junction(junction_id).movements)

    # -- observation -----------------------------------------------------
    def observe_junction(self, junction_id: str) -> JunctionObservation:
        if junction_id not in self.net.junction_index:
            raise UnknownJunction(junction_id)
        p = self.params
        j = self.net.junction(junction_id)
        movement_q, road_q = self._queues()
        qpm = {m: movement_q.get(m.key, 0) for m in j.movements}
        down = {}
        for m in j.movements:
            out = self.roads[m.out_road]
            down[m] = road_q.get(m.out_road, 0) if out.to_junction is not None else 0
        approaching = []
        for r in self.net.in_roads(junction_id):
            for veh in self.on_road[r.id]:
                d = r.length - veh.x
                if d > p.approach_horizon:
                    break
                if not veh.on_last_road:
                    m = self.net.movement(r.id, veh.route[veh.cursor + 1])
                    approaching.append((veh.id, d, veh.v, m))
        obs = JunctionObservation(junction_id, step=self.step_no, queue_per_movement=qpm,
                                  downstream_queue=down, total_queue=sum(qpm.values()))
        obs.neighbor_total_queue = sum(self.junction_queue(n) for n in j.neighbors)
        obs.approaching = approaching
        n_en_route = sum(len(vs) for vs in self.on_road.values())
        obs.regional_density = n_en_route / self._lane_km if self._lane_km > 0 else 0.0
        sig = self.signals.get(junction_id)
        if sig is not None:
            plan = j.signal_plan
            obs.active_phase = sig.active_phase
            obs.elapsed_in_phase = sig.elapsed_in_phase
            obs.phase_movements = [ph.served for ph in plan.phases]
            obs.green_phases = plan.green_indices
            obs.pressure_per_phase = all_phase_pressures(obs)
            obs.time_to_change = max(0.0, plan.phases[sig.active_phase].duration
                                     - sig.elapsed_in_phase)
        return obs

    def _time_to_green(self, junction_id: str, m: Movement) -> float:
        """Nominal wait until ``m`` is served, assuming the plan keeps rotating."""
        sig = self.signals[junction_id]
        plan = self.net.junction(junction_id).signal_plan
        phases = plan.phases
        cur = phases[sig.active_phase]
        if m in cur.served:
            return 0.0
        wait = max(0.0, cur.duration - sig.elapsed_in_phase)
        n = len(phases)
        for k in range(1, n):
            ph = phases[(sig.active_phase + k) % n]
            if m in ph.served:
                return wait
            wait += ph.duration
        return math.inf

    def observe_vehicles(self) -> list[VehicleObservation]:
        """One observation per en-route car approaching a signalized junction."""
        out = []
        for rid, vs in self.on_road.items():
            road = self.roads[rid]
            jid = road.to_junction
            if jid not in self.signals:
                continue
            sig = self.signals[jid]
            plan = self.net.junction(jid).signal_plan
            ttc = max(0.0, plan.phases[sig.active_phase].duration - sig.elapsed_in_phase)
            for i, veh in enumerate(vs):
                if veh.on_last_road:
                    continue
                m = self.net.movement(rid, veh.route[veh.cursor + 1])
                green = m in plan.phases[sig.active_phase].served
                gap = None if i == 0 else vs[i - 1].x - veh.x - self.params.vehicle_length
                out.append(VehicleObservation(
                    veh.id, rid, veh.v, road.speed_limit, road.length - veh.x, green, ttc,
                    0.0 if green else self._time_to_green(jid, m), gap))
        out.sort(key=lambda o: o.vehicle_id)
        return out

    # -- step phases -----------------------------------------------------
    def _inject(self) -> None:
        t = self.step_no
        used = set()
        keep = []
        p = self.params
        for i, veh in enumerate(self.pending):
            if veh.planned_depart > t:
                keep.extend(self.pending[i:])
                break
            rid = veh.route[0]
            vs = self.on_road[rid]
            road = self.roads[rid]
            v_des = road.speed_limit * veh.params.desired_speed_factor
            if rid in used:
                keep.append(veh)
                continue
            if vs:
                back = vs[-1]
                gap = back.x - p.vehicle_length
                if gap < veh.params.min_gap:
                    keep.append(veh)
                    continue
                speed = min(v_des, back.v, max(0.0, (gap - veh.params.min_gap) / veh.params.headway))
            else:
                speed = v_des
            used.add(rid)
            veh.status = EN_ROUTE
            veh.depart = t
            veh.x = 0.0
            veh.v = speed
            suffix = [0.0] * (len(veh.route) + 1)
            for k in range(len(veh.route) - 1, -1, -1):
                suffix[k] = suffix[k + 1] + self.roads[veh.route[k]].free_flow_time
            veh.ff_suffix = suffix
            vs.append(veh)
            self.trace.vehicles[veh.id] = VehicleRecord(
                veh.id, t, None, path_cost(self.net, veh.route), route_length(self.net, veh.route))
        self.pending = keep

    def _snapshot(self) -> StepRecord:
        t = self.step_no
        dt = self.config.dt
        eta = 0.0
        for rid, vs in self.on_road.items():
            road = self.roads[rid]
            for veh in vs:
                remaining = (road.length - veh.x) / road.speed_limit + veh.ff_suffix[veh.cursor + 1]
                eta += (t - veh.depart) * dt + remaining
        jq = tuple(self.junction_queue(j) for j in self.trace.junction_ids)
        departed = len(self.trace.vehicles)
        rec = StepRecord(t, departed, self.finished_count, departed - self.finished_count,
                         sum(jq), jq, 0.0, eta, 0.0, 0.0)
        self.trace.steps.append(rec)
        return rec

    def _decide(self) -> None:
        ctl = self.controller
        if ctl is None or (self.step_no - self.config.start_step) % self._interval() != 0:
            return
        jobs = [self.observe_junction(j) for j in sorted(self.signals)]
        vobs = self.observe_vehicles() if ctl.observes_vehicles else []
        try:
            actions = ctl.decide(jobs, vobs, self.step_no)
        except Exception as exc:
            raise ControllerFailure(f"controller failed at step {self.step_no}: {exc}",
                                    self.trace) from exc
        self.apply_actions(actions or [])
        self.incidents.extend(getattr(ctl, "drain_incidents", lambda: [])())

    def apply_actions(self, actions) -> None:
        for act in actions:
            if isinstance(act, SignalAction):
                if act.kind != SET_PHASE:
                    continue
                sig = self.signals.get(act.junction_id)
                if sig is None:
                    raise ControllerFailure(f"no signal at junction {act.junction_id}", self.trace)
                n = len(self.net.junction(act.junction_id).signal_plan.phases)
                if act.phase is None or not 0 <= act.phase < n:
                    raise ControllerFailure(
                        f"phase {act.phase} invalid for junction {act.junction_id}", self.trace)
                if act.phase != sig.active_phase:
                    sig.active_phase = act.phase
                    sig.elapsed_in_phase = 0.0
            elif isinstance(act, VehicleAction):
                veh = self.vehicles.get(act.vehicle_id)
                if veh is not None and veh.status == EN_ROUTE:
                    veh.advice = min(act.advised_speed, self.roads[veh.road].speed_limit)
            else:
                raise ControllerFailure(f"unrecognized action {act!r}", self.trace)
        self._served_cache.clear()

    def _update_budgets(self) -> None:
        for j in self.net.junctions:
            served = self.served_movements(j.id)
            for m in j.movements:
                rate, cap = self._disch[m.key]
                if served is None or m in served:
                    self.budget[m.key] = min(cap, self.budget[m.key] + rate)
                else:
                    self.budget[m.key] = 0.0

    def _may_enter(self, out_road: str, veh: Vehicle) -> bool:
        vs = self.on_road[out_road]
        return not vs or vs[-1].x - self.params.vehicle_length >= veh.params.min_gap

    def _can_cross(self, rid: str, veh: Vehicle) -> bool:
        nxt = veh.route[veh.cursor + 1]
        return (self._is_served(rid, nxt) and self.budget[(rid, nxt)] >= 1.0 - 1e-9
                and self._may_enter(nxt, veh))

    def _expects_to_cross(self, rid: str, veh: Vehicle) -> bool:
        """Whether the front vehicle should drive through rather than stop.

        The budget requirement is anticipatory: it is enough that the
        budget will hold a full vehicle by the time the vehicle reaches the
        stop line at its current speed, so a discharging platoon does not
        brake for the line between slots.
        """
        nxt = veh.route[veh.cursor + 1]
        if not (self._is_served(rid, nxt) and self._may_enter(nxt, veh)):
            return False
        rate, _ = self._disch[(rid, nxt)]
        eta = (self.roads[rid].length - veh.x) / max(veh.v, 0.1)
        return self.budget[(rid, nxt)] + rate * eta / self.config.dt >= 1.0 - 1e-9

    def _move(self, rec: StepRecord) -> None:
        p = self.params
        dt = self.config.dt
        vlen = p.vehicle_length
        new_state: dict[str, list[tuple[float, float, float]]] = {}
        # motion from the state at the start of the step
        for rid, vs in self.on_road.items():
            if not vs:
                continue
            road = self.roads[rid]
            L = road.length
            states = []
            for i, veh in enumerate(vs):
                dp = veh.params
                v_cap = road.speed_limit * dp.desired_speed_factor
                v_des = v_cap if veh.advice is None else min(v_cap, veh.advice)
                if i > 0:
                    lead = vs[i - 1]
                    gap, dv = lead.x - veh.x - vlen, veh.v - lead.v
                elif veh.on_last_road:
                    gap, dv = None, 0.0
                elif self._expects_to_cross(rid, veh):
                    back = self.on_road[veh.route[veh.cursor + 1]]
                    if back:
                        gap, dv = (L - veh.x) + back[-1].x - vlen, veh.v - back[-1].v
                    else:
                        gap, dv = None, 0.0
                else:
                    gap, dv = (L - veh.x) + dp.min_gap, veh.v
                a = idm_acceleration(veh.v, v_des, dp.max_accel, dp.comfort_decel, dp.min_gap,
                                     dp.headway, gap, dv, p.delta, p.max_decel)
                v_new = veh.v + a * dt
                if v_new < 0.0:
                    x_new = veh.x - veh.v * veh.v / (2.0 * a)
                    v_new = 0.0
                else:
                    x_new = veh.x + 0.5 * (veh.v + v_new) * dt
                v_new = min(v_new, v_cap)
                if i > 0:
                    x_new = min(x_new, states[i - 1][0] - vlen)
                x_new = max(x_new, veh.x)
                states.append((x_new, v_new, a))
            new_state[rid] = states
        for rid, states in new_state.items():
            for veh, (x, v, a) in zip(self.on_road[rid], states):
                veh.x, veh.v, veh.a = x, v, a
        self._emissions(rec)
        self._cross()

    def _emissions(self, rec: StepRecord) -> None:
        dt = self.config.dt
        coeffs = self.params.carbon
        carbon = speed_sum = accel_sum = 0.0
        states = [] if self.trace.vehicle_states is not None else None
        for vs in self.on_road.values():
            for veh in vs:
                carbon += carbon_rate(veh.v, veh.a, coeffs) * dt
                speed_sum += veh.v
                accel_sum += veh.a
                if states is not None:
                    states.append((veh.id, veh.v, veh.a))
        rec.carbon, rec.speed_sum, rec.accel_sum = carbon, speed_sum, accel_sum
        if states is not None:
            states.sort()
            self.trace.vehicle_states.append(states)

    def _cross(self) -> None:
        t = self.step_no
        arrivals: list[tuple[str, Vehicle, float]] = []
        for rid, vs in self.on_road.items():
            if not vs:
                continue
            L = self.roads[rid].length
            while vs and vs[0].x >= L - 1e-9:
                veh = vs[0]
                if veh.on_last_road:
                    vs.pop(0)
                    veh.x = L
                    veh.status = FINISHED
                    veh.finish = t + 1
                    self.trace.vehicles[veh.id].finish_step = t + 1
                    self.finished_count += 1
                    continue
                if not self._can_cross(rid, veh):
                    veh.x = L
                    veh.v = 0.0
                    break
                nxt = veh.route[veh.cursor + 1]
                self.budget[(rid, nxt)] -= 1.0
                jid = self._movement_junction[(rid, nxt)]
                sig = self.signals.get(jid)
                self.crossings.append((t, jid, self.net.movement(rid, nxt),
                                       -1 if sig is None else sig.active_phase))
                vs.pop(0)
                arrivals.append((nxt, veh, veh.x - L))
        for nxt, veh, overshoot in arrivals:
            vs = self.on_road[nxt]
            road = self.roads[nxt]
            x = overshoot
            if vs:
                x = min(x, vs[-1].x - self.params.vehicle_length)
            veh.x = min(max(0.0, x), road.length)
            veh.cursor += 1
            veh.advice = None
            veh.v = min(veh.v, road.speed_limit * veh.params.desired_speed_factor)
            vs.append(veh)

    def _advance_signals(self) -> None:
        dt = self.config.dt
        rotate = not self._controls_signals
        for jid, sig in self.signals.items():
            sig.elapsed_in_phase += dt
            if rotate:
                phases = self.net.junction(jid).signal_plan.phases
                if sig.elapsed_in_phase >= phases[sig.active_phase].duration - 1e-9:
                    sig.active_phase = (sig.active_phase + 1) % len(phases)
                    sig.elapsed_in_phase = 0.0
        self._served_cache.clear()

    # -- driver ----------------------------------------------------------
    def step(self) -> StepRecord:
        self._served_cache.clear()
        self._inject()
        rec = self._snapshot()
        self._decide()
        self._update_budgets()
        self._move(rec)
        self._advance_signals()
        self.step_no += 1
        self.trace.end_step = self.step_no
        return rec

    def run(self) -> SimTrace:
        for _ in range(self.config.duration_step):
            self.step()
        return self.trace


def run(net: RoadNetwork, trips, config: SimConfig | None = None,
        controller: Controller | None = None, params: EngineParams | None = None):
    """Run a full simulation; returns ``(trace, metrics report)``."""
    from tsa.metrics import compute_metrics

    trace = Simulation(net, trips, config, controller, params).run()
    return trace, compute_metrics(trace)
