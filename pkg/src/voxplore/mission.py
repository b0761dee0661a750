"""Mission state machine: sense, map, plan, execute, reposition, recover, and home."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import deque
from enum import Enum
from pathlib import Path

import numpy as np

from .artifacts import (RANGE_ONLY, ArtifactTracker, NoSurfaceHit, bbox_to_point,
                        score_report, simulate_detection)
from .config import MissionConfig
from .global_planner import (GlobalGraph, UnreachableFrontier, cluster_and_select_principal,
                             dedup_against_global, extract_frontiers, homing_path,
                             merge_into_global, reevaluate_frontiers, select_frontier)
from .graph import PathKind, PlannedPath
from .local_planner import DegenerateRoot, assign_headings, plan_local
from .metrics import compute_metrics
from .refine import refine
from .sensor import simulate_scan
from .voxel_map import Box, MapSnapshot, RobotConfig, VoxelMap, VoxelState
from .world import (LocalizationNoise, PathFollower, World, step_robot,
                    traversability_lookahead)

HOME_TOLERANCE = 0.5
GEOFENCE_EDGE = 1.0
MIN_DIRECTION_DISPLACEMENT = 0.5
STALL_LIMIT = 5


class Mode(str, Enum):
    EXPLORE = "explore"
    EXECUTE = "execute"
    REPOSITION = "reposition"
    BLOCKED = "blocked"
    HOME = "home"
    TERMINATED = "terminated"


LEGAL = {
    Mode.EXPLORE: {Mode.EXECUTE, Mode.REPOSITION, Mode.HOME},
    Mode.EXECUTE: {Mode.EXPLORE, Mode.BLOCKED, Mode.HOME},
    Mode.BLOCKED: {Mode.EXPLORE},
    Mode.REPOSITION: {Mode.EXPLORE},
    Mode.HOME: {Mode.TERMINATED},
    Mode.TERMINATED: set(),
}


class AbortedMission(RuntimeError):
    """The robot could not make progress; the log up to this point is kept."""


METRIC_COLUMNS = ["t", "x", "y", "z", "heading", "rx", "ry", "rz", "mode",
                  "known_voxels", "distance"]


def _num(v: float) -> str:
    return f"{v:.6f}"


class MissionLog:
    """In-memory log, appended to files in chunks of simulated time.

    Events carry a running ``seq`` so that several events at the same tick keep
    a total order.
    """

    def __init__(self, out_dir: str | Path | None = None, chunk_seconds: float = 300.0):
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.chunk_seconds = chunk_seconds
        self.ticks: list[dict] = []
        self.events: list[dict] = []
        self.reports: list[dict] = []
        self.paths: list[dict] = []
        self.plan_wall: list[float] = []
        self._written = {"ticks": 0, "events": 0, "reports": 0, "paths": 0}
        self._next_flush = chunk_seconds
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            with open(self.out_dir / "metrics.csv", "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(METRIC_COLUMNS)
            for name in ("events.jsonl", "reports.jsonl", "paths.jsonl"):
                (self.out_dir / name).write_text("")

    def tick(self, row: dict) -> None:
        if self.ticks and row["t"] <= self.ticks[-1]["t"]:
            raise ValueError("tick timestamps must increase strictly")
        self.ticks.append(row)
        if row["t"] >= self._next_flush:
            self.flush()
            self._next_flush += self.chunk_seconds

    def event(self, t: float, kind: str, **data) -> int:
        seq = len(self.events)
        self.events.append({"seq": seq, "t": round(t, 6), "event": kind, **data})
        return seq

    def path(self, t: float, seq: int, path: PlannedPath) -> None:
        self.paths.append({"t": round(t, 6), "event_seq": seq, **path.to_record()})

    def report(self, record: dict) -> None:
        self.reports.append(record)

    def flush(self) -> None:
        if self.out_dir is None:
            return
        w = self._written
        rows = self.ticks[w["ticks"]:]
        if rows:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            for r in rows:
                writer.writerow([_num(r["t"]), _num(r["x"]), _num(r["y"]), _num(r["z"]),
                                 _num(r["heading"]), _num(r["rx"]), _num(r["ry"]),
                                 _num(r["rz"]), r["mode"], r["known_voxels"],
                                 _num(r["distance"])])
            with open(self.out_dir / "metrics.csv", "a", newline="") as fh:
                fh.write(buf.getvalue())
            w["ticks"] = len(self.ticks)
        for key, name, items in (("events", "events.jsonl", self.events),
                                 ("reports", "reports.jsonl", self.reports),
                                 ("paths", "paths.jsonl", self.paths)):
            new = items[w[key]:]
            if new:
                with open(self.out_dir / name, "a") as fh:
                    for item in new:
                        fh.write(json.dumps(item, sort_keys=True) + "\n")
                w[key] = len(items)

    def events_of(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["event"] == kind]


class Mission:
    """One simulated mission; call :meth:`run` once."""

    def __init__(self, world: World, config: MissionConfig, seed: int | None = None,
                 out_dir: str | Path | None = None, ticks_max: int | None = None):
        self.world = world
        self.cfg = config
        self.seed = config.seed if seed is None else int(seed)
        streams = np.random.SeedSequence(self.seed).spawn(4)
        self.rng_plan, self.rng_sense, self.rng_detect, self.rng_loc = (
            np.random.default_rng(s) for s in streams)

        self.model = config.robot_model()
        self.half = tuple(float(v) for v in config.robot.half_extents)
        self.vmap = VoxelMap.covering(world.bounds, config.resolution)
        self.map_frustum = config.mapping_sensor.frustum()
        self.gain_frustum = config.gain_sensor.frustum()
        self.cameras = [c.camera() for c in config.cameras]
        self.free_rows = world.free_rows
        self.local_params = config.local_params()
        self.tracker = ArtifactTracker(config.artifact_params())
        self.detector = config.detector_params()
        self.noise = LocalizationNoise(config.robot.localization_sigma, self.rng_loc)
        self.log = MissionLog(out_dir, config.log.chunk_seconds)
        self.out_dir = Path(out_dir) if out_dir is not None else None

        s = world.start
        self.pose = RobotConfig(s.x, s.y, s.z, s.heading, self.half)
        home = RobotConfig(*world.home, s.heading, self.half)
        self.gg = GlobalGraph(home)
        self.cur_vertex = self.gg.home
        if np.linalg.norm(self.pose.position - home.position) > 1e-9:
            self.cur_vertex = self.gg.add_chain(self.gg.home, [self.pose])[-1]

        self.dt = config.dt
        self.T = config.time_limit
        self.tick_count = 0
        self.t = 0.0
        self.distance = 0.0
        self.mode = Mode.EXPLORE
        self.ticks_max = (int(2 * self.T / self.dt) + 1000) if ticks_max is None else int(ticks_max)
        self.status = "running"

        self.follower: PathFollower | None = None
        self.exec_ids: list[int] = []
        self.exec_target_frontier: int | None = None
        self.pending_global: PlannedPath | None = None
        self._pending_target: int | None = None
        self.global_complete = False
        self.reverse_left = 0.0
        self.blocked_point: np.ndarray | None = None
        self.replan_after_fence = False
        self.degenerate_count = 0
        self.stall = 0
        self.last_known = 0
        self.history: deque = deque(maxlen=config.planner.direction_history + 1)
        self.violations = 0
        self.truth_violations = 0
        self.strip_entries = 0
        self.consumed: set[str] = set()
        self._confirm_seq: dict[int, int] = {}

    # ------------------------------------------------------------------ helpers

    def _set_mode(self, new: Mode, reason: str) -> None:
        if new not in LEGAL[self.mode]:
            raise RuntimeError(f"illegal mode transition {self.mode.value} -> {new.value}")
        self.log.event(self.t, "mode", previous=self.mode.value, mode=new.value, reason=reason)
        self.mode = new

    def _budget(self):
        remaining = self.T - self.t - self.cfg.planner.safety_margin
        return self.cfg.budget(remaining)

    def _home_time_from_vertex(self, vid: int) -> float:
        d = self.gg.home_distances().get(vid, math.inf)
        return d / self.model.v_ref

    def _home_time_now(self) -> float:
        """Travel time home from the robot's current position along the global graph."""
        if self.follower is None or not self.exec_ids:
            return self._home_time_from_vertex(self.cur_vertex)
        f = self.follower
        i = f.segment_index()
        ids = self.exec_ids
        back = f.s - f.stations[i]
        fwd = f.stations[min(i + 1, len(ids) - 1)] - f.s
        home = self.gg.home_distances()
        best = math.inf
        for vid, arc in ((ids[i], back), (ids[min(i + 1, len(ids) - 1)], fwd)):
            if vid in home:
                best = min(best, arc + home[vid])
        return best / self.model.v_ref

    def _budget_triggered(self) -> bool:
        return self.T - self.t - self._home_time_now() <= self.cfg.planner.safety_margin

    def _pose_vertex(self) -> int:
        """Vertex at the robot's pose, linked to the chain vertices around it."""
        f = self.follower
        ids = self.exec_ids
        if f is None or not ids:
            return self.cur_vertex
        i = f.segment_index()
        j = min(i + 1, len(ids) - 1)
        for vid in (ids[i], ids[j]):
            if np.linalg.norm(self.gg.position(vid) - self.pose.position) < 1e-9:
                return vid
        vid = self.gg.graph.add_vertex(self.pose)
        self.gg.graph.add_edge(vid, ids[i])
        if j != i:
            self.gg.graph.add_edge(vid, ids[j])
        self.gg.invalidate()
        return vid

    def _log_path(self, kind: str, path: PlannedPath, **extra) -> int:
        seq = self.log.event(self.t, kind, path_kind=path.kind.value, length=round(path.length, 6),
                             gain=float(path.gain), target=path.configs[-1].position.round(6).tolist(),
                             **extra)
        self.log.path(self.t, seq, path)
        return seq

    def _start_path(self, path: PlannedPath, ids: list[int], mode: Mode, reason: str,
                    target_frontier: int | None = None) -> None:
        self.follower = PathFollower(path)
        self.exec_ids = list(ids)
        self.exec_target_frontier = target_frontier
        self._set_mode(mode, reason)

    # ------------------------------------------------------------------ sensing

    def _sense(self) -> None:
        scan = simulate_scan(self.pose, self.map_frustum, self.free_rows,
                             self.cfg.mapping_sensor.noise_sigma, self.rng_sense)
        self.vmap.integrate_scan(scan.origin, scan.directions, scan.ranges, scan.hits,
                                 scan.max_range)

    def _detect(self) -> None:
        if not self.world.artifacts:
            return
        live = MapSnapshot.live(self.vmap)
        dets = simulate_detection(self.t, self.pose, self.cameras, self.world.artifacts, live,
                                  self.detector, self.rng_detect)
        reported = self.noise.report(self.pose)
        for det in dets:
            if det.cls in RANGE_ONLY:
                point = reported.position
            else:
                try:
                    point = bbox_to_point(det, live, self.tracker.params.grid,
                                          self.cfg.artifacts.max_range)
                except NoSurfaceHit:
                    continue
                point = point + self.noise.offset
            before = len(self.tracker.hypotheses)
            rep = self.tracker.process(point, det.cls, self.t, det)
            if len(self.tracker.hypotheses) > before:
                self.log.event(self.t, "artifact_hypothesis", hypothesis_id=before,
                               cls=det.cls.value)
            if rep is None:
                continue
            c_seq = self.log.event(self.t, "artifact_confirmed", hypothesis_id=rep.hypothesis_id,
                                   cls=rep.cls.value,
                                   position=[round(v, 6) for v in rep.position])
            r_seq = self.log.event(self.t, "artifact_reported", confirmation_seq=c_seq,
                                   hypothesis_id=rep.hypothesis_id, cls=rep.cls.value)
            score_report(rep, self.world.artifacts, self.consumed)
            self.log.event(self.t, "artifact_scored", report_seq=r_seq, scored=bool(rep.scored),
                           error=None if rep.error is None else round(rep.error, 6))
            self.log.report({**rep.to_record(), "confirmation_seq": c_seq, "report_seq": r_seq})

    def _record_tick(self) -> None:
        p = self.pose
        r = self.noise.report(p).position
        if not self.world.is_free(p.position):
            self.truth_violations += 1
        if self.model.cls == "legged" and self.world.in_non_traversable(p.position):
            self.strip_entries += 1
        self.log.tick({"t": self.t, "x": p.x, "y": p.y, "z": p.z, "heading": p.heading,
                       "rx": float(r[0]), "ry": float(r[1]), "rz": float(r[2]),
                       "mode": self.mode.value,
                       "known_voxels": int(np.count_nonzero(self.vmap.state != VoxelState.UNKNOWN)),
                       "distance": self.distance})

    def _advance_clock(self) -> None:
        self.tick_count += 1
        self.t = round(self.tick_count * self.dt, 9)
        self.noise.step(self.dt)

    def _after_move(self) -> None:
        self._sense()
        if self.tick_count % self.cfg.artifacts.detect_every == 0:
            self._detect()
        self._record_tick()

    # ------------------------------------------------------------------ modes

    def _explore(self) -> None:
        if self.pending_global is not None:
            path, target = self.pending_global, self._pending_target
            self.pending_global = None
            self._start_path(path, path.vertex_ids, Mode.EXECUTE, "reposition",
                             target_frontier=target)
            return
        if self.global_complete:
            self._start_homing("global_completion")
            return
        if self.T - self.t - self._home_time_from_vertex(self.cur_vertex) <= self.cfg.planner.safety_margin:
            self._start_homing("budget")
            return

        wall0 = time.perf_counter()
        snap = self.vmap.snapshot()
        p = self.cfg.planner
        dropped = reevaluate_frontiers(self.gg, snap, self.gain_frustum, p.gain_threshold, self.t)
        for vid in dropped:
            self.log.event(self.t, "frontier_dropped", vertex=vid)

        self.history.append(self.pose.position.copy())
        direction = np.zeros(3)
        if len(self.history) > 1:
            disp = self.history[-1] - self.history[0]
            n = float(np.linalg.norm(disp))
            if n >= MIN_DIRECTION_DISPLACEMENT:
                direction = disp / n
        try:
            res = plan_local(snap, self.pose, self.gain_frustum, self.cfg.gain_params(direction),
                             self.local_params, self.rng_plan, self.model.v_ref,
                             self.model.yaw_rate_max, self.model.cls)
        except DegenerateRoot as e:
            self.log.plan_wall.append(time.perf_counter() - wall0)
            self._recover(str(e))
            return
        self.degenerate_count = 0

        cands = extract_frontiers(res.graph, res.paths, p.gain_threshold)
        cands = dedup_against_global(cands, self.gg, p.frontier_radius)
        cands = _drop_prefixes(cands)
        principals = cluster_and_select_principal([c for _, c in cands], p.dtw_threshold)
        gains = {vid: res.graph.vertices[vid].gain for vid, _ in cands}
        new_f = merge_into_global(self.gg, self.cur_vertex, principals, gains, snap,
                                  p.edge_radius, p.frontier_radius, self.half, self.t)
        for vid in new_f:
            self.log.event(self.t, "frontier_added", vertex=vid,
                           position=self.gg.position(vid).round(6).tolist(),
                           gain=self.gg.frontiers[vid].gain)

        known = self.vmap.count(VoxelState.FREE) + self.vmap.count(VoxelState.OCCUPIED)
        self.stall = self.stall + 1 if known <= self.last_known else 0
        self.last_known = known

        best = res.path
        if best is not None and (best.length < 1e-9 or self.stall >= STALL_LIMIT):
            best = None
        if best is None:
            self.log.plan_wall.append(time.perf_counter() - wall0)
            self.stall = 0
            self.log.event(self.t, "local_completion", vertex=self.cur_vertex,
                           frontiers=len(self.gg.frontiers))
            self._set_mode(Mode.REPOSITION, "local_completion")
            return

        path = refine(best, snap, self.cfg.refine_clearance(), p.refine_iterations,
                      planar=self.local_params.planar)
        path = assign_headings(path, self.model.v_ref, self.model.yaw_rate_max, self.model.cls)
        path.gain = best.gain
        if not snap.path_admissible(path.points, self.half):
            path = best
            if not snap.path_admissible(path.points, self.half):
                self.violations += 1
                self.log.event(self.t, "admissibility_violation", path_kind="local")
        chain = self.gg.add_chain(self.cur_vertex, path.configs[1:])
        self.gg.connect_nearby(sorted(set(chain[1:])), snap, p.edge_radius, self.half)
        self.log.plan_wall.append(time.perf_counter() - wall0)
        extra = {"replan_after_geofence": True} if self.replan_after_fence else {}
        self.replan_after_fence = False
        self._log_path("local_plan", path, **extra)
        self._start_path(path, chain, Mode.EXECUTE, "best_path")

    def _recover(self, why: str) -> None:
        self.degenerate_count += 1
        self.log.event(self.t, "degenerate_root", vertex=self.cur_vertex, detail=why,
                       attempt=self.degenerate_count)
        if self.degenerate_count > self.cfg.robot.recovery_attempts:
            raise AbortedMission(f"degenerate root after {self.degenerate_count - 1} recovery attempts")
        home = self.gg.home_distances()
        nbrs = sorted(self.gg.graph.adj[self.cur_vertex],
                      key=lambda v: (home.get(v, math.inf), v))
        if not nbrs:
            raise AbortedMission(f"degenerate root at isolated vertex {self.cur_vertex}")
        ids = [self.cur_vertex, nbrs[0]]
        path = self.gg.graph.make_path(ids, PathKind.GLOBAL)
        self._log_path("recovery", path)
        self._start_path(path, ids, Mode.EXECUTE, "recovery")

    def _reposition(self) -> None:
        snap = self.vmap.snapshot()
        while True:
            path = select_frontier(self.gg, self.cur_vertex, self._budget())
            if path is None:
                self.global_complete = True
                self.log.event(self.t, "global_completion", frontiers=len(self.gg.frontiers))
                break
            if self._check_graph_path(path, snap):
                target = path.vertex_ids[-1]
                path = assign_headings(path, self.model.v_ref, self.model.yaw_rate_max,
                                       self.model.cls)
                self.pending_global = path
                self._pending_target = target
                self._log_path("frontier_selected", path, vertex=target,
                               frontier_gain=self.gg.frontiers[target].gain)
                break
        self._set_mode(Mode.EXPLORE, "reposition")

    def _check_graph_path(self, path: PlannedPath, snap: MapSnapshot) -> bool:
        """Drop inadmissible edges of a global-graph path; True if it was clean."""
        pts = path.points
        if len(pts) < 2:
            return True
        ok = snap.segments_admissible(pts[:-1], pts[1:], self.half)
        if np.all(ok):
            return True
        ids = path.vertex_ids
        for k in np.flatnonzero(~ok):
            self.gg.graph.remove_edge(ids[k], ids[k + 1])
            self.log.event(self.t, "edge_removed", a=ids[k], b=ids[k + 1])
        self.gg.invalidate()
        return False

    def _start_homing(self, reason: str) -> None:
        vid = self._pose_vertex() if self.mode == Mode.EXECUTE else self.cur_vertex
        path = self._homing_from(vid)
        self.cur_vertex = vid
        self.log.event(self.t, "homing", reason=reason, vertex=vid)
        self._log_path("homing_path", path)
        self._start_path(path, path.vertex_ids, Mode.HOME, reason)

    def _homing_from(self, vid: int) -> PlannedPath:
        snap = self.vmap.snapshot()
        for _ in range(len(self.gg.graph) + 1):
            try:
                path = homing_path(self.gg, vid)
            except UnreachableFrontier as e:
                raise AbortedMission(f"no route home: {e}") from None
            if self._check_graph_path(path, snap):
                return assign_headings(path, self.model.v_ref, self.model.yaw_rate_max,
                                       self.model.cls)
        raise AbortedMission("no admissible route home")

    def _move_tick(self) -> bool:
        """One tick along the current path. Returns True when blocked instead."""
        f = self.follower
        if not f.done and traversability_lookahead(self.model, self.pose, f.direction(), self.world):
            return True
        self.pose, moved, _ = step_robot(self.model, self.pose, f, self.dt)
        self.distance += moved
        self._advance_clock()
        self._after_move()
        return False

    def _block(self) -> None:
        """Record the blocking cell and set up the reversal."""
        f = self.follower
        d = f.direction()
        cell = None
        for s in np.linspace(0.0, 0.30, 7):
            q = self.pose.position + d * s
            if self.world.in_non_traversable(q):
                cell = self.vmap.center_of(self.vmap.index_of(q))
                break
        self.blocked_point = cell if cell is not None else self.pose.position + d * 0.30
        self.reverse_left = min(self.model.reverse_distance, f.s)
        self.log.event(self.t, "blocked", position=self.pose.position.round(6).tolist(),
                       cell=np.round(self.blocked_point, 6).tolist())
        self.log.event(self.t, "reverse", distance=round(self.reverse_left, 6))

    def _reverse_tick(self) -> bool:
        """Back up along the current path; True when the reversal is finished."""
        f = self.follower
        if self.reverse_left <= 1e-12:
            return True
        ds = min(self.model.v_ref * self.dt, self.reverse_left)
        f.s = max(0.0, f.s - ds)
        self.reverse_left -= ds
        self.pose = self.pose.moved(f.position_at(f.s))
        self.distance += ds
        self._advance_clock()
        self._after_move()
        return self.reverse_left <= 1e-12

    def _fence_and_attach(self) -> None:
        c = self.blocked_point
        fence = Box.around(c, (GEOFENCE_EDGE / 2,) * 3)
        self.vmap.add_geofence(fence)
        self.log.event(self.t, "geofence", box=[round(v, 6) for v in fence.as_row()],
                       count=len(self.vmap.geofences))
        dropped = self.gg.prune_geofenced(list(self.vmap.geofences), self.half,
                                          self.vmap.resolution)
        if dropped:
            self.log.event(self.t, "vertices_pruned", count=len(dropped))
        f = self.follower
        i = f.segment_index()
        ids = self.exec_ids
        behind = ids[i] if ids[i] in self.gg.graph.vertices else self.gg.home
        if np.linalg.norm(self.gg.position(behind) - self.pose.position) < 1e-9:
            self.cur_vertex = behind
        else:
            vid = self.gg.graph.add_vertex(self.pose)
            self.gg.graph.add_edge(vid, behind)
            self.gg.invalidate()
            self.cur_vertex = vid
        self.exec_ids = []
        self.follower = None

    def _execute_tick(self) -> None:
        if self._move_tick():
            self._set_mode(Mode.BLOCKED, "blocked")
            self._block()
            return
        if self.follower.done:
            self._arrive()
            self._set_mode(Mode.EXPLORE, "path_complete")
            return
        if self._budget_triggered():
            self._start_homing("budget")

    def _arrive(self) -> None:
        self.cur_vertex = self.exec_ids[-1]
        tf = self.exec_target_frontier
        if tf is not None and tf in self.gg.frontiers:
            del self.gg.frontiers[tf]
            self.gg.graph.vertices[tf].frontier = False
            self.log.event(self.t, "frontier_visited", vertex=tf)
        self.follower = None
        self.exec_ids = []
        self.exec_target_frontier = None

    def _blocked_tick(self) -> None:
        if self._reverse_tick():
            self._fence_and_attach()
            self.replan_after_fence = True
            self._set_mode(Mode.EXPLORE, "reversed")

    def _home_tick(self) -> None:
        if self.follower.done:
            self._finish_home()
            return
        if self._move_tick():
            # no Blocked mode while homing: reverse, fence and re-route in place
            self._block()
            while not self._reverse_tick():
                pass
            self._fence_and_attach()
            path = self._homing_from(self.cur_vertex)
            self._log_path("homing_path", path, replan_after_geofence=True)
            self.follower = PathFollower(path)
            self.exec_ids = list(path.vertex_ids)
            return
        if self.follower.done:
            self._finish_home()

    def _finish_home(self) -> None:
        self.log.event(self.t, "home_reached",
                       position=self.pose.position.round(6).tolist())
        self.follower = None
        self._set_mode(Mode.TERMINATED, "home_reached")

    # ------------------------------------------------------------------ driver

    def run(self) -> MissionLog:
        self._sense()
        self._record_tick()
        self.log.event(self.t, "start", seed=self.seed, world=self.world.name)
        steps = {Mode.EXPLORE: self._explore, Mode.EXECUTE: self._execute_tick,
                 Mode.REPOSITION: self._reposition, Mode.BLOCKED: self._blocked_tick,
                 Mode.HOME: self._home_tick}
        non_advancing = 0
        try:
            while self.mode != Mode.TERMINATED:
                if self.tick_count >= self.ticks_max:
                    self.status = "truncated"
                    self.log.event(self.t, "tick_limit", ticks=self.tick_count)
                    break
                before = self.tick_count
                steps[self.mode]()
                non_advancing = non_advancing + 1 if self.tick_count == before else 0
                if non_advancing > 1000:
                    raise AbortedMission("planner made no progress for 1000 iterations")
            else:
                self.status = "completed"
        except AbortedMission as e:
            self.status = "aborted"
            self.log.event(self.t, "aborted", reason=str(e))
            self.log.flush()
            self.abort_reason = str(e)
            raise
        finally:
            self.log.flush()
        return self.log

    def summary(self) -> dict:
        out = compute_metrics(self.log, self.world, self.vmap)
        home_err = float(np.linalg.norm(self.pose.position - np.asarray(self.world.home)))
        out.update({
            "status": self.status,
            "seed": self.seed,
            "world": self.world.name,
            "t_end": self.t,
            "time_limit": self.T,
            "ticks": self.tick_count,
            "home_error": home_err,
            "return_home_success": bool(self.status == "completed"
                                        and home_err <= HOME_TOLERANCE
                                        and self.t <= self.T + self.dt),
            "admissibility_violations": self.violations,
            "free_space_violations": self.truth_violations,
            "non_traversable_entries": self.strip_entries,
            "geofences": len(self.vmap.geofences),
            "frontiers_left": len(self.gg.frontiers),
            "global_graph_vertices": len(self.gg),
        })
        return out

    def write_outputs(self, export_map: bool = False, export_graph: bool = False) -> dict:
        summary = self.summary()
        if self.out_dir is not None:
            self.log.flush()
            (self.out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
            if export_map:
                self.vmap.export_text(self.out_dir / "map.txt")
            if export_graph:
                (self.out_dir / "graph.json").write_text(json.dumps(self.gg.to_json(), indent=1) + "\n")
        return summary


_WARM = False


def warmup() -> None:
    """Compile (or load cached) kernels on a tiny map so planning timings exclude JIT."""
    global _WARM
    if _WARM:
        return
    from .dtw import pairwise_similarity, path_similarity
    from .sensor import SensorFrustum, volume_gains

    vmap = VoxelMap.covering(Box((0.0, 0.0, 0.0), (2.0, 2.0, 2.0)), 0.2)
    pose = RobotConfig(1.0, 1.0, 1.0, 0.0, (0.3, 0.3, 0.3))
    fr = SensorFrustum(1.0, 2 * math.pi, math.radians(30), math.radians(30))
    scan = simulate_scan(pose, fr, np.array([[0.2, 0.2, 0.2, 1.8, 1.8, 1.8]]))
    vmap.integrate_scan(scan.origin, scan.directions, scan.ranges, scan.hits, scan.max_range)
    snap = vmap.snapshot()
    volume_gains([pose], fr, snap)
    snap.boxes_admissible(pose.position[None], pose.half_extents)
    snap.segments_admissible(pose.position[None], pose.position[None] + 0.1, pose.half_extents)
    snap.line_of_sight(pose.position, pose.position + 0.3)
    snap.first_occupied(pose.position, scan.directions[:2], 1.0)
    live = MapSnapshot.live(vmap)
    live.first_occupied(pose.position, scan.directions[:2], 1.0)
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    path_similarity(pts, pts)
    pairwise_similarity([pts, pts])
    _WARM = True


def _drop_prefixes(cands: list[tuple[int, PlannedPath]]) -> list[tuple[int, PlannedPath]]:
    """Keep only frontier paths that are not a prefix of another candidate's path.

    A prefix is covered by its longer extension, which would be preferred as a
    principal path; dropping prefixes first saves most DTW comparisons.
    """
    interior = set()
    for _, p in cands:
        interior.update(p.vertex_ids[:-1])
    return [(vid, p) for vid, p in cands if vid not in interior]


def run_mission(world: World, config: MissionConfig, seed: int | None = None,
                out_dir: str | Path | None = None, ticks_max: int | None = None,
                export_map: bool = False, export_graph: bool = False) -> tuple[Mission, dict]:
    """Run a mission to completion and write its outputs (if ``out_dir`` is set).

    Raises AbortedMission after writing the partial log and summary.
    """
    warmup()
    m = Mission(world, config, seed, out_dir, ticks_max)
    try:
        m.run()
    except AbortedMission:
        m.write_outputs(export_map, export_graph)
        raise
    summary = m.write_outputs(export_map, export_graph)
    return m, summary
