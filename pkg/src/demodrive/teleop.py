"""WebSocket teleoperation bridge: a browser (or scripted) driver steers the
simulated vehicle live and records demonstration samples.

All simulation mutation happens on one fixed-rate tick loop; client handlers
only update the latest command (zero-order hold) and toggle recording, so
wall-clock jitter never changes simulated time. The protocol is JSON text
frames; see ``handle_message`` and ``tick`` for the message shapes.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
from dataclasses import dataclass

from . import demos as demos_mod
from . import track as track_mod
from .reward import RewardParams
from .sim import Action, DriveEnv, Pose, SimConfig

log = logging.getLogger(__name__)

DEFAULT_PORT = 8090
TICK_HZ = 20
GREEN_DOT_DIST = 0.15


def green_dot(pose: Pose, action: Action, dist=GREEN_DOT_DIST):
    """Target point ``dist`` meters ahead along the arc the current command
    would trace (straight line for near-zero turn rates)."""
    v, w = action.speed_cmd, action.steer_cmd
    if abs(w) < 1e-6 or v < 1e-9:
        return (pose.x + dist * math.cos(pose.heading),
                pose.y + dist * math.sin(pose.heading))
    radius = v / w
    phi = dist / abs(radius) * (1 if w > 0 else -1)
    # Arc center is perpendicular-left (w > 0) or -right of the heading.
    cx = pose.x - radius * math.sin(pose.heading)
    cy = pose.y + radius * math.cos(pose.heading)
    return (cx + radius * math.sin(pose.heading + phi),
            cy - radius * math.cos(pose.heading + phi))


@dataclass
class Reply:
    """An outgoing message: to one client or broadcast (client_id None)."""
    client_id: object
    message: dict


class TeleopSession:
    """Transport-independent session state machine.

    One driver slot, any number of viewers. ``handle_message`` mutates
    command/recording state and returns replies; ``tick`` advances the
    simulation by exactly one dt and returns the state frame to broadcast.
    """

    def __init__(self, trk: track_mod.TrackSpec, sim_config: SimConfig = SimConfig(),
                 reward_params: RewardParams = RewardParams(),
                 out_path="session.demos.jsonl"):
        self.track = trk
        self.sim_config = sim_config
        self.reward_params = reward_params
        self.out_path = out_path
        self.env = DriveEnv(trk, SimConfig(dt=sim_config.dt,
                                           max_episode_steps=2 ** 31 - 1,
                                           rng_seed=sim_config.rng_seed,
                                           vehicle_half_size=sim_config.vehicle_half_size),
                            reward_params)
        self._last_obs = self.env.reset()
        self._last_reward = 0.0
        self.t = 0.0
        self.driver_id = None
        self.viewers = set()
        self.latest_action = Action(0.0, 0.0)
        self.recording = False
        self.demo_set = None
        self.saved_count = 0

    # -- client lifecycle --------------------------------------------------

    def connect(self, client_id):
        self.viewers.add(client_id)

    def disconnect(self, client_id):
        self.viewers.discard(client_id)
        replies = []
        if client_id == self.driver_id:
            self.driver_id = None
            self.latest_action = Action(0.0, 0.0)
            if self.recording:
                replies += self._stop_recording()
        return replies

    # -- protocol ----------------------------------------------------------

    def handle_message(self, client_id, raw):
        """Process one client frame (text or dict); returns a list of Reply.

        Malformed messages produce an error reply and leave the connection
        and session state untouched.
        """
        if isinstance(raw, (str, bytes)):
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError:
                return [Reply(client_id, {"type": "error", "code": "bad_message"})]
        else:
            msg = raw
        if not isinstance(msg, dict):
            return [Reply(client_id, {"type": "error", "code": "bad_message"})]

        mtype = msg.get("type")
        if mtype == "hello":
            if msg.get("role") == "driver":
                if self.driver_id is None or self.driver_id == client_id:
                    self.driver_id = client_id
                    return [Reply(client_id, {"type": "role", "granted": True})]
                return [Reply(client_id, {"type": "role", "granted": False}),
                        Reply(client_id, {"type": "error", "code": "driver_taken"})]
            return [Reply(client_id, {"type": "role", "granted": False})]

        if mtype == "action":
            if client_id != self.driver_id:
                return [Reply(client_id, {"type": "error", "code": "not_driver"})]
            try:
                self.latest_action = Action(float(msg["speed"]),
                                            float(msg["steer"])).clamped()
            except (KeyError, TypeError, ValueError):
                return [Reply(client_id, {"type": "error", "code": "bad_message"})]
            return []

        if mtype == "record":
            if client_id != self.driver_id:
                return [Reply(client_id, {"type": "error", "code": "not_driver"})]
            if msg.get("on"):
                if not self.recording:  # idempotent: one session file
                    self.recording = True
                    self.demo_set = demos_mod.DemoSet(demos_mod.new_meta(
                        self.track, "human",
                        {"sim": self.sim_config.to_json_dict(),
                         "reward": self.reward_params.to_json_dict()}))
                return []
            return self._stop_recording()

        return [Reply(client_id, {"type": "error", "code": "unknown_message"})]

    def _stop_recording(self):
        if not self.recording:
            return []
        self.recording = False
        demo_set, self.demo_set = self.demo_set, None
        demos_mod.save(demo_set, self.out_path)
        self.saved_count = len(demo_set)
        return [Reply(None, {"type": "session_saved", "path": self.out_path,
                             "count": len(demo_set)})]

    # -- simulation --------------------------------------------------------

    def tick(self):
        """Advance one simulated dt with the held action; returns the state
        frame to broadcast. Recording stores the observation the driver saw
        when issuing this tick's action (the previous frame's)."""
        action = self.latest_action if self.driver_id is not None else Action(0.0, 0.0)
        obs_before = self._last_obs
        pose_before = self.env.pose
        result = self.env.step(action)
        if result.done:  # off-track is not fatal in teleop; the human recovers
            self.env.place_pose(self.env.pose, self.env.speed)
        if self.recording and self.driver_id is not None:
            self.demo_set.append(demos_mod.DemoSample(
                t=self.t, obs=obs_before.vector(), action=action,
                reward=result.reward, pose=pose_before))
        self.t += self.env.config.dt
        self._last_obs = result.obs
        self._last_reward = result.reward
        pose = self.env.pose
        return {
            "type": "state",
            "t": self.t,
            "pose": [pose.x, pose.y, pose.heading],
            "speed": self.env.speed,
            "rays": [float(r) for r in result.obs.rays],
            "reward": result.reward,
            "green_dot": list(green_dot(pose, action)),
            "recording": self.recording,
            "sample_count": len(self.demo_set) if self.recording else self.saved_count,
        }


async def serve(trk: track_mod.TrackSpec, sim_config: SimConfig = SimConfig(),
                reward_params: RewardParams = RewardParams(),
                port=DEFAULT_PORT, out_path="session.demos.jsonl",
                ready_event=None, shutdown_event=None):
    """Run the WebSocket server and the 20 Hz tick loop until cancelled (or
    ``shutdown_event`` is set)."""
    from websockets.asyncio.server import serve as ws_serve

    session = TeleopSession(trk, sim_config, reward_params, out_path)
    sockets = {}  # client_id -> websocket
    next_id = [0]

    async def dispatch(replies):
        for reply in replies:
            targets = (list(sockets.values()) if reply.client_id is None
                       else [sockets[reply.client_id]]
                       if reply.client_id in sockets else [])
            for ws in targets:
                try:
                    await ws.send(json.dumps(reply.message))
                except Exception:
                    pass

    async def handler(ws):
        client_id = next_id[0]
        next_id[0] += 1
        sockets[client_id] = ws
        session.connect(client_id)
        try:
            async for raw in ws:
                await dispatch(session.handle_message(client_id, raw))
        finally:
            sockets.pop(client_id, None)
            await dispatch(session.disconnect(client_id))

    async def tick_loop():
        dt = session.env.config.dt
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        while True:
            frame = session.tick()
            payload = json.dumps(frame)
            for ws in list(sockets.values()):
                try:
                    await ws.send(payload)
                except Exception:
                    pass
            next_tick += dt
            delay = next_tick - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:  # fell behind; re-anchor rather than bursting ticks
                next_tick = loop.time()
                await asyncio.sleep(0)

    try:
        server = await ws_serve(handler, "127.0.0.1", port)
    except OSError as exc:
        raise RuntimeError(f"cannot bind teleop server port {port}: {exc}") from exc
    ticker = asyncio.create_task(tick_loop())
    if ready_event is not None:
        ready_event.set()
    log.info("teleop server on ws://127.0.0.1:%d", port)
    try:
        if shutdown_event is not None:
            await shutdown_event.wait()
        else:
            await asyncio.Future()
    finally:
        ticker.cancel()
        server.close()
        await server.wait_closed()
        if session.recording and session.driver_id is not None:
            session._stop_recording()
