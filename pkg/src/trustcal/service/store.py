"""In-memory session store with optional per-session journaling.

Within a session, steps serialize behind the session lock (single writer);
reads copy a consistent snapshot.  Journals are append-only JSON lines, one
file per session, written after each step so a crashed service can replay.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..categories import Context, ObservationTuple, full_action
from ..errors import UnknownSession, ZeroLikelihood
from ..model import TrustWorkloadModel, belief_update
from ..solver import QmdpPolicy, qmdp_action
from ..categories import reliability_index


@dataclass
class StepRecord:
    step_index: int
    context: Context
    observation: ObservationTuple
    episode_start: bool
    action: str
    belief: np.ndarray
    reward: float
    cumulative_discounted_reward: float
    belief_reset: bool

    def to_payload(self) -> dict:
        return {
            "step_index": self.step_index,
            "action": self.action,
            "belief": [float(x) for x in self.belief],
            "p_trust_high": float(self.belief[2] + self.belief[3]),
            "p_workload_high": float(self.belief[1] + self.belief[3]),
            "reward": self.reward,
            "cumulative_discounted_reward": self.cumulative_discounted_reward,
            "belief_reset": self.belief_reset,
            "context": dict(zip(("reliability", "traffic", "pedestrians"),
                                self.context)),
            "observation": dict(zip(("reliance", "gaze"), self.observation)),
            "episode_start": self.episode_start,
        }


@dataclass
class Session:
    id: str
    model: TrustWorkloadModel
    policy: QmdpPolicy
    carry_belief: bool
    belief: np.ndarray
    trace: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    journal_path: Path | None = None

    def snapshot_belief(self) -> np.ndarray:
        with self.lock:
            return self.belief.copy()

    def step(self, context: Context, observation: ObservationTuple,
             episode_start: bool) -> StepRecord:
        """Act on the pre-observation belief, then absorb the observation."""
        with self.lock:
            if episode_start and not self.carry_belief:
                self.belief = self.model.joint_prior.copy()
            transparency = qmdp_action(self.policy, self.belief, context)
            action = full_action(transparency, context)
            reset = False
            try:
                self.belief = belief_update(self.model, self.belief, action,
                                            observation)
            except ZeroLikelihood:
                self.belief = self.model.joint_prior.copy()
                reset = True
            rel = reliability_index(context.reliability)
            posterior_trust = self.belief[2] + self.belief[3]
            reward = float((1.0 - posterior_trust)
                           * self.policy.reward.table[0, rel]
                           + posterior_trust * self.policy.reward.table[1, rel])
            index = len(self.trace)
            gamma = self.policy.config.gamma
            previous = self.trace[-1].cumulative_discounted_reward \
                if self.trace else 0.0
            record = StepRecord(
                step_index=index, context=context, observation=observation,
                episode_start=episode_start, action=transparency,
                belief=self.belief.copy(), reward=reward,
                cumulative_discounted_reward=previous + (gamma ** index) * reward,
                belief_reset=reset)
            self.trace.append(record)
            if self.journal_path is not None:
                with self.journal_path.open("a") as fh:
                    fh.write(json.dumps(record.to_payload()) + "\n")
                    fh.flush()
            return record

    def trace_snapshot(self) -> list:
        with self.lock:
            return list(self.trace)


class SessionStore:
    def __init__(self, journal_dir: str | None = None):
        self._sessions: dict = {}
        self._lock = threading.Lock()
        self.journal_dir = Path(journal_dir) if journal_dir else None
        if self.journal_dir is not None:
            self.journal_dir.mkdir(parents=True, exist_ok=True)

    def create(self, model: TrustWorkloadModel, policy: QmdpPolicy,
               carry_belief: bool) -> Session:
        session_id = uuid.uuid4().hex
        journal_path = None
        if self.journal_dir is not None:
            journal_path = self.journal_dir / f"{session_id}.jsonl"
            journal_path.write_text(json.dumps(
                {"session_id": session_id, "carry_belief": carry_belief}) + "\n")
        session = Session(id=session_id, model=model, policy=policy,
                          carry_belief=carry_belief,
                          belief=model.joint_prior.copy(),
                          journal_path=journal_path)
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSession(f"no session {session_id!r}") from None


def replay_journal(path) -> list:
    """Recover a session's step payloads from its journal file."""
    lines = Path(path).read_text().splitlines()
    return [json.loads(line) for line in lines[1:]]
