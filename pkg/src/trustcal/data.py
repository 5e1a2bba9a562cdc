"""Interaction sequences: ingestion, preprocessing, and synthesis.

Sequences are frame-indexed action-observation recordings at 25 frames per
second.  The CSV wire format is one frame per row with the header
``seq_id,t,transparency,reliability,traffic,pedestrians,reliance,gaze``;
lines starting with ``#`` are comments.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from .categories import (
    GAZE_LEVELS,
    PEDESTRIAN_LEVELS,
    RELIABILITY_LEVELS,
    RELIANCE_LEVELS,
    TRAFFIC_LEVELS,
    TRANSPARENCY_LEVELS,
    ActionTuple,
    ObservationTuple,
    validate_action,
    validate_observation,
)
from .errors import (
    EmptyDataset,
    EmptyFixations,
    EmptySequence,
    EmptyWindow,
    NonFinite,
    UnsortedFixations,
)

if TYPE_CHECKING:
    from .model import TrustWorkloadModel

FRAMES_PER_SECOND = 25

SEQUENCE_CSV_HEADER = ("seq_id", "t", "transparency", "reliability",
                       "traffic", "pedestrians", "reliance", "gaze")
FIXATION_CSV_HEADER = ("start_frame", "label")

GAZE_FALLBACK = "G_oth"


class Step(NamedTuple):
    t: int
    action: ActionTuple
    observation: ObservationTuple


class FixationEvent(NamedTuple):
    start_frame: int
    label: str


@dataclass
class InteractionSequence:
    """One episode of action-observation frames with consecutive indices."""

    id: str
    steps: list

    def __post_init__(self):
        if not self.steps:
            raise EmptySequence(f"sequence {self.id!r} has no frames")
        normalized = []
        prev_t = None
        for step in self.steps:
            step = Step(int(step[0]), validate_action(step[1]),
                        validate_observation(step[2]))
            if prev_t is not None and step.t != prev_t + 1:
                raise ValueError(
                    f"sequence {self.id!r}: frame index {step.t} after "
                    f"{prev_t}; indices must increase by 1")
            prev_t = step.t
            normalized.append(step)
        self.steps = normalized

    def __len__(self) -> int:
        return len(self.steps)


@dataclass
class Dataset:
    sequences: list
    provenance: str = ""

    def __post_init__(self):
        ids = [s.id for s in self.sequences]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate sequence ids: {dupes}")

    def __len__(self) -> int:
        return len(self.sequences)

    def n_frames(self) -> int:
        return sum(len(s) for s in self.sequences)


def propagate_fixations(events, n_frames: int):
    """Expand fixation onsets to a per-frame gaze labeling.

    Each frame takes the label of the most recent fixation that has started;
    frames before the first fixation fall back to ``G_oth``.
    """
    if not events:
        raise EmptyFixations("no fixation events")
    events = [FixationEvent(int(e[0]), str(e[1])) for e in events]
    for prev, cur in zip(events, events[1:]):
        if cur.start_frame <= prev.start_frame:
            raise UnsortedFixations(
                f"fixation at frame {cur.start_frame} does not follow "
                f"{prev.start_frame}")
    if events[0].start_frame < 0 or events[-1].start_frame >= n_frames:
        raise ValueError("fixation start frames must lie in [0, n_frames)")
    for e in events:
        if e.label not in GAZE_LEVELS:
            raise ValueError(f"unknown gaze category {e.label!r}")

    labels = []
    current = GAZE_FALLBACK
    next_event = 0
    for f in range(n_frames):
        while next_event < len(events) and events[next_event].start_frame <= f:
            current = events[next_event].label
            next_event += 1
        labels.append(current)
    return labels


def label_reliability(stop_distance_m: float) -> str:
    """Reliability category from the stopping distance before the stop line.

    Negative distances mean the stop line was crossed.  Stops under 5 m are
    low reliability, 5-15 m (inclusive) medium, beyond 15 m high.
    """
    x = float(stop_distance_m)
    if math.isnan(x) or math.isinf(x):
        raise NonFinite(f"stop distance must be finite, got {stop_distance_m!r}")
    if x < 5.0:
        return "Rel_low"
    if x <= 15.0:
        return "Rel_mid"
    return "Rel_high"


def segment_episode(recording: InteractionSequence, window,
                    pad_seconds: float = 3.0,
                    seq_id: str | None = None) -> InteractionSequence:
    """Cut one intersection episode out of a full recording.

    ``window`` is an inclusive (start_frame, end_frame) pair in the
    recording's frame coordinates; the cut extends ``pad_seconds`` of frames
    on both sides and is clamped to the recording bounds.
    """
    start, end = int(window[0]), int(window[1])
    if pad_seconds < 0:
        raise ValueError("pad_seconds must be nonnegative")
    first = recording.steps[0].t
    last = recording.steps[-1].t
    if start > end or start < first or end > last:
        raise EmptyWindow(
            f"window [{start}, {end}] does not lie inside the recording "
            f"[{first}, {last}]")
    pad = int(round(pad_seconds * FRAMES_PER_SECOND))
    lo = max(first, start - pad)
    hi = min(last, end + pad)
    steps = [s for s in recording.steps if lo <= s.t <= hi]
    return InteractionSequence(id=seq_id or f"{recording.id}[{lo}:{hi}]",
                               steps=steps)


def generate_synthetic(model: "TrustWorkloadModel", scenario,
                       rng_seed: int,
                       seq_id: str = "synthetic") -> InteractionSequence:
    """Sample one sequence from the model under a fixed action schedule.

    The first frame's state is drawn from the priors and emits immediately;
    the action at frame t drives the transition from frame t-1 to t, so the
    first frame's action only matters as recorded context.
    """
    if not scenario:
        raise ValueError("scenario must contain at least one action")
    actions = [validate_action(a) for a in scenario]
    rng = np.random.default_rng(rng_seed)
    structure = model.structure

    t_idx = _sample(rng, model.prior_trust)
    w_idx = _sample(rng, model.prior_workload)
    steps = []
    for frame, a in enumerate(actions):
        if frame > 0:
            ia = structure.trust_action_index(a)
            iw = structure.workload_action_index(a)
            t_next = _sample(rng, model.trans_trust[ia, t_idx, w_idx])
            w_next = _sample(rng, model.trans_workload[iw, t_idx, w_idx])
            t_idx, w_idx = t_next, w_next
        reliance = RELIANCE_LEVELS[_sample(rng, model.emit_trust[t_idx])]
        gaze = GAZE_LEVELS[_sample(rng, model.emit_workload[w_idx])]
        steps.append(Step(frame, a, ObservationTuple(reliance, gaze)))
    return InteractionSequence(id=seq_id, steps=steps)


def _sample(rng: np.random.Generator, probs: np.ndarray) -> int:
    # inverse-CDF draw; cheaper than rng.choice for tiny category sets
    r = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if r < acc:
            return i
    return len(probs) - 1


#: The eight study conditions: transparency x traffic x pedestrians, in
#: canonical order.  Reliability varies per intersection, not per condition.
STUDY_CONDITIONS = tuple(itertools.product(
    TRANSPARENCY_LEVELS, TRAFFIC_LEVELS, PEDESTRIAN_LEVELS))


def synthetic_study_dataset(model: "TrustWorkloadModel", n_participants: int,
                            frames_per_sequence: int, rng_seed: int,
                            n_intersections: int = 3) -> Dataset:
    """Synthesize a study-shaped dataset with stratification metadata.

    Ids follow ``p<participant>_c<condition>_i<intersection>`` so selection
    can form folds holding one intersection per condition per participant.
    Each sequence holds its condition's action constant, with reliability
    cycling across the intersections of a condition cell.
    """
    sequences = []
    for p in range(n_participants):
        for c, (transparency, traffic, peds) in enumerate(STUDY_CONDITIONS):
            for k in range(n_intersections):
                reliability = RELIABILITY_LEVELS[k % len(RELIABILITY_LEVELS)]
                action = ActionTuple(transparency, reliability, traffic, peds)
                seq_id = f"p{p:02d}_c{c}_i{k}"
                seed = rng_seed * 1_000_003 + p * 1009 + c * 31 + k
                sequences.append(generate_synthetic(
                    model, [action] * frames_per_sequence, rng_seed=seed,
                    seq_id=seq_id))
    return Dataset(sequences=sequences,
                   provenance=f"synthetic_study_dataset(seed={rng_seed})")


def write_sequences(dataset: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SEQUENCE_CSV_HEADER)
        for seq in dataset.sequences:
            for step in seq.steps:
                writer.writerow((seq.id, step.t) + tuple(step.action)
                                + tuple(step.observation))


def read_sequences(path) -> Dataset:
    """Load a sequence CSV; rows group into sequences by ``seq_id``."""
    path = Path(path)
    grouped: dict = {}
    with path.open(newline="") as fh:
        rows = (r for r in fh if not r.startswith("#"))
        reader = csv.reader(rows)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        if tuple(h.strip() for h in header) != SEQUENCE_CSV_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(SEQUENCE_CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SEQUENCE_CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected "
                                 f"{len(SEQUENCE_CSV_HEADER)} fields")
            seq_id, t = row[0], int(row[1])
            action = ActionTuple(*row[2:6])
            obs = ObservationTuple(*row[6:8])
            grouped.setdefault(seq_id, []).append(Step(t, action, obs))
    if not grouped:
        raise EmptyDataset(f"{path} contains no frames")
    sequences = [InteractionSequence(id=sid, steps=steps)
                 for sid, steps in grouped.items()]
    return Dataset(sequences=sequences, provenance=str(path))


def read_fixations(path):
    path = Path(path)
    events = []
    with path.open(newline="") as fh:
        rows = (r for r in fh if not r.startswith("#"))
        reader = csv.reader(rows)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFixations(f"{path} is empty") from None
        if tuple(h.strip() for h in header) != FIXATION_CSV_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(FIXATION_CSV_HEADER)}")
        for row in reader:
            if not row:
                continue
            events.append(FixationEvent(int(row[0]), row[1]))
    if not events:
        raise EmptyFixations(f"{path} contains no events")
    return events
