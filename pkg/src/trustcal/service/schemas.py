"""Request/response bodies for the interaction service.

Category names are the same strings the CSV formats use; validation is by
literal type, so a typo'd category is rejected at the edge with a 422.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

Transparency = Literal["AR_off", "AR_on"]
Reliability = Literal["Rel_low", "Rel_mid", "Rel_high"]
Traffic = Literal["Traffic_low", "Traffic_high"]
Pedestrians = Literal["Peds_absent", "Peds_present"]
Reliance = Literal["R_minus", "R_plus"]
Gaze = Literal["G_road", "G_vehi", "G_ped", "G_side", "G_oth"]


class ContextIn(BaseModel):
    reliability: Reliability
    traffic: Traffic
    pedestrians: Pedestrians


class ObservationIn(BaseModel):
    reliance: Reliance
    gaze: Gaze


class SessionCreate(BaseModel):
    model: Optional[str] = Field(
        default=None, description="twmodel/1 document; server default if omitted")
    policy: Optional[str] = Field(
        default=None, description="twpolicy/1 document; server default if omitted")
    carry_belief: bool = Field(
        default=False,
        description="Carry the belief across episode boundaries instead of "
                    "resetting to the priors")


class SessionInfo(BaseModel):
    session_id: str
    carry_belief: bool
    belief: list[float]
    p_trust_high: float
    p_workload_high: float


class StepRequest(BaseModel):
    context: ContextIn
    observation: ObservationIn
    episode_start: bool = False


class BatchStepRequest(BaseModel):
    steps: list[StepRequest]


class StepResult(BaseModel):
    step_index: int
    action: Transparency
    belief: list[float]
    p_trust_high: float
    p_workload_high: float
    reward: float
    cumulative_discounted_reward: float
    belief_reset: bool


class TraceEntry(StepResult):
    context: ContextIn
    observation: ObservationIn
    episode_start: bool


class TraceResponse(BaseModel):
    session_id: str
    carry_belief: bool
    steps: list[TraceEntry]


class SessionMetrics(BaseModel):
    session_id: str
    n_steps: int
    discounted_return: float
    calibration_rate: float
    transparency_on_rate: float
    zero_likelihood_resets: int


class BatchStepResponse(BaseModel):
    results: list[StepResult]
