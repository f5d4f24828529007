"""Adaptive-playback simulation and study-session replay.

``run_session`` drives a trained predictor over a scripted context
timeline: at t=0 and at every context change it predicts a continuous
resolution, snaps it up to the ladder (ceiling rule: never under-provision
when a ladder value at or above the prediction exists), and switches only
if the minimum dwell time has elapsed. The published models predict one
final resolution per session; predicting at every context event is this
tool's extrapolation, and decision logs label the mechanism explicitly.

``replay_study`` rebuilds one trace per logged session under a policy
(observed behavior, a trained model, or a fixed rung) and compares energy
against a fixed-resolution baseline.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from .dataset import ACTIVITIES, STUDY_LADDERS, final_resolution
from .energy import EnergyReport, PlaybackTrace, TraceSegment, estimate_energy
from .errors import ParseError, ValidationError

DEFAULT_MIN_DWELL_S = 10.0
DEFAULT_SESSION_DURATION_S = 60.0


@dataclass
class SessionScript:
    si: float
    ti: float
    duration_s: float
    timeline: list                # ordered (t_s, activity) pairs
    viewer: dict                  # gender, age, glasses, optional traits
    ladder: tuple

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValidationError("script duration must be positive")
        if not self.timeline:
            raise ValidationError("timeline needs at least the t=0 entry")
        if self.timeline[0][0] != 0:
            raise ValidationError("timeline must start at t=0")
        last = -1.0
        for t, activity in self.timeline:
            if t <= last:
                raise ValidationError(f"timeline times must strictly increase (saw {t})")
            if t >= self.duration_s:
                raise ValidationError(f"timeline entry at {t} s is past the duration")
            if activity not in ACTIVITIES:
                raise ValidationError(f"unknown activity {activity!r}")
            last = t
        if not self.ladder:
            raise ValidationError("empty resolution ladder")
        self.ladder = tuple(sorted(self.ladder))

    def feature_row(self, activity: str) -> dict:
        row = {"activity": activity, "si": self.si, "ti": self.ti}
        row.update(self.viewer)
        return row


def load_script(path) -> SessionScript:
    """Read a session script JSON (see README for the schema)."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ParseError(f"{Path(path).name}: {e}") from None
    try:
        video = doc["video"]
        return SessionScript(
            si=float(video["si"]),
            ti=float(video["ti"]),
            duration_s=float(video["duration_s"]),
            timeline=[(float(t), str(a)) for t, a in doc["timeline"]],
            viewer=dict(doc["viewer"]),
            ladder=tuple(int(r) for r in doc["ladder"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{Path(path).name}: bad script field ({e})") from None


@dataclass
class PolicyDecision:
    t_s: float
    activity: str
    raw_prediction: float
    chosen: int
    applied: bool


def snap_to_ladder(raw: float, ladder) -> int:
    """Smallest ladder value at or above the prediction, else the ladder max."""
    for rung in sorted(ladder):
        if rung >= raw:
            return rung
    return max(ladder)


def run_session(script: SessionScript, model,
                min_dwell_s: float = DEFAULT_MIN_DWELL_S):
    """Simulate one session; returns (PlaybackTrace, [PolicyDecision])."""
    decisions = []
    current = None
    last_switch = None
    boundaries = []  # (t, resolution) actually applied

    for t, activity in script.timeline:
        row = script.feature_row(activity)
        raw = float(model.predict_rows([row])[0])
        chosen = snap_to_ladder(raw, script.ladder)
        if current is None:
            applied = True
        elif chosen == current:
            applied = False
        else:
            applied = (t - last_switch) >= min_dwell_s
        if applied:
            current = chosen
            last_switch = t
            boundaries.append((t, chosen))
        decisions.append(PolicyDecision(t_s=t, activity=activity, raw_prediction=raw,
                                        chosen=chosen, applied=applied))

    segments = []
    for i, (t, resolution) in enumerate(boundaries):
        end = boundaries[i + 1][0] if i + 1 < len(boundaries) else script.duration_s
        if end > t:
            segments.append(TraceSegment(resolution=resolution, duration_s=end - t))
    return PlaybackTrace(segments), decisions


# --------------------------------------------------------------------------
# Study replay


def _parse_policy(policy: str):
    if policy == "observed":
        return ("observed", None)
    if policy == "model":
        return ("model", None)
    if policy.startswith("fixed:"):
        try:
            return ("fixed", int(policy.split(":", 1)[1]))
        except ValueError:
            raise ValidationError(f"bad fixed policy {policy!r}") from None
    raise ValidationError(
        f"unknown policy {policy!r} (use observed, model, or fixed:<lines>)")


def _observed_trace(session, duration_s, exact_events):
    if not exact_events or not session.events:
        return PlaybackTrace([TraceSegment(final_resolution(session), duration_s)])
    segments = []
    current = session.start_resolution
    t = 0.0
    for event in session.events:
        t_s = event.t_ms / 1000.0
        if t_s >= duration_s:
            break
        if t_s > t:
            segments.append(TraceSegment(current, t_s - t))
            t = t_s
        current = event.new_resolution
    if duration_s > t:
        segments.append(TraceSegment(current, duration_s - t))
    return PlaybackTrace(segments)


def replay_study(dataset, policy: str, calibration, baseline_resolution: int,
                 study: int | None = None, model=None,
                 duration_s: float = DEFAULT_SESSION_DURATION_S,
                 exact_events: bool = False) -> dict:
    """Replay every session under *policy* and compare against a fixed baseline.

    Returns per-session energies plus the aggregate savings; sessions are
    processed independently and aggregated in (study, participant, video)
    order, so the result does not depend on scheduling.
    """
    kind, fixed_res = _parse_policy(policy)
    if kind == "model" and model is None:
        raise ValidationError("policy 'model' needs a trained model")

    rows_by_session = {}
    if kind == "model":
        for row in dataset.analysis_rows(study=study):
            rows_by_session[(row.participant_id, row.video_id)] = row

    sessions = dataset.sessions_for(study)
    if not sessions:
        raise ValidationError(f"dataset has no study-{study} sessions")

    per_session = []
    total_policy = 0.0
    total_base = 0.0
    for session in sessions:
        ladder = STUDY_LADDERS[session.study]
        if kind == "fixed":
            if fixed_res not in ladder:
                raise ValidationError(
                    f"fixed policy resolution {fixed_res} not in study-{session.study} ladder")
            trace = PlaybackTrace([TraceSegment(fixed_res, duration_s)])
        elif kind == "observed":
            trace = _observed_trace(session, duration_s, exact_events)
        else:
            row = rows_by_session[(session.participant_id, session.video_id)]
            raw = float(model.predict_rows([row.features()])[0])
            trace = PlaybackTrace([TraceSegment(snap_to_ladder(raw, ladder), duration_s)])

        if baseline_resolution not in ladder:
            raise ValidationError(
                f"baseline {baseline_resolution} not in study-{session.study} ladder")
        base_trace = PlaybackTrace([TraceSegment(baseline_resolution, duration_s)])

        e_policy = estimate_energy(trace, calibration)
        e_base = estimate_energy(base_trace, calibration)
        total_policy += e_policy
        total_base += e_base
        per_session.append({
            "participant_id": session.participant_id,
            "video_id": session.video_id,
            "study": session.study,
            "activity": session.activity,
            "policy_energy_mwh": e_policy,
            "baseline_energy_mwh": e_base,
            "savings_percent": 100.0 * (e_base - e_policy) / e_base,
        })

    aggregate = EnergyReport(
        baseline=f"fixed:{baseline_resolution}",
        energy_mwh={"policy": total_policy, "baseline": total_base},
        savings_percent={"policy": 100.0 * (total_base - total_policy) / total_base,
                         "baseline": 0.0},
    )
    return {
        "policy": policy,
        "baseline_resolution": baseline_resolution,
        "duration_s": duration_s,
        "note": ("per-context-event prediction is an extrapolation beyond the "
                 "per-session models the study fitted"),
        "sessions": per_session,
        "aggregate": aggregate.to_dict(),
    }
