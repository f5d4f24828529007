"""Study-log ingestion: canonical CSV schema, validation, BFI-10 scoring.

Canonical files (UTF-8, header row mandatory, "." decimal separator):

  participants.csv  id,study,gender,age,glasses,device,bfi1..bfi10
  videos.csv        id,study,si,ti,category
  sessions.csv      participant_id,video_id,activity,start_resolution
  events.csv        participant_id,video_id,t_ms,new_resolution

A session is keyed by (participant_id, video_id); ids must therefore be
unique across studies, not merely within one. BFI answers are optional per
participant but all-or-nothing. Study 2 never carries the in_vehicle
activity and always starts at 360 lines.

Upstream exports with different column names are converted by
:func:`adapt_to_canonical` driven by a JSON mapping file (see README).
"""

import csv
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ParseError, ValidationError

ACTIVITIES = ("still", "walking", "running", "in_vehicle")
GENDERS = ("male", "female")
TRAITS = ("extraversion", "agreeableness", "conscientiousness", "neuroticism", "openness")
STUDY_LADDERS = {
    1: (144, 240, 360, 480, 720, 1080),
    2: (360, 480, 720, 1080),
}
STUDY2_START = 360

_CANONICAL_COLUMNS = {
    "participants": ["id", "study", "gender", "age", "glasses", "device"]
    + [f"bfi{i}" for i in range(1, 11)],
    "videos": ["id", "study", "si", "ti", "category"],
    "sessions": ["participant_id", "video_id", "activity", "start_resolution"],
    "events": ["participant_id", "video_id", "t_ms", "new_resolution"],
}


class DatasetError(ValidationError):
    """Content-level violation in a study dataset, located by file and row."""

    def __init__(self, message, filename=None, row=None):
        where = ""
        if filename is not None:
            where = f" [{filename}" + (f", row {row}" if row is not None else "") + "]"
        super().__init__(message + where)


# --------------------------------------------------------------------------
# Domain types


@dataclass
class Participant:
    id: str
    study: int
    gender: str
    age: int
    glasses: bool
    device: str
    bfi_answers: tuple | None = None


@dataclass
class VideoMeta:
    id: str
    study: int
    si: float
    ti: float
    category: str


@dataclass
class ResolutionEvent:
    t_ms: int
    new_resolution: int


@dataclass
class ViewingSession:
    participant_id: str
    video_id: str
    activity: str
    start_resolution: int
    events: list
    study: int


@dataclass
class TraitProfile:
    scores: dict
    percentiles: dict
    dominant: str


@dataclass
class AnalysisRow:
    """Flattened modeling record: one watched session joined to its metadata."""

    participant_id: str
    video_id: str
    study: int
    final_resolution: int
    activity: str
    si: float
    ti: float
    gender: str
    age: int
    glasses: bool
    trait_percentiles: dict | None = None
    dominant_trait: str | None = None

    def features(self) -> dict:
        """Flat feature mapping consumed by the predictor and simulator."""
        row = {
            "activity": self.activity,
            "si": self.si,
            "ti": self.ti,
            "gender": self.gender,
            "age": self.age,
            "glasses": self.glasses,
            "final_resolution": self.final_resolution,
        }
        if self.trait_percentiles is not None:
            for trait in TRAITS:
                row[f"pct_{trait}"] = self.trait_percentiles[trait]
            row["dominant_trait"] = self.dominant_trait
        return row


@dataclass
class Dataset:
    participants: dict
    videos: dict
    sessions: list
    trait_profiles: dict = field(default_factory=dict)

    def studies(self):
        return sorted({p.study for p in self.participants.values()})

    def sessions_for(self, study=None):
        if study is None:
            return list(self.sessions)
        return [s for s in self.sessions if s.study == study]

    def analysis_rows(self, study=None):
        rows = []
        for session in self.sessions_for(study):
            participant = self.participants[session.participant_id]
            video = self.videos[session.video_id]
            profile = self.trait_profiles.get(participant.id)
            rows.append(
                AnalysisRow(
                    participant_id=participant.id,
                    video_id=video.id,
                    study=session.study,
                    final_resolution=final_resolution(session),
                    activity=session.activity,
                    si=video.si,
                    ti=video.ti,
                    gender=participant.gender,
                    age=participant.age,
                    glasses=participant.glasses,
                    trait_percentiles=dict(profile.percentiles) if profile else None,
                    dominant_trait=profile.dominant if profile else None,
                )
            )
        return rows


# --------------------------------------------------------------------------
# Scalar operations


def final_resolution(session: ViewingSession) -> int:
    """Resolution the session ended at: last event's value, else the start."""
    if session.events:
        return session.events[-1].new_resolution
    return session.start_resolution


def _load_bfi_key():
    with resources.files("resadapt.data").joinpath("bfi10_key.json").open("rb") as fh:
        return json.load(fh)


_BFI_KEY = None


def bfi10_score(answers) -> dict:
    """Score ten BFI-10 answers (each 1..5) into the five trait means.

    Reverse-keyed items are inverted as 6 - answer; the item/key assignment
    lives in data/bfi10_key.json so it can be audited without reading code.
    """
    global _BFI_KEY
    if _BFI_KEY is None:
        _BFI_KEY = _load_bfi_key()
    answers = list(answers)
    if len(answers) != 10:
        raise ValidationError(f"BFI-10 needs exactly 10 answers, got {len(answers)}")
    for i, a in enumerate(answers, start=1):
        if not isinstance(a, int) or not 1 <= a <= 5:
            raise ValidationError(f"BFI answer {i} out of range [1,5]: {a!r}")
    reverse = set(_BFI_KEY["reverse_scored"])
    keyed = [6 - a if i in reverse else a for i, a in enumerate(answers, start=1)]
    return {
        trait: (keyed[items[0] - 1] + keyed[items[1] - 1]) / 2.0
        for trait, items in _BFI_KEY["items"].items()
    }


def dominant_trait(scores_by_participant) -> dict:
    """Within-sample trait percentiles and the dominant trait per participant.

    The percentile of a score is the mid-rank fraction (strictly lower count
    plus half the tied count, over n). Dominant is the highest percentile;
    ties break by the fixed trait order extraversion, agreeableness,
    conscientiousness, neuroticism, openness.
    """
    ids = list(scores_by_participant)
    if not ids:
        raise ValidationError("no participants with BFI scores")
    n = len(ids)
    profiles = {}
    percentiles = {pid: {} for pid in ids}
    for trait in TRAITS:
        values = [scores_by_participant[pid][trait] for pid in ids]
        for pid, score in zip(ids, values):
            lower = sum(1 for v in values if v < score)
            tied = sum(1 for v in values if v == score)
            percentiles[pid][trait] = (lower + tied / 2.0) / n
    for pid in ids:
        best = max(TRAITS, key=lambda t: (percentiles[pid][t], -TRAITS.index(t)))
        profiles[pid] = TraitProfile(
            scores=dict(scores_by_participant[pid]),
            percentiles=percentiles[pid],
            dominant=best,
        )
    return profiles


# --------------------------------------------------------------------------
# CSV ingestion


def _read_csv(path: Path, kind: str):
    if not path.is_file():
        raise ParseError(f"missing canonical file {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        expected = _CANONICAL_COLUMNS[kind]
        if header is None:
            raise ParseError(f"{path.name}: empty file, header row is mandatory")
        missing = [c for c in expected if c not in header]
        if missing:
            raise ParseError(f"{path.name}: missing columns {missing}")
        return [dict(row) for row in reader]


def _parse_bool(value, filename, row):
    v = value.strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise DatasetError(f"bad boolean {value!r}", filename, row)


def _parse_int(value, what, filename, row):
    try:
        return int(value)
    except ValueError:
        raise DatasetError(f"bad {what} {value!r}", filename, row) from None


def _parse_float(value, what, filename, row):
    try:
        return float(value)
    except ValueError:
        raise DatasetError(f"bad {what} {value!r}", filename, row) from None


def ingest(data_dir) -> Dataset:
    """Read and validate the canonical CSVs under *data_dir*.

    Enforces referential integrity, per-study resolution ladders, event
    monotonicity, and BFI completeness; errors name the file and row.
    """
    data_dir = Path(data_dir)

    participants = {}
    for i, row in enumerate(_read_csv(data_dir / "participants.csv", "participants"), start=2):
        pid = row["id"].strip()
        if not pid:
            raise DatasetError("empty participant id", "participants.csv", i)
        if pid in participants:
            raise DatasetError(f"duplicate participant id {pid!r}", "participants.csv", i)
        study = _parse_int(row["study"], "study", "participants.csv", i)
        if study not in STUDY_LADDERS:
            raise DatasetError(f"unknown study {study}", "participants.csv", i)
        gender = row["gender"].strip().lower()
        if gender not in GENDERS:
            raise DatasetError(f"bad gender {row['gender']!r}", "participants.csv", i)
        age = _parse_int(row["age"], "age", "participants.csv", i)
        if age <= 0:
            raise DatasetError(f"bad age {age}", "participants.csv", i)
        bfi_cells = [row[f"bfi{k}"].strip() for k in range(1, 11)]
        if all(c == "" for c in bfi_cells):
            answers = None
        elif any(c == "" for c in bfi_cells):
            raise DatasetError("BFI answers must be all present or all empty",
                               "participants.csv", i)
        else:
            answers = tuple(
                _parse_int(c, f"bfi{k}", "participants.csv", i)
                for k, c in enumerate(bfi_cells, start=1)
            )
            for k, a in enumerate(answers, start=1):
                if not 1 <= a <= 5:
                    raise DatasetError(f"bfi{k} out of range [1,5]: {a}",
                                       "participants.csv", i)
        participants[pid] = Participant(
            id=pid, study=study, gender=gender, age=age,
            glasses=_parse_bool(row["glasses"], "participants.csv", i),
            device=row["device"], bfi_answers=answers,
        )

    videos = {}
    for i, row in enumerate(_read_csv(data_dir / "videos.csv", "videos"), start=2):
        vid = row["id"].strip()
        if not vid:
            raise DatasetError("empty video id", "videos.csv", i)
        if vid in videos:
            raise DatasetError(f"duplicate video id {vid!r}", "videos.csv", i)
        study = _parse_int(row["study"], "study", "videos.csv", i)
        if study not in STUDY_LADDERS:
            raise DatasetError(f"unknown study {study}", "videos.csv", i)
        si = _parse_float(row["si"], "si", "videos.csv", i)
        ti = _parse_float(row["ti"], "ti", "videos.csv", i)
        if si < 0 or ti < 0:
            raise DatasetError("si/ti must be non-negative", "videos.csv", i)
        videos[vid] = VideoMeta(id=vid, study=study, si=si, ti=ti,
                                category=row["category"].strip())

    sessions = {}
    for i, row in enumerate(_read_csv(data_dir / "sessions.csv", "sessions"), start=2):
        pid, vid = row["participant_id"].strip(), row["video_id"].strip()
        if pid not in participants:
            raise DatasetError(f"unknown participant_id {pid!r}", "sessions.csv", i)
        if vid not in videos:
            raise DatasetError(f"unknown video_id {vid!r}", "sessions.csv", i)
        participant, video = participants[pid], videos[vid]
        if participant.study != video.study:
            raise DatasetError(
                f"participant {pid!r} (study {participant.study}) paired with "
                f"video {vid!r} (study {video.study})", "sessions.csv", i)
        study = participant.study
        if (pid, vid) in sessions:
            raise DatasetError(f"duplicate session ({pid!r}, {vid!r})", "sessions.csv", i)
        activity = row["activity"].strip().lower()
        if activity not in ACTIVITIES:
            raise DatasetError(f"bad activity {row['activity']!r}", "sessions.csv", i)
        if study == 2 and activity == "in_vehicle":
            raise DatasetError("study 2 never recorded in_vehicle", "sessions.csv", i)
        start = _parse_int(row["start_resolution"], "start_resolution", "sessions.csv", i)
        if start not in STUDY_LADDERS[study]:
            raise DatasetError(f"start_resolution {start} not in study-{study} ladder",
                               "sessions.csv", i)
        if study == 2 and start != STUDY2_START:
            raise DatasetError(f"study-2 sessions always start at {STUDY2_START}",
                               "sessions.csv", i)
        sessions[(pid, vid)] = ViewingSession(
            participant_id=pid, video_id=vid, activity=activity,
            start_resolution=start, events=[], study=study,
        )

    for i, row in enumerate(_read_csv(data_dir / "events.csv", "events"), start=2):
        pid, vid = row["participant_id"].strip(), row["video_id"].strip()
        session = sessions.get((pid, vid))
        if session is None:
            raise DatasetError(f"event references unknown session ({pid!r}, {vid!r})",
                               "events.csv", i)
        t_ms = _parse_int(row["t_ms"], "t_ms", "events.csv", i)
        if t_ms < 0:
            raise DatasetError(f"negative t_ms {t_ms}", "events.csv", i)
        if session.events and t_ms <= session.events[-1].t_ms:
            raise DatasetError(
                f"non-monotone event times for ({pid!r}, {vid!r}): "
                f"{t_ms} after {session.events[-1].t_ms}", "events.csv", i)
        res = _parse_int(row["new_resolution"], "new_resolution", "events.csv", i)
        if res not in STUDY_LADDERS[session.study]:
            raise DatasetError(f"new_resolution {res} not in study-{session.study} ladder",
                               "events.csv", i)
        session.events.append(ResolutionEvent(t_ms=t_ms, new_resolution=res))

    dataset = Dataset(
        participants=participants, videos=videos,
        sessions=sorted(sessions.values(),
                        key=lambda s: (s.study, s.participant_id, s.video_id)),
    )

    with_bfi = {
        pid: bfi10_score(p.bfi_answers)
        for pid, p in participants.items()
        if p.bfi_answers is not None
    }
    if with_bfi:
        dataset.trait_profiles = dominant_trait(with_bfi)
    return dataset


def export(dataset: Dataset, out_dir):
    """Write a dataset back to the canonical CSVs (ingest/export round-trips)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def fmt(value):
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            return repr(value)
        return str(value)

    with open(out_dir / "participants.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CANONICAL_COLUMNS["participants"])
        for p in sorted(dataset.participants.values(), key=lambda p: (p.study, p.id)):
            bfi = list(p.bfi_answers) if p.bfi_answers else [""] * 10
            writer.writerow([p.id, p.study, p.gender, p.age, fmt(p.glasses), p.device]
                            + [fmt(a) if a != "" else "" for a in bfi])
    with open(out_dir / "videos.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CANONICAL_COLUMNS["videos"])
        for v in sorted(dataset.videos.values(), key=lambda v: (v.study, v.id)):
            writer.writerow([v.id, v.study, fmt(v.si), fmt(v.ti), v.category])
    with open(out_dir / "sessions.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CANONICAL_COLUMNS["sessions"])
        for s in dataset.sessions:
            writer.writerow([s.participant_id, s.video_id, s.activity, s.start_resolution])
    with open(out_dir / "events.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CANONICAL_COLUMNS["events"])
        for s in dataset.sessions:
            for e in s.events:
                writer.writerow([s.participant_id, s.video_id, e.t_ms, e.new_resolution])


def adapt_to_canonical(src_dir, dst_dir, mapping_path=None):
    """Convert an upstream study export into the canonical schema.

    The mapping file is JSON with one entry per canonical file::

        {"participants": {"file": "users.csv",
                          "rename": {"id": "user_id"},
                          "defaults": {"device": "unknown"}}, ...}

    ``rename`` maps canonical column -> source column; unmapped canonical
    columns are taken verbatim from the source when present, from
    ``defaults`` otherwise (BFI columns default to empty). Without a
    mapping file the source is assumed to already be canonical.
    """
    src_dir, dst_dir = Path(src_dir), Path(dst_dir)
    mapping = {}
    if mapping_path is not None:
        with open(mapping_path, encoding="utf-8") as fh:
            mapping = json.load(fh)

    dst_dir.mkdir(parents=True, exist_ok=True)
    for kind, columns in _CANONICAL_COLUMNS.items():
        spec = mapping.get(kind, {})
        src = src_dir / spec.get("file", f"{kind}.csv")
        rename = spec.get("rename", {})
        defaults = spec.get("defaults", {})
        if not src.is_file():
            raise ParseError(f"adapter: missing source file {src}")
        with open(src, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ParseError(f"adapter: {src.name} has no header row")
            fieldnames = set(reader.fieldnames)
            rows = list(reader)
        for col in columns:
            source_col = rename.get(col, col)
            if source_col not in fieldnames and col not in defaults \
                    and not col.startswith("bfi"):
                raise ParseError(
                    f"adapter: {src.name} lacks column {source_col!r} "
                    f"for canonical {col!r}")
        out_rows = []
        for row in rows:
            out = {}
            for col in columns:
                source_col = rename.get(col, col)
                if source_col in row and row[source_col] is not None:
                    out[col] = row[source_col]
                elif col in defaults:
                    out[col] = str(defaults[col])
                else:
                    out[col] = ""
            out_rows.append(out)
        with open(dst_dir / f"{kind}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns)
            writer.writeheader()
            writer.writerows(out_rows)
    return dst_dir
