import csv
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).resolve().parent.parent
SAMPLE_DATASET = REPO_ROOT / "data" / "sample_dataset"
SYNTHETIC_CALIBRATION = REPO_ROOT / "data" / "calibration.synthetic.csv"
EXAMPLE_SCRIPT = REPO_ROOT / "data" / "session_script.example.json"


def write_y4m(frames, rate=(25, 1), colorspace="420", chroma_byte=128,
              extra_params=()):
    """Independent Y4M writer for round-trip oracles.

    *frames* is a list of (height, width) uint8 arrays (or nested lists).
    Chroma planes are filled with a constant byte.
    """
    frames = [np.asarray(f, dtype=np.uint8) for f in frames]
    h, w = frames[0].shape
    sub = {"420": (2, 2), "422": (2, 1), "444": (1, 1)}[colorspace]
    chroma = (w // sub[0]) * (h // sub[1])
    parts = [f"YUV4MPEG2 W{w} H{h} F{rate[0]}:{rate[1]} C{colorspace}"]
    parts.extend(extra_params)
    blob = (" ".join(parts)).encode() + b"\n"
    for frame in frames:
        blob += b"FRAME\n" + frame.tobytes() + bytes([chroma_byte]) * (2 * chroma)
    return blob


def write_dataset(dirpath, participants, videos, sessions, events):
    """Write canonical CSVs from row dicts (missing cells become '')."""
    headers = {
        "participants.csv": ["id", "study", "gender", "age", "glasses", "device"]
        + [f"bfi{i}" for i in range(1, 11)],
        "videos.csv": ["id", "study", "si", "ti", "category"],
        "sessions.csv": ["participant_id", "video_id", "activity", "start_resolution"],
        "events.csv": ["participant_id", "video_id", "t_ms", "new_resolution"],
    }
    tables = {
        "participants.csv": participants,
        "videos.csv": videos,
        "sessions.csv": sessions,
        "events.csv": events,
    }
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for name, rows in tables.items():
        with open(dirpath / name, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=headers[name])
            writer.writeheader()
            for row in rows:
                writer.writerow({k: row.get(k, "") for k in headers[name]})
    return dirpath


def synthetic_study2(dirpath, n_participants=23, seed=20):
    """Generate a plausible study-2 dataset with activity/SI structure.

    Each participant watches 12 videos, 4 per activity, with final
    resolutions pushed up when still and when SI is high, so predictors
    have signal to find. Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    ladder = (360, 480, 720, 1080)
    categories = ["LowSiLowTi", "LowSiHighTi", "HighSiLowTi", "HighSiHighTi"]
    si_by_cat = {"LowSiLowTi": (10, 40), "LowSiHighTi": (15, 40),
                 "HighSiLowTi": (110, 140), "HighSiHighTi": (110, 140)}
    ti_by_cat = {"LowSiLowTi": (2, 10), "LowSiHighTi": (25, 39),
                 "HighSiLowTi": (2, 10), "HighSiHighTi": (25, 39)}

    videos = []
    for v in range(12):
        cat = categories[v % 4]
        si = float(np.round(rng.uniform(*si_by_cat[cat]), 2))
        ti = float(np.round(rng.uniform(*ti_by_cat[cat]), 2))
        videos.append({"id": f"v{v:02d}", "study": 2, "si": si, "ti": ti,
                       "category": cat})

    participants, sessions, events = [], [], []
    activities = ("still", "walking", "running")
    for p in range(n_participants):
        pid = f"p{p:02d}"
        participants.append({
            "id": pid, "study": 2,
            "gender": "male" if rng.random() < 0.55 else "female",
            "age": int(rng.integers(19, 40)),
            "glasses": "true" if rng.random() < 0.4 else "false",
            "device": "synthetic",
            **{f"bfi{i}": int(rng.integers(1, 6)) for i in range(1, 11)},
        })
        order = rng.permutation(12)
        for k, v in enumerate(order):
            video = videos[v]
            activity = activities[k % 3]
            base = {"still": 760, "walking": 600, "running": 480}[activity]
            wish = base + 1.2 * (video["si"] - 60) + rng.normal(0, 140)
            final = min(ladder, key=lambda r: abs(r - wish))
            sessions.append({"participant_id": pid, "video_id": video["id"],
                             "activity": activity, "start_resolution": 360})
            if final != 360:
                t_ms = int(rng.integers(3000, 50000))
                events.append({"participant_id": pid, "video_id": video["id"],
                               "t_ms": t_ms, "new_resolution": final})
    return write_dataset(dirpath, participants, videos, sessions, events)


def synthetic_study1(dirpath, n_participants=22, seed=40):
    """Study-1 counterpart: 4 activities, free start resolutions, no BFI."""
    rng = np.random.default_rng(seed)
    ladder = (144, 240, 360, 480, 720, 1080)
    videos = [{"id": f"w{v:02d}", "study": 1,
               "si": float(np.round(rng.uniform(25, 130), 2)),
               "ti": float(np.round(rng.uniform(5, 30), 2)), "category": ""}
              for v in range(12)]
    participants, sessions, events = [], [], []
    activities = ("still", "walking", "running", "in_vehicle")
    for p in range(n_participants):
        pid = f"q{p:02d}"
        participants.append({
            "id": pid, "study": 1,
            "gender": "male" if rng.random() < 0.6 else "female",
            "age": int(rng.integers(19, 35)),
            "glasses": "true" if rng.random() < 0.3 else "false",
            "device": "synthetic",
        })
        for k, v in enumerate(rng.permutation(12)):
            video = videos[v]
            activity = activities[k % 4]
            base = {"still": 700, "walking": 540, "running": 430,
                    "in_vehicle": 560}[activity]
            wish = base + 2.0 * (video["si"] - 60) * (activity == "running") \
                + rng.normal(0, 170)
            final = min(ladder, key=lambda r: abs(r - wish))
            start = int(rng.choice(ladder))
            sessions.append({"participant_id": pid, "video_id": video["id"],
                             "activity": activity, "start_resolution": start})
            if final != start:
                events.append({"participant_id": pid, "video_id": video["id"],
                               "t_ms": int(rng.integers(2000, 55000)),
                               "new_resolution": final})
    return write_dataset(dirpath, participants, videos, sessions, events)


@pytest.fixture
def sample_dataset_dir():
    return SAMPLE_DATASET


@pytest.fixture
def synthetic_calibration():
    return SYNTHETIC_CALIBRATION


@pytest.fixture(scope="session")
def study2_dir(tmp_path_factory):
    return synthetic_study2(tmp_path_factory.mktemp("study2"))


@pytest.fixture(scope="session")
def study1_dir(tmp_path_factory):
    return synthetic_study1(tmp_path_factory.mktemp("study1"))
