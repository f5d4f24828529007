import numpy as np
import pytest

from resadapt.errors import ValidationError
from resadapt.video import (DEFAULT_THRESHOLDS, LumaFrame, SiTiThresholds,
                            VideoSequence, Y4mError, classify_siti,
                            classify_values, compute_siti, frame_si, frame_ti,
                            parse_raw, parse_y4m, sobel_magnitude)

from conftest import write_y4m
from naive_siti import naive_profile, naive_sobel, naive_std


def const_frame(w, h, value):
    return LumaFrame(w, h, np.full((h, w), value, dtype=np.uint8))


def seq_of(arrays, rate=25.0):
    return VideoSequence([LumaFrame(a.shape[1], a.shape[0], a) for a in arrays], rate)


# --------------------------------------------------------------------------
# parsing


class TestParseY4m:
    def test_minimal_stream(self):
        w, h = 4, 2
        y0 = bytes(range(8))
        y1 = bytes(range(8, 16))
        chroma = bytes([7]) * 4  # 2 * (2x1) planes for C420
        data = (b"YUV4MPEG2 W4 H2 F25:1 C420\n"
                + b"FRAME\n" + y0 + chroma
                + b"FRAME\n" + y1 + chroma)
        seq = parse_y4m(data)
        assert len(seq.frames) == 2
        assert (seq.width, seq.height) == (4, 2)
        assert seq.frame_rate == 25.0
        assert seq.frames[0].samples.tobytes() == y0
        assert seq.frames[1].samples.tobytes() == y1

    def test_truncated_second_frame(self):
        y = bytes(8)
        chroma = bytes(4)
        data = (b"YUV4MPEG2 W4 H2 F25:1 C420\n"
                + b"FRAME\n" + y + chroma
                + b"FRAME\n" + y + chroma[:-1])
        with pytest.raises(Y4mError, match="truncated frame payload") as err:
            parse_y4m(data)
        assert err.value.offset == len(data)

    def test_c444_roundtrip_against_writer(self):
        rng = np.random.default_rng(11)
        planes = [rng.integers(0, 256, (16, 16), dtype=np.uint8) for _ in range(3)]
        seq = parse_y4m(write_y4m(planes, colorspace="444"))
        assert len(seq.frames) == 3
        for frame, plane in zip(seq.frames, planes):
            assert frame.samples.tobytes() == plane.tobytes()

    def test_reserialize_reparse_identity(self):
        rng = np.random.default_rng(5)
        planes = [rng.integers(0, 256, (8, 8), dtype=np.uint8) for _ in range(4)]
        seq1 = parse_y4m(write_y4m(planes, rate=(30000, 1001), colorspace="422"))
        seq2 = parse_y4m(write_y4m([f.samples for f in seq1.frames],
                                   rate=(30000, 1001), colorspace="422"))
        assert seq1.frame_rate == seq2.frame_rate
        for f1, f2 in zip(seq1.frames, seq2.frames):
            assert np.array_equal(f1.samples, f2.samples)

    def test_frame_rate_fraction(self):
        planes = [np.zeros((4, 4), dtype=np.uint8)]
        seq = parse_y4m(write_y4m(planes, rate=(30000, 1001)))
        assert seq.frame_rate == pytest.approx(29.97002997)

    def test_extra_params_ignored(self):
        planes = [np.zeros((4, 4), dtype=np.uint8)]
        blob = write_y4m(planes, extra_params=("Ip", "A1:1", "XYSCSS=420JPEG"))
        assert len(parse_y4m(blob).frames) == 1

    def test_missing_signature(self):
        with pytest.raises(Y4mError, match="signature") as err:
            parse_y4m(b"JUNK W4 H4 F25:1\nxxxx")
        assert err.value.offset == 0

    def test_unsupported_colorspace(self):
        with pytest.raises(Y4mError, match="unsupported colorspace"):
            parse_y4m(b"YUV4MPEG2 W4 H4 F25:1 Cmono\n" + b"FRAME\n" + bytes(16))

    def test_zero_dimensions(self):
        with pytest.raises(Y4mError, match="zero frame dimensions"):
            parse_y4m(b"YUV4MPEG2 W0 H4 F25:1 C444\n")

    def test_garbage_between_frames(self):
        y = bytes(16)
        data = b"YUV4MPEG2 W4 H4 F25:1 C444\n" + b"FRAME\n" + y * 3 + b"JUNK"
        with pytest.raises(Y4mError, match="FRAME marker") as err:
            parse_y4m(data)
        assert err.value.offset == len(data) - 4

    def test_empty_stream_after_header(self):
        with pytest.raises(Y4mError, match="no frames"):
            parse_y4m(b"YUV4MPEG2 W4 H4 F25:1 C444\n")


class TestParseRaw:
    def test_roundtrip(self):
        rng = np.random.default_rng(2)
        y = rng.integers(0, 256, (6, 4), dtype=np.uint8)
        chroma = bytes(2 * (2 * 3))  # C420 planes
        seq = parse_raw(y.tobytes() + chroma, width=4, height=6, frame_rate=24.0)
        assert len(seq.frames) == 1
        assert np.array_equal(seq.frames[0].samples, y)
        assert seq.frame_rate == 24.0

    def test_truncation(self):
        with pytest.raises(Y4mError, match="truncated"):
            parse_raw(bytes(23), width=4, height=4, colorspace="444")


# --------------------------------------------------------------------------
# SI / TI


class TestSobel:
    def test_constant_frame_zero(self):
        assert np.all(sobel_magnitude(const_frame(5, 5, 128)) == 0)

    def test_hand_convolved_column_step(self):
        frame = LumaFrame(3, 3, np.array([[0, 0, 255]] * 3))
        mag = sobel_magnitude(frame)
        assert mag.shape == (1, 1)
        assert mag[0, 0] == 4 * 255  # |Gx| = 1020, Gy = 0

    def test_rotation_preserves_magnitudes(self):
        rng = np.random.default_rng(9)
        a = rng.integers(0, 256, (6, 7), dtype=np.uint8)
        m1 = sobel_magnitude(LumaFrame(7, 6, a))
        m2 = sobel_magnitude(LumaFrame(7, 6, np.rot90(a, 2).copy()))
        assert sorted(m1.ravel()) == pytest.approx(sorted(m2.ravel()))

    def test_matches_naive_reference(self):
        rng = np.random.default_rng(13)
        a = rng.integers(0, 256, (8, 8), dtype=np.uint8)
        mine = sobel_magnitude(LumaFrame(8, 8, a))
        ref = np.array(naive_sobel(a.tolist()))
        assert np.allclose(mine, ref, rtol=1e-12)

    def test_too_small(self):
        with pytest.raises(ValidationError, match="3x3"):
            sobel_magnitude(const_frame(2, 5, 0))


class TestFrameSi:
    def test_constant_zero(self):
        assert frame_si(const_frame(4, 4, 55)) == 0.0

    def test_single_bright_pixel_against_two_pass_oracle(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        a[1, 2] = 200
        expected = naive_std([v for row in naive_sobel(a.tolist()) for v in row])
        assert frame_si(LumaFrame(4, 4, a)) == pytest.approx(expected, rel=1e-12)

    def test_constant_offset_invariance(self):
        rng = np.random.default_rng(4)
        a = rng.integers(0, 200, (6, 6), dtype=np.uint8)  # headroom for +10
        assert frame_si(LumaFrame(6, 6, a)) == pytest.approx(
            frame_si(LumaFrame(6, 6, a + 10)), rel=1e-12)


class TestFrameTi:
    def test_identical_frames(self):
        a = np.arange(16, dtype=np.uint8).reshape(4, 4)
        assert frame_ti(LumaFrame(4, 4, a), LumaFrame(4, 4, a)) == 0.0

    def test_constant_difference(self):
        assert frame_ti(const_frame(4, 4, 0), const_frame(4, 4, 255)) == 0.0

    def test_checkerboard_inversion(self):
        board = (np.indices((4, 4)).sum(axis=0) % 2 * 255).astype(np.uint8)
        prev = LumaFrame(4, 4, board)
        curr = LumaFrame(4, 4, 255 - board)
        # balanced +-255 differences: std of a symmetric two-point distribution
        assert frame_ti(prev, curr) == 255.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError, match="differ"):
            frame_ti(const_frame(4, 4, 0), const_frame(5, 4, 0))


class TestComputeSiti:
    def test_constant_video_all_zero(self):
        seq = seq_of([np.full((5, 5), 100, dtype=np.uint8)] * 5)
        profile = compute_siti(seq)
        assert profile.si_max == profile.si_mean == 0.0
        assert profile.ti_max == profile.ti_mean == 0.0

    def test_single_frame_ti_undefined(self):
        profile = compute_siti(seq_of([np.zeros((5, 5), dtype=np.uint8)]))
        assert profile.si_series and profile.ti_series == []
        assert profile.ti_max is None and profile.ti_mean is None
        assert not profile.ti_defined

    def test_moving_bar_matches_naive_reference(self):
        frames = []
        for n in range(10):
            a = np.zeros((8, 8), dtype=np.uint8)
            a[:, (n % 6) + 1] = 250
            frames.append(a)
        profile = compute_siti(seq_of(frames))
        ref = naive_profile([a.tolist() for a in frames])
        assert profile.si_max == pytest.approx(ref["si_max"], rel=1e-12)
        assert profile.si_mean == pytest.approx(ref["si_mean"], rel=1e-9)
        assert profile.ti_max == pytest.approx(ref["ti_max"], rel=1e-12)
        assert profile.ti_mean == pytest.approx(ref["ti_mean"], rel=1e-9)

    def test_threaded_equals_sequential(self):
        rng = np.random.default_rng(17)
        frames = [rng.integers(0, 256, (8, 8), dtype=np.uint8) for _ in range(12)]
        a = compute_siti(seq_of(frames))
        b = compute_siti(seq_of(frames), threads=4)
        assert a.si_series == b.si_series
        assert a.ti_series == b.ti_series
        assert a.si_mean == b.si_mean and a.ti_mean == b.ti_mean

    def test_frame_reversal_properties(self):
        rng = np.random.default_rng(23)
        frames = [rng.integers(0, 256, (8, 8), dtype=np.uint8) for _ in range(6)]
        fwd = compute_siti(seq_of(frames))
        rev = compute_siti(seq_of(frames[::-1]))
        assert rev.si_series == fwd.si_series[::-1]
        assert rev.ti_max == pytest.approx(fwd.ti_max, rel=1e-12)
        assert rev.ti_mean == pytest.approx(fwd.ti_mean, rel=1e-12)

    def test_mean_bounded_by_max(self):
        rng = np.random.default_rng(29)
        for _ in range(25):
            frames = [rng.integers(0, 256, (8, 8), dtype=np.uint8) for _ in range(5)]
            p = compute_siti(seq_of(frames))
            assert 0.0 <= p.si_mean <= p.si_max
            assert 0.0 <= p.ti_mean <= p.ti_max

    def test_constant_offset_invariance(self):
        rng = np.random.default_rng(31)
        frames = [rng.integers(0, 200, (8, 8), dtype=np.uint8) for _ in range(4)]
        p1 = compute_siti(seq_of(frames))
        p2 = compute_siti(seq_of([f + 10 for f in frames]))
        assert p1.si_series == pytest.approx(p2.si_series, rel=1e-12)
        assert p1.ti_series == pytest.approx(p2.ti_series, rel=1e-12)


class TestClassify:
    def test_paper_low_low(self):
        assert classify_values(8.77, 3.68).label == "LowSiLowTi"

    def test_paper_high_low(self):
        assert classify_values(138.69, 8.30).label == "HighSiLowTi"

    def test_mid_band(self):
        assert classify_values(70, 15).label == "Mid"

    def test_boundaries_inclusive(self):
        assert classify_values(40, 10).label == "LowSiLowTi"
        assert classify_values(110, 25).label == "HighSiHighTi"

    def test_profile_agg_flag(self):
        profile = compute_siti(seq_of(
            [np.zeros((5, 5), dtype=np.uint8), np.zeros((5, 5), dtype=np.uint8)]))
        assert classify_siti(profile).label == "LowSiLowTi"
        assert classify_siti(profile, agg="max").label == "LowSiLowTi"
        with pytest.raises(ValidationError):
            classify_siti(profile, agg="median")

    def test_single_frame_rejected(self):
        profile = compute_siti(seq_of([np.zeros((5, 5), dtype=np.uint8)]))
        with pytest.raises(ValidationError, match="undefined"):
            classify_siti(profile)

    def test_threshold_ordering_enforced(self):
        with pytest.raises(ValidationError):
            SiTiThresholds(si_low=110, si_high=40)

    def test_default_thresholds(self):
        t = DEFAULT_THRESHOLDS
        assert (t.si_low, t.si_high, t.ti_low, t.ti_high) == (40, 110, 10, 25)
