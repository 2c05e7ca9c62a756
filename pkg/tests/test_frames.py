"""Plane containers, file I/O and quality metrics."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fvstream import (FramePlane, PlaneError, QualityReport, ViewFrame,
                      load_plane, load_pgm, load_yuv420_luma, mean_abs_error,
                      mse, psnr, save_pgm, save_plane, save_yuv420_luma)


def plane(value, shape=(16, 16)):
    return np.full(shape, value, dtype=np.uint8)


class TestFramePlane:
    def test_accepts_aligned_uint8(self):
        p = FramePlane(plane(7, (32, 48)))
        assert (p.height, p.width) == (32, 48)
        assert p.mb_grid == (2, 3)

    def test_accepts_integer_arrays_in_range(self):
        p = FramePlane(np.full((16, 16), 200, dtype=np.int32))
        assert p.samples.dtype == np.uint8

    @pytest.mark.parametrize("shape", [(15, 16), (16, 17), (0, 16), (16,)])
    def test_rejects_misaligned_shapes(self, shape):
        with pytest.raises(PlaneError):
            FramePlane(np.zeros(shape, dtype=np.uint8))

    def test_rejects_out_of_range_values(self):
        with pytest.raises(PlaneError):
            FramePlane(np.full((16, 16), 256, dtype=np.int32))
        with pytest.raises(PlaneError):
            FramePlane(np.full((16, 16), -1, dtype=np.int32))

    def test_copy_is_independent(self):
        p = FramePlane(plane(3))
        q = p.copy()
        q.samples[0, 0] = 99
        assert p.samples[0, 0] == 3
        assert not p.same_as(q)

    def test_view_frame_checks_shapes(self):
        t = FramePlane(plane(1))
        d = FramePlane(plane(1, (16, 32)))
        with pytest.raises(ValueError):
            ViewFrame(0, 0, t, d)
        with pytest.raises(ValueError):
            ViewFrame(2, 0, t, t)


class TestMetrics:
    @pytest.mark.example
    def test_psnr_of_identical_planes_is_capped(self):
        assert psnr(plane(128), plane(128)) == 99.0

    @pytest.mark.example
    def test_psnr_of_constant_offset_16(self):
        # MSE 256 exactly; 10*log10(255^2/256) = 24.0483... dB
        a, b = plane(0), plane(16)
        assert mse(a, b) == 256.0
        expected = 10.0 * math.log10(255.0 * 255.0 / 256.0)
        assert psnr(a, b) == pytest.approx(expected, abs=1e-12)
        assert psnr(a, b) == pytest.approx(24.048, abs=5e-4)

    @pytest.mark.example
    def test_psnr_zero_db_needs_mse_above_peak(self):
        # psnr hits 0 only when MSE reaches 255^2
        assert psnr(plane(0), plane(255)) == pytest.approx(0.0, abs=1e-12)

    def test_mean_abs_error(self):
        a = np.zeros((16, 16), dtype=np.uint8)
        b = a.copy()
        b[0, :4] = 8
        assert mean_abs_error(a, b) == pytest.approx(32 / 256)

    def test_metrics_reject_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse(plane(0), plane(0, (16, 32)))

    @given(st.integers(0, 255), st.integers(0, 255))
    def test_psnr_symmetric_and_bounded(self, u, v):
        a, b = plane(u), plane(v)
        assert psnr(a, b) == psnr(b, a)
        assert 0.0 <= psnr(a, b) <= 99.0

    def test_quality_report_averages(self):
        ref = [plane(10), plane(10)]
        out = [plane(10), plane(26)]
        rep = QualityReport.from_sequences(ref, out)
        assert rep.frame_psnr[0] == 99.0
        assert rep.frame_mae == [0.0, 16.0]
        assert rep.average_psnr == pytest.approx(
            (99.0 + 10.0 * math.log10(255.0 ** 2 / 256.0)) / 2)

    def test_quality_report_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            QualityReport.from_sequences([plane(0)], [])


class TestPlaneIO:
    def test_pgm_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        arr = rng.integers(0, 256, (32, 16), dtype=np.uint8)
        path = tmp_path / "p.pgm"
        save_pgm(path, arr)
        back = load_pgm(path)
        assert np.array_equal(back.samples, arr)

    def test_pgm_header_comments_are_skipped(self, tmp_path):
        arr = plane(9)
        path = tmp_path / "c.pgm"
        body = b"P5\n# a comment\n16 # inline\n16\n255\n" + arr.tobytes()
        path.write_bytes(body)
        assert np.array_equal(load_pgm(path).samples, arr)

    def test_pgm_rejects_wrong_magic_and_maxval(self, tmp_path):
        path = tmp_path / "bad.pgm"
        path.write_bytes(b"P2\n16 16\n255\n" + bytes(256))
        with pytest.raises(PlaneError):
            load_pgm(path)
        path.write_bytes(b"P5\n16 16\n65535\n" + bytes(512))
        with pytest.raises(PlaneError):
            load_pgm(path)

    def test_pgm_rejects_truncated_payload(self, tmp_path):
        path = tmp_path / "t.pgm"
        path.write_bytes(b"P5\n16 16\n255\n" + bytes(100))
        with pytest.raises(PlaneError):
            load_pgm(path)

    def test_yuv420_round_trip_with_frame_index(self, tmp_path):
        rng = np.random.default_rng(6)
        frames = [rng.integers(0, 256, (16, 32), dtype=np.uint8) for _ in range(3)]
        path = tmp_path / "seq.yuv"
        save_yuv420_luma(path, frames[0])
        for f in frames[1:]:
            save_yuv420_luma(path, f, append=True)
        for i, f in enumerate(frames):
            got = load_yuv420_luma(path, 32, 16, frame_index=i)
            assert np.array_equal(got.samples, f)
        with pytest.raises(PlaneError):
            load_yuv420_luma(path, 32, 16, frame_index=3)

    def test_generic_loader_dispatch(self, tmp_path):
        arr = plane(77)
        pg = tmp_path / "x.pgm"
        save_plane(pg, arr, "pgm")
        assert np.array_equal(load_plane(pg).samples, arr)
        yv = tmp_path / "x.yuv"
        save_plane(yv, arr, "yuv420")
        got = load_plane(yv, "yuv420", width=16, height=16)
        assert np.array_equal(got.samples, arr)
        with pytest.raises(PlaneError):
            load_plane(yv, "yuv420")
        with pytest.raises(PlaneError):
            load_plane(pg, "bmp")
