import struct

import numpy as np
import pytest

from uimvdr.fileio import (
    FileFormatError,
    SceneManifest,
    append_report,
    read_geometry,
    read_manifest,
    read_mask_file,
    read_report,
    read_wav,
    write_geometry,
    write_manifest,
    write_mask_file,
    write_wav,
)
from uimvdr.metrics import MetricReport
from uimvdr.scene import SceneSpec, SourceSpec, preset, synth_source
from uimvdr.signal import Waveform


class TestWav:
    def test_float32_bit_exact(self, tmp_path, rng):
        x = rng.standard_normal((3, 1000)).astype(np.float32).astype(np.float64)
        write_wav(tmp_path / "a.wav", Waveform(x, 16000))
        back = read_wav(tmp_path / "a.wav")
        assert back.sample_rate == 16000
        assert np.array_equal(back.samples, x)

    def test_pcm16_quantisation_bound(self, tmp_path, rng):
        x = rng.uniform(-0.99, 0.99, size=(2, 2000))
        write_wav(tmp_path / "a.wav", Waveform(x), encoding="pcm16")
        back = read_wav(tmp_path / "a.wav").samples
        assert np.max(np.abs(back - x)) <= 2.0**-15

    def test_pcm16_clips(self, tmp_path):
        write_wav(tmp_path / "a.wav", Waveform(np.array([2.0, -2.0])), encoding="pcm16")
        np.testing.assert_array_equal(read_wav(tmp_path / "a.wav").samples, [[32767 / 32768, -1.0]])

    def test_sixteen_channels_keep_order(self, tmp_path):
        x = np.repeat(np.arange(16, dtype=np.float64)[:, None] / 16.0, 50, axis=1)
        write_wav(tmp_path / "a.wav", Waveform(x))
        np.testing.assert_array_equal(read_wav(tmp_path / "a.wav").samples, x)

    def test_mono(self, tmp_path):
        write_wav(tmp_path / "a.wav", Waveform(np.full(10, 0.25)))
        assert read_wav(tmp_path / "a.wav").samples.shape == (1, 10)

    def test_truncated(self, tmp_path, rng):
        write_wav(tmp_path / "a.wav", Waveform(rng.standard_normal((2, 1000))))
        raw = (tmp_path / "a.wav").read_bytes()
        (tmp_path / "b.wav").write_bytes(raw[: len(raw) // 2 + 3])
        with pytest.raises(FileFormatError):
            read_wav(tmp_path / "b.wav")

    def test_garbage(self, tmp_path):
        (tmp_path / "a.wav").write_bytes(b"not a wav file at all")
        with pytest.raises(FileFormatError):
            read_wav(tmp_path / "a.wav")

    def test_unsupported_format(self, tmp_path):
        from scipy.io import wavfile

        wavfile.write(tmp_path / "a.wav", 16000, np.zeros(10, dtype=np.int32))
        with pytest.raises(FileFormatError, match="unsupported"):
            read_wav(tmp_path / "a.wav")

    def test_bad_encoding(self, tmp_path):
        with pytest.raises(ValueError):
            write_wav(tmp_path / "a.wav", Waveform(np.zeros(4)), encoding="mp3")


class TestMaskFile:
    def test_round_trip_identity(self, tmp_path, rng):
        layers = rng.uniform(size=(3, 7, 5)).astype(np.float32)
        write_mask_file(tmp_path / "m.umsk", layers)
        got = read_mask_file(tmp_path / "m.umsk")
        assert got.clamped == 0
        assert np.array_equal(got.layers, layers)

    def test_header_layout(self, tmp_path):
        write_mask_file(tmp_path / "m.umsk", np.zeros((2, 3)))
        raw = (tmp_path / "m.umsk").read_bytes()
        assert raw[:5] == b"UMSK1"
        assert struct.unpack("<HIII", raw[5:19]) == (1, 2, 3, 1)
        assert len(raw) == 19 + 4 * 6

    def test_out_of_range_clamped(self, tmp_path):
        write_mask_file(tmp_path / "m.umsk", np.array([[-0.5, 0.5, 1.5]]))
        got = read_mask_file(tmp_path / "m.umsk")
        assert got.clamped == 2
        np.testing.assert_array_equal(got.layers[0], [[0.0, 0.5, 1.0]])

    def test_nan_rejected(self, tmp_path):
        write_mask_file(tmp_path / "m.umsk", np.array([[np.nan]]))
        with pytest.raises(FileFormatError, match="NaN"):
            read_mask_file(tmp_path / "m.umsk")

    def test_bad_magic(self, tmp_path):
        write_mask_file(tmp_path / "m.umsk", np.zeros((1, 1)))
        raw = bytearray((tmp_path / "m.umsk").read_bytes())
        raw[0:5] = b"XXXXX"
        (tmp_path / "m.umsk").write_bytes(bytes(raw))
        with pytest.raises(FileFormatError, match="magic"):
            read_mask_file(tmp_path / "m.umsk")

    @pytest.mark.parametrize("cut", [3, 19, 25])
    def test_truncated(self, tmp_path, cut):
        write_mask_file(tmp_path / "m.umsk", np.zeros((2, 2)))
        raw = (tmp_path / "m.umsk").read_bytes()
        (tmp_path / "m.umsk").write_bytes(raw[:cut])
        with pytest.raises(FileFormatError):
            read_mask_file(tmp_path / "m.umsk")


class TestGeometry:
    @pytest.mark.parametrize("name", ["respeaker", "kinect", "16sounds"])
    def test_round_trip(self, tmp_path, name):
        g = preset(name)
        write_geometry(tmp_path / "g.txt", g)
        assert read_geometry(tmp_path / "g.txt") == g

    def test_errors(self, tmp_path):
        (tmp_path / "g.txt").write_text("mic=1 2\n")
        with pytest.raises(FileFormatError, match="3 coordinates"):
            read_geometry(tmp_path / "g.txt")
        (tmp_path / "g.txt").write_text("name=empty\n")
        with pytest.raises(FileFormatError, match="no microphones"):
            read_geometry(tmp_path / "g.txt")


class TestManifest:
    def _manifest(self):
        srcs = (
            SourceSpec(synth_source(5, 800), 45.0, 0.0, 1.25, "target"),
            SourceSpec(synth_source(6, 800), 270.0, 10.0, -3.5, ""),
        )
        spec = SceneSpec(preset("kinect"), srcs, 16000, 340.0, 77)
        return SceneManifest(spec, 800, ("synth:5", "synth:6"), ("stem_00.wav", "stem_01.wav"))

    def test_round_trip(self, tmp_path):
        m = self._manifest()
        write_manifest(tmp_path / "manifest.txt", m)
        back = read_manifest(tmp_path / "manifest.txt")
        assert back.signals == m.signals
        assert back.stem_files == m.stem_files
        assert back.spec.geometry == m.spec.geometry
        assert back.spec.seed == 77 and back.spec.speed_of_sound == 340.0
        for a, b in zip(back.spec.sources, m.spec.sources):
            assert (a.azimuth, a.elevation, a.gain_db, a.label) == (b.azimuth, b.elevation, b.gain_db, b.label)
            np.testing.assert_array_equal(a.wave.samples, b.wave.samples)

    def test_file_signal(self, tmp_path):
        x = synth_source(1, 800)
        write_wav(tmp_path / "src.wav", x)
        m = self._manifest()
        m = SceneManifest(m.spec, 800, ("file:src.wav", "synth:6"))
        write_manifest(tmp_path / "manifest.txt", m)
        back = read_manifest(tmp_path / "manifest.txt")
        np.testing.assert_allclose(back.spec.sources[0].wave.samples, x.samples, atol=1e-6)

    def test_wrong_format(self, tmp_path):
        (tmp_path / "manifest.txt").write_text("format=other\n")
        with pytest.raises(FileFormatError):
            read_manifest(tmp_path / "manifest.txt")

    def test_malformed_source_line(self, tmp_path):
        write_manifest(tmp_path / "manifest.txt", self._manifest())
        text = (tmp_path / "manifest.txt").read_text().replace("azimuth=45.0", "azimuth=north")
        (tmp_path / "manifest.txt").write_text(text)
        with pytest.raises(FileFormatError):
            read_manifest(tmp_path / "manifest.txt")


def test_report_append_and_read(tmp_path):
    path = tmp_path / "report.txt"
    append_report(path, MetricReport(1.5, 0.5, "a"))
    append_report(path, MetricReport(2.5, None, "b"))
    got = read_report(path)
    assert [r.scene_id for r in got] == ["a", "b"]
    assert got[0].si_sdri == pytest.approx(0.5) and got[1].si_sdri is None
