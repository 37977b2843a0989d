import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emgtrf.errors import FormatError
from emgtrf.features import PhonemeAlignment
from emgtrf.io import MAGIC, read_alignment, read_series, write_alignment, write_series
from emgtrf.series import MultiChannelSeries

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@pytest.mark.parametrize("suffix", [".tsv", ".trf"])
def test_series_round_trip(tmp_path, rng, suffix):
    s = MultiChannelSeries(rng.normal(size=(37, 3)) * 1e3, 2000.0, ("a", "b", "c"))
    p = write_series(tmp_path / f"x{suffix}", s)
    back = read_series(p)
    np.testing.assert_array_equal(back.data, s.data)
    assert back.channel_names == s.channel_names and back.sample_rate_hz == 2000.0


@settings(max_examples=30)
@given(st.lists(st.lists(finite, min_size=2, max_size=2), min_size=1, max_size=20))
def test_text_round_trip_exact(tmp_path_factory, rows):
    s = MultiChannelSeries(np.array(rows), 50.0)
    p = write_series(tmp_path_factory.mktemp("io") / "x.tsv", s)
    np.testing.assert_array_equal(read_series(p).data, s.data)


def test_text_layout(tmp_path):
    s = MultiChannelSeries(np.array([[1.0, 2.5], [3.0, -4.0]]), 50.0, ("ch1", "ch2"))
    text = write_series(tmp_path / "x.tsv", s).read_text()
    assert text.splitlines()[0] == "# rate_hz=50.0 channels=ch1,ch2"
    assert text.splitlines()[1] == "1.0\t2.5"


def test_binary_layout(tmp_path):
    s = MultiChannelSeries(np.array([[1.0], [2.0]]), 50.0)
    raw = write_series(tmp_path / "x.bin", s).read_bytes()
    assert raw[:4] == MAGIC
    n = int.from_bytes(raw[4:8], "little")
    assert raw[8:8 + n] == b"rate_hz=50.0 channels=ch1"
    np.testing.assert_array_equal(np.frombuffer(raw[8 + n:], "<f8"), [1.0, 2.0])


def test_empty_series(tmp_path):
    s = MultiChannelSeries(np.zeros((0, 2)), 50.0)
    assert read_series(write_series(tmp_path / "e.tsv", s)).data.shape == (0, 2)


@pytest.mark.parametrize("content", [
    "1.0\t2.0\n",                                        # no header
    "# rate_hz=50 channels=a,b\n1.0\tx\n",               # non-numeric
    "# rate_hz=50 channels=a,b\n1.0\t2.0\t3.0\n",        # ragged
    "# channels=a,b\n1.0\t2.0\n",                        # no rate
    "# rate_hz=50 channels=a\nnan\n",                    # non-finite
])
def test_bad_text(tmp_path, content):
    p = tmp_path / "bad.tsv"
    p.write_text(content)
    with pytest.raises(FormatError):
        read_series(p)


def test_truncated_binary(tmp_path):
    s = MultiChannelSeries(np.ones((4, 3)), 50.0)
    p = write_series(tmp_path / "x.trf", s)
    p.write_bytes(p.read_bytes()[:-5])
    with pytest.raises(FormatError):
        read_series(p)
    p.write_bytes(MAGIC + b"\x01")
    with pytest.raises(FormatError):
        read_series(p)


def test_missing_file(tmp_path):
    with pytest.raises(FormatError):
        read_series(tmp_path / "nope.tsv")


def test_bad_channel_name(tmp_path):
    with pytest.raises(FormatError):
        write_series(tmp_path / "x.tsv", MultiChannelSeries(np.ones((2, 1)), 50.0, ("a b",)))


class TestAlignment:
    def test_round_trip(self, tmp_path):
        a = PhonemeAlignment(((0.0, 0.12, "SIL"), (0.12, 0.3, "AA"), (0.3, 0.41, "B")), "u1")
        p = write_alignment(tmp_path / "u1.tsv", a)
        back = read_alignment(p)
        assert back.spans == a.spans and back.utterance_id == "u1"

    def test_headerless(self, tmp_path):
        p = tmp_path / "u.tsv"
        p.write_text("0.0\t0.1\tAA\n0.1\t0.2\tB\n")
        assert len(read_alignment(p).spans) == 2

    @pytest.mark.parametrize("content", ["0.0\t0.1\n", "start_s\tend_s\tlabel\n0.0\tx\tAA\n",
                                         "0.0\t0.2\tAA\n0.1\t0.3\tB\n"])
    def test_bad(self, tmp_path, content):
        p = tmp_path / "u.tsv"
        p.write_text(content)
        with pytest.raises(FormatError):
            read_alignment(p)
