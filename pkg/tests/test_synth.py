import numpy as np
import pytest

from emgtrf.crossval import GridSpec, make_folds, run_encoding
from emgtrf.dtw import align_to_reference
from emgtrf.features import PhonemeInventory, SPARC_COLUMNS, densify_phonemes
from emgtrf.io import read_alignment, read_series
from emgtrf.series import MultiChannelSeries
from emgtrf.solver import ElasticNetConfig
from emgtrf.synth import (ModeEffect, SynthSpec, _span_lengths, generate_subject, synthesize_emg,
                          time_warp_jitter, write_dataset)

ONE = GridSpec(alphas=(1e-2,), lambdas=(0.1,))


@pytest.fixture(scope="module")
def small():
    return generate_subject(SynthSpec(n_sentences=6, seed=3), "S01")


class TestWarp:
    def test_zero_strength_identity(self, rng):
        x = rng.normal(size=(50, 3))
        out, pos = time_warp_jitter(x, 0.0, 1)
        np.testing.assert_array_equal(out, x)
        np.testing.assert_array_equal(pos, np.arange(50))

    @pytest.mark.parametrize("strength", [0.05, 0.2, 0.3])
    def test_monotone_and_bounded(self, rng, strength):
        for seed in range(10):
            _, pos = time_warp_jitter(rng.normal(size=120), strength, seed)
            step = np.diff(pos)
            assert pos[0] == 0 and pos[-1] <= 119
            assert np.all(step > 0)
            assert np.all(np.abs(step - 1) <= strength + 1e-12)

    def test_invalid_strength(self):
        with pytest.raises(ValueError):
            time_warp_jitter(np.zeros(10), 0.5, 0)

    def test_dtw_undoes_warp(self):
        t = np.arange(150) / 50.0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = np.column_stack([np.sin(2 * np.pi * f * t + rng.uniform(0, 6)) for f in (0.8, 1.3, 2.1)])
            w, _ = time_warp_jitter(x, 0.2, seed)
            n = min(len(w), len(x))
            before = np.mean([np.corrcoef(w[:n, c], x[:n, c])[0, 1] for c in range(3)])
            aligned, _ = align_to_reference(MultiChannelSeries(w, 50.0), MultiChannelSeries(x, 50.0))
            after = np.mean([np.corrcoef(aligned.data[:, c], x[:, c])[0, 1] for c in range(3)])
            assert after > before


class TestSubject:
    def test_deterministic(self, small):
        again = generate_subject(SynthSpec(n_sentences=6, seed=3), "S01")
        np.testing.assert_array_equal(small.kernels, again.kernels)
        for a, b in zip(small.utterances, again.utterances):
            assert a.alignment == b.alignment
            np.testing.assert_array_equal(a.sparc.data, b.sparc.data)
            for m in a.envelopes:
                np.testing.assert_array_equal(a.envelopes[m].data, b.envelopes[m].data)

    def test_subjects_differ(self, small):
        other = generate_subject(SynthSpec(n_sentences=6, seed=3), "S02")
        assert not np.array_equal(small.kernels, other.kernels)

    def test_shapes(self, small):
        assert small.kernels.shape == (8, 12, 31)
        for utt in small.utterances:
            assert utt.sparc.feature_names == SPARC_COLUMNS
            n = utt.sparc.n_frames
            assert utt.envelopes["aloud"].data.shape == (n, 8)
            for mode in ("mimed", "subvocal"):
                assert abs(utt.envelopes[mode].n_samples - n) <= 0.15 * n + 2

    def test_kernels_inside_window(self, small):
        lags = small.lag.lags_ms
        energy = np.abs(small.kernels).sum(axis=(0, 1))
        assert energy[0] < 0.05 * energy.max() and energy[-1] < 0.05 * energy.max()
        assert np.all(lags.min() >= -300) and np.all(lags.max() <= 300)

    def test_spans(self, small):
        inv = PhonemeInventory()
        for utt in small.utterances:
            spans = utt.alignment.spans
            assert inv.is_silence(spans[0][2]) and inv.is_silence(spans[-1][2])
            inner = spans[1:-1]
            assert all(0.06 - 1e-9 <= e - s <= 0.2 + 1e-9 for s, e, _ in inner)
            assert all(not inv.is_silence(lab) for _, _, lab in inner)
            # contiguous tiling of the whole utterance
            assert all(abs(a[1] - b[0]) < 1e-9 for a, b in zip(spans, spans[1:]))
            p = densify_phonemes(utt.alignment, inv, utt.sparc.n_frames)
            assert p.n_frames == utt.sparc.n_frames

    def test_span_lengths_tile_speech(self):
        spec = SynthSpec()
        for seed in range(300):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(40, 200))
            out = _span_lengths(n, spec, rng)
            assert sum(out) == n and min(out) >= 3 and max(out) <= 10
        mean = np.mean(_span_lengths(100000, spec, np.random.default_rng(0)))
        assert 5.0 < mean < 7.0   # about 120 ms

    def test_silent_modes_drop_laryngeal(self, small):
        t = small.encoding_trials("mimed")
        assert t[0].features["A"].shape[1] == 12
        assert small.encoding_trials("aloud")[0].features["A"].shape[1] == 14

    def test_noiseless_recovery(self):
        subj = generate_subject(SynthSpec(n_sentences=10, snr_db=np.inf, seed=1), "S01")
        trials = subj.encoding_trials("aloud")
        plan = make_folds([t.sentence_id for t in trials], 5, 0)
        res = run_encoding(trials, "A", plan, grid=GridSpec(alphas=(1e-3,), lambdas=(0.1,)),
                           cfg=ElasticNetConfig(max_iter=300), n_permutations=0)
        assert min(r.r_mean_fisher for r in res) > 0.99

    def test_null_subject(self):
        subj = generate_subject(SynthSpec(n_sentences=4, null=True, seed=1), "S01")
        utt = subj.utterances[0]
        env = utt.envelopes["aloud"].data
        assert abs(np.mean(env)) < 0.2 and 0.8 < np.std(env) < 1.2

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            SynthSpec(n_artic_features=10)
        with pytest.raises(ValueError):
            SynthSpec(mode_effects={"shouted": ModeEffect()})


class TestFiles:
    def test_emg_recovers_envelope(self):
        from emgtrf.preprocess import emg_to_envelope
        t = np.arange(200) / 50.0
        env = MultiChannelSeries(np.column_stack([np.sin(2 * np.pi * 0.5 * t), np.cos(2 * np.pi * 0.7 * t)]), 50.0)
        raw = synthesize_emg(env, 0)
        assert raw.sample_rate_hz == 2000.0 and raw.n_samples == 200 * 40
        back = emg_to_envelope(raw)
        assert back.n_samples == 200
        for c in range(2):
            assert np.corrcoef(back.data[10:-10, c], env.data[10:-10, c])[0, 1] > 0.8

    def test_write_dataset(self, tmp_path):
        subj = generate_subject(SynthSpec(n_sentences=2, seed=0), "S07")
        root = write_dataset([subj], tmp_path / "data")
        utt = subj.utterances[0]
        base = root / "S07"
        sparc = read_series(base / "sparc" / f"{utt.trial_id}.tsv")
        np.testing.assert_array_equal(sparc.data, utt.sparc.data)
        assert read_alignment(base / "align" / f"{utt.trial_id}.tsv").spans == utt.alignment.spans
        for mode in ("aloud", "mimed", "subvocal"):
            raw = read_series(base / "emg" / mode / f"{utt.trial_id}.trf")
            assert raw.n_samples == utt.envelopes[mode].n_samples * 40
