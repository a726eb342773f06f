"""Self-contained synthetic scoring corpus for end-to-end exercises.

Utterances are sequences of amplitude-modulated harmonic tones from a small
set of classes, separated by silence. Each clean utterance is mixed with
white noise at every SNR in a grid, a toy acoustic model is trained on the
clean features, and each degraded utterance gets a surrogate WER: the frame
classification error rate of that model on the degraded features. Everything
is derived from one seed, so regenerating with the same arguments reproduces
the corpus byte for byte.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from . import am, dsp

SAMPLE_RATE = 16000
DEFAULT_SNR_GRID = (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0)

N_TONE_CLASSES = 4
SILENCE_CLASS = 0

# Per-class fundamentals and spectral envelope peaks (Hz). Classes 2 and 3
# share nearby envelope peaks on purpose, so the trained model has a
# confusable pair and its errors carry model-specific structure.
_F0_HZ = (125.0, 185.0, 290.0, 440.0)
_PEAK_HZ = (550.0, 1400.0, 2500.0, 2900.0)
_PEAK_WIDTH_HZ = (350.0, 500.0, 700.0, 800.0)
_MAX_HARMONIC_HZ = 6800.0


def _tone_segment(
    rng: np.random.Generator, tone_class: int, n_samples: int, sample_rate_hz: int
) -> np.ndarray:
    """One amplitude-modulated harmonic tone with the class's spectral envelope, unit peak."""
    f0 = _F0_HZ[tone_class]
    peak = _PEAK_HZ[tone_class]
    width = _PEAK_WIDTH_HZ[tone_class]
    t = np.arange(n_samples) / sample_rate_hz
    signal = np.zeros(n_samples)
    harmonic = 1
    while harmonic * f0 < _MAX_HARMONIC_HZ:
        freq = harmonic * f0
        amp = 1.0 / (1.0 + ((freq - peak) / width) ** 2)
        signal += amp * np.sin(2.0 * np.pi * freq * t + rng.uniform(0.0, 2.0 * np.pi))
        harmonic += 1
    mod_rate = rng.uniform(2.5, 8.0)
    depth = rng.uniform(0.35, 0.6)
    signal *= 1.0 + depth * np.sin(2.0 * np.pi * mod_rate * t + rng.uniform(0.0, 2.0 * np.pi))
    edge = min(int(0.01 * sample_rate_hz), n_samples // 4)
    if edge > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(edge) / edge)
        signal[:edge] *= ramp
        signal[-edge:] *= ramp[::-1]
    return signal / np.abs(signal).max()


def _synth_utterance(
    rng: np.random.Generator,
) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Synthesize one utterance; returns (samples, [(start, end, class), ...])."""
    sr = SAMPLE_RATE
    pieces: list[np.ndarray] = []
    spans: list[tuple[int, int, int]] = []
    cursor = 0

    def silence(duration_s: float) -> None:
        nonlocal cursor
        n = int(duration_s * sr)
        pieces.append(np.zeros(n))
        cursor += n

    silence(rng.uniform(0.10, 0.18))
    for _ in range(int(rng.integers(3, 5))):
        tone_class = int(rng.integers(0, N_TONE_CLASSES))
        n = int(rng.uniform(0.18, 0.30) * sr)
        amplitude = rng.uniform(0.12, 0.22)
        pieces.append(_tone_segment(rng, tone_class, n, sr) * amplitude)
        spans.append((cursor, cursor + n, tone_class + 1))
        cursor += n
        silence(rng.uniform(0.06, 0.12))
    return np.concatenate(pieces), spans


def _frame_labels(
    n_samples: int, spans: Sequence[tuple[int, int, int]], frame_spec: dsp.FrameSpec
) -> np.ndarray:
    """Class of each analysis frame, decided by the sample at the frame center."""
    frame_len = frame_spec.frame_length_samples(SAMPLE_RATE)
    shift = frame_spec.frame_shift_samples(SAMPLE_RATE)
    n_frames = 1 + (n_samples - frame_len) // shift
    centers = frame_len // 2 + shift * np.arange(n_frames)
    labels = np.full(n_frames, SILENCE_CLASS, dtype=np.int64)
    for start, end, tone_class in spans:
        labels[(centers >= start) & (centers < end)] = tone_class
    return labels


def _snr_name(snr_db: float) -> str:
    return f"{snr_db:g}".replace("-", "m").replace(".", "p")


def make_fixture_corpus(
    out_dir: str | Path,
    seed: int = 0,
    snr_grid: Sequence[float] = DEFAULT_SNR_GRID,
    n_utts: int = 20,
    frame_spec: dsp.FrameSpec | None = None,
    mel_spec: dsp.MelSpec | None = None,
    hidden_dims: Sequence[int] = (32,),
    context: int = 2,
    learning_rate: float = 1.0,
    epochs: int = 400,
) -> Path:
    """Generate a scoring corpus under out_dir and return the manifest path.

    Layout: clean/*.wav, degraded/*.wav, labels/*.txt, model.json,
    manifest.csv. The manifest has one row per (utterance, SNR) pair with the
    surrogate WER filled in and tags snr_db, noise_type, se_algo, condition.
    """
    out = Path(out_dir)
    (out / "clean").mkdir(parents=True, exist_ok=True)
    (out / "degraded").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    fspec = frame_spec if frame_spec is not None else dsp.FrameSpec()
    mspec = mel_spec if mel_spec is not None else dsp.MelSpec()
    rng = np.random.default_rng(seed)

    clean_waves: list[dsp.Waveform] = []
    labels: list[np.ndarray] = []
    for u in range(n_utts):
        samples, spans = _synth_utterance(rng)
        dsp.save_wav(dsp.Waveform(samples, SAMPLE_RATE), out / "clean" / f"utt{u:03d}.wav")
        # Re-read so every downstream step sees the quantized file content.
        clean_waves.append(dsp.load_wav(out / "clean" / f"utt{u:03d}.wav"))
        frame_classes = _frame_labels(samples.size, spans, fspec)
        labels.append(frame_classes)
        with open(out / "labels" / f"utt{u:03d}.txt", "w") as fh:
            fh.writelines(f"{c}\n" for c in frame_classes)

    noise = dsp.Waveform(rng.normal(0.0, 1.0, size=int(1.5 * SAMPLE_RATE)), SAMPLE_RATE)

    clean_features = [dsp.mvn(dsp.fbank(w, fspec, mspec)) for w in clean_waves]
    spliced = np.vstack([dsp.splice(f, context, context).values for f in clean_features])
    spliced_matrix = dsp.FeatureMatrix(spliced, "spliced", fspec.frame_shift_ms)
    flat_model = am.train_toy(
        spliced_matrix,
        np.concatenate(labels),
        hidden_dims=hidden_dims,
        activation="sigmoid",
        learning_rate=learning_rate,
        epochs=epochs,
        seed=seed + 1,
        n_classes=N_TONE_CLASSES + 1,
    )
    model = am.AcousticModel(
        layers=flat_model.layers,
        input_dim=clean_features[0].dim,
        n_classes=N_TONE_CLASSES + 1,
        left_context=context,
        right_context=context,
    )
    am.save_model(model, out / "model.json")

    rows: list[dict[str, str]] = []
    for u in range(n_utts):
        for snr_db in snr_grid:
            offset = int(rng.integers(0, noise.samples.size))
            mixed = dsp.mix_at_snr(clean_waves[u], noise, snr_db, offset)
            name = f"utt{u:03d}_snr{_snr_name(snr_db)}.wav"
            dsp.save_wav(mixed, out / "degraded" / name)
            degraded = dsp.load_wav(out / "degraded" / name)
            feats = dsp.mvn(dsp.fbank(degraded, fspec, mspec))
            wer = am.frame_error_rate(model, feats, labels[u])
            rows.append(
                {
                    "utt_id": f"utt{u:03d}_snr{_snr_name(snr_db)}",
                    "clean_path": f"clean/utt{u:03d}.wav",
                    "degraded_path": f"degraded/{name}",
                    "wer": repr(float(wer)),
                    "snr_db": repr(float(snr_db)),
                    "noise_type": "white",
                    "se_algo": "noisy",
                    "condition": "fixture",
                }
            )

    manifest_path = out / "manifest.csv"
    with open(manifest_path, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=[
                "utt_id",
                "clean_path",
                "degraded_path",
                "wer",
                "snr_db",
                "noise_type",
                "se_algo",
                "condition",
            ],
        )
        writer.writeheader()
        writer.writerows(rows)
    return manifest_path
