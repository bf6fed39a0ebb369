"""Regenerate MFCC reference fixtures with librosa.

Run from this directory: python3 generate.py
Parameters mirror DspConfig::default() (22050 Hz, n_fft 2048, hop 512,
40 Slaney-normalized mel bands, 13 coefficients, centered reflect padding).
"""

import numpy as np
import librosa

SR = 22050
MEL = dict(sr=SR, n_fft=2048, hop_length=512, n_mels=40, center=True,
           pad_mode="reflect", power=2.0, htk=False, norm="slaney",
           dtype=np.float64)


def write(name, m):
    m = np.ascontiguousarray(np.atleast_2d(m), dtype="<f8")
    with open(name, "wb") as fh:
        fh.write(f"MFCC-FIXTURE v1, {m.shape[0]}, {m.shape[1]}\n".encode())
        fh.write(m.tobytes())


def f32(y):
    return y.astype(np.float32).astype(np.float64)


t = np.arange(SR) / SR
signals = {
    "sine": f32(0.5 * np.sin(2 * np.pi * 440.0 * t)),
    "noise": f32(np.random.default_rng(1234).uniform(-0.3, 0.3, SR)),
    "chirp": f32(0.4 * np.sin(2 * np.pi * (100.0 * t + 0.5 * 7900.0 * t ** 2))),
    "short": f32(0.5 * np.sin(2 * np.pi * 440.0 * np.arange(551) / SR)),
}

for name, y in signals.items():
    write(f"{name}_input.fix", y[:, None])
    mel_power = librosa.feature.melspectrogram(y=y, **MEL)
    db = librosa.power_to_db(mel_power, ref=1.0, amin=1e-10, top_db=80.0)
    coeffs = librosa.feature.mfcc(S=db, n_mfcc=13, dct_type=2, norm="ortho")
    write(f"{name}_mfcc.fix", coeffs.T)

mel = librosa.filters.mel(sr=SR, n_fft=2048, n_mels=40, fmin=0.0, fmax=None,
                          htk=False, norm="slaney", dtype=np.float64)
write("mel_40x1025.fix", mel)
print("librosa", librosa.__version__)
