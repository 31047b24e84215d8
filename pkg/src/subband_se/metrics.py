"""Scale-invariant signal-to-distortion ratio."""

from __future__ import annotations

import numpy as np

SI_SDR_CAP = 100.0


def si_sdr(estimate, reference, cap=SI_SDR_CAP) -> float:
    """SI-SDR in dB, clamped to ``[-cap, cap]``.

    A perfect (scaled) reconstruction returns ``cap``; an estimate with no
    component along the reference returns ``-cap``.
    """
    est = np.asarray(getattr(estimate, "samples", estimate), dtype=np.float64)
    ref = np.asarray(getattr(reference, "samples", reference), dtype=np.float64)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    ref_energy = np.dot(ref, ref)
    if ref_energy == 0.0:
        raise ValueError("reference signal is silent")
    alpha = np.dot(est, ref) / ref_energy
    target = alpha * ref
    residual = est - target
    num = np.dot(target, target)
    den = np.dot(residual, residual)
    if num == 0.0:
        return float(-cap)
    if den <= num * 10.0 ** (-cap / 10.0):
        return float(cap)
    return float(max(10.0 * np.log10(num / den), -cap))


def si_sdr_improvement(enhanced, noisy, reference) -> float:
    return si_sdr(enhanced, reference) - si_sdr(noisy, reference)
