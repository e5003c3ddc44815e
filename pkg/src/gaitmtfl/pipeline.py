"""Trial-to-features orchestration.

Wires normalization, contact detection, cycle segmentation, phase
detection and swing identification into per-trial feature extraction,
with per-trial rejection handling and optional process parallelism.
Per-trial randomness (mixture seeding) derives from the configured seed
and the trial's position in the input order, so results do not depend on
the worker count.
"""

from dataclasses import dataclass

import numpy as np

from .data import normalize_by_weight, validate_trial
from .errors import DomainError, GaitError
from .features import build_dataset, extract_feature_vector
from .segmentation import (
    DEFAULT_CONTACT_THRESHOLD,
    DEFAULT_HYSTERESIS,
    GMM_RESTARTS,
    detect_contact,
    detect_phases_baseline,
    identify_swing,
    segment_cycles,
)


@dataclass(frozen=True)
class ExtractionConfig:
    contact_threshold: float = DEFAULT_CONTACT_THRESHOLD
    hysteresis: float = DEFAULT_HYSTERESIS
    k_min: int = 2
    k_max: int = 12
    n_restarts: int = GMM_RESTARTS
    min_cycles: int = 3
    seed: int = 0


def foot_artifacts(trial_norm, foot, config, trial_index=0):
    """Contact series, cycles, phase hypotheses and swing assignments for one foot."""
    contact = detect_contact(trial_norm, foot, config.contact_threshold, config.hysteresis)
    cycles = segment_cycles(contact)
    foot_code = 0 if foot == "left" else 1
    seed = int(np.random.default_rng([config.seed, trial_index, foot_code]).integers(0, 2**31))
    phase_set = detect_phases_baseline(
        trial_norm,
        foot,
        k_min=config.k_min,
        k_max=config.k_max,
        n_restarts=config.n_restarts,
        seed=seed,
    )
    samples = trial_norm.channels(foot)
    swings = tuple(identify_swing(h.labels, samples) for h in phase_set.hypotheses)
    return contact, cycles, phase_set, swings


def extract_trial(trial, subject, config=ExtractionConfig(), trial_index=0):
    """Weight-normalize one trial and compute its feature vector.

    Raises TrialRejected when either foot has too few complete cycles and
    ValidationError/DomainError for structurally bad trials.
    """
    issues = validate_trial(trial)
    if issues:
        raise DomainError(f"trial {trial.trial_id!r} failed validation: {issues[0].message}")
    norm = normalize_by_weight(trial, subject)
    left = foot_artifacts(norm, "left", config, trial_index)
    right = foot_artifacts(norm, "right", config, trial_index)
    return extract_feature_vector(norm, left, right, min_cycles=config.min_cycles)


def _extract_one(args):
    trial, subject, config, idx = args
    return extract_trial(trial, subject, config, trial_index=idx)


def extract_many(trials, subjects, config=ExtractionConfig(), jobs=1):
    """Extract features for a list of trials.

    Returns (dataset, rejections): rejections is a list of
    (trial_id, reason) pairs for trials that failed extraction; the
    dataset keeps the surviving trials in input order.
    """
    for trial in trials:
        if trial.subject_id not in subjects:
            raise DomainError(f"trial {trial.trial_id!r} references unknown subject id {trial.subject_id!r}")
    results = [None] * len(trials)
    rejections = []
    if jobs > 1 and len(trials) > 1:
        from joblib import Parallel, delayed

        def _safe(args):
            try:
                return ("ok", _extract_one(args))
            except GaitError as exc:
                return ("rejected", str(exc))

        outcomes = Parallel(n_jobs=jobs, backend="loky")(
            delayed(_safe)((trial, subjects[trial.subject_id], config, i)) for i, trial in enumerate(trials)
        )
        for i, (status, payload) in enumerate(outcomes):
            if status == "ok":
                results[i] = payload
            else:
                rejections.append((trials[i].trial_id, payload))
    else:
        for i, trial in enumerate(trials):
            try:
                results[i] = _extract_one((trial, subjects[trial.subject_id], config, i))
            except GaitError as exc:
                rejections.append((trial.trial_id, str(exc)))
    kept = [(fv, trial.subject_id) for fv, trial in zip(results, trials) if fv is not None]
    vectors = [fv for fv, _ in kept]
    sids = [sid for _, sid in kept]
    return build_dataset(vectors, sids, subjects), rejections
