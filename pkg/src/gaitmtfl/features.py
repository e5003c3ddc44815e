"""Gait feature extraction: the 21-dimensional per-trial feature vector.

Twelve base features in four categories (gait phases, mobility, balance,
strength) expand to 21 columns: nine unilateral features computed per
foot plus three bilateral ones (cadence, double/single support ratio).
Per-cycle features are averaged arithmetically over a trial's complete
cycles; trials supply weight-normalized channels throughout.

Stance-window convention for the strength features: with stance length L,
"heel strike" is searched in the first ceil(L/2) stance samples and
"toe off" in the last ceil(L/2) (windows [0, ceil(L/2)) and
[floor(L/2), L) relative to the cycle start).
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .data import GROUPS
from .errors import DomainError, TrialRejected
from .segmentation import contact_onsets

UNILATERAL_FEATURES = (
    "expected_num_phases",
    "phase_symmetry",
    "num_swing_phases",
    "swing_symmetry",
    "stance_ratio",
    "balance_max_diff",
    "balance_min_diff",
    "strength_heel_max",
    "strength_toe_max",
)
BILATERAL_FEATURES = ("cadence", "double_support_ratio", "single_support_ratio")

FEATURE_NAMES = tuple(
    f"{name}_{side}" for name in UNILATERAL_FEATURES for side in ("left", "right")
) + BILATERAL_FEATURES

N_FEATURES = len(FEATURE_NAMES)

# Channel columns within a foot's (n, 4) array.
TOE, M12, M45, HEEL = 0, 1, 2, 3

DEFAULT_MIN_CYCLES = 3

_RATIO_FEATURES = ("stance_ratio_left", "stance_ratio_right", "double_support_ratio", "single_support_ratio")
_SYMMETRY_FEATURES = ("phase_symmetry_left", "phase_symmetry_right", "swing_symmetry_left", "swing_symmetry_right")


@dataclass(frozen=True)
class FeatureVector:
    """The 21 named features of one trial, in FEATURE_NAMES order."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (N_FEATURES,):
            raise DomainError(f"feature vector must have exactly {N_FEATURES} entries, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("feature vector contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        for name in _RATIO_FEATURES:
            v = self[name]
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{name} must be in [0, 1], got {v}")
        for name in _SYMMETRY_FEATURES:
            v = self[name]
            if not (0.0 < v <= 1.0 + 1e-12):
                raise DomainError(f"{name} must be in (0, 1], got {v}")
        if self["cadence"] < 0:
            raise DomainError("cadence must be non-negative")

    def __getitem__(self, name):
        return float(self.values[FEATURE_NAMES.index(name)])

    def as_dict(self):
        return {name: float(v) for name, v in zip(FEATURE_NAMES, self.values)}


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with per-row subject and group metadata."""

    X: np.ndarray
    subject_ids: tuple
    groups: tuple
    feature_names: tuple = FEATURE_NAMES

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise DomainError(f"X must be (n, {len(self.feature_names)}), got {X.shape}")
        if len(self.subject_ids) != X.shape[0] or len(self.groups) != X.shape[0]:
            raise DomainError("subject_ids and groups must match the row count")
        if X.size and not np.all(np.isfinite(X)):
            raise DomainError("dataset contains non-finite entries")
        for g in self.groups:
            if g not in GROUPS:
                raise DomainError(f"unknown group {g!r}")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n_rows(self):
        return self.X.shape[0]


def phase_symmetry(g):
    """Cosine similarity between per-phase counts and the uniform allocation.

    1.0 iff all entries are equal; low values flag phases that dominate or
    barely appear. Scale- and permutation-invariant.
    """
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 1 or g.size == 0:
        raise DomainError("g must be a non-empty vector")
    if np.any(g < 0):
        raise DomainError("g must be non-negative")
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        raise DomainError("g must have at least one positive entry")
    return float(g.sum()) / (norm * math.sqrt(g.size))


def cadence(num_stance_phases, trial_duration_min):
    """Steps per minute: stance-phase count over both feet / trial minutes."""
    if not (trial_duration_min > 0):
        raise DomainError(f"trial duration must be positive, got {trial_duration_min}")
    if num_stance_phases < 0:
        raise DomainError("stance phase count cannot be negative")
    return num_stance_phases / trial_duration_min


def stance_ratio(cycle):
    """Fraction of the cycle spent in stance."""
    return cycle.stance_samples / cycle.n_samples


def support_ratios(left_contact, right_contact, cycles):
    """Mean double- and single-support fractions over the given cycles.

    Per cycle: double = fraction of samples with both feet loaded, single =
    fraction with exactly one foot loaded.
    """
    if not cycles:
        raise DomainError("support ratios need at least one complete cycle")
    ls = left_contact.states
    rs = right_contact.states
    if ls.size != rs.size:
        raise DomainError("left and right series must be aligned in time")
    doubles = []
    singles = []
    for cyc in cycles:
        lw = ls[cyc.start_idx : cyc.end_idx]
        rw = rs[cyc.start_idx : cyc.end_idx]
        doubles.append(float(np.mean(lw & rw)))
        singles.append(float(np.mean(lw ^ rw)))
    return float(np.mean(doubles)), float(np.mean(singles))


def balance_features(m12, m45):
    """Extremes of the medial-lateral forefoot force difference over one cycle."""
    m12 = np.asarray(m12, dtype=np.float64)
    m45 = np.asarray(m45, dtype=np.float64)
    if m12.size == 0 or m12.shape != m45.shape:
        raise DomainError("channel slices must be non-empty and aligned")
    diff = m12 - m45
    return float(diff.max()), float(diff.min())


def strength_features(heel, toe, stance_len):
    """Peak heel force around heel strike and peak toe force around toe off.

    ``heel`` and ``toe`` are channel slices covering one cycle from its
    start; the search windows are the first and last halves of the stance
    window (see module docstring).
    """
    heel = np.asarray(heel, dtype=np.float64)
    toe = np.asarray(toe, dtype=np.float64)
    if stance_len < 1 or heel.size < stance_len or toe.size < stance_len:
        raise DomainError("stance window must be non-empty and inside the cycle")
    first_end = (stance_len + 1) // 2
    last_start = stance_len // 2
    return float(heel[:first_end].max()), float(toe[last_start:stance_len].max())


def _count_in_cycle(labels, k, cycle):
    window = labels[cycle.start_idx : cycle.end_idx]
    return np.bincount(window, minlength=k).astype(np.float64)


def _foot_feature_block(trial, foot, cycles, phase_set, swings):
    """The nine unilateral features for one foot, per-cycle means taken."""
    arr = trial.channels(foot)
    hyps = phase_set.hypotheses
    if len(swings) != len(hyps):
        raise DomainError("need one swing assignment per hypothesis")

    exp_phases = sum(h.weight * h.k for h in hyps)

    sym_per_cycle = []
    for cyc in cycles:
        val = 0.0
        for h in hyps:
            counts = _count_in_cycle(h.labels, h.k, cyc)
            val += h.weight * phase_symmetry(counts)
        sym_per_cycle.append(val)
    phase_sym = float(np.mean(sym_per_cycle))

    num_swing = sum(h.weight * sw.num_swing_phases for h, sw in zip(hyps, swings))

    swing_sym = 0.0
    for h, sw in zip(hyps, swings):
        ids = sorted(sw.swing_phase_ids)
        counts = np.array([(h.labels == pid).sum() for pid in ids], dtype=np.float64)
        swing_sym += h.weight * phase_symmetry(counts)

    ratios = [stance_ratio(c) for c in cycles]
    bal = [balance_features(arr[c.start_idx : c.end_idx, M12], arr[c.start_idx : c.end_idx, M45]) for c in cycles]
    strength = [
        strength_features(arr[c.start_idx : c.end_idx, HEEL], arr[c.start_idx : c.end_idx, TOE], c.stance_samples)
        for c in cycles
    ]
    return {
        "expected_num_phases": exp_phases,
        "phase_symmetry": phase_sym,
        "num_swing_phases": num_swing,
        "swing_symmetry": swing_sym,
        "stance_ratio": float(np.mean(ratios)),
        "balance_max_diff": float(np.mean([b[0] for b in bal])),
        "balance_min_diff": float(np.mean([b[1] for b in bal])),
        "strength_heel_max": float(np.mean([s[0] for s in strength])),
        "strength_toe_max": float(np.mean([s[1] for s in strength])),
    }


def extract_feature_vector(trial, left_artifacts, right_artifacts, min_cycles=DEFAULT_MIN_CYCLES):
    """Assemble the 21 features from per-foot segmentation artifacts.

    ``left_artifacts``/``right_artifacts`` are (contact, cycles, phase_set,
    swing_assignments) tuples for the respective foot. Trials with fewer
    than ``min_cycles`` complete cycles on either foot are rejected.
    """
    blocks = {}
    all_cycles = []
    onset_count = 0
    for foot, artifacts in (("left", left_artifacts), ("right", right_artifacts)):
        contact, cycles, phase_set, swings = artifacts
        if len(cycles) < min_cycles:
            raise TrialRejected(
                f"trial {trial.trial_id!r}: {foot} foot has {len(cycles)} complete cycles, need >= {min_cycles}"
            )
        blocks[foot] = _foot_feature_block(trial, foot, cycles, phase_set, swings)
        all_cycles.extend(cycles)
        onset_count += len(contact_onsets(contact.states))

    left_contact = left_artifacts[0]
    right_contact = right_artifacts[0]
    double_sup, single_sup = support_ratios(left_contact, right_contact, all_cycles)
    duration_min = trial.duration_s / 60.0
    values = []
    for name in UNILATERAL_FEATURES:
        values.append(blocks["left"][name])
        values.append(blocks["right"][name])
    values.extend([cadence(onset_count, duration_min), double_sup, single_sup])
    return FeatureVector(values=np.array(values))


def build_dataset(feature_vectors, trial_subject_ids, subjects):
    """Stack per-trial feature vectors into a Dataset, joining group labels.

    Row order follows the input order; an unknown subject id raises a
    DomainError naming it.
    """
    if len(feature_vectors) != len(trial_subject_ids):
        raise DomainError("feature_vectors and trial_subject_ids must have equal length")
    groups = []
    for sid in trial_subject_ids:
        if sid not in subjects:
            raise DomainError(f"trial references unknown subject id {sid!r}")
        groups.append(subjects[sid].group)
    if feature_vectors:
        X = np.vstack([fv.values for fv in feature_vectors])
    else:
        X = np.empty((0, N_FEATURES))
    return Dataset(X=X, subject_ids=tuple(trial_subject_ids), groups=tuple(groups))


def save_dataset(dataset, stream):
    """Write the feature CSV: feature columns then subject_id,group."""
    stream.write(",".join(dataset.feature_names) + ",subject_id,group\n")
    for i in range(dataset.n_rows):
        row = ",".join(repr(float(v)) for v in dataset.X[i])
        stream.write(f"{row},{dataset.subject_ids[i]},{dataset.groups[i]}\n")


def load_dataset(stream):
    """Read a feature CSV produced by save_dataset."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise DomainError("empty features file") from None
    header = [h.strip() for h in header]
    if len(header) < 3 or header[-2:] != ["subject_id", "group"]:
        raise DomainError("features file must end with subject_id,group columns")
    names = tuple(header[:-2])
    rows, sids, groups = [], [], []
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise DomainError(f"row has {len(row)} fields, expected {len(header)}")
        rows.append([float(v) for v in row[:-2]])
        sids.append(row[-2].strip())
        groups.append(row[-1].strip())
    X = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(names)))
    return Dataset(X=X, subject_ids=tuple(sids), groups=tuple(groups), feature_names=names)
