"""Gait segmentation: contact detection, cycle extraction, phase hypotheses.

A gait cycle runs from one ground-contact onset of a foot to its next
onset; the loaded part is the stance phase, the airborne part the swing
phase. Data-driven gait phases (finer than stance/swing) come from a
pluggable hypothesis source: the baseline here clusters the 4-channel
force samples with a Gaussian mixture selected by BIC, but externally
computed hypotheses can be imported from a JSONL sidecar instead.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, ParseError
from .data import Trial

FEET = ("left", "right")

DEFAULT_CONTACT_THRESHOLD = 0.05
DEFAULT_HYSTERESIS = 0.01

# Mixture-fit budget: k-means++ seeded restarts run a short EM each, the
# best candidate by log-likelihood is polished to convergence.
GMM_RESTARTS = 20
GMM_KMEANS_ITERS = 6
GMM_SHORT_ITERS = 4
GMM_POLISH_ITERS = 50
GMM_TOL = 1e-5
GMM_REG = 1e-6

WEIGHT_SUM_TOL = 1e-9


def _check_foot(foot):
    if foot not in FEET:
        raise DomainError(f"foot must be one of {FEET}, got {foot!r}")


@dataclass(frozen=True)
class ContactSeries:
    """Per-sample contact state of one foot; True = foot loaded."""

    foot: str
    states: np.ndarray

    def __post_init__(self):
        _check_foot(self.foot)
        states = np.asarray(self.states, dtype=bool)
        states.setflags(write=False)
        object.__setattr__(self, "states", states)


@dataclass(frozen=True)
class GaitCycle:
    """Half-open sample range [start_idx, end_idx) of one cycle.

    The stance phase occupies [start_idx, stance_end_idx), the swing phase
    the remainder.
    """

    foot: str
    start_idx: int
    end_idx: int
    stance_end_idx: int

    def __post_init__(self):
        _check_foot(self.foot)
        if not (self.start_idx < self.stance_end_idx <= self.end_idx):
            raise DomainError(
                f"need start_idx < stance_end_idx <= end_idx, got "
                f"({self.start_idx}, {self.stance_end_idx}, {self.end_idx})"
            )

    @property
    def n_samples(self):
        return self.end_idx - self.start_idx

    @property
    def stance_samples(self):
        return self.stance_end_idx - self.start_idx


@dataclass(frozen=True)
class PhaseHypothesis:
    """One phase labeling: weight, per-sample phase ids, distinct-phase count."""

    weight: float
    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1 or labels.size == 0:
            raise DomainError("labels must be a non-empty 1-D sequence")
        distinct = len(np.unique(labels))
        if self.k != distinct:
            raise DomainError(f"k={self.k} but labels contain {distinct} distinct ids")
        if not (0.0 <= self.weight <= 1.0):
            raise DomainError(f"hypothesis weight must be in [0, 1], got {self.weight}")


@dataclass(frozen=True)
class PhaseHypothesisSet:
    """Weighted set of phase labelings for one foot; weights sum to 1."""

    foot: str
    hypotheses: tuple
    degenerate: bool = False

    def __post_init__(self):
        _check_foot(self.foot)
        hyps = tuple(self.hypotheses)
        if not hyps:
            raise DomainError("hypothesis set must be non-empty")
        object.__setattr__(self, "hypotheses", hyps)
        total = math.fsum(h.weight for h in hyps)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise DomainError(f"hypothesis weights must sum to 1 within {WEIGHT_SUM_TOL}, got {total!r}")
        n = hyps[0].labels.size
        if any(h.labels.size != n for h in hyps):
            raise DomainError("all hypotheses must label the same number of samples")

    @property
    def n_samples(self):
        return self.hypotheses[0].labels.size


@dataclass(frozen=True)
class SwingAssignment:
    """Which phase ids constitute the swing phase, per the low-norm merge rule."""

    swing_phase_ids: frozenset
    num_swing_phases: int
    swing_share: float

    def __post_init__(self):
        ids = frozenset(int(i) for i in self.swing_phase_ids)
        object.__setattr__(self, "swing_phase_ids", ids)
        if self.num_swing_phases != len(ids) or self.num_swing_phases < 1:
            raise DomainError("num_swing_phases must equal |swing_phase_ids| and be positive")
        if not (0.0 < self.swing_share <= 1.0):
            raise DomainError(f"swing_share must be in (0, 1], got {self.swing_share}")


def detect_contact(trial, foot, threshold=DEFAULT_CONTACT_THRESHOLD, hysteresis=DEFAULT_HYSTERESIS):
    """Threshold the summed 4-channel force with hysteresis.

    The trial must be weight-normalized (threshold is a fraction of body
    weight). A sample turns contact when the total rises above
    threshold+hysteresis and stays contact until it falls below
    threshold-hysteresis; with hysteresis 0 this reduces to plain
    thresholding on noiseless data.
    """
    _check_foot(foot)
    if not (0.0 < threshold < 1.0):
        raise DomainError(f"threshold must be in (0, 1), got {threshold}")
    if not (0.0 <= hysteresis < threshold):
        raise DomainError(f"hysteresis must be in [0, threshold), got {hysteresis}")
    arr = trial.channels(foot)
    if np.any(arr > 10.0):
        raise DomainError("trial does not look weight-normalized (channel value > 10 body weights)")
    total = arr.sum(axis=1)
    hi = threshold + hysteresis
    lo = threshold - hysteresis
    states = np.empty(total.size, dtype=bool)
    contact = total[0] > hi
    states[0] = contact
    for i in range(1, total.size):
        if contact:
            if total[i] < lo:
                contact = False
        else:
            if total[i] > hi:
                contact = True
        states[i] = contact
    return ContactSeries(foot=foot, states=states)


def contact_onsets(states):
    """Indices where a contact run begins (sample 0 counts when loaded)."""
    states = np.asarray(states, dtype=bool)
    prev = np.concatenate(([False], states[:-1]))
    return np.nonzero(states & ~prev)[0]


def segment_cycles(contact):
    """Split a contact series into complete onset-to-onset gait cycles.

    Incomplete leading/trailing spans are dropped; fewer than two onsets
    yields an empty list.
    """
    states = contact.states
    onsets = contact_onsets(states)
    cycles = []
    for a, b in zip(onsets[:-1], onsets[1:]):
        off = a
        while off < b and states[off]:
            off += 1
        # a later onset guarantees an airborne sample before it
        cycles.append(GaitCycle(foot=contact.foot, start_idx=int(a), end_idx=int(b), stance_end_idx=int(off)))
    return cycles


def detect_phases_baseline(
    trial,
    foot,
    k_min=2,
    k_max=12,
    n_restarts=GMM_RESTARTS,
    seed=0,
    reg=GMM_REG,
):
    """Cluster one foot's 4-D force samples into gait phases.

    Fits a diagonal-covariance Gaussian mixture by EM for each candidate
    phase count in [k_min, k_max] (k-means++ seeding from ``seed``,
    ``n_restarts`` restarts, best likelihood kept) and selects the count
    by the Bayesian information criterion, ties to the smaller count.
    Returns a single maximum-posterior hypothesis with weight 1.

    All-identical samples are degenerate: a one-phase hypothesis is
    returned with the ``degenerate`` flag set.
    """
    _check_foot(foot)
    if not (2 <= k_min <= k_max <= 12):
        raise DomainError(f"need 2 <= k_min <= k_max <= 12, got ({k_min}, {k_max})")
    if n_restarts < 1:
        raise DomainError("n_restarts must be >= 1")
    X = np.ascontiguousarray(trial.channels(foot), dtype=np.float64)
    n = X.shape[0]
    if np.all(X == X[0]):
        labels = np.zeros(n, dtype=np.int64)
        hyp = PhaseHypothesis(weight=1.0, labels=labels, k=1)
        return PhaseHypothesisSet(foot=foot, hypotheses=(hyp,), degenerate=True)
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    best = None
    for k in range(k_min, k_max + 1):
        uniforms = rng.random((n_restarts, k))
        loglik, means, variances, weights, resp = kernels.gmm_fit_diag(
            X, k, uniforms, reg, GMM_KMEANS_ITERS, GMM_SHORT_ITERS, GMM_POLISH_ITERS, GMM_TOL
        )
        n_params = (k - 1) + 2 * k * d
        bic = -2.0 * loglik + n_params * math.log(n)
        if best is None or bic < best[0]:
            best = (bic, k, resp.argmax(axis=1))
    raw = best[2]
    # compact ids so the distinct count matches k even if a component died
    used = np.unique(raw)
    remap = {int(u): i for i, u in enumerate(used)}
    labels = np.array([remap[int(v)] for v in raw], dtype=np.int64)
    hyp = PhaseHypothesis(weight=1.0, labels=labels, k=len(used))
    return PhaseHypothesisSet(foot=foot, hypotheses=(hyp,))


def identify_swing(labels, samples):
    """Merge low-force phases into the swing phase.

    Phases are ranked by the mean Euclidean norm of their samples
    (ascending, ties to the smaller phase id) and accumulated in order;
    accumulation stops at the first phase whose inclusion lifts the merged
    share of observations above 10%.
    """
    labels = np.asarray(labels, dtype=np.int64)
    samples = np.asarray(samples, dtype=np.float64)
    if labels.size == 0 or samples.size == 0:
        raise DomainError("labels and samples must be non-empty")
    if samples.shape[0] != labels.size:
        raise DomainError("labels and samples must be aligned")
    norms = np.linalg.norm(samples, axis=1)
    ids = np.unique(labels)
    order = sorted(ids, key=lambda pid: (float(norms[labels == pid].mean()), int(pid)))
    total = labels.size
    merged = []
    share = 0.0
    for pid in order:
        merged.append(int(pid))
        share += float((labels == pid).sum()) / total
        if share > 0.10:
            break
    return SwingAssignment(swing_phase_ids=frozenset(merged), num_swing_phases=len(merged), swing_share=share)


def expected_num_phases(phase_set):
    """Weighted mean phase count over the hypothesis set."""
    total_w = math.fsum(h.weight for h in phase_set.hypotheses)
    if abs(total_w - 1.0) > WEIGHT_SUM_TOL:
        raise DomainError(f"hypothesis weights must sum to 1 within {WEIGHT_SUM_TOL}")
    return math.fsum(h.weight * h.k for h in phase_set.hypotheses)


def load_hypotheses_jsonl(stream, foot, n_samples):
    """Import phase hypotheses produced by an external detector.

    One JSON object per line with keys ``weight`` and ``labels``; label
    sequences must cover every trial sample.
    """
    _check_foot(foot)
    hyps = []
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=line_no) from None
        if "weight" not in obj or "labels" not in obj:
            raise ParseError("each hypothesis needs 'weight' and 'labels'", line=line_no)
        labels = np.asarray(obj["labels"], dtype=np.int64)
        if labels.size != n_samples:
            raise ParseError(f"labels length {labels.size} != trial sample count {n_samples}", line=line_no)
        hyps.append(PhaseHypothesis(weight=float(obj["weight"]), labels=labels, k=len(np.unique(labels))))
    if not hyps:
        raise ParseError("no hypotheses found")
    return PhaseHypothesisSet(foot=foot, hypotheses=tuple(hyps))
