"""Synthetic data generators with exact ground truth.

Two levels:

* feature-space multi-task datasets with a known sharing structure
  (``gen_multitask``), for validating the solver's support recovery;
* ground-contact-force waveforms with controllable pathology signatures
  (``gen_gcf_trial`` / ``gen_cohort``), for validating the extraction
  pipeline end to end without clinical recordings.

The waveform model is deliberately simple: periodic stance windows at a
given cadence and stance duty (feet half a period apart), a heel pulse at
stance onset, a toe pulse before stance end, and a mid-stance forefoot
plateau split medially/laterally by a bias term, plus a constant support
load that keeps every stance sample above the contact threshold. Additive
Gaussian jitter is clamped at zero (channel values stay non-negative by
construction). The three built-in profiles encode the qualitative cues of
healthy, parkinsonian (lateral forefoot loading, reduced pace) and
hemiplegic gait (missing heel strike on the affected side, slow pace);
the parameter values are synthetic defaults, not clinical estimates.

``gcf_trial_truth`` recomputes every timing-based feature of the
noise-free construction with its own independent scan of the constructed
contact masks, so pipeline output can be checked against it. Window
conventions match the feature contract: stance first half = first
ceil(L/2) stance samples, last half = last ceil(L/2).
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import Subject, Trial
from .errors import DomainError
from .solver import TaskData

PROFILE_KINDS = ("healthy", "parkinsonian", "hemiplegic")

# Waveform shape constants (fractions of the stance window / body weight).
HEEL_PEAK_AT = 0.15
HEEL_END_AT = 0.5
TOE_START_AT = 0.5
TOE_PEAK_AT = 0.85
FOREFOOT_RISE = (0.10, 0.25)
FOREFOOT_FALL = (0.80, 0.95)
BASE_SUPPORT = 0.15  # split across the two forefoot channels all stance long
DEFAULT_FOREFOOT_LOAD = 0.8

# Contralateral (unaffected) side used for hemiplegic profiles; the
# affected side is always the left foot in synthetic cohorts.
UNAFFECTED_HEEL = 1.0
UNAFFECTED_BIAS = -0.05
UNAFFECTED_TOE = 0.85


@dataclass(frozen=True)
class PathologyProfile:
    """Waveform parameters of one synthetic walker."""

    kind: str
    cadence_spm: float
    stance_duty: float
    heel_strike_amplitude: float
    lateral_bias: float
    jitter_sd: float
    seed: int
    toe_off_amplitude: float = 0.85
    forefoot_load: float = DEFAULT_FOREFOOT_LOAD

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise DomainError(f"kind must be one of {PROFILE_KINDS}, got {self.kind!r}")
        if not (self.cadence_spm > 0):
            raise DomainError("cadence_spm must be positive")
        if not (0.5 <= self.stance_duty < 1.0):
            raise DomainError(f"stance_duty must be in [0.5, 1), got {self.stance_duty}")
        for name, amp in (
            ("heel_strike_amplitude", self.heel_strike_amplitude),
            ("toe_off_amplitude", self.toe_off_amplitude),
            ("forefoot_load", self.forefoot_load),
        ):
            if not (0.0 <= amp <= 2.0):
                raise DomainError(f"{name} must be within [0, 2] body weights, got {amp}")
        if not (-1.0 <= self.lateral_bias <= 1.0):
            raise DomainError(f"lateral_bias must be in [-1, 1], got {self.lateral_bias}")
        if self.jitter_sd < 0:
            raise DomainError("jitter_sd must be non-negative")


def _foot_params(profile, foot):
    """Per-foot amplitude parameters; hemiplegic profiles affect the left foot."""
    if profile.kind == "hemiplegic" and foot == "right":
        return UNAFFECTED_HEEL, UNAFFECTED_BIAS, UNAFFECTED_TOE
    return profile.heel_strike_amplitude, profile.lateral_bias, profile.toe_off_amplitude


def _heel_shape(u):
    if u < HEEL_PEAK_AT:
        return u / HEEL_PEAK_AT
    if u < HEEL_END_AT:
        return (HEEL_END_AT - u) / (HEEL_END_AT - HEEL_PEAK_AT)
    return 0.0


def _toe_shape(u):
    if u < TOE_START_AT:
        return 0.0
    if u < TOE_PEAK_AT:
        return (u - TOE_START_AT) / (TOE_PEAK_AT - TOE_START_AT)
    return (1.0 - u) / (1.0 - TOE_PEAK_AT)


def _forefoot_shape(u):
    r0, r1 = FOREFOOT_RISE
    f0, f1 = FOREFOOT_FALL
    if u < r0 or u >= f1:
        return 0.0
    if u < r1:
        return (u - r0) / (r1 - r0)
    if u < f0:
        return 1.0
    return (f1 - u) / (f1 - f0)


def _foot_waveform(profile, foot, n, sampling_rate):
    """Noise-free (n, 4) channel block and contact mask for one foot."""
    period = 120.0 / profile.cadence_spm
    offset = 0.0 if foot == "left" else 0.5 * period
    heel_amp, bias, toe_amp = _foot_params(profile, foot)
    m12_level = profile.forefoot_load * (0.5 - 0.5 * bias)
    m45_level = profile.forefoot_load * (0.5 + 0.5 * bias)
    arr = np.zeros((n, 4))
    mask = np.zeros(n, dtype=bool)
    for i in range(n):
        t = i / sampling_rate
        x = ((t - offset) % period) / period
        if x >= profile.stance_duty:
            continue
        u = x / profile.stance_duty
        mask[i] = True
        ff = _forefoot_shape(u)
        arr[i, 0] = toe_amp * _toe_shape(u)
        arr[i, 1] = m12_level * ff + 0.5 * BASE_SUPPORT
        arr[i, 2] = m45_level * ff + 0.5 * BASE_SUPPORT
        arr[i, 3] = heel_amp * _heel_shape(u)
    return arr, mask


def gen_gcf_trial(profile, duration_s, sampling_rate=20.0, body_weight=1.0, subject_id="synthetic", trial_id="synthetic"):
    """Generate one trial of raw GCF samples for the given profile.

    Channels are synthesized as fractions of body weight and scaled by
    ``body_weight``, so the standard weight-normalization step recovers
    the dimensionless waveform. Jitter is drawn from the profile's seed.
    """
    if duration_s < 10.0:
        raise DomainError(f"duration must be >= 10 s, got {duration_s}")
    if sampling_rate <= 0:
        raise DomainError("sampling_rate must be positive")
    n = int(round(duration_s * sampling_rate))
    left, _ = _foot_waveform(profile, "left", n, sampling_rate)
    right, _ = _foot_waveform(profile, "right", n, sampling_rate)
    if profile.jitter_sd > 0:
        rng = np.random.default_rng(profile.seed)
        left = np.maximum(left + rng.normal(0.0, profile.jitter_sd, left.shape), 0.0)
        right = np.maximum(right + rng.normal(0.0, profile.jitter_sd, right.shape), 0.0)
    t = np.arange(n) / sampling_rate
    return Trial(
        subject_id=subject_id,
        trial_id=trial_id,
        sampling_rate=sampling_rate,
        t=t,
        left=left * body_weight,
        right=right * body_weight,
    )


@dataclass(frozen=True)
class TrialTruth:
    """Feature values of the noise-free construction, derived independently.

    ``cadence_spm`` counts constructed contact onsets over both feet per
    trial minute (which is what the extraction pipeline measures), not the
    profile's nominal rate.
    """

    contact_left: np.ndarray
    contact_right: np.ndarray
    cadence_spm: float
    stance_ratio: dict
    double_support_ratio: float
    single_support_ratio: float
    balance_max_diff: dict
    balance_min_diff: dict
    strength_heel_max: dict
    strength_toe_max: dict


def _mask_onsets(mask):
    return [i for i in range(mask.size) if mask[i] and (i == 0 or not mask[i - 1])]


def _mask_cycles(mask):
    onsets = _mask_onsets(mask)
    cycles = []
    for a, b in zip(onsets[:-1], onsets[1:]):
        off = a
        while off < b and mask[off]:
            off += 1
        cycles.append((a, off, b))
    return cycles


def gcf_trial_truth(profile, duration_s, sampling_rate=20.0):
    """Expected features of the noise-free waveform, for oracle checks."""
    if duration_s < 10.0:
        raise DomainError(f"duration must be >= 10 s, got {duration_s}")
    n = int(round(duration_s * sampling_rate))
    channels = {}
    masks = {}
    for foot in ("left", "right"):
        channels[foot], masks[foot] = _foot_waveform(profile, foot, n, sampling_rate)
    onset_count = len(_mask_onsets(masks["left"])) + len(_mask_onsets(masks["right"]))
    duration_min = n / sampling_rate / 60.0
    stance_ratio = {}
    balance_max = {}
    balance_min = {}
    heel_max = {}
    toe_max = {}
    all_cycles = []
    for foot in ("left", "right"):
        arr = masks[foot]
        cycles = _mask_cycles(arr)
        all_cycles.extend(cycles)
        ratios, bmax, bmin, hmax, tmax = [], [], [], [], []
        ch = channels[foot]
        for a, off, b in cycles:
            length = b - a
            stance_len = off - a
            ratios.append(stance_len / length)
            diff = ch[a:b, 1] - ch[a:b, 2]
            bmax.append(diff.max())
            bmin.append(diff.min())
            first_end = (stance_len + 1) // 2
            last_start = stance_len // 2
            hmax.append(ch[a : a + first_end, 3].max())
            tmax.append(ch[a + last_start : a + stance_len, 0].max())
        stance_ratio[foot] = float(np.mean(ratios))
        balance_max[foot] = float(np.mean(bmax))
        balance_min[foot] = float(np.mean(bmin))
        heel_max[foot] = float(np.mean(hmax))
        toe_max[foot] = float(np.mean(tmax))
    doubles, singles = [], []
    lmask, rmask = masks["left"], masks["right"]
    for a, _, b in all_cycles:
        lw = lmask[a:b]
        rw = rmask[a:b]
        doubles.append(float(np.mean(lw & rw)))
        singles.append(float(np.mean(lw ^ rw)))
    return TrialTruth(
        contact_left=lmask,
        contact_right=rmask,
        cadence_spm=onset_count / duration_min,
        stance_ratio=stance_ratio,
        double_support_ratio=float(np.mean(doubles)),
        single_support_ratio=float(np.mean(singles)),
        balance_max_diff=balance_max,
        balance_min_diff=balance_min,
        strength_heel_max=heel_max,
        strength_toe_max=toe_max,
    )


# Synthetic group parameter means (documented defaults, not clinical values).
GROUP_PROFILE_MEANS = {
    "H": {"kind": "healthy", "cadence": 112.0, "duty": 0.61, "heel": 1.15, "bias": -0.10, "toe": 0.92, "jitter": 0.004},
    "PD": {"kind": "parkinsonian", "cadence": 92.0, "duty": 0.66, "heel": 0.75, "bias": 0.22, "toe": 0.70, "jitter": 0.005},
    "ST": {"kind": "hemiplegic", "cadence": 70.0, "duty": 0.72, "heel": 0.22, "bias": 0.30, "toe": 0.50, "jitter": 0.006},
}
GROUP_PROFILE_SDS = {"cadence": 4.0, "duty": 0.015, "heel": 0.07, "bias": 0.035, "toe": 0.05}

# Small within-subject trial-to-trial wobble.
TRIAL_CADENCE_SD = 0.8
TRIAL_DUTY_SD = 0.004

DEFAULT_TRIALS_PER_SUBJECT = 16
DEFAULT_TRIAL_DURATION_S = 15.0


def _sample_subject_params(group, rng):
    m = GROUP_PROFILE_MEANS[group]
    s = GROUP_PROFILE_SDS
    return {
        "kind": m["kind"],
        "cadence": max(40.0, rng.normal(m["cadence"], s["cadence"])),
        "duty": float(np.clip(rng.normal(m["duty"], s["duty"]), 0.55, 0.85)),
        "heel": max(0.0, rng.normal(m["heel"], s["heel"])),
        "bias": float(np.clip(rng.normal(m["bias"], s["bias"]), -0.8, 0.8)),
        "toe": max(0.05, rng.normal(m["toe"], s["toe"])),
        "jitter": m["jitter"],
    }


def gen_cohort(
    counts=(5, 3, 3),
    trials_per_subject=DEFAULT_TRIALS_PER_SUBJECT,
    duration_s=DEFAULT_TRIAL_DURATION_S,
    sampling_rate=20.0,
    seed=0,
):
    """Generate a full synthetic cohort: trials plus subject metadata.

    ``counts`` gives the number of PD, stroke, and healthy subjects, in
    that order. Per-subject parameters are drawn around the group means,
    so the groups are distinguishable but overlapping; each subject's
    trials add a small cadence/duty wobble and fresh jitter noise. Raw
    channel values are scaled by the subject's sampled body weight.
    """
    if len(counts) != 3:
        raise DomainError("counts must be (n_pd, n_st, n_h)")
    if any(c < 2 for c in counts):
        raise DomainError("need at least 2 subjects per group")
    if trials_per_subject < 1:
        raise DomainError("trials_per_subject must be >= 1")
    rng = np.random.default_rng(seed)
    subjects = {}
    trials = []
    for group, prefix, n_subj in (("PD", "pd", counts[0]), ("ST", "st", counts[1]), ("H", "h", counts[2])):
        for si in range(1, n_subj + 1):
            sid = f"{prefix}{si:02d}"
            params = _sample_subject_params(group, rng)
            body_weight = float(max(45.0, rng.normal(70.0, 9.0)))
            subjects[sid] = Subject(id=sid, group=group, body_weight=body_weight)
            for ti in range(1, trials_per_subject + 1):
                profile = PathologyProfile(
                    kind=params["kind"],
                    cadence_spm=max(40.0, params["cadence"] + rng.normal(0.0, TRIAL_CADENCE_SD)),
                    stance_duty=float(np.clip(params["duty"] + rng.normal(0.0, TRIAL_DUTY_SD), 0.55, 0.85)),
                    heel_strike_amplitude=params["heel"],
                    lateral_bias=params["bias"],
                    jitter_sd=params["jitter"],
                    toe_off_amplitude=params["toe"],
                    seed=int(rng.integers(0, 2**63 - 1)),
                )
                trials.append(
                    gen_gcf_trial(
                        profile,
                        duration_s,
                        sampling_rate,
                        body_weight=body_weight,
                        subject_id=sid,
                        trial_id=f"{sid}_t{ti:02d}",
                    )
                )
    return trials, subjects


@dataclass(frozen=True)
class SharingSpec:
    """Ground-truth sharing structure for a feature-space multi-task dataset."""

    d: int
    T: int
    shared_support: tuple
    private_supports: tuple
    noise_sd: float
    n_per_task: int
    seed: int

    def __post_init__(self):
        if self.d < 1 or self.T < 1 or self.n_per_task < 1:
            raise DomainError("d, T and n_per_task must all be >= 1")
        if len(self.private_supports) != self.T:
            raise DomainError("need one private support per task")
        shared = tuple(int(j) for j in self.shared_support)
        privates = tuple(tuple(int(j) for j in sup) for sup in self.private_supports)
        for j in shared + tuple(j for sup in privates for j in sup):
            if not (0 <= j < self.d):
                raise DomainError(f"support index {j} outside [0, {self.d})")
        if not (set(shared) or any(privates)):
            raise DomainError("union of supports must be non-empty")
        if self.noise_sd < 0:
            raise DomainError("noise_sd must be non-negative")
        object.__setattr__(self, "shared_support", shared)
        object.__setattr__(self, "private_supports", privates)


@dataclass(frozen=True)
class MultitaskTruth:
    c_true: np.ndarray
    betas_true: np.ndarray
    alphas_true: np.ndarray
    shared_support: tuple
    private_supports: tuple

    @property
    def support_union(self):
        return tuple(sorted(set(self.shared_support) | {j for sup in self.private_supports for j in sup}))


def gen_multitask(spec):
    """Draw a multi-task dataset with known shared/private feature supports.

    The shared gate is positive on the union of supports; each task's
    factor is nonzero on shared + its private support with random signs.
    Rows are standard normal, labels are the sign of the noisy linear
    score (sign(0) = +1).
    """
    rng = np.random.default_rng(spec.seed)
    union = sorted(set(spec.shared_support) | {j for sup in spec.private_supports for j in sup})
    c_true = np.zeros(spec.d)
    c_true[union] = rng.uniform(0.5, 1.5, len(union))
    betas_true = np.zeros((spec.d, spec.T))
    for t in range(spec.T):
        sup = sorted(set(spec.shared_support) | set(spec.private_supports[t]))
        signs = rng.choice((-1.0, 1.0), len(sup))
        betas_true[sup, t] = signs * rng.uniform(0.5, 1.5, len(sup))
    alphas_true = c_true[:, None] * betas_true
    tasks = []
    for t in range(spec.T):
        X = rng.standard_normal((spec.n_per_task, spec.d))
        scores = X @ alphas_true[:, t]
        if spec.noise_sd > 0:
            scores = scores + rng.normal(0.0, spec.noise_sd, spec.n_per_task)
        y = np.where(scores >= 0, 1.0, -1.0)
        tasks.append(TaskData(name=f"task{t}", X=X, y=y))
    truth = MultitaskTruth(
        c_true=c_true,
        betas_true=betas_true,
        alphas_true=alphas_true,
        shared_support=spec.shared_support,
        private_supports=spec.private_supports,
    )
    return tasks, truth
