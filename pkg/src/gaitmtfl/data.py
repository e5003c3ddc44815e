"""Ground-contact-force trial ingestion, validation and normalization.

A trial is one walking session recorded by four force channels per foot
(toe, first/second metatarsophalangeal region, fourth/fifth region, heel)
at a nominally fixed sampling rate. The canonical on-disk format is CSV
with header ``t,l_toe,l_m12,l_m45,l_heel,r_toe,r_m12,r_m45,r_heel``;
JSONL with the same field names is accepted as an alternative. Trial
files are associated with subjects through the filename convention
``<subject_id>__<trial_id>.csv``.

Force units are arbitrary but must be consistent within a cohort; all
downstream features work on trials normalized by body weight, which makes
channel values dimensionless fractions of body weight.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EmptyInputError, ParseError, ValidationError

GROUPS = ("PD", "ST", "H")
CHANNELS = ("toe", "m12", "m45", "heel")
TRIAL_HEADER = ("t", "l_toe", "l_m12", "l_m45", "l_heel", "r_toe", "r_m12", "r_m45", "r_heel")
DEFAULT_SAMPLING_RATE = 20.0

# Allowed relative deviation of timestamp spacing from 1/sampling_rate.
SPACING_TOLERANCE = 0.10


@dataclass(frozen=True)
class Subject:
    """One study participant: group label and body weight (same units as raw GCF)."""

    id: str
    group: str
    body_weight: float
    age: float | None = None

    def __post_init__(self):
        if self.group not in GROUPS:
            raise DomainError(f"subject {self.id!r}: group must be one of {GROUPS}, got {self.group!r}")
        if not (self.body_weight > 0 and math.isfinite(self.body_weight)):
            raise DomainError(f"subject {self.id!r}: body_weight must be positive and finite")
        if self.age is not None and not (self.age > 0 and math.isfinite(self.age)):
            raise DomainError(f"subject {self.id!r}: age must be positive when given")


@dataclass(frozen=True)
class Trial:
    """One trial: timestamps plus per-foot (n, 4) channel arrays in CHANNELS order.

    Arrays are made read-only at construction; trials are safe to share
    across threads.
    """

    subject_id: str
    trial_id: str
    sampling_rate: float
    t: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        left = np.asarray(self.left, dtype=np.float64)
        right = np.asarray(self.right, dtype=np.float64)
        if t.ndim != 1 or t.size == 0:
            raise DomainError("trial must contain at least one sample")
        if left.shape != (t.size, 4) or right.shape != (t.size, 4):
            raise DomainError("channel arrays must have shape (n_samples, 4)")
        if not (self.sampling_rate > 0 and math.isfinite(self.sampling_rate)):
            raise DomainError("sampling_rate must be positive and finite")
        for name, arr in (("t", t), ("left", left), ("right", right)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_samples(self):
        return self.t.size

    @property
    def duration_s(self):
        """Trial span in seconds: sample count times the sample period."""
        return self.n_samples / self.sampling_rate

    def channels(self, foot):
        if foot == "left":
            return self.left
        if foot == "right":
            return self.right
        raise DomainError(f"foot must be 'left' or 'right', got {foot!r}")


@dataclass(frozen=True)
class Issue:
    """One validation finding: the violated invariant and the sample it occurred at."""

    kind: str
    sample_index: int
    message: str


def _infer_rate(t):
    if t.size < 2:
        return DEFAULT_SAMPLING_RATE
    deltas = np.diff(t)
    med = float(np.median(deltas))
    if med <= 0:
        return DEFAULT_SAMPLING_RATE
    return 1.0 / med


def parse_trial(stream, subject_id, trial_id="", declared_rate=None):
    """Parse a trial from CSV text.

    The sampling rate is inferred from the median timestamp delta unless
    ``declared_rate`` overrides it. Raises ParseError for malformed rows,
    ValidationError for negative or non-finite forces (naming channel and
    line), EmptyInputError when no data rows are present.
    """
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("no header row") from None
    header = [h.strip() for h in header]
    if header != list(TRIAL_HEADER):
        raise ParseError(f"expected header {','.join(TRIAL_HEADER)}, got {','.join(header)}", line=1)
    rows = []
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(TRIAL_HEADER):
            raise ParseError(f"expected {len(TRIAL_HEADER)} fields, got {len(row)}", line=line_no)
        vals = []
        for col, cell in zip(TRIAL_HEADER, row):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"field {col!r}: cannot parse {cell.strip()!r} as a number", line=line_no) from None
            vals.append(v)
        for col, v in zip(TRIAL_HEADER[1:], vals[1:]):
            if not math.isfinite(v):
                raise ValidationError(f"line {line_no}: channel {col!r} is non-finite")
            if v < 0:
                raise ValidationError(f"line {line_no}: channel {col!r} is negative ({v})")
        rows.append(vals)
    if not rows:
        raise EmptyInputError("no data rows")
    arr = np.array(rows, dtype=np.float64)
    rate = declared_rate if declared_rate is not None else _infer_rate(arr[:, 0])
    return Trial(
        subject_id=subject_id,
        trial_id=trial_id,
        sampling_rate=float(rate),
        t=arr[:, 0],
        left=arr[:, 1:5],
        right=arr[:, 5:9],
    )


def parse_trial_jsonl(stream, subject_id, trial_id="", declared_rate=None):
    """Parse a trial from JSONL: one object per line with TRIAL_HEADER field names."""
    rows = []
    for line_no, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=line_no) from None
        vals = []
        for col in TRIAL_HEADER:
            if col not in obj:
                raise ParseError(f"missing field {col!r}", line=line_no)
            v = obj[col]
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ParseError(f"field {col!r}: expected a number", line=line_no)
            vals.append(float(v))
        for col, v in zip(TRIAL_HEADER[1:], vals[1:]):
            if not math.isfinite(v):
                raise ValidationError(f"line {line_no}: channel {col!r} is non-finite")
            if v < 0:
                raise ValidationError(f"line {line_no}: channel {col!r} is negative ({v})")
        rows.append(vals)
    if not rows:
        raise EmptyInputError("no data rows")
    arr = np.array(rows, dtype=np.float64)
    rate = declared_rate if declared_rate is not None else _infer_rate(arr[:, 0])
    return Trial(
        subject_id=subject_id,
        trial_id=trial_id,
        sampling_rate=float(rate),
        t=arr[:, 0],
        left=arr[:, 1:5],
        right=arr[:, 5:9],
    )


def serialize_trial(trial, stream):
    """Write a trial as CSV with 6-decimal fixed-point values.

    parse(serialize(parse(x))) is identity on samples for files produced
    by this function.
    """
    stream.write(",".join(TRIAL_HEADER) + "\n")
    for i in range(trial.n_samples):
        row = [trial.t[i], *trial.left[i], *trial.right[i]]
        stream.write(",".join(f"{v:.6f}" for v in row) + "\n")


def trial_to_csv(trial):
    buf = io.StringIO()
    serialize_trial(trial, buf)
    return buf.getvalue()


def load_trial(path, subject_id=None, trial_id=None, declared_rate=None):
    """Load a trial file (.csv or .jsonl), deriving ids from the filename.

    Filenames follow ``<subject_id>__<trial_id>.<ext>``; explicit arguments
    override the derived ids.
    """
    import pathlib

    p = pathlib.Path(path)
    stem = p.stem
    if subject_id is None or trial_id is None:
        if "__" in stem:
            sid, tid = stem.split("__", 1)
        else:
            sid, tid = stem, stem
        subject_id = subject_id if subject_id is not None else sid
        trial_id = trial_id if trial_id is not None else tid
    with open(p, "r", encoding="utf-8", newline="") as fh:
        if p.suffix.lower() == ".jsonl":
            return parse_trial_jsonl(fh, subject_id, trial_id, declared_rate)
        return parse_trial(fh, subject_id, trial_id, declared_rate)


def normalize_by_weight(trial, subject):
    """Divide every channel by the subject's body weight.

    The result is dimensionless (fraction of body weight), which makes
    balance and strength features comparable across subjects.
    """
    if not (subject.body_weight > 0):
        raise DomainError("body_weight must be positive")
    return Trial(
        subject_id=trial.subject_id,
        trial_id=trial.trial_id,
        sampling_rate=trial.sampling_rate,
        t=trial.t,
        left=trial.left / subject.body_weight,
        right=trial.right / subject.body_weight,
    )


def validate_trial(trial, declared_rate=None):
    """Check trial invariants; returns a list of Issue records (empty when clean).

    Checks: finite non-negative channels, strictly increasing timestamps,
    spacing within 10% of the sampling period, and (when ``declared_rate``
    is given) inferred-vs-declared rate agreement within 10%.
    """
    issues = []
    for foot in ("left", "right"):
        arr = trial.channels(foot)
        bad = ~np.isfinite(arr)
        for i, j in zip(*np.nonzero(bad)):
            issues.append(Issue("non_finite_force", int(i), f"{foot} {CHANNELS[j]} is non-finite at sample {i}"))
        neg = np.isfinite(arr) & (arr < 0)
        for i, j in zip(*np.nonzero(neg)):
            issues.append(Issue("negative_force", int(i), f"{foot} {CHANNELS[j]} is negative at sample {i}"))
    dt = np.diff(trial.t)
    period = 1.0 / trial.sampling_rate
    for i, d in enumerate(dt):
        if d <= 0:
            issues.append(Issue("non_increasing_time", i + 1, f"timestamp does not increase at sample {i + 1}"))
        elif abs(d - period) > SPACING_TOLERANCE * period:
            issues.append(
                Issue("irregular_spacing", i + 1, f"spacing {d:.6f}s deviates >10% from period {period:.6f}s at sample {i + 1}")
            )
    if declared_rate is not None:
        inferred = _infer_rate(trial.t)
        if abs(inferred - declared_rate) > SPACING_TOLERANCE * declared_rate:
            issues.append(
                Issue("rate_mismatch", 0, f"inferred rate {inferred:.3f}Hz deviates >10% from declared {declared_rate:.3f}Hz")
            )
    return issues


def read_subjects_csv(stream):
    """Read subject metadata CSV ``id,group,body_weight,age`` (age may be empty)."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("no header row") from None
    header = [h.strip() for h in header]
    if header != ["id", "group", "body_weight", "age"]:
        raise ParseError(f"expected header id,group,body_weight,age, got {','.join(header)}", line=1)
    subjects = {}
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", line=line_no)
        sid, group, bw_s, age_s = (cell.strip() for cell in row)
        try:
            bw = float(bw_s)
        except ValueError:
            raise ParseError(f"body_weight: cannot parse {bw_s!r}", line=line_no) from None
        age = None
        if age_s:
            try:
                age = float(age_s)
            except ValueError:
                raise ParseError(f"age: cannot parse {age_s!r}", line=line_no) from None
        if sid in subjects:
            raise ParseError(f"duplicate subject id {sid!r}", line=line_no)
        subjects[sid] = Subject(id=sid, group=group, body_weight=bw, age=age)
    if not subjects:
        raise EmptyInputError("no subject rows")
    return subjects


def write_subjects_csv(subjects, stream):
    stream.write("id,group,body_weight,age\n")
    for sid in sorted(subjects):
        s = subjects[sid]
        age = "" if s.age is None else repr(float(s.age))
        stream.write(f"{s.id},{s.group},{float(s.body_weight)!r},{age}\n")
