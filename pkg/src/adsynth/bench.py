"""Imbalanced-HAR benchmark: datasets, augmentation strategies and experiments.

The "real-like" training and test sets are synthesizer outputs drawn from a
pool of simulated subjects whose profiles are jittered around their
condition's defaults. Results therefore check the mechanics of imbalance and
augmentation, not any absolute accuracy on recorded data.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .learn import SoftmaxMLPClassifier, extract_features
from .render import CameraModel, DepthFeatureExtractor
from .seeding import derive_seed
from .skeleton import ActionLabel, Condition, SkeletonError, ValidationError
from .synthesizer import GenerationRequest, default_profile, generate_clip
from .synthesizer.profiles import INTEGER_PARAMETERS, PARAMETERS

__all__ = [
    "BenchError",
    "CLASSES",
    "PAPER_COUNTS",
    "STRATEGIES",
    "ClassDistribution",
    "Subject",
    "Strategy",
    "ExperimentResult",
    "ExperimentConfig",
    "sample_subjects",
    "build_imbalanced_trainset",
    "build_testset",
    "augment_classic",
    "augment_bootstrap",
    "build_open_mix",
    "build_synthetic_balanced",
    "apply_strategy",
    "run_experiment",
    "run_depth_experiment",
    "run_config",
    "results_table_csv",
    "confusion_csv",
    "DEFAULT_CLASSIFIER",
    "DEPTH_CAMERA",
]

CLASSES = (
    ActionLabel.SITTING,
    ActionLabel.STANDING,
    ActionLabel.WALKING,
    ActionLabel.TURNING,
    ActionLabel.LYING,
)
PAPER_COUNTS = {"sitting": 16596, "standing": 3121, "walking": 1735, "turning": 272, "lying": 186}
DESK_DIVISOR = 50
STRATEGIES = ("vanilla", "classic_da", "bootstrap", "open_mix", "synthetic_balanced")

MOCA_RANGES = {Condition.AD: (5, 17), Condition.MCI: (18, 25), Condition.NC: (26, 30)}

DEFAULT_CLASSIFIER = {"hidden": 16, "learning_rate": 0.05, "batch_size": 32, "epochs": 40, "l2": 0.1}
# smaller sensor than the render default keeps the depth benchmark fast
DEPTH_CAMERA = {"width": 160, "height": 120, "fx": 140.0, "fy": 140.0}
DEPTH_FRAME_STEP = 3


class BenchError(SkeletonError):
    pass


@dataclass(frozen=True)
class ClassDistribution:
    """Per-action clip counts of a training set."""

    counts: dict

    def __post_init__(self):
        counts = {}
        for k, v in dict(self.counts).items():
            try:
                action = ActionLabel(k)
            except ValueError:
                raise ValidationError(f"unknown action {k!r}") from None
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise ValidationError(f"count for {action.value} must be a non-negative integer, got {v!r}")
            counts[action] = int(v)
        if sum(1 for v in counts.values() if v > 0) < 2:
            raise ValidationError("distribution needs at least two non-empty classes")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def paper(cls):
        return cls(PAPER_COUNTS)

    @classmethod
    def desk(cls, divisor=DESK_DIVISOR):
        """Paper counts divided by ``divisor`` and rounded up."""
        return cls({k: math.ceil(v / divisor) for k, v in PAPER_COUNTS.items()})

    @property
    def total(self):
        return sum(self.counts.values())

    def to_dict(self):
        return {k.value: v for k, v in self.counts.items()}


# --------------------------------------------------------------------------
# subjects and clip generation


@dataclass(frozen=True)
class Subject:
    subject_id: str
    condition: Condition
    moca_score: int
    profile: object
    body_scale: float
    home_view_deg: float


def _jitter_profile(profile, rng, jitter):
    values = []
    for name in PARAMETERS:
        v = getattr(profile, name)
        if name not in INTEGER_PARAMETERS and jitter > 0:
            v *= rng.uniform(1.0 - jitter, 1.0 + jitter)
        values.append(v)
    return profile.with_vector(values, PARAMETERS)


def sample_subjects(n, seed, prefix="subject", conditions=tuple(Condition), jitter=0.15):
    """Simulated subjects with MoCA scores, jittered profiles and home camera angles.

    Conditions cycle through ``conditions`` so the mix is as even as possible.
    """
    if n < 1:
        raise ValidationError("need at least one subject")
    if not 0 <= jitter < 1:
        raise ValidationError("jitter must be in [0, 1)")
    rng = np.random.default_rng(seed)
    subjects = []
    for k in range(n):
        cond = Condition(conditions[k % len(conditions)])
        lo, hi = MOCA_RANGES[cond]
        moca = int(rng.integers(lo, hi + 1))
        profile = _jitter_profile(default_profile(cond, moca), rng, jitter)
        subjects.append(
            Subject(f"{prefix}-{k:03d}", cond, moca, profile, float(rng.uniform(0.85, 1.15)),
                    float(rng.uniform(0.0, 360.0)))
        )
    return subjects


def _subject_clip(subject, action, seed, rng, provenance, duration_s, fps, view_sd=20.0):
    view = (subject.home_view_deg + rng.normal(0.0, view_sd)) % 360.0
    req = GenerationRequest(action, subject.profile, duration_s=duration_s, fps=fps, viewpoint_deg=view,
                            seed=seed, body_scale=subject.body_scale, moca_score=subject.moca_score,
                            subject_id=subject.subject_id)
    return generate_clip(req).replace(provenance=provenance)


def _clips_from_subjects(counts, subjects, seed, tag, provenance, duration_s, fps):
    rng = np.random.default_rng(derive_seed(seed, tag, "assign"))
    clips = []
    for action in CLASSES:
        for i in range(counts.get(action, 0)):
            subject = subjects[int(rng.integers(len(subjects)))]
            clip_seed = derive_seed(seed, tag, action.value, i)
            clips.append(_subject_clip(subject, action, clip_seed, rng, provenance, duration_s, fps))
    return clips


def build_imbalanced_trainset(distribution=None, seed=0, n_subjects=24, jitter=0.15, duration_s=3.0, fps=30.0):
    """Training clips following ``distribution`` (desk scale by default).

    Clips come from ``n_subjects`` simulated subjects with an even AD/MCI/NC
    mix; each clip picks a subject at random and a viewpoint near that
    subject's home camera angle.
    """
    distribution = distribution or ClassDistribution.desk()
    if not isinstance(distribution, ClassDistribution):
        distribution = ClassDistribution(distribution)
    subjects = sample_subjects(n_subjects, derive_seed(seed, "train-subjects"), "train", jitter=jitter)
    return _clips_from_subjects(distribution.counts, subjects, seed, "train", "train", duration_s, fps)


def build_testset(per_class=40, seed=0, n_subjects=8, jitter=0.15, duration_s=3.0, fps=30.0):
    """Balanced test clips from held-out subjects (ids and seeds disjoint from training)."""
    if per_class < 1:
        raise ValidationError("per_class must be >= 1")
    subjects = sample_subjects(n_subjects, derive_seed(seed, "test-subjects"), "test", jitter=jitter)
    return _clips_from_subjects({a: per_class for a in CLASSES}, subjects, seed, "test", "test", duration_s, fps)


# --------------------------------------------------------------------------
# augmentation strategies


def _check_input(clips):
    clips = list(clips)
    if not clips:
        raise ValidationError("augmentation needs a non-empty input set")
    if any(c.provenance == "test" for c in clips):
        raise BenchError("test clips must never enter an augmentation path")
    return clips


def augment_classic(clips, rotation_deg=30.0, scale_range=(0.9, 1.1), noise_sigma=0.01, factor=1.5, seed=0):
    """Originals plus randomly transformed copies, ``ceil(factor * n)`` clips in total.

    Each copy gets a yaw rotation in ``[-rotation_deg, rotation_deg]`` and a
    uniform scale from ``scale_range`` (both about the clip's mean
    spine-base), then Gaussian coordinate noise of ``noise_sigma`` metres.
    """
    clips = _check_input(clips)
    lo, hi = scale_range
    if not 0 <= rotation_deg <= 180:
        raise ValidationError("rotation_deg must be in [0, 180]")
    if not 0.5 <= lo <= hi <= 2.0:
        raise ValidationError("scale_range must satisfy 0.5 <= lo <= hi <= 2")
    if not 0 <= noise_sigma <= 0.1:
        raise ValidationError("noise_sigma must be in [0, 0.1]")
    if factor < 1:
        raise ValidationError("factor must be >= 1")
    rng = np.random.default_rng(seed)
    n_new = math.ceil(factor * len(clips)) - len(clips)
    out = list(clips)
    for _ in range(n_new):
        src = clips[int(rng.integers(len(clips)))]
        pivot = src.positions[:, 0].mean(axis=0)
        rotated = src.rotated_yaw(float(rng.uniform(-rotation_deg, rotation_deg)), pivot=pivot)
        k = rng.uniform(lo, hi)
        pos = pivot + k * (rotated.positions - pivot)
        if noise_sigma > 0:
            pos = pos + rng.normal(0.0, noise_sigma, pos.shape)
        out.append(rotated.with_positions(pos).replace(provenance="augmented"))
    return out


def augment_bootstrap(clips, factor=1.5, seed=0):
    """``ceil(factor * n)`` clips drawn with replacement from the input."""
    clips = _check_input(clips)
    if factor < 1:
        raise ValidationError("factor must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.integers(len(clips), size=math.ceil(factor * len(clips)))
    return [clips[int(i)] for i in idx]


def build_open_mix(base, count=100, seed=0, n_subjects=12, duration_s=3.0, fps=30.0):
    """Append ``count`` healthy (NC-only) clips spread evenly over the classes."""
    base = list(base)
    if count < 0:
        raise ValidationError("count must be >= 0")
    if count == 0:
        return base
    subjects = sample_subjects(n_subjects, derive_seed(seed, "open-subjects"), "open", (Condition.NC,))
    per, extra = divmod(count, len(CLASSES))
    counts = {a: per + (1 if i < extra else 0) for i, a in enumerate(CLASSES)}
    return base + _clips_from_subjects(counts, subjects, seed, "open", "open", duration_s, fps)


def build_synthetic_balanced(per_class=80, conditions=tuple(Condition), viewpoints=(0.0, 360.0), seed=0,
                             duration_s=3.0, fps=30.0):
    """Equal clips per class, conditions in even rotation, uniform viewpoints.

    Each clip uses the default profile at a MoCA score drawn from its
    condition's range.
    """
    if per_class < 1:
        raise ValidationError("per_class must be >= 1")
    conditions = [Condition(c) for c in conditions]
    if not conditions:
        raise ValidationError("need at least one condition")
    v0, v1 = viewpoints
    if not 0 <= v0 < v1 <= 360:
        raise ValidationError("viewpoints must satisfy 0 <= lo < hi <= 360")
    rng = np.random.default_rng(derive_seed(seed, "synthetic"))
    clips = []
    for action in CLASSES:
        for i in range(per_class):
            cond = conditions[i % len(conditions)]
            lo, hi = MOCA_RANGES[cond]
            moca = int(rng.integers(lo, hi + 1))
            view = float(rng.uniform(v0, v1)) % 360.0
            req = GenerationRequest(action, default_profile(cond, moca), duration_s=duration_s, fps=fps,
                                    viewpoint_deg=view, seed=derive_seed(seed, "synthetic", action.value, i),
                                    moca_score=moca, subject_id=f"synthetic-{action.value}-{i:04d}")
            clips.append(generate_clip(req))
    return clips


@dataclass(frozen=True)
class Strategy:
    """A named training-set transformation with its parameters."""

    name: str
    params: dict = field(default_factory=dict)

    _ALLOWED = {
        "vanilla": set(),
        "classic_da": {"rotation_deg", "scale_range", "noise_sigma", "factor"},
        "bootstrap": {"factor"},
        "open_mix": {"count", "n_subjects"},
        "synthetic_balanced": {"per_class", "conditions", "viewpoints"},
    }

    def __post_init__(self):
        if self.name not in STRATEGIES:
            raise ValidationError(f"unknown strategy {self.name!r}; choose from {', '.join(STRATEGIES)}")
        extra = set(self.params) - self._ALLOWED[self.name]
        if extra:
            raise ValidationError(f"strategy {self.name} does not take {sorted(extra)}")
        object.__setattr__(self, "params", dict(self.params))


def apply_strategy(strategy, base, seed=0):
    """Training set produced by ``strategy`` from the ``base`` clips."""
    if isinstance(strategy, str):
        strategy = Strategy(strategy)
    p = strategy.params
    sub = derive_seed(seed, "strategy", strategy.name)
    if strategy.name == "vanilla":
        return list(base)
    if strategy.name == "classic_da":
        return augment_classic(base, seed=sub, **p)
    if strategy.name == "bootstrap":
        return augment_bootstrap(base, seed=sub, **p)
    if strategy.name == "open_mix":
        return build_open_mix(base, seed=sub, **p)
    return list(base) + build_synthetic_balanced(seed=sub, **p)


# --------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentResult:
    strategy: str
    classes: tuple
    accuracy: dict
    confusion: np.ndarray
    summary: dict

    @property
    def min_accuracy(self):
        return min(self.accuracy.values())


def _evaluate(name, train, test, featurize, classifier, seed):
    labels = [a.value for a in CLASSES]
    train_counts = {lab: 0 for lab in labels}
    for c in train:
        train_counts[c.action.value] = train_counts.get(c.action.value, 0) + 1
    y_test = np.array([c.action.value for c in test])
    present = sorted({c.action.value for c in train})
    if len(present) >= 2:
        X = featurize(train)
        y = np.array([c.action.value for c in train])
        model = SoftmaxMLPClassifier(**{**DEFAULT_CLASSIFIER, **classifier, "seed": seed}).fit(X, y)
        pred = model.predict(featurize(test))
    else:
        pred = np.array([present[0]] * len(test)) if present else np.array([""] * len(test))
    index = {lab: i for i, lab in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=int)
    for t, p in zip(y_test, pred):
        if p in index:
            confusion[index[t], index[p]] += 1
    accuracy = {}
    for lab in labels:
        n = int(np.sum(y_test == lab))
        accuracy[lab] = 100.0 * confusion[index[lab], index[lab]] / n if n else 0.0
    summary = {"n_train": len(train), "n_test": len(test), "train_counts": train_counts}
    return ExperimentResult(name, tuple(labels), accuracy, confusion, summary)


class _CachedFeatures:
    """Feature rows memoized per clip object; clips shared between strategies are featurized once."""

    def __init__(self, fn):
        self.fn = fn
        self.cache = {}

    def __call__(self, clips):
        rows = []
        for c in clips:
            key = id(c)
            if key not in self.cache:
                self.cache[key] = (c, self.fn(c))
            rows.append(self.cache[key][1])
        return np.vstack(rows)


def _run(strategies, base, testset, featurize, classifier, seed):
    testset = list(testset)
    counts = {a: sum(1 for c in testset if c.action == a) for a in CLASSES}
    if len(set(counts.values())) != 1 or not counts[CLASSES[0]]:
        raise BenchError(f"test set must be balanced across classes, got {counts}")
    train_ids = {c.metadata.subject_id for c in base}
    test_ids = {c.metadata.subject_id for c in testset}
    if train_ids & test_ids:
        raise BenchError("test subjects overlap the training subjects")
    results = []
    for s in strategies:
        s = Strategy(s) if isinstance(s, str) else s
        train = apply_strategy(s, base, seed)
        if any(c.provenance == "test" for c in train):
            raise BenchError("test clips leaked into a training set")
        results.append(_evaluate(s.name, train, testset, featurize, classifier,
                                 derive_seed(seed, "classifier", s.name) % 2**32))
    return results


def run_experiment(strategies=STRATEGIES, base=None, testset=None, seed=0, classifier=None):
    """Train one skeleton-feature classifier per strategy and score it on the test set.

    ``base`` defaults to the desk-scale imbalanced training set and
    ``testset`` to 40 clips per class from held-out subjects.
    """
    base = build_imbalanced_trainset(seed=seed) if base is None else list(base)
    testset = build_testset(seed=seed) if testset is None else testset
    return _run(strategies, base, testset, _CachedFeatures(extract_features), classifier or {}, seed)


def run_depth_experiment(strategies=STRATEGIES, camera=None, bone_radius_m=0.05, frame_step=DEPTH_FRAME_STEP,
                         base=None, testset=None, seed=0, classifier=None):
    """As :func:`run_experiment`, with features from rendered depth silhouettes."""
    camera = camera if camera is not None else CameraModel(**DEPTH_CAMERA)
    extractor = DepthFeatureExtractor(camera, bone_radius_m, frame_step)
    base = build_imbalanced_trainset(seed=seed) if base is None else list(base)
    testset = build_testset(seed=seed) if testset is None else testset
    featurize = _CachedFeatures(lambda c: extractor.transform([c])[0])
    return _run(strategies, base, testset, featurize, classifier or {}, seed)


# --------------------------------------------------------------------------
# config and output


@dataclass
class ExperimentConfig:
    """Benchmark settings, loadable from a JSON document.

    Keys: ``distribution`` (action -> count), ``strategies`` (names or
    ``{"name": ..., "params": {...}}``), ``seed``, ``test_per_class``,
    ``modality`` ("skeleton" or "depth"), ``classifier``, ``camera``,
    ``frame_step``, ``output_dir``.
    """

    distribution: ClassDistribution = field(default_factory=ClassDistribution.desk)
    strategies: tuple = tuple(Strategy(s) for s in STRATEGIES)
    seed: int = 0
    test_per_class: int = 40
    modality: str = "skeleton"
    classifier: dict = field(default_factory=dict)
    camera: dict = field(default_factory=lambda: dict(DEPTH_CAMERA))
    frame_step: int = DEPTH_FRAME_STEP
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, doc):
        known = {"distribution", "strategies", "seed", "test_per_class", "modality", "classifier", "camera",
                 "frame_step", "output_dir"}
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        kw = dict(doc)
        if "distribution" in kw:
            kw["distribution"] = ClassDistribution(kw["distribution"])
        if "strategies" in kw:
            kw["strategies"] = tuple(
                Strategy(s) if isinstance(s, str) else Strategy(s["name"], s.get("params", {}))
                for s in kw["strategies"]
            )
        cfg = cls(**kw)
        if cfg.modality not in ("skeleton", "depth"):
            raise ValidationError("modality must be 'skeleton' or 'depth'")
        if not 0 <= int(cfg.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        return cfg

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        return cls.from_dict(doc)


def run_config(config):
    base = build_imbalanced_trainset(config.distribution, seed=config.seed)
    testset = build_testset(config.test_per_class, seed=config.seed)
    if config.modality == "depth":
        return run_depth_experiment(config.strategies, CameraModel(**config.camera), frame_step=config.frame_step,
                                    base=base, testset=testset, seed=config.seed, classifier=config.classifier)
    return run_experiment(config.strategies, base, testset, config.seed, config.classifier)


def _fmt(x):
    return f"{x:.2f}"


def results_table_csv(results):
    """Strategy x class accuracy table (percent) with training-set size."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    labels = results[0].classes if results else tuple(a.value for a in CLASSES)
    w.writerow(["strategy", *labels, "min_accuracy", "n_train"])
    for r in results:
        w.writerow([r.strategy, *(_fmt(r.accuracy[c]) for c in labels), _fmt(r.min_accuracy), r.summary["n_train"]])
    return buf.getvalue()


def confusion_csv(result):
    """Confusion matrix with true classes as rows and predictions as columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\predicted", *result.classes])
    for lab, row in zip(result.classes, result.confusion):
        w.writerow([lab, *map(int, row)])
    return buf.getvalue()
