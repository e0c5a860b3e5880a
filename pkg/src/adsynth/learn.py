"""Feature extraction, a softmax MLP with hand-derived gradients, and
gradient-reversal domain-adversarial training."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .metrics import (
    ANGLE_FEATURES,
    angle_series,
    range_of_motion,
    speed_series,
    trunk_pitch_series,
)
from .skeleton import KEY_JOINTS, JointId, SkeletonError

__all__ = [
    "LearnError",
    "FEATURE_NAMES",
    "extract_features",
    "ClipFeatureExtractor",
    "softmax",
    "cross_entropy",
    "init_mlp",
    "mlp_forward",
    "mlp_loss_grads",
    "SoftmaxMLPClassifier",
    "train_classifier",
    "stage2_loss",
    "AdversarialConfig",
    "init_adversarial",
    "adversarial_loss_grads",
    "domain_branch_feature_grads",
    "DomainAdversarialClassifier",
    "adversarial_train",
    "history_csv",
    "save_model",
    "load_model",
    "DEFAULT_LAMBDA",
]

DEFAULT_LAMBDA = 0.25
PROB_FLOOR = 1e-12


class LearnError(SkeletonError):
    pass


# --------------------------------------------------------------------------
# features

FEATURE_NAMES = tuple(
    [f"{j}_mean_speed" for j in KEY_JOINTS]
    + [f"{j}_speed_rom" for j in KEY_JOINTS]
    + [f"{f}_mean" for f in ANGLE_FEATURES]
    + [f"{f}_rom" for f in ANGLE_FEATURES]
    + ["trunk_pitch_mean", "total_displacement"]
)


def extract_features(clip):
    """Fixed-order, yaw-invariant summary vector of a clip (see FEATURE_NAMES)."""
    speeds = [speed_series(clip, j).values for j in KEY_JOINTS.values()]
    angles = [angle_series(clip, f).values for f in ANGLE_FEATURES]
    base = clip.positions[:, JointId.SPINE_BASE]
    vec = np.concatenate(
        [
            [s.mean() for s in speeds],
            [range_of_motion(s) for s in speeds],
            [a.mean() for a in angles],
            [range_of_motion(a) for a in angles],
            [trunk_pitch_series(clip).mean(), float(np.linalg.norm(base[-1] - base[0]))],
        ]
    )
    return vec


class ClipFeatureExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping a sequence of clips to a feature matrix."""

    def fit(self, X, y=None):
        self.n_features_out_ = len(FEATURE_NAMES)
        return self

    def transform(self, X):
        return np.vstack([extract_features(c) for c in X])

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURE_NAMES, dtype=object)


# --------------------------------------------------------------------------
# primitives


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(predicted, true_label):
    """``-log p[true_label]`` with the probability floored at 1e-12."""
    p = np.asarray(predicted, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-6):
        raise LearnError("predicted must be a probability vector")
    return -math.log(max(p[int(true_label)], PROB_FLOOR))


def _mean_ce(P, y):
    return float(-np.mean(np.log(np.maximum(P[np.arange(len(y)), y], PROB_FLOOR))))


def _glorot(rng, n_out, n_in):
    limit = math.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, (n_out, n_in))


def init_mlp(n_in, n_hidden, n_out, rng):
    return {
        "W1": _glorot(rng, n_hidden, n_in),
        "b1": np.zeros(n_hidden),
        "W2": _glorot(rng, n_out, n_hidden),
        "b2": np.zeros(n_out),
    }


def mlp_forward(params, X):
    H = np.tanh(X @ params["W1"].T + params["b1"])
    return H, softmax(H @ params["W2"].T + params["b2"])


def mlp_loss_grads(params, X, y, l2=0.0):
    """Mean cross-entropy (+ L2 on weights) and its gradients."""
    n = X.shape[0]
    H, P = mlp_forward(params, X)
    loss = _mean_ce(P, y) + 0.5 * l2 * (np.sum(params["W1"] ** 2) + np.sum(params["W2"] ** 2))
    dZ2 = P.copy()
    dZ2[np.arange(n), y] -= 1.0
    dZ2 /= n
    grads = {"W2": dZ2.T @ H + l2 * params["W2"], "b2": dZ2.sum(axis=0)}
    dZ1 = (dZ2 @ params["W2"]) * (1.0 - H**2)
    grads["W1"] = dZ1.T @ X + l2 * params["W1"]
    grads["b1"] = dZ1.sum(axis=0)
    return loss, grads


def _standardize_fit(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return mean, scale


# --------------------------------------------------------------------------
# classifier


class SoftmaxMLPClassifier(ClassifierMixin, BaseEstimator):
    """One-hidden-layer tanh MLP with a softmax output, trained by mini-batch SGD.

    Inputs are standardized with statistics from the training set.

    Parameters
    ----------
    hidden : int, default=16
    learning_rate : float, default=0.05
    batch_size : int, default=32
    epochs : int, default=300
    l2 : float, default=0.0
        Weight-decay coefficient.
    seed : int, default=0
    """

    def __init__(self, hidden=16, learning_rate=0.05, batch_size=32, epochs=300, l2=0.0, seed=0):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.l2 = l2
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise LearnError("learning_rate, epochs and batch_size must be positive")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise LearnError("training data needs at least two classes")
        self.n_features_in_ = X.shape[1]
        self.mean_, self.scale_ = _standardize_fit(X)
        Xs = (X - self.mean_) / self.scale_
        rng = np.random.default_rng(self.seed)
        params = init_mlp(X.shape[1], self.hidden, len(self.classes_), rng)
        n = len(Xs)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                _, grads = mlp_loss_grads(params, Xs[idx], y_idx[idx], self.l2)
                for k in params:
                    params[k] -= self.learning_rate * grads[k]
        self.params_ = params
        self.loss_ = mlp_loss_grads(params, Xs, y_idx, self.l2)[0]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=float)
        return mlp_forward(self.params_, (X - self.mean_) / self.scale_)[1]

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]


def train_classifier(dataset, config=None):
    """Train on ``(feature_vector, label)`` pairs; returns ``(model, final_loss)``."""
    dataset = list(dataset)
    if not dataset:
        raise LearnError("empty training set")
    X = np.vstack([np.asarray(x, dtype=float) for x, _ in dataset])
    y = np.array([getattr(lbl, "value", lbl) for _, lbl in dataset])
    model = SoftmaxMLPClassifier(**(config or {})).fit(X, y)
    return model, model.loss_


# --------------------------------------------------------------------------
# domain-adversarial training


def stage2_loss(main_loss, domain_loss, lam=DEFAULT_LAMBDA):
    if lam < 0:
        raise LearnError("lambda must be >= 0")
    if not (math.isfinite(main_loss) and math.isfinite(domain_loss)):
        raise LearnError("losses must be finite")
    return main_loss - lam * domain_loss


@dataclass(frozen=True)
class AdversarialConfig:
    lam: float = DEFAULT_LAMBDA
    reversal_strength: float = 1.0
    feature_width: int = 16
    discriminator_width: int = 8
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise LearnError("lambda must be >= 0")
        if self.reversal_strength < 0:
            raise LearnError("reversal_strength must be >= 0")

    @property
    def coefficient(self):
        """Scale applied to the sign-flipped domain gradient entering the mapper."""
        return self.lam * self.reversal_strength


def init_adversarial(n_in, n_classes, config, rng):
    return {
        "Wf": _glorot(rng, config.feature_width, n_in),
        "bf": np.zeros(config.feature_width),
        "Wy": _glorot(rng, n_classes, config.feature_width),
        "by": np.zeros(n_classes),
        "Wd1": _glorot(rng, config.discriminator_width, config.feature_width),
        "bd1": np.zeros(config.discriminator_width),
        "Wd2": _glorot(rng, 2, config.discriminator_width),
        "bd2": np.zeros(2),
    }


MAPPER_KEYS = ("Wf", "bf")
LABEL_KEYS = ("Wy", "by")
DISC_KEYS = ("Wd1", "bd1", "Wd2", "bd2")


def _adv_forward(params, X):
    F = np.tanh(X @ params["Wf"].T + params["bf"])
    Py = softmax(F @ params["Wy"].T + params["by"])
    D1 = np.tanh(F @ params["Wd1"].T + params["bd1"])
    Pd = softmax(D1 @ params["Wd2"].T + params["bd2"])
    return F, Py, D1, Pd


def _adv_backward(params, X, y, d):
    """Raw gradients of L_main and L_domain, without any reversal applied."""
    n = X.shape[0]
    F, Py, D1, Pd = _adv_forward(params, X)
    l_main = _mean_ce(Py, y)
    l_dom = _mean_ce(Pd, d)

    dZy = Py.copy()
    dZy[np.arange(n), y] -= 1.0
    dZy /= n
    g_main = {"Wy": dZy.T @ F, "by": dZy.sum(axis=0)}
    dF_main = dZy @ params["Wy"]

    dZd2 = Pd.copy()
    dZd2[np.arange(n), d] -= 1.0
    dZd2 /= n
    g_dom = {"Wd2": dZd2.T @ D1, "bd2": dZd2.sum(axis=0)}
    dZd1 = (dZd2 @ params["Wd2"]) * (1.0 - D1**2)
    g_dom["Wd1"] = dZd1.T @ F
    g_dom["bd1"] = dZd1.sum(axis=0)
    dF_dom = dZd1 @ params["Wd1"]

    def mapper(dF):
        dZf = dF * (1.0 - F**2)
        return {"Wf": dZf.T @ X, "bf": dZf.sum(axis=0)}

    return l_main, l_dom, g_main, g_dom, mapper(dF_main), mapper(dF_dom)


def adversarial_loss_grads(params, X, y, d, coefficient):
    """Losses and the update directions of every parameter group.

    Label head follows grad L_main, the discriminator follows grad
    L_domain, and the mapper receives grad L_main plus the domain gradient
    passed through the reversal: sign-flipped and scaled by ``coefficient``.
    That is the gradient of ``L_main - coefficient * L_domain``.
    """
    l_main, l_dom, g_main, g_dom, gf_main, gf_dom = _adv_backward(params, X, y, d)
    grads = {**g_main, **g_dom}
    for k in MAPPER_KEYS:
        grads[k] = gf_main[k] - coefficient * gf_dom[k]
    return l_main, l_dom, grads


def domain_branch_feature_grads(params, X, y, d, coefficient):
    """Mapper gradients contributed by the domain branch, with and without reversal."""
    *_, gf_dom = _adv_backward(params, X, y, d)
    reversed_ = {k: -coefficient * gf_dom[k] for k in MAPPER_KEYS}
    return reversed_, {k: gf_dom[k] for k in MAPPER_KEYS}


class DomainAdversarialClassifier(ClassifierMixin, BaseEstimator):
    """Action classifier with a gradient-reversal domain discriminator.

    ``fit(X, y, domains)`` takes action labels ``y`` and binary domain
    labels (0 = general, 1 = AD-specific). After fitting, ``history_``
    holds per-epoch ``(epoch, l_main, l_domain, stage2, disc_acc)`` rows.

    Parameters
    ----------
    lam : float, default=0.25
        Domain weight in ``L_main - lam * L_domain``.
    reversal_strength : float, default=1.0
        Extra multiplier on the reversed gradient; 0 disables adversarial
        feedback into the mapper.
    feature_width, discriminator_width, learning_rate, batch_size, epochs, seed
        Architecture and optimizer settings.
    """

    def __init__(self, lam=DEFAULT_LAMBDA, reversal_strength=1.0, feature_width=16, discriminator_width=8,
                 learning_rate=0.05, batch_size=32, epochs=300, seed=0):
        self.lam = lam
        self.reversal_strength = reversal_strength
        self.feature_width = feature_width
        self.discriminator_width = discriminator_width
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def _config(self):
        return AdversarialConfig(
            lam=self.lam, reversal_strength=self.reversal_strength, feature_width=self.feature_width,
            discriminator_width=self.discriminator_width, learning_rate=self.learning_rate,
            batch_size=self.batch_size, epochs=self.epochs, seed=self.seed,
        )

    def fit(self, X, y, domains):
        X, y = check_X_y(X, y, dtype=float)
        d = np.asarray(domains, dtype=int).ravel()
        if d.shape[0] != X.shape[0] or not set(np.unique(d)) <= {0, 1}:
            raise LearnError("domains must be 0/1 labels, one per sample")
        if len(np.unique(d)) < 2:
            raise LearnError("both domains need at least one sample")
        cfg = self._config()
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        self.mean_, self.scale_ = _standardize_fit(X)
        Xs = (X - self.mean_) / self.scale_
        rng = np.random.default_rng(cfg.seed)
        params = init_adversarial(X.shape[1], len(self.classes_), cfg, rng)
        history = []
        n = len(Xs)
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start : start + cfg.batch_size]
                _, _, grads = adversarial_loss_grads(params, Xs[idx], y_idx[idx], d[idx], cfg.coefficient)
                for k in params:
                    params[k] -= cfg.learning_rate * grads[k]
            _, Py, _, Pd = _adv_forward(params, Xs)
            l_main, l_dom = _mean_ce(Py, y_idx), _mean_ce(Pd, d)
            acc = float(np.mean(np.argmax(Pd, axis=1) == d))
            history.append((epoch, l_main, l_dom, stage2_loss(l_main, l_dom, cfg.lam), acc))
        self.params_ = params
        self.history_ = history
        return self

    def _forward(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=float)
        return _adv_forward(self.params_, (X - self.mean_) / self.scale_)

    def predict_proba(self, X):
        return self._forward(X)[1]

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def predict_domain(self, X):
        return np.argmax(self._forward(X)[3], axis=1)

    def transform(self, X):
        """Domain-aligned features produced by the mapper."""
        return self._forward(X)[0]

    def domain_score(self, X, domains):
        return float(np.mean(self.predict_domain(X) == np.asarray(domains, dtype=int)))


def adversarial_train(general, ad_specific, config=None):
    """Train on clips from the general and AD-specific domains.

    Returns ``(model, history)``; the fitted model exposes the mapper via
    ``transform`` and the discriminator via ``predict_domain``.
    """
    general = list(general)
    ad_specific = list(ad_specific)
    if not general or not ad_specific:
        raise LearnError("both domains need at least one clip")
    cfg = config or AdversarialConfig()
    clips = general + ad_specific
    X = np.vstack([extract_features(c) for c in clips])
    y = np.array([c.action.value for c in clips])
    d = np.array([0] * len(general) + [1] * len(ad_specific))
    model = DomainAdversarialClassifier(
        lam=cfg.lam, reversal_strength=cfg.reversal_strength, feature_width=cfg.feature_width,
        discriminator_width=cfg.discriminator_width, learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size, epochs=cfg.epochs, seed=cfg.seed,
    ).fit(X, y, d)
    return model, model.history_


def history_csv(history):
    """Training history as CSV text with header ``epoch,l_main,l_domain,stage2,disc_acc``."""
    lines = ["epoch,l_main,l_domain,stage2,disc_acc"]
    for epoch, l_main, l_dom, s2, acc in history:
        lines.append(f"{int(epoch)},{l_main!r},{l_dom!r},{s2!r},{acc!r}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# checkpoints


def save_model(model, path):
    """Write a fitted classifier as a JSON document of layer shapes and row-major weights."""
    check_is_fitted(model, "params_")
    doc = {
        "kind": type(model).__name__,
        "hyperparameters": model.get_params(),
        "classes": [str(c) for c in model.classes_],
        "mean": model.mean_.tolist(),
        "scale": model.scale_.tolist(),
        "layers": [
            {"name": k, "shape": list(v.shape), "weights": v.ravel().tolist()} for k, v in model.params_.items()
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    kinds = {"SoftmaxMLPClassifier": SoftmaxMLPClassifier, "DomainAdversarialClassifier": DomainAdversarialClassifier}
    if doc.get("kind") not in kinds:
        raise LearnError(f"unknown model kind {doc.get('kind')!r}")
    model = kinds[doc["kind"]](**doc["hyperparameters"])
    model.classes_ = np.array(doc["classes"])
    model.mean_ = np.array(doc["mean"])
    model.scale_ = np.array(doc["scale"])
    model.n_features_in_ = len(model.mean_)
    model.params_ = {l["name"]: np.array(l["weights"], dtype=float).reshape(l["shape"]) for l in doc["layers"]}
    return model
