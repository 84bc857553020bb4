"""State inference: nearest state mean in the embedding space, and minds.

A trained manifold answers "which state does this signal stimulate?" by
embedding the signal and picking the state whose mean embedding is closest
(Euclidean by default, Mahalanobis optionally).  A mind is an ordered
collection of trained manifolds reacting jointly to one signal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOperationError
from .manifold import ManifoldSpec
from .network import EmbeddingNetwork, forward

__all__ = [
    "TrainedManifold",
    "InferenceResult",
    "Mind",
    "mean_embeddings_by_state",
    "nearest_state",
    "infer_state",
    "infer_state_mahalanobis",
    "mind_react",
    "save_model",
    "load_model",
    "save_mind",
    "load_mind",
]

COVARIANCE_RIDGE = 1e-6  # added to per-state covariances before inversion


@dataclass
class TrainedManifold:
    """A manifold ready for inference: spec, network, and per-state means.

    state_means holds one mean embedding per state; state_covariances, when
    present, one (p, p) sample covariance per state (regularized at use).
    history carries the per-epoch training loss curve when the model came
    out of the trainer; it is not serialized.
    """

    spec: ManifoldSpec
    network: EmbeddingNetwork
    state_means: np.ndarray
    state_covariances: np.ndarray | None = None
    history: tuple = ()

    def __post_init__(self):
        s = len(self.spec.states)
        p = self.spec.embedding_dim
        means = np.asarray(self.state_means, dtype=float)
        if means.shape != (s, p):
            raise ValueError(f"state_means must have shape {(s, p)}, got {means.shape}")
        if not np.all(np.isfinite(means)):
            raise ValueError("state_means must be finite")
        means = means.copy()
        means.setflags(write=False)
        self.state_means = means
        if self.state_covariances is not None:
            cov = np.asarray(self.state_covariances, dtype=float)
            if cov.shape != (s, p, p):
                raise ValueError(
                    f"state_covariances must have shape {(s, p, p)}, got {cov.shape}"
                )
            if not np.allclose(cov, np.transpose(cov, (0, 2, 1))):
                raise ValueError("state covariances must be symmetric")
            cov = cov.copy()
            cov.setflags(write=False)
            self.state_covariances = cov

    def to_dict(self):
        doc = {
            "spec": self.spec.to_dict(),
            "network": self.network.to_dict(),
            "state_means": self.state_means.tolist(),
        }
        if self.state_covariances is not None:
            doc["state_covariances"] = self.state_covariances.tolist()
        return doc

    @classmethod
    def from_dict(cls, doc):
        cov = doc.get("state_covariances")
        return cls(
            ManifoldSpec.from_dict(doc["spec"]),
            EmbeddingNetwork.from_dict(doc["network"]),
            np.asarray(doc["state_means"], dtype=float),
            None if cov is None else np.asarray(cov, dtype=float),
        )


@dataclass
class InferenceResult:
    """Chosen state plus the full distance and confidence profile.

    state_id is the argmin of distances (ties break to the lowest id);
    confidence is a softmin over distances, an artifact convenience rather
    than anything the inference rule itself needs.
    """

    state_id: int
    state_name: str
    distances: np.ndarray
    confidence: np.ndarray

    def to_dict(self, manifold_name):
        return {
            "manifold": manifold_name,
            "state": self.state_name,
            "distances": self.distances.tolist(),
            "confidence": self.confidence.tolist(),
        }


def mean_embeddings_by_state(embeddings, labels, state_count):
    """Per-state mean of the given embeddings; states with no samples get NaN."""
    emb = np.asarray(embeddings, dtype=float)
    lab = np.asarray(labels, dtype=int)
    means = np.full((state_count, emb.shape[1]), np.nan)
    for s in range(state_count):
        rows = emb[lab == s]
        if rows.shape[0]:
            means[s] = rows.mean(axis=0)
    return means


def _softmin(distances, temperature):
    z = -(distances - distances.min()) / temperature
    e = np.exp(z)
    return e / e.sum()


def nearest_state(embedding, state_means, state_names, temperature=1.0):
    """Nearest-mean decision for one embedding; ties break to the lowest id."""
    diff = state_means - embedding
    distances = np.sqrt((diff ** 2).sum(axis=1))
    state_id = int(np.argmin(distances))
    return InferenceResult(
        state_id, state_names[state_id], distances, _softmin(distances, temperature)
    )


def _embed_one(model, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"input signal must be 1-D, got shape {x.shape}")
    if x.shape[0] != model.spec.input_dim:
        raise ValueError(
            f"input width {x.shape[0]} != manifold input_dim {model.spec.input_dim}"
        )
    emb, _ = forward(model.network, x[None, :], mode="eval")
    return emb[0]


def infer_state(model, x, temperature=1.0):
    """Infer the state of one signal: embed it, pick the closest state mean."""
    emb = _embed_one(model, x)
    return nearest_state(emb, model.state_means, model.spec.state_names, temperature)


def infer_state_mahalanobis(model, x, temperature=1.0):
    """Like infer_state but with per-state Mahalanobis distances.

    Each state's covariance gets a small ridge (1e-6 I) so the inverse
    exists even for degenerate clusters.
    """
    if model.state_covariances is None:
        raise UnsupportedOperationError(
            "model has no state covariances; Mahalanobis inference unavailable"
        )
    emb = _embed_one(model, x)
    s, p = model.state_means.shape
    ridge = COVARIANCE_RIDGE * np.eye(p)
    distances = np.zeros(s)
    for i in range(s):
        delta = emb - model.state_means[i]
        sigma = model.state_covariances[i] + ridge
        distances[i] = np.sqrt(max(float(delta @ np.linalg.solve(sigma, delta)), 0.0))
    state_id = int(np.argmin(distances))
    return InferenceResult(
        state_id,
        model.spec.state_names[state_id],
        distances,
        _softmin(distances, temperature),
    )


@dataclass
class Mind:
    """Ordered collection of trained manifolds reacting to one signal.

    Each manifold consumes the whole signal by default, or a declared
    (start, stop) slice of it.
    """

    manifolds: tuple[TrainedManifold, ...]
    input_slices: tuple | None = None

    def __post_init__(self):
        self.manifolds = tuple(self.manifolds)
        names = [m.spec.name for m in self.manifolds]
        if len(set(names)) != len(names):
            raise ValueError(f"manifold names must be unique, got {names}")
        if self.input_slices is None:
            self.input_slices = (None,) * len(self.manifolds)
        else:
            self.input_slices = tuple(
                None if s is None else (int(s[0]), int(s[1])) for s in self.input_slices
            )
            if len(self.input_slices) != len(self.manifolds):
                raise ValueError("need one input slice entry per manifold")

    def __len__(self):
        return len(self.manifolds)

    def to_dict(self):
        return {
            "manifolds": [
                {"model": m.to_dict(), "input_slice": list(s) if s else None}
                for m, s in zip(self.manifolds, self.input_slices)
            ]
        }

    @classmethod
    def from_dict(cls, doc):
        models, slices = [], []
        for entry in doc["manifolds"]:
            models.append(TrainedManifold.from_dict(entry["model"]))
            s = entry.get("input_slice")
            slices.append(None if s is None else (s[0], s[1]))
        return cls(tuple(models), tuple(slices))


def mind_react(mind, x, temperature=1.0):
    """Each manifold infers its own state for the signal; one result per name."""
    x = np.asarray(x, dtype=float)
    results = {}
    for model, sl in zip(mind.manifolds, mind.input_slices):
        xi = x if sl is None else x[sl[0]:sl[1]]
        if xi.shape[0] != model.spec.input_dim:
            raise ValueError(
                f"manifold '{model.spec.name}' expects input width "
                f"{model.spec.input_dim}, got {xi.shape[0]}"
            )
        results[model.spec.name] = infer_state(model, xi, temperature)
    return results


def save_model(model, path):
    with open(path, "w") as f:
        json.dump(model.to_dict(), f, indent=2)
        f.write("\n")


def load_model(path):
    with open(path) as f:
        return TrainedManifold.from_dict(json.load(f))


def save_mind(mind, path):
    with open(path, "w") as f:
        json.dump(mind.to_dict(), f, indent=2)
        f.write("\n")


def load_mind(path):
    with open(path) as f:
        return Mind.from_dict(json.load(f))
