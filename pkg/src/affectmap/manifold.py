"""Affective manifold geometry: states, margin matrices, and 2-D state layouts.

An affective manifold is an embedding space partitioned into named emotional
states.  The geometry of the space is prescribed up front by a symmetric
margin matrix: entry (i, j) is the distance the embeddings of states i and j
should end up apart.  Margin matrices can be written down directly, generated
from a linear chain rule of thumb, or measured off a 2-D sketch of where the
states should sit relative to each other.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AffectiveState",
    "MarginMatrix",
    "StateLayout",
    "ManifoldSpec",
    "MindSpec",
    "EmbeddabilityReport",
    "linear_chain_margins",
    "layout_to_margins",
    "canonical_margins",
    "canonical_state_names",
    "embeddability_check",
    "classical_mds",
    "CANONICAL_MANIFOLDS",
]

# Canonical margin matrices, stored exactly as published (3-4 significant
# digits).  The nonlinear love chain bends "hate" and "love" toward each
# other; the joy layout places "enjoying" between the negative states and the
# neutral pair "relaxed"/"bored".
_LOVE_LINEAR = (
    (0.0, 1.0, 2.0, 3.0),
    (1.0, 0.0, 1.0, 2.0),
    (2.0, 1.0, 0.0, 1.0),
    (3.0, 2.0, 1.0, 0.0),
)
_LOVE_NONLINEAR = (
    (0.0, 1.0, 1.848, 2.404),
    (1.0, 0.0, 1.0, 1.848),
    (1.848, 1.0, 0.0, 1.0),
    (2.404, 1.848, 1.0, 0.0),
)
_JOY = (
    (0.0, 1.0, 1.414, 2.414, 3.318, 3.318),
    (1.0, 0.0, 1.0, 1.788, 2.573, 2.761),
    (1.414, 1.0, 0.0, 1.0, 1.932, 1.932),
    (2.414, 1.788, 1.0, 0.0, 1.0, 1.0),
    (3.318, 2.573, 1.932, 1.0, 0.0, 1.0),
    (3.318, 2.761, 1.932, 1.0, 1.0, 0.0),
)

CANONICAL_MANIFOLDS = {
    "love_linear": ("hate", "dislike", "like", "love"),
    "love_nonlinear": ("hate", "dislike", "like", "love"),
    "joy": ("suffered", "feared", "worried", "enjoying", "relaxed", "bored"),
}

_CANONICAL_MATRICES = {
    "love_linear": _LOVE_LINEAR,
    "love_nonlinear": _LOVE_NONLINEAR,
    "joy": _JOY,
}


@dataclass(frozen=True)
class AffectiveState:
    """One named state within a manifold, e.g. ("love", id 3)."""

    id: int
    name: str

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"state id must be nonnegative, got {self.id}")
        if not self.name:
            raise ValueError("state name must be non-empty")


class MarginMatrix:
    """Symmetric matrix of desired pairwise distances between states.

    Margins are dimensionless embedding-space distances: symmetric, zero on
    the diagonal, and strictly positive off the diagonal (distinct states
    must be separated).
    """

    def __init__(self, entries):
        m = np.asarray(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"margin matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("margin matrix entries must be finite")
        if not np.array_equal(m, m.T):
            raise ValueError("margin matrix must be symmetric")
        if np.any(np.diag(m) != 0.0):
            raise ValueError("margin matrix diagonal must be zero")
        off = ~np.eye(m.shape[0], dtype=bool)
        if np.any(m[off] <= 0.0):
            raise ValueError("off-diagonal margins must be strictly positive")
        m = m.copy()
        m.setflags(write=False)
        self.entries = m

    @property
    def size(self):
        return self.entries.shape[0]

    def __repr__(self):
        return f"MarginMatrix(size={self.size})"


class StateLayout:
    """2-D sketch of where states should sit: one point per state.

    The layout is a design tool; only the pairwise distances it induces
    matter, so scale, rotation, and mirroring carry no meaning.
    """

    def __init__(self, coords):
        c = np.asarray(coords, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError(f"layout coordinates must be (s, 2), got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("layout coordinates must be finite")
        diff = c[:, None, :] - c[None, :, :]
        d2 = (diff ** 2).sum(axis=-1)
        np.fill_diagonal(d2, np.inf)
        if np.any(d2 == 0.0):
            raise ValueError("layout points must be pairwise distinct")
        c = c.copy()
        c.setflags(write=False)
        self.coords = c

    def __len__(self):
        return self.coords.shape[0]


@dataclass(frozen=True)
class ManifoldSpec:
    """Everything needed to train one manifold: states, margins, dimensions.

    input_dim is the width d of the raw signal; embedding_dim is the
    dimensionality p of the learned space (p <= d).
    """

    name: str
    states: tuple[AffectiveState, ...]
    margins: MarginMatrix
    embedding_dim: int
    input_dim: int

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if not self.name:
            raise ValueError("manifold name must be non-empty")
        ids = [s.id for s in self.states]
        if ids != list(range(len(self.states))):
            raise ValueError(f"state ids must be contiguous from 0, got {ids}")
        names = [s.name for s in self.states]
        if len(set(names)) != len(names):
            raise ValueError(f"state names must be unique, got {names}")
        if self.margins.size != len(self.states):
            raise ValueError(
                f"margin matrix size {self.margins.size} != state count {len(self.states)}"
            )
        if not (1 <= self.embedding_dim <= self.input_dim):
            raise ValueError(
                f"need 1 <= embedding_dim <= input_dim, got "
                f"p={self.embedding_dim}, d={self.input_dim}"
            )

    @property
    def state_names(self):
        return tuple(s.name for s in self.states)

    @classmethod
    def from_names(cls, name, state_names, margins, embedding_dim, input_dim):
        states = tuple(AffectiveState(i, n) for i, n in enumerate(state_names))
        return cls(name, states, margins, embedding_dim, input_dim)

    def to_dict(self):
        return {
            "name": self.name,
            "states": list(self.state_names),
            "margins": self.margins.entries.tolist(),
            "embedding_dim": self.embedding_dim,
            "input_dim": self.input_dim,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls.from_names(
            doc["name"],
            doc["states"],
            MarginMatrix(doc["margins"]),
            doc["embedding_dim"],
            doc["input_dim"],
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class MindSpec:
    """An ordered collection of manifold specs making up one machine mind.

    Manifold names are unique; state names may repeat across manifolds
    (a state like "laugh" can be shared by several characteristic groups).
    """

    manifolds: tuple[ManifoldSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "manifolds", tuple(self.manifolds))
        names = [m.name for m in self.manifolds]
        if len(set(names)) != len(names):
            raise ValueError(f"manifold names must be unique, got {names}")

    def to_dict(self):
        return {"manifolds": [m.to_dict() for m in self.manifolds]}

    @classmethod
    def from_dict(cls, doc):
        return cls(tuple(ManifoldSpec.from_dict(d) for d in doc["manifolds"]))


def linear_chain_margins(s, unit=1.0):
    """Margins for s states on a straight line, neighbors one unit apart.

    entry (i, j) = unit * |i - j|.
    """
    if s < 2:
        raise ValueError(f"a chain needs at least 2 states, got {s}")
    if unit <= 0:
        raise ValueError(f"unit must be positive, got {unit}")
    idx = np.arange(s, dtype=float)
    return MarginMatrix(unit * np.abs(idx[:, None] - idx[None, :]))


def layout_to_margins(layout):
    """Measure the pairwise Euclidean distances of a 2-D state layout."""
    c = layout.coords
    diff = c[:, None, :] - c[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=-1))
    # exact zero diagonal regardless of float noise
    np.fill_diagonal(d, 0.0)
    return MarginMatrix(d)


def canonical_margins(which):
    """One of the published margin matrices: love_linear, love_nonlinear, joy.

    Values are returned verbatim as printed, including the hate-love entry
    2.404 of the nonlinear love chain (a unit chain with two 135-degree bends
    actually measures 1 + sqrt(2) ~ 2.414; both values are kept on purpose so
    the discrepancy stays visible).
    """
    if which not in _CANONICAL_MATRICES:
        raise ValueError(
            f"unknown canonical matrix {which!r}, expected one of "
            f"{sorted(_CANONICAL_MATRICES)}"
        )
    return MarginMatrix(_CANONICAL_MATRICES[which])


def canonical_state_names(which):
    """State names (in id order) matching `canonical_margins(which)`."""
    if which not in CANONICAL_MANIFOLDS:
        raise ValueError(
            f"unknown canonical manifold {which!r}, expected one of "
            f"{sorted(CANONICAL_MANIFOLDS)}"
        )
    return CANONICAL_MANIFOLDS[which]


@dataclass(frozen=True)
class EmbeddabilityReport:
    """Eigenvalue evidence for whether margins fit into R^p as distances."""

    embeddable: bool
    eigenvalues: np.ndarray
    tolerance: float


def _centered_gram(margins):
    d2 = margins.entries ** 2
    n = margins.size
    j = np.eye(n) - np.ones((n, n)) / n
    return -0.5 * (j @ d2 @ j)


def embeddability_check(margins, p, rel_tol=1e-6):
    """Check whether the margins can be realized as Euclidean distances in R^p.

    Double-centers the squared-distance matrix and inspects the eigenvalues
    of the resulting Gram matrix: embeddable iff none falls below -tol and at
    most p exceed +tol, with tol = rel_tol * largest eigenvalue.

    The default rel_tol is strict.  Matrices transcribed from print at 3-4
    significant digits carry rounding noise around 1e-2 relative; pass
    rel_tol=0.02 to ask whether such a matrix is embeddable up to print
    precision.  Reports only; never raises.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    g = _centered_gram(margins)
    eig = np.sort(np.linalg.eigvalsh(g))[::-1]
    tol = rel_tol * max(eig[0], 0.0)
    embeddable = bool(eig[-1] >= -tol and np.sum(eig > tol) <= p)
    eig = eig.copy()
    eig.setflags(write=False)
    return EmbeddabilityReport(embeddable, eig, float(tol))


def classical_mds(margins, p=2):
    """Solve coordinates in R^p whose distances best match the margins.

    Classical (Torgerson) multidimensional scaling: eigendecompose the
    double-centered squared-distance matrix and keep the top p components
    with positive eigenvalues.  Exact when the margins are exactly
    realizable in R^p; otherwise a least-strain approximation.

    Returns an (s, p) coordinate array.  Components beyond the Gram rank are
    zero columns.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    g = _centered_gram(margins)
    w, v = np.linalg.eigh(g)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    coords = np.zeros((margins.size, p))
    for k in range(min(p, margins.size)):
        if w[k] > 0.0:
            coords[:, k] = v[:, k] * np.sqrt(w[k])
    return coords
