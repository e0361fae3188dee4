"""Online Nystrom dictionary selection by ridge leverage score sampling.

The dictionary is the set of anchor states that the projected bandit policies
expand their estimates on.  Each arriving state is scored by an estimate of
its ridge leverage score against the current anchors, kept with probability
min(gamma * score, 1), and never removed.  Kept anchors remember the
probability they were sampled with; those probabilities reweight later score
estimates, which is what keeps the estimator an overestimate of the true
leverage score.

For a candidate s with self-similarity k = k(s, s), anchor cross-vector
K_Z(s), inclusion weights S = diag(1 / sqrt(p_i)) and regularizer mu, the
estimator used here is

    tau(s) = (1 + eps) * (k - r) / (k + mu - r),
    r      = (S K_Z(s))^T (S K_ZZ S + mu I)^{-1} (S K_Z(s)),

which is the augmented-dictionary form (s appended at weight 1) reduced by one
block elimination; tests check the two agree.  The matrix
(S K_ZZ S + mu I)^{-1} is maintained incrementally alongside K_ZZ^{-1}, so a
score costs O(m^2) after O(m) kernel evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelSpec, StatePoint, evaluate, gram, gram_packed, pack
from .linalg import (
    NearSingularExtensionError,
    SINGULAR_TOL,
    SpdInverse,
    dense_spd_inverse,
    schur_extend,
)


@dataclass(frozen=True)
class KorsParams:
    """Sampling parameters.

    ``gamma`` scales scores into inclusion probabilities; ``math.inf`` means
    every candidate is kept with probability 1, which is how the exact and
    projected policies are made to coincide.  ``theory_default`` picks the
    analysis-backed budget gamma = 12 log(T / delta) with delta = 1 / T^2.
    """

    mu: float
    epsilon: float = 0.5
    gamma: float = 1.0
    delta: float | None = None

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @staticmethod
    def theory_default(horizon: int, mu: float, epsilon: float = 0.5) -> "KorsParams":
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        delta = 1.0 / horizon**2
        gamma = 12.0 * math.log(horizon / delta)
        return KorsParams(mu=mu, epsilon=epsilon, gamma=gamma, delta=delta)


@dataclass
class Dictionary:
    """Anchor set with maintained inverse state.

    ``kzz_inverse`` inverts the plain anchor gram K_ZZ (used by the projected
    variance correction); ``score_inverse`` inverts S K_ZZ S + mu I (used by
    the leverage estimator).  Both are extended one row at a time as anchors
    are admitted.  ``rejected_duplicates`` counts candidates whose admission
    would have made K_ZZ numerically singular; they are dropped, not merged.
    """

    mu: float
    rng: np.random.Generator
    anchors: list[StatePoint] = field(default_factory=list)
    probs: list[float] = field(default_factory=list)
    steps: list[int] = field(default_factory=list)
    kzz_inverse: SpdInverse = field(default_factory=SpdInverse.empty)
    score_inverse: SpdInverse = field(default_factory=SpdInverse.empty)
    rejected_duplicates: int = 0

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if not (
            len(self.anchors)
            == len(self.probs)
            == len(self.steps)
            == self.kzz_inverse.dim
            == self.score_inverse.dim
        ):
            raise ValueError("dictionary fields disagree on the anchor count")
        self._packed = pack(self.anchors)

    @property
    def size(self) -> int:
        return len(self.anchors)

    @property
    def packed(self) -> np.ndarray:
        """(m, d) joint coordinates of the anchors."""
        return self._packed

    def cross_vector(self, spec: KernelSpec, s: StatePoint) -> np.ndarray:
        """K_Z(s): kernel of s against every anchor."""
        if self.size == 0:
            return np.zeros(0)
        return gram_packed(
            spec, self._packed, s.joint[None, :], context_dim=s.context.size
        )[:, 0]

    def _admit(
        self, spec: KernelSpec, s: StatePoint, prob: float, step: int, kz: np.ndarray
    ) -> bool:
        """Extend both inverses by one anchor; reject near-duplicates."""
        k_self = evaluate(spec, s, s)
        try:
            new_kzz = schur_extend(self.kzz_inverse, kz, k_self)
        except NearSingularExtensionError:
            self.rejected_duplicates += 1
            return False
        scale = 1.0 / math.sqrt(prob)
        weights = 1.0 / np.sqrt(np.asarray(self.probs)) if self.size else np.zeros(0)
        self.score_inverse = schur_extend(
            self.score_inverse,
            scale * weights * kz,
            k_self * scale**2 + self.mu,
        )
        self.kzz_inverse = new_kzz
        self.anchors.append(s)
        self.probs.append(prob)
        self.steps.append(step)
        if self.size == 1:
            self._packed = s.joint[None, :].copy()
        else:
            self._packed = np.vstack([self._packed, s.joint])
        return True

    def seed(self, spec: KernelSpec, s: StatePoint, step: int = 0) -> None:
        """Deterministically admit the bootstrap state at weight 1."""
        kz = self.cross_vector(spec, s)
        if not self._admit(spec, s, 1.0, step, kz):
            raise ValueError("bootstrap state rejected as duplicate")


def _score_parts(
    d: Dictionary, s: StatePoint, params: KorsParams, spec: KernelSpec
) -> tuple[float, np.ndarray]:
    if params.mu != d.mu:
        raise ValueError("params.mu differs from the dictionary's mu")
    k_self = evaluate(spec, s, s)
    kz = d.cross_vector(spec, s)
    if d.size == 0:
        r = 0.0
    else:
        v = kz / np.sqrt(np.asarray(d.probs))
        r = float(v @ (d.score_inverse.matrix @ v))
    gap = max(k_self - r, 0.0)
    denom = max(k_self + params.mu - r, params.mu)
    tau = (1.0 + params.epsilon) * gap / denom
    return tau, kz


def leverage_score(
    d: Dictionary, s: StatePoint, params: KorsParams, spec: KernelSpec
) -> float:
    """Estimated ridge leverage score of ``s`` against the current anchors."""
    tau, _ = _score_parts(d, s, params, spec)
    return tau


def kors_step(
    d: Dictionary, t: int, s: StatePoint, params: KorsParams, spec: KernelSpec
) -> bool:
    """Score ``s``, flip the inclusion coin, admit on success.

    Returns whether the state became an anchor.  Exactly one uniform draw is
    consumed per call regardless of outcome, so the coin-flip stream stays
    aligned across configurations that share a seed.
    """
    tau, kz = _score_parts(d, s, params, spec)
    if math.isinf(params.gamma):
        prob = 1.0
    else:
        prob = min(params.gamma * tau, 1.0)
    coin = float(d.rng.uniform())
    if prob <= 0.0 or coin >= prob:
        return False
    return d._admit(spec, s, prob, t, kz)


def projection_error(
    d: Dictionary, history: list[StatePoint], spec: KernelSpec
) -> float:
    """Largest eigenvalue of K_SS - K_SZ K_ZZ^{-1} K_ZS over ``history``.

    This is the operator norm of the part of the history gram that the anchor
    subspace fails to capture; the sampler's guarantee is that it stays below
    mu.  Diagnostic only, so it is computed densely from scratch with a small
    diagonal jitter on K_ZZ rather than from the maintained inverse.
    """
    if len(history) == 0:
        return 0.0
    k_ss = gram(spec, history, history)
    if d.size == 0:
        resid = k_ss
    else:
        k_sz = gram(spec, history, d.anchors)
        k_zz = gram(spec, d.anchors, d.anchors)
        inv = dense_spd_inverse(k_zz, jitter=1e-10 * spec.kappa**2)
        resid = k_ss - k_sz @ (inv.matrix @ k_sz.T)
    eigs = np.linalg.eigvalsh(0.5 * (resid + resid.T))
    return float(eigs[-1])


def rebuild_dictionary(
    states: list[StatePoint],
    probs: np.ndarray,
    steps: list[int],
    mu: float,
    spec: KernelSpec,
    rng: np.random.Generator,
) -> Dictionary:
    """Construct a dictionary from scratch with dense inverses.

    Used by the resampling baseline, which periodically throws its anchor set
    away; near-duplicate anchors are skipped the same way the online path
    rejects them.
    """
    d = Dictionary(mu=mu, rng=rng)
    for s, p, step in zip(states, probs, steps):
        kz = d.cross_vector(spec, s)
        d._admit(spec, s, float(p), step, kz)
    return d
