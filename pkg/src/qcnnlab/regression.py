"""Regression targets (viscous Burgers shock, damped oscillator) and QCNN fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .circuits import GUIDED, make_model
from .embeddings import FOURIER, EmbeddingSpec
from .trainer import EmbeddedModel, LabeledSet, TrainConfig, TrainTrace, adam_fit

BURGERS = "burgers"
OSCILLATOR = "oscillator"
N_TRAIN = 21
N_TEST = 100
ERROR_BOUND = 0.05
REGRESSION_EPOCHS = 500
FOURIER_REGRESSION_ETA = 2 * np.pi


def burgers_u0(xp, nu: float = 0.05):
    """u(0, x') - 4 = -2 nu phi'/phi for the two-Gaussian Cole-Hopf profile."""
    xp = np.asarray(xp, dtype=float)
    e1 = -xp ** 2 / (4 * nu)
    e2 = -(xp - 2 * np.pi) ** 2 / (4 * nu)
    top = np.maximum(e1, e2)
    g1, g2 = np.exp(e1 - top), np.exp(e2 - top)
    # phi' = -(x'/2nu) g1 - ((x' - 2pi)/2nu) g2
    return (xp * g1 + (xp - 2 * np.pi) * g2) / (g1 + g2)


def burgers_target(x, nu: float = 0.05):
    """[u(0, pi + 1/2 - x) - 4] / 3."""
    val = burgers_u0(np.pi + 0.5 - np.asarray(x, dtype=float), nu) / 3
    return float(val) if np.ndim(val) == 0 else val


def burgers_logistic(x, nu: float = 0.05):
    """Closed form of the same target: [pi + 1/2 - x - 2 pi sigma(-pi (x - 1/2)/nu)]/3."""
    x = np.asarray(x, dtype=float)
    return (np.pi + 0.5 - x - 2 * np.pi * expit(-np.pi * (x - 0.5) / nu)) / 3


def transfer_function(w, zeta: float = 0.05):
    w = np.asarray(w, dtype=float)
    val = 1.0 / np.hypot(1 - w ** 2, 2 * zeta * w)
    return float(val) if np.ndim(val) == 0 else val


def oscillator_target(x, zeta: float = 0.05):
    """H(1.6 (x + 0.1)) for the damped single-degree-of-freedom oscillator."""
    return transfer_function(1.6 * (np.asarray(x, dtype=float) + 0.1), zeta)


@dataclass(frozen=True)
class RegressionTarget:
    kind: str = BURGERS
    nu: float = 0.05
    zeta: float = 0.05

    def __post_init__(self):
        if self.kind not in (BURGERS, OSCILLATOR):
            raise ValueError(f"unknown regression target {self.kind!r}")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must lie in (0, 1)")

    def __call__(self, x):
        if self.kind == BURGERS:
            return burgers_target(x, self.nu)
        return oscillator_target(x, self.zeta)


class ScaledModel:
    """a * f_circuit(x) + b; the last two parameters are (a, b)."""

    def __init__(self, inner: EmbeddedModel, params=None):
        self.inner = inner
        self.params = None if params is None else np.asarray(params, dtype=float)

    @property
    def n_params(self) -> int:
        return self.inner.n_params + 2

    def values(self, params, xs, shots=None, rng=None) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        single = params.ndim == 1
        pb = params[None, :] if single else params
        circ, inverse = np.unique(pb[:, :-2], axis=0, return_inverse=True)
        f = np.atleast_2d(self.inner.values(circ, xs, shots=shots, rng=rng))[inverse.ravel()]
        out = pb[:, -2:-1] * f + pb[:, -1:]
        return out[0] if single else out

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return np.concatenate([self.inner.init_params(rng), [1.0, 0.0]])

    def __call__(self, x):
        if self.params is None:
            raise ValueError("model has no fitted parameters")
        return self.values(self.params, x)


def regression_grid() -> np.ndarray:
    return np.linspace(0, 1, N_TRAIN)


def test_grid() -> np.ndarray:
    return np.linspace(0, 1, N_TEST)


test_grid.__test__ = False


def fit_regression(embedding: EmbeddingSpec, ansatz: str, target: RegressionTarget,
                   config: TrainConfig, init_params=None) -> tuple[ScaledModel, TrainTrace]:
    """Adam on (1/M) sum (a f(x) + b - target(x))^2 over the 21-point grid.

    Circuit angles start Uniform[-pi, pi) from the seed, with a = 1 and b = 0.
    """
    model = ScaledModel(EmbeddedModel(make_model(ansatz, embedding.n_qubits), embedding))
    xs = regression_grid()
    trace = adam_fit(model, init_params, LabeledSet(xs, target(xs)), config)
    model.params = trace.params
    return model, trace


def regression_accuracy(model, target, xs=None, bound: float = ERROR_BOUND) -> float:
    """Fraction of the 100 uniform test points with squared error below the bound."""
    xs = test_grid() if xs is None else np.asarray(xs, dtype=float)
    err = (np.asarray(model(xs)) - np.asarray(target(xs))) ** 2
    return float(np.mean(err < bound))


def default_embedding(kind: str, n_qubits: int = 9) -> EmbeddingSpec:
    if kind == FOURIER:
        return EmbeddingSpec(FOURIER, n_qubits, eta=FOURIER_REGRESSION_ETA)
    return EmbeddingSpec(kind, n_qubits)
