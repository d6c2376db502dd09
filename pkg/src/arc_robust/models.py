"""Small models with hand-written gradients: multinomial logistic, one-hidden-layer MLP, quadratic.

Parameters live in one flat vector ``theta``.  Classification losses are the
mean negative log-likelihood plus ``l2_reg / 2 * |theta|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _nll_and_dlogits(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    logp = _log_softmax(logits)
    m = y.shape[0]
    loss = -float(logp[np.arange(m), y].mean())
    d = np.exp(logp)
    d[np.arange(m), y] -= 1.0
    return loss, d / m


@dataclass(frozen=True)
class Logistic:
    K: int
    d_in: int
    l2_reg: float = 1e-4

    kind = "logistic"

    @property
    def n_params(self) -> int:
        return self.K * self.d_in + self.K

    def unpack(self, theta):
        W = theta[: self.K * self.d_in].reshape(self.K, self.d_in)
        b = theta[self.K * self.d_in :]
        return W, b

    def init(self, gen: np.random.Generator, mu: float = 1.0) -> np.ndarray:
        bound = 1.0 / np.sqrt(self.d_in)
        return mu * gen.uniform(-bound, bound, self.n_params)

    def logits(self, theta, X):
        W, b = self.unpack(theta)
        return X @ W.T + b

    def loss_and_grad(self, theta, X, y) -> tuple[float, np.ndarray]:
        if X.shape[1] != self.d_in:
            raise DimensionMismatch(f"model expects {self.d_in} features, got {X.shape[1]}")
        W, b = self.unpack(theta)
        loss, dz = _nll_and_dlogits(X @ W.T + b, y)
        grad = np.concatenate([(dz.T @ X).ravel(), dz.sum(axis=0)])
        loss += 0.5 * self.l2_reg * float(theta @ theta)
        return loss, grad + self.l2_reg * theta

    def predict(self, theta, X) -> np.ndarray:
        return self.logits(theta, X).argmax(axis=1)


@dataclass(frozen=True)
class MLP1:
    hidden: int
    K: int
    d_in: int
    l2_reg: float = 1e-4

    kind = "mlp1"

    @property
    def n_params(self) -> int:
        return self.hidden * self.d_in + self.hidden + self.K * self.hidden + self.K

    def unpack(self, theta):
        h, d, K = self.hidden, self.d_in, self.K
        i = 0
        W1 = theta[i : i + h * d].reshape(h, d)
        i += h * d
        b1 = theta[i : i + h]
        i += h
        W2 = theta[i : i + K * h].reshape(K, h)
        i += K * h
        b2 = theta[i : i + K]
        return W1, b1, W2, b2

    def init(self, gen: np.random.Generator, mu: float = 1.0) -> np.ndarray:
        b1 = 1.0 / np.sqrt(self.d_in)
        b2 = 1.0 / np.sqrt(self.hidden)
        parts = [
            gen.uniform(-b1, b1, self.hidden * self.d_in + self.hidden),
            gen.uniform(-b2, b2, self.K * self.hidden + self.K),
        ]
        return mu * np.concatenate(parts)

    def logits(self, theta, X):
        W1, b1, W2, b2 = self.unpack(theta)
        return np.maximum(X @ W1.T + b1, 0.0) @ W2.T + b2

    def loss_and_grad(self, theta, X, y) -> tuple[float, np.ndarray]:
        if X.shape[1] != self.d_in:
            raise DimensionMismatch(f"model expects {self.d_in} features, got {X.shape[1]}")
        W1, b1, W2, b2 = self.unpack(theta)
        pre = X @ W1.T + b1
        act = np.maximum(pre, 0.0)
        loss, dz = _nll_and_dlogits(act @ W2.T + b2, y)
        dW2 = dz.T @ act
        db2 = dz.sum(axis=0)
        dpre = (dz @ W2) * (pre > 0)
        dW1 = dpre.T @ X
        db1 = dpre.sum(axis=0)
        grad = np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])
        loss += 0.5 * self.l2_reg * float(theta @ theta)
        return loss, grad + self.l2_reg * theta

    def predict(self, theta, X) -> np.ndarray:
        return self.logits(theta, X).argmax(axis=1)


@dataclass(frozen=True, eq=False)
class Quadratic:
    """Worker i holds ``L_i(theta) = 0.5 theta^T A theta - b_i^T theta``.

    ``A`` is symmetric positive semi-definite, so every local loss is
    L-smooth with L the largest eigenvalue of A.
    """

    A: np.ndarray
    b: np.ndarray  # one row per honest worker

    kind = "quadratic"

    @property
    def n_params(self) -> int:
        return self.A.shape[0]

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.eigvalsh(self.A).max())

    def init(self, gen: np.random.Generator, mu: float = 1.0) -> np.ndarray:
        return mu * gen.uniform(-1.0, 1.0, self.n_params)

    def local_loss_and_grad(self, theta, i: int) -> tuple[float, np.ndarray]:
        Ath = self.A @ theta
        return 0.5 * float(theta @ Ath) - float(self.b[i] @ theta), Ath - self.b[i]

    @classmethod
    def random(cls, gen: np.random.Generator, d: int, n_workers: int, *, L: float = 1.0, spread: float = 1.0):
        Q, _ = np.linalg.qr(gen.standard_normal((d, d)))
        eig = np.linspace(0.1 * L, L, d)
        A = (Q * eig) @ Q.T
        A = 0.5 * (A + A.T)
        b = spread * gen.standard_normal((n_workers, d))
        return cls(A, b)


def numerical_grad(fun, theta, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function."""
    g = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        g[j] = (fun(theta + e) - fun(theta - e)) / (2 * h)
    return g
