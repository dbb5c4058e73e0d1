"""Small variational autoencoder over flattened feature windows.

Dense encoder -> diagonal Gaussian latent -> dense decoder. Trained with
summed squared reconstruction error plus a weighted KL term; generation
decodes standard-normal latents and clips to the feature range [0, 1].
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, DataError
from ..numgrad import AdamState, GradSet, ParamSet, adam_step, dense_backward, dense_forward


class WindowVae:
    def __init__(self, input_dim: int, latent_dim: int = 16, hidden: int = 64,
                 kl_weight: float = 0.05, seed: int = 0):
        if input_dim < 1 or latent_dim < 1 or hidden < 1:
            raise ContractError("vae dimensions must be >= 1")
        self.input_dim = input_dim
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.kl_weight = kl_weight
        rng = np.random.default_rng((seed, 183))

        def init(fan_in, shape):
            k = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-k, k, size=shape)

        self.params = ParamSet({
            "enc_W1": init(input_dim, (input_dim, hidden)),
            "enc_b1": np.zeros(hidden),
            "enc_Wmu": init(hidden, (hidden, latent_dim)),
            "enc_bmu": np.zeros(latent_dim),
            "enc_Wlv": init(hidden, (hidden, latent_dim)),
            "enc_blv": np.zeros(latent_dim),
            "dec_W1": init(latent_dim, (latent_dim, hidden)),
            "dec_b1": np.zeros(hidden),
            "dec_W2": init(hidden, (hidden, input_dim)),
            "dec_b2": np.zeros(input_dim),
        })
        self.trained = False

    def loss_and_grads(self, X: np.ndarray, rng: np.random.Generator):
        """ELBO-style loss on one batch with the reparameterization trick."""
        p = self.params
        B = X.shape[0]
        h1, c_h1 = dense_forward(X, p["enc_W1"], p["enc_b1"], activation="relu")
        mu, c_mu = dense_forward(h1, p["enc_Wmu"], p["enc_bmu"], activation="none")
        lv, c_lv = dense_forward(h1, p["enc_Wlv"], p["enc_blv"], activation="none")
        std = np.exp(0.5 * lv)
        eps = rng.standard_normal(mu.shape)
        z = mu + std * eps
        hd, c_hd = dense_forward(z, p["dec_W1"], p["dec_b1"], activation="relu")
        xh, c_xh = dense_forward(hd, p["dec_W2"], p["dec_b2"], activation="none")

        diff = xh - X
        recon = float((diff * diff).sum()) / B
        kl_terms = -0.5 * (1.0 + lv - mu * mu - np.exp(lv))
        kl = self.kl_weight * float(kl_terms.sum()) / B
        loss = recon + kl

        d_xh = 2.0 * diff / B
        dW2, db2, d_hd = dense_backward(d_xh, c_xh)
        dW1d, db1d, d_z = dense_backward(d_hd, c_hd)
        d_mu = d_z + self.kl_weight * mu / B
        d_lv = d_z * eps * 0.5 * std + self.kl_weight * (-0.5) * (1.0 - np.exp(lv)) / B
        dWmu, dbmu, d_h1a = dense_backward(d_mu, c_mu)
        dWlv, dblv, d_h1b = dense_backward(d_lv, c_lv)
        dW1e, db1e, _ = dense_backward(d_h1a + d_h1b, c_h1)
        grads = GradSet({
            "enc_W1": dW1e, "enc_b1": db1e,
            "enc_Wmu": dWmu, "enc_bmu": dbmu,
            "enc_Wlv": dWlv, "enc_blv": dblv,
            "dec_W1": dW1d, "dec_b1": db1d,
            "dec_W2": dW2, "dec_b2": db2,
        })
        return loss, grads

    def fit(self, X: np.ndarray, epochs: int = 30, batch_size: int = 128,
            lr: float = 0.01, seed: int = 0) -> list[float]:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ContractError(f"expected (N, {self.input_dim}) training data")
        if X.shape[0] < 1:
            raise DataError("vae training needs at least one example")
        adam = AdamState(self.params)
        losses = []
        for epoch in range(epochs):
            rng = np.random.default_rng((seed, 184, epoch))
            order = rng.permutation(X.shape[0])
            epoch_losses = []
            for start in range(0, X.shape[0], batch_size):
                batch = X[order[start:start + batch_size]]
                loss, grads = self.loss_and_grads(batch, rng)
                adam_step(self.params, grads, adam, lr)
                epoch_losses.append(loss)
            losses.append(float(np.mean(epoch_losses)))
        self.trained = True
        return losses

    def decode(self, z: np.ndarray) -> np.ndarray:
        p = self.params
        hd, _ = dense_forward(z, p["dec_W1"], p["dec_b1"], activation="relu")
        xh, _ = dense_forward(hd, p["dec_W2"], p["dec_b2"], activation="none")
        return xh

    def reconstruct(self, X: np.ndarray) -> np.ndarray:
        """Deterministic round trip through the latent mean (no sampling)."""
        p = self.params
        h1, _ = dense_forward(X, p["enc_W1"], p["enc_b1"], activation="relu")
        mu, _ = dense_forward(h1, p["enc_Wmu"], p["enc_bmu"], activation="none")
        return self.decode(mu)

    def generate(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Decode n seeded standard-normal latents, clipped to [0, 1]."""
        if not self.trained:
            raise ContractError("generator has not been trained yet")
        if n == 0:
            return np.zeros((0, self.input_dim))
        z = rng.standard_normal((n, self.latent_dim))
        return np.clip(self.decode(z), 0.0, 1.0)
