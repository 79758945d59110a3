"""GAN and BSGAN oversampling for tabular minority data in [0, 1]^d."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import class_partition
from .errors import Diverged, EmptyBatch, InsufficientNoise
from .nn import AdamState, BCE_EPS, apply_adam, backward, forward, init_mlp
from .sampling import borderline_smote

log = logging.getLogger(__name__)


def _clamped(v):
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise EmptyBatch("empty score vector")
    return np.clip(v, BCE_EPS, 1.0 - BCE_EPS)


def discriminator_loss(d_real, d_fake):
    """``-mean(log D(x)) - mean(log(1 - D(G(z))))``, the minimised form of the D objective."""
    r, f = _clamped(d_real), _clamped(d_fake)
    return float(-np.mean(np.log(r)) - np.mean(np.log(1.0 - f)))


def generator_loss(d_fake):
    """Non-saturating generator loss ``-mean(log D(G(z)))``."""
    return float(-np.mean(np.log(_clamped(d_fake))))


@dataclass(frozen=True)
class UniformNoise:
    dim: int


@dataclass(frozen=True, eq=False)
class BorderlineSamples:
    samples: np.ndarray

    @property
    def dim(self):
        return self.samples.shape[1]


class _NoiseStream:
    """Draws generator inputs: fresh U(0,1) rows, or borderline rows cycled in shuffled passes."""

    def __init__(self, noise, rng):
        self.noise = noise
        self.rng = rng
        if isinstance(noise, BorderlineSamples):
            if noise.samples.shape[0] == 0:
                raise InsufficientNoise("BorderlineSamples is empty")
            self._order = np.empty(0, dtype=np.int64)

    def draw(self, n):
        if isinstance(self.noise, UniformNoise):
            return self.rng.random((n, self.noise.dim))
        rows = []
        need = n
        while need:
            if len(self._order) == 0:
                self._order = self.rng.permutation(self.noise.samples.shape[0])
            take, self._order = self._order[:need], self._order[need:]
            rows.append(take)
            need -= len(take)
        return self.noise.samples[np.concatenate(rows)]


@dataclass(frozen=True)
class GanConfig:
    gen_hidden: tuple = (512, 256, 128)
    disc_hidden: tuple = (64, 128, 256, 512)
    batch_size: int = 32
    learning_rate: float = 1e-5
    epochs: int = 1000
    disc_steps_per_gen_step: int = 1
    accept_threshold: float = 0.5
    max_rounds: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0 or self.disc_steps_per_gen_step < 1:
            raise ValueError("batch_size and disc steps must be >= 1, epochs >= 0")
        if not 0.0 <= self.accept_threshold < 1.0:
            raise ValueError(f"accept_threshold must lie in [0, 1), got {self.accept_threshold}")

    def gen_widths(self, input_dim, output_dim):
        return [input_dim, *self.gen_hidden, output_dim]

    def disc_widths(self, input_dim):
        return [input_dim, *self.disc_hidden, 1]


@dataclass
class GanModel:
    generator: object
    discriminator: object
    loss_history: list = field(default_factory=list)

    def generate(self, inputs):
        out, _ = forward(self.generator, inputs)
        return out

    def score(self, rows):
        out, _ = forward(self.discriminator, rows)
        return out[:, 0]


def build_gan(input_dim, output_dim, cfg):
    """Untrained generator (ReLU stack, sigmoid output) and discriminator."""
    g_seed, d_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    g_widths = cfg.gen_widths(input_dim, output_dim)
    d_widths = cfg.disc_widths(output_dim)
    gen = init_mlp(g_widths, ["relu"] * len(cfg.gen_hidden) + ["sigmoid"], seed=g_seed)
    disc = init_mlp(d_widths, ["relu"] * len(cfg.disc_hidden) + ["sigmoid"], seed=d_seed)
    return GanModel(gen, disc)


def _train_rng(cfg):
    return np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(3)[2])


def _disc_step(model, real, fake, state):
    d_real, c_real = forward(model.discriminator, real)
    d_fake, c_fake = forward(model.discriminator, fake)
    loss = discriminator_loss(d_real, d_fake)
    r = np.clip(d_real, BCE_EPS, 1.0 - BCE_EPS)
    f = np.clip(d_fake, BCE_EPS, 1.0 - BCE_EPS)
    g_real = backward(model.discriminator, c_real, -1.0 / r / len(r))
    g_fake = backward(model.discriminator, c_fake, 1.0 / (1.0 - f) / len(f))
    grads = [a + b for a, b in zip(g_real, g_fake)]
    return loss, apply_adam(model.discriminator, grads, state)


def _gen_step(model, inputs, state):
    fake, c_gen = forward(model.generator, inputs)
    d_fake, c_disc = forward(model.discriminator, fake)
    loss = generator_loss(d_fake)
    f = np.clip(d_fake, BCE_EPS, 1.0 - BCE_EPS)
    _, d_input = backward(model.discriminator, c_disc, -1.0 / f / len(f), return_input_grad=True)
    grads = backward(model.generator, c_gen, d_input)
    return loss, apply_adam(model.generator, grads, state)


def train_gan(real_minority, noise, cfg):
    """Adversarial training on minority rows scaled to [0, 1].

    Each epoch performs ``cfg.disc_steps_per_gen_step`` discriminator updates,
    each on the next real minibatch (rows reshuffled on every pass) against
    an equal-sized generated batch, followed by one generator update. With
    ``BorderlineSamples`` the generator consumes borderline rows instead of
    uniform noise.
    """
    real = np.atleast_2d(np.asarray(real_minority, dtype=float))
    if real.shape[0] == 0:
        raise EmptyBatch("no real minority rows")
    model = build_gan(noise.dim, real.shape[1], cfg)
    rng = _train_rng(cfg)
    stream = _NoiseStream(noise, rng)
    d_state = AdamState.zeros_like(model.discriminator.parameters(), learning_rate=cfg.learning_rate)
    g_state = AdamState.zeros_like(model.generator.parameters(), learning_rate=cfg.learning_rate)
    batch = min(cfg.batch_size, real.shape[0])
    order = np.empty(0, dtype=np.int64)
    for _ in range(cfg.epochs):
        d_losses = []
        for _ in range(cfg.disc_steps_per_gen_step):
            if len(order) < batch:
                order = np.concatenate([order, rng.permutation(real.shape[0])])
            idx, order = order[:batch], order[batch:]
            fake = model.generate(stream.draw(batch))
            d_loss, d_state = _disc_step(model, real[idx], fake, d_state)
            d_losses.append(d_loss)
        g_loss, g_state = _gen_step(model, stream.draw(batch), g_state)
        d_loss = float(np.mean(d_losses))
        if not (math.isfinite(d_loss) and math.isfinite(g_loss)):
            raise Diverged(f"GAN losses became non-finite (D={d_loss}, G={g_loss})")
        model.loss_history.append((d_loss, g_loss))
    return model


def accumulate_fake(model, noise, n_fake, cfg, rng=None):
    """Collect ``n_fake`` generated rows the discriminator scores >= ``accept_threshold``.

    After ``max_rounds`` batches (default ``100 * ceil(n_fake / batch)``) the
    remainder is filled with the best-scoring rejected rows and a warning is
    logged.
    """
    if n_fake < 0:
        raise ValueError("n_fake must be >= 0")
    dim_out = model.generator.widths[-1]
    if n_fake == 0:
        return np.empty((0, dim_out))
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(4)[3])
    stream = _NoiseStream(noise, rng)
    batch = cfg.batch_size
    rounds = cfg.max_rounds or 100 * math.ceil(n_fake / batch)
    kept, rejected, rejected_scores = [], [], []
    n_kept = 0
    for _ in range(rounds):
        rows = model.generate(stream.draw(batch))
        scores = model.score(rows)
        ok = scores >= cfg.accept_threshold
        kept.append(rows[ok])
        n_kept += int(ok.sum())
        rejected.append(rows[~ok])
        rejected_scores.append(scores[~ok])
        if n_kept >= n_fake:
            return np.vstack(kept)[:n_fake]
    short = n_fake - n_kept
    log.warning("accumulate_fake: only %d of %d rows passed threshold %.3f after %d rounds; "
                "filling %d with best-scoring rejects", n_kept, n_fake, cfg.accept_threshold, rounds, short)
    pool = np.vstack(rejected)
    pool_scores = np.concatenate(rejected_scores)
    while len(pool) < short:
        # too few rounds to supply the remainder: draw more, unfiltered
        extra = model.generate(stream.draw(batch))
        pool = np.vstack([pool, extra])
        pool_scores = np.concatenate([pool_scores, model.score(extra)])
    best = np.argsort(-pool_scores, kind="stable")[:short]
    return np.vstack(kept + [pool[best]])


def _balance_gap(train):
    return max(train.n_majority - train.n_minority, 0)


def oversample_gan(train, cfg):
    """Plain GAN: uniform noise in, ``majority - minority`` synthetic minority rows out."""
    minority, _ = class_partition(train)
    n_fake = _balance_gap(train)
    if n_fake == 0:
        return np.empty((0, train.n_features))
    noise = UniformNoise(train.n_features)
    model = train_gan(minority.features, noise, cfg)
    return accumulate_fake(model, noise, n_fake, cfg)


def oversample_bsgan(train, smote_cfg, cfg, return_model=False):
    """BSGAN: Borderline-SMOTE rows replace the generator's noise input.

    Borderline-SMOTE first produces ``majority - minority`` rows ``u``; the GAN
    is trained against the real minority rows with ``u`` as generator input,
    and the output is accumulated from ``u`` as well.
    """
    minority, _ = class_partition(train)
    n_fake = _balance_gap(train)
    if n_fake == 0:
        out = np.empty((0, train.n_features))
        return (out, None) if return_model else out
    u = borderline_smote(train, replace(smote_cfg, amount=n_fake))
    noise = BorderlineSamples(u)
    model = train_gan(minority.features, noise, cfg)
    out = accumulate_fake(model, noise, n_fake, cfg)
    return (out, model) if return_model else out
