"""Black-box variational inference for SPF.

The ELBO is estimated from joint draws of the mean-field gamma family and its
gradient with the score-function estimator

    grad ELBO ~= 1/S sum_s grad log q(z_s) * (log p(z_s, Y) - log q(z_s)).

Document-topic terms enter through a minibatch and are scaled by ``D / |B|``.
Parameters are optimized in log space with Adam (ascent).

Two variance-reduction devices are available and on by default:

``estimator="local"``
    each coordinate's score is multiplied only by the terms of
    ``log p - log q`` that involve its own latent variable (its Markov
    blanket).  The dropped terms are independent of that variable under q, so
    the estimator stays unbiased.
``baseline="loo"``
    with ``S >= 2`` draws, each draw's integrand is centred by the mean of the
    other ``S - 1`` draws (leave-one-out control variate), also unbiased.

``estimator="full", baseline="none", mc_samples=1`` is the plain estimator.
"""
import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import VariationalParams, init_variational
from .statmath import gamma_logpdf, gamma_sample, gamma_score_grad, make_rng

logger = logging.getLogger(__name__)

ESTIMATORS = ("local", "full")
BASELINES = ("loo", "none")


class TrainingDiverged(RuntimeError):
    def __init__(self, step, trace, detail=""):
        super().__init__(f"non-finite parameters after step {step}{': ' + detail if detail else ''}")
        self.step = step
        self.trace = trace


class NonFiniteError(FloatingPointError):
    """A non-finite intermediate appeared while evaluating the ELBO."""


@dataclass
class TrainConfig:
    epochs: int = 150
    batch_size: int = 1024
    learning_rate: float = 0.1
    mc_samples: int = 4
    rng_seed: int = 0
    adam: tuple = (0.9, 0.999, 1e-8)
    estimator: str = "local"
    baseline: str = "loo"
    # average log-parameters over this trailing fraction of epochs (0 = last iterate)
    average_tail: float = 0.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1 or self.mc_samples < 1:
            raise ValueError("batch_size and mc_samples must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.baseline not in BASELINES:
            raise ValueError(f"baseline must be one of {BASELINES}")
        if not 0.0 <= self.average_tail < 1.0:
            raise ValueError("average_tail must be in [0, 1)")
        if self.baseline == "loo" and self.mc_samples < 2:
            raise ValueError("the leave-one-out baseline needs mc_samples >= 2")
        self.adam = tuple(float(x) for x in self.adam)


@dataclass
class TrainTrace:
    step: list = field(default_factory=list)
    epoch: list = field(default_factory=list)
    elbo: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def __len__(self):
        return len(self.step)

    def record(self, step, epoch, elbo, seconds):
        self.step.append(step)
        self.epoch.append(epoch)
        self.elbo.append(float(elbo))
        self.seconds.append(float(seconds))

    def epoch_elbo(self):
        """Mean ELBO estimate of each epoch, in epoch order."""
        ep = np.asarray(self.epoch)
        el = np.asarray(self.elbo)
        return np.array([el[ep == e].mean() for e in np.unique(ep)])

    def epoch_seconds(self):
        ep = np.asarray(self.epoch)
        sec = np.asarray(self.seconds)
        return np.array([sec[ep == e].sum() for e in np.unique(ep)])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "epoch", "elbo_estimate", "seconds"])
            for row in zip(self.step, self.epoch, self.elbo, self.seconds):
                w.writerow([row[0], row[1], repr(row[2]), f"{row[3]:.6f}"])


@dataclass
class OptimizerState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params, adam=(0.9, 0.999, 1e-8)):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0, *adam)


def adam_step(state, params, grads, lr):
    """One bias-corrected Adam ascent step, updating ``params`` in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p += lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return params


class Batch:
    """Sparse view of a set of documents, with the ``D / |B|`` scale."""

    def __init__(self, dtm, docs):
        self.docs = np.asarray(docs, dtype=np.int64)
        if self.docs.size == 0:
            raise ValueError("batch must be non-empty")
        sub = dtm.counts[self.docs].tocoo()
        self.row = sub.row.astype(np.int64)
        self.col = sub.col.astype(np.int64)
        self.y = sub.data.astype(np.float64)
        self.size = self.docs.size
        self.scale = dtm.D / self.size
        self.V = dtm.V
        # q(theta) rate factor; empty documents use 1 so the rate stays positive
        self.length = np.maximum(dtm.N[self.docs], 1).astype(np.float64)
        self.log_fact = float(dtm.log_factorial[self.docs].sum())
        # nonzero -> document / term indicator matrices for per-row and per-column sums
        ones = np.ones(self.y.size)
        entries = np.arange(self.y.size)
        self.row_sum = sp.csr_matrix((ones, (entries, self.row)), shape=(self.y.size, self.size))
        self.col_sum = sp.csr_matrix((ones, (entries, self.col)), shape=(self.y.size, self.V))


@dataclass
class Draw:
    """``S`` joint draws from q restricted to a batch (leading axis = draw)."""

    theta: np.ndarray  # (S, |B|, K)
    beta_star: np.ndarray  # (S, K, V)
    beta_tilde: np.ndarray  # (S, |seeds|)


def sample_q(params, batch, S, rng):
    """Draw ``beta_star``, then ``beta_tilde``, then the batch's ``theta``."""
    bs = gamma_sample(np.broadcast_to(params.beta_shp, (S,) + params.beta_shp.shape), params.beta_rte, rng)
    bt = gamma_sample(np.broadcast_to(params.betatilde_shp, (S,) + params.betatilde_shp.shape), params.betatilde_rte, rng)
    t_shp = params.theta_shp[batch.docs]
    t_rte = params.theta_rte[batch.docs] * batch.length[:, None]
    th = gamma_sample(np.broadcast_to(t_shp, (S,) + t_shp.shape), t_rte, rng)
    return Draw(np.asarray(th).reshape((S,) + t_shp.shape), np.asarray(bs).reshape((S,) + params.beta_shp.shape),
                np.asarray(bt).reshape((S,) + params.betatilde_shp.shape))


def _check_finite(name, arr):
    bad = ~np.isfinite(arr)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NonFiniteError(f"non-finite {name} at index {idx}")


@dataclass
class _Terms:
    elbo: np.ndarray  # (S,)
    recon: np.ndarray  # (S,) scaled reconstruction term
    doc_yl: np.ndarray  # (S, |B|) sum_v y log(lambda) per document
    col_yl: np.ndarray  # (S, V) sum_{d in B} y log(lambda) per term
    beta: np.ndarray  # (S, K, V)
    lpq_theta: np.ndarray  # (S, |B|, K) log p - log q
    lpq_beta: np.ndarray  # (S, K, V)
    lpq_tilde: np.ndarray  # (S, |seeds|)


def _evaluate(draw, params, spec, batch):
    p = spec.priors
    ks, vs = spec.lexicon.pairs()
    S = draw.theta.shape[0]
    beta = draw.beta_star.copy()
    beta[:, ks, vs] += draw.beta_tilde
    theta = draw.theta
    # rates only at nonzero counts; the sum over all terms uses sum_v beta_kv
    lam = np.einsum("snk,snk->sn", theta[:, batch.row, :], beta[:, :, batch.col].transpose(0, 2, 1))
    with np.errstate(divide="ignore"):
        yl = batch.y * np.log(lam)
    _check_finite("log rate", yl)
    doc_yl = np.asarray(batch.row_sum.T @ yl.T).T
    col_yl = np.asarray(batch.col_sum.T @ yl.T).T
    total_rate = np.einsum("snk,sk->s", theta, beta.sum(axis=2))
    recon = batch.scale * (yl.sum(axis=1) - total_rate - batch.log_fact)

    t_shp = params.theta_shp[batch.docs]
    t_rte = params.theta_rte[batch.docs] * batch.length[:, None]
    lpq_theta = gamma_logpdf(theta, p.e, p.f) - gamma_logpdf(theta, t_shp, t_rte)
    lpq_beta = gamma_logpdf(draw.beta_star, p.a, p.b) - gamma_logpdf(draw.beta_star, params.beta_shp, params.beta_rte)
    if draw.beta_tilde.shape[1]:
        lpq_tilde = gamma_logpdf(draw.beta_tilde, p.c, p.d) - gamma_logpdf(
            draw.beta_tilde, params.betatilde_shp, params.betatilde_rte)
    else:
        lpq_tilde = np.zeros((S, 0))
    elbo = (recon + batch.scale * lpq_theta.sum(axis=(1, 2)) + lpq_beta.sum(axis=(1, 2))
            + lpq_tilde.sum(axis=1))
    _check_finite("ELBO estimate", elbo)
    return _Terms(elbo, recon, doc_yl, col_yl, beta, lpq_theta, lpq_beta, lpq_tilde)


@dataclass
class GradientSamples:
    """Per-draw score-function gradient contributions (leading axis = draw).

    ``theta_*`` cover only the batch rows, in ``docs`` order.
    """

    docs: np.ndarray
    theta_shp: np.ndarray
    theta_rte: np.ndarray
    beta_shp: np.ndarray
    beta_rte: np.ndarray
    betatilde_shp: np.ndarray
    betatilde_rte: np.ndarray
    elbo: np.ndarray

    def mean(self, D):
        """Average over draws, scattered into a params-aligned gradient."""
        th_shp = np.zeros((D,) + self.theta_shp.shape[2:])
        th_rte = np.zeros_like(th_shp)
        th_shp[self.docs] = self.theta_shp.mean(axis=0)
        th_rte[self.docs] = self.theta_rte.mean(axis=0)
        return VariationalParams(
            th_shp, th_rte, self.beta_shp.mean(axis=0), self.beta_rte.mean(axis=0),
            self.betatilde_shp.mean(axis=0), self.betatilde_rte.mean(axis=0))


def _centre(f, baseline):
    if baseline == "none":
        return f
    S = f.shape[0]
    return f - (f.sum(axis=0, keepdims=True) - f) / (S - 1)


def gradient_samples(params, spec, batch, draw, estimator="local", baseline="none"):
    """Score-function gradient terms w.r.t. the natural (shape, rate) parameters."""
    terms = _evaluate(draw, params, spec, batch)
    S = draw.theta.shape[0]
    ks, vs = spec.lexicon.pairs()

    t_shp = params.theta_shp[batch.docs]
    t_rte = params.theta_rte[batch.docs]
    sc_tshp, sc_trte = gamma_score_grad(draw.theta, t_shp, t_rte * batch.length[:, None])
    sc_trte = sc_trte * batch.length[:, None]  # chain rule through N_d * rate
    sc_bshp, sc_brte = gamma_score_grad(draw.beta_star, params.beta_shp, params.beta_rte)
    if len(ks):
        sc_sshp, sc_srte = gamma_score_grad(draw.beta_tilde, params.betatilde_shp, params.betatilde_rte)
    else:
        sc_sshp = sc_srte = np.zeros((S, 0))

    if estimator == "full":
        f_all = terms.elbo
        f_theta = f_all[:, None, None]
        f_beta = f_all[:, None, None]
        f_tilde = f_all[:, None]
    else:
        th_sum = draw.theta.sum(axis=1)  # (S, K)
        B_k = terms.beta.sum(axis=2)  # (S, K)
        f_theta = batch.scale * (terms.doc_yl[:, :, None] - draw.theta * B_k[:, None, :] + terms.lpq_theta)
        f_beta = (batch.scale * (terms.col_yl[:, None, :] - draw.beta_star * th_sum[:, :, None])
                  + terms.lpq_beta)
        f_tilde = (batch.scale * (terms.col_yl[:, vs] - draw.beta_tilde * th_sum[:, ks]) + terms.lpq_tilde)
    f_theta = _centre(np.broadcast_to(f_theta, draw.theta.shape), baseline)
    f_beta = _centre(np.broadcast_to(f_beta, draw.beta_star.shape), baseline)
    f_tilde = _centre(np.broadcast_to(f_tilde, draw.beta_tilde.shape), baseline)
    return GradientSamples(
        batch.docs, sc_tshp * f_theta, sc_trte * f_theta, sc_bshp * f_beta, sc_brte * f_beta,
        sc_sshp * f_tilde, sc_srte * f_tilde, terms.elbo)


def _as_batch(dtm, batch):
    return batch if isinstance(batch, Batch) else Batch(dtm, np.arange(dtm.D) if batch is None else batch)


def elbo_samples(params, spec, batch, draw):
    """Per-draw ELBO estimates for externally supplied draws from q."""
    return _evaluate(draw, params, spec, batch).elbo


def elbo_estimate(dtm, params, spec, batch, rng, S=1):
    """Average of ``S`` single-draw ELBO estimates on a minibatch."""
    b = _as_batch(dtm, batch)
    draw = sample_q(params, b, S, rng)
    return float(_evaluate(draw, params, spec, b).elbo.mean())


def grad_estimate(dtm, params, spec, batch, rng, S=1, estimator="full", baseline="none"):
    """Score-function ELBO gradient w.r.t. the natural variational parameters.

    Returns a :class:`VariationalParams`-shaped container of gradients; rows
    of ``theta_*`` outside the batch are exactly zero.
    """
    b = _as_batch(dtm, batch)
    draw = sample_q(params, b, S, rng)
    return gradient_samples(params, spec, b, draw, estimator, baseline).mean(dtm.D)


def reconstruction(dtm, theta, beta, docs=None):
    """``D / |B| * sum_{d in B} sum_v log Pois(y_dv | (theta beta)_dv)``.

    ``theta`` holds rows for ``docs`` (all documents when ``docs`` is None).
    """
    b = _as_batch(dtm, docs)
    lam = np.einsum("nk,kn->n", theta[b.row], beta[:, b.col])
    total = float(theta.sum(axis=0) @ beta.sum(axis=1))
    return b.scale * (float(np.sum(b.y * np.log(lam))) - total - b.log_fact)


def train(dtm, spec, cfg=None, init=None, freeze_globals=False, progress=None):
    """Fit variational parameters by minibatch BBVI with Adam.

    Parameters
    ----------
    init : VariationalParams, optional
        Starting point; defaults to :func:`init_variational`.
    freeze_globals : bool
        Keep the topic-term factors fixed and fit only document-topic factors
        (used to fold in unseen documents).
    progress : callable, optional
        Called as ``progress(epoch, mean_epoch_elbo, params)`` after each epoch.

    Returns
    -------
    params : VariationalParams
    trace : TrainTrace
    """
    cfg = cfg or TrainConfig()
    if dtm.D != spec.D or dtm.V != spec.V:
        raise ValueError(f"DTM is {dtm.D}x{dtm.V}, spec expects {spec.D}x{spec.V}")
    params = (init or init_variational(spec)).copy()
    params.check()
    trace = TrainTrace()
    if cfg.epochs == 0:
        return params, trace

    log_params = [np.log(a) for a in params.arrays()]
    state = OptimizerState.zeros_like(log_params, cfg.adam)
    rng_part = make_rng(cfg.rng_seed, "partition")
    rng_q = make_rng(cfg.rng_seed, "variational")
    step = 0
    n_avg = int(cfg.average_tail * cfg.epochs)
    avg = [np.zeros_like(lp) for lp in log_params] if n_avg else None
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        perm = rng_part.permutation(dtm.D)
        for lo in range(0, dtm.D, cfg.batch_size):
            ts = time.perf_counter()
            batch = Batch(dtm, np.sort(perm[lo:lo + cfg.batch_size]))
            draw = sample_q(params, batch, cfg.mc_samples, rng_q)
            samples = gradient_samples(params, spec, batch, draw, cfg.estimator, cfg.baseline)
            grad = samples.mean(dtm.D)
            # d/d log(phi) = phi * d/d phi
            g_log = [g * p for g, p in zip(grad.arrays(), params.arrays())]
            if freeze_globals:
                for g in g_log[2:]:
                    g[...] = 0.0
            adam_step(state, log_params, g_log, cfg.learning_rate)
            step += 1
            with np.errstate(over="ignore", under="ignore"):
                params = VariationalParams(*(np.exp(lp) for lp in log_params))
            try:
                params.check()
            except ValueError as exc:
                raise TrainingDiverged(step, trace, str(exc)) from None
            trace.record(step, epoch + 1, samples.elbo.mean(), time.perf_counter() - ts)
        if avg is not None and epoch >= cfg.epochs - n_avg:
            for a, lp in zip(avg, log_params):
                a += lp / n_avg
        if progress is not None:
            n_steps = -(-dtm.D // cfg.batch_size)
            progress(epoch + 1, float(np.mean(trace.elbo[-n_steps:])), params)
        logger.debug("epoch %d done in %.2fs", epoch + 1, time.perf_counter() - t0)
    if avg is not None:
        params = VariationalParams(*(np.exp(a) for a in avg))
    return params, trace
