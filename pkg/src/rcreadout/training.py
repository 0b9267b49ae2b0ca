"""Output-layer training: regularized multinomial cross entropy over the
recorded reservoir responses, minimized by full-batch gradient descent
with momentum over (W_o, phi)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import TrainingError
from .kerr import measure
from .seeds import DOMAIN_HEAD_INIT, derive_seed

N_CLASSES = 4


@dataclass(frozen=True)
class TrainConfig:
    # 1e-3 keeps every phi restart in a convergent basin even at Q=4;
    # weaker penalties let gradient descent blow up W_o on tiny training sets
    reg_l2: float = 1e-3
    step_size: float = 0.2
    momentum: float = 0.9
    max_iters: int = 5000
    tol_rel: float = 1e-9
    time_mask: int = 0  # earliest time index included in the loss

    def __post_init__(self):
        if self.reg_l2 < 0:
            raise ValueError("reg_l2 must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class ReadoutHead:
    """Trained output layer: weights, measurement angles, provenance."""

    w_out: np.ndarray  # (C, K)
    phi: np.ndarray  # (K,), reduced to [0, 2 pi)
    train_meta: dict = field(default_factory=dict)


def softmax(y: np.ndarray, axis: int = -1) -> np.ndarray:
    """Overflow-safe softmax along `axis`."""
    shifted = y - y.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _check_inputs(w_out, phi, x, labels):
    q, n, twok = x.shape
    k = twok // 2
    if twok != 2 * k:
        raise ValueError("responses must carry both quadratures (2K components)")
    if w_out.shape != (N_CLASSES, k):
        raise ValueError(f"w_out must be ({N_CLASSES}, {k}), got {w_out.shape}")
    if phi.shape != (k,):
        raise ValueError(f"phi must have length {k}")
    if labels.shape != (q,):
        raise ValueError("one label per response required")


def loss(
    w_out: np.ndarray,
    phi: np.ndarray,
    x: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
) -> float:
    """Cross entropy of softmax(W_o C(phi) x) against one-hot labels, plus
    (reg_l2/2)||W_o||_F^2.  `x` is (Q, N, 2K); labels are (Q,) ints."""
    l, _, _ = _loss_grad(w_out, phi, x, labels, cfg, want_grad=False)
    return l


def gradients(w_out, phi, x, labels, cfg):
    """Analytic (dW_o, dphi) of the regularized cross entropy."""
    _, dw, dphi = _loss_grad(w_out, phi, x, labels, cfg, want_grad=True)
    return dw, dphi


def _loss_grad(w_out, phi, x, labels, cfg, want_grad=True):
    w_out = np.asarray(w_out, dtype=float)
    phi = np.asarray(phi, dtype=float)
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    _check_inputs(w_out, phi, x, labels)
    if cfg.time_mask:
        x = x[:, cfg.time_mask :, :]
    q, n, _ = x.shape
    qn = q * n

    xphi = measure(x, phi)  # (Q, N, K)
    # non-finite inputs surface as a TrainingError, not runtime warnings
    with np.errstate(invalid="ignore", over="ignore"):
        logits = xphi @ w_out.T  # (Q, N, C)
        # log softmax via logsumexp: stable even when one class saturates
        shifted = logits - logits.max(axis=-1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=-1))
        p = np.exp(shifted - lse[..., None])
        logp = (
            shifted[np.arange(q)[:, None], np.arange(n)[None, :], labels[:, None]] - lse
        )
        value = -logp.sum() / qn + 0.5 * cfg.reg_l2 * float((w_out**2).sum())
    if not want_grad:
        return value, None, None

    g = p.copy()
    g[np.arange(q)[:, None], np.arange(n)[None, :], labels[:, None]] -= 1.0
    g /= qn  # (Q, N, C)
    dw = np.einsum("qnc,qnk->ck", g, xphi) + cfg.reg_l2 * w_out
    dxphi = g @ w_out  # (Q, N, K)
    dquad = -np.sin(phi) * x[..., 0::2] + np.cos(phi) * x[..., 1::2]
    dphi = np.einsum("qnk,qnk->k", dxphi, dquad)
    return value, dw, dphi


def train(
    x: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig | None = None,
    init_seed: int = 0,
) -> ReadoutHead:
    """Momentum gradient descent from W_o = 0 and random phi.

    phi is initialized uniform on [0, 2 pi) from `init_seed`; descent stops
    at max_iters or when the relative loss change drops below tol_rel.
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=int)
    k = x.shape[-1] // 2
    counts = np.bincount(labels, minlength=N_CLASSES)
    if np.any(counts == 0):
        import warnings

        warnings.warn("training set does not cover every class", stacklevel=2)

    rng = np.random.Generator(np.random.PCG64(init_seed))
    w = np.zeros((N_CLASSES, k))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=k)
    vw = np.zeros_like(w)
    vphi = np.zeros_like(phi)

    trace = []
    prev = np.inf
    for it in range(cfg.max_iters):
        value, dw, dphi = _loss_grad(w, phi, x, labels, cfg)
        if not np.isfinite(value):
            raise TrainingError(
                f"loss became non-finite at iteration {it}", iteration=it
            )
        trace.append(value)
        if prev - value >= 0 and abs(prev - value) < cfg.tol_rel * max(abs(prev), 1e-30):
            break
        prev = value
        vw = cfg.momentum * vw - cfg.step_size * dw
        vphi = cfg.momentum * vphi - cfg.step_size * dphi
        w = w + vw
        phi = phi + vphi

    phi = np.mod(phi, 2.0 * np.pi)
    final, _, _ = _loss_grad(w, phi, x, labels, cfg, want_grad=False)
    trace.append(final)
    return ReadoutHead(
        w_out=w,
        phi=phi,
        train_meta={
            "q": int(x.shape[0]),
            "loss_trace": [float(trace[0]), float(min(trace)), float(final)],
            "iterations": len(trace) - 1,
            "reg_l2": cfg.reg_l2,
            "init_seed": int(init_seed),
        },
    )


def train_restarts(
    x: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig | None = None,
    master_seed: int = 0,
    restarts: int = 3,
    restart_offset: int = 0,
) -> ReadoutHead:
    """Best-of-N phi restarts; init seeds come from the head-init domain."""
    best = None
    for i in range(restarts):
        seed = derive_seed(master_seed, DOMAIN_HEAD_INIT, restart_offset + i)
        head = train(x, labels, cfg, init_seed=seed)
        if best is None or head.train_meta["loss_trace"][-1] < best.train_meta["loss_trace"][-1]:
            best = head
    best.train_meta["restarts"] = restarts
    return best
