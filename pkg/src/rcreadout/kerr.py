"""Random Kerr-oscillator networks and their classical driven dynamics.

A network is sampled from the scale-independent hyperparameters
{gamma, alpha, lambda_bar, mu} and evolves under

    d(beta_j)/dt = gamma * ( -beta_j + i Lambda_j |beta_j|^2 beta_j
                             - i sum_k W_R[j,k] beta_k
                             + sum_l W_I[j,l] u_l(t) )

driven by the recorded homodyne current with zero-order hold between
samples.  The measured output is the quadrature selected per node by the
angles phi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DivergenceError

#: amplitude beyond which integration aborts (pathological hyperparameters)
DIVERGENCE_GUARD = 1e6


@dataclass(frozen=True)
class RcHyperParams:
    """{K, gamma, alpha, lambda_bar, mu}: node count, decay rate (units of
    kappa), largest singular value of the coupling matrix, nonlinearity
    scale, input-coupling scale."""

    k_nodes: int
    gamma: float = 0.35
    alpha: float = 1.9
    lambda_bar: float = 5e-2
    mu: float = 5.0

    def __post_init__(self):
        if self.k_nodes < 1:
            raise ValueError("k_nodes must be >= 1")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.alpha < 0 or self.lambda_bar < 0:
            raise ValueError("alpha and lambda_bar must be nonnegative")


@dataclass
class KerrNetwork:
    """A sampled reservoir; immutable after construction by convention."""

    hp: RcHyperParams
    w_in: np.ndarray  # (K, L)
    w_res: np.ndarray  # (K, K), symmetric, largest singular value = alpha
    lam: np.ndarray  # (K,), entries in [-2 lambda_bar, 0]
    seed: int

    @property
    def k_nodes(self) -> int:
        return self.hp.k_nodes

    def with_lambda(self, lam) -> "KerrNetwork":
        """Copy with the nonlinearity vector replaced (e.g. forced to 0)."""
        lam = np.broadcast_to(np.asarray(lam, dtype=float), (self.k_nodes,))
        return KerrNetwork(self.hp, self.w_in, self.w_res, lam.copy(), self.seed)


def sample_network(hp: RcHyperParams, seed: int, n_inputs: int = 1) -> KerrNetwork:
    """Draw a network from the hyperparameter distributions.

    The coupling matrix starts as i.i.d. uniform [-1, 1], is symmetrized as
    (A + A^T)/2 and rescaled so its largest singular value equals alpha
    exactly.  Input couplings are uniform [-mu, mu]; nonlinearities uniform
    [-2 lambda_bar, 0].  Fully determined by (hp, seed).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    k = hp.k_nodes
    sub = 0
    while True:
        a = rng.uniform(-1.0, 1.0, size=(k, k))
        w_res = 0.5 * (a + a.T)
        s = np.linalg.svd(w_res, compute_uv=False)[0]
        if s > 0:
            break
        # probability-zero degenerate draw; continue from the same stream
        sub += 1
        if sub > 100:
            raise RuntimeError("could not sample a nonzero coupling matrix")
    if hp.alpha > 0:
        w_res *= hp.alpha / s
    else:
        w_res[:] = 0.0
    w_in = rng.uniform(-hp.mu, hp.mu, size=(k, n_inputs))
    lam = rng.uniform(-2.0 * hp.lambda_bar, 0.0, size=k) if hp.lambda_bar > 0 else np.zeros(k)
    return KerrNetwork(hp=hp, w_in=w_in, w_res=w_res, lam=lam, seed=seed)


def _rhs(net: KerrNetwork, beta: np.ndarray, drive: np.ndarray) -> np.ndarray:
    lin = -beta - 1j * (beta @ net.w_res.T)
    kerr = 1j * net.lam * (np.abs(beta) ** 2) * beta
    return net.hp.gamma * (lin + kerr + drive)


def integrate(
    net: KerrNetwork, u: np.ndarray, dt_record: float, substeps: int = 4
) -> np.ndarray:
    """RK4 integration from beta(0) = 0 with zero-order hold of the input.

    `u` is (N,) or (Q, N) of scalar drive samples; returns node amplitudes
    at the recorded times, shape (N, K) or (Q, N, K).
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    u = np.asarray(u, dtype=float)
    squeeze = u.ndim == 1
    if squeeze:
        u = u[None, :]
    q, n = u.shape
    k = net.k_nodes
    h = dt_record / substeps
    w_in = net.w_in[:, 0]  # single input channel

    beta = np.zeros((q, k), dtype=complex)
    out = np.empty((q, n, k), dtype=complex)
    # overflow in a diverging run is detected below, not a warning condition
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate_loop(net, u, beta, out, w_in, h, substeps, dt_record, squeeze)


def _integrate_loop(net, u, beta, out, w_in, h, substeps, dt_record, squeeze):
    q, n = u.shape
    k = net.k_nodes
    for i in range(n):
        drive = u[:, i, None] * w_in[None, :]
        for _ in range(substeps):
            k1 = _rhs(net, beta, drive)
            k2 = _rhs(net, beta + 0.5 * h * k1, drive)
            k3 = _rhs(net, beta + 0.5 * h * k2, drive)
            k4 = _rhs(net, beta + h * k3, drive)
            beta = beta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        amax = np.abs(beta).max()
        if not np.isfinite(amax) or amax > DIVERGENCE_GUARD:
            flat = np.argmax(np.abs(beta))
            raise DivergenceError(
                f"reservoir amplitude exceeded {DIVERGENCE_GUARD:.0e} at "
                f"t={(i + 1) * dt_record:.3f}, node {flat % k}",
                time=(i + 1) * dt_record,
                node=int(flat % k),
            )
        out[:, i, :] = beta
    return out[0] if squeeze else out


def linear_response_analytic(
    net: KerrNetwork, u: np.ndarray, dt_record: float
) -> np.ndarray:
    """Exact eigenmode solution for a linear (Lambda = 0) network.

    Diagonalizes the symmetric coupling matrix and propagates each mode's
    scalar ODE in closed form over every zero-order-hold interval.
    """
    if np.any(net.lam != 0):
        raise ValueError("analytic response requires Lambda = 0")
    u = np.asarray(u, dtype=float)
    squeeze = u.ndim == 1
    if squeeze:
        u = u[None, :]
    q, n = u.shape
    k = net.k_nodes
    gamma = net.hp.gamma

    delta, v = np.linalg.eigh(net.w_res)
    lam = gamma * (1.0 + 1j * delta)  # per-mode decay constant
    decay = np.exp(-lam * dt_record)
    gain = (1.0 - decay) / lam  # integral of exp over one hold interval
    f = gamma * (v.T @ net.w_in[:, 0])  # mode-space drive coefficients

    modes = np.zeros((q, k), dtype=complex)
    out = np.empty((q, n, k), dtype=complex)
    for i in range(n):
        modes = modes * decay[None, :] + u[:, i, None] * (f * gain)[None, :]
        out[:, i, :] = modes @ v.T
    return out[0] if squeeze else out


def quadratures(beta: np.ndarray) -> np.ndarray:
    """Interleaved sqrt(2) * (Re beta_1, Im beta_1, ..., Re beta_K, Im beta_K)."""
    out = np.empty(beta.shape[:-1] + (2 * beta.shape[-1],))
    out[..., 0::2] = np.sqrt(2.0) * beta.real
    out[..., 1::2] = np.sqrt(2.0) * beta.imag
    return out


def measure(x: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Project the quadrature vector through the block measurement matrix:
    x_phi_j = cos(phi_j) x_{2j} + sin(phi_j) x_{2j+1}."""
    phi = np.asarray(phi, dtype=float)
    return np.cos(phi) * x[..., 0::2] + np.sin(phi) * x[..., 1::2]
