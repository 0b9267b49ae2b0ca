"""Two-qubit + cavity readout simulation.

Builds the joint Hilbert-space operators for the Jaynes-Cummings and
dispersive models, integrates the unconditional master equation (RK4) and
the homodyne stochastic master equation (Ito; Euler drift for the
dispersive model, RK4 drift for the stiffer JC model), and emits labeled
datasets of measurement currents.

Conventions
-----------
* kappa is the global rate unit; all other rates and times are expressed
  in units of kappa and 1/kappa.
* Tensor order is (qubit 1 x qubit 2 x cavity); qubit basis is
  [|0>, |1>] with sigma_z |1> = +|1>, so the joint label z in {0..3} has
  qubit 1 as the most significant bit and |11> is the most blue-shifted
  pointer state.
* Density matrices are stored row-major; the vectorized form used
  internally is rho.reshape(-1) so that vec(A rho B) =
  kron(A, B^T) vec(rho).
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import _smekernel
from .exceptions import (
    IntegrationInstabilityError,
    UnsupportedModelError,
    ZeroDetuningError,
)
from .seeds import DOMAIN_TRAIN_DATA, derive_seed

MODEL_DISPERSIVE = "dispersive"
MODEL_JC = "jc"

N_CLASSES = 4

#: default inner integration step per model, in units of 1/kappa.  The JC
#: model carries qubit detunings of ~180 kappa, so the per-step phase
#: advance must stay small.
DEFAULT_DT_INT = {MODEL_DISPERSIVE: 1e-3, MODEL_JC: 2e-4}

TRUNCATION_LEAK_LIMIT = 1e-5
_HERMITIZE_STRIDE = 100


# ---------------------------------------------------------------------------
# specs and derived parameters


@dataclass(frozen=True)
class QuantumSystemSpec:
    """Physical parameters of the measured system, in units of kappa."""

    model: str
    kappa: float = 1.0
    delta_c: float = 0.0
    epsilon0: float = 2.0
    delta_q: tuple[float, ...] = (180.0, 130.0)
    g: tuple[float, ...] = (18.0, 13.0)
    gamma_h: float = 1e-2
    n_fock: int = 30
    include_correlated_decay: bool = False

    def __post_init__(self):
        if self.model not in (MODEL_DISPERSIVE, MODEL_JC):
            raise ValueError(f"unknown model {self.model!r}")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.n_fock < 2:
            raise ValueError("n_fock must be at least 2")
        if self.gamma_h < 0:
            raise ValueError("rates must be nonnegative")
        object.__setattr__(self, "delta_q", tuple(float(x) for x in self.delta_q))
        object.__setattr__(self, "g", tuple(float(x) for x in self.g))
        if len(self.delta_q) != len(self.g):
            raise ValueError("delta_q and g must have equal length")

    @property
    def n_qubits(self) -> int:
        return len(self.g)

    @property
    def dim(self) -> int:
        return (2 ** self.n_qubits) * self.n_fock

    def qubit_detunings_from_cavity(self) -> np.ndarray:
        """delta_j = Delta_{q,j} - Delta_c."""
        return np.asarray(self.delta_q) - self.delta_c


def default_spec(model: str = MODEL_DISPERSIVE, **overrides) -> QuantumSystemSpec:
    """Representative SC-circuit parameter set used throughout the tests.

    chi = (1.8, 1.3), g/delta = 0.1, resonant drive epsilon0 = 2, qubit
    decay gamma_h = 1e-2, all in units of kappa.
    """
    return QuantumSystemSpec(model=model, **overrides)


@dataclass(frozen=True)
class DispersiveParams:
    """Second-order parameters of the dispersive model."""

    chi: tuple[float, ...]
    j_coupling: tuple[tuple[float, ...], ...]
    delta_q_tilde: tuple[float, ...]


def derive_dispersive_params(spec: QuantumSystemSpec) -> DispersiveParams:
    """chi_j = g_j^2/delta_j, J_jk = g_j g_k (delta_j+delta_k)/(2 delta_j delta_k),
    and the renormalized detunings Delta~_qj = Delta_qj + chi_j."""
    delta = spec.qubit_detunings_from_cavity()
    for j, d in enumerate(delta):
        if d == 0.0:
            raise ZeroDetuningError(
                f"qubit {j + 1} is resonant with the cavity (delta_{j + 1} = 0)"
            )
    g = np.asarray(spec.g)
    chi = g**2 / delta
    jmat = np.outer(g, g) * (delta[:, None] + delta[None, :]) / (
        2.0 * np.outer(delta, delta)
    )
    return DispersiveParams(
        chi=tuple(chi),
        j_coupling=tuple(tuple(row) for row in jmat),
        delta_q_tilde=tuple(np.asarray(spec.delta_q) + chi),
    )


def chi_expectation(spec: QuantumSystemSpec, z: int) -> float:
    """<chi_hat>_z = sum_j chi_j * (+1 if qubit j is |1>, else -1)."""
    disp = derive_dispersive_params(spec)
    nq = spec.n_qubits
    total = 0.0
    for j in range(nq):
        bit = (z >> (nq - 1 - j)) & 1
        total += disp.chi[j] * (1.0 if bit else -1.0)
    return total


# ---------------------------------------------------------------------------
# operators


@dataclass
class OperatorSet:
    """Sparse operators in the (qubits x cavity) product space."""

    spec: QuantumSystemSpec
    dim: int
    d: sp.csr_matrix
    sigma_z: list[sp.csr_matrix]
    sigma_m: list[sp.csr_matrix]
    hamiltonian: sp.csr_matrix
    collapse: list[sp.csr_matrix]  # rate prefactors included (sqrt(rate) O)
    x_op: sp.csr_matrix  # d + d^dagger
    disp: DispersiveParams | None = None

    def basis_index(self, z: int, n: int = 0) -> int:
        return z * self.spec.n_fock + n

    def initial_state(self, z: int) -> np.ndarray:
        """|0, z><0, z| as a dense density matrix."""
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        i = self.basis_index(z, 0)
        rho[i, i] = 1.0
        return rho

    def qubit_projector_diag(self, z: int) -> np.ndarray:
        """Diagonal indices of |z><z| (x) I_cavity."""
        nf = self.spec.n_fock
        return np.arange(z * nf, (z + 1) * nf)


def _annihilation(n: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n)), 1, format="csr")


def _embed(ops_per_factor: list[sp.spmatrix]) -> sp.csr_matrix:
    out = ops_per_factor[0]
    for op in ops_per_factor[1:]:
        out = sp.kron(out, op, format="csr")
    return out


def build_operators(
    spec: QuantumSystemSpec, disp_params: DispersiveParams | None = None
) -> OperatorSet:
    """Construct the tensor-product operators and the model Hamiltonian.

    `disp_params` overrides the derived dispersive parameters (used e.g. to
    force the qubit-qubit coupling to zero in QND checks); it is ignored
    for the JC model.
    """
    nq, nf = spec.n_qubits, spec.n_fock
    iq = sp.identity(2, format="csr")
    ic = sp.identity(nf, format="csr")
    a = _annihilation(nf)
    sz1 = sp.csr_matrix(np.diag([-1.0, 1.0]))
    sm1 = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def qubit_op(j, op):
        factors = [iq] * nq + [ic]
        factors[j] = op
        return _embed(factors)

    d = _embed([iq] * nq + [a])
    sigma_z = [qubit_op(j, sz1) for j in range(nq)]
    sigma_m = [qubit_op(j, sm1) for j in range(nq)]
    num = (d.getH() @ d).tocsr()
    x_op = (d + d.getH()).tocsr()

    h = spec.delta_c * num + spec.epsilon0 * x_op
    disp = None
    if spec.model == MODEL_JC:
        for j in range(nq):
            h = h + 0.5 * spec.delta_q[j] * sigma_z[j]
            h = h + spec.g[j] * (sigma_m[j].getH() @ d + sigma_m[j] @ d.getH())
    else:
        disp = disp_params if disp_params is not None else derive_dispersive_params(spec)
        for j in range(nq):
            h = h + 0.5 * disp.delta_q_tilde[j] * sigma_z[j]
            h = h + disp.chi[j] * (sigma_z[j] @ num)
        for j in range(nq):
            for k in range(j + 1, nq):
                jjk = disp.j_coupling[j][k]
                h = h + jjk * (
                    sigma_m[j] @ sigma_m[k].getH() + sigma_m[k] @ sigma_m[j].getH()
                )

    collapse = [np.sqrt(spec.kappa) * d]
    if spec.gamma_h > 0:
        for j in range(nq):
            collapse.append(np.sqrt(spec.gamma_h) * sigma_m[j])
    if spec.include_correlated_decay and spec.model == MODEL_DISPERSIVE:
        delta = spec.qubit_detunings_from_cavity()
        corr = sum(
            (spec.g[j] / delta[j]) * sigma_m[j] for j in range(nq)
        )
        collapse.append(np.sqrt(spec.kappa) * corr.tocsr())

    h = h.tocsr()
    return OperatorSet(
        spec=spec,
        dim=spec.dim,
        d=d,
        sigma_z=sigma_z,
        sigma_m=sigma_m,
        hamiltonian=h,
        collapse=[c.tocsr() for c in collapse],
        x_op=x_op,
        disp=disp,
    )


# ---------------------------------------------------------------------------
# superoperator workspace (vectorized rho)


@dataclass
class _Workspace:
    ops: OperatorSet
    liouvillian: sp.csr_matrix  # deterministic generator on vec(rho)
    m_lin: sp.csr_matrix  # linear part of the homodyne measurement superop
    x_idx: np.ndarray  # nonzeros of vec(x_op^T): expectation <d+d^dag>
    x_val: np.ndarray
    diag_idx: np.ndarray
    leak_idx: np.ndarray  # diagonal entries of the top Fock level
    sz_diag: list[np.ndarray]  # diagonal of sigma_z,j (real)


def _vec_expect_indices(op: sp.spmatrix, dim: int):
    """Nonzeros of vec(op^T) so that tr(op rho) = sum(val * r[idx])."""
    coo = op.T.tocoo()
    idx = coo.row * dim + coo.col
    return idx, coo.data.astype(complex)


def build_workspace(
    spec: QuantumSystemSpec, disp_params: DispersiveParams | None = None
) -> _Workspace:
    ops = build_operators(spec, disp_params)
    n = ops.dim
    eye = sp.identity(n, format="csr")

    def left(a):
        return sp.kron(a, eye, format="csr")

    def right(a):
        return sp.kron(eye, a.T, format="csr")

    h = ops.hamiltonian
    lio = -1j * (left(h) - right(h))
    for c in ops.collapse:
        cd = c.getH().tocsr()
        cdc = (cd @ c).tocsr()
        lio = lio + sp.kron(c, c.conj(), format="csr")
        lio = lio - 0.5 * (left(cdc) + right(cdc))
    lio = lio.tocsr()
    lio.eliminate_zeros()

    d = ops.d
    m_lin = (left(d) + right(d.getH())).tocsr()  # d rho + rho d^dag

    x_idx, x_val = _vec_expect_indices(ops.x_op, n)
    diag_idx = np.arange(n) * n + np.arange(n)
    nf = spec.n_fock
    top = np.array(
        [q * nf + (nf - 1) for q in range(2 ** spec.n_qubits)]
    )
    leak_idx = top * n + top
    sz_diag = [np.asarray(s.diagonal()).real for s in ops.sigma_z]
    return _Workspace(
        ops=ops,
        liouvillian=lio,
        m_lin=m_lin,
        x_idx=x_idx,
        x_val=x_val,
        diag_idx=diag_idx,
        leak_idx=leak_idx,
        sz_diag=sz_diag,
    )


def _expect_x(ws: _Workspace, r: np.ndarray) -> np.ndarray:
    """<d + d^dag> for each column of the vectorized batch `r`."""
    return (ws.x_val[:, None] * r[ws.x_idx, :]).sum(axis=0).real


def _trace(ws: _Workspace, r: np.ndarray) -> np.ndarray:
    return r[ws.diag_idx, :].sum(axis=0).real


def _hermitize(r: np.ndarray, n: int) -> np.ndarray:
    m = r.reshape(n, n, -1)
    return (0.5 * (m + m.transpose(1, 0, 2).conj())).reshape(n * n, -1)


# ---------------------------------------------------------------------------
# deterministic (unconditional) evolution


@dataclass
class UnconditionalResult:
    times: np.ndarray
    x_expect: np.ndarray  # <d+d^dag>(t)
    survival: np.ndarray  # (T, 4): tr(rho |z><z| x I_c)
    checkpoint_times: np.ndarray
    checkpoints: list[np.ndarray]  # dense density matrices


def unconditional_evolve(
    spec: QuantumSystemSpec,
    rho0: np.ndarray,
    tau_m: float,
    dt: float,
    record_interval: float = 1e-2,
    checkpoint_interval: float | None = None,
    disp_params: DispersiveParams | None = None,
) -> UnconditionalResult:
    """Fixed-step RK4 integration of rho_dot = L rho.

    Records <d+d^dag>(t) and the survival probabilities
    P_z(t) = tr(rho(t) |z><z| x I_cavity) every `record_interval`, and
    dense density-matrix checkpoints every `checkpoint_interval` (defaults
    to tau_m, i.e. final state only).
    """
    ws = build_workspace(spec, disp_params)
    n = ws.ops.dim
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (n, n):
        raise ValueError(f"rho0 must be {n}x{n}")
    steps_per_rec = int(round(record_interval / dt))
    if steps_per_rec < 1 or abs(steps_per_rec * dt - record_interval) > 1e-9:
        raise ValueError("record_interval must be a multiple of dt")
    n_rec = int(round(tau_m / record_interval))
    if checkpoint_interval is None:
        checkpoint_interval = tau_m
    recs_per_cp = max(1, int(round(checkpoint_interval / record_interval)))

    lio = ws.liouvillian
    r = rho0.reshape(-1).copy()
    nf = spec.n_fock

    times = np.arange(1, n_rec + 1) * record_interval
    x_expect = np.empty(n_rec)
    survival = np.empty((n_rec, 2 ** spec.n_qubits))
    cp_times, checkpoints = [], []

    proj_idx = [
        (ws.diag_idx[z * nf : (z + 1) * nf]) for z in range(2 ** spec.n_qubits)
    ]

    for i in range(n_rec):
        for _ in range(steps_per_rec):
            k1 = lio @ r
            k2 = lio @ (r + 0.5 * dt * k1)
            k3 = lio @ (r + 0.5 * dt * k2)
            k4 = lio @ (r + dt * k3)
            r += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tr = r[ws.diag_idx].sum().real
        if abs(tr - 1.0) > 1e-6:
            raise IntegrationInstabilityError(
                f"trace drifted to {tr:.3e} at t={times[i]:.3f}; reduce dt"
            )
        x_expect[i] = (ws.x_val * r[ws.x_idx]).sum().real
        for z, idx in enumerate(proj_idx):
            survival[i, z] = r[idx].sum().real
        if (i + 1) % recs_per_cp == 0:
            cp_times.append(times[i])
            checkpoints.append(r.reshape(n, n).copy())

    return UnconditionalResult(
        times=times,
        x_expect=x_expect,
        survival=survival,
        checkpoint_times=np.asarray(cp_times),
        checkpoints=checkpoints,
    )


# ---------------------------------------------------------------------------
# pointer-state analytics (dispersive model)


def analytic_cavity_amplitude(spec: QuantumSystemSpec, z: int, t) -> complex | np.ndarray:
    """Closed-form coherent amplitude alpha_z(t) of the dispersive model.

    Solves d(alpha)/dt = -i eps0 - (i(Delta_c + <chi>_z) + kappa/2) alpha
    with alpha(0) = 0.
    """
    if spec.model != MODEL_DISPERSIVE:
        raise UnsupportedModelError(
            "analytic cavity amplitudes exist only for the dispersive model"
        )
    chi = chi_expectation(spec, z)
    lam = 1j * (spec.delta_c + chi) + 0.5 * spec.kappa
    alpha_ss = -1j * spec.epsilon0 / lam
    t = np.asarray(t, dtype=float)
    out = alpha_ss * (1.0 - np.exp(-lam * t))
    return out if out.ndim else complex(out)


def analytic_steady_state_amplitude(spec: QuantumSystemSpec, z: int) -> complex:
    """t -> infinity limit of analytic_cavity_amplitude."""
    if spec.model != MODEL_DISPERSIVE:
        raise UnsupportedModelError(
            "analytic cavity amplitudes exist only for the dispersive model"
        )
    lam = 1j * (spec.delta_c + chi_expectation(spec, z)) + 0.5 * spec.kappa
    return -1j * spec.epsilon0 / lam


# ---------------------------------------------------------------------------
# stochastic (conditional) evolution


@dataclass
class SimParams:
    """Integration and recording grid for the SME."""

    dt_int: float | None = None  # None -> model default
    dt_record: float = 1e-2
    tau_m: float = 10.0
    store_conditional: bool = True

    def resolve_dt(self, model: str) -> float:
        return DEFAULT_DT_INT[model] if self.dt_int is None else self.dt_int

    def n_samples(self) -> int:
        return int(round(self.tau_m / self.dt_record))


@dataclass
class HomodyneTrajectory:
    """One recorded homodyne measurement with its ground-truth label."""

    label: int
    dt_record: float
    j_record: np.ndarray
    seed: int
    truncation_leak: float
    x_conditional: np.ndarray | None = None

    @property
    def valid(self) -> bool:
        return self.truncation_leak < TRUNCATION_LEAK_LIMIT


@dataclass
class MeasurementDataset:
    """Labeled, seeded collection of homodyne records."""

    spec: QuantumSystemSpec
    trajectories: list[HomodyneTrajectory]
    master_seed: int
    tau_m: float
    dt_int: float
    dt_record: float
    seed_domain: int = DOMAIN_TRAIN_DATA

    def __len__(self) -> int:
        return len(self.trajectories)

    def currents(self) -> np.ndarray:
        return np.stack([t.j_record for t in self.trajectories])

    def labels(self) -> np.ndarray:
        return np.array([t.label for t in self.trajectories], dtype=int)

    def conditional(self) -> np.ndarray | None:
        if any(t.x_conditional is None for t in self.trajectories):
            return None
        return np.stack([t.x_conditional for t in self.trajectories])

    def n_invalid(self) -> int:
        return sum(0 if t.valid else 1 for t in self.trajectories)

    def subset(self, n: int) -> "MeasurementDataset":
        """First n trajectories (labels are interleaved, so any prefix with
        n % 4 == 0 is class-balanced)."""
        return replace(self, trajectories=self.trajectories[:n])


def _sim_grid(ws: _Workspace, sim: SimParams):
    spec = ws.ops.spec
    dt = sim.resolve_dt(spec.model)
    steps_per_bin = int(round(sim.dt_record / dt))
    if steps_per_bin < 1 or abs(steps_per_bin * dt - sim.dt_record) > 1e-9:
        raise ValueError("dt_record must be an integer multiple of dt_int")
    return dt, steps_per_bin, sim.n_samples()


def _simulate_batch(
    ws: _Workspace,
    z_list: list[int],
    seed_list: list[int],
    sim: SimParams,
) -> list[HomodyneTrajectory]:
    """SME integration of a batch of trajectories.

    The same Wiener increments drive the state update and the recorded
    current.  The measurement term is always Ito-Euler; the deterministic
    drift uses forward Euler for the dispersive model and classical RK4
    for the JC model, whose generator carries coherences at up to ~2
    delta_q that sit outside the forward-Euler stability region at any
    usable step.  Dispatches to the numba kernel when available.
    """
    if _smekernel.HAVE_NUMBA:
        return _simulate_batch_numba(ws, z_list, seed_list, sim)
    return _simulate_batch_scipy(ws, z_list, seed_list, sim)


def _simulate_batch_numba(
    ws: _Workspace,
    z_list: list[int],
    seed_list: list[int],
    sim: SimParams,
) -> list[HomodyneTrajectory]:
    spec = ws.ops.spec
    n = ws.ops.dim
    dt, steps_per_bin, n_bins = _sim_grid(ws, sim)
    n_steps = n_bins * steps_per_bin
    lio, m_lin = ws.liouvillian, ws.m_lin
    kernel = (
        _smekernel.rk4em_trajectory
        if spec.model == MODEL_JC
        else _smekernel.em_trajectory
    )
    out = []
    for z, seed in zip(z_list, seed_list):
        r = np.zeros(n * n, dtype=complex)
        i = ws.ops.basis_index(z, 0)
        r[i * n + i] = 1.0
        rng = np.random.Generator(np.random.PCG64(seed))
        noise = rng.standard_normal(n_steps)
        j_rec = np.empty(n_bins)
        x_rec = np.empty(n_bins)
        status, value = kernel(
            lio.data,
            lio.indices,
            lio.indptr,
            m_lin.data,
            m_lin.indices,
            m_lin.indptr,
            ws.x_idx,
            ws.x_val,
            ws.diag_idx,
            ws.leak_idx,
            r,
            noise,
            dt,
            np.sqrt(spec.kappa),
            steps_per_bin,
            n_bins,
            _HERMITIZE_STRIDE,
            n,
            sim.dt_record,
            j_rec,
            x_rec,
        )
        if status != 0:
            raise IntegrationInstabilityError(
                f"trace renormalization factor deviated by >10% at step {int(value)}; "
                "reduce dt_int"
            )
        out.append(
            HomodyneTrajectory(
                label=z,
                dt_record=sim.dt_record,
                j_record=j_rec,
                seed=seed,
                truncation_leak=float(value),
                x_conditional=x_rec if sim.store_conditional else None,
            )
        )
    return out


def _simulate_batch_scipy(
    ws: _Workspace,
    z_list: list[int],
    seed_list: list[int],
    sim: SimParams,
) -> list[HomodyneTrajectory]:
    spec = ws.ops.spec
    n = ws.ops.dim
    b = len(z_list)
    dt, steps_per_bin, n_bins = _sim_grid(ws, sim)
    n_steps = n_bins * steps_per_bin
    sqrt_dt = np.sqrt(dt)
    sqrt_kappa = np.sqrt(spec.kappa)

    r = np.zeros((n * n, b), dtype=complex)
    for col, z in enumerate(z_list):
        i = ws.ops.basis_index(z, 0)
        r[i * n + i, col] = 1.0

    noise = np.empty((b, n_steps))
    for col, seed in enumerate(seed_list):
        rng = np.random.Generator(np.random.PCG64(seed))
        noise[col] = rng.standard_normal(n_steps)

    lio = ws.liouvillian
    m_lin = ws.m_lin
    j_rec = np.empty((b, n_bins))
    x_rec = np.empty((b, n_bins)) if sim.store_conditional else None
    leak_max = np.zeros(b)

    rk4 = spec.model == MODEL_JC
    step = 0
    for nb in range(n_bins):
        dw_sum = np.zeros(b)
        for _ in range(steps_per_bin):
            if rk4:
                k1 = lio @ r
                k2 = lio @ (r + 0.5 * dt * k1)
                k3 = lio @ (r + 0.5 * dt * k2)
                k4 = lio @ (r + dt * k3)
                det = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            else:
                det = lio @ r
            x_c = _expect_x(ws, r)
            m_r = (m_lin @ r) - r * x_c[None, :]
            dw = sqrt_dt * noise[:, step]
            r += dt * det + sqrt_kappa * dw[None, :] * m_r
            tr = _trace(ws, r)
            if np.any(np.abs(tr - 1.0) > 0.1):
                raise IntegrationInstabilityError(
                    f"trace renormalization factor deviated by >10% at step {step}; "
                    "reduce dt_int"
                )
            r /= tr[None, :]
            dw_sum += dw
            step += 1
            if step % _HERMITIZE_STRIDE == 0:
                r = _hermitize(r, n)
        x_now = _expect_x(ws, r)
        j_rec[:, nb] = sqrt_kappa * x_now + dw_sum / sim.dt_record
        if x_rec is not None:
            x_rec[:, nb] = sqrt_kappa * x_now
        leak = r[ws.leak_idx, :].sum(axis=0).real
        np.maximum(leak_max, leak, out=leak_max)

    out = []
    for col in range(b):
        out.append(
            HomodyneTrajectory(
                label=z_list[col],
                dt_record=sim.dt_record,
                j_record=j_rec[col].copy(),
                seed=seed_list[col],
                truncation_leak=float(leak_max[col]),
                x_conditional=None if x_rec is None else x_rec[col].copy(),
            )
        )
    return out


def simulate_homodyne_trajectory(
    spec: QuantumSystemSpec,
    z: int,
    seed: int,
    sim: SimParams | None = None,
    disp_params: DispersiveParams | None = None,
) -> HomodyneTrajectory:
    """Single conditional trajectory from rho(0) = |0, z><0, z|."""
    sim = sim or SimParams()
    ws = build_workspace(spec, disp_params)
    return _simulate_batch(ws, [z], [seed], sim)[0]


def _chunk_worker(args):
    spec, z_list, seed_list, sim, batch = args
    ws = build_workspace(spec)
    out = []
    for start in range(0, len(z_list), batch):
        out.extend(
            _simulate_batch(
                ws, z_list[start : start + batch], seed_list[start : start + batch], sim
            )
        )
    return out


def generate_dataset(
    spec: QuantumSystemSpec,
    m_per_class: int,
    master_seed: int,
    sim: SimParams | None = None,
    seed_domain: int = DOMAIN_TRAIN_DATA,
    workers: int | None = None,
    batch_size: int = 32,
) -> MeasurementDataset:
    """4*m_per_class labeled trajectories, label of trajectory q = q mod 4.

    Trajectory q uses derive_seed(master_seed, seed_domain, q), so the
    output is order-deterministic regardless of worker scheduling, and any
    prefix of length 4k is class-balanced.
    """
    if m_per_class < 1:
        raise ValueError("m_per_class must be >= 1")
    sim = sim or SimParams()
    n_traj = N_CLASSES * m_per_class
    z_list = [q % N_CLASSES for q in range(n_traj)]
    seed_list = [derive_seed(master_seed, seed_domain, q) for q in range(n_traj)]

    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, n_traj))

    if workers == 1:
        trajectories = _chunk_worker((spec, z_list, seed_list, sim, batch_size))
    else:
        bounds = np.linspace(0, n_traj, workers + 1).astype(int)
        jobs = [
            (spec, z_list[a:b], seed_list[a:b], sim, batch_size)
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        trajectories = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(_chunk_worker, jobs):
                trajectories.extend(chunk)

    return MeasurementDataset(
        spec=spec,
        trajectories=trajectories,
        master_seed=master_seed,
        tau_m=sim.tau_m,
        dt_int=sim.resolve_dt(spec.model),
        dt_record=sim.dt_record,
        seed_domain=seed_domain,
    )


# ---------------------------------------------------------------------------
# density-matrix invariants


def check_density_matrix(
    rho: np.ndarray,
    herm_tol: float = 1e-10,
    trace_tol: float = 1e-9,
    psd_tol: float = 1e-8,
) -> None:
    """Raise AssertionError if rho violates the density-matrix invariants."""
    herm = np.abs(rho - rho.conj().T).max()
    assert herm < herm_tol, f"hermiticity violation {herm:.3e}"
    tr = np.trace(rho).real
    assert abs(tr - 1.0) < trace_tol, f"trace {tr} deviates from 1"
    eigs = np.linalg.eigvalsh(rho)
    assert eigs.min() > -psd_tol, f"negative eigenvalue {eigs.min():.3e}"
