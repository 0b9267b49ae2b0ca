"""Numba inner loop for the homodyne SME Euler-Maruyama integrator.

Processes one trajectory (one column of the vectorized density-matrix
batch) at a time so the working set stays cache resident; the sparse
generator matrices are shared across trajectories.  Falls back to the
scipy path in qsim when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@njit(cache=True, fastmath=True)
def em_trajectory(
    l_data,
    l_indices,
    l_indptr,
    m_data,
    m_indices,
    m_indptr,
    x_idx,
    x_val,
    diag_idx,
    leak_idx,
    r,
    noise,
    dt,
    sqrt_kappa,
    steps_per_bin,
    n_bins,
    hermitize_stride,
    dim,
    dt_record,
    j_out,
    x_out,
):
    """Integrate one trajectory in place; returns (status, max leak).

    status 0 = ok, 1 = trace renormalization factor deviated by >10%
    (the failing step index is returned in place of the leak).
    """
    n2 = r.shape[0]
    buf = np.empty(n2, dtype=np.complex128)
    sqrt_dt = np.sqrt(dt)
    leak_max = 0.0
    step = 0
    for nb in range(n_bins):
        dw_sum = 0.0
        for _ in range(steps_per_bin):
            acc = 0.0 + 0.0j
            for k in range(x_idx.shape[0]):
                acc += x_val[k] * r[x_idx[k]]
            x_c = acc.real
            dw = sqrt_dt * noise[step]
            coeff = sqrt_kappa * dw
            # single fused pass: r_new = r + dt L r + coeff (M r - <x> r)
            for i in range(n2):
                det = 0.0 + 0.0j
                for k in range(l_indptr[i], l_indptr[i + 1]):
                    det += l_data[k] * r[l_indices[k]]
                mr = 0.0 + 0.0j
                for k in range(m_indptr[i], m_indptr[i + 1]):
                    mr += m_data[k] * r[m_indices[k]]
                buf[i] = r[i] + dt * det + coeff * (mr - x_c * r[i])
            tmp = r
            r = buf
            buf = tmp
            tr = 0.0
            for k in range(diag_idx.shape[0]):
                tr += r[diag_idx[k]].real
            if np.abs(tr - 1.0) > 0.1:
                return 1, float(step)
            # the EM step is trace preserving in exact arithmetic; renormalize
            # only when roundoff has accumulated
            if np.abs(tr - 1.0) > 1e-13:
                inv = 1.0 / tr
                for i in range(n2):
                    r[i] *= inv
            dw_sum += dw
            step += 1
            if step % hermitize_stride == 0:
                for a in range(dim):
                    for b in range(a + 1, dim):
                        ij = a * dim + b
                        ji = b * dim + a
                        avg = 0.5 * (r[ij] + np.conj(r[ji]))
                        r[ij] = avg
                        r[ji] = np.conj(avg)
                    ii = a * dim + a
                    r[ii] = complex(r[ii].real, 0.0)
        acc = 0.0 + 0.0j
        for k in range(x_idx.shape[0]):
            acc += x_val[k] * r[x_idx[k]]
        x_now = acc.real
        j_out[nb] = sqrt_kappa * x_now + dw_sum / dt_record
        x_out[nb] = sqrt_kappa * x_now
        leak = 0.0
        for k in range(leak_idx.shape[0]):
            leak += r[leak_idx[k]].real
        if leak > leak_max:
            leak_max = leak
    return 0, leak_max


@njit(cache=True, fastmath=True)
def rk4em_trajectory(
    l_data,
    l_indices,
    l_indptr,
    m_data,
    m_indices,
    m_indptr,
    x_idx,
    x_val,
    diag_idx,
    leak_idx,
    r,
    noise,
    dt,
    sqrt_kappa,
    steps_per_bin,
    n_bins,
    hermitize_stride,
    dim,
    dt_record,
    j_out,
    x_out,
):
    """Like em_trajectory, but with the deterministic drift advanced by
    classical RK4 while the measurement term stays Ito-Euler.

    The JC generator carries coherences oscillating at up to ~2 delta_q,
    for which the forward-Euler drift step is unstable at usable dt; the
    RK4 stability region covers the whole relevant imaginary axis.
    """
    n2 = r.shape[0]
    buf = np.empty(n2, dtype=np.complex128)
    k = np.empty(n2, dtype=np.complex128)
    y = np.empty(n2, dtype=np.complex128)
    sqrt_dt = np.sqrt(dt)
    leak_max = 0.0
    step = 0
    for nb in range(n_bins):
        dw_sum = 0.0
        for _ in range(steps_per_bin):
            acc = 0.0 + 0.0j
            for i in range(x_idx.shape[0]):
                acc += x_val[i] * r[x_idx[i]]
            x_c = acc.real
            dw = sqrt_dt * noise[step]
            coeff = sqrt_kappa * dw
            # stochastic increment from the step-start state
            for i in range(n2):
                mr = 0.0 + 0.0j
                for p in range(m_indptr[i], m_indptr[i + 1]):
                    mr += m_data[p] * r[m_indices[p]]
                buf[i] = r[i] + coeff * (mr - x_c * r[i])
            # k1
            for i in range(n2):
                acc = 0.0 + 0.0j
                for p in range(l_indptr[i], l_indptr[i + 1]):
                    acc += l_data[p] * r[l_indices[p]]
                k[i] = acc
            for i in range(n2):
                buf[i] += (dt / 6.0) * k[i]
                y[i] = r[i] + 0.5 * dt * k[i]
            # k2
            for i in range(n2):
                acc = 0.0 + 0.0j
                for p in range(l_indptr[i], l_indptr[i + 1]):
                    acc += l_data[p] * y[l_indices[p]]
                k[i] = acc
            for i in range(n2):
                buf[i] += (dt / 3.0) * k[i]
            for i in range(n2):
                y[i] = r[i] + 0.5 * dt * k[i]
            # k3
            for i in range(n2):
                acc = 0.0 + 0.0j
                for p in range(l_indptr[i], l_indptr[i + 1]):
                    acc += l_data[p] * y[l_indices[p]]
                k[i] = acc
            for i in range(n2):
                buf[i] += (dt / 3.0) * k[i]
            for i in range(n2):
                y[i] = r[i] + dt * k[i]
            # k4
            for i in range(n2):
                acc = 0.0 + 0.0j
                for p in range(l_indptr[i], l_indptr[i + 1]):
                    acc += l_data[p] * y[l_indices[p]]
                buf[i] += (dt / 6.0) * acc
            tmp = r
            r = buf
            buf = tmp
            tr = 0.0
            for i in range(diag_idx.shape[0]):
                tr += r[diag_idx[i]].real
            if np.abs(tr - 1.0) > 0.1:
                return 1, float(step)
            if np.abs(tr - 1.0) > 1e-13:
                inv = 1.0 / tr
                for i in range(n2):
                    r[i] *= inv
            dw_sum += dw
            step += 1
            if step % hermitize_stride == 0:
                for a in range(dim):
                    for b in range(a + 1, dim):
                        ij = a * dim + b
                        ji = b * dim + a
                        avg = 0.5 * (r[ij] + np.conj(r[ji]))
                        r[ij] = avg
                        r[ji] = np.conj(avg)
                    ii = a * dim + a
                    r[ii] = complex(r[ii].real, 0.0)
        acc = 0.0 + 0.0j
        for i in range(x_idx.shape[0]):
            acc += x_val[i] * r[x_idx[i]]
        x_now = acc.real
        j_out[nb] = sqrt_kappa * x_now + dw_sum / dt_record
        x_out[nb] = sqrt_kappa * x_now
        leak = 0.0
        for i in range(leak_idx.shape[0]):
            leak += r[leak_idx[i]].real
        if leak > leak_max:
            leak_max = leak
    return 0, leak_max
