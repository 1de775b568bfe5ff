# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled loop kernel. Mirrors ``_purepy.run_loop_impl`` exactly; the
parity test in the suite holds the two to within floating-point noise.
"""

import numpy as np

KERNEL_NAME = "cython"


def run_loop_impl(
    double[:, ::1] a, double[:, ::1] b, double[:, ::1] c,
    double[:, ::1] k_gain, double[:, ::1] l_gain,
    double[:, ::1] w, double[:, ::1] v, double[:, ::1] e,
    Py_ssize_t burn_in, Py_ssize_t nu, Py_ssize_t k0,
    int det_on,
    double[:, ::1] p0, double[:, ::1] p1, double[:, ::1] mmap,
    double logdet_term, Py_ssize_t lag, double threshold,
    int reset_at_nu, int stop_at_alarm,
    double[:, ::1] x_out, double[:, ::1] xhat_out,
    double[:, ::1] y_true, double[:, ::1] y_del,
    double[:, ::1] gamma_out, double[:, ::1] u_out,
    double[::1] g_out, unsigned char[::1] attacked_out,
):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = c.shape[0]
    cdef Py_ssize_t p = b.shape[1]
    cdef Py_ssize_t total = w.shape[0]
    cdef Py_ssize_t steps = total - burn_in

    cdef double[::1] x = np.zeros(n)
    cdef double[::1] xhat = np.zeros(n)
    cdef double[::1] u_prev = np.zeros(p)
    cdef double[::1] xpred = np.empty(n)
    cdef double[::1] xnext = np.empty(n)
    cdef double[::1] y = np.empty(m)
    cdef double[::1] gamma = np.empty(m)
    cdef double[::1] delivered = np.empty(m)
    cdef double[::1] residual = np.empty(m)
    cdef double[::1] u = np.empty(p)

    cdef double g = 0.0
    cdef double step_llr, acc, quad0, quad1
    cdef Py_ssize_t alarm_pre = 0
    cdef Py_ssize_t alarm_post = 0
    cdef Py_ssize_t steps_done = steps
    cdef Py_ssize_t t, i, k, row, col
    cdef bint attacked, stop = False

    for t in range(total):
        # xpred = A xhat + B u_prev
        for row in range(n):
            acc = 0.0
            for col in range(n):
                acc += a[row, col] * xhat[col]
            for col in range(p):
                acc += b[row, col] * u_prev[col]
            xpred[row] = acc
        # y = C x + v_t
        for row in range(m):
            acc = v[t, row]
            for col in range(n):
                acc += c[row, col] * x[col]
            y[row] = acc

        i = t - burn_in
        if i >= 0:
            k = i + 1
            for row in range(m):
                y_true[i, row] = y[row]
            attacked = nu > 0 and k >= nu
            if attacked:
                for row in range(m):
                    delivered[row] = y_true[i - k0, row]
            else:
                for row in range(m):
                    delivered[row] = y[row]
            # gamma = delivered - C xpred; xhat = xpred + K gamma
            for row in range(m):
                acc = 0.0
                for col in range(n):
                    acc += c[row, col] * xpred[col]
                gamma[row] = delivered[row] - acc
            for row in range(n):
                acc = xpred[row]
                for col in range(m):
                    acc += k_gain[row, col] * gamma[col]
                xhat[row] = acc

            if det_on:
                if reset_at_nu and nu > 0 and k == nu:
                    g = 0.0
                if k > lag:
                    for row in range(m):
                        acc = gamma[row]
                        for col in range(p):
                            acc -= mmap[row, col] * e[t - lag, col]
                        residual[row] = acc
                    quad0 = 0.0
                    quad1 = 0.0
                    for row in range(m):
                        for col in range(m):
                            quad0 += gamma[row] * p0[row, col] * gamma[col]
                            quad1 += residual[row] * p1[row, col] * residual[col]
                    step_llr = 0.5 * (quad0 - quad1 + logdet_term)
                else:
                    step_llr = 0.0
                g = g + step_llr
                if g < 0.0:
                    g = 0.0

            # u = L xhat + e_t
            for row in range(p):
                acc = e[t, row]
                for col in range(n):
                    acc += l_gain[row, col] * xhat[col]
                u[row] = acc

            for row in range(n):
                x_out[i, row] = x[row]
                xhat_out[i, row] = xhat[row]
            for row in range(m):
                y_del[i, row] = delivered[row]
                gamma_out[i, row] = gamma[row]
            for row in range(p):
                u_out[i, row] = u[row]
            g_out[i] = g
            attacked_out[i] = 1 if attacked else 0

            if det_on and g >= threshold:
                if nu > 0 and k < nu:
                    if alarm_pre == 0:
                        alarm_pre = k
                else:
                    if alarm_post == 0:
                        alarm_post = k
                        if stop_at_alarm:
                            steps_done = k
                            stop = True
        else:
            # burn-in: normal filtered update, nothing recorded
            for row in range(m):
                acc = 0.0
                for col in range(n):
                    acc += c[row, col] * xpred[col]
                gamma[row] = y[row] - acc
            for row in range(n):
                acc = xpred[row]
                for col in range(m):
                    acc += k_gain[row, col] * gamma[col]
                xhat[row] = acc
            for row in range(p):
                acc = e[t, row]
                for col in range(n):
                    acc += l_gain[row, col] * xhat[col]
                u[row] = acc

        if stop:
            break

        # x = A x + B u + w_t
        for row in range(n):
            acc = w[t, row]
            for col in range(n):
                acc += a[row, col] * x[col]
            for col in range(p):
                acc += b[row, col] * u[col]
            xnext[row] = acc
        for row in range(n):
            x[row] = xnext[row]
        for row in range(p):
            u_prev[row] = u[row]

    return alarm_pre, alarm_post, steps_done
