"""Pure-numpy loop kernel. Same contract as the compiled extension in
``_speedups``; see ``_kernel.run_loop`` for the public wrapper.

Step indexing is 1-based within the main run (k = i + 1 for row i).
Replayed delivery at step k reads the true observation recorded at
k - k0, which the nu > k0 invariant keeps inside the main run.
"""

from __future__ import annotations

import numpy as np

KERNEL_NAME = "purepy"


def run_loop_impl(
    a, b, c, k_gain, l_gain,
    w, v, e,
    burn_in, nu, k0,
    det_on, p0, p1, mmap, logdet_term, lag, threshold,
    reset_at_nu, stop_at_alarm,
    x_out, xhat_out, y_true, y_del, gamma_out, u_out, g_out, attacked_out,
):
    n = a.shape[0]
    p = b.shape[1]
    total = w.shape[0]
    steps = total - burn_in

    x = np.zeros(n)
    xhat = np.zeros(n)
    u_prev = np.zeros(p)
    g = 0.0
    alarm_pre = 0
    alarm_post = 0
    steps_done = steps

    for t in range(total):
        xpred = a @ xhat + b @ u_prev
        y = c @ x + v[t]
        i = t - burn_in
        if i >= 0:
            k = i + 1
            y_true[i] = y
            attacked = nu > 0 and k >= nu
            delivered = y_true[i - k0] if attacked else y
            gamma = delivered - c @ xpred
            xhat = xpred + k_gain @ gamma

            if det_on:
                if reset_at_nu and nu > 0 and k == nu:
                    g = 0.0
                if k > lag:
                    residual = gamma - mmap @ e[t - lag]
                    step_llr = 0.5 * (
                        gamma @ p0 @ gamma - residual @ p1 @ residual + logdet_term
                    )
                else:
                    step_llr = 0.0
                g = g + step_llr
                if g < 0.0:
                    g = 0.0

            u = l_gain @ xhat + e[t]
            x_out[i] = x
            xhat_out[i] = xhat
            y_del[i] = delivered
            gamma_out[i] = gamma
            u_out[i] = u
            g_out[i] = g
            attacked_out[i] = attacked

            if det_on and g >= threshold:
                if nu > 0 and k < nu:
                    if alarm_pre == 0:
                        alarm_pre = k
                else:
                    if alarm_post == 0:
                        alarm_post = k
                        if stop_at_alarm:
                            steps_done = k
                            break
        else:
            xhat = xpred + k_gain @ (y - c @ xpred)
            u = l_gain @ xhat + e[t]

        x = a @ x + b @ u + w[t]
        u_prev = u

    return alarm_pre, alarm_post, steps_done
