"""Pure-Python twins of the routines in ``_ckernels.pyx``.

The sampler reproduces the compiled arithmetic operation by operation
(64-bit wrapping integer mixing, the same float expression order), so a
given seed yields the same paths on either backend.
"""
from __future__ import annotations

import math

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TWO_M53 = 1.0 / 9007199254740992.0
STATE_CAP = 1 << 62

HIT_A, CROSSED_B, HIT_Y, KILLED, CAPPED, TIMEOUT = range(6)


def mix(z: int) -> int:
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK
    z ^= z >> 31
    return z


class _Stream:
    __slots__ = ("s",)

    def __init__(self, seed: int, index: int):
        self.s = (mix(seed & MASK) + index * GOLDEN) & MASK
        self.s = mix(self.s)

    def uniform(self) -> float:
        self.s = (self.s + GOLDEN) & MASK
        return (float(mix(self.s) >> 11) + 0.5) * TWO_M53


def _pick(cum, lo, hi, r):
    i = lo
    while i < hi - 1 and not r < cum[i]:
        i += 1
    return i


def _stop_code(x, has_a, a, has_b, b, has_y, y):
    if has_y and x == y:
        return HIT_Y
    if has_a and x <= a:
        return HIT_A
    if has_b and x >= b:
        return CROSSED_B
    return -1


def simulate_block(
    seed, start, stop, x0,
    kind,
    lo, offsets, dest, cum, total,
    linear, alpha, mu_cum, mu_jump, beta, nu_cum, nu_jump, p, q,
    has_a, a, has_b, b, has_y, y,
    max_jumps, max_time, p_w, q_w,
    code, time, logw, jumps, final,
):
    cum = cum.tolist()
    total = total.tolist()
    dest = dest.tolist()
    offsets = offsets.tolist()
    mu_cum, mu_jump = mu_cum.tolist(), mu_jump.tolist()
    nu_cum, nu_jump = nu_cum.tolist(), nu_jump.tolist()
    nmu, nnu = len(mu_cum), len(nu_cum)
    for i in range(start, stop):
        rng = _Stream(seed, i)
        x, t, lw, n_jumps = x0, 0.0, 0.0, 0
        c = _stop_code(x, has_a, a, has_b, b, has_y, y)
        while c < 0:
            if kind == 0:
                rate = total[x - lo]
            else:
                mult = float(x) if linear else 1.0
                a_rate = alpha * mult
                b_rate = beta
                kill = p * mult + q
                rate = a_rate + b_rate + kill
            if not rate > 0.0:
                h = q_w + p_w * float(x)
                if h != 0.0:
                    lw = lw - h * (max_time - t)
                t = max_time
                c = TIMEOUT
                break
            h = -math.log(rng.uniform()) / rate
            if t + h > max_time:
                h = q_w + p_w * float(x)
                if h != 0.0:
                    lw = lw - h * (max_time - t)
                t = max_time
                c = TIMEOUT
                break
            lw = lw - (q_w + p_w * float(x)) * h
            t = t + h
            if n_jumps >= max_jumps:
                c = CAPPED
                break
            n_jumps += 1
            r = rng.uniform() * rate
            if kind == 0:
                k = _pick(cum, offsets[x - lo], offsets[x - lo + 1], r)
                if dest[k] < lo:
                    c = KILLED
                    break
                x = dest[k]
            else:
                if r < a_rate:
                    x = x + mu_jump[_pick(mu_cum, 0, nmu, rng.uniform())]
                elif r < a_rate + b_rate:
                    x = x + nu_jump[_pick(nu_cum, 0, nnu, rng.uniform())]
                else:
                    c = KILLED
                    break
                if x > STATE_CAP:
                    c = CAPPED
                    break
            c = _stop_code(x, has_a, a, has_b, b, has_y, y)
        code[i - start] = c
        time[i - start] = t
        logw[i - start] = lw
        jumps[i - start] = n_jumps
        final[i - start] = x


def conv_recursion_block(out, acc, kappa, lo, hi, c):
    for k in range(max(lo, 1), hi):
        s = acc[k] + np.dot(out[lo:k], kappa[k - 1 - lo::-1][: k - lo]) if k > lo else acc[k]
        out[k] = c * s / k


def scale_recursion(dW, W, tails, mu0, kill, theta):
    K, d = len(dW) - 1, len(tails)
    W[0] = dW[0]
    for k in range(K):
        j0 = max(k + 2 - d, 0)
        s = 0.0
        for j in range(j0, k + 1):
            s = s + dW[j] * tails[k - j + 1]
        dW[k + 1] = (s + kill * W[k]) / mu0
        W[k + 1] = theta * W[k] + dW[k + 1]
