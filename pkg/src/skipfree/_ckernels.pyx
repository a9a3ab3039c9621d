# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: path sampling and the convolution recursions.

Every routine here has a line-for-line twin in ``_kernels_py.py``. The
sampler performs the same IEEE operations in the same order, so both
backends return bit-identical paths for a given seed.
"""
from libc.math cimport log
from libc.stdint cimport int64_t, uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef int64_t STATE_CAP = 4611686018427387904  # 2**62

# terminal codes, mirrored in _kernels_py
cdef enum:
    HIT_A = 0
    CROSSED_B = 1
    HIT_Y = 2
    KILLED = 3
    CAPPED = 4
    TIMEOUT = 5


cdef inline uint64_t mix(uint64_t z) noexcept nogil:
    z ^= z >> 30
    z *= 0xBF58476D1CE4E5B9ULL
    z ^= z >> 27
    z *= 0x94D049BB133111EBULL
    z ^= z >> 31
    return z


cdef inline double uniform(uint64_t* s) noexcept nogil:
    s[0] += GOLDEN
    return (<double>(mix(s[0]) >> 11) + 0.5) * TWO_M53


cdef inline int64_t pick(const double[:] cum, int64_t lo, int64_t hi, double r) noexcept nogil:
    # first index in [lo, hi) with r < cum[i]; the last index absorbs round-off
    cdef int64_t i = lo
    while i < hi - 1 and not (r < cum[i]):
        i += 1
    return i


cdef inline int stop_code(int64_t x, bint has_a, int64_t a, bint has_b, int64_t b,
                          bint has_y, int64_t y) noexcept nogil:
    if has_y and x == y:
        return HIT_Y
    if has_a and x <= a:
        return HIT_A
    if has_b and x >= b:
        return CROSSED_B
    return -1


def simulate_block(
    uint64_t seed, int64_t start, int64_t stop, int64_t x0,
    int kind,
    # table model (finite chain)
    int64_t lo, const int64_t[:] offsets, const int64_t[:] dest,
    const double[:] cum, const double[:] total,
    # affine model (compound Poisson / branching with immigration)
    bint linear, double alpha, const double[:] mu_cum, const int64_t[:] mu_jump,
    double beta, const double[:] nu_cum, const int64_t[:] nu_jump, double p, double q,
    # stopping rule and weights
    bint has_a, int64_t a, bint has_b, int64_t b, bint has_y, int64_t y,
    int64_t max_jumps, double max_time, double p_w, double q_w,
    signed char[:] code, double[:] time, double[:] logw, int64_t[:] jumps, int64_t[:] final,
):
    """Simulate paths ``start..stop-1``; path ``i`` writes its outcome at index ``i - start``."""
    cdef int64_t i, x, n_jumps, k, nmu = mu_cum.shape[0], nnu = nu_cum.shape[0]
    cdef uint64_t s
    cdef double t, lw, rate, h, r, mult, a_rate, b_rate, kill
    cdef int c
    with nogil:
        for i in range(start, stop):
            s = mix(mix(seed) + <uint64_t>i * GOLDEN)
            x = x0
            t = 0.0
            lw = 0.0
            n_jumps = 0
            c = stop_code(x, has_a, a, has_b, b, has_y, y)
            while c < 0:
                if kind == 0:
                    rate = total[x - lo]
                else:
                    mult = <double>x if linear else 1.0
                    a_rate = alpha * mult
                    b_rate = beta
                    kill = p * mult + q
                    rate = a_rate + b_rate + kill
                if not (rate > 0.0):
                    h = q_w + p_w * <double>x
                    if h != 0.0:
                        lw = lw - h * (max_time - t)
                    t = max_time
                    c = TIMEOUT
                    break
                h = -log(uniform(&s)) / rate
                if t + h > max_time:
                    h = q_w + p_w * <double>x
                    if h != 0.0:
                        lw = lw - h * (max_time - t)
                    t = max_time
                    c = TIMEOUT
                    break
                lw = lw - (q_w + p_w * <double>x) * h
                t = t + h
                if n_jumps >= max_jumps:
                    c = CAPPED
                    break
                n_jumps += 1
                r = uniform(&s) * rate
                if kind == 0:
                    k = pick(cum, offsets[x - lo], offsets[x - lo + 1], r)
                    if dest[k] < lo:
                        c = KILLED
                        break
                    x = dest[k]
                else:
                    if r < a_rate:
                        k = pick(mu_cum, 0, nmu, uniform(&s))
                        x = x + mu_jump[k]
                    elif r < a_rate + b_rate:
                        k = pick(nu_cum, 0, nnu, uniform(&s))
                        x = x + nu_jump[k]
                    else:
                        c = KILLED
                        break
                    if x > STATE_CAP:
                        c = CAPPED
                        break
                c = stop_code(x, has_a, a, has_b, b, has_y, y)
            code[i - start] = c
            time[i - start] = t
            logw[i - start] = lw
            jumps[i - start] = n_jumps
            final[i - start] = x


def conv_recursion_block(double[:] out, const double[:] acc, const double[:] kappa,
                         int64_t lo, int64_t hi, double c):
    """``out[k] = c/k (acc[k] + sum_{lo <= j < k} out[j] kappa[k-1-j])`` for ``lo <= k < hi``.

    ``acc`` carries the contributions of indices below ``lo``; ``out[0]``
    is never written.
    """
    cdef int64_t k, j
    cdef double s
    with nogil:
        for k in range(max(lo, 1), hi):
            s = acc[k]
            for j in range(lo, k):
                s = s + out[j] * kappa[k - 1 - j]
            out[k] = c * s / <double>k


def scale_recursion(double[:] dW, double[:] W, const double[:] tails,
                    double mu0, double kill, double theta):
    """Rescaled scale increments ``dW[k] = theta^k Delta W(k)`` and ``W[k] = theta^k W(k)``.

    ``dW[0]`` must be set by the caller; ``tails[i]`` holds ``theta^i`` times
    the offspring tail and is zero past its length.
    """
    cdef int64_t K = dW.shape[0] - 1, d = tails.shape[0], k, j, j0
    cdef double s
    with nogil:
        W[0] = dW[0]
        for k in range(K):
            s = 0.0
            j0 = k + 2 - d
            if j0 < 0:
                j0 = 0
            for j in range(j0, k + 1):
                s = s + dW[j] * tails[k - j + 1]
            dW[k + 1] = (s + kill * W[k]) / mu0
            W[k + 1] = theta * W[k] + dW[k + 1]
