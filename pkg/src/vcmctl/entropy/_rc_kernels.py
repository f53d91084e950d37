"""Range coder over per-element discretized Gaussians.

32-bit carry-propagating coder (LZMA layout) with 16-bit frequency tables.
Each kept element gets a table over a window of symbols around its rounded
mean plus one escape entry; escaped symbols follow as Elias-gamma bypass bits.
Every entry has frequency >= 1, so any symbol in the 16-bit alphabet decodes.

The first emitted byte of this coder layout is always zero and is dropped;
trailing zero bytes are stripped because the decoder pads with zeros.
"""

import math

import numpy as np

from .._accel import njit

PREC_BITS = 16
TOTAL = 1 << PREC_BITS
TOP = 1 << 24
MASK32 = 0xFFFFFFFF
TAIL_SIGMAS = 6.0
WINDOW_MAX = 8190
SYMBOL_MIN = -(2**15)
SYMBOL_MAX = 2**15 - 1
GAMMA_MAX_BITS = 18

OK = 0
ERR_TARGET = 1
ERR_ESCAPE = 2

_R = 0.7071067811865476


@njit
def _center(mu):
    if mu >= 0.0:
        c = math.floor(mu + 0.5)
    else:
        c = -math.floor(-mu + 0.5)
    if c < SYMBOL_MIN:
        c = SYMBOL_MIN
    if c > SYMBOL_MAX:
        c = SYMBOL_MAX
    return int(c)


@njit
def _window(mu, sigma):
    c = _center(mu)
    k = int(math.ceil(TAIL_SIGMAS * sigma)) + 1
    if k > WINDOW_MAX:
        k = WINDOW_MAX
    lo = c - k
    hi = c + k
    if lo < SYMBOL_MIN:
        lo = SYMBOL_MIN
    if hi > SYMBOL_MAX:
        hi = SYMBOL_MAX
    return lo, hi


@njit
def _tail(x):
    # lower CDF for x <= 0, upper tail otherwise; both stay accurate far out
    if x <= 0.0:
        return 0.5 * math.erfc(-x * _R)
    return 0.5 * math.erfc(x * _R)


@njit
def build_table(mu, sigma, lo, hi, cum):
    """Fill ``cum[0..nsym+1]`` with cumulative frequencies; escape is last.

    Each interval mass is taken from the two tail values at its edges, so
    one erfc per edge serves both neighbouring symbols.
    """
    nsym = hi - lo + 1
    budget = TOTAL - (nsym + 1)
    inv = 1.0 / sigma
    best = 0
    best_f = -1
    total = 0
    a = (lo - 0.5 - mu) * inv
    ta = _tail(a)
    for j in range(nsym + 1):
        if j < nsym:
            b = (lo + j + 0.5 - mu) * inv
            tb = _tail(b)
            if a >= 0.0:
                p = ta - tb
            elif b <= 0.0:
                p = tb - ta
            else:
                p = 1.0 - ta - tb
            a = b
            ta = tb
        else:
            p = 0.5 * math.erfc(-((lo - 0.5 - mu) * inv) * _R) + 0.5 * math.erfc(((hi + 0.5 - mu) * inv) * _R)
        if p < 0.0:
            p = 0.0
        f = 1 + int(math.floor(p * budget))
        cum[j + 1] = f
        total += f
        if f > best_f:
            best_f = f
            best = j
    cum[best + 1] += TOTAL - total
    cum[0] = 0
    for j in range(1, nsym + 2):
        cum[j] += cum[j - 1]
    return nsym


@njit
def _shift_low(low, cache, cache_size, out, pos):
    if low < 0xFF000000 or low > MASK32:
        carry = low >> 32
        temp = cache
        while True:
            out[pos] = (temp + carry) & 0xFF
            pos += 1
            temp = 0xFF
            cache_size -= 1
            if cache_size == 0:
                break
        cache = (low >> 24) & 0xFF
    cache_size += 1
    low = (low & 0x00FFFFFF) << 8
    return low, cache, cache_size, pos


@njit
def encode_symbols(symbols, means, scales, keep):
    """Range-code ``symbols[i]`` for every ``keep[i] != 0``; returns payload bytes."""
    n = symbols.shape[0]
    n_keep = 0
    for i in range(n):
        if keep[i] != 0:
            n_keep += 1
    out = np.zeros(8 * n_keep + 16, dtype=np.uint8)
    cum = np.zeros(2 * WINDOW_MAX + 4, dtype=np.int64)
    pos = 0
    low = 0
    rng = MASK32
    cache = 0
    cache_size = 1

    for i in range(n):
        if keep[i] == 0:
            continue
        mu = means[i]
        sigma = scales[i]
        s = int(symbols[i])
        lo, hi = _window(mu, sigma)
        nsym = build_table(mu, sigma, lo, hi, cum)
        if lo <= s <= hi:
            j = s - lo
        else:
            j = nsym
        r = rng >> PREC_BITS
        low += r * cum[j]
        rng = r * (cum[j + 1] - cum[j])
        while rng < TOP:
            rng <<= 8
            low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
        if j == nsym:
            # escape: sign bit, then Elias-gamma of the distance past the window
            if s > hi:
                sign = 0
                d = s - hi
            else:
                sign = 1
                d = lo - s
            nbits = 0
            v = d
            while v > 0:
                nbits += 1
                v >>= 1
            n_out = 1 + 2 * nbits - 1
            for b in range(n_out):
                if b == 0:
                    bit = sign
                elif b < nbits:
                    bit = 0
                else:
                    bit = (d >> (nbits - 1 - (b - nbits))) & 1
                rng >>= 1
                if bit:
                    low += rng
                while rng < TOP:
                    rng <<= 8
                    low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)

    # pick the value in [low, low + rng) with the most trailing zero bytes
    for k in range(4, 0, -1):
        step = 1 << (8 * k)
        v = ((low + step - 1) // step) * step
        if v < low + rng:
            low = v
            break
    for _ in range(5):
        low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
    end = pos
    while end > 1 and out[end - 1] == 0:
        end -= 1
    return out[1:end].copy()


@njit
def _next_byte(payload, pos):
    if pos < payload.shape[0]:
        return int(payload[pos]), pos + 1
    return 0, pos + 1


@njit
def decode_symbols(payload, means, scales, keep, symbols):
    """Inverse of :func:`encode_symbols`; writes kept symbols in place.

    Returns an error code (``OK`` on success). Skipped positions are left
    untouched.
    """
    n = means.shape[0]
    cum = np.zeros(2 * WINDOW_MAX + 4, dtype=np.int64)
    pos = 0
    code = 0
    rng = MASK32
    for _ in range(4):
        b, pos = _next_byte(payload, pos)
        code = (code << 8) | b

    for i in range(n):
        if keep[i] == 0:
            continue
        mu = means[i]
        sigma = scales[i]
        lo, hi = _window(mu, sigma)
        nsym = build_table(mu, sigma, lo, hi, cum)
        r = rng >> PREC_BITS
        target = code // r
        if target >= TOTAL:
            return ERR_TARGET
        a = 0
        z = nsym + 1
        while z - a > 1:
            m = (a + z) >> 1
            if cum[m] <= target:
                a = m
            else:
                z = m
        j = a
        code -= r * cum[j]
        rng = r * (cum[j + 1] - cum[j])
        while rng < TOP:
            rng <<= 8
            b, pos = _next_byte(payload, pos)
            code = ((code << 8) | b) & MASK32
        if j < nsym:
            symbols[i] = lo + j
            continue
        sign = 0
        nbits = 1
        d = 0
        reading_prefix = True
        b_idx = 0
        nbits_left = 0
        while True:
            rng >>= 1
            if code >= rng:
                code -= rng
                bit = 1
            else:
                bit = 0
            while rng < TOP:
                rng <<= 8
                b, pos = _next_byte(payload, pos)
                code = ((code << 8) | b) & MASK32
            if b_idx == 0:
                sign = bit
            elif reading_prefix:
                if bit == 1:
                    reading_prefix = False
                    d = 1
                    if nbits == 1:
                        break
                    nbits_left = nbits - 1
                else:
                    nbits += 1
                    if nbits > GAMMA_MAX_BITS:
                        return ERR_ESCAPE
            else:
                d = (d << 1) | bit
                nbits_left -= 1
                if nbits_left == 0:
                    break
            b_idx += 1
        if sign == 0:
            s = hi + d
        else:
            s = lo - d
        if s < SYMBOL_MIN or s > SYMBOL_MAX:
            return ERR_ESCAPE
        symbols[i] = s
    return OK
