"""Convolution kernels for mass vectors.

``log_conv_exp`` is the workhorse: it convolves two log-domain mass vectors
by factoring out the per-vector maximum, exponentiating the shifted vectors,
multiplying their Fourier transforms, inverse-transforming, and re-adding the
maxima in the log domain.  Working on ``exp(lam - max(lam))`` keeps every
intermediate in [0, 1] regardless of how small the masses are, so products of
tiny probabilities never underflow the way a linear-domain convolution does.

``naive_conv`` is the quadratic linear-domain baseline, kept deliberately
independent of the FFT path so the two can cross-check each other.  It uses
Kahan compensated summation per output bin and is JIT-compiled, which keeps
its runtime an honest c*N^2 over the benchmark range.
"""

from __future__ import annotations

import functools

import numpy as np

from .errors import AllZeroMass, NonPowerOfTwoLength, NumericalBlowup

# Negative inverse-transform values larger than this fraction of the output
# mass scale indicate a real numerical failure rather than roundoff.
CLAMP_REL_THRESHOLD = 1e-10

# Below this output length, direct convolution wins on speed and, unlike the
# FFT, perturbing one input entry leaves unrelated output bins bit-identical,
# which finite-difference gradient checks rely on.
DIRECT_CONV_CUTOFF = 256


def next_pow2(n: int) -> int:
    """Smallest power of two >= n (n >= 1)."""
    return 1 << (n - 1).bit_length()


def fft(buf, inverse: bool = False) -> np.ndarray:
    """Discrete Fourier transform of a power-of-two-length complex buffer.

    Forward: X[k] = sum_n x[n] exp(-2i*pi*k*n/L).  The inverse applies the
    conjugate kernel and the 1/L factor, so inverse(forward(x)) == x up to
    roundoff.
    """
    arr = np.asarray(buf, dtype=np.complex128)
    n = arr.size
    if n < 1 or (n & (n - 1)) != 0:
        raise NonPowerOfTwoLength(f"transform length {n} is not a power of two")
    return np.fft.ifft(arr) if inverse else np.fft.fft(arr)


def _single_finite_index(lam: np.ndarray) -> int | None:
    """Index of the only finite entry, or None if there are 0 or >= 2."""
    finite = np.isfinite(lam)
    count = int(finite.sum())
    if count == 0:
        raise AllZeroMass("convolution input has no positive mass")
    if count == 1:
        return int(np.argmax(finite))
    return None


def _shift_conv(point_lam: np.ndarray, idx: int, other: np.ndarray) -> np.ndarray:
    # Point-mass bypass: convolving with a single spike is a shift plus a
    # log-domain scale, and is exact.
    out = np.full(point_lam.size + other.size - 1, -np.inf)
    out[idx : idx + other.size] = other + point_lam[idx]
    return out


def clamp_negatives(linear: np.ndarray, scale: float) -> np.ndarray:
    """Zero out small negative inverse-transform values, in place.

    ``scale`` is the product of the (shifted) input totals, i.e. the natural
    magnitude of the output.  Negatives beyond CLAMP_REL_THRESHOLD * scale are
    not roundoff and raise instead of being silently hidden.
    """
    neg = linear < 0.0
    if neg.any():
        worst = float(-linear[neg].min())
        if worst > CLAMP_REL_THRESHOLD * scale:
            raise NumericalBlowup(
                f"inverse transform produced negative value {-worst:.3e} "
                f"(clamp threshold {CLAMP_REL_THRESHOLD * scale:.3e})"
            )
        linear[neg] = 0.0
    return linear


def log_conv_exp(a, b) -> np.ndarray:
    """Log-domain linear convolution: exp(result) == exp(a) (*) exp(b).

    Output length is dim(a) + dim(b) - 1.  Exact zeros (-inf entries) stay
    exact through the point-mass bypass and the post-transform clamp.
    """
    la = np.asarray(a, dtype=np.float64)
    lb = np.asarray(b, dtype=np.float64)
    if la.size == 0 or lb.size == 0:
        raise AllZeroMass("convolution inputs must be nonempty")

    ia = _single_finite_index(la)
    ib = _single_finite_index(lb)
    if ia is not None:
        return _shift_conv(la, ia, lb)
    if ib is not None:
        return _shift_conv(lb, ib, la)

    mu_a = float(la.max())
    mu_b = float(lb.max())
    out_len = la.size + lb.size - 1

    if out_len <= DIRECT_CONV_CUTOFF:
        # Skip the max-factoring when exponentials cannot over/underflow:
        # an unscaled direct convolution reads each input entry only in the
        # output bins it mathematically feeds, so the rest stay bit-identical
        # under perturbation (finite-difference checks depend on that).
        if max(abs(mu_a), abs(mu_b)) <= 300.0 and min(
            float(la.min(initial=0.0, where=np.isfinite(la))),
            float(lb.min(initial=0.0, where=np.isfinite(lb))),
        ) >= -300.0:
            mu_a = mu_b = 0.0
        linear = np.convolve(np.exp(la - mu_a), np.exp(lb - mu_b))
        with np.errstate(divide="ignore"):
            out = np.log(linear)
        out += mu_a + mu_b
        return out

    n = next_pow2(out_len)
    buf_a = np.zeros(n)
    np.exp(la - mu_a, out=buf_a[: la.size])
    scale_a = float(buf_a.sum())
    spec = np.fft.rfft(buf_a)
    del buf_a

    buf_b = np.zeros(n)
    np.exp(lb - mu_b, out=buf_b[: lb.size])
    scale_b = float(buf_b.sum())
    spec *= np.fft.rfft(buf_b)
    del buf_b

    linear = np.fft.irfft(spec, n=n)[:out_len]
    del spec
    clamp_negatives(linear, scale_a * scale_b)
    with np.errstate(divide="ignore"):
        out = np.log(linear)
    out += mu_a + mu_b
    return out


def linear_conv(a, b) -> np.ndarray:
    """FFT linear convolution of two real (possibly signed) vectors.

    Used by reverse-mode differentiation, where cotangents carry signs, so
    there is no clamping here.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out_len = a.size + b.size - 1
    if out_len <= DIRECT_CONV_CUTOFF:
        return np.convolve(a, b)
    n = next_pow2(out_len)
    spec = np.fft.rfft(a, n=n)
    spec *= np.fft.rfft(b, n=n)
    return np.fft.irfft(spec, n=n)[:out_len]


@functools.lru_cache(maxsize=1)
def _naive_kernels():
    # Deferred numba import: JIT compilation costs ~1s and CLI paths that
    # never touch the baseline should not pay it.
    from numba import njit

    @njit(cache=True)
    def kernel(a, b):  # pragma: no cover - exercised via naive_conv
        n1 = a.size
        n2 = b.size
        out = np.empty(n1 + n2 - 1)
        for k in range(n1 + n2 - 1):
            lo = k - n2 + 1
            if lo < 0:
                lo = 0
            hi = k + 1
            if hi > n1:
                hi = n1
            s = 0.0
            c = 0.0
            for i in range(lo, hi):
                y = a[i] * b[k - i] - c
                t = s + y
                c = (t - s) - y
                s = t
            out[k] = s
        return out

    return kernel


def _naive_kernel():
    return _naive_kernels()


def naive_conv(a, b) -> np.ndarray:
    """Exact quadratic convolution of two linear-domain mass vectors.

    The double loop with per-output compensated summation is the correctness
    oracle for log_conv_exp; it shares no code with the FFT path.
    """
    arr_a = np.ascontiguousarray(a, dtype=np.float64)
    arr_b = np.ascontiguousarray(b, dtype=np.float64)
    if arr_a.size == 0 or arr_b.size == 0:
        raise AllZeroMass("convolution inputs must be nonempty")
    if not arr_a.max() > 0 or not arr_b.max() > 0:
        raise AllZeroMass("convolution input has no positive mass")
    return _naive_kernel()(arr_a, arr_b)


def warm_up_naive() -> None:
    """Trigger the one-time JIT compiles outside any timed region.

    Covers both the writable and the read-only array signatures; numba
    compiles them separately.
    """
    kernel = _naive_kernel()
    writable = np.ones(2)
    frozen = np.ones(2)
    frozen.setflags(write=False)
    kernel(writable, writable)
    kernel(frozen, frozen)
    kernel(writable, frozen)
    kernel(frozen, writable)


def log_naive_conv(a, b) -> np.ndarray:
    """Log-domain wrapper over the quadratic baseline.

    Deliberately unstabilized: exponentiation happens directly, so masses
    near the float minimum underflow to zero (and then to -inf), unlike
    log_conv_exp.
    """
    la = np.asarray(a, dtype=np.float64)
    lb = np.asarray(b, dtype=np.float64)
    if la.size == 0 or lb.size == 0:
        raise AllZeroMass("convolution inputs must be nonempty")
    if not la.max() > -np.inf or not lb.max() > -np.inf:
        raise AllZeroMass("convolution input has no positive mass")
    return log_naive_from_logs(la, lb)


def log_naive_from_logs(la: np.ndarray, lb: np.ndarray) -> np.ndarray:
    """Raw log-in/log-out baseline convolution; caller validates inputs."""
    lin = _naive_kernels()(np.exp(la), np.exp(lb))
    with np.errstate(divide="ignore"):
        return np.log(lin)
