"""Exact integration of exponential polynomials ``sum c * t**m * exp(i*w*t)``.

Nested time integrals of piecewise-constant Hamiltonians reduce to this
class of functions, which is closed under integration, so every iterated
integral in the perturbative and semiclassical formulas is evaluated in
closed form.
"""
from __future__ import annotations

import math

import numpy as np

# |w| below this is integrated through a Taylor expansion of exp(i w t)
ZERO_FREQ = 1e-8
_TAYLOR_TERMS = 8


class ExpPolyKernel:
    """A finite sum of terms ``coef * t**power * exp(1j * freq * t)``."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        for (freq, power), coef in (terms or {}).items():
            self._add(freq, power, coef)

    def _add(self, freq, power, coef):
        if coef == 0:
            return
        key = (float(freq), int(power))
        self.terms[key] = self.terms.get(key, 0j) + complex(coef)

    @classmethod
    def constant(cls, c=1.0):
        return cls({(0.0, 0): c})

    @classmethod
    def phase(cls, freq, coef=1.0):
        return cls({(freq, 0): coef})

    def __iter__(self):
        for (freq, power), coef in self.terms.items():
            yield coef, freq, power

    def __len__(self):
        return len(self.terms)

    def __add__(self, other):
        out = ExpPolyKernel(self.terms)
        for coef, freq, power in other:
            out._add(freq, power, coef)
        return out

    def __mul__(self, other):
        if isinstance(other, ExpPolyKernel):
            out = ExpPolyKernel()
            for c1, f1, m1 in self:
                for c2, f2, m2 in other:
                    out._add(f1 + f2, m1 + m2, c1 * c2)
            return out
        return ExpPolyKernel({k: v * other for k, v in self.terms.items()})

    __rmul__ = __mul__

    def shift_freq(self, freq):
        """Multiply by ``exp(1j * freq * t)``."""
        return ExpPolyKernel({(f + freq, m): c for (f, m), c in self.terms.items()})

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for coef, freq, power in self:
            out = out + coef * t**power * np.exp(1j * freq * t)
        return out if out.ndim else complex(out)

    def integral(self, lower=0.0, zero_tol=ZERO_FREQ):
        """Kernel of ``t -> integral from lower to t`` of this kernel."""
        out = ExpPolyKernel()
        const = 0j
        for coef, freq, power in self:
            if freq == 0.0:
                out._add(0.0, power + 1, coef / (power + 1))
                const -= coef * lower ** (power + 1) / (power + 1)
            elif abs(freq) < zero_tol:
                # polynomial expansion avoids the 1/freq**(m+1) cancellation
                for q in range(_TAYLOR_TERMS):
                    c = coef * (1j * freq) ** q / math.factorial(q) / (power + q + 1)
                    out._add(0.0, power + q + 1, c)
                    const -= c * lower ** (power + q + 1)
            else:
                # antiderivative of t^m e^{iwt}: e^{iwt} sum_r (-1)^r m!/(m-r)! t^(m-r) / (iw)^(r+1)
                iw = 1j * freq
                anti = ExpPolyKernel()
                for r in range(power + 1):
                    c = coef * (-1) ** r * math.perm(power, r) / iw ** (r + 1)
                    anti._add(freq, power - r, c)
                for c, f, m in anti:
                    out._add(f, m, c)
                const -= anti(lower)
        out._add(0.0, 0, const)
        return out


def phase_integral(freq, a, b, zero_tol=ZERO_FREQ):
    """``integral_a^b exp(1j * freq * s) ds`` with the resonant limit ``b - a``."""
    if abs(freq) < zero_tol:
        return complex(b - a) + 0.5j * freq * (b * b - a * a) - freq**2 * (b**3 - a**3) / 6
    return (np.exp(1j * freq * b) - np.exp(1j * freq * a)) / (1j * freq)
