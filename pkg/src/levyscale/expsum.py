"""Exponential sums ``f(x) = sum_j w_j * x**p_j * exp(r_j * x)`` on ``x >= 0``.

Every scale function produced by this package is a finite sum of this
form, so derivatives, antiderivatives, products and Laplace transforms are
all exact term manipulations.
"""

from __future__ import annotations

from math import factorial
from typing import Sequence

import numpy as np

PRUNE_RELATIVE = 1e-16
ZERO_RATE = 1e-12


class ExpSum:
    """Immutable exponential-polynomial sum.

    Parameters
    ----------
    weights, rates, powers:
        Parallel sequences; term ``j`` is ``weights[j] * x**powers[j] *
        exp(rates[j] * x)``.  Terms with equal ``(rate, power)`` are merged
        and negligible weights are pruned.  Rates below ``ZERO_RATE`` in
        magnitude are set to exactly zero, where ``e^{rx}`` is 1 to within
        ``1e-12 x``; the closed-form antiderivative divides by ``r^{p+1}`` and
        would otherwise overflow.
    """

    __slots__ = ("_w", "_r", "_p")

    def __init__(self, weights: Sequence[float], rates: Sequence[float],
                 powers: Sequence[int] | None = None, prune: bool = True):
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        r = np.atleast_1d(np.asarray(rates, dtype=float))
        if powers is None:
            p = np.zeros(w.shape, dtype=np.int64)
        else:
            p = np.atleast_1d(np.asarray(powers, dtype=np.int64))
        if not (w.shape == r.shape == p.shape) or w.ndim != 1:
            raise ValueError("weights, rates and powers must be 1-d and of equal length")
        if np.any(p < 0):
            raise ValueError("powers must be nonnegative")
        r = np.where(np.abs(r) < ZERO_RATE, 0.0, r)
        w, r, p = _merge(w, r, p, prune)
        for arr in (w, r, p):
            arr.setflags(write=False)
        self._w, self._r, self._p = w, r, p

    @classmethod
    def constant(cls, c: float) -> "ExpSum":
        return cls([c], [0.0], [0])

    @classmethod
    def zero(cls) -> "ExpSum":
        return cls([], [], [])

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def rates(self) -> np.ndarray:
        return self._r

    @property
    def powers(self) -> np.ndarray:
        return self._p

    @property
    def terms(self) -> list[tuple[float, float, int]]:
        return [(float(w), float(r), int(p)) for w, r, p in zip(self._w, self._r, self._p)]

    def __len__(self) -> int:
        return len(self._w)

    def __repr__(self) -> str:
        body = " + ".join(
            f"{w:.6g}" + (f"*x^{p}" if p else "") + (f"*exp({r:.6g}x)" if r else "")
            for w, r, p in self.terms
        )
        return f"ExpSum({body or '0'})"

    # ------------------------------------------------------------------
    # evaluation
    # ------------------------------------------------------------------
    def __call__(self, x):
        """Evaluate at ``x`` (scalar or array, ``x >= 0``).

        Terms are combined relative to the largest log-magnitude, so the
        result overflows to a signed ``inf`` instead of producing ``nan``.
        """
        xa = np.asarray(x, dtype=float)
        scalar = xa.ndim == 0
        xa = np.atleast_1d(xa)
        if len(self) == 0:
            out = np.zeros_like(xa)
            return float(out[0]) if scalar else out
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            logx = np.log(xa)[:, None]
            plog = np.where(self._p[None, :] > 0, self._p[None, :] * logx, 0.0)
            logs = np.log(np.abs(self._w))[None, :] + plog + self._r[None, :] * xa[:, None]
            top = np.max(logs, axis=1)
            top = np.where(np.isfinite(top), top, 0.0)
            s = np.sum(np.sign(self._w)[None, :] * np.exp(logs - top[:, None]), axis=1)
            out = np.where(s == 0.0, 0.0, s * np.exp(top))
        return float(out[0]) if scalar else out

    def at_zero(self) -> float:
        return float(np.sum(self._w[self._p == 0]))

    # ------------------------------------------------------------------
    # calculus
    # ------------------------------------------------------------------
    def derivative(self, order: int = 1) -> "ExpSum":
        f = self
        for _ in range(order):
            w, r, p = f._w, f._r, f._p
            lower = p > 0
            f = ExpSum(
                np.concatenate([w * r, (w * p)[lower]]),
                np.concatenate([r, r[lower]]),
                np.concatenate([p, p[lower] - 1]),
            )
        return f

    def antiderivative(self) -> "ExpSum":
        """Return ``F`` with ``F(x) = int_0^x f(y) dy`` (so ``F(0) = 0``)."""
        ws, rs, ps = [], [], []
        const = 0.0
        for w, r, p in self.terms:
            if r == 0.0:
                ws.append(w / (p + 1))
                rs.append(0.0)
                ps.append(p + 1)
                continue
            # int y^p e^{ry} = e^{ry} sum_j (-1)^j p!/(p-j)! y^{p-j} / r^{j+1}
            for j in range(p + 1):
                coef = w * (-1) ** j * factorial(p) / factorial(p - j) / r ** (j + 1)
                ws.append(coef)
                rs.append(r)
                ps.append(p - j)
            const -= w * (-1) ** p * factorial(p) / r ** (p + 1)
        ws.append(const)
        rs.append(0.0)
        ps.append(0)
        return ExpSum(ws, rs, ps)

    def laplace(self, s):
        """Exact Laplace transform ``int_0^inf e^{-sx} f(x) dx`` for ``s > max rate``."""
        s = np.asarray(s, dtype=complex if np.iscomplexobj(s) else float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        if len(self) and np.any(np.real(s)[:, None] <= self._r[None, :]):
            raise ValueError("Laplace transform diverges: s must exceed every rate")
        fact = np.array([factorial(int(p)) for p in self._p], dtype=float)
        out = np.sum(self._w * fact / (s[:, None] - self._r) ** (self._p + 1), axis=1)
        return out[0] if scalar else out

    def shift(self, rate: float) -> "ExpSum":
        """Multiply by ``exp(rate * x)``."""
        return ExpSum(self._w, self._r + rate, self._p)

    # ------------------------------------------------------------------
    # algebra
    # ------------------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float, np.floating)):
            other = ExpSum.constant(float(other))
        if not isinstance(other, ExpSum):
            return NotImplemented
        return ExpSum(np.concatenate([self._w, other._w]),
                      np.concatenate([self._r, other._r]),
                      np.concatenate([self._p, other._p]))

    __radd__ = __add__

    def __neg__(self) -> "ExpSum":
        return ExpSum(-self._w, self._r, self._p)

    def __sub__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return self + (-float(other))
        if not isinstance(other, ExpSum):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return ExpSum(self._w * float(other), self._r, self._p)
        if not isinstance(other, ExpSum):
            return NotImplemented
        w = np.outer(self._w, other._w).ravel()
        r = np.add.outer(self._r, other._r).ravel()
        p = np.add.outer(self._p, other._p).ravel()
        return ExpSum(w, r, p)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def to_dict(self) -> dict:
        return {"weights": self._w.tolist(), "rates": self._r.tolist(), "powers": self._p.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExpSum":
        return cls(d["weights"], d["rates"], d.get("powers"))


def _merge(w, r, p, prune):
    if w.size == 0:
        return w.copy(), r.copy(), p.copy()
    acc: dict[tuple[float, int], float] = {}
    for wi, ri, pi in zip(w.tolist(), r.tolist(), p.tolist()):
        key = (ri, pi)
        acc[key] = acc.get(key, 0.0) + wi
    keys = sorted(acc, key=lambda k: (-k[0], k[1]))
    ws = np.array([acc[k] for k in keys], dtype=float)
    rs = np.array([k[0] for k in keys], dtype=float)
    ps = np.array([k[1] for k in keys], dtype=np.int64)
    if prune and ws.size:
        big = np.max(np.abs(ws))
        keep = np.abs(ws) >= PRUNE_RELATIVE * big if big > 0 else np.zeros(ws.shape, bool)
        ws, rs, ps = ws[keep], rs[keep], ps[keep]
    return ws, rs, ps
