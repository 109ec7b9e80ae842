"""Scalar convex atoms and their perspective calculus.

An atom is a finite convex function h on R with h(0) = 0.  Its perspective
closure is

    persp(x, w) = w * h(x / w)            for w > 0,
    persp(x, 0) = recession slope limit   (lim of s * h(x / s) as s -> 0+),
    persp(x, w) = +inf                    for w < 0.

The closure is jointly convex, positively homogeneous, and nonincreasing in
w.  Smoothing replaces w by w + mu, which underestimates the closure for
w >= 0 and converges monotonically from below as mu -> 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, ClassVar

import numpy as np

LOG2 = math.log(2.0)


class AtomError(ValueError):
    """Bad atom parameters or an evaluation outside the valid domain."""


@dataclass(frozen=True)
class Quadratic:
    """h(v) = quad * v^2 + lin * v with quad >= 0."""

    quad: float = 1.0
    lin: float = 0.0
    kind: ClassVar[str] = "quadratic"

    def __post_init__(self):
        if self.quad < 0:
            raise AtomError("quadratic coefficient must be nonnegative")

    def value(self, v: float) -> float:
        return self.quad * v * v + self.lin * v

    def derivative_interval(self, v: float) -> tuple[float, float]:
        d = 2.0 * self.quad * v + self.lin
        return (d, d)

    def slope_limits(self) -> tuple[float, float]:
        if self.quad == 0:
            return (self.lin, self.lin)
        return (-math.inf, math.inf)

    def is_linear(self) -> bool:
        return self.quad == 0

    def value_vec(self, v: np.ndarray) -> np.ndarray:
        return self.quad * v * v + self.lin * v

    def derivative_vec(self, v: np.ndarray) -> np.ndarray:
        return 2.0 * self.quad * v + self.lin


@dataclass(frozen=True)
class Abs:
    """h(v) = gamma * |v| with gamma > 0."""

    gamma: float = 1.0
    kind: ClassVar[str] = "abs"

    def __post_init__(self):
        if self.gamma <= 0:
            raise AtomError("abs slope must be positive")

    def value(self, v: float) -> float:
        return self.gamma * abs(v)

    def derivative_interval(self, v: float) -> tuple[float, float]:
        if v > 0:
            return (self.gamma, self.gamma)
        if v < 0:
            return (-self.gamma, -self.gamma)
        return (-self.gamma, self.gamma)

    def slope_limits(self) -> tuple[float, float]:
        return (-self.gamma, self.gamma)

    def is_linear(self) -> bool:
        return False

    def value_vec(self, v: np.ndarray) -> np.ndarray:
        return self.gamma * np.abs(v)

    def derivative_vec(self, v: np.ndarray) -> np.ndarray:
        # midpoint of the subdifferential: 0 at the kink
        return self.gamma * np.sign(v)


@dataclass(frozen=True)
class Power:
    """h(v) = scale * |v|^exponent with exponent in (1, 2], scale > 0."""

    exponent: float = 1.5
    scale: float = 1.0
    kind: ClassVar[str] = "power"

    def __post_init__(self):
        if not (1.0 < self.exponent <= 2.0):
            raise AtomError("power exponent must lie in (1, 2]")
        if self.scale <= 0:
            raise AtomError("power scale must be positive")

    def value(self, v: float) -> float:
        try:
            return self.scale * abs(v) ** self.exponent
        except OverflowError:
            return math.inf

    def derivative_interval(self, v: float) -> tuple[float, float]:
        if v == 0:
            return (0.0, 0.0)
        try:
            d = self.scale * self.exponent * abs(v) ** (self.exponent - 1.0)
        except OverflowError:
            d = math.inf
        d = d if v > 0 else -d
        return (d, d)

    def slope_limits(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def is_linear(self) -> bool:
        return False

    def value_vec(self, v: np.ndarray) -> np.ndarray:
        return self.scale * np.abs(v) ** self.exponent

    def derivative_vec(self, v: np.ndarray) -> np.ndarray:
        return (
            self.scale
            * self.exponent
            * np.abs(v) ** (self.exponent - 1.0)
            * np.sign(v)
        )


@dataclass(frozen=True)
class ShiftedLogistic:
    """h(v) = log((1 + exp(-v)) / 2), the logistic loss shifted so h(0) = 0."""

    kind: ClassVar[str] = "shifted_logistic"

    def value(self, v: float) -> float:
        # log1p(exp(-v)) computed without overflow for very negative v
        return max(0.0, -v) + math.log1p(math.exp(-abs(v))) - LOG2

    def derivative_interval(self, v: float) -> tuple[float, float]:
        if v >= 0:
            e = math.exp(-v)
            d = -e / (1.0 + e)
        else:
            d = -1.0 / (1.0 + math.exp(v))
        return (d, d)

    def slope_limits(self) -> tuple[float, float]:
        return (-1.0, 0.0)

    def is_linear(self) -> bool:
        return False

    def value_vec(self, v: np.ndarray) -> np.ndarray:
        return np.maximum(0.0, -v) + np.log1p(np.exp(-np.abs(v))) - LOG2

    def derivative_vec(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        pos = v >= 0
        e = np.exp(-v[pos])
        out[pos] = -e / (1.0 + e)
        out[~pos] = -1.0 / (1.0 + np.exp(v[~pos]))
        return out


@dataclass(frozen=True)
class ExpMinusOne:
    """h(v) = exp(v) - 1.  Internal atom for exponential-cone lowering."""

    kind: ClassVar[str] = "expm1"

    def value(self, v: float) -> float:
        try:
            return math.expm1(v)
        except OverflowError:
            return math.inf

    def derivative_interval(self, v: float) -> tuple[float, float]:
        try:
            d = math.exp(v)
        except OverflowError:
            d = math.inf
        return (d, d)

    def slope_limits(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def is_linear(self) -> bool:
        return False

    def value_vec(self, v: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.expm1(v)

    def derivative_vec(self, v: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(v)


@dataclass(frozen=True)
class CustomAtom:
    """User-supplied convex atom.

    value_fn must be convex with value_fn(0) == 0; subgrad_fn returns the
    subdifferential interval at a point; slope limits are the asymptotic
    slopes toward -inf and +inf (used for the w = 0 closure values).
    """

    value_fn: Callable[[float], float]
    subgrad_fn: Callable[[float], tuple[float, float]]
    slope_neg: float = -math.inf
    slope_pos: float = math.inf
    linear: bool = False
    kind: ClassVar[str] = "custom"

    def value(self, v: float) -> float:
        return self.value_fn(v)

    def derivative_interval(self, v: float) -> tuple[float, float]:
        return self.subgrad_fn(v)

    def slope_limits(self) -> tuple[float, float]:
        return (self.slope_neg, self.slope_pos)

    def is_linear(self) -> bool:
        return self.linear

    def value_vec(self, v: np.ndarray) -> np.ndarray:
        return np.array([self.value_fn(float(t)) for t in np.ravel(v)]).reshape(
            np.shape(v)
        )

    def derivative_vec(self, v: np.ndarray) -> np.ndarray:
        flat = [self.subgrad_fn(float(t)) for t in np.ravel(v)]
        return np.array([0.5 * (lo + hi) for lo, hi in flat]).reshape(np.shape(v))


def recession(atom, x: float) -> float:
    """Limit of s * h(x / s) as s -> 0+, i.e. the closure value at w = 0."""
    if x == 0:
        return 0.0
    neg, pos = atom.slope_limits()
    if x > 0:
        return math.inf if pos == math.inf else pos * x
    return math.inf if neg == -math.inf else neg * x


def eval_perspective_closure(atom, x: float, w: float) -> float:
    """Closed perspective of the atom at (x, w)."""
    if w > 0:
        return w * atom.value(x / w)
    if w == 0:
        return recession(atom, x)
    return math.inf


def perspective_subgradient(atom, x: float, w: float) -> tuple[float, float]:
    """A subgradient (g_x, g_w) of the perspective at (x, w), w > 0.

    Uses the midpoint of the subdifferential interval at kinks.  The w
    component h(v) - v * g is always <= 0 because h(0) = 0.
    """
    if w <= 0:
        raise AtomError("perspective subgradient requires w > 0")
    v = x / w
    lo, hi = atom.derivative_interval(v)
    g = 0.5 * (lo + hi)
    gw = atom.value(v) - v * g
    if math.isnan(gw):
        # value and v * g both overflowed; their true difference is <= 0
        gw = -math.inf
    return (g, gw)


def smoothed_perspective(atom, x: float, w: float, mu: float) -> float:
    """persp(x, w + mu): a smooth lower approximation for w >= 0, mu > 0."""
    return eval_perspective_closure(atom, x, w + mu)


def smoothed_perspective_grad(
    atom, x: float, w: float, mu: float
) -> tuple[float, float]:
    return perspective_subgradient(atom, x, w + mu)


def persp_value_vec(atom, x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Vectorized closed perspective; w entries may be zero or negative."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.full(np.broadcast(x, w).shape, math.inf)
    x, w = np.broadcast_arrays(x, w)
    pos = w > 0
    if np.any(pos):
        with np.errstate(over="ignore", invalid="ignore"):
            out[pos] = w[pos] * atom.value_vec(x[pos] / w[pos])
    zero = w == 0
    if np.any(zero):
        neg_slope, pos_slope = atom.slope_limits()
        xz = x[zero]
        vals = np.zeros_like(xz)
        with np.errstate(invalid="ignore"):
            vals = np.where(xz > 0, pos_slope * xz, vals)
            vals = np.where(xz < 0, neg_slope * xz, vals)
        vals = np.where(np.isnan(vals), math.inf, vals)
        out[zero] = vals
    return out


def persp_grad_vec(
    atom, x: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized perspective subgradients; requires w > 0 elementwise."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise AtomError("perspective gradients require w > 0")
    v = x / w
    g = atom.derivative_vec(v)
    return g, atom.value_vec(v) - v * g


_NAMED = {
    "quadratic": Quadratic,
    "abs": Abs,
    "power": Power,
    "shifted_logistic": ShiftedLogistic,
    "expm1": ExpMinusOne,
}


def atom_to_text(atom) -> str:
    """Readable one-line form, invertible by atom_from_text."""
    if isinstance(atom, Quadratic):
        return f"quadratic quad={atom.quad!r} lin={atom.lin!r}"
    if isinstance(atom, Abs):
        return f"abs gamma={atom.gamma!r}"
    if isinstance(atom, Power):
        return f"power exponent={atom.exponent!r} scale={atom.scale!r}"
    if isinstance(atom, ShiftedLogistic):
        return "shifted_logistic"
    if isinstance(atom, ExpMinusOne):
        return "expm1"
    raise AtomError(f"atom kind {getattr(atom, 'kind', '?')!r} has no text form")


def atom_from_text(text: str):
    parts = text.split()
    if not parts:
        raise AtomError("empty atom text")
    name, params = parts[0], parts[1:]
    cls = _NAMED.get(name)
    if cls is None:
        raise AtomError(f"unknown atom kind {name!r}")
    kwargs = {}
    for item in params:
        key, _, raw = item.partition("=")
        if not _ or not key:
            raise AtomError(f"malformed atom parameter {item!r}")
        kwargs[key] = float(raw)
    return cls(**kwargs)
