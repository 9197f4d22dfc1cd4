"""Stepsize / minibatch / mixing-weight schedules and the theory presets.

A schedule gives eta(k), batch(k) and lam(k) for every iteration k >= 0.
The presets follow the same pattern: a special value at k = 0 and
constants afterwards, with lam(0) = 1 always.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import InvalidArgument

SQRT8 = math.sqrt(8.0)


def ceil_sqrt(n: int) -> int:
    return math.isqrt(n - 1) + 1 if n > 0 else 0


def theoretical_stepsize(L: float) -> float:
    """1 / ((1 + sqrt 8) L), the stepsize every preset reduces to."""
    return 1.0 / ((1.0 + SQRT8) * L)


def _as_fn(v) -> Callable[[int], float]:
    return v if callable(v) else (lambda k, v=v: v)


@dataclass
class ParamSchedule:
    """Schedule for ZeroSARAH on n components.

    ``b0``/``b`` and ``lam_k`` are the k = 0 and k >= 1 values. Custom
    schedules may pass callables instead of constants.
    """

    n: int
    eta_k: float | Callable[[int], float]
    b0: int | Callable[[int], int]
    b: int | Callable[[int], int]
    lam_k: float | Callable[[int], float]
    preset: str = "custom"
    theoretical: bool = False
    L: float | None = None
    notes: list[str] = field(default_factory=list)

    def eta(self, k: int) -> float:
        return float(_as_fn(self.eta_k)(k))

    def batch(self, k: int) -> int:
        b = int(_as_fn(self.b0)(k) if k == 0 else _as_fn(self.b)(k))
        if not 1 <= b <= self.n:
            raise InvalidArgument(f"batch size {b} at k={k} outside [1, {self.n}]")
        return b

    def lam(self, k: int) -> float:
        if k == 0:
            return 1.0
        lam = float(_as_fn(self.lam_k)(k))
        if not 0.0 < lam <= 1.0:
            raise InvalidArgument(f"lam={lam} at k={k} outside (0, 1]")
        return lam

    def M(self, k: int) -> float:
        """M_k = 2/(lam_k b_k) + 8 lam_k n^2 / b_k^3 (defined for k >= 1)."""
        lam, b = self.lam(k), self.batch(k)
        return 2.0 / (lam * b) + 8.0 * lam * self.n**2 / b**3

    def stepsize_cap(self, k: int, L: float) -> float:
        return 1.0 / (L * (1.0 + math.sqrt(self.M(k + 1))))


def _override(eta_theory: float, extras: dict, notes: list[str]) -> tuple[float, bool]:
    if extras.get("stepsize") is not None:
        notes.append(f"stepsize overridden to {extras['stepsize']}")
        return float(extras["stepsize"]), False
    scale = float(extras.get("scale", 1.0))
    if scale != 1.0:
        notes.append(f"theoretical stepsize scaled by {scale:g}")
        return scale * eta_theory, False
    return eta_theory, True


def schedule_preset(name: str, n: int, L: float, **extras) -> ParamSchedule:
    """cor1 / cor2 / cor3 / custom presets.

    All three theory presets use b_k = ceil(sqrt n) and lam_k = b_k/(2n)
    for k >= 1, giving M_k = 8n/b_k^2 <= 8 (exactly 8 for square n), and
    eta = 1/((1+sqrt 8)L). They differ only in b0:

    * cor1: b0 = n (one full gradient at x^0)
    * cor2: b0 = ceil(sqrt n) (never a full gradient)
    * cor3: b0 = min(ceil(sqrt(n G0 / eps^2)), n); ``G0`` may be replaced by
      the bound ``2 * L * delta_hat``.

    ``custom`` takes ``stepsize``, ``batch``, ``b0`` and ``lam`` directly.
    ``stepsize=`` or ``scale=`` on a theory preset keeps the batch rule
    but marks the schedule non-theoretical.
    """
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    if not L > 0:
        raise InvalidArgument("L must be > 0")
    notes: list[str] = []
    if name == "custom":
        if extras.get("stepsize") is None:
            raise InvalidArgument("custom schedule needs stepsize")
        b = extras.get("batch", ceil_sqrt(n))
        return ParamSchedule(
            n, extras["stepsize"], extras.get("b0", b), b, extras.get("lam", 1.0),
            preset="custom", theoretical=False, L=L, notes=notes,
        )
    b = min(ceil_sqrt(n), n)
    if name == "cor1":
        b0 = n
    elif name == "cor2":
        b0 = b
    elif name == "cor3":
        eps = extras.get("epsilon")
        G0 = extras.get("G0")
        if G0 is None and extras.get("delta_hat") is not None:
            G0 = 2.0 * L * float(extras["delta_hat"])
        if eps is None or G0 is None:
            raise InvalidArgument("cor3 needs epsilon and G0 (or delta_hat)")
        raw = math.sqrt(n * float(G0) / float(eps) ** 2)
        b0 = max(1, math.ceil(raw - 1e-9))
        if b0 > n:
            notes.append(f"b0={b0} clamped to n={n}")
            b0 = n
    else:
        raise InvalidArgument(f"unknown preset {name!r}")
    eta, theoretical = _override(theoretical_stepsize(L), extras, notes)
    sched = ParamSchedule(n, eta, b0, b, b / (2.0 * n), preset=name, theoretical=theoretical, L=L, notes=notes)
    if theoretical:
        assert eta <= sched.stepsize_cap(0, L) * (1 + 1e-12)
    return sched


@dataclass
class SarahSchedule:
    """Epoch length l, minibatch b and constant stepsize for SARAH."""

    n: int
    eta: float
    l: int
    b: int

    def __post_init__(self):
        if self.l < 0 or not 1 <= self.b <= self.n:
            raise InvalidArgument("need l >= 0 and 1 <= b <= n")


def sarah_schedule(n: int, eta: float, l: int | None = None, b: int | None = None) -> SarahSchedule:
    return SarahSchedule(n, eta, ceil_sqrt(n) if l is None else l, ceil_sqrt(n) if b is None else b)


@dataclass
class DistSchedule:
    """Schedule for the n-client federation with m samples per client."""

    n: int
    m: int
    eta_k: float | Callable[[int], float]
    s0: int
    b0: int
    s: int
    b: int
    lam_k: float | Callable[[int], float]
    preset: str = "custom"
    theoretical: bool = False
    L: float | None = None
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        for s in (self.s0, self.s):
            if not 1 <= s <= self.n:
                raise InvalidArgument(f"client sample size {s} outside [1, {self.n}]")
        for b in (self.b0, self.b):
            if not 1 <= b <= self.m:
                raise InvalidArgument(f"client minibatch {b} outside [1, {self.m}]")

    def eta(self, k: int) -> float:
        return float(_as_fn(self.eta_k)(k))

    def clients(self, k: int) -> int:
        return self.s0 if k == 0 else self.s

    def batch(self, k: int) -> int:
        return self.b0 if k == 0 else self.b

    def lam(self, k: int) -> float:
        if k == 0:
            return 1.0
        lam = float(_as_fn(self.lam_k)(k))
        if not 0.0 < lam <= 1.0:
            raise InvalidArgument(f"lam={lam} at k={k} outside (0, 1]")
        return lam

    def W(self, k: int) -> float:
        """W_k = 2/(lam_k s_k b_k) + 8 lam_k n^2 m^2 / (s_k b_k)^3."""
        lam, sb = self.lam(k), self.clients(k) * self.batch(k)
        return 2.0 / (lam * sb) + 8.0 * lam * (self.n * self.m) ** 2 / sb**3

    def stepsize_cap(self, k: int, L: float) -> float:
        return 1.0 / (L * (1.0 + math.sqrt(self.W(k + 1))))


def dist_schedule_preset(name: str, n: int, m: int, L: float, **extras) -> DistSchedule:
    """cor1d / cor2d / cor3d / custom presets for the federation.

    For k >= 1: s_k = ceil(sqrt n), b_k = ceil(sqrt m), lam_k = s_k b_k/(2nm),
    hence W_k = 8nm/(s_k b_k)^2 <= 8 and eta = 1/((1+sqrt 8)L).
    Round 0: cor1d uses (n, m); cor2d uses (s, b); cor3d picks
    s0*b0 = min(sqrt(nm G0'/eps^2), nm), by shrinking s0 with b0 = m, or with
    ``split="batch"`` by shrinking b0 with s0 = n.
    """
    if n < 1 or m < 1:
        raise InvalidArgument("n and m must be >= 1")
    if not L > 0:
        raise InvalidArgument("L must be > 0")
    notes: list[str] = []
    if name == "custom":
        if extras.get("stepsize") is None:
            raise InvalidArgument("custom schedule needs stepsize")
        s = extras.get("clients", ceil_sqrt(n))
        b = extras.get("batch", ceil_sqrt(m))
        return DistSchedule(
            n, m, extras["stepsize"], extras.get("s0", s), extras.get("b0", b), s, b,
            extras.get("lam", 1.0), preset="custom", theoretical=False, L=L, notes=notes,
        )
    s, b = ceil_sqrt(n), ceil_sqrt(m)
    if name == "cor1d":
        s0, b0 = n, m
    elif name == "cor2d":
        s0, b0 = s, b
    elif name == "cor3d":
        eps, G0 = extras.get("epsilon"), extras.get("G0")
        if eps is None or G0 is None:
            raise InvalidArgument("cor3d needs epsilon and G0")
        eps, G0 = float(eps), float(G0)
        if extras.get("split", "clients") == "batch":
            s0, b0 = n, min(max(1, math.ceil(math.sqrt(m * G0 / (n * eps**2)) - 1e-9)), m)
        else:
            s0, b0 = min(max(1, math.ceil(math.sqrt(n * G0 / (m * eps**2)) - 1e-9)), n), m
        if s0 * b0 == n * m:
            notes.append("s0*b0 clamped to nm (full participation at round 0)")
    else:
        raise InvalidArgument(f"unknown preset {name!r}")
    eta, theoretical = _override(theoretical_stepsize(L), extras, notes)
    sched = DistSchedule(n, m, eta, s0, b0, s, b, s * b / (2.0 * n * m), preset=name,
                         theoretical=theoretical, L=L, notes=notes)
    if theoretical:
        assert eta <= sched.stepsize_cap(0, L) * (1 + 1e-12)
    return sched


@dataclass
class DSarahSchedule:
    n: int
    m: int
    eta: float
    l: int
    s: int
    b: int

    def __post_init__(self):
        if self.l < 1 or not 1 <= self.s <= self.n or not 1 <= self.b <= self.m:
            raise InvalidArgument("need l >= 1, 1 <= s <= n, 1 <= b <= m")


def dsarah_schedule(n: int, m: int, eta: float, l=None, s=None, b=None) -> DSarahSchedule:
    return DSarahSchedule(
        n, m, eta,
        ceil_sqrt(n * m) if l is None else l,
        ceil_sqrt(n) if s is None else s,
        ceil_sqrt(m) if b is None else b,
    )
