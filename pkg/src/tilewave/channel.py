"""Per-receiver channel metrics: total power, delay profiles, coherent sum.

Scoring (total power, delay spread) uses non-coherent power summation; the
coherent narrowband sum is a separate analysis product. In the coherent
model the propagation phase enters as exp(+j 2 pi f_c tau) and any
bounce-induced phase theta as exp(-j theta); with loss-only tile models
theta is 0 for every path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raytrace import PropagationPath


class EmptyProfileError(ValueError):
    """Delay spread is undefined for an empty power delay profile."""


@dataclass
class PowerDelayProfile:
    """Multipath taps as (delay seconds, power mW), sorted by delay."""

    taps: list[tuple[float, float]]

    def __post_init__(self):
        if any(p <= 0 for _, p in self.taps):
            raise ValueError("tap powers must be positive")
        self.taps = sorted(self.taps)

    @classmethod
    def from_paths(cls, paths: list[PropagationPath]) -> "PowerDelayProfile":
        return cls([(p.delay, 10.0 ** (p.rx_power_dbm / 10.0)) for p in paths])

    def delays(self) -> np.ndarray:
        return np.array([t for t, _ in self.taps])

    def powers_mw(self) -> np.ndarray:
        return np.array([p for _, p in self.taps])


@dataclass
class ReceivedSignal:
    """Coherent narrowband sum of all paths (unit symbol)."""

    amplitude: complex
    noise_power: float    # mW
    path_count: int

    @property
    def power(self) -> float:
        return abs(self.amplitude) ** 2


def _power_dbm(entry) -> float:
    return entry.rx_power_dbm if isinstance(entry, PropagationPath) else float(entry)


def total_power_dbm(paths, floor: float) -> float:
    """Non-coherent total received power in dBmW, clamped to the floor.

    Accepts propagation paths or plain dBmW values. An empty list (or a
    total below the floor) returns the floor; `is_disconnected` tells the
    two cases apart.
    """
    values = [_power_dbm(p) for p in paths]
    if not values:
        return floor
    total = 10.0 * math.log10(sum(10.0 ** (v / 10.0) for v in values))
    return max(total, floor)


def is_disconnected(total_dbm: float, floor: float) -> bool:
    return total_dbm <= floor


def delay_spread(pdp: PowerDelayProfile) -> float:
    """Power-weighted RMS delay spread in seconds.

    sqrt(E_w[tau^2] - E_w[tau]^2), computed as the second central moment
    for numerical stability under delay translation.
    """
    if not pdp.taps:
        raise EmptyProfileError("empty power delay profile")
    t = pdp.delays()
    w = pdp.powers_mw()
    w = w / w.sum()
    mean = float(w @ t)
    return math.sqrt(max(0.0, float(w @ ((t - mean) ** 2))))


def max_excess_delay(pdp: PowerDelayProfile) -> float:
    """Spread between first and last tap, exposed alongside the RMS metric."""
    if not pdp.taps:
        raise EmptyProfileError("empty power delay profile")
    t = pdp.delays()
    return float(t.max() - t.min())


def received_signal(paths: list[PropagationPath], f_c: float,
                    noise_power: float = 0.0, seed: int = 0) -> ReceivedSignal:
    """Coherent sum a_i exp(-j theta_i) exp(+j 2 pi f_c tau_i) (+ noise)."""
    amp = 0.0 + 0.0j
    for p in paths:
        amp += p.attenuation * np.exp(-1j * p.phase) * np.exp(1j * 2.0 * math.pi * f_c * p.delay)
    if noise_power > 0.0:
        rng = np.random.default_rng(seed)
        amp += complex(rng.normal(0.0, math.sqrt(noise_power / 2.0)),
                       rng.normal(0.0, math.sqrt(noise_power / 2.0)))
    return ReceivedSignal(amplitude=complex(amp), noise_power=noise_power,
                          path_count=len(paths))


def pdp_to_csv(pdp: PowerDelayProfile, path, header_lines: tuple[str, ...] = ()) -> None:
    lines = [f"# {h}" for h in header_lines]
    lines.append("delay_ns,power_dbm")
    for t, p in pdp.taps:
        lines.append(f"{t * 1e9:.6f},{10.0 * math.log10(p):.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
