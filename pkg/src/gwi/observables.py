"""Measurement settings in the X-Y and X-Z planes, grouped per party."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .qstate import Observable

PLANES = ("XY", "XZ")


def _finite(phi) -> float:
    phi = float(phi)
    if not math.isfinite(phi):
        raise DomainError(f"angle must be finite, got {phi!r}")
    return phi


def xy_setting(phi: float) -> Observable:
    """``cos(phi) sigma_x + sin(phi) sigma_y``, angle measured from the X axis."""
    phi = _finite(phi)
    return Observable(np.array([math.cos(phi), math.sin(phi), 0.0]))


def xz_setting(phi: float) -> Observable:
    """``cos(phi) sigma_z + sin(phi) sigma_x``, angle measured from the Z axis."""
    phi = _finite(phi)
    return Observable(np.array([math.sin(phi), 0.0, math.cos(phi)]))


def normalize_plane(plane: str) -> str:
    key = str(plane).upper().replace("-", "")
    if key not in PLANES:
        raise ValidationError(f"unknown plane {plane!r}; expected one of {PLANES}")
    return key


def plane_setting(plane: str, phi: float) -> Observable:
    return xy_setting(phi) if normalize_plane(plane) == "XY" else xz_setting(phi)


class SettingPair(NamedTuple):
    unprimed: Observable
    primed: Observable


@dataclass(frozen=True)
class SettingSet:
    """One (unprimed, primed) observable pair per party."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(SettingPair(*p) for p in self.pairs)
        if not pairs:
            raise ValidationError("a setting set needs at least one party")
        object.__setattr__(self, "pairs", pairs)

    @property
    def n_parties(self) -> int:
        return len(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[SettingPair]:
        return iter(self.pairs)

    def __getitem__(self, i) -> SettingPair:
        return self.pairs[i]

    @property
    def unprimed(self) -> list[Observable]:
        return [p.unprimed for p in self.pairs]

    @property
    def primed(self) -> list[Observable]:
        return [p.primed for p in self.pairs]


def setting_set_from_angles(plane: str, angles: Iterable[Sequence[float]]) -> SettingSet:
    """Build a ``SettingSet`` from per-party ``(phi, phi_prime)`` tuples."""
    plane = normalize_plane(plane)
    pairs = [tuple(p) for p in angles]
    if not pairs:
        raise ValidationError("need at least one (phi, phi') pair")
    for p in pairs:
        if len(p) != 2:
            raise ValidationError(f"each party needs exactly two angles, got {p!r}")
    return SettingSet(tuple(SettingPair(plane_setting(plane, a), plane_setting(plane, b))
                            for a, b in pairs))


def setting_set_from_flat(plane: str, flat: Sequence[float]) -> SettingSet:
    """``[phi_1, phi'_1, phi_2, phi'_2, ...]`` -> ``SettingSet``."""
    flat = list(flat)
    if len(flat) % 2:
        raise ValidationError("flat angle list must have even length (phi, phi' per party)")
    return setting_set_from_angles(plane, zip(flat[0::2], flat[1::2]))


def setting_set_from_bloch(bloch_pairs) -> SettingSet:
    """Raw settings: ``[[[x, y, z], [x', y', z']], ...]`` per party."""
    pairs = []
    for p in bloch_pairs:
        if len(p) != 2:
            raise ValidationError("each party needs an (unprimed, primed) Bloch pair")
        pairs.append(SettingPair(Observable(np.asarray(p[0], float)), Observable(np.asarray(p[1], float))))
    return SettingSet(tuple(pairs))


def ghz_reduced_settings(alpha: float, beta: float, n: int = 4) -> SettingSet:
    """X-Y settings with ``sum(phi_i) = alpha`` and ``phi'_i = phi_i + beta``.

    The unprimed angles are split evenly, ``phi_i = alpha / n``.
    """
    phi = _finite(alpha) / n
    return setting_set_from_angles("XY", [(phi, phi + _finite(beta))] * n)


def cluster_reduced_settings(phi1: float, phi1p: float) -> SettingSet:
    """X-Z settings with ``phi_1 = -phi_2 = -phi_3 = phi_4``, ``phi'_1 = -phi'_3``,
    ``phi'_2 = -phi'_4`` and ``phi'_1 + phi'_2 = 2 pi``."""
    phi1, phi1p = _finite(phi1), _finite(phi1p)
    phi2p = 2 * math.pi - phi1p
    return setting_set_from_angles("XZ", [
        (phi1, phi1p), (-phi1, phi2p), (-phi1, -phi1p), (phi1, -phi2p),
    ])


def w_reduced_settings(phi1p: float, phi2: float, phi2p: float, phi3: float, phi3p: float) -> SettingSet:
    """X-Z settings with ``phi_1 = 0``, ``phi_4 = phi_2`` and ``phi'_4 = phi'_2``."""
    return setting_set_from_angles("XZ", [
        (0.0, phi1p), (phi2, phi2p), (phi3, phi3p), (phi2, phi2p),
    ])
