"""Scene construction and (de)serialization.

A scene file is JSON with fields {version, n, S, seed, families, params}.
``families`` either lists tubes explicitly or names a generator:

* ``grid``: axis-aligned tubes on a regular transverse grid, A^{n-1} per
  family.  With radius 1/2 and spacing 1 every unit cell is crossed by
  exactly one tube per family, which is the exact ratio-1 baseline of the
  lattice functional; radii are shrunk by a hair so closed tubes do not
  graze the neighbouring cells through shared faces.  With radius 1 and
  spacing 2 the tubes are adjacent-disjoint width-2 slabs whose
  intersection fills the scene (the sharp volume example).
* ``random_transverse``: seeded tubes tilted up to ``max_tilt`` from their
  family axis, resampled until the transversality theta meets
  ``min_theta``.
* ``pencil``: tubes of a common length fanning through a hub, used by the
  box-field experiments.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import Tube, min_determinant
from .kakeya import TubeScene
from .streams import stream

GRID_RADIUS_SHRINK = 1e-6


class ParseError(Exception):
    """Malformed scene file; the message names the offending field."""


class ValidationError(Exception):
    """Structurally valid scene that breaks an invariant."""


def grid_scene(n: int, A: int, radius: float = 0.5, spacing: float | None = None,
               seed: int = 0) -> TubeScene:
    """Axis-aligned grid: one family per axis, A^{n-1} tubes each, centers
    on the transverse grid (k + 1/2) * spacing."""
    if spacing is None:
        spacing = 2.0 * radius
    side = int(math.ceil(A * spacing - 1e-9))
    eff_radius = radius * (1.0 - GRID_RADIUS_SHRINK)
    families = []
    for j in range(n):
        tubes = []
        other = [ax for ax in range(n) if ax != j]
        for combo in itertools.product(range(A), repeat=n - 1):
            p = np.zeros(n)
            p[j] = -1.0
            for ax, k in zip(other, combo):
                p[ax] = (k + 0.5) * spacing
            e = np.zeros(n)
            e[j] = 1.0
            tubes.append(Tube(p, e, radius=eff_radius, length=None, family=j))
        families.append(tuple(tubes))
    return TubeScene(n=n, families=tuple(families), scene_side=side, seed=seed)


def random_transverse_scene(
    n: int,
    counts,
    seed: int,
    radius: float = 0.5,
    max_tilt: float = 0.35,
    min_theta: float = 0.2,
    side: int | None = None,
    max_resamples: int = 64,
) -> TubeScene:
    """Seeded tubes near their family axes with guaranteed transversality."""
    counts = [int(c) for c in (counts if hasattr(counts, "__len__") else [counts] * n)]
    if len(counts) != n:
        raise ValidationError("random_transverse needs one tube count per family")
    if side is None:
        side = max(6, int(math.ceil(4.0 * math.sqrt(max(counts)))))
    for attempt in range(max_resamples):
        rng = stream(seed, "random-transverse", attempt)
        families = []
        for j in range(n):
            tubes = []
            e = np.zeros(n)
            e[j] = 1.0
            for _ in range(counts[j]):
                tilt = rng.uniform(0.0, max_tilt)
                w = rng.standard_normal(n)
                w -= (w @ e) * e
                nw = np.linalg.norm(w)
                if nw < 1e-12:
                    w = np.zeros(n)
                    w[(j + 1) % n] = 1.0
                    nw = 1.0
                v = math.cos(tilt) * e + math.sin(tilt) * (w / nw)
                v /= np.linalg.norm(v)
                p = rng.uniform(0.0, side, n)
                p -= (p @ v) * v  # slide the base out of the scene along v
                p += -2.0 * side * v
                tubes.append(Tube(p, v, radius=radius, length=None, family=j))
            families.append(tuple(tubes))
        scene = TubeScene(n=n, families=tuple(families), scene_side=side, seed=seed)
        if any(len(f) == 0 for f in scene.families):
            continue
        det = min_determinant([scene.directions(j) for j in range(n)], seed=seed)
        if det.value >= min_theta:
            return scene
    raise ValidationError(
        f"could not reach theta >= {min_theta} within {max_resamples} resamples"
    )


def pencil_tubes(
    n: int,
    count: int,
    length: float,
    seed: int,
    radius: float = 1.0,
    spread: float = 0.8,
    hub=None,
) -> list[Tube]:
    """Tubes of one length fanning through a common hub point.

    Fan angles are log-spaced between spread/16 and spread, so pairwise
    crossing angles cover a decade: the visibility ramp around each
    crossing scales like 1/angle, which is what spreads containment
    failures across a decade of dilations.
    """
    rng = stream(seed, "pencil")
    if hub is None:
        hub = np.full(n, length * 0.75)
    hub = np.asarray(hub, dtype=np.float64)
    base = np.zeros(n)
    base[0] = 1.0
    mags = np.geomspace(spread / 16.0, spread, max(count - 1, 1))
    angles = [0.0] + [m * (1 if i % 2 == 0 else -1) for i, m in enumerate(mags)]
    tubes = []
    for i in range(count):
        ang = angles[i] * (1.0 + rng.uniform(-0.1, 0.1))
        w = rng.standard_normal(n)
        w -= (w @ base) * base
        nw = np.linalg.norm(w)
        if nw < 1e-12:
            w = np.zeros(n)
            w[1] = 1.0
            nw = 1.0
        w = w / nw
        if n == 2:  # keep the fan planar and signed
            w = np.array([0.0, 1.0 if ang >= 0 else -1.0])
            ang = abs(ang)
        v = math.cos(ang) * base + math.sin(ang) * w
        v /= np.linalg.norm(v)
        jitter = rng.uniform(-0.6, 0.6, n)
        jitter -= (jitter @ v) * v
        start = hub - (length / 2.0) * v + jitter
        tubes.append(Tube(start, v, radius=radius, length=length, family=0))
    return tubes


# -- scene files --------------------------------------------------------------------


@dataclass(frozen=True)
class SceneFile:
    version: int
    n: int
    S: int | None
    seed: int
    families: dict
    params: dict = field(default_factory=dict)
    sets: tuple = ()

    def canonical(self) -> dict:
        out = {
            "version": self.version,
            "n": self.n,
            "seed": self.seed,
            "families": self.families,
            "params": dict(sorted(self.params.items())),
        }
        if self.S is not None:
            out["S"] = self.S
        if self.sets:
            out["sets"] = list(self.sets)
        return out


def _need(data: dict, name: str, kind=None):
    if name not in data:
        raise ParseError(f"missing field {name!r}")
    v = data[name]
    if kind is not None and not isinstance(v, kind):
        raise ParseError(f"field {name!r} has the wrong type")
    return v


def parse_scene(data) -> SceneFile:
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ParseError("scene must be a JSON object")
    version = _need(data, "version", int)
    if version != 1:
        raise ValidationError(f"unsupported scene version {version}")
    n = _need(data, "n", int)
    if n < 1:
        raise ValidationError("n must be >= 1")
    seed = _need(data, "seed", int)
    families = _need(data, "families", dict)
    gen = _need(families, "generator", str)
    if gen not in ("grid", "random_transverse", "explicit", "pencil"):
        raise ParseError(f"unknown generator {families['generator']!r}")
    if gen == "explicit":
        for i, t in enumerate(_need(families, "tubes", list)):
            for fld in ("core_point", "direction", "radius"):
                if fld not in t:
                    raise ParseError(f"tube {i} missing field {fld!r}")
    S = data.get("S")
    if S is not None and not isinstance(S, int):
        raise ParseError("field 'S' has the wrong type")
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ParseError("field 'params' has the wrong type")
    sets = tuple(data.get("sets", ()))
    return SceneFile(version, n, S, seed, families, dict(params), sets)


def serialize_scene(sf: SceneFile) -> str:
    return json.dumps(sf.canonical(), sort_keys=True, indent=2) + "\n"


def scene_hash(sf: SceneFile) -> str:
    blob = json.dumps(sf.canonical(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def build_tube_scene(sf: SceneFile) -> TubeScene:
    fam = sf.families
    gen = fam["generator"]
    if gen == "grid":
        return grid_scene(
            sf.n,
            int(fam.get("A", 2)),
            radius=float(fam.get("radius", 0.5)),
            spacing=fam.get("spacing"),
            seed=sf.seed,
        )
    if gen == "random_transverse":
        return random_transverse_scene(
            sf.n,
            fam.get("A", 4),
            seed=sf.seed,
            radius=float(fam.get("radius", 0.5)),
            max_tilt=float(fam.get("max_tilt", 0.35)),
            min_theta=float(fam.get("min_theta", 0.2)),
            side=sf.S,
        )
    if gen == "explicit":
        tubes = []
        for t in fam["tubes"]:
            tubes.append(
                Tube(
                    np.array(t["core_point"], dtype=float),
                    np.array(t["direction"], dtype=float)
                    / np.linalg.norm(t["direction"]),
                    radius=float(t["radius"]),
                    length=t.get("length"),
                    family=int(t.get("j", 0)),
                )
            )
        n = sf.n
        families = tuple(
            tuple(t for t in tubes if (t.family or 0) == j) for j in range(n)
        )
        if sf.S is None:
            raise ValidationError("explicit scenes must fix the scene side S")
        return TubeScene(n=n, families=families, scene_side=sf.S, seed=sf.seed)
    raise ValidationError(f"generator {gen!r} does not build a tube scene")


def build_pencil(sf: SceneFile) -> list[Tube]:
    fam = sf.families
    if fam["generator"] != "pencil":
        raise ValidationError("expected a pencil generator")
    return pencil_tubes(
        sf.n,
        int(fam.get("count", 5)),
        float(fam.get("length", 10.0)),
        sf.seed,
        radius=float(fam.get("radius", 1.0)),
        spread=float(fam.get("spread", 0.8)),
    )


def build_regions(sf: SceneFile):
    """Regions from the scene's ``sets`` entries (balls and cubes)."""
    from .geom import Ball, Cube

    out = []
    for i, s in enumerate(sf.sets):
        kind = s.get("type")
        if kind == "ball":
            out.append(Ball(np.array(s["center"], dtype=float), float(s["radius"])))
        elif kind == "cube":
            out.append(Cube(np.array(s["min_corner"], dtype=float), float(s["side"])))
        else:
            raise ParseError(f"set {i} has unknown type {kind!r}")
    return out
