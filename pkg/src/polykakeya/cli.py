"""Command-line entry points: scene ingestion, experiment orchestration,
seeded reproducibility, and CSV/manifest report emission.

Every run writes ``<subcommand>_<scenehash>.csv`` plus a JSON manifest to
the output directory.  CSV content is a pure function of the scene file
and flag overrides (flags beat file parameters), so identical inputs and
seed produce byte-identical reports; wall time lives only in the manifest.
Exit codes: 0 success, 2 parse/validation failure, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, geom, kakeya, planiness, polycore, scenes
from .dirvol import DirectedVolumeQuery, directed_volume_fiber, directed_volume_surface
from .geom import Ball, Cube, Tube
from .hamsandwich import BisectionProblem, Stalled, solve_bisection
from .measure import SampleBudget
from .scenes import ParseError, SceneFile, ValidationError, parse_scene, scene_hash
from .visibility import MollifiedQuery, find_high_visibility_surface, visibility

STAGE_ERRORS = (
    Stalled,
    kakeya.DegenerateTransversality,
    kakeya.HypothesisViolated,
    kakeya.PrerequisiteViolated,
    geom.EmptyFamily,
    geom.DegenerateBody,
)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_manifest(path: Path, payload: dict, started: float) -> None:
    payload = dict(payload)
    payload["version"] = __version__
    payload["wall_time_s"] = round(time.time() - started, 3)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def parse_region(spec: str):
    """Region specs: cube:x,y:side  ball:x,y:r  tube:px,py:ux,uy:r:len"""
    try:
        kind, *parts = spec.split(":")
        if kind == "cube":
            corner = np.array([float(x) for x in parts[0].split(",")])
            return Cube(corner, float(parts[1]))
        if kind == "ball":
            center = np.array([float(x) for x in parts[0].split(",")])
            return Ball(center, float(parts[1]))
        if kind == "tube":
            p = np.array([float(x) for x in parts[0].split(",")])
            u = np.array([float(x) for x in parts[1].split(",")])
            u = u / np.linalg.norm(u)
            return Tube(p, u, radius=float(parts[2]), length=float(parts[3]))
    except (ValueError, IndexError) as e:
        raise ParseError(f"bad region spec {spec!r}: {e}") from e
    raise ParseError(f"unknown region kind in {spec!r}")


def _budget(sf: SceneFile, overrides: dict, kind: str = "samples") -> SampleBudget:
    seed = overrides.get("seed")
    if seed is None:
        seed = sf.seed
    count = overrides.get(kind) or sf.params.get(kind)
    if count is None:
        count = 2 ** 18 if kind == "samples" else 2 ** 16
    return SampleBudget(int(seed), int(count))


def _load_scene(path: str) -> SceneFile:
    return parse_scene(Path(path).read_text())


# -- subcommand bodies ---------------------------------------------------------------


def run_hamsandwich(sf: SceneFile, overrides: dict, out: Path):
    regions = scenes.build_regions(sf)
    if not regions:
        raise ValidationError("hamsandwich needs a 'sets' list in the scene")
    degree = int(overrides.get("degree") or sf.params.get("degree", 1))
    tol = float(overrides.get("tol") or sf.params.get("tol", 0.01))
    budget = _budget(sf, overrides)
    problem = BisectionProblem(regions, degree=degree, tolerance=tol)
    result = solve_bisection(
        problem,
        budget,
        restarts=int(sf.params.get("restarts", 16)),
        threads=overrides.get("threads"),
    )
    tag = scene_hash(sf)
    rows = [
        [budget.seed, tag, i, float(d)] for i, d in enumerate(result.defects)
    ]
    write_csv(out / f"hamsandwich_{tag}.csv", ["seed", "scene", "set_index", "defect"], rows)
    (out / f"hamsandwich_{tag}_poly.json").write_text(
        json.dumps(polycore.poly_to_dict(result.P), indent=2) + "\n"
    )
    return {"sets": len(regions), "degree": degree, "iterations": result.iterations}, 0


def run_dirvol(sf: SceneFile, overrides: dict, out: Path):
    poly_file = overrides.get("poly") or sf.params.get("poly")
    if not poly_file:
        raise ValidationError("dirvol needs --poly FILE")
    P = polycore.poly_from_dict(json.loads(Path(poly_file).read_text()))
    region = parse_region(overrides.get("region") or sf.params.get("region", ""))
    v = np.array([float(x) for x in (overrides.get("v") or sf.params.get("v")).split(",")])
    method = overrides.get("method") or sf.params.get("method", "fiber")
    budget = _budget(sf, overrides, "lines" if method == "fiber" else "samples")
    q = DirectedVolumeQuery(P, region, v)
    est = directed_volume_fiber(q, budget) if method == "fiber" else directed_volume_surface(q, budget)
    tag = scene_hash(sf)
    write_csv(
        out / f"dirvol_{tag}.csv",
        ["seed", "scene", "method", "v", "value", "std_error"],
        [[budget.seed, tag, method, "|".join(map(repr, v)), est.value, est.std_error]],
    )
    return {"value": est.value}, 0


def run_visibility(sf: SceneFile, overrides: dict, out: Path):
    poly_file = overrides.get("poly") or sf.params.get("poly")
    if not poly_file:
        raise ValidationError("visibility needs --poly FILE")
    P = polycore.poly_from_dict(json.loads(Path(poly_file).read_text()))
    region = parse_region(overrides.get("region") or sf.params.get("region", ""))
    budget = _budget(sf, overrides, "lines")
    mol = overrides.get("mollify") or sf.params.get("mollify")
    mq = None
    if mol:
        eps, k = str(mol).split(",")
        mq = MollifiedQuery(float(eps), int(k))
    rep = visibility(P, region, budget, mollify=mq)
    tag = scene_hash(sf)
    write_csv(
        out / f"visibility_{tag}.csv",
        ["seed", "scene", "vis", "body_volume", "john_det"],
        [[
            budget.seed,
            tag,
            rep.vis,
            rep.body.volume(),
            float(np.linalg.det(rep.john.quad_form)) if rep.john else float("nan"),
        ]],
    )
    if rep.john is not None:
        (out / f"visibility_{tag}_john.json").write_text(
            json.dumps(geom.ellipsoid_to_dict(rep.john), indent=2) + "\n"
        )
    return {"vis": rep.vis}, 0


def run_vissearch(sf: SceneFile, overrides: dict, out: Path):
    targets_file = overrides.get("targets") or sf.params.get("targets")
    if not targets_file:
        raise ValidationError("vissearch needs --targets FILE")
    spec = json.loads(Path(targets_file).read_text())
    goals = [(parse_region(t["region"]), float(t["M"])) for t in spec]
    d_max = int(overrides.get("dmax") or sf.params.get("dmax", 4))
    budget = _budget(sf, overrides, "lines")
    total = sum(m for _, m in goals)
    d = max(1, int(np.ceil(total ** (1.0 / goals[0][0].n))))
    result = None
    while True:
        result = find_high_visibility_surface(goals, min(d, d_max), budget)
        if result.success or d >= d_max:
            break
        d = min(2 * d, d_max)
    tag = scene_hash(sf)
    rows = [
        [budget.seed, tag, i, float(m), float(a), float(r)]
        for i, ((_, m), a, r) in enumerate(zip(goals, result.achieved, result.ratios))
    ]
    write_csv(
        out / f"vissearch_{tag}.csv",
        ["seed", "scene", "region_index", "target", "achieved_vis", "ratio"],
        rows,
    )
    (out / f"vissearch_{tag}_poly.json").write_text(
        json.dumps(polycore.poly_to_dict(result.poly), indent=2) + "\n"
    )
    code = 0 if result.success else 3
    return {"degree": result.degree, "success": result.success}, code


def _scene_summary(seed: int, sf: SceneFile, scene) -> list:
    sizes = "|".join(str(s) for s in scene.family_sizes())
    return [seed, scene_hash(sf), scene.n, sizes]


def run_kakeya_t1(sf: SceneFile, overrides: dict, out: Path):
    scene = scenes.build_tube_scene(sf)
    budget = _budget(sf, overrides)
    est = kakeya.theorem1_volume(scene, budget)
    A = max(scene.family_sizes())
    scaling = est.value / A ** (scene.n / (scene.n - 1))
    tag = scene_hash(sf)
    write_csv(
        out / f"kakeya_t1_{tag}.csv",
        ["seed", "scene", "n", "A", "volume", "std_error", "vol_over_scaling"],
        [_scene_summary(budget.seed, sf, scene) + [est.value, est.std_error, scaling]],
    )
    return {"volume": est.value}, 0


def run_kakeya_t2(sf: SceneFile, overrides: dict, out: Path):
    scene = scenes.build_tube_scene(sf)
    budget = _budget(sf, overrides)
    rep = kakeya.kakeya_ratio(scene)
    tag = scene_hash(sf)
    write_csv(
        out / f"kakeya_t2_{tag}.csv",
        ["seed", "scene", "n", "A", "theta", "lhs", "rhs_core", "ratio"],
        [_scene_summary(budget.seed, sf, scene) + [rep.theta, rep.lhs, rep.rhs_core, rep.ratio]],
    )
    return {"ratio": rep.ratio}, 0


def run_kakeya_trace(sf: SceneFile, overrides: dict, out: Path):
    scene = scenes.build_tube_scene(sf)
    budget = _budget(sf, overrides)
    tr = kakeya.theorem1_trace(scene, budget)
    tag = scene_hash(sf)
    write_csv(
        out / f"kakeya_trace_{tag}.csv",
        [
            "seed", "scene", "n", "A", "cubes", "degree", "bisection_defect",
            "popular_family", "popular_tube", "popular_cubes", "directed_volume",
            "cylinder_bound", "lhs_V_over_A", "rhs_V_pow", "holds",
        ],
        [
            _scene_summary(budget.seed, sf, scene)
            + [
                tr.cube_count, tr.degree, tr.bisection_defect,
                tr.popular_tube[0], tr.popular_tube[1], tr.popular_cube_count,
                tr.enlarged_tube_volume.value, tr.enlarged_cylinder_bound,
                tr.lhs_cubes_over_tubes, tr.rhs_degree_scale, int(tr.inequality_holds),
            ]
        ],
    )
    return {"holds": tr.inequality_holds}, 0


def run_boxes(sf: SceneFile, overrides: dict, out: Path):
    tubes = scenes.build_pencil(sf)
    L = float(overrides.get("L") or sf.params.get("L", 10.0))
    sig = overrides.get("sigma") or sf.params.get("sigma", "1.6,2.3,3.2,4.5")
    sigmas = [float(s) for s in str(sig).split(",")]
    budget = _budget(sf, overrides, "lines")
    fld = planiness.build_box_field(tubes, L, budget)
    sweep = planiness.containment_sweep(
        tubes, fld, sigmas, budget, samples=int(sf.params.get("containment_samples", 48))
    )
    tag = scene_hash(sf)
    rows = []
    for i in sorted(sweep.fractions):
        for s, f in zip(sweep.sigmas, sweep.fractions[i]):
            rows.append([budget.seed, tag, i, s, f])
    write_csv(
        out / f"boxes_{tag}.csv",
        ["seed", "scene", "tube", "sigma", "containment"],
        rows,
    )
    write_csv(
        out / f"boxes_{tag}_summary.csv",
        ["seed", "scene", "trivial", "union_volume", "fitted_exponent", "sigma_star"],
        [[budget.seed, tag, int(fld.trivial), fld.union_vol, sweep.fitted_exponent,
          sweep.sigma_star if sweep.sigma_star is not None else float("nan")]],
    )
    return {"exponent": sweep.fitted_exponent, "sigma_star": sweep.sigma_star}, 0


_RUNNERS = {
    "hamsandwich": run_hamsandwich,
    "dirvol": run_dirvol,
    "visibility": run_visibility,
    "vissearch": run_vissearch,
    "kakeya t1": run_kakeya_t1,
    "kakeya t2": run_kakeya_t2,
    "kakeya trace": run_kakeya_trace,
    "boxes": run_boxes,
}


def run(subcommand: str, sf: SceneFile, overrides: dict, out_dir: str = "reports") -> int:
    """Execute one subcommand against a parsed scene.  Returns the exit code
    and writes the CSV report plus a JSON manifest."""
    if subcommand not in _RUNNERS:
        raise ValidationError(f"unknown subcommand {subcommand!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    summary, code = _RUNNERS[subcommand](sf, overrides, out)
    manifest = {
        "subcommand": subcommand,
        "scene": sf.canonical(),
        "scene_hash": scene_hash(sf),
        "overrides": {k: v for k, v in overrides.items() if v is not None},
        "summary": summary,
        "exit_code": code,
    }
    write_manifest(out / f"{subcommand.replace(' ', '_')}_{scene_hash(sf)}_manifest.json",
                   manifest, started)
    return code


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--lines", type=int, default=None)
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap; never changes results")
    p.add_argument("--out", default="reports")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="polykakeya")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("hamsandwich", help="simultaneous bisection of scene sets")
    _add_common(p)
    p.add_argument("--degree", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("dirvol", help="directed volume of a hypersurface piece")
    _add_common(p)
    p.add_argument("--poly", default=None)
    p.add_argument("--region", default=None)
    p.add_argument("--v", default=None)
    p.add_argument("--method", choices=["fiber", "surface"], default=None)

    p = sub.add_parser("visibility", help="visibility body of a surface piece")
    _add_common(p)
    p.add_argument("--poly", default=None)
    p.add_argument("--region", default=None)
    p.add_argument("--mollify", default=None, metavar="EPS,K")

    p = sub.add_parser("vissearch", help="search for a high-visibility surface")
    _add_common(p)
    p.add_argument("--targets", default=None)
    p.add_argument("--dmax", type=int, default=None)

    p = sub.add_parser("kakeya", help="tube-arrangement experiments")
    ksub = p.add_subparsers(dest="kcmd", required=True)
    for name in ("t1", "t2", "trace"):
        kp = ksub.add_parser(name)
        _add_common(kp)

    p = sub.add_parser("boxes", help="box-field construction and containment")
    _add_common(p)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--sigma", default=None, help="comma-separated dilation list")

    args = ap.parse_args(argv)
    cmd = args.cmd if args.cmd != "kakeya" else f"kakeya {args.kcmd}"
    overrides = {
        k: v
        for k, v in vars(args).items()
        if k not in ("cmd", "kcmd", "scene", "out") and v is not None
    }
    try:
        sf = _load_scene(args.scene)
        code = run(cmd, sf, overrides, args.out)
    except (ParseError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except STAGE_ERRORS as e:
        print(f"stage failure ({type(e).__name__}): {e}", file=sys.stderr)
        return 3
    print(f"{cmd}: reports written to {args.out}/")
    return code


if __name__ == "__main__":
    sys.exit(main())
