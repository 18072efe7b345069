"""Command line entry point ``bohrchaos``.

Exit codes: 0 success, 1 malformed input, 2 certificate or verification
failure, 3 search depth or documented limit exceeded.

Relative output paths are resolved against ``$BOHRCHAOS_OUTPUT_DIR`` when
it is set.  JSON goes to stdout when no ``--out`` is given.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .birkhoff import (Character, CircleRotation, CylinderIndicatorDiff, FullShift, LocallyConstant,
                       ToralSystem, coded_point, fullshift_pair, lift_comparison, ue_control,
                       weighted_average_series)
from .errors import (BohrChaosError, CertificateFailure, CodeError, DepthExceeded, EnvelopeTooLoose,
                     IntegrityError, PreconditionError, Unsupported)
from .horseshoe import (CodedHorseshoe, build_horseshoe_in_cylinder, certify, disjointify,
                        verify_certificate)
from .symbolic import PeriodicPoint, point_from_json
from .weights import WeightSpec, best_residue, generate, geometric_grid, nontriviality_index

log = logging.getLogger("bohrchaos")

EXIT_OK, EXIT_INPUT, EXIT_VERIFY, EXIT_LIMIT = 0, 1, 2, 3
OUTPUT_ENV = "BOHRCHAOS_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


class VerificationFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# io helpers

def _load_json(arg: str, inputs: dict, name: str):
    """Inline JSON or a path to a JSON file; records a sha256 of the bytes."""
    text = arg
    p = Path(arg)
    if not arg.lstrip().startswith(("{", "[")) and p.exists():
        text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PreconditionError(f"{name}: not valid JSON ({exc})") from exc
    inputs[name] = hashlib.sha256(text.encode()).hexdigest()
    return data


def _resolve(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _emit(args, text: str, outputs: list, suffix: str = "") -> None:
    target = getattr(args, "out", None)
    if suffix and target:
        target = str(Path(target).with_suffix(suffix))
    if target:
        p = _resolve(target)
        p.write_text(text)
        outputs.append(str(p))
    else:
        sys.stdout.write(text)


def _write_manifest(args, inputs: dict, outputs: list, extra: dict) -> None:
    if not getattr(args, "manifest", None):
        return
    man = {
        "command": f"{args.group} {args.cmd}",
        "argv": [a for a in sys.argv[1:]] if args._argv is None else args._argv,
        "inputs": inputs,
        "seed": getattr(args, "seed", None),
        "grid": None,
        "outputs": outputs,
        "version": __version__,
    }
    man.update(extra)
    p = _resolve(args.manifest)
    p.write_text(_dumps(man))


def _weight_spec(args, inputs) -> WeightSpec:
    data = _load_json(args.weight, inputs, "weight")
    return _seeded_spec(data, args.seed)


def _seeded_spec(data, seed) -> WeightSpec:
    if not isinstance(data, dict):
        raise PreconditionError("weight spec must be a JSON object")
    if data.get("kind") == "bernoulli_pm1":
        if seed is None:
            raise PreconditionError("bernoulli weights are random: pass --seed")
        data = dict(data, params=dict(data.get("params", {}), seed=int(seed)))
    return WeightSpec.from_json(data)


def _grid(args, n_max: int) -> list:
    if getattr(args, "grid", None):
        return [int(v) for v in args.grid.split(",")]
    return geometric_grid(n_max)


# ---------------------------------------------------------------------------
# horseshoe

def cmd_horseshoe_build(args, inputs, outputs):
    h, cert = build_horseshoe_in_cylinder(args.cylinder, args.sided, pre_refine=not args.no_pre_refine)
    out = {"horseshoe": h.to_json(), "certificate": cert.to_json(),
           "generators": list(h.generators), "tau": cert.tau}
    _emit(args, _dumps(out), outputs)
    return {}


def _horseshoe_from(args, inputs) -> CodedHorseshoe:
    if args.generators:
        return CodedHorseshoe(tuple(args.generators), sided=args.sided)
    data = _load_json(args.input, inputs, "horseshoe")
    data = data.get("horseshoe", data)
    return CodedHorseshoe(tuple(data["generators"]), sided=data.get("sided", args.sided))


def cmd_horseshoe_disjointify(args, inputs, outputs):
    h = _horseshoe_from(args, inputs)
    new, cert = disjointify(h, max_depth=args.max_depth)
    out = {"horseshoe": {"generators": list(new.generators), "order": new.order, "sided": new.sided},
           "certificate": cert.to_json(), "tau": cert.tau, "input_order": h.order,
           "M": cert.tau // h.order}
    _emit(args, _dumps(out), outputs)
    return {}


def cmd_horseshoe_verify(args, inputs, outputs):
    data = _load_json(args.certificate, inputs, "certificate")
    data = data.get("certificate", data)
    try:
        cert = verify_certificate(data)
    except CertificateFailure as exc:
        _emit(args, _dumps({"verified": False, "reason": str(exc)}), outputs)
        raise
    if args.require_full and not cert.full:
        _emit(args, _dumps({"verified": False, "reason": "certificate is not full"}), outputs)
        raise CertificateFailure("certificate re-verified but is not full")
    _emit(args, _dumps({"verified": True, "tau": cert.tau, "full": cert.full}), outputs)
    return {}


# ---------------------------------------------------------------------------
# weights

def cmd_weights_gen(args, inputs, outputs):
    spec = _weight_spec(args, inputs)
    w = generate(spec, args.n)
    _emit(args, w.to_csv(), outputs)
    return {"weight_spec": spec.digest()}


def cmd_weights_index(args, inputs, outputs):
    spec = _weight_spec(args, inputs)
    w = generate(spec, args.n)
    grid = _grid(args, args.n)
    idx = nontriviality_index(w, grid)
    out = {"grid": idx.grid, "averages": idx.averages.tolist(),
           "limsup_surrogate": idx.limsup_surrogate, "nontrivial": idx.nontrivial}
    if args.q:
        j0, avgs = best_residue(w, args.q, grid)
        out["best_residue"] = {"q": args.q, "j0": j0, "averages": avgs}
    _emit(args, _dumps(out), outputs)
    return {"weight_spec": spec.digest(), "grid": grid}


# ---------------------------------------------------------------------------
# averages

def _observable(data: dict):
    kind = data.get("kind")
    if kind == "cylinder_indicator_diff":
        return CylinderIndicatorDiff(data.get("plus", "0"), data.get("minus", "1"))
    if kind == "locally_constant":
        return LocallyConstant(int(data["length"]), dict(data["table"]), float(data.get("default", 0)))
    if kind == "character":
        return Character(tuple(data["h"]))
    raise PreconditionError(f"unknown observable kind {kind!r}")


def _system(data: dict):
    from .toral import ToralAffineMap
    kind = data.get("kind")
    if kind == "full_shift":
        return FullShift(int(data.get("symbols", 2)))
    if kind == "circle_rotation":
        return CircleRotation(float(data["alpha"]))
    if kind == "toral_affine":
        return ToralSystem(ToralAffineMap.from_json(data))
    if kind == "coded_subshift":
        from .birkhoff import CodedSubshift
        return CodedSubshift(CodedHorseshoe(tuple(data["generators"])))
    raise PreconditionError(f"unknown system kind {kind!r}")


def cmd_average_run(args, inputs, outputs):
    cfg = _load_json(args.config, inputs, "config")
    try:
        sys_ = _system(cfg["system"])
        f = _observable(cfg["observable"])
        wspec = _seeded_spec(cfg["weight"], args.seed)
        grid = [int(v) for v in cfg["grid"]]
    except KeyError as exc:
        raise PreconditionError(f"config is missing {exc}") from exc
    pt = cfg.get("point", {"kind": "periodic", "period": "0"})
    if isinstance(sys_, (CircleRotation, ToralSystem)):
        x = pt.get("x", 0) if isinstance(pt, dict) else pt
    else:
        x = point_from_json(pt)
    w = generate(wspec, grid[-1])
    series = weighted_average_series(sys_, f, x, w, grid)
    _emit(args, series.to_csv(), outputs)
    return {"grid": grid}


def cmd_average_pair(args, inputs, outputs):
    spec = _weight_spec(args, inputs)
    w = generate(spec, args.n)
    f, x = fullshift_pair(w)
    grid = _grid(args, args.n)
    series = weighted_average_series(FullShift(), f, x, w, grid)
    u, part = w.real_policy()
    target = np.cumsum(np.abs(u))[np.asarray(grid) - 1] / np.asarray(grid)
    dev = float(np.max(np.abs(series.values - target)))
    if args.csv:
        p = _resolve(args.csv)
        p.write_text(series.to_csv())
        outputs.append(str(p))
    out = {"grid": grid, "A_N_final": complex(series.values[-1]), "cesaro_abs_final": float(target[-1]),
           "max_deviation": dev, "real_part_used": part}
    _emit(args, _dumps(out), outputs)
    if dev > 1e-12:
        raise VerificationFailed(f"pair identity deviates by {dev:.3g}")
    return {"grid": grid, "weight_spec": spec.digest()}


def cmd_average_lift(args, inputs, outputs):
    if args.seed is None:
        raise PreconditionError("lift draws a random point of K: pass --seed")
    h = _horseshoe_from(args, inputs)
    cert = certify(h.generators, h.sided)
    spec = _weight_spec(args, inputs)
    tau = h.order
    w = generate(spec, tau * (args.N + 2))
    rng = np.random.default_rng(args.seed)
    choices = "".join("01"[b] for b in rng.integers(0, 2, size=args.N + 4))
    x0 = coded_point(h, PeriodicPoint(choices, "0"))
    g = CylinderIndicatorDiff("0", "1")
    rep = lift_comparison(h, cert, g, x0, w, args.N)
    rep["ok"] = rep["difference"] <= rep["bound"]
    _emit(args, _dumps(rep), outputs)
    if not rep["ok"]:
        raise VerificationFailed("lift identity outside its bound")
    return {"weight_spec": spec.digest()}


# ---------------------------------------------------------------------------
# toral

def _matrix(args, inputs):
    from .toral import ToralAffineMap
    data = _load_json(args.matrix, inputs, "matrix")
    if isinstance(data, list):
        data = {"B": data}
    return ToralAffineMap.from_json(data)


def cmd_toral_analyze(args, inputs, outputs):
    from .toral import classify, choose_h0, spectral_analysis
    T = _matrix(args, inputs)
    spec = spectral_analysis(T.B)
    cls = classify(T.B, spec)
    out = spec.to_json()
    out.update(cls.to_json())
    out["h0"] = list(choose_h0(T.B, spec))
    _emit(args, _dumps(out), outputs)
    return {}


def cmd_toral_classify(args, inputs, outputs):
    from .toral import classify
    T = _matrix(args, inputs)
    _emit(args, _dumps(classify(T.B).to_json()), outputs)
    return {}


def cmd_toral_plan(args, inputs, outputs):
    from .toral import FrequencyPlan, choose_h0, lacunarity_and_split_check, search_q
    T = _matrix(args, inputs)
    h0 = tuple(int(v) for v in args.h0.split(",")) if args.h0 else choose_h0(T.B)
    if args.q:
        plan = FrequencyPlan(T.B, h0, args.q, args.horizon, args.delta, T.b)
        rep = lacunarity_and_split_check(plan)
    else:
        plan, rep = search_q(T.B, h0, args.horizon, b=T.b)
    out = {"plan": plan.to_json(), "report": rep.to_json(), "theta": plan.theta}
    _emit(args, _dumps(out), outputs)
    if args.q and not (rep.dissociate_ok and rep.split_ok):
        raise VerificationFailed("plan fails its finite-horizon checks")
    return {}


def cmd_toral_riesz_verify(args, inputs, outputs):
    from .toral import FrequencyPlan, RieszSpec, choose_h0, verify_weighted_limit
    if args.seed is None:
        raise PreconditionError("riesz-verify samples at random: pass --seed")
    T = _matrix(args, inputs)
    h0 = tuple(int(v) for v in args.h0.split(",")) if args.h0 else choose_h0(T.B)
    plan = FrequencyPlan(T.B, h0, args.q, min(args.K, 12), None, T.b)
    if args.weight:
        wspec = _weight_spec(args, inputs)
    else:
        wspec = WeightSpec("constant")
    w = generate(wspec, args.q * (max(args.N, args.K) + 1))
    rule = "weighted" if args.weight else "constant"
    spec = RieszSpec(plan, args.r, args.K, rule, w.values if rule == "weighted" else None, args.seed)
    rep = verify_weighted_limit(T, w, spec, args.N, args.samples, args.seed, jobs=args.jobs)
    _emit(args, _dumps(rep), outputs)
    if not rep["ok"] or not all(c["ok"] for c in rep["cross_residues"].values()):
        raise VerificationFailed("estimate outside 3 standard errors of its target")
    return {"weight_spec": wspec.digest()}


# ---------------------------------------------------------------------------
# control

def cmd_control_rotation(args, inputs, outputs):
    alpha = float(Fraction(args.alpha)) if "/" in args.alpha else _parse_alpha(args.alpha)
    grid = _grid(args, args.n_max) if args.grid else None
    if grid is None:
        from .birkhoff import default_control_grid
        grid = default_control_grid(args.n_max)
    rep = ue_control(alpha, args.beta, grid, h=args.h)
    series = rep.pop("series")
    if args.csv:
        p = _resolve(args.csv)
        p.write_text(series.to_csv())
        outputs.append(str(p))
    _emit(args, _dumps(rep), outputs)
    if not rep["holds"]:
        raise VerificationFailed(f"bound violated: max ratio {rep['max_ratio']}")
    return {"grid_points": len(grid)}


def _parse_alpha(text: str) -> float:
    if text == "golden":
        return (5 ** 0.5 - 1) / 2
    return float(text)


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bohrchaos", description="Horseshoe certificates, weighted averages and Riesz-product checks")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--log-level", default="WARNING")
    groups = p.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def common(sp, seed=False):
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--manifest", help="write a JSON run manifest here")
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None,
                        help="required by randomized commands" if seed else argparse.SUPPRESS)

    hs = groups.add_parser("horseshoe").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    sp = hs.add_parser("build")
    sp.add_argument("--cylinder", required=True)
    sp.add_argument("--sided", choices=("one", "two"), default="one")
    sp.add_argument("--no-pre-refine", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_horseshoe_build)
    sp = hs.add_parser("disjointify")
    sp.add_argument("--generators", nargs=2, metavar="WORD")
    sp.add_argument("--input", help="horseshoe JSON (as emitted by build)")
    sp.add_argument("--sided", choices=("one", "two"), default="one")
    sp.add_argument("--max-depth", type=int, default=16)
    common(sp)
    sp.set_defaults(func=cmd_horseshoe_disjointify)
    sp = hs.add_parser("verify")
    sp.add_argument("certificate", help="certificate JSON file or inline JSON")
    sp.add_argument("--require-full", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_horseshoe_verify)

    ws = groups.add_parser("weights").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("gen", cmd_weights_gen), ("index", cmd_weights_index)):
        sp = ws.add_parser(name)
        sp.add_argument("--weight", required=True, help="weight spec JSON or file")
        sp.add_argument("--n", type=int, required=True)
        if name == "index":
            sp.add_argument("--grid")
            sp.add_argument("--q", type=int)
        common(sp, seed=True)
        sp.set_defaults(func=func)

    av = groups.add_parser("average").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    sp = av.add_parser("run")
    sp.add_argument("--config", required=True)
    common(sp, seed=True)
    sp.set_defaults(func=cmd_average_run)
    sp = av.add_parser("pair")
    sp.add_argument("--weight", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--grid")
    sp.add_argument("--csv")
    common(sp, seed=True)
    sp.set_defaults(func=cmd_average_pair)
    sp = av.add_parser("lift")
    sp.add_argument("--generators", nargs=2, metavar="WORD")
    sp.add_argument("--input")
    sp.add_argument("--sided", choices=("one",), default="one")
    sp.add_argument("--weight", required=True)
    sp.add_argument("--N", type=int, default=10_000)
    common(sp, seed=True)
    sp.set_defaults(func=cmd_average_lift)

    tr = groups.add_parser("toral").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, func in (("analyze", cmd_toral_analyze), ("classify", cmd_toral_classify)):
        sp = tr.add_parser(name)
        sp.add_argument("--matrix", required=True, help="JSON {B, b} or matrix list, inline or file")
        common(sp)
        sp.set_defaults(func=func)
    sp = tr.add_parser("plan")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--h0")
    sp.add_argument("--q", type=int)
    sp.add_argument("--horizon", type=int, default=6)
    sp.add_argument("--delta", type=float)
    common(sp)
    sp.set_defaults(func=cmd_toral_plan)
    sp = tr.add_parser("riesz-verify")
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--h0")
    sp.add_argument("--q", type=int, default=1)
    sp.add_argument("--r", type=float, default=0.5)
    sp.add_argument("--K", type=int, default=12)
    sp.add_argument("--N", type=int, default=12)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--weight")
    common(sp, seed=True)
    sp.set_defaults(func=cmd_toral_riesz_verify)

    ct = groups.add_parser("control").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    sp = ct.add_parser("rotation")
    sp.add_argument("--alpha", default="golden")
    sp.add_argument("--beta", default="1/3")
    sp.add_argument("--h", type=int, default=1)
    sp.add_argument("--n-max", type=int, default=10 ** 6)
    sp.add_argument("--grid")
    sp.add_argument("--csv")
    common(sp)
    sp.set_defaults(func=cmd_control_rotation)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = list(argv) if argv is not None else None
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    inputs, outputs = {}, []
    try:
        extra = args.func(args, inputs, outputs) or {}
        _write_manifest(args, inputs, outputs, extra)
        return EXIT_OK
    except (CertificateFailure, IntegrityError, VerificationFailed) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DepthExceeded, Unsupported, EnvelopeTooLoose) as exc:
        print(f"limit reached: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (PreconditionError, CodeError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"bad input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BohrChaosError as exc:  # pragma: no cover - every subclass is mapped above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
