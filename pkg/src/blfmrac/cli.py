"""Command-line entry points.

Exit status: 0 on pass, 2 when the model is infeasible or a run violates a
constraint or monitor, 1 on any other error.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import BACKEND, __version__
from .csvio import write_trajectory_csv
from .diagnostics import TERMS, gradcheck
from .errors import BLFMRACError
from .feasibility import SWEEP_AXES, region_sweep
from .plotting import feasibility_heatmap, line_plot
from .scenario import PRESETS, load_preset, load_scenario
from .simulation import simulate

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(path, payload):
    path.write_text(json.dumps(payload, indent=2, default=_json_default, allow_nan=True) + "\n",
                    encoding="utf-8")


def _scenario(args):
    sc = load_scenario(args.scenario) if args.scenario else load_preset(args.preset)
    overrides = {}
    if getattr(args, "dt", None) is not None:
        overrides["integrator.dt"] = args.dt
    if getattr(args, "horizon", None) is not None:
        overrides["integrator.horizon"] = args.horizon
    if getattr(args, "seed", None) is not None:
        overrides["run.seed"] = args.seed
    if getattr(args, "controller", None) is not None:
        overrides["run.controller"] = args.controller
    return sc.with_values(**overrides) if overrides else sc


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _norm_plots(traj, spec, out, prefix=""):
    paths = []
    panels = [
        ("norm_x", "||x||", spec.x_bar, "x_bar"),
        ("norm_u", "||u||", spec.u1_bar, "u1_bar"),
        ("norm_udot", "||u'||", spec.u2_bar, "u2_bar"),
        ("norm_ed", "||e_d||", spec.ed_bar, "e_d bound"),
    ]
    for key, label, bound, blabel in panels:
        hl = [] if bound is None else [(bound, blabel)]
        svg = line_plot([(traj.t, traj.derived[key], label)], title=f"{label} vs time",
                        ylabel=label, hlines=hl)
        path = out / f"{prefix}{key}.svg"
        path.write_text(svg, encoding="utf-8")
        paths.append(str(path))
    return paths


def _run(models, kind, sc):
    loop = models.closed_loop(kind)
    return simulate(loop, initial=models.initial, horizon=sc.horizon, dt=sc.dt,
                    decimation=sc.decimation, dt_min=sc.get("integrator.dt_min"))


def _report_lines(kind, rep):
    yield f"[{kind}] max ||x|| {rep.max_norm_x:.6g}  ||u|| {rep.max_norm_u:.6g}  " \
          f"||u'|| {rep.max_norm_udot:.6g}  ||e_d|| {rep.max_norm_ed:.6g}"
    for key, ok in rep.verdicts.items():
        extra = "" if ok else f" (first violation at sample {rep.first_violation[key]})"
        yield f"[{kind}] constraint {key:<6s} {'pass' if ok else 'FAIL'}{extra}"
    if rep.vtheta_ok is not None:
        yield f"[{kind}] V_theta non-increasing {'pass' if rep.vtheta_ok else 'FAIL'} " \
              f"(max step increase {rep.vtheta_max_increase:.3g})"
        yield f"[{kind}] V_phi bound {'pass' if rep.vphi_ok else 'FAIL'} " \
              f"(max {rep.vphi_max:.6g} < {rep.vphi_bound:.6g})"
        yield f"[{kind}] ||Khat_x|| bound {'pass' if rep.khat_ok else 'FAIL'} " \
              f"(max {rep.khat_max_norm:.6g})"


def cmd_check(args):
    sc = _scenario(args)
    models = sc.build()
    rep = models.feasibility
    print(rep.summary())
    out = _outdir(args)
    (out / "feasibility.json").write_text(rep.to_json() + "\n", encoding="utf-8")
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_simulate(args):
    sc = _scenario(args)
    models = sc.build()
    out = _outdir(args)
    (out / "feasibility.json").write_text(models.feasibility.to_json() + "\n", encoding="utf-8")
    if not models.feasibility.ok and not args.force:
        print(models.feasibility.summary())
        print("infeasible scenario; pass --force to simulate anyway")
        return EXIT_FAIL
    t0 = time.perf_counter()
    traj, rep = _run(models, sc.controller, sc)
    elapsed = time.perf_counter() - t0
    write_trajectory_csv(traj, out / "trajectory.csv")
    _write_json(out / "monitors.json", rep.to_dict())
    _norm_plots(traj, models.spec, out)
    for line in _report_lines(sc.controller, rep):
        print(line)
    print(f"{len(traj)} samples in {elapsed:.2f} s ({BACKEND} backend); artifacts in {out}")
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_compare(args):
    sc = _scenario(args)
    models = sc.build()
    out = _outdir(args)
    (out / "feasibility.json").write_text(models.feasibility.to_json() + "\n", encoding="utf-8")
    if not models.feasibility.ok and not args.force:
        print(models.feasibility.summary())
        print("infeasible scenario; pass --force to simulate anyway")
        return EXIT_FAIL
    runs = {}
    for label, kind in (("proposed", "proposed"), ("baseline", args.baseline)):
        traj, rep = _run(models, kind, sc)
        write_trajectory_csv(traj, out / f"trajectory_{label}.csv")
        _write_json(out / f"monitors_{label}.json", rep.to_dict())
        runs[label] = (traj, rep)
        for line in _report_lines(f"{label}:{kind}", rep):
            print(line)
    spec = models.spec
    for key, label, bound, blabel in (("norm_x", "||x||", spec.x_bar, "x_bar"),
                                      ("norm_u", "||u||", spec.u1_bar, "u1_bar"),
                                      ("norm_udot", "||u'||", spec.u2_bar, "u2_bar")):
        series = [(traj.t, traj.derived[key], name) for name, (traj, _) in runs.items()]
        svg = line_plot(series, title=f"{label}: proposed vs baseline", ylabel=label,
                        hlines=[(bound, blabel)])
        (out / f"compare_{key}.svg").write_text(svg, encoding="utf-8")
    return EXIT_OK if runs["proposed"][1].ok else EXIT_FAIL


def _grid(text, name):
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name} must look like lo:hi:count") from None
    if count < 1 or not hi >= lo:
        raise argparse.ArgumentTypeError(f"{name}: need count >= 1 and hi >= lo")
    return np.linspace(lo, hi, count)


def cmd_sweep(args):
    sc = _scenario(args)
    models = sc.build()
    axes = tuple(a.strip() for a in args.axes.split(","))
    fmap = region_sweep(models.feasibility_inputs, _grid(args.range0, "--range0"),
                        _grid(args.range1, "--range1"), axes=axes)
    out = _outdir(args)
    (out / "feasibility_map.csv").write_text(fmap.to_text(), encoding="utf-8")
    (out / "feasibility_map.svg").write_text(feasibility_heatmap(fmap), encoding="utf-8")
    frac = float(np.mean(fmap.cells))
    print(f"swept {fmap.cells.size} cells over {axes}; feasible fraction {frac:.3f}")
    return EXIT_OK


def cmd_gradcheck(args):
    seed = 0 if args.seed is None else args.seed
    rep = gradcheck(seed=seed, n_points=args.points, inject=args.inject)
    for line in rep.lines():
        print(line)
    if not rep.ok:
        print("gradcheck failed: " + ", ".join(rep.failures))
        return EXIT_FAIL
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # usage errors share the generic error status so 2 keeps its meaning
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(
        prog="blfmrac",
        description="Barrier-Lyapunov MRAC with state, input and input-rate limits.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sim=True):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--scenario", help="scenario file")
        src.add_argument("--preset", default="paper-s4", choices=sorted(PRESETS),
                         help="embedded scenario (default: %(default)s)")
        p.add_argument("--out", default="out", help="output directory (default: %(default)s)")
        p.add_argument("--seed", type=int, help="override run.seed")
        if sim:
            p.add_argument("--dt", type=float, help="override integrator.dt")
            p.add_argument("--horizon", type=float, help="override integrator.horizon")
            p.add_argument("--force", action="store_true", help="simulate even if infeasible")
            p.add_argument("--controller", choices=("proposed", "robust-mrac"),
                           help="override run.controller")

    p = sub.add_parser("check", help="evaluate feasibility conditions")
    common(p, sim=False)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="run the closed loop and check monitors")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run proposed and baseline controllers side by side")
    common(p)
    p.add_argument("--baseline", default="robust-mrac", choices=("proposed", "robust-mrac"),
                   help="controller for the comparison run (default: %(default)s)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="feasibility map over two parameters")
    common(p, sim=False)
    p.add_argument("--axes", default="u1_bar,x_bar",
                   help=f"two of {', '.join(SWEEP_AXES)} (default: %(default)s)")
    p.add_argument("--range0", default="0.05:3:60", help="lo:hi:count for the first axis")
    p.add_argument("--range1", default="0.5:20:60", help="lo:hi:count for the second axis")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference checks of the barrier gradients")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--points", type=int, default=100, help="random points (default: %(default)s)")
    p.add_argument("--inject", choices=TERMS, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (BLFMRACError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
