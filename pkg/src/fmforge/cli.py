"""``fmforge`` command-line interface.

Every subcommand reads one JSON config (frequencies in ``freq_unit``,
default kHz x 2 pi), writes its outputs atomically and drops a
``<out>.manifest.json`` next to the main output. Ion numbers on the command
line and in configs are 1-based.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""
import argparse
import logging
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import evaluation, io
from .modes import ModeError, TrapConfig, custom_modes, transverse_modes
from .objectives import CalibrationError, FidelityConfig
from .optimizer import OptimizationError, initial_guess, make_pulse, multi_trial, optimize

log = logging.getLogger("fmforge")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _section(config, name):
    sec = config.get(name, {})
    if not isinstance(sec, dict):
        raise io.ConfigError(f"{name}: expected a JSON object")
    return sec


class Context:
    """Parsed config plus command-line overrides."""

    def __init__(self, args):
        self.args = args
        self.config = io.load_config(args.config)
        self.scale = io.freq_scale(self.config)
        self.seed = int(args.seed if getattr(args, "seed", None) is not None
                        else self.config.get("seed", 0))
        self.inputs = {"config": os.path.abspath(args.config)}
        self.t0 = time.perf_counter()

    def freq(self, section, key, default):
        value = _section(self.config, section).get(key)
        return default if value is None else float(value) * self.scale

    def trap(self, n_ions=None):
        sec = dict(_section(self.config, "trap"))
        if n_ions is not None:
            sec["n_ions"] = n_ions
            # per-N default axial frequency unless the config pins one
            sec.setdefault("axial_freq", None)
        if "n_ions" not in sec:
            raise io.ConfigError("trap: missing required field 'n_ions'")
        return io.trap_from_dict(sec, self.scale)

    def modes(self):
        path = getattr(self.args, "modes", None)
        if path:
            self.inputs["modes"] = os.path.abspath(path)
            return io.load_modes(path)
        custom = self.config.get("modes")
        if custom is not None:
            freqs = np.asarray(io._require(custom, "mode_freqs", "modes"), float) * self.scale
            return custom_modes(freqs, io._require(custom, "lamb_dicke", "modes"))
        return transverse_modes(self.trap())

    def pair(self, n_ions):
        text = getattr(self.args, "pair", None)
        if text is None:
            cfg = self.config.get("pair", [1, 2])
            text = ",".join(str(v) for v in cfg)
        return io.parse_pair(text, n_ions)

    def spec(self, **overrides):
        sec = dict(_section(self.config, "optimizer"))
        sec.setdefault("seed", self.seed)
        if getattr(self.args, "seed", None) is not None:
            sec["seed"] = self.seed
        threads = getattr(self.args, "threads", None)
        sec["threads"] = threads if threads is not None else sec.get("threads", os.cpu_count() or 1)
        spec = io.spec_from_dict(sec, self.scale)
        return replace(spec, **overrides) if overrides else spec

    def pulse(self):
        path = self.args.pulse
        self.inputs["pulse"] = os.path.abspath(path)
        return io.load_pulse(path)

    def fcfg(self):
        return FidelityConfig(_section(self.config, "evaluation").get("nbar", 0.5))

    def test_size(self):
        return int(_section(self.config, "evaluation").get("test_size",
                                                           evaluation.DEFAULT_TEST_SIZE))

    def finish(self, outputs, seeds=None, extra_timings=None, summary=None):
        timings = {"total_s": time.perf_counter() - self.t0, **(extra_timings or {})}
        manifest = io.RunManifest(self.args.command, io.config_hash(self.config),
                                  seeds or {"master": self.seed}, self.inputs,
                                  {k: os.path.abspath(v) for k, v in outputs.items()}, timings,
                                  summary or {})
        manifest.write(io.manifest_path(next(iter(outputs.values()))))


def cmd_modes(ctx):
    modes = ctx.modes()
    io.save_modes(ctx.args.out, modes)
    ctx.finish({"modes": ctx.args.out})


def cmd_optimize(ctx):
    modes = ctx.modes()
    pair = ctx.pair(modes.n_ions)
    spec = ctx.spec()
    if spec.iterations == 0:
        x0 = initial_guess(spec, modes, 0)
        run = optimize(spec, modes, pair, initial=x0)
    elif spec.trials > 1:
        run = multi_trial(spec, modes, pair)
    else:
        run = optimize(spec, modes, pair)
    io.save_pulse(ctx.args.out, run.selected)
    outputs = {"pulse": ctx.args.out}
    if ctx.args.curve:
        io.write_curve_jsonl(ctx.args.curve, run.learning_curve)
        outputs["curve"] = ctx.args.curve
    summary = {
        "cv_scores": [r.cv_score for r in run.trial_results],
        "trial_errors": [r.error for r in run.trial_results],
        "omega_rad_s": run.selected.omega,
    }
    log.info("selected pulse: omega/2pi = %.3f kHz", run.selected.omega / io.TWO_PI / 1e3)
    ctx.finish(outputs, run.seeds, {"optimizer": run.wall_times}, summary)


def cmd_evaluate(ctx):
    modes = ctx.modes()
    pair = ctx.pair(modes.n_ions)
    pulse = ctx.pulse()
    uncertainty = ctx.freq("evaluation", "uncertainty", ctx.spec().uncertainty)
    mean, std, _ = evaluation.test_fidelity(pulse, modes, pair, uncertainty, ctx.test_size(),
                                            ctx.fcfg(), ctx.seed)
    report = {
        "schema_version": io.SCHEMA_VERSION,
        "uncertainty_rad_s": uncertainty,
        "test_size": ctx.test_size(),
        "mean_fidelity": mean,
        "std_fidelity": std,
        "mean_error": 1 - mean,
        "dephasing_metric": evaluation.dephasing_metric(pulse, modes, pair, uncertainty,
                                                        ctx.test_size(), ctx.seed),
        "omega_rad_s": pulse.omega,
    }
    io.write_json(ctx.args.out, report)
    ctx.finish({"report": ctx.args.out}, {"master": ctx.seed, "test": [ctx.seed, "test"]})


def cmd_landscape(ctx):
    modes = ctx.modes()
    pair = ctx.pair(modes.n_ions)
    pulse = ctx.pulse()
    sec = _section(ctx.config, "landscape")
    span = ctx.freq("landscape", "span", evaluation.LANDSCAPE_SPAN)
    points = int(sec.get("points", evaluation.LANDSCAPE_POINTS))
    threshold = float(sec.get("threshold", evaluation.DEFAULT_THRESHOLD))
    land = evaluation.error_landscape(pulse, modes, pair, span, points, ctx.fcfg(), threshold)
    io.write_landscape_csv(ctx.args.out, land)
    summary = os.path.splitext(ctx.args.out)[0] + ".summary.json"
    io.write_json(summary, {"schema_version": io.SCHEMA_VERSION, "threshold": threshold,
                            "area_rad2_s2": land.area, "cell_area_rad2_s2": land.cell_area,
                            "points": points, "span_rad_s": span})
    ctx.finish({"landscape": ctx.args.out, "summary": summary})


def cmd_sequence(ctx):
    modes = ctx.modes()
    pair = ctx.pair(modes.n_ions)
    pulse = ctx.pulse()
    sec = _section(ctx.config, "sequence")
    lo = ctx.freq("sequence", "detuning_min", -io.TWO_PI * 2e3)
    hi = ctx.freq("sequence", "detuning_max", io.TWO_PI * 2e3)
    det = np.linspace(lo, hi, int(sec.get("points", 41)))
    pops = evaluation.sequence_populations(pulse, modes, pair, int(sec.get("n_gates", 5)), det,
                                           sec.get("nbar", 0.5))
    rows = np.column_stack([pops.detuning, pops.p00, pops.p11, pops.p_odd, pops.parity_contrast])
    io.write_table_csv(ctx.args.out,
                       ["detuning_rad_s", "p00", "p11", "p_odd", "parity_contrast"], rows)
    ctx.finish({"populations": ctx.args.out})


def cmd_sweep(ctx):
    sec = _section(ctx.config, "sweep")
    n_list = [int(n) for n in sec.get("n_ions", [2, 4, 6, 8, 10, 12])]
    overrides = {"duration": float(sec.get("duration_s", 400e-6)), "n_segments": None}
    if sec.get("uncertainty") is not None:
        overrides["uncertainty"] = float(sec["uncertainty"]) * ctx.scale
    spec = ctx.spec(**overrides)
    report = evaluation.scalability_sweep(spec, n_list, lambda n: transverse_modes(ctx.trap(n)),
                                          test_size=ctx.test_size(), fcfg=ctx.fcfg())
    entries = [{**e, "pair": [p + 1 for p in e["pair"]]} for e in report.entries]
    summary = {str(k): v for k, v in report.summary().items()}
    io.write_json(ctx.args.out, {"schema_version": io.SCHEMA_VERSION, "entries": entries,
                                 "summary": summary})
    ctx.finish({"sweep": ctx.args.out})


def cmd_batch_study(ctx):
    modes = ctx.modes()
    pair = ctx.pair(modes.n_ions)
    sec = _section(ctx.config, "batch_study")
    sizes = [int(b) for b in sec.get("sizes", [1, 10, 100])]
    results = evaluation.batch_size_study(ctx.spec(), modes, pair, sizes,
                                          int(sec.get("eval_budget", 15000)), ctx.test_size(),
                                          ctx.fcfg())
    out = [{k: v for k, v in r.items() if k != "pulse"} for r in results]
    io.write_json(ctx.args.out, {"schema_version": io.SCHEMA_VERSION, "results": out})
    ctx.finish({"study": ctx.args.out})


COMMANDS = {
    "modes": cmd_modes,
    "optimize": cmd_optimize,
    "evaluate": cmd_evaluate,
    "landscape": cmd_landscape,
    "sweep": cmd_sweep,
    "sequence": cmd_sequence,
    "batch-study": cmd_batch_study,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="fmforge",
                                     description="Robust frequency-modulated MS gate design.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, pulse=False, pair=True, out_default=None):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=out_default, required=out_default is None)
        p.add_argument("--seed", type=int, help="override the config's master seed")
        p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        if pair:
            p.add_argument("--modes", help="modes JSON from 'fmforge modes'")
            p.add_argument("--pair", help="1-based ion pair, e.g. 1,2")
        if pulse:
            p.add_argument("--pulse", required=True, help="pulse JSON from 'fmforge optimize'")
        return p

    add("modes", "compute transverse modes", pair=False, out_default="modes.json")
    add("optimize", "optimise a gate pulse").add_argument("--curve", help="JSONL learning curve")
    add("evaluate", "test-set fidelity and dephasing metric", pulse=True)
    add("landscape", "2-D error landscape over the first two mode offsets", pulse=True)
    add("sequence", "populations after a repeated-gate sequence", pulse=True)
    add("sweep", "scalability sweep over chain lengths", pair=False)
    add("batch-study", "b-robust runs at a fixed evaluation budget")
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are configuration errors here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("fmforge: error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        ctx = Context(args)
        COMMANDS[args.command](ctx)
    except (CalibrationError, OptimizationError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"fmforge: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (io.ConfigError, ModeError, ValueError, TypeError) as exc:
        print(f"fmforge: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
