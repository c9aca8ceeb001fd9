"""Command-line entry point.

Subcommands
-----------
decompose   run one estimator on a snapshot file or a generated benchmark
experiment  run a Monte Carlo study described by a config file
gen         write a generated (optionally noisy) benchmark to a snapshot file
convert     convert a snapshot file between CSV and binary

Exit codes: 0 success, 2 invalid input or configuration, 3 an ADMM solver
stopped without meeting its tolerances (its history is still written).

Config files are flat ``key = value`` text; ``#`` starts a comment and
section prefixes group keys (``noise.variance``, ``admm.rho0``). Recognized
keys::

    study           scatter | consistency | trajectory
    system          linper | sine
    methods         comma list from exact, fbdmd, tlsdmd, cdmd, cdmd2
    n               comma list of sample counts
    r               reduced rank (default: 2 for linper, 4 for sine)
    trials          Monte Carlo trials per (method, n)
    full_trials     trials used instead when --full-n is given
    seed            seed of trial 0; trial t uses seed + t
    output.dir      output directory, relative to the config file
    noise.variance  noise variance
    noise.snr_db    target SNR in dB (overrides noise.variance)
    noise.model     independent | trajectory
    admm.<field>    any AdmmConfig field
    cdmd2.<field>   any Cdmd2Config field
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .admm import AdmmConfig, cdmd
from .admm2 import Cdmd2Config, cdmd2
from .dmd import pod_reduce
from .errors import DegenerateBatchError
from .harness import (
    METHODS,
    SolverSettings,
    confidence_ellipse,
    consistency_sweep,
    error_metric,
    make_system,
    monte_carlo,
    run_method,
    trajectory_study,
)
from .snapio import FORMATS, load_snapshots, save_snapshots
from .systems import NOISE_MODELS, NoiseSpec, add_noise, snr_db

log = logging.getLogger("cdmd")

EXIT_OK, EXIT_INVALID, EXIT_UNCONVERGED = 0, 2, 3
STUDIES = ("scatter", "consistency", "trajectory")
SYSTEMS = ("linper", "sine")
DEFAULT_RANK = {"linper": 2, "sine": 4}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    study: str = "scatter"
    system: str = "linper"
    methods: tuple = ("exact", "fbdmd", "tlsdmd", "cdmd")
    n: tuple = (32,)
    r: int | None = None
    trials: int = 500
    full_trials: int = 10_000
    seed: int = 0
    output_dir: str = "results"
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    cdmd2: Cdmd2Config = field(default_factory=Cdmd2Config)

    @property
    def rank(self):
        return self.r if self.r is not None else DEFAULT_RANK[self.system]

    @property
    def settings(self):
        return SolverSettings(admm=self.admm, cdmd2=self.cdmd2)

    def validate(self):
        if self.study not in STUDIES:
            raise ConfigError(f"study must be one of {STUDIES}, got {self.study!r}")
        if self.system not in SYSTEMS:
            raise ConfigError(f"system must be one of {SYSTEMS}, got {self.system!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {list(self.methods)}")
        if not self.n or any(k < 2 for k in self.n):
            raise ConfigError(f"every n must be >= 2, got {list(self.n)}")
        if self.rank < 1:
            raise ConfigError(f"r must be positive, got {self.rank}")
        if self.trials < 1 or self.full_trials < 1:
            raise ConfigError("trials and full_trials must be positive")
        if self.study == "scatter" and self.trials < 20:
            raise ConfigError("a scatter study needs at least 20 trials for its confidence ellipses")
        if self.study == "trajectory" and self.system != "linper":
            raise ConfigError("the trajectory study is defined for the linper system only")
        return self


def _as_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(cls, key, text):
    types = {f.name: f.type for f in fields(cls)}
    if key not in types:
        raise ConfigError(f"unknown key for {cls.__name__}: {key!r}")
    kind = types[key]
    if kind in (bool, "bool"):
        return _as_bool(text)
    if kind in (int, "int"):
        return int(text)
    if kind in (str, "str"):
        return text
    return float(text)


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def parse_config_text(text, base_dir=Path(".")):
    """Parse flat ``key = value`` config text into a validated ``RunConfig``."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    top, noise, admm, c2 = {}, {}, {}, {}
    try:
        for key, value in raw.items():
            if key.startswith("noise."):
                sub = key[6:]
                if sub == "variance":
                    noise["variance"] = float(value)
                elif sub == "snr_db":
                    noise["snr_db"] = float(value)
                elif sub == "model":
                    noise["model"] = value
                else:
                    raise ConfigError(f"unknown key {key!r}")
            elif key.startswith("admm."):
                admm[key[5:]] = _coerce(AdmmConfig, key[5:], value)
            elif key.startswith("cdmd2."):
                c2[key[6:]] = _coerce(Cdmd2Config, key[6:], value)
            elif key in ("study", "system"):
                top[key] = value
            elif key == "methods":
                top[key] = tuple(m.strip() for m in value.split(",") if m.strip())
            elif key == "n":
                top[key] = _ints(value)
            elif key in ("r", "trials", "full_trials", "seed"):
                top[key] = int(value)
            elif key == "output.dir":
                top["output_dir"] = str(base_dir / value)
            else:
                raise ConfigError(f"unknown key {key!r}")
        cfg = RunConfig(
            noise=NoiseSpec(**noise),
            admm=AdmmConfig(**admm),
            cdmd2=Cdmd2Config(**c2),
            **top,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), base_dir=path.parent)


def bundled_config(name):
    """Path of a config shipped with the package (e.g. ``"fig3_desk"``)."""
    return Path(__file__).parent / "configs" / f"{name.removesuffix('.cfg')}.cfg"


# ---------------------------------------------------------------- output


def _fmt(x):
    return repr(float(x))


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _config_record(cfg, trials):
    return {
        "study": cfg.study,
        "system": cfg.system,
        "methods": list(cfg.methods),
        "n": list(cfg.n),
        "r": cfg.rank,
        "trials": trials,
        "seedbase": cfg.seed,
        "trial_seeds": f"seedbase + t for t in 0..{trials - 1}",
        "noise": asdict(cfg.noise),
        "admm": asdict(cfg.admm),
        "cdmd2": asdict(cfg.cdmd2),
    }


# ----------------------------------------------------------- experiments


def _counter(total, enabled):
    if not enabled:
        return None
    done = [0]

    def tick(_):
        done[0] += 1
        if done[0] == total or done[0] % max(1, total // 10) == 0:
            print(f"  trial {done[0]}/{total}", file=sys.stderr)

    return tick


def _run_scatter(cfg, out, trials, threads, progress):
    summary = []
    for n in cfg.n:
        rows = []
        for method in cfg.methods:
            log.info("scatter: %s n=%d (%d trials)", method, n, trials)
            batch = monte_carlo(
                cfg.system, method, cfg.noise, trials, seedbase=cfg.seed, n=n, r=cfg.rank,
                settings=cfg.settings, threads=threads, on_trial=_counter(trials, progress),
            )
            rows += [(int(t), method, float(z.real), float(z.imag)) for t, z in zip(batch.trial_ids, batch.estimates)]
            entry = {
                "method": method,
                "n": n,
                "truth": batch.truth,
                "n_trials": batch.n_trials,
                "n_failed": batch.n_failed,
                "unconverged": batch.unconverged,
                "failures": {str(k): v for k, v in sorted(batch.failures.items())},
                "mean": complex(batch.estimates.mean()) if batch.estimates.size else None,
                "bias": float(abs(batch.estimates.mean() - batch.truth)) if batch.estimates.size else None,
            }
            try:
                ell = confidence_ellipse(batch)
                entry["ellipse"] = {
                    "center": ell.center,
                    "r_major": ell.r_major,
                    "r_min": ell.r_min,
                    "orientation": ell.orientation,
                    "coverage": ell.coverage,
                    "n_selected": ell.n_selected,
                }
                entry["error_metric"] = error_metric(batch)
            except (DegenerateBatchError, ValueError) as exc:
                entry["ellipse"] = None
                entry["error_metric"] = None
                entry["ellipse_error"] = str(exc)
            summary.append(entry)
        _write_csv(out / f"estimates_n{n}.csv", ("trial", "method", "re", "im"), rows)
    _write_json(out / "summary.json", {"batches": summary})
    return ["summary.json"] + [f"estimates_n{n}.csv" for n in cfg.n]


def _run_consistency(cfg, out, trials, threads, progress):
    rows = consistency_sweep(
        cfg.system, cfg.methods, cfg.n, cfg.noise, trials, seedbase=cfg.seed,
        settings=cfg.settings, threads=threads,
    )
    _write_csv(out / "sweep.csv", ("method", "n", "sigma2", "value"),
               [(r["method"], r["n"], float(r["sigma2"]), float(r["value"])) for r in rows])
    _write_json(out / "summary.json", {"rows": rows})
    return ["summary.json", "sweep.csv"]


def _run_trajectory(cfg, out, trials, threads, progress):
    rows, summary = [], []
    for n in cfg.n:
        for method in cfg.methods:
            errs = trajectory_study(method, cfg.noise, trials, n=n, seedbase=cfg.seed,
                                    settings=cfg.settings, threads=threads)
            rows += [(t, method, n, float(e)) for t, e in enumerate(errs)]
            ok = errs[np.isfinite(errs)]
            summary.append({
                "method": method,
                "n": n,
                "median": float(np.median(ok)) if ok.size else None,
                "mean": float(np.mean(ok)) if ok.size else None,
                "n_failed": int(errs.size - ok.size),
            })
    _write_csv(out / "trajectory.csv", ("trial", "method", "n", "value"), rows)
    _write_json(out / "summary.json", {"rows": summary})
    return ["summary.json", "trajectory.csv"]


def run_experiment(cfg, out=None, threads=1, full=False, progress=False):
    """Run the study described by ``cfg`` and write its artifacts under ``out``."""
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    trials = cfg.full_trials if full else cfg.trials
    runner = {"scatter": _run_scatter, "consistency": _run_consistency, "trajectory": _run_trajectory}[cfg.study]
    files = runner(cfg, out, trials, threads, progress)
    _, clean, _, _ = make_system(cfg.system, cfg.n[0])
    manifest = _config_record(cfg, trials)
    manifest["outputs"] = sorted(files)
    manifest["version"] = __version__
    if cfg.noise.snr_db is None and cfg.noise.variance > 0:
        manifest["snr_db_at_first_n"] = float(snr_db(clean, cfg.noise.variance))
    _write_json(out / "manifest.json", manifest)
    return out


# ------------------------------------------------------------- decompose


def _solver_overrides(args):
    admm = {k: v for k, v in (("rho0", args.rho0), ("max_iters", args.max_iters),
                              ("eps_abs", args.eps_abs), ("eps_rel", args.eps_rel)) if v is not None}
    c2 = dict(admm)
    for k in ("nu", "mu_reg"):
        if getattr(args, k) is not None:
            c2[k] = getattr(args, k)
    if args.no_adapt_rho:
        admm["adapt_rho"] = c2["adapt_rho"] = False
    return AdmmConfig(**admm), Cdmd2Config(**c2)


def _input_data(args):
    if args.input is not None:
        data = load_snapshots(args.input, args.format)
    else:
        if args.system is None:
            raise ConfigError("give either --input or --system")
        _, data, _, _ = make_system(args.system, args.n)
    if args.noise_variance or args.snr_db is not None:
        data = add_noise(data, NoiseSpec(variance=args.noise_variance or 0.0, seed=args.seed,
                                         snr_db=args.snr_db, model=args.noise_model))
    return data


def cmd_decompose(args):
    admm_cfg, c2_cfg = _solver_overrides(args)
    data = _input_data(args)
    r = args.r if args.r is not None else DEFAULT_RANK.get(args.system, None)
    if r is None:
        raise ConfigError("--r is required with --input")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rd = pod_reduce(data, r)
    history = None
    if args.method == "cdmd":
        res, _, history = cdmd(rd, admm_cfg)
    elif args.method == "cdmd2":
        res, history = cdmd2(rd, c2_cfg)
    else:
        res, _ = run_method(args.method, data, r, rd=rd)

    _write_csv(
        out / "eigenvalues.csv",
        ("index", "re_discrete", "im_discrete", "re", "im"),
        [(j, float(d.real), float(d.imag), float(c.real), float(c.imag))
         for j, (d, c) in enumerate(zip(res.eigs_discrete, res.eigs_continuous))],
    )
    _write_json(out / "result.json", {
        "method": res.method_tag,
        "r": rd.rank,
        "dt": rd.dt,
        "A": res.A,
        "backward": res.backward,
        "eigs_discrete": list(res.eigs_discrete),
        "eigs_continuous": list(res.eigs_continuous),
        "modes_re": res.modes.real,
        "modes_im": res.modes.imag,
        "converged": res.converged,
        "iterations": res.iterations,
    })
    if history is not None:
        _write_csv(out / "history.csv",
                   ("iter", "primal", "dual", "objective", "eps_pri", "eps_dual", "rho"),
                   [(h.iter, h.primal, h.dual, h.objective, h.eps_pri, h.eps_dual, h.rho) for h in history])
    if not res.converged:
        print(f"error: {args.method} did not converge in {res.iterations} iterations; history written",
              file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def cmd_experiment(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = replace(cfg, **overrides).validate()
    out = run_experiment(cfg, args.out, threads=args.threads, full=args.full_n, progress=args.progress)
    print(out)
    return EXIT_OK


def cmd_gen(args):
    spec, data, _, _ = make_system(args.system, args.n)
    if args.noise_variance or args.snr_db is not None:
        data = add_noise(data, NoiseSpec(variance=args.noise_variance or 0.0, seed=args.seed,
                                         snr_db=args.snr_db, model=args.noise_model))
    save_snapshots(data, args.output, args.format)
    return EXIT_OK


def cmd_convert(args):
    data = load_snapshots(args.input, args.from_format)
    save_snapshots(data, args.output, args.to_format)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _add_generator_flags(p, required):
    p.add_argument("--system", choices=SYSTEMS, required=required, help="benchmark system to generate")
    p.add_argument("--n", type=_positive_int, default=32, help="number of snapshot pairs (default 32)")
    p.add_argument("--noise-variance", type=float, default=0.0, help="Gaussian noise variance (default 0)")
    p.add_argument("--snr-db", type=float, default=None, help="set the noise level by SNR in dB instead")
    p.add_argument("--noise-model", choices=NOISE_MODELS, default="independent",
                   help="independent noise on X and Y, or one noisy trajectory")
    p.add_argument("--seed", type=int, default=0, help="noise seed (default 0)")


def build_parser():
    parser = argparse.ArgumentParser(prog="cdmd", description="Consistent DMD toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="run one estimator and write its spectrum")
    p.add_argument("--input", help="snapshot file (.csv or .bin); alternative to --system")
    p.add_argument("--format", choices=FORMATS, help="input format (default: from suffix)")
    _add_generator_flags(p, required=False)
    p.add_argument("--method", choices=METHODS, default="cdmd", help="estimator (default cdmd)")
    p.add_argument("--r", type=_positive_int, help="reduced rank (default 2 for linper, 4 for sine)")
    p.add_argument("--rho0", type=float, help="initial ADMM penalty")
    p.add_argument("--max-iters", type=_positive_int, help="ADMM iteration cap")
    p.add_argument("--eps-abs", type=float, help="absolute stopping tolerance")
    p.add_argument("--eps-rel", type=float, help="relative stopping tolerance")
    p.add_argument("--nu", type=float, help="CDMD2 weight on |C - I|^2")
    p.add_argument("--mu-reg", type=float, help="CDMD2 weight on the A'' and B'' regularizers")
    p.add_argument("--no-adapt-rho", action="store_true", help="keep rho fixed at rho0")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("experiment", help="run a Monte Carlo study from a config file")
    p.add_argument("config", help="config file path, or the name of a bundled config (fig3_desk, fig2_desk)")
    p.add_argument("--out", help="output directory (default: output.dir from the config)")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads for trials (default 1)")
    p.add_argument("--trials", type=_positive_int, help="override the trial count")
    p.add_argument("--seed", type=int, help="override the seed base")
    p.add_argument("--full-n", action="store_true", help="use full_trials (10^4 by default) instead of trials")
    p.add_argument("--progress", action="store_true", help="print a per-trial counter to stderr")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("gen", help="write a generated benchmark to a snapshot file")
    _add_generator_flags(p, required=True)
    p.add_argument("--format", choices=FORMATS, help="output format (default: from suffix)")
    p.add_argument("output", help="output file (.csv or .bin)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("convert", help="convert a snapshot file between CSV and binary")
    p.add_argument("input", help="input file")
    p.add_argument("output", help="output file")
    p.add_argument("--from-format", choices=FORMATS, help="input format (default: from suffix)")
    p.add_argument("--to-format", choices=FORMATS, help="output format (default: from suffix)")
    p.set_defaults(func=cmd_convert)
    return parser


def _resolve_config_arg(args):
    if getattr(args, "config", None) is None:
        return
    path = Path(args.config)
    if not path.exists() and bundled_config(args.config).is_file():
        args.config = str(bundled_config(args.config))


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    _resolve_config_arg(args)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ValueError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
