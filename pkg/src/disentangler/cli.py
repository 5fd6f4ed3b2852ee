"""Command-line entry point.

Subcommands: baseline, train, eval, sweep, fit, plot.  Values resolve as
flags > ``--config`` file > built-in defaults, and the resolved
configuration is written to ``config.ini`` next to the outputs.  Exit codes:
0 success, 1 invalid input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .env import CIRCUIT_MODES, ORIENTATIONS, EnvConfig, layer_weights
from .experiments import (
    DEFAULT_GRID, FULL_GRID, FillFinalColumnActor, RandomActor, emit_results, entanglement_growth,
    evaluate_policy, read_growth_csv, read_results, sweep, write_growth_csv,
)
from .fitting import FitError, linear_fit, tanh_fit
from .plotting import Series, emit_plot
from .ppo import METRICS_HEADER, TrainConfig, load_model, save_model, train

log = logging.getLogger("disentangler")

OUT_ROOT_ENV = "DISENTANGLER_OUT_ROOT"

# flag dest -> (section, config key)
ENV_FLAGS = {
    "n": "n", "depth": "d", "alpha": "alpha", "p_r": "p_r", "max_steps": "max_steps",
    "orientation": "penalty_orientation", "circuit_mode": "circuit_mode",
}
TRAIN_FLAGS = {
    "timesteps": "t_s", "lr": "l_r", "ent_coef": "e_c", "clip_eps": "clip_eps", "gamma": "discount",
    "gae_lambda": "gae_lambda", "n_steps": "n_steps", "batch_size": "minibatch_size", "epochs": "n_epochs",
    "vf_coef": "value_coef", "max_grad_norm": "max_grad_norm", "n_envs": "n_envs", "hidden": "hidden",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _float_list(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _add_env_flags(p, multi: bool = False):
    g = p.add_argument_group("environment")
    if multi:
        g.add_argument("--n", type=_int_list, help="qubit counts, comma separated")
        g.add_argument("--depth", type=_int_list, help="unitary depths D (even), comma separated")
        g.add_argument("--layers", type=_int_list, help="measurement layers D/2, comma separated")
        g.add_argument("--alpha", type=_float_list, help="penalty slopes, comma separated")
    else:
        g.add_argument("--n", type=int, help="qubit count N")
        g.add_argument("--depth", type=int, help="unitary depth D (even)")
        g.add_argument("--alpha", type=float, help="penalty slope")
    g.add_argument("--p-r", dest="p_r", type=float, help="terminal reward scale")
    g.add_argument("--max-steps", type=int, help="episode step limit (default 2*N*D/2)")
    g.add_argument("--orientation", choices=ORIENTATIONS)
    g.add_argument("--circuit-mode", choices=CIRCUIT_MODES)


def _add_train_flags(p):
    g = p.add_argument_group("training")
    g.add_argument("--timesteps", type=int, help="total environment steps t_s")
    g.add_argument("--lr", type=float, help="learning rate")
    g.add_argument("--ent-coef", type=float, help="entropy coefficient")
    g.add_argument("--clip-eps", type=float)
    g.add_argument("--gamma", type=float, help="discount factor")
    g.add_argument("--gae-lambda", type=float)
    g.add_argument("--n-steps", type=int, help="rollout length per environment")
    g.add_argument("--batch-size", type=int, help="minibatch size")
    g.add_argument("--epochs", type=int)
    g.add_argument("--vf-coef", type=float)
    g.add_argument("--max-grad-norm", type=float)
    g.add_argument("--n-envs", type=int)
    g.add_argument("--hidden", type=_int_list, help="hidden layer widths, comma separated")


def _add_common(p):
    p.add_argument("--config", type=Path, help="INI file with [env], [train], [sweep] sections")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ROOT_ENV}/<subcommand>)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="disentangler", description="Reinforcement-learned disentanglers for random Clifford circuits")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("baseline", help="entanglement growth without measurements")
    _add_common(p)
    p.add_argument("--n", type=_int_list, help="qubit counts, comma separated")
    p.add_argument("--max-depth", type=int)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("train", help="train a PPO disentangler")
    _add_common(p)
    _add_env_flags(p)
    _add_train_flags(p)

    p = sub.add_parser("eval", help="evaluate a trained model or baseline actor")
    _add_common(p)
    _add_env_flags(p)
    p.add_argument("--model", type=Path, help="model file written by train")
    p.add_argument("--actor", choices=("policy", "random", "final-column"), default="policy")
    p.add_argument("--episodes", type=int)

    p = sub.add_parser("sweep", help="train and evaluate over an (N, D, alpha) grid")
    _add_common(p)
    _add_env_flags(p, multi=True)
    _add_train_flags(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--jobs", type=int, help="parallel grid points (1 = serial)")
    p.add_argument("--full-grid", action="store_true", help="N=3..11, D/2=2..11, t_s=2e5")

    p = sub.add_parser("fit", help="linear or tanh fit of a results column")
    _add_common(p)
    p.add_argument("--kind", choices=("linear", "tanh"), required=True)
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--x", default="n", help="x column (n, d, layers, alpha)")
    p.add_argument("--y", default="mean_measurements")
    p.add_argument("--where", action="append", default=[], help="filter like n=6 (repeatable)")

    p = sub.add_parser("plot", help="render SVG figures")
    _add_common(p)
    p.add_argument("what", choices=("weights", "growth", "results", "metrics"))
    p.add_argument("--in", dest="infile", type=Path)
    p.add_argument("--alpha", type=_float_list, help="weights: penalty slopes")
    p.add_argument("--layers", type=int, help="weights: number of measurement layers")
    p.add_argument("--orientation", choices=ORIENTATIONS)
    p.add_argument("--x", default="n")
    p.add_argument("--y", default="mean_measurements")
    p.add_argument("--fit", choices=("linear", "tanh"))
    p.add_argument("--where", action="append", default=[])
    return parser


# --- configuration --------------------------------------------------------------

def _read_config(path: Path | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        if not path.is_file():
            raise UsageError(f"config file {path} not found")
        cp.read(path)
    return cp


def _coerce(kind, raw: str):
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    if kind is tuple:
        return tuple(int(v) for v in raw.replace("(", "").replace(")", "").split(",") if v.strip())
    return kind(raw)


def _field_types(cls) -> dict:
    types = {}
    for f in fields(cls):
        t = str(f.type)
        types[f.name] = int if t.startswith("int") else float if t.startswith("float") else \
            tuple if t.startswith("tuple") else str
    return types


def _section(cp, name, cls) -> dict:
    if not cp.has_section(name):
        return {}
    types = _field_types(cls)
    out = {}
    for k, v in cp.items(name):
        if k not in types:
            raise UsageError(f"unknown key {k!r} in [{name}]")
        try:
            out[k] = _coerce(types[k], v)
        except ValueError:
            raise UsageError(f"bad value {v!r} for {name}.{k}") from None
    return out


def resolve_env(args, cp, base: dict | None = None, **overrides) -> EnvConfig:
    """``base`` sits under the config file (e.g. values stored with a model)."""
    vals = dict(base or {})
    vals.update(_section(cp, "env", EnvConfig))
    for dest, key in ENV_FLAGS.items():
        v = getattr(args, dest, None)
        if v is not None and not isinstance(v, list):
            vals[key] = v
    vals.update(overrides)
    if getattr(args, "seed", None) is not None:
        vals["seed"] = args.seed
    return EnvConfig(**vals)


def resolve_train(args, cp, **overrides) -> TrainConfig:
    vals = _section(cp, "train", TrainConfig)
    for dest, key in TRAIN_FLAGS.items():
        v = getattr(args, dest, None)
        if v is not None:
            vals[key] = tuple(v) if key == "hidden" else v
    vals.update(overrides)
    if getattr(args, "seed", None) is not None:
        vals["seed"] = args.seed
    return TrainConfig(**vals)


def _out_dir(args) -> Path:
    out = args.out or Path(os.environ.get(OUT_ROOT_ENV, "runs")) / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config(out: Path, command: str, filename: str = "config.ini", **sections) -> None:
    cp = configparser.ConfigParser(interpolation=None)
    cp["run"] = {"command": command}
    for name, vals in sections.items():
        cp[name] = {k: ",".join(map(str, v)) if isinstance(v, (list, tuple)) else str(v) for k, v in vals.items()}
    with open(out / filename, "w") as fh:
        cp.write(fh)


def _filters(exprs) -> dict:
    out = {}
    for e in exprs:
        if "=" not in e:
            raise UsageError(f"filter must look like key=value, got {e!r}")
        k, v = e.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _column(rows, name):
    if name == "layers":
        return np.array([r["d"] / 2 for r in rows], dtype=float)
    if name not in rows[0]:
        raise UsageError(f"unknown column {name!r}")
    return np.array([r[name] for r in rows], dtype=float)


def _select(rows, where):
    sel = [r for r in rows if all(float(r[k]) == v for k, v in where.items())]
    sel = [r for r in sel if np.isfinite(float(r.get("mean_measurements", 0.0)))]
    if not sel:
        raise UsageError("no result rows match the filters")
    return sel


# --- subcommands -------------------------------------------------------------------

def cmd_baseline(args, cp):
    sec = dict(cp.items("baseline")) if cp.has_section("baseline") else {}
    n_list = args.n or [int(v) for v in sec.get("n", "4,6,8").split(",")]
    max_depth = args.max_depth if args.max_depth is not None else int(sec.get("max_depth", 64))
    samples = args.samples if args.samples is not None else int(sec.get("samples", 1000))
    seed = args.seed if args.seed is not None else int(sec.get("seed", 0))
    if samples < 1 or max_depth < 2 or any(n < 2 for n in n_list):
        raise UsageError("need samples >= 1, max-depth >= 2 and every n >= 2")
    out = _out_dir(args)
    _write_config(out, "baseline", baseline=dict(n=n_list, max_depth=max_depth, samples=samples, seed=seed))
    curves = entanglement_growth(n_list, max_depth, samples, np.random.default_rng(seed))
    for c in curves:
        write_growth_csv([c], out / f"growth_n{c.n}.csv")
    write_growth_csv(curves, out / "growth.csv")
    emit_plot([Series(f"N={c.n}", c.depths, c.mean_savg, c.stderr) for c in curves], "line",
              out / "growth.svg", "Entanglement growth", "depth D", "mean S_avg (bits)")
    print(f"wrote {len(curves)} growth curves to {out}")


def cmd_train(args, cp):
    env_cfg = resolve_env(args, cp)
    train_cfg = resolve_train(args, cp)
    out = _out_dir(args)
    _write_config(out, "train", env=env_cfg.to_dict(), train=train_cfg.to_dict())
    from .env import DisentangleEnv

    def progress(row):
        log.info("t=%d len=%.2f rew=%.3f", row["timestep"], row["ep_len_mean"], row["ep_rew_mean"])

    model, metrics = train(lambda s: DisentangleEnv(env_cfg, seed=s), train_cfg, progress)
    save_model(model, train_cfg, out / "model.json", extra={"env_config": env_cfg.to_dict()})
    metrics.to_csv(out / "metrics.csv")
    print(f"trained {len(metrics.rows)} updates; model and metrics in {out}")


def cmd_eval(args, cp):
    episodes = args.episodes if args.episodes is not None else 1000
    model = None
    stored = {}
    if args.actor == "policy":
        if args.model is None:
            raise UsageError("eval --actor policy needs --model")
        model, _, extra = load_model(args.model)
        stored = dict(extra.get("env_config", {}))
        stored.pop("seed", None)
    env_cfg = resolve_env(args, cp, base=stored)
    if model is not None and model.input_dim != env_cfg.n_actions:
        raise UsageError(f"model input_dim {model.input_dim} does not match environment ({env_cfg.n_actions})")
    actor = model if model is not None else (
        RandomActor(env_cfg.n_actions) if args.actor == "random" else FillFinalColumnActor(env_cfg.n, env_cfg.n_layers)
    )
    out = _out_dir(args)
    _write_config(out, "eval", env=env_cfg.to_dict(), eval=dict(actor=args.actor, episodes=episodes,
                                                                  model=str(args.model or "")))
    stats = evaluate_policy(actor, env_cfg, episodes, np.random.default_rng(env_cfg.seed))
    row = dict(n=env_cfg.n, d=env_cfg.d, alpha=env_cfg.alpha, mean_measurements=stats.mean_measurements,
               stderr_measurements=stats.stderr_measurements, mean_weighted_layer=stats.mean_weighted_layer,
               mean_reward=stats.mean_unscaled_reward, success_rate=stats.success_rate, seed=env_cfg.seed)
    emit_results([row], out / "eval.csv")
    print(f"success {stats.success_count}/{episodes}, M={stats.mean_measurements:.3f} "
          f"+- {stats.stderr_measurements:.3f}, L={stats.mean_weighted_layer:.3f}")


def cmd_sweep(args, cp):
    sec = dict(cp.items("sweep")) if cp.has_section("sweep") else {}
    grid = FULL_GRID if args.full_grid else DEFAULT_GRID

    def pick(flag, key, default, conv):
        if flag is not None:
            return flag
        if key in sec:
            return [conv(v) for v in sec[key].split(",")]
        return list(default)

    n_list = pick(args.n, "n", grid["n"], int)
    alphas = pick(args.alpha, "alpha", grid["alpha"], float)
    if args.depth is not None:
        depths = args.depth
    elif args.layers is not None:
        depths = [2 * v for v in args.layers]
    else:
        depths = [2 * v for v in pick(None, "layers", grid["layers"], int)]
    episodes = args.episodes if args.episodes is not None else int(sec.get("episodes", 1000))
    jobs = args.jobs if args.jobs is not None else int(sec.get("jobs", 1))
    seed = args.seed if args.seed is not None else int(sec.get("seed", 0))
    overrides = {} if args.timesteps is not None or (cp.has_section("train") and cp.has_option("train", "t_s")) \
        else {"t_s": grid["t_s"]}
    train_cfg = resolve_train(args, cp, **overrides)
    env_cfg = resolve_env(args, cp, n=n_list[0], d=depths[0], alpha=alphas[0])
    for point in [dict(d=d) for d in depths] + [dict(n=n) for n in n_list] + [dict(alpha=a) for a in alphas]:
        replace(env_cfg, **point)  # fail on a bad grid value before training anything
    if jobs < 1 or episodes < 1:
        raise UsageError("--jobs and --episodes must be >= 1")
    out = _out_dir(args)
    _write_config(out, "sweep", env=env_cfg.to_dict(), train=train_cfg.to_dict(),
                  sweep=dict(n=n_list, depth=depths, alpha=alphas, episodes=episodes, jobs=jobs, seed=seed))
    points = [(n, d, a) for n in n_list for d in depths for a in alphas]
    rows = sweep(points, train_cfg, env_cfg, episodes, base_seed=seed, jobs=jobs,
                 on_row=lambda r: log.info("done %s", r))
    emit_results(rows, out / "results.csv")
    print(f"wrote {len(rows)} rows to {out / 'results.csv'}")


def cmd_fit(args, cp):
    rows = _select(read_results(args.infile), _filters(args.where))
    x, y = _column(rows, args.x), _column(rows, args.y)
    fit = linear_fit(x, y) if args.kind == "linear" else tanh_fit(x, y)
    report = fit.report(x=args.x, y=args.y, n_points=len(x), source=args.infile.name)
    out = _out_dir(args)
    _write_config(out, "fit", fit=dict(kind=args.kind, infile=args.infile, x=args.x, y=args.y,
                                       where=";".join(args.where)))
    (out / f"fit_{args.kind}_{args.y}_vs_{args.x}.txt").write_text(report)
    print(report, end="")


def cmd_plot(args, cp):
    out = _out_dir(args)
    # several plots may share a directory, so each kind keeps its own config
    _write_config(out, "plot", f"config_plot_{args.what}.ini", plot=dict(
        what=args.what, infile=args.infile or "", alpha=args.alpha or "", layers=args.layers or "",
        orientation=args.orientation or "", x=args.x, y=args.y, fit=args.fit or "", where=";".join(args.where)))
    if args.what == "weights":
        alphas = args.alpha or [0.1, 0.5, 1.0]
        n_layers = args.layers or 10
        orientation = args.orientation or "as_written"
        layers = list(range(1, n_layers + 1))
        series = [Series(f"alpha={a:g}", layers, list(layer_weights(a, n_layers, orientation))) for a in alphas]
        emit_plot(series, "line", out / "weights.svg", "Measurement weights", "layer l", "f_l")
        return
    if args.infile is None:
        raise UsageError(f"plot {args.what} needs --in")
    if args.what == "growth":
        curves = read_growth_csv(args.infile)
        emit_plot([Series(f"N={c.n}", c.depths, c.mean_savg, c.stderr) for c in curves], "line",
                  out / "growth.svg", "Entanglement growth", "depth D", "mean S_avg (bits)")
    elif args.what == "metrics":
        import csv

        with open(args.infile, newline="") as fh:
            data = list(csv.DictReader(fh))
        if not data or tuple(data[0]) != METRICS_HEADER:
            raise UsageError(f"{args.infile} is not a metrics CSV")
        t = [float(r["timestep"]) for r in data]
        emit_plot([Series("ep_rew_mean", t, [float(r["ep_rew_mean"]) for r in data])], "line",
                  out / "metrics_reward.svg", "Mean episode reward", "timestep", "reward")
        emit_plot([Series("ep_len_mean", t, [float(r["ep_len_mean"]) for r in data])], "line",
                  out / "metrics_length.svg", "Mean episode length", "timestep", "steps")
    else:
        rows = _select(read_results(args.infile), _filters(args.where))
        x, y = _column(rows, args.x), _column(rows, args.y)
        yerr = _column(rows, "stderr_measurements") if args.y == "mean_measurements" else None
        fit = None
        if args.fit:
            fit = linear_fit(x, y) if args.fit == "linear" else tanh_fit(x, y)
        emit_plot([Series(args.y, x, y, yerr)], "scatter+fit", out / f"{args.y}_vs_{args.x}.svg",
                  xlabel=args.x, ylabel=args.y, fit=fit, fit_label=f"{args.fit} fit" if fit else "fit")


COMMANDS = {"baseline": cmd_baseline, "train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep,
            "fit": cmd_fit, "plot": cmd_plot}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "disentangler: error: a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cp = _read_config(args.config)
        COMMANDS[args.command](args, cp)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ValueError, FitError) as exc:
        print(f"disentangler: invalid input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"disentangler: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
