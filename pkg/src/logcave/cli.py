"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
Data files are deterministic given the flags; timing goes to stderr.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, io, sampler, volume
from .diagnostics import RejectionError
from .geometry import ChordError, ProjectionError
from .potential import IsotropicGaussian, Uniform

COMMANDS = ("sample", "volume", "diagnose", "couple", "schedule")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


@dataclass
class ExperimentConfig:
    """Serialisable run description (``key=value`` lines, ``command`` first)."""

    command: str
    seed: int | None = None
    options: dict = field(default_factory=dict)

    def to_text(self):
        lines = [f"command={self.command}"]
        if self.seed is not None:
            lines.append(f"seed={self.seed}")
        lines += [f"{k}={v}" for k, v in self.options.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        entries = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"bad config line {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            entries[k] = v
        if entries.get("command") not in COMMANDS:
            raise ConfigError("config needs command= one of " + ", ".join(COMMANDS))
        command = entries.pop("command")
        seed = entries.pop("seed", None)
        return cls(command, None if seed is None else int(seed), entries)

    def to_argv(self):
        argv = [self.command]
        if self.seed is not None:
            argv += ["--seed", str(self.seed)]
        # the joined form keeps negative numbers from reading as flags
        argv += [f"--{k}={v}" for k, v in self.options.items()]
        return argv


def _potential(args, body):
    if args.potential == "uniform":
        return Uniform()
    if args.potential == "gaussian":
        return IsotropicGaussian(args.sigma)
    raise ConfigError(f"unknown potential {args.potential!r}")


def _eta(args, potential, n):
    if args.eta == "auto":
        return sampler.schedule_practical(potential.smoothness, n)
    try:
        eta = float(args.eta)
    except ValueError:
        raise ConfigError(f"--eta must be 'auto' or a number, got {args.eta!r}") from None
    if not eta > 0:
        raise ConfigError("--eta must be positive")
    return eta


def _point(text, n, name):
    if text is None:
        return None
    vals = io._vector(text)
    if len(vals) == 1 and n > 1:
        vals = vals * n
    if len(vals) != n:
        raise ConfigError(f"{name} must have {n} coordinates")
    return np.array(vals)


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("LOGCAVE_SEED")
    if env is None:
        raise ConfigError("a seed is required (--seed or LOGCAVE_SEED)")
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"LOGCAVE_SEED is not an integer: {env!r}") from None


def cmd_sample(args, out):
    body, _ = io.resolve_body(args.body)
    pot = _potential(args, body)
    n = body.dimension
    eta = _eta(args, pot, n)
    seed = _seed(args)
    start = _point(args.start, n, "--start")
    if args.sampler == "lmc":
        cfg = sampler.SamplerConfig(eta, args.steps, seed, None if start is None else tuple(start))
        traj = sampler.run_lmc(body, pot, cfg)
    else:
        traj = sampler.run_hit_and_run(body, pot, args.steps, seed, start)
    io.write_trajectory_csv(args.out, traj.states)
    if args.events:
        io.write_events_jsonl(args.events, traj.local_time)
    print(f"sample: {len(traj.states)} states, {len(traj.local_time)} boundary events, "
          f"eta={eta:.6g} -> {args.out}", file=out)


def cmd_volume(args, out):
    body, ref = io.resolve_body(args.body)
    seed = _seed(args)
    kind = {"lmc": "lmc", "hr": "hit_and_run", "hit_and_run": "hit_and_run"}[args.sampler]
    sched = volume.build_schedule(body, samples_per_phase=args.samples, sampler_kind=kind,
                                  chains=args.chains)
    est = volume.estimate_volume(body, sched, seed, threads=args.threads)
    row = {"body": args.body, "n": body.dimension, "sampler": args.sampler,
           "phases": sched.phases, "samples": est.total_samples, "volume": repr(est.value),
           "normalized": repr(est.value / ref),
           "seconds": f"{est.wall_time:.3f}" if args.timing else "", "seed": seed}
    io.append_volume_row(args.out, row)
    print(f"volume: {est.value:.6g} (normalized {est.value / ref:.4f}) with {args.sampler}, "
          f"{sched.phases} phases -> {args.out}", file=out)
    print(f"volume: wall time {est.wall_time:.2f}s", file=sys.stderr)


def cmd_diagnose(args, out):
    body, _ = io.resolve_body(args.body)
    pot = _potential(args, body)
    seed = _seed(args)
    n = body.dimension
    eta = _eta(args, pot, n) if args.eta != "auto" else args.T / 1000
    if args.check == "local-time":
        reports = [diagnostics.local_time_experiment(body, pot, args.T, eta, args.replicas, seed,
                                                     threads=args.threads)]
    elif args.check == "boundary-mass":
        xs = diagnostics.rejection_oracle(body, pot, args.replicas, seed)
        reports = [diagnostics.boundary_mass_check(xs, body, pot, args.gamma)]
    elif args.check == "escape":
        x = _point(args.x, n, "--x")
        x = np.zeros(n) if x is None else x
        reports = [diagnostics.escape_probability_check(body, pot, x, args.gamma, args.T,
                                                        args.replicas, seed, eta=eta,
                                                        threads=args.threads)]
    else:
        means, errs, slope = diagnostics.discretization_gap(
            body, pot, [10 * eta, eta], args.refine, args.T, seed, args.replicas,
            threads=args.threads)
        reports = [diagnostics.BoundReport(f"gap_eta={e:g}", math.inf, m, s)
                   for e, m, s in zip([10 * eta, eta], means, errs)]
    io.write_bound_reports(args.out, reports)
    for r in reports:
        print(f"diagnose: {r.bound_name} empirical={r.empirical:.4g} bound={r.theoretical:.4g} "
              f"pass={r.passed}", file=out)


def cmd_couple(args, out):
    body, _ = io.resolve_body(args.body)
    pot = _potential(args, body)
    seed = _seed(args)
    n = body.dimension
    x = _point(args.x, n, "--x")
    x2 = _point(args.x2, n, "--x2")
    if x is None or x2 is None:
        raise ConfigError("--x and --x2 are required")
    eta = _eta(args, pot, n) if args.eta != "auto" else 1e-3
    res = sampler.coupling_replicas(body, pot, x, x2, args.T, eta, seed, args.replicas,
                                    threads=args.threads)
    with open(args.out, "w") as fh:
        fh.write("replica,tau\n")
        for i, t in enumerate(res.tau):
            fh.write(f"{i},{t!r}\n")
    frac = float(np.mean(np.isfinite(res.tau)))
    print(f"couple: {frac:.3f} of {args.replicas} pairs merged by T={args.T:g} -> {args.out}",
          file=out)


def cmd_schedule(args, out):
    eta, N = sampler.schedule_theorem1(args.n, args.R, args.eps, args.case, args.L, args.beta)
    print(f"eta={eta:.6g} N={N:.6g}", file=out)


def build_parser():
    p = _Parser(prog="logcave", description="Projected Langevin Monte Carlo on convex bodies.")
    p.add_argument("--config", help="read command and flags from a key=value file")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, potential=True):
        sp.add_argument("--body", required=True,
                        help="alias box{n}, ball{n}, boxball{n} or a body spec file")
        if potential:
            sp.add_argument("--potential", default="uniform", choices=["uniform", "gaussian"])
            sp.add_argument("--sigma", type=float, default=1.0)
        sp.add_argument("--seed", type=int, help="integer seed (fallback: $LOGCAVE_SEED)")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads for replica noise; never changes outputs")

    sp = sub.add_parser("sample", help="run one chain and dump its trajectory")
    common(sp)
    sp.add_argument("--sampler", default="lmc", choices=["lmc", "hr"])
    sp.add_argument("--eta", default="auto")
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--start")
    sp.add_argument("--out", required=True)
    sp.add_argument("--events", help="JSON-lines file for boundary local-time events")

    sp = sub.add_parser("volume", help="Gaussian-cooling volume estimate")
    common(sp, potential=False)
    sp.add_argument("--sampler", default="lmc", choices=["lmc", "hr", "hit_and_run"])
    sp.add_argument("--samples", type=int, default=2000)
    sp.add_argument("--chains", type=int, default=10)
    sp.add_argument("--timing", action="store_true", help="record wall time in the CSV")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("diagnose", help="empirical lemma checks")
    common(sp)
    sp.add_argument("--check", required=True,
                    choices=["local-time", "boundary-mass", "escape", "gap"])
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--eta", default="auto")
    sp.add_argument("--gamma", type=float, default=0.1)
    sp.add_argument("--x")
    sp.add_argument("--refine", type=int, default=10)
    sp.add_argument("--replicas", type=int, default=200)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("couple", help="reflection-coupling times")
    common(sp)
    sp.add_argument("--x")
    sp.add_argument("--x2")
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--eta", default="auto")
    sp.add_argument("--replicas", type=int, default=2000)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("schedule", help="worst-case step size and iteration count")
    sp.add_argument("--case", default="uniform", choices=["uniform", "general"])
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--R", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--L", type=float, default=0.0)
    sp.add_argument("--beta", type=float, default=0.0)
    return p


HANDLERS = {"sample": cmd_sample, "volume": cmd_volume, "diagnose": cmd_diagnose,
            "couple": cmd_couple, "schedule": cmd_schedule}


def run_command(argv=None, out=None):
    """Run the CLI; returns the exit code instead of exiting."""
    out = out or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help
            return int(exc.code or 0)
        if args.config:
            try:
                with open(args.config) as fh:
                    cfg = ExperimentConfig.from_text(fh.read())
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc.strerror}") from None
            args = parser.parse_args(cfg.to_argv())
        if args.command is None:
            raise ConfigError("a command is required: " + ", ".join(COMMANDS))
        t0 = time.perf_counter()
        HANDLERS[args.command](args, out)
        print(f"{args.command}: done in {time.perf_counter() - t0:.2f}s", file=sys.stderr)
        return 0
    except (ConfigError, io.SpecError) as exc:
        print(f"logcave: config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"logcave: config error: {exc}", file=sys.stderr)
        return 1
    except (ProjectionError, ChordError, RejectionError, FloatingPointError) as exc:
        print(f"logcave: numerical failure: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run_command())
