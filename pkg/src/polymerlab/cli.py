"""polymerlab command line: run a named experiment and write its report."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field

from .errors import DomainError, UsageError
from .experiments import runners
from .experiments.identities import identity_suite

EXIT_OK, EXIT_USAGE, EXIT_IDENTITY, EXIT_IO = 0, 1, 2, 3

EXPERIMENTS = ("coalesce-slow", "coalesce-fast", "exit-tail", "tv", "transversal", "stationarity", "verify")
TV_R = [1.0, 2.0]

# per-experiment defaults that differ from the shared ones
_OVERRIDES = {
    "tv": {"r": TV_R},
    "stationarity": {"env_replicas": 2000},
}
_KEYS = ("mu", "rho", "N", "delta", "r", "env_replicas", "theta_replicas", "seed", "output", "format",
         "seeds", "box", "timed")


@dataclass
class RunConfig:
    experiment: str
    mu: float = runners.DEFAULTS["mu"]
    rho: float = runners.DEFAULTS["rho"]
    N: int = runners.DEFAULTS["N"]
    delta: list = field(default_factory=lambda: list(runners.DEFAULTS["delta"]))
    r: list = field(default_factory=lambda: list(runners.DEFAULTS["r"]))
    env_replicas: int = runners.DEFAULTS["env_replicas"]
    theta_replicas: int = runners.DEFAULTS["theta_replicas"]
    seed: int = runners.DEFAULTS["seed"]
    output: str = "-"
    format: str = "json"
    seeds: int = 50
    box: list = field(default_factory=lambda: [30, 30])
    timed: bool = False
    quiet: bool = False

    def validate(self) -> "RunConfig":
        if self.experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.experiment!r}")
        if not (0 < self.rho < self.mu):
            raise UsageError(f"need 0 < rho < mu (got rho={self.rho}, mu={self.mu})")
        if self.N < 1:
            raise UsageError("N must be a positive integer")
        if self.env_replicas < 1 or self.theta_replicas < 1 or self.seeds < 1:
            raise UsageError("replica and seed counts must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("seed must be a 64-bit unsigned integer")
        if any(x <= 0 for x in self.delta) or any(x <= 0 for x in self.r):
            raise UsageError("grid values must be positive")
        if self.format not in ("csv", "json"):
            raise UsageError("format must be csv or json")
        if len(self.box) != 2 or min(self.box) < 20:
            raise UsageError("box must be two sides of at least 20")
        return self


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed number list {text!r}")


def _ints(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polymerlab", description="Inverse-gamma polymer experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat JSON file with any of the flag values")
    p.add_argument("--mu", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--delta", type=_floats, help="comma-separated delta grid")
    p.add_argument("--r", type=_floats, help="comma-separated r grid")
    p.add_argument("--env-replicas", dest="env_replicas", type=int)
    p.add_argument("--theta-replicas", dest="theta_replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, help="seed count for verify")
    p.add_argument("--box", type=_ints, help="stationarity box sides, e.g. 30,30")
    p.add_argument("--output", help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--timed", action="store_true", default=None, help="record wall-clock time in the report")
    p.add_argument("--quiet", action="store_true", help="no progress on stderr")
    return p


def _read_config(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a flat JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - set(_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return data


def parse_config(argv=None) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    args = build_parser().parse_args(argv)
    values = dict(_OVERRIDES.get(args.experiment, {}))
    if args.config:
        values.update(_read_config(args.config))
    for key in _KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    try:
        cfg = RunConfig(args.experiment, quiet=args.quiet, **values)
        cfg.mu, cfg.rho = float(cfg.mu), float(cfg.rho)
        cfg.N, cfg.seed = int(cfg.N), int(cfg.seed)
        cfg.delta = [float(x) for x in cfg.delta]
        cfg.r = [float(x) for x in cfg.r]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad configuration value: {exc}") from exc
    return cfg.validate()


def run(cfg: RunConfig):
    common = dict(mu=cfg.mu, rho=cfg.rho, seed=cfg.seed, quiet=cfg.quiet, timed=cfg.timed)
    e = cfg.experiment
    if e == "coalesce-slow":
        return runners.run_coalescence_slow(N=cfg.N, delta_grid=cfg.delta, env_replicas=cfg.env_replicas,
                                            theta_replicas=cfg.theta_replicas, **common)
    if e == "coalesce-fast":
        return runners.run_coalescence_fast(N=cfg.N, r_grid=cfg.r, env_replicas=cfg.env_replicas,
                                            theta_replicas=cfg.theta_replicas, **common)
    if e == "exit-tail":
        return runners.run_exit_tail(N=cfg.N, r_grid=cfg.r, delta_grid=cfg.delta,
                                     env_replicas=cfg.env_replicas, **common)
    if e == "tv":
        return runners.run_tv(N=cfg.N, delta_grid=cfg.delta, r_grid=cfg.r, env_replicas=cfg.env_replicas,
                              **common)
    if e == "transversal":
        return runners.run_transversal(N=cfg.N, delta_grid=cfg.delta, env_replicas=cfg.env_replicas, **common)
    if e == "stationarity":
        return runners.run_stationarity(box=tuple(cfg.box), env_replicas=cfg.env_replicas, **common)
    return identity_suite(cfg.seeds, mu=cfg.mu, rho=cfg.rho, seed=cfg.seed, timed=cfg.timed)


def _write(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w") as fh:
        fh.write(text)


def dispatch(cfg: RunConfig) -> int:
    try:
        report = run(cfg)
    except (UsageError, DomainError) as exc:
        print(f"polymerlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        _write(report.render(cfg.format), cfg.output)
    except OSError as exc:
        print(f"polymerlab: cannot write {cfg.output}: {exc}", file=sys.stderr)
        return EXIT_IO
    if cfg.experiment == "verify":
        bad = report.series["total_failures"]
        if bad:
            for f in report.series["failures"][:20]:
                print(f"identity failure: {f['identity']} seed={f['seed']} at {f['location']} "
                      f"value={f['value']:.3g}", file=sys.stderr)
            return EXIT_IDENTITY
        if not cfg.quiet:
            print(f"verify: all identities hold for {cfg.seeds} seeds", file=sys.stderr)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"polymerlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"polymerlab: {exc}", file=sys.stderr)
        return EXIT_IO
    return dispatch(cfg)


def config_dict(cfg: RunConfig) -> dict:
    return asdict(cfg)


if __name__ == "__main__":
    sys.exit(main())
