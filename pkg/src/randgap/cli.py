"""``randgap`` command line.

Exit status: 0 on success, 1 for usage or configuration errors, 2 when a
run fails (posterior collapse in a single-instance run, I/O, numerical
domain errors).
"""

import argparse
import sys

from .campaigns import run_campaign, run_turnpike, write_csv
from .config import CONTROLMAP_MODES, DESIGN_SAMPLERS, ConfigError, build_config, load_config

__all__ = ["main", "build_parser"]

_EPILOG = """\
Config files hold flat key=value lines ('#' starts a comment).  Any key
may also be given as a flag, and flags win over the file.  The seed falls
back to the RANDGAP_SEED environment variable, then to 0.
"""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common(p):
    p.add_argument("--config", metavar="PATH", help="key=value config file")
    p.add_argument("--dim", type=int, help="Hilbert-space dimension")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--instances", type=int, help="number of random instances (default 50)")
    p.add_argument("--experiments", type=int, help="experiments per instance")
    p.add_argument("--out", metavar="PATH", help="CSV output path")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--accept-threshold", type=int, dest="accept_threshold",
                   help="accepted samples per rejection-filter update (default 10000)")
    p.add_argument("--pgh-prefactor", type=float, dest="pgh_prefactor",
                   help="particle guess heuristic prefactor (default 0.5)")


def build_parser():
    parser = _Parser(prog="randgap", description="Randomized gap and amplitude estimation "
                     "experiments with rejection-filter inference.", epilog=_EPILOG,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gaps", help="learn spectra of random GUE Hamiltonians",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("--anneal-time", type=float, dest="anneal_time",
                   help="prepare eigenstates adiabatically from diag(0..N-1) over this time")

    p = sub.add_parser("amplitude", help="amplitude estimation with randomized Grover powers",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)

    p = sub.add_parser("controlmap", help="control-map recovery and miscalibration sweep",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("mode", nargs="?", choices=CONTROLMAP_MODES, help="sub-mode")

    p = sub.add_parser("turnpike", help="spectra consistent with a multiset of gaps",
                       description="Reads gaps, one per line, from FILE or stdin and prints "
                       "every consistent spectrum on its own line.",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("gaps_file", nargs="?", metavar="FILE", help="gap list (default stdin)")
    p.add_argument("--tolerance", type=float, help="absolute matching tolerance")

    p = sub.add_parser("designcheck", help="second-moment deviation of a unitary sampler",
                       epilog=_EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("--sampler", choices=DESIGN_SAMPLERS, help="unitary source (default haar)")
    p.add_argument("--samples", type=int, help="Monte Carlo draws (default 100000)")
    return parser


def _read_gaps(path, stdin):
    text = stdin.read() if path in (None, "-") else open(path, encoding="utf-8").read()
    gaps = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            gaps.append(float(line))
        except ValueError:
            raise ConfigError(f"line {lineno}: not a number: {line!r}") from None
    if not gaps:
        raise ConfigError("no gaps given")
    return gaps


def main(argv=None, stdin=None, stdout=None, stderr=None, environ=None):
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        file_values = load_config(args.config) if args.config else {}
        cfg = build_config(args.command, file_values, overrides, environ)
    except _UsageError as exc:
        print(exc, file=stderr)
        return 1
    except (ConfigError, TypeError) as exc:
        print(f"randgap: config error: {exc}", file=stderr)
        return 1

    try:
        if args.command == "turnpike":
            try:
                gaps = _read_gaps(cfg.gaps_file, stdin)
            except ConfigError as exc:
                print(f"randgap: config error: {exc}", file=stderr)
                return 1
            result = run_turnpike(gaps, cfg.tolerance)
            for s in result.summary["solutions"]:
                print(" ".join(f"{v:.12g}" for v in s.values), file=stdout)
            if not result.summary["solutions"]:
                print("randgap: no spectrum matches these gaps", file=stderr)
        else:
            result = run_campaign(cfg)
        if cfg.out:
            write_csv(result, cfg.out)
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"randgap: run failed: {exc}", file=stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
