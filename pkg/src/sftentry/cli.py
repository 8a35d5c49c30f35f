"""Command-line interface.

Subcommands:

* ``run <config>``                  -- execute an experiment from a config file
* ``preset <name> [--strict] [--out DIR]`` -- execute a builtin preset
* ``list-presets``                  -- print the registry
* ``plot <run-dir>``                -- render figures and refresh the gnuplot script

Config files are plain ``key = value`` text; unknown keys are rejected so a
typo cannot silently change an experiment.  See the README for the grammar.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import families, measures, presets, report, sft
from .errors import ConfigError, MissingArtifacts, SftEntryError
from .presets import Experiment
from .runner import run_experiment

_KEYS = {
    "name", "system", "measure", "family", "n_min", "n_max", "seed", "trials",
    "max_steps", "workers", "mc_min_epsilon", "tail", "horizon_cap", "checks",
    "diagnostics", "emit_trials", "figures",
}


def _parse_bool(value: str, key: str) -> bool:
    if value.lower() in ("true", "yes", "1"):
        return True
    if value.lower() in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_system(token: str, config_dir: Path) -> tuple[sft.TransitionMatrix, str]:
    if token.startswith("matrix:"):
        path = config_dir / token.split(":", 1)[1]
        return sft.load_transition_matrix(path), token
    try:
        return sft.named_system(token), token
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_prob(token: str) -> float:
    if "/" in token:
        num, den = token.split("/", 1)
        return float(num) / float(den)
    return float(token)


def _parse_measure(token: str, base: sft.TransitionMatrix, config_dir: Path):
    if token == "parry":
        return measures.parry(base), token
    if token.startswith("bernoulli:"):
        parts = token.split(":", 1)[1].split(",")
        probs = [_parse_prob(p) for p in parts]
        return measures.bernoulli(probs), token
    if token.startswith("gibbs:"):
        pot = measures.load_potential(base, config_dir / token.split(":", 1)[1])
        return measures.gibbs(base, pot).measure, token
    raise ConfigError(f"unknown measure {token!r}")


def _parse_family(token: str, base: sft.TransitionMatrix, config_dir: Path):
    kind, _, rest = token.partition(":")
    if kind == "prefix":
        head_s, _, tails = rest.partition(":")
        return families.PrefixFamily(base=base, head=int(head_s),
                                     tail=tuple(int(c) for c in tails)), token
    if kind == "fixed":
        stream_s, _, anchor = rest.partition(":")
        anchor = anchor or "one_sided"
        if anchor not in ("one_sided", "centered"):
            raise ConfigError(f"unknown anchor {anchor!r}")
        return families.FixedPointFamily(base=base, stream=families.named_stream(stream_s),
                                         anchor=anchor), token
    if kind == "submatrix":
        entry_s, _, block = rest.partition(":")
        return families.SubmatrixFamily(base=base, block_symbols=tuple(int(c) for c in block),
                                        entry=int(entry_s)), token
    if kind == "explicit":
        return families.explicit_family_from_json(base, config_dir / rest), token
    raise ConfigError(f"unknown family {token!r}")


def parse_config(path) -> Experiment:
    """Parse the strict key=value experiment grammar."""
    path = Path(path)
    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    for required in ("system", "measure", "family", "n_min", "n_max"):
        if required not in raw:
            raise ConfigError(f"{path}: missing required key {required!r}")

    config_dir = path.parent
    try:
        system, system_label = _parse_system(raw["system"], config_dir)
        measure, measure_label = _parse_measure(raw["measure"], system, config_dir)
        family, family_label = _parse_family(raw["family"], system, config_dir)
        n_min, n_max = int(raw["n_min"]), int(raw["n_max"])
        if n_min < 1 or n_max < n_min:
            raise ConfigError("need 1 <= n_min <= n_max")
        checks_raw = raw.get("checks", "none")
        checks = () if checks_raw == "none" else tuple(c.strip() for c in checks_raw.split(","))
        for c in checks:
            if c not in ("basic", "shrinking", "centered"):
                raise ConfigError(f"unknown check {c!r}")
        exp = Experiment(
            name=raw.get("name", path.stem),
            system=system, system_label=system_label,
            measure=measure, measure_label=measure_label,
            family=family, family_label=family_label,
            n_values=tuple(range(n_min, n_max + 1)),
            seed=int(raw.get("seed", 20160401)),
            trials=int(raw.get("trials", 100_000)),
            max_steps=int(raw.get("max_steps", 0)),
            workers=int(raw.get("workers", 1)),
            mc_min_epsilon=float(raw.get("mc_min_epsilon", 1e-4)),
            tail_threshold=float(raw.get("tail", 1e-4)),
            horizon_cap=int(raw.get("horizon_cap", 5_000_000)),
            checks=checks,
            diagnostics=_parse_bool(raw.get("diagnostics", "true"), "diagnostics"),
            emit_trials=_parse_bool(raw.get("emit_trials", "false"), "emit_trials"),
            figures=_parse_bool(raw.get("figures", "true"), "figures"),
        )
    except ConfigError:
        raise
    except (ValueError, SftEntryError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return exp


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sftentry", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (default: runs/<name>)")
    p_run.add_argument("--strict", action="store_true",
                       help="exit 2 when a checked condition fails, 3 when unavailable")

    p_preset = sub.add_parser("preset", help="run a builtin preset")
    p_preset.add_argument("name")
    p_preset.add_argument("--out", default=None)
    p_preset.add_argument("--strict", action="store_true")
    p_preset.add_argument("--trials", type=int, default=None, help="override trial count")
    p_preset.add_argument("--workers", type=int, default=None)
    p_preset.add_argument("--no-figures", action="store_true")

    sub.add_parser("list-presets", help="list builtin presets")

    p_plot = sub.add_parser("plot", help="render figures for a finished run")
    p_plot.add_argument("run_dir")

    args = parser.parse_args(argv)

    if args.command == "list-presets":
        for name, doc in presets.list_presets():
            print(f"{name:26s} {doc}")
        return 0

    if args.command == "plot":
        try:
            script = report.emit_plot_script(args.run_dir)
            images = report.render_figures(args.run_dir)
        except MissingArtifacts as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for p in [script, *images]:
            print(p)
        return 0

    try:
        if args.command == "run":
            exp = parse_config(args.config)
        else:
            exp = presets.get_preset(args.name)
            overrides = {}
            if args.trials is not None:
                overrides["trials"] = args.trials
            if args.workers is not None:
                overrides["workers"] = args.workers
            if args.no_figures:
                overrides["figures"] = False
            if overrides:
                exp = exp.with_overrides(**overrides)
    except (ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out = Path(args.out) if args.out else Path("runs") / exp.name
    code, summary = run_experiment(exp, out, strict=args.strict)
    status = "ok" if code == 0 else f"exit {code}"
    print(f"{exp.name}: wrote {out} ({status})")
    if summary.get("any_failure"):
        print("note: some checked condition failed; see summary.json", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
