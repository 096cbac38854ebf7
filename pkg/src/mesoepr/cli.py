"""Command-line front end.

Subcommands: ``analyze``, ``certify``, ``curves``, ``simulate``, ``fock-table``.
Exit codes: 0 success, 2 schema/validation error, 3 numeric failure.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from . import __version__
from .distributions import BinningPolicy, InferenceStats, JointDistribution, Setting, inference_stats
from .errors import InsufficientData, MesoEPRError, ValidationError
from .fock import (
    SupportConvention,
    certify,
    default_table_path,
    dl_bound,
    duan_table,
    read_table_csv,
    write_table_csv,
)
from .gaussian import apply_loss, two_mode_squeezed
from .records import RecordTable, file_sha256, read_records, write_json, write_records
from .simulate import ANGLE, HomodyneConfig, estimate_jx_mean, sample_quadrature_pairs, schwinger_counts, spin_outcomes
from .steering import DELTA_MAX, SchwingerConfig, build_report, default_deltas, schwinger_normalize, threshold_epsilon

TOOL = "mesoepr"
FIG1_DELTA_MAX = 1.65


def parse_deltas(tokens) -> list[float]:
    """Expand ``0.3`` and ``start:stop:step`` (stop inclusive) tokens."""
    out = []
    for token in tokens:
        for part in str(token).replace(",", " ").split():
            if ":" in part:
                try:
                    start, stop, step = (float(x) for x in part.split(":"))
                except ValueError:
                    raise ValidationError(f"bad delta range {part!r}; expected start:stop:step") from None
                if not step > 0 or stop < start:
                    raise ValidationError(f"bad delta range {part!r}")
                n = int(math.floor((stop - start) / step + 1e-9))
                out.extend(round(start + k * step, 12) for k in range(n + 1))
            else:
                try:
                    out.append(float(part))
                except ValueError:
                    raise ValidationError(f"bad delta {part!r}") from None
    if any(d < 0 or not math.isfinite(d) for d in out):
        raise ValidationError("delta values must be finite and >= 0")
    return sorted(set(out))


SUMMARY_KEYS = ("eps", "var_x", "var_p", "abs_dev_x", "abs_dev_p")


def parse_summary(tokens) -> dict:
    values = {}
    for token in tokens:
        for part in str(token).replace(",", " ").split():
            key, sep, value = part.partition("=")
            if not sep or key not in SUMMARY_KEYS:
                raise ValidationError(f"bad summary entry {part!r}; keys are {', '.join(SUMMARY_KEYS)}")
            try:
                values[key] = float(value)
            except ValueError:
                raise ValidationError(f"summary value for {key!r} is not a number") from None
    return values


def summary_stats(values: dict) -> tuple[InferenceStats, InferenceStats, bool]:
    """Inference stats from published summary numbers.

    Missing inference variances default to ``eps`` each (symmetric split);
    missing absolute deviations are filled in from the Gaussian relation, in
    which case the Gaussian assumption is declared.
    """
    if "eps" not in values and not {"var_x", "var_p"} <= values.keys():
        raise InsufficientData("summary mode needs eps=... or both var_x=... and var_p=...")
    var_x = values.get("var_x", values.get("eps"))
    var_p = values.get("var_p", values.get("eps"))
    assumed = False
    stats = []
    for var, key in ((var_x, "abs_dev_x"), (var_p, "abs_dev_p")):
        if key in values:
            stats.append(InferenceStats(var, values[key]))
        else:
            stats.append(InferenceStats.gaussian(math.sqrt(var)))
            assumed = True
    return stats[0], stats[1], assumed


@dataclass
class AnalysisConfig:
    inputs: list[str] = field(default_factory=list)
    output: str | None = None
    bins: int = 100
    span: float = 5.0
    bessel: bool = False
    deltas: list[float] = field(default_factory=default_deltas)
    jx_mean: float | None = None
    lo_intensity: float | None = None
    units: str | None = None
    gaussian: bool = False
    summary: dict | None = None
    seed: int | None = None


def _stats_dict(s: InferenceStats) -> dict:
    return {"var_inf": s.var_inf, "abs_dev": s.abs_dev, "n_effective": s.n_effective}


def _schwinger_config(cfg: AnalysisConfig, table: RecordTable | None) -> tuple[SchwingerConfig, str]:
    side = table.sidecar if table is not None else {}
    jx, source = cfg.jx_mean, "flag"
    if jx is None and side.get("jx_mean") is not None:
        jx, source = float(side["jx_mean"]), "sidecar"
    if jx is None and table is not None and table.counts is not None:
        jx, source = estimate_jx_mean(table.counts, "b"), "counts"
    lo = cfg.lo_intensity if cfg.lo_intensity is not None else side.get("lo_intensity")
    if jx is None and lo is not None:
        jx, source = float(lo) / 2.0, "lo_intensity"
    if jx is None:
        raise InsufficientData("particle-unit data need --jx-mean, --lo-intensity or count columns")
    lo = float(lo) if lo is not None else 2.0 * jx
    return SchwingerConfig(jx, lo), source


def analyze(cfg: AnalysisConfig) -> dict:
    """Run the analysis and return the report as a plain dict."""
    deltas = sorted(set(cfg.deltas))
    metadata = {"tool": TOOL, "version": __version__}
    resolved = {k: v for k, v in asdict(cfg).items() if k not in ("output",)}
    resolved["deltas"] = deltas
    table = None
    if cfg.summary is not None:
        sx, sp, assumed = summary_stats(cfg.summary)
        gaussian = cfg.gaussian or assumed
        units = cfg.units or "quadrature"
        raw = (sx, sp)
        inputs = []
        n_samples = {"X": 0, "P": 0}
    else:
        if not cfg.inputs:
            raise InsufficientData("no input records (use --input or --from-summary)")
        table = read_records(cfg.inputs)
        units = cfg.units or table.units
        gaussian = cfg.gaussian
        policy = BinningPolicy.uniform(cfg.bins, cfg.span)
        stats, n_samples = {}, {}
        for setting in (Setting.X, Setting.P):
            a, b = table.select(setting)
            if a.size < 2:
                raise InsufficientData(f"{a.size} record(s) at ({setting.value}, {setting.value}); need >= 2")
            stats[setting] = inference_stats(JointDistribution.from_samples(a, b, policy), bessel=cfg.bessel)
            n_samples[setting.value] = int(a.size)
        raw = (stats[Setting.X], stats[Setting.P])
        sx, sp = raw
        inputs = table.sources
    schwinger = None
    if units == "particles":
        schwinger, jx_source = _schwinger_config(cfg, table)
        sx, sp = schwinger_normalize(raw[0], raw[1], schwinger)
        resolved["jx_mean"] = schwinger.jx_mean
        resolved["lo_intensity"] = schwinger.lo_intensity
        resolved["jx_mean_source"] = jx_source
    elif cfg.jx_mean is not None or cfg.lo_intensity is not None:
        # quadrature-unit data: the readout scale only converts delta to particles
        schwinger, _ = _schwinger_config(cfg, None)
        resolved["jx_mean"] = schwinger.jx_mean
        resolved["lo_intensity"] = schwinger.lo_intensity
    resolved["units"] = units
    resolved["gaussian"] = bool(gaussian)

    report = build_report(sx, sp, deltas, gaussian=gaussian, schwinger=schwinger, metadata=metadata)
    out = report.to_dict()
    if schwinger is not None:
        for row in out["epsilon_delta"]:
            row["delta_j"] = row["delta"] * math.sqrt(schwinger.spin_shot_noise)
        if report.critical_delta is not None:
            # alternative readout-scale convention: LO particle number times delta
            out["delta_times_lo"] = report.critical_delta * schwinger.lo_intensity
    out.update(
        stats={"X": _stats_dict(sx), "P": _stats_dict(sp)},
        raw_stats={"X": _stats_dict(raw[0]), "P": _stats_dict(raw[1])},
        n_samples=n_samples,
        inputs=inputs,
        config=resolved,
        verdict={
            "epr_paradox": report.epr_paradox,
            "delta_scopic_nonlocal": any(v for _, v in report.verdicts()),
            "max_nonlocal_delta": max((d for d, v in report.verdicts() if v), default=None),
        },
    )
    return out


def certify_report(D: float, table_path=None) -> dict:
    path = Path(table_path) if table_path else default_table_path()
    table = read_table_csv(path)
    result = certify(D, table)
    out = result.to_dict()
    by_n0 = {row.n0: row.d_value for row in table}
    out["entangled"] = result.entangled
    out["table"] = {
        "path": str(path),
        "sha256": file_sha256(path),
        "n0_range": [min(by_n0), max(by_n0)] if by_n0 else None,
        "conventions": sorted({row.convention for row in table}),
        "d_at_n0_min": by_n0.get(result.n0_min),
        "d_at_next_n0": by_n0.get(result.n0_min + 1),
    }
    out["tool"], out["version"] = TOOL, __version__
    return out


def fig1_rows(step: float = 0.01, delta_max: float = FIG1_DELTA_MAX) -> list[tuple[float, float]]:
    if delta_max > DELTA_MAX:
        raise ValidationError(f"delta_max must not exceed {DELTA_MAX:.6f}")
    n = int(math.floor(delta_max / step + 1e-9))
    return [(round(k * step, 12), threshold_epsilon(round(k * step, 12))) for k in range(n + 1)]


def fig2_rows(table_path=None, nbars=(1, 2, 3, 4), n0s=(2, 3, 4, 10)) -> list[tuple[str, float, float]]:
    table = read_table_csv(Path(table_path) if table_path else default_table_path())
    by_n0 = {row.n0: row.d_value for row in table}
    missing = [n for n in n0s if n not in by_n0]
    if missing:
        raise ValidationError(f"D_n0 table lacks n0 = {missing}")
    rows = [("dl_bound", float(n), dl_bound(n)) for n in nbars]
    rows += [("d_n0", float(n), by_n0[n]) for n in n0s]
    return rows


def _emit_csv(header, rows, output):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    if output is None or output == "-":
        click.echo(buf.getvalue(), nl=False)
    else:
        Path(output).write_text(buf.getvalue())


def simulate_records(kind: str, r: float, eta_a: float, eta_b: float, n_th: float, n: int,
                     seed: int, lo_intensity: float | None, workers: int = 1):
    """Simulated records and the sidecar describing them."""
    state = apply_loss(two_mode_squeezed(r), eta_a, eta_b, n_th)
    config = {"kind": kind, "r": r, "eta_a": eta_a, "eta_b": eta_b, "n_th": n_th,
              "n_per_setting": n, "seed": seed, "tool": TOOL, "version": __version__}
    angles_a, angles_b, out_a, out_b, counts = [], [], [], [], []
    for setting in (Setting.X, Setting.P):
        if kind == "quadrature":
            pairs = sample_quadrature_pairs(state, setting, n, seed, workers)
        else:
            hc = HomodyneConfig(lo_intensity, ANGLE[setting], ANGLE[setting], n,
                                seed + (0 if setting is Setting.X else 1))
            cnt = schwinger_counts(state, hc, workers)
            pairs = spin_outcomes(cnt)
            counts.append(cnt)
        angles_a.append(np.full(n, ANGLE[setting]))
        angles_b.append(np.full(n, ANGLE[setting]))
        out_a.append(pairs[:, 0])
        out_b.append(pairs[:, 1])
    table = RecordTable(np.concatenate(angles_a), np.concatenate(angles_b),
                        np.concatenate(out_a), np.concatenate(out_b),
                        counts=np.concatenate(counts) if counts else None)
    if kind == "quadrature":
        config["units"] = "quadrature"
    else:
        config.update(units="particles", lo_intensity=lo_intensity,
                      jx_mean=estimate_jx_mean(table.counts, "b"),
                      seeds={"X": seed, "P": seed + 1})
    return table, config


# ---------------------------------------------------------------- click layer


def _fail(exc: Exception):
    code = getattr(exc, "exit_code", 3 if isinstance(exc, ArithmeticError) else 2)
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _load_config(ctx, param, value):
    if value is None:
        return None
    try:
        data = json.loads(Path(value).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.BadParameter(f"cannot read config: {exc}") from None
    if not isinstance(data, dict):
        raise click.BadParameter("config must be a JSON object")
    commands = ctx.command.commands
    nested = {k: v for k, v in data.items() if k in commands}
    flat = {k: v for k, v in data.items() if k not in commands}
    default_map, known = {}, set()
    for name, cmd in commands.items():
        # config keys mirror the flags: "--from-summary" or "from_summary" both reach param "summary"
        alias = {}
        for param in cmd.params:
            alias[param.name] = param.name
            for opt in param.opts:
                alias[opt.lstrip("-").replace("-", "_")] = param.name
        known.update(alias)
        unknown = [k for k in nested.get(name, {}) if k.lstrip("-").replace("-", "_") not in alias]
        if unknown:
            raise click.BadParameter(f"unknown {name} option(s) in config: {unknown}")
        merged = {**flat, **nested.get(name, {})}
        default_map[name] = {alias[k.lstrip("-").replace("-", "_")]: v for k, v in merged.items()
                             if k.lstrip("-").replace("-", "_") in alias}
    stray = [k for k in flat if k.lstrip("-").replace("-", "_") not in known]
    if stray:
        raise click.BadParameter(f"unknown option(s) in config: {stray}")
    ctx.default_map = default_map
    return value


@click.group()
@click.version_option(__version__, prog_name=TOOL)
@click.option("--config", type=click.Path(dir_okay=False), callback=_load_config, is_eager=True,
              expose_value=False, help="JSON file of option defaults; flags override it.")
def main():
    """delta-scopic EPR steering analysis and boson-number certification."""


@main.command("analyze")
@click.option("--input", "inputs", multiple=True, type=click.Path(), help="Record CSV (repeatable).")
@click.option("--output", "-o", default=None, help="Report path (default stdout).")
@click.option("--bins", default=100, show_default=True, type=click.IntRange(min=1))
@click.option("--span", default=5.0, show_default=True, type=float, help="Binned half-range in s.d.")
@click.option("--bessel", is_flag=True, help="Per-bin n/(n-1) variance correction.")
@click.option("--delta", "deltas", multiple=True, help="delta value or start:stop:step (repeatable).")
@click.option("--jx-mean", type=float, default=None, help="|<J_B^X>| in particles.")
@click.option("--lo-intensity", type=float, default=None, help="Mean LO particle number.")
@click.option("--units", type=click.Choice(["quadrature", "particles"]), default=None,
              help="Override the unit system declared in the sidecar.")
@click.option("--seed", type=int, default=None, help="Recorded for provenance; analysis is deterministic.")
@click.option("--from-summary", "summary", multiple=True,
              help="Summary statistics, e.g. 'eps=0.176' or 'eps=0.42 abs_dev_x=0.5'.")
@click.option("--gaussian", is_flag=True, help="Use the Gaussian closed form.")
def analyze_cmd(inputs, output, bins, span, bessel, deltas, jx_mean, lo_intensity, units, seed,
                summary, gaussian):
    """Compute epsilon, epsilon_delta and the critical delta."""
    try:
        cfg = AnalysisConfig(
            inputs=list(inputs), output=output, bins=bins, span=span, bessel=bessel,
            deltas=parse_deltas(deltas) if deltas else default_deltas(),
            jx_mean=jx_mean, lo_intensity=lo_intensity, units=units, gaussian=gaussian,
            summary=parse_summary(summary) if summary else None, seed=seed,
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = analyze(cfg)
        report["warnings"] = [str(w.message) for w in caught]
        for msg in report["warnings"]:
            click.echo(f"warning: {msg}", err=True)
        write_json(report, output)
    except (MesoEPRError, ArithmeticError, ValueError) as exc:
        _fail(exc)


@main.command("certify")
@click.argument("d_value", type=float)
@click.option("--table", "table_path", default=None, type=click.Path(), help="D_n0 table CSV.")
@click.option("--output", "-o", default=None)
def certify_cmd(d_value, table_path, output):
    """Boson-number lower bounds from a measured Duan parameter D."""
    try:
        write_json(certify_report(d_value, table_path), output)
    except (MesoEPRError, ArithmeticError, ValueError) as exc:
        _fail(exc)


@main.command("curves")
@click.argument("kind", type=click.Choice(["fig1_threshold", "fig2_bounds"]))
@click.option("--step", default=0.01, show_default=True, type=float, help="delta grid step (fig1).")
@click.option("--delta-max", default=FIG1_DELTA_MAX, show_default=True, type=float)
@click.option("--table", "table_path", default=None, type=click.Path())
@click.option("--output", "-o", default=None)
def curves_cmd(kind, step, delta_max, table_path, output):
    """Emit curve data: the threshold line or the D bound lines."""
    try:
        if kind == "fig1_threshold":
            if not step > 0:
                raise ValidationError("step must be positive")
            _emit_csv(["delta", "epsilon_max"], fig1_rows(step, delta_max), output)
        else:
            _emit_csv(["curve", "parameter", "d_value"], fig2_rows(table_path), output)
    except (MesoEPRError, ArithmeticError, ValueError) as exc:
        _fail(exc)


@main.command("simulate")
@click.argument("kind", type=click.Choice(["quadrature", "schwinger"]))
@click.option("--r", "r", default=1.0, show_default=True, type=float, help="Squeeze parameter.")
@click.option("--eta-a", default=1.0, show_default=True, type=float)
@click.option("--eta-b", default=1.0, show_default=True, type=float)
@click.option("--n-th", default=0.0, show_default=True, type=float)
@click.option("--n", "n", default=10000, show_default=True, type=click.IntRange(min=1),
              help="Records (shots) per setting pair.")
@click.option("--seed", default=0, show_default=True, type=click.IntRange(min=0))
@click.option("--lo-intensity", default=1e6, show_default=True, type=float)
@click.option("--workers", default=1, show_default=True, type=click.IntRange(min=1))
@click.option("--output", "-o", required=True, type=click.Path(dir_okay=False))
def simulate_cmd(kind, r, eta_a, eta_b, n_th, n, seed, lo_intensity, workers, output):
    """Write simulated records plus a sidecar JSON with the resolved config."""
    try:
        table, config = simulate_records(kind, r, eta_a, eta_b, n_th, n, seed,
                                         lo_intensity if kind == "schwinger" else None, workers)
        side = write_records(output, table, config)
        click.echo(f"wrote {len(table)} records to {output} (config {side})", err=True)
    except (MesoEPRError, ArithmeticError, ValueError) as exc:
        _fail(exc)


@main.command("fock-table")
@click.option("--n0-max", default=14, show_default=True, type=click.IntRange(min=1))
@click.option("--cutoff", default=None, type=click.IntRange(min=1))
@click.option("--convention", default="inclusive", show_default=True,
              type=click.Choice([c.value for c in SupportConvention]))
@click.option("--output", "-o", default=None, help="CSV path (default stdout).")
def fock_table_cmd(n0_max, cutoff, convention, output):
    """Regenerate the D_n0 table."""
    try:
        rows = duan_table(range(1, n0_max + 1), cutoff, convention)
        if output is None or output == "-":
            buf = io.StringIO()
            write_table_csv(rows, buf)
            click.echo(buf.getvalue(), nl=False)
        else:
            write_table_csv(rows, output)
    except (MesoEPRError, ArithmeticError, ValueError) as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
