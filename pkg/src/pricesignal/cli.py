"""Batch front end: read a JSON run config, solve/verify/sweep/variant, write CSV and text reports.

Exit status: 0 success, 1 unreadable config, 2 parameter validation failure, 3 structural error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .consumer import StructuralError
from .equilibrium import (
    EquilibriumCertificate,
    Profile,
    SearchOptions,
    apply_ic,
    default_workers,
    find_equilibria,
    verify_pbe,
)
from .market import (
    M_STAR_CHECK,
    MONOTONE_CHECK,
    TOL_CMP,
    TOL_INT,
    TOL_ROOT,
    MarketParams,
    ParameterError,
    ValidationReport,
    validate,
)
from .variants import VariantSpec, diamond_baseline, low_monopoly_variant, observable_equilibria

log = logging.getLogger("pricesignal")

COMMANDS = ("solve", "verify", "sweep", "variant")
SWEEPABLE = ("mu0", "c_learn", "m", "k")
COLUMNS = ("firm_symmetric", "P_G", "P_B", "pi_G", "pi_B", "D_G", "D_B", "pbe", "ic", "witness_price")
SUMMARY_COLUMNS = ("value", "n_pbe", "n_ic", "P_G", "P_B", "skipped")
NA = "-"

EXIT_OK, EXIT_CONFIG, EXIT_INVALID, EXIT_STRUCTURAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    market: MarketParams
    command: str
    output_dir: Path
    workers: int = 1
    tol_cmp: float = TOL_CMP
    tol_root: float = TOL_ROOT
    tol_int: float = TOL_INT
    sweep: tuple[str, tuple[float, ...]] | None = None
    profile: dict | None = None
    variant: str | None = None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: top level must be a JSON object")
        known = {"market", "command", "output_dir", "workers", "tolerances", "sweep", "profile", "variant"}
        for key in d:
            if key not in known:
                raise ConfigError(f"{key}: unknown config field")
        for key in ("market", "command"):
            if key not in d:
                raise ConfigError(f"{key}: missing required field")
        command = d["command"]
        if command not in COMMANDS:
            raise ConfigError(f"command: must be one of {', '.join(COMMANDS)}")
        try:
            market = MarketParams.from_dict(d["market"])
        except ParameterError as e:
            raise ConfigError(f"market.{e}") from e

        sweep = None
        if "sweep" in d:
            if command != "sweep":
                raise ConfigError("sweep: only allowed with command 'sweep'")
            s = d["sweep"]
            if not isinstance(s, dict) or "parameter" not in s or "values" not in s:
                raise ConfigError("sweep: needs 'parameter' and 'values'")
            if s["parameter"] not in SWEEPABLE:
                raise ConfigError(f"sweep.parameter: must be one of {', '.join(SWEEPABLE)}")
            vals = s["values"]
            if not isinstance(vals, list) or not vals:
                raise ConfigError("sweep.values: empty value list")
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
                raise ConfigError("sweep.values: values must be numbers")
            sweep = (s["parameter"], tuple(vals))
        elif command == "sweep":
            raise ConfigError("sweep: missing for command 'sweep'")

        profile = d.get("profile")
        if profile is not None and command != "verify":
            raise ConfigError("profile: only allowed with command 'verify'")
        if command == "verify" and profile is None:
            raise ConfigError("profile: missing for command 'verify'")

        variant = d.get("variant")
        if variant is not None and command != "variant":
            raise ConfigError("variant: only allowed with command 'variant'")
        if command == "variant":
            try:
                VariantSpec(variant)
            except ValueError as e:
                names = ", ".join(v.value for v in VariantSpec)
                raise ConfigError(f"variant: must be one of {names}") from e

        workers = d.get("workers", 1)
        if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
            raise ConfigError("workers: must be a positive integer")
        tols = d.get("tolerances", {})
        if not isinstance(tols, dict):
            raise ConfigError("tolerances: must be an object")
        out = {}
        for key in tols:
            if key not in ("tol_cmp", "tol_root", "tol_int"):
                raise ConfigError(f"tolerances.{key}: unknown tolerance")
            v = tols[key]
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v) or v < 0:
                raise ConfigError(f"tolerances.{key}: must be a non-negative number")
            out[key] = float(v)

        od = Path(d.get("output_dir", "out"))
        if base_dir is not None and not od.is_absolute():
            od = base_dir / od
        return cls(market, command, od, workers, sweep=sweep, profile=profile, variant=variant, **out)

    def result_fields(self) -> dict:
        """Everything that can change a result; workers and output_dir are excluded."""
        return {
            "command": self.command,
            "market": self.market.to_dict(),
            "sweep": None if self.sweep is None else {"parameter": self.sweep[0], "values": list(self.sweep[1])},
            "profile": self.profile,
            "variant": self.variant,
            "tolerances": {"tol_cmp": self.tol_cmp, "tol_root": self.tol_root, "tol_int": self.tol_int},
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.result_fields(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def options(self) -> SearchOptions:
        return SearchOptions(workers=self.workers, tol_cmp=self.tol_cmp, tol_int=self.tol_int)


# -- formatting ----------------------------------------------------------------


def fmt(x) -> str:
    """Locale-free 12-significant-digit rendering."""
    if x is None:
        return NA
    if isinstance(x, str):
        return x
    x = float(x)
    if x == 0.0:
        return "0"
    return format(x, ".12g")


def _support_prices(params: MarketParams, atoms) -> str:
    if not atoms:
        return NA
    return ";".join(fmt(params.price(i)) for i, _ in atoms)


def certificate_rows(params: MarketParams, cert) -> list[list[str]]:
    """One row per symmetric certificate, one per firm otherwise."""
    rows = []
    profile = getattr(cert, "profile", None)
    symmetric = profile is None or profile.symmetric
    for firm in (0,) if symmetric else (0, 1):
        if profile is not None:
            s = profile.strategies[firm]
            pg, pb = _support_prices(params, s.good), _support_prices(params, s.bad)
        else:
            g, b = cert.prices(firm)
            pg = NA if g is None else fmt(params.price(g))
            pb = NA if b is None else fmt(params.price(b))
        witness = NA
        if getattr(cert, "ic_witness", None) is not None:
            witness = fmt(cert.ic_witness.price)
        elif not cert.pbe_pass:
            w = getattr(cert, "pbe_witness", None)
            if w is not None:
                witness = fmt(params.price(w[2]))
        ic = NA if cert.ic_pass is None else ("pass" if cert.ic_pass else "fail")
        rows.append(
            [
                "yes" if symmetric else str(firm),
                pg,
                pb,
                fmt(cert.profits.get((firm, "G"))),
                fmt(cert.profits.get((firm, "B"))),
                fmt(cert.demands.get((firm, "G"))),
                fmt(cert.demands.get((firm, "B"))),
                "pass" if cert.pbe_pass else "fail",
                ic,
                witness,
            ]
        )
    return rows


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_bundle(cfg: RunConfig, params: MarketParams, out: Path, certs, report: ValidationReport, extra=(), elapsed=0.0):
    out.mkdir(parents=True, exist_ok=True)
    rows = [r for c in certs for r in certificate_rows(params, c)]
    (out / "equilibria.csv").write_text(_csv_text(COLUMNS, rows))
    echo = {"version": __version__, "config_hash": cfg.config_hash(), **cfg.result_fields(), "market": params.to_dict()}
    (out / "params.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    n_ic = sum(1 for c in certs if c.ic_pass)
    lines = [
        f"pricesignal {__version__}  config {cfg.config_hash()}  command {cfg.command}",
        f"m* = {fmt(report.m_star)}",
        f"P_G^m = {fmt(report.monopoly_G)}",
        "",
        "validation:",
        report.table(),
        "",
        f"certificates: {len(certs)}  pbe pass: {sum(1 for c in certs if c.pbe_pass)}  ic pass: {n_ic}",
        *extra,
        f"elapsed: {elapsed:.2f}s",
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n")


def write_failure(cfg: RunConfig, out: Path, report: ValidationReport, params: MarketParams):
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        f"pricesignal {__version__}  config {cfg.config_hash()}  command {cfg.command}",
        "validation FAILED: " + ", ".join(report.failures),
        f"m* = {fmt(report.m_star)}",
        f"P_G^m = {fmt(report.monopoly_G)}",
        "",
        report.table(),
    ]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    (out / "params.json").write_text(json.dumps(params.to_dict(), indent=2, sort_keys=True) + "\n")


# -- commands ------------------------------------------------------------------


def _demotions(cfg: RunConfig) -> tuple[str, ...]:
    if cfg.command != "variant":
        return ()
    v = VariantSpec(cfg.variant)
    if v is VariantSpec.OBSERVABLE:
        return (M_STAR_CHECK,)
    if v is VariantSpec.LOW_MONOPOLY:
        return (MONOTONE_CHECK,)
    return (M_STAR_CHECK, MONOTONE_CHECK)


def _solve(cfg: RunConfig, params: MarketParams):
    return find_equilibria(params, cfg.options()), ()


def _verify(cfg: RunConfig, params: MarketParams):
    try:
        profile = Profile.from_dict(cfg.profile, params)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"profile: {e}") from e
    try:
        profile.check(params)
    except ValueError as e:
        raise ConfigError(f"profile: {e}") from e
    cert: EquilibriumCertificate = verify_pbe(params, profile, cfg.tol_cmp, tol_int=cfg.tol_int)
    if cert.pbe_pass:
        apply_ic(params, cert, cfg.tol_cmp)
    extra = [f"consumer rule violations: {cert.consumer_violations}"]
    for (f, t), g in sorted(cert.gaps.items()):
        extra.append(f"firm {f} type {t}: profit {fmt(cert.profits[(f, t)])} gap {fmt(g)}")
    return [cert], extra


def _variant(cfg: RunConfig, params: MarketParams):
    v = VariantSpec(cfg.variant)
    if v is VariantSpec.OBSERVABLE:
        r = observable_equilibria(params, cfg.options())
        extra = [f"good-type price bound: {fmt(r.bound)}  holds: {r.bound_ok}"]
        if not r.bound_ok:
            extra.append(f"bound violated by {r.violations}")
        return r.certificates, extra
    if v is VariantSpec.DIAMOND:
        good, bad = diamond_baseline(params, True, cfg.tol_cmp), diamond_baseline(params, False, cfg.tol_cmp)
        extra = [
            "good-type market prices: " + ", ".join(fmt(params.price(c.g)) for c in good),
            "bad-type market prices: " + ", ".join(fmt(params.price(c.b)) for c in bad),
        ]
        return good + bad, extra
    r = low_monopoly_variant(params, cfg.options())
    return r.certificates, [f"min(P_G^m, c_B) = {fmt(r.target_G)}"]


def swept_params(params: MarketParams, name: str, value: float) -> MarketParams:
    """Parameters for one sweep value; an m sweep keeps c_B and the grid top fixed."""
    if name == "mu0":
        return params.replace(mu0=float(value))
    if name == "c_learn":
        return params.replace(c_learn=float(value))
    if name == "k":
        if float(value) != int(value):
            raise ParameterError("k: must be an integer")
        return params.replace(k=int(value))
    m = float(value)
    if m <= 0:
        raise ParameterError("m: must be positive")
    k = round(params.c_B / m)
    if abs(k * m - params.c_B) > 1e-9:
        raise ParameterError("m: c_B is not a multiple of m")
    N = math.ceil(params.N * params.m / m - 1e-9)
    return params.replace(m=m, k=k, N=N)


def _sweep(cfg: RunConfig, base: MarketParams, out: Path) -> int:
    name, values = cfg.sweep
    rows = []
    for value in values:
        sub = out / f"{name}={fmt(value)}"
        try:
            params = swept_params(base, name, value)
        except ParameterError as e:
            rows.append([fmt(value), NA, NA, NA, NA, str(e)])
            continue
        report = validate(params)
        if not report.passed:
            write_failure(cfg, sub, report, params)
            rows.append([fmt(value), NA, NA, NA, NA, ";".join(report.failures)])
            continue
        t0 = time.perf_counter()
        certs = find_equilibria(params, cfg.options())
        write_bundle(cfg, params, sub, certs, report, elapsed=time.perf_counter() - t0)
        ic = [c for c in certs if c.ic_pass]
        pg = ";".join(fmt(params.price(c.prices()[0])) for c in ic) or NA
        pb = ";".join(fmt(params.price(c.prices()[1])) for c in ic) or NA
        rows.append([fmt(value), str(len(certs)), str(len(ic)), pg, pb, ""])
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(_csv_text(SUMMARY_COLUMNS, rows))
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    out = cfg.output_dir
    params = cfg.market
    if cfg.command == "sweep":
        return _sweep(cfg, params, out)
    report = validate(params, demote=_demotions(cfg))
    if not report.passed:
        write_failure(cfg, out, report, params)
        print("validation failed: " + ", ".join(report.failures), file=sys.stderr)
        return EXIT_INVALID
    t0 = time.perf_counter()
    handler = {"solve": _solve, "verify": _verify, "variant": _variant}[cfg.command]
    certs, extra = handler(cfg, params)
    write_bundle(cfg, params, out, certs, report, extra, time.perf_counter() - t0)
    return EXIT_OK


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigError(f"config: cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: invalid JSON at line {e.lineno}: {e.msg}") from e


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pricesignal", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="JSON run config")
    ap.add_argument("--out", help="output directory (overrides output_dir in the config)")
    ap.add_argument("--workers", type=int, help="worker processes (overrides PRICESIGNAL_WORKERS and the config)")
    ap.add_argument("--tol-cmp", type=float, help="profit comparison tolerance")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file plus command-line overrides; workers: flag, then PRICESIGNAL_WORKERS, then config."""
    cfg = RunConfig.from_dict(load_config(args.config), Path(args.config).resolve().parent)
    if args.out:
        cfg.output_dir = Path(args.out)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("workers: must be a positive integer")
        cfg.workers = args.workers
    elif os.environ.get("PRICESIGNAL_WORKERS"):
        try:
            cfg.workers = max(1, default_workers())
        except ValueError as e:
            raise ConfigError("PRICESIGNAL_WORKERS: must be an integer") from e
    if args.tol_cmp is not None:
        if not args.tol_cmp >= 0:
            raise ConfigError("tol_cmp: must be non-negative")
        cfg.tol_cmp = args.tol_cmp
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return run(resolve_config(args))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StructuralError as e:
        print(f"structural error: {e}", file=sys.stderr)
        return EXIT_STRUCTURAL


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
