"""Command-line pipeline: simulate, analyze, optimize, table2.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical or
convergence error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import arrivals_store
from .arrivals_store import IntegrityError
from .config import (
    ConfigError,
    LinkConfig,
    canonical_text,
    config_hash,
    default_config,
    load_config,
    parse_config,
    with_overrides,
)
from .gate_optimizer import DesignRow, sweep_gate, table_row, write_sweep_csv
from .link_analysis import (
    ChannelSelection,
    build_cdf,
    select_bit_period,
    select_fov,
    write_cdf_csv,
)
from .medium_optics import ConvergenceError
from .qber_model import EnvironmentSpec, ReceiverSpec
from .transport import run_campaign

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

#: design-table default matrix: (beam radius cm, max divergence deg, distance m)
DEFAULT_MATRIX = [
    (r0, theta, L)
    for r0, theta in [(0.3, 20.0), (3.0, 20.0), (30.0, 20.0), (0.3, 0.0), (0.3, 45.0)]
    for L in (10.0, 20.0, 30.0, 40.0)
]


def _add_campaign_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="override campaign.seed")
    p.add_argument("--photons", type=int, default=None, help="override campaign.n_photons")
    p.add_argument("--workers", type=int, default=None, help="override campaign.workers")


def _parse_gate_grid(spec: str) -> np.ndarray:
    """Gate grid in picoseconds: 'a,b,c' or 'start:stop:step'."""
    try:
        if ":" in spec:
            start, stop, step = (float(v) for v in spec.split(":"))
            ps = np.arange(start, stop + step * 0.5, step)
        else:
            ps = np.array([float(v) for v in spec.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad --gate-grid {spec!r}: {exc}") from exc
    if ps.size == 0 or np.any(ps <= 0):
        raise ConfigError(f"--gate-grid must contain positive picosecond values: {spec!r}")
    return ps * 1e-12


def _load_arrivals(path: str) -> arrivals_store.ArrivalSet:
    arrivals = arrivals_store.load(path)
    print(
        f"loaded {path}: {arrivals.arrived} arrivals of {arrivals.n_photons} photons "
        f"(seed {arrivals.seed})"
    )
    return arrivals


def cmd_simulate(args) -> int:
    config = load_config(args.config) if args.config else default_config()
    config = with_overrides(
        config, n_photons=args.photons, seed=args.seed, workers=args.workers
    )
    if args.dry_run:
        sys.stdout.write(canonical_text(config))
        print(f"# config hash: {config_hash(config)}")
        return EXIT_OK
    started = time.monotonic()
    arrivals = run_campaign(config)
    elapsed = time.monotonic() - started
    arrivals_store.persist(arrivals, args.out)
    rate = arrivals.n_photons / elapsed if elapsed > 0 else float("inf")
    print(f"simulated {arrivals.n_photons} photons in {elapsed:.1f} s ({rate:,.0f}/s)")
    print(
        f"arrived {arrivals.arrived}  absorbed {arrivals.absorbed}  "
        f"escaped {arrivals.escaped}  arrived weight {arrivals.arrived_weight:.6g}"
    )
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    arrivals = _load_arrivals(args.arrivals)
    if arrivals.arrived == 0:
        raise ValueError("arrival set is empty; nothing to analyze")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bp = select_bit_period(arrivals, args.level)
    fov = select_fov(arrivals, args.level)
    print(f"quantile level: {args.level}")
    print(
        f"bit period: raw {bp.raw * 1e9:.6g} ns -> rounded {bp.rounded * 1e9:.6g} ns"
    )
    print(
        f"field of view: raw {math.degrees(fov.raw):.6g} deg -> "
        f"rounded {math.degrees(fov.rounded):.6g} deg"
    )
    delay_cdf = build_cdf(arrivals.delays, arrivals.weights)
    aoa_cdf = build_cdf(arrivals.aoas, arrivals.weights)
    delay_csv = out_dir / "delay_cdf.csv"
    aoa_csv = out_dir / "aoa_cdf.csv"
    write_cdf_csv(delay_cdf, delay_csv)
    write_cdf_csv(aoa_cdf, aoa_csv)
    print(f"wrote {delay_csv} and {aoa_csv}")
    if not args.no_figures:
        from . import figures

        delay_png = out_dir / "delay_cdf.png"
        aoa_png = out_dir / "aoa_cdf.png"
        figures.save_cdf_figure(
            delay_cdf, delay_png, "arrival delay (ns)", "Arrival delay CDF", x_scale=1e9
        )
        figures.save_cdf_figure(
            aoa_cdf,
            aoa_png,
            "angle of arrival (deg)",
            "Angle-of-arrival CDF",
            x_scale=180.0 / math.pi,
        )
        print(f"wrote {delay_png} and {aoa_png}")
    return EXIT_OK


def _selection_for_optimize(args, arrivals) -> ChannelSelection:
    if args.bit_period_ns is not None:
        bit_period = args.bit_period_ns * 1e-9
    else:
        bit_period = select_bit_period(arrivals, args.level).rounded
    if args.fov_deg is not None:
        fov = math.radians(args.fov_deg)
    else:
        fov = select_fov(arrivals, args.level).rounded
    return ChannelSelection(bit_period=bit_period, fov=fov, quantile_level=args.level)


def cmd_optimize(args) -> int:
    arrivals = _load_arrivals(args.arrivals)
    config = parse_config(arrivals.config_text)
    selection = _selection_for_optimize(args, arrivals)
    receiver = config.receiver
    environment = config.environment
    if args.dark_count_rate is not None:
        receiver = ReceiverSpec(
            aperture_diameter=receiver.aperture_diameter,
            filter_width=receiver.filter_width,
            dark_count_rate=args.dark_count_rate,
        )
    if args.surface_irradiance is not None:
        environment = EnvironmentSpec(
            surface_irradiance=args.surface_irradiance,
            diffuse_attenuation=environment.diffuse_attenuation,
            depth=environment.depth,
        )
    grid = _parse_gate_grid(args.gate_grid) if args.gate_grid else None
    result = sweep_gate(
        arrivals,
        selection,
        receiver,
        environment,
        config.transmitter.wavelength,
        grid=grid,
        n_signal=config.transmitter.photons_per_pulse,
        dark_counts_window=config.dark_counts_window,
    )
    print(
        f"selection: bit period {selection.bit_period * 1e9:.6g} ns, "
        f"FoV {math.degrees(selection.fov):.6g} deg"
    )
    print(
        f"optimal gate {result.optimal_gate * 1e12:.6g} ps, "
        f"QBER {result.optimal_qber:.6g}"
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep_csv = out_dir / "gate_sweep.csv"
    write_sweep_csv(result, sweep_csv)
    print(f"wrote {sweep_csv}")
    if not args.no_figures:
        from . import figures

        sweep_png = out_dir / "gate_sweep.png"
        figures.save_sweep_figure(result, sweep_png, "QBER vs gate time")
        print(f"wrote {sweep_png}")
    return EXIT_OK


def _read_matrix(path) -> list[tuple[float, float, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"r0_cm", "theta0_max_deg", "L_m"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ConfigError(
                f"{path}: matrix CSV needs columns r0_cm,theta0_max_deg,L_m"
            )
        rows = []
        for rec in reader:
            try:
                rows.append(
                    (float(rec["r0_cm"]), float(rec["theta0_max_deg"]), float(rec["L_m"]))
                )
            except ValueError as exc:
                raise ConfigError(f"{path}: bad matrix row {rec}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: matrix is empty")
    return rows


def _table_config(r0_cm: float, theta_deg: float, distance: float, args) -> LinkConfig:
    config = default_config(
        link_distance=distance,
        beam_radius=r0_cm / 100.0,
        max_divergence_deg=theta_deg,
    )
    return with_overrides(
        config,
        n_photons=args.photons,
        seed=args.seed,
        workers=args.workers,
        quantile_level=args.level,
    )


def _cached_campaign(config: LinkConfig, cache_dir: Path | None):
    if cache_dir is None:
        return run_campaign(config)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{config_hash(config)}.uqkd"
    if path.exists():
        print(f"  cache hit: {path.name}")
        return arrivals_store.load(path)
    arrivals = run_campaign(config)
    arrivals_store.persist(arrivals, path)
    return arrivals


def cmd_table2(args) -> int:
    matrix = _read_matrix(args.matrix) if args.matrix else DEFAULT_MATRIX
    cache_dir = Path(args.cache_dir) if args.cache_dir else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[dict] = []
    failures: list[tuple[tuple, Exception]] = []
    for r0_cm, theta_deg, distance in matrix:
        label = f"r0={r0_cm:g} cm, div={theta_deg:g} deg, L={distance:g} m"
        print(f"[{len(rows) + len(failures) + 1}/{len(matrix)}] {label}")
        try:
            config = _table_config(r0_cm, theta_deg, distance, args)
            arrivals = _cached_campaign(config, cache_dir)
            row = table_row(config, arrivals=arrivals)
            rows.append(
                {
                    "beam_radius_cm": r0_cm,
                    "max_divergence_deg": theta_deg,
                    "link_distance_m": distance,
                    "row": row,
                    "sweep": row.sweep,
                }
            )
        except Exception as exc:  # keep going; report at the end
            failures.append(((r0_cm, theta_deg, distance), exc))
            print(f"  FAILED: {exc}")
    report = _format_table(rows)
    print(report)
    txt_path = out_dir / "table2.txt"
    csv_path = out_dir / "table2.csv"
    txt_path.write_text(report + "\n")
    _write_table_csv(rows, csv_path)
    print(f"wrote {txt_path} and {csv_path}")
    if rows and not args.no_figures:
        from . import figures

        png_path = out_dir / "table2.png"
        figures.save_table_figure(rows, png_path)
        print(f"wrote {png_path}")
    if failures:
        print(f"{len(failures)} of {len(matrix)} rows failed", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _format_table(rows: list[dict]) -> str:
    header = (
        f"{'r0 (cm)':>8} {'div (deg)':>10} {'L (m)':>6} "
        f"{'bit period (ns)':>16} {'FoV (deg)':>10} {'gate (ps)':>10} {'QBER':>10}"
    )
    lines = [header, "-" * len(header)]
    for entry in rows:
        row: DesignRow = entry["row"]
        lines.append(
            f"{entry['beam_radius_cm']:>8g} {entry['max_divergence_deg']:>10g} "
            f"{entry['link_distance_m']:>6g} {row.bit_period * 1e9:>16g} "
            f"{math.degrees(row.fov):>10.0f} {row.optimal_gate * 1e12:>10.0f} "
            f"{row.optimal_qber:>10.2e}"
        )
    return "\n".join(lines)


def _write_table_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(
            "r0_cm,theta0_max_deg,L_m,bit_period_ns,bit_period_raw_ns,"
            "fov_deg,fov_raw_deg,gate_ps,qber\n"
        )
        for entry in rows:
            row: DesignRow = entry["row"]
            fh.write(
                f"{entry['beam_radius_cm']:g},{entry['max_divergence_deg']:g},"
                f"{entry['link_distance_m']:g},{row.bit_period * 1e9:.17g},"
                f"{row.bit_period_raw * 1e9:.17g},{math.degrees(row.fov):.17g},"
                f"{math.degrees(row.fov_raw):.17g},{row.optimal_gate * 1e12:.17g},"
                f"{row.optimal_qber:.17g}\n"
            )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uwqkd",
        description="Underwater photon-transport Monte Carlo and QKD link analyzer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a photon campaign and persist arrivals")
    p_sim.add_argument("--config", help="config file (flat key = value); defaults used if omitted")
    p_sim.add_argument("--out", required=False, default="arrivals.uqkd", help="output arrival file")
    p_sim.add_argument("--dry-run", action="store_true", help="print resolved config and exit")
    _add_campaign_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_ana = sub.add_parser("analyze", help="bit period / FoV selection and CDF reports")
    p_ana.add_argument("--arrivals", required=True, help="arrival file from simulate")
    p_ana.add_argument("--level", type=float, default=0.999, help="quantile level")
    p_ana.add_argument("--out-dir", default=".", help="directory for CSV/PNG reports")
    p_ana.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_ana.set_defaults(func=cmd_analyze)

    p_opt = sub.add_parser("optimize", help="sweep gate time against an arrival set")
    p_opt.add_argument("--arrivals", required=True)
    p_opt.add_argument("--level", type=float, default=0.999)
    p_opt.add_argument("--gate-grid", help="picoseconds: 'a,b,c' or 'start:stop:step'")
    p_opt.add_argument("--bit-period-ns", type=float, help="pin the bit period (ns)")
    p_opt.add_argument("--fov-deg", type=float, help="pin the field of view (deg)")
    p_opt.add_argument(
        "--surface-irradiance", type=float, help="override environment irradiance (W/m^2)"
    )
    p_opt.add_argument("--dark-count-rate", type=float, help="override dark counts (Hz)")
    p_opt.add_argument("--out-dir", default=".")
    p_opt.add_argument("--no-figures", action="store_true")
    p_opt.set_defaults(func=cmd_optimize)

    p_tab = sub.add_parser("table2", help="full design table over a config matrix")
    p_tab.add_argument("--matrix", help="CSV with columns r0_cm,theta0_max_deg,L_m")
    p_tab.add_argument("--level", type=float, default=None, help="quantile level")
    p_tab.add_argument("--cache-dir", help="reuse campaigns keyed by config hash")
    p_tab.add_argument("--out-dir", default=".")
    p_tab.add_argument("--no-figures", action="store_true")
    _add_campaign_flags(p_tab)
    p_tab.set_defaults(func=cmd_table2)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, IntegrityError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConvergenceError, ValueError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
