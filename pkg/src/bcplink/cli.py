"""``bcplink`` command line.

Exit codes: 0 success, 2 usage, 3 parse error, 4 physics (no match, K < 1),
5 I/O.  All numeric flags are SI base units.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import tempfile
from pathlib import Path

from . import channel as ch
from . import dielectric, explore, matching, touchstone
from .config import ConfigError
from .network import s_to_abcd

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_PHYSICS, EXIT_IO = 0, 2, 3, 4, 5
ENV_MATERIALS = "BCPLINK_MATERIALS"


class UsageError(Exception):
    pass


def atomic_write(path: Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _materials(args) -> dielectric.MaterialDb:
    path = args.materials or os.environ.get(ENV_MATERIALS)
    if not path:
        return dielectric.default_materials()
    return dielectric.load_material_db(Path(path).read_text())


def _stack(args) -> ch.TissueLayerStack:
    return explore.resolve_stack(args.stack)


def _geometry(path: str) -> ch.LinkGeometry:
    return ch.load_geometry(Path(path).read_text())


def _load(text: str) -> matching.LoadModel:
    try:
        nums = [float(p) for p in text.split(",")]
        if len(nums) not in (1, 2):
            raise ValueError
        return matching.LoadModel(*nums)
    except ValueError:
        raise UsageError(f"--load expects R or R,C with positive values, got {text!r}") from None


def _emit(rows: list[list], header: list[str], fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    else:
        widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) for i, h in enumerate(header)]
        out.write("  ".join(str(h).ljust(w) for h, w in zip(header, widths)).rstrip() + "\n")
        for r in rows:
            out.write("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")


def _band_note(f: float) -> None:
    if not dielectric.in_band(f):
        lo, hi = dielectric.VALID_BAND
        print(f"warning: {f:g} Hz is outside the tissue-model band [{lo:g}, {hi:g}] Hz", file=sys.stderr)


def cmd_materials(args) -> int:
    db = _materials(args)
    if args.action == "list":
        _emit([[n] for n in db], ["material"], args.format)
        return EXIT_OK
    if not args.name:
        raise UsageError("materials show needs a material name")
    try:
        model = db[args.name]
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    rows = []
    for f in args.freq or [1.25e9]:
        if not f > 0:
            raise UsageError("--freq must be positive")
        _band_note(f)
        eps = dielectric.complex_permittivity(model, f)
        rows.append([repr(f), repr(eps.real), repr(eps.imag), repr(dielectric.conductivity(model, f))])
    _emit(rows, ["f_hz", "eps_real", "eps_imag", "sigma_s_per_m"], args.format)
    return EXIT_OK


def _channel_at(args, f: float):
    if bool(args.geom) == bool(args.s2p):
        raise UsageError("give exactly one of --geom or --s2p")
    if args.geom:
        return ch.channel_two_port(_geometry(args.geom), _stack(args), _materials(args), f)
    table = touchstone.parse_touchstone(Path(args.s2p).read_text())
    return s_to_abcd(touchstone.table_to_channel(table, f))


def cmd_match(args) -> int:
    f0 = args.freq
    if not f0 > 0:
        raise UsageError("--freq must be positive")
    _band_note(f0)
    load = _load(args.load)
    zl = matching.load_impedance(load, f0)
    t = _channel_at(args, f0)
    sol = matching.match_link(t, zl, args.z_source, args.embedding)
    report = matching.match_report_csv([sol])
    if args.output:
        atomic_write(Path(args.output), report)
    if args.format == "csv":
        sys.stdout.write(report)
    else:
        print(f"f0            {f0:.6g} Hz")
        print(f"Z_load        {zl.real:.2f} {'-' if zl.imag < 0 else '+'} j{abs(zl.imag):.2f} Ohm")
        print(f"embedding     {sol.embedding} ({sol.convention} S-parameters)")
        print(f"zs_opt        {sol.zs_opt:.6g} Ohm")
        print(f"zl_opt        {sol.zl_opt:.6g} Ohm")
        for name, sec in (("TX IMN", sol.tx_imn), ("RX IMN", sol.rx_imn)):
            if sec is None:
                print(f"{name:<13} none")
            else:
                print(f"{name:<13} {sec.topology}: series {sec.series_elem.kind} {sec.series_elem.value:.6g}, "
                      f"shunt {sec.shunt_elem.kind} {sec.shunt_elem.value:.6g}")
        print(f"S11 residual  {sol.residual_s11_db:.1f} dB")
        print(f"S22 residual  {sol.residual_s22_db:.1f} dB")
        print(f"matched PTE   {sol.matched_pte:.6g} %")
        for note in sol.notes:
            print(f"note          {note}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec_path = Path(args.spec)
    spec = explore.load_sweep_spec(spec_path.read_text(), spec_path.parent)
    result = explore.run_sweep(spec, _materials(args), workers=args.workers)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = spec_path.stem
    atomic_write(out_dir / f"{stem}.csv", explore.emit_csv(result))
    if args.svg:
        atomic_write(out_dir / f"{stem}.svg", explore.emit_svg(result))
    rows = [[repr(c.value), repr(c.f_peak), repr(c.pte_peak)] for c in result.curves]
    _emit(rows, ["swept_value", "f_peak_hz", "pte_peak_pct"], args.format)
    return EXIT_OK


def cmd_sar(args) -> int:
    if (args.value is None) == (args.current is None):
        raise UsageError("give exactly one of --value or --current")
    if args.value is not None:
        if args.value < 0:
            raise UsageError("--value must be non-negative")
        est = ch.icnirp_check(args.value)
    else:
        if not args.geom:
            raise UsageError("--current needs --geom")
        if args.current < 0:
            raise UsageError("--current must be non-negative")
        est = ch.sar_coarse(args.current, _geometry(args.geom), _stack(args), _materials(args), args.freq,
                            args.density)
    verdict = lambda ok: "COMPLIANT" if ok else "NON-COMPLIANT"
    rows = [[repr(est.peak_avg_sar), "whole-body", repr(est.whole_body_limit), verdict(est.whole_body_compliant)],
            [repr(est.peak_avg_sar), "limb", repr(est.limb_limit), verdict(est.compliant)]]
    _emit(rows, ["sar_w_per_kg", "exposure", "limit_w_per_kg", "verdict"], args.format)
    return EXIT_OK


def cmd_touchstone(args) -> int:
    if args.action == "export":
        if not args.geom:
            raise UsageError("touchstone export needs --geom")
        grid = explore.FrequencyGrid(args.f_min, args.f_max, args.n_points)
        geom, stack, db = _geometry(args.geom), _stack(args), _materials(args)
        blocks = [ch.channel_two_port(geom, stack, db, float(f)) for f in grid.points()]
        table = touchstone.table_from_abcd(blocks, args.r_ref, comments=("equivalent-circuit channel",))
        atomic_write(Path(args.output), touchstone.write_touchstone(table, args.to))
        return EXIT_OK
    if not args.input:
        raise UsageError(f"touchstone {args.action} needs an input file")
    table = touchstone.parse_touchstone(Path(args.input).read_text())
    if args.action == "resample":
        grid = explore.FrequencyGrid(args.f_min, args.f_max, args.n_points)
        table = touchstone.resample(table, grid.points())
    atomic_write(Path(args.output), touchstone.write_touchstone(table, args.to))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--materials", help=f"material file (default: ${ENV_MATERIALS} or the shipped file)")
    common.add_argument("--stack", default="layered", help="stack name (layered, muscle) or stack file")
    common.add_argument("--format", choices=("text", "csv"), default="text", help="stdout format")

    p = argparse.ArgumentParser(prog="bcplink", description="Galvanic body-coupled power link design.")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("materials", parents=[common], help="list or evaluate tissue models")
    m.add_argument("action", choices=("list", "show"))
    m.add_argument("name", nargs="?")
    m.add_argument("--freq", type=float, action="append", help="frequency in Hz (repeatable)")
    m.set_defaults(func=cmd_materials)

    mt = sub.add_parser("match", parents=[common], help="co-design TX/RX L-sections")
    mt.add_argument("--geom", help="geometry file")
    mt.add_argument("--s2p", help="Touchstone channel instead of the circuit model")
    mt.add_argument("--load", required=True, help="R or R,C (ohm, farad), series")
    mt.add_argument("--freq", type=float, required=True, help="design frequency, Hz")
    mt.add_argument("--z-source", type=float, default=50.0)
    mt.add_argument("--embedding", choices=matching.EMBEDDINGS, default="port-reference")
    mt.add_argument("--output", help="also write the CSV report here")
    mt.set_defaults(func=cmd_match)

    sw = sub.add_parser("sweep", parents=[common], help="run a [sweep] spec")
    sw.add_argument("--spec", required=True)
    sw.add_argument("--out-dir", default=".")
    sw.add_argument("--svg", action="store_true", help="also write an SVG chart")
    sw.add_argument("--workers", type=int, default=None)
    sw.set_defaults(func=cmd_sweep)

    sa = sub.add_parser("sar", parents=[common], help="ICNIRP compliance")
    sa.add_argument("--value", type=float, help="SAR to check, W/kg")
    sa.add_argument("--current", type=float, help="RMS drive current, A")
    sa.add_argument("--geom")
    sa.add_argument("--freq", type=float, default=1.25e9)
    sa.add_argument("--density", type=float, default=ch.DEFAULT_DENSITY)
    sa.set_defaults(func=cmd_sar)

    ts = sub.add_parser("touchstone", parents=[common], help="convert, resample or export .s2p files")
    ts.add_argument("action", choices=("convert", "resample", "export"))
    ts.add_argument("input", nargs="?")
    ts.add_argument("--output", "-o", required=True)
    ts.add_argument("--to", choices=touchstone.FORMATS, default="RI", help="output number format")
    ts.add_argument("--geom", help="geometry file (export)")
    ts.add_argument("--r-ref", type=float, default=50.0)
    ts.add_argument("--f-min", type=float, default=0.1e9)
    ts.add_argument("--f-max", type=float, default=3e9)
    ts.add_argument("--n-points", type=int, default=291)
    ts.set_defaults(func=cmd_touchstone)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    except (ConfigError, touchstone.TouchstoneError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except explore.SweepError as exc:
        code = EXIT_PHYSICS if isinstance(exc.cause, ArithmeticError) else EXIT_PARSE
        print(f"sweep failed: {exc}", file=sys.stderr)
        return code
    except matching.NoSimultaneousMatch as exc:
        print(f"no match: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except ArithmeticError as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
