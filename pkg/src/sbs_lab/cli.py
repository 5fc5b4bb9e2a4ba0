"""Command line: ``sbs-lab verify | find | scan | config``.

Exit codes: 0 success or certified, 1 valid negative result (rejection),
2 input error, 3 internal numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bundle import PolynomialSection
from .config import RunConfig
from .errors import CertificationError, NonEmbeddedLoopError, SBSError, SectionZeroError
from .export import dumps, render_svg
from .geometry import LoopSample, Region, enclosed_area, loop_is_embedded, set_hausdorff
from .oracle import oracle_search
from .scanner import ScanSpec, run_scan_to_dir
from .tracer import certify_loop, trace_fiber
from .transport import alpha_trace, is_bohr_sommerfeld, winding_area_report, zeros_on_left

log = logging.getLogger("sbs_lab")

EXIT_OK, EXIT_REJECTED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(Exception):
    pass


# ----------------------------------------------------------------------------
# input


def _read_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path} is not valid JSON: {exc}") from exc


def load_section(path: str, degree: int | None = None) -> PolynomialSection:
    data = _read_json(path, "section")
    try:
        s = PolynomialSection.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed section file {path}: {exc}") from exc
    if degree is not None and s.degree != degree:
        raise InputError(f"section has degree {s.degree}, expected {degree}")
    return s


def load_loop(path: str) -> LoopSample:
    data = _read_json(path, "loop")
    try:
        loop = LoopSample.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed loop file {path}: {exc}") from exc
    if not loop_is_embedded(loop):
        raise InputError("loop is not embedded")
    return loop


def load_config(args) -> RunConfig:
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        return cfg.with_overrides(
            seed=args.seed,
            degree=args.degree,
            n_starts=getattr(args, "n_starts", None),
            workers=getattr(args, "workers", None),
        )
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise InputError(f"bad config: {exc}") from exc


def _emit(report: dict, out: str | None) -> None:
    text = dumps(report)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)


# ----------------------------------------------------------------------------
# commands


def cmd_verify(cfg: RunConfig, s: PolynomialSection, loop: LoopSample) -> tuple[int, dict]:
    """Speciality check of one (section, loop) pair."""
    tol = cfg.tolerances
    report: dict = {"section": s.to_dict(), "certified": False, "reasons": []}
    bs, defect = is_bohr_sommerfeld(s.degree, loop, tol.bs_tol)
    area = enclosed_area(Region(loop, "left"), s.degree)
    report.update(bohr_sommerfeld=bs, phase_defect=defect, area_left=area, zeros_left=zeros_on_left(s, loop))
    if not bs:
        report["reasons"].append(f"not Bohr-Sommerfeld: area {area:.9f}, phase defect {defect:.3e}")
    try:
        trace = alpha_trace(s, loop, tol.bs_tol, tol.epsilon_zero, require_bs=False)
        wa = winding_area_report(s, loop, bs_tol=tol.bs_tol, eps_zero=tol.epsilon_zero, require_bs=False)
    except SectionZeroError as exc:
        report["reasons"].append(str(exc))
        return EXIT_REJECTED, report
    report.update(
        arg_deviation=trace.arg_deviation,
        winding=trace.winding,
        min_modulus=trace.min_modulus,
        winding_area_residual=wa["residual"],
    )
    if trace.winding != 0:
        report["reasons"].append(
            f"alpha winds {trace.winding} times: {wa['zeros_left']} zeros on the left against area {area:.6f}"
        )
    if not bs or trace.winding != 0:
        return EXIT_REJECTED, report
    try:
        cert = certify_loop(s, loop, provenance={"kind": "input", "seed": cfg.seed}, tol=tol)
    except CertificationError as exc:
        report["reasons"].append(str(exc))
        return EXIT_REJECTED, report
    report["certified"] = True
    report["certificate"] = cert.to_dict()
    return EXIT_OK, report


def cmd_find(cfg: RunConfig, s: PolynomialSection) -> tuple[int, dict, list, np.ndarray]:
    """Tracer and oracle fibers of one section, cross-checked."""
    tol = cfg.tolerances
    report: dict = {"section": s.to_dict(), "seed": cfg.seed, "tolerances": tol.to_dict(), "errors": {}}
    fiber = trace_fiber(s, tol=tol)
    tracer_certs = fiber.certificates
    report["tracer"] = [c.to_dict() for c in tracer_certs]
    report["tracer_rejected"] = [{"provenance": p, "reason": r} for p, r in fiber.rejected]
    oracle_certs = []
    try:
        rep = oracle_search(s, cfg.n_starts, cfg.seed)
        report["oracle_best_energy"] = rep.best_energy
        for k, lp in enumerate(rep.loops):
            try:
                oracle_certs.append(certify_loop(s, lp.to_loop(), provenance={"kind": "oracle", "index": k, "seed": cfg.seed}, tol=tol))
            except (CertificationError, SBSError) as exc:
                report["errors"].setdefault("oracle_certification", []).append(str(exc))
    except SBSError as exc:
        report["errors"]["oracle"] = str(exc)
    report["oracle"] = [c.to_dict() for c in oracle_certs]
    report["fiber_size"] = len(tracer_certs)
    report["oracle_fiber_size"] = len(oracle_certs)
    agree = None
    if tracer_certs and oracle_certs:
        agree = float(set_hausdorff([c.loop for c in tracer_certs], [c.loop for c in oracle_certs]))
    report["method_agreement"] = agree
    report["methods_consistent"] = len(tracer_certs) == len(oracle_certs) and (
        agree is None or agree < 1e-3
    )
    singular = np.array([sg.xyz for sg in fiber.singularities]).reshape(-1, 3)
    return EXIT_OK, report, [c.loop for c in tracer_certs], singular


def cmd_scan(cfg: RunConfig, spec: ScanSpec, out_dir: str, svg_dir: str | None = None) -> tuple[int, dict]:
    report = run_scan_to_dir(spec, Path(out_dir), cfg.tolerances, cfg.workers)
    if svg_dir:
        Path(svg_dir).mkdir(parents=True, exist_ok=True)
        for rec in report.records:
            svg = render_svg(rec.section, [c.loop for c in rec.cycles], title=rec.key)
            (Path(svg_dir) / f"{rec.key}.svg").write_text(svg)
    summary = report.summary()
    failed = sum(1 for r in report.records if r.error)
    if failed:
        log.warning("%d of %d records logged errors; see records.jsonl", failed, len(report.records))
    return EXIT_OK, summary


# ----------------------------------------------------------------------------
# argparse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sbs-lab", description="Special Bohr-Sommerfeld cycles of sections on the sphere.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run configuration file ([run] key = value)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--degree", type=int, help="expected degree (overrides config)")
        p.add_argument("--out", help="output file (verify, find) or directory (scan)")

    p = sub.add_parser("verify", help="check one section/loop pair")
    common(p)
    p.add_argument("--section", required=True, help="section JSON file")
    p.add_argument("--loop", required=True, help="loop JSON file")

    p = sub.add_parser("find", help="tracer and oracle fiber of one section")
    common(p)
    p.add_argument("--section", required=True, help="section JSON file")
    p.add_argument("--svg", help="write a picture of zeros, critical points and cycles")
    p.add_argument("--n-starts", type=int, dest="n_starts", help="oracle multistart count")

    p = sub.add_parser("scan", help="moduli scan driven by a scan spec JSON file")
    common(p)
    p.add_argument("--spec", required=True, help="scan spec JSON file")
    p.add_argument("--svg", help="directory for one SVG per record")
    p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("config", help="print (or write with --out) a configuration file")
    common(p)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        expected = args.degree
        if args.command == "config":
            text = cfg.to_text()
            if args.out:
                Path(args.out).write_text(text)
            sys.stdout.write(text)
            return EXIT_OK
        if args.command == "verify":
            s = load_section(args.section, expected)
            code, report = cmd_verify(cfg, s, load_loop(args.loop))
            _emit(report, args.out)
            return code
        if args.command == "find":
            s = load_section(args.section, expected)
            code, report, cycles, singular = cmd_find(cfg, s)
            _emit(report, args.out)
            svg = args.svg or cfg.svg
            if svg:
                Path(svg).write_text(render_svg(s, cycles, singular_points=singular))
            return code
        if args.command == "scan":
            data = _read_json(args.spec, "scan spec")
            if not isinstance(data, dict):
                raise InputError("scan spec must be a JSON object")
            # precedence: --seed, then the scan spec file, then the config file
            if args.seed is not None or "seed" not in data:
                data = {**data, "seed": cfg.seed}
            try:
                spec = ScanSpec.from_dict(data)
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"malformed scan spec: {exc}") from exc
            if expected is not None and spec.degree != expected:
                raise InputError(f"scan spec has degree {spec.degree}, expected {expected}")
            code, summary = cmd_scan(cfg, spec, args.out or cfg.out, args.svg or None)
            sys.stdout.write(dumps(summary))
            return code
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NonEmbeddedLoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SBSError, ArithmeticError, FloatingPointError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
