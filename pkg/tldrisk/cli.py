import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union
from tldrisk import afd, attacks, capec, elicitation, risk, stats
from tldrisk.data_loader import Loader, resolve_loader
from tldrisk.exceptions import CoverageError, DegenerateInputError, DocumentParseError, NotFoundError, TldrError
from tldrisk.helpers import build_model, parse_document
from tldrisk.models import AttackCatalog, ConsensusVector, ShiftCalibration, ValidationReport
from tldrisk.report import build_metadata, build_report, render_report
from tldrisk.types.tldr import ReportFormatEnum, ReportSortEnum, StatMethodEnum, StatResult

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_DEGENERATE = 2

CALIBRATE_PREFIX = "calibrate:"
STAT_DIGITS = 6

def _shift_value(value: str) -> Union[float, Path]:
    if value.startswith(CALIBRATE_PREFIX):
        path = value[len(CALIBRATE_PREFIX):]
        if not path:
            raise argparse.ArgumentTypeError("calibrate: needs a path to direct likelihood estimates")
        return Path(path)
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or calibrate:<path>, got {value!r}") from None

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-dir", help="data directory or http(s) directory URL (default: bundled data)")
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--format", choices=[f.value for f in ReportFormatEnum], default=ReportFormatEnum.CSV.value,
                        help="report format (default: csv)")
    common.add_argument("--shift", type=_shift_value, default=risk.DEFAULT_LIKELIHOOD_SHIFT,
                        help="likelihood shift: a number, or calibrate:<direct estimates path> (default: %(default)s)")
    common.add_argument("--aggregation", choices=["mean", "max"], default=risk.DEFAULT_AGGREGATION,
                        help="how mapped pattern scores combine (default: mean)")
    common.add_argument("--reproducible", action="store_true", help="omit the timestamp from report metadata")
    common.add_argument("--no-cache", action="store_true", help="do not cache remote data directory responses")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    parser = argparse.ArgumentParser(
        prog="tldrisk",
        description="Ontology-based likelihood, severity and risk assessment for medical device attacks.",
    )
    verbs = parser.add_subparsers(dest="verb", required=True)

    assess = verbs.add_parser("assess", parents=[common], help="run the pipeline and render the risk report")
    assess.add_argument("--sort", choices=[s.value for s in ReportSortEnum], default=ReportSortEnum.GROUP.value,
                        help="group rows by device (default) or list the global ranking")
    assess.add_argument("--figure", help="also save a likelihood x severity figure (png, svg or pdf)")
    assess.set_defaults(handler=cmd_assess)

    stat = verbs.add_parser("stats", parents=[common], help="compare two vectors")
    stat.add_argument("--a", required=True, dest="vector_a", help="first vector (JSON array or consensus document)")
    stat.add_argument("--b", required=True, dest="vector_b", help="second vector")
    stat.add_argument("--method", choices=["spearman", "paired-t"], default="spearman")
    stat.add_argument("--exact", action="store_true", help="spearman only: exact permutation p-value (n <= 10)")
    stat.set_defaults(handler=cmd_stats)

    validate = verbs.add_parser("validate", parents=[common], help="run every catalog and diagram validator")
    validate.set_defaults(handler=cmd_validate)

    export = verbs.add_parser("export-afd", parents=[common], help="export one attack flow diagram as Graphviz DOT")
    export.add_argument("--device", required=True, help="diagram id (e.g. generic_ct) or device class (e.g. GenericCT)")
    export.set_defaults(handler=cmd_export_afd)

    compression = verbs.add_parser("compression", parents=[common], help="print attack-to-pattern compression")
    compression.add_argument("--figure", help="also save the attack x pattern mapping heatmap")
    compression.set_defaults(handler=cmd_compression)

    return parser

def _write(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        logger.debug("Wrote %s", args.out)
    else:
        sys.stdout.write(text)

def _loader(args) -> Loader:
    return resolve_loader(args.data_dir, is_cache_enabled=not args.no_cache)

def _validate_all(loader: Loader) -> ValidationReport:
    patterns = loader.load_catalog()
    catalog = loader.load_attacks()
    diagrams = loader.load_afds()
    report = capec.validate_catalog(patterns)
    report = report.merge(attacks.validate_mappings(catalog, patterns))
    report = report.merge(afd.validate_afd(diagrams, attack_ids=catalog.attacks))
    report = report.merge(afd.cross_check_novelty(diagrams, catalog))
    return report

def _report_listing(report: ValidationReport) -> str:
    listing = {
        "valid": report.is_valid,
        "errors": report.errors,
        "notices": report.notices,
    }
    return json.dumps(listing, indent=2, ensure_ascii=False) + "\n"

def _direct_likelihoods(path: Path) -> ConsensusVector:
    text = path.read_text(encoding="utf-8")
    data = parse_document(text, label=str(path))
    if isinstance(data, dict) and "values" in data:
        vector = elicitation.load_consensus(data)
        if vector.normalized:
            return vector
        return vector.model_copy(update={
            "values": {k: v / risk.LIKELIHOOD_SCALE_MAX for k, v in vector.values.items()},
            "normalized": True,
        })
    return elicitation.build_medle(elicitation.load_surveys(data))

def resolve_shift(
    shift: Union[float, Path],
    capec_consensus: ConsensusVector,
    catalog: AttackCatalog,
    aggregation: risk.Aggregation = risk.DEFAULT_AGGREGATION,
) -> ShiftCalibration:
    """
    Turns a `--shift` value into a calibration: a fixed shift, or one calibrated against direct estimates.
    """
    if not isinstance(shift, Path):
        return build_model(ShiftCalibration, {"c_like": shift}, label="--shift")
    mecble = elicitation.build_mecble(capec_consensus, catalog, aggregation=aggregation)
    medle = _direct_likelihoods(shift)
    return risk.calibrate_shift(mecble, medle)

def cmd_assess(args) -> int:
    loader = _loader(args)
    report = _validate_all(loader)
    if not report.is_valid:
        sys.stdout.write(_report_listing(report))
        return EXIT_FAILURE

    catalog = loader.load_attacks()
    capec_consensus = loader.load_capec_consensus()
    severity_consensus = loader.load_severity_consensus()
    severity_model = loader.load_severity_model()
    calibration = resolve_shift(args.shift, capec_consensus, catalog, aggregation=args.aggregation)

    rows = risk.run_assessment(
        attacks=catalog,
        capec_consensus=capec_consensus,
        severity_consensus=severity_consensus,
        severity_model=severity_model,
        options={"aggregation": args.aggregation, "shift": calibration},
    )
    metadata = build_metadata(
        calibration,
        severity_model,
        capec_consensus=capec_consensus,
        severity_consensus=severity_consensus,
        aggregation=args.aggregation,
        reproducible=args.reproducible,
    )
    document = build_report(rows, catalog, metadata, sort=args.sort)
    _write(args, render_report(document, format=args.format))

    if args.figure:
        # matplotlib is only imported when a figure is asked for.
        from tldrisk.data_presenter import generate_risk_figure
        generate_risk_figure(rows, path=args.figure)

    return EXIT_OK

def _load_vector(path: str) -> Tuple[Optional[List[str]], List[float]]:
    text = Path(path).read_text(encoding="utf-8")
    data = parse_document(text, label=path)
    if isinstance(data, dict) and "values" in data:
        data = data["values"]
    if isinstance(data, dict):
        keys = sorted(data)
        try:
            return keys, [float(data[k]) for k in keys]
        except (TypeError, ValueError):
            raise DocumentParseError(f"{path}: expected numeric `values`") from None
    if isinstance(data, list):
        try:
            return None, [float(v) for v in data]
        except (TypeError, ValueError):
            raise DocumentParseError(f"{path}: expected an array of numbers") from None
    raise DocumentParseError(f"{path}: expected a JSON array or an object with `values`")

def _aligned_vectors(path_a: str, path_b: str) -> Tuple[List[float], List[float]]:
    keys_a, a = _load_vector(path_a)
    keys_b, b = _load_vector(path_b)
    if keys_a is not None and keys_b is not None and keys_a != keys_b:
        missing = set(keys_a) - set(keys_b)
        extra = set(keys_b) - set(keys_a)
        raise CoverageError(
            f"vectors name different subjects (missing: {sorted(missing)}, extra: {sorted(extra)})",
            missing=missing,
            extra=extra,
        )
    return a, b

def _number(value: float) -> str:
    return f"{value:.{STAT_DIGITS}g}"

def format_stat_result(result: StatResult) -> str:
    symbol = "t" if result["method"] == StatMethodEnum.PAIRED_T else "rho"
    text = f"{symbol}={_number(result['statistic'])}, df={result['df']}, p={_number(result['p_value'])}"
    if result["exact_monotone"]:
        text += " (exact monotone)"
    return text + "\n"

def cmd_stats(args) -> int:
    a, b = _aligned_vectors(args.vector_a, args.vector_b)
    if args.method == "paired-t":
        result = stats.paired_t_test(a, b)
    else:
        result = stats.spearman_test(a, b)
        if args.exact:
            result["p_value"] = stats.spearman_exact_pvalue(a, b)
            result["method"] = StatMethodEnum.SPEARMAN_EXACT
    _write(args, format_stat_result(result))
    return EXIT_OK

def cmd_validate(args) -> int:
    report = _validate_all(_loader(args))
    _write(args, _report_listing(report))
    return EXIT_OK if report.is_valid else EXIT_FAILURE

def cmd_export_afd(args) -> int:
    diagrams = _loader(args).load_afds()
    matches = [d for d in diagrams if args.device in (d.id, d.device)]
    if not matches:
        known = ", ".join(sorted(d.id for d in diagrams))
        raise NotFoundError(f"no attack flow diagram for {args.device} (known: {known})", key=args.device)
    _write(args, afd.export_dot(matches[0]))
    return EXIT_OK

def cmd_compression(args) -> int:
    loader = _loader(args)
    catalog = loader.load_attacks()
    count, distinct, mean = attacks.compression_stats(catalog)
    novelty = attacks.novelty_counts(catalog)
    _write(args, (
        f"attacks={count}\n"
        f"patterns={distinct}\n"
        f"mean_mappings={mean:.3f}\n"
        f"known={novelty['known']}\n"
        f"new={novelty['new']}\n"
    ))

    if args.figure:
        from tldrisk.data_presenter import generate_mapping_heatmap
        generate_mapping_heatmap(catalog, loader.load_catalog(), path=args.figure)

    return EXIT_OK

def _error_listing(e: Exception) -> str:
    return json.dumps({"error": type(e).__name__, "message": str(e)}, ensure_ascii=False) + "\n"

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )

    try:
        return args.handler(args)
    except DegenerateInputError as e:
        logger.error("%s", e)
        sys.stderr.write(_error_listing(e))
        return EXIT_DEGENERATE
    except TldrError as e:
        logger.error("%s", e)
        sys.stderr.write(_error_listing(e))
        return EXIT_FAILURE
    except OSError as e:
        logger.error("%s", e)
        sys.stderr.write(_error_listing(e))
        return EXIT_FAILURE

if __name__ == "__main__":
    sys.exit(main())
