"""
Command-line entry point for ph3lab.

Usage:
    ph3lab <kind> --manifest FILE [--jobs N] [--seed S] [--out DIR] [--verbose]
    ph3lab list-maps

Exit codes: 0 on completion, 2 on completion with a violation verdict,
1 on usage, validation or IO errors.
"""

import argparse
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Tuple

from dotenv import load_dotenv
from pydantic import ValidationError

# Add parent directory to path for imports
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT)

from ph3lab import CATALOG, ExperimentRunner, ReportStore, builtin_map, dump_map_spec, load_config, load_map_spec
from ph3lab.exceptions import LabError, ManifestError
from ph3lab.specfile import manifest_entries, read_sections
from ph3lab.torus_maps import TorusMapSpec
from ph3lab.utils import dumps_report, resolve_jobs, utc_timestamp
from cli.models import EXPERIMENT_KINDS, CatalogListing, ExperimentManifest, ReportEnvelope


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATION = 2


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser."""
    parser = argparse.ArgumentParser(
        prog="ph3lab",
        description="Numerical laboratory for partially hyperbolic maps of the 3-torus",
    )
    parser.add_argument("kind", choices=list(EXPERIMENT_KINDS) + ["list-maps"], help="Experiment kind")
    parser.add_argument("--manifest", help="Experiment manifest (key = value file)")
    parser.add_argument("--jobs", type=int, default=None, help="Worker processes (default: $PH3LAB_JOBS or 1)")
    parser.add_argument("--seed", type=int, default=None, help="Master seed (overrides the manifest)")
    parser.add_argument("--out", default=None, help="Output directory (overrides the manifest)")
    parser.add_argument("--config", default=os.path.join(ROOT, "config", "settings.json"), help="Settings file")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def load_manifest(path: str) -> ExperimentManifest:
    """
    Read and validate a manifest file.

    Raises:
        SpecFileError: On malformed files
        ValidationError: On missing, unknown or invalid keys
    """
    entries = manifest_entries(read_sections(path), source=path)
    return ExperimentManifest(**entries)


def resolve_map(manifest: ExperimentManifest, base_dir: str) -> Tuple[TorusMapSpec, Optional[Callable[[float], TorusMapSpec]]]:
    """
    Build the map named by the manifest and, for built-ins, its epsilon family.

    Raises:
        ManifestError: If a built-in name is unknown
    """
    name = manifest.builtin
    if name is not None:
        if name not in CATALOG:
            raise ManifestError(f"unknown built-in map {name!r}", key="map")
        return builtin_map(name, manifest.epsilon), CATALOG[name].factory
    if manifest.epsilon is not None:
        raise ManifestError("epsilon only applies to builtin: maps", key="epsilon")
    path = manifest.map if os.path.isabs(manifest.map) else os.path.join(base_dir, manifest.map)
    return load_map_spec(path), None


def list_builtin_maps() -> List[Dict[str, Any]]:
    """Catalog entries with the eigen data of their linear parts."""
    listing = []
    for name in sorted(CATALOG):
        entry = CATALOG[name]
        linear = entry.build().linearization()
        listing.append(CatalogListing(
            name=name,
            provenance=entry.provenance,
            default_epsilon=entry.default_epsilon,
            linear_part=[list(row) for row in linear.matrix.entries],
            moduli=list(linear.moduli),
            exponents=list(linear.exponents),
            anosov=linear.is_anosov,
        ).model_dump())
    return listing


def run(
    kind: str,
    manifest_path: str,
    jobs: Optional[int] = None,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    config: Optional[Dict[str, Any]] = None,
) -> int:
    """
    Execute one manifest and write its report files.

    Returns:
        Exit code
    """
    config = config or {}
    manifest = load_manifest(manifest_path)
    if manifest.kind is not None and manifest.kind != kind:
        raise ManifestError(f"manifest kind {manifest.kind!r} does not match command {kind!r}", key="kind")
    torus_map, family = resolve_map(manifest, os.path.dirname(os.path.abspath(manifest_path)))
    master_seed = seed if seed is not None else (manifest.seed or 0)
    out_dir = out or manifest.out or config.get("cli", {}).get("default_out", "reports")
    store = ReportStore(out_dir)

    runner = ExperimentRunner(config, resolve_jobs(jobs))
    outcome = runner.execute(kind, torus_map, manifest.parameters(), master_seed, family)

    envelope = ReportEnvelope(
        kind=kind,
        map=torus_map.to_dict(),
        map_spec=dump_map_spec(torus_map),
        parameters=manifest.parameters(),
        seed=master_seed,
        verdict=outcome.verdict,
        result=outcome.result,
        generated_at=utc_timestamp(),
    )
    stem = kind.replace("-", "_")
    store.write_json(f"{stem}.json", envelope.model_dump())
    for name, frame in outcome.tables.items():
        store.write_csv(f"{stem}_{name}.csv", frame)
    logger.info(f"Wrote {stem}.json and {len(outcome.tables)} table(s) to {store.out_dir}")

    if outcome.is_violation:
        logger.warning(f"{kind} finished with verdict {outcome.verdict}")
        return EXIT_VIOLATION
    return EXIT_OK


def describe_validation_error(error: ValidationError) -> str:
    """One line per failing key, naming the key first."""
    lines = []
    for item in error.errors():
        key = ".".join(str(part) for part in item.get("loc", ())) or "manifest"
        lines.append(f"{key}: {item.get('msg')}")
    return "\n".join(lines)


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    if args.kind == "list-maps":
        sys.stdout.write(dumps_report({"maps": list_builtin_maps()}))
        return EXIT_OK

    if not args.manifest:
        print("error: --manifest is required", file=sys.stderr)
        return EXIT_ERROR

    try:
        config = load_config(args.config)
        return run(args.kind, args.manifest, args.jobs, args.seed, args.out, config)
    except ValidationError as e:
        print(f"error: invalid manifest {args.manifest}\n{describe_validation_error(e)}", file=sys.stderr)
    except ManifestError as e:
        print(f"error: {e.key or 'manifest'}: {e}", file=sys.stderr)
    except (LabError, ValueError, KeyError) as e:
        logger.error(f"Experiment failed: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
