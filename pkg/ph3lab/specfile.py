"""
Plain-text key/value files for map specifications and experiment manifests.

Both formats share one grammar:

    # comment
    [section]
    key = value

Sections may repeat (one `[shear]` per shear step). Keys that appear before
any section header belong to the unnamed section "". Values are kept as
strings; typed readers below convert them.
"""

import logging
from pathlib import Path
from typing import Dict, List, Tuple

from ph3lab.exceptions import SpecFileError
from ph3lab.torus_maps import IntegerMatrix3, ShearStep, TorusMapSpec


logger = logging.getLogger(__name__)

Section = Tuple[str, Dict[str, str]]

MAP_SECTIONS = ("", "map", "linear", "shear", "conjugator")
SHEAR_KEYS = {"j", "k", "epsilon", "cos", "sin"}


def parse_sections(text: str, source: str = "<string>") -> List[Section]:
    """
    Split key/value text into ordered (section, entries) pairs.

    Args:
        text: File contents
        source: Name used in error messages

    Returns:
        List of (section name, {key: raw value}) in file order

    Raises:
        SpecFileError: On malformed lines or duplicate keys within a section
    """
    sections: List[Section] = [("", {})]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise SpecFileError(f"{source}:{lineno}: malformed section header {raw.strip()!r}")
            sections.append((line[1:-1].strip().lower(), {}))
            continue
        if "=" not in line:
            raise SpecFileError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise SpecFileError(f"{source}:{lineno}: empty key")
        entries = sections[-1][1]
        if key in entries:
            raise SpecFileError(f"{source}:{lineno}: duplicate key {key!r} in [{sections[-1][0]}]")
        entries[key] = value
    if not sections[0][1]:
        sections.pop(0)
    return sections


def read_sections(path: str) -> List[Section]:
    """Read and parse a key/value file."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        logger.error(f"Cannot read {path}: {e}")
        raise SpecFileError(f"Cannot read {path}: {e}") from e
    return parse_sections(text, source=str(path))


def parse_number_list(value: str) -> List[float]:
    """Parse a comma- or whitespace-separated list of reals ("" gives [])."""
    tokens = [t for t in value.replace(",", " ").split() if t]
    try:
        return [float(t) for t in tokens]
    except ValueError as e:
        raise SpecFileError(f"Expected a list of numbers, got {value!r}") from e


def _parse_int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError as e:
        raise SpecFileError(f"Key {key!r} must be an integer, got {value!r}") from e


def _parse_shear(entries: Dict[str, str], where: str) -> ShearStep:
    unknown = set(entries) - SHEAR_KEYS
    if unknown:
        raise SpecFileError(f"{where}: unknown keys {sorted(unknown)}")
    for key in ("j", "k", "epsilon"):
        if key not in entries:
            raise SpecFileError(f"{where}: missing key {key!r}")
    try:
        return ShearStep(
            source=_parse_int(entries["j"], "j") - 1,
            target=_parse_int(entries["k"], "k") - 1,
            epsilon=float(entries["epsilon"]),
            cos_coeffs=tuple(parse_number_list(entries.get("cos", ""))),
            sin_coeffs=tuple(parse_number_list(entries.get("sin", "1"))),
        )
    except ValueError as e:
        raise SpecFileError(f"{where}: {e}") from e


def map_spec_from_sections(sections: List[Section], source: str = "<string>") -> TorusMapSpec:
    """
    Build a TorusMapSpec from parsed sections.

    Raises:
        SpecFileError: On unknown sections, a missing [linear] section or
            invalid values
    """
    name = Path(source).stem if source != "<string>" else "custom"
    iterate = 1
    linear = None
    shears: List[ShearStep] = []
    conjugator: List[ShearStep] = []
    for index, (title, entries) in enumerate(sections):
        where = f"{source}: section #{index + 1} [{title}]"
        if title not in MAP_SECTIONS:
            raise SpecFileError(f"{where}: unknown section")
        if title in ("", "map"):
            name = entries.get("name", name)
            if "iterate" in entries:
                iterate = _parse_int(entries["iterate"], "iterate")
        elif title == "linear":
            if "entries" not in entries:
                raise SpecFileError(f"{where}: missing key 'entries'")
            values = parse_number_list(entries["entries"])
            if len(values) != 9:
                raise SpecFileError(f"{where}: 'entries' needs 9 integers, got {len(values)}")
            try:
                linear = IntegerMatrix3.from_array([values[0:3], values[3:6], values[6:9]])
            except ValueError as e:
                raise SpecFileError(f"{where}: {e}") from e
        elif title == "shear":
            shears.append(_parse_shear(entries, where))
        else:
            conjugator.append(_parse_shear(entries, where))
    if linear is None:
        raise SpecFileError(f"{source}: missing [linear] section")
    try:
        return TorusMapSpec(linear, tuple(shears), tuple(conjugator), iterate, name)
    except ValueError as e:
        raise SpecFileError(f"{source}: {e}") from e


def load_map_spec(path: str) -> TorusMapSpec:
    """
    Load a map specification file.

    Args:
        path: Path to the file

    Returns:
        Parsed TorusMapSpec

    Raises:
        SpecFileError: If the file is unreadable or malformed
    """
    spec = map_spec_from_sections(read_sections(path), source=str(path))
    logger.info(f"Loaded map spec {spec.name} from {path}")
    return spec


def _format_list(values) -> str:
    return ", ".join(repr(float(v)) for v in values)


def _dump_shear(title: str, step: ShearStep) -> List[str]:
    return [
        f"[{title}]",
        f"j = {step.source + 1}",
        f"k = {step.target + 1}",
        f"epsilon = {step.epsilon!r}",
        f"cos = {_format_list(step.cos_coeffs)}",
        f"sin = {_format_list(step.sin_coeffs)}",
        "",
    ]


def dump_map_spec(spec: TorusMapSpec) -> str:
    """Render a TorusMapSpec in the map-spec file format; floats use repr so values round-trip."""
    lines = [
        "[map]",
        f"name = {spec.name}",
        f"iterate = {spec.iterate}",
        "",
        "[linear]",
        "entries = " + " ".join(str(v) for row in spec.linear_part.entries for v in row),
        "",
    ]
    for step in spec.pre_shears:
        lines.extend(_dump_shear("shear", step))
    for step in spec.conjugator:
        lines.extend(_dump_shear("conjugator", step))
    return "\n".join(lines)


def manifest_entries(sections: List[Section], source: str = "<string>") -> Dict[str, str]:
    """
    Flatten a manifest into one key/value mapping.

    Keys may sit before any header or under a single [experiment] section.

    Raises:
        SpecFileError: On other sections or keys given twice
    """
    merged: Dict[str, str] = {}
    for title, entries in sections:
        if title not in ("", "experiment"):
            raise SpecFileError(f"{source}: unknown manifest section [{title}]")
        for key, value in entries.items():
            if key in merged:
                raise SpecFileError(f"{source}: duplicate manifest key {key!r}")
            merged[key] = value
    return merged
