# -*- coding: utf-8 -*-
import configparser
import json
import os
import traceback
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from src.utils.utils_errors import DataIOError, ParseError

# ============================ IO / TEXT ============================

# Annotation exports come from Windows tooling as often as not
ENCODINGS_TRY = ("utf-8-sig", "utf-16", "cp1252")

# Section injected when a flat experiment file has no [header] of its own
FLAT_CONFIG_SECTION = "experiment"

LONG_PATH_PREFIX = "\\\\?\\"


def read_text_with_encoding(path: str) -> Tuple[List[str], Optional[str]]:
    """
    Read a text file as lines (no line endings), trying ENCODINGS_TRY in order.
    Returns (lines, encoding); encoding is None when bytes had to be replaced.
    """
    target = to_long_path(path)
    if not os.path.isfile(target):
        raise DataIOError("File not found", pretty_path(target))
    try:
        raw = Path(target).read_bytes()
    except OSError as exc:
        raise DataIOError(f"Cannot read file ({exc.strerror or exc})", pretty_path(target)) from exc

    for enc in ENCODINGS_TRY:
        try:
            return raw.decode(enc).splitlines(), enc
        except UnicodeError:
            continue
    return raw.decode("utf-8", errors="replace").splitlines(), None


def ensure_output_dir(path: str) -> str:
    """Create 'path' (and parents) or raise DataIOError naming it."""
    target = to_long_path(path)
    try:
        os.makedirs(target, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"Cannot create output folder ({exc.strerror or exc})", pretty_path(target)) from exc
    return target


def ensure_parent_dir(file_path: str) -> str:
    ensure_output_dir(os.path.dirname(os.path.abspath(file_path)))
    return to_long_path(file_path)


# ============================ JSON LINES ============================

def iter_jsonl(path: str) -> Iterator[Tuple[int, dict]]:
    """
    Yield (line_number, object) for every non-blank line of a JSON Lines file.
    Line numbers are 1-based; malformed lines raise ParseError naming the line.
    """
    lines, _ = read_text_with_encoding(path)
    for line_no, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON ({exc.msg})", line_no=line_no) from exc
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", line_no=line_no)
        yield line_no, obj


def write_jsonl(path: str, rows: List[dict]) -> str:
    """Write rows as compact JSON Lines with '\\n' endings (byte-stable across platforms)."""
    target = ensure_parent_dir(path)
    try:
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            for row in rows:
                f.write(json.dumps(row, separators=(",", ":")))
                f.write("\n")
    except OSError as exc:
        raise DataIOError(f"Cannot write file ({exc.strerror or exc})", pretty_path(target)) from exc
    return target


# ============================ CONFIG FILES ============================

def read_flat_config(path: str) -> Dict[str, str]:
    """
    Read an experiment file of 'key = value' lines into {key: raw_value}.

    A leading [section] header is optional; when missing, one is injected so
    configparser accepts the file. Comments ('#' or ';') and blank lines are skipped.
    """
    lines, _ = read_text_with_encoding(path)
    body = "\n".join(lines)
    if not any(ln.strip().startswith("[") for ln in lines if ln.strip()):
        body = f"[{FLAT_CONFIG_SECTION}]\n{body}"

    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep 'denoiser.model_dim' case as written
    try:
        parser.read_string(body, source=pretty_path(path))
    except configparser.Error as exc:
        raise ParseError(f"invalid config file '{pretty_path(path)}' ({getattr(exc, 'message', exc)})") from exc

    return {key.strip(): raw.strip() for section in parser.sections() for key, raw in parser[section].items()}


def _read_cfg_section(config_path: Path, config_section: str) -> Mapping[str, str]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(config_path, encoding="utf-8")
    except (OSError, configparser.Error):
        return {}
    return parser[config_section] if parser.has_section(config_section) else {}


def load_cfg_values(config_path, config_section, cfg_field_map, *fields: str) -> dict:
    """
    {logical_name: stored value} for the requested fields of cfg_field_map;
    anything missing or unreadable comes back as "".
    """
    section = _read_cfg_section(Path(config_path), config_section)
    return {logical: section.get(cfg_field_map.get(logical, ""), "").strip() for logical in fields}


def save_cfg_values(config_dir, config_path, config_section, cfg_field_map, **kwargs: str) -> None:
    """
    Merge the non-empty known fields into the persistent config file.
    Best effort: a failure here never aborts a run.
    """
    updates = {cfg_field_map[k]: str(v) for k, v in kwargs.items() if v and k in cfg_field_map}
    if not updates:
        return
    try:
        Path(config_dir).mkdir(parents=True, exist_ok=True)
        parser = configparser.ConfigParser(interpolation=None)
        parser.read(config_path, encoding="utf-8")
        if not parser.has_section(config_section):
            parser.add_section(config_section)
        parser[config_section].update(updates)
        with Path(config_path).open("w", encoding="utf-8") as f:
            parser.write(f)
    except (OSError, configparser.Error):
        pass


# ============================ ERRORS / PATHS ============================

def log_module_exception(module_label: str, exc: BaseException) -> None:
    """Banner with the exception and its traceback, printed to stdout (and therefore to the log)."""
    rule = "=" * 80
    details = "".join(traceback.format_exception(type(exc), exc, exc.__traceback__)).rstrip()
    print(f"\n{rule}\n[ERROR] An exception occurred while executing {module_label}:\n{'-' * 80}")
    print(f"{type(exc).__name__}: {exc}\n{'-' * 80}\n{details}\n{rule}\n")


def to_long_path(path: str) -> str:
    """Windows only: absolute path with the \\\\?\\ prefix (\\\\?\\UNC\\ for shares). Unchanged elsewhere."""
    if os.name != "nt" or not path:
        return path
    absolute = os.path.abspath(path).replace("/", "\\")
    if absolute.startswith(LONG_PATH_PREFIX):
        return absolute
    if absolute.startswith("\\\\"):
        return f"{LONG_PATH_PREFIX}UNC\\{absolute.lstrip(chr(92))}"
    return LONG_PATH_PREFIX + absolute


def pretty_path(path: str) -> str:
    """Strip the long-path prefix for display."""
    if isinstance(path, str) and path.startswith(LONG_PATH_PREFIX):
        return path[len(LONG_PATH_PREFIX):]
    return path
