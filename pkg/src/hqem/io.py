"""Reading observation CSVs and parameter JSON files."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .model import CUES, PROBES, WORD_CLASSES, Cue, ModelParams, Probe, WordClass

OBS_HEADER = ("word_class", "cue", "probe", "proportion")
TABLE2_CSV = "brainerd2013_table2.csv"
TABLE3_JSON = "table3_params.json"


class DataFormatError(ValueError):
    """Malformed observations or parameter file."""


@dataclass(frozen=True, eq=False)
class ObservedDataset:
    """Observed acceptance proportions for all 64 (class, cue, probe) cells.

    ``proportions`` is indexed ``[word_class, cue, probe]`` in enum order.
    """

    proportions: np.ndarray
    sample_size: int | None = None

    def __post_init__(self):
        arr = np.array(self.proportions, dtype=float)
        if arr.shape != (4, 4, 4):
            raise DataFormatError(f"expected 64 cells shaped (4, 4, 4), got {arr.shape}")
        if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
            raise DataFormatError("proportions must lie in [0, 1]")
        if self.sample_size is not None and self.sample_size < 1:
            raise DataFormatError("sample_size must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "proportions", arr)

    def proportion(self, word_class, cue, probe) -> float:
        return float(self.proportions[
            WORD_CLASSES.index(WordClass(word_class)),
            CUES.index(Cue(cue)),
            PROBES.index(Probe(probe)),
        ])

    @property
    def unpacking(self) -> np.ndarray:
        return self.proportions[..., :3].sum(axis=-1) / self.proportions[..., 3]

    @classmethod
    def from_table(cls, table, sample_size=None) -> ObservedDataset:
        """Use a model prediction as (synthetic) observations."""
        return cls(np.asarray(table.probabilities), sample_size=sample_size)


def load_observations(source, sample_size=None) -> ObservedDataset:
    """Parse an observations CSV.

    ``source`` is a path, a text/binary file object, or raw bytes. Lines
    starting with ``#`` are ignored. Errors name the 1-based line number.
    """
    text = _read_text(source)
    lines = text.splitlines()
    numbered = [(n, line) for n, line in enumerate(lines, start=1)
                if line.strip() and not line.lstrip().startswith("#")]
    if not numbered:
        raise DataFormatError("empty observations file")

    header_no, header_line = numbered[0]
    header = tuple(h.strip() for h in next(csv.reader([header_line])))
    if header != OBS_HEADER:
        raise DataFormatError(f"line {header_no}: expected header {','.join(OBS_HEADER)}")

    values = np.full((4, 4, 4), np.nan)
    for lineno, line in numbered[1:]:
        row = [c.strip() for c in next(csv.reader([line]))]
        if len(row) != 4:
            raise DataFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
        wc, cue, probe, raw = row
        try:
            key = (WORD_CLASSES.index(WordClass(wc)), CUES.index(Cue(cue)), PROBES.index(Probe(probe)))
        except ValueError:
            raise DataFormatError(f"line {lineno}: unknown token in {wc},{cue},{probe}") from None
        try:
            value = float(raw)
        except ValueError:
            raise DataFormatError(f"line {lineno}: proportion {raw!r} is not a number") from None
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            raise DataFormatError(f"line {lineno}: proportion {raw} out of range [0, 1]")
        if not np.isnan(values[key]):
            raise DataFormatError(f"line {lineno}: duplicate cell {wc},{cue},{probe}")
        values[key] = value

    if np.isnan(values).any():
        a, b, c = np.argwhere(np.isnan(values))[0]
        raise DataFormatError(
            f"line {len(lines)}: missing cell {WORD_CLASSES[a].value},"
            f"{CUES[b].value},{PROBES[c].value} ({int(np.isnan(values).sum())} of 64 absent)")
    return ObservedDataset(values, sample_size=sample_size)


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


_REQUIRED_KEYS = ("nu", "nu_prime", "gamma", "gamma_prime", "kappa")
_OPTIONAL_DEFAULTS = {"g": 0.5, "t1": math.pi / 2, "t2": math.pi / 2}


def params_from_dict(obj) -> ModelParams:
    """Build :class:`ModelParams` from a parameter-file mapping.

    Keys starting with ``_`` are treated as comments. Raises
    :class:`DataFormatError` naming the offending key.
    """
    if not isinstance(obj, dict):
        raise DataFormatError("parameters must be a JSON object")
    for key in _REQUIRED_KEYS:
        if key not in obj:
            raise DataFormatError(f"missing required key '{key}'")
    known = set(_REQUIRED_KEYS) | set(_OPTIONAL_DEFAULTS)
    for key in obj:
        if not key.startswith("_") and key not in known:
            raise DataFormatError(f"unknown key '{key}'")

    gp = obj["gamma_prime"]
    if not isinstance(gp, dict):
        raise DataFormatError("key 'gamma_prime' must map HFC, HFA, LFC, LFA to numbers")
    for wc in WORD_CLASSES:
        if wc.value not in gp:
            raise DataFormatError(f"key 'gamma_prime' is missing '{wc.value}'")
    for key in gp:
        if key not in {wc.value for wc in WORD_CLASSES}:
            raise DataFormatError(f"key 'gamma_prime' has unknown word class '{key}'")

    values = {}
    for key in ("nu", "nu_prime", "gamma", "kappa", "g", "t1", "t2"):
        raw = obj.get(key, _OPTIONAL_DEFAULTS.get(key))
        values[key] = _number(raw, key)
    gamma_prime = {wc: _number(gp[wc.value], f"gamma_prime.{wc.value}") for wc in WORD_CLASSES}
    try:
        return ModelParams(gamma_prime=gamma_prime, **values)
    except ValueError as exc:
        raise DataFormatError(str(exc)) from None


def _number(raw, key) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise DataFormatError(f"key '{key}' must be a number, got {raw!r}")
    if not math.isfinite(raw):
        raise DataFormatError(f"key '{key}' must be finite")
    return float(raw)


def load_params(source) -> ModelParams:
    text = _read_text(source)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc}") from None
    return params_from_dict(obj)


def bundled_observations() -> ObservedDataset:
    """The printed three-list proportions (N=70) shipped with the package."""
    raw = resources.files("hqem.data").joinpath(TABLE2_CSV).read_bytes()
    return load_observations(raw, sample_size=70)


def bundled_params() -> ModelParams:
    """Published best-fit parameters for :func:`bundled_observations`."""
    return load_params(resources.files("hqem.data").joinpath(TABLE3_JSON).read_bytes())


def bundled_path(name) -> Path:
    return Path(str(resources.files("hqem.data").joinpath(name)))


def format_observations(proportions, value_header="proportion") -> str:
    """Render a (4, 4, 4) array as observations CSV with 6 decimals."""
    out = io.StringIO()
    out.write(f"word_class,cue,probe,{value_header}\n")
    for a, wc in enumerate(WORD_CLASSES):
        for b, cue in enumerate(CUES):
            for c, probe in enumerate(PROBES):
                out.write(f"{wc.value},{cue.value},{probe.value},{proportions[a, b, c]:.6f}\n")
    return out.getvalue()
