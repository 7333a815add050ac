"""Lossless trial-record persistence: CSV rows plus a JSON metadata sidecar.

The CSV starts with a ``# schema=1`` comment, then a header row.  Columns
for a record set with probe labels L1..Lk::

    trial, seed, L1, ..., Lk, omega_p_offset_hz,
    L1_freq_hz, ..., Lk_freq_hz, true_jz_1, ..., true_jz_m

Floats are serialized with ``repr`` (shortest round-trip form), so
``read_records(write_records(rs)) == rs`` bit-exactly.  The sidecar
``<path>.meta.json`` carries the parameter snapshot, the master seed, a
content hash of the canonical parameter text, and a timestamp (the only
non-reproducible output field).
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from .sequence import LabeledOutcome, RecordSet, TrialRecord

SCHEMA_VERSION = 1


class RecordIOError(ValueError):
    """Raised for unreadable files or schema mismatches."""


def _sidecar(path: Path) -> Path:
    return Path(str(path) + ".meta.json")


def params_hash(params: dict) -> str:
    canonical = json.dumps(params, sort_keys=True, default=repr)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _fmt(x) -> str:
    return repr(float(x))


def write_records(rs: RecordSet, path) -> None:
    path = Path(path)
    labels = list(rs.labels)
    n_windows = max((len(t.true_jz_trace) for t in rs.trials), default=0)
    header = (["trial", "seed"] + labels + ["omega_p_offset_hz"]
              + [f"{lb}_freq_hz" for lb in labels]
              + [f"true_jz_{i + 1}" for i in range(n_windows)])

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={SCHEMA_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, t in enumerate(rs.trials):
            row = [str(i), str(t.seed)]
            row += [_fmt(t.outcomes[lb].n_up) for lb in labels]
            row.append(_fmt(t.omega_p_offset_hz))
            row += [_fmt(t.outcomes[lb].freq_hz) for lb in labels]
            row += [_fmt(v) for v in t.true_jz_trace]
            row += [""] * (n_windows - len(t.true_jz_trace))
            writer.writerow(row)

    meta = {
        "schema": SCHEMA_VERSION,
        "master_seed": rs.master_seed,
        "n_trials": len(rs.trials),
        "labels": labels,
        "params": rs.params,
        "content_hash": params_hash(rs.params),
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(_sidecar(path), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_records(path) -> RecordSet:
    path = Path(path)
    if not path.exists():
        raise RecordIOError(f"no record file at {path}")
    meta_path = _sidecar(path)
    if not meta_path.exists():
        raise RecordIOError(f"missing metadata sidecar {meta_path}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    if meta.get("schema") != SCHEMA_VERSION:
        raise RecordIOError(f"unsupported schema {meta.get('schema')!r}")
    labels = meta["labels"]

    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# schema="):
            raise RecordIOError("missing '# schema=' comment line")
        if int(first.strip().split("=", 1)[1]) != SCHEMA_VERSION:
            raise RecordIOError(f"unsupported schema in {path}")
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise RecordIOError("missing CSV header row")
        required = (["trial", "seed"] + labels + ["omega_p_offset_hz"]
                    + [f"{lb}_freq_hz" for lb in labels])
        col: dict[str, int] = {name: i for i, name in enumerate(header)}
        for name in required:
            if name not in col:
                raise RecordIOError(f"missing column {name!r} in {path}")
        trace_cols = [i for i, name in enumerate(header)
                      if name.startswith("true_jz_")]

        trials: list[TrialRecord] = []
        for row in reader:
            outcomes = {
                lb: LabeledOutcome(
                    n_up=float(row[col[lb]]),
                    freq_hz=float(row[col[f"{lb}_freq_hz"]]))
                for lb in labels
            }
            trace = tuple(float(row[i]) for i in trace_cols
                          if i < len(row) and row[i] != "")
            trials.append(TrialRecord(
                outcomes=outcomes, true_jz_trace=trace,
                seed=int(row[col["seed"]]),
                omega_p_offset_hz=float(row[col["omega_p_offset_hz"]])))

    return RecordSet(trials=tuple(trials), params=meta["params"],
                     master_seed=int(meta["master_seed"]))
