"""Line-oriented table files.

One JSON object per line: ``{"genus", "d", "num", "den"}`` for exact entries
or ``{"genus", "d", "log_value", "mantissa_hex", "precision_bits"}`` for
floating ones.  The last line is ``{"records": n, "sha256": hex}``, the
digest of every byte before it.  Files are written to a temporary sibling
and renamed into place.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

import gmpy2

from ._mp import from_hex, to_decimal, to_hex, working_precision
from .errors import CacheCorrupt
from .invariants import InvariantTable

__all__ = ["table_records", "dump_table", "write_table", "parse_table", "read_table", "TableFile"]


def _line(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"), sort_keys=False) + "\n"


def table_records(table: InvariantTable, dmax: int | None = None, mode: str = "auto"):
    """Records for d = 1..dmax.

    ``mode`` is ``"exact"`` (rationals only), ``"scaled"`` (floating only) or
    ``"auto"`` (rationals where known, floating elsewhere).
    """
    if mode not in ("auto", "exact", "scaled"):
        raise ValueError(f"unknown mode {mode!r}")
    dmax = table.dmax if dmax is None else dmax
    bits = table.precision_bits
    for d in range(1, dmax + 1):
        use_exact = d in table.values and mode != "scaled"
        if mode == "exact" and not use_exact:
            raise ValueError(f"no exact value for d = {d}")
        if use_exact:
            q = Fraction(table.values[d])
            yield {"genus": table.genus, "d": d, "num": str(q.numerator), "den": str(q.denominator)}
        else:
            if table.scaled is None or d not in table.scaled:
                raise ValueError(f"no floating value for d = {d}")
            v = table.scaled[d]
            with working_precision(bits):
                lv = to_decimal(gmpy2.log(v)) if v > 0 else "-inf"
            yield {"genus": table.genus, "d": d, "log_value": lv,
                   "mantissa_hex": to_hex(v), "precision_bits": bits}


def dump_table(table: InvariantTable, dmax: int | None = None, mode: str = "auto") -> str:
    body = "".join(_line(r) for r in table_records(table, dmax, mode))
    n = body.count("\n")
    digest = hashlib.sha256(body.encode()).hexdigest()
    return body + _line({"records": n, "sha256": digest})


def write_table(path, table: InvariantTable, dmax: int | None = None, mode: str = "auto") -> Path:
    """Write atomically; returns the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = dump_table(table, dmax, mode)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


class TableFile:
    """Parsed contents of a table file plus its integrity status."""

    def __init__(self, table: InvariantTable, checksum_ok: bool, problems: list[str]):
        self.table = table
        self.checksum_ok = checksum_ok
        self.problems = problems

    @property
    def ok(self) -> bool:
        return self.checksum_ok and not self.problems


def parse_table(text: str) -> TableFile:
    """Parse without raising on checksum trouble; problems are listed instead."""
    lines = text.splitlines(keepends=True)
    problems = []
    if not lines:
        raise CacheCorrupt("empty table file")
    try:
        footer = json.loads(lines[-1])
    except json.JSONDecodeError as exc:
        raise CacheCorrupt(f"unreadable footer: {exc}") from None
    checksum_ok = False
    if isinstance(footer, dict) and "sha256" in footer:
        body_lines = lines[:-1]
        digest = hashlib.sha256("".join(body_lines).encode()).hexdigest()
        checksum_ok = digest == footer["sha256"] and footer.get("records") == len(body_lines)
        if not checksum_ok:
            problems.append("checksum mismatch")
    else:
        body_lines = lines
        problems.append("missing checksum footer")
    genus = None
    bits = None
    values, scaled = {}, {}
    for i, raw in enumerate(body_lines, start=1):
        try:
            rec = json.loads(raw)
            g, d = int(rec["genus"]), int(rec["d"])
            if genus is None:
                genus = g
            elif g != genus:
                raise ValueError("mixed genera")
            if "num" in rec:
                values[d] = Fraction(int(rec["num"]), int(rec["den"]))
            else:
                b = int(rec["precision_bits"])
                bits = b if bits is None else bits
                if b != bits:
                    raise ValueError("mixed precisions")
                scaled[d] = from_hex(rec["mantissa_hex"], b)
        except (KeyError, ValueError, TypeError, ZeroDivisionError) as exc:
            raise CacheCorrupt(f"line {i}: {exc}") from None
    if genus is None:
        raise CacheCorrupt("no records")
    degrees = sorted(set(values) | set(scaled))
    dmax = degrees[-1]
    if degrees != list(range(1, dmax + 1)):
        problems.append("degrees are not contiguous from 1")
    if scaled:
        # exact prefix entries get their correctly rounded floating value
        with working_precision(bits):
            for d, q in values.items():
                scaled.setdefault(d, gmpy2.mpfr(q.numerator) / q.denominator)
    table = InvariantTable(genus, dmax, values, scaled or None, bits)
    return TableFile(table, checksum_ok, problems)


def read_table(path, strict: bool = True) -> InvariantTable:
    """Load a table file; with ``strict`` any integrity problem raises CacheCorrupt."""
    tf = parse_table(Path(path).read_text())
    if strict and not tf.ok:
        raise CacheCorrupt(f"{path}: {', '.join(tf.problems)}")
    return tf.table
