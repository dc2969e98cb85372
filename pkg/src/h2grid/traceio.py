"""CSV persistence for simulation traces."""

from __future__ import annotations

import os

from .engine import TraceRecord

CSV_SCHEMA_VERSION = 1
HEADER = "t,v_wind,omega_pu,beta_deg,p_w_pu,p_ael_pu,u_ac_pu,f_hz,u_dc2_pu,duty,mode,events"
_N_NUMERIC = 10
_MODES = {"N", "E", "Tripped"}


def _fmt(x: float) -> str:
    # 17 significant digits round-trip every double exactly
    return format(float(x), ".17g")


def format_record(r: TraceRecord) -> str:
    return ",".join([*(_fmt(v) for v in r[:_N_NUMERIC]), r.mode, ";".join(r.events)])


def write_trace(trace, path: str | os.PathLike) -> None:
    lines = [HEADER, *(format_record(r) for r in trace)]
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write trace: {exc.strerror}", os.fspath(path)) from exc


def parse_trace(text: str, source: str = "<trace>") -> list[TraceRecord]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != HEADER:
        raise ValueError(f"{source}: header does not match the trace schema v{CSV_SCHEMA_VERSION}")
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != _N_NUMERIC + 2:
            raise ValueError(f"{source}:{lineno}: expected {_N_NUMERIC + 2} fields, got {len(cells)}")
        try:
            nums = [float(c) for c in cells[:_N_NUMERIC]]
        except ValueError as exc:
            raise ValueError(f"{source}:{lineno}: {exc}") from None
        if cells[10] not in _MODES:
            raise ValueError(f"{source}:{lineno}: unknown mode {cells[10]!r}")
        events = tuple(cells[11].split(";")) if cells[11] else ()
        out.append(TraceRecord(*nums, cells[10], events))
    return out


def read_trace(path: str | os.PathLike) -> list[TraceRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_trace(fh.read(), os.fspath(path))
