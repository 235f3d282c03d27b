"""Time-series CSV persistence.

One row per diagnostics sample, written and flushed row by row so a
crashed run always leaves a valid CSV prefix. Floats are written with 17
significant digits (full round trip).
"""

from __future__ import annotations

from .functionals import CSV_COLUMNS, DiagnosticsRow, DiagnosticsSeries

CSV_HEADER = ",".join(CSV_COLUMNS)


def format_value(x: float) -> str:
    return f"{x:.17g}"


def row_line(row: DiagnosticsRow) -> str:
    return ",".join(format_value(v) for v in row.values())


class SeriesWriter:
    """Append-consistent CSV writer; header on open, flush per row."""

    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8", newline="\n")
        self._fh.write(CSV_HEADER + "\n")
        self._fh.flush()

    def write(self, row: DiagnosticsRow) -> None:
        self._fh.write(row_line(row) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "SeriesWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_series(path: str, series: DiagnosticsSeries) -> None:
    with SeriesWriter(path) as writer:
        for row in series.rows:
            writer.write(row)


def read_series(path: str) -> DiagnosticsSeries:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected series header")
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(CSV_COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected "
                                 f"{len(CSV_COLUMNS)} columns, got {len(parts)}")
            rows.append(DiagnosticsRow(*(float(p) for p in parts)))
    return DiagnosticsSeries(rows=rows)
