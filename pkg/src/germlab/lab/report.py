"""Experiment reports and their CSV form.

A CSV starts with ``# key: value`` metadata lines (the full config echo
among them), then a header row and data rows. Reports use one long table::

    section,arm,quantity,value,stderr,count,note
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

Z_RULE = 4.0
COLUMNS = ("section", "arm", "quantity", "value", "stderr", "count", "note")


def fmt(x) -> str:
    """Decimal with 17 significant digits; rationals as ``p/q``."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return f"{x:.17g}"
    return str(x)


@dataclass(frozen=True)
class Estimate:
    """Sample mean with standard error over ``count`` observations."""

    value: float
    stderr: float
    count: int

    @classmethod
    def of(cls, sample) -> "Estimate":
        x = np.asarray(sample, dtype=float)
        n = len(x)
        if n == 0:
            return cls(math.nan, math.nan, 0)
        se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return cls(float(x.mean()), se, n)

    @classmethod
    def frequency(cls, hits) -> "Estimate":
        """Bernoulli frequency; the standard error uses ``p(1-p)/n``."""
        x = np.asarray(hits, dtype=bool)
        n = len(x)
        if n == 0:
            return cls(math.nan, math.nan, 0)
        p = float(x.mean())
        return cls(p, math.sqrt(p * (1 - p) / n), n)


@dataclass(frozen=True)
class Claim:
    """``lhs >= rhs`` checked as ``margin >= -tolerance``.

    ``hard`` claims decide the exit status; soft ones are reported flags.
    """

    label: str
    margin: float
    tolerance: float
    hard: bool = True

    @property
    def passed(self) -> bool:
        return bool(self.margin >= -self.tolerance)


def ci_claim(label: str, upper: Estimate, lower: Estimate, hard: bool = True) -> Claim:
    """Direction check at 4 standard errors: ``upper`` at least ``lower``.

    Passes unless the two intervals of half-width 4 se are disjoint with
    ``upper`` below. With no data on either side nothing can be refuted.
    """
    if upper.count == 0 or lower.count == 0:
        return Claim(label, 0.0, 0.0, hard)
    se = (upper.stderr if upper.count > 1 else 0.0) + (lower.stderr if lower.count > 1 else 0.0)
    return Claim(label, upper.value - lower.value, Z_RULE * se, hard)


@dataclass
class Report:
    """Rows plus claims for one experiment or engine run."""

    name: str
    kind: str
    columns: Sequence[str] = COLUMNS
    rows: list[list] = field(default_factory=list)
    claims: list[Claim] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, *values) -> None:
        self.rows.append(list(values))

    def estimate(self, section: str, arm: str, quantity: str, est: Estimate, note: str = "") -> None:
        self.add(section, arm, quantity, est.value, est.stderr, est.count, note)

    def claim(self, claim: Claim) -> Claim:
        self.claims.append(claim)
        return claim

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.claims if c.hard)

    def claim_rows(self) -> Iterable[list]:
        for c in self.claims:
            status = "pass" if c.passed else ("FAIL" if c.hard else "flag")
            yield ["claim", "", c.label, c.margin, c.tolerance, "", status]


def header_lines(meta: dict) -> list[str]:
    lines = []
    for key, value in meta.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True, default=str, separators=(",", ":"))
        else:
            value = fmt(value)
        for i, part in enumerate(str(value).splitlines() or [""]):
            lines.append(f"# {key}: {part}" if i == 0 else f"#   {part}")
    return lines


def write_csv(path: Path | str | None, meta: dict, columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write (or just render, when ``path`` is None) a CSV with metadata."""
    buf = io.StringIO()
    for line in header_lines(meta):
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    return text


def read_header(text: str) -> tuple[list[str], list[str]]:
    """Metadata keys (in order, deduplicated) and the column row of a CSV."""
    keys: list[str] = []
    columns: list[str] = []
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if not line.startswith("#   ") and ":" in body:
                key = body.split(":", 1)[0].strip()
                if key not in keys:
                    keys.append(key)
            continue
        columns = next(csv.reader([line]))
        break
    return keys, columns
