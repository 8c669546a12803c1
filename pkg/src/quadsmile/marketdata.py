"""Quote-file ingestion, built-in fixture catalog, and curve serialization.

Quote files are UTF-8 CSVs with leading ``# key=value`` metadata lines
(``forward`` and ``maturity`` are required; ``discount``, ``spot``, ``name``
and free-form keys are optional) followed by a header row

    strike,vol[,weight][,bid,ask]

and one data row per strike.  When ``bid``/``ask`` vol columns are present,
the mid ``(bid + ask) / 2`` replaces the ``vol`` column for rows with a
positive bid; rows with a zero bid keep the listed vol but default to a
small weight so that stale deep-wing quotes do not dominate a fit.  An
explicit ``weight`` column always wins over these defaults.

Curve output is the five-column schema ``strike,otm_price,call_price,
implied_vol,density`` (plus ``discounted_price`` when a discount factor is
supplied), printed with 17 significant digits so that parsing the emitted
file recovers the exact binary doubles.
"""

from __future__ import annotations

import io
import warnings
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .black import implied_vol_curve
from .errors import MissingMetadataError, OutOfDomainError, ParseError
from .calibration import QuoteSet
from .pdde import LVGSolution

__all__ = [
    "parse_quote_csv",
    "emit_curve_csv",
    "parse_curve_csv",
    "builtin_fixtures",
    "fixture_names",
    "load_fixture",
    "ZERO_BID_WEIGHT",
    "CURVE_COLUMNS",
]

# Fit weight assigned to rows whose bid vol is zero (no live bid: the quote
# is kept but de-emphasized roughly a hundredfold).
ZERO_BID_WEIGHT = 0.01

CURVE_COLUMNS = ("strike", "otm_price", "call_price", "implied_vol", "density")

_HEADERS = {
    ("strike", "vol"),
    ("strike", "vol", "weight"),
    ("strike", "vol", "bid", "ask"),
    ("strike", "vol", "weight", "bid", "ask"),
}


def _fmt(value: float) -> str:
    """Format a double with 17 significant digits (lossless round-trip)."""
    return f"{value:.17g}"


def _iter_lines(source: str | Path | IO[str]) -> Iterable[str]:
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    return text.splitlines()


def parse_quote_csv(source: str | Path | IO[str]) -> QuoteSet:
    """Parse a quote CSV (path or text stream) into a validated QuoteSet.

    Args:
        source: Filesystem path or readable text stream.

    Returns:
        A :class:`~quadsmile.calibration.QuoteSet`, sorted by strike.

    Raises:
        ParseError: Malformed metadata, header, or data row (the message
            carries the 1-based line number).
        MissingMetadataError: ``forward`` or ``maturity`` metadata absent.
        InvalidQuotesError: Parsed rows violate quote-set invariants
            (e.g. duplicate strikes or non-positive vols).

    Out-of-order strikes are not an error: the rows are sorted and a
    ``UserWarning`` is emitted.
    """
    metadata: dict[str, str] = {}
    header: tuple[str, ...] | None = None
    rows: list[tuple[int, list[str]]] = []

    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is not None:
                continue  # trailing comments are ignored
            body = line.lstrip("#").strip()
            if not body:
                continue
            key, sep, value = body.partition("=")
            if not sep:
                raise ParseError(
                    f"line {lineno}: metadata line must be '# key=value', got {line!r}"
                )
            metadata[key.strip()] = value.strip()
            continue
        if header is None:
            header = tuple(part.strip().lower() for part in line.split(","))
            if header not in _HEADERS:
                raise ParseError(
                    f"line {lineno}: unrecognized header {','.join(header)!r}; "
                    "expected strike,vol[,weight][,bid,ask]"
                )
            continue
        parts = [part.strip() for part in line.split(",")]
        if len(parts) != len(header):
            raise ParseError(
                f"line {lineno}: expected {len(header)} fields, got {len(parts)}"
            )
        rows.append((lineno, parts))

    if header is None:
        raise ParseError("no header row found (expected strike,vol[,weight][,bid,ask])")
    if not rows:
        raise ParseError("no data rows found")

    missing = [key for key in ("forward", "maturity") if key not in metadata]
    if missing:
        raise MissingMetadataError(
            f"missing required metadata: {', '.join(missing)}"
        )

    def meta_float(key: str) -> float:
        try:
            return float(metadata[key])
        except ValueError:
            raise ParseError(
                f"metadata {key}={metadata[key]!r} is not a number"
            ) from None

    forward = meta_float("forward")
    maturity = meta_float("maturity")
    discount = meta_float("discount") if "discount" in metadata else None

    columns = {name: np.empty(len(rows)) for name in header}
    for i, (lineno, parts) in enumerate(rows):
        for name, part in zip(header, parts):
            try:
                columns[name][i] = float(part)
            except ValueError:
                raise ParseError(
                    f"line {lineno}: field {name}={part!r} is not a number"
                ) from None

    strikes = columns["strike"]
    vols = columns["vol"]
    weights = columns.get("weight")

    if "bid" in columns:
        bid, ask = columns["bid"], columns["ask"]
        live = bid > 0.0
        vols = np.where(live, 0.5 * (bid + ask), vols)
        if weights is None:
            weights = np.where(live, 1.0, ZERO_BID_WEIGHT)

    order = np.argsort(strikes, kind="stable")
    if not np.array_equal(order, np.arange(strikes.size)):
        warnings.warn(
            "quote strikes were not sorted; rows auto-sorted by strike",
            stacklevel=2,
        )
        strikes = strikes[order]
        vols = vols[order]
        if weights is not None:
            weights = weights[order]

    return QuoteSet(
        strikes=strikes,
        vols=vols,
        forward=forward,
        maturity=maturity,
        weights=weights,
        discount=discount,
    )


def emit_curve_csv(
    solution: LVGSolution,
    grid: np.ndarray,
    *,
    discount: float | None = None,
    metadata: dict[str, object] | None = None,
) -> str:
    """Serialize a solved model on a strike grid to CSV text.

    Args:
        solution: Solved model to evaluate.
        grid: Strikes to evaluate at; must lie strictly inside the model
            domain ``(lower, upper)``.
        discount: Optional discount factor; when given, an extra
            ``discounted_price`` column (``discount * call_price``) is
            appended.
        metadata: Optional ``# key=value`` header entries (floats are
            formatted losslessly, other values via ``str``).

    Returns:
        CSV text with columns ``strike,otm_price,call_price,implied_vol,
        density`` and 17-significant-digit formatting.

    Raises:
        OutOfDomainError: Any grid point outside the open model domain.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    lower, upper = solution.localvar.lower, solution.localvar.upper
    if grid.size == 0:
        raise OutOfDomainError("curve grid is empty")
    if float(grid.min()) <= lower or float(grid.max()) >= upper:
        raise OutOfDomainError(
            f"curve grid [{grid.min():g}, {grid.max():g}] must lie strictly "
            f"inside the model domain ({lower:g}, {upper:g})"
        )

    otm = solution.price(grid, kind="otm")
    call = solution.price(grid, kind="call")
    vols = implied_vol_curve(otm, solution.forward, grid, solution.maturity)
    dens = solution.density(grid)

    columns = list(CURVE_COLUMNS)
    data = [grid, otm, call, vols, dens]
    if discount is not None:
        columns.append("discounted_price")
        data.append(discount * call)

    out = io.StringIO()
    for key, value in (metadata or {}).items():
        text = _fmt(value) if isinstance(value, float) else str(value)
        out.write(f"# {key}={text}\n")
    out.write(",".join(columns) + "\n")
    for row in zip(*data):
        out.write(",".join(_fmt(v) for v in row) + "\n")
    return out.getvalue()


def parse_curve_csv(source: str | Path | IO[str]) -> dict[str, np.ndarray]:
    """Parse CSV text produced by :func:`emit_curve_csv` into column arrays.

    Metadata lines are ignored; the result maps each header name to a float
    array.  This is the round-trip inverse of :func:`emit_curve_csv` for
    every numeric column.
    """
    header: list[str] | None = None
    rows: list[list[float]] = []
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = [part.strip() for part in line.split(",")]
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(
                f"line {lineno}: expected {len(header)} fields, got {len(parts)}"
            )
        try:
            rows.append([float(part) for part in parts])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric field") from None
    if header is None:
        raise ParseError("no header row found")
    table = np.asarray(rows, dtype=float)
    return {name: table[:, j].copy() for j, name in enumerate(header)}


def _fixture_dir() -> Path:
    from importlib.resources import files

    return Path(str(files("quadsmile") / "fixtures"))


def fixture_names() -> tuple[str, ...]:
    """Names of the built-in datasets, alphabetically."""
    return tuple(sorted(p.stem for p in _fixture_dir().glob("*.csv")))


def load_fixture(name: str) -> QuoteSet:
    """Load one built-in dataset by name (case-insensitive).

    Raises:
        KeyError: Unknown fixture name (the message lists valid names).
    """
    path = _fixture_dir() / f"{name.lower()}.csv"
    if not path.exists():
        raise KeyError(
            f"unknown fixture {name!r}; available: {', '.join(fixture_names())}"
        )
    return parse_quote_csv(path)


def builtin_fixtures() -> dict[str, QuoteSet]:
    """Load every built-in dataset shipped under ``fixtures/``.

    Returns:
        Mapping of fixture name to parsed, validated quote set.  Includes
        the flat-vol lognormal strike sets (``lognormal_a`` … ``lognormal_d``
        and ``flat_lognormal``), the two wide-moneyness stress smiles
        (``jackel_case1``, ``jackel_case2``), and the market smiles
        ``tsla_1m``, ``spx_1w``, ``spx_1m``, ``audnzd_1w``.
    """
    return {name: load_fixture(name) for name in fixture_names()}
