"""Tests for quote-file parsing, the fixture catalog, and curve serialization.

Expected values for the built-in datasets are frozen from their sources:
row counts, forwards, maturities, and individual vols are asserted against
the literal numbers the fixture files must contain.  Serialization tests
verify lossless 17-digit round-trips against the binary doubles produced by
an independently constructed solved model.
"""

from __future__ import annotations

import io
import math

import numpy as np
import pytest

from quadsmile.black import black_otm
from quadsmile.calibration import CalibrationConfig, QuoteSet, calibrate
from quadsmile.errors import (
    InvalidQuotesError,
    MissingMetadataError,
    OutOfDomainError,
    ParseError,
)
from quadsmile.kernel import QuadraticPiece
from quadsmile.marketdata import (
    CURVE_COLUMNS,
    ZERO_BID_WEIGHT,
    builtin_fixtures,
    emit_curve_csv,
    fixture_names,
    load_fixture,
    parse_curve_csv,
    parse_quote_csv,
)
from quadsmile.pdde import LocalVarianceFunction, solve_pdde

# ---------------------------------------------------------------------------
# parse_quote_csv
# ---------------------------------------------------------------------------

MINIMAL = """\
# forward=100
# maturity=0.5
strike,vol
90,0.25
100,0.2
110,0.22
"""


class TestParseQuoteCsv:
    def test_minimal_file(self) -> None:
        quotes = parse_quote_csv(io.StringIO(MINIMAL))
        assert quotes.forward == 100.0
        assert quotes.maturity == 0.5
        assert quotes.discount is None
        np.testing.assert_array_equal(quotes.strikes, [90.0, 100.0, 110.0])
        np.testing.assert_array_equal(quotes.vols, [0.25, 0.2, 0.22])
        np.testing.assert_array_equal(quotes.weights, [1.0, 1.0, 1.0])

    def test_single_row_file_is_valid(self) -> None:
        text = "# forward=1\n# maturity=1\nstrike,vol\n1.0,0.3\n"
        quotes = parse_quote_csv(io.StringIO(text))
        assert quotes.strikes.size == 1

    def test_optional_metadata_parsed(self) -> None:
        text = (
            "# name=demo\n# forward=100\n# maturity=0.5\n# discount=0.99\n"
            "# spot=99.5\nstrike,vol\n100,0.2\n"
        )
        quotes = parse_quote_csv(io.StringIO(text))
        assert quotes.discount == 0.99

    def test_weight_column_used_as_is(self) -> None:
        text = (
            "# forward=100\n# maturity=0.5\nstrike,vol,weight\n"
            "90,0.25,0.5\n100,0.2,2\n"
        )
        quotes = parse_quote_csv(io.StringIO(text))
        np.testing.assert_array_equal(quotes.weights, [0.5, 2.0])

    def test_bid_ask_mid_replaces_vol_when_bid_positive(self) -> None:
        text = (
            "# forward=100\n# maturity=0.5\nstrike,vol,bid,ask\n"
            "90,0.30,0.28,0.32\n100,0.2,0.00,0.25\n"
        )
        quotes = parse_quote_csv(io.StringIO(text))
        # live bid: mid of 0.28/0.32; zero bid: listed vol kept, weight cut
        np.testing.assert_allclose(quotes.vols, [0.30, 0.2])
        np.testing.assert_array_equal(quotes.weights, [1.0, ZERO_BID_WEIGHT])

    def test_explicit_weight_wins_over_bid_ask_default(self) -> None:
        text = (
            "# forward=100\n# maturity=0.5\nstrike,vol,weight,bid,ask\n"
            "90,0.30,7,0.28,0.32\n100,0.2,3,0.00,0.25\n"
        )
        quotes = parse_quote_csv(io.StringIO(text))
        np.testing.assert_allclose(quotes.vols, [0.30, 0.2])
        np.testing.assert_array_equal(quotes.weights, [7.0, 3.0])

    def test_unsorted_rows_warn_and_sort(self) -> None:
        text = (
            "# forward=100\n# maturity=0.5\nstrike,vol,weight\n"
            "110,0.22,3\n90,0.25,1\n100,0.2,2\n"
        )
        with pytest.warns(UserWarning, match="auto-sorted"):
            quotes = parse_quote_csv(io.StringIO(text))
        np.testing.assert_array_equal(quotes.strikes, [90.0, 100.0, 110.0])
        np.testing.assert_array_equal(quotes.vols, [0.25, 0.2, 0.22])
        np.testing.assert_array_equal(quotes.weights, [1.0, 2.0, 3.0])

    def test_missing_forward_and_maturity(self) -> None:
        with pytest.raises(MissingMetadataError, match="forward, maturity"):
            parse_quote_csv(io.StringIO("strike,vol\n100,0.2\n"))
        with pytest.raises(MissingMetadataError, match="maturity"):
            parse_quote_csv(
                io.StringIO("# forward=100\nstrike,vol\n100,0.2\n")
            )

    def test_parse_error_carries_line_number(self) -> None:
        text = "# forward=100\n# maturity=0.5\nstrike,vol\n90,0.25\n100,oops\n"
        with pytest.raises(ParseError, match="line 5"):
            parse_quote_csv(io.StringIO(text))

    def test_wrong_field_count_carries_line_number(self) -> None:
        text = "# forward=100\n# maturity=0.5\nstrike,vol\n90,0.25,1.0\n"
        with pytest.raises(ParseError, match="line 4"):
            parse_quote_csv(io.StringIO(text))

    def test_bad_metadata_line(self) -> None:
        with pytest.raises(ParseError, match="line 1"):
            parse_quote_csv(io.StringIO("# forward 100\nstrike,vol\n90,0.2\n"))

    def test_non_numeric_metadata(self) -> None:
        text = "# forward=abc\n# maturity=0.5\nstrike,vol\n90,0.2\n"
        with pytest.raises(ParseError, match="forward"):
            parse_quote_csv(io.StringIO(text))

    def test_unrecognized_header(self) -> None:
        text = "# forward=100\n# maturity=0.5\nstrike,price\n90,0.2\n"
        with pytest.raises(ParseError, match="header"):
            parse_quote_csv(io.StringIO(text))

    def test_empty_and_headerless_files(self) -> None:
        with pytest.raises(ParseError, match="no header"):
            parse_quote_csv(io.StringIO(""))
        with pytest.raises(ParseError, match="no data"):
            parse_quote_csv(io.StringIO("# forward=1\n# maturity=1\nstrike,vol\n"))

    def test_duplicate_strikes_rejected_by_validation(self) -> None:
        text = "# forward=100\n# maturity=0.5\nstrike,vol\n90,0.25\n90,0.2\n"
        with pytest.raises(InvalidQuotesError):
            parse_quote_csv(io.StringIO(text))

    def test_trailing_comments_and_blank_lines_ignored(self) -> None:
        text = (
            "# forward=100\n# maturity=0.5\n\nstrike,vol\n90,0.25\n"
            "# a trailing comment\n\n100,0.2\n"
        )
        quotes = parse_quote_csv(io.StringIO(text))
        assert quotes.strikes.size == 2

    def test_path_input(self, tmp_path) -> None:
        path = tmp_path / "quotes.csv"
        path.write_text(MINIMAL, encoding="utf-8")
        quotes = parse_quote_csv(path)
        assert quotes.strikes.size == 3


# ---------------------------------------------------------------------------
# builtin fixtures
# ---------------------------------------------------------------------------


EXPECTED_FIXTURES = {
    "audnzd_1w",
    "flat_lognormal",
    "jackel_case1",
    "jackel_case2",
    "lognormal_a",
    "lognormal_b",
    "lognormal_c",
    "lognormal_d",
    "spx_1m",
    "spx_1w",
    "tsla_1m",
}


class TestBuiltinFixtures:
    def test_catalog_complete(self) -> None:
        assert set(fixture_names()) == EXPECTED_FIXTURES

    def test_every_fixture_validates(self) -> None:
        catalog = builtin_fixtures()
        assert set(catalog) == EXPECTED_FIXTURES
        for name, quotes in catalog.items():
            assert isinstance(quotes, QuoteSet), name
            assert quotes.strikes.size >= 1

    def test_lookup_is_case_insensitive(self) -> None:
        quotes = load_fixture("LOGNORMAL_D")
        assert quotes.forward == 101.0

    def test_unknown_fixture(self) -> None:
        with pytest.raises(KeyError, match="unknown fixture"):
            load_fixture("nope")

    def test_tsla_shape(self) -> None:
        quotes = load_fixture("tsla_1m")
        assert quotes.strikes.size == 71
        assert quotes.forward == 357.755926
        assert quotes.maturity == 0.095890
        # vols arrive as decimals, weights from the listed inverse-spread
        assert np.all((quotes.vols > 0.2) & (quotes.vols < 1.5))
        assert quotes.weights.min() > 0.0

    def test_lognormal_sets(self) -> None:
        d = load_fixture("lognormal_d")
        np.testing.assert_array_equal(
            d.strikes, [85, 90, 95, 100, 101, 105, 110, 115, 120, 130]
        )
        np.testing.assert_array_equal(d.vols, np.full(10, 0.2))
        assert d.forward == 101.0
        assert d.maturity == 0.25
        a = load_fixture("lognormal_a")
        assert a.strikes[0] == 88.77
        assert a.strikes.size == 10
        for name in ("lognormal_a", "lognormal_b", "lognormal_c"):
            quotes = load_fixture(name)
            assert quotes.strikes.size == 10
            np.testing.assert_array_equal(quotes.vols, np.full(10, 0.2))

    def test_flat_lognormal(self) -> None:
        quotes = load_fixture("flat_lognormal")
        assert quotes.forward == 1.025
        assert quotes.maturity == 0.25
        assert quotes.strikes.size == 10
        np.testing.assert_array_equal(quotes.vols, np.full(10, 0.2))

    def test_jackel_cases(self) -> None:
        one = load_fixture("jackel_case1")
        two = load_fixture("jackel_case2")
        for quotes in (one, two):
            assert quotes.strikes.size == 21
            assert quotes.forward == 1.0
            assert quotes.maturity == 5.0722
            assert quotes.strikes[0] < 0.04 and quotes.strikes[-1] > 25.0
        # at-the-forward vols, frozen from the dataset definition
        i = int(np.searchsorted(one.strikes, 1.0))
        assert one.strikes[i] == 1.0
        assert one.vols[i] == 0.249328882881654
        assert two.vols[i] != one.vols[i]

    def test_spx_1w_bid_ask_weighting(self) -> None:
        quotes = load_fixture("spx_1w")
        assert quotes.strikes.size == 91
        assert quotes.forward == 2385.103981
        assert quotes.maturity == 0.021918
        assert quotes.discount == pytest.approx(
            math.exp(-0.009 * 0.021918), rel=1e-12
        )
        by_strike = dict(zip(quotes.strikes, zip(quotes.vols, quotes.weights)))
        # zero-bid wing: listed vol kept, de-emphasized
        vol, weight = by_strike[1800.0]
        assert vol == 0.58 and weight == ZERO_BID_WEIGHT
        # live bid/ask: mid vol, unit weight
        vol, weight = by_strike[1880.0]
        assert vol == pytest.approx(0.54) and weight == 1.0
        assert int(np.sum(quotes.weights == ZERO_BID_WEIGHT)) == 5

    def test_spx_1m(self) -> None:
        quotes = load_fixture("spx_1m")
        assert quotes.strikes.size == 75
        assert quotes.forward == 2629.80
        assert quotes.maturity == 0.082192
        assert quotes.discount == pytest.approx(
            math.exp(-0.0097 * 0.082192), rel=1e-12
        )

    def test_audnzd(self) -> None:
        quotes = load_fixture("audnzd_1w")
        assert quotes.strikes.size == 5
        assert quotes.forward == 1.07845
        assert quotes.maturity == pytest.approx(7.0 / 365.0, rel=1e-15)
        assert quotes.discount == 0.999712587139
        # smile: 10d-put, 25d-put, atm, 25d-call, 10d-call pillars
        np.testing.assert_allclose(
            quotes.vols, [0.0614, 0.0519, 0.0514, 0.0559, 0.0649], atol=1e-15
        )
        assert np.all(np.diff(quotes.strikes) > 0.0)
        assert quotes.strikes[0] < quotes.forward < quotes.strikes[-1]


# ---------------------------------------------------------------------------
# emit_curve_csv / parse_curve_csv
# ---------------------------------------------------------------------------


def constant_solution(level: float = 0.2):
    piece = QuadraticPiece(0.0, 0.0, level)
    localvar = LocalVarianceFunction(
        np.array([0.5, 1.0, 1.5]), (piece, piece), 1
    )
    return solve_pdde(localvar, 0.25)


class TestEmitCurveCsv:
    def test_columns_and_values(self) -> None:
        solution = constant_solution()
        grid = np.linspace(0.6, 1.4, 9)
        text = emit_curve_csv(solution, grid)
        table = parse_curve_csv(io.StringIO(text))
        assert tuple(table) == CURVE_COLUMNS
        np.testing.assert_array_equal(table["strike"], grid)
        np.testing.assert_array_equal(table["otm_price"], solution.price(grid, "otm"))
        np.testing.assert_array_equal(
            table["call_price"], solution.price(grid, "call")
        )
        np.testing.assert_array_equal(table["density"], solution.density(grid))
        # vol column must reprice the otm column through the Black formula
        for strike, vol, price in zip(
            table["strike"], table["implied_vol"], table["otm_price"]
        ):
            assert black_otm(1.0, strike, 0.25, vol) == pytest.approx(
                price, rel=1e-10
            )

    def test_round_trip_is_lossless(self) -> None:
        solution = constant_solution()
        grid = np.linspace(0.51, 1.49, 23)
        table = parse_curve_csv(io.StringIO(emit_curve_csv(solution, grid)))
        rewritten = parse_curve_csv(
            io.StringIO(emit_curve_csv(solution, table["strike"]))
        )
        for name in CURVE_COLUMNS:
            np.testing.assert_array_equal(table[name], rewritten[name])

    def test_density_nonnegative(self) -> None:
        solution = constant_solution()
        grid = np.linspace(0.501, 1.499, 200)
        table = parse_curve_csv(io.StringIO(emit_curve_csv(solution, grid)))
        assert np.all(table["density"] >= 0.0)

    def test_discounted_price_column(self) -> None:
        solution = constant_solution()
        grid = np.array([0.9, 1.0, 1.1])
        table = parse_curve_csv(
            io.StringIO(emit_curve_csv(solution, grid, discount=0.97))
        )
        np.testing.assert_array_equal(
            table["discounted_price"], 0.97 * table["call_price"]
        )

    def test_metadata_header_emitted(self) -> None:
        solution = constant_solution()
        text = emit_curve_csv(
            solution, np.array([1.0]), metadata={"forward": 1.0, "label": "demo"}
        )
        head = text.splitlines()[:2]
        assert head[0] == "# forward=1"
        assert head[1] == "# label=demo"

    @pytest.mark.parametrize("bad", [0.5, 1.5, 0.2, 7.0])
    def test_out_of_domain_grid(self, bad: float) -> None:
        solution = constant_solution()
        with pytest.raises(OutOfDomainError):
            emit_curve_csv(solution, np.array([1.0, bad]))

    def test_empty_grid(self) -> None:
        with pytest.raises(OutOfDomainError, match="empty"):
            emit_curve_csv(constant_solution(), np.array([]))

    def test_fitted_vols_reproduced_at_quoted_strikes(self) -> None:
        quotes = load_fixture("flat_lognormal")
        result = calibrate(quotes, CalibrationConfig(model="quadratic"))
        text = emit_curve_csv(result.solution, quotes.strikes)
        table = parse_curve_csv(io.StringIO(text))
        rms = float(
            np.sqrt(np.mean((table["implied_vol"] - quotes.vols) ** 2))
        )
        # unit weights: the emitted-vol RMS is the reported rmse_vol up to
        # the implied-vol inversion tolerance
        assert rms <= result.rmse_vol * (1.0 + 1e-6) + 1e-12


class TestParseCurveCsv:
    def test_rejects_ragged_rows(self) -> None:
        text = "strike,otm_price\n1.0,0.1\n1.1\n"
        with pytest.raises(ParseError, match="line 3"):
            parse_curve_csv(io.StringIO(text))

    def test_rejects_non_numeric(self) -> None:
        text = "strike,otm_price\n1.0,abc\n"
        with pytest.raises(ParseError, match="line 2"):
            parse_curve_csv(io.StringIO(text))

    def test_rejects_empty(self) -> None:
        with pytest.raises(ParseError, match="no header"):
            parse_curve_csv(io.StringIO(""))
