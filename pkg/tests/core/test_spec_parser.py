from unittest import TestCase

from genrl._core import spec_lang as sl
from genrl._core.spec_parser import format_spec, parse_spec
from genrl.errors import SpecSyntaxError

from tests.resources import specs_data


class TestParseSpec(TestCase):
    def test_parse_spec__choice_benchmark_shape(self):
        """Should bind 'or' tightest, then ';', then 'ensuring'."""
        spec = parse_spec(specs_data.choice, specs_data.symbols)
        self.assertIsInstance(spec, sl.Ensuring)
        self.assertIsInstance(spec.spec, sl.Seq)
        self.assertIsInstance(spec.spec.first, sl.Choice)
        self.assertEqual("obs", spec.pred.name)

    def test_parse_spec__symbols_expand_and_label(self):
        """Should expand a symbol into its numbers and label the predicate with it."""
        spec = parse_spec("achieve reach(g1, eps)", specs_data.symbols)
        self.assertEqual((0.0, 4.0, 0.3), spec.pred.params)
        self.assertEqual("g1", spec.pred.name)

    def test_parse_spec__explicit_label_wins(self):
        spec = parse_spec("achieve reach(g1, eps) as first", specs_data.symbols)
        self.assertEqual("first", spec.pred.name)

    def test_parse_spec__left_associative(self):
        """Should group a; b; c as (a; b); c."""
        spec = parse_spec(
            "achieve reach(0, 1) as a; achieve reach(1, 1) as b; achieve reach(2, 1) as c"
        )
        self.assertIsInstance(spec.first, sl.Seq)
        self.assertEqual("c", spec.second.pred.name)

    def test_parse_spec__comments_and_newlines(self):
        text = "# go left first\nachieve reach(0, 1)\n  or achieve reach(2, 1)\n"
        self.assertIsInstance(parse_spec(text), sl.Choice)

    def test_parse_spec__error__positions(self):
        """Should raise a syntax error carrying the offending line and column."""
        for text, column in specs_data.bad:
            with self.subTest(text=text), self.assertRaises(SpecSyntaxError) as err:
                parse_spec(text, {"g1": (0.0, 4.0), "eps": 0.3})
            self.assertEqual(1, err.exception.line)
            self.assertGreaterEqual(err.exception.column, 1)
            if column is not None:
                self.assertEqual(column, err.exception.column)

    def test_parse_spec__error__second_line(self):
        with self.assertRaises(SpecSyntaxError) as err:
            parse_spec("achieve reach(0, 1)\n; achieve warp(1)")
        self.assertEqual(2, err.exception.line)
        self.assertEqual(11, err.exception.column)


class TestFormatSpec(TestCase):
    def test_format_spec__round_trip(self):
        """Should print text that parses back to an equal formula."""
        for text in specs_data.round_trip:
            with self.subTest(text=text):
                spec = parse_spec(text)
                self.assertEqual(spec, parse_spec(format_spec(spec)))

    def test_format_spec__minimal_parentheses(self):
        spec = parse_spec("achieve reach(0.0, 1.0); (achieve reach(1.0, 1.0) or achieve reach(2.0, 1.0))")
        self.assertEqual(
            "achieve reach(0.0, 1.0); achieve reach(1.0, 1.0) or achieve reach(2.0, 1.0)",
            format_spec(spec),
        )
