from __future__ import annotations

import random

import pytest

from toolweave.grammar import ParseError, parse_solution, serialize_solution
from toolweave.model import Solution, ToolCall

from .gen import random_solution

FIG_OUTPUT = (
    "{MegaMart:[registerUser(username='WineTraveler38', "
    "password='strongpassword123!', email='jeanlucbordeaux@email.com', "
    "preferredLanguage='French', marketingConsent=False, "
    "homeLocation='Paris, France')]}"
)

FIG_OUTPUT_PRETTY = """{
  MegaMart:[
    registerUser(
      username='WineTraveler38', password='strongpassword123!',
      email='jeanlucbordeaux@email.com', preferredLanguage='French',
      marketingConsent=False, homeLocation='Paris, France'
    )
  ]
}"""


class TestParse:
    def test_reference_output(self):
        s = parse_solution(FIG_OUTPUT)
        assert len(s.calls) == 1
        call = s.calls[0]
        assert call.platform == "MegaMart"
        assert call.function == "registerUser"
        assert len(call.args) == 6
        assert call.args["marketingConsent"] is False
        assert call.args["homeLocation"] == "Paris, France"
        assert call.args["username"] == "WineTraveler38"

    def test_reference_output_pretty_printed(self):
        assert parse_solution(FIG_OUTPUT_PRETTY) == parse_solution(FIG_OUTPUT)

    def test_minimal_zero_arg_call(self):
        s = parse_solution("{P:[f()]}")
        assert s == Solution(calls=(ToolCall("P", "f", {}),))

    def test_leading_prose_rejected_at_offset_zero(self):
        with pytest.raises(ParseError) as err:
            parse_solution("I will call {P:[f(x=1)]}")
        assert err.value.position == 0

    def test_trailing_prose_rejected(self):
        with pytest.raises(ParseError) as err:
            parse_solution("{P:[f(x=1)]} Done!")
        assert err.value.expected == "end of input"

    def test_surrounding_whitespace_ok(self):
        assert parse_solution("  \n {P:[f()]} \n ") == parse_solution("{P:[f()]}")

    def test_multiple_platforms_and_calls(self):
        s = parse_solution("{P:[f(x=1), g()], Q:[h(y='a')]}")
        assert [(c.platform, c.function) for c in s.calls] == [
            ("P", "f"), ("P", "g"), ("Q", "h"),
        ]

    def test_duplicate_platform_entries_concatenate(self):
        s = parse_solution("{P:[f()], P:[g()]}")
        assert [c.function for c in s.calls] == ["f", "g"]

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("{P:[f(a=1)]}", 1),
            ("{P:[f(a=-12)]}", -12),
            ("{P:[f(a=+3)]}", 3),
            ("{P:[f(a=4.5)]}", 4.5),
            ("{P:[f(a=1e3)]}", 1000.0),
            ("{P:[f(a=-2.5E-1)]}", -0.25),
            ("{P:[f(a=True)]}", True),
            ("{P:[f(a=true)]}", True),
            ("{P:[f(a=False)]}", False),
            ("{P:[f(a=false)]}", False),
            ("{P:[f(a=None)]}", None),
            ("{P:[f(a=null)]}", None),
            ('{P:[f(a="dq")]}', "dq"),
            ("{P:[f(a='sq')]}", "sq"),
            ("{P:[f(a='it\\'s')]}", "it's"),
            ("{P:[f(a='a\\nb')]}", "a\nb"),
            ("{P:[f(a=[1, 'x', [True]])]}", [1, "x", [True]]),
            ("{P:[f(a={k: 1, 'two': [2]})]}", {"k": 1, "two": [2]}),
            ("{P:[f(a={})]}", {}),
            ("{P:[f(a=[])]}", []),
        ],
    )
    def test_literals(self, text, expected):
        s = parse_solution(text)
        got = s.calls[0].args["a"]
        assert got == expected
        assert type(got) is type(expected)

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "{}",
            "{P:[]}",
            "{P:[f(x=)]}",
            "{P:[f(x)]}",
            "{P:[f(x=1]}",
            "{P:[f(x=1)]",
            "{P:[f(x=bare)]}",
            "{P:[f(x=1) g()]}",
            "{P:f()}",
            "{P:[f(x=1,)]}",
            "{'P':[f()]}",
            "{P:[f(x='unterminated)]}",
            "{P:[f(x=1)]}}",
        ],
    )
    def test_malformed_inputs(self, text):
        with pytest.raises(ParseError):
            parse_solution(text)

    def test_duplicate_arg_names_rejected(self):
        with pytest.raises(ParseError):
            parse_solution("{P:[f(x=1, x=2)]}")

    def test_duplicate_map_keys_rejected(self):
        with pytest.raises(ParseError):
            parse_solution("{P:[f(a={k: 1, k: 2})]}")

    def test_deep_nesting_is_a_parse_error_not_a_crash(self):
        text = "{P:[f(a=" + "[" * 500 + "]" * 500 + ")]}"
        with pytest.raises(ParseError):
            parse_solution(text)

    def test_error_position_within_input(self):
        for text in ["{P:[f(", "oops", "{P:[f(x=1)", ""]:
            with pytest.raises(ParseError) as err:
                parse_solution(text)
            assert 0 <= err.value.position <= len(text)


class TestSerialize:
    def test_minimal(self):
        s = Solution(calls=(ToolCall("P", "f", {"x": 1}),))
        assert serialize_solution(s) == "{P:[f(x=1)]}"

    def test_reference_output_round_trips_to_itself(self):
        s = parse_solution(FIG_OUTPUT)
        assert serialize_solution(s) == FIG_OUTPUT

    def test_pretty_input_serializes_to_canonical_flat_form(self):
        assert serialize_solution(parse_solution(FIG_OUTPUT_PRETTY)) == FIG_OUTPUT

    def test_canonical_spacing_and_quotes(self):
        s = Solution(
            calls=(
                ToolCall("P", "f", {"a": 'say "hi"', "b": True, "c": None}),
                ToolCall("P", "g", {}),
                ToolCall("Q", "h", {"d": [1, 2.5], "e": {"k": "v"}}),
            )
        )
        assert serialize_solution(s) == (
            "{P:[f(a='say \"hi\"', b=True, c=None), g()], "
            "Q:[h(d=[1, 2.5], e={'k': 'v'})]}"
        )

    def test_non_identifier_names_rejected(self):
        with pytest.raises(ValueError):
            serialize_solution(Solution(calls=(ToolCall("Mega Mart", "f", {}),)))
        with pytest.raises(ValueError):
            serialize_solution(Solution(calls=(ToolCall("P", "do-it", {}),)))


class TestRoundTrip:
    def test_thousand_seeded_random_solutions(self):
        rng = random.Random(20240817)
        for _ in range(1000):
            s = random_solution(rng)
            assert parse_solution(serialize_solution(s)) == s

    def test_quasi_idempotence_on_parsable_texts(self):
        rng = random.Random(4242)
        for _ in range(200):
            text = serialize_solution(random_solution(rng))
            once = serialize_solution(parse_solution(text))
            twice = serialize_solution(parse_solution(once))
            assert once == twice

    def test_fuzz_never_crashes(self):
        rng = random.Random(777)
        seeds = ["{P:[f(x=1)]}", "{P:[f(a=[1, {k: 'v'}])]}", "junk"]
        for i in range(2000):
            if i % 3 == 0:
                text = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 60))).decode(
                    "latin-1"
                )
            else:
                base = list(rng.choice(seeds))
                for _ in range(rng.randrange(1, 6)):
                    pos = rng.randrange(len(base))
                    base[pos] = chr(rng.randrange(32, 127))
                text = "".join(base)
            try:
                parse_solution(text)
            except ParseError:
                pass
