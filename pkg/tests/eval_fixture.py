"""Hand-built (prediction, gold) pairs covering every flag combination and
all six error categories. Structured prediction forms are hand-derived for
the reference scorer; texts for the evaluator under test."""

from __future__ import annotations

from dataclasses import dataclass

from toolweave.grammar import serialize_solution
from toolweave.model import Provenance, Sample, Solution, ToolCall

TRAINED_USER = "usr_trained"
UNTRAINED_USER = "usr_untrained"


@dataclass(frozen=True)
class FixtureCase:
    name: str
    sample: Sample
    pred_text: str
    pred_calls: list | None  # structured form for the reference scorer


def _sample(sid, user, calls, tags):
    gold = Solution(calls=tuple(ToolCall(**c) for c in calls))
    return Sample(
        id=sid, user_id=user, scenario="shopping", query="q",
        gold=gold, provenance=Provenance(tags=tags), status="model_verified",
    )


def _case(name, sample, pred_calls, text=None):
    if text is None:
        text = serialize_solution(
            Solution(calls=tuple(ToolCall(**c) for c in pred_calls))
        )
    return FixtureCase(name, sample, text, pred_calls)


GOLD_A = _sample(
    "smp_a", TRAINED_USER,
    [
        dict(
            platform="MegaMart", function="registerUser",
            args={
                "username": "WineTraveler38",
                "password": "pw123!",
                "email": "a@b.com",
                "preferredLanguage": "French",
                "marketingConsent": False,
                "homeLocation": "Paris, France",
            },
        )
    ],
    {
        (0, "username"): "profile",
        (0, "password"): "profile",
        (0, "email"): "profile",
        (0, "preferredLanguage"): "query",
        (0, "marketingConsent"): "profile",
        (0, "homeLocation"): "profile",
    },
)

GOLD_B = _sample(
    "smp_b", TRAINED_USER,
    [
        dict(platform="QuickKart", function="searchItems",
             args={"query": "earbuds", "maxResults": 5}),
        dict(platform="QuickKart", function="placeOrder",
             args={"itemId": "B07", "quantity": 2, "deliveryAddress": "12 Oak Ave"}),
    ],
    {
        (0, "query"): "query",
        (0, "maxResults"): "query",
        (1, "itemId"): "query",
        (1, "quantity"): "query",
        (1, "deliveryAddress"): "profile",
    },
)

GOLD_C = _sample(
    "smp_c", UNTRAINED_USER,
    [
        dict(platform="MegaMart", function="searchItems", args={"query": "wine"}),
        dict(platform="StreamHub", function="playMedia",
             args={"title": "Jazz", "volume": 7}),
    ],
    {(0, "query"): "query", (1, "title"): "query", (1, "volume"): "profile"},
)

GOLD_D = _sample(
    "smp_d", UNTRAINED_USER,
    [
        dict(platform="P", function="f", args={"x": 1}),
        dict(platform="P", function="f", args={"x": 2}),
    ],
    {(0, "x"): "query", (1, "x"): "profile"},
)

GOLD_E = _sample("smp_e", UNTRAINED_USER, [dict(platform="P", function="ping", args={})], {})

GOLD_F = _sample(
    "smp_f", UNTRAINED_USER,
    [
        dict(platform="P", function="configure",
             args={"options": {"b": 2, "a": " x "}, "tags": [1, 2.0]}),
    ],
    {(0, "options"): "query", (0, "tags"): "profile"},
)


def _a_args(**overrides):
    args = dict(GOLD_A.gold.calls[0].args)
    args.update(overrides)
    return args


CASES = [
    _case("a_identical", GOLD_A,
          [dict(platform="MegaMart", function="registerUser", args=_a_args())]),
    _case(
        "a_pretty_printed", GOLD_A,
        [dict(platform="MegaMart", function="registerUser", args=_a_args())],
        text=(
            "{\n  MegaMart:[\n    registerUser(\n"
            "      username='WineTraveler38', password='pw123!',\n"
            "      email='a@b.com', preferredLanguage='French',\n"
            "      marketingConsent=False, homeLocation='Paris, France'\n"
            "    )\n  ]\n}"
        ),
    ),
    _case("a_unparsable", GOLD_A, None, text="hello"),
    _case("a_leading_prose", GOLD_A, None,
          text="Sure! {MegaMart:[registerUser(username='WineTraveler38')]}"),
    _case("a_wrong_platform", GOLD_A,
          [dict(platform="QuickKart", function="registerUser", args=_a_args())]),
    _case("a_wrong_function", GOLD_A,
          [dict(platform="MegaMart", function="signUp", args=_a_args())]),
    _case("a_value_flip", GOLD_A,
          [dict(platform="MegaMart", function="registerUser",
                args=_a_args(marketingConsent=True))]),
    _case(
        "a_equivalent_values", GOLD_A,
        [dict(platform="MegaMart", function="registerUser",
              args=_a_args(homeLocation=" Paris, France ", marketingConsent=False))],
        text=(
            "{MegaMart:[registerUser(username='WineTraveler38', password='pw123!', "
            "email='a@b.com', preferredLanguage='French', marketingConsent=false, "
            "homeLocation=' Paris, France ')]}"
        ),
    ),
    _case("a_missing_arg", GOLD_A,
          [dict(platform="MegaMart", function="registerUser",
                args={k: v for k, v in _a_args().items() if k != "homeLocation"})]),
    _case("a_extra_arg", GOLD_A,
          [dict(platform="MegaMart", function="registerUser",
                args=_a_args(referral="friend"))]),
    _case("a_missing_plus_extra", GOLD_A,
          [dict(platform="MegaMart", function="registerUser",
                args={**{k: v for k, v in _a_args().items() if k != "email"},
                      "promo": True})]),
    _case("b_identical", GOLD_B, [dict(**{
        "platform": "QuickKart", "function": "searchItems",
        "args": {"query": "earbuds", "maxResults": 5}}),
        dict(platform="QuickKart", function="placeOrder",
             args={"itemId": "B07", "quantity": 2, "deliveryAddress": "12 Oak Ave"})]),
    _case("b_string_for_number", GOLD_B, [
        dict(platform="QuickKart", function="searchItems",
             args={"query": "earbuds", "maxResults": 5}),
        dict(platform="QuickKart", function="placeOrder",
             args={"itemId": "B07", "quantity": "2", "deliveryAddress": "12 Oak Ave"}),
    ]),
    _case("b_missing_call", GOLD_B, [
        dict(platform="QuickKart", function="searchItems",
             args={"query": "earbuds", "maxResults": 5}),
    ]),
    _case("b_extra_unknown_call", GOLD_B, [
        dict(platform="QuickKart", function="searchItems",
             args={"query": "earbuds", "maxResults": 5}),
        dict(platform="QuickKart", function="placeOrder",
             args={"itemId": "B07", "quantity": 2, "deliveryAddress": "12 Oak Ave"}),
        dict(platform="QuickKart", function="trackOrder", args={"orderId": "X1"}),
    ]),
    _case("b_duplicated_call", GOLD_B, [
        dict(platform="QuickKart", function="searchItems",
             args={"query": "earbuds", "maxResults": 5}),
        dict(platform="QuickKart", function="searchItems",
             args={"query": "earbuds", "maxResults": 5}),
        dict(platform="QuickKart", function="placeOrder",
             args={"itemId": "B07", "quantity": 2, "deliveryAddress": "12 Oak Ave"}),
    ]),
    _case("b_order_swapped", GOLD_B, [
        dict(platform="QuickKart", function="placeOrder",
             args={"itemId": "B07", "quantity": 2, "deliveryAddress": "12 Oak Ave"}),
        dict(platform="QuickKart", function="searchItems",
             args={"query": "earbuds", "maxResults": 5}),
    ]),
    _case("b_wrong_profile_value", GOLD_B, [
        dict(platform="QuickKart", function="searchItems",
             args={"query": "earbuds", "maxResults": 5}),
        dict(platform="QuickKart", function="placeOrder",
             args={"itemId": "B07", "quantity": 2, "deliveryAddress": "99 Elm St"}),
    ]),
    _case("c_identical", GOLD_C, [
        dict(platform="MegaMart", function="searchItems", args={"query": "wine"}),
        dict(platform="StreamHub", function="playMedia",
             args={"title": "Jazz", "volume": 7}),
    ]),
    _case("c_platform_swap", GOLD_C, [
        dict(platform="MegaMart", function="searchItems", args={"query": "wine"}),
        dict(platform="MegaMart", function="playMedia",
             args={"title": "Jazz", "volume": 7}),
    ]),
    _case("c_missing_and_wrong_param", GOLD_C, [
        dict(platform="MegaMart", function="searchItems", args={"query": "wine"}),
        dict(platform="StreamHub", function="playMedia", args={"title": "Rock"}),
    ]),
    _case("d_identical", GOLD_D, [
        dict(platform="P", function="f", args={"x": 1}),
        dict(platform="P", function="f", args={"x": 2}),
    ]),
    _case("d_swapped_values", GOLD_D, [
        dict(platform="P", function="f", args={"x": 2}),
        dict(platform="P", function="f", args={"x": 1}),
    ]),
    _case("d_one_call_only", GOLD_D, [
        dict(platform="P", function="f", args={"x": 1}),
    ]),
    _case("e_identical", GOLD_E, [dict(platform="P", function="ping", args={})]),
    _case("e_extra_arg", GOLD_E, [dict(platform="P", function="ping", args={"extra": 1})]),
    _case("f_equivalent_nested", GOLD_F, [
        dict(platform="P", function="configure",
             args={"options": {"a": "x", "b": 2.0}, "tags": [1.0, 2]}),
    ]),
    _case("f_wrong_nested", GOLD_F, [
        dict(platform="P", function="configure",
             args={"options": {"b": 2, "a": " x "}, "tags": [1, 3]}),
    ]),
]

USER_SPLIT = {TRAINED_USER: "trained", UNTRAINED_USER: "untrained"}
