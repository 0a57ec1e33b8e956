"""Rule-driven scripted backend for offline, reproducible pipeline runs.

Every entry is repeatable and computes its canned response deterministically
from the prompt text (content-hash seeded), so the whole pipeline runs
end-to-end with no network and is bit-identical across runs. The responders
key off distinctive phrases of the prompt templates in prompts/ and are
intentionally coupled to them.
"""

from __future__ import annotations

import hashlib
import json
import re

from .gateway import ChatRequest, ScriptedBackend, ScriptedEntry
from .grammar import serialize_solution
from .model import Solution, ToolCall


def _h(text: str, n: int) -> int:
    if n <= 0:
        return 0
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest(), 16) % n


def _slice(text: str, start: str, end: str | None = None) -> str:
    i = text.index(start) + len(start)
    if end is None:
        return text[i:]
    return text[i:text.index(end, i)]


def _dash_items(block: str) -> list[str]:
    return [line[2:].strip() for line in block.splitlines() if line.startswith("- ")]


PLATFORM_SUFFIXES = ["Express", "Depot", "Prime", "Hub", "Direct", "Central"]

TRAIT_EMPHASIS = [
    {
        "product_range": "A wide-ranging selection, offering products from various categories.",
        "delivery_speed": "Standard delivery windows of two to four days.",
        "service_quality": "Premium support with generous return policies.",
    },
    {
        "product_range": "A curated catalog focused on everyday essentials.",
        "delivery_speed": "Same-day and next-day delivery in most areas.",
        "service_quality": "Self-service support with quick automated refunds.",
    },
    {
        "product_range": "Specialty and niche items alongside the basics.",
        "delivery_speed": "Scheduled weekly deliveries at reduced cost.",
        "service_quality": "Community-rated sellers with buyer protection.",
    },
]

SHARED_CATEGORIES = ["account_management", "catalog_search", "ordering"]


def _p(name, kind, description="", required=False, enum_values=None):
    out = {"name": name, "kind": kind, "description": description or name,
           "required": required}
    if enum_values:
        out["enum_values"] = enum_values
    return out


_RESPONSE = [
    {"name": "success", "kind": "boolean", "description": "Status of the call."},
    {"name": "message", "kind": "string", "description": "Human-readable detail."},
]


def _api(name, description, params):
    return {"name": name, "description": description, "params": params,
            "response_fields": _RESPONSE}


CATEGORY_APIS: dict[str, list[dict]] = {
    "account_management": [
        _api("registerUser", "Registers a new user in the application.", [
            _p("username", "string", "User's chosen username.", required=True),
            _p("password", "string", "Account password.", required=True),
            _p("email", "string", "Contact email address.", required=True),
            _p("preferredLanguage", "enum", "Interface language.",
               enum_values=["English", "French", "Spanish"]),
            _p("marketingConsent", "boolean", "Opt in to marketing emails."),
            _p("homeLocation", "string", "Home city and country."),
        ]),
        _api("updateProfile", "Updates stored account details.", [
            _p("username", "string", "Account to update.", required=True),
            _p("email", "string", "New contact email."),
            _p("phone", "string", "New phone number."),
            _p("deliveryAddress", "string", "Default delivery address."),
        ]),
        _api("resetPassword", "Resets the account password.", [
            _p("username", "string", required=True),
            _p("newPassword", "string", required=True),
        ]),
        _api("closeAccount", "Closes the account permanently.", [
            _p("username", "string", required=True),
            _p("reason", "string"),
        ]),
    ],
    "catalog_search": [
        _api("searchItems", "Searches the catalog for matching items.", [
            _p("query", "string", "Free-text search terms.", required=True),
            _p("maxResults", "integer", "Cap on returned items."),
            _p("priceLimit", "number", "Upper price bound."),
            _p("inStockOnly", "boolean", "Restrict to in-stock items."),
            _p("categories", "array", "Category filters."),
        ]),
        _api("getItemDetails", "Fetches one item's full record.", [
            _p("itemId", "string", required=True),
            _p("includeReviews", "boolean"),
        ]),
        _api("listCategories", "Lists catalog categories.", [
            _p("parentCategory", "string"),
        ]),
        _api("compareItems", "Compares several items side by side.", [
            _p("itemIds", "array", required=True),
        ]),
    ],
    "ordering": [
        _api("placeOrder", "Places an order for an item.", [
            _p("itemId", "string", required=True),
            _p("quantity", "integer", required=True),
            _p("deliveryAddress", "string", required=True),
            _p("giftWrap", "boolean"),
            _p("courierNote", "string"),
        ]),
        _api("trackOrder", "Tracks an existing order.", [
            _p("orderId", "string", required=True),
        ]),
        _api("cancelOrder", "Cancels an order.", [
            _p("orderId", "string", required=True),
            _p("reason", "string"),
        ]),
        _api("scheduleDelivery", "Schedules an order's delivery slot.", [
            _p("orderId", "string", required=True),
            _p("date", "string"),
        ]),
    ],
}


def _synth_api(category: str, n: int) -> dict:
    return _api(
        f"{category.split('_')[0]}Action{n}",
        f"Auxiliary {category.replace('_', ' ')} operation #{n}.",
        [_p("targetId", "string", required=True), _p("note", "string")],
    )


# -- value pools for profile assignment ---------------------------------------

VALUE_POOLS: dict[str, list[str]] = {
    "persona": [
        "premium wine enthusiast settled in Europe",
        "budget-minded student shopper",
        "outdoor gear hobbyist",
        "busy parent stocking the household",
    ],
    "username": ["WineTraveler38", "BudgetFox21", "TrailRunner7", "CityNomad5"],
    "password": ["strongpassword123!", "Quiet$Horse9", "Maple!Leaf42", "Iron^Gate77"],
    "email": [
        "jeanlucbordeaux@example.com", "fox21@example.com",
        "runner7@example.com", "nomad5@example.com",
    ],
    "phone": ["+33 1 44 55 66 77", "+1 512 555 0147", "+81 75 555 0112", "+34 91 555 0188"],
    "homeLocation": ["Paris, France", "Austin, Texas", "Kyoto, Japan", "Madrid, Spain"],
    "deliveryAddress": [
        "12 Rue Cler, Paris", "88 Oak Avenue, Austin",
        "5 Gion Lane, Kyoto", "23 Calle Mayor, Madrid",
    ],
    "preferredLanguage": ["French", "English", "Spanish", "English"],
}

BEHAVIOR_VERBS = ["Purchased", "Browsed", "Compared", "Saved"]
BEHAVIOR_OBJECTS = [
    "a selection of premium imported goods",
    "the weekend clearance deals",
    "bundle offers on seasonal items",
    "several highly rated new arrivals",
]

QUERY_LANGS = ["French", "Spanish", "English"]


# -- responders ----------------------------------------------------------------

def _respond_platforms(req: ChatRequest) -> str:
    text = req.prompt_text
    scenario = re.search(r"Scenario: (.+?) - ", text).group(1)
    count = int(re.search(r"Propose exactly (\d+) distinct platforms", text).group(1))
    stem = re.sub(r"[^A-Za-z0-9]", "", scenario.title()) or "General"
    out = []
    for i in range(count):
        out.append({
            "name": f"{stem}{PLATFORM_SUFFIXES[i % len(PLATFORM_SUFFIXES)]}",
            "characteristics": TRAIT_EMPHASIS[i % len(TRAIT_EMPHASIS)],
        })
    return json.dumps(out)


def _respond_categories(req: ChatRequest) -> str:
    return json.dumps(SHARED_CATEGORIES)


def _respond_expand(req: ChatRequest) -> str:
    text = req.prompt_text
    quota = int(re.search(r"Define about (\d+) APIs", text).group(1))
    if "This is the platform itself" in text:
        cats = json.loads(re.search(r"stay comparable: (\[.*?\])", text).group(1))
        return json.dumps({"kind": "refine", "children": cats or SHARED_CATEGORIES})
    node = re.search(r"Current node: (.+)", text).group(1).strip()
    table = CATEGORY_APIS.get(node, [])
    apis = table[:quota]
    n = 1
    while len(apis) < quota:
        apis = apis + [_synth_api(node if node in CATEGORY_APIS else "general", n)]
        n += 1
    return json.dumps({"kind": "apis", "apis": apis})


def _respond_more_apis(req: ChatRequest) -> str:
    text = req.prompt_text
    count = int(re.search(r"needs (\d+) additional tool APIs", text).group(1))
    existing = set(json.loads(re.search(r"Existing API names: (\[.*?\])\n", text, re.S).group(1)))
    categories = json.loads(re.search(r"Functionality categories: (\[.*?\])\n", text, re.S).group(1))
    out: list[dict] = []
    n = 1
    while len(out) < count:
        category = categories[n % len(categories)] if categories else "general"
        api = _synth_api(category, n)
        if api["name"] not in existing:
            existing.add(api["name"])
            out.append(api)
        n += 1
    return json.dumps(out)


_BASIC_KEYWORDS = ("user", "password", "mail", "phone", "location", "address", "language")
_LOCALE_KEYWORDS = ("location", "address", "language")
_SHOPPING_KEYWORDS = ("price", "stock", "categor", "gift", "market", "max", "query", "quantity")


def _bucket(label: str) -> tuple[str, str]:
    lowered = label.lower()
    if any(k in lowered for k in _BASIC_KEYWORDS):
        if any(k in lowered for k in _LOCALE_KEYWORDS):
            return ("locale", "basic")
        return ("identity", "basic")
    if any(k in lowered for k in _SHOPPING_KEYWORDS):
        return ("shopping_preferences", "implicit")
    return ("service_preferences", "implicit")


def _respond_cluster_features(req: ChatRequest) -> str:
    block = _slice(req.prompt_text, "Items:\n", "\n\nEvery item")
    clusters: dict[str, dict] = {}
    for label in _dash_items(block):
        name, kind = _bucket(label)
        cluster = clusters.setdefault(name, {"label": name, "kind": kind, "members": []})
        cluster["members"].append(label)
    return json.dumps(list(clusters.values()))


def _respond_cluster_round(req: ChatRequest) -> str:
    block = _slice(req.prompt_text, "Groups (label: kind):\n", "\n\nEvery group")
    groups: dict[str, dict] = {}
    for item in _dash_items(block):
        label, _, kind = item.partition(": ")
        name = "profile_basics" if kind == "basic" else "preferences"
        group = groups.setdefault(name, {"label": name, "kind": kind, "members": []})
        group["members"].append(label)
    return json.dumps(list(groups.values()))


def _pool_value(label: str, index: int, lineage: str) -> str:
    pool = VALUE_POOLS.get(label)
    offset = _h(lineage + "|" + label, 4)
    if pool:
        return pool[(offset + index) % len(pool)]
    tag = hashlib.sha256((lineage + label).encode()).hexdigest()[:4]
    return f"{label.replace('_', ' ')} option {offset + index + 1} ({tag})"


def _respond_assign(req: ChatRequest) -> str:
    text = req.prompt_text
    context = _slice(text, "lineage:\n", "\n\nFeatures to fill").strip()
    features = _dash_items(_slice(text, "current layer:\n", "\n\nGenerate exactly"))
    k = int(re.search(r"Generate exactly (\d+) alternative", text).group(1))
    out = []
    for i in range(k):
        out.append({label: _pool_value(label, i, context) for label in features})
    return json.dumps(out)


def _respond_behaviors(req: ChatRequest) -> str:
    text = req.prompt_text
    count = int(re.search(r"Invent exactly (\d+) past actions", text).group(1))
    profile_block = _slice(text, "User profile:\n", "\n\nScenario:")
    platforms = json.loads(_slice(text, "Platforms in this scenario:\n", "\n\nInvent"))
    names = [p["name"] for p in platforms]
    out = []
    for i in range(count):
        verb = BEHAVIOR_VERBS[_h(profile_block + str(i), len(BEHAVIOR_VERBS))]
        obj = BEHAVIOR_OBJECTS[_h(profile_block + "obj" + str(i), len(BEHAVIOR_OBJECTS))]
        out.append({"platform": names[i % len(names)], "action": f"{verb} {obj}"})
    return json.dumps(out)


def _respond_user_query(req: ChatRequest) -> str:
    text = req.prompt_text
    avoid_block = _slice(text, "previous ones:\n")
    n = sum(1 for line in avoid_block.splitlines() if line.strip().startswith("- "))
    template = n % 3
    m = n // 3
    if template == 0:
        lang = QUERY_LANGS[m % len(QUERY_LANGS)]
        return (
            "Could you set up an account for me on whichever store suits how I "
            "usually shop? Use my usual username, password and email, set my "
            "home location to where I live, put the interface in "
            f"{lang}, and I'd rather not receive marketing emails."
        )
    if template == 1:
        return (
            f"Find up to {5 + m} wireless earbuds under {40 + 10 * m} dollars "
            "on a store that matches my taste, in stock only."
        )
    return (
        f"Order {2 + m} units of item B07XJ8C8F{m} and have them delivered "
        "to my home address."
    )


def _query_rule(param: str, query: str):
    lowered = query.lower()
    if param == "preferredLanguage":
        match = re.search(r"interface in (French|Spanish|English)", query)
        return match.group(1) if match else None
    if param == "maxResults":
        match = re.search(r"up to (\d+)", lowered)
        return int(match.group(1)) if match else None
    if param == "priceLimit":
        match = re.search(r"under (\d+) dollars", lowered)
        return int(match.group(1)) if match else None
    if param == "inStockOnly":
        return True if "in stock" in lowered else None
    if param == "itemId":
        match = re.search(r"item ([A-Z][A-Z0-9]+)", query)
        return match.group(1) if match else None
    if param == "quantity":
        match = re.search(r"order (\d+) units", lowered)
        return int(match.group(1)) if match else None
    if param == "query":
        match = re.search(r"up to \d+ ([a-z ]+?) under", lowered)
        return match.group(1).strip() if match else None
    if param == "marketingConsent":
        return False if "marketing" in lowered else None
    if param == "categories":
        return ["audio"] if "earbuds" in lowered else None
    return None


_TYPED_DEFAULTS = {"string": None, "integer": 1, "number": 9.99, "boolean": False,
                   "array": [], "object": {}}


def _respond_solution(req: ChatRequest) -> str:
    system = req.messages[0].content
    query = next(m.content for m in reversed(req.messages) if m.role == "user")
    profile = json.loads(_slice(system, "You are given a user profile:\n",
                                "\nHere is some platforms under the scenario:"))
    platforms = json.loads(_slice(system, "Here is some platforms under the scenario:\n",
                                  "\nHere is some APIs under the platforms:"))
    apis = json.loads(_slice(system, "Here is some APIs under the platforms:\n",
                             "\nThe user will give you a query"))

    features: dict[str, str] = {}
    features.update(profile.get("basic_features", {}))
    features.update(profile.get("implicit_features", {}))

    lowered = query.lower()
    if "account" in lowered or "register" in lowered:
        wanted = "registerUser"
    elif "find" in lowered or "search" in lowered:
        wanted = "searchItems"
    elif "order" in lowered:
        wanted = "placeOrder"
    else:
        wanted = apis[0]["function"]["name"]
    function = next(
        (a["function"] for a in apis if a["function"]["name"] == wanted),
        apis[0]["function"],
    )

    platform_names = [p["name"] for p in platforms]
    platform = platform_names[_h(json.dumps(profile.get("basic_features", {}),
                                            sort_keys=True), len(platform_names))]

    params = function["parameters"]["properties"]
    required = set(function["parameters"].get("required", ()))
    args: dict = {}
    for name, schema in params.items():
        value = _query_rule(name, query)
        if value is None and name in features:
            if schema.get("enum"):
                value = features[name] if features[name] in schema["enum"] else None
            elif schema.get("type") == "string":
                value = features[name]
        if value is None and name in required:
            if schema.get("enum"):
                value = schema["enum"][0]
            else:
                value = _TYPED_DEFAULTS.get(schema.get("type", "string"))
                if value is None:
                    value = f"{name}_value"
        if value is not None:
            args[name] = value

    solution = Solution(calls=(ToolCall(platform, function["name"], args),))
    return serialize_solution(solution)


def _respond_adjudication(req: ChatRequest) -> str:
    text = req.prompt_text
    query = _slice(text, "User query:\n", "\n\nAmbiguous arguments").lower()
    out = []
    for line in _dash_items(_slice(text, "argument name, value):\n", "\n\nReply with only")):
        match = re.match(r"call (\d+), (\w+) = (.*)", line)
        ci, name, value = int(match.group(1)), match.group(2), match.group(3)
        source = "query" if value.lower() in query else "profile"
        out.append({"call": ci, "param": name, "source": source})
    return json.dumps(out)


def _respond_judge(req: ChatRequest) -> str:
    return json.dumps({
        "param_correctness": "pass", "hallucination": "pass",
        "query_resolution": "pass", "reasons": [],
    })


def demo_backend() -> ScriptedBackend:
    """Scripted backend whose transcript answers the whole pipeline."""
    return ScriptedBackend([
        ScriptedEntry("Propose exactly", _respond_platforms, repeat=True),
        ScriptedEntry("List the core functionality categories", _respond_categories, repeat=True),
        ScriptedEntry("You are expanding a functionality tree", _respond_expand, repeat=True),
        ScriptedEntry("additional tool APIs", _respond_more_apis, repeat=True),
        ScriptedEntry("candidate user-profile feature leaves", _respond_cluster_features, repeat=True),
        ScriptedEntry("Merge the feature groups", _respond_cluster_round, repeat=True),
        ScriptedEntry("minting synthetic user profiles", _respond_assign, repeat=True),
        ScriptedEntry("Role-play the user described below", _respond_behaviors, repeat=True),
        ScriptedEntry("You are role-playing the user described below", _respond_user_query, repeat=True),
        ScriptedEntry("DO NOT ask the user for further information", _respond_solution, repeat=True),
        ScriptedEntry("Decide where each tool-call argument value originated", _respond_adjudication, repeat=True),
        ScriptedEntry("verifying one generated sample", _respond_judge, repeat=True),
    ])
