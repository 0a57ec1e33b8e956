"""Exact-match scoring of candidate model outputs against gold samples.

Per-sample scoring gates: an unparsable prediction fails everything
downstream; otherwise predicted calls are matched to gold calls by exact
(platform, function) key, greedily in textual order among same-key calls.
Value equality is canonical (trimmed text, integer-identified numbers).

Error taxonomy per sample (a set, categories are not mutually exclusive):

* T-missing   - some gold call is unmatched.
* T-excessive - some predicted call is unmatched.
* T-wrong     - some predicted call's key is absent from the gold key set
                while some gold call is unmatched (a substitution; it also
                flags the two categories above by construction).
* P-missing / P-excessive / P-error - per matched call: gold-only argument,
  predicted-only argument, or unequal canonical value.

"Correct sample" for the three overall accuracies means value_ok AND
platform_ok. Zero-denominator ratios are reported as absent, never 0.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from .grammar import ParseError, parse_solution
from .model import Sample, Solution, ToolCall, ToolRegistry, values_equal


class ErrorCategory(str, Enum):
    T_WRONG = "T-wrong"
    T_MISSING = "T-missing"
    T_EXCESSIVE = "T-excessive"
    P_MISSING = "P-missing"
    P_EXCESSIVE = "P-excessive"
    P_ERROR = "P-error"


class MissingSplitError(Exception):
    """A scored sample's user has no trained/untrained assignment."""


@dataclass(frozen=True)
class SampleEval:
    """Scoring outcome for one (prediction, gold) pair."""

    sample_id: str
    user_id: str
    format_ok: bool
    platform_ok: bool
    name_ok: bool
    param_ok: bool
    value_ok: bool
    query_params: tuple[int, int]
    profile_params: tuple[int, int]
    errors: frozenset[ErrorCategory] = frozenset()

    def __post_init__(self) -> None:
        if self.value_ok and not self.param_ok:
            raise ValueError("value_ok requires param_ok")
        if self.param_ok and not self.name_ok:
            raise ValueError("param_ok requires name_ok")
        if not self.format_ok and (
            self.platform_ok or self.name_ok or self.param_ok or self.value_ok or self.errors
        ):
            raise ValueError("a format failure zeroes all downstream flags and errors")

    @property
    def correct(self) -> bool:
        return self.value_ok and self.platform_ok


@dataclass(frozen=True)
class Metric:
    numerator: int
    denominator: int

    @property
    def value(self) -> float | None:
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator


@dataclass(frozen=True)
class EvalReport:
    """The ten accuracies plus the error-taxonomy histogram."""

    format_acc: Metric
    platform_acc: Metric
    query_param_acc: Metric
    profile_param_acc: Metric
    tool_name_acc: Metric
    tool_param_acc: Metric
    tool_value_acc: Metric
    trained_overall_acc: Metric
    untrained_overall_acc: Metric
    overall_acc: Metric
    error_histogram: dict[ErrorCategory, int] = field(default_factory=dict)

    METRIC_FIELDS = (
        "format_acc", "platform_acc", "query_param_acc", "profile_param_acc",
        "tool_name_acc", "tool_param_acc", "tool_value_acc",
        "trained_overall_acc", "untrained_overall_acc", "overall_acc",
    )

    def metrics(self) -> dict[str, Metric]:
        return {name: getattr(self, name) for name in self.METRIC_FIELDS}

    def to_dict(self) -> dict:
        out: dict = {}
        for name, metric in self.metrics().items():
            out[name] = {
                "numerator": metric.numerator,
                "denominator": metric.denominator,
                "value": metric.value,
            }
        out["error_histogram"] = {cat.value: n for cat, n in self.error_histogram.items()}
        return out


_TABLE_COLUMNS = (
    ("Format", "format_acc"),
    ("Platform", "platform_acc"),
    ("Query", "query_param_acc"),
    ("Profile", "profile_param_acc"),
    ("T-name", "tool_name_acc"),
    ("T-param", "tool_param_acc"),
    ("T-value", "tool_value_acc"),
    ("Trained", "trained_overall_acc"),
    ("Untrained", "untrained_overall_acc"),
    ("Overall", "overall_acc"),
)


def format_table(report: EvalReport) -> str:
    """Human-readable one-row accuracy table plus the error histogram."""
    cells = []
    for _, attr in _TABLE_COLUMNS:
        metric: Metric = getattr(report, attr)
        cells.append("-" if metric.value is None else f"{metric.value:.4f}")
    widths = [max(len(h), len(c)) for (h, _), c in zip(_TABLE_COLUMNS, cells)]
    header = "  ".join(h.ljust(w) for (h, _), w in zip(_TABLE_COLUMNS, widths))
    row = "  ".join(c.ljust(w) for c, w in zip(cells, widths))
    hist = "  ".join(
        f"{cat.value}={report.error_histogram.get(cat, 0)}" for cat in ErrorCategory
    )
    return f"{header}\n{row}\nerrors: {hist}"


def _match_calls(
    gold: tuple[ToolCall, ...], pred: tuple[ToolCall, ...]
) -> tuple[dict[int, int], list[int], list[int]]:
    """Greedy matching by exact (platform, function) key in textual order."""
    used = [False] * len(pred)
    pair_of_gold: dict[int, int] = {}
    for gi, g in enumerate(gold):
        for pi, p in enumerate(pred):
            if used[pi]:
                continue
            if (p.platform, p.function) == (g.platform, g.function):
                used[pi] = True
                pair_of_gold[gi] = pi
                break
    unmatched_gold = [gi for gi in range(len(gold)) if gi not in pair_of_gold]
    unmatched_pred = [pi for pi in range(len(pred)) if not used[pi]]
    return pair_of_gold, unmatched_gold, unmatched_pred


def evaluate_sample(
    pred_text: str, gold: Sample, registry: ToolRegistry | None = None
) -> SampleEval:
    """Score one prediction text against its gold sample.

    ``registry`` is accepted for interface parity across the pipeline;
    exact-match scoring is schema-independent and does not consult it.
    """
    tag_items = gold.provenance.tags
    query_total = sum(1 for t in tag_items.values() if t == "query")
    profile_total = sum(1 for t in tag_items.values() if t == "profile")

    try:
        pred: Solution = parse_solution(pred_text)
    except ParseError:
        return SampleEval(
            sample_id=gold.id,
            user_id=gold.user_id,
            format_ok=False,
            platform_ok=False,
            name_ok=False,
            param_ok=False,
            value_ok=False,
            query_params=(0, query_total),
            profile_params=(0, profile_total),
        )

    gold_calls = gold.gold.calls
    pred_calls = pred.calls
    pair_of_gold, unmatched_gold, unmatched_pred = _match_calls(gold_calls, pred_calls)

    platform_ok = Counter(c.platform for c in gold_calls) == Counter(
        c.platform for c in pred_calls
    )
    name_ok = Counter((c.platform, c.function) for c in gold_calls) == Counter(
        (c.platform, c.function) for c in pred_calls
    )
    param_ok = name_ok and all(
        set(gold_calls[gi].args) == set(pred_calls[pi].args)
        for gi, pi in pair_of_gold.items()
    )
    value_ok = param_ok and all(
        values_equal(gv, pred_calls[pi].args[name])
        for gi, pi in pair_of_gold.items()
        for name, gv in gold_calls[gi].args.items()
    )

    query_correct = 0
    profile_correct = 0
    for (ci, pname), tag in tag_items.items():
        pi = pair_of_gold.get(ci)
        if pi is None:
            continue
        pred_args = pred_calls[pi].args
        if pname in pred_args and values_equal(gold_calls[ci].args[pname], pred_args[pname]):
            if tag == "query":
                query_correct += 1
            else:
                profile_correct += 1

    errors: set[ErrorCategory] = set()
    if unmatched_gold:
        errors.add(ErrorCategory.T_MISSING)
        gold_keys = {(c.platform, c.function) for c in gold_calls}
        if any((c.platform, c.function) not in gold_keys for c in pred_calls):
            errors.add(ErrorCategory.T_WRONG)
    if unmatched_pred:
        errors.add(ErrorCategory.T_EXCESSIVE)
    for gi, pi in pair_of_gold.items():
        gargs, pargs = gold_calls[gi].args, pred_calls[pi].args
        if set(gargs) - set(pargs):
            errors.add(ErrorCategory.P_MISSING)
        if set(pargs) - set(gargs):
            errors.add(ErrorCategory.P_EXCESSIVE)
        if any(
            not values_equal(gargs[name], pargs[name]) for name in set(gargs) & set(pargs)
        ):
            errors.add(ErrorCategory.P_ERROR)

    return SampleEval(
        sample_id=gold.id,
        user_id=gold.user_id,
        format_ok=True,
        platform_ok=platform_ok,
        name_ok=name_ok,
        param_ok=param_ok,
        value_ok=value_ok,
        query_params=(query_correct, query_total),
        profile_params=(profile_correct, profile_total),
        errors=frozenset(errors),
    )


def error_histogram(evals: list[SampleEval]) -> dict[ErrorCategory, int]:
    """Per-category sample counts over format-correct evals only."""
    hist = {cat: 0 for cat in ErrorCategory}
    for e in evals:
        if not e.format_ok:
            continue
        for cat in e.errors:
            hist[cat] += 1
    return hist


def compute_report(
    evals: list[SampleEval], user_split: dict[str, str]
) -> EvalReport:
    """Aggregate the ten accuracies with exact integer counts."""
    for e in evals:
        if e.user_id not in user_split:
            raise MissingSplitError(f"user {e.user_id!r} of sample {e.sample_id!r} has no split")

    total = len(evals)
    trained = [e for e in evals if user_split[e.user_id] == "trained"]
    untrained = [e for e in evals if user_split[e.user_id] == "untrained"]

    def count(items, pred) -> int:
        return sum(1 for e in items if pred(e))

    qp_num = sum(e.query_params[0] for e in evals)
    qp_den = sum(e.query_params[1] for e in evals)
    pp_num = sum(e.profile_params[0] for e in evals)
    pp_den = sum(e.profile_params[1] for e in evals)

    return EvalReport(
        format_acc=Metric(count(evals, lambda e: e.format_ok), total),
        platform_acc=Metric(count(evals, lambda e: e.platform_ok), total),
        query_param_acc=Metric(qp_num, qp_den),
        profile_param_acc=Metric(pp_num, pp_den),
        tool_name_acc=Metric(count(evals, lambda e: e.name_ok), total),
        tool_param_acc=Metric(count(evals, lambda e: e.param_ok), total),
        tool_value_acc=Metric(count(evals, lambda e: e.value_ok), total),
        trained_overall_acc=Metric(count(trained, lambda e: e.correct), len(trained)),
        untrained_overall_acc=Metric(count(untrained, lambda e: e.correct), len(untrained)),
        overall_acc=Metric(count(evals, lambda e: e.correct), total),
        error_histogram=error_histogram(evals),
    )
