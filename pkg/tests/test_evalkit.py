from __future__ import annotations

import random

import pytest

from toolweave.evalkit import (
    ErrorCategory,
    Metric,
    MissingSplitError,
    SampleEval,
    compute_report,
    error_histogram,
    evaluate_sample,
    format_table,
)
from toolweave.grammar import serialize_solution
from toolweave.model import Provenance, Sample, Solution, ToolCall

from .eval_fixture import CASES, GOLD_A, USER_SPLIT
from .gen import random_solution
from .reference_scorer import ref_evaluate, ref_report


def as_ref_dict(e: SampleEval) -> dict:
    return {
        "format_ok": e.format_ok,
        "platform_ok": e.platform_ok,
        "name_ok": e.name_ok,
        "param_ok": e.param_ok,
        "value_ok": e.value_ok,
        "query_params": e.query_params,
        "profile_params": e.profile_params,
        "errors": {c.value for c in e.errors},
    }


class TestOracleEquivalence:
    @pytest.mark.parametrize("case", CASES, ids=[c.name for c in CASES])
    def test_per_sample_flags_match_reference(self, case):
        got = evaluate_sample(case.pred_text, case.sample)
        want = ref_evaluate(case.pred_calls, case.sample)
        assert as_ref_dict(got) == want

    def test_report_matches_reference_exactly(self):
        evals = [evaluate_sample(c.pred_text, c.sample) for c in CASES]
        report = compute_report(evals, USER_SPLIT)

        ref_evals = []
        user_of_sample = {}
        for i, c in enumerate(CASES):
            d = ref_evaluate(c.pred_calls, c.sample)
            d["sample_id"] = f"{c.sample.id}#{i}"
            user_of_sample[d["sample_id"]] = c.sample.user_id
            ref_evals.append(d)
        want = ref_report(ref_evals, user_of_sample, USER_SPLIT)

        got_counts = {
            name: (m.numerator, m.denominator) for name, m in report.metrics().items()
        }
        want_counts = {k: v for k, v in want.items() if k != "error_histogram"}
        assert got_counts == want_counts

        got_hist = {c.value: n for c, n in report.error_histogram.items() if n}
        assert got_hist == want["error_histogram"]

    def test_histogram_recount_matches_reference(self):
        evals = [evaluate_sample(c.pred_text, c.sample) for c in CASES]
        hist = error_histogram(evals)
        ref = {}
        for c in CASES:
            d = ref_evaluate(c.pred_calls, c.sample)
            if not d["format_ok"]:
                continue
            for cat in d["errors"]:
                ref[cat] = ref.get(cat, 0) + 1
        assert {c.value: n for c, n in hist.items() if n} == ref

    def test_fixture_covers_all_flag_classes_and_categories(self):
        evals = [evaluate_sample(c.pred_text, c.sample) for c in CASES]
        classes = {
            (e.format_ok, e.platform_ok, e.name_ok, e.param_ok, e.value_ok) for e in evals
        }
        assert (False, False, False, False, False) in classes
        assert (True, True, True, True, True) in classes
        assert (True, True, True, True, False) in classes
        assert (True, True, True, False, False) in classes
        assert (True, True, False, False, False) in classes
        assert (True, False, False, False, False) in classes
        seen = set()
        for e in evals:
            seen |= set(e.errors)
        assert seen == set(ErrorCategory)
        assert len(CASES) >= 25


class TestSpecdExamples:
    def test_identity_prediction(self):
        pred = serialize_solution(GOLD_A.gold)
        e = evaluate_sample(pred, GOLD_A)
        assert (e.format_ok, e.platform_ok, e.name_ok, e.param_ok, e.value_ok) == (
            True, True, True, True, True,
        )
        assert e.errors == frozenset()
        assert e.query_params == (1, 1)
        assert e.profile_params == (5, 5)

    def test_single_profile_value_perturbation(self):
        args = dict(GOLD_A.gold.calls[0].args)
        args["marketingConsent"] = True
        pred = serialize_solution(
            Solution(calls=(ToolCall("MegaMart", "registerUser", args),))
        )
        e = evaluate_sample(pred, GOLD_A)
        assert e.format_ok and e.platform_ok and e.name_ok and e.param_ok
        assert not e.value_ok
        assert e.errors == frozenset({ErrorCategory.P_ERROR})
        assert e.profile_params == (4, 5)  # down by exactly the mis-valued param
        assert e.query_params == (1, 1)

    def test_unparsable_prediction_fails_format_gate(self):
        e = evaluate_sample("hello", GOLD_A)
        assert not e.format_ok
        assert not (e.platform_ok or e.name_ok or e.param_ok or e.value_ok)
        assert e.errors == frozenset()
        assert e.query_params == (0, 1)
        assert e.profile_params == (0, 5)

    def test_hand_enumerated_four_sample_report(self):
        def ev(sid, **kw):
            base = dict(
                sample_id=sid, user_id="usr_trained", format_ok=True,
                platform_ok=True, name_ok=True, param_ok=True, value_ok=True,
                query_params=(1, 1), profile_params=(1, 1), errors=frozenset(),
            )
            base.update(kw)
            return SampleEval(**base)

        evals = [
            ev("s1", format_ok=False, platform_ok=False, name_ok=False,
               param_ok=False, value_ok=False, query_params=(0, 1),
               profile_params=(0, 1)),
            ev("s2", platform_ok=False),
            ev("s3"),
            ev("s4", user_id="usr_untrained"),
        ]
        report = compute_report(evals, USER_SPLIT)
        assert report.format_acc == Metric(3, 4)
        assert report.overall_acc == Metric(2, 4)
        assert report.platform_acc == Metric(2, 4)
        assert report.tool_value_acc == Metric(3, 4)
        assert report.query_param_acc == Metric(3, 4)
        assert report.trained_overall_acc == Metric(1, 3)
        assert report.untrained_overall_acc == Metric(1, 1)

    def test_empty_trained_bucket_reports_absent_not_zero(self):
        e = evaluate_sample(serialize_solution(GOLD_A.gold), GOLD_A)
        report = compute_report([e], {GOLD_A.user_id: "untrained"})
        assert report.trained_overall_acc.denominator == 0
        assert report.trained_overall_acc.value is None
        assert report.untrained_overall_acc.value == 1.0

    def test_missing_split_raises(self):
        e = evaluate_sample(serialize_solution(GOLD_A.gold), GOLD_A)
        with pytest.raises(MissingSplitError):
            compute_report([e], {})


class TestInvariants:
    def test_identity_property_over_random_solutions(self):
        rng = random.Random(555)
        for i in range(200):
            gold_solution = random_solution(rng)
            tags = {
                key: ("profile" if rng.random() < 0.5 else "query")
                for key in gold_solution.param_keys()
            }
            g = Sample(
                id=f"smp_{i}", user_id="usr_trained", scenario="s", query="q",
                gold=gold_solution, provenance=Provenance(tags=tags),
            )
            e = evaluate_sample(serialize_solution(gold_solution), g)
            assert e.value_ok and e.param_ok and e.name_ok and e.platform_ok
            assert e.errors == frozenset()
            assert e.query_params[0] == e.query_params[1]
            assert e.profile_params[0] == e.profile_params[1]

    def test_monotone_gates_enforced_at_construction(self):
        with pytest.raises(ValueError):
            SampleEval(
                sample_id="s", user_id="u", format_ok=True, platform_ok=True,
                name_ok=False, param_ok=True, value_ok=True,
                query_params=(0, 0), profile_params=(0, 0),
            )
        with pytest.raises(ValueError):
            SampleEval(
                sample_id="s", user_id="u", format_ok=False, platform_ok=True,
                name_ok=False, param_ok=False, value_ok=False,
                query_params=(0, 0), profile_params=(0, 0),
            )

    def test_overall_numerators_partition_by_split(self):
        evals = [evaluate_sample(c.pred_text, c.sample) for c in CASES]
        report = compute_report(evals, USER_SPLIT)
        assert (
            report.overall_acc.numerator
            == report.trained_overall_acc.numerator
            + report.untrained_overall_acc.numerator
        )
        assert (
            report.overall_acc.denominator
            == report.trained_overall_acc.denominator
            + report.untrained_overall_acc.denominator
        )

    def test_report_recomputation_is_bit_identical(self):
        evals = [evaluate_sample(c.pred_text, c.sample) for c in CASES]
        a = compute_report(evals, USER_SPLIT)
        b = compute_report(list(evals), dict(USER_SPLIT))
        assert a == b
        assert a.to_dict() == b.to_dict()

    def test_format_table_renders(self):
        evals = [evaluate_sample(c.pred_text, c.sample) for c in CASES]
        table = format_table(compute_report(evals, USER_SPLIT))
        assert "Format" in table and "Overall" in table and "T-wrong" in table
