import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyst.corpus import schema_from_dict
from hyst.filters import Between, Eq, In, Lt
from hyst.planner import (
    LLMError,
    LLMPlanner,
    RulePlanner,
    ScriptedLLMClient,
    extract_json_object,
    plan_llm,
    plan_rules,
    render_prompt,
)

RESTAURANT_FILTER = """{
  "CATEGORY": {"$in": ["Italian", "French"]},
  "LOCATION": {"$eq": "New York"},
  "PRICE": {"$lt": 100},
  "PARKING": {"$eq": "Y"}
}"""

RESTAURANT_QUERY = (
    "Show me Italian or French restaurants in New York with a cozy atmosphere, "
    "priced under $100, and with parking available"
)


class SpyClient:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def complete(self, prompt, temperature, top_p):
        self.calls.append({"prompt": prompt, "temperature": temperature, "top_p": top_p})
        return self.responses.pop(0) if len(self.responses) > 1 else self.responses[0]


class TestRenderPrompt:
    def test_brands_injected_and_question_at_end(self, product_schema):
        schema = schema_from_dict(
            {"columns": [{"name": "BRAND", "kind": "single", "allowable_values": ["Halex", "Nike"]}]}
        )
        prompt = render_prompt(schema, "q")
        assert "Halex" in prompt
        assert "Nike" in prompt
        assert prompt.endswith("User question: q")

    def test_empty_allowable_set_renders_empty(self):
        schema = schema_from_dict({"columns": [{"name": "BRAND", "kind": "single"}]})
        prompt = render_prompt(schema, "q")
        assert "allowable values: \n" in prompt

    def test_value_cap_with_truncation_marker(self):
        values = [f"brand{i:04d}" for i in range(10_000)]
        schema = schema_from_dict(
            {"columns": [{"name": "BRAND", "kind": "single", "allowable_values": values}]}
        )
        prompt = render_prompt(schema, "q", value_cap=500)
        assert len(re.findall(r"brand\d{4}", prompt)) == 500
        assert "brand0499, ..." in prompt

    def test_literal_json_braces_survive(self):
        schema = schema_from_dict({"columns": []})
        prompt = render_prompt(schema, "q")
        assert '"$in"' in prompt
        assert '{"$between": [300, 500]}' in prompt

    def test_custom_template(self):
        schema = schema_from_dict(
            {"columns": [{"name": "CATEGORY", "kind": "multiple", "allowable_values": ["a"]}]}
        )
        prompt = render_prompt(schema, "hello", template="cats={allowable_categories} q={question}")
        assert prompt == "cats=a q=hello"


class TestExtractJsonObject:
    def test_plain_object(self):
        assert extract_json_object('{"a": 1}') == '{"a": 1}'

    def test_fenced_with_prose(self):
        text = 'Sure! Here you go:\n```json\n{"BRAND": {"$eq": "Nike"}}\n```\nEnjoy.'
        assert json.loads(extract_json_object(text)) == {"BRAND": {"$eq": "Nike"}}

    def test_braces_inside_strings(self):
        text = '{"a": "curly } brace", "b": 2} trailing'
        assert json.loads(extract_json_object(text)) == {"a": "curly } brace", "b": 2}

    def test_skips_unparseable_region(self):
        text = "{not json} but then {\"ok\": true}"
        assert json.loads(extract_json_object(text)) == {"ok": True}

    def test_none_when_no_object(self):
        assert extract_json_object("no json here") is None


class TestPlanLLM:
    def test_restaurant_example(self, restaurant_schema):
        client = ScriptedLLMClient(
            [
                {"prompt_substring": "User question:", "response": RESTAURANT_FILTER},
                {
                    "prompt_substring": "Original question:",
                    "response": "restaurant with cozy atmosphere",
                },
            ]
        )
        plan = plan_llm(client, restaurant_schema, RESTAURANT_QUERY, refine=True)
        assert plan.filter.clauses["CATEGORY"] == In(("Italian", "French"))
        assert plan.filter.clauses["LOCATION"] == Eq("New York")
        assert plan.filter.clauses["PRICE"] == Lt(100)
        assert plan.filter.clauses["PARKING"] == Eq("Y")
        assert plan.refined_query == "restaurant with cozy atmosphere"
        assert plan.raw_query == RESTAURANT_QUERY

    def test_sampling_parameters(self, restaurant_schema):
        client = SpyClient(['{"PRICE": {"$lt": 10}}'])
        plan_llm(client, restaurant_schema, "cheap food", refine=False)
        assert client.calls[0]["temperature"] == 0.3
        assert client.calls[0]["top_p"] == 0.8

    def test_unhelpful_response_degrades_to_universal(self, restaurant_schema):
        client = SpyClient(["I cannot help", "I cannot help"])
        plan = plan_llm(client, restaurant_schema, "anything", refine=False)
        assert plan.filter.is_universal()
        assert plan.refined_query == "anything"
        assert any("universal" in w for w in plan.validation.warnings)
        assert len(client.calls) == 2  # exactly one re-ask

    def test_recovers_on_reask(self, restaurant_schema):
        client = SpyClient(["garbage", '{"PRICE": {"$lt": 5}}', "unused"])
        plan = plan_llm(client, restaurant_schema, "q", refine=False)
        assert plan.filter.clauses["PRICE"] == Lt(5)
        assert plan.validation.warnings == []

    def test_hallucinated_column_dropped_rest_kept(self, restaurant_schema):
        response = '{"DATA_TIMELINE": {"$eq": "2020"}, "LOCATION": {"$eq": "New York"}}'
        client = SpyClient([response])
        plan = plan_llm(client, restaurant_schema, "q", refine=False)
        assert ("DATA_TIMELINE", "unknown column") in plan.validation.dropped_clauses
        assert plan.filter.clauses == {"LOCATION": Eq("New York")}

    def test_refine_false_echoes_raw_query(self, restaurant_schema):
        client = SpyClient(['{"PRICE": {"$lt": 10}}'])
        plan = plan_llm(client, restaurant_schema, "verbatim text", refine=False)
        assert plan.refined_query == "verbatim text"
        assert len(client.calls) == 1

    def test_empty_refinement_falls_back_to_raw(self, restaurant_schema):
        client = ScriptedLLMClient(
            [
                {"prompt_substring": "User question:", "response": "{}"},
                {"prompt_substring": "Original question:", "response": "   "},
            ]
        )
        plan = plan_llm(client, restaurant_schema, "the query", refine=True)
        assert plan.refined_query == "the query"

    def test_transport_error_propagates(self, restaurant_schema):
        class FailingClient:
            def complete(self, prompt, temperature, top_p):
                raise LLMError("socket closed")

        with pytest.raises(LLMError):
            plan_llm(FailingClient(), restaurant_schema, "q")


class TestPlanRules:
    def test_brand_and_category_mentions(self, product_schema):
        plan = plan_rules(product_schema, "durable Adidas socks", refine=True)
        assert plan.filter.clauses["BRAND"] == Eq("Adidas")
        assert plan.filter.clauses["CATEGORY"] == In(("socks",))
        assert plan.refined_query == "durable"

    def test_no_mentions_is_universal(self, product_schema):
        plan = plan_rules(product_schema, "something comfortable", refine=True)
        assert plan.filter.is_universal()
        assert plan.refined_query == "something comfortable"

    def test_multiple_single_column_mentions_become_in(self, product_schema):
        plan = plan_rules(
            product_schema, "electronics from Sony or Samsung that cost between $300 and $500"
        )
        assert plan.filter.clauses["BRAND"] == In(("Sony", "Samsung"))
        assert plan.filter.clauses["PRICE"] == Between(300, 500)
        assert plan.filter.clauses["CATEGORY"] == In(("electronics",))

    def test_under_and_over_phrases(self, product_schema):
        assert plan_rules(product_schema, "socks under $25").filter.clauses["PRICE"] == Lt(25)
        from hyst.filters import Gt

        assert plan_rules(product_schema, "gear over 4.5").filter.clauses["PRICE"] == Gt(4.5)

    def test_case_insensitive_value_match(self, product_schema):
        plan = plan_rules(product_schema, "SPYDER paintball gear")
        assert plan.filter.clauses["BRAND"] == Eq("Spyder")

    def test_word_boundary_prevents_partial_match(self, product_schema):
        # "Nike" must not match inside "Nikel"
        plan = plan_rules(product_schema, "Nikel plated widget")
        assert "BRAND" not in plan.filter.clauses

    def test_multiword_value_wins_over_substring(self):
        schema = schema_from_dict(
            {
                "columns": [
                    {
                        "name": "CATEGORY",
                        "kind": "multiple",
                        "allowable_values": ["table tennis", "tennis"],
                    }
                ]
            }
        )
        plan = plan_rules(schema, "a table tennis table", refine=True)
        assert plan.filter.clauses["CATEGORY"] == In(("table tennis",))

    def test_refine_false_keeps_raw(self, product_schema):
        plan = plan_rules(product_schema, "durable Adidas socks", refine=False)
        assert plan.refined_query == "durable Adidas socks"

    def test_refinement_idempotent(self, product_schema):
        once = plan_rules(product_schema, "shiny Sony electronics under $90", refine=True)
        twice = plan_rules(product_schema, once.refined_query, refine=True)
        assert twice.refined_query == once.refined_query

    def test_validation_is_clean(self, product_schema):
        plan = plan_rules(product_schema, "durable Adidas socks under $20")
        assert plan.validation.dropped_clauses == []
        assert plan.planner_id == "rules"


WORDS = st.sampled_from(
    ["durable", "shiny", "cheap", "Adidas", "Sony", "socks", "paintball", "under", "$50", "great"]
)


@settings(max_examples=80, deadline=None)
@given(parts=st.lists(WORDS, min_size=1, max_size=8))
def test_plan_rules_deterministic_and_idempotent(parts):
    schema = schema_from_dict(
        {
            "columns": [
                {"name": "BRAND", "kind": "single", "allowable_values": ["Adidas", "Sony"]},
                {"name": "CATEGORY", "kind": "multiple", "allowable_values": ["socks", "paintball"]},
                {"name": "PRICE", "kind": "numeric"},
            ]
        }
    )
    query = " ".join(parts)
    first = plan_rules(schema, query, refine=True)
    second = plan_rules(schema, query, refine=True)
    assert first.filter == second.filter
    assert first.refined_query == second.refined_query
    refined_again = plan_rules(schema, first.refined_query, refine=True)
    assert refined_again.refined_query == first.refined_query


class TestScriptedClient:
    def test_consumes_in_order_then_replays_last(self):
        client = ScriptedLLMClient(
            [
                {"prompt_substring": "ask", "response": "first"},
                {"prompt_substring": "ask", "response": "second"},
            ]
        )
        assert client.complete("ask me", 0.3, 0.8) == "first"
        assert client.complete("ask me", 0.3, 0.8) == "second"
        assert client.complete("ask me", 0.3, 0.8) == "second"

    def test_no_match_raises(self):
        client = ScriptedLLMClient([{"prompt_substring": "xyz", "response": "r"}])
        with pytest.raises(LLMError, match="no scripted response"):
            client.complete("other prompt", 0.3, 0.8)

    def test_from_file(self, tmp_path):
        path = tmp_path / "fixture.jsonl"
        path.write_text(
            json.dumps({"prompt_substring": "hello", "response": "world"}) + "\n",
            encoding="utf-8",
        )
        client = ScriptedLLMClient.from_file(path)
        assert client.complete("say hello please", 0.3, 0.8) == "world"


def test_llm_planner_wrapper(restaurant_schema):
    client = ScriptedLLMClient(
        [{"prompt_substring": "User question:", "response": '{"PRICE": {"$lt": 3}}'}]
    )
    planner = LLMPlanner(client, restaurant_schema, planner_id="scripted")
    plan = planner.plan("cheap eats")
    assert plan.planner_id == "scripted"
    assert plan.filter.clauses["PRICE"] == Lt(3)


def test_rule_planner_wrapper(product_schema):
    planner = RulePlanner(product_schema)
    assert planner.plan("Adidas socks").filter.clauses["BRAND"] == Eq("Adidas")
