import pytest

from neusymms.model import Category
from neusymms.ruledsl import (
    Phase,
    RulePackError,
    RuleSemanticError,
    RuleSyntaxError,
    SlotType,
    default_rule_pack,
    default_rule_pack_source,
    parse_rule_pack,
    print_rule_pack,
)

# the four template listings, verbatim
TEMPLATE_LISTINGS = """
(deftemplate memory-fact
   (slot subject (type SYMBOL))
   (slot relation (type SYMBOL))
   (slot value (type STRING))
   (slot confidence (type FLOAT))
   (slot scope (type SYMBOL)))

(deftemplate candidate-fact
   (slot subject (type SYMBOL))
   (slot relation (type SYMBOL))
   (slot value (type STRING))
   (slot confidence (type FLOAT))
   (slot scope (type SYMBOL)))

(deftemplate engine-decision
   (slot fact-id (type INTEGER))
   (slot action (type SYMBOL))
   (slot reason (type STRING)))

(deftemplate prompt-context
   (slot keywords (type MULTISLOT))
   (slot intent (type SYMBOL))
   (slot turn-number (type INTEGER)))
"""


class TestTemplateParsing:
    def test_verbatim_listings_produce_exact_slot_lists(self):
        pack = parse_rule_pack(TEMPLATE_LISTINGS)
        assert [t.name for t in pack.templates] == [
            "memory-fact", "candidate-fact", "engine-decision", "prompt-context"]
        mf = pack.template("memory-fact")
        assert [(s.name, s.slot_type, s.multi) for s in mf.slots] == [
            ("subject", SlotType.SYMBOL, False),
            ("relation", SlotType.SYMBOL, False),
            ("value", SlotType.STRING, False),
            ("confidence", SlotType.FLOAT, False),
            ("scope", SlotType.SYMBOL, False),
        ]
        ed = pack.template("engine-decision")
        assert [(s.name, s.slot_type) for s in ed.slots] == [
            ("fact-id", SlotType.INTEGER), ("action", SlotType.SYMBOL),
            ("reason", SlotType.STRING)]
        pc = pack.template("prompt-context")
        assert [(s.name, s.multi) for s in pc.slots] == [
            ("keywords", True), ("intent", False), ("turn-number", False)]

    def test_empty_source_is_missing_builtins(self):
        with pytest.raises(RuleSemanticError, match="missing built-in templates"):
            parse_rule_pack("")

    def test_duplicate_template_name(self):
        source = TEMPLATE_LISTINGS + "(deftemplate memory-fact (slot x (type SYMBOL)))"
        with pytest.raises(RuleSemanticError, match="duplicate template"):
            parse_rule_pack(source)

    def test_syntax_error_carries_line_and_column(self):
        with pytest.raises(RuleSyntaxError) as exc:
            parse_rule_pack("(deftemplate broken (slot x (type SYMBOL))")
        assert exc.value.line == 1
        assert exc.value.column >= 1

    def test_unknown_slot_type(self):
        with pytest.raises(RuleSyntaxError, match="unknown slot type"):
            parse_rule_pack("(deftemplate t (slot x (type BLOB)))")


class TestRuleParsing:
    def test_unknown_template_names_rule_and_template(self):
        source = TEMPLATE_LISTINGS + """
(defrule check-memroy
   (declare (phase reconcile))
   ?c <- (memroy-fact (subject ?s))
   =>
   (assert-decision discard "typo"))
"""
        with pytest.raises(RuleSemanticError) as exc:
            parse_rule_pack(source)
        assert "check-memroy" in str(exc.value)
        assert "memroy-fact" in str(exc.value)

    def test_unbound_variable_in_action(self):
        source = TEMPLATE_LISTINGS + """
(defrule loose
   (declare (phase reconcile))
   ?c <- (candidate-fact (subject ?s))
   =>
   (bind-retraction ?m "never bound"))
"""
        with pytest.raises(RuleSemanticError, match=r"loose.*\?m|unbound"):
            parse_rule_pack(source)

    def test_unbound_variable_in_reason_template(self):
        source = TEMPLATE_LISTINGS + """
(defrule chatty
   (declare (phase reconcile))
   ?c <- (candidate-fact (subject ?s))
   =>
   (assert-decision discard "who is ?nobody"))
"""
        with pytest.raises(RuleSemanticError, match="chatty"):
            parse_rule_pack(source)

    def test_duplicate_rule_name(self):
        rule = """
(defrule twice
   (declare (phase reconcile))
   ?c <- (candidate-fact (subject ?s))
   =>
   (assert-decision discard "x"))
"""
        with pytest.raises(RuleSemanticError, match="duplicate rule"):
            parse_rule_pack(TEMPLATE_LISTINGS + rule + rule)

    def test_missing_phase_declaration(self):
        source = TEMPLATE_LISTINGS + """
(defrule nophase
   ?c <- (candidate-fact (subject ?s))
   =>
   (assert-decision discard "x"))
"""
        with pytest.raises(RuleSemanticError, match="phase"):
            parse_rule_pack(source)

    def test_salience_range_enforced(self):
        source = TEMPLATE_LISTINGS + """
(defrule shouty
   (declare (phase reconcile) (salience 99999))
   ?c <- (candidate-fact (subject ?s))
   =>
   (assert-decision discard "x"))
"""
        with pytest.raises(RuleSemanticError, match="salience"):
            parse_rule_pack(source)

    def test_unknown_slot_in_pattern(self):
        source = TEMPLATE_LISTINGS + """
(defrule badslot
   (declare (phase reconcile))
   ?c <- (candidate-fact (flavor vanilla))
   =>
   (assert-decision discard "x"))
"""
        with pytest.raises(RuleSemanticError, match="badslot.*flavor"):
            parse_rule_pack(source)


class TestPolicyParsing:
    def test_catch_all_must_be_final(self):
        source = TEMPLATE_LISTINGS + """
(defpolicy category-map
   (* other)
   (works_at personal))
"""
        with pytest.raises(RuleSemanticError, match="catch-all"):
            parse_rule_pack(source)

    def test_missing_catch_all_rejected(self):
        source = TEMPLATE_LISTINGS + "(defpolicy category-map (works_at personal))"
        with pytest.raises(RuleSemanticError, match="catch-all"):
            parse_rule_pack(source)

    def test_templates_only_gets_implicit_catch_all(self):
        pack = parse_rule_pack(TEMPLATE_LISTINGS)
        assert pack.policy.category_map == [("*", Category.OTHER)]

    def test_similarity_threshold_bounds(self):
        source = TEMPLATE_LISTINGS + "(defpolicy similarity-threshold 1.5)"
        with pytest.raises(RuleSemanticError, match="similarity-threshold"):
            parse_rule_pack(source)


class TestRoundTrip:
    def test_default_pack_round_trips(self):
        pack = default_rule_pack()
        assert parse_rule_pack(print_rule_pack(pack)) == pack

    def test_handcrafted_pack_round_trips(self):
        source = TEMPLATE_LISTINGS + """
(defpolicy category-map
   (has_pet personal)
   (favorite_* preference)
   (* other))
(defpolicy multi-valued has_pet)
(defpolicy negation-relations died no_longer_*)
(defpolicy auto-long-term personal)
(defpolicy negation-allow (died has_pet))
(defpolicy similarity-threshold 0.9)

(defrule spot-duplicates
   (declare (phase reconcile) (salience 42))
   ?c <- (candidate-fact (subject ?s) (relation ?r) (value ?v))
   ?m <- (memory-fact (subject ?s) (relation ?r) (value ~?v))
   (not (prompt-context (intent ignore)))
   =>
   (mark-duplicate ?m)
   (assert-decision discard "dup of ?v"))

(defrule classify-pets
   (declare (phase classify) (salience 1))
   ?c <- (candidate-fact (relation has_pet))
   =>
   (set-category personal))
"""
        pack = parse_rule_pack(source)
        assert parse_rule_pack(print_rule_pack(pack)) == pack
        printed_twice = print_rule_pack(parse_rule_pack(print_rule_pack(pack)))
        assert printed_twice == print_rule_pack(pack)


class TestDefaultPack:
    def test_pack_source_file_is_the_authority(self):
        pack = parse_rule_pack(default_rule_pack_source())
        assert pack == default_rule_pack()

    @pytest.mark.parametrize("relation,category", [
        ("works_at", Category.PERSONAL),
        ("speaks_language", Category.SKILL),
        ("zorbulates", Category.OTHER),
        ("prefers", Category.PREFERENCE),
        ("has_pet", Category.PERSONAL),
        ("favorite_color", Category.PREFERENCE),
        ("family", Category.RELATIONSHIP),
        ("working_on", Category.TASK),
        ("always_respond_briefly", Category.INSTRUCTION),
        ("scheduled_standup", Category.TEMPORAL),
        ("currently_debugging", Category.CONTEXT),
    ])
    def test_default_classification_table(self, relation, category):
        assert default_rule_pack().policy.category_for(relation) == category

    def test_default_policy_sets(self):
        policy = default_rule_pack().policy
        assert policy.is_negation("no_longer_has")
        assert policy.is_negation("died")
        assert policy.is_negation("no_longer_believes")  # trailing wildcard
        assert not policy.is_negation("works_at")
        assert policy.is_multi_valued("speaks_language")
        assert not policy.is_multi_valued("works_at")
        assert {c.value for c in policy.auto_long_term_categories} == {
            "personal", "preference", "instruction", "skill"}
        assert policy.similarity_threshold == 0.85

    def test_default_phases(self):
        pack = default_rule_pack()
        assert pack.rules[Phase.CLASSIFY] == []
        reconcile = [r.name for r in pack.rules[Phase.RECONCILE]]
        assert reconcile[0] == "discard-low-confidence"
        saliences = [r.salience for r in pack.rules[Phase.RECONCILE]]
        assert saliences == sorted(saliences, reverse=True)

    def test_pack_error_is_value_error(self):
        assert issubclass(RulePackError, ValueError)
