"""Rule-pack definition language: templates, policy tables, rules.

Template declarations use the parenthesized ``(deftemplate ...)`` form;
policy tables and production rules use the same s-expression surface.
The full grammar is documented in docs/rule-dsl.md. Packs are parsed
once into immutable :class:`RulePack` values and shared read-only.

The language is deliberately small: a fixed action set, a fixed family
of slot tests, and no user-defined functions. Everything the engine's
three phases need is expressible; nothing else is.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Optional, Union

from .model import Category, DecisionAction, RelationPolicy

BUILTIN_TEMPLATES = ("memory-fact", "candidate-fact", "engine-decision", "prompt-context")

# slots the engine materializes beyond the declared template slots
VIRTUAL_SLOTS = {
    "memory-fact": {"active", "category", "memory-type"},
    "candidate-fact": {"category"},
}

SALIENCE_MIN, SALIENCE_MAX = -10_000, 10_000

POLICY_SETS = ("multi-valued", "negation-relations", "auto-long-term")


class RulePackError(ValueError):
    """Base for anything wrong with a rule-pack source."""


class RuleSyntaxError(RulePackError):
    def __init__(self, message: str, line: int, column: int, token: str = ""):
        self.line, self.column, self.token = line, column, token
        suffix = f" near {token!r}" if token else ""
        super().__init__(f"line {line}, column {column}: {message}{suffix}")


class RuleSemanticError(RulePackError):
    pass


class Phase(str, Enum):
    CLASSIFY = "classify"
    RECONCILE = "reconcile"
    LIFECYCLE = "lifecycle"


class SlotType(str, Enum):
    SYMBOL = "symbol"
    STRING = "string"
    FLOAT = "float"
    INTEGER = "integer"


@dataclass(frozen=True)
class SlotDef:
    name: str
    slot_type: SlotType
    multi: bool = False


@dataclass(frozen=True)
class TemplateDef:
    name: str
    slots: tuple[SlotDef, ...]

    def slot_names(self) -> set[str]:
        return {s.name for s in self.slots}


# --- slot tests -------------------------------------------------------------

@dataclass(frozen=True)
class LiteralTest:
    value: Union[str, float, int, bool]


@dataclass(frozen=True)
class VariableTest:
    name: str  # binds on first occurrence, joins on equality afterwards


@dataclass(frozen=True)
class FuzzyTest:
    # entity-level comparison against a bound variable (same_entity semantics)
    name: str
    negate: bool = False


@dataclass(frozen=True)
class MembershipTest:
    policy_set: str
    negate: bool = False


@dataclass(frozen=True)
class RetractableByTest:
    name: str  # variable bound to a negation relation


@dataclass(frozen=True)
class ComparisonTest:
    op: str  # one of < <= > >=
    value: float


SlotTest = Union[LiteralTest, VariableTest, FuzzyTest, MembershipTest,
                 RetractableByTest, ComparisonTest]


@dataclass(frozen=True)
class Pattern:
    template: str
    tests: tuple[tuple[str, tuple[SlotTest, ...]], ...]
    binding: Optional[str] = None  # ?var bound to the matched instance
    negated: bool = False


# --- actions ----------------------------------------------------------------

@dataclass(frozen=True)
class AssertDecision:
    action: DecisionAction
    reason: str


@dataclass(frozen=True)
class SetCategory:
    category: Category


@dataclass(frozen=True)
class MarkDuplicate:
    name: str


@dataclass(frozen=True)
class BindRetraction:
    name: str
    reason: str


RuleAction = Union[AssertDecision, SetCategory, MarkDuplicate, BindRetraction]


@dataclass(frozen=True)
class RuleDef:
    name: str
    phase: Phase
    conditions: tuple[Pattern, ...]
    actions: tuple[RuleAction, ...]
    salience: int = 0


@dataclass
class RulePack:
    templates: list[TemplateDef]
    rules: dict[Phase, list[RuleDef]]
    policy: RelationPolicy

    def template(self, name: str) -> TemplateDef:
        for t in self.templates:
            if t.name == name:
                return t
        raise KeyError(name)

    def all_rules(self) -> list[RuleDef]:
        return [r for phase in Phase for r in self.rules[phase]]

    def fingerprint(self) -> str:
        return hashlib.sha256(print_rule_pack(self).encode("utf-8")).hexdigest()


# --- tokenizer / reader -----------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>;[^\n]*)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<symbol>[^\s()";]+)
""", re.VERBOSE)


@dataclass(frozen=True)
class _Token:
    kind: str  # lparen | rparen | string | symbol
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            col = pos - line_start + 1
            raise RuleSyntaxError("unreadable character", line, col, source[pos])
        kind = m.lastgroup or ""
        text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(_Token(kind, text, line, pos - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rfind("\n") + 1
        pos = m.end()
    return tokens


@dataclass
class _Node:
    """Either an atom (token) or a list of nodes, with source position."""
    items: Optional[list["_Node"]]
    token: Optional[_Token]

    @property
    def is_list(self) -> bool:
        return self.items is not None

    @property
    def pos(self) -> tuple[int, int]:
        t = self.token
        if t is not None:
            return t.line, t.column
        if self.items:
            return self.items[0].pos
        return 0, 0


def _read_all(tokens: list[_Token]) -> list[_Node]:
    forms: list[_Node] = []
    pos = 0

    def read() -> _Node:
        nonlocal pos
        tok = tokens[pos]
        if tok.kind == "lparen":
            open_tok = tok
            pos += 1
            items: list[_Node] = []
            while True:
                if pos >= len(tokens):
                    raise RuleSyntaxError("unclosed parenthesis", open_tok.line, open_tok.column, "(")
                if tokens[pos].kind == "rparen":
                    pos += 1
                    return _Node(items, open_tok)
                items.append(read())
        if tok.kind == "rparen":
            raise RuleSyntaxError("unmatched closing parenthesis", tok.line, tok.column, ")")
        pos += 1
        return _Node(None, tok)

    while pos < len(tokens):
        forms.append(read())
    return forms


def _unquote(text: str) -> str:
    body = text[1:-1]
    return body.replace('\\"', '"').replace("\\\\", "\\")


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


_NUMBER_RE = re.compile(r"^-?\d+(\.\d+)?$")
_VAR_RE = re.compile(r"^\?[A-Za-z][A-Za-z0-9_-]*$")
_REASON_VAR_RE = re.compile(r"\?[A-Za-z][A-Za-z0-9_-]*")


def _atom_text(node: _Node, what: str) -> str:
    if node.is_list or node.token is None:
        line, col = node.pos
        raise RuleSyntaxError(f"expected {what}", line, col)
    return node.token.text


def _symbol(node: _Node, what: str) -> str:
    text = _atom_text(node, what)
    if node.token.kind != "symbol":
        raise RuleSyntaxError(f"expected {what}", node.token.line, node.token.column, text)
    return text


# --- form parsers -----------------------------------------------------------

def _parse_template(node: _Node) -> TemplateDef:
    items = node.items or []
    if len(items) < 2:
        line, col = node.pos
        raise RuleSyntaxError("deftemplate needs a name", line, col)
    name = _symbol(items[1], "template name")
    slots: list[SlotDef] = []
    for slot_node in items[2:]:
        if not slot_node.is_list or not slot_node.items:
            line, col = slot_node.pos
            raise RuleSyntaxError("expected (slot ...) form", line, col)
        parts = slot_node.items
        head = _symbol(parts[0], "slot keyword")
        if head not in ("slot", "multislot"):
            raise RuleSyntaxError("expected slot declaration", *slot_node.pos, token=head)
        if len(parts) < 2:
            raise RuleSyntaxError("slot needs a name", *slot_node.pos)
        slot_name = _symbol(parts[1], "slot name")
        slot_type, multi = SlotType.SYMBOL, head == "multislot"
        for extra in parts[2:]:
            if not extra.is_list or len(extra.items or []) != 2:
                raise RuleSyntaxError("expected (type ...) qualifier", *extra.pos)
            key = _symbol(extra.items[0], "qualifier")
            val = _symbol(extra.items[1], "qualifier value")
            if key != "type":
                raise RuleSyntaxError(f"unknown slot qualifier {key}", *extra.pos, token=key)
            if val == "MULTISLOT":
                multi = True
            else:
                try:
                    slot_type = SlotType(val.lower())
                except ValueError:
                    raise RuleSyntaxError(f"unknown slot type {val}", *extra.pos, token=val) from None
        if any(s.name == slot_name for s in slots):
            raise RuleSemanticError(f"template {name}: duplicate slot {slot_name}")
        slots.append(SlotDef(slot_name, slot_type, multi))
    return TemplateDef(name, tuple(slots))


def _parse_category(text: str, where: str) -> Category:
    try:
        return Category(text)
    except ValueError:
        raise RuleSemanticError(f"{where}: unknown category {text!r}") from None


def _parse_policy(node: _Node, policy: RelationPolicy, seen: set[str]) -> None:
    items = node.items or []
    if len(items) < 2:
        raise RuleSyntaxError("defpolicy needs a table name", *node.pos)
    table = _symbol(items[1], "policy table name")
    if table in seen:
        raise RuleSemanticError(f"duplicate defpolicy {table}")
    seen.add(table)
    body = items[2:]
    if table == "category-map":
        for entry in body:
            if not entry.is_list or len(entry.items or []) != 2:
                raise RuleSyntaxError("category-map entries are (relation category) pairs", *entry.pos)
            rel = _symbol(entry.items[0], "relation pattern")
            cat = _parse_category(_symbol(entry.items[1], "category"), "category-map")
            policy.category_map.append((rel, cat))
    elif table == "multi-valued":
        policy.multi_valued.extend(_symbol(n, "relation") for n in body)
    elif table == "negation-relations":
        policy.negation_relations.extend(_symbol(n, "relation") for n in body)
    elif table == "auto-long-term":
        policy.auto_long_term_categories.extend(
            _parse_category(_symbol(n, "category"), "auto-long-term") for n in body)
    elif table == "negation-allow":
        for entry in body:
            if not entry.is_list or len(entry.items or []) < 2:
                raise RuleSyntaxError("negation-allow entries are (negation relation...) lists", *entry.pos)
            key = _symbol(entry.items[0], "negation relation")
            policy.negation_retractables[key] = [
                _symbol(n, "relation") for n in entry.items[1:]]
    elif table == "similarity-threshold":
        if len(body) != 1:
            raise RuleSyntaxError("similarity-threshold takes one number", *node.pos)
        text = _symbol(body[0], "threshold")
        try:
            value = float(text)
        except ValueError:
            raise RuleSyntaxError("threshold must be a number", *body[0].pos, token=text) from None
        if not 0.0 < value <= 1.0:
            raise RuleSemanticError(f"similarity-threshold must be in (0, 1], got {value}")
        policy.similarity_threshold = value
    else:
        raise RuleSemanticError(f"unknown policy table {table!r}")


def _parse_slot_test(node: _Node, rule: str) -> SlotTest:
    if node.is_list:
        parts = node.items or []
        if not parts:
            raise RuleSyntaxError("empty slot test", *node.pos)
        head = _symbol(parts[0], "test keyword")
        if head in ("in", "not-in"):
            if len(parts) != 2:
                raise RuleSyntaxError(f"({head} ...) takes one policy set", *node.pos)
            target = _symbol(parts[1], "policy set")
            if target not in POLICY_SETS:
                raise RuleSemanticError(f"rule {rule}: unknown policy set {target!r}")
            return MembershipTest(target, negate=head == "not-in")
        if head == "retractable-by":
            if len(parts) != 2:
                raise RuleSyntaxError("(retractable-by ?var) takes one variable", *node.pos)
            var = _symbol(parts[1], "variable")
            if not _VAR_RE.match(var):
                raise RuleSyntaxError("retractable-by needs a ?variable", *parts[1].pos, token=var)
            return RetractableByTest(var[1:])
        if head in ("<", "<=", ">", ">="):
            if len(parts) != 2:
                raise RuleSyntaxError(f"({head} ...) takes one number", *node.pos)
            text = _symbol(parts[1], "number")
            if not _NUMBER_RE.match(text):
                raise RuleSyntaxError("comparison needs a numeric literal", *parts[1].pos, token=text)
            return ComparisonTest(head, float(text))
        raise RuleSyntaxError(f"unknown slot test {head}", *node.pos, token=head)

    tok = node.token
    text = tok.text
    if tok.kind == "string":
        return LiteralTest(_unquote(text))
    if text.startswith("~?"):
        return FuzzyTest(text[2:])
    if text.startswith("~!?"):
        return FuzzyTest(text[3:], negate=True)
    if _VAR_RE.match(text):
        return VariableTest(text[1:])
    if text in ("true", "false"):
        return LiteralTest(text == "true")
    if _NUMBER_RE.match(text):
        return LiteralTest(float(text) if "." in text else int(text))
    return LiteralTest(text)


def _parse_pattern(node: _Node, rule: str, binding: Optional[str], negated: bool) -> Pattern:
    items = node.items or []
    if not items:
        raise RuleSyntaxError("empty pattern", *node.pos)
    template = _symbol(items[0], "template name")
    tests: list[tuple[str, tuple[SlotTest, ...]]] = []
    for slot_node in items[1:]:
        if not slot_node.is_list or not slot_node.items:
            raise RuleSyntaxError("expected (slot-name test...) form", *slot_node.pos)
        slot_name = _symbol(slot_node.items[0], "slot name")
        slot_tests = tuple(_parse_slot_test(t, rule) for t in slot_node.items[1:])
        if not slot_tests:
            raise RuleSyntaxError(f"slot {slot_name} has no test", *slot_node.pos)
        tests.append((slot_name, slot_tests))
    return Pattern(template, tuple(tests), binding=binding, negated=negated)


def _parse_action(node: _Node, rule: str) -> RuleAction:
    items = node.items or []
    if not items:
        raise RuleSyntaxError("empty action", *node.pos)
    head = _symbol(items[0], "action keyword")
    if head == "assert-decision":
        if len(items) != 3:
            raise RuleSyntaxError("(assert-decision action \"reason\")", *node.pos)
        action_text = _symbol(items[1], "decision action")
        try:
            action = DecisionAction(action_text)
        except ValueError:
            raise RuleSemanticError(f"rule {rule}: unknown decision action {action_text!r}") from None
        if items[2].token is None or items[2].token.kind != "string":
            raise RuleSyntaxError("assert-decision reason must be a string", *items[2].pos)
        return AssertDecision(action, _unquote(items[2].token.text))
    if head == "set-category":
        if len(items) != 2:
            raise RuleSyntaxError("(set-category category)", *node.pos)
        return SetCategory(_parse_category(_symbol(items[1], "category"), f"rule {rule}"))
    if head == "mark-duplicate":
        if len(items) != 2:
            raise RuleSyntaxError("(mark-duplicate ?var)", *node.pos)
        var = _symbol(items[1], "variable")
        if not _VAR_RE.match(var):
            raise RuleSyntaxError("mark-duplicate needs a ?variable", *items[1].pos, token=var)
        return MarkDuplicate(var[1:])
    if head == "bind-retraction":
        if len(items) != 3:
            raise RuleSyntaxError("(bind-retraction ?var \"reason\")", *node.pos)
        var = _symbol(items[1], "variable")
        if not _VAR_RE.match(var):
            raise RuleSyntaxError("bind-retraction needs a ?variable", *items[1].pos, token=var)
        if items[2].token is None or items[2].token.kind != "string":
            raise RuleSyntaxError("bind-retraction reason must be a string", *items[2].pos)
        return BindRetraction(var[1:], _unquote(items[2].token.text))
    raise RuleSyntaxError(f"unknown action {head}", *node.pos, token=head)


def _parse_rule(node: _Node) -> RuleDef:
    items = node.items or []
    if len(items) < 2:
        raise RuleSyntaxError("defrule needs a name", *node.pos)
    name = _symbol(items[1], "rule name")
    body = items[2:]
    phase: Optional[Phase] = None
    salience = 0

    idx = 0
    if body and body[idx].is_list and body[idx].items \
            and body[idx].items[0].token is not None \
            and body[idx].items[0].token.text == "declare":
        for decl in body[idx].items[1:]:
            if not decl.is_list or len(decl.items or []) != 2:
                raise RuleSyntaxError("declare entries are (key value) pairs", *decl.pos)
            key = _symbol(decl.items[0], "declare key")
            val = _symbol(decl.items[1], "declare value")
            if key == "phase":
                try:
                    phase = Phase(val)
                except ValueError:
                    raise RuleSemanticError(f"rule {name}: unknown phase {val!r}") from None
            elif key == "salience":
                if not _NUMBER_RE.match(val) or "." in val:
                    raise RuleSyntaxError("salience must be an integer", *decl.items[1].pos, token=val)
                salience = int(val)
            else:
                raise RuleSemanticError(f"rule {name}: unknown declare key {key!r}")
        idx += 1
    if phase is None:
        raise RuleSemanticError(f"rule {name}: missing (declare (phase ...))")
    if not SALIENCE_MIN <= salience <= SALIENCE_MAX:
        raise RuleSemanticError(
            f"rule {name}: salience {salience} outside [{SALIENCE_MIN}, {SALIENCE_MAX}]")

    conditions: list[Pattern] = []
    actions: list[RuleAction] = []
    in_actions = False
    pending_binding: Optional[str] = None
    i = idx
    while i < len(body):
        node_i = body[i]
        if node_i.token is not None and node_i.token.text == "=>":
            if pending_binding is not None:
                raise RuleSyntaxError("dangling pattern binding", *node_i.pos, token="<-")
            in_actions = True
            i += 1
            continue
        if in_actions:
            actions.append(_parse_action(node_i, name))
            i += 1
            continue
        # condition side
        if node_i.token is not None and _VAR_RE.match(node_i.token.text):
            if i + 1 >= len(body) or body[i + 1].token is None or body[i + 1].token.text != "<-":
                raise RuleSyntaxError("expected <- after pattern variable", *node_i.pos,
                                      token=node_i.token.text)
            pending_binding = node_i.token.text[1:]
            i += 2
            continue
        if not node_i.is_list:
            raise RuleSyntaxError("expected a condition pattern", *node_i.pos,
                                  token=_atom_text(node_i, "pattern"))
        head = node_i.items[0] if node_i.items else None
        if head is not None and head.token is not None and head.token.text == "not":
            if pending_binding is not None:
                raise RuleSyntaxError("negated patterns cannot be bound", *node_i.pos)
            if len(node_i.items) != 2 or not node_i.items[1].is_list:
                raise RuleSyntaxError("(not (pattern ...)) takes one pattern", *node_i.pos)
            conditions.append(_parse_pattern(node_i.items[1], name, None, negated=True))
        else:
            conditions.append(_parse_pattern(node_i, name, pending_binding, negated=False))
            pending_binding = None
        i += 1

    if not in_actions:
        raise RuleSemanticError(f"rule {name}: missing => separator")
    if not conditions:
        raise RuleSemanticError(f"rule {name}: at least one condition required")
    if not actions:
        raise RuleSemanticError(f"rule {name}: at least one action required")
    return RuleDef(name, phase, tuple(conditions), tuple(actions), salience)


# --- semantic validation ----------------------------------------------------

def _bound_variables(rule: RuleDef) -> set[str]:
    bound: set[str] = set()
    for cond in rule.conditions:
        if cond.negated:
            continue
        if cond.binding:
            bound.add(cond.binding)
        for _slot, tests in cond.tests:
            for test in tests:
                if isinstance(test, VariableTest):
                    bound.add(test.name)
    return bound


def _action_variables(rule: RuleDef) -> set[str]:
    used: set[str] = set()
    for action in rule.actions:
        if isinstance(action, (MarkDuplicate, BindRetraction)):
            used.add(action.name)
        reason = getattr(action, "reason", None)
        if reason:
            used.update(v[1:] for v in _REASON_VAR_RE.findall(reason))
    for cond in rule.conditions:
        for _slot, tests in cond.tests:
            for test in tests:
                if isinstance(test, (FuzzyTest, RetractableByTest)):
                    used.add(test.name)
    return used


def _validate_pack(pack: RulePack) -> None:
    names = [t.name for t in pack.templates]
    if len(names) != len(set(names)):
        dup = next(n for n in names if names.count(n) > 1)
        raise RuleSemanticError(f"duplicate template {dup!r}")
    missing = [b for b in BUILTIN_TEMPLATES if b not in names]
    if missing:
        raise RuleSemanticError(f"missing built-in templates: {', '.join(missing)}")

    if not pack.policy.category_map:
        # templates-only packs get the implicit catch-all
        pack.policy.category_map.append(("*", Category.OTHER))
    last_pattern, last_category = pack.policy.category_map[-1]
    if last_pattern != "*" or last_category != Category.OTHER:
        raise RuleSemanticError("category-map must end with the (* other) catch-all")

    by_template = {t.name: t for t in pack.templates}
    rule_names: set[str] = set()
    for rule in pack.all_rules():
        if rule.name in rule_names:
            raise RuleSemanticError(f"duplicate rule {rule.name!r}")
        rule_names.add(rule.name)
        for cond in rule.conditions:
            template = by_template.get(cond.template)
            if template is None:
                raise RuleSemanticError(
                    f"rule {rule.name}: unknown template {cond.template!r}")
            legal = template.slot_names() | VIRTUAL_SLOTS.get(cond.template, set())
            for slot, _tests in cond.tests:
                if slot not in legal:
                    raise RuleSemanticError(
                        f"rule {rule.name}: template {cond.template} has no slot {slot!r}")
        unbound = _action_variables(rule) - _bound_variables(rule)
        if unbound:
            raise RuleSemanticError(
                f"rule {rule.name}: unbound variable ?{sorted(unbound)[0]}")


# --- public API -------------------------------------------------------------

def parse_rule_pack(source: str) -> RulePack:
    """Parse rule-pack source into a validated RulePack.

    Raises RuleSyntaxError (with line/column) on malformed input and
    RuleSemanticError (naming the rule) on consistency violations.
    """
    forms = _read_all(_tokenize(source))
    templates: list[TemplateDef] = []
    rules: dict[Phase, list[RuleDef]] = {p: [] for p in Phase}
    policy = RelationPolicy()
    seen_policies: set[str] = set()

    for form in forms:
        if not form.is_list or not form.items:
            raise RuleSyntaxError("expected a top-level (def...) form", *form.pos)
        head = _symbol(form.items[0], "form keyword")
        if head == "deftemplate":
            templates.append(_parse_template(form))
        elif head == "defpolicy":
            _parse_policy(form, policy, seen_policies)
        elif head == "defrule":
            rule = _parse_rule(form)
            rules[rule.phase].append(rule)
        else:
            raise RuleSyntaxError(f"unknown form {head}", *form.pos, token=head)

    pack = RulePack(templates, rules, policy)
    _validate_pack(pack)
    return pack


def _print_test(test: SlotTest) -> str:
    if isinstance(test, LiteralTest):
        v = test.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, int):
            return str(v)
        # string literals are quoted; plain tokens stay bare symbols
        if re.match(r"^[A-Za-z0-9_.*-]+$", v) and not _NUMBER_RE.match(v) and v not in ("true", "false"):
            return v
        return _quote(v)
    if isinstance(test, VariableTest):
        return f"?{test.name}"
    if isinstance(test, FuzzyTest):
        return (f"~!?{test.name}" if test.negate else f"~?{test.name}")
    if isinstance(test, MembershipTest):
        return f"({'not-in' if test.negate else 'in'} {test.policy_set})"
    if isinstance(test, RetractableByTest):
        return f"(retractable-by ?{test.name})"
    if isinstance(test, ComparisonTest):
        value = int(test.value) if test.value == int(test.value) else test.value
        return f"({test.op} {value})"
    raise TypeError(f"unknown test {test!r}")


def _print_pattern(cond: Pattern) -> str:
    slots = "".join(
        f" ({slot} {' '.join(_print_test(t) for t in tests)})"
        for slot, tests in cond.tests)
    body = f"({cond.template}{slots})"
    if cond.negated:
        return f"(not {body})"
    if cond.binding:
        return f"?{cond.binding} <- {body}"
    return body


def _print_action(action: RuleAction) -> str:
    if isinstance(action, AssertDecision):
        return f"(assert-decision {action.action.value} {_quote(action.reason)})"
    if isinstance(action, SetCategory):
        return f"(set-category {action.category.value})"
    if isinstance(action, MarkDuplicate):
        return f"(mark-duplicate ?{action.name})"
    if isinstance(action, BindRetraction):
        return f"(bind-retraction ?{action.name} {_quote(action.reason)})"
    raise TypeError(f"unknown action {action!r}")


def print_rule_pack(pack: RulePack) -> str:
    """Render a pack back to DSL source; parse(print(pack)) == pack."""
    out: list[str] = []
    for template in pack.templates:
        lines = [f"(deftemplate {template.name}"]
        for slot in template.slots:
            if slot.multi and slot.slot_type != SlotType.SYMBOL:
                lines.append(f"   (multislot {slot.name} (type {slot.slot_type.value.upper()}))")
            elif slot.multi:
                lines.append(f"   (slot {slot.name} (type MULTISLOT))")
            else:
                lines.append(f"   (slot {slot.name} (type {slot.slot_type.value.upper()}))")
        out.append("\n".join(lines) + ")")

    policy = pack.policy
    if policy.category_map:
        entries = "\n".join(f"   ({rel} {cat.value})" for rel, cat in policy.category_map)
        out.append(f"(defpolicy category-map\n{entries})")
    if policy.multi_valued:
        out.append(f"(defpolicy multi-valued {' '.join(policy.multi_valued)})")
    if policy.negation_relations:
        out.append(f"(defpolicy negation-relations {' '.join(policy.negation_relations)})")
    if policy.auto_long_term_categories:
        cats = " ".join(c.value for c in policy.auto_long_term_categories)
        out.append(f"(defpolicy auto-long-term {cats})")
    if policy.negation_retractables:
        entries = "\n".join(f"   ({neg} {' '.join(rels)})"
                            for neg, rels in policy.negation_retractables.items())
        out.append(f"(defpolicy negation-allow\n{entries})")
    threshold = int(policy.similarity_threshold) \
        if policy.similarity_threshold == int(policy.similarity_threshold) \
        else policy.similarity_threshold
    out.append(f"(defpolicy similarity-threshold {threshold})")

    for phase in Phase:
        for rule in pack.rules[phase]:
            lines = [f"(defrule {rule.name}",
                     f"   (declare (phase {rule.phase.value}) (salience {rule.salience}))"]
            lines.extend(f"   {_print_pattern(c)}" for c in rule.conditions)
            lines.append("   =>")
            lines.extend(f"   {_print_action(a)}" for a in rule.actions)
            out.append("\n".join(lines) + ")")
    return "\n\n".join(out) + "\n"


_default_pack: Optional[RulePack] = None


def default_rule_pack_source() -> str:
    return resources.files("neusymms.data").joinpath("default.rules").read_text("utf-8")


def default_rule_pack() -> RulePack:
    """The built-in pack, parsed from the shipped data file (cached)."""
    global _default_pack
    if _default_pack is None:
        _default_pack = parse_rule_pack(default_rule_pack_source())
    return _default_pack
