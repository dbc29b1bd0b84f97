#!/usr/bin/env python3
"""Regenerates the synthetic micro-dataset and the scripted-provider fixture.

Outputs (relative to the repository root):
  data/micro.jsonl       12 hand-written training items
  data/heldout.jsonl     one held-out item for the inference demo
  fixtures/demo.jsonl    scripted responses covering training and inference

Items fall into three groups: generated correctly at once, fixed by the
first tree's rule, and fixed only after a second tree in iteration 2.
"""

import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent
SOURCE = "micro-synthetic"


def item(id_, nl, signals, golden, wrong=None, diag=None, ground=None, rule=None,
         wrong2=None, diag2=None, ground2=None, rule2=None):
    return dict(id=id_, nl=nl, signals=signals, golden=golden, wrong=wrong, diag=diag,
                ground=ground, rule=rule, wrong2=wrong2, diag2=diag2, ground2=ground2, rule2=rule2)


ITEMS = [
    item("m01", "When req is asserted, gnt must be asserted in the same cycle.",
         ["clk", "req", "gnt"], "@(posedge clk) req |-> gnt",
         wrong="@(posedge clk) req |=> gnt",
         diag=("Which cycle does the generated assertion check gnt in?",
               "It uses |=>, so gnt is checked one cycle after req, while the specification says same cycle."),
         ground=("What is the formal difference between |-> and |=>?",
                 "Overlapping implication |-> checks the consequent in the antecedent cycle; non-overlapping |=> checks it one cycle later."),
         rule=("Which operator fixes the timing?",
               "Use overlapping implication |-> instead of non-overlapping |=> when gnt must respond in the same cycle as req.")),
    item("m02", "Whenever start rises, done must be high exactly two cycles later.",
         ["clk", "start", "done"], "$rose(start) |-> ##2 done",
         wrong="start |-> ##2 done",
         diag=("What triggers the generated check?",
               "The level of start triggers it, so a start held high fires the check on every cycle."),
         ground=("How is an edge expressed in a sampled assertion?",
                 "$rose(start) is true only in the cycle where start changes from 0 to 1."),
         rule=("How should the antecedent be written?",
               "Use $rose(start) as the antecedent so the check fires only on the rising edge, keeping |-> ##2 done.")),
    item("m03", "If valid is high and ready is low, valid must stay high in the next cycle.",
         ["clk", "valid", "ready"], "valid && !ready |=> valid",
         wrong="valid || !ready |=> valid",
         diag=("How are the two conditions combined in the generated antecedent?",
               "They are combined with ||, so either condition alone triggers the check."),
         ground=("What does the specification require of the antecedent?",
                 "Both conditions must hold together, which is a conjunction with &&."),
         rule=("Which combinational operator belongs in the antecedent?",
               "Combine valid and !ready with && rather than || in the antecedent of |=>.")),
    item("m04", "After a request, ack must arrive within one to three cycles.",
         ["clk", "req", "ack"], "req |-> ##[1:3] ack",
         wrong="req |-> ##3 ack",
         diag=("What delay does the generated assertion allow?",
               "Only a fixed delay ##3, so an ack after one or two cycles is rejected."),
         ground=("How is a window of cycles expressed?",
                 "A ranged delay ##[1:3] accepts the consequent anywhere from one to three cycles later."),
         rule=("Which delay form is needed?",
               "Use the ranged delay ##[1:3] instead of the fixed delay ##3 before ack.")),
    item("m05", "While rst is low, err must never be asserted.",
         ["clk", "rst", "err"], "@(posedge clk) disable iff (rst) !err"),
    item("m06", "When load is high, data_ok must keep its value in the next cycle.",
         ["clk", "load", "data_ok"], "load |=> $stable(data_ok)"),
    item("m07", "If full is asserted, push must not be asserted.",
         ["clk", "full", "push"], "full |-> !push"),
    item("m08", "Once req is seen, grant must eventually be given.",
         ["clk", "req", "grant"], "req |-> s_eventually grant",
         wrong="req |-> ##1 grant",
         diag=("When does the generated assertion expect grant?",
               "Exactly one cycle after req because of ##1, which is stricter than eventually."),
         ground=("Which operator expresses an unbounded future obligation?",
                 "s_eventually requires the operand at some present or future cycle."),
         rule=("How should the consequent be written?",
               "Use s_eventually grant as the consequent instead of a fixed ##1 delay.")),
    item("m09", "When en falls, idle must be high in the same cycle.",
         ["clk", "en", "idle"], "$fell(en) |-> idle",
         wrong="!en |-> idle",
         diag=("What condition triggers the generated check?",
               "Any cycle with en low, not only the falling edge."),
         ground=("How is a falling edge sampled?",
                 "$fell(en) holds only in the cycle where en goes from 1 to 0."),
         rule=("Which sampling function is needed?",
               "Use $fell(en) instead of !en as the antecedent of |->.")),
    item("m10", "Exactly one of sel_a and sel_b is high in every cycle.",
         ["clk", "sel_a", "sel_b"], "sel_a ^ sel_b",
         wrong="sel_a || sel_b",
         diag=("Does the generated assertion forbid both selects being high?",
               "No, || accepts the case where sel_a and sel_b are both high."),
         ground=("How can both-high be excluded?",
                 "A conjunction with && can restrict which combinations are allowed."),
         rule=("Which operator should join the selects?",
               "Replace || with && between sel_a and sel_b."),
         wrong2="sel_a && sel_b",
         diag2=("Why does the && form still disagree?",
                "It requires both selects high, but exactly one must be high."),
         ground2=("Which operator is true when exactly one input is high?",
                  "Exclusive or ^ is true exactly when its operands differ."),
         rule2=("What is the final operator choice?",
                "Use the exclusive-or operator ^ between sel_a and sel_b instead of && or ||.")),
    item("m11", "When irq is asserted, ack must be asserted in the following cycle.",
         ["clk", "irq", "ack"], "irq |=> ack",
         wrong="irq |-> ack",
         diag=("In which cycle does the generated assertion check ack?",
               "In the same cycle as irq, because |-> overlaps."),
         ground=("How can a later check be expressed?",
                 "A delay such as ##2 after |-> moves the consequent later."),
         rule=("What delay should precede ack?",
               "Add a ##2 delay before ack after |->."),
         wrong2="irq |-> ##2 ack",
         diag2=("Is a two-cycle delay what the specification asks for?",
                "No, the following cycle is exactly one cycle later, and ##2 waits two."),
         ground2=("Which implication checks exactly one cycle later?",
                  "Non-overlapping implication |=> checks the consequent one cycle after the antecedent."),
         rule2=("Which implication is correct?",
                "Use non-overlapping implication |=> so ack is checked exactly one cycle after irq.")),
    item("m12", "busy must equal the value start had in the previous cycle.",
         ["clk", "busy", "start"], "busy == $past(start)",
         wrong="busy == start",
         diag=("Which value of start does the generated assertion compare?",
               "The current value, not the previous one."),
         ground=("How is a previous-cycle value referenced?",
                 "$past(start) returns the value of start one cycle earlier."),
         rule=("How should the comparison be written?",
               "Compare busy with $past(start) using == instead of the current start.")),
]

HELDOUT = dict(
    id="h01",
    nl="When cmd_req is asserted, cmd_gnt must be asserted in the same cycle.",
    signals=["clk", "cmd_req", "cmd_gnt"],
    golden="@(posedge clk) cmd_req |-> cmd_gnt",
    wrong="@(posedge clk) cmd_req |=> cmd_gnt",
    adapted="Use overlapping implication |-> instead of non-overlapping |=> so cmd_gnt is checked in the same cycle as cmd_req.",
)

# Extra children for runs with more than one question per layer. Each reply
# differs from the first so the diversity gate accepts it.
EXTRA_QUESTIONS = {
    "ContextualDiagnosis": [
        ("Could a signal naming mismatch explain the failure?", "No, both assertions use the declared signals."),
        ("Is the clocking of the two assertions different?", "No, both sample on the same clock."),
    ],
    "TheoreticalGrounding": [
        ("Does reset handling change the meaning here?", "No, neither assertion depends on reset."),
        ("Would a vacuous pass hide the difference?", "Only on traces where the antecedent never holds."),
    ],
    "RuleGeneration": [
        ("Is there a naming rule to add?", "No further naming rule is needed."),
        ("Is there a clocking rule to add?", "Keep the existing clocking unchanged."),
    ],
}


def gen(nl, rules, response):
    return {"kind": "GenerateSva", "match": {"nl_spec": nl, "rules": rules},
            "response": f"```systemverilog\n{response};\n```"}


def layer(name, nl, qa, extra_keys=None):
    match = {"layer": name, "nl_spec": nl, "asked_questions": "(none)"}
    match.update(extra_keys or {})
    q, a = qa
    body = f"Question: {q}\nAnswer: {a}"
    if name == "RuleGeneration":
        body += f"\nRule: {a}"
    return {"kind": "BuildOpTreeLayer", "match": match, "response": body}


def build_fixture():
    recs = []
    for it in ITEMS:
        nl = it["nl"]
        if it["wrong"] is None:
            recs.append(gen(nl, "(none)", it["golden"]))
            continue
        recs.append(gen(nl, "(none)", it["wrong"]))
        if it["rule2"]:
            # Record order matters: with both rules present, the later rule's
            # record must come first to win the tie.
            recs.append(gen(nl, it["rule2"][1], it["golden"]))
            recs.append(gen(nl, it["rule"][1], it["wrong2"]))
        else:
            recs.append(gen(nl, it["rule"][1], it["golden"]))
        recs.append(layer("ContextualDiagnosis", nl, it["diag"]))
        recs.append(layer("TheoreticalGrounding", nl, it["ground"]))
        recs.append(layer("RuleGeneration", nl, it["rule"]))
        if it["rule2"]:
            second = {"failing_sva": it["wrong2"]}
            recs.append(layer("ContextualDiagnosis", nl, it["diag2"], second))
            recs.append(layer("TheoreticalGrounding", nl, it["ground2"], second))
            recs.append(layer("RuleGeneration", nl, it["rule2"], second))

    for name, extras in EXTRA_QUESTIONS.items():
        # Second sibling: anything already asked. Third sibling: the second
        # was rejected as a repeat, so answer the re-prompt differently.
        recs.append({"kind": "BuildOpTreeLayer", "match": {"layer": name, "asked_questions": "- "},
                     "response": f"Question: {extras[0][0]}\nAnswer: {extras[0][1]}"})
        recs.append({"kind": "BuildOpTreeLayer",
                     "match": {"layer": name, "asked_questions": "- ", "rejected_question": extras[0][0]},
                     "response": f"Question: {extras[1][0]}\nAnswer: {extras[1][1]}"})

    h = HELDOUT
    recs.append(gen(h["nl"], "(none)", h["wrong"]))
    recs.append(gen(h["nl"], "cmd_gnt is checked in the same cycle", h["golden"]))
    recs.append({"kind": "JudgeApplicability",
                 "match": {"nl_spec": h["nl"], "trace": "gnt must respond in the same cycle"},
                 "response": "0.9"})
    recs.append({"kind": "JudgeApplicability", "match": {}, "response": "0.1"})
    recs.append({"kind": "AdaptRules", "match": {"nl_spec": h["nl"]}, "response": f"Rule: {h['adapted']}"})
    return recs


def record(it):
    return {"id": it["id"], "nl": it["nl"], "golden_sva": it["golden"],
            "design_context": [{"name": s, "width": 1} for s in it["signals"]],
            "source": SOURCE, "schema_version": 1}


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))


def main():
    write_jsonl(ROOT / "data" / "micro.jsonl", [record(it) for it in ITEMS])
    write_jsonl(ROOT / "data" / "heldout.jsonl", [record(HELDOUT)])
    write_jsonl(ROOT / "fixtures" / "demo.jsonl", build_fixture())


if __name__ == "__main__":
    main()
