// Prompt texts for every provider role. The response formats requested here
// are the ones the pipeline parses; keep the two in sync.

#include "truex/provider.hpp"

namespace truex {

namespace {

const char* kStepGrammar =
    "Write one step per line in this exact format:\n"
    "STEP <n>: <opcode>; in=<var,...>; out=<var>; expr=\"<expression>\"; rule=\"<rule>\"; desc=\"<short text>\"\n"
    "Opcodes: bind_given (out + a literal expr restating a quantity from the problem), compute (in, out, expr),\n"
    "lookup_rule (rule over `option`, e.g. equals(total, option)), select_answer (in = the variable holding the\n"
    "answer; must be last), narrate (desc only).\n"
    "Expressions use + - * / ^, parentheses and abs, min, max, floor, ceil, round, sqrt, mod, percent.\n"
    "Never write computed intermediate values or the final answer; only the givens may appear as numbers.";

const char* kSolveFormat =
    "Reason step by step, one step per line. Finish with a single line `ANSWER: <value>` (numeric tasks) or\n"
    "`ANSWER: <label>` (multiple choice).";

PromptTemplate explain(const char* id, const char* style) {
  return {id,
          std::string("You restate solutions as executable procedures. ") + style + "\n" + kStepGrammar,
          "Problem:\n{{problem}}\n{{choices}}\nWrite the executable explanation."};
}

TemplateRegistry make_builtin() {
  TemplateRegistry r;
  r.add(explain("explain.cot", "Think through the problem in order before writing the steps."));
  r.add(explain("explain.zero_shot_cot", "Let's think step by step."));
  r.add(explain("explain.plan_and_solve", "First devise a plan that splits the task into subtasks, then carry it out."));
  r.add(explain("explain.self_refine",
                "Draft the steps, critique them for missing or wrong operations, then output only the refined steps."));
  r.add({"solve.cot", std::string("You solve problems carefully.\n") + kSolveFormat,
         "Problem:\n{{problem}}\n{{choices}}\n(sample {{sample}})"});
  r.add({"execute.interpret",
         "You execute one step of a procedure without seeing the original problem. Translate the step into a\n"
         "single operation over the listed variables. Reply with exactly one line: `EXPR: <expression>`,\n"
         "`RULE: <rule over option>` or `FAIL: <reason>` when the step cannot be executed from the variables.",
         "Step: {{step}}\nVariables available: {{bound}}"});
  r.add({"perturb.generate",
         "You write variants of a problem that keep its solution procedure unchanged. Kind of change: {{kind}}.\n"
         "Strength: {{regime}}. Reply with JSON only: {\"statement\": ..., \"bindings\": {<given variable>: <new\n"
         "value>}, \"answer\": <value or label>, \"choices\": [{\"label\": ..., \"text\": ...}] (choice tasks)}.",
         "Problem:\n{{problem}}\n{{choices}}\nReference procedure:\n{{reference}}\nVariant #{{index}} "
         "(attempt {{attempt}})."});
  r.add({"judge.equivalent",
         "Decide whether two reasoning steps perform the same operation on the same quantities. Reply YES or NO.",
         "Step A: {{first}}\nStep B: {{second}}"});
  r.add({"predict.success",
         "You estimate how likely a solver is to answer a problem correctly, given a graph of reasoning steps that\n"
         "worked on similar problems (node weight = reliability) and the solver's own trace. Reply with one line\n"
         "`PROBABILITY: <number between 0 and 1>`.",
         "Problem:\n{{problem}}\nStep graph:\n{{dag}}\nSolver trace:\n{{trace}}"});
  r.add({"failures.discover",
         "Compare an incorrect solution with the reference procedure, find where they diverge, and name the\n"
         "structural condition of the problem that caused the divergence. Reply with JSON only:\n"
         "{\"candidates\": [{\"name\": ..., \"description\": ..., \"error_type\": ..., \"complexity\": ...,\n"
         "\"keywords\": [...]}]}.",
         "Problem:\n{{problem}}\nIncorrect trace:\n{{trace}}\nReference procedure:\n{{reference}}"});
  r.add({"failures.detect",
         "Decide whether a problem and its solution trace exhibit the given condition. Reply YES or NO.",
         "Condition: {{mode}} ({{mode_description}})\nProblem:\n{{problem}}\nTrace:\n{{trace}}"});
  r.add({"failures.intervene",
         "Rewrite a problem so that it {{action}}s the given condition while keeping the reference procedure\n"
         "applicable. Reply with JSON only: {\"statement\": ..., \"bindings\": {<given variable>: <value>}} or\n"
         "{\"infeasible\": true}.",
         "Condition: {{mode}} ({{mode_description}})\nProblem:\n{{problem}}\nReference procedure:\n{{reference}}"});
  return r;
}

}  // namespace

const TemplateRegistry& TemplateRegistry::builtin() {
  static const TemplateRegistry registry = make_builtin();
  return registry;
}

}  // namespace truex
