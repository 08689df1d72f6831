#pragma once

#include <Eigen/Core>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace secgame {

// A variable's current value. Timers are plain reals.
using Value = std::variant<double, bool, Eigen::VectorXd>;
// Variable name -> value.
using Valuation = std::map<std::string, Value>;

bool value_equal(const Value& a, const Value& b);
bool valuation_equal(const Valuation& a, const Valuation& b);

// Typed lookups; throw ValidationError "UnknownVariable" / "TypeError".
double get_real(const Valuation& v, const std::string& name);
bool get_bool(const Valuation& v, const std::string& name);
const Eigen::VectorXd& get_vector(const Valuation& v, const std::string& name);

struct VariableDecl {
    enum class Kind { Input, Internal, Output };
    enum class Type { Real, RealVector, Boolean, Timer };

    std::string name;
    Kind kind = Kind::Internal;
    Type type = Type::Real;
    int dim = 1;          // RealVector length
    bool monitor = false; // outputs only: observable but never wired

    bool is_state() const { return kind != Kind::Input; }
};

// Small boolean expression over a (state, input) valuation pair: comparisons,
// connectives, an approximate-equality test for timers, and an infinity-norm
// gap test for vector pairs. Immutable; cheap to copy (shared nodes).
class Guard {
public:
    enum class Cmp { Lt, Le, Gt, Ge };

    static Guard always_true();
    static Guard is_true(std::string var);                    // boolean variable
    static Guard compare(std::string var, Cmp op, double bound);
    static Guard approx_equal(std::string var, double value, double tol);
    static Guard scalar_differs(std::string a, std::string b); // reals, exact !=
    // ||a - b||_inf > threshold over two vector variables.
    static Guard vector_gap_exceeds(std::string a, std::string b, double threshold);
    static Guard negate(Guard g);
    static Guard all_of(std::vector<Guard> gs);
    static Guard any_of(std::vector<Guard> gs);

    // Name lookup tries the state valuation first, then the inputs.
    bool evaluate(const Valuation& state, const Valuation& inputs) const;
    void referenced_variables(std::set<std::string>& out) const;
    std::string text() const;

private:
    struct Node;
    explicit Guard(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

struct Transition {
    std::string from;
    Guard guard = Guard::always_true();
    std::string reset; // name into HioaSignature::resets
    std::string to;
};

// Pure state map: (state, inputs) -> new state.
using UpdateFn = std::function<Valuation(const Valuation&, const Valuation&)>;
// (mode, state, inputs) -> output valuation.
using OutputFn =
    std::function<Valuation(const std::string&, const Valuation&, const Valuation&)>;

// Declarative automaton skeleton plus the named update behaviors it references.
// Mode invariants are derived (mode_invariant below), never stored. Every
// output variable is also a state variable; trajectories hold state between
// samples, so the per-mode behavior is fully captured by the discrete update.
struct HioaSignature {
    std::string name;
    std::vector<std::string> modes;
    std::vector<VariableDecl> variables;
    std::vector<Transition> transitions; // declaration order = firing priority
    std::vector<std::pair<std::string, Valuation>> initials;
    std::map<std::string, std::string> mode_update; // mode -> update name
    std::map<std::string, UpdateFn> updates;
    std::map<std::string, UpdateFn> resets;
    OutputFn output_fn; // null: restrict the state to the output variables
    // When true, every (mode, input event) pair without an explicit transition
    // is treated as an implicit self-loop with identity reset.
    bool stutter_complete = true;

    const VariableDecl* find_variable(const std::string& n) const;
    std::vector<const VariableDecl*> input_variables() const;
    std::vector<const VariableDecl*> state_variables() const;
    std::vector<const VariableDecl*> output_variables() const;
    bool has_mode(const std::string& m) const;
};

// Structural validation: unique nonempty modes/variables, transitions that
// reference declared modes/resets/variables, initial modes and valuations
// that type-check, update names that resolve. Throws ValidationError.
void validate_signature(const HioaSignature& sig);

// Conjunction of the negated outgoing guards: false exactly when some guard
// fires, constant true for modes with no outgoing transition. Throws
// ValidationError "UnknownMode".
Guard mode_invariant(const HioaSignature& sig, const std::string& mode);

struct CompatibilityVerdict {
    bool compatible = true;
    // Each entry names the violated clause, e.g. "X1∩X2: tau_shared".
    std::vector<std::string> violations;
};

// Pairwise composability: disjoint state spaces, disjoint outputs, and every
// wired (non-monitor) output consumed by the peer with a matching type.
// Monitor outputs are exempt from the wiring clauses.
CompatibilityVerdict check_compatibility(const HioaSignature& a,
                                         const HioaSignature& b);

// Binary product automaton: pair modes, union variables with each side's
// wired outputs feeding the peer's matching inputs (which leave the external
// input set), interleaved discrete transitions (the other side stutters), and
// synchronized updates. Wired inputs read the peer's output variable from the
// merged state; reporting semantics (output maps) stay per side. Throws
// Error "Incompatible" with the violated clauses.
HioaSignature compose(const HioaSignature& a, const HioaSignature& b);

struct E1Verdict {
    bool enabled = true;
    // (mode, input event) pairs with no explicit transition whose guard
    // mentions the event, i.e. pairs relying on stutter completion.
    std::vector<std::pair<std::string, std::string>> gaps;
};

// Input-enabledness over the given event alphabet (input variable names):
// after stutter completion every pair is covered; without it any gap fails.
// An empty alphabet is vacuously enabled.
E1Verdict check_input_transition_enabled(const HioaSignature& sig,
                                         const std::vector<std::string>& events);

struct StepResult {
    std::string mode;
    Valuation state;
    Valuation outputs;
    // Index into HioaSignature::transitions when a guard fired this step.
    std::optional<std::size_t> fired_transition;
};

// One sampled step: evaluate the mode's outgoing guards in declaration order;
// the first satisfied guard takes its transition (reset applies), otherwise
// the mode's discrete update runs. Outputs are computed last. Throws
// ValidationError "TypeError" on valuation mismatches, "UnknownMode", and
// Error "UndefinedUpdate" when the mode has no registered update.
StepResult step(const HioaSignature& sig, const std::string& mode,
                const Valuation& state, const Valuation& inputs);

} // namespace secgame
