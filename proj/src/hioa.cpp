#include "secgame/hioa.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "secgame/errors.hpp"

namespace secgame {

bool value_equal(const Value& a, const Value& b) {
    if (a.index() != b.index())
        return false;
    if (std::holds_alternative<double>(a))
        return std::get<double>(a) == std::get<double>(b);
    if (std::holds_alternative<bool>(a))
        return std::get<bool>(a) == std::get<bool>(b);
    const auto& va = std::get<Eigen::VectorXd>(a);
    const auto& vb = std::get<Eigen::VectorXd>(b);
    return va.size() == vb.size() && (va.array() == vb.array()).all();
}

bool valuation_equal(const Valuation& a, const Valuation& b) {
    if (a.size() != b.size())
        return false;
    auto ia = a.begin();
    auto ib = b.begin();
    for (; ia != a.end(); ++ia, ++ib)
        if (ia->first != ib->first || !value_equal(ia->second, ib->second))
            return false;
    return true;
}

namespace {

const Value& lookup(const Valuation& state, const Valuation& inputs,
                    const std::string& name) {
    auto it = state.find(name);
    if (it != state.end())
        return it->second;
    it = inputs.find(name);
    if (it != inputs.end())
        return it->second;
    throw ValidationError("UnknownVariable", "no variable '" + name + "'");
}

double as_real(const Value& v, const std::string& name) {
    if (!std::holds_alternative<double>(v))
        throw ValidationError("TypeError", "variable '" + name + "' is not a real");
    return std::get<double>(v);
}

bool as_bool(const Value& v, const std::string& name) {
    if (!std::holds_alternative<bool>(v))
        throw ValidationError("TypeError", "variable '" + name + "' is not a boolean");
    return std::get<bool>(v);
}

const Eigen::VectorXd& as_vector(const Value& v, const std::string& name) {
    if (!std::holds_alternative<Eigen::VectorXd>(v))
        throw ValidationError("TypeError", "variable '" + name + "' is not a vector");
    return std::get<Eigen::VectorXd>(v);
}

} // namespace

double get_real(const Valuation& v, const std::string& name) {
    return as_real(lookup(v, {}, name), name);
}

bool get_bool(const Valuation& v, const std::string& name) {
    return as_bool(lookup(v, {}, name), name);
}

const Eigen::VectorXd& get_vector(const Valuation& v, const std::string& name) {
    return as_vector(lookup(v, {}, name), name);
}

struct Guard::Node {
    enum class Kind {
        True,
        IsTrue,
        Compare,
        ApproxEq,
        ScalarDiffers,
        VectorGap,
        Not,
        And,
        Or,
    };

    Kind kind = Kind::True;
    std::string a;
    std::string b;
    double bound = 0.0;
    double tol = 0.0;
    Cmp op = Cmp::Ge;
    std::vector<Guard> children;
};

Guard Guard::always_true() { return Guard(std::make_shared<Node>()); }

Guard Guard::is_true(std::string var) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::IsTrue;
    n->a = std::move(var);
    return Guard(std::move(n));
}

Guard Guard::compare(std::string var, Cmp op, double bound) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Compare;
    n->a = std::move(var);
    n->op = op;
    n->bound = bound;
    return Guard(std::move(n));
}

Guard Guard::approx_equal(std::string var, double value, double tol) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::ApproxEq;
    n->a = std::move(var);
    n->bound = value;
    n->tol = tol;
    return Guard(std::move(n));
}

Guard Guard::scalar_differs(std::string a, std::string b) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::ScalarDiffers;
    n->a = std::move(a);
    n->b = std::move(b);
    return Guard(std::move(n));
}

Guard Guard::vector_gap_exceeds(std::string a, std::string b, double threshold) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::VectorGap;
    n->a = std::move(a);
    n->b = std::move(b);
    n->bound = threshold;
    return Guard(std::move(n));
}

Guard Guard::negate(Guard g) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Not;
    n->children.push_back(std::move(g));
    return Guard(std::move(n));
}

Guard Guard::all_of(std::vector<Guard> gs) {
    if (gs.empty())
        return always_true();
    if (gs.size() == 1)
        return gs.front();
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::And;
    n->children = std::move(gs);
    return Guard(std::move(n));
}

Guard Guard::any_of(std::vector<Guard> gs) {
    if (gs.size() == 1)
        return gs.front();
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Or;
    n->children = std::move(gs); // empty disjunction is constant false
    return Guard(std::move(n));
}

bool Guard::evaluate(const Valuation& state, const Valuation& inputs) const {
    const Node& n = *node_;
    switch (n.kind) {
    case Node::Kind::True:
        return true;
    case Node::Kind::IsTrue:
        return as_bool(lookup(state, inputs, n.a), n.a);
    case Node::Kind::Compare: {
        double v = as_real(lookup(state, inputs, n.a), n.a);
        switch (n.op) {
        case Cmp::Lt: return v < n.bound;
        case Cmp::Le: return v <= n.bound;
        case Cmp::Gt: return v > n.bound;
        case Cmp::Ge: return v >= n.bound;
        }
        return false;
    }
    case Node::Kind::ApproxEq: {
        double v = as_real(lookup(state, inputs, n.a), n.a);
        return std::abs(v - n.bound) <= n.tol;
    }
    case Node::Kind::ScalarDiffers: {
        double va = as_real(lookup(state, inputs, n.a), n.a);
        double vb = as_real(lookup(state, inputs, n.b), n.b);
        return va != vb;
    }
    case Node::Kind::VectorGap: {
        const Eigen::VectorXd& va = as_vector(lookup(state, inputs, n.a), n.a);
        const Eigen::VectorXd& vb = as_vector(lookup(state, inputs, n.b), n.b);
        if (va.size() != vb.size())
            throw ValidationError("TypeError", "vector sizes differ in guard over '" +
                                                   n.a + "' and '" + n.b + "'");
        if (va.size() == 0)
            return false;
        return (va - vb).lpNorm<Eigen::Infinity>() > n.bound;
    }
    case Node::Kind::Not:
        return !n.children[0].evaluate(state, inputs);
    case Node::Kind::And:
        for (const Guard& g : n.children)
            if (!g.evaluate(state, inputs))
                return false;
        return true;
    case Node::Kind::Or:
        for (const Guard& g : n.children)
            if (g.evaluate(state, inputs))
                return true;
        return false;
    }
    return false;
}

void Guard::referenced_variables(std::set<std::string>& out) const {
    const Node& n = *node_;
    if (!n.a.empty())
        out.insert(n.a);
    if (!n.b.empty())
        out.insert(n.b);
    for (const Guard& g : n.children)
        g.referenced_variables(out);
}

std::string Guard::text() const {
    const Node& n = *node_;
    std::ostringstream os;
    switch (n.kind) {
    case Node::Kind::True:
        return "true";
    case Node::Kind::IsTrue:
        return n.a;
    case Node::Kind::Compare: {
        const char* op = n.op == Cmp::Lt   ? "<"
                         : n.op == Cmp::Le ? "<="
                         : n.op == Cmp::Gt ? ">"
                                           : ">=";
        os << n.a << " " << op << " " << n.bound;
        return os.str();
    }
    case Node::Kind::ApproxEq:
        os << "|" << n.a << " - " << n.bound << "| <= " << n.tol;
        return os.str();
    case Node::Kind::ScalarDiffers:
        return n.a + " != " + n.b;
    case Node::Kind::VectorGap:
        os << "||" << n.a << " - " << n.b << "||inf > " << n.bound;
        return os.str();
    case Node::Kind::Not:
        return "!(" + n.children[0].text() + ")";
    case Node::Kind::And:
    case Node::Kind::Or: {
        const char* join = n.kind == Node::Kind::And ? " && " : " || ";
        os << "(";
        for (std::size_t i = 0; i < n.children.size(); ++i) {
            if (i)
                os << join;
            os << n.children[i].text();
        }
        os << ")";
        return os.str();
    }
    }
    return "?";
}

const VariableDecl* HioaSignature::find_variable(const std::string& n) const {
    for (const VariableDecl& v : variables)
        if (v.name == n)
            return &v;
    return nullptr;
}

std::vector<const VariableDecl*> HioaSignature::input_variables() const {
    std::vector<const VariableDecl*> out;
    for (const VariableDecl& v : variables)
        if (v.kind == VariableDecl::Kind::Input)
            out.push_back(&v);
    return out;
}

std::vector<const VariableDecl*> HioaSignature::state_variables() const {
    std::vector<const VariableDecl*> out;
    for (const VariableDecl& v : variables)
        if (v.is_state())
            out.push_back(&v);
    return out;
}

std::vector<const VariableDecl*> HioaSignature::output_variables() const {
    std::vector<const VariableDecl*> out;
    for (const VariableDecl& v : variables)
        if (v.kind == VariableDecl::Kind::Output)
            out.push_back(&v);
    return out;
}

bool HioaSignature::has_mode(const std::string& m) const {
    return std::find(modes.begin(), modes.end(), m) != modes.end();
}

namespace {

bool value_matches_decl(const VariableDecl& decl, const Value& v) {
    switch (decl.type) {
    case VariableDecl::Type::Real:
    case VariableDecl::Type::Timer:
        return std::holds_alternative<double>(v);
    case VariableDecl::Type::Boolean:
        return std::holds_alternative<bool>(v);
    case VariableDecl::Type::RealVector:
        return std::holds_alternative<Eigen::VectorXd>(v) &&
               std::get<Eigen::VectorXd>(v).size() == decl.dim;
    }
    return false;
}

void check_state_valuation(const HioaSignature& sig, const Valuation& state,
                           const std::string& context) {
    std::size_t expected = 0;
    for (const VariableDecl& decl : sig.variables) {
        if (!decl.is_state())
            continue;
        ++expected;
        auto it = state.find(decl.name);
        if (it == state.end())
            throw ValidationError("TypeError", context + ": state variable '" +
                                                   decl.name + "' is missing");
        if (!value_matches_decl(decl, it->second))
            throw ValidationError("TypeError", context + ": state variable '" +
                                                   decl.name + "' has the wrong type");
    }
    if (state.size() != expected)
        throw ValidationError("TypeError",
                              context + ": state valuation carries undeclared variables");
}

void check_input_valuation(const HioaSignature& sig, const Valuation& inputs) {
    for (const VariableDecl& decl : sig.variables) {
        if (decl.kind != VariableDecl::Kind::Input)
            continue;
        auto it = inputs.find(decl.name);
        if (it == inputs.end())
            throw ValidationError("TypeError",
                                  "input variable '" + decl.name + "' is missing");
        if (!value_matches_decl(decl, it->second))
            throw ValidationError("TypeError", "input variable '" + decl.name +
                                                   "' has the wrong type");
    }
}

Valuation restrict_to(const Valuation& v, const std::set<std::string>& names) {
    Valuation out;
    for (const std::string& n : names) {
        auto it = v.find(n);
        if (it != v.end())
            out.emplace(it->first, it->second);
    }
    return out;
}

} // namespace

void validate_signature(const HioaSignature& sig) {
    if (sig.modes.empty())
        throw ValidationError("InvalidSignature", sig.name + ": no modes");
    std::set<std::string> mode_set;
    for (const std::string& m : sig.modes) {
        if (m.empty())
            throw ValidationError("InvalidSignature", sig.name + ": empty mode name");
        if (!mode_set.insert(m).second)
            throw ValidationError("DuplicateMode",
                                  sig.name + ": duplicate mode '" + m + "'");
    }
    std::set<std::string> var_names;
    for (const VariableDecl& v : sig.variables) {
        if (v.name.empty())
            throw ValidationError("InvalidSignature", sig.name + ": empty variable name");
        if (!var_names.insert(v.name).second)
            throw ValidationError("DuplicateVariable",
                                  sig.name + ": duplicate variable '" + v.name + "'");
        if (v.type == VariableDecl::Type::RealVector && v.dim < 0)
            throw ValidationError("InvalidSignature",
                                  sig.name + ": variable '" + v.name +
                                      "' has a negative dimension");
        if (v.monitor && v.kind != VariableDecl::Kind::Output)
            throw ValidationError("InvalidSignature",
                                  sig.name + ": non-output variable '" + v.name +
                                      "' is flagged monitor");
    }
    for (const Transition& t : sig.transitions) {
        if (!mode_set.count(t.from) || !mode_set.count(t.to))
            throw ValidationError("UnknownMode",
                                  sig.name + ": transition " + t.from + "->" + t.to +
                                      " references an undeclared mode");
        if (!sig.resets.count(t.reset))
            throw ValidationError("UnknownReset",
                                  sig.name + ": transition " + t.from + "->" + t.to +
                                      " references missing reset '" + t.reset + "'");
        std::set<std::string> refs;
        t.guard.referenced_variables(refs);
        for (const std::string& r : refs)
            if (!var_names.count(r))
                throw ValidationError("UnknownVariable",
                                      sig.name + ": guard on " + t.from + "->" + t.to +
                                          " references undeclared variable '" + r + "'");
    }
    if (sig.initials.empty())
        throw ValidationError("InvalidSignature", sig.name + ": no initial state");
    for (const auto& [mode, valuation] : sig.initials) {
        if (!mode_set.count(mode))
            throw ValidationError("UnknownMode",
                                  sig.name + ": initial mode '" + mode +
                                      "' is not declared");
        check_state_valuation(sig, valuation, sig.name + ": initial valuation");
    }
    for (const auto& [mode, update] : sig.mode_update) {
        if (!mode_set.count(mode))
            throw ValidationError("UnknownMode",
                                  sig.name + ": update registered for unknown mode '" +
                                      mode + "'");
        if (!sig.updates.count(update))
            throw ValidationError("UnknownUpdate",
                                  sig.name + ": mode '" + mode +
                                      "' references missing update '" + update + "'");
    }
}

Guard mode_invariant(const HioaSignature& sig, const std::string& mode) {
    if (!sig.has_mode(mode))
        throw ValidationError("UnknownMode", sig.name + ": no mode '" + mode + "'");
    std::vector<Guard> negated;
    for (const Transition& t : sig.transitions)
        if (t.from == mode)
            negated.push_back(Guard::negate(t.guard));
    // No outgoing transition: the mode may hold forever.
    return Guard::all_of(std::move(negated));
}

CompatibilityVerdict check_compatibility(const HioaSignature& a,
                                         const HioaSignature& b) {
    CompatibilityVerdict verdict;
    auto violate = [&](const std::string& clause, const std::string& detail) {
        verdict.compatible = false;
        verdict.violations.push_back(clause + ": " + detail);
    };

    std::set<std::string> state_a, state_b;
    for (const auto* v : a.state_variables())
        state_a.insert(v->name);
    for (const auto* v : b.state_variables())
        state_b.insert(v->name);
    for (const std::string& n : state_a)
        if (state_b.count(n))
            violate("X1∩X2", "shared state variable '" + n + "'");

    std::set<std::string> out_a, out_b;
    for (const auto* v : a.output_variables())
        out_a.insert(v->name);
    for (const auto* v : b.output_variables())
        out_b.insert(v->name);
    for (const std::string& n : out_a)
        if (out_b.count(n))
            violate("Y1∩Y2", "shared output variable '" + n + "'");

    // Wired (non-monitor) outputs must land on a matching peer input.
    auto check_wiring = [&](const HioaSignature& from, const HioaSignature& to,
                            const std::string& clause) {
        for (const auto* out : from.output_variables()) {
            if (out->monitor)
                continue;
            const VariableDecl* in = to.find_variable(out->name);
            if (!in || in->kind != VariableDecl::Kind::Input) {
                violate(clause, "output '" + out->name + "' of " + from.name +
                                    " is not an input of " + to.name);
                continue;
            }
            if (in->type != out->type || in->dim != out->dim)
                violate(clause, "output '" + out->name +
                                    "' is wired to an input of a different type");
        }
    };
    check_wiring(a, b, "Y1⊆U2");
    check_wiring(b, a, "Y2⊆U1");
    return verdict;
}

namespace {

std::set<std::string> wired_outputs(const HioaSignature& from, const HioaSignature& to) {
    std::set<std::string> wired;
    for (const auto* out : from.output_variables()) {
        if (out->monitor)
            continue;
        const VariableDecl* in = to.find_variable(out->name);
        if (in && in->kind == VariableDecl::Kind::Input)
            wired.insert(out->name);
    }
    return wired;
}

// Assemble one side's input valuation inside the product: wired inputs read
// the peer's output variable from the merged state, the rest pass through.
Valuation side_inputs(const std::vector<const VariableDecl*>& declared_inputs,
                      const std::set<std::string>& wired, const Valuation& state,
                      const Valuation& external) {
    Valuation out;
    for (const auto* in : declared_inputs) {
        if (wired.count(in->name)) {
            auto it = state.find(in->name);
            if (it == state.end())
                throw ValidationError("TypeError",
                                      "wired input '" + in->name + "' missing from state");
            out.emplace(in->name, it->second);
        } else {
            auto it = external.find(in->name);
            if (it == external.end())
                throw ValidationError("TypeError",
                                      "input '" + in->name + "' missing");
            out.emplace(in->name, it->second);
        }
    }
    return out;
}

} // namespace

HioaSignature compose(const HioaSignature& a, const HioaSignature& b) {
    CompatibilityVerdict verdict = check_compatibility(a, b);
    if (!verdict.compatible) {
        std::string detail;
        for (const std::string& v : verdict.violations) {
            if (!detail.empty())
                detail += "; ";
            detail += v;
        }
        throw Error("Incompatible", detail);
    }

    const std::set<std::string> wired_a = wired_outputs(a, b); // a's outputs into b
    const std::set<std::string> wired_b = wired_outputs(b, a);

    HioaSignature c;
    c.name = a.name + "||" + b.name;
    c.stutter_complete = a.stutter_complete && b.stutter_complete;

    for (const std::string& ma : a.modes)
        for (const std::string& mb : b.modes)
            c.modes.push_back(ma + "|" + mb);

    std::set<std::string> external; // input names that stay external
    for (const HioaSignature* side : {&a, &b}) {
        const std::set<std::string>& absorbed = side == &a ? wired_b : wired_a;
        for (const VariableDecl& v : side->variables) {
            if (v.kind == VariableDecl::Kind::Input) {
                if (!absorbed.count(v.name) && external.insert(v.name).second)
                    c.variables.push_back(v);
            } else {
                c.variables.push_back(v);
            }
        }
    }

    std::set<std::string> state_a, state_b;
    for (const auto* v : a.state_variables())
        state_a.insert(v->name);
    for (const auto* v : b.state_variables())
        state_b.insert(v->name);

    auto a_inputs = std::make_shared<std::vector<VariableDecl>>();
    auto b_inputs = std::make_shared<std::vector<VariableDecl>>();
    for (const auto* v : a.input_variables())
        a_inputs->push_back(*v);
    for (const auto* v : b.input_variables())
        b_inputs->push_back(*v);
    auto input_ptrs = [](const std::vector<VariableDecl>& decls) {
        std::vector<const VariableDecl*> out;
        for (const VariableDecl& d : decls)
            out.push_back(&d);
        return out;
    };

    // Lift one side's state map (reset or update) to the product: slice, run,
    // merge back over the untouched peer state.
    auto lift = [=](UpdateFn fn, std::set<std::string> own_state,
                    std::shared_ptr<std::vector<VariableDecl>> own_inputs,
                    std::set<std::string> own_wired) {
        return [=](const Valuation& state, const Valuation& external_in) {
            Valuation slice = restrict_to(state, own_state);
            Valuation ins =
                side_inputs(input_ptrs(*own_inputs), own_wired, state, external_in);
            Valuation updated = fn(slice, ins);
            Valuation merged = state;
            for (auto& [k, v] : updated)
                merged[k] = v;
            return merged;
        };
    };

    for (const auto& [name, fn] : a.resets)
        c.resets.emplace(a.name + "/" + name, lift(fn, state_a, a_inputs, wired_b));
    for (const auto& [name, fn] : b.resets)
        c.resets.emplace(b.name + "/" + name, lift(fn, state_b, b_inputs, wired_a));

    // Interleaved discrete transitions: one side fires, the other stutters.
    for (const Transition& t : a.transitions)
        for (const std::string& mb : b.modes)
            c.transitions.push_back({t.from + "|" + mb, t.guard,
                                     a.name + "/" + t.reset, t.to + "|" + mb});
    for (const Transition& t : b.transitions)
        for (const std::string& ma : a.modes)
            c.transitions.push_back({ma + "|" + t.from, t.guard,
                                     b.name + "/" + t.reset, ma + "|" + t.to});

    // Trajectories synchronize: the product update applies both sides' mode
    // updates against the pre-step merged valuation.
    for (const std::string& ma : a.modes) {
        for (const std::string& mb : b.modes) {
            auto ua = a.mode_update.find(ma);
            auto ub = b.mode_update.find(mb);
            if (ua == a.mode_update.end() || ub == b.mode_update.end())
                continue;
            UpdateFn fa = lift(a.updates.at(ua->second), state_a, a_inputs, wired_b);
            UpdateFn fb = lift(b.updates.at(ub->second), state_b, b_inputs, wired_a);
            std::string name = "step(" + ma + "|" + mb + ")";
            c.updates.emplace(
                name, [fa, fb, state_b](const Valuation& state, const Valuation& in) {
                    Valuation after_a = fa(state, in);
                    Valuation after_b = fb(state, in);
                    // Both sides read the pre-step state; keep only b's own
                    // slice of the second result so a's writes survive.
                    for (const std::string& k : state_b)
                        after_a[k] = after_b.at(k);
                    return after_a;
                });
            c.mode_update.emplace(ma + "|" + mb, name);
        }
    }

    for (const auto& [ma, va] : a.initials)
        for (const auto& [mb, vb] : b.initials) {
            Valuation merged = va;
            for (const auto& [k, v] : vb)
                merged.emplace(k, v);
            c.initials.emplace_back(ma + "|" + mb, std::move(merged));
        }

    OutputFn out_a = a.output_fn;
    OutputFn out_b = b.output_fn;
    auto default_outputs = [](const HioaSignature& sig, const Valuation& state) {
        Valuation out;
        for (const auto* v : sig.output_variables()) {
            auto it = state.find(v->name);
            if (it != state.end())
                out.emplace(it->first, it->second);
        }
        return out;
    };
    HioaSignature sig_a = a; // copies for the closure's default-output path
    HioaSignature sig_b = b;
    c.output_fn = [=](const std::string& mode, const Valuation& state,
                      const Valuation& external_in) {
        auto bar = mode.find('|');
        std::string ma = mode.substr(0, bar);
        std::string mb = bar == std::string::npos ? "" : mode.substr(bar + 1);
        Valuation slice_a = restrict_to(state, state_a);
        Valuation slice_b = restrict_to(state, state_b);
        Valuation outs;
        if (out_a) {
            Valuation ins =
                side_inputs(input_ptrs(*a_inputs), wired_b, state, external_in);
            outs = out_a(ma, slice_a, ins);
        } else {
            outs = default_outputs(sig_a, slice_a);
        }
        Valuation outs_b;
        if (out_b) {
            Valuation ins =
                side_inputs(input_ptrs(*b_inputs), wired_a, state, external_in);
            outs_b = out_b(mb, slice_b, ins);
        } else {
            outs_b = default_outputs(sig_b, slice_b);
        }
        for (auto& [k, v] : outs_b)
            outs.emplace(k, v);
        return outs;
    };

    validate_signature(c);
    return c;
}

E1Verdict check_input_transition_enabled(const HioaSignature& sig,
                                         const std::vector<std::string>& events) {
    E1Verdict verdict;
    for (const std::string& mode : sig.modes) {
        for (const std::string& event : events) {
            bool covered = false;
            for (const Transition& t : sig.transitions) {
                if (t.from != mode)
                    continue;
                std::set<std::string> refs;
                t.guard.referenced_variables(refs);
                if (refs.count(event)) {
                    covered = true;
                    break;
                }
            }
            if (!covered)
                verdict.gaps.emplace_back(mode, event);
        }
    }
    verdict.enabled = verdict.gaps.empty() || sig.stutter_complete;
    return verdict;
}

StepResult step(const HioaSignature& sig, const std::string& mode,
                const Valuation& state, const Valuation& inputs) {
    if (!sig.has_mode(mode))
        throw ValidationError("UnknownMode", sig.name + ": no mode '" + mode + "'");
    check_state_valuation(sig, state, sig.name);
    check_input_valuation(sig, inputs);

    StepResult result;
    bool fired = false;
    for (std::size_t i = 0; i < sig.transitions.size(); ++i) {
        const Transition& t = sig.transitions[i];
        if (t.from != mode)
            continue;
        if (!t.guard.evaluate(state, inputs))
            continue;
        result.mode = t.to;
        result.state = sig.resets.at(t.reset)(state, inputs);
        result.fired_transition = i;
        fired = true;
        break;
    }
    if (!fired) {
        auto it = sig.mode_update.find(mode);
        if (it == sig.mode_update.end())
            throw Error("UndefinedUpdate",
                        sig.name + ": mode '" + mode + "' has no update");
        result.mode = mode;
        result.state = sig.updates.at(it->second)(state, inputs);
    }
    check_state_valuation(sig, result.state, sig.name + ": post-step");

    if (sig.output_fn) {
        result.outputs = sig.output_fn(result.mode, result.state, inputs);
    } else {
        for (const auto* v : sig.output_variables()) {
            auto it = result.state.find(v->name);
            if (it != result.state.end())
                result.outputs.emplace(it->first, it->second);
        }
    }
    return result;
}

} // namespace secgame
