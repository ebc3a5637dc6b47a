#pragma once

// Runs the nested if/else functions produced by emit_source without a compiler.
// Understands exactly the statement forms the emitter writes and throws on
// anything else, so a formatting drift shows up as a failure, not a guess.

#include <cstdlib>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace interp {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

class Program {
public:
    explicit Program(const std::string& source)
    {
        std::istringstream in(source);
        std::string line;
        while (std::getline(in, line)) {
            line = trim(line);
            if (!line.empty()) {
                lines_.push_back(line);
            }
        }
        if (lines_.size() < 3) {
            throw std::runtime_error("too short");
        }
        parse_signature(lines_[0]);
        if (lines_[1] != "{" || lines_.back() != "}") {
            throw std::runtime_error("missing body braces");
        }
        std::size_t pos = 2;
        while (lines_[pos].rfind("(void)", 0) == 0) {
            ++pos;
        }
        root_ = parse_stmt(pos);
        if (pos != lines_.size() - 1) {
            throw std::runtime_error("trailing statements");
        }
    }

    const std::vector<std::string>& params() const { return params_; }

    int run(std::span<const double> args) const
    {
        if (args.size() != params_.size()) {
            throw std::invalid_argument("arity");
        }
        std::map<std::string, double> env;
        for (std::size_t i = 0; i < args.size(); ++i) {
            env[params_[i]] = args[i];
        }
        const Stmt* s = root_.get();
        while (!s->is_return) {
            s = env.at(s->var) <= s->threshold ? s->then.get() : s->otherwise.get();
        }
        return s->value;
    }

private:
    struct Stmt {
        bool is_return = false;
        int value = 0;
        std::string var;
        double threshold = 0.0;
        std::unique_ptr<Stmt> then, otherwise;
    };

    void parse_signature(const std::string& sig)
    {
        const auto open = sig.find('(');
        const auto close = sig.rfind(')');
        if (open == std::string::npos || close == std::string::npos || sig.find(" int ") == std::string::npos) {
            throw std::runtime_error("bad signature: " + sig);
        }
        std::string list = sig.substr(open + 1, close - open - 1);
        if (list.empty() || list == "void") {
            return;
        }
        std::istringstream in(list);
        std::string part;
        while (std::getline(in, part, ',')) {
            part = trim(part);
            if (part.rfind("double ", 0) != 0) {
                throw std::runtime_error("bad parameter: " + part);
            }
            params_.push_back(trim(part.substr(7)));
        }
    }

    std::unique_ptr<Stmt> parse_stmt(std::size_t& pos)
    {
        const std::string& l = lines_.at(pos);
        auto s = std::make_unique<Stmt>();
        if (l.rfind("return ", 0) == 0 && l.back() == ';') {
            s->is_return = true;
            s->value = std::stoi(l.substr(7, l.size() - 8));
            ++pos;
            return s;
        }
        const std::string head = "if (";
        const std::string tail = ") {";
        if (l.rfind(head, 0) != 0 || l.size() < head.size() + tail.size() ||
            l.compare(l.size() - tail.size(), tail.size(), tail) != 0) {
            throw std::runtime_error("unexpected statement: " + l);
        }
        const std::string cond = l.substr(head.size(), l.size() - head.size() - tail.size());
        const auto op = cond.find(" <= ");
        if (op == std::string::npos) {
            throw std::runtime_error("bad condition: " + cond);
        }
        s->var = cond.substr(0, op);
        const std::string num = cond.substr(op + 4);
        char* end = nullptr;
        s->threshold = std::strtod(num.c_str(), &end);
        if (end != num.c_str() + num.size()) {
            throw std::runtime_error("bad number: " + num);
        }
        ++pos;
        s->then = parse_stmt(pos);
        if (lines_.at(pos) != "} else {") {
            throw std::runtime_error("expected else at: " + lines_.at(pos));
        }
        ++pos;
        s->otherwise = parse_stmt(pos);
        if (lines_.at(pos) != "}") {
            throw std::runtime_error("expected close at: " + lines_.at(pos));
        }
        ++pos;
        return s;
    }

    std::vector<std::string> lines_;
    std::vector<std::string> params_;
    std::unique_ptr<Stmt> root_;
};

} // namespace interp
