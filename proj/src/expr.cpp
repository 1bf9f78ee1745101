#include "cpagain/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace cpagain {

namespace {
ExprPtr make(Expr e) { return std::make_shared<const Expr>(std::move(e)); }

bool is_const(const ExprPtr& e, double v) {
  return e->kind == Expr::Kind::Constant && e->value == v;
}
}  // namespace

ExprPtr constant(double v) {
  Expr e;
  e.kind = Expr::Kind::Constant;
  e.value = v;
  return make(e);
}

ExprPtr variable(int index) {
  if (index < 0) throw std::invalid_argument("variable index must be >= 0");
  Expr e;
  e.kind = Expr::Kind::Variable;
  e.var = index;
  return make(e);
}

ExprPtr unary(UnaryOp op, ExprPtr a) {
  if (a->kind == Expr::Kind::Constant) {
    double v = a->value;
    switch (op) {
      case UnaryOp::Neg: return constant(-v);
      case UnaryOp::Sin: return constant(std::sin(v));
      case UnaryOp::Cos: return constant(std::cos(v));
      case UnaryOp::Exp: return constant(std::exp(v));
      case UnaryOp::Tanh: return constant(std::tanh(v));
      case UnaryOp::Sqrt:
        if (v >= 0) return constant(std::sqrt(v));
        break;
      case UnaryOp::Abs: return constant(std::abs(v));
    }
  }
  Expr e;
  e.kind = Expr::Kind::Unary;
  e.uop = op;
  e.a = std::move(a);
  return make(e);
}

ExprPtr binary(BinaryOp op, ExprPtr a, ExprPtr b) {
  if (a->kind == Expr::Kind::Constant && b->kind == Expr::Kind::Constant) {
    switch (op) {
      case BinaryOp::Add: return constant(a->value + b->value);
      case BinaryOp::Sub: return constant(a->value - b->value);
      case BinaryOp::Mul: return constant(a->value * b->value);
      case BinaryOp::Div:
        if (b->value != 0) return constant(a->value / b->value);
        break;
    }
  }
  switch (op) {
    case BinaryOp::Add:
      if (is_const(a, 0)) return b;
      if (is_const(b, 0)) return a;
      break;
    case BinaryOp::Sub:
      if (is_const(b, 0)) return a;
      if (is_const(a, 0)) return unary(UnaryOp::Neg, b);
      break;
    case BinaryOp::Mul:
      if (is_const(a, 0) || is_const(b, 0)) return constant(0);
      if (is_const(a, 1)) return b;
      if (is_const(b, 1)) return a;
      break;
    case BinaryOp::Div:
      if (is_const(a, 0)) return constant(0);
      if (is_const(b, 1)) return a;
      break;
  }
  Expr e;
  e.kind = Expr::Kind::Binary;
  e.bop = op;
  e.a = std::move(a);
  e.b = std::move(b);
  return make(e);
}

ExprPtr power(ExprPtr a, int k) {
  if (k < 0) throw std::invalid_argument("exponent must be a nonnegative integer");
  if (k == 0) return constant(1);
  if (k == 1) return a;
  if (a->kind == Expr::Kind::Constant) return constant(std::pow(a->value, k));
  Expr e;
  e.kind = Expr::Kind::Power;
  e.a = std::move(a);
  e.exponent = k;
  return make(e);
}

// ---------------------------------------------------------------------------
// Parser: recursive descent over
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('-')? atom ('^' integer)?
//   atom   := number | ident | func '(' expr ')' | '(' expr ')'
// ---------------------------------------------------------------------------
namespace {

struct Parser {
  const std::string& s;
  size_t pos = 0;

  explicit Parser(const std::string& text) : s(text) {}

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }
  bool eat(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }

  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    while (true) {
      char c = peek();
      if (c == '+' || c == '-') {
        ++pos;
        ExprPtr rhs = parse_term();
        e = binary(c == '+' ? BinaryOp::Add : BinaryOp::Sub, e, rhs);
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_factor();
    while (true) {
      char c = peek();
      if (c == '*' || c == '/') {
        ++pos;
        ExprPtr rhs = parse_factor();
        e = binary(c == '*' ? BinaryOp::Mul : BinaryOp::Div, e, rhs);
      } else {
        return e;
      }
    }
  }

  ExprPtr parse_factor() {
    bool neg = eat('-');
    ExprPtr e = parse_atom();
    if (peek() == '^') {
      ++pos;
      e = power(e, parse_exponent());
    }
    return neg ? unary(UnaryOp::Neg, e) : e;
  }

  int parse_exponent() {
    skip_ws();
    size_t start = pos;
    if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start) throw ParseError("expected integer exponent", start);
    if (pos < s.size() && (s[pos] == '.' || s[pos] == 'e' || s[pos] == 'E'))
      throw ParseError("non-integer exponent", start);
    long k = std::strtol(s.c_str() + start, nullptr, 10);
    if (k < 0) throw ParseError("exponent must be a nonnegative integer", start);
    return static_cast<int>(k);
  }

  ExprPtr parse_atom() {
    char c = peek();
    size_t start = pos;
    if (c == '(') {
      ++pos;
      ExprPtr e = parse_expr();
      if (!eat(')')) throw ParseError("expected ')'", pos);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      char* end = nullptr;
      double v = std::strtod(s.c_str() + pos, &end);
      if (end == s.c_str() + pos) throw ParseError("malformed number", pos);
      pos = end - s.c_str();
      return constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      size_t id_start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
        ++pos;
      std::string id = s.substr(id_start, pos - id_start);
      static const std::map<std::string, UnaryOp> funcs = {
          {"sin", UnaryOp::Sin},   {"cos", UnaryOp::Cos}, {"exp", UnaryOp::Exp},
          {"tanh", UnaryOp::Tanh}, {"sqrt", UnaryOp::Sqrt}, {"abs", UnaryOp::Abs}};
      auto it = funcs.find(id);
      if (it != funcs.end()) {
        if (!eat('(')) throw ParseError("expected '(' after function name", pos);
        ExprPtr arg = parse_expr();
        if (!eat(')')) throw ParseError("expected ')'", pos);
        return unary(it->second, arg);
      }
      if (id.size() >= 2 && id[0] == 'x') {
        bool digits = true;
        for (size_t i = 1; i < id.size(); ++i)
          if (!std::isdigit(static_cast<unsigned char>(id[i]))) digits = false;
        if (digits) {
          long idx = std::strtol(id.c_str() + 1, nullptr, 10);
          if (idx >= 1) return variable(static_cast<int>(idx) - 1);
        }
      }
      throw ParseError("unknown identifier '" + id + "'", id_start);
    }
    throw ParseError("unexpected character", start);
  }
};

}  // namespace

ExprPtr parse(const std::string& text) {
  Parser p(text);
  ExprPtr e = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size()) throw ParseError("trailing input", p.pos);
  return e;
}

// ---------------------------------------------------------------------------
// Printing: parenthesizes so that print/parse round-trips structurally.
// ---------------------------------------------------------------------------
namespace {

const char* func_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Tanh: return "tanh";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Abs: return "abs";
    case UnaryOp::Neg: return "-";
  }
  return "?";
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// As an atom: wrapped in parens unless already atom-shaped.
std::string print_atom(const Expr& e) {
  if (e.kind == Expr::Kind::Variable) return "x" + std::to_string(e.var + 1);
  if (e.kind == Expr::Kind::Constant && e.value >= 0 && !std::signbit(e.value))
    return fmt_double(e.value);
  if (e.kind == Expr::Kind::Unary && e.uop != UnaryOp::Neg)
    return std::string(func_name(e.uop)) + "(" + print(*e.a) + ")";
  return "(" + print(e) + ")";
}

}  // namespace

std::string print(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Constant: return fmt_double(e.value);
    case Expr::Kind::Variable: return "x" + std::to_string(e.var + 1);
    case Expr::Kind::Unary:
      if (e.uop == UnaryOp::Neg) return "-" + print_atom(*e.a);
      return std::string(func_name(e.uop)) + "(" + print(*e.a) + ")";
    case Expr::Kind::Power:
      return print_atom(*e.a) + "^" + std::to_string(e.exponent);
    case Expr::Kind::Binary: {
      const char* op = e.bop == BinaryOp::Add ? " + "
                       : e.bop == BinaryOp::Sub ? " - "
                       : e.bop == BinaryOp::Mul ? "*" : "/";
      if (e.bop == BinaryOp::Add || e.bop == BinaryOp::Sub) {
        // rhs of +/- must be a term: wrap rhs additions.
        std::string lhs = print(*e.a);
        const Expr& r = *e.b;
        bool rhs_is_sum = r.kind == Expr::Kind::Binary &&
                          (r.bop == BinaryOp::Add || r.bop == BinaryOp::Sub);
        std::string rhs = rhs_is_sum ? "(" + print(r) + ")" : print(r);
        return lhs + op + rhs;
      }
      // * and / operate on factors.
      return print_atom(*e.a) + op + print_atom(*e.b);
    }
  }
  return "?";
}

double eval(const Expr& e, const Eigen::VectorXd& x) {
  switch (e.kind) {
    case Expr::Kind::Constant: return e.value;
    case Expr::Kind::Variable:
      if (e.var >= x.size()) throw std::out_of_range("variable index out of range");
      return x[e.var];
    case Expr::Kind::Power: return std::pow(eval(*e.a, x), e.exponent);
    case Expr::Kind::Unary: {
      double v = eval(*e.a, x);
      switch (e.uop) {
        case UnaryOp::Neg: return -v;
        case UnaryOp::Sin: return std::sin(v);
        case UnaryOp::Cos: return std::cos(v);
        case UnaryOp::Exp: return std::exp(v);
        case UnaryOp::Tanh: return std::tanh(v);
        case UnaryOp::Sqrt:
          if (v < 0) throw std::domain_error("sqrt of negative value");
          return std::sqrt(v);
        case UnaryOp::Abs: return std::abs(v);
      }
      break;
    }
    case Expr::Kind::Binary: {
      double a = eval(*e.a, x), b = eval(*e.b, x);
      switch (e.bop) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div:
          if (b == 0) throw std::domain_error("division by zero");
          return a / b;
      }
      break;
    }
  }
  throw std::logic_error("eval: unreachable");
}

ExprPtr differentiate(const Expr& e, int i) {
  switch (e.kind) {
    case Expr::Kind::Constant: return constant(0);
    case Expr::Kind::Variable: return constant(e.var == i ? 1 : 0);
    case Expr::Kind::Power: {
      ExprPtr da = differentiate(*e.a, i);
      return binary(BinaryOp::Mul,
                    binary(BinaryOp::Mul, constant(e.exponent),
                           power(e.a, e.exponent - 1)),
                    da);
    }
    case Expr::Kind::Unary: {
      ExprPtr da = differentiate(*e.a, i);
      switch (e.uop) {
        case UnaryOp::Neg: return unary(UnaryOp::Neg, da);
        case UnaryOp::Sin:
          return binary(BinaryOp::Mul, unary(UnaryOp::Cos, e.a), da);
        case UnaryOp::Cos:
          return binary(BinaryOp::Mul,
                        unary(UnaryOp::Neg, unary(UnaryOp::Sin, e.a)), da);
        case UnaryOp::Exp:
          return binary(BinaryOp::Mul, unary(UnaryOp::Exp, e.a), da);
        case UnaryOp::Tanh:
          return binary(BinaryOp::Mul,
                        binary(BinaryOp::Sub, constant(1),
                               power(unary(UnaryOp::Tanh, e.a), 2)),
                        da);
        case UnaryOp::Sqrt:
          return binary(BinaryOp::Div, da,
                        binary(BinaryOp::Mul, constant(2),
                               unary(UnaryOp::Sqrt, e.a)));
        case UnaryOp::Abs:
          // sign(a) * a' expressed as a/|a| * a'; undefined at a = 0.
          return binary(BinaryOp::Mul,
                        binary(BinaryOp::Div, e.a, unary(UnaryOp::Abs, e.a)),
                        da);
      }
      break;
    }
    case Expr::Kind::Binary: {
      ExprPtr da = differentiate(*e.a, i);
      ExprPtr db = differentiate(*e.b, i);
      switch (e.bop) {
        case BinaryOp::Add: return binary(BinaryOp::Add, da, db);
        case BinaryOp::Sub: return binary(BinaryOp::Sub, da, db);
        case BinaryOp::Mul:
          return binary(BinaryOp::Add, binary(BinaryOp::Mul, da, e.b),
                        binary(BinaryOp::Mul, e.a, db));
        case BinaryOp::Div:
          return binary(
              BinaryOp::Div,
              binary(BinaryOp::Sub, binary(BinaryOp::Mul, da, e.b),
                     binary(BinaryOp::Mul, e.a, db)),
              power(e.b, 2));
      }
      break;
    }
  }
  throw std::logic_error("differentiate: unreachable");
}

Interval interval_eval(const Expr& e, std::span<const Interval> box) {
  switch (e.kind) {
    case Expr::Kind::Constant: return Interval::point(e.value);
    case Expr::Kind::Variable:
      if (e.var >= static_cast<int>(box.size()))
        throw std::out_of_range("variable index out of range");
      return box[e.var];
    case Expr::Kind::Power: return pow_int(interval_eval(*e.a, box), e.exponent);
    case Expr::Kind::Unary: {
      Interval v = interval_eval(*e.a, box);
      switch (e.uop) {
        case UnaryOp::Neg: return -v;
        case UnaryOp::Sin: return sin(v);
        case UnaryOp::Cos: return cos(v);
        case UnaryOp::Exp: return exp(v);
        case UnaryOp::Tanh: return tanh(v);
        case UnaryOp::Sqrt: return sqrt(v);
        case UnaryOp::Abs: return abs(v);
      }
      break;
    }
    case Expr::Kind::Binary: {
      Interval a = interval_eval(*e.a, box);
      Interval b = interval_eval(*e.b, box);
      switch (e.bop) {
        case BinaryOp::Add: return a + b;
        case BinaryOp::Sub: return a - b;
        case BinaryOp::Mul: return a * b;
        case BinaryOp::Div: return a / b;
      }
      break;
    }
  }
  throw std::logic_error("interval_eval: unreachable");
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::Constant: return a.value == b.value;
    case Expr::Kind::Variable: return a.var == b.var;
    case Expr::Kind::Power:
      return a.exponent == b.exponent && structurally_equal(*a.a, *b.a);
    case Expr::Kind::Unary:
      return a.uop == b.uop && structurally_equal(*a.a, *b.a);
    case Expr::Kind::Binary:
      return a.bop == b.bop && structurally_equal(*a.a, *b.a) &&
             structurally_equal(*a.b, *b.b);
  }
  return false;
}

int max_variable_index(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Constant: return -1;
    case Expr::Kind::Variable: return e.var;
    case Expr::Kind::Power:
    case Expr::Kind::Unary: return max_variable_index(*e.a);
    case Expr::Kind::Binary:
      return std::max(max_variable_index(*e.a), max_variable_index(*e.b));
  }
  return -1;
}

// ---------------------------------------------------------------------------
// SystemSpec
// ---------------------------------------------------------------------------

Eigen::VectorXd SystemSpec::eval_f(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r[i] = eval(f[i], x);
  return r;
}

Eigen::MatrixXd SystemSpec::eval_G(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd r(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) r(i, j) = eval(G[i * m + j], x);
  return r;
}

Eigen::VectorXd SystemSpec::eval_h(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r(q);
  for (int i = 0; i < q; ++i) r[i] = eval(h[i], x);
  return r;
}

double SystemSpec::gbar(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd Gx = eval_G(x);
  Eigen::MatrixXd GG = Gx * Gx.transpose();
  return GG.cwiseAbs().rowwise().sum().maxCoeff();
}

void SystemSpec::linearization(Eigen::MatrixXd& A_out, Eigen::MatrixXd& B_out,
                               Eigen::MatrixXd& C_out) const {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  if (A && B && C) {
    A_out = *A;
    B_out = *B;
    C_out = *C;
    return;
  }
  A_out.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A_out(i, j) = eval(differentiate(f[i], j), zero);
  B_out = eval_G(zero);
  C_out.resize(q, n);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < n; ++j) C_out(i, j) = eval(differentiate(h[i], j), zero);
}

void check_system(const SystemSpec& sys) {
  if (sys.n <= 0 || sys.m <= 0 || sys.q <= 0)
    throw std::runtime_error("system: n, m, q must be positive");
  if (static_cast<int>(sys.f.size()) != sys.n ||
      static_cast<int>(sys.G.size()) != sys.n * sys.m ||
      static_cast<int>(sys.h.size()) != sys.q)
    throw std::runtime_error("system: wrong number of expressions");
  auto check_vars = [&](const ExprPtr& e, const char* what) {
    if (max_variable_index(*e) >= sys.n)
      throw std::runtime_error(std::string("system: ") + what +
                               " references a variable beyond x" +
                               std::to_string(sys.n));
  };
  for (auto& e : sys.f) check_vars(e, "f");
  for (auto& e : sys.G) check_vars(e, "G");
  for (auto& e : sys.h) check_vars(e, "h");

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(sys.n);
  const double tol = 1e-12;
  if (sys.eval_f(zero).cwiseAbs().maxCoeff() > tol)
    throw std::runtime_error("system: f(0) != 0");
  if (sys.eval_h(zero).cwiseAbs().maxCoeff() > tol)
    throw std::runtime_error("system: h(0) != 0");
  if (sys.gbar(zero) > tol)
    throw std::runtime_error("system: ||G(0)G(0)^T||_inf != 0");
}

namespace {

// key = value lines; '#' comments; keys: n, m, q, f1..fn, G, h1..hq, A, B, C.
std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r\"");
      size_t b = s.find_last_not_of(" \t\r\"");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '[' || c == ']') continue;
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

Eigen::MatrixXd parse_matrix(const std::string& s, int rows, int cols,
                             const std::string& name) {
  auto items = split_list(s);
  if (static_cast<int>(items.size()) != rows * cols)
    throw std::runtime_error("system: " + name + " needs " +
                             std::to_string(rows * cols) + " entries");
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = std::stod(items[i * cols + j]);
  return M;
}

}  // namespace

SystemSpec load_system(const std::string& text) {
  auto kv = parse_kv(text);
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw std::runtime_error("system: missing key '" + k + "'");
    return it->second;
  };
  SystemSpec sys;
  sys.n = std::stoi(need("n"));
  sys.m = std::stoi(need("m"));
  sys.q = std::stoi(need("q"));
  for (int i = 1; i <= sys.n; ++i) sys.f.push_back(parse(need("f" + std::to_string(i))));
  for (auto& item : split_list(need("G"))) sys.G.push_back(parse(item));
  for (int i = 1; i <= sys.q; ++i) sys.h.push_back(parse(need("h" + std::to_string(i))));
  if (kv.count("A")) sys.A = parse_matrix(kv["A"], sys.n, sys.n, "A");
  if (kv.count("B")) sys.B = parse_matrix(kv["B"], sys.n, sys.m, "B");
  if (kv.count("C")) sys.C = parse_matrix(kv["C"], sys.q, sys.n, "C");
  check_system(sys);
  return sys;
}

SystemSpec load_system_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open system file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_system(ss.str());
}

SystemSpec pendulum_system() {
  SystemSpec sys;
  sys.n = 2;
  sys.m = 1;
  sys.q = 1;
  sys.f = {parse("x2"), parse("-sin(x1) - x2")};
  sys.G = {parse("0"), parse("x2")};
  sys.h = {parse("x2")};
  check_system(sys);
  return sys;
}

SystemSpec zero_system() {
  SystemSpec sys;
  sys.n = 2;
  sys.m = 1;
  sys.q = 1;
  sys.f = {parse("0"), parse("0")};
  sys.G = {parse("0"), parse("0")};
  sys.h = {parse("0")};
  check_system(sys);
  return sys;
}

}  // namespace cpagain
