#include "peakfilter/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace peakfilter {

const char* to_string(Structure s) {
  switch (s) {
    case Structure::symmetric: return "symmetric";
    case Structure::full: return "full";
    case Structure::scalar: return "scalar";
  }
  return "?";
}

const char* to_string(Sense s) {
  return s == Sense::positive_definite ? "pd" : "nd";
}

// ---------------------------------------------------------------------------------------------
// MatrixVariable

Index MatrixVariable::scalar_count() const {
  switch (structure) {
    case Structure::symmetric: return rows * (rows + 1) / 2;
    case Structure::full: return rows * cols;
    case Structure::scalar: return 1;
  }
  return 0;
}

Matrix MatrixVariable::basis(Index k) const {
  Matrix e = Matrix::Zero(rows, cols);
  if (k < 0 || k >= scalar_count()) {
    throw std::out_of_range("MatrixVariable " + name + ": basis index out of range");
  }
  if (structure == Structure::symmetric) {
    for (Index i = 0; i < rows; ++i) {
      const Index len = rows - i;
      if (k < len) {
        e(i, i + k) = 1.0;
        e(i + k, i) = 1.0;
        return e;
      }
      k -= len;
    }
  }
  e(k / cols, k % cols) = 1.0;
  return e;
}

Vector MatrixVariable::coordinates(const Matrix& value) const {
  if (value.rows() != rows || value.cols() != cols) {
    throw DimensionError("variable " + name + ": value is " + shape_string(value) + ", expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  Vector c(scalar_count());
  Index k = 0;
  if (structure == Structure::symmetric) {
    for (Index i = 0; i < rows; ++i)
      for (Index j = i; j < rows; ++j) c(k++) = 0.5 * (value(i, j) + value(j, i));
  } else {
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) c(k++) = value(i, j);
  }
  return c;
}

Matrix MatrixVariable::from_coordinates(const Vector& coords) const {
  if (coords.size() != scalar_count()) {
    throw DimensionError("variable " + name + ": " + std::to_string(coords.size()) +
                         " coordinates, expected " + std::to_string(scalar_count()));
  }
  Matrix v(rows, cols);
  Index k = 0;
  if (structure == Structure::symmetric) {
    for (Index i = 0; i < rows; ++i)
      for (Index j = i; j < rows; ++j) {
        v(i, j) = coords(k);
        v(j, i) = coords(k);
        ++k;
      }
  } else {
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) v(i, j) = coords(k++);
  }
  return v;
}

// ---------------------------------------------------------------------------------------------
// AffineExpr
//
// Invariant: a term carrying a Kronecker factor has a 1×1 inner product L·op(V)·R.

AffineExpr::AffineExpr(Index rows, Index cols)
    : rows_(rows), cols_(cols), constant_(Matrix::Zero(rows, cols)) {}

AffineExpr AffineExpr::constant(const Matrix& value) {
  AffineExpr e(value.rows(), value.cols());
  e.constant_ = value;
  return e;
}

AffineExpr AffineExpr::variable(const MatrixVariable& var) {
  AffineExpr e(var.rows, var.cols);
  Term t;
  t.var = var.name;
  t.var_rows = var.rows;
  t.var_cols = var.cols;
  t.left = Matrix::Identity(var.rows, var.rows);
  t.right = Matrix::Identity(var.cols, var.cols);
  e.terms_.push_back(std::move(t));
  return e;
}

AffineExpr AffineExpr::transpose() const {
  AffineExpr e(cols_, rows_);
  e.constant_ = constant_.transpose();
  for (const Term& t : terms_) {
    Term u = t;
    u.transposed = !t.transposed;
    u.left = t.right.transpose();
    u.right = t.left.transpose();
    if (t.kron) u.kron = t.kron->transpose();
    e.terms_.push_back(std::move(u));
  }
  return e;
}

AffineExpr AffineExpr::block(Index row, Index col, Index rows, Index cols) const {
  if (row < 0 || col < 0 || row + rows > rows_ || col + cols > cols_) {
    throw DimensionError("AffineExpr::block out of range");
  }
  AffineExpr e(rows, cols);
  e.constant_ = constant_.block(row, col, rows, cols);
  for (const Term& t : terms_) {
    Term u = t;
    if (t.kron) {
      u.kron = t.kron->block(row, col, rows, cols);
    } else {
      u.left = t.left.middleRows(row, rows);
      u.right = t.right.middleCols(col, cols);
    }
    e.terms_.push_back(std::move(u));
  }
  return e;
}

AffineExpr AffineExpr::scalar_times(const AffineExpr& s, const Matrix& m) {
  if (s.rows_ != 1 || s.cols_ != 1) {
    throw DimensionError("AffineExpr::scalar_times: expression is " + std::to_string(s.rows_) +
                         "x" + std::to_string(s.cols_) + ", expected 1x1");
  }
  AffineExpr e(m.rows(), m.cols());
  e.constant_ = s.constant_(0, 0) * m;
  for (const Term& t : s.terms_) {
    Term u = t;
    u.kron = t.kron ? Matrix((*t.kron)(0, 0) * m) : m;
    e.terms_.push_back(std::move(u));
  }
  return e;
}

Matrix AffineExpr::term_value(const Term& t, const Matrix& value) const {
  if (value.rows() != t.var_rows || value.cols() != t.var_cols) {
    throw DimensionError("variable " + t.var + ": value is " + shape_string(value) +
                         ", expected " + std::to_string(t.var_rows) + "x" +
                         std::to_string(t.var_cols));
  }
  Matrix inner = t.transposed ? Matrix(t.left * value.transpose() * t.right)
                              : Matrix(t.left * value * t.right);
  inner *= t.scale;
  if (t.kron) return inner(0, 0) * *t.kron;
  return inner;
}

Matrix AffineExpr::evaluate(const Assignment& values) const {
  Matrix out = constant_;
  for (const Term& t : terms_) {
    auto it = values.find(t.var);
    if (it == values.end()) throw std::out_of_range("no value for variable " + t.var);
    out += term_value(t, it->second);
  }
  return out;
}

Matrix AffineExpr::evaluate_linear(const std::string& var, const Matrix& value) const {
  Matrix out = Matrix::Zero(rows_, cols_);
  for (const Term& t : terms_) {
    if (t.var == var) out += term_value(t, value);
  }
  return out;
}

std::vector<std::string> AffineExpr::variables() const {
  std::set<std::string> names;
  for (const Term& t : terms_) names.insert(t.var);
  return {names.begin(), names.end()};
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_) {
    throw DimensionError("AffineExpr: adding " + std::to_string(rhs.rows_) + "x" +
                         std::to_string(rhs.cols_) + " to " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
  }
  constant_ += rhs.constant_;
  terms_.insert(terms_.end(), rhs.terms_.begin(), rhs.terms_.end());
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& rhs) { return *this += -rhs; }

AffineExpr& AffineExpr::operator*=(double s) {
  constant_ *= s;
  for (Term& t : terms_) t.scale *= s;
  return *this;
}

AffineExpr operator*(const Matrix& m, const AffineExpr& e) {
  if (m.cols() != e.rows_) {
    throw DimensionError("AffineExpr: left factor is " + shape_string(m) + ", expression has " +
                         std::to_string(e.rows_) + " rows");
  }
  AffineExpr out(m.rows(), e.cols_);
  out.constant_ = m * e.constant_;
  for (const AffineExpr::Term& t : e.terms_) {
    AffineExpr::Term u = t;
    if (t.kron) {
      u.kron = m * *t.kron;
    } else {
      u.left = m * t.left;
    }
    out.terms_.push_back(std::move(u));
  }
  return out;
}

AffineExpr operator*(const AffineExpr& e, const Matrix& m) {
  if (m.rows() != e.cols_) {
    throw DimensionError("AffineExpr: right factor is " + shape_string(m) + ", expression has " +
                         std::to_string(e.cols_) + " columns");
  }
  AffineExpr out(e.rows_, m.cols());
  out.constant_ = e.constant_ * m;
  for (const AffineExpr::Term& t : e.terms_) {
    AffineExpr::Term u = t;
    if (t.kron) {
      u.kron = *t.kron * m;
    } else {
      u.right = t.right * m;
    }
    out.terms_.push_back(std::move(u));
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// LmiConstraint

LmiConstraint::LmiConstraint(std::string label, Sense sense, std::vector<Index> block_sizes,
                             std::vector<BlockEntry> table, std::optional<double> margin)
    : label_(std::move(label)), sense_(sense), block_sizes_(std::move(block_sizes)) {
  if (block_sizes_.empty()) throw DimensionError(label_ + ": no blocks");
  Index off = 0;
  for (Index s : block_sizes_) {
    if (s <= 0) throw DimensionError(label_ + ": non-positive block size");
    offsets_.push_back(off);
    off += s;
  }
  const int nb = static_cast<int>(block_sizes_.size());
  for (BlockEntry& entry : table) {
    int r = entry.row, c = entry.col;
    if (r < 0 || c < 0 || r >= nb || c >= nb) {
      throw DimensionError(label_ + ": cell (" + std::to_string(r + 1) + "," +
                           std::to_string(c + 1) + ") outside a " + std::to_string(nb) +
                           "-block grid");
    }
    AffineExpr e = std::move(entry.expr);
    if (r > c) {
      e = e.transpose();
      std::swap(r, c);
    }
    if (e.rows() != block_sizes_[r] || e.cols() != block_sizes_[c]) {
      std::ostringstream os;
      os << label_ << ": cell (" << r + 1 << "," << c + 1 << ") is " << e.rows() << "x"
         << e.cols() << ", expected " << block_sizes_[r] << "x" << block_sizes_[c];
      throw DimensionError(os.str());
    }
    auto [it, inserted] = cells_.try_emplace({r, c}, e);
    if (!inserted) it->second += e;
  }
  if (margin) {
    if (!(*margin >= 0.0)) throw PreconditionError(label_ + ": margin must be non-negative");
    margin_ = *margin;
  } else {
    margin_ = default_margin(constant_grid());
  }
}

Index LmiConstraint::size() const { return offsets_.back() + block_sizes_.back(); }

const AffineExpr* LmiConstraint::cell(int row, int col) const {
  if (row > col) std::swap(row, col);
  auto it = cells_.find({row, col});
  return it == cells_.end() ? nullptr : &it->second;
}

template <typename CellEval>
Matrix LmiConstraint::assemble(CellEval&& eval) const {
  const Index n = size();
  Matrix g = Matrix::Zero(n, n);
  for (const auto& [rc, expr] : cells_) {
    const auto [r, c] = rc;
    const Matrix m = eval(expr);
    const Index ro = offsets_[r], co = offsets_[c];
    if (r == c) {
      g.block(ro, co, m.rows(), m.cols()) = 0.5 * (m + m.transpose());
    } else {
      g.block(ro, co, m.rows(), m.cols()) = m;
      g.block(co, ro, m.cols(), m.rows()) = m.transpose();
    }
  }
  return g;
}

Matrix LmiConstraint::instantiate(const Assignment& values) const {
  return assemble([&](const AffineExpr& e) { return e.evaluate(values); });
}

Matrix LmiConstraint::constant_grid() const {
  return assemble([](const AffineExpr& e) { return e.constant_part(); });
}

Matrix LmiConstraint::linear_grid(const std::string& var, const Matrix& value) const {
  return assemble([&](const AffineExpr& e) { return e.evaluate_linear(var, value); });
}

std::vector<std::string> LmiConstraint::variables() const {
  std::set<std::string> names;
  for (const auto& [rc, e] : cells_) {
    for (auto& v : e.variables()) names.insert(v);
  }
  return {names.begin(), names.end()};
}

// ---------------------------------------------------------------------------------------------
// LmiProblem

LmiProblem::LmiProblem(std::string name) : name_(std::move(name)) {}

AffineExpr LmiProblem::declare(std::string name, Index rows, Index cols, Structure structure) {
  if (name.empty()) throw PreconditionError("LmiProblem: empty variable name");
  if (has_variable(name)) throw PreconditionError("LmiProblem: variable " + name + " redeclared");
  if (rows <= 0 || cols <= 0) throw DimensionError("LmiProblem: variable " + name + " is empty");
  if (structure == Structure::symmetric && rows != cols) {
    throw DimensionError("LmiProblem: symmetric variable " + name + " must be square");
  }
  if (structure == Structure::scalar && (rows != 1 || cols != 1)) {
    throw DimensionError("LmiProblem: scalar variable " + name + " must be 1x1");
  }
  variables_.push_back(MatrixVariable{std::move(name), rows, cols, structure});
  return AffineExpr::variable(variables_.back());
}

bool LmiProblem::has_variable(const std::string& name) const {
  return std::any_of(variables_.begin(), variables_.end(),
                     [&](const MatrixVariable& v) { return v.name == name; });
}

const MatrixVariable& LmiProblem::variable(const std::string& name) const {
  for (const auto& v : variables_) {
    if (v.name == name) return v;
  }
  throw std::out_of_range("LmiProblem " + name_ + ": unknown variable " + name);
}

void LmiProblem::check_declared(const std::vector<std::string>& names,
                                const std::string& where) const {
  for (const auto& n : names) {
    if (!has_variable(n)) {
      throw PreconditionError(where + " references undeclared variable " + n);
    }
  }
}

void LmiProblem::add(LmiConstraint c) {
  check_declared(c.variables(), "constraint " + c.label());
  // Diagonal cells must be symmetric for every admissible value of every variable.
  for (std::size_t b = 0; b < c.block_sizes().size(); ++b) {
    const AffineExpr* e = c.cell(static_cast<int>(b), static_cast<int>(b));
    if (!e) continue;
    auto asym = [](const Matrix& m) { return max_abs(m - m.transpose()); };
    const double tol = 1e-12 * (1.0 + max_abs(e->constant_part()));
    bool ok = asym(e->constant_part()) <= tol;
    for (const auto& name : e->variables()) {
      const MatrixVariable& v = variable(name);
      for (Index k = 0; ok && k < v.scalar_count(); ++k) {
        const Matrix lin = e->evaluate_linear(name, v.basis(k));
        ok = asym(lin) <= 1e-12 * (1.0 + max_abs(lin));
      }
    }
    if (!ok) {
      throw PreconditionError("constraint " + c.label() + ": diagonal cell (" +
                              std::to_string(b + 1) + "," + std::to_string(b + 1) +
                              ") is not symmetric");
    }
  }
  constraints_.push_back(std::move(c));
}

void LmiProblem::set_objective(LinearObjective objective) {
  for (const auto& [name, w] : objective.weights) {
    const MatrixVariable& v = variable(name);
    if (w.rows() != v.rows || w.cols() != v.cols) {
      throw DimensionError("objective weight for " + name + " is " + shape_string(w));
    }
  }
  objective_ = std::move(objective);
}

void LmiProblem::minimize_scalar(const std::string& name) {
  set_objective(LinearObjective{{{name, Matrix::Ones(1, 1)}}});
}

void LmiProblem::scale_margins(double factor) {
  if (!(factor > 0.0)) throw PreconditionError("scale_margins: factor must be positive");
  for (auto& c : constraints_) c.scale_margin(factor);
}

Index LmiProblem::scalar_count() const {
  Index n = 0;
  for (const auto& v : variables_) n += v.scalar_count();
  return n;
}

Index LmiProblem::offset_of(const std::string& name) const {
  Index off = 0;
  for (const auto& v : variables_) {
    if (v.name == name) return off;
    off += v.scalar_count();
  }
  throw std::out_of_range("LmiProblem " + name_ + ": unknown variable " + name);
}

double LmiProblem::objective_value(const Assignment& values) const {
  if (!objective_) return 0.0;
  double s = 0.0;
  for (const auto& [name, w] : objective_->weights) {
    s += w.cwiseProduct(values.at(name)).sum();
  }
  return s;
}

namespace {

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

std::string LmiProblem::serialize() const {
  std::ostringstream os;
  os << "problem " << name_ << "\n";
  os << "variables " << variables_.size() << " scalars " << scalar_count() << "\n";
  for (const auto& v : variables_) {
    os << "var " << v.name << " " << to_string(v.structure) << " " << v.rows << " " << v.cols
       << " offset " << offset_of(v.name) << "\n";
  }
  if (objective_) {
    os << "objective minimize\n";
    for (const auto& [name, w] : objective_->weights) {
      const MatrixVariable& v = variable(name);
      const Index off = offset_of(name);
      for (Index k = 0; k < v.scalar_count(); ++k) {
        const double c = w.cwiseProduct(v.basis(k)).sum();
        if (c != 0.0) os << "  c " << off + k << " " << num(c) << "\n";
      }
    }
  } else {
    os << "objective feasibility\n";
  }
  os << "constraints " << constraints_.size() << "\n";
  for (const auto& c : constraints_) {
    os << "constraint " << c.label() << " " << to_string(c.sense()) << " margin "
       << num(c.margin()) << " blocks";
    for (Index s : c.block_sizes()) os << " " << s;
    os << "\n";
    const int nb = static_cast<int>(c.block_sizes().size());
    for (int r = 0; r < nb; ++r) {
      for (int col = r; col < nb; ++col) {
        const AffineExpr* e = c.cell(r, col);
        if (!e) continue;
        os << "  block " << r + 1 << " " << col + 1 << "\n";
        const Matrix& k0 = e->constant_part();
        for (Index i = 0; i < k0.rows(); ++i)
          for (Index j = 0; j < k0.cols(); ++j)
            if (k0(i, j) != 0.0) os << "    const " << i << " " << j << " " << num(k0(i, j)) << "\n";
        for (const auto& v : variables_) {
          const Index off = offset_of(v.name);
          for (Index k = 0; k < v.scalar_count(); ++k) {
            const Matrix lin = e->evaluate_linear(v.name, v.basis(k));
            for (Index i = 0; i < lin.rows(); ++i)
              for (Index j = 0; j < lin.cols(); ++j)
                if (lin(i, j) != 0.0) {
                  os << "    coef " << i << " " << j << " " << off + k << " " << num(lin(i, j))
                     << "\n";
                }
          }
        }
      }
    }
  }
  os << "end\n";
  return os.str();
}

namespace var {
std::string Qbar(std::size_t vertex) { return "Qbar[" + std::to_string(vertex + 1) + "]"; }
std::string Rbar(std::size_t vertex) { return "Rbar[" + std::to_string(vertex + 1) + "]"; }
std::string Sbar(std::size_t vertex) { return "Sbar[" + std::to_string(vertex + 1) + "]"; }
}  // namespace var

}  // namespace peakfilter
