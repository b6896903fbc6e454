#pragma once

#include "peakfilter/linalg.hpp"
#include "peakfilter/model.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace peakfilter {

enum class Structure { symmetric, full, scalar };

const char* to_string(Structure s);

/// A named decision matrix. Symmetric variables are parameterized by their upper triangle
/// (row-major), full ones by all entries (row-major).
struct MatrixVariable {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Structure structure = Structure::full;

  Index scalar_count() const;
  Matrix basis(Index k) const;
  Vector coordinates(const Matrix& value) const;
  Matrix from_coordinates(const Vector& coords) const;
};

using Assignment = std::map<std::string, Matrix>;

/// Affine matrix expression  C + Σ scale·(L·op(V)·R) ⊗ K  over named matrix variables.
/// The Kronecker factor K is 1×1 unless a scalar expression was spread over a matrix (μ·I_q).
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(Index rows, Index cols);

  static AffineExpr constant(const Matrix& value);
  static AffineExpr variable(const MatrixVariable& var);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const Matrix& constant_part() const { return constant_; }

  AffineExpr transpose() const;
  AffineExpr block(Index row, Index col, Index rows, Index cols) const;

  /// s·M for a 1×1 expression s.
  static AffineExpr scalar_times(const AffineExpr& s, const Matrix& m);

  /// Value at an assignment; every referenced variable must be present.
  Matrix evaluate(const Assignment& values) const;

  /// Contribution of one variable taking `value` (other variables and the constant dropped).
  Matrix evaluate_linear(const std::string& var, const Matrix& value) const;

  std::vector<std::string> variables() const;
  bool is_constant() const { return terms_.empty(); }

  AffineExpr& operator+=(const AffineExpr& rhs);
  AffineExpr& operator-=(const AffineExpr& rhs);
  AffineExpr& operator*=(double s);

  friend AffineExpr operator+(AffineExpr lhs, const AffineExpr& rhs) { return lhs += rhs; }
  friend AffineExpr operator-(AffineExpr lhs, const AffineExpr& rhs) { return lhs -= rhs; }
  friend AffineExpr operator-(AffineExpr e) { return e *= -1.0; }
  friend AffineExpr operator*(double s, AffineExpr e) { return e *= s; }
  friend AffineExpr operator*(AffineExpr e, double s) { return e *= s; }
  friend AffineExpr operator+(AffineExpr lhs, const Matrix& rhs) { return lhs += constant(rhs); }
  friend AffineExpr operator+(const Matrix& lhs, AffineExpr rhs) { return rhs += constant(lhs); }
  friend AffineExpr operator-(AffineExpr lhs, const Matrix& rhs) { return lhs -= constant(rhs); }
  friend AffineExpr operator-(const Matrix& lhs, const AffineExpr& rhs) {
    return constant(lhs) - rhs;
  }
  friend AffineExpr operator*(const Matrix& m, const AffineExpr& e);
  friend AffineExpr operator*(const AffineExpr& e, const Matrix& m);

 private:
  struct Term {
    std::string var;
    Index var_rows = 0;
    Index var_cols = 0;
    bool transposed = false;
    double scale = 1.0;
    Matrix left;
    Matrix right;
    std::optional<Matrix> kron;
  };

  Matrix term_value(const Term& t, const Matrix& value) const;

  Index rows_ = 0;
  Index cols_ = 0;
  Matrix constant_;
  std::vector<Term> terms_;
};

enum class Sense { positive_definite, negative_definite };

const char* to_string(Sense s);

/// One cell of a block table. Entries below the diagonal are stored as the transpose of the
/// mirrored upper cell.
struct BlockEntry {
  int row = 0;
  int col = 0;
  AffineExpr expr;
};

/// Symmetric block grid G(x) with the requirement G ≻ 0 or G ≺ 0, enforced as
/// ±G ≽ margin·I.
class LmiConstraint {
 public:
  LmiConstraint(std::string label, Sense sense, std::vector<Index> block_sizes,
                std::vector<BlockEntry> table, std::optional<double> margin = std::nullopt);

  const std::string& label() const { return label_; }
  Sense sense() const { return sense_; }
  const std::vector<Index>& block_sizes() const { return block_sizes_; }
  Index size() const;
  double margin() const { return margin_; }
  void scale_margin(double factor) { margin_ *= factor; }

  /// Upper-triangle cell (row <= col), or nullptr for an exact zero block.
  const AffineExpr* cell(int row, int col) const;

  /// The printed grid at an assignment, diagonal cells symmetrized.
  Matrix instantiate(const Assignment& values) const;
  Matrix constant_grid() const;
  Matrix linear_grid(const std::string& var, const Matrix& value) const;

  std::vector<std::string> variables() const;

 private:
  template <typename CellEval>
  Matrix assemble(CellEval&& eval) const;

  std::string label_;
  Sense sense_;
  std::vector<Index> block_sizes_;
  std::vector<Index> offsets_;
  std::map<std::pair<int, int>, AffineExpr> cells_;
  double margin_ = 0.0;
};

/// Linear functional Σ <W_v, V> over declared variables.
struct LinearObjective {
  std::vector<std::pair<std::string, Matrix>> weights;
};

class LmiProblem {
 public:
  explicit LmiProblem(std::string name = "lmi");

  AffineExpr declare(std::string name, Index rows, Index cols, Structure structure);
  AffineExpr declare_symmetric(std::string name, Index n) {
    return declare(std::move(name), n, n, Structure::symmetric);
  }
  AffineExpr declare_full(std::string name, Index rows, Index cols) {
    return declare(std::move(name), rows, cols, Structure::full);
  }
  AffineExpr declare_scalar(std::string name) {
    return declare(std::move(name), 1, 1, Structure::scalar);
  }

  void add(LmiConstraint c);
  void set_objective(LinearObjective objective);
  void minimize_scalar(const std::string& name);
  void scale_margins(double factor);

  const std::string& name() const { return name_; }
  const std::vector<MatrixVariable>& variables() const { return variables_; }
  const std::vector<LmiConstraint>& constraints() const { return constraints_; }
  const std::optional<LinearObjective>& objective() const { return objective_; }
  bool has_variable(const std::string& name) const;
  const MatrixVariable& variable(const std::string& name) const;

  Index scalar_count() const;
  /// First scalar coordinate of each variable, in declaration order.
  Index offset_of(const std::string& name) const;

  double objective_value(const Assignment& values) const;

  /// Deterministic text form: variables, objective, then every constraint with block
  /// coordinates, constant entries and (row, col, scalar, coefficient) triplets.
  std::string serialize() const;

 private:
  void check_declared(const std::vector<std::string>& names, const std::string& where) const;

  std::string name_;
  std::vector<MatrixVariable> variables_;
  std::vector<LmiConstraint> constraints_;
  std::optional<LinearObjective> objective_;
};

/// γ either fixed or a decision variable named "gamma" that the problem minimizes.
struct GammaSpec {
  std::optional<double> value;

  static GammaSpec fixed(double g) { return GammaSpec{g}; }
  static GammaSpec minimized() { return GammaSpec{}; }
  bool is_fixed() const { return value.has_value(); }
};

// Problem builders. Each one is the single authoritative table for its inequality system.

/// Mean-square Lyapunov test AᵀQ + QA + G1ᵀQG1 ≺ 0, Q ≻ 0.
LmiProblem proposition1_problem(const Matrix& A, const Matrix& G1,
                                std::optional<double> margin = std::nullopt);

/// Peak-to-peak bound (7)–(8) for one or several closed loops sharing Q and μ.
LmiProblem lemma1_analysis(const AugmentedSystem& aug, GammaSpec gamma, double lambda);
LmiProblem lemma1_analysis(std::span<const AugmentedSystem> loops, GammaSpec gamma, double lambda);

/// Slack-variable form (9) with (8).
LmiProblem lemma2_analysis(const AugmentedSystem& aug, GammaSpec gamma, double lambda,
                           double epsilon);

LmiProblem theorem1_synthesis(const StochasticLtiSystem& sys, GammaSpec gamma, double lambda);
LmiProblem corollary1_synthesis(const PolytopicModel& model, GammaSpec gamma, double lambda);

LmiProblem theorem2_synthesis(const StochasticLtiSystem& sys, GammaSpec gamma, double lambda,
                              double epsilon);
LmiProblem theorem3_synthesis(const PolytopicModel& model, GammaSpec gamma, double lambda,
                              double epsilon);
LmiProblem theorem4_fault_synthesis(const StochasticLtiSystem& sys, const FaultOutputMap& map,
                                    GammaSpec gamma, double lambda, double epsilon);

/// Vertex-dependent analysis of a fixed filter: the Theorem-3 system with
/// Āf = T̄·Af, B̄f = T̄·Bf, C̄f = Cf, D̄f = Df.
LmiProblem improved_analysis(const PolytopicModel& model, const DeconvolutionFilter& filter,
                             const AugmentationMode& mode, GammaSpec gamma, double lambda,
                             double epsilon);

/// Variable names shared by the builders and the extraction code.
namespace var {
inline constexpr const char* gamma = "gamma";
inline constexpr const char* mu = "mu";
inline constexpr const char* Q = "Q";
inline constexpr const char* W = "W";
inline constexpr const char* R = "R";
inline constexpr const char* V = "V";
inline constexpr const char* Z = "Z";
inline constexpr const char* S = "S";
inline constexpr const char* T = "T";
inline constexpr const char* Df = "Df";
inline constexpr const char* Tbar = "Tbar";
inline constexpr const char* Afbar = "Afbar";
inline constexpr const char* Bfbar = "Bfbar";
inline constexpr const char* Cfbar = "Cfbar";
inline constexpr const char* Dfbar = "Dfbar";
std::string Qbar(std::size_t vertex);
std::string Rbar(std::size_t vertex);
std::string Sbar(std::size_t vertex);
}  // namespace var

}  // namespace peakfilter
