#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ductsr/expr.hpp"
#include "ductsr/flow.hpp"
#include "ductsr/rng.hpp"

namespace ductsr {

/// Relative weights of the mutation moves; all zero makes mutate a no-op.
struct MutationWeights {
  double replace_subtree = 1.0;
  double perturb_constant = 1.5;
  double change_operator = 1.0;
  double insert_node = 2.0;
  double delete_node = 1.5;

  double total() const {
    return replace_subtree + perturb_constant + change_operator + insert_node + delete_node;
  }
};

struct SrConfig {
  int n_iterations = 100;
  int max_size = 25;
  int population_size = 512;
  int tournament_size = 5;
  double p_crossover = 0.7;  // remaining probability mass mutates a single parent
  double p_mutation = 0.3;
  int cycles_per_iteration = 6;       // breeding steps per member per iteration
  int constant_optimizer_steps = 32;  // per candidate admitted to the archive
  double p_optimize = 0.15;           // chance any other child gets the same tuning
  int frontier_polish_steps = 4000;   // final refinement of each frontier entry
  double constant_min = -10.0;
  double constant_max = 10.0;
  std::uint64_t rng_seed = 0;
  MutationWeights mutation;

  void validate() const;
};

enum class Target { U, P };

/// Column view of the training records used in the evaluation hot loop.
struct RegressionData {
  std::vector<double> x, y, z, re, target;

  std::size_t size() const { return target.size(); }
  EvalPoint point(std::size_t i) const { return EvalPoint{x[i], y[i], z[i], re[i]}; }

  static RegressionData from_records(std::span<const FlowRecord> records, Target t);
  /// Deterministic stride subsample down to at most max_points rows.
  RegressionData subsample(std::size_t max_points) const;
};

/// MSE of e over the data; +inf when any point evaluates non-finite.
double mse_loss(const Expr& e, const RegressionData& data);

struct ParetoEntry {
  int id = 0;
  int complexity = 0;
  double loss = 0.0;
  Expr expression;
};

/// Archive of non-dominated (complexity, loss) candidates, kept sorted by
/// complexity with strictly decreasing loss.
class ParetoFrontier {
public:
  /// Inserts the candidate unless an existing entry dominates it, then drops
  /// the entries it dominates. Exact (complexity, loss) ties keep the
  /// lexicographically smaller printed expression. Returns true when the
  /// frontier changed.
  bool update(ParetoEntry candidate);

  /// True when a candidate with these coordinates would not be dominated.
  bool admissible(int complexity, double loss) const;

  double best_loss() const;

  const std::vector<ParetoEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  /// Renumbers ids 0..n-1 in complexity order.
  void assign_ids();

private:
  std::vector<ParetoEntry> entries_;
};

/// Random tree of complexity <= size_budget respecting the nesting
/// restriction; leaves are drawn uniformly from the four variables and a
/// fresh constant.
Expr random_expression(const SrConfig& config, Rng& rng, int size_budget);

/// One randomly chosen edit: subtree replacement, multiplicative constant
/// perturbation, operator swap, node insertion or node deletion. Falls back
/// to the input when no valid edit is found within a bounded retry budget.
Expr mutate(const Expr& e, const SrConfig& config, Rng& rng);

/// Replaces a random subtree of a with a random subtree of b; falls back to a
/// when size or nesting constraints cannot be met.
Expr crossover(const Expr& a, const Expr& b, const SrConfig& config, Rng& rng);

/// Stochastic coordinate hill climbing over the constant vector with an
/// annealed step schedule; the result never fits worse than the input.
Expr optimize_constants(const Expr& e, const RegressionData& data, int steps, Rng& rng);

/// Tournament genetic programming over expression trees with a Pareto
/// archive; deterministic for a fixed (config, data) pair.
ParetoFrontier evolve(const SrConfig& config, const RegressionData& data);

std::string frontier_to_json(const ParetoFrontier& frontier);
ParetoFrontier frontier_from_json(const std::string& text);

}  // namespace ductsr
