#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "asif/rng.hpp"
#include "asif/types.hpp"

namespace asif {

/// Uniform over all binary N-vectors with exactly n_treated ones.
struct CompleteMechanism {
  std::size_t n_units = 0;
  std::size_t n_treated = 0;

  /// Throws InputError unless 0 < n_treated < n_units.
  void validate() const;
};

/// Independent complete randomization inside each block.
class BlockMechanism {
 public:
  /// `per_block_treated` must name every block; counts strictly inside
  /// (0, block size).
  BlockMechanism(std::vector<std::string> labels,
                 std::map<std::string, std::size_t> per_block_treated);

  /// Treated counts taken from the observed vector, block by block.
  static BlockMechanism from_observed(std::vector<std::string> labels,
                                      const AssignmentVector& observed);

  std::size_t n_units() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  /// Block names in order of first appearance.
  const std::vector<std::string>& block_names() const noexcept { return names_; }
  const std::vector<std::vector<std::size_t>>& members() const noexcept { return members_; }
  const std::vector<std::size_t>& treated_counts() const noexcept { return treated_; }

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> treated_;
};

inline constexpr std::size_t kDefaultMaxRedraws = 1'000;

/// Independent unit-level coin flips; degenerate (single-group) draws are
/// rejected and redrawn.
struct BernoulliMechanism {
  std::vector<double> propensities;
  std::size_t max_redraws = kDefaultMaxRedraws;

  /// Throws InputError unless every propensity lies strictly in (0, 1) and N >= 2.
  void validate() const;
};

using MechanismSpec = std::variant<CompleteMechanism, BlockMechanism, BernoulliMechanism>;

MechanismKind kind_of(const MechanismSpec& spec);
std::size_t n_units_of(const MechanismSpec& spec);

struct Draw {
  AssignmentVector assignment;
  std::size_t redraws = 0;  // rejected degenerate Bernoulli vectors
};

AssignmentVector draw_complete(std::size_t n, std::size_t n_treated, Rng& rng);
AssignmentVector draw_block(const BlockMechanism& spec, Rng& rng);
/// Throws CapExceededError after max_redraws consecutive degenerate draws.
Draw draw_bernoulli(std::span<const double> propensities, Rng& rng,
                    std::size_t max_redraws = kDefaultMaxRedraws);

Draw draw(const MechanismSpec& spec, Rng& rng);

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

/// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// Visits every vector with exactly n_treated ones, in lexicographic order of
/// the treated index sets. Throws CapExceededError when C(n, n_treated) > cap.
void for_each_complete(std::size_t n, std::size_t n_treated,
                       const std::function<void(const AssignmentVector&)>& visit,
                       std::uint64_t cap = kDefaultEnumerationCap);

std::vector<AssignmentVector> enumerate_complete(std::size_t n, std::size_t n_treated,
                                                 std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace asif
