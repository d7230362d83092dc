#include "asif/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asif/error.hpp"

namespace asif {

void CompleteMechanism::validate() const {
  if (n_treated == 0 || n_treated >= n_units) {
    throw InputError("complete randomization needs 0 < n_treated < n (got n_treated=" +
                     std::to_string(n_treated) + ", n=" + std::to_string(n_units) + ")");
  }
}

BlockMechanism::BlockMechanism(std::vector<std::string> labels,
                               std::map<std::string, std::size_t> per_block_treated)
    : labels_(std::move(labels)) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    auto [it, inserted] = index.try_emplace(labels_[i], names_.size());
    if (inserted) {
      names_.push_back(labels_[i]);
      members_.emplace_back();
    }
    members_[it->second].push_back(i);
  }
  for (const auto& [name, count] : per_block_treated) {
    if (!index.count(name)) {
      throw InputError("treated count given for unknown block '" + name + "'");
    }
  }
  treated_.resize(names_.size());
  for (std::size_t b = 0; b < names_.size(); ++b) {
    const auto it = per_block_treated.find(names_[b]);
    if (it == per_block_treated.end()) {
      throw InputError("no treated count for block '" + names_[b] + "'");
    }
    if (it->second == 0 || it->second >= members_[b].size()) {
      throw InputError("block '" + names_[b] + "' needs 0 < treated < " +
                       std::to_string(members_[b].size()) + " (got " +
                       std::to_string(it->second) + ")");
    }
    treated_[b] = it->second;
  }
  if (names_.empty()) throw InputError("block mechanism has no units");
}

BlockMechanism BlockMechanism::from_observed(std::vector<std::string> labels,
                                             const AssignmentVector& observed) {
  if (labels.size() != observed.size()) {
    throw InputError("block labels do not match the assignment length");
  }
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) counts[labels[i]] += observed[i];
  return BlockMechanism(std::move(labels), std::move(counts));
}

void BernoulliMechanism::validate() const {
  if (propensities.size() < 2) throw InputError("Bernoulli trials need at least two units");
  for (std::size_t i = 0; i < propensities.size(); ++i) {
    const double p = propensities[i];
    if (!(p > 0.0 && p < 1.0)) {
      throw InputError("propensity for unit " + std::to_string(i) +
                       " must lie strictly inside (0, 1)");
    }
  }
}

MechanismKind kind_of(const MechanismSpec& spec) {
  return static_cast<MechanismKind>(spec.index());
}

std::size_t n_units_of(const MechanismSpec& spec) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CompleteMechanism>) return m.n_units;
        else if constexpr (std::is_same_v<T, BlockMechanism>) return m.n_units();
        else return m.propensities.size();
      },
      spec);
}

namespace {

// Marks k distinct members of `units` as treated via a partial Fisher-Yates
// shuffle of `scratch` (a copy of `units`).
void choose_into(std::vector<std::size_t>& scratch, std::size_t k, Rng& rng,
                 std::vector<std::uint8_t>& out) {
  const std::size_t n = scratch.size();
  const bool pick_control = k > n / 2;
  const std::size_t picks = pick_control ? n - k : k;
  for (std::size_t i = 0; i < picks; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(scratch[i], scratch[j]);
  }
  if (pick_control) {
    for (std::size_t i = 0; i < n; ++i) out[scratch[i]] = 1;
    for (std::size_t i = 0; i < picks; ++i) out[scratch[i]] = 0;
  } else {
    for (std::size_t i = 0; i < picks; ++i) out[scratch[i]] = 1;
  }
}

}  // namespace

AssignmentVector draw_complete(std::size_t n, std::size_t n_treated, Rng& rng) {
  CompleteMechanism{n, n_treated}.validate();
  std::vector<std::size_t> scratch(n);
  std::iota(scratch.begin(), scratch.end(), std::size_t{0});
  std::vector<std::uint8_t> out(n, 0);
  choose_into(scratch, n_treated, rng, out);
  return AssignmentVector(std::move(out));
}

AssignmentVector draw_block(const BlockMechanism& spec, Rng& rng) {
  std::vector<std::uint8_t> out(spec.n_units(), 0);
  for (std::size_t b = 0; b < spec.members().size(); ++b) {
    std::vector<std::size_t> scratch = spec.members()[b];
    choose_into(scratch, spec.treated_counts()[b], rng, out);
  }
  return AssignmentVector(std::move(out));
}

Draw draw_bernoulli(std::span<const double> propensities, Rng& rng, std::size_t max_redraws) {
  const std::size_t n = propensities.size();
  std::vector<std::uint8_t> out(n);
  for (std::size_t attempt = 0; attempt <= max_redraws; ++attempt) {
    std::size_t treated = 0;
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = rng.uniform() < propensities[i] ? 1 : 0;
      treated += out[i];
    }
    if (treated > 0 && treated < n) return {AssignmentVector(std::move(out)), attempt};
  }
  throw CapExceededError("Bernoulli draw degenerate (single group) after " +
                         std::to_string(max_redraws) +
                         " redraws; propensities are too extreme");
}

Draw draw(const MechanismSpec& spec, Rng& rng) {
  return std::visit(
      [&rng](const auto& m) -> Draw {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CompleteMechanism>) {
          return {draw_complete(m.n_units, m.n_treated, rng), 0};
        } else if constexpr (std::is_same_v<T, BlockMechanism>) {
          return {draw_block(m, rng), 0};
        } else {
          return draw_bernoulli(m.propensities, rng, m.max_redraws);
        }
      },
      spec);
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays integral at every step.
    const std::uint64_t factor = n - k + i;
    const std::uint64_t g = std::gcd(result, i);
    const std::uint64_t r = result / g;
    const std::uint64_t f = factor / (i / g);
    if (r != 0 && f > UINT64_MAX / r) return UINT64_MAX;
    result = r * f;
  }
  return result;
}

void for_each_complete(std::size_t n, std::size_t n_treated,
                       const std::function<void(const AssignmentVector&)>& visit,
                       std::uint64_t cap) {
  if (n_treated > n) throw InputError("n_treated exceeds n");
  const std::uint64_t total = binomial(n, n_treated);
  if (total > cap) {
    throw CapExceededError("C(" + std::to_string(n) + ", " + std::to_string(n_treated) +
                           ") assignments exceed the enumeration cap of " +
                           std::to_string(cap) + "; use Monte Carlo mode");
  }
  std::vector<std::size_t> idx(n_treated);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::vector<std::uint8_t> values(n, 0);
  while (true) {
    std::fill(values.begin(), values.end(), 0);
    for (auto i : idx) values[i] = 1;
    visit(AssignmentVector(values));
    // Advance to the next combination in lexicographic order.
    std::size_t pos = n_treated;
    while (pos > 0 && idx[pos - 1] == n - n_treated + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t j = pos; j < n_treated; ++j) idx[j] = idx[j - 1] + 1;
  }
}

std::vector<AssignmentVector> enumerate_complete(std::size_t n, std::size_t n_treated,
                                                 std::uint64_t cap) {
  std::vector<AssignmentVector> out;
  for_each_complete(
      n, n_treated, [&out](const AssignmentVector& z) { out.push_back(z); }, cap);
  return out;
}

}  // namespace asif
