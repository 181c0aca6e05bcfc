#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nervemp/cover.hpp"
#include "nervemp/quadform.hpp"
#include "nervemp/solubility.hpp"

namespace nervemp {

// A complete problem: cover, one convex quadratic per subgraph, the
// observation vector (in cover.observable_order()), and an optional task.
struct Instance {
  std::string name;
  SubgraphCover cover;
  std::vector<QuadFunc> quads;
  VectorXd observations;
  std::optional<TaskSpec> task;

  // Throws InvalidInstance when a function leaves its subgraph, is not
  // PSD, or the observation vector has the wrong length.
  void validate() const;
};

// JSON encoding with keys `nodes`, `edges`, `subgraphs`, `observables`,
// `functions` (vars, upper-triangle triplets `A` as [i, j, value] over
// positions in vars, dense `b`, scalar `c`), `observations` and `task`.
// Doubles are written in shortest round-trip form, so save/load is bit exact.
std::string instance_to_json(const Instance& instance);
Instance instance_from_json(const std::string& text);

void save_instance(const Instance& instance, const std::filesystem::path& path);
Instance load_instance(const std::filesystem::path& path);

// Compact 16-hex-digit FNV-1a digest of a quadratic's coefficient bytes.
std::string coefficient_digest(const QuadFunc& q);

}  // namespace nervemp
