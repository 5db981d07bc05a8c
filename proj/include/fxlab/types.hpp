#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace fxlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Token ids into a TokenVocabulary.
using Caption = std::vector<int>;

// Absent caption means an unconditional query.
using Condition = std::optional<Caption>;

}  // namespace fxlab
