#pragma once

#include <optional>
#include <vector>

#include "rowsolve/types.hpp"

namespace rowsolve {

/// A sampled block: row indices (absent for streaming samples) plus the
/// extracted rows A_S and entries b_S.
struct BlockSample {
    std::optional<std::vector<std::size_t>> indices;
    DenseMatrix a_block;
    DenseVector b_block;

    std::size_t k() const { return a_block.rows(); }
};

}  // namespace rowsolve
