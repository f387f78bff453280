#ifndef VH_SRC_DETAIL_HPP
#define VH_SRC_DETAIL_HPP

#include <string>

#include "vh/common.hpp"

namespace vh::detail {

inline void check_training_data(const Matrix& X, const Vector& y, const char* who, Eigen::Index min_rows) {
    if (X.rows() != y.size()) {
        throw Error("dim_mismatch", std::string(who) + ": X has " + std::to_string(X.rows()) + " rows, y has " +
                                        std::to_string(y.size()));
    }
    if (X.rows() < min_rows) {
        throw Error("too_few_rows", std::string(who) + ": needs at least " + std::to_string(min_rows) + " rows");
    }
    if (!X.allFinite() || !y.allFinite()) throw Error("non_finite", std::string(who) + ": non-finite input");
}

}  // namespace vh::detail

#endif  // VH_SRC_DETAIL_HPP
