#ifndef VH_SRC_KERNEL_CACHE_HPP
#define VH_SRC_KERNEL_CACHE_HPP

#include <list>
#include <span>
#include <vector>

#include "vh/common.hpp"

namespace vh::detail {

/// RBF kernel rows K(i, .) over a training matrix, computed on demand and
/// kept in an LRU cache bounded in bytes. At least two rows always fit, so
/// the spans for a working pair stay valid together.
class KernelCache {
public:
    KernelCache(const Matrix& X, double gamma, std::size_t max_bytes);

    std::span<const double> row(Eigen::Index i);

    std::size_t capacity_rows() const { return capacity_; }
    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

private:
    struct Slot {
        Vector values;
        std::list<Eigen::Index>::iterator position;
        bool present = false;
    };

    const Matrix& X_;
    Vector sq_norms_;
    double gamma_;
    std::size_t capacity_;
    std::list<Eigen::Index> lru_;  // front = most recently used
    std::vector<Slot> slots_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

}  // namespace vh::detail

#endif  // VH_SRC_KERNEL_CACHE_HPP
