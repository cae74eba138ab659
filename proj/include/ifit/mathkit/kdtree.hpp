#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

namespace ifit::mathkit {

/// Static k-d tree over row-major points for exact k-nearest-neighbour
/// queries. Neighbours are ordered by (squared distance, index), so ties
/// resolve to the lowest index exactly as a brute-force scan would.
class KdTree {
public:
    using Neighbour = std::pair<double, std::size_t>;  // (squared distance, index)

    KdTree(const double* points, std::size_t n, std::size_t dim, std::size_t leaf_size = 16)
        : pts_(points), n_(n), dim_(dim), leaf_(std::max<std::size_t>(leaf_size, 1)), idx_(n) {
        std::iota(idx_.begin(), idx_.end(), std::size_t{0});
        if (n_ > 0) build(0, n_);
    }

    /// The k nearest points to `query`, nearest first.
    std::vector<Neighbour> knn(const double* query, std::size_t k) const {
        k = std::min(k, n_);
        std::priority_queue<Neighbour> heap;
        std::vector<double> off(dim_, 0.0);
        if (k > 0) search(0, query, k, heap, 0.0, off);
        std::vector<Neighbour> out(heap.size());
        for (std::size_t i = out.size(); i > 0; --i) {
            out[i - 1] = heap.top();
            heap.pop();
        }
        return out;
    }

private:
    struct Node {
        std::size_t begin;
        std::size_t end;
        std::size_t dim = 0;
        double split = 0.0;
        std::size_t left = 0;  // 0 marks a leaf (the root is never a child)
        std::size_t right = 0;
    };

    double coord(std::size_t i, std::size_t j) const { return pts_[i * dim_ + j]; }

    std::size_t build(std::size_t begin, std::size_t end) {
        const std::size_t id = nodes_.size();
        nodes_.push_back({begin, end});
        if (end - begin <= leaf_) return id;
        std::size_t best_dim = 0;
        double best_spread = -1.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            double lo = coord(idx_[begin], j);
            double hi = lo;
            for (std::size_t r = begin + 1; r < end; ++r) {
                const double v = coord(idx_[r], j);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                best_dim = j;
            }
        }
        if (!(best_spread > 0.0)) return id;
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(idx_.begin() + static_cast<std::ptrdiff_t>(begin), idx_.begin() + static_cast<std::ptrdiff_t>(mid),
                         idx_.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](std::size_t a, std::size_t b) { return coord(a, best_dim) < coord(b, best_dim); });
        const double split = coord(idx_[mid], best_dim);
        const std::size_t left = build(begin, mid);
        const std::size_t right = build(mid, end);
        nodes_[id].dim = best_dim;
        nodes_[id].split = split;
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search(std::size_t id, const double* q, std::size_t k, std::priority_queue<Neighbour>& heap, double rd,
                std::vector<double>& off) const {
        const Node& nd = nodes_[id];
        if (nd.left == 0) {
            for (std::size_t r = nd.begin; r < nd.end; ++r) {
                const std::size_t i = idx_[r];
                const double* x = pts_ + i * dim_;
                double d2 = 0.0;
                for (std::size_t j = 0; j < dim_; ++j) {
                    const double diff = x[j] - q[j];
                    d2 += diff * diff;
                }
                if (heap.size() < k) {
                    heap.emplace(d2, i);
                } else if (Neighbour{d2, i} < heap.top()) {
                    heap.pop();
                    heap.emplace(d2, i);
                }
            }
            return;
        }
        const double diff = q[nd.dim] - nd.split;
        const std::size_t near = diff < 0.0 ? nd.left : nd.right;
        const std::size_t far = diff < 0.0 ? nd.right : nd.left;
        search(near, q, k, heap, rd, off);
        // rd is a lower bound on the squared distance to any point of the cell
        // (the per-axis offsets to the cell boundary). The slack keeps rounding
        // from pruning a cell holding an exact tie.
        const double saved = off[nd.dim];
        const double rd_far = rd - saved * saved + diff * diff;
        if (heap.size() < k || rd_far * (1.0 - 1e-9) <= heap.top().first) {
            off[nd.dim] = diff;
            search(far, q, k, heap, rd_far, off);
            off[nd.dim] = saved;
        }
    }

    const double* pts_;
    std::size_t n_;
    std::size_t dim_;
    std::size_t leaf_;
    std::vector<std::size_t> idx_;
    std::vector<Node> nodes_;
};

}  // namespace ifit::mathkit
