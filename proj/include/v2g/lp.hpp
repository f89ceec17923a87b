#pragma once

#include <cstddef>
#include <limits>
#include <string_view>
#include <utility>
#include <vector>

namespace v2g::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// min c'x  s.t.  row_lo <= A x <= row_hi,  lo <= x <= hi.
/// Every variable needs a finite lower bound.
class LinearProgram {
public:
    using Term = std::pair<int, double>;

    int add_variable(double cost, double lo, double hi = kInf);
    int add_row(std::vector<Term> terms, double lo, double hi);

    std::size_t variables() const noexcept { return cost_.size(); }
    std::size_t rows() const noexcept { return rows_.size(); }

    struct Row {
        std::vector<Term> terms;
        double lo = -kInf;
        double hi = kInf;
    };

    const std::vector<double>& cost() const noexcept { return cost_; }
    const std::vector<double>& lower() const noexcept { return lo_; }
    const std::vector<double>& upper() const noexcept { return hi_; }
    const std::vector<Row>& row_list() const noexcept { return rows_; }

private:
    std::vector<double> cost_, lo_, hi_;
    std::vector<Row> rows_;
};

enum class Status { optimal, infeasible, unbounded, iteration_limit };

std::string_view to_string(Status s);

struct Solution {
    Status status = Status::infeasible;
    std::vector<double> x;
    double objective = 0.0;
    std::size_t pivots = 0;
};

/// Dense two-phase primal simplex. Pivoting is Dantzig with lowest-index
/// tie-breaks, falling back to Bland's rule on long degenerate streaks, so
/// results are deterministic for identical input.
Solution solve(const LinearProgram& program);

}  // namespace v2g::lp
