#include "v2g/lp.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace v2g::lp {

int LinearProgram::add_variable(double cost, double lo, double hi) {
    if (!std::isfinite(lo)) throw std::invalid_argument("lp: variable lower bound must be finite");
    if (hi < lo) throw std::invalid_argument("lp: variable upper bound below lower bound");
    cost_.push_back(cost);
    lo_.push_back(lo);
    hi_.push_back(hi);
    return static_cast<int>(cost_.size()) - 1;
}

int LinearProgram::add_row(std::vector<Term> terms, double lo, double hi) {
    for (const auto& [j, a] : terms) {
        if (j < 0 || static_cast<std::size_t>(j) >= cost_.size())
            throw std::invalid_argument("lp: row references unknown variable");
        (void)a;
    }
    rows_.push_back(Row{std::move(terms), lo, hi});
    return static_cast<int>(rows_.size()) - 1;
}

std::string_view to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
        case Status::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

namespace {

enum class Sense { le, ge, eq };

struct StdRow {
    std::vector<LinearProgram::Term> terms;
    Sense sense;
    double rhs;
};

constexpr double kPivotTol = 1e-9;
constexpr std::size_t kMaxPivots = 200000;
constexpr std::size_t kBlandAfterDegenerate = 50;

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), a_(rows * (cols + 1), 0.0), basis_(rows, 0) {}

    double& at(std::size_t i, std::size_t j) { return a_[i * (n_ + 1) + j]; }
    double at(std::size_t i, std::size_t j) const { return a_[i * (n_ + 1) + j]; }
    double& rhs(std::size_t i) { return a_[i * (n_ + 1) + n_]; }
    double rhs(std::size_t i) const { return a_[i * (n_ + 1) + n_]; }

    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }
    std::vector<std::size_t>& basis() { return basis_; }

    void pivot(std::size_t r, std::size_t c, std::vector<double>& reduced, double& objective) {
        const std::size_t w = n_ + 1;
        double* prow = &a_[r * w];
        const double inv = 1.0 / prow[c];
        for (std::size_t j = 0; j < w; ++j) prow[j] *= inv;
        prow[c] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) continue;
            double* row = &a_[i * w];
            const double f = row[c];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < w; ++j)
                if (prow[j] != 0.0) row[j] -= f * prow[j];
            row[c] = 0.0;
        }
        const double f = reduced[c];
        if (f != 0.0) {
            for (std::size_t j = 0; j < n_; ++j)
                if (prow[j] != 0.0) reduced[j] -= f * prow[j];
            reduced[c] = 0.0;
            objective += f * prow[n_];
        }
        basis_[r] = c;
    }

    // reduced = c - c_B B^-1 A, objective = c_B B^-1 b.
    void price(const std::vector<double>& cost, std::vector<double>& reduced, double& objective) const {
        reduced = cost;
        objective = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
            const double cb = cost[basis_[i]];
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j < n_; ++j) reduced[j] -= cb * at(i, j);
            objective += cb * rhs(i);
        }
        for (std::size_t i = 0; i < m_; ++i) reduced[basis_[i]] = 0.0;
    }

private:
    std::size_t m_, n_;
    std::vector<double> a_;
    std::vector<std::size_t> basis_;
};

// Runs simplex iterations until optimal/unbounded. Columns with
// allowed[j] == false never enter.
Status iterate(Tableau& t, const std::vector<double>& cost, const std::vector<bool>& allowed, double rc_tol,
               std::size_t& pivots) {
    std::vector<double> reduced;
    double objective = 0.0;
    t.price(cost, reduced, objective);
    std::size_t degenerate = 0;
    std::size_t since_price = 0;
    while (true) {
        if (pivots >= kMaxPivots) return Status::iteration_limit;
        if (since_price >= 100) {
            t.price(cost, reduced, objective);
            since_price = 0;
        }
        const bool bland = degenerate >= kBlandAfterDegenerate;
        std::size_t enter = t.cols();
        double best = -rc_tol;
        for (std::size_t j = 0; j < t.cols(); ++j) {
            if (!allowed[j] || reduced[j] >= -rc_tol) continue;
            if (bland) {
                enter = j;
                break;
            }
            if (reduced[j] < best) {
                best = reduced[j];
                enter = j;
            }
        }
        if (enter == t.cols()) return Status::optimal;

        std::size_t leave = t.rows();
        double best_ratio = 0.0;
        for (std::size_t i = 0; i < t.rows(); ++i) {
            const double a = t.at(i, enter);
            if (a <= kPivotTol) continue;
            const double ratio = std::max(0.0, t.rhs(i)) / a;
            const double tie = 1e-12 * std::max(1.0, best_ratio);
            if (leave == t.rows() || ratio < best_ratio - tie) {
                leave = i;
                best_ratio = ratio;
            } else if (ratio <= best_ratio + tie && t.basis()[i] < t.basis()[leave]) {
                leave = i;
                best_ratio = std::min(best_ratio, ratio);
            }
        }
        if (leave == t.rows()) return Status::unbounded;
        degenerate = best_ratio <= 1e-12 ? degenerate + 1 : 0;
        t.pivot(leave, enter, reduced, objective);
        ++pivots;
        ++since_price;
    }
}

}  // namespace

Solution solve(const LinearProgram& program) {
    const std::size_t n = program.variables();
    const auto& lo = program.lower();
    const auto& hi = program.upper();

    // Shift to y = x - lo >= 0 and split into single-sided standard rows.
    std::vector<StdRow> rows;
    for (const auto& row : program.row_list()) {
        double shift = 0.0;
        for (const auto& [j, a] : row.terms) shift += a * lo[static_cast<std::size_t>(j)];
        const double rlo = row.lo - shift;
        const double rhi = row.hi - shift;
        const double scale = std::max({1.0, std::abs(rlo), std::abs(rhi)});
        if (std::isfinite(rlo) && std::isfinite(rhi) && std::abs(rhi - rlo) <= 1e-12 * scale) {
            rows.push_back({row.terms, Sense::eq, rlo});
            continue;
        }
        if (std::isfinite(rhi)) rows.push_back({row.terms, Sense::le, rhi});
        if (std::isfinite(rlo)) rows.push_back({row.terms, Sense::ge, rlo});
    }
    for (std::size_t j = 0; j < n; ++j)
        if (std::isfinite(hi[j])) rows.push_back({{{static_cast<int>(j), 1.0}}, Sense::le, hi[j] - lo[j]});

    const std::size_t m = rows.size();
    std::size_t slacks = 0;
    for (const auto& r : rows)
        if (r.sense != Sense::eq) ++slacks;

    // Normalize to rhs >= 0 and count artificials.
    std::vector<double> sign(m, 1.0);
    std::size_t artificials = 0;
    for (std::size_t i = 0; i < m; ++i) {
        auto& r = rows[i];
        if (r.rhs < 0.0) {
            sign[i] = -1.0;
            r.rhs = -r.rhs;
            if (r.sense == Sense::le)
                r.sense = Sense::ge;
            else if (r.sense == Sense::ge)
                r.sense = Sense::le;
        }
        if (r.sense != Sense::le) ++artificials;
    }

    const std::size_t cols = n + slacks + artificials;
    Tableau t(m, cols);
    std::size_t next_slack = n;
    std::size_t next_art = n + slacks;
    std::vector<bool> is_artificial(cols, false);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& r = rows[i];
        for (const auto& [j, a] : r.terms) t.at(i, static_cast<std::size_t>(j)) += sign[i] * a;
        t.rhs(i) = r.rhs;
        // The slack sign is fixed by the row sense before normalization.
        if (r.sense != Sense::eq) {
            const bool orig_le = (r.sense == Sense::le) == (sign[i] > 0.0);
            const double s = orig_le ? 1.0 : -1.0;
            t.at(i, next_slack) = sign[i] * s;
            if (r.sense == Sense::le) t.basis()[i] = next_slack;
            ++next_slack;
        }
        if (r.sense != Sense::le) {
            t.at(i, next_art) = 1.0;
            is_artificial[next_art] = true;
            t.basis()[i] = next_art;
            ++next_art;
        }
    }

    Solution sol;
    if (artificials > 0) {
        std::vector<double> phase1(cols, 0.0);
        for (std::size_t j = 0; j < cols; ++j)
            if (is_artificial[j]) phase1[j] = 1.0;
        std::vector<bool> allowed(cols, true);
        const auto status = iterate(t, phase1, allowed, 1e-9, sol.pivots);
        if (status == Status::iteration_limit) {
            sol.status = status;
            return sol;
        }
        double infeasibility = 0.0;
        double rhs_scale = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            rhs_scale = std::max(rhs_scale, std::abs(t.rhs(i)));
            if (is_artificial[t.basis()[i]]) infeasibility += t.rhs(i);
        }
        if (infeasibility > 1e-7 * rhs_scale) {
            sol.status = Status::infeasible;
            return sol;
        }
        // Drive zero-level artificials out of the basis where possible.
        std::vector<double> dummy(cols, 0.0);
        double dummy_obj = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (!is_artificial[t.basis()[i]]) continue;
            for (std::size_t j = 0; j < n + slacks; ++j) {
                if (std::abs(t.at(i, j)) > 1e-9) {
                    t.pivot(i, j, dummy, dummy_obj);
                    break;
                }
            }
        }
    }

    std::vector<double> cost(cols, 0.0);
    double cmax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        cost[j] = program.cost()[j];
        cmax = std::max(cmax, std::abs(cost[j]));
    }
    std::vector<bool> allowed(cols, true);
    for (std::size_t j = 0; j < cols; ++j)
        if (is_artificial[j]) allowed[j] = false;
    sol.status = iterate(t, cost, allowed, 1e-9 + 1e-11 * cmax, sol.pivots);
    if (sol.status != Status::optimal) return sol;

    std::vector<double> y(cols, 0.0);
    for (std::size_t i = 0; i < m; ++i) y[t.basis()[i]] = t.rhs(i);
    sol.x.resize(n);
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double x = y[j] + lo[j];
        const double tol = 1e-9 * std::max(1.0, std::abs(x));
        if (std::abs(x - lo[j]) <= tol) x = lo[j];
        if (std::isfinite(hi[j]) && std::abs(x - hi[j]) <= tol) x = hi[j];
        sol.x[j] = x;
        sol.objective += program.cost()[j] * x;
    }
    return sol;
}

}  // namespace v2g::lp
