#include "battcap/woa.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "battcap/error.hpp"
#include "battcap/format.hpp"
#include "battcap/rng.hpp"

namespace battcap {

WoaConfig WoaConfig::box(int dim, double lo, double hi) {
    WoaConfig c;
    c.dim = dim;
    c.lo = Eigen::VectorXd::Constant(dim, lo);
    c.hi = Eigen::VectorXd::Constant(dim, hi);
    return c;
}

void WoaConfig::validate() const {
    if (dim < 1) throw Error("invariant", "WOA dimension must be >= 1");
    if (lo.size() != dim || hi.size() != dim) throw Error("invariant", "WOA bounds do not match the dimension");
    for (int i = 0; i < dim; ++i) {
        if (!(lo(i) < hi(i))) throw Error("invariant", "WOA bound " + std::to_string(i) + " has lo >= hi");
    }
    if (pop_size < 2) throw Error("invariant", "WOA population must be >= 2");
    if (t_max < 1) throw Error("invariant", "WOA t_max must be >= 1");
    if (!std::isfinite(spiral_b)) throw Error("invariant", "spiral constant must be finite");
}

Coefficients update_coefficients(int t, int t_max, const Eigen::VectorXd& r1, const Eigen::VectorXd& r2) {
    if (t_max < 1 || t < 0 || t > t_max) throw Error("invariant", "iteration outside [0, t_max]");
    if (r1.size() != r2.size()) throw Error("invariant", "r1 and r2 lengths differ");
    Coefficients c;
    c.a = 2.0 - 2.0 * static_cast<double>(t) / static_cast<double>(t_max);
    c.A = (2.0 * c.a * r1.array() - c.a).matrix();
    c.C = 2.0 * r2;
    return c;
}

namespace {

Eigen::VectorXd clamp(Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    if (lo.size() != x.size() || hi.size() != x.size()) throw Error("invariant", "bounds do not match position");
    return x.cwiseMax(lo).cwiseMin(hi);
}

void check_shapes(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw Error("invariant", "position shapes disagree");
}

std::string describe(std::span<const double> x) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < x.size() && i < 8; ++i) os << (i ? "," : "") << format_number(x[i]);
    if (x.size() > 8) os << ",...";
    os << ']';
    return os.str();
}

}  // namespace

Eigen::VectorXd encircle_step(const Eigen::VectorXd& x, const Eigen::VectorXd& best, const Eigen::VectorXd& A,
                              const Eigen::VectorXd& C, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    check_shapes(x, best);
    check_shapes(x, A);
    check_shapes(x, C);
    const Eigen::ArrayXd d = (C.array() * best.array() - x.array()).abs();
    return clamp((best.array() - A.array() * d).matrix(), lo, hi);
}

Eigen::VectorXd spiral_step(const Eigen::VectorXd& x, const Eigen::VectorXd& best, double b, double spiral_l,
                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    check_shapes(x, best);
    const double k = std::exp(b * spiral_l) * std::cos(2.0 * std::numbers::pi * spiral_l);
    return clamp(((best - x).array().abs() * k + best.array()).matrix(), lo, hi);
}

Eigen::VectorXd random_search_step(const Eigen::VectorXd& x, const Eigen::VectorXd& x_rand, const Eigen::VectorXd& A,
                                   const Eigen::VectorXd& C, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return encircle_step(x, x_rand, A, C, lo, hi);
}

WoaResult woa_optimize(const Objective& f, const WoaConfig& cfg) {
    cfg.validate();
    const int d = cfg.dim;
    const int pop = cfg.pop_size;
    WoaResult out;

    auto evaluate = [&](const Eigen::VectorXd& x) {
        const double c = f(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
        ++out.evaluations;
        if (!std::isfinite(c)) {
            throw Error("non_finite", "objective returned " + format_number(c) + " at " +
                                          describe({x.data(), static_cast<std::size_t>(x.size())}));
        }
        return c;
    };

    std::vector<Eigen::VectorXd> whales(static_cast<std::size_t>(pop), Eigen::VectorXd(d));
    Rng init(derive_seed(cfg.seed, "init"));
    for (auto& w : whales) {
        for (int j = 0; j < d; ++j) w(j) = init.uniform(cfg.lo(j), cfg.hi(j));
    }
    out.best_cost = evaluate(whales[0]);
    out.best_position = whales[0];
    for (int i = 1; i < pop; ++i) {
        const double c = evaluate(whales[static_cast<std::size_t>(i)]);
        if (c < out.best_cost) {
            out.best_cost = c;
            out.best_position = whales[static_cast<std::size_t>(i)];
        }
    }

    out.history.reserve(static_cast<std::size_t>(cfg.t_max));
    Eigen::VectorXd r1(d), r2(d);
    for (int t = 0; t < cfg.t_max; ++t) {
        // Every whale moves against the same snapshot of the population and of X*.
        const std::vector<Eigen::VectorXd> snapshot = whales;
        const Eigen::VectorXd best = out.best_position;
        for (int i = 0; i < pop; ++i) {
            Rng rng(derive_seed(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)), static_cast<std::uint64_t>(t)));
            for (int j = 0; j < d; ++j) r1(j) = rng.uniform();
            for (int j = 0; j < d; ++j) r2(j) = rng.uniform();
            const double p = rng.uniform();
            const double spiral_l = rng.uniform(-1.0, 1.0);
            const auto& x_rand = snapshot[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(pop)))];
            const auto& x = snapshot[static_cast<std::size_t>(i)];
            const Coefficients c = update_coefficients(t, cfg.t_max, r1, r2);

            Eigen::VectorXd next;
            if (p >= 0.5) {
                next = spiral_step(x, best, cfg.spiral_b, spiral_l, cfg.lo, cfg.hi);
            } else if (cfg.gate == GateNorm::euclidean) {
                next = c.A.norm() < 1.0 ? encircle_step(x, best, c.A, c.C, cfg.lo, cfg.hi)
                                        : random_search_step(x, x_rand, c.A, c.C, cfg.lo, cfg.hi);
            } else {
                const Eigen::VectorXd enc = encircle_step(x, best, c.A, c.C, cfg.lo, cfg.hi);
                const Eigen::VectorXd exp = random_search_step(x, x_rand, c.A, c.C, cfg.lo, cfg.hi);
                next.resize(d);
                for (int j = 0; j < d; ++j) next(j) = std::abs(c.A(j)) < 1.0 ? enc(j) : exp(j);
            }
            whales[static_cast<std::size_t>(i)] = std::move(next);
        }
        for (int i = 0; i < pop; ++i) {
            const auto& w = whales[static_cast<std::size_t>(i)];
            const double cost = evaluate(w);
            if (cost < out.best_cost) {
                out.best_cost = cost;
                out.best_position = w;
            }
        }
        out.history.push_back(out.best_cost);
    }
    return out;
}

}  // namespace battcap
