#include "roundoff_stats.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "errors.hpp"

namespace fcirk {
namespace {

DDReal invariant(const NBodyModel& model, Quantity quantity,
                 std::span<const DDReal> u) {
  if (quantity == Quantity::kEnergy) return model.energy<DDReal>(u);
  const Vec3<DDReal> l = model.angular_momentum<DDReal>(u);
  return sqrt(l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
}

std::string format17(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

}  // namespace

State perturb_member(std::span<const DDReal> u0, double scale,
                     std::uint64_t seed, int member) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(member)};
  std::mt19937_64 rng(seq);
  State u(u0.begin(), u0.end());
  for (DDReal& x : u) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double xi = 2.0 * unit - 1.0;
    x = x * (1.0 + scale * xi);
  }
  return u;
}

double relative_invariant_error(const NBodyModel& model, Quantity quantity,
                                std::span<const DDReal> u,
                                std::span<const DDReal> u_ref) {
  const DDReal ref = invariant(model, quantity, u_ref);
  return ((invariant(model, quantity, u) - ref) / ref).to_double();
}

std::vector<EnsembleReport> run_ensemble(const NBodyModel& model,
                                         std::span<const DDReal> u0,
                                         const TrajectoryRunner& runner,
                                         const EnsembleConfig& ec,
                                         Executor* exec) {
  if (ec.P < 1) throw InvalidArgument("ensemble size P must be >= 1");
  if (!(ec.perturb_scale > 0.0)) {
    throw InvalidArgument("perturbation scale must be positive");
  }
  if (ec.m < 1) throw InvalidArgument("sampling interval m must be >= 1");
  if (ec.h_list.empty()) throw InvalidArgument("h_list is empty");
  if (!(ec.T >= 0.0)) throw InvalidArgument("T must be >= 0");

  const auto members = static_cast<std::size_t>(ec.P);
  std::vector<State> starts(members);
  for (std::size_t p = 0; p < members; ++p) {
    starts[p] = perturb_member(u0, ec.perturb_scale, ec.seed, static_cast<int>(p));
  }

  std::vector<EnsembleReport> reports;
  for (double h : ec.h_list) {
    if (!(h > 0.0)) throw InvalidArgument("step sizes must be positive");
    const auto n_steps = static_cast<long long>(std::llround(ec.T / h));
    if (std::abs(static_cast<double>(n_steps) * h - ec.T) > 1e-9 * std::max(ec.T, h)) {
      throw InvalidArgument("T = " + format17(ec.T) +
                            " is not a whole number of steps of h = " + format17(h));
    }
    const std::size_t samples = static_cast<std::size_t>(n_steps / ec.m) + 1;

    std::vector<std::vector<double>> series(members);
    std::vector<std::string> errors(members);
    std::vector<unsigned char> failed(members, 0);
    parallel_for(exec, members, [&](std::size_t p) {
      std::vector<double>& out = series[p];
      out.reserve(samples);
      const State& start = starts[p];
      try {
        runner(start, h, n_steps, ec.m, [&](const Sample& s) {
          out.push_back(relative_invariant_error(model, ec.quantity, s.u, start));
        });
        if (out.size() != samples) {
          throw InvalidArgument("runner produced " + std::to_string(out.size()) +
                                " samples, expected " + std::to_string(samples));
        }
      } catch (const std::exception& e) {
        failed[p] = 1;
        errors[p] = e.what();
      }
    });

    EnsembleReport report;
    report.quantity = ec.quantity;
    report.h = h;
    for (std::size_t p = 0; p < members; ++p) {
      if (failed[p] != 0) {
        report.failed_members.push_back(static_cast<int>(p));
        report.failure_messages.push_back(errors[p]);
      } else {
        ++report.members;
      }
    }
    if (report.members > 0) {
      report.t.resize(samples);
      report.mu.assign(samples, 0.0);
      report.sigma.assign(samples, 0.0);
      for (std::size_t k = 0; k < samples; ++k) {
        report.t[k] = (DDReal(static_cast<double>(k) * static_cast<double>(ec.m)) * h).to_double();
        CompensatedAccumulator sum;
        for (std::size_t p = 0; p < members; ++p) {
          if (failed[p] == 0) sum.add(series[p][k]);
        }
        const double mean = sum.value() / report.members;
        CompensatedAccumulator sq;
        for (std::size_t p = 0; p < members; ++p) {
          if (failed[p] == 0) {
            const double dev = series[p][k] - mean;
            sq.add(dev * dev);
          }
        }
        report.mu[k] = mean;
        report.sigma[k] =
            report.members > 1 ? std::sqrt(sq.value() / (report.members - 1)) : 0.0;
      }
      try {
        report.fit = random_walk_fit(report);
      } catch (const DomainError&) {
        report.fit.reset();
      }
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

RandomWalkFit random_walk_fit(const EnsembleReport& report) {
  if (report.t.size() != report.sigma.size()) {
    throw InvalidArgument("report time and sigma series differ in length");
  }
  std::size_t positive = 0;
  double t_max = 0.0;
  for (std::size_t k = 0; k < report.t.size(); ++k) {
    if (report.sigma[k] > 0.0 && report.t[k] > 0.0) ++positive;
    t_max = std::max(t_max, report.t[k]);
  }
  if (positive < 10) {
    throw DomainError("random-walk fit needs at least 10 samples with sigma > 0");
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < report.t.size(); ++k) {
    if (report.t[k] < 0.5 * t_max || !(report.sigma[k] > 0.0) || !(report.t[k] > 0.0)) {
      continue;
    }
    const double x = std::log(report.t[k]);
    const double y = std::log(report.sigma[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  const double det = n * sxx - sx * sx;
  if (n < 2 || !(std::abs(det) > 0.0)) {
    throw DomainError("random-walk fit window is degenerate");
  }
  RandomWalkFit fit;
  fit.exponent = (n * sxy - sx * sy) / det;
  fit.amplitude = std::exp((sy - fit.exponent * sx) / n);
  return fit;
}

std::string report_to_csv(const EnsembleReport& report) {
  std::ostringstream out;
  out << "t,mu,sigma\n";
  for (std::size_t k = 0; k < report.t.size(); ++k) {
    out << format17(report.t[k]) << ',' << format17(report.mu[k]) << ','
        << format17(report.sigma[k]) << '\n';
  }
  return out.str();
}

}  // namespace fcirk
