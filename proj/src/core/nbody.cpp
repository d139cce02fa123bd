#include "nbody.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fcirk {
namespace {

template <class T>
T dot3(const Vec3<T>& a, const Vec3<T>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <class T>
Vec3<T> cross3(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

template <class T>
Vec3<T> block(std::span<const T> u, std::size_t offset) {
  return {u[offset], u[offset + 1], u[offset + 2]};
}

void require_size(std::size_t got, int want, const char* what) {
  if (got != static_cast<std::size_t>(want)) {
    throw InvalidArgument(std::string(what) + " has " + std::to_string(got) +
                          " components, model expects " + std::to_string(want));
  }
}

// x c with c in double-word, rounded once.
double scale(double x, const DDReal& c) { return std::fma(x, c.hi, x * c.lo); }

}  // namespace

NBodyModel::NBodyModel(double G, std::vector<double> masses)
    : g_(G), masses_(std::move(masses)) {
  if (masses_.empty()) throw InvalidArgument("model needs a central body");
  if (!(G > 0.0)) throw InvalidArgument("gravitational constant must be > 0");
  for (double m : masses_) {
    if (!(m > 0.0)) throw InvalidArgument("body masses must be positive");
  }
  const std::size_t n = masses_.size();
  mu_.assign(n, 0.0);
  k_.assign(n, 0.0);
  mu_dd_.assign(n, DDReal(0.0));
  ratio_.assign(n, DDReal(0.0));
  kick_.assign(n, DDReal(0.0));
  const double m0 = masses_[0];
  for (std::size_t i = 1; i < n; ++i) {
    const DDReal total = two_sum(m0, masses_[i]);
    mu_dd_[i] = two_prod(m0, masses_[i]) / total;
    mu_[i] = mu_dd_[i].to_double();
    k_[i] = (G * total).to_double();
    ratio_[i] = DDReal(masses_[i]) / total;
    kick_[i] = DDReal(G) * total / m0;
  }
}

void NBodyModel::flow(double t, std::span<const double> u, std::span<double> out,
                      FlowMemo* memo) const {
  const int n = bodies();
  if (memo != nullptr) memo->w.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto o = static_cast<std::size_t>(6 * i);
    KeplerBody b{block(u, o), block(u, o + 3), k_[static_cast<std::size_t>(i + 1)]};
    const KeplerBody r = kepler_flow(
        b, t, memo != nullptr ? &memo->w[static_cast<std::size_t>(i)] : nullptr);
    for (std::size_t c = 0; c < 3; ++c) {
      out[o + c] = r.q[c];
      out[o + 3 + c] = r.v[c];
    }
  }
}

void NBodyModel::flow(DDReal t, std::span<const DDReal> u, std::span<DDReal> out,
                      FlowMemo* memo) const {
  const int n = bodies();
  if (memo != nullptr) memo->dd.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto o = static_cast<std::size_t>(6 * i);
    const auto ii = static_cast<std::size_t>(i + 1);
    // k_i to double-word accuracy.
    const DDReal k = DDReal(g_) * two_sum(masses_[0], masses_[ii]);
    KeplerBodyDD b{block(u, o), block(u, o + 3), k};
    const KeplerBodyDD r = kepler_flow(
        b, t, memo != nullptr ? &memo->dd[static_cast<std::size_t>(i)] : nullptr);
    for (std::size_t c = 0; c < 3; ++c) {
      out[o + c] = r.q[c];
      out[o + 3 + c] = r.v[c];
    }
  }
}

void NBodyModel::flow_jacT_apply(double t, std::span<const double> u,
                                 std::span<const double> w,
                                 std::span<double> out,
                                 const FlowMemo* memo) const {
  const int n = bodies();
  const bool use_memo =
      memo != nullptr && memo->w.size() == static_cast<std::size_t>(n);
  for (int i = 0; i < n; ++i) {
    const auto o = static_cast<std::size_t>(6 * i);
    KeplerBody b{block(u, o), block(u, o + 3), k_[static_cast<std::size_t>(i + 1)]};
    std::array<double, 6> wi{};
    for (std::size_t c = 0; c < 6; ++c) wi[c] = w[o + c];
    const auto r = kepler_flow_jacT_apply(
        b, t, wi, use_memo ? &memo->w[static_cast<std::size_t>(i)] : nullptr);
    for (std::size_t c = 0; c < 6; ++c) out[o + c] = r[c];
  }
}

void NBodyModel::perturbation_part(int part, double, std::span<const double> u,
                                   std::span<double> g) const {
  const int n = bodies();
  const auto nn = static_cast<std::size_t>(n);
  std::fill(g.begin(), g.end(), 0.0);
  if (part == 0) {
    // dQ_i = sum_{j != i} ratio_j V_j.
    for (std::size_t i = 0; i < nn; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < nn; ++j) {
          if (j != i) acc += scale(u[6 * j + 3 + c], ratio_[j + 1]);
        }
        g[6 * i + c] = acc;
      }
    }
    return;
  }
  if (part != 1) throw InvalidArgument("perturbation part must be 0 or 1");

  // Pairwise accelerations: a_ij = m_j d_ij / |d_ij|^3 contributes
  // -(k_i/m_0) a_ij to body i and +(k_j/m_0) m_i/m_j a_ij to body j.
  std::vector<Vec3<double>> acc(nn, Vec3<double>{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < nn; ++i) {
    for (std::size_t j = i + 1; j < nn; ++j) {
      Vec3<double> d;
      for (std::size_t c = 0; c < 3; ++c) d[c] = u[6 * i + c] - u[6 * j + c];
      const double r2 = dot3(d, d);
      if (!(r2 > 0.0)) {
        throw SingularityError("bodies " + std::to_string(i + 1) + " and " +
                               std::to_string(j + 1) + " coincide");
      }
      const double inv_r3 = 1.0 / (r2 * std::sqrt(r2));
      for (std::size_t c = 0; c < 3; ++c) {
        acc[i][c] -= masses_[j + 1] * d[c] * inv_r3;
        acc[j][c] += masses_[i + 1] * d[c] * inv_r3;
      }
    }
  }
  for (std::size_t i = 0; i < nn; ++i) {
    for (std::size_t c = 0; c < 3; ++c) g[6 * i + 3 + c] = scale(acc[i][c], kick_[i + 1]);
  }
}

void NBodyModel::perturbation(double t, std::span<const double> u,
                              std::span<double> g) const {
  require_size(u.size(), dim(), "state");
  const std::size_t d = u.size();
  thread_local std::vector<double> tmp;
  tmp.resize(d);
  perturbation_part(1, t, u, g);
  perturbation_part(0, t, u, tmp);
  for (std::size_t i = 0; i < d; i += 6) {
    for (std::size_t c = 0; c < 3; ++c) g[i + c] = tmp[i + c];
  }
}

void NBodyModel::unperturbed_field(std::span<const double> u,
                                   std::span<double> k) const {
  const auto n = static_cast<std::size_t>(bodies());
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3<double> q = block(u, 6 * i);
    const double r2 = dot3(q, q);
    if (!(r2 > 0.0)) throw SingularityError("body at the central mass");
    const double s = -k_[i + 1] / (r2 * std::sqrt(r2));
    for (std::size_t c = 0; c < 3; ++c) {
      k[6 * i + c] = u[6 * i + 3 + c];
      k[6 * i + 3 + c] = s * q[c];
    }
  }
}

std::vector<unsigned char> NBodyModel::position_mask() const {
  std::vector<unsigned char> mask(static_cast<std::size_t>(dim()), 0);
  for (std::size_t i = 0; i < mask.size(); i += 6) {
    for (std::size_t c = 0; c < 3; ++c) mask[i + c] = 1;
  }
  return mask;
}

void NBodyModel::position_rate(double t, std::span<const double> u,
                               std::span<double> out) const {
  perturbation_part(0, t, u, out);
  for (std::size_t i = 0; i < u.size(); i += 6) {
    for (std::size_t c = 0; c < 3; ++c) out[i + c] += u[i + 3 + c];
  }
}

template <class T>
T NBodyModel::energy(std::span<const T> u) const {
  require_size(u.size(), dim(), "state");
  const auto n = static_cast<std::size_t>(bodies());
  using std::sqrt;
  T kepler(0.0);
  T interaction(0.0);
  const T m0 = T(masses_[0]);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3<T> q = block(u, 6 * i);
    const Vec3<T> v = block(u, 6 * i + 3);
    T mu;
    T k;
    if constexpr (std::is_same_v<T, DDReal>) {
      mu = mu_dd_[i + 1];
      k = DDReal(g_) * two_sum(masses_[0], masses_[i + 1]);
    } else {
      mu = mu_[i + 1];
      k = k_[i + 1];
    }
    kepler = kepler + mu * (0.5 * dot3(v, v) - k / sqrt(dot3(q, q)));
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec3<T> qj = block(u, 6 * j);
      const Vec3<T> vj = block(u, 6 * j + 3);
      T muj;
      if constexpr (std::is_same_v<T, DDReal>) {
        muj = mu_dd_[j + 1];
      } else {
        muj = mu_[j + 1];
      }
      const Vec3<T> d{q[0] - qj[0], q[1] - qj[1], q[2] - qj[2]};
      interaction = interaction + mu * muj * dot3(v, vj) / m0 -
                    T(g_) * T(masses_[i + 1]) * T(masses_[j + 1]) / sqrt(dot3(d, d));
    }
  }
  return kepler + interaction;
}

template <class T>
Vec3<T> NBodyModel::angular_momentum(std::span<const T> u) const {
  require_size(u.size(), dim(), "state");
  const auto n = static_cast<std::size_t>(bodies());
  Vec3<T> total{T(0.0), T(0.0), T(0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3<T> l = cross3(block(u, 6 * i), block(u, 6 * i + 3));
    T mu;
    if constexpr (std::is_same_v<T, DDReal>) {
      mu = mu_dd_[i + 1];
    } else {
      mu = mu_[i + 1];
    }
    for (std::size_t c = 0; c < 3; ++c) total[c] = total[c] + mu * l[c];
  }
  return total;
}

template double NBodyModel::energy(std::span<const double>) const;
template DDReal NBodyModel::energy(std::span<const DDReal>) const;
template Vec3<double> NBodyModel::angular_momentum(std::span<const double>) const;
template Vec3<DDReal> NBodyModel::angular_momentum(std::span<const DDReal>) const;

NBodyModel make_model(const BarycentricState& b) {
  return NBodyModel(b.G, b.masses);
}

State to_heliocentric(const BarycentricState& b, double tolerance) {
  const std::size_t n = b.masses.size();
  if (n == 0 || b.q.size() != n || b.p.size() != n) {
    throw InvalidArgument("barycentric state arrays have inconsistent sizes");
  }
  for (double m : b.masses) {
    if (!(m > 0.0)) throw InvalidArgument("body masses must be positive");
  }
  Vec3<double> total{0.0, 0.0, 0.0};
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      total[c] += b.p[i][c];
      scale += std::abs(b.p[i][c]);
    }
  }
  const double residual = std::sqrt(dot3(total, total));
  if (residual > tolerance * scale) {
    std::ostringstream msg;
    msg << "total momentum " << residual << " does not vanish (scale " << scale
        << ")";
    throw NormalizationError(msg.str());
  }

  const NBodyModel model = make_model(b);
  State u(6 * (n - 1));
  for (std::size_t i = 1; i < n; ++i) {
    const DDReal mu = model.mu_dd(static_cast<int>(i));
    for (std::size_t c = 0; c < 3; ++c) {
      u[6 * (i - 1) + c] = two_sum(b.q[i][c], -b.q[0][c]);
      u[6 * (i - 1) + 3 + c] = DDReal(b.p[i][c]) / mu;
    }
  }
  return u;
}

BarycentricState to_barycentric(const NBodyModel& model,
                                std::span<const DDReal> u) {
  require_size(u.size(), model.dim(), "state");
  const auto n = static_cast<std::size_t>(model.bodies());
  BarycentricState b;
  b.G = model.G();
  b.masses.resize(n + 1);
  b.q.assign(n + 1, Vec3<double>{});
  b.p.assign(n + 1, Vec3<double>{});
  b.names.resize(n + 1);
  DDReal total_mass(model.mass(0));
  for (std::size_t i = 0; i <= n; ++i) b.masses[i] = model.mass(static_cast<int>(i));
  for (std::size_t i = 1; i <= n; ++i) total_mass = total_mass + b.masses[i];

  for (std::size_t c = 0; c < 3; ++c) {
    DDReal weighted(0.0);
    DDReal momentum(0.0);
    std::vector<DDReal> p(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
      weighted = weighted + b.masses[i] * u[6 * (i - 1) + c];
      p[i] = model.mu_dd(static_cast<int>(i)) * u[6 * (i - 1) + 3 + c];
      momentum = momentum + p[i];
    }
    const DDReal q0 = -(weighted / total_mass);
    b.q[0][c] = q0.to_double();
    b.p[0][c] = (-momentum).to_double();
    for (std::size_t i = 1; i <= n; ++i) {
      b.q[i][c] = (u[6 * (i - 1) + c] + q0).to_double();
      b.p[i][c] = p[i].to_double();
    }
  }
  return b;
}

double barycentric_energy(const BarycentricState& b) {
  const std::size_t n = b.masses.size();
  DDReal kinetic(0.0);
  DDReal potential(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    kinetic = kinetic + DDReal(dot3(b.p[i], b.p[i])) / (2.0 * b.masses[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      Vec3<double> d;
      for (std::size_t c = 0; c < 3; ++c) d[c] = b.q[i][c] - b.q[j][c];
      potential = potential + DDReal(b.G * b.masses[i] * b.masses[j]) /
                                  std::sqrt(dot3(d, d));
    }
  }
  return (kinetic - potential).to_double();
}

Vec3<double> barycentric_angular_momentum(const BarycentricState& b) {
  Vec3<DDReal> total{};
  for (std::size_t i = 0; i < b.masses.size(); ++i) {
    const Vec3<double> l = cross3(b.q[i], b.p[i]);
    for (std::size_t c = 0; c < 3; ++c) total[c] = total[c] + l[c];
  }
  return {total[0].to_double(), total[1].to_double(), total[2].to_double()};
}

// ---------------------------------------------------------------------------
// Initial-condition files.

namespace {

using nlohmann::json;

double unit_length(const std::string& name) {
  if (name == "au" || name == "AU") return 1.495978707e11;
  if (name == "m") return 1.0;
  if (name == "km") return 1.0e3;
  throw UnitError("unknown length unit '" + name + "'");
}

double unit_time(const std::string& name) {
  if (name == "day" || name == "d") return 86400.0;
  if (name == "s") return 1.0;
  if (name == "year" || name == "yr") return 365.25 * 86400.0;
  throw UnitError("unknown time unit '" + name + "'");
}

double unit_mass(const std::string& name) {
  if (name == "solar" || name == "Msun") return 1.988409870698051e30;
  if (name == "kg") return 1.0;
  throw UnitError("unknown mass unit '" + name + "'");
}

double number_field(const json& obj, const std::string& key,
                    const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + "." + key + ": missing");
  if (!it->is_number()) throw ParseError(where + "." + key + ": expected a number");
  const double x = it->get<double>();
  if (!std::isfinite(x)) throw ParseError(where + "." + key + ": not finite");
  return x;
}

Vec3<double> vector_field(const json& obj, const std::string& key,
                          const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + "." + key + ": missing");
  if (!it->is_array() || it->size() != 3) {
    throw ParseError(where + "." + key + ": expected an array of 3 numbers");
  }
  Vec3<double> v;
  for (std::size_t c = 0; c < 3; ++c) {
    if (!(*it)[c].is_number()) {
      throw ParseError(where + "." + key + "[" + std::to_string(c) +
                       "]: expected a number");
    }
    v[c] = (*it)[c].get<double>();
    if (!std::isfinite(v[c])) {
      throw ParseError(where + "." + key + "[" + std::to_string(c) +
                       "]: not finite");
    }
  }
  return v;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& item : obj.items()) {
    if (allowed.count(item.key()) == 0) {
      throw ParseError(where + "." + item.key() + ": unknown field");
    }
  }
}

}  // namespace

BarycentricState parse_initial_conditions(std::string_view json_text,
                                          bool lax) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("$: expected an object");
  if (!lax) {
    reject_unknown(doc,
                   {"G", "epoch", "units", "frame", "provenance", "description",
                    "bodies"},
                   "$");
  }

  BarycentricState b;
  b.G = number_field(doc, "G", "$");
  if (!(b.G > 0.0)) throw ParseError("$.G: must be positive");
  if (doc.contains("epoch")) {
    if (!doc["epoch"].is_string()) throw ParseError("$.epoch: expected a string");
    b.epoch = doc["epoch"].get<std::string>();
  }

  if (doc.contains("units")) {
    const json& units = doc["units"];
    if (!units.is_object()) throw ParseError("$.units: expected an object");
    if (!lax) reject_unknown(units, {"length", "time", "mass"}, "$.units");
    for (const char* key : {"length", "time", "mass"}) {
      if (!units.contains(key) || !units[key].is_string()) {
        throw ParseError(std::string("$.units.") + key + ": expected a string");
      }
    }
    const double length = unit_length(units["length"].get<std::string>());
    const double time = unit_time(units["time"].get<std::string>());
    const double mass = unit_mass(units["mass"].get<std::string>());
    constexpr double kGravitySI = 6.67430e-11;
    const double expected = kGravitySI * mass * time * time / (length * length * length);
    if (std::abs(b.G / expected - 1.0) > 1e-3) {
      std::ostringstream msg;
      msg.precision(10);
      msg << "G = " << b.G << " is inconsistent with the declared units "
          << "(expected about " << expected << ")";
      throw UnitError(msg.str());
    }
  }

  const auto it = doc.find("bodies");
  if (it == doc.end() || !it->is_array()) {
    throw ParseError("$.bodies: expected an array");
  }
  if (it->empty()) throw ParseError("$.bodies: needs at least one body");
  for (std::size_t i = 0; i < it->size(); ++i) {
    const json& body = (*it)[i];
    const std::string where = "$.bodies[" + std::to_string(i) + "]";
    if (!body.is_object()) throw ParseError(where + ": expected an object");
    if (!lax) reject_unknown(body, {"name", "mass", "position", "velocity"}, where);
    std::string name = "body" + std::to_string(i);
    if (body.contains("name")) {
      if (!body["name"].is_string()) throw ParseError(where + ".name: expected a string");
      name = body["name"].get<std::string>();
    }
    const double mass = number_field(body, "mass", where);
    if (!(mass > 0.0)) throw ParseError(where + ".mass: must be positive");
    b.names.push_back(std::move(name));
    b.masses.push_back(mass);
    b.q.push_back(vector_field(body, "position", where));
    b.p.push_back(vector_field(body, "velocity", where));
  }

  // Barycentre and total momentum to zero.
  const std::size_t n = b.masses.size();
  DDReal total_mass(0.0);
  for (double m : b.masses) total_mass = total_mass + m;
  for (std::size_t c = 0; c < 3; ++c) {
    DDReal centre(0.0);
    DDReal momentum(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      centre = centre + two_prod(b.masses[i], b.q[i][c]);
      momentum = momentum + two_prod(b.masses[i], b.p[i][c]);
    }
    const DDReal rc = centre / total_mass;
    const DDReal vc = momentum / total_mass;
    for (std::size_t i = 0; i < n; ++i) {
      b.q[i][c] = (DDReal(b.q[i][c]) - rc).to_double();
      const DDReal v = DDReal(b.p[i][c]) - vc;
      b.p[i][c] = (v * b.masses[i]).to_double();
    }
  }
  return b;
}

BarycentricState load_initial_conditions(const std::string& path, bool lax) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open initial-condition file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_initial_conditions(text.str(), lax);
}

}  // namespace fcirk
