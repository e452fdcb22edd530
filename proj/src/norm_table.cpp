#include "so3lap/norm_table.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>

#include <json.hpp>

#include "binary_io.hpp"

namespace so3lap {

namespace {

constexpr std::uint32_t kTableVersion = 1;

std::filesystem::path sidecar_path(const std::filesystem::path& file) {
  auto p = file;
  p += ".json";
  return p;
}

nlohmann::json axis_to_json(const AxisSpec& a) {
  return {{"lo", a.lo}, {"hi", a.hi}, {"knots", a.knots},
          {"spacing", a.log_spaced ? "log" : "linear"}};
}

AxisSpec axis_from_json(const nlohmann::json& j) {
  AxisSpec a;
  a.lo = j.at("lo").get<double>();
  a.hi = j.at("hi").get<double>();
  a.knots = j.at("knots").get<int>();
  const auto spacing = j.at("spacing").get<std::string>();
  if (spacing != "log" && spacing != "linear") {
    throw std::runtime_error("norm table metadata: unknown spacing '" + spacing + "'");
  }
  a.log_spaced = spacing == "log";
  return a;
}

struct Bracket {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double t = 0.0;
};

Bracket bracket(const std::vector<double>& axis, double x, int which) {
  if (!(x >= axis.front() && x <= axis.back())) {
    throw std::out_of_range("query_norm_table: s" + std::to_string(which + 1) + " = " +
                            std::to_string(x) + " outside table range [" +
                            std::to_string(axis.front()) + ", " + std::to_string(axis.back()) +
                            "]");
  }
  if (axis.size() == 1) return {};
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - axis.begin());
  hi = std::clamp<std::size_t>(hi, 1, axis.size() - 1);
  const std::size_t lo = hi - 1;
  return {lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo])};
}

}  // namespace

std::vector<double> AxisSpec::knots_vector() const {
  validate();
  std::vector<double> out(static_cast<std::size_t>(knots));
  if (knots == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < knots; ++i) {
    const double t = static_cast<double>(i) / (knots - 1);
    out[static_cast<std::size_t>(i)] =
        log_spaced ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))
                   : lo + t * (hi - lo);
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

void AxisSpec::validate() const {
  if (knots < 1) throw std::invalid_argument("axis: need at least one knot");
  if (knots > 1 && !(hi > lo)) throw std::invalid_argument("axis: need hi > lo");
  if (log_spaced && !(lo > 0.0)) throw std::invalid_argument("axis: log spacing needs lo > 0");
}

NormTable build_norm_table(const NormTableSpec& spec, unsigned threads) {
  NormTable t;
  t.spec = spec;
  for (int a = 0; a < 3; ++a) t.axes[a] = spec.axes[a].knots_vector();
  const std::size_t n0 = t.axes[0].size();
  const std::size_t n1 = t.axes[1].size();
  const std::size_t n2 = t.axes[2].size();
  t.values.assign(n0 * n1 * n2, 0.0);

  const So3Grid grid = build_so3_grid(spec.grid_level);
  std::vector<Vec3> deficit;
  deficit.reserve(grid.size());
  for (const auto& r : grid.rotations) {
    deficit.emplace_back(1.0 - r(0, 0), 1.0 - r(1, 1), 1.0 - r(2, 2));
  }
  auto evaluate = [&](double s1, double s2, double s3) {
    const Vec3 s(s1, s2, s3);
    double sum = 0.0;
    for (const auto& d : deficit) sum += rl_kernel(std::max(spec.eps_clip, s.dot(d)));
    return sum * grid.cell_weight;
  };

  const bool symmetric = t.axes[0] == t.axes[1] && t.axes[1] == t.axes[2];
  std::vector<std::array<std::size_t, 3>> work;
  for (std::size_t i = 0; i < n0; ++i) {
    for (std::size_t j = 0; j < n1; ++j) {
      for (std::size_t k = 0; k < n2; ++k) {
        if (!symmetric || (i >= j && j >= k)) work.push_back({i, j, k});
      }
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t w = next++; w < work.size(); w = next++) {
      const auto [i, j, k] = work[w];
      const double f = evaluate(t.axes[0][i], t.axes[1][j], t.axes[2][k]);
      if (!symmetric) {
        t.values[t.index(i, j, k)] = f;
        continue;
      }
      std::array<std::size_t, 3> p{k, j, i};
      do {
        t.values[t.index(p[0], p[1], p[2])] = f;
      } while (std::next_permutation(p.begin(), p.end()));
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  const std::array<std::size_t, 3> dims{n0, n1, n2};
  for (int a = 0; a < 3; ++a) {
    auto& g = t.grads[a];
    g.assign(t.values.size(), 0.0);
    const auto& ax = t.axes[a];
    if (ax.size() < 2) continue;
    for (std::size_t i = 0; i < n0; ++i) {
      for (std::size_t j = 0; j < n1; ++j) {
        for (std::size_t k = 0; k < n2; ++k) {
          std::array<std::size_t, 3> at{i, j, k};
          const std::size_t m = at[a];
          std::array<std::size_t, 3> lo = at;
          std::array<std::size_t, 3> hi = at;
          lo[a] = m == 0 ? 0 : m - 1;
          hi[a] = std::min(m + 1, dims[a] - 1);
          g[t.index(i, j, k)] = (t.values[t.index(hi[0], hi[1], hi[2])] -
                                 t.values[t.index(lo[0], lo[1], lo[2])]) /
                                (ax[hi[a]] - ax[lo[a]]);
        }
      }
    }
  }
  return t;
}

NormQuery query_norm_table(const NormTable& table, double s1, double s2, double s3) {
  const Bracket b[3] = {bracket(table.axes[0], s1, 0), bracket(table.axes[1], s2, 1),
                        bracket(table.axes[2], s3, 2)};
  NormQuery q;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::size_t idx[3];
    for (int a = 0; a < 3; ++a) {
      const bool upper = (corner >> a) & 1;
      w *= upper ? b[a].t : 1.0 - b[a].t;
      idx[a] = upper ? b[a].hi : b[a].lo;
    }
    if (w == 0.0) continue;
    const std::size_t n = table.index(idx[0], idx[1], idx[2]);
    q.f += w * table.values[n];
    for (int a = 0; a < 3; ++a) q.grad(a) += w * table.grads[a][n];
  }
  return q;
}

void save_norm_table(const NormTable& table, const std::filesystem::path& file) {
  {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open norm table for writing: " + file.string());
    detail::write_magic(out, "RLUT");
    detail::write_le<std::uint32_t>(out, kTableVersion);
    for (const auto& ax : table.axes) {
      detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ax.size()));
    }
    for (const auto& ax : table.axes) {
      for (double v : ax) detail::write_le<double>(out, v);
    }
    for (double v : table.values) detail::write_le<double>(out, v);
    for (const auto& g : table.grads) {
      for (double v : g) detail::write_le<double>(out, v);
    }
    if (!out) throw std::runtime_error("failed writing norm table: " + file.string());
  }
  nlohmann::json meta = {
      {"grid_level", table.spec.grid_level},
      {"eps_clip", table.spec.eps_clip},
      {"axis_spec",
       {axis_to_json(table.spec.axes[0]), axis_to_json(table.spec.axes[1]),
        axis_to_json(table.spec.axes[2])}}};
  std::ofstream js(sidecar_path(file), std::ios::trunc);
  if (!js) throw std::runtime_error("cannot write norm table metadata");
  js << meta.dump(2) << '\n';
}

NormTable load_norm_table(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open norm table: " + file.string());
  detail::expect_magic(in, "RLUT", "norm table");
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kTableVersion) {
    throw std::runtime_error("norm table: unsupported version " + std::to_string(version));
  }
  NormTable t;
  std::array<std::uint32_t, 3> n{};
  for (auto& v : n) {
    v = detail::read_le<std::uint32_t>(in);
    if (v == 0 || v > 4096) throw std::runtime_error("norm table: bad axis length");
  }
  for (int a = 0; a < 3; ++a) {
    t.axes[a].resize(n[a]);
    for (auto& v : t.axes[a]) v = detail::read_le<double>(in);
    if (!std::is_sorted(t.axes[a].begin(), t.axes[a].end()) ||
        std::adjacent_find(t.axes[a].begin(), t.axes[a].end()) != t.axes[a].end()) {
      throw std::runtime_error("norm table: axis knots not strictly increasing");
    }
  }
  const std::size_t total = std::size_t{n[0]} * n[1] * n[2];
  t.values.resize(total);
  for (auto& v : t.values) v = detail::read_le<double>(in);
  for (auto& g : t.grads) {
    g.resize(total);
    for (auto& v : g) v = detail::read_le<double>(in);
  }

  std::ifstream js(sidecar_path(file));
  if (!js) throw std::runtime_error("norm table metadata missing: " + sidecar_path(file).string());
  const auto meta = nlohmann::json::parse(js);
  t.spec.grid_level = meta.at("grid_level").get<int>();
  t.spec.eps_clip = meta.at("eps_clip").get<double>();
  const auto& axes = meta.at("axis_spec");
  if (!axes.is_array() || axes.size() != 3) {
    throw std::runtime_error("norm table metadata: axis_spec must list three axes");
  }
  for (int a = 0; a < 3; ++a) t.spec.axes[a] = axis_from_json(axes[a]);
  return t;
}

}  // namespace so3lap
