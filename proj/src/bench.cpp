#include "fraclab/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>

#include "fraclab/common.hpp"
#include "fraclab/rng.hpp"

namespace fraclab {

namespace {

// Walkers are processed in fixed-size blocks so the reduction order (and
// therefore every emitted double) is independent of the job count.
constexpr int kWalkerBlock = 4096;

struct GraphBuilder {
  std::vector<double> x, y;
  std::vector<std::vector<int>> nbrs;

  int add_vertex(double px, double py) {
    x.push_back(px);
    y.push_back(py);
    nbrs.emplace_back();
    return static_cast<int>(x.size()) - 1;
  }
  void add_edge(int a, int b) {
    nbrs[static_cast<size_t>(a)].push_back(b);
    nbrs[static_cast<size_t>(b)].push_back(a);
  }
  FractalGraph finish(int level, int origin, std::string name) {
    FractalGraph g;
    g.x = std::move(x);
    g.y = std::move(y);
    g.level = level;
    g.origin = origin;
    g.name = std::move(name);
    g.adj_offsets.assign(g.x.size() + 1, 0);
    for (size_t v = 0; v < nbrs.size(); ++v) {
      g.adj_offsets[v + 1] = g.adj_offsets[v] + static_cast<int>(nbrs[v].size());
    }
    g.adj.reserve(static_cast<size_t>(g.adj_offsets.back()));
    for (auto& n : nbrs) {
      std::sort(n.begin(), n.end());
      g.adj.insert(g.adj.end(), n.begin(), n.end());
    }
    return g;
  }
};

}  // namespace

FractalGraph build_gasket(int level) {
  if (level < 0 || level > 10) {
    throw ConfigError("build_gasket: level must be in [0, 10]");
  }
  const int side = 1 << level;
  // triangular lattice coordinates (a, b); position = a*(1,0) + b*(1/2, s3/2)
  std::vector<int> id(static_cast<size_t>(side + 1) * (side + 1), -1);
  GraphBuilder gb;
  const double s3h = std::sqrt(3.0) / 2.0;
  auto vertex = [&](int a, int b) {
    int& slot = id[static_cast<size_t>(a) * (side + 1) + b];
    if (slot < 0) {
      slot = gb.add_vertex(a + 0.5 * b, s3h * b);
    }
    return slot;
  };

  // recursively split into three half-size copies; unit triangles emit edges
  struct Frame {
    int a, b, size;
  };
  std::vector<Frame> stack{{0, 0, side}};
  if (level == 0) {
    stack[0].size = 1;
  }
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    if (f.size == 1) {
      const int v0 = vertex(f.a, f.b);
      const int v1 = vertex(f.a + 1, f.b);
      const int v2 = vertex(f.a, f.b + 1);
      gb.add_edge(v0, v1);
      gb.add_edge(v1, v2);
      gb.add_edge(v2, v0);
    } else {
      const int h = f.size / 2;
      stack.push_back({f.a, f.b, h});
      stack.push_back({f.a + h, f.b, h});
      stack.push_back({f.a, f.b + h, h});
    }
  }
  return gb.finish(level, /*origin=*/0, "gasket");
}

FractalGraph build_chain(int length) {
  if (length < 2) {
    throw ConfigError("build_chain: need at least 2 vertices");
  }
  GraphBuilder gb;
  const int center = length / 2;
  for (int i = 0; i < length; ++i) {
    gb.add_vertex(static_cast<double>(i - center), 0.0);
  }
  for (int i = 0; i + 1 < length; ++i) {
    gb.add_edge(i, i + 1);
  }
  return gb.finish(0, center, "chain");
}

FractalGraph build_lattice(int side) {
  if (side < 2) {
    throw ConfigError("build_lattice: side must be >= 2");
  }
  GraphBuilder gb;
  const int c = side / 2;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      gb.add_vertex(static_cast<double>(i - c), static_cast<double>(j - c));
    }
  }
  auto idx = [side](int i, int j) { return i * side + j; };
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      if (i + 1 < side) {
        gb.add_edge(idx(i, j), idx(i + 1, j));
      }
      if (j + 1 < side) {
        gb.add_edge(idx(i, j), idx(i, j + 1));
      }
    }
  }
  return gb.finish(0, idx(c, c), "lattice");
}

FractalGraph build_complete(int k) {
  if (k < 2) {
    throw ConfigError("build_complete: k must be >= 2");
  }
  GraphBuilder gb;
  for (int i = 0; i < k; ++i) {
    const double ang = 2.0 * M_PI * i / k;
    gb.add_vertex(std::cos(ang), std::sin(ang));
  }
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      gb.add_edge(i, j);
    }
  }
  return gb.finish(0, 0, "complete");
}

WalkEnsemble simulate_walks(const FractalGraph& g, int steps, int walkers,
                            uint64_t seed, int jobs) {
  if (steps < 0 || walkers < 1) {
    throw ConfigError("simulate_walks: bad steps/walkers");
  }
  if (static_cast<double>(steps) * walkers > 1e10) {
    throw ConfigError("simulate_walks: steps*walkers exceeds the 1e10 budget");
  }

  const int n = g.vertex_count();
  std::vector<double> dist2(static_cast<size_t>(n));
  const double ox = g.x[static_cast<size_t>(g.origin)];
  const double oy = g.y[static_cast<size_t>(g.origin)];
  for (int v = 0; v < n; ++v) {
    const double dx = g.x[static_cast<size_t>(v)] - ox;
    const double dy = g.y[static_cast<size_t>(v)] - oy;
    dist2[static_cast<size_t>(v)] = dx * dx + dy * dy;
  }

  const int blocks = (walkers + kWalkerBlock - 1) / kWalkerBlock;
  std::vector<std::vector<double>> block_msd(static_cast<size_t>(blocks));
  std::vector<std::vector<int64_t>> block_ret(static_cast<size_t>(blocks));

  auto run_block = [&](int blk) {
    const int first = blk * kWalkerBlock;
    const int last = std::min(walkers, first + kWalkerBlock);
    std::vector<double> msd(static_cast<size_t>(steps) + 1, 0.0);
    std::vector<int64_t> ret(static_cast<size_t>(steps) + 1, 0);
    for (int w = first; w < last; ++w) {
      Rng rng(derive_seed(seed, {0x77616c6bULL, static_cast<uint64_t>(w)}));
      int v = g.origin;
      ret[0] += 1;
      for (int t = 1; t <= steps; ++t) {
        const int off = g.adj_offsets[v];
        const int deg = g.adj_offsets[v + 1] - off;
        v = g.adj[static_cast<size_t>(off) +
                  static_cast<size_t>(rng.below(static_cast<uint64_t>(deg)))];
        msd[static_cast<size_t>(t)] += dist2[static_cast<size_t>(v)];
        if (v == g.origin) {
          ret[static_cast<size_t>(t)] += 1;
        }
      }
    }
    block_msd[static_cast<size_t>(blk)] = std::move(msd);
    block_ret[static_cast<size_t>(blk)] = std::move(ret);
  };

  if (jobs <= 1 || blocks == 1) {
    for (int b = 0; b < blocks; ++b) {
      run_block(b);
    }
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        const int b = next.fetch_add(1);
        if (b >= blocks) {
          return;
        }
        run_block(b);
      }
    };
    std::vector<std::future<void>> futs;
    for (int j = 0; j < std::min(jobs, blocks); ++j) {
      futs.push_back(std::async(std::launch::async, worker));
    }
    for (auto& f : futs) {
      f.get();
    }
  }

  WalkEnsemble e;
  e.steps = steps;
  e.walkers = walkers;
  e.msd.assign(static_cast<size_t>(steps) + 1, 0.0);
  e.return_prob.assign(static_cast<size_t>(steps) + 1, 0.0);
  std::vector<int64_t> ret_total(static_cast<size_t>(steps) + 1, 0);
  for (int b = 0; b < blocks; ++b) {
    for (int t = 0; t <= steps; ++t) {
      e.msd[static_cast<size_t>(t)] += block_msd[static_cast<size_t>(b)][static_cast<size_t>(t)];
      ret_total[static_cast<size_t>(t)] += block_ret[static_cast<size_t>(b)][static_cast<size_t>(t)];
    }
  }
  for (int t = 0; t <= steps; ++t) {
    e.msd[static_cast<size_t>(t)] /= walkers;
    e.return_prob[static_cast<size_t>(t)] =
        static_cast<double>(ret_total[static_cast<size_t>(t)]) / walkers;
  }
  return e;
}

DimensionFit mass_dimension(const FractalGraph& g, std::span<const double> radii) {
  if (radii.size() < 3) {
    throw ConfigError("mass_dimension: need at least 3 radii");
  }
  const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
  if (*hi / *lo < 10.0) {
    throw ConfigError("mass_dimension: radii must span at least one decade");
  }
  const double ox = g.x[static_cast<size_t>(g.origin)];
  const double oy = g.y[static_cast<size_t>(g.origin)];
  std::vector<double> log_r, log_m;
  for (double r : radii) {
    int count = 0;
    const double r2 = r * r;
    for (int v = 0; v < g.vertex_count(); ++v) {
      const double dx = g.x[static_cast<size_t>(v)] - ox;
      const double dy = g.y[static_cast<size_t>(v)] - oy;
      if (dx * dx + dy * dy <= r2) {
        count++;
      }
    }
    if (count > 0) {
      log_r.push_back(std::log(r));
      log_m.push_back(std::log(static_cast<double>(count)));
    }
  }
  const LinearFit f = linear_fit(log_r, log_m);
  DimensionFit out;
  out.value = f.slope;
  out.fit.slope = f.slope;
  out.fit.intercept = f.intercept;
  out.fit.r_squared = f.r_squared;
  out.fit.points_used = f.n;
  return out;
}

namespace {

// Log-spaced even time points inside the window, deduplicated.
std::vector<int> log_spaced_even_times(int steps, const FitWindow& w) {
  std::vector<int> ts;
  const double t_lo = std::max(2.0, w.t_min);
  const double t_hi = std::min(static_cast<double>(steps), w.t_max);
  double t = t_lo;
  int prev = -1;
  while (t <= t_hi) {
    int ti = static_cast<int>(std::lround(t / 2.0)) * 2;  // nearest even
    ti = std::max(2, ti);
    if (ti <= static_cast<int>(t_hi) && ti != prev) {
      ts.push_back(ti);
      prev = ti;
    }
    t *= std::pow(2.0, 0.125);
  }
  return ts;
}

}  // namespace

DimensionFit spectral_from_return(const WalkEnsemble& ensemble,
                                  const FitWindow& window) {
  const std::vector<int> ts = log_spaced_even_times(ensemble.steps, window);
  std::vector<double> log_t, log_p;
  for (int t : ts) {
    const double p = ensemble.return_prob[static_cast<size_t>(t)];
    if (p > 0.0) {
      log_t.push_back(std::log(static_cast<double>(t)));
      log_p.push_back(std::log(p));
    }
  }
  if (log_t.size() < 4) {
    throw TelemetryError("spectral_from_return: too few usable points in window");
  }
  const LinearFit full = linear_fit(log_t, log_p);

  // Saturation diagnostics: a flat window has no scaling signal, and the
  // upper half of a usable window must still decay.
  if (full.slope > -0.05) {
    throw TelemetryError(
        "spectral_from_return: window is saturated (log-log slope " +
        std::to_string(full.slope) + " is flat)");
  }
  const size_t half = log_t.size() / 2;
  const LinearFit tail = linear_fit(
      std::span<const double>(log_t).subspan(half),
      std::span<const double>(log_p).subspan(half));
  if (tail.slope > 0.25 * full.slope) {
    throw TelemetryError(
        "spectral_from_return: window reaches the saturated regime "
        "(late-time decay " + std::to_string(tail.slope) +
        " vs overall " + std::to_string(full.slope) + ")");
  }

  DimensionFit out;
  out.value = -2.0 * full.slope;
  out.fit.slope = full.slope;
  out.fit.intercept = full.intercept;
  out.fit.r_squared = full.r_squared;
  out.fit.points_used = full.n;
  return out;
}

DimensionFit walker_dimension(const WalkEnsemble& ensemble,
                              const FitWindow& window) {
  const std::vector<int> ts = log_spaced_even_times(ensemble.steps, window);
  std::vector<double> log_t, log_m;
  for (int t : ts) {
    const double m = ensemble.msd[static_cast<size_t>(t)];
    if (m > 0.0) {
      log_t.push_back(std::log(static_cast<double>(t)));
      log_m.push_back(std::log(m));
    }
  }
  if (log_t.size() < 4) {
    throw TelemetryError("walker_dimension: too few usable points in window");
  }
  const LinearFit f = linear_fit(log_t, log_m);
  if (f.slope <= 0.0) {
    throw NumericsError("walker_dimension: nonpositive msd growth");
  }
  DimensionFit out;
  out.value = 2.0 / f.slope;
  out.fit.slope = f.slope;
  out.fit.intercept = f.intercept;
  out.fit.r_squared = f.r_squared;
  out.fit.points_used = f.n;
  return out;
}

}  // namespace fraclab
