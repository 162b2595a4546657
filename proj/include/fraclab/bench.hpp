#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fraclab/analysis.hpp"

namespace fraclab {

// Undirected graph with a planar (or line) embedding used for Euclidean
// displacement. CSR adjacency keeps the walk loop tight.
struct FractalGraph {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<int> adj_offsets;  // size vertices+1
  std::vector<int> adj;          // neighbor lists, CSR
  int level = 0;
  int origin = 0;
  std::string name;

  int vertex_count() const { return static_cast<int>(x.size()); }
  int edge_count() const { return static_cast<int>(adj.size()) / 2; }
  int degree(int v) const { return adj_offsets[v + 1] - adj_offsets[v]; }
};

// Sierpinski gasket at the given construction depth; origin is the lower-left
// corner. vertices = 3(3^level+1)/2, edges = 3^(level+1).
FractalGraph build_gasket(int level);
// Controls with known dimensions.
FractalGraph build_chain(int length);              // origin at center
FractalGraph build_lattice(int side);              // square grid, origin center
FractalGraph build_complete(int k);                // K_k, unit-circle embedding

struct WalkEnsemble {
  int steps = 0;
  int walkers = 0;
  std::vector<double> msd;          // length steps+1, msd[0] = 0
  std::vector<double> return_prob;  // length steps+1, return_prob[0] = 1
};

// Simple random walks started at the origin vertex; per-walker seeds make the
// ensemble independent of scheduling.
WalkEnsemble simulate_walks(const FractalGraph& g, int steps, int walkers,
                            uint64_t seed, int jobs = 1);

struct DimensionFit {
  double value = 0.0;
  PowerLawFit fit;
};

// Mass dimension: log-log fit of vertex count within Euclidean radius r of
// the origin against r.
DimensionFit mass_dimension(const FractalGraph& g, std::span<const double> radii);

// Spectral dimension from the decay of the return probability; uses even
// steps only to sidestep bipartite parity.
DimensionFit spectral_from_return(const WalkEnsemble& ensemble,
                                  const FitWindow& window);

// Walker dimension from the msd growth: msd ~ t^(2/d_walk).
DimensionFit walker_dimension(const WalkEnsemble& ensemble,
                              const FitWindow& window);

}  // namespace fraclab
