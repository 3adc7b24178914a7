#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "multispans/graph.hpp"

namespace fixtures {

using multispans::Graph;

inline Graph c4() {
  return multispans::synth_graph(multispans::SynthKind::Cycle, {.n = 4}, 0);
}

// Triangles {0,1,2} and {3,4,5}, bridge 2-3.
inline Graph barbell() {
  return multispans::synth_graph(multispans::SynthKind::BarbellTriangles, {}, 0);
}

inline Graph p2() { return Graph::from_edges(2, {{0, 1, 1.0}}, false); }

inline Graph community(std::uint64_t seed, std::size_t n = 30, std::size_t c = 3,
                       double p_in = 0.5, double p_out = 0.05) {
  multispans::SynthParams p;
  p.n = n;
  p.communities = c;
  p.p_in = p_in;
  p.p_out = p_out;
  return multispans::synth_graph(multispans::SynthKind::RandomCommunity, p, seed);
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("multispans_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace fixtures
