#include "cli_app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "multispans/array_io.hpp"
#include "multispans/encoding_tree.hpp"
#include "multispans/error.hpp"
#include "multispans/graph.hpp"
#include "multispans/hierarchy_attention.hpp"
#include "multispans/minimize.hpp"
#include "multispans/rng.hpp"
#include "multispans/st_kernels.hpp"
#include "multispans/transformer.hpp"
#include "multispans/weights.hpp"

namespace fs = std::filesystem;

namespace multispans::cli {
namespace {

std::string fixed9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

struct GraphArgs {
  std::string path;
  std::string format = "edges";
  bool directed = false;
  std::optional<std::size_t> nodes;

  void add(CLI::App* app) {
    app->add_option("--graph", path, "Graph file (CSV)")->required();
    app->add_option("--format", format, "edges or adjacency")
        ->check(CLI::IsMember({"edges", "adjacency"}));
    app->add_flag("--directed", directed, "Treat the graph as directed");
    app->add_option("--nodes", nodes, "Declared vertex count for edge lists");
  }

  Graph load() const {
    return load_graph(path, format == "edges" ? GraphFormat::EdgeList : GraphFormat::Adjacency,
                      directed, nodes);
  }
};

EncodingTree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open tree " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("tree " + path + " is not valid JSON: " + e.what());
  }
  return EncodingTree::from_json(j);
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> sizes;
  for (const auto& field : split_csv_line(text)) {
    const double v = parse_double(field);
    if (v < 1 || v != std::floor(v)) throw InputError("kernel sizes must be positive integers");
    sizes.push_back(static_cast<std::size_t>(v));
  }
  if (sizes.empty()) throw InputError("kernel sizes must not be empty");
  return sizes;
}

// Shared flags. --config is consumed by expand_config before parsing.
struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App* app, bool out_required) {
    app->add_option("--config", config, "key = value file; flags override it");
    app->add_option("--seed", seed, "Random seed");
    auto* o = app->add_option("--out", out, "Output path");
    if (out_required) o->required();
  }
};

// ---- se ------------------------------------------------------------------

struct SeCmd {
  Common common;
  GraphArgs graph;
  std::string tree;

  void add(CLI::App* app) {
    common.add(app, false);
    graph.add(app);
    app->add_option("--tree", tree, "Tree JSON; the flat tree when omitted");
  }

  int run(std::ostream& out) const {
    const Graph g = graph.load();
    const EncodingTree t = tree.empty() ? flat_tree(g) : load_tree(tree);
    out << fixed9(structural_entropy(g, t)) << '\n';
    return kExitOk;
  }
};

// ---- optimize --------------------------------------------------------------

struct OptimizeCmd {
  Common common;
  GraphArgs graph;
  std::optional<std::size_t> max_height;
  std::string trace;

  void add(CLI::App* app) {
    common.add(app, true);
    graph.add(app);
    app->add_option("--max-height", max_height, "Height bound for the tree");
    app->add_option("--trace", trace, "Per-iteration entropy CSV");
  }

  int run(std::ostream& out) const {
    const Graph g = graph.load();
    MinimizeConfig cfg;
    cfg.max_height = max_height;
    const auto r = minimize_traced(g, cfg);
    write_json(r.tree.to_json(), common.out);
    if (!trace.empty()) {
      std::ofstream csv(trace);
      if (!csv) throw InputError("cannot write " + trace);
      csv << "iteration,operator,pair,entropy\n";
      for (const auto& s : r.trace)
        csv << s.iteration << ',' << to_string(s.op) << ',' << s.first_vertex << '-'
            << s.second_vertex << ',' << fixed9(s.entropy) << '\n';
    }
    double greedy_end = r.flat_entropy;
    if (!r.trace.empty()) greedy_end = r.trace.back().entropy;
    out << "flat entropy: " << fixed9(r.flat_entropy) << '\n'
        << "iterations: " << r.trace.size() << '\n'
        << "greedy entropy: " << fixed9(greedy_end) << '\n'
        << "compressions: " << r.compressions.size() << '\n'
        << "final entropy: " << fixed9(r.entropy) << '\n'
        << "height: " << r.tree.height() << '\n'
        << "tree: " << common.out << '\n';
    return kExitOk;
  }
};

// ---- artifacts -------------------------------------------------------------

struct ArtifactsCmd {
  Common common;
  GraphArgs graph;
  std::string tree;
  std::size_t heads = 8;

  void add(CLI::App* app) {
    common.add(app, true);
    graph.add(app);
    app->add_option("--tree", tree, "Tree JSON")->required();
    app->add_option("--heads", heads, "Attention heads");
  }

  int run(std::ostream& out) const {
    const Graph g = graph.load();
    const EncodingTree t = load_tree(tree);
    const auto report = validate(t, g);
    if (!report.ok()) throw InputError("invalid encoding tree: " + report.summary());
    const MaskSet masks = build_mask_set(t, g, heads);
    const fs::path dir = common.out;
    fs::create_directories(dir);

    auto manifest = masks.manifest();
    for (std::size_t i = 0; i < masks.masks.size(); ++i) {
      const auto& m = masks.masks[i];
      const std::string name = m.level ? "mask_" + std::to_string(i) + "_level" +
                                             std::to_string(*m.level) + ".csv"
                                       : "mask_" + std::to_string(i) + "_adjacency.csv";
      write_csv_mask(m.allow, dir / name);
      manifest["masks"][i]["file"] = name;
    }
    write_csv_matrix(hier_score(g, t), dir / "score.csv");
    manifest["score_file"] = "score.csv";
    write_json(manifest, dir / "manifest.json");
    out << "masks: " << masks.masks.size() << '\n'
        << "heads: " << heads << '\n'
        << "out: " << dir.string() << '\n';
    return kExitOk;
  }
};

// ---- forward ---------------------------------------------------------------

struct ForwardCmd {
  Common common;
  GraphArgs graph;
  std::string tree;
  std::string series;
  std::string weights;
  std::size_t window_start = 0;
  std::optional<std::size_t> window_length;
  std::optional<std::size_t> stride;
  std::string dump_attention;
  std::string save_weights_dir;
  bool assert_invariants = false;
  ModelConfig model;
  std::string kernel_sizes = "1,2,3,6";

  void add(CLI::App* app) {
    common.add(app, true);
    graph.add(app);
    app->add_option("--tree", tree, "Tree JSON; optimized with height heads-1 when omitted");
    app->add_option("--series", series, "Series array container")->required();
    app->add_option("--weights", weights, "Weights directory; seeded init when omitted");
    app->add_option("--window-start", window_start, "First step of the window");
    app->add_option("--window-length", window_length, "Window length T");
    app->add_option("--stride", stride, "Temporal filter stride");
    app->add_option("--layers", model.layers, "ST encoder layers");
    app->add_option("--hidden", model.hidden, "Hidden dimension d");
    app->add_option("--heads", model.heads, "Attention heads");
    app->add_option("--horizon", model.horizon, "Forecast horizon");
    app->add_option("--out-channels", model.out_channels, "Output channels");
    app->add_option("--temporal-channels", model.temporal_channels, "Temporal filter channels");
    app->add_option("--hops", model.hops, "Graph filter hops");
    app->add_option("--pe-dim", model.pe_dim, "Laplacian PE dimension");
    app->add_option("--kernel-sizes", kernel_sizes, "Comma-separated filter sizes");
    app->add_option("--dump-attention", dump_attention, "Directory for attention CSVs");
    app->add_option("--save-weights", save_weights_dir, "Write the weights used");
    app->add_flag("--assert", assert_invariants, "Check attention invariants");
  }

  int run(std::ostream& out) const {
    const Graph g = graph.load();
    const SeriesWindow full = load_series(series);
    const SeriesWindow window =
        slice_window(full, window_start, window_length.value_or(full.steps() - window_start));

    ModelConfig config = model;
    ModelWeights w;
    if (!weights.empty()) {
      auto loaded = load_weights(weights);
      config = loaded.first;
      w = std::move(loaded.second);
    } else {
      config.seed = common.seed;
      config.kernel_sizes = parse_sizes(kernel_sizes);
      config.in_channels = window.channels();
    }
    config.in_steps = window.steps();
    if (stride) config.stride = *stride;
    if (weights.empty()) {
      try {
        config.check();
      } catch (const std::invalid_argument& e) {
        throw InputError(std::string("model config: ") + e.what());
      }
      w = init_weights(config);
    }

    const EncodingTree t = [&] {
      if (!tree.empty()) return load_tree(tree);
      // Deepest tree the heads can still cover (H > L).
      MinimizeConfig cfg;
      cfg.max_height = std::max<std::size_t>(1, config.heads - 1);
      return minimize(g, cfg);
    }();

    ForwardOptions options;
    options.record_attention = !dump_attention.empty();
    options.check_invariants = assert_invariants;
    const auto r = forward(config, w, window, g, t, options);

    const fs::path out_path = common.out;
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    save_array(r.prediction, out_path);
    if (!save_weights_dir.empty()) save_weights(config, w, save_weights_dir);
    if (!dump_attention.empty()) dump(r, dump_attention);

    out << "hidden length: " << r.hidden_steps << '\n'
        << "masks: " << r.mask_count << '\n'
        << "prediction: " << r.prediction.dim0() << 'x' << r.prediction.dim1() << 'x'
        << r.prediction.dim2() << '\n'
        << "out: " << out_path.string() << '\n';
    return kExitOk;
  }

  static void dump(const ForwardResult& r, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t l = 0; l < r.attention.size(); ++l) {
      const auto& maps = r.attention[l];
      for (std::size_t h = 0; h < maps.temporal.size(); ++h)
        write_csv_matrix(maps.temporal[h], dir / ("layer" + std::to_string(l) + "_temporal_head" +
                                                  std::to_string(h) + ".csv"));
      for (std::size_t h = 0; h < maps.spatial.size(); ++h)
        write_csv_matrix(maps.spatial[h], dir / ("layer" + std::to_string(l) + "_spatial_head" +
                                                 std::to_string(h) + ".csv"));
    }
  }
};

// ---- synth -----------------------------------------------------------------

struct SynthCmd {
  Common common;
  std::string kind = "random-community";
  SynthParams params{.n = 30};
  std::size_t steps = 288;
  std::size_t channels = 3;
  double noise = 0.1;

  void add(CLI::App* app) {
    common.add(app, true);
    app->add_option("--kind", kind, "cycle, barbell-triangles, grid or random-community");
    app->add_option("--n", params.n, "Vertex count");
    app->add_option("--rows", params.rows, "Grid rows");
    app->add_option("--cols", params.cols, "Grid columns");
    app->add_option("--communities", params.communities, "Community count");
    app->add_option("--p-in", params.p_in, "Edge probability inside a community");
    app->add_option("--p-out", params.p_out, "Edge probability across communities");
    app->add_option("--steps", steps, "Series length");
    app->add_option("--channels", channels, "Series channels");
    app->add_option("--noise", noise, "Noise standard deviation");
  }

  int run(std::ostream& out) const {
    const Graph g = synth_graph(parse_synth_kind(kind), params, common.seed);
    if (steps == 0 || channels == 0) throw InputError("steps and channels must be positive");
    if (params.communities == 0) throw InputError("communities must be positive");
    const std::size_t n = g.size();
    const auto label = community_labels(n, std::min(params.communities, n));

    // A daily cycle per channel, shifted by community, plus Gaussian noise.
    // The graph draws come first, then the series reuses a derived stream.
    Rng rng(common.seed ^ 0x5eedULL);
    SeriesWindow w;
    w.data = Tensor3(steps, n, channels);
    w.interval_minutes = 5.0;
    w.start_timestamp = 1704067200;  // Monday 2024-01-01 00:00 UTC
    const double day = 24.0 * 60.0 / w.interval_minutes;
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t v = 0; v < n; ++v) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(label[v]) /
                             static_cast<double>(params.communities);
        for (std::size_t c = 0; c < channels; ++c) {
          const double angle =
              2.0 * std::numbers::pi * static_cast<double>(t) / day * static_cast<double>(c + 1) +
              phase;
          w.data(t, v, c) = std::sin(angle) + noise * rng.normal();
        }
      }

    const fs::path dir = common.out;
    fs::create_directories(dir);
    save_edge_list(g, dir / "graph.csv");
    save_series(w, dir / "series.bin");
    out << "graph: " << (dir / "graph.csv").string() << " (" << n << " vertices)\n"
        << "series: " << (dir / "series.bin").string() << " (" << steps << "x" << n << "x"
        << channels << ")\n";
    return kExitOk;
  }
};

// ---- oracle ----------------------------------------------------------------

struct OracleCmd {
  Common common;
  GraphArgs graph;

  void add(CLI::App* app) {
    common.add(app, false);
    graph.add(app);
  }

  int run(std::ostream& out) const {
    const Graph g = graph.load();
    if (g.size() > kExhaustiveMaxVertices)
      throw InputError("oracle refuses graphs with more than " +
                       std::to_string(kExhaustiveMaxVertices) + " vertices (got " +
                       std::to_string(g.size()) + ")");
    const auto oracle = exhaustive_min_2level(g);
    MinimizeConfig cfg;
    cfg.max_height = 2;
    const auto greedy = minimize_traced(g, cfg);
    const bool match = std::abs(greedy.entropy - oracle.entropy) <= 1e-9;
    out << "greedy: " << fixed9(greedy.entropy) << '\n'
        << "oracle: " << fixed9(oracle.entropy) << '\n'
        << "match: " << (match ? "yes" : "no") << '\n';
    if (!common.out.empty()) {
      nlohmann::json j{{"greedy", greedy.entropy},
                       {"oracle", oracle.entropy},
                       {"match", match},
                       {"partition", oracle.partition}};
      write_json(j, common.out);
    }
    return kExitOk;
  }
};

std::vector<std::string> with_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (!path || args.empty()) return args;
  std::vector<std::string> out{args.front()};
  for (auto& a : expand_config(*path)) out.push_back(std::move(a));
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

std::vector<std::string> expand_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  std::vector<std::string> args;
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty())
      throw InputError("config sections are not supported: " + item.fullname());
    if (item.name == "config") throw InputError("config files cannot include other configs");
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i)
      value += (i ? "," : "") + item.inputs[i];
    args.push_back("--" + item.name + "=" + value);
  }
  return args;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structural-entropy trees, hierarchy masks and spatio-temporal forward runs"};
  app.name("multispans-cli");
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SeCmd se;
  OptimizeCmd optimize;
  ArtifactsCmd artifacts;
  ForwardCmd forward_cmd;
  SynthCmd synth;
  OracleCmd oracle;
  auto* se_app = app.add_subcommand("se", "Structural entropy of a graph under a tree");
  auto* opt_app = app.add_subcommand("optimize", "Greedy structural-entropy minimization");
  auto* art_app = app.add_subcommand("artifacts", "Attention masks, hierarchy score, manifest");
  auto* fwd_app = app.add_subcommand("forward", "Seeded forward pass over a series window");
  auto* syn_app = app.add_subcommand("synth", "Synthetic graph and series fixtures");
  auto* ora_app = app.add_subcommand("oracle", "Greedy versus exhaustive two-level optimum");
  se.add(se_app);
  optimize.add(opt_app);
  artifacts.add(art_app);
  forward_cmd.add(fwd_app);
  synth.add(syn_app);
  oracle.add(ora_app);

  try {
    auto argv = with_config(args);
    std::reverse(argv.begin(), argv.end());
    try {
      app.parse(argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitInput;
    }
    if (se_app->parsed()) return se.run(out);
    if (opt_app->parsed()) return optimize.run(out);
    if (art_app->parsed()) return artifacts.run(out);
    if (fwd_app->parsed()) return forward_cmd.run(out);
    if (syn_app->parsed()) return synth.run(out);
    return oracle.run(out);
  } catch (const ConstraintError& e) {
    err << "constraint violated: " << e.what() << '\n';
    return kExitConstraint;
  } catch (const StageError& e) {
    err << "stage " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace multispans::cli
