// skeva_cli: dataset generation, clustering runs, bound sweeps and benchmark
// sweeps. Structured results go to stdout, logs to stderr.
//
// Every subcommand builds one flat "effective config": built-in defaults,
// overridden by the --config JSON file, overridden by flags. Unknown keys are
// rejected. The effective config is written as the run manifest, and feeding
// a manifest back through --config replays the run.

#include "skeva/bounds.hpp"
#include "skeva/data.hpp"
#include "skeva/metrics.hpp"
#include "skeva/skeva.hpp"
#include "skeva/subspace.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace {

using json = nlohmann::json;
using namespace skeva;

enum class Kind { boolean, integer, unsigned_integer, real, text, int_list, real_list, text_list };

struct Key {
  std::string name;
  Kind kind;
  json fallback;  // null => required or "unset"
  std::string help;
};

using Schema = std::vector<Key>;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto t = detail::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

json parse_scalar(Kind kind, const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    switch (kind) {
      case Kind::boolean:
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        break;
      case Kind::integer: {
        const long long v = std::stoll(text, &used);
        if (used == text.size()) return v;
        break;
      }
      case Kind::unsigned_integer: {
        if (!text.empty() && text[0] == '-') break;
        const unsigned long long v = std::stoull(text, &used);
        if (used == text.size()) return v;
        break;
      }
      case Kind::real: {
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
        break;
      }
      default: return text;
    }
  } catch (const std::exception&) {
  }
  throw config_error("invalid value '" + text + "' for " + key);
}

json parse_flag(const Key& key, const std::string& text) {
  switch (key.kind) {
    case Kind::int_list:
    case Kind::real_list:
    case Kind::text_list: {
      const Kind elem = key.kind == Kind::int_list ? Kind::integer : (key.kind == Kind::real_list ? Kind::real : Kind::text);
      json arr = json::array();
      for (const auto& item : split_list(text)) arr.push_back(parse_scalar(elem, key.name, item));
      return arr;
    }
    default: return parse_scalar(key.kind, key.name, text);
  }
}

void check_type(const Key& key, const json& v) {
  if (v.is_null()) return;
  const auto fail = [&] { throw config_error("config key '" + key.name + "' has the wrong type"); };
  switch (key.kind) {
    case Kind::boolean: if (!v.is_boolean()) fail(); break;
    case Kind::integer: if (!v.is_number_integer()) fail(); break;
    case Kind::unsigned_integer: if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) fail(); break;
    case Kind::real: if (!v.is_number()) fail(); break;
    case Kind::text: if (!v.is_string()) fail(); break;
    case Kind::int_list:
      if (!v.is_array()) fail();
      for (const auto& e : v) if (!e.is_number_integer()) fail();
      break;
    case Kind::real_list:
      if (!v.is_array()) fail();
      for (const auto& e : v) if (!e.is_number()) fail();
      break;
    case Kind::text_list:
      if (!v.is_array()) fail();
      for (const auto& e : v) if (!e.is_string()) fail();
      break;
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw config_error("malformed JSON in " + path + ": " + e.what());
  }
}

/// Flags registered for one subcommand, merged later into the effective config.
class ConfigBuilder {
public:
  ConfigBuilder(CLI::App* app, Schema schema) : schema_(std::move(schema)) {
    app->add_option("--config", config_path_, "JSON config file (flat object)");
    for (const auto& key : schema_) {
      std::string flag = "--" + key.name;
      std::replace(flag.begin(), flag.end(), '_', '-');
      // Booleans are bare flags ("--adaptive") that also take "--adaptive=false".
      if (key.kind == Kind::boolean)
        app->add_flag(flag + "{true}", raw_[key.name], key.help);
      else
        app->add_option(flag, raw_[key.name], key.help);
    }
  }

  void alias(CLI::App* app, const std::string& flag, const std::string& key) {
    app->add_option(flag, raw_[key], "alias of --" + key);
  }

  json effective() const {
    json cfg = json::object();
    for (const auto& key : schema_) cfg[key.name] = key.fallback;
    if (!config_path_.empty()) {
      const json file = read_json_file(config_path_);
      if (!file.is_object()) throw config_error("config file must hold a JSON object");
      for (const auto& [k, v] : file.items()) {
        const Key* key = find(k);
        if (!key) throw config_error("unknown config key '" + k + "'");
        check_type(*key, v);
        cfg[k] = v;
      }
    }
    for (const auto& [name, text] : raw_) {
      if (text.empty()) continue;
      cfg[name] = parse_flag(*find(name), text);
    }
    return cfg;
  }

private:
  const Key* find(const std::string& name) const {
    for (const auto& k : schema_)
      if (k.name == name) return &k;
    return nullptr;
  }

  Schema schema_;
  std::string config_path_;
  std::map<std::string, std::string> raw_;
};

template <typename T>
T get(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (v.is_null()) throw config_error("missing required setting '" + key + "'");
  return v.get<T>();
}

template <typename T>
std::optional<T> get_opt(const json& cfg, const std::string& key) {
  const json& v = cfg.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<T>();
}

std::vector<Index> index_list(const json& v) {
  std::vector<Index> out;
  for (const auto& e : v) out.push_back(e.get<Index>());
  return out;
}

template <typename E>
E choose(const json& cfg, const std::string& key, const std::vector<std::pair<std::string, E>>& options) {
  const auto s = get<std::string>(cfg, key);
  for (const auto& [name, value] : options)
    if (name == s) return value;
  std::string names;
  for (const auto& [name, value] : options) names += (names.empty() ? "" : "|") + name;
  throw config_error("'" + key + "' must be one of " + names + ", got '" + s + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot write " + path);
  out << text;
}

int thread_count(const json& cfg) {
  const auto t = get<int>(cfg, "threads");
  require(t >= 0, "threads must be nonnegative");
  return t == 0 ? default_threads() : t;
}

// ---------------------------------------------------------------------------
// generate

const Schema kGenerateSchema = {
    {"kind", Kind::text, "subspaces", "subspaces | gmm"},
    {"ambient_dim", Kind::integer, 30, "ambient dimension D (subspaces)"},
    {"dims", Kind::int_list, json::array({6, 5, 3, 2, 2}), "subspace dimensions, comma separated"},
    {"points", Kind::int_list, json::array(), "points per subspace (overrides points_per_dim)"},
    {"points_per_dim", Kind::integer, 40, "points per subspace = points_per_dim * d_k"},
    {"noise_var", Kind::real, 0.1, "per-coordinate noise variance"},
    {"min_angle", Kind::real, 0.7853981633974483, "minimum principal angle (radians)"},
    {"centroid_offset", Kind::real, 0.0, "scale of random subspace offsets (0 = linear)"},
    {"max_attempts", Kind::integer, 10000, "basis rejection attempts"},
    {"gmm", Kind::text, nullptr, "GMM JSON file (gmm kind)"},
    {"count", Kind::integer, 480, "number of GMM draws (gmm kind)"},
    {"seed", Kind::unsigned_integer, 0, "random seed"},
    {"out", Kind::text, "dataset", "output prefix: PREFIX.data.csv, PREFIX.labels.csv, PREFIX.manifest.json"},
};

GmmModel load_gmm(const std::string& path) {
  const json j = read_json_file(path);
  GmmModel g;
  try {
    const auto w = j.at("weights").get<std::vector<double>>();
    g.weights = Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size()));
    for (const auto& m : j.at("means")) {
      const auto v = m.is_array() ? m.get<std::vector<double>>() : std::vector<double>{m.get<double>()};
      g.means.emplace_back(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
    }
    for (const auto& c : j.at("covariances")) {
      if (c.is_number()) {
        g.covariances.push_back(Matrix::Constant(1, 1, c.get<double>()));
        continue;
      }
      const auto rows = c.get<std::vector<std::vector<double>>>();
      Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        require(rows[r].size() == rows.size(), "GMM covariance must be square");
        for (std::size_t q = 0; q < rows.size(); ++q) m(static_cast<Index>(r), static_cast<Index>(q)) = rows[r][q];
      }
      g.covariances.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw config_error("malformed GMM file " + path + ": " + e.what());
  }
  // Weights given as counts are normalized.
  if (g.weights.size() > 0 && g.weights.sum() > 0) g.weights /= g.weights.sum();
  g.validate();
  return g;
}

int cmd_generate(const json& cfg) {
  const auto out = get<std::string>(cfg, "out");
  const auto seed = get<std::uint64_t>(cfg, "seed");
  const auto kind = get<std::string>(cfg, "kind");
  LabeledDataset ds;
  if (kind == "subspaces") {
    SubspaceDatasetParams p;
    p.ambient_dim = get<Index>(cfg, "ambient_dim");
    p.subspace_dims = index_list(cfg.at("dims"));
    p.points_per_subspace = index_list(cfg.at("points"));
    if (p.points_per_subspace.empty())
      for (Index d : p.subspace_dims) p.points_per_subspace.push_back(get<Index>(cfg, "points_per_dim") * d);
    p.noise_var = get<double>(cfg, "noise_var");
    p.min_angle = get<double>(cfg, "min_angle");
    p.centroid_offset = get<double>(cfg, "centroid_offset");
    p.max_attempts = get<int>(cfg, "max_attempts");
    p.seed = seed;
    ds = generate_subspace_dataset(p).dataset;
  } else if (kind == "gmm") {
    const GmmModel g = load_gmm(get<std::string>(cfg, "gmm"));
    Labels comp;
    ds.data = sample_gmm(g, get<Index>(cfg, "count"), seed, &comp);
    ds.labels = std::move(comp);
    ds.clusters = static_cast<int>(g.components());
  } else {
    throw config_error("kind must be subspaces or gmm");
  }
  save_csv(ds.data.matrix(), out + ".data.csv");
  save_labels(ds.labels, out + ".labels.csv");
  write_text(out + ".manifest.json", cfg.dump(2) + "\n");
  std::cerr << "wrote " << ds.data.size() << " points in D=" << ds.data.dim() << " to " << out << ".data.csv\n";
  json summary = {{"data", out + ".data.csv"}, {"labels", out + ".labels.csv"},
                  {"manifest", out + ".manifest.json"}, {"N", ds.data.size()}, {"D", ds.data.dim()},
                  {"K", ds.clusters}};
  std::cout << summary.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// cluster

Schema cluster_schema() {
  return {
      {"data", Kind::text, nullptr, "data CSV, one datum per row"},
      {"header", Kind::boolean, false, "data CSV has a header row"},
      {"labels", Kind::text, nullptr, "ground-truth labels CSV (enables accuracy / NMI)"},
      {"out", Kind::text, nullptr, "write predicted labels here and the manifest to OUT.manifest.json"},
      {"algo", Kind::text, "skeva-sc", "skeva-sc | sssc | ssc | kss | kmeans"},
      {"k", Kind::integer, nullptr, "number of clusters K"},
      {"n", Kind::integer, nullptr, "sketch size"},
      {"nprime", Kind::integer, nullptr, "validation size n'"},
      {"rmax", Kind::integer, 50, "number of draws R_max"},
      {"adaptive", Kind::boolean, false, "choose the number of draws on the fly"},
      {"p", Kind::real, 0.99, "success probability (adaptive)"},
      {"q", Kind::real, 0.01, "overestimate failure probability (adaptive)"},
      {"r0", Kind::real, 3.0, "minimum number of draws R0 (adaptive)"},
      {"hard_cap", Kind::integer, 1000, "maximum number of draws (adaptive)"},
      {"lambda", Kind::real, nullptr, "SSC regularization weight (required for SSC)"},
      {"c_const", Kind::real, 1e-2, "bandwidth constant C"},
      {"h_ratio", Kind::real, 1.0, "H = h_ratio * h^2(C,n) I"},
      {"h0_ratio", Kind::real, 0.25, "H0 = h0_ratio * h^2(C,n) I"},
      {"hprime_ratio", Kind::real, 1.0, "H' = hprime_ratio * h^2(C,n') I"},
      {"divergence", Kind::text, "ise", "ise | cs"},
      {"backend", Kind::text, "ssc", "skeva-sc sketch clustering: ssc | kmeans | kss"},
      {"dims", Kind::int_list, json::array(), "subspace dimensions (one value or one per cluster)"},
      {"policy", Kind::text, "automatic", "out-of-sample rule: automatic | closest | residual"},
      {"delta0", Kind::real, nullptr, "initial gate threshold (unset = -inf)"},
      {"update_threshold", Kind::boolean, true, "raise the gate threshold as scores improve"},
      {"score", Kind::text, "inverse", "score function: inverse | negative | exp"},
      {"reference", Kind::text, "sketch", "unimodal reference center: sketch | dataset"},
      {"fixed_validation", Kind::boolean, false, "reuse one validation draw for all sketches"},
      {"admm_rho", Kind::real, 0.0, "ADMM penalty (0 = automatic)"},
      {"admm_max_iter", Kind::integer, 2000, "ADMM iteration cap"},
      {"admm_tol", Kind::real, 1e-7, "ADMM residual tolerance"},
      {"max_iter", Kind::integer, 300, "k-means / K-subspaces iteration cap"},
      {"seed", Kind::unsigned_integer, 0, "random seed"},
      {"threads", Kind::integer, 0, "worker threads (0 = available cores)"},
  };
}

struct ClusterRun {
  json result;
  Labels labels;
};

bool ssc_needed(const std::string& algo, const std::string& backend) {
  return algo == "ssc" || algo == "sssc" || (algo == "skeva-sc" && backend == "ssc");
}

/// One clustering run on loaded data. Wall time excludes data loading.
ClusterRun run_cluster(const Matrix& x, const Labels* truth, const json& cfg, int threads) {
  const auto algo = get<std::string>(cfg, "algo");
  const auto backend_name = get<std::string>(cfg, "backend");
  const int k = get<int>(cfg, "k");
  const auto seed = get<std::uint64_t>(cfg, "seed");
  require(k >= 1 && k <= x.cols(), "k must lie in [1, N]");

  SketchClusteringParams sp;
  sp.clusters = k;
  sp.backend = choose<Backend>(cfg, "backend", {{"ssc", Backend::ssc}, {"kmeans", Backend::kmeans}, {"kss", Backend::k_subspaces}});
  if (ssc_needed(algo, backend_name)) {
    if (cfg.at("lambda").is_null()) throw config_error("--lambda is required for SSC (no default)");
    sp.lambda = get<double>(cfg, "lambda");
    require(sp.lambda > 0, "lambda must be positive");
  }
  sp.admm.rho = get<double>(cfg, "admm_rho");
  sp.admm.max_iter = get<int>(cfg, "admm_max_iter");
  sp.admm.tol = get<double>(cfg, "admm_tol");
  sp.dims = index_list(cfg.at("dims"));
  sp.policy = choose<OutOfSamplePolicy>(cfg, "policy", {{"automatic", OutOfSamplePolicy::automatic},
                                                        {"closest", OutOfSamplePolicy::closest_subspace},
                                                        {"residual", OutOfSamplePolicy::residual_regression}});
  sp.seed = derive_seed(seed, 7);
  sp.max_iter = get<int>(cfg, "max_iter");

  json res = json::object();
  res["algorithm"] = algo;
  Labels labels;
  double wall = 0.0;
  if (algo == "skeva-sc") {
    SkevaConfig sc;
    sc.n = get<Index>(cfg, "n");
    sc.n_prime = get<Index>(cfg, "nprime");
    sc.r_max = get<int>(cfg, "rmax");
    sc.divergence = choose<Divergence>(cfg, "divergence", {{"ise", Divergence::ise}, {"cs", Divergence::cs}});
    sc.c_const = get<double>(cfg, "c_const");
    sc.h_ratio = get<double>(cfg, "h_ratio");
    sc.h0_ratio = get<double>(cfg, "h0_ratio");
    sc.hprime_ratio = get<double>(cfg, "hprime_ratio");
    sc.score = choose<ScoreFunction>(cfg, "score", {{"inverse", ScoreFunction::inverse},
                                                    {"negative", ScoreFunction::negative},
                                                    {"exp", ScoreFunction::exp_negative}});
    sc.reference = choose<ReferenceCenter>(cfg, "reference", {{"sketch", ReferenceCenter::sketch_mean},
                                                              {"dataset", ReferenceCenter::dataset_mean}});
    sc.seed = seed;
    sc.delta0_init = get_opt<double>(cfg, "delta0").value_or(-kInf);
    sc.update_threshold = get<bool>(cfg, "update_threshold");
    sc.fixed_validation = get<bool>(cfg, "fixed_validation");
    sc.threads = threads;
    sc.validate(x.cols());
    if (get<bool>(cfg, "adaptive")) {
      AdaptiveParams ap;
      ap.p = get<double>(cfg, "p");
      ap.q = get<double>(cfg, "q");
      ap.r0 = get<double>(cfg, "r0");
      ap.hard_cap = get<int>(cfg, "hard_cap");
      SkevaAdaptiveResult out;
      wall = timed([&] { out = run_skeva_adaptive(x, sc, sp, ap); });
      labels = out.run.assignment.labels;
      res["r_star"] = out.run.r_star;
      res["draws_gated"] = out.run.gated;
      res["draws"] = out.run.draws.size();
      res["r_hat"] = out.trace.r_hat.back();
    } else {
      SkevaResult out;
      wall = timed([&] { out = run_skeva(x, sc, sp); });
      labels = out.assignment.labels;
      res["r_star"] = out.r_star;
      res["draws_gated"] = out.gated;
      res["draws"] = out.draws.size();
    }
    res["n"] = sc.n;
    res["n_prime"] = sc.n_prime;
  } else if (algo == "sssc") {
    const auto n = get<Index>(cfg, "n");
    wall = timed([&] { labels = sssc_cluster(x, k, n, sp.lambda, sp.seed, sp.dims, sp.policy, sp.admm).labels; });
    res["n"] = n;
  } else if (algo == "ssc") {
    wall = timed([&] { labels = ssc_cluster(x, k, sp.lambda, sp.seed, sp.admm).labels; });
    res["n"] = x.cols();
  } else if (algo == "kss") {
    require(!sp.dims.empty(), "kss needs --dims");
    wall = timed([&] { labels = k_subspaces(x, k, sp.dims, sp.seed, sp.max_iter).assignment.labels; });
    res["n"] = x.cols();
  } else if (algo == "kmeans") {
    wall = timed([&] { labels = kmeans(x, k, sp.seed, sp.max_iter).assignment.labels; });
    res["n"] = x.cols();
  } else {
    throw config_error("algo must be skeva-sc, sssc, ssc, kss or kmeans");
  }
  res["wall_time_s"] = wall;
  res["accuracy"] = nullptr;
  res["nmi"] = nullptr;
  if (truth) {
    res["accuracy"] = accuracy(labels, *truth);
    res["nmi"] = nmi(labels, *truth);
  }
  res["seed"] = seed;
  res["N"] = x.cols();
  res["K"] = k;
  return {std::move(res), std::move(labels)};
}

struct LoadedData {
  DataMatrix data;
  std::optional<Labels> truth;
};

LoadedData load_inputs(const json& cfg) {
  LoadedData d{load_csv(get<std::string>(cfg, "data"), get<bool>(cfg, "header")), std::nullopt};
  if (auto lp = get_opt<std::string>(cfg, "labels")) {
    d.truth = load_labels(*lp);
    require(static_cast<Index>(d.truth->size()) == d.data.size(), "labels file length differs from the data");
  }
  std::cerr << "loaded " << d.data.size() << " points in D=" << d.data.dim() << "\n";
  return d;
}

int cmd_cluster(const json& cfg) {
  const LoadedData in = load_inputs(cfg);
  const ClusterRun run = run_cluster(in.data.matrix(), in.truth ? &*in.truth : nullptr, cfg, thread_count(cfg));
  if (auto out = get_opt<std::string>(cfg, "out")) {
    save_labels(run.labels, *out);
    write_text(*out + ".manifest.json", cfg.dump(2) + "\n");
  }
  std::cout << run.result.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bound

const Schema kBoundSchema = {
    {"gmm", Kind::text, nullptr, "GMM JSON file {weights, means, covariances}"},
    {"n_grid", Kind::int_list, json::array({10, 30, 60, 90, 120, 150, 180, 210, 240, 270, 300, 330, 360, 390, 420, 450, 480}),
     "sketch sizes, comma separated"},
    {"p", Kind::real, 0.99, "success probability"},
    {"q", Kind::real, 0.01, "overestimate failure probability"},
    {"c_const", Kind::real, 1e-2, "bandwidth constant C"},
    {"h0_ratio", Kind::real, 0.25, "H0 = h0_ratio * h^2(C,n) I"},
    {"out", Kind::text, nullptr, "CSV path (default stdout)"},
};

int cmd_bound(const json& cfg) {
  const GmmModel g = load_gmm(get<std::string>(cfg, "gmm"));
  std::ostringstream csv;
  csv << "n,h,expected_ise_f0,expected_ise_f,delta_prime,theta1,theta2,rho_hat,trivial\n";
  for (const Index n : index_list(cfg.at("n_grid"))) {
    require(n >= 1, "n_grid entries must be positive");
    const BoundReport r = rho_hat_rule(g, get<double>(cfg, "c_const"), get<double>(cfg, "h0_ratio"), n,
                                       get<double>(cfg, "p"), get<double>(cfg, "q"));
    csv << n << ',' << detail::format_double(r.h) << ',' << detail::format_double(r.expected_ise_f0) << ','
        << detail::format_double(r.expected_ise_f) << ',' << detail::format_double(r.delta_prime) << ','
        << detail::format_double(r.theta1) << ',' << detail::format_double(r.theta2) << ','
        << detail::format_double(r.rho_hat) << ',' << (r.trivial ? 1 : 0) << '\n';
  }
  if (auto out = get_opt<std::string>(cfg, "out")) {
    write_text(*out, csv.str());
    write_text(*out + ".manifest.json", cfg.dump(2) + "\n");
  } else {
    std::cout << csv.str();
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bench

Schema bench_schema() {
  Schema s = cluster_schema();
  for (auto& k : s) {
    if (k.name == "out") k.help = "results CSV (required; completed rows are skipped on resume)";
    if (k.name == "seed") k.help = "base seed; run i uses seed + i";
  }
  s.push_back({"algos", Kind::text_list, json::array({"skeva-sc", "sssc"}), "algorithms, comma separated"});
  s.push_back({"n_grid", Kind::int_list, json::array(), "sketch sizes, comma separated"});
  s.push_back({"runs", Kind::integer, 10, "independent runs per (algorithm, n)"});
  return s;
}

const char* kBenchHeader = "algorithm,n,seed,accuracy,nmi,wall_time_s,r_star,draws_gated";

std::string bench_row(const json& r, Index n, std::uint64_t seed) {
  const auto num = [](const json& v) { return v.is_null() ? std::string() : detail::format_double(v.get<double>()); };
  const auto opt_int = [&](const char* key) { return r.contains(key) ? std::to_string(r.at(key).get<long long>()) : std::string(); };
  std::ostringstream row;
  row << r.at("algorithm").get<std::string>() << ',' << n << ',' << seed << ',' << num(r.at("accuracy")) << ','
      << num(r.at("nmi")) << ',' << num(r.at("wall_time_s")) << ',' << opt_int("r_star") << ','
      << opt_int("draws_gated");
  return row.str();
}

int cmd_bench(const json& cfg) {
  const auto out = get_opt<std::string>(cfg, "out");
  if (!out) throw config_error("bench needs --out for resumable results");
  const std::string manifest_path = *out + ".manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    if (read_json_file(manifest_path) != cfg)
      throw config_error(manifest_path + " holds a different configuration; use a new --out");
  } else {
    write_text(manifest_path, cfg.dump(2) + "\n");
  }

  std::set<std::string> done;
  if (std::filesystem::exists(*out)) {
    std::ifstream in(*out);
    std::string line;
    std::getline(in, line);
    if (line != kBenchHeader) throw config_error(*out + " is not a bench results file");
    while (std::getline(in, line)) {
      const auto cells = split_list(line);
      if (cells.size() >= 3) done.insert(cells[0] + "," + cells[1] + "," + cells[2]);
    }
  } else {
    write_text(*out, std::string(kBenchHeader) + "\n");
  }

  const LoadedData in = load_inputs(cfg);
  struct Job {
    std::string algo;
    Index n;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  const auto base = get<std::uint64_t>(cfg, "seed");
  auto grid = index_list(cfg.at("n_grid"));
  if (grid.empty()) grid.push_back(get<Index>(cfg, "n"));
  for (const auto& algo : cfg.at("algos"))
    for (Index n : grid)
      for (int i = 0; i < get<int>(cfg, "runs"); ++i) {
        Job j{algo.get<std::string>(), n, base + static_cast<std::uint64_t>(i)};
        if (!done.count(j.algo + "," + std::to_string(j.n) + "," + std::to_string(j.seed))) jobs.push_back(j);
      }
  std::cerr << jobs.size() << " runs to do, " << done.size() << " already recorded\n";

  // Runs are processed in batches of `threads`; each run is single-threaded
  // and the batch is appended in job order.
  const int threads = thread_count(cfg);
  std::ofstream csv(*out, std::ios::app);
  for (std::size_t start = 0; start < jobs.size(); start += static_cast<std::size_t>(threads)) {
    const std::size_t stop = std::min(jobs.size(), start + static_cast<std::size_t>(threads));
    std::vector<std::string> rows(stop - start);
    parallel_for(rows.size(), threads, [&](std::size_t i) {
      const Job& j = jobs[start + i];
      json run_cfg = cfg;
      run_cfg["algo"] = j.algo;
      run_cfg["n"] = j.n;
      run_cfg["seed"] = j.seed;
      const ClusterRun r = run_cluster(in.data.matrix(), in.truth ? &*in.truth : nullptr, run_cfg, 1);
      rows[i] = bench_row(r.result, j.n, j.seed);
    });
    for (const auto& row : rows) csv << row << '\n';
    csv.flush();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skeva_cli: sketch-and-validate subspace clustering, bounds and benchmarks"};
  app.require_subcommand(1);
  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset");
  auto* clu = app.add_subcommand("cluster", "cluster a dataset");
  auto* bnd = app.add_subcommand("bound", "sweep the draw-count bound over sketch sizes");
  auto* bch = app.add_subcommand("bench", "benchmark sweep over algorithms, sketch sizes and seeds");
  ConfigBuilder gen_cfg(gen, kGenerateSchema);
  ConfigBuilder clu_cfg(clu, cluster_schema());
  ConfigBuilder bnd_cfg(bnd, kBoundSchema);
  ConfigBuilder bch_cfg(bch, bench_schema());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (gen->parsed()) return cmd_generate(gen_cfg.effective());
    if (clu->parsed()) return cmd_cluster(clu_cfg.effective());
    if (bnd->parsed()) return cmd_bound(bnd_cfg.effective());
    if (bch->parsed()) return cmd_bench(bch_cfg.effective());
  } catch (const numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
