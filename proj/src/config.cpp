#include "sdgf/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sdgf/errors.hpp"

namespace sdgf {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

const KeyValues& RunConfig::defaults() {
  static const KeyValues table{
      {"data.path", ""},
      {"data.source", "csv"},
      {"data.scale", "true"},
      {"model.lookback", "96"},
      {"model.horizon", "96"},
      {"model.variables", "0"},
      {"model.d_model", "64"},
      {"model.ablation", "none"},
      {"model.revin_eps", "1e-05"},
      {"model.pcc_eps", "1e-09"},
      {"wavelet.family", "haar"},
      {"wavelet.levels", "3"},
      {"wavelet.boundary", "circular"},
      {"gcn.alpha", "0.5"},
      {"gcn.depth", "2"},
      {"gcn.embed_dim", "16"},
      {"gcn.literal_hops", "false"},
      {"gcn.share_embeddings", "false"},
      {"static_graph.per_batch", "false"},
      {"temporal.blocks", "1"},
      {"temporal.branch_width", "0"},
      {"temporal.conv_axis", "nodes"},
      {"train.lr", "0.001"},
      {"train.epochs", "30"},
      {"train.patience", "5"},
      {"train.batch", "32"},
      {"train.seed", "2024"},
      {"train.clip", "5"},
      {"output.dir", "runs/default"},
      {"synth.variables", "4"},
      {"synth.rows", "2000"},
      {"synth.periods", "24,36,48,60"},
      {"synth.pairs", "0>1,2>3"},
      {"synth.lag", "12"},
      {"synth.noise", "0.3"},
      {"synth.seed", "7"},
  };
  return table;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

void RunConfig::apply(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    try {
      cfg.apply(body);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const auto& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a real number, got '" + s + "'");
  }
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const auto& s = get(key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "' expects a nonnegative integer, got '" + s + "'");
  }
  return v;
}

std::size_t RunConfig::get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

bool RunConfig::get_bool(const std::string& key) const {
  const auto& s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "' expects true/false, got '" + s + "'");
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << '=' << v << '\n';
  return os.str();
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config file " + path.string());
  out << serialize();
}

ModelConfig model_config(const RunConfig& cfg) {
  ModelConfig m;
  m.lookback = cfg.get_size("model.lookback");
  m.horizon = cfg.get_size("model.horizon");
  m.variables = cfg.get_size("model.variables");
  m.d_model = cfg.get_size("model.d_model");
  m.ablation = parse_ablation(cfg.get("model.ablation"));
  m.revin_eps = cfg.get_double("model.revin_eps");
  m.pcc_eps = cfg.get_double("model.pcc_eps");
  m.wavelet = cfg.get("wavelet.family");
  m.wavelet_levels = cfg.get_size("wavelet.levels");
  m.boundary = parse_boundary(cfg.get("wavelet.boundary"));
  m.gcn.alpha = cfg.get_double("gcn.alpha");
  m.gcn.depth = cfg.get_size("gcn.depth");
  m.gcn.literal = cfg.get_bool("gcn.literal_hops");
  m.embed_dim = cfg.get_size("gcn.embed_dim");
  m.share_embeddings = cfg.get_bool("gcn.share_embeddings");
  m.static_per_batch = cfg.get_bool("static_graph.per_batch");
  m.temporal_blocks = cfg.get_size("temporal.blocks");
  m.branch_width = cfg.get_size("temporal.branch_width");
  m.conv_axis = parse_conv_axis(cfg.get("temporal.conv_axis"));
  m.seed = cfg.get_u64("train.seed");
  m.gcn.validate();
  return m;
}

namespace {

std::string real_to_string(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void store_model_config(RunConfig& cfg, const ModelConfig& m) {
  cfg.set("model.lookback", std::to_string(m.lookback));
  cfg.set("model.horizon", std::to_string(m.horizon));
  cfg.set("model.variables", std::to_string(m.variables));
  cfg.set("model.d_model", std::to_string(m.d_model));
  cfg.set("model.ablation", to_string(m.ablation));
  cfg.set("model.revin_eps", real_to_string(m.revin_eps));
  cfg.set("model.pcc_eps", real_to_string(m.pcc_eps));
  cfg.set("wavelet.family", m.wavelet);
  cfg.set("wavelet.levels", std::to_string(m.wavelet_levels));
  cfg.set("wavelet.boundary", to_string(m.boundary));
  cfg.set("gcn.alpha", real_to_string(m.gcn.alpha));
  cfg.set("gcn.depth", std::to_string(m.gcn.depth));
  cfg.set("gcn.literal_hops", m.gcn.literal ? "true" : "false");
  cfg.set("gcn.embed_dim", std::to_string(m.embed_dim));
  cfg.set("gcn.share_embeddings", m.share_embeddings ? "true" : "false");
  cfg.set("static_graph.per_batch", m.static_per_batch ? "true" : "false");
  cfg.set("temporal.blocks", std::to_string(m.temporal_blocks));
  cfg.set("temporal.branch_width", std::to_string(m.branch_width));
  cfg.set("temporal.conv_axis", to_string(m.conv_axis));
  cfg.set("train.seed", std::to_string(m.seed));
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.lr = cfg.get_double("train.lr");
  t.epochs = cfg.get_size("train.epochs");
  t.patience = cfg.get_size("train.patience");
  t.batch = cfg.get_size("train.batch");
  t.seed = cfg.get_u64("train.seed");
  t.clip = cfg.get_double("train.clip");
  if (t.batch == 0) throw ConfigError("train.batch must be >= 1");
  if (t.lr < 0.0) throw ConfigError("train.lr must be nonnegative");
  if (t.clip < 0.0) throw ConfigError("train.clip must be nonnegative");
  return t;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto t = trim(item);
    if (t.empty()) continue;
    try {
      out.push_back(std::stod(t));
    } catch (const std::exception&) {
      throw ConfigError("expected a real number in list, got '" + t + "'");
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_pairs(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto t = trim(item);
    if (t.empty()) continue;
    const auto gt = t.find('>');
    if (gt == std::string::npos) throw ConfigError("expected src>dst pair, got '" + t + "'");
    try {
      out.emplace_back(std::stoul(t.substr(0, gt)), std::stoul(t.substr(gt + 1)));
    } catch (const std::exception&) {
      throw ConfigError("expected src>dst pair of indices, got '" + t + "'");
    }
  }
  return out;
}

}  // namespace sdgf
