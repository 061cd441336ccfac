#include "vfl/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace vfl {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> parts;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) fail("empty list element in key '" + key + "'");
    parts.push_back(item);
  }
  if (parts.empty()) fail("empty value for key '" + key + "'");
  return parts;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail("key '" + key + "' expects true/false, got '" + value + "'");
}

std::size_t to_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(value, &pos);
    if (pos != value.size() || v < 0) throw std::invalid_argument("");
    return static_cast<std::size_t>(v);
  } catch (...) {
    fail("key '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return static_cast<std::uint64_t>(v);
  } catch (...) {
    fail("key '" + key + "' expects an unsigned integer, got '" + value + "'");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    fail("key '" + key + "' expects a number, got '" + value + "'");
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_double_list(const std::vector<double>& vs) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ',';
    out += fmt_double(vs[i]);
  }
  return out;
}

const std::set<std::string> kKnownKeys = {
    "method",
    "dataset.kind", "dataset.export_csv",
    "dataset.mnist.dir", "dataset.mnist.limit",
    "dataset.synthetic.n", "dataset.synthetic.classes", "dataset.synthetic.informative_dims",
    "dataset.synthetic.noise_dims", "dataset.synthetic.noise_scale",
    "dataset.synthetic.mean_scale", "dataset.synthetic.n_val", "dataset.synthetic.n_test",
    "partition.kind", "partition.clients", "partition.image_rows", "partition.image_cols",
    "partition.channels", "partition.grid_rows", "partition.grid_cols", "partition.overlap",
    "partition.ranges",
    "model.hidden", "model.d_f",
    "train.batch", "train.epochs", "train.max_rounds", "train.tau", "train.rho", "train.eta",
    "train.head_lr", "train.server_lr", "train.momentum", "train.beta", "train.exact_inner",
    "eval.cadence", "eval.full_admm_loss", "eval.export_embeddings",
    "stop.drop_tol", "stop.patience",
    "dp.enabled", "dp.clip", "dp.sigma", "dp.target_epsilon", "dp.delta",
    "label_dp.enabled", "label_dp.lambda",
    "seeds", "threads", "out",
};

const std::set<std::string> kMethods = {"vimadmm", "vimadmm-j", "split",
                                        "vafl",    "fedbcd",    "fdml"};

void reject_key_for_method(const std::map<std::string, std::string>& kv, const std::string& key,
                           bool allowed, const std::string& method, const std::string& why) {
  if (!allowed && kv.count(key))
    fail("key '" + key + "' does not apply to method '" + method + "' (" + why + ")");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail("line " + std::to_string(lineno) + " has no '=': '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("line " + std::to_string(lineno) + " has an empty key");
    if (!kKnownKeys.count(key)) fail("unknown key '" + key + "'");
    if (kv.count(key)) fail("duplicate key '" + key + "'");
    if (value.empty()) fail("empty value for key '" + key + "'");
    kv[key] = value;
  }

  ExperimentConfig c;
  auto has = [&](const char* key) { return kv.count(key) != 0; };
  auto get = [&](const char* key) { return kv.at(key); };

  if (!has("method")) fail("missing required key 'method'");
  c.method = get("method");
  if (!kMethods.count(c.method)) fail("unknown method '" + c.method + "'");

  if (!has("dataset.kind")) fail("missing required key 'dataset.kind'");
  c.dataset_kind = get("dataset.kind");
  if (c.dataset_kind != "mnist" && c.dataset_kind != "synthetic")
    fail("dataset.kind must be 'mnist' or 'synthetic', got '" + c.dataset_kind + "'");

  bool mnist = c.dataset_kind == "mnist";
  for (const auto& [key, value] : kv) {
    (void)value;
    if (!mnist && (key.rfind("dataset.mnist.", 0) == 0 || key.rfind("partition.", 0) == 0))
      fail("key '" + key + "' applies only to dataset.kind=mnist");
    if (mnist && key.rfind("dataset.synthetic.", 0) == 0)
      fail("key '" + key + "' applies only to dataset.kind=synthetic");
  }

  if (mnist) {
    if (has("dataset.mnist.dir")) c.mnist_dir = get("dataset.mnist.dir");
    if (has("dataset.mnist.limit")) c.mnist_limit = to_size("dataset.mnist.limit",
                                                            get("dataset.mnist.limit"));
    if (has("partition.kind")) c.partition_kind = get("partition.kind");
    if (c.partition_kind != "row-bands" && c.partition_kind != "patches" &&
        c.partition_kind != "dim-ranges")
      fail("partition.kind must be row-bands, patches or dim-ranges, got '" + c.partition_kind +
           "'");
    if (has("partition.clients")) c.clients = to_size("partition.clients",
                                                      get("partition.clients"));
    if (c.clients == 0) fail("partition.clients must be positive");
    if (has("partition.image_rows"))
      c.image_rows = to_size("partition.image_rows", get("partition.image_rows"));
    if (has("partition.image_cols"))
      c.image_cols = to_size("partition.image_cols", get("partition.image_cols"));
    if (has("partition.channels"))
      c.image_channels = to_size("partition.channels", get("partition.channels"));
    if (has("partition.grid_rows"))
      c.grid_rows = to_size("partition.grid_rows", get("partition.grid_rows"));
    if (has("partition.grid_cols"))
      c.grid_cols = to_size("partition.grid_cols", get("partition.grid_cols"));
    if (has("partition.overlap")) c.overlap = to_size("partition.overlap",
                                                      get("partition.overlap"));
    if (has("partition.ranges")) {
      for (const std::string& part : split_list("partition.ranges", get("partition.ranges"))) {
        std::size_t dash = part.find('-');
        if (dash == std::string::npos)
          fail("partition.ranges entries must look like begin-end, got '" + part + "'");
        std::size_t a = to_size("partition.ranges", part.substr(0, dash));
        std::size_t b = to_size("partition.ranges", part.substr(dash + 1));
        if (b <= a) fail("partition.ranges entry '" + part + "' is empty or reversed");
        c.ranges.emplace_back(a, b);
      }
    }
    if (c.partition_kind == "patches" && (c.grid_rows == 0 || c.grid_cols == 0))
      fail("partition.kind=patches requires partition.grid_rows and partition.grid_cols");
    if (c.partition_kind == "dim-ranges" && c.ranges.empty())
      fail("partition.kind=dim-ranges requires partition.ranges");
  } else {
    if (!has("dataset.synthetic.n")) fail("missing required key 'dataset.synthetic.n'");
    c.synthetic.n = to_size("dataset.synthetic.n", get("dataset.synthetic.n"));
    if (c.synthetic.n == 0) fail("dataset.synthetic.n must be positive");
    if (has("dataset.synthetic.classes"))
      c.synthetic.classes = to_size("dataset.synthetic.classes", get("dataset.synthetic.classes"));
    if (c.synthetic.classes < 2) fail("dataset.synthetic.classes must be at least 2");
    if (has("dataset.synthetic.informative_dims"))
      for (const std::string& part :
           split_list("dataset.synthetic.informative_dims", get("dataset.synthetic.informative_dims")))
        c.synthetic.informative_dims.push_back(to_size("dataset.synthetic.informative_dims", part));
    if (has("dataset.synthetic.noise_dims"))
      for (const std::string& part :
           split_list("dataset.synthetic.noise_dims", get("dataset.synthetic.noise_dims")))
        c.synthetic.noise_dims.push_back(to_size("dataset.synthetic.noise_dims", part));
    if (c.synthetic.informative_dims.empty() && c.synthetic.noise_dims.empty())
      fail("synthetic dataset needs dataset.synthetic.informative_dims or noise_dims");
    for (std::size_t d : c.synthetic.informative_dims)
      if (d == 0) fail("dataset.synthetic.informative_dims entries must be positive");
    for (std::size_t d : c.synthetic.noise_dims)
      if (d == 0) fail("dataset.synthetic.noise_dims entries must be positive");
    if (has("dataset.synthetic.noise_scale"))
      c.synthetic.noise_scale = to_double("dataset.synthetic.noise_scale",
                                          get("dataset.synthetic.noise_scale"));
    if (c.synthetic.noise_scale < 0.0) fail("dataset.synthetic.noise_scale must be >= 0");
    if (has("dataset.synthetic.mean_scale"))
      c.synthetic.mean_scale = to_double("dataset.synthetic.mean_scale",
                                         get("dataset.synthetic.mean_scale"));
    if (c.synthetic.mean_scale <= 0.0) fail("dataset.synthetic.mean_scale must be positive");
    if (has("dataset.synthetic.n_val"))
      c.synthetic.n_val = to_size("dataset.synthetic.n_val", get("dataset.synthetic.n_val"));
    if (has("dataset.synthetic.n_test"))
      c.synthetic.n_test = to_size("dataset.synthetic.n_test", get("dataset.synthetic.n_test"));
  }
  if (has("dataset.export_csv")) c.export_csv = to_bool("dataset.export_csv",
                                                        get("dataset.export_csv"));

  if (has("model.hidden")) c.hidden = to_size("model.hidden", get("model.hidden"));
  if (has("model.d_f")) c.d_f = to_size("model.d_f", get("model.d_f"));
  if (c.d_f == 0) fail("model.d_f must be positive");

  if (has("train.batch")) c.batch = to_size("train.batch", get("train.batch"));
  if (c.batch == 0) fail("train.batch must be positive");
  if (has("train.epochs") && has("train.max_rounds"))
    fail("give train.epochs or train.max_rounds, not both");
  if (!has("train.epochs") && !has("train.max_rounds"))
    fail("missing required key 'train.epochs' or 'train.max_rounds'");
  if (has("train.epochs")) {
    c.epochs = to_size("train.epochs", get("train.epochs"));
    if (c.epochs == 0) fail("train.epochs must be positive");
  } else {
    c.max_rounds = to_size("train.max_rounds", get("train.max_rounds"));
    if (c.max_rounds == 0) fail("train.max_rounds must be positive");
  }

  reject_key_for_method(kv, "train.tau", c.uses_tau(), c.method,
                        "local step counts exist for the ADMM methods and FedBCD");
  reject_key_for_method(kv, "train.rho", c.is_admm(), c.method,
                        "the penalty factor exists for the ADMM methods");
  reject_key_for_method(kv, "train.head_lr", c.method == "vimadmm", c.method,
                        "server-side heads exist only for vimadmm");
  reject_key_for_method(kv, "train.server_lr", c.uses_server_lr(), c.method,
                        "only split, fedbcd and vafl have a server model");
  reject_key_for_method(kv, "train.exact_inner", c.method == "vimadmm", c.method,
                        "the exact inner-solve regime exists only for vimadmm");
  reject_key_for_method(kv, "eval.full_admm_loss", c.is_admm(), c.method,
                        "the augmented Lagrangian exists for the ADMM methods");

  if (has("train.tau")) {
    c.tau_list.clear();
    for (const std::string& part : split_list("train.tau", get("train.tau")))
      c.tau_list.push_back(to_size("train.tau", part));
  }
  if (has("train.rho")) {
    c.rho_list.clear();
    for (const std::string& part : split_list("train.rho", get("train.rho"))) {
      double rho = to_double("train.rho", part);
      if (rho <= 0.0) fail("train.rho values must be positive");
      c.rho_list.push_back(rho);
    }
  }
  if (has("train.eta")) {
    c.eta_list.clear();
    for (const std::string& part : split_list("train.eta", get("train.eta"))) {
      double eta = to_double("train.eta", part);
      if (eta <= 0.0) fail("train.eta values must be positive");
      c.eta_list.push_back(eta);
    }
  }
  for (const char* key : {"train.tau", "train.rho", "train.eta"}) {
    const auto dup = [&](auto list) {
      std::sort(list.begin(), list.end());
      return std::adjacent_find(list.begin(), list.end()) != list.end();
    };
    bool d = std::string(key) == "train.tau" ? dup(c.tau_list)
             : std::string(key) == "train.rho" ? dup(c.rho_list)
                                               : dup(c.eta_list);
    if (d) fail(std::string("duplicate values in '") + key + "' would collide in one grid");
  }

  if (has("train.head_lr")) {
    c.head_lr = to_double("train.head_lr", get("train.head_lr"));
    if (c.head_lr < 0.0) fail("train.head_lr must be >= 0");
  }
  if (has("train.server_lr")) {
    c.server_lr = to_double("train.server_lr", get("train.server_lr"));
    if (c.server_lr < 0.0) fail("train.server_lr must be >= 0");
  }
  if (has("train.momentum")) c.momentum = to_double("train.momentum", get("train.momentum"));
  if (c.momentum < 0.0 || c.momentum >= 1.0) fail("train.momentum must lie in [0, 1)");
  if (has("train.beta")) c.beta = to_double("train.beta", get("train.beta"));
  if (c.beta < 0.0) fail("train.beta must be >= 0");
  if (has("train.exact_inner"))
    c.exact_inner = to_bool("train.exact_inner", get("train.exact_inner"));
  if (c.exact_inner && c.hidden != 0)
    fail("train.exact_inner requires model.hidden=0 (linear extractors)");

  if (has("eval.cadence")) c.cadence = to_size("eval.cadence", get("eval.cadence"));
  if (has("eval.full_admm_loss"))
    c.full_admm_loss = to_bool("eval.full_admm_loss", get("eval.full_admm_loss"));
  if (has("eval.export_embeddings"))
    c.export_embeddings = to_bool("eval.export_embeddings", get("eval.export_embeddings"));

  if (has("stop.drop_tol")) c.drop_tol = to_double("stop.drop_tol", get("stop.drop_tol"));
  if (c.drop_tol < 0.0) fail("stop.drop_tol must be >= 0");
  if (has("stop.patience")) c.patience = to_size("stop.patience", get("stop.patience"));
  if (c.patience == 0) fail("stop.patience must be positive");

  if (has("dp.enabled")) c.dp.enabled = to_bool("dp.enabled", get("dp.enabled"));
  if (has("dp.clip")) c.dp.clip = to_double("dp.clip", get("dp.clip"));
  if (has("dp.sigma")) c.dp.sigma = to_double("dp.sigma", get("dp.sigma"));
  if (has("dp.target_epsilon"))
    c.dp.target_epsilon = to_double("dp.target_epsilon", get("dp.target_epsilon"));
  if (has("dp.delta")) c.dp.delta = to_double("dp.delta", get("dp.delta"));
  if (c.dp.enabled) {
    if (c.dp.clip <= 0.0) fail("dp.enabled requires dp.clip > 0");
    if (c.dp.sigma < 0.0) fail("dp.sigma must be >= 0");
    if (c.dp.target_epsilon < 0.0) fail("dp.target_epsilon must be >= 0");
    if (c.dp.sigma > 0.0 && c.dp.target_epsilon > 0.0)
      fail("give dp.sigma or dp.target_epsilon, not both");
    if (c.dp.sigma == 0.0 && c.dp.target_epsilon == 0.0)
      fail("dp.enabled requires dp.sigma > 0 or dp.target_epsilon > 0");
    if (c.dp.delta <= 0.0 || c.dp.delta >= 1.0) fail("dp.delta must lie in (0, 1)");
  } else {
    for (const char* key : {"dp.clip", "dp.sigma", "dp.target_epsilon", "dp.delta"})
      if (kv.count(key)) fail(std::string("key '") + key + "' requires dp.enabled=true");
  }

  if (has("label_dp.enabled"))
    c.label_dp.enabled = to_bool("label_dp.enabled", get("label_dp.enabled"));
  if (has("label_dp.lambda"))
    c.label_dp.lambda = to_double("label_dp.lambda", get("label_dp.lambda"));
  if (c.label_dp.enabled && c.label_dp.lambda <= 0.0)
    fail("label_dp.enabled requires label_dp.lambda > 0");
  if (!c.label_dp.enabled && kv.count("label_dp.lambda"))
    fail("key 'label_dp.lambda' requires label_dp.enabled=true");

  if (has("seeds")) {
    c.seeds.clear();
    for (const std::string& part : split_list("seeds", get("seeds")))
      c.seeds.push_back(to_u64("seeds", part));
    std::vector<std::uint64_t> sorted = c.seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail("duplicate values in 'seeds' would collide in one output dir");
  }
  if (has("threads")) c.threads = to_size("threads", get("threads"));
  if (has("out")) c.out = get("out");

  return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string effective_config_string(const ExperimentConfig& c) {
  std::string out;
  auto emit = [&](const std::string& key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  emit("method", c.method);
  emit("dataset.kind", c.dataset_kind);
  if (c.dataset_kind == "mnist") {
    if (!c.mnist_dir.empty()) emit("dataset.mnist.dir", c.mnist_dir);
    emit("dataset.mnist.limit", std::to_string(c.mnist_limit));
    emit("partition.kind", c.partition_kind);
    if (c.partition_kind == "row-bands") emit("partition.clients", std::to_string(c.clients));
    if (c.partition_kind == "patches") {
      emit("partition.grid_rows", std::to_string(c.grid_rows));
      emit("partition.grid_cols", std::to_string(c.grid_cols));
    }
    if (c.partition_kind == "dim-ranges") {
      std::string ranges;
      for (std::size_t i = 0; i < c.ranges.size(); ++i) {
        if (i) ranges += ',';
        ranges += std::to_string(c.ranges[i].first) + "-" + std::to_string(c.ranges[i].second);
      }
      emit("partition.ranges", ranges);
    }
    if (c.partition_kind != "dim-ranges") {
      emit("partition.image_rows", std::to_string(c.image_rows));
      emit("partition.image_cols", std::to_string(c.image_cols));
      emit("partition.channels", std::to_string(c.image_channels));
      emit("partition.overlap", std::to_string(c.overlap));
    }
  } else {
    emit("dataset.synthetic.n", std::to_string(c.synthetic.n));
    emit("dataset.synthetic.classes", std::to_string(c.synthetic.classes));
    if (!c.synthetic.informative_dims.empty()) {
      std::string dims;
      for (std::size_t i = 0; i < c.synthetic.informative_dims.size(); ++i) {
        if (i) dims += ',';
        dims += std::to_string(c.synthetic.informative_dims[i]);
      }
      emit("dataset.synthetic.informative_dims", dims);
    }
    if (!c.synthetic.noise_dims.empty()) {
      std::string dims;
      for (std::size_t i = 0; i < c.synthetic.noise_dims.size(); ++i) {
        if (i) dims += ',';
        dims += std::to_string(c.synthetic.noise_dims[i]);
      }
      emit("dataset.synthetic.noise_dims", dims);
    }
    emit("dataset.synthetic.noise_scale", fmt_double(c.synthetic.noise_scale));
    emit("dataset.synthetic.mean_scale", fmt_double(c.synthetic.mean_scale));
    emit("dataset.synthetic.n_val", std::to_string(c.synthetic.n_val));
    emit("dataset.synthetic.n_test", std::to_string(c.synthetic.n_test));
  }
  emit("dataset.export_csv", c.export_csv ? "true" : "false");
  emit("model.hidden", std::to_string(c.hidden));
  emit("model.d_f", std::to_string(c.d_f));
  emit("train.batch", std::to_string(c.batch));
  if (c.epochs > 0)
    emit("train.epochs", std::to_string(c.epochs));
  else
    emit("train.max_rounds", std::to_string(c.max_rounds));
  if (c.uses_tau()) {
    std::string taus;
    for (std::size_t i = 0; i < c.tau_list.size(); ++i) {
      if (i) taus += ',';
      taus += std::to_string(c.tau_list[i]);
    }
    emit("train.tau", taus);
  }
  if (c.is_admm()) emit("train.rho", fmt_double_list(c.rho_list));
  emit("train.eta", fmt_double_list(c.eta_list));
  if (c.method == "vimadmm") emit("train.head_lr", fmt_double(c.head_lr));
  if (c.uses_server_lr()) emit("train.server_lr", fmt_double(c.server_lr));
  emit("train.momentum", fmt_double(c.momentum));
  emit("train.beta", fmt_double(c.beta));
  if (c.method == "vimadmm") emit("train.exact_inner", c.exact_inner ? "true" : "false");
  emit("eval.cadence", std::to_string(c.cadence));
  if (c.is_admm()) emit("eval.full_admm_loss", c.full_admm_loss ? "true" : "false");
  emit("eval.export_embeddings", c.export_embeddings ? "true" : "false");
  emit("stop.drop_tol", fmt_double(c.drop_tol));
  emit("stop.patience", std::to_string(c.patience));
  emit("dp.enabled", c.dp.enabled ? "true" : "false");
  if (c.dp.enabled) {
    emit("dp.clip", fmt_double(c.dp.clip));
    if (c.dp.sigma > 0.0)
      emit("dp.sigma", fmt_double(c.dp.sigma));
    else
      emit("dp.target_epsilon", fmt_double(c.dp.target_epsilon));
    emit("dp.delta", fmt_double(c.dp.delta));
  }
  emit("label_dp.enabled", c.label_dp.enabled ? "true" : "false");
  if (c.label_dp.enabled) emit("label_dp.lambda", fmt_double(c.label_dp.lambda));
  {
    std::string seeds;
    for (std::size_t i = 0; i < c.seeds.size(); ++i) {
      if (i) seeds += ',';
      seeds += std::to_string(c.seeds[i]);
    }
    emit("seeds", seeds);
  }
  emit("threads", std::to_string(c.threads));
  if (!c.out.empty()) emit("out", c.out);
  return out;
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& config) {
  std::vector<GridPoint> points;
  bool multi = config.rho_list.size() > 1 || config.tau_list.size() > 1 ||
               config.eta_list.size() > 1;
  for (double rho : config.rho_list) {
    for (std::size_t tau : config.tau_list) {
      for (double eta : config.eta_list) {
        GridPoint p;
        p.config = config;
        p.config.rho_list = {rho};
        p.config.tau_list = {tau};
        p.config.eta_list = {eta};
        p.rho = rho;
        p.tau = tau;
        p.eta = eta;
        if (multi) {
          char buf[96];
          std::string label;
          if (config.rho_list.size() > 1) {
            std::snprintf(buf, sizeof(buf), "rho=%g", rho);
            label += buf;
          }
          if (config.tau_list.size() > 1) {
            if (!label.empty()) label += '_';
            std::snprintf(buf, sizeof(buf), "tau=%zu", tau);
            label += buf;
          }
          if (config.eta_list.size() > 1) {
            if (!label.empty()) label += '_';
            std::snprintf(buf, sizeof(buf), "eta=%g", eta);
            label += buf;
          }
          p.label = label;
        }
        points.push_back(std::move(p));
      }
    }
  }
  return points;
}

PartitionScheme partition_scheme(const ExperimentConfig& config) {
  if (config.dataset_kind != "mnist")
    throw std::logic_error("partition_scheme applies to MNIST configs only");
  PartitionScheme scheme;
  if (config.partition_kind == "row-bands")
    scheme.kind = PartitionKind::kRowBands;
  else if (config.partition_kind == "patches")
    scheme.kind = PartitionKind::kPatches;
  else
    scheme.kind = PartitionKind::kDimRanges;
  scheme.clients = config.clients;
  scheme.image_rows = config.image_rows;
  scheme.image_cols = config.image_cols;
  scheme.image_channels = config.image_channels;
  scheme.grid_rows = config.grid_rows;
  scheme.grid_cols = config.grid_cols;
  scheme.overlap = config.overlap;
  scheme.ranges = config.ranges;
  return scheme;
}

}  // namespace vfl
