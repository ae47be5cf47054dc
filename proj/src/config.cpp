#include "vwdsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace vwdsim {

namespace {

using nlohmann::json;

struct Parser {
  std::vector<ConfigError>& errors;

  void fail(const std::string& path, const std::string& msg) {
    errors.push_back({path, msg});
  }

  void check_keys(const json& obj, const std::string& path,
                  const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key()))
        fail(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  std::optional<double> number(const json& obj, const std::string& path,
                               const std::string& key) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      fail(join(path, key), "expected a number");
      return std::nullopt;
    }
    return v.get<double>();
  }

  std::optional<int64_t> integer(const json& obj, const std::string& path,
                                 const std::string& key) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
      fail(join(path, key), "expected an integer");
      return std::nullopt;
    }
    return v.get<int64_t>();
  }

  bool parse_channel(const json& cl, const std::string& path, GeChannelParams& ch) {
    if (!cl.contains("channel")) {
      fail(path + ".channel", "missing");
      return false;
    }
    const auto& c = cl.at("channel");
    if (!c.is_object()) {
      fail(path + ".channel", "expected an object with p and q");
      return false;
    }
    check_keys(c, path + ".channel", {"p", "q"});
    bool ok = true;
    for (const char* key : {"p", "q"}) {
      auto v = number(c, path + ".channel", key);
      if (!v) {
        if (!c.contains(key)) fail(path + ".channel." + key, "missing");
        ok = false;
        continue;
      }
      if (!(*v > 0.0) || !(*v <= 1.0)) {
        fail(path + ".channel." + std::string(key), "out of range (0, 1]");
        ok = false;
      }
      (key[0] == 'p' ? ch.p : ch.q) = *v;
    }
    if (ok && ch.p == 1.0 && ch.q == 1.0) {
      fail(path + ".channel", "p = q = 1 gives a deterministic alternating channel");
      ok = false;
    }
    return ok;
  }

  void parse_client(const json& cl, int idx, std::vector<ClientSpec>& out) {
    const std::string path = "clients[" + std::to_string(idx) + "]";
    if (!cl.is_object()) {
      fail(path, "expected an object");
      return;
    }
    ClientSpec spec;
    spec.id = "client" + std::to_string(idx);
    if (cl.contains("id")) {
      if (!cl.at("id").is_string())
        fail(path + ".id", "expected a string");
      else
        spec.id = cl.at("id").get<std::string>();
    }
    std::string kind;
    if (!cl.contains("kind") || !cl.at("kind").is_string()) {
      fail(path + ".kind", "missing or not a string (\"sensing\" or \"streaming\")");
      return;
    }
    kind = cl.at("kind").get<std::string>();
    if (kind == "sensing") {
      spec.kind = ClientKind::Sensing;
      check_keys(cl, path, {"id", "kind", "channel", "lambda", "alpha"});
      if (auto v = number(cl, path, "lambda")) {
        if (!(*v > 0.0) || !(*v <= 1.0))
          fail(path + ".lambda", "out of range (0, 1]");
        else
          spec.sensing.lambda = *v;
      }
      if (auto v = number(cl, path, "alpha")) {
        if (!(*v > 0.0))
          fail(path + ".alpha", "must be positive");
        else
          spec.sensing.alpha = *v;
      }
    } else if (kind == "streaming") {
      spec.kind = ClientKind::Streaming;
      check_keys(cl, path, {"id", "kind", "channel", "w", "ell", "beta", "gamma"});
      if (!cl.contains("w")) {
        fail(path + ".w", "missing frame period");
      } else if (auto v = integer(cl, path, "w")) {
        if (*v < 1)
          fail(path + ".w", "must be >= 1");
        else
          spec.streaming.w = static_cast<int>(*v);
      }
      if (!cl.contains("ell")) {
        fail(path + ".ell", "missing deadline (number of periods, or \"configurable\")");
      } else if (cl.at("ell").is_string()) {
        if (cl.at("ell").get<std::string>() != "configurable")
          fail(path + ".ell", "string value must be \"configurable\"");
        else
          spec.streaming.ell_configurable = true;
      } else if (auto v = number(cl, path, "ell")) {
        if (!(*v > 0.0))
          fail(path + ".ell", "must be positive");
        else
          spec.streaming.ell = *v;
      }
      if (auto v = number(cl, path, "beta")) {
        if (!(*v >= 0.0))
          fail(path + ".beta", "must be >= 0");
        else
          spec.streaming.beta = *v;
      }
      if (auto v = number(cl, path, "gamma")) {
        if (!(*v >= 0.0))
          fail(path + ".gamma", "must be >= 0");
        else
          spec.streaming.gamma = *v;
      }
      if (spec.streaming.ell_configurable &&
          (!(spec.streaming.gamma > 0.0) || !(spec.streaming.beta > 0.0)))
        fail(path + ".ell", "\"configurable\" needs beta > 0 and gamma > 0");
    } else {
      fail(path + ".kind", "must be \"sensing\" or \"streaming\"");
      return;
    }
    parse_channel(cl, path, spec.channel);
    out.push_back(std::move(spec));
  }
};

}  // namespace

ParseResult parse_config(const std::string& json_text) {
  ParseResult res;
  json root = json::parse(json_text, nullptr, false);
  if (root.is_discarded()) {
    res.errors.push_back({"", "not valid JSON"});
    return res;
  }
  if (!root.is_object()) {
    res.errors.push_back({"", "top level must be an object"});
    return res;
  }
  Parser p{res.errors};
  p.check_keys(root, "",
               {"clients", "policy", "horizon", "runs", "master_seed", "delta",
                "truncation_tol", "output_path", "threads", "trajectory_interval",
                "initial_state", "sweep"});

  ExperimentConfig cfg;

  if (!root.contains("clients") || !root.at("clients").is_array() ||
      root.at("clients").empty()) {
    p.fail("clients", "required non-empty array");
  } else {
    const auto& arr = root.at("clients");
    for (size_t i = 0; i < arr.size(); ++i)
      p.parse_client(arr[i], static_cast<int>(i), cfg.clients);
    for (size_t i = 0; i < cfg.clients.size(); ++i)
      for (size_t j = i + 1; j < cfg.clients.size(); ++j)
        if (cfg.clients[i].id == cfg.clients[j].id)
          p.fail("clients[" + std::to_string(j) + "].id",
                 "duplicate of clients[" + std::to_string(i) + "].id (\"" +
                     cfg.clients[i].id + "\")");
  }

  if (root.contains("policy")) {
    const auto& pol = root.at("policy");
    std::vector<std::string> ids;
    if (pol.is_string()) {
      ids.push_back(pol.get<std::string>());
    } else if (pol.is_array()) {
      for (size_t i = 0; i < pol.size(); ++i) {
        if (!pol[i].is_string())
          p.fail("policy[" + std::to_string(i) + "]", "expected a string");
        else
          ids.push_back(pol[i].get<std::string>());
      }
    } else {
      p.fail("policy", "expected a string or array of strings");
    }
    if (!ids.empty()) cfg.policies.clear();
    for (size_t i = 0; i < ids.size(); ++i) {
      auto parsed = parse_policy(ids[i]);
      if (!parsed)
        p.fail("policy[" + std::to_string(i) + "]", "unknown policy \"" + ids[i] + "\"");
      else
        cfg.policies.push_back(*parsed);
    }
  }

  if (!root.contains("horizon")) {
    p.fail("horizon", "missing");
  } else if (auto v = p.integer(root, "", "horizon")) {
    if (*v < 0)
      p.fail("horizon", "must be >= 0");
    else
      cfg.horizon = *v;
  }
  if (auto v = p.integer(root, "", "runs")) {
    if (*v < 1)
      p.fail("runs", "must be >= 1");
    else
      cfg.runs = static_cast<int>(*v);
  }
  if (root.contains("master_seed")) {
    const auto& v = root.at("master_seed");
    if (!v.is_number_unsigned() && !v.is_number_integer())
      p.fail("master_seed", "expected an integer");
    else
      cfg.master_seed = v.get<uint64_t>();
  }
  if (auto v = p.number(root, "", "delta")) {
    if (!(*v > 0.0))
      p.fail("delta", "must be positive");
    else
      cfg.delta = *v;
  }
  if (auto v = p.number(root, "", "truncation_tol")) {
    if (!(*v > 0.0))
      p.fail("truncation_tol", "must be positive");
    else
      cfg.truncation_tol = *v;
  }
  if (root.contains("output_path")) {
    if (!root.at("output_path").is_string())
      p.fail("output_path", "expected a string");
    else
      cfg.output_path = root.at("output_path").get<std::string>();
  }
  if (auto v = p.integer(root, "", "threads")) {
    if (*v < 0)
      p.fail("threads", "must be >= 0 (0 = hardware default)");
    else
      cfg.threads = static_cast<int>(*v);
  }
  if (auto v = p.integer(root, "", "trajectory_interval")) {
    if (*v < 0)
      p.fail("trajectory_interval", "must be >= 0 (0 disables sampling)");
    else
      cfg.trajectory_interval = *v;
  }
  if (root.contains("initial_state")) {
    const auto& v = root.at("initial_state");
    const std::string s = v.is_string() ? v.get<std::string>() : "";
    if (s == "stationary")
      cfg.init = InitialStateMode::Stationary;
    else if (s == "good")
      cfg.init = InitialStateMode::ForceGood;
    else if (s == "bad")
      cfg.init = InitialStateMode::ForceBad;
    else
      p.fail("initial_state", "must be \"stationary\", \"good\" or \"bad\"");
  }
  if (root.contains("sweep")) {
    const auto& sw = root.at("sweep");
    if (!sw.is_object()) {
      p.fail("sweep", "expected an object");
    } else {
      p.check_keys(sw, "sweep", {"parameter", "values"});
      SweepSpec spec;
      if (!sw.contains("parameter") || !sw.at("parameter").is_string()) {
        p.fail("sweep.parameter", "missing or not a string");
      } else {
        spec.parameter = sw.at("parameter").get<std::string>();
        if (spec.parameter != "p" && spec.parameter != "ell")
          p.fail("sweep.parameter", "must be \"p\" or \"ell\"");
      }
      if (!sw.contains("values") || !sw.at("values").is_array()) {
        p.fail("sweep.values", "missing or not an array");
      } else {
        const auto& vals = sw.at("values");
        for (size_t i = 0; i < vals.size(); ++i) {
          if (!vals[i].is_number())
            p.fail("sweep.values[" + std::to_string(i) + "]", "expected a number");
          else
            spec.values.push_back(vals[i].get<double>());
        }
      }
      cfg.sweep = std::move(spec);
    }
  }

  if (res.errors.empty()) res.config = std::move(cfg);
  return res;
}

ParseResult load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ParseResult res;
    res.errors.push_back({"", "cannot open config file: " + path});
    return res;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace vwdsim
