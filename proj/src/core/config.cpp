#include "sigcl/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "sigcl/errors.hpp"

namespace sigcl::config {
namespace {

using pipeline::RunConfig;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& what) {
  throw InvalidArgument("config key '" + key + "': cannot parse '" + value + "' as " + what);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a number");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  bad(key, v, "a boolean");
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

struct Entry {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

template <typename T>
Entry number(T RunConfig::*field) {
  return {[field](const RunConfig& c) { return fmt(c.*field); },
          [field](RunConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, double>) c.*field = to_double(k, v);
            else if constexpr (std::is_same_v<T, bool>) c.*field = to_bool(k, v);
            else c.*field = static_cast<T>(to_size(k, v));
          }};
}

// Accessor-based entry for nested fields.
template <typename T, typename F>
Entry nested(F access) {
  return {[access](const RunConfig& c) { return fmt(static_cast<T>(access(const_cast<RunConfig&>(c)))); },
          [access](RunConfig& c, const std::string& k, const std::string& v) {
            if constexpr (std::is_same_v<T, double>) access(c) = to_double(k, v);
            else if constexpr (std::is_same_v<T, bool>) access(c) = to_bool(k, v);
            else access(c) = to_size(k, v);
          }};
}

const char* kDomainKeys[] = {"time", "freq", "constellation"};

const std::map<std::string, Entry>& registry() {
  static const std::map<std::string, Entry> table = [] {
    std::map<std::string, Entry> t;
    t["seed"] = {[](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_size(k, v); }};
    t["lr"] = number(&RunConfig::lr);
    t["e_cl"] = number(&RunConfig::e_cl);
    t["e_rl"] = number(&RunConfig::e_rl);
    t["finetune_epochs"] = number(&RunConfig::finetune_epochs);
    t["batch_size"] = number(&RunConfig::batch_size);
    t["finetune_batch_size"] = number(&RunConfig::finetune_batch_size);
    t["shots"] = number(&RunConfig::shots);
    t["base_fraction"] = number(&RunConfig::base_fraction);
    t["probe_batch_size"] = number(&RunConfig::probe_batch_size);
    t["rl"] = number(&RunConfig::rl);
    t["fixed_action"] = number(&RunConfig::fixed_action);
    t["kmeans.restarts"] = number(&RunConfig::kmeans_restarts);
    t["kmeans.max_iters"] = number(&RunConfig::kmeans_max_iters);

    t["tau"] = nested<double>([](RunConfig& c) -> double& { return c.loss.tau; });
    t["lambda"] = nested<double>([](RunConfig& c) -> double& { return c.loss.lambda; });
    t["loss.intra"] = nested<bool>([](RunConfig& c) -> bool& { return c.loss.terms.intra; });
    t["loss.inter_orig"] = nested<bool>([](RunConfig& c) -> bool& { return c.loss.terms.inter_orig; });
    t["loss.inter_aug"] = nested<bool>([](RunConfig& c) -> bool& { return c.loss.terms.inter_aug; });
    t["loss.inter_cross"] = nested<bool>([](RunConfig& c) -> bool& { return c.loss.terms.inter_cross; });
    t["loss.simclr_denominator"] = nested<bool>([](RunConfig& c) -> bool& { return c.loss.simclr_denominator; });

    t["aug.sigma_max"] = nested<double>([](RunConfig& c) -> double& { return c.aug.sigma_max; });
    t["aug.shift_frac_max"] = nested<double>([](RunConfig& c) -> double& { return c.aug.shift_frac_max; });
    t["aug.scale_min"] = nested<double>([](RunConfig& c) -> double& { return c.aug.scale_min; });
    t["aug.scale_max"] = nested<double>([](RunConfig& c) -> double& { return c.aug.scale_max; });
    t["aug.dropout_p_max"] = nested<double>([](RunConfig& c) -> double& { return c.aug.dropout_p_max; });
    t["aug.gamma_min"] = nested<double>([](RunConfig& c) -> double& { return c.aug.gamma_min; });
    t["aug.gamma_max"] = nested<double>([](RunConfig& c) -> double& { return c.aug.gamma_max; });
    t["aug.enabled"] = {
        [](const RunConfig& c) {
          std::vector<std::string> on;
          for (std::size_t k = 0; k < augment::kNumAugKinds; ++k)
            if (c.aug_enabled[k]) on.push_back(augment::aug_name(static_cast<augment::AugKind>(k)));
          return join(on);
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          augment::AugMask m{};
          for (const auto& item : split_list(v)) {
            bool found = false;
            for (std::size_t i = 0; i < augment::kNumAugKinds; ++i)
              if (item == augment::aug_name(static_cast<augment::AugKind>(i))) m[i] = found = true;
            if (!found) bad(k, item, "an augmentation name (noise, shift, scale, dropout, interpolate)");
          }
          c.aug_enabled = m;
        }};

    t["domains"] = {
        [](const RunConfig& c) {
          std::string s;
          for (std::size_t d = 0; d < domains::kNumDomains; ++d)
            if (c.domains[d]) s += domains::domain_tag(static_cast<domains::Domain>(d));
          return s;
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          pipeline::DomainMask m{};
          for (char ch : v) {
            if (ch == 'T' || ch == 't') m[0] = true;
            else if (ch == 'F' || ch == 'f') m[1] = true;
            else if (ch == 'C' || ch == 'c') m[2] = true;
            else if (ch != ',' && ch != '+' && ch != ' ') bad(k, v, "a domain set such as TFC");
          }
          c.domains = m;
        }};

    t["sac.gamma"] = nested<double>([](RunConfig& c) -> double& { return c.sac.gamma; });
    t["sac.entropy_alpha"] = nested<double>([](RunConfig& c) -> double& { return c.sac.entropy_alpha; });
    t["sac.polyak"] = nested<double>([](RunConfig& c) -> double& { return c.sac.polyak; });
    t["sac.lr"] = nested<double>([](RunConfig& c) -> double& { return c.sac.lr; });
    t["sac.buffer_capacity"] = nested<std::size_t>([](RunConfig& c) -> std::size_t& { return c.sac.buffer_capacity; });
    t["sac.batch"] = nested<std::size_t>([](RunConfig& c) -> std::size_t& { return c.sac.batch; });
    t["sac.updates_per_step"] = nested<std::size_t>([](RunConfig& c) -> std::size_t& { return c.sac.updates_per_step; });
    t["sac.single_q"] = nested<bool>([](RunConfig& c) -> bool& { return c.sac.single_q; });
    t["sac.hidden"] = {[](const RunConfig& c) {
                         std::vector<std::string> s;
                         for (auto h : c.sac.hidden) s.push_back(std::to_string(h));
                         return join(s);
                       },
                       [](RunConfig& c, const std::string& k, const std::string& v) {
                         std::vector<std::size_t> h;
                         for (const auto& item : split_list(v)) h.push_back(to_size(k, item));
                         if (h.empty()) bad(k, v, "a comma-separated width list");
                         c.sac.hidden = h;
                       }};

    t["fusion.mode"] = {[](const RunConfig& c) { return std::string(heads::fusion_mode_name(c.fusion.mode)); },
                        [](RunConfig& c, const std::string&, const std::string& v) {
                          c.fusion.mode = heads::parse_fusion_mode(v);
                        }};
    t["fusion.attention"] = nested<bool>([](RunConfig& c) -> bool& { return c.fusion.use_attention; });
    t["fusion.classifier_head"] = nested<bool>([](RunConfig& c) -> bool& { return c.fusion.use_classifier_head; });
    t["fusion.dropout"] = nested<double>([](RunConfig& c) -> double& { return c.fusion.dropout_rate; });
    t["fusion.hidden"] = nested<std::size_t>([](RunConfig& c) -> std::size_t& { return c.fusion.hidden; });

    for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
      const std::string p = std::string("encoder.") + kDomainKeys[d];
      t[p + ".kind"] = {[d](const RunConfig& c) { return std::string(encoders::encoder_kind_name(c.encoder[d].kind)); },
                        [d](RunConfig& c, const std::string&, const std::string& v) {
                          c.encoder[d].kind = encoders::parse_encoder_kind(v);
                        }};
      t[p + ".width"] = nested<std::size_t>([d](RunConfig& c) -> std::size_t& { return c.encoder[d].width; });
      t[p + ".depth"] = nested<std::size_t>([d](RunConfig& c) -> std::size_t& { return c.encoder[d].depth; });
    }
    t["projection.hidden"] = nested<std::size_t>([](RunConfig& c) -> std::size_t& { return c.projection.hidden_dim; });
    t["projection.out"] = nested<std::size_t>([](RunConfig& c) -> std::size_t& { return c.projection.out_dim; });

    t["constellation.size"] = {
        [](const RunConfig& c) { return std::to_string(c.constellation.height); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          c.constellation.height = c.constellation.width = to_size(k, v);
        }};
    t["constellation.extent"] = nested<double>([](RunConfig& c) -> double& { return c.constellation.extent; });
    t["constellation.norm"] = {
        [](const RunConfig& c) {
          switch (c.constellation.normalize) {
            case domains::DensityNorm::count: return std::string("count");
            case domains::DensityNorm::log1p: return std::string("log1p");
            case domains::DensityNorm::max_one: return std::string("max_one");
            case domains::DensityNorm::log1p_max: return std::string("log1p_max");
          }
          return std::string("?");
        },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "count") c.constellation.normalize = domains::DensityNorm::count;
          else if (v == "log1p") c.constellation.normalize = domains::DensityNorm::log1p;
          else if (v == "max_one") c.constellation.normalize = domains::DensityNorm::max_one;
          else if (v == "log1p_max") c.constellation.normalize = domains::DensityNorm::log1p_max;
          else bad(k, v, "one of count, log1p, max_one, log1p_max");
        }};
    t["freq.repr"] = {[](const RunConfig& c) {
                        return std::string(c.freq_repr == domains::FreqRepr::magphase ? "magphase" : "reim");
                      },
                      [](RunConfig& c, const std::string& k, const std::string& v) {
                        if (v == "magphase") c.freq_repr = domains::FreqRepr::magphase;
                        else if (v == "reim") c.freq_repr = domains::FreqRepr::reim;
                        else bad(k, v, "magphase or reim");
                      }};
    return t;
  }();
  return table;
}

}  // namespace

void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& reg = registry();
  const auto it = reg.find(key);
  if (it == reg.end()) throw InvalidArgument("unknown config key '" + key + "'");
  it->second.set(cfg, key, trim(value));
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InvalidArgument("override '" + assignment + "' is not key=value");
  set_value(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig parse_text(const std::string& text, RunConfig base) {
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.find('=') == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) + " is not key=value: " + line);
    apply_override(base, line);
  }
  return base;
}

std::map<std::string, std::string> to_map(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [k, e] : registry()) out[k] = e.get(cfg);
  return out;
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : to_map(cfg)) out += k + " = " + v + "\n";
  return out;
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : to_map(cfg)) {
    // Numbers and booleans keep their JSON type; everything else stays text.
    auto parsed = nlohmann::json::parse(v, nullptr, false);
    j[k] = parsed.is_number() || parsed.is_boolean() ? std::move(parsed) : nlohmann::json(v);
  }
  return j;
}

}  // namespace sigcl::config
