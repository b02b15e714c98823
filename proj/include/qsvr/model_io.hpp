#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "qsvr/error.hpp"
#include "qsvr/svr.hpp"

namespace qsvr {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json kernel_to_json(const KernelSpec& k) {
  return {{"kind", std::string(to_string(k.kind))}, {"eta", k.eta}, {"degree", k.degree}, {"shift", k.shift}};
}

inline KernelSpec kernel_from_json(const nlohmann::json& j) {
  KernelSpec k;
  k.kind = parse_kernel_kind(j.at("kind").get<std::string>());
  k.eta = j.at("eta").get<double>();
  k.degree = j.at("degree").get<int>();
  k.shift = j.at("shift").get<double>();
  k.validate();
  return k;
}

inline nlohmann::json model_to_json(const SvrModel& m) {
  nlohmann::json meta = {{"method", std::string(to_string(m.metadata.method))},
                         {"seeds", m.metadata.seeds},
                         {"lambda", m.metadata.lambda},
                         {"converged", m.metadata.converged},
                         {"kkt_consistent", m.metadata.kkt_consistent}};
  if (m.metadata.encoding)
    meta["encoding"] = {{"bits", m.metadata.encoding->bits}, {"frac_bits", m.metadata.encoding->frac_bits}};
  else
    meta["encoding"] = nullptr;

  nlohmann::json members = nlohmann::json::array();
  for (const auto& mem : m.members)
    members.push_back({{"alphas", mem.alphas}, {"offset", mem.offset}, {"kkt_consistent", mem.kkt_consistent}});

  return {{"format_version", kModelFormatVersion},
          {"kernel", kernel_to_json(m.kernel)},
          {"epsilon", m.epsilon},
          {"gamma", m.gamma},
          {"alphas", m.alphas},
          {"support_xs", m.support_xs},
          {"offset", m.offset},
          {"metadata", std::move(meta)},
          {"members", std::move(members)}};
}

inline SvrModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("format_version"))
    throw CompatibilityError("model: missing format_version");
  const int version = j.at("format_version").get<int>();
  if (version != kModelFormatVersion)
    throw CompatibilityError("model: format_version " + std::to_string(version) + " is not supported (expected " +
                             std::to_string(kModelFormatVersion) + ")");
  try {
    SvrModel m;
    m.kernel = kernel_from_json(j.at("kernel"));
    m.epsilon = j.at("epsilon").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.alphas = j.at("alphas").get<Vector>();
    m.support_xs = j.at("support_xs").get<std::vector<Vector>>();
    m.offset = j.at("offset").get<double>();
    const auto& meta = j.at("metadata");
    m.metadata.method = parse_method(meta.at("method").get<std::string>());
    m.metadata.seeds = meta.at("seeds").get<std::vector<std::uint64_t>>();
    m.metadata.lambda = meta.at("lambda").get<double>();
    m.metadata.converged = meta.at("converged").get<bool>();
    m.metadata.kkt_consistent = meta.at("kkt_consistent").get<bool>();
    if (!meta.at("encoding").is_null())
      m.metadata.encoding = Encoding{meta["encoding"].at("bits").get<int>(), meta["encoding"].at("frac_bits").get<int>()};
    for (const auto& mem : j.value("members", nlohmann::json::array()))
      m.members.push_back(
          {mem.at("alphas").get<Vector>(), mem.at("offset").get<double>(), mem.at("kkt_consistent").get<bool>()});
    if (m.alphas.size() != 2 * m.support_xs.size()) throw InvalidInput("model: alphas length != 2 * support size");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("model: malformed JSON: ") + e.what());
  }
}

inline void save_model(const std::string& path, const SvrModel& m) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot write " + path);
  os << model_to_json(m).dump(1) << '\n';
}

inline SvrModel load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot read " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, e.byte, e.what());
  }
  return model_from_json(j);
}

}  // namespace qsvr
