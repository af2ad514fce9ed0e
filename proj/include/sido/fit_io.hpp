#pragma once

// Posterior fit files.
//
// Layout:
//   8 bytes   magic "SIDOFIT1"
//   8 bytes   little-endian uint64 header length L
//   L bytes   UTF-8 JSON header (format_version, config, identity,
//             dimensions, parameter name table, index-space ids)
//   rest      little-endian IEEE-754 float64 draws, parameter-major then
//             chain-major then draw, in the header's parameter order

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sido/error.hpp"
#include "sido/inference.hpp"

namespace sido::infer {

inline constexpr std::string_view kFitMagic = "SIDOFIT1";
inline constexpr int kFitFormatVersion = 1;

inline nlohmann::json config_to_json(const ModelConfig& c) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"has_covariate", c.has_covariate},
          {"intercept_sd", c.intercept_sd},
          {"covariate_sd", c.covariate_sd},
          {"effect_scale_prior", c.effect_scale_prior},
          {"noise_scale_prior", c.noise_scale_prior},
          {"effect_dof", c.normal_effects() ? nlohmann::json(nullptr) : nlohmann::json(c.effect_dof)},
          {"chains", c.chains},
          {"warmup", c.warmup},
          {"draws", c.draws},
          {"seed", c.seed},
          {"fixed_tau", opt(c.fixed_tau)},
          {"fixed_phi", opt(c.fixed_phi)},
          {"fixed_sigma", opt(c.fixed_sigma)},
          {"fixed_intercept", opt(c.fixed_intercept)}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  ModelConfig c;
  c.has_covariate = j.at("has_covariate").get<bool>();
  c.intercept_sd = j.at("intercept_sd").get<double>();
  c.covariate_sd = j.at("covariate_sd").get<double>();
  c.effect_scale_prior = j.at("effect_scale_prior").get<double>();
  c.noise_scale_prior = j.at("noise_scale_prior").get<double>();
  c.effect_dof = j.at("effect_dof").is_null() ? std::numeric_limits<double>::infinity()
                                              : j.at("effect_dof").get<double>();
  c.chains = j.at("chains").get<int>();
  c.warmup = j.at("warmup").get<int>();
  c.draws = j.at("draws").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.fixed_tau = opt("fixed_tau");
  c.fixed_phi = opt("fixed_phi");
  c.fixed_sigma = opt("fixed_sigma");
  c.fixed_intercept = opt("fixed_intercept");
  return c;
}

inline nlohmann::json identity_to_json(const CellKey& k) {
  return {{"role", to_string(k.role)},
          {"server", to_string(k.server)},
          {"phase", to_string(k.phase)},
          {"stat", to_string(k.stat)},
          {"scope", to_string(k.scope)}};
}

inline CellKey identity_from_json(const nlohmann::json& j) {
  auto get = [&]<class E>(const char* key, E) {
    auto v = parse_enum<E>(j.at(key).get<std::string>());
    if (!v) throw IoError(std::string("corrupt fit file: bad identity field ") + key);
    return *v;
  };
  return CellKey{get("role", Role{}), get("server", Server{}), get("phase", Phase{}), get("stat", Stat{}),
                 get("scope", Scope{})};
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(bytes, 8);
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void write_fit(std::ostream& os, const PosteriorFit& fit) {
  const nlohmann::json header{{"format_version", kFitFormatVersion},
                              {"config", config_to_json(fit.config)},
                              {"identity", identity_to_json(fit.identity)},
                              {"n_params", fit.n_params()},
                              {"n_chains", fit.n_chains},
                              {"n_draws", fit.n_draws},
                              {"param_names", fit.param_names},
                              {"account_ids", fit.account_ids},
                              {"champion_ids", fit.champion_ids},
                              {"warnings", fit.warnings}};
  const std::string text = header.dump();
  os.write(kFitMagic.data(), static_cast<std::streamsize>(kFitMagic.size()));
  detail::put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double d : fit.draws) detail::put_u64(os, std::bit_cast<std::uint64_t>(d));
  if (!os) throw IoError("failed writing fit");
}

inline PosteriorFit read_fit(std::istream& is) {
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 16) throw IoError("corrupt fit file: truncated preamble");
  if (bytes.compare(0, 8, kFitMagic) != 0) {
    if (bytes.compare(0, 7, kFitMagic.substr(0, 7)) == 0) {
      throw IoError("fit file version mismatch: found magic " + bytes.substr(0, 8));
    }
    throw IoError("corrupt fit file: bad magic");
  }
  const std::uint64_t header_len = detail::get_u64(p + 8);
  if (header_len > bytes.size() - 16) throw IoError("corrupt fit file: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt fit file: bad header: ") + e.what());
  }
  PosteriorFit fit;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kFitFormatVersion) {
      throw IoError("fit file version mismatch: file has " + std::to_string(version) + ", reader supports " +
                    std::to_string(kFitFormatVersion));
    }
    fit.config = config_from_json(header.at("config"));
    fit.identity = identity_from_json(header.at("identity"));
    fit.param_names = header.at("param_names").get<std::vector<std::string>>();
    fit.account_ids = header.at("account_ids").get<std::vector<std::string>>();
    fit.champion_ids = header.at("champion_ids").get<std::vector<std::string>>();
    fit.n_chains = header.at("n_chains").get<std::size_t>();
    fit.n_draws = header.at("n_draws").get<std::size_t>();
    fit.warnings = header.at("warnings").get<std::vector<std::string>>();
    if (header.at("n_params").get<std::size_t>() != fit.param_names.size()) {
      throw IoError("corrupt fit file: parameter table size mismatch");
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt fit file: ") + e.what());
  }
  if (fit.param_names !=
      parameter_names(fit.config.has_covariate, fit.account_ids.size(), fit.champion_ids.size())) {
    throw IoError("corrupt fit file: parameter table inconsistent with index spaces");
  }
  const std::size_t n_values = fit.n_params() * fit.n_chains * fit.n_draws;
  const std::size_t body = bytes.size() - 16 - header_len;
  if (body != n_values * 8) {
    throw IoError("corrupt fit file: expected " + std::to_string(n_values * 8) + " bytes of draws, found " +
                  std::to_string(body));
  }
  fit.draws.resize(n_values);
  const unsigned char* q = p + 16 + header_len;
  for (std::size_t i = 0; i < n_values; ++i) fit.draws[i] = std::bit_cast<double>(detail::get_u64(q + 8 * i));
  return fit;
}

inline void save_fit(const PosteriorFit& fit, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_fit(os, fit);
}

inline PosteriorFit load_fit(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_fit(is);
}

/// File name of a fit inside a fit directory, keyed by cell identity.
inline std::filesystem::path fit_filename(const CellKey& key) { return "fit_" + key.label() + ".sidofit"; }

inline std::filesystem::path save_fit_to_dir(const PosteriorFit& fit, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto path = dir / fit_filename(fit.identity);
  save_fit(fit, path);
  return path;
}

inline PosteriorFit load_fit_from_dir(const std::filesystem::path& dir, const CellKey& key) {
  return load_fit(dir / fit_filename(key));
}

}  // namespace sido::infer
